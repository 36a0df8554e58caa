//! Bag-of-centroids keyword model: k-means over embedding vectors, a
//! histogram feature counting tokens per nearest centroid, and a two-layer
//! sigmoid decoder.

mod kmeans;

pub use kmeans::{
    kmeans_fit, load_centroids, nearest_centroid, save_centroids, CentroidSet, KmeansFit,
    CENTROID_MAGIC,
};

use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::{
    self, checkpoint, dense_backward, dense_forward, init, relu_backward, relu_forward,
    sigmoid_forward, Adam, Tensor,
};
use crate::text::{embed_tokens, EmbeddingTable};

/// Counts, per centroid, how many in-vocabulary tokens fall nearest to it.
/// Out-of-vocabulary tokens are dropped; the histogram is raw counts, so it
/// sums to the number of embedded tokens.
pub fn histogram_feature<S: AsRef<str>>(
    tokens: &[S],
    table: &EmbeddingTable,
    centroids: &CentroidSet,
) -> Result<Vec<f64>> {
    let (matrix, _) = embed_tokens(tokens, table);
    let mut hist = vec![0.0; centroids.k];
    for i in 0..matrix.shape()[0] {
        let idx = nearest_centroid(matrix.row(i), centroids)?;
        hist[idx] += 1.0;
    }
    Ok(hist)
}

/// Two dense layers with a ReLU between them and a sigmoid output head.
#[derive(Debug, Clone, PartialEq)]
pub struct HistogramDecoder {
    pub w1: Tensor,
    pub b1: Tensor,
    pub w2: Tensor,
    pub b2: Tensor,
}

impl HistogramDecoder {
    pub fn init(input_dim: usize, hidden: usize, num_labels: usize, seed: u64) -> Self {
        let mut rng = init::seeded_rng(seed);
        HistogramDecoder {
            w1: init::kaiming(&[input_dim, hidden], input_dim, &mut rng),
            b1: Tensor::zeros(&[hidden]),
            w2: init::xavier(&[hidden, num_labels], hidden, num_labels, &mut rng),
            b2: Tensor::zeros(&[num_labels]),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w1.shape()[0]
    }

    pub fn num_labels(&self) -> usize {
        self.w2.shape()[1]
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        checkpoint::save_tensors(
            path,
            &[("w1", &self.w1), ("b1", &self.b1), ("w2", &self.w2), ("b2", &self.b2)],
        )
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut map = checkpoint::TensorMap::load(path)?;
        Ok(HistogramDecoder {
            w1: map.take("w1")?,
            b1: map.take("b1")?,
            w2: map.take("w2")?,
            b2: map.take("b2")?,
        })
    }
}

#[derive(Debug, Clone)]
pub struct DecoderHyper {
    pub hidden: usize,
    pub lr: f64,
    pub batch: usize,
    pub epochs: usize,
    pub seed: u64,
    pub weight_decay: f64,
}

impl Default for DecoderHyper {
    fn default() -> Self {
        DecoderHyper {
            hidden: 512,
            lr: 0.001,
            batch: 64,
            epochs: 10,
            seed: 0,
            weight_decay: 0.0,
        }
    }
}

/// Minimizes binary cross-entropy with Adam over seeded, shuffled minibatches.
/// Returns the trained decoder and the mean loss of the final epoch (NaN when
/// epochs = 0).
pub fn decoder_train(
    features: &Tensor,
    labels: &Tensor,
    hyper: &DecoderHyper,
) -> Result<(HistogramDecoder, f64)> {
    if features.rank() != 2 || labels.rank() != 2 {
        return Err(Error::shape("decoder_train expects [n,k] features, [n,L] labels"));
    }
    let (n, input_dim) = (features.shape()[0], features.shape()[1]);
    let num_labels = labels.shape()[1];
    if labels.shape()[0] != n {
        return Err(Error::shape(format!(
            "decoder_train: {n} feature rows vs {} label rows",
            labels.shape()[0]
        )));
    }
    if n == 0 {
        return Err(Error::invalid("decoder_train: empty training set"));
    }

    let mut model = HistogramDecoder::init(input_dim, hyper.hidden, num_labels, hyper.seed);
    let mut opt = Adam::new(
        hyper.lr,
        hyper.weight_decay,
        &[&model.w1, &model.b1, &model.w2, &model.b2],
    );
    let mut final_loss = f64::NAN;
    let mut order: Vec<usize> = (0..n).collect();
    let mut shuffle_rng = init::seeded_rng(hyper.seed.wrapping_add(1));
    for _ in 0..hyper.epochs {
        use rand::seq::SliceRandom;
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(hyper.batch.max(1)) {
            let xb = gather_rows(features, chunk);
            let yb = gather_rows(labels, chunk);
            let loss = decoder_step(&mut model, &mut opt, &xb, &yb)?;
            epoch_loss += loss;
            batches += 1;
        }
        final_loss = epoch_loss / batches as f64;
    }
    Ok((model, final_loss))
}

fn gather_rows(t: &Tensor, rows: &[usize]) -> Tensor {
    let cols = t.shape()[1];
    let mut data = Vec::with_capacity(rows.len() * cols);
    for &r in rows {
        data.extend_from_slice(t.row(r));
    }
    Tensor::from_vec(&[rows.len(), cols], data)
}

fn decoder_step(
    model: &mut HistogramDecoder,
    opt: &mut Adam,
    x: &Tensor,
    y: &Tensor,
) -> Result<f64> {
    let z1 = dense_forward(x, &model.w1, &model.b1)?;
    let h = relu_forward(&z1);
    let z2 = dense_forward(&h, &model.w2, &model.b2)?;
    let p = sigmoid_forward(&z2);
    let loss = nn::bce_loss(&p, y)?;

    let dp = nn::bce_backward(&p, y)?;
    let dz2 = nn::sigmoid_backward(&p, &dp)?;
    let (dh, dw2, db2) = dense_backward(&h, &model.w2, &dz2)?;
    let dz1 = relu_backward(&z1, &dh)?;
    let (_, dw1, db1) = dense_backward(x, &model.w1, &dz1)?;

    opt.step(
        &mut [&mut model.w1, &mut model.b1, &mut model.w2, &mut model.b2],
        &[&dw1, &db1, &dw2, &db2],
    )?;
    Ok(loss)
}

/// Infer-mode forward pass: scores in (0,1), one row per feature row.
pub fn decoder_predict(model: &HistogramDecoder, features: &Tensor) -> Result<Tensor> {
    if features.rank() != 2 || features.shape()[1] != model.input_dim() {
        return Err(Error::shape(format!(
            "decoder_predict: expected [n,{}], got {:?}",
            model.input_dim(),
            features.shape()
        )));
    }
    let h = relu_forward(&dense_forward(features, &model.w1, &model.b1)?);
    Ok(sigmoid_forward(&dense_forward(
        &h, &model.w2, &model.b2,
    )?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> EmbeddingTable {
        let mut t = EmbeddingTable::new(2);
        t.insert("a".into(), vec![0.0, 0.0]).unwrap();
        t.insert("b".into(), vec![0.0, 1.0]).unwrap();
        t.insert("c".into(), vec![10.0, 10.0]).unwrap();
        t
    }

    fn centroids() -> CentroidSet {
        CentroidSet {
            k: 4,
            dim: 2,
            centroids: vec![0.0, 0.0, 0.0, 1.0, 5.0, 5.0, 10.0, 10.0],
            inertia: 0.0,
        }
    }

    #[test]
    fn histogram_sums_one_hots() {
        let h = histogram_feature(&["a", "a", "c"], &table(), &centroids()).unwrap();
        assert_eq!(h, vec![2.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn all_oov_gives_zero_vector() {
        let h = histogram_feature(&["x", "y"], &table(), &centroids()).unwrap();
        assert_eq!(h, vec![0.0; 4]);
    }

    #[test]
    fn histogram_is_order_free() {
        let h1 = histogram_feature(&["a", "b", "c"], &table(), &centroids()).unwrap();
        let h2 = histogram_feature(&["c", "a", "b"], &table(), &centroids()).unwrap();
        assert_eq!(h1, h2);
        let total: f64 = h1.iter().sum();
        assert_eq!(total, 3.0);
    }

    #[test]
    fn zero_output_layer_scores_half() {
        let mut model = HistogramDecoder::init(4, 8, 3, 1);
        model.w2 = Tensor::zeros(&[8, 3]);
        model.b2 = Tensor::zeros(&[3]);
        let f = Tensor::from_vec(&[2, 4], vec![1.0, 0.0, 2.0, 0.0, 0.0, 1.0, 0.0, 3.0]);
        let p = decoder_predict(&model, &f).unwrap();
        for &v in p.data() {
            assert_eq!(v, 0.5);
        }
    }

    #[test]
    fn no_batch_coupling_in_infer() {
        let model = HistogramDecoder::init(4, 8, 3, 2);
        let f8 = Tensor::from_vec(&[8, 4], (0..32).map(|i| (i % 5) as f64).collect());
        let p8 = decoder_predict(&model, &f8).unwrap();
        let f1 = Tensor::from_vec(&[1, 4], f8.row(3).to_vec());
        let p1 = decoder_predict(&model, &f1).unwrap();
        assert_eq!(p1.row(0), p8.row(3));
    }

    #[test]
    fn zero_epochs_returns_initialization() {
        let features = Tensor::from_vec(&[2, 4], vec![1.0; 8]);
        let labels = Tensor::from_vec(&[2, 2], vec![1.0, 0.0, 0.0, 1.0]);
        let hyper = DecoderHyper {
            epochs: 0,
            hidden: 8,
            seed: 5,
            ..Default::default()
        };
        let (model, loss) = decoder_train(&features, &labels, &hyper).unwrap();
        assert_eq!(model, HistogramDecoder::init(4, 8, 2, 5));
        assert!(loss.is_nan());
    }

    #[test]
    fn training_is_seed_deterministic() {
        let features = Tensor::from_vec(&[6, 4], (0..24).map(|i| (i % 3) as f64).collect());
        let labels = Tensor::from_vec(&[6, 2], (0..12).map(|i| (i % 2) as f64).collect());
        let hyper = DecoderHyper {
            epochs: 3,
            hidden: 8,
            batch: 2,
            seed: 9,
            ..Default::default()
        };
        let (a, la) = decoder_train(&features, &labels, &hyper).unwrap();
        let (b, lb) = decoder_train(&features, &labels, &hyper).unwrap();
        assert_eq!(a, b);
        assert_eq!(la, lb);
    }

    #[test]
    fn learns_linearly_separable_toy() {
        // 20 samples over k=4: label 0 iff bin 0 dominates, else label 1
        let mut rows = Vec::new();
        let mut targets = Vec::new();
        for i in 0..20 {
            if i % 2 == 0 {
                rows.extend_from_slice(&[3.0, 0.0, 1.0, 0.0]);
                targets.extend_from_slice(&[1.0, 0.0]);
            } else {
                rows.extend_from_slice(&[0.0, 2.0, 0.0, 2.0]);
                targets.extend_from_slice(&[0.0, 1.0]);
            }
        }
        let features = Tensor::from_vec(&[20, 4], rows);
        let labels = Tensor::from_vec(&[20, 2], targets);
        let hyper = DecoderHyper {
            hidden: 8,
            lr: 0.05,
            batch: 5,
            epochs: 200,
            seed: 3,
            weight_decay: 0.0,
        };
        let (model, final_loss) = decoder_train(&features, &labels, &hyper).unwrap();
        let p = decoder_predict(&model, &features).unwrap();
        let mut hits = 0;
        for i in 0..20 {
            let row = p.row(i);
            let top = if row[0] >= row[1] { 0 } else { 1 };
            let truth = if i % 2 == 0 { 0 } else { 1 };
            if top == truth {
                hits += 1;
            }
        }
        assert_eq!(hits, 20, "training Hit@1 must reach 1.0");
        assert!(final_loss < 0.1, "final loss {final_loss}");
    }
}
