//! Mixture-of-Experts head over concatenated modality features.
//!
//! Per class c the score is sum over experts e of
//! softmax_e(gate_c(x)) * sigmoid(expert_{c,e}(x)), where gate and experts
//! are affine maps realized as shared `[input_dim, |L|*E]` matrices. With a
//! single expert the gate is constant 1 and the model reduces exactly to
//! per-class logistic regression.

use std::path::Path;

use crate::data::PredictionList;
use crate::error::{Error, Result};
use crate::nn::checkpoint::{self, TensorMap};
use crate::nn::{
    bce_backward, bce_loss, dense_backward, dense_forward, init, sigmoid, Adam, Tensor,
};
use crate::seed::derive_seed;

/// Which modalities feed the classifier. Concatenation order is fixed:
/// visual, audio, keyword histogram, title features.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModalityMask {
    pub visual: bool,
    pub audio: bool,
    pub keyword: bool,
    pub title: bool,
}

impl ModalityMask {
    pub const ALL: ModalityMask = ModalityMask {
        visual: true,
        audio: true,
        keyword: true,
        title: true,
    };

    pub fn any(&self) -> bool {
        self.visual || self.audio || self.keyword || self.title
    }

    /// Parses a comma-separated list like "visual,audio,keyword,title".
    pub fn parse(s: &str) -> Result<Self> {
        let mut mask = ModalityMask {
            visual: false,
            audio: false,
            keyword: false,
            title: false,
        };
        for part in s.split(',') {
            match part.trim() {
                "visual" => mask.visual = true,
                "audio" => mask.audio = true,
                "keyword" => mask.keyword = true,
                "title" => mask.title = true,
                "" => {}
                other => {
                    return Err(Error::invalid(format!(
                        "unknown modality `{other}` (expected visual|audio|keyword|title)"
                    )))
                }
            }
        }
        if !mask.any() {
            return Err(Error::invalid("no modality enabled"));
        }
        Ok(mask)
    }

    pub fn to_string_list(&self) -> String {
        let mut parts = Vec::new();
        if self.visual {
            parts.push("visual");
        }
        if self.audio {
            parts.push("audio");
        }
        if self.keyword {
            parts.push("keyword");
        }
        if self.title {
            parts.push("title");
        }
        parts.join(",")
    }
}

/// Nominal per-modality feature dims; disabled modalities contribute 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModalityDims {
    pub visual: usize,
    pub audio: usize,
    pub keyword: usize,
    pub title: usize,
}

impl ModalityDims {
    pub fn input_dim(&self, mask: &ModalityMask) -> usize {
        let mut d = 0;
        if mask.visual {
            d += self.visual;
        }
        if mask.audio {
            d += self.audio;
        }
        if mask.keyword {
            d += self.keyword;
        }
        if mask.title {
            d += self.title;
        }
        d
    }
}

/// Assembles one input vector in the canonical order. Optional text
/// modalities that are absent for a record (no usable text) are zero-imputed
/// at their nominal dims.
pub fn concat_features(
    mask: &ModalityMask,
    dims: &ModalityDims,
    visual: Option<&[f64]>,
    audio: Option<&[f64]>,
    keyword_hist: Option<&[f64]>,
    title_feat: Option<&[f64]>,
) -> Result<Vec<f64>> {
    if !mask.any() {
        return Err(Error::invalid("concat_features: all modalities disabled"));
    }
    let mut out = Vec::with_capacity(dims.input_dim(mask));
    let mut push = |enabled: bool, dim: usize, part: Option<&[f64]>, name: &str| -> Result<()> {
        if !enabled {
            return Ok(());
        }
        match part {
            Some(v) if v.len() == dim => out.extend_from_slice(v),
            Some(v) => {
                return Err(Error::shape(format!(
                    "{name} feature has dim {}, expected {dim}",
                    v.len()
                )))
            }
            None => out.extend(std::iter::repeat(0.0).take(dim)),
        }
        Ok(())
    };
    push(mask.visual, dims.visual, visual, "visual")?;
    push(mask.audio, dims.audio, audio, "audio")?;
    push(mask.keyword, dims.keyword, keyword_hist, "keyword")?;
    push(mask.title, dims.title, title_feat, "title")?;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MoeParams {
    pub num_experts: usize,
    pub num_labels: usize,
    pub mask: ModalityMask,
    pub dims: ModalityDims,
    /// [input_dim, |L|*E]
    pub gate_w: Tensor,
    pub gate_b: Tensor,
    /// [input_dim, |L|*E]
    pub expert_w: Tensor,
    pub expert_b: Tensor,
}

impl MoeParams {
    pub fn init(
        num_experts: usize,
        num_labels: usize,
        mask: ModalityMask,
        dims: ModalityDims,
        seed: u64,
    ) -> Result<Self> {
        if num_experts == 0 || num_labels == 0 {
            return Err(Error::invalid("moe: experts and labels must be >= 1"));
        }
        let input_dim = dims.input_dim(&mask);
        if input_dim == 0 {
            return Err(Error::invalid("moe: input dim is zero"));
        }
        let mut rng = init::seeded_rng(seed);
        let wide = num_labels * num_experts;
        Ok(MoeParams {
            num_experts,
            num_labels,
            mask,
            dims,
            gate_w: init::xavier(&[input_dim, wide], input_dim, wide, &mut rng),
            gate_b: Tensor::zeros(&[wide]),
            expert_w: init::xavier(&[input_dim, wide], input_dim, wide, &mut rng),
            expert_b: Tensor::zeros(&[wide]),
        })
    }

    pub fn input_dim(&self) -> usize {
        self.gate_w.shape()[0]
    }
}

struct MoeCache {
    /// softmax over experts, [B, L*E]
    gates: Tensor,
    /// sigmoid expert outputs, [B, L*E]
    experts: Tensor,
}

fn moe_forward_impl(params: &MoeParams, x: &Tensor) -> Result<(Tensor, MoeCache)> {
    if x.rank() != 2 || x.shape()[1] != params.input_dim() {
        return Err(Error::shape(format!(
            "moe_forward: expected [B,{}], got {:?}",
            params.input_dim(),
            x.shape()
        )));
    }
    let b = x.shape()[0];
    let (l, e) = (params.num_labels, params.num_experts);
    let gate_z = dense_forward(x, &params.gate_w, &params.gate_b)?;
    let expert_z = dense_forward(x, &params.expert_w, &params.expert_b)?;

    let mut gates = vec![0.0; b * l * e];
    let mut experts = vec![0.0; b * l * e];
    let mut scores = vec![0.0; b * l];
    for bi in 0..b {
        for li in 0..l {
            let base = bi * l * e + li * e;
            let zr = &gate_z.data()[base..base + e];
            let m = zr.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for ei in 0..e {
                let v = (zr[ei] - m).exp();
                gates[base + ei] = v;
                sum += v;
            }
            let mut score = 0.0;
            for ei in 0..e {
                gates[base + ei] /= sum;
                let s = sigmoid(expert_z.data()[base + ei]);
                experts[base + ei] = s;
                score += gates[base + ei] * s;
            }
            scores[bi * l + li] = score;
        }
    }
    Ok((
        Tensor::from_vec(&[b, l], scores),
        MoeCache {
            gates: Tensor::from_vec(&[b, l * e], gates),
            experts: Tensor::from_vec(&[b, l * e], experts),
        },
    ))
}

/// Scores `[B, |L|]`, each strictly inside (0,1).
pub fn moe_forward(params: &MoeParams, x: &Tensor) -> Result<Tensor> {
    Ok(moe_forward_impl(params, x)?.0)
}

/// Gradients wrt (gate_w, gate_b, expert_w, expert_b) given dL/dscores.
fn moe_backward(
    params: &MoeParams,
    x: &Tensor,
    cache: &MoeCache,
    d_scores: &Tensor,
) -> Result<(Tensor, Tensor, Tensor, Tensor)> {
    let b = x.shape()[0];
    let (l, e) = (params.num_labels, params.num_experts);
    d_scores.check_shape(&[b, l], "moe_backward d_scores")?;

    let mut d_gate_z = vec![0.0; b * l * e];
    let mut d_expert_z = vec![0.0; b * l * e];
    for bi in 0..b {
        for li in 0..l {
            let base = bi * l * e + li * e;
            let ds = d_scores.data()[bi * l + li];
            let g = &cache.gates.data()[base..base + e];
            let s = &cache.experts.data()[base..base + e];
            // d score / d expert_z = gate * s(1-s)
            for ei in 0..e {
                d_expert_z[base + ei] = ds * g[ei] * s[ei] * (1.0 - s[ei]);
            }
            // d score / d gate_z via softmax: g_e (s_e - sum_k g_k s_k)
            let mix: f64 = g.iter().zip(s.iter()).map(|(&gv, &sv)| gv * sv).sum();
            for ei in 0..e {
                d_gate_z[base + ei] = ds * g[ei] * (s[ei] - mix);
            }
        }
    }
    let d_gate_z = Tensor::from_vec(&[b, l * e], d_gate_z);
    let d_expert_z = Tensor::from_vec(&[b, l * e], d_expert_z);
    let (_, d_gate_w, d_gate_b) = dense_backward(x, &params.gate_w, &d_gate_z)?;
    let (_, d_expert_w, d_expert_b) = dense_backward(x, &params.expert_w, &d_expert_z)?;
    Ok((d_gate_w, d_gate_b, d_expert_w, d_expert_b))
}

/// BCE loss plus analytic gradients (gate_w, gate_b, expert_w, expert_b);
/// used by gradient checks.
pub fn loss_and_param_grads(
    params: &MoeParams,
    x: &Tensor,
    y: &Tensor,
) -> Result<(f64, Vec<Tensor>)> {
    let (scores, cache) = moe_forward_impl(params, x)?;
    let loss = bce_loss(&scores, y)?;
    let d_scores = bce_backward(&scores, y)?;
    let (d_gw, d_gb, d_ew, d_eb) = moe_backward(params, x, &cache, &d_scores)?;
    Ok((loss, vec![d_gw, d_gb, d_ew, d_eb]))
}

/// One BCE training step; exposed for the reduction oracle in tests.
pub fn moe_train_step(
    params: &mut MoeParams,
    opt: &mut Adam,
    x: &Tensor,
    y: &Tensor,
) -> Result<f64> {
    let (scores, cache) = moe_forward_impl(params, x)?;
    let loss = bce_loss(&scores, y)?;
    let d_scores = bce_backward(&scores, y)?;
    let (d_gw, d_gb, d_ew, d_eb) = moe_backward(params, x, &cache, &d_scores)?;
    opt.step(
        &mut [
            &mut params.gate_w,
            &mut params.gate_b,
            &mut params.expert_w,
            &mut params.expert_b,
        ],
        &[&d_gw, &d_gb, &d_ew, &d_eb],
    )?;
    Ok(loss)
}

#[derive(Debug, Clone)]
pub struct MoeHyper {
    pub num_experts: usize,
    pub lr: f64,
    pub batch: usize,
    pub epochs: usize,
    pub seed: u64,
    pub weight_decay: f64,
}

impl Default for MoeHyper {
    fn default() -> Self {
        MoeHyper {
            num_experts: 8,
            lr: 0.01,
            batch: 64,
            epochs: 20,
            seed: 0,
            weight_decay: 0.0,
        }
    }
}

/// Trains an MoE on pre-assembled feature rows. Deterministic per seed.
/// Returns the params and the mean loss of the final epoch.
pub fn moe_train(
    features: &Tensor,
    labels: &Tensor,
    mask: ModalityMask,
    dims: ModalityDims,
    hyper: &MoeHyper,
) -> Result<(MoeParams, f64)> {
    if features.rank() != 2 || labels.rank() != 2 || features.shape()[0] != labels.shape()[0] {
        return Err(Error::shape(format!(
            "moe_train: features {:?} vs labels {:?}",
            features.shape(),
            labels.shape()
        )));
    }
    let n = features.shape()[0];
    if n == 0 {
        return Err(Error::invalid("moe_train: empty training set"));
    }
    if features.shape()[1] != dims.input_dim(&mask) {
        return Err(Error::shape(format!(
            "moe_train: feature dim {} vs mask dim {}",
            features.shape()[1],
            dims.input_dim(&mask)
        )));
    }
    let num_labels = labels.shape()[1];
    let mut params = MoeParams::init(
        hyper.num_experts,
        num_labels,
        mask,
        dims,
        derive_seed(hyper.seed, "moe-init"),
    )?;
    let mut opt = Adam::new(
        hyper.lr,
        hyper.weight_decay,
        &[&params.gate_w, &params.gate_b, &params.expert_w, &params.expert_b],
    );
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = init::seeded_rng(derive_seed(hyper.seed, "moe-shuffle"));
    let mut final_loss = f64::NAN;
    let cols = features.shape()[1];
    for _ in 0..hyper.epochs {
        use rand::seq::SliceRandom;
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(hyper.batch.max(1)) {
            let mut xb = Vec::with_capacity(chunk.len() * cols);
            let mut yb = Vec::with_capacity(chunk.len() * num_labels);
            for &i in chunk {
                xb.extend_from_slice(features.row(i));
                yb.extend_from_slice(labels.row(i));
            }
            let xb = Tensor::from_vec(&[chunk.len(), cols], xb);
            let yb = Tensor::from_vec(&[chunk.len(), num_labels], yb);
            epoch_loss += moe_train_step(&mut params, &mut opt, &xb, &yb)?;
            batches += 1;
        }
        final_loss = epoch_loss / batches as f64;
    }
    Ok((params, final_loss))
}

/// Top-k labels per row by score, descending, ties to the smaller index.
pub fn moe_predict_topk(
    params: &MoeParams,
    x: &Tensor,
    ids: &[String],
    k: usize,
) -> Result<Vec<PredictionList>> {
    let scores = moe_forward(params, x)?;
    if ids.len() != scores.shape()[0] {
        return Err(Error::invalid(format!(
            "moe_predict_topk: {} ids vs {} rows",
            ids.len(),
            scores.shape()[0]
        )));
    }
    top_k_rows(&scores, ids, k)
}

/// Shared top-k extraction for any score matrix shaped [n, |L|].
pub fn top_k_rows(scores: &Tensor, ids: &[String], k: usize) -> Result<Vec<PredictionList>> {
    let (n, l) = (scores.shape()[0], scores.shape()[1]);
    if k == 0 {
        return Err(Error::invalid("top-k: k must be >= 1"));
    }
    if k > l {
        return Err(Error::invalid(format!("top-k: k = {k} > |L| = {l}")));
    }
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let row = scores.row(i);
        let mut idx: Vec<usize> = (0..l).collect();
        idx.sort_by(|&a, &b| {
            row[b]
                .partial_cmp(&row[a])
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        let pairs: Vec<(usize, f64)> = idx[..k].iter().map(|&j| (j, row[j])).collect();
        out.push(PredictionList::new(ids[i].clone(), pairs)?);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// checkpoint: MMNN tensors plus mask/dims/config records
// ---------------------------------------------------------------------------

pub fn save_moe(params: &MoeParams, path: &Path) -> Result<()> {
    let mask = Tensor::from_vec(
        &[4],
        vec![
            params.mask.visual as u8 as f64,
            params.mask.audio as u8 as f64,
            params.mask.keyword as u8 as f64,
            params.mask.title as u8 as f64,
        ],
    );
    let dims = Tensor::from_vec(
        &[4],
        vec![
            params.dims.visual as f64,
            params.dims.audio as f64,
            params.dims.keyword as f64,
            params.dims.title as f64,
        ],
    );
    let config = Tensor::from_vec(
        &[2],
        vec![params.num_experts as f64, params.num_labels as f64],
    );
    checkpoint::save_tensors(
        path,
        &[
            ("modalities", &mask),
            ("modality_dims", &dims),
            ("config", &config),
            ("gate.w", &params.gate_w),
            ("gate.b", &params.gate_b),
            ("expert.w", &params.expert_w),
            ("expert.b", &params.expert_b),
        ],
    )
}

pub fn load_moe(path: &Path) -> Result<MoeParams> {
    let mut map = TensorMap::load(path)?;
    let mask_t = map.take("modalities")?;
    let dims_t = map.take("modality_dims")?;
    let config_t = map.take("config")?;
    if mask_t.numel() != 4 || dims_t.numel() != 4 || config_t.numel() != 2 {
        return Err(Error::malformed(path, 0, "bad moe header tensors"));
    }
    let mask = ModalityMask {
        visual: mask_t.data()[0] != 0.0,
        audio: mask_t.data()[1] != 0.0,
        keyword: mask_t.data()[2] != 0.0,
        title: mask_t.data()[3] != 0.0,
    };
    let dims = ModalityDims {
        visual: dims_t.data()[0] as usize,
        audio: dims_t.data()[1] as usize,
        keyword: dims_t.data()[2] as usize,
        title: dims_t.data()[3] as usize,
    };
    let params = MoeParams {
        num_experts: config_t.data()[0] as usize,
        num_labels: config_t.data()[1] as usize,
        mask,
        dims,
        gate_w: map.take("gate.w")?,
        gate_b: map.take("gate.b")?,
        expert_w: map.take("expert.w")?,
        expert_b: map.take("expert.b")?,
    };
    if params.gate_w.shape()[1] != params.num_labels * params.num_experts
        || params.gate_w.shape() != params.expert_w.shape()
        || params.input_dim() != dims.input_dim(&mask)
    {
        return Err(Error::malformed(path, 0, "inconsistent moe checkpoint"));
    }
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dims_va() -> ModalityDims {
        ModalityDims {
            visual: 2,
            audio: 1,
            keyword: 3,
            title: 2,
        }
    }

    #[test]
    fn concat_fixed_order() {
        let mask = ModalityMask {
            visual: true,
            audio: true,
            keyword: false,
            title: false,
        };
        let v = concat_features(&mask, &dims_va(), Some(&[1.0, 2.0]), Some(&[3.0]), None, None)
            .unwrap();
        assert_eq!(v, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn missing_text_modality_is_zero_imputed() {
        let mask = ModalityMask {
            visual: true,
            audio: false,
            keyword: true,
            title: false,
        };
        let v = concat_features(&mask, &dims_va(), Some(&[1.0, 2.0]), None, None, None).unwrap();
        assert_eq!(v, vec![1.0, 2.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn input_dim_tracks_enabled_subset() {
        let d = dims_va();
        assert_eq!(d.input_dim(&ModalityMask::ALL), 8);
        let va = ModalityMask {
            visual: true,
            audio: true,
            keyword: false,
            title: false,
        };
        assert_eq!(d.input_dim(&va), 3);
        let mask_err = ModalityMask {
            visual: false,
            audio: false,
            keyword: false,
            title: false,
        };
        assert!(concat_features(&mask_err, &d, None, None, None, None).is_err());
    }

    #[test]
    fn modality_mask_parses() {
        let m = ModalityMask::parse("visual,audio").unwrap();
        assert!(m.visual && m.audio && !m.keyword && !m.title);
        assert_eq!(m.to_string_list(), "visual,audio");
        assert!(ModalityMask::parse("video").is_err());
        assert!(ModalityMask::parse("").is_err());
    }

    fn va_mask() -> ModalityMask {
        ModalityMask {
            visual: true,
            audio: true,
            keyword: false,
            title: false,
        }
    }

    #[test]
    fn single_expert_zero_weights_scores_half() {
        let params = MoeParams {
            num_experts: 1,
            num_labels: 3,
            mask: va_mask(),
            dims: dims_va(),
            gate_w: Tensor::zeros(&[3, 3]),
            gate_b: Tensor::zeros(&[3]),
            expert_w: Tensor::zeros(&[3, 3]),
            expert_b: Tensor::zeros(&[3]),
        };
        let x = Tensor::from_vec(&[2, 3], vec![1.0, -2.0, 0.5, 0.0, 0.0, 0.0]);
        let scores = moe_forward(&params, &x).unwrap();
        assert!(scores.data().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn uniform_gate_mixes_expert_outputs() {
        // experts forced to logits giving sigmoid 0.1, 0.5, 0.9; uniform gate
        let inv = |p: f64| (p / (1.0 - p)).ln();
        let params = MoeParams {
            num_experts: 3,
            num_labels: 1,
            mask: va_mask(),
            dims: dims_va(),
            gate_w: Tensor::zeros(&[1, 3]),
            gate_b: Tensor::zeros(&[3]),
            expert_w: Tensor::zeros(&[1, 3]),
            expert_b: Tensor::from_vec(&[3], vec![inv(0.1), inv(0.5), inv(0.9)]),
        };
        let x = Tensor::zeros(&[1, 1]);
        let scores = moe_forward(&params, &x).unwrap();
        assert!((scores.data()[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn gates_sum_to_one_scores_in_open_interval() {
        let params = MoeParams::init(4, 3, va_mask(), dims_va(), 7).unwrap();
        let x = Tensor::from_vec(&[5, 3], (0..15).map(|i| (i as f64) * 0.3 - 2.0).collect());
        let (scores, cache) = moe_forward_impl(&params, &x).unwrap();
        for bi in 0..5 {
            for li in 0..3 {
                let base = bi * 12 + li * 4;
                let sum: f64 = cache.gates.data()[base..base + 4].iter().sum();
                assert!((sum - 1.0).abs() < 1e-12);
            }
        }
        assert!(scores.data().iter().all(|&v| v > 0.0 && v < 1.0));
    }

    #[test]
    fn single_expert_matches_logistic_regression_forward() {
        let params = MoeParams::init(1, 2, va_mask(), dims_va(), 3).unwrap();
        let x = Tensor::from_vec(&[3, 3], vec![0.5, -1.0, 2.0, 0.0, 1.0, -0.5, 1.5, 0.5, 0.5]);
        let scores = moe_forward(&params, &x).unwrap();
        let z = dense_forward(&x, &params.expert_w, &params.expert_b).unwrap();
        for (a, b) in scores.data().iter().zip(z.data().iter()) {
            assert!((a - sigmoid(*b)).abs() < 1e-12);
        }
    }

    #[test]
    fn training_is_seed_deterministic() {
        let features = Tensor::from_vec(&[8, 3], (0..24).map(|i| ((i * 7) % 5) as f64).collect());
        let labels = Tensor::from_vec(&[8, 2], (0..16).map(|i| (i % 2) as f64).collect());
        let hyper = MoeHyper {
            num_experts: 2,
            epochs: 3,
            batch: 4,
            seed: 5,
            ..Default::default()
        };
        let (a, la) = moe_train(&features, &labels, va_mask(), dims_va(), &hyper).unwrap();
        let (b, lb) = moe_train(&features, &labels, va_mask(), dims_va(), &hyper).unwrap();
        assert_eq!(a, b);
        assert_eq!(la, lb);
    }

    #[test]
    fn learns_separable_toy() {
        // class 0 iff x0 > 0, class 1 iff x0 <= 0
        let mut rows = Vec::new();
        let mut targets = Vec::new();
        for i in 0..40 {
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            rows.extend_from_slice(&[sign * (1.0 + (i % 5) as f64 * 0.1), 0.3, -0.2]);
            targets.extend_from_slice(if sign > 0.0 { &[1.0, 0.0] } else { &[0.0, 1.0] });
        }
        let features = Tensor::from_vec(&[40, 3], rows);
        let labels = Tensor::from_vec(&[40, 2], targets);
        let hyper = MoeHyper {
            num_experts: 2,
            lr: 0.05,
            batch: 8,
            epochs: 40,
            seed: 1,
            weight_decay: 0.0,
        };
        let (params, _) = moe_train(&features, &labels, va_mask(), dims_va(), &hyper).unwrap();
        let scores = moe_forward(&params, &features).unwrap();
        let mut hits = 0;
        for i in 0..40 {
            let row = scores.row(i);
            let top = if row[0] >= row[1] { 0 } else { 1 };
            let truth = if i % 2 == 0 { 0 } else { 1 };
            if top == truth {
                hits += 1;
            }
        }
        assert_eq!(hits, 40);
    }

    #[test]
    fn topk_rules() {
        let scores = Tensor::from_vec(&[1, 3], vec![0.1, 0.9, 0.5]);
        let ids = vec!["v".to_string()];
        let preds = top_k_rows(&scores, &ids, 2).unwrap();
        assert_eq!(preds[0].pairs, vec![(1, 0.9), (2, 0.5)]);

        let tied = Tensor::from_vec(&[1, 3], vec![0.5, 0.5, 0.1]);
        let preds = top_k_rows(&tied, &ids, 2).unwrap();
        assert_eq!(preds[0].pairs, vec![(0, 0.5), (1, 0.5)]);

        let full = top_k_rows(&scores, &ids, 3).unwrap();
        assert_eq!(full[0].pairs.len(), 3);
        assert!(top_k_rows(&scores, &ids, 4).is_err());
    }

    #[test]
    fn checkpoint_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("moe.mmnn");
        let params = MoeParams::init(2, 3, ModalityMask::ALL, dims_va(), 9).unwrap();
        save_moe(&params, &path).unwrap();
        let loaded = load_moe(&path).unwrap();
        assert_eq!(loaded.mask, params.mask);
        assert_eq!(loaded.dims, params.dims);
        assert_eq!(loaded.num_experts, 2);
        for (a, b) in params.gate_w.data().iter().zip(loaded.gate_w.data()) {
            assert_eq!(*b, *a as f32 as f64);
        }
    }
}
