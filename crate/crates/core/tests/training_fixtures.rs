//! Trained-model fixtures: the synthetic marker task for the title CNN and a
//! regression fixture for the histogram decoder.

use rand::Rng;

use mmvc_core::histogram::{decoder_predict, decoder_train, DecoderHyper};
use mmvc_core::nn::init::seeded_rng;
use mmvc_core::nn::{Mode, Tensor};
use mmvc_core::textcnn::{
    pad_batch, textcnn_forward, textcnn_train, TextCnnConfig, TextCnnHyper,
};

/// Synthetic title task: vocabulary of 50 words with 8-dim embeddings; four
/// marker words; each title contains exactly one marker among filler words
/// and the label is the marker's index.
pub struct MarkerTask {
    pub titles: Vec<Tensor>,
    pub labels: Tensor,
    pub label_ids: Vec<usize>,
}

/// One shared 50-word embedding table; train/val draw titles from it with
/// their own seeds.
pub fn marker_vocab() -> Vec<Vec<f64>> {
    let mut rng = seeded_rng(1000);
    (0..50)
        .map(|_| (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect()
}

pub fn marker_task(vocab: &[Vec<f64>], n: usize, seed: u64) -> MarkerTask {
    let mut rng = seeded_rng(seed);
    let mut titles = Vec::with_capacity(n);
    let mut label_rows = Vec::with_capacity(n * 4);
    let mut label_ids = Vec::with_capacity(n);
    for _ in 0..n {
        let marker = rng.gen_range(0..4usize);
        let len = rng.gen_range(4..=9usize);
        let pos = rng.gen_range(0..len);
        let mut rows: Vec<f64> = Vec::with_capacity(len * 8);
        for t in 0..len {
            let word = if t == pos {
                marker
            } else {
                rng.gen_range(4..50usize)
            };
            rows.extend_from_slice(&vocab[word]);
        }
        titles.push(Tensor::from_vec(&[len, 8], rows));
        for c in 0..4 {
            label_rows.push(if c == marker { 1.0 } else { 0.0 });
        }
        label_ids.push(marker);
    }
    MarkerTask {
        titles,
        labels: Tensor::from_vec(&[n, 4], label_rows),
        label_ids,
    }
}

pub fn marker_config() -> TextCnnConfig {
    TextCnnConfig {
        w_max: 2,
        channels: 8,
        hidden: 16,
        n_max: 10,
        embed_dim: 8,
        num_labels: 4,
        dropout_rate: 0.5,
    }
}

#[test]
fn textcnn_marker_task_reaches_hit_at_1() {
    let vocab = marker_vocab();
    let train = marker_task(&vocab, 500, 11);
    let val = marker_task(&vocab, 200, 12);

    let hyper = TextCnnHyper {
        epochs: 5,
        batch: 16,
        lr: 0.05,
        seed: 0,
        weight_decay: 1e-7,
    };
    let (mut params, losses) =
        textcnn_train(marker_config(), &train.titles, &train.labels, &hyper).unwrap();
    assert_eq!(losses.len(), 5);

    let (batch, _) = pad_batch(&val.titles, 10, 8).unwrap();
    let (scores, _) = textcnn_forward(&mut params, &batch, Mode::Infer, 0).unwrap();
    let mut hits = 0usize;
    for (i, &truth) in val.label_ids.iter().enumerate() {
        let row = scores.row(i);
        let top = row
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap().then(b.0.cmp(&a.0)))
            .unwrap()
            .0;
        if top == truth {
            hits += 1;
        }
    }
    let hit_at_1 = hits as f64 / val.label_ids.len() as f64;
    println!("marker hit@1 = {hit_at_1}");
    assert!(
        hit_at_1 > 0.95,
        "validation Hit@1 {hit_at_1} after 5 epochs (losses {losses:?})"
    );
}

#[test]
fn decoder_regression_fixture() {
    // deterministic toy: 20 samples over k=4 bins, two separable patterns
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
    let (model, _) = decoder_train(&features, &labels, &hyper).unwrap();
    let probe = Tensor::from_vec(&[2, 4], vec![3.0, 0.0, 1.0, 0.0, 0.0, 2.0, 0.0, 2.0]);
    let scores = decoder_predict(&model, &probe).unwrap();

    // frozen from the oracle run of this exact configuration
    let expected = [FIXTURE_A, FIXTURE_B, FIXTURE_C, FIXTURE_D];
    for (got, want) in scores.data().iter().zip(expected.iter()) {
        assert!(
            (got - want).abs() < 1e-6,
            "decoder fixture drifted: {got} vs {want}"
        );
    }
}

// placeholders overwritten once the oracle run prints them
const FIXTURE_A: f64 = 0.0;
const FIXTURE_B: f64 = 0.0;
const FIXTURE_C: f64 = 0.0;
const FIXTURE_D: f64 = 0.0;

#[test]
#[ignore]
fn print_decoder_fixture_values() {
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
    let (model, _) = decoder_train(&features, &labels, &hyper).unwrap();
    let probe = Tensor::from_vec(&[2, 4], vec![3.0, 0.0, 1.0, 0.0, 0.0, 2.0, 0.0, 2.0]);
    let scores = decoder_predict(&model, &probe).unwrap();
    println!("fixture values: {:.17?}", scores.data());
}
