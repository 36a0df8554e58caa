//! Score ensembling: average pooling, max pooling, and a random forest over
//! per-model scores.

mod forest;

pub use forest::{
    forest_predict, forest_train, load_forest, save_forest, ForestHyper, ForestModel,
};

use crate::data::PredictionList;
use crate::error::{Error, Result};
use crate::moe::top_k_rows;
use crate::nn::Tensor;

/// Dense per-video, per-class scores for one model. Every model being
/// ensembled must share the same id order and label count.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    pub video_ids: Vec<String>,
    pub num_labels: usize,
    /// n x |L| row-major, values in [0,1].
    pub scores: Vec<f64>,
}

impl ScoreMatrix {
    pub fn new(video_ids: Vec<String>, num_labels: usize, scores: Vec<f64>) -> Result<Self> {
        if scores.len() != video_ids.len() * num_labels {
            return Err(Error::shape(format!(
                "score matrix: {} ids x {} labels != {} values",
                video_ids.len(),
                num_labels,
                scores.len()
            )));
        }
        Ok(ScoreMatrix {
            video_ids,
            num_labels,
            scores,
        })
    }

    pub fn len(&self) -> usize {
        self.video_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.video_ids.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.scores[i * self.num_labels..(i + 1) * self.num_labels]
    }

    pub fn get(&self, video: usize, label: usize) -> f64 {
        self.scores[video * self.num_labels + label]
    }

    /// Top-k (label, confidence) lists per video, ties to the smaller label.
    pub fn top_k(&self, k: usize) -> Result<Vec<PredictionList>> {
        let t = Tensor::from_vec(&[self.len(), self.num_labels], self.scores.clone());
        top_k_rows(&t, &self.video_ids, k)
    }

    /// Builds a dense matrix from top-k prediction lists; absent labels get
    /// score 0. Ids keep the input order.
    pub fn from_predictions(preds: &[PredictionList], num_labels: usize) -> Result<Self> {
        let mut scores = vec![0.0; preds.len() * num_labels];
        let mut ids = Vec::with_capacity(preds.len());
        for (i, p) in preds.iter().enumerate() {
            ids.push(p.video_id.clone());
            for &(label, conf) in &p.pairs {
                if label >= num_labels {
                    return Err(Error::invalid(format!(
                        "label {label} out of range (|L| = {num_labels})"
                    )));
                }
                scores[i * num_labels + label] = conf;
            }
        }
        ScoreMatrix::new(ids, num_labels, scores)
    }
}

fn check_aligned(mats: &[ScoreMatrix]) -> Result<()> {
    if mats.is_empty() {
        return Err(Error::invalid("ensemble: no input matrices"));
    }
    let first = &mats[0];
    for m in &mats[1..] {
        if m.num_labels != first.num_labels {
            return Err(Error::shape(format!(
                "ensemble: |L| {} vs {}",
                m.num_labels, first.num_labels
            )));
        }
        if m.video_ids != first.video_ids {
            return Err(Error::invalid("ensemble: video id order differs"));
        }
    }
    Ok(())
}

/// Elementwise mean of the input matrices.
///
/// Per cell the values are sorted before a running-mean accumulation, which
/// makes the result independent of input order and bit-exact when all inputs
/// are copies of one matrix.
pub fn average_pool(mats: &[ScoreMatrix]) -> Result<ScoreMatrix> {
    check_aligned(mats)?;
    let cells = mats[0].scores.len();
    let mut out = vec![0.0; cells];
    let mut vals = vec![0.0; mats.len()];
    for (cell, o) in out.iter_mut().enumerate() {
        for (slot, m) in vals.iter_mut().zip(mats.iter()) {
            *slot = m.scores[cell];
        }
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        let mut mean = 0.0;
        for (i, &v) in vals.iter().enumerate() {
            mean += (v - mean) / (i + 1) as f64;
        }
        *o = mean;
    }
    ScoreMatrix::new(mats[0].video_ids.clone(), mats[0].num_labels, out)
}

/// Elementwise max of the input matrices.
pub fn max_pool(mats: &[ScoreMatrix]) -> Result<ScoreMatrix> {
    check_aligned(mats)?;
    let mut out = mats[0].scores.clone();
    for m in &mats[1..] {
        for (o, &v) in out.iter_mut().zip(m.scores.iter()) {
            if v > *o {
                *o = v;
            }
        }
    }
    ScoreMatrix::new(mats[0].video_ids.clone(), mats[0].num_labels, out)
}
