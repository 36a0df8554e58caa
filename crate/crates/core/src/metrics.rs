//! Multi-label ranking metrics: GAP@k, mAP, Hit@1, PERR, and per-label GAP.
//!
//! Tie-breaking is pinned for bit-reproducibility: pooled GAP triples sort by
//! confidence descending, then video input order, then label index; per-class
//! rankings in mAP break score ties toward the smaller video index; per-video
//! top selections break ties toward the smaller label index.

use serde::Serialize;

use crate::data::PredictionList;
use crate::ensemble::ScoreMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize)]
pub struct EvalCounts {
    pub videos: usize,
    pub positives: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct PerLabelGap {
    pub label: usize,
    pub gap: f64,
    pub positives: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub gap: f64,
    pub map: f64,
    pub hit_at_1: f64,
    pub perr: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_label_gap: Option<Vec<PerLabelGap>>,
    pub counts: EvalCounts,
}

fn total_positives(truth: &[Vec<usize>]) -> usize {
    truth.iter().map(|t| t.len()).sum()
}

/// Pools every (video, label, confidence) triple from the per-video top-k
/// lists, sorts by confidence, and computes average precision with the total
/// ground-truth count as the recall denominator.
pub fn gap_at_k(preds: &[PredictionList], truth: &[Vec<usize>], k: usize) -> Result<f64> {
    if preds.len() != truth.len() {
        return Err(Error::invalid(format!(
            "gap_at_k: {} predictions vs {} truth rows",
            preds.len(),
            truth.len()
        )));
    }
    let positives = total_positives(truth);
    if positives == 0 {
        return Err(Error::invalid("gap_at_k: no ground-truth positives"));
    }
    let mut triples: Vec<(usize, usize, f64)> = Vec::new();
    for (v, p) in preds.iter().enumerate() {
        for &(label, conf) in p.pairs.iter().take(k) {
            triples.push((v, label, conf));
        }
    }
    triples.sort_by(|a, b| {
        b.2.partial_cmp(&a.2)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.0.cmp(&b.0))
            .then(a.1.cmp(&b.1))
    });
    let mut hits = 0usize;
    let mut ap = 0.0;
    for (i, &(v, label, _)) in triples.iter().enumerate() {
        if truth[v].contains(&label) {
            hits += 1;
            ap += hits as f64 / (i + 1) as f64;
        }
    }
    Ok(ap / positives as f64)
}

/// Unweighted mean over classes (with at least one positive) of per-class
/// average precision over the video ranking.
pub fn mean_average_precision(scores: &ScoreMatrix, truth: &[Vec<usize>]) -> Result<f64> {
    if scores.len() != truth.len() {
        return Err(Error::invalid(format!(
            "mAP: {} score rows vs {} truth rows",
            scores.len(),
            truth.len()
        )));
    }
    let n = scores.len();
    let mut class_aps = Vec::new();
    for c in 0..scores.num_labels {
        let p_c = truth.iter().filter(|t| t.contains(&c)).count();
        if p_c == 0 {
            continue;
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            scores
                .get(b, c)
                .partial_cmp(&scores.get(a, c))
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        let mut hits = 0usize;
        let mut ap = 0.0;
        for (i, &v) in order.iter().enumerate() {
            if truth[v].contains(&c) {
                hits += 1;
                ap += hits as f64 / (i + 1) as f64;
            }
        }
        class_aps.push(ap / p_c as f64);
    }
    if class_aps.is_empty() {
        return Err(Error::invalid("mAP: no class has positives"));
    }
    Ok(class_aps.iter().sum::<f64>() / class_aps.len() as f64)
}

fn top_label(row: &[f64]) -> usize {
    let mut best = 0usize;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Fraction of videos whose single top-scored label is a true label.
/// Videos with empty truth count as misses.
pub fn hit_at_1(scores: &ScoreMatrix, truth: &[Vec<usize>]) -> Result<f64> {
    if scores.is_empty() || scores.len() != truth.len() {
        return Err(Error::invalid("hit_at_1: empty or misaligned inputs"));
    }
    let mut hits = 0usize;
    for v in 0..scores.len() {
        if truth[v].contains(&top_label(scores.row(v))) {
            hits += 1;
        }
    }
    Ok(hits as f64 / scores.len() as f64)
}

/// Precision at equal recall rate: per video with j = |truth| >= 1, the
/// precision of the top-j predictions against truth; averaged over those
/// videos. Videos with empty truth are skipped.
pub fn perr(scores: &ScoreMatrix, truth: &[Vec<usize>]) -> Result<f64> {
    if scores.len() != truth.len() {
        return Err(Error::invalid("perr: misaligned inputs"));
    }
    let mut sum = 0.0;
    let mut counted = 0usize;
    for v in 0..scores.len() {
        let j = truth[v].len();
        if j == 0 {
            continue;
        }
        let row = scores.row(v);
        let mut order: Vec<usize> = (0..row.len()).collect();
        order.sort_by(|&a, &b| {
            row[b]
                .partial_cmp(&row[a])
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        let correct = order[..j.min(row.len())]
            .iter()
            .filter(|&&l| truth[v].contains(&l))
            .count();
        sum += correct as f64 / j as f64;
        counted += 1;
    }
    if counted == 0 {
        return Err(Error::invalid("perr: every video has empty truth"));
    }
    Ok(sum / counted as f64)
}

/// GAP restricted to one label at a time, with that label's positive count as
/// the recall denominator. Labels with zero positives are absent.
pub fn per_label_gap(
    preds: &[PredictionList],
    truth: &[Vec<usize>],
    k: usize,
    num_labels: usize,
) -> Result<Vec<PerLabelGap>> {
    if preds.len() != truth.len() {
        return Err(Error::invalid("per_label_gap: misaligned inputs"));
    }
    let mut triples: Vec<(usize, usize, f64)> = Vec::new();
    for (v, p) in preds.iter().enumerate() {
        for &(label, conf) in p.pairs.iter().take(k) {
            triples.push((v, label, conf));
        }
    }
    triples.sort_by(|a, b| {
        b.2.partial_cmp(&a.2)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.0.cmp(&b.0))
            .then(a.1.cmp(&b.1))
    });
    let mut out = Vec::new();
    for label in 0..num_labels {
        let positives = truth.iter().filter(|t| t.contains(&label)).count();
        if positives == 0 {
            continue;
        }
        let mut hits = 0usize;
        let mut ap = 0.0;
        let mut rank = 0usize;
        for &(v, l, _) in &triples {
            if l != label {
                continue;
            }
            rank += 1;
            if truth[v].contains(&label) {
                hits += 1;
                ap += hits as f64 / rank as f64;
            }
        }
        out.push(PerLabelGap {
            label,
            gap: ap / positives as f64,
            positives,
        });
    }
    Ok(out)
}

/// Assembles all four metrics: GAP from the top-k lists, the rest from the
/// full score matrix.
pub fn evaluate_all(
    preds: &[PredictionList],
    scores: &ScoreMatrix,
    truth: &[Vec<usize>],
    k: usize,
    with_per_label: bool,
) -> Result<EvalReport> {
    let per_label = if with_per_label {
        Some(per_label_gap(preds, truth, k, scores.num_labels)?)
    } else {
        None
    };
    Ok(EvalReport {
        gap: gap_at_k(preds, truth, k)?,
        map: mean_average_precision(scores, truth)?,
        hit_at_1: hit_at_1(scores, truth)?,
        perr: perr(scores, truth)?,
        per_label_gap: per_label,
        counts: EvalCounts {
            videos: scores.len(),
            positives: total_positives(truth),
        },
    })
}
