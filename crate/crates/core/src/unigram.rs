//! Baseline Bayesian unigram text classifier.
//!
//! Scores a label as prior * product over tokens of the add-alpha smoothed
//! conditional: (n(K=k ∩ L=l) + alpha) / (n(L=l) + alpha|L|), with the prior
//! n(L=l) / n(total). Evaluation runs in log space; the raw product underflows
//! for long keyword lists.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::text::TextSource;

pub const DEFAULT_ALPHA: f64 = 0.001;

/// Event counts backing the smoothed unigram scores.
#[derive(Debug, Clone, PartialEq)]
pub struct UnigramCounts {
    pub alpha: f64,
    pub num_labels: usize,
    /// n(total): number of training records.
    pub total: u64,
    /// n(L=l): incremented once per record carrying label l.
    pub label_counts: Vec<u64>,
    /// n(K=k ∩ L=l), sparse over labels per token. A record with label l and
    /// a token appearing twice increments the pair twice: the product in the
    /// score runs over token occurrences, not types.
    joint: HashMap<String, HashMap<usize, u64>>,
}

impl UnigramCounts {
    pub fn joint_count(&self, token: &str, label: usize) -> u64 {
        self.joint
            .get(token)
            .and_then(|m| m.get(&label))
            .copied()
            .unwrap_or(0)
    }

    pub fn vocab_size(&self) -> usize {
        self.joint.len()
    }
}

/// Counts (token, label) co-occurrences over the chosen text source.
/// Tokens are consumed as-is; normalization happens upstream.
pub fn unigram_fit(ds: &Dataset, source: TextSource, alpha: f64) -> Result<UnigramCounts> {
    if ds.is_empty() {
        return Err(Error::invalid("unigram_fit: empty dataset"));
    }
    if alpha <= 0.0 {
        return Err(Error::invalid(format!("alpha {alpha} must be > 0")));
    }
    let mut counts = UnigramCounts {
        alpha,
        num_labels: ds.num_labels(),
        total: ds.len() as u64,
        label_counts: vec![0; ds.num_labels()],
        joint: HashMap::new(),
    };
    for rec in &ds.records {
        for &l in &rec.labels {
            counts.label_counts[l] += 1;
        }
        for tok in source.tokens_of(rec) {
            let per_label = counts.joint.entry(tok.clone()).or_default();
            for &l in &rec.labels {
                *per_label.entry(l).or_insert(0) += 1;
            }
        }
    }
    Ok(counts)
}

/// Per-label log score. A label with zero training occurrences has prior 0
/// and scores -inf for any query.
pub fn unigram_predict_log(model: &UnigramCounts, tokens: &[String]) -> Vec<f64> {
    let total = model.total as f64;
    (0..model.num_labels)
        .map(|l| {
            let n_l = model.label_counts[l] as f64;
            if n_l == 0.0 {
                return f64::NEG_INFINITY;
            }
            let denom = (n_l + model.alpha * model.num_labels as f64).ln();
            let mut ls = n_l.ln() - total.ln();
            for tok in tokens {
                ls += (model.joint_count(tok, l) as f64 + model.alpha).ln() - denom;
            }
            ls
        })
        .collect()
}

/// Unnormalized per-label scores. Values equal the smoothed prior-times-
/// likelihood product exactly whenever it is representable; when the raw
/// product would underflow to zero the whole vector is rescaled by a positive
/// constant (max-subtraction in log space), which leaves the ranking intact.
pub fn unigram_predict(model: &UnigramCounts, tokens: &[String]) -> Vec<f64> {
    let log_scores = unigram_predict_log(model, tokens);
    let max = log_scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return vec![0.0; log_scores.len()];
    }
    // f64 underflows below ~exp(-745); rescale only when needed.
    let shift = if max < -700.0 { max } else { 0.0 };
    log_scores.iter().map(|&ls| (ls - shift).exp()).collect()
}

/// Posterior over labels: scores normalized to sum to 1 (log-sum-exp).
/// This is what prediction files store, since confidences must lie in [0,1].
pub fn unigram_predict_posterior(model: &UnigramCounts, tokens: &[String]) -> Vec<f64> {
    let log_scores = unigram_predict_log(model, tokens);
    let max = log_scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return vec![0.0; log_scores.len()];
    }
    let lse = max
        + log_scores
            .iter()
            .map(|&ls| (ls - max).exp())
            .sum::<f64>()
            .ln();
    log_scores.iter().map(|&ls| (ls - lse).exp()).collect()
}

// ---------------------------------------------------------------------------
// serialization: JSONL, one header line then one line per token
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct Header {
    alpha: f64,
    num_labels: usize,
    total: u64,
    label_counts: Vec<u64>,
}

#[derive(Serialize, Deserialize)]
struct TokenLine {
    token: String,
    /// Sparse (label, count) pairs, sorted by label.
    counts: Vec<(usize, u64)>,
}

pub fn save_unigram(model: &UnigramCounts, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let header = Header {
        alpha: model.alpha,
        num_labels: model.num_labels,
        total: model.total,
        label_counts: model.label_counts.clone(),
    };
    serde_json::to_writer(&mut w, &header).map_err(|e| Error::invalid(e.to_string()))?;
    w.write_all(b"\n")?;
    let mut tokens: Vec<&String> = model.joint.keys().collect();
    tokens.sort();
    for tok in tokens {
        let mut counts: Vec<(usize, u64)> =
            model.joint[tok].iter().map(|(&l, &c)| (l, c)).collect();
        counts.sort_unstable();
        let line = TokenLine {
            token: tok.clone(),
            counts,
        };
        serde_json::to_writer(&mut w, &line).map_err(|e| Error::invalid(e.to_string()))?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_unigram(path: &Path) -> Result<UnigramCounts> {
    let r = BufReader::new(File::open(path)?);
    let mut lines = r.lines();
    let header_line = lines
        .next()
        .ok_or_else(|| Error::malformed(path, 0, "empty model file"))??;
    let header: Header = serde_json::from_str(&header_line)
        .map_err(|e| Error::malformed(path, 1, e.to_string()))?;
    if header.label_counts.len() != header.num_labels {
        return Err(Error::malformed(path, 1, "label_counts length != num_labels"));
    }
    let mut joint = HashMap::new();
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: TokenLine = serde_json::from_str(&line)
            .map_err(|e| Error::malformed(path, lineno + 2, e.to_string()))?;
        let mut per_label = HashMap::new();
        for (l, c) in parsed.counts {
            if l >= header.num_labels {
                return Err(Error::malformed(
                    path,
                    lineno + 2,
                    format!("label {l} out of range"),
                ));
            }
            per_label.insert(l, c);
        }
        joint.insert(parsed.token, per_label);
    }
    Ok(UnigramCounts {
        alpha: header.alpha,
        num_labels: header.num_labels,
        total: header.total,
        label_counts: header.label_counts,
        joint,
    })
}
