//! Domain records, dataset container, splits, and prediction file I/O.

mod manifest;
mod predictions;
mod split;

pub use manifest::{
    load_feature_bank, load_manifest, save_feature_bank, save_manifest, FeatureBank,
    ManifestConfig,
};
pub use predictions::{load_predictions, save_predictions};
pub use split::split_dataset;

use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};

/// One example: id, label set, video-level feature vectors, and token
/// sequences for title and keywords (possibly empty).
#[derive(Debug, Clone, PartialEq)]
pub struct VideoRecord {
    pub id: String,
    /// Sorted, de-duplicated label indices into the vocabulary.
    pub labels: Vec<usize>,
    pub visual: Vec<f64>,
    pub audio: Vec<f64>,
    pub title_tokens: Vec<String>,
    pub keyword_tokens: Vec<String>,
}

/// Label names and the reverse name -> index lookup. Line number in the
/// vocabulary file is the label index.
#[derive(Debug, Clone)]
pub struct LabelVocabulary {
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl LabelVocabulary {
    pub fn new(names: Vec<String>) -> Result<Self> {
        let mut index = HashMap::with_capacity(names.len());
        for (i, name) in names.iter().enumerate() {
            if index.insert(name.clone(), i).is_some() {
                return Err(Error::invalid(format!("duplicate label name `{name}`")));
            }
        }
        Ok(LabelVocabulary { names, index })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let names: Vec<String> = text.lines().map(|l| l.to_string()).collect();
        if names.is_empty() {
            return Err(Error::malformed(path, 0, "empty label vocabulary"));
        }
        Self::new(names)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn name(&self, index: usize) -> Option<&str> {
        self.names.get(index).map(|s| s.as_str())
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn lookup(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }
}

/// Immutable after load; safe to share across readers.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub records: Vec<VideoRecord>,
    pub vocab: LabelVocabulary,
    pub visual_dim: usize,
    pub audio_dim: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn num_labels(&self) -> usize {
        self.vocab.len()
    }
}

/// Per-video top-k predictions: (label index, confidence) pairs sorted by
/// confidence descending, confidences in [0,1], labels distinct.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionList {
    pub video_id: String,
    pub pairs: Vec<(usize, f64)>,
}

impl PredictionList {
    pub fn new(video_id: String, pairs: Vec<(usize, f64)>) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        let mut prev = f64::INFINITY;
        for &(label, conf) in &pairs {
            if !(0.0..=1.0).contains(&conf) {
                return Err(Error::invalid(format!(
                    "confidence {conf} outside [0,1] for video {video_id}"
                )));
            }
            if conf > prev {
                return Err(Error::invalid(format!(
                    "confidences not sorted descending for video {video_id}"
                )));
            }
            prev = conf;
            if !seen.insert(label) {
                return Err(Error::invalid(format!(
                    "duplicate label {label} for video {video_id}"
                )));
            }
        }
        Ok(PredictionList { video_id, pairs })
    }
}
