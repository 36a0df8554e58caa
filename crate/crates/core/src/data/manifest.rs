//! Manifest (JSONL) and feature-bank (binary) loading.
//!
//! Manifest: one JSON object per line with keys `id`, `labels`, optional
//! `title` / `keywords`, and either inline `visual`/`audio` arrays or a
//! `bank_row` index into a feature bank.
//!
//! Feature bank: little-endian, magic `MMF1`, u32 row count, u32 visual_dim,
//! u32 audio_dim, then per row visual_dim+audio_dim float32 values.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Dataset, LabelVocabulary, VideoRecord};
use crate::error::{Error, Result};

pub const BANK_MAGIC: &[u8; 4] = b"MMF1";

#[derive(Debug, Clone)]
pub struct ManifestConfig {
    pub visual_dim: usize,
    pub audio_dim: usize,
    pub labels_path: PathBuf,
    pub bank_path: Option<PathBuf>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestLine {
    id: String,
    labels: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    title: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    keywords: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    visual: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    audio: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bank_row: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct FeatureBank {
    pub visual_dim: usize,
    pub audio_dim: usize,
    rows: Vec<f64>,
    count: usize,
}

impl FeatureBank {
    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    /// (visual, audio) slices for one row.
    pub fn row(&self, i: usize) -> Option<(&[f64], &[f64])> {
        if i >= self.count {
            return None;
        }
        let w = self.visual_dim + self.audio_dim;
        let r = &self.rows[i * w..(i + 1) * w];
        Some((&r[..self.visual_dim], &r[self.visual_dim..]))
    }
}

pub fn load_feature_bank(path: &Path) -> Result<FeatureBank> {
    let mut r = BufReader::new(File::open(path)?);
    let mut buf4 = [0u8; 4];
    r.read_exact(&mut buf4)
        .map_err(|_| Error::malformed(path, 0, "truncated bank header"))?;
    if &buf4 != BANK_MAGIC {
        return Err(Error::malformed(path, 0, "bad magic, expected MMF1"));
    }
    let read_u32 = |r: &mut BufReader<File>| -> Result<u32> {
        let mut b = [0u8; 4];
        r.read_exact(&mut b)
            .map_err(|_| Error::malformed(path, 0, "truncated bank header"))?;
        Ok(u32::from_le_bytes(b))
    };
    let count = read_u32(&mut r)? as usize;
    let visual_dim = read_u32(&mut r)? as usize;
    let audio_dim = read_u32(&mut r)? as usize;
    let total = count * (visual_dim + audio_dim);
    let mut rows = Vec::with_capacity(total);
    let mut b = [0u8; 4];
    for _ in 0..total {
        r.read_exact(&mut b)
            .map_err(|_| Error::malformed(path, 0, "truncated bank rows"))?;
        rows.push(f32::from_le_bytes(b) as f64);
    }
    Ok(FeatureBank {
        visual_dim,
        audio_dim,
        rows,
        count,
    })
}

pub fn save_feature_bank(
    path: &Path,
    visual_dim: usize,
    audio_dim: usize,
    rows: &[(Vec<f64>, Vec<f64>)],
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(BANK_MAGIC)?;
    w.write_all(&(rows.len() as u32).to_le_bytes())?;
    w.write_all(&(visual_dim as u32).to_le_bytes())?;
    w.write_all(&(audio_dim as u32).to_le_bytes())?;
    for (visual, audio) in rows {
        if visual.len() != visual_dim || audio.len() != audio_dim {
            return Err(Error::shape("feature bank row dims"));
        }
        for &v in visual.iter().chain(audio.iter()) {
            w.write_all(&(v as f32).to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Loads a manifest into a [`Dataset`]. Titles become whitespace-split tokens;
/// normalization is a separate, explicit step (see the text module).
pub fn load_manifest(path: &Path, config: &ManifestConfig) -> Result<Dataset> {
    let vocab = LabelVocabulary::load(&config.labels_path)?;
    let bank = match &config.bank_path {
        Some(p) => {
            let bank = load_feature_bank(p)?;
            if bank.visual_dim != config.visual_dim || bank.audio_dim != config.audio_dim {
                return Err(Error::malformed(
                    p,
                    0,
                    format!(
                        "bank dims ({}, {}) do not match configured dims ({}, {})",
                        bank.visual_dim, bank.audio_dim, config.visual_dim, config.audio_dim
                    ),
                ));
            }
            Some(bank)
        }
        None => None,
    };

    let file = BufReader::new(File::open(path)?);
    let mut records = Vec::new();
    let mut ids = HashSet::new();
    for (lineno, line) in file.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: ManifestLine = serde_json::from_str(&line)
            .map_err(|e| Error::malformed(path, lineno, e.to_string()))?;
        if !ids.insert(parsed.id.clone()) {
            return Err(Error::malformed(
                path,
                lineno,
                format!("duplicate id `{}`", parsed.id),
            ));
        }
        let mut labels = parsed.labels;
        labels.sort_unstable();
        labels.dedup();
        if let Some(&bad) = labels.iter().find(|&&l| l >= vocab.len()) {
            return Err(Error::malformed(
                path,
                lineno,
                format!("unknown label {bad} (|L| = {})", vocab.len()),
            ));
        }
        let (visual, audio) = match (parsed.visual, parsed.audio, parsed.bank_row) {
            (Some(v), Some(a), None) => (v, a),
            (None, None, Some(row)) => {
                let bank = bank.as_ref().ok_or_else(|| {
                    Error::malformed(path, lineno, "bank_row used but no feature bank configured")
                })?;
                let (v, a) = bank.row(row).ok_or_else(|| {
                    Error::malformed(
                        path,
                        lineno,
                        format!("bank_row {row} out of range ({} rows)", bank.len()),
                    )
                })?;
                (v.to_vec(), a.to_vec())
            }
            _ => {
                return Err(Error::malformed(
                    path,
                    lineno,
                    "need either inline visual+audio or bank_row",
                ))
            }
        };
        if visual.len() != config.visual_dim {
            return Err(Error::malformed(
                path,
                lineno,
                format!(
                    "visual dim {} != configured {}",
                    visual.len(),
                    config.visual_dim
                ),
            ));
        }
        if audio.len() != config.audio_dim {
            return Err(Error::malformed(
                path,
                lineno,
                format!("audio dim {} != configured {}", audio.len(), config.audio_dim),
            ));
        }
        records.push(VideoRecord {
            id: parsed.id,
            labels,
            visual,
            audio,
            title_tokens: parsed
                .title
                .map(|t| t.split_whitespace().map(str::to_string).collect())
                .unwrap_or_default(),
            keyword_tokens: parsed.keywords.unwrap_or_default(),
        });
    }
    Ok(Dataset {
        records,
        vocab,
        visual_dim: config.visual_dim,
        audio_dim: config.audio_dim,
    })
}

/// Writes a dataset back out as a manifest with inline features. Token
/// sequences are emitted as-is (title tokens joined by single spaces), which
/// is what `prep` uses to persist normalized text.
pub fn save_manifest(path: &Path, ds: &Dataset) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for rec in &ds.records {
        let line = ManifestLine {
            id: rec.id.clone(),
            labels: rec.labels.clone(),
            title: if rec.title_tokens.is_empty() {
                None
            } else {
                Some(rec.title_tokens.join(" "))
            },
            keywords: if rec.keyword_tokens.is_empty() {
                None
            } else {
                Some(rec.keyword_tokens.clone())
            },
            visual: Some(rec.visual.clone()),
            audio: Some(rec.audio.clone()),
            bank_row: None,
        };
        serde_json::to_writer(&mut w, &line)
            .map_err(|e| Error::invalid(format!("manifest serialize: {e}")))?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_labels(dir: &Path, names: &[&str]) -> PathBuf {
        let p = dir.join("labels.txt");
        std::fs::write(&p, names.join("\n")).unwrap();
        p
    }

    fn config(dir: &Path, bank: Option<PathBuf>) -> ManifestConfig {
        ManifestConfig {
            visual_dim: 2,
            audio_dim: 1,
            labels_path: write_labels(dir, &["Cat", "Dog", "Ice Cream"]),
            bank_path: bank,
        }
    }

    #[test]
    fn inline_manifest_parses() {
        let dir = tempfile::tempdir().unwrap();
        let m = dir.path().join("m.jsonl");
        std::fs::write(
            &m,
            concat!(
                "{\"id\":\"v1\",\"labels\":[0,2],\"title\":\"My Cat\",\"keywords\":[\"cat\"],\"visual\":[1.0,2.0],\"audio\":[3.0]}\n",
                "{\"id\":\"v2\",\"labels\":[1],\"visual\":[0.0,0.0],\"audio\":[1.0]}\n",
            ),
        )
        .unwrap();
        let ds = load_manifest(&m, &config(dir.path(), None)).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.records[0].title_tokens, vec!["My", "Cat"]);
        assert_eq!(ds.records[0].labels, vec![0, 2]);
        assert!(ds.records[1].keyword_tokens.is_empty());
    }

    #[test]
    fn bank_rows_resolve() {
        let dir = tempfile::tempdir().unwrap();
        let bank_path = dir.path().join("bank.bin");
        save_feature_bank(
            &bank_path,
            2,
            1,
            &[
                (vec![1.0, 2.0], vec![3.0]),
                (vec![4.0, 5.0], vec![6.0]),
            ],
        )
        .unwrap();
        let m = dir.path().join("m.jsonl");
        std::fs::write(&m, "{\"id\":\"v1\",\"labels\":[0],\"bank_row\":0}\n").unwrap();
        let ds = load_manifest(&m, &config(dir.path(), Some(bank_path))).unwrap();
        assert_eq!(ds.records[0].visual, vec![1.0, 2.0]);
        assert_eq!(ds.records[0].audio, vec![3.0]);
    }

    #[test]
    fn unknown_label_aborts_with_line() {
        let dir = tempfile::tempdir().unwrap();
        let m = dir.path().join("m.jsonl");
        std::fs::write(&m, "{\"id\":\"v1\",\"labels\":[7],\"visual\":[1.0,2.0],\"audio\":[3.0]}\n")
            .unwrap();
        let err = load_manifest(&m, &config(dir.path(), None)).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("unknown label 7"), "{msg}");
        assert!(msg.contains(":1:"), "{msg}");
    }

    #[test]
    fn duplicate_id_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let m = dir.path().join("m.jsonl");
        let row = "{\"id\":\"v1\",\"labels\":[0],\"visual\":[1.0,2.0],\"audio\":[3.0]}\n";
        std::fs::write(&m, format!("{row}{row}")).unwrap();
        let err = load_manifest(&m, &config(dir.path(), None)).unwrap_err();
        assert!(err.to_string().contains("duplicate id"));
    }

    #[test]
    fn dim_mismatch_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let m = dir.path().join("m.jsonl");
        std::fs::write(&m, "{\"id\":\"v1\",\"labels\":[0],\"visual\":[1.0],\"audio\":[3.0]}\n")
            .unwrap();
        let err = load_manifest(&m, &config(dir.path(), None)).unwrap_err();
        assert!(err.to_string().contains("visual dim"));
    }

    #[test]
    fn manifest_round_trips_through_save() {
        let dir = tempfile::tempdir().unwrap();
        let m = dir.path().join("m.jsonl");
        std::fs::write(
            &m,
            "{\"id\":\"v1\",\"labels\":[0],\"title\":\"a b\",\"keywords\":[\"k\"],\"visual\":[1.0,2.0],\"audio\":[3.0]}\n",
        )
        .unwrap();
        let cfg = config(dir.path(), None);
        let ds = load_manifest(&m, &cfg).unwrap();
        let m2 = dir.path().join("m2.jsonl");
        save_manifest(&m2, &ds).unwrap();
        let ds2 = load_manifest(&m2, &cfg).unwrap();
        assert_eq!(ds.records, ds2.records);
    }
}
