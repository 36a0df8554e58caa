//! Kaggle-style predictions CSV.
//!
//! Header `VideoId,LabelConfidencePairs`; each row
//! `id,<label> <conf> <label> <conf> ...` with confidences printed at six
//! decimal places, space-separated, descending by confidence.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{LabelVocabulary, PredictionList};
use crate::error::{Error, Result};

pub const HEADER: &str = "VideoId,LabelConfidencePairs";

pub fn save_predictions(preds: &[PredictionList], path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{HEADER}")?;
    for p in preds {
        let mut line = String::with_capacity(16 + p.pairs.len() * 12);
        line.push_str(&p.video_id);
        line.push(',');
        for (i, (label, conf)) in p.pairs.iter().enumerate() {
            if i > 0 {
                line.push(' ');
            }
            write!(line, "{label} {conf:.6}").expect("write to string");
        }
        writeln!(w, "{line}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_predictions(path: &Path, vocab: &LabelVocabulary) -> Result<Vec<PredictionList>> {
    let r = BufReader::new(File::open(path)?);
    let mut lines = r.lines().enumerate();
    match lines.next() {
        Some((_, Ok(h))) if h.trim_end() == HEADER => {}
        Some((_, Ok(h))) => {
            return Err(Error::malformed(path, 1, format!("bad header `{h}`")));
        }
        Some((_, Err(e))) => return Err(e.into()),
        None => return Err(Error::malformed(path, 0, "empty predictions file")),
    }
    let mut out = Vec::new();
    for (lineno, line) in lines {
        let lineno = lineno + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let (id, rest) = line
            .split_once(',')
            .ok_or_else(|| Error::malformed(path, lineno, "missing comma"))?;
        let fields: Vec<&str> = rest.split_whitespace().collect();
        if fields.len() % 2 != 0 {
            return Err(Error::malformed(
                path,
                lineno,
                "odd number of fields in label/confidence pairs",
            ));
        }
        let mut pairs = Vec::with_capacity(fields.len() / 2);
        for chunk in fields.chunks(2) {
            let label: usize = chunk[0]
                .parse()
                .map_err(|_| Error::malformed(path, lineno, format!("bad label `{}`", chunk[0])))?;
            if label >= vocab.len() {
                return Err(Error::malformed(
                    path,
                    lineno,
                    format!("label {label} out of range (|L| = {})", vocab.len()),
                ));
            }
            let conf: f64 = chunk[1].parse().map_err(|_| {
                Error::malformed(path, lineno, format!("bad confidence `{}`", chunk[1]))
            })?;
            pairs.push((label, conf));
        }
        let parsed = PredictionList::new(id.to_string(), pairs)
            .map_err(|e| Error::malformed(path, lineno, e.to_string()))?;
        out.push(parsed);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab(n: usize) -> LabelVocabulary {
        LabelVocabulary::new((0..n).map(|i| format!("l{i}")).collect()).unwrap()
    }

    #[test]
    fn format_matches_contract() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        let preds = vec![PredictionList::new("v1".into(), vec![(2, 0.9), (0, 0.4)]).unwrap()];
        save_predictions(&preds, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "VideoId,LabelConfidencePairs\nv1,2 0.900000 0 0.400000\n");
        let loaded = load_predictions(&path, &vocab(3)).unwrap();
        assert_eq!(loaded, preds);
    }

    #[test]
    fn empty_pair_list_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        let preds = vec![PredictionList::new("v1".into(), vec![]).unwrap()];
        save_predictions(&preds, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "VideoId,LabelConfidencePairs\nv1,\n");
        let loaded = load_predictions(&path, &vocab(3)).unwrap();
        assert_eq!(loaded, preds);
    }

    #[test]
    fn out_of_range_confidence_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        std::fs::write(&path, "VideoId,LabelConfidencePairs\nv1,0 1.500000\n").unwrap();
        assert!(load_predictions(&path, &vocab(3)).is_err());
    }

    #[test]
    fn unsorted_confidences_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        std::fs::write(&path, "VideoId,LabelConfidencePairs\nv1,0 0.400000 1 0.900000\n").unwrap();
        assert!(load_predictions(&path, &vocab(3)).is_err());
    }

    #[test]
    fn round_trip_quantizes_at_1e6() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        let preds =
            vec![PredictionList::new("v".into(), vec![(1, 0.123456789), (0, 0.1234)]).unwrap()];
        save_predictions(&preds, &path).unwrap();
        let loaded = load_predictions(&path, &vocab(2)).unwrap();
        for (orig, got) in preds[0].pairs.iter().zip(loaded[0].pairs.iter()) {
            assert_eq!(orig.0, got.0);
            assert!((orig.1 - got.1).abs() <= 5e-7);
        }
    }
}
