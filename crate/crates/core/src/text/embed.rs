//! Word embedding table, consumed from a text file and never trained.
//!
//! File format: first line `<vocab_size> <dim>`, then one line per token:
//! `<token> <v1> ... <v_dim>`, space-separated.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::Tensor;

#[derive(Debug, Clone)]
pub struct EmbeddingTable {
    dim: usize,
    table: HashMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        EmbeddingTable {
            dim,
            table: HashMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    /// Returns the vector for a token, or None for out-of-vocabulary tokens.
    /// There is deliberately no default vector.
    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.table.get(token).map(|v| v.as_slice())
    }

    pub fn insert(&mut self, token: String, vector: Vec<f64>) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::shape(format!(
                "embedding for `{token}` has dim {}, table dim {}",
                vector.len(),
                self.dim
            )));
        }
        if self.table.insert(token.clone(), vector).is_some() {
            return Err(Error::invalid(format!("duplicate token `{token}`")));
        }
        Ok(())
    }
}

pub fn load_embeddings(path: &Path) -> Result<EmbeddingTable> {
    let r = BufReader::new(File::open(path)?);
    let mut lines = r.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::malformed(path, 0, "empty embedding file"))??;
    let mut parts = header.split_whitespace();
    let declared: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::malformed(path, 1, "bad vocab size in header"))?;
    let dim: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::malformed(path, 1, "bad dim in header"))?;

    let mut table = EmbeddingTable::new(dim);
    let mut count = 0usize;
    for (lineno, line) in lines.enumerate() {
        let lineno = lineno + 2;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split_whitespace();
        let token = fields
            .next()
            .ok_or_else(|| Error::malformed(path, lineno, "missing token"))?;
        let vector: Vec<f64> = fields
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| Error::malformed(path, lineno, format!("bad value `{f}`")))
            })
            .collect::<Result<_>>()?;
        if vector.len() != dim {
            return Err(Error::malformed(
                path,
                lineno,
                format!("expected {dim} values, got {}", vector.len()),
            ));
        }
        table
            .insert(token.to_string(), vector)
            .map_err(|e| Error::malformed(path, lineno, e.to_string()))?;
        count += 1;
    }
    if count != declared {
        return Err(Error::malformed(
            path,
            0,
            format!("header declares {declared} rows, file has {count}"),
        ));
    }
    Ok(table)
}

/// Embeds a token sequence as an n' x dim matrix, dropping out-of-vocabulary
/// tokens. `kept` holds the original indices of the surviving tokens.
pub fn embed_tokens<S: AsRef<str>>(tokens: &[S], table: &EmbeddingTable) -> (Tensor, Vec<usize>) {
    let mut rows: Vec<f64> = Vec::new();
    let mut kept = Vec::new();
    for (i, tok) in tokens.iter().enumerate() {
        if let Some(v) = table.get(tok.as_ref()) {
            rows.extend_from_slice(v);
            kept.push(i);
        }
    }
    (
        Tensor::from_vec(&[kept.len(), table.dim()], rows),
        kept,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, content: &str) -> std::path::PathBuf {
        let p = dir.join("emb.txt");
        std::fs::write(&p, content).unwrap();
        p
    }

    #[test]
    fn parses_and_reports_oov() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "2 3\na 1 0 0\nb 0 1 0\n");
        let t = load_embeddings(&p).unwrap();
        assert_eq!((t.len(), t.dim()), (2, 3));
        assert_eq!(t.get("a"), Some(&[1.0, 0.0, 0.0][..]));
        assert!(t.get("c").is_none());
    }

    #[test]
    fn header_count_mismatch_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "2 3\na 1 0 0\nb 0 1 0\nc 0 0 1\n");
        assert!(load_embeddings(&p).is_err());
    }

    #[test]
    fn duplicate_token_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "2 2\na 1 0\na 0 1\n");
        assert!(load_embeddings(&p).is_err());
    }

    #[test]
    fn embed_drops_oov_and_keeps_order() {
        let mut t = EmbeddingTable::new(2);
        t.insert("a".into(), vec![1.0, 2.0]).unwrap();
        t.insert("b".into(), vec![3.0, 4.0]).unwrap();
        let (m, kept) = embed_tokens(&["a", "c", "b"], &t);
        assert_eq!(m.shape(), &[2, 2]);
        assert_eq!(m.data(), &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(kept, vec![0, 2]);

        let (empty, kept) = embed_tokens::<&str>(&[], &t);
        assert_eq!(empty.shape(), &[0, 2]);
        assert!(kept.is_empty());

        let (dup, _) = embed_tokens(&["a", "a"], &t);
        assert_eq!(dup.data(), &[1.0, 2.0, 1.0, 2.0]);
    }
}
