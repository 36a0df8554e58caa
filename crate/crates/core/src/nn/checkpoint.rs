//! Parameter checkpoint format.
//!
//! Binary, little-endian, magic `MMNN`, then one record per tensor until EOF:
//! u32 name length, name bytes (UTF-8), u32 rank, u32 per dim, then
//! product(dims) float32 values. Tensors round-trip through float32, so a
//! save/load cycle quantizes f64 parameters to f32 precision.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::tensor::Tensor;

pub const MAGIC: &[u8; 4] = b"MMNN";

pub fn save_tensors(path: &Path, tensors: &[(&str, &Tensor)]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    for (name, t) in tensors {
        let bytes = name.as_bytes();
        w.write_all(&(bytes.len() as u32).to_le_bytes())?;
        w.write_all(bytes)?;
        w.write_all(&(t.rank() as u32).to_le_bytes())?;
        for &d in t.shape() {
            w.write_all(&(d as u32).to_le_bytes())?;
        }
        for &v in t.data() {
            w.write_all(&(v as f32).to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Loads every tensor record in file order.
pub fn load_tensors(path: &Path) -> Result<Vec<(String, Tensor)>> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| Error::malformed(path, 0, "truncated header"))?;
    if &magic != MAGIC {
        return Err(Error::malformed(path, 0, "bad magic, expected MMNN"));
    }
    let mut out = Vec::new();
    loop {
        let mut len4 = [0u8; 4];
        match r.read_exact(&mut len4) {
            Ok(()) => {}
            Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => break,
            Err(e) => return Err(e.into()),
        }
        let name_len = u32::from_le_bytes(len4) as usize;
        let mut name_bytes = vec![0u8; name_len];
        r.read_exact(&mut name_bytes)
            .map_err(|_| Error::malformed(path, 0, "truncated tensor name"))?;
        let name = String::from_utf8(name_bytes)
            .map_err(|_| Error::malformed(path, 0, "tensor name is not UTF-8"))?;
        r.read_exact(&mut len4)
            .map_err(|_| Error::malformed(path, 0, "truncated rank"))?;
        let rank = u32::from_le_bytes(len4) as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            r.read_exact(&mut len4)
                .map_err(|_| Error::malformed(path, 0, "truncated dims"))?;
            shape.push(u32::from_le_bytes(len4) as usize);
        }
        let numel: usize = shape.iter().product();
        let mut data = Vec::with_capacity(numel);
        for _ in 0..numel {
            r.read_exact(&mut len4)
                .map_err(|_| Error::malformed(path, 0, format!("truncated data for {name}")))?;
            data.push(f32::from_le_bytes(len4) as f64);
        }
        out.push((name, Tensor::from_vec(&shape, data)));
    }
    Ok(out)
}

/// Helper over [`load_tensors`] for named lookup with a clear error.
pub struct TensorMap {
    entries: Vec<(String, Tensor)>,
    path: String,
}

impl TensorMap {
    pub fn load(path: &Path) -> Result<Self> {
        Ok(TensorMap {
            entries: load_tensors(path)?,
            path: path.display().to_string(),
        })
    }

    pub fn take(&mut self, name: &str) -> Result<Tensor> {
        match self.entries.iter().position(|(n, _)| n == name) {
            Some(i) => Ok(self.entries.remove(i).1),
            None => Err(Error::Invalid(format!(
                "{}: missing tensor `{name}`",
                self.path
            ))),
        }
    }

    pub fn names(&self) -> Vec<&str> {
        self.entries.iter().map(|(n, _)| n.as_str()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_quantizes_to_f32() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.mmnn");
        let a = Tensor::from_vec(&[2, 2], vec![0.1, -2.5, 1e-12, 3.0]);
        let b = Tensor::from_vec(&[3], vec![1.0, 2.0, 3.0]);
        save_tensors(&path, &[("a", &a), ("b", &b)]).unwrap();
        let loaded = load_tensors(&path).unwrap();
        assert_eq!(loaded.len(), 2);
        assert_eq!(loaded[0].0, "a");
        assert_eq!(loaded[0].1.shape(), &[2, 2]);
        for (&orig, &got) in a.data().iter().zip(loaded[0].1.data()) {
            assert_eq!(got, orig as f32 as f64);
        }
        assert_eq!(loaded[1].1.data(), b.data());
    }

    #[test]
    fn bad_magic_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.mmnn");
        std::fs::write(&path, b"NOPE").unwrap();
        assert!(load_tensors(&path).is_err());
    }
}
