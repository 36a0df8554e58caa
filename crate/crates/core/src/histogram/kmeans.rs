//! Seeded k-means: k-means++ initialization, Lloyd iterations, squared
//! Euclidean metric. Empty clusters are re-seeded to the point farthest from
//! its assigned centroid.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::nn::Tensor;

pub const CENTROID_MAGIC: &[u8; 4] = b"MMKM";

#[derive(Debug, Clone, PartialEq)]
pub struct CentroidSet {
    pub k: usize,
    pub dim: usize,
    /// k x dim, row-major.
    pub centroids: Vec<f64>,
    /// Final objective: sum of squared distances to assigned centroids.
    pub inertia: f64,
}

impl CentroidSet {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.centroids[i * self.dim..(i + 1) * self.dim]
    }
}

/// Fit result: the centroids plus the per-iteration inertia trajectory
/// (one entry per Lloyd iteration, non-increasing).
#[derive(Debug, Clone)]
pub struct KmeansFit {
    pub centroids: CentroidSet,
    pub inertia_trace: Vec<f64>,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(&x, &y)| (x - y) * (x - y))
        .sum()
}

/// Lloyd's algorithm with k-means++ seeding. Stops when the relative inertia
/// improvement drops below `tol` or after `max_iters` iterations.
pub fn kmeans_fit(
    vectors: &Tensor,
    k: usize,
    seed: u64,
    max_iters: usize,
    tol: f64,
) -> Result<KmeansFit> {
    if vectors.rank() != 2 {
        return Err(Error::shape("kmeans expects an n x dim matrix"));
    }
    let (n, dim) = (vectors.shape()[0], vectors.shape()[1]);
    if k == 0 {
        return Err(Error::invalid("kmeans: k must be >= 1"));
    }
    if n < k {
        return Err(Error::invalid(format!("kmeans: n = {n} < k = {k}")));
    }
    if vectors.data().iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("kmeans: non-finite input vector"));
    }

    let point = |i: usize| &vectors.data()[i * dim..(i + 1) * dim];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // k-means++: first centroid uniform, the rest weighted by squared
    // distance to the nearest centroid chosen so far.
    let mut centroids = vec![0.0; k * dim];
    let first = rng.gen_range(0..n);
    centroids[..dim].copy_from_slice(point(first));
    let mut best_dist: Vec<f64> = (0..n).map(|i| sq_dist(point(i), point(first))).collect();
    for c in 1..k {
        let total: f64 = best_dist.iter().sum();
        let chosen = if total > 0.0 {
            let mut target = rng.gen::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &d) in best_dist.iter().enumerate() {
                target -= d;
                if target <= 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            // all remaining mass is zero (duplicated points): any point works
            rng.gen_range(0..n)
        };
        centroids[c * dim..(c + 1) * dim].copy_from_slice(point(chosen));
        for i in 0..n {
            let d = sq_dist(point(i), point(chosen));
            if d < best_dist[i] {
                best_dist[i] = d;
            }
        }
    }

    let mut assign = vec![0usize; n];
    let mut trace = Vec::new();
    let mut prev_inertia = f64::INFINITY;
    for _ in 0..max_iters {
        // assignment step (ties to the smallest centroid index)
        for i in 0..n {
            let mut best = 0usize;
            let mut best_d = sq_dist(point(i), &centroids[..dim]);
            for c in 1..k {
                let d = sq_dist(point(i), &centroids[c * dim..(c + 1) * dim]);
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            assign[i] = best;
        }

        // re-seed empty clusters to the point farthest from its centroid
        let mut sizes = vec![0usize; k];
        for &a in &assign {
            sizes[a] += 1;
        }
        for c in 0..k {
            if sizes[c] > 0 {
                continue;
            }
            let mut far_i = 0usize;
            let mut far_d = -1.0;
            for i in 0..n {
                if sizes[assign[i]] <= 1 {
                    continue; // don't strand another cluster
                }
                let d = sq_dist(point(i), &centroids[assign[i] * dim..(assign[i] + 1) * dim]);
                if d > far_d {
                    far_d = d;
                    far_i = i;
                }
            }
            centroids[c * dim..(c + 1) * dim].copy_from_slice(point(far_i));
            sizes[assign[far_i]] -= 1;
            assign[far_i] = c;
            sizes[c] = 1;
        }

        // update step: centroid = mean of assigned points
        let mut sums = vec![0.0; k * dim];
        for i in 0..n {
            let p = point(i);
            let s = &mut sums[assign[i] * dim..(assign[i] + 1) * dim];
            for (sv, &pv) in s.iter_mut().zip(p.iter()) {
                *sv += pv;
            }
        }
        for c in 0..k {
            for j in 0..dim {
                centroids[c * dim + j] = sums[c * dim + j] / sizes[c] as f64;
            }
        }

        let inertia: f64 = (0..n)
            .map(|i| sq_dist(point(i), &centroids[assign[i] * dim..(assign[i] + 1) * dim]))
            .sum();
        trace.push(inertia);
        if prev_inertia.is_finite() {
            let improvement = (prev_inertia - inertia) / prev_inertia.max(f64::MIN_POSITIVE);
            if improvement < tol {
                prev_inertia = inertia;
                break;
            }
        }
        prev_inertia = inertia;
    }

    Ok(KmeansFit {
        centroids: CentroidSet {
            k,
            dim,
            centroids,
            inertia: prev_inertia,
        },
        inertia_trace: trace,
    })
}

/// Index of the closest centroid by squared Euclidean distance, ties to the
/// smallest index.
pub fn nearest_centroid(v: &[f64], c: &CentroidSet) -> Result<usize> {
    if v.len() != c.dim {
        return Err(Error::shape(format!(
            "nearest_centroid: vector dim {} vs centroid dim {}",
            v.len(),
            c.dim
        )));
    }
    let mut best = 0usize;
    let mut best_d = sq_dist(v, c.row(0));
    for i in 1..c.k {
        let d = sq_dist(v, c.row(i));
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    Ok(best)
}

/// Checkpoint: magic `MMKM`, u32 k, u32 dim, float32 rows, float64 inertia,
/// little-endian.
pub fn save_centroids(c: &CentroidSet, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(CENTROID_MAGIC)?;
    w.write_all(&(c.k as u32).to_le_bytes())?;
    w.write_all(&(c.dim as u32).to_le_bytes())?;
    for &v in &c.centroids {
        w.write_all(&(v as f32).to_le_bytes())?;
    }
    w.write_all(&c.inertia.to_le_bytes())?;
    w.flush()?;
    Ok(())
}

pub fn load_centroids(path: &Path) -> Result<CentroidSet> {
    let mut r = BufReader::new(File::open(path)?);
    let mut b4 = [0u8; 4];
    r.read_exact(&mut b4)
        .map_err(|_| Error::malformed(path, 0, "truncated header"))?;
    if &b4 != CENTROID_MAGIC {
        return Err(Error::malformed(path, 0, "bad magic, expected MMKM"));
    }
    r.read_exact(&mut b4)?;
    let k = u32::from_le_bytes(b4) as usize;
    r.read_exact(&mut b4)?;
    let dim = u32::from_le_bytes(b4) as usize;
    let mut centroids = Vec::with_capacity(k * dim);
    for _ in 0..k * dim {
        r.read_exact(&mut b4)
            .map_err(|_| Error::malformed(path, 0, "truncated centroid rows"))?;
        centroids.push(f32::from_le_bytes(b4) as f64);
    }
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b8)
        .map_err(|_| Error::malformed(path, 0, "truncated inertia"))?;
    Ok(CentroidSet {
        k,
        dim,
        centroids,
        inertia: f64::from_le_bytes(b8),
    })
}
