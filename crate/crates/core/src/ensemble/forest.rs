//! Random forest over model scores.
//!
//! Instances are (video, class) pairs: the feature vector holds the M model
//! scores for that pair and the binary target is class membership. Trees are
//! trained on seeded bootstraps with Gini splits; prediction reports the
//! fraction of trees voting 1, so the output stays usable as a ranking
//! confidence.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ScoreMatrix;
use crate::error::{Error, Result};
use crate::seed::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Node {
    /// (feature, threshold, left child, right child); x[feature] <= threshold
    /// goes left.
    Split(usize, f64, usize, usize),
    /// Leaf vote for class 1.
    Leaf(bool),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    /// Preorder node list; index 0 is the root.
    pub nodes: Vec<Node>,
}

impl Tree {
    fn vote(&self, features: &[f64]) -> bool {
        let mut i = 0usize;
        loop {
            match &self.nodes[i] {
                Node::Leaf(v) => return *v,
                Node::Split(f, thr, left, right) => {
                    i = if features[*f] <= *thr { *left } else { *right };
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForestModel {
    pub num_features: usize,
    pub max_depth: usize,
    pub seed: u64,
    pub trees: Vec<Tree>,
}

#[derive(Debug, Clone)]
pub struct ForestHyper {
    pub num_trees: usize,
    pub max_depth: usize,
    pub seed: u64,
}

impl Default for ForestHyper {
    fn default() -> Self {
        ForestHyper {
            num_trees: 1000,
            max_depth: 6,
            seed: 0,
        }
    }
}

struct Builder<'a> {
    features: &'a [f64],
    num_features: usize,
    targets: &'a [bool],
    max_depth: usize,
    features_per_split: usize,
    nodes: Vec<Node>,
}

impl<'a> Builder<'a> {
    fn feature(&self, instance: usize, f: usize) -> f64 {
        self.features[instance * self.num_features + f]
    }

    /// Returns the node index of the subtree built over `idx`.
    fn build(&mut self, idx: &mut [usize], depth: usize, rng: &mut ChaCha8Rng) -> usize {
        let positives = idx.iter().filter(|&&i| self.targets[i]).count();
        let majority = positives * 2 > idx.len();
        if depth >= self.max_depth || positives == 0 || positives == idx.len() || idx.len() < 2 {
            self.nodes.push(Node::Leaf(majority));
            return self.nodes.len() - 1;
        }

        // feature subsample per split
        let mut candidates: Vec<usize> = (0..self.num_features).collect();
        if self.features_per_split < self.num_features {
            for i in 0..self.features_per_split {
                let j = rng.gen_range(i..candidates.len());
                candidates.swap(i, j);
            }
            candidates.truncate(self.features_per_split);
            candidates.sort_unstable();
        }

        let mut best: Option<(f64, usize, f64)> = None; // (gini, feature, threshold)
        for &f in &candidates {
            let mut values: Vec<(f64, bool)> = idx
                .iter()
                .map(|&i| (self.feature(i, f), self.targets[i]))
                .collect();
            values.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
            let total_pos = positives as f64;
            let total = idx.len() as f64;
            let mut left_n = 0.0;
            let mut left_pos = 0.0;
            for w in 0..values.len() - 1 {
                left_n += 1.0;
                if values[w].1 {
                    left_pos += 1.0;
                }
                if values[w].0 == values[w + 1].0 {
                    continue; // not a valid cut point
                }
                let right_n = total - left_n;
                let right_pos = total_pos - left_pos;
                let gini = |n: f64, pos: f64| {
                    if n == 0.0 {
                        0.0
                    } else {
                        let p = pos / n;
                        1.0 - p * p - (1.0 - p) * (1.0 - p)
                    }
                };
                let weighted =
                    (left_n / total) * gini(left_n, left_pos) + (right_n / total) * gini(right_n, right_pos);
                let threshold = 0.5 * (values[w].0 + values[w + 1].0);
                let better = match best {
                    None => true,
                    Some((g, bf, bt)) => {
                        weighted < g - 1e-15
                            || ((weighted - g).abs() <= 1e-15 && (f, threshold) < (bf, bt))
                    }
                };
                if better {
                    best = Some((weighted, f, threshold));
                }
            }
        }

        let Some((_, f, threshold)) = best else {
            // all candidate features constant on this node
            self.nodes.push(Node::Leaf(majority));
            return self.nodes.len() - 1;
        };

        let mid = partition(idx, |&i| self.feature(i, f) <= threshold);
        let node_idx = self.nodes.len();
        self.nodes.push(Node::Leaf(false)); // placeholder, patched below
        let (left_idx, right_idx) = idx.split_at_mut(mid);
        let left = self.build(left_idx, depth + 1, rng);
        let right = self.build(right_idx, depth + 1, rng);
        self.nodes[node_idx] = Node::Split(f, threshold, left, right);
        node_idx
    }
}

/// Stable partition: elements satisfying the predicate first; returns its count.
fn partition<T: Copy>(xs: &mut [T], pred: impl Fn(&T) -> bool) -> usize {
    let mut out: Vec<T> = Vec::with_capacity(xs.len());
    out.extend(xs.iter().copied().filter(|x| pred(x)));
    let mid = out.len();
    out.extend(xs.iter().copied().filter(|x| !pred(x)));
    xs.copy_from_slice(&out);
    mid
}

/// Builds the (video, class) instance table: M scores per instance, binary
/// target from the truth sets.
fn build_instances(
    mats: &[ScoreMatrix],
    truth: &[Vec<usize>],
) -> Result<(Vec<f64>, Vec<bool>, usize)> {
    let n = mats[0].len();
    let l = mats[0].num_labels;
    if truth.len() != n {
        return Err(Error::invalid(format!(
            "forest: {} truth rows vs {} videos",
            truth.len(),
            n
        )));
    }
    let m = mats.len();
    let mut features = Vec::with_capacity(n * l * m);
    let mut targets = Vec::with_capacity(n * l);
    for v in 0..n {
        for c in 0..l {
            for mat in mats {
                features.push(mat.get(v, c));
            }
            targets.push(truth[v].contains(&c));
        }
    }
    Ok((features, targets, m))
}

/// Trains `num_trees` trees on seeded bootstraps. Needs at least two models;
/// single-class targets degenerate to constant trees.
pub fn forest_train(
    mats: &[ScoreMatrix],
    truth: &[Vec<usize>],
    hyper: &ForestHyper,
) -> Result<ForestModel> {
    if mats.len() < 2 {
        return Err(Error::invalid(
            "forest ensembling needs at least two model score inputs",
        ));
    }
    super::check_aligned(mats)?;
    if hyper.num_trees == 0 {
        return Err(Error::invalid("forest: num_trees must be >= 1"));
    }
    let (features, targets, num_features) = build_instances(mats, truth)?;
    let n_instances = targets.len();
    if n_instances == 0 {
        return Err(Error::invalid("forest: no instances"));
    }
    // sqrt(M) feature subsampling, all features when M < 4
    let features_per_split = if num_features < 4 {
        num_features
    } else {
        (num_features as f64).sqrt().floor() as usize
    };

    let mut trees = Vec::with_capacity(hyper.num_trees);
    for t in 0..hyper.num_trees {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(hyper.seed, &format!("tree-{t}")));
        let mut idx: Vec<usize> = (0..n_instances)
            .map(|_| rng.gen_range(0..n_instances))
            .collect();
        let mut builder = Builder {
            features: &features,
            num_features,
            targets: &targets,
            max_depth: hyper.max_depth,
            features_per_split,
            nodes: Vec::new(),
        };
        let root = builder.build(&mut idx, 0, &mut rng);
        debug_assert_eq!(root, 0);
        trees.push(Tree {
            nodes: builder.nodes,
        });
    }
    Ok(ForestModel {
        num_features,
        max_depth: hyper.max_depth,
        seed: hyper.seed,
        trees,
    })
}

/// Scores every (video, class) pair as the fraction of trees voting 1.
pub fn forest_predict(model: &ForestModel, mats: &[ScoreMatrix]) -> Result<ScoreMatrix> {
    super::check_aligned(mats)?;
    if mats.len() != model.num_features {
        return Err(Error::invalid(format!(
            "forest expects {} model inputs, got {}",
            model.num_features,
            mats.len()
        )));
    }
    let n = mats[0].len();
    let l = mats[0].num_labels;
    let mut scores = Vec::with_capacity(n * l);
    let mut row = vec![0.0; model.num_features];
    for v in 0..n {
        for c in 0..l {
            for (j, mat) in mats.iter().enumerate() {
                row[j] = mat.get(v, c);
            }
            let votes = model.trees.iter().filter(|t| t.vote(&row)).count();
            scores.push(votes as f64 / model.trees.len() as f64);
        }
    }
    ScoreMatrix::new(mats[0].video_ids.clone(), l, scores)
}

// ---------------------------------------------------------------------------
// checkpoint: JSONL, header line then one tree per line
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct ForestHeader {
    num_features: usize,
    num_trees: usize,
    max_depth: usize,
    seed: u64,
}

pub fn save_forest(model: &ForestModel, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let header = ForestHeader {
        num_features: model.num_features,
        num_trees: model.trees.len(),
        max_depth: model.max_depth,
        seed: model.seed,
    };
    serde_json::to_writer(&mut w, &header).map_err(|e| Error::invalid(e.to_string()))?;
    w.write_all(b"\n")?;
    for tree in &model.trees {
        serde_json::to_writer(&mut w, &tree.nodes).map_err(|e| Error::invalid(e.to_string()))?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_forest(path: &Path) -> Result<ForestModel> {
    let r = BufReader::new(File::open(path)?);
    let mut lines = r.lines();
    let header_line = lines
        .next()
        .ok_or_else(|| Error::malformed(path, 0, "empty forest file"))??;
    let header: ForestHeader = serde_json::from_str(&header_line)
        .map_err(|e| Error::malformed(path, 1, e.to_string()))?;
    let mut trees = Vec::with_capacity(header.num_trees);
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let nodes: Vec<Node> = serde_json::from_str(&line)
            .map_err(|e| Error::malformed(path, lineno + 2, e.to_string()))?;
        trees.push(Tree { nodes });
    }
    if trees.len() != header.num_trees {
        return Err(Error::malformed(
            path,
            0,
            format!("header says {} trees, file has {}", header.num_trees, trees.len()),
        ));
    }
    Ok(ForestModel {
        num_features: header.num_features,
        max_depth: header.max_depth,
        seed: header.seed,
        trees,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mats_two(scores_a: &[f64], scores_b: &[f64], l: usize) -> Vec<ScoreMatrix> {
        let n = scores_a.len() / l;
        let ids: Vec<String> = (0..n).map(|i| format!("v{i}")).collect();
        vec![
            ScoreMatrix::new(ids.clone(), l, scores_a.to_vec()).unwrap(),
            ScoreMatrix::new(ids, l, scores_b.to_vec()).unwrap(),
        ]
    }

    #[test]
    fn all_zero_targets_give_zero_scores() {
        let mats = mats_two(&[0.9, 0.1, 0.4, 0.6], &[0.8, 0.2, 0.3, 0.7], 2);
        let truth = vec![vec![], vec![]];
        let hyper = ForestHyper {
            num_trees: 10,
            ..Default::default()
        };
        let model = forest_train(&mats, &truth, &hyper).unwrap();
        let out = forest_predict(&model, &mats).unwrap();
        assert!(out.scores.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn perfectly_informative_feature_reaches_full_accuracy_at_depth_one() {
        // model 0's score equals the target exactly
        let mut scores_a = Vec::new();
        let mut truth = Vec::new();
        for v in 0..8 {
            let pos = v % 2;
            scores_a.extend_from_slice(if pos == 0 { &[1.0, 0.0] } else { &[0.0, 1.0] });
            truth.push(vec![pos]);
        }
        let scores_b: Vec<f64> = (0..16).map(|i| ((i * 37) % 10) as f64 / 10.0).collect();
        let mats = mats_two(&scores_a, &scores_b, 2);
        let hyper = ForestHyper {
            num_trees: 25,
            max_depth: 1,
            seed: 3,
        };
        let model = forest_train(&mats, &truth, &hyper).unwrap();
        let out = forest_predict(&model, &mats).unwrap();
        for v in 0..8 {
            for c in 0..2 {
                let want = truth[v].contains(&c);
                let got = out.get(v, c) > 0.5;
                assert_eq!(got, want, "v={v} c={c} score={}", out.get(v, c));
            }
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let mats = mats_two(&[0.9, 0.1, 0.4, 0.6], &[0.8, 0.4, 0.1, 0.7], 2);
        let truth = vec![vec![0], vec![1]];
        let hyper = ForestHyper {
            num_trees: 12,
            max_depth: 3,
            seed: 9,
        };
        let a = forest_train(&mats, &truth, &hyper).unwrap();
        let b = forest_train(&mats, &truth, &hyper).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn vote_fraction_is_reported() {
        let mats = mats_two(&[1.0, 0.0], &[1.0, 0.0], 2);
        let truth = vec![vec![0]];
        let hyper = ForestHyper {
            num_trees: 3,
            max_depth: 2,
            seed: 1,
        };
        let model = forest_train(&mats, &truth, &hyper).unwrap();
        let out = forest_predict(&model, &mats).unwrap();
        for &s in &out.scores {
            let frac = s * 3.0;
            assert!((frac - frac.round()).abs() < 1e-12, "score {s} not k/3");
        }
    }

    #[test]
    fn single_model_rejected() {
        let m = ScoreMatrix::new(vec!["v".into()], 1, vec![0.5]).unwrap();
        assert!(forest_train(std::slice::from_ref(&m), &[vec![0]], &ForestHyper::default()).is_err());
    }

    #[test]
    fn model_count_mismatch_on_predict() {
        let mats = mats_two(&[0.9, 0.1], &[0.8, 0.2], 2);
        let truth = vec![vec![0]];
        let hyper = ForestHyper {
            num_trees: 5,
            ..Default::default()
        };
        let model = forest_train(&mats, &truth, &hyper).unwrap();
        assert!(forest_predict(&model, &mats[..1]).is_err());
    }

    #[test]
    fn checkpoint_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("forest.jsonl");
        let mats = mats_two(&[0.9, 0.1, 0.3, 0.8], &[0.7, 0.3, 0.2, 0.6], 2);
        let truth = vec![vec![0], vec![1]];
        let hyper = ForestHyper {
            num_trees: 7,
            max_depth: 3,
            seed: 5,
        };
        let model = forest_train(&mats, &truth, &hyper).unwrap();
        save_forest(&model, &path).unwrap();
        let loaded = load_forest(&path).unwrap();
        assert_eq!(model, loaded);
    }
}
