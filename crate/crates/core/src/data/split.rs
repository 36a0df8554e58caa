use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::Dataset;
use crate::error::{Error, Result};

/// Splits a dataset into (train, dev) by a seeded permutation.
///
/// Sizes follow round(train_fraction * n) with the rounding remainder going
/// to train; the permutation is a pure function of the seed.
pub fn split_dataset(ds: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if ds.is_empty() {
        return Err(Error::invalid("split_dataset: empty dataset"));
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::invalid(format!(
            "train fraction {train_fraction} outside (0,1)"
        )));
    }
    let n = ds.len();
    let n_train = ((train_fraction * n as f64).round() as usize).clamp(1, n);
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);

    let pick = |idxs: &[usize]| Dataset {
        records: idxs.iter().map(|&i| ds.records[i].clone()).collect(),
        vocab: ds.vocab.clone(),
        visual_dim: ds.visual_dim,
        audio_dim: ds.audio_dim,
    };
    Ok((pick(&order[..n_train]), pick(&order[n_train..])))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{LabelVocabulary, VideoRecord};

    fn toy(n: usize) -> Dataset {
        Dataset {
            records: (0..n)
                .map(|i| VideoRecord {
                    id: format!("v{i}"),
                    labels: vec![0],
                    visual: vec![i as f64],
                    audio: vec![],
                    title_tokens: vec![],
                    keyword_tokens: vec![],
                })
                .collect(),
            vocab: LabelVocabulary::new(vec!["only".into()]).unwrap(),
            visual_dim: 1,
            audio_dim: 0,
        }
    }

    #[test]
    fn sizes_follow_rounding() {
        let (train, dev) = split_dataset(&toy(10), 0.8, 7).unwrap();
        assert_eq!((train.len(), dev.len()), (8, 2));
    }

    #[test]
    fn deterministic_per_seed() {
        let ds = toy(20);
        let (a1, b1) = split_dataset(&ds, 0.7, 3).unwrap();
        let (a2, b2) = split_dataset(&ds, 0.7, 3).unwrap();
        assert_eq!(a1.records, a2.records);
        assert_eq!(b1.records, b2.records);
        let (a3, _) = split_dataset(&ds, 0.7, 4).unwrap();
        assert_ne!(a1.records, a3.records);
    }

    #[test]
    fn single_record_goes_to_train() {
        let (train, dev) = split_dataset(&toy(1), 0.5, 0).unwrap();
        assert_eq!((train.len(), dev.len()), (1, 0));
    }

    #[test]
    fn partition_property() {
        use std::collections::HashSet;
        // union equals input, intersection empty, over many (n, fraction, seed)
        for trial in 0..1000u64 {
            let n = 1 + (trial as usize * 7919) % 40;
            let fraction = 0.05 + 0.9 * ((trial as f64 * 0.37) % 1.0);
            let ds = toy(n);
            let (train, dev) = split_dataset(&ds, fraction, trial).unwrap();
            assert_eq!(train.len() + dev.len(), n);
            let ids: HashSet<_> = train
                .records
                .iter()
                .chain(dev.records.iter())
                .map(|r| r.id.clone())
                .collect();
            assert_eq!(ids.len(), n, "overlap or loss at n={n} f={fraction}");
        }
    }

    #[test]
    fn empty_dataset_errors() {
        assert!(split_dataset(&toy(0), 0.5, 0).is_err());
    }
}
