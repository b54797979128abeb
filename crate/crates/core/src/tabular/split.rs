use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

use super::dataset::Dataset;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitPair {
    pub train: Dataset,
    pub test: Dataset,
    pub seed: u64,
}

/// Number of training rows for `n` rows at `fraction`, kept in `1..n`.
pub fn train_size(n: usize, fraction: f64) -> usize {
    ((fraction * n as f64).round() as usize).clamp(1, n - 1)
}

/// Shuffle rows with `seed`, then cut into train/test. Not stratified.
pub fn shuffle_split(ds: &Dataset, train_fraction: f64, seed: u64) -> Result<SplitPair> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::invalid(format!(
            "train fraction {train_fraction} must lie in (0, 1)"
        )));
    }
    let n = ds.n_rows();
    if n < 2 {
        return Err(Error::invalid(format!("cannot split {n} rows")));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng::seeded(seed));
    let cut = train_size(n, train_fraction);
    Ok(SplitPair {
        train: ds.select_rows(&perm[..cut]),
        test: ds.select_rows(&perm[cut..]),
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tabular::schema::{ColumnMeta, Schema};
    use proptest::prelude::*;
    use std::collections::HashSet;

    fn ds(n: usize) -> Dataset {
        let schema = Schema::new(
            vec![ColumnMeta::numeric("x", ""), ColumnMeta::label("y", "")],
            "y",
        )
        .unwrap();
        let rows: Vec<[f64; 1]> = (0..n).map(|i| [i as f64]).collect();
        let labels = (0..n).map(|i| (i % 2) as u8).collect();
        Dataset::from_rows(&schema, &rows, Some(labels)).unwrap()
    }

    #[test]
    fn eighty_twenty() {
        let s = shuffle_split(&ds(100), 0.8, 7).unwrap();
        assert_eq!(s.train.n_rows(), 80);
        assert_eq!(s.test.n_rows(), 20);
    }

    #[test]
    fn same_seed_same_assignment() {
        let d = ds(50);
        assert_eq!(shuffle_split(&d, 0.8, 3).unwrap(), shuffle_split(&d, 0.8, 3).unwrap());
    }

    #[test]
    fn bad_arguments() {
        assert!(shuffle_split(&ds(1), 0.8, 0).is_err());
        assert!(shuffle_split(&ds(10), 1.0, 0).is_err());
        assert!(shuffle_split(&ds(10), 0.0, 0).is_err());
    }

    proptest! {
        #[test]
        fn split_is_partition(n in 2usize..60, frac in 0.05f64..0.95, seed in any::<u64>()) {
            let d = ds(n);
            let s = shuffle_split(&d, frac, seed).unwrap();
            let train: HashSet<u64> = s.train.row_ids().iter().copied().collect();
            let test: HashSet<u64> = s.test.row_ids().iter().copied().collect();
            prop_assert!(train.is_disjoint(&test));
            prop_assert_eq!(train.len() + test.len(), n);
            prop_assert_eq!(s.train.n_rows() + s.test.n_rows(), n);
        }
    }
}
