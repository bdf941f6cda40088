use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
}

/// Shuffled `k`-fold partition of `0..labels.len()`. With `stratify`, each
/// class is dealt round-robin over the folds; if some class has fewer than
/// `k` members the split falls back to an unstratified one.
pub fn kfold_split(labels: &[f64], k: usize, seed: u64, stratify: bool) -> Result<Vec<Fold>> {
    let n = labels.len();
    if k < 2 || n < k {
        return Err(Error::Config(format!("cannot split {n} items into {k} folds")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = Vec::with_capacity(n);
    let mut use_strata = stratify;
    let mut classes: Vec<i64> = labels.iter().map(|y| *y as i64).collect();
    classes.sort_unstable();
    classes.dedup();
    let groups: Vec<Vec<usize>> = classes
        .iter()
        .map(|c| (0..n).filter(|&i| labels[i] as i64 == *c).collect())
        .collect();
    if stratify && groups.iter().any(|g| g.len() < k) {
        log::warn!("a class has fewer than {k} members; using an unstratified split");
        use_strata = false;
    }
    if use_strata {
        for mut g in groups {
            g.shuffle(&mut rng);
            order.extend(g);
        }
    } else {
        order.extend(0..n);
        order.shuffle(&mut rng);
    }
    let mut members = vec![Vec::new(); k];
    for (pos, &i) in order.iter().enumerate() {
        members[pos % k].push(i);
    }
    Ok((0..k)
        .map(|f| {
            let mut validation = members[f].clone();
            validation.sort_unstable();
            let mut train: Vec<usize> = (0..k)
                .filter(|&g| g != f)
                .flat_map(|g| members[g].iter().copied())
                .collect();
            train.sort_unstable();
            Fold { train, validation }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ten_items_five_folds() {
        let labels: Vec<f64> = (0..10).map(|i| (i % 2) as f64).collect();
        let folds = kfold_split(&labels, 5, 1, true).unwrap();
        assert!(folds.iter().all(|f| f.validation.len() == 2 && f.train.len() == 8));
        let mut all: Vec<usize> = folds.iter().flat_map(|f| f.validation.clone()).collect();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        assert_eq!(folds, kfold_split(&labels, 5, 1, true).unwrap());
        assert_ne!(folds, kfold_split(&labels, 5, 2, true).unwrap());
    }

    #[test]
    fn stratification_keeps_proportions() {
        let labels: Vec<f64> = (0..23).map(|i| if i < 8 { 1.0 } else { 0.0 }).collect();
        for f in kfold_split(&labels, 5, 7, true).unwrap() {
            let pos = f.validation.iter().filter(|&&i| labels[i] == 1.0).count();
            assert!((1..=2).contains(&pos));
        }
    }

    #[test]
    fn falls_back_when_a_class_is_rare() {
        let labels = [0.0, 0.0, 0.0, 0.0, 0.0, 1.0];
        let folds = kfold_split(&labels, 3, 0, true).unwrap();
        assert_eq!(folds.iter().map(|f| f.validation.len()).sum::<usize>(), 6);
        assert!(kfold_split(&labels, 7, 0, true).is_err());
        assert!(kfold_split(&labels, 1, 0, true).is_err());
    }
}
