use super::LearnerError;
use crate::numerics::Rng;

/// Seeded fold labels in `0..v`. With `strata`, each stratum is permuted
/// separately and dealt round-robin, so fold sizes differ by at most one and
/// every fold sees every stratum that has at least `v` members.
pub fn fold_assignment(
    n: usize,
    v: usize,
    strata: Option<&[u8]>,
    rng: &mut Rng,
) -> Result<Vec<usize>, LearnerError> {
    if v < 2 {
        return Err(LearnerError::Folds(format!("need at least 2 folds, got {v}")));
    }
    if n < v {
        return Err(LearnerError::Folds(format!("{n} rows cannot fill {v} folds")));
    }
    let groups: Vec<Vec<usize>> = match strata {
        None => vec![(0..n).collect()],
        Some(s) => {
            assert_eq!(s.len(), n, "strata length");
            let mut labels: Vec<u8> = s.to_vec();
            labels.sort_unstable();
            labels.dedup();
            labels
                .iter()
                .rev()
                .map(|&l| (0..n).filter(|&i| s[i] == l).collect())
                .collect()
        }
    };
    let mut folds = vec![0; n];
    let mut next = 0;
    for mut g in groups {
        rng.shuffle(&mut g);
        for i in g {
            folds[i] = next % v;
            next += 1;
        }
    }
    Ok(folds)
}

/// Row indices (training, held-out) for fold `k`.
pub(crate) fn split(folds: &[usize], k: usize) -> (Vec<usize>, Vec<usize>) {
    let mut train = Vec::with_capacity(folds.len());
    let mut held = Vec::new();
    for (i, &f) in folds.iter().enumerate() {
        if f == k {
            held.push(i);
        } else {
            train.push(i);
        }
    }
    (train, held)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_and_balance() {
        let mut rng = Rng::new(3);
        let f = fold_assignment(23, 5, None, &mut rng).unwrap();
        let mut sizes = [0; 5];
        f.iter().for_each(|&k| sizes[k] += 1);
        assert!(sizes.iter().all(|&s| s == 4 || s == 5));
    }

    #[test]
    fn stratified_folds_contain_both_arms() {
        let strata: Vec<u8> = (0..40).map(|i| u8::from(i % 3 == 0)).collect();
        let f = fold_assignment(40, 10, Some(&strata), &mut Rng::new(1)).unwrap();
        for k in 0..10 {
            let arms: Vec<u8> = (0..40).filter(|&i| f[i] == k).map(|i| strata[i]).collect();
            assert!(arms.contains(&0) && arms.contains(&1), "fold {k}");
        }
    }

    #[test]
    fn deterministic() {
        let a = fold_assignment(50, 10, None, &mut Rng::new(9)).unwrap();
        let b = fold_assignment(50, 10, None, &mut Rng::new(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_counts() {
        assert!(fold_assignment(10, 1, None, &mut Rng::new(0)).is_err());
        assert!(fold_assignment(3, 4, None, &mut Rng::new(0)).is_err());
    }
}
