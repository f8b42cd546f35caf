use crate::error::{Error, Result};

/// Exact ROC AUC by the rank-sum formula with average ranks for ties, so a
/// tied positive/negative pair counts one half.
pub fn auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::Validation(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if let Some(i) = scores.iter().position(|s| s.is_nan()) {
        return Err(Error::Validation(format!("score {i} is NaN")));
    }
    if let Some(i) = labels.iter().position(|&l| l > 1) {
        return Err(Error::Validation(format!("label {i} is {}, expected 0 or 1", labels[i])));
    }
    let pos = labels.iter().filter(|&&l| l == 1).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::UndefinedAuc(format!(
            "need both classes, got {pos} positives and {neg} negatives"
        )));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j share their mean
        let avg = (i + 1 + j) as f64 / 2.0;
        let hits = order[i..j].iter().filter(|&&k| labels[k] == 1).count();
        rank_sum += avg * hits as f64;
        i = j;
    }
    let (p, n) = (pos as f64, neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;
    use rand::{Rng as _, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    pub(crate) fn pairwise(scores: &[f64], labels: &[u8]) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for (i, &li) in labels.iter().enumerate() {
            for (j, &lj) in labels.iter().enumerate() {
                if li == 1 && lj == 0 {
                    den += 1.0;
                    if scores[i] > scores[j] {
                        num += 1.0;
                    } else if scores[i] == scores[j] {
                        num += 0.5;
                    }
                }
            }
        }
        num / den
    }

    #[test]
    fn perfect_ranking() {
        assert_eq!(auc(&[0.8, 0.2], &[1, 0]).unwrap(), 1.0);
        assert_eq!(auc(&[0.2, 0.8], &[1, 0]).unwrap(), 0.0);
    }

    #[test]
    fn tie_counts_half() {
        assert_eq!(auc(&[0.5, 0.5], &[1, 0]).unwrap(), 0.5);
    }

    #[test]
    fn single_class_is_undefined() {
        assert!(matches!(auc(&[0.1, 0.2], &[1, 1]), Err(Error::UndefinedAuc(_))));
        assert!(matches!(auc(&[0.1], &[0]), Err(Error::UndefinedAuc(_))));
        assert!(matches!(auc(&[], &[]), Err(Error::UndefinedAuc(_))));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(auc(&[0.1], &[1, 0]), Err(Error::Validation(_))));
        assert!(matches!(auc(&[f64::NAN, 0.1], &[1, 0]), Err(Error::Validation(_))));
        assert!(matches!(auc(&[0.3, 0.1], &[2, 0]), Err(Error::Validation(_))));
    }

    #[test]
    fn fifty_random_pairs_match_oracle() {
        let mut r = ChaCha8Rng::seed_from_u64(50);
        let scores: Vec<f64> = (0..50).map(|_| r.random()).collect();
        let mut labels: Vec<u8> = (0..50).map(|_| r.random_range(0..2)).collect();
        labels[0] = 0;
        labels[1] = 1;
        assert!((auc(&scores, &labels).unwrap() - pairwise(&scores, &labels)).abs() < 1e-12);
    }

    #[test]
    fn two_hundred_tied_instances_match_oracle() {
        let mut r = ChaCha8Rng::seed_from_u64(200);
        for _ in 0..200 {
            let n = r.random_range(2..=200);
            let levels = r.random_range(1..=10);
            let scores: Vec<f64> = (0..n)
                .map(|_| if r.random_bool(0.5) { r.random_range(0..levels) as f64 / 10.0 } else { r.random() })
                .collect();
            let mut labels: Vec<u8> = (0..n).map(|_| r.random_range(0..2)).collect();
            labels[0] = 1;
            labels[1] = 0;
            let a = auc(&scores, &labels).unwrap();
            assert!((a - pairwise(&scores, &labels)).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn invariant_under_increasing_transforms(
            scores in proptest::collection::vec(-2.0f64..2.0, 2..60),
            seed in 0u64..1000,
        ) {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            let mut labels: Vec<u8> = scores.iter().map(|_| r.random_range(0..2)).collect();
            labels[0] = 0;
            labels[1] = 1;
            let a = auc(&scores, &labels).unwrap();
            let cubed: Vec<f64> = scores.iter().map(|x| x * x * x).collect();
            let squashed: Vec<f64> = scores.iter().map(|x| crate::scalar::sigmoid(5.0 * x)).collect();
            prop_assert_eq!(a, auc(&cubed, &labels).unwrap());
            prop_assert_eq!(a, auc(&squashed, &labels).unwrap());
            prop_assert!((0.0..=1.0).contains(&a));
        }
    }
}
