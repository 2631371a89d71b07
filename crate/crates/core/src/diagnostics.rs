//! Model selection and partition quality.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::math;
use crate::posterior::Posteriors;

/// Hard class assignment of every observation.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Partition {
    pub labels: Vec<usize>,
}

impl Partition {
    pub fn new(labels: Vec<usize>) -> Self {
        Partition { labels }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_classes(&self) -> usize {
        self.labels.iter().max().map_or(0, |m| m + 1)
    }

    /// Share of observations in each class.
    pub fn shares(&self) -> Vec<f64> {
        let mut counts = vec![0usize; self.n_classes()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts.into_iter().map(|c| c as f64 / self.len() as f64).collect()
    }
}

/// `-2 ℓ + p ln n`.
pub fn bic(loglik: f64, n_params: usize, n: usize) -> f64 {
    -2.0 * loglik + n_params as f64 * math::ln(n as f64)
}

/// Entropy-based R²: one minus the posterior entropy relative to the
/// entropy of the estimated class proportions. Defined as 1 when the
/// baseline entropy is zero.
pub fn entropy_r2(posteriors: &Posteriors, class_proportions: &[f64]) -> f64 {
    let n = posteriors.n() as f64;
    let baseline = -n * class_proportions.iter().map(|&p| math::xlogx(p)).sum::<f64>();
    if !(baseline > 0.0) {
        return 1.0;
    }
    let posterior_entropy = -posteriors.as_slice().iter().map(|&p| math::xlogx(p)).sum::<f64>();
    (1.0 - posterior_entropy / baseline).clamp(0.0, 1.0)
}

/// Expected proportion misclassified by the modal rule: the mean of
/// `1 - max_s p_is`.
pub fn classification_error(posteriors: &Posteriors) -> f64 {
    let total: f64 = posteriors
        .rows()
        .map(|row| 1.0 - row.iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .sum();
    (total / posteriors.n() as f64).max(0.0)
}

/// Arg-max per row, lowest class index on ties.
pub fn modal_assignment(posteriors: &Posteriors) -> Partition {
    let labels = posteriors
        .rows()
        .map(|row| {
            let mut best = 0;
            for (c, &v) in row.iter().enumerate().skip(1) {
                if v > row[best] {
                    best = c;
                }
            }
            best
        })
        .collect();
    Partition { labels }
}

/// One categorical draw per row from its posterior.
pub fn proportional_assignment<R: Rng + ?Sized>(posteriors: &Posteriors, rng: &mut R) -> Partition {
    let labels = posteriors
        .rows()
        .map(|row| {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut last_positive = 0;
            for (c, &p) in row.iter().enumerate() {
                if p > 0.0 {
                    last_positive = c;
                }
                acc += p;
                if u < acc {
                    return c;
                }
            }
            last_positive
        })
        .collect();
    Partition { labels }
}

#[inline]
fn pairs(n: u64) -> f64 {
    (n * n.saturating_sub(1) / 2) as f64
}

/// Hubert–Arabie adjusted Rand index. Two partitions that both put
/// everything together (or both keep everything apart) score 1.
pub fn adjusted_rand_index(a: &Partition, b: &Partition) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::invalid(alloc::format!(
            "partitions have different lengths: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::invalid("adjusted Rand index needs at least two observations"));
    }
    let (ka, kb) = (a.n_classes(), b.n_classes());
    let mut table = vec![0u64; ka * kb];
    for (&x, &y) in a.labels.iter().zip(&b.labels) {
        table[x * kb + y] += 1;
    }
    let mut row_sums = vec![0u64; ka];
    let mut col_sums = vec![0u64; kb];
    let mut index = 0.0;
    for x in 0..ka {
        for y in 0..kb {
            let c = table[x * kb + y];
            row_sums[x] += c;
            col_sums[y] += c;
            index += pairs(c);
        }
    }
    let sum_a: f64 = row_sums.iter().map(|&c| pairs(c)).sum();
    let sum_b: f64 = col_sums.iter().map(|&c| pairs(c)).sum();
    let expected = sum_a * sum_b / pairs(n as u64);
    let max_index = 0.5 * (sum_a + sum_b);
    let denom = max_index - expected;
    if denom == 0.0 {
        return Ok(1.0);
    }
    Ok((index - expected) / denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn post(n_classes: usize, rows: &[&[f64]]) -> Posteriors {
        Posteriors::from_rows(n_classes, rows.iter().flat_map(|r| r.iter().copied()).collect()).unwrap()
    }

    #[test]
    fn bic_values() {
        assert_abs_diff_eq!(bic(-100.0, 5, 100), 223.02585, epsilon = 1e-5);
        assert_eq!(bic(-100.0, 0, 100), 200.0);
    }

    #[test]
    fn entropy_r2_extremes() {
        let degenerate = post(2, &[&[1.0, 0.0], &[0.0, 1.0], &[1.0, 0.0]]);
        assert_eq!(entropy_r2(&degenerate, &[2.0 / 3.0, 1.0 / 3.0]), 1.0);
        let flat = post(2, &[&[0.7, 0.3], &[0.7, 0.3]]);
        assert_abs_diff_eq!(entropy_r2(&flat, &[0.7, 0.3]), 0.0, epsilon = 1e-12);
        let one = post(1, &[&[1.0], &[1.0]]);
        assert_eq!(entropy_r2(&one, &[1.0]), 1.0);
    }

    #[test]
    fn classification_error_values() {
        let degenerate = post(2, &[&[1.0, 0.0], &[0.0, 1.0]]);
        assert_eq!(classification_error(&degenerate), 0.0);
        let uniform = post(2, &[&[0.5, 0.5], &[0.5, 0.5]]);
        assert_eq!(classification_error(&uniform), 0.5);
        let mixed = post(2, &[&[0.9, 0.1], &[0.6, 0.4]]);
        assert_abs_diff_eq!(classification_error(&mixed), 0.25, epsilon = 1e-15);
    }

    #[test]
    fn modal_rule_and_ties() {
        let p = post(2, &[&[0.2, 0.8], &[0.5, 0.5]]);
        assert_eq!(modal_assignment(&p).labels, vec![1, 0]);
    }

    #[test]
    fn proportional_equals_modal_when_degenerate() {
        let p = post(3, &[&[0.0, 1.0, 0.0], &[1.0, 0.0, 0.0], &[0.0, 0.0, 1.0]]);
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            assert_eq!(proportional_assignment(&p, &mut rng), modal_assignment(&p));
        }
    }

    #[test]
    fn ari_examples() {
        let a = Partition::new(vec![0, 0, 1, 1]);
        let b = Partition::new(vec![0, 1, 0, 1]);
        // E = 2·2/6, so (0 - 2/3) / (2 - 2/3).
        assert_abs_diff_eq!(adjusted_rand_index(&a, &b).unwrap(), -0.5, epsilon = 1e-15);
        assert_eq!(adjusted_rand_index(&a, &a).unwrap(), 1.0);
        let permuted = Partition::new(vec![1, 1, 0, 0]);
        assert_eq!(adjusted_rand_index(&a, &permuted).unwrap(), 1.0);
    }

    #[test]
    fn ari_errors() {
        let a = Partition::new(vec![0, 1]);
        let b = Partition::new(vec![0]);
        assert!(adjusted_rand_index(&a, &b).is_err());
        assert!(adjusted_rand_index(&b, &b).is_err());
    }
}
