//! Maximisation steps given a responsibility matrix.

use alloc::vec;
use alloc::vec::Vec;

use super::logit::{LogitOutcome, LogitProblem, COEF_LIMIT};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::math;
use crate::params::{ExternalParams, ItemParams};
use crate::posterior::Posteriors;
use crate::spec::{ModelSpec, SlopeConstraint, VarianceMode};

/// Relative floor on class variances, as a fraction of the sample variance
/// of `z`.
pub const VARIANCE_FLOOR: f64 = 1e-6;

/// Mixing logits from column means, class 0 as reference.
pub fn m_step_mixing(posteriors: &Posteriors) -> Result<Vec<f64>> {
    let means = posteriors.column_means();
    if let Some(class) = means.iter().position(|&p| !(p > 0.0)) {
        return Err(Error::DegenerateClass { class });
    }
    let base = math::ln(means[0]);
    let mut theta: Vec<f64> = means.iter().map(|&p| math::ln(p) - base).collect();
    theta[0] = 0.0;
    Ok(theta)
}

/// Floor applied to every class variance for this `z`.
pub fn variance_floor(z: &[f64]) -> f64 {
    let n = z.len() as f64;
    let mean = z.iter().sum::<f64>() / n;
    let var = z.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    if var > 0.0 {
        VARIANCE_FLOOR * var
    } else {
        VARIANCE_FLOOR
    }
}

/// Responsibility-weighted Gaussian MLE of the class means and variances.
pub fn m_step_gaussian(
    posteriors: &Posteriors,
    z: &[f64],
    variance_mode: VarianceMode,
) -> Result<ExternalParams> {
    let s = posteriors.n_classes();
    let sums = posteriors.column_sums();
    if let Some(class) = sums.iter().position(|&w| !(w > 0.0)) {
        return Err(Error::DegenerateClass { class });
    }
    let mut mu = vec![0.0; s];
    for (row, &zi) in posteriors.rows().zip(z) {
        for c in 0..s {
            mu[c] += row[c] * zi;
        }
    }
    for c in 0..s {
        mu[c] /= sums[c];
    }
    let mut ss = vec![0.0; s];
    for (row, &zi) in posteriors.rows().zip(z) {
        for c in 0..s {
            let d = zi - mu[c];
            ss[c] += row[c] * d * d;
        }
    }
    let floor = variance_floor(z);
    let sigma2 = match variance_mode {
        VarianceMode::Heteroscedastic => (0..s).map(|c| (ss[c] / sums[c]).max(floor)).collect(),
        VarianceMode::Common => {
            let pooled = (ss.iter().sum::<f64>() / sums.iter().sum::<f64>()).max(floor);
            vec![pooled; s]
        }
    };
    Ok(ExternalParams { mu, sigma2 })
}

/// Newton settings for the measurement step.
#[derive(Debug, Clone, Copy)]
pub struct NewtonSettings {
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for NewtonSettings {
    fn default() -> Self {
        NewtonSettings {
            max_iterations: 25,
            tolerance: 1e-8,
        }
    }
}

/// Counts of problems met while fitting the measurement model.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MeasurementReport {
    /// Newton solves that stopped before the score tolerance was met.
    pub nonconverged: usize,
    /// Coefficients clamped at the quasi-separation limit.
    pub clamped: usize,
    /// Solves whose information matrix was numerically singular, e.g. slopes
    /// of a covariate without variation.
    pub singular: usize,
}

impl MeasurementReport {
    fn record(&mut self, outcome: LogitOutcome) {
        self.nonconverged += usize::from(!outcome.converged && !outcome.clamped);
        self.clamped += usize::from(outcome.clamped);
        self.singular += usize::from(outcome.singular);
    }

    pub(crate) fn merge(&mut self, other: MeasurementReport) {
        self.nonconverged += other.nonconverged;
        self.clamped += other.clamped;
        self.singular += other.singular;
    }

    pub fn is_clean(&self) -> bool {
        *self == MeasurementReport::default()
    }
}

/// Measurement-model M-step.
///
/// Items whose slopes are constrained to zero get the closed-form
/// weighted-frequency logits. Other items are fitted by weighted Newton,
/// starting from `warm_start` when given (otherwise from the closed form
/// with zero slopes).
pub fn m_step_measurement(
    posteriors: &Posteriors,
    spec: &ModelSpec,
    data: &Dataset,
    warm_start: Option<&[ItemParams]>,
    newton: NewtonSettings,
) -> Result<(Vec<ItemParams>, MeasurementReport)> {
    spec.check_data(data)?;
    let s = spec.n_classes();
    if posteriors.n_classes() != s || posteriors.n() != data.n() {
        return Err(Error::invalid("posterior matrix does not match spec and data"));
    }
    let columns: Vec<Vec<f64>> = (0..s)
        .map(|c| posteriors.rows().map(|r| r[c]).collect())
        .collect();
    let mut report = MeasurementReport::default();
    let mut items = Vec::with_capacity(spec.n_items());
    let mut responses = vec![0u32; data.n()];

    for j in 0..spec.n_items() {
        let k = spec.cardinalities()[j];
        for (i, r) in responses.iter_mut().enumerate() {
            *r = data.code(i, j) as u32;
        }
        let (closed, clamped) = closed_form_item(&columns, &responses, k);
        report.clamped += clamped;
        let constraint = spec.slope(j);
        if constraint == SlopeConstraint::Zero {
            items.push(closed);
            continue;
        }
        let start = warm_start.map(|w| &w[j]).unwrap_or(&closed);
        let mut item = start.clone();
        match constraint {
            SlopeConstraint::Free => {
                for c in 0..s {
                    let problem = LogitProblem {
                        n_categories: k,
                        responses: &responses,
                        z: data.z(),
                        group_weights: vec![&columns[c]],
                        shared_slope: false,
                    };
                    let mut x = vec![0.0; problem.dim()];
                    for cat in 1..k {
                        x[problem.intercept_index(0, cat)] = start.intercept(c, cat);
                        x[problem.slope_index(0, cat)] = start.slope(c, cat);
                    }
                    report.record(problem.solve(&mut x, newton.max_iterations, newton.tolerance));
                    for cat in 1..k {
                        item.set_intercept(c, cat, x[problem.intercept_index(0, cat)]);
                        item.set_slope(c, cat, x[problem.slope_index(0, cat)]);
                    }
                }
            }
            SlopeConstraint::Equal => {
                let problem = LogitProblem {
                    n_categories: k,
                    responses: &responses,
                    z: data.z(),
                    group_weights: columns.iter().map(|c| c.as_slice()).collect(),
                    shared_slope: true,
                };
                let mut x = vec![0.0; problem.dim()];
                for c in 0..s {
                    for cat in 1..k {
                        x[problem.intercept_index(c, cat)] = start.intercept(c, cat);
                        x[problem.slope_index(c, cat)] = start.slope(0, cat);
                    }
                }
                report.record(problem.solve(&mut x, newton.max_iterations, newton.tolerance));
                for c in 0..s {
                    for cat in 1..k {
                        item.set_intercept(c, cat, x[problem.intercept_index(c, cat)]);
                        item.set_slope(c, cat, x[problem.slope_index(c, cat)]);
                    }
                }
            }
            SlopeConstraint::Zero => unreachable!(),
        }
        items.push(item);
    }
    Ok((items, report))
}

/// Baseline-category logits of the weighted category frequencies, slopes 0.
/// Returns the item and the number of clamped coefficients.
pub(crate) fn closed_form_item(columns: &[Vec<f64>], responses: &[u32], k: usize) -> (ItemParams, usize) {
    let s = columns.len();
    let mut item = ItemParams::zeros(s, k);
    let mut clamped = 0;
    let mut counts = vec![0.0; k];
    for (c, weights) in columns.iter().enumerate() {
        counts.iter_mut().for_each(|v| *v = 0.0);
        for (&w, &y) in weights.iter().zip(responses) {
            counts[y as usize] += w;
        }
        if counts.iter().all(|&v| !(v > 0.0)) {
            continue;
        }
        let log_counts: Vec<f64> = counts
            .iter()
            .map(|&v| if v > 0.0 { math::ln(v) } else { f64::NEG_INFINITY })
            .collect();
        let top = log_counts[1..].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        // When the largest logit would leave the box, shift every logit by
        // the same amount so the ratios among categories 1..K survive.
        let base = if top - log_counts[0] > COEF_LIMIT {
            clamped += 1;
            top - COEF_LIMIT
        } else {
            log_counts[0]
        };
        for cat in 1..k {
            let mut logit = log_counts[cat] - base;
            if logit < -COEF_LIMIT {
                logit = -COEF_LIMIT;
                clamped += 1;
            }
            item.set_intercept(c, cat, logit);
        }
    }
    (item, clamped)
}
