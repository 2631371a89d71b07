//! Weighted baseline-category logit regression on `(1, z)` solved by
//! Newton-Raphson with step halving.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::math;

/// Coefficients beyond this magnitude are treated as quasi-separated.
pub(crate) const COEF_LIMIT: f64 = 30.0;

/// One weighted logit problem over the observations of a single item.
///
/// Observations are grouped (one group per latent class). Each group has
/// its own intercepts; slopes are either per group or shared.
pub(crate) struct LogitProblem<'a> {
    pub n_categories: usize,
    pub responses: &'a [u32],
    pub z: &'a [f64],
    pub group_weights: Vec<&'a [f64]>,
    pub shared_slope: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub(crate) struct LogitOutcome {
    pub converged: bool,
    pub clamped: bool,
    pub singular: bool,
}

impl LogitProblem<'_> {
    fn n_groups(&self) -> usize {
        self.group_weights.len()
    }

    pub fn dim(&self) -> usize {
        let m = self.n_categories - 1;
        let g = self.n_groups();
        g * m + if self.shared_slope { m } else { g * m }
    }

    #[inline]
    pub fn intercept_index(&self, group: usize, category: usize) -> usize {
        group * (self.n_categories - 1) + category - 1
    }

    #[inline]
    pub fn slope_index(&self, group: usize, category: usize) -> usize {
        let m = self.n_categories - 1;
        let base = self.n_groups() * m;
        base + if self.shared_slope { 0 } else { group * m } + category - 1
    }

    /// Weighted log-likelihood, its gradient, and the negative Hessian.
    fn evaluate(&self, x: &[f64]) -> (f64, DVector<f64>, DMatrix<f64>) {
        let dim = self.dim();
        let k = self.n_categories;
        let mut obj = 0.0;
        let mut grad = DVector::zeros(dim);
        let mut info = DMatrix::zeros(dim, dim);
        let mut probs = vec![0.0; k];
        let mut idx = vec![0usize; 2 * (k - 1)];

        for (g, weights) in self.group_weights.iter().enumerate() {
            for cat in 1..k {
                idx[cat - 1] = self.intercept_index(g, cat);
                idx[k - 1 + cat - 1] = self.slope_index(g, cat);
            }
            if k == 2 {
                let (ia, ib) = (idx[0], idx[1]);
                let (mut h_aa, mut h_ab, mut h_bb) = (0.0, 0.0, 0.0);
                let (mut g_a, mut g_b) = (0.0, 0.0);
                for ((&w, &z), &y) in weights.iter().zip(self.z).zip(self.responses) {
                    if w == 0.0 {
                        continue;
                    }
                    let eta = x[ia] + z * x[ib];
                    let a = eta.abs();
                    let e = math::exp(-a);
                    let l = math::ln(1.0 + e);
                    let (p1, log_p) = match (eta >= 0.0, y == 1) {
                        (true, true) => (1.0 / (1.0 + e), -l),
                        (true, false) => (1.0 / (1.0 + e), -a - l),
                        (false, true) => (e / (1.0 + e), -a - l),
                        (false, false) => (e / (1.0 + e), -l),
                    };
                    obj += w * log_p;
                    let r = w * (f64::from(y) - p1);
                    g_a += r;
                    g_b += r * z;
                    let v = w * p1 * (1.0 - p1);
                    h_aa += v;
                    h_ab += v * z;
                    h_bb += v * z * z;
                }
                grad[ia] += g_a;
                grad[ib] += g_b;
                info[(ia, ia)] += h_aa;
                info[(ia, ib)] += h_ab;
                info[(ib, ia)] += h_ab;
                info[(ib, ib)] += h_bb;
                continue;
            }
            for ((&w, &z), &y) in weights.iter().zip(self.z).zip(self.responses) {
                if w == 0.0 {
                    continue;
                }
                let y = y as usize;
                let mut max = 0.0f64;
                probs[0] = 0.0;
                for cat in 1..k {
                    probs[cat] = x[idx[cat - 1]] + z * x[idx[k - 1 + cat - 1]];
                    max = max.max(probs[cat]);
                }
                let mut sum = 0.0;
                for p in probs.iter_mut() {
                    *p = math::exp(*p - max);
                    sum += *p;
                }
                for p in probs.iter_mut() {
                    *p /= sum;
                }
                obj += w * math::ln(probs[y]);
                let cov = [1.0, z];
                for a in 1..k {
                    let r = w * (f64::from(u8::from(y == a)) - probs[a]);
                    for (u, cu) in cov.iter().enumerate() {
                        grad[idx[u * (k - 1) + a - 1]] += r * cu;
                    }
                    for b in 1..k {
                        let v = w * probs[a] * (f64::from(u8::from(a == b)) - probs[b]);
                        for (u, cu) in cov.iter().enumerate() {
                            for (t, ct) in cov.iter().enumerate() {
                                info[(idx[u * (k - 1) + a - 1], idx[t * (k - 1) + b - 1])] +=
                                    v * cu * ct;
                            }
                        }
                    }
                }
            }
        }
        (obj, grad, info)
    }

    /// Weighted objective at `x`.
    #[cfg(test)]
    pub fn objective(&self, x: &[f64]) -> f64 {
        self.evaluate(x).0
    }

    /// Maximises the weighted log-likelihood from `x` in place. The returned
    /// iterate never has a lower objective than the starting point.
    pub fn solve(&self, x: &mut [f64], max_iterations: usize, tolerance: f64) -> LogitOutcome {
        let mut outcome = LogitOutcome::default();
        let (mut obj, mut grad, mut info) = self.evaluate(x);
        for _ in 0..max_iterations {
            if grad.amax() < tolerance {
                outcome.converged = true;
                break;
            }
            let step = match newton_direction(&info, &grad) {
                Some(d) => d,
                None => {
                    outcome.singular = true;
                    ridge_direction(&info, &grad)
                }
            };
            // Inside rounding noise the objective cannot confirm progress;
            // take the Newton step and stop.
            let gain = grad.dot(&step);
            if gain <= 1e-13 * (1.0 + obj.abs()) {
                for (a, d) in x.iter_mut().zip(step.iter()) {
                    *a = (*a + d).clamp(-COEF_LIMIT, COEF_LIMIT);
                }
                outcome.converged = true;
                break;
            }
            let mut t = 1.0;
            let mut accepted = None;
            for _ in 0..40 {
                let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, d)| a + t * d).collect();
                let evaluated = self.evaluate(&trial);
                if evaluated.0 >= obj {
                    accepted = Some((trial, evaluated));
                    break;
                }
                t *= 0.5;
            }
            let Some((mut trial, (mut new_obj, mut new_grad, mut new_info))) = accepted else {
                break;
            };
            if trial.iter().any(|v| v.abs() > COEF_LIMIT) {
                // Concavity keeps every point between `x` and an accepted
                // trial at least as good as `x`, so stop on the boundary.
                let frac = x
                    .iter()
                    .zip(&trial)
                    .filter(|(_, b)| b.abs() > COEF_LIMIT)
                    .map(|(a, b)| {
                        let edge = COEF_LIMIT.copysign(*b);
                        if (b - a).abs() > 0.0 { ((edge - a) / (b - a)).clamp(0.0, 1.0) } else { 0.0 }
                    })
                    .fold(1.0, f64::min);
                for (t, a) in trial.iter_mut().zip(x.iter()) {
                    *t = (a + frac * (*t - a)).clamp(-COEF_LIMIT, COEF_LIMIT);
                }
                (new_obj, new_grad, new_info) = self.evaluate(&trial);
                outcome.clamped = true;
            }
            let moved = trial
                .iter()
                .zip(x.iter())
                .map(|(a, b)| (a - b).abs() / (1.0 + b.abs()))
                .fold(0.0, f64::max);
            x.copy_from_slice(&trial);
            obj = new_obj;
            grad = new_grad;
            info = new_info;
            if outcome.clamped {
                break;
            }
            if moved < 1e-15 {
                outcome.converged = grad.amax() < tolerance;
                break;
            }
        }
        if !outcome.converged && !outcome.clamped && grad.amax() < tolerance {
            outcome.converged = true;
        }
        if !outcome.singular && !outcome.clamped && newton_direction(&info, &grad).is_none() {
            outcome.singular = true;
        }
        outcome
    }
}

fn newton_direction(info: &DMatrix<f64>, grad: &DVector<f64>) -> Option<DVector<f64>> {
    let scale = info.diagonal().amax();
    if !(scale > 0.0) {
        return None;
    }
    // Reject numerically singular information (e.g. a covariate with no
    // variation) rather than taking an enormous step.
    let min_diag = info.diagonal().min();
    if min_diag <= scale * 1e-12 {
        return None;
    }
    let chol = info.clone().cholesky()?;
    let l_diag = chol.l_dirty().diagonal();
    let ratio = l_diag.min() / l_diag.max();
    if ratio * ratio < 1e-13 {
        return None;
    }
    Some(chol.solve(grad))
}

fn ridge_direction(info: &DMatrix<f64>, grad: &DVector<f64>) -> DVector<f64> {
    let dim = info.nrows();
    let scale = info.diagonal().amax().max(1e-300);
    let mut ridge = 1e-8 * scale;
    loop {
        let mut m = info.clone();
        for i in 0..dim {
            m[(i, i)] += ridge;
        }
        if let Some(c) = m.cholesky() {
            return c.solve(grad);
        }
        ridge *= 10.0;
        if !ridge.is_finite() {
            return DVector::zeros(dim);
        }
    }
}
