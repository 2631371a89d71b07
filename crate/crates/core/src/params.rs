//! Parameter containers.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;
use crate::spec::{ModelSpec, SlopeConstraint, VarianceMode};

/// Class-conditional Gaussian parameters of the external variable.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ExternalParams {
    pub mu: Vec<f64>,
    /// Strictly positive. All entries are equal under [`VarianceMode::Common`].
    pub sigma2: Vec<f64>,
}

/// Baseline-category logit coefficients of one indicator.
///
/// Both tables are `n_classes × n_categories`, row-major, with column 0 (the
/// reference category) fixed at zero.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ItemParams {
    n_categories: usize,
    intercepts: Vec<f64>,
    slopes: Vec<f64>,
}

impl ItemParams {
    pub fn zeros(n_classes: usize, n_categories: usize) -> Self {
        ItemParams {
            n_categories,
            intercepts: vec![0.0; n_classes * n_categories],
            slopes: vec![0.0; n_classes * n_categories],
        }
    }

    pub fn n_categories(&self) -> usize {
        self.n_categories
    }

    pub fn n_classes(&self) -> usize {
        self.intercepts.len() / self.n_categories
    }

    #[inline]
    pub fn intercept(&self, class: usize, category: usize) -> f64 {
        self.intercepts[class * self.n_categories + category]
    }

    #[inline]
    pub fn slope(&self, class: usize, category: usize) -> f64 {
        self.slopes[class * self.n_categories + category]
    }

    /// Intercepts of one class, including the zero baseline.
    #[inline]
    pub fn class_intercepts(&self, class: usize) -> &[f64] {
        &self.intercepts[class * self.n_categories..(class + 1) * self.n_categories]
    }

    #[inline]
    pub fn class_slopes(&self, class: usize) -> &[f64] {
        &self.slopes[class * self.n_categories..(class + 1) * self.n_categories]
    }

    /// Sets a non-baseline intercept. Writes to category 0 are ignored.
    pub fn set_intercept(&mut self, class: usize, category: usize, value: f64) {
        if category > 0 {
            self.intercepts[class * self.n_categories + category] = value;
        }
    }

    /// Sets a non-baseline slope. Writes to category 0 are ignored.
    pub fn set_slope(&mut self, class: usize, category: usize, value: f64) {
        if category > 0 {
            self.slopes[class * self.n_categories + category] = value;
        }
    }

    fn permute(&self, order: &[usize]) -> Self {
        let k = self.n_categories;
        let mut out = ItemParams::zeros(order.len(), k);
        for (new, &old) in order.iter().enumerate() {
            out.intercepts[new * k..(new + 1) * k].copy_from_slice(self.class_intercepts(old));
            out.slopes[new * k..(new + 1) * k].copy_from_slice(self.class_slopes(old));
        }
        out
    }
}

/// Full parameter set of a latent class model.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Parameters {
    /// Mixing logits relative to class 0; `theta[0] == 0`.
    pub theta: Vec<f64>,
    /// `None` for latent class regression.
    pub external: Option<ExternalParams>,
    pub items: Vec<ItemParams>,
}

impl Parameters {
    /// Uniform mixing, zero logits, standard normal `z` when modelled.
    pub fn zeros(spec: &ModelSpec) -> Self {
        let s = spec.n_classes();
        Parameters {
            theta: vec![0.0; s],
            external: spec.variant().models_external().then(|| ExternalParams {
                mu: vec![0.0; s],
                sigma2: vec![1.0; s],
            }),
            items: spec
                .cardinalities()
                .iter()
                .map(|&k| ItemParams::zeros(s, k))
                .collect(),
        }
    }

    pub fn n_classes(&self) -> usize {
        self.theta.len()
    }

    /// `ln P(X = s)` from the softmax of `theta`.
    pub fn log_class_priors(&self) -> Vec<f64> {
        let mut out = self.theta.clone();
        math::log_normalize(&mut out);
        out
    }

    pub fn class_proportions(&self) -> Vec<f64> {
        self.log_class_priors().into_iter().map(math::exp).collect()
    }

    /// Sets `theta` from class proportions, with class 0 as reference.
    pub fn set_class_proportions(&mut self, proportions: &[f64]) {
        let base = math::ln(proportions[0]);
        self.theta = proportions.iter().map(|&p| math::ln(p) - base).collect();
        self.theta[0] = 0.0;
    }

    /// Checks shape and the fixed-value invariants against `spec`.
    pub fn validate(&self, spec: &ModelSpec) -> Result<()> {
        let s = spec.n_classes();
        if self.theta.len() != s {
            return Err(Error::invalid(format!("theta has {} entries, expected {s}", self.theta.len())));
        }
        if self.theta[0] != 0.0 {
            return Err(Error::invalid("theta[0] must be exactly 0"));
        }
        if self.theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::invalid("theta must be finite"));
        }
        match (&self.external, spec.variant().models_external()) {
            (Some(ext), true) => {
                if ext.mu.len() != s || ext.sigma2.len() != s {
                    return Err(Error::invalid("external parameters have the wrong length"));
                }
                if ext.sigma2.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
                    return Err(Error::invalid("variances must be finite and strictly positive"));
                }
                if spec.variance_mode() == VarianceMode::Common
                    && ext.sigma2.iter().any(|&v| v != ext.sigma2[0])
                {
                    return Err(Error::invalid("common variance mode requires equal variances"));
                }
            }
            (None, false) => {}
            (Some(_), false) => {
                return Err(Error::invalid("latent class regression does not model z"))
            }
            (None, true) => return Err(Error::invalid("missing external-variable parameters")),
        }
        if self.items.len() != spec.n_items() {
            return Err(Error::invalid("wrong number of items"));
        }
        for (j, item) in self.items.iter().enumerate() {
            let k = spec.cardinalities()[j];
            if item.n_categories != k || item.n_classes() != s {
                return Err(Error::invalid(format!("item {j} has the wrong shape")));
            }
            for c in 0..s {
                if item.intercept(c, 0) != 0.0 || item.slope(c, 0) != 0.0 {
                    return Err(Error::invalid(format!("item {j}: baseline coefficients must be 0")));
                }
                if item.class_intercepts(c).iter().chain(item.class_slopes(c)).any(|v| !v.is_finite()) {
                    return Err(Error::invalid(format!("item {j}: coefficients must be finite")));
                }
            }
            match spec.slope(j) {
                SlopeConstraint::Free => {}
                SlopeConstraint::Zero => {
                    if item.slopes.iter().any(|&b| b != 0.0) {
                        return Err(Error::invalid(format!("item {j}: slopes constrained to zero")));
                    }
                }
                SlopeConstraint::Equal => {
                    for c in 1..s {
                        if item.class_slopes(c) != item.class_slopes(0) {
                            return Err(Error::invalid(format!(
                                "item {j}: slopes constrained equal across classes"
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Reorders classes so that new class `c` is old class `order[c]`.
    /// `theta` is re-referenced to the new first class.
    pub fn permute_classes(&self, order: &[usize]) -> Self {
        let theta_old: Vec<f64> = order.iter().map(|&o| self.theta[o]).collect();
        let base = theta_old[0];
        Parameters {
            theta: theta_old.iter().map(|t| t - base).collect(),
            external: self.external.as_ref().map(|e| ExternalParams {
                mu: order.iter().map(|&o| e.mu[o]).collect(),
                sigma2: order.iter().map(|&o| e.sigma2[o]).collect(),
            }),
            items: self.items.iter().map(|it| it.permute(order)).collect(),
        }
    }
}
