//! Model specification and free-parameter counting.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::data::Dataset;
use crate::error::{Error, Result};

/// How the external variable enters the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Variant {
    /// Latent class regression: `z` is a covariate of the indicators only.
    LcReg,
    /// Latent class with distal outcome: `z` is class-conditionally Gaussian.
    LcDist,
    /// Cluster-weighted: Gaussian `z` that also has direct effects.
    LcCw,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::LcReg, Variant::LcDist, Variant::LcCw];

    /// Whether the class-conditional density of `z` is part of the model.
    pub fn models_external(self) -> bool {
        !matches!(self, Variant::LcReg)
    }

    /// Whether indicator logits may depend on `z`.
    pub fn has_direct_effects(self) -> bool {
        !matches!(self, Variant::LcDist)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::LcReg => "lcreg",
            Variant::LcDist => "lcdist",
            Variant::LcCw => "lccw",
        }
    }

    /// Display name used in report tables.
    pub fn label(self) -> &'static str {
        match self {
            Variant::LcReg => "LCreg",
            Variant::LcDist => "LCdist",
            Variant::LcCw => "LCcw",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lcreg" => Ok(Variant::LcReg),
            "lcdist" => Ok(Variant::LcDist),
            "lccw" => Ok(Variant::LcCw),
            other => Err(Error::invalid(format!("unknown model variant `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum VarianceMode {
    /// One variance per class.
    #[default]
    Heteroscedastic,
    /// A single variance shared by all classes.
    Common,
}

/// Constraint on an item's direct effects of `z`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum SlopeConstraint {
    #[default]
    Free,
    /// One slope per non-baseline category, shared by all classes.
    Equal,
    Zero,
}

impl FromStr for SlopeConstraint {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "free" => Ok(SlopeConstraint::Free),
            "equal" | "equal_across_classes" => Ok(SlopeConstraint::Equal),
            "zero" => Ok(SlopeConstraint::Zero),
            other => Err(Error::invalid(format!("unknown slope constraint `{other}`"))),
        }
    }
}

/// Everything needed to define the likelihood, apart from the data.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ModelSpec {
    variant: Variant,
    n_classes: usize,
    cardinalities: Vec<usize>,
    variance_mode: VarianceMode,
    slopes: Vec<SlopeConstraint>,
}

impl ModelSpec {
    /// Free slopes on every item (all zero for [`Variant::LcDist`]) and
    /// heteroscedastic variances.
    pub fn new(variant: Variant, n_classes: usize, cardinalities: Vec<usize>) -> Result<Self> {
        let n_items = cardinalities.len();
        Self::with_constraints(
            variant,
            n_classes,
            cardinalities,
            VarianceMode::Heteroscedastic,
            vec![SlopeConstraint::Free; n_items],
        )
    }

    /// Spec matching the shape of `data`.
    pub fn for_data(variant: Variant, n_classes: usize, data: &Dataset) -> Result<Self> {
        Self::new(variant, n_classes, data.cardinalities().to_vec())
    }

    /// Fully general constructor. Slopes are forced to zero for
    /// [`Variant::LcDist`].
    pub fn with_constraints(
        variant: Variant,
        n_classes: usize,
        cardinalities: Vec<usize>,
        variance_mode: VarianceMode,
        slopes: Vec<SlopeConstraint>,
    ) -> Result<Self> {
        if n_classes == 0 {
            return Err(Error::invalid("number of classes must be at least 1"));
        }
        if cardinalities.is_empty() {
            return Err(Error::invalid("at least one indicator is required"));
        }
        if let Some(j) = cardinalities.iter().position(|&k| k < 2) {
            return Err(Error::invalid(format!("item {j} has fewer than two categories")));
        }
        if slopes.len() != cardinalities.len() {
            return Err(Error::invalid(format!(
                "{} slope constraints for {} items",
                slopes.len(),
                cardinalities.len()
            )));
        }
        let slopes = if variant.has_direct_effects() {
            slopes
        } else {
            vec![SlopeConstraint::Zero; cardinalities.len()]
        };
        Ok(ModelSpec {
            variant,
            n_classes,
            cardinalities,
            variance_mode,
            slopes,
        })
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn n_items(&self) -> usize {
        self.cardinalities.len()
    }

    pub fn cardinalities(&self) -> &[usize] {
        &self.cardinalities
    }

    pub fn variance_mode(&self) -> VarianceMode {
        self.variance_mode
    }

    pub fn slopes(&self) -> &[SlopeConstraint] {
        &self.slopes
    }

    pub fn slope(&self, item: usize) -> SlopeConstraint {
        self.slopes[item]
    }

    /// Same spec with a different number of classes.
    pub fn with_classes(&self, n_classes: usize) -> Result<Self> {
        Self::with_constraints(
            self.variant,
            n_classes,
            self.cardinalities.clone(),
            self.variance_mode,
            self.slopes.clone(),
        )
    }

    /// Number of variance parameters (0 when `z` is not modelled).
    pub fn n_variances(&self) -> usize {
        match (self.variant.models_external(), self.variance_mode) {
            (false, _) => 0,
            (true, VarianceMode::Heteroscedastic) => self.n_classes,
            (true, VarianceMode::Common) => 1,
        }
    }

    /// Number of free slope parameters of one item.
    pub fn n_item_slopes(&self, item: usize) -> usize {
        let k = self.cardinalities[item] - 1;
        match self.slopes[item] {
            SlopeConstraint::Free => k * self.n_classes,
            SlopeConstraint::Equal => k,
            SlopeConstraint::Zero => 0,
        }
    }

    /// Count of free parameters: `S - 1` mixing logits, `S` means and the
    /// variances when `z` is modelled, `(K_j - 1)` intercepts per item and
    /// class, and the unconstrained slopes.
    pub fn n_free_params(&self) -> usize {
        let s = self.n_classes;
        let means = if self.variant.models_external() { s } else { 0 };
        let measurement: usize = (0..self.n_items())
            .map(|j| (self.cardinalities[j] - 1) * s + self.n_item_slopes(j))
            .sum();
        (s - 1) + means + self.n_variances() + measurement
    }

    /// Checks that `data` has the indicator layout this spec expects.
    pub fn check_data(&self, data: &Dataset) -> Result<()> {
        if data.cardinalities() != self.cardinalities.as_slice() {
            return Err(Error::invalid(format!(
                "data cardinalities {:?} do not match spec {:?}",
                data.cardinalities(),
                self.cardinalities
            )));
        }
        Ok(())
    }
}

/// Free-parameter count for a model with `n_items` dichotomous indicators.
pub fn n_free_params(variant: Variant, n_items: usize, n_classes: usize) -> usize {
    ModelSpec::new(variant, n_classes, vec![2; n_items])
        .map(|s| s.n_free_params())
        .unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dichotomous_counts_follow_closed_forms() {
        for j in 1..8 {
            for s in 1..6 {
                assert_eq!(n_free_params(Variant::LcReg, j, s), 2 * j * s + s - 1);
                assert_eq!(n_free_params(Variant::LcDist, j, s), j * s + 2 * s + s - 1);
                assert_eq!(n_free_params(Variant::LcCw, j, s), 2 * j * s + 2 * s + s - 1);
            }
        }
    }

    #[test]
    fn population_study_counts() {
        assert_eq!(n_free_params(Variant::LcReg, 6, 2), 25);
        assert_eq!(n_free_params(Variant::LcDist, 6, 2), 17);
        assert_eq!(n_free_params(Variant::LcCw, 6, 2), 29);
    }

    #[test]
    fn constraints_reduce_count() {
        let card = vec![3, 2, 2];
        let s = 2;
        let free = ModelSpec::new(Variant::LcCw, s, card.clone()).unwrap();
        // 1 + 2 + 2 + intercepts (2+1+1)*2 + slopes (2+1+1)*2
        assert_eq!(free.n_free_params(), 1 + 2 + 2 + 8 + 8);
        let constrained = ModelSpec::with_constraints(
            Variant::LcCw,
            s,
            card,
            VarianceMode::Common,
            vec![SlopeConstraint::Equal, SlopeConstraint::Zero, SlopeConstraint::Free],
        )
        .unwrap();
        assert_eq!(constrained.n_free_params(), 1 + 2 + 1 + 8 + 2 + 0 + 2);
    }

    #[test]
    fn lcdist_forces_zero_slopes_and_lcreg_has_no_variances() {
        let d = ModelSpec::new(Variant::LcDist, 3, vec![2, 2]).unwrap();
        assert!(d.slopes().iter().all(|&c| c == SlopeConstraint::Zero));
        let r = ModelSpec::with_constraints(
            Variant::LcReg,
            3,
            vec![2, 2],
            VarianceMode::Common,
            vec![SlopeConstraint::Free; 2],
        )
        .unwrap();
        assert_eq!(r.n_variances(), 0);
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(ModelSpec::new(Variant::LcCw, 0, vec![2]).is_err());
        assert!(ModelSpec::new(Variant::LcCw, 2, vec![]).is_err());
        assert!(ModelSpec::new(Variant::LcCw, 2, vec![1]).is_err());
    }
}
