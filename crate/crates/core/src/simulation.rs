//! Seeded data generators for two-class population studies and the
//! calibration of class separation.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::Dataset;
use crate::diagnostics::Partition;
use crate::error::{Error, Result};
use crate::estimation::{fit, FitConfig};
use crate::math;
use crate::params::{ExternalParams, Parameters};
use crate::spec::{ModelSpec, Variant};

/// Distribution of the external variable.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum ExternalDesign {
    /// `z ~ N(0, 1)` independently of class.
    StandardNormal,
    /// `z | class s ~ N(means[s], variance)`.
    ClassNormal { means: Vec<f64>, variance: f64 },
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StudyDesign {
    pub generator: Variant,
    pub n: usize,
    pub n_items: usize,
    /// Class proportions; their length is the number of classes.
    pub mix: Vec<f64>,
    pub external: ExternalDesign,
    /// Direct effect of `z` per class, identical for every item. Ignored for
    /// [`Variant::LcDist`].
    pub slopes: Vec<f64>,
    /// Intercepts run linearly from `+b` in the first class to `-b` in the
    /// last, identical for every item.
    pub intercept_magnitude: f64,
}

impl StudyDesign {
    /// The two-class, six-item design: proportions (0.7, 0.3), slopes
    /// (-0.5, 1) and `z` either standard normal (LCreg) or a class mixture
    /// with means (-1, 1) and unit variance.
    pub fn population(generator: Variant, n: usize, intercept_magnitude: f64) -> Self {
        let external = match generator {
            Variant::LcReg => ExternalDesign::StandardNormal,
            Variant::LcDist | Variant::LcCw => ExternalDesign::ClassNormal {
                means: vec![-1.0, 1.0],
                variance: 1.0,
            },
        };
        StudyDesign {
            generator,
            n,
            n_items: 6,
            mix: vec![0.7, 0.3],
            external,
            slopes: vec![-0.5, 1.0],
            intercept_magnitude,
        }
    }

    pub fn n_classes(&self) -> usize {
        self.mix.len()
    }

    pub fn validate(&self) -> Result<()> {
        let s = self.n_classes();
        if self.n == 0 || self.n_items == 0 || s == 0 {
            return Err(Error::invalid("design needs n >= 1, at least one item and one class"));
        }
        if self.mix.iter().any(|&p| !(p > 0.0)) || (self.mix.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::invalid("class proportions must be positive and sum to 1"));
        }
        if self.slopes.len() != s {
            return Err(Error::invalid("one slope per class is required"));
        }
        if let ExternalDesign::ClassNormal { means, variance } = &self.external {
            if means.len() != s || !(*variance > 0.0) {
                return Err(Error::invalid("class-normal design needs one mean per class and variance > 0"));
            }
        }
        if !self.intercept_magnitude.is_finite() {
            return Err(Error::invalid("intercept magnitude must be finite"));
        }
        Ok(())
    }

    /// Spec of the generating model.
    pub fn spec(&self) -> Result<ModelSpec> {
        ModelSpec::new(self.generator, self.n_classes(), vec![2; self.n_items])
    }

    fn intercept(&self, class: usize) -> f64 {
        let s = self.n_classes();
        if s == 1 {
            return self.intercept_magnitude;
        }
        self.intercept_magnitude * (1.0 - 2.0 * class as f64 / (s - 1) as f64)
    }

    fn slope(&self, class: usize) -> f64 {
        if self.generator.has_direct_effects() {
            self.slopes[class]
        } else {
            0.0
        }
    }

    /// Population parameters in the generating model's parameterisation.
    pub fn true_params(&self) -> Result<Parameters> {
        let spec = self.spec()?;
        let mut params = Parameters::zeros(&spec);
        params.set_class_proportions(&self.mix);
        if let Some(ext) = params.external.as_mut() {
            *ext = match &self.external {
                ExternalDesign::ClassNormal { means, variance } => ExternalParams {
                    mu: means.clone(),
                    sigma2: vec![*variance; self.n_classes()],
                },
                ExternalDesign::StandardNormal => ExternalParams {
                    mu: vec![0.0; self.n_classes()],
                    sigma2: vec![1.0; self.n_classes()],
                },
            };
        }
        for item in params.items.iter_mut() {
            for c in 0..self.n_classes() {
                item.set_intercept(c, 1, self.intercept(c));
                item.set_slope(c, 1, self.slope(c));
            }
        }
        Ok(params)
    }
}

/// A generated dataset with its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Simulated {
    pub data: Dataset,
    pub truth: Partition,
    pub params: Parameters,
}

/// Draws a dataset from `design`. Identical seeds give identical data.
pub fn generate(design: &StudyDesign, seed: u64) -> Result<Simulated> {
    design.validate()?;
    let params = design.true_params()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = design.n_classes();
    let mut labels = Vec::with_capacity(design.n);
    let mut rows = Vec::with_capacity(design.n);
    let mut z = Vec::with_capacity(design.n);
    for _ in 0..design.n {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut class = s - 1;
        for (c, &p) in design.mix.iter().enumerate() {
            acc += p;
            if u < acc {
                class = c;
                break;
            }
        }
        let e: f64 = StandardNormal.sample(&mut rng);
        let zi = match &design.external {
            ExternalDesign::StandardNormal => e,
            ExternalDesign::ClassNormal { means, variance } => means[class] + math::sqrt(*variance) * e,
        };
        let row: Vec<u32> = (0..design.n_items)
            .map(|_| {
                let eta = design.intercept(class) + zi * design.slope(class);
                let p = 1.0 / (1.0 + math::exp(-eta));
                u32::from(rng.random::<f64>() < p)
            })
            .collect();
        labels.push(class);
        rows.push(row);
        z.push(zi);
    }
    let data = Dataset::new(rows, vec![2; design.n_items], z, Vec::new())?;
    Ok(Simulated {
        data,
        truth: Partition::new(labels),
        params,
    })
}

#[derive(Debug, Clone)]
pub struct CalibrationOptions {
    /// Sample size of each calibration dataset.
    pub n: usize,
    /// Accepted distance between achieved and target R².
    pub tolerance: f64,
    pub bracket: (f64, f64),
    pub max_steps: usize,
    pub fit: FitConfig,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        CalibrationOptions {
            n: 20_000,
            tolerance: 0.02,
            bracket: (0.1, 5.0),
            max_steps: 30,
            fit: FitConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Calibration {
    pub intercept_magnitude: f64,
    pub achieved_r2: f64,
    /// Every `(b, R²)` pair evaluated, in order.
    pub evaluations: Vec<(f64, f64)>,
}

/// Entropy R² of the correctly specified model fitted to data generated
/// with intercept magnitude `b`.
pub fn separation_r2(design: &StudyDesign, b: f64, n: usize, seed: u64, config: &FitConfig) -> Result<f64> {
    let mut d = design.clone();
    d.intercept_magnitude = b;
    d.n = n;
    let sim = generate(&d, seed)?;
    let spec = d.spec()?;
    let fitted = fit(&spec, &sim.data, config)?;
    Ok(fitted.entropy_r2())
}

/// Bisection on the intercept magnitude until the correctly specified fit
/// reaches `target_r2` within the tolerance. Every candidate uses the same
/// seed.
pub fn calibrate_separation(
    design: &StudyDesign,
    target_r2: f64,
    seed: u64,
    options: &CalibrationOptions,
) -> Result<Calibration> {
    if !(target_r2 > 0.0 && target_r2 < 1.0) {
        return Err(Error::invalid("target R² must lie in (0, 1)"));
    }
    design.validate()?;
    let mut evaluations = Vec::new();
    let eval = |b: f64, evals: &mut Vec<(f64, f64)>| -> Result<f64> {
        let r2 = separation_r2(design, b, options.n, seed, &options.fit)?;
        evals.push((b, r2));
        Ok(r2)
    };
    let (mut lo, mut hi) = options.bracket;
    let r_lo = eval(lo, &mut evaluations)?;
    let r_hi = eval(hi, &mut evaluations)?;
    for &(b, r2) in &evaluations {
        if (r2 - target_r2).abs() < options.tolerance {
            return Ok(Calibration {
                intercept_magnitude: b,
                achieved_r2: r2,
                evaluations,
            });
        }
    }
    if !(r_lo < target_r2 && target_r2 < r_hi) {
        return Err(Error::CalibrationRange {
            target: target_r2,
            low: r_lo.min(r_hi),
            high: r_lo.max(r_hi),
        });
    }
    let mut best = evaluations[0];
    for _ in 0..options.max_steps {
        let mid = 0.5 * (lo + hi);
        let r2 = eval(mid, &mut evaluations)?;
        if (r2 - target_r2).abs() < (best.1 - target_r2).abs() {
            best = (mid, r2);
        }
        if (r2 - target_r2).abs() < options.tolerance {
            return Ok(Calibration {
                intercept_magnitude: mid,
                achieved_r2: r2,
                evaluations,
            });
        }
        if r2 < target_r2 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::CalibrationRange {
        target: target_r2,
        low: best.1,
        high: best.1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_data() {
        let d = StudyDesign::population(Variant::LcCw, 500, 1.0);
        assert_eq!(generate(&d, 9).unwrap(), generate(&d, 9).unwrap());
        assert_ne!(generate(&d, 9).unwrap().data, generate(&d, 10).unwrap().data);
    }

    #[test]
    fn no_separation_gives_fair_items() {
        let mut d = StudyDesign::population(Variant::LcCw, 40_000, 0.0);
        d.slopes = vec![0.0, 0.0];
        let sim = generate(&d, 1).unwrap();
        for j in 0..6 {
            let ones = (0..sim.data.n()).filter(|&i| sim.data.code(i, j) == 1).count();
            let share = ones as f64 / sim.data.n() as f64;
            assert!((share - 0.5).abs() < 0.01, "item {j}: {share}");
        }
    }

    #[test]
    fn distal_design_moments() {
        let d = StudyDesign::population(Variant::LcDist, 30_000, 1.0);
        let sim = generate(&d, 5).unwrap();
        let shares = sim.truth.shares();
        assert!((shares[0] - 0.7).abs() < 0.01);
        for c in 0..2 {
            let zs: Vec<f64> = (0..sim.data.n())
                .filter(|&i| sim.truth.labels[i] == c)
                .map(|i| sim.data.z()[i])
                .collect();
            let mean = zs.iter().sum::<f64>() / zs.len() as f64;
            let target = if c == 0 { -1.0 } else { 1.0 };
            assert!((mean - target).abs() < 0.03, "class {c}: {mean}");
        }
    }

    #[test]
    fn regression_design_z_is_standard_normal() {
        let d = StudyDesign::population(Variant::LcReg, 30_000, 1.0);
        let sim = generate(&d, 2).unwrap();
        assert!(sim.data.z_mean().abs() < 0.02);
        assert!((sim.data.z_variance() - 1.0).abs() < 0.03);
    }

    #[test]
    fn true_params_match_design() {
        let d = StudyDesign::population(Variant::LcCw, 10, 1.5);
        let p = d.true_params().unwrap();
        p.validate(&d.spec().unwrap()).unwrap();
        assert_eq!(p.items[0].intercept(0, 1), 1.5);
        assert_eq!(p.items[0].intercept(1, 1), -1.5);
        assert_eq!(p.items[3].slope(0, 1), -0.5);
        assert_eq!(p.items[3].slope(1, 1), 1.0);
        let dist = StudyDesign::population(Variant::LcDist, 10, 1.5).true_params().unwrap();
        assert_eq!(dist.items[0].slope(1, 1), 0.0);
        assert!(StudyDesign::population(Variant::LcReg, 10, 1.5).true_params().unwrap().external.is_none());
    }

    #[test]
    fn invalid_designs() {
        let mut d = StudyDesign::population(Variant::LcCw, 10, 1.0);
        d.mix = vec![0.7, 0.2];
        assert!(generate(&d, 0).is_err());
        let mut d = StudyDesign::population(Variant::LcCw, 0, 1.0);
        assert!(generate(&d, 0).is_err());
        d.n = 10;
        d.slopes = vec![1.0];
        assert!(generate(&d, 0).is_err());
    }

    #[test]
    fn calibration_rejects_bad_target() {
        let d = StudyDesign::population(Variant::LcDist, 10, 1.0);
        assert!(calibrate_separation(&d, 1.5, 0, &CalibrationOptions::default()).is_err());
    }
}
