//! Maximum-likelihood fitting by EM with random multi-start.
//!
//! Every start draws a random responsibility matrix (a softmax of random
//! projections of the standardized data) and runs one M-step to obtain valid
//! parameters. All starts are iterated for
//! [`FitConfig::start_iterations`] EM steps; the best one (lowest start
//! index on ties) is then iterated to convergence.
//!
//! Chains alternate two EM steps with a squared extrapolation (SQUAREM). An
//! extrapolated point only survives if the EM step taken from it is at least
//! as good as the second plain step.

mod logit;
mod mstep;

use logit::COEF_LIMIT;

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::layout::{ParamKind, ParamLayout};
use crate::math;
use crate::model;
use crate::params::Parameters;
use crate::posterior::Posteriors;
use crate::spec::ModelSpec;

pub use mstep::{
    m_step_gaussian, m_step_measurement, m_step_mixing, variance_floor, MeasurementReport,
    NewtonSettings, VARIANCE_FLOOR,
};

/// Tolerated per-iteration log-likelihood decrease before a chain is
/// considered non-monotone.
pub const MONOTONE_SLACK: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FitConfig {
    pub n_starts: usize,
    /// EM iterations given to every start before the best one is continued.
    /// Values at or above `max_em_iterations` run every start to the end.
    pub start_iterations: usize,
    pub max_em_iterations: usize,
    /// Stop when `|Δℓ| / (1 + |ℓ|)` falls below this...
    pub em_tolerance: f64,
    /// ...and the largest absolute score over the free parameters (variances
    /// on the log scale) is below this. Coefficients held at the ±30 bound
    /// and variances held at the floor are exempt while their score points
    /// outward. After 25 consecutive iterations under `em_tolerance` the
    /// score test is waived. `f64::INFINITY` disables the check.
    pub gradient_tolerance: f64,
    pub max_newton_iterations: usize,
    /// Newton stops once the largest absolute score is below this.
    pub newton_tolerance: f64,
    pub rng_seed: u64,
    /// Squared extrapolation between EM steps. A jump is kept only when the
    /// EM step taken from it does not lower the log-likelihood, so the trace
    /// stays monotone and fixed points are unchanged.
    pub accelerate: bool,
    /// Run starts on the rayon pool (needs the `parallel` feature; ignored
    /// otherwise). Never changes the result.
    pub parallel_starts: bool,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            n_starts: 50,
            start_iterations: 50,
            max_em_iterations: 500,
            em_tolerance: 1e-8,
            gradient_tolerance: 1e-4,
            max_newton_iterations: 25,
            newton_tolerance: 1e-8,
            rng_seed: 0,
            accelerate: true,
            parallel_starts: false,
        }
    }
}

impl FitConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.rng_seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_starts == 0 || self.max_em_iterations == 0 || self.max_newton_iterations == 0 {
            return Err(Error::invalid("iteration and start counts must be at least 1"));
        }
        if !(self.em_tolerance > 0.0) || !(self.newton_tolerance > 0.0) || !(self.gradient_tolerance > 0.0) {
            return Err(Error::invalid("tolerances must be positive"));
        }
        Ok(())
    }

    fn newton(&self) -> NewtonSettings {
        NewtonSettings {
            max_iterations: self.max_newton_iterations,
            tolerance: self.newton_tolerance,
        }
    }
}

/// Standard errors and covariance on the natural parameter scale, aligned
/// with [`crate::layout::ParamLayout`].
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Covariance {
    /// Row-major `P × P`.
    pub matrix: Vec<f64>,
    pub dim: usize,
    /// The information matrix was not positive definite and a pseudo-inverse
    /// was used.
    pub pseudo_inverse: bool,
}

impl Covariance {
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix[i * self.dim + j]
    }

    pub fn standard_errors(&self) -> Vec<f64> {
        (0..self.dim).map(|i| crate::math::sqrt(self.get(i, i).max(0.0))).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FitResult {
    pub spec: ModelSpec,
    pub params: Parameters,
    pub loglik: f64,
    pub posteriors: Posteriors,
    pub n_params: usize,
    pub n_obs: usize,
    pub converged: bool,
    pub n_iterations: usize,
    /// Index of the winning random start.
    pub start_index: usize,
    /// Log-likelihood after every EM iteration of the winning chain.
    pub trace: Vec<f64>,
    pub measurement: MeasurementReport,
    /// Starts that failed, with the reason.
    pub failed_starts: Vec<(usize, String)>,
    /// Fewer observations than free parameters.
    pub small_sample: bool,
    pub se: Option<Vec<f64>>,
    pub covariance: Option<Covariance>,
}

impl FitResult {
    pub fn class_proportions(&self) -> Vec<f64> {
        self.params.class_proportions()
    }

    pub fn bic(&self) -> f64 {
        crate::diagnostics::bic(self.loglik, self.n_params, self.n_obs)
    }

    pub fn entropy_r2(&self) -> f64 {
        crate::diagnostics::entropy_r2(&self.posteriors, &self.class_proportions())
    }

    pub fn classification_error(&self) -> f64 {
        crate::diagnostics::classification_error(&self.posteriors)
    }

    pub fn modal_partition(&self) -> crate::diagnostics::Partition {
        crate::diagnostics::modal_assignment(&self.posteriors)
    }

    /// Largest single-iteration decrease of the log-likelihood (0 when the
    /// trace is monotone).
    pub fn max_decrease(&self) -> f64 {
        self.trace
            .windows(2)
            .map(|w| w[0] - w[1])
            .fold(0.0, f64::max)
    }
}

/// Random starting values: responsibilities from a random projection of the
/// data, followed by one M-step with all slopes at zero.
///
/// Each class gets a Gaussian weight vector over the standardized features
/// (centered category dummies and `z`) and a random sharpness; a row's
/// responsibilities are the softmax of its projected scores. Different starts
/// therefore split the sample along different directions.
pub fn initialize<R: Rng + ?Sized>(spec: &ModelSpec, data: &Dataset, rng: &mut R) -> Result<Parameters> {
    spec.check_data(data)?;
    let s = spec.n_classes();
    let n = data.n();
    let mut values = Vec::with_capacity(n * s);
    if s == 1 {
        values.resize(n, 1.0);
    } else {
        let features = standardized_features(data);
        let n_features = features.len();
        let norm = 1.0 / math::sqrt(n_features as f64);
        let sharpness = rng.random_range(0.5..3.0);
        let weights: Vec<f64> = (0..s * n_features)
            .map(|_| StandardNormal.sample(rng))
            .collect::<Vec<f64>>();
        let mut row = vec![0.0; s];
        for i in 0..n {
            for (c, slot) in row.iter_mut().enumerate() {
                let w = &weights[c * n_features..(c + 1) * n_features];
                let score: f64 = features.iter().zip(w).map(|(f, w)| f[i] * w).sum();
                *slot = sharpness * norm * score;
            }
            math::log_normalize(&mut row);
            values.extend(row.iter().map(|&v| math::exp(v)));
        }
    }
    let responsibilities = Posteriors::from_raw(s, values);
    let mut params = Parameters::zeros(spec);
    params.theta = m_step_mixing(&responsibilities)?;
    if spec.variant().models_external() {
        params.external = Some(m_step_gaussian(&responsibilities, data.z(), spec.variance_mode())?);
    }
    let columns: Vec<Vec<f64>> = (0..s)
        .map(|c| responsibilities.rows().map(|r| r[c]).collect())
        .collect();
    for j in 0..spec.n_items() {
        let responses: Vec<u32> = (0..data.n()).map(|i| data.code(i, j) as u32).collect();
        params.items[j] = mstep::closed_form_item(&columns, &responses, spec.cardinalities()[j]).0;
    }
    Ok(params)
}

/// Columns of centered, unit-variance category dummies (categories 1..K) and
/// `z`. Constant columns are dropped.
fn standardized_features(data: &Dataset) -> Vec<Vec<f64>> {
    let n = data.n() as f64;
    let mut columns = Vec::new();
    let mut push = |col: Vec<f64>| {
        let mean = col.iter().sum::<f64>() / n;
        let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        if var > 0.0 {
            let sd = math::sqrt(var);
            columns.push(col.into_iter().map(|v| (v - mean) / sd).collect());
        }
    };
    for j in 0..data.n_items() {
        for k in 1..data.cardinalities()[j] {
            push((0..data.n()).map(|i| f64::from(u8::from(data.code(i, j) == k))).collect());
        }
    }
    push(data.z().to_vec());
    columns
}

/// Posteriors and log-likelihood at `params`.
pub fn e_step(params: &Parameters, spec: &ModelSpec, data: &Dataset) -> Result<(Posteriors, f64)> {
    model::evaluate(params, spec, data)
}

/// Full M-step: mixing, external-variable and measurement parameters.
pub fn m_step(
    posteriors: &Posteriors,
    spec: &ModelSpec,
    data: &Dataset,
    current: &Parameters,
    newton: NewtonSettings,
) -> Result<(Parameters, MeasurementReport)> {
    let theta = m_step_mixing(posteriors)?;
    let external = if spec.variant().models_external() {
        Some(m_step_gaussian(posteriors, data.z(), spec.variance_mode())?)
    } else {
        None
    };
    let (items, report) = m_step_measurement(posteriors, spec, data, Some(&current.items), newton)?;
    Ok((Parameters { theta, external, items }, report))
}

/// State of one EM chain.
#[derive(Debug, Clone)]
struct Chain {
    index: usize,
    params: Parameters,
    posteriors: Posteriors,
    loglik: f64,
    iterations: usize,
    converged: bool,
    /// Consecutive iterations whose relative change met the tolerance.
    quiet: usize,
    trace: Vec<f64>,
    report: MeasurementReport,
}

impl Chain {
    fn start(index: usize, params: Parameters, data: &Dataset) -> Result<Self> {
        let (posteriors, loglik) = model::evaluate_unchecked(&params, data)?;
        Ok(Chain {
            index,
            params,
            posteriors,
            loglik,
            iterations: 0,
            converged: false,
            quiet: 0,
            trace: alloc::vec![loglik],
            report: MeasurementReport::default(),
        })
    }

    /// Iterates until convergence or until `limit` total iterations.
    fn advance(&mut self, spec: &ModelSpec, data: &Dataset, config: &FitConfig, limit: usize) -> Result<()> {
        let layout = ParamLayout::new(spec);
        let min_share = 1.0 / (10.0 * data.n() as f64);
        while !self.converged && self.iterations < limit {
            let x0 = layout.pack(&self.params);
            let ll0 = self.loglik;
            self.em_step(&layout, spec, data, config, min_share)?;
            if !config.accelerate || self.converged || self.iterations >= limit {
                continue;
            }
            let x1 = layout.pack(&self.params);
            self.em_step(&layout, spec, data, config, min_share)?;
            if self.converged || self.iterations >= limit || self.loglik - ll0 <= 0.0 {
                continue;
            }
            let x2 = layout.pack(&self.params);
            let Some((jump, post)) = self.best_jump(&layout, data, min_share, &x0, &x1, &x2) else {
                continue;
            };
            let Ok((params, report)) = m_step(&post, spec, data, &jump, config.newton()) else {
                continue;
            };
            if params.class_proportions().iter().any(|&p| p < min_share) {
                continue;
            }
            let Ok((posteriors, loglik)) = model::evaluate_unchecked(&params, data) else {
                continue;
            };
            if loglik >= self.loglik {
                self.accept(&layout, data, config, params, posteriors, loglik, report);
            }
        }
        Ok(())
    }

    fn em_step(
        &mut self,
        layout: &ParamLayout,
        spec: &ModelSpec,
        data: &Dataset,
        config: &FitConfig,
        min_share: f64,
    ) -> Result<()> {
        let (params, report) = m_step(&self.posteriors, spec, data, &self.params, config.newton())?;
        if let Some(class) = params.class_proportions().iter().position(|&p| p < min_share) {
            return Err(Error::DegenerateClass { class });
        }
        let (posteriors, loglik) = model::evaluate_unchecked(&params, data)?;
        self.accept(layout, data, config, params, posteriors, loglik, report);
        Ok(())
    }

    #[allow(clippy::too_many_arguments)]
    fn accept(
        &mut self,
        layout: &ParamLayout,
        data: &Dataset,
        config: &FitConfig,
        params: Parameters,
        posteriors: Posteriors,
        loglik: f64,
        report: MeasurementReport,
    ) {
        self.report.merge(report);
        let change = (loglik - self.loglik).abs() / (1.0 + loglik.abs());
        self.params = params;
        self.posteriors = posteriors;
        self.loglik = loglik;
        self.iterations += 1;
        self.trace.push(loglik);
        self.quiet = if change < config.em_tolerance { self.quiet + 1 } else { 0 };
        self.converged = change < config.em_tolerance
            && (config.gradient_tolerance.is_infinite()
                || self.quiet >= STALL_ITERATIONS
                || max_free_score(layout, &self.params, &self.posteriors, data) < config.gradient_tolerance);
    }

    /// First extrapolated point that beats the current state, halving the
    /// step length towards `x2` after each failure.
    fn best_jump(
        &self,
        layout: &ParamLayout,
        data: &Dataset,
        min_share: f64,
        x0: &[f64],
        x1: &[f64],
        x2: &[f64],
    ) -> Option<(Parameters, Posteriors)> {
        let mut rr = 0.0;
        let mut vv = 0.0;
        for i in 0..x0.len() {
            let r = x1[i] - x0[i];
            let v = x2[i] - 2.0 * x1[i] + x0[i];
            rr += r * r;
            vv += v * v;
        }
        if !(vv > 0.0) {
            return None;
        }
        let mut alpha = -math::sqrt(rr / vv);
        for _ in 0..JUMP_TRIES {
            if alpha > -1.5 {
                return None;
            }
            if let Some(jump) = extrapolate(layout, data, alpha, x0, x1, x2) {
                if jump.class_proportions().iter().all(|&p| p >= min_share) {
                    if let Ok((post, ll)) = model::evaluate_unchecked(&jump, data) {
                        if ll >= self.loglik {
                            return Some((jump, post));
                        }
                    }
                }
            }
            alpha = (alpha - 1.0) / 2.0;
        }
        None
    }
}

const JUMP_TRIES: usize = 3;

/// A chain whose relative change stays below the tolerance this many
/// iterations in a row is converged even if the score test still fails
/// (flat ridges of overfitted models).
const STALL_ITERATIONS: usize = 25;

/// Squared-extrapolation point `x0 - 2αr + α²v` with `r = x1 - x0` and
/// `v = x2 - 2x1 + x0`. Coefficients are clamped to the box and variances to
/// the floor.
fn extrapolate(layout: &ParamLayout, data: &Dataset, alpha: f64, x0: &[f64], x1: &[f64], x2: &[f64]) -> Option<Parameters> {
    let log_floor = math::ln(variance_floor(data.z()));
    let jump: Vec<f64> = (0..x0.len())
        .map(|i| {
            let r = x1[i] - x0[i];
            let v = x2[i] - 2.0 * x1[i] + x0[i];
            let x = x0[i] - 2.0 * alpha * r + alpha * alpha * v;
            match layout.kinds()[i] {
                ParamKind::Intercept { .. } | ParamKind::Slope { .. } => x.clamp(-COEF_LIMIT, COEF_LIMIT),
                ParamKind::Variance { .. } => x.max(log_floor),
                _ => x,
            }
        })
        .collect();
    if jump.iter().any(|v| !v.is_finite()) {
        return None;
    }
    layout.unpack(&jump).ok()
}

/// Largest absolute score, skipping coefficients held at the bound and
/// variances held at the floor whose score points further outward.
fn max_free_score(layout: &ParamLayout, params: &Parameters, posteriors: &Posteriors, data: &Dataset) -> f64 {
    let score = layout.score_given(params, posteriors, data);
    let x = layout.pack(params);
    let log_floor = math::ln(variance_floor(data.z()));
    score
        .iter()
        .zip(&x)
        .zip(layout.kinds())
        .filter(|((g, v), kind)| match kind {
            ParamKind::Intercept { .. } | ParamKind::Slope { .. } => !(v.abs() >= COEF_LIMIT - 1e-9 && **g * **v > 0.0),
            ParamKind::Variance { .. } => !(**v <= log_floor + 1e-9 && **g < 0.0),
            _ => true,
        })
        .map(|((g, _), _)| g.abs())
        .fold(0.0, f64::max)
}

/// Runs a single EM chain from `start` for at most `config.max_em_iterations`
/// iterations. Classes are not reordered.
pub fn run_em(spec: &ModelSpec, data: &Dataset, config: &FitConfig, start: Parameters) -> Result<FitResult> {
    config.validate()?;
    spec.check_data(data)?;
    start.validate(spec)?;
    let mut chain = Chain::start(0, start, data)?;
    chain.advance(spec, data, config, config.max_em_iterations)?;
    Ok(finish(spec, data, chain, Vec::new(), false))
}

fn run_start(spec: &ModelSpec, data: &Dataset, config: &FitConfig, index: usize) -> Result<Chain> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    rng.set_stream(index as u64);
    let params = initialize(spec, data, &mut rng)?;
    let mut chain = Chain::start(index, params, data)?;
    let limit = config.start_iterations.min(config.max_em_iterations);
    chain.advance(spec, data, config, limit)?;
    Ok(chain)
}

/// Fits `spec` to `data` by multi-start EM and returns the best solution with
/// classes ordered by decreasing proportion.
pub fn fit(spec: &ModelSpec, data: &Dataset, config: &FitConfig) -> Result<FitResult> {
    config.validate()?;
    spec.check_data(data)?;

    let outcomes = map_starts(config, |i| run_start(spec, data, config, i));
    let mut failed = Vec::new();
    let mut candidates = Vec::new();
    for (i, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(chain) if chain.loglik.is_finite() => candidates.push(chain),
            Ok(_) => failed.push((i, String::from("non-finite log-likelihood"))),
            Err(e) => failed.push((i, e.to_string())),
        }
    }
    // Highest log-likelihood first; the stable sort keeps start order on ties.
    candidates.sort_by(|a, b| b.loglik.partial_cmp(&a.loglik).unwrap_or(core::cmp::Ordering::Equal));

    for mut chain in candidates {
        match chain.advance(spec, data, config, config.max_em_iterations) {
            Ok(()) => return Ok(finish(spec, data, chain, failed, true)),
            Err(e) => failed.push((chain.index, format!("during continuation: {e}"))),
        }
    }
    failed.sort_by_key(|(i, _)| *i);
    Err(Error::FitFailure { reasons: failed })
}

fn finish(
    spec: &ModelSpec,
    data: &Dataset,
    chain: Chain,
    failed_starts: Vec<(usize, String)>,
    canonical: bool,
) -> FitResult {
    let (params, posteriors) = if canonical {
        let order = canonical_order(&chain.params.class_proportions());
        (
            chain.params.permute_classes(&order),
            chain.posteriors.permute_classes(&order),
        )
    } else {
        (chain.params, chain.posteriors)
    };
    FitResult {
        spec: spec.clone(),
        params,
        loglik: chain.loglik,
        posteriors,
        n_params: spec.n_free_params(),
        n_obs: data.n(),
        converged: chain.converged,
        n_iterations: chain.iterations,
        start_index: chain.index,
        trace: chain.trace,
        measurement: chain.report,
        failed_starts,
        small_sample: data.n() <= spec.n_free_params(),
        se: None,
        covariance: None,
    }
}

/// Class order by decreasing proportion, ties by original index.
pub fn canonical_order(proportions: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..proportions.len()).collect();
    order.sort_by(|&a, &b| {
        proportions[b]
            .partial_cmp(&proportions[a])
            .unwrap_or(core::cmp::Ordering::Equal)
    });
    order
}

#[cfg(feature = "parallel")]
fn map_starts<T: Send>(config: &FitConfig, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    use rayon::prelude::*;
    if config.parallel_starts {
        (0..config.n_starts).into_par_iter().map(f).collect()
    } else {
        (0..config.n_starts).map(f).collect()
    }
}

#[cfg(not(feature = "parallel"))]
fn map_starts<T>(config: &FitConfig, f: impl Fn(usize) -> T) -> Vec<T> {
    (0..config.n_starts).map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spec::Variant;
    use alloc::vec;
    use approx::assert_abs_diff_eq;

    fn toy() -> Dataset {
        let rows: Vec<Vec<u32>> = (0..60)
            .map(|i| vec![(i % 2) as u32, ((i / 2) % 2) as u32, ((i * 5 / 3) % 2) as u32])
            .collect();
        let z: Vec<f64> = (0..60).map(|i| ((i as f64) * 0.77).sin() * 1.5 + (i % 2) as f64).collect();
        Dataset::new(rows, vec![2, 2, 2], z, vec![]).unwrap()
    }

    #[test]
    fn single_class_start_is_deterministic_moments() {
        let data = toy();
        let spec = ModelSpec::for_data(Variant::LcDist, 1, &data).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = initialize(&spec, &data, &mut rng).unwrap();
        assert_eq!(p.theta, vec![0.0]);
        let ext = p.external.unwrap();
        assert_abs_diff_eq!(ext.mu[0], data.z_mean(), epsilon = 1e-12);
        assert_abs_diff_eq!(ext.sigma2[0], data.z_variance(), epsilon = 1e-12);
        let freq = (0..data.n()).filter(|&i| data.code(i, 0) == 1).count() as f64 / data.n() as f64;
        assert_abs_diff_eq!(p.items[0].intercept(0, 1), (freq / (1.0 - freq)).ln(), epsilon = 1e-12);
    }

    #[test]
    fn constant_z_converges_at_the_variance_floor() {
        let rows: Vec<Vec<u32>> = (0..3).map(|i| vec![(i % 2) as u32]).collect();
        let data = Dataset::new(rows, vec![2], vec![1.0; 3], vec![]).unwrap();
        let spec = ModelSpec::for_data(Variant::LcDist, 1, &data).unwrap();
        let res = fit(&spec, &data, &FitConfig { n_starts: 1, ..FitConfig::default() }).unwrap();
        assert!(res.converged);
        assert!(res.n_iterations < 10, "{}", res.n_iterations);
    }

    #[test]
    fn seeds_control_starts() {
        let data = toy();
        let spec = ModelSpec::for_data(Variant::LcCw, 2, &data).unwrap();
        let a = initialize(&spec, &data, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        let b = initialize(&spec, &data, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        let c = initialize(&spec, &data, &mut ChaCha8Rng::seed_from_u64(12)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.items.iter().all(|it| it.class_slopes(0).iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn e_step_with_identical_classes_is_uniform() {
        let data = toy();
        let spec1 = ModelSpec::for_data(Variant::LcCw, 1, &data).unwrap();
        let spec3 = ModelSpec::for_data(Variant::LcCw, 3, &data).unwrap();
        let p1 = initialize(&spec1, &data, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let mut p3 = Parameters::zeros(&spec3);
        let e1 = p1.external.as_ref().unwrap();
        p3.external = Some(crate::params::ExternalParams {
            mu: vec![e1.mu[0]; 3],
            sigma2: vec![e1.sigma2[0]; 3],
        });
        for (j, it) in p3.items.iter_mut().enumerate() {
            for c in 0..3 {
                it.set_intercept(c, 1, p1.items[j].intercept(0, 1));
            }
        }
        let (post, ll3) = e_step(&p3, &spec3, &data).unwrap();
        let (_, ll1) = e_step(&p1, &spec1, &data).unwrap();
        assert_abs_diff_eq!(ll1, ll3, epsilon = 1e-9);
        for row in post.rows() {
            for v in row {
                assert_abs_diff_eq!(*v, 1.0 / 3.0, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn e_step_on_one_row() {
        let data = toy().select_rows(&[4]).unwrap();
        let spec = ModelSpec::for_data(Variant::LcCw, 2, &data).unwrap();
        let mut p = Parameters::zeros(&spec);
        p.theta[1] = 0.4;
        p.items[0].set_intercept(1, 1, 1.0);
        let (post, ll) = e_step(&p, &spec, &data).unwrap();
        assert_eq!(post, model::posteriors(&p, &spec, &data).unwrap());
        assert_eq!(ll, model::log_likelihood(&p, &spec, &data).unwrap());
        assert_eq!(post.n(), 1);
    }

    #[test]
    fn em_is_monotone_and_canonical() {
        let data = toy();
        for v in Variant::ALL {
            let spec = ModelSpec::for_data(v, 2, &data).unwrap();
            let cfg = FitConfig { n_starts: 4, ..FitConfig::default() };
            let res = fit(&spec, &data, &cfg).unwrap();
            assert!(res.max_decrease() <= MONOTONE_SLACK, "{v}: {}", res.max_decrease());
            let props = res.class_proportions();
            assert!(props[0] >= props[1]);
            assert_eq!(res.n_params, spec.n_free_params());
            for row in res.posteriors.rows() {
                assert_abs_diff_eq!(row.iter().sum::<f64>(), 1.0, epsilon = 1e-10);
            }
            let ll = model::log_likelihood(&res.params, &spec, &data).unwrap();
            assert_abs_diff_eq!(ll, res.loglik, epsilon = 1e-9);
        }
    }

    #[test]
    fn invalid_config_is_rejected() {
        let data = toy();
        let spec = ModelSpec::for_data(Variant::LcDist, 2, &data).unwrap();
        let cfg = FitConfig { n_starts: 0, ..FitConfig::default() };
        assert!(fit(&spec, &data, &cfg).is_err());
        let cfg = FitConfig { em_tolerance: 0.0, ..FitConfig::default() };
        assert!(fit(&spec, &data, &cfg).is_err());
    }

    #[test]
    fn vanishing_class_is_degenerate() {
        let data = toy();
        let spec = ModelSpec::for_data(Variant::LcDist, 2, &data).unwrap();
        let mut start = initialize(&spec, &data, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        start.theta[1] = -60.0;
        let err = run_em(&spec, &data, &FitConfig::default(), start).unwrap_err();
        assert_eq!(err, Error::DegenerateClass { class: 1 });
    }

}
