//! Likelihood and posterior computations shared by all three variants.
//!
//! The joint density of one observation under class `s` is
//!
//! * LCcw: `φ(z; μ_s, σ²_s) · Π_j P(y_j | z, s)`
//! * LCdist: `φ(z; μ_s, σ²_s) · Π_j P(y_j | s)`
//! * LCreg: `Π_j P(y_j | z, s)` (the density of `z` is not modelled)
//!
//! and item responses follow a baseline-category logit with scores
//! `β₀_{jks} + z·β_{jks}`. Everything is evaluated in log space.

use alloc::vec;
use alloc::vec::Vec;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::math::{self, PI};
use crate::params::{ItemParams, Parameters};
use crate::posterior::Posteriors;
use crate::spec::ModelSpec;

/// Category probabilities of `item` in `class` at external value `z`.
pub fn item_response_prob(
    params: &Parameters,
    spec: &ModelSpec,
    item: usize,
    class: usize,
    z: f64,
) -> Result<Vec<f64>> {
    check_index("item", item, spec.n_items())?;
    check_index("class", class, spec.n_classes())?;
    let it = params.items.get(item).ok_or(Error::Index {
        what: "item",
        index: item,
        len: params.items.len(),
    })?;
    let mut scores = category_scores(it, class, z);
    math::log_normalize(&mut scores);
    Ok(scores.into_iter().map(math::exp).collect())
}

fn category_scores(item: &ItemParams, class: usize, z: f64) -> Vec<f64> {
    item.class_intercepts(class)
        .iter()
        .zip(item.class_slopes(class))
        .map(|(b0, b1)| b0 + z * b1)
        .collect()
}

/// `ln P(Y_j = category | z, class)`.
#[inline]
pub(crate) fn item_log_prob(item: &ItemParams, class: usize, category: usize, z: f64) -> f64 {
    let b0 = item.class_intercepts(class);
    let b1 = item.class_slopes(class);
    if b0.len() == 2 {
        let eta = b0[1] + z * b1[1];
        if category == 1 {
            -math::softplus(-eta)
        } else {
            -math::softplus(eta)
        }
    } else {
        let mut max = 0.0f64;
        for k in 1..b0.len() {
            max = max.max(b0[k] + z * b1[k]);
        }
        let mut sum = math::exp(-max);
        for k in 1..b0.len() {
            sum += math::exp(b0[k] + z * b1[k] - max);
        }
        b0[category] + z * b1[category] - max - math::ln(sum)
    }
}

/// Log density of `N(mu, sigma2)` at `z`.
pub fn gaussian_logpdf(z: f64, mu: f64, sigma2: f64) -> Result<f64> {
    if !(sigma2 > 0.0) {
        return Err(Error::Domain(alloc::format!("variance must be positive, got {sigma2}")));
    }
    Ok(gaussian_logpdf_unchecked(z, mu, sigma2))
}

#[inline]
pub(crate) fn gaussian_logpdf_unchecked(z: f64, mu: f64, sigma2: f64) -> f64 {
    let d = z - mu;
    -0.5 * math::ln(2.0 * PI * sigma2) - d * d / (2.0 * sigma2)
}

/// `ln` of the class-`class` joint density of observation `row`, excluding
/// the class prior.
pub fn log_component_density(
    params: &Parameters,
    spec: &ModelSpec,
    data: &Dataset,
    row: usize,
    class: usize,
) -> Result<f64> {
    check_index("row", row, data.n())?;
    check_index("class", class, spec.n_classes())?;
    spec.check_data(data)?;
    params.validate(spec)?;
    Ok(component_unchecked(params, data, row, class))
}

#[inline]
fn component_unchecked(params: &Parameters, data: &Dataset, row: usize, class: usize) -> f64 {
    let z = data.z()[row];
    let mut total = match &params.external {
        Some(ext) => gaussian_logpdf_unchecked(z, ext.mu[class], ext.sigma2[class]),
        None => 0.0,
    };
    for (item, &code) in params.items.iter().zip(data.row(row)) {
        total += item_log_prob(item, class, code as usize, z);
    }
    total
}

/// Per-evaluation cache: items whose slopes are all zero get a lookup table
/// `class * K + category` so rows skip the exp/ln work for them.
struct Kernel<'a> {
    params: &'a Parameters,
    log_priors: Vec<f64>,
    tables: Vec<Option<Vec<f64>>>,
    /// Per class `(mu, 1 / (2σ²), -ln(2πσ²) / 2)`.
    gauss: Option<Vec<(f64, f64, f64)>>,
}

impl<'a> Kernel<'a> {
    fn new(params: &'a Parameters) -> Self {
        let s = params.n_classes();
        let tables = params
            .items
            .iter()
            .map(|item| {
                let flat = (0..s).all(|c| item.class_slopes(c).iter().all(|&b| b == 0.0));
                flat.then(|| {
                    let k = item.n_categories();
                    let mut t = Vec::with_capacity(s * k);
                    for c in 0..s {
                        t.extend((0..k).map(|cat| item_log_prob(item, c, cat, 0.0)));
                    }
                    t
                })
            })
            .collect();
        let gauss = params.external.as_ref().map(|ext| {
            ext.mu
                .iter()
                .zip(&ext.sigma2)
                .map(|(&m, &v)| (m, 0.5 / v, -0.5 * math::ln(2.0 * PI * v)))
                .collect()
        });
        Kernel { params, log_priors: params.log_class_priors(), tables, gauss }
    }

    /// Fills `out[s] = ln P(X=s) + ln f_s(row)` and returns the row's log marginal.
    #[inline]
    fn row(&self, data: &Dataset, row: usize, out: &mut [f64]) -> f64 {
        let z = data.z()[row];
        let codes = data.row(row);
        for (c, slot) in out.iter_mut().enumerate() {
            let mut total = self.log_priors[c];
            if let Some(g) = &self.gauss {
                let (m, h, k) = g[c];
                total += k - (z - m) * (z - m) * h;
            }
            for ((item, table), &code) in self.params.items.iter().zip(&self.tables).zip(codes) {
                total += match table {
                    Some(t) => t[c * item.n_categories() + code as usize],
                    None => item_log_prob(item, c, code as usize, z),
                };
            }
            *slot = total;
        }
        math::log_sum_exp(out)
    }
}

/// Observed-data log-likelihood.
pub fn log_likelihood(params: &Parameters, spec: &ModelSpec, data: &Dataset) -> Result<f64> {
    spec.check_data(data)?;
    params.validate(spec)?;
    let kernel = Kernel::new(params);
    let s = spec.n_classes();
    let per_row = map_rows(data.n(), |i| {
        let mut buf = vec![0.0; s];
        kernel.row(data, i, &mut buf)
    });
    sum_finite(&per_row)
}

/// Posterior class membership probabilities.
pub fn posteriors(params: &Parameters, spec: &ModelSpec, data: &Dataset) -> Result<Posteriors> {
    evaluate(params, spec, data).map(|(p, _)| p)
}

/// Posteriors and log-likelihood from one pass over the data.
pub fn evaluate(params: &Parameters, spec: &ModelSpec, data: &Dataset) -> Result<(Posteriors, f64)> {
    spec.check_data(data)?;
    params.validate(spec)?;
    evaluate_unchecked(params, data)
}

pub(crate) fn evaluate_unchecked(params: &Parameters, data: &Dataset) -> Result<(Posteriors, f64)> {
    let s = params.n_classes();
    let kernel = Kernel::new(params);
    let rows = map_rows(data.n(), |i| {
        let mut buf = vec![0.0; s];
        let lse = kernel.row(data, i, &mut buf);
        for v in buf.iter_mut() {
            *v = math::exp(*v - lse);
        }
        (buf, lse)
    });
    let mut values = Vec::with_capacity(data.n() * s);
    let mut contributions = Vec::with_capacity(data.n());
    for (row, lse) in rows {
        values.extend_from_slice(&row);
        contributions.push(lse);
    }
    let ll = sum_finite(&contributions)?;
    Ok((Posteriors::from_raw(s, values), ll))
}

/// Sums in index order so the result never depends on how rows were mapped.
fn sum_finite(values: &[f64]) -> Result<f64> {
    let mut total = 0.0;
    for (row, v) in values.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFinite { row });
        }
        total += v;
    }
    Ok(total)
}

#[cfg(feature = "parallel")]
fn map_rows<T: Send>(n: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    use rayon::prelude::*;
    (0..n).into_par_iter().with_min_len(4096).map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_rows<T>(n: usize, f: impl Fn(usize) -> T) -> Vec<T> {
    (0..n).map(f).collect()
}

fn check_index(what: &'static str, index: usize, len: usize) -> Result<()> {
    if index < len {
        Ok(())
    } else {
        Err(Error::Index { what, index, len })
    }
}
