//! Observed-information standard errors and Wald tests.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::estimation::{Covariance, FitResult};
use crate::layout::ParamLayout;
use crate::params::Parameters;
use crate::spec::{ModelSpec, SlopeConstraint, VarianceMode};
use crate::special::chi_square_upper_tail;

/// Relative finite-difference step: `h = STEP · (1 + |x|)`.
pub const STEP: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct WaldResult {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
    pub description: String,
}

fn step_for(x: f64) -> f64 {
    STEP * (1.0 + x.abs())
}

/// Jacobian of a vector function by central differences, symmetrised.
/// Applied to a gradient this yields the Hessian.
pub fn central_jacobian_sym(g: impl Fn(&[f64]) -> Result<Vec<f64>>, x: &[f64]) -> Result<DMatrix<f64>> {
    let p = x.len();
    let mut h = DMatrix::zeros(p, p);
    let mut probe = x.to_vec();
    for i in 0..p {
        let hi = step_for(x[i]);
        probe[i] = x[i] + hi;
        let up = g(&probe)?;
        probe[i] = x[i] - hi;
        let dn = g(&probe)?;
        probe[i] = x[i];
        for r in 0..p {
            h[(r, i)] = (up[r] - dn[r]) / (2.0 * hi);
        }
    }
    Ok((&h + h.transpose()) * 0.5)
}

/// Negative Hessian of the log-likelihood over the free parameters, with
/// variances on the log scale.
///
/// Columns are central differences of the analytic score, so each costs two
/// score evaluations rather than `O(P)` likelihood evaluations.
pub fn observed_information(params: &Parameters, spec: &ModelSpec, data: &Dataset) -> Result<DMatrix<f64>> {
    let layout = ParamLayout::new(spec);
    let x = layout.pack(params);
    let hessian = central_jacobian_sym(
        |v| {
            let p = layout.unpack(v)?;
            layout.score(&p, data)
        },
        &x,
    )?;
    Ok(-hessian)
}

/// Inverse of a symmetric information matrix. Falls back to the
/// pseudo-inverse over its positive eigenvalues; the flag reports the
/// fallback.
pub fn invert_information(info: &DMatrix<f64>) -> (DMatrix<f64>, bool) {
    if let Some(chol) = info.clone().cholesky() {
        let inv = chol.inverse();
        if inv.iter().all(|v| v.is_finite()) {
            return (symmetrize(inv), false);
        }
    }
    let eig = info.clone().symmetric_eigen();
    let max = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let cutoff = max * 1e-10;
    let p = info.nrows();
    let mut inv = DMatrix::zeros(p, p);
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda > cutoff {
            let v = eig.eigenvectors.column(k);
            inv += (v * v.transpose()) / lambda;
        }
    }
    (symmetrize(inv), true)
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

/// Covariance of the natural-scale free parameters at `params`.
pub fn covariance(params: &Parameters, spec: &ModelSpec, data: &Dataset) -> Result<Covariance> {
    let info = observed_information(params, spec, data)?;
    let (packed_cov, pseudo_inverse) = invert_information(&info);
    let jac = ParamLayout::new(spec).natural_jacobian(params);
    let p = jac.len();
    let mut matrix = Vec::with_capacity(p * p);
    for i in 0..p {
        for j in 0..p {
            matrix.push(jac[i] * packed_cov[(i, j)] * jac[j]);
        }
    }
    Ok(Covariance {
        matrix,
        dim: p,
        pseudo_inverse,
    })
}

/// Computes the covariance for a fitted model and stores it with the SEs.
pub fn attach_standard_errors(fit: &mut FitResult, data: &Dataset) -> Result<()> {
    let cov = covariance(&fit.params, &fit.spec, data)?;
    fit.se = Some(cov.standard_errors());
    fit.covariance = Some(cov);
    Ok(())
}

/// Wald test of `R θ = r`.
///
/// `constraints` is `q × P`; `covariance` is the `P × P` covariance of
/// `estimate`.
pub fn wald_test(
    estimate: &[f64],
    covariance: &DMatrix<f64>,
    constraints: &DMatrix<f64>,
    r: &[f64],
    description: impl Into<String>,
) -> Result<WaldResult> {
    let p = estimate.len();
    let q = constraints.nrows();
    if q == 0 {
        return Err(Error::invalid("Wald test needs at least one constraint"));
    }
    if constraints.ncols() != p || covariance.nrows() != p || covariance.ncols() != p || r.len() != q {
        return Err(Error::invalid("Wald test dimensions do not agree"));
    }
    let theta = DVector::from_column_slice(estimate);
    let diff = constraints * theta - DVector::from_column_slice(r);
    let middle = constraints * covariance * constraints.transpose();
    let l = cholesky_named(&middle)?;
    // Solve L y = diff; W = |y|^2.
    let mut y = diff.clone();
    for i in 0..q {
        let mut v = y[i];
        for k in 0..i {
            v -= l[(i, k)] * y[k];
        }
        y[i] = v / l[(i, i)];
    }
    let statistic = y.norm_squared();
    Ok(WaldResult {
        statistic,
        df: q,
        p_value: chi_square_upper_tail(statistic, q),
        description: description.into(),
    })
}

/// Lower Cholesky factor; the first row whose pivot vanishes is reported as
/// linearly dependent on the rows before it.
fn cholesky_named(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let scale = (0..n).map(|i| a[(i, i)].abs()).fold(0.0f64, f64::max);
    let mut l = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[(i, j)];
            for k in 0..j {
                sum -= l[(i, k)] * l[(j, k)];
            }
            if i == j {
                if !(sum > scale * 1e-12) || !sum.is_finite() {
                    return Err(Error::SingularConstraint { row: i });
                }
                l[(i, i)] = libm::sqrt(sum);
            } else {
                l[(i, j)] = sum / l[(j, j)];
            }
        }
    }
    Ok(l)
}

fn prepare(spec: &ModelSpec, params: &Parameters, cov: &Covariance) -> Result<(Vec<f64>, DMatrix<f64>, ParamLayout)> {
    let layout = ParamLayout::new(spec);
    if cov.dim != layout.len() || cov.matrix.len() != cov.dim * cov.dim {
        return Err(Error::invalid("covariance does not match the model's free parameters"));
    }
    params.validate(spec)?;
    let matrix = DMatrix::from_row_slice(cov.dim, cov.dim, &cov.matrix);
    Ok((layout.natural(params), matrix, layout))
}

fn fit_covariance(fit: &FitResult) -> Result<&Covariance> {
    fit.covariance.as_ref().ok_or(Error::MissingCovariance)
}

/// Rows `θ[idx[c]] - θ[idx[0]]` for `c >= 1`.
fn differencing(p: usize, idx: &[usize]) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(idx.len().saturating_sub(1), p);
    for (row, &i) in idx.iter().skip(1).enumerate() {
        m[(row, i)] = 1.0;
        m[(row, idx[0])] = -1.0;
    }
    m
}

/// Test of equal class means of `z`.
pub fn wald_equal_means(fit: &FitResult) -> Result<WaldResult> {
    equal_means_test(&fit.spec, &fit.params, fit_covariance(fit)?)
}

/// [`wald_equal_means`] from parameters and their covariance.
pub fn equal_means_test(spec: &ModelSpec, params: &Parameters, cov: &Covariance) -> Result<WaldResult> {
    if !spec.variant().models_external() {
        return Err(Error::UnsupportedVariant("equal-means test"));
    }
    if spec.n_classes() < 2 {
        return Err(Error::invalid("equal-means test needs at least two classes"));
    }
    let (est, cov, layout) = prepare(spec, params, cov)?;
    let r = differencing(est.len(), &layout.mean_indices());
    let q = r.nrows();
    wald_test(&est, &cov, &r, &vec![0.0; q], "equal means")
}

/// Test of equal class variances of `z`.
pub fn wald_equal_variances(fit: &FitResult) -> Result<WaldResult> {
    equal_variances_test(&fit.spec, &fit.params, fit_covariance(fit)?)
}

/// [`wald_equal_variances`] from parameters and their covariance.
pub fn equal_variances_test(spec: &ModelSpec, params: &Parameters, cov: &Covariance) -> Result<WaldResult> {
    if !spec.variant().models_external() {
        return Err(Error::UnsupportedVariant("equal-variances test"));
    }
    if spec.n_classes() < 2 || spec.variance_mode() == VarianceMode::Common {
        return Err(Error::invalid("equal-variances test needs class-specific variances"));
    }
    let (est, cov, layout) = prepare(spec, params, cov)?;
    let r = differencing(est.len(), &layout.variance_indices());
    let q = r.nrows();
    wald_test(&est, &cov, &r, &vec![0.0; q], "equal variances")
}

/// Joint tests of one item's direct effects: all zero (`df = S(K-1)`) and
/// equal across classes (`df = (S-1)(K-1)`).
pub fn wald_direct_effects(fit: &FitResult, item: usize) -> Result<(WaldResult, WaldResult)> {
    direct_effects_test(&fit.spec, &fit.params, fit_covariance(fit)?, item)
}

/// [`wald_direct_effects`] from parameters and their covariance.
pub fn direct_effects_test(
    spec: &ModelSpec,
    params: &Parameters,
    cov: &Covariance,
    item: usize,
) -> Result<(WaldResult, WaldResult)> {
    if !spec.variant().has_direct_effects() {
        return Err(Error::UnsupportedVariant("direct-effect test"));
    }
    if item >= spec.n_items() {
        return Err(Error::Index {
            what: "item",
            index: item,
            len: spec.n_items(),
        });
    }
    if spec.slope(item) != SlopeConstraint::Free {
        return Err(Error::invalid(format!("slopes of item {item} are constrained")));
    }
    if spec.n_classes() < 2 {
        return Err(Error::invalid("equality of direct effects needs at least two classes"));
    }
    let (est, cov, layout) = prepare(spec, params, cov)?;
    let p = est.len();
    let idx = layout.slope_indices(item);
    let mut zero = DMatrix::zeros(idx.len(), p);
    for (row, &i) in idx.iter().enumerate() {
        zero[(row, i)] = 1.0;
    }
    let zero_test = wald_test(&est, &cov, &zero, &vec![0.0; idx.len()], "direct effects zero")?;

    let m = spec.cardinalities()[item] - 1;
    let s = spec.n_classes();
    let mut equal = DMatrix::zeros((s - 1) * m, p);
    // Slopes are stored class-major within the item.
    for c in 1..s {
        for cat in 0..m {
            let row = (c - 1) * m + cat;
            equal[(row, idx[c * m + cat])] = 1.0;
            equal[(row, idx[cat])] = -1.0;
        }
    }
    let q = equal.nrows();
    let equality_test = wald_test(&est, &cov, &equal, &vec![0.0; q], "direct effects equal")?;
    Ok((zero_test, equality_test))
}

/// `***` below 0.01, `**` below 0.05, `*` below 0.1.
pub fn significance_stars(p_value: f64) -> &'static str {
    if p_value < 0.01 {
        "***"
    } else if p_value < 0.05 {
        "**"
    } else if p_value < 0.1 {
        "*"
    } else {
        ""
    }
}

/// Two-sided p-value of a single coefficient's z-test.
pub fn coefficient_p_value(estimate: f64, se: f64) -> f64 {
    if !(se > 0.0) {
        return f64::NAN;
    }
    let z = estimate / se;
    chi_square_upper_tail(z * z, 1)
}
