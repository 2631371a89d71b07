//! Elementary functions from std when available, otherwise from `libm`.

pub(crate) use core::f64::consts::PI;

#[cfg(feature = "std")]
#[inline]
pub(crate) fn ln(x: f64) -> f64 {
    x.ln()
}

#[cfg(not(feature = "std"))]
#[inline]
pub(crate) fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[cfg(feature = "std")]
#[inline]
pub(crate) fn exp(x: f64) -> f64 {
    x.exp()
}

#[cfg(not(feature = "std"))]
#[inline]
pub(crate) fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[cfg(feature = "std")]
#[inline]
pub(crate) fn sqrt(x: f64) -> f64 {
    x.sqrt()
}

#[cfg(not(feature = "std"))]
#[inline]
pub(crate) fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub(crate) fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// `ln(1 + e^-a)` for `a >= 0`. The argument of `ln` lies in `(1, 2]`, so
/// plain `ln` is accurate to about 1e-16 in absolute terms and much cheaper
/// than `ln_1p`.
#[inline]
pub(crate) fn ln_1p_exp_neg(a: f64) -> f64 {
    ln(1.0 + exp(-a))
}

/// `ln(1 + e^x)` without overflow.
#[inline]
pub(crate) fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + ln_1p_exp_neg(x)
    } else {
        ln_1p_exp_neg(-x)
    }
}

pub(crate) fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let sum: f64 = values.iter().map(|&v| exp(v - max)).sum();
    max + ln(sum)
}

/// Log-softmax in place.
pub(crate) fn log_normalize(values: &mut [f64]) -> f64 {
    let lse = log_sum_exp(values);
    for v in values.iter_mut() {
        *v -= lse;
    }
    lse
}

/// Natural log with `0 · ln 0 = 0` handled by the caller via this helper.
#[inline]
pub(crate) fn xlogx(x: f64) -> f64 {
    if x > 0.0 {
        x * ln(x)
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use core::f64::consts::LN_2;
    use super::*;

    #[test]
    fn softplus_is_stable_at_extremes() {
        assert_eq!(softplus(1000.0), 1000.0);
        assert!(softplus(-1000.0) >= 0.0 && softplus(-1000.0) < 1e-300);
        assert!((softplus(0.0) - LN_2).abs() < 1e-15);
    }

    #[test]
    fn log_sum_exp_handles_neg_infinity() {
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY, f64::NEG_INFINITY]), f64::NEG_INFINITY);
        assert!((log_sum_exp(&[0.0, 0.0]) - LN_2).abs() < 1e-15);
    }
}
