//! q-means and span seminorms `sp_q(v) = min_ω ‖v − ω·1‖_q`.

use crate::error::{Result, RmdpError};
use crate::scalar::{lp_norm, min_max, Scalar};

/// Bisection budget for the general-`q` root finder.
pub const MAX_BISECTION_STEPS: usize = 200;

/// The minimizer `ω` together with the minimum `‖v − ω·1‖_q`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpanResult<T> {
    pub omega: T,
    pub value: T,
}

fn check_input<T: Scalar>(v: &[T], q: T) -> Result<()> {
    if v.is_empty() {
        return Err(RmdpError::EmptyVector);
    }
    if let Some(i) = v.iter().position(|x| !x.is_finite()) {
        return Err(RmdpError::NonFiniteEntry(i));
    }
    if q.is_nan() || q < T::one() {
        return Err(RmdpError::BadExponent(q.as_f64()));
    }
    Ok(())
}

/// Lower median of a non-empty slice.
pub(crate) fn lower_median<T: Scalar>(v: &[T]) -> T {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite entries"));
    sorted[(sorted.len() - 1) / 2]
}

/// `q` close enough to one that the general root equation is a step function.
pub(crate) fn q_is_one<T: Scalar>(q: T) -> bool {
    q < T::one() + T::lit(1e-6)
}

/// A minimizer of `ω ↦ ‖v − ω·1‖_q`.
///
/// Closed forms for `q = 1` (lower median), `q = 2` (mean) and `q = ∞`
/// (midrange); bisection on the first-order condition otherwise.
pub fn q_mean<T: Scalar>(v: &[T], q: T) -> Result<T> {
    check_input(v, q)?;
    let (lo, hi) = min_max(v);
    if lo == hi {
        return Ok(lo);
    }
    if q.is_infinite() {
        return Ok(lo + (hi - lo) / T::lit(2.0));
    }
    if q_is_one(q) {
        return Ok(lower_median(v));
    }
    if q == T::lit(2.0) {
        return Ok(v.iter().copied().sum::<T>() / T::from_count(v.len()));
    }
    Ok(bisect_q_mean(v, q, lo, hi))
}

/// The general-`q` root finder, without closed-form shortcuts.
pub fn q_mean_bisection<T: Scalar>(v: &[T], q: T) -> Result<T> {
    check_input(v, q)?;
    if q.is_infinite() {
        return Err(RmdpError::BadExponent(q.as_f64()));
    }
    let (lo, hi) = min_max(v);
    if lo == hi {
        return Ok(lo);
    }
    Ok(bisect_q_mean(v, q, lo, hi))
}

/// Root of `g(ω) = Σ sign(v_s − ω)|v_s − ω|^{q−1}`, which is non-increasing.
/// Works on `v` rescaled to `[0, 1]`; only the sign of `g` is ever needed,
/// so each term is divided by the largest deviation to avoid underflow.
fn bisect_q_mean<T: Scalar>(v: &[T], q: T, lo: T, hi: T) -> T {
    let range = hi - lo;
    let exp = q - T::one();
    let tol = T::lit(1e-10) * (range + T::one()) / range;
    let g = |t: T| -> T {
        let m = v
            .iter()
            .map(|&x| ((x - lo) / range - t).abs())
            .fold(T::zero(), T::max);
        v.iter()
            .map(|&x| {
                let d = (x - lo) / range - t;
                let mag = (d.abs() / m).powf(exp);
                if d < T::zero() {
                    -mag
                } else {
                    mag
                }
            })
            .sum()
    };
    let (mut a, mut b) = (T::zero(), T::one());
    for _ in 0..MAX_BISECTION_STEPS {
        if b - a <= tol {
            break;
        }
        let mid = a + (b - a) / T::lit(2.0);
        if g(mid) > T::zero() {
            a = mid;
        } else {
            b = mid;
        }
    }
    lo + range * (a + (b - a) / T::lit(2.0))
}

/// `sp_q(v)` and the `ω` attaining it.
pub fn span_seminorm<T: Scalar>(v: &[T], q: T) -> Result<SpanResult<T>> {
    let omega = q_mean(v, q)?;
    Ok(SpanResult {
        omega,
        value: deviation(v, omega, q),
    })
}

/// `‖v − ω·1‖_q`.
pub(crate) fn deviation<T: Scalar>(v: &[T], omega: T, q: T) -> T {
    if q.is_infinite() {
        return v
            .iter()
            .map(|&x| (x - omega).abs())
            .fold(T::zero(), T::max);
    }
    if q_is_one(q) {
        return v.iter().map(|&x| (x - omega).abs()).sum();
    }
    let centered: Vec<T> = v.iter().map(|&x| x - omega).collect();
    lp_norm(&centered, q)
}

/// Span seminorm for vectors already known to be finite and non-empty.
pub(crate) fn span_value<T: Scalar>(v: &[T], q: T) -> T {
    span_seminorm(v, q).map(|r| r.value).unwrap_or_else(|_| T::zero())
}
