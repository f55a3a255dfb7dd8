//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point type the solvers are generic over (`f32` or `f64`).
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` literal.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    /// Conversion from a count.
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Dot product of two equally long slices.
pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

pub(crate) fn min_max<T: Scalar>(v: &[T]) -> (T, T) {
    v.iter().fold((T::infinity(), T::neg_infinity()), |(lo, hi), &x| {
        (lo.min(x), hi.max(x))
    })
}

/// `‖a − b‖_∞`.
pub fn sup_distance<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x - y).abs())
        .fold(T::zero(), T::max)
}

/// Hölder `p`-norm with `p ∈ [1, ∞]`, computed with max-scaling so large
/// exponents neither overflow nor underflow.
pub fn lp_norm<T: Scalar>(v: &[T], p: T) -> T {
    let m = v.iter().fold(T::zero(), |acc, &x| acc.max(x.abs()));
    if m == T::zero() || p.is_infinite() {
        return m;
    }
    if p == T::one() {
        return v.iter().map(|x| x.abs()).sum();
    }
    if p == T::lit(2.0) {
        return v.iter().map(|&x| x * x).sum::<T>().sqrt();
    }
    let s: T = v.iter().map(|&x| pow(x.abs() / m, p)).sum();
    m * s.powf(p.recip())
}

/// `x^e` for `x ≥ 0`, skipping `powf` for the common exponents.
pub(crate) fn pow<T: Scalar>(x: T, e: T) -> T {
    if e == T::one() {
        x
    } else if e == T::lit(2.0) {
        x * x
    } else if e == T::lit(0.5) {
        x.sqrt()
    } else if e == T::lit(3.0) {
        x * x * x
    } else {
        x.powf(e)
    }
}
