//! One-dimensional search routines: golden-section maximization and a
//! bracketing root finder.

use crate::scalar::Scalar;

/// Outcome of a one-dimensional search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchPoint<T> {
    pub x: T,
    pub fx: T,
    pub iterations: usize,
}

/// Golden-section search for the maximum of a unimodal `f` on `[lo, hi]`.
/// The endpoints are evaluated too, so a monotone `f` returns its boundary.
pub fn golden_max<T: Scalar, F: FnMut(T) -> T>(
    mut f: F,
    lo: T,
    hi: T,
    tol: T,
    max_iter: usize,
) -> SearchPoint<T> {
    let inv_phi = T::lit(0.618_033_988_749_894_8);
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    let mut iterations = 0;
    while b - a > tol && iterations < max_iter {
        iterations += 1;
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let mut best = if fc >= fd {
        SearchPoint { x: c, fx: fc, iterations }
    } else {
        SearchPoint { x: d, fx: fd, iterations }
    };
    for x in [lo, hi] {
        let fx = f(x);
        if fx > best.fx {
            best = SearchPoint { x, fx, iterations };
        }
    }
    best
}

/// Brent's method for a root of `f` on `[a, b]` where `f(a)` and `f(b)` have
/// opposite signs (or one is zero). Returns the final bracket point closest
/// to the root together with the iteration count.
pub fn brent_root<T: Scalar, F: FnMut(T) -> T>(
    mut f: F,
    a: T,
    b: T,
    fa: T,
    fb: T,
    xtol: T,
    max_iter: usize,
) -> SearchPoint<T> {
    let two = T::lit(2.0);
    let (mut a, mut b, mut fa, mut fb) = (a, b, fa, fb);
    if fa == T::zero() {
        return SearchPoint { x: a, fx: fa, iterations: 0 };
    }
    if fb == T::zero() {
        return SearchPoint { x: b, fx: fb, iterations: 0 };
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        if (fb > T::zero()) == (fc > T::zero()) {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = two * T::epsilon() * b.abs() + xtol / two;
        let xm = (c - b) / two;
        if xm.abs() <= tol1 || fb == T::zero() {
            break;
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = two * xm * s;
                q = T::one() - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (two * xm * qq * (qq - r) - (b - a) * (r - T::one()));
                q = (qq - T::one()) * (r - T::one()) * (s - T::one());
            }
            if p > T::zero() {
                q = -q;
            }
            p = p.abs();
            let min1 = T::lit(3.0) * xm * q - (tol1 * q).abs();
            let min2 = (e * q).abs();
            if two * p < min1.min(min2) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b = if d.abs() > tol1 {
            b + d
        } else if xm > T::zero() {
            b + tol1
        } else {
            b - tol1
        };
        fb = f(b);
    }
    SearchPoint { x: b, fx: fb, iterations }
}
