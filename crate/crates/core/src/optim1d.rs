//! One-dimensional minimization of convex functions on `[0, ∞)`.

use crate::scalar::Scalar;

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Golden-section search on `[lo, hi]`; returns the best abscissa seen (endpoints included).
pub fn golden_section<T: Scalar>(f: &impl Fn(T) -> T, lo: T, hi: T, tol: T) -> (T, T) {
    let r = T::lit(INV_PHI);
    let (mut a, mut b) = (lo, hi);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..200 {
        if (b - a).abs() <= tol {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    let mut best = if fc <= fd { (c, fc) } else { (d, fd) };
    for x in [lo, hi, T::lit(0.5) * (a + b)] {
        let fx = f(x);
        if fx < best.1 {
            best = (x, fx);
        }
    }
    best
}

/// Minimize a convex, coercive `f` over `τ ≥ 0`, starting from the bracket `[0, hi]` and
/// doubling it while the minimum sits at the right edge. `tol` is relative to the bracket.
pub fn minimize_nonneg<T: Scalar>(f: impl Fn(T) -> T, hi: T, tol: T) -> (T, T) {
    let mut hi = if hi > T::zero() && hi.is_finite() {
        hi
    } else {
        T::one()
    };
    for _ in 0..60 {
        let (x, fx) = golden_section(&f, T::zero(), hi, tol * hi);
        if x < hi * T::lit(0.99) {
            return (x, fx);
        }
        hi = hi * T::lit(4.0);
    }
    golden_section(&f, T::zero(), hi, tol * hi)
}

/// Minimize a convex function over `t ≥ 0` given its derivative `slope`, by bisection on
/// the sign of the slope. The bracket `[0, hi]` is grown until the slope turns nonnegative.
pub fn minimize_by_slope<T: Scalar>(slope: impl Fn(T) -> T, hi: T) -> T {
    let mut lo = T::zero();
    let mut hi = if hi > T::zero() && hi.is_finite() {
        hi
    } else {
        T::one()
    };
    let mut grown = 0;
    while slope(hi) < T::zero() {
        lo = hi;
        hi = hi * T::lit(4.0);
        grown += 1;
        if grown > 200 {
            return hi;
        }
    }
    if lo == T::zero() && slope(T::epsilon() * hi) >= T::zero() {
        return T::zero();
    }
    for _ in 0..200 {
        let mid = T::lit(0.5) * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if slope(mid) < T::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    T::lit(0.5) * (lo + hi)
}
