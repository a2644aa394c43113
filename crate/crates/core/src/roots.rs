//! Bracketing and bisection for monotone scalar equations.

/// Locate a sign change of an increasing function `f` by geometric expansion
/// from `start` toward `cap`. Returns `(lo, hi)` with `f(lo) < 0 <= f(hi)`.
///
/// `lo` may be 0 when `f(0) < 0` is known to the caller; `start` must be > 0.
pub(crate) fn bracket_upward<F>(f: F, lo: f64, start: f64, cap: f64) -> Option<(f64, f64)>
where
    F: Fn(f64) -> f64,
{
    let mut lo = lo;
    let mut hi = start.min(cap);
    loop {
        let v = f(hi);
        if v.is_nan() {
            return None;
        }
        if v >= 0.0 {
            return Some((lo, hi));
        }
        if hi >= cap {
            return None;
        }
        lo = hi;
        hi = (hi * 2.0).min(cap);
    }
}

/// Bisection for an increasing function with `f(lo) < 0 <= f(hi)`, run until
/// the bracket collapses to adjacent floats or is within `rel_tol`.
pub(crate) fn bisect_increasing<F>(f: F, mut lo: f64, mut hi: f64, rel_tol: f64) -> f64
where
    F: Fn(f64) -> f64,
{
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= rel_tol * hi.abs() {
            break;
        }
    }
    0.5 * (lo + hi)
}
