//! Bisection root finding for strictly monotone scalar functions.

/// Root of `f` on `[lo, hi]` by bisection. `f(lo)` and `f(hi)` must bracket
/// zero. Iterates until the bracket is at machine width, so the residual is
/// limited only by the conditioning of `f`.
pub(crate) fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> f64 {
    let mut flo = f(lo);
    let fhi = f(hi);
    debug_assert!(
        flo == 0.0 || fhi == 0.0 || (flo < 0.0) != (fhi < 0.0),
        "bisect: endpoints do not bracket a root"
    );
    if flo == 0.0 {
        return lo;
    }
    if fhi == 0.0 {
        return hi;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break; // bracket exhausted at machine precision
        }
        let fmid = f(mid);
        if fmid == 0.0 {
            return mid;
        }
        if (fmid < 0.0) == (flo < 0.0) {
            lo = mid;
            flo = fmid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
