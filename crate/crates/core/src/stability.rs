//! Delay-stability of the platoon.
//!
//! A mode with scaled gain `s1 = lambda * tau` and scaled position feedback
//! `s2 = beta * tau` is stable when `s1` lies in `(0, pi/2)` and `s2` lies
//! strictly between `0` and the boundary curve `a / tan(a)`, where `a` in
//! `(0, pi/2)` solves `a sin(a) = s1`. The platoon is stable iff every
//! nonzero Laplacian mode passes this test.

use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};
use crate::graph::Spectrum;
use crate::roots::bisect;

/// Points closer to the region boundary than this are treated as unstable
/// and flagged marginal; the variance integral diverges at the boundary.
pub const BOUNDARY_MARGIN: f64 = 1e-9;

/// Unique `a` in `(0, pi/2)` with `a sin(a) = s1`; `a sin a` is strictly
/// increasing there, so bisection is safe. Residual is at machine level
/// (<= 1e-12 comfortably).
pub fn solve_a(s1: f64) -> Result<f64> {
    if !(s1 > 0.0 && s1 < FRAC_PI_2) {
        return Err(Error::OutOfDomain(format!(
            "a sin(a) = {s1} solvable only for s1 in (0, pi/2)"
        )));
    }
    Ok(bisect(|a| a * a.sin() - s1, 0.0, FRAC_PI_2))
}

/// Height of the upper boundary of the region above `s1`: `a / tan(a)` with
/// `a sin(a) = s1`.
pub fn upper_boundary(s1: f64) -> Result<f64> {
    let a = solve_a(s1)?;
    Ok(a / a.tan())
}

/// Strict membership test for the stability region.
pub fn in_region(s1: f64, s2: f64) -> bool {
    if !(s1 > 0.0 && s1 < FRAC_PI_2) || s2 <= 0.0 {
        return false;
    }
    match upper_boundary(s1) {
        Ok(bound) => s2 < bound,
        Err(_) => false,
    }
}

/// Signed distance from `(s1, s2)` to the complement of the region,
/// measured along `s2`. Negative when the
/// point is outside; when `s1` itself is out of range the (negative) `s1`
/// violation is reported instead.
pub fn region_margin(s1: f64, s2: f64) -> f64 {
    if s1 <= 0.0 {
        return s1;
    }
    if s1 >= FRAC_PI_2 {
        return FRAC_PI_2 - s1;
    }
    let bound = upper_boundary(s1).expect("s1 in range");
    s2.min(bound - s2)
}

/// Largest admissible `lambda * tau` for a given `beta * tau` in `(0, 1)`:
/// the map `g(f^{-1}(s2))` with `g(x) = x sin x` and `f(x) = x cot x`.
/// Tends to `pi/2` as `s2 -> 0` and to `0` as `s2 -> 1`.
pub fn max_lambda_tau(beta_tau: f64) -> Result<f64> {
    let x = inverse_x_cot_x(beta_tau)?;
    Ok(x * x.sin())
}

/// Unique root of `x cot(x) = s2` in `(0, pi/2)`; `x cot x` decreases
/// strictly from 1 to 0 there.
pub(crate) fn inverse_x_cot_x(s2: f64) -> Result<f64> {
    if !(s2 > 0.0 && s2 < 1.0) {
        return Err(Error::OutOfDomain(format!(
            "x cot(x) = {s2} solvable only for s2 in (0, 1)"
        )));
    }
    // x cot x - s2 is decreasing; negate for an increasing bracket.
    Ok(bisect(|x| s2 - x / x.tan(), 1e-300, FRAC_PI_2))
}

/// Stability of one Laplacian mode.
#[derive(Clone, Copy, Debug)]
pub struct ModeAssessment {
    /// `lambda_i * tau`
    pub s1: f64,
    /// `beta * tau`
    pub s2: f64,
    pub in_region: bool,
    /// Distance of `s2` to `{0, boundary}` (negative outside; infinite for
    /// the delay-free analytic branch).
    pub margin: f64,
    /// Inside or outside by less than [`BOUNDARY_MARGIN`].
    pub marginal: bool,
}

/// Verdict for the whole platoon: stable iff every mode `i = 2..n` passes.
#[derive(Clone, Debug)]
pub struct StabilityVerdict {
    pub stable: bool,
    pub per_mode: Vec<ModeAssessment>,
}

/// Assess delay-stability of a platoon with the given spectrum, position
/// gain `beta > 0`, and delay `tau >= 0`.
///
/// For `tau = 0` the characteristic roots are analytic and lie in the left
/// half plane whenever `beta > 0`, so the verdict is stable with infinite
/// margin.
pub fn assess(spectrum: &Spectrum, beta: f64, tau: f64) -> StabilityVerdict {
    let modes = &spectrum.eigenvalues()[1..];
    if tau == 0.0 {
        let stable = beta > 0.0;
        let per_mode = modes
            .iter()
            .map(|_| ModeAssessment {
                s1: 0.0,
                s2: 0.0,
                in_region: stable,
                margin: if stable {
                    f64::INFINITY
                } else {
                    f64::NEG_INFINITY
                },
                marginal: false,
            })
            .collect();
        return StabilityVerdict { stable, per_mode };
    }

    let s2 = beta * tau;
    let per_mode: Vec<ModeAssessment> = modes
        .iter()
        .map(|&lambda| {
            let s1 = lambda * tau;
            let margin = region_margin(s1, s2);
            ModeAssessment {
                s1,
                s2,
                in_region: margin > BOUNDARY_MARGIN,
                margin,
                marginal: margin.abs() <= BOUNDARY_MARGIN,
            }
        })
        .collect();
    StabilityVerdict {
        stable: per_mode.iter().all(|m| m.in_region),
        per_mode,
    }
}

/// Delay-induced floor on the total effective resistance of any stable
/// platoon: `n (n-1) tau / max_lambda_tau(beta tau)`.
pub fn resistance_lower_bound(n: usize, beta: f64, tau: f64) -> Result<f64> {
    if !(tau > 0.0) {
        return Err(Error::OutOfDomain(format!("tau = {tau} must be > 0")));
    }
    let bt = beta * tau;
    if !(bt > 0.0 && bt < 1.0) {
        return Err(Error::OutOfDomain(format!(
            "beta * tau = {bt} must lie in (0, 1)"
        )));
    }
    let nn = n as f64;
    Ok(nn * (nn - 1.0) * tau / max_lambda_tau(bt)?)
}

/// `m` points tracing the upper boundary of the stability region,
/// parameterized by the angle `a` uniform over `[0, pi/2]`. The endpoints
/// take their analytic limits `(0, 1)` and `(pi/2, 0)`.
pub fn region_boundary_samples(m: usize) -> Result<Vec<(f64, f64)>> {
    if m < 2 {
        return Err(Error::InvalidParameter(format!(
            "need m >= 2 samples, got {m}"
        )));
    }
    Ok((0..m)
        .map(|i| {
            if i == 0 {
                (0.0, 1.0)
            } else if i == m - 1 {
                (FRAC_PI_2, 0.0)
            } else {
                let a = FRAC_PI_2 * i as f64 / (m - 1) as f64;
                (a * a.sin(), a / a.tan())
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::WeightedGraph;

    // Independent tiny bisection used as the oracle for boundary values.
    fn oracle_a(s1: f64) -> f64 {
        let (mut lo, mut hi) = (0.0f64, FRAC_PI_2);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid * mid.sin() < s1 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn solve_a_residual_is_tiny() {
        for s1 in [1e-6, 0.3, 1.111, 1.5, FRAC_PI_2 - 1e-9] {
            let a = solve_a(s1).unwrap();
            assert!((a * a.sin() - s1).abs() <= 1e-12, "s1={s1}");
            assert!((a - oracle_a(s1)).abs() < 1e-12);
        }
    }

    #[test]
    fn solve_a_limits() {
        // Near the upper boundary of its domain a -> pi/2.
        let near = FRAC_PI_2 * (FRAC_PI_2 * 0.999_999).sin();
        assert!(solve_a(near).unwrap() > FRAC_PI_2 - 1e-2);
        // a sin a ~ a^2 near zero.
        assert!(solve_a(1e-10).unwrap() < 1e-4);
        assert!(solve_a(0.0).is_err());
        assert!(solve_a(FRAC_PI_2).is_err());
    }

    #[test]
    fn region_contains_kernel_minimizer() {
        assert!(in_region(1.111, 0.220));
        assert!(!in_region(FRAC_PI_2, 0.1));
        // Just above the boundary curve fails.
        let a = oracle_a(0.5);
        let bound = a / a.tan();
        assert!(!in_region(0.5, bound + 1e-6));
        assert!(in_region(0.5, bound - 1e-6));
    }

    #[test]
    fn region_monotone_in_s2() {
        for &(s1, s2) in &[(0.3, 0.5), (1.0, 0.3), (1.4, 0.05)] {
            if in_region(s1, s2) {
                for f in [0.75, 0.5, 0.25, 0.01] {
                    assert!(in_region(s1, s2 * f));
                }
            }
        }
    }

    #[test]
    fn boundary_decreases_with_s1() {
        let mut prev = f64::INFINITY;
        let mut s1 = 0.05;
        while s1 < FRAC_PI_2 - 0.01 {
            let b = upper_boundary(s1).unwrap();
            assert!(b > 0.0 && b < 1.0);
            assert!(b < prev);
            prev = b;
            s1 += 0.05;
        }
    }

    #[test]
    fn max_lambda_tau_limits_and_residual() {
        // x cot x residual check at s2 = 0.5.
        let x = inverse_x_cot_x(0.5).unwrap();
        assert!((x / x.tan() - 0.5).abs() <= 1e-12);
        assert!((max_lambda_tau(0.5).unwrap() - x * x.sin()).abs() < 1e-15);
        // s2 -> 0: limit pi/2. s2 -> 1: limit 0.
        assert!((max_lambda_tau(1e-9).unwrap() - FRAC_PI_2).abs() < 1e-3);
        assert!(max_lambda_tau(1.0 - 1e-9).unwrap() < 1e-3);
        assert!(max_lambda_tau(0.0).is_err());
        assert!(max_lambda_tau(1.0).is_err());
    }

    #[test]
    fn complete_graph_at_optimum_is_stable() {
        let n = 10;
        let tau = 0.1;
        let beta = 2.2;
        let k = 1.111 / (n as f64 * tau);
        let g = WeightedGraph::complete(n, k).unwrap();
        let s = Spectrum::of_graph(&g).unwrap();
        let verdict = assess(&s, beta, tau);
        assert!(verdict.stable);
        for m in &verdict.per_mode {
            assert!((m.s1 - 1.111).abs() < 1e-9);
            assert!((m.s2 - 0.220).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_delay_always_stable() {
        let g = WeightedGraph::path(6, 25.0).unwrap();
        let s = Spectrum::of_graph(&g).unwrap();
        assert!(assess(&s, 0.5, 0.0).stable);
    }

    #[test]
    fn large_s1_mode_is_unstable() {
        let g = WeightedGraph::complete(4, 1.0).unwrap();
        let s = Spectrum::of_graph(&g).unwrap();
        // lambda_n tau = 4 * 0.4 = 1.6 > pi/2.
        let verdict = assess(&s, 0.5, 0.4);
        assert!(!verdict.stable);
    }

    #[test]
    fn scaling_invariance() {
        let g = WeightedGraph::path(5, 1.0).unwrap();
        let s = Spectrum::of_graph(&g).unwrap();
        let c = 3.7;
        let scaled = WeightedGraph::path(5, c).unwrap();
        let s_scaled = Spectrum::of_graph(&scaled).unwrap();
        let (beta, tau) = (0.8, 0.3);
        let v1 = assess(&s, beta, tau);
        let v2 = assess(&s_scaled, c * beta, tau / c);
        assert_eq!(v1.stable, v2.stable);
        for (a, b) in v1.per_mode.iter().zip(&v2.per_mode) {
            assert!((a.s1 - b.s1).abs() < 1e-9);
            assert!((a.s2 - b.s2).abs() < 1e-12);
        }
    }

    #[test]
    fn boundary_samples_trace_the_curve() {
        let pts = region_boundary_samples(21).unwrap();
        assert_eq!(pts[0], (0.0, 1.0));
        assert_eq!(pts[20], (FRAC_PI_2, 0.0));
        for &(s1, s2) in &pts {
            // Strict inequalities exclude the boundary itself.
            assert!(!in_region(s1, s2));
        }
        assert!(region_boundary_samples(1).is_err());
    }

    #[test]
    fn resistance_bound_beta_to_zero_limit() {
        // theta -> pi/2 as beta tau -> 0, so the bound tends to n(n-1) 2 tau / pi.
        let n = 6;
        let tau = 0.25;
        let got = resistance_lower_bound(n, 1e-8, tau).unwrap();
        let want = (n * (n - 1)) as f64 * 2.0 * tau / std::f64::consts::PI;
        assert!((got - want).abs() < 1e-4 * want);
        // Pair case n = 2: 2 tau / theta.
        let got2 = resistance_lower_bound(2, 1.0, 0.5).unwrap();
        let want2 = 2.0 * 0.5 / max_lambda_tau(0.5).unwrap();
        assert!((got2 - want2).abs() < 1e-12);
        assert!(resistance_lower_bound(4, 0.0, 0.5).is_err());
        assert!(resistance_lower_bound(4, 2.0, 0.5).is_err());
    }

    #[test]
    fn stable_platoon_resistance_exceeds_bound() {
        // Construct a stable instance and compare.
        let g = WeightedGraph::perturbed_complete(5, 1.0, 0.4, 11).unwrap();
        let s = Spectrum::of_graph(&g).unwrap();
        let tau = 0.15;
        // Scale beta so beta tau = 0.3.
        let beta = 0.3 / tau;
        assert!(assess(&s, beta, tau).stable);
        let bound = resistance_lower_bound(5, beta, tau).unwrap();
        assert!(s.effective_resistance() > bound);
    }
}
