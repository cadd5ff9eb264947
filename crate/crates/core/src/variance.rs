//! The variance kernel and the steady-state marginal deviations.
//!
//! Each stable Laplacian mode contributes a position variance proportional
//! to
//!
//! ```text
//! f(s1, s2) = integral over R of dr / ((s1 s2 - r^2 cos r)^2 + r^2 (s1 - r sin r)^2)
//! ```
//!
//! evaluated at `(s1, s2) = (lambda tau, beta tau)`. The integrand is even
//! in `r`, oscillates with period `2 pi`, decays like `r^-4`, and develops a
//! non-integrable double zero of the denominator exactly on the boundary of
//! the stability region, where the variance diverges.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{OnceLock, RwLock};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::Spectrum;
use crate::optim::nelder_mead_2d;
use crate::quad::integrate;
use crate::stability::{self, BOUNDARY_MARGIN};

/// One kernel evaluation with its accuracy certificate. The contract is
/// `est_error + tail_bound <= 1e-8 * value`.
#[derive(Clone, Copy, Debug)]
pub struct KernelEval {
    pub value: f64,
    /// Absolute quadrature error estimate over the truncated range.
    pub est_error: f64,
    /// Analytic bound on the discarded tail (also added into `value`).
    pub tail_bound: f64,
}

/// Relative accuracy contract for a kernel evaluation.
const KERNEL_CONTRACT: f64 = 1e-8;
/// Per-piece relative quadrature tolerance.
const PIECE_REL_TOL: f64 = 2e-9;
/// Relative size allowed for the truncated tail.
const TAIL_REL: f64 = 1e-10;
/// Oscillation-resolving panel cap.
const PANEL_CAP: f64 = PI / 4.0;
/// End of the head range; the denominator's near-zeros all live below it.
const HEAD_RADIUS: f64 = 16.0 * PI;

#[inline]
fn integrand(s1: f64, s2: f64, r: f64) -> f64 {
    let a = s1 * s2 - r * r * r.cos();
    let b = r * (s1 - r * r.sin());
    1.0 / (a * a + b * b)
}

fn memo() -> &'static RwLock<HashMap<(i64, i64), KernelEval>> {
    static MEMO: OnceLock<RwLock<HashMap<(i64, i64), KernelEval>>> = OnceLock::new();
    MEMO.get_or_init(|| RwLock::new(HashMap::new()))
}

fn memo_key(s1: f64, s2: f64) -> (i64, i64) {
    ((s1 / 1e-12).round() as i64, (s2 / 1e-12).round() as i64)
}

/// Evaluate the variance kernel at a point strictly inside the stability
/// region (margin at least 1e-9). Results are memoized keyed by the point
/// rounded at 1e-12, so repeated modes cost one quadrature.
pub fn kernel(s1: f64, s2: f64) -> Result<KernelEval> {
    let margin = stability::region_margin(s1, s2);
    if margin < BOUNDARY_MARGIN {
        return Err(Error::OutsideStabilityRegion { s1, s2, margin });
    }

    let key = memo_key(s1, s2);
    if let Some(hit) = memo().read().expect("kernel cache poisoned").get(&key) {
        return Ok(*hit);
    }

    let f = |r: f64| integrand(s1, s2, r);
    let r0 = HEAD_RADIUS;
    let head = integrate(&f, 0.0, r0, PANEL_CAP, 0.0, PIECE_REL_TOL, 60_000);

    // Truncation radius from the analytic tail bound
    //   integrand(r) <= 1 / (r^4 (1 - c/r)),  c = 2 s1 (1 + s2),
    // so the discarded (doubled) tail is below 2 / (3 R^3 (1 - c/R)).
    let c = 2.0 * s1 * (1.0 + s2);
    let value_estimate = 2.0 * head.value;
    let mut radius = (2.0 / (3.0 * TAIL_REL * value_estimate)).cbrt();
    radius /= (1.0 - (c / radius).min(0.5)).cbrt();
    let radius = radius.max(r0 + PI);

    let tail_piece = integrate(&f, r0, radius, PANEL_CAP, 0.0, PIECE_REL_TOL, 60_000);
    let tail_bound = 2.0 / (3.0 * radius.powi(3) * (1.0 - c / radius));

    let value = 2.0 * (head.value + tail_piece.value) + tail_bound;
    let est_error = 2.0 * (head.error + tail_piece.error);
    let eval = KernelEval {
        value,
        est_error,
        tail_bound,
    };

    if est_error + tail_bound > KERNEL_CONTRACT * value {
        return Err(Error::QuadratureFailure {
            s1,
            s2,
            achieved: est_error + tail_bound,
            budget: KERNEL_CONTRACT * value,
        });
    }

    memo()
        .write()
        .expect("kernel cache poisoned")
        .insert(key, eval);
    Ok(eval)
}

/// Steady-state standard deviations of the distances between consecutive
/// vehicles, with the parameters they were computed from.
#[derive(Clone, Debug)]
pub struct MarginalDeviations {
    pub sigma: Vec<f64>,
    pub g: f64,
    pub tau: f64,
    pub beta: f64,
}

impl MarginalDeviations {
    pub fn pair_count(&self) -> usize {
        self.sigma.len()
    }

    pub fn max(&self) -> f64 {
        self.sigma.iter().fold(0.0f64, |a, &b| a.max(b))
    }
}

/// Kernel values for the distinct nonzero eigenvalues of a spectrum,
/// deduplicated at relative tolerance 1e-9 (repeated modes are evaluated
/// once and reused).
fn mode_kernel_values(spectrum: &Spectrum, tau: f64, beta: f64) -> Result<Vec<f64>> {
    let lambdas = &spectrum.eigenvalues()[1..];
    let s2 = beta * tau;
    let mut values = Vec::with_capacity(lambdas.len());
    let mut last: Option<(f64, f64)> = None;
    for &lambda in lambdas {
        if let Some((prev_lambda, prev_value)) = last {
            if (lambda - prev_lambda).abs() <= 1e-9 * lambda.abs().max(1.0) {
                values.push(prev_value);
                continue;
            }
        }
        let value = kernel(lambda * tau, s2)?.value;
        values.push(value);
        last = Some((lambda, value));
    }
    Ok(values)
}

/// Marginal deviations of the steady-state spacings:
/// `sigma_i^2 = g^2 tau^3 / (2 pi) * sum_j w_{ij}^2 f(lambda_j tau, beta tau)`
/// with `w_{ij} = [e_{i+1} - e_i]^T q_j`; the `j = 1` term vanishes because
/// the uniform eigenvector weighs every vehicle equally.
///
/// For `tau = 0` the scaled kernel degenerates; the delay-free
/// transfer-function identity gives `sigma_i^2 = g^2 / (2 beta) * sum_j
/// w_{ij}^2 / lambda_j^2` and is used instead.
pub fn sigma_vector(
    spectrum: &Spectrum,
    g: f64,
    tau: f64,
    beta: f64,
) -> Result<MarginalDeviations> {
    if g == 0.0 {
        return Err(Error::InvalidParameter(
            "noise diffusion g must be nonzero".into(),
        ));
    }
    if tau < 0.0 {
        return Err(Error::InvalidParameter(format!("tau = {tau} must be >= 0")));
    }
    if !(beta > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "beta = {beta} must be > 0"
        )));
    }
    let n = spectrum.len();

    if tau == 0.0 {
        let mut sigma = Vec::with_capacity(n - 1);
        for pair in 0..n - 1 {
            let mut sum = 0.0;
            for j in 1..n {
                let w = spectrum.pair_weight(j, pair);
                let lambda = spectrum.eigenvalues()[j];
                sum += w * w / (lambda * lambda);
            }
            sigma.push((g * g / (2.0 * beta) * sum).sqrt());
        }
        return Ok(MarginalDeviations {
            sigma,
            g,
            tau,
            beta,
        });
    }

    let verdict = stability::assess(spectrum, beta, tau);
    if !verdict.stable {
        let bad: Vec<String> = verdict
            .per_mode
            .iter()
            .enumerate()
            .filter(|(_, m)| !m.in_region)
            .map(|(i, m)| format!("mode {} at ({:.6}, {:.6})", i + 2, m.s1, m.s2))
            .collect();
        return Err(Error::UnstablePlatoon(bad.join(", ")));
    }

    let kernel_values = mode_kernel_values(spectrum, tau, beta)?;
    let prefactor = g * g * tau.powi(3) / (2.0 * PI);
    let mut sigma = Vec::with_capacity(n - 1);
    for pair in 0..n - 1 {
        let mut sum = 0.0;
        for j in 1..n {
            let w = spectrum.pair_weight(j, pair);
            sum += w * w * kernel_values[j - 1];
        }
        sigma.push((prefactor * sum).sqrt());
    }
    Ok(MarginalDeviations {
        sigma,
        g,
        tau,
        beta,
    })
}

/// Global minimum of the kernel over the stability region.
#[derive(Clone, Copy, Debug)]
pub struct KernelMinimum {
    pub value: f64,
    pub s1: f64,
    pub s2: f64,
}

pub(crate) struct GridPoint {
    pub s1: f64,
    pub s2: f64,
    pub value: f64,
}

/// Kernel values over a coarse interior grid: `s1` from 0.05 to 1.55 in
/// steps of 0.025, and per column 20 uniformly spaced interior `s2` values
/// below the boundary. Shared by the kernel minimum and the trade-off
/// series minimizations.
pub(crate) fn interior_grid() -> &'static Vec<GridPoint> {
    static GRID: OnceLock<Vec<GridPoint>> = OnceLock::new();
    GRID.get_or_init(|| {
        let mut points = Vec::new();
        for i in 0..=60 {
            let s1 = 0.05 + 0.025 * i as f64;
            let bound = stability::upper_boundary(s1).expect("grid s1 in range");
            for j in 1..=20 {
                points.push((s1, bound * j as f64 / 21.0));
            }
        }
        points
            .into_par_iter()
            .map(|(s1, s2)| GridPoint {
                s1,
                s2,
                value: kernel(s1, s2).expect("interior grid point evaluates").value,
            })
            .collect()
    })
}

/// Penalized objective for minimizations over the region interior.
fn penalized_kernel(s1: f64, s2: f64) -> f64 {
    if stability::region_margin(s1, s2) < 1e-8 {
        return f64::INFINITY;
    }
    match kernel(s1, s2) {
        Ok(k) => k.value,
        Err(_) => f64::INFINITY,
    }
}

/// Minimum of the variance kernel: coarse grid scan followed by local
/// Nelder-Mead refinement to simplex size 1e-6. Cached after the first
/// call.
pub fn kernel_min() -> KernelMinimum {
    static MIN: OnceLock<KernelMinimum> = OnceLock::new();
    *MIN.get_or_init(|| {
        let grid = interior_grid();
        let best = grid
            .iter()
            .min_by(|a, b| a.value.partial_cmp(&b.value).unwrap())
            .expect("grid nonempty");
        let refined = nelder_mead_2d(
            &|s1, s2| penalized_kernel(s1, s2),
            (best.s1, best.s2),
            (0.02, 0.02),
            1e-6,
            400,
        );
        KernelMinimum {
            value: refined.value,
            s1: refined.x.0,
            s2: refined.x.1,
        }
    })
}

/// Hard floor on every marginal deviation:
/// `sigma* = sqrt(kernel_min / pi) * |g| * tau^{3/2}`; zero when `tau = 0`.
pub fn sigma_floor(g: f64, tau: f64) -> f64 {
    assert!(tau >= 0.0, "tau must be nonnegative");
    if tau == 0.0 {
        return 0.0;
    }
    (kernel_min().value / PI).sqrt() * g.abs() * tau.powf(1.5)
}
