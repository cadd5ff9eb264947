//! Rational surrogate for the variance kernel over a compact window inside
//! the stability region.
//!
//! For a fixed `s2` the kernel, viewed as a function of `s1`, blows up at
//! `s1 = 0` and again at the region boundary `theta(s2) = s* sin(s*)`,
//! where `s*` solves `s* cot(s*) = s2`. On the window
//! `[0.1, theta(s2) - 0.05]` it is approximated by
//!
//! ```text
//! f~(s1) = A(s1)/s1^2 + B(s1)/(s1 - pole),   pole = theta(s2),
//! ```
//!
//! obtained by least-squares projection of the exact kernel onto the span
//! of `{1, s1, 1/s1, s1^2, 1/s1^2, s1^3, 1/(s1 - pole), s1^4}` under the
//! window inner product, followed by dropping the three highest numerator
//! coefficients, which are negligible away from `s2 ~ 0.9`. Where they are
//! not negligible the projection is redone on the reduced five-function
//! span so the surrogate keeps its sub-1e-3 accuracy on short windows.

use std::io::Write as IoWrite;
use std::sync::OnceLock;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::Spectrum;
use crate::quad::gauss_legendre;
use crate::stability;
use crate::variance::{kernel, MarginalDeviations};

/// Domain of the fit in `s2`.
pub const S2_MIN: f64 = 0.1;
pub const S2_MAX: f64 = 0.9;
/// Left edge of every fit window in `s1`.
pub const S1_MIN: f64 = 0.1;
/// Gap kept between the window and the boundary pole.
pub const POLE_GAP: f64 = 0.05;

/// Boundary angle for `s2` in `[0.1, 0.9]`: the root of `x cot(x) = s2`.
/// The matching boundary coordinate (and surrogate pole) is `x sin(x)`.
pub fn boundary_angle(s2: f64) -> Result<f64> {
    if !(S2_MIN..=S2_MAX).contains(&s2) {
        return Err(Error::OutOfDomain(format!(
            "fit domain is s2 in [{S2_MIN}, {S2_MAX}], got {s2}"
        )));
    }
    stability::inverse_x_cot_x(s2)
}

/// The `s1` window `[0.1, theta(s2) - 0.05]` of the fit at `s2`.
pub fn fit_window(s2: f64) -> Result<(f64, f64)> {
    let angle = boundary_angle(s2)?;
    Ok((S1_MIN, angle * angle.sin() - POLE_GAP))
}

fn gl64() -> &'static (Vec<f64>, Vec<f64>) {
    static NODES: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    NODES.get_or_init(|| gauss_legendre(64))
}

/// Raw basis function values at `x` for the pole `p`. The reduced span
/// drops the pure powers above one.
const FULL_BASIS: usize = 8;
const REDUCED_BASIS: usize = 5;

fn basis_value(full: bool, index: usize, x: f64, pole: f64) -> f64 {
    if full {
        match index {
            0 => 1.0,
            1 => x,
            2 => 1.0 / x,
            3 => x * x,
            4 => 1.0 / (x * x),
            5 => x * x * x,
            6 => 1.0 / (x - pole),
            7 => x * x * x * x,
            _ => unreachable!(),
        }
    } else {
        match index {
            0 => 1.0,
            1 => x,
            2 => 1.0 / x,
            3 => 1.0 / (x * x),
            4 => 1.0 / (x - pole),
            _ => unreachable!(),
        }
    }
}

/// Numerator-over-common-denominator coefficients: the contribution of raw
/// basis function `index` scaled by `coeff` to the polynomial
/// `q(s1) = sum alpha_k s1^k` over `s1^2 (s1 - pole)`.
fn accumulate_alpha(full: bool, index: usize, coeff: f64, pole: f64, alpha: &mut [f64; 8]) {
    let mut add = |deg: usize, v: f64| alpha[deg] += coeff * v;
    if full {
        match index {
            0 => {
                add(3, 1.0);
                add(2, -pole);
            }
            1 => {
                add(4, 1.0);
                add(3, -pole);
            }
            2 => {
                add(2, 1.0);
                add(1, -pole);
            }
            3 => {
                add(5, 1.0);
                add(4, -pole);
            }
            4 => {
                add(1, 1.0);
                add(0, -pole);
            }
            5 => {
                add(6, 1.0);
                add(5, -pole);
            }
            6 => add(2, 1.0),
            7 => {
                add(7, 1.0);
                add(6, -pole);
            }
            _ => unreachable!(),
        }
    } else {
        match index {
            0 => {
                add(3, 1.0);
                add(2, -pole);
            }
            1 => {
                add(4, 1.0);
                add(3, -pole);
            }
            2 => {
                add(2, 1.0);
                add(1, -pole);
            }
            3 => {
                add(1, 1.0);
                add(0, -pole);
            }
            4 => add(2, 1.0),
            _ => unreachable!(),
        }
    }
}

/// Least-squares projection of the kernel samples onto the chosen basis
/// span, via modified Gram-Schmidt (in coefficient space against the Gram
/// matrix) with one re-orthogonalization pass.
fn project(
    s2: f64,
    full: bool,
    pole: f64,
    nodes: &[f64],
    weights: &[f64],
    f_nodes: &[f64],
) -> Result<Vec<f64>> {
    let dim = if full { FULL_BASIS } else { REDUCED_BASIS };
    // Gram matrix of the raw basis under the window inner product.
    let mut gram = vec![0.0; dim * dim];
    for i in 0..dim {
        for j in i..dim {
            let mut acc = 0.0;
            for (idx, &x) in nodes.iter().enumerate() {
                acc += weights[idx] * basis_value(full, i, x, pole) * basis_value(full, j, x, pole);
            }
            gram[i * dim + j] = acc;
            gram[j * dim + i] = acc;
        }
    }
    let bilinear = |u: &[f64], v: &[f64]| -> f64 {
        let mut acc = 0.0;
        for i in 0..dim {
            for j in 0..dim {
                acc += u[i] * gram[i * dim + j] * v[j];
            }
        }
        acc
    };

    // Orthonormal vectors, each stored as coefficients over the raw basis.
    let mut ortho: Vec<Vec<f64>> = Vec::with_capacity(dim);
    for k in 0..dim {
        let mut v = vec![0.0; dim];
        v[k] = 1.0;
        let original_norm2 = bilinear(&v, &v);
        for _pass in 0..2 {
            for q in &ortho {
                let proj = bilinear(&v, q);
                for i in 0..dim {
                    v[i] -= proj * q[i];
                }
            }
        }
        let norm2 = bilinear(&v, &v);
        if !(norm2 > 0.0) || norm2 <= 1e-26 * original_norm2 {
            return Err(Error::IllConditionedBasis {
                s2,
                index: k,
                ratio: (norm2 / original_norm2).max(0.0).sqrt(),
            });
        }
        let inv = 1.0 / norm2.sqrt();
        for x in v.iter_mut() {
            *x *= inv;
        }
        ortho.push(v);
    }

    // Moments of the kernel against the raw basis.
    let mut moments = vec![0.0; dim];
    for (i, moment) in moments.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (idx, &x) in nodes.iter().enumerate() {
            acc += weights[idx] * f_nodes[idx] * basis_value(full, i, x, pole);
        }
        *moment = acc;
    }

    // Projection coefficients over the raw basis.
    let mut raw = vec![0.0; dim];
    for q in &ortho {
        let weight: f64 = (0..dim).map(|i| q[i] * moments[i]).sum();
        for i in 0..dim {
            raw[i] += weight * q[i];
        }
    }
    Ok(raw)
}

/// Rational fit of the kernel at a fixed `s2`.
#[derive(Clone, Debug)]
pub struct RationalFit {
    pub s2: f64,
    /// Boundary angle: the root of `s* cot(s*) = s2`.
    pub s_star: f64,
    /// Pole of the surrogate, `s_star * sin(s_star)`: the boundary
    /// coordinate the kernel actually diverges at.
    pub pole: f64,
    /// Window `[0.1, pole - 0.05]` the fit is valid on.
    pub window: (f64, f64),
    /// Pre-split numerator coefficients of the full eight-function
    /// projection over `s1^2 (s1 - pole)`.
    pub alpha: [f64; 8],
    /// Numerator of `A(s1)/s1^2`, degree 5.
    pub a_coeffs: [f64; 6],
    /// Numerator of `B(s1)/(s1 - pole)`, degree 4.
    pub b_coeffs: [f64; 5],
    /// Whether dropping `alpha[5..8]` kept the node error below tolerance;
    /// when false the kept coefficients come from a reduced-span refit
    /// (short windows near `s2 = 0.9`).
    pub truncation_ok: bool,
}

/// Node error allowed before the truncated form is swapped for a reduced
/// refit; half the surrogate's overall accuracy budget.
const TRUNCATION_TOL: f64 = 5e-4;

impl RationalFit {
    pub fn compute(s2: f64) -> Result<Self> {
        let s_star = boundary_angle(s2)?;
        let pole = s_star * s_star.sin();
        let window = (S1_MIN, pole - POLE_GAP);
        if window.1 <= window.0 {
            return Err(Error::OutOfDomain(format!(
                "fit window at s2 = {s2} is empty"
            )));
        }

        let (gl_nodes, gl_weights) = gl64();
        let mid = 0.5 * (window.0 + window.1);
        let half = 0.5 * (window.1 - window.0);
        let nodes: Vec<f64> = gl_nodes.iter().map(|&t| mid + half * t).collect();
        let weights: Vec<f64> = gl_weights.iter().map(|&w| half * w).collect();
        let f_nodes: Vec<f64> = nodes
            .iter()
            .map(|&x| kernel(x, s2).map(|k| k.value))
            .collect::<Result<_>>()?;

        let raw = project(s2, true, pole, &nodes, &weights, &f_nodes)?;
        let mut alpha = [0.0f64; 8];
        for (i, &c) in raw.iter().enumerate() {
            accumulate_alpha(true, i, c, pole, &mut alpha);
        }

        // Truncated numerator and its worst node error.
        let mut q = [alpha[0], alpha[1], alpha[2], alpha[3], alpha[4]];
        let eval_q = |q: &[f64; 5], x: f64| {
            (q[0] + x * (q[1] + x * (q[2] + x * (q[3] + x * q[4])))) / (x * x * (x - pole))
        };
        let node_error = |q: &[f64; 5]| {
            nodes
                .iter()
                .zip(&f_nodes)
                .map(|(&x, &fx)| (1.0 - eval_q(q, x) / fx).abs())
                .fold(0.0f64, f64::max)
        };
        let truncation_ok = node_error(&q) <= TRUNCATION_TOL;
        if !truncation_ok {
            let raw_reduced = project(s2, false, pole, &nodes, &weights, &f_nodes)?;
            let mut alpha_reduced = [0.0f64; 8];
            for (i, &c) in raw_reduced.iter().enumerate() {
                accumulate_alpha(false, i, c, pole, &mut alpha_reduced);
            }
            q = [
                alpha_reduced[0],
                alpha_reduced[1],
                alpha_reduced[2],
                alpha_reduced[3],
                alpha_reduced[4],
            ];
        }

        // Split q / (s1^2 (s1 - pole)) into A/s1^2 + B/(s1 - pole):
        // A = -q(s1)(s1 + pole)/pole^2, B = q(s1)/pole^2.
        let p2 = pole * pole;
        let mut a_coeffs = [0.0f64; 6];
        for i in 0..5 {
            a_coeffs[i] -= q[i] * pole / p2;
            a_coeffs[i + 1] -= q[i] / p2;
        }
        let mut b_coeffs = [0.0f64; 5];
        for i in 0..5 {
            b_coeffs[i] = q[i] / p2;
        }

        Ok(RationalFit {
            s2,
            s_star,
            pole,
            window,
            alpha,
            a_coeffs,
            b_coeffs,
            truncation_ok,
        })
    }

    /// Evaluate the surrogate at `s1` (no window check; the pole is the
    /// only genuine singularity).
    pub fn eval(&self, s1: f64) -> f64 {
        let a = self.a_coeffs.iter().rev().fold(0.0, |acc, &c| acc * s1 + c);
        let b = self.b_coeffs.iter().rev().fold(0.0, |acc, &c| acc * s1 + c);
        a / (s1 * s1) + b / (s1 - self.pole)
    }
}

/// One row of an error scan.
#[derive(Clone, Copy, Debug)]
pub struct ScanRow {
    pub s1: f64,
    pub s2: f64,
    pub f_exact: f64,
    pub f_tilde: f64,
    pub eta: f64,
}

/// Relative-error table of the surrogate over the window.
pub struct ErrorScan {
    pub rows: Vec<ScanRow>,
    pub max_eta: f64,
    pub max_at: (f64, f64),
}

impl ErrorScan {
    pub fn write_csv<W: IoWrite>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "s1,s2,f_exact,f_tilde,eta")?;
        for r in &self.rows {
            writeln!(w, "{},{},{},{},{}", r.s1, r.s2, r.f_exact, r.f_tilde, r.eta)?;
        }
        Ok(())
    }
}

/// Kernel surrogate over the whole window: fits are computed on an `s2`
/// grid (step 0.01, refined to 0.0025 above 0.88 where the window
/// shortens quickly) and evaluated by linear interpolation in `s2`
/// between the two bracketing fits. Grid fits are write-once and
/// thread-safe.
pub struct Surrogate {
    grid: Vec<f64>,
    fits: Vec<OnceLock<RationalFit>>,
}

impl Default for Surrogate {
    fn default() -> Self {
        Self::new()
    }
}

impl Surrogate {
    pub fn new() -> Self {
        // Step 0.005, refined to 0.0025 above 0.8 where the window tightens
        // against the boundary and the fits vary quickly with s2.
        let mut grid = Vec::new();
        let mut v = S2_MIN;
        while v < 0.80 - 1e-12 {
            grid.push(v);
            v += 0.005;
        }
        let mut v = 0.80;
        while v <= S2_MAX + 1e-12 {
            grid.push(v);
            v += 0.0025;
        }
        *grid.last_mut().expect("grid nonempty") = S2_MAX;
        let fits = grid.iter().map(|_| OnceLock::new()).collect();
        Surrogate { grid, fits }
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    fn fit_at(&self, index: usize) -> Result<&RationalFit> {
        // get_or_init would poison on error; compute first, then race to
        // publish (losers discard their copy, which is identical anyway).
        if let Some(fit) = self.fits[index].get() {
            return Ok(fit);
        }
        let fit = RationalFit::compute(self.grid[index])?;
        let _ = self.fits[index].set(fit);
        Ok(self.fits[index].get().expect("just set"))
    }

    fn check_window(&self, s1: f64, s2: f64) -> Result<()> {
        if !(S2_MIN - 1e-12..=S2_MAX + 1e-12).contains(&s2) {
            return Err(Error::OutsideWindow(format!(
                "s2 = {s2} outside [{S2_MIN}, {S2_MAX}]"
            )));
        }
        let (lo, hi) = fit_window(s2.clamp(S2_MIN, S2_MAX))?;
        if s1 < lo - 1e-12 || s1 > hi + 1e-12 {
            return Err(Error::OutsideWindow(format!(
                "s1 = {s1} outside [{lo}, {hi:.6}] at s2 = {s2}"
            )));
        }
        Ok(())
    }

    /// Surrogate value at `(s1, s2)` in the window.
    ///
    /// Off-grid `s2` interpolates linearly between the two bracketing grid
    /// fits, each evaluated at the abscissa with the same relative window
    /// position as the query. Aligning the windows keeps the boundary pole
    /// in the same relative place on both sides, which the raw abscissa
    /// does not (the window top moves with `s2`).
    pub fn eval(&self, s1: f64, s2: f64) -> Result<f64> {
        self.check_window(s1, s2)?;
        let s2 = s2.clamp(S2_MIN, S2_MAX);
        let hi_idx = match self.grid.binary_search_by(|g| g.partial_cmp(&s2).unwrap()) {
            Ok(exact) => return Ok(self.fit_at(exact)?.eval(s1)),
            Err(i) => i.min(self.grid.len() - 1),
        };
        let lo_idx = hi_idx.saturating_sub(1);
        if lo_idx == hi_idx {
            return Ok(self.fit_at(hi_idx)?.eval(s1));
        }
        let (g_lo, g_hi) = (self.grid[lo_idx], self.grid[hi_idx]);
        let t = (s2 - g_lo) / (g_hi - g_lo);
        let (edge, top) = fit_window(s2)?;
        let u = ((s1 - edge) / (top - edge)).clamp(0.0, 1.0);
        let fit_lo = self.fit_at(lo_idx)?;
        let fit_hi = self.fit_at(hi_idx)?;
        let lo = fit_lo.eval(edge + u * (fit_lo.window.1 - edge));
        let hi = fit_hi.eval(edge + u * (fit_hi.window.1 - edge));
        Ok((1.0 - t) * lo + t * hi)
    }

    /// Fast marginal deviations: the exact variance sum with the surrogate
    /// in place of the kernel. Every mode must fall inside the window;
    /// offenders are listed by mode index.
    pub fn sigma_vector(
        &self,
        spectrum: &Spectrum,
        g: f64,
        tau: f64,
        beta: f64,
    ) -> Result<MarginalDeviations> {
        if !(tau > 0.0) {
            return Err(Error::InvalidParameter(format!("tau = {tau} must be > 0")));
        }
        let s2 = beta * tau;
        let n = spectrum.len();
        let offenders: Vec<String> = spectrum.eigenvalues()[1..]
            .iter()
            .enumerate()
            .filter(|(_, &l)| self.check_window(l * tau, s2).is_err())
            .map(|(i, &l)| format!("mode {} at s1 = {:.6}", i + 2, l * tau))
            .collect();
        if !offenders.is_empty() {
            return Err(Error::OutsideWindow(offenders.join(", ")));
        }

        let mut values = Vec::with_capacity(n - 1);
        for &lambda in &spectrum.eigenvalues()[1..] {
            values.push(self.eval(lambda * tau, s2)?);
        }
        let prefactor = g * g * tau.powi(3) / (2.0 * std::f64::consts::PI);
        let sigma = (0..n - 1)
            .map(|pair| {
                let sum: f64 = (1..n)
                    .map(|j| {
                        let w = spectrum.pair_weight(j, pair);
                        w * w * values[j - 1]
                    })
                    .sum();
                (prefactor * sum).sqrt()
            })
            .collect();
        Ok(MarginalDeviations {
            sigma,
            g,
            tau,
            beta,
        })
    }

    /// Average of the pre-split numerator coefficients over the grid fits
    /// where the dropped coefficients are genuinely negligible; in that
    /// regime (most of the `s2` range, away from 0.9) the kept
    /// coefficients are close to constant.
    pub fn averaged_alpha(&self) -> Result<[f64; 8]> {
        let fits: Vec<&RationalFit> = (0..self.grid.len())
            .map(|i| self.fit_at(i))
            .collect::<Result<_>>()?;
        let kept: Vec<&&RationalFit> = fits
            .iter()
            .filter(|f| {
                f.truncation_ok
                    && f.alpha[5].abs() < 2e-3
                    && f.alpha[6].abs() < 1e-3
                    && f.alpha[7].abs() < 1e-4
            })
            .collect();
        let mut avg = [0.0f64; 8];
        for fit in &kept {
            for (a, &v) in avg.iter_mut().zip(&fit.alpha) {
                *a += v;
            }
        }
        for a in avg.iter_mut() {
            *a /= kept.len() as f64;
        }
        Ok(avg)
    }

    /// Relative-error grid over the window: `m1` points across each `s1`
    /// window, `m2` points across `s2`.
    pub fn error_scan(&self, m1: usize, m2: usize) -> Result<ErrorScan> {
        if m1 < 10 || m2 < 10 {
            return Err(Error::InvalidParameter(format!(
                "scan grid must be at least 10 x 10, got {m1} x {m2}"
            )));
        }
        // Touch all fits up front so the scan parallelizes cleanly.
        for i in 0..self.grid.len() {
            self.fit_at(i)?;
        }
        let rows: Vec<ScanRow> = (0..m2)
            .into_par_iter()
            .flat_map(|iy| {
                let s2 = S2_MIN + (S2_MAX - S2_MIN) * iy as f64 / (m2 - 1) as f64;
                let (lo, hi) = fit_window(s2).expect("scan s2 in domain");
                (0..m1)
                    .map(|ix| {
                        let s1 = lo + (hi - lo) * ix as f64 / (m1 - 1) as f64;
                        let f_exact = kernel(s1, s2).expect("window is inside the region").value;
                        let f_tilde = self.eval(s1, s2).expect("point is inside the window");
                        ScanRow {
                            s1,
                            s2,
                            f_exact,
                            f_tilde,
                            eta: (1.0 - f_tilde / f_exact).abs(),
                        }
                    })
                    .collect::<Vec<_>>()
            })
            .collect();
        let best = rows
            .iter()
            .max_by(|a, b| a.eta.partial_cmp(&b.eta).unwrap())
            .expect("scan nonempty");
        Ok(ErrorScan {
            max_eta: best.eta,
            max_at: (best.s1, best.s2),
            rows,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::WeightedGraph;
    use crate::variance;

    #[test]
    fn boundary_angle_residual_and_monotonicity() {
        for s2 in [0.1, 0.3, 0.5, 0.7, 0.9] {
            let a = boundary_angle(s2).unwrap();
            assert!((a / a.tan() - s2).abs() <= 1e-12);
        }
        assert!(boundary_angle(0.1).unwrap() > boundary_angle(0.9).unwrap());
        assert!(boundary_angle(0.05).is_err());
        assert!(boundary_angle(0.95).is_err());
    }

    #[test]
    fn window_stays_inside_region() {
        let mut s2 = S2_MIN;
        while s2 <= S2_MAX {
            let (lo, hi) = fit_window(s2).unwrap();
            assert!(hi > lo);
            assert!(stability::in_region(lo, s2));
            assert!(stability::in_region(hi, s2));
            s2 += 0.05;
        }
    }

    #[test]
    fn fit_reproduces_reference_coefficients() {
        let fit = RationalFit::compute(0.5).unwrap();
        assert!(fit.truncation_ok);
        assert!(
            (fit.alpha[2] + 0.0742).abs() <= 0.15 * 0.0742,
            "{}",
            fit.alpha[2]
        );
        assert!(
            (fit.alpha[3] - 0.0198).abs() <= 0.15 * 0.0198,
            "{}",
            fit.alpha[3]
        );
        assert!(
            (fit.alpha[4] + 0.0036).abs() <= 0.15 * 0.0036,
            "{}",
            fit.alpha[4]
        );
        // Dropped coefficients are negligible in mid-range.
        assert!(fit.alpha[5].abs() < 1e-3);
        assert!(fit.alpha[6].abs() < 1e-3);
        assert!(fit.alpha[7].abs() < 1e-4);
    }

    #[test]
    fn split_identity_holds_pointwise() {
        let fit = RationalFit::compute(0.4).unwrap();
        let q = [
            fit.alpha[0],
            fit.alpha[1],
            fit.alpha[2],
            fit.alpha[3],
            fit.alpha[4],
        ];
        let (lo, hi) = fit.window;
        for i in 0..50 {
            let x = lo + (hi - lo) * i as f64 / 49.0;
            let direct = q.iter().rev().fold(0.0, |acc, &c| acc * x + c) / (x * x * (x - fit.pole));
            let split = fit.eval(x);
            assert!(
                (direct - split).abs() <= 1e-10 * direct.abs().max(1.0),
                "x={x}: {direct} vs {split}"
            );
        }
    }

    #[test]
    fn projection_residual_is_orthogonal() {
        // <f - P, psi_k> = 0 for the full projection: equivalently the
        // moments of the residual against every raw basis function lie in
        // the span's orthogonal complement. Checked via a fresh Gram solve.
        let s2 = 0.3;
        let fit = RationalFit::compute(s2).unwrap();
        let (gl_nodes, gl_weights) = gl64();
        let (lo, hi) = fit.window;
        let mid = 0.5 * (lo + hi);
        let half = 0.5 * (hi - lo);
        // Full-projection value from alpha (no truncation).
        let p_eval = |x: f64| {
            let q: f64 = fit.alpha.iter().rev().fold(0.0, |acc, &c| acc * x + c);
            q / (x * x * (x - fit.pole))
        };
        for k in 0..FULL_BASIS {
            let mut resid = 0.0;
            for (&t, &w) in gl_nodes.iter().zip(gl_weights) {
                let x = mid + half * t;
                let fexact = kernel(x, s2).unwrap().value;
                resid += half * w * (fexact - p_eval(x)) * basis_value(true, k, x, fit.pole);
            }
            assert!(resid.abs() < 1e-7, "basis {k}: residual {resid}");
        }
    }

    #[test]
    fn orthonormality_of_gram_schmidt_vectors() {
        // Rebuild the orthonormal set and verify the Gram matrix is the
        // identity under the window inner product.
        let s2 = 0.5;
        let fit = RationalFit::compute(s2).unwrap();
        let (gl_nodes, gl_weights) = gl64();
        let (lo, hi) = fit.window;
        let mid = 0.5 * (lo + hi);
        let half = 0.5 * (hi - lo);
        let nodes: Vec<f64> = gl_nodes.iter().map(|&t| mid + half * t).collect();
        let weights: Vec<f64> = gl_weights.iter().map(|&w| half * w).collect();
        let f_nodes: Vec<f64> = nodes
            .iter()
            .map(|&x| kernel(x, s2).unwrap().value)
            .collect();
        // project() errors on rank loss; success plus the residual test
        // above pins the subspace. Here check orthonormality directly.
        let raw = project(s2, true, fit.pole, &nodes, &weights, &f_nodes).unwrap();
        assert_eq!(raw.len(), FULL_BASIS);
        // Recompute the orthonormal set the same way project does.
        let dim = FULL_BASIS;
        let mut gram = vec![0.0; dim * dim];
        for i in 0..dim {
            for j in 0..dim {
                let mut acc = 0.0;
                for (idx, &x) in nodes.iter().enumerate() {
                    acc += weights[idx]
                        * basis_value(true, i, x, fit.pole)
                        * basis_value(true, j, x, fit.pole);
                }
                gram[i * dim + j] = acc;
            }
        }
        let bilinear = |u: &[f64], v: &[f64]| -> f64 {
            let mut acc = 0.0;
            for i in 0..dim {
                for j in 0..dim {
                    acc += u[i] * gram[i * dim + j] * v[j];
                }
            }
            acc
        };
        let mut ortho: Vec<Vec<f64>> = Vec::new();
        for k in 0..dim {
            let mut v = vec![0.0; dim];
            v[k] = 1.0;
            for _ in 0..2 {
                for q in &ortho {
                    let proj = bilinear(&v, q);
                    for i in 0..dim {
                        v[i] -= proj * q[i];
                    }
                }
            }
            let norm = bilinear(&v, &v).sqrt();
            for x in v.iter_mut() {
                *x /= norm;
            }
            ortho.push(v);
        }
        for a in 0..dim {
            for b in 0..dim {
                let want = if a == b { 1.0 } else { 0.0 };
                let got = bilinear(&ortho[a], &ortho[b]);
                assert!(
                    (got - want).abs() < 1e-8,
                    "gram[{a}][{b}] = {got}, want {want}"
                );
            }
        }
    }

    #[test]
    fn surrogate_tracks_kernel_at_midrange() {
        let surrogate = Surrogate::new();
        for &(s1, s2) in &[(0.3, 0.25), (0.8, 0.45), (1.2, 0.15), (0.15, 0.85)] {
            let exact = kernel(s1, s2).unwrap().value;
            let approx = surrogate.eval(s1, s2).unwrap();
            let eta = (1.0 - approx / exact).abs();
            assert!(eta <= 1e-3, "eta({s1},{s2}) = {eta}");
            assert!(approx > 0.0);
        }
    }

    #[test]
    fn surrogate_minimum_location_matches_kernel() {
        // Along s2 = 0.5 the two curves dip at the same place.
        let surrogate = Surrogate::new();
        let (lo, hi) = fit_window(0.5).unwrap();
        let mut best_exact = (f64::INFINITY, 0.0);
        let mut best_approx = (f64::INFINITY, 0.0);
        for i in 0..400 {
            let s1 = lo + (hi - lo) * i as f64 / 399.0;
            let e = kernel(s1, 0.5).unwrap().value;
            let a = surrogate.eval(s1, 0.5).unwrap();
            if e < best_exact.0 {
                best_exact = (e, s1);
            }
            if a < best_approx.0 {
                best_approx = (a, s1);
            }
        }
        assert!((best_exact.1 - best_approx.1).abs() <= 0.02);
    }

    #[test]
    fn surrogate_rejects_out_of_window_points() {
        let surrogate = Surrogate::new();
        assert!(matches!(
            surrogate.eval(0.05, 0.5),
            Err(Error::OutsideWindow(_))
        ));
        assert!(surrogate.eval(1.3, 0.5).is_err());
        assert!(surrogate.eval(0.5, 0.95).is_err());
    }

    #[test]
    fn surrogate_sigma_matches_exact_sigma() {
        let n = 5;
        let tau = 0.25;
        let beta = 1.0;
        // Complete graph tuned so lambda tau sits mid-window.
        let k = 0.8 / (n as f64 * tau);
        let graph = WeightedGraph::complete(n, k).unwrap();
        let spectrum = Spectrum::of_graph(&graph).unwrap();
        let surrogate = Surrogate::new();
        let fast = surrogate.sigma_vector(&spectrum, 1.0, tau, beta).unwrap();
        let exact = variance::sigma_vector(&spectrum, 1.0, tau, beta).unwrap();
        for (a, b) in fast.sigma.iter().zip(&exact.sigma) {
            assert!((a / b - 1.0).abs() <= 1e-3, "{a} vs {b}");
        }
    }

    #[test]
    fn surrogate_sigma_names_offending_modes() {
        let graph = WeightedGraph::path(4, 1.0).unwrap();
        let spectrum = Spectrum::of_graph(&graph).unwrap();
        // Path lambda_2 is small: lambda_2 tau falls below the window.
        let err = Surrogate::new()
            .sigma_vector(&spectrum, 1.0, 0.1, 2.0)
            .unwrap_err();
        match err {
            Error::OutsideWindow(msg) => assert!(msg.contains("mode 2"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn error_scan_stable_under_refinement() {
        let surrogate = Surrogate::new();
        let coarse = surrogate.error_scan(12, 10).unwrap();
        let fine = surrogate.error_scan(24, 20).unwrap();
        assert!(
            fine.max_eta <= 2.0 * coarse.max_eta,
            "refinement jumped from {} to {}",
            coarse.max_eta,
            fine.max_eta
        );
    }

    #[test]
    fn error_scan_small_grid() {
        let surrogate = Surrogate::new();
        let scan = surrogate.error_scan(12, 10).unwrap();
        assert_eq!(scan.rows.len(), 120);
        assert!(scan.rows.iter().all(|r| r.eta >= 0.0));
        assert!(
            scan.max_eta <= 1e-3,
            "max eta {} at {:?}",
            scan.max_eta,
            scan.max_at
        );
        assert!(surrogate.error_scan(5, 10).is_err());
        let mut csv = Vec::new();
        scan.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("s1,s2,f_exact,f_tilde,eta\n"));
        assert_eq!(text.lines().count(), 121);
    }
}
