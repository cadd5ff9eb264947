//! Closed-form value-at-risk of inter-vehicle collision and detachment,
//! joint-risk boxes, fundamental limits, and the risk-connectivity
//! trade-off bound.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Mutex, OnceLock};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::optim::nelder_mead_2d;
use crate::special::erf_inv;
use crate::stability::{self, max_lambda_tau};
use crate::variance::{interior_grid, kernel, sigma_floor, MarginalDeviations};

/// Tri-state risk value. `Finite(v)` always carries `v > 0`; a finite
/// expression that evaluates to zero collapses to `Zero`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RiskValue {
    Zero,
    Finite(f64),
    Infinite,
}

impl RiskValue {
    fn from_finite(v: f64) -> Self {
        if v > 0.0 {
            RiskValue::Finite(v)
        } else {
            RiskValue::Zero
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, RiskValue::Finite(_))
    }

    pub fn finite_value(&self) -> Option<f64> {
        match self {
            RiskValue::Finite(v) => Some(*v),
            _ => None,
        }
    }

    /// Numeric view with `Zero -> 0` and `Infinite -> +inf`.
    pub fn as_f64(&self) -> f64 {
        match self {
            RiskValue::Zero => 0.0,
            RiskValue::Finite(v) => *v,
            RiskValue::Infinite => f64::INFINITY,
        }
    }
}

impl PartialOrd for RiskValue {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        self.as_f64().partial_cmp(&other.as_f64())
    }
}

impl std::fmt::Display for RiskValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RiskValue::Zero => write!(f, "0"),
            RiskValue::Finite(v) => write!(f, "{v}"),
            RiskValue::Infinite => write!(f, "inf"),
        }
    }
}

/// Parameters of a systemic event family.
///
/// Collision super-sets are `(-inf, d/(delta + c))`; detachment super-sets
/// are `(a d - 1/(delta + h), +inf)`. Both are nested decreasing in
/// `delta`, which is what makes the quantile risk well defined.
#[derive(Clone, Copy, Debug)]
pub enum EventSpec {
    Collision {
        /// Target spacing (> 0).
        d: f64,
        /// Collision tolerance (>= 1); `c = 1` alarms on any shortfall.
        c: f64,
        /// Confidence cutoff in (0, 1).
        epsilon: f64,
    },
    Detachment {
        /// Target spacing (> 0).
        d: f64,
        /// Communication range multiplier (>= 1), range `r* = a d`.
        a: f64,
        /// Alarm sharpness (> 0); larger `h` narrows the alarm zone.
        h: f64,
        /// Confidence cutoff in (0, 1).
        epsilon: f64,
    },
}

impl EventSpec {
    pub fn collision(d: f64, c: f64, epsilon: f64) -> Result<Self> {
        if !(d > 0.0) {
            return Err(Error::InvalidSpec(format!("d = {d} must be > 0")));
        }
        if !(c >= 1.0) {
            return Err(Error::InvalidSpec(format!("c = {c} must be >= 1")));
        }
        check_epsilon(epsilon)?;
        Ok(EventSpec::Collision { d, c, epsilon })
    }

    pub fn detachment(d: f64, a: f64, h: f64, epsilon: f64) -> Result<Self> {
        if !(d > 0.0) {
            return Err(Error::InvalidSpec(format!("d = {d} must be > 0")));
        }
        if !(a >= 1.0) {
            return Err(Error::InvalidSpec(format!("a = {a} must be >= 1")));
        }
        if !(h > 0.0) {
            return Err(Error::InvalidSpec(format!("h = {h} must be > 0")));
        }
        check_epsilon(epsilon)?;
        Ok(EventSpec::Detachment { d, a, h, epsilon })
    }

    pub fn epsilon(&self) -> f64 {
        match self {
            EventSpec::Collision { epsilon, .. } | EventSpec::Detachment { epsilon, .. } => {
                *epsilon
            }
        }
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Self {
        match *self {
            EventSpec::Collision { d, c, .. } => EventSpec::Collision { d, c, epsilon },
            EventSpec::Detachment { d, a, h, .. } => EventSpec::Detachment { d, a, h, epsilon },
        }
    }

    /// Risk of this event for a pair whose steady-state distance has
    /// standard deviation `sigma`.
    pub fn risk(&self, sigma: f64) -> RiskValue {
        match *self {
            EventSpec::Collision { d, c, epsilon } => collision_risk_raw(sigma, d, c, epsilon),
            EventSpec::Detachment { d, a, h, epsilon } => {
                detachment_risk_raw(sigma, d, a, h, epsilon)
            }
        }
    }
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidSpec(format!(
            "epsilon = {epsilon} must lie in (0, 1)"
        )));
    }
    Ok(())
}

/// `kappa = erf^{-1}(1 - 2 epsilon)`, the half-confidence quantile factor.
/// Defined (positive) for `epsilon` in (0, 1/2).
pub fn kappa(epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon < 0.5) {
        return Err(Error::OutOfDomain(format!(
            "kappa defined for epsilon in (0, 0.5), got {epsilon}"
        )));
    }
    Ok(erf_inv(1.0 - 2.0 * epsilon))
}

fn collision_risk_raw(sigma: f64, d: f64, c: f64, epsilon: f64) -> RiskValue {
    if epsilon >= 0.5 {
        return RiskValue::Zero;
    }
    let k = erf_inv(1.0 - 2.0 * epsilon);
    let scale = d / (k * 2f64.sqrt());
    if sigma <= scale * (c - 1.0) / c {
        RiskValue::Zero
    } else if sigma >= scale {
        RiskValue::Infinite
    } else {
        RiskValue::from_finite(d / (d - k * sigma * 2f64.sqrt()) - c)
    }
}

fn detachment_risk_raw(sigma: f64, d: f64, a: f64, h: f64, epsilon: f64) -> RiskValue {
    if epsilon >= 0.5 {
        return RiskValue::Zero;
    }
    let k = erf_inv(1.0 - 2.0 * epsilon);
    let gap = (a - 1.0) * d;
    // a = 1 leaves no slack: any fluctuation reaches past the range, and
    // even sigma = 0 sits on the alarm threshold, so the risk is infinite.
    if sigma <= (gap - 1.0 / h) / (k * 2f64.sqrt()) {
        RiskValue::Zero
    } else if sigma >= gap / (k * 2f64.sqrt()) {
        RiskValue::Infinite
    } else {
        RiskValue::from_finite(1.0 / (gap - 2f64.sqrt() * k * sigma) - h)
    }
}

/// Risk of collision between a pair with deviation `sigma`.
pub fn collision_risk(sigma: f64, spec: &EventSpec) -> Result<RiskValue> {
    match spec {
        EventSpec::Collision { .. } => Ok(spec.risk(sigma)),
        EventSpec::Detachment { .. } => Err(Error::InvalidSpec(
            "collision_risk needs a Collision spec".into(),
        )),
    }
}

/// Risk of detachment between a pair with deviation `sigma`.
pub fn detachment_risk(sigma: f64, spec: &EventSpec) -> Result<RiskValue> {
    match spec {
        EventSpec::Detachment { .. } => Ok(spec.risk(sigma)),
        EventSpec::Collision { .. } => Err(Error::InvalidSpec(
            "detachment_risk needs a Detachment spec".into(),
        )),
    }
}

/// Elementwise risk across all `n - 1` consecutive pairs.
pub fn risk_vector(md: &MarginalDeviations, spec: &EventSpec) -> Vec<RiskValue> {
    md.sigma.iter().map(|&s| spec.risk(s)).collect()
}

/// Per-pair interval with possibly infinite endpoints.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RiskInterval {
    pub lo: RiskValue,
    pub hi: RiskValue,
}

impl RiskInterval {
    pub fn contains(&self, v: f64) -> bool {
        self.lo.as_f64() <= v && v <= self.hi.as_f64()
    }
}

/// Coordinatewise boxes bounding the joint risks.
///
/// The all-pairs simultaneous event is bracketed by `v_box[i] = [0,
/// R_eps^i]`; the some-pair event by `w_box[i] = [R_eps^i, R_{eps_i}^i]`
/// for any positive split `eps_1 + ... + eps_{n-1} = eps` (risk is
/// non-increasing in the cutoff, so the upper endpoint dominates). The
/// default split is uniform.
pub struct JointRiskBoxes {
    pub v_box: Vec<RiskInterval>,
    pub w_box: Vec<RiskInterval>,
}

pub fn joint_risk_boxes(
    md: &MarginalDeviations,
    spec: &EventSpec,
    split: Option<&[f64]>,
) -> Result<JointRiskBoxes> {
    let q = md.pair_count();
    let epsilon = spec.epsilon();
    let uniform: Vec<f64>;
    let split = match split {
        Some(s) => {
            if s.len() != q {
                return Err(Error::InvalidSplit(format!(
                    "split has {} entries for {} pairs",
                    s.len(),
                    q
                )));
            }
            if s.iter().any(|&e| !(e > 0.0)) {
                return Err(Error::InvalidSplit("split entries must be positive".into()));
            }
            let total: f64 = s.iter().sum();
            if (total - epsilon).abs() > 1e-12 {
                return Err(Error::InvalidSplit(format!(
                    "split sums to {total}, expected epsilon = {epsilon}"
                )));
            }
            s
        }
        None => {
            uniform = vec![epsilon / q as f64; q];
            &uniform
        }
    };

    let marginal = risk_vector(md, spec);
    let v_box = marginal
        .iter()
        .map(|&r| RiskInterval {
            lo: RiskValue::Zero,
            hi: r,
        })
        .collect();
    let w_box = marginal
        .iter()
        .zip(split)
        .zip(&md.sigma)
        .map(|((&r, &eps_i), &sigma)| RiskInterval {
            lo: r,
            hi: spec.with_epsilon(eps_i).risk(sigma),
        })
        .collect();
    Ok(JointRiskBoxes { v_box, w_box })
}

/// Best-achievable collision risk over all communication topologies: the
/// closed-form risk evaluated at the deviation floor `sigma*`. The middle
/// branch constant is recomputed from the kernel minimum
/// (`sqrt(2 f_min / pi)` about 4.026) rather than rounded.
pub fn collision_risk_floor(g: f64, tau: f64, spec: &EventSpec) -> Result<RiskValue> {
    match spec {
        EventSpec::Collision { .. } => Ok(spec.risk(sigma_floor(g, tau))),
        EventSpec::Detachment { .. } => Err(Error::InvalidSpec(
            "collision_risk_floor needs a Collision spec".into(),
        )),
    }
}

/// Detachment analogue of [`collision_risk_floor`].
pub fn detachment_risk_floor(g: f64, tau: f64, spec: &EventSpec) -> Result<RiskValue> {
    match spec {
        EventSpec::Detachment { .. } => Ok(spec.risk(sigma_floor(g, tau))),
        EventSpec::Collision { .. } => Err(Error::InvalidSpec(
            "detachment_risk_floor needs a Detachment spec".into(),
        )),
    }
}

/// `min_{j in {2..n}} inf_S f(s1,s2) [ (j-1)/s1 + (n-j)/theta(s2) ]^{2/m}`.
///
/// The bracket is linear in `j` at a fixed point, so the inner minimum over
/// `j` is attained at `j = 2` or `j = n`; both branches are scanned on the
/// shared kernel grid and polished locally. Results are cached per `(n, m)`
/// because the trade-off series needs up to 200 of these.
fn f_lower_m(n: usize, m: usize) -> f64 {
    static CACHE: OnceLock<Mutex<HashMap<(usize, usize), f64>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(&hit) = cache.lock().expect("f_lower_m cache").get(&(n, m)) {
        return hit;
    }

    let exponent = 2.0 / m as f64;
    let weight = |j: usize, s1: f64, s2: f64| -> f64 {
        let theta = max_lambda_tau(s2).expect("s2 interior");
        ((j - 1) as f64 / s1 + (n - j) as f64 / theta).powf(exponent)
    };
    let objective = |j: usize, s1: f64, s2: f64| -> f64 {
        if stability::region_margin(s1, s2) < 1e-8 || s2 >= 1.0 - 1e-8 {
            return f64::INFINITY;
        }
        match kernel(s1, s2) {
            Ok(k) => k.value * weight(j, s1, s2),
            Err(_) => f64::INFINITY,
        }
    };

    let grid = interior_grid();
    let mut best = f64::INFINITY;
    for &j in &[2usize, n] {
        let seed = grid
            .iter()
            .map(|p| (p.s1, p.s2, p.value * weight(j, p.s1, p.s2)))
            .min_by(|a, b| a.2.partial_cmp(&b.2).unwrap())
            .expect("grid nonempty");
        let refined = nelder_mead_2d(
            &|s1, s2| objective(j, s1, s2),
            (seed.0, seed.1),
            (0.02, 0.02),
            1e-6,
            300,
        );
        best = best.min(refined.value.min(seed.2));
        if n == 2 {
            break; // j = 2 and j = n coincide
        }
    }

    cache.lock().expect("f_lower_m cache").insert((n, m), best);
    best
}

/// Floor of the squared-risk numerator: the minimum of
/// `((1-c) + c sqrt(2) kappa sigma / d)^2` over deviations achievable above
/// the floor `sigma*`.
fn risk_numerator_floor(c: f64, d: f64, kappa: f64, sigma_star: f64) -> f64 {
    let knot = (c - 1.0) / c * d / (2f64.sqrt() * kappa);
    let s = knot.max(sigma_star);
    let t = 2f64.sqrt() * kappa / d;
    (1.0 - c) * (1.0 - c) + 2.0 * (1.0 - c) * c * t * s + c * c * t * t * s * s
}

/// Trade-off between collision risk and connectivity: any stable platoon
/// with all pairs in the finite branch satisfies
/// `R_eps^{C,i} * sqrt(resistance) > tradeoff_bound(...)`.
///
/// The series is truncated once a term drops below 1e-12 of the partial
/// sum, capped at m = 200; terms still growing at the cap signal that the
/// finite-branch hypothesis fails and yield `SeriesDivergence`.
pub fn tradeoff_bound(n: usize, g: f64, tau: f64, beta: f64, spec: &EventSpec) -> Result<f64> {
    let (d, c, epsilon) = match spec {
        EventSpec::Collision { d, c, epsilon } => (*d, *c, *epsilon),
        EventSpec::Detachment { .. } => {
            return Err(Error::InvalidSpec(
                "tradeoff_bound needs a Collision spec".into(),
            ))
        }
    };
    if n < 2 {
        return Err(Error::InvalidParameter(format!("n = {n} must be >= 2")));
    }
    if !(tau > 0.0) {
        return Err(Error::OutOfDomain(format!("tau = {tau} must be > 0")));
    }
    let bt = beta * tau;
    if !(bt > 0.0 && bt < 1.0) {
        return Err(Error::OutOfDomain(format!(
            "beta tau = {bt} must lie in (0, 1)"
        )));
    }
    let k = kappa(epsilon)?;
    let sigma_star = sigma_floor(g, tau);
    let e_floor = risk_numerator_floor(c, d, k, sigma_star);

    let base = g.abs() * tau.powf(1.5) * k / (d * PI.sqrt());
    const MAX_TERMS: usize = 200;

    // Pre-fill the per-m minimizations in parallel; the sum itself is
    // accumulated in ascending m for reproducibility.
    let ms: Vec<usize> = (1..=MAX_TERMS).collect();
    ms.par_iter().for_each(|&m| {
        let _ = f_lower_m(n, m);
    });

    let mut series = 0.0f64;
    let mut prev_term = f64::INFINITY;
    let mut m = 1usize;
    loop {
        let fm = f_lower_m(n, m);
        let term = 2f64.powf(m as f64 / 2.0)
            * (m as f64 + 1.0)
            * base.powi(m as i32)
            * fm.powf(m as f64 / 2.0);
        series += term;
        if term < 1e-12 * series {
            break;
        }
        if m == MAX_TERMS {
            if term >= prev_term {
                return Err(Error::SeriesDivergence(m));
            }
            break;
        }
        prev_term = term;
        m += 1;
    }

    let nn = n as f64;
    Ok((nn * tau * e_floor * (2.0 * (nn - 1.0) / PI + series)).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Spectrum, WeightedGraph};
    use crate::special::erf;
    use crate::variance::sigma_vector;

    const SQRT2: f64 = std::f64::consts::SQRT_2;

    #[test]
    fn kappa_thresholds_match_reference() {
        // d / (kappa sqrt 2) for d = 1.
        let k01 = kappa(0.01).unwrap();
        assert!((1.0 / (k01 * SQRT2) - 0.4299).abs() <= 1e-4);
        let k05 = kappa(0.05).unwrap();
        assert!((1.0 / (k05 * SQRT2) - 0.6080).abs() <= 1e-4);
        // Residual contract.
        assert!((erf(k01) - 0.98).abs() <= 1e-13);
        // kappa -> 0 as epsilon -> 1/2.
        assert!(kappa(0.499_999).unwrap() < 1e-3);
        assert!(kappa(0.5).is_err());
        assert!(kappa(0.0).is_err());
    }

    #[test]
    fn collision_risk_branches() {
        let spec = EventSpec::collision(1.0, 1.0, 0.01).unwrap();
        let k = kappa(0.01).unwrap();
        let scale = 1.0 / (k * SQRT2);
        assert_eq!(spec.risk(0.0), RiskValue::Zero);
        assert_eq!(spec.risk(0.43), RiskValue::Infinite);
        assert_eq!(spec.risk(scale), RiskValue::Infinite);
        // sigma at half the infinite threshold gives exactly 1.
        match spec.risk(scale / 2.0) {
            RiskValue::Finite(v) => assert!((v - 1.0).abs() < 1e-12),
            other => panic!("expected Finite(1), got {other:?}"),
        }
        // epsilon >= 1/2 is always zero risk.
        let lax = EventSpec::collision(1.0, 1.0, 0.75).unwrap();
        assert_eq!(lax.risk(10.0), RiskValue::Zero);
    }

    #[test]
    fn collision_branch_continuity() {
        let spec = EventSpec::collision(2.0, 1.5, 0.05).unwrap();
        let k = kappa(0.05).unwrap();
        let zero_edge = 2.0 / (k * SQRT2) * 0.5 / 1.5;
        let inf_edge = 2.0 / (k * SQRT2);
        // Just above the zero edge the finite value is just above zero.
        match spec.risk(zero_edge + 1e-9) {
            RiskValue::Finite(v) => assert!(v > 0.0 && v < 1e-6),
            RiskValue::Zero => {} // collapse at machine precision is fine
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(spec.risk(zero_edge), RiskValue::Zero);
        // Just below the infinite edge the value is enormous.
        match spec.risk(inf_edge - 1e-9) {
            RiskValue::Finite(v) => assert!(v > 1e6),
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(spec.risk(inf_edge + 1e-9), RiskValue::Infinite);
    }

    #[test]
    fn detachment_risk_branches() {
        let spec = EventSpec::detachment(1.0, 2.0, 1.0, 0.05).unwrap();
        let k = kappa(0.05).unwrap();
        let inf_edge = 1.0 / (k * SQRT2);
        assert!((inf_edge - 0.6080).abs() < 1e-4);
        assert_eq!(spec.risk(inf_edge), RiskValue::Infinite);
        match spec.risk(inf_edge / 2.0) {
            RiskValue::Finite(v) => assert!((v - 1.0).abs() < 1e-12),
            other => panic!("expected Finite(1), got {other:?}"),
        }
        // (a-1)d - 1/h = 0 here, so sigma = 0 is exactly the zero edge.
        assert_eq!(spec.risk(0.0), RiskValue::Zero);
        // Wider slack: zero branch reachable for small positive sigma.
        let slack = EventSpec::detachment(1.0, 3.0, 1.0, 0.05).unwrap();
        assert_eq!(slack.risk(0.1), RiskValue::Zero);
        let edge = ((3.0 - 1.0) * 1.0 - 1.0) / (k * SQRT2);
        match slack.risk(edge + 1e-9) {
            RiskValue::Finite(v) => assert!((0.0..1e-6).contains(&v)),
            RiskValue::Zero => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn detachment_with_unit_range_is_infinite() {
        let spec = EventSpec::detachment(1.0, 1.0, 2.0, 0.1).unwrap();
        assert_eq!(spec.risk(0.5), RiskValue::Infinite);
        assert_eq!(spec.risk(0.0), RiskValue::Infinite);
    }

    #[test]
    fn risk_monotone_in_epsilon_and_sigma() {
        let d = 1.0;
        for &sigma in &[0.1, 0.2, 0.3, 0.4] {
            let r1 = EventSpec::collision(d, 1.0, 0.05).unwrap().risk(sigma);
            let r2 = EventSpec::collision(d, 1.0, 0.01).unwrap().risk(sigma);
            assert!(r2 >= r1, "smaller epsilon must not reduce risk");
            if r1.is_finite() && r2.is_finite() {
                assert!(r2.as_f64() > r1.as_f64());
            }
        }
        let spec = EventSpec::collision(d, 1.2, 0.05).unwrap();
        let mut prev = RiskValue::Zero;
        let mut s = 0.0;
        while s < 0.8 {
            let r = spec.risk(s);
            assert!(r >= prev);
            prev = r;
            s += 0.01;
        }
    }

    #[test]
    fn risk_vector_shapes() {
        let n = 5;
        let tau = 0.1;
        let beta = 2.2;
        let k = 1.111 / (n as f64 * tau);
        let graph = WeightedGraph::complete(n, k).unwrap();
        let spectrum = Spectrum::of_graph(&graph).unwrap();
        let md = sigma_vector(&spectrum, 1.0, tau, beta).unwrap();
        let spec = EventSpec::collision(1.0, 1.0, 0.01).unwrap();
        let risks = risk_vector(&md, &spec);
        assert_eq!(risks.len(), n - 1);
        for r in &risks {
            assert_eq!(*r, risks[0]);
        }
    }

    #[test]
    fn joint_boxes_default_split() {
        let md = MarginalDeviations {
            sigma: vec![0.1, 0.2, 0.3],
            g: 1.0,
            tau: 0.1,
            beta: 1.0,
        };
        let spec = EventSpec::collision(1.0, 1.0, 0.03).unwrap();
        let boxes = joint_risk_boxes(&md, &spec, None).unwrap();
        let marginal = risk_vector(&md, &spec);
        for (i, risk) in marginal.iter().enumerate() {
            assert_eq!(boxes.v_box[i].lo, RiskValue::Zero);
            assert_eq!(boxes.v_box[i].hi, *risk);
            assert_eq!(boxes.w_box[i].lo, *risk);
            // Monotonicity: smaller per-pair cutoff, larger risk.
            assert!(boxes.w_box[i].hi >= boxes.w_box[i].lo);
        }
    }

    #[test]
    fn joint_boxes_single_pair_collapses() {
        let md = MarginalDeviations {
            sigma: vec![0.2],
            g: 1.0,
            tau: 0.1,
            beta: 1.0,
        };
        let spec = EventSpec::collision(1.0, 1.0, 0.05).unwrap();
        let boxes = joint_risk_boxes(&md, &spec, None).unwrap();
        assert_eq!(boxes.w_box[0].lo, boxes.w_box[0].hi);
    }

    #[test]
    fn joint_boxes_validate_split() {
        let md = MarginalDeviations {
            sigma: vec![0.1, 0.2],
            g: 1.0,
            tau: 0.1,
            beta: 1.0,
        };
        let spec = EventSpec::collision(1.0, 1.0, 0.1).unwrap();
        assert!(joint_risk_boxes(&md, &spec, Some(&[0.05, 0.05])).is_ok());
        assert!(joint_risk_boxes(&md, &spec, Some(&[0.03, 0.03])).is_err());
        assert!(joint_risk_boxes(&md, &spec, Some(&[0.1, -0.0])).is_err());
        assert!(joint_risk_boxes(&md, &spec, Some(&[0.1])).is_err());
    }

    #[test]
    fn risk_floor_branches() {
        let spec = EventSpec::collision(1.0, 1.0, 0.01).unwrap();
        // tau = 0: no floor.
        assert_eq!(
            collision_risk_floor(2.0, 0.0, &spec).unwrap(),
            RiskValue::Zero
        );
        // Inevitability shorthand: |g| tau^{3/2} >= d / (1.12 kappa)
        // implies infinite risk (the exact constant is ~4.03, so this is
        // comfortably sufficient).
        let k = kappa(0.01).unwrap();
        let gt = 1.0 / (1.12 * k);
        assert_eq!(
            collision_risk_floor(gt, 1.0, &spec).unwrap(),
            RiskValue::Infinite
        );
    }

    #[test]
    fn risk_floor_bounds_actual_risk() {
        let n = 6;
        let tau = 0.12;
        let beta = 1.8;
        let graph = WeightedGraph::perturbed_complete(n, 0.9, 0.3, 17).unwrap();
        let spectrum = Spectrum::of_graph(&graph).unwrap();
        let g = 0.9;
        let md = sigma_vector(&spectrum, g, tau, beta).unwrap();
        let spec = EventSpec::collision(1.0, 1.0, 0.01).unwrap();
        let floor = collision_risk_floor(g, tau, &spec).unwrap();
        for r in risk_vector(&md, &spec) {
            assert!(r >= floor, "{r:?} < {floor:?}");
        }
    }

    #[test]
    fn numerator_floor_special_cases() {
        let k = kappa(0.01).unwrap();
        // c = 1 kills the first two terms.
        let sigma_star = 0.1;
        let want = 2.0 * k * k * sigma_star * sigma_star;
        assert!((risk_numerator_floor(1.0, 1.0, k, sigma_star) - want).abs() < 1e-12);
        // sigma* below the knot makes the floor vanish (perfect square hits 0).
        assert!(risk_numerator_floor(2.0, 1.0, k, 0.0).abs() < 1e-12);
    }

    #[test]
    fn tradeoff_bound_zero_noise_limit() {
        // g -> 0 kills the series; the bound tends to
        // sqrt(n tau E (2(n-1)/pi)).
        let spec = EventSpec::collision(1.0, 1.0, 0.01).unwrap();
        let n = 5;
        let tau = 0.1;
        let beta = 2.0;
        let tiny = tradeoff_bound(n, 1e-12, tau, beta, &spec).unwrap();
        let k = kappa(0.01).unwrap();
        let e_floor = risk_numerator_floor(1.0, 1.0, k, sigma_floor(1e-12, tau));
        let want = ((n as f64) * tau * e_floor * (2.0 * (n as f64 - 1.0) / PI)).sqrt();
        assert!((tiny - want).abs() <= 1e-6 * want.max(1e-300));
    }

    #[test]
    fn tradeoff_bound_is_respected_on_an_instance() {
        let n = 5;
        let tau = 0.1;
        let beta = 2.2;
        let k = 1.111 / (n as f64 * tau);
        let graph = WeightedGraph::complete(n, k).unwrap();
        let spectrum = Spectrum::of_graph(&graph).unwrap();
        let g = 0.5;
        let md = sigma_vector(&spectrum, g, tau, beta).unwrap();
        let spec = EventSpec::collision(1.0, 1.0, 0.01).unwrap();
        let bound = tradeoff_bound(n, g, tau, beta, &spec).unwrap();
        let resistance = spectrum.effective_resistance();
        for r in risk_vector(&md, &spec) {
            let value = r.finite_value().expect("finite branch");
            assert!(
                value * resistance.sqrt() > bound,
                "{} * sqrt({}) <= {}",
                value,
                resistance,
                bound
            );
        }
    }

    #[test]
    fn tradeoff_bound_diverges_past_threshold() {
        // Large noise pushes sigma* past d/(kappa sqrt 2): terms grow.
        let spec = EventSpec::collision(1.0, 1.0, 0.01).unwrap();
        let err = tradeoff_bound(5, 50.0, 0.5, 1.0, &spec).unwrap_err();
        assert!(matches!(err, Error::SeriesDivergence(_)));
    }
}
