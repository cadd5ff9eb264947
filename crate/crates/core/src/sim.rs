//! Stochastic-delay simulation oracle: Euler-Maruyama integration of the
//! closed-loop platoon dynamics with a delay ring buffer, steady-state
//! sampling across seeded replicas, empirical value-at-risk, and
//! Monte-Carlo joint-event probabilities.
//!
//! The additive-noise update per step is
//!
//! ```text
//! x <- x + v dt
//! v <- v - [L v(t - tau) + beta L (x(t - tau) - dvec)] dt + g sqrt(dt) N(0, I)
//! ```
//!
//! with `dvec = d * (1, 2, ..., n)` the target spacing profile.

use std::io::Write as IoWrite;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::WeightedGraph;
use crate::risk::{EventSpec, RiskValue};

/// A platoon: communication graph plus control and noise parameters.
#[derive(Clone, Debug)]
pub struct PlatoonModel {
    pub graph: WeightedGraph,
    /// Position-feedback gain (> 0), 1/time.
    pub beta: f64,
    /// Communication delay (>= 0), time.
    pub tau: f64,
    /// Noise diffusion, distance / time^{3/2}.
    pub g: f64,
    /// Target spacing (> 0), distance.
    pub d: f64,
}

impl PlatoonModel {
    pub fn new(graph: WeightedGraph, beta: f64, tau: f64, g: f64, d: f64) -> Result<Self> {
        if !(beta > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "beta = {beta} must be > 0"
            )));
        }
        if tau < 0.0 {
            return Err(Error::InvalidParameter(format!("tau = {tau} must be >= 0")));
        }
        if !(d > 0.0) {
            return Err(Error::InvalidParameter(format!("d = {d} must be > 0")));
        }
        Ok(PlatoonModel {
            graph,
            beta,
            tau,
            g,
            d,
        })
    }

    pub fn vehicle_count(&self) -> usize {
        self.graph.vertex_count()
    }

    /// Target positions `d * (1, ..., n)`.
    pub fn spacing_profile(&self) -> Vec<f64> {
        (1..=self.vehicle_count())
            .map(|i| self.d * i as f64)
            .collect()
    }

    /// FNV-1a hash of the model parameters and weight matrix, for run
    /// metadata.
    pub fn hash_hex(&self) -> String {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |bytes: &[u8]| {
            for &b in bytes {
                h ^= b as u64;
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        };
        let n = self.vehicle_count();
        eat(&(n as u64).to_le_bytes());
        for v in [self.beta, self.tau, self.g, self.d] {
            eat(&v.to_bits().to_le_bytes());
        }
        for i in 0..n {
            for j in 0..n {
                eat(&self.graph.weight(i, j).to_bits().to_le_bytes());
            }
        }
        format!("{h:016x}")
    }
}

/// Standard normal draws via Box-Muller on a counter-style generator, so
/// streams are reproducible across platforms and thread counts.
struct NormalSource {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl NormalSource {
    fn new(seed: u64) -> Self {
        NormalSource {
            rng: ChaCha8Rng::seed_from_u64(seed),
            spare: None,
        }
    }

    fn next(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1: f64 = 1.0 - self.rng.random::<f64>(); // (0, 1]
        let u2: f64 = self.rng.random();
        let radius = (-2.0 * u1.ln()).sqrt();
        let angle = 2.0 * std::f64::consts::PI * u2;
        self.spare = Some(radius * angle.sin());
        radius * angle.cos()
    }
}

/// Sub-seed for one replica, derived with a splitmix-style scramble.
fn replica_seed(master: u64, replica: u64) -> u64 {
    let mut z = master ^ (replica.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn check_dt(dt: f64) -> Result<()> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidTimestep(format!("dt = {dt} must be > 0")));
    }
    Ok(())
}

/// Number of delay steps for `tau` at step `dt`, with a warning message
/// when `tau/dt` is not an integer within 1e-9 (relative).
fn delay_steps(tau: f64, dt: f64) -> Result<(usize, Option<String>)> {
    check_dt(dt)?;
    let ratio = tau / dt;
    let steps = ratio.round();
    let warning = if (ratio - steps).abs() > 1e-9 * ratio.max(1.0) {
        Some(format!(
            "tau/dt = {ratio} is not an integer; using a delay buffer of {} steps (effective tau {})",
            steps as usize,
            steps * dt
        ))
    } else {
        None
    };
    Ok((steps as usize, warning))
}

/// Dense record of one integrated trajectory.
pub struct Trajectory {
    pub dt: f64,
    /// Positions per step, step-major (`positions[k]` is the state at
    /// `t = k dt`).
    pub positions: Vec<Vec<f64>>,
    pub velocities: Vec<Vec<f64>>,
    pub delay_steps: usize,
    pub delay_warning: Option<String>,
}

impl Trajectory {
    pub fn final_positions(&self) -> &[f64] {
        self.positions.last().expect("at least the initial state")
    }

    pub fn final_velocities(&self) -> &[f64] {
        self.velocities.last().expect("at least the initial state")
    }

    /// `max_i |x_{i+1} - x_i - d|` at the final step.
    pub fn final_spacing_deviation(&self, d: f64) -> f64 {
        spacing_deviation(self.final_positions(), d)
    }
}

fn spacing_deviation(x: &[f64], d: f64) -> f64 {
    x.windows(2)
        .map(|w| (w[1] - w[0] - d).abs())
        .fold(0.0f64, f64::max)
}

/// Core integrator. Calls `on_step(step_index, x, v)` after every update;
/// history over `[-tau, 0]` is the constant initial state.
fn integrate<F: FnMut(usize, &[f64], &[f64])>(
    model: &PlatoonModel,
    dt: f64,
    steps: usize,
    seed: u64,
    initial: Option<(&[f64], &[f64])>,
    mut on_step: F,
) -> Result<(usize, Option<String>)> {
    let n = model.vehicle_count();
    let (m, warning) = delay_steps(model.tau, dt)?;
    let laplacian = model.graph.laplacian();
    let dvec = model.spacing_profile();

    let (mut x, mut v): (Vec<f64>, Vec<f64>) = match initial {
        Some((x0, v0)) => {
            if x0.len() != n || v0.len() != n {
                return Err(Error::InvalidParameter(format!(
                    "initial state must have {n} entries"
                )));
            }
            (x0.to_vec(), v0.to_vec())
        }
        None => (dvec.clone(), vec![0.0; n]),
    };

    // Ring buffers holding the last m+1 states; slot k = step index mod (m+1).
    let depth = m + 1;
    let mut x_hist = vec![x.clone(); depth];
    let mut v_hist = vec![v.clone(); depth];

    let mut noise = NormalSource::new(seed);
    let sqrt_dt = dt.sqrt();
    let mut force = vec![0.0; n];

    for step in 0..steps {
        let slot = step % depth;
        // slot holds the state from `step - m` (constant history before 0).
        {
            let xd = &x_hist[slot];
            let vd = &v_hist[slot];
            for i in 0..n {
                let mut acc = 0.0;
                for j in 0..n {
                    let l = laplacian[i * n + j];
                    acc += l * (vd[j] + model.beta * (xd[j] - dvec[j]));
                }
                force[i] = -acc;
            }
        }
        for i in 0..n {
            x[i] += v[i] * dt;
        }
        for i in 0..n {
            v[i] += force[i] * dt + model.g * sqrt_dt * noise.next();
        }
        x_hist[slot].copy_from_slice(&x);
        v_hist[slot].copy_from_slice(&v);

        if !x.iter().chain(v.iter()).all(|z| z.is_finite()) {
            return Err(Error::NonfiniteState {
                t: (step + 1) as f64 * dt,
            });
        }
        on_step(step + 1, &x, &v);
    }
    Ok((m, warning))
}

/// Integrate and record the full trajectory. `initial` overrides the
/// default start (positions at the spacing profile, velocities zero); the
/// history over `[-tau, 0]` is held constant at the initial state.
pub fn simulate(
    model: &PlatoonModel,
    dt: f64,
    t_end: f64,
    seed: u64,
    initial: Option<(&[f64], &[f64])>,
) -> Result<Trajectory> {
    check_dt(dt)?;
    if !(t_end > model.tau) {
        return Err(Error::InvalidParameter(format!(
            "t_end = {t_end} must exceed tau = {}",
            model.tau
        )));
    }
    let steps = (t_end / dt).round() as usize;
    let n = model.vehicle_count();
    let mut positions = Vec::with_capacity(steps + 1);
    let mut velocities = Vec::with_capacity(steps + 1);
    let start: (Vec<f64>, Vec<f64>) = match initial {
        Some((x0, v0)) => (x0.to_vec(), v0.to_vec()),
        None => (model.spacing_profile(), vec![0.0; n]),
    };
    positions.push(start.0.clone());
    velocities.push(start.1.clone());
    let (m, warning) = integrate(model, dt, steps, seed, initial, |_, x, v| {
        positions.push(x.to_vec());
        velocities.push(v.to_vec());
    })?;
    Ok(Trajectory {
        dt,
        positions,
        velocities,
        delay_steps: m,
        delay_warning: warning,
    })
}

/// Final spacing deviations of noise-free runs at `dt` and `dt/2`, for a
/// quick step-size convergence check.
pub fn dt_halving_check(
    model: &PlatoonModel,
    dt: f64,
    t_end: f64,
    offset: f64,
) -> Result<(f64, f64)> {
    let mut quiet = model.clone();
    quiet.g = 0.0;
    let n = quiet.vehicle_count();
    let mut x0 = quiet.spacing_profile();
    x0[0] += offset;
    let v0 = vec![0.0; n];
    let a = simulate(&quiet, dt, t_end, 0, Some((&x0, &v0)))?.final_spacing_deviation(quiet.d);
    let b =
        simulate(&quiet, dt / 2.0, t_end, 0, Some((&x0, &v0)))?.final_spacing_deviation(quiet.d);
    Ok((a, b))
}

/// One pooled steady-state sample: the relative distances of all pairs at
/// a common timestamp of one replica.
#[derive(Clone, Debug)]
pub struct EnsembleRow {
    pub replica: u32,
    pub t: f64,
    pub rel: Vec<f64>,
}

/// Pooled steady-state samples of `x^{(i+1)} - x^{(i)}`, reproducible
/// bit-exact for a fixed `(seed, dt, t_end, burn_in, stride, replicas)`.
#[derive(Clone, Debug)]
pub struct TrajectoryEnsemble {
    pub replica_count: usize,
    pub dt: f64,
    pub t_end: f64,
    pub burn_in: f64,
    pub stride: usize,
    pub seed: u64,
    pub pair_count: usize,
    pub d: f64,
    pub rows: Vec<EnsembleRow>,
}

#[derive(Serialize)]
struct EnsembleMetadata<'a> {
    seed: u64,
    dt: f64,
    t_end: f64,
    burn_in: f64,
    stride: usize,
    replicas: usize,
    pair_count: usize,
    samples_per_pair: usize,
    model_hash: &'a str,
}

impl TrajectoryEnsemble {
    pub fn sample_count(&self) -> usize {
        self.rows.len()
    }

    /// All samples of one pair, in row order.
    pub fn pair_samples(&self, pair: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r.rel[pair]).collect()
    }

    pub fn pair_mean(&self, pair: usize) -> f64 {
        let s: f64 = self.rows.iter().map(|r| r.rel[pair]).sum();
        s / self.rows.len() as f64
    }

    pub fn pair_std(&self, pair: usize) -> f64 {
        let mean = self.pair_mean(pair);
        let ss: f64 = self
            .rows
            .iter()
            .map(|r| (r.rel[pair] - mean) * (r.rel[pair] - mean))
            .sum();
        (ss / (self.rows.len() as f64 - 1.0)).sqrt()
    }

    /// CSV export: `replica,t,pair_index,rel_distance`, one row per
    /// sample and pair.
    pub fn write_csv<W: IoWrite>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "replica,t,pair_index,rel_distance")?;
        for row in &self.rows {
            for (pair, rel) in row.rel.iter().enumerate() {
                writeln!(w, "{},{},{},{}", row.replica, row.t, pair, rel)?;
            }
        }
        Ok(())
    }

    /// Run metadata as JSON (seed, steps, model hash).
    pub fn metadata_json(&self, model: &PlatoonModel) -> String {
        serde_json::to_string_pretty(&EnsembleMetadata {
            seed: self.seed,
            dt: self.dt,
            t_end: self.t_end,
            burn_in: self.burn_in,
            stride: self.stride,
            replicas: self.replica_count,
            pair_count: self.pair_count,
            samples_per_pair: self.rows.len(),
            model_hash: &model.hash_hex(),
        })
        .expect("metadata serializes")
    }
}

/// Integrate `replicas` independent copies of the model and pool their
/// post-burn-in relative distances every `stride` steps. Replicas run in
/// parallel with substream seeds; the pooled order is by replica then
/// time, independent of scheduling.
pub fn steady_state_samples(
    model: &PlatoonModel,
    dt: f64,
    t_end: f64,
    burn_in: f64,
    stride: usize,
    replicas: usize,
    seed: u64,
) -> Result<TrajectoryEnsemble> {
    check_dt(dt)?;
    if stride == 0 {
        return Err(Error::InvalidParameter("stride must be >= 1".into()));
    }
    if replicas == 0 {
        return Err(Error::InvalidParameter("need at least one replica".into()));
    }
    if !(burn_in >= 0.0 && burn_in < t_end) {
        return Err(Error::InvalidParameter(format!(
            "burn_in = {burn_in} must lie in [0, t_end = {t_end})"
        )));
    }
    let steps = (t_end / dt).round() as usize;
    let burn_steps = (burn_in / dt).ceil() as usize;
    let n = model.vehicle_count();

    let per_replica: Vec<Result<Vec<EnsembleRow>>> = (0..replicas)
        .into_par_iter()
        .map(|replica| {
            let mut rows = Vec::new();
            integrate(
                model,
                dt,
                steps,
                replica_seed(seed, replica as u64),
                None,
                |step, x, _v| {
                    if step >= burn_steps && (step - burn_steps).is_multiple_of(stride) {
                        rows.push(EnsembleRow {
                            replica: replica as u32,
                            t: step as f64 * dt,
                            rel: (0..n - 1).map(|i| x[i + 1] - x[i]).collect(),
                        });
                    }
                },
            )?;
            Ok(rows)
        })
        .collect();

    let mut rows = Vec::new();
    for r in per_replica {
        rows.extend(r?);
    }
    Ok(TrajectoryEnsemble {
        replica_count: replicas,
        dt,
        t_end,
        burn_in,
        stride,
        seed,
        pair_count: n - 1,
        d: model.d,
        rows,
    })
}

/// Conservative lower `epsilon`-quantile: the `ceil(eps N)`-th smallest
/// sample.
fn lower_quantile(sorted: &[f64], epsilon: f64) -> f64 {
    let n = sorted.len();
    let k = ((epsilon * n as f64).ceil() as usize).clamp(1, n);
    sorted[k - 1]
}

fn check_sample_budget(n: usize, epsilon: f64) -> Result<()> {
    let needed = (10.0 / epsilon).ceil() as usize;
    if n < needed {
        return Err(Error::InsufficientSamples(format!(
            "need at least {needed} samples to resolve the {epsilon} quantile, have {n}"
        )));
    }
    Ok(())
}

fn risk_from_samples(samples: &mut [f64], spec: &EventSpec) -> Result<RiskValue> {
    check_sample_budget(samples.len(), spec.epsilon())?;
    samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(match *spec {
        EventSpec::Collision { d, c, epsilon } => {
            let q = lower_quantile(samples, epsilon);
            if q <= 0.0 {
                RiskValue::Infinite
            } else {
                let delta = d / q - c;
                if delta > 0.0 {
                    RiskValue::Finite(delta)
                } else {
                    RiskValue::Zero
                }
            }
        }
        EventSpec::Detachment { d, a, h, epsilon } => {
            // Upper quantile via the mirrored order statistic.
            let n = samples.len();
            let k = ((epsilon * n as f64).ceil() as usize).clamp(1, n);
            let q = samples[n - k];
            let slack = a * d - q;
            if slack <= 0.0 {
                RiskValue::Infinite
            } else {
                let delta = 1.0 / slack - h;
                if delta > 0.0 {
                    RiskValue::Finite(delta)
                } else {
                    RiskValue::Zero
                }
            }
        }
    })
}

/// Empirical per-pair risk from pooled steady-state samples.
pub fn empirical_risk(ens: &TrajectoryEnsemble, spec: &EventSpec) -> Result<Vec<RiskValue>> {
    (0..ens.pair_count)
        .map(|pair| {
            let mut samples = ens.pair_samples(pair);
            risk_from_samples(&mut samples, spec)
        })
        .collect()
}

/// Empirical risk of the union event over all pairs with a common `delta`:
/// for collision the union trips when the row minimum does, for
/// detachment when the row maximum does, so the scalar quantile machinery
/// applies to that statistic (cross-pair correlation preserved).
pub fn empirical_union_risk(ens: &TrajectoryEnsemble, spec: &EventSpec) -> Result<RiskValue> {
    let mut stat: Vec<f64> = ens
        .rows
        .iter()
        .map(|r| {
            let iter = r.rel.iter().copied();
            match spec {
                EventSpec::Collision { .. } => iter.fold(f64::INFINITY, f64::min),
                EventSpec::Detachment { .. } => iter.fold(f64::NEG_INFINITY, f64::max),
            }
        })
        .collect();
    risk_from_samples(&mut stat, spec)
}

/// Composite event shape for joint probabilities.
#[derive(Clone, Debug)]
pub enum JointMode {
    /// At least one pair in its event set.
    Union,
    /// Every pair in its event set.
    Intersection,
    /// At least one pair of every group: `AND over groups of OR within`.
    IntersectUnion(Vec<Vec<usize>>),
    /// Every pair of at least one group: `OR over groups of AND within`.
    UnionIntersect(Vec<Vec<usize>>),
}

/// Probability estimate with a Wilson 95% interval and the per-pair
/// marginals it was pooled from.
#[derive(Clone, Debug)]
pub struct ProbabilityEstimate {
    pub p: f64,
    pub wilson_low: f64,
    pub wilson_high: f64,
    pub samples: usize,
    pub marginals: Vec<f64>,
}

fn wilson_interval(hits: usize, n: usize) -> (f64, f64) {
    let z = 1.959_963_984_540_054f64;
    let nf = n as f64;
    let p = hits as f64 / nf;
    let denom = 1.0 + z * z / nf;
    let center = (p + z * z / (2.0 * nf)) / denom;
    let half = z * (p * (1.0 - p) / nf + z * z / (4.0 * nf * nf)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

fn validate_partition(groups: &[Vec<usize>], q: usize) -> Result<()> {
    let mut seen = vec![false; q];
    for group in groups {
        if group.is_empty() {
            return Err(Error::InvalidParameter("empty partition group".into()));
        }
        for &i in group {
            if i >= q || seen[i] {
                return Err(Error::InvalidParameter(format!(
                    "partition must cover each pair exactly once (pair {i})"
                )));
            }
            seen[i] = true;
        }
    }
    if !seen.iter().all(|&s| s) {
        return Err(Error::InvalidParameter(
            "partition must cover every pair".into(),
        ));
    }
    Ok(())
}

/// Estimate the probability of a composite systemic event at super-set
/// levels `delta`. Events are evaluated per pooled row (common
/// timestamps), preserving cross-pair dependence.
pub fn joint_event_probability(
    ens: &TrajectoryEnsemble,
    specs: &[EventSpec],
    delta: &[f64],
    mode: &JointMode,
) -> Result<ProbabilityEstimate> {
    let q = ens.pair_count;
    if specs.len() != q || delta.len() != q {
        return Err(Error::InvalidParameter(format!(
            "need {q} specs and deltas, got {} and {}",
            specs.len(),
            delta.len()
        )));
    }
    if delta.iter().any(|&d| d < 0.0) {
        return Err(Error::InvalidParameter("delta entries must be >= 0".into()));
    }
    let n = ens.rows.len();
    if n == 0 {
        return Err(Error::InsufficientSamples("empty ensemble".into()));
    }
    match mode {
        JointMode::IntersectUnion(groups) | JointMode::UnionIntersect(groups) => {
            validate_partition(groups, q)?
        }
        _ => {}
    }

    // Per-pair event membership test at level delta_i.
    let triggered = |rel: f64, pair: usize| -> bool {
        match specs[pair] {
            EventSpec::Collision { d, c, .. } => rel < d / (delta[pair] + c),
            EventSpec::Detachment { d, a, h, .. } => rel > a * d - 1.0 / (delta[pair] + h),
        }
    };

    let mut joint_hits = 0usize;
    let mut marginal_hits = vec![0usize; q];
    for row in &ens.rows {
        let mut flags = vec![false; q];
        for pair in 0..q {
            if triggered(row.rel[pair], pair) {
                flags[pair] = true;
                marginal_hits[pair] += 1;
            }
        }
        let hit = match mode {
            JointMode::Union => flags.iter().any(|&f| f),
            JointMode::Intersection => flags.iter().all(|&f| f),
            JointMode::IntersectUnion(groups) => groups.iter().all(|g| g.iter().any(|&i| flags[i])),
            JointMode::UnionIntersect(groups) => groups.iter().any(|g| g.iter().all(|&i| flags[i])),
        };
        if hit {
            joint_hits += 1;
        }
    }

    let p = joint_hits as f64 / n as f64;
    let marginals: Vec<f64> = marginal_hits.iter().map(|&h| h as f64 / n as f64).collect();

    // Boole-Frechet sandwich; these hold for every sample set.
    if matches!(mode, JointMode::Union) {
        let max_m = marginals.iter().fold(0.0f64, |a, &b| a.max(b));
        let sum_m: f64 = marginals.iter().sum();
        debug_assert!(p >= max_m - 1e-12 && p <= sum_m.min(1.0) + 1e-12);
    }
    if matches!(mode, JointMode::Intersection) {
        let min_m = marginals.iter().fold(1.0f64, |a, &b| a.min(b));
        debug_assert!(p <= min_m + 1e-12);
    }

    let (wilson_low, wilson_high) = wilson_interval(joint_hits, n);
    Ok(ProbabilityEstimate {
        p,
        wilson_low,
        wilson_high,
        samples: n,
        marginals,
    })
}
