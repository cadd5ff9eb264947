//! Run configuration: a single JSON document, schema-validated with
//! unknown keys rejected.

use serde::Deserialize;

use platoon_risk::{EventSpec, PlatoonModel, Result, WeightedGraph};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    #[serde(default)]
    pub collision: Option<CollisionConfig>,
    #[serde(default)]
    pub detachment: Option<DetachmentConfig>,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub sim: Option<SimConfig>,
    #[serde(default)]
    pub fit: Option<FitConfig>,
    /// Per-pair confidence split for joint-risk boxes (default uniform).
    #[serde(default)]
    pub split: Option<Vec<f64>>,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Sample count for stability-boundary export.
    #[serde(default)]
    pub boundary_samples: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub topology: TopologyConfig,
    pub beta: f64,
    pub tau: f64,
    pub g: f64,
    pub d: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum TopologyConfig {
    Complete {
        n: usize,
        k: f64,
    },
    Path {
        n: usize,
        k: f64,
    },
    PCycle {
        n: usize,
        k: f64,
        p: usize,
    },
    Spatial {
        n: usize,
        k0: f64,
        gamma: f64,
    },
    PerturbedComplete {
        n: usize,
        k_star: f64,
        b: f64,
        seed: u64,
    },
    Edges {
        n: usize,
        edges: Vec<(usize, usize, f64)>,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CollisionConfig {
    pub c: f64,
    pub epsilon: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetachmentConfig {
    pub a: f64,
    pub h: f64,
    pub epsilon: f64,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    Tau,
    N,
    P,
    Gamma,
    B,
    Gain,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub variable: SweepVariable,
    pub from: f64,
    pub to: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    #[serde(default = "default_dt")]
    pub dt: f64,
    pub t_end: f64,
    #[serde(default)]
    pub burn_in: Option<f64>,
    #[serde(default)]
    pub stride: Option<usize>,
    #[serde(default = "default_replicas")]
    pub replicas: usize,
}

fn default_dt() -> f64 {
    1e-3
}

fn default_replicas() -> usize {
    8
}

impl SimConfig {
    /// Burn-in default: `max(10 tau, t_end / 2)`.
    pub fn burn_in_for(&self, tau: f64) -> f64 {
        self.burn_in.unwrap_or((10.0 * tau).max(self.t_end / 2.0))
    }

    /// Stride default: one delay length, at least one step.
    pub fn stride_for(&self, tau: f64) -> usize {
        self.stride
            .unwrap_or(((tau / self.dt).ceil() as usize).max(1))
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    #[serde(default = "default_grid_s1")]
    pub grid_s1: usize,
    #[serde(default = "default_grid_s2")]
    pub grid_s2: usize,
}

fn default_grid_s1() -> usize {
    100
}

fn default_grid_s2() -> usize {
    80
}

impl TopologyConfig {
    pub fn build(&self) -> Result<WeightedGraph> {
        match self {
            TopologyConfig::Complete { n, k } => WeightedGraph::complete(*n, *k),
            TopologyConfig::Path { n, k } => WeightedGraph::path(*n, *k),
            TopologyConfig::PCycle { n, k, p } => WeightedGraph::p_cycle(*n, *k, *p),
            TopologyConfig::Spatial { n, k0, gamma } => WeightedGraph::spatial(*n, *k0, *gamma),
            TopologyConfig::PerturbedComplete { n, k_star, b, seed } => {
                WeightedGraph::perturbed_complete(*n, *k_star, *b, *seed)
            }
            TopologyConfig::Edges { n, edges } => WeightedGraph::from_edges(*n, edges),
        }
    }
}

impl ModelConfig {
    pub fn build(&self) -> Result<PlatoonModel> {
        PlatoonModel::new(self.topology.build()?, self.beta, self.tau, self.g, self.d)
    }
}

impl RunConfig {
    pub fn collision_spec(&self) -> Result<Option<EventSpec>> {
        self.collision
            .as_ref()
            .map(|c| EventSpec::collision(self.model.d, c.c, c.epsilon))
            .transpose()
    }

    pub fn detachment_spec(&self) -> Result<Option<EventSpec>> {
        self.detachment
            .as_ref()
            .map(|d| EventSpec::detachment(self.model.d, d.a, d.h, d.epsilon))
            .transpose()
    }
}
