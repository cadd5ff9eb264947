//! Weighted undirected communication graphs, their Laplacians and spectra,
//! effective resistance, and the named topology generators.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// A weighted undirected simple graph on `n >= 2` vertices.
///
/// The weight matrix is symmetric with zero diagonal and nonnegative
/// entries, and the graph must be connected. All constructors enforce
/// these invariants, so downstream code can rely on them.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedGraph {
    n: usize,
    /// Row-major n x n symmetric weight matrix.
    weights: Vec<f64>,
}

/// JSON wire format: `{"n": 4, "edges": [[0, 1, 2.5], ...]}` with `i < j`.
#[derive(Serialize, Deserialize)]
struct GraphJson {
    n: usize,
    edges: Vec<(usize, usize, f64)>,
}

impl WeightedGraph {
    /// Build from a full weight matrix (row-major, length `n * n`).
    pub fn from_weights(n: usize, weights: Vec<f64>) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParameter(format!(
                "need at least 2 vertices, got {n}"
            )));
        }
        if weights.len() != n * n {
            return Err(Error::InvalidParameter(format!(
                "weight matrix must have {} entries, got {}",
                n * n,
                weights.len()
            )));
        }
        for i in 0..n {
            if weights[i * n + i] != 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "self-loop at vertex {i}: links must be simple"
                )));
            }
            for j in 0..n {
                let w = weights[i * n + j];
                if !w.is_finite() || w < 0.0 {
                    return Err(Error::InvalidParameter(format!(
                        "weight ({i},{j}) = {w} must be finite and nonnegative"
                    )));
                }
                if w != weights[j * n + i] {
                    return Err(Error::InvalidParameter(format!(
                        "weights must be symmetric: ({i},{j}) = {w} vs ({j},{i}) = {}",
                        weights[j * n + i]
                    )));
                }
            }
        }
        let g = Self { n, weights };
        if !g.is_connected() {
            return Err(Error::DisconnectedGraph(
                "positive-weight edges do not span all vertices".into(),
            ));
        }
        Ok(g)
    }

    /// Build from an undirected edge list (0-indexed, `i < j` not required).
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParameter(format!(
                "need at least 2 vertices, got {n}"
            )));
        }
        let mut weights = vec![0.0; n * n];
        for &(i, j, w) in edges {
            if i >= n || j >= n {
                return Err(Error::InvalidParameter(format!(
                    "edge ({i},{j}) out of range for n={n}"
                )));
            }
            if i == j {
                return Err(Error::InvalidParameter(format!("self-loop at vertex {i}")));
            }
            weights[i * n + j] = w;
            weights[j * n + i] = w;
        }
        Self::from_weights(n, weights)
    }

    /// Complete graph with uniform weight `k`.
    pub fn complete(n: usize, k: f64) -> Result<Self> {
        require_positive(k, "k")?;
        let mut weights = vec![k; n.max(1) * n.max(1)];
        for i in 0..n.max(1) {
            weights[i * n.max(1) + i] = 0.0;
        }
        Self::from_weights(n, weights)
    }

    /// Path graph `1 - 2 - ... - n` with uniform weight `k`.
    pub fn path(n: usize, k: f64) -> Result<Self> {
        require_positive(k, "k")?;
        let edges: Vec<_> = (0..n.saturating_sub(1)).map(|i| (i, i + 1, k)).collect();
        Self::from_edges(n, &edges)
    }

    /// Cycle where each vehicle talks to its `p` nearest neighbors on each
    /// side, uniform weight `k`. Requires `1 <= p <= (n-1)/2`.
    pub fn p_cycle(n: usize, k: f64, p: usize) -> Result<Self> {
        require_positive(k, "k")?;
        if p < 1 || 2 * p + 1 > n {
            return Err(Error::InvalidParameter(format!(
                "p-cycle requires 1 <= p <= (n-1)/2, got p={p}, n={n}"
            )));
        }
        let mut edges = Vec::new();
        for i in 0..n {
            for step in 1..=p {
                let j = (i + step) % n;
                if i < j {
                    edges.push((i, j, k));
                } else {
                    edges.push((j, i, k));
                }
            }
        }
        edges.sort_by_key(|e| (e.0, e.1));
        edges.dedup();
        Self::from_edges(n, &edges)
    }

    /// Spatially decaying all-to-all gains `k0 * exp(-gamma * |i - j|)`.
    pub fn spatial(n: usize, k0: f64, gamma: f64) -> Result<Self> {
        require_positive(k0, "k0")?;
        if gamma < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "gamma = {gamma} must be >= 0"
            )));
        }
        let mut weights = vec![0.0; n.max(1) * n.max(1)];
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    weights[i * n + j] = k0 * (-gamma * (i as f64 - j as f64).abs()).exp();
                }
            }
        }
        Self::from_weights(n, weights)
    }

    /// Complete graph with uniform gain `k_star` perturbed per undirected
    /// edge by `b * xi`, `xi ~ U(0,1)`, drawn from a seeded generator so the
    /// result is reproducible. Symmetry is preserved by drawing once per
    /// edge `i < j`.
    pub fn perturbed_complete(n: usize, k_star: f64, b: f64, seed: u64) -> Result<Self> {
        require_positive(k_star, "k_star")?;
        if b < 0.0 {
            return Err(Error::InvalidParameter(format!("b = {b} must be >= 0")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = vec![0.0; n.max(1) * n.max(1)];
        for i in 0..n {
            for j in (i + 1)..n {
                let xi: f64 = rng.random();
                let w = k_star + b * xi;
                weights[i * n + j] = w;
                weights[j * n + i] = w;
            }
        }
        Self::from_weights(n, weights)
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.n + j]
    }

    /// Graph Laplacian: `-k_ij` off-diagonal, row sums of weights on the
    /// diagonal. Symmetric positive semi-definite by construction.
    pub fn laplacian(&self) -> Vec<f64> {
        let n = self.n;
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            let mut degree = 0.0;
            for j in 0..n {
                if i != j {
                    let w = self.weights[i * n + j];
                    l[i * n + j] = -w;
                    degree += w;
                }
            }
            l[i * n + i] = degree;
        }
        l
    }

    /// Breadth-first connectivity over positive-weight edges.
    fn is_connected(&self) -> bool {
        let n = self.n;
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(i) = stack.pop() {
            for (j, seen_j) in seen.iter_mut().enumerate() {
                if !*seen_j && self.weights[i * n + j] > 0.0 {
                    *seen_j = true;
                    count += 1;
                    stack.push(j);
                }
            }
        }
        count == n
    }

    pub fn to_json(&self) -> String {
        let mut edges = Vec::new();
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                let w = self.weights[i * self.n + j];
                if w > 0.0 {
                    edges.push((i, j, w));
                }
            }
        }
        serde_json::to_string(&GraphJson { n: self.n, edges }).expect("graph serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let parsed: GraphJson = serde_json::from_str(text)
            .map_err(|e| Error::InvalidParameter(format!("graph JSON: {e}")))?;
        Self::from_edges(parsed.n, &parsed.edges)
    }
}

fn require_positive(value: f64, name: &str) -> Result<()> {
    if !(value > 0.0) || !value.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "{name} = {value} must be > 0"
        )));
    }
    Ok(())
}

/// Ordered Laplacian eigendecomposition.
///
/// Eigenvalues ascend with the zero mode snapped to exactly `0`; the first
/// eigenvector is set to exactly `1/sqrt(n) * ones`, which the variance sums
/// rely on, and every column is sign-normalized (first entry above 1e-12 is
/// positive) so the decomposition is reproducible.
#[derive(Clone, Debug)]
pub struct Spectrum {
    n: usize,
    eigenvalues: Vec<f64>,
    /// Row-major n x n; column k is the eigenvector of `eigenvalues[k]`.
    eigenvectors: Vec<f64>,
}

impl Spectrum {
    /// Decompose the Laplacian of `graph`.
    ///
    /// Fails with `DisconnectedGraph` when the spectral gap collapses
    /// (`lambda_2 <= 1e-9 * lambda_n`).
    pub fn of_graph(graph: &WeightedGraph) -> Result<Self> {
        let n = graph.vertex_count();
        let l = graph.laplacian();
        let (mut eig, mut q) = linalg::sym_eigen(&l, n);

        let lambda_n = eig[n - 1];
        if eig[1] <= 1e-9 * lambda_n {
            return Err(Error::DisconnectedGraph(format!(
                "spectral gap too small: lambda_2 = {:e}, lambda_n = {:e}",
                eig[1], lambda_n
            )));
        }

        // The zero mode is analytic: snap it exactly.
        eig[0] = 0.0;
        let uniform = 1.0 / (n as f64).sqrt();
        for i in 0..n {
            q[i * n] = uniform;
        }

        let spectrum = Self {
            n,
            eigenvalues: eig,
            eigenvectors: q,
        };
        debug_assert!(spectrum.reconstruction_defect(&l) <= 1e-9);
        Ok(spectrum)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Entry `row` of eigenvector `k`.
    pub fn eigenvector_entry(&self, k: usize, row: usize) -> f64 {
        self.eigenvectors[row * self.n + k]
    }

    /// `[e_{i+1} - e_i]^T q_k` for the 0-based pair index `i` (vehicles
    /// `i+2` and `i+1` in 1-based labels).
    pub fn pair_weight(&self, k: usize, pair: usize) -> f64 {
        self.eigenvector_entry(k, pair + 1) - self.eigenvector_entry(k, pair)
    }

    /// Total effective resistance `n * sum_{i>=2} 1/lambda_i`. Smaller means
    /// stronger connectivity.
    pub fn effective_resistance(&self) -> f64 {
        let n = self.n as f64;
        n * self.eigenvalues[1..].iter().map(|l| 1.0 / l).sum::<f64>()
    }

    /// Max-norm defect of `L - Q Lambda Q^T`, relative to `max |L|`.
    pub fn reconstruction_defect(&self, laplacian: &[f64]) -> f64 {
        let n = self.n;
        let scale = laplacian.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for k in 0..n {
                    s += self.eigenvectors[i * n + k]
                        * self.eigenvalues[k]
                        * self.eigenvectors[j * n + k];
                }
                worst = worst.max((s - laplacian[i * n + j]).abs());
            }
        }
        worst / scale.max(f64::MIN_POSITIVE)
    }

    /// Max-norm defect of `Q^T Q - I`.
    pub fn orthogonality_defect(&self) -> f64 {
        let n = self.n;
        let mut worst = 0.0f64;
        for a in 0..n {
            for b in 0..n {
                let mut dot = 0.0;
                for i in 0..n {
                    dot += self.eigenvectors[i * n + a] * self.eigenvectors[i * n + b];
                }
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((dot - target).abs());
            }
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_node_laplacian() {
        let g = WeightedGraph::complete(2, 1.0).unwrap();
        assert_eq!(g.laplacian(), vec![1.0, -1.0, -1.0, 1.0]);
    }

    #[test]
    fn laplacian_rows_sum_to_zero() {
        let g = WeightedGraph::path(3, 1.0).unwrap();
        let l = g.laplacian();
        for i in 0..3 {
            let row: f64 = (0..3).map(|j| l[i * 3 + j]).sum();
            assert!(row.abs() < 1e-15);
        }
    }

    #[test]
    fn all_zero_weights_rejected() {
        let err = WeightedGraph::from_weights(3, vec![0.0; 9]).unwrap_err();
        assert!(matches!(err, Error::DisconnectedGraph(_)));
    }

    #[test]
    fn asymmetric_weights_rejected() {
        let mut w = vec![0.0; 4];
        w[1] = 1.0;
        assert!(WeightedGraph::from_weights(2, w).is_err());
    }

    #[test]
    fn complete_graph_spectrum_closed_form() {
        for n in [2usize, 5, 11] {
            let k = 0.7;
            let g = WeightedGraph::complete(n, k).unwrap();
            let s = Spectrum::of_graph(&g).unwrap();
            assert_eq!(s.eigenvalues()[0], 0.0);
            for j in 1..n {
                let want = k * n as f64;
                assert!(
                    (s.eigenvalues()[j] - want).abs() <= 1e-10 * want,
                    "n={n} j={j}: {} vs {want}",
                    s.eigenvalues()[j]
                );
            }
        }
    }

    #[test]
    fn path_graph_spectrum_closed_form() {
        let n = 7;
        let k = 1.3;
        let g = WeightedGraph::path(n, k).unwrap();
        let s = Spectrum::of_graph(&g).unwrap();
        for j in 1..n {
            let want = 2.0 * k * (1.0 - (std::f64::consts::PI * j as f64 / n as f64).cos());
            assert!((s.eigenvalues()[j] - want).abs() <= 1e-10 * want);
        }
    }

    #[test]
    fn path_n3_eigenvalues() {
        let g = WeightedGraph::path(3, 1.0).unwrap();
        let s = Spectrum::of_graph(&g).unwrap();
        let eig = s.eigenvalues();
        assert!(eig[0] == 0.0 && (eig[1] - 1.0).abs() < 1e-12 && (eig[2] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn p_cycle_spectrum_closed_form() {
        let n = 11;
        let k = 0.4;
        for p in 1..=5 {
            let g = WeightedGraph::p_cycle(n, k, p).unwrap();
            let s = Spectrum::of_graph(&g).unwrap();
            let mut want: Vec<f64> = (1..n)
                .map(|j| {
                    let ang = std::f64::consts::PI * j as f64 / n as f64;
                    k * ((2 * p + 1) as f64 - ((2 * p + 1) as f64 * ang).sin() / ang.sin())
                })
                .collect();
            want.sort_by(|a, b| a.partial_cmp(b).unwrap());
            for (got, want) in s.eigenvalues()[1..].iter().zip(&want) {
                assert!(
                    (got - want).abs() <= 1e-10 * want.abs().max(1.0),
                    "p={p}: {got} vs {want}"
                );
            }
        }
    }

    #[test]
    fn p_cycle_saturates_to_complete() {
        let n = 9;
        let g = WeightedGraph::p_cycle(n, 2.0, (n - 1) / 2).unwrap();
        let complete = WeightedGraph::complete(n, 2.0).unwrap();
        assert_eq!(g, complete);
    }

    #[test]
    fn p_cycle_rejects_out_of_range_p() {
        assert!(matches!(
            WeightedGraph::p_cycle(9, 1.0, 5),
            Err(Error::InvalidParameter(_))
        ));
        assert!(matches!(
            WeightedGraph::p_cycle(9, 1.0, 0),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn spatial_with_zero_decay_is_complete() {
        let g = WeightedGraph::spatial(6, 1.5, 0.0).unwrap();
        let complete = WeightedGraph::complete(6, 1.5).unwrap();
        assert_eq!(g, complete);
    }

    #[test]
    fn perturbed_complete_unperturbed_case() {
        let g = WeightedGraph::perturbed_complete(10, 1.111, 0.0, 99).unwrap();
        for i in 0..10 {
            for j in 0..10 {
                let want = if i == j { 0.0 } else { 1.111 };
                assert_eq!(g.weight(i, j), want);
            }
        }
    }

    #[test]
    fn perturbed_complete_is_seeded_and_symmetric() {
        let a = WeightedGraph::perturbed_complete(6, 1.0, 0.5, 7).unwrap();
        let b = WeightedGraph::perturbed_complete(6, 1.0, 0.5, 7).unwrap();
        let c = WeightedGraph::perturbed_complete(6, 1.0, 0.5, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        for i in 0..6 {
            for j in 0..6 {
                assert_eq!(a.weight(i, j), a.weight(j, i));
                if i != j {
                    assert!(a.weight(i, j) >= 1.0 && a.weight(i, j) <= 1.5);
                }
            }
        }
    }

    #[test]
    fn effective_resistance_closed_forms() {
        // Complete graph: n(n-1)/(kn) = (n-1)/k.
        let g = WeightedGraph::complete(6, 2.0).unwrap();
        let s = Spectrum::of_graph(&g).unwrap();
        assert!((s.effective_resistance() - 5.0 / 2.0).abs() < 1e-10);
        // Two nodes, single unit edge: lambda_2 = 2, so 2 * (1/2) = 1.
        let g2 = WeightedGraph::complete(2, 1.0).unwrap();
        let s2 = Spectrum::of_graph(&g2).unwrap();
        assert!((s2.effective_resistance() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn resistance_scales_inversely_with_weights() {
        let g = WeightedGraph::path(5, 1.0).unwrap();
        let scaled = WeightedGraph::path(5, 4.0).unwrap();
        let r = Spectrum::of_graph(&g).unwrap().effective_resistance();
        let rs = Spectrum::of_graph(&scaled).unwrap().effective_resistance();
        assert!((rs - r / 4.0).abs() < 1e-9 * r);
    }

    #[test]
    fn spectrum_invariants_hold() {
        let g = WeightedGraph::perturbed_complete(8, 1.0, 0.7, 3).unwrap();
        let s = Spectrum::of_graph(&g).unwrap();
        assert!(s.orthogonality_defect() < 1e-10);
        assert!(s.reconstruction_defect(&g.laplacian()) < 1e-9);
        let uniform = 1.0 / 8f64.sqrt();
        for i in 0..8 {
            assert_eq!(s.eigenvector_entry(0, i), uniform);
        }
    }

    #[test]
    fn path_eigenvectors_match_closed_form() {
        // Eigenvector for lambda_j (ascending, j >= 2 one-based) is
        // sqrt(2/n) cos(pi (j-1) (2l-1) / (2n)) up to global sign.
        let n = 6;
        let g = WeightedGraph::path(n, 1.0).unwrap();
        let s = Spectrum::of_graph(&g).unwrap();
        for j in 1..n {
            let m = j as f64;
            let closed: Vec<f64> = (1..=n)
                .map(|l| {
                    (2.0 / n as f64).sqrt()
                        * (std::f64::consts::PI * m * (2.0 * l as f64 - 1.0) / (2.0 * n as f64))
                            .cos()
                })
                .collect();
            let got: Vec<f64> = (0..n).map(|i| s.eigenvector_entry(j, i)).collect();
            let sign = if (got[0] - closed[0]).abs() < (got[0] + closed[0]).abs() {
                1.0
            } else {
                -1.0
            };
            for (g, c) in got.iter().zip(&closed) {
                assert!((g - sign * c).abs() < 1e-9, "j={j}: {got:?} vs {closed:?}");
            }
        }
    }

    #[test]
    fn json_round_trip() {
        let g = WeightedGraph::spatial(5, 1.5, 0.3).unwrap();
        let text = g.to_json();
        let back = WeightedGraph::from_json(&text).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                assert!((g.weight(i, j) - back.weight(i, j)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn json_rejects_disconnected() {
        let err =
            WeightedGraph::from_json(r#"{"n": 4, "edges": [[0,1,1.0],[2,3,1.0]]}"#).unwrap_err();
        assert!(matches!(err, Error::DisconnectedGraph(_)));
    }
}
