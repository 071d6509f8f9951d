//! Weighted undirected communication graphs.
//!
//! A [`Topology`] is validated on construction: symmetric nonnegative
//! weights, zero diagonal, connected. [`spectrum`] computes the Laplacian
//! and its eigenvalues with a cyclic Jacobi sweep, and [`SwitchingSchedule`]
//! holds a piecewise-constant sequence of topologies.

use std::collections::VecDeque;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Undirected weighted graph over `n_agents` nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    weights: DMatrix<f64>,
    neighbors: Vec<Vec<(usize, f64)>>,
}

impl Topology {
    /// Assemble a topology from an edge list `(i, j, weight)` with 0-based indices.
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        if n == 0 {
            return Err(Error::Validation(
                "topology needs at least one agent".into(),
            ));
        }
        let mut weights = DMatrix::zeros(n, n);
        for &(i, j, w) in edges {
            if i >= n || j >= n {
                return Err(Error::Validation(format!(
                    "edge ({i}, {j}) out of range for {n} agents"
                )));
            }
            if i == j {
                return Err(Error::Validation(format!("self-loop at node {i}")));
            }
            if !(w > 0.0) || !w.is_finite() {
                return Err(Error::Validation(format!(
                    "edge ({i}, {j}) has nonpositive or non-finite weight {w}"
                )));
            }
            if weights[(i, j)] != 0.0 {
                return Err(Error::Validation(format!("duplicate edge ({i}, {j})")));
            }
            weights[(i, j)] = w;
            weights[(j, i)] = w;
        }
        Self::from_weights(weights)
    }

    /// Build from a full weight matrix, checking every invariant.
    pub fn from_weights(weights: DMatrix<f64>) -> Result<Self> {
        let n = weights.nrows();
        if n == 0 || weights.ncols() != n {
            return Err(Error::Validation(format!(
                "weight matrix must be square and nonempty, got {}x{}",
                weights.nrows(),
                weights.ncols()
            )));
        }
        for i in 0..n {
            if weights[(i, i)] != 0.0 {
                return Err(Error::Validation(format!("nonzero diagonal weight at {i}")));
            }
            for j in 0..n {
                let w = weights[(i, j)];
                if !(w >= 0.0) || !w.is_finite() {
                    return Err(Error::Validation(format!(
                        "invalid weight a[{i}][{j}] = {w}"
                    )));
                }
                if w != weights[(j, i)] {
                    return Err(Error::Validation(format!(
                        "asymmetric weight at ({i}, {j})"
                    )));
                }
            }
        }
        let neighbors: Vec<Vec<(usize, f64)>> = (0..n)
            .map(|i| {
                (0..n)
                    .filter(|&j| weights[(i, j)] > 0.0)
                    .map(|j| (j, weights[(i, j)]))
                    .collect()
            })
            .collect();
        let topo = Topology { weights, neighbors };
        let reached = topo.reachable_from(0);
        if reached < n {
            return Err(Error::Connectivity(format!(
                "only {reached} of {n} nodes reachable from node 0"
            )));
        }
        Ok(topo)
    }

    fn reachable_from(&self, start: usize) -> usize {
        let n = self.n_agents();
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        let mut count = 1;
        while let Some(u) = queue.pop_front() {
            for &(v, _) in &self.neighbors[u] {
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                    queue.push_back(v);
                }
            }
        }
        count
    }

    pub fn n_agents(&self) -> usize {
        self.weights.nrows()
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    #[inline]
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[(i, j)]
    }

    /// Neighbors of `i` with their (positive) weights, in index order.
    #[inline]
    pub fn neighbors(&self, i: usize) -> &[(usize, f64)] {
        &self.neighbors[i]
    }

    pub fn degree(&self, i: usize) -> f64 {
        self.neighbors[i].iter().map(|&(_, w)| w).sum()
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Smallest nonzero weight.
    pub fn min_weight(&self) -> f64 {
        self.neighbors
            .iter()
            .flatten()
            .map(|&(_, w)| w)
            .fold(f64::INFINITY, f64::min)
    }

    /// `L = diag(A 1) - A`.
    pub fn laplacian(&self) -> DMatrix<f64> {
        let n = self.n_agents();
        let mut l = -self.weights.clone();
        for i in 0..n {
            l[(i, i)] = self.degree(i);
        }
        l
    }

    // Generators

    pub fn ring(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::Validation(format!("ring needs n >= 3, got {n}")));
        }
        let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n, 1.0)).collect();
        Self::from_edges(n, &edges)
    }

    pub fn complete(n: usize) -> Result<Self> {
        let edges: Vec<_> = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j, 1.0)))
            .collect();
        Self::from_edges(n, &edges)
    }

    pub fn path(n: usize) -> Result<Self> {
        let edges: Vec<_> = (1..n).map(|i| (i - 1, i, 1.0)).collect();
        Self::from_edges(n, &edges)
    }

    /// Star centred on node 0.
    pub fn star(n: usize) -> Result<Self> {
        let edges: Vec<_> = (1..n).map(|i| (0, i, 1.0)).collect();
        Self::from_edges(n, &edges)
    }

    /// Erdős–Rényi graph with unit weights, redrawn until connected.
    pub fn random_connected(n: usize, edge_prob: f64, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::random_connected_with(n, edge_prob, &mut rng)
    }

    pub fn random_connected_with<R: Rng>(n: usize, edge_prob: f64, rng: &mut R) -> Result<Self> {
        if !(edge_prob > 0.0 && edge_prob <= 1.0) {
            return Err(Error::Validation(format!(
                "edge probability must lie in (0, 1], got {edge_prob}"
            )));
        }
        const MAX_DRAWS: usize = 10_000;
        for _ in 0..MAX_DRAWS {
            let mut edges = Vec::new();
            for i in 0..n {
                for j in i + 1..n {
                    if rng.random::<f64>() < edge_prob {
                        edges.push((i, j, 1.0));
                    }
                }
            }
            match Self::from_edges(n, &edges) {
                Ok(t) => return Ok(t),
                Err(Error::Connectivity(_)) => continue,
                Err(e) => return Err(e),
            }
        }
        Err(Error::Connectivity(format!(
            "no connected G({n}, {edge_prob}) drawn in {MAX_DRAWS} attempts"
        )))
    }
}

/// Laplacian together with its sorted eigenvalues.
#[derive(Debug, Clone)]
pub struct LaplacianSpectrum {
    pub laplacian: DMatrix<f64>,
    /// Ascending; `eigenvalues[0]` is zero up to roundoff.
    pub eigenvalues: Vec<f64>,
    /// Algebraic connectivity.
    pub lambda2: f64,
    pub lambda_n: f64,
}

pub fn spectrum(topology: &Topology) -> Result<LaplacianSpectrum> {
    let laplacian = topology.laplacian();
    let eigenvalues = symmetric_eigenvalues(&laplacian)?;
    let n = eigenvalues.len();
    let lambda2 = if n >= 2 { eigenvalues[1] } else { 0.0 };
    let lambda_n = eigenvalues[n - 1];
    Ok(LaplacianSpectrum {
        laplacian,
        eigenvalues,
        lambda2,
        lambda_n,
    })
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
pub fn symmetric_eigenvalues(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    const MAX_SWEEPS: usize = 100;
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::Validation("eigensolve needs a square matrix".into()));
    }
    let mut a = m.clone();
    let scale = a.norm().max(f64::MIN_POSITIVE);
    let off = |a: &DMatrix<f64>| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += a[(i, j)] * a[(i, j)];
                }
            }
        }
        s.sqrt()
    };

    let mut converged = off(&a) <= 1e-15 * scale;
    let mut sweeps = 0;
    while !converged && sweeps < MAX_SWEEPS {
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq.abs() <= f64::MIN_POSITIVE {
                    continue;
                }
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
        sweeps += 1;
        converged = off(&a) <= 1e-15 * scale;
    }
    if !converged {
        return Err(Error::Numerical(format!(
            "Jacobi eigensolve did not converge in {MAX_SWEEPS} sweeps (off-diagonal {:.3e})",
            off(&a)
        )));
    }
    let mut eig: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    eig.sort_by(f64::total_cmp);
    Ok(eig)
}

#[derive(Debug, Clone)]
pub struct Segment {
    pub start: f64,
    pub topology: Topology,
}

/// Piecewise-constant topology sequence; each segment holds until the next start time.
#[derive(Debug, Clone)]
pub struct SwitchingSchedule {
    segments: Vec<Segment>,
    lambda2_min: f64,
}

impl SwitchingSchedule {
    pub fn new(segments: Vec<Segment>) -> Result<Self> {
        let first = segments
            .first()
            .ok_or_else(|| Error::Validation("switching schedule is empty".into()))?;
        if first.start != 0.0 {
            return Err(Error::Validation(format!(
                "first segment must start at t = 0, got {}",
                first.start
            )));
        }
        let n = first.topology.n_agents();
        for w in segments.windows(2) {
            if !(w[1].start > w[0].start) {
                return Err(Error::Validation(format!(
                    "segment start times must increase strictly ({} then {})",
                    w[0].start, w[1].start
                )));
            }
        }
        let mut lambda2_min = f64::INFINITY;
        for seg in &segments {
            if seg.topology.n_agents() != n {
                return Err(Error::Validation(
                    "all topologies in a schedule must have the same number of agents".into(),
                ));
            }
            lambda2_min = lambda2_min.min(spectrum(&seg.topology)?.lambda2);
        }
        Ok(SwitchingSchedule {
            segments,
            lambda2_min,
        })
    }

    pub fn fixed(topology: Topology) -> Result<Self> {
        Self::new(vec![Segment {
            start: 0.0,
            topology,
        }])
    }

    /// Cycle through `graphs` every `period` seconds up to `horizon`.
    pub fn periodic(graphs: &[Topology], period: f64, horizon: f64) -> Result<Self> {
        if graphs.is_empty() {
            return Err(Error::Validation(
                "periodic schedule needs at least one graph".into(),
            ));
        }
        if !(period > 0.0) {
            return Err(Error::Validation(format!(
                "switching period must be positive, got {period}"
            )));
        }
        let count = ((horizon / period).ceil() as usize).max(1);
        let segments = (0..count)
            .map(|k| Segment {
                start: k as f64 * period,
                topology: graphs[k % graphs.len()].clone(),
            })
            .collect();
        Self::new(segments)
    }

    /// Topology active at `t`. Switch instants belong to the segment that starts there.
    pub fn topology_at(&self, t: f64) -> &Topology {
        let idx = self.segments.partition_point(|s| s.start <= t);
        &self.segments[idx.saturating_sub(1)].topology
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn n_agents(&self) -> usize {
        self.segments[0].topology.n_agents()
    }

    pub fn lambda2_min(&self) -> f64 {
        self.lambda2_min
    }

    /// Smallest nonzero weight across all segments.
    pub fn min_weight(&self) -> f64 {
        self.segments
            .iter()
            .map(|s| s.topology.min_weight())
            .fold(f64::INFINITY, f64::min)
    }
}
