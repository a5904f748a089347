//! Per-component layout by stress majorization (SMACOF) over
//! similarity-derived target distances.
//!
//! Stability comes only from the initialization: nodes seen last tick start
//! where they were. The objective never contains anchoring terms.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{self, Point};
use crate::semantics::SimilarityGraph;

/// Lower bound on an edge's target length.
pub const MIN_EDGE_LENGTH: f64 = 0.05;

#[derive(Debug, Error, PartialEq)]
pub enum LayoutError {
    #[error("distance between `{0}` and `{1}` is not finite")]
    NonFiniteDistance(String, String),
    #[error("distance between `{0}` and `{1}` is not positive")]
    NonPositiveDistance(String, String),
}

/// Symmetric all-pairs target distances over a sorted id list.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    ids: Vec<String>,
    values: Vec<f64>,
}

impl DistanceMatrix {
    pub fn new(ids: Vec<String>, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), ids.len() * ids.len(), "distance matrix must be n×n");
        DistanceMatrix { ids, values }
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.ids.len() + j]
    }

    fn validate(&self) -> Result<(), LayoutError> {
        let n = self.len();
        for i in 0..n {
            for j in i + 1..n {
                let d = self.get(i, j);
                if !d.is_finite() {
                    return Err(LayoutError::NonFiniteDistance(self.ids[i].clone(), self.ids[j].clone()));
                }
                if d <= 0.0 {
                    return Err(LayoutError::NonPositiveDistance(self.ids[i].clone(), self.ids[j].clone()));
                }
            }
        }
        Ok(())
    }
}

/// Edge length for a similarity: `max(1 − s, MIN_EDGE_LENGTH)`.
pub fn edge_length(similarity: f64) -> f64 {
    (1.0 - similarity).max(MIN_EDGE_LENGTH)
}

/// Weighted shortest-path distances over edge lengths (Dijkstra from every
/// node). Unreachable pairs come out infinite.
pub fn target_distances(g: &SimilarityGraph) -> DistanceMatrix {
    let n = g.len();
    let adj: Vec<Vec<(usize, f64)>> = g
        .adjacency()
        .into_iter()
        .map(|l| l.into_iter().map(|(j, s)| (j, edge_length(s))).collect())
        .collect();
    let mut values = vec![f64::INFINITY; n * n];
    for src in 0..n {
        let row = &mut values[src * n..(src + 1) * n];
        row[src] = 0.0;
        let mut heap = BinaryHeap::new();
        heap.push(Reverse((Dist(0.0), src)));
        while let Some(Reverse((Dist(d), u))) = heap.pop() {
            if d > row[u] {
                continue;
            }
            for &(v, len) in &adj[u] {
                let nd = d + len;
                if nd < row[v] {
                    row[v] = nd;
                    heap.push(Reverse((Dist(nd), v)));
                }
            }
        }
    }
    // enforce exact symmetry against rounding in path sums
    for i in 0..n {
        for j in i + 1..n {
            let d = values[i * n + j].min(values[j * n + i]);
            values[i * n + j] = d;
            values[j * n + i] = d;
        }
    }
    DistanceMatrix::new(g.nodes().to_vec(), values)
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Dist(f64);

impl Eq for Dist {}

impl PartialOrd for Dist {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Dist {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// `Σ_{i<j} w_ij (‖x_i − x_j‖ − d_ij)²` with `w_ij = d_ij⁻²`.
/// `positions` are indexed like `distances.ids()`.
pub fn stress(positions: &[Point], distances: &DistanceMatrix) -> f64 {
    let n = distances.len();
    let mut total = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let d = distances.get(i, j);
            let r = positions[i].dist(positions[j]) - d;
            total += r * r / (d * d);
        }
    }
    total
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayoutParams {
    /// Stop once an iteration improves stress by less than this fraction.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Offset of a new node from its neighbors' centroid.
    pub jitter: f64,
}

impl Default for LayoutParams {
    fn default() -> Self {
        LayoutParams {
            tolerance: 1e-4,
            max_iterations: 200,
            jitter: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentLayout {
    pub component_id: String,
    pub positions: BTreeMap<String, Point>,
    pub stress: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayoutRun {
    pub layout: ComponentLayout,
    /// Stress of the initial configuration followed by every computed iterate,
    /// including a final one that was discarded for improving too little.
    pub stress_trace: Vec<f64>,
}

/// Initial positions: warm-started nodes keep their previous position; new
/// nodes go to the centroid of their warm-started neighbors plus a seeded
/// jitter, or to a seeded point in the unit disc around the warm-started
/// centroid (the origin on a cold start).
pub fn initial_positions(
    g: &SimilarityGraph,
    ids: &[String],
    warm_start: Option<&BTreeMap<String, Point>>,
    params: &LayoutParams,
    rng: &mut ChaCha8Rng,
) -> Vec<Point> {
    let warm = |id: &str| warm_start.and_then(|w| w.get(id)).copied();
    let known: Vec<Option<Point>> = ids.iter().map(|id| warm(id)).collect();
    let center = geom::centroid(known.iter().flatten().copied()).unwrap_or(Point::ORIGIN);
    let adj = g.adjacency();
    ids.iter()
        .enumerate()
        .map(|(i, id)| {
            if let Some(p) = known[i] {
                return p;
            }
            let gi = g.index_of(id);
            let nbrs = gi
                .map(|gi| adj[gi].iter().filter_map(|&(j, _)| warm(&g.nodes()[j])).collect::<Vec<_>>())
                .unwrap_or_default();
            if let Some(c) = geom::centroid(nbrs) {
                let angle = rng.random_range(0.0..std::f64::consts::TAU);
                Point::new(c.x + params.jitter * angle.cos(), c.y + params.jitter * angle.sin())
            } else {
                let r = rng.random::<f64>().sqrt();
                let angle = rng.random_range(0.0..std::f64::consts::TAU);
                Point::new(center.x + r * angle.cos(), center.y + r * angle.sin())
            }
        })
        .collect()
}

/// Lays out one connected component.
///
/// `g` supplies adjacency for initializing new nodes; `distances` must
/// cover the same ids. The result is deterministic in `(inputs, seed)`.
pub fn layout_component(
    component_id: &str,
    g: &SimilarityGraph,
    distances: &DistanceMatrix,
    warm_start: Option<&BTreeMap<String, Point>>,
    seed: u64,
    params: &LayoutParams,
) -> Result<LayoutRun, LayoutError> {
    distances.validate()?;
    let ids = distances.ids();
    let n = ids.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ geom::stable_hash(component_id));

    if n == 0 {
        return Ok(LayoutRun {
            layout: ComponentLayout {
                component_id: component_id.to_string(),
                positions: BTreeMap::new(),
                stress: 0.0,
            },
            stress_trace: vec![0.0],
        });
    }
    if n == 1 {
        let p = warm_start.and_then(|w| w.get(&ids[0])).copied().unwrap_or(Point::ORIGIN);
        return Ok(LayoutRun {
            layout: ComponentLayout {
                component_id: component_id.to_string(),
                positions: BTreeMap::from([(ids[0].clone(), p)]),
                stress: 0.0,
            },
            stress_trace: vec![0.0],
        });
    }

    let mut x = initial_positions(g, ids, warm_start, params, &mut rng);
    let mut current = stress(&x, distances);
    let mut trace = vec![current];

    let solver = Majorizer::new(distances);
    for _ in 0..params.max_iterations {
        if current == 0.0 {
            break;
        }
        let next = solver.step(&x);
        let s = stress(&next, distances);
        trace.push(s);
        // a step that fails to improve enough is discarded, which makes a
        // converged layout a fixed point of the next warm-started run
        if !((current - s) / current >= params.tolerance) {
            break;
        }
        x = next;
        current = s;
    }

    Ok(LayoutRun {
        layout: ComponentLayout {
            component_id: component_id.to_string(),
            positions: ids.iter().cloned().zip(x).collect(),
            stress: current,
        },
        stress_trace: trace,
    })
}

/// Guttman transform `X ← V⁺ B(X) X` for fixed weights `w = d⁻²`.
struct Majorizer<'a> {
    distances: &'a DistanceMatrix,
    /// Cholesky factor of `V + 11ᵀ/n`, whose inverse acts as `V⁺` on
    /// zero-sum right-hand sides.
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
}

impl<'a> Majorizer<'a> {
    fn new(distances: &'a DistanceMatrix) -> Self {
        let n = distances.len();
        let inv_n = 1.0 / n as f64;
        let mut v = DMatrix::from_element(n, n, inv_n);
        for i in 0..n {
            let mut diag = 0.0;
            for j in 0..n {
                if i != j {
                    let d = distances.get(i, j);
                    let w = 1.0 / (d * d);
                    v[(i, j)] -= w;
                    diag += w;
                }
            }
            v[(i, i)] += diag;
        }
        let chol = v.cholesky().expect("weighted Laplacian plus rank-one term is positive definite");
        Majorizer { distances, chol }
    }

    fn step(&self, x: &[Point]) -> Vec<Point> {
        let n = x.len();
        let mut bx = DVector::zeros(n);
        let mut by = DVector::zeros(n);
        for i in 0..n {
            let (mut sx, mut sy) = (0.0, 0.0);
            for j in 0..n {
                if i == j {
                    continue;
                }
                let len = x[i].dist(x[j]);
                if len > 0.0 {
                    let d = self.distances.get(i, j);
                    // w_ij · d_ij / ‖x_i − x_j‖ with w = d⁻²
                    let f = 1.0 / (d * len);
                    sx += f * (x[i].x - x[j].x);
                    sy += f * (x[i].y - x[j].y);
                }
            }
            bx[i] = sx;
            by[i] = sy;
        }
        let nx = self.chol.solve(&bx);
        let ny = self.chol.solve(&by);
        // V⁺ returns a centered layout; restore the previous centroid
        let c = geom::centroid(x.iter().copied()).unwrap_or(Point::ORIGIN);
        let mx = nx.mean();
        let my = ny.mean();
        (0..n)
            .map(|i| Point::new(nx[i] - mx + c.x, ny[i] - my + c.y))
            .collect()
    }
}
