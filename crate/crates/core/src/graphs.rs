//! Regular graphs hosting the filling process.
//!
//! Rings, tori and complete graphs are stored implicitly: neighbors are
//! computed from the vertex index, so `K_{N+1}` with `N = 10^5` costs no
//! adjacency memory. Random regular graphs carry an explicit flat adjacency
//! table.
//!
//! Torus vertices use row-major encoding: coordinate `(x_0, ..., x_{d-1})`
//! maps to `sum_i x_i * L^(d-1-i)`, so the last axis varies fastest.

use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default number of full pairing redraws before [`random_regular`] gives up.
pub const DEFAULT_PAIRING_RETRIES: usize = 10_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("ring and torus side length must be at least 3, got L = {0}")]
    SideTooShort(usize),
    #[error("torus dimension must be at least 1")]
    ZeroDimension,
    #[error("complete graph needs at least 2 vertices, got V = {0}")]
    TooFewVertices(usize),
    #[error("random regular graph needs 3 <= r <= V - 1, got V = {vertices}, r = {degree}")]
    DegreeOutOfRange { vertices: usize, degree: usize },
    #[error("V * r must be even (handshake lemma), got V = {vertices}, r = {degree}")]
    OddDegreeSum { vertices: usize, degree: usize },
    #[error("torus with L = {side}, d = {dim} exceeds the supported vertex count")]
    TooLarge { side: usize, dim: usize },
    #[error("no simple connected {degree}-regular graph on {vertices} vertices after {retries} pairing redraws")]
    RetriesExhausted {
        vertices: usize,
        degree: usize,
        retries: usize,
    },
}

/// Which regular graph to build.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GraphSpec {
    Ring {
        #[serde(rename = "L")]
        side: usize,
    },
    Torus {
        d: usize,
        #[serde(rename = "L")]
        side: usize,
    },
    Complete {
        #[serde(rename = "V")]
        vertices: usize,
    },
    RandomRegular {
        #[serde(rename = "V")]
        vertices: usize,
        r: usize,
        graph_seed: u64,
    },
}

impl GraphSpec {
    pub fn validate(&self) -> Result<(), GraphError> {
        match *self {
            GraphSpec::Ring { side } => check_side(side),
            GraphSpec::Torus { d, side } => {
                if d == 0 {
                    return Err(GraphError::ZeroDimension);
                }
                check_side(side)?;
                torus_size(d, side).map(|_| ())
            }
            GraphSpec::Complete { vertices } => {
                if vertices < 2 {
                    Err(GraphError::TooFewVertices(vertices))
                } else {
                    Ok(())
                }
            }
            GraphSpec::RandomRegular { vertices, r, .. } => check_regular(vertices, r),
        }
    }

    /// Number of vertices the built graph will have.
    pub fn vertex_count(&self) -> Result<usize, GraphError> {
        self.validate()?;
        Ok(match *self {
            GraphSpec::Ring { side } => side,
            GraphSpec::Torus { d, side } => torus_size(d, side)?,
            GraphSpec::Complete { vertices } | GraphSpec::RandomRegular { vertices, .. } => {
                vertices
            }
        })
    }
}

fn check_side(side: usize) -> Result<(), GraphError> {
    if side < 3 {
        Err(GraphError::SideTooShort(side))
    } else {
        Ok(())
    }
}

fn check_regular(vertices: usize, degree: usize) -> Result<(), GraphError> {
    if degree < 3 || degree + 1 > vertices {
        return Err(GraphError::DegreeOutOfRange { vertices, degree });
    }
    if (vertices * degree) % 2 == 1 {
        return Err(GraphError::OddDegreeSum { vertices, degree });
    }
    Ok(())
}

fn torus_size(dim: usize, side: usize) -> Result<usize, GraphError> {
    let mut n: usize = 1;
    for _ in 0..dim {
        n = n
            .checked_mul(side)
            .filter(|&n| n <= u32::MAX as usize)
            .ok_or(GraphError::TooLarge { side, dim })?;
    }
    Ok(n)
}

#[derive(Debug, Clone)]
enum Topology {
    Complete,
    Torus { dim: usize, side: usize, strides: Vec<usize> },
    Explicit { adjacency: Vec<u32> },
}

/// A connected simple `r`-regular graph.
///
/// Immutable once built; share it across replica runners by reference.
#[derive(Debug, Clone)]
pub struct RegularGraph {
    vertices: usize,
    degree: usize,
    topology: Topology,
}

/// Build the graph described by `spec`.
pub fn build_graph(spec: &GraphSpec) -> Result<RegularGraph, GraphError> {
    spec.validate()?;
    match *spec {
        GraphSpec::Ring { side } => Ok(RegularGraph::torus(1, side)),
        GraphSpec::Torus { d, side } => Ok(RegularGraph::torus(d, side)),
        GraphSpec::Complete { vertices } => Ok(RegularGraph {
            vertices,
            degree: vertices - 1,
            topology: Topology::Complete,
        }),
        GraphSpec::RandomRegular {
            vertices,
            r,
            graph_seed,
        } => random_regular(vertices, r, graph_seed),
    }
}

/// Uniform simple connected `r`-regular graph from the pairing model.
///
/// The whole pairing is redrawn whenever it produces a self-loop or a double
/// edge, and again if the accepted graph is disconnected. Deterministic in
/// `graph_seed`.
pub fn random_regular(vertices: usize, degree: usize, graph_seed: u64) -> Result<RegularGraph, GraphError> {
    random_regular_with_retries(vertices, degree, graph_seed, DEFAULT_PAIRING_RETRIES)
}

pub fn random_regular_with_retries(
    vertices: usize,
    degree: usize,
    graph_seed: u64,
    max_retries: usize,
) -> Result<RegularGraph, GraphError> {
    check_regular(vertices, degree)?;
    let mut rng = ChaCha8Rng::seed_from_u64(graph_seed);
    let mut points: Vec<u32> = (0..vertices as u32)
        .flat_map(|v| std::iter::repeat_n(v, degree))
        .collect();
    let mut adjacency = vec![0u32; vertices * degree];
    let mut fill = vec![0usize; vertices];

    for _ in 0..max_retries {
        points.shuffle(&mut rng);
        fill.iter_mut().for_each(|f| *f = 0);
        let mut simple = true;
        for pair in points.chunks_exact(2) {
            let (u, v) = (pair[0] as usize, pair[1] as usize);
            if u == v {
                simple = false;
                break;
            }
            let row = &adjacency[u * degree..u * degree + fill[u]];
            if row.contains(&(v as u32)) {
                simple = false;
                break;
            }
            adjacency[u * degree + fill[u]] = v as u32;
            adjacency[v * degree + fill[v]] = u as u32;
            fill[u] += 1;
            fill[v] += 1;
        }
        if !simple {
            continue;
        }
        for row in adjacency.chunks_exact_mut(degree) {
            row.sort_unstable();
        }
        let graph = RegularGraph {
            vertices,
            degree,
            topology: Topology::Explicit {
                adjacency: adjacency.clone(),
            },
        };
        if graph.is_connected() {
            return Ok(graph);
        }
    }
    Err(GraphError::RetriesExhausted {
        vertices,
        degree,
        retries: max_retries,
    })
}

impl RegularGraph {
    fn torus(dim: usize, side: usize) -> Self {
        let vertices = side.pow(dim as u32);
        let strides = (0..dim).map(|i| side.pow((dim - 1 - i) as u32)).collect();
        RegularGraph {
            vertices,
            degree: 2 * dim,
            topology: Topology::Torus { dim, side, strides },
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn is_complete(&self) -> bool {
        matches!(self.topology, Topology::Complete)
    }

    /// The `k`-th neighbor of `v`, `k < degree`.
    ///
    /// Complete graphs list neighbors in increasing order; torus neighbors
    /// come as `+1, -1` along each axis in turn.
    #[inline]
    pub fn neighbor(&self, v: usize, k: usize) -> usize {
        debug_assert!(v < self.vertices && k < self.degree);
        match &self.topology {
            Topology::Complete => {
                if k < v {
                    k
                } else {
                    k + 1
                }
            }
            Topology::Torus { side, strides, .. } => {
                let stride = strides[k / 2];
                let x = (v / stride) % side;
                if k % 2 == 0 {
                    if x + 1 == *side {
                        v + stride - side * stride
                    } else {
                        v + stride
                    }
                } else if x == 0 {
                    v + (side - 1) * stride
                } else {
                    v - stride
                }
            }
            Topology::Explicit { adjacency } => adjacency[v * self.degree + k] as usize,
        }
    }

    /// A neighbor of `v` chosen uniformly at random.
    #[inline]
    pub fn random_neighbor<R: Rng + ?Sized>(&self, v: usize, rng: &mut R) -> usize {
        let k = rng.random_range(0..self.degree);
        self.neighbor(v, k)
    }

    pub fn neighbors(&self, v: usize) -> Vec<usize> {
        (0..self.degree).map(|k| self.neighbor(v, k)).collect()
    }

    /// Torus coordinates of a vertex (row-major); `None` for other topologies.
    pub fn coordinates(&self, v: usize) -> Option<Vec<usize>> {
        match &self.topology {
            Topology::Torus { side, strides, .. } => {
                Some(strides.iter().map(|s| (v / s) % side).collect())
            }
            _ => None,
        }
    }

    /// Inverse of [`coordinates`](Self::coordinates).
    pub fn vertex_at(&self, coords: &[usize]) -> Option<usize> {
        match &self.topology {
            Topology::Torus { dim, side, strides } => {
                if coords.len() != *dim || coords.iter().any(|&x| x >= *side) {
                    return None;
                }
                Some(coords.iter().zip(strides).map(|(x, s)| x * s).sum())
            }
            _ => None,
        }
    }

    pub fn edge_count(&self) -> usize {
        self.vertices * self.degree / 2
    }

    pub fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.vertices];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut reached = 1;
        while let Some(v) = queue.pop_front() {
            for k in 0..self.degree {
                let u = self.neighbor(v, k);
                if !seen[u] {
                    seen[u] = true;
                    reached += 1;
                    queue.push_back(u);
                }
            }
        }
        reached == self.vertices
    }

    /// Full invariant scan: regular, simple, symmetric, connected.
    ///
    /// Quadratic in the degree per vertex; meant for tests and small graphs.
    pub fn check_invariants(&self) -> Result<(), String> {
        for v in 0..self.vertices {
            let mut nb = self.neighbors(v);
            if nb.len() != self.degree {
                return Err(format!("vertex {v} has {} neighbors, expected {}", nb.len(), self.degree));
            }
            if nb.contains(&v) {
                return Err(format!("self-loop at vertex {v}"));
            }
            for &u in &nb {
                if u >= self.vertices {
                    return Err(format!("vertex {v} has out-of-range neighbor {u}"));
                }
                if !self.neighbors(u).contains(&v) {
                    return Err(format!("edge {v} -> {u} is not symmetric"));
                }
            }
            nb.sort_unstable();
            if nb.windows(2).any(|w| w[0] == w[1]) {
                return Err(format!("duplicate neighbor at vertex {v}"));
            }
        }
        if !self.is_connected() {
            return Err("graph is disconnected".into());
        }
        Ok(())
    }
}
