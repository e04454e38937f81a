//! Undirected communication topology and the matrices derived from it.
//!
//! Agents are labelled `1..=m` at the public boundary (config files, CLI) and
//! stored zero-based. All matrices are dense `m x m`.

use std::collections::{BTreeSet, VecDeque};

use nalgebra::DMatrix;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    m: usize,
    /// Zero-based unordered pairs, stored with `i < j`.
    edges: Vec<(usize, usize)>,
    adjacency: DMatrix<f64>,
    degree: Vec<usize>,
    laplacian: DMatrix<f64>,
    max_degree: usize,
}

impl Graph {
    /// Builds a graph from 1-based edge labels. Duplicate pairs (in either
    /// orientation) collapse to a single edge.
    pub fn new(m: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if m == 0 {
            return Err(Error::EmptyGraph);
        }
        let mut set = BTreeSet::new();
        for &(a, b) in edges {
            for endpoint in [a, b] {
                if endpoint == 0 || endpoint > m {
                    return Err(Error::EndpointOutOfRange { endpoint, m });
                }
            }
            if a == b {
                return Err(Error::InvalidEdge(a, b));
            }
            let (i, j) = (a.min(b) - 1, a.max(b) - 1);
            set.insert((i, j));
        }
        let edges: Vec<_> = set.into_iter().collect();

        let mut adjacency = DMatrix::zeros(m, m);
        for &(i, j) in &edges {
            adjacency[(i, j)] = 1.0;
            adjacency[(j, i)] = 1.0;
        }
        let degree: Vec<usize> = (0..m)
            .map(|i| adjacency.row(i).iter().filter(|&&h| h != 0.0).count())
            .collect();
        let mut laplacian = -adjacency.clone();
        for (i, &d) in degree.iter().enumerate() {
            laplacian[(i, i)] = d as f64;
        }
        let max_degree = degree.iter().copied().max().unwrap_or(0);

        let graph = Self {
            m,
            edges,
            adjacency,
            degree,
            laplacian,
            max_degree,
        };
        if let Some(unreached) = graph.first_unreachable() {
            return Err(Error::Disconnected {
                unreached: unreached + 1,
            });
        }
        Ok(graph)
    }

    pub fn complete(m: usize) -> Result<Self> {
        let edges: Vec<_> = (1..=m).flat_map(|i| (i + 1..=m).map(move |j| (i, j))).collect();
        Self::new(m, &edges)
    }

    pub fn path(m: usize) -> Result<Self> {
        let edges: Vec<_> = (1..m).map(|i| (i, i + 1)).collect();
        Self::new(m, &edges)
    }

    // BFS from agent 0; returns the smallest agent it cannot reach.
    fn first_unreachable(&self) -> Option<usize> {
        let mut seen = vec![false; self.m];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        while let Some(i) = queue.pop_front() {
            for j in self.neighbors(i) {
                if !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        seen.iter().position(|&s| !s)
    }

    pub fn agent_count(&self) -> usize {
        self.m
    }

    /// Zero-based edges with `i < j`.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Zero-based indices.
    pub fn is_edge(&self, i: usize, j: usize) -> bool {
        self.adjacency[(i, j)] != 0.0
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.m).filter(move |&j| self.adjacency[(i, j)] != 0.0)
    }

    /// Adjacency matrix `H`.
    pub fn adjacency(&self) -> &DMatrix<f64> {
        &self.adjacency
    }

    pub fn degree(&self, i: usize) -> usize {
        self.degree[i]
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degree
    }

    /// `L = Δ - H`.
    pub fn laplacian(&self) -> &DMatrix<f64> {
        &self.laplacian
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    /// `Q = H + I`.
    pub fn q_matrix(&self) -> DMatrix<f64> {
        &self.adjacency + DMatrix::identity(self.m, self.m)
    }

    /// `Q̃ = 1 - Q`, ones exactly where agent `i` does not hear from `j`.
    pub fn q_tilde(&self) -> DMatrix<f64> {
        self.q_matrix().map(|q| 1.0 - q)
    }

    /// Supremum of admissible consensus gains, `1 / Δ_max` (infinite for a
    /// single agent).
    pub fn gain_upper_bound(&self) -> f64 {
        if self.max_degree == 0 {
            f64::INFINITY
        } else {
            1.0 / self.max_degree as f64
        }
    }
}
