//! Priority consensus: every agent repeatedly pulls its priority vector
//! toward its neighbours' through the Laplacian gain `c`.
//!
//! Priorities are stored agent-major: row `i` of the table is agent `i`'s
//! vector `w^i`, and entry `(i, j)` is agent `i`'s priority for objective
//! `f_j`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{shape_err, Error, Result};
use crate::graph::Graph;

/// Row sums of user-supplied tables must match 1 to this tolerance.
pub const SIMPLEX_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct PriorityState {
    w: DMatrix<f64>,
    c: f64,
}

impl PriorityState {
    /// Validates a square agent-major table. Entries must be strictly
    /// positive and below 1 (a lone agent holds the single weight 1).
    pub fn new(w: DMatrix<f64>, c: f64) -> Result<Self> {
        validate_table(&w)?;
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::GainOutOfRange {
                c,
                upper: f64::INFINITY,
            });
        }
        Ok(Self { w, c })
    }

    pub fn from_rows(rows: &[Vec<f64>], c: f64) -> Result<Self> {
        let m = rows.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != m) {
            return Err(shape_err(format!("{m} entries per row"), bad.len()));
        }
        Self::new(DMatrix::from_fn(m, m, |i, j| rows[i][j]), c)
    }

    /// Each agent draws `m` uniforms, floors them at `min_weight` and
    /// normalises to sum 1.
    pub fn random<R: Rng + ?Sized>(m: usize, min_weight: f64, c: f64, rng: &mut R) -> Result<Self> {
        if !(0.0..1.0).contains(&min_weight) {
            return Err(Error::Domain(format!(
                "min_weight must lie in [0, 1), got {min_weight}"
            )));
        }
        let mut w = DMatrix::zeros(m, m);
        for i in 0..m {
            let mut row: Vec<f64> = (0..m)
                .map(|_| rng.random::<f64>().max(min_weight).max(f64::MIN_POSITIVE))
                .collect();
            let total: f64 = row.iter().sum();
            row.iter_mut().for_each(|v| *v /= total);
            for (j, v) in row.into_iter().enumerate() {
                w[(i, j)] = v;
            }
        }
        Self::new(w, c)
    }

    pub fn agent_count(&self) -> usize {
        self.w.nrows()
    }

    pub fn gain(&self) -> f64 {
        self.c
    }

    /// Agent-major priority table `W(k)`.
    pub fn weights(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn min_entry(&self) -> f64 {
        self.w.min()
    }

    pub fn check_gain(&self, g: &Graph) -> Result<()> {
        let upper = g.gain_upper_bound();
        if self.c > 0.0 && self.c < upper {
            Ok(())
        } else {
            Err(Error::GainOutOfRange { c: self.c, upper })
        }
    }

    fn check_graph(&self, g: &Graph) -> Result<()> {
        if g.agent_count() != self.agent_count() {
            return Err(shape_err(
                format!("{} agents", self.agent_count()),
                format!("graph with {} agents", g.agent_count()),
            ));
        }
        self.check_gain(g)
    }

    /// One consensus round, `w^i += c * Σ_j h_ij (w^j - w^i)` for every agent.
    pub fn priority_step(&self, g: &Graph) -> Result<Self> {
        self.check_graph(g)?;
        let m = self.agent_count();
        let mut next = self.w.clone();
        for i in 0..m {
            for j in g.neighbors(i) {
                for l in 0..m {
                    next[(i, l)] += self.c * (self.w[(j, l)] - self.w[(i, l)]);
                }
            }
        }
        Ok(Self { w: next, c: self.c })
    }

    /// Network form of [`Self::priority_step`]: `W(k+1) = (I - cL) W(k)`,
    /// with `P` combining agents (rows of the table).
    pub fn network_step(&self, g: &Graph) -> Result<Self> {
        self.check_graph(g)?;
        let m = self.agent_count();
        let p = DMatrix::identity(m, m) - g.laplacian() * self.c;
        Ok(Self {
            w: p * &self.w,
            c: self.c,
        })
    }

    /// Arithmetic mean of the agents' vectors; the consensus limit when
    /// called on the initial state.
    pub fn average_priorities(&self) -> DVector<f64> {
        self.w.row_mean().transpose()
    }

    /// `max_i ||w^i - w̄||₂` against the supplied target.
    pub fn distance_to(&self, target: &DVector<f64>) -> f64 {
        (0..self.agent_count())
            .map(|i| (self.w.row(i).transpose() - target).norm())
            .fold(0.0, f64::max)
    }
}

fn validate_table(w: &DMatrix<f64>) -> Result<()> {
    let m = w.nrows();
    if m == 0 || w.ncols() != m {
        return Err(shape_err(
            "non-empty square m x m table",
            format!("{} x {}", w.nrows(), w.ncols()),
        ));
    }
    for i in 0..m {
        let row = w.row(i);
        if let Some(v) = row.iter().find(|v| !v.is_finite() || **v <= 0.0) {
            return Err(Error::Simplex {
                agent: i + 1,
                reason: format!("entry {v} is not strictly positive"),
            });
        }
        if m > 1 {
            if let Some(v) = row.iter().find(|v| **v >= 1.0) {
                return Err(Error::Simplex {
                    agent: i + 1,
                    reason: format!("entry {v} is not below 1"),
                });
            }
        }
        let sum = row.sum();
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::Simplex {
                agent: i + 1,
                reason: format!("row sums to {sum}"),
            });
        }
    }
    Ok(())
}
