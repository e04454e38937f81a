//! Priority-driven mixing matrices `A(k)` and their transition products.
//!
//! Orientation: `A` is agent-major, row `i` holds the weights agent `i`
//! applies to the iterates it receives, so `v^i = Σ_j A[(i, j)] x^j` and
//! every row sums to 1. Columns generally do not.

use nalgebra::DMatrix;

use crate::consensus::PriorityState;
use crate::error::{shape_err, Error, Result};
use crate::graph::Graph;

#[derive(Clone, Debug, PartialEq)]
pub struct MixingMatrix(DMatrix<f64>);

impl MixingMatrix {
    /// Wraps an arbitrary square matrix, e.g. for products in tests. No
    /// stochasticity check is made here.
    pub fn from_matrix(a: DMatrix<f64>) -> Result<Self> {
        if a.nrows() != a.ncols() || a.nrows() == 0 {
            return Err(shape_err(
                "square matrix",
                format!("{} x {}", a.nrows(), a.ncols()),
            ));
        }
        Ok(Self(a))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    /// Largest weight `ω(k)` in the matrix.
    pub fn max_weight(&self) -> f64 {
        self.0.max()
    }
}

/// Agent `i` keeps `w^i_j` for each neighbour `j`, folds the priorities of
/// every agent it cannot hear from into its own weight, and assigns 0 to
/// non-neighbours.
pub fn build_mixing_matrix(w: &PriorityState, g: &Graph) -> Result<MixingMatrix> {
    let m = w.agent_count();
    if g.agent_count() != m {
        return Err(shape_err(format!("graph with {m} agents"), g.agent_count()));
    }
    let wt = w.weights();
    let mut a = DMatrix::zeros(m, m);
    for i in 0..m {
        let mut own = wt[(i, i)];
        for j in (0..m).filter(|&j| j != i) {
            if g.is_edge(i, j) {
                a[(i, j)] = wt[(i, j)];
            } else {
                own += wt[(i, j)];
            }
        }
        a[(i, i)] = own;
    }
    Ok(MixingMatrix(a))
}

/// Hadamard form `Q∘W + diag((W∘Q̃)·1)`; kept for cross-checking
/// [`build_mixing_matrix`].
pub fn mixing_matrix_hadamard(w: &PriorityState, g: &Graph) -> DMatrix<f64> {
    let wt = w.weights();
    let kept = g.q_matrix().component_mul(wt);
    let folded = g.q_tilde().component_mul(wt).column_sum();
    kept + DMatrix::from_diagonal(&folded)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransitionProduct {
    phi: DMatrix<f64>,
    /// Index of the newest factor.
    pub k: usize,
    /// Index of the oldest factor.
    pub s: usize,
}

impl TransitionProduct {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.phi
    }

    /// Extends `Φ(k, s)` to `Φ(k+1, s) = A(k+1) Φ(k, s)`.
    pub fn push(&mut self, next: &MixingMatrix) -> Result<()> {
        if next.dim() != self.phi.nrows() {
            return Err(shape_err(format!("{0} x {0}", self.phi.nrows()), next.dim()));
        }
        self.phi = next.matrix() * &self.phi;
        self.k += 1;
        Ok(())
    }

    /// Entrywise spread across agents, `max_j (max_i Φ_ij - min_i Φ_ij)`.
    /// Zero exactly when every agent holds the same row, i.e. at the rank-one
    /// limit.
    pub fn spread(&self) -> f64 {
        column_spread(&self.phi)
    }
}

pub fn column_spread(phi: &DMatrix<f64>) -> f64 {
    phi.column_iter()
        .map(|col| col.max() - col.min())
        .fold(0.0, f64::max)
}

/// `Φ(k, s) = A(k) A(k-1) ... A(s)` for `mats` given oldest first
/// (`mats[0] = A(s)`), so the indices are `s = 0`, `k = mats.len() - 1`.
pub fn transition_product(mats: &[MixingMatrix]) -> Result<TransitionProduct> {
    let (first, rest) = mats
        .split_first()
        .ok_or_else(|| shape_err("at least one matrix", 0))?;
    let mut product = TransitionProduct {
        phi: first.matrix().clone(),
        k: 0,
        s: 0,
    };
    for a in rest {
        product.push(a)?;
    }
    Ok(product)
}

/// Geometric-convergence constants of the transition products.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeometricParams {
    pub c: f64,
    pub beta: f64,
    pub b0: usize,
    pub eta: f64,
}

impl GeometricParams {
    /// `B0 = m - 1`, `β = (1 - η^B0)^(1/B0)`, `C = 2 (1 + η^-B0) / (1 - η^B0)`.
    pub fn from_eta(eta: f64, m: usize) -> Result<Self> {
        if !(eta > 0.0 && eta < 1.0) {
            return Err(Error::Domain(format!("eta must lie in (0, 1), got {eta}")));
        }
        if m < 2 {
            return Err(Error::Domain(format!(
                "geometric constants need at least 2 agents, got {m}"
            )));
        }
        let b0 = m - 1;
        let eta_b0 = eta.powi(b0 as i32);
        let beta = (1.0 - eta_b0).powf(1.0 / b0 as f64);
        let c = 2.0 * (1.0 + 1.0 / eta_b0) / (1.0 - eta_b0);
        if !(beta > 0.0 && beta < 1.0) || !c.is_finite() {
            return Err(Error::Domain(format!(
                "eta = {eta} with m = {m} gives degenerate beta = {beta}, C = {c}"
            )));
        }
        Ok(Self { c, beta, b0, eta })
    }

    /// Constants for the minimum entry of the initial priority table.
    pub fn from_priorities(w0: &PriorityState) -> Result<Self> {
        Self::from_eta(w0.min_entry(), w0.agent_count())
    }

    /// `C β^(k-s)`.
    pub fn envelope(&self, steps: usize) -> f64 {
        self.c * self.beta.powi(steps as i32)
    }
}

pub fn geometric_params(w0: &PriorityState, m: usize) -> Result<GeometricParams> {
    if w0.agent_count() != m {
        return Err(shape_err(format!("{m} agents"), w0.agent_count()));
    }
    GeometricParams::from_priorities(w0)
}
