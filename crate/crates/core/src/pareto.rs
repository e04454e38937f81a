//! Sweeping initial priorities to trace the front of attainable objective
//! vectors.

use nalgebra::DVector;
use rayon::prelude::*;

use crate::consensus::PriorityState;
use crate::error::{shape_err, Error, Result};
use crate::optimizer::{run_trace, RunSetup};
use crate::problems::weighted_optimum;

#[derive(Clone, Debug, PartialEq)]
pub struct SweepPoint {
    pub run_id: String,
    pub w0: PriorityState,
    pub wbar: DVector<f64>,
    /// Final average iterate `x̂`.
    pub x_hat: DVector<f64>,
    /// `(f_1(x̂), ..., f_m(x̂))`.
    pub f_values: Vec<f64>,
    /// `Σ_i w̄_i f_i(x̂)`.
    pub weighted_value: f64,
    pub oracle_f: f64,
    /// Oracle objective vector `(f_1(x*), ..., f_m(x*))` for this `w̄`.
    pub oracle_f_values: Vec<f64>,
}

impl SweepPoint {
    pub fn relative_gap(&self) -> f64 {
        (self.weighted_value - self.oracle_f).abs() / self.oracle_f.abs()
    }
}

fn run_point(base: &RunSetup, run_id: String, w0: &PriorityState) -> Result<SweepPoint> {
    let mut setup = base.clone();
    setup.priorities = w0.clone();
    let wbar = w0.average_priorities();
    let oracle = weighted_optimum(&setup.problems, &wbar, &setup.bounds)?;
    setup.oracle = Some(oracle.clone());
    let trace = run_trace(&setup)?;
    let x_hat = trace.last().y.clone();
    let f_values: Vec<f64> = setup.problems.iter().map(|p| p.value(&x_hat)).collect();
    let weighted_value = f_values.iter().zip(wbar.iter()).map(|(f, w)| f * w).sum();
    let oracle_f_values = setup.problems.iter().map(|p| p.value(&oracle.x_star)).collect();
    Ok(SweepPoint {
        run_id,
        w0: w0.clone(),
        wbar,
        x_hat,
        f_values,
        weighted_value,
        oracle_f: oracle.f_star,
        oracle_f_values,
    })
}

/// One full run per initial table, everything else taken from `base`.
/// Points run in parallel and come back in input order; the first failure
/// is returned tagged with its run id.
pub fn sweep(base: &RunSetup, w0_list: &[PriorityState]) -> Result<Vec<SweepPoint>> {
    w0_list
        .par_iter()
        .enumerate()
        .map(|(idx, w0)| {
            let run_id = format!("run{idx:03}");
            run_point(base, run_id.clone(), w0).map_err(|e| Error::Run {
                run_id,
                source: Box::new(e),
            })
        })
        .collect()
}

/// Two-agent grid: agent 1 starts at `(t, 1 - t)` and agent 2 at
/// `(u, 1 - u)` with `u = (t + 1/2) / 2`, for `points` values of `t` evenly
/// spaced in `[0.05, 0.95]`. `w̄_1 = (3t + 1/2) / 4` increases with `t`.
pub fn default_two_agent_grid(points: usize, c: f64) -> Result<Vec<PriorityState>> {
    if points < 2 {
        return Err(Error::Domain("a sweep grid needs at least two points".into()));
    }
    (0..points)
        .map(|k| {
            let t = 0.05 + 0.9 * k as f64 / (points - 1) as f64;
            let u = (t + 0.5) / 2.0;
            PriorityState::from_rows(&[vec![t, 1.0 - t], vec![u, 1.0 - u]], c)
        })
        .collect()
}

/// `q` dominates `p` when `q_i ≤ p_i + tol` everywhere and `q_i < p_i - tol`
/// somewhere.
pub fn dominates(q: &[f64], p: &[f64], tol: f64) -> bool {
    let mut strictly = false;
    for (a, b) in q.iter().zip(p) {
        if *a > b + tol {
            return false;
        }
        if *a < b - tol {
            strictly = true;
        }
    }
    strictly
}

/// Non-dominated subset in input order, with dominance tolerance `tol`.
pub fn pareto_filter_tol(points: &[Vec<f64>], tol: f64) -> Result<Vec<Vec<f64>>> {
    if let Some(first) = points.first() {
        if let Some(bad) = points.iter().find(|p| p.len() != first.len()) {
            return Err(shape_err(first.len(), bad.len()));
        }
    }
    Ok(points
        .iter()
        .filter(|p| !points.iter().any(|q| dominates(q, p, tol)))
        .cloned()
        .collect())
}

pub fn pareto_filter(points: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    pareto_filter_tol(points, 0.0)
}
