//! The interlaced iteration: priority consensus, mixing, a local gradient
//! step and projection onto the common box.
//!
//! Iterates are stored column-per-agent: `x` is `n x m` and column `i` is
//! `x^i(k)`. Iteration counting starts at `k = 1` so that `α_k = α0 / k` is
//! defined on the first gradient step.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::consensus::PriorityState;
use crate::error::{shape_err, Error, Result};
use crate::graph::Graph;
use crate::mixing::{build_mixing_matrix, MixingMatrix};
use crate::problems::{weighted_value, OracleSolution, QuadraticProblem};

/// Axis-aligned box `[lower, upper]`, the common constraint set.
#[derive(Clone, Debug, PartialEq)]
pub struct BoxConstraint {
    lower: DVector<f64>,
    upper: DVector<f64>,
}

impl BoxConstraint {
    pub fn new(lower: DVector<f64>, upper: DVector<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(shape_err(lower.len().max(1), upper.len()));
        }
        for (i, (lo, hi)) in lower.iter().zip(upper.iter()).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::Domain(format!(
                    "box coordinate {i}: need finite lower < upper, got [{lo}, {hi}]"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    /// Broadcasts scalar bounds to `n` coordinates.
    pub fn uniform(n: usize, lower: f64, upper: f64) -> Result<Self> {
        Self::new(DVector::from_element(n, lower), DVector::from_element(n, upper))
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &DVector<f64> {
        &self.lower
    }

    pub fn upper(&self) -> &DVector<f64> {
        &self.upper
    }

    pub fn max_abs(&self) -> f64 {
        self.lower.amax().max(self.upper.amax())
    }

    pub fn contains(&self, x: &DVector<f64>) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lower.iter().zip(self.upper.iter()))
                .all(|(v, (lo, hi))| lo <= v && v <= hi)
    }

    /// Euclidean projection, a coordinatewise clamp.
    pub fn project(&self, p: &DVector<f64>) -> Result<DVector<f64>> {
        if p.len() != self.dim() {
            return Err(shape_err(self.dim(), p.len()));
        }
        if p.iter().any(|v| v.is_nan()) {
            return Err(Error::Numeric("cannot project a NaN coordinate".into()));
        }
        Ok(DVector::from_fn(p.len(), |i, _| {
            p[i].clamp(self.lower[i], self.upper[i])
        }))
    }

    fn clamp_column(&self, col: &mut nalgebra::DVectorViewMut<'_, f64>) {
        for (i, v) in col.iter_mut().enumerate() {
            *v = v.clamp(self.lower[i], self.upper[i]);
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        DVector::from_fn(self.dim(), |i, _| rng.random_range(self.lower[i]..=self.upper[i]))
    }
}

pub fn project_box(p: &DVector<f64>, bounds: &BoxConstraint) -> Result<DVector<f64>> {
    bounds.project(p)
}

/// `α_k = α0 / k`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepSchedule {
    alpha0: f64,
}

impl StepSchedule {
    /// `alpha0 = 0` is accepted and turns the run into pure consensus mixing.
    pub fn new(alpha0: f64) -> Result<Self> {
        if !(alpha0 >= 0.0 && alpha0.is_finite()) {
            return Err(Error::Domain(format!(
                "alpha0 must be finite and >= 0, got {alpha0}"
            )));
        }
        Ok(Self { alpha0 })
    }

    pub fn alpha0(&self) -> f64 {
        self.alpha0
    }

    pub fn step_size(&self, k: usize) -> Result<f64> {
        if k == 0 {
            return Err(Error::IterationIndex(k));
        }
        Ok(self.alpha0 / k as f64)
    }
}

pub fn step_size(k: usize, schedule: &StepSchedule) -> Result<f64> {
    schedule.step_size(k)
}

/// Point at which each agent evaluates its gradient.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GradientAt {
    /// `d_i(k) = ∇f_i(x^i(k))`.
    #[default]
    Iterate,
    /// `d_i(k) = ∇f_i(v^i(k))`.
    Mixed,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SwarmState {
    /// `n x m`, column `i` is `x^i(k)`.
    pub x: DMatrix<f64>,
    /// Mixed states `v^i(k-1)` of the step that produced `x`; equal to `x`
    /// before the first step.
    pub v: DMatrix<f64>,
    /// Projection errors `φ^i(k-1)` of the step that produced `x`.
    pub phi_err: DMatrix<f64>,
    pub k: usize,
}

impl SwarmState {
    /// `x0` is `n x m` with one column per agent; starts the count at `k = 1`.
    pub fn new(x0: DMatrix<f64>) -> Self {
        let zeros = DMatrix::zeros(x0.nrows(), x0.ncols());
        Self {
            v: x0.clone(),
            phi_err: zeros,
            x: x0,
            k: 1,
        }
    }

    pub fn from_agents(iterates: &[DVector<f64>]) -> Result<Self> {
        let n = iterates.first().map_or(0, |x| x.len());
        if n == 0 || iterates.iter().any(|x| x.len() != n) {
            return Err(shape_err("non-empty iterates of equal length", n));
        }
        Ok(Self::new(DMatrix::from_columns(iterates)))
    }

    pub fn agent_count(&self) -> usize {
        self.x.ncols()
    }

    pub fn dim(&self) -> usize {
        self.x.nrows()
    }

    pub fn iterate(&self, i: usize) -> DVector<f64> {
        self.x.column(i).into_owned()
    }

    /// `y(k) = (1/m) Σ_j x^j(k)`.
    pub fn average(&self) -> DVector<f64> {
        self.x.column_mean()
    }

    /// `max_i ||x^i(k) - y(k)||`.
    pub fn disagreement(&self) -> f64 {
        let y = self.average();
        self.x
            .column_iter()
            .map(|col| (col - &y).norm())
            .fold(0.0, f64::max)
    }

    /// `||x^i(k) - z||²` for every agent.
    pub fn squared_distances(&self, z: &DVector<f64>) -> Vec<f64> {
        self.x.column_iter().map(|col| (col - z).norm_squared()).collect()
    }
}

pub fn average_state(state: &SwarmState) -> DVector<f64> {
    state.average()
}

/// Everything one iteration consumed and produced; the invariant tests
/// read the intermediate quantities.
#[derive(Clone, Debug)]
pub struct StepOutput {
    pub state: SwarmState,
    pub priorities: PriorityState,
    /// `A(k)`, built from the priorities the step started with.
    pub mixing: MixingMatrix,
    /// `n x m`, column `i` is the gradient `d_i(k)` actually applied.
    pub gradients: DMatrix<f64>,
    pub alpha: f64,
}

fn check_inputs(
    state: &SwarmState,
    priorities: &PriorityState,
    g: &Graph,
    problems: &[QuadraticProblem],
    bounds: &BoxConstraint,
) -> Result<()> {
    let m = state.agent_count();
    let n = state.dim();
    if priorities.agent_count() != m || g.agent_count() != m || problems.len() != m {
        return Err(shape_err(
            format!("{m} agents everywhere"),
            format!(
                "priorities {}, graph {}, problems {}",
                priorities.agent_count(),
                g.agent_count(),
                problems.len()
            ),
        ));
    }
    if bounds.dim() != n {
        return Err(shape_err(format!("{n}-dimensional box"), bounds.dim()));
    }
    if let Some(p) = problems.iter().find(|p| p.dim() != n) {
        return Err(shape_err(format!("{n}-dimensional problems"), p.dim()));
    }
    Ok(())
}

/// One iteration of the algorithm at index `state.k`:
///
/// 1. `A(k)` from `W(k)`, and `W(k+1) = W(k) + c L-consensus step`;
/// 2. `v^i(k) = Σ_j a^i_j(k) x^j(k)`;
/// 3. `x^i(k+1) = P_X[v^i(k) - α_k d_i(k)]`, recording
///    `φ^i(k) = x^i(k+1) - v^i(k) + α_k d_i(k)`.
pub fn algorithm_step_detailed(
    state: &SwarmState,
    priorities: &PriorityState,
    g: &Graph,
    problems: &[QuadraticProblem],
    schedule: &StepSchedule,
    bounds: &BoxConstraint,
    gradient_at: GradientAt,
) -> Result<StepOutput> {
    check_inputs(state, priorities, g, problems, bounds)?;
    let next_priorities = priorities.priority_step(g)?;
    let mixing = build_mixing_matrix(priorities, g)?;
    let alpha = schedule.step_size(state.k)?;

    // column i of V is Σ_j a_ij x^j
    let v = &state.x * mixing.matrix().transpose();

    let source = match gradient_at {
        GradientAt::Iterate => &state.x,
        GradientAt::Mixed => &v,
    };
    let mut gradients = DMatrix::zeros(state.dim(), state.agent_count());
    for (i, p) in problems.iter().enumerate() {
        let mut d = gradients.column_mut(i);
        d.copy_from(p.r());
        d.gemv(1.0, p.q(), &source.column(i), 1.0);
    }

    let unprojected = &v - &gradients * alpha;
    let mut x = unprojected.clone();
    for i in 0..x.ncols() {
        bounds.clamp_column(&mut x.column_mut(i));
    }
    if let Some(agent) = x.column_iter().position(|col| col.iter().any(|v| !v.is_finite())) {
        return Err(Error::Divergence {
            k: state.k,
            agent: agent + 1,
        });
    }
    let phi_err = &x - &unprojected;

    Ok(StepOutput {
        state: SwarmState {
            x,
            v,
            phi_err,
            k: state.k + 1,
        },
        priorities: next_priorities,
        mixing,
        gradients,
        alpha,
    })
}

pub fn algorithm_step(
    state: &SwarmState,
    priorities: &PriorityState,
    g: &Graph,
    problems: &[QuadraticProblem],
    schedule: &StepSchedule,
    bounds: &BoxConstraint,
    gradient_at: GradientAt,
) -> Result<(SwarmState, PriorityState)> {
    let out = algorithm_step_detailed(state, priorities, g, problems, schedule, bounds, gradient_at)?;
    Ok((out.state, out.priorities))
}

/// Fully materialised inputs of one run.
#[derive(Clone, Debug)]
pub struct RunSetup {
    pub graph: Graph,
    pub problems: Vec<QuadraticProblem>,
    pub priorities: PriorityState,
    /// `n x m`, one column per agent.
    pub x0: DMatrix<f64>,
    pub schedule: StepSchedule,
    pub bounds: BoxConstraint,
    pub iterations: usize,
    pub record_every: usize,
    pub gradient_at: GradientAt,
    /// Centralized optimum for the consensus weights, if available.
    pub oracle: Option<OracleSolution>,
    /// Iteration indices at which per-agent squared distances to `x*` are
    /// kept in full.
    pub snapshots: Vec<usize>,
}

impl RunSetup {
    /// Consensus priorities `w̄`, the mean of the initial table.
    pub fn consensus_weights(&self) -> DVector<f64> {
        self.priorities.average_priorities()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceRecord {
    pub k: usize,
    pub alpha_k: f64,
    pub y: DVector<f64>,
    pub disagreement: f64,
    pub sum_sq_dist_to_opt: Option<f64>,
    pub f_of_y: f64,
    pub min_w_entry: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TraceMeta {
    pub config_hash: String,
    pub seed: u64,
}

#[derive(Clone, Debug)]
pub struct Trace {
    pub records: Vec<TraceRecord>,
    /// Per-agent `||x^j(k) - x*||²` at the requested snapshot iterations.
    pub snapshots: BTreeMap<usize, Vec<f64>>,
    pub wbar: DVector<f64>,
    pub oracle: Option<OracleSolution>,
    pub final_state: SwarmState,
    pub final_priorities: PriorityState,
    pub meta: TraceMeta,
}

impl Trace {
    pub fn last(&self) -> &TraceRecord {
        self.records
            .last()
            .expect("a trace always holds the initial record")
    }

    /// `|f(ŷ) - f*| / |f*|` at the final iterate.
    pub fn relative_gap(&self) -> Option<f64> {
        self.oracle
            .as_ref()
            .map(|o| (self.last().f_of_y - o.f_star).abs() / o.f_star.abs())
    }
}

fn record(
    state: &SwarmState,
    priorities: &PriorityState,
    setup: &RunSetup,
    wbar: &DVector<f64>,
) -> Result<TraceRecord> {
    let y = state.average();
    let rec = TraceRecord {
        k: state.k,
        alpha_k: setup.schedule.step_size(state.k)?,
        disagreement: state.disagreement(),
        sum_sq_dist_to_opt: setup
            .oracle
            .as_ref()
            .map(|o| state.squared_distances(&o.x_star).iter().sum()),
        f_of_y: weighted_value(&setup.problems, wbar, &y),
        min_w_entry: priorities.min_entry(),
        y,
    };
    Ok(rec)
}

/// Runs `setup.iterations` steps from the initial state, recording the
/// initial state, every `record_every`-th state and the final one.
pub fn run_trace(setup: &RunSetup) -> Result<Trace> {
    if setup.record_every == 0 {
        return Err(Error::Config("record_every must be >= 1".into()));
    }
    let mut state = SwarmState::new(setup.x0.clone());
    let mut priorities = setup.priorities.clone();
    check_inputs(&state, &priorities, &setup.graph, &setup.problems, &setup.bounds)?;
    priorities.check_gain(&setup.graph)?;
    let wbar = setup.consensus_weights();

    let mut snapshots = BTreeMap::new();
    let mut take_snapshot = |state: &SwarmState| {
        if let Some(o) = &setup.oracle {
            if setup.snapshots.contains(&state.k) {
                snapshots.insert(state.k, state.squared_distances(&o.x_star));
            }
        }
    };

    let mut records = vec![record(&state, &priorities, setup, &wbar)?];
    take_snapshot(&state);
    for done in 1..=setup.iterations {
        let (next, next_w) = algorithm_step(
            &state,
            &priorities,
            &setup.graph,
            &setup.problems,
            &setup.schedule,
            &setup.bounds,
            setup.gradient_at,
        )?;
        state = next;
        priorities = next_w;
        take_snapshot(&state);
        if done % setup.record_every == 0 || done == setup.iterations {
            records.push(record(&state, &priorities, setup, &wbar)?);
        }
    }
    Ok(Trace {
        records,
        snapshots,
        wbar,
        oracle: setup.oracle.clone(),
        final_state: state,
        final_priorities: priorities,
        meta: TraceMeta::default(),
    })
}
