//! Closed-form rate bounds on agent disagreement and on the distance of the
//! iterates to the weighted optimum.
//!
//! Both assume `α_k = α0 / k`. `K` is the first index with `α_K ≤ ε`, and
//! neither bound is claimed before `K + 3`.

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::mixing::GeometricParams;
use crate::optimizer::{RunSetup, Trace};
use crate::problems::gradient_bound;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundParams {
    pub m: usize,
    pub eta: f64,
    pub b0: usize,
    pub c: f64,
    pub beta: f64,
    /// Any `M` with `Σ_j ||x^j(0)|| ≤ M`.
    pub big_m: f64,
    /// Gradient bound over the box.
    pub l: f64,
    pub alpha0: f64,
    pub epsilon: f64,
    pub k_first: usize,
    pub omega_max: f64,
}

/// Smallest `k ≥ 1` with `α0 / k ≤ ε`.
pub fn first_small_step(alpha0: f64, epsilon: f64) -> Result<usize> {
    if !(epsilon > 0.0) || !(alpha0 >= 0.0) {
        return Err(Error::Domain(format!(
            "need epsilon > 0 and alpha0 >= 0, got epsilon = {epsilon}, alpha0 = {alpha0}"
        )));
    }
    let mut k = (alpha0 / epsilon).ceil().max(1.0) as usize;
    // ceil of a rounded quotient can be off by one either way
    while k > 1 && alpha0 / (k - 1) as f64 <= epsilon {
        k -= 1;
    }
    while alpha0 / k as f64 > epsilon {
        k += 1;
    }
    Ok(k)
}

impl BoundParams {
    /// Derives `B0, C, β` from `η` and `m`, `K` from `(α0, ε)` and
    /// `ω_max = 1 - η`.
    pub fn new(m: usize, eta: f64, big_m: f64, l: f64, alpha0: f64, epsilon: f64) -> Result<Self> {
        let geo = GeometricParams::from_eta(eta, m)?;
        Ok(Self {
            m,
            eta,
            b0: geo.b0,
            c: geo.c,
            beta: geo.beta,
            big_m,
            l,
            alpha0,
            epsilon,
            k_first: first_small_step(alpha0, epsilon)?,
            omega_max: 1.0 - eta,
        })
    }

    /// First index at which the bounds apply, `K + 3`.
    pub fn first_valid(&self) -> usize {
        self.k_first + 3
    }

    fn alpha(&self, k: usize) -> f64 {
        // k = 0 never occurs: callers start at K + 2 >= 3
        self.alpha0 / k as f64
    }

    fn check_from(&self, k: usize, what: &str) -> Result<()> {
        if k < self.first_valid() {
            return Err(Error::Domain(format!(
                "{what} = {k} is below K + 3 = {}",
                self.first_valid()
            )));
        }
        Ok(())
    }

    /// The bracketed per-step term of the optimality bound at index `r`,
    /// `α_r L + 4mCMβ^(r-1) + 8mCLα0 (β^(r-K) + ε)/(1-β) + 8 α_(r-1) L`.
    fn optimality_bracket(&self, r: usize) -> f64 {
        let m = self.m as f64;
        let k_first = self.k_first as i32;
        self.alpha(r) * self.l
            + 4.0 * m * self.c * self.big_m * self.beta.powi(r as i32 - 1)
            + 8.0 * m * self.c * self.l * self.alpha0 * (self.beta.powi(r as i32 - k_first) + self.epsilon)
                / (1.0 - self.beta)
            + 8.0 * self.alpha(r - 1) * self.l
    }
}

/// `2mCMβ^(k-1) + 4mCLα0 β^(k-K)/(1-β) + 4α_(k-1)L + 4mCLα0ε/(1-β)`, a bound on
/// `||x^i(k) - y(k)||` for `k ≥ K + 3`.
pub fn disagreement_bound(k: usize, p: &BoundParams) -> Result<f64> {
    p.check_from(k, "k")?;
    let m = p.m as f64;
    let one_minus_beta = 1.0 - p.beta;
    Ok(2.0 * m * p.c * p.big_m * p.beta.powi(k as i32 - 1)
        + 4.0 * m * p.c * p.l * p.alpha0 * p.beta.powi(k as i32 - p.k_first as i32) / one_minus_beta
        + 4.0 * p.alpha(k - 1) * p.l
        + 4.0 * m * p.c * p.l * p.alpha0 * p.epsilon / one_minus_beta)
}

/// Bound on `Σ_i ||x^i(k+1) - x*||²` from the window start `s`:
///
/// `Σ_ij q_ij ω^(k+1) ||x^j(s) - x*||²
///   + Σ_{r=s..k} Σ_ij q_ij ω^(k+1-r) α_r L [bracket(r)]`.
pub fn optimality_bound(
    k: usize,
    s: usize,
    g: &Graph,
    distances_at_s: &[f64],
    p: &BoundParams,
) -> Result<f64> {
    p.check_from(s, "s")?;
    if k < s {
        return Err(Error::Domain(format!(
            "k = {k} precedes the window start s = {s}"
        )));
    }
    let series = OptimalityBoundSeries::new(s, g, distances_at_s, p)?;
    Ok(series
        .take_while(|(kk, _)| *kk <= k)
        .last()
        .map(|(_, b)| b)
        .unwrap_or(f64::NAN))
}

/// Yields `(k, optimality_bound(k, s, ...))` for `k = s, s+1, ...` in O(1)
/// per item, using `S(k) = ω (S(k-1) + α_k L bracket(k))`.
#[derive(Clone, Debug)]
pub struct OptimalityBoundSeries<'a> {
    p: &'a BoundParams,
    k: usize,
    /// `Σ_j (Σ_i q_ij) ||x^j(s) - x*||²`.
    weighted_dist: f64,
    /// `Σ_ij q_ij = m + 2|E|`.
    q_total: f64,
    /// `Σ_{r=s..k-1} ω^(k-r) α_r L bracket(r)` for the upcoming `k`.
    tail: f64,
}

impl<'a> OptimalityBoundSeries<'a> {
    pub fn new(s: usize, g: &Graph, distances_at_s: &[f64], p: &'a BoundParams) -> Result<Self> {
        p.check_from(s, "s")?;
        if distances_at_s.len() != g.agent_count() || g.agent_count() != p.m {
            return Err(crate::error::shape_err(
                format!("{} per-agent distances", p.m),
                distances_at_s.len(),
            ));
        }
        let weighted_dist = distances_at_s
            .iter()
            .enumerate()
            .map(|(j, d)| (g.degree(j) + 1) as f64 * d)
            .sum();
        Ok(Self {
            p,
            k: s,
            weighted_dist,
            q_total: (p.m + 2 * g.edges().len()) as f64,
            tail: 0.0,
        })
    }
}

impl Iterator for OptimalityBoundSeries<'_> {
    type Item = (usize, f64);

    fn next(&mut self) -> Option<Self::Item> {
        let p = self.p;
        let k = self.k;
        let omega = p.omega_max;
        self.tail = omega * (self.tail + p.alpha(k) * p.l * p.optimality_bracket(k));
        let head = omega.powi(k as i32 + 1) * self.weighted_dist;
        self.k += 1;
        Some((k, head + self.q_total * self.tail))
    }
}

/// One row of the bound-versus-measurement comparison.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundsRow {
    pub k: usize,
    pub disagreement: f64,
    pub disagreement_bound: f64,
    /// Measured `Σ_i ||x^i(k) - x*||²`.
    pub sum_sq_dist_to_opt: Option<f64>,
    /// Bound on the same quantity, `optimality_bound(k - 1, s)`; absent for
    /// `k - 1 < s`.
    pub optimality_bound: Option<f64>,
}

/// Parameters for a run: `η` from the initial table, `M = Σ_j ||x^j(1)||`,
/// `L` from the gradient bound over the box.
pub fn params_for_run(setup: &RunSetup, epsilon: f64) -> Result<BoundParams> {
    let m = setup.priorities.agent_count();
    let big_m = setup.x0.column_iter().map(|c| c.norm()).sum();
    let l = gradient_bound(&setup.problems, &setup.bounds);
    BoundParams::new(
        m,
        setup.priorities.min_entry(),
        big_m,
        l,
        setup.schedule.alpha0(),
        epsilon,
    )
}

/// Compares every recorded iteration `k ≥ K + 3` against both bounds, with
/// the optimality window starting at `s = K + 3`. The trace must hold the
/// snapshot at `s` for the optimality column to be filled.
pub fn compare_trace(setup: &RunSetup, trace: &Trace, p: &BoundParams) -> Result<Vec<BoundsRow>> {
    let s = p.first_valid();
    let mut series = match trace.snapshots.get(&s) {
        Some(d) => Some(OptimalityBoundSeries::new(s, &setup.graph, d, p)?.peekable()),
        None => None,
    };
    let mut rows = Vec::new();
    for rec in trace.records.iter().filter(|r| r.k >= s) {
        let optimality = match series.as_mut() {
            Some(it) if rec.k > s => {
                // advance to the bound on x(rec.k), i.e. index rec.k - 1
                let mut value = None;
                while let Some(&(k, b)) = it.peek() {
                    if k > rec.k - 1 {
                        break;
                    }
                    value = Some(b);
                    it.next();
                }
                value
            }
            _ => None,
        };
        rows.push(BoundsRow {
            k: rec.k,
            disagreement: rec.disagreement,
            disagreement_bound: disagreement_bound(rec.k, p)?,
            sum_sq_dist_to_opt: rec.sum_sq_dist_to_opt,
            optimality_bound: optimality,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example_params() -> BoundParams {
        BoundParams {
            m: 2,
            eta: 0.5,
            b0: 1,
            c: 12.0,
            beta: 0.5,
            big_m: 1.0,
            l: 1.0,
            alpha0: 0.2,
            epsilon: 0.2,
            k_first: 1,
            omega_max: 0.5,
        }
    }

    #[test]
    fn derived_params_match_the_example() {
        let p = BoundParams::new(2, 0.5, 1.0, 1.0, 0.2, 0.2).unwrap();
        assert_eq!(p.k_first, 1);
        assert_eq!(p.b0, 1);
        assert!((p.c - 12.0).abs() < 1e-12 && (p.beta - 0.5).abs() < 1e-15);
        assert_eq!(p.omega_max, 0.5);
    }

    #[test]
    fn first_small_step_examples() {
        assert_eq!(first_small_step(0.2, 0.2).unwrap(), 1);
        assert_eq!(first_small_step(0.2, 0.05).unwrap(), 4);
        assert_eq!(first_small_step(0.2, 0.03).unwrap(), 7);
        assert_eq!(first_small_step(0.2, 1.0).unwrap(), 1);
        assert!(first_small_step(0.2, 0.0).is_err());
    }

    #[test]
    fn disagreement_hand_value() {
        // term by term: 2*2*12*1*0.5^3, 4*2*12*1*0.2*0.5^3/0.5, 4*(0.2/3)*1, 4*2*12*1*0.2*0.2/0.5
        let oracle = 6.0 + 4.8 + 0.8 / 3.0 + 7.68;
        let got = disagreement_bound(4, &example_params()).unwrap();
        assert!((got - oracle).abs() < 1e-12);
        assert!((got - 18.7467).abs() < 1e-4);
        assert!(disagreement_bound(3, &example_params()).is_err());
    }

    #[test]
    fn disagreement_degenerate_and_limit() {
        let mut p = example_params();
        p.big_m = 0.0;
        p.l = 0.0;
        for k in [4, 10, 1000] {
            assert_eq!(disagreement_bound(k, &p).unwrap(), 0.0);
        }
        let p = example_params();
        let floor = 4.0 * 2.0 * 12.0 * 1.0 * 0.2 * 0.2 / 0.5;
        let far = disagreement_bound(100_000, &p).unwrap();
        assert!((far - floor).abs() < 1e-4 && far > floor);
    }

    #[test]
    fn optimality_hand_value() {
        let g = Graph::complete(2).unwrap();
        let p = example_params();
        // ΣΣq = 4; head 4 * 0.5^5; tail 4 * 0.5 * 0.05 * (0.05 + 12 + 24.96 + 8 * 0.2 / 3)
        let oracle = 4.0 * 0.5f64.powi(5) + 4.0 * 0.5 * 0.05 * (0.05 + 12.0 + 24.96 + 1.6 / 3.0);
        let got = optimality_bound(4, 4, &g, &[1.0, 1.0], &p).unwrap();
        assert!((got - oracle).abs() < 1e-12);
        assert!((got - 3.879).abs() < 1e-3);
        assert!(optimality_bound(4, 3, &g, &[1.0, 1.0], &p).is_err());
        assert!(optimality_bound(3, 4, &g, &[1.0, 1.0], &p).is_err());
        assert!(optimality_bound(4, 4, &g, &[1.0], &p).is_err());
    }

    /// Direct double sum, independent of the recursive series.
    fn optimality_direct(k: usize, s: usize, g: &Graph, d: &[f64], p: &BoundParams) -> f64 {
        let q = g.q_matrix();
        let m = p.m;
        let mut total = 0.0;
        for i in 0..m {
            for j in 0..m {
                total += q[(i, j)] * p.omega_max.powi(k as i32 + 1) * d[j];
            }
        }
        for r in s..=k {
            let a_r = p.alpha0 / r as f64;
            let a_prev = p.alpha0 / (r - 1) as f64;
            let mf = m as f64;
            let bracket = a_r * p.l
                + 4.0 * mf * p.c * p.big_m * p.beta.powi(r as i32 - 1)
                + 8.0
                    * mf
                    * p.c
                    * p.l
                    * p.alpha0
                    * (p.beta.powi(r as i32 - p.k_first as i32) / (1.0 - p.beta)
                        + p.epsilon / (1.0 - p.beta))
                + 8.0 * a_prev * p.l;
            for i in 0..m {
                for j in 0..m {
                    total += q[(i, j)] * p.omega_max.powi((k + 1 - r) as i32) * a_r * p.l * bracket;
                }
            }
        }
        total
    }

    #[test]
    fn series_matches_direct_sum() {
        let g = Graph::path(4).unwrap();
        let p = BoundParams::new(4, 0.12, 3.0, 2.5, 0.2, 0.05).unwrap();
        let d = [0.5, 2.0, 1.0, 4.0];
        let s = p.first_valid();
        let series: Vec<_> = OptimalityBoundSeries::new(s, &g, &d, &p)
            .unwrap()
            .take(60)
            .collect();
        for (k, b) in series {
            let direct = optimality_direct(k, s, &g, &d, &p);
            assert!(((b - direct) / direct).abs() < 1e-12, "k={k}");
        }
    }

    #[test]
    fn optimality_degenerate_cases() {
        let g = Graph::complete(2).unwrap();
        let mut p = example_params();
        p.big_m = 0.0;
        p.l = 0.0;
        let b = optimality_bound(9, 4, &g, &[2.0, 3.0], &p).unwrap();
        assert!((b - 0.5f64.powi(10) * 2.0 * 5.0).abs() < 1e-15);

        let mut p = example_params();
        p.omega_max = 0.0;
        assert_eq!(optimality_bound(6, 4, &g, &[2.0, 3.0], &p).unwrap(), 0.0);
    }

    #[test]
    fn disagreement_bound_tightens_with_eta() {
        let mut last = f64::INFINITY;
        for step in 1..40 {
            let eta = step as f64 * 0.012;
            let p = BoundParams::new(3, eta, 10.0, 4.0, 0.2, 0.2).unwrap();
            let b = disagreement_bound(50, &p).unwrap();
            assert!(b.is_finite() && b > 0.0);
            assert!(b <= last);
            last = b;
        }
    }
}
