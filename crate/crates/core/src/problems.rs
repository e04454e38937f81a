//! Random strongly convex quadratics `f_i(x) = ½ xᵀQ_i x + r_iᵀx + c_i` and
//! the centralized weighted-sum oracle.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{shape_err, Error, Result};
use crate::optimizer::BoxConstraint;

/// Diagonal shift added to `GᵀG` by [`generate_quadratic`]. With the default
/// step constant 0.2 it puts `α0 · λmin(Q_i)` at 1 or above, which the
/// `α0 / k` schedule needs to converge at a `1/k` rate.
pub const DEFAULT_HESSIAN_SHIFT: f64 = 5.0;

pub const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticProblem {
    q: DMatrix<f64>,
    r: DVector<f64>,
    c: f64,
}

impl QuadraticProblem {
    /// Requires `Q` symmetric and positive definite.
    pub fn new(q: DMatrix<f64>, r: DVector<f64>, c: f64) -> Result<Self> {
        let p = Self::new_unchecked(q, r, c)?;
        if p.q.clone().cholesky().is_none() {
            return Err(Error::Numeric("Q is not positive definite".into()));
        }
        Ok(p)
    }

    /// Skips the definiteness check; shapes and symmetry are still enforced.
    /// Useful for degenerate test objectives such as `Q = 0`.
    pub fn new_unchecked(q: DMatrix<f64>, r: DVector<f64>, c: f64) -> Result<Self> {
        let n = r.len();
        if q.nrows() != n || q.ncols() != n {
            return Err(shape_err(
                format!("{n} x {n} Q"),
                format!("{} x {}", q.nrows(), q.ncols()),
            ));
        }
        if (&q - q.transpose()).amax() > SYMMETRY_TOL {
            return Err(Error::Numeric("Q is not symmetric".into()));
        }
        if q.iter().chain(r.iter()).any(|v| !v.is_finite()) || !c.is_finite() {
            return Err(Error::Numeric("non-finite problem data".into()));
        }
        Ok(Self { q, r, c })
    }

    pub fn dim(&self) -> usize {
        self.r.len()
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn r(&self) -> &DVector<f64> {
        &self.r
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn value(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.q * x)) + self.r.dot(x) + self.c
    }

    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.q * x + &self.r
    }

    pub fn eval_and_grad(&self, x: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
        if x.len() != self.dim() {
            return Err(shape_err(self.dim(), x.len()));
        }
        let qx = &self.q * x;
        let value = 0.5 * x.dot(&qx) + self.r.dot(x) + self.c;
        Ok((value, qx + &self.r))
    }
}

pub fn eval_and_grad(p: &QuadraticProblem, x: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
    p.eval_and_grad(x)
}

/// `Q = GᵀG + shift·I` with `G ~ U[-1, 1]^{n x n}`, `r ~ U[-10, 10]^n`,
/// `c ~ U[-10, 10]`. Deterministic in `seed`.
pub fn generate_quadratic_with_shift(seed: u64, n: usize, shift: f64) -> Result<QuadraticProblem> {
    if n == 0 {
        return Err(Error::Domain("problem dimension must be >= 1".into()));
    }
    if !(shift > 0.0) {
        return Err(Error::Domain(format!(
            "hessian shift must be positive, got {shift}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..=1.0));
    let mut q = g.transpose() * &g;
    // GᵀG is symmetric in exact arithmetic; make it bitwise so.
    q = (&q + q.transpose()) * 0.5;
    for i in 0..n {
        q[(i, i)] += shift;
    }
    let r = DVector::from_fn(n, |_, _| rng.random_range(-10.0..=10.0));
    let c = rng.random_range(-10.0..=10.0);
    QuadraticProblem::new(q, r, c)
}

pub fn generate_quadratic(seed: u64, n: usize) -> Result<QuadraticProblem> {
    generate_quadratic_with_shift(seed, n, DEFAULT_HESSIAN_SHIFT)
}

/// Seed for agent `agent` (zero-based) of a run seeded with `seed`.
pub fn agent_seed(seed: u64, agent: usize) -> u64 {
    // splitmix64 finaliser over (seed, agent)
    let mut z = seed ^ (agent as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn generate_problem_set(seed: u64, m: usize, n: usize, shift: f64) -> Result<Vec<QuadraticProblem>> {
    (0..m)
        .map(|i| generate_quadratic_with_shift(agent_seed(seed, i), n, shift))
        .collect()
}

/// Weighted objective `Σ_i w_i f_i(x)`.
pub fn weighted_value(problems: &[QuadraticProblem], weights: &DVector<f64>, x: &DVector<f64>) -> f64 {
    problems
        .iter()
        .zip(weights.iter())
        .map(|(p, w)| w * p.value(x))
        .sum()
}

#[derive(Clone, Debug, PartialEq)]
pub struct OracleSolution {
    pub x_star: DVector<f64>,
    pub f_star: f64,
    /// True when the unconstrained minimiser lies inside the box.
    pub interior: bool,
}

/// Stop criterion of the projected-gradient fallback.
pub const ORACLE_RESIDUAL_TOL: f64 = 1e-10;
const ORACLE_MAX_ITERS: usize = 10_000_000;

/// Minimises `Σ w̄_i f_i` over the box: closed form when the unconstrained
/// minimiser is feasible, projected gradient descent with step `1/λmax`
/// otherwise.
pub fn weighted_optimum(
    problems: &[QuadraticProblem],
    wbar: &DVector<f64>,
    bounds: &BoxConstraint,
) -> Result<OracleSolution> {
    let first = problems
        .first()
        .ok_or_else(|| shape_err("at least one problem", 0))?;
    let n = first.dim();
    if wbar.len() != problems.len() {
        return Err(shape_err(format!("{} weights", problems.len()), wbar.len()));
    }
    if bounds.dim() != n {
        return Err(shape_err(format!("{n}-dimensional box"), bounds.dim()));
    }
    if wbar.iter().any(|&w| !(w > 0.0)) || (wbar.sum() - 1.0).abs() > 1e-9 {
        return Err(Error::Domain(
            "oracle weights must be positive and sum to 1".into(),
        ));
    }
    let mut hess = DMatrix::zeros(n, n);
    let mut lin = DVector::zeros(n);
    let mut offset = 0.0;
    for (p, &w) in problems.iter().zip(wbar.iter()) {
        if p.dim() != n {
            return Err(shape_err(n, p.dim()));
        }
        hess += p.q() * w;
        lin += p.r() * w;
        offset += p.c() * w;
    }
    let combined = QuadraticProblem::new_unchecked(hess.clone(), lin.clone(), offset)?;

    let eig = hess.clone().symmetric_eigen();
    let (lmin, lmax) = (eig.eigenvalues.min(), eig.eigenvalues.max());
    if !(lmin > lmax * f64::EPSILON) {
        return Err(Error::Numeric(format!(
            "weighted Hessian is singular to working precision (λmin = {lmin:e}, λmax = {lmax:e})"
        )));
    }
    let chol = hess
        .cholesky()
        .ok_or_else(|| Error::Numeric("weighted Hessian is not positive definite".into()))?;
    let unconstrained = -chol.solve(&lin);
    if bounds.contains(&unconstrained) {
        let f_star = combined.value(&unconstrained);
        return Ok(OracleSolution {
            x_star: unconstrained,
            f_star,
            interior: true,
        });
    }

    let step = 1.0 / lmax;
    let mut x = bounds.project(&unconstrained)?;
    for _ in 0..ORACLE_MAX_ITERS {
        let next = bounds.project(&(&x - combined.gradient(&x) * step))?;
        let residual = (&next - &x).norm();
        x = next;
        if residual < ORACLE_RESIDUAL_TOL {
            let f_star = combined.value(&x);
            return Ok(OracleSolution {
                x_star: x,
                f_star,
                interior: false,
            });
        }
    }
    Err(Error::Numeric(
        "projected-gradient oracle did not reach its residual tolerance".into(),
    ))
}

/// `L = max_i (‖Q_i‖_F · b · √n + ‖r_i‖₂)` with `b` the largest absolute box
/// coordinate; an upper bound on `‖∇f_i(x)‖` over the box.
pub fn gradient_bound(problems: &[QuadraticProblem], bounds: &BoxConstraint) -> f64 {
    let b = bounds.max_abs();
    problems
        .iter()
        .map(|p| p.q().norm() * b * (p.dim() as f64).sqrt() + p.r().norm())
        .fold(0.0, f64::max)
}

/// Writes `m n`, then for each agent the rows of `Q`, the vector `r` and the
/// scalar `c`, all whitespace separated with 17 significant digits.
pub fn dump_problems<W: Write>(problems: &[QuadraticProblem], mut out: W) -> Result<()> {
    let n = problems.first().map_or(0, QuadraticProblem::dim);
    writeln!(out, "{} {}", problems.len(), n)?;
    for p in problems {
        let mut buf = String::new();
        for i in 0..n {
            let row: Vec<String> = (0..n).map(|j| format!("{:.16e}", p.q[(i, j)])).collect();
            let _ = writeln!(buf, "{}", row.join(" "));
        }
        let r: Vec<String> = p.r.iter().map(|v| format!("{v:.16e}")).collect();
        let _ = writeln!(buf, "{}", r.join(" "));
        let _ = writeln!(buf, "{:.16e}", p.c);
        out.write_all(buf.as_bytes())?;
    }
    Ok(())
}

pub fn load_problems<R: BufRead>(input: R) -> Result<Vec<QuadraticProblem>> {
    let mut tokens = Vec::new();
    for line in input.lines() {
        let line = line?;
        tokens.extend(line.split_whitespace().map(str::to_owned));
    }
    let mut it = tokens.into_iter();
    let mut next_num = |what: &str| -> Result<String> {
        it.next()
            .ok_or_else(|| Error::Config(format!("problem file truncated while reading {what}")))
    };
    let parse_usize = |s: String| {
        s.parse::<usize>()
            .map_err(|e| Error::Config(format!("bad header value {s:?}: {e}")))
    };
    let parse_f64 = |s: String| {
        s.parse::<f64>()
            .map_err(|e| Error::Config(format!("bad number {s:?}: {e}")))
    };
    let m = parse_usize(next_num("m")?)?;
    let n = parse_usize(next_num("n")?)?;
    let mut out = Vec::with_capacity(m);
    for _ in 0..m {
        let mut q = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                q[(i, j)] = parse_f64(next_num("Q")?)?;
            }
        }
        let mut r = DVector::zeros(n);
        for v in r.iter_mut() {
            *v = parse_f64(next_num("r")?)?;
        }
        let c = parse_f64(next_num("c")?)?;
        out.push(QuadraticProblem::new(q, r, c)?);
    }
    if next_num("end").is_ok() {
        return Err(Error::Config("trailing data after the last problem".into()));
    }
    Ok(out)
}
