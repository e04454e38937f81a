//! TOML run configuration.
//!
//! ```toml
//! m = 3
//! n = 10
//! seed = 7
//! iterations = 100000
//! graph = "complete"        # "path", or an edge list [[1, 2], [2, 3]]
//! c = "auto"                # or a number in (0, 1/Δ_max)
//! record_every = 100
//!
//! [box]
//! lower = -1000.0
//! upper = 1000.0
//!
//! [priorities]
//! kind = "random"           # or kind = "table", rows = [[...], ...]
//! min_weight = 0.05
//!
//! [iterates]
//! kind = "random"           # or kind = "table", rows = [[...], ...]
//! ```

use std::path::PathBuf;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::consensus::PriorityState;
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::optimizer::{BoxConstraint, GradientAt, RunSetup, StepSchedule};
use crate::problems::{generate_problem_set, load_problems, weighted_optimum, DEFAULT_HESSIAN_SHIFT};

pub const DEFAULT_ALPHA0: f64 = 0.2;
pub const DEFAULT_BOX: (f64, f64) = (-1000.0, 1000.0);
pub const DEFAULT_MIN_WEIGHT: f64 = 0.05;
/// `c = AUTO_GAIN_FRACTION / Δ_max` when the config says `"auto"`.
pub const AUTO_GAIN_FRACTION: f64 = 0.9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphKeyword {
    Complete,
    Path,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GraphSpec {
    Keyword(GraphKeyword),
    /// 1-based agent labels.
    Edges(Vec<(usize, usize)>),
}

impl Default for GraphSpec {
    fn default() -> Self {
        GraphSpec::Keyword(GraphKeyword::Complete)
    }
}

impl GraphSpec {
    pub fn build(&self, m: usize) -> Result<Graph> {
        match self {
            GraphSpec::Keyword(GraphKeyword::Complete) => Graph::complete(m),
            GraphSpec::Keyword(GraphKeyword::Path) => Graph::path(m),
            GraphSpec::Edges(edges) => Graph::new(m, edges),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AutoKeyword {
    Auto,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Gain {
    Auto(AutoKeyword),
    Fixed(f64),
}

impl Default for Gain {
    fn default() -> Self {
        Gain::Auto(AutoKeyword::Auto)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxSpec {
    pub lower: f64,
    pub upper: f64,
}

impl Default for BoxSpec {
    fn default() -> Self {
        Self {
            lower: DEFAULT_BOX.0,
            upper: DEFAULT_BOX.1,
        }
    }
}

fn default_min_weight() -> f64 {
    DEFAULT_MIN_WEIGHT
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum PrioritySpec {
    Random {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
        #[serde(default = "default_min_weight")]
        min_weight: f64,
    },
    /// Row `i` is agent `i`'s priority vector.
    Table { rows: Vec<Vec<f64>> },
}

impl Default for PrioritySpec {
    fn default() -> Self {
        PrioritySpec::Random {
            seed: None,
            min_weight: DEFAULT_MIN_WEIGHT,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum IterateSpec {
    /// Uniform in the box.
    #[default]
    Random,
    /// Row `i` is agent `i`'s initial decision vector.
    Table { rows: Vec<Vec<f64>> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: PathBuf,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
        }
    }
}

fn default_alpha0() -> f64 {
    DEFAULT_ALPHA0
}

fn default_record_every() -> usize {
    1
}

fn default_shift() -> f64 {
    DEFAULT_HESSIAN_SHIFT
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub m: usize,
    pub n: usize,
    pub seed: u64,
    pub iterations: usize,
    #[serde(default)]
    pub graph: GraphSpec,
    #[serde(default = "default_alpha0")]
    pub alpha0: f64,
    #[serde(default)]
    pub c: Gain,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
    /// Threshold `ε` for the rate bounds; defaults to `alpha0` (`K = 1`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub gradient_at: GradientAt,
    #[serde(default = "default_shift")]
    pub hessian_shift: f64,
    /// Load problem instances from a dump instead of generating them.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub problems_file: Option<PathBuf>,
    #[serde(default, rename = "box")]
    pub bounds: BoxSpec,
    #[serde(default)]
    pub priorities: PrioritySpec,
    #[serde(default)]
    pub iterates: IterateSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

/// Deserialises, fills defaults and validates.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    cfg.resolve()
}

pub fn serialize_config(cfg: &RunConfig) -> Result<String> {
    toml::to_string(cfg).map_err(|e| Error::Config(e.to_string()))
}

const PRIORITY_STREAM: u64 = 1;
const ITERATE_STREAM: u64 = 2;

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

impl RunConfig {
    /// Minimal config with every optional field at its default.
    pub fn new(m: usize, n: usize, seed: u64, iterations: usize) -> Self {
        Self {
            m,
            n,
            seed,
            iterations,
            graph: GraphSpec::default(),
            alpha0: DEFAULT_ALPHA0,
            c: Gain::default(),
            record_every: 1,
            epsilon: None,
            gradient_at: GradientAt::default(),
            hessian_shift: DEFAULT_HESSIAN_SHIFT,
            problems_file: None,
            bounds: BoxSpec::default(),
            priorities: PrioritySpec::default(),
            iterates: IterateSpec::default(),
            output: OutputSpec::default(),
        }
    }

    /// Resolves `c = "auto"` and the default `ε`, then checks every field.
    pub fn resolve(mut self) -> Result<Self> {
        if self.m == 0 {
            return Err(Error::Config("m: need at least one agent".into()));
        }
        if self.n == 0 {
            return Err(Error::Config("n: need at least one decision variable".into()));
        }
        if self.record_every == 0 {
            return Err(Error::Config("record_every: must be >= 1".into()));
        }
        if !(self.alpha0 > 0.0 && self.alpha0.is_finite()) {
            return Err(Error::Config(format!(
                "alpha0: must be positive, got {}",
                self.alpha0
            )));
        }
        if !(self.hessian_shift > 0.0) {
            return Err(Error::Config("hessian_shift: must be positive".into()));
        }
        let graph = self.graph.build(self.m)?;
        let upper = graph.gain_upper_bound();
        let c = match self.c {
            Gain::Auto(_) if upper.is_infinite() => 0.5,
            Gain::Auto(_) => AUTO_GAIN_FRACTION * upper,
            Gain::Fixed(c) => c,
        };
        if !(c > 0.0 && c < upper) {
            return Err(Error::GainOutOfRange { c, upper });
        }
        self.c = Gain::Fixed(c);
        let epsilon = self.epsilon.unwrap_or(self.alpha0);
        if !(epsilon > 0.0) {
            return Err(Error::Config("epsilon: must be positive".into()));
        }
        self.epsilon = Some(epsilon);
        BoxConstraint::uniform(self.n, self.bounds.lower, self.bounds.upper)
            .map_err(|e| Error::Config(format!("box: {e}")))?;
        match &self.priorities {
            PrioritySpec::Table { rows } => {
                if rows.len() != self.m {
                    return Err(Error::Config(format!(
                        "priorities.rows: expected {} rows, found {}",
                        self.m,
                        rows.len()
                    )));
                }
                PriorityState::from_rows(rows, c)?;
            }
            PrioritySpec::Random { min_weight, .. } => {
                if !(0.0..1.0).contains(min_weight) {
                    return Err(Error::Config(format!(
                        "priorities.min_weight: must lie in [0, 1), got {min_weight}"
                    )));
                }
            }
        }
        if let IterateSpec::Table { rows } = &self.iterates {
            if rows.len() != self.m || rows.iter().any(|r| r.len() != self.n) {
                return Err(Error::Config(format!(
                    "iterates.rows: expected {} rows of length {}",
                    self.m, self.n
                )));
            }
            if rows.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::Config("iterates.rows: non-finite entry".into()));
            }
        }
        Ok(self)
    }

    pub fn gain(&self) -> f64 {
        match self.c {
            Gain::Fixed(c) => c,
            Gain::Auto(_) => f64::NAN,
        }
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon.unwrap_or(self.alpha0)
    }

    /// Hex SHA-256 of the serialised config.
    pub fn hash(&self) -> Result<String> {
        let text = serialize_config(self)?;
        let digest = Sha256::digest(text.as_bytes());
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }

    pub fn initial_priorities(&self) -> Result<PriorityState> {
        let c = self.gain();
        match &self.priorities {
            PrioritySpec::Table { rows } => PriorityState::from_rows(rows, c),
            PrioritySpec::Random { seed, min_weight } => {
                let mut rng = stream_rng(seed.unwrap_or(self.seed), PRIORITY_STREAM);
                PriorityState::random(self.m, *min_weight, c, &mut rng)
            }
        }
    }

    /// Materialises graph, problems, initial state and oracle. The config
    /// must already be resolved.
    pub fn build_setup(&self) -> Result<RunSetup> {
        let graph = self.graph.build(self.m)?;
        let bounds = BoxConstraint::uniform(self.n, self.bounds.lower, self.bounds.upper)?;
        let problems = match &self.problems_file {
            Some(path) => {
                let file = std::fs::File::open(path)?;
                let problems = load_problems(std::io::BufReader::new(file))?;
                if problems.len() != self.m || problems.iter().any(|p| p.dim() != self.n) {
                    return Err(Error::Config(format!(
                        "problems_file: expected {} problems of dimension {}",
                        self.m, self.n
                    )));
                }
                problems
            }
            None => generate_problem_set(self.seed, self.m, self.n, self.hessian_shift)?,
        };
        let priorities = self.initial_priorities()?;
        let x0 = match &self.iterates {
            IterateSpec::Table { rows } => DMatrix::from_fn(self.n, self.m, |r, i| rows[i][r]),
            IterateSpec::Random => {
                let mut rng = stream_rng(self.seed, ITERATE_STREAM);
                let cols: Vec<_> = (0..self.m).map(|_| bounds.sample(&mut rng)).collect();
                DMatrix::from_columns(&cols)
            }
        };
        let oracle = Some(weighted_optimum(
            &problems,
            &priorities.average_priorities(),
            &bounds,
        )?);
        let schedule = StepSchedule::new(self.alpha0)?;
        let k_first = crate::bounds::first_small_step(self.alpha0, self.epsilon())?;
        Ok(RunSetup {
            graph,
            problems,
            priorities,
            x0,
            schedule,
            bounds,
            iterations: self.iterations,
            record_every: self.record_every,
            gradient_at: self.gradient_at,
            oracle,
            snapshots: vec![k_first + 3],
        })
    }
}
