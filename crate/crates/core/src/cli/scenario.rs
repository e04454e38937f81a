//! Named scenarios and the artifacts each run leaves on disk.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use super::config::{parse_config, GraphKeyword, GraphSpec, PrioritySpec, RunConfig};
use super::output::{write_bounds_csv, write_sweep_csv, write_trace_csv};
use crate::bounds::{compare_trace, params_for_run, BoundsRow};
use crate::error::{Error, Result};
use crate::optimizer::{run_trace, RunSetup, Trace, TraceMeta};
use crate::pareto::{default_two_agent_grid, sweep, SweepPoint};

pub const SCENARIOS: [&str; 4] = ["pareto2", "quad3x10", "quad100x100", "custom"];

pub const SWEEP_POINTS: usize = 11;

/// Caller-side tweaks applied on top of a scenario's base config.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub record_every: Option<usize>,
    pub out: Option<PathBuf>,
    /// Full-scale variant of `quad100x100`.
    pub full: bool,
    /// Required by `custom`; replaces the base config of the others.
    pub config: Option<PathBuf>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Summary {
    pub scenario: String,
    pub final_f: f64,
    pub oracle_f: f64,
    pub relative_gap: f64,
    pub final_disagreement: f64,
    pub iterations: usize,
    /// False when the bound constants degenerate and bounds.csv holds only
    /// its header.
    pub bounds_available: bool,
    pub runtime_seconds: f64,
    pub config_hash: String,
    pub seed: u64,
}

/// Everything a scenario run produced, with the paths written.
#[derive(Debug)]
pub struct ScenarioOutput {
    pub summary: Summary,
    pub trace: Trace,
    pub bounds: Option<Vec<BoundsRow>>,
    pub sweep: Option<Vec<SweepPoint>>,
    pub files: Vec<PathBuf>,
}

fn complete(m: usize, n: usize, seed: u64, iterations: usize) -> RunConfig {
    let mut cfg = RunConfig::new(m, n, seed, iterations);
    cfg.graph = GraphSpec::Keyword(GraphKeyword::Complete);
    cfg
}

/// Base config for a named scenario, before overrides.
pub fn scenario_config(name: &str, full: bool) -> Result<RunConfig> {
    match name {
        "pareto2" => Ok(complete(2, 10, 1, 100_000)),
        "quad3x10" => Ok(complete(3, 10, 7, 100_000)),
        "quad100x100" if full => Ok(complete(100, 100, 11, 50_000)),
        "quad100x100" => Ok(complete(20, 20, 11, 50_000)),
        "custom" => Err(Error::Config("scenario custom needs --config".into())),
        other => Err(Error::UnknownScenario(other.to_string())),
    }
}

/// Resolves the effective config: base (or file) plus overrides.
pub fn effective_config(name: &str, ov: &Overrides) -> Result<RunConfig> {
    if !SCENARIOS.contains(&name) {
        return Err(Error::UnknownScenario(name.to_string()));
    }
    let mut cfg = match &ov.config {
        Some(path) => parse_config(&fs::read_to_string(path)?)?,
        None => scenario_config(name, ov.full)?,
    };
    if name == "pareto2" && cfg.m != 2 {
        return Err(Error::Config(
            "pareto2 sweeps two agents; config has m != 2".into(),
        ));
    }
    if let Some(seed) = ov.seed {
        cfg.seed = seed;
    }
    if let Some(r) = ov.record_every {
        cfg.record_every = r;
    }
    if let Some(out) = &ov.out {
        cfg.output.dir = out.clone();
    }
    if name == "pareto2" {
        // the single-trace run uses the middle grid point
        let grid = default_two_agent_grid(SWEEP_POINTS, 0.5)?;
        let mid = &grid[SWEEP_POINTS / 2];
        cfg.priorities = PrioritySpec::Table {
            rows: mid
                .weights()
                .row_iter()
                .map(|r| r.iter().copied().collect())
                .collect(),
        };
    }
    cfg.resolve()
}

/// Runs one trace and its bound comparison, stamping the trace metadata.
/// The comparison is `None` when the bound constants are not representable
/// in floating point (tiny `η` with many agents pushes `β` to exactly 1).
pub fn run_with_bounds(cfg: &RunConfig) -> Result<(RunSetup, Trace, Option<Vec<BoundsRow>>)> {
    let setup = cfg.build_setup()?;
    let mut trace = run_trace(&setup)?;
    trace.meta = TraceMeta {
        config_hash: cfg.hash()?,
        seed: cfg.seed,
    };
    let bounds = match params_for_run(&setup, cfg.epsilon()) {
        Ok(params) => Some(compare_trace(&setup, &trace, &params)?),
        Err(Error::Domain(_)) => None,
        Err(e) => return Err(e),
    };
    Ok((setup, trace, bounds))
}

fn create(dir: &Path, name: &str, files: &mut Vec<PathBuf>) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    let f = File::create(&path)?;
    files.push(path);
    Ok(BufWriter::new(f))
}

/// Runs a scenario and writes `trace.csv`, `bounds.csv`, `summary.toml` and,
/// for `pareto2`, `sweep.csv` into the output directory.
pub fn run_scenario(name: &str, ov: &Overrides) -> Result<ScenarioOutput> {
    let cfg = effective_config(name, ov)?;
    let start = Instant::now();
    let (setup, trace, bounds) = run_with_bounds(&cfg)?;
    let sweep_points = if name == "pareto2" {
        Some(sweep(&setup, &default_two_agent_grid(SWEEP_POINTS, cfg.gain())?)?)
    } else {
        None
    };
    let runtime = start.elapsed().as_secs_f64();

    let last = trace.last();
    let oracle_f = trace.oracle.as_ref().map_or(f64::NAN, |o| o.f_star);
    let summary = Summary {
        scenario: name.to_string(),
        final_f: last.f_of_y,
        oracle_f,
        relative_gap: trace.relative_gap().unwrap_or(f64::NAN),
        final_disagreement: last.disagreement,
        iterations: cfg.iterations,
        bounds_available: bounds.is_some(),
        runtime_seconds: runtime,
        config_hash: trace.meta.config_hash.clone(),
        seed: cfg.seed,
    };

    let dir = &cfg.output.dir;
    fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    write_trace_csv(&trace, create(dir, "trace.csv", &mut files)?)?;
    write_bounds_csv(
        bounds.as_deref().unwrap_or_default(),
        create(dir, "bounds.csv", &mut files)?,
    )?;
    if let Some(points) = &sweep_points {
        write_sweep_csv(points, create(dir, "sweep.csv", &mut files)?)?;
    }
    let text = toml::to_string(&summary).map_err(|e| Error::Config(e.to_string()))?;
    let path = dir.join("summary.toml");
    fs::write(&path, text)?;
    files.push(path);

    Ok(ScenarioOutput {
        summary,
        trace,
        bounds,
        sweep: sweep_points,
        files,
    })
}
