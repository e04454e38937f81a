use std::fs;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use prioropt::cli::output::{write_bounds_csv, write_sweep_csv, write_trace_csv};
use prioropt::cli::scenario::{effective_config, run_scenario, run_with_bounds, Overrides, SWEEP_POINTS};
use prioropt::pareto::{default_two_agent_grid, sweep};

#[derive(Parser)]
#[command(
    name = "prioropt",
    version,
    about = "Priority-consensus multi-objective optimization"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// Run configuration (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    record_every: Option<usize>,
    /// Full-scale variant of quad100x100.
    #[arg(long)]
    full: bool,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            record_every: self.record_every,
            out: self.out.clone(),
            full: self.full,
            config: self.config.clone(),
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Single run; writes trace.csv.
    Run(Common),
    /// Two-agent priority sweep; writes sweep.csv.
    Sweep(Common),
    /// Bound-versus-measurement comparison; writes bounds.csv.
    Bounds(Common),
    /// Print the weighted optimum x* and f* for a config.
    Oracle(Common),
    /// Run a named scenario: pareto2, quad3x10, quad100x100 or custom.
    Scenario {
        name: String,
        #[command(flatten)]
        common: Common,
    },
}

/// `--config` selects a custom run; otherwise fall back to `default`.
fn config_for(common: &Common, default: &str) -> anyhow::Result<prioropt::cli::RunConfig> {
    let name = if common.config.is_some() {
        "custom"
    } else {
        default
    };
    Ok(effective_config(name, &common.overrides())?)
}

fn writer(dir: &std::path::Path, file: &str) -> anyhow::Result<BufWriter<fs::File>> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(file);
    let f = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.cmd {
        Cmd::Run(common) => {
            let cfg = config_for(&common, "quad3x10")?;
            let (_, trace, _) = run_with_bounds(&cfg)?;
            write_trace_csv(&trace, writer(&cfg.output.dir, "trace.csv")?)?;
            let last = trace.last();
            println!(
                "k = {}  f(y) = {:.10e}  disagreement = {:.3e}",
                last.k, last.f_of_y, last.disagreement
            );
            if let Some(gap) = trace.relative_gap() {
                println!("relative gap = {gap:.3e}");
            }
        }
        Cmd::Bounds(common) => {
            let cfg = config_for(&common, "quad3x10")?;
            let (_, _, rows) = run_with_bounds(&cfg)?;
            let rows = rows.context("bound constants degenerate for this priority table")?;
            write_bounds_csv(&rows, writer(&cfg.output.dir, "bounds.csv")?)?;
            let violations = rows
                .iter()
                .filter(|r| r.disagreement > r.disagreement_bound)
                .count();
            println!("{} rows, {violations} disagreement bound violations", rows.len());
        }
        Cmd::Sweep(common) => {
            let cfg = config_for(&common, "pareto2")?;
            if cfg.m != 2 {
                bail!("sweep uses the two-agent grid; config has m = {}", cfg.m);
            }
            let setup = cfg.build_setup()?;
            let points = sweep(&setup, &default_two_agent_grid(SWEEP_POINTS, cfg.gain())?)?;
            write_sweep_csv(&points, writer(&cfg.output.dir, "sweep.csv")?)?;
            for p in &points {
                println!(
                    "{}  wbar_1 = {:.4}  gap = {:.3e}",
                    p.run_id,
                    p.wbar[0],
                    p.relative_gap()
                );
            }
        }
        Cmd::Oracle(common) => {
            let cfg = config_for(&common, "quad3x10")?;
            let setup = cfg.build_setup()?;
            let o = setup.oracle.context("oracle missing from setup")?;
            let xs: Vec<String> = o.x_star.iter().map(|v| format!("{v:.16e}")).collect();
            println!("x* = [{}]", xs.join(", "));
            println!("f* = {:.16e}", o.f_star);
            println!("interior = {}", o.interior);
        }
        Cmd::Scenario { name, common } => {
            let out = run_scenario(&name, &common.overrides())?;
            let s = &out.summary;
            println!(
                "{}: f(y) = {:.10e}  f* = {:.10e}  gap = {:.3e}  disagreement = {:.3e}  ({:.2} s)",
                s.scenario, s.final_f, s.oracle_f, s.relative_gap, s.final_disagreement, s.runtime_seconds
            );
            for f in &out.files {
                println!("wrote {}", f.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
