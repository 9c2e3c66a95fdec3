//! Command-line front end: `run`, `validate` and `diag kernel`.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};

use crate::config::{ExperimentConfig, ExperimentKind, LoadedConfig};
use crate::error::Result;
use crate::measure::{local_flatness_scan, RhoField, FLATNESS_LIMIT};
use crate::par::{with_threads, Execution};
use crate::rng::{stream_id, Domain};
use crate::stats::experiments::{
    count_trial, flat_hole_log_p, linear_statistic_trial, poisson_count_trial, run, zero_tolerance, Ctx,
};
use crate::stats::report::{ReportPaths, StatReport};

/// Predicted hole probabilities below this make a hole run unaffordable.
pub const HOLE_BUDGET_FLOOR: f64 = 1e-7;

#[derive(Parser, Debug)]
#[command(name = "gafsim", version, about = "Zero sets of Gaussian analytic functions in Fock spaces")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run the experiment described by a JSON config.
    Run {
        config: PathBuf,
        /// Worker threads (default: all cores).
        #[arg(long)]
        threads: Option<usize>,
        /// Output directory (default: `output.dir` from the config, else `.`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Run trials on the calling thread only.
        #[arg(long)]
        sequential: bool,
    },
    /// Check a config and estimate its runtime without running it.
    Validate { config: PathBuf },
    /// Diagnostics.
    Diag {
        #[command(subcommand)]
        what: DiagCommand,
    },
}

#[derive(Subcommand, Debug)]
pub enum DiagCommand {
    /// Kernel bound bands and fast-decay integrals over the config's L grid and region.
    Kernel {
        config: PathBuf,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Outcome of `validate`.
#[derive(Clone, Debug, Default)]
pub struct Validation {
    pub warnings: Vec<String>,
    /// Set when the experiment's hypotheses fail; the run would be refused.
    pub refusal: Option<String>,
    pub estimated_seconds: Option<f64>,
}

impl Validation {
    pub fn is_ok(&self) -> bool {
        self.refusal.is_none() && self.warnings.is_empty()
    }
}

pub fn validate(path: &Path) -> Result<Validation> {
    let loaded = ExperimentConfig::load(path)?;
    let cfg = &loaded.config;
    let mut v = Validation::default();
    if cfg.experiment == ExperimentKind::Normality {
        let scan = local_flatness_scan(&loaded.weight, &cfg.region)?;
        if !scan.is_flat() {
            v.refusal = Some(format!(
                "refused: {} is not locally flat on the region (sub-disc mass ratios in [{:.3}, {:.3}], band {:.3} > {FLATNESS_LIMIT}); asymptotic normality assumes a locally flat measure",
                loaded.weight.label(),
                scan.min_ratio,
                scan.max_ratio,
                scan.band()
            ));
            return Ok(v);
        }
    }
    let l_top = *cfg.l_grid.last().expect("validated non-empty");
    if cfg.experiment == ExperimentKind::Hole && loaded.weight.constant_density() == Some(2.0) {
        let disc = cfg.disc.expect("validated");
        let log_p = flat_hole_log_p(l_top, disc.radius);
        if log_p < HOLE_BUDGET_FLOOR.ln() {
            v.warnings.push(format!(
                "insufficient trial budget: predicted hole probability {:.2e} at L = {l_top} (log p = {log_p:.1})",
                log_p.exp()
            ));
        }
        let expected = cfg.trials as f64 * log_p.exp();
        if expected < 10.0 {
            v.warnings.push(format!(
                "about {expected:.1} holes expected at L = {l_top}; at least 10 are needed for the fit"
            ));
        }
    }
    v.estimated_seconds = estimate_runtime(&loaded)?;
    Ok(v)
}

/// Times a few trials at the largest L and scales by the trial count.
fn estimate_runtime(loaded: &LoadedConfig) -> Result<Option<f64>> {
    let cfg = &loaded.config;
    let mut ctx = Ctx::new(cfg, &loaded.weight, Execution::Sequential);
    let l_top = *cfg.l_grid.last().expect("validated non-empty");
    let idx = cfg.l_grid.len() - 1;
    let probes = 3u64;
    let seed = cfg.seeds.master;
    let start = Instant::now();
    match cfg.experiment {
        ExperimentKind::KernelDiagnostics => return Ok(None),
        ExperimentKind::PoissonBaseline => {
            let field = RhoField::new(loaded.weight.clone(), l_top);
            let psi = cfg.psi.expect("validated");
            let s = cfg.poisson.intensity_scale;
            for t in 0..probes {
                poisson_count_trial(&field, &psi.support(), s, seed, stream_id(Domain::Poisson, idx, t))?;
            }
        }
        ExperimentKind::MeanVariance | ExperimentKind::Normality => {
            let model = ctx.model(l_top)?;
            let psi = cfg.psi.expect("validated");
            let tol = zero_tolerance(&model, &cfg.region)?;
            let t0 = Instant::now();
            for t in 0..probes {
                let _ = linear_statistic_trial(&model, &psi, &cfg.region, tol, seed, stream_id(Domain::Coefficients, idx, t));
            }
            let per = t0.elapsed().as_secs_f64() / probes as f64;
            let setup = start.elapsed().as_secs_f64() - per * probes as f64;
            return Ok(Some(total(cfg, per, setup)));
        }
        ExperimentKind::Hole | ExperimentKind::LargeDeviation => {
            let model = ctx.model(l_top)?;
            let disc = cfg.disc.expect("validated");
            let t0 = Instant::now();
            for t in 0..probes {
                let _ = count_trial(&model, &disc, &cfg.region, seed, stream_id(Domain::Coefficients, idx, t));
            }
            let per = t0.elapsed().as_secs_f64() / probes as f64;
            let setup = start.elapsed().as_secs_f64() - per * probes as f64;
            return Ok(Some(total(cfg, per, setup)));
        }
    }
    let per = start.elapsed().as_secs_f64() / probes as f64;
    Ok(Some(total(cfg, per, 0.0)))
}

fn total(cfg: &ExperimentConfig, per_trial: f64, setup: f64) -> f64 {
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get()) as f64;
    let n = cfg.l_grid.len() as f64;
    n * (setup + per_trial * cfg.trials as f64 / threads)
}

fn out_dir(cli_out: Option<PathBuf>, loaded: &LoadedConfig) -> PathBuf {
    cli_out
        .or_else(|| {
            loaded.config.output.dir.as_ref().map(|d| {
                if d.is_absolute() {
                    d.clone()
                } else {
                    loaded.base_dir.join(d)
                }
            })
        })
        .unwrap_or_else(|| PathBuf::from("."))
}

/// Loads, runs and writes a report; returns it with the written paths.
pub fn run_config(
    path: &Path,
    threads: Option<usize>,
    out: Option<PathBuf>,
    exec: Execution,
) -> Result<(StatReport, ReportPaths)> {
    let loaded = ExperimentConfig::load(path)?;
    let report = with_threads(threads, || run(&loaded, exec))?;
    let dir = out_dir(out, &loaded);
    let paths = report.write(&dir, &loaded.config.stem())?;
    Ok((report, paths))
}

fn diag_kernel(path: &Path, threads: Option<usize>, out: Option<PathBuf>) -> Result<(StatReport, ReportPaths)> {
    let mut loaded = ExperimentConfig::load(path)?;
    let stem = format!("{}_kernel", loaded.config.stem());
    loaded.config.experiment = ExperimentKind::KernelDiagnostics;
    loaded.hash = loaded.config.hash();
    let report = with_threads(threads, || run(&loaded, Execution::Parallel))?;
    let dir = out_dir(out, &loaded);
    let paths = report.write(&dir, &stem)?;
    Ok((report, paths))
}

/// Parses `args` and executes; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match cli.command {
        Command::Run {
            config,
            threads,
            out,
            sequential,
        } => {
            let exec = if sequential {
                Execution::Sequential
            } else {
                Execution::Parallel
            };
            match run_config(&config, threads, out, exec) {
                Ok((report, paths)) => {
                    print!("{}", report.summary());
                    println!("wrote {} and {}", paths.json.display(), paths.csv.display());
                    if let Some(h) = paths.hole_csv {
                        println!("wrote {}", h.display());
                    }
                    0
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    1
                }
            }
        }
        Command::Validate { config } => match validate(&config) {
            Ok(v) => {
                for w in &v.warnings {
                    println!("warning: {w}");
                }
                if let Some(r) = &v.refusal {
                    println!("{r}");
                    return 1;
                }
                let est = v
                    .estimated_seconds
                    .map_or("n/a".to_string(), |s| format!("~{s:.1} s"));
                if v.warnings.is_empty() {
                    println!("ok (estimated runtime {est})");
                } else {
                    println!("estimated runtime {est}");
                }
                0
            }
            Err(e) => {
                eprintln!("error: {e}");
                1
            }
        },
        Command::Diag {
            what: DiagCommand::Kernel { config, threads, out },
        } => match diag_kernel(&config, threads, out) {
            Ok((report, paths)) => {
                print!("{}", report.summary());
                println!("wrote {}", paths.json.display());
                0
            }
            Err(e) => {
                eprintln!("error: {e}");
                1
            }
        },
    }
}
