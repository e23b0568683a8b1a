//! Driver behind the `hybridfp` binary: run a scenario and write its
//! snapshots, list the presets, or run the acceptance checks.

pub mod config;
pub mod csv;

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use hybridfp_core::fp::{propagate_audited, FpScheme};
use hybridfp_core::koopman::koopman_propagate;
use hybridfp_core::mc::{histogram_density, run_ensemble};
use hybridfp_core::validation::{
    run_acceptance, run_scenario_full, AcceptanceOptions, ScenarioOutcome, ScenarioPreset, PRESET_NAMES,
};
use hybridfp_core::{HybridError, ObservableField};

use config::{ResolvedRun, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("solver failure: {0}")]
    Solver(#[from] HybridError),
    #[error("{failed} acceptance criteria failed")]
    Acceptance { failed: usize },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            // file errors, read or write, share the configuration exit code
            CliError::Io { .. } => 1,
            CliError::Solver(_) => 2,
            CliError::Acceptance { .. } => 3,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "hybridfp",
    version,
    about = "Density, observable and particle propagation for 1-D hybrid systems"
)]
pub struct Cli {
    /// Directory for output files (overrides the config's output_dir).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Particle RNG seed (overrides the config).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Only print errors.
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one scenario from a JSON config and write CSV snapshots and report.json.
    Run {
        /// Path to the JSON config.
        config_path: Option<PathBuf>,
        #[arg(long = "config", conflicts_with = "config_path")]
        config: Option<PathBuf>,
    },
    /// List the built-in scenarios.
    Presets,
    /// Run the acceptance checks, writing each preset's outputs under --out.
    Check {
        /// Particles per ensemble.
        #[arg(long, default_value_t = 100_000)]
        particles: usize,
    },
}

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn run_cli<W: Write>(cli: Cli, stdout: &mut W) -> Result<(), CliError> {
    match cli.command {
        Command::Presets => {
            print_presets(stdout);
            Ok(())
        }
        Command::Run { config_path, config } => {
            let path = config_path
                .or(config)
                .ok_or_else(|| CliError::Config("run needs a config path".into()))?;
            let mut cfg = RunConfig::from_path(&path)?;
            if let Some(out) = cli.out {
                cfg.output_dir = Some(out);
            }
            if let Some(seed) = cli.seed {
                cfg.seed = Some(seed);
            }
            let run = cfg.resolve()?;
            let files = execute(&run)?;
            if !cli.quiet {
                let _ = writeln!(
                    stdout,
                    "{}: wrote {} files to {}",
                    run.preset.name,
                    files,
                    run.output_dir.display()
                );
            }
            Ok(())
        }
        Command::Check { particles } => {
            let mut options = AcceptanceOptions {
                n_particles: particles,
                ..AcceptanceOptions::default()
            };
            if let Some(seed) = cli.seed {
                options.seed = seed;
            }
            let outcome = run_acceptance(&options)?;
            let out = cli.out.unwrap_or_else(|| PathBuf::from("out"));
            for scenario in &outcome.scenarios {
                write_outcome(&out.join(&scenario.preset.name), scenario)?;
            }
            std::fs::create_dir_all(&out).map_err(io_error(&out))?;
            let summary = serde_json::to_string_pretty(&outcome.criteria).expect("criteria serialise");
            write_file(&out.join("acceptance.json"), &summary)?;
            for c in &outcome.criteria {
                if !cli.quiet || !c.passed {
                    let _ = writeln!(stdout, "{c}");
                }
            }
            let failed = outcome.criteria.iter().filter(|c| !c.passed).count();
            if failed > 0 {
                return Err(CliError::Acceptance { failed });
            }
            Ok(())
        }
    }
}

pub fn print_presets<W: Write>(out: &mut W) {
    let _ = writeln!(
        out,
        "{:<20} {:<30} {:>4} {:>4} {:>4} {:>5} {:>5} {:>6} {:>5} {:>14} {:>8} {:>6} {:>4}",
        "name", "regime", "a", "b", "c", "gamma", "H", "lam_m", "eps", "domain", "dx", "dt", "T"
    );
    for name in PRESET_NAMES {
        let p = ScenarioPreset::named(name).expect("built-in preset");
        let b = p.spec.guard.or(p.spec.rate.map(|r| r.anchor)).unwrap_or(f64::NAN);
        let (lam, eps) = p.spec.rate.map_or(("-".to_string(), "-".to_string()), |r| {
            (format!("{}", r.lambda_max), format!("{}", r.threshold))
        });
        let _ = writeln!(
            out,
            "{:<20} {:<30} {:>4} {:>4} {:>4} {:>5} {:>5} {:>6} {:>5} {:>14} {:>8.6} {:>6} {:>4}",
            p.name,
            format!("{:?}", p.spec.jump_regime),
            p.spec.reset_target,
            b,
            p.spec.drift_center,
            p.spec.drift_gamma,
            p.spec.diffusion_coefficient(),
            lam,
            eps,
            format!("[{:.3}, {:.3}]", p.grid.x_min, p.grid.x_max()),
            p.grid.dx,
            p.dt,
            p.t_final,
        );
    }
}

fn snapshot_name(prefix: &str, k: usize) -> String {
    format!("{prefix}_{k:03}.csv")
}

/// Writes the files of a finished scenario run; returns how many.
fn write_outcome(dir: &Path, outcome: &ScenarioOutcome) -> Result<usize, CliError> {
    std::fs::create_dir_all(dir).map_err(io_error(dir))?;
    let grid = &outcome.preset.grid;
    let name = &outcome.preset.name;
    for (k, v) in outcome.fp.snapshots.iter().enumerate() {
        write_file(&dir.join(snapshot_name("fp", k)), &csv::density_csv(name, v, grid))?;
    }
    for (k, h) in outcome.mc_histograms.iter().enumerate() {
        write_file(&dir.join(snapshot_name("mc", k)), &csv::density_csv(name, h, grid))?;
    }
    let report = serde_json::to_string_pretty(&outcome.report).expect("report serialises");
    write_file(&dir.join("report.json"), &report)?;
    Ok(outcome.fp.snapshots.len() + outcome.mc_histograms.len() + 1)
}

/// Runs a resolved config and writes what it asks for.
pub fn execute(run: &ResolvedRun) -> Result<usize, CliError> {
    let dir = &run.output_dir;
    std::fs::create_dir_all(dir).map_err(io_error(dir))?;
    let preset = &run.preset;
    let grid = &preset.grid;
    let mut written = 0;

    if run.emit.report {
        // the report compares against the particles, so both sides are needed
        let outcome = run_scenario_full(preset, &run.mc)?;
        if run.emit.fp {
            for (k, v) in outcome.fp.snapshots.iter().enumerate() {
                write_file(
                    &dir.join(snapshot_name("fp", k)),
                    &csv::density_csv(&preset.name, v, grid),
                )?;
                written += 1;
            }
        }
        if run.emit.mc {
            for (k, h) in outcome.mc_histograms.iter().enumerate() {
                write_file(
                    &dir.join(snapshot_name("mc", k)),
                    &csv::density_csv(&preset.name, h, grid),
                )?;
                written += 1;
            }
        }
        let report = serde_json::to_string_pretty(&outcome.report).expect("report serialises");
        write_file(&dir.join("report.json"), &report)?;
        written += 1;
    } else {
        if run.emit.fp {
            let scheme = FpScheme::new(preset.spec.jump_regime, preset.dt);
            let g = preset.init.density(grid)?;
            let fp = propagate_audited(&g, &scheme, grid, &preset.spec, preset.t_final, &preset.snapshot_times)?;
            for (k, v) in fp.snapshots.iter().enumerate() {
                write_file(
                    &dir.join(snapshot_name("fp", k)),
                    &csv::density_csv(&preset.name, v, grid),
                )?;
                written += 1;
            }
        }
        if run.emit.mc {
            let init = preset.init.sampler(grid);
            let ensembles = run_ensemble(&run.mc, &preset.spec, &init, preset.t_final, &preset.snapshot_times)?;
            for (k, e) in ensembles.iter().enumerate() {
                let h = histogram_density(e, grid);
                write_file(
                    &dir.join(snapshot_name("mc", k)),
                    &csv::density_csv(&preset.name, &h, grid),
                )?;
                written += 1;
            }
        }
    }

    if run.emit.koopman {
        let f = ObservableField::from_fn(grid, |x| run.observable.eval(x));
        let u = koopman_propagate(&f, grid, &preset.spec, preset.dt, preset.t_final)?;
        write_file(&dir.join("koopman.csv"), &csv::observable_csv(&preset.name, &u, grid))?;
        written += 1;
    }
    Ok(written)
}
