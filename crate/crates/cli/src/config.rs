//! JSON run configuration. Unknown keys are rejected everywhere.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use hybridfp_core::validation::{presets, InitialLaw, ScenarioPreset};
use hybridfp_core::{Grid, HybridSystemSpec, McParams};

use crate::CliError;

pub const DX_RANGE: (f64, f64) = (1e-4, 0.1);
pub const DT_RANGE: (f64, f64) = (1e-6, 1e-2);
pub const DEFAULT_PARTICLES: usize = 100_000;
pub const DEFAULT_SEED: u64 = 20_240_611;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: ScenarioChoice,
    pub dx: Option<f64>,
    /// Density solver step.
    pub dt: Option<f64>,
    /// Particle step; defaults to `dt`.
    pub mc_dt: Option<f64>,
    pub n_particles: Option<usize>,
    pub seed: Option<u64>,
    pub t_final: Option<f64>,
    pub snapshot_times: Option<Vec<f64>>,
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub emit: Emit,
    #[serde(default)]
    pub observable: Observable,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum ScenarioChoice {
    Preset(String),
    Inline(InlineScenario),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InlineScenario {
    pub name: String,
    pub spec: HybridSystemSpec,
    /// `[x_lo, x_hi]`; the mesh is shifted so `a` and `b` land on marks.
    pub domain: [f64; 2],
    pub init_mean: f64,
    pub init_sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Emit {
    #[serde(default = "yes")]
    pub fp: bool,
    #[serde(default = "yes")]
    pub mc: bool,
    #[serde(default)]
    pub koopman: bool,
    #[serde(default = "yes")]
    pub report: bool,
}

fn yes() -> bool {
    true
}

impl Default for Emit {
    fn default() -> Self {
        Self {
            fp: true,
            mc: true,
            koopman: false,
            report: true,
        }
    }
}

/// Observable propagated when `emit.koopman` is set.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    #[default]
    Identity,
    Square,
}

impl Observable {
    pub fn eval(self, x: f64) -> f64 {
        match self {
            Observable::Identity => x,
            Observable::Square => x * x,
        }
    }
}

/// A validated configuration, ready to run.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedRun {
    pub preset: ScenarioPreset,
    pub mc: McParams,
    pub output_dir: PathBuf,
    pub emit: Emit,
    pub observable: Observable,
}

fn in_range(name: &str, value: f64, (lo, hi): (f64, f64)) -> Result<f64, CliError> {
    if value.is_finite() && value >= lo && value <= hi {
        Ok(value)
    } else {
        Err(CliError::Config(format!(
            "{name} = {value} is outside [{lo:e}, {hi:e}]"
        )))
    }
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn resolve(&self) -> Result<ResolvedRun, CliError> {
        let dx = in_range("dx", self.dx.unwrap_or(presets::DX), DX_RANGE)?;
        let dt = in_range("dt", self.dt.unwrap_or(presets::DT), DT_RANGE)?;
        let mc_dt = in_range("mc_dt", self.mc_dt.unwrap_or(dt), DT_RANGE)?;
        let config_error = |e: hybridfp_core::HybridError| CliError::Config(e.to_string());

        let mut preset = match &self.scenario {
            ScenarioChoice::Preset(name) => ScenarioPreset::with_resolution(name, dx, dt).map_err(config_error)?,
            ScenarioChoice::Inline(inline) => {
                inline.spec.validate().map_err(config_error)?;
                let [lo, hi] = inline.domain;
                let grid = Grid::for_spec(&inline.spec, lo, hi, dx).map_err(config_error)?;
                ScenarioPreset {
                    name: inline.name.clone(),
                    spec: inline.spec,
                    grid,
                    init: InitialLaw {
                        mean: inline.init_mean,
                        sigma: inline.init_sigma,
                    },
                    dt,
                    t_final: presets::T_FINAL,
                    snapshot_times: (0..=10).map(|k| 0.25 * k as f64).collect(),
                }
            }
        };
        if let Some(t) = self.t_final {
            if t < 0.0 || !t.is_finite() {
                return Err(CliError::Config(format!("t_final must be >= 0, got {t}")));
            }
            preset = preset.with_horizon(t);
        }
        if let Some(times) = &self.snapshot_times {
            preset.snapshot_times = times.clone();
        }
        if preset.snapshot_times.is_empty() {
            preset.snapshot_times.push(preset.t_final);
        }
        hybridfp_core::schedule::step_schedule(dt, preset.t_final, &preset.snapshot_times).map_err(config_error)?;
        preset.validate().map_err(config_error)?;
        preset.init.density(&preset.grid).map_err(config_error)?;

        let mc = McParams::new(
            self.n_particles.unwrap_or(DEFAULT_PARTICLES),
            mc_dt,
            self.seed.unwrap_or(DEFAULT_SEED),
        );
        mc.validate().map_err(config_error)?;
        Ok(ResolvedRun {
            preset,
            mc,
            output_dir: self.output_dir.clone().unwrap_or_else(|| PathBuf::from("out")),
            emit: self.emit,
            observable: self.observable,
        })
    }
}
