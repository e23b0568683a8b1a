use serde::Serialize;

use crate::error::{HybridError, Result};
use crate::grid::{gaussian_init, DensityField, Grid};
use crate::mc::InitSampler;
use crate::model::{HybridSystemSpec, RateFunction};

pub const RESET: f64 = 1.0;
pub const GUARD: f64 = 2.0;
pub const DRIFT_CENTER: f64 = 3.0;
pub const DRIFT_GAMMA: f64 = 1.0;
pub const INIT_SIGMA: f64 = 0.125;
pub const T_FINAL: f64 = 2.5;
pub const RATE_THRESHOLD: f64 = 0.25;
pub const RATE_MAX: f64 = 100.0;
pub const DX: f64 = 0.01;
pub const DT: f64 = 1e-3;

pub const PRESET_NAMES: [&str; 5] = [
    "det-jump",
    "sde-det-jump-H0.5",
    "sde-det-jump-H0.05",
    "sde-pois-jump-H0.5",
    "sde-pois-jump-H0.05",
];

/// Normal initial law `N(mean, sigma²)`, restricted to the mesh.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InitialLaw {
    pub mean: f64,
    pub sigma: f64,
}

impl InitialLaw {
    pub fn density(&self, grid: &Grid) -> Result<DensityField> {
        gaussian_init(grid, self.mean, self.sigma)
    }

    /// The same law for particles: conditioned on the mesh, like the density.
    pub fn sampler(&self, grid: &Grid) -> InitSampler {
        InitSampler::TruncatedGaussian {
            mean: self.mean,
            sigma: self.sigma,
            lo: grid.x_min,
            hi: grid.x_max(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioPreset {
    pub name: String,
    pub spec: HybridSystemSpec,
    pub grid: Grid,
    pub init: InitialLaw,
    /// Density solver time step.
    pub dt: f64,
    pub t_final: f64,
    pub snapshot_times: Vec<f64>,
}

impl ScenarioPreset {
    /// One of [`PRESET_NAMES`] at the default resolution.
    pub fn named(name: &str) -> Result<Self> {
        Self::with_resolution(name, DX, DT)
    }

    pub fn all() -> Vec<Self> {
        PRESET_NAMES
            .iter()
            .map(|n| Self::named(n).expect("built-in preset"))
            .collect()
    }

    /// One of [`PRESET_NAMES`] with mesh width near `dx` and step `dt`.
    pub fn with_resolution(name: &str, dx: f64, dt: f64) -> Result<Self> {
        let (spec, x_hi) = match name {
            "det-jump" => (
                HybridSystemSpec::deterministic_guard_jump(DRIFT_GAMMA, DRIFT_CENTER, RESET, GUARD)?,
                GUARD,
            ),
            "sde-det-jump-H0.5" => (guard_sde(0.5)?, GUARD),
            "sde-det-jump-H0.05" => (guard_sde(0.05)?, GUARD),
            "sde-pois-jump-H0.5" => (poisson_sde(0.5)?, 4.0),
            "sde-pois-jump-H0.05" => (poisson_sde(0.05)?, 4.0),
            other => {
                return Err(HybridError::InvalidSpec(format!(
                    "unknown preset '{other}' (expected one of {})",
                    PRESET_NAMES.join(", ")
                )))
            }
        };
        let grid = Grid::aligned(RESET, GUARD, -2.0, x_hi, dx)?;
        Ok(Self {
            name: name.to_string(),
            spec,
            grid,
            init: InitialLaw {
                mean: RESET,
                sigma: INIT_SIGMA,
            },
            dt,
            t_final: T_FINAL,
            snapshot_times: (0..=10).map(|k| 0.25 * k as f64).collect(),
        })
    }

    /// Snapshot times kept inside `[0, t_final]`, always ending at `t_final`.
    pub fn with_horizon(mut self, t_final: f64) -> Self {
        self.t_final = t_final;
        self.snapshot_times.retain(|&t| t <= t_final + 1e-12);
        if !matches!(self.snapshot_times.last(), Some(&t) if t >= t_final - 1e-12) {
            self.snapshot_times.push(t_final);
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        self.grid.check_alignment(&self.spec)?;
        if !(self.dt > 0.0) || !(self.t_final >= 0.0) {
            return Err(HybridError::InvalidSpec(format!(
                "preset '{}' needs dt > 0 and t_final >= 0",
                self.name
            )));
        }
        Ok(())
    }
}

fn guard_sde(diffusion: f64) -> Result<HybridSystemSpec> {
    HybridSystemSpec::sde_guard_jump(
        DRIFT_GAMMA,
        DRIFT_CENTER,
        HybridSystemSpec::h_for_diffusion(diffusion),
        RESET,
        GUARD,
    )
}

fn poisson_sde(diffusion: f64) -> Result<HybridSystemSpec> {
    HybridSystemSpec::sde_poisson_jump(
        DRIFT_GAMMA,
        DRIFT_CENTER,
        HybridSystemSpec::h_for_diffusion(diffusion),
        RESET,
        RateFunction::new(RATE_MAX, RATE_THRESHOLD, GUARD)?,
    )
}
