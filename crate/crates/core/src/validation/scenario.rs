use serde::Serialize;

use super::metrics::{l1_distance, sup_distance};
use super::presets::ScenarioPreset;
use crate::error::Result;
use crate::fp::{propagate_audited, FpRun, FpScheme, Reconstruction};
use crate::grid::{total_mass, DensityField};
use crate::mc::{histogram_density, run_ensemble, McParams};
use crate::model::JumpRegime;

/// Final-time L1 between the particle histogram and the density.
pub const MC_L1_TOLERANCE: f64 = 0.1;
/// Mass defect allowed at any step (conservative regimes get 1e-9).
pub const MASS_TOLERANCE: f64 = 1e-6;
pub const GUARD_MASS_TOLERANCE: f64 = 1e-9;
pub const POSITIVITY_TOLERANCE: f64 = -1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SnapshotMetrics {
    pub time: f64,
    pub l1: f64,
    pub sup: f64,
    pub fp_mass: f64,
    pub leaked: f64,
    /// `|mass - 1 + leaked|`.
    pub mass_drift: f64,
    /// Fraction of particles inside the mesh.
    pub mc_mass: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReportFlags {
    pub mass_ok: bool,
    pub l1_ok: bool,
    pub positivity_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub scenario: String,
    pub regime: JumpRegime,
    pub dx: f64,
    pub n_cells: usize,
    pub fp_dt: f64,
    pub reconstruction: Reconstruction,
    pub mc: McParams,
    pub snapshots: Vec<SnapshotMetrics>,
    /// Worst mass drift over every step, not just snapshots.
    pub max_mass_drift: f64,
    pub min_density: f64,
    pub max_newton_iterations: usize,
    /// L1 between the last two snapshots.
    pub stationarity_gap: Option<f64>,
    pub jumps_per_particle: f64,
    pub flags: ReportFlags,
}

impl ComparisonReport {
    pub fn final_l1(&self) -> f64 {
        self.snapshots.last().map_or(0.0, |s| s.l1)
    }
}

/// A scenario run with the fields it was computed from, for writing out.
#[derive(Debug, Clone)]
pub struct ScenarioOutcome {
    pub preset: ScenarioPreset,
    pub report: ComparisonReport,
    pub fp: FpRun,
    pub mc_histograms: Vec<DensityField>,
}

pub fn run_scenario(preset: &ScenarioPreset, mc_params: &McParams) -> Result<ComparisonReport> {
    Ok(run_scenario_full(preset, mc_params)?.report)
}

pub fn run_scenario_full(preset: &ScenarioPreset, mc_params: &McParams) -> Result<ScenarioOutcome> {
    preset.validate()?;
    mc_params.validate()?;
    let grid = &preset.grid;
    let scheme = FpScheme::new(preset.spec.jump_regime, preset.dt);
    let g = preset.init.density(grid)?;
    let fp = propagate_audited(&g, &scheme, grid, &preset.spec, preset.t_final, &preset.snapshot_times)?;
    let ensembles = run_ensemble(
        mc_params,
        &preset.spec,
        &preset.init.sampler(grid),
        preset.t_final,
        &preset.snapshot_times,
    )?;
    let mc_histograms: Vec<DensityField> = ensembles.iter().map(|e| histogram_density(e, grid)).collect();

    let initial_mass = fp.audit[0].mass;
    let mut snapshots = Vec::with_capacity(fp.snapshots.len());
    for ((v, &leaked), h) in fp.snapshots.iter().zip(&fp.snapshot_leaked).zip(&mc_histograms) {
        let fp_mass = total_mass(v, grid);
        snapshots.push(SnapshotMetrics {
            time: v.time,
            l1: l1_distance(v, h, grid)?,
            sup: sup_distance(v, h)?,
            fp_mass,
            leaked,
            mass_drift: (fp_mass - initial_mass + leaked).abs(),
            mc_mass: total_mass(h, grid),
        });
    }
    let max_mass_drift = fp.audit.iter().map(|a| a.mass_defect(initial_mass)).fold(0.0, f64::max);
    let min_density = fp.audit.iter().map(|a| a.min_value).fold(f64::INFINITY, f64::min);
    let stationarity_gap = match fp.snapshots.as_slice() {
        [.., before, last] => Some(l1_distance(before, last, grid)?),
        _ => None,
    };
    let mass_tolerance = if preset.spec.jump_regime == JumpRegime::DeterministicFlowGuardJump {
        GUARD_MASS_TOLERANCE
    } else {
        MASS_TOLERANCE
    };
    let final_l1 = snapshots.last().map_or(0.0, |s| s.l1);
    let report = ComparisonReport {
        scenario: preset.name.clone(),
        regime: preset.spec.jump_regime,
        dx: grid.dx,
        n_cells: grid.n_cells,
        fp_dt: preset.dt,
        reconstruction: scheme.reconstruction,
        mc: *mc_params,
        snapshots,
        max_mass_drift,
        min_density,
        max_newton_iterations: fp.audit.iter().map(|a| a.newton_iterations).max().unwrap_or(0),
        stationarity_gap,
        jumps_per_particle: ensembles.last().map_or(0.0, |e| e.jumps_per_particle()),
        flags: ReportFlags {
            mass_ok: max_mass_drift <= mass_tolerance,
            l1_ok: final_l1 <= MC_L1_TOLERANCE,
            positivity_ok: min_density >= POSITIVITY_TOLERANCE,
        },
    };
    Ok(ScenarioOutcome {
        preset: preset.clone(),
        report,
        fp,
        mc_histograms,
    })
}
