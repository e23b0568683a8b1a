//! Finite-volume propagation of densities (the Frobenius–Perron side).
//!
//! All three regimes share one conservative form
//! `∂v/∂t = -∂I/∂x + (jump terms)`, advanced by implicit Euler. The step
//! equation is solved by Newton iteration; for MUSCL the Jacobian freezes the
//! limiter decisions at the current iterate and is rebuilt every iteration.

mod flux;
mod jump;

pub use flux::{
    advective_flux, diffusive_flux, minmod, muscl_advective_flux, FluxField, LimiterPattern, Reconstruction,
    SlopeChoice,
};
pub use jump::{apply_case1_reinjection, apply_case2_guard_bc, apply_case3_jump_terms, GuardClosure, JumpTerms};

use serde::{Deserialize, Serialize};

use crate::error::{HybridError, Result};
use crate::grid::{total_mass, DensityField, Grid, TruncationBoundary};
use crate::linalg::{BandedMatrix, BorderedBanded};
use crate::model::{HybridSystemSpec, JumpRegime};
use crate::schedule::step_schedule;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FpScheme {
    pub regime: JumpRegime,
    pub dt: f64,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub reconstruction: Reconstruction,
}

impl FpScheme {
    /// MUSCL for the deterministic flow, Godunov upwinding once diffusion is present.
    pub fn new(regime: JumpRegime, dt: f64) -> Self {
        let reconstruction = match regime {
            JumpRegime::DeterministicFlowGuardJump => Reconstruction::Muscl,
            _ => Reconstruction::Godunov,
        };
        Self {
            regime,
            dt,
            newton_tol: 1e-10,
            newton_max_iter: 50,
            reconstruction,
        }
    }

    pub fn with_reconstruction(mut self, reconstruction: Reconstruction) -> Self {
        self.reconstruction = reconstruction;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt >= 0.0) || !self.dt.is_finite() {
            return Err(HybridError::InvalidArgument(format!(
                "dt must be >= 0, got {}",
                self.dt
            )));
        }
        if !(self.newton_tol > 0.0) || self.newton_max_iter == 0 {
            return Err(HybridError::InvalidArgument(
                "Newton tolerance and iteration cap must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Right-hand side of the density equation at one state, with the fluxes it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct FluxEvaluation {
    /// `∂v/∂t` per cell.
    pub rate: Vec<f64>,
    /// Total flux `I` at every face.
    pub flux: FluxField,
    /// Flux through the guard (reinjected at `a`); zero without a guard.
    pub guard_flux: f64,
    /// Probability per unit time lost through the truncated ends.
    pub leak_rate: f64,
}

/// Discrete density generator for one system on one mesh.
#[derive(Debug, Clone)]
pub struct FpOperator<'a> {
    grid: &'a Grid,
    spec: &'a HybridSystemSpec,
    reconstruction: Reconstruction,
    diffusion: f64,
    velocity: Vec<f64>,
    jump_rate: Vec<f64>,
    reset: usize,
}

impl<'a> FpOperator<'a> {
    pub fn new(grid: &'a Grid, spec: &'a HybridSystemSpec, reconstruction: Reconstruction) -> Result<Self> {
        spec.validate()?;
        grid.check_alignment(spec)?;
        Ok(Self {
            grid,
            spec,
            reconstruction,
            diffusion: spec.diffusion_coefficient(),
            velocity: flux::face_velocities(grid, spec),
            jump_rate: grid.centers().map(|x| spec.rate_at(x)).collect(),
            reset: grid.reset_cell_checked()?,
        })
    }

    fn absorbing_guard(&self) -> bool {
        self.spec.guard.is_some() && self.diffusion > 0.0
    }

    fn reflecting_face(&self, f: usize) -> bool {
        self.grid.boundary == TruncationBoundary::Reflecting
            && (f == 0 || (f == self.grid.n_cells && self.spec.guard.is_none()))
    }

    /// Nonlinear evaluation straight from the flux formulas.
    pub fn evaluate(&self, v: &DensityField) -> FluxEvaluation {
        let grid = self.grid;
        let n = grid.n_cells;
        let adv = advective_flux(v, grid, self.spec, self.reconstruction);
        let diff = diffusive_flux(v, grid, self.diffusion);
        let mut total: Vec<f64> = adv.values.iter().zip(&diff.values).map(|(a, d)| a + d).collect();
        for f in [0, n] {
            if self.reflecting_face(f) {
                total[f] = 0.0;
            }
        }

        let mut rate = vec![0.0; n];
        let mut guard_flux = 0.0;
        if self.spec.guard.is_some() {
            if self.absorbing_guard() {
                total[n] = apply_case2_guard_bc(v, grid, self.diffusion).absorbed_flux;
            }
            guard_flux = total[n];
            for (r, s) in rate.iter_mut().zip(apply_case1_reinjection(guard_flux, grid)) {
                *r += s;
            }
        }
        if let Some(rate_fn) = &self.spec.rate {
            let terms = apply_case3_jump_terms(v, grid, rate_fn);
            for (r, s) in rate.iter_mut().zip(terms.rate_of_change(v)) {
                *r += s;
            }
        }
        for (i, r) in rate.iter_mut().enumerate() {
            *r -= (total[i + 1] - total[i]) / grid.dx;
        }

        let right_leak = if self.spec.guard.is_some() { 0.0 } else { total[n] };
        let leak_rate = right_leak - total[0];
        FluxEvaluation {
            rate,
            flux: FluxField { values: total },
            guard_flux,
            leak_rate,
        }
    }

    /// `∂I_f/∂v_j` for face `f` with the limiter decisions frozen.
    fn face_coefficients(&self, f: usize, pattern: &LimiterPattern, out: &mut Vec<(usize, f64)>) {
        out.clear();
        let n = self.grid.n_cells;
        if self.reflecting_face(f) {
            return;
        }
        if f == n && self.absorbing_guard() {
            out.push((n - 1, 2.0 * self.diffusion / self.grid.dx));
            return;
        }
        let (pos, neg) = (self.velocity[f].max(0.0), self.velocity[f].min(0.0));
        if f >= 1 {
            let k = f - 1;
            out.push((k, pos));
            match pattern.0[k] {
                SlopeChoice::Flat => {}
                SlopeChoice::Backward => out.extend([(k, 0.5 * pos), (k - 1, -0.5 * pos)]),
                SlopeChoice::Forward => out.extend([(k + 1, 0.5 * pos), (k, -0.5 * pos)]),
            }
        }
        if f < n {
            let k = f;
            out.push((k, neg));
            match pattern.0[k] {
                SlopeChoice::Flat => {}
                SlopeChoice::Backward => out.extend([(k, -0.5 * neg), (k - 1, 0.5 * neg)]),
                SlopeChoice::Forward => out.extend([(k + 1, -0.5 * neg), (k, 0.5 * neg)]),
            }
        }
        if self.diffusion > 0.0 {
            let d = self.diffusion / self.grid.dx;
            if f >= 1 {
                out.push((f - 1, d));
            }
            if f < n {
                out.push((f, -d));
            }
        }
    }

    /// The linear density generator `A*` for fixed limiter decisions: a
    /// pentadiagonal band plus the dense row of mass arriving at `a`.
    pub fn linearize(&self, pattern: &LimiterPattern) -> BorderedBanded {
        let n = self.grid.n_cells;
        let dx = self.grid.dx;
        let mut op = BorderedBanded::new(BandedMatrix::zeros(n, 2, 2));
        op.column[self.reset] = 1.0;
        let mut coeffs = Vec::with_capacity(8);
        for f in 0..=n {
            self.face_coefficients(f, pattern, &mut coeffs);
            for &(j, c) in &coeffs {
                if f >= 1 {
                    op.band.add(f - 1, j, -c / dx);
                }
                if f < n {
                    op.band.add(f, j, c / dx);
                } else if self.spec.guard.is_some() {
                    op.row[j] += c / dx;
                }
            }
        }
        if self.spec.rate.is_some() {
            for (i, &lambda) in self.jump_rate.iter().enumerate() {
                op.band.add(i, i, -lambda);
                op.row[i] += lambda;
            }
        }
        op
    }

    pub fn pattern_for(&self, v: &DensityField) -> LimiterPattern {
        LimiterPattern::for_reconstruction(self.reconstruction, &v.values)
    }

    fn step(&self, v: &DensityField, scheme: &FpScheme) -> Result<StepReport> {
        let dt = scheme.dt;
        let residual_of = |w: &DensityField| -> (Vec<f64>, FluxEvaluation) {
            let eval = self.evaluate(w);
            let r = w
                .values
                .iter()
                .zip(&v.values)
                .zip(&eval.rate)
                .map(|((wi, vi), li)| wi - vi - dt * li)
                .collect();
            (r, eval)
        };
        let mut w = DensityField {
            values: v.values.clone(),
            time: v.time + dt,
        };
        let mut iterations = 0;
        loop {
            let (r, eval) = residual_of(&w);
            let norm = r.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            if !norm.is_finite() {
                return Err(HybridError::NewtonDiverged {
                    iterations,
                    residual: norm,
                });
            }
            if norm <= scheme.newton_tol {
                return Ok(StepReport {
                    leaked: dt * eval.leak_rate,
                    field: w,
                    iterations,
                    residual: norm,
                    evaluation: eval,
                });
            }
            if iterations == scheme.newton_max_iter {
                return Err(HybridError::NewtonDiverged {
                    iterations,
                    residual: norm,
                });
            }
            let jacobian = self.linearize(&self.pattern_for(&w));
            let rhs: Vec<f64> = r.iter().map(|x| -x).collect();
            let delta = jacobian.implicit_euler_factor(dt)?.solve(&rhs)?;
            for (wi, di) in w.values.iter_mut().zip(&delta) {
                *wi += di;
            }
            iterations += 1;
        }
    }
}

#[derive(Debug, Clone)]
pub struct StepReport {
    pub field: DensityField,
    /// Mass lost through the truncated ends during the step.
    pub leaked: f64,
    pub iterations: usize,
    pub residual: f64,
    /// Fluxes at the new state.
    pub evaluation: FluxEvaluation,
}

fn check_scheme(scheme: &FpScheme, spec: &HybridSystemSpec) -> Result<()> {
    scheme.validate()?;
    if scheme.regime != spec.jump_regime {
        return Err(HybridError::InvalidArgument(format!(
            "scheme regime {:?} does not match system regime {:?}",
            scheme.regime, spec.jump_regime
        )));
    }
    Ok(())
}

/// One implicit Euler step `v⁺ - v - dt·A*(v⁺) = 0`.
pub fn implicit_step(
    v: &DensityField,
    scheme: &FpScheme,
    grid: &Grid,
    spec: &HybridSystemSpec,
) -> Result<DensityField> {
    check_scheme(scheme, spec)?;
    v.check_grid(grid)?;
    let op = FpOperator::new(grid, spec, scheme.reconstruction)?;
    Ok(op.step(v, scheme)?.field)
}

/// Per-step bookkeeping of a propagation run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepAudit {
    pub step: usize,
    pub time: f64,
    pub mass: f64,
    /// Cumulative mass lost through the truncated ends.
    pub leaked: f64,
    pub min_value: f64,
    /// Reconstructed density at the absorbing guard, when there is one.
    pub guard_value: Option<f64>,
    pub newton_iterations: usize,
}

impl StepAudit {
    /// `|mass - 1 + leaked|` for a unit initial mass.
    pub fn mass_defect(&self, initial_mass: f64) -> f64 {
        (self.mass - initial_mass + self.leaked).abs()
    }
}

#[derive(Debug, Clone)]
pub struct FpRun {
    pub snapshots: Vec<DensityField>,
    /// Cumulative leakage at each snapshot.
    pub snapshot_leaked: Vec<f64>,
    /// One entry per step, starting with the initial state.
    pub audit: Vec<StepAudit>,
    /// State one step before the final one, for time-derivative diagnostics.
    pub penultimate: Option<DensityField>,
}

/// Propagates `g` to `t_final`, returning the states at the requested
/// snapshot times (or only the final state when none are requested).
pub fn propagate(
    g: &DensityField,
    scheme: &FpScheme,
    grid: &Grid,
    spec: &HybridSystemSpec,
    t_final: f64,
    snapshot_times: &[f64],
) -> Result<Vec<DensityField>> {
    Ok(propagate_audited(g, scheme, grid, spec, t_final, snapshot_times)?.snapshots)
}

pub fn propagate_audited(
    g: &DensityField,
    scheme: &FpScheme,
    grid: &Grid,
    spec: &HybridSystemSpec,
    t_final: f64,
    snapshot_times: &[f64],
) -> Result<FpRun> {
    check_scheme(scheme, spec)?;
    g.check_grid(grid)?;
    let op = FpOperator::new(grid, spec, scheme.reconstruction)?;
    let (steps, mut wanted) = step_schedule(scheme.dt, t_final, snapshot_times)?;
    if wanted.is_empty() {
        wanted.push(steps);
    }

    let guard_value = |v: &DensityField| {
        op.absorbing_guard()
            .then(|| apply_case2_guard_bc(v, grid, op.diffusion).interface_value)
    };
    let mut state = DensityField {
        values: g.values.clone(),
        time: 0.0,
    };
    let mut leaked = 0.0;
    let mut audit = Vec::with_capacity(steps + 1);
    audit.push(StepAudit {
        step: 0,
        time: 0.0,
        mass: total_mass(&state, grid),
        leaked,
        min_value: state.min_value(),
        guard_value: guard_value(&state),
        newton_iterations: 0,
    });
    let mut snapshots = Vec::with_capacity(wanted.len());
    let mut snapshot_leaked = Vec::with_capacity(wanted.len());
    let mut next = 0;
    let mut penultimate = None;
    let mut take = |k: usize, state: &DensityField, leaked: f64, next: &mut usize| {
        while *next < wanted.len() && wanted[*next] == k {
            snapshots.push(state.clone());
            snapshot_leaked.push(leaked);
            *next += 1;
        }
    };
    take(0, &state, leaked, &mut next);
    for k in 1..=steps {
        let report = op.step(&state, scheme)?;
        if k == steps {
            penultimate = Some(std::mem::replace(&mut state, report.field));
        } else {
            state = report.field;
        }
        state.time = k as f64 * scheme.dt;
        leaked += report.leaked;
        audit.push(StepAudit {
            step: k,
            time: state.time,
            mass: total_mass(&state, grid),
            leaked,
            min_value: state.min_value(),
            guard_value: guard_value(&state),
            newton_iterations: report.iterations,
        });
        take(k, &state, leaked, &mut next);
    }
    Ok(FpRun {
        snapshots,
        snapshot_leaked,
        audit,
        penultimate,
    })
}

/// Fluxes around the reset point: `I(b)` against the one-sided limits
/// `I(a⁻)`, `I(a⁺)` at the centre of the reset cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResetFluxBalance {
    pub guard_flux: f64,
    pub left_of_reset: f64,
    pub right_of_reset: f64,
    pub max_abs_flux: f64,
}

impl ResetFluxBalance {
    /// `|I(b) - (I(a⁺) - I(a⁻))|`.
    pub fn defect(&self) -> f64 {
        (self.guard_flux - (self.right_of_reset - self.left_of_reset)).abs()
    }
}

/// The one-sided limits follow from the half-cell balances
/// `I(a⁻) = I_left - (dx/2)·∂v/∂t` and `I(a⁺) = I_right + (dx/2)·∂v/∂t`,
/// with `∂v/∂t` from the last step `previous -> current`.
pub fn reset_flux_balance(
    previous: &DensityField,
    current: &DensityField,
    dt: f64,
    grid: &Grid,
    spec: &HybridSystemSpec,
    reconstruction: Reconstruction,
) -> Result<ResetFluxBalance> {
    previous.check_grid(grid)?;
    current.check_grid(grid)?;
    if !(dt > 0.0) {
        return Err(HybridError::InvalidArgument("dt must be > 0".into()));
    }
    let op = FpOperator::new(grid, spec, reconstruction)?;
    let eval = op.evaluate(current);
    let a = op.reset;
    let dvdt = (current.values[a] - previous.values[a]) / dt;
    let half = 0.5 * grid.dx * dvdt;
    Ok(ResetFluxBalance {
        guard_flux: eval.guard_flux,
        left_of_reset: eval.flux.values[a] - half,
        right_of_reset: eval.flux.values[a + 1] + half,
        max_abs_flux: eval.flux.values.iter().fold(0.0f64, |m, x| m.max(x.abs())),
    })
}

/// Density generator with limiter decisions frozen at `reference` (ignored for Godunov).
pub fn assemble_adjoint(
    grid: &Grid,
    spec: &HybridSystemSpec,
    reconstruction: Reconstruction,
    reference: Option<&DensityField>,
) -> Result<BorderedBanded> {
    let op = FpOperator::new(grid, spec, reconstruction)?;
    let pattern = match reference {
        Some(v) => {
            v.check_grid(grid)?;
            op.pattern_for(v)
        }
        None => LimiterPattern::flat(grid.n_cells),
    };
    Ok(op.linearize(&pattern))
}
