use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{HybridError, Result};
use crate::fp::{assemble_adjoint, FpScheme, LimiterPattern, Reconstruction};
use crate::grid::{gaussian_init, Grid};
use crate::koopman::assemble_generator_with_pattern;
use crate::linalg::dot;
use crate::model::HybridSystemSpec;

/// Width of the smooth reference density the limiter decisions are frozen on.
const REFERENCE_SIGMA: f64 = 0.125;
const AUDIT_SEED: u64 = 0x5eed_d0a1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DualityGap {
    /// Largest `|⟨g, 𝒜u⟩ - ⟨𝒜*g, u⟩|` over the trials.
    pub max_abs: f64,
    /// Largest gap relative to `Σ|g_j (𝒜u)_j| dx`, the size of the terms
    /// being summed.
    pub max_rel: f64,
    pub trials: usize,
}

/// Duality gap with the regime's default reconstruction.
pub fn duality_audit(grid: &Grid, spec: &HybridSystemSpec, n_trials: usize) -> Result<DualityGap> {
    let recon = FpScheme::new(spec.jump_regime, 0.0).reconstruction;
    duality_audit_with(grid, spec, recon, n_trials, AUDIT_SEED)
}

/// `⟨g, 𝒜u⟩` against `⟨𝒜*g, u⟩` for random cell vectors, with `𝒜` from the
/// observable solver and `𝒜*` from the density solver, both linearised
/// with limiter decisions frozen on a Gaussian centred at the reset point.
pub fn duality_audit_with(
    grid: &Grid,
    spec: &HybridSystemSpec,
    reconstruction: Reconstruction,
    n_trials: usize,
    seed: u64,
) -> Result<DualityGap> {
    if n_trials == 0 {
        return Err(HybridError::InvalidArgument("n_trials must be >= 1".into()));
    }
    let reference = gaussian_init(grid, spec.reset_target, REFERENCE_SIGMA)?;
    let adjoint = assemble_adjoint(grid, spec, reconstruction, Some(&reference))?;
    let pattern = LimiterPattern::for_reconstruction(reconstruction, &reference.values);
    let generator = assemble_generator_with_pattern(grid, spec, &pattern)?;

    let n = grid.n_cells;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gap = DualityGap {
        max_abs: 0.0,
        max_rel: 0.0,
        trials: n_trials,
    };
    for _ in 0..n_trials {
        let mut u: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let g: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        u.push(generator.end_value(&u));
        let au = generator.apply(&u);
        let a_star_g = adjoint.matvec(&g);
        let lhs = grid.dx * dot(&g, &au[..n]);
        let rhs = grid.dx * dot(&a_star_g, &u[..n]);
        let scale = grid.dx * g.iter().zip(&au).map(|(x, y)| (x * y).abs()).sum::<f64>();
        let abs = (lhs - rhs).abs();
        gap.max_abs = gap.max_abs.max(abs);
        if scale > 0.0 {
            gap.max_rel = gap.max_rel.max(abs / scale);
        }
    }
    Ok(gap)
}
