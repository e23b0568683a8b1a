//! Interface fluxes of the density equation `∂v/∂t = -∂I/∂x`,
//! `I = vX - ∂(Hv)/∂x`.
//!
//! Face `f` sits at `x_min + f·dx` and separates cells `f - 1` and `f`; a
//! mesh of `n` cells has faces `0..=n`. Ghost values outside the mesh are
//! zero (absorbing truncation) unless a boundary closure overrides the face.

use serde::{Deserialize, Serialize};

use crate::grid::{DensityField, Grid};
use crate::model::{eval_drift, HybridSystemSpec};

pub fn minmod(p: f64, q: f64) -> f64 {
    if p * q > 0.0 {
        p.signum() * p.abs().min(q.abs())
    } else {
        0.0
    }
}

/// In-cell reconstruction used for the advective flux.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reconstruction {
    /// Minmod-limited linear reconstruction (MUSCL).
    #[default]
    Muscl,
    /// Piecewise-constant upwind (Godunov).
    Godunov,
}

/// Which one-sided difference the minmod limiter picked in a cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlopeChoice {
    Flat,
    Backward,
    Forward,
}

/// Per-cell limiter decisions. With the decisions frozen, the MUSCL flux is
/// linear in the density, which is what the Newton Jacobian and the duality
/// audit work with.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LimiterPattern(pub Vec<SlopeChoice>);

impl LimiterPattern {
    pub fn flat(n_cells: usize) -> Self {
        Self(vec![SlopeChoice::Flat; n_cells])
    }

    /// Decisions minmod makes on `values`. The end cells stay flat.
    pub fn from_values(values: &[f64]) -> Self {
        let n = values.len();
        let mut choices = vec![SlopeChoice::Flat; n];
        for k in 1..n.saturating_sub(1) {
            let back = values[k] - values[k - 1];
            let fwd = values[k + 1] - values[k];
            choices[k] = if back * fwd <= 0.0 {
                SlopeChoice::Flat
            } else if back.abs() <= fwd.abs() {
                SlopeChoice::Backward
            } else {
                SlopeChoice::Forward
            };
        }
        Self(choices)
    }

    pub fn for_reconstruction(recon: Reconstruction, values: &[f64]) -> Self {
        match recon {
            Reconstruction::Muscl => Self::from_values(values),
            Reconstruction::Godunov => Self::flat(values.len()),
        }
    }
}

/// Values at the `n_cells + 1` interfaces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluxField {
    pub values: Vec<f64>,
}

impl FluxField {
    pub fn zeros(grid: &Grid) -> Self {
        Self {
            values: vec![0.0; grid.n_cells + 1],
        }
    }
}

pub(crate) fn face_velocities(grid: &Grid, spec: &HybridSystemSpec) -> Vec<f64> {
    (0..=grid.n_cells)
        .map(|f| eval_drift(spec, grid.interface(f)))
        .collect()
}

/// Limited per-cell differences (`slope·dx`); zero in the end cells.
pub(crate) fn limited_differences(values: &[f64], recon: Reconstruction) -> Vec<f64> {
    let n = values.len();
    let mut s = vec![0.0; n];
    if recon == Reconstruction::Muscl {
        for k in 1..n.saturating_sub(1) {
            s[k] = minmod(values[k] - values[k - 1], values[k + 1] - values[k]);
        }
    }
    s
}

/// Upwinded `X·v` at every face with the given reconstruction. Sonic faces
/// use the split `max(X,0)·v_left + min(X,0)·v_right`.
pub fn advective_flux(v: &DensityField, grid: &Grid, spec: &HybridSystemSpec, recon: Reconstruction) -> FluxField {
    let n = grid.n_cells;
    let s = limited_differences(&v.values, recon);
    let values = face_velocities(grid, spec)
        .into_iter()
        .enumerate()
        .map(|(f, x_f)| {
            let left = if f >= 1 { v.values[f - 1] + 0.5 * s[f - 1] } else { 0.0 };
            let right = if f < n { v.values[f] - 0.5 * s[f] } else { 0.0 };
            x_f.max(0.0) * left + x_f.min(0.0) * right
        })
        .collect();
    FluxField { values }
}

pub fn muscl_advective_flux(v: &DensityField, grid: &Grid, spec: &HybridSystemSpec) -> FluxField {
    advective_flux(v, grid, spec, Reconstruction::Muscl)
}

/// `-H·∂v/∂x` by central differences; end faces see a zero ghost.
pub fn diffusive_flux(v: &DensityField, grid: &Grid, diffusion: f64) -> FluxField {
    let n = grid.n_cells;
    let cell = |i: isize| -> f64 {
        if i < 0 || i as usize >= n {
            0.0
        } else {
            v.values[i as usize]
        }
    };
    let values = (0..=n as isize)
        .map(|f| {
            if diffusion == 0.0 {
                0.0
            } else {
                -diffusion * (cell(f) - cell(f - 1)) / grid.dx
            }
        })
        .collect();
    FluxField { values }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::normal_interval_mass;

    fn spec() -> HybridSystemSpec {
        HybridSystemSpec::deterministic_guard_jump(1.0, 3.0, 1.0, 2.0).unwrap()
    }

    #[test]
    fn minmod_examples() {
        assert_eq!(minmod(1.0, 2.0), 1.0);
        assert_eq!(minmod(-1.0, 2.0), 0.0);
        assert_eq!(minmod(-3.0, -1.0), -1.0);
        assert_eq!(minmod(0.0, 4.0), 0.0);
    }

    #[test]
    fn pattern_agrees_with_minmod() {
        let values = [0.0, 1.0, 3.0, 3.5, 2.0, 2.0, -1.0, 4.0];
        let pattern = LimiterPattern::from_values(&values);
        let direct = limited_differences(&values, Reconstruction::Muscl);
        for k in 0..values.len() {
            let from_pattern = match pattern.0[k] {
                SlopeChoice::Flat => 0.0,
                SlopeChoice::Backward => values[k] - values[k - 1],
                SlopeChoice::Forward => values[k + 1] - values[k],
            };
            assert_eq!(from_pattern, direct[k], "cell {k}");
        }
    }

    #[test]
    fn constant_density_flux_is_velocity_times_value() {
        let grid = Grid::uniform(-1.0, 1.5, 50).unwrap();
        let v = DensityField {
            values: vec![0.7; 50],
            time: 0.0,
        };
        let flux = muscl_advective_flux(&v, &grid, &spec());
        for f in 1..50 {
            let expected = eval_drift(&spec(), grid.interface(f)) * 0.7;
            assert!((flux.values[f] - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn isolated_cell_gives_no_far_flux() {
        let grid = Grid::uniform(0.0, 1.0, 20).unwrap();
        let mut v = DensityField::zeros(&grid);
        v.values[4] = 3.0;
        let flux = muscl_advective_flux(&v, &grid, &spec());
        for f in 7..=20 {
            assert_eq!(flux.values[f], 0.0);
        }
    }

    #[test]
    fn diffusive_flux_examples() {
        let grid = Grid::uniform(0.0, 1.0, 10).unwrap();
        let flat = DensityField {
            values: vec![2.0; 10],
            time: 0.0,
        };
        let d = diffusive_flux(&flat, &grid, 0.3);
        assert!(d.values[1..10].iter().all(|&x| x == 0.0));

        let slope = 1.7;
        let linear = DensityField {
            values: grid.centers().map(|x| 0.4 + slope * x).collect(),
            time: 0.0,
        };
        let d = diffusive_flux(&linear, &grid, 0.3);
        for f in 1..10 {
            assert!((d.values[f] + 0.3 * slope).abs() < 1e-12);
        }
        let zero = diffusive_flux(&linear, &grid, 0.0);
        assert!(zero.values.iter().all(|&x| x == 0.0));
    }

    /// Error of the reconstructed flux at `x = 0.5` against the exact point
    /// value `X(x)·p(x)` of a smooth density, for a sequence of halved meshes.
    #[test]
    fn muscl_flux_is_second_order_on_smooth_data() {
        let (mean, sigma) = (0.2, 0.3);
        let spec = spec();
        let pdf = |x: f64| {
            let z = (x - mean) / sigma;
            (-0.5 * z * z).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
        };
        let exact = eval_drift(&spec, 0.5) * pdf(0.5);
        let errors: Vec<f64> = [80usize, 160, 320, 640]
            .iter()
            .map(|&n| {
                let grid = Grid::uniform(-1.5, 2.5, n).unwrap();
                let values = (0..n)
                    .map(|i| normal_interval_mass(mean, sigma, grid.interface(i), grid.interface(i + 1)) / grid.dx)
                    .collect();
                let v = DensityField { values, time: 0.0 };
                let face = ((0.5 - grid.x_min) / grid.dx).round() as usize;
                assert!((grid.interface(face) - 0.5).abs() < 1e-12);
                (muscl_advective_flux(&v, &grid, &spec).values[face] - exact).abs()
            })
            .collect();
        for w in errors.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!(order >= 1.8, "observed order {order:.3} from {errors:?}");
        }
    }
}
