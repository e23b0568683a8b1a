//! Jump-related terms of the density equation: guard outflux reinjected at
//! the reset cell, and the Poisson sink/source pair.

use crate::grid::{DensityField, Grid};
use crate::model::{eval_rate, RateFunction};

/// Source that returns the guard outflux `flux_at_b` to the cell centred on `a`.
pub fn apply_case1_reinjection(flux_at_b: f64, grid: &Grid) -> Vec<f64> {
    let mut source = vec![0.0; grid.n_cells];
    if let Some(cell) = grid.reset_cell {
        source[cell] = flux_at_b / grid.dx;
    }
    source
}

/// Closure of the absorbing guard for `H > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct GuardClosure {
    /// Ghost value beyond `b`, mirrored so the interface value vanishes.
    pub ghost: f64,
    /// Linear reconstruction at `b`; zero by construction.
    pub interface_value: f64,
    /// Total flux through `b`; purely diffusive since `v(b) = 0`.
    pub absorbed_flux: f64,
    /// d(rate of the last cell)/d(last cell value) contributed by the guard face.
    pub last_cell_diagonal: f64,
    /// d(rate of the reset cell)/d(last cell value) from reinjection.
    pub reset_row_entry: f64,
    pub source: Vec<f64>,
}

pub fn apply_case2_guard_bc(v: &DensityField, grid: &Grid, diffusion: f64) -> GuardClosure {
    let last = *v.values.last().expect("non-empty field");
    let ghost = -last;
    let interface_value = 0.5 * (last + ghost);
    let coefficient = 2.0 * diffusion / grid.dx;
    let absorbed_flux = -diffusion * (ghost - last) / grid.dx;
    GuardClosure {
        ghost,
        interface_value,
        absorbed_flux,
        last_cell_diagonal: -coefficient / grid.dx,
        reset_row_entry: coefficient / grid.dx,
        source: apply_case1_reinjection(absorbed_flux, grid),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JumpTerms {
    /// `-λ(x_i)`, the diagonal of the killing part.
    pub sink_diag: Vec<f64>,
    /// `∫λv` delivered to the reset cell as a cell source.
    pub source: Vec<f64>,
}

impl JumpTerms {
    /// Net rate of change contributed in each cell.
    pub fn rate_of_change(&self, v: &DensityField) -> Vec<f64> {
        self.sink_diag
            .iter()
            .zip(&v.values)
            .zip(&self.source)
            .map(|((d, x), s)| d * x + s)
            .collect()
    }
}

pub fn apply_case3_jump_terms(v: &DensityField, grid: &Grid, rate: &RateFunction) -> JumpTerms {
    let sink_diag: Vec<f64> = grid.centers().map(|x| -eval_rate(rate, x)).collect();
    let jump_rate: f64 = grid.dx * sink_diag.iter().zip(&v.values).map(|(d, x)| -d * x).sum::<f64>();
    let mut source = vec![0.0; grid.n_cells];
    if let Some(cell) = grid.reset_cell {
        source[cell] = jump_rate / grid.dx;
    }
    JumpTerms { sink_diag, source }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::gaussian_init;

    fn grid() -> Grid {
        Grid::aligned(1.0, 2.0, -2.0, 4.0, 0.01).unwrap()
    }

    #[test]
    fn reinjection_examples() {
        let g = grid();
        assert!(apply_case1_reinjection(0.0, &g).iter().all(|&s| s == 0.0));
        let source = apply_case1_reinjection(0.37, &g);
        let total: f64 = g.dx * source.iter().sum::<f64>();
        assert!((total - 0.37).abs() < 1e-15);
        assert_eq!(source.iter().filter(|&&s| s != 0.0).count(), 1);
    }

    #[test]
    fn guard_closure_vanishes_on_zero_field() {
        let g = Grid::aligned(1.0, 2.0, -2.0, 2.0, 0.01).unwrap();
        let closure = apply_case2_guard_bc(&DensityField::zeros(&g), &g, 0.5);
        assert_eq!(closure.absorbed_flux, 0.0);
        assert!(closure.source.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn guard_closure_zeroes_the_interface() {
        let g = Grid::aligned(1.0, 2.0, -2.0, 2.0, 0.01).unwrap();
        let mut v = DensityField::zeros(&g);
        *v.values.last_mut().unwrap() = 0.123456789;
        let closure = apply_case2_guard_bc(&v, &g, 0.05);
        assert_eq!(closure.interface_value, 0.0);
        assert!((closure.absorbed_flux - 2.0 * 0.05 * 0.123456789 / g.dx).abs() < 1e-15);
        let reinjected: f64 = g.dx * closure.source.iter().sum::<f64>();
        assert!((reinjected - closure.absorbed_flux).abs() < 1e-15);
    }

    #[test]
    fn jump_terms_balance() {
        let g = grid();
        let rate = RateFunction::new(100.0, 0.25, 2.0).unwrap();
        let zero = apply_case3_jump_terms(&DensityField::zeros(&g), &g, &rate);
        assert!(zero.source.iter().all(|&s| s == 0.0));
        assert!(zero.rate_of_change(&DensityField::zeros(&g)).iter().all(|&s| s == 0.0));

        let idle = RateFunction::new(0.0, 0.25, 2.0).unwrap();
        let v = gaussian_init(&g, 2.0, 0.3).unwrap();
        let terms = apply_case3_jump_terms(&v, &g, &idle);
        assert!(terms.sink_diag.iter().all(|&d| d == 0.0));
        assert!(terms.source.iter().all(|&s| s == 0.0));

        let terms = apply_case3_jump_terms(&v, &g, &rate);
        let net: f64 = g.dx * terms.rate_of_change(&v).iter().sum::<f64>();
        assert!(net.abs() < 1e-13, "net {net}");
    }
}
