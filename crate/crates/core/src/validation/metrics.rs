use crate::error::{HybridError, Result};
use crate::grid::{DensityField, Grid};

/// `dx · Σ|v₁ - v₂|` on a common mesh.
pub fn l1_distance(v1: &DensityField, v2: &DensityField, grid: &Grid) -> Result<f64> {
    v1.check_grid(grid)?;
    v2.check_grid(grid)?;
    Ok(grid.dx
        * v1.values
            .iter()
            .zip(&v2.values)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>())
}

pub fn sup_distance(v1: &DensityField, v2: &DensityField) -> Result<f64> {
    if v1.values.len() != v2.values.len() {
        return Err(HybridError::GridMismatch {
            left: v1.values.len(),
            right: v2.values.len(),
        });
    }
    Ok(v1
        .values
        .iter()
        .zip(&v2.values)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs())))
}

/// Exact L1 distance between two piecewise-constant densities on different
/// meshes, integrated over the union of both supports. Outside its mesh a
/// field counts as zero.
pub fn cross_grid_l1(v1: &DensityField, g1: &Grid, v2: &DensityField, g2: &Grid) -> Result<f64> {
    v1.check_grid(g1)?;
    v2.check_grid(g2)?;
    let mut breaks: Vec<f64> = (0..=g1.n_cells)
        .map(|f| g1.interface(f))
        .chain((0..=g2.n_cells).map(|f| g2.interface(f)))
        .collect();
    breaks.sort_by(f64::total_cmp);
    let value = |v: &DensityField, g: &Grid, x: f64| g.cell_of(x).map_or(0.0, |i| v.values[i]);
    let mut total = 0.0;
    for w in breaks.windows(2) {
        let width = w[1] - w[0];
        if width <= 0.0 {
            continue;
        }
        let mid = 0.5 * (w[0] + w[1]);
        total += width * (value(v1, g1, mid) - value(v2, g2, mid)).abs();
    }
    Ok(total)
}

/// Mass of the density on cells whose centre lies in `(lo, hi]`.
pub fn mass_between(v: &DensityField, grid: &Grid, lo: f64, hi: f64) -> f64 {
    grid.dx
        * grid
            .centers()
            .zip(&v.values)
            .filter(|(x, _)| *x > lo && *x <= hi)
            .map(|(_, v)| v)
            .sum::<f64>()
}
