//! Uniform cell-centred mesh and the fields that live on it.

use libm::erfc;
use serde::{Deserialize, Serialize};

use crate::error::{HybridError, Result};
use crate::model::HybridSystemSpec;

/// Treatment of the artificial ends of the truncated domain.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruncationBoundary {
    /// Zero-density ghost cell: probability leaving through the end is lost
    /// (and audited). Its dual kills the observable outside the domain.
    #[default]
    Absorbing,
    /// Zero flux through the end.
    Reflecting,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub x_min: f64,
    pub n_cells: usize,
    pub dx: f64,
    /// Cell whose centre is the reset target `a`.
    pub reset_cell: Option<usize>,
    /// Interface index coinciding with the guard (or rate anchor) `b`.
    pub guard_interface: Option<usize>,
    #[serde(default)]
    pub boundary: TruncationBoundary,
}

impl Grid {
    /// Plain uniform mesh of `n_cells` cells on `[x_min, x_max]`, no alignment marks.
    pub fn uniform(x_min: f64, x_max: f64, n_cells: usize) -> Result<Self> {
        if n_cells == 0 || !(x_max > x_min) || !x_min.is_finite() || !x_max.is_finite() {
            return Err(HybridError::InvalidArgument(format!(
                "bad uniform grid [{x_min}, {x_max}] with {n_cells} cells"
            )));
        }
        Ok(Self {
            x_min,
            n_cells,
            dx: (x_max - x_min) / n_cells as f64,
            reset_cell: None,
            guard_interface: None,
            boundary: TruncationBoundary::Absorbing,
        })
    }

    /// Mesh with `b` on an interface and `a` at a cell centre.
    ///
    /// That forces `b - a = (m + ½)·dx`, so the spacing is the value of that
    /// form closest to `dx_target`. The ends are pushed outward to whole cells.
    pub fn aligned(reset: f64, anchor: f64, x_lo: f64, x_hi: f64, dx_target: f64) -> Result<Self> {
        if !(anchor > reset) {
            return Err(HybridError::InvalidArgument(format!(
                "alignment needs reset {reset} < anchor {anchor}"
            )));
        }
        if !(dx_target > 0.0) || !(x_lo <= reset) || !(x_hi >= anchor) {
            return Err(HybridError::InvalidArgument(format!(
                "bad aligned grid request [{x_lo}, {x_hi}] dx={dx_target}"
            )));
        }
        let span = anchor - reset;
        let m = ((span / dx_target) - 0.5).round().max(0.0);
        let dx = span / (m + 0.5);
        let n_left = ((anchor - x_lo) / dx - 1e-9).ceil() as usize;
        let n_right = ((x_hi - anchor) / dx - 1e-9).ceil().max(0.0) as usize;
        let m = m as usize;
        if n_left < m + 1 {
            return Err(HybridError::InvalidArgument(
                "grid does not contain the reset target".into(),
            ));
        }
        Ok(Self {
            x_min: anchor - n_left as f64 * dx,
            n_cells: n_left + n_right,
            dx,
            reset_cell: Some(n_left - m - 1),
            guard_interface: Some(n_left),
            boundary: TruncationBoundary::Absorbing,
        })
    }

    /// Default mesh for a system: `[x_lo, b]` when there is a guard,
    /// `[x_lo, x_hi]` otherwise, with `b` taken from the rate anchor.
    pub fn for_spec(spec: &HybridSystemSpec, x_lo: f64, x_hi: f64, dx_target: f64) -> Result<Self> {
        match (spec.guard, spec.rate) {
            (Some(b), _) => Self::aligned(spec.reset_target, b, x_lo, b, dx_target),
            (None, Some(rate)) => Self::aligned(spec.reset_target, rate.anchor, x_lo, x_hi, dx_target),
            (None, None) => Err(HybridError::InvalidSpec("system has neither guard nor rate".into())),
        }
    }

    pub fn with_boundary(mut self, boundary: TruncationBoundary) -> Self {
        self.boundary = boundary;
        self
    }

    pub fn x_max(&self) -> f64 {
        self.x_min + self.n_cells as f64 * self.dx
    }

    pub fn center(&self, i: usize) -> f64 {
        self.x_min + (i as f64 + 0.5) * self.dx
    }

    pub fn interface(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx
    }

    pub fn centers(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_cells).map(move |i| self.center(i))
    }

    /// Cell containing `x`, if inside `[x_min, x_max)`.
    pub fn cell_of(&self, x: f64) -> Option<usize> {
        let s = (x - self.x_min) / self.dx;
        if s >= 0.0 && s < self.n_cells as f64 {
            Some((s.floor() as usize).min(self.n_cells - 1))
        } else {
            None
        }
    }

    /// Checks that the alignment marks agree with the system and, for guard
    /// regimes, that the mesh ends at the guard.
    pub fn check_alignment(&self, spec: &HybridSystemSpec) -> Result<()> {
        let tol = 1e-12 * self.dx.max(1.0);
        let cell = self
            .reset_cell
            .ok_or_else(|| HybridError::GridNotAligned("no reset cell".into()))?;
        if cell >= self.n_cells || (self.center(cell) - spec.reset_target).abs() > 1e-12 * self.dx + tol {
            return Err(HybridError::GridNotAligned(format!(
                "reset target {} is not the centre of cell {cell}",
                spec.reset_target
            )));
        }
        if let Some(b) = spec.guard {
            let face = self
                .guard_interface
                .ok_or_else(|| HybridError::GridNotAligned("no guard interface".into()))?;
            if face != self.n_cells || (self.interface(face) - b).abs() > tol {
                return Err(HybridError::GridNotAligned(format!(
                    "guard {b} must be the right end of the mesh"
                )));
            }
        }
        Ok(())
    }

    pub(crate) fn reset_cell_checked(&self) -> Result<usize> {
        self.reset_cell
            .ok_or_else(|| HybridError::GridNotAligned("no reset cell".into()))
    }
}

/// Cell-averaged probability density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityField {
    pub values: Vec<f64>,
    pub time: f64,
}

impl DensityField {
    pub fn zeros(grid: &Grid) -> Self {
        Self {
            values: vec![0.0; grid.n_cells],
            time: 0.0,
        }
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.values.iter().enumerate() {
            if v > self.values[best] {
                best = i;
            }
        }
        best
    }

    pub(crate) fn check_grid(&self, grid: &Grid) -> Result<()> {
        if self.values.len() != grid.n_cells {
            return Err(HybridError::GridMismatch {
                left: self.values.len(),
                right: grid.n_cells,
            });
        }
        Ok(())
    }
}

/// Observable on the mesh: `n_cells` cell-centre values followed by the value
/// at the right end node, which is the guard node in guard regimes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservableField {
    pub values: Vec<f64>,
    pub time: f64,
}

impl ObservableField {
    pub fn from_fn(grid: &Grid, f: impl Fn(f64) -> f64) -> Self {
        let mut values: Vec<f64> = grid.centers().map(&f).collect();
        values.push(f(grid.x_max()));
        Self { values, time: 0.0 }
    }

    /// Value at `x`, linearly interpolated between cell centres.
    pub fn value_at(&self, grid: &Grid, x: f64) -> f64 {
        let n = grid.n_cells;
        let s = (x - grid.x_min) / grid.dx - 0.5;
        if s <= 0.0 {
            return self.values[0];
        }
        if s >= (n - 1) as f64 {
            // between the last centre and the end node, half a cell away
            let w = ((x - grid.center(n - 1)) / (0.5 * grid.dx)).min(1.0);
            return self.values[n - 1] * (1.0 - w) + self.values[n] * w;
        }
        let i = s.floor() as usize;
        let w = s - i as f64;
        self.values[i] * (1.0 - w) + self.values[i + 1] * w
    }
}

/// `∫ v dx` by cell-average quadrature.
pub fn total_mass(field: &DensityField, grid: &Grid) -> f64 {
    grid.dx * field.values.iter().sum::<f64>()
}

/// Probability that `N(mean, sigma²)` assigns to `[lo, hi]`, computed on the
/// tail side to avoid cancellation.
pub(crate) fn normal_interval_mass(mean: f64, sigma: f64, lo: f64, hi: f64) -> f64 {
    let scale = std::f64::consts::SQRT_2 * sigma;
    let zl = (lo - mean) / scale;
    let zh = (hi - mean) / scale;
    if zl >= 0.0 {
        0.5 * (erfc(zl) - erfc(zh))
    } else if zh <= 0.0 {
        0.5 * (erfc(-zh) - erfc(-zl))
    } else {
        1.0 - 0.5 * (erfc(-zl) + erfc(zh))
    }
}

/// Cell averages of `N(mean, sigma²)` truncated to the mesh and scaled to unit mass.
pub fn gaussian_init(grid: &Grid, mean: f64, sigma: f64) -> Result<DensityField> {
    if !(sigma > 0.0) {
        return Err(HybridError::InvalidArgument(format!("sigma must be > 0, got {sigma}")));
    }
    let mut values: Vec<f64> = (0..grid.n_cells)
        .map(|i| normal_interval_mass(mean, sigma, grid.interface(i), grid.interface(i + 1)))
        .collect();
    let supported = values.iter().filter(|&&m| m > 1e-15).count();
    if supported < 3 {
        return Err(HybridError::DegenerateSupport { cells: supported });
    }
    let total: f64 = values.iter().sum();
    for v in &mut values {
        *v /= total * grid.dx;
    }
    Ok(DensityField { values, time: 0.0 })
}
