//! Banded matrices with one rank-one border.
//!
//! Every operator in this crate is a narrow band plus a single coupling to
//! the reset cell: a dense row for densities (mass arriving at `a`), a dense
//! column for observables (the value at `a`). Both are `B + p qᵀ`, solved
//! with one banded LU and the Sherman–Morrison correction.

use crate::error::{HybridError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct BandedMatrix {
    n: usize,
    lower: usize,
    upper: usize,
    /// Row-major band storage, `width = lower + upper + 1` per row.
    data: Vec<f64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, lower: usize, upper: usize) -> Self {
        Self {
            n,
            lower,
            upper,
            data: vec![0.0; n * (lower + upper + 1)],
        }
    }

    pub fn identity(n: usize, lower: usize, upper: usize) -> Self {
        let mut m = Self::zeros(n, lower, upper);
        for i in 0..n {
            m.add(i, i, 1.0);
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        (self.lower, self.upper)
    }

    fn width(&self) -> usize {
        self.lower + self.upper + 1
    }

    fn in_band(&self, i: usize, j: usize) -> bool {
        j + self.lower >= i && j <= i + self.upper
    }

    fn slot(&self, i: usize, j: usize) -> usize {
        i * self.width() + (j + self.lower - i)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i < self.n && j < self.n && self.in_band(i, j) {
            self.data[self.slot(i, j)]
        } else {
            0.0
        }
    }

    /// Adds `value` at `(i, j)`; panics if the entry is outside the band.
    pub fn add(&mut self, i: usize, j: usize, value: f64) {
        assert!(
            i < self.n && j < self.n && self.in_band(i, j),
            "entry ({i}, {j}) outside band ({}, {})",
            self.lower,
            self.upper
        );
        let k = self.slot(i, j);
        self.data[k] += value;
    }

    pub fn row_range(&self, i: usize) -> std::ops::Range<usize> {
        i.saturating_sub(self.lower)..(i + self.upper + 1).min(self.n)
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.row_range(i).map(|j| self.get(i, j) * x[j]).sum())
            .collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.n, self.upper, self.lower);
        for i in 0..self.n {
            for j in self.row_range(i) {
                t.add(j, i, self.get(i, j));
            }
        }
        t
    }

    /// `I + scale·self`.
    pub fn shifted_identity(&self, scale: f64) -> Self {
        let mut m = self.clone();
        for v in &mut m.data {
            *v *= scale;
        }
        for i in 0..self.n {
            m.add(i, i, 1.0);
        }
        m
    }

    /// LU factorisation without pivoting; fill-in stays inside the band.
    pub fn factor(mut self) -> Result<BandedLu> {
        let n = self.n;
        for k in 0..n {
            let pivot = self.get(k, k);
            if !pivot.is_finite() || pivot.abs() < 1e-300 {
                return Err(HybridError::LinearSolveFailure { row: k });
            }
            let last_row = (k + self.lower).min(n - 1);
            let last_col = (k + self.upper).min(n - 1);
            for i in k + 1..=last_row {
                let s = self.slot(i, k);
                let l = self.data[s] / pivot;
                self.data[s] = l;
                if l == 0.0 {
                    continue;
                }
                for j in k + 1..=last_col {
                    let akj = self.data[self.slot(k, j)];
                    let sij = self.slot(i, j);
                    self.data[sij] -= l * akj;
                }
            }
        }
        Ok(BandedLu { lu: self })
    }
}

#[derive(Debug, Clone)]
pub struct BandedLu {
    lu: BandedMatrix,
}

impl BandedLu {
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let m = &self.lu;
        let n = m.n;
        let mut x = rhs.to_vec();
        for i in 0..n {
            let mut acc = x[i];
            for j in i.saturating_sub(m.lower)..i {
                acc -= m.get(i, j) * x[j];
            }
            x[i] = acc;
        }
        for i in (0..n).rev() {
            let mut acc = x[i];
            for j in i + 1..(i + m.upper + 1).min(n) {
                acc -= m.get(i, j) * x[j];
            }
            x[i] = acc / m.get(i, i);
            if !x[i].is_finite() {
                return Err(HybridError::LinearSolveFailure { row: i });
            }
        }
        Ok(x)
    }
}

/// `band + column · rowᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct BorderedBanded {
    pub band: BandedMatrix,
    pub column: Vec<f64>,
    pub row: Vec<f64>,
}

impl BorderedBanded {
    pub fn new(band: BandedMatrix) -> Self {
        let n = band.dim();
        Self {
            band,
            column: vec![0.0; n],
            row: vec![0.0; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.band.dim()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.band.matvec(x);
        let s: f64 = self.row.iter().zip(x).map(|(r, v)| r * v).sum();
        if s != 0.0 {
            for (yi, ci) in y.iter_mut().zip(&self.column) {
                *yi += ci * s;
            }
        }
        y
    }

    pub fn transpose(&self) -> Self {
        Self {
            band: self.band.transpose(),
            column: self.row.clone(),
            row: self.column.clone(),
        }
    }

    /// Dense copy, for tests and small diagnostics.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| self.band.get(i, j) + self.column[i] * self.row[j])
                    .collect()
            })
            .collect()
    }

    /// Factorises `I - dt·self`.
    pub fn implicit_euler_factor(&self, dt: f64) -> Result<BorderedLu> {
        let lu = self.band.shifted_identity(-dt).factor()?;
        let border: Vec<f64> = self.column.iter().map(|c| -dt * c).collect();
        let z = lu.solve(&border)?;
        let denom = 1.0 + dot(&self.row, &z);
        if !denom.is_finite() || denom.abs() < 1e-14 {
            return Err(HybridError::LinearSolveFailure { row: self.dim() });
        }
        Ok(BorderedLu {
            lu,
            row: self.row.clone(),
            z,
            denom,
        })
    }
}

/// Factorised `S + u qᵀ` with `z = S⁻¹u` precomputed.
#[derive(Debug, Clone)]
pub struct BorderedLu {
    lu: BandedLu,
    row: Vec<f64>,
    z: Vec<f64>,
    denom: f64,
}

impl BorderedLu {
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let mut y = self.lu.solve(rhs)?;
        let k = dot(&self.row, &y) / self.denom;
        if k != 0.0 {
            for (yi, zi) in y.iter_mut().zip(&self.z) {
                *yi -= k * zi;
            }
        }
        Ok(y)
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
