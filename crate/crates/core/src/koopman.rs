//! Observable propagation `∂u/∂t = 𝒜u` (the Koopman side).
//!
//! The generator is assembled node by node from the backward equation:
//! `X·∂u/∂x` differenced toward the downstream face, `H·∂²u/∂x²` by the
//! three-point stencil, and `λ(x)(u(a) - u(x))` for Poisson jumps. In guard
//! regimes the extra end node carries `u(b)`, tied to `u(a)` by a constraint
//! row. On a common mesh this operator is the transpose of the density
//! generator in [`crate::fp`], which the duality audit checks.

use serde::Serialize;

use crate::error::{HybridError, Result};
use crate::fp::{LimiterPattern, SlopeChoice};
use crate::grid::{Grid, ObservableField, TruncationBoundary};
use crate::linalg::{BandedMatrix, BorderedBanded};
use crate::mc::{mc_expectation, run_ensemble, InitSampler, McParams};
use crate::model::{eval_drift, HybridSystemSpec, JumpRegime};
use crate::schedule::step_schedule;

/// What the end node of an [`ObservableField`] holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EndNode {
    /// `u(b)`, constrained to equal `u(a)`.
    Guard,
    /// Killed observable beyond an absorbing end: always 0 after a step.
    Killed,
    /// Zero-flux end: copies the last cell value.
    Mirrored,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorMatrix {
    pub regime: JumpRegime,
    pub n_cells: usize,
    pub reset_cell: usize,
    /// Cell-to-cell part.
    pub band: BandedMatrix,
    /// Coupling of each cell row to the end node value.
    pub end_column: Vec<f64>,
    /// Coupling of each cell row to `u(a)` from the jump term.
    pub reset_column: Vec<f64>,
    pub end_node: EndNode,
}

impl GeneratorMatrix {
    /// `𝒜u` for an `(n_cells + 1)`-vector. The last entry is the constraint
    /// residual `u(b) - u(a)` in guard regimes and zero otherwise.
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        let n = self.n_cells;
        assert_eq!(u.len(), n + 1, "observable needs n_cells + 1 values");
        let ua = u[self.reset_cell];
        let mut out = self.band.matvec(&u[..n]);
        for (j, o) in out.iter_mut().enumerate() {
            *o += self.end_column[j] * u[n] + self.reset_column[j] * ua;
        }
        out.push(match self.end_node {
            EndNode::Guard => u[n] - ua,
            EndNode::Killed | EndNode::Mirrored => 0.0,
        });
        out
    }

    /// Operator on cell values alone, with the end node eliminated.
    pub fn reduced(&self) -> BorderedBanded {
        let mut op = BorderedBanded::new(self.band.clone());
        op.row[self.reset_cell] = 1.0;
        for (j, c) in op.column.iter_mut().enumerate() {
            *c = self.reset_column[j];
            if self.end_node == EndNode::Guard {
                *c += self.end_column[j];
            }
        }
        // A mirrored end is already folded into the band (no face there).
        op
    }

    pub(crate) fn end_value(&self, cells: &[f64]) -> f64 {
        match self.end_node {
            EndNode::Guard => cells[self.reset_cell],
            EndNode::Killed => 0.0,
            EndNode::Mirrored => cells[self.n_cells - 1],
        }
    }
}

/// Where a face's neighbouring value comes from.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Node {
    Cell(usize),
    End,
    /// Outside an absorbing end.
    Zero,
    /// Outside a reflecting end: no face at all.
    Closed,
}

struct Assembler<'a> {
    grid: &'a Grid,
    spec: &'a HybridSystemSpec,
    diffusion: f64,
    velocity: Vec<f64>,
}

impl Assembler<'_> {
    fn n(&self) -> usize {
        self.grid.n_cells
    }

    fn left_of(&self, face: usize) -> Node {
        match (face, self.grid.boundary) {
            (0, TruncationBoundary::Absorbing) => Node::Zero,
            (0, TruncationBoundary::Reflecting) => Node::Closed,
            (f, _) => Node::Cell(f - 1),
        }
    }

    fn right_of(&self, face: usize) -> Node {
        if face < self.n() {
            return Node::Cell(face);
        }
        match (self.spec.guard, self.grid.boundary) {
            (Some(_), _) => Node::End,
            (None, TruncationBoundary::Absorbing) => Node::Zero,
            (None, TruncationBoundary::Reflecting) => Node::Closed,
        }
    }

    /// Whether the advective difference across `face` is present. At an
    /// absorbing guard the density vanishes, so nothing is carried across it.
    fn carries(&self, face: usize) -> bool {
        !(face == self.n() && self.spec.guard.is_some() && self.diffusion > 0.0)
            && self.left_of(face) != Node::Closed
            && self.right_of(face) != Node::Closed
    }
}

/// Accumulates one row as a linear form over nodes.
struct Row<'m> {
    j: usize,
    band: &'m mut BandedMatrix,
    end_column: &'m mut [f64],
}

impl Row<'_> {
    fn add(&mut self, node: Node, coeff: f64) {
        match node {
            Node::Cell(i) => self.band.add(self.j, i, coeff),
            Node::End => self.end_column[self.j] += coeff,
            Node::Zero | Node::Closed => {}
        }
    }

    /// `coeff · (u_right - u_left)` across a face.
    fn difference(&mut self, right: Node, left: Node, coeff: f64) {
        self.add(right, coeff);
        self.add(left, -coeff);
    }
}

/// First-order generator: upwind advection, no slope corrections.
pub fn assemble_generator(grid: &Grid, spec: &HybridSystemSpec) -> Result<GeneratorMatrix> {
    assemble_generator_with_pattern(grid, spec, &LimiterPattern::flat(grid.n_cells))
}

/// Generator dual to the MUSCL density scheme with frozen limiter decisions.
/// The slope terms appear through the adjoint of the reconstruction: each
/// face's downstream difference is redistributed onto the cells its upwind
/// slope was built from.
pub fn assemble_generator_with_pattern(
    grid: &Grid,
    spec: &HybridSystemSpec,
    pattern: &LimiterPattern,
) -> Result<GeneratorMatrix> {
    spec.validate()?;
    grid.check_alignment(spec)?;
    let n = grid.n_cells;
    if pattern.0.len() != n {
        return Err(HybridError::GridMismatch {
            left: pattern.0.len(),
            right: n,
        });
    }
    let reset_cell = grid.reset_cell_checked()?;
    let asm = Assembler {
        grid,
        spec,
        diffusion: spec.diffusion_coefficient(),
        velocity: (0..=n).map(|f| eval_drift(spec, grid.interface(f))).collect(),
    };
    let dx = grid.dx;
    let mut band = BandedMatrix::zeros(n, 2, 2);
    let mut end_column = vec![0.0; n];
    let mut reset_column = vec![0.0; n];

    for j in 0..n {
        let mut row = Row {
            j,
            band: &mut band,
            end_column: &mut end_column,
        };

        // Downstream differences: rightward flow looks across the right face,
        // leftward flow across the left face.
        let right_face = j + 1;
        if asm.carries(right_face) {
            let x = asm.velocity[right_face].max(0.0);
            row.difference(asm.right_of(right_face), Node::Cell(j), x / dx);
        }
        if asm.carries(j) {
            let x = asm.velocity[j].min(0.0);
            row.difference(Node::Cell(j), asm.left_of(j), x / dx);
        }

        // Slope corrections from every cell whose limited slope involves u_j.
        for k in j.saturating_sub(1)..=(j + 1).min(n - 1) {
            let weight = match (pattern.0[k], k.cmp(&j)) {
                (SlopeChoice::Backward, std::cmp::Ordering::Equal) => 1.0,
                (SlopeChoice::Forward, std::cmp::Ordering::Equal) => -1.0,
                (SlopeChoice::Backward, std::cmp::Ordering::Greater) => -1.0,
                (SlopeChoice::Forward, std::cmp::Ordering::Less) => 1.0,
                _ => continue,
            };
            if asm.carries(k + 1) {
                let x = asm.velocity[k + 1].max(0.0);
                row.difference(asm.right_of(k + 1), asm.left_of(k + 1), 0.5 * weight * x / dx);
            }
            if asm.carries(k) {
                let x = asm.velocity[k].min(0.0);
                row.difference(asm.right_of(k), asm.left_of(k), -0.5 * weight * x / dx);
            }
        }

        // H·(u_{j+1} - 2u_j + u_{j-1})/dx², with ghost values at the ends.
        if asm.diffusion > 0.0 {
            let d = asm.diffusion / (dx * dx);
            match asm.right_of(j + 1) {
                Node::Closed => {}
                // mirrored ghost 2u(b) - u_j around the zero-density guard
                Node::End => row.difference(Node::End, Node::Cell(j), 2.0 * d),
                right => row.difference(right, Node::Cell(j), d),
            }
            match asm.left_of(j) {
                Node::Closed => {}
                left => row.difference(left, Node::Cell(j), d),
            }
        }

        if spec.jump_regime == JumpRegime::SdePoissonJump {
            let lambda = spec.rate_at(grid.center(j));
            reset_column[j] += lambda;
            row.add(Node::Cell(j), -lambda);
        }
    }

    let end_node = match (spec.guard, grid.boundary) {
        (Some(_), _) => EndNode::Guard,
        (None, TruncationBoundary::Absorbing) => EndNode::Killed,
        (None, TruncationBoundary::Reflecting) => EndNode::Mirrored,
    };
    Ok(GeneratorMatrix {
        regime: spec.jump_regime,
        n_cells: n,
        reset_cell,
        band,
        end_column,
        reset_column,
        end_node,
    })
}

/// Implicit Euler on `u̇ = 𝒜u`, end node re-imposed after every step.
pub fn koopman_propagate(
    f: &ObservableField,
    grid: &Grid,
    spec: &HybridSystemSpec,
    dt: f64,
    t_final: f64,
) -> Result<ObservableField> {
    if !(dt > 0.0) {
        return Err(HybridError::InvalidArgument(format!("dt must be > 0, got {dt}")));
    }
    if f.values.len() != grid.n_cells + 1 {
        return Err(HybridError::GridMismatch {
            left: f.values.len(),
            right: grid.n_cells + 1,
        });
    }
    let generator = assemble_generator(grid, spec)?;
    let (steps, _) = step_schedule(dt, t_final, &[])?;
    if steps == 0 {
        return Ok(f.clone());
    }
    let solver = generator.reduced().implicit_euler_factor(dt)?;
    let n = grid.n_cells;
    let mut cells = f.values[..n].to_vec();
    for _ in 0..steps {
        cells = solver.solve(&cells)?;
    }
    let end = generator.end_value(&cells);
    cells.push(end);
    Ok(ObservableField {
        values: cells,
        time: f.time + steps as f64 * dt,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExpectationCheck {
    pub koopman_value: f64,
    pub mc_value: f64,
    pub mc_stderr: f64,
}

/// `E[f(X_t) | X_0 = x0]` two ways: the propagated observable at `x0`, and a
/// particle ensemble started from the point mass at `x0`.
pub fn expectation_check<F>(
    f: F,
    x0: f64,
    t: f64,
    grid: &Grid,
    spec: &HybridSystemSpec,
    koopman_dt: f64,
    mc_params: &McParams,
) -> Result<ExpectationCheck>
where
    F: Fn(f64) -> f64 + Sync,
{
    if !(x0 >= grid.x_min && x0 <= grid.x_max()) {
        return Err(HybridError::InvalidArgument(format!("x0 = {x0} is outside the mesh")));
    }
    let observable = ObservableField::from_fn(grid, &f);
    let u = koopman_propagate(&observable, grid, spec, koopman_dt, t)?;
    let koopman_value = if t == 0.0 { f(x0) } else { u.value_at(grid, x0) };
    let ensembles = run_ensemble(mc_params, spec, &InitSampler::Point(x0), t, &[t])?;
    let estimate = mc_expectation(&ensembles[0], &f)?;
    Ok(ExpectationCheck {
        koopman_value,
        mc_value: estimate.mean,
        mc_stderr: estimate.stderr,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::RateFunction;

    fn det() -> HybridSystemSpec {
        HybridSystemSpec::deterministic_guard_jump(1.0, 3.0, 1.0, 2.0).unwrap()
    }

    fn sde_guard(diffusion: f64) -> HybridSystemSpec {
        HybridSystemSpec::sde_guard_jump(1.0, 3.0, HybridSystemSpec::h_for_diffusion(diffusion), 1.0, 2.0).unwrap()
    }

    fn poisson() -> HybridSystemSpec {
        let rate = RateFunction::new(100.0, 0.25, 2.0).unwrap();
        HybridSystemSpec::sde_poisson_jump(1.0, 3.0, 1.0, 1.0, rate).unwrap()
    }

    fn guard_grid() -> Grid {
        Grid::aligned(1.0, 2.0, -2.0, 2.0, 0.01).unwrap()
    }

    fn wide_grid() -> Grid {
        Grid::aligned(1.0, 2.0, -2.0, 4.0, 0.01).unwrap()
    }

    fn all_cases() -> Vec<(HybridSystemSpec, Grid)> {
        vec![
            (det(), guard_grid()),
            (sde_guard(0.5), guard_grid()),
            (sde_guard(0.05), guard_grid()),
            (poisson(), wide_grid()),
        ]
    }

    #[test]
    fn constants_are_in_the_kernel_with_reflecting_ends() {
        for (spec, grid) in all_cases() {
            let grid = grid.with_boundary(TruncationBoundary::Reflecting);
            let generator = assemble_generator(&grid, &spec).unwrap();
            let ones = vec![1.0; grid.n_cells + 1];
            let au = generator.apply(&ones);
            let worst = au.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            assert!(worst <= 1e-12, "{:?}: {worst}", spec.jump_regime);
        }
    }

    #[test]
    fn constants_are_in_the_kernel_away_from_absorbing_ends() {
        for (spec, grid) in all_cases() {
            let generator = assemble_generator(&grid, &spec).unwrap();
            let au = generator.apply(&vec![1.0; grid.n_cells + 1]);
            let n = grid.n_cells;
            for (j, &v) in au.iter().enumerate() {
                let truncation_cell = j == 0 || (spec.guard.is_none() && j == n - 1);
                if !truncation_cell {
                    assert!(v.abs() <= 1e-12, "{:?} node {j}: {v}", spec.jump_regime);
                }
            }
            // with nothing pushing mass out of the left end, node 0 is clean too
            if spec.jump_regime == JumpRegime::DeterministicFlowGuardJump {
                assert!(au[0].abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn jump_rows_sum_to_zero() {
        let grid = wide_grid();
        let generator = assemble_generator(&grid, &poisson()).unwrap();
        for j in 0..grid.n_cells {
            let lambda = poisson().rate_at(grid.center(j));
            let row_sum = generator.reset_column[j] - lambda;
            assert!(row_sum.abs() <= 1e-13);
        }
    }

    #[test]
    fn jump_part_spot_checks() {
        let grid = wide_grid();
        let spec = poisson();
        let generator = assemble_generator(&grid, &spec).unwrap();
        let bump = |x: f64| (-((x - 1.0) / 0.2).powi(2)).exp();
        let u = ObservableField::from_fn(&grid, bump);
        let a = grid.reset_cell.unwrap();
        // same system without jumps, to isolate the jump part
        let flow_only = HybridSystemSpec {
            rate: Some(RateFunction::new(0.0, 0.25, 2.0).unwrap()),
            ..spec
        };
        let continuous = assemble_generator(&grid, &flow_only).unwrap();
        let full = generator.apply(&u.values);
        let cont = continuous.apply(&u.values);
        for x in [1.8, 1.95, 2.0, 2.1, 3.0] {
            let j = grid.cell_of(x).unwrap();
            let lambda = spec.rate_at(grid.center(j));
            let expected = lambda * (u.values[a] - u.values[j]);
            assert!((full[j] - cont[j] - expected).abs() < 1e-10 * (1.0 + expected.abs()));
        }
    }

    #[test]
    fn zero_horizon_is_identity() {
        let grid = guard_grid();
        let f = ObservableField::from_fn(&grid, |x| x * x);
        let u = koopman_propagate(&f, &grid, &det(), 1e-3, 0.0).unwrap();
        assert_eq!(u, f);
    }

    #[test]
    fn constant_observable_is_fixed() {
        let grid = guard_grid();
        let f = ObservableField::from_fn(&grid, |_| 1.0);
        let u = koopman_propagate(&f, &grid, &det(), 1e-3, 1.3).unwrap();
        assert!(u.values.iter().all(|&x| (x - 1.0).abs() < 1e-12));

        let grid = wide_grid().with_boundary(TruncationBoundary::Reflecting);
        let f = ObservableField::from_fn(&grid, |_| 1.0);
        let u = koopman_propagate(&f, &grid, &poisson(), 1e-3, 0.4).unwrap();
        assert!(u.values.iter().all(|&x| (x - 1.0).abs() < 1e-12));
    }

    #[test]
    fn identity_observable_follows_the_flow() {
        let grid = guard_grid();
        let f = ObservableField::from_fn(&grid, |x| x);
        let u = koopman_propagate(&f, &grid, &det(), 1e-3, 0.3).unwrap();
        let expected = 3.0 - 2.0 * (-0.3f64).exp();
        let got = u.value_at(&grid, 1.0);
        assert!((got - expected).abs() <= 2.0 * grid.dx, "{got} vs {expected}");
    }

    #[test]
    fn guard_node_tracks_the_reset_value() {
        let grid = guard_grid();
        let f = ObservableField::from_fn(&grid, |x| x.sin());
        let u = koopman_propagate(&f, &grid, &sde_guard(0.5), 1e-3, 0.2).unwrap();
        assert_eq!(u.values[grid.n_cells], u.values[grid.reset_cell.unwrap()]);
    }

    #[test]
    fn semigroup_at_fixed_step() {
        let grid = guard_grid();
        let spec = sde_guard(0.05);
        let f = ObservableField::from_fn(&grid, |x| (2.0 * x).cos());
        let direct = koopman_propagate(&f, &grid, &spec, 1e-3, 0.5).unwrap();
        let half = koopman_propagate(&f, &grid, &spec, 1e-3, 0.2).unwrap();
        let split = koopman_propagate(&half, &grid, &spec, 1e-3, 0.3).unwrap();
        for (a, b) in direct.values.iter().zip(&split.values) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn deterministic_expectation_check() {
        let grid = guard_grid();
        let params = McParams::new(200, 1e-3, 7);
        let at_zero = expectation_check(|x| x, 1.0, 0.0, &grid, &det(), 1e-3, &params).unwrap();
        assert_eq!(at_zero.koopman_value, 1.0);
        assert_eq!(at_zero.mc_value, 1.0);

        let later = expectation_check(|x| x, 1.0, 0.45, &grid, &det(), 1e-3, &params).unwrap();
        assert_eq!(later.mc_stderr, 0.0);
        assert!((later.koopman_value - later.mc_value).abs() <= 2.0 * grid.dx);
    }
}
