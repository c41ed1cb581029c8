//! Semi-Lagrangian value iteration for the discounted control problem on
//! the line, and grid checks of the viscosity sub/supersolution inequalities
//! and of the comparison principle.

use crate::error::{positive, Error, Result};
use crate::hamiltonians::{HamiltonianPair, Side};
use crate::space::{ModelSpace, SpaceKind, SpacePoint};

pub const DEFAULT_HALF_WIDTH: f64 = 5.0;
pub const DEFAULT_DX: f64 = 1.0 / 200.0;
pub const DEFAULT_CONTROLS: usize = 129;
pub const DEFAULT_CONTROL_BOUND: f64 = 2.0;
/// Default time step as a fraction of `lambda`.
pub const DEFAULT_STEP_FRACTION: f64 = 0.01;
pub const DEFAULT_TOLERANCE: f64 = 1e-10;
pub const DEFAULT_MAX_ITERATIONS: usize = 1_000_000;
/// Points within this distance of `sup (u - f)` count as optimizers.
pub const GAP_TOLERANCE: f64 = 1e-6;

/// Uniform grid on `[-half_width, half_width]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    lo: f64,
    dx: f64,
    len: usize,
}

impl Grid1D {
    pub fn new(half_width: f64, dx: f64) -> Result<Self> {
        positive("half_width", half_width)?;
        positive("dx", dx)?;
        let cells = (2.0 * half_width / dx).round();
        if cells < 1.0 || ((cells * dx) - 2.0 * half_width).abs() > 1e-9 * half_width {
            return Err(Error::ParameterOutOfRange { name: "dx", value: dx });
        }
        Ok(Grid1D { lo: -half_width, dx, len: cells as usize + 1 })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.lo, -self.lo)
    }

    pub fn x(&self, i: usize) -> f64 {
        if i + 1 == self.len {
            -self.lo
        } else {
            self.lo + i as f64 * self.dx
        }
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len).map(|i| self.x(i))
    }

    /// Left cell index and weight of the right node for linear
    /// interpolation at `y`, clamped to the grid.
    fn stencil(&self, y: f64) -> (usize, f64) {
        let s = ((y - self.lo) / self.dx).clamp(0.0, (self.len - 1) as f64);
        let k = (s.floor() as usize).min(self.len - 2);
        (k, s - k as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: Grid1D,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Grid1D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::ParameterOutOfRange { name: "values", value: f64::NAN });
        }
        Ok(GridFunction { grid, values })
    }

    pub fn from_fn(grid: Grid1D, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(grid, grid.points().map(f).collect())
    }

    pub fn constant(grid: Grid1D, c: f64) -> Result<Self> {
        Self::new(grid, vec![c; grid.len()])
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Linear interpolation with constant extension outside the grid.
    pub fn eval(&self, y: f64) -> f64 {
        let (k, w) = self.grid.stencil(y);
        self.values[k] * (1.0 - w) + self.values[k + 1] * w
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn shifted(&self, c: f64) -> GridFunction {
        GridFunction { grid: self.grid, values: self.values.iter().map(|v| v + c).collect() }
    }

    /// `max_i (self_i - other_i)`.
    pub fn max_difference(&self, other: &GridFunction) -> Result<f64> {
        self.same_grid(other)?;
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| a - b).fold(f64::NEG_INFINITY, f64::max))
    }

    pub fn sup_distance(&self, other: &GridFunction) -> Result<f64> {
        self.same_grid(other)?;
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
    }

    fn same_grid(&self, other: &GridFunction) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }
}

/// Value iteration for
/// `u <- max_{|c| <= U} { dt (h/lambda - c^2/2) + (1 - dt/lambda) u(x + dt(-V'(x) + c)) }`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolventSolver {
    pub lambda: f64,
    pub control_bound: f64,
    pub controls: usize,
    pub dt: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Resolvent {
    pub u: GridFunction,
    pub iterations: usize,
    /// Sup-norm increment of the last iteration.
    pub increment: f64,
}

impl ResolventSolver {
    pub fn new(lambda: f64) -> Self {
        ResolventSolver {
            lambda,
            control_bound: DEFAULT_CONTROL_BOUND,
            controls: DEFAULT_CONTROLS,
            dt: DEFAULT_STEP_FRACTION * lambda,
            tolerance: DEFAULT_TOLERANCE,
            max_iterations: DEFAULT_MAX_ITERATIONS,
        }
    }

    fn validate(&self) -> Result<()> {
        positive("lambda", self.lambda)?;
        positive("control_bound", self.control_bound)?;
        positive("dt", self.dt)?;
        positive("tolerance", self.tolerance)?;
        if self.dt >= self.lambda {
            return Err(Error::TimeStepTooLarge { dt: self.dt, lambda: self.lambda });
        }
        if self.controls < 2 {
            return Err(Error::ParameterOutOfRange { name: "controls", value: self.controls as f64 });
        }
        Ok(())
    }

    pub fn control_values(&self) -> Vec<f64> {
        let n = self.controls - 1;
        (0..=n).map(|j| self.control_bound * (2.0 * j as f64 / n as f64 - 1.0)).collect()
    }

    /// Iterate from `u = h` until the sup-norm increment drops below the
    /// tolerance, asserting the geometric decrease of the increments.
    pub fn solve(&self, space: &ModelSpace, h: &GridFunction) -> Result<Resolvent> {
        self.validate()?;
        if space.kind() != SpaceKind::Euclidean || space.dim() != 1 {
            return Err(Error::UnsupportedSpace("resolvent solver needs the Euclidean line"));
        }
        let grid = *h.grid();
        let beta = 1.0 - self.dt / self.lambda;
        let controls = self.control_values();
        let running: Vec<f64> = controls.iter().map(|c| -0.5 * self.dt * c * c).collect();
        let nc = controls.len();
        let mut cells = Vec::with_capacity(grid.len() * nc);
        let mut weights = Vec::with_capacity(grid.len() * nc);
        for x in grid.points() {
            let drift = -space.potential().derivative(x);
            for c in &controls {
                let (k, w) = grid.stencil(x + self.dt * (drift + c));
                cells.push(k as u32);
                weights.push(w);
            }
        }
        let reward: Vec<f64> = h.values().iter().map(|v| self.dt * v / self.lambda).collect();

        let mut u = h.values().to_vec();
        let mut next = vec![0.0; u.len()];
        let mut previous = f64::INFINITY;
        for iteration in 1..=self.max_iterations {
            let mut increment: f64 = 0.0;
            for i in 0..u.len() {
                let base = i * nc;
                let mut best = f64::NEG_INFINITY;
                for j in 0..nc {
                    let k = cells[base + j] as usize;
                    let w = weights[base + j];
                    let v = running[j] + beta * (u[k] + w * (u[k + 1] - u[k]));
                    if v > best {
                        best = v;
                    }
                }
                next[i] = reward[i] + best;
                increment = increment.max((next[i] - u[i]).abs());
            }
            std::mem::swap(&mut u, &mut next);
            let bound = beta * previous * (1.0 + 1e-9) + 1e-14;
            if increment > bound {
                return Err(Error::ContractionLost { iteration, increment, bound });
            }
            previous = increment;
            if increment <= self.tolerance {
                return Ok(Resolvent { u: GridFunction::new(grid, u)?, iterations: iteration, increment });
            }
        }
        Err(Error::NotConverged { iterations: self.max_iterations, residual: previous })
    }
}

/// Solve with default control discretization and tolerance.
pub fn solve_resolvent(
    space: &ModelSpace,
    lambda: f64,
    h: &GridFunction,
    control_bound: f64,
    dt: f64,
) -> Result<GridFunction> {
    let solver = ResolventSolver { control_bound, dt, ..ResolventSolver::new(lambda) };
    Ok(solver.solve(space, h)?.u)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Verdict {
    Pass,
    /// Violation above the tolerance but within twice of it.
    Marginal,
    Fail,
}

impl Verdict {
    fn from_violation(violation: f64, tol: f64) -> Self {
        if violation <= tol {
            Verdict::Pass
        } else if violation <= 2.0 * tol {
            Verdict::Marginal
        } else {
            Verdict::Fail
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Marginal => "marginal",
            Verdict::Fail => "fail",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViscosityReport {
    /// Grid points within [`GAP_TOLERANCE`] of the extremum of `u - f`.
    pub optimizers: Vec<f64>,
    /// `sup (u - f)` for subsolutions, `inf (v - f)` for supersolutions.
    pub extremum: f64,
    /// Smallest violation over the optimizers: `u - lambda g - h` for the
    /// subsolution test, `-(v - lambda g - h)` for the supersolution test.
    pub violation: f64,
    pub tolerance: f64,
    pub verdict: Verdict,
}

pub fn check_subsolution(
    u: &GridFunction,
    pair: &HamiltonianPair,
    h: &GridFunction,
    lambda: f64,
    tol: f64,
) -> Result<ViscosityReport> {
    check(u, pair, h, lambda, tol, Side::Dagger)
}

pub fn check_supersolution(
    v: &GridFunction,
    pair: &HamiltonianPair,
    h: &GridFunction,
    lambda: f64,
    tol: f64,
) -> Result<ViscosityReport> {
    check(v, pair, h, lambda, tol, Side::Ddagger)
}

fn check(
    u: &GridFunction,
    pair: &HamiltonianPair,
    h: &GridFunction,
    lambda: f64,
    tol: f64,
    side: Side,
) -> Result<ViscosityReport> {
    positive("lambda", lambda)?;
    if !(tol >= 0.0) {
        return Err(Error::ParameterOutOfRange { name: "tolerance", value: tol });
    }
    if pair.side() != side {
        return Err(Error::WrongSide(match side {
            Side::Dagger => "subsolution check needs a dagger-side pair",
            Side::Ddagger => "supersolution check needs a ddagger-side pair",
        }));
    }
    u.same_grid(h)?;
    let sign = match side {
        Side::Dagger => 1.0,
        Side::Ddagger => -1.0,
    };
    let grid = u.grid();
    // sign * (u - f), maximized in both cases.
    let gap = grid
        .points()
        .zip(u.values())
        .map(|(x, ui)| Ok(sign * (ui - pair.f(&SpacePoint::scalar(x))?)))
        .collect::<Result<Vec<f64>>>()?;
    let best = gap.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut optimizers = Vec::new();
    let mut violation = f64::INFINITY;
    for (i, g) in gap.iter().enumerate() {
        if *g < best - GAP_TOLERANCE {
            continue;
        }
        let x = grid.x(i);
        let residual = u.values()[i] - lambda * pair.g(&SpacePoint::scalar(x))? - h.values()[i];
        violation = violation.min(sign * residual);
        optimizers.push(x);
    }
    if optimizers.is_empty() {
        return Err(Error::GridMismatch);
    }
    Ok(ViscosityReport {
        optimizers,
        extremum: sign * best,
        violation,
        tolerance: tol,
        verdict: Verdict::from_violation(violation, tol),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComparisonReport {
    /// `max (u - v)`.
    pub lhs: f64,
    /// `max (h_dag - h_ddag)`.
    pub rhs: f64,
    /// Allowed excess `2 (tolerance + 5 dx)`.
    pub slack: f64,
    pub pass: bool,
}

/// Compare `max(u - v)` with `max(h_dag - h_ddag)` up to the solver slack
/// `2 (solver_tolerance + 5 dx)`.
pub fn comparison_gap(
    u: &GridFunction,
    v: &GridFunction,
    h_dag: &GridFunction,
    h_ddag: &GridFunction,
    solver_tolerance: f64,
) -> Result<ComparisonReport> {
    u.same_grid(h_dag)?;
    let lhs = u.max_difference(v)?;
    let rhs = h_dag.max_difference(h_ddag)?;
    let slack = 2.0 * (solver_tolerance + 5.0 * u.grid().dx());
    Ok(ComparisonReport { lhs, rhs, slack, pass: lhs <= rhs + slack })
}
