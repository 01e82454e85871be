//! Drift flow with its Jacobian determinant, and the transport of a density
//! by the drift semigroup `ρ ↦ ρ(φ_{−t}(x)) J(−t, x)`.

use serde::Serialize;

use crate::density::DensityGrid;
use crate::error::{Error, Result};
use crate::targets::TargetModel;

/// Number of fourth-order steps, each of size `t / FLOW_SUBSTEPS`.
pub const FLOW_SUBSTEPS: usize = 1000;

/// Boundary mass allowed before a transport check is refused.
pub const BOUNDARY_TOLERANCE: f64 = 1e-10;

fn rhs(target: &TargetModel, x: &[f64], dx: &mut [f64]) -> f64 {
    target.drift(x, dx);
    target.drift_divergence(x)
}

/// RK4 on `(x, log J)`; `None` once the state stops being finite.
fn integrate(target: &TargetModel, x0: &[f64], t: f64) -> Option<(Vec<f64>, f64)> {
    let d = x0.len();
    let h = t / FLOW_SUBSTEPS as f64;
    let mut x = x0.to_vec();
    let mut log_j = 0.0;
    let mut k = [vec![0.0; d], vec![0.0; d], vec![0.0; d], vec![0.0; d]];
    let mut y = vec![0.0; d];
    for _ in 0..FLOW_SUBSTEPS {
        let l1 = rhs(target, &x, &mut k[0]);
        for i in 0..d {
            y[i] = x[i] + 0.5 * h * k[0][i];
        }
        let l2 = rhs(target, &y, &mut k[1]);
        for i in 0..d {
            y[i] = x[i] + 0.5 * h * k[1][i];
        }
        let l3 = rhs(target, &y, &mut k[2]);
        for i in 0..d {
            y[i] = x[i] + h * k[2][i];
        }
        let l4 = rhs(target, &y, &mut k[3]);
        for i in 0..d {
            x[i] += h / 6.0 * (k[0][i] + 2.0 * k[1][i] + 2.0 * k[2][i] + k[3][i]);
        }
        log_j += h / 6.0 * (l1 + 2.0 * l2 + 2.0 * l3 + l4);
        if !log_j.is_finite() || !x.iter().all(|v| v.is_finite()) {
            return None;
        }
    }
    Some((x, log_j.exp()))
}

/// `(φ_t(x), J(t, x))` from co-integrating `ẋ = b(x)` and
/// `d log J / dt = (∇·b)(x)`. Negative `t` runs the flow backwards.
pub fn jacobian_variational(target: &TargetModel, x: &[f64], t: f64) -> Result<(Vec<f64>, f64)> {
    if x.len() != target.dim() {
        return Err(Error::param("x", "point dimension does not match target"));
    }
    if !t.is_finite() {
        return Err(Error::param("t", "must be finite"));
    }
    integrate(target, x, t).ok_or(Error::Unstable)
}

/// `ρ(φ_{−t}(x)) J(−t, x)` at every node of `grid`.
///
/// Nodes whose backward trajectory escapes to infinity within time `t` lie
/// outside the image of the forward flow and carry zero density.
pub fn transported_density(
    target: &TargetModel,
    density: &dyn Fn(&[f64]) -> f64,
    grid: &DensityGrid,
    t: f64,
) -> Result<DensityGrid> {
    if grid.dim() != target.dim() {
        return Err(Error::GridMismatch("grid and target dimensions differ".into()));
    }
    Ok(DensityGrid::from_fn(grid.axes().to_vec(), |x| {
        match integrate(target, x, -t) {
            Some((y, j)) => density(&y) * j,
            None => 0.0,
        }
    }))
}

/// Outcome of a mass-conservation check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MassCheck {
    pub t: f64,
    /// Grid integral of the initial density.
    pub initial_mass: f64,
    /// Grid integral of the transported density.
    pub transported_mass: f64,
    /// `|1 − transported_mass|`.
    pub defect: f64,
}

fn boundary_mass(grid: &DensityGrid) -> f64 {
    let axes = grid.axes();
    let mut idx = vec![0usize; axes.len()];
    let mut total = 0.0;
    for (flat, v) in grid.values().iter().enumerate() {
        let mut rem = flat;
        for k in (0..axes.len()).rev() {
            idx[k] = rem % axes[k].n;
            rem /= axes[k].n;
        }
        if idx.iter().zip(axes).any(|(&i, a)| i == 0 || i + 1 == a.n) {
            total += v;
        }
    }
    total * grid.cell_measure()
}

/// Transports `density` by the drift semigroup for time `t` and returns how
/// far the grid integral moves from one.
pub fn transport_mass_check(
    target: &TargetModel,
    density: &dyn Fn(&[f64]) -> f64,
    grid: &DensityGrid,
    t: f64,
) -> Result<MassCheck> {
    let initial = DensityGrid::from_fn(grid.axes().to_vec(), density);
    let edge = boundary_mass(&initial);
    if edge > BOUNDARY_TOLERANCE {
        return Err(Error::BoundaryMass {
            mass: edge,
            tolerance: BOUNDARY_TOLERANCE,
        });
    }
    let moved = transported_density(target, density, grid, t)?;
    let transported_mass = moved.mass();
    Ok(MassCheck {
        t,
        initial_mass: initial.mass(),
        transported_mass,
        defect: (1.0 - transported_mass).abs(),
    })
}
