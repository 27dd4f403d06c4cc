//! Forward dynamics: the controlled state equation `xdot = M(x) F(x, phi)`
//! integrated with fixed-step classical RK4.
//!
//! The trajectory stores every node (states, velocities, total forces, and
//! energy terms) so the backward adjoint solve and the pumping quadrature
//! can reuse the forward data without recomputation.

use std::io::Write;

use nalgebra::{DMatrix, DVector, Vector2};

use crate::chain::{
    bond_geometry, energy_terms, total_force_geom, ChainState, EnergyTerms, FieldAngle,
};
use crate::control::ControlSignal;
use crate::error::{Error, Result};
use crate::hydro::grand_mobility_geom;
use crate::params::PhysicalParams;

/// Uniform time grid with `n_steps` RK4 steps (so `n_steps + 1` nodes).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    t0: f64,
    tf: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, tf: f64, n_steps: usize) -> Result<Self> {
        if !(tf > t0) || !t0.is_finite() || !tf.is_finite() {
            return Err(Error::InvalidParameter {
                name: "tf",
                value: tf,
            });
        }
        if n_steps < 2 {
            return Err(Error::InvalidParameter {
                name: "n_steps",
                value: n_steps as f64,
            });
        }
        Ok(TimeGrid { t0, tf, n_steps })
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn tf(&self) -> f64 {
        self.tf
    }

    /// Stroke period tf - t0.
    pub fn span(&self) -> f64 {
        self.tf - self.t0
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn n_nodes(&self) -> usize {
        self.n_steps + 1
    }

    pub fn dt(&self) -> f64 {
        (self.tf - self.t0) / self.n_steps as f64
    }

    pub fn node(&self, m: usize) -> f64 {
        self.t0 + m as f64 * self.dt()
    }
}

/// Forward solution on a time grid with cached per-node data.
#[derive(Debug, Clone)]
pub struct Trajectory {
    grid: TimeGrid,
    control: ControlSignal,
    states: Vec<ChainState>,
    velocities: Vec<DVector<f64>>,
    forces: Vec<Vec<Vector2<f64>>>,
    energies: Vec<EnergyTerms>,
}

impl Trajectory {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn control(&self) -> &ControlSignal {
        &self.control
    }

    pub fn states(&self) -> &[ChainState] {
        &self.states
    }

    pub fn state(&self, m: usize) -> &ChainState {
        &self.states[m]
    }

    /// Flattened node velocities `M F`, m/s.
    pub fn velocities(&self) -> &[DVector<f64>] {
        &self.velocities
    }

    /// Total per-bead forces at each node, N.
    pub fn forces(&self) -> &[Vec<Vector2<f64>>] {
        &self.forces
    }

    pub fn energies(&self) -> &[EnergyTerms] {
        &self.energies
    }

    pub fn n_nodes(&self) -> usize {
        self.states.len()
    }

    /// State at an arbitrary time by linear interpolation between nodes.
    pub fn state_at(&self, t: f64) -> ChainState {
        let (m, theta) = self.locate(t);
        if theta == 0.0 {
            return self.states[m].clone();
        }
        let a = self.states[m].to_flat();
        let b = self.states[m + 1].to_flat();
        ChainState::from_flat(&(a * (1.0 - theta) + b * theta)).expect("stored states are finite")
    }

    /// Cubic Hermite state interpolation using the cached node velocities;
    /// used by the adjoint solve, where the linear interpolant would cap the
    /// observable convergence order at two.
    pub fn state_at_hermite(&self, t: f64) -> ChainState {
        let (m, theta) = self.locate(t);
        if theta == 0.0 {
            return self.states[m].clone();
        }
        let h = self.grid.dt();
        let x0 = self.states[m].to_flat();
        let x1 = self.states[m + 1].to_flat();
        let v0 = &self.velocities[m];
        let v1 = &self.velocities[m + 1];
        let t2 = theta * theta;
        let t3 = t2 * theta;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + theta;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        let x = x0 * h00 + v0 * (h * h10) + x1 * h01 + v1 * (h * h11);
        ChainState::from_flat(&x).expect("stored states are finite")
    }

    fn locate(&self, t: f64) -> (usize, f64) {
        let dt = self.grid.dt();
        let s = ((t - self.grid.t0()) / dt).clamp(0.0, self.grid.n_steps() as f64);
        let m = (s.floor() as usize).min(self.grid.n_steps() - 1);
        let theta = s - m as f64;
        if theta <= 0.0 && m == 0 {
            (0, 0.0)
        } else {
            (m, theta)
        }
    }

    /// Writes one row per node: time, bead coordinates, and the three
    /// energy terms. The header carries SI units in the column names.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let n = self.states[0].n_beads();
        write!(w, "t_s")?;
        for i in 1..=n {
            write!(w, ",y_{i}_m,z_{i}_m")?;
        }
        writeln!(w, ",E_stretch_J,E_bend_J,E_dipole_J")?;
        for m in 0..self.n_nodes() {
            write!(w, "{}", self.grid.node(m))?;
            for p in self.states[m].positions() {
                write!(w, ",{},{}", p.x, p.y)?;
            }
            let e = &self.energies[m];
            writeln!(w, ",{},{},{}", e.stretching, e.bending, e.dipole)?;
        }
        Ok(())
    }
}

/// Right-hand side of the state equation: `M(x) F(x, phi)` flattened to
/// (vy_1, vz_1, ..., vy_n, vz_n).
pub fn velocity_field(
    state: &ChainState,
    params: &PhysicalParams,
    angle: &FieldAngle,
) -> Result<DVector<f64>> {
    let geom = bond_geometry(state)?;
    let mobility = grand_mobility_geom(&geom, params)?;
    let forces = total_force_geom(&geom, params, angle);
    Ok(mobility.apply(&flatten_forces(&forces)))
}

pub(crate) fn flatten_forces(forces: &[Vector2<f64>]) -> DVector<f64> {
    let mut v = DVector::zeros(2 * forces.len());
    for (i, f) in forces.iter().enumerate() {
        v[2 * i] = f.x;
        v[2 * i + 1] = f.y;
    }
    v
}

/// Full RHS evaluation that also returns the per-bead forces, for node
/// caching during integration.
fn velocity_and_forces(
    state: &ChainState,
    params: &PhysicalParams,
    angle: &FieldAngle,
) -> Result<(DVector<f64>, Vec<Vector2<f64>>)> {
    let geom = bond_geometry(state)?;
    let mobility = grand_mobility_geom(&geom, params)?;
    let forces = total_force_geom(&geom, params, angle);
    let v = mobility.apply(&flatten_forces(&forces));
    Ok((v, forces))
}

/// Integrates the state equation with classical RK4 at fixed step, caching
/// states, velocities, forces, and energies at every node.
///
/// The control is evaluated at the RK4 stage times through its own
/// piecewise-linear interpolant. Errors with `NumericalBlowup` when any
/// coordinate exceeds `1e3 * n * l_rest` or becomes non-finite.
pub fn integrate_forward(
    x0: &ChainState,
    control: &ControlSignal,
    grid: &TimeGrid,
    params: &PhysicalParams,
) -> Result<Trajectory> {
    let n = x0.n_beads();
    let bound = 1e3 * n as f64 * params.l_rest;
    let dt = grid.dt();
    let n_steps = grid.n_steps();

    let mut states = Vec::with_capacity(n_steps + 1);
    let mut velocities = Vec::with_capacity(n_steps + 1);
    let mut forces = Vec::with_capacity(n_steps + 1);
    let mut energies = Vec::with_capacity(n_steps + 1);

    let rhs = |t: f64, y: &DVector<f64>| -> Result<DVector<f64>> {
        let state = ChainState::from_flat(y)?;
        velocity_field(&state, params, &FieldAngle::new(control.eval(t)))
    };

    let mut y = x0.to_flat();
    for m in 0..=n_steps {
        let t = grid.node(m);
        let state = ChainState::from_flat(&y)?;
        check_bounds(&y, bound, t)?;
        let angle = FieldAngle::new(control.eval(t));
        let (v, f) = velocity_and_forces(&state, params, &angle)?;
        energies.push(energy_terms(&state, params, &angle)?);
        states.push(state);
        velocities.push(v.clone());
        forces.push(f);
        if m == n_steps {
            break;
        }
        // Classical RK4; k1 reuses the node evaluation above.
        let k1 = v;
        let k2 = rhs(t + 0.5 * dt, &(&y + &k1 * (0.5 * dt)))?;
        let k3 = rhs(t + 0.5 * dt, &(&y + &k2 * (0.5 * dt)))?;
        let k4 = rhs(t + dt, &(&y + &k3 * dt))?;
        y += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
    }

    Ok(Trajectory {
        grid: *grid,
        control: control.clone(),
        states,
        velocities,
        forces,
        energies,
    })
}

fn check_bounds(y: &DVector<f64>, bound: f64, t: f64) -> Result<()> {
    for &c in y.iter() {
        if !c.is_finite() || c.abs() > bound {
            return Err(Error::NumericalBlowup { t });
        }
    }
    Ok(())
}

/// Jacobian of the velocity field with respect to the flattened state, by
/// central finite differences with coordinate step `h_rel * l_rest`.
pub fn state_jacobian(
    state: &ChainState,
    params: &PhysicalParams,
    angle: &FieldAngle,
    h_rel: f64,
) -> Result<DMatrix<f64>> {
    let flat = state.to_flat();
    let dim = flat.len();
    let h = h_rel * params.l_rest;
    let mut jac = DMatrix::zeros(dim, dim);
    let mut work = flat.clone();
    for c in 0..dim {
        work[c] = flat[c] + h;
        let fp = velocity_field(&ChainState::from_flat(&work)?, params, angle)?;
        work[c] = flat[c] - h;
        let fm = velocity_field(&ChainState::from_flat(&work)?, params, angle)?;
        work[c] = flat[c];
        let col = (fp - fm) / (2.0 * h);
        jac.set_column(c, &col);
    }
    Ok(jac)
}

/// Default relative FD step for [`state_jacobian`].
pub const DEFAULT_JACOBIAN_H_REL: f64 = 1e-6;
