//! Integrated-flow functional and the pumping objective.
//!
//! Above the chain the laterally averaged wall kernel reduces the integrated
//! flow to `sum_i z_i F_{y,i} / eta`, independent of the observation height.
//! Averaging over the stroke window gives the pumping performance; the
//! optimizer minimizes its negation.
//!
//! Both reporting conventions are carried side by side: the raw stroke
//! average of `sum z_i F_{y,i}` in N m, and the same divided by the
//! viscosity, which is dimensionally a volumetric rate in m^3/s.

use serde::Serialize;

use crate::chain::{total_force, ChainState, FieldAngle};
use crate::control::ControlSignal;
use crate::dynamics::{integrate_forward, TimeGrid, Trajectory};
use crate::error::{Error, Result};
use crate::params::PhysicalParams;

/// Stroke-averaged pumping in both unit conventions plus the minimization
/// objective `J = -pumping_flow`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PumpingResult {
    /// (1/T) integral of sum_i z_i F_{y,i} dt, N m.
    #[serde(rename = "pumping_raw_Nm")]
    pub pumping_raw: f64,
    /// pumping_raw / eta, m^3/s.
    #[serde(rename = "pumping_flow_m3s")]
    pub pumping_flow: f64,
    /// Minimization objective, -pumping_flow.
    pub objective: f64,
}

/// Instantaneous flow integrand `sum_i z_i F_{y,i}` (N m) from total forces.
pub fn flow_integrand(
    state: &ChainState,
    params: &PhysicalParams,
    angle: &FieldAngle,
) -> Result<f64> {
    let forces = total_force(state, params, angle)?;
    Ok(flow_integrand_from_forces(state, &forces))
}

pub(crate) fn flow_integrand_from_forces(
    state: &ChainState,
    forces: &[nalgebra::Vector2<f64>],
) -> f64 {
    state
        .positions()
        .iter()
        .zip(forces)
        .map(|(p, f)| p.y * f.x)
        .sum()
}

/// Composite-trapezoid stroke average of the flow integrand over the
/// trajectory grid, using the forces cached during the forward solve.
pub fn pumping_performance(traj: &Trajectory, params: &PhysicalParams) -> Result<PumpingResult> {
    if traj.n_nodes() < 2 {
        return Err(Error::EmptyTrajectory);
    }
    let grid = traj.grid();
    let dt = grid.dt();
    let last = traj.n_nodes() - 1;
    let mut integral = 0.0;
    for m in 0..=last {
        let w = if m == 0 || m == last { 0.5 } else { 1.0 };
        integral += w * dt * flow_integrand_from_forces(traj.state(m), &traj.forces()[m]);
    }
    let pumping_raw = integral / grid.span();
    let pumping_flow = pumping_raw / params.eta;
    Ok(PumpingResult {
        pumping_raw,
        pumping_flow,
        objective: -pumping_flow,
    })
}

/// Runs the forward solve and returns the objective `J = -pumping_flow`
/// together with the trajectory for reuse by the adjoint solve.
pub fn objective(
    control: &ControlSignal,
    x0: &ChainState,
    grid: &TimeGrid,
    params: &PhysicalParams,
) -> Result<(f64, Trajectory)> {
    let traj = integrate_forward(x0, control, grid, params)?;
    let pumping = pumping_performance(&traj, params)?;
    Ok((pumping.objective, traj))
}
