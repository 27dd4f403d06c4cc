//! Bead-chain model of a single magnetic artificial cilium in Stokes flow
//! with adjoint-based optimal control of the driving field angle.
//!
//! The chain is `n` superparamagnetic beads anchored at the origin of the
//! (y, z) plane above a no-slip wall at z = 0. Induced dipoles follow the
//! applied field direction; stretching, bending, and dipole-dipole energies
//! generate forces, Rotne-Prager mobility maps forces to velocities, and
//! the laterally averaged wall kernel turns the force distribution into an
//! integrated pumping flow. A Fletcher-Reeves conjugate-gradient loop with
//! adjoint gradients shapes the field-angle schedule phi(t) to maximize the
//! stroke-averaged pumping.
//!
//! Modules:
//! - [`chain`]: state, geometry, energies, and analytic forces
//! - [`hydro`]: mobility blocks, grand mobility matrix, wall kernel
//! - [`dynamics`]: RK4 forward integration and FD state Jacobians
//! - [`control`]: piecewise-linear field-angle schedules
//! - [`pumping`]: integrated-flow functional and objective
//! - [`adjoint`]: backward costate solve
//! - [`optim`]: adjoint gradient, line search, FR-CG loop

pub mod adjoint;
pub mod chain;
pub mod control;
pub mod dynamics;
pub mod error;
pub mod hydro;
pub mod optim;
pub mod params;
pub mod pumping;

pub use adjoint::{solve_adjoint, AdjointTrajectory};
pub use chain::{ChainState, EnergyTerms, FieldAngle};
pub use control::ControlSignal;
pub use dynamics::{integrate_forward, TimeGrid, Trajectory};
pub use error::{Error, Result};
pub use optim::{
    control_gradient, optimize, OptimizationReport, OptimizerOptions, TerminationReason,
};
pub use params::PhysicalParams;
pub use pumping::{objective, pumping_performance, PumpingResult};
