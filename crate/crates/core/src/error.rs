//! Error type shared across the crate.

/// Errors raised by geometry, dynamics, and optimization routines.
///
/// All numerical guards surface as typed errors instead of NaN propagation.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Two beads (or a bead and the anchor) closer than the minimum
    /// separation guard; the 1/x^3 and 1/x^4 dipole terms are singular there.
    CoincidentBeads { i: usize, j: usize, separation: f64 },
    /// Pair separation below the guard in a mobility evaluation.
    SeparationTooSmall { separation: f64 },
    /// Blake kernel evaluated below the no-slip wall.
    NegativeHeight { z: f64 },
    /// A trajectory or adjoint coordinate left the admissible range or
    /// became non-finite.
    NumericalBlowup { t: f64 },
    /// Pumping quadrature requested on a trajectory with fewer than two nodes.
    EmptyTrajectory,
    /// Backtracking line search exhausted its trial budget without decrease.
    LineSearchFailure { trials: usize },
    /// Denominator vanished (zero previous gradient norm in the FR beta);
    /// signals premature convergence to the caller.
    DivisionByZero { what: &'static str },
    /// A physical or grid parameter failed validation.
    InvalidParameter { name: &'static str, value: f64 },
}

impl std::fmt::Display for Error {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Error::CoincidentBeads { i, j, separation } => write!(
                f,
                "beads {i} and {j} are coincident (separation {separation:.3e} m)"
            ),
            Error::SeparationTooSmall { separation } => {
                write!(f, "pair separation {separation:.3e} m below guard")
            }
            Error::NegativeHeight { z } => write!(f, "height {z:.3e} m below the wall"),
            Error::NumericalBlowup { t } => {
                write!(f, "numerical blowup at t = {t:.6e} s")
            }
            Error::EmptyTrajectory => write!(f, "trajectory has fewer than two nodes"),
            Error::LineSearchFailure { trials } => {
                write!(f, "line search found no decrease after {trials} trials")
            }
            Error::DivisionByZero { what } => write!(f, "division by zero in {what}"),
            Error::InvalidParameter { name, value } => {
                write!(f, "invalid parameter {name} = {value:.6e}")
            }
        }
    }
}

impl std::error::Error for Error {}

pub type Result<T> = std::result::Result<T, Error>;
