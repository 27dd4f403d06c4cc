//! Physical constants of the bead chain and the surrounding fluid.

use serde::Serialize;

use crate::error::{Error, Result};

/// Vacuum permeability, N/A^2.
pub const MU0: f64 = 4.0e-7 * std::f64::consts::PI;

/// Separations below this guard (in meters) are treated as coincident:
/// the dipole 1/x^3 and 1/x^4 terms would otherwise produce NaN/Inf.
pub const MIN_SEPARATION: f64 = 1e-12;

/// Physical parameters of a chain of superparamagnetic beads in a viscous
/// fluid. All values are SI.
///
/// The chain has `n` mobile beads of radius `a` anchored at the origin; bonds
/// have rest length `l_rest` (3a by default, matching the initial spacing).
/// The induced dipole strength enters through `chi * b_field`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhysicalParams {
    /// Number of mobile beads.
    pub n: usize,
    /// Bead radius (m).
    pub a: f64,
    /// Magnetic susceptibility (dimensionless, any sign).
    pub chi: f64,
    /// Fluid viscosity (N s / m^2).
    pub eta: f64,
    /// Stretching coefficient of each bond (N/m).
    pub k_stretch: f64,
    /// Bending rigidity (N m).
    pub a_bend: f64,
    /// Magnetic field magnitude (T).
    pub b_field: f64,
    /// Vacuum permeability (N/A^2).
    pub mu0: f64,
    /// Bond rest length (m).
    pub l_rest: f64,
}

impl PhysicalParams {
    /// Builds a parameter set with `l_rest = 3a` and validates it.
    pub fn new(
        n: usize,
        a: f64,
        chi: f64,
        eta: f64,
        k_stretch: f64,
        a_bend: f64,
        b_field: f64,
    ) -> Result<Self> {
        let params = PhysicalParams {
            n,
            a,
            chi,
            eta,
            k_stretch,
            a_bend,
            b_field,
            mu0: MU0,
            l_rest: 3.0 * a,
        };
        params.validate()?;
        Ok(params)
    }

    /// Same as [`PhysicalParams::new`] but with an explicit rest length.
    pub fn with_rest_length(mut self, l_rest: f64) -> Result<Self> {
        self.l_rest = l_rest;
        self.validate()?;
        Ok(self)
    }

    /// Checks ranges: strictly positive radius, viscosity, permeability and
    /// rest length (with `l_rest > 2a` so beads do not overlap at rest);
    /// non-negative stiffnesses and field so the force-free limits remain
    /// expressible; at least one bead.
    pub fn validate(&self) -> Result<()> {
        if self.n < 1 {
            return Err(Error::InvalidParameter {
                name: "n",
                value: self.n as f64,
            });
        }
        for (name, value) in [("a", self.a), ("eta", self.eta), ("mu0", self.mu0)] {
            if !(value > 0.0) || !value.is_finite() {
                return Err(Error::InvalidParameter { name, value });
            }
        }
        for (name, value) in [
            ("k_stretch", self.k_stretch),
            ("a_bend", self.a_bend),
            ("b_field", self.b_field),
        ] {
            if !(value >= 0.0) || !value.is_finite() {
                return Err(Error::InvalidParameter { name, value });
            }
        }
        if !self.chi.is_finite() {
            return Err(Error::InvalidParameter {
                name: "chi",
                value: self.chi,
            });
        }
        if !(self.l_rest > 2.0 * self.a) || !self.l_rest.is_finite() {
            return Err(Error::InvalidParameter {
                name: "l_rest",
                value: self.l_rest,
            });
        }
        Ok(())
    }

    /// Dipole energy prefactor `C_E = 4 pi a^6 (chi B)^2 / (9 mu0)`, J m^3.
    pub fn dipole_energy_coeff(&self) -> f64 {
        let m = self.chi * self.b_field;
        4.0 * std::f64::consts::PI * self.a.powi(6) * m * m / (9.0 * self.mu0)
    }

    /// Dipole force prefactor `C_F = 3 C_E = 4 pi a^6 (chi B)^2 / (3 mu0)`, N m^4.
    pub fn dipole_force_coeff(&self) -> f64 {
        3.0 * self.dipole_energy_coeff()
    }

    /// Scalar self-mobility `1 / (6 pi eta a)`, m/(N s).
    pub fn self_mobility_coeff(&self) -> f64 {
        1.0 / (6.0 * std::f64::consts::PI * self.eta * self.a)
    }
}

impl Default for PhysicalParams {
    /// Reference experiment configuration: a 20-bead chain of 0.5 um beads
    /// in water, chi = 1.704, B = 0.07 T, k = 1.5e-9 N/m, A = 4.5e-22 N m.
    fn default() -> Self {
        PhysicalParams {
            n: 20,
            a: 0.5e-6,
            chi: 1.704,
            eta: 1.0e-3,
            k_stretch: 1.5e-9,
            a_bend: 4.5e-22,
            b_field: 0.07,
            mu0: MU0,
            l_rest: 1.5e-6,
        }
    }
}
