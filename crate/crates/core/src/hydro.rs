//! Rotne-Prager mobility blocks, grand mobility assembly, and the laterally
//! averaged Blake kernel.
//!
//! Velocities follow from forces through `v_i = sum_j mu_ij F_j` with
//!
//! ```text
//! mu_ii = I / (6 pi eta a)
//! mu_ij = 1/(6 pi eta r) [ (3/4)(I + x x^T) + (a^2 / 2 r^2)(I - 3 x x^T) ]
//! ```
//!
//! restricted to the (y, z) plane: for in-plane separations the out-of-plane
//! coupling of the 3D tensor vanishes, so the 2x2 truncation is exact.
//! The mobility is free-space; the wall enters only through the pumping
//! kernel `min(z, z')/eta`.

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};

use crate::chain::{bond_geometry, BondGeometry, ChainState};
use crate::error::{Error, Result};
use crate::params::{PhysicalParams, MIN_SEPARATION};

/// Dense symmetric 2n x 2n mobility matrix; block (i, j) maps the force on
/// bead j to the velocity of bead i, in m/(N s).
#[derive(Debug, Clone, PartialEq)]
pub struct MobilityMatrix(DMatrix<f64>);

impl MobilityMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    /// Applies the mobility to a flattened force vector.
    pub fn apply(&self, forces: &DVector<f64>) -> DVector<f64> {
        &self.0 * forces
    }

    /// Cholesky factorization; `None` when the matrix is not positive
    /// definite (possible for overlapping configurations).
    pub fn cholesky(&self) -> Option<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
        nalgebra::Cholesky::new(self.0.clone())
    }
}

/// Self-mobility block `I / (6 pi eta a)`.
pub fn self_mobility(params: &PhysicalParams) -> Matrix2<f64> {
    Matrix2::identity() * params.self_mobility_coeff()
}

/// Pair mobility block for separation `sep` along unit vector `dir`.
pub fn pair_mobility(sep: f64, dir: &Vector2<f64>, params: &PhysicalParams) -> Result<Matrix2<f64>> {
    if sep < MIN_SEPARATION {
        return Err(Error::SeparationTooSmall { separation: sep });
    }
    let pref = 1.0 / (6.0 * std::f64::consts::PI * params.eta * sep);
    let a2r2 = params.a * params.a / (2.0 * sep * sep);
    let outer = dir * dir.transpose();
    let id = Matrix2::identity();
    Ok(pref * (0.75 * (id + outer) + a2r2 * (id - 3.0 * outer)))
}

/// Assembles the grand mobility matrix for a chain state.
pub fn grand_mobility(state: &ChainState, params: &PhysicalParams) -> Result<MobilityMatrix> {
    grand_mobility_geom(&bond_geometry(state)?, params)
}

pub(crate) fn grand_mobility_geom(
    geom: &BondGeometry,
    params: &PhysicalParams,
) -> Result<MobilityMatrix> {
    let n = geom.n_beads();
    let mut m = DMatrix::zeros(2 * n, 2 * n);
    let mu_s = params.self_mobility_coeff();
    for i in 0..n {
        m[(2 * i, 2 * i)] = mu_s;
        m[(2 * i + 1, 2 * i + 1)] = mu_s;
    }
    // Upper triangle, then mirror: symmetry holds to the bit.
    for i in 1..=n {
        for j in (i + 1)..=n {
            let block = pair_mobility(geom.separation(i, j), &geom.direction(i, j), params)?;
            let (r, c) = (2 * (i - 1), 2 * (j - 1));
            for a in 0..2 {
                for b in 0..2 {
                    m[(r + a, c + b)] = block[(a, b)];
                    m[(c + b, r + a)] = block[(a, b)];
                }
            }
        }
    }
    Ok(MobilityMatrix(m))
}

/// Laterally averaged Blake kernel `min(z, z') / eta` above a no-slip wall
/// at z = 0.
pub fn blake_kernel(z: f64, z_prime: f64, params: &PhysicalParams) -> Result<f64> {
    if z < 0.0 {
        return Err(Error::NegativeHeight { z });
    }
    if z_prime < 0.0 {
        return Err(Error::NegativeHeight { z: z_prime });
    }
    Ok(z.min(z_prime) / params.eta)
}
