//! Bead-chain state, bond geometry, and the three free-energy terms with
//! their analytic forces.
//!
//! The chain is `n` mobile beads in the (y, z) plane preceded by an immobile
//! anchor at the origin. The total free energy is
//!
//! ```text
//! E = E_stretch + E_bend + E_dipole
//! E_stretch = (k/2) sum_{b=1..n} (l_b - l0)^2
//! E_bend    = (A/l0) sum_{b=1..n-1} (1 - t_b . t_{b+1})        (t_b unit tangents)
//! E_dipole  = C_E sum_{i<j} (1 - 3 (p . x_ij)^2) / |x_ij|^3
//! ```
//!
//! with `C_E = 4 pi a^6 (chi B)^2 / (9 mu0)` and `p = (sin phi, cos phi)` the
//! field direction. Forces are the exact negative gradients of these
//! expressions; every force routine here is validated against central finite
//! differences of its energy in the test suite.

use nalgebra::{DVector, Vector2};

use crate::error::{Error, Result};
use crate::params::{PhysicalParams, MIN_SEPARATION};

/// Position of the immobile anchor preceding bead 1.
pub fn anchor() -> Vector2<f64> {
    Vector2::new(0.0, 0.0)
}

/// Planar positions of the `n` mobile beads, each `(y_i, z_i)` in meters.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    positions: Vec<Vector2<f64>>,
}

impl ChainState {
    /// Wraps bead positions; all coordinates must be finite.
    pub fn new(positions: Vec<Vector2<f64>>) -> Result<Self> {
        for (i, p) in positions.iter().enumerate() {
            if !p.x.is_finite() || !p.y.is_finite() {
                return Err(Error::InvalidParameter {
                    name: "position",
                    value: i as f64,
                });
            }
        }
        Ok(ChainState { positions })
    }

    /// Straight rest configuration on the z-axis: bead i at (0, i * l_rest).
    pub fn rest(n: usize, l_rest: f64) -> Self {
        ChainState {
            positions: (1..=n)
                .map(|i| Vector2::new(0.0, i as f64 * l_rest))
                .collect(),
        }
    }

    pub fn n_beads(&self) -> usize {
        self.positions.len()
    }

    pub fn positions(&self) -> &[Vector2<f64>] {
        &self.positions
    }

    /// Flattens to (y_1, z_1, ..., y_n, z_n).
    pub fn to_flat(&self) -> DVector<f64> {
        let mut v = DVector::zeros(2 * self.positions.len());
        for (i, p) in self.positions.iter().enumerate() {
            v[2 * i] = p.x;
            v[2 * i + 1] = p.y;
        }
        v
    }

    /// Rebuilds a state from a flat (y_1, z_1, ..., y_n, z_n) vector.
    pub fn from_flat(flat: &DVector<f64>) -> Result<Self> {
        assert!(flat.len() % 2 == 0, "flat state length must be even");
        ChainState::new(
            (0..flat.len() / 2)
                .map(|i| Vector2::new(flat[2 * i], flat[2 * i + 1]))
                .collect(),
        )
    }
}

/// Magnetic field angle measured from the z-axis; the field direction is
/// `(sin phi, cos phi)` in (y, z) coordinates. Angle arithmetic is mod 2 pi.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldAngle {
    phi: f64,
}

impl FieldAngle {
    pub fn new(phi: f64) -> Self {
        FieldAngle { phi }
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    /// Unit field direction `p = (sin phi, cos phi)`.
    pub fn direction(&self) -> Vector2<f64> {
        Vector2::new(self.phi.sin(), self.phi.cos())
    }

    /// Derivative of the direction with respect to phi, `(cos phi, -sin phi)`.
    pub fn direction_dphi(&self) -> Vector2<f64> {
        Vector2::new(self.phi.cos(), -self.phi.sin())
    }
}

/// Bond lengths/tangents and mobile-pair separations for one configuration.
///
/// Bonds are indexed 1..=n; bond b joins bead b-1 to bead b, with bead 0 the
/// anchor. Pair data covers mobile beads only (the anchor carries no dipole).
#[derive(Debug, Clone)]
pub struct BondGeometry {
    n: usize,
    lengths: Vec<f64>,
    tangents: Vec<Vector2<f64>>,
    pair_sep: Vec<f64>,
    pair_dir: Vec<Vector2<f64>>,
}

impl BondGeometry {
    pub fn n_beads(&self) -> usize {
        self.n
    }

    /// Length of bond b, 1-based.
    pub fn length(&self, b: usize) -> f64 {
        self.lengths[b - 1]
    }

    /// Unit tangent of bond b, 1-based.
    pub fn tangent(&self, b: usize) -> Vector2<f64> {
        self.tangents[b - 1]
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    fn pair_index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < j && j <= self.n && i >= 1);
        let i0 = i - 1;
        let j0 = j - 1;
        i0 * self.n - i0 * (i0 + 1) / 2 + (j0 - i0 - 1)
    }

    /// Separation of mobile beads i < j (1-based).
    pub fn separation(&self, i: usize, j: usize) -> f64 {
        self.pair_sep[self.pair_index(i, j)]
    }

    /// Unit vector from bead i toward bead j, i < j (1-based).
    pub fn direction(&self, i: usize, j: usize) -> Vector2<f64> {
        self.pair_dir[self.pair_index(i, j)]
    }
}

/// Computes bond and pair geometry with the anchor at the origin.
pub fn bond_geometry(state: &ChainState) -> Result<BondGeometry> {
    bond_geometry_with_anchor(state, anchor())
}

fn bond_geometry_with_anchor(state: &ChainState, anchor: Vector2<f64>) -> Result<BondGeometry> {
    let n = state.n_beads();
    let pos = state.positions();
    let mut lengths = Vec::with_capacity(n);
    let mut tangents = Vec::with_capacity(n);
    let mut prev = anchor;
    for (b, &p) in pos.iter().enumerate() {
        let d = p - prev;
        let l = d.norm();
        if l < MIN_SEPARATION {
            return Err(Error::CoincidentBeads {
                i: b,
                j: b + 1,
                separation: l,
            });
        }
        lengths.push(l);
        tangents.push(d / l);
        prev = p;
    }
    let mut pair_sep = Vec::with_capacity(n * (n - 1) / 2);
    let mut pair_dir = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            let d = pos[j] - pos[i];
            let r = d.norm();
            if r < MIN_SEPARATION {
                return Err(Error::CoincidentBeads {
                    i: i + 1,
                    j: j + 1,
                    separation: r,
                });
            }
            pair_sep.push(r);
            pair_dir.push(d / r);
        }
    }
    Ok(BondGeometry {
        n,
        lengths,
        tangents,
        pair_sep,
        pair_dir,
    })
}

/// Per-node energy terms, J.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct EnergyTerms {
    pub stretching: f64,
    pub bending: f64,
    pub dipole: f64,
}

impl EnergyTerms {
    pub fn total(&self) -> f64 {
        self.stretching + self.bending + self.dipole
    }
}

pub(crate) fn stretching_energy_geom(geom: &BondGeometry, params: &PhysicalParams) -> f64 {
    let l0 = params.l_rest;
    0.5 * params.k_stretch
        * geom
            .lengths()
            .iter()
            .map(|&l| (l - l0) * (l - l0))
            .sum::<f64>()
}

pub(crate) fn bending_energy_geom(geom: &BondGeometry, params: &PhysicalParams) -> f64 {
    let n = geom.n_beads();
    let mut sum = 0.0;
    for b in 1..n {
        sum += 1.0 - geom.tangent(b).dot(&geom.tangent(b + 1));
    }
    params.a_bend / params.l_rest * sum
}

pub(crate) fn dipole_energy_geom(
    geom: &BondGeometry,
    params: &PhysicalParams,
    angle: &FieldAngle,
) -> f64 {
    let c_e = params.dipole_energy_coeff();
    if c_e == 0.0 {
        return 0.0;
    }
    let p = angle.direction();
    let n = geom.n_beads();
    let mut sum = 0.0;
    for i in 1..=n {
        for j in (i + 1)..=n {
            let r = geom.separation(i, j);
            let s = p.dot(&geom.direction(i, j));
            sum += (1.0 - 3.0 * s * s) / (r * r * r);
        }
    }
    c_e * sum
}

/// Stretching free energy `(k/2) sum (l_b - l0)^2` over all n bonds
/// including the anchor bond.
pub fn stretching_energy(state: &ChainState, params: &PhysicalParams) -> Result<f64> {
    Ok(stretching_energy_geom(&bond_geometry(state)?, params))
}

/// Bending free energy `(A/l0) sum (1 - t_b . t_{b+1})` over adjacent bond
/// pairs. The linear (non-squared) form keeps the energy consistent with the
/// analytic bending force.
pub fn bending_energy(state: &ChainState, params: &PhysicalParams) -> Result<f64> {
    Ok(bending_energy_geom(&bond_geometry(state)?, params))
}

/// Dipole-dipole interaction energy over mobile bead pairs; the anchor
/// carries no dipole.
pub fn dipole_energy(
    state: &ChainState,
    params: &PhysicalParams,
    angle: &FieldAngle,
) -> Result<f64> {
    Ok(dipole_energy_geom(&bond_geometry(state)?, params, angle))
}

/// Sum of the three energy terms.
pub fn total_energy(
    state: &ChainState,
    params: &PhysicalParams,
    angle: &FieldAngle,
) -> Result<f64> {
    Ok(energy_terms(state, params, angle)?.total())
}

/// All three energy terms from a single geometry pass.
pub fn energy_terms(
    state: &ChainState,
    params: &PhysicalParams,
    angle: &FieldAngle,
) -> Result<EnergyTerms> {
    let geom = bond_geometry(state)?;
    Ok(EnergyTerms {
        stretching: stretching_energy_geom(&geom, params),
        bending: bending_energy_geom(&geom, params),
        dipole: dipole_energy_geom(&geom, params, angle),
    })
}

pub(crate) fn stretching_force_geom(
    geom: &BondGeometry,
    params: &PhysicalParams,
) -> Vec<Vector2<f64>> {
    let n = geom.n_beads();
    let l0 = params.l_rest;
    let k = params.k_stretch;
    let mut force = vec![Vector2::zeros(); n];
    for b in 1..=n {
        // Tension k (l_b - l0) pulls bead b toward bead b-1 and vice versa.
        let t = k * (geom.length(b) - l0) * geom.tangent(b);
        force[b - 1] -= t;
        if b >= 2 {
            force[b - 2] += t;
        }
    }
    force
}

pub(crate) fn bending_force_geom(
    geom: &BondGeometry,
    params: &PhysicalParams,
) -> Vec<Vector2<f64>> {
    let n = geom.n_beads();
    let coeff = params.a_bend / params.l_rest;
    let mut force = vec![Vector2::zeros(); n];
    for b in 1..n {
        // Term 1 - t_b . t_{b+1}; force = +coeff * grad(t_b . t_{b+1}).
        let ta = geom.tangent(b);
        let tb = geom.tangent(b + 1);
        let c = ta.dot(&tb);
        let u = (tb - c * ta) / geom.length(b); // d c / d(bond b vector)
        let v = (ta - c * tb) / geom.length(b + 1); // d c / d(bond b+1 vector)
        if b >= 2 {
            force[b - 2] -= coeff * u; // bead b-1 (skipped when it is the anchor)
        }
        force[b - 1] += coeff * (u - v); // bead b
        force[b] += coeff * v; // bead b+1
    }
    force
}

pub(crate) fn dipole_force_geom(
    geom: &BondGeometry,
    params: &PhysicalParams,
    angle: &FieldAngle,
) -> Vec<Vector2<f64>> {
    let n = geom.n_beads();
    let c_f = params.dipole_force_coeff();
    let mut force = vec![Vector2::zeros(); n];
    if c_f == 0.0 {
        return force;
    }
    let p = angle.direction();
    for i in 1..=n {
        for j in (i + 1)..=n {
            let r = geom.separation(i, j);
            let x = geom.direction(i, j);
            let s = p.dot(&x);
            let r4 = r * r * r * r;
            // Contribution to the force on bead j; bead i gets the opposite.
            let f = (c_f / r4) * (2.0 * s * p + (1.0 - 5.0 * s * s) * x);
            force[j - 1] += f;
            force[i - 1] -= f;
        }
    }
    force
}

pub(crate) fn dipole_force_dphi_geom(
    geom: &BondGeometry,
    params: &PhysicalParams,
    angle: &FieldAngle,
) -> Vec<Vector2<f64>> {
    let n = geom.n_beads();
    let c_f = params.dipole_force_coeff();
    let mut dforce = vec![Vector2::zeros(); n];
    if c_f == 0.0 {
        return dforce;
    }
    let p = angle.direction();
    let dp = angle.direction_dphi();
    for i in 1..=n {
        for j in (i + 1)..=n {
            let r = geom.separation(i, j);
            let x = geom.direction(i, j);
            let s = p.dot(&x);
            let ds = dp.dot(&x);
            let r4 = r * r * r * r;
            let df = (c_f / r4) * (2.0 * ds * p + 2.0 * s * dp - 10.0 * s * ds * x);
            dforce[j - 1] += df;
            dforce[i - 1] -= df;
        }
    }
    dforce
}

/// Negative gradient of the stretching energy for beads 1..n; the reaction
/// on the anchor is discarded.
pub fn stretching_force(state: &ChainState, params: &PhysicalParams) -> Result<Vec<Vector2<f64>>> {
    Ok(stretching_force_geom(&bond_geometry(state)?, params))
}

/// Negative gradient of the bending energy.
pub fn bending_force(state: &ChainState, params: &PhysicalParams) -> Result<Vec<Vector2<f64>>> {
    Ok(bending_force_geom(&bond_geometry(state)?, params))
}

/// Negative gradient of the dipole energy. Pairwise contributions are
/// action-reaction by construction, so the dipole forces sum to zero.
pub fn dipole_force(
    state: &ChainState,
    params: &PhysicalParams,
    angle: &FieldAngle,
) -> Result<Vec<Vector2<f64>>> {
    Ok(dipole_force_geom(&bond_geometry(state)?, params, angle))
}

/// Sum of the three force terms on every bead.
pub fn total_force(
    state: &ChainState,
    params: &PhysicalParams,
    angle: &FieldAngle,
) -> Result<Vec<Vector2<f64>>> {
    let geom = bond_geometry(state)?;
    Ok(total_force_geom(&geom, params, angle))
}

pub(crate) fn total_force_geom(
    geom: &BondGeometry,
    params: &PhysicalParams,
    angle: &FieldAngle,
) -> Vec<Vector2<f64>> {
    let mut f = stretching_force_geom(geom, params);
    for (fi, bi) in f.iter_mut().zip(bending_force_geom(geom, params)) {
        *fi += bi;
    }
    for (fi, di) in f.iter_mut().zip(dipole_force_geom(geom, params, angle)) {
        *fi += di;
    }
    f
}

/// Derivative of the dipole force with respect to the field angle,
/// term-by-term with `d(p . x)/dphi = p' . x` and `dp/dphi = p'`.
pub fn dipole_force_dphi(
    state: &ChainState,
    params: &PhysicalParams,
    angle: &FieldAngle,
) -> Result<Vec<Vector2<f64>>> {
    Ok(dipole_force_dphi_geom(
        &bond_geometry(state)?,
        params,
        angle,
    ))
}
