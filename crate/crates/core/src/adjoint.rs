//! Costate (adjoint) machinery for the pumping objective.
//!
//! With running cost `l = (1/(T eta)) sum_i z_i dE/dy_i` and dynamics
//! `f = M(x) F(x, phi)`, the Hamiltonian is `H = -l + lambda^T f` and the
//! costate solves the backward linear terminal-value problem
//!
//! ```text
//! lambda_dot = -dH/dx = -(df/dx)^T lambda + dl/dx,   lambda(tf) = 0.
//! ```
//!
//! The solve is backward RK4 on the forward grid. State Jacobians come from
//! central finite differences of the velocity field; `dl/dx` from central
//! finite differences of the flow integrand. Stage coefficients are
//! tabulated on the half grid before stepping, with stage states taken from
//! the cubic Hermite interpolant of the stored trajectory.

use nalgebra::{DMatrix, DVector};

use crate::chain::{ChainState, FieldAngle};
use crate::control::ControlSignal;
use crate::dynamics::{state_jacobian, velocity_field, Trajectory, DEFAULT_JACOBIAN_H_REL};
use crate::error::{Error, Result};
use crate::params::PhysicalParams;
use crate::pumping::flow_integrand;

/// Costate vectors on the forward grid, with `lambda(tf) = 0` exactly.
#[derive(Debug, Clone)]
pub struct AdjointTrajectory {
    lambdas: Vec<DVector<f64>>,
}

impl AdjointTrajectory {
    /// Costate at node m (forward indexing).
    pub fn lambda(&self, m: usize) -> &DVector<f64> {
        &self.lambdas[m]
    }

    pub fn lambdas(&self) -> &[DVector<f64>] {
        &self.lambdas
    }
}

/// Hamiltonian `H = -l + lambda^T f` for the pumping problem; `t_span` is
/// the stroke period T entering the running cost.
pub fn hamiltonian(
    state: &ChainState,
    angle: &FieldAngle,
    lambda: &DVector<f64>,
    params: &PhysicalParams,
    t_span: f64,
) -> Result<f64> {
    let fi = flow_integrand(state, params, angle)?;
    let v = velocity_field(state, params, angle)?;
    Ok(fi / (t_span * params.eta) + lambda.dot(&v))
}

/// Gradient of the running cost `l` with respect to the flattened state, by
/// central finite differences of the flow integrand.
fn running_cost_gradient(
    state: &ChainState,
    params: &PhysicalParams,
    angle: &FieldAngle,
    t_span: f64,
    h_rel: f64,
) -> Result<DVector<f64>> {
    let flat = state.to_flat();
    let dim = flat.len();
    let h = h_rel * params.l_rest;
    let scale = -1.0 / (t_span * params.eta); // l = -flow_integrand / (T eta)
    let mut grad = DVector::zeros(dim);
    let mut work = flat.clone();
    for c in 0..dim {
        work[c] = flat[c] + h;
        let fp = flow_integrand(&ChainState::from_flat(&work)?, params, angle)?;
        work[c] = flat[c] - h;
        let fm = flow_integrand(&ChainState::from_flat(&work)?, params, angle)?;
        work[c] = flat[c];
        grad[c] = scale * (fp - fm) / (2.0 * h);
    }
    Ok(grad)
}

/// Right-hand side of the costate equation at time t, with the state taken
/// from the trajectory by linear interpolation between grid nodes.
pub fn adjoint_rhs(
    t: f64,
    lambda: &DVector<f64>,
    traj: &Trajectory,
    control: &ControlSignal,
    params: &PhysicalParams,
) -> Result<DVector<f64>> {
    let state = traj.state_at(t);
    let angle = FieldAngle::new(control.eval(t));
    let jac = state_jacobian(&state, params, &angle, DEFAULT_JACOBIAN_H_REL)?;
    let dl = running_cost_gradient(
        &state,
        params,
        &angle,
        traj.grid().span(),
        DEFAULT_JACOBIAN_H_REL,
    )?;
    Ok(-(jac.transpose() * lambda) + dl)
}

/// Tabulated coefficients of a linear time-varying system
/// `lambda_dot = A(t) lambda + b(t)` on the half grid of a [`TimeGrid`]:
/// entry q holds the coefficients at `t0 + q * dt / 2`.
pub struct CoefficientTable {
    mats: Vec<DMatrix<f64>>,
    vecs: Vec<DVector<f64>>,
}

impl CoefficientTable {
    pub fn new(mats: Vec<DMatrix<f64>>, vecs: Vec<DVector<f64>>) -> Self {
        assert_eq!(mats.len(), vecs.len());
        assert!(mats.len() % 2 == 1, "half grid has 2 n_steps + 1 entries");
        CoefficientTable { mats, vecs }
    }

    /// Constant-coefficient table (used by regression tests against the
    /// closed-form solution of the constant system).
    pub fn constant(a: DMatrix<f64>, b: DVector<f64>, n_steps: usize) -> Self {
        CoefficientTable {
            mats: vec![a; 2 * n_steps + 1],
            vecs: vec![b; 2 * n_steps + 1],
        }
    }

    fn n_steps(&self) -> usize {
        (self.mats.len() - 1) / 2
    }

    fn rhs(&self, q: usize, lambda: &DVector<f64>) -> DVector<f64> {
        &self.mats[q] * lambda + &self.vecs[q]
    }
}

/// Integrates `lambda_dot = A(t) lambda + b(t)` backward from
/// `lambda(tf) = terminal` with RK4 on the grid underlying the table.
/// Returns costates in forward node order.
pub fn solve_linear_backward(
    table: &CoefficientTable,
    dt: f64,
    terminal: DVector<f64>,
) -> Result<Vec<DVector<f64>>> {
    let n_steps = table.n_steps();
    let mut lambdas = vec![DVector::zeros(terminal.len()); n_steps + 1];
    lambdas[n_steps] = terminal;
    let h = -dt;
    for m in (1..=n_steps).rev() {
        let lam = lambdas[m].clone();
        // Stage half-grid indices for the step t_m -> t_{m-1}.
        let (q0, q_half, q1) = (2 * m, 2 * m - 1, 2 * (m - 1));
        let k1 = table.rhs(q0, &lam);
        let k2 = table.rhs(q_half, &(&lam + &k1 * (0.5 * h)));
        let k3 = table.rhs(q_half, &(&lam + &k2 * (0.5 * h)));
        let k4 = table.rhs(q1, &(&lam + &k3 * h));
        let next = lam + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalBlowup {
                t: (m - 1) as f64 * dt,
            });
        }
        lambdas[m - 1] = next;
    }
    Ok(lambdas)
}

/// Builds the adjoint coefficient table for a trajectory: at each half-grid
/// time, `A = -(df/dx)^T` and `b = dl/dx` evaluated on the interpolated
/// trajectory.
pub(crate) fn adjoint_coefficients(
    traj: &Trajectory,
    control: &ControlSignal,
    params: &PhysicalParams,
) -> Result<CoefficientTable> {
    let grid = traj.grid();
    let n_steps = grid.n_steps();
    let half_dt = 0.5 * grid.dt();
    let t_span = grid.span();
    let mut mats = Vec::with_capacity(2 * n_steps + 1);
    let mut vecs = Vec::with_capacity(2 * n_steps + 1);
    for q in 0..=(2 * n_steps) {
        let t = grid.t0() + q as f64 * half_dt;
        let state = if q % 2 == 0 {
            traj.state(q / 2).clone()
        } else {
            traj.state_at_hermite(t)
        };
        let angle = FieldAngle::new(control.eval(t));
        let jac = state_jacobian(&state, params, &angle, DEFAULT_JACOBIAN_H_REL)?;
        let dl = running_cost_gradient(&state, params, &angle, t_span, DEFAULT_JACOBIAN_H_REL)?;
        mats.push(-jac.transpose());
        vecs.push(dl);
    }
    Ok(CoefficientTable::new(mats, vecs))
}

/// Solves the costate terminal-value problem backward over the trajectory
/// grid from `lambda(tf) = 0`.
pub fn solve_adjoint(
    traj: &Trajectory,
    control: &ControlSignal,
    params: &PhysicalParams,
) -> Result<AdjointTrajectory> {
    let table = adjoint_coefficients(traj, control, params)?;
    let dim = 2 * traj.state(0).n_beads();
    let lambdas = solve_linear_backward(&table, traj.grid().dt(), DVector::zeros(dim))?;
    Ok(AdjointTrajectory { lambdas })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{integrate_forward, TimeGrid};

    fn mild_params(n: usize) -> PhysicalParams {
        PhysicalParams {
            n,
            k_stretch: 2e-4,
            a_bend: 1e-23,
            b_field: 0.01,
            ..PhysicalParams::default()
        }
    }

    fn short_trajectory(p: &PhysicalParams, nu: usize, nt: usize) -> (Trajectory, ControlSignal) {
        let tf = 2e-3;
        let grid = TimeGrid::new(0.0, tf, nt).unwrap();
        let control =
            ControlSignal::from_fn(0.0, tf, nu, |t| 0.8 + 400.0 * t).unwrap();
        let x0 = ChainState::rest(p.n, p.l_rest);
        (
            integrate_forward(&x0, &control, &grid, p).unwrap(),
            control,
        )
    }

    #[test]
    fn hamiltonian_with_zero_costate_is_minus_running_cost() {
        let p = mild_params(3);
        let state = ChainState::rest(3, p.l_rest);
        let angle = FieldAngle::new(1.1);
        let t_span = 2e-3;
        let h = hamiltonian(&state, &angle, &DVector::zeros(6), &p, t_span).unwrap();
        let fi = flow_integrand(&state, &p, &angle).unwrap();
        assert_eq!(h, fi / (t_span * p.eta));
    }

    #[test]
    fn hamiltonian_zero_for_zero_field_at_rest() {
        let p = PhysicalParams {
            b_field: 0.0,
            ..mild_params(3)
        };
        let state = ChainState::rest(3, p.l_rest);
        let lambda = DVector::from_element(6, 0.37);
        let h = hamiltonian(&state, &FieldAngle::new(0.5), &lambda, &p, 1e-3).unwrap();
        assert_eq!(h, 0.0);
    }

    #[test]
    fn hamiltonian_recomposition_oracle() {
        let p = mild_params(4);
        let mut pos = ChainState::rest(4, p.l_rest).positions().to_vec();
        pos[1].x += 0.3e-6;
        pos[3].x -= 0.2e-6;
        let state = ChainState::new(pos).unwrap();
        let angle = FieldAngle::new(0.7);
        let lambda = DVector::from_fn(8, |i, _| 0.1 * (i as f64 + 1.0));
        let t_span = 2e-3;
        let h = hamiltonian(&state, &angle, &lambda, &p, t_span).unwrap();
        // Recomposition from independently computed pieces.
        let forces = crate::chain::total_force(&state, &p, &angle).unwrap();
        let m = crate::hydro::grand_mobility(&state, &p).unwrap();
        let v = m.apply(&crate::dynamics::flatten_forces(&forces));
        let fi: f64 = state
            .positions()
            .iter()
            .zip(&forces)
            .map(|(x, f)| x.y * f.x)
            .sum();
        let expect = fi / (t_span * p.eta) + lambda.dot(&v);
        assert!((h - expect).abs() <= 1e-12 * expect.abs());
    }

    #[test]
    fn rhs_with_zero_costate_is_cost_gradient() {
        let p = mild_params(3);
        let (traj, control) = short_trajectory(&p, 4, 50);
        let t = 1.1e-3;
        let rhs = adjoint_rhs(t, &DVector::zeros(6), &traj, &control, &p).unwrap();
        let state = traj.state_at(t);
        let angle = FieldAngle::new(control.eval(t));
        let dl = running_cost_gradient(&state, &p, &angle, traj.grid().span(), 1e-6).unwrap();
        assert_eq!(rhs, dl);
    }

    #[test]
    fn force_free_system_has_zero_costate() {
        let p = PhysicalParams {
            k_stretch: 0.0,
            a_bend: 0.0,
            b_field: 0.0,
            ..mild_params(3)
        };
        let (traj, control) = short_trajectory(&p, 4, 50);
        let adj = solve_adjoint(&traj, &control, &p).unwrap();
        for lam in adj.lambdas() {
            assert_eq!(lam.amax(), 0.0);
        }
    }

    #[test]
    fn terminal_costate_is_exactly_zero() {
        let p = mild_params(3);
        let (traj, control) = short_trajectory(&p, 4, 60);
        let adj = solve_adjoint(&traj, &control, &p).unwrap();
        let last = adj.lambda(traj.n_nodes() - 1);
        assert_eq!(last.amax(), 0.0);
        // And earlier costates are generically nonzero.
        assert!(adj.lambda(0).amax() > 0.0);
    }

    #[test]
    fn two_bead_stretching_rhs_matches_hand_derivation() {
        // Stretching-only, two beads, displaced along z so the dynamics are
        // one-dimensional per bead: l = -(1/(T eta)) sum z_i F_{y,i} and the
        // spring force Jacobian have short closed forms on the axis.
        let p = PhysicalParams {
            n: 2,
            a_bend: 0.0,
            b_field: 0.0,
            k_stretch: 1e-3,
            ..PhysicalParams::default()
        };
        let l0 = p.l_rest;
        let z1 = 1.1 * l0;
        let z2 = 2.3 * l0;
        let x0 = ChainState::new(vec![
            nalgebra::Vector2::new(0.0, z1),
            nalgebra::Vector2::new(0.0, z2),
        ])
        .unwrap();
        let tf = 1e-5;
        let grid = TimeGrid::new(0.0, tf, 10).unwrap();
        let control = ControlSignal::constant(0.0, tf, 2, 0.0).unwrap();
        let traj = integrate_forward(&x0, &control, &grid, &p).unwrap();
        let lambda = DVector::from_vec(vec![0.2, -0.4, 0.6, 0.1]);
        let rhs = adjoint_rhs(0.0, &lambda, &traj, &control, &p).unwrap();

        // Hand-derived pieces at the initial node. On-axis state with
        // tangents t = z-hat; bond lengths l1 = z1, l2 = z2 - z1.
        let k = p.k_stretch;
        let l1 = z1;
        let l2 = z2 - z1;
        // Spring force Hessian H = d^2 E / dx^2 (4x4, y/z interleaved).
        // Per bond: k [t t^T + (1 - l0/l)(I - t t^T)] on its endpoint blocks.
        let bond = |l: f64| {
            nalgebra::Matrix2::new(k * (1.0 - l0 / l), 0.0, 0.0, k)
        };
        let b1 = bond(l1);
        let b2 = bond(l2);
        let mut hess = DMatrix::zeros(4, 4);
        for a in 0..2 {
            for b in 0..2 {
                hess[(a, b)] = b1[(a, b)] + b2[(a, b)];
                hess[(2 + a, 2 + b)] = b2[(a, b)];
                hess[(a, 2 + b)] = -b2[(a, b)];
                hess[(2 + a, b)] = -b2[(a, b)];
            }
        }
        // Forces on the axis: F = -dE/dx, z-components only.
        let f1 = -k * (l1 - l0) + k * (l2 - l0);
        let f2 = -k * (l2 - l0);
        let force = DVector::from_vec(vec![0.0, f1, 0.0, f2]);

        // Mobility and its z-derivatives on the axis. Blocks are diagonal:
        // mu(r) = c_n(r) I + (c_p(r) - c_n(r)) t t^T with t = z-hat.
        let mu_s = p.self_mobility_coeff();
        let r = l2;
        let pref = 1.0 / (6.0 * std::f64::consts::PI * p.eta);
        let a2 = p.a * p.a;
        let c_p = pref * (1.5 / r - a2 / (r * r * r)); // parallel (zz)
        let c_n = pref * (0.75 / r + 0.5 * a2 / (r * r * r)); // normal (yy)
        let dc_p = pref * (-1.5 / (r * r) + 3.0 * a2 / (r * r * r * r));
        let dc_n = pref * (-0.75 / (r * r) - 1.5 * a2 / (r * r * r * r));
        let mut mob = DMatrix::zeros(4, 4);
        mob[(0, 0)] = mu_s;
        mob[(1, 1)] = mu_s;
        mob[(2, 2)] = mu_s;
        mob[(3, 3)] = mu_s;
        mob[(0, 2)] = c_n;
        mob[(2, 0)] = c_n;
        mob[(1, 3)] = c_p;
        mob[(3, 1)] = c_p;
        // d mu / d z1 = -d mu / d z2 (depends on z2 - z1 only).
        let mut dmob_dz2 = DMatrix::zeros(4, 4);
        dmob_dz2[(0, 2)] = dc_n;
        dmob_dz2[(2, 0)] = dc_n;
        dmob_dz2[(1, 3)] = dc_p;
        dmob_dz2[(3, 1)] = dc_p;
        let dmob_dz1 = -dmob_dz2.clone();

        // df/dx with f = M F: columns for y1, z1, y2, z2, from
        // M dF/dx + (dM/dx_c) F per column. On the axis the y-derivative of
        // the pair block swaps y and z (d(x x^T)/dy = [[0,1/r],[1/r,0]]/1),
        // so contracting with the pure-z forces feeds the y-rows.
        let mut jac = -(&mob * &hess);
        let dm_f1 = &dmob_dz1 * &force;
        let dm_f2 = &dmob_dz2 * &force;
        for rr in 0..4 {
            jac[(rr, 1)] += dm_f1[rr];
            jac[(rr, 3)] += dm_f2[rr];
        }
        let swap = (c_p - c_n) / r;
        // d mu / d y1 = -swap * [[0,1],[1,0]], d mu / d y2 the opposite sign.
        jac[(0, 0)] += -swap * f2;
        jac[(2, 0)] += -swap * f1;
        jac[(0, 2)] += swap * f2;
        jac[(2, 2)] += swap * f1;

        // dl/dx: l = -(1/(T eta)) sum_i z_i F_{y,i}. On the axis F_y = 0 and
        // dF_y/dy is the y-row of -H: dl/dy_j = (1/(T eta)) sum_i z_i H_{y_i y_j}.
        let scale = 1.0 / (tf * p.eta);
        let mut dl = DVector::zeros(4);
        dl[0] = scale * (z1 * hess[(0, 0)] + z2 * hess[(2, 0)]);
        dl[2] = scale * (z1 * hess[(0, 2)] + z2 * hess[(2, 2)]);
        // z-derivatives: F_y stays zero to first order in z moves, so only
        // the explicit z_i factor contributes, and it multiplies F_y = 0.
        let expect = -(jac.transpose() * &lambda) + dl;

        let scale_ref = expect.amax();
        for i in 0..4 {
            assert!(
                (rhs[i] - expect[i]).abs() <= 1e-4 * scale_ref,
                "component {i}: {} vs {}",
                rhs[i],
                expect[i]
            );
        }
    }

    #[test]
    fn constant_coefficient_regression() {
        // lambda' = S lambda + g with constant 2x2 S, g has the closed form
        // lambda(t) = -S^{-1} (I - exp(-S (tf - t))) g; the backward RK4
        // must match it to 1e-6 relative.
        let s = DMatrix::from_row_slice(2, 2, &[-0.5, 0.2, 0.1, -0.3]);
        let g = DVector::from_vec(vec![1.0, -2.0]);
        let n_steps = 400;
        let tf = 1.0;
        let dt = tf / n_steps as f64;
        let table = CoefficientTable::constant(s.clone(), g.clone(), n_steps);
        let lambdas = solve_linear_backward(&table, dt, DVector::zeros(2)).unwrap();

        // Analytic solution via 2x2 eigen-decomposition.
        let tr = s[(0, 0)] + s[(1, 1)];
        let det = s[(0, 0)] * s[(1, 1)] - s[(0, 1)] * s[(1, 0)];
        let disc = (tr * tr - 4.0 * det).sqrt();
        let d1 = 0.5 * (tr + disc);
        let d2 = 0.5 * (tr - disc);
        // Eigenvectors (s01, d - s00) for eigenvalue d, as matrix columns.
        let vmat = DMatrix::from_row_slice(
            2,
            2,
            &[s[(0, 1)], s[(0, 1)], d1 - s[(0, 0)], d2 - s[(0, 0)]],
        );
        let vinv = vmat.clone().try_inverse().unwrap();
        let s_inv = s.clone().try_inverse().unwrap();
        let analytic = |t: f64| -> DVector<f64> {
            let tau = tf - t;
            let e = DMatrix::from_diagonal(&DVector::from_vec(vec![
                (-d1 * tau).exp(),
                (-d2 * tau).exp(),
            ]));
            let exp_m: DMatrix<f64> = &vmat * e * &vinv;
            -(&s_inv * (DMatrix::<f64>::identity(2, 2) - exp_m) * &g)
        };
        // Relative to the solution magnitude, with a floor tied to the
        // global scale so the exact zero at tf is not compared against the
        // oracle's own roundoff.
        let global = analytic(0.0).amax();
        let mut max_rel: f64 = 0.0;
        for m in 0..=n_steps {
            let t = m as f64 * dt;
            let expect = analytic(t);
            let got = &lambdas[m];
            let scale = expect.amax().max(1e-9 * global);
            max_rel = max_rel.max((got - expect).amax() / scale);
        }
        assert!(max_rel <= 1e-6, "max relative error {max_rel:.3e}");
    }

    #[test]
    fn adjoint_grid_refinement_order() {
        let p = mild_params(3);
        let tf = 2e-3;
        let x0 = ChainState::rest(3, p.l_rest);
        let control = ControlSignal::from_fn(0.0, tf, 2, |t| 0.6 + 500.0 * t).unwrap();
        let lambda0 = |n_steps: usize| {
            let grid = TimeGrid::new(0.0, tf, n_steps).unwrap();
            let traj = integrate_forward(&x0, &control, &grid, &p).unwrap();
            solve_adjoint(&traj, &control, &p).unwrap().lambda(0).clone()
        };
        let l1 = lambda0(100);
        let l2 = lambda0(200);
        let l4 = lambda0(400);
        let e1 = (&l1 - &l2).amax();
        let e2 = (&l2 - &l4).amax();
        let order = (e1 / e2).log2();
        assert!(order >= 3.0, "observed adjoint order {order:.2}");
    }
}
