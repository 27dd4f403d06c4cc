//! Control gradient via the adjoint, Fletcher-Reeves conjugate gradient
//! iteration, backtracking line search, and stationarity diagnostics.
//!
//! For the minimization of `J(u) = integral of l dt` with Hamiltonian
//! `H = -l + lambda^T f`, the first variation is
//! `dJ = -integral (dH/du) du dt`, so the gradient with respect to knot m of
//! the piecewise-linear control is
//!
//! ```text
//! G_m = -integral (dH/du)(t) w_m(t) dt
//! ```
//!
//! with `w_m` the knot's hat function, evaluated by the trapezoid rule on
//! the trajectory grid. Only the dipole energy depends on the field angle,
//! so `dH/du = sum_i z_i dF_{y,i}/dphi / (T eta) + lambda^T M dF/dphi`.
//! The sign convention is fixed by agreement with central finite
//! differences of the objective, which the test suite enforces.
//!
//! Termination uses a scale-free rule: the iteration stops once the knot
//! gradient norm falls below `eps` times its value at the starting control
//! (a zero starting gradient terminates immediately).

use serde::Serialize;

use crate::adjoint::{solve_adjoint, AdjointTrajectory};
use crate::chain::{dipole_force_dphi, ChainState, FieldAngle};
use crate::control::ControlSignal;
use crate::dynamics::{flatten_forces, TimeGrid, Trajectory};
use crate::error::{Error, Result};
use crate::hydro::grand_mobility;
use crate::params::PhysicalParams;
use crate::pumping::{flow_integrand_from_forces, objective};

/// Options of the conjugate-gradient loop.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerOptions {
    /// Relative gradient tolerance: stop when ||G_k|| <= eps * ||G_0||.
    pub eps: f64,
    /// Maximum number of control updates.
    pub max_iter: usize,
    /// Nominal first-trial control change (radians at the largest knot).
    pub alpha_init: f64,
    /// Step reduction factor of the backtracking line search.
    pub backtrack_factor: f64,
    /// Trial budget of the backtracking line search.
    pub max_trials: usize,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        OptimizerOptions {
            eps: 1e-5,
            max_iter: 200,
            alpha_init: 1.0,
            backtrack_factor: 0.5,
            max_trials: 30,
        }
    }
}

/// Why the optimization loop stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationReason {
    GradientTolerance,
    MaxIterations,
    LineSearchFailure,
}

/// Pointwise stationarity measures of an iterate (Hamiltonian u-derivative
/// and Hamiltonian variation along the trajectory).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PmpDiagnostics {
    /// sup over grid nodes of |dH/du|.
    pub stationarity: f64,
    /// max H - min H over grid nodes.
    pub h_variation: f64,
}

/// One accepted iterate of the CG loop.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRecord {
    pub k: usize,
    /// Objective J = -pumping_flow at this iterate.
    pub objective: f64,
    /// Stroke-averaged pumping in N m at this iterate.
    pub pumping_raw: f64,
    /// Euclidean norm of the knot gradient.
    pub grad_norm: f64,
    /// Step factor used to leave this iterate (None on the final one).
    pub alpha: Option<f64>,
    /// Fletcher-Reeves coefficient used to build the search direction.
    pub beta: f64,
    /// Whether the direction was reset to steepest descent.
    pub restarted: bool,
    /// Knot angles of this iterate.
    pub control: Vec<f64>,
}

/// Full optimization history plus diagnostics of the final iterate.
#[derive(Debug, Clone, Serialize)]
pub struct OptimizationReport {
    pub iterations: Vec<IterationRecord>,
    pub termination: TerminationReason,
    pub initial_grad_norm: f64,
    pub pmp: Option<PmpDiagnostics>,
}

impl OptimizationReport {
    pub fn final_record(&self) -> &IterationRecord {
        self.iterations.last().expect("at least one iterate")
    }

    pub fn final_control(&self) -> &[f64] {
        &self.final_record().control
    }
}

/// Fletcher-Reeves coefficient `||g_k||^2 / ||g_{k-1}||^2`.
pub fn fr_beta(grad_now: &[f64], grad_prev: &[f64]) -> Result<f64> {
    let denom: f64 = grad_prev.iter().map(|g| g * g).sum();
    if denom == 0.0 {
        return Err(Error::DivisionByZero { what: "fr_beta" });
    }
    let numer: f64 = grad_now.iter().map(|g| g * g).sum();
    Ok(numer / denom)
}

/// Result of one backtracking line search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearchResult {
    pub alpha: f64,
    pub j_new: f64,
    pub trials: usize,
}

/// Backtracks from `alpha_init` by `backtrack_factor` until simple decrease
/// `J(u + alpha d) < J(u)` holds. Evaluator failures (blown-up trial
/// trajectories) count as rejected trials.
pub fn line_search<F>(
    u: &[f64],
    direction: &[f64],
    j_current: f64,
    evaluator: &mut F,
    alpha_init: f64,
    backtrack_factor: f64,
    max_trials: usize,
) -> Result<LineSearchResult>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    if direction.iter().all(|d| *d == 0.0) {
        return Err(Error::InvalidParameter {
            name: "direction",
            value: 0.0,
        });
    }
    let mut alpha = alpha_init;
    let mut trial = vec![0.0; u.len()];
    for t in 0..max_trials {
        for (out, (base, d)) in trial.iter_mut().zip(u.iter().zip(direction)) {
            *out = base + alpha * d;
        }
        if let Ok(j_new) = evaluator(&trial) {
            if j_new < j_current {
                return Ok(LineSearchResult {
                    alpha,
                    j_new,
                    trials: t + 1,
                });
            }
        }
        alpha *= backtrack_factor;
    }
    Err(Error::LineSearchFailure { trials: max_trials })
}

/// Gradient evaluation payload consumed by the CG driver.
#[derive(Debug, Clone)]
pub struct GradientEval {
    pub j: f64,
    pub gradient: Vec<f64>,
    pub diagnostics: Option<PmpDiagnostics>,
}

/// Outcome of the generic CG driver.
#[derive(Debug, Clone)]
pub struct CgOutcome {
    pub iterations: Vec<CgIteration>,
    pub termination: TerminationReason,
    pub initial_grad_norm: f64,
    pub final_diagnostics: Option<PmpDiagnostics>,
}

/// Driver-level iterate (no problem-specific fields).
#[derive(Debug, Clone)]
pub struct CgIteration {
    pub k: usize,
    pub j: f64,
    pub grad_norm: f64,
    pub alpha: Option<f64>,
    pub beta: f64,
    pub restarted: bool,
    pub u: Vec<f64>,
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// Fletcher-Reeves conjugate gradient with backtracking line search over a
/// plain control vector.
///
/// The loop is: gradient -> termination test -> beta -> direction (with a
/// steepest-descent reset whenever the direction fails the descent test)
/// -> line search -> update. Each iteration's first trial step is scaled so
/// that the control change is about `alpha_init` radians, then warm-started
/// from the previously accepted step; a failed line search is retried once
/// along steepest descent before the loop gives up.
pub fn fr_cg_minimize<FO, FG>(
    u0: Vec<f64>,
    mut eval_objective: FO,
    mut eval_gradient: FG,
    opts: &OptimizerOptions,
) -> Result<CgOutcome>
where
    FO: FnMut(&[f64]) -> Result<f64>,
    FG: FnMut(&[f64]) -> Result<GradientEval>,
{
    let mut u = u0;
    let mut iterations: Vec<CgIteration> = Vec::new();
    let mut g0_norm = 0.0;
    let mut prev_grad: Vec<f64> = Vec::new();
    let mut prev_dir: Vec<f64> = Vec::new();
    let mut prev_alpha: Option<f64> = None;
    let mut final_diag: Option<PmpDiagnostics>;

    for k in 0..=opts.max_iter {
        let ge = eval_gradient(&u)?;
        let grad_norm = norm2(&ge.gradient);
        final_diag = ge.diagnostics;
        if k == 0 {
            g0_norm = grad_norm;
        }

        let mut record = CgIteration {
            k,
            j: ge.j,
            grad_norm,
            alpha: None,
            beta: 0.0,
            restarted: false,
            u: u.clone(),
        };

        if grad_norm <= opts.eps * g0_norm {
            iterations.push(record);
            return Ok(CgOutcome {
                iterations,
                termination: TerminationReason::GradientTolerance,
                initial_grad_norm: g0_norm,
                final_diagnostics: final_diag,
            });
        }
        if k == opts.max_iter {
            iterations.push(record);
            return Ok(CgOutcome {
                iterations,
                termination: TerminationReason::MaxIterations,
                initial_grad_norm: g0_norm,
                final_diagnostics: final_diag,
            });
        }

        let beta = if k == 0 {
            0.0
        } else {
            fr_beta(&ge.gradient, &prev_grad)?
        };
        record.beta = beta;
        let mut dir: Vec<f64> = ge
            .gradient
            .iter()
            .enumerate()
            .map(|(i, g)| -g + if k == 0 { 0.0 } else { beta * prev_dir[i] })
            .collect();
        let descent: f64 = ge.gradient.iter().zip(&dir).map(|(g, d)| g * d).sum();
        if descent >= 0.0 {
            dir = ge.gradient.iter().map(|g| -g).collect();
            record.restarted = true;
        }

        // First trial changes the control by about alpha_init radians at
        // the most-affected knot, warm-started from the last accepted step.
        let auto = opts.alpha_init / inf_norm(&dir).max(f64::MIN_POSITIVE);
        let alpha_start = match prev_alpha {
            None => auto,
            Some(pa) => auto.clamp(0.25 * pa, 4.0 * pa),
        };

        let searched = line_search(
            &u,
            &dir,
            ge.j,
            &mut eval_objective,
            alpha_start,
            opts.backtrack_factor,
            opts.max_trials,
        )
        .or_else(|_| {
            // One steepest-descent retry before giving up.
            if record.restarted {
                return Err(Error::LineSearchFailure {
                    trials: opts.max_trials,
                });
            }
            record.restarted = true;
            dir = ge.gradient.iter().map(|g| -g).collect();
            let retry_start = opts.alpha_init / inf_norm(&dir).max(f64::MIN_POSITIVE);
            line_search(
                &u,
                &dir,
                ge.j,
                &mut eval_objective,
                retry_start,
                opts.backtrack_factor,
                opts.max_trials,
            )
        });

        match searched {
            Ok(ls) => {
                record.alpha = Some(ls.alpha);
                iterations.push(record);
                for (ui, di) in u.iter_mut().zip(&dir) {
                    *ui += ls.alpha * di;
                }
                prev_alpha = Some(ls.alpha);
                prev_grad = ge.gradient;
                prev_dir = dir;
            }
            Err(_) => {
                iterations.push(record);
                return Ok(CgOutcome {
                    iterations,
                    termination: TerminationReason::LineSearchFailure,
                    initial_grad_norm: g0_norm,
                    final_diagnostics: final_diag,
                });
            }
        }
    }
    unreachable!("loop returns at the max_iter check");
}

/// dH/du at every grid node of a solved trajectory/adjoint pair.
fn hamiltonian_u_derivative(
    traj: &Trajectory,
    adjoint: &AdjointTrajectory,
    control: &ControlSignal,
    params: &PhysicalParams,
) -> Result<Vec<f64>> {
    let grid = traj.grid();
    let t_span = grid.span();
    let mut out = Vec::with_capacity(traj.n_nodes());
    for m in 0..traj.n_nodes() {
        let t = grid.node(m);
        let state = traj.state(m);
        let angle = FieldAngle::new(control.eval(t));
        let dfdphi = dipole_force_dphi(state, params, &angle)?;
        // -dl/du = sum_i z_i dF_{y,i}/dphi / (T eta).
        let dl_term: f64 = state
            .positions()
            .iter()
            .zip(&dfdphi)
            .map(|(x, df)| x.y * df.x)
            .sum::<f64>()
            / (t_span * params.eta);
        let mob = grand_mobility(state, params)?;
        let dfu = mob.apply(&flatten_forces(&dfdphi));
        out.push(dl_term + adjoint.lambda(m).dot(&dfu));
    }
    Ok(out)
}

/// Hamiltonian at every grid node from cached trajectory data.
fn hamiltonian_on_grid(
    traj: &Trajectory,
    adjoint: &AdjointTrajectory,
    params: &PhysicalParams,
) -> Vec<f64> {
    let t_span = traj.grid().span();
    (0..traj.n_nodes())
        .map(|m| {
            let fi = flow_integrand_from_forces(traj.state(m), &traj.forces()[m]);
            fi / (t_span * params.eta) + adjoint.lambda(m).dot(&traj.velocities()[m])
        })
        .collect()
}

/// Stationarity diagnostics of an iterate: `sup |dH/du|` and the Hamiltonian
/// variation over the grid.
pub fn pmp_diagnostics(
    traj: &Trajectory,
    adjoint: &AdjointTrajectory,
    control: &ControlSignal,
    params: &PhysicalParams,
) -> Result<PmpDiagnostics> {
    let dhdu = hamiltonian_u_derivative(traj, adjoint, control, params)?;
    let h = hamiltonian_on_grid(traj, adjoint, params);
    let stationarity = dhdu.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let (mut h_min, mut h_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in h {
        h_min = h_min.min(v);
        h_max = h_max.max(v);
    }
    Ok(PmpDiagnostics {
        stationarity,
        h_variation: h_max - h_min,
    })
}

/// Adjoint-based gradient of the objective with respect to the control
/// knots, plus the objective value and stationarity diagnostics.
pub fn control_gradient(
    control: &ControlSignal,
    x0: &ChainState,
    grid: &TimeGrid,
    params: &PhysicalParams,
) -> Result<(Vec<f64>, f64, PmpDiagnostics)> {
    let (j, traj) = objective(control, x0, grid, params)?;
    let adjoint = solve_adjoint(&traj, control, params)?;
    let dhdu = hamiltonian_u_derivative(&traj, &adjoint, control, params)?;
    let diagnostics = pmp_diagnostics(&traj, &adjoint, control, params)?;

    let dt = grid.dt();
    let last = grid.n_steps();
    let n_knots = control.n_knots();
    let mut gradient = vec![0.0; n_knots];
    for m in 0..n_knots {
        let mut acc = 0.0;
        for k in 0..=last {
            let w = if k == 0 || k == last { 0.5 } else { 1.0 };
            acc += w * dt * dhdu[k] * control.hat(m, grid.node(k));
        }
        gradient[m] = -acc;
    }
    Ok((gradient, j, diagnostics))
}

/// Runs the Fletcher-Reeves loop on the pumping objective from the initial
/// control `u0`, recording every iterate.
pub fn optimize(
    u0: &ControlSignal,
    x0: &ChainState,
    grid: &TimeGrid,
    params: &PhysicalParams,
    opts: &OptimizerOptions,
) -> Result<OptimizationReport> {
    if (u0.t0() - grid.t0()).abs() > 1e-12 * grid.span()
        || (u0.tf() - grid.tf()).abs() > 1e-12 * grid.span()
    {
        return Err(Error::InvalidParameter {
            name: "control_span",
            value: u0.t0(),
        });
    }
    let template = u0.clone();
    let eval_objective = |knots: &[f64]| -> Result<f64> {
        let control = template.with_values(knots.to_vec())?;
        Ok(objective(&control, x0, grid, params)?.0)
    };
    let eval_gradient = |knots: &[f64]| -> Result<GradientEval> {
        let control = template.with_values(knots.to_vec())?;
        let (gradient, j, diagnostics) = control_gradient(&control, x0, grid, params)?;
        Ok(GradientEval {
            j,
            gradient,
            diagnostics: Some(diagnostics),
        })
    };
    let outcome = fr_cg_minimize(u0.values().to_vec(), eval_objective, eval_gradient, opts)?;
    Ok(OptimizationReport {
        iterations: outcome
            .iterations
            .into_iter()
            .map(|it| IterationRecord {
                k: it.k,
                objective: it.j,
                pumping_raw: -it.j * params.eta,
                grad_norm: it.grad_norm,
                alpha: it.alpha,
                beta: it.beta,
                restarted: it.restarted,
                control: it.u,
            })
            .collect(),
        termination: outcome.termination,
        initial_grad_norm: outcome.initial_grad_norm,
        pmp: outcome.final_diagnostics,
    })
}
