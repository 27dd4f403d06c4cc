//! Shared fixtures for integration tests: numerically mild parameter sets,
//! seeded random states/controls, and finite-difference oracles.

use nalgebra::Vector2;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ciliaflow_core::{ChainState, ControlSignal, PhysicalParams};

/// Parameter set with well-resolved dynamics for grid-based tests: soft
/// enough forces that the spring relaxation rate stays far from the RK4
/// stability boundary at the resolutions the tests use.
pub fn mild_params(n: usize) -> PhysicalParams {
    PhysicalParams {
        n,
        k_stretch: 2e-4,
        a_bend: 1e-23,
        b_field: 0.01,
        ..PhysicalParams::default()
    }
}

/// Rest chain plus Gaussian perturbations of scale `frac * l_rest`,
/// rejecting configurations with any separation (including to the anchor)
/// below `min_sep_radii * a`.
pub fn random_admissible_state(
    params: &PhysicalParams,
    frac: f64,
    min_sep_radii: f64,
    rng: &mut ChaCha8Rng,
) -> ChainState {
    let n = params.n;
    let min_sep = min_sep_radii * params.a;
    'attempt: loop {
        let mut pos = ChainState::rest(n, params.l_rest).positions().to_vec();
        for p in pos.iter_mut() {
            p.x += frac * params.l_rest * gaussian(rng);
            p.y += frac * params.l_rest * gaussian(rng);
        }
        let mut pts = vec![Vector2::new(0.0, 0.0)];
        pts.extend_from_slice(&pos);
        for i in 0..pts.len() {
            for j in (i + 1)..pts.len() {
                if (pts[j] - pts[i]).norm() < min_sep {
                    continue 'attempt;
                }
            }
        }
        return ChainState::new(pos).unwrap();
    }
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller from two uniforms.
    let u1: f64 = rng.gen_range(1e-12..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Uniform random knot angles in [lo, hi).
pub fn random_control(
    t0: f64,
    tf: f64,
    n_knots: usize,
    lo: f64,
    hi: f64,
    rng: &mut ChaCha8Rng,
) -> ControlSignal {
    ControlSignal::new(t0, tf, (0..n_knots).map(|_| rng.gen_range(lo..hi)).collect()).unwrap()
}

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Central finite-difference gradient of a scalar function of the flattened
/// chain coordinates.
pub fn fd_gradient(
    state: &ChainState,
    h: f64,
    mut f: impl FnMut(&ChainState) -> f64,
) -> Vec<f64> {
    let flat = state.to_flat();
    let mut grad = Vec::with_capacity(flat.len());
    let mut work = flat.clone();
    for c in 0..flat.len() {
        work[c] = flat[c] + h;
        let fp = f(&ChainState::from_flat(&work).unwrap());
        work[c] = flat[c] - h;
        let fm = f(&ChainState::from_flat(&work).unwrap());
        work[c] = flat[c];
        grad.push((fp - fm) / (2.0 * h));
    }
    grad
}

/// Max relative deviation between an analytic per-bead force list and the
/// negative FD gradient of its energy, scaled by the largest force.
pub fn force_vs_fd_energy(
    state: &ChainState,
    h: f64,
    forces: &[Vector2<f64>],
    energy: impl FnMut(&ChainState) -> f64,
) -> f64 {
    let grad = fd_gradient(state, h, energy);
    let scale = forces
        .iter()
        .map(|f| f.norm())
        .fold(0.0_f64, f64::max)
        .max(1e-300);
    let mut worst = 0.0_f64;
    for (i, f) in forces.iter().enumerate() {
        worst = worst.max((f.x + grad[2 * i]).abs() / scale);
        worst = worst.max((f.y + grad[2 * i + 1]).abs() / scale);
    }
    worst
}
