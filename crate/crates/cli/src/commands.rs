//! The four batch commands: simulate, optimize, gradcheck, and sweep.
//!
//! Every command reads a validated [`RunConfig`], writes its artifacts into
//! the configured output directory, and returns a summary the tests (and
//! main) can inspect. All CSV output carries SI units in the header names.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::Serialize;

use ciliaflow_core::{
    control_gradient, integrate_forward, objective, optimize, pumping_performance,
    ControlSignal, OptimizationReport, PumpingResult, TerminationReason,
};

use crate::config::{CliError, InitialControlSpec, RunConfig};

/// Forward-solve artifacts and stroke-averaged pumping.
#[derive(Debug, Clone, Serialize)]
pub struct SimulateSummary {
    pub n_beads: usize,
    pub n_steps: usize,
    pub t0: f64,
    pub t_span: f64,
    pub pumping: PumpingResult,
}

/// Runs one forward solve from the rest chain, writing trajectory.csv,
/// energies.csv, and summary.json.
pub fn cmd_simulate(cfg: &RunConfig) -> Result<SimulateSummary, CliError> {
    let grid = cfg.time_grid()?;
    let control = cfg.control.build(&cfg.grid, cfg.seed)?;
    let x0 = cfg.initial_state();
    let traj = integrate_forward(&x0, &control, &grid, &cfg.physics)?;
    let pumping = pumping_performance(&traj, &cfg.physics)?;

    fs::create_dir_all(&cfg.output_dir)?;
    let mut f = fs::File::create(cfg.output_dir.join("trajectory.csv"))?;
    traj.write_csv(&mut f)?;
    write_energies_csv(&cfg.output_dir.join("energies.csv"), &traj)?;

    let summary = SimulateSummary {
        n_beads: cfg.physics.n,
        n_steps: cfg.grid.n_t,
        t0: cfg.grid.t0,
        t_span: cfg.grid.t_span,
        pumping,
    };
    write_json(&cfg.output_dir.join("summary.json"), &summary)?;
    Ok(summary)
}

fn write_energies_csv(path: &Path, traj: &ciliaflow_core::Trajectory) -> Result<(), CliError> {
    let mut f = fs::File::create(path)?;
    writeln!(f, "t_s,E_stretch_J,E_bend_J,E_dipole_J,E_total_J")?;
    for m in 0..traj.n_nodes() {
        let e = &traj.energies()[m];
        writeln!(
            f,
            "{},{},{},{},{}",
            traj.grid().node(m),
            e.stretching,
            e.bending,
            e.dipole,
            e.total()
        )?;
    }
    Ok(())
}

/// Full optimization artifacts.
#[derive(Debug, Clone, Serialize)]
pub struct OptimizeOutput {
    pub report: OptimizationReport,
    pub final_pumping: PumpingResult,
}

/// Runs the FR-CG loop, writing report.json, per-iteration control CSVs
/// under controls/, and a plain-text iteration/pumping table.
pub fn cmd_optimize(cfg: &RunConfig) -> Result<OptimizeOutput, CliError> {
    let grid = cfg.time_grid()?;
    let control = cfg.control.build(&cfg.grid, cfg.seed)?;
    let x0 = cfg.initial_state();
    let report = optimize(&control, &x0, &grid, &cfg.physics, &cfg.optimizer_options())?;

    fs::create_dir_all(&cfg.output_dir)?;
    let controls_dir = cfg.output_dir.join("controls");
    fs::create_dir_all(&controls_dir)?;
    for it in &report.iterations {
        let snapshot = control
            .with_values(it.control.clone())
            .map_err(CliError::Numerical)?;
        write_control_csv(&controls_dir.join(format!("iter_{}.csv", it.k)), &snapshot)?;
    }
    write_table2(&cfg.output_dir.join("table2.txt"), &report)?;

    let last = report.final_record();
    let final_pumping = PumpingResult {
        pumping_raw: last.pumping_raw,
        pumping_flow: last.pumping_raw / cfg.physics.eta,
        objective: last.objective,
    };
    let output = OptimizeOutput {
        report,
        final_pumping,
    };
    write_json(&cfg.output_dir.join("report.json"), &output)?;
    Ok(output)
}

fn write_control_csv(path: &Path, control: &ControlSignal) -> Result<(), CliError> {
    let mut f = fs::File::create(path)?;
    writeln!(f, "t_s,phi_rad")?;
    for (m, v) in control.values().iter().enumerate() {
        writeln!(f, "{},{}", control.knot_time(m), v)?;
    }
    Ok(())
}

fn write_table2(path: &Path, report: &OptimizationReport) -> Result<(), CliError> {
    let mut f = fs::File::create(path)?;
    writeln!(f, "iteration  pumping_raw_Nm")?;
    for it in &report.iterations {
        writeln!(f, "{:>9}  {:.6e}", it.k, it.pumping_raw)?;
    }
    writeln!(f, "termination: {:?}", report.termination)?;
    Ok(())
}

/// One knot row of the adjoint-vs-FD comparison.
#[derive(Debug, Clone, Serialize)]
pub struct GradcheckRow {
    pub knot: usize,
    pub adjoint: f64,
    pub fd: f64,
    pub rel_error: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GradcheckOutput {
    pub rows: Vec<GradcheckRow>,
    pub max_rel_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Compares the adjoint control gradient against central finite differences
/// of the objective, knot by knot, and prints the table. Knots whose FD
/// value sits below 1e-3 of the largest are reported but not scored.
/// `flip_sign` negates the adjoint gradient first (a deliberate-failure
/// hook for testing the harness itself).
pub fn cmd_gradcheck(cfg: &RunConfig, flip_sign: bool) -> Result<GradcheckOutput, CliError> {
    let grid = cfg.time_grid()?;
    let control = cfg.control.build(&cfg.grid, cfg.seed)?;
    let x0 = cfg.initial_state();
    let (mut grad, _, _) = control_gradient(&control, &x0, &grid, &cfg.physics)?;
    if flip_sign {
        for g in grad.iter_mut() {
            *g = -*g;
        }
    }

    let h = 1e-4;
    let mut fd = Vec::with_capacity(control.n_knots());
    for m in 0..control.n_knots() {
        let mut dir = vec![0.0; control.n_knots()];
        dir[m] = 1.0;
        let jp = objective(&control.add_scaled(&dir, h), &x0, &grid, &cfg.physics)?.0;
        let jm = objective(&control.add_scaled(&dir, -h), &x0, &grid, &cfg.physics)?.0;
        fd.push((jp - jm) / (2.0 * h));
    }

    let fd_max = fd.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let floor = 1e-3 * fd_max;
    let tolerance = 1e-2;
    let mut rows = Vec::with_capacity(grad.len());
    let mut max_rel: f64 = 0.0;
    println!("{:>4}  {:>14}  {:>14}  {:>10}", "knot", "adjoint", "fd", "rel_err");
    for (m, (a, f)) in grad.iter().zip(&fd).enumerate() {
        let rel = if f.abs() > floor {
            let r = (a - f).abs() / f.abs();
            max_rel = max_rel.max(r);
            Some(r)
        } else {
            None
        };
        match rel {
            Some(r) => println!("{m:>4}  {a:>14.6e}  {f:>14.6e}  {r:>10.3e}"),
            None => println!("{m:>4}  {a:>14.6e}  {f:>14.6e}  below floor"),
        }
        rows.push(GradcheckRow {
            knot: m,
            adjoint: *a,
            fd: *f,
            rel_error: rel,
        });
    }
    let passed = max_rel <= tolerance;
    println!("max relative error {max_rel:.3e} (tolerance {tolerance:.1e}): {}",
        if passed { "PASS" } else { "FAIL" });
    Ok(GradcheckOutput {
        rows,
        max_rel_error: max_rel,
        tolerance,
        passed,
    })
}

/// Outcome of one sweep row.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub preset: String,
    pub status: String,
    pub iterations: Option<usize>,
    pub grad_norm_final: Option<f64>,
    pub pumping_raw: Option<f64>,
    pub pumping_flow: Option<f64>,
    pub termination: Option<TerminationReason>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepOutput {
    pub rows: Vec<SweepRow>,
}

/// Optimizes once per configured preset (rows run concurrently, capped by
/// the CILIAFLOW_THREADS environment variable), writing table3.csv and one
/// optimal-control CSV per preset. Per-row failures are recorded in the
/// row; the sweep itself still succeeds.
pub fn cmd_sweep(cfg: &RunConfig) -> Result<SweepOutput, CliError> {
    if cfg.sweep_presets.is_empty() {
        return Err(CliError::Validation {
            key: "sweep.presets".into(),
            message: "sweep requires at least one preset".into(),
        });
    }
    fs::create_dir_all(&cfg.output_dir)?;
    let controls_dir = cfg.output_dir.join("sweep_controls");
    fs::create_dir_all(&controls_dir)?;

    let n_rows = cfg.sweep_presets.len();
    let threads = sweep_threads(n_rows);
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<(SweepRow, Option<Vec<f64>>)>>> =
        Mutex::new(vec![None; n_rows]);

    std::thread::scope(|scope| {
        for _ in 0..threads {
            scope.spawn(|| loop {
                let idx = next.fetch_add(1, Ordering::SeqCst);
                if idx >= n_rows {
                    break;
                }
                let row = run_sweep_row(cfg, idx);
                results.lock().unwrap()[idx] = Some(row);
            });
        }
    });

    let collected = results.into_inner().unwrap();
    let mut rows = Vec::with_capacity(n_rows);
    for (idx, entry) in collected.into_iter().enumerate() {
        let (row, control) = entry.expect("every row is filled");
        if let Some(values) = control {
            let signal = cfg.sweep_presets[idx]
                .build(&cfg.grid, cfg.seed)
                .and_then(|c| c.with_values(values).map_err(CliError::Numerical))?;
            write_control_csv(&controls_dir.join(format!("preset_{idx}.csv")), &signal)?;
        }
        rows.push(row);
    }

    let mut f = fs::File::create(cfg.output_dir.join("table3.csv"))?;
    writeln!(
        f,
        "preset,status,iterations,grad_norm_final,pumping_raw_Nm,pumping_flow_m3s,termination"
    )?;
    for row in &rows {
        writeln!(
            f,
            "{},{},{},{},{},{},{}",
            row.preset,
            row.status,
            row.iterations.map_or(String::new(), |v| v.to_string()),
            row.grad_norm_final
                .map_or(String::new(), |v| format!("{v:e}")),
            row.pumping_raw.map_or(String::new(), |v| format!("{v:e}")),
            row.pumping_flow.map_or(String::new(), |v| format!("{v:e}")),
            row.termination
                .map_or(String::new(), |t| format!("{t:?}")),
        )?;
    }
    Ok(SweepOutput { rows })
}

fn run_sweep_row(cfg: &RunConfig, idx: usize) -> (SweepRow, Option<Vec<f64>>) {
    let preset = &cfg.sweep_presets[idx];
    let preset_name = preset.to_string();
    let attempt = || -> Result<(OptimizationReport, Vec<f64>), CliError> {
        let grid = cfg.time_grid()?;
        let control = preset.build(&cfg.grid, cfg.seed)?;
        let x0 = cfg.initial_state();
        let report = optimize(&control, &x0, &grid, &cfg.physics, &cfg.optimizer_options())?;
        let final_control = report.final_control().to_vec();
        Ok((report, final_control))
    };
    match attempt() {
        Ok((report, final_control)) => {
            let last = report.final_record();
            (
                SweepRow {
                    preset: preset_name,
                    status: "ok".into(),
                    iterations: Some(report.iterations.len() - 1),
                    grad_norm_final: Some(last.grad_norm),
                    pumping_raw: Some(last.pumping_raw),
                    pumping_flow: Some(last.pumping_raw / cfg.physics.eta),
                    termination: Some(report.termination),
                },
                Some(final_control),
            )
        }
        Err(e) => (
            SweepRow {
                preset: preset_name,
                status: format!("failed: {e}"),
                iterations: None,
                grad_norm_final: None,
                pumping_raw: None,
                pumping_flow: None,
                termination: None,
            },
            None,
        ),
    }
}

fn sweep_threads(n_rows: usize) -> usize {
    let available = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1);
    let cap = std::env::var("CILIAFLOW_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&v| v >= 1)
        .unwrap_or(available);
    cap.min(n_rows).max(1)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut f = fs::File::create(path)?;
    let text = serde_json::to_string_pretty(value).expect("serializable reports");
    f.write_all(text.as_bytes())?;
    f.write_all(b"\n")?;
    Ok(())
}

/// Applies command-line overrides onto a loaded configuration.
pub fn apply_overrides(
    cfg: &mut RunConfig,
    out: Option<PathBuf>,
    seed: Option<u64>,
    nt: Option<usize>,
    nu: Option<usize>,
) {
    if let Some(dir) = out {
        cfg.output_dir = dir;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(n) = nt {
        cfg.grid.n_t = n;
    }
    if let Some(n) = nu {
        cfg.grid.n_u = n;
    }
}

/// Re-validation hook for overridden grids (nt/nu arrive after load).
pub fn validate_overridden(cfg: &RunConfig) -> Result<(), CliError> {
    if cfg.grid.n_u > cfg.grid.n_t || cfg.grid.n_t < 2 || cfg.grid.n_u < 2 {
        return Err(CliError::Validation {
            key: "grid".into(),
            message: "need 2 <= n_u <= n_t".into(),
        });
    }
    Ok(())
}
