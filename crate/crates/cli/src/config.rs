//! Run configuration: a flat `key = value` text format with dotted sections
//! (physics.*, grid.*, optimizer.*, control.*, sweep.*, output.*), blank
//! lines, and `#` comments. Unknown keys are rejected; every value is
//! validated on load. An empty file yields the full default configuration.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ciliaflow_core::{ControlSignal, PhysicalParams};

/// Errors of the command-line layer, mapped onto process exit codes:
/// parse/validation/io -> 1, numerical -> 2.
#[derive(Debug)]
pub enum CliError {
    Parse { line: usize, message: String },
    Validation { key: String, message: String },
    Io(std::io::Error),
    Numerical(ciliaflow_core::Error),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Parse { line, message } => write!(f, "parse error on line {line}: {message}"),
            CliError::Validation { key, message } => {
                write!(f, "invalid configuration value for {key}: {message}")
            }
            CliError::Io(e) => write!(f, "i/o error: {e}"),
            CliError::Numerical(e) => write!(f, "numerical failure: {e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl From<ciliaflow_core::Error> for CliError {
    fn from(e: ciliaflow_core::Error) -> Self {
        CliError::Numerical(e)
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse { .. } | CliError::Validation { .. } | CliError::Io(_) => 1,
            CliError::Numerical(_) => 2,
        }
    }
}

/// Time grid and control discretization.
#[derive(Debug, Clone, PartialEq)]
pub struct GridConfig {
    pub t0: f64,
    pub t_span: f64,
    pub n_t: usize,
    pub n_u: usize,
}

/// Conjugate-gradient loop settings.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    pub eps: f64,
    pub max_iter: usize,
    pub alpha_init: f64,
    pub backtrack_factor: f64,
    pub max_trials: usize,
}

/// Initial field-angle schedule, written in configs as a compact string:
/// `constant:<c>`, `linear:<slope>`, `quadratic_paper`,
/// `random:<lo>:<hi>[:<seed>]`, or `knots:<v1>,<v2>,...`.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialControlSpec {
    Constant(f64),
    Linear(f64),
    QuadraticPaper,
    UniformRandom {
        lo: f64,
        hi: f64,
        seed: Option<u64>,
    },
    Knots(Vec<f64>),
}

impl InitialControlSpec {
    /// Realizes the spec as knot values on [t0, t0 + t_span]. Random specs
    /// without their own seed fall back to the run seed.
    pub fn build(
        &self,
        grid: &GridConfig,
        run_seed: u64,
    ) -> Result<ControlSignal, CliError> {
        let t0 = grid.t0;
        let tf = grid.t0 + grid.t_span;
        let signal = match self {
            InitialControlSpec::Constant(c) => ControlSignal::constant(t0, tf, grid.n_u, *c),
            InitialControlSpec::Linear(slope) => {
                ControlSignal::from_fn(t0, tf, grid.n_u, |t| slope * t)
            }
            InitialControlSpec::QuadraticPaper => ControlSignal::from_fn(t0, tf, grid.n_u, |t| {
                let d = t - std::f64::consts::FRAC_PI_4;
                -(d * d)
            }),
            InitialControlSpec::UniformRandom { lo, hi, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed.unwrap_or(run_seed));
                let values = (0..grid.n_u).map(|_| rng.gen_range(*lo..*hi)).collect();
                ControlSignal::new(t0, tf, values)
            }
            InitialControlSpec::Knots(values) => {
                if values.len() != grid.n_u {
                    return Err(CliError::Validation {
                        key: "control.initial".into(),
                        message: format!(
                            "knot list has {} entries but grid.n_u = {}",
                            values.len(),
                            grid.n_u
                        ),
                    });
                }
                ControlSignal::new(t0, tf, values.clone())
            }
        };
        signal.map_err(CliError::Numerical)
    }
}

impl fmt::Display for InitialControlSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitialControlSpec::Constant(c) => write!(f, "constant:{c}"),
            InitialControlSpec::Linear(s) => write!(f, "linear:{s}"),
            InitialControlSpec::QuadraticPaper => write!(f, "quadratic_paper"),
            InitialControlSpec::UniformRandom { lo, hi, seed } => {
                write!(f, "random:{lo}:{hi}")?;
                if let Some(s) = seed {
                    write!(f, ":{s}")?;
                }
                Ok(())
            }
            InitialControlSpec::Knots(v) => {
                write!(f, "knots:")?;
                for (i, x) in v.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{x}")?;
                }
                Ok(())
            }
        }
    }
}

impl FromStr for InitialControlSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        if s == "quadratic_paper" {
            return Ok(InitialControlSpec::QuadraticPaper);
        }
        if let Some(rest) = s.strip_prefix("constant:") {
            return rest
                .trim()
                .parse()
                .map(InitialControlSpec::Constant)
                .map_err(|e| format!("constant value: {e}"));
        }
        if let Some(rest) = s.strip_prefix("linear:") {
            return rest
                .trim()
                .parse()
                .map(InitialControlSpec::Linear)
                .map_err(|e| format!("linear slope: {e}"));
        }
        if let Some(rest) = s.strip_prefix("random:") {
            let parts: Vec<&str> = rest.split(':').collect();
            if parts.len() != 2 && parts.len() != 3 {
                return Err("random spec needs lo:hi or lo:hi:seed".into());
            }
            let lo: f64 = parts[0].trim().parse().map_err(|e| format!("lo: {e}"))?;
            let hi: f64 = parts[1].trim().parse().map_err(|e| format!("hi: {e}"))?;
            if !(hi > lo) {
                return Err("random spec needs hi > lo".into());
            }
            let seed = match parts.get(2) {
                Some(s) => Some(s.trim().parse().map_err(|e| format!("seed: {e}"))?),
                None => None,
            };
            return Ok(InitialControlSpec::UniformRandom { lo, hi, seed });
        }
        if let Some(rest) = s.strip_prefix("knots:") {
            let values: Result<Vec<f64>, _> =
                rest.split(',').map(|v| v.trim().parse::<f64>()).collect();
            return values
                .map(InitialControlSpec::Knots)
                .map_err(|e| format!("knot value: {e}"));
        }
        Err(format!("unrecognized control spec '{s}'"))
    }
}

/// Full run configuration; the file format is documented in the crate
/// README and every field has the defaults below.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub physics: PhysicalParams,
    pub grid: GridConfig,
    pub optimizer: OptimizerConfig,
    pub control: InitialControlSpec,
    pub sweep_presets: Vec<InitialControlSpec>,
    pub output_dir: PathBuf,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let t = std::f64::consts::PI / 10.0;
        RunConfig {
            physics: PhysicalParams::default(),
            grid: GridConfig {
                t0: t,
                t_span: t,
                n_t: 2000,
                n_u: 64,
            },
            optimizer: OptimizerConfig {
                eps: 1e-5,
                max_iter: 200,
                alpha_init: 1.0,
                backtrack_factor: 0.5,
                max_trials: 30,
            },
            control: InitialControlSpec::Constant(std::f64::consts::FRAC_PI_2),
            sweep_presets: Vec::new(),
            output_dir: PathBuf::from("out"),
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn optimizer_options(&self) -> ciliaflow_core::OptimizerOptions {
        ciliaflow_core::OptimizerOptions {
            eps: self.optimizer.eps,
            max_iter: self.optimizer.max_iter,
            alpha_init: self.optimizer.alpha_init,
            backtrack_factor: self.optimizer.backtrack_factor,
            max_trials: self.optimizer.max_trials,
        }
    }

    pub fn time_grid(&self) -> Result<ciliaflow_core::TimeGrid, CliError> {
        ciliaflow_core::TimeGrid::new(
            self.grid.t0,
            self.grid.t0 + self.grid.t_span,
            self.grid.n_t,
        )
        .map_err(CliError::Numerical)
    }

    /// Initial chain on the z-axis with rest spacing: (0, l0, 0, 2 l0, ...).
    pub fn initial_state(&self) -> ciliaflow_core::ChainState {
        ciliaflow_core::ChainState::rest(self.physics.n, self.physics.l_rest)
    }

    fn validate(&self) -> Result<(), CliError> {
        let invalid = |key: &str, message: &str| {
            Err(CliError::Validation {
                key: key.into(),
                message: message.into(),
            })
        };
        if let Err(e) = self.physics.validate() {
            if let ciliaflow_core::Error::InvalidParameter { name, .. } = e {
                return Err(CliError::Validation {
                    key: format!("physics.{name}"),
                    message: "out of range".into(),
                });
            }
            return Err(CliError::Numerical(e));
        }
        if self.physics.n < 2 {
            return invalid("physics.n", "need at least two beads");
        }
        if !(self.grid.t_span > 0.0) {
            return invalid("grid.t_span", "must be positive");
        }
        if self.grid.n_t < 2 {
            return invalid("grid.n_t", "need at least two steps");
        }
        if self.grid.n_u < 2 {
            return invalid("grid.n_u", "need at least two knots");
        }
        if self.grid.n_u > self.grid.n_t {
            return invalid("grid.n_u", "must not exceed grid.n_t");
        }
        if !(self.optimizer.eps > 0.0) {
            return invalid("optimizer.eps", "must be positive");
        }
        if !(self.optimizer.alpha_init > 0.0) {
            return invalid("optimizer.alpha_init", "must be positive");
        }
        if !(self.optimizer.backtrack_factor > 0.0 && self.optimizer.backtrack_factor < 1.0) {
            return invalid("optimizer.backtrack_factor", "must lie in (0, 1)");
        }
        if self.optimizer.max_trials == 0 {
            return invalid("optimizer.max_trials", "need at least one trial");
        }
        if let InitialControlSpec::Knots(v) = &self.control {
            if v.len() != self.grid.n_u {
                return invalid("control.initial", "knot count must equal grid.n_u");
            }
        }
        Ok(())
    }
}

/// Loads and validates a configuration file, filling defaults for absent
/// keys. `physics.l_rest` defaults to three bead radii.
pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::default();
    let mut l_rest_explicit = false;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw.find('#') {
            Some(p) => &raw[..p],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| CliError::Parse {
            line: line_no,
            message: format!("expected 'key = value', got '{line}'"),
        })?;
        let key = key.trim();
        let value = value.trim();
        let parse_f64 = |v: &str| -> Result<f64, CliError> {
            v.parse().map_err(|e| CliError::Parse {
                line: line_no,
                message: format!("bad number '{v}' for {key}: {e}"),
            })
        };
        let parse_usize = |v: &str| -> Result<usize, CliError> {
            v.parse().map_err(|e| CliError::Parse {
                line: line_no,
                message: format!("bad integer '{v}' for {key}: {e}"),
            })
        };
        match key {
            "physics.n" => cfg.physics.n = parse_usize(value)?,
            "physics.a" => cfg.physics.a = parse_f64(value)?,
            "physics.chi" => cfg.physics.chi = parse_f64(value)?,
            "physics.eta" => cfg.physics.eta = parse_f64(value)?,
            "physics.k_stretch" => cfg.physics.k_stretch = parse_f64(value)?,
            "physics.a_bend" => cfg.physics.a_bend = parse_f64(value)?,
            "physics.b_field" => cfg.physics.b_field = parse_f64(value)?,
            "physics.mu0" => cfg.physics.mu0 = parse_f64(value)?,
            "physics.l_rest" => {
                cfg.physics.l_rest = parse_f64(value)?;
                l_rest_explicit = true;
            }
            "grid.t0" => cfg.grid.t0 = parse_f64(value)?,
            "grid.t_span" => cfg.grid.t_span = parse_f64(value)?,
            "grid.n_t" => cfg.grid.n_t = parse_usize(value)?,
            "grid.n_u" => cfg.grid.n_u = parse_usize(value)?,
            "optimizer.eps" => cfg.optimizer.eps = parse_f64(value)?,
            "optimizer.max_iter" => cfg.optimizer.max_iter = parse_usize(value)?,
            "optimizer.alpha_init" => cfg.optimizer.alpha_init = parse_f64(value)?,
            "optimizer.backtrack_factor" => cfg.optimizer.backtrack_factor = parse_f64(value)?,
            "optimizer.max_trials" => cfg.optimizer.max_trials = parse_usize(value)?,
            "control.initial" => {
                cfg.control = value.parse().map_err(|e| CliError::Parse {
                    line: line_no,
                    message: e,
                })?
            }
            "sweep.presets" => {
                let mut presets = Vec::new();
                for part in value.split(';') {
                    let part = part.trim();
                    if part.is_empty() {
                        continue;
                    }
                    presets.push(part.parse().map_err(|e| CliError::Parse {
                        line: line_no,
                        message: e,
                    })?);
                }
                cfg.sweep_presets = presets;
            }
            "output.dir" => cfg.output_dir = PathBuf::from(value),
            "seed" => {
                cfg.seed = value.parse().map_err(|e| CliError::Parse {
                    line: line_no,
                    message: format!("bad seed '{value}': {e}"),
                })?
            }
            _ => {
                return Err(CliError::Validation {
                    key: key.to_string(),
                    message: "unknown key".into(),
                })
            }
        }
    }
    if !l_rest_explicit {
        cfg.physics.l_rest = 3.0 * cfg.physics.a;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Writes every key of the configuration; `load(save(cfg)) == cfg`.
pub fn save_config<W: Write>(cfg: &RunConfig, mut w: W) -> std::io::Result<()> {
    writeln!(w, "# ciliaflow run configuration (SI units)")?;
    writeln!(w, "physics.n = {}", cfg.physics.n)?;
    writeln!(w, "physics.a = {}", cfg.physics.a)?;
    writeln!(w, "physics.chi = {}", cfg.physics.chi)?;
    writeln!(w, "physics.eta = {}", cfg.physics.eta)?;
    writeln!(w, "physics.k_stretch = {}", cfg.physics.k_stretch)?;
    writeln!(w, "physics.a_bend = {}", cfg.physics.a_bend)?;
    writeln!(w, "physics.b_field = {}", cfg.physics.b_field)?;
    writeln!(w, "physics.mu0 = {}", cfg.physics.mu0)?;
    writeln!(w, "physics.l_rest = {}", cfg.physics.l_rest)?;
    writeln!(w, "grid.t0 = {}", cfg.grid.t0)?;
    writeln!(w, "grid.t_span = {}", cfg.grid.t_span)?;
    writeln!(w, "grid.n_t = {}", cfg.grid.n_t)?;
    writeln!(w, "grid.n_u = {}", cfg.grid.n_u)?;
    writeln!(w, "optimizer.eps = {}", cfg.optimizer.eps)?;
    writeln!(w, "optimizer.max_iter = {}", cfg.optimizer.max_iter)?;
    writeln!(w, "optimizer.alpha_init = {}", cfg.optimizer.alpha_init)?;
    writeln!(
        w,
        "optimizer.backtrack_factor = {}",
        cfg.optimizer.backtrack_factor
    )?;
    writeln!(w, "optimizer.max_trials = {}", cfg.optimizer.max_trials)?;
    writeln!(w, "control.initial = {}", cfg.control)?;
    if !cfg.sweep_presets.is_empty() {
        let joined: Vec<String> = cfg.sweep_presets.iter().map(|p| p.to_string()).collect();
        writeln!(w, "sweep.presets = {}", joined.join("; "))?;
    }
    writeln!(w, "output.dir = {}", cfg.output_dir.display())?;
    writeln!(w, "seed = {}", cfg.seed)?;
    Ok(())
}
