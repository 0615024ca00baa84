//! TOML configuration schema.
//!
//! ```toml
//! [problem]
//! dim = 1            # 1 or 2
//! horizon = 1.0      # T
//! sigma = 0.05
//! alpha = 2.0
//! [problem.potential]          # optional, default zero
//! family = "gaussian_well"     # zero | gaussian_well | cosine_bump | user_table
//! amplitude = 1.0
//! width = 2.0
//! center = [0.0]
//! [problem.m0]                 # optional, default standard Gaussian
//! weights = [1.0]
//! means = [[0.0]]
//! stds = [1.0]
//! [problem.terminal]           # optional, default zero
//! family = "log_quadratic"     # zero | log_quadratic
//! scale = 1.0
//! center = [0.0]
//!
//! [grid]
//! half_width = 12.0
//! nx = 257          # odd
//! nt = 500          # or: dt = 0.002
//!
//! [solver]
//! damping = 1.0
//! tol = 1e-8
//! max_iter = 200
//! d_cap = 1e4
//! time_scheme = "implicit_euler"   # or "crank_nicolson"
//! initial_guess = "heat_flow"      # or "frozen"
//!
//! [output]
//! snapshots = 5      # evenly spaced time slices written as field CSVs
//!
//! [sweep]            # for `sweep`
//! sigma = [0.0, 10.0, 20.0]
//! horizons = [0.5, 1.0, 2.0]
//! dt = 0.01
//! refine = true
//! workers = 0        # 0: all cores, 1: sequential
//! optimize_shift = false
//!
//! [longtime]         # for `longtime`
//! horizons = [1.0, 2.0, 4.0]
//! dt = 0.01
//! workers = 0
//!
//! [planning]         # for `certify`; prescribed terminal density
//! weights = [1.0]
//! means = [[0.0]]
//! stds = [2.0]
//! ```

use std::path::Path;

use serde::Deserialize;

use crate::error::{ConfigError, GridError, ProblemError};
use crate::grid::{Grid, DEFAULT_HALF_WIDTH};
use crate::problem::{
    CouplingSpec, DataSpec, GaussianMixture, PotentialSpec, ProblemSpec, TerminalCost,
};
use crate::solver::SolverConfig;

const DEFAULT_NX: usize = 257;
const DEFAULT_NT: usize = 500;
const DEFAULT_SNAPSHOTS: usize = 5;
const DEFAULT_SWEEP_DT: f64 = 0.01;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    problem: RawProblem,
    #[serde(default)]
    grid: RawGrid,
    #[serde(default)]
    solver: SolverConfig,
    #[serde(default)]
    output: RawOutput,
    sweep: Option<RawSweep>,
    longtime: Option<RawLongtime>,
    planning: Option<RawMixture>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProblem {
    #[serde(default = "one")]
    dim: usize,
    #[serde(default = "one_f")]
    horizon: f64,
    sigma: f64,
    alpha: f64,
    #[serde(default)]
    potential: PotentialSpec,
    m0: Option<RawMixture>,
    #[serde(default)]
    terminal: TerminalCost,
}

fn one() -> usize {
    1
}

fn one_f() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMixture {
    weights: Vec<f64>,
    means: Vec<Vec<f64>>,
    stds: Vec<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    half_width: Option<f64>,
    nx: Option<usize>,
    nt: Option<usize>,
    dt: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    snapshots: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    sigma: Vec<f64>,
    horizons: Vec<f64>,
    dt: Option<f64>,
    #[serde(default = "yes")]
    refine: bool,
    #[serde(default)]
    workers: usize,
    #[serde(default)]
    optimize_shift: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLongtime {
    horizons: Vec<f64>,
    dt: Option<f64>,
    #[serde(default)]
    workers: usize,
}

/// How the number of time steps follows the horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeResolution {
    Steps(usize),
    Step(f64),
}

impl TimeResolution {
    pub fn steps_for(&self, horizon: f64) -> usize {
        match *self {
            Self::Steps(n) => n,
            Self::Step(dt) => ((horizon / dt).round() as usize).max(1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSettings {
    pub half_width: f64,
    pub nx: usize,
    pub time: TimeResolution,
}

impl GridSettings {
    pub fn grid(&self, dim: usize, horizon: f64) -> Result<Grid, GridError> {
        Grid::new(
            dim,
            self.half_width,
            self.nx,
            self.time.steps_for(horizon),
            horizon,
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub sigma: Vec<f64>,
    pub horizons: Vec<f64>,
    pub dt: f64,
    pub refine: bool,
    pub workers: usize,
    pub optimize_shift: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LongtimeSpec {
    pub horizons: Vec<f64>,
    pub dt: f64,
    pub workers: usize,
}

/// A validated configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub problem: ProblemSpec,
    pub grid: GridSettings,
    pub solver: SolverConfig,
    pub snapshots: usize,
    pub sweep: Option<SweepSpec>,
    pub longtime: Option<LongtimeSpec>,
    pub planning: Option<GaussianMixture>,
}

impl Config {
    pub fn solve_grid(&self) -> Result<Grid, GridError> {
        self.grid.grid(self.problem.dim, self.problem.horizon)
    }
}

pub fn load_config(path: impl AsRef<Path>) -> Result<Config, ConfigError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_config(&text)
}

/// Pulls the offending key out of a serde message such as
/// "unknown field `alpa`, expected ..." or "missing field `alpha`".
fn key_from_message(msg: &str) -> Option<String> {
    for marker in ["unknown field `", "missing field `", "unknown variant `"] {
        if let Some(start) = msg.find(marker) {
            let rest = &msg[start + marker.len()..];
            return rest.find('`').map(|end| rest[..end].to_string());
        }
    }
    None
}

pub fn parse_config(text: &str) -> Result<Config, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| {
        let msg = e.message().to_string();
        match key_from_message(&msg) {
            Some(key) => ConfigError::Schema {
                keys: vec![key],
                messages: vec![msg],
            },
            None => ConfigError::Parse(e.to_string()),
        }
    })?;
    Validator::default().finish(raw)
}

#[derive(Default)]
struct Validator {
    keys: Vec<String>,
    messages: Vec<String>,
}

impl Validator {
    fn fail(&mut self, key: impl Into<String>, message: impl Into<String>) {
        let key = key.into();
        self.messages.push(format!("{key}: {}", message.into()));
        self.keys.push(key);
    }

    fn problem_error(&mut self, section: &str, e: ProblemError) {
        match e {
            ProblemError::InvalidParameter { key, reason } => {
                self.fail(format!("{section}.{key}"), reason)
            }
            other => self.fail(section, other.to_string()),
        }
    }

    fn ascending(&mut self, key: &str, values: &[f64], positive: bool) {
        if values.is_empty() {
            self.fail(key, "must not be empty");
        } else if values.windows(2).any(|w| !(w[1] > w[0])) {
            self.fail(key, "must be strictly ascending");
        } else if values
            .iter()
            .any(|v| !v.is_finite() || (positive && *v <= 0.0) || *v < 0.0)
        {
            self.fail(
                key,
                if positive {
                    "entries must be > 0"
                } else {
                    "entries must be >= 0"
                },
            );
        }
    }

    fn step(&mut self, key: &str, dt: Option<f64>) -> f64 {
        let dt = dt.unwrap_or(DEFAULT_SWEEP_DT);
        if !(dt > 0.0 && dt.is_finite()) {
            self.fail(key, "must be > 0");
        }
        dt
    }

    fn finish(mut self, raw: RawConfig) -> Result<Config, ConfigError> {
        let rp = raw.problem;
        if let Err(e) = CouplingSpec::new(rp.sigma, 1.0) {
            self.problem_error("problem", e);
        }
        if let Err(e) = CouplingSpec::new(0.0, rp.alpha) {
            self.problem_error("problem", e);
        }
        if !(rp.dim == 1 || rp.dim == 2) {
            self.fail("problem.dim", "must be 1 or 2");
        }
        if !(rp.horizon > 0.0 && rp.horizon.is_finite()) {
            self.fail("problem.horizon", "must be > 0");
        }
        let dim = if rp.dim == 2 { 2 } else { 1 };
        let m0 = match rp.m0 {
            None => GaussianMixture::standard(dim),
            Some(m) => GaussianMixture::new(m.weights, m.means, m.stds).unwrap_or_else(|e| {
                self.problem_error("problem", e);
                GaussianMixture::standard(dim)
            }),
        };
        if m0.dim() != dim {
            self.fail(
                "problem.m0.means",
                format!("entries must have {dim} coordinate(s)"),
            );
        }
        if let Err(e) = rp.potential.validate(dim) {
            self.problem_error("problem.potential", e);
        }
        if let Err(e) = rp.terminal.validate(dim) {
            self.problem_error("problem.terminal", e);
        }
        let problem = ProblemSpec {
            dim,
            horizon: rp.horizon,
            coupling: CouplingSpec {
                sigma: rp.sigma,
                alpha: rp.alpha,
            },
            potential: rp.potential,
            data: DataSpec {
                m0,
                terminal: rp.terminal,
            },
        };

        let rg = raw.grid;
        let time = match (rg.nt, rg.dt) {
            (Some(_), Some(_)) => {
                self.fail("grid.dt", "give either grid.nt or grid.dt, not both");
                TimeResolution::Steps(DEFAULT_NT)
            }
            (Some(nt), None) => TimeResolution::Steps(nt),
            (None, Some(dt)) => TimeResolution::Step(dt),
            (None, None) => TimeResolution::Steps(DEFAULT_NT),
        };
        let grid = GridSettings {
            half_width: rg.half_width.unwrap_or(DEFAULT_HALF_WIDTH),
            nx: rg.nx.unwrap_or(DEFAULT_NX),
            time,
        };
        if let TimeResolution::Step(dt) = time {
            if !(dt > 0.0 && dt.is_finite()) {
                self.fail("grid.dt", "must be > 0");
            }
        }
        if let Err(e) = grid.grid(
            dim,
            if problem.horizon > 0.0 {
                problem.horizon
            } else {
                1.0
            },
        ) {
            let key = match e {
                GridError::BadNodeCount(_) => "grid.nx",
                GridError::BadStepCount => "grid.nt",
                GridError::BadHalfWidth(_) => "grid.half_width",
                GridError::BadHorizon(_) => "problem.horizon",
                _ => "grid",
            };
            if !self.keys.iter().any(|k| k == key) {
                self.fail(key, e.to_string());
            }
        }

        if let Err(e) = raw.solver.validate() {
            self.problem_error("solver", e);
        }

        let snapshots = raw.output.snapshots.unwrap_or(DEFAULT_SNAPSHOTS);
        if snapshots < 2 {
            self.fail("output.snapshots", "must be >= 2");
        }

        let sweep = raw.sweep.map(|s| {
            self.ascending("sweep.sigma", &s.sigma, false);
            self.ascending("sweep.horizons", &s.horizons, true);
            let dt = self.step("sweep.dt", s.dt);
            SweepSpec {
                sigma: s.sigma,
                horizons: s.horizons,
                dt,
                refine: s.refine,
                workers: s.workers,
                optimize_shift: s.optimize_shift,
            }
        });
        let longtime = raw.longtime.map(|l| {
            self.ascending("longtime.horizons", &l.horizons, true);
            let dt = self.step("longtime.dt", l.dt);
            LongtimeSpec {
                horizons: l.horizons,
                dt,
                workers: l.workers,
            }
        });
        let planning =
            raw.planning
                .and_then(|m| match GaussianMixture::new(m.weights, m.means, m.stds) {
                    Ok(mix) if mix.dim() == dim => Some(mix),
                    Ok(_) => {
                        self.fail(
                            "planning.means",
                            format!("entries must have {dim} coordinate(s)"),
                        );
                        None
                    }
                    Err(e) => {
                        self.problem_error("planning", e);
                        None
                    }
                });

        if !self.keys.is_empty() {
            return Err(ConfigError::Schema {
                keys: self.keys,
                messages: self.messages,
            });
        }
        Ok(Config {
            problem,
            grid,
            solver: raw.solver,
            snapshots,
            sweep,
            longtime,
            planning,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[problem]\nsigma = 0.5\nalpha = 2.0\n";

    #[test]
    fn minimal_config_uses_defaults() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.problem.dim, 1);
        assert_eq!(c.grid.nx, DEFAULT_NX);
        assert_eq!(c.solver, SolverConfig::default());
        assert!(c.sweep.is_none());
    }

    #[test]
    fn negative_alpha_names_the_key() {
        let err = parse_config("[problem]\nsigma = 0.5\nalpha = -1.0\n").unwrap_err();
        assert_eq!(err.keys(), ["problem.alpha"]);
    }

    #[test]
    fn unknown_and_missing_keys_are_named() {
        let err = parse_config("[problem]\nsigma = 0.5\nalpa = 2.0\n").unwrap_err();
        assert_eq!(err.keys(), ["alpa"]);
        let err = parse_config("[problem]\nsigma = 0.5\n").unwrap_err();
        assert_eq!(err.keys(), ["alpha"]);
    }

    #[test]
    fn several_errors_are_collected() {
        let text =
            "[problem]\nsigma = -1.0\nalpha = 2.0\n[grid]\nnx = 10\n[solver]\ndamping = 2.0\n";
        let err = parse_config(text).unwrap_err();
        assert_eq!(err.keys(), ["problem.sigma", "grid.nx", "solver.damping"]);
    }

    #[test]
    fn sweep_grids_must_ascend() {
        let text = format!("{MINIMAL}[sweep]\nsigma = [1.0, 0.5]\nhorizons = [1.0]\n");
        let err = parse_config(&text).unwrap_err();
        assert_eq!(err.keys(), ["sweep.sigma"]);
    }

    #[test]
    fn time_step_follows_horizon() {
        let text = format!("{MINIMAL}[grid]\ndt = 0.01\nnx = 65\n");
        let c = parse_config(&text).unwrap();
        assert_eq!(c.grid.grid(1, 2.0).unwrap().nt(), 200);
    }

    #[test]
    fn potential_family_parses() {
        let text = format!(
            "{MINIMAL}[problem.potential]\nfamily = \"gaussian_well\"\namplitude = 1.0\nwidth = 2.0\ncenter = [0.0]\n"
        );
        let c = parse_config(&text).unwrap();
        assert!(matches!(
            c.problem.potential,
            PotentialSpec::GaussianWell { .. }
        ));
    }
}
