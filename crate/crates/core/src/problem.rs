//! Continuous problem data: power-law coupling, potential, initial density,
//! terminal cost, and the structural sign conditions the non-existence
//! certificates rely on.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::ProblemError;
use crate::grid::Grid;
use crate::ops::VectorField;
use crate::tridiag;

/// Slack allowed before a pointwise sign condition is declared violated.
pub const CONDITION_TOLERANCE: f64 = 1e-12;
/// Allowed deviation of the sampled initial mass from one.
pub const MASS_TOLERANCE: f64 = 1e-12;

/// Aggregating coupling `f(m) = σ m^α` with antiderivative `F`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CouplingSpec {
    pub sigma: f64,
    pub alpha: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CouplingValues {
    pub f: f64,
    pub big_f: f64,
    pub f_prime: f64,
}

impl CouplingSpec {
    pub fn new(sigma: f64, alpha: f64) -> Result<Self, ProblemError> {
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(ProblemError::invalid("sigma", "must be finite and >= 0"));
        }
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(ProblemError::invalid("alpha", "must be finite and > 0"));
        }
        Ok(Self { sigma, alpha })
    }

    pub fn eval(&self, m: f64) -> Result<CouplingValues, ProblemError> {
        if m < 0.0 || m.is_nan() {
            return Err(ProblemError::NegativeDensity(m));
        }
        let f_prime = if m == 0.0 {
            if self.alpha >= 1.0 {
                // exactly σ when α = 1, zero beyond
                if self.alpha == 1.0 {
                    self.sigma
                } else {
                    0.0
                }
            } else {
                f64::INFINITY
            }
        } else {
            self.sigma * self.alpha * m.powf(self.alpha - 1.0)
        };
        Ok(CouplingValues {
            f: self.f(m),
            big_f: self.antiderivative(m),
            f_prime,
        })
    }

    /// `σ m^α`, with negative inputs clamped to zero.
    #[inline]
    pub fn f(&self, m: f64) -> f64 {
        if m <= 0.0 {
            0.0
        } else {
            self.sigma * m.powf(self.alpha)
        }
    }

    /// `σ m^(α+1) / (α+1)`, with negative inputs clamped to zero.
    #[inline]
    pub fn antiderivative(&self, m: f64) -> f64 {
        if m <= 0.0 {
            0.0
        } else {
            self.sigma * m.powf(self.alpha + 1.0) / (self.alpha + 1.0)
        }
    }

    /// Coefficient `c` in `N f(m) m - (N+2) F(m) = c m^(α+1)`.
    pub fn scaling_margin(&self, dim: usize) -> f64 {
        let n = dim as f64;
        self.sigma * (n - (n + 2.0) / (self.alpha + 1.0))
    }
}

/// Value, gradient and Laplacian of a closed-form function at one point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PointEval {
    pub value: f64,
    pub grad: [f64; 2],
    pub laplacian: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialSpec {
    #[default]
    Zero,
    /// `-A exp(-|x-c|²/(2w²))`.
    GaussianWell {
        amplitude: f64,
        width: f64,
        center: Vec<f64>,
    },
    /// `A (1 + cos(π|x-c|/w)) / 2` inside the ball of radius `w`, zero outside.
    CosineBump {
        amplitude: f64,
        width: f64,
        center: Vec<f64>,
    },
    /// Natural cubic spline through tabulated values (1D only), constant
    /// extension beyond the table.
    UserTable { points: Vec<f64>, values: Vec<f64> },
}

fn offset(x: &[f64], center: &[f64]) -> ([f64; 2], f64) {
    let mut d = [0.0; 2];
    for (i, xi) in x.iter().enumerate() {
        d[i] = xi - center.get(i).copied().unwrap_or(0.0);
    }
    let r2 = d[0] * d[0] + d[1] * d[1];
    (d, r2)
}

impl PotentialSpec {
    pub fn validate(&self, dim: usize) -> Result<(), ProblemError> {
        match self {
            Self::Zero => Ok(()),
            Self::GaussianWell {
                amplitude,
                width,
                center,
            }
            | Self::CosineBump {
                amplitude,
                width,
                center,
            } => {
                if !amplitude.is_finite() {
                    return Err(ProblemError::invalid(
                        "potential.amplitude",
                        "must be finite",
                    ));
                }
                if !(width.is_finite() && *width > 0.0) {
                    return Err(ProblemError::invalid("potential.width", "must be > 0"));
                }
                if center.len() != dim {
                    return Err(ProblemError::invalid(
                        "potential.center",
                        format!("needs {dim} component(s)"),
                    ));
                }
                Ok(())
            }
            Self::UserTable { points, values } => {
                if dim != 1 {
                    return Err(ProblemError::Configuration(
                        "user_table potentials are one-dimensional".into(),
                    ));
                }
                if points.len() < 2 || points.len() != values.len() {
                    return Err(ProblemError::invalid(
                        "potential.points",
                        "need >= 2 points and matching values",
                    ));
                }
                if points.windows(2).any(|p| p[1] <= p[0]) {
                    return Err(ProblemError::invalid(
                        "potential.points",
                        "must be strictly ascending",
                    ));
                }
                if values.iter().chain(points).any(|v| !v.is_finite()) {
                    return Err(ProblemError::invalid("potential.values", "must be finite"));
                }
                Ok(())
            }
        }
    }

    pub fn eval(&self, x: &[f64]) -> PointEval {
        let n = x.len() as f64;
        match self {
            Self::Zero => PointEval::default(),
            Self::GaussianWell {
                amplitude,
                width,
                center,
            } => {
                let (d, r2) = offset(x, center);
                let w2 = width * width;
                let g = (-r2 / (2.0 * w2)).exp();
                PointEval {
                    value: -amplitude * g,
                    grad: [amplitude * d[0] / w2 * g, amplitude * d[1] / w2 * g],
                    laplacian: -amplitude * (r2 / (w2 * w2) - n / w2) * g,
                }
            }
            Self::CosineBump {
                amplitude,
                width,
                center,
            } => {
                let (d, r2) = offset(x, center);
                let r = r2.sqrt();
                if r >= *width {
                    return PointEval::default();
                }
                let k = PI / width;
                let value = amplitude * 0.5 * (1.0 + (k * r).cos());
                let d2 = -amplitude * 0.5 * k * k * (k * r).cos();
                // φ'(r)/r, continuous through r = 0
                let d1_over_r = if r < 1e-12 {
                    -amplitude * 0.5 * k * k
                } else {
                    -amplitude * 0.5 * k * (k * r).sin() / r
                };
                PointEval {
                    value,
                    grad: [d1_over_r * d[0], d1_over_r * d[1]],
                    laplacian: d2 + (n - 1.0) * d1_over_r,
                }
            }
            Self::UserTable { points, values } => {
                let spline = NaturalSpline::new(points, values);
                let (value, d1, d2) = spline.eval(x[0]);
                PointEval {
                    value,
                    grad: [d1, 0.0],
                    laplacian: d2,
                }
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Self::Zero => true,
            Self::GaussianWell { amplitude, .. } | Self::CosineBump { amplitude, .. } => {
                *amplitude == 0.0
            }
            Self::UserTable { values, .. } => values.iter().all(|&v| v == 0.0),
        }
    }
}

/// Natural cubic spline; returns value, first and second derivative.
struct NaturalSpline<'a> {
    x: &'a [f64],
    y: &'a [f64],
    m: Vec<f64>,
}

impl<'a> NaturalSpline<'a> {
    fn new(x: &'a [f64], y: &'a [f64]) -> Self {
        let n = x.len();
        let mut m = vec![0.0; n];
        if n > 2 {
            let k = n - 2;
            let mut lower = vec![0.0; k];
            let mut diag = vec![0.0; k];
            let mut upper = vec![0.0; k];
            let mut rhs = vec![0.0; k];
            for i in 1..n - 1 {
                let h0 = x[i] - x[i - 1];
                let h1 = x[i + 1] - x[i];
                lower[i - 1] = h0;
                diag[i - 1] = 2.0 * (h0 + h1);
                upper[i - 1] = h1;
                rhs[i - 1] = 6.0 * ((y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0);
            }
            tridiag::solve_in_place(&lower, &diag, &upper, &mut rhs)
                .expect("spline system is diagonally dominant");
            m[1..n - 1].copy_from_slice(&rhs);
        }
        Self { x, y, m }
    }

    fn eval(&self, t: f64) -> (f64, f64, f64) {
        let n = self.x.len();
        if t <= self.x[0] {
            return (self.y[0], 0.0, 0.0);
        }
        if t >= self.x[n - 1] {
            return (self.y[n - 1], 0.0, 0.0);
        }
        let i = self
            .x
            .partition_point(|&p| p <= t)
            .saturating_sub(1)
            .min(n - 2);
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - t) / h;
        let b = (t - self.x[i]) / h;
        let (m0, m1) = (self.m[i], self.m[i + 1]);
        let value = a * self.y[i]
            + b * self.y[i + 1]
            + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / 6.0;
        let d1 = (self.y[i + 1] - self.y[i]) / h - (3.0 * a * a - 1.0) * h * m0 / 6.0
            + (3.0 * b * b - 1.0) * h * m1 / 6.0;
        let d2 = a * m0 + b * m1;
        (value, d1, d2)
    }
}

/// Isotropic Gaussian mixture with weights normalised to one.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GaussianMixture {
    weights: Vec<f64>,
    means: Vec<Vec<f64>>,
    stds: Vec<f64>,
}

impl GaussianMixture {
    pub fn new(
        weights: Vec<f64>,
        means: Vec<Vec<f64>>,
        stds: Vec<f64>,
    ) -> Result<Self, ProblemError> {
        if weights.is_empty() || weights.len() != means.len() || weights.len() != stds.len() {
            return Err(ProblemError::invalid(
                "m0",
                "weights, means and stds must be non-empty and of equal length",
            ));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(ProblemError::invalid(
                "m0.weights",
                "must be finite and >= 0",
            ));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(ProblemError::invalid("m0.weights", "must not all vanish"));
        }
        if stds.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(ProblemError::invalid("m0.stds", "must be finite and > 0"));
        }
        let dim = means[0].len();
        if means
            .iter()
            .any(|m| m.len() != dim || m.iter().any(|v| !v.is_finite()))
        {
            return Err(ProblemError::invalid(
                "m0.means",
                "inconsistent or non-finite",
            ));
        }
        Ok(Self {
            weights: weights.iter().map(|w| w / total).collect(),
            means,
            stds,
        })
    }

    pub fn standard(dim: usize) -> Self {
        Self::gaussian(vec![0.0; dim], 1.0)
    }

    pub fn gaussian(mean: Vec<f64>, std: f64) -> Self {
        Self::new(vec![1.0], vec![mean], vec![std]).expect("valid single Gaussian")
    }

    pub fn dim(&self) -> usize {
        self.means[0].len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn means(&self) -> &[Vec<f64>] {
        &self.means
    }

    pub fn stds(&self) -> &[f64] {
        &self.stds
    }

    /// Same mixture translated by `shift`.
    pub fn translated(&self, shift: &[f64]) -> Self {
        Self {
            weights: self.weights.clone(),
            means: self
                .means
                .iter()
                .map(|m| m.iter().zip(shift).map(|(a, b)| a + b).collect())
                .collect(),
            stds: self.stds.clone(),
        }
    }

    /// Density and analytic gradient at `x`.
    pub fn eval(&self, x: &[f64]) -> (f64, [f64; 2]) {
        let n = x.len() as f64;
        let mut value = 0.0;
        let mut grad = [0.0; 2];
        for ((w, mean), s) in self.weights.iter().zip(&self.means).zip(&self.stds) {
            let (d, r2) = offset(x, mean);
            let s2 = s * s;
            let g = w * (2.0 * PI * s2).powf(-n / 2.0) * (-r2 / (2.0 * s2)).exp();
            value += g;
            grad[0] -= d[0] / s2 * g;
            grad[1] -= d[1] / s2 * g;
        }
        (value, grad)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum TerminalCost {
    #[default]
    Zero,
    /// `c log(1 + |x - x0|²)`.
    LogQuadratic { scale: f64, center: Vec<f64> },
}

impl TerminalCost {
    pub fn validate(&self, dim: usize) -> Result<(), ProblemError> {
        match self {
            Self::Zero => Ok(()),
            Self::LogQuadratic { scale, center } => {
                if !scale.is_finite() {
                    return Err(ProblemError::invalid("terminal.scale", "must be finite"));
                }
                if center.len() != dim {
                    return Err(ProblemError::invalid(
                        "terminal.center",
                        format!("needs {dim} component(s)"),
                    ));
                }
                Ok(())
            }
        }
    }

    pub fn eval(&self, x: &[f64]) -> PointEval {
        match self {
            Self::Zero => PointEval::default(),
            Self::LogQuadratic { scale, center } => {
                let (d, r2) = offset(x, center);
                let n = x.len() as f64;
                let q = 1.0 + r2;
                PointEval {
                    value: scale * q.ln(),
                    grad: [2.0 * scale * d[0] / q, 2.0 * scale * d[1] / q],
                    laplacian: scale * (2.0 * n / q - 4.0 * r2 / (q * q)),
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DataSpec {
    pub m0: GaussianMixture,
    pub terminal: TerminalCost,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProblemSpec {
    pub dim: usize,
    pub horizon: f64,
    pub coupling: CouplingSpec,
    pub potential: PotentialSpec,
    pub data: DataSpec,
}

impl ProblemSpec {
    pub fn validate(&self) -> Result<(), ProblemError> {
        if !(self.dim == 1 || self.dim == 2) {
            return Err(ProblemError::invalid("dim", "must be 1 or 2"));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(ProblemError::invalid("horizon", "must be > 0"));
        }
        CouplingSpec::new(self.coupling.sigma, self.coupling.alpha)?;
        self.potential.validate(self.dim)?;
        self.data.terminal.validate(self.dim)?;
        if self.data.m0.dim() != self.dim {
            return Err(ProblemError::invalid("m0.means", "dimension mismatch"));
        }
        Ok(())
    }

    /// Decoupled 1D model problem: standard Gaussian, `V ≡ 0`, `u_T ≡ 0`.
    pub fn gaussian_1d(sigma: f64, alpha: f64, horizon: f64) -> Self {
        Self {
            dim: 1,
            horizon,
            coupling: CouplingSpec { sigma, alpha },
            potential: PotentialSpec::Zero,
            data: DataSpec {
                m0: GaussianMixture::standard(1),
                terminal: TerminalCost::Zero,
            },
        }
    }

    pub fn with_sigma(&self, sigma: f64) -> Self {
        let mut p = self.clone();
        p.coupling.sigma = sigma;
        p
    }

    pub fn with_horizon(&self, horizon: f64) -> Self {
        let mut p = self.clone();
        p.horizon = horizon;
        p
    }

    fn ensure_grid(&self, grid: &Grid) -> Result<(), ProblemError> {
        if grid.dim() != self.dim {
            return Err(ProblemError::Configuration(format!(
                "grid dimension {} does not match problem dimension {}",
                grid.dim(),
                self.dim
            )));
        }
        Ok(())
    }
}

/// Closed forms sampled on the grid nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledProblem {
    /// Initial density, rescaled to unit trapezoid mass.
    pub m0: Vec<f64>,
    pub m0_grad: VectorField,
    /// Trapezoid mass of the raw sample before rescaling.
    pub raw_mass: f64,
    pub u_terminal: Vec<f64>,
    pub u_terminal_grad: VectorField,
    pub v: Vec<f64>,
    pub v_grad: VectorField,
    pub v_laplacian: Vec<f64>,
}

impl SampledProblem {
    pub fn v_min(&self) -> f64 {
        self.v.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn v_max(&self) -> f64 {
        self.v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

pub fn sample_on_grid(p: &ProblemSpec, grid: &Grid) -> Result<SampledProblem, ProblemError> {
    p.validate()?;
    p.ensure_grid(grid)?;
    let nodes = grid.n_nodes();
    let dim = grid.dim();
    let mut m0 = Vec::with_capacity(nodes);
    let mut m0_grad = vec![Vec::with_capacity(nodes); dim];
    let mut u_terminal = Vec::with_capacity(nodes);
    let mut u_terminal_grad = vec![Vec::with_capacity(nodes); dim];
    let mut v = Vec::with_capacity(nodes);
    let mut v_grad = vec![Vec::with_capacity(nodes); dim];
    let mut v_laplacian = Vec::with_capacity(nodes);
    for k in 0..nodes {
        let x = &grid.point(k)[..dim];
        let (d, dg) = p.data.m0.eval(x);
        m0.push(d);
        let ut = p.data.terminal.eval(x);
        u_terminal.push(ut.value);
        let pv = p.potential.eval(x);
        v.push(pv.value);
        v_laplacian.push(pv.laplacian);
        for a in 0..dim {
            m0_grad[a].push(dg[a]);
            u_terminal_grad[a].push(ut.grad[a]);
            v_grad[a].push(pv.grad[a]);
        }
    }
    let raw_mass = crate::ops::integrate(&m0, grid, crate::ops::Weight::One);
    if !(raw_mass > 0.0) {
        return Err(ProblemError::Configuration(
            "initial density has no mass on the truncated domain".into(),
        ));
    }
    let scale = 1.0 / raw_mass;
    m0.iter_mut().for_each(|v| *v *= scale);
    m0_grad.iter_mut().flatten().for_each(|v| *v *= scale);
    Ok(SampledProblem {
        m0,
        m0_grad,
        raw_mass,
        u_terminal,
        u_terminal_grad,
        v,
        v_grad,
        v_laplacian,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Condition {
    pub holds: bool,
    /// Worst-case value of the quantity required to be nonnegative.
    pub margin: f64,
}

impl Condition {
    fn from_margin(margin: f64) -> Self {
        Self {
            holds: margin >= -CONDITION_TOLERANCE,
            margin,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConditionReport {
    /// `N f(m) m - (N+2) F(m) ≥ 0`; margin is the coefficient of `m^(α+1)`.
    pub coupling_scaling: Condition,
    /// `2(V - inf V) + ∇V·x ≥ 0` on the nodes.
    pub potential: Condition,
    /// `∇u_T·x ≥ 0` on the nodes.
    pub terminal: Condition,
    /// Unit mass and nonnegativity of `m0`; margin is `-|mass - 1|`.
    pub initial_mass: Condition,
}

impl ConditionReport {
    pub fn all_hold(&self) -> bool {
        self.coupling_scaling.holds
            && self.potential.holds
            && self.terminal.holds
            && self.initial_mass.holds
    }
}

pub fn check_structural_conditions(
    p: &ProblemSpec,
    grid: &Grid,
) -> Result<ConditionReport, ProblemError> {
    let sampled = sample_on_grid(p, grid)?;
    Ok(conditions_from_samples(p, grid, &sampled))
}

pub(crate) fn conditions_from_samples(
    p: &ProblemSpec,
    grid: &Grid,
    s: &SampledProblem,
) -> ConditionReport {
    let n = grid.dim();
    let coupling_scaling = {
        let margin = p.coupling.scaling_margin(n);
        let holds = p.coupling.sigma == 0.0 || p.coupling.alpha >= 2.0 / n as f64 - 1e-12;
        Condition { holds, margin }
    };
    let v_min = s.v_min();
    let mut pot = f64::INFINITY;
    let mut term = f64::INFINITY;
    for k in 0..grid.n_nodes() {
        let x = grid.point(k);
        let mut gv = 0.0;
        let mut gu = 0.0;
        for (a, xa) in x.iter().take(n).enumerate() {
            gv += s.v_grad[a][k] * xa;
            gu += s.u_terminal_grad[a][k] * xa;
        }
        pot = pot.min(2.0 * (s.v[k] - v_min) + gv);
        term = term.min(gu);
    }
    let mass = crate::ops::integrate(&s.m0, grid, crate::ops::Weight::One);
    let nonneg = s.m0.iter().all(|&v| v >= 0.0);
    let mass_margin = -(mass - 1.0).abs();
    ConditionReport {
        coupling_scaling,
        potential: Condition::from_margin(pot),
        terminal: Condition::from_margin(term),
        initial_mass: Condition {
            holds: nonneg && mass_margin >= -MASS_TOLERANCE,
            margin: mass_margin,
        },
    }
}

/// Pointwise sign conditions for the system translated by `y`:
/// `2(V(x+y) - inf V) + ∇V(x+y)·x ≥ 0` and `∇u_T(x+y)·x ≥ 0` at every node
/// `x` with `x + y` inside the domain. Returns the two worst margins.
pub fn translated_margins(p: &ProblemSpec, grid: &Grid, v_min: f64, y: &[f64]) -> (f64, f64) {
    let n = grid.dim();
    let l = grid.half_width();
    let mut pot = f64::INFINITY;
    let mut term = f64::INFINITY;
    let mut shifted = [0.0; 2];
    for k in 0..grid.n_nodes() {
        let x = grid.point(k);
        let mut inside = true;
        for a in 0..n {
            shifted[a] = x[a] + y[a];
            inside &= shifted[a].abs() <= l;
        }
        if !inside {
            continue;
        }
        let pv = p.potential.eval(&shifted[..n]);
        let ut = p.data.terminal.eval(&shifted[..n]);
        let mut gv = 0.0;
        let mut gu = 0.0;
        for (a, xa) in x.iter().take(n).enumerate() {
            gv += pv.grad[a] * xa;
            gu += ut.grad[a] * xa;
        }
        pot = pot.min(2.0 * (pv.value - v_min) + gv);
        term = term.min(gu);
    }
    (pot, term)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coupling_values_by_substitution() {
        let c = CouplingSpec::new(1.0, 2.0).unwrap();
        let v = c.eval(2.0).unwrap();
        assert_eq!((v.f, v.f_prime), (4.0, 4.0));
        assert!((v.big_f - 8.0 / 3.0).abs() < 1e-15);

        let v = CouplingSpec::new(3.0, 2.0).unwrap().eval(0.0).unwrap();
        assert_eq!((v.f, v.big_f, v.f_prime), (0.0, 0.0, 0.0));

        let v = CouplingSpec::new(2.0, 3.0).unwrap().eval(1.0).unwrap();
        assert_eq!((v.f, v.big_f, v.f_prime), (2.0, 0.5, 6.0));
    }

    #[test]
    fn negative_density_is_a_domain_error() {
        let c = CouplingSpec::new(1.0, 2.0).unwrap();
        assert_eq!(c.eval(-0.1), Err(ProblemError::NegativeDensity(-0.1)));
        assert!(CouplingSpec::new(-1.0, 2.0).is_err());
        assert!(CouplingSpec::new(1.0, 0.0).is_err());
    }

    #[test]
    fn scaling_margin_vanishes_at_critical_exponent() {
        let c = CouplingSpec::new(1.0, 2.0).unwrap();
        assert_eq!(c.scaling_margin(1), 0.0);
        assert!(c.scaling_margin(2) > 0.0);
        assert!(CouplingSpec::new(1.0, 1.5).unwrap().scaling_margin(1) < 0.0);
    }

    #[test]
    fn gaussian_well_derivatives_match_differences() {
        let v = PotentialSpec::GaussianWell {
            amplitude: 1.3,
            width: 0.7,
            center: vec![0.2, -0.1],
        };
        check_fd(&v, &[0.4, 0.3]);
        let b = PotentialSpec::CosineBump {
            amplitude: 0.8,
            width: 2.0,
            center: vec![0.0, 0.0],
        };
        check_fd(&b, &[0.5, -0.6]);
    }

    fn check_fd(v: &PotentialSpec, x: &[f64]) {
        let h = 1e-4;
        let e = v.eval(x);
        let mut lap = 0.0;
        for a in 0..2 {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[a] += h;
            xm[a] -= h;
            let (vp, vm) = (v.eval(&xp).value, v.eval(&xm).value);
            assert!((e.grad[a] - (vp - vm) / (2.0 * h)).abs() < 1e-6);
            lap += (vp - 2.0 * e.value + vm) / (h * h);
        }
        assert!(
            (e.laplacian - lap).abs() < 1e-4,
            "{} vs {}",
            e.laplacian,
            lap
        );
    }

    #[test]
    fn cosine_bump_centre_laplacian_is_finite() {
        let b = PotentialSpec::CosineBump {
            amplitude: 1.0,
            width: 1.0,
            center: vec![0.0],
        };
        let e = b.eval(&[0.0]);
        assert!((e.laplacian + 0.5 * PI * PI).abs() < 1e-12);
    }

    #[test]
    fn spline_reproduces_cubic_free_line() {
        let v = PotentialSpec::UserTable {
            points: vec![-1.0, 0.0, 1.0, 2.0],
            values: vec![-2.0, 0.0, 2.0, 4.0],
        };
        let e = v.eval(&[0.5]);
        assert!((e.value - 1.0).abs() < 1e-12);
        assert!((e.grad[0] - 2.0).abs() < 1e-12);
        assert!(e.laplacian.abs() < 1e-12);
    }

    #[test]
    fn renormalised_mass_is_one() {
        let p = ProblemSpec::gaussian_1d(0.0, 2.0, 1.0);
        let g = Grid::new(1, 10.0, 101, 1, 1.0).unwrap();
        let s = sample_on_grid(&p, &g).unwrap();
        let mass = crate::ops::integrate(&s.m0, &g, crate::ops::Weight::One);
        assert!((mass - 1.0).abs() < 1e-15);
    }

    #[test]
    fn log_terminal_cost_satisfies_sign_condition() {
        let mut p = ProblemSpec::gaussian_1d(1.0, 2.0, 1.0);
        p.data.terminal = TerminalCost::LogQuadratic {
            scale: 1.0,
            center: vec![0.0],
        };
        let g = Grid::new(1, 10.0, 201, 1, 1.0).unwrap();
        let r = check_structural_conditions(&p, &g).unwrap();
        assert!(r.terminal.holds);
        assert_eq!(r.terminal.margin, 0.0);
        assert!(r.potential.holds && r.potential.margin == 0.0);
        assert!(r.coupling_scaling.holds && r.coupling_scaling.margin == 0.0);
        assert!(r.all_hold());
    }
}
