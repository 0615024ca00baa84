//! Heat-kernel reference tools: discrete convolution with the sampled Gaussian
//! kernel `G(x,t) = (4πt)^{-N/2} e^{-|x|²/4t}` and space-time Lebesgue norms of
//! `G` and `∇G` with their power-law exponents in `t`.
//!
//! `‖G‖_{L^q(ℝᴺ×(0,t))} ∝ t^β` with `β = N/(2q) − N/2 + 1/q`, and
//! `‖∇G‖_{L^r} ∝ t^β` with `β = N/(2r) − (N+1)/2 + 1/r`. The norm is finite
//! only for `β > 0`. Over a window `(t·10^{-K}, t)` the norm scales exactly
//! as `t^β` for every exponent, which is what [`heat_kernel_window_norm`]
//! measures.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::ParabolicError;
use crate::grid::Grid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelNorm {
    Kernel,
    Gradient,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HeatKernelQuery {
    pub dim: usize,
    pub exponent: f64,
    pub time: f64,
    pub kind: KernelNorm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormFit {
    pub value: f64,
    pub fitted_exponent: f64,
    pub analytic_exponent: f64,
}

const RADIAL_INTERVALS: usize = 400;
const TIME_INTERVALS_PER_UNIT: f64 = 48.0;
const FIT_POINTS: usize = 11;

impl HeatKernelQuery {
    pub fn new(
        dim: usize,
        exponent: f64,
        time: f64,
        kind: KernelNorm,
    ) -> Result<Self, ParabolicError> {
        if !(dim == 1 || dim == 2) {
            return Err(ParabolicError::Domain(format!(
                "dimension {dim} unsupported"
            )));
        }
        if !(exponent >= 1.0 && exponent.is_finite()) {
            return Err(ParabolicError::Domain(format!(
                "exponent {exponent} must be ≥ 1"
            )));
        }
        if !(time > 0.0 && time.is_finite()) {
            return Err(ParabolicError::Domain(format!("time {time} must be > 0")));
        }
        Ok(Self {
            dim,
            exponent,
            time,
            kind,
        })
    }

    pub fn analytic_exponent(&self) -> f64 {
        let n = self.dim as f64;
        let q = self.exponent;
        match self.kind {
            KernelNorm::Kernel => n / (2.0 * q) - n / 2.0 + 1.0 / q,
            KernelNorm::Gradient => n / (2.0 * q) - (n + 1.0) / 2.0 + 1.0 / q,
        }
    }

    fn at_time(&self, time: f64) -> Self {
        Self { time, ..*self }
    }
}

fn simpson(n: usize, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let c = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += c * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

/// `∫ |G(x,s)|^q dx` (or `|∇G|^q`) by radial quadrature.
fn spatial_power_integral(q: &HeatKernelQuery, s: f64) -> f64 {
    let n = q.dim as i32;
    let p = q.exponent;
    let sphere = if q.dim == 1 { 2.0 } else { 2.0 * PI };
    let amp = (4.0 * PI * s).powf(-(n as f64) / 2.0);
    // e^{-p r²/4s} < e^{-60} beyond this radius
    let r_max = (240.0 * s / p).sqrt();
    let integrand = |r: f64| {
        let g = amp * (-r * r / (4.0 * s)).exp();
        let v = match q.kind {
            KernelNorm::Kernel => g,
            KernelNorm::Gradient => r / (2.0 * s) * g,
        };
        sphere * r.powi(n - 1) * v.powf(p)
    };
    simpson(RADIAL_INTERVALS, 0.0, r_max, integrand)
}

/// `∫_{t e^{-τ_max}}^{t} ‖·(s)‖_q^q ds` with `s = t e^{-τ}`.
fn time_integral(q: &HeatKernelQuery, tau_max: f64) -> f64 {
    let t = q.time;
    let intervals = ((tau_max * TIME_INTERVALS_PER_UNIT) as usize).max(200);
    simpson(intervals, 0.0, tau_max, |tau| {
        let s = t * (-tau).exp();
        spatial_power_integral(q, s) * s
    })
}

fn loglog_slope(ts: &[f64], values: &[f64]) -> f64 {
    let xs: Vec<f64> = ts.iter().map(|t| t.ln()).collect();
    let ys: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Log-spaced times spanning one decade centred (geometrically) on `t`.
fn fit_times(t: f64) -> Vec<f64> {
    let lo = t / 10f64.sqrt();
    (0..FIT_POINTS)
        .map(|i| lo * 10f64.powf(i as f64 / (FIT_POINTS - 1) as f64))
        .collect()
}

/// Space-time `L^q` norm over `ℝᴺ × (0, t)` and its fitted exponent in `t`.
pub fn heat_kernel_spacetime_norm(q: &HeatKernelQuery) -> Result<NormFit, ParabolicError> {
    let beta = q.analytic_exponent();
    if beta <= 1e-12 {
        return Err(ParabolicError::NonIntegrable {
            analytic_exponent: beta,
        });
    }
    // integrand decays like e^{-qβτ}; stop once it is below e^{-45}
    let tau_max = (45.0 / (q.exponent * beta)).min(4000.0);
    let norm = |query: &HeatKernelQuery| time_integral(query, tau_max).powf(1.0 / query.exponent);
    let ts = fit_times(q.time);
    let values: Vec<f64> = ts.iter().map(|&t| norm(&q.at_time(t))).collect();
    Ok(NormFit {
        value: norm(q),
        fitted_exponent: loglog_slope(&ts, &values),
        analytic_exponent: beta,
    })
}

/// Space-time `L^q` norm over `ℝᴺ × (t·10^{-decades}, t)`. Finite for every
/// exponent; by parabolic scaling it grows exactly like `t^β`, including the
/// non-integrable cases `β ≤ 0`.
pub fn heat_kernel_window_norm(
    q: &HeatKernelQuery,
    decades: f64,
) -> Result<NormFit, ParabolicError> {
    if !(decades > 0.0 && decades.is_finite()) {
        return Err(ParabolicError::Domain(format!(
            "window of {decades} decades"
        )));
    }
    let tau_max = decades * 10f64.ln();
    let norm = |query: &HeatKernelQuery| time_integral(query, tau_max).powf(1.0 / query.exponent);
    let ts = fit_times(q.time);
    let values: Vec<f64> = ts.iter().map(|&t| norm(&q.at_time(t))).collect();
    Ok(NormFit {
        value: norm(q),
        fitted_exponent: loglog_slope(&ts, &values),
        analytic_exponent: q.analytic_exponent(),
    })
}

/// Convolution of `initial` with the heat kernel at time `t`. Each source
/// column of the sampled kernel is rescaled to unit trapezoid mass, so total
/// mass is preserved exactly on the truncated domain.
pub fn heat_kernel_convolve(
    initial: &[f64],
    t: f64,
    grid: &Grid,
) -> Result<Vec<f64>, ParabolicError> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(ParabolicError::Domain(format!(
            "convolution time {t} must be > 0"
        )));
    }
    if initial.len() != grid.n_nodes() {
        return Err(ParabolicError::ShapeMismatch);
    }
    let nx = grid.nx();
    let vol = grid.axis_volumes();
    let xs = grid.coords();
    // kernel[i][j]: contribution of source j to target i, columns normalised
    let mut kernel = vec![vec![0.0; nx]; nx];
    for j in 0..nx {
        let mut mass = 0.0;
        for i in 0..nx {
            let d = xs[i] - xs[j];
            let g = (-d * d / (4.0 * t)).exp();
            kernel[i][j] = g;
            mass += vol[i] * g;
        }
        for row in kernel.iter_mut() {
            row[j] /= mass;
        }
    }
    let mut current = initial.to_vec();
    for axis in 0..grid.dim() {
        let mut out = vec![0.0; current.len()];
        for line in grid.lines(axis) {
            for i in 0..nx {
                let mut acc = 0.0;
                for j in 0..nx {
                    acc += kernel[i][j] * vol[j] * current[line.node(j)];
                }
                out[line.node(i)] = acc;
            }
        }
        current = out;
    }
    Ok(current)
}
