//! Linear parabolic solvers composing the fixed-point map:
//!
//! * backward heat equation with zeroth-order term, `-w_t - Δw = c w`,
//!   marched from `w(T)` down to `t = 0`;
//! * forward Fokker-Planck equation `μ_t = Δμ - div(bμ)`, marched from `μ(0)`.
//!
//! Both use a θ-scheme (implicit Euler by default) with one tridiagonal solve
//! per line and step; 2D uses Lie splitting, x-sweep then y-sweep. The
//! Fokker-Planck fluxes are exponentially fitted, which keeps the implicit
//! matrix an M-matrix (positivity) whose weighted column sums vanish (mass).

use serde::{Deserialize, Serialize};

use crate::error::ParabolicError;
use crate::grid::{Grid, Line, SpaceTimeField};
use crate::ops::{fitted_face_coefficients, gradient, FaceDrift};
use crate::tridiag;

/// Densities below this are treated as a broken scheme rather than round-off.
pub const NEGATIVITY_TOLERANCE: f64 = -1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeScheme {
    #[default]
    ImplicitEuler,
    CrankNicolson,
}

impl TimeScheme {
    pub fn theta(self) -> f64 {
        match self {
            Self::ImplicitEuler => 1.0,
            Self::CrankNicolson => 0.5,
        }
    }
}

/// `-w_t - Δw = c(x,t) w`, `w(T) = terminal`.
#[derive(Debug, Clone)]
pub struct BackwardHeatProblem {
    pub coefficient: SpaceTimeField,
    pub terminal: Vec<f64>,
}

/// Where the Fokker-Planck drift comes from at each time level.
#[derive(Debug, Clone, Copy)]
pub enum DriftSource<'a> {
    Zero,
    /// Spatially constant drift, one component per axis.
    Constant(&'a [f64]),
    /// `b = scale ∇(log w)`, differenced across faces.
    LogGradient {
        w: &'a SpaceTimeField,
        scale: f64,
    },
    /// `b = scale ∇φ` from central nodal gradients averaged onto faces.
    GradientOf {
        field: &'a SpaceTimeField,
        scale: f64,
    },
    /// Explicit face drifts for every time level.
    Faces(&'a [FaceDrift]),
}

impl DriftSource<'_> {
    fn at(&self, n: usize, grid: &Grid) -> FaceDrift {
        match *self {
            Self::Zero => FaceDrift::zeros(grid),
            Self::Constant(b) => FaceDrift::constant(grid, b),
            Self::LogGradient { w, scale } => FaceDrift::from_log_gradient(w.slice(n), scale, grid),
            Self::GradientOf { field, scale } => {
                let mut g = gradient(field.slice(n), grid);
                g.iter_mut().flatten().for_each(|v| *v *= scale);
                FaceDrift::from_nodal(&g, grid)
            }
            Self::Faces(f) => f[n].clone(),
        }
    }
}

/// `μ_t = Δμ - div(bμ)`, `μ(0) = initial`.
#[derive(Debug, Clone)]
pub struct FokkerPlanckProblem<'a> {
    pub drift: DriftSource<'a>,
    pub initial: Vec<f64>,
}

fn gather(values: &[f64], line: &Line, n: usize) -> Vec<f64> {
    (0..n).map(|s| values[line.node(s)]).collect()
}

fn scatter(values: &mut [f64], line: &Line, data: &[f64]) {
    for (s, v) in data.iter().enumerate() {
        values[line.node(s)] = *v;
    }
}

/// Applies `(Δ + c)` along one line with Neumann reflection.
fn apply_diffusion_line(u: &[f64], c: Option<&[f64]>, inv_dx2: f64) -> Vec<f64> {
    let n = u.len();
    (0..n)
        .map(|s| {
            let lap = if s == 0 {
                2.0 * (u[1] - u[0])
            } else if s == n - 1 {
                2.0 * (u[n - 2] - u[n - 1])
            } else {
                u[s - 1] - 2.0 * u[s] + u[s + 1]
            } * inv_dx2;
            lap + c.map_or(0.0, |c| c[s] * u[s])
        })
        .collect()
}

/// One θ-step of `-w_t = (Δ + c) w` along a line, going backward in time.
fn backward_line_step(
    next: &[f64],
    c_now: Option<&[f64]>,
    c_next: Option<&[f64]>,
    dt: f64,
    theta: f64,
    dx: f64,
) -> Option<Vec<f64>> {
    let n = next.len();
    let inv_dx2 = 1.0 / (dx * dx);
    let mut rhs = next.to_vec();
    if theta < 1.0 {
        let op = apply_diffusion_line(next, c_next, inv_dx2);
        for (r, o) in rhs.iter_mut().zip(op) {
            *r += (1.0 - theta) * dt * o;
        }
    }
    let k = theta * dt * inv_dx2;
    let mut lower = vec![-k; n];
    let mut upper = vec![-k; n];
    let mut diag = vec![1.0 + 2.0 * k; n];
    upper[0] = -2.0 * k;
    lower[n - 1] = -2.0 * k;
    if let Some(c) = c_now {
        for (d, ci) in diag.iter_mut().zip(c) {
            *d -= theta * dt * ci;
        }
    }
    tridiag::solve_in_place(&lower, &diag, &upper, &mut rhs)?;
    Some(rhs)
}

pub fn solve_backward_heat(
    p: &BackwardHeatProblem,
    grid: &Grid,
    scheme: TimeScheme,
) -> Result<SpaceTimeField, ParabolicError> {
    let nodes = grid.n_nodes();
    if p.terminal.len() != nodes || p.coefficient.grid() != grid {
        return Err(ParabolicError::ShapeMismatch);
    }
    if p.terminal.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(ParabolicError::NonPositiveTerminal);
    }
    let (dt, dx, theta) = (grid.dt(), grid.dx(), scheme.theta());
    let nx = grid.nx();
    let mut w = SpaceTimeField::zeros(*grid);
    w.slice_mut(grid.nt()).copy_from_slice(&p.terminal);
    let last_axis = grid.dim() - 1;
    for n in (0..grid.nt()).rev() {
        let mut current = w.slice(n + 1).to_vec();
        let c_now = p.coefficient.slice(n);
        let c_next = p.coefficient.slice(n + 1);
        for axis in 0..grid.dim() {
            let with_c = axis == last_axis;
            let mut out = current.clone();
            for line in grid.lines(axis) {
                let next = gather(&current, &line, nx);
                let (cn, cx) = if with_c {
                    (
                        Some(gather(c_now, &line, nx)),
                        Some(gather(c_next, &line, nx)),
                    )
                } else {
                    (None, None)
                };
                let solved = backward_line_step(&next, cn.as_deref(), cx.as_deref(), dt, theta, dx)
                    .ok_or(ParabolicError::Singular { step: n })?;
                scatter(&mut out, &line, &solved);
            }
            current = out;
        }
        if let Some(&bad) = current.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
            return Err(ParabolicError::PositivityViolation {
                step: n,
                value: bad,
            });
        }
        w.slice_mut(n).copy_from_slice(&current);
    }
    Ok(w)
}

/// Applies the fitted flux divergence `A μ = div J` along one line.
fn apply_fp_line(mu: &[f64], coeffs: &[(f64, f64)], vol: &[f64]) -> Vec<f64> {
    let n = mu.len();
    let flux: Vec<f64> = coeffs
        .iter()
        .enumerate()
        .map(|(f, (l, r))| l * mu[f] - r * mu[f + 1])
        .collect();
    (0..n)
        .map(|s| {
            let out = if s + 1 < n { flux[s] } else { 0.0 };
            let inn = if s > 0 { flux[s - 1] } else { 0.0 };
            (out - inn) / vol[s]
        })
        .collect()
}

fn forward_line_step(
    prev: &[f64],
    coeffs_now: &[(f64, f64)],
    coeffs_prev: &[(f64, f64)],
    vol: &[f64],
    dt: f64,
    theta: f64,
) -> Option<Vec<f64>> {
    let n = prev.len();
    let mut rhs = prev.to_vec();
    if theta < 1.0 {
        let op = apply_fp_line(prev, coeffs_prev, vol);
        for (r, o) in rhs.iter_mut().zip(op) {
            *r -= (1.0 - theta) * dt * o;
        }
    }
    let k = theta * dt;
    let mut lower = vec![0.0; n];
    let mut upper = vec![0.0; n];
    let mut diag = vec![1.0; n];
    for s in 0..n {
        let mut d = 0.0;
        if s + 1 < n {
            let (l, r) = coeffs_now[s];
            d += l;
            upper[s] = -k * r / vol[s];
        }
        if s > 0 {
            let (l, r) = coeffs_now[s - 1];
            d += r;
            lower[s] = -k * l / vol[s];
        }
        diag[s] += k * d / vol[s];
    }
    tridiag::solve_in_place(&lower, &diag, &upper, &mut rhs)?;
    Some(rhs)
}

pub fn solve_fokker_planck(
    p: &FokkerPlanckProblem<'_>,
    grid: &Grid,
    scheme: TimeScheme,
) -> Result<SpaceTimeField, ParabolicError> {
    let nodes = grid.n_nodes();
    if p.initial.len() != nodes {
        return Err(ParabolicError::ShapeMismatch);
    }
    if p.initial.iter().any(|&v| !(v >= 0.0 && v.is_finite())) {
        return Err(ParabolicError::NegativeInitialDensity);
    }
    let (dt, dx, theta) = (grid.dt(), grid.dx(), scheme.theta());
    let nx = grid.nx();
    let vol = grid.axis_volumes();
    let mut mu = SpaceTimeField::zeros(*grid);
    mu.slice_mut(0).copy_from_slice(&p.initial);
    let mut drift_prev = p.drift.at(0, grid);
    for n in 1..=grid.nt() {
        let drift_now = p.drift.at(n, grid);
        if !drift_now.is_finite() {
            return Err(ParabolicError::Domain(format!(
                "non-finite drift at time level {n}"
            )));
        }
        let mut current = mu.slice(n - 1).to_vec();
        for axis in 0..grid.dim() {
            let mut out = current.clone();
            for (li, line) in grid.lines(axis).iter().enumerate() {
                let prev = gather(&current, line, nx);
                let c_now = fitted_face_coefficients(&drift_now.axis(axis)[li], dx);
                let c_prev = if theta < 1.0 {
                    fitted_face_coefficients(&drift_prev.axis(axis)[li], dx)
                } else {
                    Vec::new()
                };
                let solved = forward_line_step(&prev, &c_now, &c_prev, &vol, dt, theta)
                    .ok_or(ParabolicError::Singular { step: n })?;
                scatter(&mut out, line, &solved);
            }
            current = out;
        }
        if let Some(&bad) = current
            .iter()
            .find(|v| !(**v >= NEGATIVITY_TOLERANCE && v.is_finite()))
        {
            return Err(ParabolicError::SchemeViolation {
                step: n,
                value: bad,
            });
        }
        mu.slice_mut(n).copy_from_slice(&current);
        drift_prev = drift_now;
    }
    Ok(mu)
}

/// Drift-free heat flow of `initial`.
pub fn heat_flow(
    initial: &[f64],
    grid: &Grid,
    scheme: TimeScheme,
) -> Result<SpaceTimeField, ParabolicError> {
    solve_fokker_planck(
        &FokkerPlanckProblem {
            drift: DriftSource::Zero,
            initial: initial.to_vec(),
        },
        grid,
        scheme,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ops::{integrate, Weight};

    fn gaussian(grid: &Grid, var: f64, mean: f64) -> Vec<f64> {
        let v: Vec<f64> = grid
            .coords()
            .iter()
            .map(|x| (-(x - mean).powi(2) / (2.0 * var)).exp())
            .collect();
        let m = integrate(&v, grid, Weight::One);
        v.into_iter().map(|a| a / m).collect()
    }

    #[test]
    fn constants_solve_homogeneous_backward_problem() {
        let g = Grid::new(1, 5.0, 21, 10, 1.0).unwrap();
        let p = BackwardHeatProblem {
            coefficient: SpaceTimeField::zeros(g),
            terminal: vec![1.0; 21],
        };
        let w = solve_backward_heat(&p, &g, TimeScheme::ImplicitEuler).unwrap();
        assert!(w.values().iter().all(|v| (v - 1.0).abs() < 1e-14));
    }

    #[test]
    fn rejects_nonpositive_terminal() {
        let g = Grid::new(1, 5.0, 5, 2, 1.0).unwrap();
        let p = BackwardHeatProblem {
            coefficient: SpaceTimeField::zeros(g),
            terminal: vec![1.0, 1.0, 0.0, 1.0, 1.0],
        };
        assert_eq!(
            solve_backward_heat(&p, &g, TimeScheme::ImplicitEuler),
            Err(ParabolicError::NonPositiveTerminal)
        );
    }

    #[test]
    fn large_coefficient_reports_positivity_loss() {
        let g = Grid::new(1, 5.0, 11, 2, 1.0).unwrap();
        let p = BackwardHeatProblem {
            coefficient: SpaceTimeField::constant(g, 10.0),
            terminal: vec![1.0; 11],
        };
        assert!(matches!(
            solve_backward_heat(&p, &g, TimeScheme::ImplicitEuler),
            Err(ParabolicError::PositivityViolation { .. })
        ));
    }

    #[test]
    fn fokker_planck_conserves_mass_with_strong_drift() {
        let g = Grid::new(1, 6.0, 61, 40, 1.0).unwrap();
        let mu0 = gaussian(&g, 0.5, 1.0);
        let b = [3.0];
        let mu = solve_fokker_planck(
            &FokkerPlanckProblem {
                drift: DriftSource::Constant(&b),
                initial: mu0,
            },
            &g,
            TimeScheme::ImplicitEuler,
        )
        .unwrap();
        for n in 0..=g.nt() {
            let m = integrate(mu.slice(n), &g, Weight::One);
            assert!((m - 1.0).abs() < 1e-13);
        }
        assert!(mu.min() >= 0.0);
    }

    #[test]
    fn constant_drift_translates_the_mean() {
        let g = Grid::new(1, 12.0, 481, 400, 1.0).unwrap();
        let kappa = 0.8;
        let mu = solve_fokker_planck(
            &FokkerPlanckProblem {
                drift: DriftSource::Constant(&[kappa]),
                initial: gaussian(&g, 1.0, 0.0),
            },
            &g,
            TimeScheme::CrankNicolson,
        )
        .unwrap();
        let x = g.coords();
        for n in [100, 400] {
            let mean = integrate(mu.slice(n), &g, Weight::Nodes(&x));
            let var = integrate(mu.slice(n), &g, Weight::SquaredX) - mean * mean;
            let t = g.time(n);
            assert!((mean - kappa * t).abs() < 1e-3, "mean {mean} at t = {t}");
            assert!((var - (1.0 + 2.0 * t)).abs() < 1e-3, "variance {var}");
        }
    }

    #[test]
    fn crank_nicolson_heat_flow_is_second_order_in_time() {
        // temporal error against a fine-step reference on the same mesh
        let final_slice = |nt: usize, scheme| {
            let g = Grid::new(1, 10.0, 201, nt, 1.0).unwrap();
            heat_flow(&gaussian(&g, 1.0, 0.0), &g, scheme)
                .unwrap()
                .slice(nt)
                .to_vec()
        };
        let reference = final_slice(2560, TimeScheme::CrankNicolson);
        let err = |nt: usize, scheme| {
            final_slice(nt, scheme)
                .iter()
                .zip(&reference)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        };
        let ie = err(20, TimeScheme::ImplicitEuler) / err(40, TimeScheme::ImplicitEuler);
        let cn = err(20, TimeScheme::CrankNicolson) / err(40, TimeScheme::CrankNicolson);
        assert!(ie > 1.7 && ie < 2.3, "implicit ratio {ie}");
        assert!(cn > 3.5, "CN ratio {cn}");
    }
}
