//! Damped Picard iteration on the map `m ↦ μ`.
//!
//! For a density trajectory `m`, solve `-w_t - Δw = ½(f(m) - V) w` backward
//! from `w(T) = e^{-u_T/2}`, then `μ_t = Δμ - div(bμ)` forward from `m0` with
//! `b = 2∇w/w`. A fixed point gives `u = -2 log w` solving the
//! Hamilton-Jacobi-Bellman equation and `m = μ` solving the Fokker-Planck
//! equation with drift `-∇u`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, HopfColeError, ParabolicError, ProblemError};
use crate::grid::{Grid, SpaceTimeField};
use crate::ops::{gradient, integrate, laplacian, Weight};
use crate::parabolic::{
    heat_flow, solve_backward_heat, solve_fokker_planck, BackwardHeatProblem, DriftSource,
    FokkerPlanckProblem, TimeScheme,
};
use crate::problem::{sample_on_grid, ProblemSpec, SampledProblem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialGuess {
    /// Drift-free heat flow of `m0`.
    #[default]
    HeatFlow,
    /// `m0` frozen at every time.
    Frozen,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub damping: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub d_cap: f64,
    pub time_scheme: TimeScheme,
    pub initial_guess: InitialGuess,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            damping: 1.0,
            tol: 1e-8,
            max_iter: 200,
            d_cap: 1e4,
            time_scheme: TimeScheme::ImplicitEuler,
            initial_guess: InitialGuess::HeatFlow,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), ProblemError> {
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(ProblemError::invalid("damping", "must lie in (0, 1]"));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(ProblemError::invalid("tol", "must be > 0"));
        }
        if self.max_iter == 0 {
            return Err(ProblemError::invalid("max_iter", "must be ≥ 1"));
        }
        if !(self.d_cap > 0.0) {
            return Err(ProblemError::invalid("d_cap", "must be > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Converged,
    Diverged,
    MaxIterations,
}

/// Checks on a converged pair `(u, m)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Consistency {
    pub hjb_residual: f64,
    pub fp_residual: f64,
    /// Relative space-time L¹ gap between `m` and the Fokker-Planck solution
    /// re-computed with drift `-∇u` from central nodal gradients.
    pub resolve_gap: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveOutcome {
    pub verdict: Verdict,
    #[serde(skip)]
    pub u: Option<SpaceTimeField>,
    #[serde(skip)]
    pub m: Option<SpaceTimeField>,
    /// Last successfully computed `w`.
    #[serde(skip)]
    pub w: Option<SpaceTimeField>,
    pub residual_history: Vec<f64>,
    pub iterations: usize,
    pub d_final: f64,
    /// Largest relative deviation of discrete mass from its initial value
    /// over every Fokker-Planck step of every iterate.
    pub max_mass_error: f64,
    pub min_density: f64,
    pub min_w: f64,
    pub consistency: Option<Consistency>,
    pub note: Option<String>,
}

impl SolveOutcome {
    pub fn converged(&self) -> bool {
        self.verdict == Verdict::Converged
    }
}

pub fn hopf_cole(u: &SpaceTimeField) -> SpaceTimeField {
    u.map(|v| (-0.5 * v).exp())
}

pub fn inverse_hopf_cole(w: &SpaceTimeField) -> Result<SpaceTimeField, HopfColeError> {
    let nodes = w.grid().n_nodes();
    if let Some((idx, &value)) = w.values().iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(HopfColeError::NonPositive {
            step: idx / nodes,
            node: idx % nodes,
            value,
        });
    }
    Ok(w.map(|v| -2.0 * v.ln()))
}

/// `∬ μ^{2α+1}`.
pub fn d_value(mu: &SpaceTimeField, alpha: f64) -> f64 {
    let p = 2.0 * alpha + 1.0;
    mu.integrate_with(|v| v.max(0.0).powf(p))
}

fn check_grid(p: &ProblemSpec, grid: &Grid) -> Result<(), ProblemError> {
    if grid.dim() != p.dim {
        return Err(ProblemError::Configuration(format!(
            "grid dimension {} does not match problem dimension {}",
            grid.dim(),
            p.dim
        )));
    }
    if (grid.horizon() - p.horizon).abs() > 1e-12 * p.horizon {
        return Err(ProblemError::Configuration(format!(
            "grid horizon {} does not match problem horizon {}",
            grid.horizon(),
            p.horizon
        )));
    }
    Ok(())
}

pub(crate) fn picard_map_sampled(
    m: &SpaceTimeField,
    p: &ProblemSpec,
    s: &SampledProblem,
    grid: &Grid,
    scheme: TimeScheme,
) -> Result<(SpaceTimeField, SpaceTimeField), ParabolicError> {
    let c = &p.coupling;
    let coefficient = SpaceTimeField::from_fn(*grid, |n, k| 0.5 * (c.f(m.slice(n)[k]) - s.v[k]));
    let terminal = s.u_terminal.iter().map(|u| (-0.5 * u).exp()).collect();
    let w = solve_backward_heat(
        &BackwardHeatProblem {
            coefficient,
            terminal,
        },
        grid,
        scheme,
    )?;
    let mu = solve_fokker_planck(
        &FokkerPlanckProblem {
            drift: DriftSource::LogGradient { w: &w, scale: 2.0 },
            initial: s.m0.clone(),
        },
        grid,
        scheme,
    )?;
    Ok((mu, w))
}

/// One application of the fixed-point map, returning `(μ, w)`.
pub fn picard_map(
    m: &SpaceTimeField,
    p: &ProblemSpec,
    grid: &Grid,
    scheme: TimeScheme,
) -> Result<(SpaceTimeField, SpaceTimeField), Error> {
    check_grid(p, grid)?;
    if m.grid() != grid {
        return Err(ParabolicError::ShapeMismatch.into());
    }
    if !m.is_finite() || m.min() < crate::parabolic::NEGATIVITY_TOLERANCE {
        return Err(ProblemError::Configuration(
            "input density must be finite and nonnegative".into(),
        )
        .into());
    }
    let s = sample_on_grid(p, grid)?;
    Ok(picard_map_sampled(m, p, &s, grid, scheme)?)
}

fn max_mass_error(mu: &SpaceTimeField) -> f64 {
    let g = *mu.grid();
    let m0 = integrate(mu.slice(0), &g, Weight::One);
    (0..mu.n_times())
        .map(|n| {
            (integrate(mu.slice(n), &g, Weight::One) - m0).abs() / m0.abs().max(f64::MIN_POSITIVE)
        })
        .fold(0.0, f64::max)
}

pub fn solve(p: &ProblemSpec, grid: &Grid, cfg: &SolverConfig) -> Result<SolveOutcome, Error> {
    p.validate()?;
    cfg.validate()?;
    check_grid(p, grid)?;
    let s = sample_on_grid(p, grid)?;
    let scheme = cfg.time_scheme;
    let mut m = match cfg.initial_guess {
        InitialGuess::HeatFlow => heat_flow(&s.m0, grid, scheme)?,
        InitialGuess::Frozen => SpaceTimeField::from_fn(*grid, |_, k| s.m0[k]),
    };
    let alpha = p.coupling.alpha;
    let mut out = SolveOutcome {
        verdict: Verdict::MaxIterations,
        u: None,
        m: None,
        w: None,
        residual_history: Vec::new(),
        iterations: 0,
        d_final: d_value(&m, alpha),
        max_mass_error: 0.0,
        min_density: m.min(),
        min_w: f64::NAN,
        consistency: None,
        note: None,
    };
    let mut last_mu = None;
    for k in 1..=cfg.max_iter {
        out.iterations = k;
        let (mu, w) = match picard_map_sampled(&m, p, &s, grid, scheme) {
            Ok(pair) => pair,
            Err(e) => {
                out.verdict = Verdict::Diverged;
                out.note = Some(e.to_string());
                return Ok(out);
            }
        };
        out.min_w = w.min();
        out.w = Some(w);
        out.max_mass_error = out.max_mass_error.max(max_mass_error(&mu));
        out.min_density = out.min_density.min(mu.min());
        let d = d_value(&mu, alpha);
        out.d_final = d;
        if !mu.is_finite() || !d.is_finite() || d > cfg.d_cap {
            out.verdict = Verdict::Diverged;
            out.note = Some(format!("D = {d:e} exceeds cap {:e}", cfg.d_cap));
            return Ok(out);
        }
        let scale = m.integrate_with(f64::abs).max(f64::MIN_POSITIVE);
        let residual = mu.l1_distance(&m) / scale;
        out.residual_history.push(residual);
        if residual <= cfg.tol {
            out.verdict = Verdict::Converged;
            last_mu = Some(mu);
            break;
        }
        m = m.blend(&mu, cfg.damping);
    }
    if out.verdict != Verdict::Converged {
        return Ok(out);
    }
    let mu = last_mu.expect("converged iterate");
    let w = out.w.as_ref().expect("converged w");
    let u = inverse_hopf_cole(w).map_err(|e| ProblemError::Configuration(e.to_string()))?;
    let (hjb_residual, fp_residual) = self_consistency_residual_with(&u, &mu, p, grid, scheme)?;
    let resolve_gap = match solve_fokker_planck(
        &FokkerPlanckProblem {
            drift: DriftSource::GradientOf {
                field: &u,
                scale: -1.0,
            },
            initial: s.m0.clone(),
        },
        grid,
        scheme,
    ) {
        Ok(re) => re.l1_distance(&mu) / mu.integrate_with(f64::abs),
        Err(_) => f64::INFINITY,
    };
    out.consistency = Some(Consistency {
        hjb_residual,
        fp_residual,
        resolve_gap,
    });
    out.u = Some(u);
    out.m = Some(mu);
    Ok(out)
}

/// Weighted L¹ norms over interior space-time nodes of the pointwise residuals
///
/// * `-u_t - Δu + ½|∇u|² + f(m) - V`,
/// * `m_t - Δm - ∇u·∇m - m Δu`,
///
/// with central differences in space and implicit-Euler differences in time.
pub fn self_consistency_residual(
    u: &SpaceTimeField,
    m: &SpaceTimeField,
    p: &ProblemSpec,
    grid: &Grid,
) -> Result<(f64, f64), Error> {
    self_consistency_residual_with(u, m, p, grid, TimeScheme::ImplicitEuler)
}

/// As [`self_consistency_residual`], with the spatial terms weighted between
/// adjacent time levels like the given scheme.
pub fn self_consistency_residual_with(
    u: &SpaceTimeField,
    m: &SpaceTimeField,
    p: &ProblemSpec,
    grid: &Grid,
    scheme: TimeScheme,
) -> Result<(f64, f64), Error> {
    if u.grid() != grid || m.grid() != grid {
        return Err(ParabolicError::ShapeMismatch.into());
    }
    let s = sample_on_grid(p, grid)?;
    let dt = grid.dt();
    let nx = grid.nx();
    let theta = scheme.theta();
    let weights = grid.spatial_weights();
    let interior: Vec<usize> = (0..grid.n_nodes())
        .filter(|&k| {
            let (i, j) = (k % nx, k / nx);
            i > 0 && i + 1 < nx && (grid.dim() == 1 || (j > 0 && j + 1 < nx))
        })
        .collect();
    // spatial parts of both equations at every level
    let (hjb_ops, fp_ops): (Vec<Vec<f64>>, Vec<Vec<f64>>) = (0..=grid.nt())
        .map(|n| {
            let (un, mn) = (u.slice(n), m.slice(n));
            let (lap_u, grad_u) = (laplacian(un, grid), gradient(un, grid));
            let (lap_m, grad_m) = (laplacian(mn, grid), gradient(mn, grid));
            (0..grid.n_nodes())
                .map(|k| {
                    let (mut grad_sq, mut cross) = (0.0, 0.0);
                    for a in 0..grid.dim() {
                        grad_sq += grad_u[a][k] * grad_u[a][k];
                        cross += grad_u[a][k] * grad_m[a][k];
                    }
                    let hjb = -lap_u[k] + 0.5 * grad_sq + p.coupling.f(mn[k]) - s.v[k];
                    let fp = -lap_m[k] - cross - mn[k] * lap_u[k];
                    (hjb, fp)
                })
                .unzip()
        })
        .unzip();
    let mut hjb = 0.0;
    let mut fp = 0.0;
    for n in 1..grid.nt() {
        let (u_now, u_next) = (u.slice(n), u.slice(n + 1));
        let (m_now, m_prev) = (m.slice(n), m.slice(n - 1));
        for &k in &interior {
            let r_hjb = -(u_next[k] - u_now[k]) / dt
                + theta * hjb_ops[n][k]
                + (1.0 - theta) * hjb_ops[n + 1][k];
            let r_fp = (m_now[k] - m_prev[k]) / dt
                + theta * fp_ops[n][k]
                + (1.0 - theta) * fp_ops[n - 1][k];
            hjb += weights[k] * dt * r_hjb.abs();
            fp += weights[k] * dt * r_fp.abs();
        }
    }
    Ok((hjb, fp))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hopf_cole_roundtrip_constant() {
        let g = Grid::new(1, 2.0, 5, 2, 1.0).unwrap();
        let u = SpaceTimeField::constant(g, 3.0);
        let w = hopf_cole(&u);
        assert!(w
            .values()
            .iter()
            .all(|v| (v - (-1.5f64).exp()).abs() < 1e-15));
        let back = inverse_hopf_cole(&w).unwrap();
        assert!(back.values().iter().all(|v| (v - 3.0).abs() < 1e-14));
    }

    #[test]
    fn inverse_rejects_nonpositive() {
        let g = Grid::new(1, 2.0, 5, 2, 1.0).unwrap();
        let mut w = SpaceTimeField::constant(g, 1.0);
        w.slice_mut(1)[3] = 0.0;
        assert_eq!(
            inverse_hopf_cole(&w),
            Err(HopfColeError::NonPositive {
                step: 1,
                node: 3,
                value: 0.0
            })
        );
    }

    #[test]
    fn config_validation_names_keys() {
        let cfg = SolverConfig {
            damping: 0.0,
            ..SolverConfig::default()
        };
        assert!(
            matches!(cfg.validate(), Err(ProblemError::InvalidParameter { key, .. }) if key == "damping")
        );
    }

    #[test]
    fn decoupled_problem_converges_immediately() {
        let p = ProblemSpec::gaussian_1d(0.0, 2.0, 1.0);
        let g = Grid::new(1, 10.0, 101, 50, 1.0).unwrap();
        let out = solve(&p, &g, &SolverConfig::default()).unwrap();
        assert_eq!(out.verdict, Verdict::Converged);
        assert!(out.iterations <= 2);
        let c = out.consistency.unwrap();
        assert!(c.hjb_residual < 1e-10);
    }

    #[test]
    fn horizon_mismatch_is_a_configuration_error() {
        let p = ProblemSpec::gaussian_1d(0.0, 2.0, 2.0);
        let g = Grid::new(1, 10.0, 11, 5, 1.0).unwrap();
        assert!(solve(&p, &g, &SolverConfig::default()).is_err());
    }
}
