//! Experiment harness: single solves with full diagnostics, `(σ, T)` phase
//! sweeps, long-horizon `D(T)` studies, certificates and the heat-kernel
//! exponent table. Each `run_*` returns an in-memory result; the matching
//! `write_*` lays it out on disk:
//!
//! ```text
//! <out>/metadata.json
//! <out>/fields/{m,u}_<level>.csv      single solve, selected time levels
//! <out>/reports/*.csv, *.json          diagnostics series and reports
//! <out>/table.csv, boundary.csv        sweep
//! <out>/longtime.csv                   long-horizon study
//! <out>/kernelcheck.csv                heat-kernel exponents
//! ```

use std::path::Path;

use serde::Serialize;

use crate::config::{Config, GridSettings, TimeResolution};
use crate::diagnostics::{
    check_moment_identity, compute_apriori, compute_energy, compute_nonexistence_certificate,
    compute_planning_certificate, AprioriReport, Certificate, EnergyReport, MomentReport,
};
use crate::error::{ConfigError, Error};
use crate::grid::{Grid, SpaceTimeField};
use crate::kernel::{
    heat_kernel_spacetime_norm, heat_kernel_window_norm, HeatKernelQuery, KernelNorm,
};
use crate::output::{create_dir, num, opt_num, write_csv, write_json};
use crate::par::{map_collect, Execution};
use crate::problem::ProblemSpec;
use crate::solver::{solve, SolveOutcome, SolverConfig, Verdict};

/// Result of `solve`: outcome plus every diagnostic available for it.
#[derive(Debug, Clone)]
pub struct SingleRun {
    pub problem: ProblemSpec,
    pub grid: Grid,
    pub solver: SolverConfig,
    pub outcome: SolveOutcome,
    pub certificate: Certificate,
    pub energy: Option<EnergyReport>,
    pub moments: Option<MomentReport>,
    pub apriori: Option<AprioriReport>,
    pub snapshots: Vec<usize>,
}

fn snapshot_levels(nt: usize, count: usize) -> Vec<usize> {
    let mut levels: Vec<usize> = (0..count)
        .map(|i| ((i as f64) * nt as f64 / (count - 1) as f64).round() as usize)
        .collect();
    levels.dedup();
    levels
}

pub fn run_single(cfg: &Config) -> Result<SingleRun, Error> {
    let grid = cfg.solve_grid()?;
    let p = &cfg.problem;
    let outcome = solve(p, &grid, &cfg.solver)?;
    let certificate = compute_nonexistence_certificate(p, &grid, false)?;
    let (energy, moments, apriori) = match (&outcome.u, &outcome.m) {
        (Some(u), Some(m)) => (
            Some(compute_energy(u, m, p, &grid)?),
            Some(check_moment_identity(u, m, p, &grid)?),
            Some(compute_apriori(m, p, &grid)?),
        ),
        _ => (None, None, None),
    };
    Ok(SingleRun {
        problem: p.clone(),
        grid,
        solver: cfg.solver,
        outcome,
        certificate,
        energy,
        moments,
        apriori,
        snapshots: snapshot_levels(grid.nt(), cfg.snapshots),
    })
}

fn write_field(path: &Path, field: &SpaceTimeField, level: usize) -> Result<(), Error> {
    let g = field.grid();
    let values = field.slice(level);
    let rows: Vec<Vec<String>> = (0..g.n_nodes())
        .map(|k| {
            let x = g.point(k);
            let mut row: Vec<String> = x[..g.dim()].iter().map(|&c| num(c)).collect();
            row.push(num(values[k]));
            row
        })
        .collect();
    let header: &[&str] = if g.dim() == 1 {
        &["x", "value"]
    } else {
        &["x", "y", "value"]
    };
    write_csv(path, header, &rows)
}

#[derive(Serialize)]
struct SingleMetadata<'a> {
    command: &'static str,
    problem: &'a ProblemSpec,
    grid: &'a Grid,
    solver: &'a SolverConfig,
    outcome: &'a SolveOutcome,
    energy_drift: Option<f64>,
    moment_residual_r1: Option<f64>,
    moment_residual_r2: Option<f64>,
    min_h_second: Option<f64>,
    e0: f64,
    t_star: Option<f64>,
    snapshot_levels: &'a [usize],
}

pub fn write_single(run: &SingleRun, dir: &Path) -> Result<(), Error> {
    let fields = dir.join("fields");
    let reports = dir.join("reports");
    create_dir(&fields)?;
    create_dir(&reports)?;
    write_json(
        &dir.join("metadata.json"),
        &SingleMetadata {
            command: "solve",
            problem: &run.problem,
            grid: &run.grid,
            solver: &run.solver,
            outcome: &run.outcome,
            energy_drift: run.energy.as_ref().map(|e| e.drift),
            moment_residual_r1: run.moments.as_ref().map(|m| m.r1),
            moment_residual_r2: run.moments.as_ref().map(|m| m.r2),
            min_h_second: run.moments.as_ref().map(|m| m.min_h_second),
            e0: run.certificate.e0,
            t_star: run.certificate.t_star,
            snapshot_levels: &run.snapshots,
        },
    )?;
    if let (Some(u), Some(m)) = (&run.outcome.u, &run.outcome.m) {
        for &n in &run.snapshots {
            write_field(&fields.join(format!("m_{n:06}.csv")), m, n)?;
            write_field(&fields.join(format!("u_{n:06}.csv")), u, n)?;
        }
    }
    let history: Vec<Vec<String>> = run
        .outcome
        .residual_history
        .iter()
        .enumerate()
        .map(|(k, r)| vec![(k + 1).to_string(), num(*r)])
        .collect();
    write_csv(
        &reports.join("residuals.csv"),
        &["iteration", "residual"],
        &history,
    )?;
    write_json(&reports.join("certificate.json"), &run.certificate)?;
    let times = run.grid.times();
    if let Some(e) = &run.energy {
        let c = &e.components;
        let rows: Vec<Vec<String>> = (0..e.energy.len())
            .map(|n| {
                [
                    times[n],
                    e.energy[n],
                    c.cross[n],
                    c.kinetic[n],
                    c.coupling[n],
                    c.potential[n],
                ]
                .iter()
                .map(|v| num(*v))
                .collect()
            })
            .collect();
        write_csv(
            &reports.join("energy.csv"),
            &[
                "t",
                "E",
                "grad_u_dot_grad_m",
                "half_grad_u_sq_m",
                "F_m",
                "V_m",
            ],
            &rows,
        )?;
    }
    if let Some(m) = &run.moments {
        let rows: Vec<Vec<String>> = (0..m.times.len())
            .map(|n| {
                [
                    m.times[n],
                    m.mass[n],
                    m.abs_moment[n],
                    m.h[n],
                    m.h_prime[n],
                    m.h_second[n],
                    m.rhs1[n],
                    m.rhs2[n],
                    m.tail_mass[n],
                ]
                .iter()
                .map(|v| num(*v))
                .collect()
            })
            .collect();
        write_csv(
            &reports.join("moments.csv"),
            &[
                "t",
                "mass",
                "abs_moment",
                "h",
                "h_prime",
                "h_second",
                "rhs1",
                "rhs2",
                "tail_mass",
            ],
            &rows,
        )?;
    }
    if let Some(a) = &run.apriori {
        write_json(&reports.join("apriori.json"), a)?;
    }
    Ok(())
}

/// Phase-table label of one `(σ, T)` cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CellVerdict {
    Converged,
    NonConvergent,
    CertifiedNonexistentAndNonConvergent,
    /// Converged at every refinement although a certificate rules out a
    /// classical solution: a discretisation artefact.
    CertifiedNonexistentButConverged,
}

impl CellVerdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Converged => "converged",
            Self::NonConvergent => "non_convergent",
            Self::CertifiedNonexistentAndNonConvergent => {
                "certified_nonexistent_and_non_convergent"
            }
            Self::CertifiedNonexistentButConverged => "certified_nonexistent_but_converged",
        }
    }

    pub fn certified(&self) -> bool {
        matches!(
            self,
            Self::CertifiedNonexistentAndNonConvergent | Self::CertifiedNonexistentButConverged
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Attempt {
    pub nx: usize,
    pub nt: usize,
    pub verdict: Option<Verdict>,
    pub iterations: usize,
    pub d_final: f64,
    pub note: Option<String>,
}

impl Attempt {
    fn converged(&self) -> bool {
        self.verdict == Some(Verdict::Converged)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepCell {
    pub sigma: f64,
    pub horizon: f64,
    pub verdict: CellVerdict,
    pub t_star: Option<f64>,
    pub e0: f64,
    /// From the attempt that decided the label.
    pub d_final: f64,
    pub iterations: usize,
    pub attempts: Vec<Attempt>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundaryPoint {
    pub sigma: f64,
    pub e0: f64,
    pub t_star: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub sigma: Vec<f64>,
    pub horizons: Vec<f64>,
    /// Row-major: all horizons for the first σ, then the next σ.
    pub cells: Vec<SweepCell>,
    pub boundary: Vec<BoundaryPoint>,
}

impl SweepResult {
    pub fn cell(&self, i_sigma: usize, i_horizon: usize) -> &SweepCell {
        &self.cells[i_sigma * self.horizons.len() + i_horizon]
    }
}

fn attempt(p: &ProblemSpec, grid: Result<Grid, Error>, solver: &SolverConfig) -> Attempt {
    let failed = |nx, nt, e: Error| Attempt {
        nx,
        nt,
        verdict: None,
        iterations: 0,
        d_final: f64::NAN,
        note: Some(e.to_string()),
    };
    let grid = match grid {
        Ok(g) => g,
        Err(e) => return failed(0, 0, e),
    };
    match solve(p, &grid, solver) {
        Ok(out) => Attempt {
            nx: grid.nx(),
            nt: grid.nt(),
            verdict: Some(out.verdict),
            iterations: out.iterations,
            d_final: out.d_final,
            note: out.note,
        },
        Err(e) => failed(grid.nx(), grid.nt(), e),
    }
}

/// Solves one cell, re-running twice under refinement whenever the base
/// verdict is non-convergent or contradicts the certificate.
fn sweep_cell(
    base: &ProblemSpec,
    settings: &GridSettings,
    solver: &SolverConfig,
    refine: bool,
    sigma: f64,
    horizon: f64,
    boundary: &BoundaryPoint,
) -> SweepCell {
    let p = base.with_sigma(sigma).with_horizon(horizon);
    let certified = boundary.t_star.is_some_and(|ts| horizon > ts);
    let base_grid = settings.grid(p.dim, horizon);
    let mut attempts = vec![attempt(&p, base_grid.map_err(Error::from), solver)];
    let contradiction = certified && attempts[0].converged();
    if refine && (!attempts[0].converged() || contradiction) {
        if let Ok(mut g) = settings.grid(p.dim, horizon) {
            for _ in 0..2 {
                g = g.refined();
                attempts.push(attempt(&p, Ok(g), solver));
            }
        }
    }
    let any_converged = attempts.iter().any(Attempt::converged);
    let all_converged = attempts.iter().all(Attempt::converged);
    let (verdict, decisive) = match (certified, any_converged, all_converged) {
        (true, _, true) => (
            CellVerdict::CertifiedNonexistentButConverged,
            attempts.len() - 1,
        ),
        (true, _, false) => {
            let i = attempts.iter().position(|a| !a.converged()).unwrap_or(0);
            (CellVerdict::CertifiedNonexistentAndNonConvergent, i)
        }
        (false, true, _) => {
            let i = attempts.iter().position(Attempt::converged).unwrap_or(0);
            (CellVerdict::Converged, i)
        }
        (false, false, _) => (CellVerdict::NonConvergent, attempts.len() - 1),
    };
    SweepCell {
        sigma,
        horizon,
        verdict,
        t_star: if certified { boundary.t_star } else { None },
        e0: boundary.e0,
        d_final: attempts[decisive].d_final,
        iterations: attempts[decisive].iterations,
        attempts,
    }
}

fn sweep_spec(cfg: &Config) -> Result<&crate::config::SweepSpec, Error> {
    cfg.sweep.as_ref().ok_or_else(|| {
        ConfigError::Schema {
            keys: vec!["sweep".into()],
            messages: vec!["sweep: section required for this command".into()],
        }
        .into()
    })
}

pub fn run_sweep(cfg: &Config) -> Result<SweepResult, Error> {
    run_sweep_with(cfg, None)
}

/// As [`run_sweep`], optionally overriding the configured worker count.
pub fn run_sweep_with(cfg: &Config, exec: Option<Execution>) -> Result<SweepResult, Error> {
    let spec = sweep_spec(cfg)?;
    let exec = exec.unwrap_or_else(|| Execution::from_workers(spec.workers));
    let settings = GridSettings {
        time: TimeResolution::Step(spec.dt),
        ..cfg.grid
    };
    let cert_grid = settings.grid(cfg.problem.dim, 1.0)?;
    let boundary = map_collect(&spec.sigma, exec, |&sigma| {
        let p = cfg.problem.with_sigma(sigma).with_horizon(1.0);
        match compute_nonexistence_certificate(&p, &cert_grid, spec.optimize_shift) {
            Ok(c) => BoundaryPoint {
                sigma,
                e0: c.e0,
                t_star: c.t_star,
            },
            Err(_) => BoundaryPoint {
                sigma,
                e0: f64::NAN,
                t_star: None,
            },
        }
    });
    let jobs: Vec<(usize, usize)> = (0..spec.sigma.len())
        .flat_map(|i| (0..spec.horizons.len()).map(move |j| (i, j)))
        .collect();
    let cells = map_collect(&jobs, exec, |&(i, j)| {
        sweep_cell(
            &cfg.problem,
            &settings,
            &cfg.solver,
            spec.refine,
            spec.sigma[i],
            spec.horizons[j],
            &boundary[i],
        )
    });
    Ok(SweepResult {
        sigma: spec.sigma.clone(),
        horizons: spec.horizons.clone(),
        cells,
        boundary,
    })
}

pub fn write_sweep(result: &SweepResult, dir: &Path) -> Result<(), Error> {
    create_dir(&dir.join("reports"))?;
    let rows: Vec<Vec<String>> = result
        .cells
        .iter()
        .map(|c| {
            vec![
                num(c.sigma),
                num(c.horizon),
                c.verdict.as_str().to_string(),
                opt_num(c.t_star),
                num(c.d_final),
                c.iterations.to_string(),
            ]
        })
        .collect();
    write_csv(
        &dir.join("table.csv"),
        &["sigma", "T", "verdict", "T_star", "D_final", "iterations"],
        &rows,
    )?;
    let curve: Vec<Vec<String>> = result
        .boundary
        .iter()
        .map(|b| vec![num(b.sigma), num(b.e0), opt_num(b.t_star)])
        .collect();
    write_csv(
        &dir.join("boundary.csv"),
        &["sigma", "e0", "T_star"],
        &curve,
    )?;
    write_json(&dir.join("reports").join("cells.json"), &result.cells)?;
    #[derive(Serialize)]
    struct Meta<'a> {
        command: &'static str,
        sigma: &'a [f64],
        horizons: &'a [f64],
        cells: usize,
        converged: usize,
        certified: usize,
    }
    write_json(
        &dir.join("metadata.json"),
        &Meta {
            command: "sweep",
            sigma: &result.sigma,
            horizons: &result.horizons,
            cells: result.cells.len(),
            converged: result
                .cells
                .iter()
                .filter(|c| c.verdict == CellVerdict::Converged)
                .count(),
            certified: result
                .cells
                .iter()
                .filter(|c| c.verdict.certified())
                .count(),
        },
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LongtimeRow {
    pub horizon: f64,
    pub verdict: Option<Verdict>,
    pub d_final: f64,
    /// `∫₀¹∫ m^{2α+1}(x, sT) dx ds = D/T`.
    pub rescaled: f64,
    pub iterations: usize,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LongtimeResult {
    pub rows: Vec<LongtimeRow>,
    /// `max D / min D` over converged horizons.
    pub d_ratio: Option<f64>,
}

pub fn run_longtime(cfg: &Config) -> Result<LongtimeResult, Error> {
    let spec = cfg.longtime.as_ref().ok_or_else(|| ConfigError::Schema {
        keys: vec!["longtime".into()],
        messages: vec!["longtime: section required for this command".into()],
    })?;
    let settings = GridSettings {
        time: TimeResolution::Step(spec.dt),
        ..cfg.grid
    };
    let rows = map_collect(
        &spec.horizons,
        Execution::from_workers(spec.workers),
        |&horizon| {
            let p = cfg.problem.with_horizon(horizon);
            let a = attempt(
                &p,
                settings.grid(p.dim, horizon).map_err(Error::from),
                &cfg.solver,
            );
            LongtimeRow {
                horizon,
                verdict: a.verdict,
                d_final: a.d_final,
                rescaled: a.d_final / horizon,
                iterations: a.iterations,
                note: a.note,
            }
        },
    );
    let ds: Vec<f64> = rows
        .iter()
        .filter(|r| r.verdict == Some(Verdict::Converged))
        .map(|r| r.d_final)
        .collect();
    let d_ratio = (!ds.is_empty()).then(|| {
        let max = ds.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = ds.iter().copied().fold(f64::INFINITY, f64::min);
        max / min
    });
    Ok(LongtimeResult { rows, d_ratio })
}

pub fn write_longtime(result: &LongtimeResult, dir: &Path) -> Result<(), Error> {
    create_dir(dir)?;
    let rows: Vec<Vec<String>> = result
        .rows
        .iter()
        .map(|r| {
            vec![
                num(r.horizon),
                r.verdict.map_or("error", verdict_str).to_string(),
                num(r.d_final),
                num(r.rescaled),
                r.iterations.to_string(),
            ]
        })
        .collect();
    write_csv(
        &dir.join("longtime.csv"),
        &["T", "verdict", "D_final", "rescaled", "iterations"],
        &rows,
    )?;
    #[derive(Serialize)]
    struct Meta<'a> {
        command: &'static str,
        result: &'a LongtimeResult,
    }
    write_json(
        &dir.join("metadata.json"),
        &Meta {
            command: "longtime",
            result,
        },
    )
}

fn verdict_str(v: Verdict) -> &'static str {
    match v {
        Verdict::Converged => "converged",
        Verdict::Diverged => "diverged",
        Verdict::MaxIterations => "max_iterations",
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertifyResult {
    pub nonexistence: Certificate,
    pub planning: Option<Certificate>,
    pub horizon_exceeds_t_star: Option<bool>,
}

/// Certificates only; no PDE is solved.
pub fn certify(cfg: &Config, optimize_shift: bool) -> Result<CertifyResult, Error> {
    let grid = cfg.solve_grid()?;
    let nonexistence = compute_nonexistence_certificate(&cfg.problem, &grid, optimize_shift)?;
    let planning = cfg
        .planning
        .as_ref()
        .map(|mt| compute_planning_certificate(mt, &cfg.problem, &grid))
        .transpose()?;
    Ok(CertifyResult {
        horizon_exceeds_t_star: nonexistence.t_star.map(|ts| cfg.problem.horizon > ts),
        nonexistence,
        planning,
    })
}

pub fn write_certify(result: &CertifyResult, dir: &Path) -> Result<(), Error> {
    create_dir(dir)?;
    write_json(&dir.join("certificate.json"), result)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelRow {
    pub dim: usize,
    pub exponent: f64,
    pub kind: KernelNorm,
    pub analytic_exponent: f64,
    pub fitted_exponent: f64,
    /// `full` for the norm over `(0, t)`, `window` for `(t·10^-4, t)` when
    /// the full norm is infinite.
    pub method: &'static str,
    pub value: f64,
}

pub const KERNEL_WINDOW_DECADES: f64 = 4.0;

/// Exponent fit for one query: the full space-time norm when finite, the
/// scaling window otherwise.
pub fn kernel_row(query: &HeatKernelQuery) -> Result<KernelRow, Error> {
    let (fit, method) = match heat_kernel_spacetime_norm(query) {
        Ok(fit) => (fit, "full"),
        Err(crate::error::ParabolicError::NonIntegrable { .. }) => (
            heat_kernel_window_norm(query, KERNEL_WINDOW_DECADES)?,
            "window",
        ),
        Err(e) => return Err(e.into()),
    };
    Ok(KernelRow {
        dim: query.dim,
        exponent: query.exponent,
        kind: query.kind,
        analytic_exponent: fit.analytic_exponent,
        fitted_exponent: fit.fitted_exponent,
        method,
        value: fit.value,
    })
}

pub fn kernelcheck() -> Result<Vec<KernelRow>, Error> {
    let mut rows = Vec::new();
    for kind in [KernelNorm::Kernel, KernelNorm::Gradient] {
        for dim in [1, 2] {
            for q in [1.0, 1.5, 2.0, 3.0, 4.0] {
                rows.push(kernel_row(&HeatKernelQuery::new(dim, q, 1.0, kind)?)?);
            }
        }
    }
    Ok(rows)
}

pub fn write_kernelcheck(rows: &[KernelRow], dir: &Path) -> Result<(), Error> {
    create_dir(dir)?;
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.dim.to_string(),
                num(r.exponent),
                match r.kind {
                    KernelNorm::Kernel => "G".to_string(),
                    KernelNorm::Gradient => "grad_G".to_string(),
                },
                num(r.analytic_exponent),
                num(r.fitted_exponent),
                r.method.to_string(),
                num(r.value),
            ]
        })
        .collect();
    write_csv(
        &dir.join("kernelcheck.csv"),
        &[
            "N",
            "q",
            "kernel",
            "analytic_exponent",
            "fitted_exponent",
            "method",
            "value",
        ],
        &table,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snapshot_levels_cover_endpoints() {
        assert_eq!(snapshot_levels(10, 3), vec![0, 5, 10]);
        assert_eq!(snapshot_levels(2, 5), vec![0, 1, 2]);
    }

    #[test]
    fn verdict_labels() {
        assert_eq!(
            CellVerdict::CertifiedNonexistentButConverged.as_str(),
            "certified_nonexistent_but_converged"
        );
        assert!(!CellVerdict::NonConvergent.certified());
    }
}
