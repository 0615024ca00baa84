//! Conserved quantities, moment identities and non-existence horizons,
//! evaluated on discrete trajectories.

use serde::Serialize;

use crate::error::{Error, ParabolicError};
use crate::grid::{Grid, SpaceTimeField};
use crate::ops::{gradient, integrate, Weight};
use crate::problem::{
    conditions_from_samples, sample_on_grid, translated_margins, ConditionReport, GaussianMixture,
    ProblemSpec, SampledProblem, CONDITION_TOLERANCE, MASS_TOLERANCE,
};
use crate::solver::d_value;

/// Below this value of `m0` the Fisher integrand is taken as zero.
pub const FISHER_CUTOFF: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyComponents {
    /// `∫∇u·∇m`
    pub cross: Vec<f64>,
    /// `½∫|∇u|² m`
    pub kinetic: Vec<f64>,
    /// `∫F(m)`
    pub coupling: Vec<f64>,
    /// `∫V m`
    pub potential: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyReport {
    pub energy: Vec<f64>,
    /// `max_t |E(t) - E(0)|`
    pub drift: f64,
    pub components: EnergyComponents,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentReport {
    pub times: Vec<f64>,
    pub mass: Vec<f64>,
    pub abs_moment: Vec<f64>,
    /// `∫|x|² m`
    pub h: Vec<f64>,
    /// Centred differences of `h`; `NaN` at the two end points.
    pub h_prime: Vec<f64>,
    pub h_second: Vec<f64>,
    /// `2N mass(0) - 2∫m ∇u·x`
    pub rhs1: Vec<f64>,
    /// `4E + 2N∫f(m)m - 2(N+2)∫F(m) + 4∫Vm + 2∫∇V·x m`
    pub rhs2: Vec<f64>,
    /// Mass outside the central half of the domain.
    pub tail_mass: Vec<f64>,
    /// `Σ dt |h' - rhs1|` over interior times.
    pub r1: f64,
    /// `Σ dt |h'' - rhs2|` over interior times.
    pub r2: f64,
    pub min_h_second: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct E0Terms {
    /// `∫|∇m0|²/m0`
    pub fisher: f64,
    /// `∫F(m0)`
    pub coupling: f64,
    /// `∫(V - inf V) m0`
    pub potential: f64,
    pub e0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate {
    pub e0: f64,
    pub e0_terms: E0Terms,
    /// `∫|x - y*|² m0`
    pub h0: f64,
    pub h_terminal: Option<f64>,
    pub t_star: Option<f64>,
    pub t_hat_planning: Option<f64>,
    pub conditions: ConditionReport,
    pub shift: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AprioriReport {
    /// `∬ μ^{2α+1}`
    pub d: f64,
    pub q: f64,
    /// `2/q = (α+1)/(2α+1)`
    pub two_over_q: f64,
    /// `δ = 4/q`
    pub delta_exponent: f64,
    /// `β = αN/2`
    pub beta: f64,
    /// `m = Nα/(α+1)`
    pub m_exponent: f64,
    /// `1/β = 1 - θ + θ/(α+1)`
    pub theta: f64,
    /// `a = 2θβ/(m(α+1))`
    pub a: f64,
}

fn check_pair(u: &SpaceTimeField, m: &SpaceTimeField, grid: &Grid) -> Result<(), Error> {
    if u.grid() != grid || m.grid() != grid {
        return Err(ParabolicError::ShapeMismatch.into());
    }
    Ok(())
}

fn energy_from_samples(
    u: &SpaceTimeField,
    m: &SpaceTimeField,
    p: &ProblemSpec,
    s: &SampledProblem,
    grid: &Grid,
) -> EnergyReport {
    let dim = grid.dim();
    let nodes = grid.n_nodes();
    let mut c = EnergyComponents {
        cross: Vec::new(),
        kinetic: Vec::new(),
        coupling: Vec::new(),
        potential: Vec::new(),
    };
    for n in 0..m.n_times() {
        let un = u.slice(n);
        let mn = m.slice(n);
        let gu = gradient(un, grid);
        let gm = gradient(mn, grid);
        let mut cross = vec![0.0; nodes];
        let mut kin = vec![0.0; nodes];
        for k in 0..nodes {
            for a in 0..dim {
                cross[k] += gu[a][k] * gm[a][k];
                kin[k] += 0.5 * gu[a][k] * gu[a][k] * mn[k];
            }
        }
        let big_f: Vec<f64> = mn.iter().map(|&v| p.coupling.antiderivative(v)).collect();
        c.cross.push(integrate(&cross, grid, Weight::One));
        c.kinetic.push(integrate(&kin, grid, Weight::One));
        c.coupling.push(integrate(&big_f, grid, Weight::One));
        c.potential.push(integrate(mn, grid, Weight::Nodes(&s.v)));
    }
    let energy: Vec<f64> = (0..c.cross.len())
        .map(|n| c.cross[n] + c.kinetic[n] + c.coupling[n] - c.potential[n])
        .collect();
    let drift = energy
        .iter()
        .map(|e| (e - energy[0]).abs())
        .fold(0.0, f64::max);
    EnergyReport {
        energy,
        drift,
        components: c,
    }
}

pub fn compute_energy(
    u: &SpaceTimeField,
    m: &SpaceTimeField,
    p: &ProblemSpec,
    grid: &Grid,
) -> Result<EnergyReport, Error> {
    check_pair(u, m, grid)?;
    let s = sample_on_grid(p, grid)?;
    Ok(energy_from_samples(u, m, p, &s, grid))
}

pub fn check_moment_identity(
    u: &SpaceTimeField,
    m: &SpaceTimeField,
    p: &ProblemSpec,
    grid: &Grid,
) -> Result<MomentReport, Error> {
    check_pair(u, m, grid)?;
    let s = sample_on_grid(p, grid)?;
    let energy = energy_from_samples(u, m, p, &s, grid);
    let dim = grid.dim();
    let nf = dim as f64;
    let nodes = grid.n_nodes();
    let dt = grid.dt();
    let nt = grid.nt();
    let half = 0.5 * grid.half_width();
    let gv_x: Vec<f64> = (0..nodes)
        .map(|k| {
            let x = grid.point(k);
            (0..dim).map(|a| s.v_grad[a][k] * x[a]).sum()
        })
        .collect();
    let tail_indicator: Vec<f64> = (0..nodes)
        .map(|k| {
            let x = grid.point(k);
            if (0..dim).any(|a| x[a].abs() > half) {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    let mut r = MomentReport {
        times: grid.times(),
        mass: Vec::new(),
        abs_moment: Vec::new(),
        h: Vec::new(),
        h_prime: vec![f64::NAN; nt + 1],
        h_second: vec![f64::NAN; nt + 1],
        rhs1: Vec::new(),
        rhs2: Vec::new(),
        tail_mass: Vec::new(),
        r1: 0.0,
        r2: 0.0,
        min_h_second: f64::INFINITY,
    };
    for n in 0..=nt {
        let mn = m.slice(n);
        let gu = gradient(u.slice(n), grid);
        let drift_x: Vec<f64> = (0..nodes)
            .map(|k| {
                let x = grid.point(k);
                (0..dim).map(|a| gu[a][k] * x[a]).sum()
            })
            .collect();
        let f_m: Vec<f64> = mn.iter().map(|&v| p.coupling.f(v) * v).collect();
        let big_f: Vec<f64> = mn.iter().map(|&v| p.coupling.antiderivative(v)).collect();
        r.mass.push(integrate(mn, grid, Weight::One));
        r.abs_moment.push(integrate(mn, grid, Weight::AbsX));
        r.h.push(integrate(mn, grid, Weight::SquaredX));
        r.tail_mass
            .push(integrate(mn, grid, Weight::Nodes(&tail_indicator)));
        r.rhs1
            .push(2.0 * nf * r.mass[0] - 2.0 * integrate(mn, grid, Weight::Nodes(&drift_x)));
        r.rhs2.push(
            4.0 * energy.energy[n] + 2.0 * nf * integrate(&f_m, grid, Weight::One)
                - 2.0 * (nf + 2.0) * integrate(&big_f, grid, Weight::One)
                + 4.0 * integrate(mn, grid, Weight::Nodes(&s.v))
                + 2.0 * integrate(mn, grid, Weight::Nodes(&gv_x)),
        );
    }
    for n in 1..nt {
        let hp = (r.h[n + 1] - r.h[n - 1]) / (2.0 * dt);
        let hs = (r.h[n + 1] - 2.0 * r.h[n] + r.h[n - 1]) / (dt * dt);
        r.h_prime[n] = hp;
        r.h_second[n] = hs;
        r.r1 += dt * (hp - r.rhs1[n]).abs();
        r.r2 += dt * (hs - r.rhs2[n]).abs();
        r.min_h_second = r.min_h_second.min(hs);
    }
    Ok(r)
}

fn e0_from_samples(p: &ProblemSpec, s: &SampledProblem, grid: &Grid) -> E0Terms {
    let nodes = grid.n_nodes();
    let fisher_integrand: Vec<f64> = (0..nodes)
        .map(|k| {
            let m = s.m0[k];
            if m < FISHER_CUTOFF {
                0.0
            } else {
                let g2: f64 = s.m0_grad.iter().map(|g| g[k] * g[k]).sum();
                g2 / m
            }
        })
        .collect();
    let big_f: Vec<f64> = s.m0.iter().map(|&v| p.coupling.antiderivative(v)).collect();
    let v_min = s.v_min();
    let v_shift: Vec<f64> = s.v.iter().map(|v| v - v_min).collect();
    let fisher = integrate(&fisher_integrand, grid, Weight::One);
    let coupling = integrate(&big_f, grid, Weight::One);
    let potential = integrate(&s.m0, grid, Weight::Nodes(&v_shift));
    E0Terms {
        fisher,
        coupling,
        potential,
        e0: -0.5 * fisher + coupling - potential,
    }
}

pub fn compute_e0_terms(p: &ProblemSpec, grid: &Grid) -> Result<E0Terms, Error> {
    let s = sample_on_grid(p, grid)?;
    Ok(e0_from_samples(p, &s, grid))
}

pub fn compute_e0(p: &ProblemSpec, grid: &Grid) -> Result<f64, Error> {
    Ok(compute_e0_terms(p, grid)?.e0)
}

/// `N/(2e0) + sqrt(h0/(2e0))` for `e0 > 0`.
pub fn t_star(dim: usize, e0: f64, h0: f64) -> Option<f64> {
    (e0 > 0.0).then(|| dim as f64 / (2.0 * e0) + (h0 / (2.0 * e0)).sqrt())
}

/// `sqrt(2 max(h0, hT)/e0)` for `e0 > 0`.
pub fn t_hat(e0: f64, h0: f64, h_terminal: f64) -> Option<f64> {
    (e0 > 0.0).then(|| (2.0 * h0.max(h_terminal) / e0).sqrt())
}

fn shifted_second_moment(m0: &[f64], grid: &Grid, y: &[f64]) -> f64 {
    let weight: Vec<f64> = (0..grid.n_nodes())
        .map(|k| {
            let x = grid.point(k);
            (0..grid.dim()).map(|a| (x[a] - y[a]).powi(2)).sum()
        })
        .collect();
    integrate(m0, grid, Weight::Nodes(&weight))
}

const COARSE_SHIFTS: usize = 41;
const GOLDEN_ITERATIONS: usize = 80;

/// Minimises `∫|x - y|² m0` over shifts `y` whose translated sign conditions
/// hold: coarse lattice search, then golden-section refinement per axis.
fn optimise_shift(p: &ProblemSpec, s: &SampledProblem, grid: &Grid) -> Vec<f64> {
    let dim = grid.dim();
    let v_min = s.v_min();
    let objective = |y: &[f64]| {
        let (pot, term) = translated_margins(p, grid, v_min, y);
        if pot >= -CONDITION_TOLERANCE && term >= -CONDITION_TOLERANCE {
            shifted_second_moment(&s.m0, grid, y)
        } else {
            f64::INFINITY
        }
    };
    let reach = 0.5 * grid.half_width();
    let step = 2.0 * reach / (COARSE_SHIFTS - 1) as f64;
    let coarse: Vec<f64> = (0..COARSE_SHIFTS)
        .map(|i| -reach + i as f64 * step)
        .collect();
    let mut best = vec![0.0; dim];
    let mut best_val = objective(&best);
    let candidates: Vec<Vec<f64>> = if dim == 1 {
        coarse.iter().map(|&a| vec![a]).collect()
    } else {
        coarse
            .iter()
            .flat_map(|&a| coarse.iter().map(move |&b| vec![a, b]))
            .collect()
    };
    for y in candidates {
        let v = objective(&y);
        if v < best_val {
            best_val = v;
            best = y;
        }
    }
    if !best_val.is_finite() {
        return vec![0.0; dim];
    }
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    for a in 0..dim {
        let eval = |t: f64, base: &[f64]| {
            let mut y = base.to_vec();
            y[a] = t;
            objective(&y)
        };
        let (mut lo, mut hi) = (best[a] - step, best[a] + step);
        let mut c = hi - ratio * (hi - lo);
        let mut d = lo + ratio * (hi - lo);
        let (mut fc, mut fd) = (eval(c, &best), eval(d, &best));
        for _ in 0..GOLDEN_ITERATIONS {
            if fc <= fd {
                hi = d;
                d = c;
                fd = fc;
                c = hi - ratio * (hi - lo);
                fc = eval(c, &best);
            } else {
                lo = c;
                c = d;
                fc = fd;
                d = lo + ratio * (hi - lo);
                fd = eval(d, &best);
            }
        }
        let t = 0.5 * (lo + hi);
        if eval(t, &best) <= best_val {
            best_val = eval(t, &best);
            best[a] = t;
        }
    }
    best
}

pub fn compute_nonexistence_certificate(
    p: &ProblemSpec,
    grid: &Grid,
    optimize_shift: bool,
) -> Result<Certificate, Error> {
    let s = sample_on_grid(p, grid)?;
    let conditions = conditions_from_samples(p, grid, &s);
    let e0_terms = e0_from_samples(p, &s, grid);
    let shift = if optimize_shift {
        optimise_shift(p, &s, grid)
    } else {
        vec![0.0; grid.dim()]
    };
    let h0 = shifted_second_moment(&s.m0, grid, &shift);
    let t_star = if conditions.all_hold() {
        t_star(grid.dim(), e0_terms.e0, h0)
    } else {
        None
    };
    Ok(Certificate {
        e0: e0_terms.e0,
        e0_terms,
        h0,
        h_terminal: None,
        t_star,
        t_hat_planning: None,
        conditions,
        shift,
    })
}

/// Planning-problem horizon for prescribed initial and terminal densities.
/// The terminal cost plays no role, so its sign condition is not required.
pub fn compute_planning_certificate(
    m_terminal: &GaussianMixture,
    p: &ProblemSpec,
    grid: &Grid,
) -> Result<Certificate, Error> {
    let s = sample_on_grid(p, grid)?;
    let conditions = conditions_from_samples(p, grid, &s);
    let e0_terms = e0_from_samples(p, &s, grid);
    let mut terminal_problem = p.clone();
    terminal_problem.data.m0 = m_terminal.clone();
    let st = sample_on_grid(&terminal_problem, grid)?;
    let terminal_mass = integrate(&st.m0, grid, Weight::One);
    let terminal_ok =
        (terminal_mass - 1.0).abs() <= MASS_TOLERANCE && st.m0.iter().all(|&v| v >= 0.0);
    let h0 = integrate(&s.m0, grid, Weight::SquaredX);
    let h_terminal = integrate(&st.m0, grid, Weight::SquaredX);
    let applicable = conditions.coupling_scaling.holds
        && conditions.potential.holds
        && conditions.initial_mass.holds
        && terminal_ok;
    let t_hat_planning = if applicable {
        t_hat(e0_terms.e0, h0, h_terminal)
    } else {
        None
    };
    Ok(Certificate {
        e0: e0_terms.e0,
        e0_terms,
        h0,
        h_terminal: Some(h_terminal),
        t_star: None,
        t_hat_planning,
        conditions,
        shift: vec![0.0; grid.dim()],
    })
}

/// Exponent bookkeeping of the a-priori estimate for given `α` and `N`.
pub fn apriori_exponents(alpha: f64, dim: usize) -> AprioriReport {
    let n = dim as f64;
    let two_over_q = (alpha + 1.0) / (2.0 * alpha + 1.0);
    let q = 2.0 / two_over_q;
    let beta = alpha * n / 2.0;
    let m_exponent = n * alpha / (alpha + 1.0);
    let theta = (1.0 - 1.0 / beta) * (alpha + 1.0) / alpha;
    AprioriReport {
        d: 0.0,
        q,
        two_over_q,
        delta_exponent: 4.0 / q,
        beta,
        m_exponent,
        theta,
        a: 2.0 * theta * beta / (m_exponent * (alpha + 1.0)),
    }
}

pub fn compute_apriori(
    mu: &SpaceTimeField,
    p: &ProblemSpec,
    grid: &Grid,
) -> Result<AprioriReport, Error> {
    if mu.grid() != grid {
        return Err(ParabolicError::ShapeMismatch.into());
    }
    Ok(AprioriReport {
        d: d_value(mu, p.coupling.alpha),
        ..apriori_exponents(p.coupling.alpha, grid.dim())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_formulas() {
        assert_eq!(t_star(1, 0.5, 1.0), Some(2.0));
        assert_eq!(t_star(1, -0.1, 1.0), None);
        assert_eq!(t_hat(0.5, 1.0, 1.0), Some(2.0));
        assert!((t_hat(1.0, 1.0, 4.0).unwrap() - 8f64.sqrt()).abs() < 1e-15);
        assert_eq!(t_hat(0.0, 1.0, 1.0), None);
    }

    #[test]
    fn exponent_bookkeeping_for_alpha_two() {
        let r = apriori_exponents(2.0, 1);
        assert!((r.two_over_q - 0.6).abs() < 1e-15);
        assert!((r.q - 10.0 / 3.0).abs() < 1e-14);
        assert!((r.delta_exponent - 1.2).abs() < 1e-14);
        assert!((r.beta - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_density_has_zero_d() {
        let p = ProblemSpec::gaussian_1d(1.0, 2.0, 1.0);
        let g = Grid::new(1, 5.0, 11, 4, 1.0).unwrap();
        let r = compute_apriori(&SpaceTimeField::zeros(g), &p, &g).unwrap();
        assert_eq!(r.d, 0.0);
    }

    #[test]
    fn no_certificate_without_coupling() {
        let p = ProblemSpec::gaussian_1d(0.0, 2.0, 1.0);
        let g = Grid::new(1, 12.0, 241, 1, 1.0).unwrap();
        let c = compute_nonexistence_certificate(&p, &g, false).unwrap();
        assert!(c.e0 < 0.0);
        assert!(c.t_star.is_none());
    }
}
