use mfg_core::grid::{Grid, SpaceTimeField};
use mfg_core::ops::{bernoulli, flux_divergence, integrate, FaceDrift, Weight};
use mfg_core::par::{map_collect, Execution};
use mfg_core::parabolic::{
    solve_backward_heat, solve_fokker_planck, BackwardHeatProblem, DriftSource, FokkerPlanckProblem,
};
use mfg_core::problem::GaussianMixture;
use mfg_core::solver::{hopf_cole, inverse_hopf_cole};
use mfg_core::{CouplingSpec, TimeScheme};
use proptest::prelude::*;

fn scheme() -> impl Strategy<Value = TimeScheme> {
    prop_oneof![
        Just(TimeScheme::ImplicitEuler),
        Just(TimeScheme::CrankNicolson)
    ]
}

fn sampled(mixture: &GaussianMixture, grid: &Grid) -> Vec<f64> {
    (0..grid.n_nodes())
        .map(|k| mixture.eval(&grid.point(k)[..grid.dim()]).0)
        .collect()
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let inner: f64 = (1..n)
        .map(|i| f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 })
        .sum();
    (f(a) + f(b) + inner) * h / 3.0
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn fokker_planck_conserves_mass_and_sign(
        drift in prop::collection::vec(-8.0..8.0f64, 33),
        mean in -3.0..3.0f64,
        std in 0.3..2.0f64,
        scheme in scheme(),
    ) {
        let grid = Grid::new(1, 6.0, 33, 40, 0.5).unwrap();
        let faces: Vec<FaceDrift> = (0..=grid.nt())
            .map(|n| FaceDrift::from_nodal(&vec![drift.iter().map(|b| b * (1.0 + 0.1 * n as f64)).collect()], &grid))
            .collect();
        let initial = sampled(&GaussianMixture::gaussian(vec![mean], std), &grid);
        let mass0 = integrate(&initial, &grid, Weight::One);
        let mu = solve_fokker_planck(
            &FokkerPlanckProblem { drift: DriftSource::Faces(&faces), initial },
            &grid,
            scheme,
        )
        .unwrap();
        for n in 0..=grid.nt() {
            let mass = integrate(mu.slice(n), &grid, Weight::One);
            prop_assert!(((mass - mass0) / mass0).abs() < 1e-13);
        }
        if scheme == TimeScheme::ImplicitEuler {
            prop_assert!(mu.min() >= 0.0);
        } else {
            prop_assert!(mu.min() >= -1e-12);
        }
    }

    #[test]
    fn flux_divergence_integrates_to_zero(
        bx in prop::collection::vec(-5.0..5.0f64, 17 * 17),
        by in prop::collection::vec(-5.0..5.0f64, 17 * 17),
        density in prop::collection::vec(0.0..3.0f64, 17 * 17),
    ) {
        let grid = Grid::new(2, 3.0, 17, 1, 1.0).unwrap();
        let drift = FaceDrift::from_nodal(&vec![bx, by], &grid);
        let div = flux_divergence(&drift, &density, &grid);
        let total = integrate(&div, &grid, Weight::One);
        let scale: f64 = div.iter().map(|v| v.abs()).sum::<f64>() * grid.dx() * grid.dx();
        prop_assert!(total.abs() <= 1e-12 * scale.max(1.0));
    }

    #[test]
    fn backward_heat_stays_above_its_lower_barrier(
        coeff in prop::collection::vec(-2.0..2.0f64, 41),
        terminal in prop::collection::vec(0.1..2.0f64, 41),
    ) {
        let grid = Grid::new(1, 5.0, 41, 30, 0.75).unwrap();
        let coefficient = SpaceTimeField::from_fn(grid, |n, k| coeff[k] * (1.0 - 0.2 * n as f64 / 30.0));
        let lower = coeff.iter().copied().fold(0.0, f64::min);
        let floor = terminal.iter().copied().fold(f64::INFINITY, f64::min);
        let w = solve_backward_heat(
            &BackwardHeatProblem { coefficient, terminal },
            &grid,
            TimeScheme::ImplicitEuler,
        )
        .unwrap();
        prop_assert!(w.min() >= (lower * grid.horizon()).exp() * floor * (1.0 - 1e-12));
    }

    #[test]
    fn coupling_antiderivative_matches_quadrature(
        sigma in 0.0..50.0f64,
        alpha in 0.2..4.0f64,
        m in 0.0..3.0f64,
    ) {
        let c = CouplingSpec::new(sigma, alpha).unwrap();
        // Substituting s = t^2 keeps the integrand smooth at zero for α < 1.
        let quad = simpson(|t| 2.0 * t * c.f(t * t), 0.0, m.sqrt(), 2000);
        prop_assert!((c.antiderivative(m) - quad).abs() <= 1e-8 * (1.0 + quad.abs()));
    }

    #[test]
    fn hopf_cole_roundtrip(values in prop::collection::vec(-30.0..30.0f64, 3 * 9)) {
        let grid = Grid::new(1, 2.0, 9, 2, 1.0).unwrap();
        let u = SpaceTimeField::from_fn(grid, |n, k| values[n * 9 + k]);
        let back = inverse_hopf_cole(&hopf_cole(&u)).unwrap();
        for (a, b) in u.values().iter().zip(back.values()) {
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn bernoulli_reflection(z in -40.0..40.0f64) {
        prop_assert!((bernoulli(-z) - bernoulli(z) - z).abs() <= 1e-12 * (1.0 + z.abs()));
        prop_assert!(bernoulli(z) > 0.0);
    }

    #[test]
    fn mixtures_are_normalised(
        weights in prop::collection::vec(0.1..5.0f64, 1..4),
        seed in -2.0..2.0f64,
    ) {
        let k = weights.len();
        let means = (0..k).map(|i| vec![seed + i as f64]).collect();
        let stds = (0..k).map(|i| 0.5 + 0.25 * i as f64).collect();
        let mix = GaussianMixture::new(weights, means, stds).unwrap();
        prop_assert!((mix.weights().iter().sum::<f64>() - 1.0).abs() < 1e-14);
        let grid = Grid::new(1, 14.0, 1401, 1, 1.0).unwrap();
        let mass = integrate(&sampled(&mix, &grid), &grid, Weight::One);
        prop_assert!((mass - 1.0).abs() < 1e-10);
    }

    #[test]
    fn parallel_map_preserves_order(items in prop::collection::vec(any::<i32>(), 0..200), threads in 1usize..4) {
        let f = |x: &i32| i64::from(*x) * 3 - 1;
        let seq = map_collect(&items, Execution::Sequential, f);
        let par = map_collect(&items, Execution::ParallelWith { threads }, f);
        prop_assert_eq!(seq, par);
    }
}
