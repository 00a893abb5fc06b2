mod common;

use std::sync::OnceLock;

use hardy_lab::atomic::level_sets;
use hardy_lab::maximal::{chain_check, hl_maximal, hp_quasinorm, maximal_triple, radial_maximal, Flavor, TGrid};
use hardy_lab::{MetricMeasureSpace, Profile, SpectralOperator};
use proptest::prelude::*;

fn models() -> &'static [(MetricMeasureSpace, SpectralOperator)] {
    static CELL: OnceLock<Vec<(MetricMeasureSpace, SpectralOperator)>> = OnceLock::new();
    CELL.get_or_init(|| ["P8", "C16", "G8x8"].iter().map(|n| common::model(n)).collect())
}

fn profiles() -> impl Strategy<Value = Profile> {
    prop_oneof![Just(Profile::gaussian()), Just(Profile::exponential()), Just(Profile::smooth_exponential())]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn radial_field_is_homogeneous_and_subadditive(
        which in 0usize..3,
        seed in any::<u64>(),
        c in -5.0f64..5.0,
        phi in profiles(),
    ) {
        let (space, op) = &models()[which];
        let n = space.len();
        let f = common::signal(seed, n);
        let g = common::signal(seed ^ 0x9e37, n);
        let grid = TGrid::for_space(space);
        let mf = radial_maximal(op, &f, &phi, &grid).unwrap().values;
        let mg = radial_maximal(op, &g, &phi, &grid).unwrap().values;
        let cf: Vec<f64> = f.iter().map(|v| c * v).collect();
        let sum: Vec<f64> = f.iter().zip(&g).map(|(a, b)| a + b).collect();
        let mcf = radial_maximal(op, &cf, &phi, &grid).unwrap().values;
        let msum = radial_maximal(op, &sum, &phi, &grid).unwrap().values;
        for x in 0..n {
            prop_assert!((mcf[x] - c.abs() * mf[x]).abs() <= 1e-12 * (1.0 + mcf[x]));
            prop_assert!(msum[x] <= (mf[x] + mg[x]) * (1.0 + 1e-12) + 1e-14);
            prop_assert!(mf[x] >= 0.0);
        }
    }

    #[test]
    fn hardy_littlewood_is_homogeneous_and_subadditive(which in 0usize..3, seed in any::<u64>(), c in -5.0f64..5.0) {
        let (space, _) = &models()[which];
        let n = space.len();
        let f = common::signal(seed, n);
        let g = common::signal(seed.wrapping_add(1), n);
        let m = |v: &[f64]| hl_maximal(space, v, 1.0).unwrap().values;
        let cf: Vec<f64> = f.iter().map(|v| c * v).collect();
        let sum: Vec<f64> = f.iter().zip(&g).map(|(a, b)| a + b).collect();
        let (mf, mg, mcf, msum) = (m(&f), m(&g), m(&cf), m(&sum));
        for x in 0..n {
            prop_assert!((mcf[x] - c.abs() * mf[x]).abs() <= 1e-12 * (1.0 + mcf[x]));
            prop_assert!(msum[x] <= (mf[x] + mg[x]) * (1.0 + 1e-12));
        }
    }

    #[test]
    fn quasinorm_satisfies_the_p_triangle_inequality(
        which in 0usize..3,
        seed in any::<u64>(),
        p in 0.3f64..=1.0,
        heat in any::<bool>(),
    ) {
        let (space, op) = &models()[which];
        let n = space.len();
        let f = common::signal(seed, n);
        let g = common::signal(!seed, n);
        let sum: Vec<f64> = f.iter().zip(&g).map(|(a, b)| a + b).collect();
        let flavor = if heat { Flavor::Heat } else { Flavor::Poisson };
        let grid = TGrid::for_space(space);
        let h = |v: &[f64]| hp_quasinorm(op, v, p, &grid, &flavor).unwrap().powf(p);
        prop_assert!(h(&sum) <= (h(&f) + h(&g)) * (1.0 + 1e-12));
    }

    #[test]
    fn refining_the_grid_never_lowers_a_field(which in 0usize..3, seed in any::<u64>(), phi in profiles()) {
        let (space, op) = &models()[which];
        let f = common::signal(seed, space.len());
        let grid = TGrid::for_space(space);
        let coarse = radial_maximal(op, &f, &phi, &grid).unwrap().values;
        let fine = radial_maximal(op, &f, &phi, &grid.refined()).unwrap().values;
        prop_assert!(fine.iter().zip(&coarse).all(|(a, b)| a >= b));
    }

    #[test]
    fn maximal_chain_has_no_violations(
        which in 0usize..3,
        seed in any::<u64>(),
        a in 1.0f64..4.0,
        gamma in 0.5f64..12.0,
        phi in profiles(),
    ) {
        let (space, op) = &models()[which];
        let f = common::signal(seed, space.len());
        let triple = maximal_triple(op, space, &f, &phi, a, gamma, &TGrid::for_space(space)).unwrap();
        prop_assert_eq!(chain_check(&triple).violations, 0);
    }

    #[test]
    fn doubling_bound_holds_for_random_radii(which in 0usize..3, x in 0usize..64, y in 0usize..64, r in 0.05f64..20.0) {
        let (space, _) = &models()[which];
        let (x, y) = (x % space.len(), y % space.len());
        let g = space.geometry_report();
        prop_assert!(space.ball_mass(x, 2.0 * r) <= g.c0 * space.ball_mass(x, r) * (1.0 + 1e-12));
        let rhs = g.c0 * (1.0 + space.dist(x, y) / r).powf(g.d) * space.ball_mass(y, r);
        prop_assert!(space.ball_mass(x, r) <= 1.01 * rhs);
    }

    #[test]
    fn level_sets_partition_exactly(
        which in 0usize..3,
        field in prop::collection::vec(1e-3f64..1e3, 64),
        p in 0.3f64..=1.0,
        tau in 1.0f64..3.0,
    ) {
        let (space, _) = &models()[which];
        let field = &field[..space.len()];
        let levels = level_sets(space, field, p, tau, (-3, 4), 1e-12).unwrap();
        prop_assert!(levels.partition_check().exact());
        for r in levels.levels().skip(1) {
            prop_assert!(levels.omega(r).is_subset(levels.omega(r - 1)));
        }
    }

    #[test]
    fn spectral_calculus_composes(which in 0usize..3, t in 0.05f64..4.0, s in 0.05f64..4.0) {
        let (_, op) = &models()[which];
        let mu = op.mu();
        let ps = op.heat_kernel(s).unwrap();
        let pt = op.heat_kernel(t).unwrap();
        let pst = op.heat_kernel(s + t).unwrap();
        prop_assert!((ps.compose(&pt, mu) - &pst.entries).amax() < 1e-9);
        prop_assert!(pst.entries.iter().all(|&v| v >= -1e-12));
    }
}
