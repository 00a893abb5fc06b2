mod common;

use common::{model, signal};

use hardy_lab::atomic::{
    atom_hp_norm, bump_atom, level_sets, reconstruct, validate_atom, AtomKind, DecomposeConfig, Pipeline, REPRESENTATION_TOL,
};
use hardy_lab::fixtures;
use hardy_lab::maximal::{grand_maximal, radial_maximal, Dictionary, TGrid};
use hardy_lab::{MeasureMode, PointSet, Profile};

#[test]
fn level_masks_match_direct_thresholding() {
    let (space, op) = model("P8");
    let grid = TGrid::for_space(&space);
    let field = grand_maximal(&op, &space, &signal(40, 8), &Dictionary::standard(6).unwrap(), &grid).unwrap().values;
    let levels = level_sets(&space, &field, 0.7, 1.0, (-3, 4), 0.0).unwrap();
    assert!(levels.omega(levels.r_min).is_full());
    for r in levels.levels().skip(1) {
        let direct = PointSet::from_mask(field.iter().map(|&v| v > 2f64.powi(r)).collect());
        assert_eq!(levels.omega(r), &direct, "r={r}");
        assert!(levels.omega(r).is_subset(levels.omega(r - 1)));
    }
    let top = field.iter().copied().fold(0.0, f64::max);
    assert!(2f64.powi(levels.r_max) < top && 2f64.powi(levels.r_max + 1) >= top);
}

#[test]
fn level_sets_partition_every_scale() {
    let (space, op) = fixtures::path(16).build().unwrap();
    let grid = TGrid::for_space(&space);
    let field = grand_maximal(&op, &space, &signal(41, 16), &Dictionary::standard(6).unwrap(), &grid).unwrap().values;
    let levels = level_sets(&space, &field, 0.7, 1.0, (-4, 5), 1e-12).unwrap();
    assert!(levels.partition_check().exact());
    for k in levels.k_lo..=levels.k_hi {
        let mut seen = PointSet::empty(16);
        for r in levels.levels() {
            let e = levels.e_rk(r, k);
            assert!(!e.intersects(&seen), "k={k} r={r}");
            assert!(e.is_subset(levels.omega(r)));
            seen = seen.union(e);
        }
        // at scales below the resolution every point of Ω_{r_min} is eligible
        if 2.0 * levels.tau * 2f64.powi(-k) < space.resolution() {
            assert!(seen.is_full(), "k={k}");
        }
    }
}

#[test]
fn enlarging_the_dictionary_never_shrinks_level_sets() {
    let (space, op) = model("C16");
    let grid = TGrid::for_space(&space);
    let f = signal(42, 16);
    let mut small = Dictionary::empty(6);
    small.push(Profile::gaussian()).unwrap();
    let big = Dictionary::standard(6).unwrap();
    let lo = grand_maximal(&op, &space, &f, &small, &grid).unwrap().values;
    let hi = grand_maximal(&op, &space, &f, &big, &grid).unwrap().values;
    assert!(hi.iter().zip(&lo).all(|(a, b)| a >= b));
    let (l_lo, l_hi) =
        (level_sets(&space, &lo, 0.7, 1.0, (0, 2), 0.0).unwrap(), level_sets(&space, &hi, 0.7, 1.0, (0, 2), 0.0).unwrap());
    assert!(l_hi.r_max >= l_lo.r_max);
    for r in (l_lo.r_min.max(l_hi.r_min) + 1)..=l_lo.r_max {
        assert!(l_lo.omega(r).is_subset(l_hi.omega(r)), "r={r}");
    }
}

#[test]
fn sixteen_point_path_decomposition() {
    let (space, op) = fixtures::path(16).build().unwrap();
    let pipeline = Pipeline::new(&space, &op, &DecomposeConfig::new(0.8)).unwrap();
    for seed in [50, 51] {
        let f = signal(seed, 16);
        let dec = pipeline.decompose(&f).unwrap();
        assert!(dec.partition.exact());
        assert!(dec.levels.iter().all(|l| l.regroup_defect == 0.0));
        assert!((dec.identity.gap_l2 - dec.identity.budget_l2).abs() <= 1e-9);
        for t in &dec.terms {
            let b = t.atom.b.as_ref().unwrap();
            let lnb = op.apply_l_pow(b, t.atom.n);
            let scale = t.atom.a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let diff = lnb.iter().zip(&t.atom.a).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            assert!(diff < REPRESENTATION_TOL * scale);
            let rep = validate_atom(&space, &op, &t.atom);
            assert!(rep.passed(), "{rep:?}");
            let ball = space.ball(t.atom.ball.center, t.atom.ball.radius);
            assert!(t.atom.a.iter().enumerate().all(|(x, v)| *v == 0.0 || ball.contains(x)));
        }
        let out = dec.outstanding.as_ref().unwrap();
        assert_eq!(out.atom.kind, AtomKind::Outstanding);
        assert!(validate_atom(&space, &op, &out.atom).passed());
    }
}

#[test]
fn coefficients_follow_the_level_budget_identity() {
    let (space, op) = model("C16");
    let pipeline = Pipeline::new(&space, &op, &DecomposeConfig::new(0.7)).unwrap();
    let dec = pipeline.decompose(&signal(60, 16)).unwrap();
    let p = dec.p;
    for level in &dec.levels {
        let terms: Vec<_> = dec.terms.iter().filter(|t| t.atom.level == Some(level.r)).collect();
        assert_eq!(terms.len(), level.atoms);
        let lhs: f64 = terms.iter().map(|t| t.lambda.abs().powf(p)).sum();
        let masses: f64 = terms.iter().map(|t| t.atom.ball_mass).sum();
        let rhs = dec.c_sharp.powf(p) * 2f64.powf(p * level.r as f64) * masses;
        assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(f64::MIN_POSITIVE), "r={}", level.r);
    }
    assert!(dec.regular_budget <= dec.budget_bound());
}

#[test]
fn top_eigenvector_reconstructs_within_truncation_budget() {
    let (space, op) = model("P8");
    let f: Vec<f64> = op.eigenvectors().column(7).iter().copied().collect();
    let dec = Pipeline::new(&space, &op, &DecomposeConfig::new(1.0)).unwrap().decompose(&f).unwrap();
    assert!(dec.residual_norms.l2 <= dec.identity.budget_l2 + 1e-9);
    assert!(dec.residual_norms.relative_l2 < 1e-2);
    let mut shuffled = dec.terms.clone();
    shuffled.reverse();
    let a = reconstruct(8, &dec.terms, dec.outstanding.as_ref());
    let b = reconstruct(8, &shuffled, dec.outstanding.as_ref());
    let scale = f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() <= 1e-12 * scale));
    assert!(reconstruct(8, &[], None).iter().all(|&v| v == 0.0));
}

#[test]
fn outstanding_atom_norm_on_uniform_path() {
    let (space, op) = fixtures::path(8).with_measure(MeasureMode::Uniform).build().unwrap();
    assert_eq!(space.total_mass(), 8.0);
    let dec = Pipeline::new(&space, &op, &DecomposeConfig::new(1.0)).unwrap().decompose(&signal(70, 8)).unwrap();
    let out = &dec.outstanding.as_ref().unwrap().atom;
    let grid = TGrid::for_space(&space);
    let norm = atom_hp_norm(&op, out, &grid).unwrap();
    let sup = out.a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let field = radial_maximal(&op, &out.a, &Profile::gaussian(), &grid).unwrap();
    let amplification = field.values.iter().fold(0.0f64, |m, &v| m.max(v)) / sup;
    assert!(norm.is_finite() && norm > 0.0);
    assert!(norm <= 8.0 * sup * amplification * (1.0 + 1e-12));
    assert!(sup <= 1.0 / 8.0 * (1.0 + 1e-12));
}

#[test]
fn atom_norm_is_stable_under_radius_doubling() {
    let (space, op) = fixtures::path(64).build().unwrap();
    let grid = TGrid::for_space(&space);
    for r in [4.0, 8.0, 12.0] {
        let small = bump_atom(&space, &op, 32, r, 1, 0.8).unwrap();
        let large = bump_atom(&space, &op, 32, 2.0 * r, 1, 0.8).unwrap();
        let (a, b) = (atom_hp_norm(&op, &small, &grid).unwrap(), atom_hp_norm(&op, &large, &grid).unwrap());
        assert!((0.1..=10.0).contains(&(b / a)), "r={r}: {a} {b}");
        assert!(validate_atom(&space, &op, &small).passed() && validate_atom(&space, &op, &large).passed());
    }
}

#[test]
fn mutated_atoms_fail_validation() {
    let (space, op) = fixtures::path(16).build().unwrap();
    let dec = Pipeline::new(&space, &op, &DecomposeConfig::new(1.0)).unwrap().decompose(&signal(80, 16)).unwrap();
    let mut atom = dec.terms.iter().map(|t| t.atom.clone()).find(|a| {
        let ball = space.ball(a.ball.center, a.ball.radius);
        !ball.is_full()
    }).expect("a localized atom");
    let ball = space.ball(atom.ball.center, atom.ball.radius);
    let outside = (0..16).find(|&x| !ball.contains(x)).unwrap();
    atom.b.as_mut().unwrap()[outside] = 1e-6;
    assert!(!validate_atom(&space, &op, &atom).support_ok);
}
