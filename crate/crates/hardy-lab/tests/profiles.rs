use hardy_lab::profiles::{atom_order, lp_pair, required_vanishing, rychkov_pair, stein_moment, LpPair, Profile};

fn lambda_grid() -> impl Iterator<Item = f64> {
    (0..=400).map(|i| i as f64 / 100.0)
}

fn rychkov_residual(phi: &Profile, n: u32, terms: i32) -> f64 {
    let (psi0, psi) = rychkov_pair(phi, n).unwrap();
    lambda_grid()
        .map(|l| {
            let mut s = psi0.eval(l) * phi.eval(l);
            for k in 1..=terms {
                let a = 2f64.powi(-k) * l;
                s += psi.eval(a) * (phi.eval(a) - phi.eval(2.0 * a));
            }
            (s - 1.0).abs()
        })
        .fold(0.0, f64::max)
}

#[test]
fn admissible_profiles_are_normalized_even_and_flat() {
    for m in [2, 4, 6] {
        let phi = Profile::admissible(m).unwrap();
        assert!((phi.eval(0.0) - 1.0).abs() < 1e-10);
        let d = phi.derivatives(0.0, m);
        assert!(d[1..].iter().all(|v| v.abs() < 1e-6), "m={m}: {d:?}");
        let bl = phi.bandlimited().unwrap();
        assert!(bl.vanishing_certificate().iter().all(|v| v.abs() < 1e-6));
        assert!(bl.fourier_mass_outside(1.0) < 1e-6);
        for u in [0.3, 1.7, 12.5, 200.0] {
            assert_eq!(phi.eval(u), phi.eval(-u));
        }
    }
}

#[test]
fn closed_form_profiles_are_even() {
    for f in [Profile::gaussian(), Profile::exponential(), Profile::smooth_exponential(), Profile::stein()] {
        for u in [0.1, 0.9, 3.0] {
            assert_eq!(f.eval(u), f.eval(-u), "{}", f.name());
        }
    }
}

#[test]
fn admissible_profile_is_grid_converged() {
    let coarse = Profile::admissible_with(4, 64).unwrap();
    let fine = Profile::admissible_with(4, 128).unwrap();
    let diff = (0..=4000).map(|i| i as f64 * 0.05).map(|u| (coarse.eval(u) - fine.eval(u)).abs()).fold(0.0, f64::max);
    assert!(diff < 1e-8, "{diff:e}");
}

#[test]
fn vanishing_orders_from_dimension_and_exponent() {
    assert_eq!((atom_order(1.0, 1.0), required_vanishing(1.0, 1.0)), (1, 6));
    assert_eq!((atom_order(1.0, 0.5), required_vanishing(1.0, 0.5)), (2, 8));
    let pair = lp_pair(&Profile::admissible(6).unwrap(), 1.0, 1.0).unwrap();
    assert_eq!(pair.k, 6);
    assert_eq!(pair.psi.eval(0.0), 0.0);
    assert!(lp_pair(&Profile::admissible(4).unwrap(), 1.0, 1.0).is_err());
    let d = pair.psi.derivatives(0.0, pair.k - 1);
    assert!(d.iter().all(|v| v.abs() < 1e-6), "{d:?}");
}

#[test]
fn littlewood_paley_sums_telescope() {
    let pair = LpPair::from_phi(&Profile::admissible(6).unwrap());
    for l in lambda_grid() {
        let head = pair.phi.eval(l).powi(2);
        let psi = pair.psi.eval(l) * pair.psi_tilde.eval(l);
        assert!((psi - (head - pair.phi.eval(2.0 * l).powi(2))).abs() < 1e-12);
        for j in 0..4 {
            let jj = 12;
            let mut s = pair.phi.eval(2f64.powi(-j) * l).powi(2);
            for k in (j + 1)..=jj {
                let a = 2f64.powi(-k) * l;
                s += pair.psi.eval(a) * pair.psi_tilde.eval(a);
            }
            let want = pair.phi.eval(2f64.powi(-jj) * l).powi(2);
            assert!((s - want).abs() < 1e-12, "λ={l} j={j}: {:e}", s - want);
        }
    }
}

#[test]
fn dilation_bound_on_profile_norms() {
    for f in [Profile::gaussian(), Profile::admissible(4).unwrap()] {
        for n in [0, 2, 4] {
            let base = f.norm_n(n).unwrap();
            for t in [0.5, 2.0] {
                let dilated = f.dilate(t).norm_n(n).unwrap();
                assert!(dilated <= (t + 1.0 / t).powi(n as i32) * base * (1.0 + 1e-9), "{} N={n} t={t}", f.name());
            }
        }
    }
}

#[test]
fn gaussian_norm_matches_fine_grid() {
    assert_eq!(Profile::gaussian().norm_n(0).unwrap(), 1.0);
    assert_eq!(Profile::constant(1.0).norm_n(0).unwrap(), 1.0);
    let oracle = (0..=200_000)
        .map(|i| i as f64 * 5e-5)
        .map(|u| {
            let g = (-u * u).exp();
            let d = [g, 2.0 * u * g, (4.0 * u * u - 2.0).abs() * g];
            (1.0 + u).powi(2) * d.iter().fold(0.0f64, |a, &b| a.max(b))
        })
        .fold(0.0, f64::max);
    let got = Profile::gaussian().norm_n(2).unwrap();
    assert!((got / oracle - 1.0).abs() < 0.01, "{got} vs {oracle}");
}

#[test]
fn rychkov_partition_of_unity() {
    let phi = Profile::admissible(6).unwrap();
    for n in [4, 8] {
        let r = rychkov_residual(&phi, n, 60);
        assert!(r < 1e-8, "N={n}: {r:e}");
        let (psi0, psi) = rychkov_pair(&phi, n).unwrap();
        assert!((psi0.eval(0.0) - 1.0).abs() < 1e-12);
        let d = psi.derivatives(0.0, n as usize);
        assert!(d.iter().all(|v| v.abs() < 1e-6), "N={n}: {d:?}");
    }
    assert!(rychkov_residual(&Profile::gaussian(), 4, 60) < 1e-8);
}

#[test]
fn stein_weight_moments() {
    assert!((stein_moment(0).unwrap() - 1.0).abs() < 1e-4);
    for k in 1..=3 {
        assert!(stein_moment(k).unwrap().abs() < 1e-4, "k={k}");
    }
    assert!((Profile::stein().eval(0.0) - 1.0).abs() < 1e-4);
}
