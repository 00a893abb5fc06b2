//! Stein's function `η` on `[1, ∞)` and its Laplace transform `Φ`.
//!
//! With `u = (s−1)^{1/4}`, `η(s) = e/(πs) · e^{−u/√2} sin(u/√2)`: every moment
//! `∫ s^k η`, `k ≥ 1`, vanishes while `∫ η = 1`. All integrals are taken in the
//! variable `u`, where the integrand is smooth and decays like `e^{−u/√2}`.

use std::f64::consts::{E, FRAC_1_SQRT_2, PI};

use crate::quadrature::{integrate, QuadratureNotConverged};

/// Integration window in `u`; the weighted tail beyond it is below `1e-100`.
const U_END: f64 = 480.0;
const PANEL: f64 = 8.0;

pub fn stein_eta(s: f64) -> f64 {
    assert!(s >= 1.0, "η is defined on [1, ∞)");
    let u = (s - 1.0).powf(0.25);
    E / (PI * s) * (-u * FRAC_1_SQRT_2).exp() * (u * FRAC_1_SQRT_2).sin()
}

/// `∫₁^∞ w(s) η(s) ds`, integrated panel by panel in `u` and stopped once a panel
/// contributes less than `1e-12` of the running magnitude.
fn integrate_against(w: impl Fn(f64) -> f64, tol: f64) -> Result<f64, QuadratureNotConverged> {
    let f = |u: f64| {
        let u2 = u * u;
        let s = 1.0 + u2 * u2;
        E / (PI * s) * (-u * FRAC_1_SQRT_2).exp() * (u * FRAC_1_SQRT_2).sin() * 4.0 * u2 * u * w(s)
    };
    let mut total = 0.0;
    let mut scale = 0.0f64;
    let mut a = 0.0;
    while a < U_END {
        let b = a + PANEL;
        let abs_part = integrate(|u| f(u).abs(), a, b, tol, 1e-8)?;
        let part = integrate(f, a, b, tol.max(1e-15 * abs_part), 1e-13)?;
        total += part;
        scale = scale.max(abs_part);
        if abs_part < 1e-12 * scale && a > 0.0 {
            break;
        }
        a = b;
    }
    Ok(total)
}

/// `∫₁^∞ s^k η(s) ds`.
pub fn stein_moment(k: u32) -> Result<f64, QuadratureNotConverged> {
    integrate_against(|s| s.powi(k as i32), 1e-12)
}

/// `Φ(λ) = ∫₁^∞ η(s) e^{−s|λ|} ds`.
pub fn stein_phi(lambda: f64) -> Result<f64, QuadratureNotConverged> {
    let l = lambda.abs();
    integrate_against(|s| (-s * l).exp(), 1e-13)
}

/// `Φ^{(k)}(λ) = ∫₁^∞ (−s)^k η(s) e^{−sλ} ds` for `λ > 0`.
pub fn stein_phi_derivative(lambda: f64, k: u32) -> Result<f64, QuadratureNotConverged> {
    let l = lambda.abs();
    let sign = if k % 2 == 1 && lambda < 0.0 { -1.0 } else { 1.0 };
    integrate_against(|s| (-s).powi(k as i32) * (-s * l).exp(), 1e-13).map(|v| sign * v)
}
