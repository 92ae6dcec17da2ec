//! The kernel `D`, the Lagrangian `L = max(0, D)`, and their derivatives.
//!
//! `D` depends on two points only through `t = ⟨x, y⟩ = cos θ`:
//!
//! ```text
//! D(θ) = ¼ (1 + cos θ)(2 − τ²(1 − cos θ))
//! ```
//!
//! It equals 1 at θ = 0, vanishes at `θ_max = arccos(1 − 2/τ²)` and at π,
//! is positive in between 0 and `θ_max` and negative beyond.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::geometry::{angle_between, SpherePoint};
use crate::harmonics::{degree, real_harmonics, N_HARMONICS};
use crate::tolerances::{ANGLE_DOMAIN_TOL, SINGULAR_SIN};

/// τ together with the constants derived from it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelParams {
    tau: f64,
    theta_max: f64,
    nu: [f64; 3],
}

impl ModelParams {
    pub fn new(tau: f64) -> Result<Self> {
        let theta_max = theta_max(tau)?;
        Ok(ModelParams {
            tau,
            theta_max,
            nu: harmonic_coefficients(tau),
        })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn theta_max(&self) -> f64 {
        self.theta_max
    }

    /// Expansion coefficients `(ν₀, ν₁, ν₂)`.
    pub fn nu(&self) -> [f64; 3] {
        self.nu
    }

    /// Replaces the expansion coefficients used by [`d_harmonic`].
    ///
    /// Only meant for fault injection: the closed-form kernel is unaffected, so
    /// the harmonic identity breaks whenever `nu` is wrong.
    pub fn with_nu_override(mut self, nu: [f64; 3]) -> Self {
        self.nu = nu;
        self
    }
}

/// Opening angle of the light cone, `arccos(1 − 2/τ²)`.
pub fn theta_max(tau: f64) -> Result<f64> {
    if !tau.is_finite() || tau < 1.0 {
        return Err(Error::InvalidTau(tau));
    }
    Ok((1.0 - 2.0 / (tau * tau)).clamp(-1.0, 1.0).acos())
}

/// `ν₀ = ½ − τ²/6`, `ν₁ = 1/6`, `ν₂ = τ²/30`.
pub fn harmonic_coefficients(tau: f64) -> [f64; 3] {
    let t2 = tau * tau;
    [0.5 - t2 / 6.0, 1.0 / 6.0, t2 / 30.0]
}

fn check_angle(theta: f64) -> Result<f64> {
    if !(-ANGLE_DOMAIN_TOL..=PI + ANGLE_DOMAIN_TOL).contains(&theta) {
        return Err(Error::Domain {
            what: "theta",
            value: theta,
        });
    }
    Ok(theta.clamp(0.0, PI))
}

/// `D` as a polynomial in the inner product `t = ⟨x, y⟩`.
#[inline]
pub fn d_of_inner(params: &ModelParams, t: f64) -> f64 {
    0.25 * (1.0 + t) * (2.0 - params.tau * params.tau * (1.0 - t))
}

/// `dD/dt = ½ (1 + τ² t)`; relates to [`d_prime`] by `D′(θ) = −sin θ · dD/dt`.
#[inline]
pub fn d_of_inner_derivative(params: &ModelParams, t: f64) -> f64 {
    0.5 * (1.0 + params.tau * params.tau * t)
}

pub fn d_of_angle(params: &ModelParams, theta: f64) -> Result<f64> {
    let theta = check_angle(theta)?;
    let c = theta.cos();
    Ok(0.25 * (1.0 + c) * (2.0 - params.tau * params.tau * (1.0 - c)))
}

/// `D′(θ) = −½ (1 + τ² cos θ) sin θ`.
pub fn d_prime(params: &ModelParams, theta: f64) -> Result<f64> {
    let theta = check_angle(theta)?;
    let t2 = params.tau * params.tau;
    Ok(-0.5 * (1.0 + t2 * theta.cos()) * theta.sin())
}

/// `D″(θ) = −½ (cos θ − τ² + 2τ² cos² θ)`.
pub fn d_double_prime(params: &ModelParams, theta: f64) -> Result<f64> {
    let theta = check_angle(theta)?;
    let t2 = params.tau * params.tau;
    let c = theta.cos();
    Ok(-0.5 * (c - t2 + 2.0 * t2 * c * c))
}

/// Laplace–Beltrami operator of `D(p, ·)` at angular distance θ,
/// `−½ (2 cos θ − τ² + 3τ² cos² θ)`.
pub fn laplacian_d(params: &ModelParams, theta: f64) -> Result<f64> {
    let theta = check_angle(theta)?;
    let t2 = params.tau * params.tau;
    let c = theta.cos();
    Ok(-0.5 * (2.0 * c - t2 + 3.0 * t2 * c * c))
}

/// `D(x, y)` from the inner-product form.
#[inline]
pub fn kernel(params: &ModelParams, x: &SpherePoint, y: &SpherePoint) -> f64 {
    d_of_inner(params, x.dot(y).clamp(-1.0, 1.0))
}

#[inline]
pub fn lagrangian(params: &ModelParams, x: &SpherePoint, y: &SpherePoint) -> f64 {
    kernel(params, x, y).max(0.0)
}

/// `D(x, y)` rebuilt from `4π Σ_l ν_l Σ_m Y_lm(x) Y_lm(y)` in the real basis.
pub fn d_harmonic(params: &ModelParams, x: &SpherePoint, y: &SpherePoint) -> f64 {
    let hx = real_harmonics(x);
    let hy = real_harmonics(y);
    let mut per_degree = [0.0; 3];
    for i in 0..N_HARMONICS {
        per_degree[degree(i)] += hx[i] * hy[i];
    }
    4.0 * PI
        * per_degree
            .iter()
            .zip(params.nu.iter())
            .map(|(s, nu)| s * nu)
            .sum::<f64>()
}

/// `d/dt D(γ(t), q)` at `t = 0` for a curve with `γ(0) = p` and
/// `γ′(0) = velocity`.
///
/// Computed as `D′(θ) · dθ/dt` with `dθ/dt = −⟨q, v⟩ / sin θ`. On the light
/// cone this reduces to `(τ² − 1)^{3/2}/τ² · ⟨q − p, v⟩ / √(1 − ⟨p, q⟩²)`.
pub fn directional_derivative(
    params: &ModelParams,
    p: &SpherePoint,
    velocity: [f64; 3],
    q: &SpherePoint,
) -> Result<f64> {
    let theta = angle_between(p, q);
    let sin = theta.sin();
    if sin < SINGULAR_SIN {
        return Err(Error::Singular(format!(
            "sin θ = {sin:e} between curve point and target"
        )));
    }
    let qv: f64 = q.coords().iter().zip(velocity.iter()).map(|(a, b)| a * b).sum();
    Ok(d_prime(params, theta)? * (-qv / sin))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_3};

    fn params(tau: f64) -> ModelParams {
        ModelParams::new(tau).unwrap()
    }

    #[test]
    fn d_of_angle_examples() {
        assert!((d_of_angle(&params(2.0), 0.0).unwrap() - 1.0).abs() < 1e-15);
        assert!(d_of_angle(&params(2f64.sqrt()), FRAC_PI_2).unwrap().abs() < 1e-15);
        assert!((d_of_angle(&params(1.0), FRAC_PI_2).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn angle_domain_is_enforced() {
        let p = params(2.0);
        assert!(d_of_angle(&p, -1e-13).is_ok());
        assert!(d_of_angle(&p, PI + 1e-13).is_ok());
        assert!(matches!(d_of_angle(&p, -1e-6), Err(Error::Domain { .. })));
        assert!(d_prime(&p, 4.0).is_err());
        assert!(d_double_prime(&p, f64::NAN).is_err());
        assert!(laplacian_d(&p, -0.1).is_err());
    }

    #[test]
    fn theta_max_examples() {
        assert!((theta_max(1.0).unwrap() - PI).abs() < 1e-15);
        assert!((theta_max(2f64.sqrt()).unwrap() - FRAC_PI_2).abs() < 1e-15);
        assert!((theta_max(2.0).unwrap() - FRAC_PI_3).abs() < 1e-15);
        assert!(matches!(theta_max(0.99), Err(Error::InvalidTau(_))));
        assert!(ModelParams::new(f64::INFINITY).is_err());
    }

    #[test]
    fn params_invariants() {
        for &tau in &[1.0, 1.5, 3f64.sqrt() - 1e-9, 3f64.sqrt() + 1e-9, 2.0, 4.0, 10.0] {
            let p = params(tau);
            assert!(d_of_angle(&p, p.theta_max()).unwrap().abs() < 1e-12);
            let [nu0, nu1, nu2] = p.nu();
            assert!(nu1 > 0.0 && nu2 > 0.0);
            assert_eq!(nu0 < 0.0, tau > 3f64.sqrt());
        }
        assert!((params(2.0).nu()[2] - 4.0 / 30.0).abs() < 1e-16);
    }

    #[test]
    fn derivative_examples() {
        assert_eq!(d_prime(&params(1.7), 0.0).unwrap(), 0.0);
        assert!((d_prime(&params(2.0), FRAC_PI_2).unwrap() + 0.5).abs() < 1e-15);
        assert!((d_double_prime(&params(1.0), 0.0).unwrap() + 1.0).abs() < 1e-15);
        assert!((laplacian_d(&params(2.0), 0.0).unwrap() + 5.0).abs() < 1e-14);
        assert!((laplacian_d(&params(2.0), FRAC_PI_2).unwrap() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn lagrangian_examples() {
        let x = SpherePoint::from_spherical(0.4, 1.1);
        for &tau in &[1.0, 2.0, 3.5] {
            let p = params(tau);
            assert!((lagrangian(&p, &x, &x) - 1.0).abs() < 1e-15);
            assert_eq!(lagrangian(&p, &x, &x.antipode()), 0.0);
        }
        let a = SpherePoint::new(1.0, 0.0, 0.0).unwrap();
        let b = SpherePoint::new(0.0, 1.0, 0.0).unwrap();
        assert_eq!(lagrangian(&params(2.0), &a, &b), 0.0);
        assert!((kernel(&params(2.0), &a, &b) + 0.5).abs() < 1e-15);
    }

    #[test]
    fn harmonic_form_at_north_pole() {
        let n = SpherePoint::north();
        for &tau in &[1.0, 1.9, 3.0] {
            assert!((d_harmonic(&params(tau), &n, &n) - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn light_cone_directional_derivative_closed_form() {
        let tau: f64 = 2.0;
        let p_ = params(tau);
        let p = SpherePoint::new(1.0, 0.0, 0.0).unwrap();
        let v = [0.0, 1.0, 0.0];
        let tm = p_.theta_max();
        let q = SpherePoint::new(tm.cos(), tm.sin(), 0.0).unwrap();
        let got = directional_derivative(&p_, &p, v, &q).unwrap();
        let qp = [q.coords()[0] - 1.0, q.coords()[1], q.coords()[2]];
        let proj = qp[1];
        let expected = (tau * tau - 1.0).powf(1.5) / (tau * tau) * proj
            / (1.0 - p.dot(&q).powi(2)).sqrt();
        assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
    }

    #[test]
    fn directional_derivative_vanishes_for_orthogonal_offset() {
        let p_ = params(2.0);
        let p = SpherePoint::new(1.0, 0.0, 0.0).unwrap();
        let q = SpherePoint::new(0.3, 0.0, (1.0f64 - 0.09).sqrt()).unwrap();
        let d = directional_derivative(&p_, &p, [0.0, 1.0, 0.0], &q).unwrap();
        assert!(d.abs() < 1e-15);
    }

    #[test]
    fn directional_derivative_rejects_singular_pairs() {
        let p_ = params(2.0);
        let p = SpherePoint::new(1.0, 0.0, 0.0).unwrap();
        let v = [0.0, 1.0, 0.0];
        assert!(matches!(
            directional_derivative(&p_, &p, v, &p),
            Err(Error::Singular(_))
        ));
        assert!(directional_derivative(&p_, &p, v, &p.antipode()).is_err());
    }
}
