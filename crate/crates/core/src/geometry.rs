//! Points on the unit sphere, causal classification of pairs, caps, and the
//! Fibonacci lattice used for quadrature and cell partitions.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{kernel, ModelParams};
use crate::tolerances::{CAP_MARGIN, LIGHTCONE_TOL};

/// A unit vector in ℝ³.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 3]", into = "[f64; 3]")]
pub struct SpherePoint([f64; 3]);

impl SpherePoint {
    /// Normalizes `(x, y, z)` onto the sphere.
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        Self::from_vector([x, y, z])
    }

    pub fn from_vector(v: [f64; 3]) -> Result<Self> {
        let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if !norm.is_finite() || norm < 1e-300 {
            return Err(Error::Domain {
                what: "vector norm",
                value: norm,
            });
        }
        Ok(SpherePoint([v[0] / norm, v[1] / norm, v[2] / norm]))
    }

    /// Point with polar angle `theta` from the north pole and azimuth `phi`.
    pub fn from_spherical(theta: f64, phi: f64) -> Self {
        let s = theta.sin();
        SpherePoint([s * phi.cos(), s * phi.sin(), theta.cos()])
    }

    pub fn north() -> Self {
        SpherePoint([0.0, 0.0, 1.0])
    }

    pub fn coords(&self) -> [f64; 3] {
        self.0
    }

    pub fn antipode(&self) -> Self {
        SpherePoint([-self.0[0], -self.0[1], -self.0[2]])
    }

    #[inline]
    pub fn dot(&self, other: &SpherePoint) -> f64 {
        self.0[0] * other.0[0] + self.0[1] * other.0[1] + self.0[2] * other.0[2]
    }

    /// Removes the radial part of `v`.
    pub fn project_tangent(&self, v: [f64; 3]) -> [f64; 3] {
        let r = v[0] * self.0[0] + v[1] * self.0[1] + v[2] * self.0[2];
        [v[0] - r * self.0[0], v[1] - r * self.0[1], v[2] - r * self.0[2]]
    }

    /// Follows the great circle with initial velocity `v` (tangent at `self`)
    /// for unit time.
    pub fn exp(&self, v: [f64; 3]) -> SpherePoint {
        let v = self.project_tangent(v);
        let len = norm(v);
        if len < 1e-300 {
            return *self;
        }
        let (s, c) = len.sin_cos();
        let p = self.0;
        let moved = [
            c * p[0] + s * v[0] / len,
            c * p[1] + s * v[1] / len,
            c * p[2] + s * v[2] / len,
        ];
        // Renormalize to keep the unit-norm invariant tight.
        SpherePoint::from_vector(moved).unwrap_or(*self)
    }

    /// Uniformly distributed random point.
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let z: f64 = rng.gen_range(-1.0..=1.0);
        let phi: f64 = rng.gen_range(0.0..2.0 * PI);
        let r = (1.0 - z * z).max(0.0).sqrt();
        SpherePoint([r * phi.cos(), r * phi.sin(), z])
    }
}

impl TryFrom<[f64; 3]> for SpherePoint {
    type Error = Error;
    fn try_from(v: [f64; 3]) -> Result<Self> {
        SpherePoint::from_vector(v)
    }
}

impl From<SpherePoint> for [f64; 3] {
    fn from(p: SpherePoint) -> Self {
        p.0
    }
}

pub(crate) fn norm(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Geodesic distance in `[0, π]`, via `atan2(‖x × y‖, ⟨x, y⟩)`.
pub fn angle_between(x: &SpherePoint, y: &SpherePoint) -> f64 {
    norm(cross(x.0, y.0)).atan2(x.dot(y))
}

/// Points on the equator, `(cos s, sin s, 0)`.
pub fn equator_curve(s: f64) -> SpherePoint {
    SpherePoint([s.cos(), s.sin(), 0.0])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Causality {
    Timelike,
    Lightlike,
    Spacelike,
}

/// Causal relation of a pair together with the value of `D` that decided it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConeClass {
    pub label: Causality,
    pub margin: f64,
}

pub fn classify(params: &ModelParams, x: &SpherePoint, y: &SpherePoint) -> ConeClass {
    classify_with_tol(params, x, y, LIGHTCONE_TOL)
}

pub fn classify_with_tol(
    params: &ModelParams,
    x: &SpherePoint,
    y: &SpherePoint,
    tol: f64,
) -> ConeClass {
    // Symmetrize so that classify(x, y) == classify(y, x) bit for bit.
    let margin = 0.5 * (kernel(params, x, y) + kernel(params, y, x));
    let label = if margin > tol {
        Causality::Timelike
    } else if margin < -tol {
        Causality::Spacelike
    } else {
        Causality::Lightlike
    };
    ConeClass { label, margin }
}

/// Open geodesic cap.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cap {
    pub center: SpherePoint,
    pub radius: f64,
}

impl Cap {
    pub fn new(center: SpherePoint, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius < PI) {
            return Err(Error::Domain {
                what: "cap radius",
                value: radius,
            });
        }
        Ok(Cap { center, radius })
    }

    pub fn contains(&self, p: &SpherePoint) -> bool {
        angle_between(&self.center, p) < self.radius
    }
}

/// Cap of radius `(θ_max/2)(1 − cap_margin)` around `center`.
///
/// Any two of its points are less than `θ_max` apart, hence timelike.
pub fn totally_timelike_cap(params: &ModelParams, center: SpherePoint) -> Cap {
    totally_timelike_cap_with_margin(params, center, CAP_MARGIN)
}

pub fn totally_timelike_cap_with_margin(
    params: &ModelParams,
    center: SpherePoint,
    cap_margin: f64,
) -> Cap {
    let radius = 0.5 * params.theta_max() * (1.0 - cap_margin);
    Cap { center, radius }
}

const GOLDEN_ANGLE: f64 = PI * 0.763_932_022_500_210_3; // π (3 − √5)

/// The `i`-th of `n` spherical Fibonacci lattice points.
pub fn fibonacci_point(i: usize, n: usize) -> SpherePoint {
    let z = 1.0 - (2 * i + 1) as f64 / n as f64;
    let r = (1.0 - z * z).max(0.0).sqrt();
    let phi = (i as f64 * GOLDEN_ANGLE) % (2.0 * PI);
    SpherePoint([r * phi.cos(), r * phi.sin(), z])
}

/// Index of the lattice point nearest to `p`, i.e. its equal-area cell.
pub fn fibonacci_cell(p: &SpherePoint, n: usize) -> usize {
    if n <= 64 {
        return (0..n)
            .min_by(|&a, &b| {
                let da = -fibonacci_point(a, n).dot(p);
                let db = -fibonacci_point(b, n).dot(p);
                da.total_cmp(&db).then(a.cmp(&b))
            })
            .unwrap_or(0);
    }
    // Lattice points are sorted by z; the nearest one lies within a band a few
    // spacings wide around p's height.
    let spacing = (4.0 * PI / n as f64).sqrt();
    let reach = 2.5 * spacing;
    let [_, _, z] = p.0;
    let theta = z.clamp(-1.0, 1.0).acos();
    let z_hi = (theta - reach).max(0.0).cos();
    let z_lo = (theta + reach).min(PI).cos();
    let index_of = |zz: f64| ((1.0 - zz) * n as f64 / 2.0 - 0.5).max(0.0);
    let lo = index_of(z_hi).floor() as usize;
    let hi = (index_of(z_lo).ceil() as usize + 1).min(n);
    let mut best = lo;
    let mut best_dot = f64::NEG_INFINITY;
    for i in lo..hi {
        let d = fibonacci_point(i, n).dot(p);
        if d > best_dot {
            best_dot = d;
            best = i;
        }
    }
    best
}

/// Equal-weight Fibonacci lattice quadrature on the sphere.
#[derive(Clone, Debug)]
pub struct SphereGrid {
    pub points: Vec<SpherePoint>,
    pub weights: Vec<f64>,
}

impl SphereGrid {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `∫ f dσ / 4π` under the grid rule.
    pub fn integrate<F: Fn(&SpherePoint) -> f64>(&self, f: F) -> f64 {
        let values: Vec<f64> = self
            .points
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| w * f(p))
            .collect();
        crate::sum::pairwise_sum(&values)
    }
}

/// Deterministic grid with `resolution` points and weights `1/resolution`.
pub fn sphere_grid(resolution: usize) -> Result<SphereGrid> {
    if resolution == 0 {
        return Err(Error::Domain {
            what: "grid resolution",
            value: 0.0,
        });
    }
    let points = (0..resolution)
        .map(|i| fibonacci_point(i, resolution))
        .collect();
    let weights = vec![1.0 / resolution as f64; resolution];
    Ok(SphereGrid { points, weights })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_3};

    fn e(i: usize) -> SpherePoint {
        let mut v = [0.0; 3];
        v[i] = 1.0;
        SpherePoint(v)
    }

    #[test]
    fn angle_examples() {
        let x = SpherePoint::from_spherical(1.2, -0.3);
        assert_eq!(angle_between(&x, &x), 0.0);
        assert!((angle_between(&x, &x.antipode()) - PI).abs() < 1e-15);
        assert!((angle_between(&e(0), &e(1)) - FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn angle_is_accurate_for_tiny_separations() {
        let a = SpherePoint::north();
        let b = SpherePoint::from_spherical(1e-9, 0.0);
        assert!((angle_between(&a, &b) - 1e-9).abs() < 1e-20);
    }

    #[test]
    fn classify_examples() {
        let p2 = ModelParams::new(2.0).unwrap();
        let x = SpherePoint::from_spherical(0.3, 0.2);
        let c = classify(&p2, &x, &x);
        assert_eq!(c.label, Causality::Timelike);
        assert!((c.margin - 1.0).abs() < 1e-15);
        let n = SpherePoint::north();
        let at = |theta| SpherePoint::from_spherical(theta, 0.0);
        assert_eq!(classify(&p2, &n, &at(FRAC_PI_3)).label, Causality::Lightlike);
        assert_eq!(classify(&p2, &n, &at(FRAC_PI_2)).label, Causality::Spacelike);
    }

    #[test]
    fn classify_is_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = ModelParams::new(1.7).unwrap();
        for _ in 0..1000 {
            let a = SpherePoint::random(&mut rng);
            let b = SpherePoint::random(&mut rng);
            assert_eq!(classify(&p, &a, &b), classify(&p, &b, &a));
        }
    }

    #[test]
    fn cap_radius_examples() {
        let cap = totally_timelike_cap(&ModelParams::new(2.0).unwrap(), SpherePoint::north());
        assert!((cap.radius - (PI / 6.0) * (1.0 - CAP_MARGIN)).abs() < 1e-15);
        let cap = totally_timelike_cap(&ModelParams::new(1.0).unwrap(), SpherePoint::north());
        assert!((cap.radius - FRAC_PI_2 * (1.0 - CAP_MARGIN)).abs() < 1e-15);
        assert!(Cap::new(SpherePoint::north(), 0.0).is_err());
        assert!(Cap::new(SpherePoint::north(), PI).is_err());
    }

    #[test]
    fn equator_curve_examples() {
        let close = |a: SpherePoint, b: [f64; 3]| {
            a.coords().iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-15)
        };
        assert!(close(equator_curve(0.0), [1.0, 0.0, 0.0]));
        assert!(close(equator_curve(FRAC_PI_2), [0.0, 1.0, 0.0]));
        assert!(close(equator_curve(PI), [-1.0, 0.0, 0.0]));
    }

    #[test]
    fn grid_normalization_and_moments() {
        let g = sphere_grid(5000).unwrap();
        assert!((g.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((g.integrate(|_| 1.0) - 1.0).abs() < 1e-12);
        let z2 = g.integrate(|p| p.coords()[2].powi(2));
        assert!((z2 - 1.0 / 3.0).abs() < 1e-6, "{z2}");
        assert!(sphere_grid(0).is_err());
        assert_eq!(sphere_grid(1).unwrap().len(), 1);
    }

    #[test]
    fn grid_points_are_unit() {
        for p in sphere_grid(777).unwrap().points {
            assert!((norm(p.coords()) - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn fibonacci_cell_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for &n in &[10, 100, 1000, 20000] {
            for _ in 0..300 {
                let p = SpherePoint::random(&mut rng);
                let brute = (0..n)
                    .max_by(|&a, &b| {
                        fibonacci_point(a, n)
                            .dot(&p)
                            .total_cmp(&fibonacci_point(b, n).dot(&p))
                    })
                    .unwrap();
                let fast = fibonacci_cell(&p, n);
                let gap = fibonacci_point(brute, n).dot(&p) - fibonacci_point(fast, n).dot(&p);
                assert!(gap.abs() < 1e-15, "n={n}: {brute} vs {fast}");
            }
        }
    }

    #[test]
    fn exp_map_moves_along_geodesic() {
        let p = e(0);
        let q = p.exp([0.0, 0.5, 0.0]);
        assert!((angle_between(&p, &q) - 0.5).abs() < 1e-14);
        assert!((norm(q.coords()) - 1.0).abs() < 1e-15);
        // Radial components are ignored.
        assert_eq!(p.exp([3.0, 0.0, 0.0]), p);
    }

    #[test]
    fn rejects_zero_vector() {
        assert!(SpherePoint::new(0.0, 0.0, 0.0).is_err());
        assert!(SpherePoint::new(f64::NAN, 0.0, 1.0).is_err());
    }
}
