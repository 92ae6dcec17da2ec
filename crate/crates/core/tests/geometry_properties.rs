use causal_sphere::geometry::*;
use causal_sphere::kernel::{kernel, ModelParams};
use causal_sphere::tolerances::DEFAULT_GRID_RESOLUTION;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn legendre(l: usize, x: f64) -> f64 {
    let (mut p0, mut p1) = (1.0, x);
    if l == 0 {
        return p0;
    }
    for k in 1..l {
        let p2 = ((2 * k + 1) as f64 * x * p1 - k as f64 * p0) / (k + 1) as f64;
        p0 = p1;
        p1 = p2;
    }
    p1
}

fn random_in_cap<R: Rng>(cap: &Cap, rng: &mut R) -> SpherePoint {
    loop {
        let p = SpherePoint::random(rng);
        if cap.contains(&p) {
            return p;
        }
    }
}

#[test]
fn totally_timelike_caps_are_timelike() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for tau in [1.2, 2.0, 3.0] {
        let params = ModelParams::new(tau).unwrap();
        for _ in 0..20 {
            let cap = totally_timelike_cap(&params, SpherePoint::random(&mut rng));
            for _ in 0..5_000 {
                let x = random_in_cap(&cap, &mut rng);
                let y = random_in_cap(&cap, &mut rng);
                assert!(kernel(&params, &x, &y) > 0.0);
                assert_eq!(classify(&params, &x, &y).label, Causality::Timelike);
            }
        }
    }
}

#[test]
fn default_grid_integrates_low_degree_harmonics() {
    let grid = sphere_grid(DEFAULT_GRID_RESOLUTION).unwrap();
    assert!((grid.integrate(|_| 1.0) - 1.0).abs() < 1e-12);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..10 {
        let axis = SpherePoint::random(&mut rng);
        for l in 1..=4 {
            let v = grid.integrate(|p| legendre(l, p.dot(&axis)));
            assert!(v.abs() <= 1e-6, "degree {l}: {v}");
        }
    }
}

#[test]
fn geodesic_exponential_preserves_distance() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..1000 {
        let p = SpherePoint::random(&mut rng);
        let v = p.project_tangent([rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]);
        let len = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        let q = p.exp(v);
        assert!((q.dot(&q) - 1.0).abs() < 1e-14);
        if len < std::f64::consts::PI {
            assert!((angle_between(&p, &q) - len).abs() < 1e-9);
        }
    }
}

#[test]
fn fibonacci_cells_match_nearest_point() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for n in [7, 100, 5000] {
        let pts: Vec<SpherePoint> = (0..n).map(|i| fibonacci_point(i, n)).collect();
        for _ in 0..500 {
            let p = SpherePoint::random(&mut rng);
            let cell = fibonacci_cell(&p, n);
            let best = pts.iter().map(|q| q.dot(&p)).fold(f64::NEG_INFINITY, f64::max);
            assert!(best - pts[cell].dot(&p) < 1e-12);
        }
    }
}
