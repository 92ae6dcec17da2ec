//! Real orthonormal spherical harmonics of degree at most two.
//!
//! Basis order is `(l, m)` lexicographic with `m = −l..=l`:
//!
//! | index | (l, m)  | function                 |
//! |-------|---------|--------------------------|
//! | 0     | (0, 0)  | `1/(2√π)`                |
//! | 1     | (1, −1) | `√(3/4π) y`              |
//! | 2     | (1, 0)  | `√(3/4π) z`              |
//! | 3     | (1, 1)  | `√(3/4π) x`              |
//! | 4     | (2, −2) | `½√(15/π) xy`            |
//! | 5     | (2, −1) | `½√(15/π) yz`            |
//! | 6     | (2, 0)  | `¼√(5/π) (3z² − 1)`      |
//! | 7     | (2, 1)  | `½√(15/π) xz`            |
//! | 8     | (2, 2)  | `¼√(15/π) (x² − y²)`     |

use std::f64::consts::PI;

use crate::geometry::SpherePoint;

pub const N_HARMONICS: usize = 9;

/// `(l, m)` labels in basis order.
pub const LABELS: [(usize, i32); N_HARMONICS] = [
    (0, 0),
    (1, -1),
    (1, 0),
    (1, 1),
    (2, -2),
    (2, -1),
    (2, 0),
    (2, 1),
    (2, 2),
];

pub fn degree(index: usize) -> usize {
    LABELS[index].0
}

/// Evaluates all nine basis functions at `p`.
pub fn real_harmonics(p: &SpherePoint) -> [f64; N_HARMONICS] {
    let [x, y, z] = p.coords();
    let c0 = 0.5 * (1.0 / PI).sqrt();
    let c1 = (3.0 / (4.0 * PI)).sqrt();
    let c2 = 0.5 * (15.0 / PI).sqrt();
    let c20 = 0.25 * (5.0 / PI).sqrt();
    let c22 = 0.25 * (15.0 / PI).sqrt();
    [
        c0,
        c1 * y,
        c1 * z,
        c1 * x,
        c2 * x * y,
        c2 * y * z,
        c20 * (3.0 * z * z - 1.0),
        c2 * x * z,
        c22 * (x * x - y * y),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn north_pole_values() {
        let h = real_harmonics(&SpherePoint::north());
        assert!((h[0] - 1.0 / (4.0 * PI).sqrt()).abs() < 1e-15);
        assert!((h[2] - (3.0 / (4.0 * PI)).sqrt()).abs() < 1e-15);
        assert!((h[6] - (5.0 / (4.0 * PI)).sqrt()).abs() < 1e-15);
        for i in [1, 3, 4, 5, 7, 8] {
            assert_eq!(h[i], 0.0);
        }
    }

    #[test]
    fn addition_theorem_at_coincident_points() {
        // Σ_m Y_lm(x)² = (2l + 1) / 4π for every x.
        let p = SpherePoint::from_spherical(0.7, 2.3);
        let h = real_harmonics(&p);
        for l in 0..=2 {
            let s: f64 = (0..N_HARMONICS)
                .filter(|&i| degree(i) == l)
                .map(|i| h[i] * h[i])
                .sum();
            assert!((s - (2 * l + 1) as f64 / (4.0 * PI)).abs() < 1e-14);
        }
    }
}
