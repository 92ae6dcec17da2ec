//! Discrete measures on the sphere and the quantities built from them: the
//! action, the function `ℓ = ∫ L(·, y) dρ(y)`, Gram matrices, harmonic
//! moments, and the quadrature operator on the harmonic subspace of a cap.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SMatrix, SymmetricEigen};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{Cap, SphereGrid, SpherePoint};
use crate::harmonics::{degree, real_harmonics, N_HARMONICS};
use crate::kernel::{kernel, lagrangian, ModelParams};
use crate::sum::pairwise_sum;
use crate::tolerances::MASS_TOL;

/// Normalized weighted point cloud.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct DiscreteMeasure {
    points: Vec<SpherePoint>,
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    /// Checks non-negativity and unit mass (to within `1e−12`).
    pub fn new(points: Vec<SpherePoint>, weights: Vec<f64>) -> Result<Self> {
        validate_shape(&points, &weights)?;
        let mass: f64 = weights.iter().sum();
        if (mass - 1.0).abs() > MASS_TOL {
            return Err(Error::InvalidMeasure(format!("total mass {mass} is not 1")));
        }
        Ok(DiscreteMeasure { points, weights })
    }

    /// Rescales non-negative weights to unit mass.
    pub fn from_unnormalized(points: Vec<SpherePoint>, weights: Vec<f64>) -> Result<Self> {
        validate_shape(&points, &weights)?;
        let mass: f64 = weights.iter().sum();
        if !(mass > 0.0) {
            return Err(Error::InvalidMeasure("total mass is zero".into()));
        }
        let weights = weights.into_iter().map(|w| w / mass).collect();
        Ok(DiscreteMeasure { points, weights })
    }

    pub fn dirac(p: SpherePoint) -> Self {
        DiscreteMeasure {
            points: vec![p],
            weights: vec![1.0],
        }
    }

    pub fn uniform(points: Vec<SpherePoint>) -> Result<Self> {
        let n = points.len();
        Self::from_unnormalized(points, vec![1.0; n])
    }

    pub fn points(&self) -> &[SpherePoint] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Indices whose weight is at least `floor`.
    pub fn support_indices(&self, floor: f64) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.weights[i] >= floor).collect()
    }

    /// Drops points with weight below `floor`, merges points closer than
    /// `merge_radius` (weights added, position the normalized weighted mean)
    /// and rescales to unit mass.
    pub fn normalized(&self, floor: f64, merge_radius: f64) -> Result<Self> {
        let kept: Vec<usize> = self.support_indices(floor);
        if kept.is_empty() {
            return Err(Error::InvalidMeasure("no point above the weight floor".into()));
        }
        let clusters = single_linkage(
            &kept.iter().map(|&i| self.points[i]).collect::<Vec<_>>(),
            merge_radius,
        );
        if kept.len() == self.len() && clusters.len() == kept.len() {
            return Ok(self.clone());
        }
        let mut points = Vec::with_capacity(clusters.len());
        let mut weights = Vec::with_capacity(clusters.len());
        for members in clusters {
            let idx: Vec<usize> = members.iter().map(|&k| kept[k]).collect();
            let w: f64 = idx.iter().map(|&i| self.weights[i]).sum();
            let p = if idx.len() == 1 {
                self.points[idx[0]]
            } else {
                let mut acc = [0.0; 3];
                for &i in &idx {
                    let c = self.points[i].coords();
                    for k in 0..3 {
                        acc[k] += self.weights[i] * c[k];
                    }
                }
                SpherePoint::from_vector(acc).unwrap_or(self.points[idx[0]])
            };
            points.push(p);
            weights.push(w);
        }
        Self::from_unnormalized(points, weights)
    }

    pub(crate) fn with_weights(&self, weights: Vec<f64>) -> Self {
        debug_assert_eq!(weights.len(), self.points.len());
        DiscreteMeasure {
            points: self.points.clone(),
            weights,
        }
    }

    pub(crate) fn from_parts_unchecked(points: Vec<SpherePoint>, weights: Vec<f64>) -> Self {
        DiscreteMeasure { points, weights }
    }
}

fn validate_shape(points: &[SpherePoint], weights: &[f64]) -> Result<()> {
    if points.is_empty() {
        return Err(Error::InvalidMeasure("no points".into()));
    }
    if points.len() != weights.len() {
        return Err(Error::InvalidMeasure(format!(
            "{} points but {} weights",
            points.len(),
            weights.len()
        )));
    }
    if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
        return Err(Error::InvalidMeasure(format!("weight {w} is not a finite non-negative number")));
    }
    Ok(())
}

/// Single-linkage groups of points closer than `radius` (radians). Groups are
/// ordered by their smallest member index, members in increasing order.
pub(crate) fn single_linkage(points: &[SpherePoint], radius: f64) -> Vec<Vec<usize>> {
    let n = points.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if crate::geometry::angle_between(&points[i], &points[j]) < radius {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; n];
    for i in 0..n {
        let r = find(&mut parent, i);
        if slot[r] == usize::MAX {
            slot[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[slot[r]].push(i);
    }
    groups
}

/// `ℓ(x) = Σ_j w_j L(x, p_j)`, summed in index order.
pub fn ell(params: &ModelParams, mu: &DiscreteMeasure, x: &SpherePoint) -> f64 {
    mu.points
        .iter()
        .zip(&mu.weights)
        .fold(0.0, |acc, (p, w)| acc + w * lagrangian(params, x, p))
}

/// `ℓ` at every point of `xs`, evaluated in parallel.
pub fn ell_many(params: &ModelParams, mu: &DiscreteMeasure, xs: &[SpherePoint]) -> Vec<f64> {
    xs.par_iter().map(|x| ell(params, mu, x)).collect()
}

/// `S = Σ_ij w_i w_j L(p_i, p_j)`, diagonal included.
pub fn action(params: &ModelParams, mu: &DiscreteMeasure) -> f64 {
    let rows = ell_many(params, mu, &mu.points);
    let terms: Vec<f64> = rows.iter().zip(&mu.weights).map(|(l, w)| l * w).collect();
    pairwise_sum(&terms)
}

/// Euler–Lagrange residuals of a measure.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct ElResidual {
    /// `max_M ℓ − min_M ℓ` over points with weight ≥ the floor.
    pub spread_on_support: f64,
    /// `min_grid ℓ − min_M ℓ`; negative values mean `ℓ` drops below the
    /// support level somewhere off the support.
    pub exterior_gap: f64,
    pub support_min: f64,
    pub support_max: f64,
    pub grid_min: f64,
    #[serde(skip)]
    pub grid_argmin: SpherePoint,
}

pub fn el_residual(
    params: &ModelParams,
    mu: &DiscreteMeasure,
    grid: &SphereGrid,
    weight_floor: f64,
) -> ElResidual {
    let support: Vec<SpherePoint> = mu
        .support_indices(weight_floor)
        .into_iter()
        .map(|i| mu.points[i])
        .collect();
    let on_support = ell_many(params, mu, &support);
    let support_min = on_support.iter().copied().fold(f64::INFINITY, f64::min);
    let support_max = on_support.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let on_grid = ell_many(params, mu, &grid.points);
    let (arg, grid_min) = on_grid
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |best, (i, v)| if v < best.1 { (i, v) } else { best });
    ElResidual {
        spread_on_support: support_max - support_min,
        exterior_gap: grid_min - support_min,
        support_min,
        support_max,
        grid_min,
        grid_argmin: grid.points[arg],
    }
}

/// Matrix of Lagrangian values `L(p_i, p_j)`.
#[derive(Clone, Debug)]
pub struct GramMatrix {
    pub entries: DMatrix<f64>,
    /// Indices of the source points in the measure (or input list).
    pub indices: Vec<usize>,
}

impl GramMatrix {
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.entries.clone())
            .eigenvalues
            .iter()
            .copied()
            .collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(0.0)
    }
}

pub fn gram(params: &ModelParams, points: &[SpherePoint]) -> GramMatrix {
    let n = points.len();
    let mut entries = DMatrix::zeros(n, n);
    for i in 0..n {
        entries[(i, i)] = crate::kernel::d_of_inner(params, 1.0);
        for j in (i + 1)..n {
            let v = lagrangian(params, &points[i], &points[j]);
            entries[(i, j)] = v;
            entries[(j, i)] = v;
        }
    }
    GramMatrix {
        entries,
        indices: (0..n).collect(),
    }
}

/// Gram matrix of the measure's points at `indices`.
pub fn gram_of(params: &ModelParams, mu: &DiscreteMeasure, indices: &[usize]) -> GramMatrix {
    let pts: Vec<SpherePoint> = indices.iter().map(|&i| mu.points[i]).collect();
    GramMatrix {
        indices: indices.to_vec(),
        ..gram(params, &pts)
    }
}

/// Integrals of the nine real harmonics against a measure.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct HarmonicMoments(pub [f64; N_HARMONICS]);

impl HarmonicMoments {
    /// Euclidean norm of the degree-`l` block.
    pub fn degree_norm(&self, l: usize) -> f64 {
        (0..N_HARMONICS)
            .filter(|&i| degree(i) == l)
            .map(|i| self.0[i] * self.0[i])
            .sum::<f64>()
            .sqrt()
    }
}

pub fn moments(mu: &DiscreteMeasure) -> HarmonicMoments {
    let mut m = [0.0; N_HARMONICS];
    for (p, w) in mu.points.iter().zip(&mu.weights) {
        let h = real_harmonics(p);
        for k in 0..N_HARMONICS {
            m[k] += w * h[k];
        }
    }
    HarmonicMoments(m)
}

/// `∬ D dμ dμ = 4π Σ_l ν_l Σ_m m_lm²`, a lower bound for the action since
/// `L ≥ D`.
pub fn lower_bound(params: &ModelParams, mu: &DiscreteMeasure) -> f64 {
    let m = moments(mu);
    let nu = params.nu();
    4.0 * PI
        * (0..N_HARMONICS)
            .map(|i| nu[degree(i)] * m.0[i] * m.0[i])
            .sum::<f64>()
}

pub type OperatorMatrix = SMatrix<f64, N_HARMONICS, N_HARMONICS>;

/// Matrix `⟨Y_a, L_μ Y_b⟩` of the kernel operator on the cap, with `μ` the
/// grid quadrature restricted to the cap and `Y_a` the real harmonics.
pub fn quadrature_operator(
    params: &ModelParams,
    cap: &Cap,
    grid: &SphereGrid,
) -> Result<OperatorMatrix> {
    let (pts, weights) = cap_quadrature(cap, grid)?;
    let basis: Vec<[f64; N_HARMONICS]> = pts
        .iter()
        .zip(&weights)
        .map(|(p, w)| real_harmonics(p).map(|v| v * w))
        .collect();
    Ok(assemble(params, &pts, &basis))
}

/// The same operator expressed in a basis of `span{Y_a}` that is orthonormal
/// for the cap quadrature. Congruent to [`quadrature_operator`], so it has
/// the same signature, but its condition number is the square root.
pub fn orthonormal_quadrature_operator(
    params: &ModelParams,
    cap: &Cap,
    grid: &SphereGrid,
) -> Result<OperatorMatrix> {
    let (pts, weights) = cap_quadrature(cap, grid)?;
    let n = pts.len();
    let mut a = DMatrix::<f64>::zeros(n, N_HARMONICS);
    for (i, (p, w)) in pts.iter().zip(&weights).enumerate() {
        let sw = w.sqrt();
        for (k, v) in real_harmonics(p).iter().enumerate() {
            a[(i, k)] = sw * v;
        }
    }
    let q = a.qr().q();
    let basis: Vec<[f64; N_HARMONICS]> = (0..n)
        .map(|i| {
            let sw = weights[i].sqrt();
            std::array::from_fn(|k| sw * q[(i, k)])
        })
        .collect();
    Ok(assemble(params, &pts, &basis))
}

/// Signature of the cap operator, computed in the orthonormal basis.
pub fn operator_signature(
    params: &ModelParams,
    cap: &Cap,
    grid: &SphereGrid,
    rel_tol: f64,
) -> Result<(usize, usize)> {
    Ok(signature(&orthonormal_quadrature_operator(params, cap, grid)?, rel_tol))
}

fn cap_quadrature(cap: &Cap, grid: &SphereGrid) -> Result<(Vec<SpherePoint>, Vec<f64>)> {
    let inside: Vec<usize> = (0..grid.len())
        .filter(|&i| cap.contains(&grid.points[i]))
        .collect();
    if inside.len() < N_HARMONICS {
        return Err(Error::DegenerateCap {
            found: inside.len(),
            needed: N_HARMONICS,
        });
    }
    Ok((
        inside.iter().map(|&i| grid.points[i]).collect(),
        inside.iter().map(|&i| grid.weights[i]).collect(),
    ))
}

// M = Σ_ij b_i D(x_i, x_j) b_jᵀ
fn assemble(params: &ModelParams, pts: &[SpherePoint], basis: &[[f64; N_HARMONICS]]) -> OperatorMatrix {
    let smoothed: Vec<[f64; N_HARMONICS]> = pts
        .par_iter()
        .map(|x| {
            let mut acc = [0.0; N_HARMONICS];
            for (y, b) in pts.iter().zip(basis) {
                let d = kernel(params, x, y);
                for k in 0..N_HARMONICS {
                    acc[k] += d * b[k];
                }
            }
            acc
        })
        .collect();
    let mut m = OperatorMatrix::zeros();
    for (b, s) in basis.iter().zip(&smoothed) {
        for a in 0..N_HARMONICS {
            for c in 0..N_HARMONICS {
                m[(a, c)] += b[a] * s[c];
            }
        }
    }
    m
}

/// Counts of (positive, negative) eigenvalues of a symmetric matrix; values
/// within `rel_tol · max|λ|` of zero count as neither.
pub fn signature(m: &OperatorMatrix, rel_tol: f64) -> (usize, usize) {
    let sym = 0.5 * (m + m.transpose());
    let ev = SymmetricEigen::new(sym).eigenvalues;
    let scale = ev.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let cut = rel_tol * scale;
    let pos = ev.iter().filter(|&&v| v > cut).count();
    let neg = ev.iter().filter(|&&v| v < -cut).count();
    (pos, neg)
}

pub fn sorted_eigenvalues(m: &OperatorMatrix) -> Vec<f64> {
    let sym = 0.5 * (m + m.transpose());
    let mut ev: Vec<f64> = SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}
