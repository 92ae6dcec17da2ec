//! Minimization of the causal action over discrete measures.
//!
//! One outer iteration of [`minimize`] runs
//!
//! 1. [`optimize_weights`]: pairwise Frank–Wolfe on the simplex at fixed
//!    support, with exact line search;
//! 2. [`move_points`]: geodesic descent of the support points along
//!    `−∇ℓ` with Armijo backtracking;
//! 3. [`prune`]: removal of dead points and merging of coincident ones;
//! 4. [`insert_point`]: a conditional-gradient step towards `δ_x` at the
//!    minimum of `ℓ`, with the closed-form optimal step size.
//!
//! Every sub-step either lowers the action or leaves the measure untouched,
//! so the recorded action trace is non-increasing.

use std::time::Instant;

use log::debug;
use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{box_dimension, cluster_support, dyadic_scales};
use crate::error::{Error, Result};
use crate::geometry::{fibonacci_point, sphere_grid, SphereGrid, SpherePoint};
use crate::kernel::{d_of_inner, d_of_inner_derivative, lagrangian, ModelParams};
use crate::measure::{action, el_residual, ell, lower_bound, DiscreteMeasure, ElResidual};
use crate::tolerances::{Tolerances, CLUSTER_RADIUS};

/// Factor between the optimization grid and the diagnostic grid used by the
/// stopping rule (one refinement level, i.e. half the spacing).
pub const DIAGNOSTIC_REFINEMENT: usize = 4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub tau: f64,
    /// Number of starting points per restart.
    pub n_init: usize,
    pub max_outer_iters: usize,
    /// Fibonacci grid size used for insertion searches.
    pub grid_resolution: usize,
    pub seed: u64,
    /// Number of independent restarts.
    pub restarts: usize,
    pub max_weight_iters: usize,
    /// Point-motion line searches per outer iteration.
    pub motion_steps: usize,
    pub tolerances: Tolerances,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            tau: 2.0,
            n_init: 24,
            max_outer_iters: 400,
            grid_resolution: 4096,
            seed: 1,
            restarts: 4,
            max_weight_iters: 200_000,
            motion_steps: 25,
            tolerances: Tolerances::default(),
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        ModelParams::new(self.tau)?;
        let counts = [
            ("n_init", self.n_init),
            ("max_outer_iters", self.max_outer_iters),
            ("grid_resolution", self.grid_resolution),
            ("restarts", self.restarts),
            ("max_weight_iters", self.max_weight_iters),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(Error::InvalidConfig(format!("{name} must be at least 1")));
        }
        let t = &self.tolerances;
        let tols = [
            ("lightcone_tol", t.lightcone_tol),
            ("weight_floor", t.weight_floor),
            ("merge_radius", t.merge_radius),
            ("station_tol", t.station_tol),
            ("insert_tol", t.insert_tol),
            ("el_tol", t.el_tol),
            ("step_tol", t.step_tol),
            ("action_tol", t.action_tol),
        ];
        if let Some((name, v)) = tols.iter().find(|(_, v)| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")));
        }
        if !(t.cap_margin > 0.0 && t.cap_margin < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "cap_margin must lie in (0, 1), got {}",
                t.cap_margin
            )));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Weights

#[derive(Clone, Debug)]
pub struct WeightSolution {
    pub weights: Vec<f64>,
    /// `max_{w_i > 0} g_i − min_i g_i` with `g = 2 L w`.
    pub stationarity: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn lagrangian_matrix(params: &ModelParams, points: &[SpherePoint]) -> Vec<Vec<f64>> {
    points
        .par_iter()
        .map(|p| points.iter().map(|q| lagrangian(params, p, q)).collect())
        .collect()
}

fn quad_form(l: &[Vec<f64>], w: &[f64]) -> f64 {
    let terms: Vec<f64> = l
        .iter()
        .zip(w)
        .map(|(row, wi)| wi * row.iter().zip(w).fold(0.0, |a, (x, wj)| a + x * wj))
        .collect();
    crate::sum::pairwise_sum(&terms)
}

fn stationarity_gap(lw: &[f64], w: &[f64]) -> (f64, usize, usize) {
    let mut s = 0;
    let mut a = usize::MAX;
    for i in 0..w.len() {
        if lw[i] < lw[s] {
            s = i;
        }
        if w[i] > 0.0 && (a == usize::MAX || lw[i] > lw[a]) {
            a = i;
        }
    }
    (2.0 * (lw[a] - lw[s]), s, a)
}

/// Curvature below `−NEGATIVE_CURVATURE_TOL` along a mass-preserving
/// direction on the active set triggers an escape step.
const NEGATIVE_CURVATURE_TOL: f64 = 1e-11;

fn refresh(l: &[Vec<f64>], w: &mut [f64], lw: &mut [f64]) {
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    for i in 0..w.len() {
        lw[i] = l[i].iter().zip(w.iter()).map(|(x, y)| x * y).sum();
    }
}

/// Pairwise Frank–Wolfe: mass moves from the support index with the largest
/// gradient to the index with the smallest. Along `e_s − e_a` the objective
/// has curvature `2 − 2 L_sa ≥ 0`, so the exact step is closed-form.
fn frank_wolfe(
    l: &[Vec<f64>],
    w: &mut [f64],
    lw: &mut [f64],
    station_tol: f64,
    budget: usize,
) -> usize {
    let n = w.len();
    let mut iterations = 0;
    while iterations < budget {
        let (gap, s, a) = stationarity_gap(lw, w);
        if gap <= station_tol {
            break;
        }
        let curvature = 2.0 - 2.0 * l[s][a];
        let max_step = w[a];
        let step = if curvature > 0.0 {
            (gap / (2.0 * curvature)).min(max_step)
        } else {
            max_step
        };
        if step <= 0.0 {
            break;
        }
        if step == max_step {
            w[s] += w[a];
            w[a] = 0.0;
        } else {
            w[s] += step;
            w[a] -= step;
        }
        iterations += 1;
        if iterations % 512 == 0 {
            refresh(l, w, lw);
        } else {
            for i in 0..n {
                lw[i] += step * (l[i][s] - l[i][a]);
            }
        }
    }
    refresh(l, w, lw);
    iterations
}

/// Most negative mass-preserving curvature direction of `L` on the active
/// set, scaled to the step that drives one active weight to zero.
fn negative_curvature_step(l: &[Vec<f64>], w: &[f64]) -> Option<Vec<f64>> {
    let active: Vec<usize> = (0..w.len()).filter(|&i| w[i] > 0.0).collect();
    let k = active.len();
    if k < 2 {
        return None;
    }
    let proj = DMatrix::from_fn(k, k, |i, j| if i == j { 1.0 } else { 0.0 } - 1.0 / k as f64);
    let la = DMatrix::from_fn(k, k, |i, j| l[active[i]][active[j]]);
    let eig = SymmetricEigen::new(&proj * la * &proj);
    let (idx, lambda) = eig
        .eigenvalues
        .iter()
        .copied()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))?;
    if lambda >= -NEGATIVE_CURVATURE_TOL {
        return None;
    }
    let mut c: Vec<f64> = eig.eigenvectors.column(idx).iter().copied().collect();
    let mean = c.iter().sum::<f64>() / k as f64;
    c.iter_mut().for_each(|v| *v -= mean);
    // Both signs decrease the objective to second order; take the longer step.
    let reach = |sign: f64| {
        active
            .iter()
            .zip(&c)
            .filter(|(_, ci)| sign * **ci < 0.0)
            .map(|(&i, ci)| w[i] / (sign * ci).abs())
            .fold(f64::INFINITY, f64::min)
    };
    let (sign, t) = [1.0, -1.0]
        .iter()
        .map(|&s| (s, reach(s)))
        .max_by(|a, b| a.1.total_cmp(&b.1))?;
    if !t.is_finite() {
        return None;
    }
    let mut next = w.to_vec();
    for (&i, ci) in active.iter().zip(&c) {
        next[i] = (w[i] + sign * t * ci).max(0.0);
    }
    Some(next)
}

/// Minimizes `wᵀ L w` over the probability simplex at fixed support.
///
/// Frank–Wolfe phases reach first-order stationarity; in between, directions
/// of negative curvature on the active set are followed to the boundary, so
/// the result is also second-order stationary.
pub fn optimize_weights(
    params: &ModelParams,
    points: &[SpherePoint],
    w_init: &[f64],
    station_tol: f64,
    max_iters: usize,
) -> Result<WeightSolution> {
    let n = points.len();
    if n == 0 || w_init.len() != n {
        return Err(Error::InvalidMeasure("weights do not match the points".into()));
    }
    let mass: f64 = w_init.iter().sum();
    if w_init.iter().any(|w| !(*w >= 0.0)) || (mass - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidMeasure("initial weights are not on the simplex".into()));
    }
    let l = lagrangian_matrix(params, points);
    let mut w = w_init.to_vec();
    let mut lw = vec![0.0; n];
    refresh(&l, &mut w, &mut lw);
    let mut iterations = 0;
    for _ in 0..=4 * n {
        iterations += frank_wolfe(&l, &mut w, &mut lw, station_tol, max_iters - iterations.min(max_iters));
        let Some(mut next) = negative_curvature_step(&l, &w) else {
            break;
        };
        let mut lw_next = vec![0.0; n];
        refresh(&l, &mut next, &mut lw_next);
        if quad_form(&l, &next) >= quad_form(&l, &w) {
            break;
        }
        w = next;
        lw = lw_next;
    }
    let stationarity = stationarity_gap(&lw, &w).0;
    if quad_form(&l, &w) > quad_form(&l, w_init) {
        // Rounding made things worse; keep the input.
        let mut lw0 = vec![0.0; n];
        for i in 0..n {
            lw0[i] = l[i].iter().zip(w_init).map(|(x, y)| x * y).sum();
        }
        let st0 = stationarity_gap(&lw0, w_init).0;
        return Ok(WeightSolution {
            weights: w_init.to_vec(),
            stationarity: st0,
            iterations,
            converged: st0 <= station_tol,
        });
    }
    Ok(WeightSolution {
        weights: w,
        stationarity,
        iterations,
        converged: stationarity <= station_tol,
    })
}

// ---------------------------------------------------------------------------
// Point motion

/// Tangential gradient of `ℓ` at `x`, excluding the term of the point at
/// `skip` (its own self-interaction is constant).
///
/// Pairs on or beyond the light cone contribute nothing: at the kink the
/// spacelike-side derivative (zero) is used.
fn ell_gradient(params: &ModelParams, mu: &DiscreteMeasure, x: &SpherePoint, skip: Option<usize>) -> [f64; 3] {
    let mut g = [0.0; 3];
    for (j, (q, w)) in mu.points().iter().zip(mu.weights()).enumerate() {
        if Some(j) == skip || *w == 0.0 {
            continue;
        }
        let t = x.dot(q).clamp(-1.0, 1.0);
        if d_of_inner(params, t) <= 0.0 {
            continue;
        }
        let c = w * d_of_inner_derivative(params, t);
        let qc = q.coords();
        for k in 0..3 {
            g[k] += c * qc[k];
        }
    }
    x.project_tangent(g)
}

/// Tangential gradient of the action with respect to each support point,
/// `∇_{p_i} S = 2 w_i ∇ℓ(p_i)` (self term excluded).
pub fn action_gradient(params: &ModelParams, mu: &DiscreteMeasure) -> Vec<[f64; 3]> {
    (0..mu.len())
        .into_par_iter()
        .map(|i| {
            let g = ell_gradient(params, mu, &mu.points()[i], Some(i));
            let s = 2.0 * mu.weights()[i];
            [s * g[0], s * g[1], s * g[2]]
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct MotionResult {
    pub measure: DiscreteMeasure,
    pub action_before: f64,
    pub action_after: f64,
    pub steps_accepted: usize,
    /// The last line search found no decrease.
    pub stalled: bool,
}

const ARMIJO: f64 = 1e-4;
const MAX_DISPLACEMENT: f64 = 0.25;

/// Moves every support point along `−∇ℓ(p_i)` by a common step length chosen
/// with Armijo backtracking; at most `steps` line searches.
pub fn move_points(
    params: &ModelParams,
    mu: &DiscreteMeasure,
    steps: usize,
    tol: &Tolerances,
) -> MotionResult {
    let action_before = action(params, mu);
    let mut current = mu.clone();
    let mut s_cur = action_before;
    let mut alpha: f64 = 1.0;
    let mut accepted = 0;
    let mut stalled = false;
    for _ in 0..steps {
        let dirs: Vec<[f64; 3]> = (0..current.len())
            .into_par_iter()
            .map(|i| {
                if current.weights()[i] < tol.weight_floor {
                    return [0.0; 3];
                }
                let g = ell_gradient(params, &current, &current.points()[i], Some(i));
                [-g[0], -g[1], -g[2]]
            })
            .collect();
        // dS/dα at α = 0 along the chosen directions.
        let slope: f64 = -2.0
            * dirs
                .iter()
                .zip(current.weights())
                .map(|(d, w)| w * (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]))
                .sum::<f64>();
        let max_dir = dirs
            .iter()
            .map(|d| crate::geometry::norm(*d))
            .fold(0.0, f64::max);
        if max_dir == 0.0 || slope >= 0.0 {
            break;
        }
        alpha = (alpha * 2.0).min(MAX_DISPLACEMENT / max_dir);
        let mut found = None;
        while alpha * max_dir >= tol.step_tol {
            let moved: Vec<SpherePoint> = current
                .points()
                .iter()
                .zip(&dirs)
                .map(|(p, d)| p.exp([alpha * d[0], alpha * d[1], alpha * d[2]]))
                .collect();
            let cand = DiscreteMeasure::from_parts_unchecked(moved, current.weights().to_vec());
            let s_new = action(params, &cand);
            if s_new <= s_cur + ARMIJO * alpha * slope {
                found = Some((cand, s_new));
                break;
            }
            alpha *= 0.5;
        }
        match found {
            Some((cand, s_new)) => {
                let rel = (s_cur - s_new) / s_cur.max(1e-300);
                current = cand;
                s_cur = s_new;
                accepted += 1;
                if rel < tol.action_tol {
                    break;
                }
            }
            None => {
                stalled = true;
                break;
            }
        }
    }
    MotionResult {
        measure: current,
        action_before,
        action_after: s_cur,
        steps_accepted: accepted,
        stalled,
    }
}

// ---------------------------------------------------------------------------
// Insertion

/// Optimal mixing step for `S((1 − t) μ + t δ_x)`.
///
/// With `S = S(μ)` and `ℓ = ℓ_μ(x)` the mixed action is
/// `(1 − t)² S + 2 t (1 − t) ℓ + t²`, minimized at
/// `t* = (S − ℓ) / (S − 2ℓ + 1)`. Returns `(t*, decrease)`.
pub fn insertion_step(action: f64, ell_at_x: f64) -> (f64, f64) {
    let denom = action - 2.0 * ell_at_x + 1.0;
    if !(denom > 0.0) || ell_at_x >= action {
        return (0.0, 0.0);
    }
    let t = ((action - ell_at_x) / denom).clamp(0.0, 1.0);
    let mixed = (1.0 - t).powi(2) * action + 2.0 * t * (1.0 - t) * ell_at_x + t * t;
    (t, action - mixed)
}

#[derive(Clone, Debug)]
pub struct Insertion {
    pub measure: DiscreteMeasure,
    pub point: SpherePoint,
    pub step: f64,
    pub decrease: f64,
}

/// Descends `ℓ` from `x` for a few geodesic steps; never increases `ℓ`.
fn refine_minimum(params: &ModelParams, mu: &DiscreteMeasure, x: SpherePoint, iters: usize) -> SpherePoint {
    let mut x = x;
    let mut fx = ell(params, mu, &x);
    let mut alpha: f64 = 0.1;
    for _ in 0..iters {
        let g = ell_gradient(params, mu, &x, None);
        let gn = crate::geometry::norm(g);
        if gn < 1e-14 {
            break;
        }
        alpha = (alpha * 2.0).min(0.2 / gn);
        let mut improved = false;
        while alpha * gn > 1e-12 {
            let y = x.exp([-alpha * g[0], -alpha * g[1], -alpha * g[2]]);
            let fy = ell(params, mu, &y);
            if fy < fx - ARMIJO * alpha * gn * gn {
                x = y;
                fx = fy;
                improved = true;
                break;
            }
            alpha *= 0.5;
        }
        if !improved {
            break;
        }
    }
    x
}

/// Conditional-gradient step towards the grid minimizer of `ℓ`, if it lies
/// more than `insert_tol` below the minimum of `ℓ` on the support.
pub fn insert_point(
    params: &ModelParams,
    mu: &DiscreteMeasure,
    grid: &SphereGrid,
    tol: &Tolerances,
) -> Option<Insertion> {
    let res = el_residual(params, mu, grid, tol.weight_floor);
    if !(res.grid_min < res.support_min - tol.insert_tol) {
        return None;
    }
    let x = refine_minimum(params, mu, res.grid_argmin, 30);
    let s = action(params, mu);
    let lx = ell(params, mu, &x);
    let (t, decrease) = insertion_step(s, lx);
    if !(t > 0.0 && decrease > 0.0) {
        return None;
    }
    let mut points = mu.points().to_vec();
    let mut weights: Vec<f64> = mu.weights().iter().map(|w| w * (1.0 - t)).collect();
    points.push(x);
    weights.push(t);
    let measure = DiscreteMeasure::from_unnormalized(points, weights).ok()?;
    Some(Insertion {
        measure,
        point: x,
        step: t,
        decrease,
    })
}

/// Removes points below the weight floor, merges points within the merge
/// radius, and rescales to unit mass.
pub fn prune(mu: &DiscreteMeasure, tol: &Tolerances) -> Result<DiscreteMeasure> {
    mu.normalized(tol.weight_floor, tol.merge_radius)
}

// ---------------------------------------------------------------------------
// Driver

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationReason {
    Converged,
    IterationCap,
    Stalled,
}

#[derive(Clone, Debug, Serialize)]
pub struct TraceRow {
    pub iter: usize,
    pub action: f64,
    pub el_gap: f64,
    pub n_points: usize,
    pub n_clusters: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct RestartSummary {
    pub restart: usize,
    pub warm: bool,
    pub action: f64,
    pub n_points: usize,
    pub termination: TerminationReason,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub tau: f64,
    pub seed: u64,
    /// Restart that produced the selected measure.
    pub restart: usize,
    pub measure: DiscreteMeasure,
    pub action: f64,
    pub lower_bound: f64,
    pub trace: Vec<TraceRow>,
    pub el: ElResidual,
    pub stationarity: f64,
    pub termination: TerminationReason,
    pub n_clusters: usize,
    pub dim_estimate: f64,
    pub restarts: Vec<RestartSummary>,
    /// Kept out of serialized reports so reruns produce identical files.
    #[serde(skip)]
    pub wall_time_secs: f64,
}

impl RunReport {
    pub fn converged(&self) -> bool {
        self.termination == TerminationReason::Converged
    }
}

struct SingleRun {
    restart: usize,
    warm: bool,
    measure: DiscreteMeasure,
    action: f64,
    trace: Vec<TraceRow>,
    el: ElResidual,
    stationarity: f64,
    termination: TerminationReason,
}

/// Random stream for restart `restart`: ChaCha8 keyed by the config seed,
/// stream number equal to the restart index.
pub fn restart_rng(seed: u64, restart: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(restart as u64);
    rng
}

/// `n` Fibonacci points, each displaced by a random tangent vector of length
/// up to half the lattice spacing; uniform weights.
pub fn initial_measure(n: usize, rng: &mut ChaCha8Rng) -> DiscreteMeasure {
    let spacing = (4.0 * std::f64::consts::PI / n as f64).sqrt();
    let points = (0..n)
        .map(|i| {
            let p = fibonacci_point(i, n);
            let v = [
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            ];
            let v = p.project_tangent(v);
            let len = crate::geometry::norm(v).max(1e-300);
            let r = 0.5 * spacing * rng.gen_range(0.0..1.0);
            p.exp([v[0] * r / len, v[1] * r / len, v[2] * r / len])
        })
        .collect();
    DiscreteMeasure::uniform(points).expect("non-empty")
}

fn n_clusters(mu: &DiscreteMeasure, tol: &Tolerances) -> usize {
    let support = mu.support_indices(tol.weight_floor);
    let pts: Vec<SpherePoint> = support.iter().map(|&i| mu.points()[i]).collect();
    let ws: Vec<f64> = support.iter().map(|&i| mu.weights()[i]).collect();
    DiscreteMeasure::from_unnormalized(pts, ws)
        .map(|m| cluster_support(&m, CLUSTER_RADIUS).len())
        .unwrap_or(0)
}

fn run_single(
    params: &ModelParams,
    cfg: &OptimizerConfig,
    grid: &SphereGrid,
    diag: &SphereGrid,
    restart: usize,
    start: DiscreteMeasure,
    warm: bool,
) -> Result<SingleRun> {
    let tol = &cfg.tolerances;
    let mut mu = start;
    let mut trace = Vec::new();
    let mut termination = TerminationReason::IterationCap;
    let mut last: Option<(ElResidual, f64)> = None;
    for iter in 0..cfg.max_outer_iters {
        let ws = optimize_weights(params, mu.points(), mu.weights(), tol.station_tol, cfg.max_weight_iters)?;
        mu = mu.with_weights(ws.weights);

        let motion = move_points(params, &mu, cfg.motion_steps, tol);
        mu = motion.measure;

        let before = action(params, &mu);
        let pruned = prune(&mu, tol)?;
        if action(params, &pruned) <= before {
            mu = pruned;
        }

        let ws = optimize_weights(params, mu.points(), mu.weights(), tol.station_tol, cfg.max_weight_iters)?;
        mu = mu.with_weights(ws.weights);
        let s = action(params, &mu);
        let el = el_residual(params, &mu, diag, tol.weight_floor);
        trace.push(TraceRow {
            iter,
            action: s,
            el_gap: el.exterior_gap,
            n_points: mu.support_indices(tol.weight_floor).len(),
            n_clusters: n_clusters(&mu, tol),
        });
        last = Some((el, ws.stationarity));
        if el.exterior_gap >= -tol.el_tol && ws.stationarity <= tol.station_tol {
            termination = TerminationReason::Converged;
            break;
        }
        let inserted = insert_point(params, &mu, grid, tol).or_else(|| insert_point(params, &mu, diag, tol));
        match inserted {
            Some(ins) => mu = ins.measure,
            None if motion.steps_accepted == 0 && ws.stationarity <= tol.station_tol => {
                termination = TerminationReason::Stalled;
                break;
            }
            None => {}
        }
    }
    let (el, stationarity) = last.expect("at least one outer iteration");
    if mu.weights().contains(&0.0) {
        let (points, weights) = mu
            .points()
            .iter()
            .zip(mu.weights())
            .filter(|(_, &w)| w > 0.0)
            .map(|(p, &w)| (*p, w))
            .unzip();
        mu = DiscreteMeasure::from_parts_unchecked(points, weights);
    }
    debug!(
        "restart {restart}: action {:.12} after {} iterations ({:?})",
        trace.last().map(|r| r.action).unwrap_or(f64::NAN),
        trace.len(),
        termination
    );
    Ok(SingleRun {
        restart,
        warm,
        action: action(params, &mu),
        measure: mu,
        trace,
        el,
        stationarity,
        termination,
    })
}

fn run_many(
    params: &ModelParams,
    cfg: &OptimizerConfig,
    warm_start: Option<&DiscreteMeasure>,
) -> Result<RunReport> {
    cfg.validate()?;
    let started = Instant::now();
    let grid = sphere_grid(cfg.grid_resolution)?;
    let diag = sphere_grid(cfg.grid_resolution * DIAGNOSTIC_REFINEMENT)?;
    let mut starts: Vec<(usize, DiscreteMeasure, bool)> = (0..cfg.restarts)
        .map(|r| (r, initial_measure(cfg.n_init, &mut restart_rng(cfg.seed, r)), false))
        .collect();
    if let Some(w) = warm_start {
        starts.push((cfg.restarts, w.clone(), true));
    }
    let runs: Vec<SingleRun> = starts
        .into_par_iter()
        .map(|(r, start, warm)| run_single(params, cfg, &grid, &diag, r, start, warm))
        .collect::<Result<_>>()?;
    let restarts = runs
        .iter()
        .map(|r| RestartSummary {
            restart: r.restart,
            warm: r.warm,
            action: r.action,
            n_points: r.measure.len(),
            termination: r.termination,
        })
        .collect();
    let best = runs
        .into_iter()
        .min_by(|a, b| {
            a.action
                .total_cmp(&b.action)
                .then(a.measure.len().cmp(&b.measure.len()))
                .then(a.restart.cmp(&b.restart))
        })
        .expect("at least one restart");
    let tol = &cfg.tolerances;
    let dim_estimate = box_dimension(&best.measure, &dyadic_scales(3, 9), tol.weight_floor)
        .map(|b| b.estimate)
        .unwrap_or(f64::NAN);
    Ok(RunReport {
        tau: cfg.tau,
        seed: cfg.seed,
        restart: best.restart,
        lower_bound: lower_bound(params, &best.measure),
        action: best.action,
        n_clusters: n_clusters(&best.measure, tol),
        dim_estimate,
        trace: best.trace,
        el: best.el,
        stationarity: best.stationarity,
        termination: best.termination,
        measure: best.measure,
        restarts,
        wall_time_secs: started.elapsed().as_secs_f64(),
    })
}

/// Best-of-multistart minimization. Restarts run concurrently; the result
/// only depends on the configuration.
pub fn minimize(cfg: &OptimizerConfig) -> Result<RunReport> {
    let params = ModelParams::new(cfg.tau)?;
    run_many(&params, cfg, None)
}

/// Minimizes at each τ in order; every run after the first also starts from
/// the previous minimizer in addition to the fresh restarts.
pub fn tau_sweep(cfg: &OptimizerConfig, taus: &[f64]) -> Result<Vec<RunReport>> {
    let mut reports: Vec<RunReport> = Vec::with_capacity(taus.len());
    for &tau in taus {
        let run_cfg = OptimizerConfig { tau, ..cfg.clone() };
        let params = ModelParams::new(tau)?;
        let warm = reports.last().map(|r| r.measure.clone());
        reports.push(run_many(&params, &run_cfg, warm.as_ref())?);
    }
    Ok(reports)
}

/// Minimizes at `tau` starting from `start` only (no fresh restarts).
pub fn minimize_from(cfg: &OptimizerConfig, start: &DiscreteMeasure) -> Result<RunReport> {
    let params = ModelParams::new(cfg.tau)?;
    cfg.validate()?;
    let started = Instant::now();
    let grid = sphere_grid(cfg.grid_resolution)?;
    let diag = sphere_grid(cfg.grid_resolution * DIAGNOSTIC_REFINEMENT)?;
    let run = run_single(&params, cfg, &grid, &diag, 0, start.clone(), true)?;
    let tol = &cfg.tolerances;
    Ok(RunReport {
        tau: cfg.tau,
        seed: cfg.seed,
        restart: 0,
        lower_bound: lower_bound(&params, &run.measure),
        action: run.action,
        n_clusters: n_clusters(&run.measure, tol),
        dim_estimate: box_dimension(&run.measure, &dyadic_scales(3, 9), tol.weight_floor)
            .map(|b| b.estimate)
            .unwrap_or(f64::NAN),
        restarts: vec![RestartSummary {
            restart: 0,
            warm: true,
            action: run.action,
            n_points: run.measure.len(),
            termination: run.termination,
        }],
        trace: run.trace,
        el: run.el,
        stationarity: run.stationarity,
        termination: run.termination,
        measure: run.measure,
        wall_time_secs: started.elapsed().as_secs_f64(),
    })
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::angle_between;
    use crate::tolerances::WEIGHT_FLOOR;

    fn params(tau: f64) -> ModelParams {
        ModelParams::new(tau).unwrap()
    }

    fn octahedron_points() -> Vec<SpherePoint> {
        let mut pts = Vec::new();
        for k in 0..3 {
            for s in [1.0, -1.0] {
                let mut v = [0.0; 3];
                v[k] = s;
                pts.push(SpherePoint::from_vector(v).unwrap());
            }
        }
        pts
    }

    #[test]
    fn weight_examples() {
        let p = SpherePoint::north();
        let w = optimize_weights(&params(1.5), &[p, p.antipode()], &[0.9, 0.1], 1e-12, 10_000).unwrap();
        assert!((w.weights[0] - 0.5).abs() < 1e-12 && w.converged);

        let oct = octahedron_points();
        let w0 = [0.3, 0.1, 0.1, 0.2, 0.25, 0.05];
        let w = optimize_weights(&params(2.0), &oct, &w0, 1e-12, 100_000).unwrap();
        for v in &w.weights {
            assert!((v - 1.0 / 6.0).abs() < 1e-11, "{:?}", w.weights);
        }

        let w = optimize_weights(&params(2.0), &[p], &[1.0], 1e-12, 10).unwrap();
        assert_eq!(w.weights, vec![1.0]);
        assert!(optimize_weights(&params(2.0), &[p], &[0.5], 1e-12, 10).is_err());
    }

    #[test]
    fn weights_escape_negative_curvature() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..20 {
            let p = params(2.0);
            let pts: Vec<SpherePoint> = (0..14).map(|_| SpherePoint::random(&mut rng)).collect();
            let w0 = vec![1.0 / 14.0; 14];
            let sol = optimize_weights(&p, &pts, &w0, 1e-12, 200_000).unwrap();
            let l = lagrangian_matrix(&p, &pts);
            assert!(negative_curvature_step(&l, &sol.weights).is_none());
        }
    }

    #[test]
    fn weights_reach_first_order_stationarity() {
        let mut rng = restart_rng(8, 0);
        for &tau in &[1.2, 1.8, 2.7] {
            let pr = params(tau);
            let mu = initial_measure(20, &mut rng);
            let tol = 1e-10;
            let sol = optimize_weights(&pr, mu.points(), mu.weights(), tol, 1_000_000).unwrap();
            assert!(sol.converged);
            let out = mu.with_weights(sol.weights.clone());
            assert!(action(&pr, &out) <= action(&pr, &mu) + 1e-15);
            let grads: Vec<f64> = out.points().iter().map(|p| 2.0 * ell(&pr, &out, p)).collect();
            let hi = (0..20)
                .filter(|&i| sol.weights[i] > WEIGHT_FLOOR)
                .map(|i| grads[i])
                .fold(f64::NEG_INFINITY, f64::max);
            let lo_support = (0..20)
                .filter(|&i| sol.weights[i] > WEIGHT_FLOOR)
                .map(|i| grads[i])
                .fold(f64::INFINITY, f64::min);
            assert!(hi - lo_support <= tol * 1.01);
            for (w, g) in sol.weights.iter().zip(&grads) {
                if *w == 0.0 {
                    assert!(hi <= g + tol * 1.01);
                }
            }
        }
    }

    #[test]
    fn perturbed_antipodal_pair_separates() {
        let pr = params(1.0);
        let p = SpherePoint::north();
        let q = SpherePoint::from_spherical(std::f64::consts::PI - 0.1, 0.0);
        let mu = DiscreteMeasure::new(vec![p, q], vec![0.5, 0.5]).unwrap();
        let tol = Tolerances::default();
        let out = move_points(&pr, &mu, 200, &tol);
        assert!(out.action_after < out.action_before);
        let sep = angle_between(&out.measure.points()[0], &out.measure.points()[1]);
        assert!(sep > std::f64::consts::PI - 0.1);
        // Along the geodesic, S(θ) = ½ + ½ L(θ) with L(θ) = ¼(1 + cos θ)².
        let expected = 0.5 + 0.5 * 0.25 * (1.0 + sep.cos()).powi(2);
        assert!((out.action_after - expected).abs() < 1e-14);
        assert!(out.action_after - 0.5 < 0.5 * 0.25 * (1.0 + (std::f64::consts::PI - 0.1).cos()).powi(2));
    }

    #[test]
    fn octahedron_is_flat_at_tau_two() {
        let mu = DiscreteMeasure::uniform(octahedron_points()).unwrap();
        for g in action_gradient(&params(2.0), &mu) {
            assert_eq!(g, [0.0; 3]);
        }
        let out = move_points(&params(2.0), &mu, 10, &Tolerances::default());
        assert_eq!(out.measure, mu);
    }

    #[test]
    fn motion_never_increases_action() {
        let tol = Tolerances::default();
        for seed in 0..20 {
            let mut rng = restart_rng(seed, 3);
            let mu = initial_measure(5 + seed as usize, &mut rng);
            let pr = params(1.0 + 0.15 * seed as f64);
            let out = move_points(&pr, &mu, 15, &tol);
            assert!(action(&pr, &out.measure) <= action(&pr, &mu) + 1e-12);
        }
    }

    #[test]
    fn insertion_step_closed_form() {
        // δ_p: S = 1, ℓ(−p) = 0 → t = ½, new action ½.
        let (t, dec) = insertion_step(1.0, 0.0);
        assert!((t - 0.5).abs() < 1e-15 && (dec - 0.5).abs() < 1e-15);
        assert_eq!(insertion_step(0.3, 0.3), (0.0, 0.0));
        assert_eq!(insertion_step(0.3, 0.4), (0.0, 0.0));
    }

    #[test]
    fn inserting_into_a_dirac() {
        let p = SpherePoint::north();
        let mu = DiscreteMeasure::dirac(p);
        let grid = sphere_grid(2000).unwrap();
        let ins = insert_point(&params(1.0), &mu, &grid, &Tolerances::default()).unwrap();
        assert!(angle_between(&ins.point, &p.antipode()) < 0.05);
        assert!((ins.step - 0.5).abs() < 1e-6);
        assert!((action(&params(1.0), &ins.measure) - 0.5).abs() < 1e-6);
    }

    #[test]
    fn insertion_decrease_matches_direct_evaluation() {
        // The octahedron is not stationary at τ = 2: face centres see three
        // vertices inside their light cone with ℓ ≈ 0.061 < 1/6.
        let pr = params(2.0);
        let mu = DiscreteMeasure::uniform(octahedron_points()).unwrap();
        let grid = sphere_grid(4000).unwrap();
        let ins = insert_point(&pr, &mu, &grid, &Tolerances::default()).unwrap();
        let before = action(&pr, &mu);
        let after = action(&pr, &ins.measure);
        assert!((before - after - ins.decrease).abs() < 1e-14);
        assert!(after < before);
    }

    #[test]
    fn no_insertion_at_el_equilibrium() {
        // Uniform grid measure at τ = 1 has ℓ ≡ 1/3 up to quadrature error.
        let grid = sphere_grid(3000).unwrap();
        let mu = DiscreteMeasure::new(grid.points.clone(), grid.weights.clone()).unwrap();
        let tol = Tolerances {
            insert_tol: 1e-3,
            ..Tolerances::default()
        };
        assert!(insert_point(&params(1.0), &mu, &sphere_grid(500).unwrap(), &tol).is_none());
    }

    #[test]
    fn prune_examples() {
        let tol = Tolerances::default();
        let p = SpherePoint::north();
        let q = SpherePoint::from_spherical(1.0, 1.0);
        let mu = DiscreteMeasure::new(vec![p, q], vec![1.0, 0.0]).unwrap();
        assert_eq!(prune(&mu, &tol).unwrap().len(), 1);
        let mu = DiscreteMeasure::new(vec![q, q], vec![0.25, 0.75]).unwrap();
        let out = prune(&mu, &tol).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out.weights(), &[1.0]);
        let mu = DiscreteMeasure::new(vec![p, q], vec![0.4, 0.6]).unwrap();
        assert_eq!(prune(&mu, &tol).unwrap(), mu);
    }

    #[test]
    fn config_validation() {
        assert!(OptimizerConfig::default().validate().is_ok());
        let bad = OptimizerConfig { tau: 0.5, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = OptimizerConfig { restarts: 0, ..Default::default() };
        assert!(bad.validate().is_err());
        let mut bad = OptimizerConfig::default();
        bad.tolerances.el_tol = 0.0;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn restart_streams_differ() {
        let a = initial_measure(10, &mut restart_rng(1, 0));
        let b = initial_measure(10, &mut restart_rng(1, 1));
        let c = initial_measure(10, &mut restart_rng(1, 0));
        assert_ne!(a, b);
        assert_eq!(a, c);
    }
}
