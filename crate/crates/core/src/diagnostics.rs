//! Structure probes and certificates for (candidate) minimizers.
//!
//! * [`nodal_fit`]: smallest singular vector of the harmonic design matrix of
//!   the support inside a totally timelike cap. A vanishing singular value
//!   means the support lies on the zero set of a quadratic.
//! * [`lightcone_audit`]: every support cluster should see another cluster
//!   exactly on its light cone.
//! * [`box_dimension`]: box counting on Fibonacci cells.
//! * [`two_sided_probe`]: checks the two-sided accumulation windows
//!   `(ε^{1+β}, ε)` on a dyadic ε grid.
//! * [`sign_lemma_suite`] and [`kernel_suite`]: dense sign sweeps and kernel
//!   identities.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{angle_between, fibonacci_cell, Cap, SpherePoint};
use crate::harmonics::{real_harmonics, N_HARMONICS};
use crate::kernel::{
    d_double_prime, d_harmonic, d_of_angle, d_prime, laplacian_d, ModelParams,
};
use crate::measure::{single_linkage, DiscreteMeasure};

/// Upper limit on β in the accumulation regime used by the dimension bound.
pub const BETA_REGIME_BOUND: f64 = 1.0 / 6.0;

/// Number of dyadic ε levels checked by [`two_sided_probe`].
pub const PROBE_LEVELS: usize = 30;

// ---------------------------------------------------------------------------
// Nodal fit

/// Quadratic (an element of the nine-dimensional harmonic space) that best
/// vanishes on the support inside a cap.
#[derive(Clone, Debug, Serialize)]
pub struct QuadraticCertificate {
    /// Unit-norm coefficients in the real harmonic basis.
    pub coefficients: [f64; N_HARMONICS],
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub cap: Cap,
    pub n_points_used: usize,
    /// Fewer than nine points: some quadratic always vanishes on them.
    pub under_determined: bool,
}

impl QuadraticCertificate {
    pub fn ratio(&self) -> f64 {
        if self.sigma_max > 0.0 {
            self.sigma_min / self.sigma_max
        } else {
            0.0
        }
    }

    pub fn evaluate(&self, p: &SpherePoint) -> f64 {
        let h = real_harmonics(p);
        h.iter().zip(&self.coefficients).map(|(a, b)| a * b).sum()
    }
}

pub fn nodal_fit(mu: &DiscreteMeasure, cap: &Cap, weight_floor: f64) -> Result<QuadraticCertificate> {
    let pts: Vec<SpherePoint> = mu
        .support_indices(weight_floor)
        .into_iter()
        .map(|i| mu.points()[i])
        .filter(|p| cap.contains(p))
        .collect();
    nodal_fit_points(&pts, cap)
}

/// Unweighted fit through the given points (assumed inside `cap`).
pub fn nodal_fit_points(pts: &[SpherePoint], cap: &Cap) -> Result<QuadraticCertificate> {
    if pts.is_empty() {
        return Err(Error::EmptyCap);
    }
    let rows = pts.len().max(N_HARMONICS);
    let mut a = DMatrix::<f64>::zeros(rows, N_HARMONICS);
    for (r, p) in pts.iter().enumerate() {
        for (c, v) in real_harmonics(p).iter().enumerate() {
            a[(r, c)] = *v;
        }
    }
    let svd = a.svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let (imin, sigma_min) = svd
        .singular_values
        .iter()
        .copied()
        .enumerate()
        .min_by(|x, y| x.1.total_cmp(&y.1))
        .expect("nine singular values");
    let sigma_max = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let mut coefficients = [0.0; N_HARMONICS];
    for (k, c) in coefficients.iter_mut().enumerate() {
        *c = v_t[(imin, k)];
    }
    // Fix the sign: largest-magnitude coefficient positive.
    let lead = coefficients
        .iter()
        .copied()
        .fold(0.0f64, |acc, v| if v.abs() > acc.abs() { v } else { acc });
    if lead < 0.0 {
        coefficients.iter_mut().for_each(|c| *c = -*c);
    }
    let under_determined = pts.len() < N_HARMONICS;
    Ok(QuadraticCertificate {
        coefficients,
        sigma_min: if under_determined { 0.0 } else { sigma_min },
        sigma_max,
        cap: *cap,
        n_points_used: pts.len(),
        under_determined,
    })
}

// ---------------------------------------------------------------------------
// Clustering and light-cone audit

#[derive(Clone, Debug, Serialize)]
pub struct Cluster {
    pub center: SpherePoint,
    pub weight: f64,
    /// Indices into the measure.
    pub members: Vec<usize>,
}

/// Single-linkage clusters at angular `radius`, after sorting points
/// lexicographically by coordinates so the result does not depend on the
/// input order.
pub fn cluster_support(mu: &DiscreteMeasure, radius: f64) -> Vec<Cluster> {
    let mut order: Vec<usize> = (0..mu.len()).collect();
    order.sort_by(|&a, &b| {
        let (pa, pb) = (mu.points()[a].coords(), mu.points()[b].coords());
        pa[0].total_cmp(&pb[0])
            .then(pa[1].total_cmp(&pb[1]))
            .then(pa[2].total_cmp(&pb[2]))
            .then(a.cmp(&b))
    });
    let sorted: Vec<SpherePoint> = order.iter().map(|&i| mu.points()[i]).collect();
    single_linkage(&sorted, radius)
        .into_iter()
        .map(|group| {
            let members: Vec<usize> = group.iter().map(|&k| order[k]).collect();
            let weight: f64 = members.iter().map(|&i| mu.weights()[i]).sum();
            let mut acc = [0.0; 3];
            for &i in &members {
                let w = if weight > 0.0 { mu.weights()[i] } else { 1.0 };
                let c = mu.points()[i].coords();
                for k in 0..3 {
                    acc[k] += w * c[k];
                }
            }
            let center = SpherePoint::from_vector(acc).unwrap_or(mu.points()[members[0]]);
            Cluster { center, weight, members }
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct AuditRow {
    pub cluster: usize,
    pub center: SpherePoint,
    pub weight: f64,
    /// Cluster whose angle to this one is closest to `θ_max`.
    pub witness: Option<usize>,
    /// `|θ − θ_max|` for the witness (infinite without one).
    pub deviation: f64,
    pub pass: bool,
}

pub fn lightcone_audit(
    params: &ModelParams,
    mu: &DiscreteMeasure,
    tol_angle: f64,
    cluster_radius: f64,
) -> Vec<AuditRow> {
    let clusters = cluster_support(mu, cluster_radius);
    let tm = params.theta_max();
    (0..clusters.len())
        .map(|i| {
            let best = (0..clusters.len())
                .filter(|&j| j != i)
                .map(|j| (j, (angle_between(&clusters[i].center, &clusters[j].center) - tm).abs()))
                .min_by(|a, b| a.1.total_cmp(&b.1));
            let (witness, deviation) = match best {
                Some((j, d)) => (Some(j), d),
                None => (None, f64::INFINITY),
            };
            AuditRow {
                cluster: i,
                center: clusters[i].center,
                weight: clusters[i].weight,
                witness,
                deviation,
                pass: deviation <= tol_angle,
            }
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Box counting

#[derive(Clone, Debug, Serialize)]
pub struct ScaleCount {
    pub scale: f64,
    pub cells: usize,
    pub occupied: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct BoxDimension {
    pub estimate: f64,
    pub counts: Vec<ScaleCount>,
}

/// Number of Fibonacci cells of linear size about `scale`.
pub fn cells_for_scale(scale: f64) -> usize {
    ((4.0 * PI / (scale * scale)).ceil() as usize).max(1)
}

/// `scale_k = 2^{−k}` for `k` in `from..=to`.
pub fn dyadic_scales(from: i32, to: i32) -> Vec<f64> {
    (from..=to).map(|k| 2f64.powi(-k)).collect()
}

pub fn box_dimension(mu: &DiscreteMeasure, scales: &[f64], weight_floor: f64) -> Result<BoxDimension> {
    let pts: Vec<SpherePoint> = mu
        .support_indices(weight_floor)
        .into_iter()
        .map(|i| mu.points()[i])
        .collect();
    box_dimension_of_points(&pts, scales)
}

/// Least-squares slope of `log N(ε)` against `log(1/ε)`.
pub fn box_dimension_of_points(pts: &[SpherePoint], scales: &[f64]) -> Result<BoxDimension> {
    use rayon::prelude::*;
    if scales.len() < 2 {
        return Err(Error::Domain {
            what: "number of box-counting scales",
            value: scales.len() as f64,
        });
    }
    if let Some(&s) = scales.iter().find(|&&s| !(s > 0.0 && s < PI)) {
        return Err(Error::Domain { what: "box-counting scale", value: s });
    }
    let counts: Vec<ScaleCount> = scales
        .iter()
        .map(|&scale| {
            let cells = cells_for_scale(scale);
            let mut ids: Vec<usize> = pts.par_iter().map(|p| fibonacci_cell(p, cells)).collect();
            ids.sort_unstable();
            ids.dedup();
            ScaleCount { scale, cells, occupied: ids.len() }
        })
        .collect();
    let xs: Vec<f64> = counts.iter().map(|c| (1.0 / c.scale).ln()).collect();
    let ys: Vec<f64> = counts.iter().map(|c| (c.occupied.max(1) as f64).ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let estimate = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    Ok(BoxDimension { estimate, counts })
}

// ---------------------------------------------------------------------------
// Two-sided accumulation probe

/// Sampled curve parameters around a candidate accumulation point at `t = 0`.
#[derive(Clone, Debug, Serialize)]
pub struct AccumulationProbe {
    t: Vec<f64>,
    beta: f64,
    epsilon_0: f64,
}

impl AccumulationProbe {
    /// Sorts and deduplicates `t`; requires `beta, epsilon_0 > 0`.
    pub fn new(mut t: Vec<f64>, beta: f64, epsilon_0: f64) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::Domain { what: "beta", value: beta });
        }
        if !(epsilon_0 > 0.0 && epsilon_0 < 1.0) {
            return Err(Error::Domain { what: "epsilon_0", value: epsilon_0 });
        }
        if let Some(&bad) = t.iter().find(|v| !v.is_finite()) {
            return Err(Error::Domain { what: "curve parameter", value: bad });
        }
        t.sort_by(f64::total_cmp);
        t.dedup();
        Ok(AccumulationProbe { t, beta, epsilon_0 })
    }

    pub fn t(&self) -> &[f64] {
        &self.t
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn epsilon_0(&self) -> f64 {
        self.epsilon_0
    }

    pub fn with_beta(&self, beta: f64) -> Result<Self> {
        Self::new(self.t.clone(), beta, self.epsilon_0)
    }

    fn any_in_open(&self, lo: f64, hi: f64) -> bool {
        let start = self.t.partition_point(|&v| v <= lo);
        start < self.t.len() && self.t[start] < hi
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ProbeLevel {
    pub epsilon: f64,
    pub minus: bool,
    pub plus: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ProbeVerdict {
    pub levels: Vec<ProbeLevel>,
    /// Smallest nonzero `|t|`; levels with `ε` at or below it are not tested.
    pub resolution_floor: f64,
    pub pass: bool,
}

/// For `ε = ε₀ 2^{−k}`, `k = 0..30`, looks for `t₋ ∈ (−ε, −ε^{1+β})` and
/// `t₊ ∈ (ε^{1+β}, ε)`. Passes iff every tested level has both.
pub fn two_sided_probe(probe: &AccumulationProbe) -> ProbeVerdict {
    let floor = probe
        .t
        .iter()
        .map(|v| v.abs())
        .filter(|&v| v > 0.0)
        .fold(f64::INFINITY, f64::min);
    let levels: Vec<ProbeLevel> = (0..PROBE_LEVELS)
        .map(|k| probe.epsilon_0 * 0.5f64.powi(k as i32))
        .take_while(|&eps| eps > floor)
        .map(|eps| {
            let inner = eps.powf(1.0 + probe.beta);
            ProbeLevel {
                epsilon: eps,
                minus: probe.any_in_open(-eps, -inner),
                plus: probe.any_in_open(inner, eps),
            }
        })
        .collect();
    let pass = !levels.is_empty() && levels.iter().all(|l| l.minus && l.plus);
    ProbeVerdict {
        levels,
        resolution_floor: floor,
        pass,
    }
}

// ---------------------------------------------------------------------------
// Sign lemmas and kernel identities

#[derive(Clone, Debug, Serialize)]
pub struct SignCheck {
    pub name: &'static str,
    /// Whether τ lies in the regime where the claim is made.
    pub applicable: bool,
    pub passed: bool,
    /// First sampled angle violating the claim (or, for sign-change checks,
    /// the first angle where the sign flips).
    pub witness: Option<f64>,
    pub samples: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct SignLemmaReport {
    pub tau: f64,
    pub beta_regime_bound: f64,
    pub checks: Vec<SignCheck>,
}

impl SignLemmaReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| !c.applicable || c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&SignCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

fn sweep<F: Fn(f64) -> f64>(
    f: F,
    lo: f64,
    hi: f64,
    include_lo: bool,
    samples: usize,
) -> impl Iterator<Item = (f64, f64)> {
    let first = if include_lo { 0 } else { 1 };
    (first..=samples).map(move |i| {
        let theta = lo + (hi - lo) * i as f64 / samples as f64;
        (theta, f(theta))
    })
}

/// Dense sign verification on `[0, θ_max]`:
///
/// * `d_prime_negative`, `d_double_prime_negative`: on `(0, θ_max]`, τ > √6;
/// * `laplacian_negative`: on `[0, θ_max]`, τ > 2;
/// * `d_double_prime_changes_sign`: on `[0, θ_max]`, `2 < τ < √6`.
pub fn sign_lemma_suite(params: &ModelParams, samples: usize) -> SignLemmaReport {
    let tau = params.tau();
    let tm = params.theta_max();
    let first_nonneg = |f: &dyn Fn(f64) -> f64, include_lo| {
        sweep(f, 0.0, tm, include_lo, samples).find(|(_, v)| !(*v < 0.0)).map(|(t, _)| t)
    };
    let dp = |t| d_prime(params, t).unwrap();
    let dpp = |t| d_double_prime(params, t).unwrap();
    let lap = |t| laplacian_d(params, t).unwrap();

    let mut checks = Vec::new();
    let steep = tau > 6f64.sqrt();
    for (name, f) in [
        ("d_prime_negative", &dp as &dyn Fn(f64) -> f64),
        ("d_double_prime_negative", &dpp),
    ] {
        let witness = first_nonneg(f, false);
        checks.push(SignCheck {
            name,
            applicable: steep,
            passed: witness.is_none(),
            witness,
            samples,
        });
    }
    let witness = first_nonneg(&lap, true);
    checks.push(SignCheck {
        name: "laplacian_negative",
        applicable: tau > 2.0,
        passed: witness.is_none(),
        witness,
        samples: samples + 1,
    });
    let s0 = dpp(0.0).signum();
    let flip = sweep(dpp, 0.0, tm, true, samples)
        .find(|(_, v)| v.signum() != s0 && *v != 0.0)
        .map(|(t, _)| t);
    checks.push(SignCheck {
        name: "d_double_prime_changes_sign",
        applicable: tau > 2.0 && !steep,
        passed: flip.is_some(),
        witness: flip,
        samples: samples + 1,
    });
    SignLemmaReport {
        tau,
        beta_regime_bound: BETA_REGIME_BOUND,
        checks,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct KernelCheck {
    pub tau: f64,
    pub name: &'static str,
    /// Worst observed value of the checked quantity.
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
    /// Angle (radians) at which `value` was observed, when meaningful.
    pub at_theta: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct KernelSuiteReport {
    pub checks: Vec<KernelCheck>,
    pub sign_lemmas: Vec<SignLemmaReport>,
}

impl KernelSuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed) && self.sign_lemmas.iter().all(|r| r.passed())
    }
}

pub const HARMONIC_IDENTITY_TOL: f64 = 1e-10;
pub const ZERO_TOL: f64 = 1e-12;

/// Kernel identities for each τ in `taus`: the harmonic expansion against
/// the closed form on `n_pairs` random pairs, the zeros at `θ_max` and π,
/// the sign pattern of `D`, and the sign lemmas.
///
/// `nu_override` replaces the expansion coefficients (fault injection).
pub fn kernel_suite(
    taus: &[f64],
    n_pairs: usize,
    samples: usize,
    seed: u64,
    nu_override: Option<[f64; 3]>,
) -> Result<KernelSuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks = Vec::new();
    let mut sign_lemmas = Vec::new();
    for &tau in taus {
        let mut params = ModelParams::new(tau)?;
        if let Some(nu) = nu_override {
            params = params.with_nu_override(nu);
        }
        let mut worst = (0.0f64, None);
        for _ in 0..n_pairs {
            let x = SpherePoint::random(&mut rng);
            let y = SpherePoint::random(&mut rng);
            let theta = angle_between(&x, &y);
            let err = (d_harmonic(&params, &x, &y) - d_of_angle(&params, theta)?).abs();
            if !(err <= worst.0) {
                worst = (err, Some(theta));
            }
        }
        checks.push(KernelCheck {
            tau,
            name: "harmonic_identity",
            value: worst.0,
            threshold: HARMONIC_IDENTITY_TOL,
            passed: worst.0 <= HARMONIC_IDENTITY_TOL,
            at_theta: worst.1,
        });
        let tm = params.theta_max();
        let zeros = d_of_angle(&params, tm)?.abs().max(d_of_angle(&params, PI)?.abs());
        checks.push(KernelCheck {
            tau,
            name: "zeros_at_theta_max_and_pi",
            value: zeros,
            threshold: ZERO_TOL,
            passed: zeros <= ZERO_TOL,
            at_theta: Some(tm),
        });
        let bad = (0..samples)
            .map(|i| PI * (i as f64 + 0.5) / samples as f64)
            .filter(|&t| (t - tm).abs() > 1e-9)
            .find(|&t| {
                let d = d_of_angle(&params, t).unwrap();
                if t < tm { !(d > 0.0) } else { !(d < 0.0) }
            });
        checks.push(KernelCheck {
            tau,
            name: "sign_pattern",
            value: if bad.is_some() { 1.0 } else { 0.0 },
            threshold: 0.0,
            passed: bad.is_none(),
            at_theta: bad,
        });
        sign_lemmas.push(sign_lemma_suite(&params, samples));
    }
    Ok(KernelSuiteReport { checks, sign_lemmas })
}
