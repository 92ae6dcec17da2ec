//! Certificate pipeline shared by `optimize`, `sweep` and `diagnose`.

use causal_sphere::diagnostics::{box_dimension, dyadic_scales, lightcone_audit, nodal_fit, AuditRow, ScaleCount};
use causal_sphere::geometry::{fibonacci_point, sphere_grid, totally_timelike_cap, SpherePoint};
use causal_sphere::measure::{el_residual, gram_of, DiscreteMeasure, ElResidual};
use causal_sphere::tolerances::{CLUSTER_RADIUS, WEIGHT_FLOOR};
use causal_sphere::ModelParams;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::DiagnoseConfig;

#[derive(Clone, Debug, Serialize)]
pub struct CapRow {
    pub cap: usize,
    pub center_x: f64,
    pub center_y: f64,
    pub center_z: f64,
    pub n_points: usize,
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub ratio: f64,
    pub under_determined: bool,
    /// Enough support points for the certificate to be judged.
    pub judged: bool,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct AuditCsvRow {
    pub cluster: usize,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub weight: f64,
    pub witness: Option<usize>,
    pub deviation: f64,
    pub pass: bool,
}

impl From<&AuditRow> for AuditCsvRow {
    fn from(r: &AuditRow) -> Self {
        let [x, y, z] = r.center.coords();
        AuditCsvRow {
            cluster: r.cluster,
            x,
            y,
            z,
            weight: r.weight,
            witness: r.witness,
            deviation: r.deviation,
            pass: r.pass,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Verdict {
    /// Whether the underlying result covers this τ.
    pub applicable: bool,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct NodalSummary {
    pub verdict: Verdict,
    pub caps_fitted: usize,
    pub caps_judged: usize,
    pub worst_ratio: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct AuditSummary {
    pub verdict: Verdict,
    pub clusters: usize,
    pub worst_deviation: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct DiagnosticsReport {
    pub tau: f64,
    pub n_points: usize,
    pub n_support: usize,
    pub el: ElResidual,
    pub el_pass: bool,
    pub gram_min_eigenvalue: f64,
    pub gram_pass: bool,
    pub nodal: NodalSummary,
    pub audit: AuditSummary,
    pub box_dimension: f64,
    pub passed: bool,
}

pub struct Diagnostics {
    pub report: DiagnosticsReport,
    pub caps: Vec<CapRow>,
    pub audit: Vec<AuditCsvRow>,
    pub box_counts: Vec<ScaleCount>,
}

pub fn diagnose(params: &ModelParams, mu: &DiscreteMeasure, cfg: &DiagnoseConfig) -> causal_sphere::Result<Diagnostics> {
    let tau = params.tau();
    let grid = sphere_grid(cfg.grid_resolution)?;
    let el = el_residual(params, mu, &grid, WEIGHT_FLOOR);
    let el_pass = el.spread_on_support <= cfg.el_tol && el.exterior_gap >= -cfg.el_tol;

    let support = mu.support_indices(WEIGHT_FLOOR);
    let gram_min = gram_of(params, mu, &support).min_eigenvalue();
    let gram_pass = gram_min >= -cfg.gram_tol;

    let centers: Vec<SpherePoint> = (0..cfg.cap_centers)
        .map(|i| fibonacci_point(i, cfg.cap_centers))
        .chain(support.iter().map(|&i| mu.points()[i]))
        .collect();
    let fits: Vec<Option<CapRow>> = centers
        .par_iter()
        .enumerate()
        .map(|(k, c)| {
            let cap = totally_timelike_cap(params, *c);
            let n = support.iter().filter(|&&i| cap.contains(&mu.points()[i])).count();
            if n == 0 {
                return None;
            }
            let cert = nodal_fit(mu, &cap, WEIGHT_FLOOR).ok()?;
            let [x, y, z] = c.coords();
            let judged = n >= cfg.cap_min_points;
            Some(CapRow {
                cap: k,
                center_x: x,
                center_y: y,
                center_z: z,
                n_points: n,
                sigma_min: cert.sigma_min,
                sigma_max: cert.sigma_max,
                ratio: cert.ratio(),
                under_determined: cert.under_determined,
                judged,
                pass: !judged || cert.ratio() <= cfg.nodal_ratio_tol,
            })
        })
        .collect();
    let caps: Vec<CapRow> = fits.into_iter().flatten().collect();
    let judged: Vec<&CapRow> = caps.iter().filter(|c| c.judged).collect();
    let nodal = NodalSummary {
        verdict: Verdict {
            applicable: tau > 3f64.sqrt(),
            pass: judged.iter().all(|c| c.pass),
        },
        caps_fitted: caps.len(),
        caps_judged: judged.len(),
        worst_ratio: judged.iter().map(|c| c.ratio).reduce(f64::max),
    };

    let support_mu = DiscreteMeasure::from_unnormalized(
        support.iter().map(|&i| mu.points()[i]).collect(),
        support.iter().map(|&i| mu.weights()[i]).collect(),
    )?;
    let rows = lightcone_audit(params, &support_mu, cfg.audit_tol, CLUSTER_RADIUS);
    let audit = AuditSummary {
        verdict: Verdict {
            applicable: tau > 2.0,
            pass: rows.iter().all(|r| r.pass),
        },
        clusters: rows.len(),
        worst_deviation: rows.iter().map(|r| r.deviation).fold(0.0, f64::max),
    };

    let [from, to] = cfg.scale_exponents;
    let boxes = box_dimension(mu, &dyadic_scales(from, to), WEIGHT_FLOOR)?;

    let counts = |v: &Verdict| !v.applicable || v.pass;
    let passed = el_pass && gram_pass && counts(&nodal.verdict) && counts(&audit.verdict);
    Ok(Diagnostics {
        report: DiagnosticsReport {
            tau,
            n_points: mu.len(),
            n_support: support.len(),
            el,
            el_pass,
            gram_min_eigenvalue: gram_min,
            gram_pass,
            nodal,
            audit,
            box_dimension: boxes.estimate,
            passed,
        },
        caps,
        audit: rows.iter().map(AuditCsvRow::from).collect(),
        box_counts: boxes.counts,
    })
}
