use std::path::{Path, PathBuf};

use causal_sphere::diagnostics::kernel_suite;
use causal_sphere::io::{load_measure, save_measure};
use causal_sphere::kernel::harmonic_coefficients;
use causal_sphere::optimizer::{minimize, tau_sweep, RunReport};
use causal_sphere::ModelParams;
use log::{info, warn};
use serde::Serialize;

use crate::checks::{diagnose as run_checks, Diagnostics};
use crate::config::ExperimentConfig;
use crate::failure::{Failure, EXIT_CERTIFICATE, EXIT_NOT_CONVERGED};
use crate::output::{ensure_dir, write_csv, write_json, RunLog};
use crate::{Fault, Overrides};

fn load_config(o: &Overrides) -> Result<ExperimentConfig, Failure> {
    let mut cfg = ExperimentConfig::load(o.config.as_deref())?;
    if let Some(t) = o.tau {
        cfg.optimizer.tau = t;
    }
    if let Some(s) = o.seed {
        cfg.optimizer.seed = s;
    }
    if let Some(r) = o.restarts {
        cfg.optimizer.restarts = r;
    }
    if let Some(out) = &o.out {
        cfg.out = Some(out.clone());
    }
    Ok(cfg)
}

fn write_diagnostics(dir: &Path, d: &Diagnostics) -> Result<(), Failure> {
    write_json(&dir.join("diagnostics.json"), &d.report)?;
    write_csv(&dir.join("audit.csv"), &d.audit)?;
    write_csv(&dir.join("box_counts.csv"), &d.box_counts)?;
    write_csv(&dir.join("caps.csv"), &d.caps)
}

/// Writes measure, trace, report and diagnostics for one run; returns
/// whether the certificates passed.
fn write_run(dir: &Path, cfg: &ExperimentConfig, report: &RunReport) -> Result<bool, Failure> {
    ensure_dir(dir)?;
    save_measure(&dir.join("measure.json"), report.tau, &report.measure)?;
    write_csv(&dir.join("trace.csv"), &report.trace)?;
    write_json(&dir.join("report.json"), report)?;
    let params = ModelParams::new(report.tau)?;
    let d = run_checks(&params, &report.measure, &cfg.diagnose)?;
    write_diagnostics(dir, &d)?;
    Ok(d.report.passed)
}

pub fn optimize(o: &Overrides) -> Result<u8, Failure> {
    let mut cfg = load_config(o)?;
    if let Some(g) = o.grid {
        cfg.optimizer.grid_resolution = g;
    }
    cfg.optimizer.validate()?;
    let dir = cfg.out_dir();
    ensure_dir(&dir)?;
    let mut log = RunLog::new(&dir, "optimize");
    log.line(format!("tau {} seed {} restarts {}", cfg.optimizer.tau, cfg.optimizer.seed, cfg.optimizer.restarts));
    let report = minimize(&cfg.optimizer)?;
    log.line(format!(
        "action {:.12} termination {:?} minimize_secs {:.3}",
        report.action, report.termination, report.wall_time_secs
    ));
    let certified = write_run(&dir, &cfg, &report)?;
    let code = if !report.converged() {
        warn!("run did not converge ({:?})", report.termination);
        EXIT_NOT_CONVERGED
    } else if !certified {
        warn!("certificate failure; see diagnostics.json");
        EXIT_CERTIFICATE
    } else {
        0
    };
    info!("action {:.10}, {} clusters", report.action, report.n_clusters);
    log.finish(code)?;
    Ok(code)
}

#[derive(Serialize)]
struct SummaryRow {
    tau: f64,
    action: f64,
    lower_bound: f64,
    n_clusters: usize,
    dim_estimate: f64,
    el_gap: f64,
    termination: causal_sphere::TerminationReason,
}

fn dedup_taus(taus: Vec<f64>) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::with_capacity(taus.len());
    for t in taus {
        if out.contains(&t) {
            warn!("dropping duplicate tau {t}");
        } else {
            out.push(t);
        }
    }
    out
}

pub fn sweep(o: &Overrides, taus: Option<Vec<f64>>) -> Result<u8, Failure> {
    let mut cfg = load_config(o)?;
    if let Some(g) = o.grid {
        cfg.optimizer.grid_resolution = g;
    }
    let taus = dedup_taus(taus.unwrap_or_else(|| cfg.sweep.taus.clone()));
    if taus.is_empty() {
        return Err(Failure::usage("no tau values given (use --taus or [sweep] taus)"));
    }
    for &t in &taus {
        ModelParams::new(t)?;
    }
    cfg.optimizer.validate()?;
    let dir = cfg.out_dir();
    ensure_dir(&dir)?;
    let mut log = RunLog::new(&dir, "sweep");
    let reports = tau_sweep(&cfg.optimizer, &taus)?;
    let mut rows = Vec::with_capacity(reports.len());
    let mut code = 0;
    for r in &reports {
        log.line(format!("tau {} action {:.12} termination {:?} secs {:.3}", r.tau, r.action, r.termination, r.wall_time_secs));
        let certified = write_run(&dir.join(format!("tau_{}", r.tau)), &cfg, r)?;
        if !r.converged() {
            warn!("tau {}: did not converge ({:?})", r.tau, r.termination);
            code = EXIT_NOT_CONVERGED;
        } else if !certified && code == 0 {
            warn!("tau {}: certificate failure", r.tau);
            code = EXIT_CERTIFICATE;
        }
        rows.push(SummaryRow {
            tau: r.tau,
            action: r.action,
            lower_bound: r.lower_bound,
            n_clusters: r.n_clusters,
            dim_estimate: r.dim_estimate,
            el_gap: r.el.exterior_gap,
            termination: r.termination,
        });
    }
    write_csv(&dir.join("summary.csv"), &rows)?;
    log.finish(code)?;
    Ok(code)
}

pub fn diagnose(measure: Option<PathBuf>, o: &Overrides, override_tau: Option<f64>) -> Result<u8, Failure> {
    let mut cfg = load_config(o)?;
    if let Some(g) = o.grid {
        cfg.diagnose.grid_resolution = g;
    }
    let path = measure
        .or_else(|| cfg.diagnose.measure.clone())
        .ok_or_else(|| Failure::usage("no measure file given"))?;
    let (file_tau, mu) = load_measure(&path)?;
    let tau = match (override_tau.or(cfg.diagnose.override_tau), o.tau) {
        (Some(t), _) => t,
        (None, Some(t)) if t != file_tau => {
            return Err(Failure::usage(format!(
                "{} was computed at tau {file_tau}, not {t}; pass --override-tau to evaluate it anyway",
                path.display()
            )))
        }
        _ => file_tau,
    };
    let params = ModelParams::new(tau)?;
    let dir = cfg.out_dir();
    ensure_dir(&dir)?;
    let mut log = RunLog::new(&dir, "diagnose");
    log.line(format!("measure {} tau {tau}", path.display()));
    let d = run_checks(&params, &mu, &cfg.diagnose)?;
    write_diagnostics(&dir, &d)?;
    let code = if d.report.passed { 0 } else { EXIT_CERTIFICATE };
    if code != 0 {
        warn!("certificate failure; see diagnostics.json");
    }
    log.finish(code)?;
    Ok(code)
}

#[derive(Serialize)]
struct VerifyDocument {
    passed: bool,
    fault: Option<Fault>,
    report: causal_sphere::diagnostics::KernelSuiteReport,
}

pub fn verify_kernel(o: &Overrides, taus: Option<Vec<f64>>, fault: Option<Fault>) -> Result<u8, Failure> {
    let cfg = load_config(o)?;
    let taus = dedup_taus(taus.unwrap_or_else(|| cfg.verify.taus.clone()));
    if taus.is_empty() {
        return Err(Failure::usage("empty tau grid"));
    }
    let v = &cfg.verify;
    let seed = o.seed.unwrap_or(v.seed);
    let dir = cfg.out_dir();
    ensure_dir(&dir)?;
    let mut log = RunLog::new(&dir, "verify-kernel");
    log.line(format!("taus {taus:?} fault {fault:?}"));
    let report = match fault {
        None => kernel_suite(&taus, v.pairs, v.samples, seed, None)?,
        Some(Fault::Nu2) => {
            let mut merged: Option<causal_sphere::diagnostics::KernelSuiteReport> = None;
            for &tau in &taus {
                ModelParams::new(tau)?;
                let mut nu = harmonic_coefficients(tau);
                nu[2] *= 2.0;
                let r = kernel_suite(&[tau], v.pairs, v.samples, seed, Some(nu))?;
                match merged.as_mut() {
                    None => merged = Some(r),
                    Some(m) => {
                        m.checks.extend(r.checks);
                        m.sign_lemmas.extend(r.sign_lemmas);
                    }
                }
            }
            merged.expect("non-empty tau grid")
        }
    };
    for c in report.checks.iter().filter(|c| !c.passed) {
        warn!("tau {}: {} failed (value {:e}, threshold {:e}, theta {:?})", c.tau, c.name, c.value, c.threshold, c.at_theta);
    }
    for r in &report.sign_lemmas {
        for c in r.checks.iter().filter(|c| c.applicable && !c.passed) {
            warn!("tau {}: {} failed (theta {:?})", r.tau, c.name, c.witness);
        }
    }
    let passed = report.passed();
    write_json(&dir.join("verify_kernel.json"), &VerifyDocument { passed, fault, report })?;
    let code = if passed { 0 } else { EXIT_CERTIFICATE };
    log.finish(code)?;
    Ok(code)
}
