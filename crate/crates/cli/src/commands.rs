use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use lifespan_core::experiments::{fit_scaling, sweep, theory_slope, write_records_csv, FitResult, SweepConfig};
use lifespan_core::fd::{fd_solve, Crossing, FdConfig};
use lifespan_core::picard::{certify_lifespan, CertifiedBound, ConstantOptions};
use lifespan_core::suite::{run_check, Check, SuiteConfig};
use lifespan_core::{DataFamily, Error};
use serde::Serialize;
use serde_json::json;

use crate::config::{Command, RunConfig};

/// Why a run did not succeed; each variant has its own exit status.
#[derive(Debug)]
pub enum Failure {
    /// Invalid configuration.
    Usage(String),
    /// The run completed but a checked inequality failed.
    Check(String),
    /// A computation failed.
    Numerical { kind: &'static str, message: String },
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Check(_) => 1,
            Failure::Usage(_) => 2,
            Failure::Numerical { .. } => 3,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let (status, kind, message) = match self {
            Failure::Usage(m) => ("usage_error", "config", m.as_str()),
            Failure::Check(m) => ("check_failure", "check", m.as_str()),
            Failure::Numerical { kind, message } => ("numerical_failure", *kind, message.as_str()),
        };
        json!({ "status": status, "exit_code": self.exit_code(), "kind": kind, "message": message })
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let message = e.to_string();
        match e.root() {
            Error::Config(_) => Failure::Usage(message),
            Error::CertificateViolated(_) => Failure::Check(message),
            root => Failure::Numerical { kind: error_kind(root), message },
        }
    }
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::Quadrature(_) => "quadrature",
        Error::At { .. } => "located",
        Error::Domain(_) => "domain",
        Error::Horizon { .. } => "horizon",
        Error::Config(_) => "config",
        Error::Divergence { .. } => "divergence",
        Error::Unreliable { .. } => "unreliable",
        Error::OutOfCertificate { .. } => "out_of_certificate",
        Error::Fit(_) => "fit",
        Error::CertificateViolated(_) => "certificate_violated",
        Error::Io(_) => "io",
        Error::Json(_) => "json",
    }
}

fn io_failure(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::Numerical { kind: "io", message: format!("{}: {e}", path.display()) }
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path).map(BufWriter::new).map_err(|e| io_failure(path, e))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), Failure> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, value).map_err(|e| io_failure(path, e))?;
    writeln!(out).and_then(|_| out.flush()).map_err(|e| io_failure(path, e))
}

/// Wall-clock figures live in their own file so the payloads stay reproducible.
fn write_timing(cfg: &RunConfig, name: &str, total: f64, entries: Option<Vec<f64>>) -> Result<(), Failure> {
    let path = cfg.out.join(format!("{name}.timing.json"));
    let mut v = json!({ "config_hash": cfg.hash(), "workers": cfg.workers, "wall_seconds": total });
    if let Some(e) = entries {
        v["entry_wall_seconds"] = json!(e);
    }
    write_json(&path, &v)
}

pub fn run(cfg: &RunConfig) -> Result<(), Failure> {
    fs::create_dir_all(&cfg.out).map_err(|e| io_failure(&cfg.out, e))?;
    match cfg.command {
        Command::Verify => verify(cfg),
        Command::Certify => certify(cfg),
        Command::Simulate => simulate(cfg),
        Command::Sweep => run_sweep(cfg),
    }
}

#[derive(Serialize)]
struct CheckLine {
    check: Check,
    pass: bool,
    detail: String,
    /// The check could not be evaluated.
    error: bool,
}

fn verify(cfg: &RunConfig) -> Result<(), Failure> {
    let start = Instant::now();
    let suite = SuiteConfig { p: cfg.p, k: cfg.k, seed: cfg.seed };
    let mut lines = Vec::new();
    let mut walls = Vec::new();
    for &check in &cfg.checks {
        let t0 = Instant::now();
        let line = match run_check(check, &suite) {
            Ok(o) => CheckLine { check, pass: o.pass, detail: o.detail, error: false },
            Err(e) => CheckLine { check, pass: false, detail: e.to_string(), error: true },
        };
        walls.push(t0.elapsed().as_secs_f64());
        println!("{} {}: {}", if line.pass { "PASS" } else { "FAIL" }, check, line.detail);
        lines.push(line);
    }
    let report = json!({ "config_hash": cfg.hash(), "config": cfg, "results": lines });
    write_json(&cfg.out.join("verify.json"), &report)?;
    write_timing(cfg, "verify", start.elapsed().as_secs_f64(), Some(walls))?;
    let failed: Vec<String> = lines.iter().filter(|l| !l.pass).map(|l| l.check.to_string()).collect();
    let errored = lines.iter().find(|l| l.error);
    println!("{}/{} checks passed", lines.len() - failed.len(), lines.len());
    match errored {
        Some(l) => Err(Failure::Numerical { kind: "check_error", message: format!("{}: {}", l.check, l.detail) }),
        None if !failed.is_empty() => Err(Failure::Check(format!("failed checks: {}", failed.join(", ")))),
        None => Ok(()),
    }
}

#[derive(Serialize)]
struct Evaluation {
    eps: f64,
    #[serde(rename = "T_lower")]
    t_lower: Option<f64>,
    in_certificate: bool,
}

fn certify(cfg: &RunConfig) -> Result<(), Failure> {
    let start = Instant::now();
    let data = cfg.data.data(cfg.k)?;
    let opts = ConstantOptions { ladder: cfg.ladder.clone(), ..Default::default() };
    let bound = certify_lifespan(&data, cfg.p, &opts)?;
    let eps_values = match (&cfg.eps_list, cfg.eps) {
        (Some(list), _) => list.clone(),
        (None, Some(e)) => vec![e],
        (None, None) => (0..5).map(|j| bound.eps0 * 10f64.powi(-2 * j)).collect(),
    };
    let evaluations: Vec<Evaluation> = eps_values
        .iter()
        .map(|&eps| {
            let t = bound.t_lower(eps).ok();
            Evaluation { eps, t_lower: t, in_certificate: t.is_some() }
        })
        .collect();
    let slope = tail_slope(&evaluations);
    let report = json!({
        "config_hash": cfg.hash(),
        "config": cfg,
        "bound": bound,
        "evaluations": evaluations,
        "tail_slope": slope,
        "theory_slope": theory_slope(bound.case, cfg.p),
    });
    write_json(&cfg.out.join("certify.json"), &report)?;
    write_timing(cfg, "certify", start.elapsed().as_secs_f64(), None)?;
    print_bound(cfg.data, &bound);
    for e in &evaluations {
        match e.t_lower {
            Some(t) => println!("  eps {:.4e}: T_lower = {t:.6e}", e.eps),
            None => println!("  eps {:.4e}: outside the certificate", e.eps),
        }
    }
    if let Some(s) = slope {
        println!("log T_lower / log eps slope over the two smallest eps: {s:.5}");
    }
    Ok(())
}

fn print_bound(data: DataFamily, b: &CertifiedBound) {
    println!(
        "{data}: case {:?}, p = {}, k = {}, eps0 = {:.4e}, C1 = {:.4}, C2 = {:.4}, C0 = {:.4}",
        b.case, b.p, b.k, b.eps0, b.constants.c1_hat, b.constants.c2_hat, b.constants.c0
    );
}

/// Slope of `log T_lower` against `log ε` between the two smallest certified ε.
fn tail_slope(evals: &[Evaluation]) -> Option<f64> {
    let mut pts: Vec<(f64, f64)> = evals.iter().filter_map(|e| e.t_lower.filter(|t| *t > 0.0).map(|t| (e.eps, t))).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    match pts.as_slice() {
        [a, b, ..] if a.0 < b.0 => Some((b.1 / a.1).ln() / (b.0 / a.0).ln()),
        _ => None,
    }
}

fn fd_config(cfg: &RunConfig, output_step: Option<f64>) -> FdConfig {
    FdConfig {
        dr: cfg.grid_dr,
        cfl: cfg.cfl(),
        blowup_threshold: cfg.threshold,
        refinement_levels: cfg.levels,
        output_step,
        ..Default::default()
    }
}

fn simulate(cfg: &RunConfig) -> Result<(), Failure> {
    let start = Instant::now();
    let eps = cfg.eps.unwrap_or(1.0);
    let data = cfg.data.data(cfg.k)?;
    let fd = fd_config(cfg, Some(cfg.output_step));
    fd.validate()?;
    let sol = fd_solve(&data, eps, cfg.p, &fd, cfg.t_max)?;
    let hash = cfg.hash();
    if let Some(field) = &sol.field {
        let path = cfg.out.join("field.csv");
        let mut out = create(&path)?;
        writeln!(out, "# config_hash={hash}").map_err(|e| io_failure(&path, e))?;
        field.write_csv(out, eps, cfg.data.id())?;
    }
    #[derive(Serialize)]
    struct Blowup<'a> {
        config_hash: &'a str,
        config: &'a RunConfig,
        eps: f64,
        dr: f64,
        dt: f64,
        t_end: f64,
        blowup: Option<Crossing>,
    }
    let report = Blowup { config_hash: &hash, config: cfg, eps, dr: sol.dr, dt: sol.dt, t_end: sol.t_end, blowup: sol.blowup };
    write_json(&cfg.out.join("blowup.json"), &report)?;
    write_timing(cfg, "simulate", start.elapsed().as_secs_f64(), None)?;
    match sol.blowup {
        Some(c) if c.nan => println!("{}: eps {eps}: solution became non-finite at t = {:.6}", cfg.data, c.t),
        Some(c) => println!("{}: eps {eps}: sup |u| crossed {:e} at t = {:.6}", cfg.data, cfg.threshold, c.t),
        None => println!("{}: eps {eps}: no blow-up up to t = {}", cfg.data, sol.t_end),
    }
    Ok(())
}

fn run_sweep(cfg: &RunConfig) -> Result<(), Failure> {
    let start = Instant::now();
    let data = cfg.data.data(cfg.k)?;
    let eps_list = cfg.sweep_eps();
    let bound = if cfg.certified {
        let opts = ConstantOptions { ladder: cfg.ladder.clone(), ..Default::default() };
        Some(certify_lifespan(&data, cfg.p, &opts)?)
    } else {
        None
    };
    let sweep_cfg = SweepConfig { fd: fd_config(cfg, None), t_cap: cfg.t_max, workers: cfg.workers };
    let (records, walls) = sweep(&data, cfg.p, &eps_list, &sweep_cfg, bound.as_ref())?;
    let fit = fit_scaling(&records, data.case());
    let hash = cfg.hash();
    let csv_path = cfg.out.join("sweep.csv");
    let comment = format!("config_hash={hash},data={}", cfg.data);
    write_records_csv(&records, create(&csv_path)?, &comment)?;
    let (fit_value, fit_error): (Option<FitResult>, Option<String>) = match &fit {
        Ok(f) => (Some(*f), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let violations = records.iter().filter(|r| r.is_violation()).count();
    let summary = json!({
        "config_hash": hash,
        "config": cfg,
        "eps0": bound.as_ref().map(|b| b.eps0),
        "records": records,
        "fit": fit_value,
        "fit_error": fit_error,
        "violations": violations,
    });
    write_json(&cfg.out.join("sweep.json"), &summary)?;
    write_timing(cfg, "sweep", start.elapsed().as_secs_f64(), Some(walls))?;
    for r in &records {
        let t = r.t_blowup.map_or("none".to_string(), |t| format!("{t:.4}"));
        let c = r.t_certified.map_or(String::new(), |t| format!(", certified {t:.4}"));
        let e = r.error.as_ref().map_or(String::new(), |e| format!(" ({e})"));
        println!("eps {:<8} T_blowup {t}{c}{e}", r.eps);
    }
    if let Ok(f) = &fit {
        println!(
            "slope {:.4} (theory {:.4}), r² {:.5}, {} points",
            f.slope, f.theory_slope, f.r_squared, f.n_points
        );
    }
    if violations > 0 {
        return Err(Failure::Check(format!("{violations} records have T_certified > T_blowup")));
    }
    fit.map(|_| ()).map_err(Failure::from)
}
