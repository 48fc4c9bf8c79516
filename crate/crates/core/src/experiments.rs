//! ε-sweeps comparing certified lower bounds with measured blow-up times,
//! and power-law fits of the measured times.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fd::{detect_blowup, FdConfig};
use crate::field::csv_err;
use crate::kernels::gamma_exponent;
use crate::linear_wave::least_squares;
use crate::picard::CertifiedBound;
use crate::profile::{DataPair, MeanCase};

/// Quarter-decade ladder used when no list is given.
pub const DEFAULT_EPS: [f64; 8] = [0.8, 0.63, 0.5, 0.4, 0.32, 0.25, 0.2, 0.16];

/// Smallest number of measured times accepted by [`fit_scaling`].
pub const MIN_FIT_POINTS: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub fd: FdConfig,
    /// Time up to which blow-up is looked for.
    pub t_cap: f64,
    pub workers: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self { fd: FdConfig::default(), t_cap: 200.0, workers: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    /// Radial steps of the refinement levels, coarsest first.
    pub resolutions: Vec<f64>,
    pub cfl: f64,
    pub t_cap: f64,
    /// Spread of crossing times across levels.
    pub spread: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub eps: f64,
    #[serde(rename = "T_blowup")]
    pub t_blowup: Option<f64>,
    /// Absent when `ε > ε₀` or no certificate was supplied.
    #[serde(rename = "T_certified")]
    pub t_certified: Option<f64>,
    pub case: MeanCase,
    pub p: f64,
    pub k: f64,
    pub run_metadata: RunMetadata,
    /// Failure of this entry's blow-up measurement, if any.
    pub error: Option<String>,
}

impl SweepRecord {
    /// Certified bound above the measured time.
    pub fn is_violation(&self) -> bool {
        matches!((self.t_certified, self.t_blowup), (Some(c), Some(b)) if c > b)
    }
}

/// Measured blow-up time and certified bound for each ε, in the order given.
/// Wall-clock seconds per entry are returned separately.
pub fn sweep(
    data: &DataPair,
    p: f64,
    eps_list: &[f64],
    cfg: &SweepConfig,
    bound: Option<&CertifiedBound>,
) -> Result<(Vec<SweepRecord>, Vec<f64>)> {
    if eps_list.is_empty() {
        return Err(Error::Config("eps list is empty".into()));
    }
    if eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Config("eps list must be strictly decreasing".into()));
    }
    if let Some(&e) = eps_list.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
        return Err(Error::Config(format!("eps must be positive, got {e}")));
    }
    if let Some(b) = bound {
        if b.case != data.case() || b.p != p || b.k != data.k() {
            return Err(Error::Config("certificate does not match the sweep data".into()));
        }
    }
    cfg.fd.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let resolutions: Vec<f64> = (0..cfg.fd.refinement_levels).map(|l| cfg.fd.level(l).dr).collect();
    let entries: Vec<(SweepRecord, f64)> = pool.install(|| {
        eps_list
            .par_iter()
            .map(|&eps| {
                let start = Instant::now();
                let t_certified = match bound.map(|b| b.t_lower(eps)) {
                    Some(Ok(t)) => Some(t),
                    Some(Err(Error::OutOfCertificate { .. })) | None => None,
                    Some(Err(e)) => return Err(e),
                };
                let (t_blowup, spread, error) = match detect_blowup(data, eps, p, &cfg.fd, cfg.t_cap) {
                    Ok(r) => (r.t_blowup, r.spread, None),
                    Err(e) => (None, None, Some(e.to_string())),
                };
                let record = SweepRecord {
                    eps,
                    t_blowup,
                    t_certified,
                    case: data.case(),
                    p,
                    k: data.k(),
                    run_metadata: RunMetadata {
                        resolutions: resolutions.clone(),
                        cfl: cfg.fd.cfl,
                        t_cap: cfg.t_cap,
                        spread,
                    },
                    error,
                };
                Ok((record, start.elapsed().as_secs_f64()))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(entries.into_iter().unzip())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub theory_slope: f64,
    pub n_points: usize,
}

/// `−(p−1)/(3−p)` for `∫g ≠ 0`, `−2p(p−1)/γ(p,2)` for mean-zero `g`.
pub fn theory_slope(case: MeanCase, p: f64) -> f64 {
    match case {
        MeanCase::NonzeroMean => -(p - 1.0) / (3.0 - p),
        MeanCase::MeanZero => -2.0 * p * (p - 1.0) / gamma_exponent(p, 2),
    }
}

/// Least-squares line through `(log ε, log T_blowup)` over the records of
/// `case` that carry a measured time.
pub fn fit_scaling(records: &[SweepRecord], case: MeanCase) -> Result<FitResult> {
    let points: Vec<(f64, f64, f64)> = records
        .iter()
        .filter(|r| r.case == case)
        .filter_map(|r| r.t_blowup.map(|t| (r.eps.ln(), t.ln(), r.p)))
        .collect();
    if points.len() < MIN_FIT_POINTS {
        return Err(Error::Fit(format!("need at least {MIN_FIT_POINTS} measured times, got {}", points.len())));
    }
    let p = points[0].2;
    if points.iter().any(|q| q.2 != p) {
        return Err(Error::Fit("records mix different exponents p".into()));
    }
    let x: Vec<f64> = points.iter().map(|q| q.0).collect();
    let y: Vec<f64> = points.iter().map(|q| q.1).collect();
    if x.windows(2).all(|w| w[0] == w[1]) {
        return Err(Error::Fit("all records share one eps".into()));
    }
    let (slope, intercept, r_squared) = least_squares(&x, &y);
    Ok(FitResult { slope, intercept, r_squared, theory_slope: theory_slope(case, p), n_points: points.len() })
}

/// `eps,T_blowup,T_certified,case,p,k` rows after a `# comment` line.
/// Missing times are empty fields.
pub fn write_records_csv<W: Write>(records: &[SweepRecord], mut out: W, comment: &str) -> Result<()> {
    writeln!(out, "# {comment}")?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["eps", "T_blowup", "T_certified", "case", "p", "k"]).map_err(csv_err)?;
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
    for r in records {
        let case = match r.case {
            MeanCase::MeanZero => "mean_zero",
            MeanCase::NonzeroMean => "nonzero_mean",
        };
        w.write_record([r.eps.to_string(), opt(r.t_blowup), opt(r.t_certified), case.into(), r.p.to_string(), r.k.to_string()])
            .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn record(eps: f64, t: Option<f64>, case: MeanCase) -> SweepRecord {
        SweepRecord {
            eps,
            t_blowup: t,
            t_certified: None,
            case,
            p: 1.5,
            k: 1.0,
            run_metadata: RunMetadata { resolutions: vec![0.02, 0.01], cfl: 0.5, t_cap: 100.0, spread: Some(0.01) },
            error: None,
        }
    }

    #[test]
    fn theory_slopes() {
        assert!((theory_slope(MeanCase::NonzeroMean, 1.5) + 1.0 / 3.0).abs() < 1e-15);
        assert!((theory_slope(MeanCase::MeanZero, 1.5) + 6.0 / 17.0).abs() < 1e-15);
        assert!((theory_slope(MeanCase::NonzeroMean, 1.3) + 0.1765).abs() < 1e-4);
        assert!((theory_slope(MeanCase::MeanZero, 1.3) + 0.1853).abs() < 1e-4);
        for case in [MeanCase::NonzeroMean, MeanCase::MeanZero] {
            assert!((theory_slope(case, 2.0) + 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn exact_power_law_is_recovered() {
        let records: Vec<_> =
            DEFAULT_EPS.iter().map(|&e| record(e, Some(e.powf(-1.0 / 3.0)), MeanCase::NonzeroMean)).collect();
        let fit = fit_scaling(&records, MeanCase::NonzeroMean).unwrap();
        assert!((fit.slope + 1.0 / 3.0).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
        assert_eq!(fit.n_points, 8);
    }

    #[test]
    fn too_few_points_is_an_error() {
        let mut records: Vec<_> = [0.8, 0.4, 0.2].iter().map(|&e| record(e, Some(1.0 / e), MeanCase::MeanZero)).collect();
        records.push(record(0.1, None, MeanCase::MeanZero));
        records.push(record(0.05, Some(20.0), MeanCase::NonzeroMean));
        assert!(matches!(fit_scaling(&records, MeanCase::MeanZero), Err(Error::Fit(_))));
    }

    #[test]
    fn records_round_trip_through_json() {
        let mut r = record(0.25, Some(12.5), MeanCase::MeanZero);
        r.t_certified = Some(1.5);
        let back: SweepRecord = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
        assert_eq!(back, r);
        assert!(serde_json::to_string(&r).unwrap().contains("\"T_blowup\":12.5"));
    }

    #[test]
    fn csv_leaves_missing_times_empty() {
        let mut buf = Vec::new();
        write_records_csv(&[record(0.5, None, MeanCase::NonzeroMean)], &mut buf, "hash=abc").unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "# hash=abc\neps,T_blowup,T_certified,case,p,k\n0.5,,,nonzero_mean,1.5,1\n");
    }

    #[test]
    fn eps_list_must_strictly_decrease() {
        let data = crate::profile::DataFamily::BumpPositiveG.data(1.0).unwrap();
        let cfg = SweepConfig::default();
        for list in [vec![], vec![0.5, 0.5, 0.2], vec![0.2, 0.4], vec![0.5, -0.1]] {
            assert!(matches!(sweep(&data, 1.5, &list, &cfg, None), Err(Error::Config(_))), "{list:?}");
        }
    }

    #[test]
    fn violations_need_both_times() {
        let mut r = record(0.5, Some(3.0), MeanCase::NonzeroMean);
        assert!(!r.is_violation());
        r.t_certified = Some(4.0);
        assert!(r.is_violation());
        r.t_blowup = None;
        assert!(!r.is_violation());
    }

    proptest! {
        #[test]
        fn slope_is_invariant_under_eps_rescaling(c in 0.01f64..100.0, a in -1.0f64..-0.05, noise in 0.0f64..0.05) {
            let make = |scale: f64| -> Vec<SweepRecord> {
                DEFAULT_EPS
                    .iter()
                    .enumerate()
                    .map(|(i, &e)| {
                        let t = e.powf(a) * (1.0 + noise * (i as f64).sin());
                        record(scale * e, Some(t), MeanCase::MeanZero)
                    })
                    .collect()
            };
            let base = fit_scaling(&make(1.0), MeanCase::MeanZero).unwrap();
            let scaled = fit_scaling(&make(c), MeanCase::MeanZero).unwrap();
            prop_assert!((base.slope - scaled.slope).abs() < 1e-9);
            prop_assert!((scaled.intercept - (base.intercept - base.slope * c.ln())).abs() < 1e-9);
        }
    }
}
