//! Leapfrog finite differences for the radial equation
//! `u_tt = u_rr + u_r / r + |u|^p`, used as an independent check on the
//! integral-equation solution and to measure blow-up times.
//!
//! At the axis `u_rr + u_r / r → 2 u_rr`, discretized as `4(u₁ − u₀)/Δr²`.
//! The domain is cut at `r_max ≥ T + 2k`, beyond the reach of the cone.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{GridSpec, SpacetimeField};
use crate::profile::DataPair;

/// Largest allowed `Δt / Δr`.
pub const MAX_CFL: f64 = 0.5;

/// Spread of crossing times across levels above which a measurement is rejected.
pub const MAX_SPREAD: f64 = 0.25;

/// Active-node count above which one time step is split across threads.
const PAR_THRESHOLD: usize = 1 << 15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FdConfig {
    /// Coarsest radial step; each further level halves it.
    pub dr: f64,
    /// `Δt / Δr`.
    pub cfl: f64,
    /// Outer radius; `None` uses `T_max + 2k`.
    pub r_max: Option<f64>,
    pub blowup_threshold: f64,
    pub refinement_levels: usize,
    /// `false` drops `|u|^p`, leaving the free wave equation.
    pub nonlinear: bool,
    /// Step of the exported field, a whole multiple of `Δr` and `Δt`;
    /// `None` keeps no field.
    pub output_step: Option<f64>,
}

impl Default for FdConfig {
    fn default() -> Self {
        Self {
            dr: 0.02,
            cfl: MAX_CFL,
            r_max: None,
            blowup_threshold: 1e6,
            refinement_levels: 2,
            nonlinear: true,
            output_step: None,
        }
    }
}

impl FdConfig {
    pub fn dt(&self) -> f64 {
        self.cfl * self.dr
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dr > 0.0 && self.dr.is_finite()) {
            return Err(Error::Config(format!("dr must be positive, got {}", self.dr)));
        }
        if !(self.cfl > 0.0 && self.cfl <= MAX_CFL) {
            return Err(Error::Config(format!("cfl = dt/dr must lie in (0, {MAX_CFL}], got {}", self.cfl)));
        }
        if !(self.blowup_threshold > 0.0) {
            return Err(Error::Config(format!("blowup_threshold must be positive, got {}", self.blowup_threshold)));
        }
        if self.refinement_levels < 2 {
            return Err(Error::Config("refinement_levels must be at least 2".into()));
        }
        if let Some(s) = self.output_step {
            whole_multiple(s, self.dr, "output_step", "dr")?;
            whole_multiple(s, self.dt(), "output_step", "dt")?;
        }
        Ok(())
    }

    /// The same configuration at `dr / 2^level`.
    pub fn level(&self, level: usize) -> Self {
        Self { dr: self.dr / f64::powi(2.0, level as i32), ..self.clone() }
    }
}

fn whole_multiple(a: f64, b: f64, name_a: &str, name_b: &str) -> Result<usize> {
    let m = (a / b).round();
    if m >= 1.0 && (a / b - m).abs() <= 1e-9 * m {
        Ok(m as usize)
    } else {
        Err(Error::Config(format!("{name_a} = {a} must be a whole multiple of {name_b} = {b}")))
    }
}

/// First time `sup |u|` exceeds the threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    pub t: f64,
    /// The solution became non-finite before reaching the threshold.
    pub nan: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FdSolution {
    pub dr: f64,
    pub dt: f64,
    /// Last time reached.
    pub t_end: f64,
    pub blowup: Option<Crossing>,
    /// Snapshot on the output grid, up to the last output time before `t_end`.
    pub field: Option<SpacetimeField>,
}

/// Integrates from `t = 0` to `t_max`, stopping early at the threshold crossing.
pub fn fd_solve(data: &DataPair, eps: f64, p: f64, cfg: &FdConfig, t_max: f64) -> Result<FdSolution> {
    cfg.validate()?;
    if !(p > 1.0 && p < 2.0) {
        return Err(Error::Domain(format!("need 1 < p < 2, got {p}")));
    }
    if !(t_max >= 0.0 && t_max.is_finite()) {
        return Err(Error::Config(format!("t_max must be finite and nonnegative, got {t_max}")));
    }
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(Error::Domain(format!("eps must be finite and nonnegative, got {eps}")));
    }
    let k = data.k();
    let r_max = cfg.r_max.unwrap_or(t_max + 2.0 * k);
    if r_max < t_max + 2.0 * k - 1e-12 {
        return Err(Error::Config(format!("r_max = {r_max} is below T_max + 2k = {}", t_max + 2.0 * k)));
    }
    let (dr, dt) = (cfg.dr, cfg.dt());
    let n_r = (r_max / dr).ceil() as usize;
    let n_steps = (t_max / dt - 1e-9).ceil().max(0.0) as usize;
    let nonlinear = cfg.nonlinear;
    let source = move |u: f64| if nonlinear { u.abs().powf(p) } else { 0.0 };

    let mut out = match cfg.output_step {
        Some(step) => {
            let grid = GridSpec::uniform(step, t_max, k)?;
            Some((SpacetimeField::zeros(grid), whole_multiple(step, dr, "", "")?, whole_multiple(step, dt, "", "")?))
        }
        None => None,
    };
    let mut record = |n: usize, u: &[f64]| {
        if let Some((field, sr, st)) = out.as_mut() {
            if n % *st == 0 && n / *st <= field.grid().n_t() {
                let j = n / *st;
                let g = *field.grid();
                for i in 0..=g.n_r() {
                    let v = u.get(i * *sr).copied().unwrap_or(0.0);
                    field.set(i, j, v);
                }
            }
        }
    };

    let mut prev: Vec<f64> = (0..=n_r).map(|i| eps * data.f.eval(i as f64 * dr)).collect();
    prev[n_r] = 0.0;
    record(0, &prev);
    let sup0 = sup_abs(&prev);
    let mut blowup = None;
    if sup0 > cfg.blowup_threshold {
        blowup = Some(Crossing { t: 0.0, nan: false });
    }
    let ratio = (dt / dr).powi(2);
    let first_active = |n: usize| ((k / dr).ceil() as usize + n + 2).min(n_r - 1);

    // Taylor step: u¹ = u⁰ + Δt εg + (Δt²/2)(Δ(εf) + |εf|^p).
    let mut cur = vec![0.0; n_r + 1];
    if blowup.is_none() && n_steps > 0 {
        let top = first_active(1);
        for i in 0..=top {
            let lap = laplacian(&prev, i, dr);
            cur[i] = prev[i] + dt * eps * data.g.eval(i as f64 * dr) + 0.5 * dt * dt * (lap + source(prev[i]));
        }
    }
    let mut sup_prev = sup0;
    let mut t_end = 0.0;
    if blowup.is_none() && n_steps > 0 {
        let s = sup_abs(&cur);
        t_end = dt;
        record(1, &cur);
        blowup = crossing(sup_prev, s, 0.0, dt, cfg.blowup_threshold);
        sup_prev = s;
    }
    let mut n = 1;
    while blowup.is_none() && n < n_steps {
        let top = first_active(n + 1);
        let update = |i: usize, old: f64, cur: &[f64]| -> f64 {
            let u = cur[i];
            let lap = laplacian(cur, i, dr) * dr * dr;
            2.0 * u - old + ratio * lap + dt * dt * source(u)
        };
        let active = &mut prev[..=top];
        if top >= PAR_THRESHOLD {
            active.par_iter_mut().enumerate().for_each(|(i, v)| *v = update(i, *v, &cur));
        } else {
            active.iter_mut().enumerate().for_each(|(i, v)| *v = update(i, *v, &cur));
        }
        std::mem::swap(&mut prev, &mut cur);
        n += 1;
        let s = sup_abs(&cur[..=top]);
        let t0 = (n - 1) as f64 * dt;
        blowup = crossing(sup_prev, s, t0, dt, cfg.blowup_threshold);
        sup_prev = s;
        t_end = n as f64 * dt;
        if blowup.is_none() {
            record(n, &cur);
        }
    }

    let field = out.map(|(field, _, st)| truncate(field, (t_end / (st as f64 * dt) + 1e-9).floor()));
    Ok(FdSolution { dr, dt, t_end, blowup, field })
}

/// `u_rr + u_r / r` at node `i`, with the axis limit `4(u₁ − u₀)/Δr²`.
fn laplacian(u: &[f64], i: usize, dr: f64) -> f64 {
    let h2 = dr * dr;
    if i == 0 {
        return 4.0 * (u[1] - u[0]) / h2;
    }
    let (um, u0, up) = (u[i - 1], u[i], u[i + 1]);
    (up - 2.0 * u0 + um) / h2 + (up - um) / (2.0 * i as f64 * h2)
}

fn sup_abs(u: &[f64]) -> f64 {
    // NaN wins so that a broken state is never mistaken for a small one.
    u.iter().fold(0.0, |m: f64, &v| if v.is_nan() || m.is_nan() { f64::NAN } else { m.max(v.abs()) })
}

/// Threshold crossing between `t0` and `t0 + dt`, interpolated in `log sup`.
fn crossing(s0: f64, s1: f64, t0: f64, dt: f64, threshold: f64) -> Option<Crossing> {
    if !s1.is_finite() {
        return Some(Crossing { t: t0 + dt, nan: true });
    }
    if s1 <= threshold {
        return None;
    }
    let frac = if s0 > 0.0 && s0 < threshold {
        (threshold.ln() - s0.ln()) / (s1.ln() - s0.ln())
    } else {
        (threshold - s0) / (s1 - s0)
    };
    Some(Crossing { t: t0 + frac.clamp(0.0, 1.0) * dt, nan: false })
}

fn truncate(field: SpacetimeField, last_level: f64) -> SpacetimeField {
    let g = *field.grid();
    let n = (last_level as usize).min(g.n_t());
    if n == g.n_t() {
        return field;
    }
    let grid = GridSpec { t_max: n as f64 * g.dt, ..g };
    let rows = (0..=n).map(|j| field.row(j).to_vec()).collect();
    SpacetimeField::from_rows(grid, rows).expect("rows come from a wider grid of the same width")
}

/// Crossing time at one resolution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelCrossing {
    pub dr: f64,
    pub dt: f64,
    pub t_cross: Option<f64>,
    pub nan: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlowupReport {
    pub eps: f64,
    #[serde(rename = "T_blowup")]
    pub t_blowup: Option<f64>,
    pub levels: Vec<LevelCrossing>,
    /// `(max − min) / min` of the crossing times.
    pub spread: Option<f64>,
}

/// Runs every refinement level up to `t_cap` and extrapolates the crossing
/// times to `Δt → 0` from the two finest levels (second order).
///
/// Returns `t_blowup = None` when the finest level does not cross.
pub fn detect_blowup(data: &DataPair, eps: f64, p: f64, cfg: &FdConfig, t_cap: f64) -> Result<BlowupReport> {
    cfg.validate()?;
    if !t_cap.is_finite() {
        return Err(Error::Config("t_cap must be finite".into()));
    }
    let plain = FdConfig { output_step: None, r_max: None, ..cfg.clone() };
    let levels = (0..cfg.refinement_levels)
        .into_par_iter()
        .map(|l| {
            let c = plain.level(l);
            let sol = fd_solve(data, eps, p, &c, t_cap)?;
            Ok(LevelCrossing {
                dr: sol.dr,
                dt: sol.dt,
                t_cross: sol.blowup.map(|b| b.t),
                nan: sol.blowup.is_some_and(|b| b.nan),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    summarize(eps, levels)
}

fn summarize(eps: f64, levels: Vec<LevelCrossing>) -> Result<BlowupReport> {
    let finest = levels.last().and_then(|l| l.t_cross);
    let Some(fine) = finest else {
        return Ok(BlowupReport { eps, t_blowup: None, levels, spread: None });
    };
    let times: Vec<f64> = levels.iter().filter_map(|l| l.t_cross).collect();
    if times.len() < levels.len() {
        return Err(Error::Unreliable { times, spread: f64::INFINITY });
    }
    let lo = times.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = times.iter().copied().fold(0.0, f64::max);
    let spread = if lo > 0.0 { (hi - lo) / lo } else if hi > 0.0 { f64::INFINITY } else { 0.0 };
    if spread > MAX_SPREAD {
        return Err(Error::Unreliable { times, spread });
    }
    let coarse = times[times.len() - 2];
    let t_blowup = fine + (fine - coarse) / 3.0;
    Ok(BlowupReport { eps, t_blowup: Some(t_blowup), levels, spread: Some(spread) })
}
