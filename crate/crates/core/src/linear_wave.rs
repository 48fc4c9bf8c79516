//! The free solution `u_L = ∂_t R(f) + R(g)` of the two-dimensional wave
//! equation and its decay constants.
//!
//! `R(φ | x, t) = (1/2π) ∫_{|x−y|≤t} φ(y) / √(t² − |x − y|²) dy`. Two
//! evaluation routes are provided: [`r_of`] nests the circle average inside
//! the ρ-integral, and [`r_of_kernel`] integrates against the closed-form
//! radial kernel. The second is much cheaper and is used for tabulation.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Locate, Result};
use crate::field::{GridSpec, SpacetimeField};
use crate::kernels::{circle_average_opts, kernel_integral};
use crate::profile::{DataPair, RadialProfile};
use crate::quadrature::{try_integrate_singular, Endpoint, QuadOptions, QuadratureError, SingularIntegrand};

/// Tolerance used when tabulating `u_L` on grids.
pub const TABULATION_TOL: f64 = 1e-9;

/// Horizon, in units of `k`, below which decay constants are not estimated.
pub const MIN_DECAY_HORIZON: f64 = 100.0;

/// `R(φ | r, t)` through the circle average:
/// `(1/2π) ∫₀^t ρ/√(t² − ρ²) · ∫_{|ω|=1} φ(|x + ρω|) dS_ω dρ`.
pub fn r_of(phi: &RadialProfile, r: f64, t: f64, tol: f64) -> Result<f64> {
    check_point(r, t)?;
    let k = phi.k();
    if t == 0.0 || r >= t + k || phi.is_zero() {
        return Ok(0.0);
    }
    let lo = (r - k).max(0.0);
    let hi = t.min(r + k);
    if hi <= lo {
        return Ok(0.0);
    }
    let inner = QuadOptions::relative(1e-3 * tol, 1e-3 * tol);
    let average = |rho: f64| -> Result<f64> {
        if rho <= 0.0 {
            return Ok(0.0);
        }
        circle_average_opts(phi, r, rho, inner)
    };
    let singular_end = hi >= t;
    let smooth = |rho: f64| -> Result<f64> {
        let w = if singular_end { rho / (t + rho).sqrt() } else { rho / ((t - rho) * (t + rho)).sqrt() };
        Ok(w * average(rho)?)
    };
    let right = if singular_end { Endpoint::InverseSqrt } else { Endpoint::Regular };
    let est = try_integrate_singular::<Error, _>(
        SingularIntegrand::new(smooth, lo, hi, Endpoint::Regular, right),
        QuadOptions::relative(tol, tol),
    )
    .at(r, t)?;
    Ok(est.value / (2.0 * PI))
}

/// `R(φ | r, t) = ∫ λ φ(λ) K(λ, r, t) dλ` with the closed-form kernel.
pub fn r_of_kernel(phi: &RadialProfile, r: f64, t: f64, tol: f64) -> Result<f64> {
    check_point(r, t)?;
    let k = phi.k();
    if t == 0.0 || r >= t + k || phi.is_zero() {
        return Ok(0.0);
    }
    let est = kernel_integral(
        |l: f64| Ok::<_, QuadratureError>(l * phi.eval(l)),
        r,
        t,
        k,
        QuadOptions::relative(tol, tol),
    )
    .at(r, t)?;
    Ok(est.value)
}

fn check_point(r: f64, t: f64) -> Result<()> {
    if r >= 0.0 && t >= 0.0 && r.is_finite() && t.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("need r ≥ 0 and t ≥ 0, got (r, t) = ({r}, {t})")))
    }
}

/// Finite-difference time derivative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeDerivative {
    pub value: f64,
    /// Set when `t` was too close to zero for a centred difference.
    pub reduced_accuracy: bool,
}

/// Step of the time difference quotient at `t` for support radius `k`.
pub fn derivative_step(k: f64, t: f64) -> f64 {
    (1e-4 * k).max(1e-6 * t)
}

/// `∂_t R(f | r, t)` by centred differences with one Richardson level;
/// one-sided second order within one step of `t = 0`. At `t = 0` the exact
/// value `f(r)` is returned.
pub fn dt_r_of(f: &RadialProfile, r: f64, t: f64, tol: f64) -> Result<TimeDerivative> {
    check_point(r, t)?;
    let exact = |value| Ok(TimeDerivative { value, reduced_accuracy: false });
    if f.is_zero() {
        return exact(0.0);
    }
    if t == 0.0 {
        return exact(f.eval(r));
    }
    let delta = derivative_step(f.k(), t);
    if r > t + f.k() + 2.0 * delta {
        return exact(0.0);
    }
    // Error in R is amplified by 1/δ.
    let r_tol = tol * delta;
    let big_r = |s: f64| r_of_kernel(f, r, s, r_tol);
    if t >= delta {
        let centred = |h: f64| -> Result<f64> { Ok((big_r(t + h)? - big_r(t - h)?) / (2.0 * h)) };
        let coarse = centred(delta)?;
        let fine = centred(0.5 * delta)?;
        exact((4.0 * fine - coarse) / 3.0)
    } else {
        let value = (-3.0 * big_r(t)? + 4.0 * big_r(t + delta)? - big_r(t + 2.0 * delta)?) / (2.0 * delta);
        Ok(TimeDerivative { value, reduced_accuracy: true })
    }
}

/// `u_L(r, t) = ∂_t R(f | r, t) + R(g | r, t)`.
pub fn u_linear(data: &DataPair, r: f64, t: f64, tol: f64) -> Result<f64> {
    let dt = dt_r_of(&data.f, r, t, tol)?.value;
    let rg = r_of_kernel(&data.g, r, t, tol)?;
    Ok(dt + rg)
}

/// `ε u_L` at every node with `r ≤ t + k`; exact zeros elsewhere.
pub fn u0_field(data: &DataPair, eps: f64, grid: &GridSpec) -> Result<SpacetimeField> {
    let mut field = SpacetimeField::zeros(*grid);
    if eps == 0.0 || data.is_trivial() {
        return Ok(field);
    }
    let nodes: Vec<(usize, usize)> =
        (0..=grid.n_t()).flat_map(|j| (0..=grid.cone_edge(j)).map(move |i| (i, j))).collect();
    let values = nodes
        .par_iter()
        .map(|&(i, j)| {
            let (r, t) = (grid.r(i), grid.t(j));
            u_linear(data, r, t, TABULATION_TOL).at(r, t)
        })
        .collect::<Result<Vec<f64>>>()?;
    for (&(i, j), v) in nodes.iter().zip(values) {
        field.set(i, j, eps * v);
    }
    Ok(field)
}

/// Worst ratio of `|u_L| + |∂_r u_L|` to the fitted bound at one time level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayResidual {
    pub t: f64,
    pub r: f64,
    pub ratio: f64,
}

/// Numerical constants in
/// `|u_L| + |∇u_L| ≤ C̃₀|∫g| / √((t+r+2k)(t−r+2k)) + C₀ / ((t+r+2k)^{1/2}(t−r+2k)^{3/2})`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayConstants {
    pub c0_hat: f64,
    /// The product `C̃₀ |∫g|`.
    pub c0tilde_term: f64,
    pub grid_t: f64,
    pub grid: GridSpec,
    pub residual_report: Vec<DecayResidual>,
}

/// Weights of the two decay terms at `(r, t)`.
fn decay_weights(r: f64, t: f64, k: f64) -> (f64, f64) {
    let plus = t + r + 2.0 * k;
    let minus = t - r + 2.0 * k;
    ((plus * minus).sqrt(), plus.sqrt() * minus.powf(1.5))
}

/// Grid sup of the weighted free solution.
///
/// For mean-zero `g` only the faster-decaying term is fitted. Otherwise the
/// coefficient of the slow term is taken from the far interior
/// `t − r ≥ T/2`, where it dominates, and `C₀` from what remains.
pub fn estimate_decay_constants(data: &DataPair, grid: &GridSpec) -> Result<DecayConstants> {
    let k = data.k();
    if grid.horizon() < MIN_DECAY_HORIZON * k {
        return Err(Error::Config(format!(
            "decay constants need a horizon of at least {MIN_DECAY_HORIZON}k, got {}",
            grid.horizon()
        )));
    }
    let h = 1e-3 * k;
    let nodes: Vec<(usize, usize)> =
        (0..=grid.n_t()).flat_map(|j| (0..=grid.cone_edge(j)).map(move |i| (i, j))).collect();
    // |u| + |∂_r u|; u is even in r so the backward point reflects at the axis.
    let sizes = nodes
        .par_iter()
        .map(|&(i, j)| {
            let (r, t) = (grid.r(i), grid.t(j));
            let u = u_linear(data, r, t, TABULATION_TOL)?;
            let up = u_linear(data, r + h, t, TABULATION_TOL)?;
            let um = u_linear(data, (r - h).abs(), t, TABULATION_TOL)?;
            Ok(u.abs() + ((up - um) / (2.0 * h)).abs())
        })
        .collect::<Result<Vec<f64>>>()?;

    let horizon = grid.horizon();
    let c0tilde_term = if data.g_mean_zero {
        0.0
    } else {
        nodes
            .iter()
            .zip(&sizes)
            .filter(|(&(i, j), _)| grid.t(j) - grid.r(i) >= 0.5 * horizon)
            .map(|(&(i, j), &v)| v * decay_weights(grid.r(i), grid.t(j), k).0)
            .fold(0.0, f64::max)
    };
    let mut c0_hat: f64 = 0.0;
    let mut any_positive = data.g_mean_zero;
    for (&(i, j), &v) in nodes.iter().zip(&sizes) {
        let (a, b) = decay_weights(grid.r(i), grid.t(j), k);
        let residual = v - c0tilde_term / a;
        if residual > 0.0 {
            any_positive = true;
            c0_hat = c0_hat.max(residual * b);
        }
    }
    if !any_positive && !data.is_trivial() {
        let sup = sizes.iter().fold(0.0f64, |m, &v| m.max(v));
        return Err(Error::Fit(format!(
            "slow-term coefficient {c0tilde_term:e} dominates everywhere (sup |u| + |u_r| = {sup:e})"
        )));
    }

    let mut worst: Vec<Option<DecayResidual>> = vec![None; grid.n_t() + 1];
    for (&(i, j), &v) in nodes.iter().zip(&sizes) {
        let (r, t) = (grid.r(i), grid.t(j));
        let (a, b) = decay_weights(r, t, k);
        let bound = c0tilde_term / a + c0_hat / b;
        let ratio = if bound > 0.0 { v / bound } else { 0.0 };
        if worst[j].map_or(true, |w| ratio > w.ratio) {
            worst[j] = Some(DecayResidual { t, r, ratio });
        }
    }
    Ok(DecayConstants {
        c0_hat,
        c0tilde_term,
        grid_t: horizon,
        grid: *grid,
        residual_report: worst.into_iter().flatten().collect(),
    })
}

/// Least-squares slope of `log|u_L(0, t)|` against `log t` on `n`
/// geometrically spaced times in `[t_lo, t_hi]`.
pub fn axis_decay_slope(data: &DataPair, t_lo: f64, t_hi: f64, n: usize) -> Result<f64> {
    if !(t_lo > 0.0 && t_hi > t_lo && n >= 2) {
        return Err(Error::Config("need 0 < t_lo < t_hi and at least two samples".into()));
    }
    let ratio = (t_hi / t_lo).powf(1.0 / (n - 1) as f64);
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    for m in 0..n {
        let t = t_lo * ratio.powi(m as i32);
        let u = u_linear(data, 0.0, t, 1e-12)?.abs();
        if u == 0.0 {
            return Err(Error::Fit(format!("u_L(0, {t}) vanishes; slope undefined")));
        }
        xs.push(t.ln());
        ys.push(u.ln());
    }
    Ok(least_squares(&xs, &ys).0)
}

/// `(slope, intercept, r²)` of the least-squares line through `(x, y)`.
pub(crate) fn least_squares(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0) };
    (slope, intercept, r2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::DataFamily;
    use crate::quadrature::integrate_smooth;

    /// `R(φ | 0, t) = ∫₀^k λ φ(λ) / √(t² − λ²) dλ` for `t > k`.
    fn axis_oracle(phi: &RadialProfile, t: f64) -> f64 {
        integrate_smooth(|l| l * phi.eval(l) / (t * t - l * l).sqrt(), 0.0, phi.k(), 1e-14).unwrap()
    }

    #[test]
    fn trivial_cases() {
        let b = RadialProfile::bump(1.0).unwrap();
        assert_eq!(r_of(&b, 0.7, 0.0, 1e-9).unwrap(), 0.0);
        assert_eq!(r_of(&b, 3.0, 1.0, 1e-9).unwrap(), 0.0);
        assert_eq!(r_of_kernel(&b, 3.0, 1.0, 1e-9).unwrap(), 0.0);
        let z = RadialProfile::zero(1.0).unwrap();
        assert_eq!(dt_r_of(&z, 0.3, 2.0, 1e-9).unwrap().value, 0.0);
        assert!(r_of(&b, -1.0, 1.0, 1e-9).is_err());
    }

    #[test]
    fn far_field_on_axis() {
        let b = RadialProfile::bump(1.0).unwrap();
        let t = 10.0;
        let oracle = axis_oracle(&b, t);
        let v = r_of(&b, 0.0, t, 1e-10).unwrap();
        assert!((v - oracle).abs() < 1e-9, "{v} vs {oracle}");
        let approx = b.moment() / (2.0 * PI * t);
        assert!((v - approx).abs() < 0.02 * approx);
    }

    #[test]
    fn routes_agree() {
        for k in [1.0, 2.0] {
            let b = RadialProfile::mean_zero_bump(k).unwrap();
            for &(r, t) in &[(0.0, 0.4), (0.5, 0.3), (0.5, 1.7), (1.2, 0.9), (2.0, 2.5), (0.05, 3.0), (6.0, 5.5)] {
                let (r, t) = (r * k, t * k);
                let a = r_of(&b, r, t, 1e-11).unwrap();
                let c = r_of_kernel(&b, r, t, 1e-12).unwrap();
                assert!((a - c).abs() < 1e-8, "k={k} (r={r}, t={t}): {a} vs {c}");
            }
        }
    }

    #[test]
    fn time_derivative_matches_analytic_oracle() {
        let b = RadialProfile::bump(1.0).unwrap();
        let t = 5.0;
        // d/dt ∫ λφ/√(t² − λ²) = −t ∫ λφ (t² − λ²)^{-3/2}.
        let oracle = -t * integrate_smooth(|l| l * b.eval(l) / (t * t - l * l).powf(1.5), 0.0, 1.0, 1e-15).unwrap();
        let d = dt_r_of(&b, 0.0, t, 1e-9).unwrap();
        assert!(!d.reduced_accuracy);
        assert!((d.value - oracle).abs() < 1e-3 * oracle.abs(), "{} vs {oracle}", d.value);
        assert_eq!(dt_r_of(&b, 9.0, 5.0, 1e-9).unwrap().value, 0.0);
    }

    #[test]
    fn derivative_near_zero_is_flagged_and_tends_to_data() {
        let b = RadialProfile::bump(1.0).unwrap();
        let d = dt_r_of(&b, 0.2, 1e-6, 1e-9).unwrap();
        assert!(d.reduced_accuracy);
        assert!((d.value - b.eval(0.2)).abs() < 1e-3);
        let d0 = dt_r_of(&b, 0.2, 0.0, 1e-9).unwrap();
        assert_eq!(d0.value, b.eval(0.2));
    }

    #[test]
    fn u0_field_support_and_linearity() {
        let data = DataFamily::BumpPositiveG.data(1.0).unwrap();
        let grid = GridSpec::uniform(0.25, 2.0, 1.0).unwrap();
        let a = u0_field(&data, 0.1, &grid).unwrap();
        let b = u0_field(&data, 0.2, &grid).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((2.0 * x - y).abs() <= 1e-15 * y.abs().max(1e-300));
        }
        for j in 0..=grid.n_t() {
            for i in grid.cone_edge(j) + 1..=grid.n_r() {
                assert_eq!(a.at(i, j), 0.0);
            }
        }
        assert!(u0_field(&data, 0.0, &grid).unwrap().max_abs() == 0.0);
        let node = a.at(0, 8);
        let expected = 0.1 * r_of(&data.g, 0.0, 2.0, 1e-11).unwrap();
        assert!((node - expected).abs() < 1e-10);
    }

    #[test]
    fn huygens_fails_in_the_plane() {
        let data = DataFamily::BumpPositiveG.data(1.0).unwrap();
        for t in [1.5, 3.0, 10.0, 40.0] {
            assert!(u_linear(&data, 0.0, t, 1e-10).unwrap() > 0.0);
        }
    }

    #[test]
    fn decay_requires_long_horizon() {
        let data = DataFamily::BumpPositiveG.data(1.0).unwrap();
        let grid = GridSpec::uniform(0.5, 10.0, 1.0).unwrap();
        assert!(matches!(estimate_decay_constants(&data, &grid), Err(Error::Config(_))));
    }

    #[test]
    fn least_squares_exact_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 - 0.5 * v).collect();
        let (m, c, r2) = least_squares(&x, &y);
        assert!((m + 0.5).abs() < 1e-14 && (c - 2.0).abs() < 1e-14 && (r2 - 1.0).abs() < 1e-14);
    }
}
