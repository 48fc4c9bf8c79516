//! The Duhamel operator
//!
//! ```text
//! L(Ψ)(x, t) = (1/2π) ∫₀^t (t − τ) ∫_{|ξ|≤1} Ψ(x + (t − τ)ξ, τ) / √(1 − |ξ|²) dξ dτ
//! ```
//!
//! for radial `Ψ`, which solves `v_tt − Δv = Ψ` with zero data.
//!
//! [`l_direct`] evaluates the definition in polar coordinates. [`l1_apply`]
//! and [`l2_apply`] evaluate the two pieces of the radial reduction, where
//! the inner ρ-integral runs over `|λ − r| < ρ < min(λ + r, t − τ)` and
//! `λ + r < t − τ` respectively. [`l_apply`] folds the ρ-integral into the
//! closed-form kernel and is the fast pointwise route; [`GridOperator`]
//! applies it to whole grid fields.

mod grid;

pub use grid::GridOperator;

use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Locate, Result};
use crate::field::Field;
use crate::kernels::{kernel_integral, rho_integral};
use crate::quadrature::{
    try_integrate, try_integrate_breaks, try_integrate_singular, Endpoint, QuadOptions, SingularIntegrand,
};

/// Default relative tolerance for operator evaluation on tabulated fields.
pub const OPERATOR_TOL: f64 = 1e-6;

/// Relative tolerance for the dominating integrals.
pub const BOUND_TOL: f64 = 1e-9;

// Nested integrals tighten the inner levels so that their noise stays well
// below the outer tolerance.
fn level(tol: f64, depth: i32) -> QuadOptions {
    let t = tol * 10f64.powi(-2 * depth);
    QuadOptions::relative(t * 1e-3, t)
}

fn check_point<F: Field + ?Sized>(psi: &F, r: f64, t: f64) -> Result<()> {
    if !(r >= 0.0 && t >= 0.0 && r.is_finite() && t.is_finite()) {
        return Err(Error::Domain(format!("need r ≥ 0 and t ≥ 0, got ({r}, {t})")));
    }
    let horizon = psi.horizon();
    if t > horizon * (1.0 + 1e-12) {
        return Err(Error::Horizon { r, t, horizon });
    }
    Ok(())
}

fn edge<F: Field + ?Sized>(psi: &F, tau: f64) -> f64 {
    psi.support_edge(tau).unwrap_or(f64::INFINITY)
}

/// Times at which the support edge `τ + κ` crosses `t − τ ± r`.
fn support_breaks<F: Field + ?Sized>(psi: &F, r: f64, t: f64) -> Vec<f64> {
    let mut breaks = vec![t - r];
    if let Some(e0) = psi.support_edge(0.0) {
        breaks.push(0.5 * (t + r - e0));
        breaks.push(0.5 * (t - r - e0));
    }
    breaks
}

/// `∫₀^w f` with nodes clustered quadratically toward `0` (`cluster_low`)
/// or toward `w`; used for logarithmic endpoint behaviour.
fn clustered<F>(mut f: F, a: f64, b: f64, at_low: bool, opts: QuadOptions) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let w = b - a;
    if !(w > 0.0) {
        return Ok(0.0);
    }
    let est = if at_low {
        try_integrate::<Error, _>(|u: f64| Ok(2.0 * w * u * f(a + w * u * u)?), 0.0, 1.0, opts)?
    } else {
        try_integrate::<Error, _>(|u: f64| Ok(2.0 * w * u * f(b - w * u * u)?), 0.0, 1.0, opts)?
    };
    Ok(est.value)
}

/// `L₁(Ψ)(r, t)`: the part of the backward cone where `t − τ < λ + r`.
pub fn l1_apply<F: Field + ?Sized>(psi: &F, r: f64, t: f64, tol: f64) -> Result<f64> {
    check_point(psi, r, t)?;
    if r == 0.0 || t == 0.0 {
        return Ok(0.0);
    }
    let middle = level(tol, 1);
    let inner = level(tol, 2);
    let slice = |tau: f64| -> Result<f64> {
        let s = t - tau;
        let lo = (s - r).abs();
        let hi = (s + r).min(edge(psi, tau));
        if hi <= lo {
            return Ok(0.0);
        }
        let f = |l: f64| -> Result<f64> {
            let v = psi.value(l, tau)?;
            if v == 0.0 {
                return Ok(0.0);
            }
            Ok(l * v * rho_integral(l, r, s, inner)?)
        };
        // log singularity at λ = s − r when the inner ρ-range reaches λ + r
        if s > r {
            let split = r.clamp(lo, hi);
            Ok(clustered(f, lo, split, true, middle.share(2))? + integrate_plain(f, split, hi, middle.share(2))?)
        } else {
            integrate_plain(f, lo, hi, middle)
        }
    };
    let est = try_integrate_breaks::<Error, _>(slice, 0.0, t, &support_breaks(psi, r, t), level(tol, 0)).at(r, t)?;
    Ok(2.0 / PI * est.value)
}

fn integrate_plain<F: FnMut(f64) -> Result<f64>>(f: F, a: f64, b: f64, opts: QuadOptions) -> Result<f64> {
    if !(b > a) {
        return Ok(0.0);
    }
    Ok(try_integrate::<Error, _>(f, a, b, opts)?.value)
}

/// `L₂(Ψ)(r, t)`: the part with `λ + r < t − τ`, nonzero only for `t > r`.
pub fn l2_apply<F: Field + ?Sized>(psi: &F, r: f64, t: f64, tol: f64) -> Result<f64> {
    check_point(psi, r, t)?;
    if t <= r || r == 0.0 {
        return Ok(0.0);
    }
    let middle = level(tol, 1);
    let inner = level(tol, 2);
    let slice = |tau: f64| -> Result<f64> {
        let s = t - tau;
        let top = s - r;
        let hi = top.min(edge(psi, tau));
        if hi <= 0.0 {
            return Ok(0.0);
        }
        let f = |l: f64| -> Result<f64> {
            let v = psi.value(l, tau)?;
            if v == 0.0 || l == 0.0 {
                return Ok(0.0);
            }
            Ok(l * v * rho_integral(l, r, s, inner)?)
        };
        let split = r.min(hi);
        let head = integrate_plain(f, 0.0, split, middle.share(2))?;
        let tail = if hi >= top { clustered(f, split, hi, false, middle.share(2))? } else { integrate_plain(f, split, hi, middle.share(2))? };
        Ok(head + tail)
    };
    let breaks = support_breaks(psi, r, t);
    let est = try_integrate_breaks::<Error, _>(slice, 0.0, t - r, &breaks, level(tol, 0)).at(r, t)?;
    Ok(2.0 / PI * est.value)
}

/// `L(Ψ)(0, t) = ∫₀^t dτ ∫₀^{t−τ} λ Ψ(λ, τ) / √((t − τ)² − λ²) dλ`: on the
/// axis the circle average degenerates to `2π Ψ(ρ)`.
fn l_axis<F: Field + ?Sized>(psi: &F, t: f64, tol: f64) -> Result<f64> {
    let middle = level(tol, 1);
    let slice = |tau: f64| -> Result<f64> {
        let s = t - tau;
        let cap = edge(psi, tau);
        let est = if cap >= s {
            try_integrate_singular::<Error, _>(
                SingularIntegrand::new(
                    |l: f64| Ok(l * psi.value(l, tau)? / (s + l).sqrt()),
                    0.0,
                    s,
                    Endpoint::Regular,
                    Endpoint::InverseSqrt,
                ),
                middle,
            )?
        } else {
            try_integrate::<Error, _>(|l: f64| Ok(l * psi.value(l, tau)? / ((s - l) * (s + l)).sqrt()), 0.0, cap, middle)?
        };
        Ok(est.value)
    };
    Ok(try_integrate_breaks::<Error, _>(slice, 0.0, t, &support_breaks(psi, 0.0, t), level(tol, 0))
        .at(0.0, t)?
        .value)
}

/// `L₁ + L₂`, or the axis form at `r = 0`.
pub fn l_radial<F: Field + ?Sized>(psi: &F, r: f64, t: f64, tol: f64) -> Result<f64> {
    check_point(psi, r, t)?;
    if t == 0.0 {
        return Ok(0.0);
    }
    if r == 0.0 {
        return l_axis(psi, t, tol);
    }
    Ok(l1_apply(psi, r, t, tol)? + l2_apply(psi, r, t, tol)?)
}

/// The defining formula, with `ξ = sin φ (cos θ, sin θ)` so that the weight
/// `|ξ| / √(1 − |ξ|²)` becomes `sin φ`. Reference route only.
pub fn l_direct<F: Field + ?Sized>(psi: &F, r: f64, t: f64, tol: f64) -> Result<f64> {
    check_point(psi, r, t)?;
    if t == 0.0 {
        return Ok(0.0);
    }
    let middle = level(tol, 1);
    let inner = level(tol, 2);
    let slice = |tau: f64| -> Result<f64> {
        let s = t - tau;
        let e = edge(psi, tau);
        let ring = |phi: f64| -> Result<f64> {
            let sigma = phi.sin();
            let q = s * sigma;
            // |x + qω|² = r² + q² + 2rq cos θ
            let mut breaks = Vec::new();
            if r > 0.0 && q > 0.0 && e.is_finite() {
                let c = (e * e - r * r - q * q) / (2.0 * r * q);
                if c.abs() < 1.0 {
                    breaks.push(c.acos());
                }
            }
            let angular = try_integrate_breaks::<Error, _>(
                |th: f64| psi.value((r * r + q * q + 2.0 * r * q * th.cos()).max(0.0).sqrt(), tau),
                0.0,
                PI,
                &breaks,
                inner,
            )?;
            Ok(sigma * angular.value)
        };
        let mut breaks = Vec::new();
        if s > 0.0 {
            for sig in [r / s, (e - r) / s, (r - e) / s, (r + e) / s] {
                if sig > 0.0 && sig < 1.0 {
                    breaks.push(sig.asin());
                }
            }
        }
        let est = try_integrate_breaks::<Error, _>(ring, 0.0, FRAC_PI_2, &breaks, middle)?;
        Ok(s * est.value)
    };
    let est = try_integrate_breaks::<Error, _>(slice, 0.0, t, &support_breaks(psi, r, t), level(tol, 0)).at(r, t)?;
    Ok(est.value / PI)
}

/// Fast pointwise route `∫₀^t dτ ∫ λ Ψ(λ, τ) K(λ, r, t − τ) dλ`.
pub fn l_apply<F: Field + ?Sized>(psi: &F, r: f64, t: f64, tol: f64) -> Result<f64> {
    check_point(psi, r, t)?;
    if t == 0.0 {
        return Ok(0.0);
    }
    let middle = level(tol, 1);
    let slice = |tau: f64| -> Result<f64> {
        let s = t - tau;
        Ok(kernel_integral::<Error, _>(|l: f64| Ok(l * psi.value(l, tau)?), r, s, edge(psi, tau), middle)?.value)
    };
    Ok(try_integrate_breaks::<Error, _>(slice, 0.0, t, &support_breaks(psi, r, t), level(tol, 0))
        .at(r, t)?
        .value)
}

/// `(1/√(2r)) ∫₀^t dτ ∫_{|r−t+τ|}^{r+t−τ} λ|Ψ| / √(τ + λ − t + r) dλ`,
/// which dominates `|L₁(Ψ)|`. Defined for `r > 0`.
pub fn l1_bound<F: Field + ?Sized>(psi: &F, r: f64, t: f64) -> Result<f64> {
    check_point(psi, r, t)?;
    if !(r > 0.0) {
        return Err(Error::Domain("the L₁ bound is defined for r > 0 only".into()));
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    let middle = level(BOUND_TOL, 1);
    let slice = |tau: f64| -> Result<f64> {
        let s = t - tau;
        let lo = (s - r).abs();
        let hi = (r + s).min(edge(psi, tau));
        if hi <= lo {
            return Ok(0.0);
        }
        let est = if s > r {
            try_integrate_singular::<Error, _>(
                SingularIntegrand::new(|l: f64| Ok(l * psi.value(l, tau)?.abs()), lo, hi, Endpoint::InverseSqrt, Endpoint::Regular),
                middle,
            )?
        } else {
            try_integrate::<Error, _>(|l: f64| Ok(l * psi.value(l, tau)?.abs() / (l + r - s).sqrt()), lo, hi, middle)?
        };
        Ok(est.value)
    };
    let est = try_integrate_breaks::<Error, _>(slice, 0.0, t, &support_breaks(psi, r, t), level(BOUND_TOL, 0)).at(r, t)?;
    Ok(est.value / (2.0 * r).sqrt())
}

/// `∫₀^{(t−r)₊} dτ ∫₀^{t−r−τ} λ|Ψ| / (√(t−r+λ−τ) √(t−r−τ−λ)) dλ`, which
/// dominates `|L₂(Ψ)|`.
pub fn l2_bound<F: Field + ?Sized>(psi: &F, r: f64, t: f64) -> Result<f64> {
    check_point(psi, r, t)?;
    if t <= r {
        return Ok(0.0);
    }
    let middle = level(BOUND_TOL, 1);
    let slice = |tau: f64| -> Result<f64> {
        let w = t - r - tau;
        let cap = edge(psi, tau);
        let est = if cap >= w {
            try_integrate_singular::<Error, _>(
                SingularIntegrand::new(
                    |l: f64| Ok(l * psi.value(l, tau)?.abs() / (w + l).sqrt()),
                    0.0,
                    w,
                    Endpoint::Regular,
                    Endpoint::InverseSqrt,
                ),
                middle,
            )?
        } else {
            try_integrate::<Error, _>(|l: f64| Ok(l * psi.value(l, tau)?.abs() / ((w + l) * (w - l)).sqrt()), 0.0, cap, middle)?
        };
        Ok(est.value)
    };
    let est =
        try_integrate_breaks::<Error, _>(slice, 0.0, t - r, &support_breaks(psi, r, t), level(BOUND_TOL, 0)).at(r, t)?;
    Ok(est.value)
}
