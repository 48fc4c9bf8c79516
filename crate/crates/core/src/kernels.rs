//! Geometric kernels of the two-dimensional radial wave operator.
//!
//! For radial `b` the circle average over `|ω| = 1` reduces to a single
//! λ-integral against
//!
//! ```text
//! h(λ, ρ, r) = {(λ + r)² − ρ²}^{-1/2} {ρ² − (λ − r)²}^{-1/2}.
//! ```
//!
//! Integrating `h` once more against the two-dimensional Poisson weight
//! `ρ / √(s² − ρ²)` gives a complete elliptic integral, evaluated here with
//! the arithmetic–geometric mean. That closed form, [`wave_kernel`], is what
//! makes grid-wide Duhamel sums affordable.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::quadrature::{
    try_integrate, try_integrate_singular, Endpoint, Estimate, QuadOptions, QuadratureError, SingularIntegrand,
    DEGENERATE_WIDTH,
};

/// A function of the radial coordinate, optionally with known compact support.
pub trait RadialFunction: Sync {
    fn value(&self, r: f64) -> f64;

    /// Radius beyond which the function vanishes identically.
    fn support_radius(&self) -> Option<f64> {
        None
    }
}

impl<F: Fn(f64) -> f64 + Sync> RadialFunction for F {
    fn value(&self, r: f64) -> f64 {
        self(r)
    }
}

/// Point `(λ, ρ, r)` at which `h` is evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelPoint {
    pub lambda: f64,
    pub rho: f64,
    pub r: f64,
}

impl KernelPoint {
    pub fn new(lambda: f64, rho: f64, r: f64) -> Self {
        Self { lambda, rho, r }
    }
}

/// `h(λ, ρ, r)`, defined only for `|λ − r| < ρ < λ + r`.
pub fn h_kernel(pt: KernelPoint) -> Result<f64> {
    let KernelPoint { lambda, rho, r } = pt;
    let f1 = lambda + r - rho;
    let f2 = lambda + r + rho;
    let f3 = rho - lambda + r;
    let f4 = rho + lambda - r;
    if !(lambda >= 0.0 && r >= 0.0 && rho > 0.0 && f1 > 0.0 && f3 > 0.0 && f4 > 0.0) {
        return Err(Error::Domain(format!(
            "h(λ={lambda}, ρ={rho}, r={r}) needs |λ − r| < ρ < λ + r"
        )));
    }
    Ok(1.0 / ((f1 * f2).sqrt() * (f3 * f4).sqrt()))
}

/// `∫_{|ω|=1} b(|x + ρω|) dS_ω` for `|x| = r`, through the λ-integral with
/// kernel `h`. Both endpoints carry an inverse square-root singularity.
pub fn circle_average<B: RadialFunction + ?Sized>(b: &B, r: f64, rho: f64, tol: f64) -> Result<f64> {
    circle_average_opts(b, r, rho, QuadOptions::absolute(tol))
}

pub fn circle_average_opts<B: RadialFunction + ?Sized>(b: &B, r: f64, rho: f64, opts: QuadOptions) -> Result<f64> {
    if r < 0.0 || rho <= 0.0 {
        return Err(Error::Domain(format!("circle average needs r ≥ 0, ρ > 0 (got r={r}, ρ={rho})")));
    }
    if r == 0.0 {
        return Ok(2.0 * PI * b.value(rho));
    }
    let lo = (rho - r).abs();
    let hi = rho + r;
    let (upper, right) = match b.support_radius() {
        Some(k) if k <= lo => return Ok(0.0),
        Some(k) if k < hi => (k, Endpoint::Regular),
        _ => (hi, Endpoint::InverseSqrt),
    };
    // h = (λ² − lo²)^{-1/2} (hi² − λ²)^{-1/2}; the singular factors are
    // applied by the integrator.
    let smooth = |lambda: f64| -> Result<f64, QuadratureError> {
        Ok(lambda * b.value(lambda) / ((lambda + lo).sqrt() * (hi + lambda).sqrt()) * right_factor(right, hi, lambda))
    };
    let est = try_integrate_singular::<QuadratureError, _>(
        SingularIntegrand::new(smooth, lo, upper, Endpoint::InverseSqrt, right),
        opts.share(4),
    )?;
    Ok(4.0 * est.value)
}

// When the support cuts the range short, the (hi − λ)^{-1/2} factor is no
// longer singular and stays in the smooth part.
fn right_factor(right: Endpoint, hi: f64, lambda: f64) -> f64 {
    match right {
        Endpoint::InverseSqrt => 1.0,
        Endpoint::Regular => 1.0 / (hi - lambda).sqrt(),
    }
}

/// `γ(p, n) = 2 + (n + 1)p − (n − 1)p²`.
pub fn gamma_exponent(p: f64, n: u32) -> f64 {
    let n = n as f64;
    2.0 + (n + 1.0) * p - (n - 1.0) * p * p
}

/// Strauss exponent `p₀(n)`, the positive root of `γ(p, n) = 0`.
pub fn strauss_exponent(n: u32) -> f64 {
    assert!(n >= 2, "Strauss exponent is finite only for n ≥ 2");
    let n = n as f64;
    (n + 1.0 + (n * n + 10.0 * n - 7.0).sqrt()) / (2.0 * (n - 1.0))
}

/// Arithmetic–geometric mean of `a` and `b`.
pub fn agm(mut a: f64, mut b: f64) -> f64 {
    if a == 0.0 || b == 0.0 {
        return 0.0;
    }
    for _ in 0..64 {
        if (a - b).abs() <= 1e-15 * a {
            break;
        }
        let next = 0.5 * (a + b);
        b = (a * b).sqrt();
        a = next;
    }
    0.5 * (a + b)
}

/// Complete elliptic integral of the first kind `K(m)`, parametrised by the
/// complementary parameter `m₁ = 1 − m` to keep precision near `m = 1`.
pub fn elliptic_k_complement(m1: f64) -> f64 {
    PI / (2.0 * agm(1.0, m1.sqrt()))
}

/// Radial kernel of the two-dimensional Poisson formula:
///
/// ```text
/// R(φ | r, s) = ∫₀^∞ λ φ(λ) K(λ, r, s) dλ,
/// K(λ, r, s) = (2/π) ∫ ρ h(λ, ρ, r) / √(s² − ρ²) dρ   over |λ − r| < ρ < min(λ + r, s).
/// ```
///
/// Zero for `s ≤ |λ − r|`, jumps to `1/(2√(λr))` at the inner light cone and
/// has a logarithmic singularity at `s = λ + r` (returned as `+∞`).
pub fn wave_kernel(lambda: f64, r: f64, s: f64) -> f64 {
    let a = (lambda - r).abs();
    let b = lambda + r;
    if s <= a {
        return 0.0;
    }
    if s < b {
        let m1 = (b - s) * (b + s) / (4.0 * lambda * r);
        1.0 / (agm(1.0, m1.sqrt()) * 2.0 * (lambda * r).sqrt())
    } else if s > b {
        let m1 = (s - b) * (s + b) / ((s - a) * (s + a));
        1.0 / (agm(1.0, m1.sqrt()) * ((s - a) * (s + a)).sqrt())
    } else {
        f64::INFINITY
    }
}

/// `∫ ρ h(λ, ρ, r) / √(s² − ρ²) dρ` over `|λ − r| < ρ < min(λ + r, s)` by
/// singular quadrature. Reference route for [`wave_kernel`]`· π/2`.
pub fn rho_integral(lambda: f64, r: f64, s: f64, opts: QuadOptions) -> Result<f64, QuadratureError> {
    let a = (lambda - r).abs();
    let b = lambda + r;
    if s <= a || b - a <= 0.0 {
        return Ok(0.0);
    }
    // Both ends carry 1/√ singularities; the substitutions ρ = lo + u² and
    // ρ = hi − u² remove them, and the distances to the nearby singular
    // points are formed from u² directly so that s ≈ b loses no accuracy.
    let (hi, far) = if s < b { (s, b) } else { (b, s) };
    let width = hi - a;
    if width < DEGENERATE_WIDTH {
        return Ok(0.0);
    }
    let gap = far - hi;
    let reach = far - a;
    // ρ/√((ρ − a)(ρ + a)(hi − ρ)(hi + ρ)(far − ρ)(far + ρ)) times √(ρ − a) or √(hi − ρ).
    let from_lo = |u: f64| {
        let u2 = u * u;
        let rho = a + u2;
        Ok(2.0 * rho / ((rho + a) * (width - u2) * (hi + rho) * (reach - u2) * (far + rho)).sqrt())
    };
    let from_hi = |u: f64| {
        let u2 = u * u;
        let rho = hi - u2;
        Ok(2.0 * rho / ((width - u2) * (rho + a) * (hi + rho) * (gap + u2) * (far + rho)).sqrt())
    };
    let half = (0.5 * width).sqrt();
    let piece = opts.share(2);
    let lo_part = try_integrate::<QuadratureError, _>(from_lo, 0.0, half, piece)?;
    let hi_part = try_integrate::<QuadratureError, _>(from_hi, 0.0, half, piece)?;
    Ok(lo_part.value + hi_part.value)
}

/// `∫₀^cap g(λ) K(λ, r, s) dλ` with [`wave_kernel`] `K`.
///
/// The range is cut to the kernel support `|r − s| < λ < r + s`. The
/// logarithmic point `λ = s − r` is resolved by quadratic clustering on
/// both sides; on the axis the kernel is `1/√(s² − λ²)` and the endpoint
/// singularity is removed exactly.
pub fn kernel_integral<E, G>(mut g: G, r: f64, s: f64, cap: f64, opts: QuadOptions) -> Result<Estimate, E>
where
    G: FnMut(f64) -> Result<f64, E>,
    E: From<QuadratureError>,
{
    let zero = Estimate { value: 0.0, error: 0.0, evaluations: 0 };
    if !(s > 0.0) || !(cap > 0.0) {
        return Ok(zero);
    }
    if r <= AXIS_RADIUS * s {
        return if cap >= s {
            try_integrate_singular(
                SingularIntegrand::new(|l: f64| Ok(g(l)? / (s + l).sqrt()), 0.0, s, Endpoint::Regular, Endpoint::InverseSqrt),
                opts,
            )
        } else {
            try_integrate(|l: f64| Ok(g(l)? / ((s - l) * (s + l)).sqrt()), 0.0, cap, opts)
        };
    }
    let lo = (r - s).max(0.0);
    let hi = (r + s).min(cap);
    if hi - lo < DEGENERATE_WIDTH {
        return Ok(zero);
    }
    let mut f = |l: f64| -> Result<f64, E> {
        let k = wave_kernel(l, r, s);
        // The logarithmic point itself has measure zero.
        if k == 0.0 || k.is_infinite() {
            return Ok(0.0);
        }
        Ok(g(l)? * k)
    };
    let c = s - r;
    if c <= lo || c >= hi {
        return try_integrate(f, lo, hi, opts);
    }
    let piece = opts.share(2);
    let left = try_integrate::<E, _>(|u: f64| Ok(2.0 * (c - lo) * u * f(c - (c - lo) * u * u)?), 0.0, 1.0, piece)?;
    let right = try_integrate::<E, _>(|u: f64| Ok(2.0 * (hi - c) * u * f(c + (hi - c) * u * u)?), 0.0, 1.0, piece)?;
    Ok(Estimate {
        value: left.value + right.value,
        error: left.error + right.error,
        evaluations: left.evaluations + right.evaluations,
    })
}

/// Observation radii below this fraction of `s` are treated as on the axis.
pub const AXIS_RADIUS: f64 = 1e-12;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::integrate_smooth;
    use proptest::prelude::*;

    #[test]
    fn h_examples() {
        let v = h_kernel(KernelPoint::new(1.0, 1.0, 1.0)).unwrap();
        assert!((v - 1.0 / 3f64.sqrt()).abs() < 1e-15);
        let v = h_kernel(KernelPoint::new(2.0, 2.0, 1.0)).unwrap();
        assert!((v - 1.0 / 15f64.sqrt()).abs() < 1e-15);
        let a = h_kernel(KernelPoint::new(3.0, 2.5, 1.0)).unwrap();
        let b = h_kernel(KernelPoint::new(1.0, 2.5, 3.0)).unwrap();
        assert_eq!(a, b);
        assert!((a - 1.0 / 21.9375f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn h_rejects_boundary() {
        assert!(matches!(h_kernel(KernelPoint::new(1.0, 2.0, 1.0)), Err(Error::Domain(_))));
        assert!(h_kernel(KernelPoint::new(3.0, 2.0, 1.0)).is_err());
        assert!(h_kernel(KernelPoint::new(3.0, 5.0, 1.0)).is_err());
    }

    #[test]
    fn circle_average_examples() {
        let one = |_: f64| 1.0;
        let v = circle_average(&one, 1.0, 0.5, 1e-11).unwrap();
        assert!((v - 2.0 * PI).abs() < 1e-9, "{v}");
        let sq = |l: f64| l * l;
        let v = circle_average(&sq, 1.0, 1.0, 1e-11).unwrap();
        assert!((v - 4.0 * PI).abs() < 1e-9, "{v}");
        assert_eq!(circle_average(&one, 0.0, 0.7, 1e-9).unwrap(), 2.0 * PI);
    }

    struct Bump(f64);
    impl RadialFunction for Bump {
        fn value(&self, r: f64) -> f64 {
            let s = r / self.0;
            if s >= 1.0 { 0.0 } else { (1.0 - 1.0 / (1.0 - s * s)).exp() }
        }
        fn support_radius(&self) -> Option<f64> {
            Some(self.0)
        }
    }

    #[test]
    fn circle_average_outside_support_vanishes() {
        assert_eq!(circle_average(&Bump(1.0), 0.5, 2.0, 1e-9).unwrap(), 0.0);
    }

    #[test]
    fn exponents() {
        assert!((gamma_exponent(1.5, 2) - 4.25).abs() < 1e-15);
        assert!((gamma_exponent(2.0, 2) - 4.0).abs() < 1e-15);
        assert!((strauss_exponent(2) - (3.0 + 17f64.sqrt()) / 2.0).abs() < 1e-15);
        assert!((strauss_exponent(3) - (1.0 + 2f64.sqrt())).abs() < 1e-15);
        assert!(strauss_exponent(3) < strauss_exponent(2));
        for n in 2..=10 {
            assert!(gamma_exponent(strauss_exponent(n), n).abs() < 1e-12);
        }
    }

    #[test]
    fn elliptic_k_known_values() {
        // K(0) = π/2, K(1/2) = Γ(1/4)² / (4√π).
        assert!((elliptic_k_complement(1.0) - PI / 2.0).abs() < 1e-15);
        let k_half = 3.625_609_908_221_908_f64.powi(2) / (4.0 * PI.sqrt());
        assert!((elliptic_k_complement(0.5) - k_half).abs() < 1e-13);
    }

    #[test]
    fn wave_kernel_axis_limit() {
        let (l, s) = (0.7, 2.0);
        assert!((wave_kernel(l, 0.0, s) - 1.0 / (s * s - l * l).sqrt()).abs() < 1e-15);
        assert_eq!(wave_kernel(0.5, 2.0, 1.0), 0.0);
    }

    #[test]
    fn wave_kernel_matches_singular_quadrature() {
        for &(l, r, s) in &[(1.0, 0.5, 0.8), (1.0, 0.5, 1.2), (1.0, 0.5, 2.5), (0.3, 2.0, 1.9), (2.0, 2.0, 0.5), (0.1, 0.1, 5.0)] {
            let q = rho_integral(l, r, s, QuadOptions::absolute(1e-13)).unwrap();
            let k = wave_kernel(l, r, s);
            assert!((2.0 / PI * q - k).abs() < 1e-10 * (1.0 + k), "({l},{r},{s}): {} vs {k}", 2.0 / PI * q);
        }
    }

    #[test]
    fn kernel_integral_of_unit_data_is_time() {
        // R(1 | r, s) = s: the disc average of 1/√(s² − |y|²).
        for &(r, s) in &[(0.0, 1.0), (0.3, 1.0), (1.0, 1.0), (2.5, 1.0), (1e-3, 4.0), (5.0, 0.2), (40.0, 7.0)] {
            let est = kernel_integral(|l: f64| Ok::<_, QuadratureError>(l), r, s, f64::INFINITY, QuadOptions::relative(1e-13, 1e-12))
                .unwrap();
            assert!((est.value - s).abs() < 1e-10 * s, "(r={r}, s={s}): {}", est.value);
        }
    }

    proptest! {
        #[test]
        fn h_positive_and_symmetric(lambda in 0.01..5.0f64, r in 0.01..5.0f64, theta in 0.01..0.99f64) {
            let lo = (lambda - r).abs();
            let rho = lo + theta * (lambda + r - lo);
            let a = h_kernel(KernelPoint::new(lambda, rho, r)).unwrap();
            let b = h_kernel(KernelPoint::new(r, rho, lambda)).unwrap();
            prop_assert!(a > 0.0 && a.is_finite());
            prop_assert!((a - b).abs() <= 1e-9 * a);
        }

        #[test]
        fn plane_wave_reduction(r in 0.01..2.0f64, rho in 0.01..2.5f64) {
            let b = Bump(1.3);
            let direct = 2.0 * integrate_smooth(
                |th: f64| b.value((r * r + rho * rho + 2.0 * r * rho * th.cos()).max(0.0).sqrt()),
                0.0, PI, 1e-12).unwrap();
            let reduced = circle_average(&b, r, rho, 1e-11).unwrap();
            prop_assert!((direct - reduced).abs() < 1e-6, "{} vs {}", direct, reduced);
        }
    }
}
