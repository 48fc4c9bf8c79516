//! Adaptive one-dimensional quadrature.
//!
//! The workhorse is a globally adaptive 15-point Gauss–Kronrod scheme: the
//! subinterval with the largest error estimate is bisected until the summed
//! error estimate falls below the requested tolerance. Inverse square-root
//! endpoint singularities are removed analytically before refinement with
//! the substitutions `x = a + s²` (left end) and `x = b − s²` (right end).
//!
//! Integrands may be fallible (`FnMut(f64) -> Result<f64, E>`), which lets
//! nested quadratures propagate inner failures to the outermost caller.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

/// Default absolute tolerance.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Intervals narrower than this integrate to zero.
pub const DEGENERATE_WIDTH: f64 = 1e-14;

/// Default subinterval budget.
pub const DEFAULT_MAX_INTERVALS: usize = 4000;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Raised when the refinement budget is exhausted before the tolerance is met.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error(
    "quadrature on [{a}, {b}] did not converge: best estimate {estimate:e}, \
     error bound {error:e} after {intervals} subintervals"
)]
pub struct QuadratureError {
    pub a: f64,
    pub b: f64,
    pub estimate: f64,
    pub error: f64,
    pub intervals: usize,
}

/// Accuracy floor, relative to `∫|f|`, imposed by the Kronrod error estimate.
pub const ROUNDOFF_REL: f64 = 1e-13;

/// Convergence controls. The iteration stops once the global error estimate
/// is below `max(abs_tol, rel_tol·|I|, ROUNDOFF_REL·∫|f|)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl QuadOptions {
    pub fn absolute(tol: f64) -> Self {
        Self { abs_tol: tol, rel_tol: 0.0, max_intervals: DEFAULT_MAX_INTERVALS }
    }

    pub fn relative(abs_tol: f64, rel_tol: f64) -> Self {
        Self { abs_tol, rel_tol, max_intervals: DEFAULT_MAX_INTERVALS }
    }

    pub fn with_max_intervals(mut self, n: usize) -> Self {
        self.max_intervals = n;
        self
    }

    // Kronrod error estimates never drop below a few ulps of the segment
    // mass `∫|f|`, so tighter requests cannot be met. Measuring the floor
    // against the mass rather than `|I|` keeps cancelling integrands solvable.
    fn target(&self, value: f64, mass: f64) -> f64 {
        self.abs_tol.max(self.rel_tol * value.abs()).max(ROUNDOFF_REL * mass)
    }

    /// Splits the absolute budget between `parts` independent pieces.
    pub fn share(&self, parts: usize) -> Self {
        Self { abs_tol: self.abs_tol / parts.max(1) as f64, ..*self }
    }
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self::absolute(DEFAULT_TOL)
    }
}

/// Integral value with its error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

/// Behaviour of a [`SingularIntegrand`] at one endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Endpoint {
    /// Exponent 0: the smooth part is integrated as is.
    Regular,
    /// Exponent −1/2: a factor `(x − a)^{-1/2}` or `(b − x)^{-1/2}`.
    InverseSqrt,
}

impl Endpoint {
    pub fn exponent(self) -> f64 {
        match self {
            Endpoint::Regular => 0.0,
            Endpoint::InverseSqrt => -0.5,
        }
    }
}

/// `∫_a^b smooth(x) (x − a)^{α} (b − x)^{β} dx` with `α, β ∈ {0, −1/2}`.
///
/// The weight factors are applied by the integrator from exact distances to
/// the endpoints, so `smooth` must not include them.
pub struct SingularIntegrand<F> {
    pub smooth_part: F,
    pub left: Endpoint,
    pub right: Endpoint,
    pub a: f64,
    pub b: f64,
}

impl<F> SingularIntegrand<F> {
    pub fn new(smooth_part: F, a: f64, b: f64, left: Endpoint, right: Endpoint) -> Self {
        Self { smooth_part, left, right, a, b }
    }
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
    mass: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}

impl Eq for Segment {}

impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod15<E, F>(f: &mut F, a: f64, b: f64) -> Result<Segment, E>
where
    F: FnMut(f64) -> Result<f64, E>,
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let f_center = f(center)?;
    let mut res_k = f_center * WGK[7];
    let mut res_g = f_center * WG[3];
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx)?;
        let f2 = f(center + dx)?;
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[7] * (f_center - mean).abs();
    for j in 0..7 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let value = res_k * half;
    res_abs *= half.abs();
    res_asc *= half.abs();
    let mut error = ((res_k - res_g) * half).abs();
    // QUADPACK rescaling of the raw Kronrod–Gauss difference.
    if res_asc != 0.0 && error != 0.0 {
        error = res_asc * (200.0 * error / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(50.0 * f64::EPSILON * res_abs);
    }
    Ok(Segment { a, b, value, error, mass: res_abs })
}

/// Globally adaptive Gauss–Kronrod quadrature of a fallible integrand over
/// `[a, b]`, with the initial partition split at `breaks` (points outside the
/// open interval are ignored).
pub fn try_integrate_breaks<E, F>(
    mut f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    opts: QuadOptions,
) -> Result<Estimate, E>
where
    F: FnMut(f64) -> Result<f64, E>,
    E: From<QuadratureError>,
{
    if !(b - a >= DEGENERATE_WIDTH) {
        return Ok(Estimate { value: 0.0, error: 0.0, evaluations: 0 });
    }
    let mut points: Vec<f64> = Vec::with_capacity(breaks.len() + 2);
    points.push(a);
    points.extend(breaks.iter().copied().filter(|&x| x > a && x < b));
    points.push(b);
    points.sort_by(f64::total_cmp);
    points.dedup_by(|x, y| (*x - *y).abs() < DEGENERATE_WIDTH);

    let mut heap = BinaryHeap::new();
    let mut evaluations = 0;
    let mut value = 0.0;
    let mut error = 0.0;
    let mut mass = 0.0;
    for w in points.windows(2) {
        if w[1] - w[0] < DEGENERATE_WIDTH {
            continue;
        }
        let seg = kronrod15(&mut f, w[0], w[1])?;
        evaluations += 15;
        value += seg.value;
        error += seg.error;
        mass += seg.mass;
        heap.push(seg);
    }
    // Segments too narrow to bisect further; their error is frozen.
    let mut frozen_error = 0.0;
    while error > opts.target(value, mass) {
        if heap.len() >= opts.max_intervals {
            return Err(QuadratureError { a, b, estimate: value, error, intervals: heap.len() }.into());
        }
        let Some(worst) = heap.pop() else { break };
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b || (worst.b - worst.a) < 4.0 * f64::EPSILON * mid.abs().max(1.0) {
            frozen_error += worst.error;
            if frozen_error > opts.target(value, mass) {
                return Err(QuadratureError { a, b, estimate: value, error, intervals: heap.len() + 1 }.into());
            }
            continue;
        }
        let left = kronrod15(&mut f, worst.a, mid)?;
        let right = kronrod15(&mut f, mid, worst.b)?;
        evaluations += 30;
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        mass += left.mass + right.mass - worst.mass;
        heap.push(left);
        heap.push(right);
        if heap.is_empty() {
            break;
        }
    }
    // Re-sum to shed accumulated cancellation in the running totals.
    let value = heap.iter().map(|s| s.value).sum::<f64>();
    let error = heap.iter().map(|s| s.error).sum::<f64>() + frozen_error;
    Ok(Estimate { value, error, evaluations })
}

/// Fallible integrand over `[a, b]` without breakpoints.
pub fn try_integrate<E, F>(f: F, a: f64, b: f64, opts: QuadOptions) -> Result<Estimate, E>
where
    F: FnMut(f64) -> Result<f64, E>,
    E: From<QuadratureError>,
{
    try_integrate_breaks(f, a, b, &[], opts)
}

/// Adaptive quadrature of a smooth integrand with absolute tolerance `tol`.
pub fn integrate_smooth<F>(mut f: F, a: f64, b: f64, tol: f64) -> Result<f64, QuadratureError>
where
    F: FnMut(f64) -> f64,
{
    try_integrate(|x| Ok::<_, QuadratureError>(f(x)), a, b, QuadOptions::absolute(tol)).map(|e| e.value)
}

/// Fallible singular integral; see [`SingularIntegrand`].
pub fn try_integrate_singular<E, F>(
    integrand: SingularIntegrand<F>,
    opts: QuadOptions,
) -> Result<Estimate, E>
where
    F: FnMut(f64) -> Result<f64, E>,
    E: From<QuadratureError>,
{
    let SingularIntegrand { mut smooth_part, left, right, a, b } = integrand;
    let width = b - a;
    if !(width >= DEGENERATE_WIDTH) {
        return Ok(Estimate { value: 0.0, error: 0.0, evaluations: 0 });
    }
    let weight = |e: Endpoint, d: f64| match e {
        Endpoint::Regular => 1.0,
        Endpoint::InverseSqrt => 1.0 / d.sqrt(),
    };
    match (left, right) {
        (Endpoint::Regular, Endpoint::Regular) => try_integrate(smooth_part, a, b, opts),
        (Endpoint::InverseSqrt, Endpoint::Regular) => try_integrate::<E, _>(
            |s: f64| Ok(2.0 * smooth_part(a + s * s)?),
            0.0,
            width.sqrt(),
            opts,
        ),
        (Endpoint::Regular, Endpoint::InverseSqrt) => try_integrate::<E, _>(
            |s: f64| Ok(2.0 * smooth_part(b - s * s)?),
            0.0,
            width.sqrt(),
            opts,
        ),
        (Endpoint::InverseSqrt, Endpoint::InverseSqrt) => {
            let half = 0.5 * width;
            let piece = opts.share(2);
            let lo = try_integrate::<E, _>(
                |s: f64| {
                    let s2 = s * s;
                    Ok(2.0 * smooth_part(a + s2)? * weight(right, width - s2))
                },
                0.0,
                half.sqrt(),
                piece,
            )?;
            let hi = try_integrate::<E, _>(
                |s: f64| {
                    let s2 = s * s;
                    Ok(2.0 * smooth_part(b - s2)? * weight(left, width - s2))
                },
                0.0,
                half.sqrt(),
                piece,
            )?;
            Ok(Estimate {
                value: lo.value + hi.value,
                error: lo.error + hi.error,
                evaluations: lo.evaluations + hi.evaluations,
            })
        }
    }
}

/// Integral of `smooth(x) (x − a)^{α} (b − x)^{β}` to absolute tolerance `tol`.
pub fn integrate_singular<F>(integrand: SingularIntegrand<F>, tol: f64) -> Result<f64, QuadratureError>
where
    F: FnMut(f64) -> f64,
{
    let SingularIntegrand { mut smooth_part, left, right, a, b } = integrand;
    try_integrate_singular(
        SingularIntegrand::new(|x| Ok::<_, QuadratureError>(smooth_part(x)), a, b, left, right),
        QuadOptions::absolute(tol),
    )
    .map(|e| e.value)
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`, by Newton iteration on
/// the Legendre recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0, "rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = (n + 1) / 2;
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for j in 2..=n {
                let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { x } else { p1 };
            let pn1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pn1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{E, FRAC_PI_2, PI};

    /// Composite fixed rule, independent of the adaptive machinery.
    fn composite_gl(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize, order: usize) -> f64 {
        let (x, w) = gauss_legendre(order);
        let h = (b - a) / panels as f64;
        (0..panels)
            .map(|i| {
                let c = a + (i as f64 + 0.5) * h;
                x.iter().zip(&w).map(|(xi, wi)| wi * f(c + 0.5 * h * xi)).sum::<f64>() * 0.5 * h
            })
            .sum()
    }

    #[test]
    fn inverse_sqrt_left() {
        let v = integrate_singular(SingularIntegrand::new(|_| 1.0, 0.0, 1.0, Endpoint::InverseSqrt, Endpoint::Regular), 1e-12)
            .unwrap();
        assert!((v - 2.0).abs() < 1e-12, "{v}");
    }

    #[test]
    fn beta_half_half_is_pi() {
        let v = integrate_singular(
            SingularIntegrand::new(|_| 1.0, 0.0, 1.0, Endpoint::InverseSqrt, Endpoint::InverseSqrt),
            1e-12,
        )
        .unwrap();
        assert!((v - PI).abs() < 1e-11, "{v}");
    }

    fn beta_kernel(a: f64, b: f64) -> f64 {
        integrate_singular(
            SingularIntegrand::new(
                move |rho: f64| rho / ((rho + a).sqrt() * (b + rho).sqrt()),
                a,
                b,
                Endpoint::InverseSqrt,
                Endpoint::InverseSqrt,
            ),
            1e-10,
        )
        .unwrap()
    }

    #[test]
    fn beta_identity_one_two() {
        assert!((beta_kernel(1.0, 2.0) - FRAC_PI_2).abs() < 1e-10);
    }

    #[test]
    fn beta_identity_zero_lower_limit() {
        assert!((beta_kernel(0.0, 3.0) - FRAC_PI_2).abs() < 1e-10);
    }

    #[test]
    fn smooth_examples() {
        assert!((integrate_smooth(f64::sin, 0.0, PI, 1e-12).unwrap() - 2.0).abs() < 1e-12);
        assert!((integrate_smooth(|_| 1.0, 0.0, 1.0, 1e-12).unwrap() - 1.0).abs() < 1e-14);
        let oracle = composite_gl(f64::exp, 0.0, 1.0, 10, 15);
        assert!((oracle - (E - 1.0)).abs() < 1e-14);
        let v = integrate_smooth(f64::exp, 0.0, 1.0, 1e-9).unwrap();
        assert!((v - oracle).abs() < 1e-9);
    }

    #[test]
    fn degenerate_interval_is_zero() {
        assert_eq!(integrate_smooth(|_| 1e30, 1.0, 1.0 + 1e-15, 1e-9).unwrap(), 0.0);
        let v = integrate_singular(
            SingularIntegrand::new(|_| 1.0, 2.0, 2.0 + 5e-15, Endpoint::InverseSqrt, Endpoint::InverseSqrt),
            1e-9,
        )
        .unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn budget_exhaustion_reports_best_estimate() {
        let err = try_integrate(
            |x: f64| Ok::<_, QuadratureError>(1.0 / x),
            0.0,
            1.0,
            QuadOptions::absolute(1e-12).with_max_intervals(50),
        )
        .unwrap_err();
        assert_eq!(err.intervals, 50);
        assert!(err.estimate.is_finite() && err.error > 1e-12);
    }

    #[test]
    fn relative_tolerance_scales() {
        let e = try_integrate(
            |x: f64| Ok::<_, QuadratureError>(1e12 * x.exp()),
            0.0,
            1.0,
            QuadOptions::relative(0.0, 1e-12),
        )
        .unwrap();
        assert!((e.value / (1e12 * (E - 1.0)) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn breakpoints_handle_kinks() {
        let e = try_integrate_breaks(
            |x: f64| Ok::<_, QuadratureError>((x - 0.3).abs()),
            0.0,
            1.0,
            &[0.3],
            QuadOptions::absolute(1e-13),
        )
        .unwrap();
        assert!((e.value - (0.045 + 0.245)).abs() < 1e-13);
        assert_eq!(e.evaluations, 30);
    }

    #[test]
    fn gauss_legendre_is_exact_for_polynomials() {
        for n in [1, 2, 5, 8, 13] {
            let (x, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13);
            let deg = 2 * n - 1;
            let q: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(deg as i32 - 1)).sum();
            let exact = if (deg - 1) % 2 == 0 { 2.0 / deg as f64 } else { 0.0 };
            assert!((q - exact).abs() < 1e-13, "n={n}: {q} vs {exact}");
        }
    }

    #[test]
    fn beta_identity_random_pairs() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let a: f64 = rng.gen_range(0.0..49.0);
            let b: f64 = rng.gen_range(a + 1e-3..50.0);
            let v = beta_kernel(a, b);
            assert!((v - FRAC_PI_2).abs() < 1e-9, "a={a} b={b}: {v}");
        }
    }

    proptest! {
        #[test]
        fn linearity(alpha in -3.0..3.0f64, beta in -3.0..3.0f64, w in 0.5..4.0f64, c in -2.0..2.0f64) {
            let tol = 1e-10;
            let f = |x: f64| (w * x).sin() + c;
            let g = |x: f64| (-x * x).exp() * (1.0 + x);
            let lhs = integrate_smooth(|x| alpha * f(x) + beta * g(x), -1.0, 2.0, tol).unwrap();
            let rhs = alpha * integrate_smooth(f, -1.0, 2.0, tol).unwrap()
                + beta * integrate_smooth(g, -1.0, 2.0, tol).unwrap();
            prop_assert!((lhs - rhs).abs() <= 2.0 * tol * (1.0 + alpha.abs() + beta.abs()));
        }

        #[test]
        fn interval_additivity(a in -2.0..0.0f64, m in 0.0..1.0f64, b in 1.0..3.0f64) {
            let tol = 1e-10;
            let f = |x: f64| (x * 1.7).cos() * (-0.2 * x * x).exp();
            let whole = integrate_smooth(f, a, b, tol).unwrap();
            let split = integrate_smooth(f, a, m, tol).unwrap() + integrate_smooth(f, m, b, tol).unwrap();
            prop_assert!((whole - split).abs() <= 2.0 * tol);
        }
    }
}
