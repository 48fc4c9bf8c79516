//! Compactly supported radial initial data.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::RadialFunction;
use crate::quadrature::integrate_smooth;

/// Threshold below which `∫g` counts as zero.
pub const MEAN_ZERO_TOL: f64 = 1e-10;

const MOMENT_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Smoothness {
    C2,
    C3,
}

#[derive(Clone)]
enum Shape {
    Zero,
    Bump,
    /// `bump(r)·(1 − c (r/k)²)`.
    MeanZeroBump { c: f64 },
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

/// Radial function `φ(r)` vanishing for `r ≥ k`, with its cached integral
/// over the plane.
#[derive(Clone)]
pub struct RadialProfile {
    k: f64,
    shape: Shape,
    moment: f64,
    smoothness: Smoothness,
}

impl fmt::Debug for RadialProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let shape = match &self.shape {
            Shape::Zero => "zero".to_string(),
            Shape::Bump => "bump".to_string(),
            Shape::MeanZeroBump { c } => format!("mean-zero bump (c = {c})"),
            Shape::Custom(_) => "custom".to_string(),
        };
        f.debug_struct("RadialProfile")
            .field("k", &self.k)
            .field("shape", &shape)
            .field("moment", &self.moment)
            .field("smoothness", &self.smoothness)
            .finish()
    }
}

/// `exp(1 − 1/(1 − s²))` for `s < 1`, zero otherwise; equals 1 at the origin.
pub fn unit_bump(s: f64) -> f64 {
    let s = s.abs();
    if s >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - s * s)).exp()
    }
}

impl RadialProfile {
    fn build(k: f64, shape: Shape, smoothness: Smoothness) -> Result<Self> {
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::Config(format!("support radius must be positive, got {k}")));
        }
        let mut profile = Self { k, shape, moment: 0.0, smoothness };
        profile.moment = 2.0 * PI * integrate_smooth(|r| r * profile.eval(r), 0.0, k, MOMENT_TOL)?;
        Ok(profile)
    }

    pub fn zero(k: f64) -> Result<Self> {
        Self::build(k, Shape::Zero, Smoothness::C3)
    }

    pub fn bump(k: f64) -> Result<Self> {
        Self::build(k, Shape::Bump, Smoothness::C3)
    }

    /// Bump times `1 − c (r/k)²` with `c` chosen so that the plane integral
    /// vanishes. The constraint is linear in `c`, so it is solved directly.
    pub fn mean_zero_bump(k: f64) -> Result<Self> {
        let m1 = integrate_smooth(|r| r * unit_bump(r / k), 0.0, k, MOMENT_TOL)?;
        let m3 = integrate_smooth(|r| r * (r / k).powi(2) * unit_bump(r / k), 0.0, k, MOMENT_TOL)?;
        Self::build(k, Shape::MeanZeroBump { c: m1 / m3 }, Smoothness::C3)
    }

    /// Arbitrary radial function; values at `r ≥ k` are forced to zero.
    pub fn custom(k: f64, smoothness: Smoothness, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Result<Self> {
        Self::build(k, Shape::Custom(Arc::new(f)), smoothness)
    }

    /// `c · φ`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        let inner = self.clone();
        Self::custom(self.k, self.smoothness, move |r| c * inner.eval(r))
    }

    pub fn eval(&self, r: f64) -> f64 {
        let r = r.abs();
        if r >= self.k {
            return 0.0;
        }
        let s = r / self.k;
        match &self.shape {
            Shape::Zero => 0.0,
            Shape::Bump => unit_bump(s),
            Shape::MeanZeroBump { c } => unit_bump(s) * (1.0 - c * s * s),
            Shape::Custom(f) => f(r),
        }
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    /// `∫_{R²} φ dx = 2π ∫₀^k φ(r) r dr`.
    pub fn moment(&self) -> f64 {
        self.moment
    }

    pub fn smoothness(&self) -> Smoothness {
        self.smoothness
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.shape, Shape::Zero)
    }

    /// `∫_{R²} |φ| dx`.
    pub fn l1_norm(&self) -> Result<f64> {
        Ok(2.0 * PI * integrate_smooth(|r| r * self.eval(r).abs(), 0.0, self.k, MOMENT_TOL)?)
    }
}

impl RadialFunction for RadialProfile {
    fn value(&self, r: f64) -> f64 {
        self.eval(r)
    }

    fn support_radius(&self) -> Option<f64> {
        Some(self.k)
    }
}

/// Canonical initial-data families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataFamily {
    /// `f = 0`, `g = bump`: `∫g > 0`.
    BumpPositiveG,
    /// `f = 0`, `g` = mean-zero bump.
    BumpMeanZeroG,
    /// `f = bump`, `g = 0`.
    FOnly,
}

impl DataFamily {
    pub const ALL: [DataFamily; 3] = [DataFamily::BumpPositiveG, DataFamily::BumpMeanZeroG, DataFamily::FOnly];

    pub fn id(self) -> &'static str {
        match self {
            DataFamily::BumpPositiveG => "bump_positive_g",
            DataFamily::BumpMeanZeroG => "bump_meanzero_g",
            DataFamily::FOnly => "f_only",
        }
    }

    pub fn data(self, k: f64) -> Result<DataPair> {
        let (f, g) = match self {
            DataFamily::BumpPositiveG => (RadialProfile::zero(k)?, RadialProfile::bump(k)?),
            DataFamily::BumpMeanZeroG => (RadialProfile::zero(k)?, RadialProfile::mean_zero_bump(k)?),
            DataFamily::FOnly => (RadialProfile::bump(k)?, RadialProfile::zero(k)?),
        };
        DataPair::new(f, g)
    }
}

impl std::str::FromStr for DataFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DataFamily::ALL
            .into_iter()
            .find(|d| d.id() == s)
            .ok_or_else(|| Error::Config(format!("unknown data family `{s}`")))
    }
}

impl fmt::Display for DataFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

/// Which branch of the lifespan estimate applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeanCase {
    MeanZero,
    NonzeroMean,
}

/// Initial position `f` and velocity `g`, sharing the support radius `k`.
#[derive(Debug, Clone)]
pub struct DataPair {
    pub f: RadialProfile,
    pub g: RadialProfile,
    pub g_mean_zero: bool,
}

impl DataPair {
    pub fn new(f: RadialProfile, g: RadialProfile) -> Result<Self> {
        if f.k() != g.k() {
            return Err(Error::Config(format!("f and g must share k ({} vs {})", f.k(), g.k())));
        }
        let g_mean_zero = g.moment().abs() <= MEAN_ZERO_TOL;
        Ok(Self { f, g, g_mean_zero })
    }

    pub fn k(&self) -> f64 {
        self.f.k()
    }

    pub fn case(&self) -> MeanCase {
        if self.g_mean_zero {
            MeanCase::MeanZero
        } else {
            MeanCase::NonzeroMean
        }
    }

    pub fn is_trivial(&self) -> bool {
        self.f.is_zero() && self.g.is_zero()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bump_moment_matches_closed_form() {
        // 2π ∫₀¹ e^{1−1/(1−s²)} s ds = π e (e^{-1} − E₁(1)).
        let e1_of_1 = 0.219_383_934_395_520_3;
        let expected = PI * std::f64::consts::E * ((-1f64).exp() - e1_of_1);
        let b = RadialProfile::bump(1.0).unwrap();
        assert!((b.moment() - expected).abs() < 1e-12, "{}", b.moment());
        let b2 = RadialProfile::bump(2.0).unwrap();
        assert!((b2.moment() - 4.0 * expected).abs() < 1e-11);
    }

    #[test]
    fn mean_zero_bump_has_zero_moment() {
        for k in [1.0, 1.5, 4.0] {
            let g = RadialProfile::mean_zero_bump(k).unwrap();
            assert!(g.moment().abs() < 1e-12, "k={k}: {}", g.moment());
            let d = DataPair::new(RadialProfile::zero(k).unwrap(), g).unwrap();
            assert!(d.g_mean_zero);
        }
    }

    #[test]
    fn support_is_respected() {
        let b = RadialProfile::bump(1.5).unwrap();
        assert_eq!(b.eval(1.5), 0.0);
        assert_eq!(b.eval(7.0), 0.0);
        assert!(b.eval(1.499) >= 0.0);
        let c = RadialProfile::custom(1.0, Smoothness::C2, |_| 3.0).unwrap();
        assert_eq!(c.eval(1.0), 0.0);
        assert!((c.moment() - 3.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn families_round_trip_through_ids() {
        for fam in DataFamily::ALL {
            assert_eq!(fam.id().parse::<DataFamily>().unwrap(), fam);
        }
        assert!("nope".parse::<DataFamily>().is_err());
        assert_eq!(DataFamily::BumpPositiveG.data(1.0).unwrap().case(), MeanCase::NonzeroMean);
        assert_eq!(DataFamily::FOnly.data(1.0).unwrap().case(), MeanCase::MeanZero);
    }

    #[test]
    fn mismatched_support_rejected() {
        let f = RadialProfile::bump(1.0).unwrap();
        let g = RadialProfile::bump(2.0).unwrap();
        assert!(DataPair::new(f, g).is_err());
    }
}
