//! Weights `τ±`, `w₁`, `w₂`, `w₃`, the weighted sup-norms built from them,
//! the growth factors `D₁`, `D₂`, `D₃,ν`, and numerical checks of the basic
//! estimates `L(Ψ) ≤ C k² w⁻¹ D(T)` behind the a priori bounds.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::duhamel::{l_apply, OPERATOR_TOL};
use crate::error::{Error, Result};
use crate::field::{FnField, SpacetimeField};
use crate::kernels::gamma_exponent;

/// Half-width of the band around `p = ν + 2/3` that selects the logarithmic
/// branch of `D₃,ν`.
pub const D3_BRANCH_TOL: f64 = 1e-12;

/// `((t + r + 2k)/k, (t − r + 2k)/k)`.
pub fn tau(r: f64, t: f64, k: f64) -> (f64, f64) {
    ((t + r + 2.0 * k) / k, (t - r + 2.0 * k) / k)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightId {
    W1,
    W2,
    W3,
}

impl WeightId {
    pub fn index(self) -> u8 {
        match self {
            WeightId::W1 => 1,
            WeightId::W2 => 2,
            WeightId::W3 => 3,
        }
    }
}

impl fmt::Display for WeightId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "w{}", self.index())
    }
}

/// `w₁ = τ₊^{1/2} τ₋^{1/2}`, `w₂ = τ₊^{1/2} τ₋^{3/2}`, `w₃ = τ₊^{p/2−1}`.
pub fn weight(id: WeightId, r: f64, t: f64, k: f64, p: f64) -> f64 {
    let (tp, tm) = tau(r, t, k);
    match id {
        WeightId::W1 => (tp * tm).sqrt(),
        WeightId::W2 => tp.sqrt() * tm * tm.sqrt(),
        WeightId::W3 => tp.powf(0.5 * p - 1.0),
    }
}

/// Weighted sup-norm of a grid field with the node attaining it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub weight: WeightId,
    pub value: f64,
    /// `(r, t)` of the maximizing node; `None` when the field vanishes.
    pub argmax: Option<(f64, f64)>,
    pub horizon: f64,
}

/// `sup w(r, t)|U(r, t)|` over the nodes inside the cone. Ties go to the
/// smallest `t`, then the smallest `r`.
pub fn weighted_norm(u: &SpacetimeField, id: WeightId, p: f64) -> Result<NormReport> {
    let g = *u.grid();
    let mut value = 0.0;
    let mut argmax = None;
    for j in 0..=g.n_t() {
        let t = g.t(j);
        for (i, v) in u.row(j).iter().enumerate().take(g.cone_edge(j) + 1) {
            if !v.is_finite() {
                return Err(Error::Domain(format!("non-finite value at node ({i}, {j})")));
            }
            let r = g.r(i);
            let x = weight(id, r, t, g.k, p) * v.abs();
            if x > value {
                value = x;
                argmax = Some((r, t));
            }
        }
    }
    Ok(NormReport { weight: id, value, argmax, horizon: g.horizon() })
}

fn growth_base(t: f64, k: f64) -> f64 {
    (2.0 * t + 3.0 * k) / k
}

/// `((2T + 3k)/k)^{3−p}`.
pub fn d1(t: f64, k: f64, p: f64) -> f64 {
    growth_base(t, k).powf(3.0 - p)
}

/// `((2T + 3k)/k)^{γ(p,2)/2}`.
pub fn d2(t: f64, k: f64, p: f64) -> f64 {
    growth_base(t, k).powf(0.5 * gamma_exponent(p, 2))
}

/// `D₃,ν(T)` for `0 ≤ ν < p`; three branches split at `p = ν + 2/3`.
pub fn d3(t: f64, k: f64, p: f64, nu: f64) -> Result<f64> {
    if !(0.0..p).contains(&nu) {
        return Err(Error::Domain(format!("D3 needs 0 ≤ ν < p, got ν = {nu}, p = {p}")));
    }
    let x = growth_base(t, k);
    let gap = p - nu - 2.0 / 3.0;
    Ok(if gap.abs() <= D3_BRANCH_TOL {
        x.ln() * x.powf((7.0 / 3.0 - nu) * nu / 2.0)
    } else if gap > 0.0 {
        x.powf(nu * (3.0 - p) / 2.0)
    } else {
        x.powf(1.0 - 1.5 * p + (3.0 - 0.5 * p) * nu)
    })
}

/// The three comparisons `D₃,₁ ≤ D₂^{1/p}`, `D₃,p−1 ≤ D₂^{(p−1)/(p+1)}`,
/// `D₃,₀ = 1`. Margins are `ln(rhs/lhs)` for the inequalities and
/// `|D₃,₀ − 1|` for the identity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub t: f64,
    pub k: f64,
    pub p: f64,
    pub d3_1: f64,
    pub d2_root_p: f64,
    pub margin_1: f64,
    pub d3_pm1: f64,
    pub d2_root_pp1: f64,
    pub margin_2: f64,
    pub d3_0: f64,
    pub defect_3: f64,
}

impl ComparisonReport {
    pub fn holds(&self) -> bool {
        self.margin_1 > 0.0 && self.margin_2 > 0.0 && self.defect_3 <= 1e-15
    }
}

pub fn check_comparison(t: f64, k: f64, p: f64) -> Result<ComparisonReport> {
    if !(p > 1.0 && p < 2.0) {
        return Err(Error::Domain(format!("comparisons need 1 < p < 2, got {p}")));
    }
    let dd2 = d2(t, k, p);
    let d3_1 = d3(t, k, p, 1.0)?;
    let d3_pm1 = d3(t, k, p, p - 1.0)?;
    let d3_0 = d3(t, k, p, 0.0)?;
    let d2_root_p = dd2.powf(1.0 / p);
    let d2_root_pp1 = dd2.powf((p - 1.0) / (p + 1.0));
    Ok(ComparisonReport {
        t,
        k,
        p,
        d3_1,
        d2_root_p,
        margin_1: (d2_root_p / d3_1).ln(),
        d3_pm1,
        d2_root_pp1,
        margin_2: (d2_root_pp1 / d3_pm1).ln(),
        d3_0,
        defect_3: (d3_0 - 1.0).abs(),
    })
}

/// Which basic estimate to probe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum AprioriKind {
    /// `L(w₁^{−p}) w₁ ≤ C k² D₁(T)`.
    Basic1,
    /// `L(w₃^{−p}) w₃ ≤ C k² D₂(T)`.
    Basic2,
    /// `L(w₂^{−(p−ν)} w₃^{−ν}) w₃ ≤ C k² D₃,ν(T)`.
    Basic3 { nu: f64 },
}

impl AprioriKind {
    pub fn name(&self) -> String {
        match self {
            AprioriKind::Basic1 => "basic1".into(),
            AprioriKind::Basic2 => "basic2".into(),
            AprioriKind::Basic3 { nu } => format!("basic3(nu={nu})"),
        }
    }

    fn nu(&self) -> Option<f64> {
        match self {
            AprioriKind::Basic3 { nu } => Some(*nu),
            _ => None,
        }
    }

    /// Forcing `Ψ(λ, τ)` inside the cone.
    fn forcing(&self, l: f64, tau: f64, k: f64, p: f64) -> f64 {
        match *self {
            AprioriKind::Basic1 => weight(WeightId::W1, l, tau, k, p).powf(-p),
            AprioriKind::Basic2 => weight(WeightId::W3, l, tau, k, p).powf(-p),
            AprioriKind::Basic3 { nu } => {
                weight(WeightId::W2, l, tau, k, p).powf(-(p - nu)) * weight(WeightId::W3, l, tau, k, p).powf(-nu)
            }
        }
    }

    fn output_weight(&self) -> WeightId {
        match self {
            AprioriKind::Basic1 => WeightId::W1,
            _ => WeightId::W3,
        }
    }

    fn growth(&self, t: f64, k: f64, p: f64) -> Result<f64> {
        match *self {
            AprioriKind::Basic1 => Ok(d1(t, k, p)),
            AprioriKind::Basic2 => Ok(d2(t, k, p)),
            AprioriKind::Basic3 { nu } => d3(t, k, p, nu),
        }
    }
}

/// Where `L(Ψ)` is sampled: a geometric ladder in `t`, and at each `t` a
/// spread of radii over `[0, t + k]` plus offsets `η k` inside the cone edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AprioriSampling {
    /// First sampled time, in units of `k`.
    pub t_min: f64,
    pub t_per_octave: usize,
    /// Radii `σ (t + k)`.
    pub fractions: Vec<f64>,
    /// Radii `t + k − η k`.
    pub edge_offsets: Vec<f64>,
    pub tol: f64,
}

impl Default for AprioriSampling {
    fn default() -> Self {
        Self {
            t_min: 0.25,
            t_per_octave: 3,
            fractions: vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9],
            edge_offsets: vec![0.02, 0.1, 0.25, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 6.0, 8.0, 12.0, 16.0, 24.0, 32.0, 48.0],
            tol: OPERATOR_TOL,
        }
    }
}

impl AprioriSampling {
    /// Sample nodes `(r, t)` with `t ≤ t_max`, in a fixed order.
    pub fn nodes(&self, k: f64, t_max: f64, horizons: &[f64]) -> Vec<(f64, f64)> {
        let mut times = Vec::new();
        let step = 2f64.powf(1.0 / self.t_per_octave.max(1) as f64);
        let mut t = self.t_min * k;
        while t < t_max * (1.0 - 1e-12) {
            times.push(t);
            t *= step;
        }
        times.extend(horizons.iter().copied().filter(|&h| h <= t_max));
        times.push(t_max);
        times.sort_by(f64::total_cmp);
        times.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs().max(1.0));
        let mut nodes = Vec::new();
        for &t in &times {
            let edge = t + k;
            let mut radii: Vec<f64> = self.fractions.iter().map(|s| s * edge).collect();
            radii.extend(self.edge_offsets.iter().map(|eta| edge - eta * k).filter(|&r| r >= 0.0));
            radii.sort_by(f64::total_cmp);
            radii.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * edge);
            nodes.extend(radii.into_iter().map(|r| (r, t)));
        }
        nodes
    }
}

/// Normalized suprema `Q(T) = sup_{t ≤ T} L(Ψ) w / (k² D(T))` along a ladder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AprioriReport {
    pub kind: String,
    pub p: f64,
    pub nu: Option<f64>,
    pub k: f64,
    pub horizons: Vec<f64>,
    #[serde(rename = "Q")]
    pub q: Vec<f64>,
    /// Node attaining each `Q(T)`.
    pub argmax: Vec<(f64, f64)>,
    pub nodes: usize,
    pub route: String,
}

impl AprioriReport {
    /// `Q(T_{m+1}) / Q(T_m)` along the ladder.
    pub fn ratios(&self) -> Vec<f64> {
        self.q.windows(2).map(|w| w[1] / w[0]).collect()
    }

    pub fn max_q(&self) -> f64 {
        self.q.iter().copied().fold(0.0, f64::max)
    }
}

/// Evaluates `L(Ψ)` for the forcing of `kind`, restricted to `r ≤ t + k`,
/// at the sample nodes and reports `Q(T)` for each horizon (ascending).
pub fn verify_apriori(
    kind: AprioriKind,
    p: f64,
    k: f64,
    horizons: &[f64],
    sampling: &AprioriSampling,
) -> Result<AprioriReport> {
    if !(p > 1.0 && p < 2.0) {
        return Err(Error::Domain(format!("need 1 < p < 2, got {p}")));
    }
    if let Some(nu) = kind.nu() {
        if !(0.0..p).contains(&nu) {
            return Err(Error::Domain(format!("need 0 ≤ ν < p, got ν = {nu}")));
        }
    }
    if horizons.is_empty() || horizons.windows(2).any(|w| w[1] <= w[0]) || horizons[0] <= 0.0 {
        return Err(Error::Config("horizons must be positive and strictly increasing".into()));
    }
    let t_max = *horizons.last().unwrap_or(&0.0);
    let psi = FnField::with_support(move |l: f64, tau: f64| kind.forcing(l, tau, k, p), k);
    let nodes = sampling.nodes(k, t_max, horizons);
    let values: Vec<f64> = nodes
        .par_iter()
        .map(|&(r, t)| Ok(l_apply(&psi, r, t, sampling.tol)? * weight(kind.output_weight(), r, t, k, p)))
        .collect::<Result<_>>()?;
    let mut q = Vec::with_capacity(horizons.len());
    let mut argmax = Vec::with_capacity(horizons.len());
    for &h in horizons {
        let norm = k * k * kind.growth(h, k, p)?;
        let (best, at) = nodes
            .iter()
            .zip(&values)
            .filter(|((_, t), _)| *t <= h * (1.0 + 1e-12))
            .fold((0.0, (0.0, 0.0)), |acc, (&node, &v)| if v > acc.0 { (v, node) } else { acc });
        q.push(best / norm);
        argmax.push(at);
    }
    Ok(AprioriReport {
        kind: kind.name(),
        p,
        nu: kind.nu(),
        k,
        horizons: horizons.to_vec(),
        q,
        argmax,
        nodes: nodes.len(),
        route: "kernel".into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::GridSpec;

    #[test]
    fn tau_examples() {
        assert_eq!(tau(0.0, 0.0, 1.0), (2.0, 2.0));
        assert_eq!(tau(2.0, 0.0, 2.0), (3.0, 1.0));
        // τ₋ ≥ 1 on the support r ≤ t + k.
        for &(t, k) in &[(0.0, 1.0), (3.0, 2.0), (50.0, 1.5)] {
            assert!(tau(t + k, t, k).1 >= 1.0 - 1e-15);
        }
    }

    #[test]
    fn growth_factor_examples() {
        assert!((d1(0.0, 1.0, 1.5) - 27f64.sqrt()).abs() < 1e-12);
        assert!((d2(0.0, 1.0, 1.5) - 3f64.powf(2.125)).abs() < 1e-12);
        // p = 1.5 < ν + 2/3 for ν = 1: third branch, exponent 1 − 3p/2 + (3 − p/2)ν = 1.
        assert!((d3(0.0, 1.0, 1.5, 1.0).unwrap() - 3.0).abs() < 1e-12);
        // p = 1.8 > ν + 2/3: first branch, exponent ν(3 − p)/2 = 0.6.
        assert!((d3(0.0, 1.0, 1.8, 1.0).unwrap() - 3f64.powf(0.6)).abs() < 1e-12);
        assert_eq!(d3(7.0, 1.0, 1.3, 0.0).unwrap(), 1.0);
        assert!(d3(1.0, 1.0, 1.5, 1.5).is_err());
        // Logarithmic branch at p = ν + 2/3.
        let x: f64 = 5.0;
        let v = d3(1.0, 1.0, 1.0 + 2.0 / 3.0, 1.0).unwrap();
        assert!((v - x.ln() * x.powf(2.0 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn comparison_example_at_t_100() {
        let c = check_comparison(100.0, 1.0, 1.5).unwrap();
        assert!((c.d3_1 - 203.0).abs() < 1e-9);
        assert!((c.d2_root_p - 203f64.powf(4.25 / 3.0)).abs() < 1e-6);
        assert!(c.holds());
    }

    #[test]
    fn weighted_norm_identity_and_tie_break() {
        let g = GridSpec::uniform(0.25, 2.0, 1.0).unwrap();
        let p = 1.5;
        for id in [WeightId::W1, WeightId::W2, WeightId::W3] {
            let u = SpacetimeField::from_fn(g, |r, t| 1.0 / weight(id, r, t, 1.0, p));
            let n = weighted_norm(&u, id, p).unwrap();
            assert!((n.value - 1.0).abs() < 1e-14);
            let doubled = weighted_norm(&u.map(|v| -2.0 * v), id, p).unwrap();
            assert!((doubled.value - 2.0 * n.value).abs() < 1e-14);
        }
        // With p = 2 the weight w₃ is identically 1, so every node ties.
        let ones = SpacetimeField::from_fn(g, |_, _| 1.0);
        assert_eq!(weighted_norm(&ones, WeightId::W3, 2.0).unwrap().argmax, Some((0.0, 0.0)));
        let zero = weighted_norm(&SpacetimeField::zeros(g), WeightId::W1, p).unwrap();
        assert_eq!(zero.value, 0.0);
        assert!(zero.argmax.is_none());
    }

    #[test]
    fn sampling_nodes_stay_in_cone() {
        let s = AprioriSampling::default();
        let nodes = s.nodes(1.0, 8.0, &[2.0, 4.0, 8.0]);
        assert!(nodes.iter().all(|&(r, t)| r >= 0.0 && r <= t + 1.0 + 1e-12 && t <= 8.0));
        assert!(nodes.iter().any(|&(_, t)| t == 4.0));
    }

    #[test]
    fn apriori_short_ladder_is_finite() {
        let s = AprioriSampling { t_per_octave: 1, ..AprioriSampling::default() };
        let rep = verify_apriori(AprioriKind::Basic1, 1.5, 1.0, &[1.0, 2.0], &s).unwrap();
        assert!(rep.q.iter().all(|q| q.is_finite() && *q > 0.0));
        let json = serde_json::to_value(&rep).unwrap();
        assert!(json.get("Q").is_some() && json.get("horizons").is_some());
    }
}
