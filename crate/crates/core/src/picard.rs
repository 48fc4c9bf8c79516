//! Picard iteration `U₁ = 0`, `U_l = L(|u⁰ + U_{l−1}|^p)` on a fixed grid,
//! and the certified lifespan lower bound obtained by inverting the
//! smallness conditions with numerically estimated constants.
//!
//! For mean-zero `g` the iteration is measured in `‖·‖₃` and the bound
//! comes from `C ε^{p(p−1)} D₂(T) ≤ 1`. Otherwise it is measured in `‖·‖₁`
//! and the bound comes from `2^p p C₁ k² (C′₀ε)^{p−1} D₁(T) ≤ 1`.

use serde::{Deserialize, Serialize};

use crate::duhamel::GridOperator;
use crate::error::{Error, Result};
use crate::field::{GridSpec, SpacetimeField};
use crate::kernels::gamma_exponent;
use crate::linear_wave::{estimate_decay_constants, u0_field, MIN_DECAY_HORIZON};
use crate::profile::{DataPair, MeanCase};
use crate::weights::{d1, d2, verify_apriori, weighted_norm, AprioriKind, AprioriReport, AprioriSampling, WeightId};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PicardOptions {
    pub l_max: usize,
    /// Stop once `‖U_{l+1} − U_l‖ ≤ abs_tol + rel_tol·‖U_{l+1}‖`.
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Weighted norm above which the iteration is declared divergent.
    pub divergence_cap: f64,
}

impl Default for PicardOptions {
    fn default() -> Self {
        Self { l_max: 60, abs_tol: 1e-8, rel_tol: 1e-8, divergence_cap: 1e8 }
    }
}

/// Weighted norms along the iteration. `norms[l − 1] = ‖U_l‖` and
/// `diffs[l − 1] = ‖U_{l+1} − U_l‖`, so `U₁ = 0` contributes `norms[0] = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub weight: WeightId,
    pub norms: Vec<f64>,
    pub diffs: Vec<f64>,
    /// `diffs[l] / diffs[l − 1]`; NaN where the earlier difference is zero.
    pub contraction_ratios: Vec<f64>,
    pub converged: bool,
    /// Index of the returned iterate.
    pub l_stop: usize,
}

impl IterationTrace {
    pub fn max_norm(&self) -> f64 {
        self.norms.iter().copied().fold(0.0, f64::max)
    }

    /// Largest finite contraction ratio.
    pub fn max_ratio(&self) -> Option<f64> {
        self.contraction_ratios.iter().copied().filter(|r| r.is_finite()).reduce(f64::max)
    }
}

/// Norm used for the iteration in each case.
pub fn iteration_weight(case: MeanCase) -> WeightId {
    match case {
        MeanCase::MeanZero => WeightId::W3,
        MeanCase::NonzeroMean => WeightId::W1,
    }
}

/// The map `U ↦ L(|u⁰ + U|^p)` on one grid.
pub struct PicardSolver {
    op: GridOperator,
    u0: SpacetimeField,
    p: f64,
    weight: WeightId,
}

impl PicardSolver {
    pub fn new(data: &DataPair, eps: f64, p: f64, grid: GridSpec) -> Result<Self> {
        check_p(p)?;
        check_eps(eps)?;
        Self::with_operator(GridOperator::new(grid)?, data, eps, p)
    }

    /// Reuses a built operator, whose grid must cover the data's support.
    pub fn with_operator(op: GridOperator, data: &DataPair, eps: f64, p: f64) -> Result<Self> {
        check_eps(eps)?;
        if op.grid().k != data.k() {
            return Err(Error::Config(format!("grid k = {} differs from data k = {}", op.grid().k, data.k())));
        }
        let u0 = u0_field(data, eps, op.grid())?;
        Self::from_parts(op, u0, p, iteration_weight(data.case()))
    }

    pub fn from_parts(op: GridOperator, u0: SpacetimeField, p: f64, weight: WeightId) -> Result<Self> {
        check_p(p)?;
        if u0.grid() != op.grid() {
            return Err(Error::Config("u0 grid differs from the operator grid".into()));
        }
        Ok(Self { op, u0, p, weight })
    }

    pub fn u0(&self) -> &SpacetimeField {
        &self.u0
    }

    pub fn operator(&self) -> &GridOperator {
        &self.op
    }

    pub fn weight(&self) -> WeightId {
        self.weight
    }

    pub fn into_operator(self) -> GridOperator {
        self.op
    }

    pub fn step(&self, u: &SpacetimeField) -> Result<SpacetimeField> {
        let p = self.p;
        let forcing = self.u0.zip_with(u, |a, b| (a + b).abs().powf(p))?;
        self.op.apply(&forcing)
    }

    pub fn norm(&self, u: &SpacetimeField) -> Result<f64> {
        Ok(weighted_norm(u, self.weight, self.p)?.value)
    }

    /// `‖U − L(|u⁰ + U|^p)‖`.
    pub fn residual(&self, u: &SpacetimeField) -> Result<f64> {
        let next = self.step(u)?;
        self.norm(&next.zip_with(u, |a, b| a - b)?)
    }

    pub fn iterate(&self, opts: &PicardOptions) -> Result<(SpacetimeField, IterationTrace)> {
        if opts.l_max < 2 {
            return Err(Error::Config("l_max must be at least 2".into()));
        }
        let mut u = SpacetimeField::zeros(*self.op.grid());
        let mut trace = IterationTrace {
            weight: self.weight,
            norms: vec![0.0],
            diffs: Vec::new(),
            contraction_ratios: Vec::new(),
            converged: false,
            l_stop: 1,
        };
        for l in 1..opts.l_max {
            let next = self.step(&u)?;
            let norm = if next.is_finite() { self.norm(&next)? } else { f64::INFINITY };
            if !(norm <= opts.divergence_cap) {
                return Err(Error::Divergence { iterate: l + 1, norm });
            }
            let diff = self.norm(&next.zip_with(&u, |a, b| a - b)?)?;
            if let Some(&prev) = trace.diffs.last() {
                trace.contraction_ratios.push(if prev > 0.0 { diff / prev } else { f64::NAN });
            }
            trace.norms.push(norm);
            trace.diffs.push(diff);
            trace.l_stop = l + 1;
            u = next;
            if diff <= opts.abs_tol + opts.rel_tol * norm {
                trace.converged = true;
                break;
            }
        }
        Ok((u, trace))
    }
}

/// Runs the iteration for `ε u_L` on `grid`, whose horizon plays the role of `T`.
pub fn picard_iterate(
    data: &DataPair,
    eps: f64,
    p: f64,
    grid: GridSpec,
    opts: &PicardOptions,
) -> Result<(SpacetimeField, IterationTrace)> {
    PicardSolver::new(data, eps, p, grid)?.iterate(opts)
}

fn check_p(p: f64) -> Result<()> {
    if p > 1.0 && p < 2.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("need 1 < p < 2, got {p}")))
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if eps >= 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("eps must be finite and nonnegative, got {eps}")))
    }
}

/// `(M₀, C)` with `C₃ = max{C₁, C₂}`, `M₀ = 2^p p C₃ k² C₀^p` and
/// `C = (2^{2p} p)^{p/(p−1)} max{C₁k²M₀^{p−1}, (C₂k²C₀^{p−1})^p, (C₂k²M₀^{p−2}C₀)^{p/(p−1)}}`.
pub fn compute_m0_and_c(c0: f64, c1: f64, c2: f64, p: f64, k: f64) -> (f64, f64) {
    let c3 = c1.max(c2);
    let k2 = k * k;
    let m0 = 2f64.powf(p) * p * c3 * k2 * c0.powf(p);
    let q = p / (p - 1.0);
    let lead = (2f64.powf(2.0 * p) * p).powf(q);
    let a = c1 * k2 * m0.powf(p - 1.0);
    let b = (c2 * k2 * c0.powf(p - 1.0)).powf(p);
    let c = (c2 * k2 * m0.powf(p - 2.0) * c0).powf(q);
    (m0, lead * a.max(b).max(c))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    #[serde(rename = "C0")]
    pub c0: f64,
    #[serde(rename = "C0tilde_term")]
    pub c0tilde_term: f64,
    #[serde(rename = "Cprime0")]
    pub cprime0: f64,
    #[serde(rename = "C1_hat")]
    pub c1_hat: f64,
    #[serde(rename = "C2_hat")]
    pub c2_hat: f64,
    #[serde(rename = "C3_hat")]
    pub c3_hat: f64,
    #[serde(rename = "M0")]
    pub m0: f64,
    #[serde(rename = "C_big")]
    pub c_big: f64,
}

impl Constants {
    /// Fills in the derived constants. `C′₀ = C̃₀|∫g| + C₀/k`.
    pub fn from_estimates(c0: f64, c0tilde_term: f64, c1_hat: f64, c2_hat: f64, p: f64, k: f64) -> Result<Self> {
        for (name, v) in [("C0", c0), ("C1_hat", c1_hat), ("C2_hat", c2_hat)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Domain(format!("{name} must be positive, got {v}")));
            }
        }
        if !(c0tilde_term >= 0.0 && c0tilde_term.is_finite()) {
            return Err(Error::Domain(format!("C0tilde_term must be nonnegative, got {c0tilde_term}")));
        }
        let (m0, c_big) = compute_m0_and_c(c0, c1_hat, c2_hat, p, k);
        Ok(Self {
            c0,
            c0tilde_term,
            cprime0: c0tilde_term + c0 / k,
            c1_hat,
            c2_hat,
            c3_hat: c1_hat.max(c2_hat),
            m0,
            c_big,
        })
    }
}

/// Where the a priori constants come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderSummary {
    pub kind: String,
    pub horizons: Vec<f64>,
    #[serde(rename = "Q")]
    pub q: Vec<f64>,
    pub ratios: Vec<f64>,
    pub argmax: Vec<(f64, f64)>,
}

impl From<&AprioriReport> for LadderSummary {
    fn from(r: &AprioriReport) -> Self {
        Self {
            kind: r.kind.clone(),
            horizons: r.horizons.clone(),
            q: r.q.clone(),
            ratios: r.ratios(),
            argmax: r.argmax.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AprioriConstants {
    pub p: f64,
    pub k: f64,
    pub c1_hat: f64,
    pub c2_hat: f64,
    pub safety_factor: f64,
    pub sampling: AprioriSampling,
    /// Ladders feeding `C₁` (basic1, basic2) then `C₂` (basic3).
    pub ladders: Vec<LadderSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantOptions {
    /// Decay-grid step, in units of `k`.
    pub decay_step: f64,
    /// Decay-grid horizon, in units of `k`.
    pub decay_horizon: f64,
    /// Ladder horizons, in units of `k`.
    pub ladder: Vec<f64>,
    pub sampling: AprioriSampling,
    pub safety_factor: f64,
}

impl Default for ConstantOptions {
    fn default() -> Self {
        Self {
            decay_step: 0.25,
            decay_horizon: MIN_DECAY_HORIZON,
            ladder: vec![8.0, 16.0, 32.0, 64.0],
            sampling: AprioriSampling::default(),
            safety_factor: 2.0,
        }
    }
}

/// `C₁_hat` and `C₂_hat`: the safety factor times the largest `Q(T)` on the
/// ladder, over basic1/basic2 for `C₁` and basic3 with `ν ∈ {0, p−1, 1}` for `C₂`.
pub fn estimate_apriori_constants(p: f64, k: f64, opts: &ConstantOptions) -> Result<AprioriConstants> {
    check_p(p)?;
    let horizons: Vec<f64> = opts.ladder.iter().map(|h| h * k).collect();
    let first = [AprioriKind::Basic1, AprioriKind::Basic2];
    let second = [0.0, p - 1.0, 1.0].map(|nu| AprioriKind::Basic3 { nu });
    let mut ladders = Vec::new();
    let mut run = |kinds: &[AprioriKind]| -> Result<f64> {
        let mut q: f64 = 0.0;
        for &kind in kinds {
            let report = verify_apriori(kind, p, k, &horizons, &opts.sampling)?;
            q = q.max(report.max_q());
            ladders.push(LadderSummary::from(&report));
        }
        Ok(q)
    };
    let q1 = run(&first)?;
    let q2 = run(&second)?;
    Ok(AprioriConstants {
        p,
        k,
        c1_hat: opts.safety_factor * q1,
        c2_hat: opts.safety_factor * q2,
        safety_factor: opts.safety_factor,
        sampling: opts.sampling.clone(),
        ladders,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub decay_grid: GridSpec,
    /// Largest fitted-bound ratio on the decay grid; 1 when the fit is tight.
    pub decay_worst_ratio: f64,
    pub apriori: AprioriConstants,
}

/// Lifespan lower bound for one data pair and exponent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertifiedBound {
    pub case: MeanCase,
    pub p: f64,
    pub k: f64,
    pub constants: Constants,
    pub eps0: f64,
    /// Closed form of `T_lower(ε)` for readers of the JSON.
    pub t_lower_formula: String,
    pub provenance: Provenance,
}

impl CertifiedBound {
    pub fn new(case: MeanCase, p: f64, k: f64, constants: Constants, provenance: Provenance) -> Result<Self> {
        check_p(p)?;
        let c = &constants;
        let (eps0, formula) = match case {
            MeanCase::MeanZero => {
                let gamma = gamma_exponent(p, 2);
                (
                    (c.c_big * 6f64.powf(0.5 * gamma)).powf(-1.0 / (p * (p - 1.0))),
                    "(k/2)*((C_big*eps^(p(p-1)))^(-2/gamma) - 3), gamma = 2+3p-p^2".to_string(),
                )
            }
            MeanCase::NonzeroMean => {
                let a = 2f64.powf(p) * p * c.c1_hat * k * k;
                (
                    (5f64.powf(p - 3.0) / a).powf(1.0 / (p - 1.0)) / c.cprime0,
                    "(k/2)*((2^p p C1_hat k^2 (Cprime0 eps)^(p-1))^(-1/(3-p)) - 3)".to_string(),
                )
            }
        };
        if !(eps0 > 0.0 && eps0.is_finite()) {
            return Err(Error::Domain(format!("constants give eps0 = {eps0}")));
        }
        Ok(Self { case, p, k, constants, eps0, t_lower_formula: formula, provenance })
    }

    /// Left side of the smallness condition at `(ε, T)`; it holds when `≤ 1`.
    pub fn smallness(&self, eps: f64, t: f64) -> f64 {
        let (p, k, c) = (self.p, self.k, &self.constants);
        match self.case {
            MeanCase::MeanZero => c.c_big * eps.powf(p * (p - 1.0)) * d2(t, k, p),
            MeanCase::NonzeroMean => {
                2f64.powf(p) * p * c.c1_hat * k * k * (c.cprime0 * eps).powf(p - 1.0) * d1(t, k, p)
            }
        }
    }

    /// The inverted smallness condition, without the `ε ≤ ε₀` check.
    /// Infinite at `ε = 0`.
    pub fn t_lower_unchecked(&self, eps: f64) -> f64 {
        let (p, k, c) = (self.p, self.k, &self.constants);
        let x = match self.case {
            MeanCase::MeanZero => (c.c_big * eps.powf(p * (p - 1.0))).powf(-2.0 / gamma_exponent(p, 2)),
            MeanCase::NonzeroMean => {
                (2f64.powf(p) * p * c.c1_hat * k * k * (c.cprime0 * eps).powf(p - 1.0)).powf(-1.0 / (3.0 - p))
            }
        };
        0.5 * k * (x - 3.0)
    }

    pub fn t_lower(&self, eps: f64) -> Result<f64> {
        check_eps(eps)?;
        if eps > self.eps0 {
            return Err(Error::OutOfCertificate { eps, eps0: self.eps0 });
        }
        Ok(self.t_lower_unchecked(eps))
    }

    /// Bound on every iterate: `2M₀ε^p` in `‖·‖₃` for mean-zero `g`,
    /// otherwise the induction bound `C′₀ε` in `‖·‖₁`.
    pub fn norm_bound(&self, eps: f64) -> f64 {
        match self.case {
            MeanCase::MeanZero => 2.0 * self.constants.m0 * eps.powf(self.p),
            MeanCase::NonzeroMean => self.constants.cprime0 * eps,
        }
    }

    pub fn weight(&self) -> WeightId {
        iteration_weight(self.case)
    }
}

/// Estimates every constant for `data` and returns the certified bound.
pub fn certify_lifespan(data: &DataPair, p: f64, opts: &ConstantOptions) -> Result<CertifiedBound> {
    let apriori = estimate_apriori_constants(p, data.k(), opts)?;
    certify_with_apriori(data, p, apriori, opts)
}

/// As [`certify_lifespan`], reusing a priori constants for the same `p` and `k`.
pub fn certify_with_apriori(
    data: &DataPair,
    p: f64,
    apriori: AprioriConstants,
    opts: &ConstantOptions,
) -> Result<CertifiedBound> {
    let k = data.k();
    if apriori.p != p || apriori.k != k {
        return Err(Error::Config(format!(
            "a priori constants were estimated for (p, k) = ({}, {}), not ({p}, {k})",
            apriori.p, apriori.k
        )));
    }
    let grid = GridSpec::uniform(opts.decay_step * k, opts.decay_horizon * k, k)?;
    let decay = estimate_decay_constants(data, &grid)?;
    let constants = Constants::from_estimates(decay.c0_hat, decay.c0tilde_term, apriori.c1_hat, apriori.c2_hat, p, k)?;
    let worst = decay.residual_report.iter().map(|r| r.ratio).fold(0.0, f64::max);
    let provenance = Provenance { decay_grid: grid, decay_worst_ratio: worst, apriori };
    CertifiedBound::new(data.case(), p, k, constants, provenance)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub eps: f64,
    pub t_lower: f64,
    /// Grid the iteration ran on; `None` for `ε = 0`.
    pub grid: Option<GridSpec>,
    pub trace: IterationTrace,
    pub norm_bound: f64,
    pub residual: f64,
}

/// Runs the iteration up to the largest whole step below `T_lower(ε)` and
/// checks convergence and the uniform norm bound.
pub fn validate_certificate(
    data: &DataPair,
    bound: &CertifiedBound,
    eps: f64,
    step: f64,
    opts: &PicardOptions,
) -> Result<ValidationReport> {
    let t_lower = bound.t_lower(eps)?;
    if data.case() != bound.case || data.k() != bound.k {
        return Err(Error::Config("certificate was computed for different data".into()));
    }
    if eps == 0.0 {
        let trace = IterationTrace {
            weight: bound.weight(),
            norms: vec![0.0, 0.0],
            diffs: vec![0.0],
            contraction_ratios: Vec::new(),
            converged: true,
            l_stop: 2,
        };
        return Ok(ValidationReport { eps, t_lower, grid: None, trace, norm_bound: 0.0, residual: 0.0 });
    }
    let t = (t_lower / step + 1e-9).floor() * step;
    let grid = GridSpec::uniform(step, t, bound.k)?;
    let solver = PicardSolver::new(data, eps, bound.p, grid)?;
    let (u, trace) = match solver.iterate(opts) {
        Ok(out) => out,
        Err(Error::Divergence { iterate, norm }) => {
            return Err(Error::CertificateViolated(format!(
                "iterate {iterate} diverged (norm {norm:e}) before T_lower = {t_lower}"
            )))
        }
        Err(e) => return Err(e),
    };
    let norm_bound = bound.norm_bound(eps);
    if !trace.converged {
        return Err(Error::CertificateViolated(format!("no convergence within {} iterates", trace.l_stop)));
    }
    if trace.max_norm() > norm_bound {
        return Err(Error::CertificateViolated(format!(
            "iterate norm {:e} exceeds the bound {norm_bound:e}",
            trace.max_norm()
        )));
    }
    let residual = solver.residual(&u)?;
    Ok(ValidationReport { eps, t_lower, grid: Some(grid), trace, norm_bound, residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::DataFamily;

    fn provenance(p: f64, k: f64) -> Provenance {
        Provenance {
            decay_grid: GridSpec::uniform(1.0, 100.0, k).unwrap(),
            decay_worst_ratio: 1.0,
            apriori: AprioriConstants {
                p,
                k,
                c1_hat: 1.0,
                c2_hat: 1.0,
                safety_factor: 2.0,
                sampling: AprioriSampling::default(),
                ladders: Vec::new(),
            },
        }
    }

    fn unit_bound(case: MeanCase, p: f64) -> CertifiedBound {
        let c = Constants::from_estimates(1.0, 0.5, 1.0, 1.0, p, 1.0).unwrap();
        CertifiedBound::new(case, p, 1.0, c, provenance(p, 1.0)).unwrap()
    }

    #[test]
    fn m0_and_c_for_unit_constants() {
        let (m0, c) = compute_m0_and_c(1.0, 1.0, 1.0, 1.5, 1.0);
        assert!((m0 - 2f64.powf(1.5) * 1.5).abs() < 1e-12);
        assert!((m0 - 4.2426).abs() < 1e-4);
        assert!((c - 1728.0 * m0.sqrt()).abs() < 1e-9 * c);
        assert!((c - 3559.3).abs() < 0.1, "{c}");
    }

    #[test]
    fn c_is_monotone_and_m0_scales_with_k_squared() {
        let base = compute_m0_and_c(2.0, 0.7, 0.4, 1.4, 1.0);
        for (c0, c1, c2) in [(2.5, 0.7, 0.4), (2.0, 0.9, 0.4), (2.0, 0.7, 0.6)] {
            assert!(compute_m0_and_c(c0, c1, c2, 1.4, 1.0).1 >= base.1);
        }
        let doubled = compute_m0_and_c(2.0, 0.7, 0.4, 1.4, 2.0);
        assert!((doubled.0 / base.0 - 4.0).abs() < 1e-12);
    }

    #[test]
    fn t_lower_slopes_match_the_exponents() {
        let p = 1.5;
        for (case, slope) in [(MeanCase::MeanZero, -6.0 / 17.0), (MeanCase::NonzeroMean, -1.0 / 3.0)] {
            let b = unit_bound(case, p);
            let (e1, e2) = (1e-40, 1e-41);
            let (t1, t2) = (b.t_lower_unchecked(e1) + 1.5, b.t_lower_unchecked(e2) + 1.5);
            let measured = (t2.ln() - t1.ln()) / (e2.ln() - e1.ln());
            assert!((measured - slope).abs() < 1e-9, "{case:?}: {measured}");
        }
    }

    #[test]
    fn t_lower_at_eps0() {
        let zero = unit_bound(MeanCase::MeanZero, 1.5);
        assert!((zero.t_lower(zero.eps0).unwrap() - 1.5).abs() < 1e-9);
        assert!((zero.smallness(zero.eps0, 1.5) - 1.0).abs() < 1e-9);
        let other = unit_bound(MeanCase::NonzeroMean, 1.5);
        assert!((other.t_lower(other.eps0).unwrap() - 1.0).abs() < 1e-9);
        assert!(matches!(zero.t_lower(2.0 * zero.eps0), Err(Error::OutOfCertificate { .. })));
        assert_eq!(zero.t_lower(0.0).unwrap(), f64::INFINITY);
    }

    #[test]
    fn t_lower_inverts_the_smallness_condition() {
        let b = unit_bound(MeanCase::MeanZero, 1.3);
        for eps in [b.eps0, 0.1 * b.eps0, 1e-6 * b.eps0] {
            let t = b.t_lower(eps).unwrap();
            assert!((b.smallness(eps, t) - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_data_converges_at_the_second_iterate() {
        let data = DataFamily::BumpPositiveG.data(1.0).unwrap();
        let grid = GridSpec::uniform(0.25, 2.0, 1.0).unwrap();
        let (u, trace) = picard_iterate(&data, 0.0, 1.5, grid, &PicardOptions::default()).unwrap();
        assert!(trace.converged);
        assert_eq!(trace.l_stop, 2);
        assert_eq!(u.max_abs(), 0.0);
    }

    #[test]
    fn small_data_contracts() {
        let data = DataFamily::BumpMeanZeroG.data(1.0).unwrap();
        let grid = GridSpec::uniform(0.2, 2.0, 1.0).unwrap();
        let opts = PicardOptions { abs_tol: 0.0, rel_tol: 1e-12, ..Default::default() };
        let solver = PicardSolver::new(&data, 0.05, 1.5, grid).unwrap();
        let (u, trace) = solver.iterate(&opts).unwrap();
        assert!(trace.converged, "{trace:?}");
        assert!(trace.max_ratio().unwrap() < 0.5, "{trace:?}");
        let norm = solver.norm(&u).unwrap();
        assert!(solver.residual(&u).unwrap() <= 1e-10 * norm);
    }

    #[test]
    fn large_data_reports_divergence() {
        let data = DataFamily::BumpPositiveG.data(1.0).unwrap();
        let grid = GridSpec::uniform(0.25, 8.0, 1.0).unwrap();
        let opts = PicardOptions { divergence_cap: 1e3, ..Default::default() };
        match picard_iterate(&data, 20.0, 1.5, grid, &opts) {
            Err(Error::Divergence { iterate, norm }) => assert!(iterate >= 2 && norm > 1e3),
            other => panic!("expected divergence, got {other:?}"),
        }
    }
}
