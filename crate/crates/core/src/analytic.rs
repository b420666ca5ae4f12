//! Tier association, rate coverage probability and the rate metrics built
//! on top of it.
//!
//! Tier indices are zero-based throughout.
//!
//! Conditioned on a tier-`l` server at distance `y`, tier `k` interferers
//! lie outside the radius where their received power would beat the
//! server. Its area is `π P̂_k^{2/α_k} y^{2α_l/α_k}`, which the code calls
//! the exclusion term of tier `k`. The probability generating functional of
//! the interferers then contributes `exp(−Σ_k λ_k·area_k·F_k)`.
//!
//! For two fading blocks the coverage event `R₁ + R₂ ≥ τ` is integrated over
//! the block-2 rate `z`. On `z ≥ τ` the block-1 threshold vanishes and the
//! integral collapses exactly to the single-block probability
//! `P(R₂ ≥ τ)`, so only `z ∈ [0, τ]` is integrated numerically.

use std::cell::RefCell;
use std::cmp::Ordering;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{CoverageCurve, CurveColumn, ResourceSplit, Scenario};
use crate::quadrature::{try_find_root_decreasing, Quadrature};
use crate::specfun::{self, beta_of, gamma_of, gamma_prime};

/// Relative bracket width at which rate inversion stops, in units of the
/// total bandwidth.
pub const RATE_TOLERANCE: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CoverageMethod {
    /// Two blocks with interference correlated through shared BS locations.
    Exact,
    /// Two blocks whose interference fields are taken as independent.
    IndependentInterference,
    /// A single fading block spanning the whole bandwidth.
    Coherent,
    /// Single-integral form valid without noise and with one common α.
    NoNoiseEqualAlpha,
}

impl CoverageMethod {
    pub fn label(&self) -> &'static str {
        match self {
            CoverageMethod::Exact => "exact",
            CoverageMethod::IndependentInterference => "indep",
            CoverageMethod::Coherent => "coherent",
            CoverageMethod::NoNoiseEqualAlpha => "nonoise",
        }
    }
}

impl fmt::Display for CoverageMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for CoverageMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "exact" => Ok(CoverageMethod::Exact),
            "indep" => Ok(CoverageMethod::IndependentInterference),
            "coherent" => Ok(CoverageMethod::Coherent),
            "nonoise" => Ok(CoverageMethod::NoNoiseEqualAlpha),
            other => Err(Error::Validation(format!(
                "unknown coverage method {other:?} (expected exact, indep, coherent or nonoise)"
            ))),
        }
    }
}

/// Accuracy target for coverage probabilities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverageOptions {
    /// Absolute tolerance on P_c.
    pub tol: f64,
}

impl Default for CoverageOptions {
    fn default() -> Self {
        Self { tol: 1e-6 }
    }
}

impl CoverageOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol }
    }

    // Outer and inner integrals share the budget 10:1.
    fn outer(&self) -> Quadrature {
        Quadrature::with_abs_tol(self.tol * 10.0 / 11.0)
    }

    fn inner(&self, spread: f64) -> Quadrature {
        Quadrature::with_abs_tol(self.tol / 11.0 / spread).rel_tol(1e-10)
    }
}

/// Exclusion terms `(π λ_k P̂_k^{2/α_k}, 2α_l/α_k)` seen from a tier-`l` server.
#[derive(Debug, Clone)]
struct ServingTier {
    density: f64,
    alpha: f64,
    inv_power: f64,
    coef: Vec<f64>,
    expo: Vec<f64>,
}

impl ServingTier {
    fn new(scenario: &Scenario, l: usize) -> Self {
        let serving = &scenario.tiers()[l];
        let (coef, expo) = scenario
            .tiers()
            .iter()
            .enumerate()
            .map(|(k, t)| {
                let rel_power = scenario.relative_power(k, l);
                (
                    PI * t.density() * rel_power.powf(2.0 / t.path_loss_exp()),
                    2.0 / scenario.relative_path_loss(k, l),
                )
            })
            .unzip();
        Self {
            density: serving.density(),
            alpha: serving.path_loss_exp(),
            inv_power: 1.0 / serving.tx_power(),
            coef,
            expo,
        }
    }

    /// `2πλ_l ∫₀^∞ y·exp(−c0·y^{α_l} − Σ_k coef_k·w_k·y^{e_k})·g(y) dy` where
    /// `g(y) = c1·y^{α_l} + Σ_k coef_k·d_k·y^{e_k}` when a slope is given and
    /// `g = 1` otherwise.
    fn integral(
        &self,
        c0: f64,
        weights: &[f64],
        slope: Option<(f64, &[f64])>,
        quad: &Quadrature,
    ) -> Result<f64> {
        let mut scale = f64::INFINITY;
        for ((c, w), e) in self.coef.iter().zip(weights).zip(&self.expo) {
            scale = scale.min((c * w).powf(-1.0 / e));
        }
        if c0 > 0.0 {
            scale = scale.min(c0.powf(-1.0 / self.alpha));
        }
        let integrand = |y: f64| {
            if y <= 0.0 {
                return 0.0;
            }
            let ln_y = y.ln();
            let y_alpha = (self.alpha * ln_y).exp();
            let mut exponent = c0 * y_alpha;
            let mut g = match slope {
                Some((c1, _)) => c1 * y_alpha,
                None => 1.0,
            };
            for k in 0..self.coef.len() {
                let area = self.coef[k] * (self.expo[k] * ln_y).exp();
                exponent += area * weights[k];
                if let Some((_, d)) = slope {
                    g += area * d[k];
                }
            }
            if exponent > 745.0 {
                return 0.0;
            }
            y * (-exponent).exp() * g
        };
        let r = quad.integrate_semi_infinite(integrand, 0.0, scale, &[])?;
        Ok(2.0 * PI * self.density * r.value)
    }
}

fn serving_tiers(scenario: &Scenario) -> Vec<ServingTier> {
    (0..scenario.num_tiers())
        .map(|l| ServingTier::new(scenario, l))
        .collect()
}

/// Probability that the typical user attaches to tier `l`.
pub fn association_probability(scenario: &Scenario, l: usize) -> Result<f64> {
    scenario.tier(l)?;
    let serving = ServingTier::new(scenario, l);
    let weights = vec![1.0; scenario.num_tiers()];
    let quad = Quadrature::with_abs_tol(0.0).rel_tol(1e-13);
    serving
        .integral(0.0, &weights, None, &quad)
        .map_err(|e| e.named(format!("association integral, tier {l}")))
}

fn ones_plus(f: &[f64]) -> Vec<f64> {
    f.iter().map(|v| 1.0 + v).collect()
}

/// Density of the distance to the serving BS given that it belongs to tier `l`.
pub fn distance_pdf(scenario: &Scenario, l: usize, y: f64) -> Result<f64> {
    if !(y.is_finite() && y >= 0.0) {
        return Err(Error::Domain(format!(
            "distance must be non-negative, got {y}"
        )));
    }
    let a_l = association_probability(scenario, l)?;
    let serving = ServingTier::new(scenario, l);
    let exponent: f64 = serving
        .coef
        .iter()
        .zip(&serving.expo)
        .map(|(c, e)| c * y.powf(*e))
        .sum();
    Ok(2.0 * PI * serving.density * y * (-exponent).exp() / a_l)
}

/// Single-block coverage `P(SINR ≥ θ)`, summed over serving tiers.
fn single_block_coverage(
    scenario: &Scenario,
    tiers: &[ServingTier],
    theta: f64,
    quad: &Quadrature,
) -> Result<f64> {
    let psi: Vec<f64> = scenario
        .tiers()
        .iter()
        .map(|t| specfun::psi(theta, t.path_loss_exp()))
        .collect::<Result<_>>()?;
    let weights = ones_plus(&psi);
    let noise = scenario.noise_power();
    let mut total = 0.0;
    for (l, serving) in tiers.iter().enumerate() {
        total += serving
            .integral(theta * noise * serving.inv_power, &weights, None, quad)
            .map_err(|e| e.named(format!("single-block distance integral, tier {l}")))?;
    }
    Ok(total)
}

/// Distinct path-loss exponents and, per tier, the index into that list.
fn distinct_exponents(scenario: &Scenario) -> (Vec<f64>, Vec<usize>) {
    let mut distinct: Vec<f64> = Vec::new();
    let index = scenario
        .tiers()
        .iter()
        .map(|t| {
            let a = t.path_loss_exp();
            match distinct.iter().position(|&d| d == a) {
                Some(i) => i,
                None => {
                    distinct.push(a);
                    distinct.len() - 1
                }
            }
        })
        .collect();
    (distinct, index)
}

/// Runs a quadrature whose integrand is fallible; the first inner error wins.
fn integrate_fallible<F>(quad: &Quadrature, lo: f64, hi: f64, breaks: &[f64], f: F) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let failure: RefCell<Option<Error>> = RefCell::new(None);
    let outcome = quad.integrate(
        |x| {
            if failure.borrow().is_some() {
                return 0.0;
            }
            match f(x) {
                Ok(v) => v,
                Err(e) => {
                    *failure.borrow_mut() = Some(e);
                    0.0
                }
            }
        },
        lo,
        hi,
        breaks,
    );
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(outcome?.value)
}

fn two_block_coverage(
    scenario: &Scenario,
    split: &ResourceSplit,
    tau: f64,
    correlated: bool,
    opts: &CoverageOptions,
) -> Result<f64> {
    let tiers = serving_tiers(scenario);
    let (n1, n2) = (split.n1(), split.n2());
    let k = scenario.num_tiers() as f64;
    let noise = scenario.noise_power();
    let (alphas, alpha_of_tier) = distinct_exponents(scenario);

    let tail = single_block_coverage(scenario, &tiers, gamma_of(tau, n2)?, &opts.inner(k))?;

    // Integrate over x = z/τ ∈ [0, 1]; the β = γ crossing sits at z = τ·n2/(n1+n2).
    let inner = opts.inner(k * tau);
    let crossing = n2 / (n1 + n2);
    let body = integrate_fallible(&opts.outer(), 0.0, 1.0, &[crossing], |x| {
        let z = tau * x;
        let beta = beta_of(z, tau, n1)?;
        let gamma = gamma_of(z, n2)?;
        let dgamma = gamma_prime(z, n2)?;
        let per_alpha: Vec<(f64, f64)> = alphas
            .iter()
            .map(|&a| {
                if correlated {
                    specfun::correlated_with_slope(beta, gamma, a)
                } else {
                    specfun::independent_with_slope(beta, gamma, a)
                }
            })
            .collect::<Result<_>>()?;
        let weights: Vec<f64> = alpha_of_tier
            .iter()
            .map(|&i| 1.0 + per_alpha[i].0)
            .collect();
        let slopes: Vec<f64> = alpha_of_tier
            .iter()
            .map(|&i| dgamma * per_alpha[i].1)
            .collect();
        let mut density = 0.0;
        for serving in &tiers {
            let c0 = (beta + gamma) * noise * serving.inv_power;
            let c1 = dgamma * noise * serving.inv_power;
            density += serving.integral(c0, &weights, Some((c1, &slopes)), &inner)?;
        }
        Ok(tau * density)
    })
    .map_err(|e| e.named("two-block rate integral over z"))?;
    Ok(tail + body)
}

fn corollary_coverage(
    split: &ResourceSplit,
    alpha: f64,
    tau: f64,
    opts: &CoverageOptions,
) -> Result<f64> {
    let (n1, n2) = (split.n1(), split.n2());
    let tail = 1.0 / (1.0 + specfun::psi(gamma_of(tau, n2)?, alpha)?);
    let crossing = n2 / (n1 + n2);
    let body = integrate_fallible(&opts.outer(), 0.0, 1.0, &[crossing], |x| {
        let z = tau * x;
        let beta = beta_of(z, tau, n1)?;
        let gamma = gamma_of(z, n2)?;
        let (f, df_db) = specfun::correlated_with_slope(beta, gamma, alpha)?;
        let one_plus = 1.0 + f;
        Ok(tau * gamma_prime(z, n2)? * df_db / (one_plus * one_plus))
    })
    .map_err(|e| e.named("noiseless equal-exponent integral over z"))?;
    Ok(tail + body)
}

/// `P(R ≥ τ)` with default tolerances.
pub fn rate_coverage(
    scenario: &Scenario,
    split: &ResourceSplit,
    tau: f64,
    method: CoverageMethod,
) -> Result<f64> {
    rate_coverage_with(scenario, split, tau, method, &CoverageOptions::default())
}

/// `P(R ≥ τ)` for rate threshold `tau` in bit/s.
///
/// `Exact` and `IndependentInterference` fall back to the single-block
/// formula when one block is empty, where both models coincide.
pub fn rate_coverage_with(
    scenario: &Scenario,
    split: &ResourceSplit,
    tau: f64,
    method: CoverageMethod,
    opts: &CoverageOptions,
) -> Result<f64> {
    if !(tau.is_finite() && tau >= 0.0) {
        return Err(Error::Domain(format!(
            "rate threshold must be non-negative, got {tau}"
        )));
    }
    match method {
        CoverageMethod::Coherent if !split.is_coherent() => {
            return Err(Error::MethodMismatch {
                method: method.label(),
                reason: format!(
                    "split ({}, {}) has two non-empty blocks",
                    split.n1(),
                    split.n2()
                ),
            })
        }
        CoverageMethod::NoNoiseEqualAlpha
            if !scenario.is_noiseless() || scenario.common_path_loss_exp().is_none() =>
        {
            return Err(Error::MethodMismatch {
                method: method.label(),
                reason: "requires zero noise and one path-loss exponent for all tiers".into(),
            });
        }
        _ => {}
    }
    if tau == 0.0 {
        return Ok(1.0);
    }

    let value = if split.is_coherent() {
        let theta = gamma_of(tau, split.total())?;
        let tiers = serving_tiers(scenario);
        single_block_coverage(
            scenario,
            &tiers,
            theta,
            &opts.inner(scenario.num_tiers() as f64),
        )?
    } else {
        match method {
            CoverageMethod::Exact => two_block_coverage(scenario, split, tau, true, opts)?,
            CoverageMethod::IndependentInterference => {
                two_block_coverage(scenario, split, tau, false, opts)?
            }
            CoverageMethod::NoNoiseEqualAlpha => corollary_coverage(
                split,
                scenario.common_path_loss_exp().expect("checked above"),
                tau,
                opts,
            )?,
            CoverageMethod::Coherent => unreachable!("rejected above"),
        }
    };
    if !value.is_finite() {
        return Err(Error::Numerical(format!(
            "{method} coverage at tau={tau} evaluated to {value}"
        )));
    }
    Ok(value.clamp(0.0, 1.0))
}

/// Coverage of several methods along an ascending grid of rate thresholds.
pub fn coverage_curve(
    scenario: &Scenario,
    split: &ResourceSplit,
    tau_grid: &[f64],
    methods: &[CoverageMethod],
    opts: &CoverageOptions,
) -> Result<CoverageCurve> {
    if tau_grid
        .windows(2)
        .any(|w| matches!(w[0].partial_cmp(&w[1]), None | Some(Ordering::Greater)))
    {
        return Err(Error::Domain("rate grid must be ascending".into()));
    }
    let mut columns = Vec::with_capacity(methods.len());
    for &method in methods {
        let mut values = tau_grid
            .par_iter()
            .map(|&tau| rate_coverage_with(scenario, split, tau, method, opts))
            .collect::<Result<Vec<_>>>()?;
        // Neighboring values may differ by quadrature noise; anything larger
        // is a genuine failure.
        let slack = 10.0 * opts.tol;
        for i in 1..values.len() {
            if values[i] > values[i - 1] + slack {
                return Err(Error::Numerical(format!(
                    "{method} coverage increases from {} to {} between tau={} and tau={}",
                    values[i - 1],
                    values[i],
                    tau_grid[i - 1],
                    tau_grid[i]
                )));
            }
            values[i] = values[i].min(values[i - 1]);
        }
        columns.push(CurveColumn {
            label: format!("pc_{}", method.label()),
            values,
        });
    }
    Ok(CoverageCurve {
        tau_grid: tau_grid.to_vec(),
        columns,
    })
}

/// Rate threshold whose coverage equals `pc_target`.
pub fn rate_at_coverage(
    scenario: &Scenario,
    split: &ResourceSplit,
    pc_target: f64,
    method: CoverageMethod,
    opts: &CoverageOptions,
) -> Result<f64> {
    if !(pc_target > 0.0 && pc_target < 1.0) {
        return Err(Error::UnreachableTarget(pc_target));
    }
    let pc = |tau: f64| rate_coverage_with(scenario, split, tau, method, opts);
    let mut lo = 0.0;
    let mut hi = split.total();
    let mut grown = 0;
    while pc(hi)? > pc_target {
        lo = hi;
        hi *= 2.0;
        grown += 1;
        if grown > 40 {
            return Err(Error::UnreachableTarget(pc_target));
        }
    }
    try_find_root_decreasing(
        |tau| Ok(pc(tau)? - pc_target),
        lo,
        hi,
        RATE_TOLERANCE * split.total(),
    )
}

/// Relative rate gain `(τ(η) − τ(0)) / τ(0)` at coverage `pc_target`, where
/// `τ(0)` is the single-block rate over the same total bandwidth.
pub fn gain_vs_coherent(
    scenario: &Scenario,
    total_hz: f64,
    eta: f64,
    pc_target: f64,
    opts: &CoverageOptions,
) -> Result<RateGain> {
    let split = ResourceSplit::from_eta(total_hz, eta)?;
    let coherent = ResourceSplit::from_eta(total_hz, 0.0)?;
    let tau_eta = rate_at_coverage(scenario, &split, pc_target, CoverageMethod::Exact, opts)?;
    let tau_coherent = rate_at_coverage(
        scenario,
        &coherent,
        pc_target,
        CoverageMethod::Coherent,
        opts,
    )?;
    Ok(RateGain {
        tau_eta,
        tau_coherent,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateGain {
    pub tau_eta: f64,
    pub tau_coherent: f64,
}

impl RateGain {
    pub fn gain(&self) -> f64 {
        (self.tau_eta - self.tau_coherent) / self.tau_coherent
    }
}

/// Rates at a common coverage level with and without interference correlation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationDeviation {
    pub tau_exact: f64,
    pub tau_indep: f64,
}

impl CorrelationDeviation {
    /// `(τ_indep − τ_exact) / τ_exact`.
    pub fn deviation(&self) -> f64 {
        (self.tau_indep - self.tau_exact) / self.tau_exact
    }

    pub fn abs_diff(&self) -> f64 {
        self.tau_indep - self.tau_exact
    }
}

pub fn deviation_ignoring_correlation(
    scenario: &Scenario,
    total_hz: f64,
    eta: f64,
    pc_target: f64,
    opts: &CoverageOptions,
) -> Result<CorrelationDeviation> {
    let split = ResourceSplit::from_eta(total_hz, eta)?;
    Ok(CorrelationDeviation {
        tau_exact: rate_at_coverage(scenario, &split, pc_target, CoverageMethod::Exact, opts)?,
        tau_indep: rate_at_coverage(
            scenario,
            &split,
            pc_target,
            CoverageMethod::IndependentInterference,
            opts,
        )?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::TierParams;
    use std::f64::consts::FRAC_PI_4;

    fn single_tier_noiseless(alpha: f64) -> Scenario {
        Scenario::new(vec![TierParams::new(1.0, 0.0, alpha).unwrap()], None).unwrap()
    }

    #[test]
    fn method_labels_round_trip() {
        for m in [
            CoverageMethod::Exact,
            CoverageMethod::IndependentInterference,
            CoverageMethod::Coherent,
            CoverageMethod::NoNoiseEqualAlpha,
        ] {
            assert_eq!(m.label().parse::<CoverageMethod>().unwrap(), m);
        }
        assert!("fast".parse::<CoverageMethod>().is_err());
    }

    #[test]
    fn single_tier_association_and_pdf() {
        let s = single_tier_noiseless(3.5);
        assert!((association_probability(&s, 0).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(distance_pdf(&s, 0, 0.0).unwrap(), 0.0);
        assert!(matches!(
            association_probability(&s, 1),
            Err(Error::TierIndex { .. })
        ));
        assert!(matches!(distance_pdf(&s, 0, -1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn symmetric_two_tiers_split_evenly() {
        let t = TierParams::new(3.0, 20.0, 3.8).unwrap();
        let s = Scenario::new(vec![t, t], Some(-100.0)).unwrap();
        for l in 0..2 {
            assert!((association_probability(&s, l).unwrap() - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn tau_zero_is_certain() {
        let s = Scenario::reference_three_tier();
        let split = ResourceSplit::from_eta(8.82e6, 0.3).unwrap();
        for m in [
            CoverageMethod::Exact,
            CoverageMethod::IndependentInterference,
        ] {
            assert_eq!(rate_coverage(&s, &split, 0.0, m).unwrap(), 1.0);
        }
    }

    #[test]
    fn coherent_single_tier_closed_form() {
        let s = single_tier_noiseless(4.0);
        let split = ResourceSplit::new(0.0, 1e6).unwrap();
        let pc = rate_coverage(&s, &split, 1e6, CoverageMethod::Coherent).unwrap();
        assert!((pc - 1.0 / (1.0 + FRAC_PI_4)).abs() < 1e-6, "{pc}");
    }

    #[test]
    fn method_mismatch() {
        let s = Scenario::reference_three_tier();
        let split = ResourceSplit::from_eta(1e6, 0.5).unwrap();
        assert!(matches!(
            rate_coverage(&s, &split, 1e5, CoverageMethod::Coherent),
            Err(Error::MethodMismatch { .. })
        ));
        assert!(matches!(
            rate_coverage(&s, &split, 1e5, CoverageMethod::NoNoiseEqualAlpha),
            Err(Error::MethodMismatch { .. })
        ));
    }

    #[test]
    fn degenerate_split_models_coincide() {
        let s = Scenario::reference_three_tier();
        let split = ResourceSplit::from_eta(8.82e6, 0.0).unwrap();
        let exact = rate_coverage(&s, &split, 2e6, CoverageMethod::Exact).unwrap();
        let indep =
            rate_coverage(&s, &split, 2e6, CoverageMethod::IndependentInterference).unwrap();
        let coherent = rate_coverage(&s, &split, 2e6, CoverageMethod::Coherent).unwrap();
        assert_eq!(exact, coherent);
        assert_eq!(indep, coherent);
    }

    #[test]
    fn unreachable_targets() {
        let s = single_tier_noiseless(4.0);
        let split = ResourceSplit::new(0.0, 1e6).unwrap();
        let opts = CoverageOptions::default();
        for pc in [0.0, 1.0, 1.2] {
            assert!(matches!(
                rate_at_coverage(&s, &split, pc, CoverageMethod::Coherent, &opts),
                Err(Error::UnreachableTarget(_))
            ));
        }
    }

    #[test]
    fn single_tier_inversion() {
        let s = single_tier_noiseless(4.0);
        let split = ResourceSplit::new(0.0, 1e6).unwrap();
        let opts = CoverageOptions::with_tol(1e-9);
        let tau = rate_at_coverage(
            &s,
            &split,
            1.0 / (1.0 + FRAC_PI_4),
            CoverageMethod::Coherent,
            &opts,
        )
        .unwrap();
        assert!((tau / 1e6 - 1.0).abs() < 1e-5, "{tau}");
    }

    #[test]
    fn curve_rejects_descending_grid() {
        let s = single_tier_noiseless(4.0);
        let split = ResourceSplit::new(0.0, 1e6).unwrap();
        let err = coverage_curve(
            &s,
            &split,
            &[2.0, 1.0],
            &[CoverageMethod::Coherent],
            &CoverageOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
    }
}
