//! Poisson network simulator used as ground truth for the analytic results.
//!
//! Each trial draws its own network inside a disk around the typical user at
//! the origin, attaches the user to the strongest long-term received power,
//! and draws Rayleigh fading independently for the two blocks.
//!
//! Trial `i` always uses `ChaCha8Rng::seed_from_u64(seed)` on stream `i`, so
//! results do not depend on the number of worker threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Poisson};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{ResourceSplit, Scenario};

pub const DEFAULT_REGION_RADIUS_M: f64 = 5000.0;

/// How block-2 interference relates to block-1 interference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CorrelationMode {
    /// Both blocks see the same interferer positions.
    #[default]
    Correlated,
    /// Block 2 sees a fresh interferer field conditioned on the association.
    Independent,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McConfig {
    pub trials: usize,
    pub seed: u64,
    pub region_radius: f64,
    pub mode: CorrelationMode,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            trials: 100_000,
            seed: 1,
            region_radius: DEFAULT_REGION_RADIUS_M,
            mode: CorrelationMode::Correlated,
        }
    }
}

impl McConfig {
    fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Validation("trials must be at least 1".into()));
        }
        check_radius(self.region_radius)
    }
}

fn check_radius(r: f64) -> Result<()> {
    if r.is_finite() && r > 0.0 {
        Ok(())
    } else {
        Err(Error::Validation(format!(
            "region radius must be positive, got {r}"
        )))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub p_hat: f64,
    pub std_err: f64,
    pub trials: usize,
    pub seed: u64,
}

impl McEstimate {
    fn from_hits(hits: usize, trials: usize, seed: u64) -> Self {
        let p_hat = hits as f64 / trials as f64;
        Self {
            p_hat,
            std_err: (p_hat * (1.0 - p_hat) / trials as f64).sqrt(),
            trials,
            seed,
        }
    }
}

/// BS positions of every tier inside a disk centered at the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkRealization {
    tiers: Vec<Vec<[f64; 2]>>,
    region_radius: f64,
}

impl NetworkRealization {
    pub fn new(tiers: Vec<Vec<[f64; 2]>>, region_radius: f64) -> Result<Self> {
        check_radius(region_radius)?;
        Ok(Self {
            tiers,
            region_radius,
        })
    }

    pub fn tier_positions(&self, k: usize) -> &[[f64; 2]] {
        &self.tiers[k]
    }

    pub fn num_tiers(&self) -> usize {
        self.tiers.len()
    }

    pub fn total_count(&self) -> usize {
        self.tiers.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.total_count() == 0
    }

    pub fn region_radius(&self) -> f64 {
        self.region_radius
    }
}

/// Draws every tier as an independent Poisson process on the disk.
pub fn sample_network<R: Rng + ?Sized>(
    scenario: &Scenario,
    region_radius: f64,
    rng: &mut R,
) -> Result<NetworkRealization> {
    check_radius(region_radius)?;
    let area = std::f64::consts::PI * region_radius * region_radius;
    let mut tiers = Vec::with_capacity(scenario.num_tiers());
    for t in scenario.tiers() {
        let count = poisson_count(t.density() * area, rng)?;
        let points = (0..count)
            .map(|_| {
                let r = region_radius * rng.random::<f64>().sqrt();
                let (s, c) = (std::f64::consts::TAU * rng.random::<f64>()).sin_cos();
                [r * c, r * s]
            })
            .collect();
        tiers.push(points);
    }
    Ok(NetworkRealization {
        tiers,
        region_radius,
    })
}

fn poisson_count<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> Result<usize> {
    let law =
        Poisson::new(mean).map_err(|e| Error::Validation(format!("Poisson mean {mean}: {e}")))?;
    Ok(law.sample(rng) as usize)
}

/// The serving BS of the typical user.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Association {
    pub tier: usize,
    pub position: [f64; 2],
    pub distance: f64,
}

/// `ln(P_k ‖x‖^{−α_k})`, the association metric.
fn log_received(ln_power: f64, alpha: f64, p: [f64; 2]) -> f64 {
    ln_power - 0.5 * alpha * (p[0] * p[0] + p[1] * p[1]).ln()
}

/// Association metric of every BS, flattened in tier order.
fn log_metrics(scenario: &Scenario, network: &NetworkRealization) -> Vec<f64> {
    let mut out = Vec::with_capacity(network.total_count());
    for (k, t) in scenario.tiers().iter().enumerate() {
        let ln_power = t.tx_power().ln();
        out.extend(
            network
                .tier_positions(k)
                .iter()
                .map(|&p| log_received(ln_power, t.path_loss_exp(), p)),
        );
    }
    out
}

/// Flat index of the serving BS together with its association.
fn pick_serving(network: &NetworkRealization, metrics: &[f64]) -> Result<(usize, Association)> {
    let mut best: Option<(usize, usize, [f64; 2])> = None;
    let mut flat = 0;
    for k in 0..network.num_tiers() {
        for &p in network.tier_positions(k) {
            let better = match best {
                None => true,
                Some((bi, bk, bp)) => {
                    let (m, bm) = (metrics[flat], metrics[bi]);
                    m > bm || (m == bm && k == bk && (p[0], p[1]) < (bp[0], bp[1]))
                }
            };
            if better {
                best = Some((flat, k, p));
            }
            flat += 1;
        }
    }
    let (index, tier, position) = best.ok_or(Error::EmptyNetwork)?;
    Ok((
        index,
        Association {
            tier,
            position,
            distance: position[0].hypot(position[1]),
        },
    ))
}

/// Attaches the user to the maximum long-term received power.
///
/// Ties go to the lowest tier index, then to the lexicographically smallest
/// position.
pub fn associate(scenario: &Scenario, network: &NetworkRealization) -> Result<Association> {
    pick_serving(network, &log_metrics(scenario, network)).map(|(_, a)| a)
}

/// Small-scale fading power gain per BS and block.
pub trait Fading: Sync {
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64;
}

/// Exp(1) power gains.
#[derive(Debug, Clone, Copy, Default)]
pub struct Rayleigh;

impl Fading for Rayleigh {
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        Exp1.sample(rng)
    }
}

/// No fading; every gain is 1.
#[derive(Debug, Clone, Copy, Default)]
pub struct UnitGain;

impl Fading for UnitGain {
    fn draw<R: Rng + ?Sized>(&self, _rng: &mut R) -> f64 {
        1.0
    }
}

fn block_sinr<F: Fading, R: Rng + ?Sized>(
    signal: f64,
    interferers: &[f64],
    noise: f64,
    fading: &F,
    rng: &mut R,
) -> f64 {
    let s = fading.draw(rng) * signal;
    let i: f64 = interferers.iter().map(|m| fading.draw(rng) * m).sum();
    s / (i + noise)
}

/// Total rate over both blocks with Rayleigh fading and shared interferers.
pub fn realize_rate<R: Rng + ?Sized>(
    scenario: &Scenario,
    split: &ResourceSplit,
    network: &NetworkRealization,
    rng: &mut R,
) -> Result<f64> {
    realize_rate_with(
        scenario,
        split,
        network,
        CorrelationMode::Correlated,
        &Rayleigh,
        rng,
    )
}

/// Total rate `n1·log2(1+SINR₁) + n2·log2(1+SINR₂)`.
///
/// In independent mode block 2 replaces the interferers by a fresh draw on
/// the same disk, keeping only BSs weaker than the server.
pub fn realize_rate_with<F: Fading, R: Rng + ?Sized>(
    scenario: &Scenario,
    split: &ResourceSplit,
    network: &NetworkRealization,
    mode: CorrelationMode,
    fading: &F,
    rng: &mut R,
) -> Result<f64> {
    let mut metrics = log_metrics(scenario, network);
    let (serving, _) = pick_serving(network, &metrics)?;
    let signal = metrics.swap_remove(serving).exp();
    let noise = scenario.noise_power();
    // Interferer order is irrelevant to the SINR, so swap_remove is fine.
    let interferers: Vec<f64> = metrics.iter().map(|m| m.exp()).collect();

    let mut rate = 0.0;
    if split.n1() > 0.0 {
        let sinr = block_sinr(signal, &interferers, noise, fading, rng);
        rate += split.n1() * sinr.ln_1p() / std::f64::consts::LN_2;
    }
    if split.n2() > 0.0 {
        let sinr = match mode {
            CorrelationMode::Correlated => block_sinr(signal, &interferers, noise, fading, rng),
            CorrelationMode::Independent => {
                let fresh = sample_network(scenario, network.region_radius(), rng)?;
                let others: Vec<f64> = log_metrics(scenario, &fresh)
                    .into_iter()
                    .map(f64::exp)
                    .filter(|&m| m < signal)
                    .collect();
                block_sinr(signal, &others, noise, fading, rng)
            }
        };
        rate += split.n2() * sinr.ln_1p() / std::f64::consts::LN_2;
    }
    Ok(rate)
}

fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

/// One rate per trial, in trial order. A realization without any BS
/// delivers rate 0.
pub fn sample_rates(
    scenario: &Scenario,
    split: &ResourceSplit,
    cfg: &McConfig,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    (0..cfg.trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_rng(cfg.seed, i);
            let network = sample_network(scenario, cfg.region_radius, &mut rng)?;
            match realize_rate_with(scenario, split, &network, cfg.mode, &Rayleigh, &mut rng) {
                Err(Error::EmptyNetwork) => Ok(0.0),
                other => other,
            }
        })
        .collect()
}

pub fn estimate_rate_coverage(
    scenario: &Scenario,
    split: &ResourceSplit,
    tau: f64,
    cfg: &McConfig,
) -> Result<McEstimate> {
    Ok(estimate_coverage_curve(scenario, split, &[tau], cfg)?[0])
}

/// Coverage estimates along a rate grid, all from the same trials.
pub fn estimate_coverage_curve(
    scenario: &Scenario,
    split: &ResourceSplit,
    tau_grid: &[f64],
    cfg: &McConfig,
) -> Result<Vec<McEstimate>> {
    if let Some(t) = tau_grid.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
        return Err(Error::Domain(format!(
            "rate threshold must be non-negative, got {t}"
        )));
    }
    let rates = sample_rates(scenario, split, cfg)?;
    Ok(coverage_from_rates(&rates, tau_grid, cfg.seed))
}

/// Fraction of `rates` at or above each threshold.
pub fn coverage_from_rates(rates: &[f64], tau_grid: &[f64], seed: u64) -> Vec<McEstimate> {
    tau_grid
        .iter()
        .map(|&tau| {
            let hits = rates.iter().filter(|&&r| r >= tau).count();
            McEstimate::from_hits(hits, rates.len(), seed)
        })
        .collect()
}

/// Coverage on the configured disk and on a disk of twice the radius,
/// evaluated on coupled draws.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncationCheck {
    pub inner: Vec<McEstimate>,
    pub outer: Vec<McEstimate>,
}

impl TruncationCheck {
    /// Largest `|p_outer − p_inner|` over the grid, in units of the inner
    /// standard error. A zero standard error counts as `0.5/√trials`.
    pub fn max_shift_in_std_err(&self) -> f64 {
        self.inner
            .iter()
            .zip(&self.outer)
            .map(|(a, b)| {
                let se = if a.std_err > 0.0 {
                    a.std_err
                } else {
                    0.5 / (a.trials as f64).sqrt()
                };
                (b.p_hat - a.p_hat).abs() / se
            })
            .fold(0.0, f64::max)
    }
}

/// Measures the effect of doubling the simulation radius.
///
/// Each trial samples the network on the doubled disk and draws one gain per
/// BS and block. The rate is then computed twice, once with every BS and once
/// with only the BSs inside the configured radius, which form a Poisson
/// network on that smaller disk. Only correlated mode is supported.
pub fn truncation_check(
    scenario: &Scenario,
    split: &ResourceSplit,
    tau_grid: &[f64],
    cfg: &McConfig,
) -> Result<TruncationCheck> {
    cfg.validate()?;
    if cfg.mode != CorrelationMode::Correlated {
        return Err(Error::Validation(
            "truncation check needs correlated mode".into(),
        ));
    }
    let r2_inner = cfg.region_radius * cfg.region_radius;
    let noise = scenario.noise_power();
    let pairs: Vec<(f64, f64)> = (0..cfg.trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_rng(cfg.seed, i);
            let network = sample_network(scenario, 2.0 * cfg.region_radius, &mut rng)?;
            let powers: Vec<f64> = log_metrics(scenario, &network)
                .into_iter()
                .map(f64::exp)
                .collect();
            let inside: Vec<bool> = (0..network.num_tiers())
                .flat_map(|k| network.tier_positions(k).iter())
                .map(|p| p[0] * p[0] + p[1] * p[1] <= r2_inner)
                .collect();
            let mut gains = [Vec::new(), Vec::new()];
            for (g, n) in gains.iter_mut().zip([split.n1(), split.n2()]) {
                if n > 0.0 {
                    *g = (0..powers.len()).map(|_| Rayleigh.draw(&mut rng)).collect();
                }
            }
            let rate = |keep: &dyn Fn(usize) -> bool| {
                // Ties have probability zero; the first maximum wins.
                let serving = (0..powers.len()).filter(|&j| keep(j)).fold(
                    None,
                    |b: Option<usize>, j| match b {
                        Some(b) if powers[b] >= powers[j] => Some(b),
                        _ => Some(j),
                    },
                );
                let Some(serving) = serving else { return 0.0 };
                let mut total = 0.0;
                for (g, n) in gains.iter().zip([split.n1(), split.n2()]) {
                    if n > 0.0 {
                        let interference: f64 = (0..powers.len())
                            .filter(|&j| j != serving && keep(j))
                            .map(|j| g[j] * powers[j])
                            .sum();
                        let sinr = g[serving] * powers[serving] / (interference + noise);
                        total += n * sinr.ln_1p() / std::f64::consts::LN_2;
                    }
                }
                total
            };
            Ok((rate(&|j| inside[j]), rate(&|_| true)))
        })
        .collect::<Result<_>>()?;
    let (inner, outer): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    Ok(TruncationCheck {
        inner: coverage_from_rates(&inner, tau_grid, cfg.seed),
        outer: coverage_from_rates(&outer, tau_grid, cfg.seed),
    })
}
