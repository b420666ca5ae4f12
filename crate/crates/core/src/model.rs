//! Network parameterization: tiers, noise, the two-block bandwidth split,
//! and the JSON scenario file format.
//!
//! Everything inside the crate works in meters, mW, Hz and bit/s. dBm and
//! BS/km² only appear at the file boundary.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Total bandwidth of the reference deployment: 49 × 180 kHz.
pub const REFERENCE_BANDWIDTH_HZ: f64 = 8_820_000.0;

/// Receiver noise of the reference deployment.
pub const REFERENCE_NOISE_DBM: f64 = -104.0;

const M2_PER_KM2: f64 = 1.0e6;

pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

pub fn mw_to_dbm(mw: f64) -> f64 {
    10.0 * mw.log10()
}

/// One tier of base stations.
///
/// The file-level values (BS/km², dBm) are kept next to the linear ones so a
/// scenario written back to disk reloads to bit-identical linear values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TierParams {
    density_per_km2: f64,
    power_dbm: f64,
    density: f64,
    tx_power: f64,
    path_loss_exp: f64,
}

impl TierParams {
    pub fn new(density_per_km2: f64, power_dbm: f64, path_loss_exp: f64) -> Result<Self> {
        let tier = Self {
            density_per_km2,
            power_dbm,
            density: density_per_km2 / M2_PER_KM2,
            tx_power: dbm_to_mw(power_dbm),
            path_loss_exp,
        };
        tier.validate()?;
        Ok(tier)
    }

    /// Builds a tier directly from linear units (BS/m², mW).
    pub fn from_linear(density_per_m2: f64, tx_power_mw: f64, path_loss_exp: f64) -> Result<Self> {
        let tier = Self {
            density_per_km2: density_per_m2 * M2_PER_KM2,
            power_dbm: mw_to_dbm(tx_power_mw),
            density: density_per_m2,
            tx_power: tx_power_mw,
            path_loss_exp,
        };
        tier.validate()?;
        Ok(tier)
    }

    fn validate(&self) -> Result<()> {
        if !(self.density.is_finite() && self.density > 0.0) {
            return Err(Error::Validation(format!(
                "tier density must be positive, got {} BS/km²",
                self.density_per_km2
            )));
        }
        if !(self.tx_power.is_finite() && self.tx_power > 0.0) {
            return Err(Error::Validation(format!(
                "tier transmit power must be positive and finite, got {} dBm",
                self.power_dbm
            )));
        }
        if !(self.path_loss_exp.is_finite() && self.path_loss_exp > 2.0) {
            return Err(Error::Validation(format!(
                "path-loss exponent must exceed 2, got {}",
                self.path_loss_exp
            )));
        }
        Ok(())
    }

    /// BS density per m².
    pub fn density(&self) -> f64 {
        self.density
    }

    /// Transmit power in mW.
    pub fn tx_power(&self) -> f64 {
        self.tx_power
    }

    pub fn path_loss_exp(&self) -> f64 {
        self.path_loss_exp
    }

    pub fn density_per_km2(&self) -> f64 {
        self.density_per_km2
    }

    pub fn power_dbm(&self) -> f64 {
        self.power_dbm
    }

    /// Returns a copy with the density multiplied by `factor`.
    pub fn with_density_scaled(&self, factor: f64) -> Result<Self> {
        Self::new(
            self.density_per_km2 * factor,
            self.power_dbm,
            self.path_loss_exp,
        )
    }

    /// Returns a copy with a different path-loss exponent.
    pub fn with_path_loss_exp(&self, path_loss_exp: f64) -> Result<Self> {
        Self::new(self.density_per_km2, self.power_dbm, path_loss_exp)
    }
}

/// K tiers plus receiver noise.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    tiers: Vec<TierParams>,
    noise_dbm: Option<f64>,
    noise_power: f64,
}

impl Scenario {
    /// `noise_dbm = None` means a noiseless (interference-limited) receiver.
    pub fn new(tiers: Vec<TierParams>, noise_dbm: Option<f64>) -> Result<Self> {
        if tiers.is_empty() {
            return Err(Error::Validation(
                "a scenario needs at least one tier".into(),
            ));
        }
        let noise_power = match noise_dbm {
            Some(dbm) => {
                let mw = dbm_to_mw(dbm);
                if !mw.is_finite() {
                    return Err(Error::Validation(format!(
                        "noise power {dbm} dBm is not finite"
                    )));
                }
                mw
            }
            None => 0.0,
        };
        Ok(Self {
            tiers,
            noise_dbm,
            noise_power,
        })
    }

    /// Three tiers (macro, pico, femto) at 4/16/40 BS/km², 46/30/24 dBm and
    /// α = 3.76/3.67/3.5, with −104 dBm noise.
    pub fn reference_three_tier() -> Self {
        let tiers = vec![
            TierParams::new(4.0, 46.0, 3.76).expect("valid tier"),
            TierParams::new(16.0, 30.0, 3.67).expect("valid tier"),
            TierParams::new(40.0, 24.0, 3.5).expect("valid tier"),
        ];
        Self::new(tiers, Some(REFERENCE_NOISE_DBM)).expect("valid scenario")
    }

    pub fn tiers(&self) -> &[TierParams] {
        &self.tiers
    }

    pub fn tier(&self, index: usize) -> Result<&TierParams> {
        self.tiers.get(index).ok_or(Error::TierIndex {
            index,
            tiers: self.tiers.len(),
        })
    }

    pub fn num_tiers(&self) -> usize {
        self.tiers.len()
    }

    /// σ² in mW; zero for a noiseless scenario.
    pub fn noise_power(&self) -> f64 {
        self.noise_power
    }

    pub fn noise_dbm(&self) -> Option<f64> {
        self.noise_dbm
    }

    pub fn is_noiseless(&self) -> bool {
        self.noise_power == 0.0
    }

    /// Common path-loss exponent, if every tier shares one.
    pub fn common_path_loss_exp(&self) -> Option<f64> {
        let first = self.tiers[0].path_loss_exp;
        self.tiers
            .iter()
            .all(|t| t.path_loss_exp == first)
            .then_some(first)
    }

    /// P_k / P_l.
    pub fn relative_power(&self, k: usize, l: usize) -> f64 {
        self.tiers[k].tx_power / self.tiers[l].tx_power
    }

    /// α_k / α_l.
    pub fn relative_path_loss(&self, k: usize, l: usize) -> f64 {
        self.tiers[k].path_loss_exp / self.tiers[l].path_loss_exp
    }

    pub fn with_noise_dbm(&self, noise_dbm: Option<f64>) -> Result<Self> {
        Self::new(self.tiers.clone(), noise_dbm)
    }

    pub fn with_tiers(&self, tiers: Vec<TierParams>) -> Result<Self> {
        Self::new(tiers, self.noise_dbm)
    }
}

/// Bandwidth of the two fading blocks, in Hz.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResourceSplit {
    n1: f64,
    n2: f64,
}

impl ResourceSplit {
    pub fn new(n1: f64, n2: f64) -> Result<Self> {
        if !(n1.is_finite() && n2.is_finite() && n1 >= 0.0 && n2 >= 0.0) {
            return Err(Error::Validation(format!(
                "block bandwidths must be finite and non-negative, got ({n1}, {n2})"
            )));
        }
        if n1 + n2 <= 0.0 {
            return Err(Error::Validation("total bandwidth must be positive".into()));
        }
        Ok(Self { n1, n2 })
    }

    /// Splits `total_hz` so that block 1 holds the fraction `eta`.
    pub fn from_eta(total_hz: f64, eta: f64) -> Result<Self> {
        if !(total_hz.is_finite() && total_hz > 0.0) {
            return Err(Error::Domain(format!(
                "total bandwidth must be positive, got {total_hz}"
            )));
        }
        if !(0.0..=1.0).contains(&eta) {
            return Err(Error::Domain(format!("eta must lie in [0, 1], got {eta}")));
        }
        let n1 = eta * total_hz;
        Self::new(n1, total_hz - n1)
    }

    /// Bandwidth of block 1 in Hz.
    pub fn n1(&self) -> f64 {
        self.n1
    }

    /// Bandwidth of block 2 in Hz.
    pub fn n2(&self) -> f64 {
        self.n2
    }

    pub fn total(&self) -> f64 {
        self.n1 + self.n2
    }

    pub fn eta(&self) -> f64 {
        self.n1 / self.total()
    }

    /// One block is empty, so all resources fade together.
    pub fn is_coherent(&self) -> bool {
        self.n1 == 0.0 || self.n2 == 0.0
    }

    pub fn swapped(&self) -> Self {
        Self {
            n1: self.n2,
            n2: self.n1,
        }
    }
}

/// Free-function form of [`ResourceSplit::from_eta`].
pub fn split_from_eta(total_hz: f64, eta: f64) -> Result<ResourceSplit> {
    ResourceSplit::from_eta(total_hz, eta)
}

/// Coverage probabilities of one or more methods along a rate grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageCurve {
    pub tau_grid: Vec<f64>,
    pub columns: Vec<CurveColumn>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveColumn {
    pub label: String,
    pub values: Vec<f64>,
}

impl CoverageCurve {
    pub fn column(&self, label: &str) -> Option<&[f64]> {
        self.columns
            .iter()
            .find(|c| c.label == label)
            .map(|c| c.values.as_slice())
    }
}

/// `"noise_dbm"` is either a number or the literal string `"none"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NoiseSpec {
    Dbm(f64),
    Off(NoNoise),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoNoise {
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TierConfig {
    pub density_per_km2: f64,
    pub power_dbm: f64,
    pub alpha: f64,
}

/// On-disk scenario description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub tiers: Vec<TierConfig>,
    pub noise_dbm: NoiseSpec,
    pub bandwidth_hz: f64,
    pub eta: f64,
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario config serializes")
    }

    /// Validates the file contents and converts them to internal units.
    pub fn resolve(&self) -> Result<(Scenario, ResourceSplit)> {
        let tiers = self
            .tiers
            .iter()
            .enumerate()
            .map(|(i, t)| {
                TierParams::new(t.density_per_km2, t.power_dbm, t.alpha).map_err(|e| match e {
                    Error::Validation(msg) => Error::Validation(format!("tier {}: {msg}", i + 1)),
                    other => other,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let noise = match self.noise_dbm {
            NoiseSpec::Dbm(dbm) => Some(dbm),
            NoiseSpec::Off(NoNoise::None) => None,
        };
        let scenario = Scenario::new(tiers, noise)?;
        if !(self.bandwidth_hz.is_finite() && self.bandwidth_hz > 0.0) {
            return Err(Error::Validation(format!(
                "bandwidth_hz must be positive, got {}",
                self.bandwidth_hz
            )));
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(Error::Validation(format!(
                "eta must lie in [0, 1], got {}",
                self.eta
            )));
        }
        let split = ResourceSplit::from_eta(self.bandwidth_hz, self.eta)?;
        Ok((scenario, split))
    }

    /// Inverse of [`ScenarioConfig::resolve`].
    pub fn from_model(scenario: &Scenario, split: &ResourceSplit) -> Self {
        Self {
            tiers: scenario
                .tiers()
                .iter()
                .map(|t| TierConfig {
                    density_per_km2: t.density_per_km2(),
                    power_dbm: t.power_dbm(),
                    alpha: t.path_loss_exp(),
                })
                .collect(),
            noise_dbm: match scenario.noise_dbm() {
                Some(dbm) => NoiseSpec::Dbm(dbm),
                None => NoiseSpec::Off(NoNoise::None),
            },
            bandwidth_hz: split.total(),
            eta: split.eta(),
        }
    }
}

/// Reads and validates a scenario file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<(Scenario, ResourceSplit)> {
    let text = std::fs::read_to_string(path)?;
    ScenarioConfig::from_json(&text)?.resolve()
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} tier(s)", self.tiers.len())?;
        for (i, t) in self.tiers.iter().enumerate() {
            write!(
                f,
                "; tier {}: {} BS/km², {} dBm, α={}",
                i + 1,
                t.density_per_km2,
                t.power_dbm,
                t.path_loss_exp
            )?;
        }
        match self.noise_dbm {
            Some(dbm) => write!(f, "; noise {dbm} dBm"),
            None => write!(f, "; noiseless"),
        }
    }
}
