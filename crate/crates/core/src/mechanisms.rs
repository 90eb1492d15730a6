//! Noise calibration for the Laplace and Gaussian mechanisms, and sanitized
//! frequency tables.
//!
//! Only the K counts of the non-empty QID cells are perturbed. Cells that are
//! empty in the original data carry no homogeneity risk and are never
//! materialized, so they are not sanitized either.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{substream, DOMAIN_SANITIZE};
use crate::special::{erfc, inv_norm_cdf};
use crate::tabulation::FrequencyTable;

/// A noisy count is read as present when it is at least this large.
pub const PRESENCE_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mechanism {
    Laplace,
    GaussianAdp,
    GaussianPdp,
}

impl Mechanism {
    pub fn as_str(self) -> &'static str {
        match self {
            Mechanism::Laplace => "laplace",
            Mechanism::GaussianAdp => "gaussian_adp",
            Mechanism::GaussianPdp => "gaussian_pdp",
        }
    }

    pub fn is_gaussian(self) -> bool {
        !matches!(self, Mechanism::Laplace)
    }
}

impl fmt::Display for Mechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mechanism {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "laplace" => Ok(Mechanism::Laplace),
            "gaussian_adp" | "adp" => Ok(Mechanism::GaussianAdp),
            "gaussian_pdp" | "pdp" => Ok(Mechanism::GaussianPdp),
            other => Err(Error::InvalidParameter(format!("unknown mechanism `{other}`"))),
        }
    }
}

/// Mechanism plus privacy-loss parameters. Construct through the checked
/// constructors; the fields are read-only afterwards.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacyParams {
    mechanism: Mechanism,
    epsilon: f64,
    delta: Option<f64>,
    sensitivity: f64,
}

impl PrivacyParams {
    pub fn laplace(epsilon: f64) -> Result<Self> {
        Self::new(Mechanism::Laplace, epsilon, None, 1.0)
    }

    pub fn gaussian_adp(epsilon: f64, delta: f64) -> Result<Self> {
        Self::new(Mechanism::GaussianAdp, epsilon, Some(delta), 1.0)
    }

    pub fn gaussian_pdp(epsilon: f64, delta: f64) -> Result<Self> {
        Self::new(Mechanism::GaussianPdp, epsilon, Some(delta), 1.0)
    }

    /// `delta` is ignored for the Laplace mechanism.
    pub fn new(mechanism: Mechanism, epsilon: f64, delta: Option<f64>, sensitivity: f64) -> Result<Self> {
        if !(epsilon > 0.0) || epsilon.is_nan() {
            return Err(Error::InvalidParameter(format!("epsilon must be > 0, got {epsilon}")));
        }
        if !(sensitivity > 0.0) || !sensitivity.is_finite() {
            return Err(Error::InvalidParameter(format!("sensitivity must be > 0, got {sensitivity}")));
        }
        let delta = match mechanism {
            Mechanism::Laplace => None,
            Mechanism::GaussianAdp => {
                if !(epsilon < 1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "gaussian_adp requires epsilon < 1, got {epsilon}"
                    )));
                }
                let d = delta.ok_or_else(|| Error::InvalidParameter("gaussian_adp needs delta".into()))?;
                if !(d > 0.0 && d < 1.0) {
                    return Err(Error::InvalidParameter(format!("gaussian_adp requires delta in (0,1), got {d}")));
                }
                Some(d)
            }
            Mechanism::GaussianPdp => {
                let d = delta.ok_or_else(|| Error::InvalidParameter("gaussian_pdp needs delta".into()))?;
                if !(d > 0.0 && d <= 1.0) {
                    return Err(Error::InvalidParameter(format!("gaussian_pdp requires delta in (0,1], got {d}")));
                }
                Some(d)
            }
        };
        Ok(Self {
            mechanism,
            epsilon,
            delta,
            sensitivity,
        })
    }

    pub fn with_sensitivity(self, sensitivity: f64) -> Result<Self> {
        Self::new(self.mechanism, self.epsilon, self.delta, sensitivity)
    }

    pub fn mechanism(&self) -> Mechanism {
        self.mechanism
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn delta(&self) -> Option<f64> {
        self.delta
    }

    pub fn sensitivity(&self) -> f64 {
        self.sensitivity
    }

    pub fn noise(&self) -> Result<NoiseModel> {
        match self.mechanism {
            Mechanism::Laplace => laplace_scale(self).map(|scale| NoiseModel::Laplace { scale }),
            Mechanism::GaussianAdp => gaussian_sigma_adp(self).map(|sigma| NoiseModel::Gaussian { sigma }),
            Mechanism::GaussianPdp => gaussian_sigma_pdp(self).map(|sigma| NoiseModel::Gaussian { sigma }),
        }
    }
}

/// Laplace scale `b = Δ₁ / ε`.
pub fn laplace_scale(params: &PrivacyParams) -> Result<f64> {
    if params.mechanism != Mechanism::Laplace {
        return Err(Error::InvalidParameter(format!("{} is not laplace", params.mechanism)));
    }
    Ok(params.sensitivity / params.epsilon)
}

/// Gaussian σ for (ε, δ)-approximate DP, taking `c² = 2 ln(1.25/δ)` at equality.
pub fn gaussian_sigma_adp(params: &PrivacyParams) -> Result<f64> {
    if params.mechanism != Mechanism::GaussianAdp {
        return Err(Error::InvalidParameter(format!("{} is not gaussian_adp", params.mechanism)));
    }
    let delta = params.delta.expect("validated on construction");
    Ok(params.sensitivity * (2.0 * (1.25 / delta).ln()).sqrt() / params.epsilon)
}

/// Gaussian σ for (ε, δ)-probabilistic DP:
/// `σ = Δ₂ (√(z² + 2ε) − z) / (2ε)` with `z = Φ⁻¹(δ/2)`.
pub fn gaussian_sigma_pdp(params: &PrivacyParams) -> Result<f64> {
    if params.mechanism != Mechanism::GaussianPdp {
        return Err(Error::InvalidParameter(format!("{} is not gaussian_pdp", params.mechanism)));
    }
    let delta = params.delta.expect("validated on construction");
    let eps = params.epsilon;
    let z = inv_norm_cdf(delta / 2.0)?;
    Ok(params.sensitivity * ((z * z + 2.0 * eps).sqrt() - z) / (2.0 * eps))
}

/// Additive noise distribution of a calibrated mechanism.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseModel {
    Laplace { scale: f64 },
    Gaussian { sigma: f64 },
}

impl NoiseModel {
    /// `Pr(E < t)`.
    pub fn cdf(&self, t: f64) -> f64 {
        match *self {
            NoiseModel::Laplace { scale } => {
                if t >= 0.0 {
                    1.0 - 0.5 * (-t / scale).exp()
                } else {
                    0.5 * (t / scale).exp()
                }
            }
            NoiseModel::Gaussian { sigma } => 0.5 * erfc(-t / (sigma * std::f64::consts::SQRT_2)),
        }
    }

    /// `Pr(E ≥ t)`.
    pub fn sf(&self, t: f64) -> f64 {
        match *self {
            NoiseModel::Laplace { scale } => {
                if t >= 0.0 {
                    0.5 * (-t / scale).exp()
                } else {
                    1.0 - 0.5 * (t / scale).exp()
                }
            }
            NoiseModel::Gaussian { sigma } => 0.5 * erfc(t / (sigma * std::f64::consts::SQRT_2)),
        }
    }

    /// Probability that a true count stays at or above the presence threshold.
    pub fn present(&self, count: f64) -> f64 {
        self.sf(PRESENCE_THRESHOLD - count)
    }

    /// Probability that a true count drops below the presence threshold.
    pub fn absent(&self, count: f64) -> f64 {
        self.cdf(PRESENCE_THRESHOLD - count)
    }

    pub fn variance(&self) -> f64 {
        match *self {
            NoiseModel::Laplace { scale } => 2.0 * scale * scale,
            NoiseModel::Gaussian { sigma } => sigma * sigma,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            NoiseModel::Laplace { scale } => loop {
                let u: f64 = rng.random::<f64>() - 0.5;
                let tail = 1.0 - 2.0 * u.abs();
                if tail > 0.0 {
                    break -scale * u.signum() * tail.ln();
                }
            },
            NoiseModel::Gaussian { sigma } => {
                let z: f64 = rng.sample(StandardNormal);
                sigma * z
            }
        }
    }
}

/// Categories whose noisy count reaches the presence threshold (inclusive).
pub fn presence_support(noisy: &[f64]) -> Vec<usize> {
    noisy
        .iter()
        .enumerate()
        .filter(|(_, &x)| x >= PRESENCE_THRESHOLD)
        .map(|(k, _)| k)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SanitizedCell {
    pub key: Vec<String>,
    pub noisy_counts: Vec<f64>,
}

/// A released table: same cells and categories as its source, noisy counts only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SanitizedTable {
    pub qid_names: Vec<String>,
    pub sensitive_name: String,
    pub categories: Vec<String>,
    pub cells: Vec<SanitizedCell>,
    pub mechanism: Mechanism,
    pub epsilon: f64,
    pub delta: Option<f64>,
    #[serde(default = "unit_sensitivity")]
    pub sensitivity: f64,
    pub seed: u64,
}

fn unit_sensitivity() -> f64 {
    1.0
}

impl SanitizedTable {
    pub fn params(&self) -> Result<PrivacyParams> {
        PrivacyParams::new(self.mechanism, self.epsilon, self.delta, self.sensitivity)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn read(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::FileNotFound(path.to_path_buf()));
        }
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Noisy copy of `counts` for cell `index`; one draw per category from the
/// cell's own substream.
pub(crate) fn noisy_cell(counts: &[u64], noise: &NoiseModel, seed: u64, index: u64) -> Vec<f64> {
    let mut rng = substream(seed, DOMAIN_SANITIZE, index);
    counts
        .iter()
        .map(|&c| c as f64 + noise.sample(&mut rng))
        .collect()
}

/// Perturb every count of every stored cell (within-cell zeros included).
pub fn sanitize(table: &FrequencyTable, params: &PrivacyParams, seed: u64) -> Result<SanitizedTable> {
    let noise = params.noise()?;
    let cells = table
        .cells()
        .par_iter()
        .enumerate()
        .map(|(i, cell)| SanitizedCell {
            key: cell.key.clone(),
            noisy_counts: noisy_cell(&cell.counts, &noise, seed, i as u64),
        })
        .collect();
    Ok(SanitizedTable {
        qid_names: table.qid_names().to_vec(),
        sensitive_name: table.sensitive_name().to_string(),
        categories: table.categories().to_vec(),
        cells,
        mechanism: params.mechanism(),
        epsilon: params.epsilon(),
        delta: params.delta(),
        sensitivity: params.sensitivity(),
        seed,
    })
}

/// Round half up, then clamp at zero.
pub fn round_count(x: f64) -> u64 {
    let r = (x + 0.5).floor();
    if r > 0.0 {
        r as u64
    } else {
        0
    }
}

/// Non-negative integer counts per cell, in the table's cell order.
pub fn postprocess_counts(table: &SanitizedTable) -> Vec<Vec<u64>> {
    table
        .cells
        .iter()
        .map(|c| c.noisy_counts.iter().copied().map(round_count).collect())
        .collect()
}
