//! Brute-force Monte-Carlo estimates of the DR-HA measures, tallied by
//! outcome scenario, and the empirical thresholding disclosure risk.
//!
//! Replications run in fixed blocks, each block on its own substream of the
//! root seed. Blocks are evaluated in parallel and merged in block order, so
//! tallies do not depend on the number of worker threads.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::mechanisms::{presence_support, NoiseModel, PrivacyParams};
use crate::risk::{CellSizeModel, DirichletHyper};
use crate::rng::{derive_seed, substream, DOMAIN_MC};
use crate::synthetic::{sample_dirichlet, sample_multinomial, sample_positive_size};
use crate::tabulation::FrequencyTable;

pub const BLOCK: u64 = 1024;
pub const MIN_REPS: u64 = 1000;

/// Outcome of one sanitized cell, numbered 1 through 8.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Scenario(u8);

impl Scenario {
    pub fn number(self) -> u8 {
        self.0
    }

    /// Scenarios 1 and 8 are the homogeneity-attack events.
    pub fn is_disclosure(self) -> bool {
        self.0 == 1 || self.0 == 8
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Classify by the original counts and the 0.5-threshold sanitized support.
pub fn classify_scenario(original: &[u64], support: &[usize]) -> Scenario {
    let present: Vec<usize> = (0..original.len()).filter(|&k| original[k] > 0).collect();
    let homogeneous = present.len() == 1;
    let s = match (homogeneous, support.len()) {
        (true, 1) if support[0] == present[0] => 1,
        (true, 1) => 2,
        (true, 0) => 4,
        (true, _) => 3,
        (false, 0) => 6,
        (false, 1) if original[support[0]] > 0 => 8,
        (false, 1) => 7,
        (false, _) => 5,
    };
    Scenario(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ScenarioTally(pub [u64; 8]);

impl ScenarioTally {
    pub fn add(&mut self, s: Scenario) {
        self.0[(s.0 - 1) as usize] += 1;
    }

    pub fn get(&self, scenario: u8) -> u64 {
        self.0[(scenario - 1) as usize]
    }

    pub fn total(&self) -> u64 {
        self.0.iter().sum()
    }

    fn merge(&mut self, other: &ScenarioTally) {
        for (a, b) in self.0.iter_mut().zip(other.0) {
            *a += b;
        }
    }
}

impl Serialize for ScenarioTally {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let map: BTreeMap<String, u64> = (1..=8).map(|k| (k.to_string(), self.get(k))).collect();
        map.serialize(s)
    }
}

impl<'de> Deserialize<'de> for ScenarioTally {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let map = BTreeMap::<String, u64>::deserialize(d)?;
        let mut t = ScenarioTally::default();
        for (k, v) in map {
            let i: usize = k.parse().map_err(serde::de::Error::custom)?;
            if !(1..=8).contains(&i) {
                return Err(serde::de::Error::custom(format!("scenario {i} out of range")));
            }
            t.0[i - 1] = v;
        }
        Ok(t)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub value: f64,
    pub se: f64,
    pub reps: u64,
    pub scenarios: ScenarioTally,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub definition: Option<String>,
}

fn binomial_se(v: f64, n: u64) -> f64 {
    (v * (1.0 - v) / n as f64).sqrt()
}

impl McEstimate {
    fn from_tally(scenarios: ScenarioTally, reps: u64) -> Self {
        let value = (scenarios.get(1) + scenarios.get(8)) as f64 / reps as f64;
        McEstimate {
            value,
            se: binomial_se(value, reps),
            reps,
            scenarios,
            definition: None,
        }
    }

    /// Scenario-1 frequency and its standard error.
    pub fn scenario1(&self) -> (f64, f64) {
        self.fraction(1)
    }

    pub fn scenario8(&self) -> (f64, f64) {
        self.fraction(8)
    }

    fn fraction(&self, s: u8) -> (f64, f64) {
        let n = self.scenarios.total();
        let v = self.scenarios.get(s) as f64 / n as f64;
        (v, binomial_se(v, n))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn check_reps(reps: u64) -> Result<()> {
    if reps < MIN_REPS {
        return Err(Error::InvalidParameter(format!("reps must be >= {MIN_REPS}, got {reps}")));
    }
    Ok(())
}

/// Run `reps` replications in seeded blocks and merge the per-block results in order.
fn blocks<T: Send>(reps: u64, seed: u64, domain_index: u64, f: impl Fn(&mut rand_chacha::ChaCha8Rng, u64) -> T + Sync) -> Vec<T> {
    let nblocks = reps.div_ceil(BLOCK);
    let root = derive_seed(seed, DOMAIN_MC, domain_index);
    (0..nblocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = substream(root, DOMAIN_MC, b);
            let size = BLOCK.min(reps - b * BLOCK);
            f(&mut rng, size)
        })
        .collect()
}

fn noisy_support<R: Rng + ?Sized>(counts: &[u64], noise: &NoiseModel, rng: &mut R, buf: &mut Vec<f64>) -> Vec<usize> {
    buf.clear();
    buf.extend(counts.iter().map(|&c| c as f64 + noise.sample(rng)));
    presence_support(buf)
}

/// The randomness layers stacked above the noise.
#[derive(Debug, Clone)]
pub enum McModel {
    /// Fixed observed counts.
    Local { counts: Vec<u64> },
    /// Counts drawn from `Multinomial(n, p̂)`.
    Expected { n: u64, p: Vec<f64> },
    /// `p ~ Dirichlet(α)`, then counts.
    Shrinkage { n: u64, hyper: DirichletHyper },
    /// `n ~ f(·; β)` conditioned on `n >= 1`, then as `Shrinkage`.
    Global { hyper: DirichletHyper, size_model: CellSizeModel },
    /// `n ~ f(·; β)` conditioned on `n >= 1`, then a homogeneous cell of size `n`.
    GlobalVariant { k: usize, size_model: CellSizeModel },
}

impl McModel {
    fn validate(&self) -> Result<()> {
        match self {
            McModel::Local { counts } => {
                if counts.len() < 2 || counts.iter().all(|&c| c == 0) {
                    return Err(Error::InvalidParameter("cell needs K >= 2 and a positive count".into()));
                }
            }
            McModel::Expected { n, p } => {
                if *n == 0 || p.len() < 2 || p.iter().any(|x| !(*x >= 0.0)) || (p.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                    return Err(Error::InvalidParameter("expected layer needs n >= 1 and a probability vector".into()));
                }
            }
            McModel::Shrinkage { n, .. } => {
                if *n == 0 {
                    return Err(Error::InvalidParameter("cell size must be >= 1".into()));
                }
            }
            McModel::Global { size_model, .. } => size_model.validate()?,
            McModel::GlobalVariant { k, size_model } => {
                if *k < 2 {
                    return Err(Error::TooFewCategories(*k));
                }
                size_model.validate()?
            }
        }
        Ok(())
    }

    fn draw_counts<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<u64> {
        match self {
            McModel::Local { counts } => counts.clone(),
            McModel::Expected { n, p } => sample_multinomial(*n, p, rng),
            McModel::Shrinkage { n, hyper } => {
                let p = sample_dirichlet(hyper.alpha(), rng);
                sample_multinomial(*n, &p, rng)
            }
            McModel::Global { hyper, size_model } => {
                let n = sample_positive_size(size_model, rng);
                let p = sample_dirichlet(hyper.alpha(), rng);
                sample_multinomial(n, &p, rng)
            }
            McModel::GlobalVariant { k, size_model } => {
                let mut c = vec![0u64; *k];
                c[0] = sample_positive_size(size_model, rng);
                c
            }
        }
    }
}

/// Estimate the DR-HA of one layered model.
pub fn mc_estimate(model: &McModel, noise: &NoiseModel, reps: u64, seed: u64) -> Result<McEstimate> {
    check_reps(reps)?;
    model.validate()?;
    let tallies = blocks(reps, seed, 0, |rng, size| {
        let mut t = ScenarioTally::default();
        let mut buf = Vec::new();
        for _ in 0..size {
            let counts = model.draw_counts(rng);
            let support = noisy_support(&counts, noise, rng, &mut buf);
            t.add(classify_scenario(&counts, &support));
        }
        t
    });
    let mut total = ScenarioTally::default();
    for t in &tallies {
        total.merge(t);
    }
    Ok(McEstimate::from_tally(total, reps))
}

pub fn mc_local(counts: &[u64], params: &PrivacyParams, reps: u64, seed: u64) -> Result<McEstimate> {
    mc_estimate(&McModel::Local { counts: counts.to_vec() }, &params.noise()?, reps, seed)
}

pub fn mc_expected(n: u64, p: &[f64], params: &PrivacyParams, reps: u64, seed: u64) -> Result<McEstimate> {
    mc_estimate(&McModel::Expected { n, p: p.to_vec() }, &params.noise()?, reps, seed)
}

pub fn mc_shrinkage(n: u64, hyper: &DirichletHyper, params: &PrivacyParams, reps: u64, seed: u64) -> Result<McEstimate> {
    let model = McModel::Shrinkage {
        n,
        hyper: hyper.clone(),
    };
    mc_estimate(&model, &params.noise()?, reps, seed)
}

pub fn mc_global(
    hyper: &DirichletHyper,
    size_model: &CellSizeModel,
    params: &PrivacyParams,
    reps: u64,
    seed: u64,
) -> Result<McEstimate> {
    let model = McModel::Global {
        hyper: hyper.clone(),
        size_model: *size_model,
    };
    mc_estimate(&model, &params.noise()?, reps, seed)
}

pub fn mc_global_variant(
    size_model: &CellSizeModel,
    k: usize,
    params: &PrivacyParams,
    reps: u64,
    seed: u64,
) -> Result<McEstimate> {
    let model = McModel::GlobalVariant {
        k,
        size_model: *size_model,
    };
    mc_estimate(&model, &params.noise()?, reps, seed)
}

/// Which cell-level layer a table-average estimate uses.
#[derive(Debug, Clone, PartialEq)]
pub enum TableLayer {
    Local,
    Expected,
    Shrinkage(DirichletHyper),
}

/// Average of per-model estimates with pooled standard error
/// `sqrt(Σ seᵢ²) / M`. Model `i` uses a seed derived from `(seed, i)`.
pub fn mc_average(models: &[McModel], noise: &NoiseModel, reps: u64, seed: u64) -> Result<McEstimate> {
    if models.is_empty() {
        return Err(Error::InvalidParameter("nothing to average".into()));
    }
    let per_model = models
        .iter()
        .enumerate()
        .map(|(i, model)| mc_estimate(model, noise, reps, derive_seed(seed, DOMAIN_MC, i as u64 + 1)))
        .collect::<Result<Vec<_>>>()?;
    let m = per_model.len() as f64;
    let mut scenarios = ScenarioTally::default();
    for e in &per_model {
        scenarios.merge(&e.scenarios);
    }
    Ok(McEstimate {
        value: per_model.iter().map(|e| e.value).sum::<f64>() / m,
        se: per_model.iter().map(|e| e.se * e.se).sum::<f64>().sqrt() / m,
        reps,
        scenarios,
        definition: None,
    })
}

/// Table average of the per-cell estimates for one layer.
pub fn mc_table_avg(table: &FrequencyTable, layer: &TableLayer, params: &PrivacyParams, reps: u64, seed: u64) -> Result<McEstimate> {
    let models: Vec<McModel> = table
        .cells()
        .iter()
        .map(|cell| {
            let n = cell.n();
            match layer {
                TableLayer::Local => McModel::Local {
                    counts: cell.counts.clone(),
                },
                TableLayer::Expected => McModel::Expected {
                    n,
                    p: cell.counts.iter().map(|&c| c as f64 / n as f64).collect(),
                },
                TableLayer::Shrinkage(hyper) => McModel::Shrinkage { n, hyper: hyper.clone() },
            }
        })
        .collect();
    mc_average(&models, &params.noise()?, reps, seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdMode {
    Hard,
    Soft,
}

impl FromStr for ThresholdMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hard" => Ok(ThresholdMode::Hard),
            "soft" => Ok(ThresholdMode::Soft),
            other => Err(Error::InvalidParameter(format!("unknown threshold mode `{other}`"))),
        }
    }
}

const HARD_DEFINITION: &str = "singleton support {k}: n_k/n; larger support: n_k*/n with k* the largest \
noisy count in the support (lowest index on ties); empty support: 0; averaged over cells, then replications";
const SOFT_DEFINITION: &str = "singleton support {k}: n_k/n; larger support: sum over k in support of \
(n_k/n) * max(noisy_k,0) / sum of max(noisy_t,0) over the support; empty support: 0; averaged over cells, then replications";

/// Correctly disclosed fraction of one cell's records for one sanitized draw.
pub fn threshold_contribution(counts: &[u64], noisy: &[f64], mode: ThresholdMode) -> f64 {
    let support = presence_support(noisy);
    let n: u64 = counts.iter().sum();
    let frac = |k: usize| counts[k] as f64 / n as f64;
    match support.len() {
        0 => 0.0,
        1 => frac(support[0]),
        _ => match mode {
            ThresholdMode::Hard => {
                let mut best = support[0];
                for &k in &support[1..] {
                    if noisy[k] > noisy[best] {
                        best = k;
                    }
                }
                frac(best)
            }
            ThresholdMode::Soft => {
                let weight: f64 = support.iter().map(|&k| noisy[k].max(0.0)).sum();
                support.iter().map(|&k| frac(k) * noisy[k].max(0.0) / weight).sum()
            }
        },
    }
}

/// Disclosure risk from the homogeneity attack plus plurality (hard) or
/// proportional (soft) guessing in sanitized cells that stay heterogeneous.
/// Scenario tallies are counted per cell and replication.
pub fn mc_threshold_dr(
    table: &FrequencyTable,
    params: &PrivacyParams,
    mode: ThresholdMode,
    reps: u64,
    seed: u64,
) -> Result<McEstimate> {
    check_reps(reps)?;
    let noise = params.noise()?;
    let m = table.m() as f64;
    let parts = blocks(reps, seed, 1, |rng, size| {
        let mut t = ScenarioTally::default();
        let (mut sum, mut sum_sq) = (0.0, 0.0);
        let mut noisy = Vec::new();
        for _ in 0..size {
            let mut rep = 0.0;
            for cell in table.cells() {
                let support = noisy_support(&cell.counts, &noise, rng, &mut noisy);
                t.add(classify_scenario(&cell.counts, &support));
                rep += threshold_contribution(&cell.counts, &noisy, mode);
            }
            rep /= m;
            sum += rep;
            sum_sq += rep * rep;
        }
        (t, sum, sum_sq)
    });
    let mut scenarios = ScenarioTally::default();
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for (t, s, q) in &parts {
        scenarios.merge(t);
        sum += s;
        sum_sq += q;
    }
    let r = reps as f64;
    let value = sum / r;
    let var = ((sum_sq - r * value * value) / (r - 1.0)).max(0.0);
    Ok(McEstimate {
        value,
        se: (var / r).sqrt(),
        reps,
        scenarios,
        definition: Some(
            match mode {
                ThresholdMode::Hard => HARD_DEFINITION,
                ThresholdMode::Soft => SOFT_DEFINITION,
            }
            .to_string(),
        ),
    })
}
