//! Closed-form DR-HA measures.
//!
//! Every measure is a sum of two components: the Scenario-1 term (an original
//! homogeneous draw stays homogeneous at the same category) and the Scenario-8
//! bound (a heterogeneous draw collapses onto one of its categories, bounded
//! through the `{n-1, 1, 0, ...}` configuration). Both are written through the
//! noise model's tail probabilities
//!
//! * `q0   = Pr(e < 0.5)`          an absent category stays absent
//! * `s(n) = Pr(e >= 0.5 - n)`     a count of `n` stays present
//! * `m1   = Pr(e < -0.5)`         a count of 1 disappears
//!
//! so the same code serves Laplace and Gaussian noise. The `_k2` and
//! `rho_homog_avg` functions evaluate the mechanism-specific printed forms
//! independently and serve as cross-checks.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mechanisms::{Mechanism, NoiseModel, PrivacyParams};
use crate::special::{erf, ln_beta, ln_gamma};
use crate::tabulation::{CellRecord, FrequencyTable};

pub const SERIES_TOL: f64 = 1e-12;
pub const SERIES_CAP: usize = 1_000_000;

/// A risk value split into its Scenario-1 and Scenario-8 parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskValue {
    pub value: f64,
    pub scenario1: f64,
    pub scenario8: f64,
}

impl RiskValue {
    pub fn new(scenario1: f64, scenario8: f64) -> Self {
        Self {
            value: scenario1 + scenario8,
            scenario1,
            scenario8,
        }
    }

    fn scale(self, c: f64) -> Self {
        Self::new(self.scenario1 * c, self.scenario8 * c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirichletHyper {
    alpha: Vec<f64>,
}

impl DirichletHyper {
    pub fn new(alpha: Vec<f64>) -> Result<Self> {
        if alpha.len() < 2 {
            return Err(Error::InvalidParameter(format!(
                "dirichlet needs at least 2 components, got {}",
                alpha.len()
            )));
        }
        if let Some(a) = alpha.iter().find(|a| !(**a > 0.0) || !a.is_finite()) {
            return Err(Error::InvalidParameter(format!("alpha components must be > 0, got {a}")));
        }
        Ok(Self { alpha })
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn k(&self) -> usize {
        self.alpha.len()
    }

    pub fn total(&self) -> f64 {
        self.alpha.iter().sum()
    }
}

/// `E[Σ_k p_k^n]` under `p ~ Dirichlet(α)`.
pub fn dirichlet_homogeneous_mass(hyper: &DirichletHyper, n: u64) -> f64 {
    let a_dot = hyper.total();
    let n = n as f64;
    let base = ln_gamma(a_dot) - ln_gamma(a_dot + n);
    hyper
        .alpha
        .iter()
        .map(|&a| (base + ln_gamma(a + n) - ln_gamma(a)).exp())
        .sum()
}

/// `E[Σ_k p_k^(n-1) (1 - p_k)]` under `p ~ Dirichlet(α)`, for `n >= 1`.
pub fn dirichlet_scenario8_mass(hyper: &DirichletHyper, n: u64) -> f64 {
    let a_dot = hyper.total();
    let n = n as f64;
    let base = ln_gamma(a_dot) - ln_gamma(n + a_dot);
    hyper
        .alpha
        .iter()
        .map(|&a| (base + ln_gamma(n + a - 1.0) - ln_gamma(a)).exp() * (a_dot - a))
        .sum()
}

/// Cell-size distribution `f(n; β)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum CellSizeModel {
    Poisson { lambda: f64 },
    /// Mass `C(n+r-1, r-1) (1-λ)^n λ^r`, mean `r(1-λ)/λ`.
    Negbin { r: f64, lambda: f64 },
}

impl CellSizeModel {
    pub fn poisson(lambda: f64) -> Result<Self> {
        let m = CellSizeModel::Poisson { lambda };
        m.validate()?;
        Ok(m)
    }

    pub fn negbin(r: f64, lambda: f64) -> Result<Self> {
        let m = CellSizeModel::Negbin { r, lambda };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            CellSizeModel::Poisson { lambda } if lambda > 0.0 && lambda.is_finite() => Ok(()),
            CellSizeModel::Poisson { lambda } => {
                Err(Error::InvalidParameter(format!("poisson lambda must be > 0, got {lambda}")))
            }
            CellSizeModel::Negbin { r, lambda } => {
                if !(r > 0.0) || !r.is_finite() {
                    return Err(Error::InvalidParameter(format!("negbin r must be > 0, got {r}")));
                }
                if !(lambda > 0.0 && lambda < 1.0) {
                    return Err(Error::InvalidParameter(format!("negbin lambda must be in (0,1), got {lambda}")));
                }
                Ok(())
            }
        }
    }

    pub fn ln_pmf(&self, n: u64) -> f64 {
        let x = n as f64;
        match *self {
            CellSizeModel::Poisson { lambda } => x * lambda.ln() - lambda - ln_gamma(x + 1.0),
            CellSizeModel::Negbin { r, lambda } => {
                ln_gamma(x + r) - ln_gamma(r) - ln_gamma(x + 1.0) + x * (1.0 - lambda).ln() + r * lambda.ln()
            }
        }
    }

    pub fn pmf(&self, n: u64) -> f64 {
        self.ln_pmf(n).exp()
    }

    /// `1 - f(0)`, computed without cancellation.
    pub fn positive_mass(&self) -> f64 {
        match *self {
            CellSizeModel::Poisson { lambda } => -(-lambda).exp_m1(),
            CellSizeModel::Negbin { r, lambda } => -(r * lambda.ln()).exp_m1(),
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            CellSizeModel::Poisson { lambda } => lambda,
            CellSizeModel::Negbin { r, lambda } => r * (1.0 - lambda) / lambda,
        }
    }
}

/// Controls the infinite sums over cell sizes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesOptions {
    pub tol: f64,
    pub cap: usize,
    /// Divide `f(n)` by `1 - f(0)` so the weights over `n >= 1` sum to one.
    pub zero_truncated: bool,
}

impl Default for SeriesOptions {
    fn default() -> Self {
        Self {
            tol: SERIES_TOL,
            cap: SERIES_CAP,
            zero_truncated: false,
        }
    }
}

impl SeriesOptions {
    pub fn zero_truncated() -> Self {
        Self {
            zero_truncated: true,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesRisk {
    pub risk: RiskValue,
    /// Largest cell size included in the sum.
    pub terms: u64,
}

/// `Σ_{n>=1} w(n) g(n)` where `w` is `f(n)` (optionally renormalized). Stops
/// once the size mass still outside the sum drops below `tol`.
fn size_series(
    model: &CellSizeModel,
    opts: &SeriesOptions,
    mut g: impl FnMut(u64) -> RiskValue,
) -> Result<SeriesRisk> {
    model.validate()?;
    let positive = model.positive_mass();
    let norm = if opts.zero_truncated { 1.0 / positive } else { 1.0 };
    let (mut s1, mut s8) = (Neumaier::default(), Neumaier::default());
    let mut mass = Neumaier::default();
    let mut n = 0u64;
    loop {
        n += 1;
        if n as usize > opts.cap {
            return Err(Error::SeriesCap {
                cap: opts.cap,
                tol: opts.tol,
            });
        }
        let f = model.pmf(n);
        mass.add(f);
        if f > 0.0 {
            let t = g(n);
            s1.add(f * t.scenario1);
            s8.add(f * t.scenario8);
        }
        let remaining = (positive - mass.sum()) * norm;
        let past_mode = (n as f64) > model.mean();
        if remaining < opts.tol || (past_mode && f == 0.0) {
            break;
        }
    }
    Ok(SeriesRisk {
        risk: RiskValue::new(s1.sum() * norm, s8.sum() * norm),
        terms: n,
    })
}

/// Compensated summation.
#[derive(Default, Clone, Copy)]
struct Neumaier {
    sum: f64,
    c: f64,
}

impl Neumaier {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.c += (self.sum - t) + x;
        } else {
            self.c += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn sum(&self) -> f64 {
        self.sum + self.c
    }
}

/// `q^e` through logs, so long products of one factor cannot underflow early.
fn pow_n(q: f64, e: usize) -> f64 {
    if e == 0 {
        1.0
    } else {
        (e as f64 * q.ln()).exp()
    }
}

/// Noise tail probabilities used by the closed forms.
#[derive(Debug, Clone, Copy)]
struct Tails {
    noise: NoiseModel,
    q0: f64,
    m1: f64,
}

impl Tails {
    fn new(noise: &NoiseModel) -> Self {
        Self {
            noise: *noise,
            q0: noise.cdf(0.5),
            m1: noise.cdf(-0.5),
        }
    }

    /// `Pr(e >= 0.5 - n)`.
    fn s(&self, n: u64) -> f64 {
        self.noise.present(n as f64)
    }

    /// Scenario-1 factor for a cell of size `n` with K categories.
    fn homog(&self, n: u64, k: usize) -> f64 {
        pow_n(self.q0, k - 1) * self.s(n)
    }

    /// Scenario-8 factor, zero below `n = 2`.
    fn collapse(&self, n: u64, k: usize) -> f64 {
        if n < 2 {
            0.0
        } else {
            self.s(n - 1) * self.m1 * pow_n(self.q0, k - 2)
        }
    }
}

/// Exact local risk with a flag telling whether the cell was homogeneous.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalRisk {
    pub risk: RiskValue,
    /// True for homogeneous input, where the value is the full Scenario-1 risk.
    pub exact: bool,
}

/// `Σ_{k∈𝒴} Pr(ñ_k ≥ 0.5) Π_{t≠k} Pr(ñ_t < 0.5)` for a fixed observed cell.
pub fn rho_local(cell: &CellRecord, noise: &NoiseModel) -> LocalRisk {
    let present: Vec<f64> = cell.counts.iter().map(|&c| noise.present(c as f64)).collect();
    let absent: Vec<f64> = cell.counts.iter().map(|&c| noise.absent(c as f64)).collect();
    let mut total = 0.0;
    for (k, &c) in cell.counts.iter().enumerate() {
        if c == 0 {
            continue;
        }
        let others: f64 = absent
            .iter()
            .enumerate()
            .filter(|&(t, _)| t != k)
            .map(|(_, a)| a.ln())
            .sum();
        total += present[k] * others.exp();
    }
    let exact = cell.is_homogeneous();
    LocalRisk {
        risk: if exact {
            RiskValue::new(total, 0.0)
        } else {
            RiskValue::new(0.0, total)
        },
        exact,
    }
}

pub fn rho_local_exact(cell: &CellRecord, params: &PrivacyParams) -> Result<LocalRisk> {
    Ok(rho_local(cell, &params.noise()?))
}

/// Table average of the exact local risk.
pub fn rho_local_avg(table: &FrequencyTable, noise: &NoiseModel) -> RiskValue {
    let (mut s1, mut s8) = (0.0, 0.0);
    for cell in table.cells() {
        let r = rho_local(cell, noise).risk;
        s1 += r.scenario1;
        s8 += r.scenario8;
    }
    RiskValue::new(s1, s8).scale(1.0 / table.m() as f64)
}

/// Plug-in expected-risk bound of one cell under `p̂ = counts / n`.
pub fn rho_e_cell(cell: &CellRecord, noise: &NoiseModel) -> RiskValue {
    let n = cell.n();
    let k = cell.counts.len();
    let t = Tails::new(noise);
    let nf = n as f64;
    let mut homog = 0.0;
    let mut collapse = 0.0;
    for &c in &cell.counts {
        let p = c as f64 / nf;
        homog += p.powf(nf);
        if n >= 2 {
            collapse += p.powf(nf - 1.0) * (1.0 - p);
        }
    }
    RiskValue::new(homog * t.homog(n, k), collapse * t.collapse(n, k))
}

/// Average plug-in expected risk `ρ̄ᵉ` for any noise model.
pub fn rho_e_avg(table: &FrequencyTable, noise: &NoiseModel) -> RiskValue {
    let (mut s1, mut s8) = (0.0, 0.0);
    for cell in table.cells() {
        let r = rho_e_cell(cell, noise);
        s1 += r.scenario1;
        s8 += r.scenario8;
    }
    RiskValue::new(s1, s8).scale(1.0 / table.m() as f64)
}

fn laplace_noise(epsilon: f64) -> Result<NoiseModel> {
    PrivacyParams::laplace(epsilon)?.noise()
}

fn gaussian_noise(params: &PrivacyParams) -> Result<NoiseModel> {
    if !params.mechanism().is_gaussian() {
        return Err(Error::InvalidParameter(format!("{} is not a gaussian mechanism", params.mechanism())));
    }
    params.noise()
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("sigma must be > 0, got {sigma}")))
    }
}

pub fn rho_e_avg_laplace(table: &FrequencyTable, epsilon: f64) -> Result<RiskValue> {
    Ok(rho_e_avg(table, &laplace_noise(epsilon)?))
}

pub fn rho_e_avg_gaussian(table: &FrequencyTable, params: &PrivacyParams) -> Result<RiskValue> {
    Ok(rho_e_avg(table, &gaussian_noise(params)?))
}

/// Average shrinkage risk `ρ̄ˢ` over the given cell sizes.
pub fn rho_s_avg(sizes: &[u64], hyper: &DirichletHyper, noise: &NoiseModel) -> Result<RiskValue> {
    check_sizes(sizes)?;
    let k = hyper.k();
    let t = Tails::new(noise);
    let (mut s1, mut s8) = (0.0, 0.0);
    for &n in sizes {
        s1 += dirichlet_homogeneous_mass(hyper, n) * t.homog(n, k);
        if n >= 2 {
            s8 += dirichlet_scenario8_mass(hyper, n) * t.collapse(n, k);
        }
    }
    Ok(RiskValue::new(s1, s8).scale(1.0 / sizes.len() as f64))
}

fn check_sizes(sizes: &[u64]) -> Result<()> {
    if sizes.is_empty() {
        return Err(Error::InvalidParameter("no cell sizes".into()));
    }
    if sizes.contains(&0) {
        return Err(Error::InvalidParameter("cell sizes must be >= 1".into()));
    }
    Ok(())
}

pub fn rho_s_avg_laplace(sizes: &[u64], hyper: &DirichletHyper, epsilon: f64) -> Result<RiskValue> {
    rho_s_avg(sizes, hyper, &laplace_noise(epsilon)?)
}

pub fn rho_s_avg_gaussian(sizes: &[u64], hyper: &DirichletHyper, params: &PrivacyParams) -> Result<RiskValue> {
    rho_s_avg(sizes, hyper, &gaussian_noise(params)?)
}

/// Global risk `ρᵍ`: the shrinkage cell risk integrated over `f(n; β)`.
pub fn rho_g(
    hyper: &DirichletHyper,
    size_model: &CellSizeModel,
    noise: &NoiseModel,
    opts: &SeriesOptions,
) -> Result<SeriesRisk> {
    let k = hyper.k();
    let t = Tails::new(noise);
    size_series(size_model, opts, |n| {
        let s8 = if n >= 2 {
            dirichlet_scenario8_mass(hyper, n) * t.collapse(n, k)
        } else {
            0.0
        };
        RiskValue::new(dirichlet_homogeneous_mass(hyper, n) * t.homog(n, k), s8)
    })
}

pub fn rho_g_laplace(
    hyper: &DirichletHyper,
    size_model: &CellSizeModel,
    epsilon: f64,
    opts: &SeriesOptions,
) -> Result<SeriesRisk> {
    rho_g(hyper, size_model, &laplace_noise(epsilon)?, opts)
}

pub fn rho_g_gaussian(
    hyper: &DirichletHyper,
    size_model: &CellSizeModel,
    params: &PrivacyParams,
    opts: &SeriesOptions,
) -> Result<SeriesRisk> {
    rho_g(hyper, size_model, &gaussian_noise(params)?, opts)
}

/// `ρ̃ᵍ`: homogeneous-cell risk integrated over `f(n; β)`, with the
/// single-absent factor raised to `K - 1`.
pub fn rho_g_variant(size_model: &CellSizeModel, noise: &NoiseModel, k: usize, opts: &SeriesOptions) -> Result<SeriesRisk> {
    if k < 2 {
        return Err(Error::TooFewCategories(k));
    }
    let t = Tails::new(noise);
    size_series(size_model, opts, |n| RiskValue::new(t.homog(n, k), 0.0))
}

fn require_k2(k: usize) -> Result<()> {
    if k == 2 {
        Ok(())
    } else {
        Err(Error::NotBinary(k))
    }
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("epsilon must be > 0, got {epsilon}")))
    }
}

/// Binary plug-in form for Laplace noise, `p̂ = n_{i,1}/n_i`.
pub fn rho_e_avg_laplace_k2(table: &FrequencyTable, epsilon: f64) -> Result<RiskValue> {
    require_k2(table.k())?;
    check_epsilon(epsilon)?;
    let keep0 = 1.0 - 0.5 * (-0.5 * epsilon).exp();
    let drop1 = 0.5 * (-0.5 * epsilon).exp();
    let (mut a, mut b) = (0.0, 0.0);
    for cell in table.cells() {
        let n = cell.n() as f64;
        let p = cell.counts[0] as f64 / n;
        a += (p.powf(n) + (1.0 - p).powf(n)) * keep0 * (1.0 - 0.5 * ((0.5 - n) * epsilon).exp());
        if n >= 2.0 {
            b += (p.powf(n - 1.0) * (1.0 - p) + (1.0 - p).powf(n - 1.0) * p)
                * (1.0 - 0.5 * (epsilon * (1.5 - n)).exp())
                * drop1;
        }
    }
    let m = table.m() as f64;
    Ok(RiskValue::new(a / m, b / m))
}

/// Binary plug-in form for Gaussian noise of standard deviation `sigma`.
pub fn rho_e_avg_gaussian_k2(table: &FrequencyTable, sigma: f64) -> Result<RiskValue> {
    require_k2(table.k())?;
    check_sigma(sigma)?;
    let r2 = std::f64::consts::SQRT_2 * sigma;
    let keep0 = 1.0 + erf(1.0 / (2.0 * r2));
    let drop1 = 1.0 + erf(-0.5 / r2);
    let (mut a, mut b) = (0.0, 0.0);
    for cell in table.cells() {
        let n = cell.n() as f64;
        let p = cell.counts[0] as f64 / n;
        a += (p.powf(n) + (1.0 - p).powf(n)) * keep0 * (1.0 + erf((n - 0.5) / r2));
        if n >= 2.0 {
            b += (p.powf(n - 1.0) * (1.0 - p) + (1.0 - p).powf(n - 1.0) * p) * (1.0 - erf((1.5 - n) / r2)) * drop1;
        }
    }
    let m = 4.0 * table.m() as f64;
    Ok(RiskValue::new(a / m, b / m))
}

/// Beta-function pair `(B_1 / B(α), B_2 / B(α))` of the binary shrinkage form.
fn beta_pair(a1: f64, a2: f64, n: f64) -> (f64, f64) {
    let lb = ln_beta(a1, a2);
    let b1 = (ln_beta(n + a1, a2) - lb).exp() + (ln_beta(a1, n + a2) - lb).exp();
    let b2 = if n >= 2.0 {
        (ln_beta(a1 + n - 1.0, a2 + 1.0) - lb).exp() + (ln_beta(a1 + 1.0, n + a2 - 1.0) - lb).exp()
    } else {
        0.0
    };
    (b1, b2)
}

fn binary_alpha(hyper: &DirichletHyper) -> Result<(f64, f64)> {
    require_k2(hyper.k())?;
    Ok((hyper.alpha[0], hyper.alpha[1]))
}

pub fn rho_s_avg_laplace_k2(sizes: &[u64], hyper: &DirichletHyper, epsilon: f64) -> Result<RiskValue> {
    let (a1, a2) = binary_alpha(hyper)?;
    check_sizes(sizes)?;
    check_epsilon(epsilon)?;
    let (mut a, mut b) = (0.0, 0.0);
    for &n in sizes {
        let n = n as f64;
        let (b1, b2) = beta_pair(a1, a2, n);
        a += (1.0 - 0.5 * ((0.5 - n) * epsilon).exp()) * b1;
        if n >= 2.0 {
            b += (1.0 - 0.5 * (epsilon * (1.5 - n)).exp()) * b2;
        }
    }
    let m = sizes.len() as f64;
    Ok(RiskValue::new(
        (1.0 - 0.5 * (-0.5 * epsilon).exp()) * a / m,
        0.5 * (-0.5 * epsilon).exp() * b / m,
    ))
}

pub fn rho_s_avg_gaussian_k2(sizes: &[u64], hyper: &DirichletHyper, sigma: f64) -> Result<RiskValue> {
    let (a1, a2) = binary_alpha(hyper)?;
    check_sizes(sizes)?;
    check_sigma(sigma)?;
    let r2 = std::f64::consts::SQRT_2 * sigma;
    let (mut a, mut b) = (0.0, 0.0);
    for &n in sizes {
        let n = n as f64;
        let (b1, b2) = beta_pair(a1, a2, n);
        a += b1 * (1.0 + erf((n - 0.5) / r2));
        if n >= 2.0 {
            b += b2 * (1.0 - erf((1.5 - n) / r2));
        }
    }
    let m = 4.0 * sizes.len() as f64;
    Ok(RiskValue::new(
        (1.0 + erf(1.0 / (2.0 * r2))) * a / m,
        (1.0 + erf(-0.5 / r2)) * b / m,
    ))
}

pub fn rho_g_laplace_k2(
    hyper: &DirichletHyper,
    size_model: &CellSizeModel,
    epsilon: f64,
    opts: &SeriesOptions,
) -> Result<SeriesRisk> {
    let (a1, a2) = binary_alpha(hyper)?;
    check_epsilon(epsilon)?;
    let keep0 = 1.0 - 0.5 * (-0.5 * epsilon).exp();
    let drop1 = 0.5 * (-0.5 * epsilon).exp();
    size_series(size_model, opts, |n| {
        let n = n as f64;
        let (b1, b2) = beta_pair(a1, a2, n);
        let s8 = if n >= 2.0 {
            drop1 * (1.0 - 0.5 * (epsilon * (1.5 - n)).exp()) * b2
        } else {
            0.0
        };
        RiskValue::new(keep0 * (1.0 - 0.5 * ((0.5 - n) * epsilon).exp()) * b1, s8)
    })
}

/// Binary Gaussian global form, written with Gamma ratios as printed.
pub fn rho_g_gaussian_k2(
    hyper: &DirichletHyper,
    size_model: &CellSizeModel,
    sigma: f64,
    opts: &SeriesOptions,
) -> Result<SeriesRisk> {
    let (a1, a2) = binary_alpha(hyper)?;
    check_sigma(sigma)?;
    let r2 = std::f64::consts::SQRT_2 * sigma;
    let keep0 = 1.0 + erf(1.0 / (2.0 * r2));
    let drop1 = 1.0 + erf(-0.5 / r2);
    let a_dot = a1 + a2;
    size_series(size_model, opts, |n| {
        let n = n as f64;
        let lead = ln_gamma(a_dot) - ln_gamma(a_dot + n);
        let homog = (lead + ln_gamma(a1 + n) - ln_gamma(a1)).exp() + (lead + ln_gamma(a2 + n) - ln_gamma(a2)).exp();
        let s1 = keep0 / 4.0 * homog * (1.0 + erf((n - 0.5) / r2));
        let s8 = if n >= 2.0 {
            let g = ln_gamma(a_dot) - ln_gamma(n + a_dot);
            let mix = (g + ln_gamma(n + a1 - 1.0) - ln_gamma(a1)).exp() * a2
                + (g + ln_gamma(n + a2 - 1.0) - ln_gamma(a2)).exp() * a1;
            drop1 / 4.0 * (1.0 - erf((1.5 - n) / r2)) * mix
        } else {
            0.0
        };
        RiskValue::new(s1, s8)
    })
}

/// Average risk of an all-homogeneous table, evaluated from the
/// mechanism-specific expressions.
pub fn rho_homog_avg(table: &FrequencyTable, params: &PrivacyParams) -> Result<f64> {
    if !table.all_homogeneous() {
        return Err(Error::HeterogeneousCell);
    }
    let k = table.k() as f64;
    let m = table.m() as f64;
    let sizes = table.sizes();
    match params.noise()? {
        NoiseModel::Laplace { scale } => {
            let eps = 1.0 / scale;
            let sum: f64 = sizes.iter().map(|&n| 1.0 - 0.5 * ((0.5 - n as f64) * eps).exp()).sum();
            Ok((1.0 - 0.5 * (-0.5 * eps).exp()).powf(k - 1.0) * sum / m)
        }
        NoiseModel::Gaussian { sigma } => {
            let r2 = std::f64::consts::SQRT_2 * sigma;
            let sum: f64 = sizes.iter().map(|&n| 1.0 + erf((n as f64 - 0.5) / r2)).sum();
            Ok(2f64.powf(-k) / m * (1.0 + erf(1.0 / (2.0 * r2))).powf(k - 1.0) * sum)
        }
    }
}

/// The ε-dependent part of the binary Scenario-8 term, `(1 - 0.5e^{ε(1.5-n)}) e^{-0.5ε}`.
pub fn scenario8_factor(n: u64, epsilon: f64) -> f64 {
    (1.0 - 0.5 * (epsilon * (1.5 - n as f64)).exp()) * (-0.5 * epsilon).exp()
}

/// Location of the maximum of [`scenario8_factor`] in ε.
pub fn second_term_argmax(n: u64) -> Result<f64> {
    if n < 3 {
        return Err(Error::InvalidParameter(format!(
            "cell size {n}: the scenario-8 factor is monotone decreasing for n <= 2"
        )));
    }
    let n = n as f64;
    Ok((n - 1.0).ln() / (n - 1.5))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureKind {
    Local,
    Expected,
    Shrinkage,
    Global,
    GlobalVariant,
}

impl MeasureKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MeasureKind::Local => "local",
            MeasureKind::Expected => "expected",
            MeasureKind::Shrinkage => "shrinkage",
            MeasureKind::Global => "global",
            MeasureKind::GlobalVariant => "global_variant",
        }
    }
}

impl fmt::Display for MeasureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MeasureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "local" => MeasureKind::Local,
            "expected" => MeasureKind::Expected,
            "shrinkage" => MeasureKind::Shrinkage,
            "global" => MeasureKind::Global,
            "global_variant" | "global-variant" => MeasureKind::GlobalVariant,
            other => return Err(Error::InvalidParameter(format!("unknown measure `{other}`"))),
        })
    }
}

/// Everything a measure needs besides the privacy parameters.
#[derive(Debug, Clone)]
pub enum RiskContext {
    Local(FrequencyTable),
    Expected(FrequencyTable),
    Shrinkage { sizes: Vec<u64>, hyper: DirichletHyper },
    Global {
        hyper: DirichletHyper,
        size_model: CellSizeModel,
        opts: SeriesOptions,
    },
    GlobalVariant {
        size_model: CellSizeModel,
        k: usize,
        opts: SeriesOptions,
    },
}

impl RiskContext {
    pub fn kind(&self) -> MeasureKind {
        match self {
            RiskContext::Local(_) => MeasureKind::Local,
            RiskContext::Expected(_) => MeasureKind::Expected,
            RiskContext::Shrinkage { .. } => MeasureKind::Shrinkage,
            RiskContext::Global { .. } => MeasureKind::Global,
            RiskContext::GlobalVariant { .. } => MeasureKind::GlobalVariant,
        }
    }

    pub fn evaluate_noise(&self, noise: &NoiseModel) -> Result<RiskValue> {
        match self {
            RiskContext::Local(t) => Ok(rho_local_avg(t, noise)),
            RiskContext::Expected(t) => Ok(rho_e_avg(t, noise)),
            RiskContext::Shrinkage { sizes, hyper } => rho_s_avg(sizes, hyper, noise),
            RiskContext::Global {
                hyper,
                size_model,
                opts,
            } => Ok(rho_g(hyper, size_model, noise, opts)?.risk),
            RiskContext::GlobalVariant { size_model, k, opts } => {
                Ok(rho_g_variant(size_model, noise, *k, opts)?.risk)
            }
        }
    }

    pub fn evaluate(&self, params: &PrivacyParams) -> Result<RiskValue> {
        self.evaluate_noise(&params.noise()?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskRow {
    pub epsilon: f64,
    pub delta: Option<f64>,
    pub mechanism: Mechanism,
    pub measure: MeasureKind,
    pub value: f64,
    pub scenario1_component: f64,
    pub scenario8_component: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskCurve {
    pub rows: Vec<RiskRow>,
}

pub const CURVE_HEADER: &str = "epsilon,delta,mechanism,measure,value,scenario1_component,scenario8_component";

/// Round to `digits` significant digits and print the shortest form of the
/// rounded value.
pub fn format_sig(x: f64, digits: usize) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0".into();
    }
    let rounded: f64 = format!("{:.*e}", digits.saturating_sub(1), x).parse().expect("valid float");
    format!("{rounded}")
}

impl RiskCurve {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CURVE_HEADER);
        out.push('\n');
        for r in &self.rows {
            let delta = r.delta.map(|d| format_sig(d, 12)).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                format_sig(r.epsilon, 12),
                delta,
                r.mechanism,
                r.measure,
                format_sig(r.value, 12),
                format_sig(r.scenario1_component, 12),
                format_sig(r.scenario8_component, 12),
            ));
        }
        out
    }

    pub fn values(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.value).collect()
    }
}

/// Evaluate a measure over an (ε, δ) grid. δ is ignored for Laplace. For
/// `gaussian_adp`, grid points with ε ≥ 1 lie outside the mechanism's domain
/// and are left out, giving a partial curve.
pub fn risk_curve(
    ctx: &RiskContext,
    mechanism: Mechanism,
    epsilons: &[f64],
    deltas: &[f64],
    sensitivity: f64,
) -> Result<RiskCurve> {
    if epsilons.is_empty() {
        return Err(Error::InvalidParameter("empty epsilon grid".into()));
    }
    let points: Vec<(f64, Option<f64>)> = match mechanism {
        Mechanism::Laplace => epsilons.iter().map(|&e| (e, None)).collect(),
        _ => {
            if deltas.is_empty() {
                return Err(Error::InvalidParameter("gaussian mechanisms need a delta grid".into()));
            }
            epsilons
                .iter()
                .filter(|&&e| mechanism != Mechanism::GaussianAdp || e < 1.0)
                .flat_map(|&e| deltas.iter().map(move |&d| (e, Some(d))))
                .collect()
        }
    };
    if points.is_empty() {
        return Err(Error::InvalidParameter("gaussian_adp needs epsilon < 1; no grid point qualifies".into()));
    }
    let mut rows = points
        .par_iter()
        .map(|&(epsilon, delta)| {
            let params = PrivacyParams::new(mechanism, epsilon, delta, sensitivity)?;
            let r = ctx.evaluate(&params)?;
            Ok(RiskRow {
                epsilon,
                delta,
                mechanism,
                measure: ctx.kind(),
                value: r.value,
                scenario1_component: r.scenario1,
                scenario8_component: r.scenario8,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| {
        a.epsilon
            .total_cmp(&b.epsilon)
            .then(a.delta.unwrap_or(0.0).total_cmp(&b.delta.unwrap_or(0.0)))
    });
    Ok(RiskCurve { rows })
}

/// Parse `lo:hi:logN`, `lo:hi:linN`, `lo:hi:N` (log), a comma list, or a single value.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let bad = || Error::InvalidParameter(format!("bad grid `{spec}`"));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
    let parts: Vec<&str> = spec.split(':').collect();
    match parts.len() {
        1 => spec.split(',').map(num).collect(),
        3 => {
            let (lo, hi) = (num(parts[0])?, num(parts[1])?);
            let mode = parts[2].trim();
            let (log, count) = if let Some(c) = mode.strip_prefix("log") {
                (true, c)
            } else if let Some(c) = mode.strip_prefix("lin") {
                (false, c)
            } else {
                (true, mode)
            };
            let n: usize = count.parse().map_err(|_| bad())?;
            if n == 0 || !(lo <= hi) {
                return Err(bad());
            }
            if log && !(lo > 0.0) {
                return Err(Error::InvalidParameter(format!("log grid `{spec}` needs lo > 0")));
            }
            if n == 1 {
                return Ok(vec![lo]);
            }
            let step = |i: usize| i as f64 / (n - 1) as f64;
            let mut g: Vec<f64> = (0..n)
                .map(|i| {
                    if log {
                        (lo.ln() + (hi.ln() - lo.ln()) * step(i)).exp()
                    } else {
                        lo + (hi - lo) * step(i)
                    }
                })
                .collect();
            g[0] = lo;
            g[n - 1] = hi;
            Ok(g)
        }
        _ => Err(bad()),
    }
}

pub const EPSILON_MIN: f64 = 1e-8;
pub const EPSILON_MAX: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Inversion {
    pub epsilon: f64,
    pub achieved: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Largest ε such that the risk stays at or below `target` on the whole of
/// `[ε_min, ε]`, i.e. the first upward crossing of `target`.
pub fn invert_epsilon(
    ctx: &RiskContext,
    target: f64,
    mechanism: Mechanism,
    delta: Option<f64>,
    sensitivity: f64,
) -> Result<Inversion> {
    let hi_eps = if mechanism == Mechanism::GaussianAdp {
        1.0 - 1e-9
    } else {
        EPSILON_MAX
    };
    let eval = |e: f64| -> Result<f64> {
        Ok(ctx.evaluate(&PrivacyParams::new(mechanism, e, delta, sensitivity)?)?.value)
    };
    let n = 481;
    let grid: Vec<f64> = (0..n)
        .map(|i| (EPSILON_MIN.ln() + (hi_eps.ln() - EPSILON_MIN.ln()) * i as f64 / (n - 1) as f64).exp())
        .collect();
    let values = grid.iter().map(|&e| eval(e)).collect::<Result<Vec<_>>>()?;
    let lower = values[0];
    let upper = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(target > lower && target < upper) {
        return Err(Error::TargetOutOfRange { target, lower, upper });
    }
    let i = values.iter().position(|&v| v > target).expect("target below maximum");
    let (mut lo, mut hi) = (grid[i - 1], grid[i]);
    let mut f_lo = values[i - 1];
    for _ in 0..200 {
        if hi - lo <= 1e-10 * lo.max(1e-3) {
            break;
        }
        let mid = (lo * hi).sqrt();
        let v = eval(mid)?;
        if v > target {
            hi = mid;
        } else {
            lo = mid;
            f_lo = v;
        }
    }
    Ok(Inversion {
        epsilon: lo,
        achieved: f_lo,
        lower,
        upper,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lap(eps: f64) -> NoiseModel {
        laplace_noise(eps).unwrap()
    }

    fn cell(counts: &[u64]) -> CellRecord {
        CellRecord {
            key: vec!["x".into()],
            counts: counts.to_vec(),
        }
    }

    #[test]
    fn local_reference_values() {
        // references from 40-digit evaluation of the tail products
        let r = rho_local(&cell(&[10, 0]), &lap(1.0));
        assert!(r.exact);
        assert!((r.risk.value - 0.696_708_594_211_180_1).abs() < 1e-14);
        let g = rho_local(&cell(&[10, 0]), &NoiseModel::Gaussian { sigma: 1.0 });
        assert!((g.risk.value - 0.691_462_461_274_013_1).abs() < 1e-14);
        let h = rho_local(&cell(&[3, 4]), &lap(1.0));
        assert!(!h.exact);
        assert_eq!(h.risk.scenario1, 0.0);
    }

    #[test]
    fn local_zero_noise_limit() {
        let n = lap(1e9);
        assert!((rho_local(&cell(&[10, 0]), &n).risk.value - 1.0).abs() < 1e-12);
        assert!(rho_local(&cell(&[5, 95]), &n).risk.value < 1e-12);
    }

    #[test]
    fn expected_matches_local_on_homogeneous() {
        let t = FrequencyTable::from_counts(vec![vec![10, 0]; 4]).unwrap();
        let r = rho_e_avg_laplace(&t, 1.0).unwrap();
        assert!((r.value - 0.696_708_594_211_180_1).abs() < 1e-14);
        assert_eq!(r.scenario8, 0.0);
        let h = rho_homog_avg(&t, &PrivacyParams::laplace(1.0).unwrap()).unwrap();
        assert!((h - r.value).abs() < 1e-15);
    }

    #[test]
    fn printed_binary_scenario8_term() {
        // cell (1,1): (0.5*0.5 + 0.5*0.5)(1 - 0.5e^{-0.5})(0.5e^{-0.5})
        let t = FrequencyTable::from_counts(vec![vec![1, 1]]).unwrap();
        let r = rho_e_avg_laplace_k2(&t, 1.0).unwrap();
        assert!((r.scenario8 - 0.105_647_734_781_728_07).abs() < 1e-15, "{}", r.scenario8);
        let g = rho_e_avg_laplace(&t, 1.0).unwrap();
        assert!((g.scenario8 - r.scenario8).abs() < 1e-15);
    }

    #[test]
    fn heterogeneous_asymptote() {
        // Scenario 8 vanishes; Scenario 1 keeps the resampling mass Σ p̂ⁿ.
        let t = FrequencyTable::from_counts(vec![vec![5, 95]]).unwrap();
        let r = rho_e_avg_laplace(&t, 1e4).unwrap();
        assert!(r.scenario8 < 1e-12);
        assert!((r.scenario1 - (0.05f64.powi(100) + 0.95f64.powi(100))).abs() < 1e-12);
        let t = FrequencyTable::from_counts(vec![vec![99, 1]]).unwrap();
        let r = rho_e_avg_laplace_k2(&t, 1e4).unwrap();
        assert!(r.scenario8 < 1e-12);
        assert!((r.scenario1 - 0.99f64.powi(100)).abs() < 1e-12);
        // balanced large cells do go to zero
        let t = FrequencyTable::from_counts(vec![vec![30, 30]]).unwrap();
        assert!(rho_e_avg_laplace(&t, 1e4).unwrap().value < 1e-12);
    }

    #[test]
    fn homogeneous_floor() {
        let t = FrequencyTable::from_counts(vec![vec![0, 7, 0]; 3]).unwrap();
        let v = rho_homog_avg(&t, &PrivacyParams::laplace(1e-9).unwrap()).unwrap();
        assert!((v - 0.125).abs() < 1e-6);
        let t = FrequencyTable::from_counts(vec![vec![4, 0]]).unwrap();
        let v = rho_e_avg_laplace(&t, 1e-9).unwrap().value;
        assert!((v - 0.25).abs() < 1e-6);
        let mixed = FrequencyTable::from_counts(vec![vec![4, 0], vec![1, 1]]).unwrap();
        assert!(matches!(
            rho_homog_avg(&mixed, &PrivacyParams::laplace(1.0).unwrap()),
            Err(Error::HeterogeneousCell)
        ));
    }

    #[test]
    fn shrinkage_singletons() {
        let hyper = DirichletHyper::new(vec![1.0, 1.0]).unwrap();
        let r = rho_s_avg_laplace(&[1, 1, 1], &hyper, 1.0).unwrap();
        assert!((r.value - 0.485_439_200_580_227_2).abs() < 1e-14);
        let p = rho_s_avg_laplace_k2(&[1, 1, 1], &hyper, 1.0).unwrap();
        assert!((p.value - r.value).abs() < 1e-14);
        let h3 = DirichletHyper::new(vec![0.3, 2.0, 5.0]).unwrap();
        let r = rho_s_avg_laplace(&[1], &h3, 1e-9).unwrap();
        assert!((r.value - 0.125).abs() < 1e-6);
    }

    #[test]
    fn dirichlet_masses() {
        // n = 1: Σ α_k / α· = 1 and Σ (α· - α_k)/α· = K - 1
        let h = DirichletHyper::new(vec![0.7, 2.0, 3.3]).unwrap();
        assert!((dirichlet_homogeneous_mass(&h, 1) - 1.0).abs() < 1e-14);
        assert!((dirichlet_scenario8_mass(&h, 1) - 2.0).abs() < 1e-13);
        // Beta(1,1): E[p^n + (1-p)^n] = 2/(n+1)
        let b = DirichletHyper::new(vec![1.0, 1.0]).unwrap();
        for n in 1..30 {
            assert!((dirichlet_homogeneous_mass(&b, n) - 2.0 / (n as f64 + 1.0)).abs() < 1e-13);
        }
    }

    #[test]
    fn size_model_pmfs() {
        let p = CellSizeModel::poisson(4.6).unwrap();
        let total: f64 = (0..200).map(|n| p.pmf(n)).sum();
        assert!((total - 1.0).abs() < 1e-13);
        let nb = CellSizeModel::negbin(2.0, 0.5).unwrap();
        let total: f64 = (0..400).map(|n| nb.pmf(n)).sum();
        assert!((total - 1.0).abs() < 1e-13);
        // mean r(1-λ)/λ
        let mean: f64 = (0..400).map(|n| n as f64 * nb.pmf(n)).sum();
        assert!((mean - 2.0).abs() < 1e-12);
        assert!(CellSizeModel::negbin(2.0, 1.0).is_err());
        assert!(CellSizeModel::poisson(0.0).is_err());
    }

    #[test]
    fn series_truncation_and_degenerate_limit() {
        let hyper = DirichletHyper::new(vec![1.0, 1.0]).unwrap();
        let model = CellSizeModel::poisson(1e-6).unwrap();
        let s = rho_g_laplace(&hyper, &model, 1.0, &SeriesOptions::zero_truncated()).unwrap();
        let single = rho_s_avg_laplace(&[1], &hyper, 1.0).unwrap();
        assert!((s.risk.value - single.value).abs() < 1e-5);
        let s = rho_g_laplace(&hyper, &CellSizeModel::poisson(4.6).unwrap(), 1.0, &SeriesOptions::default()).unwrap();
        assert!(s.terms > 20 && s.terms < 60, "terms={}", s.terms);
        let capped = SeriesOptions {
            cap: 5,
            ..SeriesOptions::default()
        };
        assert!(matches!(
            rho_g_laplace(&hyper, &CellSizeModel::poisson(4.6).unwrap(), 1.0, &capped),
            Err(Error::SeriesCap { .. })
        ));
    }

    #[test]
    fn printed_global_forms_agree() {
        let hyper = DirichletHyper::new(vec![2.0, 3.0]).unwrap();
        let opts = SeriesOptions::default();
        for model in [CellSizeModel::poisson(4.6).unwrap(), CellSizeModel::negbin(2.0, 0.3).unwrap()] {
            for eps in [0.01, 0.5, 3.0] {
                let g = rho_g_laplace(&hyper, &model, eps, &opts).unwrap();
                let p = rho_g_laplace_k2(&hyper, &model, eps, &opts).unwrap();
                assert!((g.risk.value - p.risk.value).abs() < 1e-12);
                let sigma = 1.0 / eps;
                let g = rho_g(&hyper, &model, &NoiseModel::Gaussian { sigma }, &opts).unwrap();
                let p = rho_g_gaussian_k2(&hyper, &model, sigma, &opts).unwrap();
                assert!((g.risk.value - p.risk.value).abs() < 1e-12);
                assert!((g.risk.scenario8 - p.risk.scenario8).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn argmax() {
        assert!((second_term_argmax(3).unwrap() - 0.462_098_120_373_296_9).abs() < 1e-15);
        assert!((second_term_argmax(4).unwrap() - 0.439_444_915_467_243_9).abs() < 1e-15);
        assert!(second_term_argmax(2).is_err());
    }

    #[test]
    fn laplace_size_factor_thresholds() {
        // the quoted thresholds are these values at eps = 1, rounded to 3 places
        let f = |n: f64| 1.0 - 0.5 * ((0.5 - n) * 1.0f64).exp();
        let r3 = |x: f64| (x * 1000.0).round() / 1000.0;
        assert!(f(2.0) >= 0.888);
        assert_eq!(r3(f(3.0)), 0.959);
        assert_eq!(r3(f(4.0)), 0.985);
        assert!(f(3.0) > 0.9589 && f(4.0) > 0.9849);
        for n in 5..50 {
            assert!(f(n as f64) >= 0.985);
        }
    }

    #[test]
    fn grids() {
        let g = parse_grid("0.001:100:log50").unwrap();
        assert_eq!(g.len(), 50);
        assert_eq!(g[0], 0.001);
        assert_eq!(g[49], 100.0);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(parse_grid("0:1:lin3").unwrap(), vec![0.0, 0.5, 1.0]);
        assert_eq!(parse_grid("1e-5,0.001,1").unwrap(), vec![1e-5, 1e-3, 1.0]);
        assert!(parse_grid("0:1:log3").is_err());
        assert!(parse_grid("a:b").is_err());
    }

    #[test]
    fn curve_csv_and_sorting() {
        let t = FrequencyTable::from_counts(vec![vec![10, 0]; 3]).unwrap();
        let ctx = RiskContext::Expected(t);
        let c = risk_curve(&ctx, Mechanism::GaussianPdp, &[2.0, 1.0], &[0.1, 1e-5], 1.0).unwrap();
        assert_eq!(c.rows.len(), 4);
        assert_eq!(c.rows[0].epsilon, 1.0);
        assert_eq!(c.rows[0].delta, Some(1e-5));
        let csv = c.to_csv();
        assert!(csv.starts_with(CURVE_HEADER));
        assert_eq!(csv.lines().count(), 5);
        let adp = risk_curve(&ctx, Mechanism::GaussianAdp, &[0.5, 2.0], &[1e-5], 1.0).unwrap();
        assert_eq!(adp.rows.len(), 1);
        assert_eq!(format_sig(0.696_708_594_211_180_1, 12), "0.696708594211");
        assert_eq!(format_sig(100.0, 12), "100");
    }

    #[test]
    fn inversion_round_trip() {
        let t = FrequencyTable::from_counts(vec![vec![10, 0]; 5]).unwrap();
        let ctx = RiskContext::Expected(t);
        let inv = invert_epsilon(&ctx, 0.696_708_594_211_180_1, Mechanism::Laplace, None, 1.0).unwrap();
        assert!((inv.epsilon - 1.0).abs() < 1e-6, "{inv:?}");
        match invert_epsilon(&ctx, 0.2, Mechanism::Laplace, None, 1.0) {
            Err(Error::TargetOutOfRange { lower, .. }) => assert!((lower - 0.25).abs() < 1e-6),
            other => panic!("{other:?}"),
        }
        let inv = invert_epsilon(&ctx, 0.999, Mechanism::Laplace, None, 1.0).unwrap();
        assert!(inv.epsilon.is_finite() && inv.epsilon > 5.0);
    }
}
