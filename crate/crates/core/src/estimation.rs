//! Method-of-moments estimates of the Beta/Dirichlet prior on cell
//! proportions, and cell-size distribution fits.
//!
//! The variance moment is the spread of the per-cell counts around their
//! fitted means, `s² = Σᵢ (n_{i,k} − nᵢ p̂_k)²`. Equating it to the binomial
//! variance `n p̂ (1 − p̂)` instead zeroes the denominator; that case is the
//! [`Error::NoOverdispersion`] path.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::risk::{CellSizeModel, DirichletHyper};
use crate::tabulation::FrequencyTable;

/// Sufficient statistics for the moment equations.
#[derive(Debug, Clone, PartialEq)]
pub struct MomInputs {
    /// Column sums `n_{·k}`.
    pub column_sums: Vec<f64>,
    /// Grand total `n`.
    pub total: f64,
    /// `Σᵢ nᵢ²`.
    pub sum_sq_sizes: f64,
    /// `Σᵢ (n_{i,k} − nᵢ p̂_k)²` per category.
    pub spread: Vec<f64>,
    pub cells: usize,
}

impl MomInputs {
    pub fn from_table(table: &FrequencyTable) -> Result<Self> {
        if table.m() < 2 {
            return Err(Error::InvalidParameter(format!(
                "moment estimation needs at least 2 cells, got {}",
                table.m()
            )));
        }
        let k = table.k();
        let mut column_sums = vec![0.0; k];
        let mut sum_sq_sizes = 0.0;
        for cell in table.cells() {
            for (s, &c) in column_sums.iter_mut().zip(&cell.counts) {
                *s += c as f64;
            }
            sum_sq_sizes += (cell.n() as f64).powi(2);
        }
        let total: f64 = column_sums.iter().sum();
        let mut spread = vec![0.0; k];
        for cell in table.cells() {
            let n = cell.n() as f64;
            for j in 0..k {
                let p = column_sums[j] / total;
                spread[j] += (cell.counts[j] as f64 - n * p).powi(2);
            }
        }
        Ok(Self {
            column_sums,
            total,
            sum_sq_sizes,
            spread,
            cells: table.m(),
        })
    }

    pub fn proportion(&self, k: usize) -> f64 {
        self.column_sums[k] / self.total
    }

    /// Per-category estimate `α̂_k`.
    fn alpha_k(&self, k: usize) -> Result<f64> {
        let p = self.proportion(k);
        if p <= 0.0 || p >= 1.0 {
            return Err(Error::DegenerateProportion(p));
        }
        let s2 = self.spread[k];
        let denom = s2 - p * (1.0 - p) * self.total;
        if !(denom > 0.0) {
            return Err(Error::NoOverdispersion(denom));
        }
        let a = (p * p * (1.0 - p) * self.sum_sq_sizes - p * s2) / denom;
        if !(a > 0.0) {
            return Err(Error::NonPositiveEstimate { index: k, value: a });
        }
        Ok(a)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomEstimate {
    pub alpha: Vec<f64>,
    /// `max − min` of the implied totals `α̂_k / p̂_k`.
    pub alpha_dot_spread: f64,
}

impl MomEstimate {
    pub fn hyper(&self) -> Result<DirichletHyper> {
        DirichletHyper::new(self.alpha.clone())
    }
}

/// Beta prior for a binary sensitive attribute.
pub fn mom_beta(table: &FrequencyTable) -> Result<(f64, f64)> {
    if table.k() != 2 {
        return Err(Error::NotBinary(table.k()));
    }
    let m = MomInputs::from_table(table)?;
    let p = m.proportion(0);
    if p <= 0.0 || p >= 1.0 {
        return Err(Error::DegenerateProportion(p));
    }
    let s2 = m.spread[0];
    let denom = s2 - m.total * p * (1.0 - p);
    if !(denom > 0.0) {
        return Err(Error::NoOverdispersion(denom));
    }
    let a1 = (p * p * (1.0 - p) * m.sum_sq_sizes - p * s2) / denom;
    let a2 = (p * (1.0 - p).powi(2) * m.sum_sq_sizes - (1.0 - p) * s2) / denom;
    for (index, value) in [(0, a1), (1, a2)] {
        if !(value > 0.0) {
            return Err(Error::NonPositiveEstimate { index, value });
        }
    }
    Ok((a1, a2))
}

/// Dirichlet prior, one moment equation per category.
pub fn mom_dirichlet(table: &FrequencyTable) -> Result<MomEstimate> {
    let m = MomInputs::from_table(table)?;
    let alpha = (0..table.k()).map(|k| m.alpha_k(k)).collect::<Result<Vec<_>>>()?;
    let implied: Vec<f64> = alpha.iter().enumerate().map(|(k, a)| a / m.proportion(k)).collect();
    let max = implied.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = implied.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(MomEstimate {
        alpha,
        alpha_dot_spread: max - min,
    })
}

/// Model moments `(E n_{·k}, Var n_{·k})` of the Dirichlet-multinomial.
pub fn dirichlet_moments(alpha: &[f64], k: usize, total: f64, sum_sq_sizes: f64) -> (f64, f64) {
    let a_dot: f64 = alpha.iter().sum();
    let p = alpha[k] / a_dot;
    let mean = total * p;
    let var = p * (1.0 - p) * (sum_sq_sizes + a_dot * total) / (1.0 + a_dot);
    (mean, var)
}

fn check_nonempty(sizes: &[u64]) -> Result<()> {
    if sizes.is_empty() {
        Err(Error::InvalidParameter("no cell sizes".into()))
    } else {
        Ok(())
    }
}

fn mean_var(sizes: &[u64]) -> (f64, f64) {
    let m = sizes.len() as f64;
    let mean = sizes.iter().map(|&n| n as f64).sum::<f64>() / m;
    let var = sizes.iter().map(|&n| (n as f64 - mean).powi(2)).sum::<f64>() / m;
    (mean, var)
}

/// Poisson MLE, the sample mean.
pub fn fit_poisson(sizes: &[u64]) -> Result<f64> {
    check_nonempty(sizes)?;
    Ok(mean_var(sizes).0)
}

/// Zero-truncated Poisson MLE: solves `λ / (1 − e^{−λ}) = mean` by Newton.
pub fn fit_poisson_zero_truncated(sizes: &[u64]) -> Result<f64> {
    check_nonempty(sizes)?;
    if sizes.contains(&0) {
        return Err(Error::InvalidParameter("zero-truncated fit needs sizes >= 1".into()));
    }
    let (mean, _) = mean_var(sizes);
    if mean <= 1.0 {
        return Err(Error::InvalidParameter(
            "all sizes equal 1; zero-truncated lambda is 0".into(),
        ));
    }
    let mut lambda = mean;
    for _ in 0..100 {
        let e = (-lambda).exp();
        let g = lambda - mean * (1.0 - e);
        let dg = 1.0 - mean * e;
        let next = lambda - g / dg;
        let next = if next > 0.0 { next } else { lambda / 2.0 };
        if (next - lambda).abs() <= 1e-14 * lambda {
            return Ok(next);
        }
        lambda = next;
    }
    Ok(lambda)
}

/// Negative binomial by moments, `λ̂ = mean/var`, `r̂ = mean λ̂ / (1 − λ̂)`.
pub fn fit_negbin(sizes: &[u64]) -> Result<(f64, f64)> {
    check_nonempty(sizes)?;
    let (mean, variance) = mean_var(sizes);
    if variance <= mean {
        return Err(Error::NoSizeOverdispersion { mean, variance });
    }
    let lambda = mean / variance;
    Ok((mean * lambda / (1.0 - lambda), lambda))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SizeFamily {
    Poisson,
    PoissonZeroTruncated,
    Negbin,
}

/// Fit a size model from the table's cell sizes.
pub fn fit_sizes(sizes: &[u64], family: SizeFamily) -> Result<CellSizeModel> {
    match family {
        SizeFamily::Poisson => CellSizeModel::poisson(fit_poisson(sizes)?),
        SizeFamily::PoissonZeroTruncated => CellSizeModel::poisson(fit_poisson_zero_truncated(sizes)?),
        SizeFamily::Negbin => {
            let (r, lambda) = fit_negbin(sizes)?;
            CellSizeModel::negbin(r, lambda)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{substream, DOMAIN_MC};
    use crate::synthetic::{dirichlet_multinomial_table, positive_sizes, sample_size};
    use rand::Rng;

    fn beta_binomial(alpha: &[f64], m: usize, seed: u64) -> FrequencyTable {
        let mut rng = substream(seed, DOMAIN_MC, 99);
        let sizes: Vec<u64> = (0..m).map(|_| rng.random_range(5..=50)).collect();
        dirichlet_multinomial_table(alpha, &sizes, seed).unwrap()
    }

    #[test]
    fn beta_recovery_and_moment_equations() {
        let t = beta_binomial(&[2.0, 5.0], 2000, 7);
        let (a1, a2) = mom_beta(&t).unwrap();
        assert!((a1 / 2.0 - 1.0).abs() < 0.2, "a1={a1}");
        assert!((a2 / 5.0 - 1.0).abs() < 0.2, "a2={a2}");
        let m = MomInputs::from_table(&t).unwrap();
        let (mean, var) = dirichlet_moments(&[a1, a2], 0, m.total, m.sum_sq_sizes);
        assert!((mean / m.column_sums[0] - 1.0).abs() < 1e-8);
        assert!((var / m.spread[0] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn dirichlet_agrees_with_beta_at_k2() {
        for seed in 0..5 {
            let t = beta_binomial(&[1.5, 3.0], 300, seed);
            let (a1, a2) = mom_beta(&t).unwrap();
            let d = mom_dirichlet(&t).unwrap();
            assert!((d.alpha[0] - a1).abs() <= 1e-10 * a1);
            assert!((d.alpha[1] - a2).abs() <= 1e-10 * a2);
        }
    }

    #[test]
    fn dirichlet_recovery() {
        let t = beta_binomial(&[1.0, 1.0, 1.0], 5000, 11);
        let d = mom_dirichlet(&t).unwrap();
        for a in &d.alpha {
            assert!((a - 1.0).abs() < 0.25, "{:?}", d.alpha);
        }
        assert!(d.alpha_dot_spread >= 0.0);
        let m = MomInputs::from_table(&t).unwrap();
        for k in 0..3 {
            let implied = d.alpha[k] / m.proportion(k);
            let mut a = vec![0.0; 3];
            for (j, aj) in a.iter_mut().enumerate() {
                *aj = implied * m.proportion(j);
            }
            let (_, var) = dirichlet_moments(&a, k, m.total, m.sum_sq_sizes);
            assert!((var / m.spread[k] - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn underdispersed_and_degenerate() {
        // each cell exactly at the pooled proportion: s² = 0
        let t = FrequencyTable::from_counts((1..50).map(|i| vec![i, i]).collect()).unwrap();
        assert!(matches!(mom_beta(&t), Err(Error::NoOverdispersion(_))));
        assert!(matches!(mom_dirichlet(&t), Err(Error::NoOverdispersion(_))));
        let t = FrequencyTable::from_counts(vec![vec![3, 0], vec![5, 0]]).unwrap();
        assert!(matches!(mom_beta(&t), Err(Error::DegenerateProportion(_))));
        let t = FrequencyTable::from_counts(vec![vec![3, 1, 0]]).unwrap();
        assert!(mom_dirichlet(&t).is_err());
        let t = FrequencyTable::from_counts(vec![vec![3, 1, 0], vec![1, 2, 3]]).unwrap();
        assert!(mom_beta(&t).is_err());
    }

    #[test]
    fn binomial_data_has_no_overdispersion() {
        // common p = 0.3 in every cell; the denominator hovers near zero
        let mut rng = substream(5, DOMAIN_MC, 1);
        let mut errors = 0;
        for rep in 0..40 {
            let counts: Vec<Vec<u64>> = (0..500)
                .map(|_| {
                    let n = 20u64;
                    let x = (0..n).filter(|_| rng.random::<f64>() < 0.3).count() as u64;
                    vec![x, n - x]
                })
                .collect();
            let t = FrequencyTable::from_counts(counts).unwrap();
            match mom_beta(&t) {
                Err(_) => errors += 1,
                Ok((a1, _)) => assert!(a1 > 5.0, "rep {rep}: a1={a1}"),
            }
        }
        assert!(errors >= 10, "errors={errors}");
    }

    #[test]
    fn poisson_fits() {
        assert_eq!(fit_poisson(&[3, 3, 3]).unwrap(), 3.0);
        assert_eq!(fit_poisson(&[1, 2, 3, 6]).unwrap(), 3.0);
        assert!(fit_poisson(&[]).is_err());
        // zero-truncated mean λ/(1−e^{−λ}) inverts back
        let lam = fit_poisson_zero_truncated(&[1, 2, 3, 6]).unwrap();
        assert!((lam / (1.0 - (-lam).exp()) - 3.0).abs() < 1e-12);
        assert!(fit_poisson_zero_truncated(&[1, 1]).is_err());
    }

    #[test]
    fn negbin_recovery() {
        let model = CellSizeModel::negbin(3.0, 0.4).unwrap();
        let mut rng = substream(8, DOMAIN_MC, 0);
        let sizes: Vec<u64> = (0..10_000).map(|_| sample_size(&model, &mut rng)).collect();
        let (r, lambda) = fit_negbin(&sizes).unwrap();
        assert!((r / 3.0 - 1.0).abs() < 0.15, "r={r}");
        assert!((lambda / 0.4 - 1.0).abs() < 0.15, "lambda={lambda}");
        assert!(matches!(
            fit_negbin(&[4, 4, 4]),
            Err(Error::NoSizeOverdispersion { .. })
        ));
    }

    #[test]
    fn poisson_sizes_hit_the_negbin_error_often() {
        let model = CellSizeModel::poisson(4.6).unwrap();
        let errors = (0..200)
            .filter(|&s| fit_negbin(&positive_sizes(&model, 2000, s)).is_err())
            .count();
        // zero-truncation shrinks the variance below the mean
        assert!(errors > 150, "errors={errors}");
        let errors = (0..200)
            .filter(|&s| {
                let mut rng = substream(s, DOMAIN_MC, 3);
                let sizes: Vec<u64> = (0..2000).map(|_| sample_size(&model, &mut rng)).collect();
                fit_negbin(&sizes).is_err()
            })
            .count();
        assert!((60..=140).contains(&errors), "errors={errors}");
    }

    #[test]
    fn duplication_invariance() {
        let t = beta_binomial(&[2.0, 5.0], 100, 3);
        let mut counts: Vec<Vec<u64>> = t.cells().iter().map(|c| c.counts.clone()).collect();
        counts.extend(counts.clone());
        let d = FrequencyTable::from_counts(counts).unwrap();
        let (a, b) = (MomInputs::from_table(&t).unwrap(), MomInputs::from_table(&d).unwrap());
        assert_eq!(a.proportion(0), b.proportion(0));
        let sizes = t.sizes();
        assert_eq!(fit_poisson(&sizes).unwrap(), fit_poisson(&d.sizes()).unwrap());
        let (r1, l1) = fit_negbin(&sizes).unwrap();
        let (r2, l2) = fit_negbin(&d.sizes()).unwrap();
        assert!((r1 - r2).abs() < 1e-12 * r1 && (l1 - l2).abs() < 1e-12);
    }

    #[test]
    fn json_shapes() {
        let e = MomEstimate {
            alpha: vec![1.0, 2.0],
            alpha_dot_spread: 0.5,
        };
        assert_eq!(serde_json::to_string(&e).unwrap(), r#"{"alpha":[1.0,2.0],"alpha_dot_spread":0.5}"#);
        let m = CellSizeModel::negbin(3.0, 0.4).unwrap();
        assert_eq!(serde_json::to_string(&m).unwrap(), r#"{"family":"negbin","r":3.0,"lambda":0.4}"#);
        let p = CellSizeModel::poisson(4.6).unwrap();
        assert_eq!(serde_json::to_string(&p).unwrap(), r#"{"family":"poisson","lambda":4.6}"#);
    }
}
