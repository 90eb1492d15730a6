//! Samplers for the data-generating layers (proportions, counts, cell sizes)
//! and synthetic tables built from them.

use rand::Rng;
use rand_distr::{Binomial, Distribution, Gamma, Poisson};

use crate::error::{Error, Result};
use crate::risk::CellSizeModel;
use crate::rng::{substream, DOMAIN_SYNTH};
use crate::tabulation::FrequencyTable;

/// `p ~ Dirichlet(α)` through normalized Gamma draws.
pub fn sample_dirichlet<R: Rng + ?Sized>(alpha: &[f64], rng: &mut R) -> Vec<f64> {
    let gammas: Vec<Gamma<f64>> = alpha
        .iter()
        .map(|&a| Gamma::new(a, 1.0).expect("alpha validated positive"))
        .collect();
    loop {
        let g: Vec<f64> = gammas.iter().map(|d| d.sample(rng)).collect();
        let total: f64 = g.iter().sum();
        if total > 0.0 {
            return g.into_iter().map(|x| x / total).collect();
        }
    }
}

/// `counts ~ Multinomial(n, p)` by sequential conditional binomials.
pub fn sample_multinomial<R: Rng + ?Sized>(n: u64, p: &[f64], rng: &mut R) -> Vec<u64> {
    let mut out = vec![0u64; p.len()];
    let mut left = n;
    let mut mass = 1.0;
    for (k, &pk) in p.iter().enumerate() {
        if left == 0 {
            break;
        }
        if k + 1 == p.len() {
            out[k] = left;
            break;
        }
        let q = if mass > 0.0 { (pk / mass).clamp(0.0, 1.0) } else { 0.0 };
        let x = if q >= 1.0 {
            left
        } else if q <= 0.0 {
            0
        } else {
            Binomial::new(left, q).expect("valid binomial").sample(rng)
        };
        out[k] = x;
        left -= x;
        mass -= pk;
    }
    out
}

/// One draw of `n ~ f(·; β)`; the negative binomial is sampled as a
/// Gamma–Poisson mixture.
pub fn sample_size<R: Rng + ?Sized>(model: &CellSizeModel, rng: &mut R) -> u64 {
    let rate = match *model {
        CellSizeModel::Poisson { lambda } => lambda,
        CellSizeModel::Negbin { r, lambda } => {
            Gamma::new(r, (1.0 - lambda) / lambda).expect("validated").sample(rng)
        }
    };
    if rate <= 0.0 {
        return 0;
    }
    Poisson::new(rate).expect("positive rate").sample(rng) as u64
}

/// Size draw conditioned on `n >= 1`. Small Poisson rates walk the truncated
/// pmf directly; everything else uses rejection.
pub fn sample_positive_size<R: Rng + ?Sized>(model: &CellSizeModel, rng: &mut R) -> u64 {
    if let CellSizeModel::Poisson { lambda } = *model {
        if lambda < 1.0 {
            let mut t = rng.random::<f64>() * -(-lambda).exp_m1();
            let mut p = lambda * (-lambda).exp();
            let mut k = 1u64;
            while t > p && p > 0.0 {
                t -= p;
                k += 1;
                p *= lambda / k as f64;
            }
            return k;
        }
    }
    loop {
        let n = sample_size(model, rng);
        if n >= 1 {
            return n;
        }
    }
}

/// Cells with the given sizes and Dirichlet-multinomial counts.
pub fn dirichlet_multinomial_table(alpha: &[f64], sizes: &[u64], seed: u64) -> Result<FrequencyTable> {
    if alpha.len() < 2 || alpha.iter().any(|a| !(*a > 0.0)) {
        return Err(Error::InvalidParameter("alpha needs >= 2 positive components".into()));
    }
    let mut rng = substream(seed, DOMAIN_SYNTH, 0);
    let counts = sizes
        .iter()
        .map(|&n| {
            let p = sample_dirichlet(alpha, &mut rng);
            sample_multinomial(n, &p, &mut rng)
        })
        .collect();
    FrequencyTable::from_counts(counts)
}

/// Homogeneous cells of the given sizes, category drawn uniformly from `0..k`.
pub fn homogeneous_table(sizes: &[u64], k: usize, seed: u64) -> Result<FrequencyTable> {
    let mut rng = substream(seed, DOMAIN_SYNTH, 1);
    let counts = sizes
        .iter()
        .map(|&n| {
            let mut c = vec![0u64; k];
            c[rng.random_range(0..k)] = n;
            c
        })
        .collect();
    FrequencyTable::from_counts(counts)
}

/// `m` positive draws from the size model.
pub fn positive_sizes(model: &CellSizeModel, m: usize, seed: u64) -> Vec<u64> {
    let mut rng = substream(seed, DOMAIN_SYNTH, 2);
    (0..m).map(|_| sample_positive_size(model, &mut rng)).collect()
}
