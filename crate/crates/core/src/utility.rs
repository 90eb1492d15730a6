//! Total variation distance between original and sanitized k-way QID marginals.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mechanisms::{postprocess_counts, sanitize, PrivacyParams, SanitizedTable};
use crate::rng::{derive_seed, DOMAIN_UTILITY};
use crate::tabulation::FrequencyTable;

pub const DEFAULT_REPS: usize = 100;
pub const TVD_HEADER: &str = "k,marginal,tvd_mean,tvd_q1,tvd_median,tvd_q3";

/// A subset of QID positions, kept sorted.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct MarginalSpec {
    indices: Vec<usize>,
}

impl MarginalSpec {
    pub fn new(mut indices: Vec<usize>, p: usize) -> Result<Self> {
        indices.sort_unstable();
        if indices.is_empty() {
            return Err(Error::InvalidParameter("marginal needs at least one QID".into()));
        }
        if indices.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidParameter(format!("repeated QID index in {indices:?}")));
        }
        if let Some(&i) = indices.iter().find(|&&i| i >= p) {
            return Err(Error::InvalidParameter(format!("QID index {i} out of range for {p} QIDs")));
        }
        Ok(MarginalSpec { indices })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn k(&self) -> usize {
        self.indices.len()
    }

    pub fn label(&self, qid_names: &[String]) -> String {
        self.indices
            .iter()
            .map(|&i| qid_names[i].as_str())
            .collect::<Vec<_>>()
            .join("+")
    }

    fn project(&self, key: &[String]) -> Vec<String> {
        self.indices.iter().map(|&i| key[i].clone()).collect()
    }
}

/// All `C(p, k)` subsets of size `k`, in lexicographic order.
pub fn all_marginals(p: usize, k: usize) -> Vec<MarginalSpec> {
    let mut out = Vec::new();
    if k == 0 || k > p {
        return out;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(MarginalSpec { indices: idx.clone() });
        let mut i = k;
        while i > 0 && idx[i - 1] == p - k + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return out;
        }
        idx[i - 1] += 1;
        for j in i..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Marginal counts over `(key, cell total)` pairs, keyed by the projected QID values.
pub fn marginal_counts<'a>(
    cells: impl IntoIterator<Item = (&'a [String], u64)>,
    spec: &MarginalSpec,
) -> BTreeMap<Vec<String>, u64> {
    let mut out = BTreeMap::new();
    for (key, n) in cells {
        *out.entry(spec.project(key)).or_insert(0) += n;
    }
    out
}

/// Re-marginalize a marginal computed under `from` down to `to ⊆ from`.
pub fn marginalize(
    counts: &BTreeMap<Vec<String>, u64>,
    from: &MarginalSpec,
    to: &MarginalSpec,
) -> Result<BTreeMap<Vec<String>, u64>> {
    let pos = to
        .indices
        .iter()
        .map(|i| {
            from.indices
                .iter()
                .position(|j| j == i)
                .ok_or_else(|| Error::InvalidParameter(format!("QID {i} not in source marginal")))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = BTreeMap::new();
    for (key, &n) in counts {
        let sub: Vec<String> = pos.iter().map(|&p| key[p].clone()).collect();
        *out.entry(sub).or_insert(0) += n;
    }
    Ok(out)
}

/// Normalize marginal counts; errors on a zero total.
pub fn normalize(counts: &BTreeMap<Vec<String>, u64>) -> Result<BTreeMap<Vec<String>, f64>> {
    let total: u64 = counts.values().sum();
    if total == 0 {
        return Err(Error::TvdInput("marginal total is zero".into()));
    }
    Ok(counts.iter().map(|(k, &n)| (k.clone(), n as f64 / total as f64)).collect())
}

/// Probability vector of a marginal of an integer-count table.
pub fn marginal_probs(keys: &[Vec<String>], counts: &[Vec<u64>], spec: &MarginalSpec) -> Result<BTreeMap<Vec<String>, f64>> {
    if keys.len() != counts.len() {
        return Err(Error::InvalidParameter("keys and counts differ in length".into()));
    }
    let cells = keys
        .iter()
        .zip(counts)
        .map(|(k, c)| (k.as_slice(), c.iter().sum::<u64>()));
    normalize(&marginal_counts(cells, spec))
}

/// Half the L1 distance between two probability vectors.
pub fn tvd(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::TvdInput(format!("lengths {} and {} differ", p.len(), q.len())));
    }
    for v in [p, q] {
        let s: f64 = v.iter().sum();
        if (s - 1.0).abs() > 1e-9 || v.iter().any(|x| !(*x >= 0.0)) {
            return Err(Error::TvdInput(format!("not a probability vector (sum {s})")));
        }
    }
    Ok(0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>())
}

/// TVD between two marginals, aligned on the union of their keys.
pub fn tvd_maps(p: &BTreeMap<Vec<String>, f64>, q: &BTreeMap<Vec<String>, f64>) -> Result<f64> {
    let mut a = Vec::new();
    let mut b = Vec::new();
    for key in p.keys().chain(q.keys().filter(|k| !p.contains_key(*k))) {
        a.push(p.get(key).copied().unwrap_or(0.0));
        b.push(q.get(key).copied().unwrap_or(0.0));
    }
    tvd(&a, &b)
}

/// Type-7 sample quantile of sorted data.
pub fn quantile(sorted: &[f64], prob: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * prob;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Quartiles {
    pub mean: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
}

impl Quartiles {
    pub fn of(values: &[f64]) -> Self {
        let mut s = values.to_vec();
        s.sort_by(f64::total_cmp);
        Quartiles {
            mean: s.iter().sum::<f64>() / s.len() as f64,
            q1: quantile(&s, 0.25),
            median: quantile(&s, 0.5),
            q3: quantile(&s, 0.75),
        }
    }
}

/// One marginal, summarized over replications.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TvdRow {
    pub k: usize,
    pub marginal: String,
    pub spec: MarginalSpec,
    pub tvd: Quartiles,
}

/// Quartiles of the per-marginal mean TVDs for one k.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KSummary {
    pub k: usize,
    pub marginals: usize,
    pub tvd: Quartiles,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TvdReport {
    pub reps: usize,
    pub rows: Vec<TvdRow>,
    pub summary: Vec<KSummary>,
}

impl TvdReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(TVD_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.k, r.marginal, r.tvd.mean, r.tvd.q1, r.tvd.median, r.tvd.q3
            ));
        }
        out
    }

    pub fn summary_for(&self, k: usize) -> Option<&KSummary> {
        self.summary.iter().find(|s| s.k == k)
    }
}

fn check_schema(original: &FrequencyTable, sanitized: &SanitizedTable) -> Result<()> {
    if original.qid_names() != sanitized.qid_names.as_slice() {
        return Err(Error::SchemaMismatch("QID names differ".into()));
    }
    if original.categories() != sanitized.categories.as_slice() {
        return Err(Error::SchemaMismatch("sensitive categories differ".into()));
    }
    if original.m() != sanitized.cells.len() || original.cells().iter().zip(&sanitized.cells).any(|(a, b)| a.key != b.key) {
        return Err(Error::SchemaMismatch("cell keys differ".into()));
    }
    Ok(())
}

fn check_ks(ks: &[usize], p: usize) -> Result<()> {
    if ks.is_empty() {
        return Err(Error::InvalidParameter("no marginal sizes requested".into()));
    }
    if let Some(k) = ks.iter().find(|&&k| k == 0 || k > p) {
        return Err(Error::InvalidParameter(format!("marginal size {k} outside 1..={p}")));
    }
    Ok(())
}

/// TVD of every requested marginal for one sanitized release.
pub fn marginal_tvds(original: &FrequencyTable, sanitized: &SanitizedTable, ks: &[usize]) -> Result<Vec<(MarginalSpec, f64)>> {
    check_schema(original, sanitized)?;
    check_ks(ks, original.qid_names().len())?;
    let keys: Vec<Vec<String>> = original.cells().iter().map(|c| c.key.clone()).collect();
    let orig: Vec<Vec<u64>> = original.cells().iter().map(|c| c.counts.clone()).collect();
    let san = postprocess_counts(sanitized);
    let mut out = Vec::new();
    for &k in ks {
        for spec in all_marginals(original.qid_names().len(), k) {
            let p = marginal_probs(&keys, &orig, &spec)?;
            let q = marginal_probs(&keys, &san, &spec)?;
            out.push((spec, tvd_maps(&p, &q)?));
        }
    }
    Ok(out)
}

fn build_report(original: &FrequencyTable, per_rep: Vec<Vec<(MarginalSpec, f64)>>) -> TvdReport {
    let reps = per_rep.len();
    let names = original.qid_names();
    let rows: Vec<TvdRow> = (0..per_rep[0].len())
        .map(|j| {
            let spec = per_rep[0][j].0.clone();
            let values: Vec<f64> = per_rep.iter().map(|r| r[j].1).collect();
            TvdRow {
                k: spec.k(),
                marginal: spec.label(names),
                spec,
                tvd: Quartiles::of(&values),
            }
        })
        .collect();
    let mut ks: Vec<usize> = rows.iter().map(|r| r.k).collect();
    ks.dedup();
    let summary = ks
        .into_iter()
        .map(|k| {
            let means: Vec<f64> = rows.iter().filter(|r| r.k == k).map(|r| r.tvd.mean).collect();
            KSummary {
                k,
                marginals: means.len(),
                tvd: Quartiles::of(&means),
            }
        })
        .collect();
    TvdReport { reps, rows, summary }
}

/// Report for an already sanitized release (a single replication).
pub fn utility_report_for(original: &FrequencyTable, sanitized: &SanitizedTable, ks: &[usize]) -> Result<TvdReport> {
    Ok(build_report(original, vec![marginal_tvds(original, sanitized, ks)?]))
}

/// Average over `reps` independent sanitizations; replication `r` uses a seed
/// derived from `(seed, r)`.
pub fn utility_report(original: &FrequencyTable, params: &PrivacyParams, ks: &[usize], reps: usize, seed: u64) -> Result<TvdReport> {
    if reps == 0 {
        return Err(Error::InvalidParameter("reps must be >= 1".into()));
    }
    check_ks(ks, original.qid_names().len())?;
    let per_rep = (0..reps)
        .into_par_iter()
        .map(|r| {
            let s = sanitize(original, params, derive_seed(seed, DOMAIN_UTILITY, r as u64))?;
            marginal_tvds(original, &s, ks)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(build_report(original, per_rep))
}
