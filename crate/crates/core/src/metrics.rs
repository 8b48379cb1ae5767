//! Kendall-tau agreement, individual proportionality levels and their Monte
//! Carlo estimators.
//!
//! `long_ip` and `batch_ip` share one evaluation pass: every estimate in an
//! [`EvalReport`] comes from the same sampled batches, so `batch_ip ≤ long_ip`
//! holds exactly, not just in expectation.

use std::f64::consts::{PI, TAU};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::model::{
    angular_distance, binomial2, rank_batch, rank_by_weights, ItemBatch, Profile, Ranking,
    ScoringVector, TieBreak,
};
use crate::rules::RankingRule;
use crate::sampling::{sample_batch, ItemDistribution, SeedSpec};

/// Default number of Monte Carlo batches.
pub const DEFAULT_BATCHES: usize = 2000;

/// Number of unordered pairs ordered identically by both rankings.
///
/// Counts inversions of `r2`'s positions read in `r1`'s order with a merge
/// sort, `O(m log m)`.
pub fn kt_agreement_rankings(r1: &Ranking, r2: &Ranking) -> Result<usize> {
    if r1.len() != r2.len() {
        return Err(Error::LengthMismatch {
            expected: r1.len(),
            actual: r2.len(),
        });
    }
    let pos2 = r2.positions();
    let mut seq: Vec<usize> = r1.order().iter().map(|&i| pos2[i]).collect();
    let mut buf = vec![0; seq.len()];
    let inversions = count_inversions(&mut seq, &mut buf);
    Ok(binomial2(r1.len()) - inversions)
}

fn count_inversions(a: &mut [usize], buf: &mut [usize]) -> usize {
    let n = a.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut inv = {
        let (l, r) = a.split_at_mut(mid);
        let (bl, br) = buf.split_at_mut(mid);
        count_inversions(l, bl) + count_inversions(r, br)
    };
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if a[i] <= a[j] {
            buf[k] = a[i];
            i += 1;
        } else {
            buf[k] = a[j];
            inv += mid - i;
            j += 1;
        }
        k += 1;
    }
    buf[k..k + mid - i].copy_from_slice(&a[i..mid]);
    k += mid - i;
    buf[k..k + n - j].copy_from_slice(&a[j..n]);
    a.copy_from_slice(&buf[..n]);
    inv
}

/// `a_KT` between the rankings two scoring vectors induce on `batch`.
pub fn kt_agreement_vectors(
    theta: &ScoringVector,
    psi: &ScoringVector,
    batch: &ItemBatch,
) -> Result<usize> {
    let r1 = rank_batch(theta, batch, TieBreak::default())?;
    let r2 = rank_batch(psi, batch, TieBreak::default())?;
    kt_agreement_rankings(&r1, &r2)
}

/// Per-voter individual proportionality levels on one batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IpSample {
    pub per_voter_ip: Vec<f64>,
    pub min_ip: f64,
    pub batch_index: u64,
}

/// `IP_i = a_KT(ranking, ≻_{θ_i}) / (α_i C(m,2))` for every voter.
pub fn ip_levels(ranking: &Ranking, p: &Profile, batch: &ItemBatch) -> Result<IpSample> {
    check_dim(p.dim(), batch.dim())?;
    if ranking.len() != batch.len() {
        return Err(Error::LengthMismatch {
            expected: batch.len(),
            actual: ranking.len(),
        });
    }
    let pairs = binomial2(batch.len()) as f64;
    let per_voter_ip = p
        .thetas()
        .iter()
        .zip(p.alphas())
        .map(|(t, a)| {
            let rt = rank_batch(t, batch, TieBreak::default())?;
            Ok(kt_agreement_rankings(ranking, &rt)? as f64 / (a * pairs))
        })
        .collect::<Result<Vec<f64>>>()?;
    let min_ip = per_voter_ip.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(IpSample {
        per_voter_ip,
        min_ip,
        batch_index: 0,
    })
}

/// Sample mean and standard error `s / √R` (sample standard deviation).
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let r = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / r;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (r - 1.0);
    (mean, (var / r).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rule_name: String,
    pub long_ip: f64,
    pub batch_ip: f64,
    pub per_voter_mean_ip: Vec<f64>,
    /// `[long_ip, batch_ip, voter_0, …, voter_{n-1}]`; the long-IP entry is
    /// the standard error of the first voter attaining the minimum mean.
    pub std_errors: Vec<f64>,
    #[serde(rename = "R")]
    pub batches: usize,
    pub m: usize,
    pub seed: u64,
    /// Standard error of `long_ip - batch_ip`, from per-batch differences.
    pub gap_se: f64,
}

impl EvalReport {
    pub fn long_ip_se(&self) -> f64 {
        self.std_errors[0]
    }

    pub fn batch_ip_se(&self) -> f64 {
        self.std_errors[1]
    }

    pub fn voter_se(&self, i: usize) -> f64 {
        self.std_errors[2 + i]
    }

    pub fn gap(&self) -> f64 {
        self.long_ip - self.batch_ip
    }

    /// Index of the first voter attaining the minimum mean IP.
    pub fn argmin_voter(&self) -> usize {
        argmin(&self.per_voter_mean_ip)
    }

    /// Column names matching [`EvalReport::csv_record`].
    pub fn csv_header(n: usize) -> Vec<String> {
        let mut h: Vec<String> = ["rule", "dataset", "n", "d", "m", "R", "seed", "long_ip", "batch_ip"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        h.extend((0..n).map(|i| format!("voter_{i}")));
        h.push("long_ip_se".into());
        h.push("batch_ip_se".into());
        h.extend((0..n).map(|i| format!("voter_{i}_se")));
        h
    }

    pub fn csv_record(&self, dataset: &str, d: usize) -> Vec<String> {
        let mut r = vec![
            self.rule_name.clone(),
            dataset.to_string(),
            self.per_voter_mean_ip.len().to_string(),
            d.to_string(),
            self.m.to_string(),
            self.batches.to_string(),
            self.seed.to_string(),
            self.long_ip.to_string(),
            self.batch_ip.to_string(),
        ];
        r.extend(self.per_voter_mean_ip.iter().map(|v| v.to_string()));
        r.extend(self.std_errors.iter().map(|v| v.to_string()));
        r
    }
}

fn argmin(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x < v[best] {
            best = i;
        }
    }
    best
}

/// Draws the `R` batches of a run.
pub fn sample_batches(
    dist: &ItemDistribution,
    m: usize,
    batches: usize,
    seed: u64,
) -> Result<Vec<ItemBatch>> {
    let spec = SeedSpec::new(seed, 0);
    (0..batches as u64)
        .into_par_iter()
        .map(|b| sample_batch(dist, m, spec, b))
        .collect()
}

/// Per-batch IP samples of `rule` on the given batches, in batch order.
pub fn ip_samples(rule: &RankingRule, p: &Profile, batches: &[ItemBatch]) -> Result<Vec<IpSample>> {
    batches
        .par_iter()
        .enumerate()
        .map(|(b, x)| {
            let r = rule.rank(x)?;
            let mut s = ip_levels(&r, p, x)?;
            s.batch_index = b as u64;
            Ok(s)
        })
        .collect()
}

/// Reduces per-batch samples to an [`EvalReport`]. Sums run sequentially in
/// batch order, so the result does not depend on the thread count.
pub fn summarize(rule_name: &str, samples: &[IpSample], m: usize, seed: u64) -> EvalReport {
    let n = samples.first().map_or(0, |s| s.per_voter_ip.len());
    let mut per_voter = Vec::with_capacity(n);
    let mut voter_se = Vec::with_capacity(n);
    for i in 0..n {
        let vals: Vec<f64> = samples.iter().map(|s| s.per_voter_ip[i]).collect();
        let (mu, se) = mean_and_se(&vals);
        per_voter.push(mu);
        voter_se.push(se);
    }
    let mins: Vec<f64> = samples.iter().map(|s| s.min_ip).collect();
    let (batch_ip, batch_se) = mean_and_se(&mins);
    let star = argmin(&per_voter);
    let long_ip = per_voter[star];
    let diffs: Vec<f64> = samples
        .iter()
        .map(|s| s.per_voter_ip[star] - s.min_ip)
        .collect();
    let (_, gap_se) = mean_and_se(&diffs);
    let mut std_errors = vec![voter_se[star], batch_se];
    std_errors.extend(voter_se);
    EvalReport {
        rule_name: rule_name.to_string(),
        long_ip,
        batch_ip,
        per_voter_mean_ip: per_voter,
        std_errors,
        batches: samples.len(),
        m,
        seed,
        gap_se,
    }
}

/// Monte Carlo evaluation of a rule: Long-IP, Batch-IP and per-voter means on
/// `R` batches drawn from `dist` with master seed `seed`.
pub fn evaluate(
    rule_name: &str,
    rule: &RankingRule,
    p: &Profile,
    dist: &ItemDistribution,
    m: usize,
    batches: usize,
    seed: u64,
) -> Result<EvalReport> {
    check_dim(p.dim(), dist.dim)?;
    if batches < 2 {
        return Err(Error::InvalidInput(format!("need R >= 2 batches, got {batches}")));
    }
    let xs = sample_batches(dist, m, batches, seed)?;
    let samples = ip_samples(rule, p, &xs)?;
    Ok(summarize(rule_name, &samples, m, seed))
}

/// Long-run IP `min_i E[IP_i]`. The returned report also carries the
/// per-batch IP computed on the same batches.
pub fn long_ip(
    rule_name: &str,
    rule: &RankingRule,
    p: &Profile,
    dist: &ItemDistribution,
    m: usize,
    batches: usize,
    seed: u64,
) -> Result<EvalReport> {
    evaluate(rule_name, rule, p, dist, m, batches, seed)
}

/// Per-batch IP `E[min_i IP_i]`; same report as [`long_ip`].
pub fn batch_ip(
    rule_name: &str,
    rule: &RankingRule,
    p: &Profile,
    dist: &ItemDistribution,
    m: usize,
    batches: usize,
    seed: u64,
) -> Result<EvalReport> {
    evaluate(rule_name, rule, p, dist, m, batches, seed)
}

/// Disagreement-restricted IP for two voters: `s_i / (α_i · #contested)`
/// where a pair is contested when the voters order it differently and `s_i`
/// counts contested pairs on which `ranking` sides with voter `i`.
pub fn ip_tilde(ranking: &Ranking, p: &Profile, batch: &ItemBatch) -> Result<[f64; 2]> {
    if p.len() != 2 {
        return Err(Error::InvalidInput(format!(
            "disagreement-restricted IP needs exactly 2 voters, got {}",
            p.len()
        )));
    }
    check_dim(p.dim(), batch.dim())?;
    let m = batch.len();
    let pos: Vec<Vec<usize>> = p
        .thetas()
        .iter()
        .map(|t| rank_batch(t, batch, TieBreak::default()).map(|r| r.positions()))
        .collect::<Result<_>>()?;
    let pf = ranking.positions();
    let (mut contested, mut s) = (0usize, [0usize; 2]);
    for j in 0..m {
        for k in j + 1..m {
            let v1 = pos[0][j] < pos[0][k];
            let v2 = pos[1][j] < pos[1][k];
            if v1 == v2 {
                continue;
            }
            contested += 1;
            if (pf[j] < pf[k]) == v1 {
                s[0] += 1;
            } else {
                s[1] += 1;
            }
        }
    }
    if contested == 0 {
        return Err(Error::NoContestedPairs);
    }
    let c = contested as f64;
    Ok([
        s[0] as f64 / (p.alphas()[0] * c),
        s[1] as f64 / (p.alphas()[1] * c),
    ])
}

/// Mean disagreement-restricted IP of a two-voter profile over batches.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IpTildeSummary {
    pub means: [f64; 2],
    pub std_errors: [f64; 2],
    /// Batches with at least one contested pair; the others are skipped.
    pub contested_batches: usize,
}

pub fn ip_tilde_summary(
    rule: &RankingRule,
    p: &Profile,
    batches: &[ItemBatch],
) -> Result<IpTildeSummary> {
    let per_batch: Vec<Option<[f64; 2]>> = batches
        .par_iter()
        .map(|x| match ip_tilde(&rule.rank(x)?, p, x) {
            Ok(v) => Ok(Some(v)),
            Err(Error::NoContestedPairs) => Ok(None),
            Err(e) => Err(e),
        })
        .collect::<Result<_>>()?;
    let kept: Vec<[f64; 2]> = per_batch.into_iter().flatten().collect();
    let (m0, s0) = mean_and_se(&kept.iter().map(|v| v[0]).collect::<Vec<_>>());
    let (m1, s1) = mean_and_se(&kept.iter().map(|v| v[1]).collect::<Vec<_>>());
    Ok(IpTildeSummary {
        means: [m0, m1],
        std_errors: [s0, s1],
        contested_batches: kept.len(),
    })
}

/// `(π - d∠(θ, ψ)) / π · C(m,2)`: expected agreement under a spherically
/// symmetric item distribution.
pub fn expected_agreement_spherical(
    theta: &ScoringVector,
    psi: &ScoringVector,
    m: usize,
) -> Result<f64> {
    if m < 2 {
        return Err(Error::InvalidInput(format!("batch size must be >= 2, got {m}")));
    }
    let d = angular_distance(theta, psi)?;
    Ok((PI - d) / PI * binomial2(m) as f64)
}

/// Kendall-tau distance `C(m,2) - a_KT`.
fn kt_distance(r1: &Ranking, r2: &Ranking) -> Result<usize> {
    Ok(binomial2(r1.len()) - kt_agreement_rankings(r1, r2)?)
}

/// Direction on `S^1` whose induced ranking is Kendall-tau closest to
/// `ranking`, as an angle in `[0, 2π)`.
///
/// The induced ranking only changes where the direction crosses a normal of
/// some pairwise difference `x_j - x_k`, so the distance is constant on each
/// arc between consecutive normals; evaluating every arc midpoint gives the
/// exact minimum. Ties go to the smallest angle.
pub fn effective_direction_s1(ranking: &Ranking, batch: &ItemBatch) -> Result<f64> {
    check_dim(2, batch.dim())?;
    if ranking.len() != batch.len() {
        return Err(Error::LengthMismatch {
            expected: batch.len(),
            actual: ranking.len(),
        });
    }
    let m = batch.len();
    let mut cuts = Vec::with_capacity(m * (m - 1));
    for j in 0..m {
        for k in j + 1..m {
            let (a, b) = (batch.item(j), batch.item(k));
            let (dx, dy) = (a[0] - b[0], a[1] - b[1]);
            if dx == 0.0 && dy == 0.0 {
                continue;
            }
            let phi = dy.atan2(dx);
            cuts.push((phi + PI / 2.0).rem_euclid(TAU));
            cuts.push((phi - PI / 2.0).rem_euclid(TAU));
        }
    }
    if cuts.is_empty() {
        return Err(Error::DegenerateBatch);
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut mids: Vec<f64> = cuts
        .windows(2)
        .map(|w| (w[0] + w[1]) / 2.0)
        .collect();
    let last = *cuts.last().expect("non-empty");
    mids.push(((last + cuts[0] + TAU) / 2.0).rem_euclid(TAU));
    mids.sort_by(f64::total_cmp);
    let mut best: Option<(f64, usize)> = None;
    for a in mids {
        let r = rank_by_weights(&[a.cos(), a.sin()], batch, TieBreak::default())?;
        let d = kt_distance(&r, ranking)?;
        if best.is_none_or(|(_, bd)| d < bd) {
            best = Some((a, d));
        }
    }
    Ok(best.expect("at least one arc").0)
}
