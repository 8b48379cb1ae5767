//! Executable oracle checks for the aggregation guarantees. Each check is
//! deterministic given its seed and returns a [`CheckReport`].
//!
//! Unless noted otherwise `measured` is the worst excess over the guarantee
//! seen across trials and `bound` the tolerance it must not exceed, so
//! `slack = bound - measured` is non-negative exactly when the check passes.

use std::f64::consts::PI;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{antipodal_profile, clustered_profile, random_at_distance, random_profile, two_cluster_profile};
use crate::error::{Error, Result};
use crate::metrics::{
    evaluate, ip_samples, kt_agreement_rankings, mean_and_se, sample_batches,
};
use crate::model::{
    angle_between, angular_distance, binomial2, rank_batch, Profile, ScoringVector, TieBreak,
};
use crate::oracle::euclidean_mean_numeric;
use crate::rules::{
    angular_mean, arithmetic_mean, psb_ranking, Mechanism, OptimizerOptions, RankingRule,
};
use crate::sampling::{derive_seed, random_unit, rng_for, ItemDistribution};

/// Statistical checks accept deviations up to this many standard errors.
pub const SE_GUARD: f64 = 4.0;
/// Tolerance for deterministic geometric bounds, in radians.
pub const ANGLE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckStatus {
    Pass,
    Fail,
    /// Failed, but the check is advisory and does not fail a suite run.
    Warn,
    /// An optimizer did not converge, so the guarantee could not be tested.
    Inconclusive,
}

impl fmt::Display for CheckStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CheckStatus::Pass => "PASS",
            CheckStatus::Fail => "FAIL",
            CheckStatus::Warn => "WARN",
            CheckStatus::Inconclusive => "INCONCLUSIVE",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub status: CheckStatus,
    pub passed: bool,
    pub measured: f64,
    pub bound: f64,
    pub slack: f64,
    pub trials: usize,
    /// Trials (or cells) that violated the guarantee.
    pub violations: usize,
    pub seed: u64,
    pub note: String,
}

impl CheckReport {
    fn build(name: &str, measured: f64, bound: f64, trials: usize, violations: usize, seed: u64) -> Self {
        let passed = measured <= bound;
        Self {
            name: name.to_string(),
            status: if passed { CheckStatus::Pass } else { CheckStatus::Fail },
            passed,
            measured,
            bound,
            slack: bound - measured,
            trials,
            violations,
            seed,
            note: String::new(),
        }
    }

    fn note(mut self, note: impl Into<String>) -> Self {
        self.note = note.into();
        self
    }

    /// Marks the report inconclusive when optimizers failed to converge and
    /// nothing else failed.
    fn inconclusive_if(mut self, unconverged: usize) -> Self {
        if unconverged > 0 && self.passed {
            self.status = CheckStatus::Inconclusive;
            self.passed = false;
            let extra = format!("{unconverged} optimizer run(s) did not converge");
            self.note = if self.note.is_empty() { extra } else { format!("{}; {extra}", self.note) };
        }
        self
    }

    fn advisory(mut self) -> Self {
        if self.status == CheckStatus::Fail {
            self.status = CheckStatus::Warn;
        }
        self
    }

    /// True for statuses that fail a suite run.
    pub fn is_hard_failure(&self) -> bool {
        matches!(self.status, CheckStatus::Fail | CheckStatus::Inconclusive)
    }
}

fn trial_rng(seed: u64, stream: u64, trial: usize) -> rand_chacha::ChaCha8Rng {
    rng_for(seed, &[stream, trial as u64])
}

fn optimizer(seed: u64, stream: u64, trial: usize) -> OptimizerOptions {
    OptimizerOptions::with_seed(derive_seed(seed, &[stream, trial as u64, 1]))
}

/// `d∠(θ_ang, θ_i) ≤ (1 - α_i)π` on random profiles (`n ∈ 2..=6`,
/// `d ∈ 2..=8`), plus the tight antipodal case `α = (0.7, 0.3)` where the
/// distance to the first voter must equal `0.3π`.
pub fn check_angular_bound(trials: usize, seed: u64) -> Result<CheckReport> {
    const STREAM: u64 = 0x101;
    if trials == 0 {
        return Err(Error::InvalidInput("trials must be >= 1".into()));
    }
    let mut worst = f64::NEG_INFINITY;
    let (mut violations, mut unconverged) = (0, 0);
    for t in 0..trials {
        let mut rng = trial_rng(seed, STREAM, t);
        let n = rng.random_range(2..=6);
        let d = rng.random_range(2..=8);
        let p = random_profile(&mut rng, n, d);
        let (theta, diag) = angular_mean(&p, &optimizer(seed, STREAM, t))?;
        unconverged += usize::from(!diag.converged);
        let excess = p
            .thetas()
            .iter()
            .zip(p.alphas())
            .map(|(ti, a)| angle_between(theta.coords(), ti.coords()) - (1.0 - a) * PI)
            .fold(f64::NEG_INFINITY, f64::max);
        violations += usize::from(excess > ANGLE_TOL);
        worst = worst.max(excess);
    }
    let anti = antipodal_profile(0.7)?;
    let (theta, diag) = angular_mean(&anti, &optimizer(seed, STREAM, trials))?;
    unconverged += usize::from(!diag.converged);
    let tight = (angular_distance(&theta, &anti.thetas()[0])? - 0.3 * PI).abs();
    violations += usize::from(tight > ANGLE_TOL);
    worst = worst.max(tight);
    Ok(CheckReport::build("angular-bound", worst, ANGLE_TOL, trials + 1, violations, seed)
        .note(format!("antipodal tight case off by {tight:.3e} rad"))
        .inconclusive_if(unconverged))
}

/// Mean KT agreement between random `θ, ψ` on `R` uniform batches against
/// `(π - d∠)/π · C(m,2)`, `m ∈ 2..=10`. `measured` is the fraction of trials
/// outside `4·SE`; at most 1% may be.
pub fn check_expected_agreement(trials: usize, batches: usize, seed: u64) -> Result<CheckReport> {
    const STREAM: u64 = 0x102;
    if trials == 0 || batches < 2 {
        return Err(Error::InvalidInput("need trials >= 1 and R >= 2".into()));
    }
    let mut outside = 0;
    let mut worst_z: f64 = 0.0;
    for t in 0..trials {
        let mut rng = trial_rng(seed, STREAM, t);
        let d = rng.random_range(2..=6);
        let m = rng.random_range(2..=10);
        let theta = random_unit(&mut rng, d);
        let psi = random_unit(&mut rng, d);
        let (mean, se, expected) = agreement_trial(&theta, &psi, m, batches, derive_seed(seed, &[STREAM, t as u64]))?;
        let dev = (mean - expected).abs();
        if dev > SE_GUARD * se + 1e-9 {
            outside += 1;
        }
        if se > 0.0 {
            worst_z = worst_z.max(dev / se);
        }
    }
    Ok(CheckReport::build(
        "expected-agreement",
        outside as f64 / trials as f64,
        0.01,
        trials,
        outside,
        seed,
    )
    .note(format!("largest deviation {worst_z:.2} SE")))
}

/// Monte Carlo mean and SE of `a_KT(θ, ψ)` on uniform batches, with the
/// spherical-symmetry prediction.
pub fn agreement_trial(
    theta: &ScoringVector,
    psi: &ScoringVector,
    m: usize,
    batches: usize,
    seed: u64,
) -> Result<(f64, f64, f64)> {
    let dist = ItemDistribution::uniform_sphere(theta.dim());
    let xs = sample_batches(&dist, m, batches, seed)?;
    let vals = xs
        .iter()
        .map(|x| {
            let a = rank_batch(theta, x, TieBreak::default())?;
            let b = rank_batch(psi, x, TieBreak::default())?;
            Ok(kt_agreement_rankings(&a, &b)? as f64)
        })
        .collect::<Result<Vec<f64>>>()?;
    let (mean, se) = mean_and_se(&vals);
    let expected = (PI - angular_distance(theta, psi)?) / PI * binomial2(m) as f64;
    Ok((mean, se, expected))
}

/// Long-IP of the angular mean on uniform batches is at least `1 - 4·SE`.
/// `measured` is the largest shortfall `(1 - long_ip) / SE`.
pub fn check_long_ip_angular(trials: usize, batches: usize, seed: u64) -> Result<CheckReport> {
    const STREAM: u64 = 0x103;
    if trials == 0 || batches < 2 {
        return Err(Error::InvalidInput("need trials >= 1 and R >= 2".into()));
    }
    let mut worst = f64::NEG_INFINITY;
    let (mut violations, mut unconverged) = (0, 0);
    for t in 0..trials {
        let mut rng = trial_rng(seed, STREAM, t);
        let n = rng.random_range(2..=5);
        let d = rng.random_range(2..=6);
        let m = rng.random_range(2..=10);
        let p = random_profile(&mut rng, n, d);
        let (theta, diag) = angular_mean(&p, &optimizer(seed, STREAM, t))?;
        unconverged += usize::from(!diag.converged);
        let rep = evaluate(
            "angular",
            &RankingRule::FixedVector(theta),
            &p,
            &ItemDistribution::uniform_sphere(d),
            m,
            batches,
            derive_seed(seed, &[STREAM, t as u64]),
        )?;
        let z = shortfall_z(1.0 - rep.long_ip, rep.long_ip_se());
        violations += usize::from(z > SE_GUARD);
        worst = worst.max(z);
    }
    Ok(CheckReport::build("long-ip-angular", worst, SE_GUARD, trials, violations, seed)
        .inconclusive_if(unconverged))
}

fn shortfall_z(shortfall: f64, se: f64) -> f64 {
    if se > 0.0 {
        shortfall / se
    } else if shortfall > 1e-12 {
        f64::INFINITY
    } else {
        0.0
    }
}

/// `batch_ip ≤ long_ip` for all five rules on shared batches, exactly.
/// `measured` is the largest `batch_ip - long_ip`.
pub fn check_batch_le_long(trials: usize, seed: u64) -> Result<CheckReport> {
    const STREAM: u64 = 0x104;
    const BATCHES: usize = 40;
    if trials == 0 {
        return Err(Error::InvalidInput("trials must be >= 1".into()));
    }
    let mut worst = f64::NEG_INFINITY;
    let mut violations = 0;
    for t in 0..trials {
        let mut rng = trial_rng(seed, STREAM, t);
        let n = rng.random_range(1..=5);
        let d = rng.random_range(2..=5);
        let m = rng.random_range(2..=10);
        let p = random_profile(&mut rng, n, d);
        let dist = ItemDistribution::uniform_sphere(d);
        let xs = sample_batches(&dist, m, BATCHES, derive_seed(seed, &[STREAM, t as u64]))?;
        for mech in Mechanism::ALL {
            let rule = mech.prepare(&p, &optimizer(seed, STREAM, t))?;
            let rep = crate::metrics::summarize(mech.name(), &ip_samples(&rule, &p, &xs)?, m, seed);
            let excess = rep.batch_ip - rep.long_ip;
            violations += usize::from(excess > 0.0);
            worst = worst.max(excess);
        }
    }
    Ok(CheckReport::build("batch-le-long", worst, 0.0, trials, violations, seed))
}

/// Gap between Long-IP and Batch-IP of one rule at one batch size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapPoint {
    pub m: usize,
    pub gap: f64,
    pub se: f64,
}

/// Long-minus-batch gaps of `rule` over `ms`, each on `R` uniform batches.
pub fn gap_curve(
    rule: &RankingRule,
    p: &Profile,
    ms: &[usize],
    batches: usize,
    seed: u64,
) -> Result<Vec<GapPoint>> {
    let dist = ItemDistribution::uniform_sphere(p.dim());
    ms.iter()
        .map(|&m| {
            let rep = evaluate("rule", rule, p, &dist, m, batches, derive_seed(seed, &[m as u64]))?;
            Ok(GapPoint {
                m,
                gap: rep.gap(),
                se: rep.gap_se,
            })
        })
        .collect()
}

/// The heterogeneous profile used by the gap checks: two groups of two
/// voters on `S^1`, 120° apart, holding 60% and 40% of the weight.
pub fn gap_profile() -> Profile {
    two_cluster_profile(2, 120.0, 5.0, 0.6).expect("valid fixed profile")
}

/// Whether `large` is significantly below half of `small`:
/// `small.gap - 2·large.gap > 4·√(se_small² + 4·se_large²)`.
pub fn gap_halves(small: GapPoint, large: GapPoint) -> bool {
    let margin = small.gap - 2.0 * large.gap;
    let se = (small.se.powi(2) + 4.0 * large.se.powi(2)).sqrt();
    large.gap < 0.5 * small.gap && margin > SE_GUARD * se
}

/// For every fixed rule on [`gap_profile`], `gap(m)·√⌊m/2⌋` stays below 1.5
/// times its value at the smallest `m` (plus `4·SE` scaled alike).
/// `measured` is the largest ratio to that envelope.
pub fn check_gap_shrinks(ms: &[usize], batches: usize, seed: u64) -> Result<CheckReport> {
    const STREAM: u64 = 0x105;
    if ms.len() < 2 || batches < 2 {
        return Err(Error::InvalidInput("need at least two batch sizes and R >= 2".into()));
    }
    let p = gap_profile();
    let mut worst = f64::NEG_INFINITY;
    let mut violations = 0;
    let mut notes = Vec::new();
    for mech in Mechanism::FIXED {
        let rule = mech.prepare(&p, &optimizer(seed, STREAM, 0))?;
        let curve = gap_curve(&rule, &p, ms, batches, derive_seed(seed, &[STREAM]))?;
        let scale = |g: &GapPoint| ((g.m / 2) as f64).sqrt();
        let envelope = 1.5 * curve[0].gap * scale(&curve[0]);
        for g in &curve[1..] {
            let allowed = envelope + SE_GUARD * g.se * scale(g);
            let ratio = g.gap * scale(g) / allowed;
            violations += usize::from(ratio > 1.0);
            worst = worst.max(ratio);
        }
        let first = curve[0];
        let last = curve[curve.len() - 1];
        notes.push(format!("{}: {:.4}@m={} -> {:.4}@m={}", mech.name(), first.gap, first.m, last.gap, last.m));
    }
    Ok(CheckReport::build("gap-shrinks", worst, 1.0, Mechanism::FIXED.len(), violations, seed)
        .note(notes.join("; ")))
}

/// The normalized weighted average against a numeric minimizer of
/// `Σ α_i ‖θ - θ_i‖²`; `measured` is the largest angle between them.
pub fn check_arith_closed_form(trials: usize, seed: u64) -> Result<CheckReport> {
    const STREAM: u64 = 0x106;
    if trials == 0 {
        return Err(Error::InvalidInput("trials must be >= 1".into()));
    }
    let mut worst: f64 = 0.0;
    let mut violations = 0;
    for t in 0..trials {
        let mut rng = trial_rng(seed, STREAM, t);
        let n = rng.random_range(2..=6);
        let d = rng.random_range(2..=8);
        let p = random_profile(&mut rng, n, d);
        let closed = arithmetic_mean(&p)?;
        let numeric = euclidean_mean_numeric(&p, derive_seed(seed, &[STREAM, t as u64]));
        let gap = angle_between(closed.coords(), &numeric);
        violations += usize::from(gap > ANGLE_TOL);
        worst = worst.max(gap);
    }
    Ok(CheckReport::build("arith-closed-form", worst, ANGLE_TOL, trials, violations, seed))
}

/// `arctan((2R - sin 2R) / cos R)`: how far apart the angular and
/// arithmetic means can be when every voter is within `R < π/2` of a point.
pub fn coincidence_bound(radius: f64) -> f64 {
    ((2.0 * radius - (2.0 * radius).sin()) / radius.cos()).atan()
}

/// Clustered random profiles at each radius; `measured` is the largest
/// excess of `d∠(θ_ang, θ_arith)` over [`coincidence_bound`].
pub fn check_coincidence_bound(trials: usize, radii: &[f64], seed: u64) -> Result<CheckReport> {
    const STREAM: u64 = 0x107;
    if trials == 0 || radii.is_empty() {
        return Err(Error::InvalidInput("need trials >= 1 and at least one radius".into()));
    }
    if let Some(r) = radii.iter().find(|r| !(**r > 0.0 && **r < PI / 2.0)) {
        return Err(Error::InvalidInput(format!("radius {r} outside (0, π/2)")));
    }
    let mut worst = f64::NEG_INFINITY;
    let (mut violations, mut unconverged) = (0, 0);
    for (ri, &radius) in radii.iter().enumerate() {
        let bound = coincidence_bound(radius);
        for t in 0..trials {
            let k = ri * trials + t;
            let mut rng = trial_rng(seed, STREAM, k);
            let n = rng.random_range(2..=6);
            let d = rng.random_range(2..=6);
            let (p, _) = clustered_profile(&mut rng, n, d, radius);
            let (ang, diag) = angular_mean(&p, &optimizer(seed, STREAM, k))?;
            unconverged += usize::from(!diag.converged);
            let arith = arithmetic_mean(&p)?;
            let excess = angular_distance(&ang, &arith)? - bound;
            violations += usize::from(excess > ANGLE_TOL);
            worst = worst.max(excess);
        }
    }
    Ok(CheckReport::build(
        "coincidence-bound",
        worst,
        ANGLE_TOL,
        trials * radii.len(),
        violations,
        seed,
    )
    .inconclusive_if(unconverged))
}

/// Sequential Borda gives every voter at least `⌊α_i C(m,2)⌋` agreements.
/// Advisory: a failure is reported as `Warn`. `measured` counts violating
/// (trial, voter) pairs.
pub fn check_psb_floor(trials: usize, seed: u64) -> Result<CheckReport> {
    const STREAM: u64 = 0x108;
    if trials == 0 {
        return Err(Error::InvalidInput("trials must be >= 1".into()));
    }
    let mut violations = 0;
    let mut min_slack = i64::MAX;
    for t in 0..trials {
        let mut rng = trial_rng(seed, STREAM, t);
        let n = rng.random_range(1..=4);
        let d = rng.random_range(2..=5);
        let m = rng.random_range(2..=8);
        let p = random_profile(&mut rng, n, d);
        let x = sample_batches(&ItemDistribution::uniform_sphere(d), m, 1, derive_seed(seed, &[STREAM, t as u64]))?
            .remove(0);
        let (r, _) = psb_ranking(&p, &x)?;
        for (theta, a) in p.thetas().iter().zip(p.alphas()) {
            let floor = psb_floor(*a, m);
            let got = kt_agreement_rankings(&r, &rank_batch(theta, &x, TieBreak::default())?)?;
            violations += usize::from(got < floor);
            min_slack = min_slack.min(got as i64 - floor as i64);
        }
    }
    Ok(CheckReport::build("psb-floor", violations as f64, 0.0, trials, violations, seed)
        .note(format!("smallest agreements-minus-floor {min_slack}"))
        .advisory())
}

/// `⌊α C(m,2)⌋`, robust to products that land a rounding error below an
/// integer.
pub fn psb_floor(alpha: f64, m: usize) -> usize {
    (alpha * binomial2(m) as f64 + 1e-9).floor() as usize
}

/// Moving the angular mean by `γ` costs each voter at most `γ / (π α_i)` of
/// expected IP. Tested on paired batches with `γ ∈ {0.05, 0.1, 0.2}`;
/// `measured` is the largest shortfall in SE units.
pub fn check_robustness(trials: usize, batches: usize, seed: u64) -> Result<CheckReport> {
    const STREAM: u64 = 0x109;
    const GAMMAS: [f64; 3] = [0.05, 0.1, 0.2];
    if trials == 0 || batches < 2 {
        return Err(Error::InvalidInput("need trials >= 1 and R >= 2".into()));
    }
    let mut worst = f64::NEG_INFINITY;
    let (mut violations, mut unconverged) = (0, 0);
    for t in 0..trials {
        let mut rng = trial_rng(seed, STREAM, t);
        let n = rng.random_range(2..=4);
        let d = rng.random_range(2..=5);
        let m = rng.random_range(3..=10);
        let p = random_profile(&mut rng, n, d);
        let (psi, diag) = angular_mean(&p, &optimizer(seed, STREAM, t))?;
        unconverged += usize::from(!diag.converged);
        let xs = sample_batches(
            &ItemDistribution::uniform_sphere(d),
            m,
            batches,
            derive_seed(seed, &[STREAM, t as u64]),
        )?;
        let base = ip_samples(&RankingRule::FixedVector(psi.clone()), &p, &xs)?;
        for gamma in GAMMAS {
            let theta = random_at_distance(&mut rng, &psi, gamma);
            let moved = ip_samples(&RankingRule::FixedVector(theta), &p, &xs)?;
            for (i, a) in p.alphas().iter().enumerate() {
                let allowance = gamma / (PI * a);
                let diffs: Vec<f64> = moved
                    .iter()
                    .zip(&base)
                    .map(|(u, v)| u.per_voter_ip[i] - v.per_voter_ip[i] + allowance)
                    .collect();
                let (mean, se) = mean_and_se(&diffs);
                let z = shortfall_z(-mean, se);
                violations += usize::from(z > SE_GUARD);
                worst = worst.max(z);
            }
        }
    }
    Ok(CheckReport::build("robustness", worst, SE_GUARD, trials * GAMMAS.len(), violations, seed)
        .inconclusive_if(unconverged))
}

/// `e^{-⌊m/2⌋ α² t²}`: tail bound on `P(IP_i < E[IP_i] - t)`.
///
/// The corollary as usually stated has a factor 2 in the exponent that its
/// derivation does not deliver; this uses the weaker exponent the
/// derivation supports.
pub fn concentration_bound(alpha: f64, m: usize, t: f64) -> f64 {
    (-((m / 2) as f64) * alpha * alpha * t * t).exp()
}

/// One `(voter, m, t)` cell of a concentration check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailCell {
    pub voter: usize,
    pub m: usize,
    pub t: f64,
    pub expected_ip: f64,
    pub empirical_tail: f64,
    pub bound: f64,
    /// Binomial standard error `√(b(1-b)/R)` at the bound `b`.
    pub se: f64,
}

impl TailCell {
    pub fn passes(&self) -> bool {
        self.empirical_tail <= self.bound + SE_GUARD * self.se
    }
}

/// Empirical tail frequencies of a fixed direction's per-voter IP on `R`
/// uniform batches. The centering `E[IP_i] = (π - d∠(θ, θ_i)) / (π α_i)` is
/// exact for spherically symmetric items.
pub fn concentration_cells(
    p: &Profile,
    theta: &ScoringVector,
    ms: &[usize],
    ts: &[f64],
    batches: usize,
    seed: u64,
) -> Result<Vec<TailCell>> {
    let dist = ItemDistribution::uniform_sphere(p.dim());
    let rule = RankingRule::FixedVector(theta.clone());
    let mut cells = Vec::new();
    for &m in ms {
        let xs = sample_batches(&dist, m, batches, derive_seed(seed, &[m as u64]))?;
        let samples = ip_samples(&rule, p, &xs)?;
        for (i, (ti, a)) in p.thetas().iter().zip(p.alphas()).enumerate() {
            let expected_ip = (PI - angular_distance(theta, ti)?) / (PI * a);
            for &t in ts {
                let hits = samples
                    .iter()
                    .filter(|s| s.per_voter_ip[i] < expected_ip - t)
                    .count();
                let bound = concentration_bound(*a, m, t).min(1.0);
                cells.push(TailCell {
                    voter: i,
                    m,
                    t,
                    expected_ip,
                    empirical_tail: hits as f64 / batches as f64,
                    bound,
                    se: (bound * (1.0 - bound) / batches as f64).sqrt(),
                });
            }
        }
    }
    Ok(cells)
}

/// Concentration of per-voter IP around its mean for a fixed direction.
/// `measured` is the largest `empirical - bound - 4·SE` over all cells.
pub fn check_concentration(
    p: &Profile,
    theta: &ScoringVector,
    ms: &[usize],
    ts: &[f64],
    batches: usize,
    seed: u64,
) -> Result<CheckReport> {
    if ms.is_empty() || ts.is_empty() || batches < 2 {
        return Err(Error::InvalidInput("need batch sizes, thresholds and R >= 2".into()));
    }
    let cells = concentration_cells(p, theta, ms, ts, batches, seed)?;
    let worst = cells
        .iter()
        .map(|c| c.empirical_tail - c.bound - SE_GUARD * c.se)
        .fold(f64::NEG_INFINITY, f64::max);
    let violations = cells.iter().filter(|c| !c.passes()).count();
    Ok(CheckReport::build("concentration", worst, 0.0, cells.len(), violations, seed)
        .note("bound uses exponent floor(m/2)*alpha^2*t^2 (without the factor 2)"))
}

/// Names accepted by [`run_check`], in suite order.
pub const CHECK_NAMES: [&str; 10] = [
    "angular-bound",
    "expected-agreement",
    "long-ip-angular",
    "batch-le-long",
    "gap-shrinks",
    "arith-closed-form",
    "coincidence-bound",
    "psb-floor",
    "robustness",
    "concentration",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CheckName(&'static str);

impl CheckName {
    pub fn as_str(&self) -> &'static str {
        self.0
    }
}

impl FromStr for CheckName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CHECK_NAMES
            .iter()
            .find(|n| **n == s)
            .map(|n| CheckName(n))
            .ok_or_else(|| {
                Error::InvalidInput(format!(
                    "unknown check '{s}'; expected one of {}",
                    CHECK_NAMES.join(", ")
                ))
            })
    }
}

/// Runs one named check at its default size.
pub fn run_check(name: CheckName, seed: u64) -> Result<CheckReport> {
    let s = derive_seed(seed, &[0xc0, CHECK_NAMES.iter().position(|n| *n == name.0).unwrap_or(0) as u64]);
    match name.0 {
        "angular-bound" => check_angular_bound(1000, s),
        "expected-agreement" => check_expected_agreement(100, 2000, s),
        "long-ip-angular" => check_long_ip_angular(20, 2000, s),
        "batch-le-long" => check_batch_le_long(200, s),
        "gap-shrinks" => check_gap_shrinks(&[5, 10, 20, 50, 100, 200], 2000, s),
        "arith-closed-form" => check_arith_closed_form(500, s),
        "coincidence-bound" => check_coincidence_bound(500, &[0.1, 0.3, 0.5, 1.0, 1.4], s),
        "psb-floor" => check_psb_floor(500, s),
        "robustness" => check_robustness(10, 2000, s),
        "concentration" => {
            let p = antipodal_profile(0.5)?;
            check_concentration(&p, &ScoringVector::basis(2, 1), &[10, 40], &[0.2, 0.5], 5000, s)
        }
        other => Err(Error::InvalidInput(format!("unknown check '{other}'"))),
    }
}

pub fn run_suite(names: &[CheckName], seed: u64) -> Result<Vec<CheckReport>> {
    names.iter().map(|n| run_check(*n, seed)).collect()
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// JUnit-style summary; `Warn` reports count as passing test cases.
pub fn write_junit<W: Write>(reports: &[CheckReport], mut out: W) -> Result<()> {
    let failures = reports.iter().filter(|r| r.is_hard_failure()).count();
    writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#)?;
    writeln!(
        out,
        r#"<testsuite name="verify" tests="{}" failures="{failures}">"#,
        reports.len()
    )?;
    for r in reports {
        write!(out, r#"  <testcase name="{}" classname="verify">"#, xml_escape(&r.name))?;
        let detail = format!(
            "measured={} bound={} slack={} trials={} violations={} seed={} {}",
            r.measured, r.bound, r.slack, r.trials, r.violations, r.seed, r.note
        );
        match r.status {
            CheckStatus::Pass => {}
            CheckStatus::Warn => write!(out, "<system-out>WARN {}</system-out>", xml_escape(&detail))?,
            _ => write!(
                out,
                r#"<failure message="{}">{}</failure>"#,
                r.status,
                xml_escape(&detail)
            )?,
        }
        writeln!(out, "</testcase>")?;
    }
    writeln!(out, "</testsuite>")?;
    Ok(())
}

pub fn write_reports_csv<W: Write>(reports: &[CheckReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in reports {
        w.serialize(r).map_err(|e| Error::Io(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn check_names_parse() {
        for n in CHECK_NAMES {
            assert_eq!(n.parse::<CheckName>().unwrap().as_str(), n);
        }
        assert!("nope".parse::<CheckName>().is_err());
    }

    #[test]
    fn single_voter_bound_is_tight_at_zero() {
        let p = Profile::uniform(vec![ScoringVector::basis(3, 2)]).unwrap();
        let (t, _) = angular_mean(&p, &OptimizerOptions::default()).unwrap();
        assert_eq!(angular_distance(&t, &p.thetas()[0]).unwrap(), 0.0);
    }

    #[test]
    fn agreement_identical_vectors_is_exact() {
        let t = ScoringVector::basis(3, 0);
        let (mean, se, expected) = agreement_trial(&t, &t, 6, 50, 1).unwrap();
        assert_eq!((mean, se, expected), (15.0, 0.0, 15.0));
    }

    #[test]
    fn agreement_matches_prediction() {
        let t = ScoringVector::basis(2, 0);
        let (mean, se, expected) =
            agreement_trial(&t, &ScoringVector::basis(2, 1), 2, 2000, 5).unwrap();
        assert_eq!(expected, 0.5);
        assert!((mean - expected).abs() <= 4.0 * se);
        let (mean, se, expected) = agreement_trial(
            &t,
            &ScoringVector::from_angle(2.0 * PI / 3.0),
            5,
            2000,
            6,
        )
        .unwrap();
        assert!((expected - 10.0 / 3.0).abs() < 1e-12);
        assert!((mean - expected).abs() <= 4.0 * se);
    }

    #[test]
    fn antipodal_pair_batch_gap() {
        // With m = 2 one voter always gets zero agreement, so the per-batch
        // minimum is 0 while each voter's mean is about 1.
        let p = antipodal_profile(0.5).unwrap();
        let rule = RankingRule::FixedVector(ScoringVector::basis(2, 1));
        let rep = evaluate("x", &rule, &p, &ItemDistribution::uniform_sphere(2), 2, 500, 3).unwrap();
        assert_eq!(rep.batch_ip, 0.0);
        assert!(rep.long_ip > 0.8);
    }

    #[test]
    fn single_voter_has_no_gap() {
        let p = Profile::uniform(vec![ScoringVector::basis(2, 0)]).unwrap();
        let rule = RankingRule::FixedVector(ScoringVector::basis(2, 0));
        for g in gap_curve(&rule, &p, &[5, 20], 100, 4).unwrap() {
            assert_eq!(g.gap, 0.0);
        }
    }

    #[test]
    fn coincidence_bound_values() {
        assert!(coincidence_bound(1e-6) < 1e-12);
        let v = coincidence_bound(0.5);
        assert!((v - ((1.0 - 1f64.sin()) / 0.5f64.cos()).atan()).abs() < 1e-15);
    }

    #[test]
    fn psb_floor_small_cases() {
        assert_eq!(psb_floor(1.0, 5), 10);
        assert_eq!(psb_floor(0.5, 2), 0);
        assert_eq!(psb_floor(0.5, 3), 1);
        assert_eq!(psb_floor(0.3, 11), 16);
    }

    #[test]
    fn concentration_bound_value() {
        let b = concentration_bound(0.5, 10, 0.5);
        assert!((b - (-5.0f64 * 0.0625).exp()).abs() < 1e-15);
        let p = Profile::uniform(vec![ScoringVector::basis(2, 0)]).unwrap();
        let cells =
            concentration_cells(&p, &ScoringVector::basis(2, 0), &[6], &[0.1], 200, 2).unwrap();
        assert_eq!(cells[0].empirical_tail, 0.0);
        assert_eq!(cells[0].expected_ip, 1.0);
    }

    #[test]
    fn junit_escapes_and_counts() {
        let mut r = CheckReport::build("a<b", 2.0, 1.0, 3, 1, 9);
        r.note = "x & y".into();
        let mut buf = Vec::new();
        write_junit(&[r], &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.contains(r#"failures="1""#));
        assert!(s.contains("a&lt;b"));
        assert!(s.contains("x &amp; y"));
    }

    #[test]
    fn small_checks_pass() {
        assert!(check_batch_le_long(5, 1).unwrap().passed);
        assert!(check_arith_closed_form(5, 1).unwrap().passed);
        assert!(check_angular_bound(5, 1).unwrap().passed);
    }
}
