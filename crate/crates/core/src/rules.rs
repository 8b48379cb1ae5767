//! Aggregation mechanisms.
//!
//! Fixed linear rules (arithmetic mean, angular mean, geometric median)
//! collapse a profile into one scoring vector; per-batch rules (Borda, PSB)
//! rank each batch directly from the voters' induced rankings.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::metrics::kt_agreement_rankings;
use crate::model::{
    angle_between, binomial2, exp_map_raw, log_map_raw, norm, project_tangent, rank_batch,
    rank_by_scores, ItemBatch, Profile, Ranking, ScoringVector, TieBreak,
};
use crate::sampling::{random_unit, rng_for, sample_batch, ItemDistribution, SeedSpec};

/// Below this norm the weighted vector sum counts as zero.
pub const DEGENERATE_MEAN_TOL: f64 = 1e-12;
/// Iterates closer than this to an antipode of a voter get jittered.
pub const JITTER_TRIGGER: f64 = 1e-7;
pub const JITTER_SIZE: f64 = 1e-5;
/// Smoothing added to Weiszfeld distances.
pub const WEISZFELD_EPS: f64 = 1e-12;
const MIN_STEP: f64 = 1e-12;

const ANGULAR_STREAM: u64 = 0xa1;
const MEDIAN_STREAM: u64 = 0xa2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerOptions {
    pub max_iters: usize,
    pub step_init: f64,
    pub tol_grad: f64,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        Self {
            max_iters: 10_000,
            step_init: 1.0,
            tol_grad: 1e-10,
            restarts: 8,
            seed: 0,
        }
    }
}

impl OptimizerOptions {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.max_iters == 0 || !(self.tol_grad > 0.0) || !(self.step_init > 0.0) {
            return Err(Error::InvalidInput(format!("invalid optimizer options {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerDiagnostics {
    pub iterations: usize,
    pub final_grad_norm: f64,
    pub objective: f64,
    pub restarts_used: usize,
    pub converged: bool,
}

impl OptimizerDiagnostics {
    fn trivial(objective: f64) -> Self {
        Self {
            iterations: 0,
            final_grad_norm: 0.0,
            objective,
            restarts_used: 0,
            converged: true,
        }
    }
}

fn weighted_sum(p: &Profile) -> Vec<f64> {
    let mut s = vec![0.0; p.dim()];
    for (t, a) in p.thetas().iter().zip(p.alphas()) {
        s.iter_mut().zip(t.coords()).for_each(|(acc, c)| *acc += a * c);
    }
    s
}

/// `Σα θ / ‖Σα θ‖`.
pub fn arithmetic_mean(p: &Profile) -> Result<ScoringVector> {
    let s = weighted_sum(p);
    if norm(&s) <= DEGENERATE_MEAN_TOL {
        return Err(Error::DegenerateMean);
    }
    ScoringVector::normalize(s)
}

/// Arithmetic mean, or the first voter when the weighted sum vanishes.
pub fn arithmetic_mean_or_first(p: &Profile) -> ScoringVector {
    arithmetic_mean(p).unwrap_or_else(|_| p.thetas()[0].clone())
}

/// `Σ α_i d∠(θ, θ_i)²`.
pub fn angular_objective(p: &Profile, theta: &ScoringVector) -> f64 {
    angular_objective_raw(p, theta.coords())
}

fn angular_objective_raw(p: &Profile, x: &[f64]) -> f64 {
    p.thetas()
        .iter()
        .zip(p.alphas())
        .map(|(t, a)| {
            let d = angle_between(x, t.coords());
            a * d * d
        })
        .sum()
}

/// `Σ α_i ‖θ - θ_i‖₂`.
pub fn median_objective(p: &Profile, theta: &ScoringVector) -> f64 {
    median_objective_raw(p, theta.coords())
}

fn median_objective_raw(p: &Profile, x: &[f64]) -> f64 {
    p.thetas()
        .iter()
        .zip(p.alphas())
        .map(|(t, a)| a * euclid(x, t.coords()))
        .sum()
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// `Σ α_i log_x(θ_i)`, i.e. minus half the Riemannian gradient of the
/// angular objective. `None` when some voter is antipodal to `x`.
fn karcher_direction(p: &Profile, x: &[f64]) -> Option<Vec<f64>> {
    let mut g = vec![0.0; x.len()];
    for (t, a) in p.thetas().iter().zip(p.alphas()) {
        let l = log_map_raw(x, t.coords()).ok()?;
        g.iter_mut().zip(&l).for_each(|(acc, v)| *acc += a * v);
    }
    project_tangent(x, &mut g);
    Some(g)
}

fn near_antipodal(p: &Profile, x: &[f64]) -> bool {
    p.thetas()
        .iter()
        .any(|t| angle_between(x, t.coords()) > PI - JITTER_TRIGGER)
}

fn random_tangent<R: Rng>(rng: &mut R, x: &[f64], size: f64) -> Vec<f64> {
    loop {
        let mut v = random_unit(rng, x.len()).into_inner();
        project_tangent(x, &mut v);
        let n = norm(&v);
        if n > 1e-8 {
            v.iter_mut().for_each(|c| *c *= size / n);
            return v;
        }
    }
}

struct RunResult {
    x: Vec<f64>,
    objective: f64,
    grad_norm: f64,
    iterations: usize,
    converged: bool,
}

fn angular_descent(p: &Profile, start: Vec<f64>, opts: &OptimizerOptions, run: u64) -> RunResult {
    let mut rng = rng_for(opts.seed, &[ANGULAR_STREAM, run]);
    let mut x = start;
    let mut iterations = 0;
    let mut grad_norm = f64::INFINITY;
    let mut converged = false;
    while iterations < opts.max_iters {
        if near_antipodal(p, &x) {
            let v = random_tangent(&mut rng, &x, JITTER_SIZE);
            x = exp_map_raw(&x, &v);
        }
        let Some(g) = karcher_direction(p, &x) else {
            let v = random_tangent(&mut rng, &x, JITTER_SIZE);
            x = exp_map_raw(&x, &v);
            iterations += 1;
            continue;
        };
        grad_norm = 2.0 * norm(&g);
        if grad_norm <= opts.tol_grad {
            converged = true;
            break;
        }
        iterations += 1;
        let f = angular_objective_raw(p, &x);
        let mut step = opts.step_init;
        let mut accepted = None;
        while step >= MIN_STEP {
            let tangent: Vec<f64> = g.iter().map(|v| step * v).collect();
            let cand = exp_map_raw(&x, &tangent);
            let fc = angular_objective_raw(p, &cand);
            if fc < f {
                accepted = Some(cand);
                break;
            }
            // Objective differences below rounding: accept if the gradient shrinks.
            if fc <= f + 4.0 * f64::EPSILON * f.max(1.0) {
                if let Some(gc) = karcher_direction(p, &cand) {
                    if 2.0 * norm(&gc) < grad_norm {
                        accepted = Some(cand);
                        break;
                    }
                }
            }
            step *= 0.5;
        }
        match accepted {
            Some(c) => x = c,
            None => break,
        }
    }
    if !converged {
        if let Some(g) = karcher_direction(p, &x) {
            grad_norm = 2.0 * norm(&g);
            converged = grad_norm <= opts.tol_grad;
        }
    }
    RunResult {
        objective: angular_objective_raw(p, &x),
        x,
        grad_norm,
        iterations,
        converged,
    }
}

fn pick_best(runs: Vec<RunResult>) -> (usize, RunResult) {
    let any_converged = runs.iter().any(|r| r.converged);
    runs.into_iter()
        .enumerate()
        .filter(|(_, r)| r.converged || !any_converged)
        .min_by(|(ia, a), (ib, b)| a.objective.total_cmp(&b.objective).then(ia.cmp(ib)))
        .expect("at least one run")
}

fn starts(p: &Profile, opts: &OptimizerOptions, stream: u64, extra: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let mut s = vec![arithmetic_mean_or_first(p).into_inner()];
    s.extend(extra);
    s.extend((0..opts.restarts as u64).map(|r| {
        let mut rng = rng_for(opts.seed, &[stream, 0x5eed, r]);
        random_unit(&mut rng, p.dim()).into_inner()
    }));
    s
}

/// On `S^1` the angular objective is quadratic in the angle between
/// consecutive antipodes of voters. Returns the minimizer of each piece that
/// falls strictly inside its arc; the global minimizer is among them.
fn circle_stationary_points(p: &Profile) -> Vec<Vec<f64>> {
    let angles: Vec<f64> = p.thetas().iter().map(|t| t.angle()).collect();
    let mut cuts: Vec<f64> = angles.iter().map(|a| (a + PI).rem_euclid(TAU)).collect();
    cuts.sort_by(f64::total_cmp);
    let mut out = Vec::new();
    for k in 0..cuts.len() {
        let lo = cuts[k];
        let hi = if k + 1 < cuts.len() { cuts[k + 1] } else { cuts[0] + TAU };
        if hi - lo <= 1e-12 {
            continue;
        }
        let mid = (lo + hi) / 2.0;
        let phi: f64 = angles
            .iter()
            .zip(p.alphas())
            .map(|(a, w)| w * (mid + wrap_pi(a - mid)))
            .sum();
        if phi > lo && phi < hi {
            out.push(vec![phi.cos(), phi.sin()]);
        }
    }
    out
}

/// Angle wrapped into `[-π, π)`.
fn wrap_pi(a: f64) -> f64 {
    (a + PI).rem_euclid(TAU) - PI
}

/// Minimizer of `Σ α_i d∠(θ, θ_i)²` on the sphere.
///
/// Riemannian gradient descent with backtracking, started from the arithmetic
/// mean, every voter and `opts.restarts` seeded uniform points; on `S^1` the
/// exact stationary point of every quadratic piece is added as well. The
/// lowest objective among converged runs wins. When no run reaches `tol_grad` the best iterate is
/// returned with `converged = false`.
pub fn angular_mean(
    p: &Profile,
    opts: &OptimizerOptions,
) -> Result<(ScoringVector, OptimizerDiagnostics)> {
    opts.validate()?;
    if p.len() == 1 {
        return Ok((p.thetas()[0].clone(), OptimizerDiagnostics::trivial(0.0)));
    }
    let mut extra: Vec<Vec<f64>> = p.thetas().iter().map(|t| t.coords().to_vec()).collect();
    if p.dim() == 2 {
        extra.extend(circle_stationary_points(p));
    }
    let starts = starts(p, opts, ANGULAR_STREAM, extra);
    let total = starts.len();
    let runs: Vec<RunResult> = starts
        .into_par_iter()
        .enumerate()
        .map(|(i, s)| angular_descent(p, s, opts, i as u64))
        .collect();
    let (_, best) = pick_best(runs);
    let diag = OptimizerDiagnostics {
        iterations: best.iterations,
        final_grad_norm: best.grad_norm,
        objective: best.objective,
        restarts_used: total,
        converged: best.converged,
    };
    Ok((ScoringVector::normalize(best.x)?, diag))
}

/// Norm of the minimal Riemannian subgradient of the median objective at `x`.
fn median_subgradient_norm(p: &Profile, x: &[f64]) -> f64 {
    let mut g = vec![0.0; x.len()];
    let mut vertex_mass = 0.0;
    for (t, a) in p.thetas().iter().zip(p.alphas()) {
        let d = euclid(x, t.coords());
        if d <= 1e-9 {
            vertex_mass += a;
            continue;
        }
        g.iter_mut()
            .zip(x.iter().zip(t.coords()))
            .for_each(|(acc, (xi, ti))| *acc += a * (xi - ti) / d);
    }
    project_tangent(x, &mut g);
    (norm(&g) - vertex_mass).max(0.0)
}

fn weiszfeld(p: &Profile, start: Vec<f64>, opts: &OptimizerOptions) -> RunResult {
    let mut x = start;
    let mut iterations = 0;
    let mut grad_norm = median_subgradient_norm(p, &x);
    while grad_norm > opts.tol_grad && iterations < opts.max_iters {
        let mut y = vec![0.0; x.len()];
        for (t, a) in p.thetas().iter().zip(p.alphas()) {
            let w = a / (euclid(&x, t.coords()) + WEISZFELD_EPS);
            y.iter_mut().zip(t.coords()).for_each(|(acc, c)| *acc += w * c);
        }
        let n = norm(&y);
        if n <= 1e-300 {
            break;
        }
        y.iter_mut().for_each(|c| *c /= n);
        iterations += 1;
        let moved = euclid(&x, &y);
        x = y;
        grad_norm = median_subgradient_norm(p, &x);
        if moved == 0.0 {
            break;
        }
    }
    RunResult {
        objective: median_objective_raw(p, &x),
        converged: grad_norm <= opts.tol_grad,
        x,
        grad_norm,
        iterations,
    }
}

/// Minimizer of `Σ α_i ‖θ - θ_i‖₂` on the sphere by projected Weiszfeld
/// iterations, started from the arithmetic mean, every voter, and
/// `opts.restarts` seeded uniform points.
pub fn geometric_median(
    p: &Profile,
    opts: &OptimizerOptions,
) -> Result<(ScoringVector, OptimizerDiagnostics)> {
    opts.validate()?;
    if p.len() == 1 {
        return Ok((p.thetas()[0].clone(), OptimizerDiagnostics::trivial(0.0)));
    }
    let voters = p.thetas().iter().map(|t| t.coords().to_vec()).collect();
    let starts = starts(p, opts, MEDIAN_STREAM, voters);
    let total = starts.len();
    let runs: Vec<RunResult> = starts
        .into_par_iter()
        .map(|s| weiszfeld(p, s, opts))
        .collect();
    let (_, best) = pick_best(runs);
    let diag = OptimizerDiagnostics {
        iterations: best.iterations,
        final_grad_norm: best.grad_norm,
        objective: best.objective,
        restarts_used: total,
        converged: best.converged,
    };
    Ok((ScoringVector::normalize(best.x)?, diag))
}

fn voter_rankings(p: &Profile, batch: &ItemBatch) -> Result<Vec<Ranking>> {
    p.thetas()
        .iter()
        .map(|t| rank_batch(t, batch, TieBreak::default()))
        .collect()
}

/// Weighted Borda: voter `i` gives `α_i (m - 1 - p)` points to the item at
/// 0-indexed position `p` of its ranking.
pub fn borda_ranking(p: &Profile, batch: &ItemBatch) -> Result<Ranking> {
    check_dim(p.dim(), batch.dim())?;
    let m = batch.len();
    let mut scores = vec![0.0; m];
    for (r, a) in voter_rankings(p, batch)?.iter().zip(p.alphas()) {
        for (pos, &item) in r.order().iter().enumerate() {
            scores[item] += a * (m - 1 - pos) as f64;
        }
    }
    Ok(rank_by_scores(&scores, TieBreak::default()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsbState {
    pub residual_weights: Vec<f64>,
    pub selected: Vec<usize>,
    /// `weight_history[t]` holds the weights in force when position `t` was filled.
    pub weight_history: Vec<Vec<f64>>,
}

/// Proportional Sequential Borda.
///
/// Positions are filled top-down. At step `t` the remaining item maximizing
/// `Σ w_i b_i(x)` wins, where `b_i(x)` counts remaining items voter `i` ranks
/// below `x`. The step resolves `m-1-t` pairs out of `C(m,2)`, and each voter
/// pays that share of the total budget in proportion to its contribution
/// `w_i b_i(x*)` to the winning score `S`:
/// `w_i ← w_i (1 - (m-1-t) b_i(x*) / (C(m,2) S))`.
pub fn psb_ranking(p: &Profile, batch: &ItemBatch) -> Result<(Ranking, PsbState)> {
    check_dim(p.dim(), batch.dim())?;
    let m = batch.len();
    let n = p.len();
    let total_pairs = binomial2(m) as f64;
    let rankings = voter_rankings(p, batch)?;
    let mut w = p.alphas().to_vec();
    let mut remaining = vec![true; m];
    let mut selected = Vec::with_capacity(m);
    let mut history = Vec::with_capacity(m);
    // below[i][x]: remaining items voter i ranks below x.
    let mut below = vec![vec![0usize; m]; n];
    for t in 0..m {
        for (i, r) in rankings.iter().enumerate() {
            let mut count = 0;
            for &x in r.order().iter().rev() {
                if remaining[x] {
                    below[i][x] = count;
                    count += 1;
                }
            }
        }
        let mut best: Option<(usize, f64)> = None;
        for x in (0..m).filter(|&x| remaining[x]) {
            let s: f64 = (0..n).map(|i| w[i] * below[i][x] as f64).sum();
            if best.is_none_or(|(_, bs)| s > bs) {
                best = Some((x, s));
            }
        }
        let (winner, s) = best.expect("an item remains");
        history.push(w.clone());
        let resolved = (m - 1 - t) as f64;
        if resolved > 0.0 && s > 0.0 {
            for i in 0..n {
                let share = resolved * below[i][winner] as f64 / (total_pairs * s);
                w[i] = (w[i] * (1.0 - share)).max(0.0);
            }
        }
        remaining[winner] = false;
        selected.push(winner);
    }
    let ranking = Ranking::from_order(selected.clone())?;
    Ok((
        ranking,
        PsbState {
            residual_weights: w,
            selected,
            weight_history: history,
        },
    ))
}

/// Monte Carlo estimate of `E[Σ α_i (C(m,2) - a_KT(θ_i, θ, X))²]` with its
/// standard error.
pub fn squared_kemeny_estimate(
    p: &Profile,
    theta: &ScoringVector,
    dist: &ItemDistribution,
    m: usize,
    batches: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    check_dim(p.dim(), theta.dim())?;
    check_dim(p.dim(), dist.dim)?;
    if batches == 0 {
        return Err(Error::InvalidInput("need at least one batch".into()));
    }
    let total = binomial2(m) as f64;
    let spec = SeedSpec::new(seed, 0x5c);
    let values = (0..batches as u64)
        .into_par_iter()
        .map(|b| -> Result<f64> {
            let x = sample_batch(dist, m, spec, b)?;
            let r = rank_batch(theta, &x, TieBreak::default())?;
            let mut v = 0.0;
            for (t, a) in p.thetas().iter().zip(p.alphas()) {
                let ri = rank_batch(t, &x, TieBreak::default())?;
                let dis = total - kt_agreement_rankings(&ri, &r)? as f64;
                v += a * dis * dis;
            }
            Ok(v)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(crate::metrics::mean_and_se(&values))
}

pub fn squared_kemeny_objective(
    p: &Profile,
    theta: &ScoringVector,
    dist: &ItemDistribution,
    m: usize,
    batches: usize,
    seed: u64,
) -> Result<f64> {
    squared_kemeny_estimate(p, theta, dist, m, batches, seed).map(|(v, _)| v)
}

/// Grid minimization of the squared-Kemeny objective over `S^1`, using common
/// random numbers across grid points. Returns the best direction and its
/// estimated objective.
pub fn squared_kemeny_argmin_s1(
    p: &Profile,
    dist: &ItemDistribution,
    m: usize,
    batches: usize,
    seed: u64,
    grid: usize,
) -> Result<(ScoringVector, f64)> {
    if p.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            actual: p.dim(),
        });
    }
    let mut best: Option<(ScoringVector, f64)> = None;
    for k in 0..grid.max(1) {
        let theta = ScoringVector::from_angle(std::f64::consts::TAU * k as f64 / grid as f64);
        let v = squared_kemeny_objective(p, &theta, dist, m, batches, seed)?;
        if best.as_ref().is_none_or(|(_, bv)| v < *bv) {
            best = Some((theta, v));
        }
    }
    Ok(best.expect("grid is non-empty"))
}

/// The five aggregation mechanisms by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mechanism {
    Arith,
    Angular,
    Median,
    Borda,
    Psb,
}

impl Mechanism {
    pub const ALL: [Mechanism; 5] = [
        Mechanism::Arith,
        Mechanism::Angular,
        Mechanism::Median,
        Mechanism::Borda,
        Mechanism::Psb,
    ];
    pub const FIXED: [Mechanism; 3] = [Mechanism::Arith, Mechanism::Angular, Mechanism::Median];

    pub fn name(self) -> &'static str {
        match self {
            Mechanism::Arith => "arith",
            Mechanism::Angular => "angular",
            Mechanism::Median => "median",
            Mechanism::Borda => "borda",
            Mechanism::Psb => "psb",
        }
    }

    pub fn is_fixed(self) -> bool {
        matches!(self, Mechanism::Arith | Mechanism::Angular | Mechanism::Median)
    }

    /// Resolves the mechanism against a profile. Fixed rules are evaluated
    /// once here; a degenerate arithmetic mean falls back to the first voter.
    pub fn prepare(self, p: &Profile, opts: &OptimizerOptions) -> Result<RankingRule> {
        Ok(match self {
            Mechanism::Arith => RankingRule::FixedVector(arithmetic_mean_or_first(p)),
            Mechanism::Angular => RankingRule::FixedVector(angular_mean(p, opts)?.0),
            Mechanism::Median => RankingRule::FixedVector(geometric_median(p, opts)?.0),
            Mechanism::Borda => {
                let p = p.clone();
                RankingRule::PerBatch(Arc::new(move |x: &ItemBatch| borda_ranking(&p, x)))
            }
            Mechanism::Psb => {
                let p = p.clone();
                RankingRule::PerBatch(Arc::new(move |x: &ItemBatch| {
                    psb_ranking(&p, x).map(|(r, _)| r)
                }))
            }
        })
    }
}

impl fmt::Display for Mechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mechanism {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Mechanism::ALL
            .into_iter()
            .find(|m| m.name() == s.trim())
            .ok_or_else(|| {
                Error::InvalidInput(format!(
                    "unknown rule '{s}' (expected one of arith, angular, median, borda, psb)"
                ))
            })
    }
}

pub type BatchRuleFn = dyn Fn(&ItemBatch) -> Result<Ranking> + Send + Sync;

/// A rule ready to rank batches.
#[derive(Clone)]
pub enum RankingRule {
    FixedVector(ScoringVector),
    PerBatch(Arc<BatchRuleFn>),
}

impl RankingRule {
    pub fn rank(&self, batch: &ItemBatch) -> Result<Ranking> {
        match self {
            RankingRule::FixedVector(t) => rank_batch(t, batch, TieBreak::default()),
            RankingRule::PerBatch(f) => f(batch),
        }
    }
}

impl fmt::Debug for RankingRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RankingRule::FixedVector(t) => f.debug_tuple("FixedVector").field(t).finish(),
            RankingRule::PerBatch(_) => f.write_str("PerBatch(..)"),
        }
    }
}

/// Angle of `theta` to the closest point of the Euclidean mean direction,
/// exposed for the coincidence checks.
pub fn angle_to_arith(p: &Profile, theta: &ScoringVector) -> Result<f64> {
    let a = arithmetic_mean(p)?;
    Ok(angle_between(a.coords(), theta.coords()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::angular_distance;
    use crate::oracle::s1_argmin;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn antipodal(a1: f64) -> Profile {
        Profile::new(
            vec![
                ScoringVector::new(vec![-1.0, 0.0]).unwrap(),
                ScoringVector::new(vec![1.0, 0.0]).unwrap(),
            ],
            vec![a1, 1.0 - a1],
        )
        .unwrap()
    }

    #[test]
    fn arithmetic_mean_examples() {
        assert_eq!(arithmetic_mean(&antipodal(0.3)).unwrap().coords(), &[1.0, 0.0]);
        let single = Profile::uniform(vec![ScoringVector::from_angle(1.0)]).unwrap();
        assert_eq!(arithmetic_mean(&single).unwrap(), single.thetas()[0]);
        let p = Profile::uniform(vec![ScoringVector::basis(2, 0), ScoringVector::basis(2, 1)])
            .unwrap();
        let a = arithmetic_mean(&p).unwrap();
        assert!((a.coords()[0] - FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((a.coords()[1] - FRAC_1_SQRT_2).abs() < 1e-15);
        assert_eq!(arithmetic_mean(&antipodal(0.5)), Err(Error::DegenerateMean));
    }

    #[test]
    fn angular_mean_trivial_cases() {
        let opts = OptimizerOptions::default();
        let t = ScoringVector::normalize(vec![0.3, -0.2, 0.9]).unwrap();
        let single = Profile::uniform(vec![t.clone()]).unwrap();
        let (m, d) = angular_mean(&single, &opts).unwrap();
        assert_eq!(m, t);
        assert_eq!(d.objective, 0.0);
        let same = Profile::new(vec![t.clone(), t.clone(), t.clone()], vec![0.2, 0.5, 0.3]).unwrap();
        let (m, d) = angular_mean(&same, &opts).unwrap();
        assert!(angular_distance(&m, &t).unwrap() < 1e-12);
        assert!(d.converged);
    }

    #[test]
    fn angular_mean_antipodal_matches_grid() {
        // θ1 = (-1,0) carries 0.7: optimum sits 0.3π away from θ1.
        let p = antipodal(0.7);
        let (m, diag) = angular_mean(&p, &OptimizerOptions::default()).unwrap();
        assert!(diag.converged, "{diag:?}");
        let (_, grid_val) = s1_argmin(|a| angular_objective(&p, &ScoringVector::from_angle(a)), 100_000);
        let d1 = angular_distance(&m, &p.thetas()[0]).unwrap();
        assert!((d1 - 0.3 * PI).abs() < 1e-6, "d1 = {d1}");
        assert!((diag.objective - grid_val).abs() < 1e-9);
    }

    #[test]
    fn geometric_median_examples() {
        let opts = OptimizerOptions::default();
        let p = antipodal(0.7);
        let (m, diag) = geometric_median(&p, &opts).unwrap();
        let (a, _) = s1_argmin(|a| median_objective(&p, &ScoringVector::from_angle(a)), 100_000);
        assert!(angular_distance(&m, &ScoringVector::from_angle(a)).unwrap() < 1e-5);
        assert!(angular_distance(&m, &p.thetas()[0]).unwrap() < 1e-6);
        assert!(diag.converged);

        let tri = Profile::uniform(
            (0..3)
                .map(|k| ScoringVector::from_angle(k as f64 * 2.0 * PI / 3.0))
                .collect(),
        )
        .unwrap();
        let (m, _) = geometric_median(&tri, &opts).unwrap();
        let best = median_objective(&tri, &m);
        for k in 0..3 {
            let rot = ScoringVector::from_angle(m.angle() + k as f64 * 2.0 * PI / 3.0);
            assert!((median_objective(&tri, &rot) - best).abs() < 1e-9);
        }
        let minima = crate::oracle::s1_argmins(
            |a| median_objective(&tri, &ScoringVector::from_angle(a)),
            100_000,
            1e-9,
        );
        assert!(minima
            .iter()
            .any(|&a| angular_distance(&m, &ScoringVector::from_angle(a)).unwrap() < 1e-5));
    }

    fn x3() -> ItemBatch {
        ItemBatch::from_rows(&[[0.3, 0.1], [-0.5, 0.8], [0.9, -0.4]]).unwrap()
    }

    #[test]
    fn borda_examples() {
        let single = Profile::uniform(vec![ScoringVector::from_angle(0.4)]).unwrap();
        let x = x3();
        assert_eq!(
            borda_ranking(&single, &x).unwrap().order(),
            rank_batch(&single.thetas()[0], &x, TieBreak::default()).unwrap().order()
        );
        // Equal antipodal voters: every item totals 0.5 (m - 1).
        let r = borda_ranking(&antipodal(0.5), &x).unwrap();
        assert_eq!(r.order(), &[0, 1, 2]);
        assert_eq!(r.tie_events(), 2);
        // Majority (θ1 = (-1,0)) ranking wins when weights are 0.7/0.3.
        let p = antipodal(0.7);
        assert_eq!(
            borda_ranking(&p, &x).unwrap().order(),
            rank_batch(&p.thetas()[0], &x, TieBreak::default()).unwrap().order()
        );
    }

    #[test]
    fn psb_examples() {
        let x = x3();
        let single = Profile::uniform(vec![ScoringVector::from_angle(2.0)]).unwrap();
        let (r, _) = psb_ranking(&single, &x).unwrap();
        assert_eq!(r, rank_batch(&single.thetas()[0], &x, TieBreak::default()).unwrap());

        let p = antipodal(0.5);
        let (r, state) = psb_ranking(&p, &x).unwrap();
        for t in p.thetas() {
            let rt = rank_batch(t, &x, TieBreak::default()).unwrap();
            assert!(kt_agreement_rankings(&r, &rt).unwrap() >= 1);
        }
        for w in state.weight_history.windows(2) {
            assert!(w[0].iter().zip(&w[1]).all(|(a, b)| b <= a && *b >= 0.0));
        }
        let x2 = ItemBatch::from_rows(&[[0.3, 0.1], [-0.5, 0.8]]).unwrap();
        assert_eq!(psb_ranking(&p, &x2).unwrap().0.len(), 2);
    }

    #[test]
    fn mechanism_names_round_trip() {
        for m in Mechanism::ALL {
            assert_eq!(m.name().parse::<Mechanism>().unwrap(), m);
        }
        assert!("kemeny".parse::<Mechanism>().is_err());
    }

    #[test]
    fn squared_kemeny_self_agreement_is_zero() {
        let t = ScoringVector::from_angle(0.3);
        let p = Profile::uniform(vec![t.clone()]).unwrap();
        let dist = ItemDistribution::uniform_sphere(2);
        assert_eq!(squared_kemeny_objective(&p, &t, &dist, 6, 50, 1).unwrap(), 0.0);
    }
}
