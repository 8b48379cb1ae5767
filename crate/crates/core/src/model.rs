//! Scoring vectors, items, batches, rankings and the unit-sphere geometry
//! shared by every aggregation rule.
//!
//! A scoring vector is a unit direction `θ ∈ S^{d-1}`; an item `x ∈ R^d`
//! scores `⟨x, θ⟩` and a batch is ranked by descending score, with exact ties
//! resolved by ascending batch index.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// Tolerance on `‖θ‖ = 1` accepted by [`ScoringVector::new`].
pub const UNIT_NORM_TOL: f64 = 1e-12;
/// Tolerance on `Σα = 1` accepted by [`Profile::new`].
pub const WEIGHT_SUM_TOL: f64 = 1e-9;
/// Largest angular distance for which [`log_map`] is defined.
pub const ANTIPODAL_MARGIN: f64 = 1e-9;
/// Orthogonality tolerance for tangent vectors passed to [`exp_map`].
pub const TANGENT_TOL: f64 = 1e-6;

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// A unit-norm direction in `R^d`, `d ≥ 2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ScoringVector(Vec<f64>);

impl ScoringVector {
    /// Wraps coordinates that are already unit norm.
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        validate_coords(&coords)?;
        let n = norm(&coords);
        if (n - 1.0).abs() > UNIT_NORM_TOL {
            return Err(Error::NotUnitNorm { norm: n });
        }
        Ok(Self(coords))
    }

    /// Rescales arbitrary non-zero coordinates onto the sphere.
    pub fn normalize(mut coords: Vec<f64>) -> Result<Self> {
        validate_coords(&coords)?;
        let n = norm(&coords);
        if n <= 0.0 {
            return Err(Error::ZeroVector);
        }
        coords.iter_mut().for_each(|c| *c /= n);
        Ok(Self(coords))
    }

    /// The `k`-th standard basis vector of `R^dim`.
    pub fn basis(dim: usize, k: usize) -> Self {
        assert!(dim >= 2 && k < dim, "basis({dim}, {k}) out of range");
        let mut v = vec![0.0; dim];
        v[k] = 1.0;
        Self(v)
    }

    /// Unit vector at `angle` radians on `S^1`.
    pub fn from_angle(angle: f64) -> Self {
        Self(vec![angle.cos(), angle.sin()])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn negated(&self) -> Self {
        Self(self.0.iter().map(|c| -c).collect())
    }

    /// Polar angle in `[0, 2π)`; only meaningful for `d = 2`.
    pub fn angle(&self) -> f64 {
        let a = self.0[1].atan2(self.0[0]);
        if a < 0.0 {
            a + std::f64::consts::TAU
        } else {
            a
        }
    }
}

fn validate_coords(coords: &[f64]) -> Result<()> {
    if coords.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "scoring vectors need d >= 2, got d = {}",
            coords.len()
        )));
    }
    if coords.iter().any(|c| !c.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(())
}

/// A covariate vector. Items need not be unit norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Item(Vec<f64>);

impl Item {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self(coords))
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

/// An ordered tuple of `m ≥ 2` items sharing one dimension, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ItemBatch {
    dim: usize,
    data: Vec<f64>,
}

impl ItemBatch {
    pub fn new(items: Vec<Item>) -> Result<Self> {
        if items.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "a batch needs at least 2 items, got {}",
                items.len()
            )));
        }
        let dim = items[0].dim();
        let mut data = Vec::with_capacity(dim * items.len());
        for it in &items {
            check_dim(dim, it.dim())?;
            data.extend_from_slice(it.coords());
        }
        Ok(Self { dim, data })
    }

    /// Builds a batch from plain coordinate rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let items = rows
            .iter()
            .map(|r| Item::new(r.as_ref().to_vec()))
            .collect::<Result<Vec<_>>>()?;
        Self::new(items)
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim.max(1)
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn item(&self, j: usize) -> &[f64] {
        &self.data[j * self.dim..(j + 1) * self.dim]
    }

    pub fn items(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }
}

/// Rule used to order items with exactly equal scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum TieBreak {
    /// Lower original batch index ranks first.
    #[default]
    LexicographicByIndex,
}

/// A strict total order over batch indices, best first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ranking {
    order: Vec<usize>,
    tie_events: usize,
}

impl Ranking {
    /// Validates that `order` is a permutation of `0..order.len()`.
    pub fn new(order: Vec<usize>, tie_events: usize) -> Result<Self> {
        let mut seen = vec![false; order.len()];
        for &i in &order {
            if i >= order.len() || seen[i] {
                return Err(Error::InvalidInput(format!(
                    "ranking is not a permutation: {order:?}"
                )));
            }
            seen[i] = true;
        }
        Ok(Self { order, tie_events })
    }

    pub fn from_order(order: Vec<usize>) -> Result<Self> {
        Self::new(order, 0)
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn tie_events(&self) -> usize {
        self.tie_events
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// `positions()[item]` is the rank (0 = best) of `item`.
    pub fn positions(&self) -> Vec<usize> {
        let mut pos = vec![0; self.order.len()];
        for (p, &i) in self.order.iter().enumerate() {
            pos[i] = p;
        }
        pos
    }

    pub fn reversed(&self) -> Self {
        Self {
            order: self.order.iter().rev().copied().collect(),
            tie_events: self.tie_events,
        }
    }
}

/// Voter types with their population weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    thetas: Vec<ScoringVector>,
    alphas: Vec<f64>,
}

impl Profile {
    pub fn new(thetas: Vec<ScoringVector>, alphas: Vec<f64>) -> Result<Self> {
        if thetas.is_empty() {
            return Err(Error::InvalidInput("a profile needs at least one voter".into()));
        }
        if thetas.len() != alphas.len() {
            return Err(Error::LengthMismatch {
                expected: thetas.len(),
                actual: alphas.len(),
            });
        }
        let d = thetas[0].dim();
        for t in &thetas {
            check_dim(d, t.dim())?;
        }
        if alphas.iter().any(|&a| !(a > 0.0 && a <= 1.0)) {
            return Err(Error::InvalidInput(format!(
                "voter weights must lie in (0, 1]: {alphas:?}"
            )));
        }
        let sum: f64 = alphas.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidInput(format!(
                "voter weights must sum to 1, got {sum}"
            )));
        }
        Ok(Self { thetas, alphas })
    }

    /// Equal weights `1/n`.
    pub fn uniform(thetas: Vec<ScoringVector>) -> Result<Self> {
        let n = thetas.len().max(1);
        Self::new(thetas, vec![1.0 / n as f64; n])
    }

    pub fn thetas(&self) -> &[ScoringVector] {
        &self.thetas
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn len(&self) -> usize {
        self.thetas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thetas.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.thetas[0].dim()
    }

    pub fn min_alpha(&self) -> f64 {
        self.alphas.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Applies a linear map to every scoring vector (used for rotations).
    pub fn map_thetas<F: Fn(&ScoringVector) -> ScoringVector>(&self, f: F) -> Result<Self> {
        Self::new(self.thetas.iter().map(f).collect(), self.alphas.clone())
    }
}

/// Angle between two unit vectors, in `[0, π]`.
///
/// Computed as `2·atan2(‖u - v‖, ‖u + v‖)`, which stays accurate for nearly
/// identical and nearly opposite vectors and gives exactly 0 and π there.
pub fn angular_distance(u: &ScoringVector, v: &ScoringVector) -> Result<f64> {
    check_dim(u.dim(), v.dim())?;
    Ok(angle_between(u.coords(), v.coords()))
}

pub(crate) fn angle_between(u: &[f64], v: &[f64]) -> f64 {
    let (mut diff, mut sum) = (0.0, 0.0);
    for (a, b) in u.iter().zip(v) {
        diff += (a - b) * (a - b);
        sum += (a + b) * (a + b);
    }
    2.0 * diff.sqrt().atan2(sum.sqrt())
}

/// Score `⟨x, θ⟩`.
pub fn score(theta: &ScoringVector, x: &Item) -> Result<f64> {
    check_dim(theta.dim(), x.dim())?;
    Ok(dot(theta.coords(), x.coords()))
}

/// Ranks a batch by descending score under `theta`.
pub fn rank_batch(theta: &ScoringVector, batch: &ItemBatch, tb: TieBreak) -> Result<Ranking> {
    rank_by_weights(theta.coords(), batch, tb)
}

/// Like [`rank_batch`] but for an arbitrary, not necessarily unit, weight vector.
pub fn rank_by_weights(weights: &[f64], batch: &ItemBatch, tb: TieBreak) -> Result<Ranking> {
    check_dim(batch.dim(), weights.len())?;
    let scores: Vec<f64> = batch.items().map(|x| dot(weights, x)).collect();
    Ok(rank_by_scores(&scores, tb))
}

/// Sorts indices by descending `scores`; ties resolved by `tb`.
pub fn rank_by_scores(scores: &[f64], tb: TieBreak) -> Ranking {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    match tb {
        TieBreak::LexicographicByIndex => {
            order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
        }
    }
    let tie_events = order
        .windows(2)
        .filter(|w| scores[w[0]] == scores[w[1]])
        .count();
    Ranking { order, tie_events }
}

/// Riemannian logarithm on the sphere: the tangent vector at `base` pointing
/// along the minor geodesic to `target`, with length equal to their angle.
pub fn log_map(base: &ScoringVector, target: &ScoringVector) -> Result<Vec<f64>> {
    check_dim(base.dim(), target.dim())?;
    log_map_raw(base.coords(), target.coords())
}

pub(crate) fn log_map_raw(base: &[f64], target: &[f64]) -> Result<Vec<f64>> {
    let c = dot(base, target).clamp(-1.0, 1.0);
    let mut v: Vec<f64> = base.iter().zip(target).map(|(b, t)| t - c * b).collect();
    let s = norm(&v);
    let angle = s.atan2(c);
    if angle > std::f64::consts::PI - ANTIPODAL_MARGIN {
        return Err(Error::AntipodalPair);
    }
    if s == 0.0 {
        return Ok(vec![0.0; base.len()]);
    }
    let k = angle / s;
    v.iter_mut().for_each(|x| *x *= k);
    Ok(v)
}

/// Riemannian exponential on the sphere: walks `‖tangent‖` radians from
/// `base` along the geodesic with initial direction `tangent`.
pub fn exp_map(base: &ScoringVector, tangent: &[f64]) -> Result<ScoringVector> {
    check_dim(base.dim(), tangent.len())?;
    let inner = dot(base.coords(), tangent);
    if inner.abs() > TANGENT_TOL {
        return Err(Error::NonOrthogonalTangent { inner });
    }
    Ok(ScoringVector(exp_map_raw(base.coords(), tangent)))
}

pub(crate) fn exp_map_raw(base: &[f64], tangent: &[f64]) -> Vec<f64> {
    let t = norm(tangent);
    if t == 0.0 {
        return base.to_vec();
    }
    let (s, c) = t.sin_cos();
    let mut out: Vec<f64> = base
        .iter()
        .zip(tangent)
        .map(|(b, v)| c * b + s * v / t)
        .collect();
    let n = norm(&out);
    out.iter_mut().for_each(|x| *x /= n);
    out
}

/// Removes the component of `v` along the unit vector `base`.
pub(crate) fn project_tangent(base: &[f64], v: &mut [f64]) {
    let c = dot(base, v);
    v.iter_mut().zip(base).for_each(|(x, b)| *x -= c * b);
}

pub fn binomial2(m: usize) -> usize {
    m * m.saturating_sub(1) / 2
}
