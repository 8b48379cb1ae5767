//! Seeded item and batch samplers.
//!
//! Every draw is addressed by `(master_seed, stream_id, batch_index,
//! position)`: each item gets its own generator keyed by a SplitMix64 hash of
//! that tuple, so batches can be produced in any order or on any thread and
//! still come out bit-identical.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{norm, Item, ItemBatch, ScoringVector};

/// Standard normal draws are clipped to this many standard deviations.
pub const GAUSSIAN_CLIP: f64 = 38.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DistKind {
    UniformSphere,
    IsotropicGaussian { sigma: f64 },
    /// Angular central Gaussian: `z ~ N(0, λI + (1-λ)vvᵀ)`, `x = z/‖z‖`.
    Acg { axis: ScoringVector, lambda: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemDistribution {
    pub kind: DistKind,
    pub dim: usize,
}

impl ItemDistribution {
    pub fn uniform_sphere(dim: usize) -> Self {
        Self {
            kind: DistKind::UniformSphere,
            dim,
        }
    }

    pub fn gaussian(dim: usize, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidInput(format!("sigma must be positive, got {sigma}")));
        }
        Ok(Self {
            kind: DistKind::IsotropicGaussian { sigma },
            dim,
        })
    }

    pub fn acg(axis: ScoringVector, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "ACG lambda must lie in (0, 1], got {lambda}"
            )));
        }
        Ok(Self {
            dim: axis.dim(),
            kind: DistKind::Acg { axis, lambda },
        })
    }

    /// Parses `uniform-sphere`, `gaussian:sigma=1.0` or
    /// `acg:lambda=0.1,axis=30deg` / `acg:lambda=0.1,axis=1;0;0`.
    pub fn parse(spec: &str, dim: usize) -> Result<Self> {
        let bad = |msg: String| Error::InvalidInput(format!("distribution '{spec}': {msg}"));
        let (name, args) = match spec.trim().split_once(':') {
            Some((n, a)) => (n.trim(), a.trim()),
            None => (spec.trim(), ""),
        };
        let mut kv = Vec::new();
        for part in args.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| bad(format!("expected key=value, got '{part}'")))?;
            kv.push((k.trim(), v.trim()));
        }
        let num = |v: &str| v.parse::<f64>().map_err(|e| bad(format!("'{v}': {e}")));
        match name {
            "uniform-sphere" | "uniform" | "sphere" => {
                if let Some((k, _)) = kv.first() {
                    return Err(bad(format!("unexpected parameter '{k}'")));
                }
                Ok(Self::uniform_sphere(dim))
            }
            "gaussian" => {
                let mut sigma = 1.0;
                for (k, v) in kv {
                    match k {
                        "sigma" => sigma = num(v)?,
                        _ => return Err(bad(format!("unknown parameter '{k}'"))),
                    }
                }
                Self::gaussian(dim, sigma)
            }
            "acg" => {
                let mut lambda = None;
                let mut axis = ScoringVector::basis(dim.max(2), 0);
                for (k, v) in kv {
                    match k {
                        "lambda" => lambda = Some(num(v)?),
                        "axis" => axis = parse_axis(v, dim).map_err(|e| bad(e.to_string()))?,
                        _ => return Err(bad(format!("unknown parameter '{k}'"))),
                    }
                }
                let lambda = lambda.ok_or_else(|| bad("missing lambda".into()))?;
                Self::acg(axis, lambda)
            }
            other => Err(bad(format!("unknown distribution '{other}'"))),
        }
    }

    pub fn with_dim(&self, dim: usize) -> Result<Self> {
        match &self.kind {
            DistKind::Acg { axis, .. } if axis.dim() != dim => Err(Error::DimensionMismatch {
                expected: dim,
                actual: axis.dim(),
            }),
            _ => Ok(Self {
                kind: self.kind.clone(),
                dim,
            }),
        }
    }
}

fn parse_axis(v: &str, dim: usize) -> Result<ScoringVector> {
    if let Some(deg) = v.strip_suffix("deg") {
        if dim != 2 {
            return Err(Error::InvalidInput(
                "axis in degrees is only valid for d = 2".into(),
            ));
        }
        let deg: f64 = deg
            .trim()
            .parse()
            .map_err(|e| Error::InvalidInput(format!("axis '{v}': {e}")))?;
        return Ok(ScoringVector::from_angle(deg.to_radians()));
    }
    let coords = v
        .split(';')
        .map(|c| {
            c.trim()
                .parse::<f64>()
                .map_err(|e| Error::InvalidInput(format!("axis '{v}': {e}")))
        })
        .collect::<Result<Vec<_>>>()?;
    if coords.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: coords.len(),
        });
    }
    ScoringVector::normalize(coords)
}

impl fmt::Display for ItemDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            DistKind::UniformSphere => write!(f, "uniform-sphere"),
            DistKind::IsotropicGaussian { sigma } => write!(f, "gaussian:sigma={sigma}"),
            DistKind::Acg { axis, lambda } => {
                let coords: Vec<String> = axis.coords().iter().map(|c| c.to_string()).collect();
                write!(f, "acg:lambda={lambda},axis={}", coords.join(";"))
            }
        }
    }
}

impl FromStr for DistKind {
    type Err = Error;

    /// Parses the distribution family for `d = 2`; use [`ItemDistribution::parse`]
    /// for other dimensions.
    fn from_str(s: &str) -> Result<Self> {
        ItemDistribution::parse(s, 2).map(|d| d.kind)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedSpec {
    pub master_seed: u64,
    pub stream_id: u64,
}

impl SeedSpec {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        Self {
            master_seed,
            stream_id,
        }
    }

    /// A child stream keyed by `key`.
    pub fn substream(&self, key: u64) -> Self {
        Self {
            master_seed: self.master_seed,
            stream_id: derive_seed(self.stream_id, &[key]),
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Hashes a master seed and a counter path into a 64-bit key.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(master), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

/// A ChaCha generator keyed by `(master, path)`.
pub fn rng_for(master: u64, path: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, path))
}

pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    z.clamp(-GAUSSIAN_CLIP, GAUSSIAN_CLIP)
}

/// Uniform draw from `S^{d-1}` via normalized Gaussian coordinates.
pub fn random_unit<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> ScoringVector {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| standard_normal(rng)).collect();
        if norm(&v) > 1e-300 {
            return ScoringVector::normalize(v).expect("finite non-zero draw");
        }
    }
}

/// Draws item `index` of the stream `seed`.
pub fn sample_item(dist: &ItemDistribution, seed: SeedSpec, index: u64) -> Item {
    let mut rng = rng_for(seed.master_seed, &[seed.stream_id, index]);
    let coords = match &dist.kind {
        DistKind::UniformSphere => random_unit(&mut rng, dist.dim).into_inner(),
        DistKind::IsotropicGaussian { sigma } => {
            (0..dist.dim).map(|_| sigma * standard_normal(&mut rng)).collect()
        }
        DistKind::Acg { axis, lambda } => loop {
            // Σ^{1/2} = √λ I + (1 - √λ) v vᵀ
            let g: Vec<f64> = (0..dist.dim).map(|_| standard_normal(&mut rng)).collect();
            let sl = lambda.sqrt();
            let proj: f64 = g.iter().zip(axis.coords()).map(|(a, b)| a * b).sum();
            let z: Vec<f64> = g
                .iter()
                .zip(axis.coords())
                .map(|(gi, vi)| sl * gi + (1.0 - sl) * proj * vi)
                .collect();
            let n = norm(&z);
            if n > 1e-300 {
                break z.into_iter().map(|c| c / n).collect();
            }
        },
    };
    Item::new(coords).expect("sampler produces finite coordinates")
}

/// Draws batch `batch_index` of `m` items. Batches with different indices
/// use disjoint substreams.
pub fn sample_batch(
    dist: &ItemDistribution,
    m: usize,
    seed: SeedSpec,
    batch_index: u64,
) -> Result<ItemBatch> {
    if m < 2 {
        return Err(Error::InvalidInput(format!("batch size must be >= 2, got {m}")));
    }
    let sub = seed.substream(batch_index);
    ItemBatch::new((0..m as u64).map(|p| sample_item(dist, sub, p)).collect())
}
