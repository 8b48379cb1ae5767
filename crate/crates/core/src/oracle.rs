//! Brute-force reference routines used as independent checks of the
//! optimizers: dense grid search over `S^1` with golden-section polishing,
//! and a plain projected descent for the Euclidean-mean objective.

use std::f64::consts::TAU;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::model::{dot, norm, Profile};
use crate::sampling::random_unit;

fn golden_section<F: Fn(f64) -> f64>(f: &F, mut lo: f64, mut hi: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - g * (hi - lo);
    let mut d = lo + g * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if hi - lo < 1e-14 {
            break;
        }
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - g * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + g * (hi - lo);
            fd = f(d);
        }
    }
    (lo + hi) / 2.0
}

fn wrap(a: f64) -> f64 {
    a.rem_euclid(TAU)
}

/// Global minimizer of `f` over angles in `[0, 2π)` by a grid of `points`
/// evaluations, polished by golden-section search in the winning cell.
pub fn s1_argmin<F: Fn(f64) -> f64>(f: F, points: usize) -> (f64, f64) {
    let h = TAU / points as f64;
    let (k, _) = (0..points)
        .map(|k| (k, f(k as f64 * h)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("grid is non-empty");
    let c = k as f64 * h;
    let a = golden_section(&f, c - h, c + h);
    let a = if f(a) <= f(c) { wrap(a) } else { c };
    (a, f(a))
}

/// Every grid-local minimum whose polished value is within `tol` of the
/// global minimum.
pub fn s1_argmins<F: Fn(f64) -> f64>(f: F, points: usize, tol: f64) -> Vec<f64> {
    let h = TAU / points as f64;
    let vals: Vec<f64> = (0..points).map(|k| f(k as f64 * h)).collect();
    let mut cands = Vec::new();
    for k in 0..points {
        let prev = vals[(k + points - 1) % points];
        let next = vals[(k + 1) % points];
        if vals[k] <= prev && vals[k] <= next {
            let c = k as f64 * h;
            let a = golden_section(&f, c - h, c + h);
            let a = if f(a) <= vals[k] { wrap(a) } else { c };
            cands.push((a, f(a)));
        }
    }
    let best = cands.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
    cands
        .into_iter()
        .filter(|c| c.1 <= best + tol)
        .map(|c| c.0)
        .collect()
}

/// Minimizes `Σ α_i ‖θ - θ_i‖²` over the sphere by fixed-step projected
/// gradient descent from several random starts (for `d = 2` a grid is used
/// instead). Returns the minimizer's coordinates.
pub fn euclidean_mean_numeric(p: &Profile, seed: u64) -> Vec<f64> {
    let objective = |x: &[f64]| -> f64 {
        p.thetas()
            .iter()
            .zip(p.alphas())
            .map(|(t, a)| {
                a * x
                    .iter()
                    .zip(t.coords())
                    .map(|(u, v)| (u - v) * (u - v))
                    .sum::<f64>()
            })
            .sum()
    };
    if p.dim() == 2 {
        let (a, _) = s1_argmin(|a| objective(&[a.cos(), a.sin()]), 200_000);
        return vec![a.cos(), a.sin()];
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(Vec<f64>, f64)> = None;
    for _ in 0..6 {
        let mut x = random_unit(&mut rng, p.dim()).into_inner();
        for _ in 0..100_000 {
            // ∇ = 2 Σ α (x - θ_i); step 0.25 then renormalize.
            let mut g = vec![0.0; x.len()];
            for (t, a) in p.thetas().iter().zip(p.alphas()) {
                for ((gi, xi), ti) in g.iter_mut().zip(&x).zip(t.coords()) {
                    *gi += 2.0 * a * (xi - ti);
                }
            }
            let radial = dot(&g, &x);
            let tangential: f64 = g
                .iter()
                .zip(&x)
                .map(|(gi, xi)| (gi - radial * xi).powi(2))
                .sum::<f64>()
                .sqrt();
            if tangential < 1e-15 {
                break;
            }
            let mut y: Vec<f64> = x.iter().zip(&g).map(|(xi, gi)| xi - 0.25 * gi).collect();
            let n = norm(&y);
            if n < 1e-300 {
                break;
            }
            y.iter_mut().for_each(|c| *c /= n);
            x = y;
        }
        let v = objective(&x);
        if best.as_ref().is_none_or(|b| v < b.1) {
            best = Some((x, v));
        }
    }
    best.expect("at least one start").0
}
