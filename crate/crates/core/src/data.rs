//! Profile and comparison files, per-voter logistic fits, heterogeneity
//! statistics, and synthetic profile constructors.
//!
//! Profile CSV: a header `theta_0,…,theta_{d-1}[,weight]` then one voter per
//! row. Comparison CSV: `voter_id,a_0,…,a_{d-1},b_0,…,b_{d-1},chose_a`.
//! Lines starting with `#` are comments in both.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::index;
use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    angle_between, dot, exp_map_raw, norm, project_tangent, Profile, ScoringVector,
    UNIT_NORM_TOL, WEIGHT_SUM_TOL,
};
use crate::sampling::{random_unit, rng_for};

const SUBSAMPLE_STREAM: u64 = 0xd5;

fn csv_reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(r)
}

fn parse_err(line: u64, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line: line as usize,
        column,
        message: message.into(),
    }
}

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    parse_err(line, 0, e.to_string())
}

fn parse_f64(field: &str, line: u64, column: usize) -> Result<f64> {
    let v: f64 = field
        .parse()
        .map_err(|_| parse_err(line, column, format!("'{field}' is not a number")))?;
    if !v.is_finite() {
        return Err(parse_err(line, column, format!("'{field}' is not finite")));
    }
    Ok(v)
}

/// Reads a profile. Rows not already unit norm (within `1e-12`) are
/// normalized; a missing weight column means uniform weights, and weights
/// not already summing to 1 (within `1e-9`) are rescaled.
pub fn read_profile_csv<R: Read>(reader: R) -> Result<Profile> {
    let mut rdr = csv_reader(reader);
    let header = rdr.headers().map_err(csv_err)?.clone();
    let names: Vec<&str> = header.iter().collect();
    let has_weight = names.last() == Some(&"weight");
    let d = names.len() - usize::from(has_weight);
    for (k, name) in names.iter().take(d).enumerate() {
        if *name != format!("theta_{k}") {
            return Err(parse_err(1, k + 1, format!("expected header 'theta_{k}', got '{name}'")));
        }
    }
    if d < 2 {
        return Err(parse_err(1, 1, "profile needs at least two theta columns"));
    }
    let mut thetas = Vec::new();
    let mut weights = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != names.len() {
            return Err(parse_err(
                line,
                rec.len().min(names.len()) + 1,
                format!("expected {} fields, got {}", names.len(), rec.len()),
            ));
        }
        let coords = (0..d)
            .map(|k| parse_f64(&rec[k], line, k + 1))
            .collect::<Result<Vec<f64>>>()?;
        let n = norm(&coords);
        let theta = if n == 0.0 {
            return Err(Error::ZeroVector);
        } else if (n - 1.0).abs() <= UNIT_NORM_TOL {
            ScoringVector::new(coords)?
        } else {
            ScoringVector::normalize(coords)?
        };
        thetas.push(theta);
        if has_weight {
            let w = parse_f64(&rec[d], line, d + 1)?;
            if w <= 0.0 {
                return Err(parse_err(line, d + 1, format!("weight {w} is not positive")));
            }
            weights.push(w);
        }
    }
    if thetas.is_empty() {
        return Err(parse_err(1, 0, "profile file has no voters"));
    }
    if !has_weight {
        return Profile::uniform(thetas);
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > WEIGHT_SUM_TOL {
        weights.iter_mut().for_each(|w| *w /= total);
    }
    Profile::new(thetas, weights)
}

pub fn load_profile_csv(path: impl AsRef<Path>) -> Result<Profile> {
    let f = std::fs::File::open(path.as_ref())
        .map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))?;
    read_profile_csv(f)
}

/// Writes a profile with its weights. `comments` are emitted as `#` lines
/// before the header. Floats use shortest round-trip formatting.
pub fn write_profile_csv<W: Write>(p: &Profile, comments: &[String], mut out: W) -> Result<()> {
    for c in comments {
        writeln!(out, "# {c}")?;
    }
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = (0..p.dim()).map(|k| format!("theta_{k}")).collect();
    header.push("weight".into());
    w.write_record(&header).map_err(csv_err)?;
    for (t, a) in p.thetas().iter().zip(p.alphas()) {
        let mut row: Vec<String> = t.coords().iter().map(|c| c.to_string()).collect();
        row.push(a.to_string());
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_profile_csv(p: &Profile, comments: &[String], path: impl AsRef<Path>) -> Result<()> {
    let f = std::fs::File::create(path.as_ref())
        .map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))?;
    write_profile_csv(p, comments, std::io::BufWriter::new(f))
}

/// One pairwise choice by one voter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRecord {
    pub voter_id: String,
    pub features_a: Vec<f64>,
    pub features_b: Vec<f64>,
    pub chose_a: bool,
}

impl ComparisonRecord {
    pub fn difference(&self) -> Vec<f64> {
        self.features_a
            .iter()
            .zip(&self.features_b)
            .map(|(a, b)| a - b)
            .collect()
    }
}

pub fn read_comparisons_csv<R: Read>(reader: R) -> Result<Vec<ComparisonRecord>> {
    let mut rdr = csv_reader(reader);
    let header = rdr.headers().map_err(csv_err)?.clone();
    let names: Vec<&str> = header.iter().collect();
    if names.len() < 6 || names[0] != "voter_id" || names.last() != Some(&"chose_a") {
        return Err(parse_err(
            1,
            1,
            "expected header voter_id,a_0..a_{d-1},b_0..b_{d-1},chose_a",
        ));
    }
    let inner = names.len() - 2;
    if !inner.is_multiple_of(2) {
        return Err(parse_err(1, names.len(), "feature columns must come in a_/b_ pairs"));
    }
    let d = inner / 2;
    for k in 0..d {
        if names[1 + k] != format!("a_{k}") {
            return Err(parse_err(1, 2 + k, format!("expected 'a_{k}', got '{}'", names[1 + k])));
        }
        if names[1 + d + k] != format!("b_{k}") {
            return Err(parse_err(
                1,
                2 + d + k,
                format!("expected 'b_{k}', got '{}'", names[1 + d + k]),
            ));
        }
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != names.len() {
            return Err(parse_err(
                line,
                rec.len().min(names.len()) + 1,
                format!("expected {} fields, got {}", names.len(), rec.len()),
            ));
        }
        let features_a = (0..d)
            .map(|k| parse_f64(&rec[1 + k], line, 2 + k))
            .collect::<Result<Vec<_>>>()?;
        let features_b = (0..d)
            .map(|k| parse_f64(&rec[1 + d + k], line, 2 + d + k))
            .collect::<Result<Vec<_>>>()?;
        let chose_a = match rec[names.len() - 1].to_ascii_lowercase().as_str() {
            "1" | "true" | "t" | "yes" => true,
            "0" | "false" | "f" | "no" => false,
            other => {
                return Err(parse_err(
                    line,
                    names.len(),
                    format!("'{other}' is not a boolean"),
                ))
            }
        };
        out.push(ComparisonRecord {
            voter_id: rec[0].to_string(),
            features_a,
            features_b,
            chose_a,
        });
    }
    if out.is_empty() {
        return Err(parse_err(1, 0, "comparison file has no records"));
    }
    Ok(out)
}

/// Groups records by voter in order of first appearance.
pub fn group_by_voter(records: Vec<ComparisonRecord>) -> Vec<(String, Vec<ComparisonRecord>)> {
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut groups: Vec<(String, Vec<ComparisonRecord>)> = Vec::new();
    for r in records {
        match index.get(&r.voter_id) {
            Some(&i) => groups[i].1.push(r),
            None => {
                index.insert(r.voter_id.clone(), groups.len());
                groups.push((r.voter_id.clone(), vec![r]));
            }
        }
    }
    groups
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub max_iters: usize,
    pub tol_grad: f64,
    /// Below this coefficient norm the fit is reported as degenerate.
    pub degenerate_norm: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iters: 200,
            tol_grad: 1e-8,
            degenerate_norm: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub records: usize,
    pub iterations: usize,
    pub grad_norm: f64,
    pub coef_norm: f64,
    pub converged: bool,
    /// Standardization is computed on signed differences `x_a - x_b`.
    pub standardization: String,
    /// Coordinates with zero variance, left uncentered and unscaled.
    pub passthrough_coords: Vec<usize>,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn softplus(z: f64) -> f64 {
    // log(1 + e^z)
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Fits `P(choose a) = σ(βᵀ(x_a - x_b))` to one voter's records with an
/// `‖β‖² / (2C)` penalty and no intercept, by gradient descent with
/// backtracking. Differences are standardized per coordinate first. Returns
/// `β / ‖β‖`.
pub fn fit_voter_logistic(
    records: &[ComparisonRecord],
    l2_c: f64,
    opts: &FitOptions,
) -> Result<(ScoringVector, FitDiagnostics)> {
    if records.is_empty() {
        return Err(Error::InvalidInput("no comparison records".into()));
    }
    if !(l2_c > 0.0) {
        return Err(Error::InvalidInput(format!("C must be positive, got {l2_c}")));
    }
    let d = records[0].features_a.len();
    let mut z: Vec<Vec<f64>> = Vec::with_capacity(records.len());
    for r in records {
        if r.features_a.len() != d || r.features_b.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: r.features_a.len().max(r.features_b.len()),
            });
        }
        z.push(r.difference());
    }
    if z.iter().all(|v| v.iter().all(|c| *c == 0.0)) {
        return Err(Error::DegenerateFit { norm: 0.0 });
    }
    let n = z.len() as f64;
    let mut passthrough = Vec::new();
    for k in 0..d {
        let mean = z.iter().map(|v| v[k]).sum::<f64>() / n;
        let var = z.iter().map(|v| (v[k] - mean).powi(2)).sum::<f64>() / n;
        let sd = var.sqrt();
        if sd <= 1e-12 * mean.abs().max(1.0) {
            passthrough.push(k);
            continue;
        }
        z.iter_mut().for_each(|v| v[k] = (v[k] - mean) / sd);
    }
    let y: Vec<f64> = records.iter().map(|r| if r.chose_a { 1.0 } else { -1.0 }).collect();
    let lambda = 1.0 / (2.0 * l2_c);

    let loss = |b: &[f64]| -> f64 {
        z.iter()
            .zip(&y)
            .map(|(zi, yi)| softplus(-yi * dot(b, zi)))
            .sum::<f64>()
            + lambda * dot(b, b)
    };
    let grad = |b: &[f64]| -> Vec<f64> {
        let mut g: Vec<f64> = b.iter().map(|bi| 2.0 * lambda * bi).collect();
        for (zi, yi) in z.iter().zip(&y) {
            let w = -yi * sigmoid(-yi * dot(b, zi));
            g.iter_mut().zip(zi).for_each(|(gk, zk)| *gk += w * zk);
        }
        g
    };

    // Hessian of the penalized loss; positive definite through the L2 term.
    let hessian = |b: &[f64]| -> Vec<Vec<f64>> {
        let mut h = vec![vec![0.0; d]; d];
        for (k, row) in h.iter_mut().enumerate() {
            row[k] = 2.0 * lambda;
        }
        for zi in &z {
            let s = sigmoid(dot(b, zi));
            let w = s * (1.0 - s);
            for j in 0..d {
                for k in 0..d {
                    h[j][k] += w * zi[j] * zi[k];
                }
            }
        }
        h
    };

    // Damped Newton. Acceptance falls back to gradient decrease once loss
    // differences drop below the resolution of the summed loss.
    let mut beta = vec![0.0; d];
    let mut f = loss(&beta);
    let mut g = grad(&beta);
    let mut gn = norm(&g);
    let mut iterations = 0;
    while gn > opts.tol_grad && iterations < opts.max_iters {
        iterations += 1;
        let dir = cholesky_solve(hessian(&beta), &g).unwrap_or_else(|| g.clone());
        let slope = dot(&g, &dir);
        let mut step = 1.0;
        let mut accepted = false;
        while step > 1e-20 {
            let cand: Vec<f64> = beta.iter().zip(&dir).map(|(b, dk)| b - step * dk).collect();
            let fc = loss(&cand);
            let gc = grad(&cand);
            let gcn = norm(&gc);
            if fc <= f - 1e-4 * step * slope || (fc <= f + 1e-12 * f.abs() && gcn < gn) {
                beta = cand;
                f = fc;
                g = gc;
                gn = gcn;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    let coef_norm = norm(&beta);
    let diag = FitDiagnostics {
        records: records.len(),
        iterations,
        grad_norm: gn,
        coef_norm,
        converged: gn <= opts.tol_grad,
        standardization: "signed-differences".into(),
        passthrough_coords: passthrough,
    };
    if coef_norm < opts.degenerate_norm {
        return Err(Error::DegenerateFit { norm: coef_norm });
    }
    Ok((ScoringVector::normalize(beta)?, diag))
}

/// Solves `a x = b` for symmetric positive definite `a`.
fn cholesky_solve(mut a: Vec<Vec<f64>>, b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    for j in 0..n {
        let diag = a[j][j] - (0..j).map(|k| a[j][k] * a[j][k]).sum::<f64>();
        if !(diag > 0.0) {
            return None;
        }
        a[j][j] = diag.sqrt();
        for i in j + 1..n {
            let v = a[i][j] - (0..j).map(|k| a[i][k] * a[j][k]).sum::<f64>();
            a[i][j] = v / a[j][j];
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        y[i] = (b[i] - (0..i).map(|k| a[i][k] * y[k]).sum::<f64>()) / a[i][i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        x[i] = (y[i] - (i + 1..n).map(|k| a[k][i] * x[k]).sum::<f64>()) / a[i][i];
    }
    Some(x)
}

/// Spread of pairwise angles between voters, in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeterogeneityStats {
    pub max_pairwise: f64,
    pub mean_pairwise: f64,
    /// Population standard deviation.
    pub std_pairwise: f64,
}

fn pairwise_angles_deg(thetas: &[&[f64]]) -> Vec<f64> {
    let mut out = Vec::with_capacity(thetas.len() * thetas.len().saturating_sub(1) / 2);
    for i in 0..thetas.len() {
        for j in i + 1..thetas.len() {
            out.push(angle_between(thetas[i], thetas[j]).to_degrees());
        }
    }
    out
}

fn stats_of(angles: &[f64]) -> HeterogeneityStats {
    let n = angles.len() as f64;
    let mean = angles.iter().sum::<f64>() / n;
    let var = angles.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
    HeterogeneityStats {
        max_pairwise: angles.iter().copied().fold(0.0, f64::max),
        mean_pairwise: mean,
        std_pairwise: var.sqrt(),
    }
}

pub fn pairwise_angle_stats(p: &Profile) -> Result<HeterogeneityStats> {
    if p.len() < 2 {
        return Err(Error::InvalidInput("pairwise statistics need n >= 2".into()));
    }
    let coords: Vec<&[f64]> = p.thetas().iter().map(|t| t.coords()).collect();
    Ok(stats_of(&pairwise_angles_deg(&coords)))
}

/// Projection norm at or below which a voter is dropped from a coordinate pair.
pub const PROJECTION_TOL: f64 = 1e-10;

/// Variance (deg²) of pairwise angles after projecting every voter onto
/// coordinates `(j, k)`, with the projected profile; `None` if some voter's
/// projection vanishes.
pub fn pair_variance(p: &Profile, j: usize, k: usize) -> Option<(f64, Profile)> {
    let mut projected = Vec::with_capacity(p.len());
    for t in p.thetas() {
        let v = vec![t.coords()[j], t.coords()[k]];
        if norm(&v) <= PROJECTION_TOL {
            return None;
        }
        projected.push(ScoringVector::normalize(v).ok()?);
    }
    let coords: Vec<&[f64]> = projected.iter().map(|t| t.coords()).collect();
    let s = stats_of(&pairwise_angles_deg(&coords));
    let prof = Profile::new(projected, p.alphas().to_vec()).ok()?;
    Some((s.std_pairwise * s.std_pairwise, prof))
}

/// The coordinate pair whose 2-D projection maximizes the variance of
/// pairwise voter angles; ties go to the lexicographically first pair.
pub fn select_2d_pair(p: &Profile) -> Result<(usize, usize, Profile)> {
    if p.len() < 2 {
        return Err(Error::InvalidInput("pair selection needs n >= 2".into()));
    }
    let d = p.dim();
    let mut best: Option<(usize, usize, f64, Profile)> = None;
    for j in 0..d {
        for k in j + 1..d {
            if let Some((var, prof)) = pair_variance(p, j, k) {
                if best.as_ref().is_none_or(|b| var > b.2) {
                    best = Some((j, k, var, prof));
                }
            }
        }
    }
    best.map(|(j, k, _, prof)| (j, k, prof)).ok_or(Error::NoValidPair)
}

/// Draws `n_sub` voters uniformly without replacement until the standard
/// deviation of their pairwise angles reaches `threshold_deg`. Attempt `a`
/// uses its own generator derived from `(seed, a)`. The result carries
/// uniform weights.
pub fn heterogeneity_subsample(
    p: &Profile,
    n_sub: usize,
    threshold_deg: f64,
    seed: u64,
    max_tries: usize,
) -> Result<Profile> {
    if n_sub < 2 || n_sub > p.len() {
        return Err(Error::InvalidInput(format!(
            "subsample size {n_sub} must lie in 2..={}",
            p.len()
        )));
    }
    let tries = if n_sub == p.len() { 1 } else { max_tries };
    for attempt in 0..tries {
        let mut rng = rng_for(seed, &[SUBSAMPLE_STREAM, attempt as u64]);
        let mut idx = index::sample(&mut rng, p.len(), n_sub).into_vec();
        idx.sort_unstable();
        let coords: Vec<&[f64]> = idx.iter().map(|&i| p.thetas()[i].coords()).collect();
        let s = stats_of(&pairwise_angles_deg(&coords));
        if s.std_pairwise >= threshold_deg {
            return Profile::uniform(idx.iter().map(|&i| p.thetas()[i].clone()).collect());
        }
    }
    Err(Error::FilterExhausted { tries })
}

/// `θ1 = (-1, 0)` with weight `alpha1`, `θ2 = (1, 0)` with `1 - alpha1`.
pub fn antipodal_profile(alpha1: f64) -> Result<Profile> {
    check_alpha1(alpha1)?;
    Profile::new(
        vec![
            ScoringVector::new(vec![-1.0, 0.0])?,
            ScoringVector::new(vec![1.0, 0.0])?,
        ],
        vec![alpha1, 1.0 - alpha1],
    )
}

/// `θ1` at angle 0 and `θ2` at `phi_deg` degrees on `S^1`.
pub fn two_voter_profile(phi_deg: f64, alpha1: f64) -> Result<Profile> {
    check_alpha1(alpha1)?;
    if !(0.0..=180.0).contains(&phi_deg) {
        return Err(Error::InvalidInput(format!("phi must lie in [0, 180], got {phi_deg}")));
    }
    let second = if phi_deg == 180.0 {
        ScoringVector::new(vec![-1.0, 0.0])?
    } else {
        ScoringVector::from_angle(phi_deg.to_radians())
    };
    Profile::new(
        vec![ScoringVector::basis(2, 0), second],
        vec![alpha1, 1.0 - alpha1],
    )
}

fn check_alpha1(alpha1: f64) -> Result<()> {
    if alpha1 > 0.0 && alpha1 < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("alpha1 must lie in (0, 1), got {alpha1}")))
    }
}

/// Flat Dirichlet weights.
pub fn dirichlet_weights<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    loop {
        let g: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(Exp1)).collect();
        let s: f64 = g.iter().sum();
        let w: Vec<f64> = g.iter().map(|x| x / s).collect();
        if w.iter().all(|&x| x > 0.0) {
            return w;
        }
    }
}

/// Voters uniform on `S^{d-1}`, flat-Dirichlet weights.
pub fn random_profile<R: Rng + ?Sized>(rng: &mut R, n: usize, d: usize) -> Profile {
    let thetas = (0..n).map(|_| random_unit(rng, d)).collect();
    Profile::new(thetas, dirichlet_weights(rng, n)).expect("valid random profile")
}

/// A point at geodesic distance `angle` from `center` in a uniformly random
/// tangent direction.
pub fn random_at_distance<R: Rng + ?Sized>(
    rng: &mut R,
    center: &ScoringVector,
    angle: f64,
) -> ScoringVector {
    loop {
        let mut v = random_unit(rng, center.dim()).into_inner();
        project_tangent(center.coords(), &mut v);
        let n = norm(&v);
        if n > 1e-8 {
            v.iter_mut().for_each(|c| *c *= angle / n);
            return ScoringVector::normalize(exp_map_raw(center.coords(), &v))
                .expect("exp map stays on the sphere");
        }
    }
}

/// Voters within angular radius `radius` of a uniformly random center.
/// Returns the profile and the center.
pub fn clustered_profile<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    d: usize,
    radius: f64,
) -> (Profile, ScoringVector) {
    let center = random_unit(rng, d);
    let thetas = (0..n)
        .map(|_| {
            let r = radius * rng.random::<f64>();
            random_at_distance(rng, &center, r)
        })
        .collect();
    let p = Profile::new(thetas, dirichlet_weights(rng, n)).expect("valid clustered profile");
    (p, center)
}

/// Two tight groups of voters on `S^1` whose centers are `separation_deg`
/// apart; group one holds `weight1` of the mass. Voters are spread evenly
/// within `spread_deg` of their center and share their group's weight.
pub fn two_cluster_profile(
    per_cluster: usize,
    separation_deg: f64,
    spread_deg: f64,
    weight1: f64,
) -> Result<Profile> {
    check_alpha1(weight1)?;
    if per_cluster == 0 {
        return Err(Error::InvalidInput("clusters need at least one voter".into()));
    }
    let offsets: Vec<f64> = (0..per_cluster)
        .map(|k| {
            if per_cluster == 1 {
                0.0
            } else {
                -spread_deg + 2.0 * spread_deg * k as f64 / (per_cluster - 1) as f64
            }
        })
        .collect();
    let mut thetas = Vec::new();
    let mut alphas = Vec::new();
    for (c, w) in [(0.0, weight1), (separation_deg, 1.0 - weight1)] {
        for o in &offsets {
            thetas.push(ScoringVector::from_angle((c + o) * PI / 180.0));
            alphas.push(w / per_cluster as f64);
        }
    }
    Profile::new(thetas, alphas)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profile_csv_examples() {
        let p = read_profile_csv("theta_0,theta_1\n1,0\n0,1\n".as_bytes()).unwrap();
        assert_eq!(p.alphas(), &[0.5, 0.5]);
        let p = read_profile_csv("# scaled rows\ntheta_0,theta_1\n2,0\n0,2\n".as_bytes()).unwrap();
        assert_eq!(p.thetas()[0].coords(), &[1.0, 0.0]);
        assert_eq!(p.thetas()[1].coords(), &[0.0, 1.0]);
        let p = read_profile_csv("theta_0,theta_1,weight\n1,0,3\n0,1,1\n".as_bytes()).unwrap();
        assert_eq!(p.alphas(), &[0.75, 0.25]);
    }

    #[test]
    fn profile_csv_errors() {
        assert!(matches!(
            read_profile_csv("theta_0,theta_1\n1,0\n0,x\n".as_bytes()),
            Err(Error::Parse { line: 3, column: 2, .. })
        ));
        assert_eq!(
            read_profile_csv("theta_0,theta_1\n0,0\n".as_bytes()),
            Err(Error::ZeroVector)
        );
        assert!(read_profile_csv("x,y\n1,0\n".as_bytes()).is_err());
        assert!(read_profile_csv("theta_0,theta_1,weight\n1,0,-1\n".as_bytes()).is_err());
        assert!(read_profile_csv("theta_0,theta_1\n1,0,4\n".as_bytes()).is_err());
        assert!(read_profile_csv("".as_bytes()).is_err());
    }

    #[test]
    fn angle_stats_examples() {
        let e = |a: f64| ScoringVector::from_angle(a.to_radians());
        let same = Profile::uniform(vec![e(10.0), e(10.0)]).unwrap();
        let s = pairwise_angle_stats(&same).unwrap();
        assert_eq!((s.max_pairwise, s.mean_pairwise, s.std_pairwise), (0.0, 0.0, 0.0));
        let anti = antipodal_profile(0.5).unwrap();
        let s = pairwise_angle_stats(&anti).unwrap();
        assert_eq!((s.max_pairwise, s.mean_pairwise, s.std_pairwise), (180.0, 180.0, 0.0));
        let three = Profile::uniform(vec![
            ScoringVector::new(vec![1.0, 0.0]).unwrap(),
            ScoringVector::new(vec![0.0, 1.0]).unwrap(),
            ScoringVector::new(vec![-1.0, 0.0]).unwrap(),
        ])
        .unwrap();
        let s = pairwise_angle_stats(&three).unwrap();
        assert!((s.max_pairwise - 180.0).abs() < 1e-12);
        assert!((s.mean_pairwise - 120.0).abs() < 1e-12);
        assert!((s.std_pairwise - 1800f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn pair_selection_examples() {
        let p = Profile::uniform(vec![ScoringVector::from_angle(0.3), ScoringVector::from_angle(2.0)])
            .unwrap();
        assert_eq!(select_2d_pair(&p).unwrap().0..select_2d_pair(&p).unwrap().1, 0..1);

        let same = Profile::uniform(vec![
            ScoringVector::normalize(vec![1.0, 2.0, 3.0]).unwrap(),
            ScoringVector::normalize(vec![1.0, 2.0, 3.0]).unwrap(),
        ])
        .unwrap();
        let (j, k, _) = select_2d_pair(&same).unwrap();
        assert_eq!((j, k), (0, 1));

        let basis = Profile::uniform((0..3).map(|k| ScoringVector::basis(3, k)).collect()).unwrap();
        assert_eq!(select_2d_pair(&basis), Err(Error::NoValidPair));
    }

    #[test]
    fn subsample_examples() {
        let mut rng = rng_for(11, &[]);
        let p = random_profile(&mut rng, 12, 3);
        let first = heterogeneity_subsample(&p, 4, 0.0, 9, 100).unwrap();
        assert_eq!(first.len(), 4);
        assert_eq!(first.alphas(), &[0.25; 4]);

        let whole_std = pairwise_angle_stats(&p).unwrap().std_pairwise;
        assert!(heterogeneity_subsample(&p, 12, whole_std, 1, 100).is_ok());
        assert_eq!(
            heterogeneity_subsample(&p, 12, whole_std + 1.0, 1, 100),
            Err(Error::FilterExhausted { tries: 1 })
        );

        let anti = antipodal_profile(0.5).unwrap();
        assert!(matches!(
            heterogeneity_subsample(&anti, 2, 65.0, 3, 50),
            Err(Error::FilterExhausted { .. })
        ));
    }

    #[test]
    fn synthetic_constructors() {
        assert_eq!(antipodal_profile(0.3).unwrap().alphas(), &[0.3, 0.7]);
        let p = antipodal_profile(1.0 / 3.0).unwrap();
        assert!((p.alphas()[1] - 2.0 / 3.0).abs() < 1e-15);
        assert!(antipodal_profile(1.0).is_err());

        let t = two_voter_profile(180.0, 0.6).unwrap();
        let a = antipodal_profile(0.6).unwrap();
        assert_eq!(t.thetas()[0], a.thetas()[1]);
        assert_eq!(t.thetas()[1], a.thetas()[0]);
        let t = two_voter_profile(0.0, 0.6).unwrap();
        assert_eq!(t.thetas()[0], t.thetas()[1]);
        let t = two_voter_profile(90.0, 0.7).unwrap();
        let d = angle_between(t.thetas()[0].coords(), t.thetas()[1].coords());
        assert!((d - PI / 2.0).abs() < 1e-15);
    }

    #[test]
    fn clustered_profiles_respect_radius() {
        let mut rng = rng_for(2, &[]);
        for _ in 0..50 {
            let (p, c) = clustered_profile(&mut rng, 5, 4, 0.5);
            for t in p.thetas() {
                assert!(angle_between(t.coords(), c.coords()) <= 0.5 + 1e-12);
            }
        }
    }

    fn rec(a: &[f64], b: &[f64], chose_a: bool) -> ComparisonRecord {
        ComparisonRecord {
            voter_id: "v".into(),
            features_a: a.to_vec(),
            features_b: b.to_vec(),
            chose_a,
        }
    }

    #[test]
    fn logistic_fit_examples() {
        let opts = FitOptions::default();
        let (beta, diag) = fit_voter_logistic(&[rec(&[1.0, 0.0], &[0.0, 0.0], true)], 1.0, &opts).unwrap();
        assert!(beta.coords()[0] > 0.0 && beta.coords()[1].abs() < 1e-12);
        assert!(diag.converged);

        let sym = [
            rec(&[1.0, 2.0], &[0.0, 1.0], true),
            rec(&[1.0, 2.0], &[0.0, 1.0], false),
            rec(&[0.5, -1.0], &[2.0, 0.0], true),
            rec(&[0.5, -1.0], &[2.0, 0.0], false),
        ];
        assert!(matches!(
            fit_voter_logistic(&sym, 1.0, &opts),
            Err(Error::DegenerateFit { .. })
        ));
        let flat = [rec(&[1.0, 2.0], &[1.0, 2.0], true)];
        assert_eq!(
            fit_voter_logistic(&flat, 1.0, &opts),
            Err(Error::DegenerateFit { norm: 0.0 })
        );
    }

    #[test]
    fn comparisons_csv_parses_and_groups() {
        let text = "voter_id,a_0,a_1,b_0,b_1,chose_a\n\
                    x,1,0,0,1,1\n\
                    # comment\n\
                    y,0,1,1,0,false\n\
                    x,2,2,1,1,true\n";
        let recs = read_comparisons_csv(text.as_bytes()).unwrap();
        assert_eq!(recs.len(), 3);
        let groups = group_by_voter(recs);
        assert_eq!(groups.len(), 2);
        assert_eq!(groups[0].0, "x");
        assert_eq!(groups[0].1.len(), 2);
        assert!(read_comparisons_csv("voter_id,a_0,a_1,b_0,b_1,chose_a\n".as_bytes()).is_err());
        assert!(read_comparisons_csv("".as_bytes()).is_err());
        assert!(read_comparisons_csv("voter_id,a_0,a_1,b_0,b_1,chose_a\nx,1,0,0,1,maybe\n".as_bytes()).is_err());
    }
}
