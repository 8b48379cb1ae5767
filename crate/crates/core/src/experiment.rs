//! Runners behind the `evaluate` and `sweep` commands and their output
//! files. Every file carries the resolved configuration and master seed.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, MetricName, SweepConfig, SweepVar};
use crate::data::{heterogeneity_subsample, two_voter_profile};
use crate::error::{Error, Result};
use crate::metrics::{ip_samples, ip_tilde_summary, sample_batches, summarize, EvalReport, IpTildeSummary};
use crate::model::{Profile, ScoringVector};
use crate::rules::{Mechanism, OptimizerOptions};
use crate::sampling::{derive_seed, ItemDistribution};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

const OPTIMIZER_STREAM: u64 = 0x0f;
const SUBSAMPLE_STREAM: u64 = 0x5b;

/// Optimizer options for the fixed rules of a run.
pub fn optimizer_for(seed: u64) -> OptimizerOptions {
    OptimizerOptions::with_seed(derive_seed(seed, &[OPTIMIZER_STREAM]))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluateRow {
    pub dataset: String,
    pub d: usize,
    pub report: EvalReport,
    pub ip_tilde: Option<IpTildeSummary>,
}

/// Evaluates every rule at every batch size. All rules at one `m` see the
/// same batches.
pub fn run_evaluate(cfg: &ExperimentConfig, p: &Profile) -> Result<Vec<EvaluateRow>> {
    let dist = ItemDistribution::parse(&cfg.distribution, p.dim())?;
    let want_tilde = cfg.metrics.contains(&MetricName::IpTilde);
    if want_tilde && p.len() != 2 {
        return Err(Error::InvalidInput(format!(
            "ip_tilde needs a two-voter profile, got {} voters",
            p.len()
        )));
    }
    let opts = optimizer_for(cfg.seed);
    let rules = cfg
        .rules
        .iter()
        .map(|m| Ok((*m, m.prepare(p, &opts)?)))
        .collect::<Result<Vec<_>>>()?;
    let dataset = cfg.profile.dataset_name();
    let mut rows = Vec::new();
    for &m in &cfg.m {
        if cfg.batches < 2 {
            return Err(Error::InvalidInput(format!("need R >= 2, got {}", cfg.batches)));
        }
        let xs = sample_batches(&dist, m, cfg.batches, cfg.seed)?;
        for (mech, rule) in &rules {
            let report = summarize(mech.name(), &ip_samples(rule, p, &xs)?, m, cfg.seed);
            let ip_tilde = if want_tilde {
                Some(ip_tilde_summary(rule, p, &xs)?)
            } else {
                None
            };
            rows.push(EvaluateRow {
                dataset: dataset.clone(),
                d: p.dim(),
                report,
                ip_tilde,
            });
        }
    }
    Ok(rows)
}

fn manifest(command: &str, cfg: &ExperimentConfig, sweep: Option<&SweepConfig>) -> Value {
    let mut v = json!({
        "tool": "propagg",
        "version": VERSION,
        "command": command,
        "seed": cfg.seed,
        "config": cfg,
    });
    if let Some(s) = sweep {
        v["sweep"] = json!(s);
    }
    v
}

fn write_json(path: &Path, v: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(v).map_err(|e| Error::Io(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn create(path: &Path) -> Result<std::io::BufWriter<fs::File>> {
    fs::File::create(path)
        .map(std::io::BufWriter::new)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn csv_preamble<W: Write>(out: &mut W, manifest: &Value) -> Result<()> {
    writeln!(out, "# propagg {VERSION}")?;
    writeln!(out, "# manifest: {manifest}")?;
    Ok(())
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

/// Writes `results.csv`, `results.json` and `manifest.json` into the output
/// directory.
pub fn write_evaluate_outputs(cfg: &ExperimentConfig, rows: &[EvaluateRow]) -> Result<()> {
    let dir = &cfg.output_dir;
    fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    let man = manifest("evaluate", cfg, None);
    write_json(&dir.join("manifest.json"), &man)?;

    let n = rows.first().map_or(0, |r| r.report.per_voter_mean_ip.len());
    let tilde = cfg.metrics.contains(&MetricName::IpTilde);
    let mut f = create(&dir.join("results.csv"))?;
    csv_preamble(&mut f, &man)?;
    let mut w = csv::Writer::from_writer(f);
    let mut header = EvalReport::csv_header(n);
    if tilde {
        header.extend(
            ["ip_tilde_0", "ip_tilde_1", "ip_tilde_0_se", "ip_tilde_1_se", "contested_batches"]
                .map(String::from),
        );
    }
    w.write_record(&header).map_err(csv_io)?;
    for r in rows {
        let mut rec = r.report.csv_record(&r.dataset, r.d);
        if let Some(t) = &r.ip_tilde {
            rec.extend(t.means.iter().chain(&t.std_errors).map(|v| v.to_string()));
            rec.push(t.contested_batches.to_string());
        }
        w.write_record(&rec).map_err(csv_io)?;
    }
    w.flush()?;

    let results: Vec<Value> = rows.iter().map(|r| row_json(r, &cfg.metrics)).collect();
    write_json(&dir.join("results.json"), &json!({ "manifest": man, "results": results }))
}

fn row_json(r: &EvaluateRow, metrics: &[MetricName]) -> Value {
    let rep = &r.report;
    let mut v = json!({
        "rule": rep.rule_name,
        "dataset": r.dataset,
        "n": rep.per_voter_mean_ip.len(),
        "d": r.d,
        "m": rep.m,
        "R": rep.batches,
        "seed": rep.seed,
    });
    for m in metrics {
        match m {
            MetricName::LongIp => {
                v["long_ip"] = json!(rep.long_ip);
                v["long_ip_se"] = json!(rep.long_ip_se());
            }
            MetricName::BatchIp => {
                v["batch_ip"] = json!(rep.batch_ip);
                v["batch_ip_se"] = json!(rep.batch_ip_se());
                v["gap_se"] = json!(rep.gap_se);
            }
            MetricName::PerVoter => {
                v["per_voter_mean_ip"] = json!(rep.per_voter_mean_ip);
                v["per_voter_se"] = json!(rep.std_errors[2..]);
            }
            MetricName::IpTilde => v["ip_tilde"] = json!(r.ip_tilde),
        }
    }
    v
}

/// One line of a long-form sweep table. `estimate` and `se` are `None` for
/// points where no subsample passed the heterogeneity filter.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub sweep_var: String,
    pub value: f64,
    pub rule: String,
    pub voter_or_min: String,
    pub estimate: Option<f64>,
    pub se: Option<f64>,
    pub q25: Option<f64>,
    pub q75: Option<f64>,
}

fn report_rows(var: SweepVar, value: f64, rep: &EvalReport, per_voter: bool) -> Vec<SweepRow> {
    let row = |label: String, est: f64, se: f64| SweepRow {
        sweep_var: var.name().into(),
        value,
        rule: rep.rule_name.clone(),
        voter_or_min: label,
        estimate: Some(est),
        se: Some(se),
        q25: None,
        q75: None,
    };
    let mut out = Vec::new();
    if per_voter {
        for (i, v) in rep.per_voter_mean_ip.iter().enumerate() {
            out.push(row(format!("voter_{i}"), *v, rep.voter_se(i)));
        }
    }
    out.push(row("min".into(), rep.long_ip, rep.long_ip_se()));
    out.push(row("batch_min".into(), rep.batch_ip, rep.batch_ip_se()));
    out
}

fn evaluate_rules(
    rules: &[Mechanism],
    p: &Profile,
    dist: &ItemDistribution,
    m: usize,
    batches: usize,
    seed: u64,
) -> Result<Vec<EvalReport>> {
    let opts = optimizer_for(seed);
    let xs = sample_batches(dist, m, batches, seed)?;
    rules
        .iter()
        .map(|mech| {
            let rule = mech.prepare(p, &opts)?;
            Ok(summarize(mech.name(), &ip_samples(&rule, p, &xs)?, m, seed))
        })
        .collect()
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    // Linear interpolation between closest ranks.
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn band_row(var: SweepVar, value: f64, rule: &str, label: &str, vals: &[f64]) -> SweepRow {
    let (estimate, se, q25, q75) = if vals.is_empty() {
        (None, None, None, None)
    } else {
        let (mean, se) = crate::metrics::mean_and_se(vals);
        let mut s = vals.to_vec();
        s.sort_by(f64::total_cmp);
        (Some(mean), Some(se), Some(quantile(&s, 0.25)), Some(quantile(&s, 0.75)))
    };
    SweepRow {
        sweep_var: var.name().into(),
        value,
        rule: rule.into(),
        voter_or_min: label.into(),
        estimate,
        se,
        q25,
        q75,
    }
}

/// Runs a one-dimensional sweep.
///
/// `phi`, `alpha1` and `lambda` sweeps use a two-voter profile on `S^1` built
/// from the sweep's base `phi`/`alpha1`; `lambda` sweeps draw items from an
/// ACG distribution whose axis bisects the two voters. `m` and `n_sub` sweeps
/// use the configured profile. For `n_sub`, each point averages over
/// `resamples` heterogeneity-filtered subsamples and reports quartiles across
/// them; `se` there is the standard error across resamples.
pub fn run_sweep(cfg: &ExperimentConfig, sw: &SweepConfig, base: Option<&Profile>) -> Result<Vec<SweepRow>> {
    if sw.values.is_empty() {
        return Err(Error::InvalidInput("sweep needs at least one value".into()));
    }
    let m0 = *cfg.m.first().ok_or_else(|| Error::InvalidInput("no batch size".into()))?;
    let per_voter = cfg.metrics.contains(&MetricName::PerVoter);
    let mut rows = Vec::new();
    for (k, &value) in sw.values.iter().enumerate() {
        let seed = derive_seed(cfg.seed, &[k as u64]);
        let reports = match sw.var {
            SweepVar::Phi | SweepVar::Alpha1 => {
                let (phi, a1) = if sw.var == SweepVar::Phi { (value, sw.alpha1) } else { (sw.phi, value) };
                let p = two_voter_profile(phi, a1)?;
                let dist = ItemDistribution::parse(&cfg.distribution, 2)?;
                evaluate_rules(&cfg.rules, &p, &dist, m0, cfg.batches, seed)?
            }
            SweepVar::Lambda => {
                let p = two_voter_profile(sw.phi, sw.alpha1)?;
                let axis = ScoringVector::from_angle(sw.phi.to_radians() / 2.0);
                let dist = ItemDistribution::acg(axis, value)?;
                evaluate_rules(&cfg.rules, &p, &dist, m0, cfg.batches, seed)?
            }
            SweepVar::M => {
                let p = base.ok_or_else(|| Error::InvalidInput("m sweep needs a profile".into()))?;
                let m = value as usize;
                if m as f64 != value {
                    return Err(Error::InvalidInput(format!("batch size {value} is not an integer")));
                }
                let dist = ItemDistribution::parse(&cfg.distribution, p.dim())?;
                // Common batches across m: the seed does not depend on the point.
                evaluate_rules(&cfg.rules, p, &dist, m, cfg.batches, cfg.seed)?
            }
            SweepVar::NSub => {
                let p = base.ok_or_else(|| Error::InvalidInput("n_sub sweep needs a profile".into()))?;
                rows.extend(subsample_point(cfg, sw, p, value, m0)?);
                continue;
            }
        };
        for rep in &reports {
            rows.extend(report_rows(sw.var, value, rep, per_voter));
        }
    }
    Ok(rows)
}

fn subsample_point(
    cfg: &ExperimentConfig,
    sw: &SweepConfig,
    p: &Profile,
    value: f64,
    m: usize,
) -> Result<Vec<SweepRow>> {
    let n_sub = value as usize;
    if n_sub as f64 != value {
        return Err(Error::InvalidInput(format!("subsample size {value} is not an integer")));
    }
    let dist = ItemDistribution::parse(&cfg.distribution, p.dim())?;
    let mut long: Vec<Vec<f64>> = vec![Vec::new(); cfg.rules.len()];
    let mut batch: Vec<Vec<f64>> = vec![Vec::new(); cfg.rules.len()];
    for r in 0..sw.resamples {
        let seed = derive_seed(cfg.seed, &[SUBSAMPLE_STREAM, n_sub as u64, r as u64]);
        let sub = match heterogeneity_subsample(p, n_sub, sw.threshold_deg, seed, sw.max_tries) {
            Ok(s) => s,
            Err(Error::FilterExhausted { .. }) => continue,
            Err(e) => return Err(e),
        };
        for (j, rep) in evaluate_rules(&cfg.rules, &sub, &dist, m, cfg.batches, seed)?
            .iter()
            .enumerate()
        {
            long[j].push(rep.long_ip);
            batch[j].push(rep.batch_ip);
        }
    }
    let mut rows = Vec::new();
    for (j, mech) in cfg.rules.iter().enumerate() {
        rows.push(band_row(SweepVar::NSub, value, mech.name(), "min", &long[j]));
        rows.push(band_row(SweepVar::NSub, value, mech.name(), "batch_min", &batch[j]));
    }
    Ok(rows)
}

/// Writes `sweep.csv` and `manifest.json`.
pub fn write_sweep_outputs(cfg: &ExperimentConfig, sw: &SweepConfig, rows: &[SweepRow]) -> Result<()> {
    let dir = &cfg.output_dir;
    fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    let man = manifest("sweep", cfg, Some(sw));
    write_json(&dir.join("manifest.json"), &man)?;
    let mut f = create(&dir.join("sweep.csv"))?;
    csv_preamble(&mut f, &man)?;
    let mut w = csv::Writer::from_writer(f);
    w.write_record(["sweep_var", "value", "rule", "voter_or_min", "estimate", "se", "q25", "q75"])
        .map_err(csv_io)?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in rows {
        w.write_record([
            r.sweep_var.clone(),
            r.value.to_string(),
            r.rule.clone(),
            r.voter_or_min.clone(),
            opt(r.estimate),
            opt(r.se),
            opt(r.q25),
            opt(r.q75),
        ])
        .map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{ProfileSource, SyntheticSpec};

    fn small_cfg(dir: &Path) -> ExperimentConfig {
        ExperimentConfig {
            rules: vec![Mechanism::Arith, Mechanism::Angular, Mechanism::Borda],
            profile: ProfileSource::Synthetic(SyntheticSpec::Antipodal { alpha1: 0.3 }),
            batches: 200,
            output_dir: dir.to_path_buf(),
            metrics: vec![MetricName::LongIp, MetricName::BatchIp, MetricName::IpTilde, MetricName::PerVoter],
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn evaluate_rows_share_batches() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small_cfg(dir.path());
        let p = cfg.profile.load().unwrap();
        let rows = run_evaluate(&cfg, &p).unwrap();
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[0].report.long_ip, 0.0);
        write_evaluate_outputs(&cfg, &rows).unwrap();
        for f in ["results.csv", "results.json", "manifest.json"] {
            assert!(dir.path().join(f).exists());
        }
        let csv = fs::read_to_string(dir.path().join("results.csv")).unwrap();
        assert!(csv.starts_with("# propagg"));
        assert!(csv.contains("ip_tilde_0"));
    }

    #[test]
    fn single_voter_rules_score_one() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig {
            rules: Mechanism::ALL.to_vec(),
            batches: 50,
            ..small_cfg(dir.path())
        };
        let cfg = ExperimentConfig { metrics: MetricName::DEFAULT.to_vec(), ..cfg };
        let p = Profile::uniform(vec![ScoringVector::basis(3, 0)]).unwrap();
        for r in run_evaluate(&cfg, &p).unwrap() {
            assert_eq!(r.report.long_ip, 1.0);
            assert_eq!(r.report.batch_ip, 1.0);
        }
    }

    #[test]
    fn quartiles_interpolate() {
        let s = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile(&s, 0.25), 2.0);
        assert_eq!(quantile(&s, 0.75), 4.0);
        assert_eq!(quantile(&[1.0, 2.0], 0.25), 1.25);
    }

    #[test]
    fn exhausted_subsamples_are_missing_rows() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig {
            rules: vec![Mechanism::Arith],
            batches: 20,
            ..small_cfg(dir.path())
        };
        let sw = SweepConfig {
            var: SweepVar::NSub,
            values: vec![2.0],
            resamples: 3,
            max_tries: 5,
            threshold_deg: 90.0,
            ..SweepConfig::default()
        };
        let p = cfg.profile.load().unwrap();
        let rows = run_sweep(&cfg, &sw, Some(&p)).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows.iter().all(|r| r.estimate.is_none()));
    }
}
