//! Experiment configuration: flat `key = value` files, synthetic profile
//! specs, and the resolved settings shared by the command-line runners.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{antipodal_profile, load_profile_csv, two_cluster_profile, two_voter_profile};
use crate::error::{Error, Result};
use crate::model::Profile;
use crate::rules::Mechanism;

/// Built-in profiles, written `antipodal:alpha1=0.3`,
/// `two-voter:phi=175,alpha1=0.7` or
/// `two-cluster:per=2,sep=120,spread=5,w1=0.6`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SyntheticSpec {
    Antipodal { alpha1: f64 },
    TwoVoter { phi_deg: f64, alpha1: f64 },
    TwoCluster { per_cluster: usize, separation_deg: f64, spread_deg: f64, weight1: f64 },
}

impl SyntheticSpec {
    pub fn build(&self) -> Result<Profile> {
        match *self {
            SyntheticSpec::Antipodal { alpha1 } => antipodal_profile(alpha1),
            SyntheticSpec::TwoVoter { phi_deg, alpha1 } => two_voter_profile(phi_deg, alpha1),
            SyntheticSpec::TwoCluster { per_cluster, separation_deg, spread_deg, weight1 } => {
                two_cluster_profile(per_cluster, separation_deg, spread_deg, weight1)
            }
        }
    }
}

fn key_values(body: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for part in body.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| Error::InvalidInput(format!("expected key=value, got '{part}'")))?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

fn take<T: FromStr>(kv: &mut BTreeMap<String, String>, key: &str, default: Option<T>) -> Result<T> {
    match kv.remove(key) {
        Some(v) => v
            .parse()
            .map_err(|_| Error::InvalidInput(format!("invalid value '{v}' for '{key}'"))),
        None => default.ok_or_else(|| Error::InvalidInput(format!("missing '{key}'"))),
    }
}

impl FromStr for SyntheticSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, body) = s.split_once(':').unwrap_or((s, ""));
        let mut kv = key_values(body)?;
        let spec = match kind.trim() {
            "antipodal" => SyntheticSpec::Antipodal {
                alpha1: take(&mut kv, "alpha1", None)?,
            },
            "two-voter" => SyntheticSpec::TwoVoter {
                phi_deg: take(&mut kv, "phi", None)?,
                alpha1: take(&mut kv, "alpha1", None)?,
            },
            "two-cluster" => SyntheticSpec::TwoCluster {
                per_cluster: take(&mut kv, "per", Some(2))?,
                separation_deg: take(&mut kv, "sep", Some(120.0))?,
                spread_deg: take(&mut kv, "spread", Some(5.0))?,
                weight1: take(&mut kv, "w1", Some(0.6))?,
            },
            other => {
                return Err(Error::InvalidInput(format!(
                    "unknown synthetic profile '{other}' (expected antipodal, two-voter, two-cluster)"
                )))
            }
        };
        if let Some(k) = kv.keys().next() {
            return Err(Error::InvalidInput(format!("unknown parameter '{k}' in '{s}'")));
        }
        spec.build()?;
        Ok(spec)
    }
}

impl fmt::Display for SyntheticSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SyntheticSpec::Antipodal { alpha1 } => write!(f, "antipodal:alpha1={alpha1}"),
            SyntheticSpec::TwoVoter { phi_deg, alpha1 } => {
                write!(f, "two-voter:phi={phi_deg},alpha1={alpha1}")
            }
            SyntheticSpec::TwoCluster { per_cluster, separation_deg, spread_deg, weight1 } => write!(
                f,
                "two-cluster:per={per_cluster},sep={separation_deg},spread={spread_deg},w1={weight1}"
            ),
        }
    }
}

/// Where the voters come from.
#[derive(Debug, Clone, PartialEq)]
pub enum ProfileSource {
    File(PathBuf),
    Synthetic(SyntheticSpec),
}

impl ProfileSource {
    pub fn load(&self) -> Result<Profile> {
        match self {
            ProfileSource::File(p) => load_profile_csv(p),
            ProfileSource::Synthetic(s) => s.build(),
        }
    }

    /// Short name used in the `dataset` column.
    pub fn dataset_name(&self) -> String {
        match self {
            ProfileSource::File(p) => p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| p.display().to_string()),
            ProfileSource::Synthetic(s) => s.to_string(),
        }
    }
}

impl fmt::Display for ProfileSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProfileSource::File(p) => write!(f, "file:{}", p.display()),
            ProfileSource::Synthetic(s) => write!(f, "synthetic:{s}"),
        }
    }
}

impl Serialize for ProfileSource {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricName {
    LongIp,
    BatchIp,
    IpTilde,
    PerVoter,
}

impl MetricName {
    pub const DEFAULT: [MetricName; 3] = [MetricName::LongIp, MetricName::BatchIp, MetricName::PerVoter];

    pub fn name(self) -> &'static str {
        match self {
            MetricName::LongIp => "long_ip",
            MetricName::BatchIp => "batch_ip",
            MetricName::IpTilde => "ip_tilde",
            MetricName::PerVoter => "per_voter",
        }
    }
}

impl FromStr for MetricName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [MetricName::LongIp, MetricName::BatchIp, MetricName::IpTilde, MetricName::PerVoter]
            .into_iter()
            .find(|m| m.name() == s.trim())
            .ok_or_else(|| {
                Error::InvalidInput(format!(
                    "unknown metric '{s}' (expected long_ip, batch_ip, ip_tilde, per_voter)"
                ))
            })
    }
}

impl fmt::Display for MetricName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVar {
    Phi,
    Alpha1,
    M,
    NSub,
    Lambda,
}

impl SweepVar {
    pub fn name(self) -> &'static str {
        match self {
            SweepVar::Phi => "phi",
            SweepVar::Alpha1 => "alpha1",
            SweepVar::M => "m",
            SweepVar::NSub => "n_sub",
            SweepVar::Lambda => "lambda",
        }
    }
}

impl FromStr for SweepVar {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [SweepVar::Phi, SweepVar::Alpha1, SweepVar::M, SweepVar::NSub, SweepVar::Lambda]
            .into_iter()
            .find(|v| v.name() == s.trim())
            .ok_or_else(|| {
                Error::InvalidInput(format!(
                    "unknown sweep variable '{s}' (expected phi, alpha1, m, n_sub, lambda)"
                ))
            })
    }
}

impl fmt::Display for SweepVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Resolved settings of an `evaluate` or `sweep` run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub rules: Vec<Mechanism>,
    pub profile: ProfileSource,
    pub distribution: String,
    pub m: Vec<usize>,
    #[serde(rename = "R")]
    pub batches: usize,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub metrics: Vec<MetricName>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            rules: Mechanism::ALL.to_vec(),
            profile: ProfileSource::Synthetic(SyntheticSpec::Antipodal { alpha1: 0.3 }),
            distribution: "uniform-sphere".into(),
            m: vec![10],
            batches: crate::metrics::DEFAULT_BATCHES,
            seed: 0,
            output_dir: PathBuf::from("out"),
            metrics: MetricName::DEFAULT.to_vec(),
        }
    }
}

/// Sweep-specific settings.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepConfig {
    pub var: SweepVar,
    pub values: Vec<f64>,
    /// Base weight of the first voter for two-voter sweeps.
    pub alpha1: f64,
    /// Base angle in degrees for two-voter sweeps.
    pub phi: f64,
    pub resamples: usize,
    pub threshold_deg: f64,
    pub max_tries: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            var: SweepVar::Phi,
            values: Vec::new(),
            alpha1: 0.7,
            phi: 150.0,
            resamples: 100,
            threshold_deg: 65.0,
            max_tries: 10_000,
        }
    }
}

/// A parsed `key = value` file. Blank lines, `#`/`;` comments and
/// `[section]` headers are ignored; keys may use `-` or `_`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    entries: BTreeMap<String, (usize, String)>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            if line.starts_with('[') && line.ends_with(']') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: i + 1,
                column: 1,
                message: format!("expected 'key = value', got '{line}'"),
            })?;
            let key = k.trim().replace('-', "_");
            if key.is_empty() {
                return Err(Error::Parse {
                    line: i + 1,
                    column: 1,
                    message: "empty key".into(),
                });
            }
            entries.insert(key, (i + 1, v.trim().to_string()));
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Rejects keys outside `known`.
    pub fn check_keys(&self, known: &[&str]) -> Result<()> {
        for (k, (line, _)) in &self.entries {
            if !known.contains(&k.as_str()) {
                return Err(Error::Parse {
                    line: *line,
                    column: 1,
                    message: format!("unknown key '{k}'"),
                });
            }
        }
        Ok(())
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(_, v)| v.as_str())
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: fmt::Display,
    {
        self.entries
            .get(key)
            .map(|(line, v)| {
                v.parse().map_err(|e: T::Err| Error::Parse {
                    line: *line,
                    column: 1,
                    message: format!("key '{key}': {e}"),
                })
            })
            .transpose()
    }

    /// Comma-separated list value.
    pub fn get_list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>>
    where
        T::Err: fmt::Display,
    {
        self.entries
            .get(key)
            .map(|(line, v)| {
                v.split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| {
                        s.parse().map_err(|e: T::Err| Error::Parse {
                            line: *line,
                            column: 1,
                            message: format!("key '{key}': {e}"),
                        })
                    })
                    .collect()
            })
            .transpose()
    }
}
