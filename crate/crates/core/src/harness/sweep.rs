use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::output::{write_results, ResultRecord};
use super::scenario::generate_scenario;
use crate::config::{parse_with_overrides, ScenarioConfig, ScenarioFile};
use crate::par::{self, Execution};
use crate::schemes::{solve_scheme, SchemeId};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    PowerBudgetDbm,
    NumWaveguides,
    ItThresholdDbm,
    /// Socket count of every `discrete_pass` scheme.
    SocketCount,
}

impl SweepAxis {
    const NAMES: [(SweepAxis, &'static str); 4] = [
        (SweepAxis::PowerBudgetDbm, "power_budget_dbm"),
        (SweepAxis::NumWaveguides, "num_waveguides"),
        (SweepAxis::ItThresholdDbm, "it_threshold_dbm"),
        (SweepAxis::SocketCount, "socket_count"),
    ];

    fn is_integer(self) -> bool {
        matches!(self, SweepAxis::NumWaveguides | SweepAxis::SocketCount)
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = Self::NAMES.iter().find(|(a, _)| a == self).map(|(_, n)| *n).unwrap_or("?");
        f.write_str(name)
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::NAMES
            .iter()
            .find(|(_, n)| *n == s)
            .map(|(a, _)| *a)
            .ok_or_else(|| Error::Parse(format!("unknown sweep axis `{s}`")))
    }
}

/// A sweep description, loadable from TOML.
///
/// ```toml
/// axis = "power_budget_dbm"
/// values = [10.0, 15.0, 20.0]
/// schemes = ["continuous_pass", "mimo_ula"]
/// num_seeds = 20
///
/// [scenario]
/// num_waveguides = 4
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub schemes: Vec<SchemeId>,
    #[serde(default = "default_num_seeds")]
    pub num_seeds: usize,
    /// Seed `i` of the sweep drops users with `base_seed + i`.
    #[serde(default)]
    pub base_seed: u64,
    /// Jobs solved between two flushes of the output file.
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default)]
    pub scenario: ScenarioFile,
}

fn default_num_seeds() -> usize {
    20
}

fn default_batch_size() -> usize {
    32
}

impl SweepSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        Self::from_toml_with_overrides(text, &[])
    }

    /// Parses `text` after applying dotted `key=value` overrides, e.g.
    /// `num_seeds=5` or `scenario.power_budget_dbm=15`.
    pub fn from_toml_with_overrides(text: &str, overrides: &[String]) -> Result<Self> {
        let table = parse_with_overrides(text, overrides, "sweep")?;
        let spec: SweepSpec = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Parse(format!("sweep: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_with_overrides(&text, overrides)
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() || self.schemes.is_empty() || self.num_seeds == 0 || self.batch_size == 0 {
            return Err(Error::Config(
                "sweep needs at least one value, scheme and seed, and a positive batch size".into(),
            ));
        }
        if self.axis.is_integer() {
            if let Some(v) = self.values.iter().find(|v| !(v.fract() == 0.0 && **v >= 1.0)) {
                return Err(Error::Config(format!("{} values must be positive integers, got {v}", self.axis)));
            }
        }
        self.scenario.solver.validate()?;
        for &v in &self.values {
            self.config_at(v)?;
        }
        Ok(())
    }

    /// Scenario configuration at one axis value.
    pub fn config_at(&self, value: f64) -> Result<ScenarioConfig> {
        let mut file = self.scenario.clone();
        match self.axis {
            SweepAxis::PowerBudgetDbm => file.power_budget_dbm = value,
            SweepAxis::NumWaveguides => file.num_waveguides = value as usize,
            SweepAxis::ItThresholdDbm => {
                file.it_threshold_dbm = value;
                file.it_thresholds_dbm = None;
            }
            SweepAxis::SocketCount => {}
        }
        file.to_config()
    }

    fn scheme_at(&self, scheme: SchemeId, value: f64) -> SchemeId {
        match (self.axis, scheme) {
            (SweepAxis::SocketCount, SchemeId::DiscretePass(_)) => SchemeId::DiscretePass(value as usize),
            _ => scheme,
        }
    }

    /// Jobs in output order: axis value, then scheme, then seed.
    pub fn jobs(&self) -> Vec<SweepJob> {
        let mut out = Vec::new();
        for &value in &self.values {
            for &scheme in &self.schemes {
                for i in 0..self.num_seeds {
                    out.push(SweepJob {
                        seed: self.base_seed + i as u64,
                        scheme: self.scheme_at(scheme, value),
                        axis_value: value,
                    });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepJob {
    pub seed: u64,
    pub scheme: SchemeId,
    pub axis_value: f64,
}

/// Per-job information kept out of the CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobMeta {
    pub seed: u64,
    pub scheme: SchemeId,
    pub axis_value: f64,
    pub wall_time_s: f64,
    pub sum_rate_trace: Vec<f64>,
    pub converged: bool,
    pub warnings: Vec<String>,
}

/// Contents of the JSON file written next to the CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub spec: SweepSpec,
    pub jobs: Vec<JobMeta>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    pub records: Vec<ResultRecord>,
    pub meta: Vec<JobMeta>,
}

/// Solves one job. Solver errors become a record with `failed = true`.
pub fn run_job(spec: &SweepSpec, job: &SweepJob) -> (ResultRecord, JobMeta) {
    let start = Instant::now();
    let result = spec.config_at(job.axis_value).and_then(|cfg| {
        let layout = generate_scenario(&cfg, job.seed)?;
        solve_scheme(job.scheme, &cfg, &layout, &spec.scenario.solver)
    });
    let wall_time_s = start.elapsed().as_secs_f64();
    let mut meta = JobMeta {
        seed: job.seed,
        scheme: job.scheme,
        axis_value: job.axis_value,
        wall_time_s,
        sum_rate_trace: Vec::new(),
        converged: false,
        warnings: Vec::new(),
    };
    let record = match result {
        Ok(rep) => {
            let record = ResultRecord::from_report(job.seed, job.scheme, spec.axis, job.axis_value, &rep);
            meta.sum_rate_trace = rep.sum_rate_trace;
            meta.converged = rep.converged;
            meta.warnings = rep.warnings;
            record
        }
        Err(e) => {
            log::warn!("job seed={} scheme={} value={} failed: {e}", job.seed, job.scheme, job.axis_value);
            ResultRecord::failure(job.seed, job.scheme, spec.axis, job.axis_value, &e)
        }
    };
    (record, meta)
}

/// Runs every job of `spec`. With `out`, rows are appended to the CSV after
/// each batch and the sidecar `<out>.json` is rewritten, so an interrupted
/// sweep keeps the rows already finished. An existing file at `out` is
/// replaced.
pub fn run_sweep(spec: &SweepSpec, exec: Execution, out: Option<&Path>) -> Result<SweepOutcome> {
    spec.validate()?;
    if let Some(path) = out {
        if path.exists() {
            std::fs::remove_file(path).map_err(|e| Error::io(path, e))?;
        }
    }
    let jobs = spec.jobs();
    let mut records = Vec::with_capacity(jobs.len());
    let mut meta = Vec::with_capacity(jobs.len());
    for (b, batch) in jobs.chunks(spec.batch_size).enumerate() {
        let results = par::map(exec, batch, |job| run_job(spec, job));
        let (rows, metas): (Vec<_>, Vec<_>) = results.into_iter().unzip();
        if let Some(path) = out {
            write_results(path, &rows)?;
        }
        records.extend(rows);
        meta.extend(metas);
        if let Some(path) = out {
            write_sidecar(&sidecar_path(path), spec, &meta)?;
        }
        log::info!("batch {} done: {}/{} jobs", b + 1, records.len(), jobs.len());
    }
    Ok(SweepOutcome { records, meta })
}

pub fn sidecar_path(csv: &Path) -> PathBuf {
    let mut name = csv.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".json");
    csv.with_file_name(name)
}

fn write_sidecar(path: &Path, spec: &SweepSpec, jobs: &[JobMeta]) -> Result<()> {
    let sidecar = Sidecar {
        spec: spec.clone(),
        jobs: jobs.to_vec(),
    };
    let text = serde_json::to_string_pretty(&sidecar).map_err(|e| Error::Parse(e.to_string()))?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Mean sum rate (nats) over successful rows per scheme, as
/// `(axis value, mean)` pairs in order of first appearance.
pub fn mean_sum_rates(records: &[ResultRecord]) -> BTreeMap<SchemeId, Vec<(f64, f64)>> {
    let mut acc: BTreeMap<SchemeId, Vec<(f64, f64, usize)>> = BTreeMap::new();
    for r in records.iter().filter(|r| !r.failed) {
        let points = acc.entry(r.scheme).or_default();
        match points.iter_mut().find(|p| p.0 == r.axis_value) {
            Some(p) => {
                p.1 += r.sum_rate_nats;
                p.2 += 1;
            }
            None => points.push((r.axis_value, r.sum_rate_nats, 1)),
        }
    }
    acc.into_iter()
        .map(|(k, v)| (k, v.into_iter().map(|(x, s, n)| (x, s / n as f64)).collect()))
        .collect()
}
