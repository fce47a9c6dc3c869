//! Monte-Carlo sweep over peak-power-to-noise ratios.
//!
//! Every `(snr, trial)` pair draws channels with seed `base_seed + trial`,
//! balances the instance and yields one [`TrialRecord`]. Records are sorted by
//! `(snr, trial)` before writing, so output does not depend on the worker
//! count.

use std::fs::{File, OpenOptions};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::balance::{balance, min_rate, BisectionConfig, Instance};
use crate::channel::SystemConfig;
use crate::error::{Error, Result};
use crate::lm::LmConfig;

pub const RECORD_HEADER: [&str; 11] = [
    "snr_db",
    "trial",
    "seed",
    "min_sinr",
    "gamma_bar",
    "min_rate",
    "rate_ratio_percent",
    "lm_iterations",
    "mean_linesearch",
    "wall_time_ms",
    "degraded",
];

pub const SUMMARY_HEADER: [&str; 8] = [
    "snr_db",
    "trials",
    "mean_rate_ratio_percent",
    "median_rate_ratio_percent",
    "mean_lm_iterations",
    "mean_linesearch",
    "mean_wall_time_ms",
    "degraded",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    pub trials: usize,
    /// Peak power to downlink noise ratios `10 log10(P/σ²)`.
    pub snr_list_db: Vec<f64>,
    /// Relay-side ratio `10 log10(P/σ_R²)`.
    pub snr_mac_db: f64,
    /// Template; `sigma2` and `sigma_r2` are derived per SNR point and `seed`
    /// is the base seed.
    pub system: SystemConfig,
    pub lm: LmConfig,
    pub bisect: BisectionConfig,
    pub out_path: PathBuf,
    /// Worker threads; 0 picks the available parallelism.
    pub threads: usize,
    /// Measure wall time per trial. Off by default so that output files are
    /// reproducible byte for byte.
    pub record_timing: bool,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            trials: 100,
            snr_list_db: vec![0.0, 10.0, 20.0, 30.0],
            snr_mac_db: 10.0,
            system: SystemConfig::default(),
            lm: LmConfig::default(),
            bisect: BisectionConfig::default(),
            out_path: PathBuf::from("results.csv"),
            threads: 0,
            record_timing: false,
        }
    }
}

impl ExperimentSpec {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_toml_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.snr_list_db.is_empty() {
            return Err(Error::Config("SNR list must not be empty".into()));
        }
        if self.snr_list_db.iter().chain([&self.snr_mac_db]).any(|s| !s.is_finite()) {
            return Err(Error::Config("SNR values must be finite".into()));
        }
        self.system_at(self.snr_list_db[0], 0).validate()?;
        self.lm.validate()?;
        self.bisect.validate()?;
        Ok(())
    }

    /// System parameters of one trial.
    pub fn system_at(&self, snr_db: f64, trial: usize) -> SystemConfig {
        let power = self.system.power;
        SystemConfig {
            sigma2: power / 10f64.powf(snr_db / 10.0),
            sigma_r2: power / 10f64.powf(self.snr_mac_db / 10.0),
            seed: self.system.seed.wrapping_add(trial as u64),
            ..self.system.clone()
        }
    }

    pub fn summary_path(&self) -> PathBuf {
        summary_path_for(&self.out_path)
    }
}

/// `results.csv` → `results.summary.csv`.
pub fn summary_path_for(path: &Path) -> PathBuf {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let stem = name.strip_suffix(".csv").unwrap_or(&name);
    path.with_file_name(format!("{stem}.summary.csv"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub snr_db: f64,
    pub trial: usize,
    pub seed: u64,
    pub min_sinr: f64,
    pub gamma_bar: f64,
    pub min_rate: f64,
    pub rate_ratio_percent: f64,
    pub lm_iterations: usize,
    pub mean_linesearch: f64,
    pub wall_time_ms: f64,
    pub degraded: bool,
    /// Set when the trial aborted with a numerical error; not written to CSV.
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnrSummary {
    pub snr_db: f64,
    pub trials: usize,
    pub mean_rate_ratio_percent: f64,
    pub median_rate_ratio_percent: f64,
    pub mean_lm_iterations: f64,
    pub mean_linesearch: f64,
    pub mean_wall_time_ms: f64,
    pub degraded: usize,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub records: Vec<TrialRecord>,
    pub summary: Vec<SnrSummary>,
}

impl ExperimentOutput {
    pub fn failures(&self) -> usize {
        self.records.iter().filter(|r| r.failure.is_some()).count()
    }
}

fn run_trial(spec: &ExperimentSpec, snr_db: f64, trial: usize) -> TrialRecord {
    let system = spec.system_at(snr_db, trial);
    let start = Instant::now();
    let outcome = Instance::generate(&system).and_then(|inst| balance(&inst, &spec.lm, &spec.bisect));
    let wall_time_ms = if spec.record_timing { start.elapsed().as_secs_f64() * 1e3 } else { 0.0 };
    match outcome {
        Ok(r) => TrialRecord {
            snr_db,
            trial,
            seed: system.seed,
            min_sinr: r.min_sinr,
            gamma_bar: r.gamma_bar,
            min_rate: r.min_rate,
            rate_ratio_percent: 100.0 * r.ratio_to_bound,
            lm_iterations: r.iterations,
            mean_linesearch: r.linesearch_per_step,
            wall_time_ms,
            degraded: r.degraded,
            failure: None,
        },
        Err(e) => TrialRecord {
            snr_db,
            trial,
            seed: system.seed,
            min_sinr: 0.0,
            gamma_bar: 0.0,
            min_rate: min_rate(0.0),
            rate_ratio_percent: 0.0,
            lm_iterations: 0,
            mean_linesearch: 0.0,
            wall_time_ms,
            degraded: true,
            failure: Some(e.to_string()),
        },
    }
}

fn check_writable(path: &Path) -> Result<()> {
    OpenOptions::new()
        .write(true)
        .create(true)
        .truncate(true)
        .open(path)
        .map(drop)
        .map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

/// Runs the full sweep and writes the records and summary files.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentOutput> {
    spec.validate()?;
    check_writable(&spec.out_path)?;
    check_writable(&spec.summary_path())?;

    let tasks: Vec<(f64, usize)> = spec
        .snr_list_db
        .iter()
        .flat_map(|&snr| (0..spec.trials).map(move |t| (snr, t)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?;
    let mut records: Vec<TrialRecord> =
        pool.install(|| tasks.par_iter().map(|&(snr, t)| run_trial(spec, snr, t)).collect());
    records.sort_by(|a, b| a.snr_db.total_cmp(&b.snr_db).then(a.trial.cmp(&b.trial)));

    let summary = summarize(&records);
    write_csv(&records, &summary, &spec.out_path)?;
    Ok(ExperimentOutput { records, summary })
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

fn median(mut values: Vec<f64>) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_by(f64::total_cmp);
    let mid = values.len() / 2;
    if values.len().is_multiple_of(2) {
        0.5 * (values[mid - 1] + values[mid])
    } else {
        values[mid]
    }
}

/// Per-SNR aggregates in order of first appearance.
pub fn summarize(records: &[TrialRecord]) -> Vec<SnrSummary> {
    let mut snrs: Vec<f64> = Vec::new();
    for r in records {
        if !snrs.contains(&r.snr_db) {
            snrs.push(r.snr_db);
        }
    }
    snrs.into_iter()
        .map(|snr| {
            let group: Vec<&TrialRecord> = records.iter().filter(|r| r.snr_db == snr).collect();
            SnrSummary {
                snr_db: snr,
                trials: group.len(),
                mean_rate_ratio_percent: mean(group.iter().map(|r| r.rate_ratio_percent)),
                median_rate_ratio_percent: median(group.iter().map(|r| r.rate_ratio_percent).collect()),
                mean_lm_iterations: mean(group.iter().map(|r| r.lm_iterations as f64)),
                mean_linesearch: mean(group.iter().map(|r| r.mean_linesearch)),
                mean_wall_time_ms: mean(group.iter().map(|r| r.wall_time_ms)),
                degraded: group.iter().filter(|r| r.degraded).count(),
            }
        })
        .collect()
}

/// Renders a float with 10 significant digits.
pub fn format_float(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let magnitude = x.abs().log10().floor() as i32;
    if !(-4..10).contains(&magnitude) {
        return format!("{x:.9e}");
    }
    let decimals = (9 - magnitude).max(0) as usize;
    let text = format!("{x:.decimals$}");
    // Rounding may have carried into a new leading digit (9.99.. → 10.0..).
    let digits = text.chars().filter(|c| c.is_ascii_digit()).collect::<String>();
    if digits.trim_start_matches('0').len() > 10 && decimals > 0 {
        let decimals = decimals - 1;
        return format!("{x:.decimals$}");
    }
    text
}

fn record_fields(r: &TrialRecord) -> [String; 11] {
    [
        format_float(r.snr_db),
        r.trial.to_string(),
        r.seed.to_string(),
        format_float(r.min_sinr),
        format_float(r.gamma_bar),
        format_float(r.min_rate),
        format_float(r.rate_ratio_percent),
        r.lm_iterations.to_string(),
        format_float(r.mean_linesearch),
        format_float(r.wall_time_ms),
        u8::from(r.degraded).to_string(),
    ]
}

fn summary_fields(s: &SnrSummary) -> [String; 8] {
    [
        format_float(s.snr_db),
        s.trials.to_string(),
        format_float(s.mean_rate_ratio_percent),
        format_float(s.median_rate_ratio_percent),
        format_float(s.mean_lm_iterations),
        format_float(s.mean_linesearch),
        format_float(s.mean_wall_time_ms),
        s.degraded.to_string(),
    ]
}

fn write_rows<const N: usize>(path: &Path, header: [&str; N], rows: impl Iterator<Item = [String; N]>) -> Result<()> {
    let csv_err = |source| Error::Csv { path: path.to_path_buf(), source };
    let file = File::create(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    let mut writer = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(file);
    writer.write_record(header).map_err(csv_err)?;
    for row in rows {
        writer.write_record(&row).map_err(csv_err)?;
    }
    writer.flush().map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

/// Writes the per-trial records to `path` and the summary next to it.
pub fn write_csv(records: &[TrialRecord], summary: &[SnrSummary], path: &Path) -> Result<()> {
    if records.is_empty() {
        return Err(Error::Config("no records to write".into()));
    }
    write_rows(path, RECORD_HEADER, records.iter().map(record_fields))?;
    write_rows(&summary_path_for(path), SUMMARY_HEADER, summary.iter().map(summary_fields))
}

fn parse<T: std::str::FromStr>(path: &Path, field: &str, text: &str) -> Result<T> {
    text.parse()
        .map_err(|_| Error::Config(format!("{}: cannot parse {field} value {text:?}", path.display())))
}

/// Reads a records file written by [`write_csv`].
pub fn read_records(path: &Path) -> Result<Vec<TrialRecord>> {
    let csv_err = |source| Error::Csv { path: path.to_path_buf(), source };
    let mut reader = csv::Reader::from_path(path).map_err(csv_err)?;
    let header = reader.headers().map_err(csv_err)?.clone();
    if header.iter().ne(RECORD_HEADER) {
        return Err(Error::Config(format!("{}: unexpected header {header:?}", path.display())));
    }
    let mut out = Vec::new();
    for row in reader.records() {
        let row = row.map_err(csv_err)?;
        let f = |i: usize| row.get(i).unwrap_or_default();
        out.push(TrialRecord {
            snr_db: parse(path, "snr_db", f(0))?,
            trial: parse(path, "trial", f(1))?,
            seed: parse(path, "seed", f(2))?,
            min_sinr: parse(path, "min_sinr", f(3))?,
            gamma_bar: parse(path, "gamma_bar", f(4))?,
            min_rate: parse(path, "min_rate", f(5))?,
            rate_ratio_percent: parse(path, "rate_ratio_percent", f(6))?,
            lm_iterations: parse(path, "lm_iterations", f(7))?,
            mean_linesearch: parse(path, "mean_linesearch", f(8))?,
            wall_time_ms: parse(path, "wall_time_ms", f(9))?,
            degraded: match f(10) {
                "0" => false,
                "1" => true,
                other => return Err(Error::Config(format!("{}: bad degraded flag {other:?}", path.display()))),
            },
            failure: None,
        });
    }
    Ok(out)
}
