//! Monte Carlo campaigns over independent drops, with per-user records,
//! aggregate statistics and file output.
//!
//! Every requested algorithm runs on the same drops and from the same
//! initial random assignment, so the comparisons are paired.
//!
//! Seeding: drop `d` uses `seed_d = mix(master ^ mix(d))` where `mix` is the
//! SplitMix64 step. A `ChaCha8Rng` seeded with `seed_d` on stream 0 places
//! the nodes and draws shadowing; the same seed on stream 1 draws the
//! initial pilot assignment for every algorithm.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::network::Drop;
use crate::pilot::{
    run_greedy_baseline, run_hungarian_pa, run_rpa, PaResult, PaRunConfig, RewardMode,
};
use crate::rates::{DlBound, DlPowerMode, RateModel, RateSettings};
use crate::stats::{empirical_cdf, percentile};

const GEOMETRY_STREAM: u64 = 0;
const ASSIGNMENT_STREAM: u64 = 1;

fn mix(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn drop_seed(master_seed: u64, drop: u64) -> u64 {
    mix(master_seed ^ mix(drop))
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Generates drop `drop` of a campaign.
pub fn campaign_drop(cfg: &SystemConfig, master_seed: u64, drop: u64) -> Result<Drop> {
    Drop::generate_with(
        cfg,
        &mut stream_rng(drop_seed(master_seed, drop), GEOMETRY_STREAM),
    )
}

/// Generator of the initial pilot assignment for drop `drop`.
pub fn assignment_rng(master_seed: u64, drop: u64) -> ChaCha8Rng {
    stream_rng(drop_seed(master_seed, drop), ASSIGNMENT_STREAM)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Rpa,
    Shpa,
    Mhpa,
    Greedy,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [
        Algorithm::Rpa,
        Algorithm::Shpa,
        Algorithm::Mhpa,
        Algorithm::Greedy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Rpa => "rpa",
            Algorithm::Shpa => "shpa",
            Algorithm::Mhpa => "mhpa",
            Algorithm::Greedy => "greedy",
        }
    }

    /// DL power modes a bare algorithm name expands to.
    pub fn default_modes(self) -> &'static [DlPowerMode] {
        match self {
            Algorithm::Shpa => &[DlPowerMode::SumRate],
            Algorithm::Mhpa => &[DlPowerMode::MinRate],
            Algorithm::Rpa | Algorithm::Greedy => &[DlPowerMode::SumRate, DlPowerMode::MinRate],
        }
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::UnknownAlgorithm(s.to_string()))
    }
}

/// One algorithm evaluated under one DL power mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AlgoRun {
    pub algorithm: Algorithm,
    pub dl_mode: DlPowerMode,
}

impl AlgoRun {
    pub fn new(algorithm: Algorithm, dl_mode: DlPowerMode) -> Self {
        AlgoRun { algorithm, dl_mode }
    }

    /// Label used in records and file names, e.g. `mhpa-mr`.
    pub fn label(&self) -> String {
        format!("{}-{}", self.algorithm.name(), self.dl_mode.short_name())
    }
}

impl fmt::Display for AlgoRun {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// Parses `rpa,shpa:mr,mhpa,greedy:sr`. A bare name expands to
/// [`Algorithm::default_modes`]; a `:sr` or `:mr` suffix picks one mode.
pub fn parse_algorithms(list: &str) -> Result<Vec<AlgoRun>> {
    let mut runs = Vec::new();
    for item in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (name, mode) = match item.split_once(':') {
            Some((name, mode)) => (name, Some(mode)),
            None => (item, None),
        };
        let algorithm: Algorithm = name.parse()?;
        let modes: Vec<DlPowerMode> = match mode {
            None => algorithm.default_modes().to_vec(),
            Some("sr") => vec![DlPowerMode::SumRate],
            Some("mr") => vec![DlPowerMode::MinRate],
            Some(_) => return Err(Error::UnknownAlgorithm(item.to_string())),
        };
        for dl_mode in modes {
            let run = AlgoRun::new(algorithm, dl_mode);
            if !runs.contains(&run) {
                runs.push(run);
            }
        }
    }
    if runs.is_empty() {
        return Err(Error::InvalidConfig("no algorithms requested".into()));
    }
    Ok(runs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignConfig {
    pub system: SystemConfig,
    pub runs: Vec<AlgoRun>,
    pub n_drops: usize,
    pub master_seed: u64,
    pub max_sweeps: usize,
    pub rel_tol: f64,
    pub dl_bound: DlBound,
}

impl CampaignConfig {
    pub fn new(system: SystemConfig, runs: Vec<AlgoRun>, n_drops: usize, master_seed: u64) -> Self {
        CampaignConfig {
            system,
            runs,
            n_drops,
            master_seed,
            max_sweeps: 20,
            rel_tol: 1e-6,
            dl_bound: DlBound::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.system.validate()?;
        if self.n_drops == 0 {
            return Err(Error::InvalidConfig("need at least one drop".into()));
        }
        if self.runs.is_empty() {
            return Err(Error::InvalidConfig("no algorithms requested".into()));
        }
        if self.max_sweeps == 0 || self.rel_tol.is_nan() || self.rel_tol <= 0.0 {
            return Err(Error::InvalidConfig(
                "need max_sweeps >= 1 and rel_tol > 0".into(),
            ));
        }
        Ok(())
    }

    fn pa_config(&self, reward: RewardMode) -> PaRunConfig {
        PaRunConfig {
            reward,
            max_sweeps: self.max_sweeps,
            rel_tol: self.rel_tol,
        }
    }
}

/// One user's rates in one drop under one algorithm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub drop: usize,
    pub algo: String,
    pub user: usize,
    pub dl_bps: f64,
    pub ul_bps: f64,
    pub sweeps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignResult {
    pub config: CampaignConfig,
    /// Ordered by drop, then by run, then by user.
    pub records: Vec<Record>,
}

/// Runs one algorithm on one drop.
pub fn run_algorithm(
    drop: &Drop,
    cfg: &CampaignConfig,
    run: AlgoRun,
    rng: &mut ChaCha8Rng,
) -> Result<PaResult> {
    let settings = RateSettings {
        dl_mode: run.dl_mode,
        dl_bound: cfg.dl_bound,
    };
    let model = RateModel::new(drop, &cfg.system, settings);
    match run.algorithm {
        Algorithm::Rpa => run_rpa(&model, rng),
        Algorithm::Shpa => run_hungarian_pa(&model, &cfg.pa_config(RewardMode::Shpa), rng),
        Algorithm::Mhpa => run_hungarian_pa(&model, &cfg.pa_config(RewardMode::Mhpa), rng),
        Algorithm::Greedy => run_greedy_baseline(&model, &cfg.pa_config(RewardMode::Mhpa), rng),
    }
}

fn run_drop(cfg: &CampaignConfig, index: usize) -> Result<Vec<Record>> {
    let drop = campaign_drop(&cfg.system, cfg.master_seed, index as u64)?;
    let mut records = Vec::with_capacity(cfg.runs.len() * drop.num_users());
    for run in &cfg.runs {
        let mut rng = assignment_rng(cfg.master_seed, index as u64);
        let result = run_algorithm(&drop, cfg, *run, &mut rng)?;
        let label = run.label();
        records.extend((0..drop.num_users()).map(|user| Record {
            drop: index,
            algo: label.clone(),
            user,
            dl_bps: result.rates.dl[user],
            ul_bps: result.rates.ul[user],
            sweeps: result.sweeps_used,
        }));
    }
    Ok(records)
}

/// Runs every algorithm on `n_drops` drops, in parallel across drops. The
/// output does not depend on the number of worker threads.
pub fn run_campaign(cfg: &CampaignConfig) -> Result<CampaignResult> {
    cfg.validate()?;
    let per_drop: Vec<Vec<Record>> = (0..cfg.n_drops)
        .into_par_iter()
        .map(|d| run_drop(cfg, d))
        .collect::<Result<_>>()?;
    Ok(CampaignResult {
        config: cfg.clone(),
        records: per_drop.into_iter().flatten().collect(),
    })
}

/// Sample families that can be turned into a CDF.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// Every user's DL rate, pooled over drops.
    DlUser,
    UlUser,
    /// Per-drop sum of DL rates.
    DlSum,
    UlSum,
    /// Per-drop minimum DL rate.
    DlMin,
    UlMin,
}

impl Metric {
    pub const ALL: [Metric; 6] = [
        Metric::DlUser,
        Metric::UlUser,
        Metric::DlSum,
        Metric::UlSum,
        Metric::DlMin,
        Metric::UlMin,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::DlUser => "dl_user",
            Metric::UlUser => "ul_user",
            Metric::DlSum => "dl_sum",
            Metric::UlSum => "ul_sum",
            Metric::DlMin => "dl_min",
            Metric::UlMin => "ul_min",
        }
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::UnknownMetric(s.to_string()))
    }
}

/// Samples of `metric` for the records labelled `algo`. Per-drop metrics
/// come out in ascending drop order.
pub fn metric_samples(records: &[Record], algo: &str, metric: Metric) -> Vec<f64> {
    let mine = records.iter().filter(|r| r.algo == algo);
    let dl = |r: &Record| r.dl_bps;
    let ul = |r: &Record| r.ul_bps;
    match metric {
        Metric::DlUser => mine.map(dl).collect(),
        Metric::UlUser => mine.map(ul).collect(),
        Metric::DlSum => per_drop(mine, dl, |acc, v| acc + v, 0.0),
        Metric::UlSum => per_drop(mine, ul, |acc, v| acc + v, 0.0),
        Metric::DlMin => per_drop(mine, dl, f64::min, f64::INFINITY),
        Metric::UlMin => per_drop(mine, ul, f64::min, f64::INFINITY),
    }
}

fn per_drop<'a>(
    records: impl Iterator<Item = &'a Record>,
    value: impl Fn(&Record) -> f64,
    fold: impl Fn(f64, f64) -> f64,
    init: f64,
) -> Vec<f64> {
    let mut groups: std::collections::BTreeMap<usize, f64> = std::collections::BTreeMap::new();
    for r in records {
        let slot = groups.entry(r.drop).or_insert(init);
        *slot = fold(*slot, value(r));
    }
    groups.into_values().collect()
}

/// Labels present in `records`, in first-appearance order.
pub fn algo_labels(records: &[Record]) -> Vec<String> {
    let mut labels: Vec<String> = Vec::new();
    for r in records {
        if !labels.contains(&r.algo) {
            labels.push(r.algo.clone());
        }
    }
    labels
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub algo: String,
    pub records: usize,
    pub dl_5pct_bps: f64,
    pub ul_5pct_bps: f64,
    pub median_dl_sum_bps: f64,
    pub median_ul_sum_bps: f64,
    pub median_dl_min_bps: f64,
    pub median_ul_min_bps: f64,
    pub mean_sweeps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n_drops: usize,
    pub master_seed: u64,
    pub seed_rule: String,
    pub max_sweeps: usize,
    pub rel_tol: f64,
    pub dl_bound: DlBound,
    pub total_records: usize,
    pub system: SystemConfig,
    pub runs: Vec<RunSummary>,
}

pub fn summarize_run(records: &[Record], algo: &str) -> Result<RunSummary> {
    let median = |metric| percentile(&metric_samples(records, algo, metric), 0.5);
    let mine: Vec<&Record> = records.iter().filter(|r| r.algo == algo).collect();
    let mut sweeps = std::collections::BTreeMap::new();
    for r in &mine {
        sweeps.insert(r.drop, r.sweeps);
    }
    if sweeps.is_empty() {
        return Err(Error::EmptySample);
    }
    Ok(RunSummary {
        algo: algo.to_string(),
        records: mine.len(),
        dl_5pct_bps: percentile(&metric_samples(records, algo, Metric::DlUser), 0.05)?,
        ul_5pct_bps: percentile(&metric_samples(records, algo, Metric::UlUser), 0.05)?,
        median_dl_sum_bps: median(Metric::DlSum)?,
        median_ul_sum_bps: median(Metric::UlSum)?,
        median_dl_min_bps: median(Metric::DlMin)?,
        median_ul_min_bps: median(Metric::UlMin)?,
        mean_sweeps: sweeps.values().sum::<usize>() as f64 / sweeps.len() as f64,
    })
}

impl CampaignResult {
    pub fn summary(&self) -> Result<Summary> {
        let cfg = &self.config;
        let runs = algo_labels(&self.records)
            .iter()
            .map(|label| summarize_run(&self.records, label))
            .collect::<Result<_>>()?;
        Ok(Summary {
            n_drops: cfg.n_drops,
            master_seed: cfg.master_seed,
            seed_rule: "seed_d = splitmix64(master ^ splitmix64(d)); ChaCha8 stream 0 = geometry, stream 1 = initial pilots"
                .into(),
            max_sweeps: cfg.max_sweeps,
            rel_tol: cfg.rel_tol,
            dl_bound: cfg.dl_bound,
            total_records: self.records.len(),
            system: cfg.system.clone(),
            runs,
        })
    }
}

/// Files written by [`emit_outputs`].
#[derive(Debug, Clone, PartialEq)]
pub struct OutputFiles {
    pub records: PathBuf,
    pub summary: PathBuf,
    pub cdfs: Vec<PathBuf>,
}

/// Writes `records.csv`, `summary.json` and one `cdf/<algo>_<metric>.csv`
/// per run and metric into `dir`.
pub fn emit_outputs(result: &CampaignResult, dir: impl AsRef<Path>) -> Result<OutputFiles> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let records = dir.join("records.csv");
    write_records(&result.records, &records)?;

    let summary = dir.join("summary.json");
    let text = serde_json::to_string_pretty(&result.summary()?)?;
    fs::write(&summary, text + "\n").map_err(|e| Error::io(&summary, e))?;

    let mut cdfs = Vec::new();
    let labels = algo_labels(&result.records);
    if !labels.is_empty() {
        let cdf_dir = dir.join("cdf");
        fs::create_dir_all(&cdf_dir).map_err(|e| Error::io(&cdf_dir, e))?;
        for label in &labels {
            for metric in Metric::ALL {
                let path = cdf_dir.join(format!("{label}_{}.csv", metric.name()));
                write_cdf(&metric_samples(&result.records, label, metric), &path)?;
                cdfs.push(path);
            }
        }
    }
    Ok(OutputFiles {
        records,
        summary,
        cdfs,
    })
}

pub fn write_records(records: &[Record], path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    if records.is_empty() {
        writer
            .write_record(["drop", "algo", "user", "dl_bps", "ul_bps", "sweeps"])
            .map_err(|e| Error::csv(path, e))?;
    }
    for r in records {
        writer.serialize(r).map_err(|e| Error::csv(path, e))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

pub fn read_records(path: impl AsRef<Path>) -> Result<Vec<Record>> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    reader
        .deserialize()
        .map(|r| r.map_err(|e| Error::csv(path, e)))
        .collect()
}

/// Two-column `value,probability` file.
pub fn write_cdf(values: &[f64], path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    writer
        .write_record(["value", "probability"])
        .map_err(|e| Error::csv(path, e))?;
    for (value, prob) in empirical_cdf(values)? {
        writer
            .serialize((value, prob))
            .map_err(|e| Error::csv(path, e))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}
