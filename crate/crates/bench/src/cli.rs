//! Subcommands of the `spider` binary. Each reads one TOML config, takes a
//! master seed and writes its artifacts into an output directory. Relative
//! paths inside a config resolve against the config file's directory.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{de::DeserializeOwned, Deserialize, Serialize};
use spider_agent::{export_selection_dataset, read_selection_dataset, train_agent, write_selection_dataset, AgentConfig};
use spider_core::data::{load_grid_csv, read_series_cache, split, synthesize_traffic, write_series_cache, DatasetSeries, SeriesManifest, SplitSpec, SyntheticConfig};
use spider_core::sampling::derive_seed;
use spider_core::{Bucket, BucketConfig, GridGeometry, QualityConfig, Reconstructor, SelectionMatrix};
use spider_env::{read_episode_logs, write_episode_logs, EnvConfig, Environment};
use spider_mtrnet::{mtrnet_init, mtrnet_train, MtrnetConfig, MtrnetModel, TrainHyper};
use spider_policy::{evaluate_selector, PolicyConfig, PolicyHyper, PolicyNet};
use spider_recon::KnnS;

use crate::baselines::{build_budget_table, build_frequency_matrix, build_historical_budget, HistoricalStrategy, RandomStrategy};
use crate::gain::{choose_threshold, gain_curve};
use crate::report::{heatmap_svg, line_chart_svg, write_table, write_text, ExperimentReport};

/// Seed labels for the stages that draw random numbers.
mod stage {
    pub const MTRNET_INIT: u64 = 1;
    pub const MTRNET_TRAIN: u64 = 2;
    pub const AGENT: u64 = 3;
    pub const POLICY_INIT: u64 = 4;
    pub const POLICY_TRAIN: u64 = 5;
    pub const GAIN: u64 = 6;
    pub const BUDGET: u64 = 7;
    pub const RANDOM: u64 = 8;
}

/// Seeds are saved with checkpoints, and TOML integers are signed 64-bit.
fn stage_seed(seed: u64, stage: u64) -> u64 {
    derive_seed(seed, stage) & i64::MAX as u64
}

fn read_config<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn write_toml<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, toml::to_string(value)?).with_context(|| format!("writing {}", path.display()))
}

/// Writes `<dir>/series.toml` and `<dir>/series.spdr`.
pub fn save_series(series: &DatasetSeries, dir: &Path) -> Result<PathBuf> {
    let manifest = write_series_cache(series, &dir.join("series.spdr"))?;
    let path = dir.join("series.toml");
    write_toml(&path, &manifest)?;
    Ok(path)
}

/// Loads a series from its manifest; the tensor sits beside it as `.spdr`.
pub fn load_series(manifest: &Path) -> Result<DatasetSeries> {
    let m: SeriesManifest = read_config(manifest)?;
    Ok(read_series_cache(&manifest.with_extension("spdr"), &m)?)
}

#[derive(Debug, Clone, Deserialize)]
struct DataSection {
    series: PathBuf,
    train_days: usize,
    test_days: usize,
}

impl DataSection {
    fn load(&self, base: &Path) -> Result<(DatasetSeries, DatasetSeries)> {
        let s = load_series(&resolve(base, &self.series))?;
        Ok(split(&s, SplitSpec { train_days: self.train_days, test_days: self.test_days })?)
    }
}

fn load_mtrnet(path: &Path) -> Result<MtrnetModel> {
    let m = MtrnetModel::load(path).with_context(|| format!("loading reconstruction model from {}", path.display()))?;
    if m.norm.is_none() {
        bail!("model at {} has no normalizer; train it first", path.display());
    }
    Ok(m)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Threshold {
    epsilon: f64,
    knee_rate: f64,
}

fn epsilon_from(base: &Path, epsilon: Option<f64>, threshold: &Option<PathBuf>) -> Result<f64> {
    match (epsilon, threshold) {
        (Some(e), _) => Ok(e),
        (None, Some(p)) => Ok(read_config::<Threshold>(&resolve(base, p))?.epsilon),
        (None, None) => bail!("config needs either `epsilon` or `threshold`"),
    }
}

pub fn synth(config: &Path, seed: u64, out: &Path) -> Result<()> {
    let mut cfg: SyntheticConfig = read_config(config)?;
    cfg.seed = seed;
    let s = synthesize_traffic(&cfg)?;
    save_series(&s, out)?;
    log::info!("wrote {} snapshots of {}x{}", s.len(), s.geometry.rows, s.geometry.cols);
    Ok(())
}

#[derive(Debug, Deserialize)]
struct IngestConfig {
    csv: PathBuf,
    rows: usize,
    cols: usize,
    delta_minutes: u32,
    cell_area_km2: Option<f64>,
}

pub fn ingest(config: &Path, _seed: u64, out: &Path) -> Result<()> {
    let cfg: IngestConfig = read_config(config)?;
    let base = config.parent().unwrap_or(Path::new("."));
    let mut g = GridGeometry::new(cfg.rows, cfg.cols)?;
    if let Some(a) = cfg.cell_area_km2 {
        g = g.with_cell_area(a)?;
    }
    let (s, report) = load_grid_csv(&resolve(base, &cfg.csv), g, cfg.delta_minutes)?;
    save_series(&s, out)?;
    write_toml(&out.join("ingest_report.toml"), &report)?;
    Ok(())
}

#[derive(Debug, Deserialize)]
struct TrainMtrnetConfig {
    data: DataSection,
    #[serde(default = "MtrnetConfig::desk")]
    model: MtrnetConfig,
    #[serde(default)]
    hyper: TrainHyper,
}

pub fn train_mtrnet_cmd(config: &Path, seed: u64, out: &Path) -> Result<()> {
    let mut cfg: TrainMtrnetConfig = read_config(config)?;
    let base = config.parent().unwrap_or(Path::new("."));
    let (train, _) = cfg.data.load(base)?;
    let mut model = mtrnet_init(&cfg.model, stage_seed(seed, stage::MTRNET_INIT))?;
    cfg.hyper.seed = stage_seed(seed, stage::MTRNET_TRAIN);
    let hist = mtrnet_train(&mut model, &train, &cfg.hyper)?;
    model.save(&out.join("mtrnet"))?;
    let mut rows = vec![vec![0.0, f64::NAN, hist.initial_val_mae]];
    rows.extend(hist.epochs.iter().map(|e| vec![e.epoch as f64, e.train_mae, e.val_mae]));
    write_table(&out.join("mtrnet_history.csv"), &["epoch", "train_mae", "val_mae"], &rows)?;
    Ok(())
}

#[derive(Debug, Deserialize)]
struct GainConfig {
    data: DataSection,
    /// `knn` or `mtrnet`.
    #[serde(default = "default_recon")]
    reconstructor: String,
    mtrnet: Option<PathBuf>,
    rates: Vec<f64>,
    #[serde(default = "default_masks")]
    masks: usize,
    #[serde(default = "default_knee")]
    knee_rate: f64,
    cutoff: Option<f64>,
}

fn default_recon() -> String {
    "knn".into()
}

fn default_masks() -> usize {
    20
}

fn default_knee() -> f64 {
    0.35
}

fn reconstructor_by_name(name: &str, mtrnet: &Option<PathBuf>, base: &Path) -> Result<(Box<dyn Reconstructor>, Option<spider_core::NormStats>)> {
    match name {
        "knn" => Ok((Box::new(KnnS::default()), None)),
        "mtrnet" => {
            let p = mtrnet.as_ref().context("reconstructor `mtrnet` needs an `mtrnet` path")?;
            let m = load_mtrnet(&resolve(base, p))?;
            let n = m.norm;
            Ok((Box::new(m), n))
        }
        other => bail!("unknown reconstructor `{other}` (expected knn or mtrnet)"),
    }
}

/// Gain curve on the training split; ε is read off at the knee.
pub fn gain_curve_cmd(config: &Path, seed: u64, out: &Path) -> Result<()> {
    let cfg: GainConfig = read_config(config)?;
    let base = config.parent().unwrap_or(Path::new("."));
    let (train, _) = cfg.data.load(base)?;
    let (recon, norm) = reconstructor_by_name(&cfg.reconstructor, &cfg.mtrnet, base)?;
    let norm = match norm {
        Some(n) => n,
        None => spider_core::data::fit_normalizer(&train)?,
    };
    let truth = train.normalized(&norm)?;
    let curve = gain_curve(&truth, recon.as_ref(), &cfg.rates, cfg.masks, stage_seed(seed, stage::GAIN))?;
    let rows: Vec<Vec<f64>> = curve.iter().map(|p| vec![p.rate, p.mean_mae, p.median_mae, p.gain]).collect();
    write_table(&out.join("gain_curve.csv"), &["rate", "mean_mae", "median_mae", "gain"], &rows)?;
    let svg = line_chart_svg(
        "Sampling-rate gain",
        "sampling rate",
        "relative MAE reduction",
        &[("gain", curve.iter().map(|p| (p.rate, p.gain)).collect()), ("mean MAE", curve.iter().map(|p| (p.rate, p.mean_mae)).collect())],
    );
    write_text(&out.join("gain_curve.svg"), &svg)?;
    let epsilon = choose_threshold(&curve, cfg.knee_rate, cfg.cutoff)?;
    write_toml(&out.join("threshold.toml"), &Threshold { epsilon, knee_rate: cfg.knee_rate })?;
    Ok(())
}

#[derive(Debug, Deserialize)]
struct TrainAgentConfig {
    data: DataSection,
    mtrnet: PathBuf,
    epsilon: Option<f64>,
    threshold: Option<PathBuf>,
    #[serde(default)]
    agent: AgentConfig,
    #[serde(default)]
    unavailable_fraction: f64,
    /// Train on only the last `episodes` timestamps of the training split.
    episodes: Option<usize>,
}

pub fn train_agent_cmd(config: &Path, seed: u64, out: &Path) -> Result<()> {
    let mut cfg: TrainAgentConfig = read_config(config)?;
    let base = config.parent().unwrap_or(Path::new("."));
    let (train, _) = cfg.data.load(base)?;
    let train = match cfg.episodes {
        Some(n) if n < train.len() => train.slice(train.len() - n..train.len())?,
        _ => train,
    };
    let model = load_mtrnet(&resolve(base, &cfg.mtrnet))?;
    let norm = model.norm.expect("checked on load");
    let eps = epsilon_from(base, cfg.epsilon, &cfg.threshold)?;
    let frames = model.config.window_frames;
    let mut env_cfg = EnvConfig::new(train.geometry, frames, QualityConfig::with_epsilon(eps)?);
    env_cfg.unavailable_fraction = cfg.unavailable_fraction;
    let mut env = Environment::new(&train, &norm, env_cfg, &model)?;
    cfg.agent.seed = stage_seed(seed, stage::AGENT);
    let (agent, logs, hist) = train_agent(&mut env, &cfg.agent)?;
    agent.save(&out.join("agent"))?;
    write_episode_logs(&out.join("episodes.jsonl"), &logs)?;
    let dataset = export_selection_dataset(&logs, &train.normalized(&norm)?, frames)?;
    write_selection_dataset(&out.join("selections.jsonl"), &dataset)?;
    let rows: Vec<Vec<f64>> = hist.iter().map(|h| vec![h.epoch as f64, h.mean_loss, h.mean_iterations, h.mean_final_mae]).collect();
    write_table(&out.join("agent_history.csv"), &["epoch", "loss", "iterations", "final_mae"], &rows)?;
    Ok(())
}

#[derive(Debug, Deserialize)]
struct TrainPolicyConfig {
    dataset: PathBuf,
    #[serde(default)]
    policy: PolicyConfig,
    #[serde(default)]
    hyper: PolicyHyper,
}

pub fn train_policy_cmd(config: &Path, seed: u64, out: &Path) -> Result<()> {
    let mut cfg: TrainPolicyConfig = read_config(config)?;
    let base = config.parent().unwrap_or(Path::new("."));
    let data = read_selection_dataset(&resolve(base, &cfg.dataset))?;
    let frames = data.first().map(|s| s.window.len()).context("selection dataset is empty")?;
    cfg.policy.net.window_frames = frames;
    cfg.policy.seed = stage_seed(seed, stage::POLICY_INIT);
    cfg.hyper.seed = stage_seed(seed, stage::POLICY_TRAIN);
    let mut net = PolicyNet::new(cfg.policy)?;
    let hist = spider_policy::policy_train(&mut net, &data, &cfg.hyper)?;
    net.save(&out.join("policy"))?;
    let rows: Vec<Vec<f64>> = hist.epoch_bce.iter().enumerate().map(|(e, b)| vec![e as f64, *b]).collect();
    write_table(&out.join("policy_history.csv"), &["epoch", "bce"], &rows)?;
    Ok(())
}

#[derive(Debug, Deserialize)]
struct EvaluateConfig {
    data: DataSection,
    mtrnet: PathBuf,
    policy: PathBuf,
    epsilon: Option<f64>,
    threshold: Option<PathBuf>,
    /// Episode logs to build selection frequencies from; without them the
    /// policy's own selections on the training split are used.
    episodes: Option<PathBuf>,
    #[serde(default)]
    buckets: BucketConfig,
}

#[derive(Debug, Serialize)]
struct Timing {
    policy_latency_ms: f64,
}

/// Runs random, historical and policy selection over the test split.
pub fn evaluate_cmd(config: &Path, seed: u64, out: &Path) -> Result<()> {
    let cfg: EvaluateConfig = read_config(config)?;
    let base = config.parent().unwrap_or(Path::new("."));
    let mut required = vec![resolve(base, &cfg.data.series), resolve(base, &cfg.mtrnet).join("manifest.toml"), resolve(base, &cfg.policy).join("manifest.toml")];
    if let Some(p) = &cfg.threshold {
        required.push(resolve(base, p));
    }
    if let Some(p) = &cfg.episodes {
        required.push(resolve(base, p));
    }
    let missing: Vec<String> = required.iter().filter(|p| !p.exists()).map(|p| p.display().to_string()).collect();
    if !missing.is_empty() {
        bail!("missing artifacts:\n  {}", missing.join("\n  "));
    }
    let (train, test) = cfg.data.load(base)?;
    let model = load_mtrnet(&resolve(base, &cfg.mtrnet))?;
    let policy = PolicyNet::load(&resolve(base, &cfg.policy))?;
    let norm = model.norm.expect("checked on load");
    let eps = epsilon_from(base, cfg.epsilon, &cfg.threshold)?;
    let (train_n, test_n) = (train.normalized(&norm)?, test.normalized(&norm)?);
    let clock = train.clock();
    let frames = policy.config.net.window_frames;

    let budget = build_budget_table(&train_n, &model, eps, stage_seed(seed, stage::BUDGET))?;
    let selections: Vec<SelectionMatrix> = match &cfg.episodes {
        Some(p) => read_episode_logs(&resolve(base, p))?.into_iter().map(|l| l.final_selection).collect(),
        None => evaluate_selector(&policy, &train_n, &model, frames, &cfg.buckets)?.selections,
    };
    let freq = build_frequency_matrix(&selections, &clock)?;
    let hist_budget = build_historical_budget(&train_n, &model, &freq, eps)?;
    write_toml(&out.join("budget_random.toml"), &budget)?;
    write_toml(&out.join("budget_historical.toml"), &hist_budget)?;

    let random = RandomStrategy { budget: budget.clone(), clock, seed: stage_seed(seed, stage::RANDOM) };
    let historical = HistoricalStrategy { freq, budget: hist_budget, clock };
    let r_eval = evaluate_selector(&random, &test_n, &model, frames, &cfg.buckets)?;
    let h_eval = evaluate_selector(&historical, &test_n, &model, frames, &cfg.buckets)?;
    let p_eval = evaluate_selector(&policy, &test_n, &model, frames, &cfg.buckets)?;
    let report = ExperimentReport::from_evaluations(&[("random", &r_eval), ("historical", &h_eval), ("spider", &p_eval)]);
    report.write_csv(&out.join("report.csv"))?;
    write_toml(&out.join("timing.toml"), &Timing { policy_latency_ms: 1e3 * p_eval.mean_latency_s() })?;

    // cells selected over time
    let rows: Vec<Vec<f64>> = r_eval
        .records
        .iter()
        .zip(&h_eval.records)
        .zip(&p_eval.records)
        .map(|((r, h), p)| vec![r.t as f64, r.count as f64, h.count as f64, p.count as f64, r.nmae, h.nmae, p.nmae])
        .collect();
    write_table(&out.join("cells_over_time.csv"), &["t", "random_count", "historical_count", "spider_count", "random_nmae", "historical_nmae", "spider_nmae"], &rows)?;
    let series: Vec<(&str, Vec<(f64, f64)>)> = [("random", &r_eval), ("historical", &h_eval), ("spider", &p_eval)]
        .iter()
        .map(|(n, e)| (*n, e.records.iter().enumerate().map(|(k, r)| (k as f64, r.count as f64)).collect()))
        .collect();
    write_text(&out.join("cells_over_time.svg"), &line_chart_svg("Cells selected over the test period", "test step", "cells", &series))?;

    // where the policy samples in peak and off-peak hours
    let g = test.geometry;
    for (name, peak) in [("peak", true), ("offpeak", false)] {
        let picks: Vec<&SelectionMatrix> = p_eval.selections.iter().filter(|s| cfg.buckets.is_peak(&clock, s.t) == peak).collect();
        let mut f = vec![0.0; g.cells()];
        for s in &picks {
            f.iter_mut().zip(s.bits()).for_each(|(v, &b)| *v += b as u8 as f64);
        }
        let n = picks.len().max(1) as f64;
        f.iter_mut().for_each(|v| *v /= n);
        let rows: Vec<Vec<f64>> = (0..g.rows).map(|i| f[i * g.cols..(i + 1) * g.cols].to_vec()).collect();
        let header: Vec<String> = (0..g.cols).map(|j| format!("col{j}")).collect();
        write_table(&out.join(format!("frequency_{name}.csv")), &header.iter().map(String::as_str).collect::<Vec<_>>(), &rows)?;
        write_text(&out.join(format!("frequency_{name}.svg")), &heatmap_svg(&format!("Selection frequency, {name}"), g.rows, g.cols, &f))?;
    }
    let overall = report.row("spider", Bucket::Overall).and_then(|r| r.mean_count).unwrap_or(0.0);
    log::info!("spider selects {overall:.1} cells per snapshot on average");
    Ok(())
}

#[derive(Debug, Deserialize)]
struct ReportConfig {
    reports: Vec<PathBuf>,
}

/// Collects report CSVs into one markdown file.
pub fn report_cmd(config: &Path, _seed: u64, out: &Path) -> Result<()> {
    let cfg: ReportConfig = read_config(config)?;
    let base = config.parent().unwrap_or(Path::new("."));
    let mut md = String::new();
    for p in &cfg.reports {
        let path = resolve(base, p);
        let r = ExperimentReport::read_csv(&path).with_context(|| format!("reading {}", path.display()))?;
        md.push_str(&format!("## {}\n\n{}\n", p.display(), r.to_markdown()));
    }
    write_text(&out.join("report.md"), &md)?;
    print!("{md}");
    Ok(())
}
