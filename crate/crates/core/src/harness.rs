//! Cross-validated, replicated comparison of loss functions.
//!
//! One replicate draws (or subsamples) a clean dataset, splits it into `k`
//! folds, corrupts the training part of each fold, trains every model on the
//! identical corrupted data from the identical initial weights and batch
//! order, and scores each model on the clean test fold. A replicate score is
//! the mean of the `k` fold scores.

use std::path::PathBuf;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::datagen::{Dataset, Noise, Synthetic};
use crate::error::{Error, Result};
use crate::ingest;
use crate::losses::{mae_score, rmse_score, LossSpec};
use crate::nn::{init_params, NetworkConfig, Parameters, TrainConfig, TrainedModel};
use crate::seed::{self, Purpose, StreamId};
use crate::stats::{self, kruskal_wallis, wilcoxon_rank_sum, Alternative, TestResult};

/// Environment variable naming the Seoul bike sharing CSV for presets.
pub const SEOUL_CSV_ENV: &str = "CAUCHY_BENCH_SEOUL_CSV";
pub const DEFAULT_SEOUL_CSV: &str = "data/SeoulBikeData.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetSource {
    /// `n` fresh samples of a handcrafted function per replicate.
    Synthetic { generator: Synthetic, n: usize },
    /// The Seoul bike sharing file under the default schema, optionally
    /// subsampled to `subsample` rows per replicate.
    SeoulBike {
        path: PathBuf,
        #[serde(default)]
        subsample: Option<usize>,
    },
    /// Any all-numeric CSV whose last column is the target.
    Csv {
        path: PathBuf,
        #[serde(default)]
        subsample: Option<usize>,
    },
}

impl DatasetSource {
    /// Data shared by all replicates (file sources only).
    fn load_base(&self) -> Result<Option<Dataset<f64>>> {
        match self {
            DatasetSource::Synthetic { .. } => Ok(None),
            DatasetSource::SeoulBike { path, .. } => ingest::load_seoul_bike(path).map(Some),
            DatasetSource::Csv { path, .. } => Dataset::load_csv(path).map(Some),
        }
    }

    fn replicate_data(&self, base: Option<&Dataset<f64>>, seed: u64) -> Result<Dataset<f64>> {
        match self {
            DatasetSource::Synthetic { generator, n } => generator.generate(*n, seed),
            DatasetSource::SeoulBike { subsample, .. } | DatasetSource::Csv { subsample, .. } => {
                let base = base.expect("file source loaded");
                match subsample {
                    Some(m) if *m < base.len() => {
                        let mut rng = seed::rng(seed);
                        let mut idx: Vec<usize> = rand::seq::index::sample(&mut rng, base.len(), *m).into_vec();
                        idx.sort_unstable();
                        Ok(base.select(&idx))
                    }
                    _ => Ok(base.clone()),
                }
            }
        }
    }
}

fn default_folds() -> usize {
    10
}

fn default_replicates() -> usize {
    5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: String,
    pub dataset: DatasetSource,
    #[serde(default)]
    pub noise: Noise,
    pub models: Vec<LossSpec<f64>>,
    /// Hidden layer widths; the input width follows from the data.
    pub hidden_layers: Vec<usize>,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default)]
    pub master_seed: u64,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(Error::usage("need at least two folds"));
        }
        if self.replicates == 0 {
            return Err(Error::usage("need at least one replicate"));
        }
        if self.models.is_empty() {
            return Err(Error::usage("model list is empty"));
        }
        for m in &self.models {
            m.validate()?;
        }
        self.noise.validate()?;
        self.train.validate()?;
        NetworkConfig::new(1, self.hidden_layers.clone()).validate()?;
        if let DatasetSource::Synthetic { n, .. } = self.dataset {
            if n < self.folds {
                return Err(Error::usage("fewer samples than folds"));
            }
        }
        Ok(())
    }

    pub fn model_labels(&self) -> Vec<String> {
        self.models.iter().map(LossSpec::label).collect()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Shuffled `k`-fold partition of `0..n`; the first `n mod k` folds hold one
/// extra index. Returns `(train, test)` index lists, both sorted.
pub fn kfold_split(n: usize, k: usize, seed: u64) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
    if k == 0 || k > n {
        return Err(Error::usage(format!("cannot split {n} rows into {k} folds")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut seed::rng(seed));
    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        let mut test = idx[start..start + size].to_vec();
        test.sort_unstable();
        let mut in_test = vec![false; n];
        test.iter().for_each(|&i| in_test[i] = true);
        let train = (0..n).filter(|&i| !in_test[i]).collect();
        folds.push((train, test));
        start += size;
    }
    Ok(folds)
}

/// Hex SHA-256 of the bit patterns of a dataset's features and targets.
pub fn dataset_digest(data: &Dataset<f64>) -> String {
    let mut h = Sha256::new();
    for v in data.x.as_slice().iter().chain(&data.y) {
        h.update(v.to_bits().to_le_bytes());
    }
    hex(&h.finalize())
}

fn params_digest(p: &Parameters<f64>) -> String {
    let mut h = Sha256::new();
    for v in p.values() {
        h.update(v.to_bits().to_le_bytes());
    }
    hex(&h.finalize())
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamRecord {
    pub id: StreamId,
    pub seed: u64,
}

/// Everything one fold of one replicate trains and tests on.
#[derive(Debug, Clone)]
pub struct FoldPlan {
    pub fold: usize,
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
    pub train: Dataset<f64>,
    pub test: Dataset<f64>,
    pub init: Parameters<f64>,
    pub train_config: TrainConfig,
}

#[derive(Debug, Clone)]
pub struct ReplicatePlan {
    pub replicate: usize,
    pub clean: Dataset<f64>,
    pub folds: Vec<FoldPlan>,
    pub streams: Vec<StreamRecord>,
}

fn stream(cfg: &ExperimentConfig, log: &mut Vec<StreamRecord>, id: StreamId) -> u64 {
    let seed = id.seed(cfg.master_seed);
    log.push(StreamRecord { id, seed });
    seed
}

/// Builds the clean data, folds, corrupted training sets and shared
/// initialisations for one replicate.
pub fn plan_replicate(cfg: &ExperimentConfig, base: Option<&Dataset<f64>>, replicate: usize) -> Result<ReplicatePlan> {
    let mut streams = Vec::new();
    let data_seed = stream(cfg, &mut streams, StreamId::new(replicate, None, None, Purpose::Data));
    let clean = cfg.dataset.replicate_data(base, data_seed)?;
    let split_seed = stream(cfg, &mut streams, StreamId::new(replicate, None, None, Purpose::Split));
    let net = NetworkConfig::new(clean.dim(), cfg.hidden_layers.clone());

    let mut folds = Vec::with_capacity(cfg.folds);
    for (fold, (train_idx, test_idx)) in kfold_split(clean.len(), cfg.folds, split_seed)?.into_iter().enumerate() {
        let noise_seed = stream(cfg, &mut streams, StreamId::new(replicate, Some(fold), None, Purpose::Noise));
        let init_seed = stream(cfg, &mut streams, StreamId::new(replicate, Some(fold), None, Purpose::Init));
        let shuffle_seed = stream(cfg, &mut streams, StreamId::new(replicate, Some(fold), None, Purpose::Shuffle));
        let train = cfg.noise.apply(&clean.select(&train_idx), noise_seed)?;
        folds.push(FoldPlan {
            fold,
            test: clean.select(&test_idx),
            train,
            train_indices: train_idx,
            test_indices: test_idx,
            init: init_params(&net, init_seed)?,
            train_config: TrainConfig {
                seed: shuffle_seed,
                ..cfg.train.clone()
            },
        });
    }
    Ok(ReplicatePlan {
        replicate,
        clean,
        folds,
        streams,
    })
}

/// Scores of one model on one clean test fold, with digests of what it was
/// trained on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellScore {
    pub replicate: usize,
    pub fold: usize,
    pub model: usize,
    pub label: String,
    pub mae: f64,
    pub rmse: f64,
    pub train_digest: String,
    pub test_digest: String,
    pub init_digest: String,
    pub shuffle_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateScores {
    pub replicate: usize,
    /// Ordered by fold, then model.
    pub cells: Vec<CellScore>,
    pub streams: Vec<StreamRecord>,
}

impl ReplicateScores {
    /// Mean over folds of each model's score, `(mae, rmse)` per model.
    pub fn model_means(&self, models: usize) -> Vec<(f64, f64)> {
        (0..models)
            .map(|m| {
                let cells: Vec<&CellScore> = self.cells.iter().filter(|c| c.model == m).collect();
                let n = cells.len() as f64;
                (
                    cells.iter().map(|c| c.mae).sum::<f64>() / n,
                    cells.iter().map(|c| c.rmse).sum::<f64>() / n,
                )
            })
            .collect()
    }
}

fn run_cell(
    cfg: &ExperimentConfig,
    replicate: usize,
    fold: &FoldPlan,
    model: usize,
    digests: (&str, &str, &str),
) -> Result<CellScore> {
    let loss = &cfg.models[model];
    let tag = |e: Error| Error::Experiment {
        model: loss.label(),
        fold: fold.fold,
        replicate,
        source: Box::new(e),
    };
    let fitted = TrainedModel::fit(fold.init.clone(), &fold.train, loss, &fold.train_config).map_err(tag)?;
    let pred = fitted.predict(&fold.test.x).map_err(tag)?;
    // a finite-loss run can still emit non-finite test predictions
    let mae = mae_score(&fold.test.y, &pred).map_err(|_| tag(Error::Diverged { epoch: cfg.train.epochs }))?;
    let rmse = rmse_score(&fold.test.y, &pred).map_err(tag)?;
    Ok(CellScore {
        replicate,
        fold: fold.fold,
        model,
        label: loss.label(),
        mae,
        rmse,
        train_digest: digests.0.to_string(),
        test_digest: digests.1.to_string(),
        init_digest: digests.2.to_string(),
        shuffle_seed: fold.train_config.seed,
    })
}

fn run_plan(cfg: &ExperimentConfig, plan: ReplicatePlan) -> Result<ReplicateScores> {
    let per_fold: Vec<Vec<CellScore>> = plan
        .folds
        .par_iter()
        .map(|fold| {
            let train_digest = dataset_digest(&fold.train);
            let test_digest = dataset_digest(&fold.test);
            let init_digest = params_digest(&fold.init);
            (0..cfg.models.len())
                .into_par_iter()
                .map(|m| run_cell(cfg, plan.replicate, fold, m, (&train_digest, &test_digest, &init_digest)))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    Ok(ReplicateScores {
        replicate: plan.replicate,
        cells: per_fold.into_iter().flatten().collect(),
        streams: plan.streams,
    })
}

/// Runs all folds and models of one replicate.
pub fn run_replicate(cfg: &ExperimentConfig, replicate: usize) -> Result<ReplicateScores> {
    cfg.validate()?;
    let base = cfg.dataset.load_base()?;
    run_plan(cfg, plan_replicate(cfg, base.as_ref(), replicate)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
}

impl Summary {
    fn of(values: &[f64]) -> Self {
        let (mean, std) = stats::mean_std(values);
        Summary { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelScores {
    pub label: String,
    pub loss: LossSpec<f64>,
    pub mae: Summary,
    pub rmse: Summary,
    /// One fold-averaged score per replicate.
    pub replicate_mae: Vec<f64>,
    pub replicate_rmse: Vec<f64>,
}

impl ModelScores {
    pub fn summary(&self, metric: Metric) -> Summary {
        match metric {
            Metric::Mae => self.mae,
            Metric::Rmse => self.rmse,
        }
    }

    pub fn samples(&self, metric: Metric) -> &[f64] {
        match metric {
            Metric::Mae => &self.replicate_mae,
            Metric::Rmse => &self.replicate_rmse,
        }
    }
}

/// Per-model mean (population std) over replicates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreTable {
    pub models: Vec<ModelScores>,
}

impl ScoreTable {
    pub fn from_replicates(models: &[LossSpec<f64>], replicates: &[ReplicateScores]) -> Self {
        let means: Vec<Vec<(f64, f64)>> = replicates.iter().map(|r| r.model_means(models.len())).collect();
        ScoreTable {
            models: models
                .iter()
                .enumerate()
                .map(|(m, loss)| {
                    let mae: Vec<f64> = means.iter().map(|r| r[m].0).collect();
                    let rmse: Vec<f64> = means.iter().map(|r| r[m].1).collect();
                    ModelScores {
                        label: loss.label(),
                        loss: *loss,
                        mae: Summary::of(&mae),
                        rmse: Summary::of(&rmse),
                        replicate_mae: mae,
                        replicate_rmse: rmse,
                    }
                })
                .collect(),
        }
    }

    pub fn model(&self, label: &str) -> Option<&ModelScores> {
        self.models.iter().find(|m| m.label == label)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Mae,
    Rmse,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Mae => "MAE",
            Metric::Rmse => "RMSE",
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mae" => Ok(Metric::Mae),
            "rmse" => Ok(Metric::Rmse),
            _ => Err(Error::usage(format!("unknown metric \"{s}\""))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseResult {
    pub a: String,
    pub b: String,
    pub result: TestResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub metric: Metric,
    pub omnibus: TestResult,
    pub pairwise: Vec<PairwiseResult>,
}

impl Comparison {
    pub fn pair(&self, a: &str, b: &str) -> Option<&TestResult> {
        self.pairwise
            .iter()
            .find(|p| (p.a == a && p.b == b) || (p.a == b && p.b == a))
            .map(|p| &p.result)
    }
}

/// Omnibus Kruskal-Wallis over all models plus two-sided rank-sum tests for
/// every pair, on the per-replicate scores.
pub fn compare_models(table: &ScoreTable, metric: Metric) -> Result<Comparison> {
    if table.models.len() < 2 {
        return Err(Error::usage("comparison needs at least two models"));
    }
    let n = table.models[0].samples(metric).len();
    if table.models.iter().any(|m| m.samples(metric).len() != n) {
        return Err(Error::usage("models have different replicate counts"));
    }
    let groups: Vec<Vec<f64>> = table.models.iter().map(|m| m.samples(metric).to_vec()).collect();
    let omnibus = kruskal_wallis(&groups)?;
    let mut pairwise = Vec::new();
    for i in 0..table.models.len() {
        for j in i + 1..table.models.len() {
            pairwise.push(PairwiseResult {
                a: table.models[i].label.clone(),
                b: table.models[j].label.clone(),
                result: wilcoxon_rank_sum(&groups[i], &groups[j], Alternative::TwoSided)?,
            });
        }
    }
    Ok(Comparison {
        metric,
        omnibus,
        pairwise,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub version: String,
    pub started_unix_secs: u64,
    pub elapsed_secs: f64,
    /// How data are drawn per replicate.
    pub data_policy: String,
    pub noise_policy: String,
    pub std_convention: String,
}

/// Everything `run` writes: config echo, per-cell scores, aggregate table,
/// comparisons and run metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResults {
    pub config: ExperimentConfig,
    pub cells: Vec<CellScore>,
    pub table: ScoreTable,
    pub comparisons: Vec<Comparison>,
    pub metadata: RunMetadata,
}

impl ExperimentResults {
    pub fn comparison(&self, metric: Metric) -> Option<&Comparison> {
        self.comparisons.iter().find(|c| c.metric == metric)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

fn data_policy(src: &DatasetSource) -> String {
    match src {
        DatasetSource::Synthetic { .. } => "synthetic inputs re-sampled per replicate".into(),
        DatasetSource::SeoulBike { subsample: Some(m), .. } | DatasetSource::Csv { subsample: Some(m), .. } => {
            format!("{m} rows subsampled per replicate")
        }
        _ => "full file reused by every replicate".into(),
    }
}

/// Runs every replicate (concurrently), then aggregates and compares. Any
/// failing cell aborts the whole experiment.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResults> {
    cfg.validate()?;
    let started = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    let clock = Instant::now();
    let base = cfg.dataset.load_base()?;
    let replicates: Vec<ReplicateScores> = (0..cfg.replicates)
        .into_par_iter()
        .map(|r| run_plan(cfg, plan_replicate(cfg, base.as_ref(), r)?))
        .collect::<Result<_>>()?;
    let table = ScoreTable::from_replicates(&cfg.models, &replicates);
    let comparisons = if table.models.len() >= 2 {
        vec![compare_models(&table, Metric::Mae)?, compare_models(&table, Metric::Rmse)?]
    } else {
        Vec::new()
    };
    Ok(ExperimentResults {
        config: cfg.clone(),
        cells: replicates.into_iter().flat_map(|r| r.cells).collect(),
        table,
        comparisons,
        metadata: RunMetadata {
            version: env!("CARGO_PKG_VERSION").to_string(),
            started_unix_secs: started,
            elapsed_secs: clock.elapsed().as_secs_f64(),
            data_policy: data_policy(&cfg.dataset),
            noise_policy: "noise applied to the training part of each fold after splitting; test folds clean"
                .into(),
            std_convention: "population standard deviation over replicates".into(),
        },
    })
}

const HANDCRAFTED_C: [f64; 5] = [0.1, 1.0, 10.0, 20.0, 100.0];
const SEOUL_C: [f64; 6] = [1.0, 10.0, 100.0, 200.0, 1000.0, 10000.0];
const LEVELS: [f64; 4] = [1.0, 10.0, 50.0, 100.0];
const PROPORTIONS: [f64; 4] = [0.025, 0.05, 0.075, 0.10];

fn models(cs: &[f64]) -> Vec<LossSpec<f64>> {
    std::iter::once(LossSpec::mse())
        .chain(cs.iter().map(|&c| LossSpec::clf(c).expect("positive constant")))
        .collect()
}

fn seoul_path() -> PathBuf {
    std::env::var_os(SEOUL_CSV_ENV).map_or_else(|| PathBuf::from(DEFAULT_SEOUL_CSV), PathBuf::from)
}

fn fmt_level(v: f64) -> String {
    format!("{v}")
}

/// All preset names accepted by [`preset`].
pub fn preset_names() -> Vec<String> {
    let mut names = Vec::new();
    for g in ["hc2", "hc8"] {
        names.push(format!("{g}-negative"));
        for fam in ["gaussian", "cauchy"] {
            for l in LEVELS {
                names.push(format!("{g}-{fam}-{}", fmt_level(l)));
            }
        }
    }
    names.push("seoul-negative".into());
    for p in PROPORTIONS {
        names.push(format!("seoul-outliers-{}", fmt_level(p)));
    }
    let reduced: Vec<String> = names.iter().map(|n| format!("{n}-reduced")).collect();
    names.extend(reduced);
    names
}

/// Named experiment grids. `*-reduced` variants run on 1000 synthetic samples
/// with 3 replicates, or on 2000 subsampled Seoul rows with 5 replicates.
pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let unknown = || Error::usage(format!("unknown preset \"{name}\""));
    let (stem, reduced) = match name.strip_suffix("-reduced") {
        Some(s) => (s, true),
        None => (name, false),
    };
    let mut parts = stem.splitn(3, '-');
    let head = parts.next().ok_or_else(unknown)?;
    let family = parts.next().ok_or_else(unknown)?;
    let level = parts.next();
    let parse_level = |allowed: &[f64]| -> Result<f64> {
        let v: f64 = level.ok_or_else(unknown)?.parse().map_err(|_| unknown())?;
        if allowed.contains(&v) {
            Ok(v)
        } else {
            Err(unknown())
        }
    };

    let cfg = match head {
        "hc2" | "hc8" => {
            let generator = if head == "hc2" { Synthetic::Hc2 } else { Synthetic::Hc8 };
            let noise = match family {
                "negative" if level.is_none() => Noise::None,
                "gaussian" => Noise::Gaussian {
                    sigma: parse_level(&LEVELS)?,
                },
                "cauchy" => Noise::Cauchy {
                    x0: 0.0,
                    tau: parse_level(&LEVELS)?,
                },
                _ => return Err(unknown()),
            };
            ExperimentConfig {
                name: name.to_string(),
                dataset: DatasetSource::Synthetic {
                    generator,
                    n: if reduced { 1000 } else { 5000 },
                },
                noise,
                models: models(&HANDCRAFTED_C),
                hidden_layers: vec![10],
                train: TrainConfig::default(),
                folds: 10,
                replicates: if reduced { 3 } else { 5 },
                master_seed: 0,
            }
        }
        "seoul" => {
            let noise = match family {
                "negative" if level.is_none() => Noise::None,
                "outliers" => Noise::UniformOutlier {
                    proportion: parse_level(&PROPORTIONS)?,
                    range_multiplier: 500.0,
                },
                _ => return Err(unknown()),
            };
            ExperimentConfig {
                name: name.to_string(),
                dataset: DatasetSource::SeoulBike {
                    path: seoul_path(),
                    subsample: reduced.then_some(2000),
                },
                noise,
                models: models(&SEOUL_C),
                hidden_layers: vec![14, 14],
                train: TrainConfig::default(),
                folds: 10,
                replicates: 5,
                master_seed: 0,
            }
        }
        _ => return Err(unknown()),
    };
    Ok(cfg)
}
