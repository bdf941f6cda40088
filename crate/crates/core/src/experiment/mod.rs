//! Cross-validated experiments over model variants, their reports and
//! cross-experiment comparisons.

mod compare;
mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cache::{spectrum_for, SpectrumCache};
use crate::datagen::build_benchmark;
use crate::dataset::{self, kfold_split, preprocess, subsample, Dataset, Task};
use crate::error::{Error, Result};
use crate::gp::{GpConfig, GpModel};
use crate::hodgelet::{Aggregation, BlockKey, FilterBank, PreparedComplex};

pub use compare::{compare_variants, Comparison, ComparisonRow, PlotData, PlotSeries};
pub use config::{BankSettings, DatasetSpec, ExperimentConfig, ModelKind, Placement, Variant};

/// Execution settings that do not change any reported number.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub cache_dir: Option<PathBuf>,
    /// Worker threads; the global pool when absent.
    pub workers: Option<usize>,
    /// Added to every configured seed.
    pub seed_offset: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Accuracy,
    Mse,
}

impl Metric {
    pub fn for_task(task: Task) -> Self {
        if task.is_classification() {
            Self::Accuracy
        } else {
            Self::Mse
        }
    }

    /// Larger is better.
    fn score(self, value: f64) -> f64 {
        match self {
            Self::Accuracy => value,
            Self::Mse => -value,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionScore {
    pub beta: f64,
    pub aggregation: String,
    /// Holdout metric; `None` if training failed.
    pub metric: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldRecord {
    pub seed: u64,
    pub fold: usize,
    pub train_size: usize,
    pub test_size: usize,
    pub beta: f64,
    pub aggregation: String,
    pub metric: Option<f64>,
    pub error: Option<String>,
    #[serde(default)]
    pub selection: Vec<SelectionScore>,
    pub runtime_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub seed: u64,
    pub mean: f64,
    pub completed_folds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub name: String,
    pub family: String,
    pub resolution: Option<usize>,
    pub variant: String,
    pub metric: Metric,
    /// Mean over seeds of the per-seed fold means.
    pub mean: f64,
    /// Standard error of the per-seed means.
    pub stderr: f64,
    pub seeds: Vec<SeedSummary>,
    pub folds: Vec<FoldRecord>,
    pub failed_folds: usize,
    pub runtime_secs: f64,
    pub config: ExperimentConfig,
}

/// Per-seed means over completed folds, then mean and standard error across
/// seeds. Seeds without a completed fold are skipped.
pub fn aggregate_folds(folds: &[FoldRecord]) -> (Vec<SeedSummary>, f64, f64) {
    let mut seeds: Vec<u64> = folds.iter().map(|f| f.seed).collect();
    seeds.dedup();
    let summaries: Vec<SeedSummary> = seeds
        .iter()
        .filter_map(|&seed| {
            let values: Vec<f64> = folds
                .iter()
                .filter(|f| f.seed == seed)
                .filter_map(|f| f.metric)
                .collect();
            (!values.is_empty()).then(|| SeedSummary {
                seed,
                mean: values.iter().sum::<f64>() / values.len() as f64,
                completed_folds: values.len(),
            })
        })
        .collect();
    let s = summaries.len();
    if s == 0 {
        return (summaries, f64::NAN, f64::NAN);
    }
    let mean = summaries.iter().map(|x| x.mean).sum::<f64>() / s as f64;
    let stderr = if s > 1 {
        let var = summaries.iter().map(|x| (x.mean - mean).powi(2)).sum::<f64>() / (s - 1) as f64;
        (var / s as f64).sqrt()
    } else {
        0.0
    };
    (summaries, mean, stderr)
}

/// Loads or generates the dataset and applies preprocessing, subsampling
/// and the line-graph conversion of the variant.
pub fn load_experiment_data(cfg: &ExperimentConfig) -> Result<Dataset> {
    let mut ds = match (&cfg.dataset.generator, &cfg.dataset.path) {
        (Some(g), _) => build_benchmark(g)?,
        (None, Some(p)) => dataset::load(p)?,
        (None, None) => return Err(Error::Config("dataset needs a path or a generator".into())),
    };
    if let Some(opts) = &cfg.dataset.preprocessing {
        ds = preprocess(&ds, opts)?;
    }
    if let Some(n) = cfg.dataset.subsample {
        ds = subsample(&ds, n, cfg.seeds[0])?;
    }
    if cfg.variant.line_graph {
        let complexes = ds
            .complexes
            .iter()
            .map(|c| c.line_graph())
            .collect::<Result<Vec<_>>>()?;
        let mut lg = Dataset::new(complexes, Some(ds.task()))?;
        lg.manifest.generator = ds.manifest.generator.clone();
        ds = lg;
    }
    Ok(ds)
}

/// Spectral data of every complex, computed once per experiment.
pub fn prepare_inputs(
    ds: &Dataset,
    variant: &Variant,
    aggregations: &[Aggregation],
    cache: Option<&SpectrumCache>,
) -> Result<(Vec<BlockKey>, Vec<PreparedComplex>)> {
    let dims = variant.dims(ds.manifest.attribute_dims)?;
    let keys = BlockKey::for_dims(&dims, variant.split());
    let keep_basis = aggregations.iter().any(|a| a.needs_basis());
    let prepared = ds
        .complexes
        .par_iter()
        .map(|sc| {
            let spec = spectrum_for(sc, &dims, cache)?;
            PreparedComplex::new(sc, &spec, &keys, keep_basis)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((keys, prepared))
}

struct Trainer<'a> {
    cfg: &'a ExperimentConfig,
    task: Task,
    metric: Metric,
    keys: &'a [BlockKey],
    inputs: &'a [PreparedComplex],
    labels: &'a [f64],
}

impl Trainer<'_> {
    fn gather(&self, idx: &[usize]) -> (Vec<PreparedComplex>, Vec<f64>) {
        (
            idx.iter().map(|&i| self.inputs[i].clone()).collect(),
            idx.iter().map(|&i| self.labels[i]).collect(),
        )
    }

    /// Trains on `train`, returns the metric on `test`. The bank is
    /// initialized from the `(seed, stream)` RNG.
    fn train_eval(
        &self,
        train: &[usize],
        test: &[usize],
        beta: f64,
        agg: Aggregation,
        seed: u64,
        stream: u64,
    ) -> Result<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let bank = FilterBank::init(self.keys, &self.cfg.bank.with_aggregation(agg), &mut rng)?;
        let gp = GpConfig {
            kernel: self.cfg.kernel.clone(),
            likelihood: self.cfg.likelihood_for(self.task),
            beta,
            mc_samples: self.cfg.mc_samples,
            standardize: self.cfg.standardize,
            seed,
            ..Default::default()
        };
        let (xtr, mut ytr) = self.gather(train);
        let (xte, yte) = self.gather(test);
        let offset = if self.metric == Metric::Mse {
            ytr.iter().sum::<f64>() / ytr.len() as f64
        } else {
            0.0
        };
        ytr.iter_mut().for_each(|y| *y -= offset);
        let mut model = GpModel::for_inputs(gp, bank, &xtr[0])?;
        model.fit(&xtr, &ytr, &self.cfg.optimizer)?;
        let pred = model.predict(&xte)?;
        let n = yte.len() as f64;
        Ok(match self.metric {
            Metric::Accuracy => pred.iter().zip(&yte).filter(|(p, y)| p.point() == **y).count() as f64 / n,
            Metric::Mse => {
                pred.iter()
                    .zip(&yte)
                    .map(|(p, y)| (p.point() + offset - y).powi(2))
                    .sum::<f64>()
                    / n
            }
        })
    }

    fn candidates(&self, aggs: &[Aggregation]) -> Vec<(f64, Aggregation)> {
        let exact = GpConfig {
            likelihood: self.cfg.likelihood_for(self.task),
            ..Default::default()
        }
        .is_exact();
        let betas: Vec<f64> = if exact { vec![1.0] } else { self.cfg.beta_grid.clone() };
        aggs.iter().flat_map(|&a| betas.iter().map(move |&b| (b, a))).collect()
    }

    fn run_fold(&self, seed: u64, fold: usize, train: &[usize], test: &[usize], aggs: &[Aggregation]) -> FoldRecord {
        let start = Instant::now();
        let candidates = self.candidates(aggs);
        let mut selection = Vec::new();
        let (beta, agg) = if candidates.len() == 1 || self.cfg.inner_folds < 2 {
            candidates[0]
        } else {
            let inner_labels: Vec<f64> = train.iter().map(|&i| self.labels[i]).collect();
            let stratify = self.cfg.stratify && self.task.is_classification();
            match kfold_split(
                &inner_labels,
                self.cfg.inner_folds,
                seed ^ 0x9e37_79b9 ^ fold as u64,
                stratify,
            ) {
                Ok(inner) => {
                    let itrain: Vec<usize> = inner[0].train.iter().map(|&i| train[i]).collect();
                    let ival: Vec<usize> = inner[0].validation.iter().map(|&i| train[i]).collect();
                    let mut best = (f64::NEG_INFINITY, candidates[0]);
                    for &(b, a) in &candidates {
                        let m = self.train_eval(&itrain, &ival, b, a, seed, 1000 + fold as u64).ok();
                        let score = m.map_or(f64::NEG_INFINITY, |m| self.metric.score(m));
                        if score > best.0 {
                            best = (score, (b, a));
                        }
                        selection.push(SelectionScore {
                            beta: b,
                            aggregation: a.to_string(),
                            metric: m,
                        });
                    }
                    best.1
                }
                Err(e) => {
                    log::warn!("seed {seed} fold {fold}: no inner split ({e}); using the first candidate");
                    candidates[0]
                }
            }
        };
        let result = self.train_eval(train, test, beta, agg, seed, fold as u64 + 1);
        if let Err(e) = &result {
            log::warn!("seed {seed} fold {fold} failed: {e}");
        }
        FoldRecord {
            seed,
            fold,
            train_size: train.len(),
            test_size: test.len(),
            beta,
            aggregation: agg.to_string(),
            metric: result.as_ref().ok().copied(),
            error: result.err().map(|e| e.to_string()),
            selection,
            runtime_secs: start.elapsed().as_secs_f64(),
        }
    }
}

fn in_pool<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
        None => Ok(f()),
    }
}

/// Runs every `(seed, fold)` pair: split, select `(β, aggregation)` on an
/// inner holdout when there is a choice, train, and score the held-out fold.
pub fn run_experiment(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<MetricsReport> {
    cfg.validate()?;
    let start = Instant::now();
    let cache = opts.cache_dir.as_ref().map(SpectrumCache::new).transpose()?;
    in_pool(opts.workers, || {
        let ds = load_experiment_data(cfg)?;
        let aggs = cfg.aggregations()?;
        let (keys, inputs) = prepare_inputs(&ds, &cfg.variant, &aggs, cache.as_ref())?;
        let labels = ds.labels();
        let task = ds.task();
        let trainer = Trainer {
            cfg,
            task,
            metric: Metric::for_task(task),
            keys: &keys,
            inputs: &inputs,
            labels: &labels,
        };
        let mut jobs = Vec::new();
        for &s in &cfg.seeds {
            let seed = s.wrapping_add(opts.seed_offset);
            let folds = kfold_split(&labels, cfg.folds, seed, cfg.stratify && task.is_classification())?;
            jobs.extend(folds.into_iter().enumerate().map(|(f, fold)| (seed, f, fold)));
        }
        let folds: Vec<FoldRecord> = jobs
            .par_iter()
            .map(|(seed, f, fold)| trainer.run_fold(*seed, *f, &fold.train, &fold.validation, &aggs))
            .collect();
        let failed = folds.iter().filter(|f| f.metric.is_none()).count();
        if failed > 0 {
            log::warn!("{failed} of {} folds failed; aggregating the rest", folds.len());
        }
        let (seeds, mean, stderr) = aggregate_folds(&folds);
        Ok(MetricsReport {
            name: cfg.name.clone(),
            family: cfg.dataset.family(),
            resolution: cfg.dataset.resolution(),
            variant: cfg.variant.to_string(),
            metric: trainer.metric,
            mean,
            stderr,
            seeds,
            folds,
            failed_folds: failed,
            runtime_secs: start.elapsed().as_secs_f64(),
            config: cfg.clone(),
        })
    })?
}

#[derive(Serialize)]
struct FoldRow<'a> {
    seed: u64,
    fold: usize,
    train_size: usize,
    test_size: usize,
    beta: f64,
    aggregation: &'a str,
    metric: Option<f64>,
    runtime_secs: f64,
    error: Option<&'a str>,
}

pub fn folds_csv(report: &MetricsReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for f in &report.folds {
        w.serialize(FoldRow {
            seed: f.seed,
            fold: f.fold,
            train_size: f.train_size,
            test_size: f.test_size,
            beta: f.beta,
            aggregation: &f.aggregation,
            metric: f.metric,
            runtime_secs: f.runtime_secs,
            error: f.error.as_deref(),
        })
        .map_err(|e| Error::Format(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Writes `report.json`, `folds.csv` and `plotdata.json` into `dir`.
pub fn write_report(report: &MetricsReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("report.json"), serde_json::to_string_pretty(report)?)?;
    fs::write(dir.join("folds.csv"), folds_csv(report)?)?;
    let cmp = compare_variants(std::slice::from_ref(report))?;
    fs::write(
        dir.join("plotdata.json"),
        serde_json::to_string_pretty(&cmp.plot_data())?,
    )?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{Benchmark, BenchmarkConfig};

    fn record(seed: u64, fold: usize, metric: Option<f64>) -> FoldRecord {
        FoldRecord {
            seed,
            fold,
            train_size: 8,
            test_size: 2,
            beta: 1.0,
            aggregation: "energy".into(),
            metric,
            error: None,
            selection: Vec::new(),
            runtime_secs: 0.0,
        }
    }

    #[test]
    fn aggregation_over_seeds() {
        let folds = vec![
            record(0, 0, Some(1.0)),
            record(0, 1, Some(0.5)),
            record(1, 0, Some(0.5)),
            record(1, 1, None),
        ];
        let (seeds, mean, stderr) = aggregate_folds(&folds);
        assert_eq!(seeds.len(), 2);
        assert_eq!(seeds[1].completed_folds, 1);
        assert!((mean - 0.625).abs() < 1e-15);
        // per-seed means 0.75 and 0.5
        assert!((stderr - 0.125).abs() < 1e-12);
        let (_, m, s) = aggregate_folds(&[record(4, 0, Some(0.3))]);
        assert_eq!((m, s), (0.3, 0.0));
    }

    fn tiny_config() -> ExperimentConfig {
        ExperimentConfig {
            name: "tiny".into(),
            dataset: DatasetSpec::generated(BenchmarkConfig {
                benchmark: Benchmark::DivCurlFree,
                n_complexes: 12,
                resolution: 8,
                seed: 1,
                ..Default::default()
            }),
            folds: 3,
            seeds: vec![0, 1],
            beta_grid: vec![1.0],
            optimizer: crate::gp::OptimConfig {
                iterations: 5,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    #[test]
    fn bookkeeping_and_determinism() {
        let cfg = tiny_config();
        let a = run_experiment(&cfg, &RunOptions::default()).unwrap();
        assert_eq!(a.folds.len(), 6);
        assert_eq!(a.failed_folds, 0);
        assert_eq!(a.metric, Metric::Accuracy);
        let b = run_experiment(
            &cfg,
            &RunOptions {
                workers: Some(1),
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(
            a.folds.iter().map(|f| f.metric).collect::<Vec<_>>(),
            b.folds.iter().map(|f| f.metric).collect::<Vec<_>>()
        );
        assert_eq!((a.mean, a.stderr), (b.mean, b.stderr));
        let (_, mean, _) = aggregate_folds(&a.folds);
        assert_eq!(mean, a.mean);
    }

    #[test]
    fn cache_does_not_change_metrics() {
        let cfg = tiny_config();
        let dir = tempfile::tempdir().unwrap();
        let opts = RunOptions {
            cache_dir: Some(dir.path().to_path_buf()),
            ..Default::default()
        };
        let plain = run_experiment(&cfg, &RunOptions::default()).unwrap();
        let cold = run_experiment(&cfg, &opts).unwrap();
        let warm = run_experiment(&cfg, &opts).unwrap();
        assert_eq!(plain.mean, cold.mean);
        assert_eq!(plain.mean, warm.mean);
        let ds = load_experiment_data(&cfg).unwrap();
        let mut keys: Vec<String> = ds
            .complexes
            .iter()
            .map(|c| crate::cache::content_key(c, &[1]))
            .collect();
        keys.sort();
        keys.dedup();
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), keys.len());
    }

    #[test]
    fn selection_is_logged() {
        let mut cfg = tiny_config();
        cfg.seeds = vec![0];
        cfg.beta_grid = vec![0.1, 1.0];
        cfg.aggregation = vec!["energy".into(), "sum".into()];
        let r = run_experiment(&cfg, &RunOptions::default()).unwrap();
        for f in &r.folds {
            assert_eq!(f.selection.len(), 4);
        }
        let csv = folds_csv(&r).unwrap();
        assert_eq!(csv.lines().count(), 4);
        assert!(csv.starts_with("seed,fold,"));
    }
}
