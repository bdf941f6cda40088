use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::datagen::BenchmarkConfig;
use crate::dataset::{PreprocessOptions, Task};
use crate::error::{Error, Result};
use crate::gp::{KernelConfig, Likelihood, OptimConfig};
use crate::hodgelet::{Aggregation, BankConfig, ScalingFn, WaveletFn};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    /// Separate filters per Hodge subspace.
    #[serde(rename = "HTGP")]
    Htgp,
    /// One filter set on the whole spectrum of each `L_k`.
    #[serde(rename = "WTGP")]
    Wtgp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    Vertex,
    Edge,
    /// Every dimension that carries attributes.
    Hybrid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Variant {
    pub model: ModelKind,
    pub placement: Placement,
    /// Replace each complex by the line graph of its 1-skeleton, so edge
    /// attributes become vertex attributes.
    #[serde(default)]
    pub line_graph: bool,
}

impl Default for Variant {
    fn default() -> Self {
        Self {
            model: ModelKind::Htgp,
            placement: Placement::Edge,
            line_graph: false,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let model = match self.model {
            ModelKind::Htgp => "HTGP",
            ModelKind::Wtgp => "WTGP",
        };
        let place = match self.placement {
            Placement::Vertex => "vertex",
            Placement::Edge => "edge",
            Placement::Hybrid => "hybrid",
        };
        if self.line_graph {
            write!(f, "{model} ({place}, line graph)")
        } else {
            write!(f, "{model} ({place})")
        }
    }
}

impl Variant {
    pub fn split(&self) -> bool {
        self.model == ModelKind::Htgp
    }

    /// Dimensions whose attributes the variant reads, checked against the
    /// attribute widths of the (possibly line-graph) dataset.
    pub fn dims(&self, attribute_dims: [usize; 3]) -> Result<Vec<usize>> {
        let need = |k: usize| {
            if attribute_dims[k] == 0 {
                Err(Error::Config(format!("{self} needs attributes on dimension {k}")))
            } else {
                Ok(vec![k])
            }
        };
        match self.placement {
            Placement::Vertex => need(0),
            Placement::Edge => need(1),
            Placement::Hybrid => {
                let dims: Vec<usize> = (0..3).filter(|&k| attribute_dims[k] > 0).collect();
                if dims.is_empty() {
                    Err(Error::Config("dataset has no attributes".into()))
                } else {
                    Ok(dims)
                }
            }
        }
    }
}

/// Where the complexes come from: a dataset file or a synthetic generator.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetSpec {
    pub path: Option<PathBuf>,
    pub generator: Option<BenchmarkConfig>,
    pub preprocessing: Option<PreprocessOptions>,
    /// Keep this many complexes, stratified by class.
    pub subsample: Option<usize>,
}

impl DatasetSpec {
    pub fn generated(cfg: BenchmarkConfig) -> Self {
        Self {
            generator: Some(cfg),
            ..Default::default()
        }
    }

    /// Benchmark name or file stem.
    pub fn family(&self) -> String {
        match (&self.generator, &self.path) {
            (Some(g), _) => g.benchmark.to_string(),
            (None, Some(p)) => p
                .file_stem()
                .map_or_else(String::new, |s| s.to_string_lossy().into_owned()),
            (None, None) => String::new(),
        }
    }

    pub fn resolution(&self) -> Option<usize> {
        self.generator.as_ref().map(|g| g.resolution)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BankSettings {
    pub num_filters: usize,
    pub num_scales: usize,
    pub alpha_range: [f64; 2],
    pub beta_range: [f64; 2],
    pub scaling: ScalingFn,
    pub wavelet: WaveletFn,
}

impl Default for BankSettings {
    fn default() -> Self {
        let b = BankConfig::default();
        Self {
            num_filters: b.num_filters,
            num_scales: b.num_scales,
            alpha_range: b.alpha_range,
            beta_range: b.beta_range,
            scaling: b.scaling,
            wavelet: b.wavelet,
        }
    }
}

impl BankSettings {
    pub fn with_aggregation(&self, aggregation: Aggregation) -> BankConfig {
        BankConfig {
            num_filters: self.num_filters,
            num_scales: self.num_scales,
            alpha_range: self.alpha_range,
            beta_range: self.beta_range,
            scaling: self.scaling,
            wavelet: self.wavelet,
            aggregation,
        }
    }
}

/// One cross-validated experiment, read from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub name: String,
    pub dataset: DatasetSpec,
    pub variant: Variant,
    pub kernel: KernelConfig,
    /// Chosen from the task when absent.
    pub likelihood: Option<Likelihood>,
    /// Candidate pooling methods; more than one triggers inner selection.
    pub aggregation: Vec<String>,
    pub bank: BankSettings,
    /// Candidate KL weights for variational inference.
    pub beta_grid: Vec<f64>,
    pub optimizer: OptimConfig,
    pub folds: usize,
    pub seeds: Vec<u64>,
    /// The inner holdout used for selection is one of this many folds of
    /// the training part.
    pub inner_folds: usize,
    pub stratify: bool,
    pub standardize: bool,
    pub mc_samples: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            name: "experiment".into(),
            dataset: DatasetSpec::default(),
            variant: Variant::default(),
            kernel: KernelConfig::default(),
            likelihood: None,
            aggregation: vec!["energy".into()],
            bank: BankSettings::default(),
            beta_grid: vec![0.01, 0.1, 1.0],
            optimizer: OptimConfig::default(),
            folds: 5,
            seeds: (0..5).collect(),
            inner_folds: 5,
            stratify: true,
            standardize: true,
            mc_samples: 64,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parses a TOML file; a relative dataset path is resolved against the
    /// file's directory.
    pub fn from_file(path: &Path) -> Result<Self> {
        let mut cfg = Self::from_toml(&fs::read_to_string(path)?)?;
        if let (Some(p), Some(dir)) = (&cfg.dataset.path, path.parent()) {
            if p.is_relative() {
                cfg.dataset.path = Some(dir.join(p));
            }
        }
        Ok(cfg)
    }

    pub fn aggregations(&self) -> Result<Vec<Aggregation>> {
        if self.aggregation.is_empty() {
            return Err(Error::Config("aggregation list is empty".into()));
        }
        self.aggregation.iter().map(|s| s.parse()).collect()
    }

    pub fn likelihood_for(&self, task: Task) -> Likelihood {
        self.likelihood.unwrap_or(match task {
            Task::Binary => Likelihood::Bernoulli,
            Task::Multiclass { classes } => Likelihood::Softmax { classes },
            Task::Regression => Likelihood::default(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.dataset.path, &self.dataset.generator) {
            (Some(_), Some(_)) => return Err(Error::Config("dataset has both a path and a generator".into())),
            (None, None) => return Err(Error::Config("dataset needs a path or a generator".into())),
            _ => {}
        }
        if self.variant.line_graph && self.variant.placement != Placement::Vertex {
            return Err(Error::Config("the line-graph route needs the vertex placement".into()));
        }
        if self.folds < 2 {
            return Err(Error::Config("at least 2 folds are needed".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("seed list is empty".into()));
        }
        if self.beta_grid.is_empty() || self.beta_grid.iter().any(|b| !(*b > 0.0 && *b <= 1.0)) {
            return Err(Error::Config("β grid must be non-empty with values in (0, 1]".into()));
        }
        if self.bank.num_filters == 0 {
            return Err(Error::Config("a filter bank needs at least one filter".into()));
        }
        self.aggregations()?;
        Ok(())
    }
}
