//! Spectral wavelet filters on Hodge spectra and the pooled, permutation
//! invariant representations built from them.
//!
//! A filter evaluates `w(λ) = a(αλ) + Σ_l b(β_l λ)` on the eigenvalues of one
//! spectral block. Applying `U diag(w(λ)) Uᵀ` to an attribute column gives
//! the coefficient vector, which is pooled into a scalar. Stacking the pooled
//! values over filters (outer) and attribute columns (inner) gives the block
//! of the representation.
//!
//! Training needs these features many times for the same complexes, so
//! [`PreparedComplex`] caches `Uᵀ X_k` and `Uᵀ 1` once and evaluates both the
//! features and their gradients with respect to the log-space filter
//! parameters without touching the dense transforms again.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::complex::SimplicialComplex;
use crate::error::{Error, Result};
use crate::hodge::{DimSpectrum, EigenBlock, HodgeComponent, HodgeSpectrum, ZERO_REL};

/// Low-pass scaling function `a`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalingFn {
    /// `a(x) = exp(−x)`
    #[default]
    Exp,
    /// `a(x) = exp(−x²)`
    Gaussian,
}

impl ScalingFn {
    pub fn value(self, x: f64) -> f64 {
        match self {
            Self::Exp => (-x).exp(),
            Self::Gaussian => (-x * x).exp(),
        }
    }

    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Self::Exp => -(-x).exp(),
            Self::Gaussian => -2.0 * x * (-x * x).exp(),
        }
    }
}

/// Band-pass wavelet function `b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WaveletFn {
    /// `b(x) = x·exp(−x)`
    #[default]
    XExp,
    /// `b(x) = x²·exp(−x)`
    X2Exp,
}

impl WaveletFn {
    pub fn value(self, x: f64) -> f64 {
        match self {
            Self::XExp => x * (-x).exp(),
            Self::X2Exp => x * x * (-x).exp(),
        }
    }

    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Self::XExp => (1.0 - x) * (-x).exp(),
            Self::X2Exp => x * (2.0 - x) * (-x).exp(),
        }
    }
}

/// One wavelet filter with its scale parameters stored as logarithms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveletFilter {
    pub log_alpha: f64,
    pub log_betas: Vec<f64>,
}

impl WaveletFilter {
    pub fn new(alpha: f64, betas: &[f64]) -> Self {
        Self {
            log_alpha: alpha.ln(),
            log_betas: betas.iter().map(|b| b.ln()).collect(),
        }
    }

    pub fn alpha(&self) -> f64 {
        self.log_alpha.exp()
    }

    pub fn betas(&self) -> Vec<f64> {
        self.log_betas.iter().map(|b| b.exp()).collect()
    }

    pub fn num_scales(&self) -> usize {
        self.log_betas.len()
    }

    pub fn num_params(&self) -> usize {
        1 + self.log_betas.len()
    }

    pub fn eval(&self, lambda: f64, a: ScalingFn, b: WaveletFn) -> f64 {
        let low = a.value(self.alpha() * lambda);
        let band: f64 = self.log_betas.iter().map(|lb| b.value(lb.exp() * lambda)).sum();
        low + band
    }

    /// Value and gradient with respect to `(log α, log β_1, …, log β_L)`.
    pub fn eval_with_grad(&self, lambda: f64, a: ScalingFn, b: WaveletFn, grad: &mut [f64]) -> f64 {
        let alpha = self.alpha();
        let mut value = a.value(alpha * lambda);
        grad[0] = a.derivative(alpha * lambda) * alpha * lambda;
        for (l, lb) in self.log_betas.iter().enumerate() {
            let s = lb.exp() * lambda;
            value += b.value(s);
            grad[1 + l] = b.derivative(s) * s;
        }
        value
    }
}

/// Evaluates a filter at a single eigenvalue. Small negative eigenvalues from
/// round-off are clamped to zero.
pub fn wavelet_filter_eval(lambda: f64, filter: &WaveletFilter, a: ScalingFn, b: WaveletFn) -> Result<f64> {
    if lambda < -ZERO_REL {
        return Err(Error::NegativeEigenvalue(lambda));
    }
    Ok(filter.eval(lambda.max(0.0), a, b))
}

/// Permutation-invariant pooling of a coefficient vector.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "method")]
pub enum Aggregation {
    /// Squared 2-norm.
    #[default]
    Energy,
    Sum,
    Min,
    Max,
    /// `w_sum·sum + w_min·min + w_max·max`; the weights are the initial
    /// values of learnable per-block weights.
    Weighted {
        sum: f64,
        min: f64,
        max: f64,
    },
}

impl Aggregation {
    pub fn needs_basis(&self) -> bool {
        matches!(self, Self::Min | Self::Max | Self::Weighted { .. })
    }

    pub fn is_weighted(&self) -> bool {
        matches!(self, Self::Weighted { .. })
    }
}

impl FromStr for Aggregation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "energy" => Ok(Self::Energy),
            "sum" => Ok(Self::Sum),
            "min" => Ok(Self::Min),
            "max" => Ok(Self::Max),
            "weighted" => Ok(Self::Weighted {
                sum: 1.0,
                min: 1.0,
                max: 1.0,
            }),
            other => Err(Error::Config(format!("unknown aggregation method `{other}`"))),
        }
    }
}

impl fmt::Display for Aggregation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::Energy => "energy",
            Self::Sum => "sum",
            Self::Min => "min",
            Self::Max => "max",
            Self::Weighted { .. } => "weighted",
        };
        f.write_str(s)
    }
}

/// Pools a coefficient vector. The empty vector pools to `0`.
pub fn aggregate(x: &[f64], method: &Aggregation) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    let sum = || x.iter().sum::<f64>();
    let min = || x.iter().copied().fold(f64::INFINITY, f64::min);
    let max = || x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    match *method {
        Aggregation::Energy => x.iter().map(|v| v * v).sum(),
        Aggregation::Sum => sum(),
        Aggregation::Min => min(),
        Aggregation::Max => max(),
        Aggregation::Weighted {
            sum: ws,
            min: wn,
            max: wx,
        } => ws * sum() + wn * min() + wx * max(),
    }
}

/// Which part of the dimension-`k` spectrum a block of filters acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SpectralPart {
    Hodge(HodgeComponent),
    /// The whole spectrum without the Hodge split.
    Unsplit,
}

/// `(k, part)` identifying one representation block, written as e.g. `1e`
/// (edge, exact), `0h` (vertex, harmonic) or `1u` (edge, unsplit).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BlockKey {
    pub k: usize,
    pub part: SpectralPart,
}

impl BlockKey {
    pub fn hodge(k: usize, c: HodgeComponent) -> Self {
        Self {
            k,
            part: SpectralPart::Hodge(c),
        }
    }

    pub fn unsplit(k: usize) -> Self {
        Self {
            k,
            part: SpectralPart::Unsplit,
        }
    }

    /// Keys for the listed dimensions, either split into the non-vanishing
    /// Hodge components or left unsplit.
    pub fn for_dims(dims: &[usize], split: bool) -> Vec<Self> {
        let mut keys = Vec::new();
        for &k in dims {
            if split {
                for c in HodgeComponent::ALL {
                    if !c.vanishes_at(k) {
                        keys.push(Self::hodge(k, c));
                    }
                }
            } else {
                keys.push(Self::unsplit(k));
            }
        }
        keys
    }

    pub fn block<'a>(&self, spec: &'a DimSpectrum) -> std::borrow::Cow<'a, EigenBlock> {
        match self.part {
            SpectralPart::Hodge(c) => std::borrow::Cow::Borrowed(spec.block(c)),
            SpectralPart::Unsplit => std::borrow::Cow::Owned(spec.unsplit()),
        }
    }
}

impl fmt::Display for BlockKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = match self.part {
            SpectralPart::Hodge(c) => c.short_name(),
            SpectralPart::Unsplit => "u",
        };
        write!(f, "{}{}", self.k, p)
    }
}

impl FromStr for BlockKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("bad block key `{s}`"));
        let (k, p) = s.split_at(s.len().checked_sub(1).ok_or_else(bad)?);
        let k: usize = k.parse().map_err(|_| bad())?;
        if k > 2 {
            return Err(bad());
        }
        let part = match p {
            "e" => SpectralPart::Hodge(HodgeComponent::Exact),
            "c" => SpectralPart::Hodge(HodgeComponent::CoExact),
            "h" => SpectralPart::Hodge(HodgeComponent::Harmonic),
            "u" => SpectralPart::Unsplit,
            _ => return Err(bad()),
        };
        Ok(Self { k, part })
    }
}

impl Serialize for BlockKey {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for BlockKey {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Filters of one representation block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterSet {
    pub key: BlockKey,
    pub num_filters: usize,
    pub num_scales: usize,
    pub filters: Vec<WaveletFilter>,
    /// Learnable `(w_sum, w_min, w_max)` for weighted aggregation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<[f64; 3]>,
}

impl FilterSet {
    fn num_params(&self) -> usize {
        self.filters.iter().map(|f| f.num_params()).sum::<usize>() + if self.weights.is_some() { 3 } else { 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StackingOrder {
    /// Filter index outer, attribute column inner: entry `f·D + d`.
    #[default]
    FilterMajor,
}

/// Initialization ranges and sizes for a new bank.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BankConfig {
    pub num_filters: usize,
    pub num_scales: usize,
    pub alpha_range: [f64; 2],
    pub beta_range: [f64; 2],
    pub scaling: ScalingFn,
    pub wavelet: WaveletFn,
    pub aggregation: Aggregation,
}

impl Default for BankConfig {
    fn default() -> Self {
        Self {
            num_filters: 3,
            num_scales: 3,
            alpha_range: [4.0, 6.0],
            beta_range: [0.1, 5.0],
            scaling: ScalingFn::Exp,
            wavelet: WaveletFn::XExp,
            aggregation: Aggregation::Energy,
        }
    }
}

/// All wavelet filters of a model, one [`FilterSet`] per representation block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterBank {
    pub scaling: ScalingFn,
    pub wavelet: WaveletFn,
    pub aggregation: Aggregation,
    pub stacking: StackingOrder,
    pub sets: Vec<FilterSet>,
}

impl FilterBank {
    /// Draws `α ~ U(alpha_range)` and `β_l ~ U(beta_range)` for every filter.
    pub fn init<R: Rng + ?Sized>(keys: &[BlockKey], cfg: &BankConfig, rng: &mut R) -> Result<Self> {
        if cfg.num_filters == 0 {
            return Err(Error::Config("a filter bank needs at least one filter".into()));
        }
        for r in [cfg.alpha_range, cfg.beta_range] {
            if !(r[0] > 0.0 && r[1] >= r[0]) {
                return Err(Error::Config(format!("bad initialization range {r:?}")));
            }
        }
        let uniform = |rng: &mut R, [lo, hi]: [f64; 2]| {
            if hi > lo {
                rng.random_range(lo..hi)
            } else {
                lo
            }
        };
        let weights = match cfg.aggregation {
            Aggregation::Weighted { sum, min, max } => Some([sum, min, max]),
            _ => None,
        };
        let sets = keys
            .iter()
            .map(|&key| {
                let filters = (0..cfg.num_filters)
                    .map(|_| {
                        let alpha = uniform(rng, cfg.alpha_range);
                        let betas: Vec<f64> = (0..cfg.num_scales).map(|_| uniform(rng, cfg.beta_range)).collect();
                        WaveletFilter::new(alpha, &betas)
                    })
                    .collect();
                FilterSet {
                    key,
                    num_filters: cfg.num_filters,
                    num_scales: cfg.num_scales,
                    filters,
                    weights,
                }
            })
            .collect();
        Ok(Self {
            scaling: cfg.scaling,
            wavelet: cfg.wavelet,
            aggregation: cfg.aggregation,
            stacking: StackingOrder::FilterMajor,
            sets,
        })
    }

    pub fn keys(&self) -> Vec<BlockKey> {
        self.sets.iter().map(|s| s.key).collect()
    }

    pub fn set(&self, key: BlockKey) -> Option<&FilterSet> {
        self.sets.iter().find(|s| s.key == key)
    }

    /// Checks the internal consistency of a bank read from disk.
    pub fn validate(&self) -> Result<()> {
        for s in &self.sets {
            if s.filters.len() != s.num_filters || s.num_filters == 0 {
                return Err(Error::Config(format!(
                    "block {}: {} filters listed, {} declared",
                    s.key,
                    s.filters.len(),
                    s.num_filters
                )));
            }
            if s.filters.iter().any(|f| f.num_scales() != s.num_scales) {
                return Err(Error::Config(format!("block {}: inconsistent scale count", s.key)));
            }
            if s.weights.is_some() != self.aggregation.is_weighted() {
                return Err(Error::Config(format!(
                    "block {}: aggregation weights do not match method {}",
                    s.key, self.aggregation
                )));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let bank: Self = serde_json::from_str(s)?;
        bank.validate()?;
        Ok(bank)
    }

    pub fn num_params(&self) -> usize {
        self.sets.iter().map(|s| s.num_params()).sum()
    }

    /// Flattened parameters: per set, per filter `(log α, log β…)`, then the
    /// aggregation weights if any.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for s in &self.sets {
            for f in &s.filters {
                out.push(f.log_alpha);
                out.extend_from_slice(&f.log_betas);
            }
            if let Some(w) = s.weights {
                out.extend_from_slice(&w);
            }
        }
        out
    }

    pub fn set_params(&mut self, p: &[f64]) {
        assert_eq!(p.len(), self.num_params(), "filter bank parameter count");
        let mut i = 0;
        for s in &mut self.sets {
            for f in &mut s.filters {
                f.log_alpha = p[i];
                i += 1;
                for lb in &mut f.log_betas {
                    *lb = p[i];
                    i += 1;
                }
            }
            if let Some(w) = &mut s.weights {
                w.copy_from_slice(&p[i..i + 3]);
                i += 3;
            }
        }
    }

    pub fn param_names(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(self.num_params());
        for s in &self.sets {
            for (fi, f) in s.filters.iter().enumerate() {
                out.push(format!("bank.{}.f{fi}.log_alpha", s.key));
                for l in 0..f.num_scales() {
                    out.push(format!("bank.{}.f{fi}.log_beta{l}", s.key));
                }
            }
            if s.weights.is_some() {
                for w in ["sum", "min", "max"] {
                    out.push(format!("bank.{}.w_{w}", s.key));
                }
            }
        }
        out
    }

    fn set_offsets(&self) -> Vec<usize> {
        let mut offsets = Vec::with_capacity(self.sets.len());
        let mut acc = 0;
        for s in &self.sets {
            offsets.push(acc);
            acc += s.num_params();
        }
        offsets
    }
}

/// Dense wavelet transforms `U diag(w(λ)) Uᵀ` (each `N_k × N_k`) of one block,
/// one matrix per filter.
pub fn wavelet_transform_matrices(
    spectrum: &HodgeSpectrum,
    bank: &FilterBank,
    key: BlockKey,
) -> Result<Vec<DMatrix<f64>>> {
    let set = bank
        .set(key)
        .ok_or_else(|| Error::Config(format!("filter bank has no block {key}")))?;
    let dim = spectrum.require(key.k)?;
    let block = key.block(dim);
    set.filters
        .iter()
        .map(|f| {
            let w: Result<Vec<f64>> = block
                .values
                .iter()
                .map(|&l| wavelet_filter_eval(l, f, bank.scaling, bank.wavelet))
                .collect();
            let w = DVector::from_vec(w?);
            let scaled = DMatrix::from_fn(dim.size, block.len(), |i, j| block.vectors[(i, j)] * w[j]);
            Ok(scaled * block.vectors.transpose())
        })
        .collect()
}

/// Hodgelet coefficients `W x` of one signal under each transform.
pub fn hodgelet_coefficients(transforms: &[DMatrix<f64>], x: &DVector<f64>) -> Result<Vec<DVector<f64>>> {
    transforms
        .iter()
        .map(|w| {
            if w.ncols() != x.len() {
                return Err(Error::DimensionMismatch {
                    what: "signal length",
                    expected: w.ncols(),
                    found: x.len(),
                });
            }
            Ok(w * x)
        })
        .collect()
}

/// Pooled representation blocks of one complex, in bank order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HodgeletRepresentation {
    pub blocks: Vec<(BlockKey, Vec<f64>)>,
}

impl HodgeletRepresentation {
    pub fn get(&self, key: BlockKey) -> Option<&[f64]> {
        self.blocks.iter().find(|(k, _)| *k == key).map(|(_, v)| v.as_slice())
    }

    pub fn len(&self) -> usize {
        self.blocks.iter().map(|(_, v)| v.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn concat(&self) -> Vec<f64> {
        self.blocks.iter().flat_map(|(_, v)| v.iter().copied()).collect()
    }
}

/// Representation of one complex under a filter bank.
pub fn hodgelet_representation(
    sc: &SimplicialComplex,
    spectrum: &HodgeSpectrum,
    bank: &FilterBank,
) -> Result<HodgeletRepresentation> {
    let prepared = PreparedComplex::new(sc, spectrum, &bank.keys(), bank.aggregation.needs_basis())?;
    let features = prepared.features(bank)?;
    let mut blocks = Vec::with_capacity(prepared.blocks.len());
    let mut offset = 0;
    for b in &prepared.blocks {
        let len = b.feature_len(bank);
        blocks.push((b.key, features[offset..offset + len].to_vec()));
        offset += len;
    }
    Ok(HodgeletRepresentation { blocks })
}

/// Cached spectral data of one block of one complex.
#[derive(Debug, Clone)]
pub struct PreparedBlock {
    pub key: BlockKey,
    /// Number of `k`-simplices.
    pub size: usize,
    pub values: Vec<f64>,
    /// `Uᵀ X_k`, shape `m × D_k`.
    pub coeffs: DMatrix<f64>,
    /// `Uᵀ 1`.
    pub ones: DVector<f64>,
    /// `U`, kept only for min/max pooling.
    pub basis: Option<DMatrix<f64>>,
}

impl PreparedBlock {
    pub fn attribute_dim(&self) -> usize {
        self.coeffs.ncols()
    }

    fn feature_len(&self, bank: &FilterBank) -> usize {
        bank.set(self.key).map_or(0, |s| s.num_filters) * self.attribute_dim()
    }
}

/// A complex reduced to the spectral data its representation needs.
#[derive(Debug, Clone)]
pub struct PreparedComplex {
    pub blocks: Vec<PreparedBlock>,
}

impl PreparedComplex {
    pub fn new(sc: &SimplicialComplex, spectrum: &HodgeSpectrum, keys: &[BlockKey], keep_basis: bool) -> Result<Self> {
        let blocks = keys
            .iter()
            .map(|&key| {
                let x = sc.attributes(key.k);
                if x.ncols() == 0 {
                    return Err(Error::MissingAttributes { dim: key.k });
                }
                let dim = spectrum.require(key.k)?;
                if dim.size != x.nrows() {
                    return Err(Error::DimensionMismatch {
                        what: "spectrum size",
                        expected: x.nrows(),
                        found: dim.size,
                    });
                }
                let block = key.block(dim);
                let ut = block.vectors.transpose();
                Ok(PreparedBlock {
                    key,
                    size: dim.size,
                    values: block.values.iter().map(|v| v.max(0.0)).collect(),
                    coeffs: &ut * x,
                    ones: ut.column_sum(),
                    basis: keep_basis.then(|| block.vectors.clone().into_owned()),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { blocks })
    }

    pub fn feature_len(&self, bank: &FilterBank) -> usize {
        self.blocks.iter().map(|b| b.feature_len(bank)).sum()
    }

    /// Concatenated representation.
    pub fn features(&self, bank: &FilterBank) -> Result<Vec<f64>> {
        self.forward(bank, None)
    }

    /// Adds `Σ_j upstream_j · ∂feature_j/∂θ` to `grad` (laid out as
    /// [`FilterBank::params`]) and returns the features.
    pub fn features_backward(&self, bank: &FilterBank, upstream: &[f64], grad: &mut [f64]) -> Result<Vec<f64>> {
        self.forward(bank, Some((upstream, grad)))
    }

    fn forward(&self, bank: &FilterBank, mut back: Option<(&[f64], &mut [f64])>) -> Result<Vec<f64>> {
        let offsets = bank.set_offsets();
        let mut out = Vec::with_capacity(self.feature_len(bank));
        for block in &self.blocks {
            let si = bank
                .sets
                .iter()
                .position(|s| s.key == block.key)
                .ok_or_else(|| Error::Config(format!("filter bank has no block {}", block.key)))?;
            let set = &bank.sets[si];
            let mut param_offset = offsets[si];
            let m = block.values.len();
            let d_k = block.attribute_dim();
            for filter in &set.filters {
                let np = filter.num_params();
                let mut w = vec![0.0; m];
                let mut dw = vec![0.0; m * np];
                for i in 0..m {
                    w[i] = filter.eval_with_grad(
                        block.values[i],
                        bank.scaling,
                        bank.wavelet,
                        &mut dw[i * np..(i + 1) * np],
                    );
                }
                for d in 0..d_k {
                    let c = block.coeffs.column(d);
                    let feature_index = out.len();
                    let (value, local) = pool(block, set, bank.aggregation, &w, &dw, np, c.as_slice())?;
                    out.push(value);
                    if let Some((up, grad)) = back.as_mut() {
                        let g = up[feature_index];
                        if g != 0.0 {
                            for (j, l) in local.filter.iter().enumerate() {
                                grad[param_offset + j] += g * l;
                            }
                            if let Some(lw) = local.weights {
                                let wo = offsets[si] + set.num_params() - 3;
                                for j in 0..3 {
                                    grad[wo + j] += g * lw[j];
                                }
                            }
                        }
                    }
                }
                param_offset += np;
            }
        }
        Ok(out)
    }
}

struct LocalGrad {
    filter: Vec<f64>,
    weights: Option<[f64; 3]>,
}

/// Pooled value of one (filter, column) pair and its local gradient.
fn pool(
    block: &PreparedBlock,
    set: &FilterSet,
    method: Aggregation,
    w: &[f64],
    dw: &[f64],
    np: usize,
    c: &[f64],
) -> Result<(f64, LocalGrad)> {
    let m = w.len();
    let mut filter_grad = vec![0.0; np];
    let mut weights_grad = None;
    let value = match method {
        Aggregation::Energy => {
            let mut v = 0.0;
            for i in 0..m {
                let c2 = c[i] * c[i];
                v += w[i] * w[i] * c2;
                for j in 0..np {
                    filter_grad[j] += 2.0 * w[i] * c2 * dw[i * np + j];
                }
            }
            v
        }
        Aggregation::Sum => sum_pool(block, w, dw, np, c, &mut filter_grad, 1.0),
        Aggregation::Min | Aggregation::Max => {
            extreme_pool(block, w, dw, np, c, method == Aggregation::Max, &mut filter_grad, 1.0)?
        }
        Aggregation::Weighted { .. } => {
            let [ws, wn, wx] = set.weights.unwrap_or([1.0, 1.0, 1.0]);
            let s = sum_pool(block, w, dw, np, c, &mut filter_grad, ws);
            let lo = extreme_pool(block, w, dw, np, c, false, &mut filter_grad, wn)?;
            let hi = extreme_pool(block, w, dw, np, c, true, &mut filter_grad, wx)?;
            weights_grad = Some([s, lo, hi]);
            ws * s + wn * lo + wx * hi
        }
    };
    Ok((
        value,
        LocalGrad {
            filter: filter_grad,
            weights: weights_grad,
        },
    ))
}

/// `1ᵀ U (w ⊙ c) = Σ_i s_i w_i c_i`.
fn sum_pool(block: &PreparedBlock, w: &[f64], dw: &[f64], np: usize, c: &[f64], grad: &mut [f64], scale: f64) -> f64 {
    let mut v = 0.0;
    for i in 0..w.len() {
        let sc = block.ones[i] * c[i];
        v += sc * w[i];
        for j in 0..np {
            grad[j] += scale * sc * dw[i * np + j];
        }
    }
    v
}

/// Smallest or largest entry of `U (w ⊙ c)`; gradient flows through the arg-extremum.
#[allow(clippy::too_many_arguments)]
fn extreme_pool(
    block: &PreparedBlock,
    w: &[f64],
    dw: &[f64],
    np: usize,
    c: &[f64],
    largest: bool,
    grad: &mut [f64],
    scale: f64,
) -> Result<f64> {
    if block.size == 0 {
        return Ok(0.0);
    }
    let u = block
        .basis
        .as_ref()
        .ok_or_else(|| Error::Config("min/max pooling needs the spectral basis".into()))?;
    let wc: Vec<f64> = w.iter().zip(c).map(|(a, b)| a * b).collect();
    let mut best = 0;
    let mut best_val = if largest { f64::NEG_INFINITY } else { f64::INFINITY };
    for r in 0..block.size {
        let v: f64 = (0..w.len()).map(|i| u[(r, i)] * wc[i]).sum();
        if (largest && v > best_val) || (!largest && v < best_val) {
            best = r;
            best_val = v;
        }
    }
    for i in 0..w.len() {
        let uc = u[(best, i)] * c[i];
        for j in 0..np {
            grad[j] += scale * uc * dw[i * np + j];
        }
    }
    Ok(best_val)
}
