//! Exact and variational GP models over Hodgelet representations, with
//! gradients of their objectives in every parameter (wavelet filters, kernel
//! hyperparameters, noise, variational state).
//!
//! The variational posterior is whitened: `f = L u` with `K = L Lᵀ` and
//! `q(u) = N(m, S Sᵀ)`, `S` lower triangular with a log-parameterized diagonal.

use std::ops::Range;

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::kernel::{CompositeKernel, KernelConfig};
use super::likelihood::{
    gaussian_expectation, gaussian_expectation_d_log_noise, softmax, softmax_expectation, BernoulliQuadrature,
    Likelihood,
};
use super::optim::{adamw_maximize, OptimConfig, ParamGroups, Trace};
use crate::error::{Error, Result};
use crate::hodgelet::{BlockKey, FilterBank, PreparedComplex};

const LN_2PI: f64 = 1.837_877_066_409_345_5;
const JITTER_START: f64 = 1e-8;
const JITTER_MAX: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Inference {
    /// Exact for Gaussian likelihoods, variational otherwise.
    #[default]
    Auto,
    Exact,
    Variational,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GpConfig {
    pub kernel: KernelConfig,
    pub likelihood: Likelihood,
    pub inference: Inference,
    /// Weight of the KL term in the ELBO.
    pub beta: f64,
    pub quadrature_order: usize,
    pub mc_samples: usize,
    pub prediction_samples: usize,
    /// z-score representation coordinates with training statistics.
    pub standardize: bool,
    pub seed: u64,
}

impl Default for GpConfig {
    fn default() -> Self {
        Self {
            kernel: KernelConfig::default(),
            likelihood: Likelihood::default(),
            inference: Inference::Auto,
            beta: 1.0,
            quadrature_order: 20,
            mc_samples: 64,
            prediction_samples: 512,
            standardize: true,
            seed: 0,
        }
    }
}

impl GpConfig {
    pub fn is_exact(&self) -> bool {
        match self.inference {
            Inference::Exact => true,
            Inference::Variational => false,
            Inference::Auto => !self.likelihood.is_classification(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.is_exact() && self.likelihood.is_classification() {
            return Err(Error::Config("exact inference needs a Gaussian likelihood".into()));
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(Error::Config(format!("β = {} outside (0, 1]", self.beta)));
        }
        if let Likelihood::Gaussian { noise_variance } = self.likelihood {
            if !(noise_variance > 0.0) {
                return Err(Error::Config("noise variance must be positive".into()));
            }
        }
        if self.quadrature_order == 0 || self.mc_samples == 0 || self.prediction_samples == 0 {
            return Err(Error::Config(
                "quadrature order and sample counts must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Column-wise z-scoring with frozen statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
    /// Columns with no spread are centred only.
    pub constant: Vec<bool>,
    pub identity: bool,
}

impl Standardizer {
    pub fn identity(p: usize) -> Self {
        Self {
            mean: vec![0.0; p],
            scale: vec![1.0; p],
            constant: vec![true; p],
            identity: true,
        }
    }

    pub fn fit(r: &DMatrix<f64>) -> Self {
        let n = r.nrows().max(1) as f64;
        let p = r.ncols();
        let mut mean = vec![0.0; p];
        let mut scale = vec![1.0; p];
        let mut constant = vec![false; p];
        for j in 0..p {
            let col = r.column(j);
            let mu = col.sum() / n;
            let var = col.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / n;
            let sd = var.sqrt();
            let magnitude = col.amax();
            mean[j] = mu;
            if magnitude == 0.0 || sd <= 1e-10 * magnitude {
                constant[j] = true;
            } else {
                scale[j] = sd;
            }
        }
        Self {
            mean,
            scale,
            constant,
            identity: false,
        }
    }

    pub fn apply(&self, r: &DMatrix<f64>) -> DMatrix<f64> {
        if self.identity {
            return r.clone();
        }
        DMatrix::from_fn(r.nrows(), r.ncols(), |i, j| (r[(i, j)] - self.mean[j]) / self.scale[j])
    }

    /// Gradient with respect to the raw training features when the
    /// statistics were fitted on those same rows.
    pub fn backward(&self, z: &DMatrix<f64>, z_bar: &DMatrix<f64>) -> DMatrix<f64> {
        if self.identity {
            return z_bar.clone();
        }
        let n = z.nrows() as f64;
        let mut r_bar = z_bar.clone();
        for j in 0..z.ncols() {
            let g = z_bar.column(j);
            let g_mean = g.sum() / n;
            if self.constant[j] {
                for i in 0..z.nrows() {
                    r_bar[(i, j)] = g[i] - g_mean;
                }
                continue;
            }
            let gz_mean = g.iter().zip(z.column(j).iter()).map(|(a, b)| a * b).sum::<f64>() / n;
            for i in 0..z.nrows() {
                r_bar[(i, j)] = (g[i] - g_mean - z[(i, j)] * gz_mean) / self.scale[j];
            }
        }
        r_bar
    }
}

/// Full-rank whitened Gaussian over the training latents, one per latent function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variational {
    pub n: usize,
    pub means: Vec<DVector<f64>>,
    /// Lower-triangular factors with positive diagonals.
    pub factors: Vec<DMatrix<f64>>,
}

impl Variational {
    /// `q(u) = p(u)`.
    pub fn prior(n: usize, latents: usize) -> Self {
        Self {
            n,
            means: vec![DVector::zeros(n); latents],
            factors: vec![DMatrix::identity(n, n); latents],
        }
    }

    pub fn num_params(&self) -> usize {
        self.means.len() * (self.n + self.n * (self.n + 1) / 2)
    }

    fn params_into(&self, out: &mut Vec<f64>) {
        for (m, s) in self.means.iter().zip(&self.factors) {
            out.extend(m.iter());
            for i in 0..self.n {
                for j in 0..i {
                    out.push(s[(i, j)]);
                }
                out.push(s[(i, i)].ln());
            }
        }
    }

    fn set_params(&mut self, p: &[f64]) {
        let mut t = 0;
        for (m, s) in self.means.iter_mut().zip(&mut self.factors) {
            for v in m.iter_mut() {
                *v = p[t];
                t += 1;
            }
            for i in 0..self.n {
                for j in 0..i {
                    s[(i, j)] = p[t];
                    t += 1;
                }
                s[(i, i)] = p[t].exp();
                t += 1;
            }
        }
    }

    fn param_names(&self, out: &mut Vec<String>) {
        for c in 0..self.means.len() {
            for i in 0..self.n {
                out.push(format!("q{c}.mean{i}"));
            }
            for i in 0..self.n {
                for j in 0..i {
                    out.push(format!("q{c}.factor{i}_{j}"));
                }
                out.push(format!("q{c}.log_factor{i}_{i}"));
            }
        }
    }

    /// `KL(q(u) ‖ N(0, I))` for latent `c`.
    pub fn kl(&self, c: usize) -> f64 {
        let (m, s) = (&self.means[c], &self.factors[c]);
        let log_det: f64 = (0..self.n).map(|i| s[(i, i)].ln()).sum();
        0.5 * (s.norm_squared() + m.norm_squared() - self.n as f64) - log_det
    }
}

/// Cholesky of `k + j I` with the smallest `j` from the escalation schedule
/// that succeeds. Returns the lower factor and the jitter used.
pub fn cholesky_jittered(k: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    let n = k.nrows();
    let scale = if n == 0 {
        1.0
    } else {
        (k.trace() / n as f64).abs().max(f64::MIN_POSITIVE)
    };
    let mut rel = JITTER_START;
    loop {
        let jitter = rel * scale;
        let mut kj = k.clone();
        for i in 0..n {
            kj[(i, i)] += jitter;
        }
        if let Some(ch) = Cholesky::new(kj) {
            return Ok((ch.l(), jitter));
        }
        if rel >= JITTER_MAX * (1.0 - 1e-12) {
            return Err(Error::NotPositiveDefinite { jitter });
        }
        rel *= 10.0;
    }
}

fn lower_inverse(l: &DMatrix<f64>) -> DMatrix<f64> {
    let n = l.nrows();
    l.solve_lower_triangular(&DMatrix::identity(n, n))
        .expect("Cholesky factor has a positive diagonal")
}

/// `∂J/∂K` (symmetric) from `∂J/∂L` for `K = L Lᵀ`.
fn cholesky_backward(l: &DMatrix<f64>, l_bar: &DMatrix<f64>) -> DMatrix<f64> {
    let n = l.nrows();
    let mut phi = l.transpose() * l_bar;
    for i in 0..n {
        for j in i + 1..n {
            phi[(i, j)] = 0.0;
        }
        phi[(i, i)] *= 0.5;
    }
    let linv = lower_inverse(l);
    let g = linv.transpose() * phi * &linv;
    (&g + g.transpose()) * 0.5
}

fn tril(m: &mut DMatrix<f64>) {
    for i in 0..m.nrows() {
        for j in i + 1..m.ncols() {
            m[(i, j)] = 0.0;
        }
    }
}

/// A predictive distribution at one test complex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum Predictive {
    Gaussian {
        mean: f64,
        /// Latent variance plus observation noise.
        variance: f64,
        latent_variance: f64,
    },
    Binary {
        probability: f64,
        latent_mean: f64,
        latent_variance: f64,
    },
    Multiclass {
        probabilities: Vec<f64>,
    },
}

impl Predictive {
    /// Mean for regression, predicted class otherwise.
    pub fn point(&self) -> f64 {
        match self {
            Self::Gaussian { mean, .. } => *mean,
            Self::Binary { probability, .. } => {
                if *probability > 0.5 {
                    1.0
                } else {
                    0.0
                }
            }
            Self::Multiclass { probabilities } => probabilities
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .map_or(0.0, |(i, _)| i as f64),
        }
    }
}

#[derive(Debug, Clone)]
struct Posterior {
    standardizer: Standardizer,
    z_train: DMatrix<f64>,
    l: DMatrix<f64>,
    jitter: f64,
    /// `(K + σ²I)⁻¹ y` for exact regression.
    alpha: Option<DVector<f64>>,
}

/// Index ranges of the parameter groups in [`GpModel::params`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamLayout {
    pub bank: Range<usize>,
    pub kernel: Range<usize>,
    pub likelihood: Range<usize>,
    pub variational: Range<usize>,
}

impl ParamLayout {
    pub fn mask(&self, groups: &ParamGroups) -> Vec<bool> {
        let mut mask = vec![false; self.variational.end];
        for (range, on) in [
            (&self.bank, groups.bank),
            (&self.kernel, groups.kernel),
            (&self.likelihood, groups.likelihood),
            (&self.variational, groups.variational),
        ] {
            for i in range.clone() {
                mask[i] = on;
            }
        }
        mask
    }
}

#[derive(Debug, Clone)]
pub struct GpModel {
    pub config: GpConfig,
    pub bank: FilterBank,
    pub kernel: CompositeKernel,
    pub log_noise: f64,
    pub variational: Option<Variational>,
    posterior: Option<Posterior>,
}

impl GpModel {
    /// A model whose kernel has one component per `(key, feature length)` block.
    pub fn new(config: GpConfig, bank: FilterBank, blocks: &[(BlockKey, usize)]) -> Result<Self> {
        config.validate()?;
        bank.validate()?;
        let kernel = CompositeKernel::new(&config.kernel, blocks);
        let log_noise = match config.likelihood {
            Likelihood::Gaussian { noise_variance } => noise_variance.ln(),
            _ => 0.0,
        };
        Ok(Self {
            config,
            bank,
            kernel,
            log_noise,
            variational: None,
            posterior: None,
        })
    }

    /// Kernel layout taken from the blocks of a prepared complex.
    pub fn for_inputs(config: GpConfig, bank: FilterBank, sample: &PreparedComplex) -> Result<Self> {
        let blocks = CompositeKernel::blocks_of(&bank, sample);
        Self::new(config, bank, &blocks)
    }

    pub(crate) fn from_parts(
        config: GpConfig,
        bank: FilterBank,
        kernel: CompositeKernel,
        log_noise: f64,
        variational: Option<Variational>,
    ) -> Self {
        Self {
            config,
            bank,
            kernel,
            log_noise,
            variational,
            posterior: None,
        }
    }

    pub fn noise_variance(&self) -> f64 {
        self.log_noise.exp()
    }

    pub fn is_fitted(&self) -> bool {
        self.posterior.is_some()
    }

    /// Jitter added to the diagonal at the last conditioning.
    pub fn jitter(&self) -> Option<f64> {
        self.posterior.as_ref().map(|p| p.jitter)
    }

    fn has_noise_param(&self) -> bool {
        matches!(self.config.likelihood, Likelihood::Gaussian { .. })
    }

    pub fn layout(&self) -> ParamLayout {
        let nb = self.bank.num_params();
        let nk = self.kernel.num_params();
        let nl = usize::from(self.has_noise_param());
        let nv = self.variational.as_ref().map_or(0, |v| v.num_params());
        ParamLayout {
            bank: 0..nb,
            kernel: nb..nb + nk,
            likelihood: nb + nk..nb + nk + nl,
            variational: nb + nk + nl..nb + nk + nl + nv,
        }
    }

    pub fn params(&self) -> Vec<f64> {
        let mut p = self.bank.params();
        p.extend(self.kernel.params());
        if self.has_noise_param() {
            p.push(self.log_noise);
        }
        if let Some(v) = &self.variational {
            v.params_into(&mut p);
        }
        p
    }

    /// Replaces all parameters and drops any fitted posterior.
    pub fn set_params(&mut self, p: &[f64]) {
        let lay = self.layout();
        assert_eq!(p.len(), lay.variational.end, "model parameter count");
        self.bank.set_params(&p[lay.bank]);
        self.kernel.set_params(&p[lay.kernel]);
        if self.has_noise_param() {
            self.log_noise = p[lay.likelihood.start];
        }
        if let Some(v) = &mut self.variational {
            v.set_params(&p[lay.variational]);
        }
        self.posterior = None;
    }

    pub fn param_names(&self) -> Vec<String> {
        let mut names = self.bank.param_names();
        names.extend(self.kernel.param_names());
        if self.has_noise_param() {
            names.push("likelihood.log_noise_variance".into());
        }
        if let Some(v) = &self.variational {
            v.param_names(&mut names);
        }
        names
    }

    fn check_data(&self, x: &[PreparedComplex], y: &[f64]) -> Result<()> {
        if x.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch {
                what: "number of targets",
                expected: x.len(),
                found: y.len(),
            });
        }
        self.config.likelihood.check_targets(y)
    }

    /// Sets `q = p` unless a variational state of the right size exists.
    pub fn reset_variational(&mut self, n: usize) {
        if self.config.is_exact() {
            self.variational = None;
        } else if self.variational.as_ref().is_none_or(|v| v.n != n) {
            self.variational = Some(Variational::prior(n, self.config.likelihood.latent_count()));
        }
        self.posterior = None;
    }

    /// Raw representations, one row per complex.
    pub fn features(&self, x: &[PreparedComplex]) -> Result<DMatrix<f64>> {
        let p = self.kernel.input_dim();
        let mut r = DMatrix::zeros(x.len(), p);
        for (i, c) in x.iter().enumerate() {
            let f = c.features(&self.bank)?;
            if f.len() != p {
                return Err(Error::DimensionMismatch {
                    what: "representation length",
                    expected: p,
                    found: f.len(),
                });
            }
            for (j, v) in f.into_iter().enumerate() {
                r[(i, j)] = v;
            }
        }
        Ok(r)
    }

    fn standardizer(&self, r: &DMatrix<f64>) -> Standardizer {
        if self.config.standardize {
            Standardizer::fit(r)
        } else {
            Standardizer::identity(r.ncols())
        }
    }

    /// Pushes `∂J/∂Z` back through standardization, kernel inputs and filters
    /// into `grad` (laid out as [`params`](Self::params)).
    fn backward_inputs(
        &self,
        x: &[PreparedComplex],
        st: &Standardizer,
        z: &DMatrix<f64>,
        k_bar: &DMatrix<f64>,
        grad: &mut [f64],
    ) -> Result<()> {
        let lay = self.layout();
        let (theta_bar, z_bar) = self.kernel.gram_backward(z, k_bar);
        grad[lay.kernel].copy_from_slice(&theta_bar);
        let r_bar = st.backward(z, &z_bar);
        let bank_grad = &mut grad[lay.bank];
        for (i, c) in x.iter().enumerate() {
            let up: Vec<f64> = r_bar.row(i).iter().copied().collect();
            c.features_backward(&self.bank, &up, bank_grad)?;
        }
        Ok(())
    }

    /// Log marginal likelihood of an exact Gaussian model and its gradient.
    pub fn log_marginal_likelihood(&self, x: &[PreparedComplex], y: &[f64]) -> Result<(f64, Vec<f64>)> {
        if !self.config.is_exact() {
            return Err(Error::Config("log marginal likelihood needs exact inference".into()));
        }
        self.check_data(x, y)?;
        let n = x.len();
        let r = self.features(x)?;
        let st = self.standardizer(&r);
        let z = st.apply(&r);
        let mut ky = self.kernel.gram(&z, &z);
        let noise = self.noise_variance();
        for i in 0..n {
            ky[(i, i)] += noise;
        }
        let (l, _) = cholesky_jittered(&ky)?;
        let yv = DVector::from_column_slice(y);
        let linv = lower_inverse(&l);
        let alpha = linv.transpose() * (&linv * &yv);
        let log_det: f64 = 2.0 * (0..n).map(|i| l[(i, i)].ln()).sum::<f64>();
        let value = -0.5 * yv.dot(&alpha) - 0.5 * log_det - 0.5 * n as f64 * LN_2PI;

        let kinv = linv.transpose() * &linv;
        let k_bar = (&alpha * alpha.transpose() - kinv) * 0.5;
        let mut grad = vec![0.0; self.layout().variational.end];
        grad[self.layout().likelihood.start] = noise * k_bar.trace();
        self.backward_inputs(x, &st, &z, &k_bar, &mut grad)?;
        Ok((value, grad))
    }

    fn softmax_noise(&self, n: usize) -> Vec<Vec<Vec<f64>>> {
        let c = self.config.likelihood.latent_count();
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        (0..n)
            .map(|_| {
                (0..self.config.mc_samples)
                    .map(|_| (0..c).map(|_| StandardNormal.sample(&mut rng)).collect())
                    .collect()
            })
            .collect()
    }

    /// ELBO `Σ E_q[log p(y|f)] − β KL(q ‖ p)` and its gradient.
    pub fn elbo(&self, x: &[PreparedComplex], y: &[f64]) -> Result<(f64, Vec<f64>)> {
        let q = self
            .variational
            .as_ref()
            .filter(|v| v.n == x.len())
            .ok_or_else(|| Error::Config("variational state missing or sized for other data".into()))?;
        self.check_data(x, y)?;
        let n = x.len();
        let latents = q.means.len();
        let beta = self.config.beta;
        let r = self.features(x)?;
        let st = self.standardizer(&r);
        let z = st.apply(&r);
        let k = self.kernel.gram(&z, &z);
        let (l, _) = cholesky_jittered(&k)?;

        let mus: Vec<DVector<f64>> = q.means.iter().map(|m| &l * m).collect();
        let as_: Vec<DMatrix<f64>> = q.factors.iter().map(|s| &l * s).collect();
        let vars: Vec<Vec<f64>> = as_
            .iter()
            .map(|a| (0..n).map(|i| a.row(i).norm_squared()).collect())
            .collect();

        let mut g1 = vec![DVector::zeros(n); latents];
        let mut g2 = vec![DVector::zeros(n); latents];
        let mut value = 0.0;
        let mut noise_grad = 0.0;
        match self.config.likelihood {
            Likelihood::Gaussian { .. } => {
                let noise = self.noise_variance();
                for i in 0..n {
                    let e = gaussian_expectation(y[i], mus[0][i], vars[0][i], noise);
                    value += e.value;
                    g1[0][i] = e.d_mean;
                    g2[0][i] = e.d_var;
                    noise_grad += gaussian_expectation_d_log_noise(y[i], mus[0][i], vars[0][i], noise);
                }
            }
            Likelihood::Bernoulli => {
                let quad = BernoulliQuadrature::new(self.config.quadrature_order);
                for i in 0..n {
                    let e = quad.expectation(y[i], mus[0][i], vars[0][i]);
                    value += e.value;
                    g1[0][i] = e.d_mean;
                    g2[0][i] = e.d_var;
                }
            }
            Likelihood::Softmax { .. } => {
                let eps = self.softmax_noise(n);
                for i in 0..n {
                    let mean: Vec<f64> = mus.iter().map(|m| m[i]).collect();
                    let var: Vec<f64> = vars.iter().map(|v| v[i]).collect();
                    let (v, dm, dv) = softmax_expectation(y[i] as usize, &mean, &var, &eps[i]);
                    value += v;
                    for c in 0..latents {
                        g1[c][i] = dm[c];
                        g2[c][i] = dv[c];
                    }
                }
            }
        }
        value -= beta * (0..latents).map(|c| q.kl(c)).sum::<f64>();

        let lay = self.layout();
        let mut grad = vec![0.0; lay.variational.end];
        if self.has_noise_param() {
            grad[lay.likelihood.start] = noise_grad;
        }
        let mut l_bar = DMatrix::zeros(n, n);
        let mut t = lay.variational.start;
        for c in 0..latents {
            let (m, s, a) = (&q.means[c], &q.factors[c], &as_[c]);
            // 2 D A
            let da = DMatrix::from_fn(n, n, |i, j| 2.0 * g2[c][i] * a[(i, j)]);
            l_bar += &g1[c] * m.transpose() + &da * s.transpose();
            let m_bar = l.transpose() * &g1[c] - m * beta;
            let s_bar = l.transpose() * &da;
            for v in m_bar.iter() {
                grad[t] = *v;
                t += 1;
            }
            for i in 0..n {
                for j in 0..i {
                    grad[t] = s_bar[(i, j)] - beta * s[(i, j)];
                    t += 1;
                }
                let sii = s[(i, i)];
                grad[t] = s_bar[(i, i)] * sii - beta * (sii * sii - 1.0);
                t += 1;
            }
        }
        tril(&mut l_bar);
        let k_bar = cholesky_backward(&l, &l_bar);
        self.backward_inputs(x, &st, &z, &k_bar, &mut grad)?;
        Ok((value, grad))
    }

    /// The training objective: LML for exact models, ELBO otherwise.
    pub fn objective(&self, x: &[PreparedComplex], y: &[f64]) -> Result<(f64, Vec<f64>)> {
        if self.config.is_exact() {
            self.log_marginal_likelihood(x, y)
        } else {
            self.elbo(x, y)
        }
    }

    /// Optimizes the enabled parameter groups, then conditions on the data.
    pub fn fit(&mut self, x: &[PreparedComplex], y: &[f64], opt: &OptimConfig) -> Result<Trace> {
        self.check_data(x, y)?;
        self.reset_variational(x.len());
        let mask = self.layout().mask(&opt.train);
        let names = self.param_names();
        let mut scratch = self.clone();
        let (best, trace) = adamw_maximize(&self.params(), &mask, &names, opt, |p| {
            scratch.set_params(p);
            scratch.objective(x, y)
        })?;
        self.set_params(&best);
        self.condition(x, y)?;
        Ok(trace)
    }

    pub fn fit_regression(&mut self, x: &[PreparedComplex], y: &[f64], opt: &OptimConfig) -> Result<Trace> {
        if !self.config.is_exact() {
            return Err(Error::Config("fit_regression needs exact Gaussian inference".into()));
        }
        self.fit(x, y, opt)
    }

    pub fn fit_variational(&mut self, x: &[PreparedComplex], y: &[f64], opt: &OptimConfig) -> Result<Trace> {
        if self.config.is_exact() {
            return Err(Error::Config("fit_variational needs variational inference".into()));
        }
        self.fit(x, y, opt)
    }

    /// Caches the factorizations needed for prediction at the current parameters.
    pub fn condition(&mut self, x: &[PreparedComplex], y: &[f64]) -> Result<()> {
        self.check_data(x, y)?;
        if !self.config.is_exact() && self.variational.as_ref().is_none_or(|v| v.n != x.len()) {
            return Err(Error::Config(
                "variational state missing or sized for other data".into(),
            ));
        }
        let r = self.features(x)?;
        let standardizer = self.standardizer(&r);
        let z_train = standardizer.apply(&r);
        let mut k = self.kernel.gram(&z_train, &z_train);
        let exact = self.config.is_exact();
        if exact {
            for i in 0..x.len() {
                k[(i, i)] += self.noise_variance();
            }
        }
        let (l, jitter) = cholesky_jittered(&k)?;
        let alpha = exact.then(|| {
            let w = l
                .solve_lower_triangular(&DVector::from_column_slice(y))
                .expect("positive diagonal");
            l.tr_solve_lower_triangular(&w).expect("positive diagonal")
        });
        self.posterior = Some(Posterior {
            standardizer,
            z_train,
            l,
            jitter,
            alpha,
        });
        Ok(())
    }

    /// Predictive distributions at test complexes.
    pub fn predict(&self, x: &[PreparedComplex]) -> Result<Vec<Predictive>> {
        let post = self.posterior.as_ref().ok_or(Error::NotFitted)?;
        let zs = post.standardizer.apply(&self.features(x)?);
        let kx = self.kernel.gram(&zs, &post.z_train);
        let kss = self.kernel.diag(&zs);
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed ^ 0x9e37_79b9_7f4a_7c15);
        let quad = BernoulliQuadrature::new(self.config.quadrature_order);
        let mut out = Vec::with_capacity(x.len());
        for i in 0..x.len() {
            let ks = kx.row(i).transpose();
            let w = post.l.solve_lower_triangular(&ks).expect("positive diagonal");
            let prior_left = (kss[i] - w.norm_squared()).max(0.0);
            if let Some(alpha) = &post.alpha {
                let mean = ks.dot(alpha);
                out.push(Predictive::Gaussian {
                    mean,
                    variance: prior_left + self.noise_variance(),
                    latent_variance: prior_left,
                });
                continue;
            }
            let q = self.variational.as_ref().ok_or(Error::NotFitted)?;
            let moments: Vec<(f64, f64)> = q
                .means
                .iter()
                .zip(&q.factors)
                .map(|(m, s)| (w.dot(m), prior_left + (s.transpose() * &w).norm_squared()))
                .collect();
            out.push(match self.config.likelihood {
                Likelihood::Gaussian { .. } => Predictive::Gaussian {
                    mean: moments[0].0,
                    variance: moments[0].1 + self.noise_variance(),
                    latent_variance: moments[0].1,
                },
                Likelihood::Bernoulli => Predictive::Binary {
                    probability: quad.probability(moments[0].0, moments[0].1),
                    latent_mean: moments[0].0,
                    latent_variance: moments[0].1,
                },
                Likelihood::Softmax { .. } => {
                    let c = moments.len();
                    let mut probabilities = vec![0.0; c];
                    let mut f = vec![0.0; c];
                    for _ in 0..self.config.prediction_samples {
                        for (j, (mu, var)) in moments.iter().enumerate() {
                            let e: f64 = StandardNormal.sample(&mut rng);
                            f[j] = mu + var.sqrt() * e;
                        }
                        for (p, s) in probabilities.iter_mut().zip(softmax(&f)) {
                            *p += s;
                        }
                    }
                    let total: f64 = probabilities.iter().sum();
                    probabilities.iter_mut().for_each(|p| *p /= total);
                    Predictive::Multiclass { probabilities }
                }
            });
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex::SimplicialComplex;
    use crate::gp::kernel::{KernelFamily, KernelMode};
    use crate::hodge::HodgeSpectrum;
    use crate::hodgelet::{Aggregation, BankConfig};

    fn toy_inputs(n: usize, seed: u64) -> Vec<PreparedComplex> {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let sc = SimplicialComplex::try_new(4, vec![[0, 1], [1, 2], [0, 2], [2, 3], [1, 3]], vec![[0, 1, 2]])
                    .unwrap()
                    .with_attributes(0, DMatrix::from_fn(4, 1, |_, _| rng.random_range(-1.0..1.0)))
                    .with_attributes(1, DMatrix::from_fn(5, 1, |_, _| rng.random_range(-1.0..1.0)));
                let spec = HodgeSpectrum::compute(&sc.incidence_matrices().unwrap()).unwrap();
                PreparedComplex::new(&sc, &spec, &BlockKey::for_dims(&[0, 1], true), true).unwrap()
            })
            .collect()
    }

    fn model(config: GpConfig, inputs: &[PreparedComplex], aggregation: Aggregation) -> GpModel {
        let keys = BlockKey::for_dims(&[0, 1], true);
        let bank = FilterBank::init(
            &keys,
            &BankConfig {
                num_filters: 2,
                num_scales: 2,
                aggregation,
                ..Default::default()
            },
            &mut ChaCha8Rng::seed_from_u64(11),
        )
        .unwrap();
        GpModel::for_inputs(config, bank, &inputs[0]).unwrap()
    }

    fn check_gradient(m: &GpModel, x: &[PreparedComplex], y: &[f64], tol: f64) {
        let (_, grad) = m.objective(x, y).unwrap();
        let base = m.params();
        let names = m.param_names();
        let h = 1e-5;
        let mut probe = m.clone();
        for j in 0..base.len() {
            let mut p = base.clone();
            p[j] += h;
            probe.set_params(&p);
            let up = probe.objective(x, y).unwrap().0;
            p[j] -= 2.0 * h;
            probe.set_params(&p);
            let down = probe.objective(x, y).unwrap().0;
            let fd = (up - down) / (2.0 * h);
            let err = (fd - grad[j]).abs() / fd.abs().max(grad[j].abs()).max(1e-3);
            assert!(err < tol, "{}: fd {fd} analytic {}", names[j], grad[j]);
        }
    }

    #[test]
    fn standardizer_backward_matches_finite_differences() {
        let r = DMatrix::from_fn(5, 3, |i, j| {
            if j == 2 {
                4.0
            } else {
                ((i * 3 + j) as f64 * 0.9).sin() * 3.0
            }
        });
        let w = DMatrix::from_fn(5, 3, |i, j| ((i + j * 5) as f64).cos());
        let obj = |r: &DMatrix<f64>| {
            let s = Standardizer::fit(r);
            s.apply(r).component_mul(&w).sum()
        };
        let st = Standardizer::fit(&r);
        assert!(st.constant[2] && !st.constant[0]);
        let rb = st.backward(&st.apply(&r), &w);
        let h = 1e-6;
        for i in 0..5 {
            for j in 0..2 {
                let mut rp = r.clone();
                rp[(i, j)] += h;
                let mut rm = r.clone();
                rm[(i, j)] -= h;
                let fd = (obj(&rp) - obj(&rm)) / (2.0 * h);
                assert!((fd - rb[(i, j)]).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn cholesky_backward_matches_finite_differences() {
        let a = DMatrix::from_fn(4, 4, |i, j| ((i * 4 + j) as f64 * 0.7).sin());
        let k = &a * a.transpose() + DMatrix::identity(4, 4);
        let w = DMatrix::from_fn(4, 4, |i, j| if j <= i { ((i + 2 * j) as f64).cos() } else { 0.0 });
        let obj = |k: &DMatrix<f64>| Cholesky::new(k.clone()).unwrap().l().component_mul(&w).sum();
        let l = Cholesky::new(k.clone()).unwrap().l();
        let kb = cholesky_backward(&l, &w);
        let h = 1e-6;
        for i in 0..4 {
            for j in 0..4 {
                // symmetric perturbation
                let mut kp = k.clone();
                kp[(i, j)] += h;
                if i != j {
                    kp[(j, i)] += h;
                }
                let mut km = k.clone();
                km[(i, j)] -= h;
                if i != j {
                    km[(j, i)] -= h;
                }
                let fd = (obj(&kp) - obj(&km)) / (2.0 * h);
                let an = if i == j { kb[(i, i)] } else { 2.0 * kb[(i, j)] };
                assert!((fd - an).abs() < 1e-7, "({i},{j}) {fd} vs {an}");
            }
        }
    }

    #[test]
    fn regression_gradients_match_finite_differences() {
        let x = toy_inputs(4, 1);
        let y = [0.3, -1.2, 0.8, 0.1];
        for (mode, family, agg) in [
            (KernelMode::Additive, KernelFamily::Rbf, Aggregation::Energy),
            (KernelMode::Product, KernelFamily::Matern52, Aggregation::Sum),
        ] {
            let cfg = GpConfig {
                kernel: KernelConfig {
                    mode,
                    family,
                    ..Default::default()
                },
                ..Default::default()
            };
            let m = model(cfg, &x, agg);
            check_gradient(&m, &x, &y, 1e-4);
        }
    }

    #[test]
    fn variational_gradients_match_finite_differences() {
        let x = toy_inputs(4, 2);
        for (likelihood, y) in [
            (Likelihood::Bernoulli, vec![0.0, 1.0, 1.0, 0.0]),
            (Likelihood::Softmax { classes: 3 }, vec![0.0, 2.0, 1.0, 2.0]),
            (Likelihood::Gaussian { noise_variance: 0.3 }, vec![0.5, -0.2, 1.0, 0.0]),
        ] {
            let cfg = GpConfig {
                likelihood,
                inference: Inference::Variational,
                beta: 0.1,
                ..Default::default()
            };
            let mut m = model(cfg, &x, Aggregation::Energy);
            m.reset_variational(x.len());
            // move q away from the prior
            let mut p = m.params();
            let start = m.layout().variational.start;
            for (i, v) in p[start..].iter_mut().enumerate() {
                *v += 0.3 * ((i as f64) * 1.3).sin();
            }
            m.set_params(&p);
            check_gradient(&m, &x, &y, 1e-4);
        }
    }

    #[test]
    fn kl_vanishes_at_the_prior() {
        let q = Variational::prior(5, 2);
        assert_eq!(q.kl(0), 0.0);
        assert_eq!(q.kl(1), 0.0);
    }

    #[test]
    fn regression_matches_explicit_inverse() {
        let x = toy_inputs(5, 3);
        let y = [0.3, -1.2, 0.8, 0.1, 0.5];
        let mut m = model(GpConfig::default(), &x, Aggregation::Energy);
        m.condition(&x, &y).unwrap();
        let test = toy_inputs(3, 4);
        let pred = m.predict(&test).unwrap();

        let st = Standardizer::fit(&m.features(&x).unwrap());
        let z = st.apply(&m.features(&x).unwrap());
        let zs = st.apply(&m.features(&test).unwrap());
        let mut ky = m.kernel.gram(&z, &z);
        for i in 0..5 {
            ky[(i, i)] += m.noise_variance() + m.jitter().unwrap();
        }
        let inv = ky.try_inverse().unwrap();
        let kx = m.kernel.gram(&zs, &z);
        let yv = DVector::from_column_slice(&y);
        for (i, p) in pred.iter().enumerate() {
            let ks = kx.row(i).transpose();
            let mean = ks.dot(&(&inv * &yv));
            let var = m.kernel.diag(&zs)[i] - ks.dot(&(&inv * &ks)) + m.noise_variance();
            let Predictive::Gaussian {
                mean: pm, variance: pv, ..
            } = p
            else {
                panic!()
            };
            assert!((pm - mean).abs() < 1e-8 && (pv - var).abs() < 1e-8);
        }
    }

    #[test]
    fn single_point_interpolation_limit() {
        let x = toy_inputs(1, 5);
        let cfg = GpConfig {
            likelihood: Likelihood::Gaussian { noise_variance: 1e-9 },
            ..Default::default()
        };
        let mut m = model(cfg, &x, Aggregation::Energy);
        m.condition(&x, &[2.5]).unwrap();
        let p = &m.predict(&x).unwrap()[0];
        assert!((p.point() - 2.5).abs() < 1e-6);
    }

    #[test]
    fn unfitted_model_refuses_to_predict() {
        let x = toy_inputs(2, 6);
        let m = model(GpConfig::default(), &x, Aggregation::Energy);
        assert!(matches!(m.predict(&x), Err(Error::NotFitted)));
    }

    #[test]
    fn separable_binary_problem_is_learned() {
        let x = toy_inputs(2, 7);
        let cfg = GpConfig {
            likelihood: Likelihood::Bernoulli,
            ..Default::default()
        };
        let mut m = model(cfg, &x, Aggregation::Energy);
        let opt = OptimConfig {
            iterations: 200,
            ..Default::default()
        };
        m.fit(&x, &[0.0, 1.0], &opt).unwrap();
        let pred = m.predict(&x).unwrap();
        assert_eq!(pred[0].point(), 0.0);
        assert_eq!(pred[1].point(), 1.0);
    }

    #[test]
    fn multiclass_probabilities_are_normalized() {
        let x = toy_inputs(6, 8);
        let cfg = GpConfig {
            likelihood: Likelihood::Softmax { classes: 3 },
            ..Default::default()
        };
        let mut m = model(cfg, &x, Aggregation::Energy);
        let opt = OptimConfig {
            iterations: 20,
            ..Default::default()
        };
        m.fit(&x, &[0.0, 1.0, 2.0, 0.0, 1.0, 2.0], &opt).unwrap();
        for p in m.predict(&toy_inputs(4, 9)).unwrap() {
            let Predictive::Multiclass { probabilities } = p else {
                panic!()
            };
            assert!((probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(probabilities.iter().all(|p| (0.0..=1.0).contains(p)));
        }
    }
}
