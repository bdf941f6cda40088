//! Stationary base kernels and the additive / product composition over
//! representation blocks.

use std::ops::Range;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hodgelet::{BlockKey, FilterBank, PreparedComplex};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    #[default]
    Rbf,
    Matern32,
    Matern52,
}

impl KernelFamily {
    /// Unit-variance profile `φ(r²)` and its derivative `dφ/d(r²)`.
    pub fn profile(self, r2: f64) -> (f64, f64) {
        match self {
            Self::Rbf => {
                let k = (-0.5 * r2).exp();
                (k, -0.5 * k)
            }
            Self::Matern32 => {
                let s = (3.0 * r2).sqrt();
                let e = (-s).exp();
                ((1.0 + s) * e, -1.5 * e)
            }
            Self::Matern52 => {
                let s = (5.0 * r2).sqrt();
                let e = (-s).exp();
                ((1.0 + s + 5.0 * r2 / 3.0) * e, -(5.0 / 6.0) * (1.0 + s) * e)
            }
        }
    }
}

/// A stationary kernel `v·φ(‖(x − x')/ℓ‖²)` with log-space lengthscales
/// (one shared or one per input coordinate) and log output variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseKernel {
    pub family: KernelFamily,
    pub log_lengthscales: Vec<f64>,
    pub log_variance: f64,
}

impl BaseKernel {
    pub fn new(family: KernelFamily, lengthscale: f64, variance: f64) -> Self {
        Self {
            family,
            log_lengthscales: vec![lengthscale.ln()],
            log_variance: variance.ln(),
        }
    }

    pub fn ard(family: KernelFamily, lengthscales: &[f64], variance: f64) -> Self {
        Self {
            family,
            log_lengthscales: lengthscales.iter().map(|l| l.ln()).collect(),
            log_variance: variance.ln(),
        }
    }

    pub fn variance(&self) -> f64 {
        self.log_variance.exp()
    }

    pub fn num_params(&self) -> usize {
        self.log_lengthscales.len() + 1
    }

    fn inv_sq_lengthscale(&self, j: usize) -> f64 {
        let l = if self.log_lengthscales.len() == 1 {
            self.log_lengthscales[0]
        } else {
            self.log_lengthscales[j]
        };
        (-2.0 * l).exp()
    }

    fn scaled_sq_dist(&self, x: &[f64], y: &[f64]) -> f64 {
        x.iter()
            .zip(y)
            .enumerate()
            .map(|(j, (a, b))| (a - b) * (a - b) * self.inv_sq_lengthscale(j))
            .sum()
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        self.variance() * self.family.profile(self.scaled_sq_dist(x, y)).0
    }
}

/// `κ(r, r')` for one base kernel.
pub fn base_kernel(r: &[f64], r2: &[f64], kernel: &BaseKernel) -> Result<f64> {
    if r.len() != r2.len() {
        return Err(Error::DimensionMismatch {
            what: "kernel input length",
            expected: r.len(),
            found: r2.len(),
        });
    }
    if kernel.log_lengthscales.len() != 1 && kernel.log_lengthscales.len() != r.len() {
        return Err(Error::DimensionMismatch {
            what: "ARD lengthscale count",
            expected: r.len(),
            found: kernel.log_lengthscales.len(),
        });
    }
    Ok(kernel.eval(r, r2))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelMode {
    /// `Σ_k Σ_• κ_k•`
    #[default]
    Additive,
    /// `Π_k Σ_• κ_k•`
    Product,
}

/// How base kernels are created for a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KernelConfig {
    pub mode: KernelMode,
    pub family: KernelFamily,
    pub ard: bool,
    pub lengthscale: f64,
    pub variance: f64,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self {
            mode: KernelMode::Additive,
            family: KernelFamily::Rbf,
            ard: false,
            lengthscale: 1.0,
            variance: 1.0,
        }
    }
}

/// A base kernel acting on the feature range of one representation block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentKernel {
    pub key: BlockKey,
    pub range: Range<usize>,
    pub kernel: BaseKernel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositeKernel {
    pub mode: KernelMode,
    pub components: Vec<ComponentKernel>,
}

impl CompositeKernel {
    /// One base kernel per `(key, feature length)` block, in order.
    pub fn new(cfg: &KernelConfig, blocks: &[(BlockKey, usize)]) -> Self {
        let mut offset = 0;
        let components = blocks
            .iter()
            .map(|&(key, len)| {
                let range = offset..offset + len;
                offset += len;
                let kernel = if cfg.ard {
                    BaseKernel::ard(cfg.family, &vec![cfg.lengthscale; len.max(1)], cfg.variance)
                } else {
                    BaseKernel::new(cfg.family, cfg.lengthscale, cfg.variance)
                };
                ComponentKernel { key, range, kernel }
            })
            .collect();
        Self {
            mode: cfg.mode,
            components,
        }
    }

    /// Feature layout of a bank applied to a prepared complex.
    pub fn blocks_of(bank: &FilterBank, x: &PreparedComplex) -> Vec<(BlockKey, usize)> {
        x.blocks
            .iter()
            .map(|b| (b.key, bank.set(b.key).map_or(0, |s| s.num_filters) * b.attribute_dim()))
            .collect()
    }

    pub fn input_dim(&self) -> usize {
        self.components.last().map_or(0, |c| c.range.end)
    }

    pub fn num_params(&self) -> usize {
        self.components.iter().map(|c| c.kernel.num_params()).sum()
    }

    /// Per component `(log ℓ…, log v)`.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for c in &self.components {
            out.extend_from_slice(&c.kernel.log_lengthscales);
            out.push(c.kernel.log_variance);
        }
        out
    }

    pub fn set_params(&mut self, p: &[f64]) {
        assert_eq!(p.len(), self.num_params(), "kernel parameter count");
        let mut i = 0;
        for c in &mut self.components {
            let n = c.kernel.log_lengthscales.len();
            c.kernel.log_lengthscales.copy_from_slice(&p[i..i + n]);
            c.kernel.log_variance = p[i + n];
            i += n + 1;
        }
    }

    pub fn param_names(&self) -> Vec<String> {
        let mut out = Vec::new();
        for c in &self.components {
            for j in 0..c.kernel.log_lengthscales.len() {
                out.push(format!("kernel.{}.log_lengthscale{j}", c.key));
            }
            out.push(format!("kernel.{}.log_variance", c.key));
        }
        out
    }

    /// Indices of components grouped by simplex dimension, in order of first appearance.
    fn groups(&self) -> Vec<Vec<usize>> {
        let mut groups: Vec<(usize, Vec<usize>)> = Vec::new();
        for (i, c) in self.components.iter().enumerate() {
            match groups.iter_mut().find(|(k, _)| *k == c.key.k) {
                Some((_, g)) => g.push(i),
                None => groups.push((c.key.k, vec![i])),
            }
        }
        groups.into_iter().map(|(_, g)| g).collect()
    }

    /// Kernel value between two feature vectors.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        let values: Vec<f64> = self
            .components
            .iter()
            .map(|c| c.kernel.eval(&x[c.range.clone()], &y[c.range.clone()]))
            .collect();
        self.combine(&values)
    }

    fn combine(&self, values: &[f64]) -> f64 {
        match self.mode {
            KernelMode::Additive => values.iter().sum(),
            KernelMode::Product => self
                .groups()
                .iter()
                .map(|g| g.iter().map(|&i| values[i]).sum::<f64>())
                .product(),
        }
    }

    fn component_grams(&self, a: &DMatrix<f64>, b: &DMatrix<f64>) -> Vec<DMatrix<f64>> {
        self.components
            .iter()
            .map(|c| {
                DMatrix::from_fn(a.nrows(), b.nrows(), |i, j| {
                    let (x, y) = (a.row(i), b.row(j));
                    let xs: Vec<f64> = c.range.clone().map(|t| x[t]).collect();
                    let ys: Vec<f64> = c.range.clone().map(|t| y[t]).collect();
                    c.kernel.eval(&xs, &ys)
                })
            })
            .collect()
    }

    fn combine_grams(&self, grams: &[DMatrix<f64>], shape: (usize, usize)) -> DMatrix<f64> {
        match self.mode {
            KernelMode::Additive => grams.iter().fold(DMatrix::zeros(shape.0, shape.1), |acc, g| acc + g),
            KernelMode::Product => self
                .groups()
                .iter()
                .fold(DMatrix::from_element(shape.0, shape.1, 1.0), |acc, g| {
                    let s = g.iter().fold(DMatrix::zeros(shape.0, shape.1), |s, &i| s + &grams[i]);
                    acc.component_mul(&s)
                }),
        }
    }

    /// Cross-covariance between the rows of `a` and the rows of `b`.
    pub fn gram(&self, a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
        let grams = self.component_grams(a, b);
        self.combine_grams(&grams, (a.nrows(), b.nrows()))
    }

    /// Diagonal `κ(x_i, x_i)`.
    pub fn diag(&self, a: &DMatrix<f64>) -> Vec<f64> {
        (0..a.nrows())
            .map(|i| {
                let x: Vec<f64> = a.row(i).iter().copied().collect();
                self.eval(&x, &x)
            })
            .collect()
    }

    /// Backward pass of `K = gram(z, z)`: given `∂J/∂K`, returns `∂J/∂θ`
    /// (laid out as [`params`](Self::params)) and `∂J/∂z`.
    pub fn gram_backward(&self, z: &DMatrix<f64>, k_bar: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
        let n = z.nrows();
        let grams = self.component_grams(z, z);
        let weights: Vec<DMatrix<f64>> = match self.mode {
            KernelMode::Additive => vec![k_bar.clone(); grams.len()],
            KernelMode::Product => {
                let groups = self.groups();
                let sums: Vec<DMatrix<f64>> = groups
                    .iter()
                    .map(|g| g.iter().fold(DMatrix::zeros(n, n), |s, &i| s + &grams[i]))
                    .collect();
                let mut w = vec![DMatrix::zeros(n, n); grams.len()];
                for (gi, g) in groups.iter().enumerate() {
                    let others = sums
                        .iter()
                        .enumerate()
                        .filter(|(j, _)| *j != gi)
                        .fold(DMatrix::from_element(n, n, 1.0), |acc, (_, s)| acc.component_mul(s));
                    let wk = k_bar.component_mul(&others);
                    for &i in g {
                        w[i] = wk.clone();
                    }
                }
                w
            }
        };

        let mut theta_bar = Vec::with_capacity(self.num_params());
        let mut z_bar = DMatrix::zeros(n, z.ncols());
        for ((c, gram), w) in self.components.iter().zip(&grams).zip(&weights) {
            let kern = &c.kernel;
            let v = kern.variance();
            let nls = kern.log_lengthscales.len();
            let mut ls_bar = vec![0.0; nls];
            let mut var_bar = 0.0;
            for a in 0..n {
                for b in 0..n {
                    let wab = w[(a, b)];
                    if wab == 0.0 {
                        continue;
                    }
                    var_bar += wab * gram[(a, b)];
                    let mut r2 = 0.0;
                    for t in c.range.clone() {
                        let d = z[(a, t)] - z[(b, t)];
                        r2 += d * d * kern.inv_sq_lengthscale(t - c.range.start);
                    }
                    let dphi = v * kern.family.profile(r2).1;
                    for t in c.range.clone() {
                        let j = t - c.range.start;
                        let d = z[(a, t)] - z[(b, t)];
                        let il = kern.inv_sq_lengthscale(j);
                        let slot = if nls == 1 { 0 } else { j };
                        ls_bar[slot] += wab * dphi * (-2.0 * d * d * il);
                        // ∂r²/∂z_a = 2 d il, ∂r²/∂z_b = −2 d il
                        let g = wab * dphi * 2.0 * d * il;
                        z_bar[(a, t)] += g;
                        z_bar[(b, t)] -= g;
                    }
                }
            }
            theta_bar.extend_from_slice(&ls_bar);
            theta_bar.push(var_bar);
        }
        (theta_bar, z_bar)
    }
}

/// Kernel between two complexes through their raw (unstandardized) representations.
pub fn hodgelet_kernel(
    a: &PreparedComplex,
    b: &PreparedComplex,
    kernel: &CompositeKernel,
    bank: &FilterBank,
) -> Result<f64> {
    let (ra, rb) = (a.features(bank)?, b.features(bank)?);
    for r in [&ra, &rb] {
        if r.len() != kernel.input_dim() {
            return Err(Error::DimensionMismatch {
                what: "representation length",
                expected: kernel.input_dim(),
                found: r.len(),
            });
        }
    }
    Ok(kernel.eval(&ra, &rb))
}
