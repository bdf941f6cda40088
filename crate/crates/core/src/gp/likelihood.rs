//! Observation models and their expectations under Gaussian marginals.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{gauss_hermite, Rule};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum Likelihood {
    /// Regression with initial noise variance `σ²`.
    Gaussian { noise_variance: f64 },
    /// Binary labels in `{0, 1}` through the logistic link.
    Bernoulli,
    /// Class indices `0..classes`, one latent function per class.
    Softmax { classes: usize },
}

impl Default for Likelihood {
    fn default() -> Self {
        Self::Gaussian { noise_variance: 0.1 }
    }
}

impl Likelihood {
    /// Number of latent functions.
    pub fn latent_count(&self) -> usize {
        match self {
            Self::Softmax { classes } => *classes,
            _ => 1,
        }
    }

    pub fn is_classification(&self) -> bool {
        !matches!(self, Self::Gaussian { .. })
    }

    pub fn check_targets(&self, y: &[f64]) -> Result<()> {
        for (i, &t) in y.iter().enumerate() {
            let ok = match self {
                Self::Gaussian { .. } => t.is_finite(),
                Self::Bernoulli => t == 0.0 || t == 1.0,
                Self::Softmax { classes } => t >= 0.0 && t.fract() == 0.0 && (t as usize) < *classes,
            };
            if !ok {
                return Err(Error::Record {
                    record: i,
                    message: format!("label {t} is not valid for {self:?}"),
                });
            }
        }
        if let Self::Softmax { classes } = self {
            if *classes < 2 {
                return Err(Error::Config("softmax needs at least two classes".into()));
            }
        }
        Ok(())
    }
}

/// `log σ(x)` without overflow.
pub fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `E[log p(y | f)]` for one observation with `f ~ N(mean, var)` together
/// with its derivatives in the mean and in the variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Expectation {
    pub value: f64,
    pub d_mean: f64,
    pub d_var: f64,
}

/// Gauss–Hermite expectation of the logistic log-likelihood.
pub struct BernoulliQuadrature {
    rule: Rule,
}

impl BernoulliQuadrature {
    pub fn new(order: usize) -> Self {
        Self {
            rule: gauss_hermite(order),
        }
    }

    pub fn expectation(&self, y: f64, mean: f64, var: f64) -> Expectation {
        let s = if y > 0.5 { 1.0 } else { -1.0 };
        let value = self.rule.gaussian_expectation(mean, var, |f| log_sigmoid(s * f));
        let d_mean = self.rule.gaussian_expectation(mean, var, |f| s * sigmoid(-s * f));
        // derivative of the quadrature sum itself, so the objective and its
        // gradient agree exactly; Stein's identity ½E[g''] only in the limit
        let d_var = if var > 1e-12 {
            let sd = (2.0 * var).sqrt();
            self.rule
                .gaussian_expectation(mean, var, |f| s * sigmoid(-s * f) * (f - mean) / (sd * sd))
        } else {
            0.5 * self
                .rule
                .gaussian_expectation(mean, var, |f| -sigmoid(s * f) * sigmoid(-s * f))
        };
        Expectation { value, d_mean, d_var }
    }

    /// `P(y = 1)` under `f ~ N(mean, var)`.
    pub fn probability(&self, mean: f64, var: f64) -> f64 {
        self.rule.gaussian_expectation(mean, var, sigmoid).clamp(0.0, 1.0)
    }
}

/// Closed-form expectation of the Gaussian log-density.
pub fn gaussian_expectation(y: f64, mean: f64, var: f64, noise: f64) -> Expectation {
    let r = y - mean;
    Expectation {
        value: -0.5 * (2.0 * std::f64::consts::PI * noise).ln() - (r * r + var) / (2.0 * noise),
        d_mean: r / noise,
        d_var: -0.5 / noise,
    }
}

/// `∂/∂ log σ²` of [`gaussian_expectation`].
pub fn gaussian_expectation_d_log_noise(y: f64, mean: f64, var: f64, noise: f64) -> f64 {
    let r = y - mean;
    -0.5 + (r * r + var) / (2.0 * noise)
}

/// Monte-Carlo expectation of `log softmax(f)_y` with `f_c ~ N(mean_c, var_c)`
/// independently, using fixed standard-normal draws `eps[s][c]`. Returns the
/// value and the derivatives in each mean and variance.
pub fn softmax_expectation(y: usize, mean: &[f64], var: &[f64], eps: &[Vec<f64>]) -> (f64, Vec<f64>, Vec<f64>) {
    let c = mean.len();
    let sd: Vec<f64> = var.iter().map(|v| v.max(0.0).sqrt()).collect();
    let mut value = 0.0;
    let mut d_mean = vec![0.0; c];
    let mut d_var = vec![0.0; c];
    let mut f = vec![0.0; c];
    let mut p = vec![0.0; c];
    for e in eps {
        for j in 0..c {
            f[j] = mean[j] + sd[j] * e[j];
        }
        let lse = log_sum_exp(&f);
        value += f[y] - lse;
        for j in 0..c {
            p[j] = (f[j] - lse).exp();
        }
        for j in 0..c {
            let g = if j == y { 1.0 } else { 0.0 } - p[j];
            d_mean[j] += g;
            if sd[j] > 0.0 {
                d_var[j] += g * e[j] / (2.0 * sd[j]);
            }
        }
    }
    let s = eps.len() as f64;
    value /= s;
    d_mean.iter_mut().for_each(|v| *v /= s);
    d_var.iter_mut().for_each(|v| *v /= s);
    (value, d_mean, d_var)
}

pub fn log_sum_exp(x: &[f64]) -> f64 {
    let m = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + x.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

pub fn softmax(x: &[f64]) -> Vec<f64> {
    let lse = log_sum_exp(x);
    x.iter().map(|v| (v - lse).exp()).collect()
}
