//! AdamW ascent on a flat parameter vector.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which parameter groups move during optimization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ParamGroups {
    pub bank: bool,
    pub kernel: bool,
    pub likelihood: bool,
    pub variational: bool,
}

impl Default for ParamGroups {
    fn default() -> Self {
        Self {
            bank: true,
            kernel: true,
            likelihood: true,
            variational: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimConfig {
    pub learning_rate: f64,
    pub iterations: usize,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Cosine decay of the step size to zero over the run.
    pub cosine_decay: bool,
    /// Return the best iterate seen instead of the last one.
    pub keep_best: bool,
    pub train: ParamGroups,
}

impl Default for OptimConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.05,
            iterations: 100,
            weight_decay: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            cosine_decay: false,
            keep_best: true,
            train: ParamGroups::default(),
        }
    }
}

/// Objective values, one per evaluation: entry `i` is the value before step `i`,
/// the last entry the value at the returned parameters.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub objective: Vec<f64>,
}

impl Trace {
    pub fn initial(&self) -> Option<f64> {
        self.objective.first().copied()
    }

    pub fn last(&self) -> Option<f64> {
        self.objective.last().copied()
    }
}

fn check_finite(value: f64, x: &[f64], grad: &[f64], names: &[String], step: usize) -> Result<()> {
    if value.is_finite() && grad.iter().all(|g| g.is_finite()) {
        return Ok(());
    }
    let name = |i: usize| names.get(i).cloned().unwrap_or_else(|| format!("param{i}"));
    let culprit = x
        .iter()
        .position(|v| !v.is_finite())
        .map(|i| format!("parameter {} = {}", name(i), x[i]))
        .or_else(|| {
            grad.iter()
                .position(|g| !g.is_finite())
                .map(|i| format!("gradient of {} = {}", name(i), grad[i]))
        })
        .unwrap_or_else(|| {
            let i = (0..x.len())
                .max_by(|&a, &b| x[a].abs().total_cmp(&x[b].abs()))
                .unwrap_or(0);
            format!(
                "largest parameter {} = {}",
                name(i),
                x.get(i).copied().unwrap_or(f64::NAN)
            )
        });
    Err(Error::NonFinite {
        what: format!("objective {value} at step {step}; {culprit}"),
    })
}

/// Maximizes `objective` from `x0` with AdamW. `mask[i] = false` freezes
/// coordinate `i`.
pub fn adamw_maximize<F>(
    x0: &[f64],
    mask: &[bool],
    names: &[String],
    cfg: &OptimConfig,
    mut objective: F,
) -> Result<(Vec<f64>, Trace)>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut m = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut trace = Trace::default();
    let mut best = (f64::NEG_INFINITY, x.clone());

    for step in 0..=cfg.iterations {
        let (value, grad) = objective(&x)?;
        check_finite(value, &x, &grad, names, step)?;
        trace.objective.push(value);
        if value > best.0 {
            best = (value, x.clone());
        }
        if step == cfg.iterations {
            break;
        }
        let t = (step + 1) as i32;
        let lr = if cfg.cosine_decay {
            0.5 * cfg.learning_rate * (1.0 + (std::f64::consts::PI * step as f64 / cfg.iterations as f64).cos())
        } else {
            cfg.learning_rate
        };
        let bc1 = 1.0 - cfg.beta1.powi(t);
        let bc2 = 1.0 - cfg.beta2.powi(t);
        for i in 0..n {
            if !mask[i] {
                continue;
            }
            // ascent: step along +g
            let g = grad[i];
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
            let mhat = m[i] / bc1;
            let vhat = v[i] / bc2;
            x[i] -= lr * cfg.weight_decay * x[i];
            x[i] += lr * mhat / (vhat.sqrt() + cfg.eps);
        }
    }

    if cfg.keep_best && best.0 > *trace.objective.last().unwrap() {
        trace.objective.push(best.0);
        return Ok((best.1, trace));
    }
    Ok((x, trace))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quadratic(x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let v = -(x[0] - 1.0).powi(2) - 3.0 * (x[1] + 2.0).powi(2);
        Ok((v, vec![-2.0 * (x[0] - 1.0), -6.0 * (x[1] + 2.0)]))
    }

    #[test]
    fn zero_iterations_leave_parameters_unchanged() {
        let cfg = OptimConfig {
            iterations: 0,
            ..Default::default()
        };
        let (x, trace) = adamw_maximize(&[0.3, 0.4], &[true, true], &[], &cfg, quadratic).unwrap();
        assert_eq!(x, vec![0.3, 0.4]);
        assert_eq!(trace.objective.len(), 1);
    }

    #[test]
    fn converges_on_a_concave_quadratic() {
        let cfg = OptimConfig {
            iterations: 2000,
            learning_rate: 0.05,
            weight_decay: 0.0,
            cosine_decay: true,
            keep_best: false,
            ..Default::default()
        };
        let (x, trace) = adamw_maximize(&[0.0, 0.0], &[true, true], &[], &cfg, quadratic).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-4 && (x[1] + 2.0).abs() < 1e-4);
        assert_eq!(trace.objective.len(), 2001);
        assert!(trace.objective.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn mask_freezes_coordinates() {
        let cfg = OptimConfig::default();
        let (x, _) = adamw_maximize(&[0.0, 0.0], &[false, true], &[], &cfg, quadratic).unwrap();
        assert_eq!(x[0], 0.0);
        assert!(x[1] < 0.0);
    }

    #[test]
    fn nan_names_the_parameter() {
        let names = vec!["a".to_string(), "b".to_string()];
        let err = adamw_maximize(&[0.0, 0.0], &[true, true], &names, &OptimConfig::default(), |x| {
            Ok((0.0, vec![0.0, if x[1] == 0.0 { f64::NAN } else { 0.0 }]))
        })
        .unwrap_err();
        assert!(err.to_string().contains("gradient of b"), "{err}");
    }
}
