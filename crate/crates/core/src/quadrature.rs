//! Gauss–Legendre and Gauss–Hermite rules via the Golub–Welsch eigenvalue method.

use nalgebra::{DMatrix, SymmetricEigen};

/// Nodes and weights of an `n`-point rule.
#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

fn golub_welsch(n: usize, off_diagonal: impl Fn(usize) -> f64, mass: f64) -> Rule {
    assert!(n >= 1, "quadrature order must be positive");
    let mut j = DMatrix::zeros(n, n);
    for k in 1..n {
        let b = off_diagonal(k);
        j[(k - 1, k)] = b;
        j[(k, k - 1)] = b;
    }
    let eig = SymmetricEigen::new(j);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let v0 = eig.eigenvectors[(0, i)];
            (eig.eigenvalues[i], mass * v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    // symmetrize to remove round-off asymmetry of the symmetric rules
    for i in 0..n / 2 {
        let (a, b) = (pairs[i], pairs[n - 1 - i]);
        let node = 0.5 * (b.0 - a.0);
        let weight = 0.5 * (a.1 + b.1);
        pairs[i] = (-node, weight);
        pairs[n - 1 - i] = (node, weight);
    }
    if n % 2 == 1 {
        pairs[n / 2].0 = 0.0;
    }
    Rule {
        nodes: pairs.iter().map(|p| p.0).collect(),
        weights: pairs.iter().map(|p| p.1).collect(),
    }
}

/// Gauss–Legendre rule on `[−1, 1]`.
pub fn gauss_legendre(n: usize) -> Rule {
    golub_welsch(n, |k| k as f64 / ((4 * k * k - 1) as f64).sqrt(), 2.0)
}

/// Gauss–Legendre rule mapped to `[0, 1]`.
pub fn gauss_legendre_unit(n: usize) -> Rule {
    let r = gauss_legendre(n);
    Rule {
        nodes: r.nodes.iter().map(|x| 0.5 * (x + 1.0)).collect(),
        weights: r.weights.iter().map(|w| 0.5 * w).collect(),
    }
}

/// Gauss–Hermite rule for the weight `exp(−x²)`.
pub fn gauss_hermite(n: usize) -> Rule {
    golub_welsch(n, |k| (k as f64 / 2.0).sqrt(), std::f64::consts::PI.sqrt())
}

impl Rule {
    /// `E[g(f)]` for `f ~ N(mean, var)` when built with [`gauss_hermite`].
    pub fn gaussian_expectation(&self, mean: f64, var: f64, g: impl Fn(f64) -> f64) -> f64 {
        let s = (2.0 * var.max(0.0)).sqrt();
        let total: f64 = self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * g(mean + s * x))
            .sum();
        total / std::f64::consts::PI.sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_integrates_polynomials_exactly() {
        let r = gauss_legendre_unit(5);
        for p in 0..10 {
            let q: f64 = r.nodes.iter().zip(&r.weights).map(|(x, w)| w * x.powi(p)).sum();
            assert!((q - 1.0 / (p as f64 + 1.0)).abs() < 1e-14, "degree {p}");
        }
    }

    #[test]
    fn hermite_matches_gaussian_moments() {
        let r = gauss_hermite(20);
        assert!((r.gaussian_expectation(0.3, 2.0, |_| 1.0) - 1.0).abs() < 1e-13);
        assert!((r.gaussian_expectation(0.3, 2.0, |f| f) - 0.3).abs() < 1e-13);
        assert!((r.gaussian_expectation(0.3, 2.0, |f| f * f) - 2.09).abs() < 1e-12);
        assert!((r.gaussian_expectation(0.0, 1.0, |f| f.powi(4)) - 3.0).abs() < 1e-12);
    }
}
