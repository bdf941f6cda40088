//! Planar vector fields: gradients and rotated gradients of random scalar
//! potentials, their noisy mixtures, and regularized point-vortex flows.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use super::expint::ei;
use crate::error::{Error, Result};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// A scalar field with an analytic gradient.
pub trait Potential: Send + Sync {
    fn value(&self, p: [f64; 2]) -> f64;
    fn gradient(&self, p: [f64; 2]) -> [f64; 2];
}

/// Random Fourier feature sample of a unit-variance squared-exponential GP:
/// `f(x) = √(2/M) Σ_j w_j cos(ω_jᵀx + φ_j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomFeaturePotential {
    pub weights: Vec<f64>,
    pub frequencies: Vec<[f64; 2]>,
    pub phases: Vec<f64>,
}

impl RandomFeaturePotential {
    pub fn sample<R: Rng + ?Sized>(rng: &mut R, lengthscale: f64, n_features: usize) -> Self {
        let omega = Normal::new(0.0, 1.0 / lengthscale).expect("positive lengthscale");
        let mut weights = Vec::with_capacity(n_features);
        let mut frequencies = Vec::with_capacity(n_features);
        let mut phases = Vec::with_capacity(n_features);
        for _ in 0..n_features {
            weights.push(StandardNormal.sample(rng));
            frequencies.push([omega.sample(rng), omega.sample(rng)]);
            phases.push(rng.random_range(0.0..2.0 * PI));
        }
        Self {
            weights,
            frequencies,
            phases,
        }
    }

    fn scale(&self) -> f64 {
        (2.0 / self.weights.len() as f64).sqrt()
    }
}

impl Potential for RandomFeaturePotential {
    fn value(&self, [x, y]: [f64; 2]) -> f64 {
        let s: f64 = (0..self.weights.len())
            .map(|j| {
                let [a, b] = self.frequencies[j];
                self.weights[j] * (a * x + b * y + self.phases[j]).cos()
            })
            .sum();
        self.scale() * s
    }

    fn gradient(&self, [x, y]: [f64; 2]) -> [f64; 2] {
        let mut g = [0.0; 2];
        for j in 0..self.weights.len() {
            let [a, b] = self.frequencies[j];
            let s = -self.weights[j] * (a * x + b * y + self.phases[j]).sin();
            g[0] += s * a;
            g[1] += s * b;
        }
        [self.scale() * g[0], self.scale() * g[1]]
    }
}

/// Samples a random-feature potential from a seed.
pub fn sample_potential(seed: u64, lengthscale: f64, n_features: usize) -> Result<RandomFeaturePotential> {
    if n_features == 0 || !(lengthscale > 0.0) {
        return Err(Error::Config(
            "potential needs a positive lengthscale and at least one feature".into(),
        ));
    }
    Ok(RandomFeaturePotential::sample(
        &mut ChaCha8Rng::seed_from_u64(seed),
        lengthscale,
        n_features,
    ))
}

/// What a field was built from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum FieldTag {
    CurlFree,
    DivFree,
    Mixture {
        lambda: f64,
        noise: f64,
    },
    Vortex {
        locations: Vec<[f64; 2]>,
        strengths: Vec<f64>,
        delta: f64,
    },
    Custom {
        name: String,
    },
}

type Evaluator = dyn Fn([f64; 2]) -> [f64; 2] + Send + Sync;

/// A deterministic map from points of the plane to velocities.
#[derive(Clone)]
pub struct VectorField {
    pub tag: FieldTag,
    eval: Arc<Evaluator>,
}

impl fmt::Debug for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VectorField")
            .field("tag", &self.tag)
            .finish_non_exhaustive()
    }
}

impl VectorField {
    pub fn new(tag: FieldTag, eval: impl Fn([f64; 2]) -> [f64; 2] + Send + Sync + 'static) -> Self {
        Self {
            tag,
            eval: Arc::new(eval),
        }
    }

    pub fn custom(name: &str, eval: impl Fn([f64; 2]) -> [f64; 2] + Send + Sync + 'static) -> Self {
        Self::new(FieldTag::Custom { name: name.into() }, eval)
    }

    pub fn eval(&self, p: [f64; 2]) -> [f64; 2] {
        (self.eval)(p)
    }

    /// `a·self + b·other`.
    pub fn combine(&self, a: f64, other: &VectorField, b: f64) -> VectorField {
        let (f, g) = (self.eval.clone(), other.eval.clone());
        Self::custom("combination", move |p| {
            let (u, v) = (f(p), g(p));
            [a * u[0] + b * v[0], a * u[1] + b * v[1]]
        })
    }
}

/// `∇f = (f_x, f_y)`.
pub fn curl_free<P: Potential + 'static>(f: Arc<P>) -> VectorField {
    VectorField::new(FieldTag::CurlFree, move |p| f.gradient(p))
}

/// `∇⊥f = (f_y, −f_x)`.
pub fn div_free<P: Potential + 'static>(f: Arc<P>) -> VectorField {
    VectorField::new(FieldTag::DivFree, move |p| {
        let [fx, fy] = f.gradient(p);
        [fy, -fx]
    })
}

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A standard-normal 2-vector that depends only on `(seed, p)`, so repeated
/// evaluations at one point see the same noise.
pub fn point_noise(seed: u64, [x, y]: [f64; 2]) -> [f64; 2] {
    let h = mix64(seed ^ mix64(x.to_bits() ^ mix64(y.to_bits())));
    let mut rng = ChaCha8Rng::seed_from_u64(h);
    [StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)]
}

/// Adds `R ε(p)` to a field.
pub fn with_noise(field: VectorField, noise: f64, seed: u64) -> VectorField {
    if noise == 0.0 {
        return field;
    }
    let tag = field.tag.clone();
    VectorField::new(tag, move |p| {
        let [u, v] = field.eval(p);
        let [a, b] = point_noise(seed, p);
        [u + noise * a, v + noise * b]
    })
}

/// `λ X_div-free + (1 − λ) X_curl-free + R ε` with label `1` iff `λ > 0.5`.
pub fn mixture_field<R: Rng + ?Sized>(
    rng: &mut R,
    lengthscale: f64,
    n_features: usize,
    noise: f64,
) -> (VectorField, f64, u8) {
    let lambda = loop {
        let l = rng.random_range(0.1..0.9);
        if l != 0.5 {
            break l;
        }
    };
    let div = div_free(Arc::new(RandomFeaturePotential::sample(rng, lengthscale, n_features)));
    let curl = curl_free(Arc::new(RandomFeaturePotential::sample(rng, lengthscale, n_features)));
    let noise_seed = rng.random();
    let mixed = div.combine(lambda, &curl, 1.0 - lambda);
    let mut field = with_noise(mixed, noise, noise_seed);
    field.tag = FieldTag::Mixture { lambda, noise };
    (field, lambda, u8::from(lambda > 0.5))
}

/// Point vortices with blob regularization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VortexFlow {
    pub locations: Vec<[f64; 2]>,
    pub strengths: Vec<f64>,
    pub delta: f64,
}

impl VortexFlow {
    pub fn new(locations: Vec<[f64; 2]>, strengths: Vec<f64>, delta: f64) -> Result<Self> {
        if locations.is_empty() || locations.len() != strengths.len() || !(delta > 0.0) {
            return Err(Error::Config(
                "vortex flow needs matching locations/strengths and δ > 0".into(),
            ));
        }
        Ok(Self {
            locations,
            strengths,
            delta,
        })
    }

    /// `ψ_δ(x) = −Σ Γ_n/(4π) [log ‖x − x_n‖² − Ei(−‖x − x_n‖²/δ²)]`.
    pub fn streamfunction(&self, [x, y]: [f64; 2]) -> f64 {
        let d2 = self.delta * self.delta;
        self.locations
            .iter()
            .zip(&self.strengths)
            .map(|([a, b], g)| {
                let s = (x - a).powi(2) + (y - b).powi(2);
                // log s − Ei(−s/δ²) → log δ² − γ as s → 0
                let bracket = if s < 1e-300 {
                    d2.ln() - EULER_GAMMA
                } else {
                    s.ln() - ei(-s / d2)
                };
                -g / (4.0 * PI) * bracket
            })
            .sum()
    }

    /// `(u, v) = (∂ψ/∂y, −∂ψ/∂x)`.
    pub fn velocity(&self, [x, y]: [f64; 2]) -> [f64; 2] {
        let d2 = self.delta * self.delta;
        let mut uv = [0.0; 2];
        for ([a, b], g) in self.locations.iter().zip(&self.strengths) {
            let (dx, dy) = (x - a, y - b);
            let s = dx * dx + dy * dy;
            // dψ/ds = −Γ/(4π) (1 − e^{−s/δ²})/s, finite at s = 0
            let ratio = if s < 1e-300 { 1.0 / d2 } else { -(-s / d2).exp_m1() / s };
            let dpsi_ds = -g / (4.0 * PI) * ratio;
            uv[0] += dpsi_ds * 2.0 * dy;
            uv[1] -= dpsi_ds * 2.0 * dx;
        }
        uv
    }

    pub fn field(&self) -> VectorField {
        let flow = self.clone();
        VectorField::new(
            FieldTag::Vortex {
                locations: self.locations.clone(),
                strengths: self.strengths.clone(),
                delta: self.delta,
            },
            move |p| flow.velocity(p),
        )
    }
}

pub fn vortex_field(locations: Vec<[f64; 2]>, strengths: Vec<f64>, delta: f64) -> Result<VectorField> {
    Ok(VortexFlow::new(locations, strengths, delta)?.field())
}

/// Net circulation `Γ = Σ Γ_n` and label `1` iff `Γ > 0`.
pub fn circulation_label(strengths: &[f64]) -> Result<(f64, u8)> {
    let total: f64 = strengths.iter().sum();
    if total == 0.0 || !total.is_finite() {
        return Err(Error::Config("net circulation must be non-zero and finite".into()));
    }
    Ok((total, u8::from(total > 0.0)))
}
