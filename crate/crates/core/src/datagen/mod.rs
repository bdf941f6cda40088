//! Synthetic vector-field benchmarks discretized onto random meshes.

mod expint;
mod field;
mod mesh;

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Task};
use crate::error::{Error, Result};

pub use expint::{e1, ei};
pub use field::{
    circulation_label, curl_free, div_free, mixture_field, point_noise, sample_potential, vortex_field, with_noise,
    FieldTag, Potential, RandomFeaturePotential, VectorField, VortexFlow,
};
pub use mesh::{de_rham_edges, de_rham_project, mesh_from_points, random_mesh, random_mesh_with, TriangularMesh};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Benchmark {
    #[serde(rename = "div-curl-free")]
    DivCurlFree,
    #[serde(rename = "vortices")]
    Vortices,
}

impl FromStr for Benchmark {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "div-curl-free" => Ok(Self::DivCurlFree),
            "vortices" => Ok(Self::Vortices),
            other => Err(Error::Config(format!("unknown benchmark `{other}`"))),
        }
    }
}

impl fmt::Display for Benchmark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::DivCurlFree => "div-curl-free",
            Self::Vortices => "vortices",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchmarkConfig {
    pub benchmark: Benchmark,
    pub n_complexes: usize,
    /// Mesh vertex count.
    pub resolution: usize,
    pub seed: u64,
    /// `R` in `X + R ε`.
    pub noise: f64,
    pub quadrature_order: usize,
    pub lengthscale: f64,
    pub n_features: usize,
    pub num_vortices: usize,
    pub delta: f64,
    /// One mesh shared by every complex instead of one mesh each.
    pub fixed_mesh: bool,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            benchmark: Benchmark::DivCurlFree,
            n_complexes: 100,
            resolution: 50,
            seed: 0,
            noise: 0.05,
            quadrature_order: 5,
            lengthscale: 0.2,
            n_features: 256,
            num_vortices: 3,
            delta: 0.1,
            fixed_mesh: false,
        }
    }
}

/// Generator settings echoed into a dataset manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorInfo {
    #[serde(flatten)]
    pub config: BenchmarkConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vortex_locations: Option<Vec<[f64; 2]>>,
}

/// One generated complex with the quantities behind its label.
#[derive(Debug, Clone)]
pub struct BenchmarkSample {
    pub mesh: TriangularMesh,
    pub field: VectorField,
    /// `λ` for div-curl-free, `Γ` for vortices.
    pub latent: f64,
    pub label: u8,
}

/// Vortex locations of a dataset: `num_vortices` uniform points drawn once
/// from the dataset seed.
pub fn vortex_locations(seed: u64, count: usize) -> Vec<[f64; 2]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| [rng.random::<f64>(), rng.random::<f64>()]).collect()
}

fn sample_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64 + 1);
    rng
}

/// Generates every sample; seed-stable regardless of the thread count.
pub fn generate_samples(cfg: &BenchmarkConfig) -> Result<Vec<BenchmarkSample>> {
    if cfg.n_complexes == 0 {
        return Err(Error::Config("n_complexes must be positive".into()));
    }
    if cfg.noise < 0.0 {
        return Err(Error::Config("noise level must be non-negative".into()));
    }
    let shared_mesh = if cfg.fixed_mesh {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(u64::MAX);
        Some(random_mesh_with(&mut rng, cfg.resolution)?)
    } else {
        None
    };
    let locations = vortex_locations(cfg.seed, cfg.num_vortices);
    (0..cfg.n_complexes)
        .into_par_iter()
        .map(|i| {
            let mut rng = sample_rng(cfg.seed, i);
            let mesh = match &shared_mesh {
                Some(m) => m.clone(),
                None => random_mesh_with(&mut rng, cfg.resolution)?,
            };
            let (field, latent, label) = match cfg.benchmark {
                Benchmark::DivCurlFree => mixture_field(&mut rng, cfg.lengthscale, cfg.n_features, cfg.noise),
                Benchmark::Vortices => {
                    let strengths = loop {
                        let s: Vec<f64> = (0..cfg.num_vortices).map(|_| StandardNormal.sample(&mut rng)).collect();
                        if s.iter().sum::<f64>() != 0.0 {
                            break s;
                        }
                    };
                    let (gamma, label) = circulation_label(&strengths)?;
                    let flow = vortex_field(locations.clone(), strengths, cfg.delta)?;
                    let noisy = with_noise(flow, cfg.noise, rng.random());
                    (noisy, gamma, label)
                }
            };
            Ok(BenchmarkSample {
                mesh,
                field,
                latent,
                label,
            })
        })
        .collect()
}

/// A labelled dataset of edge-attributed meshes (`D_1 = 1`, no vertex or
/// triangle attributes).
pub fn build_benchmark(cfg: &BenchmarkConfig) -> Result<Dataset> {
    let samples = generate_samples(cfg)?;
    let complexes = samples
        .par_iter()
        .map(|s| {
            let x = de_rham_project(&s.field, &s.mesh, cfg.quadrature_order)?;
            let n = x.len();
            Ok(s.mesh
                .complex
                .clone()
                .with_attributes(1, DMatrix::from_column_slice(n, 1, x.as_slice()))
                .with_label(f64::from(s.label)))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut ds = Dataset::new(complexes, Some(Task::Binary))?;
    ds.manifest.generator = Some(GeneratorInfo {
        config: cfg.clone(),
        vortex_locations: (cfg.benchmark == Benchmark::Vortices).then(|| vortex_locations(cfg.seed, cfg.num_vortices)),
    });
    Ok(ds)
}
