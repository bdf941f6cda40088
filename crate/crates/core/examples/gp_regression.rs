//! Exact GP regression on edge flows: predict the share of rotational
//! energy in a random mixture of gradient and curl fields.

use std::sync::Arc;

use hodgelet::datagen::{curl_free, de_rham_project, div_free, random_mesh, sample_potential};
use hodgelet::gp::{load_checkpoint, save_checkpoint, GpConfig, GpModel, Likelihood, OptimConfig};
use hodgelet::hodge::HodgeSpectrum;
use hodgelet::hodgelet::{BankConfig, BlockKey, FilterBank, PreparedComplex};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sample(seed: u64, keys: &[BlockKey]) -> hodgelet::Result<(PreparedComplex, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mesh = random_mesh(seed, 40)?;
    let a: f64 = rng.random_range(0.0..1.0);
    let grad = curl_free(Arc::new(sample_potential(2 * seed, 0.3, 128)?));
    let curl = div_free(Arc::new(sample_potential(2 * seed + 1, 0.3, 128)?));
    let flow = de_rham_project(&grad.combine(1.0 - a, &curl, a), &mesh, 3)?;
    let sc = mesh
        .complex
        .with_attributes(1, DMatrix::from_column_slice(flow.len(), 1, flow.as_slice()));
    let spec = HodgeSpectrum::compute(&sc.incidence_matrices()?)?;
    Ok((PreparedComplex::new(&sc, &spec, keys, false)?, a))
}

fn main() -> hodgelet::Result<()> {
    let keys = BlockKey::for_dims(&[1], true);
    let (x, y): (Vec<_>, Vec<_>) = (0..40)
        .map(|s| sample(s, &keys))
        .collect::<hodgelet::Result<Vec<_>>>()?
        .into_iter()
        .unzip();
    let (x_test, y_test): (Vec<_>, Vec<_>) = (100..110)
        .map(|s| sample(s, &keys))
        .collect::<hodgelet::Result<Vec<_>>>()?
        .into_iter()
        .unzip();

    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let centred: Vec<f64> = y.iter().map(|v| v - mean).collect();

    let bank = FilterBank::init(&keys, &BankConfig::default(), &mut ChaCha8Rng::seed_from_u64(0))?;
    let cfg = GpConfig {
        likelihood: Likelihood::Gaussian { noise_variance: 0.01 },
        ..Default::default()
    };
    let mut model = GpModel::for_inputs(cfg, bank, &x[0])?;
    let trace = model.fit(
        &x,
        &centred,
        &OptimConfig {
            iterations: 150,
            ..Default::default()
        },
    )?;
    println!(
        "log marginal likelihood {:.3} -> {:.3}",
        trace.initial().unwrap_or(f64::NAN),
        trace.last().unwrap_or(f64::NAN)
    );

    let dir = std::env::temp_dir().join("hodgelet-gp-regression");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("model.bin");
    save_checkpoint(&model, &path)?;
    // checkpoints hold parameters only; re-condition on the training data
    let mut model = load_checkpoint(&path)?;
    model.condition(&x, &centred)?;

    let mut se = 0.0;
    for (p, t) in model.predict(&x_test)?.iter().zip(&y_test) {
        let guess = p.point() + mean;
        se += (guess - t).powi(2);
        println!("truth {t:.3}  predicted {guess:.3}");
    }
    println!("test MSE {:.4}", se / y_test.len() as f64);
    Ok(())
}
