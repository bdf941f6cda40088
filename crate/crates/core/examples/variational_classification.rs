//! Variational GP classification of div-free versus curl-free flows.

use hodgelet::cache::compute_spectrum;
use hodgelet::datagen::{build_benchmark, Benchmark, BenchmarkConfig};
use hodgelet::gp::{GpConfig, GpModel, Likelihood, OptimConfig};
use hodgelet::hodgelet::{BankConfig, BlockKey, FilterBank, PreparedComplex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> hodgelet::Result<()> {
    let ds = build_benchmark(&BenchmarkConfig {
        benchmark: Benchmark::DivCurlFree,
        n_complexes: 60,
        resolution: 40,
        ..Default::default()
    })?;
    let keys = BlockKey::for_dims(&[1], true);
    let x: Vec<PreparedComplex> = ds
        .complexes
        .iter()
        .map(|sc| PreparedComplex::new(sc, &compute_spectrum(sc, &[1])?, &keys, false))
        .collect::<hodgelet::Result<_>>()?;
    let y = ds.labels();
    let (train, test) = x.split_at(45);

    let bank = FilterBank::init(&keys, &BankConfig::default(), &mut ChaCha8Rng::seed_from_u64(0))?;
    let cfg = GpConfig {
        likelihood: Likelihood::Bernoulli,
        beta: 0.1,
        ..Default::default()
    };
    let mut model = GpModel::for_inputs(cfg, bank, &train[0])?;
    let trace = model.fit(train, &y[..45], &OptimConfig::default())?;
    println!(
        "ELBO {:.2} -> {:.2}",
        trace.initial().unwrap_or(f64::NAN),
        trace.last().unwrap_or(f64::NAN)
    );

    let pred = model.predict(test)?;
    let correct = pred.iter().zip(&y[45..]).filter(|(p, t)| p.point() == **t).count();
    println!("held-out accuracy {correct}/{}", test.len());
    Ok(())
}
