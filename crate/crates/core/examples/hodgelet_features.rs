//! Hodgelet representations of one complex under each aggregation.

use hodgelet::datagen::random_mesh;
use hodgelet::hodge::HodgeSpectrum;
use hodgelet::hodgelet::{Aggregation, BankConfig, BlockKey, FilterBank, PreparedComplex};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> hodgelet::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut sc = random_mesh(3, 40)?.complex;
    let m = sc.count(1);
    sc.set_attributes(1, DMatrix::from_fn(m, 2, |i, j| ((i + 3 * j) as f64).sin()));

    let spec = HodgeSpectrum::compute(&sc.incidence_matrices()?)?;
    let keys = BlockKey::for_dims(&[1], true);
    let x = PreparedComplex::new(&sc, &spec, &keys, true)?;

    for aggregation in [
        Aggregation::Energy,
        Aggregation::Sum,
        Aggregation::Min,
        Aggregation::Max,
        Aggregation::Weighted {
            sum: 1.0,
            min: 0.5,
            max: 0.5,
        },
    ] {
        let cfg = BankConfig {
            aggregation,
            ..Default::default()
        };
        let bank = FilterBank::init(&keys, &cfg, &mut rng)?;
        let r = x.features(&bank)?;
        let head: Vec<String> = r.iter().take(4).map(|v| format!("{v:.3}")).collect();
        println!("{aggregation}: {} features, first [{}]", r.len(), head.join(", "));
    }
    Ok(())
}
