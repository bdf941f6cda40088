//! Generate both synthetic benchmarks and write them with their manifests.

use hodgelet::datagen::{build_benchmark, Benchmark, BenchmarkConfig};
use hodgelet::dataset;

fn main() -> hodgelet::Result<()> {
    let dir = std::env::temp_dir().join("hodgelet-benchmarks");
    std::fs::create_dir_all(&dir)?;
    for benchmark in [Benchmark::DivCurlFree, Benchmark::Vortices] {
        let ds = build_benchmark(&BenchmarkConfig {
            benchmark,
            resolution: 50,
            ..Default::default()
        })?;
        let path = dir.join(format!("{benchmark}-50.json"));
        dataset::save(&ds, &path)?;
        let ones = ds.labels().iter().filter(|y| **y == 1.0).count();
        let edges: usize = ds.complexes.iter().map(|c| c.count(1)).sum();
        println!(
            "{benchmark}: {} complexes, {:.1} edges on average, {ones} labelled 1, written to {}",
            ds.len(),
            edges as f64 / ds.len() as f64,
            path.display()
        );
        if let Some(locs) = ds.manifest.generator.as_ref().and_then(|g| g.vortex_locations.as_ref()) {
            println!("  vortex locations {locs:.3?}");
        }
    }
    Ok(())
}
