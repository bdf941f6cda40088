//! Accuracy of HTGP, WTGP and the line-graph baseline as the mesh gets finer.
//!
//! `cargo run --release --example resolution_ablation -- [div-curl-free|vortices] [seeds]`

use hodgelet::datagen::{Benchmark, BenchmarkConfig};
use hodgelet::experiment::{
    compare_variants, run_experiment, DatasetSpec, ExperimentConfig, ModelKind, Placement, RunOptions, Variant,
};

fn main() -> hodgelet::Result<()> {
    let mut args = std::env::args().skip(1);
    let benchmark: Benchmark = args.next().as_deref().unwrap_or("div-curl-free").parse()?;
    let seeds: u64 = args
        .next()
        .map_or(Ok(1), |s| s.parse())
        .map_err(|e| hodgelet::Error::Config(format!("{e}")))?;

    let variants = [
        Variant {
            model: ModelKind::Htgp,
            placement: Placement::Edge,
            line_graph: false,
        },
        Variant {
            model: ModelKind::Wtgp,
            placement: Placement::Edge,
            line_graph: false,
        },
        Variant {
            model: ModelKind::Htgp,
            placement: Placement::Vertex,
            line_graph: true,
        },
    ];
    let cache = std::env::temp_dir().join("hodgelet-spectra");
    let opts = RunOptions {
        cache_dir: Some(cache),
        ..Default::default()
    };
    let mut reports = Vec::new();
    for resolution in [10, 25, 50] {
        for variant in variants {
            let cfg = ExperimentConfig {
                name: format!("{benchmark}-{resolution}"),
                dataset: DatasetSpec::generated(BenchmarkConfig {
                    benchmark,
                    resolution,
                    ..Default::default()
                }),
                variant,
                seeds: (0..seeds).collect(),
                ..Default::default()
            };
            let r = run_experiment(&cfg, &opts)?;
            eprintln!("{resolution:>4} {:<26} {:.3}", r.variant, r.mean);
            reports.push(r);
        }
    }
    print!("{}", compare_variants(&reports)?.to_csv()?);
    Ok(())
}
