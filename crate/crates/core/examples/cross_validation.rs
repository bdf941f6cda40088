//! Cross-validate one configuration from TOML and write its report files.

use hodgelet::experiment::{run_experiment, write_report, ExperimentConfig, RunOptions};

const CONFIG: &str = r#"
name = "htgp-edge-dcf-25"
seeds = [0, 1]
folds = 5
beta_grid = [0.1, 1.0]

[dataset.generator]
benchmark = "div-curl-free"
resolution = 25

[variant]
model = "HTGP"
placement = "edge"

[optimizer]
iterations = 60
"#;

fn main() -> hodgelet::Result<()> {
    let cfg = ExperimentConfig::from_toml(CONFIG)?;
    let report = run_experiment(&cfg, &RunOptions::default())?;
    for f in &report.folds {
        println!(
            "seed {} fold {}: beta {} accuracy {:.2}",
            f.seed,
            f.fold,
            f.beta,
            f.metric.unwrap_or(f64::NAN)
        );
    }
    println!("{}: {:.3} ± {:.3}", report.variant, report.mean, report.stderr);
    let out = std::env::temp_dir().join("hodgelet-cv");
    write_report(&report, &out)?;
    println!("report written to {}", out.display());
    Ok(())
}
