use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use hodgelet::datagen::{build_benchmark, Benchmark, BenchmarkConfig};
use hodgelet::experiment::{compare_variants, run_experiment, write_report, ExperimentConfig, RunOptions};
use hodgelet::{dataset, Error, Result};

#[derive(Parser)]
#[command(version, about = "Hodgelet Gaussian processes on attributed simplicial complexes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Exec {
    /// Directory for cached spectra.
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    /// Added to every configured seed.
    #[arg(long, default_value_t = 0)]
    seed_offset: u64,
}

impl Exec {
    fn options(&self) -> RunOptions {
        RunOptions {
            cache_dir: self.cache_dir.clone(),
            workers: self.workers,
            seed_offset: self.seed_offset,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Cross-validate one experiment config.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        exec: Exec,
    },
    /// Write a synthetic benchmark dataset.
    Generate {
        #[arg(long)]
        benchmark: Benchmark,
        #[arg(long)]
        resolution: usize,
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run every matching config and tabulate the variants.
    Compare {
        /// Glob pattern, e.g. `configs/*.toml`.
        #[arg(long)]
        configs: String,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        exec: Exec,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, out, exec } => {
            let cfg = ExperimentConfig::from_file(&config)?;
            let report = run_experiment(&cfg, &exec.options())?;
            write_report(&report, &out)?;
            println!(
                "{} {}: {:.4} ± {:.4} ({:?})",
                report.name, report.variant, report.mean, report.stderr, report.metric
            );
        }
        Command::Generate {
            benchmark,
            resolution,
            n,
            seed,
            out,
        } => {
            let ds = build_benchmark(&BenchmarkConfig {
                benchmark,
                n_complexes: n,
                resolution,
                seed,
                ..Default::default()
            })?;
            dataset::save(&ds, &out)?;
            println!("wrote {} complexes to {}", ds.len(), out.display());
        }
        Command::Compare { configs, out, exec } => {
            let paths = glob::glob(&configs)
                .map_err(|e| Error::Config(format!("bad pattern: {e}")))?
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Io(e.into()))?;
            if paths.is_empty() {
                return Err(Error::Config(format!("no config matches `{configs}`")));
            }
            let mut reports = Vec::with_capacity(paths.len());
            for path in &paths {
                let cfg = ExperimentConfig::from_file(path)?;
                log::info!("running {}", path.display());
                let report = run_experiment(&cfg, &exec.options())?;
                let stem = path
                    .file_stem()
                    .map_or_else(|| cfg.name.clone(), |s| s.to_string_lossy().into_owned());
                write_report(&report, &out.join(stem))?;
                reports.push(report);
            }
            let cmp = compare_variants(&reports)?;
            fs::create_dir_all(&out)?;
            fs::write(out.join("comparison.csv"), cmp.to_csv()?)?;
            fs::write(
                out.join("plotdata.json"),
                serde_json::to_string_pretty(&cmp.plot_data())?,
            )?;
            print!("{}", cmp.to_csv()?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
