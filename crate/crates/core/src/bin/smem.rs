use std::fs;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use smem::cli::{exit_code, parse_spec, run, summarize, ExperimentSpec, SEEDS_ENV};
use smem::dataset::{generate, write_dataset};
use smem::Error;

/// Active-learning experiments with single-modal entropic acquisition.
#[derive(Debug, Parser)]
#[command(name = "smem", version)]
struct Args {
    /// Experiment spec (TOML).
    #[arg(long, required_unless_present = "summarize")]
    spec: Option<PathBuf>,

    /// Output directory, overriding the spec's `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Worker threads for the (strategy x seed) grid.
    #[arg(long, default_value_t = 1)]
    workers: usize,

    /// Comma-separated master seeds, overriding the spec's `seeds`.
    #[arg(long, env = SEEDS_ENV)]
    seeds: Option<String>,

    /// Write the dataset generated for the first seed to this path and exit.
    #[arg(long, requires = "spec")]
    export_dataset: Option<PathBuf>,

    /// Print per-strategy mean ± stddev per stage for an emitted CSV.
    #[arg(long, conflicts_with = "spec")]
    summarize: Option<PathBuf>,
}

fn load_spec(args: &Args) -> Result<ExperimentSpec, Error> {
    let path = args.spec.as_ref().expect("clap enforces --spec");
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    let mut spec = parse_spec(&text)?;
    if let Some(list) = &args.seeds {
        spec.override_seeds(list)?;
    }
    if let Some(out) = &args.out {
        spec.output_dir = out.clone();
    }
    Ok(spec)
}

fn main() -> ExitCode {
    let args = Args::parse();

    if let Some(csv) = &args.summarize {
        return match summarize(csv) {
            Ok(s) => {
                print!("{}", s.render());
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(exit_code(&e) as u8)
            }
        };
    }

    let spec = match load_spec(&args) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("spec error: {e}");
            return ExitCode::from(2);
        }
    };

    if let Some(path) = &args.export_dataset {
        let (cfg, _, _) = spec.run_configs(spec.strategies[0], spec.seeds[0]);
        let res = generate(&cfg).and_then(|ds| {
            let f = fs::File::create(path)?;
            write_dataset(&ds, BufWriter::new(f))
        });
        return match res {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(1)
            }
        };
    }

    match run(&spec, args.workers) {
        Ok(table) => {
            eprintln!(
                "wrote {} rows to {}",
                table.rows.len(),
                spec.output_dir.join(smem::cli::CSV_FILE).display()
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("run failed: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
