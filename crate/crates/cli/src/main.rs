use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rdmf::io::{self, RunConfig};
use rdmf::Error;

/// Image completion by regularized deep matrix factorization.
///
/// Every subcommand reads a `key = value` config file and then applies
/// `key=value` overrides from the command line, in order.
#[derive(Parser)]
#[command(name = "rdmf", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Run {
    /// Config file (`-` for built-in defaults).
    config: PathBuf,
    /// Settings applied after the file, e.g. `optimizer.eta=0.01`.
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the observation mask and write it to `output.mask`.
    Mask(Run),
    /// Train one model and write the restored image and metrics.
    Complete(Run),
    /// Run the `sweep.*` grid and write one CSV row per cell.
    Sweep(Run),
    /// Score `metrics.restored` against the input image and mask.
    Metrics(Run),
    /// Integrate the gradient flow of a deep linear factorization and
    /// compare singular-value velocities with their closed forms.
    Probe(Run),
}

fn load(run: &Run) -> Result<RunConfig, Error> {
    let mut cfg = if run.config == Path::new("-") {
        RunConfig::default()
    } else {
        let text = std::fs::read_to_string(&run.config).map_err(|e| {
            Error::Config(format!("cannot read config {}: {e}", run.config.display()))
        })?;
        RunConfig::parse(&text)?
    };
    cfg.apply_overrides(&run.overrides)?;
    cfg.validate()?;
    Ok(cfg)
}

fn execute(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Mask(run) => {
            let cfg = load(&run)?;
            let mask = io::run_mask(&cfg)?;
            let (rows, cols) = mask.shape();
            println!(
                "mask {rows}x{cols}: {} observed, {} missing",
                mask.observed_count(),
                mask.missing_count()
            );
            if cfg.mask_path.is_none() {
                eprintln!("note: output.mask is not set, nothing written");
            }
        }
        Command::Complete(run) => {
            let cfg = load(&run)?;
            let out = io::run_single(&cfg)?;
            print!("{}", io::metrics_csv(std::slice::from_ref(&out.record)));
            eprintln!("run hash {}", out.run_hash);
        }
        Command::Sweep(run) => {
            let cfg = load(&run)?;
            let mut out = io::run_sweep(&cfg)?;
            for f in &out.failures {
                let c = &f.cell;
                eprintln!(
                    "cell missing_pct={} activation={} regularizer={} lambda={} depth={} width={} seed={} failed: {}",
                    c.missing_pct, c.activation, c.regularizer, c.lambda, c.depth, c.width, c.seed, f.error
                );
            }
            if cfg.metrics_path.is_none() {
                print!("{}", out.csv());
            } else {
                println!("{} rows, {} failed cells", out.records.len(), out.failures.len());
            }
            // a sweep with nothing to show is an error; partial failures are not
            if out.records.is_empty() && !out.failures.is_empty() {
                return Err(out.failures.swap_remove(0).error);
            }
        }
        Command::Metrics(run) => {
            let cfg = load(&run)?;
            let m = io::run_metrics(&cfg)?;
            println!(
                "nmae {} effective_rank {} missing {}",
                m.nmae, m.effective_rank, m.missing
            );
        }
        Command::Probe(run) => {
            let cfg = load(&run)?;
            let out = io::run_probe(&cfg)?;
            println!(
                "steps {} max_residual_fidelity_law {:.3e} max_residual_two_term_law {:.3e} \
                 flagged {} stationary {} balancedness {:.2e} -> {:.2e}",
                out.records.len(),
                out.max_prop1_residual(),
                out.max_cor1_residual(),
                out.flagged_count(),
                out.stationary_count(),
                out.initial_balancedness,
                out.final_balancedness
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
