//! `motorid`: synthesize corpora, detect and extract turn-on events, run
//! the identification experiments and render their reports.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use motorid::ml::Kernel;

use config::RunConfig;
use error::{CliError, CliResult};

#[derive(Parser)]
#[command(
    name = "motorid",
    version,
    about = "Motor identification from turn-on current transients"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic motor corpus.
    Synth(Common),
    /// Find turn-ons in raw records and write an event store.
    Detect(Common),
    /// Compute the feature table of an event store.
    Extract(Common),
    /// Run the configured protocol on a feature table.
    Experiment(Common),
    /// Re-render the tables of a stored report.
    Report(Common),
}

#[derive(Args)]
struct Common {
    /// Configuration file of `section.key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Input directory or file; overrides `paths.input` (and
    /// `paths.features` for `experiment`).
    #[arg(long)]
    input: Option<PathBuf>,
    /// Feature table; overrides `paths.features`.
    #[arg(long)]
    features: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    jobs: Option<usize>,
    /// Restrict the experiment to these kernels.
    #[arg(long, value_delimiter = ',')]
    kernel: Vec<Kernel>,
}

impl Common {
    fn resolve(&self) -> CliResult<(RunConfig, PathBuf)> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(p) = &self.input {
            cfg.input = Some(p.clone());
        }
        if let Some(p) = &self.features {
            cfg.features = Some(p.clone());
        }
        if let Some(p) = &self.out {
            cfg.output = Some(p.clone());
        }
        if !self.kernel.is_empty() {
            cfg.experiment.kernels = self.kernel.clone();
        }
        cfg.validate()?;
        let out = cfg.output.clone().ok_or_else(|| {
            CliError::Config("no output directory (--out or paths.output)".into())
        })?;
        if let Some(n) = self.jobs {
            if n == 0 {
                return Err(CliError::Config("--jobs must be at least 1".into()));
            }
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| CliError::Config(format!("cannot start {n} workers: {e}")))?;
        }
        Ok((cfg, out))
    }
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Synth(c) => {
            let (cfg, out) = c.resolve()?;
            let n = commands::synth(&cfg, &out)?;
            println!(
                "wrote {n} event files to {} (config {})",
                out.display(),
                cfg.digest()
            );
        }
        Command::Detect(c) => {
            let (cfg, out) = c.resolve()?;
            let input = commands::input_path(&cfg, "input directory (--input or paths.input)")?;
            let b = commands::detect(&cfg, input, &out)?;
            println!(
                "{} records, {} skipped, {} events written to {}",
                b.files,
                b.failed,
                b.written,
                out.display()
            );
        }
        Command::Extract(c) => {
            let (cfg, out) = c.resolve()?;
            let input = commands::input_path(&cfg, "event store (--input or paths.input)")?;
            let (b, path) = commands::extract(&cfg, input, &out)?;
            println!(
                "{} events, {} skipped, table {}",
                b.files,
                b.failed,
                path.display()
            );
        }
        Command::Experiment(c) => {
            let (mut cfg, out) = c.resolve()?;
            if c.features.is_none() {
                if let Some(p) = &c.input {
                    cfg.features = Some(p.clone());
                }
            }
            let features = commands::features_path(&cfg)?.to_path_buf();
            let r = commands::experiment(&cfg, &features, &out)?;
            println!(
                "{} protocol, {} events, {} folds, config {}",
                r.protocol.as_str(),
                r.events.len(),
                r.fold_count,
                r.config_digest
            );
            for kt in &r.kernels {
                if let Some(last) = kt.trace.steps.last() {
                    println!("{}: f1 {:.4} at k = {}", kt.kernel, last.f1_mean, last.k);
                }
            }
        }
        Command::Report(c) => {
            let (cfg, out) = c.resolve()?;
            let dir = commands::input_path(&cfg, "report directory (--input or paths.input)")?;
            let features = commands::features_path(&cfg)?;
            let r = commands::report(dir, features, &out)?;
            println!(
                "rendered {} kernel(s) to {}",
                r.kernels.len(),
                out.display()
            );
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
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
