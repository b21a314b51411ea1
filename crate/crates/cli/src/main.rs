use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mixline_core::pipeline::{self, ExperimentConfig};
use mixline_core::{Error, EvalReport};

#[derive(Parser)]
#[command(
    name = "mixline",
    version,
    about = "Fault location on mixed overhead/cable lines from R-X image texture"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate every training and test fault and write the R-X images.
    Simulate(Common),
    /// Extract texture features from the stored training images into CSVs.
    Featurize(Common),
    /// Cross-validate the model suite and dump the best model per section.
    Train(Common),
    /// Score the best models on the test images and write the reports.
    Evaluate(Common),
    /// Run all four stages.
    RunAll(Common),
}

#[derive(Args)]
struct Common {
    /// TOML experiment config; built-in defaults when omitted (then --seed is required).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn resolve(&self) -> Result<(ExperimentConfig, PathBuf), Error> {
        let mut cfg = match (&self.config, self.seed) {
            (Some(path), _) => ExperimentConfig::load(path)?,
            (None, Some(seed)) => ExperimentConfig::with_seed(seed),
            (None, None) => {
                return Err(Error::Config(
                    "pass --config or --seed; the seed is mandatory".into(),
                ))
            }
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        let out = self
            .out
            .clone()
            .or_else(|| cfg.output_dir.clone())
            .ok_or_else(|| {
                Error::Config("no output directory: pass --out or set output_dir".into())
            })?;
        Ok((cfg, out))
    }
}

fn summarize(r: &EvalReport) {
    println!(
        "{:<8} best {:<24} cv rmse {:.6}  max test error {:.3}%",
        r.section.as_str(),
        r.best_variant.name(),
        r.best_rmse(),
        r.max_percent_error()
    );
}

type Stage = fn(&ExperimentConfig, &Path) -> Result<(), Error>;

fn run(cmd: &Command) -> Result<(), Error> {
    let (common, stage): (&Common, Stage) = match cmd {
        Command::Simulate(c) => (c, |cfg, out| {
            let n = pipeline::simulate(cfg, out)?;
            println!("wrote {n} images to {}", out.join("images").display());
            Ok(())
        }),
        Command::Featurize(c) => (c, |cfg, out| {
            let (oh, cb) = pipeline::featurize(cfg, out)?;
            println!(
                "wrote {} overhead and {} cable feature rows",
                oh.len(),
                cb.len()
            );
            Ok(())
        }),
        Command::Train(c) => (c, |cfg, out| {
            for o in pipeline::train(cfg, out)? {
                println!("{:<8} best {}", o.section.as_str(), o.best.spec.variant);
            }
            Ok(())
        }),
        Command::Evaluate(c) => (c, |cfg, out| {
            let (oh, cb) = pipeline::evaluate(cfg, out)?;
            summarize(&oh);
            summarize(&cb);
            Ok(())
        }),
        Command::RunAll(c) => (c, |cfg, out| {
            let r = pipeline::run_experiment(cfg, out)?;
            summarize(&r.overhead);
            summarize(&r.cable);
            println!("reports in {}", out.join("reports").display());
            Ok(())
        }),
    };
    let (cfg, out) = common.resolve()?;
    stage(&cfg, &out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
