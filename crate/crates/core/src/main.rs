use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use taskguard::experiment::{format_summary, run, ExperimentConfig, Mode, Preset};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PresetArg {
    Paper,
    Desk,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Full,
    DatagenOnly,
    TrainOnly,
    EvalOnly,
    Sweep,
}

/// Fake sensing-task detection experiments.
#[derive(Debug, Parser)]
#[command(name = "taskguard", version)]
struct Cli {
    /// JSON config layered over the preset.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "paper")]
    preset: PresetArg,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long)]
    rounds: Option<usize>,
    /// Base seed for dataset synthesis and GAN training.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print the resolved config as JSON and exit.
    #[arg(long)]
    print_config: bool,
}

fn resolve(cli: &Cli) -> taskguard::Result<ExperimentConfig> {
    let preset = match cli.preset {
        PresetArg::Paper => Preset::Paper,
        PresetArg::Desk => Preset::Desk,
    };
    let mut config = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| taskguard::Error::Io {
                path: path.clone(),
                source: e,
            })?;
            ExperimentConfig::from_json_over(preset, &text)?
        }
        None => ExperimentConfig::preset(preset),
    };
    if let Some(m) = cli.mode {
        config.mode = match m {
            ModeArg::Full => Mode::Full,
            ModeArg::DatagenOnly => Mode::DatagenOnly,
            ModeArg::TrainOnly => Mode::TrainOnly,
            ModeArg::EvalOnly => Mode::EvalOnly,
            ModeArg::Sweep => Mode::Sweep,
        };
    }
    if let Some(r) = cli.rounds {
        config.rounds = r;
    }
    if let Some(s) = cli.seed {
        config.generation.rng_seed = s;
        config.gan.seed = s;
    }
    if let Some(o) = &cli.out {
        config.output_dir = o.clone();
    }
    Ok(config)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = match resolve(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if cli.print_config {
        match serde_json::to_string_pretty(&config) {
            Ok(s) => {
                println!("{s}");
                return ExitCode::SUCCESS;
            }
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::FAILURE;
            }
        }
    }
    match run(&config) {
        Ok(outcome) => {
            if let Some(report) = &outcome.report {
                print!("{}", format_summary(report));
            }
            if let Some(sweep) = &outcome.sweep {
                for (rank, &i) in sweep.ranking.iter().enumerate() {
                    let p = &sweep.points[i];
                    println!(
                        "{:>2}. batch {:>2} epochs {:>4} (trained {:>4})  probe accuracy {:.4}{}",
                        rank + 1,
                        p.batch_size,
                        p.epochs,
                        p.trained_epochs,
                        p.probe_accuracy,
                        if p.paper_choice { "  *" } else { "" }
                    );
                }
            }
            for f in &outcome.failed {
                eprintln!("round {} excluded: {}", f.round, f.error);
            }
            println!("artifacts written to {}", config.output_dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
