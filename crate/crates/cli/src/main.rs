use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use derain_cli::{
    cmd_brisque, cmd_derain, cmd_eval, cmd_mask, cmd_scene, cmd_scorer, cmd_synth, CliError,
    DerainOutputs, Result, RunConfig,
};

/// Self-supervised single-image rain removal.
#[derive(Parser)]
#[command(name = "derain", version)]
struct Cli {
    /// key = value configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Extra `key=value` settings applied after the config file.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Detect rain pixels and write a binary mask PNG.
    Mask { input: PathBuf, out: PathBuf },
    /// Train on the input image and write the derained result.
    Derain {
        input: PathBuf,
        out: PathBuf,
        /// Use this mask instead of detecting one.
        #[arg(long)]
        mask: Option<PathBuf>,
        #[arg(long)]
        weights_in: Option<PathBuf>,
        #[arg(long)]
        weights_out: Option<PathBuf>,
        /// Training log CSV.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Score a directory of PNGs, optionally against same-named references.
    Eval {
        dir_in: PathBuf,
        out: PathBuf,
        #[arg(long)]
        gt: Option<PathBuf>,
    },
    /// Print the quality score of one image.
    Brisque {
        input: PathBuf,
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Overlay synthetic rain streaks and write the ground-truth mask.
    Synth {
        clean: PathBuf,
        out_rain: PathBuf,
        out_mask: PathBuf,
    },
    /// Write a procedural clean scene.
    Scene {
        out: PathBuf,
        #[arg(long, default_value_t = 128)]
        height: usize,
        #[arg(long, default_value_t = 128)]
        width: usize,
    },
    /// Write the built-in scorer model.
    Scorer { out: PathBuf },
    /// Print the effective configuration.
    Config,
}

fn run(cli: Cli) -> Result<String> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    for o in &cli.overrides {
        cfg.apply_override(o)?;
    }
    if let Some(seed) = cli.seed {
        cfg.set_seed(seed);
    }
    cfg.validate()?;
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    match cli.command {
        Command::Mask { input, out } => cmd_mask(&input, &out, &cfg),
        Command::Derain {
            input,
            out,
            mask,
            weights_in,
            weights_out,
            log,
        } => cmd_derain(
            &input,
            &out,
            &cfg,
            &DerainOutputs {
                mask,
                weights_in,
                weights_out,
                log,
            },
        ),
        Command::Eval { dir_in, out, gt } => {
            let rows = cmd_eval(&dir_in, gt.as_deref(), &out, &cfg)?;
            Ok(format!("wrote {} rows to {}\n", rows.len(), out.display()))
        }
        Command::Brisque { input, model } => cmd_brisque(&input, model.as_deref(), &cfg),
        Command::Synth {
            clean,
            out_rain,
            out_mask,
        } => cmd_synth(&clean, &out_rain, &out_mask, &cfg),
        Command::Scene { out, height, width } => cmd_scene(&out, height, width, &cfg),
        Command::Scorer { out } => cmd_scorer(&out),
        Command::Config => Ok(cfg.to_text()),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
