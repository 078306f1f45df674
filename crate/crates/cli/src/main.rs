use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use morphsynth::config::parse_config;
use morphsynth::hexmesh::HexMesh;
use morphsynth::synthesis::{replay, run_synthesis, RunOptions};

#[derive(Parser)]
#[command(name = "morphsynth", version, about = "Synthesis of contact-aided shape-morphing compliant mechanisms")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the hill climber on a problem file
    Synth {
        config: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// write an SVG frame of the incumbent every K iterations
        #[arg(long, value_name = "K", default_value_t = 0)]
        frames_every: usize,
    },
    /// Analyse a stored design once
    Replay {
        design: PathBuf,
        config: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Print the node and element listing of the configured mesh
    MeshDump { config: PathBuf },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Synth {
            config,
            output,
            seed,
            frames_every,
        } => {
            let cfg = parse_config(&config)?;
            let summary = run_synthesis(&cfg, &output, &RunOptions { seed, frames_every })?;
            for w in &summary.warnings {
                log::warn!("{w}");
            }
            let r = &summary.result;
            println!(
                "initial objective {:.6e}, best {:.6e} after {} iterations; results in {}",
                r.initial.objective,
                r.best.objective,
                r.history.len() - 1,
                output.display()
            );
        }
        Command::Replay { design, config, output } => {
            let cfg = parse_config(&config)?;
            let a = replay(&design, &cfg, &output)?;
            if let Some(f) = &a.candidate.diagnostics.failure {
                log::warn!("design is infeasible: {f}");
            }
            println!("objective {:.17e}; results in {}", a.candidate.objective, output.display());
        }
        Command::MeshDump { config } => {
            let cfg = parse_config(&config)?;
            let d = &cfg.domain;
            let mesh = HexMesh::generate_grid(d.cols, d.rows, d.edge_length).context("mesh generation")?;
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            mesh.write_listing(&mut lock)?;
            lock.flush()?;
        }
    }
    Ok(())
}
