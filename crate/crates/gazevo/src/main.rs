use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use gazevo::core::classify::Target;
use gazevo::core::gaze::PolicyParams;
use gazevo::core::session::InteractionMode;
use gazevo::core::simulate::{simulate, SimulationConfig};
use gazevo::export::{export_genome, load_genome};
use gazevo::gateway::{ServeConfig, Server};
use gazevo::mesh_io::MeshFormat;
use gazevo::replay::replay_dir;
use gazevo::sources::GazeSourceDescriptor;

#[derive(Parser)]
#[command(name = "gazevo", version, about = "Evolve 3D objects by looking at them")]
struct Cli {
    #[command(subcommand)]
    command: Verb,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Gaze,
    Mouse,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Stl,
    Obj,
}

#[derive(Subcommand)]
enum Verb {
    /// Run a live session for one UI client.
    Serve {
        #[arg(long, default_value_t = 7878)]
        port: u16,
        /// Directory holding one sub-directory per subject.
        #[arg(long, default_value = "sessions")]
        store: PathBuf,
        #[arg(long, default_value_t = 1)]
        subject: u64,
        /// pointer | tracker:HOST:PORT | replay:PATH | replay-realtime:PATH | synthetic:TARGET[:SEED]
        #[arg(long, default_value = "pointer")]
        gaze_source: String,
        /// Condition shown first.
        #[arg(long, value_enum, default_value_t = Mode::Gaze)]
        mode: Mode,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 16)]
        resolution: usize,
    },
    /// Run one directed-design trial headlessly with the synthetic viewer.
    Simulate {
        /// e.g. small-blue-oval
        #[arg(long)]
        target: Target,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 200)]
        max_gens: u32,
        /// Probability of glancing at a random cell.
        #[arg(long, default_value_t = 0.05)]
        epsilon: f64,
        /// Fixation jitter in cell widths.
        #[arg(long, default_value_t = 0.1)]
        sigma: f64,
        #[arg(long, default_value_t = 16)]
        resolution: usize,
        /// Write the full report as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-execute a recorded session and verify it.
    Replay { dir: PathBuf },
    /// Mesh a genome and write a printable file.
    Export {
        /// JSON file with one genome or a list (e.g. a snapshot's genomes.json).
        genome: PathBuf,
        /// Entry to use when the file holds a list.
        #[arg(long, default_value_t = 0)]
        index: usize,
        #[arg(long, default_value_t = 64)]
        resolution: usize,
        #[arg(long, value_enum, default_value_t = Format::Stl)]
        format: Format,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Verb::Serve { port, store, subject, gaze_source, mode, seed, resolution } => {
            let source: GazeSourceDescriptor = gaze_source.parse()?;
            let config = ServeConfig {
                port,
                store,
                subject_id: subject,
                source,
                first_mode: match mode {
                    Mode::Gaze => InteractionMode::Gaze,
                    Mode::Mouse => InteractionMode::Mouse,
                },
                seed,
                resolution,
                ..Default::default()
            };
            let server = Server::bind(config)?;
            eprintln!("listening on {}", server.local_addr());
            let summary = server.serve_one()?;
            println!(
                "session {} closed after {} commands (complete: {})",
                summary.session_dir.display(),
                summary.commands,
                summary.session_complete
            );
        }
        Verb::Simulate { target, seed, max_gens, epsilon, sigma, resolution, out } => {
            let mut config = SimulationConfig::new(target, seed, max_gens);
            config.policy = PolicyParams { epsilon, sigma, seed };
            config.engine.resolution = resolution;
            let report = simulate(&config)?;
            println!(
                "target {target} seed {seed}: {} after {} generations",
                if report.success { "success" } else { "no success" },
                report.generations
            );
            if let Some(out) = out {
                fs::write(&out, serde_json::to_vec_pretty(&report)?)
                    .with_context(|| format!("writing {}", out.display()))?;
            }
        }
        Verb::Replay { dir } => {
            let report = replay_dir(&dir)?;
            println!(
                "replayed {} commands: {} generations and {} snapshots identical",
                report.commands, report.generations, report.snapshots
            );
        }
        Verb::Export { genome, index, resolution, format, out } => {
            let text = fs::read_to_string(&genome).with_context(|| format!("reading {}", genome.display()))?;
            let genome = load_genome(&text, index)?;
            let format = match format {
                Format::Stl => MeshFormat::StlBinary,
                Format::Obj => MeshFormat::Obj,
            };
            let outcome = export_genome(&genome, resolution, format)?;
            if outcome.triangles == 0 {
                bail!("nothing to write");
            }
            fs::write(&out, &outcome.bytes).with_context(|| format!("writing {}", out.display()))?;
            println!("triangles {} volume_fraction {:.6}", outcome.triangles, outcome.volume_fraction);
        }
    }
    Ok(())
}
