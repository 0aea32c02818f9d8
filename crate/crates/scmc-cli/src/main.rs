//! `scmc`: one pipeline per invocation, driven by a JSON run configuration
//! (or a built-in preset) with a few override flags. Every run leaves a
//! resolved config and a hashed manifest next to its outputs.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use scmc::config::{
    preset_bound_entangled_3x3, preset_demo_1d, preset_demo_qubit, preset_otj_trine,
    preset_trine_content, PipelineSpec, RunConfig,
};
use scmc::pipelines;
use scmc::{Error, Result};

#[derive(Parser)]
#[command(
    name = "scmc",
    version,
    about = "Sequentially constrained Monte Carlo sampling of quantum states"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// JSON run configuration; a built-in preset is used when omitted.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Override the RNG seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; defaults to the config's output_dir, then
    /// runs/<pipeline>.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads; results are identical for any value.
    #[arg(long)]
    threads: Option<usize>,
    /// Override the particle count N_s.
    #[arg(long)]
    particles: Option<usize>,
    /// Override the bridge step count N_τ.
    #[arg(long)]
    steps: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Search for bound entangled states (PPT plus CCNR violation).
    BoundEntangled(CommonArgs),
    /// Sample a Dirichlet target over the tempering bridge.
    TargetSample(CommonArgs),
    /// Estimate λ-region sizes and contents with the OTJ protocol.
    Otj(CommonArgs),
    /// Illustrative runs in one dimension or on the qubit trine disk.
    Demo {
        /// Which demo to run when no config file is given.
        #[arg(value_enum)]
        variant: Option<DemoVariant>,
        #[command(flatten)]
        common: CommonArgs,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DemoVariant {
    #[value(name = "1d")]
    OneD,
    Qubit,
}

impl Command {
    fn common(&self) -> &CommonArgs {
        match self {
            Command::BoundEntangled(c) | Command::TargetSample(c) | Command::Otj(c) => c,
            Command::Demo { common, .. } => common,
        }
    }

    fn default_config(&self) -> Result<RunConfig> {
        match self {
            Command::BoundEntangled(_) => Ok(preset_bound_entangled_3x3()),
            Command::TargetSample(_) => Ok(preset_trine_content(10_000)),
            Command::Otj(_) => Ok(preset_otj_trine()),
            Command::Demo { variant, .. } => match variant {
                Some(DemoVariant::OneD) => Ok(preset_demo_1d()),
                Some(DemoVariant::Qubit) => Ok(preset_demo_qubit()),
                None => Err(Error::Config(
                    "demo needs a variant (1d or qubit) when no --config is given".into(),
                )),
            },
        }
    }

    fn accepts(&self, pipeline: &PipelineSpec) -> bool {
        match (self, pipeline) {
            (Command::BoundEntangled(_), PipelineSpec::BoundEntangled(_))
            | (Command::TargetSample(_), PipelineSpec::TargetSample(_))
            | (Command::Otj(_), PipelineSpec::Otj(_)) => true,
            (Command::Demo { variant, .. }, PipelineSpec::Demo1d(_)) => {
                !matches!(variant, Some(DemoVariant::Qubit))
            }
            (Command::Demo { variant, .. }, PipelineSpec::DemoQubit(_)) => {
                !matches!(variant, Some(DemoVariant::OneD))
            }
            _ => false,
        }
    }
}

fn real_main() -> Result<()> {
    let cli = Cli::parse();
    let common = cli.command.common();

    if let Some(threads) = common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Error::Config(format!("cannot size the thread pool: {e}")))?;
    }

    let mut config = match &common.config {
        Some(path) => RunConfig::from_path(path)?,
        None => cli.command.default_config()?,
    };
    if !cli.command.accepts(&config.pipeline) {
        return Err(Error::Config(format!(
            "config selects pipeline {}, which this subcommand does not run",
            config.pipeline.name()
        )));
    }
    if let Some(seed) = common.seed {
        config.engine.seed = seed;
    }
    if let Some(n) = common.particles {
        config.engine.n_particles = n;
    }
    if let Some(n) = common.steps {
        config.engine.n_steps = n;
    }
    config.validate()?;

    let out = common
        .out
        .clone()
        .or_else(|| config.output_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("runs").join(config.pipeline.name()));

    let summary = pipelines::run(&config, &out)?;
    for line in &summary.lines {
        println!("{line}");
    }
    println!(
        "wrote {} files to {}",
        summary.manifest.outputs.len() + 1, // plus the manifest itself
        out.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    match real_main() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
