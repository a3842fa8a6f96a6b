use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rom_tools::commands;
use rom_tools::config::PipelineConfig;
use rom_tools::pipeline::{self, Mode};
use rom_tools::{ToolError, ToolResult};

/// Reduced-order models of geometrically nonlinear beams.
#[derive(Parser)]
#[command(name = "romtool", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Pipeline configuration (TOML).
    #[arg(short, long)]
    config: PathBuf,
    /// Override any configuration key, e.g. `--set training.tau=1e-2`.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory (`output.directory`).
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Training seed (`training.seed`).
    #[arg(long)]
    seed: Option<u64>,
    /// Load seed (`load.seed`).
    #[arg(long)]
    load_seed: Option<u64>,
    /// Relative ECSW tolerance (`training.tau`).
    #[arg(long)]
    tau: Option<f64>,
    /// Vibration modes computed (`basis.modes`).
    #[arg(long)]
    modes: Option<usize>,
    /// Modes kept by static participation (`basis.smpf_top_k`).
    #[arg(long)]
    smpf_top_k: Option<usize>,
    /// Load duration in seconds (`load.duration`).
    #[arg(long)]
    duration: Option<f64>,
    /// Overall sound pressure level in dB (`load.oaspl_db`).
    #[arg(long)]
    oaspl_db: Option<f64>,
}

impl Common {
    fn load(&self) -> ToolResult<PipelineConfig> {
        let mut overrides = Vec::new();
        let mut flag = |key: &str, v: Option<String>| {
            if let Some(v) = v {
                overrides.push(format!("{key}={v}"));
            }
        };
        flag("training.seed", self.seed.map(|v| v.to_string()));
        flag("load.seed", self.load_seed.map(|v| v.to_string()));
        flag("training.tau", self.tau.map(toml_float));
        flag("basis.modes", self.modes.map(|v| v.to_string()));
        flag("basis.smpf_top_k", self.smpf_top_k.map(|v| v.to_string()));
        flag("load.duration", self.duration.map(toml_float));
        flag("load.oaspl_db", self.oaspl_db.map(toml_float));
        overrides.extend(self.overrides.iter().cloned());
        let mut cfg = PipelineConfig::load_with(&self.config, &overrides)?;
        if let Some(dir) = &self.output {
            cfg.output.directory = dir.clone();
        }
        Ok(cfg)
    }
}

fn toml_float(x: f64) -> String {
    let s = format!("{x:?}");
    if s.contains(['.', 'e', 'n', 'i']) {
        s
    } else {
        format!("{s}.0")
    }
}

#[derive(Subcommand)]
enum Command {
    /// Modes, static participation, modal derivatives and the reduction basis.
    BuildBasis(Common),
    /// Training snapshots and the reduced mesh.
    TrainEcsw {
        #[command(flatten)]
        common: Common,
        /// Reuse a matching snapshot archive in the output directory.
        #[arg(long)]
        reuse_snapshots: bool,
    },
    /// Reduced tensors in the V and W bases.
    Identify {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "eed-ecsw")]
        mode: Mode,
    },
    /// Time integration of the W-basis ROM.
    Integrate {
        #[command(flatten)]
        common: Common,
        /// Continue from checkpoint.txt and the stored load.
        #[arg(long)]
        resume: bool,
        /// Write a checkpoint every N steps.
        #[arg(long, default_value_t = 0)]
        checkpoint_every: usize,
        /// Stop after N steps; continue later with --resume.
        #[arg(long)]
        steps: Option<usize>,
        /// Also integrate the full model.
        #[arg(long)]
        hfm: bool,
    },
    /// Welch spectra of the stored trajectories.
    Psd(Common),
    /// All stages in one run, with a benchmark report.
    Pipeline {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "eed-ecsw")]
        mode: Mode,
    },
    /// Reduced mesh and identification over several tolerances.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Comma-separated tolerances.
        #[arg(long, value_delimiter = ',', default_values_t = [1e-4, 5e-4, 1e-3, 5e-3, 1e-2])]
        taus: Vec<f64>,
        /// Output CSV; defaults to sweep.csv in the output directory.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> ToolResult<()> {
    match cli.command {
        Command::BuildBasis(c) => {
            let cfg = c.load()?;
            let m = commands::build_basis(&cfg)?;
            println!("basis size {m} written to {}", cfg.output.directory.display());
        }
        Command::TrainEcsw {
            common,
            reuse_snapshots,
        } => {
            let cfg = common.load()?;
            let e = commands::train_ecsw(&cfg, reuse_snapshots)?;
            println!(
                "reduced mesh: {} elements, training residual {:e}, validation error {}",
                e.len(),
                e.training_residual,
                e.validation_error.map_or("none".into(), |v| format!("{v:e}"))
            );
        }
        Command::Identify { common, mode } => {
            let cfg = common.load()?;
            let id = commands::identify(&cfg, mode)?;
            println!(
                "{mode}: {} tangent queries, {} element evaluations, {:.3} s",
                id.stats.tangent_queries,
                id.element_evaluations,
                id.time.as_secs_f64()
            );
        }
        Command::Integrate {
            common,
            resume,
            checkpoint_every,
            steps,
            hfm,
        } => {
            let cfg = common.load()?;
            let opts = commands::IntegrateOptions {
                resume,
                checkpoint_every,
                max_steps: steps,
                hfm,
            };
            let steps = commands::integrate(&cfg, opts)?;
            println!("integrated to step {steps}");
        }
        Command::Psd(c) => {
            let cfg = c.load()?;
            let s = commands::psd(&cfg)?;
            commands::write_summary(std::io::stdout().lock(), &s)?;
        }
        Command::Pipeline { common, mode } => {
            let cfg = common.load()?;
            let report = pipeline::run_pipeline(&cfg, mode)?;
            report.write(std::io::stdout().lock())?;
        }
        Command::Sweep { common, taus, csv } => {
            let cfg = common.load()?;
            let path = csv.unwrap_or_else(|| cfg.output.directory.join("sweep.csv"));
            let rows = commands::sweep(&cfg, &taus, &path)?;
            for r in rows {
                println!(
                    "tau {:e}: {} elements ({:.2}%), error {:.3e}, {:.3} s, speedup {:.2}",
                    r.tau,
                    r.reduced_elements,
                    r.percent_elements,
                    r.ecsw_error,
                    r.t_id.as_secs_f64(),
                    r.speedup
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &ToolError) -> u8 {
    e.exit_code() as u8
}
