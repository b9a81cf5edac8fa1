//! Argument parsing and exit codes.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ssmkit_core::{ErrorKind, SsmError};

use crate::commands::{memory_table, Job};
use crate::config::{ConfigError, JobConfig};
use crate::parallel::resolve_threads;

#[derive(Debug, Parser)]
#[command(
    name = "ssmkit",
    version,
    about = "Spectral submanifolds of nonlinear mechanical systems"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the SSM and write ssm.json.
    Compute(JobArgs),
    /// Write backbone.csv.
    Backbone(JobArgs),
    /// Write invariance.csv and invariance_dist.csv for the configured orders.
    Invariance(JobArgs),
    /// Scan for near-resonances and write resonances.csv.
    Resonances(JobArgs),
    /// Print the dense Kronecker storage estimate per order.
    Memory(MemoryArgs),
    /// Write the figure data files.
    PlotData(JobArgs),
}

#[derive(Debug, Args)]
pub struct JobArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides `order` (and clears `orders`).
    #[arg(long)]
    pub order: Option<usize>,
    #[arg(long)]
    pub delta: Option<f64>,
    /// Overrides `outputs`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, env = "SSMKIT_THREADS")]
    pub threads: Option<usize>,
}

#[derive(Debug, Args)]
pub struct MemoryArgs {
    /// Takes `n` and the nonlinear orders from the model.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Degrees of freedom.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub order: Option<usize>,
    /// Count only a cubic nonlinearity.
    #[arg(long)]
    pub cubic_only: bool,
}

impl JobArgs {
    pub fn job(&self) -> Result<Job, ConfigError> {
        let mut cfg = JobConfig::load(&self.config)?;
        if let Some(o) = self.order {
            cfg.order = o;
            cfg.orders.clear();
        }
        if let Some(d) = self.delta {
            cfg.delta = d;
        }
        if let Some(out) = &self.out {
            cfg.outputs = out.clone();
        }
        cfg.validate()?;
        Ok(Job {
            cfg,
            threads: resolve_threads(self.threads),
        })
    }
}

fn memory(args: &MemoryArgs) -> anyhow::Result<String> {
    let cfg = args.config.as_deref().map(JobConfig::load).transpose()?;
    let order = args.order.or(cfg.as_ref().map(|c| c.order)).unwrap_or(17);
    let sys = cfg.as_ref().map(|c| c.model.build()).transpose()?;
    let n = match (args.n, &sys) {
        (Some(n), _) => n,
        (None, Some(s)) => s.n,
        (None, None) => return Err(ConfigError("memory needs --n or --config".into()).into()),
    };
    let present: Vec<usize> = if args.cubic_only {
        vec![3]
    } else if let Some(s) = &sys {
        let mut d: Vec<usize> = s.forces.iter().map(|f| f.exponents.degree()).collect();
        d.sort_unstable();
        d.dedup();
        d
    } else {
        (2..order).collect()
    };
    memory_table(n, order, &present)
}

pub fn run(cli: &Cli) -> anyhow::Result<()> {
    match &cli.command {
        Command::Compute(a) => {
            let path = a.job()?.compute()?;
            println!("wrote {}", path.display());
        }
        Command::Backbone(a) => {
            let path = a.job()?.backbone()?;
            println!("wrote {}", path.display());
        }
        Command::Invariance(a) => {
            let job = a.job()?;
            for r in job.invariance()? {
                println!("order {:>2}: delta_inv = {:.6e}", r.order, r.delta_inv);
            }
            println!("wrote {}", job.out_dir().join("invariance.csv").display());
        }
        Command::Resonances(a) => print!("{}", a.job()?.resonances()?),
        Command::Memory(a) => print!("{}", memory(a)?),
        Command::PlotData(a) => {
            for p in a.job()?.plot_data()? {
                println!("wrote {}", p.display());
            }
        }
    }
    Ok(())
}

/// 0 success, 2 config, 3 spectral, 4 resonance breakdown, 5 integration,
/// 1 anything else.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<ConfigError>() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<SsmError>() {
            return match e.kind() {
                ErrorKind::Input => 2,
                ErrorKind::Spectral => 3,
                ErrorKind::Resonance => 4,
                ErrorKind::Integration => 5,
            };
        }
    }
    1
}

pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
