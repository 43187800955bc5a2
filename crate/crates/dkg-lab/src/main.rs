use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dkg_lab::config::RunConfig;
use dkg_lab::{runner, LabError};

/// Numerical lab for the 2D Dirac/Klein-Gordon system.
#[derive(Parser)]
#[command(name = "dkg-lab", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags override config-file keys, which override preset defaults.
#[derive(Args, Clone, Default)]
struct Overrides {
    /// Config file (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<String>,
    /// Grid points per axis (power of two).
    #[arg(long)]
    n: Option<usize>,
    /// Box half width L.
    #[arg(long)]
    half_width: Option<f64>,
    /// Splitting step.
    #[arg(long)]
    dt: Option<f64>,
    /// Final time.
    #[arg(long)]
    t_end: Option<f64>,
    /// Steps between diagnostic samples.
    #[arg(long)]
    sample_every: Option<usize>,
    /// Spinor amplitude.
    #[arg(long)]
    amplitude: Option<f64>,
    /// Scalar amplitude.
    #[arg(long)]
    kg_amplitude: Option<f64>,
    /// Data seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Randomized trials for identity suites.
    #[arg(long)]
    trials: Option<usize>,
    /// Samples between periodic snapshots (0 = final only).
    #[arg(long)]
    snapshot_every: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the randomized pointwise and grid identity suites.
    Identities(Overrides),
    /// Evolve the free flows and fit the sup-norm decay rates.
    FreeDecay(Overrides),
    /// Coupled small-data run with the full diagnostics ledger.
    DkgSmall(Overrides),
    /// Step-size self-convergence and transformation-residual refinement.
    Convergence(Overrides),
    /// Resume a run from a snapshot.
    Resume {
        /// Snapshot to resume from.
        #[arg(long)]
        snapshot: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Print a snapshot's header and field inventory.
    InspectSnapshot {
        /// Snapshot file.
        snapshot: PathBuf,
    },
}

fn effective_config(preset: &str, ov: &Overrides) -> Result<RunConfig, LabError> {
    let mut cfg = match &ov.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::preset(preset)?,
    };
    if let Some(out) = &ov.out {
        cfg.output.dir = out.clone();
    }
    if let Some(n) = ov.n {
        cfg.grid.n = n;
    }
    if let Some(l) = ov.half_width {
        cfg.grid.half_width = l;
    }
    if let Some(dt) = ov.dt {
        cfg.integrator.dt = dt;
    }
    if let Some(t_end) = ov.t_end {
        cfg.integrator.t_end = t_end;
    }
    if let Some(se) = ov.sample_every {
        cfg.integrator.sample_every = se;
    }
    if let Some(a) = ov.amplitude {
        cfg.data.amplitude = a;
    }
    if let Some(a) = ov.kg_amplitude {
        cfg.data.kg_amplitude = a;
    }
    if let Some(s) = ov.seed {
        cfg.data.seed = s;
    }
    if let Some(t) = ov.trials {
        cfg.diagnostics.trials = t;
    }
    if let Some(s) = ov.snapshot_every {
        cfg.output.snapshot_every = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn init_workers() {
    // DKG_WORKERS caps the worker pool used by field operations.
    if let Ok(value) = std::env::var("DKG_WORKERS") {
        if let Ok(n) = value.parse::<usize>() {
            if n >= 1 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}

fn run() -> Result<(), LabError> {
    init_workers();
    let cli = Cli::parse();
    match cli.command {
        Command::Identities(ov) => {
            let cfg = effective_config("identities", &ov)?;
            runner::run_identities(&cfg)?;
        }
        Command::FreeDecay(ov) => {
            let cfg = effective_config("free-decay", &ov)?;
            let summary = runner::run_free_decay(&cfg)?;
            for (name, fit) in &summary.fits {
                println!(
                    "decay fit {name}: slope {:.4} (rms {:.2e}, {} samples)",
                    fit.slope,
                    fit.residual_rms,
                    fit.samples.len()
                );
            }
        }
        Command::DkgSmall(ov) => {
            let cfg = effective_config("dkg-small", &ov)?;
            let summary = runner::run_coupled(&cfg, None)?;
            for (name, fit) in &summary.fits {
                println!(
                    "decay fit {name}: slope {:.4} (rms {:.2e}, {} samples)",
                    fit.slope,
                    fit.residual_rms,
                    fit.samples.len()
                );
            }
            if let Some(trace) = &summary.scatter {
                println!(
                    "scattering differences (dirac L2): {:?}",
                    trace.dirac_l2.iter().map(|d| format!("{d:.3e}")).collect::<Vec<_>>()
                );
            }
        }
        Command::Convergence(ov) => {
            let cfg = effective_config("convergence", &ov)?;
            runner::run_convergence(&cfg)?;
        }
        Command::Resume { snapshot, overrides } => {
            let cfg = effective_config("dkg-small", &overrides)?;
            let summary = runner::run_coupled(&cfg, Some(&snapshot))?;
            println!("resumed to t = {}", summary.final_t);
        }
        Command::InspectSnapshot { snapshot } => {
            runner::inspect_snapshot(&snapshot)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
