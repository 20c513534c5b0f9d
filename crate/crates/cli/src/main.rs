use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use hp_plasticity::adaptivity::Mode;
use hp_plasticity::benchmark::{run, ExperimentConfig, OverkillMode};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    HUniform,
    PUniform,
    HAdaptive,
    HpAdaptive,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::HUniform => Mode::HUniform,
            ModeArg::PUniform => Mode::PUniform,
            ModeArg::HAdaptive => Mode::HAdaptive,
            ModeArg::HpAdaptive => Mode::HpAdaptive,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum OverkillArg {
    Final,
    PerLevel,
    Off,
}

impl From<OverkillArg> for OverkillMode {
    fn from(o: OverkillArg) -> Self {
        match o {
            OverkillArg::Final => OverkillMode::Final,
            OverkillArg::PerLevel => OverkillMode::PerLevel,
            OverkillArg::Off => OverkillMode::Off,
        }
    }
}

/// Convergence campaigns for the hp-adaptive elastoplasticity benchmark.
/// Flags override values from the configuration file.
#[derive(Debug, Parser)]
#[command(name = "hp-bench", version)]
struct Args {
    /// key = value configuration file
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Initial polynomial degree
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    levels: Option<usize>,
    /// Dörfler bulk parameter
    #[arg(long)]
    theta: Option<f64>,
    /// CSV output path
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    overkill: Option<OverkillArg>,
    /// Directory for per-level mesh exports
    #[arg(long)]
    mesh_dir: Option<PathBuf>,
    /// Directory for per-level estimator dumps
    #[arg(long)]
    estimator_dump_dir: Option<PathBuf>,
    /// Print solver iterations and level summaries to stderr
    #[arg(long)]
    verbose: bool,
}

fn config(args: &Args) -> hp_plasticity::Result<ExperimentConfig> {
    let mut c = match &args.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(m) = args.mode {
        c.mode = m.into();
    }
    if let Some(p) = args.p {
        c.p = p;
    }
    if let Some(l) = args.levels {
        c.levels = l;
    }
    if let Some(t) = args.theta {
        c.theta = t;
    }
    if let Some(o) = &args.out {
        c.out = o.clone();
    }
    if let Some(o) = args.overkill {
        c.overkill = o.into();
    }
    if let Some(d) = &args.mesh_dir {
        c.mesh_dir = Some(d.clone());
    }
    if let Some(d) = &args.estimator_dump_dir {
        c.estimator_dump_dir = Some(d.clone());
    }
    c.verbose |= args.verbose;
    c.validate()?;
    Ok(c)
}

fn main() -> ExitCode {
    let args = Args::parse();
    let cfg = match config(&args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let verbose = cfg.verbose;
    let result = run(&cfg, |r| {
        if verbose {
            eprintln!(
                "level {:2}  elements {:6}  dof {:8}  newton {:2}  eta {:.4e}  marked {}",
                r.level,
                r.mesh.num_elements(),
                r.dofs,
                r.solution.iterations,
                r.report.eta_sq.sqrt(),
                r.marked.len()
            );
        }
    });
    match result {
        Ok(c) => {
            if let Some(msg) = &c.overkill_failure {
                eprintln!("warning: overkill reference failed, error columns left empty: {msg}");
            }
            println!("wrote {} rows to {}", c.rows.len(), cfg.out.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
