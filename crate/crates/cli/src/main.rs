/// println! that ignores a closed stdout.
macro_rules! say {
    ($($t:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout(), $($t)*);
    }};
}

mod commands;
mod error;
mod resolve;
mod run;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::{CliError, EXIT_FAIL, EXIT_PASS};
use crate::resolve::Resolver;
use crate::settings::Settings;

#[derive(Debug, Parser)]
#[command(name = "islt", version, about = "Inverse-stable-Lévy-time kernels, lattice SIE simulation and Hölder fits")]
struct Cli {
    /// TOML configuration file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Root directory for results/<run-id>/.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Run directory name (default: command plus a hash of the resolved
    /// configuration).
    #[arg(long, global = true)]
    run_id: Option<String>,

    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args, Default)]
pub struct ModelArgs {
    /// Stable index as 1, 1/2, 1/4, 1/8 or 1/2^k.
    #[arg(long, conflicts_with = "k")]
    pub beta: Option<String>,

    /// Exponent k in β = 1/2^k.
    #[arg(long)]
    pub k: Option<u32>,

    /// Spatial dimension.
    #[arg(long)]
    pub d: Option<usize>,
}

#[derive(Debug, Clone, Args, Default)]
pub struct SimArgs {
    /// Lattice step δ.
    #[arg(long)]
    pub delta: Option<f64>,

    /// Truncation box half-width l.
    #[arg(long)]
    pub radius: Option<f64>,

    /// Time horizon T.
    #[arg(long)]
    pub horizon: Option<f64>,

    /// Number of time steps M.
    #[arg(long)]
    pub steps: Option<usize>,

    /// Diffusion coefficient: zero, const:c, linear:c, sin:c, sqrt:c.
    #[arg(long)]
    pub a: Option<String>,

    /// Initial condition: zero, const:c, gaussian:center,width, cosine:frequency.
    #[arg(long)]
    pub u0: Option<String>,

    #[arg(long)]
    pub seed: Option<u64>,

    #[arg(long)]
    pub replicas: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    L2,
    Temporal,
    Spatial,
    Dde,
    Limit,
    Divergence,
    Normalization,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build (or load from the cache) a lattice kernel table and check its
    /// row sums.
    Kernel {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        delta: Option<f64>,
        /// Comma-separated times.
        #[arg(long, value_delimiter = ',')]
        times: Option<Vec<f64>>,
        /// Per-axis radius in lattice steps (default: 1e-9 tail mass).
        #[arg(long)]
        radius_steps: Option<usize>,
        /// Maximum number of stored entries.
        #[arg(long)]
        budget: Option<usize>,
    },
    /// Run one kernel-estimate suite.
    Verify {
        suite: Suite,
        #[command(flatten)]
        model: ModelArgs,
        /// Lattice step (dde, normalization).
        #[arg(long)]
        delta: Option<f64>,
        /// Lattice steps (l2, limit).
        #[arg(long, value_delimiter = ',')]
        deltas: Option<Vec<f64>>,
        /// Per-step tolerances (limit).
        #[arg(long, value_delimiter = ',')]
        tolerances: Option<Vec<f64>>,
        /// Time (dde, limit, divergence).
        #[arg(long)]
        t: Option<f64>,
        /// Point (dde, limit).
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        x: Option<Vec<f64>>,
        /// β values compared by the spatial suite.
        #[arg(long, value_delimiter = ',')]
        compare: Option<Vec<String>>,
    },
    /// Simulate the truncated SIE and report moment diagnostics.
    Simulate {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        sim: SimArgs,
        /// Run this many Picard iterations instead of the scheme (d = 1).
        #[arg(long)]
        picard: Option<usize>,
        /// Number of replicas written as field CSVs.
        #[arg(long)]
        save_fields: Option<usize>,
        /// Also write saved fields in binary form.
        #[arg(long)]
        binary: bool,
    },
    /// Simulate on the Hölder grid and fit increment-moment slopes.
    Holder {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        sim: SimArgs,
        /// Slope tolerance.
        #[arg(long)]
        tolerance: Option<f64>,
    },
    /// Lattice-to-continuum kernel ratios for decreasing δ.
    Converge {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        t: Option<f64>,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        x: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        deltas: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        tolerances: Option<Vec<f64>>,
    },
}

fn execute(cli: Cli) -> Result<bool, CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    }
    let settings = match &cli.config {
        Some(path) => Settings::load(path)?,
        None => Settings::default(),
    };
    let out = cli
        .out
        .clone()
        .or_else(|| settings.output.dir.clone().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("results"));
    let r = Resolver {
        settings: &settings,
        out,
        run_id: cli.run_id.clone(),
    };
    match cli.command {
        Command::Kernel {
            model,
            delta,
            times,
            radius_steps,
            budget,
        } => commands::kernel::run(&r, &model, delta, times, radius_steps, budget),
        Command::Verify {
            suite,
            model,
            delta,
            deltas,
            tolerances,
            t,
            x,
            compare,
        } => commands::verify::run(
            &r,
            suite,
            &model,
            commands::verify::VerifyArgs {
                delta,
                deltas,
                tolerances,
                t,
                x,
                compare,
            },
        ),
        Command::Simulate {
            model,
            sim,
            picard,
            save_fields,
            binary,
        } => commands::simulate::run(&r, &model, &sim, picard, save_fields, binary),
        Command::Holder {
            model,
            sim,
            tolerance,
        } => commands::holder::run(&r, &model, &sim, tolerance),
        Command::Converge {
            model,
            t,
            x,
            deltas,
            tolerances,
        } => commands::converge::run(&r, &model, t, x, deltas, tolerances),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            let code = if e.use_stderr() { error::EXIT_USAGE } else { EXIT_PASS };
            return ExitCode::from(code as u8);
        }
    };
    match execute(cli) {
        Ok(true) => ExitCode::from(EXIT_PASS as u8),
        Ok(false) => ExitCode::from(EXIT_FAIL as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
