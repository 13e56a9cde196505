use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pefnn_core::io::{Dtype, RunConfig};
use pefnn_core::training::Strategy;
use pefnn_core::Error;

mod eval;
mod gen;
mod train;

#[derive(Parser)]
#[command(name = "pefnn", version, about = "Momentum-conserving Fourier neural network pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate Navier-Stokes vorticity trajectories.
    GenNs(GenArgs),
    /// Generate radial dam-break shallow-water trajectories.
    GenSwe(GenArgs),
    /// Generate rain-driven flood trajectories on a synthetic terrain.
    GenFlood(GenArgs),
    /// Train a model on a dataset and save the best checkpoint.
    Train(TrainArgs),
    /// Score autoregressive rollouts of a checkpoint against a dataset.
    Eval(EvalArgs),
    /// Like `eval`, optionally dumping the predicted trajectories.
    Rollout(RolloutArgs),
    /// Evaluate a checkpoint unchanged on a finer grid than it was trained on.
    Superres(SuperresArgs),
    /// Finite-difference check of the analytic gradients on a tiny model.
    Gradcheck(GradcheckArgs),
}

#[derive(Args)]
struct GenArgs {
    /// TOML run configuration; built-in defaults when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Overrides `data.trajectories`.
    #[arg(long)]
    trajectories: Option<usize>,
    /// Overrides the solver seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    dtype: Option<DtypeArg>,
}

#[derive(Clone, Copy, ValueEnum)]
enum DtypeArg {
    F32,
    F64,
}

impl From<DtypeArg> for Dtype {
    fn from(d: DtypeArg) -> Dtype {
        match d {
            DtypeArg::F32 => Dtype::F32,
            DtypeArg::F64 => Dtype::F64,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Markov,
    Recurrent,
}

impl From<StrategyArg> for Strategy {
    fn from(s: StrategyArg) -> Strategy {
        match s {
            StrategyArg::Markov => Strategy::Markov,
            StrategyArg::Recurrent => Strategy::Recurrent,
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    data: PathBuf,
    /// Checkpoint to write.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum)]
    strategy: Option<StrategyArg>,
    /// Overrides `train.epochs`; 0 saves the initialization.
    #[arg(long)]
    epochs: Option<usize>,
    /// Continue from a checkpoint's saved optimizer state.
    #[arg(long)]
    resume: Option<PathBuf>,
    /// Stop after this many epochs in this invocation.
    #[arg(long)]
    stop_after: Option<usize>,
    /// History CSV; defaults to `<out>.history.csv`.
    #[arg(long)]
    history: Option<PathBuf>,
    #[arg(long)]
    quiet: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    All,
    Train,
    Valid,
    Test,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Supplies the split fractions and evaluation window.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "all")]
    split: SplitArg,
    /// First slice of the rollout.
    #[arg(long)]
    start: Option<usize>,
    /// Rollout length; the remaining horizon when absent.
    #[arg(long)]
    steps: Option<usize>,
    /// Report CSV (`step,l_rmse,l_m`), plus a `.meta.json` sidecar.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RolloutArgs {
    #[command(flatten)]
    eval: EvalArgs,
    /// Write the predicted trajectories in dataset format (f64).
    #[arg(long)]
    dump: Option<PathBuf>,
}

#[derive(Args)]
struct SuperresArgs {
    #[command(flatten)]
    eval: EvalArgs,
    /// Grid size the checkpoint was trained on.
    #[arg(long)]
    train_res: usize,
}

#[derive(Args)]
struct GradcheckArgs {
    /// TOML run configuration; only the `[gradcheck]` table is used.
    #[arg(long)]
    config: Option<PathBuf>,
}

fn load_config(path: Option<&PathBuf>) -> pefnn_core::Result<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    }
}

/// 2 config, 3 data, 4 numeric, 5 I/O.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::ConfigMismatch(_) | Error::ModeOverflow { .. } => 2,
        Error::Data(_) | Error::Checksum { .. } | Error::ShapeMismatch(_) | Error::ZeroReference { .. } | Error::NoGroupAxis => 3,
        Error::Io { .. } => 5,
        Error::ImaginaryResidue { .. }
        | Error::NonFinite(_)
        | Error::NonFiniteEpoch { .. }
        | Error::Instability(_)
        | Error::DryCell { .. }
        | Error::NegativeDepth { .. }
        | Error::TapeConsumed => 4,
    }
}

fn run(cli: Cli) -> pefnn_core::Result<ExitCode> {
    match cli.command {
        Command::GenNs(a) => gen::run(gen::Kind::Ns, &a),
        Command::GenSwe(a) => gen::run(gen::Kind::Swe, &a),
        Command::GenFlood(a) => gen::run(gen::Kind::Flood, &a),
        Command::Train(a) => train::run(&a),
        Command::Eval(a) => eval::run(&a, None, None),
        Command::Rollout(a) => eval::run(&a.eval, a.dump.as_deref(), None),
        Command::Superres(a) => eval::run(&a.eval, None, Some(a.train_res)),
        Command::Gradcheck(a) => {
            let cfg = load_config(a.config.as_ref())?;
            let report = pefnn_core::gradcheck::gradcheck(&cfg.gradcheck)?;
            print!("{}", report.render());
            Ok(if report.passed() { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
