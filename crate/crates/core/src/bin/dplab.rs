use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dplab::harness::{classify_prefix, run_protocol, ClassifierMode, FormulaPrefix, ProtocolConfig, ProtocolKind};
use dplab::Error;

#[derive(Parser)]
#[command(name = "dplab", version, about = "Refinement- and recoding-stability protocols")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// TV reconstructions of seeded phantoms.
    Imaging(RunArgs),
    /// Thin-barrier calibration and capacity classification.
    Barrier(RunArgs),
    /// Zero-temperature Glauber dynamics.
    Ising(RunArgs),
    /// Pointer-basis selection by decoherence.
    Pointer(RunArgs),
    /// Characteristic continuation across a horizon.
    Horizon(RunArgs),
    /// Pointclass of a quantifier prefix such as "forall x:R exists n:N [phi]".
    Classify {
        prefix: String,
        #[arg(long, value_enum, default_value = "strict")]
        mode: Mode,
        /// Print `Sigma^1_2` instead of `Σ¹₂`.
        #[arg(long)]
        ascii: bool,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for report.json, ssi.csv, sc.csv and metadata.json; without it
    /// the report is printed.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Strict,
    AsWritten,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidArgument(_) | Error::Parse { .. } | Error::Format(_) | Error::Io(_) => 2,
        Error::Quorum { .. } => 3,
        _ => 1,
    }
}

fn run(kind: ProtocolKind, args: RunArgs) -> Result<(), Error> {
    let mut cfg = ProtocolConfig::from_path(&args.config).map_err(|e| match e {
        Error::Io(io) => Error::InvalidArgument(format!("{}: {io}", args.config.display())),
        e => e,
    })?;
    if cfg.protocol != kind {
        return Err(Error::InvalidArgument(format!(
            "config is for protocol '{}', not '{}'",
            cfg.protocol.name(),
            kind.name()
        )));
    }
    if let Some(seed) = args.seed {
        cfg = cfg.with_seed(seed);
    }
    let report = run_protocol(&cfg)?;
    match args.out {
        Some(dir) => {
            report.write(&dir)?;
            println!(
                "{}: {} of {} members, verdict {:?} (ssi {:?}, sc {:?})",
                report.protocol, report.survivors, report.ensemble_size, report.verdict, report.ssi_verdict, report.sc_verdict
            );
            println!("wrote {}", dir.display());
        }
        None => println!("{}", report.to_json()),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Imaging(a) => run(ProtocolKind::Imaging, a),
        Command::Barrier(a) => run(ProtocolKind::Barrier, a),
        Command::Ising(a) => run(ProtocolKind::Ising, a),
        Command::Pointer(a) => run(ProtocolKind::Pointer, a),
        Command::Horizon(a) => run(ProtocolKind::Horizon, a),
        Command::Classify { prefix, mode, ascii } => FormulaPrefix::parse(&prefix).map(|f| {
            let mode = match mode {
                Mode::Strict => ClassifierMode::Strict,
                Mode::AsWritten => ClassifierMode::AsWritten,
            };
            let c = classify_prefix(&f, mode);
            println!("{}", if ascii { c.ascii() } else { c.to_string() });
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("dplab: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
