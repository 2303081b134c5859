use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use sill_koopman::experiments::{error_line, exit_code, run, Command, RunContext};
use sill_koopman::SillError;

#[derive(Parser, Debug)]
#[command(name = "sill", version, about = "SILL dictionary fitting and closure experiments")]
struct Cli {
    /// JSON config for the command. Relative paths inside it resolve against its directory.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// RNG seed; overrides any seed in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads (default: all cores). Results do not depend on this.
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Cmd {
    /// Fit a continuous-time generator from snapshot data.
    Fit,
    /// Fit a discrete-time operator from snapshot pairs.
    Edmd,
    /// Integrate a fitted generator from initial conditions.
    Predict,
    /// Closure residuals and bounds across steepness scales.
    Closure,
    /// Product-approximation decay for a comparable pair.
    Theorem1,
    /// Moments and error rates of random logistics.
    Stats,
    /// Polynomial non-closure table and a bounded SILL fit.
    Example1,
    /// Join-complete a dictionary and report its order.
    CompleteDictionary,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Fit => Command::Fit,
            Cmd::Edmd => Command::Edmd,
            Cmd::Predict => Command::Predict,
            Cmd::Closure => Command::Closure,
            Cmd::Theorem1 => Command::Theorem1,
            Cmd::Stats => Command::Stats,
            Cmd::Example1 => Command::Example1,
            Cmd::CompleteDictionary => Command::CompleteDictionary,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.workers {
        if n == 0 {
            eprintln!("{}", error_line(&SillError::InvalidParameter("--workers must be positive".into())));
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("{}", error_line(&SillError::InvalidParameter(e.to_string())));
            return ExitCode::from(2);
        }
    }
    let (text, base_dir) = match &cli.config {
        Some(p) => match fs::read_to_string(p) {
            Ok(t) => (t, p.parent().map(PathBuf::from).unwrap_or_default()),
            Err(e) => {
                eprintln!("{}", error_line(&SillError::Io(e)));
                return ExitCode::from(2);
            }
        },
        None => ("{}".to_string(), PathBuf::from(".")),
    };
    let ctx = RunContext {
        base_dir,
        out_dir: cli.out.clone(),
        seed: cli.seed,
    };
    let result = run(cli.command.into(), &text, &ctx);
    let code = exit_code(&result);
    match result {
        Ok(m) => {
            for f in &m.outputs {
                println!("{}", cli.out.join(f).display());
            }
        }
        Err(e) => eprintln!("{}", error_line(&e)),
    }
    ExitCode::from(code as u8)
}
