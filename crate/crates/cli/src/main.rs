mod config;
mod converge;
mod mesh_cmd;
mod output;
mod solve;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use capfem::verification::RateMode;

#[derive(Parser)]
#[command(
    name = "capfem",
    version,
    about = "Capacitive interface problem solver"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a mesh, or validate an existing mesh file.
    Mesh(mesh_cmd::MeshArgs),
    /// Run a simulation from a configuration file.
    Solve { config: PathBuf },
    /// Certify convergence rates on a manufactured case.
    Converge {
        #[arg(long, default_value = "A")]
        case: String,
        #[arg(long, default_value = "h1")]
        mode: RateMode,
        /// Mesh subdivisions, or step counts in time mode.
        #[arg(long, value_delimiter = ',', required = true)]
        levels: Vec<usize>,
        /// Mesh subdivisions shared by all levels in time mode.
        #[arg(long, default_value_t = 32)]
        n: usize,
        #[arg(long, default_value_t = 1.0)]
        final_time: f64,
        /// Run levels on separate threads.
        #[arg(long)]
        parallel: bool,
        /// Output directory for the report.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Pulse shapes.
    Pulse {
        #[command(subcommand)]
        action: PulseAction,
    },
}

#[derive(Subcommand)]
enum PulseAction {
    /// List the supported kinds and their parameters.
    List,
}

/// Error message paired with the process exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

pub type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Mesh(args) => mesh_cmd::run(&args),
        Command::Solve { config } => solve::run(&config),
        Command::Converge {
            case,
            mode,
            levels,
            n,
            final_time,
            parallel,
            out,
        } => converge::run(&converge::ConvergeArgs {
            case,
            mode,
            levels,
            n,
            final_time,
            parallel,
            out,
        }),
        Command::Pulse {
            action: PulseAction::List,
        } => {
            print!("{}", pulse_list());
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn pulse_list() -> String {
    let rows = [
        ("rectangular", "amplitude, onset, duration", "no"),
        (
            "trapezoidal",
            "amplitude, onset, duration, rise",
            "if rise > 0",
        ),
        ("gaussian", "amplitude, center, width", "yes"),
        (
            "biphasic-exponential",
            "amplitude, onset, duration, decay",
            "yes",
        ),
    ];
    let mut s = format!("{:<22} {:<36} {}\n", "kind", "parameters", "H1 in time");
    for (kind, params, h1) in rows {
        s.push_str(&format!("{kind:<22} {params:<36} {h1}\n"));
    }
    s.push_str("spatial profiles: uniform, gaussian-spot (center, width)\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use capfem::pulses::PULSE_KINDS;

    #[test]
    fn pulse_list_names_every_kind() {
        let s = pulse_list();
        for k in PULSE_KINDS {
            assert!(s.lines().any(|l| l.starts_with(k)), "{k}");
        }
    }
}
