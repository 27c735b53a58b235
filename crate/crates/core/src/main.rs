use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use anisowf::experiments::{run_command, Command};

#[derive(Parser)]
#[command(name = "anisowf", version, about = "Anisotropic wave front set experiments")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// STFT lattice, Moyal and inversion checks.
    Stft(Common),
    /// Wave front set estimate with decay profiles.
    Wf(Common),
    /// Chirp estimate against its predicted wave front set.
    ChirpVerify(Common),
    /// Evolution of a signal and transport of its wave front set.
    PropagateVerify(Common),
    /// Graph condition and cone constant of a mollified kernel.
    KernelCheck(Common),
    /// Composition of finite relations.
    Relation(Common),
    /// Seminorm tables over r or h.
    Seminorm(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (cmd, common) = match cli.command {
        Cmd::Stft(c) => (Command::Stft, c),
        Cmd::Wf(c) => (Command::Wf, c),
        Cmd::ChirpVerify(c) => (Command::ChirpVerify, c),
        Cmd::PropagateVerify(c) => (Command::PropagateVerify, c),
        Cmd::KernelCheck(c) => (Command::KernelCheck, c),
        Cmd::Relation(c) => (Command::Relation, c),
        Cmd::Seminorm(c) => (Command::Seminorm, c),
    };
    if let Some(n) = common.threads {
        if n == 0 {
            eprintln!("error: --threads must be positive");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match run_command(cmd, &common.config, &common.out, common.seed) {
        Ok(report) => {
            if let Some(pass) = report.get("pass").and_then(|v| v.as_bool()) {
                println!("{}: pass = {pass}", cmd.name());
            } else {
                println!("{}: wrote {}", cmd.name(), common.out.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
