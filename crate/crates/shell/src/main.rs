use std::fs;
use std::io::{self, BufReader};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use protea_core::{Kernel, SecretDigest};
use protea_shell::{batch, config, repl, server};

#[derive(Debug, Parser)]
#[command(name = "protea", version, about = "Shell for the protea protection kernel")]
struct Cli {
    /// TOML kernel configuration.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Option<Mode>,
}

#[derive(Debug, Subcommand)]
enum Mode {
    /// Interactive terminal (the default).
    Repl,
    /// Replay a script on a manual clock and print the transcript.
    Batch {
        script: PathBuf,
        /// Append the kernel's message trace to the transcript.
        #[arg(long)]
        trace: bool,
    },
    /// Share one kernel between terminals over a unix socket.
    Serve { socket: PathBuf },
    /// Attach this terminal to a running server.
    Connect { socket: PathBuf },
    /// Print the salted digest of a secret for the admin configuration.
    Digest { secret: String },
}

fn kernel(cfg: Option<&PathBuf>) -> Result<Kernel> {
    let mut k = Kernel::new(config::load(cfg.map(PathBuf::as_path))?);
    k.attach_logs().context("opening trace or audit log")?;
    Ok(k)
}

fn run(cli: Cli) -> Result<u8> {
    let stdin = io::stdin();
    let mut stdout = io::stdout();
    match cli.command.unwrap_or(Mode::Repl) {
        Mode::Repl => {
            let mut k = kernel(cli.config.as_ref())?;
            let exit = repl::run(&mut k, &mut stdin.lock(), &mut stdout)?;
            Ok(exit.code() as u8)
        }
        Mode::Batch { script, trace } => {
            let cfg = config::load(cli.config.as_deref())?;
            let text = fs::read_to_string(&script).with_context(|| format!("reading {}", script.display()))?;
            match batch::run(cfg, &text) {
                Ok(outcome) => {
                    for l in &outcome.transcript {
                        println!("{l}");
                    }
                    if trace {
                        println!("-- trace");
                        for l in outcome.kernel.trace_lines() {
                            println!("{l}");
                        }
                    }
                    Ok(u8::from(outcome.terminated))
                }
                Err(e) => {
                    eprintln!("{}: {e}", script.display());
                    Ok(3)
                }
            }
        }
        Mode::Serve { socket } => {
            let k = kernel(cli.config.as_ref())?;
            server::serve(k, &socket).with_context(|| format!("serving on {}", socket.display()))?;
            Ok(0)
        }
        Mode::Connect { socket } => {
            server::connect(&socket, &mut BufReader::new(stdin.lock()), &mut stdout)
                .with_context(|| format!("talking to {}", socket.display()))?;
            Ok(0)
        }
        Mode::Digest { secret } => {
            println!("{}", SecretDigest::new(&secret, &mut rand::rngs::OsRng));
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("protea: {e:#}");
            ExitCode::from(2)
        }
    }
}
