use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use voicegov_cli::community::{audit_dir, render, replay_dir, Community};
use voicegov_cli::gateway::{act_line, serve_socket, serve_stdio};
use voicegov_cli::grammar::GRAMMAR;
use voicegov_cli::simulate::{parse_seeds, simulate, SimulateOptions};
use voicegov_cli::CliError;
use voicegov_core::domain::{MemberId, ProposalId, Tick};
use voicegov_core::par::Execution;

/// Governance engine for online communities, with an exit/voice simulator.
///
/// Exit codes: 0 success, 1 usage or config error, 2 corrupt log, 3 rejected by governance rules.
#[derive(Parser)]
#[command(name = "voicegov", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Create a community directory from a setup file.
    Init {
        dir: PathBuf,
        #[arg(long)]
        config: PathBuf,
    },
    /// Authorize and apply one action; prints the event hash.
    #[command(after_help = GRAMMAR)]
    Act {
        dir: PathBuf,
        /// Acting member.
        #[arg(long = "as", conflicts_with = "system")]
        actor: Option<MemberId>,
        /// Act as the system (joins and contributions).
        #[arg(long)]
        system: bool,
        /// Tick of the action; defaults to the last recorded tick.
        #[arg(long)]
        at: Option<Tick>,
        /// `kind key=value ...`
        #[arg(required = true, num_args = 1.., trailing_var_arg = true)]
        action: Vec<String>,
    },
    /// Render a proposal's tally, closing it first if it is due.
    Tally {
        dir: PathBuf,
        proposal: ProposalId,
        #[arg(long)]
        now: Option<Tick>,
    },
    /// Verify the chain, re-authorize every action and list moderation.
    Audit { dir: PathBuf },
    /// Print a summary of the current state.
    State { dir: PathBuf },
    /// Replay the log from genesis and print the head hash.
    Replay { dir: PathBuf },
    /// Advance to a tick: close due proposals and fire triggers.
    Triggers {
        dir: PathBuf,
        #[arg(long)]
        now: Tick,
    },
    /// Run a scenario over a seed range.
    Simulate {
        config: PathBuf,
        /// Inclusive range `a..b`, or one seed; defaults to the config's run section.
        #[arg(long)]
        seeds: Option<String>,
        /// Run the affective-only and effective arms and write a paired summary.
        #[arg(long)]
        compare: bool,
        #[arg(long)]
        out: PathBuf,
        /// Also write each run's event log.
        #[arg(long)]
        logs: bool,
        /// Run seeds one after another instead of on the thread pool.
        #[arg(long)]
        sequential: bool,
    },
    /// Serve line-delimited JSON requests on stdio or a unix socket.
    Serve {
        dir: PathBuf,
        #[arg(long)]
        socket: Option<PathBuf>,
    },
}

fn run(cmd: Cmd) -> Result<(), CliError> {
    match cmd {
        Cmd::Init { dir, config } => {
            let text = std::fs::read_to_string(&config)?;
            let c = Community::init(&dir, &text)?;
            println!("{}", c.state().head_hash.to_hex());
        }
        Cmd::Act { dir, actor, system, at, action } => {
            if actor.is_none() && !system {
                return Err(CliError::Usage("give --as MEMBER or --system".into()));
            }
            let mut c = Community::open(&dir)?;
            let out = act_line(&mut c, actor.as_ref(), at, &action)?;
            println!("{}", out["hash"].as_str().unwrap_or_default());
        }
        Cmd::Tally { dir, proposal, now } => {
            let mut c = Community::open(&dir)?;
            let (report, _) = c.tally(&proposal, now)?;
            print!("{}", report.render()?);
        }
        Cmd::Audit { dir } => {
            let report = audit_dir(&dir)?;
            print!("{}", render(&report)?);
            if let Some(seq) = report.first_break_seq {
                return Err(CliError::Corrupt { seq, reason: report.break_reason.unwrap_or_default() });
            }
        }
        Cmd::State { dir } => {
            let c = Community::open(&dir)?;
            print!("{}", render(&c.summary())?);
        }
        Cmd::Replay { dir } => {
            let (head, count) = replay_dir(&dir)?;
            println!("head_hash={}\nevent_count={count}", head.to_hex());
        }
        Cmd::Triggers { dir, now } => {
            let mut c = Community::open(&dir)?;
            for e in c.advance(now)? {
                println!("{} {} {}", e.seq, e.kind.name(), e.hash.to_hex());
            }
        }
        Cmd::Simulate { config, seeds, compare, out, logs, sequential } => {
            let opts = SimulateOptions {
                seeds: seeds.as_deref().map(parse_seeds).transpose()?,
                compare,
                logs,
                exec: if sequential { Execution::Sequential } else { Execution::default() },
            };
            for path in simulate(&config, &out, &opts)? {
                println!("{}", path.display());
            }
        }
        Cmd::Serve { dir, socket } => match socket {
            Some(s) => serve_socket(&dir, &s)?,
            None => serve_stdio(&dir)?,
        },
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            match &e {
                CliError::Rejected(ids) => {
                    for id in ids {
                        println!("{id}");
                    }
                }
                CliError::Corrupt { seq, .. } => println!("first_break_seq={seq}"),
                _ => {}
            }
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
