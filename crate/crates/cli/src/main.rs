use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use cyclekernel_cli::{run, Command, Invocation, EXIT_USAGE};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Cmd {
    Kernel,
    Pushforward,
    Bound,
    Train,
}

#[derive(Debug, Parser)]
#[command(name = "cyclekernel", version, about = "Cycle-consistency kernel experiments")]
struct Args {
    #[arg(value_enum)]
    command: Cmd,
    /// JSON config file.
    #[arg(long)]
    config: PathBuf,
    /// Directory for reports.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Replaces the seed in the config.
    #[arg(long)]
    seed_override: Option<u64>,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    let command = match args.command {
        Cmd::Kernel => Command::Kernel,
        Cmd::Pushforward => Command::Pushforward,
        Cmd::Bound => Command::Bound,
        Cmd::Train => Command::Train,
    };
    let inv = Invocation {
        command,
        config: args.config,
        out: args.out,
        seed_override: args.seed_override,
    };
    match run(&inv) {
        Ok(outcome) => {
            println!("{}: {}", if outcome.pass { "pass" } else { "fail" }, outcome.summary);
            ExitCode::from(outcome.exit_code())
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_the_documented_flags() {
        let a = Args::try_parse_from(["cyclekernel", "bound", "--config", "c.json", "--out", "o", "--seed-override", "3"])
            .unwrap();
        assert!(matches!(a.command, Cmd::Bound));
        assert_eq!(a.seed_override, Some(3));
        assert_eq!(a.out, PathBuf::from("o"));
    }

    #[test]
    fn rejects_bad_usage() {
        assert!(Args::try_parse_from(["cyclekernel", "kernel"]).is_err());
        assert!(Args::try_parse_from(["cyclekernel", "plot", "--config", "c.json"]).is_err());
        assert!(Args::try_parse_from(["cyclekernel", "train", "--config", "c", "--seed-override", "x"]).is_err());
    }
}
