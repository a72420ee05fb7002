//! `locus`: experiment harness over the `locus_core` library.
//!
//! Every subcommand writes JSON lines (one object per measurement, each with
//! `schema: 1`) to stdout or `--out`. Exit status is 0 on success, 1 when a
//! checked invariant fails and 2 on usage, input, config or budget errors.

mod codes;
mod config;
mod lines;
mod output;

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use locus_core::report::Prob;

use output::{Failure, Report};

#[derive(Parser, Debug)]
#[command(name = "locus", version, about = "Local decoder experiments", args_override_self = true)]
pub struct Cli {
    /// Write the report to this file instead of stdout.
    #[arg(long, global = true, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Read flags from a flat key=value file; command-line flags win.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Print the effective configuration as key=value lines and exit.
    #[arg(long, global = true)]
    dump_config: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Exhaustive field and linear-algebra self checks.
    Selftest(lines::SelftestArgs),
    /// Fooling attack against the non-smoothable part of a decoder.
    Fool(codes::FoolArgs),
    /// Split a decoder into smooth and non-smooth parts.
    Extract(codes::ExtractArgs),
    /// Adaptive to nonadaptive transformation with perfect completeness.
    Goldberg(codes::GoldbergArgs),
    /// Reduce a two-query decoder to one on a shorter message.
    Twoquery(codes::TwoqueryArgs),
    /// Line-code construction: encoding, decoding and soundness sweeps.
    Linecode {
        #[command(subcommand)]
        command: lines::LinecodeCommand,
    },
    /// Line-erasure attack on decoders that read few line blocks.
    Attack(lines::AttackArgs),
    /// Soundness of a decoder repeated several times.
    Repeat(codes::RepeatArgs),
    /// Completeness and soundness of a decoder against an adversary.
    Report(codes::ReportArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum RunMode {
    /// Exhaustive enumeration with exact rationals.
    Exact,
    /// Seeded Monte Carlo with 3σ intervals.
    Sampled,
}

#[derive(Args, Debug, Clone, Copy)]
pub struct ModeArgs {
    #[arg(long, value_enum, default_value_t = RunMode::Exact)]
    pub mode: RunMode,
    /// Monte Carlo trials in sampled mode.
    #[arg(long, default_value_t = 10_000)]
    pub trials: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Largest enumeration an exact run may attempt.
    #[arg(long, default_value_t = 1 << 24)]
    pub budget: u128,
}

/// Parses `a/b`, an integer, or a decimal such as `0.25`, into a probability.
pub fn parse_prob(s: &str) -> Result<Prob, String> {
    let s = s.trim();
    let bad = || format!("expected a probability like 1/4 or 0.25, got {s:?}");
    if s.starts_with('-') {
        return Err(format!("{s} is outside [0, 1]"));
    }
    let p = if let Some((a, b)) = s.split_once('/') {
        let a: i128 = a.trim().parse().map_err(|_| bad())?;
        let b: i128 = b.trim().parse().map_err(|_| bad())?;
        if b == 0 {
            return Err(bad());
        }
        Prob::new(a, b)
    } else if let Some((int, frac)) = s.split_once('.') {
        if frac.len() > 18 || !frac.chars().all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        let int: i128 = if int.is_empty() { 0 } else { int.parse().map_err(|_| bad())? };
        let den = 10i128.pow(frac.len() as u32);
        let frac: i128 = if frac.is_empty() { 0 } else { frac.parse().map_err(|_| bad())? };
        Prob::new(int * den + frac, den)
    } else {
        Prob::from_integer(s.parse().map_err(|_| bad())?)
    };
    if p < Prob::from_integer(0) || p > Prob::from_integer(1) {
        return Err(format!("{s} is outside [0, 1]"));
    }
    Ok(p)
}

fn threads() -> Result<(), Failure> {
    let Ok(v) = std::env::var("LOCUS_THREADS") else { return Ok(()) };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::Config(format!("LOCUS_THREADS must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Config(format!("thread pool: {e}")))
}

fn run(argv: Vec<OsString>) -> Result<Report, Failure> {
    let argv = config::inject(argv)?;
    let matches = match Cli::command().try_get_matches_from(&argv) {
        Ok(m) => m,
        Err(e) => return Err(Failure::Clap(e)),
    };
    let cli = Cli::from_arg_matches(&matches).map_err(Failure::Clap)?;
    let (path, entries) = config::effective(&matches);
    if cli.dump_config {
        let mut r = Report::text(config::render(&entries));
        r.out = cli.out;
        return Ok(r);
    }
    threads()?;
    let mut report = Report::new(&path, &entries);
    report.out = cli.out;
    match cli.command {
        Command::Selftest(a) => lines::selftest(&a, &mut report)?,
        Command::Fool(a) => codes::fool(&a, &mut report)?,
        Command::Extract(a) => codes::extract(&a, &mut report)?,
        Command::Goldberg(a) => codes::goldberg(&a, &mut report)?,
        Command::Twoquery(a) => codes::twoquery(&a, &mut report)?,
        Command::Linecode { command } => lines::linecode(&command, &mut report)?,
        Command::Attack(a) => lines::attack(&a, &mut report)?,
        Command::Repeat(a) => codes::repeat(&a, &mut report)?,
        Command::Report(a) => codes::report(&a, &mut report)?,
    }
    Ok(report)
}

fn main() -> ExitCode {
    match run(std::env::args_os().collect()) {
        Ok(report) => report.finish(),
        Err(f) => f.exit(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use locus_core::report::prob;

    #[test]
    fn probabilities_parse() {
        assert_eq!(parse_prob("1/4").unwrap(), prob(1, 4));
        assert_eq!(parse_prob("0.25").unwrap(), prob(1, 4));
        assert_eq!(parse_prob(".5").unwrap(), prob(1, 2));
        assert_eq!(parse_prob("1").unwrap(), prob(1, 1));
        assert_eq!(parse_prob("0.005").unwrap(), prob(1, 200));
        assert!(parse_prob("3/2").is_err());
        assert!(parse_prob("1/0").is_err());
        assert!(parse_prob("-0.1").is_err());
        assert!(parse_prob("abc").is_err());
    }

    #[test]
    fn command_definition_is_consistent() {
        Cli::command().debug_assert();
    }
}
