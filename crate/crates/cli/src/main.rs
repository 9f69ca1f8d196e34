//! `condlab`: evaluate, certify, trim and decode from the command line.
//!
//! Exit status: 0 on success, 1 when a check fails, 2 on usage or parse errors.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Result};
use clap::{Parser, Subcommand};

use condmeasure::dyadic::{BitString, Dyadic, DyadicInterval};

use commands::{ConvergeArgs, Outcome};
use config::{BetaSource, LabConfig};

#[derive(Debug, Parser)]
#[command(name = "condlab", version, about = "Exact conditional-measure lab")]
struct Cli {
    /// Configuration file; the built-in default is used when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Write CSV rows to this file.
    #[arg(long, global = true, value_name = "PATH")]
    csv: Option<PathBuf>,
    /// Overrides `[experiment] seed`.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Overrides `[experiment] eps`, written `p/2^k`.
    #[arg(long, global = true, value_name = "p/2^k")]
    eps: Option<Dyadic>,
    /// Overrides `[experiment] max_depth`.
    #[arg(long, global = true, value_name = "N")]
    depth: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Exact P of one rectangle `lo hi [cyl]`.
    EvalP {
        #[arg(required = true, num_args = 1..=3)]
        rect: Vec<String>,
    },
    /// Certified enclosure of the conditional of one index given beta.
    EvalPhat {
        #[arg(long, default_value_t = 2)]
        index: u64,
        #[command(flatten)]
        beta: BetaArgs,
    },
    /// Conditional ratios (vlf) or certified widths (ce) by depth, as CSV.
    Converge {
        /// `vlf` or `ce`.
        #[arg(long, default_value = "vlf")]
        measure: String,
        #[arg(long, default_value = "")]
        prefix: String,
        /// Tail after the prefix: 0, 1 or none.
        #[arg(long)]
        tail: Option<String>,
        /// Interval for vlf, `lo hi`.
        #[arg(long, default_value = "1/2 1")]
        interval: String,
        /// Index for ce.
        #[arg(long, default_value_t = 2)]
        index: u64,
        /// Comma-separated depths; defaults to 1..=depth.
        #[arg(long)]
        depths: Option<String>,
    },
    /// Trim a test level and verify the trimming conditions.
    TrimDemo {
        /// Level file; the bundled demo level when omitted.
        level: Option<PathBuf>,
        /// Comma-separated probe points; defaults to alpha_1..alpha_16.
        #[arg(long)]
        probes: Option<String>,
    },
    /// Decode set membership from certified conditionals.
    Decode {
        /// Decode this many random instances instead of the configured one.
        #[arg(long)]
        batch: Option<usize>,
    },
    /// Draw prefixes from the marginal.
    Sample {
        #[arg(long)]
        count: Option<usize>,
    },
    /// Run every invariant suite.
    Selftest,
}

#[derive(Debug, clap::Args)]
struct BetaArgs {
    /// Explicit beta prefix; overrides the configured source.
    #[arg(long)]
    prefix: Option<String>,
    /// Tail after `--prefix`: 0, 1 or none.
    #[arg(long)]
    tail: Option<String>,
    /// Draw beta from the marginal with `--seed`.
    #[arg(long, conflicts_with_all = ["prefix", "tail"])]
    sampled: bool,
}

fn parse_tail(s: &str) -> Result<Option<bool>> {
    match s {
        "0" => Ok(Some(false)),
        "1" => Ok(Some(true)),
        "none" => Ok(None),
        other => Err(anyhow!("tail must be 0, 1 or none, got {other:?}")),
    }
}

fn parse_bits(s: &str) -> Result<BitString> {
    s.parse().map_err(|e| anyhow!("prefix: {e}"))
}

fn parse_list<T, F: Fn(&str) -> Result<T>>(s: &str, f: F) -> Result<Vec<T>> {
    s.split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(f)
        .collect()
}

fn run(cli: Cli) -> Result<Outcome> {
    let mut cfg = LabConfig::load(cli.config.as_deref())?;
    if let Some(s) = cli.seed {
        cfg.experiment.seed = s;
    }
    if let Some(e) = cli.eps {
        if e <= Dyadic::zero() {
            return Err(anyhow!("--eps must be positive"));
        }
        cfg.experiment.eps = e;
    }
    if let Some(d) = cli.depth {
        cfg.experiment.max_depth = d;
    }
    let csv = cli.csv.as_deref();
    match cli.command {
        Command::EvalP { rect } => commands::eval_p(&cfg, &rect, csv),
        Command::EvalPhat { index, beta } => {
            let source = if beta.sampled {
                BetaSource::Sampled
            } else if beta.prefix.is_some() || beta.tail.is_some() {
                BetaSource::Explicit {
                    bits: parse_bits(beta.prefix.as_deref().unwrap_or(""))?,
                    tail: parse_tail(beta.tail.as_deref().unwrap_or("0"))?,
                }
            } else {
                cfg.experiment.beta.clone()
            };
            commands::eval_phat(&cfg, index, &source, &cfg.experiment.eps, csv)
        }
        Command::Converge {
            measure,
            prefix,
            tail,
            interval,
            index,
            depths,
        } => {
            let ce = match measure.as_str() {
                "vlf" => false,
                "ce" => true,
                other => return Err(anyhow!("--measure must be vlf or ce, got {other:?}")),
            };
            let tail = match tail {
                Some(t) => parse_tail(&t)?,
                // ce needs an infinite beta; vlf defaults to refinement mode
                None if ce => Some(false),
                None => None,
            };
            let bounds = parse_list(&interval.replace(' ', ","), |x| {
                x.parse::<Dyadic>().map_err(|e| anyhow!("interval: {e}"))
            })?;
            let [lo, hi] =
                <[Dyadic; 2]>::try_from(bounds).map_err(|_| anyhow!("interval must be `lo hi`"))?;
            let interval = DyadicInterval::new(lo, hi)?;
            let depths = match depths {
                Some(s) => parse_list(&s, |x| {
                    x.parse::<usize>().map_err(|e| anyhow!("depths: {e}"))
                })?,
                None => (1..=cfg.experiment.max_depth).collect(),
            };
            let args = ConvergeArgs {
                ce,
                prefix: parse_bits(&prefix)?,
                tail,
                interval,
                index,
                depths,
            };
            commands::converge(&cfg, &args, csv)
        }
        Command::TrimDemo { level, probes } => {
            let probes = probes
                .map(|s| {
                    parse_list(&s, |x| {
                        x.parse::<Dyadic>().map_err(|e| anyhow!("probes: {e}"))
                    })
                })
                .transpose()?;
            commands::trim_demo(&cfg, level.as_deref(), probes, csv)
        }
        Command::Decode { batch } => commands::decode(&cfg, batch, csv),
        Command::Sample { count } => {
            let count = count.unwrap_or(cfg.experiment.sample_count);
            commands::sample(&cfg, cfg.experiment.max_depth, count, csv)
        }
        Command::Selftest => commands::selftest(&cfg, csv),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::Fail) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
