//! `risdeploy`: synthesize cabin channels, plan RIS deployments over a
//! threshold sweep, and export per-UE SNR maps.
//!
//! Exit codes: 0 success, 2 some thresholds failed, 3 bad input, 4 internal
//! or solver failure.

mod jobs;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand, ValueEnum};

use jobs::{input_error, resolve_scenario, InputError, Job, OptimizeJob, Outcome, SnrSource, SnrmapJob, SynthJob};
use manifest::RunManifest;
use risdeploy::optimizer::{FppConfig, P3Form};

#[derive(Parser)]
#[command(name = "risdeploy", version, about = "RIS deployment planning for mmWave cabins")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic channels for a cabin scenario and export them as CIR.
    Synth(SynthArgs),
    /// Run the deployment optimizer for each rate threshold.
    Optimize(OptimizeArgs),
    /// Per-UE SNR for an optimized deployment or a baseline.
    Snrmap(SnrmapArgs),
    /// Re-run a command from its manifest.
    Replay(ReplayArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Scenario TOML; the built-in cabin when omitted.
    #[arg(long, env = "RISDEPLOY_CONFIG")]
    config: Option<PathBuf>,
    /// RIS elements per side for the built-in cabin (8 or 16).
    #[arg(long, default_value_t = 8)]
    ris_elements: usize,
    /// Populate only rows FIRST..FIRST+COUNT of the built-in cabin, as `FIRST:COUNT`.
    #[arg(long, value_parser = parse_rows)]
    rows: Option<(usize, usize)>,
    #[arg(long, env = "RISDEPLOY_SEED")]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormArg {
    Compact,
    Full,
}

#[derive(Args)]
struct OptimizeArgs {
    #[arg(long)]
    channels: PathBuf,
    /// Scenario TOML supplying the radio parameters; defaults otherwise.
    #[arg(long, env = "RISDEPLOY_CONFIG")]
    config: Option<PathBuf>,
    /// Comma-separated per-UE thresholds in bit/s; `k`, `M` and `G` suffixes
    /// are accepted.
    #[arg(long, value_delimiter = ',', value_parser = parse_rate, required = true)]
    thresholds: Vec<f64>,
    /// Expected RIS elements per side; checked against the channels.
    #[arg(long)]
    ris_elements: Option<usize>,
    #[arg(long, env = "RISDEPLOY_EPSILON")]
    epsilon: Option<f64>,
    #[arg(long, env = "RISDEPLOY_MAX_ITERS")]
    max_iters: Option<usize>,
    #[arg(long, env = "RISDEPLOY_SEED", default_value_t = 0)]
    seed: u64,
    /// Slack penalty weight.
    #[arg(long, env = "RISDEPLOY_OMEGA")]
    omega: Option<f64>,
    #[arg(long, value_enum, default_value = "compact")]
    form: FormArg,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Baseline {
    NoRis,
    RandomPhase,
}

#[derive(Args)]
struct SnrmapArgs {
    #[arg(long)]
    channels: PathBuf,
    #[arg(long, env = "RISDEPLOY_CONFIG")]
    config: Option<PathBuf>,
    /// Solution document from `optimize`.
    #[arg(long)]
    solution: Option<PathBuf>,
    /// Evaluate a baseline instead of the solution's phases.
    #[arg(long, value_enum)]
    baseline: Option<Baseline>,
    #[arg(long, env = "RISDEPLOY_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReplayArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Output directory; the manifest's own when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_rows(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once(':').ok_or("expected FIRST:COUNT")?;
    let first = a.trim().parse().map_err(|_| format!("bad first row {a:?}"))?;
    let count = b.trim().parse().map_err(|_| format!("bad row count {b:?}"))?;
    Ok((first, count))
}

fn parse_rate(s: &str) -> Result<f64, String> {
    let s = s.trim();
    let (num, scale) = match s.chars().last() {
        Some('k') | Some('K') => (&s[..s.len() - 1], 1e3),
        Some('M') => (&s[..s.len() - 1], 1e6),
        Some('G') => (&s[..s.len() - 1], 1e9),
        _ => (s, 1.0),
    };
    let v: f64 = num.parse().map_err(|_| format!("bad rate {s:?}"))?;
    if !(v >= 0.0) || !v.is_finite() {
        return Err(format!("rate must be finite and nonnegative, got {s:?}"));
    }
    Ok(v * scale)
}

fn resolve(command: Command) -> Result<Job> {
    Ok(match command {
        Command::Synth(a) => {
            let mut scenario = resolve_scenario(a.config.as_deref(), a.ris_elements, a.rows)?;
            let synth = scenario.synth.get_or_insert_with(Default::default);
            if let Some(seed) = a.seed {
                synth.seed = seed;
            }
            Job::Synth(SynthJob { scenario, out: a.out })
        }
        Command::Optimize(a) => {
            let radio = resolve_scenario(a.config.as_deref(), 8, None)?.radio();
            let defaults = FppConfig::default();
            let mut thresholds_bps = a.thresholds;
            thresholds_bps.sort_by(f64::total_cmp);
            Job::Optimize(OptimizeJob {
                channels: a.channels,
                radio,
                thresholds_bps,
                ris_elements: a.ris_elements,
                epsilon: a.epsilon.unwrap_or(defaults.epsilon),
                max_iters: a.max_iters.unwrap_or(defaults.max_iters),
                seed: a.seed,
                omega: a.omega.unwrap_or(defaults.omega),
                form: match a.form {
                    FormArg::Compact => P3Form::Compact,
                    FormArg::Full => P3Form::Full,
                },
                out: a.out,
            })
        }
        Command::Snrmap(a) => {
            let radio = resolve_scenario(a.config.as_deref(), 8, None)?.radio();
            let source = match (a.baseline, a.solution) {
                (None, Some(path)) => SnrSource::Solution { path },
                (None, None) => return Err(input_error("snrmap needs --solution or --baseline".into())),
                (Some(Baseline::NoRis), solution) => SnrSource::NoRis { solution },
                (Some(Baseline::RandomPhase), Some(solution)) => SnrSource::RandomPhase { solution },
                (Some(Baseline::RandomPhase), None) => {
                    return Err(input_error("--baseline random-phase needs --solution for the RIS selection".into()))
                }
            };
            Job::Snrmap(SnrmapJob {
                channels: a.channels,
                radio,
                source,
                seed: a.seed,
                out: a.out,
            })
        }
        Command::Replay(a) => {
            let mut job = RunManifest::load(&a.manifest).map_err(|e| e.context(InputError))?.job;
            if let Some(out) = a.out {
                job.set_out_dir(out);
            }
            job
        }
    })
}

fn exit_code(e: &anyhow::Error) -> u8 {
    if e.downcast_ref::<InputError>().is_some() {
        3
    } else {
        4
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(3) } else { ExitCode::SUCCESS };
        }
    };
    match resolve(cli.command).and_then(Job::execute) {
        Ok(Outcome::Success) => ExitCode::SUCCESS,
        Ok(Outcome::Partial) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rates_with_suffixes() {
        assert_eq!(parse_rate("0").unwrap(), 0.0);
        assert_eq!(parse_rate("40M").unwrap(), 4e7);
        assert_eq!(parse_rate("1.5G").unwrap(), 1.5e9);
        assert_eq!(parse_rate("2e6").unwrap(), 2e6);
        assert!(parse_rate("-1").is_err());
        assert!(parse_rate("fast").is_err());
    }

    #[test]
    fn row_ranges() {
        assert_eq!(parse_rows("7:4").unwrap(), (7, 4));
        assert!(parse_rows("7").is_err());
    }

    #[test]
    fn input_errors_map_to_exit_3() {
        let e = input_error("x".into());
        assert_eq!(exit_code(&e), 3);
        assert_eq!(exit_code(&anyhow::anyhow!("boom")), 4);
    }
}
