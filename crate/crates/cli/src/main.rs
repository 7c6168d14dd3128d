//! Command-line front end: simulation, estimation, local and global
//! sensitivity analysis, and report emission for dynamic discrete choice
//! models with calibrated parameters.

use std::path::PathBuf;
use std::process::ExitCode;

use ddc_sense_cli::commands::{self, CliOptions};
use ddc_sense_cli::config::RunConfig;

const USAGE: &str = "\
ddcsense — estimation and fixed-parameter sensitivity analysis for
dynamic discrete choice models

USAGE:
    ddcsense <COMMAND> --config <path> [--out <dir>] [--seed <n>] [--threads <n>]

COMMANDS:
    simulate     Simulate a panel from the configured model; writes
                 panel.csv and manifest.json
    estimate     Nested fixed-point maximum likelihood fit; writes
                 solution.json
    sensitivity  Local sensitivity of the four reported targets to the
                 discount factor, with approximation-error columns;
                 writes sensitivity.csv/.json and figure_estimates.csv
    bounds       Bounds on a target over an interval of discount
                 factors by profiled re-estimation; writes bounds.csv/.json
    monotone     First-stage CCP fit and monotonicity certificates;
                 writes ccp_by_state.csv, monotonicity.csv,
                 figure_two_step.csv
    breakdown    Breakdown frontier of a threshold conclusion; writes
                 breakdown.json

OPTIONS:
    --config <path>   Run configuration (TOML-style sections); required
    --out <dir>       Output directory (default: out)
    --seed <n>        Override the simulation seed from the config
    --threads <n>     Worker threads for profile/grid evaluations (default: 1)

Every config key can be overridden with DDCSENSE_<SECTION>_<KEY>
environment variables, e.g. DDCSENSE_MODEL_BETA=0.9.
";

struct ParsedArgs {
    command: String,
    config_path: Option<PathBuf>,
    opts: CliOptions,
}

fn parse_args(args: &[String]) -> Result<ParsedArgs, String> {
    if args.is_empty() {
        return Err("missing command".into());
    }
    let command = args[0].clone();
    let mut config_path = None;
    let mut out_dir = PathBuf::from("out");
    let mut seed = None;
    let mut threads = 1usize;

    let mut it = args[1..].iter();
    while let Some(arg) = it.next() {
        let mut take = |name: &str| -> Result<String, String> {
            it.next()
                .cloned()
                .ok_or_else(|| format!("{name} needs a value"))
        };
        match arg.as_str() {
            "--config" => config_path = Some(PathBuf::from(take("--config")?)),
            "--out" => out_dir = PathBuf::from(take("--out")?),
            "--seed" => {
                seed = Some(
                    take("--seed")?
                        .parse::<u64>()
                        .map_err(|_| "--seed needs an unsigned integer".to_string())?,
                )
            }
            "--threads" => {
                threads = take("--threads")?
                    .parse::<usize>()
                    .map_err(|_| "--threads needs a positive integer".to_string())?;
                if threads == 0 {
                    return Err("--threads needs a positive integer".into());
                }
            }
            other => return Err(format!("unknown argument {other:?}")),
        }
    }
    Ok(ParsedArgs {
        command,
        config_path,
        opts: CliOptions {
            out_dir,
            seed,
            threads,
        },
    })
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.iter().any(|a| a == "--help" || a == "-h") || args.is_empty() {
        print!("{USAGE}");
        return if args.is_empty() {
            ExitCode::FAILURE
        } else {
            ExitCode::SUCCESS
        };
    }

    let parsed = match parse_args(&args) {
        Ok(p) => p,
        Err(msg) => {
            eprintln!("error: {msg}\n\n{USAGE}");
            return ExitCode::FAILURE;
        }
    };

    let Some(config_path) = parsed.config_path else {
        eprintln!("error: --config is required\n\n{USAGE}");
        return ExitCode::FAILURE;
    };
    let cfg = match RunConfig::from_file(&config_path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("stage config failed: {e}");
            return ExitCode::FAILURE;
        }
    };

    let result = match parsed.command.as_str() {
        "simulate" => commands::cmd_simulate(&cfg, &parsed.opts),
        "estimate" => commands::cmd_estimate(&cfg, &parsed.opts),
        "sensitivity" => commands::cmd_sensitivity(&cfg, &parsed.opts),
        "bounds" => commands::cmd_bounds(&cfg, &parsed.opts),
        "monotone" => commands::cmd_monotone(&cfg, &parsed.opts),
        "breakdown" => commands::cmd_breakdown(&cfg, &parsed.opts),
        other => {
            eprintln!("error: unknown command {other:?}\n\n{USAGE}");
            return ExitCode::FAILURE;
        }
    };

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("stage {} failed: {e}", parsed.command);
            ExitCode::FAILURE
        }
    }
}
