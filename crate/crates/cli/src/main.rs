//! Command-line front end for platoon risk analysis.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 configuration or schema error,
//! 3 domain error (disconnected graph, out-of-domain parameters,
//! instability, ...), 4 validation checks failed.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use config::RunConfig;
use output::{emit, Format, OutputOpts};
use platoon_risk::Error;

#[derive(Parser)]
#[command(
    name = "platoon-risk",
    version,
    about = "Collision/detachment value-at-risk analysis for time-delayed vehicle platoons"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override the config's seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output file (stdout when omitted).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = FormatArg::Csv)]
    format: FormatArg,

    /// Significant digits for floating output.
    #[arg(long, global = true, default_value_t = 6)]
    digits: usize,

    /// Suppress the timestamp header line in CSV output.
    #[arg(long, global = true)]
    no_timestamp: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Eigenvalues, effective resistance, and per-mode stability.
    Spectrum,
    /// Stability verdict; `--boundary` exports the region boundary curve.
    Stability {
        #[arg(long)]
        boundary: bool,
    },
    /// Closed-form per-pair risk.
    Risk,
    /// Coordinatewise joint-risk boxes.
    JointRisk,
    /// Hard limits: kernel minimum, deviation floor, risk floor,
    /// resistance bound.
    Limits,
    /// Risk-connectivity trade-off bound per pair.
    Tradeoff,
    /// Sweep one variable and tabulate sigma and risk per pair.
    Sweep,
    /// Fit the rational kernel surrogate and scan its relative error.
    FitApprox,
    /// Integrate the stochastic delay dynamics and export samples.
    Simulate,
    /// Closed-form vs Monte-Carlo cross-check suite.
    Validate,
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::InvalidParameter(_) | Error::InvalidSpec(_) | Error::InvalidSplit(_) => 2,
        _ => 3,
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig, String> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| "--config <path> is required".to_string())?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("config schema error: {e}"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match load_config(&cli) {
        Ok(cfg) => cfg,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(2);
        }
    };
    let seed = cli.seed.or(cfg.seed).unwrap_or(0);
    let opts = OutputOpts {
        format: match cli.format {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        },
        digits: cli.digits,
        timestamp: !cli.no_timestamp,
        out: cli.out.clone(),
    };

    let mut validation_failed = false;
    let report = match &cli.command {
        Command::Spectrum => commands::cmd_spectrum(&cfg, opts.digits),
        Command::Stability { boundary } => commands::cmd_stability(&cfg, opts.digits, *boundary),
        Command::Risk => commands::cmd_risk(&cfg, opts.digits),
        Command::JointRisk => commands::cmd_joint_risk(&cfg, opts.digits),
        Command::Limits => commands::cmd_limits(&cfg, opts.digits),
        Command::Tradeoff => commands::cmd_tradeoff(&cfg, opts.digits),
        Command::Sweep => commands::cmd_sweep(&cfg, opts.digits),
        Command::FitApprox => commands::cmd_fit_approx(&cfg, opts.digits),
        Command::Simulate => commands::cmd_simulate(&cfg, opts.digits, seed),
        Command::Validate => commands::cmd_validate(&cfg, opts.digits, seed).map(|(report, ok)| {
            validation_failed = !ok;
            report
        }),
    };

    match report {
        Ok(report) => {
            if let Err(e) = emit(&report, &opts) {
                eprintln!("error: cannot write output: {e}");
                return ExitCode::from(1);
            }
            if validation_failed {
                eprintln!("validation failed; see report");
                return ExitCode::from(4);
            }
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
