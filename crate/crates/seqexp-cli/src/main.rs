//! `seqexp` command line: moments, renewal constants, second-order
//! exponents, simulation plans, and the two worked-family figure grids.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure,
//! 4 simulation points flagged invalid.

mod figure;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use seqexp::exponents::{second_order_expectation, second_order_probabilistic, ExponentReport};
use seqexp::harness::{plan_report_csv, run_plan, ExperimentPlan};
use seqexp::models::{DistributionPair, MomentSummary, PairSpec};
use seqexp::renewal::{
    constants_series, constants_overshoot_mc, default_mc_boundary, OvershootEstimates,
    SeriesConstants,
};
use seqexp::{Error, StreamKey, DEFAULT_SEED};

use output::{write_output, Format};

pub(crate) const SCHEMA: &str = "seqexp-v1";

#[derive(Parser)]
#[command(name = "seqexp", version, about = "Sequential hypothesis testing: exponents, renewal constants, simulations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Relative entropies, LLR variances and higher moments of a pair
    Moments(MomentsArgs),
    /// Renewal overshoot constants A, Atilde, B, Btilde via series
    Constants(ConstantsArgs),
    /// First- and second-order error exponents under either constraint
    Exponents(ExponentsArgs),
    /// Execute an experiment plan from a JSON config
    Simulate(SimulateArgs),
    /// Second-order exponent grids for the two worked families
    Figure(FigureArgs),
}

#[derive(Args)]
struct CommonOut {
    /// Output format
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Write to this path instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MomentsArgs {
    /// Pair spec as JSON, e.g. '{"kind":"gaussian","theta0":0,"theta1":1}'
    #[arg(long)]
    pair: String,
    #[command(flatten)]
    common: CommonOut,
}

#[derive(Args)]
struct ConstantsArgs {
    #[arg(long)]
    pair: String,
    /// Per-series truncation tolerance
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// Also run the overshoot-simulation estimator and print agreement
    #[arg(long)]
    oracle: bool,
    /// Trials for the oracle
    #[arg(long, default_value_t = 1_000_000)]
    trials: u64,
    /// Oracle boundary; defaults to 100 / min(D0, D1)
    #[arg(long)]
    boundary: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[command(flatten)]
    common: CommonOut,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ConstraintArg {
    Prob,
    Expect,
}

#[derive(Args)]
struct ExponentsArgs {
    #[arg(long)]
    pair: String,
    #[arg(long, value_enum)]
    constraint: ConstraintArg,
    /// One or more weights in [0,1], comma separated
    #[arg(long, value_delimiter = ',', required = true)]
    lambda: Vec<f64>,
    /// Tail tolerance in (0,1); required for --constraint prob
    #[arg(long)]
    eps: Option<f64>,
    /// Series tolerance for --constraint expect
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[command(flatten)]
    common: CommonOut,
}

#[derive(Args)]
struct SimulateArgs {
    /// Experiment plan JSON file
    #[arg(long)]
    config: PathBuf,
    /// Override the plan seed
    #[arg(long)]
    seed: Option<u64>,
    /// Override the plan worker-count hint
    #[arg(long)]
    workers: Option<usize>,
    /// Override the plan default trials
    #[arg(long)]
    trials: Option<u64>,
    /// Override eta on every probabilistic point
    #[arg(long)]
    eta: Option<f64>,
    #[command(flatten)]
    common: CommonOut,
}

#[derive(Args)]
struct FigureArgs {
    /// Which worked-family grid to emit (1 = Gaussian, 2 = exponential)
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    which: u8,
    /// Series tolerance per grid point
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// Override the family-parameter grid (mean gaps for figure 1, rates
    /// gamma0 for figure 2), comma separated
    #[arg(long, value_delimiter = ',')]
    params: Option<Vec<f64>>,
    #[command(flatten)]
    common: CommonOut,
}

/// Errors mapped onto process exit codes.
pub(crate) enum CliError {
    Config(String),
    Numerical(String),
    InvalidPoints(String),
    Io(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::InvalidPoints(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m)
            | CliError::Numerical(m)
            | CliError::InvalidPoints(m)
            | CliError::Io(m) => m,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Domain(_)
            | Error::InvalidPair(_)
            | Error::InvalidThreshold(_)
            | Error::InvalidPlan(_) => CliError::Config(e.to_string()),
            Error::ArithmeticPair(_)
            | Error::UnsupportedPair
            | Error::ToleranceNotReached { .. } => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn parse_pair(text: &str) -> Result<DistributionPair, CliError> {
    let spec: PairSpec = serde_json::from_str(text)
        .map_err(|e| CliError::Config(format!("cannot parse --pair: {e}")))?;
    Ok(DistributionPair::new(spec)?)
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Moments(args) => cmd_moments(args),
        Command::Constants(args) => cmd_constants(args),
        Command::Exponents(args) => cmd_exponents(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Figure(args) => figure::cmd_figure(args),
    }
}

#[derive(Serialize)]
struct MomentsReport {
    schema: &'static str,
    pair: PairSpec,
    moments: MomentSummary,
}

fn moments_csv(ms: &MomentSummary) -> String {
    format!(
        "#schema={SCHEMA}\nd0,d1,v0,v1,e2_0,e2_1,m3_0,m3_1\n{},{},{},{},{},{},{},{}\n",
        ms.d0, ms.d1, ms.v0, ms.v1, ms.e2_0, ms.e2_1, ms.m3_0, ms.m3_1
    )
}

fn cmd_moments(args: MomentsArgs) -> Result<(), CliError> {
    let pair = parse_pair(&args.pair)?;
    let report = MomentsReport {
        schema: SCHEMA,
        pair: pair.spec().clone(),
        moments: pair.moments(),
    };
    let format = args.common.format.unwrap_or(Format::Json);
    let text = match format {
        Format::Json => output::to_json(&report)?,
        Format::Csv => moments_csv(&report.moments),
    };
    write_output(&text, args.common.out.as_deref())
}

#[derive(Serialize)]
struct AgreementRow {
    constant: &'static str,
    series: f64,
    tail_bound: f64,
    mc_mean: f64,
    mc_stderr: f64,
    /// |series - mc| / stderr
    sigmas: f64,
}

#[derive(Serialize)]
struct ConstantsReport {
    schema: &'static str,
    pair: PairSpec,
    tol: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    series: Option<SeriesConstants>,
    #[serde(skip_serializing_if = "Option::is_none")]
    oracle: Option<OvershootEstimates>,
    #[serde(skip_serializing_if = "Option::is_none")]
    agreement: Option<Vec<AgreementRow>>,
}

fn constants_csv(report: &ConstantsReport) -> String {
    let mut out = format!("#schema={SCHEMA}\nconstant,value,terms_used,tail_bound,mc_mean,mc_stderr\n");
    if let Some(sc) = &report.series {
        for (name, est) in [
            ("a", sc.a),
            ("a_tilde", sc.a_tilde),
            ("b", sc.b),
            ("b_tilde", sc.b_tilde),
        ] {
            let mc = report.oracle.as_ref().map(|o| match name {
                "a" => o.a,
                "a_tilde" => o.a_tilde,
                "b" => o.b,
                _ => o.b_tilde,
            });
            out.push_str(&format!(
                "{name},{},{},{},{},{}\n",
                est.value,
                est.terms_used,
                est.tail_bound,
                mc.map(|m| m.mean.to_string()).unwrap_or_default(),
                mc.map(|m| m.stderr.to_string()).unwrap_or_default(),
            ));
        }
    } else if let Some(o) = &report.oracle {
        for (name, est) in [("a", o.a), ("a_tilde", o.a_tilde), ("b", o.b), ("b_tilde", o.b_tilde)]
        {
            out.push_str(&format!("{name},,,,{},{}\n", est.mean, est.stderr));
        }
    }
    out
}

fn cmd_constants(args: ConstantsArgs) -> Result<(), CliError> {
    let pair = parse_pair(&args.pair)?;
    if args.tol.is_nan() || args.tol <= 0.0 {
        return Err(CliError::Config(format!(
            "--tol must be positive, got {}",
            args.tol
        )));
    }
    // the series route; custom non-arithmetic pairs may fall back to the
    // oracle alone when --oracle is given
    let series = match constants_series(&pair, args.tol) {
        Ok(sc) => Some(sc),
        Err(Error::UnsupportedPair) if args.oracle => None,
        Err(e) => return Err(e.into()),
    };
    let oracle = if args.oracle {
        let boundary = args
            .boundary
            .unwrap_or_else(|| default_mc_boundary(&pair.moments()));
        if boundary.is_nan() || boundary <= 0.0 {
            return Err(CliError::Config("--boundary must be positive".into()));
        }
        Some(constants_overshoot_mc(
            &pair,
            boundary,
            args.trials.max(1),
            StreamKey::new(args.seed, 0),
        ))
    } else {
        None
    };
    let agreement = match (&series, &oracle) {
        (Some(sc), Some(o)) => Some(
            [
                ("a", sc.a, o.a),
                ("a_tilde", sc.a_tilde, o.a_tilde),
                ("b", sc.b, o.b),
                ("b_tilde", sc.b_tilde, o.b_tilde),
            ]
            .into_iter()
            .map(|(name, s, m)| AgreementRow {
                constant: name,
                series: s.value,
                tail_bound: s.tail_bound,
                mc_mean: m.mean,
                mc_stderr: m.stderr,
                sigmas: (s.value - m.mean).abs() / m.stderr.max(1e-300),
            })
            .collect(),
        ),
        _ => None,
    };
    let report = ConstantsReport {
        schema: SCHEMA,
        pair: pair.spec().clone(),
        tol: args.tol,
        series,
        oracle,
        agreement,
    };
    let format = args.common.format.unwrap_or(Format::Json);
    let text = match format {
        Format::Json => output::to_json(&report)?,
        Format::Csv => constants_csv(&report),
    };
    write_output(&text, args.common.out.as_deref())
}

#[derive(Serialize)]
struct ExponentsReport {
    schema: &'static str,
    pair: PairSpec,
    #[serde(skip_serializing_if = "Option::is_none")]
    constants: Option<seqexp::RenewalConstants>,
    reports: Vec<ExponentReport>,
}

fn exponents_csv(report: &ExponentsReport) -> String {
    let mut out = format!("#schema={SCHEMA}\nconstraint,lambda,eps,first_order,second_order,normalization\n");
    for r in &report.reports {
        let (name, eps) = match r.constraint {
            seqexp::Constraint::Probabilistic { eps } => ("probabilistic", eps.to_string()),
            seqexp::Constraint::Expectation => ("expectation", String::new()),
        };
        let norm = match r.normalization {
            seqexp::Normalization::PerSqrtN => "per_sqrt_n",
            seqexp::Normalization::PerUnit => "per_unit",
        };
        out.push_str(&format!(
            "{name},{},{eps},{},{},{norm}\n",
            r.lambda, r.first_order, r.second_order
        ));
    }
    out
}

fn cmd_exponents(args: ExponentsArgs) -> Result<(), CliError> {
    let pair = parse_pair(&args.pair)?;
    let ms = pair.moments();
    let mut constants = None;
    let mut reports = Vec::new();
    match args.constraint {
        ConstraintArg::Prob => {
            let eps = args.eps.ok_or_else(|| {
                CliError::Config("--constraint prob requires --eps".into())
            })?;
            for &lambda in &args.lambda {
                reports.push(second_order_probabilistic(&ms, lambda, eps)?);
            }
        }
        ConstraintArg::Expect => {
            let rc = constants_series(&pair, args.tol)?.constants();
            for &lambda in &args.lambda {
                reports.push(second_order_expectation(&ms, &rc, lambda)?);
            }
            constants = Some(rc);
        }
    }
    let report = ExponentsReport {
        schema: SCHEMA,
        pair: pair.spec().clone(),
        constants,
        reports,
    };
    let format = args.common.format.unwrap_or(Format::Json);
    let text = match format {
        Format::Json => output::to_json(&report)?,
        Format::Csv => exponents_csv(&report),
    };
    write_output(&text, args.common.out.as_deref())
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), CliError> {
    let raw = std::fs::read_to_string(&args.config)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", args.config.display())))?;
    let mut plan: ExperimentPlan = serde_json::from_str(&raw)
        .map_err(|e| CliError::Config(format!("cannot parse plan: {e}")))?;
    if let Some(seed) = args.seed {
        plan.seed = seed;
    }
    if let Some(workers) = args.workers {
        plan.workers = Some(workers);
    }
    if let Some(trials) = args.trials {
        plan.trials = trials;
    }
    if let Some(eta) = args.eta {
        for point in &mut plan.points {
            if let Some(p) = &mut point.probabilistic {
                p.eta = eta;
            }
        }
    }
    let report = run_plan(&plan)?;
    let format = args.common.format.unwrap_or(Format::Csv);
    let text = match format {
        Format::Json => output::to_json(&report)?,
        Format::Csv => plan_report_csv(&report),
    };
    write_output(&text, args.common.out.as_deref())?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    if report.has_invalid_points() {
        return Err(CliError::InvalidPoints(format!(
            "invalid points: {}",
            report.invalid_points.join(", ")
        )));
    }
    Ok(())
}
