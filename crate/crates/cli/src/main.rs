//! Command line front end for the capacity solvers: binomial and particle
//! sweeps with CSV/JSON export, the closed-form binary summary, and the
//! ellipsoid baseline.
//!
//! Exit codes: 0 on success, 1 when a solver fails, 2 on bad arguments.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use picap::channels::{derive_state, BinomialChannel, ChannelLaw, PicChannel, PicParams, TransportModel};
use picap::closed_form::binary_summary;
use picap::dab::{cold_start, dab_solve, BirthRule, DabConfig, DirectionStrategy};
use picap::ellipsoid::{cold_start_dual, solve_dual};
use picap::sweep::{
    export, refine_optimal_rho, sweep_binomial_mode, sweep_pic_mode, ExportFormat, SweepError,
    SweepMode, SweepResult,
};

#[derive(Parser)]
#[command(
    name = "picap",
    version,
    about = "Capacity solvers for release-probability particle channels"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep the binomial counting family over a range of trial counts
    Binomial(BinomialArgs),
    /// Sweep the particle channel over an arrival-probability grid
    Pic(PicArgs),
    /// Closed-form binary-input summary at one arrival probability
    Binary(BinaryArgs),
    /// Ellipsoid dual baseline on one binomial member
    Ellipsoid(EllipsoidArgs),
}

#[derive(Args)]
struct BinomialArgs {
    #[arg(long, default_value_t = 1)]
    n_min: usize,
    #[arg(long, default_value_t = 10)]
    n_max: usize,
    /// Certification tolerance in bits
    #[arg(long, default_value_t = 1e-5)]
    epsilon: f64,
    /// Record file to write; prints a summary table when omitted
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Solve members independently from cold starts, in parallel
    #[arg(long)]
    parallel: bool,
    /// Write the outer iterations of a standalone solve of the largest
    /// member as JSON lines
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct PicArgs {
    /// Release probability scale
    #[arg(long)]
    alpha: f64,
    /// Detector efficiency
    #[arg(long)]
    beta: f64,
    /// Particle generation rate, per second
    #[arg(long)]
    lambda: f64,
    /// Transport time constant, seconds
    #[arg(long)]
    c: f64,
    /// Fraction of released particles that ever arrive
    #[arg(long)]
    eta: f64,
    #[arg(long, default_value_t = 0.005)]
    rho_min: f64,
    #[arg(long, default_value_t = 0.08)]
    rho_max: f64,
    /// Number of grid points between rho-min and rho-max inclusive
    #[arg(long, default_value_t = 40)]
    rho_steps: usize,
    /// Certification tolerance in bits
    #[arg(long, default_value_t = 1e-5)]
    epsilon: f64,
    #[arg(long, value_enum, default_value_t = Strategy::MaxDerivative)]
    strategy: Strategy,
    #[arg(long, value_enum, default_value_t = Birth::NegligibleRate)]
    birth_rule: Birth,
    /// Record file to write; prints a summary table when omitted
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Solve grid points independently from cold starts, in parallel
    #[arg(long)]
    parallel: bool,
    /// Golden-section refine the optimal arrival probability between its
    /// neighbouring grid points
    #[arg(long)]
    refine: bool,
    /// Write the outer iterations of a standalone solve at the optimal
    /// grid point as JSON lines
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct BinaryArgs {
    #[arg(long)]
    alpha: f64,
    #[arg(long)]
    beta: f64,
    #[arg(long)]
    lambda: f64,
    #[arg(long)]
    c: f64,
    #[arg(long)]
    eta: f64,
    /// Arrival probability to evaluate
    #[arg(long)]
    rho: f64,
}

#[derive(Args)]
struct EllipsoidArgs {
    /// Trial count of the binomial member to solve
    #[arg(long)]
    n: usize,
    /// Dual suboptimality target in bits
    #[arg(long, default_value_t = 1e-5)]
    tol: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl From<Format> for ExportFormat {
    fn from(f: Format) -> ExportFormat {
        match f {
            Format::Csv => ExportFormat::Csv,
            Format::Json => ExportFormat::Json,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Strategy {
    Proximity,
    MaxDerivative,
    RoundRobin,
    Gradient,
}

impl From<Strategy> for DirectionStrategy {
    fn from(s: Strategy) -> DirectionStrategy {
        match s {
            Strategy::Proximity => DirectionStrategy::ProximityToXMax,
            Strategy::MaxDerivative => DirectionStrategy::MaxDerivative,
            Strategy::RoundRobin => DirectionStrategy::RoundRobin,
            Strategy::Gradient => DirectionStrategy::Gradient,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Birth {
    MissingMassPoint,
    MinimumDerivative,
    NegligibleRate,
}

impl From<Birth> for BirthRule {
    fn from(b: Birth) -> BirthRule {
        match b {
            Birth::MissingMassPoint => BirthRule::MissingMassPoint,
            Birth::MinimumDerivative => BirthRule::MinimumDerivative,
            Birth::NegligibleRate => BirthRule::NegligibleRate,
        }
    }
}

struct AppError {
    message: String,
    code: u8,
}

fn usage(message: impl Into<String>) -> AppError {
    AppError {
        message: message.into(),
        code: 2,
    }
}

fn runtime(message: impl Into<String>) -> AppError {
    AppError {
        message: message.into(),
        code: 1,
    }
}

fn map_sweep(e: SweepError) -> AppError {
    match e {
        SweepError::InvalidRange(_) => usage(e.to_string()),
        SweepError::Solve { .. } => runtime(e.to_string()),
    }
}

fn checked_epsilon(epsilon: f64) -> Result<f64, AppError> {
    if epsilon > 0.0 && epsilon.is_finite() {
        Ok(epsilon)
    } else {
        Err(usage("--epsilon must be positive and finite"))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Binomial(a) => run_binomial(a),
        Command::Pic(a) => run_pic(a),
        Command::Binary(a) => run_binary(a),
        Command::Ellipsoid(a) => run_ellipsoid(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

fn run_binomial(a: BinomialArgs) -> Result<(), AppError> {
    let config = DabConfig {
        epsilon: checked_epsilon(a.epsilon)?,
        // the counting channel is invariant under x -> 1 - x
        symmetric: true,
        ..DabConfig::default()
    };
    let mode = if a.parallel {
        SweepMode::ColdParallel
    } else {
        SweepMode::WarmSequential
    };
    let sweep = sweep_binomial_mode(a.n_min, a.n_max, &config, mode).map_err(map_sweep)?;
    if let Some(path) = &a.trace {
        let channel =
            BinomialChannel::new(a.n_max).map_err(|e| usage(e.to_string()))?;
        write_trace(path, &channel, &config)?;
    }
    emit(&sweep, a.out.as_deref(), a.format)
}

fn run_pic(a: PicArgs) -> Result<(), AppError> {
    let config = DabConfig {
        epsilon: checked_epsilon(a.epsilon)?,
        direction_strategy: a.strategy.into(),
        birth_rule: a.birth_rule.into(),
        ..DabConfig::default()
    };
    let transport = TransportModel::new(a.c, a.eta).map_err(|e| usage(e.to_string()))?;
    let params =
        PicParams::new(a.alpha, a.beta, a.lambda, transport).map_err(|e| usage(e.to_string()))?;
    if a.rho_steps < 2 {
        return Err(usage("--rho-steps must be at least 2"));
    }
    if !(a.rho_min < a.rho_max) {
        return Err(usage("--rho-min must be below --rho-max"));
    }
    let step = (a.rho_max - a.rho_min) / (a.rho_steps - 1) as f64;
    let grid: Vec<f64> = (0..a.rho_steps)
        .map(|i| a.rho_min + step * i as f64)
        .collect();
    let mode = if a.parallel {
        SweepMode::ColdParallel
    } else {
        SweepMode::WarmSequential
    };
    let sweep = sweep_pic_mode(&params, &grid, &config, mode).map_err(map_sweep)?;
    for f in &sweep.failures {
        eprintln!("warning: rho {:.6}: {}", f.family_index, f.message);
    }
    if let Some(record) = sweep.optimum() {
        println!("optimum_rho = {:.11e}", record.family_index);
        println!(
            "optimum_rate_bits_per_sec = {:.11e}",
            record.capacity_rate.expect("particle records carry a rate")
        );
        println!("optimum_support_size = {}", record.support.len());
    }
    if let Some(rho) = sweep.binary_transition_rho {
        println!("binary_transition_rho = {:.11e}", rho);
    }
    if a.refine {
        if let Some((rho, rate)) = refine_optimal_rho(&params, &sweep, &config) {
            println!("refined_optimum_rho = {:.11e}", rho);
            println!("refined_optimum_rate_bits_per_sec = {:.11e}", rate);
        }
    }
    if let Some(path) = &a.trace {
        match sweep.optimum() {
            Some(record) => {
                let state = derive_state(&params, record.family_index)
                    .map_err(|e| runtime(e.to_string()))?;
                write_trace(path, &PicChannel::new(state), &config)?;
            }
            None => eprintln!("warning: no solved grid point, trace not written"),
        }
    }
    emit(&sweep, a.out.as_deref(), a.format)
}

fn run_binary(a: BinaryArgs) -> Result<(), AppError> {
    let transport = TransportModel::new(a.c, a.eta).map_err(|e| usage(e.to_string()))?;
    let params =
        PicParams::new(a.alpha, a.beta, a.lambda, transport).map_err(|e| usage(e.to_string()))?;
    let state = derive_state(&params, a.rho).map_err(|e| usage(e.to_string()))?;
    let summary = binary_summary(params.transport(), &state);
    println!("rho = {:.11e}", a.rho);
    println!("tau_seconds = {:.11e}", state.tau);
    println!("m_rho = {}", state.m_rho);
    println!("theta_rho = {:.11e}", state.theta_rho);
    println!("phi = {:.11e}", summary.phi);
    println!("p1_star = {:.11e}", summary.p1_star);
    println!("capacity_bits_per_use = {:.11e}", summary.capacity_per_use);
    println!("rate_bits_per_sec = {:.11e}", summary.capacity_rate);
    println!("poisson_mean = {:.11e}", summary.poisson_mean);
    println!("binary_likely_optimal = {}", summary.binary_likely_optimal);
    Ok(())
}

fn run_ellipsoid(a: EllipsoidArgs) -> Result<(), AppError> {
    if !(a.tol > 0.0 && a.tol.is_finite()) {
        return Err(usage("--tol must be positive and finite"));
    }
    let channel = BinomialChannel::new(a.n).map_err(|e| usage(e.to_string()))?;
    let (z0, p0) = cold_start_dual(&channel);
    let solution = solve_dual(&channel, &z0, &p0, a.tol).map_err(|e| runtime(e.to_string()))?;
    println!("iterations = {}", solution.iterations);
    println!("capacity_bits = {:.11e}", solution.capacity);
    println!("dual_value_bits = {:.11e}", solution.dual_value);
    println!("error_bound_bits = {:.11e}", solution.error_bound);
    println!("support_size = {}", solution.mass_points.len());
    Ok(())
}

/// One outer iteration in the JSON-lines trace stream.
#[derive(Serialize)]
struct TraceLine {
    k: usize,
    #[serde(rename = "N")]
    support_size: usize,
    #[serde(rename = "I_bits")]
    i_bits: f64,
    #[serde(rename = "D_max_bits")]
    d_max_bits: f64,
    x_max: f64,
    lambda_star: f64,
}

fn write_trace(path: &Path, channel: &dyn ChannelLaw, config: &DabConfig) -> Result<(), AppError> {
    let result =
        dab_solve(channel, config, &cold_start()).map_err(|e| runtime(e.to_string()))?;
    let mut doc = String::new();
    for r in &result.trace {
        let line = TraceLine {
            k: r.iteration,
            support_size: r.support_size,
            i_bits: r.mi_bits,
            d_max_bits: r.d_max_bits,
            x_max: r.x_max,
            lambda_star: r.lambda_star,
        };
        let encoded = serde_json::to_string(&line)
            .map_err(|e| runtime(format!("trace encoding failed: {e}")))?;
        let _ = writeln!(doc, "{encoded}");
    }
    fs::write(path, doc).map_err(|e| runtime(format!("{}: {e}", path.display())))
}

fn emit(sweep: &SweepResult, out: Option<&Path>, format: Format) -> Result<(), AppError> {
    match out {
        Some(path) => export(sweep, format.into(), path)
            .map_err(|e| runtime(format!("{}: {e}", path.display()))),
        None => {
            print_table(sweep);
            Ok(())
        }
    }
}

fn print_table(sweep: &SweepResult) {
    println!(
        "{:>12} {:>16} {:>16} {:>8} {:>10} {:>6}",
        "family_index", "capacity_bits", "rate_bits_sec", "support", "gap_bits", "iters"
    );
    for r in &sweep.records {
        let rate = r
            .capacity_rate
            .map(|v| format!("{v:.9}"))
            .unwrap_or_default();
        println!(
            "{:>12.6} {:>16.9} {:>16} {:>8} {:>10.2e} {:>6}",
            r.family_index,
            r.capacity_per_use,
            rate,
            r.support.len(),
            r.gap_bits,
            r.iterations
        );
    }
}
