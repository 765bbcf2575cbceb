//! Parameter-family sweeps and their machine-readable exports.
//!
//! A sweep walks a channel family in order (trial counts for the binomial
//! family, arrival probabilities for the particle channel), solving each
//! member and carrying the previous solution forward as the next warm
//! start.  Particle records are normalised by the symbol duration into
//! bits per second, which is the objective the arrival probability is
//! ultimately tuned against.

use std::fs;
use std::io;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::ba::SupportedDistribution;
use crate::channels::{derive_state, BinomialChannel, PicChannel, PicParams};
use crate::closed_form::binary_capacity_rate;
use crate::dab::{cold_start, dab_solve, warm_start_from, DabConfig, DabResult, SolveError};
use crate::search::golden_section_max;

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("family index {index} failed: {source}")]
    Solve {
        index: f64,
        #[source]
        source: SolveError,
    },
    #[error("{0}")]
    InvalidRange(&'static str),
}

/// One solved family member.
///
/// The duration, particle-budget, and rate fields only apply to particle
/// sweeps and stay empty for the binomial family.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRecord {
    /// Trial count n or arrival probability rho.
    pub family_index: f64,
    pub tau_seconds: Option<f64>,
    pub m_rho: Option<usize>,
    pub theta_rho: Option<f64>,
    /// Certified capacity of this member, bits per channel use.
    pub capacity_per_use: f64,
    /// capacity_per_use / tau, bits per second.
    pub capacity_rate: Option<f64>,
    /// Closed-form best binary-input rate, bits per second.
    pub binary_rate: Option<f64>,
    pub support: SupportedDistribution,
    pub iterations: usize,
    pub gap_bits: f64,
}

/// A family member that failed to solve in a sweep that carries on.
#[derive(Debug, Clone, Serialize)]
pub struct SweepFailure {
    pub family_index: f64,
    pub message: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    pub records: Vec<SweepRecord>,
    /// Index into `records` of the best bits-per-second entry; absent when
    /// no record carries a rate.
    pub optimum_index: Option<usize>,
    /// First arrival probability whose support outgrows two points,
    /// reported as the midpoint of the bracketing grid interval.
    pub binary_transition_rho: Option<f64>,
    pub failures: Vec<SweepFailure>,
}

impl SweepResult {
    pub fn optimum(&self) -> Option<&SweepRecord> {
        self.optimum_index.map(|i| &self.records[i])
    }
}

/// How a sweep schedules its solves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SweepMode {
    /// In family order, each solve warm-started from the previous one.
    #[default]
    WarmSequential,
    /// Every member solved independently from a cold start, in parallel;
    /// results merged back in family order.
    ColdParallel,
}

fn binomial_record(
    n: usize,
    config: &DabConfig,
    initial: &SupportedDistribution,
) -> Result<(SweepRecord, DabResult), SweepError> {
    let channel = BinomialChannel::new(n).expect("trial count is validated by the range check");
    let result = dab_solve(&channel, config, initial).map_err(|source| SweepError::Solve {
        index: n as f64,
        source,
    })?;
    let record = SweepRecord {
        family_index: n as f64,
        tau_seconds: None,
        m_rho: None,
        theta_rho: None,
        capacity_per_use: result.capacity,
        capacity_rate: None,
        binary_rate: None,
        support: result.dist.clone(),
        iterations: result.iterations,
        gap_bits: result.bounds.gap,
    };
    Ok((record, result))
}

/// Solve the binomial family for every trial count in `n_min..=n_max`.
///
/// Sequential mode hands each solution to the next trial count as a warm
/// start.  Any member failing to solve aborts the sweep with the failing
/// count attached.
pub fn sweep_binomial_mode(
    n_min: usize,
    n_max: usize,
    config: &DabConfig,
    mode: SweepMode,
) -> Result<SweepResult, SweepError> {
    if n_min < 1 || n_min > n_max {
        return Err(SweepError::InvalidRange(
            "trial counts must satisfy 1 <= n_min <= n_max",
        ));
    }
    let records = match mode {
        SweepMode::WarmSequential => {
            let mut records = Vec::with_capacity(n_max - n_min + 1);
            let mut previous: Option<DabResult> = None;
            for n in n_min..=n_max {
                let initial = match &previous {
                    Some(prev) => {
                        let channel = BinomialChannel::new(n)
                            .expect("trial count is validated by the range check");
                        warm_start_from(prev, &channel)
                    }
                    None => cold_start(),
                };
                let (record, result) = binomial_record(n, config, &initial)?;
                records.push(record);
                previous = Some(result);
            }
            records
        }
        SweepMode::ColdParallel => (n_min..=n_max)
            .into_par_iter()
            .map(|n| binomial_record(n, config, &cold_start()).map(|(record, _)| record))
            .collect::<Result<Vec<_>, _>>()?,
    };
    Ok(SweepResult {
        records,
        optimum_index: None,
        binary_transition_rho: None,
        failures: Vec::new(),
    })
}

/// `sweep_binomial_mode` in the default warm-started sequential mode.
pub fn sweep_binomial(
    n_min: usize,
    n_max: usize,
    config: &DabConfig,
) -> Result<SweepResult, SweepError> {
    sweep_binomial_mode(n_min, n_max, config, SweepMode::WarmSequential)
}

fn pic_record(
    params: &PicParams,
    rho: f64,
    config: &DabConfig,
    initial: &SupportedDistribution,
) -> Result<(SweepRecord, DabResult), String> {
    let state = derive_state(params, rho).map_err(|e| e.to_string())?;
    let channel = PicChannel::new(state);
    let result = dab_solve(&channel, config, initial).map_err(|e| e.to_string())?;
    let rate = result.capacity / state.tau;
    let record = SweepRecord {
        family_index: rho,
        tau_seconds: Some(state.tau),
        m_rho: Some(state.m_rho),
        theta_rho: Some(state.theta_rho),
        capacity_per_use: result.capacity,
        capacity_rate: Some(rate),
        binary_rate: Some(binary_capacity_rate(params.transport(), &state)),
        support: result.dist.clone(),
        iterations: result.iterations,
        gap_bits: result.bounds.gap,
    };
    Ok((record, result))
}

fn pic_summary(mut records: Vec<SweepRecord>, failures: Vec<SweepFailure>) -> SweepResult {
    records.sort_by(|a, b| a.family_index.total_cmp(&b.family_index));
    let optimum_index = records
        .iter()
        .enumerate()
        .filter_map(|(i, r)| r.capacity_rate.map(|v| (i, v)))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(i, _)| i);
    let binary_transition_rho = records
        .iter()
        .position(|r| r.support.len() > 2)
        .map(|i| {
            if i == 0 {
                records[0].family_index
            } else {
                (records[i - 1].family_index + records[i].family_index) / 2.0
            }
        });
    SweepResult {
        records,
        optimum_index,
        binary_transition_rho,
        failures,
    }
}

/// Solve the particle channel over an increasing grid of arrival
/// probabilities.
///
/// Per grid point: derive the channel state, solve it (warm-started from
/// the previous point in sequential mode), and record both the certified
/// rate and the closed-form binary rate.  A failing point is recorded and
/// skipped; the sweep continues.
pub fn sweep_pic_mode(
    params: &PicParams,
    rho_grid: &[f64],
    config: &DabConfig,
    mode: SweepMode,
) -> Result<SweepResult, SweepError> {
    if rho_grid.is_empty() {
        return Err(SweepError::InvalidRange("rho grid must not be empty"));
    }
    let eta = params.transport().eta();
    if rho_grid.iter().any(|&r| !(r > 0.0 && r < eta)) {
        return Err(SweepError::InvalidRange(
            "rho values must lie strictly inside (0, eta)",
        ));
    }
    if rho_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(SweepError::InvalidRange("rho grid must be increasing"));
    }
    let mut failures = Vec::new();
    let records = match mode {
        SweepMode::WarmSequential => {
            let mut records = Vec::with_capacity(rho_grid.len());
            let mut previous: Option<DabResult> = None;
            for &rho in rho_grid {
                let initial = match (&previous, derive_state(params, rho)) {
                    (Some(prev), Ok(state)) => warm_start_from(prev, &PicChannel::new(state)),
                    _ => cold_start(),
                };
                match pic_record(params, rho, config, &initial) {
                    Ok((record, result)) => {
                        records.push(record);
                        previous = Some(result);
                    }
                    Err(message) => failures.push(SweepFailure {
                        family_index: rho,
                        message,
                    }),
                }
            }
            records
        }
        SweepMode::ColdParallel => {
            let solved: Vec<Result<SweepRecord, SweepFailure>> = rho_grid
                .par_iter()
                .map(|&rho| {
                    pic_record(params, rho, config, &cold_start())
                        .map(|(record, _)| record)
                        .map_err(|message| SweepFailure {
                            family_index: rho,
                            message,
                        })
                })
                .collect();
            let mut records = Vec::with_capacity(rho_grid.len());
            for item in solved {
                match item {
                    Ok(record) => records.push(record),
                    Err(failure) => failures.push(failure),
                }
            }
            records
        }
    };
    Ok(pic_summary(records, failures))
}

/// `sweep_pic_mode` in the default warm-started sequential mode.
pub fn sweep_pic(
    params: &PicParams,
    rho_grid: &[f64],
    config: &DabConfig,
) -> Result<SweepResult, SweepError> {
    sweep_pic_mode(params, rho_grid, config, SweepMode::WarmSequential)
}

/// The grid argmax of bits per second: (rho_star, rate).  Absent when no
/// record carries a rate.
pub fn find_optimal_rho(sweep: &SweepResult) -> Option<(f64, f64)> {
    sweep
        .optimum()
        .and_then(|r| r.capacity_rate.map(|v| (r.family_index, v)))
}

/// Refine the grid argmax by golden sections over the bracketing grid
/// interval, re-solving the channel at every probe.
///
/// Probes warm-start from the grid optimum's support.  Never returns a
/// rate below the grid argmax; a failing probe simply scores nothing.
pub fn refine_optimal_rho(
    params: &PicParams,
    sweep: &SweepResult,
    config: &DabConfig,
) -> Option<(f64, f64)> {
    let best = sweep.optimum_index?;
    let records = &sweep.records;
    let (rho0, rate0) = find_optimal_rho(sweep)?;
    let lo = if best > 0 {
        records[best - 1].family_index
    } else {
        rho0
    };
    let hi = if best + 1 < records.len() {
        records[best + 1].family_index
    } else {
        rho0
    };
    if !(lo < hi) {
        return Some((rho0, rate0));
    }
    let initial = records[best].support.clone();
    let rate_at = |rho: f64| -> f64 {
        match pic_record(params, rho, config, &initial) {
            Ok((record, _)) => record.capacity_rate.expect("particle records carry a rate"),
            Err(_) => f64::NEG_INFINITY,
        }
    };
    let (rho, rate) = golden_section_max(lo, hi, (hi - lo) * 1e-2, rate_at);
    if rate > rate0 {
        Some((rho, rate))
    } else {
        Some((rho0, rate0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Csv,
    Json,
}

/// Twelve significant digits, enough to reproduce every solver tolerance
/// on re-import.
fn fmt(v: f64) -> String {
    format!("{v:.11e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt).unwrap_or_default()
}

/// Write a sweep to `path`.
///
/// CSV produces the flat record table plus a `<path>.support.csv`
/// companion holding every mass point; JSON produces a single document
/// with the supports embedded.
pub fn export(sweep: &SweepResult, format: ExportFormat, path: &Path) -> io::Result<()> {
    match format {
        ExportFormat::Csv => {
            let mut main = String::from(
                "family_index,tau_seconds,m_rho,theta_rho,capacity_bits_per_use,\
                 rate_bits_per_sec,binary_rate_bits_per_sec,support_size,gap_bits,iterations\n",
            );
            for r in &sweep.records {
                main.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{},{}\n",
                    fmt(r.family_index),
                    fmt_opt(r.tau_seconds),
                    r.m_rho.map(|m| m.to_string()).unwrap_or_default(),
                    fmt_opt(r.theta_rho),
                    fmt(r.capacity_per_use),
                    fmt_opt(r.capacity_rate),
                    fmt_opt(r.binary_rate),
                    r.support.len(),
                    fmt(r.gap_bits),
                    r.iterations,
                ));
            }
            fs::write(path, main)?;
            let mut support = String::from("family_index,location,probability\n");
            for r in &sweep.records {
                for (&x, &p) in r.support.locations().iter().zip(r.support.probs()) {
                    support.push_str(&format!("{},{},{}\n", fmt(r.family_index), fmt(x), fmt(p)));
                }
            }
            let mut companion = path.as_os_str().to_owned();
            companion.push(".support.csv");
            fs::write(companion, support)
        }
        ExportFormat::Json => {
            let doc = serde_json::to_string_pretty(sweep)
                .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?;
            fs::write(path, doc)
        }
    }
}
