//! Channel laws over the unit-interval input and finite count outputs.
//!
//! Three laws share one interface: the binomial channel of order n, the
//! particle-intensity channel (a binomial of order m_rho with success
//! probability x * theta_rho), and its Poisson approximation.  A diffusive
//! transport model maps the arrival probability rho to the symbol duration
//! tau and thence to the derived pair (m_rho, theta_rho).
//!
//! All PMFs are evaluated in log space from a shared factorial table, so
//! orders well beyond 10^5 stay finite and accurate.

use crate::erf::erfcinv;
use crate::numeric::LnFactorials;
use thiserror::Error;

/// Output alphabets at least this large are summed over a central window
/// instead of in full; the neglected tail mass is below 1e-30.
const WINDOW_THRESHOLD: usize = 4096;

/// Window half-width in standard deviations, plus an absolute pad that
/// keeps small-mean rows fully covered.
const WINDOW_SIGMAS: f64 = 12.0;
const WINDOW_PAD: usize = 40;

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("trial count must be at least 1")]
    ZeroTrials,
    #[error("{name} must lie in {range}, got {value}")]
    ParameterOutOfRange {
        name: &'static str,
        range: &'static str,
        value: f64,
    },
    #[error("output symbol {y} outside alphabet of size {size}")]
    SymbolOutOfRange { y: usize, size: usize },
    #[error("arrival probability {rho} must lie strictly inside (0, {eta})")]
    ArrivalOutOfRange { rho: f64, eta: f64 },
    #[error("symbol duration too short to generate any particle")]
    NoParticles,
}

/// Conditional PMF p(y | x) over the output alphabet {0, ..., output_size-1}
/// with a release-probability input x in [0, 1].
///
/// `log_pmf` uses natural logs and returns -inf for impossible outputs.
/// `support_window` bounds the y range outside of which the row mass is
/// negligible; summing over it is equivalent to summing the full alphabet
/// for every tolerance used in this crate.
pub trait ChannelLaw: Sync {
    fn output_size(&self) -> usize;

    fn log_pmf(&self, x: f64, y: usize) -> f64;

    fn pmf(&self, x: f64, y: usize) -> f64 {
        self.log_pmf(x, y).exp()
    }

    /// Inclusive (lo, hi) bounds on the outputs carrying the row's mass.
    fn support_window(&self, _x: f64) -> (usize, usize) {
        (0, self.output_size() - 1)
    }

    /// d/dx ln p(y|x) where an analytic form exists; +-inf at input
    /// endpoints where the log-likelihood slope diverges.
    fn dlog_pmf_dx(&self, _x: f64, _y: usize) -> Option<f64> {
        None
    }
}

fn check_prob(name: &'static str, value: f64, allow_zero: bool) -> Result<(), ChannelError> {
    let ok = if allow_zero {
        (0.0..=1.0).contains(&value)
    } else {
        value > 0.0 && value <= 1.0
    };
    if ok {
        Ok(())
    } else {
        Err(ChannelError::ParameterOutOfRange {
            name,
            range: if allow_zero { "[0, 1]" } else { "(0, 1]" },
            value,
        })
    }
}

/// Diffusive transport: first-arrival probability within t follows a scaled
/// Levy law with CDF eta * erfc(sqrt(c / 2t)).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransportModel {
    c: f64,
    eta: f64,
}

impl TransportModel {
    pub fn new(c: f64, eta: f64) -> Result<Self, ChannelError> {
        if !(c > 0.0) || !c.is_finite() {
            return Err(ChannelError::ParameterOutOfRange {
                name: "c",
                range: "(0, inf)",
                value: c,
            });
        }
        check_prob("eta", eta, false)?;
        Ok(TransportModel { c, eta })
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// Symbol duration giving arrival probability exactly rho.
    pub fn levy_icdf(&self, rho: f64) -> Result<f64, ChannelError> {
        levy_icdf(self, rho)
    }
}

/// Inverse CDF of the scaled Levy arrival law: tau = c / (2 erfcinv^2(rho/eta)).
///
/// Strictly increasing in rho and divergent as rho approaches eta, the
/// total probability that a particle ever arrives.
pub fn levy_icdf(transport: &TransportModel, rho: f64) -> Result<f64, ChannelError> {
    if !(rho > 0.0 && rho < transport.eta) {
        return Err(ChannelError::ArrivalOutOfRange {
            rho,
            eta: transport.eta,
        });
    }
    // rho/eta < 1, so the inverse is strictly positive and tau finite
    let t = erfcinv(rho / transport.eta).expect("ratio checked in (0, 1)");
    Ok(transport.c / (2.0 * t * t))
}

/// Physical parameters of the particle-intensity link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PicParams {
    alpha: f64,
    beta: f64,
    lambda_gen: f64,
    transport: TransportModel,
}

impl PicParams {
    pub fn new(
        alpha: f64,
        beta: f64,
        lambda_gen: f64,
        transport: TransportModel,
    ) -> Result<Self, ChannelError> {
        check_prob("alpha", alpha, false)?;
        check_prob("beta", beta, false)?;
        if !(lambda_gen > 0.0) || !lambda_gen.is_finite() {
            return Err(ChannelError::ParameterOutOfRange {
                name: "lambda_gen",
                range: "(0, inf)",
                value: lambda_gen,
            });
        }
        Ok(PicParams {
            alpha,
            beta,
            lambda_gen,
            transport,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn lambda_gen(&self) -> f64 {
        self.lambda_gen
    }

    pub fn transport(&self) -> &TransportModel {
        &self.transport
    }
}

/// Quantities fixed by a choice of rho: the symbol duration, the particle
/// budget m_rho = floor(lambda * tau), and the end-to-end per-particle
/// detection probability theta_rho = alpha * rho * beta.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedChannelState {
    pub rho: f64,
    pub tau: f64,
    pub m_rho: usize,
    pub theta_rho: f64,
}

impl DerivedChannelState {
    /// Assemble a state directly; used for corner cases (theta = 1 turns the
    /// particle channel into a plain binomial) and tests.
    pub fn from_parts(
        rho: f64,
        tau: f64,
        m_rho: usize,
        theta_rho: f64,
    ) -> Result<Self, ChannelError> {
        check_prob("rho", rho, false)?;
        check_prob("theta_rho", theta_rho, false)?;
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(ChannelError::ParameterOutOfRange {
                name: "tau",
                range: "(0, inf)",
                value: tau,
            });
        }
        if m_rho == 0 {
            return Err(ChannelError::NoParticles);
        }
        Ok(DerivedChannelState {
            rho,
            tau,
            m_rho,
            theta_rho,
        })
    }
}

/// Derive (tau, m_rho, theta_rho) for an arrival probability rho.
pub fn derive_state(params: &PicParams, rho: f64) -> Result<DerivedChannelState, ChannelError> {
    let tau = levy_icdf(&params.transport, rho)?;
    let m_rho = (params.lambda_gen * tau).floor() as usize;
    if m_rho == 0 {
        return Err(ChannelError::NoParticles);
    }
    let theta_rho = params.alpha * rho * params.beta;
    Ok(DerivedChannelState {
        rho,
        tau,
        m_rho,
        theta_rho,
    })
}

/// ln of the binomial PMF of order n and success probability s at count y,
/// via the factorial table.  Conventions: 0^0 = 1, impossible outputs -inf.
///
/// The coefficient and power terms each reach thousands of nats before
/// cancelling to order one, so the combination keeps the coefficient's
/// residual and orders the additions to preserve absolute accuracy.
fn binomial_log_pmf(table: &LnFactorials, n: usize, s: f64, y: usize) -> f64 {
    debug_assert!(y <= n);
    if s <= 0.0 {
        return if y == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    if s >= 1.0 {
        return if y == n { 0.0 } else { f64::NEG_INFINITY };
    }
    let yf = y as f64;
    let nf = n as f64;
    let (lc, lc_res) = table.ln_choose_parts(n, y);
    let power = yf * s.ln() + (nf - yf) * (-s).ln_1p();
    let main = lc + power;
    let residual = (lc - (main - power)) + lc_res;
    main + residual
}

fn binomial_window(n: usize, s: f64) -> (usize, usize) {
    if n + 1 <= WINDOW_THRESHOLD {
        return (0, n);
    }
    let nf = n as f64;
    let mean = nf * s;
    let pad = WINDOW_SIGMAS * (mean * (1.0 - s)).sqrt() + WINDOW_PAD as f64;
    let lo = (mean - pad).floor().max(0.0) as usize;
    let hi = ((mean + pad).ceil() as usize).min(n);
    (lo, hi)
}

/// Binomial channel of order n: y successes out of n trials with per-trial
/// probability x.
pub struct BinomialChannel {
    n: usize,
    table: LnFactorials,
}

impl BinomialChannel {
    pub fn new(n: usize) -> Result<Self, ChannelError> {
        if n == 0 {
            return Err(ChannelError::ZeroTrials);
        }
        Ok(BinomialChannel {
            n,
            table: LnFactorials::up_to(n),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }
}

impl ChannelLaw for BinomialChannel {
    fn output_size(&self) -> usize {
        self.n + 1
    }

    fn log_pmf(&self, x: f64, y: usize) -> f64 {
        debug_assert!((0.0..=1.0).contains(&x));
        binomial_log_pmf(&self.table, self.n, x, y)
    }

    fn support_window(&self, x: f64) -> (usize, usize) {
        binomial_window(self.n, x)
    }

    fn dlog_pmf_dx(&self, x: f64, y: usize) -> Option<f64> {
        let yf = y as f64;
        let nf = self.n as f64;
        let lead = if y == 0 { 0.0 } else { yf / x };
        let tail = if y == self.n { 0.0 } else { (nf - yf) / (1.0 - x) };
        Some(lead - tail)
    }
}

/// Particle-intensity channel: m_rho trials with success probability
/// x * theta_rho.
pub struct PicChannel {
    state: DerivedChannelState,
    table: LnFactorials,
}

impl PicChannel {
    pub fn new(state: DerivedChannelState) -> Self {
        let table = LnFactorials::up_to(state.m_rho);
        PicChannel { state, table }
    }

    pub fn state(&self) -> &DerivedChannelState {
        &self.state
    }
}

impl ChannelLaw for PicChannel {
    fn output_size(&self) -> usize {
        self.state.m_rho + 1
    }

    fn log_pmf(&self, x: f64, y: usize) -> f64 {
        debug_assert!((0.0..=1.0).contains(&x));
        binomial_log_pmf(&self.table, self.state.m_rho, x * self.state.theta_rho, y)
    }

    fn support_window(&self, x: f64) -> (usize, usize) {
        binomial_window(self.state.m_rho, x * self.state.theta_rho)
    }

    fn dlog_pmf_dx(&self, x: f64, y: usize) -> Option<f64> {
        let yf = y as f64;
        let m = self.state.m_rho as f64;
        let theta = self.state.theta_rho;
        let lead = if y == 0 { 0.0 } else { yf / x };
        let tail = if y == self.state.m_rho {
            0.0
        } else {
            theta * (m - yf) / (1.0 - x * theta)
        };
        Some(lead - tail)
    }
}

/// Poisson channel with mean peak_mean * x, the large-m small-theta limit
/// of the particle channel with peak_mean = m_rho * theta_rho.
///
/// The output alphabet is truncated at the smallest count whose upper tail
/// at x = 1 is below `POISSON_TAIL`.
pub struct PoissonChannel {
    peak_mean: f64,
    cutoff: usize,
    table: LnFactorials,
}

const POISSON_TAIL: f64 = 1e-12;

impl PoissonChannel {
    pub fn new(peak_mean: f64) -> Result<Self, ChannelError> {
        if !(peak_mean > 0.0) || !peak_mean.is_finite() {
            return Err(ChannelError::ParameterOutOfRange {
                name: "peak_mean",
                range: "(0, inf)",
                value: peak_mean,
            });
        }
        // walk the CDF at the worst-case mean until the remainder drops;
        // terms tracked in log space so large means do not underflow to a
        // stuck zero before the mode
        let mut cumulative = 0.0_f64;
        let mut ln_term = -peak_mean;
        let mut y = 0usize;
        let cutoff = loop {
            cumulative += ln_term.exp();
            if 1.0 - cumulative < POISSON_TAIL {
                break y;
            }
            y += 1;
            ln_term += (peak_mean / y as f64).ln();
            if y > 40_000_000 {
                return Err(ChannelError::ParameterOutOfRange {
                    name: "peak_mean",
                    range: "(0, ~1e7)",
                    value: peak_mean,
                });
            }
        };
        Ok(PoissonChannel {
            peak_mean,
            cutoff,
            table: LnFactorials::up_to(cutoff),
        })
    }

    pub fn from_state(state: &DerivedChannelState) -> Result<Self, ChannelError> {
        PoissonChannel::new(state.m_rho as f64 * state.theta_rho)
    }

    pub fn peak_mean(&self) -> f64 {
        self.peak_mean
    }
}

impl ChannelLaw for PoissonChannel {
    fn output_size(&self) -> usize {
        self.cutoff + 1
    }

    fn log_pmf(&self, x: f64, y: usize) -> f64 {
        debug_assert!((0.0..=1.0).contains(&x));
        let mean = self.peak_mean * x;
        if mean <= 0.0 {
            return if y == 0 { 0.0 } else { f64::NEG_INFINITY };
        }
        y as f64 * mean.ln() - mean - self.table.ln_factorial(y)
    }

    fn support_window(&self, x: f64) -> (usize, usize) {
        if self.cutoff + 1 <= WINDOW_THRESHOLD {
            return (0, self.cutoff);
        }
        let mean = self.peak_mean * x;
        let pad = WINDOW_SIGMAS * mean.sqrt() + WINDOW_PAD as f64;
        let lo = (mean - pad).floor().max(0.0) as usize;
        let hi = ((mean + pad).ceil() as usize).min(self.cutoff);
        (lo, hi)
    }

    fn dlog_pmf_dx(&self, x: f64, y: usize) -> Option<f64> {
        let lead = if y == 0 { 0.0 } else { y as f64 / x };
        Some(lead - self.peak_mean)
    }
}

/// Binomial PMF value; the general-n entry point with domain checks.
pub fn binomial_pmf(n: usize, x: f64, y: usize) -> Result<f64, ChannelError> {
    if n == 0 {
        return Err(ChannelError::ZeroTrials);
    }
    if y > n {
        return Err(ChannelError::SymbolOutOfRange { y, size: n + 1 });
    }
    check_prob("x", x, true)?;
    let table = LnFactorials::up_to(n);
    Ok(binomial_log_pmf(&table, n, x, y).exp())
}

/// Particle-channel PMF: binomial of order m_rho at success probability
/// x * theta_rho.
pub fn pic_pmf(state: &DerivedChannelState, x: f64, y: usize) -> Result<f64, ChannelError> {
    if y > state.m_rho {
        return Err(ChannelError::SymbolOutOfRange {
            y,
            size: state.m_rho + 1,
        });
    }
    check_prob("x", x, true)?;
    let table = LnFactorials::up_to(state.m_rho);
    Ok(binomial_log_pmf(&table, state.m_rho, x * state.theta_rho, y).exp())
}

/// Poisson PMF with mean x * theta_rho * m_rho.
pub fn poisson_pmf(state: &DerivedChannelState, x: f64, y: usize) -> Result<f64, ChannelError> {
    check_prob("x", x, true)?;
    let mean = x * state.theta_rho * state.m_rho as f64;
    if mean <= 0.0 {
        return Ok(if y == 0 { 1.0 } else { 0.0 });
    }
    let table = LnFactorials::up_to(y);
    Ok((y as f64 * mean.ln() - mean - table.ln_factorial(y)).exp())
}
