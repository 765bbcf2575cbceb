//! Finite-support input distributions, mutual information, and the
//! fixed-support Blahut-Arimoto solver with certified bounds.
//!
//! Internals run in nats and convert to bits at the interface.  The solver
//! keeps probabilities in log space so mass points can decay through
//! hundreds of orders of magnitude without underflow, and prunes points
//! whose probability falls below 1e-250 from the active set; a full-support
//! bound check runs periodically and on candidate convergence, reactivating
//! a pruned point in the unlikely event it regains the largest divergence.

use crate::channels::ChannelLaw;
use crate::numeric::{log_sum_exp, LOG2_E};
use crate::search::golden_section_max;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_BA_MAX_ITERATIONS: usize = 100_000;

/// Active-set floor: a mass point below this probability stops being
/// updated until the periodic full check looks at it again.
const LN_PRUNE: f64 = -575.6462732485114; // ln 1e-250

/// Row entries below this are dropped from divergence sums; each such term
/// is bounded by 1e-50 times the largest possible log ratio, far beneath
/// every tolerance in use.
const ROW_FLOOR: f64 = 1e-50;
const LN_ROW_FLOOR: f64 = -115.12925464970229; // ln 1e-50

#[derive(Debug, Clone, Error)]
pub enum BaError {
    #[error("mass point locations must be strictly increasing within [0, 1]")]
    UnorderedLocations,
    #[error("locations and probabilities differ in length")]
    LengthMismatch,
    #[error("support must contain at least one mass point")]
    EmptySupport,
    #[error("probabilities must be nonnegative and sum to one, got total {sum}")]
    NotNormalized { sum: f64 },
    #[error("no convergence after {iterations} iterations, bounds gap {gap:.3e} bits")]
    NotConverged {
        iterations: usize,
        gap: f64,
        /// best iterate reached, aligned with the requested locations
        probs: Vec<f64>,
        /// its mutual information lower bound in bits
        lower: f64,
    },
}

/// Mass-point locations in [0, 1], strictly increasing, with a probability
/// vector summing to one.  Individual probabilities may be zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportedDistribution {
    locations: Vec<f64>,
    probs: Vec<f64>,
}

fn validate_locations(locations: &[f64]) -> Result<(), BaError> {
    if locations.is_empty() {
        return Err(BaError::EmptySupport);
    }
    let mut prev = -1.0;
    for &x in locations {
        if !(0.0..=1.0).contains(&x) || x <= prev {
            return Err(BaError::UnorderedLocations);
        }
        prev = x;
    }
    Ok(())
}

impl SupportedDistribution {
    pub fn new(locations: Vec<f64>, probs: Vec<f64>) -> Result<Self, BaError> {
        validate_locations(&locations)?;
        if locations.len() != probs.len() {
            return Err(BaError::LengthMismatch);
        }
        let sum: f64 = probs.iter().sum();
        if probs.iter().any(|&p| !(p >= 0.0)) || (sum - 1.0).abs() > 1e-12 {
            return Err(BaError::NotNormalized { sum });
        }
        Ok(SupportedDistribution { locations, probs })
    }

    /// Accept any nonnegative weights; rescale them to sum to one.
    pub fn new_normalized(locations: Vec<f64>, weights: Vec<f64>) -> Result<Self, BaError> {
        if locations.len() != weights.len() {
            return Err(BaError::LengthMismatch);
        }
        let sum: f64 = weights.iter().sum();
        if weights.iter().any(|&w| !(w >= 0.0)) || !(sum > 0.0) {
            return Err(BaError::NotNormalized { sum });
        }
        let probs = weights.into_iter().map(|w| w / sum).collect();
        SupportedDistribution::new(locations, probs)
    }

    /// Build from unordered (location, probability) pairs.
    pub fn from_pairs(mut pairs: Vec<(f64, f64)>) -> Result<Self, BaError> {
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (locations, probs) = pairs.into_iter().unzip();
        SupportedDistribution::new(locations, probs)
    }

    pub fn locations(&self) -> &[f64] {
        &self.locations
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.locations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locations.is_empty()
    }
}

/// Certified sandwich around the capacity, in bits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapacityBounds {
    pub lower: f64,
    pub upper: f64,
    pub gap: f64,
}

impl CapacityBounds {
    pub fn new(lower: f64, upper: f64) -> Self {
        CapacityBounds {
            lower,
            upper,
            gap: upper - lower,
        }
    }
}

/// Per-point channel rows over each point's support window, kept in both
/// linear and log form: the solver's inner products want linear values,
/// divergences want logs.
struct Rows {
    point_lo: Vec<usize>,
    linear: Vec<Vec<f64>>,
    log: Vec<Vec<f64>>,
    span_lo: usize,
    span_hi: usize,
}

fn build_rows(channel: &dyn ChannelLaw, locations: &[f64]) -> Rows {
    let mut point_lo = Vec::with_capacity(locations.len());
    let mut linear = Vec::with_capacity(locations.len());
    let mut log = Vec::with_capacity(locations.len());
    let mut span_lo = usize::MAX;
    let mut span_hi = 0usize;
    for &x in locations {
        let (lo, hi) = channel.support_window(x);
        span_lo = span_lo.min(lo);
        span_hi = span_hi.max(hi);
        let mut lin = Vec::with_capacity(hi - lo + 1);
        let mut lg = Vec::with_capacity(hi - lo + 1);
        for y in lo..=hi {
            let lp = channel.log_pmf(x, y);
            lg.push(lp);
            lin.push(lp.exp());
        }
        point_lo.push(lo);
        linear.push(lin);
        log.push(lg);
    }
    Rows {
        point_lo,
        linear,
        log,
        span_lo,
        span_hi,
    }
}

impl Rows {
    /// Output distribution over the union span for the given linear probs;
    /// entries are offset by span_lo.
    fn output(&self, probs: &[f64], active: &[bool], q: &mut Vec<f64>) {
        q.clear();
        q.resize(self.span_hi - self.span_lo + 1, 0.0);
        for i in 0..probs.len() {
            if !active[i] || probs[i] == 0.0 {
                continue;
            }
            let off = self.point_lo[i] - self.span_lo;
            for (k, &v) in self.linear[i].iter().enumerate() {
                q[off + k] += probs[i] * v;
            }
        }
    }

    /// D(p(.|x_i) || q) in nats given ln q over the span.
    fn divergence(&self, i: usize, ln_q: &[f64]) -> f64 {
        let off = self.point_lo[i] - self.span_lo;
        let mut acc = 0.0;
        for (k, (&v, &lv)) in self.linear[i].iter().zip(&self.log[i]).enumerate() {
            if v < ROW_FLOOR {
                continue;
            }
            acc += v * (lv - ln_q[off + k]);
        }
        acc
    }
}

/// q_y induced on the full output alphabet by a finite-support input.
///
/// Entries outside every support window stay zero; their true mass is below
/// 1e-30 in total.
pub fn output_distribution(channel: &dyn ChannelLaw, dist: &SupportedDistribution) -> Vec<f64> {
    let mut q = vec![0.0; channel.output_size()];
    for (i, &x) in dist.locations.iter().enumerate() {
        let p = dist.probs[i];
        if p == 0.0 {
            continue;
        }
        let (lo, hi) = channel.support_window(x);
        for y in lo..=hi {
            q[y] += p * channel.pmf(x, y);
        }
    }
    q
}

/// KL divergence D(p(.|x) || q) in bits; +infinity when q vanishes on an
/// output reachable from x.
pub fn kl_to_output(channel: &dyn ChannelLaw, x: f64, q: &[f64]) -> f64 {
    assert_eq!(q.len(), channel.output_size());
    let (lo, hi) = channel.support_window(x);
    let mut acc = 0.0;
    for y in lo..=hi {
        let lp = channel.log_pmf(x, y);
        if lp < LN_ROW_FLOOR {
            continue;
        }
        let term = lp.exp() * (lp - q[y].ln());
        if term == f64::INFINITY {
            return f64::INFINITY;
        }
        acc += term;
    }
    acc * LOG2_E
}

/// Mutual information of the joint (dist, channel) in bits.
pub fn mutual_information(channel: &dyn ChannelLaw, dist: &SupportedDistribution) -> f64 {
    let q = output_distribution(channel, dist);
    let mut acc = 0.0;
    for (i, &x) in dist.locations.iter().enumerate() {
        let p = dist.probs[i];
        if p == 0.0 {
            continue;
        }
        acc += p * kl_to_output(channel, x, &q);
    }
    acc.max(0.0)
}

/// Mutual information for raw location/probability slices, evaluating each
/// channel row once.  Hot path for location line searches, where the same
/// probabilities are scored against many candidate supports.
pub(crate) fn fixed_prob_mi_bits(
    channel: &dyn ChannelLaw,
    locations: &[f64],
    probs: &[f64],
) -> f64 {
    let rows = build_rows(channel, locations);
    let active: Vec<bool> = probs.iter().map(|&p| p > 0.0).collect();
    let mut q = Vec::new();
    rows.output(probs, &active, &mut q);
    let ln_q: Vec<f64> = q.iter().map(|&v| v.ln()).collect();
    let mut acc = 0.0;
    for i in 0..locations.len() {
        if probs[i] > 0.0 {
            acc += probs[i] * rows.divergence(i, &ln_q);
        }
    }
    (acc * LOG2_E).max(0.0)
}

// the convergence diagnostics are only read by the tests
#[cfg_attr(not(test), allow(dead_code))]
struct BaRun {
    probs: Vec<f64>,
    lower_bits: f64,
    gap_bits: f64,
    iterations: usize,
    converged: bool,
    lower_history: Vec<f64>,
}

fn ba_run(
    channel: &dyn ChannelLaw,
    locations: &[f64],
    initial: Option<&[f64]>,
    tol: f64,
    max_iterations: usize,
    record_history: bool,
) -> Result<BaRun, BaError> {
    validate_locations(locations)?;
    assert!(tol > 0.0, "tolerance must be positive");
    let n = locations.len();
    if n == 1 {
        return Ok(BaRun {
            probs: vec![1.0],
            lower_bits: 0.0,
            gap_bits: 0.0,
            iterations: 0,
            converged: true,
            lower_history: vec![0.0],
        });
    }

    let rows = build_rows(channel, locations);
    // seeded starts are floored just above the prune line so a point the
    // seed starved can still climb back; degenerate seeds fall back to
    // uniform
    let uniform = || vec![-(n as f64).ln(); n];
    let mut ln_p = match initial {
        Some(seed) if seed.len() == n => {
            let total: f64 = seed.iter().filter(|v| **v > 0.0).sum();
            if total > 0.0 && total.is_finite() {
                seed.iter()
                    .map(|&v| {
                        if v > 0.0 {
                            (v / total).ln().max(LN_PRUNE + 1.0)
                        } else {
                            LN_PRUNE + 1.0
                        }
                    })
                    .collect()
            } else {
                uniform()
            }
        }
        _ => uniform(),
    };
    let mut active = vec![true; n];
    let mut p = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut q: Vec<f64> = Vec::new();
    let mut ln_q: Vec<f64> = Vec::new();
    let mut history = Vec::new();
    let mut last = (vec![1.0 / n as f64; n], 0.0, f64::INFINITY);

    for t in 1..=max_iterations {
        for i in 0..n {
            p[i] = if active[i] { ln_p[i].exp() } else { 0.0 };
        }
        rows.output(&p, &active, &mut q);
        ln_q.clear();
        ln_q.extend(q.iter().map(|&v| v.ln()));

        let mut upper_nats = f64::NEG_INFINITY;
        let mut j_terms = Vec::with_capacity(n);
        for i in 0..n {
            if !active[i] {
                continue;
            }
            d[i] = rows.divergence(i, &ln_q);
            upper_nats = upper_nats.max(d[i]);
            j_terms.push(ln_p[i] + d[i]);
        }
        let j_nats = log_sum_exp(&j_terms);
        let lower_bits = j_nats * LOG2_E;
        if record_history {
            history.push(lower_bits);
        }
        let mut gap_bits = (upper_nats - j_nats) * LOG2_E;

        // the active-set gap ignores pruned points; before trusting it (and
        // periodically regardless) fold them back in.  Pruned rows are
        // scored against the same q as active ones; a q hole inside a
        // pruned row reads as infinite divergence, which can only delay
        // certification, never fake it.
        let candidate = gap_bits < tol;
        if candidate || t % 64 == 0 {
            let mut revived = false;
            for i in 0..n {
                if active[i] {
                    continue;
                }
                let di = rows.divergence(i, &ln_q);
                if di > upper_nats {
                    active[i] = true;
                    ln_p[i] = LN_PRUNE + 1.0;
                    revived = true;
                }
                upper_nats = upper_nats.max(di);
            }
            gap_bits = (upper_nats - j_nats) * LOG2_E;
            if candidate && !revived && gap_bits < tol {
                // take the accepted update, then report its exact value
                for i in 0..n {
                    if active[i] {
                        ln_p[i] += d[i] - j_nats;
                        p[i] = ln_p[i].exp();
                    } else {
                        p[i] = 0.0;
                    }
                }
                let total: f64 = p.iter().sum();
                for v in p.iter_mut() {
                    *v /= total;
                }
                rows.output(&p, &active, &mut q);
                ln_q.clear();
                ln_q.extend(q.iter().map(|&v| v.ln()));
                let mut exact = 0.0;
                for i in 0..n {
                    if p[i] > 0.0 {
                        exact += p[i] * rows.divergence(i, &ln_q);
                    }
                }
                let exact_bits = (exact * LOG2_E).max(0.0);
                if record_history {
                    history.push(exact_bits);
                }
                return Ok(BaRun {
                    probs: p,
                    lower_bits: exact_bits,
                    gap_bits,
                    iterations: t,
                    converged: true,
                    lower_history: history,
                });
            }
        }

        for i in 0..n {
            if !active[i] {
                continue;
            }
            ln_p[i] += d[i] - j_nats;
            if ln_p[i] < LN_PRUNE {
                active[i] = false;
                ln_p[i] = f64::NEG_INFINITY;
            }
        }
        last = (p.clone(), lower_bits, gap_bits);
    }

    let (probs, lower, gap) = last;
    let total: f64 = probs.iter().sum();
    Err(BaError::NotConverged {
        iterations: max_iterations,
        gap,
        probs: probs.iter().map(|v| v / total).collect(),
        lower,
    })
}

/// Probabilities maximizing mutual information over fixed mass-point
/// locations, with the certified bounds gap driven below `tol` bits.
///
/// Returns the optimal probabilities (individual entries may be zero) and
/// the exact mutual information they achieve.
pub fn blahut_arimoto_fixed_support(
    channel: &dyn ChannelLaw,
    locations: &[f64],
    tol: f64,
) -> Result<(Vec<f64>, f64), BaError> {
    blahut_arimoto_bounded(channel, locations, tol, DEFAULT_BA_MAX_ITERATIONS)
}

/// As `blahut_arimoto_fixed_support` with an explicit iteration budget.
pub fn blahut_arimoto_bounded(
    channel: &dyn ChannelLaw,
    locations: &[f64],
    tol: f64,
    max_iterations: usize,
) -> Result<(Vec<f64>, f64), BaError> {
    let run = ba_run(channel, locations, None, tol, max_iterations, false)?;
    Ok((run.probs, run.lower_bits))
}

/// As `blahut_arimoto_bounded`, but iterating from `initial` instead of
/// the uniform distribution.
///
/// With a seed near the optimum this converges in a handful of iterations
/// where the cold run needs thousands; outer loops that nudge one location
/// at a time rely on it.  The result does not depend on the seed beyond
/// round-off: the fixed-support problem is concave, and seed entries at or
/// below zero are floored to a revivable sliver rather than frozen out.
pub fn blahut_arimoto_seeded(
    channel: &dyn ChannelLaw,
    locations: &[f64],
    initial: &[f64],
    tol: f64,
    max_iterations: usize,
) -> Result<(Vec<f64>, f64), BaError> {
    let run = ba_run(channel, locations, Some(initial), tol, max_iterations, false)?;
    Ok((run.probs, run.lower_bits))
}

/// The x maximizing D(p(.|x) || q) over [0, 1], and that divergence (the
/// capacity upper bound induced by q), in bits.
///
/// A 2001-point grid pass picks the best bracket (ties to the smallest x)
/// and golden sections refine it to width 1e-10.  Results are only finite
/// when q is strictly positive on the outputs reachable from the best x.
pub fn find_x_max(channel: &dyn ChannelLaw, q: &[f64]) -> (f64, f64) {
    const GRID: usize = 2000;
    let mut best_x = 0.0;
    let mut best_d = f64::NEG_INFINITY;
    for i in 0..=GRID {
        let x = i as f64 / GRID as f64;
        let v = kl_to_output(channel, x, q);
        if v > best_d {
            best_d = v;
            best_x = x;
        }
    }
    let step = 1.0 / GRID as f64;
    let lo = (best_x - step).max(0.0);
    let hi = (best_x + step).min(1.0);
    let (x, d) = golden_section_max(lo, hi, 1e-10, |x| kl_to_output(channel, x, q));
    if d > best_d {
        (x, d)
    } else {
        (best_x, best_d)
    }
}

/// Partial derivative of mutual information with respect to the location
/// x_j, in bits per unit x.
///
/// Zero-probability points contribute nothing; at the interval endpoints
/// the one-sided derivative diverges (the log-likelihood slope does), so
/// -inf / +inf is returned there for a massed point.  Channels without an
/// analytic log-slope fall back to central differences.
pub fn mi_derivative(channel: &dyn ChannelLaw, dist: &SupportedDistribution, j: usize) -> f64 {
    let pj = dist.probs()[j];
    if pj == 0.0 {
        return 0.0;
    }
    let x = dist.locations()[j];
    if x == 0.0 {
        return f64::NEG_INFINITY;
    }
    if x == 1.0 {
        return f64::INFINITY;
    }
    if channel.dlog_pmf_dx(x, 0).is_some() {
        let q = output_distribution(channel, dist);
        let (lo, hi) = channel.support_window(x);
        let mut acc = 0.0;
        for y in lo..=hi {
            let lp = channel.log_pmf(x, y);
            if lp < LN_ROW_FLOOR {
                continue;
            }
            let slope = channel.dlog_pmf_dx(x, y).unwrap();
            acc += lp.exp() * slope * (lp - q[y].ln());
        }
        return pj * acc * LOG2_E;
    }
    let h = 1e-6;
    let shift = |delta: f64| {
        let mut locations = dist.locations().to_vec();
        locations[j] += delta;
        let moved = SupportedDistribution::new(locations, dist.probs().to_vec())
            .expect("shifted support stays ordered for the difference step");
        mutual_information(channel, &moved)
    };
    (shift(h) - shift(-h)) / (2.0 * h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::BinomialChannel;

    fn dist(pairs: &[(f64, f64)]) -> SupportedDistribution {
        SupportedDistribution::from_pairs(pairs.to_vec()).unwrap()
    }

    #[test]
    fn construction_enforces_order_and_normalization() {
        assert!(SupportedDistribution::new(vec![0.0, 1.0], vec![0.5, 0.5]).is_ok());
        assert!(matches!(
            SupportedDistribution::new(vec![0.5, 0.5], vec![0.5, 0.5]),
            Err(BaError::UnorderedLocations)
        ));
        assert!(matches!(
            SupportedDistribution::new(vec![0.0, 1.2], vec![0.5, 0.5]),
            Err(BaError::UnorderedLocations)
        ));
        assert!(matches!(
            SupportedDistribution::new(vec![0.0, 1.0], vec![0.7, 0.5]),
            Err(BaError::NotNormalized { .. })
        ));
        assert!(matches!(
            SupportedDistribution::new(vec![], vec![]),
            Err(BaError::EmptySupport)
        ));
        let d = SupportedDistribution::new_normalized(vec![0.0, 1.0], vec![2.0, 6.0]).unwrap();
        assert_eq!(d.probs(), &[0.25, 0.75]);
    }

    #[test]
    fn output_distribution_matches_hand_expansion() {
        let ch = BinomialChannel::new(1).unwrap();
        let q = output_distribution(&ch, &dist(&[(0.0, 0.5), (1.0, 0.5)]));
        assert_eq!(q, vec![0.5, 0.5]);

        let ch2 = BinomialChannel::new(2).unwrap();
        let q = output_distribution(&ch2, &dist(&[(0.0, 0.25), (0.5, 0.5), (1.0, 0.25)]));
        assert!((q[0] - 0.375).abs() < 1e-15);
        assert!((q[1] - 0.25).abs() < 1e-15);
        assert!((q[2] - 0.375).abs() < 1e-15);

        // single mass point reproduces the channel row
        let q = output_distribution(&ch2, &dist(&[(0.3, 1.0)]));
        for y in 0..3 {
            assert!((q[y] - ch2.pmf(0.3, y)).abs() < 1e-15);
        }
        assert!((q.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mutual_information_known_values() {
        let ch = BinomialChannel::new(1).unwrap();
        assert!((mutual_information(&ch, &dist(&[(0.0, 0.5), (1.0, 0.5)])) - 1.0).abs() < 1e-12);
        assert_eq!(mutual_information(&ch, &dist(&[(0.3, 1.0)])), 0.0);

        // direct H(Y) - H(Y|X) evaluation as an independent route
        let ch3 = BinomialChannel::new(3).unwrap();
        let d = dist(&[(0.0, 0.4), (0.6, 0.2), (1.0, 0.4)]);
        let q = output_distribution(&ch3, &d);
        let hy: f64 = -q.iter().filter(|&&v| v > 0.0).map(|&v| v * v.log2()).sum::<f64>();
        let mut hyx = 0.0;
        for (i, &x) in d.locations().iter().enumerate() {
            for y in 0..4 {
                let p = ch3.pmf(x, y);
                if p > 0.0 {
                    hyx -= d.probs()[i] * p * p.log2();
                }
            }
        }
        let want = hy - hyx;
        let got = mutual_information(&ch3, &d);
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    }

    #[test]
    fn mutual_information_ignores_input_ordering() {
        let ch = BinomialChannel::new(4).unwrap();
        let a = dist(&[(0.0, 0.3), (0.4, 0.3), (1.0, 0.4)]);
        let b = dist(&[(1.0, 0.4), (0.0, 0.3), (0.4, 0.3)]);
        assert_eq!(
            mutual_information(&ch, &a),
            mutual_information(&ch, &b)
        );
    }

    #[test]
    fn kl_to_output_conventions() {
        let ch = BinomialChannel::new(1).unwrap();
        // q equal to the row gives zero
        let q = output_distribution(&ch, &dist(&[(0.3, 1.0)]));
        assert!(kl_to_output(&ch, 0.3, &q).abs() < 1e-12);
        // point mass against uniform over two outputs
        assert!((kl_to_output(&ch, 0.0, &[0.5, 0.5]) - 1.0).abs() < 1e-12);

        let ch2 = BinomialChannel::new(2).unwrap();
        // q with a hole on a reachable output diverges
        assert_eq!(kl_to_output(&ch2, 0.5, &[0.5, 0.0, 0.5]), f64::INFINITY);
        // strictly positive q matches the direct three-term sum
        let q = [0.375_f64, 0.25, 0.375];
        let p = [0.25_f64, 0.5, 0.25];
        let want: f64 = (0..3).map(|y| p[y] * (p[y] / q[y]).log2()).sum();
        let got = kl_to_output(&ch2, 0.5, &q);
        assert!((got - want).abs() < 1e-13);
        assert!((got - 0.20751874963942185).abs() < 1e-13);
    }

    #[test]
    fn ba_solves_the_noiseless_binary_channel() {
        let ch = BinomialChannel::new(1).unwrap();
        let (probs, i) = blahut_arimoto_fixed_support(&ch, &[0.0, 1.0], 1e-9).unwrap();
        assert!((probs[0] - 0.5).abs() < 1e-9);
        assert!((probs[1] - 0.5).abs() < 1e-9);
        assert!((i - 1.0).abs() < 1e-9);
    }

    #[test]
    fn ba_zeroes_a_redundant_interior_point() {
        let ch = BinomialChannel::new(1).unwrap();
        let (probs, i) = blahut_arimoto_fixed_support(&ch, &[0.0, 0.5, 1.0], 1e-9).unwrap();
        assert!(probs[1] < 1e-9, "interior point kept mass {}", probs[1]);
        assert!((i - 1.0).abs() < 1e-9);

        // simplex grid search oracle at step 1e-3: no placement beats 1 bit,
        // and the optimum puts nothing in the middle
        let mut best = (0.0, 0.0f64);
        for a in 0..=1000 {
            for b in 0..=(1000 - a) {
                let p = [a as f64 / 1000.0, b as f64 / 1000.0, (1000 - a - b) as f64 / 1000.0];
                let d = SupportedDistribution::new(vec![0.0, 0.5, 1.0], p.to_vec()).unwrap();
                let v = mutual_information(&ch, &d);
                if v > best.1 {
                    best = (p[1], v);
                }
            }
        }
        assert!(best.1 <= 1.0 + 1e-12);
        assert_eq!(best.0, 0.0);
        assert!(i >= best.1 - 1e-9);
    }

    #[test]
    fn ba_lower_bound_is_monotone() {
        let ch = BinomialChannel::new(6).unwrap();
        let run = ba_run(&ch, &[0.0, 0.2, 0.45, 0.8, 1.0], None, 1e-10, 50_000, true).unwrap();
        for w in run.lower_history.windows(2) {
            assert!(w[1] >= w[0] - 1e-12, "lower bound dipped: {} -> {}", w[0], w[1]);
        }
        assert!(run.converged);
    }

    #[test]
    fn seeded_run_matches_the_cold_run() {
        let ch = BinomialChannel::new(6).unwrap();
        let locs = [0.0, 0.2, 0.45, 0.8, 1.0];
        let (cold_probs, cold_i) = blahut_arimoto_bounded(&ch, &locs, 1e-10, 100_000).unwrap();

        // a seed right at the answer, a lopsided seed, a seed with a dead
        // entry, and an unnormalised one all land on the same optimum
        let seeds: [&[f64]; 4] = [
            &cold_probs,
            &[0.9, 0.025, 0.025, 0.025, 0.025],
            &[0.5, 0.0, 0.0, 0.0, 0.5],
            &[3.0, 1.0, 2.0, 1.0, 3.0],
        ];
        for seed in seeds {
            let (probs, i) = blahut_arimoto_seeded(&ch, &locs, seed, 1e-10, 100_000).unwrap();
            assert!((i - cold_i).abs() < 1e-8, "seeded value {i} vs cold {cold_i}");
            for (a, b) in probs.iter().zip(&cold_probs) {
                assert!((a - b).abs() < 1e-6, "seeded probs drifted: {a} vs {b}");
            }
        }

        // garbage seeds fall back to the uniform start rather than failing
        let (_, i) = blahut_arimoto_seeded(&ch, &locs, &[0.0; 5], 1e-10, 100_000).unwrap();
        assert!((i - cold_i).abs() < 1e-8);
        let (_, i) = blahut_arimoto_seeded(&ch, &locs, &[1.0, f64::NAN, 1.0, 1.0, 1.0], 1e-10, 100_000)
            .unwrap();
        assert!((i - cold_i).abs() < 1e-8);
    }

    #[test]
    fn ba_reports_best_iterate_on_iteration_cap() {
        let ch = BinomialChannel::new(5).unwrap();
        let err = blahut_arimoto_bounded(&ch, &[0.0, 0.3, 0.7, 1.0], 1e-14, 3).unwrap_err();
        match err {
            BaError::NotConverged { probs, lower, gap, .. } => {
                assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                assert!(lower > 0.5);
                assert!(gap > 1e-14);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn equal_divergence_holds_at_the_fixed_support_optimum() {
        let ch = BinomialChannel::new(2).unwrap();
        let locations = [0.0, 0.5, 1.0];
        let (probs, i) = blahut_arimoto_fixed_support(&ch, &locations, 1e-10).unwrap();
        let d = SupportedDistribution::new(locations.to_vec(), probs).unwrap();
        let q = output_distribution(&ch, &d);
        for (k, &x) in locations.iter().enumerate() {
            if d.probs()[k] > 1e-9 {
                let kl = kl_to_output(&ch, x, &q);
                assert!((kl - i).abs() < 1e-7, "divergence {kl} vs capacity {i} at x={x}");
            }
        }
        // searching all of [0,1] can only reveal a larger divergence
        let (_, d_max) = find_x_max(&ch, &q);
        assert!(d_max >= i - 1e-9);
    }

    #[test]
    fn find_x_max_on_uniform_binary_output() {
        let ch = BinomialChannel::new(1).unwrap();
        let (x, d) = find_x_max(&ch, &[0.5, 0.5]);
        assert_eq!(x, 0.0, "tie must resolve to the smallest x");
        assert!((d - 1.0).abs() < 1e-9);
    }

    #[test]
    fn suboptimal_output_distribution_overshoots_its_information() {
        let ch = BinomialChannel::new(2).unwrap();
        let d = dist(&[(0.0, 0.3), (1.0, 0.7)]);
        let i = mutual_information(&ch, &d);
        let q = output_distribution(&ch, &d);
        let (_, d_max) = find_x_max(&ch, &q);
        assert!(d_max > i + 1e-3, "D_max {d_max} should exceed I {i}");
    }

    #[test]
    fn derivative_vanishes_for_unweighted_and_symmetric_points() {
        let ch = BinomialChannel::new(2).unwrap();
        let d = SupportedDistribution::new(vec![0.0, 0.5, 1.0], vec![0.5, 0.0, 0.5]).unwrap();
        assert_eq!(mi_derivative(&ch, &d, 1), 0.0);

        let sym = dist(&[(0.0, 0.25), (0.5, 0.5), (1.0, 0.25)]);
        assert!(mi_derivative(&ch, &sym, 1).abs() < 1e-9);
    }

    #[test]
    fn derivative_matches_central_differences() {
        let ch = BinomialChannel::new(3).unwrap();
        let d = dist(&[(0.0, 0.4), (0.6, 0.2), (1.0, 0.4)]);
        let got = mi_derivative(&ch, &d, 1);
        let h = 1e-6;
        let at = |x: f64| {
            mutual_information(
                &ch,
                &SupportedDistribution::new(vec![0.0, x, 1.0], vec![0.4, 0.2, 0.4]).unwrap(),
            )
        };
        let fd = (at(0.6 + h) - at(0.6 - h)) / (2.0 * h);
        assert!(
            (got - fd).abs() < (1e-5f64).max(1e-4 * fd.abs()),
            "analytic {got} vs difference {fd}"
        );
    }

    #[test]
    fn derivative_diverges_one_sided_at_massed_endpoints() {
        let ch = BinomialChannel::new(2).unwrap();
        let d = dist(&[(0.0, 0.5), (1.0, 0.5)]);
        assert_eq!(mi_derivative(&ch, &d, 0), f64::NEG_INFINITY);
        assert_eq!(mi_derivative(&ch, &d, 1), f64::INFINITY);
    }
}
