//! Capacity solver that grows and moves the support.
//!
//! The outer loop alternates three ingredients: probability optimization on
//! the current mass points (the fixed-support solver from [`crate::ba`]),
//! movement of the points themselves along a chosen direction with a scalar
//! line search, and birth of new points when progress stalls or coverage
//! demands one.  Termination is certified: the loop stops only when the
//! worst-case divergence over the whole input interval exceeds the achieved
//! mutual information by less than the requested tolerance, which sandwiches
//! the true capacity inside an epsilon window.

use crate::ba::{
    self, blahut_arimoto_seeded, find_x_max, kl_to_output, mi_derivative, mutual_information,
    output_distribution, BaError, CapacityBounds, SupportedDistribution,
    DEFAULT_BA_MAX_ITERATIONS,
};
use crate::channels::ChannelLaw;
use crate::search::golden_section_max;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Distance a split moves each half of a divided central point.
const SPLIT_OFFSET: f64 = 1e-3;
/// No birth happens while any adjacent pair sits closer than this: twins
/// from the previous birth must be pulled apart by moves before another
/// point can help.  Repeated central births would otherwise pile points
/// into one crack until the support budget is gone.
const BIRTH_MIN_GAP: f64 = 4.0 * SPLIT_OFFSET;
/// Births that cannot place the new point at least this far from its
/// neighbours are declined; a backstop under [`BIRTH_MIN_GAP`] for
/// supports that start out crowded.
const MIN_SPLIT_OFFSET: f64 = 1e-8;
/// Smallest adjacent gap a line-search step may leave behind.  Keeps moved
/// locations strictly ordered even after rounding.
const GAP_FLOOR: f64 = 1e-12;
/// Pairs closer than this are candidates for certified removal when the
/// final support is reported.
const REDUCE_TOL: f64 = 1e-3;

/// How the movement direction is chosen each outer iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DirectionStrategy {
    /// Move the single point nearest the current worst-case input.
    ProximityToXMax,
    /// Move the single point whose location derivative is largest in
    /// magnitude.
    MaxDerivative,
    /// Cycle through the movable points in order.
    RoundRobin,
    /// Move every point at once along the full derivative vector.
    Gradient,
}

/// When a new mass point is created.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BirthRule {
    /// Add a point when none lies between the worst-case input and 1/2.
    MissingMassPoint,
    /// Add a point when every location derivative has gone flat.
    MinimumDerivative,
    /// Add a point when successive iterations stop improving.
    NegligibleRate,
}

/// Tuning knobs for [`dab_solve`].
#[derive(Debug, Clone, Copy)]
pub struct DabConfig {
    /// Certification tolerance in bits: the solver stops once the bounds
    /// gap drops below this.
    pub epsilon: f64,
    pub direction_strategy: DirectionStrategy,
    pub birth_rule: BirthRule,
    /// Exploit symmetry about 1/2.  The caller asserts the channel law is
    /// invariant under x -> 1-x (true for the pure counting channel, not
    /// for thinned ones); the support is then kept exactly mirror-symmetric.
    pub symmetric: bool,
    /// Hard cap on the number of mass points.
    pub max_support: usize,
    /// Location resolution of the scalar line search.
    pub line_search_tol: f64,
    /// Points closer than this are merged when the result is reported.
    pub merge_tol: f64,
    /// Points with less probability than this are dropped when the result
    /// is reported.
    pub prob_floor: f64,
    pub max_outer_iterations: usize,
}

impl Default for DabConfig {
    fn default() -> Self {
        DabConfig {
            epsilon: 1e-5,
            direction_strategy: DirectionStrategy::MaxDerivative,
            birth_rule: BirthRule::NegligibleRate,
            symmetric: false,
            max_support: 64,
            line_search_tol: 1e-9,
            merge_tol: 1e-7,
            prob_floor: 1e-9,
            max_outer_iterations: 10_000,
        }
    }
}

/// Movement direction over the current support.
///
/// For the single-point strategies under symmetry this holds the pair form
/// with a one at the chosen index and at its mirror; the line search then
/// applies the mirrored entry with opposite sign so the support stays
/// symmetric about 1/2.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionVector {
    entries: Vec<f64>,
    mirrored_pair: bool,
}

impl DirectionVector {
    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|&v| v == 0.0)
    }

    /// Signed per-location steps for unit lambda.
    fn effective(&self) -> Vec<f64> {
        let n = self.entries.len();
        let mut eff = self.entries.clone();
        if self.mirrored_pair {
            for (i, v) in eff.iter_mut().enumerate() {
                if 2 * i > n - 1 {
                    *v = -*v;
                }
            }
        }
        eff
    }
}

/// One outer iteration of the solve, as recorded in the trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: usize,
    pub support_size: usize,
    /// Mutual information achieved by this iteration's distribution, bits.
    pub mi_bits: f64,
    /// Worst-case divergence over the input interval, bits.
    pub d_max_bits: f64,
    /// Input achieving the worst-case divergence.
    pub x_max: f64,
    /// Line-search step applied after the bounds were taken (0 when the
    /// iteration birthed a point or converged instead).
    pub lambda_star: f64,
}

/// A certified solve: the distribution, its capacity lower bound, and the
/// bounds sandwich that proves optimality to within the tolerance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DabResult {
    pub dist: SupportedDistribution,
    /// Certified capacity lower bound in bits per channel use (the mutual
    /// information of `dist`).
    pub capacity: f64,
    pub bounds: CapacityBounds,
    /// Outer iterations consumed.
    pub iterations: usize,
    pub trace: Vec<TraceRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum HaltReason {
    #[error("support cap {0} reached")]
    SupportCap(usize),
    #[error("outer iteration cap reached")]
    IterationCap,
}

#[derive(Debug, Clone, Error)]
pub enum SolveError {
    #[error("stopped before certification after {iterations} outer iterations: {reason} (best gap {gap_bits:.3e} bits)")]
    Halted {
        reason: HaltReason,
        iterations: usize,
        gap_bits: f64,
        /// Best certified sandwich reached before the halt.
        bounds: CapacityBounds,
        /// Distribution achieving those bounds.
        dist: SupportedDistribution,
    },
    #[error("adding a mass point would exceed the support cap of {cap}")]
    SupportCapExceeded { cap: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),
    #[error(transparent)]
    Ba(#[from] BaError),
}

/// Inputs the birth rules inspect.
#[derive(Debug, Clone, Copy)]
pub struct BirthDiagnostics {
    /// Worst-case input from the most recent bounds computation.
    pub x_max: f64,
    /// Improvement of mutual information over the previous outer iteration,
    /// when one exists.
    pub delta_i: Option<f64>,
    /// Largest location-derivative magnitude over the movable points, when
    /// computed.
    pub max_abs_derivative: Option<f64>,
}

/// Default start when no family predecessor exists: the two endpoints,
/// equally weighted.
pub fn cold_start() -> SupportedDistribution {
    SupportedDistribution::new(vec![0.0, 1.0], vec![0.5, 0.5])
        .expect("endpoint pair is a valid distribution")
}

/// Initial distribution for the next member of a channel family: the
/// previous solution, clipped to [0, 1] and renormalized.
pub fn warm_start_from(
    previous: &DabResult,
    target_channel: &dyn ChannelLaw,
) -> SupportedDistribution {
    debug_assert!(target_channel.output_size() >= 2);
    let locations: Vec<f64> = previous
        .dist
        .locations()
        .iter()
        .map(|&x| x.clamp(0.0, 1.0))
        .collect();
    SupportedDistribution::new_normalized(locations, previous.dist.probs().to_vec())
        .expect("a solved distribution stays valid under clipping")
}

fn movable_indices(dist: &SupportedDistribution, symmetric: bool) -> Vec<usize> {
    let n = dist.len();
    (0..n)
        .filter(|&i| {
            let x = dist.locations()[i];
            let endpoint = x == 0.0 || x == 1.0;
            let center = symmetric && i == n - 1 - i;
            !endpoint && !center
        })
        .collect()
}

/// Choose the movement direction for one outer iteration.
///
/// The single-point strategies return a unit vector at the chosen index;
/// under `symmetric` they return the pair form with ones at the index and
/// its mirror.  The gradient strategy returns the location derivatives,
/// zeroed at pinned endpoints.  All-zero means nothing can move.
pub fn select_direction(
    channel: &dyn ChannelLaw,
    dist: &SupportedDistribution,
    strategy: DirectionStrategy,
    symmetric: bool,
    x_max: f64,
    round_robin_state: &mut usize,
) -> DirectionVector {
    let n = dist.len();
    let movable = movable_indices(dist, symmetric);
    let mut entries = vec![0.0; n];
    if movable.is_empty() {
        return DirectionVector {
            entries,
            mirrored_pair: false,
        };
    }
    match strategy {
        DirectionStrategy::Gradient => {
            for &i in &movable {
                entries[i] = mi_derivative(channel, dist, i);
            }
            DirectionVector {
                entries,
                mirrored_pair: false,
            }
        }
        single => {
            let j = match single {
                DirectionStrategy::ProximityToXMax => *movable
                    .iter()
                    .min_by(|&&a, &&b| {
                        let da = (dist.locations()[a] - x_max).abs();
                        let db = (dist.locations()[b] - x_max).abs();
                        da.total_cmp(&db)
                    })
                    .expect("movable set is nonempty"),
                DirectionStrategy::MaxDerivative => *movable
                    .iter()
                    .max_by(|&&a, &&b| {
                        let da = mi_derivative(channel, dist, a).abs();
                        let db = mi_derivative(channel, dist, b).abs();
                        da.total_cmp(&db)
                    })
                    .expect("movable set is nonempty"),
                DirectionStrategy::RoundRobin => {
                    let j = movable[*round_robin_state % movable.len()];
                    *round_robin_state += 1;
                    j
                }
                DirectionStrategy::Gradient => unreachable!(),
            };
            entries[j] = 1.0;
            let mut mirrored_pair = false;
            if symmetric {
                let m = n - 1 - j;
                entries[m] = 1.0;
                mirrored_pair = m != j;
            }
            DirectionVector {
                entries,
                mirrored_pair,
            }
        }
    }
}

/// Largest step magnitudes along `eff` keeping every location inside
/// [0, 1] and the ordering strict, as a closed interval around zero.
fn feasible_interval(locations: &[f64], eff: &[f64]) -> (f64, f64) {
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    let mut clip = |bound_lo: f64, bound_hi: f64| {
        lo = lo.max(bound_lo);
        hi = hi.min(bound_hi);
    };
    for (i, (&x, &d)) in locations.iter().zip(eff).enumerate() {
        if d > 0.0 {
            clip(-x / d, (1.0 - x) / d);
        } else if d < 0.0 {
            clip((1.0 - x) / d, -x / d);
        }
        if i + 1 < locations.len() {
            let gap = locations[i + 1] - x;
            let dd = eff[i + 1] - d;
            // leave an absolute sliver of gap so neighbours stay distinct
            // through rounding; halve instead when the gap is already tiny
            let floor = GAP_FLOOR.min(gap / 2.0);
            if dd > 0.0 {
                clip((floor - gap) / dd, f64::INFINITY);
            } else if dd < 0.0 {
                clip(f64::NEG_INFINITY, (floor - gap) / dd);
            }
        }
    }
    // pull strictly inside so moved locations never collide exactly
    (lo * (1.0 - 1e-9), hi * (1.0 - 1e-9))
}

/// Maximize mutual information over a scalar step along `direction`, with
/// the probabilities held fixed.
///
/// Returns the step and the value reached.  Zero is always feasible, so the
/// value never falls below the current one.
pub fn line_search_lambda(
    channel: &dyn ChannelLaw,
    dist: &SupportedDistribution,
    direction: &DirectionVector,
    line_search_tol: f64,
) -> (f64, f64) {
    let base = mutual_information(channel, dist);
    if direction.is_zero() {
        return (0.0, base);
    }
    let eff = direction.effective();
    let (lo, hi) = feasible_interval(dist.locations(), &eff);
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return (0.0, base);
    }
    let probs = dist.probs();
    let score = |lambda: f64| -> f64 {
        if lambda == 0.0 {
            return base;
        }
        let moved: Vec<f64> = dist
            .locations()
            .iter()
            .zip(&eff)
            .map(|(&x, &d)| (x + lambda * d).clamp(0.0, 1.0))
            .collect();
        ba::fixed_prob_mi_bits(channel, &moved, probs)
    };

    const COARSE: usize = 16;
    let mut best_l = 0.0;
    let mut best_v = base;
    for k in 0..=COARSE {
        let l = lo + (hi - lo) * k as f64 / COARSE as f64;
        let v = score(l);
        if v > best_v {
            best_v = v;
            best_l = l;
        }
    }
    let step = (hi - lo) / COARSE as f64;
    let (l, v) = golden_section_max(
        (best_l - step).max(lo),
        (best_l + step).min(hi),
        line_search_tol,
        score,
    );
    if v > best_v {
        best_v = v;
        best_l = l;
    }
    if best_v <= base {
        (0.0, base)
    } else {
        (best_l, best_v)
    }
}

fn apply_move(
    dist: &SupportedDistribution,
    direction: &DirectionVector,
    lambda: f64,
) -> Result<SupportedDistribution, BaError> {
    let eff = direction.effective();
    let moved: Vec<f64> = dist
        .locations()
        .iter()
        .zip(&eff)
        .map(|(&x, &d)| (x + lambda * d).clamp(0.0, 1.0))
        .collect();
    SupportedDistribution::new_normalized(moved, dist.probs().to_vec())
}

/// Apply the configured birth rule, returning the (possibly unchanged)
/// distribution and whether a point was added.
///
/// An odd-sized support splits its central point into two half-weight
/// points straddling the old location; an even-sized support gains a point
/// between its two central points (exactly at 1/2 for the coverage rule),
/// carrying a uniform share of probability.
pub fn maybe_add_mass_point(
    dist: &SupportedDistribution,
    rule: BirthRule,
    diag: &BirthDiagnostics,
    config: &DabConfig,
) -> Result<(SupportedDistribution, bool), SolveError> {
    let triggered = match rule {
        BirthRule::MissingMassPoint => {
            let a = diag.x_max.min(0.5);
            let b = diag.x_max.max(0.5);
            !dist.locations().iter().any(|&x| (a..=b).contains(&x))
        }
        BirthRule::MinimumDerivative => {
            diag.max_abs_derivative.unwrap_or(0.0) < config.epsilon
        }
        BirthRule::NegligibleRate => diag
            .delta_i
            .map(|d| d < config.epsilon / 100.0)
            .unwrap_or(false),
    };
    if !triggered {
        return Ok((dist.clone(), false));
    }
    let unresolved = dist
        .locations()
        .windows(2)
        .any(|w| w[1] - w[0] < BIRTH_MIN_GAP);
    if unresolved {
        return Ok((dist.clone(), false));
    }
    let n = dist.len();
    if n + 1 > config.max_support {
        return Err(SolveError::SupportCapExceeded {
            cap: config.max_support,
        });
    }
    let locations = dist.locations();
    let probs = dist.probs();
    if n % 2 == 1 {
        // split the central point
        let c = n / 2;
        let below = if c > 0 { locations[c - 1] } else { 0.0 };
        let above = if c + 1 < n { locations[c + 1] } else { 1.0 };
        let offset = SPLIT_OFFSET
            .min((locations[c] - below) / 4.0)
            .min((above - locations[c]) / 4.0);
        let twin_lo = locations[c] - offset;
        let twin_hi = locations[c] + offset;
        // a gap too narrow to hold well-separated twins declines the birth
        if offset < MIN_SPLIT_OFFSET
            || !(below < twin_lo
                && twin_lo < locations[c]
                && locations[c] < twin_hi
                && twin_hi < above)
        {
            return Ok((dist.clone(), false));
        }
        let mut pairs: Vec<(f64, f64)> = Vec::with_capacity(n + 1);
        for i in 0..n {
            if i == c {
                pairs.push((twin_lo, probs[c] / 2.0));
                pairs.push((twin_hi, probs[c] / 2.0));
            } else {
                pairs.push((locations[i], probs[i]));
            }
        }
        Ok((SupportedDistribution::from_pairs(pairs)?, true))
    } else {
        let x_new = if rule == BirthRule::MissingMassPoint {
            0.5
        } else {
            (locations[n / 2 - 1] + locations[n / 2]) / 2.0
        };
        if locations.iter().any(|&x| (x - x_new).abs() < MIN_SPLIT_OFFSET) {
            return Ok((dist.clone(), false));
        }
        let share = 1.0 / (n + 1) as f64;
        let mut pairs: Vec<(f64, f64)> = locations
            .iter()
            .zip(probs)
            .map(|(&x, &p)| (x, p * (1.0 - share)))
            .collect();
        pairs.push((x_new, share));
        Ok((SupportedDistribution::from_pairs(pairs)?, true))
    }
}

/// Mirror-average the distribution about 1/2, pinning an odd center to 1/2
/// exactly.  Valid only when the channel shares the symmetry.
fn symmetrize(dist: &SupportedDistribution) -> Result<SupportedDistribution, BaError> {
    let n = dist.len();
    let mut locations = dist.locations().to_vec();
    let mut weights = dist.probs().to_vec();
    for i in 0..n / 2 {
        let j = n - 1 - i;
        let x = (locations[i] + 1.0 - locations[j]) / 2.0;
        locations[i] = x;
        locations[j] = 1.0 - x;
        let p = (weights[i] + weights[j]) / 2.0;
        weights[i] = p;
        weights[j] = p;
    }
    if n % 2 == 1 {
        locations[n / 2] = 0.5;
    }
    SupportedDistribution::new_normalized(locations, weights)
}

struct Certificate {
    mi: f64,
    d_max: f64,
    x_max: f64,
}

impl Certificate {
    fn gap(&self) -> f64 {
        self.d_max - self.mi
    }

    fn bounds(&self) -> CapacityBounds {
        CapacityBounds::new(self.mi, self.d_max)
    }
}

/// Exact bounds for a distribution: its mutual information and the
/// worst-case divergence over the entire input interval.  The support
/// points are rechecked directly so a grid miss can never report a
/// divergence below the information it certifies.
fn certify(channel: &dyn ChannelLaw, dist: &SupportedDistribution) -> Certificate {
    let mi = mutual_information(channel, dist);
    let q = output_distribution(channel, dist);
    let (mut x_max, mut d_max) = find_x_max(channel, &q);
    for &x in dist.locations() {
        let v = kl_to_output(channel, x, &q);
        if v > d_max {
            d_max = v;
            x_max = x;
        }
    }
    Certificate { mi, d_max, x_max }
}

/// Drop reported points below the probability floor.
fn pruned(dist: &SupportedDistribution, floor: f64) -> Option<SupportedDistribution> {
    let kept: Vec<(f64, f64)> = dist
        .locations()
        .iter()
        .zip(dist.probs())
        .filter(|(_, &p)| p >= floor)
        .map(|(&x, &p)| (x, p))
        .collect();
    if kept.len() == dist.len() || kept.is_empty() {
        return None;
    }
    let (locations, weights) = kept.into_iter().unzip();
    SupportedDistribution::new_normalized(locations, weights).ok()
}

fn merged_pair(dist: &SupportedDistribution, i: usize) -> Option<SupportedDistribution> {
    let locations = dist.locations();
    let probs = dist.probs();
    let w = probs[i] + probs[i + 1];
    let x = if w > 0.0 {
        (locations[i] * probs[i] + locations[i + 1] * probs[i + 1]) / w
    } else {
        (locations[i] + locations[i + 1]) / 2.0
    };
    let mut pairs: Vec<(f64, f64)> = Vec::with_capacity(dist.len() - 1);
    for k in 0..dist.len() {
        if k == i {
            pairs.push((x, w));
        } else if k != i + 1 {
            pairs.push((locations[k], probs[k]));
        }
    }
    SupportedDistribution::from_pairs(pairs).ok()
}

/// Reporting pass: prune floor-mass points, merge numerically identical
/// neighbors, then greedily try to merge any pair closer than
/// `REDUCE_TOL`, keeping a merge only if re-optimized probabilities still
/// certify within epsilon.
fn reduce_support(
    channel: &dyn ChannelLaw,
    dist: SupportedDistribution,
    cert: Certificate,
    config: &DabConfig,
) -> (SupportedDistribution, Certificate) {
    let mut best = (dist, cert);
    if let Some(p) = pruned(&best.0, config.prob_floor) {
        let c = certify(channel, &p);
        if c.gap() < config.epsilon {
            best = (p, c);
        }
    }
    loop {
        if best.0.len() < 2 {
            return best;
        }
        let gaps: Vec<f64> = best
            .0
            .locations()
            .windows(2)
            .map(|w| w[1] - w[0])
            .collect();
        let i = (0..gaps.len())
            .min_by(|&a, &b| gaps[a].total_cmp(&gaps[b]))
            .expect("at least one adjacent pair");
        if gaps[i] >= REDUCE_TOL {
            return best;
        }
        let Some(candidate) = merged_pair(&best.0, i) else {
            return best;
        };
        if gaps[i] < config.merge_tol {
            // numerically one point; fold it without ceremony
            let c = certify(channel, &candidate);
            best = (candidate, c);
            continue;
        }
        let reopt = blahut_arimoto_seeded(
            channel,
            candidate.locations(),
            candidate.probs(),
            config.epsilon / 10.0,
            DEFAULT_BA_MAX_ITERATIONS,
        );
        let Ok((probs, _)) = reopt else { return best };
        let Ok(candidate) = SupportedDistribution::new_normalized(
            candidate.locations().to_vec(),
            probs,
        ) else {
            return best;
        };
        let c = certify(channel, &candidate);
        if c.gap() < config.epsilon {
            best = (candidate, c);
        } else {
            return best;
        }
    }
}

fn validate_config(config: &DabConfig) -> Result<(), SolveError> {
    if !(config.epsilon > 0.0) {
        return Err(SolveError::InvalidConfig("epsilon must be positive"));
    }
    if !(config.line_search_tol > 0.0)
        || !(config.merge_tol > 0.0)
        || !(config.prob_floor > 0.0)
    {
        return Err(SolveError::InvalidConfig("tolerances must be positive"));
    }
    if config.max_support < 2 {
        return Err(SolveError::InvalidConfig("max_support must be at least 2"));
    }
    Ok(())
}

/// Solve for the capacity-achieving input distribution.
///
/// Runs the grow-and-move outer loop from `initial` until the certified
/// bounds gap drops below `config.epsilon`, then prunes and merges the
/// support for reporting.  The returned capacity is the exact mutual
/// information of the reported distribution, so the certificate
/// `capacity <= C <= capacity + epsilon` is self-contained.
pub fn dab_solve(
    channel: &dyn ChannelLaw,
    config: &DabConfig,
    initial: &SupportedDistribution,
) -> Result<DabResult, SolveError> {
    validate_config(config)?;
    let mut dist = if config.symmetric {
        symmetrize(initial)?
    } else {
        initial.clone()
    };
    let mut trace: Vec<TraceRecord> = Vec::new();
    let mut prev_mi: Option<f64> = None;
    let mut round_robin_state = 0usize;
    let mut best: Option<(SupportedDistribution, Certificate)> = None;

    for k in 0..config.max_outer_iterations {
        // the previous iteration's weights are already near-optimal for the
        // slightly moved support, so a seeded run converges in a few steps
        // where a uniform restart can burn the whole budget
        let probs = match blahut_arimoto_seeded(
            channel,
            dist.locations(),
            dist.probs(),
            config.epsilon / 10.0,
            DEFAULT_BA_MAX_ITERATIONS,
        ) {
            Ok((probs, _)) => probs,
            Err(BaError::NotConverged { probs, .. }) => probs,
            Err(e) => return Err(e.into()),
        };
        dist = SupportedDistribution::new_normalized(dist.locations().to_vec(), probs)?;
        if config.symmetric {
            dist = symmetrize(&dist)?;
        }
        let cert = certify(channel, &dist);
        let gap = cert.gap();
        if best.as_ref().map_or(true, |(_, c)| gap < c.gap()) {
            best = Some((dist.clone(), Certificate { ..cert }));
        }

        if gap < config.epsilon {
            trace.push(TraceRecord {
                iteration: k,
                support_size: dist.len(),
                mi_bits: cert.mi,
                d_max_bits: cert.d_max,
                x_max: cert.x_max,
                lambda_star: 0.0,
            });
            let (dist, cert) = reduce_support(channel, dist, cert, config);
            return Ok(DabResult {
                capacity: cert.mi,
                bounds: cert.bounds(),
                dist,
                iterations: k + 1,
                trace,
            });
        }

        let max_abs_derivative = if config.birth_rule == BirthRule::MinimumDerivative {
            Some(
                movable_indices(&dist, config.symmetric)
                    .into_iter()
                    .map(|i| mi_derivative(channel, &dist, i).abs())
                    .fold(0.0, f64::max),
            )
        } else {
            None
        };
        let diag = BirthDiagnostics {
            x_max: cert.x_max,
            delta_i: prev_mi.map(|p| cert.mi - p),
            max_abs_derivative,
        };
        let mut lambda_star = 0.0;
        match maybe_add_mass_point(&dist, config.birth_rule, &diag, config) {
            Ok((with_birth, true)) => {
                dist = with_birth;
            }
            Ok((_, false)) => {
                let direction = select_direction(
                    channel,
                    &dist,
                    config.direction_strategy,
                    config.symmetric,
                    cert.x_max,
                    &mut round_robin_state,
                );
                if !direction.is_zero() {
                    let (l, _) =
                        line_search_lambda(channel, &dist, &direction, config.line_search_tol);
                    if l != 0.0 {
                        dist = apply_move(&dist, &direction, l)?;
                        lambda_star = l;
                    }
                }
                // a single point boxed in by its neighbours stalls the
                // scalar search; the full gradient still moves the
                // ensemble coherently
                if lambda_star == 0.0
                    && config.direction_strategy != DirectionStrategy::Gradient
                {
                    let fallback = select_direction(
                        channel,
                        &dist,
                        DirectionStrategy::Gradient,
                        config.symmetric,
                        cert.x_max,
                        &mut round_robin_state,
                    );
                    if !fallback.is_zero() {
                        let (l, _) = line_search_lambda(
                            channel,
                            &dist,
                            &fallback,
                            config.line_search_tol,
                        );
                        if l != 0.0 {
                            dist = apply_move(&dist, &fallback, l)?;
                            lambda_star = l;
                        }
                    }
                }
            }
            Err(SolveError::SupportCapExceeded { cap }) => {
                let (bdist, bcert) = best.expect("at least this iteration was certified");
                return Err(SolveError::Halted {
                    reason: HaltReason::SupportCap(cap),
                    iterations: k + 1,
                    gap_bits: bcert.gap(),
                    bounds: bcert.bounds(),
                    dist: bdist,
                });
            }
            Err(e) => return Err(e),
        }
        trace.push(TraceRecord {
            iteration: k,
            support_size: dist.len(),
            mi_bits: cert.mi,
            d_max_bits: cert.d_max,
            x_max: cert.x_max,
            lambda_star,
        });
        prev_mi = Some(cert.mi);
    }

    let (bdist, bcert) = best.expect("loop ran at least once");
    Err(SolveError::Halted {
        reason: HaltReason::IterationCap,
        iterations: config.max_outer_iterations,
        gap_bits: bcert.gap(),
        bounds: bcert.bounds(),
        dist: bdist,
    })
}
