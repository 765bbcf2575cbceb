//! Cutting-plane baseline for the capacity problem.
//!
//! Capacity has a finite-dimensional convex dual with one multiplier z_y per
//! output symbol; the multipliers encode an unnormalised output measure
//! q_y = 2^{-z_y}/e.  The dual value upper-bounds every achievable rate, and
//! minimising it by the ellipsoid method closes the gap to capacity.  The
//! minimiser hands back the output distribution, the mass points (maximisers
//! of the inner divergence), and input probabilities by nonnegative least
//! squares.  Slow but independent of the double-loop solver, which it exists
//! to cross-check.

use std::f64::consts::{E, LN_2};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ba::{self, SupportedDistribution};
use crate::channels::ChannelLaw;
use crate::linalg::{self, Cholesky};
use crate::numeric::LOG2_E;
use crate::search::{golden_section_max, grid_local_maxima};

/// Iteration budget; generous because the method needs thousands of cuts
/// where the double-loop solver needs tens of iterations.
pub const MAX_DUAL_ITERATIONS: usize = 200_000;

/// Default squared radius of the cold-start ball, large enough to contain
/// the minimiser for output alphabets up to a few dozen symbols.
pub const DEFAULT_SHAPE_RADIUS_SQ: f64 = 400.0;

/// NNLS residual above which the recovered support set fails to explain the
/// recovered output measure.
pub const RECOVERY_RESIDUAL_TOL: f64 = 1e-6;

/// Grid resolution for the inner maximisation, matching `find_x_max`.
const GRID: usize = 2000;

/// Refined maximisers closer than this merge into one mass point.
const CLUSTER_TOL: f64 = 1e-4;

/// Local maxima more than this many bits below the best one are noise left
/// by the grid, not mass points.
const NEAR_MAX_TOL_BITS: f64 = 1e-3;

/// Recovered mass points whose NNLS probability falls below this carry no
/// information and are dropped.
const PROB_DROP: f64 = 1e-9;

/// Warm starts floor the predicted output mass here so unreachable outputs
/// map to a large finite multiplier instead of infinity.
const WARM_START_Q_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EllipsoidError {
    #[error("dual vector entries must be finite")]
    NonFiniteDual,
    #[error("shape matrix must be symmetric positive definite")]
    NotPositiveDefinite,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("tolerance must be positive and finite")]
    InvalidTolerance,
    #[error("subgradient curvature {value:.3e} is not positive")]
    CurvatureBreakdown { value: f64 },
    #[error("no convergence within {0} iterations (error bound {1:.3e} bits)")]
    IterationCap(usize, f64),
}

/// One dual multiplier per output symbol.
#[derive(Debug, Clone)]
pub struct DualVector {
    z: Vec<f64>,
}

impl DualVector {
    pub fn new(z: Vec<f64>) -> Result<Self, EllipsoidError> {
        if z.iter().any(|v| !v.is_finite()) {
            return Err(EllipsoidError::NonFiniteDual);
        }
        Ok(Self { z })
    }

    pub fn z(&self) -> &[f64] {
        &self.z
    }
}

/// Localisation ellipsoid { z : (z - center)' shape^{-1} (z - center) <= 1 }.
#[derive(Debug, Clone)]
pub struct EllipsoidState {
    center: Vec<f64>,
    shape: Vec<f64>,
}

impl EllipsoidState {
    /// Validates dimensions and that `shape` is symmetric positive definite,
    /// the latter by attempting a Cholesky factorisation.
    pub fn new(center: Vec<f64>, shape: Vec<f64>) -> Result<Self, EllipsoidError> {
        let d = center.len();
        if shape.len() != d * d {
            return Err(EllipsoidError::DimensionMismatch {
                expected: d * d,
                got: shape.len(),
            });
        }
        if center.iter().chain(shape.iter()).any(|v| !v.is_finite()) {
            return Err(EllipsoidError::NonFiniteDual);
        }
        let scale = shape.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for i in 0..d {
            for j in 0..i {
                if (shape[i * d + j] - shape[j * d + i]).abs() > 1e-9 * scale {
                    return Err(EllipsoidError::NotPositiveDefinite);
                }
            }
        }
        if Cholesky::new(&shape, d).is_none() {
            return Err(EllipsoidError::NotPositiveDefinite);
        }
        Ok(Self { center, shape })
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    /// Row-major `dim x dim` shape matrix.
    pub fn shape(&self) -> &[f64] {
        &self.shape
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DualTraceRecord {
    pub iteration: usize,
    /// Dual objective at the iteration's center, bits.
    pub dual_value: f64,
    /// sqrt(g'Pg), an upper bound on the center's suboptimality in bits.
    pub error_bound: f64,
}

/// A solved dual together with everything recovered from it.
///
/// `input_probs` are normalised over the recovered mass points; the raw
/// least-squares fit quality survives in `recovery_residual`.
#[derive(Debug, Clone, Serialize)]
pub struct DualSolution {
    pub z_opt: Vec<f64>,
    /// Output measure 2^{-z_y}/e at the final center; sums to one only up
    /// to the solve tolerance.
    pub q: Vec<f64>,
    pub mass_points: Vec<f64>,
    pub input_probs: Vec<f64>,
    /// Mutual information of the recovered input distribution, bits.
    pub capacity: f64,
    /// Dual objective at `z_opt`, bits; upper-bounds `capacity`.
    pub dual_value: f64,
    /// Final sqrt(g'Pg), bits.
    pub error_bound: f64,
    pub iterations: usize,
    /// Euclidean NNLS residual of the output-balance equations.
    pub recovery_residual: f64,
    pub trace: Vec<DualTraceRecord>,
}

impl DualSolution {
    /// Whether the recovered mass points explain the recovered output
    /// measure; a large residual means the support set is inconsistent.
    pub fn support_consistent(&self) -> bool {
        self.recovery_residual <= RECOVERY_RESIDUAL_TOL
    }
}

/// The output measure q_y = 2^{-z_y}/e encoded by a multiplier vector.
fn tilted_weights(z: &[f64]) -> Vec<f64> {
    z.iter().map(|&zy| (-zy * LN_2 - 1.0).exp()).collect()
}

struct DualEval {
    value: f64,
    gradient: Vec<f64>,
}

/// Objective, inner maximiser, and subgradient in one pass; the inner
/// maximisation dominates the cost so callers should not repeat it.
fn eval_dual(channel: &dyn ChannelLaw, z: &[f64]) -> DualEval {
    let qt = tilted_weights(z);
    let (x_star, kl) = ba::find_x_max(channel, &qt);
    let mass: f64 = qt.iter().sum();
    let value = LOG2_E * (mass - 1.0) + kl;
    let mut gradient: Vec<f64> = qt.iter().map(|&q| -q).collect();
    let (lo, hi) = channel.support_window(x_star);
    for y in lo..=hi {
        gradient[y] += channel.pmf(x_star, y);
    }
    DualEval { value, gradient }
}

/// Dual bound on capacity, in bits.
///
/// With q_y = 2^{-z_y}/e this is log2(e)(sum q - 1) + max_x D(p(.|x) || q);
/// the inner maximum is located by the `find_x_max` grid and golden-section
/// scheme.  Every multiplier vector yields a value at least the mutual
/// information of every input distribution, and the minimum over z equals
/// capacity.
pub fn dual_objective(z: &DualVector, channel: &dyn ChannelLaw) -> f64 {
    eval_dual(channel, z.z()).value
}

/// A subgradient of `dual_objective` at `z`: p(.|x*) - q, where x* attains
/// the inner maximum.
///
/// Any positive multiple cuts the same half-space; this scaling is the
/// exact gradient of the bits-valued objective wherever x* is unique, so
/// sqrt(g'Pg) bounds the suboptimality in bits.
pub fn dual_subgradient(z: &DualVector, channel: &dyn ChannelLaw) -> Vec<f64> {
    eval_dual(channel, z.z()).gradient
}

/// One central-cut update: shrink the ellipsoid to cover the half where
/// g'(z - center) <= 0.
///
/// Volume shrinks by a fixed dimension-dependent factor each call.  The new
/// shape matrix is re-symmetrised; curvature g'Pg must be positive or the
/// shape has numerically broken down.
pub fn ellipsoid_step(
    state: &EllipsoidState,
    g: &[f64],
) -> Result<EllipsoidState, EllipsoidError> {
    let d = state.dim();
    if g.len() != d {
        return Err(EllipsoidError::DimensionMismatch {
            expected: d,
            got: g.len(),
        });
    }
    let curv = linalg::quad_form(&state.shape, g, d);
    if !(curv > 0.0) {
        return Err(EllipsoidError::CurvatureBreakdown { value: curv });
    }
    let pg = linalg::mat_vec(&state.shape, g, d);
    let df = d as f64;
    let step = 1.0 / ((df + 1.0) * curv.sqrt());
    let center: Vec<f64> = state
        .center
        .iter()
        .zip(&pg)
        .map(|(&c, &w)| c - step * w)
        .collect();
    let c1 = df * df / (df * df - 1.0);
    let c2 = 2.0 / ((df + 1.0) * curv);
    let mut shape = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            let sym = 0.5 * (state.shape[i * d + j] + state.shape[j * d + i]);
            let v = c1 * (sym - c2 * pg[i] * pg[j]);
            shape[i * d + j] = v;
            shape[j * d + i] = v;
        }
    }
    // The update preserves positive definiteness in exact arithmetic, so the
    // validating constructor is skipped; breakdown surfaces as nonpositive
    // curvature on a later call.
    Ok(EllipsoidState { center, shape })
}

/// Minimise the dual by central cuts until sqrt(g'Pg) < tol, then recover
/// the solution at the final center.
///
/// The caller supplies an initial ellipsoid (center `z0`, shape `p0`) that
/// must contain the minimiser; `cold_start_dual` and `warm_start_z` build
/// suitable ones.  On success the result carries a certified bracket:
/// recovered mutual information <= capacity <= dual value within tolerance.
pub fn solve_dual(
    channel: &dyn ChannelLaw,
    z0: &[f64],
    p0: &[f64],
    tol: f64,
) -> Result<DualSolution, EllipsoidError> {
    let d = channel.output_size();
    if z0.len() != d {
        return Err(EllipsoidError::DimensionMismatch {
            expected: d,
            got: z0.len(),
        });
    }
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(EllipsoidError::InvalidTolerance);
    }
    let mut state = EllipsoidState::new(z0.to_vec(), p0.to_vec())?;
    let mut trace = Vec::new();
    let mut last_bound = f64::INFINITY;
    for k in 0..MAX_DUAL_ITERATIONS {
        let eval = eval_dual(channel, &state.center);
        let curv = linalg::quad_form(&state.shape, &eval.gradient, d);
        if !(curv > 0.0) {
            return Err(EllipsoidError::CurvatureBreakdown { value: curv });
        }
        let bound = curv.sqrt();
        trace.push(DualTraceRecord {
            iteration: k,
            dual_value: eval.value,
            error_bound: bound,
        });
        if bound < tol {
            return Ok(recover(channel, &state.center, eval.value, bound, k + 1, trace));
        }
        last_bound = bound;
        state = ellipsoid_step(&state, &eval.gradient)?;
    }
    Err(EllipsoidError::IterationCap(MAX_DUAL_ITERATIONS, last_bound))
}

/// Read the solution out of a converged center: output measure, mass points
/// as clustered maximisers of the inner divergence, input probabilities by
/// NNLS on the output-balance equations.
fn recover(
    channel: &dyn ChannelLaw,
    z: &[f64],
    dual_value: f64,
    error_bound: f64,
    iterations: usize,
    trace: Vec<DualTraceRecord>,
) -> DualSolution {
    let d = channel.output_size();
    let qt = tilted_weights(z);
    let step = 1.0 / GRID as f64;
    let psi: Vec<f64> = (0..=GRID)
        .map(|i| ba::kl_to_output(channel, i as f64 * step, &qt))
        .collect();
    let peak = psi.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut refined: Vec<(f64, f64)> = Vec::new();
    for idx in grid_local_maxima(&psi) {
        if psi[idx] < peak - NEAR_MAX_TOL_BITS {
            continue;
        }
        let x0 = idx as f64 * step;
        let lo = (x0 - step).max(0.0);
        let hi = (x0 + step).min(1.0);
        let (x, v) = golden_section_max(lo, hi, 1e-10, |x| ba::kl_to_output(channel, x, &qt));
        if v >= psi[idx] {
            refined.push((x, v));
        } else {
            refined.push((x0, psi[idx]));
        }
    }
    refined.sort_by(|a, b| a.0.total_cmp(&b.0));
    // Each true mass point attracts a cluster of refined grid maxima; merge
    // every chain of near-coincident ones at its divergence-weighted mean.
    let mut points: Vec<f64> = Vec::new();
    let mut i = 0;
    while i < refined.len() {
        let mut j = i + 1;
        while j < refined.len() && refined[j].0 - refined[j - 1].0 <= CLUSTER_TOL {
            j += 1;
        }
        let floor = refined[i..j].iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
        let mut wsum = 0.0;
        let mut xsum = 0.0;
        for r in &refined[i..j] {
            let w = (r.1 - floor) + 1e-12;
            wsum += w;
            xsum += w * r.0;
        }
        points.push(xsum / wsum);
        i = j;
    }
    let k = points.len();
    let mut a = vec![0.0; d * k];
    for (col, &x) in points.iter().enumerate() {
        let (lo, hi) = channel.support_window(x);
        for y in lo..=hi {
            a[y * k + col] = channel.pmf(x, y);
        }
    }
    let (raw, recovery_residual) = linalg::nnls(&a, d, k, &qt);
    let mut kept_points = Vec::with_capacity(k);
    let mut kept_weights = Vec::with_capacity(k);
    for (idx, &w) in raw.iter().enumerate() {
        if w > PROB_DROP {
            kept_points.push(points[idx]);
            kept_weights.push(w);
        }
    }
    let dist = SupportedDistribution::new_normalized(kept_points, kept_weights)
        .expect("recovered mass points are distinct and carry positive mass");
    let capacity = ba::mutual_information(channel, &dist);
    DualSolution {
        z_opt: z.to_vec(),
        q: qt,
        mass_points: dist.locations().to_vec(),
        input_probs: dist.probs().to_vec(),
        capacity,
        dual_value,
        error_bound,
        iterations,
        recovery_residual,
        trace,
    }
}

fn identity(d: usize) -> Vec<f64> {
    let mut m = vec![0.0; d * d];
    for i in 0..d {
        m[i * d + i] = 1.0;
    }
    m
}

/// Initial ellipsoid for the next channel order from a solved one: push the
/// recovered input through the next law to predict its output distribution,
/// then invert q_y = 2^{-z_y}/e.
///
/// The unit-identity shape suffices because the predicted center lands near
/// the minimiser.  Outputs the recovered support cannot reach get a floored
/// mass, hence a large finite multiplier the first cuts correct.
pub fn warm_start_z(
    previous: &DualSolution,
    channel_next: &dyn ChannelLaw,
) -> (Vec<f64>, Vec<f64>) {
    let d = channel_next.output_size();
    let mut q = vec![0.0; d];
    for (a, &x) in previous.mass_points.iter().enumerate() {
        let p = previous.input_probs[a];
        let (lo, hi) = channel_next.support_window(x);
        for y in lo..=hi {
            q[y] += p * channel_next.pmf(x, y);
        }
    }
    let z0 = q
        .iter()
        .map(|&qy| -(E * qy.max(WARM_START_Q_FLOOR)).log2())
        .collect();
    (z0, identity(d))
}

/// Initial ellipsoid with no prior knowledge: the origin with a ball big
/// enough to contain the minimiser for moderate alphabets.
pub fn cold_start_dual(channel: &dyn ChannelLaw) -> (Vec<f64>, Vec<f64>) {
    let d = channel.output_size();
    let mut p0 = identity(d);
    for v in p0.iter_mut() {
        *v *= DEFAULT_SHAPE_RADIUS_SQ;
    }
    (vec![0.0; d], p0)
}
