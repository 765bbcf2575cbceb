//! Closed forms for the binary-input restriction of the particle channel.
//!
//! Restricted to inputs {0, 1}, the channel collapses to a Z-channel: a
//! released pulse is missed entirely with probability `phi = (1-theta)^m`,
//! and any nonzero count identifies the pulse with certainty. That
//! collapse gives the optimal input weight, the per-use capacity, and the
//! rate in closed form, which the iterative solvers then use both as a
//! baseline curve and as a cross-check.

use crate::channels::{DerivedChannelState, TransportModel};
use crate::numeric::{binary_entropy_bits, LOG2_E};
use serde::{Deserialize, Serialize};

/// Binary-input capacities stay optimal (in the Poisson regime) only while
/// the peak mean count `m * theta` sits strictly below this value.
pub const BINARY_OPTIMALITY_THRESHOLD: f64 = 3.3679;

/// Closed-form description of the binary-input channel at one operating
/// point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinaryPicSummary {
    /// Probability that a full-scale input produces the all-miss output.
    pub phi: f64,
    /// Optimal probability of transmitting the full-scale input.
    pub p1_star: f64,
    /// Capacity of the binary restriction, bits per channel use.
    pub capacity_per_use: f64,
    /// Capacity of the binary restriction, bits per second.
    pub capacity_rate: f64,
    /// Mean count under the full-scale input, `m * theta`.
    pub poisson_mean: f64,
    /// Whether the Poisson-regime test predicts binary inputs are exactly
    /// optimal. Advisory; the support-growing solver is the ground truth.
    pub binary_likely_optimal: bool,
}

/// Probability that the full-scale input yields zero detected particles.
///
/// Evaluated in log space so that `m` in the thousands does not round
/// through a long product chain.
pub fn phi_of_state(state: &DerivedChannelState) -> f64 {
    (state.m_rho as f64 * (-state.theta_rho).ln_1p()).exp()
}

/// Optimal probability of the full-scale input for miss probability `phi`.
///
/// Continuity limits: 1/2 as `phi -> 0` (noiseless binary channel) and
/// 1/e as `phi -> 1`.
pub fn binary_optimal_p1(phi: f64) -> f64 {
    if phi <= 0.0 {
        return 0.5;
    }
    if phi >= 1.0 {
        return (-1.0f64).exp();
    }
    // phi^{phi/(phi-1)} = exp(phi * ln(phi) / (phi-1)); the ratio
    // ln(phi)/(phi-1) is evaluated through ln_1p so it stays finite and
    // accurate as phi approaches 1.
    let d = phi - 1.0;
    let r = phi * (d.ln_1p() / d);
    1.0 / (r.exp() - phi + 1.0)
}

/// Mutual information of the Z-channel with input weight `p1` and miss
/// probability `phi`, in bits.
pub fn binary_mi(p1: f64, phi: f64) -> f64 {
    binary_entropy_bits(p1 * (1.0 - phi)) - p1 * binary_entropy_bits(phi)
}

/// Binary-restricted capacity in bits per second at this operating point.
///
/// Agrees with `binary_mi(binary_optimal_p1(phi), phi) / tau` to within
/// 1e-10; the direct form here avoids evaluating the entropies at the
/// optimum.
pub fn binary_capacity_rate(transport: &TransportModel, state: &DerivedChannelState) -> f64 {
    debug_assert!(matches!(
        transport.levy_icdf(state.rho),
        Ok(t) if (t - state.tau).abs() <= 1e-9 * state.tau
    ));
    let phi = phi_of_state(state);
    if phi <= 0.0 {
        // Every pulse is seen: one noiseless bit per use.
        return 1.0 / state.tau;
    }
    if phi >= 1.0 {
        return 0.0;
    }
    let d = phi - 1.0;
    let r = phi * (d.ln_1p() / d);
    ((1.0 - phi) * (-r).exp()).ln_1p() * LOG2_E / state.tau
}

/// Poisson-regime prediction of whether binary inputs are exactly optimal.
///
/// True iff `m * theta` is strictly below [`BINARY_OPTIMALITY_THRESHOLD`].
/// Advisory only; the support-growing solver decides the actual support.
pub fn poisson_binary_optimality_test(state: &DerivedChannelState) -> bool {
    state.m_rho as f64 * state.theta_rho < BINARY_OPTIMALITY_THRESHOLD
}

/// Evaluate every closed-form quantity at one operating point.
pub fn binary_summary(transport: &TransportModel, state: &DerivedChannelState) -> BinaryPicSummary {
    let phi = phi_of_state(state);
    let p1_star = binary_optimal_p1(phi);
    BinaryPicSummary {
        phi,
        p1_star,
        capacity_per_use: binary_mi(p1_star, phi),
        capacity_rate: binary_capacity_rate(transport, state),
        poisson_mean: state.m_rho as f64 * state.theta_rho,
        binary_likely_optimal: poisson_binary_optimality_test(state),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ba::{mutual_information, SupportedDistribution};
    use crate::channels::{BinomialChannel, PicChannel};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn state(m: usize, theta: f64) -> DerivedChannelState {
        DerivedChannelState::from_parts(0.5, 1.0, m, theta).unwrap()
    }

    // Transport with levy_icdf(0.5) == 1 exactly up to erfcinv rounding,
    // so states built by `state` above pass the rate function's coherence
    // check.
    fn unit_tau_transport() -> TransportModel {
        let t = crate::erf::erfcinv(0.5).unwrap();
        TransportModel::new(2.0 * t * t, 1.0).unwrap()
    }

    // Independent route: the full 2x2 joint distribution of the collapsed
    // channel, summed term by term.
    fn z_channel_mi_direct(p1: f64, phi: f64) -> f64 {
        let rows = [[1.0, 0.0], [phi, 1.0 - phi]];
        let px = [1.0 - p1, p1];
        let mut q = [0.0f64; 2];
        for x in 0..2 {
            for y in 0..2 {
                q[y] += px[x] * rows[x][y];
            }
        }
        let mut i = 0.0;
        for x in 0..2 {
            for y in 0..2 {
                let p = px[x] * rows[x][y];
                if p > 0.0 {
                    i += p * (rows[x][y] / q[y]).log2();
                }
            }
        }
        i
    }

    #[test]
    fn phi_matches_direct_powers_at_small_m() {
        for m in 1..=60usize {
            for &theta in &[0.05_f64, 0.3, 0.5, 0.9] {
                let naive = (1.0 - theta).powi(m as i32);
                let phi = phi_of_state(&state(m, theta));
                assert!(
                    (phi - naive).abs() <= 1e-13 * naive,
                    "m={m} theta={theta}: {phi} vs {naive}"
                );
            }
        }
    }

    #[test]
    fn phi_corner_values() {
        assert_eq!(phi_of_state(&state(7, 1.0)), 0.0);
        assert!((phi_of_state(&state(1, 0.5)) - 0.5).abs() < 1e-15);
        let phi = phi_of_state(&state(2198, 0.081));
        assert!((phi - 2.3307410578289078e-81).abs() < 1e-93);
    }

    #[test]
    fn optimal_weight_known_values() {
        assert!((binary_optimal_p1(0.5) - 0.4).abs() < 1e-15);
        for &(phi, want) in &[
            (0.01, 0.4907696648059955),
            (0.3, 0.42100061340706737),
            (0.7, 0.38484258055806186),
            (0.9, 0.37297083468438379),
            (0.99, 0.36836767318643583),
        ] {
            let got = binary_optimal_p1(phi);
            assert!((got - want).abs() < 1e-14, "phi={phi}: {got} vs {want}");
        }
        assert_eq!(binary_optimal_p1(0.0), 0.5);
        assert!((binary_optimal_p1(1.0) - 0.36787944117144233).abs() < 1e-16);
    }

    #[test]
    fn optimal_weight_is_continuous_at_the_ends() {
        assert!((binary_optimal_p1(1e-14) - 0.5).abs() < 1e-12);
        assert!((binary_optimal_p1(1.0 - 1e-14) - binary_optimal_p1(1.0)).abs() < 1e-12);
    }

    #[test]
    fn optimal_weight_beats_fine_grid() {
        for &phi in &[0.1, 0.35, 0.62, 0.87] {
            let p_star = binary_optimal_p1(phi);
            let best = binary_mi(p_star, phi);
            let mut grid_best = f64::NEG_INFINITY;
            let mut grid_arg = 0.0;
            for k in 0..=1_000_000u32 {
                let p = k as f64 * 1e-6;
                let v = binary_mi(p, phi);
                if v > grid_best {
                    grid_best = v;
                    grid_arg = p;
                }
            }
            assert!(best >= grid_best - 1e-12, "phi={phi}");
            assert!((grid_arg - p_star).abs() <= 2e-6, "phi={phi}");
        }
    }

    #[test]
    fn optimal_weight_is_stationary() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_c10f);
        let h = 1e-6;
        for _ in 0..50 {
            let phi = rng.random_range(0.005..0.995);
            let p = binary_optimal_p1(phi);
            let slope = (binary_mi(p + h, phi) - binary_mi(p - h, phi)) / (2.0 * h);
            assert!(slope.abs() < 1e-8, "phi={phi}: slope {slope}");
        }
    }

    #[test]
    fn mi_known_values() {
        assert_eq!(binary_mi(0.0, 0.3), 0.0);
        assert!((binary_mi(0.4, 0.5) - 0.32192809488736235).abs() < 1e-15);
        for &phi in &[0.05, 0.3, 0.5, 0.8] {
            for k in 0..=20 {
                let p1 = k as f64 / 20.0;
                let direct = z_channel_mi_direct(p1, phi);
                assert!(
                    (binary_mi(p1, phi) - direct).abs() < 1e-12,
                    "p1={p1} phi={phi}"
                );
            }
        }
    }

    #[test]
    fn mi_matches_full_output_alphabet() {
        // A zero-or-more count only distinguishes "no particle" from
        // "some particle" when the input is binary, so the collapsed
        // two-symbol channel must carry exactly the same information as
        // the full (m+1)-symbol one.
        for n in 1..=20usize {
            let ch = BinomialChannel::new(n).unwrap();
            for &(top, p1) in &[(0.3, 0.25), (0.7, 0.5), (1.0, 0.75)] {
                let dist =
                    SupportedDistribution::new(vec![0.0, top], vec![1.0 - p1, p1]).unwrap();
                let full = mutual_information(&ch, &dist);
                let phi = (1.0 - top).powi(n as i32);
                assert!(
                    (full - binary_mi(p1, phi)).abs() < 1e-10,
                    "n={n} top={top} p1={p1}"
                );
            }
        }
    }

    #[test]
    fn mi_matches_full_output_alphabet_on_particle_channel() {
        let st = state(2198, 0.081);
        let ch = PicChannel::new(st);
        let dist = SupportedDistribution::new(vec![0.0, 1.0], vec![0.6, 0.4]).unwrap();
        let full = mutual_information(&ch, &dist);
        assert!((full - binary_mi(0.4, phi_of_state(&st))).abs() < 1e-10);
    }

    #[test]
    fn capacity_rate_known_value() {
        let transport = unit_tau_transport();
        let rate = binary_capacity_rate(&transport, &state(1, 0.5));
        assert!((rate - 0.32192809488736235).abs() < 1e-12);
    }

    #[test]
    fn capacity_rate_agrees_with_optimized_mi() {
        let transport = unit_tau_transport();
        for k in 1..=99 {
            let phi = k as f64 / 100.0;
            let st = state(1, 1.0 - phi);
            let direct = binary_capacity_rate(&transport, &st);
            let via_mi = binary_mi(binary_optimal_p1(phi), phi) / st.tau;
            assert!((direct - via_mi).abs() < 1e-10, "phi={phi}");
        }
    }

    #[test]
    fn doubling_transport_scale_halves_the_rate() {
        let t1 = TransportModel::new(0.8, 0.6).unwrap();
        let t2 = TransportModel::new(1.6, 0.6).unwrap();
        let rho = 0.21;
        let tau1 = t1.levy_icdf(rho).unwrap();
        let tau2 = t2.levy_icdf(rho).unwrap();
        assert!((tau2 - 2.0 * tau1).abs() < 1e-12 * tau2);
        let s1 = DerivedChannelState::from_parts(rho, tau1, 7, 0.3).unwrap();
        let s2 = DerivedChannelState::from_parts(rho, tau2, 7, 0.3).unwrap();
        let r1 = binary_capacity_rate(&t1, &s1);
        let r2 = binary_capacity_rate(&t2, &s2);
        assert!((r2 - 0.5 * r1).abs() < 1e-12 * r1);
    }

    #[test]
    fn mi_is_concave_in_the_input_weight() {
        for &phi in &[0.2, 0.5, 0.8] {
            let h = 1e-3;
            for k in 1..999 {
                let p = k as f64 * h;
                let second =
                    binary_mi(p - h, phi) - 2.0 * binary_mi(p, phi) + binary_mi(p + h, phi);
                assert!(second <= 1e-9, "phi={phi} p={p}: {second}");
            }
        }
    }

    #[test]
    fn optimal_weight_dominates_dense_grid_for_all_phi() {
        for k in 1..=99 {
            let phi = k as f64 / 100.0;
            let best = binary_mi(binary_optimal_p1(phi), phi);
            for j in 0..=10_000u32 {
                let p = j as f64 * 1e-4;
                assert!(best >= binary_mi(p, phi) - 1e-12, "phi={phi} p={p}");
            }
        }
    }

    #[test]
    fn poisson_regime_test_is_strict() {
        assert!(poisson_binary_optimality_test(&state(100, 0.01)));
        assert!(!poisson_binary_optimality_test(&state(10_000, 3.3679e-4)));
        assert!(poisson_binary_optimality_test(&state(10_000, 3.367e-4)));
        assert!(!poisson_binary_optimality_test(&state(10_000, 3.37e-4)));
    }

    #[test]
    fn summary_fields_are_coherent() {
        let transport = unit_tau_transport();
        let st = state(12, 0.17);
        let s = binary_summary(&transport, &st);
        assert!((s.phi - phi_of_state(&st)).abs() < 1e-15);
        assert!((s.capacity_per_use - binary_mi(s.p1_star, s.phi)).abs() < 1e-15);
        assert!((s.capacity_rate * st.tau - s.capacity_per_use).abs() < 1e-10);
        assert!((s.poisson_mean - 12.0 * 0.17).abs() < 1e-15);
        assert!(s.binary_likely_optimal);
        assert!(s.capacity_per_use > 0.0 && s.capacity_per_use < 1.0);
    }
}
