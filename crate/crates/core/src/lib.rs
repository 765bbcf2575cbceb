//! Capacity solvers for the binomial and particle-intensity channels.
//!
//! The input of these channels is a release probability x in [0, 1] and the
//! output is a detection count, so capacity-achieving input distributions
//! are finite sets of mass points.  Three routes to them live here:
//!
//! * [`dab`] grows a mass-point support dynamically, alternating
//!   fixed-support Blahut-Arimoto with point movement and birth, and
//!   certifies the result through a divergence-gap bound.
//! * [`ellipsoid`] solves the finite-dimensional convex dual by the
//!   ellipsoid method; slower, but an independent baseline.
//! * [`closed_form`] covers the binary-input special case exactly.
//!
//! [`channels`] defines the channel laws and the diffusive transport model
//! tying arrival probability to symbol duration; [`sweep`] runs warm-started
//! parameter families and writes CSV/JSON records.

pub mod ba;
pub mod channels;
pub mod closed_form;
pub mod dab;
pub mod ellipsoid;
pub mod erf;
pub mod sweep;

mod linalg;
mod numeric;
mod search;

pub use ba::{
    blahut_arimoto_bounded, blahut_arimoto_fixed_support, find_x_max, kl_to_output,
    mi_derivative, mutual_information, output_distribution, BaError, CapacityBounds,
    SupportedDistribution, DEFAULT_BA_MAX_ITERATIONS,
};
pub use channels::{
    binomial_pmf, derive_state, levy_icdf, pic_pmf, poisson_pmf, BinomialChannel, ChannelError,
    ChannelLaw, DerivedChannelState, PicChannel, PicParams, PoissonChannel, TransportModel,
};
pub use closed_form::{
    binary_capacity_rate, binary_mi, binary_optimal_p1, binary_summary, phi_of_state,
    poisson_binary_optimality_test, BinaryPicSummary, BINARY_OPTIMALITY_THRESHOLD,
};
pub use dab::{
    cold_start, dab_solve, warm_start_from, BirthRule, DabConfig, DabResult, DirectionStrategy,
    SolveError, TraceRecord,
};
pub use ellipsoid::{
    cold_start_dual, dual_objective, dual_subgradient, ellipsoid_step, solve_dual, warm_start_z,
    DualSolution, DualVector, EllipsoidError, EllipsoidState,
};
pub use sweep::{
    export, find_optimal_rho, refine_optimal_rho, sweep_binomial, sweep_binomial_mode, sweep_pic,
    sweep_pic_mode, ExportFormat, SweepError, SweepFailure, SweepMode, SweepRecord, SweepResult,
};
