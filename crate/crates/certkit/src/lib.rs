//! certkit: sound, checkable certificates for three related questions.
//!
//! - How much can risk grow under a bounded covariate shift? The transport
//!   module computes exact empirical 1-D Wasserstein distances and stamps
//!   the shift-risk certificate `train risk + radius * sensitivity`, with an
//!   explicit gate on the covariate-shift assumption.
//! - Does a ReLU network satisfy a linear output spec over a box? The bounds
//!   module computes sound incomplete certificates in one or two passes;
//!   branch-and-bound completes them at exponential worst-case cost, and the
//!   sawtooth family exhibits that cost.
//! - What do identifiable additive models buy? Exact univariate extrema and
//!   slope bounds, so verification and sensitivity reduce to per-coordinate
//!   closed forms.
//!
//! Every numeric claim is either exact or a certified one-sided bound;
//! demonstrations of the opposite failures (attack gaps, shift flips) are
//! included as runnable constructions.

pub mod additive;
pub mod bab;
pub mod bounds;
pub mod cli;
pub mod error;
pub mod network;
pub mod report;
pub mod transport;
pub mod verifier;

pub use bab::{
    attack_gap_experiment, bump_network, enumerate_pieces, sampling_attack, sawtooth_network,
    verify_complete, AttackReport, BabResult, BabVerdict, PiecewiseLinear,
};
pub use bounds::{
    interval_bounds, interval_output_bounds, linear_output_bounds, lipschitz_from_oscillation,
    oscillation, relu_triangle, BoxSet, Certificate, LinearSpec, Method, PreactBounds, Verdict,
};
pub use error::{Error, Result};
pub use network::{load_network, parse_network, random_network, Activation, AffineLayer,
    Network, NormKind};
pub use transport::{
    empirical_risk, empirical_shift_check, shift_certificate, shift_flip_construction,
    w1_empirical_1d, w1_lp_oracle, EmpiricalSample, LossKind, Predictor, RiskCertificate,
};
pub use verifier::{make as make_verifier, Verifier, VerifierOptions, METHOD_NAMES};
