//! Random closed subsets of Cantor space and the measure-theoretic tools
//! used to study what they hit.
//!
//! The crate has three layers:
//!
//! * **Encoding and exact probability** — K-ary words, the blockwise binary
//!   encoding between the 2^k-ary tree and the binary tree, survival
//!   probabilities of prefix chains as exact powers of two
//!   ([`strings`], [`prob`], [`surd`]).
//! * **Sampling and measures** — percolation-style samplers for random
//!   closed sets (every node of the K-ary tree survives independently with
//!   probability 2^{-ell}), and depth-limited dyadic measures with exact
//!   energy and capacity computations ([`sampler`], [`measure`]).
//! * **Second-moment machinery and experiments** — exact first/second
//!   moments of the frontier statistic, Paley-Zygmund style hitting bounds,
//!   and seeded, parallel Monte Carlo experiments that confront the bounds
//!   with empirical frequencies ([`moments`], [`experiments`]).
//!
//! All randomness is a pure function of (master seed, structural position),
//! so every report is reproducible bit for bit regardless of thread count.

pub mod error;
pub mod experiments;
pub mod measure;
pub mod moments;
pub mod params;
pub mod prob;
pub mod rational;
pub mod rng;
pub mod sampler;
pub mod strings;
pub mod surd;

pub use error::{Error, Result};
pub use experiments::{
    run_beam_splitter, run_hitting_check, run_pair_prob_check, run_pipeline_demo,
    run_survival_curve, wilson_bounds, BeamSplitterReport, ExperimentReport, HittingCheckReport,
    Observation, PipelineReport, Verdict,
};
pub use measure::{
    capacity_constant, clopen_inner_approx, energy, gamma_weight, measure_of_clopen, ClopenApprox,
    ClopenSet, DyadicMeasure, EnergyCertificate, EnergyReport,
};
pub use moments::{
    condition_measure, exact_first_moment, exact_second_moment, frontier_hits,
    hitting_lower_bound, moment_report, pz_bound, y_statistic, HittingBound, HittingTarget,
    MomentReport, PzBound, SecondMoment,
};
pub use params::Params;
pub use prob::{chain_prob, pair_chain_prob, pair_chain_prob_binary, Log2Prob};
pub use rational::{format_rational, parse_rational, rational_to_f64};
pub use sampler::{
    extract_subset, reconstruct_prefix, subset_to_integers, survival_counts, survival_exact,
    survival_limit, SampledTree, SubsetWitness,
};
pub use strings::{
    decode_bitstring, encode_kstring, encode_symbol, enumerate_kstring, kstring_index,
    split_depths, BitString, KString, SplitDepths,
};
pub use surd::Surd;
