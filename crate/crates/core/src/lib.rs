//! Random walks on countable groups, transformed by (randomized) Markov
//! stopping times.
//!
//! The crate provides concrete groups ([`group`]), finitely supported
//! measures with exact convolution ([`measure`]), sample paths and
//! asymptotic estimators ([`walk`]), stopping rules as prefix automata
//! ([`stopping`]), exact and Monte Carlo transformed measures
//! ([`transform`]) and an experiment harness ([`harness`]).

// negated float comparisons reject NaN along with out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod group;
pub mod harness;
pub mod measure;
pub mod rng;
pub mod stopping;
pub mod transform;
pub mod walk;

pub use error::{Error, Result};
pub use group::{gauge_value, DefaultRule, Gauge, GaugeKind, GroupDescriptor, GroupElement, GroupKind};
pub use harness::{run, ExperimentConfig, Verdict, VerificationReport};
pub use measure::{
    convolution_power, convolve, decompose, entropy, first_moment, mix, sample, Measure, Sampler, TruncationReport,
};
pub use rng::PrngStream;
pub use stopping::{
    build_stopping_rule, compose, evaluate, expectation_estimate, iterate, RuleSpec, StopOutcome, StoppingRule,
};
pub use transform::{
    convex_combination_measure, transformed_measure_exact, transformed_measure_mc, willis_closed_form,
    ExactTransformResult,
};
pub use walk::{
    entropy_difference_estimate, escape_rate_estimate, estimate_hitting_probability, generate_path, green_gauge,
    shannon_estimate, shift_u, Estimate, SamplePath,
};
