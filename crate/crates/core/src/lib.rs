//! Causal sensitivity identification with conditional variational autoencoders.
//!
//! The crate trains small CVAEs under factual, interventional and
//! counterfactual regimes and compares their accuracy to decide which input
//! features are causally sensitive for a prediction target. Ground truth for
//! validation comes from discrete Bayesian networks ([`bayesnet`]) and from a
//! synthetic trajectory generator with planted confounders ([`seqdata`]).

pub mod bayesnet;
pub mod causal;
pub mod cvae;
pub mod data;
pub mod error;
pub mod metrics;
pub mod ndcompute;
pub mod rng;
pub mod seqdata;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
