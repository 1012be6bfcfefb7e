//! Data-driven output regulation: experiment collection, exosignal
//! factorization, SDP synthesis of a gain, and oracle verification.

pub mod error;
pub mod exo_factorization;
pub mod experiment;
pub mod internal_model;
pub mod numerics;
pub mod pipeline;
pub mod plant;
pub mod scenarios;
pub mod synthesis;
pub mod verify;

pub use error::{Error, Result};
pub use numerics::{Matrix, Vector};
pub use pipeline::{run_pipeline, run_synthesis, RunConfig, RunOutcome, RunReport};
pub use synthesis::{SolverOptions, SynthesisResult, SynthesisStatus};
