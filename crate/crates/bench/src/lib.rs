//! Shared fixtures for the benchmarks.

use outreg_core::exo_factorization::FactorizationMethod;
use outreg_core::experiment::{assemble_data_matrices, DataMatrices};
use outreg_core::pipeline::{paper_example_config, run_pipeline};
use outreg_core::synthesis::{assemble_sdp, SdpProblem};
use outreg_core::RunOutcome;

pub struct Fixture {
    pub outcome: RunOutcome,
    pub data: DataMatrices,
    pub problem: SdpProblem,
}

/// A completed VTOL run and the SDP it solved.
pub fn vtol(seed: u64, method: FactorizationMethod) -> Fixture {
    let outcome = run_pipeline(&paper_example_config(seed, method)).expect("VTOL pipeline");
    let data = assemble_data_matrices(&outcome.record).expect("data matrices");
    let problem = assemble_sdp(&data, &outcome.regressor).expect("SDP");
    Fixture { outcome, data, problem }
}
