//! Shared inputs for the criterion benches.

use tlsjudge::ml::Dataset;
use tlsjudge::pipeline::PipelineConfig;
use tlsjudge::synth::{self, SynthConfig, SyntheticSession};

pub const CHAIN_PEM: &[u8] = include_bytes!("../../core/tests/fixtures/certs/all_pass.pem");

pub fn sessions(n: usize) -> Vec<SyntheticSession> {
    synth::generate(&SynthConfig { sessions: n, ..SynthConfig::default() })
}

pub fn phase1_data(sessions: &[SyntheticSession]) -> Dataset {
    synth::phase1_dataset(sessions).expect("synthetic phase-1 rows")
}

pub fn phase2_data(sessions: &[SyntheticSession]) -> Dataset {
    synth::phase2_dataset(sessions, &PipelineConfig::default()).expect("synthetic phase-2 rows")
}
