//! The two-phase verdict flow and the feature files and model documents
//! that connect it to training.

mod config;
mod features;
mod model;
mod verdict;

pub use config::PipelineConfig;
pub use features::{Phase1Features, Phase2Features, FEATURE_SCHEMA_VERSION, FLOW_COLUMNS};
pub use model::{train_model, ClassifierModel, ModelFile, Phase, TrainOptions, TrainingSummary};
pub use verdict::{
    extract_tls_flows, run_verdict, select_flows, Decision, Evidence, FlowEvidence, MemoryTraffic, Models, PcapFile,
    Phase1Outcome, Session, TlsFlow, TrafficSource, Verdict, VerdictCache,
};

use crate::capture::CaptureError;
use crate::ml::MlError;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("certificate chain is empty")]
    EmptyChain,
    #[error("no TLS handshake found in the capture")]
    NoHandshake,
    #[error("model mismatch: {0}")]
    ModelMismatch(String),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Capture(#[from] CaptureError),
    #[error(transparent)]
    Ml(#[from] MlError),
    #[error("JSON: {0}")]
    Json(#[from] serde_json::Error),
}
