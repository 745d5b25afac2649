use std::collections::HashMap;
use std::fs::File;
use std::io::BufReader;
use std::net::Ipv4Addr;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::config::PipelineConfig;
use super::features::{Phase1Features, Phase2Features};
use super::model::{ModelFile, Phase};
use super::PipelineError;
use crate::capture::{assemble_flows, compute_flow_features, read_pcap, CaptureError, FlowKey, PacketRecord};
use crate::ml::{Label, Prediction};
use crate::tls::{parse_records, parse_server_hello, reassemble_streams, TlsServerInfo};
use crate::validation::{validate, ValidationReport};
use crate::x509::CertificateView;

/// Where phase-2 packets come from. Only read when phase 2 actually runs.
pub trait TrafficSource {
    fn read_packets(&mut self) -> Result<Vec<PacketRecord>, CaptureError>;
}

/// A pcap on disk, opened lazily.
#[derive(Debug)]
pub struct PcapFile {
    path: PathBuf,
    opens: usize,
}

impl PcapFile {
    pub fn new(path: impl AsRef<Path>) -> Self {
        Self { path: path.as_ref().to_path_buf(), opens: 0 }
    }

    pub fn times_opened(&self) -> usize {
        self.opens
    }
}

impl TrafficSource for PcapFile {
    fn read_packets(&mut self) -> Result<Vec<PacketRecord>, CaptureError> {
        self.opens += 1;
        let capture = read_pcap(BufReader::new(File::open(&self.path)?))?;
        if capture.skipped > 0 {
            log::debug!("{}: skipped {} non-IPv4/TCP frames", self.path.display(), capture.skipped);
        }
        Ok(capture.packets)
    }
}

/// Packets already in memory; counts how often they were requested.
#[derive(Debug, Clone, Default)]
pub struct MemoryTraffic {
    pub packets: Vec<PacketRecord>,
    pub reads: usize,
}

impl MemoryTraffic {
    pub fn new(packets: Vec<PacketRecord>) -> Self {
        Self { packets, reads: 0 }
    }
}

impl TrafficSource for MemoryTraffic {
    fn read_packets(&mut self) -> Result<Vec<PacketRecord>, CaptureError> {
        self.reads += 1;
        Ok(self.packets.clone())
    }
}

/// A TLS flow from the capture with its phase-2 features.
#[derive(Debug, Clone, PartialEq)]
pub struct TlsFlow {
    pub key: FlowKey,
    pub tls: TlsServerInfo,
    pub features: Phase2Features,
}

/// Every flow in `packets` whose server sent a parseable ServerHello.
/// Flows that are not TLS are skipped.
pub fn extract_tls_flows(packets: Vec<PacketRecord>, phase1: Phase1Features, config: &PipelineConfig) -> Vec<TlsFlow> {
    let mut out = Vec::new();
    for flow in assemble_flows(packets) {
        let streams = reassemble_streams(&flow);
        let s2c = match parse_records(&streams.s2c) {
            Ok(r) => r.records,
            Err(e) => {
                log::debug!("flow {:?}: not TLS ({e})", flow.key);
                continue;
            }
        };
        let c2s = parse_records(&streams.c2s).map(|r| r.records).unwrap_or_default();
        let tls = match parse_server_hello(&s2c, &c2s) {
            Ok(info) => info,
            Err(e) => {
                log::debug!("flow {:?}: {e}", flow.key);
                continue;
            }
        };
        let Ok(flow_features) = compute_flow_features(&flow) else { continue };
        let features = Phase2Features::build(phase1, flow_features, &tls, &config.registry, &config.ciphers);
        out.push(TlsFlow { key: flow.key, tls, features });
    }
    out
}

fn normalize_host(h: &str) -> String {
    h.trim().trim_end_matches('.').to_ascii_lowercase()
}

/// Flows whose SNI names `hostname`; when there are none, flows without SNI.
pub fn select_flows(flows: Vec<TlsFlow>, hostname: &str) -> Vec<TlsFlow> {
    let host = normalize_host(hostname);
    let (named, rest): (Vec<_>, Vec<_>) =
        flows.into_iter().partition(|f| f.tls.sni.as_deref().is_some_and(|s| normalize_host(s) == host));
    if !named.is_empty() {
        return named;
    }
    rest.into_iter().filter(|f| f.tls.sni.is_none()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    RejectedPhase1,
    RejectedPhase2,
    Accepted,
    IndeterminateNoHandshake,
}

impl Decision {
    /// 0 accepted, 2 rejected, 3 indeterminate.
    pub fn exit_code(self) -> i32 {
        match self {
            Decision::Accepted => 0,
            Decision::RejectedPhase1 | Decision::RejectedPhase2 => 2,
            Decision::IndeterminateNoHandshake => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowEvidence {
    pub flow: FlowKey,
    pub tls: TlsServerInfo,
    pub features: Phase2Features,
    pub prediction: Prediction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub validation: ValidationReport,
    pub phase1: Phase1Features,
    /// Present only when traditional validation failed and the phase-1 model ran.
    pub phase1_prediction: Option<Prediction>,
    /// Phase-1 outcome came from the verdict cache.
    pub phase1_cached: bool,
    pub flows: Vec<FlowEvidence>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub decision: Decision,
    /// Model probability behind the decision; 0 when no model decided.
    pub confidence: f64,
    pub evidence: Evidence,
}

impl Verdict {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("verdict serializes")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Phase1Outcome {
    pub report: ValidationReport,
    pub features: Phase1Features,
    pub prediction: Option<Prediction>,
}

/// Phase-1 outcomes keyed by (server IP, leaf fingerprint), so resumed
/// sessions to a known server reuse the earlier certificate decision.
#[derive(Debug, Clone, Default)]
pub struct VerdictCache {
    entries: HashMap<(Ipv4Addr, [u8; 32]), Phase1Outcome>,
}

impl VerdictCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, server: Ipv4Addr, fingerprint: &[u8; 32]) -> Option<&Phase1Outcome> {
        self.entries.get(&(server, *fingerprint))
    }

    pub fn insert(&mut self, server: Ipv4Addr, fingerprint: [u8; 32], outcome: Phase1Outcome) {
        self.entries.insert((server, fingerprint), outcome);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Trained models for both phases.
#[derive(Debug, Clone)]
pub struct Models {
    pub phase1: ModelFile,
    pub phase2: ModelFile,
}

impl Models {
    pub fn new(phase1: ModelFile, phase2: ModelFile) -> Result<Self, PipelineError> {
        phase1.require_phase(Phase::Phase1)?;
        phase2.require_phase(Phase::Phase2)?;
        Ok(Self { phase1, phase2 })
    }
}

/// What is being judged: a presented chain for a hostname at a time.
#[derive(Debug, Clone, Copy)]
pub struct Session<'a> {
    pub chain: &'a [CertificateView],
    pub hostname: &'a str,
    pub at: DateTime<Utc>,
    /// Server address, when known before reading traffic; enables cache reuse.
    pub server_ip: Option<Ipv4Addr>,
}

/// Two-phase verdict. Phase 1 runs only if traditional validation failed; a
/// malicious phase-1 prediction rejects without reading any traffic.
/// Otherwise every selected TLS flow is scored by phase 2, and any malicious
/// flow rejects the site.
pub fn run_verdict(
    session: &Session<'_>,
    traffic: &mut dyn TrafficSource,
    models: &Models,
    config: &PipelineConfig,
    mut cache: Option<&mut VerdictCache>,
) -> Result<Verdict, PipelineError> {
    let leaf = session.chain.first().ok_or(PipelineError::EmptyChain)?;
    if let Some(registry) = &models.phase2.registry {
        if registry != &config.registry {
            return Err(PipelineError::ModelMismatch(format!(
                "phase-2 model was trained with extension registry {:?}, config uses {:?}",
                registry.version, config.registry.version
            )));
        }
    }

    let cached = match (session.server_ip, cache.as_deref()) {
        (Some(ip), Some(c)) => c.get(ip, &leaf.fingerprint).cloned(),
        _ => None,
    };
    let phase1_cached = cached.is_some();
    let outcome = match cached {
        Some(o) => o,
        None => {
            let report = validate(session.chain, session.hostname, session.at, &config.validation);
            let features = Phase1Features::from_report(&report);
            let prediction =
                if report.passed() { None } else { Some(models.phase1.predict_text(&features.text_values())?) };
            Phase1Outcome { report, features, prediction }
        }
    };
    let remember = |cache: &mut Option<&mut VerdictCache>, ip: Ipv4Addr, outcome: &Phase1Outcome| {
        if let Some(c) = cache.as_deref_mut() {
            c.insert(ip, leaf.fingerprint, outcome.clone());
        }
    };

    let mut evidence = Evidence {
        validation: outcome.report.clone(),
        phase1: outcome.features,
        phase1_prediction: outcome.prediction,
        phase1_cached,
        flows: Vec::new(),
    };
    if let Some(p) = outcome.prediction {
        if p.label == Label::Malicious {
            if let Some(ip) = session.server_ip {
                remember(&mut cache, ip, &outcome);
            }
            return Ok(Verdict { decision: Decision::RejectedPhase1, confidence: p.confidence, evidence });
        }
    }

    let packets = traffic.read_packets()?;
    let flows = select_flows(extract_tls_flows(packets, outcome.features, config), session.hostname);
    if flows.is_empty() {
        return Ok(Verdict { decision: Decision::IndeterminateNoHandshake, confidence: 0.0, evidence });
    }
    for flow in flows {
        if session.server_ip.is_none() {
            remember(&mut cache, flow.key.server_ip, &outcome);
        }
        let prediction = models.phase2.predict_text(&flow.features.text_values())?;
        evidence.flows.push(FlowEvidence { flow: flow.key, tls: flow.tls, features: flow.features, prediction });
    }
    if let Some(ip) = session.server_ip {
        remember(&mut cache, ip, &outcome);
    }

    let malicious: Vec<f64> = evidence
        .flows
        .iter()
        .filter(|f| f.prediction.label == Label::Malicious)
        .map(|f| f.prediction.confidence)
        .collect();
    let (decision, confidence) = if malicious.is_empty() {
        let c = evidence.flows.iter().map(|f| f.prediction.confidence).fold(1.0, f64::min);
        (Decision::Accepted, c)
    } else {
        (Decision::RejectedPhase2, malicious.iter().copied().fold(0.0, f64::max))
    };
    Ok(Verdict { decision, confidence, evidence })
}
