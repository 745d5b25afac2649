//! Seeded synthetic sandbox corpus.
//!
//! Each session is a full TCP conversation with a plaintext TLS handshake and
//! encrypted-looking application records, plus the certificate flags the
//! session's server would have produced. Malicious servers mostly select one
//! of the malware-favored suites, offer at most one extension and are often
//! self-signed; benign servers select modern suites and 3 to 8 extensions.

use std::net::Ipv4Addr;

use rand::seq::IndexedRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, LogNormal};

use crate::capture::{Direction, PacketRecord, TcpFlags};
use crate::ml::{Dataset, Label, MlError};
use crate::pipeline::{extract_tls_flows, Phase1Features, Phase2Features, PipelineConfig, PipelineError};
use crate::tls::build::{client_hello, encode_record, handshake_message, server_hello};
use crate::tls::content_type::{APPLICATION_DATA, CHANGE_CIPHER_SPEC, HANDSHAKE};
use crate::tls::{ExtensionRegistry, MALWARE_FAVORED_CIPHERSUITES};

/// Suites a benign server picks from; none is on the malware-favored list.
pub const BENIGN_CIPHERSUITES: [u16; 10] =
    [0x002f, 0x0035, 0x003c, 0x009c, 0x009d, 0xc013, 0xc014, 0xc02b, 0xc02f, 0xc030];

const MSS: usize = 1460;
const HEADER_LEN: u32 = 54;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    pub sessions: usize,
    pub malicious_fraction: f64,
    pub seed: u64,
    /// Probability a benign server presents a self-signed certificate.
    pub benign_self_signed: f64,
    /// Probability a malicious server presents a self-signed certificate.
    pub malicious_self_signed: f64,
    /// Probability a malicious server picks a malware-favored suite.
    pub malicious_favored_suite: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            sessions: 1000,
            malicious_fraction: 0.5,
            seed: 42,
            benign_self_signed: 0.09,
            malicious_self_signed: 0.7,
            malicious_favored_suite: 0.9,
        }
    }
}

/// What the server does in the handshake and afterwards.
#[derive(Debug, Clone, PartialEq)]
pub struct HandshakeSpec {
    pub client: (Ipv4Addr, u16),
    pub server: (Ipv4Addr, u16),
    pub start_us: u64,
    pub sni: Option<String>,
    pub ciphersuite: u16,
    pub extensions: Vec<u16>,
    /// Abbreviated handshake with no Certificate message.
    pub resumed: bool,
    pub certificate_len: usize,
    /// (request size, response record sizes) per application exchange.
    pub exchanges: Vec<(usize, Vec<usize>)>,
    pub mean_gap_us: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSession {
    pub index: usize,
    pub label: Label,
    pub hostname: String,
    pub phase1: Phase1Features,
    pub spec: HandshakeSpec,
    pub packets: Vec<PacketRecord>,
}

fn timestamp(us: u64) -> f64 {
    // Same arithmetic as the pcap reader, so a pcap round trip is exact.
    f64::from((us / 1_000_000) as u32) + f64::from((us % 1_000_000) as u32) / 1e6
}

struct Conversation<'r> {
    rng: &'r mut ChaCha8Rng,
    gap: Exp<f64>,
    client: (Ipv4Addr, u16),
    server: (Ipv4Addr, u16),
    seq: [u32; 2],
    t_us: u64,
    packets: Vec<PacketRecord>,
}

impl Conversation<'_> {
    fn side(dir: Direction) -> usize {
        match dir {
            Direction::Outbound => 0,
            Direction::Inbound => 1,
        }
    }

    fn emit(&mut self, dir: Direction, flags: u8, payload: &[u8]) {
        let (src, dst) = match dir {
            Direction::Outbound => (self.client, self.server),
            Direction::Inbound => (self.server, self.client),
        };
        let me = Self::side(dir);
        let consumed = payload.len() as u32 + u32::from(flags & (TcpFlags::SYN | TcpFlags::FIN) != 0);
        self.packets.push(PacketRecord {
            ts: timestamp(self.t_us),
            src_ip: src.0,
            dst_ip: dst.0,
            src_port: src.1,
            dst_port: dst.1,
            seq: self.seq[me],
            ack: if flags & TcpFlags::ACK != 0 { self.seq[1 - me] } else { 0 },
            tcp_flags: TcpFlags(flags),
            payload: payload.to_vec(),
            wire_len: HEADER_LEN + payload.len() as u32,
        });
        self.seq[me] = self.seq[me].wrapping_add(consumed);
        self.t_us += 1 + self.gap.sample(self.rng) as u64;
    }

    /// Sends bytes as MSS-sized segments, with an occasional bare ACK back.
    fn send(&mut self, dir: Direction, bytes: &[u8]) {
        let back = match dir {
            Direction::Outbound => Direction::Inbound,
            Direction::Inbound => Direction::Outbound,
        };
        for (i, chunk) in bytes.chunks(MSS).enumerate() {
            self.emit(dir, TcpFlags::ACK | TcpFlags::PSH, chunk);
            if i % 2 == 1 {
                self.emit(back, TcpFlags::ACK, &[]);
            }
        }
    }
}

fn random_bytes(rng: &mut ChaCha8Rng, n: usize) -> Vec<u8> {
    let mut out = vec![0u8; n];
    rng.fill_bytes(&mut out);
    out
}

fn records(content_type: u8, version: u16, payload: &[u8]) -> Vec<u8> {
    payload.chunks(16_384).flat_map(|c| encode_record(content_type, version, c)).collect()
}

/// Renders a handshake spec into a packet list.
pub fn session_packets(spec: &HandshakeSpec, rng: &mut ChaCha8Rng) -> Vec<PacketRecord> {
    let isn: [u32; 2] = [rng.random(), rng.random()];
    let mut c = Conversation {
        gap: Exp::new(1.0 / spec.mean_gap_us.max(1.0)).expect("positive rate"),
        rng,
        client: spec.client,
        server: spec.server,
        seq: isn,
        t_us: spec.start_us,
        packets: Vec::new(),
    };
    use Direction::{Inbound, Outbound};
    c.emit(Outbound, TcpFlags::SYN, &[]);
    c.emit(Inbound, TcpFlags::SYN | TcpFlags::ACK, &[]);
    c.emit(Outbound, TcpFlags::ACK, &[]);

    let offered: Vec<u16> = MALWARE_FAVORED_CIPHERSUITES.iter().chain(&BENIGN_CIPHERSUITES).copied().collect();
    let hello = client_hello(spec.sni.as_deref(), &offered, &[(0x000b, vec![1, 0]), (0xff01, vec![0])]);
    c.send(Outbound, &encode_record(HANDSHAKE, 0x0301, &hello));

    let exts: Vec<(u16, Vec<u8>)> = spec.extensions.iter().map(|&id| (id, vec![0])).collect();
    let mut flight = server_hello(0x0303, spec.ciphersuite, &exts);
    if spec.resumed {
        let mut bytes = records(HANDSHAKE, 0x0303, &flight);
        bytes.extend(encode_record(CHANGE_CIPHER_SPEC, 0x0303, &[1]));
        let fin = random_bytes(c.rng, 40);
        bytes.extend(encode_record(HANDSHAKE, 0x0303, &fin));
        c.send(Inbound, &bytes);
        let mut reply = encode_record(CHANGE_CIPHER_SPEC, 0x0303, &[1]);
        let fin = random_bytes(c.rng, 40);
        reply.extend(encode_record(HANDSHAKE, 0x0303, &fin));
        c.send(Outbound, &reply);
    } else {
        let cert = random_bytes(c.rng, spec.certificate_len);
        flight.extend(handshake_message(11, &cert));
        flight.extend(handshake_message(14, &[]));
        c.send(Inbound, &records(HANDSHAKE, 0x0303, &flight));
        let kx = random_bytes(c.rng, 70);
        let mut reply = encode_record(HANDSHAKE, 0x0303, &handshake_message(16, &kx));
        reply.extend(encode_record(CHANGE_CIPHER_SPEC, 0x0303, &[1]));
        let fin = random_bytes(c.rng, 40);
        reply.extend(encode_record(HANDSHAKE, 0x0303, &fin));
        c.send(Outbound, &reply);
        let mut done = encode_record(CHANGE_CIPHER_SPEC, 0x0303, &[1]);
        let fin = random_bytes(c.rng, 40);
        done.extend(encode_record(HANDSHAKE, 0x0303, &fin));
        c.send(Inbound, &done);
    }

    for (request, responses) in &spec.exchanges {
        let body = random_bytes(c.rng, *request);
        c.send(Outbound, &encode_record(APPLICATION_DATA, 0x0303, &body));
        let mut bytes = Vec::new();
        for &n in responses {
            let body = random_bytes(c.rng, n);
            bytes.extend(encode_record(APPLICATION_DATA, 0x0303, &body));
        }
        c.send(Inbound, &bytes);
    }

    c.emit(Outbound, TcpFlags::FIN | TcpFlags::ACK, &[]);
    c.emit(Inbound, TcpFlags::FIN | TcpFlags::ACK, &[]);
    c.emit(Outbound, TcpFlags::ACK, &[]);
    c.packets
}

fn certificate_flags(rng: &mut ChaCha8Rng, label: Label, cfg: &SynthConfig) -> Phase1Features {
    // Per-criterion failure rates: key usage, validity, critical, hostname, basic, name.
    let rates: [f64; 6] = match label {
        Label::Malicious => [0.10, 0.35, 0.10, 0.45, 0.10, 0.05],
        Label::Benign => [0.02, 0.04, 0.01, 0.04, 0.01, 0.01],
    };
    let mut a = [false; 7];
    for (slot, p) in a.iter_mut().zip(rates) {
        *slot = rng.random_bool(p);
    }
    a[6] = rng.random_bool(match label {
        Label::Malicious => cfg.malicious_self_signed,
        Label::Benign => cfg.benign_self_signed,
    });
    Phase1Features::from_array(a)
}

fn handshake_spec(
    rng: &mut ChaCha8Rng,
    index: usize,
    label: Label,
    cfg: &SynthConfig,
    hostname: &str,
) -> HandshakeSpec {
    let registry = ExtensionRegistry::default();
    let client = (Ipv4Addr::new(10, 0, (index >> 8) as u8, index as u8), rng.random_range(49_152..=65_535));
    let start_us = 1_700_000_000_000_000 + index as u64 * 60_000_000;
    let size = |rng: &mut ChaCha8Rng, median: f64, sigma: f64, cap: usize| {
        let d = LogNormal::new(median.ln(), sigma).expect("valid lognormal");
        (d.sample(rng) as usize).clamp(16, cap)
    };
    match label {
        Label::Benign => {
            let k = rng.random_range(3..=8);
            let mut extensions: Vec<u16> = registry.ids().choose_multiple(rng, k).copied().collect();
            extensions.sort_unstable();
            let exchanges = (0..rng.random_range(2..=6))
                .map(|_| {
                    let req = size(rng, 450.0, 0.4, 2_000);
                    let n = rng.random_range(2..=12);
                    (req, (0..n).map(|_| size(rng, 1_400.0, 0.9, 16_384)).collect())
                })
                .collect();
            HandshakeSpec {
                client,
                server: (Ipv4Addr::new(93, 184, rng.random(), rng.random()), 443),
                start_us,
                sni: Some(hostname.to_string()),
                ciphersuite: *BENIGN_CIPHERSUITES.choose(rng).expect("non-empty"),
                extensions,
                resumed: rng.random_bool(0.1),
                certificate_len: rng.random_range(1_800..=4_500),
                exchanges,
                mean_gap_us: 15_000.0,
            }
        }
        Label::Malicious => {
            let ciphersuite = if rng.random_bool(cfg.malicious_favored_suite) {
                *MALWARE_FAVORED_CIPHERSUITES.choose(rng).expect("non-empty")
            } else {
                *BENIGN_CIPHERSUITES.choose(rng).expect("non-empty")
            };
            let extensions = if rng.random_bool(0.5) {
                vec![*[0xff01u16, 0x000b, 0x0023].choose(rng).expect("non-empty")]
            } else {
                vec![]
            };
            let exchanges = (0..rng.random_range(1..=3))
                .map(|_| {
                    let req = size(rng, 300.0, 0.5, 2_000);
                    let n = rng.random_range(1..=4);
                    (req, (0..n).map(|_| size(rng, 900.0, 1.0, 16_384)).collect())
                })
                .collect();
            HandshakeSpec {
                client,
                server: (
                    Ipv4Addr::new(185, rng.random(), rng.random(), rng.random()),
                    if rng.random_bool(0.2) { 8443 } else { 443 },
                ),
                start_us,
                sni: Some(hostname.to_string()),
                ciphersuite,
                extensions,
                resumed: false,
                certificate_len: rng.random_range(600..=1_400),
                exchanges,
                mean_gap_us: 40_000.0,
            }
        }
    }
}

/// Generates `cfg.sessions` sessions; the same config always yields the same corpus.
pub fn generate(cfg: &SynthConfig) -> Vec<SyntheticSession> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let malicious = (cfg.sessions as f64 * cfg.malicious_fraction).round() as usize;
    let mut labels: Vec<Label> =
        (0..cfg.sessions).map(|i| if i < malicious { Label::Malicious } else { Label::Benign }).collect();
    rand::seq::SliceRandom::shuffle(labels.as_mut_slice(), &mut rng);
    labels
        .into_iter()
        .enumerate()
        .map(|(index, label)| {
            let hostname = match label {
                Label::Benign => format!("www.site{index}.example.com"),
                Label::Malicious => format!("secure-login{index}.example.net"),
            };
            let phase1 = certificate_flags(&mut rng, label, cfg);
            let spec = handshake_spec(&mut rng, index, label, cfg, &hostname);
            let packets = session_packets(&spec, &mut rng);
            SyntheticSession { index, label, hostname, phase1, spec, packets }
        })
        .collect()
}

pub fn phase1_dataset(sessions: &[SyntheticSession]) -> Result<Dataset, MlError> {
    let mut ds = Dataset::new(Phase1Features::schema());
    for s in sessions {
        ds.push_text(&s.phase1.text_values(), s.label)?;
    }
    Ok(ds)
}

/// Runs every session's packets through flow assembly and TLS parsing and
/// collects the resulting phase-2 rows.
pub fn phase2_dataset(sessions: &[SyntheticSession], config: &PipelineConfig) -> Result<Dataset, PipelineError> {
    let mut ds = Dataset::new(Phase2Features::schema());
    for s in sessions {
        let flows = extract_tls_flows(s.packets.clone(), s.phase1, config);
        let flow = flows.into_iter().next().ok_or(PipelineError::NoHandshake)?;
        ds.push_text(&flow.features.text_values(), s.label)?;
    }
    Ok(ds)
}
