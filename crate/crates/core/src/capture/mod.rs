//! Sandbox capture ingestion: pcap decoding, bidirectional flow assembly and
//! per-flow length / inter-arrival statistics.

mod features;
mod flow;
pub mod pcap;

use std::net::Ipv4Addr;

pub use features::{compute_flow_features, FlowFeatures, FlowStatsAccumulator};
pub use flow::{assemble_flows, Direction, Flow, FlowKey, FlowPacket};
pub use pcap::{read_pcap, write_pcap, Capture, Endian};

#[derive(Debug, thiserror::Error)]
pub enum CaptureError {
    #[error("not a classic pcap file (magic 0x{0:08x})")]
    BadMagic(u32),
    #[error("record {index} truncated: needs {needed} bytes, {available} available")]
    TruncatedRecord { index: usize, needed: usize, available: usize },
    #[error("unsupported link type {0} (only Ethernet is supported)")]
    UnsupportedLinkType(u32),
    #[error("flow has no packets")]
    EmptyFlow,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct TcpFlags(pub u8);

impl TcpFlags {
    pub const FIN: u8 = 0x01;
    pub const SYN: u8 = 0x02;
    pub const RST: u8 = 0x04;
    pub const PSH: u8 = 0x08;
    pub const ACK: u8 = 0x10;

    pub fn has(self, flag: u8) -> bool {
        self.0 & flag != 0
    }

    /// SYN without ACK: the connection initiator's first segment.
    pub fn is_initial_syn(self) -> bool {
        self.has(Self::SYN) && !self.has(Self::ACK)
    }
}

/// One IPv4/TCP packet as captured.
#[derive(Debug, Clone, PartialEq)]
pub struct PacketRecord {
    /// Seconds: `ts_sec + ts_usec / 1e6`.
    pub ts: f64,
    pub src_ip: Ipv4Addr,
    pub dst_ip: Ipv4Addr,
    pub src_port: u16,
    pub dst_port: u16,
    pub seq: u32,
    pub ack: u32,
    pub tcp_flags: TcpFlags,
    pub payload: Vec<u8>,
    /// Original length on the wire, including link-layer header.
    pub wire_len: u32,
}
