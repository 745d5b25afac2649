use std::collections::HashMap;
use std::net::Ipv4Addr;

use serde::{Deserialize, Serialize};

use super::PacketRecord;

/// Direction-normalized TCP 5-tuple; the client is the connection initiator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FlowKey {
    pub client_ip: Ipv4Addr,
    pub server_ip: Ipv4Addr,
    pub client_port: u16,
    pub server_port: u16,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    /// Client to server.
    Outbound,
    /// Server to client.
    Inbound,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowPacket {
    pub direction: Direction,
    pub record: PacketRecord,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Flow {
    pub key: FlowKey,
    pub packets: Vec<FlowPacket>,
}

impl Flow {
    pub fn direction_packets(&self, direction: Direction) -> impl Iterator<Item = &PacketRecord> {
        self.packets.iter().filter(move |p| p.direction == direction).map(|p| &p.record)
    }
}

type Endpoint = (Ipv4Addr, u16);

/// Groups packets into bidirectional flows, in order of first appearance.
///
/// The client is the sender of the first SYN-without-ACK in the group, or the
/// sender of the group's first packet when no such SYN was captured.
pub fn assemble_flows<I>(packets: I) -> Vec<Flow>
where
    I: IntoIterator<Item = PacketRecord>,
{
    let mut index: HashMap<(Endpoint, Endpoint), usize> = HashMap::new();
    let mut groups: Vec<Vec<PacketRecord>> = Vec::new();
    for p in packets {
        let a = (p.src_ip, p.src_port);
        let b = (p.dst_ip, p.dst_port);
        let pair = if a <= b { (a, b) } else { (b, a) };
        let slot = *index.entry(pair).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[slot].push(p);
    }
    groups
        .into_iter()
        .map(|group| {
            let initiator = group.iter().find(|p| p.tcp_flags.is_initial_syn()).unwrap_or(&group[0]);
            let key = FlowKey {
                client_ip: initiator.src_ip,
                server_ip: initiator.dst_ip,
                client_port: initiator.src_port,
                server_port: initiator.dst_port,
            };
            let packets = group
                .into_iter()
                .map(|record| {
                    let outbound = record.src_ip == key.client_ip && record.src_port == key.client_port;
                    FlowPacket { direction: if outbound { Direction::Outbound } else { Direction::Inbound }, record }
                })
                .collect();
            Flow { key, packets }
        })
        .collect()
}
