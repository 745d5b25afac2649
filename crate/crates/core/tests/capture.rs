//! Flow-level properties over whole captures written to and read back from pcap.

use std::collections::BTreeMap;
use std::net::Ipv4Addr;

use proptest::prelude::*;
use tlsjudge::capture::{
    assemble_flows, compute_flow_features, read_pcap, write_pcap, Endian, FlowFeatures, FlowKey, PacketRecord, TcpFlags,
};

#[derive(Debug, Clone)]
struct FlowSpec {
    client: (Ipv4Addr, u16),
    server: (Ipv4Addr, u16),
    packets: Vec<(u64, bool, usize)>,
}

fn flow_spec(index: u8) -> impl Strategy<Value = FlowSpec> {
    let packet = (1u64..3_000_000, any::<bool>(), 0usize..1400);
    (any::<bool>(), prop::collection::vec(packet, 1..25)).prop_map(move |(syn, gaps)| {
        let mut t = 1_700_000_000_000_000u64 + u64::from(index) * 7;
        let packets = gaps
            .into_iter()
            .enumerate()
            .map(|(i, (gap, from_client, len))| {
                t += gap;
                if i == 0 && syn {
                    (t, true, usize::MAX)
                } else {
                    (t, from_client || i == 0, len)
                }
            })
            .collect();
        FlowSpec {
            client: (Ipv4Addr::new(10, 0, 0, index), 40_000 + u16::from(index)),
            server: (Ipv4Addr::new(198, 51, 100, 1), 443),
            packets,
        }
    })
}

fn records(spec: &FlowSpec) -> Vec<PacketRecord> {
    spec.packets
        .iter()
        .map(|&(t_us, from_client, len)| {
            let ((src_ip, src_port), (dst_ip, dst_port)) =
                if from_client { (spec.client, spec.server) } else { (spec.server, spec.client) };
            let (flags, payload) = if len == usize::MAX { (TcpFlags::SYN, 0) } else { (TcpFlags::ACK, len) };
            PacketRecord {
                ts: (t_us / 1_000_000) as f64 + (t_us % 1_000_000) as f64 / 1e6,
                src_ip,
                dst_ip,
                src_port,
                dst_port,
                seq: 1,
                ack: 0,
                tcp_flags: TcpFlags(flags),
                payload: vec![0; payload],
                wire_len: 54 + payload as u32,
            }
        })
        .collect()
}

fn features_by_key(packets: &[PacketRecord], endian: Endian) -> BTreeMap<FlowKey, FlowFeatures> {
    let mut bytes = Vec::new();
    write_pcap(&mut bytes, packets, endian).unwrap();
    let capture = read_pcap(&bytes[..]).unwrap();
    assemble_flows(capture.packets).iter().map(|f| (f.key, compute_flow_features(f).unwrap())).collect()
}

fn interleave(flows: &[Vec<PacketRecord>]) -> Vec<PacketRecord> {
    let mut all: Vec<PacketRecord> = flows.iter().flatten().cloned().collect();
    all.sort_by(|a, b| a.ts.total_cmp(&b.ts));
    all
}

fn flows_strategy() -> impl Strategy<Value = Vec<FlowSpec>> {
    (1usize..6).prop_flat_map(|k| (0..k as u8).map(flow_spec).collect::<Vec<_>>())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn permuting_flows_leaves_features_unchanged((specs, order) in flows_strategy().prop_flat_map(|specs| {
        let order = Just((0..specs.len()).collect::<Vec<_>>()).prop_shuffle();
        (Just(specs), order)
    })) {
        let flows: Vec<Vec<PacketRecord>> = specs.iter().map(records).collect();
        let baseline = features_by_key(&flows.concat(), Endian::Little);
        prop_assert_eq!(baseline.len(), flows.len());

        let permuted: Vec<PacketRecord> = order.iter().flat_map(|&i| flows[i].clone()).collect();
        prop_assert_eq!(&features_by_key(&permuted, Endian::Big), &baseline);
        prop_assert_eq!(&features_by_key(&interleave(&flows), Endian::Little), &baseline);
    }

    #[test]
    fn variance_identity_and_ordering(specs in flows_strategy()) {
        let packets = interleave(&specs.iter().map(records).collect::<Vec<_>>());
        for f in features_by_key(&packets, Endian::Little).values() {
            prop_assert!(f.len_min <= f.len_mean && f.len_mean <= f.len_max);
            prop_assert!(f.iat_min <= f.iat_mean && f.iat_mean <= f.iat_max);
            prop_assert!(f.len_std >= 0.0 && f.iat_std >= 0.0 && f.duration_s >= 0.0);
        }
        for flow in assemble_flows(packets) {
            let f = compute_flow_features(&flow).unwrap();
            let lens: Vec<f64> = flow.packets.iter().map(|p| f64::from(p.record.wire_len)).collect();
            let n = lens.len() as f64;
            let mean_sq = lens.iter().map(|x| x * x).sum::<f64>() / n;
            let identity = mean_sq - f.len_mean * f.len_mean;
            prop_assert!((f.len_std * f.len_std - identity).abs() <= 1e-9 * mean_sq, "{} vs {}", f.len_std * f.len_std, identity);
            prop_assert_eq!(f.in_packets + f.out_packets, flow.packets.len() as u64);
        }
    }
}
