use crate::capture::{Direction, Flow, PacketRecord, TcpFlags};

/// Contiguous application bytes per direction.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Streams {
    pub c2s: Vec<u8>,
    pub s2c: Vec<u8>,
    /// A sequence gap truncated the stream.
    pub c2s_gap: bool,
    pub s2c_gap: bool,
}

/// Signed distance from `base` to `seq` under 32-bit wraparound.
fn seq_offset(base: u32, seq: u32) -> i64 {
    i64::from(seq.wrapping_sub(base) as i32)
}

fn reassemble<'a>(packets: impl Iterator<Item = &'a PacketRecord>) -> (Vec<u8>, bool) {
    let packets: Vec<&PacketRecord> = packets.collect();
    let syn = packets.iter().find(|p| p.tcp_flags.has(TcpFlags::SYN));
    let data: Vec<&PacketRecord> = packets.iter().copied().filter(|p| !p.payload.is_empty()).collect();
    let Some(first) = data.first() else {
        return (Vec::new(), false);
    };
    let base = match syn {
        Some(s) => s.seq.wrapping_add(1),
        None => data.iter().map(|p| p.seq).fold(first.seq, |lo, s| if seq_offset(lo, s) < 0 { s } else { lo }),
    };
    let mut segments: Vec<(i64, &[u8])> =
        data.iter().map(|p| (seq_offset(base, p.seq), p.payload.as_slice())).collect();
    segments.sort_by_key(|&(off, _)| off);

    let mut out: Vec<u8> = Vec::new();
    let mut gap = false;
    for (off, payload) in segments {
        let end = off + payload.len() as i64;
        let have = out.len() as i64;
        if end <= have {
            continue;
        }
        if off > have {
            gap = true;
            break;
        }
        out.extend_from_slice(&payload[(have - off) as usize..]);
    }
    (out, gap)
}

/// Reassembles both directions of a flow by TCP sequence number, dropping
/// retransmitted bytes. Each stream stops at the first hole.
pub fn reassemble_streams(flow: &Flow) -> Streams {
    let (c2s, c2s_gap) = reassemble(flow.direction_packets(Direction::Outbound));
    let (s2c, s2c_gap) = reassemble(flow.direction_packets(Direction::Inbound));
    Streams { c2s, s2c, c2s_gap, s2c_gap }
}
