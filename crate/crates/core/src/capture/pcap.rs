//! Classic pcap (microsecond, Ethernet II) reading and writing.

use std::io::{self, Read, Write};
use std::net::Ipv4Addr;

use super::{CaptureError, PacketRecord, TcpFlags};

pub const MAGIC: u32 = 0xa1b2_c3d4;
pub const LINKTYPE_ETHERNET: u32 = 1;
const ETHERTYPE_IPV4: u16 = 0x0800;
const IPPROTO_TCP: u8 = 6;
const ETH_LEN: usize = 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Endian {
    Little,
    Big,
}

impl Endian {
    fn u16(self, b: [u8; 2]) -> u16 {
        match self {
            Self::Little => u16::from_le_bytes(b),
            Self::Big => u16::from_be_bytes(b),
        }
    }

    fn u32(self, b: [u8; 4]) -> u32 {
        match self {
            Self::Little => u32::from_le_bytes(b),
            Self::Big => u32::from_be_bytes(b),
        }
    }

    fn put_u16(self, v: u16) -> [u8; 2] {
        match self {
            Self::Little => v.to_le_bytes(),
            Self::Big => v.to_be_bytes(),
        }
    }

    fn put_u32(self, v: u32) -> [u8; 4] {
        match self {
            Self::Little => v.to_le_bytes(),
            Self::Big => v.to_be_bytes(),
        }
    }
}

/// Everything read from one capture file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Capture {
    pub packets: Vec<PacketRecord>,
    /// Frames that were not IPv4/TCP (or too short to decode).
    pub skipped: usize,
}

fn read_full<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<usize, CaptureError> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
            Err(e) => return Err(e.into()),
        }
    }
    Ok(filled)
}

pub fn read_pcap<R: Read>(mut reader: R) -> Result<Capture, CaptureError> {
    let mut header = [0u8; 24];
    let n = read_full(&mut reader, &mut header)?;
    if n < 4 {
        return Err(CaptureError::BadMagic(0));
    }
    let magic = u32::from_le_bytes([header[0], header[1], header[2], header[3]]);
    let endian = match magic {
        MAGIC => Endian::Little,
        m if m.swap_bytes() == MAGIC => Endian::Big,
        m => return Err(CaptureError::BadMagic(m)),
    };
    if n < 24 {
        return Err(CaptureError::TruncatedRecord { index: 0, needed: 24, available: n });
    }
    let major = endian.u16([header[4], header[5]]);
    if major != 2 {
        log::warn!("pcap major version {major}, expected 2");
    }
    let linktype = endian.u32([header[20], header[21], header[22], header[23]]);
    if linktype != LINKTYPE_ETHERNET {
        return Err(CaptureError::UnsupportedLinkType(linktype));
    }

    let mut capture = Capture::default();
    let mut index = 0usize;
    loop {
        let mut rec = [0u8; 16];
        let got = read_full(&mut reader, &mut rec)?;
        if got == 0 {
            break;
        }
        if got < 16 {
            return Err(CaptureError::TruncatedRecord { index, needed: 16, available: got });
        }
        let field = |i: usize| endian.u32([rec[i], rec[i + 1], rec[i + 2], rec[i + 3]]);
        let (ts_sec, ts_usec, incl_len, orig_len) = (field(0), field(4), field(8), field(12));
        let mut data = vec![0u8; incl_len as usize];
        let got = read_full(&mut reader, &mut data)?;
        if got < data.len() {
            return Err(CaptureError::TruncatedRecord { index, needed: data.len(), available: got });
        }
        let ts = f64::from(ts_sec) + f64::from(ts_usec) / 1e6;
        match decode_frame(&data, ts, orig_len.max(incl_len)) {
            Some(p) => capture.packets.push(p),
            None => capture.skipped += 1,
        }
        index += 1;
    }
    Ok(capture)
}

/// Decodes an Ethernet II / IPv4 / TCP frame. Anything else yields `None`.
fn decode_frame(frame: &[u8], ts: f64, wire_len: u32) -> Option<PacketRecord> {
    let ethertype = u16::from_be_bytes(frame.get(12..14)?.try_into().ok()?);
    if ethertype != ETHERTYPE_IPV4 {
        return None;
    }
    let ip = frame.get(ETH_LEN..)?;
    let version_ihl = *ip.first()?;
    if version_ihl >> 4 != 4 {
        return None;
    }
    let ihl = usize::from(version_ihl & 0x0f) * 4;
    if ihl < 20 || ip.len() < ihl {
        return None;
    }
    let total_len = usize::from(u16::from_be_bytes([ip[2], ip[3]]));
    let frag = u16::from_be_bytes([ip[6], ip[7]]);
    if ip[9] != IPPROTO_TCP || frag & 0x1fff != 0 {
        return None;
    }
    let src_ip = Ipv4Addr::new(ip[12], ip[13], ip[14], ip[15]);
    let dst_ip = Ipv4Addr::new(ip[16], ip[17], ip[18], ip[19]);
    let ip_end = if total_len >= ihl { total_len.min(ip.len()) } else { ip.len() };
    let tcp = ip.get(ihl..ip_end)?;
    if tcp.len() < 20 {
        return None;
    }
    let data_offset = usize::from(tcp[12] >> 4) * 4;
    if data_offset < 20 || tcp.len() < data_offset {
        return None;
    }
    Some(PacketRecord {
        ts,
        src_ip,
        dst_ip,
        src_port: u16::from_be_bytes([tcp[0], tcp[1]]),
        dst_port: u16::from_be_bytes([tcp[2], tcp[3]]),
        seq: u32::from_be_bytes([tcp[4], tcp[5], tcp[6], tcp[7]]),
        ack: u32::from_be_bytes([tcp[8], tcp[9], tcp[10], tcp[11]]),
        tcp_flags: TcpFlags(tcp[13]),
        payload: tcp[data_offset..].to_vec(),
        wire_len,
    })
}

/// Builds the Ethernet/IPv4/TCP frame for a record (no options, zero checksums).
pub fn encode_frame(p: &PacketRecord) -> Vec<u8> {
    let mut f = Vec::with_capacity(54 + p.payload.len());
    f.extend_from_slice(&[0x02, 0, 0, 0, 0, 0x02, 0x02, 0, 0, 0, 0, 0x01]);
    f.extend_from_slice(&ETHERTYPE_IPV4.to_be_bytes());
    let total = (20 + 20 + p.payload.len()) as u16;
    f.extend_from_slice(&[0x45, 0x00]);
    f.extend_from_slice(&total.to_be_bytes());
    f.extend_from_slice(&[0, 0, 0x40, 0, 64, IPPROTO_TCP, 0, 0]);
    f.extend_from_slice(&p.src_ip.octets());
    f.extend_from_slice(&p.dst_ip.octets());
    f.extend_from_slice(&p.src_port.to_be_bytes());
    f.extend_from_slice(&p.dst_port.to_be_bytes());
    f.extend_from_slice(&p.seq.to_be_bytes());
    f.extend_from_slice(&p.ack.to_be_bytes());
    f.extend_from_slice(&[0x50, p.tcp_flags.0, 0xff, 0xff, 0, 0, 0, 0]);
    f.extend_from_slice(&p.payload);
    f
}

/// Writes a capture. Timestamps are split into whole seconds and rounded microseconds.
pub fn write_pcap<W: Write>(mut w: W, packets: &[PacketRecord], endian: Endian) -> io::Result<()> {
    w.write_all(&endian.put_u32(MAGIC))?;
    w.write_all(&endian.put_u16(2))?;
    w.write_all(&endian.put_u16(4))?;
    w.write_all(&endian.put_u32(0))?;
    w.write_all(&endian.put_u32(0))?;
    w.write_all(&endian.put_u32(65_535))?;
    w.write_all(&endian.put_u32(LINKTYPE_ETHERNET))?;
    for p in packets {
        let frame = encode_frame(p);
        let total_us = (p.ts * 1e6).round() as u64;
        let orig = p.wire_len.max(frame.len() as u32);
        w.write_all(&endian.put_u32((total_us / 1_000_000) as u32))?;
        w.write_all(&endian.put_u32((total_us % 1_000_000) as u32))?;
        w.write_all(&endian.put_u32(frame.len() as u32))?;
        w.write_all(&endian.put_u32(orig))?;
        w.write_all(&frame)?;
    }
    Ok(())
}
