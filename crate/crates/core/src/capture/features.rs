use serde::{Deserialize, Serialize};

use super::{CaptureError, Direction, Flow, FlowKey};

/// Flow metadata plus packet-length and inter-arrival statistics.
///
/// Lengths are wire lengths over both directions; inter-arrival times are
/// taken between consecutive packets regardless of direction. Standard
/// deviations are population deviations. Ports are client-relative: `src_port`
/// is the client's port.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowFeatures {
    pub in_bytes: u64,
    pub out_bytes: u64,
    pub in_packets: u64,
    pub out_packets: u64,
    pub src_port: u16,
    pub dst_port: u16,
    pub duration_s: f64,
    pub len_min: f64,
    pub len_max: f64,
    pub len_mean: f64,
    pub len_std: f64,
    pub iat_min: f64,
    pub iat_max: f64,
    pub iat_mean: f64,
    pub iat_std: f64,
}

/// Running min/max/mean/variance (Welford).
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: u64,
    min: f64,
    max: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        if self.n == 0 {
            self.min = x;
            self.max = x;
        } else {
            self.min = self.min.min(x);
            self.max = self.max.max(x);
        }
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    fn std(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            (self.m2 / self.n as f64).max(0.0).sqrt()
        }
    }

    /// Clamp the mean into [min, max] against rounding drift.
    fn mean(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.mean.clamp(self.min, self.max)
        }
    }
}

/// Streaming form of [`compute_flow_features`]; packets must be pushed in capture order.
#[derive(Debug, Clone, Default)]
pub struct FlowStatsAccumulator {
    lengths: Moments,
    iats: Moments,
    first_ts: Option<f64>,
    prev_ts: f64,
    in_bytes: u64,
    out_bytes: u64,
    in_packets: u64,
    out_packets: u64,
}

impl FlowStatsAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, direction: Direction, ts: f64, wire_len: u32) {
        match self.first_ts {
            None => self.first_ts = Some(ts),
            Some(_) => self.iats.push(ts - self.prev_ts),
        }
        self.prev_ts = ts;
        self.lengths.push(f64::from(wire_len));
        match direction {
            Direction::Inbound => {
                self.in_bytes += u64::from(wire_len);
                self.in_packets += 1;
            }
            Direction::Outbound => {
                self.out_bytes += u64::from(wire_len);
                self.out_packets += 1;
            }
        }
    }

    pub fn finish(&self, key: &FlowKey) -> Result<FlowFeatures, CaptureError> {
        let first = self.first_ts.ok_or(CaptureError::EmptyFlow)?;
        let (iat_min, iat_max) = if self.iats.n == 0 { (0.0, 0.0) } else { (self.iats.min, self.iats.max) };
        Ok(FlowFeatures {
            in_bytes: self.in_bytes,
            out_bytes: self.out_bytes,
            in_packets: self.in_packets,
            out_packets: self.out_packets,
            src_port: key.client_port,
            dst_port: key.server_port,
            duration_s: (self.prev_ts - first).max(0.0),
            len_min: self.lengths.min,
            len_max: self.lengths.max,
            len_mean: self.lengths.mean(),
            len_std: self.lengths.std(),
            iat_min,
            iat_max,
            iat_mean: self.iats.mean(),
            iat_std: self.iats.std(),
        })
    }
}

pub fn compute_flow_features(flow: &Flow) -> Result<FlowFeatures, CaptureError> {
    let mut acc = FlowStatsAccumulator::new();
    for p in &flow.packets {
        acc.push(p.direction, p.record.ts, p.record.wire_len);
    }
    acc.finish(&flow.key)
}
