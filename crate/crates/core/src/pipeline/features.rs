use serde::{Deserialize, Serialize};

use crate::capture::FlowFeatures;
use crate::ml::Attribute;
use crate::tls::{
    extension_vector, CipherPolicy, ExtensionRegistry, ExtensionVector, TlsServerInfo, EXTENSION_VECTOR_LEN,
};
use crate::validation::{Criterion, ValidationReport};

/// Bumped whenever a column is added, removed or reordered.
pub const FEATURE_SCHEMA_VERSION: u32 = 1;

const BOOL_DOMAIN: [&str; 2] = ["0", "1"];

fn flag(b: bool) -> String {
    if b { "1" } else { "0" }.to_string()
}

/// Certificate evidence: one flag per failed criterion, plus self-signed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Phase1Features {
    pub fail_key_usage: bool,
    pub fail_validity: bool,
    pub fail_critical_ext: bool,
    pub fail_hostname: bool,
    pub fail_basic_constraints: bool,
    pub fail_name_constraints: bool,
    pub self_signed: bool,
}

impl Phase1Features {
    pub const COLUMNS: [&'static str; 7] = [
        "fail_key_usage",
        "fail_validity",
        "fail_critical_ext",
        "fail_hostname",
        "fail_basic_constraints",
        "fail_name_constraints",
        "self_signed",
    ];

    pub fn from_report(report: &ValidationReport) -> Self {
        Self {
            fail_key_usage: report.failed(Criterion::KeyUsage),
            fail_validity: report.failed(Criterion::ValidityDates),
            fail_critical_ext: report.failed(Criterion::CriticalExtensions),
            fail_hostname: report.failed(Criterion::HostnameValidation),
            fail_basic_constraints: report.failed(Criterion::BasicConstraints),
            fail_name_constraints: report.failed(Criterion::NameConstraints),
            self_signed: report.self_signed,
        }
    }

    pub fn to_array(&self) -> [bool; 7] {
        [
            self.fail_key_usage,
            self.fail_validity,
            self.fail_critical_ext,
            self.fail_hostname,
            self.fail_basic_constraints,
            self.fail_name_constraints,
            self.self_signed,
        ]
    }

    pub fn from_array(a: [bool; 7]) -> Self {
        Self {
            fail_key_usage: a[0],
            fail_validity: a[1],
            fail_critical_ext: a[2],
            fail_hostname: a[3],
            fail_basic_constraints: a[4],
            fail_name_constraints: a[5],
            self_signed: a[6],
        }
    }

    pub fn schema() -> Vec<Attribute> {
        Self::COLUMNS.iter().map(|c| Attribute::nominal(*c, &BOOL_DOMAIN)).collect()
    }

    pub fn text_values(&self) -> Vec<String> {
        self.to_array().into_iter().map(flag).collect()
    }
}

/// Flow-level numeric columns, in schema order.
pub const FLOW_COLUMNS: [&str; 15] = [
    "in_bytes",
    "out_bytes",
    "in_packets",
    "out_packets",
    "src_port",
    "dst_port",
    "duration_s",
    "len_min",
    "len_max",
    "len_mean",
    "len_std",
    "iat_min",
    "iat_max",
    "iat_mean",
    "iat_std",
];

fn flow_values(f: &FlowFeatures) -> [f64; 15] {
    [
        f.in_bytes as f64,
        f.out_bytes as f64,
        f.in_packets as f64,
        f.out_packets as f64,
        f64::from(f.src_port),
        f64::from(f.dst_port),
        f.duration_s,
        f.len_min,
        f.len_max,
        f.len_mean,
        f.len_std,
        f.iat_min,
        f.iat_max,
        f.iat_mean,
        f.iat_std,
    ]
}

/// Session evidence: certificate flags, flow statistics and plaintext
/// handshake choices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Phase2Features {
    pub phase1: Phase1Features,
    pub flow: FlowFeatures,
    pub extensions: ExtensionVector,
    pub ciphersuite_code: u16,
    pub weak_ciphersuite: bool,
}

impl Phase2Features {
    pub const WIDTH: usize = 7 + FLOW_COLUMNS.len() + EXTENSION_VECTOR_LEN + 2;

    pub fn build(
        phase1: Phase1Features,
        flow: FlowFeatures,
        tls: &TlsServerInfo,
        registry: &ExtensionRegistry,
        ciphers: &CipherPolicy,
    ) -> Self {
        Self {
            phase1,
            flow,
            extensions: extension_vector(tls, registry),
            ciphersuite_code: tls.selected_ciphersuite,
            weak_ciphersuite: ciphers.is_weak(tls.selected_ciphersuite),
        }
    }

    pub fn columns() -> Vec<String> {
        let mut cols: Vec<String> = Phase1Features::COLUMNS.iter().map(|s| s.to_string()).collect();
        cols.extend(FLOW_COLUMNS.iter().map(|s| s.to_string()));
        cols.extend((0..EXTENSION_VECTOR_LEN).map(|i| format!("ext_bit_{i}")));
        cols.push("ciphersuite_code".into());
        cols.push("weak_ciphersuite".into());
        cols
    }

    pub fn schema() -> Vec<Attribute> {
        let mut attrs = Phase1Features::schema();
        attrs.extend(FLOW_COLUMNS.iter().map(|c| Attribute::numeric(*c)));
        attrs.extend((0..EXTENSION_VECTOR_LEN).map(|i| Attribute::nominal(format!("ext_bit_{i}"), &BOOL_DOMAIN)));
        attrs.push(Attribute::nominal("ciphersuite_code", &[]));
        attrs.push(Attribute::nominal("weak_ciphersuite", &BOOL_DOMAIN));
        attrs
    }

    pub fn text_values(&self) -> Vec<String> {
        let mut out = self.phase1.text_values();
        out.extend(flow_values(&self.flow).iter().map(|x| x.to_string()));
        out.extend(self.extensions.bits.iter().map(|&b| flag(b == 1)));
        out.push(format!("0x{:04x}", self.ciphersuite_code));
        out.push(flag(self.weak_ciphersuite));
        out
    }
}
