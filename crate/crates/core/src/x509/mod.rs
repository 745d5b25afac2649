//! X.509 certificate decoding.
//!
//! The decoder extracts only the fields the traditional validation criteria
//! consume. It is deliberately lenient about extension contents: a malformed
//! KeyUsage or NameConstraints value is kept as raw bytes with a warning so
//! the validator can still score the certificate.

mod der;
mod pem;

use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use der::{Reader, Tlv};
pub use pem::decode_pem;

/// Well-known extension OIDs.
pub mod oid {
    pub const COMMON_NAME: &str = "2.5.4.3";
    pub const SUBJECT_KEY_IDENTIFIER: &str = "2.5.29.14";
    pub const KEY_USAGE: &str = "2.5.29.15";
    pub const SUBJECT_ALT_NAME: &str = "2.5.29.17";
    pub const BASIC_CONSTRAINTS: &str = "2.5.29.19";
    pub const NAME_CONSTRAINTS: &str = "2.5.29.30";
    pub const CERTIFICATE_POLICIES: &str = "2.5.29.32";
    pub const AUTHORITY_KEY_IDENTIFIER: &str = "2.5.29.35";
    pub const EXTENDED_KEY_USAGE: &str = "2.5.29.37";
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DecodeError {
    #[error("malformed PEM: {0}")]
    MalformedPem(String),
    #[error("malformed DER: {0}")]
    MalformedDer(String),
    #[error("unsupported certificate version value {0}")]
    UnsupportedVersion(i64),
}

/// One attribute of a distinguished name, e.g. `2.5.4.3 = www.example.com`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NameAttribute {
    pub oid: String,
    pub value: String,
}

/// Flattened RDN sequence, in encoding order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DistinguishedName(pub Vec<NameAttribute>);

impl DistinguishedName {
    pub fn attributes(&self) -> &[NameAttribute] {
        &self.0
    }

    pub fn get(&self, oid: &str) -> Option<&str> {
        self.0.iter().find(|a| a.oid == oid).map(|a| a.value.as_str())
    }

    /// Attribute-sequence equality after trimming each value.
    pub fn canonical_eq(&self, other: &Self) -> bool {
        self.0.len() == other.0.len()
            && self.0.iter().zip(&other.0).all(|(a, b)| a.oid == b.oid && a.value.trim() == b.value.trim())
    }
}

impl fmt::Display for DistinguishedName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, a) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            let label = match a.oid.as_str() {
                "2.5.4.3" => "CN",
                "2.5.4.6" => "C",
                "2.5.4.7" => "L",
                "2.5.4.8" => "ST",
                "2.5.4.10" => "O",
                "2.5.4.11" => "OU",
                other => other,
            };
            write!(f, "{label}={}", a.value)?;
        }
        Ok(())
    }
}

/// KeyUsage bit positions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum KeyUsageBit {
    DigitalSignature = 0,
    NonRepudiation = 1,
    KeyEncipherment = 2,
    DataEncipherment = 3,
    KeyAgreement = 4,
    KeyCertSign = 5,
    CrlSign = 6,
    EncipherOnly = 7,
    DecipherOnly = 8,
}

impl KeyUsageBit {
    pub const ALL: [KeyUsageBit; 9] = [
        Self::DigitalSignature,
        Self::NonRepudiation,
        Self::KeyEncipherment,
        Self::DataEncipherment,
        Self::KeyAgreement,
        Self::KeyCertSign,
        Self::CrlSign,
        Self::EncipherOnly,
        Self::DecipherOnly,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::DigitalSignature => "digitalSignature",
            Self::NonRepudiation => "nonRepudiation",
            Self::KeyEncipherment => "keyEncipherment",
            Self::DataEncipherment => "dataEncipherment",
            Self::KeyAgreement => "keyAgreement",
            Self::KeyCertSign => "keyCertSign",
            Self::CrlSign => "cRLSign",
            Self::EncipherOnly => "encipherOnly",
            Self::DecipherOnly => "decipherOnly",
        }
    }
}

/// The nine KeyUsage flags packed into the low bits of a `u16`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct KeyUsage(u16);

impl KeyUsage {
    pub fn from_bits(bits: &[KeyUsageBit]) -> Self {
        Self(bits.iter().fold(0, |acc, b| acc | 1 << *b as u8))
    }

    pub fn contains(self, bit: KeyUsageBit) -> bool {
        self.0 & (1 << bit as u8) != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn set_indices(self) -> Vec<u8> {
        (0..9).filter(|i| self.0 & (1 << i) != 0).collect()
    }

    pub fn names(self) -> Vec<&'static str> {
        KeyUsageBit::ALL.iter().filter(|b| self.contains(**b)).map(|b| b.name()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BasicConstraints {
    pub is_ca: bool,
    pub path_len: Option<u32>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NameConstraints {
    /// dNSName bases of the permitted subtrees.
    pub permitted: Vec<String>,
    /// dNSName bases of the excluded subtrees.
    pub excluded: Vec<String>,
    /// Some subtree carried a minimum/maximum BaseDistance.
    pub has_base_distance: bool,
    /// Subtrees whose base was not a dNSName (ignored by the checker).
    pub non_dns_subtrees: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Extension {
    pub oid: String,
    pub critical: bool,
    pub raw_value: Vec<u8>,
    /// The value could not be interpreted even though the OID is known.
    pub parse_warning: bool,
}

/// The decoded fields of one certificate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CertificateView {
    /// 1, 2 or 3.
    pub version: u8,
    pub serial: Vec<u8>,
    pub subject_dn: DistinguishedName,
    pub issuer_dn: DistinguishedName,
    pub not_before: DateTime<Utc>,
    pub not_after: DateTime<Utc>,
    pub subject_cn: Option<String>,
    pub san_dns_names: Vec<String>,
    pub key_usage: Option<KeyUsage>,
    pub basic_constraints: Option<BasicConstraints>,
    pub name_constraints: Option<NameConstraints>,
    pub extensions: Vec<Extension>,
    pub ski: Option<Vec<u8>>,
    pub aki: Option<Vec<u8>>,
    /// Non-fatal problems found while decoding.
    pub warnings: Vec<String>,
    /// SHA-256 of the full DER encoding.
    pub fingerprint: [u8; 32],
}

impl CertificateView {
    pub fn extension(&self, oid: &str) -> Option<&Extension> {
        self.extensions.iter().find(|e| e.oid == oid)
    }

    pub fn fingerprint_hex(&self) -> String {
        self.fingerprint.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Lowercases a DNS name and strips one trailing dot.
pub fn canonical_dns_name(name: &str) -> String {
    let trimmed = name.trim();
    trimmed.strip_suffix('.').unwrap_or(trimmed).to_ascii_lowercase()
}

/// Decodes a PEM bundle or a single raw DER certificate into views, preserving order.
pub fn decode_chain(bytes: &[u8]) -> Result<Vec<CertificateView>, DecodeError> {
    if bytes.first() == Some(&der::TAG_SEQUENCE) {
        return Ok(vec![decode_certificate(bytes)?]);
    }
    let text = std::str::from_utf8(bytes)
        .map_err(|_| DecodeError::MalformedPem("input is neither DER nor UTF-8 text".into()))?;
    decode_pem(text)?.iter().map(|der| decode_certificate(der)).collect()
}

pub fn decode_certificate(der: &[u8]) -> Result<CertificateView, DecodeError> {
    let mut warnings = Vec::new();
    let mut outer = Reader::new(der);
    let cert = outer.read(der::TAG_SEQUENCE)?;
    if !outer.is_empty() {
        warnings.push(format!("{} trailing bytes after certificate", outer.remaining()));
    }
    let mut cert_r = cert.reader();
    let tbs = cert_r.read(der::TAG_SEQUENCE)?;
    cert_r.read(der::TAG_SEQUENCE)?; // signatureAlgorithm
    cert_r.read(der::TAG_BIT_STRING)?; // signatureValue

    let mut r = tbs.reader();
    let version = match r.read_optional(0xa0)? {
        Some(explicit) => {
            let v = der::parse_small_int(explicit.reader().read(der::TAG_INTEGER)?.value)?;
            match v {
                0..=2 => v as u8 + 1,
                other => return Err(DecodeError::UnsupportedVersion(other)),
            }
        }
        None => 1,
    };
    let serial = r.read(der::TAG_INTEGER)?.value.to_vec();
    r.read(der::TAG_SEQUENCE)?; // signature
    let issuer_dn = parse_name(&r.read(der::TAG_SEQUENCE)?)?;
    let mut validity = r.read(der::TAG_SEQUENCE)?.reader();
    let not_before = der::parse_time(&validity.read_any()?)?;
    let not_after = der::parse_time(&validity.read_any()?)?;
    let subject_dn = parse_name(&r.read(der::TAG_SEQUENCE)?)?;
    r.read(der::TAG_SEQUENCE)?; // subjectPublicKeyInfo
    r.read_optional(0x81)?;
    r.read_optional(0xa1)?;
    r.read_optional(0x82)?;
    r.read_optional(0xa2)?;

    let mut extensions: Vec<Extension> = Vec::new();
    if let Some(explicit) = r.read_optional(0xa3)? {
        let mut list = explicit.reader().read(der::TAG_SEQUENCE)?.reader();
        while !list.is_empty() {
            let mut ext = list.read(der::TAG_SEQUENCE)?.reader();
            let oid = der::parse_oid(ext.read(der::TAG_OID)?.value)?;
            let critical = match ext.read_optional(der::TAG_BOOLEAN)? {
                Some(b) => der::parse_bool(b.value)?,
                None => false,
            };
            let raw_value = ext.read(der::TAG_OCTET_STRING)?.value.to_vec();
            if extensions.iter().any(|e| e.oid == oid) {
                warnings.push(format!("duplicate extension {oid} ignored"));
                continue;
            }
            extensions.push(Extension { oid, critical, raw_value, parse_warning: false });
        }
    }
    if !r.is_empty() {
        warnings.push("unparsed trailing fields in tbsCertificate".into());
    }

    let subject_cn = subject_dn.get(oid::COMMON_NAME).map(str::to_owned);
    let mut view = CertificateView {
        version,
        serial,
        subject_dn,
        issuer_dn,
        not_before,
        not_after,
        subject_cn,
        san_dns_names: Vec::new(),
        key_usage: None,
        basic_constraints: None,
        name_constraints: None,
        extensions: Vec::new(),
        ski: None,
        aki: None,
        warnings,
        fingerprint: Sha256::digest(der).into(),
    };

    for mut ext in extensions {
        if let Err(e) = interpret_extension(&mut view, &ext) {
            ext.parse_warning = true;
            view.warnings.push(format!("extension {}: {e}", ext.oid));
        }
        view.extensions.push(ext);
    }
    Ok(view)
}

fn parse_name(seq: &Tlv<'_>) -> Result<DistinguishedName, DecodeError> {
    let mut attrs = Vec::new();
    let mut rdns = seq.reader();
    while !rdns.is_empty() {
        let mut set = rdns.read(der::TAG_SET)?.reader();
        while !set.is_empty() {
            let mut atv = set.read(der::TAG_SEQUENCE)?.reader();
            let oid = der::parse_oid(atv.read(der::TAG_OID)?.value)?;
            let value = atv.read_any()?;
            attrs.push(NameAttribute { oid, value: der::parse_string(value.tag, value.value) });
        }
    }
    Ok(DistinguishedName(attrs))
}

fn interpret_extension(view: &mut CertificateView, ext: &Extension) -> Result<(), DecodeError> {
    let mut r = Reader::new(&ext.raw_value);
    match ext.oid.as_str() {
        oid::KEY_USAGE => {
            let bits = r.read(der::TAG_BIT_STRING)?.value;
            let (&unused, body) =
                bits.split_first().ok_or_else(|| DecodeError::MalformedDer("empty KeyUsage BIT STRING".into()))?;
            if unused > 7 {
                return Err(DecodeError::MalformedDer("KeyUsage unused-bit count above 7".into()));
            }
            let mut ku = 0u16;
            for i in 0..9usize {
                if body.get(i / 8).is_some_and(|b| b & (0x80 >> (i % 8)) != 0) {
                    ku |= 1 << i;
                }
            }
            if ku == 0 {
                view.warnings.push("KeyUsage present with no bits set".into());
            }
            view.key_usage = Some(KeyUsage(ku));
        }
        oid::BASIC_CONSTRAINTS => {
            let mut seq = r.read(der::TAG_SEQUENCE)?.reader();
            let is_ca = match seq.read_optional(der::TAG_BOOLEAN)? {
                Some(b) => der::parse_bool(b.value)?,
                None => false,
            };
            let path_len = match seq.read_optional(der::TAG_INTEGER)? {
                Some(i) => {
                    let v = der::parse_small_int(i.value)?;
                    u32::try_from(v)
                        .map(Some)
                        .map_err(|_| DecodeError::MalformedDer(format!("pathLenConstraint {v} out of range")))?
                }
                None => None,
            };
            if path_len.is_some() && !is_ca {
                view.warnings.push("pathLenConstraint present on a non-CA certificate".into());
            }
            view.basic_constraints = Some(BasicConstraints { is_ca, path_len });
        }
        oid::SUBJECT_ALT_NAME => {
            let mut names = r.read(der::TAG_SEQUENCE)?.reader();
            let mut dns = Vec::new();
            while !names.is_empty() {
                let gn = names.read_any()?;
                if gn.tag == 0x82 {
                    dns.push(String::from_utf8_lossy(gn.value).into_owned());
                }
            }
            view.san_dns_names = dns;
        }
        oid::NAME_CONSTRAINTS => {
            let mut seq = r.read(der::TAG_SEQUENCE)?.reader();
            let mut nc = NameConstraints::default();
            if let Some(permitted) = seq.read_optional(0xa0)? {
                nc.permitted = parse_subtrees(&permitted, &mut nc)?;
            }
            if let Some(excluded) = seq.read_optional(0xa1)? {
                nc.excluded = parse_subtrees(&excluded, &mut nc)?;
            }
            view.name_constraints = Some(nc);
        }
        oid::SUBJECT_KEY_IDENTIFIER => {
            view.ski = Some(r.read(der::TAG_OCTET_STRING)?.value.to_vec());
        }
        oid::AUTHORITY_KEY_IDENTIFIER => {
            let mut seq = r.read(der::TAG_SEQUENCE)?.reader();
            view.aki = seq.read_optional(0x80)?.map(|k| k.value.to_vec());
        }
        _ => return Ok(()),
    }
    Ok(())
}

fn parse_subtrees(list: &Tlv<'_>, nc: &mut NameConstraints) -> Result<Vec<String>, DecodeError> {
    let mut out = Vec::new();
    let mut r = list.reader();
    while !r.is_empty() {
        let mut subtree = r.read(der::TAG_SEQUENCE)?.reader();
        let base = subtree.read_any()?;
        if !subtree.is_empty() {
            nc.has_base_distance = true;
        }
        if base.tag == 0x82 {
            out.push(String::from_utf8_lossy(base.value).into_owned());
        } else {
            nc.non_dns_subtrees += 1;
        }
    }
    Ok(out)
}
