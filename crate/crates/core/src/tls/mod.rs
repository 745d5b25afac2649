//! Plaintext TLS handshake inspection over reassembled TCP streams.
//!
//! Only the unencrypted part of the handshake is looked at: the server's
//! chosen ciphersuite and extension list, and the client's SNI.

pub mod build;
mod handshake;
mod reassembly;
mod record;

use serde::{Deserialize, Serialize};

pub use handshake::{client_hello_sni, parse_server_hello, TlsServerInfo, TLS13};
pub use reassembly::{reassemble_streams, Streams};
pub use record::{parse_records, RecordStream, TlsRecord, MAX_RECORD_LEN};

pub mod content_type {
    pub use super::record::{
        CONTENT_ALERT as ALERT, CONTENT_APPLICATION_DATA as APPLICATION_DATA,
        CONTENT_CHANGE_CIPHER_SPEC as CHANGE_CIPHER_SPEC, CONTENT_HANDSHAKE as HANDSHAKE,
    };
}

pub const EXT_SERVER_NAME: u16 = 0x0000;
pub const EXT_EC_POINT_FORMATS: u16 = 0x000b;
pub const EXT_SUPPORTED_VERSIONS: u16 = 0x002b;
pub const EXT_RENEGOTIATION_INFO: u16 = 0xff01;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TlsError {
    #[error("malformed TLS record: {0}")]
    MalformedRecord(String),
    #[error("malformed handshake message: {0}")]
    MalformedHandshake(String),
    #[error("no ServerHello in flow")]
    NoServerHello,
    #[error("invalid extension registry: {0}")]
    InvalidRegistry(String),
}

pub const EXTENSION_VECTOR_LEN: usize = 21;

/// Extension IDs that make up the extension bit-vector; index = position.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtensionRegistry {
    pub version: String,
    ids: Vec<u16>,
}

impl Default for ExtensionRegistry {
    fn default() -> Self {
        Self {
            version: "iana-common-21.v1".into(),
            ids: vec![
                0x0000, 0x0001, 0x0005, 0x000a, 0x000b, 0x000d, 0x000e, 0x000f, 0x0010, 0x0012, 0x0015, 0x0016, 0x0017,
                0x001c, 0x0023, 0x0029, 0x002b, 0x002d, 0x0031, 0x0033, 0xff01,
            ],
        }
    }
}

fn parse_hex_u16(s: &str) -> Option<u16> {
    let digits = s.trim().trim_start_matches("0x").trim_start_matches("0X");
    u16::from_str_radix(digits, 16).ok()
}

impl ExtensionRegistry {
    pub fn new(version: impl Into<String>, ids: Vec<u16>) -> Result<Self, TlsError> {
        if ids.len() != EXTENSION_VECTOR_LEN {
            return Err(TlsError::InvalidRegistry(format!("expected {EXTENSION_VECTOR_LEN} IDs, got {}", ids.len())));
        }
        for (i, id) in ids.iter().enumerate() {
            if ids[..i].contains(id) {
                return Err(TlsError::InvalidRegistry(format!("duplicate ID 0x{id:04x}")));
            }
        }
        Ok(Self { version: version.into(), ids })
    }

    /// Parses the registry file format: a JSON list of 21 hex strings.
    pub fn from_json(text: &str, version: impl Into<String>) -> Result<Self, TlsError> {
        let raw: Vec<String> = serde_json::from_str(text).map_err(|e| TlsError::InvalidRegistry(e.to_string()))?;
        let ids = raw
            .iter()
            .map(|s| parse_hex_u16(s).ok_or_else(|| TlsError::InvalidRegistry(format!("bad hex ID {s:?}"))))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(version, ids)
    }

    pub fn to_json(&self) -> String {
        let list: Vec<String> = self.ids.iter().map(|id| format!("0x{id:04x}")).collect();
        serde_json::to_string(&list).expect("string list serializes")
    }

    pub fn ids(&self) -> &[u16] {
        &self.ids
    }

    pub fn index_of(&self, id: u16) -> Option<usize> {
        self.ids.iter().position(|&x| x == id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtensionVector {
    pub bits: [u8; EXTENSION_VECTOR_LEN],
    pub registry_version: String,
    /// Server extensions not present in the registry.
    pub overflow: usize,
}

impl ExtensionVector {
    pub fn popcount(&self) -> usize {
        self.bits.iter().filter(|&&b| b == 1).count()
    }
}

pub fn extension_vector(info: &TlsServerInfo, registry: &ExtensionRegistry) -> ExtensionVector {
    let mut bits = [0u8; EXTENSION_VECTOR_LEN];
    let mut overflow = 0;
    for &id in &info.server_extensions {
        match registry.index_of(id) {
            Some(i) => bits[i] = 1,
            None => overflow += 1,
        }
    }
    ExtensionVector { bits, registry_version: registry.version.clone(), overflow }
}

/// TLS_RSA_WITH_RC4_128_MD5, TLS_RSA_WITH_RC4_128_SHA.
pub const WEAK_CIPHERSUITES: [u16; 2] = [0x0004, 0x0005];

/// Suites the large majority of malicious servers select: 3DES-EDE-CBC-SHA,
/// RC4-128-MD5, DHE-RSA-AES256-CBC-SHA256 and RC4-128-SHA.
pub const MALWARE_FAVORED_CIPHERSUITES: [u16; 4] = [0x000a, 0x0004, 0x006b, 0x0005];

pub fn is_weak_ciphersuite(code: u16) -> bool {
    WEAK_CIPHERSUITES.contains(&code)
}

pub fn is_malware_favored(code: u16) -> bool {
    MALWARE_FAVORED_CIPHERSUITES.contains(&code)
}

/// Configurable ciphersuite lists; defaults to the constants above.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CipherPolicy {
    pub weak: Vec<u16>,
    pub malware_favored: Vec<u16>,
}

impl Default for CipherPolicy {
    fn default() -> Self {
        Self { weak: WEAK_CIPHERSUITES.to_vec(), malware_favored: MALWARE_FAVORED_CIPHERSUITES.to_vec() }
    }
}

impl CipherPolicy {
    pub fn is_weak(&self, code: u16) -> bool {
        self.weak.contains(&code)
    }
}
