use super::TlsError;

pub const CONTENT_CHANGE_CIPHER_SPEC: u8 = 20;
pub const CONTENT_ALERT: u8 = 21;
pub const CONTENT_HANDSHAKE: u8 = 22;
pub const CONTENT_APPLICATION_DATA: u8 = 23;
pub const CONTENT_HEARTBEAT: u8 = 24;

/// Largest legal record body: 2^14 plus the ciphertext expansion allowance.
pub const MAX_RECORD_LEN: usize = (1 << 14) + 2048;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TlsRecord {
    pub content_type: u8,
    pub version: u16,
    pub fragment: Vec<u8>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RecordStream {
    pub records: Vec<TlsRecord>,
    /// The stream ended inside a record; the partial record was dropped.
    pub truncated: bool,
}

/// Splits a byte stream on TLS record headers.
pub fn parse_records(stream: &[u8]) -> Result<RecordStream, TlsError> {
    let mut out = RecordStream::default();
    let mut pos = 0;
    while pos < stream.len() {
        let Some(header) = stream.get(pos..pos + 5) else {
            out.truncated = true;
            break;
        };
        let content_type = header[0];
        if !(CONTENT_CHANGE_CIPHER_SPEC..=CONTENT_HEARTBEAT).contains(&content_type) {
            return Err(TlsError::MalformedRecord(format!("content type {content_type} at offset {pos}")));
        }
        let version = u16::from_be_bytes([header[1], header[2]]);
        let len = usize::from(u16::from_be_bytes([header[3], header[4]]));
        if len > MAX_RECORD_LEN {
            return Err(TlsError::MalformedRecord(format!("record length {len} exceeds {MAX_RECORD_LEN}")));
        }
        let Some(fragment) = stream.get(pos + 5..pos + 5 + len) else {
            out.truncated = true;
            break;
        };
        out.records.push(TlsRecord { content_type, version, fragment: fragment.to_vec() });
        pos += 5 + len;
    }
    Ok(out)
}
