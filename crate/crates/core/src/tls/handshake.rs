use serde::{Deserialize, Serialize};

use super::record::{TlsRecord, CONTENT_APPLICATION_DATA, CONTENT_CHANGE_CIPHER_SPEC, CONTENT_HANDSHAKE};
use super::{TlsError, EXT_SERVER_NAME, EXT_SUPPORTED_VERSIONS};

pub const HANDSHAKE_CLIENT_HELLO: u8 = 1;
pub const HANDSHAKE_SERVER_HELLO: u8 = 2;
pub const HANDSHAKE_CERTIFICATE: u8 = 11;

pub const TLS13: u16 = 0x0304;

/// What the server revealed in plaintext during the handshake.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TlsServerInfo {
    pub selected_ciphersuite: u16,
    /// Extension IDs in ServerHello order, without duplicates.
    pub server_extensions: Vec<u16>,
    /// Record-layer version of the record carrying the ServerHello.
    pub tls_version: u16,
    /// Negotiated version (supported_versions if present, else legacy_version).
    pub negotiated_version: u16,
    pub sni: Option<String>,
    pub handshake_complete: bool,
    /// A plaintext Certificate message was seen from the server.
    pub certificate_seen: bool,
}

impl TlsServerInfo {
    pub fn is_tls13(&self) -> bool {
        self.negotiated_version == TLS13
    }

    /// Pre-1.3 abbreviated handshake: completed without sending a certificate.
    pub fn is_resumption(&self) -> bool {
        !self.is_tls13() && self.handshake_complete && !self.certificate_seen
    }
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(data: &'a [u8]) -> Self {
        Self { data, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let out = self.data.get(self.pos..self.pos.checked_add(n)?)?;
        self.pos += n;
        Some(out)
    }

    fn u8(&mut self) -> Option<u8> {
        self.take(1).map(|b| b[0])
    }

    fn u16(&mut self) -> Option<u16> {
        self.take(2).map(|b| u16::from_be_bytes([b[0], b[1]]))
    }

    fn vec8(&mut self) -> Option<&'a [u8]> {
        let n = self.u8()? as usize;
        self.take(n)
    }

    fn vec16(&mut self) -> Option<&'a [u8]> {
        let n = self.u16()? as usize;
        self.take(n)
    }

    fn is_empty(&self) -> bool {
        self.pos >= self.data.len()
    }
}

fn parse_extensions(block: &[u8]) -> Option<Vec<(u16, &[u8])>> {
    let mut c = Cursor::new(block);
    let mut out = Vec::new();
    while !c.is_empty() {
        let id = c.u16()?;
        let data = c.vec16()?;
        out.push((id, data));
    }
    Some(out)
}

struct ServerHello {
    legacy_version: u16,
    ciphersuite: u16,
    extensions: Vec<(u16, Vec<u8>)>,
}

fn parse_server_hello_body(body: &[u8]) -> Option<ServerHello> {
    let mut c = Cursor::new(body);
    let legacy_version = c.u16()?;
    c.take(32)?;
    c.vec8()?;
    let ciphersuite = c.u16()?;
    c.u8()?;
    let extensions = if c.is_empty() {
        Vec::new()
    } else {
        parse_extensions(c.vec16()?)?.into_iter().map(|(id, d)| (id, d.to_vec())).collect()
    };
    Some(ServerHello { legacy_version, ciphersuite, extensions })
}

struct Message {
    msg_type: u8,
    body: Vec<u8>,
    /// Version of the record the message started in.
    record_version: u16,
    /// Index of the record the message ended in.
    record_index: usize,
}

/// Plaintext handshake messages in order, reassembled across records.
/// Stops at the first ChangeCipherSpec.
fn plaintext_messages(records: &[TlsRecord]) -> Vec<Message> {
    let mut buf: Vec<u8> = Vec::new();
    let mut buf_version = 0u16;
    let mut out = Vec::new();
    for (i, rec) in records.iter().enumerate() {
        if rec.content_type == CONTENT_CHANGE_CIPHER_SPEC {
            break;
        }
        if rec.content_type != CONTENT_HANDSHAKE {
            continue;
        }
        if buf.is_empty() {
            buf_version = rec.version;
        }
        buf.extend_from_slice(&rec.fragment);
        while buf.len() >= 4 {
            let len = (usize::from(buf[1]) << 16) | (usize::from(buf[2]) << 8) | usize::from(buf[3]);
            if buf.len() < 4 + len {
                break;
            }
            let body = buf[4..4 + len].to_vec();
            out.push(Message { msg_type: buf[0], body, record_version: buf_version, record_index: i });
            buf.drain(..4 + len);
            buf_version = rec.version;
        }
    }
    out
}

/// Server name from the first ClientHello, if it carries one.
pub fn client_hello_sni(c2s: &[TlsRecord]) -> Option<String> {
    let hello = plaintext_messages(c2s).into_iter().find(|m| m.msg_type == HANDSHAKE_CLIENT_HELLO)?;
    let mut c = Cursor::new(&hello.body);
    c.u16()?;
    c.take(32)?;
    c.vec8()?;
    c.vec16()?;
    c.vec8()?;
    let exts = parse_extensions(c.vec16()?)?;
    let (_, data) = exts.into_iter().find(|(id, _)| *id == EXT_SERVER_NAME)?;
    let mut list = Cursor::new(Cursor::new(data).vec16()?);
    while !list.is_empty() {
        let name_type = list.u8()?;
        let name = list.vec16()?;
        if name_type == 0 {
            return std::str::from_utf8(name).ok().map(str::to_owned);
        }
    }
    None
}

/// Extracts the server's handshake choices from the server-to-client records.
///
/// `handshake_complete` is set when a ChangeCipherSpec or an encrypted record
/// follows the ServerHello.
pub fn parse_server_hello(s2c: &[TlsRecord], c2s: &[TlsRecord]) -> Result<TlsServerInfo, TlsError> {
    let messages = plaintext_messages(s2c);
    let hello_idx =
        messages.iter().position(|m| m.msg_type == HANDSHAKE_SERVER_HELLO).ok_or(TlsError::NoServerHello)?;
    let hello_msg = &messages[hello_idx];
    let hello =
        parse_server_hello_body(&hello_msg.body).ok_or_else(|| TlsError::MalformedHandshake("ServerHello".into()))?;

    let mut server_extensions: Vec<u16> = Vec::new();
    let mut negotiated_version = hello.legacy_version;
    for (id, data) in &hello.extensions {
        if !server_extensions.contains(id) {
            server_extensions.push(*id);
        }
        if *id == EXT_SUPPORTED_VERSIONS && data.len() == 2 {
            negotiated_version = u16::from_be_bytes([data[0], data[1]]);
        }
    }
    let certificate_seen = messages[hello_idx + 1..].iter().any(|m| m.msg_type == HANDSHAKE_CERTIFICATE);
    let handshake_complete = s2c[hello_msg.record_index + 1..]
        .iter()
        .any(|r| r.content_type == CONTENT_CHANGE_CIPHER_SPEC || r.content_type == CONTENT_APPLICATION_DATA);

    Ok(TlsServerInfo {
        selected_ciphersuite: hello.ciphersuite,
        server_extensions,
        tls_version: hello_msg.record_version,
        negotiated_version,
        sni: client_hello_sni(c2s),
        handshake_complete,
        certificate_seen,
    })
}
