//! Encoders for plaintext handshake messages, used by the synthetic corpus
//! generator and by tests.

use super::handshake::{HANDSHAKE_CLIENT_HELLO, HANDSHAKE_SERVER_HELLO};
use super::EXT_SERVER_NAME;

pub fn encode_record(content_type: u8, version: u16, fragment: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(5 + fragment.len());
    out.push(content_type);
    out.extend_from_slice(&version.to_be_bytes());
    out.extend_from_slice(&(fragment.len() as u16).to_be_bytes());
    out.extend_from_slice(fragment);
    out
}

pub fn handshake_message(msg_type: u8, body: &[u8]) -> Vec<u8> {
    let len = body.len() as u32;
    let mut out = vec![msg_type, (len >> 16) as u8, (len >> 8) as u8, len as u8];
    out.extend_from_slice(body);
    out
}

fn extensions_block(extensions: &[(u16, Vec<u8>)]) -> Vec<u8> {
    let mut body = Vec::new();
    for (id, data) in extensions {
        body.extend_from_slice(&id.to_be_bytes());
        body.extend_from_slice(&(data.len() as u16).to_be_bytes());
        body.extend_from_slice(data);
    }
    let mut out = (body.len() as u16).to_be_bytes().to_vec();
    out.extend(body);
    out
}

/// ServerHello handshake message (header included). An empty extension list
/// omits the extensions block entirely, as pre-extension servers do.
pub fn server_hello(version: u16, ciphersuite: u16, extensions: &[(u16, Vec<u8>)]) -> Vec<u8> {
    let mut body = version.to_be_bytes().to_vec();
    body.extend((0u8..32).map(|i| i.wrapping_mul(7)));
    body.push(32);
    body.extend([0x5a; 32]);
    body.extend_from_slice(&ciphersuite.to_be_bytes());
    body.push(0);
    if !extensions.is_empty() {
        body.extend(extensions_block(extensions));
    }
    handshake_message(HANDSHAKE_SERVER_HELLO, &body)
}

pub fn server_name_extension(host: &str) -> Vec<u8> {
    let name = host.as_bytes();
    let mut entry = vec![0u8];
    entry.extend_from_slice(&(name.len() as u16).to_be_bytes());
    entry.extend_from_slice(name);
    let mut out = (entry.len() as u16).to_be_bytes().to_vec();
    out.extend(entry);
    out
}

/// ClientHello handshake message offering `ciphersuites`, with SNI when given.
pub fn client_hello(sni: Option<&str>, ciphersuites: &[u16], extensions: &[(u16, Vec<u8>)]) -> Vec<u8> {
    let mut body = 0x0303u16.to_be_bytes().to_vec();
    body.extend([0x11; 32]);
    body.push(0);
    body.extend_from_slice(&((ciphersuites.len() * 2) as u16).to_be_bytes());
    for cs in ciphersuites {
        body.extend_from_slice(&cs.to_be_bytes());
    }
    body.extend_from_slice(&[1, 0]);
    let mut exts = Vec::new();
    if let Some(host) = sni {
        exts.push((EXT_SERVER_NAME, server_name_extension(host)));
    }
    exts.extend(extensions.iter().cloned());
    body.extend(extensions_block(&exts));
    handshake_message(HANDSHAKE_CLIENT_HELLO, &body)
}
