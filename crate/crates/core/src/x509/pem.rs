use base64::engine::general_purpose::STANDARD;
use base64::Engine as _;

use super::DecodeError;

const BEGIN: &str = "-----BEGIN CERTIFICATE-----";
const END: &str = "-----END CERTIFICATE-----";

/// Extracts the DER payload of every `CERTIFICATE` block, in order.
///
/// Text outside the blocks, and PEM blocks of other types, is ignored.
pub fn decode_pem(text: &str) -> Result<Vec<Vec<u8>>, DecodeError> {
    let mut out = Vec::new();
    let mut body: Option<String> = None;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        match body.as_mut() {
            None if line == BEGIN => body = Some(String::new()),
            None => {}
            Some(_) if line == END => {
                let b64 = body.take().unwrap_or_default();
                let der = STANDARD
                    .decode(b64.as_bytes())
                    .map_err(|e| DecodeError::MalformedPem(format!("block ending at line {}: {e}", lineno + 1)))?;
                out.push(der);
            }
            Some(_) if line.starts_with("-----") => {
                return Err(DecodeError::MalformedPem(format!(
                    "unexpected delimiter at line {} inside a certificate block",
                    lineno + 1
                )));
            }
            Some(acc) => acc.extend(line.chars().filter(|c| !c.is_whitespace())),
        }
    }
    if body.is_some() {
        return Err(DecodeError::MalformedPem("unterminated certificate block".into()));
    }
    Ok(out)
}
