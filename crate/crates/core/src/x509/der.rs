//! Minimal DER reader covering what certificate decoding needs.
//!
//! Definite lengths only, single-byte tags only. Every read is bounds-checked
//! so arbitrary input produces an error rather than a panic.

use chrono::{DateTime, NaiveDate, Utc};

use super::DecodeError;

pub(crate) const TAG_BOOLEAN: u8 = 0x01;
pub(crate) const TAG_INTEGER: u8 = 0x02;
pub(crate) const TAG_BIT_STRING: u8 = 0x03;
pub(crate) const TAG_OCTET_STRING: u8 = 0x04;
pub(crate) const TAG_OID: u8 = 0x06;
pub(crate) const TAG_T61_STRING: u8 = 0x14;
pub(crate) const TAG_UTC_TIME: u8 = 0x17;
pub(crate) const TAG_GENERALIZED_TIME: u8 = 0x18;
pub(crate) const TAG_UNIVERSAL_STRING: u8 = 0x1c;
pub(crate) const TAG_BMP_STRING: u8 = 0x1e;
pub(crate) const TAG_SEQUENCE: u8 = 0x30;
pub(crate) const TAG_SET: u8 = 0x31;

/// One tag-length-value element.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Tlv<'a> {
    pub tag: u8,
    pub value: &'a [u8],
}

impl<'a> Tlv<'a> {
    pub fn reader(&self) -> Reader<'a> {
        Reader::new(self.value)
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

fn malformed(reason: impl Into<String>) -> DecodeError {
    DecodeError::MalformedDer(reason.into())
}

impl<'a> Reader<'a> {
    pub fn new(data: &'a [u8]) -> Self {
        Self { data, pos: 0 }
    }

    pub fn is_empty(&self) -> bool {
        self.pos >= self.data.len()
    }

    pub fn remaining(&self) -> usize {
        self.data.len().saturating_sub(self.pos)
    }

    pub fn peek_tag(&self) -> Option<u8> {
        self.data.get(self.pos).copied()
    }

    pub fn read_any(&mut self) -> Result<Tlv<'a>, DecodeError> {
        let tag = *self.data.get(self.pos).ok_or_else(|| malformed("unexpected end of input"))?;
        if tag & 0x1f == 0x1f {
            return Err(malformed(format!("high tag number form (0x{tag:02x}) not supported")));
        }
        let mut pos = self.pos + 1;
        let first = *self.data.get(pos).ok_or_else(|| malformed("missing length octet"))?;
        pos += 1;
        let len = if first < 0x80 {
            first as usize
        } else if first == 0x80 {
            return Err(malformed("indefinite length is not DER"));
        } else {
            let n = (first & 0x7f) as usize;
            if n > 4 {
                return Err(malformed("length field too large"));
            }
            let bytes = self.data.get(pos..pos + n).ok_or_else(|| malformed("truncated length field"))?;
            pos += n;
            bytes.iter().fold(0usize, |acc, b| (acc << 8) | *b as usize)
        };
        let end = pos.checked_add(len).ok_or_else(|| malformed("length overflow"))?;
        let value = self
            .data
            .get(pos..end)
            .ok_or_else(|| malformed(format!("element 0x{tag:02x} claims {len} bytes past end of input")))?;
        self.pos = end;
        Ok(Tlv { tag, value })
    }

    pub fn read(&mut self, tag: u8) -> Result<Tlv<'a>, DecodeError> {
        match self.peek_tag() {
            Some(t) if t == tag => self.read_any(),
            Some(t) => Err(malformed(format!("expected tag 0x{tag:02x}, found 0x{t:02x}"))),
            None => Err(malformed(format!("expected tag 0x{tag:02x}, found end of input"))),
        }
    }

    pub fn read_optional(&mut self, tag: u8) -> Result<Option<Tlv<'a>>, DecodeError> {
        if self.peek_tag() == Some(tag) {
            self.read_any().map(Some)
        } else {
            Ok(None)
        }
    }
}

pub(crate) fn parse_oid(bytes: &[u8]) -> Result<String, DecodeError> {
    if bytes.is_empty() {
        return Err(malformed("empty OBJECT IDENTIFIER"));
    }
    let mut arcs: Vec<u64> = Vec::new();
    let mut acc: u64 = 0;
    let mut in_arc = false;
    for &b in bytes {
        if acc > (u64::MAX >> 7) {
            return Err(malformed("OBJECT IDENTIFIER arc overflows 64 bits"));
        }
        acc = (acc << 7) | u64::from(b & 0x7f);
        in_arc = true;
        if b & 0x80 == 0 {
            if arcs.is_empty() {
                let (first, second) = match acc {
                    0..=39 => (0, acc),
                    40..=79 => (1, acc - 40),
                    _ => (2, acc - 80),
                };
                arcs.push(first);
                arcs.push(second);
            } else {
                arcs.push(acc);
            }
            acc = 0;
            in_arc = false;
        }
    }
    if in_arc {
        return Err(malformed("truncated OBJECT IDENTIFIER arc"));
    }
    Ok(arcs.iter().map(u64::to_string).collect::<Vec<_>>().join("."))
}

/// Interprets a DER INTEGER as a signed 64-bit value.
pub(crate) fn parse_small_int(bytes: &[u8]) -> Result<i64, DecodeError> {
    if bytes.is_empty() {
        return Err(malformed("empty INTEGER"));
    }
    if bytes.len() > 8 {
        return Err(malformed("INTEGER too large"));
    }
    let mut v: i64 = if bytes[0] & 0x80 != 0 { -1 } else { 0 };
    for &b in bytes {
        v = (v << 8) | i64::from(b);
    }
    Ok(v)
}

pub(crate) fn parse_bool(bytes: &[u8]) -> Result<bool, DecodeError> {
    match bytes {
        [b] => Ok(*b != 0),
        _ => Err(malformed("BOOLEAN must be one octet")),
    }
}

/// Decodes any of the directory string types. Invalid code units are replaced.
pub(crate) fn parse_string(tag: u8, bytes: &[u8]) -> String {
    match tag {
        TAG_BMP_STRING => {
            let units: Vec<u16> =
                bytes.chunks(2).map(|c| if c.len() == 2 { u16::from_be_bytes([c[0], c[1]]) } else { 0xfffd }).collect();
            String::from_utf16_lossy(&units)
        }
        TAG_UNIVERSAL_STRING => bytes
            .chunks(4)
            .map(|c| {
                if c.len() == 4 {
                    char::from_u32(u32::from_be_bytes([c[0], c[1], c[2], c[3]])).unwrap_or('\u{fffd}')
                } else {
                    '\u{fffd}'
                }
            })
            .collect(),
        TAG_T61_STRING => bytes.iter().map(|&b| b as char).collect(),
        _ => String::from_utf8_lossy(bytes).into_owned(),
    }
}

fn digits(s: &[u8], range: std::ops::Range<usize>) -> Result<u32, DecodeError> {
    let part = s.get(range).ok_or_else(|| malformed("time value too short"))?;
    part.iter().try_fold(0u32, |acc, &c| {
        if c.is_ascii_digit() {
            Ok(acc * 10 + u32::from(c - b'0'))
        } else {
            Err(malformed("non-digit in time value"))
        }
    })
}

/// Parses UTCTime (`YYMMDDHHMMSSZ`) or GeneralizedTime (`YYYYMMDDHHMMSS[.f]Z`).
pub(crate) fn parse_time(tlv: &Tlv<'_>) -> Result<DateTime<Utc>, DecodeError> {
    let s = tlv.value;
    let (year, rest) = match tlv.tag {
        TAG_UTC_TIME => {
            let yy = digits(s, 0..2)? as i32;
            (if yy < 50 { 2000 + yy } else { 1900 + yy }, 2)
        }
        TAG_GENERALIZED_TIME => (digits(s, 0..4)? as i32, 4),
        t => return Err(malformed(format!("expected a time, found tag 0x{t:02x}"))),
    };
    let month = digits(s, rest..rest + 2)?;
    let day = digits(s, rest + 2..rest + 4)?;
    let hour = digits(s, rest + 4..rest + 6)?;
    let minute = digits(s, rest + 6..rest + 8)?;
    let second = digits(s, rest + 8..rest + 10)?;
    let mut tail = &s[rest + 10..];
    if tlv.tag == TAG_GENERALIZED_TIME && tail.first() == Some(&b'.') {
        let frac = tail[1..].iter().take_while(|c| c.is_ascii_digit()).count();
        tail = &tail[1 + frac..];
    }
    if tail != b"Z" {
        return Err(malformed("time value must end in Z"));
    }
    NaiveDate::from_ymd_opt(year, month, day)
        .and_then(|d| d.and_hms_opt(hour, minute, second))
        .map(|dt| dt.and_utc())
        .ok_or_else(|| malformed("time value out of range"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oid_round_values() {
        assert_eq!(parse_oid(&[0x55, 0x1d, 0x13]).unwrap(), "2.5.29.19");
        assert_eq!(
            parse_oid(&[0x2b, 0x06, 0x01, 0x04, 0x01, 0x82, 0x37, 0x15, 0x14]).unwrap(),
            "1.3.6.1.4.1.311.21.20"
        );
        assert!(parse_oid(&[0x2b, 0x86]).is_err());
    }

    #[test]
    fn long_form_length() {
        let mut data = vec![0x04, 0x81, 0x80];
        data.extend(std::iter::repeat_n(0xaa, 0x80));
        let mut r = Reader::new(&data);
        let tlv = r.read(TAG_OCTET_STRING).unwrap();
        assert_eq!(tlv.value.len(), 0x80);
        assert!(r.is_empty());
    }

    #[test]
    fn rejects_indefinite_and_overrun() {
        assert!(Reader::new(&[0x30, 0x80, 0x00, 0x00]).read_any().is_err());
        assert!(Reader::new(&[0x30, 0x05, 0x01]).read_any().is_err());
        assert!(Reader::new(&[0x30]).read_any().is_err());
    }

    #[test]
    fn two_digit_years_pivot_at_fifty() {
        let t = Tlv { tag: TAG_UTC_TIME, value: b"491231235959Z" };
        assert_eq!(parse_time(&t).unwrap().to_rfc3339(), "2049-12-31T23:59:59+00:00");
        let t = Tlv { tag: TAG_UTC_TIME, value: b"500101000000Z" };
        assert_eq!(parse_time(&t).unwrap().to_rfc3339(), "1950-01-01T00:00:00+00:00");
        let t = Tlv { tag: TAG_GENERALIZED_TIME, value: b"20250101120000.5Z" };
        assert_eq!(parse_time(&t).unwrap().to_rfc3339(), "2025-01-01T12:00:00+00:00");
        let t = Tlv { tag: TAG_UTC_TIME, value: b"251301000000Z" };
        assert!(parse_time(&t).is_err());
    }

    #[test]
    fn small_ints_are_sign_extended() {
        assert_eq!(parse_small_int(&[0x00, 0xff]).unwrap(), 255);
        assert_eq!(parse_small_int(&[0xff]).unwrap(), -1);
        assert_eq!(parse_small_int(&[0x02]).unwrap(), 2);
    }
}
