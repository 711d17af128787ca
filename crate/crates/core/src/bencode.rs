//! Bencoded value trees, the payload grammar shared by every BTSync message.
//!
//! Bencoding is self-delimiting, so a value can be decoded out of a larger
//! frame and the caller told how many bytes were consumed. Dictionaries keep
//! their wire order: the protocol's packets are order-sensitive byte
//! templates, and re-encoding a decoded packet must reproduce it bit for bit.

use thiserror::Error;

/// Nesting depth allowed while decoding, a guard against pathological input.
const MAX_DEPTH: usize = 128;

/// Decode failure, carrying the byte offset where parsing gave up.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("unexpected end of input at offset {0}")]
    UnexpectedEof(usize),
    #[error("invalid integer at offset {0}")]
    InvalidInteger(usize),
    #[error("integer does not fit in 64 bits at offset {0}")]
    IntegerOverflow(usize),
    #[error("invalid string length at offset {0}")]
    InvalidLength(usize),
    #[error("invalid value prefix at offset {0}")]
    InvalidPrefix(usize),
    #[error("nesting deeper than {MAX_DEPTH} levels at offset {0}")]
    TooDeep(usize),
    #[error("trailing data after value at offset {0}")]
    TrailingData(usize),
}

/// A bencoded value.
///
/// Dictionary entries are a plain pair list in wire order. Duplicate keys are
/// preserved on decode so anomalous packets survive re-encoding unchanged;
/// [`BValue::dict_get`] returns the first occurrence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BValue {
    ByteString(Vec<u8>),
    Integer(i64),
    List(Vec<BValue>),
    Dictionary(Vec<(Vec<u8>, BValue)>),
}

impl BValue {
    /// Byte-string value from anything byte-like.
    pub fn bytes(b: impl Into<Vec<u8>>) -> Self {
        BValue::ByteString(b.into())
    }

    /// Integer value.
    pub fn int(n: i64) -> Self {
        BValue::Integer(n)
    }

    pub fn as_bytes(&self) -> Option<&[u8]> {
        match self {
            BValue::ByteString(b) => Some(b),
            _ => None,
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            BValue::Integer(n) => Some(*n),
            _ => None,
        }
    }

    pub fn as_list(&self) -> Option<&[BValue]> {
        match self {
            BValue::List(items) => Some(items),
            _ => None,
        }
    }

    pub fn as_dict(&self) -> Option<&[(Vec<u8>, BValue)]> {
        match self {
            BValue::Dictionary(pairs) => Some(pairs),
            _ => None,
        }
    }

    /// First value stored under `key`, if this is a dictionary.
    pub fn dict_get(&self, key: &[u8]) -> Option<&BValue> {
        self.as_dict()?
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v)
    }
}

// --- Encoding ---

/// Encodes a value to its canonical byte form.
pub fn encode(value: &BValue) -> Vec<u8> {
    let mut out = Vec::new();
    encode_into(value, &mut out);
    out
}

/// Appends the encoding of `value` to `out`.
pub fn encode_into(value: &BValue, out: &mut Vec<u8>) {
    match value {
        BValue::ByteString(b) => {
            out.extend_from_slice(b.len().to_string().as_bytes());
            out.push(b':');
            out.extend_from_slice(b);
        }
        BValue::Integer(n) => {
            out.push(b'i');
            out.extend_from_slice(n.to_string().as_bytes());
            out.push(b'e');
        }
        BValue::List(items) => {
            out.push(b'l');
            for item in items {
                encode_into(item, out);
            }
            out.push(b'e');
        }
        BValue::Dictionary(pairs) => {
            out.push(b'd');
            for (key, val) in pairs {
                out.extend_from_slice(key.len().to_string().as_bytes());
                out.push(b':');
                out.extend_from_slice(key);
                encode_into(val, out);
            }
            out.push(b'e');
        }
    }
}

// --- Decoding ---

/// Decodes one value starting at `offset`, returning it with the number of
/// bytes consumed. Bytes after the value are left untouched; callers parsing
/// framed payloads continue from `offset + consumed`.
pub fn decode_at(bytes: &[u8], offset: usize) -> Result<(BValue, usize), Error> {
    let mut dec = Decoder { buf: bytes, pos: offset };
    let value = dec.value(0)?;
    Ok((value, dec.pos - offset))
}

/// Decodes a buffer holding exactly one value.
pub fn decode(bytes: &[u8]) -> Result<BValue, Error> {
    let (value, consumed) = decode_at(bytes, 0)?;
    if consumed < bytes.len() {
        return Err(Error::TrailingData(consumed));
    }
    Ok(value)
}

/// Walks nested dictionaries along `path`. Absent keys and non-dictionary
/// intermediates yield `None`, never an error.
pub fn get_path<'v>(value: &'v BValue, path: &[&[u8]]) -> Option<&'v BValue> {
    let mut current = value;
    for key in path {
        current = current.dict_get(key)?;
    }
    Some(current)
}

struct Decoder<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Decoder<'_> {
    fn peek(&self) -> Option<u8> {
        self.buf.get(self.pos).copied()
    }

    fn value(&mut self, depth: usize) -> Result<BValue, Error> {
        if depth > MAX_DEPTH {
            return Err(Error::TooDeep(self.pos));
        }
        match self.peek().ok_or(Error::UnexpectedEof(self.pos))? {
            b'i' => self.integer(),
            b'l' => self.list(depth),
            b'd' => self.dictionary(depth),
            b'0'..=b'9' => Ok(BValue::ByteString(self.byte_string()?)),
            _ => Err(Error::InvalidPrefix(self.pos)),
        }
    }

    fn integer(&mut self) -> Result<BValue, Error> {
        let start = self.pos;
        self.pos += 1;
        let negative = self.peek() == Some(b'-');
        if negative {
            self.pos += 1;
        }
        let digits_start = self.pos;
        // Accumulate on the negative side so i64::MIN parses without overflow.
        let mut value: i64 = 0;
        while let Some(c @ b'0'..=b'9') = self.peek() {
            value = value
                .checked_mul(10)
                .and_then(|v| v.checked_sub(i64::from(c - b'0')))
                .ok_or(Error::IntegerOverflow(start))?;
            self.pos += 1;
        }
        let digits = self.pos - digits_start;
        match self.peek() {
            Some(b'e') => {}
            Some(_) => return Err(Error::InvalidInteger(start)),
            None => return Err(Error::UnexpectedEof(self.pos)),
        }
        if digits == 0 {
            return Err(Error::InvalidInteger(start));
        }
        // Leading zeros and "-0" are non-canonical and rejected.
        if digits > 1 && self.buf[digits_start] == b'0' {
            return Err(Error::InvalidInteger(start));
        }
        if negative && value == 0 {
            return Err(Error::InvalidInteger(start));
        }
        self.pos += 1;
        let value = if negative {
            value
        } else {
            value.checked_neg().ok_or(Error::IntegerOverflow(start))?
        };
        Ok(BValue::Integer(value))
    }

    fn length(&mut self) -> Result<usize, Error> {
        let start = self.pos;
        let mut value: usize = 0;
        let mut digits = 0usize;
        while let Some(c @ b'0'..=b'9') = self.peek() {
            value = value
                .checked_mul(10)
                .and_then(|v| v.checked_add(usize::from(c - b'0')))
                .ok_or(Error::InvalidLength(start))?;
            self.pos += 1;
            digits += 1;
        }
        if digits == 0 {
            return Err(Error::InvalidLength(start));
        }
        if digits > 1 && self.buf[start] == b'0' {
            return Err(Error::InvalidLength(start));
        }
        match self.peek() {
            Some(b':') => {
                self.pos += 1;
                Ok(value)
            }
            Some(_) => Err(Error::InvalidLength(start)),
            None => Err(Error::UnexpectedEof(self.pos)),
        }
    }

    fn byte_string(&mut self) -> Result<Vec<u8>, Error> {
        let len = self.length()?;
        let end = self
            .pos
            .checked_add(len)
            .filter(|end| *end <= self.buf.len())
            .ok_or(Error::UnexpectedEof(self.buf.len()))?;
        let bytes = self.buf[self.pos..end].to_vec();
        self.pos = end;
        Ok(bytes)
    }

    fn list(&mut self, depth: usize) -> Result<BValue, Error> {
        self.pos += 1;
        let mut items = Vec::new();
        loop {
            match self.peek() {
                None => return Err(Error::UnexpectedEof(self.pos)),
                Some(b'e') => {
                    self.pos += 1;
                    return Ok(BValue::List(items));
                }
                Some(_) => items.push(self.value(depth + 1)?),
            }
        }
    }

    fn dictionary(&mut self, depth: usize) -> Result<BValue, Error> {
        self.pos += 1;
        let mut pairs = Vec::new();
        loop {
            match self.peek() {
                None => return Err(Error::UnexpectedEof(self.pos)),
                Some(b'e') => {
                    self.pos += 1;
                    return Ok(BValue::Dictionary(pairs));
                }
                Some(b'0'..=b'9') => {
                    let key = self.byte_string()?;
                    let val = self.value(depth + 1)?;
                    pairs.push((key, val));
                }
                Some(_) => return Err(Error::InvalidPrefix(self.pos)),
            }
        }
    }
}
