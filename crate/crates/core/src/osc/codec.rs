use std::fmt;

use thiserror::Error;

#[derive(Clone, Debug, PartialEq)]
pub enum OscArg {
    Int(i32),
    Float(f32),
    Str(String),
    Blob(Vec<u8>),
}

impl OscArg {
    fn tag(&self) -> u8 {
        match self {
            OscArg::Int(_) => b'i',
            OscArg::Float(_) => b'f',
            OscArg::Str(_) => b's',
            OscArg::Blob(_) => b'b',
        }
    }
}

/// A single OSC message. Bundles are not part of the protocol.
#[derive(Clone, Debug, PartialEq)]
pub struct WireMessage {
    pub address: String,
    pub args: Vec<OscArg>,
}

impl WireMessage {
    pub fn new(address: impl Into<String>, args: Vec<OscArg>) -> Self {
        WireMessage { address: address.into(), args }
    }

    pub fn bare(address: impl Into<String>) -> Self {
        Self::new(address, Vec::new())
    }
}

impl fmt::Display for WireMessage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.address)?;
        for arg in &self.args {
            match arg {
                OscArg::Int(v) => write!(f, " {v}")?,
                OscArg::Float(v) => write!(f, " {v}")?,
                OscArg::Str(v) => write!(f, " {v:?}")?,
                OscArg::Blob(v) => write!(f, " <{} bytes>", v.len())?,
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EncodeError {
    #[error("address {0:?} must start with '/' and contain no whitespace or NUL")]
    InvalidAddress(String),
    #[error("string argument {0} contains a NUL byte")]
    NulInString(usize),
    #[error("blob argument {0} is too large")]
    BlobTooLarge(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecodeErrorKind {
    /// Input ended before the structure was complete.
    Truncated,
    /// A padding byte was not zero.
    BadPadding,
    /// Type tag outside the supported `i f s b` set.
    UnsupportedTag(u8),
    /// The type tag string did not start with ','.
    MissingTypeTags,
    InvalidAddress,
    InvalidUtf8,
    NegativeBlobSize,
    TrailingBytes,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("OSC decode error at offset {offset}: {kind:?}")]
pub struct DecodeError {
    pub offset: usize,
    pub kind: DecodeErrorKind,
}

fn padded(len: usize) -> usize {
    (len + 3) & !3
}

fn valid_address(address: &str) -> bool {
    address.starts_with('/') && !address.bytes().any(|b| b == 0 || b.is_ascii_whitespace())
}

fn put_str(out: &mut Vec<u8>, s: &[u8]) {
    out.extend_from_slice(s);
    let end = padded(s.len() + 1);
    out.resize(out.len() + end - s.len(), 0);
}

fn put_blob(out: &mut Vec<u8>, b: &[u8]) {
    out.extend_from_slice(&(b.len() as i32).to_be_bytes());
    out.extend_from_slice(b);
    out.resize(out.len() + padded(b.len()) - b.len(), 0);
}

/// Encodes a message as a canonical OSC 1.0 packet.
pub fn encode(msg: &WireMessage) -> Result<Vec<u8>, EncodeError> {
    if !valid_address(&msg.address) {
        return Err(EncodeError::InvalidAddress(msg.address.clone()));
    }
    let mut out = Vec::with_capacity(64);
    put_str(&mut out, msg.address.as_bytes());
    let mut tags = Vec::with_capacity(msg.args.len() + 1);
    tags.push(b',');
    tags.extend(msg.args.iter().map(OscArg::tag));
    put_str(&mut out, &tags);
    for (i, arg) in msg.args.iter().enumerate() {
        match arg {
            OscArg::Int(v) => out.extend_from_slice(&v.to_be_bytes()),
            OscArg::Float(v) => out.extend_from_slice(&v.to_be_bytes()),
            OscArg::Str(s) => {
                if s.as_bytes().contains(&0) {
                    return Err(EncodeError::NulInString(i));
                }
                put_str(&mut out, s.as_bytes());
            }
            OscArg::Blob(b) => {
                if b.len() > i32::MAX as usize {
                    return Err(EncodeError::BlobTooLarge(i));
                }
                put_blob(&mut out, b);
            }
        }
    }
    Ok(out)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn err(&self, offset: usize, kind: DecodeErrorKind) -> DecodeError {
        DecodeError { offset, kind }
    }

    fn check_padding(&self, from: usize, to: usize) -> Result<(), DecodeError> {
        match self.buf[from..to].iter().position(|&b| b != 0) {
            Some(i) => Err(self.err(from + i, DecodeErrorKind::BadPadding)),
            None => Ok(()),
        }
    }

    /// NUL-terminated, zero-padded string.
    fn string(&mut self) -> Result<&'a [u8], DecodeError> {
        let start = self.pos;
        let nul = self.buf[start..]
            .iter()
            .position(|&b| b == 0)
            .ok_or_else(|| self.err(self.buf.len(), DecodeErrorKind::Truncated))?;
        let end = start + padded(nul + 1);
        if end > self.buf.len() {
            return Err(self.err(self.buf.len(), DecodeErrorKind::Truncated));
        }
        self.check_padding(start + nul + 1, end)?;
        self.pos = end;
        Ok(&self.buf[start..start + nul])
    }

    fn word(&mut self) -> Result<[u8; 4], DecodeError> {
        let end = self.pos + 4;
        let bytes = self
            .buf
            .get(self.pos..end)
            .ok_or_else(|| self.err(self.buf.len(), DecodeErrorKind::Truncated))?;
        self.pos = end;
        Ok(bytes.try_into().expect("slice of four bytes"))
    }

    fn blob(&mut self) -> Result<Vec<u8>, DecodeError> {
        let at = self.pos;
        let size = i32::from_be_bytes(self.word()?);
        let size = usize::try_from(size).map_err(|_| self.err(at, DecodeErrorKind::NegativeBlobSize))?;
        let start = self.pos;
        let end = start
            .checked_add(padded(size))
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| self.err(self.buf.len(), DecodeErrorKind::Truncated))?;
        self.check_padding(start + size, end)?;
        self.pos = end;
        Ok(self.buf[start..start + size].to_vec())
    }
}

fn utf8(bytes: &[u8], offset: usize) -> Result<String, DecodeError> {
    String::from_utf8(bytes.to_vec()).map_err(|_| DecodeError { offset, kind: DecodeErrorKind::InvalidUtf8 })
}

/// Decodes one OSC message. Any address that is well formed decodes;
/// whether it means anything is decided by routing.
pub fn decode(bytes: &[u8]) -> Result<WireMessage, DecodeError> {
    let mut r = Reader { buf: bytes, pos: 0 };
    let address = r.string()?;
    let address = utf8(address, 0)?;
    if !valid_address(&address) {
        return Err(r.err(0, DecodeErrorKind::InvalidAddress));
    }

    let tags_at = r.pos;
    if tags_at >= bytes.len() {
        return Err(r.err(tags_at, DecodeErrorKind::Truncated));
    }
    if bytes[tags_at] != b',' {
        return Err(r.err(tags_at, DecodeErrorKind::MissingTypeTags));
    }
    let tags = r.string()?;

    let mut args = Vec::with_capacity(tags.len() - 1);
    for (i, &tag) in tags.iter().enumerate().skip(1) {
        let at = r.pos;
        let arg = match tag {
            b'i' => OscArg::Int(i32::from_be_bytes(r.word()?)),
            b'f' => OscArg::Float(f32::from_be_bytes(r.word()?)),
            b's' => OscArg::Str(utf8(r.string()?, at)?),
            b'b' => OscArg::Blob(r.blob()?),
            other => return Err(r.err(tags_at + i, DecodeErrorKind::UnsupportedTag(other))),
        };
        args.push(arg);
    }
    if r.pos != bytes.len() {
        return Err(r.err(r.pos, DecodeErrorKind::TrailingBytes));
    }
    Ok(WireMessage { address, args })
}
