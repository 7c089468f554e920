//! Binary container for [`RcubsMatrix`].
//!
//! ```text
//! "RBGP" | version: u8 | value width: u8 (4 or 8) | K: u32
//! K × ( |U|: u32 | |V|: u32 | d_left: u32 | |U|·d_left neighbor indices: u32 )
//! rows·row_nnz values, row-major
//! FNV-1a 64 checksum of every preceding byte: u64
//! ```
//! All integers and floats are little-endian.

use crate::error::{Error, ParseError, Result};
use crate::graph::BipartiteGraph;
use crate::matrix::{Precision, Scalar};
use crate::product::RbgpChain;

use super::RcubsMatrix;

pub const MAGIC: &[u8; 4] = b"RBGP";
pub const FORMAT_VERSION: u8 = 1;
const HEADER_LEN: usize = 4 + 1 + 1 + 4;
const CHECKSUM_LEN: usize = 8;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

fn precision_tag(p: Precision) -> u8 {
    p.width() as u8
}

fn to_u32(x: usize, what: &str) -> Result<u32> {
    u32::try_from(x).map_err(|_| Error::Capacity(format!("{what} = {x} does not fit in 32 bits")))
}

pub fn serialize<T: Scalar>(m: &RcubsMatrix<T>) -> Result<Vec<u8>> {
    let width = T::PRECISION.width();
    let mut out = Vec::with_capacity(HEADER_LEN + m.nnz() * width + CHECKSUM_LEN);
    out.extend_from_slice(MAGIC);
    out.push(FORMAT_VERSION);
    out.push(precision_tag(T::PRECISION));
    out.extend_from_slice(&to_u32(m.chain().len(), "K")?.to_le_bytes());
    for g in m.chain().graphs() {
        let d_left = g.neighbors(0).len();
        out.extend_from_slice(&to_u32(g.num_left(), "|U|")?.to_le_bytes());
        out.extend_from_slice(&to_u32(g.num_right(), "|V|")?.to_le_bytes());
        out.extend_from_slice(&to_u32(d_left, "d_left")?.to_le_bytes());
        for (_, v) in g.edges() {
            out.extend_from_slice(&(v as u32).to_le_bytes());
        }
    }
    for &v in m.values() {
        v.write_le(&mut out);
    }
    let checksum = fnv1a64(&out);
    out.extend_from_slice(&checksum.to_le_bytes());
    Ok(out)
}

/// Either precision, as read from a file whose precision is not known up front.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyRcubs {
    F32(RcubsMatrix<f32>),
    F64(RcubsMatrix<f64>),
}

impl AnyRcubs {
    pub fn precision(&self) -> Precision {
        match self {
            AnyRcubs::F32(_) => Precision::F32,
            AnyRcubs::F64(_) => Precision::F64,
        }
    }

    pub fn chain(&self) -> &RbgpChain {
        match self {
            AnyRcubs::F32(m) => m.chain(),
            AnyRcubs::F64(m) => m.chain(),
        }
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    offset: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ParseError> {
        let end = self.offset.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.offset..end];
                self.offset = end;
                Ok(s)
            }
            None => Err(ParseError::Truncated {
                offset: self.offset,
                needed: n,
                available: self.bytes.len() - self.offset,
            }),
        }
    }

    fn u32(&mut self) -> Result<usize, ParseError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }
}

struct Header {
    precision: Precision,
    k: usize,
}

fn read_header(bytes: &[u8]) -> Result<Header, ParseError> {
    if bytes.len() < MAGIC.len() {
        if MAGIC.starts_with(bytes) {
            return Err(ParseError::Truncated {
                offset: 0,
                needed: MAGIC.len(),
                available: bytes.len(),
            });
        }
        return Err(ParseError::BadMagic);
    }
    if &bytes[..4] != MAGIC {
        return Err(ParseError::BadMagic);
    }
    let mut c = Cursor { bytes, offset: 4 };
    let version = c.take(1)?[0];
    if version != FORMAT_VERSION {
        return Err(ParseError::UnsupportedVersion(version));
    }
    let precision = match c.take(1)?[0] {
        4 => Precision::F32,
        8 => Precision::F64,
        other => return Err(ParseError::UnknownPrecision(other)),
    };
    let k = c.u32()?;
    Ok(Header { precision, k })
}

/// Walks the factor headers to find where values start and how many there are,
/// without trusting any count enough to allocate from it.
fn scan(body: &[u8], header: &Header) -> Result<(usize, usize), ParseError> {
    let mut c = Cursor {
        bytes: body,
        offset: HEADER_LEN,
    };
    let too_big = || ParseError::Malformed("dimension product overflows".into());
    let mut rows = 1usize;
    let mut row_nnz = 1usize;
    for _ in 0..header.k {
        let u = c.u32()?;
        let _v = c.u32()?;
        let d = c.u32()?;
        let entries = u.checked_mul(d).ok_or_else(too_big)?;
        c.take(entries.checked_mul(4).ok_or_else(too_big)?)?;
        rows = rows.checked_mul(u).ok_or_else(too_big)?;
        row_nnz = row_nnz.checked_mul(d).ok_or_else(too_big)?;
    }
    let values_at = c.offset;
    let n_values = rows.checked_mul(row_nnz).ok_or_else(too_big)?;
    c.take(n_values.checked_mul(header.precision.width()).ok_or_else(too_big)?)?;
    Ok((values_at, c.offset))
}

fn decode<T: Scalar>(body: &[u8], header: &Header, values_at: usize) -> Result<RcubsMatrix<T>> {
    let malformed = |e: Error| Error::Parse(ParseError::Malformed(e.to_string()));
    let mut c = Cursor {
        bytes: body,
        offset: HEADER_LEN,
    };
    let mut graphs = Vec::with_capacity(header.k);
    for _ in 0..header.k {
        let u = c.u32()?;
        let v = c.u32()?;
        let d = c.u32()?;
        let adjacency = (0..u)
            .map(|_| (0..d).map(|_| c.u32()).collect::<Result<Vec<_>, _>>())
            .collect::<Result<Vec<_>, _>>()?;
        graphs.push(BipartiteGraph::new(u, v, adjacency).map_err(malformed)?);
    }
    debug_assert_eq!(c.offset, values_at);
    let width = T::PRECISION.width();
    let values = body[values_at..].chunks_exact(width).map(T::read_le).collect();
    let chain = RbgpChain::from_graphs(graphs).map_err(malformed)?;
    RcubsMatrix::new(chain, values).map_err(malformed)
}

fn parse(bytes: &[u8]) -> Result<(Header, &[u8], usize)> {
    let header = read_header(bytes)?;
    if header.k == 0 {
        return Err(ParseError::Malformed("chain has no factors".into()).into());
    }
    let body = &bytes[..bytes.len().saturating_sub(CHECKSUM_LEN).max(HEADER_LEN.min(bytes.len()))];
    let (values_at, end) = scan(body, &header)?;
    if bytes.len() < end + CHECKSUM_LEN {
        return Err(ParseError::Truncated {
            offset: bytes.len(),
            needed: end + CHECKSUM_LEN - bytes.len(),
            available: 0,
        }
        .into());
    }
    let stored = u64::from_le_bytes(bytes[bytes.len() - CHECKSUM_LEN..].try_into().unwrap());
    let computed = fnv1a64(&bytes[..bytes.len() - CHECKSUM_LEN]);
    if stored != computed {
        return Err(ParseError::Checksum { stored, computed }.into());
    }
    if end != bytes.len() - CHECKSUM_LEN {
        return Err(ParseError::Malformed(format!(
            "{} unexpected bytes before checksum",
            bytes.len() - CHECKSUM_LEN - end
        ))
        .into());
    }
    Ok((header, &bytes[..end], values_at))
}

/// Decodes a stream that must hold values of type `T`.
pub fn deserialize<T: Scalar>(bytes: &[u8]) -> Result<RcubsMatrix<T>> {
    let header = read_header(bytes)?;
    if header.precision != T::PRECISION {
        return Err(ParseError::PrecisionMismatch {
            found: header.precision.name(),
            expected: T::PRECISION.name(),
        }
        .into());
    }
    let (header, body, values_at) = parse(bytes)?;
    decode(body, &header, values_at)
}

pub fn deserialize_any(bytes: &[u8]) -> Result<AnyRcubs> {
    let (header, body, values_at) = parse(bytes)?;
    Ok(match header.precision {
        Precision::F32 => AnyRcubs::F32(decode(body, &header, values_at)?),
        Precision::F64 => AnyRcubs::F64(decode(body, &header, values_at)?),
    })
}
