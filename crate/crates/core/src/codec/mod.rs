//! Prefix codes realized from codebooks, and the two on-wire containers.
//!
//! `ESC1` (codebook-set stream):
//!
//! ```text
//! "ESC1" | 0x01 | N: u16 BE | K: u16 BE | L: u32 BE | id: ceil(log2 K) bits | codewords | zero pad
//! ```
//!
//! `ESD1` (self-decodable stream, the code travels with the item):
//!
//! ```text
//! "ESD1" | 0x01 | N: u16 BE | L: u32 BE | N length bytes (0 = absent) | codewords | zero pad
//! ```

mod bits;

use bits::{BitReader, BitWriter};

use crate::error::{Error, Result};
use crate::info::entropy;
use crate::model::{Codebook, CodebookSet, ItemSpec, Spv};

pub const ESC_MAGIC: &[u8; 4] = b"ESC1";
pub const ESD_MAGIC: &[u8; 4] = b"ESD1";
pub const VERSION: u8 = 1;
/// Fixed `ESC1` header size in bytes.
pub const ESC_HEADER_BYTES: usize = 13;
/// Longest supported codeword.
pub const MAX_CODEWORD_BITS: u32 = 64;

/// Codeword length of every symbol; `None` marks a symbol that cannot be coded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LengthTable {
    pub lengths: Vec<Option<u32>>,
}

impl LengthTable {
    /// `sum 2^-l` over coded symbols.
    pub fn kraft_sum(&self) -> f64 {
        self.lengths
            .iter()
            .flatten()
            .map(|&l| 2f64.powi(-(l as i32)))
            .sum()
    }
}

/// `ceil(-log2 q_n)` (at least 1) for every `q_n > 0`. Since `2^-l <= q_n`, the
/// lengths satisfy Kraft whenever the codebook does.
pub fn lengths_from_codebook(q: &Codebook) -> LengthTable {
    let lengths = q
        .q()
        .iter()
        .map(|&qn| {
            if qn > 0.0 {
                let mut l = (-qn.log2()).ceil().max(1.0) as i64;
                // log2 may round a hair low; make sure 2^-l really is <= q_n.
                while 2f64.powi(-(l as i32)) > qn {
                    l += 1;
                }
                Some(l.min(u32::MAX as i64) as u32)
            } else {
                None
            }
        })
        .collect();
    LengthTable { lengths }
}

/// Canonical prefix code: symbols ordered by `(length, index)` receive
/// consecutive codewords.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrefixCode {
    lengths: Vec<Option<u32>>,
    codes: Vec<Option<u64>>,
    /// Symbols in canonical order.
    order: Vec<usize>,
    /// Per length: first codeword, number of codewords, index into `order`.
    first: Vec<u64>,
    count: Vec<usize>,
    offset: Vec<usize>,
    max_len: u32,
}

impl PrefixCode {
    pub fn codeword(&self, symbol: usize) -> Option<(u64, u32)> {
        Some((self.codes.get(symbol).copied()??, self.lengths[symbol]?))
    }

    /// Codewords as bit strings (`None` for absent symbols).
    pub fn codeword_strings(&self) -> Vec<Option<String>> {
        (0..self.codes.len())
            .map(|s| {
                self.codeword(s).map(|(c, l)| {
                    if l == 0 {
                        String::new()
                    } else {
                        format!("{c:0w$b}", w = l as usize)
                    }
                })
            })
            .collect()
    }

    pub fn lengths(&self) -> &[Option<u32>] {
        &self.lengths
    }

    fn decode_symbol(&self, r: &mut BitReader<'_>) -> Result<usize> {
        let mut code = 0u64;
        for len in 1..=self.max_len {
            code = (code << 1) | r.bit()? as u64;
            let l = len as usize;
            if self.count[l] > 0
                && code >= self.first[l]
                && ((code - self.first[l]) as usize) < self.count[l]
            {
                return Ok(self.order[self.offset[l] + (code - self.first[l]) as usize]);
            }
        }
        Err(Error::InvalidCodeword)
    }
}

pub fn build_prefix_code(table: &LengthTable) -> Result<PrefixCode> {
    let mut kraft: u128 = 0;
    for &l in table.lengths.iter().flatten() {
        if l == 0 {
            return Err(Error::InvalidArgument(
                "codeword lengths must be positive".into(),
            ));
        }
        if l > MAX_CODEWORD_BITS {
            return Err(Error::CodewordTooLong(l));
        }
        kraft += 1u128 << (MAX_CODEWORD_BITS - l);
    }
    if kraft > 1u128 << MAX_CODEWORD_BITS {
        return Err(Error::KraftViolation {
            sum: table.kraft_sum(),
        });
    }
    let mut order: Vec<usize> = (0..table.lengths.len())
        .filter(|&s| table.lengths[s].is_some())
        .collect();
    order.sort_by_key(|&s| (table.lengths[s], s));
    let max_len = order.last().and_then(|&s| table.lengths[s]).unwrap_or(0);
    let slots = max_len as usize + 1;
    let (mut first, mut count, mut offset) =
        (vec![0u64; slots], vec![0usize; slots], vec![0usize; slots]);
    let mut codes = vec![None; table.lengths.len()];
    let mut code: u128 = 0;
    let mut prev = 0u32;
    for (i, &s) in order.iter().enumerate() {
        let l = table.lengths[s].expect("filtered");
        if i > 0 {
            code += 1;
        }
        code <<= l - prev;
        prev = l;
        if count[l as usize] == 0 {
            first[l as usize] = code as u64;
            offset[l as usize] = i;
        }
        count[l as usize] += 1;
        codes[s] = Some(code as u64);
    }
    Ok(PrefixCode {
        lengths: table.lengths.clone(),
        codes,
        order,
        first,
        count,
        offset,
        max_len,
    })
}

/// Prefix code of codebook `q`.
pub fn code_for(q: &Codebook) -> Result<PrefixCode> {
    build_prefix_code(&lengths_from_codebook(q))
}

fn id_bits(k: usize) -> u32 {
    if k <= 1 {
        0
    } else {
        usize::BITS - (k - 1).leading_zeros()
    }
}

/// Payload bits of `item` under `code`, or `None` if a symbol is uncoded.
pub fn payload_bits(item: &ItemSpec, code: &PrefixCode) -> Option<u64> {
    item.symbols()
        .iter()
        .map(|&s| code.lengths.get(s).copied().flatten().map(u64::from))
        .sum()
}

/// An encoded item.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Encoded {
    pub bytes: Vec<u8>,
    pub codebook: usize,
    pub payload_bits: u64,
}

/// Encodes `item` with the codebook of `set` giving the shortest payload
/// (ties to the lowest index).
pub fn encode(item: &ItemSpec, set: &CodebookSet) -> Result<Encoded> {
    if item.n() != set.n() {
        return Err(Error::DimensionMismatch {
            expected: set.n(),
            actual: item.n(),
        });
    }
    let n = u16::try_from(set.n())
        .map_err(|_| Error::InvalidArgument("alphabet too large for the header".into()))?;
    let k = u16::try_from(set.k())
        .map_err(|_| Error::InvalidArgument("too many codebooks for the header".into()))?;
    let l = u32::try_from(item.len())
        .map_err(|_| Error::InvalidArgument("item too long for the header".into()))?;
    let mut best: Option<(usize, u64, PrefixCode)> = None;
    for (idx, q) in set.codebooks().iter().enumerate() {
        let Ok(code) = code_for(q) else { continue };
        if let Some(bits) = payload_bits(item, &code) {
            if best.as_ref().is_none_or(|(_, b, _)| bits < *b) {
                best = Some((idx, bits, code));
            }
        }
    }
    let (codebook, payload, code) = best.ok_or(Error::Unencodable)?;
    let mut header = Vec::with_capacity(ESC_HEADER_BYTES + (payload as usize).div_ceil(8) + 1);
    header.extend_from_slice(ESC_MAGIC);
    header.push(VERSION);
    header.extend_from_slice(&n.to_be_bytes());
    header.extend_from_slice(&k.to_be_bytes());
    header.extend_from_slice(&l.to_be_bytes());
    let mut w = BitWriter::new(header);
    w.write(codebook as u64, id_bits(set.k()));
    for &s in item.symbols() {
        let (c, len) = code.codeword(s).expect("checked encodable");
        w.write(c, len);
    }
    Ok(Encoded {
        bytes: w.finish(),
        codebook,
        payload_bits: payload,
    })
}

fn check_magic(bytes: &[u8], magic: &[u8; 4], header: usize) -> Result<()> {
    if bytes.len() < 4 || &bytes[..4] != magic {
        return Err(if bytes.len() < 4 && magic.starts_with(bytes) {
            Error::TruncatedStream
        } else {
            Error::BadMagic
        });
    }
    if bytes.len() < 5 {
        return Err(Error::TruncatedStream);
    }
    if bytes[4] != VERSION {
        return Err(Error::UnsupportedVersion(bytes[4]));
    }
    if bytes.len() < header {
        return Err(Error::TruncatedStream);
    }
    Ok(())
}

/// Inverse of [`encode`] given the same codebook set.
pub fn decode(bytes: &[u8], set: &CodebookSet) -> Result<ItemSpec> {
    check_magic(bytes, ESC_MAGIC, ESC_HEADER_BYTES)?;
    let n = u16::from_be_bytes([bytes[5], bytes[6]]) as usize;
    let k = u16::from_be_bytes([bytes[7], bytes[8]]) as usize;
    let l = u32::from_be_bytes([bytes[9], bytes[10], bytes[11], bytes[12]]) as usize;
    if n != set.n() {
        return Err(Error::DimensionMismatch {
            expected: set.n(),
            actual: n,
        });
    }
    if k != set.k() {
        return Err(Error::DimensionMismatch {
            expected: set.k(),
            actual: k,
        });
    }
    let mut r = BitReader::new(&bytes[ESC_HEADER_BYTES..]);
    let id = r.read(id_bits(k))? as usize;
    if id >= k {
        return Err(Error::InvalidCodeword);
    }
    let code = code_for(set.get(id)).map_err(|_| Error::InvalidCodeword)?;
    let symbols = (0..l)
        .map(|_| code.decode_symbol(&mut r))
        .collect::<Result<Vec<_>>>()?;
    ItemSpec::new(symbols, n)
}

/// Encodes `item` with the code derived from its own SPV and ships the
/// codeword lengths in the header.
pub fn encode_self_decodable(item: &ItemSpec, p: &Spv) -> Result<Vec<u8>> {
    if item.n() != p.len() {
        return Err(Error::DimensionMismatch {
            expected: p.len(),
            actual: item.n(),
        });
    }
    let n = u16::try_from(p.len())
        .map_err(|_| Error::InvalidArgument("alphabet too large for the header".into()))?;
    let l = u32::try_from(item.len())
        .map_err(|_| Error::InvalidArgument("item too long for the header".into()))?;
    let code = code_for(&Codebook::from(p))?;
    let mut header = Vec::new();
    header.extend_from_slice(ESD_MAGIC);
    header.push(VERSION);
    header.extend_from_slice(&n.to_be_bytes());
    header.extend_from_slice(&l.to_be_bytes());
    for len in code.lengths() {
        header.push(len.map(|v| v as u8).unwrap_or(0));
    }
    let mut w = BitWriter::new(header);
    for &s in item.symbols() {
        let (c, len) = code.codeword(s).ok_or(Error::ZeroProbabilitySymbol(s))?;
        w.write(c, len);
    }
    Ok(w.finish())
}

pub fn decode_self_decodable(bytes: &[u8]) -> Result<ItemSpec> {
    check_magic(bytes, ESD_MAGIC, 11)?;
    let n = u16::from_be_bytes([bytes[5], bytes[6]]) as usize;
    let l = u32::from_be_bytes([bytes[7], bytes[8], bytes[9], bytes[10]]) as usize;
    if bytes.len() < 11 + n {
        return Err(Error::TruncatedStream);
    }
    let lengths = bytes[11..11 + n]
        .iter()
        .map(|&b| (b > 0).then_some(b as u32))
        .collect();
    let code = build_prefix_code(&LengthTable { lengths })?;
    let mut r = BitReader::new(&bytes[11 + n..]);
    let symbols = (0..l)
        .map(|_| code.decode_symbol(&mut r))
        .collect::<Result<Vec<_>>>()?;
    ItemSpec::new(symbols, n)
}

/// Real-valued self-decodable cost: `L H(p) + sum_n (-log2 p_n)` (payload plus
/// the description of the item's own code).
pub fn self_decodable_bits(p: &Spv, len: usize) -> Result<f64> {
    if let Some(n) = p.probs().iter().position(|&v| v == 0.0) {
        return Err(Error::ZeroProbabilitySymbol(n));
    }
    let overhead: f64 = p.probs().iter().map(|v| -v.log2()).sum();
    Ok(len as f64 * entropy(p) + overhead)
}

/// [`self_decodable_bits`] with integer codeword lengths `ceil(-log2 p_n)`:
/// `L sum_n p_n l_n + sum_n l_n`.
pub fn self_decodable_bits_int(p: &Spv, len: usize) -> Result<f64> {
    if let Some(n) = p.probs().iter().position(|&v| v == 0.0) {
        return Err(Error::ZeroProbabilitySymbol(n));
    }
    let table = lengths_from_codebook(&Codebook::from(p));
    let ls: Vec<f64> = table
        .lengths
        .iter()
        .map(|l| l.expect("positive probabilities") as f64)
        .collect();
    let payload: f64 = p.probs().iter().zip(&ls).map(|(pv, l)| pv * l).sum();
    Ok(len as f64 * payload + ls.iter().sum::<f64>())
}
