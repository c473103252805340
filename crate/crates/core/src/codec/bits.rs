use crate::error::{Error, Result};

/// MSB-first bit packer.
#[derive(Debug, Default)]
pub(crate) struct BitWriter {
    bytes: Vec<u8>,
    cur: u8,
    used: u32,
}

impl BitWriter {
    pub fn new(bytes: Vec<u8>) -> Self {
        BitWriter {
            bytes,
            cur: 0,
            used: 0,
        }
    }

    /// Writes the low `len` bits of `value`, most significant first.
    pub fn write(&mut self, value: u64, len: u32) {
        for i in (0..len).rev() {
            self.cur = (self.cur << 1) | ((value >> i) & 1) as u8;
            self.used += 1;
            if self.used == 8 {
                self.bytes.push(self.cur);
                self.cur = 0;
                self.used = 0;
            }
        }
    }

    /// Zero-pads to a byte boundary.
    pub fn finish(mut self) -> Vec<u8> {
        if self.used > 0 {
            self.bytes.push(self.cur << (8 - self.used));
        }
        self.bytes
    }
}

pub(crate) struct BitReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> BitReader<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        BitReader { bytes, pos: 0 }
    }

    pub fn bit(&mut self) -> Result<bool> {
        let byte = self.bytes.get(self.pos / 8).ok_or(Error::TruncatedStream)?;
        let b = (byte >> (7 - self.pos % 8)) & 1 == 1;
        self.pos += 1;
        Ok(b)
    }

    pub fn read(&mut self, len: u32) -> Result<u64> {
        let mut v = 0u64;
        for _ in 0..len {
            v = (v << 1) | self.bit()? as u64;
        }
        Ok(v)
    }
}
