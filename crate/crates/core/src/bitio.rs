//! MSB-first bit packing and exponential-Golomb codes, shared by the
//! residual entropy stage and motion-vector payloads.

use crate::error::{Error, Result};

#[derive(Default)]
pub struct BitWriter {
    bytes: Vec<u8>,
    acc: u8,
    nbits: u8,
}

impl BitWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn write_bit(&mut self, bit: bool) {
        self.acc = (self.acc << 1) | bit as u8;
        self.nbits += 1;
        if self.nbits == 8 {
            self.bytes.push(self.acc);
            self.acc = 0;
            self.nbits = 0;
        }
    }

    /// Writes the low `n` bits of `v`, most significant first. n <= 64.
    pub fn write_bits(&mut self, v: u64, n: u32) {
        for i in (0..n).rev() {
            self.write_bit((v >> i) & 1 == 1);
        }
    }

    /// Unsigned exponential-Golomb.
    pub fn write_ue(&mut self, v: u64) {
        let x = v + 1;
        let len = 64 - x.leading_zeros();
        self.write_bits(0, len - 1);
        self.write_bits(x, len);
    }

    /// Signed exponential-Golomb: 0, 1, -1, 2, -2, ... -> 0, 1, 2, 3, 4, ...
    pub fn write_se(&mut self, v: i64) {
        let code = if v > 0 {
            (v as u64) * 2 - 1
        } else {
            (-v as u64) * 2
        };
        self.write_ue(code);
    }

    /// Pads the final partial byte with zero bits and returns the buffer.
    pub fn finish(mut self) -> Vec<u8> {
        if self.nbits > 0 {
            self.acc <<= 8 - self.nbits;
            self.bytes.push(self.acc);
        }
        self.bytes
    }
}

pub struct BitReader<'a> {
    bytes: &'a [u8],
    pos: usize, // bit position
}

impl<'a> BitReader<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        BitReader { bytes, pos: 0 }
    }

    pub fn read_bit(&mut self) -> Result<bool> {
        let byte = self.pos / 8;
        if byte >= self.bytes.len() {
            return Err(Error::Decode("bit stream exhausted".into()));
        }
        let bit = (self.bytes[byte] >> (7 - (self.pos % 8))) & 1;
        self.pos += 1;
        Ok(bit == 1)
    }

    pub fn read_bits(&mut self, n: u32) -> Result<u64> {
        let mut v = 0u64;
        for _ in 0..n {
            v = (v << 1) | self.read_bit()? as u64;
        }
        Ok(v)
    }

    pub fn read_ue(&mut self) -> Result<u64> {
        let mut zeros = 0u32;
        while !self.read_bit()? {
            zeros += 1;
            if zeros > 63 {
                return Err(Error::Decode("malformed exp-Golomb code".into()));
            }
        }
        let rest = self.read_bits(zeros)?;
        Ok((1u64 << zeros) + rest - 1)
    }

    pub fn read_se(&mut self) -> Result<i64> {
        let code = self.read_ue()?;
        if code % 2 == 1 {
            Ok(((code + 1) / 2) as i64)
        } else {
            Ok(-((code / 2) as i64))
        }
    }
}
