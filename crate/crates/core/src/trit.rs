//! Ternary values, 2-bit packed storage and dense ternary tensors.
//!
//! Packing layout: four trits per byte, little-endian within the byte.
//! Trit `i` occupies bits `[2*(i % 4), 2*(i % 4) + 1]` of byte `i / 4`.
//!
//! | bits | value |
//! |------|-------|
//! | 00   |  0    |
//! | 01   | +1    |
//! | 10   | -1    |
//! | 11   | invalid |
//!
//! Zero maps to all-zero bits, so zero-initialized memory decodes to an
//! all-zero tensor.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TritError {
    #[error("trit index {index} out of range for buffer of {len} trits")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("invalid trit encoding 0b11 at index {index}")]
    InvalidEncoding { index: usize },
    #[error("value {0} is not a trit (expected -1, 0 or +1)")]
    NotATrit(i64),
    #[error("buffer holds {got} bytes, {len} trits need exactly {expected}")]
    ByteLength {
        len: usize,
        expected: usize,
        got: usize,
    },
    #[error("shape {shape:?} has {expected} elements but data holds {got}")]
    ShapeMismatch {
        shape: Vec<usize>,
        expected: usize,
        got: usize,
    },
}

/// A ternary digit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
#[repr(i8)]
pub enum Trit {
    Neg = -1,
    #[default]
    Zero = 0,
    Pos = 1,
}

impl Trit {
    pub const ALL: [Trit; 3] = [Trit::Neg, Trit::Zero, Trit::Pos];

    #[inline]
    pub fn value(self) -> i8 {
        self as i8
    }

    #[inline]
    pub fn is_zero(self) -> bool {
        self == Trit::Zero
    }

    #[inline]
    fn to_bits(self) -> u8 {
        match self {
            Trit::Zero => 0b00,
            Trit::Pos => 0b01,
            Trit::Neg => 0b10,
        }
    }

    #[inline]
    fn from_bits(bits: u8) -> Option<Trit> {
        match bits & 0b11 {
            0b00 => Some(Trit::Zero),
            0b01 => Some(Trit::Pos),
            0b10 => Some(Trit::Neg),
            _ => None,
        }
    }
}

impl std::ops::Neg for Trit {
    type Output = Trit;

    fn neg(self) -> Trit {
        match self {
            Trit::Neg => Trit::Pos,
            Trit::Zero => Trit::Zero,
            Trit::Pos => Trit::Neg,
        }
    }
}

impl TryFrom<i8> for Trit {
    type Error = TritError;

    fn try_from(v: i8) -> Result<Self, Self::Error> {
        match v {
            -1 => Ok(Trit::Neg),
            0 => Ok(Trit::Zero),
            1 => Ok(Trit::Pos),
            other => Err(TritError::NotATrit(other as i64)),
        }
    }
}

impl TryFrom<i32> for Trit {
    type Error = TritError;

    fn try_from(v: i32) -> Result<Self, Self::Error> {
        i8::try_from(v)
            .map_err(|_| TritError::NotATrit(v as i64))
            .and_then(Trit::try_from)
    }
}

impl From<Trit> for i8 {
    fn from(t: Trit) -> i8 {
        t.value()
    }
}

impl fmt::Display for Trit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Trit::Neg => "-1",
            Trit::Zero => "0",
            Trit::Pos => "+1",
        };
        f.write_str(s)
    }
}

/// Number of bytes needed to pack `len` trits.
#[inline]
pub fn packed_len(len: usize) -> usize {
    len.div_ceil(4)
}

/// Trits packed at 2 bits each.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct PackedTritBuffer {
    raw: Vec<u8>,
    len: usize,
}

impl PackedTritBuffer {
    pub fn zeros(len: usize) -> Self {
        Self {
            raw: vec![0; packed_len(len)],
            len,
        }
    }

    pub fn pack(trits: &[Trit]) -> Self {
        let mut raw = vec![0u8; packed_len(trits.len())];
        for (i, t) in trits.iter().enumerate() {
            raw[i / 4] |= t.to_bits() << (2 * (i % 4));
        }
        Self {
            raw,
            len: trits.len(),
        }
    }

    /// Wraps raw bytes without decoding them. Invalid patterns surface on
    /// [`decode`](Self::decode); use [`validate`](Self::validate) to check
    /// the whole buffer up front.
    pub fn from_raw(raw: Vec<u8>, len: usize) -> Result<Self, TritError> {
        let expected = packed_len(len);
        if raw.len() != expected {
            return Err(TritError::ByteLength {
                len,
                expected,
                got: raw.len(),
            });
        }
        Ok(Self { raw, len })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn as_bytes(&self) -> &[u8] {
        &self.raw
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.raw
    }

    pub fn decode(&self, index: usize) -> Result<Trit, TritError> {
        if index >= self.len {
            return Err(TritError::IndexOutOfRange {
                index,
                len: self.len,
            });
        }
        let bits = self.raw[index / 4] >> (2 * (index % 4));
        Trit::from_bits(bits).ok_or(TritError::InvalidEncoding { index })
    }

    pub fn set(&mut self, index: usize, t: Trit) -> Result<(), TritError> {
        if index >= self.len {
            return Err(TritError::IndexOutOfRange {
                index,
                len: self.len,
            });
        }
        let shift = 2 * (index % 4);
        let byte = &mut self.raw[index / 4];
        *byte = (*byte & !(0b11 << shift)) | (t.to_bits() << shift);
        Ok(())
    }

    /// Checks every trit slot (and that padding bits in the tail byte are zero).
    pub fn validate(&self) -> Result<(), TritError> {
        for i in 0..self.len {
            self.decode(i)?;
        }
        if self.len % 4 != 0 {
            let tail = self.raw[self.len / 4] >> (2 * (self.len % 4));
            if tail != 0 {
                return Err(TritError::InvalidEncoding { index: self.len });
            }
        }
        Ok(())
    }

    pub fn unpack(&self) -> Result<Vec<Trit>, TritError> {
        (0..self.len).map(|i| self.decode(i)).collect()
    }
}

/// Free-function form of [`PackedTritBuffer::pack`].
pub fn pack(trits: &[Trit]) -> PackedTritBuffer {
    PackedTritBuffer::pack(trits)
}

/// Free-function form of [`PackedTritBuffer::decode`].
pub fn decode(buf: &PackedTritBuffer, index: usize) -> Result<Trit, TritError> {
    buf.decode(index)
}

/// Dense row-major ternary tensor (last dimension fastest).
///
/// Feature maps are `H x W x C`, sequences `T x C`, weight stacks
/// `K x K x Cin x Cout`. Storage is always a validated packed buffer, so
/// element reads cannot fail.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TernaryTensor {
    shape: Vec<usize>,
    data: PackedTritBuffer,
}

impl TernaryTensor {
    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: PackedTritBuffer::zeros(n),
        }
    }

    pub fn from_trits(shape: &[usize], trits: &[Trit]) -> Result<Self, TritError> {
        let expected: usize = shape.iter().product();
        if expected != trits.len() {
            return Err(TritError::ShapeMismatch {
                shape: shape.to_vec(),
                expected,
                got: trits.len(),
            });
        }
        Ok(Self {
            shape: shape.to_vec(),
            data: PackedTritBuffer::pack(trits),
        })
    }

    pub fn from_i8(shape: &[usize], values: &[i8]) -> Result<Self, TritError> {
        let trits = values
            .iter()
            .map(|&v| Trit::try_from(v))
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_trits(shape, &trits)
    }

    pub fn from_packed(shape: &[usize], data: PackedTritBuffer) -> Result<Self, TritError> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(TritError::ShapeMismatch {
                shape: shape.to_vec(),
                expected,
                got: data.len(),
            });
        }
        data.validate()?;
        Ok(Self {
            shape: shape.to_vec(),
            data,
        })
    }

    #[inline]
    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn packed(&self) -> &PackedTritBuffer {
        &self.data
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        assert_eq!(idx.len(), self.shape.len(), "index rank mismatch");
        idx.iter().zip(&self.shape).fold(0, |acc, (&i, &d)| {
            assert!(i < d, "index {idx:?} out of bounds for shape {:?}", self.shape);
            acc * d + i
        })
    }

    #[inline]
    pub fn get_flat(&self, i: usize) -> Trit {
        // Construction validates every slot.
        self.data.decode(i).expect("validated tensor storage")
    }

    pub fn get(&self, idx: &[usize]) -> Trit {
        self.get_flat(self.flat_index(idx))
    }

    pub fn set(&mut self, idx: &[usize], t: Trit) {
        let i = self.flat_index(idx);
        self.data.set(i, t).expect("index checked");
    }

    pub fn set_flat(&mut self, i: usize, t: Trit) {
        self.data.set(i, t).expect("flat index out of range");
    }

    pub fn to_trits(&self) -> Vec<Trit> {
        (0..self.len()).map(|i| self.get_flat(i)).collect()
    }

    pub fn to_i8(&self) -> Vec<i8> {
        (0..self.len()).map(|i| self.get_flat(i).value()).collect()
    }

    pub fn reshape(&self, shape: &[usize]) -> Result<Self, TritError> {
        let expected: usize = shape.iter().product();
        if expected != self.len() {
            return Err(TritError::ShapeMismatch {
                shape: shape.to_vec(),
                expected,
                got: self.len(),
            });
        }
        Ok(Self {
            shape: shape.to_vec(),
            data: self.data.clone(),
        })
    }

    pub fn map(&self, f: impl Fn(Trit) -> Trit) -> Self {
        let trits: Vec<Trit> = self.to_trits().into_iter().map(f).collect();
        Self::from_trits(&self.shape, &trits).expect("same shape")
    }

    pub fn sparsity(&self) -> SparsityStats {
        sparsity(self)
    }
}

/// Value counts of a ternary tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SparsityStats {
    pub pos_count: u64,
    pub neg_count: u64,
    pub zero_count: u64,
}

impl SparsityStats {
    pub fn total(&self) -> u64 {
        self.pos_count + self.neg_count + self.zero_count
    }

    /// `zero_count / total`; an empty tensor reports 0.
    pub fn zero_fraction(&self) -> f64 {
        match self.total() {
            0 => 0.0,
            n => self.zero_count as f64 / n as f64,
        }
    }
}

pub fn sparsity(t: &TernaryTensor) -> SparsityStats {
    let mut s = SparsityStats {
        pos_count: 0,
        neg_count: 0,
        zero_count: 0,
    };
    for i in 0..t.len() {
        match t.get_flat(i) {
            Trit::Pos => s.pos_count += 1,
            Trit::Neg => s.neg_count += 1,
            Trit::Zero => s.zero_count += 1,
        }
    }
    s
}
