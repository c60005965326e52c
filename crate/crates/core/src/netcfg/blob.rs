//! Binary container for packed weights and activations.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! offset  size      field
//! 0       4         magic: "TCNW" (weights) or "TCNA" (activations)
//! 4       2         version = 1
//! 6       2         index (layer index for weights, frame index for activations)
//! 8       1         rank
//! 9       1         reserved, 0
//! 10      4*rank    dims (u32 each)
//! ..      4         threshold pair count (0 for activations and raw layers)
//! ..      8*count   pairs of (lo: i32, hi: i32)
//! ..      8         trit count (u64), must equal the product of dims
//! ..      4         CRC-32 (IEEE) of the payload
//! ..      ceil(n/4) payload, packed trits
//! ```
//!
//! A weights file is the concatenation of the blobs of every layer that has
//! parameters, in layer order. An activation file holds one blob per frame.

use std::path::Path;

use thiserror::Error;

use crate::network::LayerParams;
use crate::oracle::ThresholdPair;
use crate::trit::{packed_len, PackedTritBuffer, TernaryTensor, TritError};

pub const WEIGHTS_MAGIC: [u8; 4] = *b"TCNW";
pub const ACTIVATION_MAGIC: [u8; 4] = *b"TCNA";
pub const BLOB_VERSION: u16 = 1;

#[derive(Debug, Error)]
pub enum BlobError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("blob at byte {offset}: bad magic {found:?}")]
    BadMagic { offset: usize, found: [u8; 4] },
    #[error("blob at byte {offset}: unsupported version {version}")]
    UnsupportedVersion { offset: usize, version: u16 },
    #[error("blob at byte {offset}: truncated")]
    Truncated { offset: usize },
    #[error("blob {index}: checksum mismatch (stored {stored:#010x}, computed {computed:#010x})")]
    ChecksumMismatch {
        index: u16,
        stored: u32,
        computed: u32,
    },
    #[error("blob {index}: {message}")]
    Invalid { index: u16, message: String },
    #[error("blob {index}: {source}")]
    Trits {
        index: u16,
        #[source]
        source: TritError,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlobKind {
    Weights,
    Activation,
}

impl BlobKind {
    fn magic(self) -> [u8; 4] {
        match self {
            BlobKind::Weights => WEIGHTS_MAGIC,
            BlobKind::Activation => ACTIVATION_MAGIC,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightBlob {
    pub kind: BlobKind,
    pub index: u16,
    pub shape: Vec<usize>,
    /// Empty for activations and raw terminal layers.
    pub thresholds: Vec<ThresholdPair>,
    pub payload: PackedTritBuffer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReadOptions {
    /// Reject blobs whose payload CRC does not match. Disabling this is only
    /// useful for fault-injection experiments.
    pub verify_checksum: bool,
}

impl Default for ReadOptions {
    fn default() -> Self {
        Self {
            verify_checksum: true,
        }
    }
}

impl WeightBlob {
    pub fn weights(index: usize, params: &LayerParams) -> Self {
        Self {
            kind: BlobKind::Weights,
            index: index as u16,
            shape: params.weights.shape().to_vec(),
            thresholds: params.thresholds.clone().unwrap_or_default(),
            payload: params.weights.packed().clone(),
        }
    }

    pub fn activation(index: usize, t: &TernaryTensor) -> Self {
        Self {
            kind: BlobKind::Activation,
            index: index as u16,
            shape: t.shape().to_vec(),
            thresholds: Vec::new(),
            payload: t.packed().clone(),
        }
    }

    pub fn tensor(&self) -> Result<TernaryTensor, BlobError> {
        TernaryTensor::from_packed(&self.shape, self.payload.clone()).map_err(|source| {
            BlobError::Trits {
                index: self.index,
                source,
            }
        })
    }

    pub fn encode(&self) -> Vec<u8> {
        let bytes = self.payload.as_bytes();
        let mut out = Vec::with_capacity(32 + 4 * self.shape.len() + 8 * self.thresholds.len() + bytes.len());
        out.extend_from_slice(&self.kind.magic());
        out.extend_from_slice(&BLOB_VERSION.to_le_bytes());
        out.extend_from_slice(&self.index.to_le_bytes());
        out.push(self.shape.len() as u8);
        out.push(0);
        for &d in &self.shape {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        out.extend_from_slice(&(self.thresholds.len() as u32).to_le_bytes());
        for t in &self.thresholds {
            out.extend_from_slice(&t.lo.to_le_bytes());
            out.extend_from_slice(&t.hi.to_le_bytes());
        }
        out.extend_from_slice(&(self.payload.len() as u64).to_le_bytes());
        out.extend_from_slice(&crc32fast::hash(bytes).to_le_bytes());
        out.extend_from_slice(bytes);
        out
    }

    /// Decodes one blob from the start of `buf`; returns it and the number
    /// of bytes consumed. `offset` is only used in diagnostics.
    pub fn decode(buf: &[u8], offset: usize, opts: ReadOptions) -> Result<(Self, usize), BlobError> {
        let mut r = Reader { buf, pos: 0, offset };
        let magic: [u8; 4] = r.take(4)?.try_into().unwrap();
        let kind = match magic {
            WEIGHTS_MAGIC => BlobKind::Weights,
            ACTIVATION_MAGIC => BlobKind::Activation,
            found => return Err(BlobError::BadMagic { offset, found }),
        };
        let version = r.u16()?;
        if version != BLOB_VERSION {
            return Err(BlobError::UnsupportedVersion { offset, version });
        }
        let index = r.u16()?;
        let rank = r.take(2)?[0] as usize;
        let shape = (0..rank)
            .map(|_| r.u32().map(|d| d as usize))
            .collect::<Result<Vec<_>, _>>()?;
        let n_thresh = r.u32()? as usize;
        let mut thresholds = Vec::with_capacity(n_thresh.min(1 << 16));
        for _ in 0..n_thresh {
            let (lo, hi) = (r.u32()? as i32, r.u32()? as i32);
            let t = ThresholdPair::new(lo, hi).map_err(|e| BlobError::Invalid {
                index,
                message: e.to_string(),
            })?;
            thresholds.push(t);
        }
        let n_trits = r.u64()? as usize;
        let stored = r.u32()?;
        let product: usize = shape.iter().product();
        if product != n_trits {
            return Err(BlobError::Invalid {
                index,
                message: format!("shape {shape:?} holds {product} trits but the header says {n_trits}"),
            });
        }
        let payload = r.take(packed_len(n_trits))?.to_vec();
        let computed = crc32fast::hash(&payload);
        if opts.verify_checksum && computed != stored {
            return Err(BlobError::ChecksumMismatch {
                index,
                stored,
                computed,
            });
        }
        let payload = PackedTritBuffer::from_raw(payload, n_trits)
            .and_then(|p| p.validate().map(|_| p))
            .map_err(|source| BlobError::Trits { index, source })?;
        Ok((
            Self {
                kind,
                index,
                shape,
                thresholds,
                payload,
            },
            r.pos,
        ))
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    offset: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], BlobError> {
        let end = self.pos + n;
        if end > self.buf.len() {
            return Err(BlobError::Truncated { offset: self.offset });
        }
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16, BlobError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, BlobError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, BlobError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Decodes a concatenation of blobs.
pub fn decode_all(buf: &[u8], opts: ReadOptions) -> Result<Vec<WeightBlob>, BlobError> {
    let mut out = Vec::new();
    let mut pos = 0;
    while pos < buf.len() {
        let (b, n) = WeightBlob::decode(&buf[pos..], pos, opts)?;
        out.push(b);
        pos += n;
    }
    Ok(out)
}

pub fn encode_all(blobs: &[WeightBlob]) -> Vec<u8> {
    blobs.iter().flat_map(|b| b.encode()).collect()
}

pub fn read_file(path: impl AsRef<Path>, opts: ReadOptions) -> Result<Vec<WeightBlob>, BlobError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| BlobError::Io {
        path: path.display().to_string(),
        source,
    })?;
    decode_all(&bytes, opts)
}

pub fn write_file(path: impl AsRef<Path>, blobs: &[WeightBlob]) -> Result<(), BlobError> {
    let path = path.as_ref();
    std::fs::write(path, encode_all(blobs)).map_err(|source| BlobError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Blobs of all parameterized layers, in layer order.
pub fn params_to_blobs(params: &[Option<LayerParams>]) -> Vec<WeightBlob> {
    params
        .iter()
        .enumerate()
        .filter_map(|(i, p)| p.as_ref().map(|p| WeightBlob::weights(i, p)))
        .collect()
}

/// Rebuilds per-layer parameters from weight blobs; `layers` is the number
/// of layers in the network.
pub fn blobs_to_params(
    blobs: &[WeightBlob],
    layers: usize,
) -> Result<Vec<Option<LayerParams>>, BlobError> {
    let mut out: Vec<Option<LayerParams>> = vec![None; layers];
    for b in blobs {
        if b.kind != BlobKind::Weights {
            return Err(BlobError::Invalid {
                index: b.index,
                message: "activation blob in a weights file".into(),
            });
        }
        let i = b.index as usize;
        if i >= layers || out[i].is_some() {
            return Err(BlobError::Invalid {
                index: b.index,
                message: format!("layer index out of range or repeated ({layers} layers)"),
            });
        }
        out[i] = Some(LayerParams {
            weights: b.tensor()?,
            thresholds: (!b.thresholds.is_empty()).then(|| b.thresholds.clone()),
        });
    }
    Ok(out)
}

pub fn tensors_to_blobs(frames: &[TernaryTensor]) -> Vec<WeightBlob> {
    frames
        .iter()
        .enumerate()
        .map(|(i, t)| WeightBlob::activation(i, t))
        .collect()
}

pub fn blobs_to_tensors(blobs: &[WeightBlob]) -> Result<Vec<TernaryTensor>, BlobError> {
    blobs
        .iter()
        .map(|b| {
            if b.kind != BlobKind::Activation {
                return Err(BlobError::Invalid {
                    index: b.index,
                    message: "weight blob in an activation file".into(),
                });
            }
            b.tensor()
        })
        .collect()
}
