//! Shift-register memory holding the most recent per-frame feature vectors.

use super::AccelError;
use crate::trit::{PackedTritBuffer, TernaryTensor, Trit};

/// Ring of `capacity` feature vectors of `width` trits, stored packed.
///
/// Steps are addressed relative to the oldest retained vector: step 0 is
/// the oldest, step `len() - 1` the newest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TcnMemory {
    capacity: usize,
    width: usize,
    buf: PackedTritBuffer,
    /// Slot of the next write.
    head: usize,
    len: usize,
    pushes: u64,
}

impl TcnMemory {
    pub fn new(capacity: usize, width: usize) -> Self {
        Self {
            capacity,
            width,
            buf: PackedTritBuffer::zeros(capacity * width),
            head: 0,
            len: 0,
            pushes: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Number of retained steps.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Total vectors ever pushed.
    pub fn pushes(&self) -> u64 {
        self.pushes
    }

    pub fn head(&self) -> usize {
        self.head
    }

    /// Size of the backing store in bytes.
    pub fn packed_bytes(&self) -> usize {
        self.buf.as_bytes().len()
    }

    pub fn clear(&mut self) {
        self.buf = PackedTritBuffer::zeros(self.capacity * self.width);
        self.head = 0;
        self.len = 0;
    }

    /// Writes `v` at the head, evicting the oldest step when full. Vectors
    /// narrower than the memory are zero-extended.
    pub fn push(&mut self, v: &[Trit]) -> Result<(), AccelError> {
        if v.len() > self.width {
            return Err(AccelError::VectorTooWide {
                width: v.len(),
                max: self.width,
            });
        }
        let base = self.head * self.width;
        for i in 0..self.width {
            let t = v.get(i).copied().unwrap_or(Trit::Zero);
            self.buf.set(base + i, t).expect("slot within buffer");
        }
        self.head = (self.head + 1) % self.capacity;
        self.len = (self.len + 1).min(self.capacity);
        self.pushes += 1;
        Ok(())
    }

    pub fn push_tensor(&mut self, v: &TernaryTensor) -> Result<(), AccelError> {
        self.push(&v.to_trits())
    }

    fn slot(&self, step: usize) -> usize {
        (self.head + self.capacity - self.len + step) % self.capacity
    }

    /// Reads one retained step.
    pub fn step(&self, step: usize) -> Result<Vec<Trit>, AccelError> {
        if step >= self.len {
            return Err(AccelError::OutOfHistory {
                start: step as isize,
                retained: self.len,
            });
        }
        let base = self.slot(step) * self.width;
        Ok((0..self.width)
            .map(|i| self.buf.decode(base + i).expect("valid slot"))
            .collect())
    }

    /// Steps `start`, `start + 1`, `start + 2`.
    pub fn window(&self, start: usize) -> Result<[Vec<Trit>; 3], AccelError> {
        if start + 3 > self.len {
            return Err(AccelError::OutOfHistory {
                start: start as isize,
                retained: self.len,
            });
        }
        Ok([self.step(start)?, self.step(start + 1)?, self.step(start + 2)?])
    }

    /// Like [`window`](Self::window) but steps before the oldest retained
    /// one (negative indices) read as zero, as causal padding requires.
    /// Reads past the newest step are still errors.
    pub fn window_padded(&self, start: isize) -> Result<[Vec<Trit>; 3], AccelError> {
        if start + 3 > self.len as isize {
            return Err(AccelError::OutOfHistory {
                start,
                retained: self.len,
            });
        }
        let read = |s: isize| -> Result<Vec<Trit>, AccelError> {
            if s < 0 {
                Ok(vec![Trit::Zero; self.width])
            } else {
                self.step(s as usize)
            }
        };
        Ok([read(start)?, read(start + 1)?, read(start + 2)?])
    }
}
