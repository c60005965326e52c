//! Output channel units: one per output channel, each holding the weights of
//! its channel and computing a whole window per cycle.

use crate::oracle::ThresholdPair;
use crate::trit::Trit;

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct OcuState {
    /// Weights of this output channel in window order.
    pub weight_buffer: Vec<i8>,
    pub thresholds: Option<ThresholdPair>,
    pub gated: bool,
}

impl OcuState {
    /// Dot product of one window with the resident weights. Returns the
    /// accumulator and the number of operand pairs that were both nonzero.
    #[inline]
    pub fn mac(&self, window: &[i8]) -> (i32, u64) {
        debug_assert_eq!(window.len(), self.weight_buffer.len());
        let mut acc = 0i32;
        let mut toggles = 0u32;
        for (&a, &w) in window.iter().zip(&self.weight_buffer) {
            let p = (a * w) as i32;
            acc += p;
            toggles += (p != 0) as u32;
        }
        (acc, toggles as u64)
    }

    /// Partial dot product against `weight_buffer[offset..]`, used by the
    /// fc schedule which feeds one input position per cycle.
    #[inline]
    pub fn mac_slice(&self, x: &[i8], offset: usize) -> (i32, u64) {
        let w = &self.weight_buffer[offset..offset + x.len()];
        let mut acc = 0i32;
        let mut toggles = 0u32;
        for (&a, &b) in x.iter().zip(w) {
            let p = (a * b) as i32;
            acc += p;
            toggles += (p != 0) as u32;
        }
        (acc, toggles as u64)
    }

    /// Threshold unit. Gated units always emit zero.
    pub fn activate(&self, acc: i32) -> Trit {
        if self.gated {
            return Trit::Zero;
        }
        self.thresholds.map(|t| t.apply(acc)).unwrap_or(Trit::Zero)
    }
}

/// The array of output channel units.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OcuArray {
    pub units: Vec<OcuState>,
}

impl OcuArray {
    pub fn new(n: usize) -> Self {
        Self {
            units: vec![OcuState::default(); n],
        }
    }

    /// Gates units `[active..)`; returns the gating mask (true = gated).
    pub fn apply_clock_gating(&mut self, active: usize) -> Vec<bool> {
        for (i, u) in self.units.iter_mut().enumerate() {
            u.gated = i >= active;
        }
        self.units.iter().map(|u| u.gated).collect()
    }

    pub fn active(&self) -> usize {
        self.units.iter().filter(|u| !u.gated).count()
    }

    /// Distributes a `[..., Cout]` weight tensor across the units: unit `o`
    /// receives column `o` in row-major order of the leading dims.
    /// Returns the number of trits written into active units.
    pub fn load(&mut self, weights: &[i8], cout: usize, thresholds: Option<&[ThresholdPair]>) -> u64 {
        let per_unit = weights.len() / cout;
        let mut loaded = 0;
        for (o, u) in self.units.iter_mut().enumerate() {
            if o >= cout {
                u.weight_buffer.clear();
                u.thresholds = None;
                continue;
            }
            u.weight_buffer = (0..per_unit).map(|i| weights[i * cout + o]).collect();
            u.thresholds = thresholds.map(|t| t[o]);
            if !u.gated {
                loaded += per_unit as u64;
            }
        }
        loaded
    }
}
