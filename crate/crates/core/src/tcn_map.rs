//! Lowering of causal dilated 1D convolutions onto the undilated 3x3 2D
//! convolution datapath.
//!
//! The sequence is wrapped into a `ceil(T/D) x D` map, `z[r][m] = x[r*D + m]`
//! (zero past the end). A dilated tap `x[n - j*D]` then sits exactly `j`
//! rows above `x[n]` in the same column, so the dilated convolution becomes
//! a vertical undilated correlation inside each column and never crosses the
//! wrap seam. The 1D kernel is written into the middle column of a 3x3
//! kernel, oldest tap on top:
//!
//! ```text
//!   N = 1          N = 2          N = 3
//!   . 0 .          . w0 .         . w0 .
//!   . w0 .         . w1 .         . w1 .
//!   . 0 .          . 0  .         . w2 .
//!   pad t1 b1      pad t1 b1      pad t2 b0      (left = right = 1)
//! ```
//!
//! Top padding supplies the causal zero history; left/right padding keeps
//! the neighbouring columns (which only meet zero kernel entries) in range;
//! bottom padding keeps the output height equal to the folded height.
//! Output position `(r, m)` unfolds to time step `n = r*D + m`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::accel::HardwareConfig;
use crate::oracle::{self, ConvResult, OracleError, Padding2d};
use crate::trit::TernaryTensor;

/// Spatial kernel size of the target datapath.
pub const KERNEL_2D: usize = 3;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MapError {
    #[error("dilation must be >= 1, got {0}")]
    NonPositiveDilation(usize),
    #[error("kernel length {0} exceeds the 3-tap limit of the 3x3 kernel column")]
    KernelTooLong(usize),
    #[error("mapping infeasible: folded map {rows}x{cols} exceeds the {max_h}x{max_w} feature map limit")]
    MappingInfeasible {
        rows: usize,
        cols: usize,
        max_h: usize,
        max_w: usize,
    },
    #[error("invalid layer spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

/// Shape of one dilated causal 1D convolution layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TcnLayerSpec {
    /// Kernel length N.
    pub kernel: usize,
    pub dilation: usize,
    pub cin: usize,
    pub cout: usize,
    /// Sequence length T.
    pub steps: usize,
}

impl TcnLayerSpec {
    pub fn folded_rows(&self) -> usize {
        self.steps.div_ceil(self.dilation.max(1))
    }

    pub fn validate(&self, hw: &HardwareConfig) -> Result<(), MapError> {
        if self.dilation == 0 {
            return Err(MapError::NonPositiveDilation(0));
        }
        if self.kernel == 0 || self.steps == 0 || self.cin == 0 || self.cout == 0 {
            return Err(MapError::InvalidSpec(format!(
                "kernel, steps and channel counts must be >= 1: {self:?}"
            )));
        }
        if self.kernel > KERNEL_2D {
            return Err(MapError::KernelTooLong(self.kernel));
        }
        let (rows, cols) = (self.folded_rows(), self.dilation);
        if rows > hw.max_fmap_h || cols > hw.max_fmap_w {
            return Err(MapError::MappingInfeasible {
                rows,
                cols,
                max_h: hw.max_fmap_h,
                max_w: hw.max_fmap_w,
            });
        }
        Ok(())
    }
}

/// Offline artifacts that turn one TCN layer into an ordinary 2D layer.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Mapped2DLayer {
    pub spec: TcnLayerSpec,
    /// `(rows, cols, cin)` of the folded input map.
    pub folded_shape: [usize; 3],
    /// `3 x 3 x Cin x Cout`, zero outside the middle column.
    pub kernel_2d: TernaryTensor,
    pub padding: Padding2d,
}

impl Mapped2DLayer {
    /// Output-unfold rule: time step `n` lives at `(n / D, n % D)`.
    pub fn unfold_position(&self, n: usize) -> (usize, usize) {
        (n / self.spec.dilation, n % self.spec.dilation)
    }

    /// Gathers the first `T` positions of a folded 2D result back into a
    /// `T x Cout` sequence.
    pub fn unfold(&self, folded: &ConvResult) -> ConvResult {
        unfold_2d_to_1d(folded, self.spec.steps)
    }
}

/// Padding that makes the projected kernel reproduce the causal dilated
/// convolution for a kernel of length `n_taps`.
pub fn mapping_padding(n_taps: usize) -> Padding2d {
    let offset = row_offset(n_taps);
    Padding2d {
        top: offset + n_taps - 1,
        bottom: KERNEL_2D - n_taps - offset,
        left: 1,
        right: 1,
    }
}

#[inline]
fn row_offset(n_taps: usize) -> usize {
    (KERNEL_2D - n_taps) / 2
}

/// Wraps a `T x Cin` sequence into a `ceil(T/D) x D x Cin` map.
pub fn fold_1d_to_2d(x: &TernaryTensor, dilation: usize) -> Result<TernaryTensor, MapError> {
    if dilation == 0 {
        return Err(MapError::NonPositiveDilation(0));
    }
    let (t, cin) = match *x.shape() {
        [a, b] => (a, b),
        ref s => {
            return Err(MapError::InvalidSpec(format!(
                "fold expects a T x Cin sequence, got {s:?}"
            )))
        }
    };
    let rows = t.div_ceil(dilation);
    let mut z = TernaryTensor::zeros(&[rows, dilation, cin]);
    for n in 0..t {
        for c in 0..cin {
            z.set(&[n / dilation, n % dilation, c], x.get(&[n, c]));
        }
    }
    Ok(z)
}

/// Inverse of [`fold_1d_to_2d`] on the first `steps` positions.
pub fn unfold_2d_to_1d(folded: &ConvResult, steps: usize) -> ConvResult {
    let (cols, ch) = (folded.shape[1], folded.shape[2]);
    let mut out = ConvResult::zeros(&[steps, ch]);
    for n in 0..steps {
        let base = ((n / cols) * cols + n % cols) * ch;
        out.acc[n * ch..(n + 1) * ch].copy_from_slice(&folded.acc[base..base + ch]);
    }
    out
}

/// Projects an `N x Cin x Cout` kernel into the middle column of a
/// `3 x 3 x Cin x Cout` kernel; row `offset + i` holds tap `w[i]`.
pub fn project_kernel(w: &TernaryTensor) -> Result<TernaryTensor, MapError> {
    let (n_taps, cin, cout) = match *w.shape() {
        [a, b, c] => (a, b, c),
        ref s => {
            return Err(MapError::InvalidSpec(format!(
                "1D kernel must be N x Cin x Cout, got {s:?}"
            )))
        }
    };
    if n_taps > KERNEL_2D {
        return Err(MapError::KernelTooLong(n_taps));
    }
    if n_taps == 0 {
        return Err(MapError::InvalidSpec("kernel length must be >= 1".into()));
    }
    let offset = row_offset(n_taps);
    let mut k = TernaryTensor::zeros(&[KERNEL_2D, KERNEL_2D, cin, cout]);
    for i in 0..n_taps {
        for c in 0..cin {
            for o in 0..cout {
                k.set(&[offset + i, 1, c, o], w.get(&[i, c, o]));
            }
        }
    }
    Ok(k)
}

/// Compiles the data-independent mapping artifacts of one TCN layer.
pub fn compile_tcn_layer(
    spec: &TcnLayerSpec,
    w: &TernaryTensor,
    hw: &HardwareConfig,
) -> Result<Mapped2DLayer, MapError> {
    spec.validate(hw)?;
    if w.shape() != [spec.kernel, spec.cin, spec.cout] {
        return Err(MapError::InvalidSpec(format!(
            "kernel shape {:?} does not match spec {spec:?}",
            w.shape()
        )));
    }
    Ok(Mapped2DLayer {
        spec: *spec,
        folded_shape: [spec.folded_rows(), spec.dilation, spec.cin],
        kernel_2d: project_kernel(w)?,
        padding: mapping_padding(spec.kernel),
    })
}

/// Lowers a TCN layer and evaluates it through the 2D path: fold, padded
/// 2D correlation with the projected kernel, unfold.
pub fn map_tcn_layer(
    spec: &TcnLayerSpec,
    x: &TernaryTensor,
    w: &TernaryTensor,
) -> Result<(Mapped2DLayer, ConvResult), MapError> {
    let mapped = compile_tcn_layer(spec, w, &HardwareConfig::default())?;
    if x.shape() != [spec.steps, spec.cin] {
        return Err(MapError::InvalidSpec(format!(
            "input shape {:?} does not match spec {spec:?}",
            x.shape()
        )));
    }
    let z = fold_1d_to_2d(x, spec.dilation)?;
    let folded = oracle::conv2d_ref_padded(&z, &mapped.kernel_2d, mapped.padding)?;
    let out = mapped.unfold(&folded);
    Ok((mapped, out))
}

/// Per-layer dilation schedule of a TCN stack.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DilationSchedule {
    /// `D_i = 2^i`.
    Exponential,
    /// `D_i = 1`.
    Undilated,
    Explicit(Vec<usize>),
}

impl DilationSchedule {
    pub fn dilation(&self, layer: usize) -> usize {
        match self {
            DilationSchedule::Exponential => 1 << layer,
            DilationSchedule::Undilated => 1,
            DilationSchedule::Explicit(d) => d[layer],
        }
    }
}

/// Receptive field of a stack of `num_layers` layers with kernel length
/// `kernel`: `1 + sum_i (N-1) * D_i`.
pub fn receptive_field(num_layers: usize, kernel: usize, schedule: &DilationSchedule) -> usize {
    1 + (0..num_layers)
        .map(|i| (kernel - 1) * schedule.dilation(i))
        .sum::<usize>()
}

/// Closed form for exponential dilations at 0-based layer index `k`:
/// `f_k = 1 + sum_{i=0..=k} (N-1) * 2^i`.
pub fn receptive_field_at_layer(k: usize, kernel: usize) -> usize {
    1 + (0..=k).map(|i| (kernel - 1) << i).sum::<usize>()
}

/// Receptive field of an arbitrary `(kernel, dilation)` stack.
pub fn receptive_field_of(layers: &[(usize, usize)]) -> usize {
    1 + layers.iter().map(|&(n, d)| n.saturating_sub(1) * d).sum::<usize>()
}

/// Fewest layers whose receptive field reaches `steps`, or `None` if the
/// kernel cannot grow the field at all.
pub fn layers_to_cover(steps: usize, kernel: usize, schedule: &DilationSchedule) -> Option<usize> {
    if steps <= 1 {
        return Some(0);
    }
    if kernel < 2 {
        return None;
    }
    (1..=steps).find(|&l| receptive_field(l, kernel, schedule) >= steps)
}
