//! Brute-force reference implementations of every layer type.
//!
//! These are deliberately naive loops. They are the equivalence oracle for
//! the accelerator model and for the dilated-convolution lowering, so they
//! must stay independent of both.

mod network;

pub use network::{evaluate_layer, evaluate_network, NetworkTrace};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::trit::{TernaryTensor, Trit};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OracleError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("dilation must be >= 1, got {0}")]
    NonPositiveDilation(usize),
    #[error("expected {expected} threshold pairs (one per output channel), got {got}")]
    ChannelCountMismatch { expected: usize, got: usize },
    #[error("max pooling needs even spatial dims, got {h}x{w}")]
    OddSpatialDim { h: usize, w: usize },
    #[error("invalid threshold pair: lo {lo} > hi {hi}")]
    InvalidThresholds { lo: i32, hi: i32 },
}

fn mismatch(msg: impl Into<String>) -> OracleError {
    OracleError::ShapeMismatch(msg.into())
}

/// Accumulator-to-trit thresholds of one output channel.
///
/// `acc > hi` gives +1, `lo < acc <= hi` gives 0, `acc <= lo` gives -1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ThresholdPair {
    pub lo: i32,
    pub hi: i32,
}

impl ThresholdPair {
    pub fn new(lo: i32, hi: i32) -> Result<Self, OracleError> {
        if lo > hi {
            return Err(OracleError::InvalidThresholds { lo, hi });
        }
        Ok(Self { lo, hi })
    }

    #[inline]
    pub fn apply(&self, acc: i32) -> Trit {
        if acc > self.hi {
            Trit::Pos
        } else if acc > self.lo {
            Trit::Zero
        } else {
            Trit::Neg
        }
    }
}

/// Exact integer accumulators, row-major with the channel dimension last.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConvResult {
    pub shape: Vec<usize>,
    pub acc: Vec<i32>,
}

impl ConvResult {
    pub fn zeros(shape: &[usize]) -> Self {
        Self {
            shape: shape.to_vec(),
            acc: vec![0; shape.iter().product()],
        }
    }

    pub fn channels(&self) -> usize {
        *self.shape.last().unwrap_or(&0)
    }

    pub fn get(&self, idx: &[usize]) -> i32 {
        let i = idx
            .iter()
            .zip(&self.shape)
            .fold(0, |acc, (&i, &d)| acc * d + i);
        self.acc[i]
    }
}

/// Per-edge zero padding of a 2D feature map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Padding2d {
    pub top: usize,
    pub bottom: usize,
    pub left: usize,
    pub right: usize,
}

impl Padding2d {
    pub const fn symmetric(p: usize) -> Self {
        Self {
            top: p,
            bottom: p,
            left: p,
            right: p,
        }
    }

    pub fn as_array(&self) -> [usize; 4] {
        [self.top, self.bottom, self.left, self.right]
    }
}

fn dims3(t: &TernaryTensor, what: &str) -> Result<(usize, usize, usize), OracleError> {
    match *t.shape() {
        [a, b, c] => Ok((a, b, c)),
        ref s => Err(mismatch(format!("{what} must be rank 3, got {s:?}"))),
    }
}

/// Symmetric zero-padded 2D correlation (no kernel flip).
pub fn conv2d_ref(
    input: &TernaryTensor,
    weights: &TernaryTensor,
    padding: usize,
) -> Result<ConvResult, OracleError> {
    conv2d_ref_padded(input, weights, Padding2d::symmetric(padding))
}

/// 2D correlation with explicit per-edge zero padding:
/// `acc[y][x][o] = sum in[y+dy-top][x+dx-left][c] * w[dy][dx][c][o]`.
pub fn conv2d_ref_padded(
    input: &TernaryTensor,
    weights: &TernaryTensor,
    pad: Padding2d,
) -> Result<ConvResult, OracleError> {
    let (h, w, cin) = dims3(input, "conv2d input")?;
    let (kh, kw, wcin, cout) = match *weights.shape() {
        [a, b, c, d] => (a, b, c, d),
        ref s => return Err(mismatch(format!("conv2d weights must be rank 4, got {s:?}"))),
    };
    if wcin != cin {
        return Err(mismatch(format!(
            "weights expect {wcin} input channels, input has {cin}"
        )));
    }
    let ph = h + pad.top + pad.bottom;
    let pw = w + pad.left + pad.right;
    if kh == 0 || kw == 0 || ph < kh || pw < kw {
        return Err(mismatch(format!(
            "kernel {kh}x{kw} does not fit padded input {ph}x{pw}"
        )));
    }
    let (ho, wo) = (ph - kh + 1, pw - kw + 1);
    let x = input.to_i8();
    let k = weights.to_i8();
    let mut out = ConvResult::zeros(&[ho, wo, cout]);
    let bound = (kh * kw * cin) as i32;
    for oy in 0..ho {
        for ox in 0..wo {
            for o in 0..cout {
                let mut acc = 0i32;
                for dy in 0..kh {
                    for dx in 0..kw {
                        let iy = (oy + dy) as isize - pad.top as isize;
                        let ix = (ox + dx) as isize - pad.left as isize;
                        if iy < 0 || ix < 0 || iy >= h as isize || ix >= w as isize {
                            continue;
                        }
                        let (iy, ix) = (iy as usize, ix as usize);
                        for c in 0..cin {
                            let a = x[(iy * w + ix) * cin + c] as i32;
                            let b = k[((dy * kw + dx) * cin + c) * cout + o] as i32;
                            acc += a * b;
                        }
                    }
                }
                assert!(acc.abs() <= bound, "accumulator bound violated");
                out.acc[(oy * wo + ox) * cout + o] = acc;
            }
        }
    }
    Ok(out)
}

/// Causal dilated 1D convolution:
/// `out[n][o] = sum_{k=1..N} sum_c x~[n-(k-1)D][c] * w[N-k][c][o]`
/// with `x~[n] = 0` for `n < 0`. Output length equals input length.
pub fn dilated_conv1d_ref(
    x: &TernaryTensor,
    w: &TernaryTensor,
    dilation: usize,
) -> Result<ConvResult, OracleError> {
    if dilation == 0 {
        return Err(OracleError::NonPositiveDilation(dilation));
    }
    let (t, cin) = match *x.shape() {
        [a, b] => (a, b),
        ref s => return Err(mismatch(format!("conv1d input must be T x Cin, got {s:?}"))),
    };
    let (n_taps, wcin, cout) = match *w.shape() {
        [a, b, c] => (a, b, c),
        ref s => return Err(mismatch(format!("conv1d weights must be N x Cin x Cout, got {s:?}"))),
    };
    if wcin != cin {
        return Err(mismatch(format!(
            "weights expect {wcin} input channels, input has {cin}"
        )));
    }
    if t == 0 || n_taps == 0 {
        return Err(mismatch("sequence length and kernel length must be >= 1"));
    }
    let xs = x.to_i8();
    let ws = w.to_i8();
    let padded = |n: isize, c: usize| -> i32 {
        if n < 0 {
            0
        } else {
            xs[n as usize * cin + c] as i32
        }
    };
    let mut out = ConvResult::zeros(&[t, cout]);
    let bound = (n_taps * cin) as i32;
    for n in 0..t {
        for o in 0..cout {
            let mut acc = 0;
            for k in 1..=n_taps {
                let src = n as isize - ((k - 1) * dilation) as isize;
                let tap = n_taps - k;
                for c in 0..cin {
                    acc += padded(src, c) * ws[(tap * cin + c) * cout + o] as i32;
                }
            }
            assert!(acc.abs() <= bound, "accumulator bound violated");
            out.acc[n * cout + o] = acc;
        }
    }
    Ok(out)
}

/// Maps accumulators to trits with one threshold pair per output channel.
pub fn ternarize(
    acc: &ConvResult,
    thresholds: &[ThresholdPair],
) -> Result<TernaryTensor, OracleError> {
    let ch = acc.channels();
    if thresholds.len() != ch {
        return Err(OracleError::ChannelCountMismatch {
            expected: ch,
            got: thresholds.len(),
        });
    }
    let trits: Vec<Trit> = acc
        .acc
        .iter()
        .enumerate()
        .map(|(i, &a)| thresholds[i % ch].apply(a))
        .collect();
    TernaryTensor::from_trits(&acc.shape, &trits).map_err(|e| mismatch(e.to_string()))
}

/// 2x2 max pooling, stride 2, under the order -1 < 0 < +1.
pub fn maxpool2x2_ref(input: &TernaryTensor) -> Result<TernaryTensor, OracleError> {
    let (h, w, c) = dims3(input, "maxpool input")?;
    if h % 2 != 0 || w % 2 != 0 {
        return Err(OracleError::OddSpatialDim { h, w });
    }
    let mut out = TernaryTensor::zeros(&[h / 2, w / 2, c]);
    for y in 0..h / 2 {
        for x in 0..w / 2 {
            for ch in 0..c {
                let m = [(0, 0), (0, 1), (1, 0), (1, 1)]
                    .iter()
                    .map(|&(dy, dx)| input.get(&[2 * y + dy, 2 * x + dx, ch]))
                    .max()
                    .unwrap();
                out.set(&[y, x, ch], m);
            }
        }
    }
    Ok(out)
}

/// Output of a fully connected layer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FcOutput {
    /// Raw per-class integer scores (classifier layers).
    Scores(Vec<i32>),
    Ternary(TernaryTensor),
}

/// Fully connected layer. `weights` has shape `[..., Cout]` where the
/// leading dims multiply out to the flattened input length.
pub fn fc_ref(
    input: &TernaryTensor,
    weights: &TernaryTensor,
    thresholds: Option<&[ThresholdPair]>,
) -> Result<FcOutput, OracleError> {
    let acc = fc_accumulate(input, weights)?;
    match thresholds {
        None => Ok(FcOutput::Scores(acc.acc)),
        Some(th) => ternarize(&acc, th).map(FcOutput::Ternary),
    }
}

pub(crate) fn fc_accumulate(
    input: &TernaryTensor,
    weights: &TernaryTensor,
) -> Result<ConvResult, OracleError> {
    let ws = weights.shape();
    let Some((&cout, inner)) = ws.split_last() else {
        return Err(mismatch("fc weights must have rank >= 2"));
    };
    let inner: usize = inner.iter().product();
    if ws.len() < 2 || inner != input.len() {
        return Err(mismatch(format!(
            "fc weights {ws:?} do not match flattened input of {} trits",
            input.len()
        )));
    }
    let x = input.to_i8();
    let k = weights.to_i8();
    let mut acc = vec![0i32; cout];
    for (o, slot) in acc.iter_mut().enumerate() {
        *slot = (0..inner).map(|i| x[i] as i32 * k[i * cout + o] as i32).sum();
    }
    Ok(ConvResult {
        shape: vec![cout],
        acc,
    })
}

#[cfg(test)]
pub(crate) mod testutil {
    use rand::Rng;

    use crate::trit::{TernaryTensor, Trit};

    pub fn random_tensor(rng: &mut impl Rng, shape: &[usize]) -> TernaryTensor {
        let n = shape.iter().product();
        let trits: Vec<Trit> = (0..n).map(|_| Trit::ALL[rng.gen_range(0..3)]).collect();
        TernaryTensor::from_trits(shape, &trits).unwrap()
    }
}
