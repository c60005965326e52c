//! Seeded synthetic weights, thresholds and inputs.
//!
//! Thresholds are chosen so that each layer's output hits a target zero
//! fraction, using the exact accumulator distribution of a sum of i.i.d.
//! products of random trits.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{InputSpec, LayerOp, NetworkPlan, ResolvedLayer};
use crate::network::{LayerParams, Network, NetworkInput};
use crate::oracle::ThresholdPair;
use crate::trit::{TernaryTensor, Trit};

/// Target zero fractions of generated tensors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthProfile {
    pub weight_zero: f64,
    pub input_zero: f64,
    /// Target zero fraction of every thresholded layer output.
    pub activation_zero: f64,
}

impl SynthProfile {
    /// Uniform trits everywhere.
    pub const UNIFORM: Self = Self {
        weight_zero: 1.0 / 3.0,
        input_zero: 1.0 / 3.0,
        activation_zero: 1.0 / 3.0,
    };

    /// Frame-camera style: dense inputs, moderate activation sparsity.
    pub const DENSE: Self = Self {
        weight_zero: 1.0 / 3.0,
        input_zero: 0.3,
        activation_zero: 0.4,
    };

    /// Event-camera style: mostly-empty inputs, sparse weights and
    /// activations.
    pub const SPARSE: Self = Self {
        weight_zero: 0.6,
        input_zero: 0.9,
        activation_zero: 0.8,
    };

    /// Accumulated event frames: half-empty inputs, moderately sparse
    /// weights.
    pub const EVENT: Self = Self {
        weight_zero: 0.4,
        input_zero: 0.6,
        activation_zero: 0.5,
    };
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random tensor with `P(0) = zero` and `P(+1) = P(-1)`.
pub fn random_tensor(rng: &mut impl Rng, shape: &[usize], zero: f64) -> TernaryTensor {
    let n: usize = shape.iter().product();
    let trits: Vec<Trit> = (0..n)
        .map(|_| {
            if rng.gen_bool(zero.clamp(0.0, 1.0)) {
                Trit::Zero
            } else if rng.gen_bool(0.5) {
                Trit::Pos
            } else {
                Trit::Neg
            }
        })
        .collect();
    TernaryTensor::from_trits(shape, &trits).expect("shape matches length")
}

/// `P(|S| <= h)` for `h = 0..=n` where `S` is the sum of `n` i.i.d. terms
/// equal to +1 or -1 with probability `q/2` each.
fn abs_cdf(n: usize, q: f64) -> Vec<f64> {
    let mut p = vec![0.0; 2 * n + 1];
    p[n] = 1.0;
    let (a, b) = (q / 2.0, 1.0 - q);
    for k in 0..n {
        let mut next = vec![0.0; 2 * n + 1];
        for s in (n - k)..=(n + k) {
            let v = p[s];
            if v == 0.0 {
                continue;
            }
            next[s - 1] += a * v;
            next[s] += b * v;
            next[s + 1] += a * v;
        }
        p = next;
    }
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = p[n];
    out.push(acc);
    for h in 1..=n {
        acc += p[n - h] + p[n + h];
        out.push(acc);
    }
    out
}

/// Symmetric threshold pair whose zero band `[-h, h]` best matches `zero`.
pub fn threshold_for(n_terms: usize, q: f64, zero: f64) -> ThresholdPair {
    let cdf = abs_cdf(n_terms, q);
    let h = (0..cdf.len())
        .min_by(|&a, &b| {
            (cdf[a] - zero)
                .abs()
                .partial_cmp(&(cdf[b] - zero).abs())
                .unwrap()
        })
        .unwrap_or(0) as i32;
    ThresholdPair { lo: -h - 1, hi: h }
}

/// Zero fraction after 2x2 max pooling of i.i.d. symmetric trits.
fn pooled_zero(z: f64) -> f64 {
    ((1.0 + z) / 2.0).powi(4) - ((1.0 - z) / 2.0).powi(4)
}

/// Accumulator terms per output that carry real (non-padding) data.
fn terms(layer: &ResolvedLayer) -> usize {
    match &layer.op {
        LayerOp::Conv2d { fold: Some(f), .. } => f.taps.unwrap_or(3) * layer.cin,
        LayerOp::Conv2d { .. } => 9 * layer.cin,
        LayerOp::Tcn1d { spec } => spec.kernel * layer.cin,
        LayerOp::Fc => layer.cin,
        LayerOp::Maxpool => 0,
    }
}

/// Weights and thresholds for every layer. The terminal layer is raw
/// (no thresholds) when `raw_terminal` is set.
pub fn synth_params(
    plan: &NetworkPlan,
    profile: SynthProfile,
    seed: u64,
    raw_terminal: bool,
) -> Vec<Option<LayerParams>> {
    let mut rng = rng(seed);
    let mut zin = profile.input_zero;
    let mut out = Vec::with_capacity(plan.layers.len());
    for layer in &plan.layers {
        let Some(shape) = &layer.weight_shape else {
            zin = pooled_zero(zin);
            out.push(None);
            continue;
        };
        let weights = random_tensor(&mut rng, shape, profile.weight_zero);
        let thresholds = if layer.terminal && raw_terminal {
            None
        } else {
            let q = (1.0 - zin) * (1.0 - profile.weight_zero);
            let th = threshold_for(terms(layer), q, profile.activation_zero);
            Some(vec![th; layer.cout])
        };
        zin = profile.activation_zero;
        if let LayerOp::Conv2d { pool: true, .. } = layer.op {
            zin = pooled_zero(zin);
        }
        out.push(Some(LayerParams {
            weights,
            thresholds,
        }));
    }
    out
}

pub fn synth_network(plan: NetworkPlan, profile: SynthProfile, seed: u64) -> Network {
    let params = synth_params(&plan, profile, seed, true);
    Network::new(plan, params).expect("synthesized parameters match the plan")
}

/// A random input; stream networks get exactly `steps` frames.
pub fn synth_input(plan: &NetworkPlan, profile: SynthProfile, rng: &mut impl Rng) -> NetworkInput {
    let z = profile.input_zero;
    match &plan.config.input {
        InputSpec::Frame { shape } => NetworkInput::Frame(random_tensor(rng, shape, z)),
        InputSpec::Stream { shape, steps, .. } => {
            NetworkInput::Frames((0..*steps).map(|_| random_tensor(rng, shape, z)).collect())
        }
        InputSpec::Sequence { shape } => NetworkInput::Sequence(random_tensor(rng, shape, z)),
    }
}
