//! Randomized equivalence check of the accelerator model against the
//! reference chain.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::accel::{Accelerator, HardwareConfig, SimOptions};
use crate::netcfg::synth::{self, SynthProfile};
use crate::network::{LayerValue, Network, NetworkInput};
use crate::oracle::evaluate_network;
use crate::trit::{TernaryTensor, Trit};

/// Flip of one weight trit in the accelerator's copy of the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fault {
    pub layer: usize,
    /// Flat index into the layer's weight tensor.
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyConfig {
    pub trials: usize,
    pub seed: u64,
    pub profile: SynthProfile,
    pub fault: Option<Fault>,
    /// Upper bound on re-simulations spent shrinking a counterexample.
    pub minimize_budget: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            trials: 100,
            seed: 0,
            profile: SynthProfile::UNIFORM,
            fault: None,
            minimize_budget: 32,
        }
    }
}

/// First mismatching value of a trial.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Divergence {
    pub trial: usize,
    /// Layer index, or `None` when the TCN input sequences differ.
    pub layer: Option<usize>,
    pub position: Vec<usize>,
    pub expected: i32,
    pub actual: i32,
    /// Nonzero input trits before and after shrinking.
    pub input_nonzeros: usize,
    pub minimized_nonzeros: usize,
    /// Shrunk input frames (row-major trit values) that still diverge.
    pub minimized_input: Vec<Vec<i8>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifySummary {
    pub network: String,
    pub trials: usize,
    pub passed: usize,
    pub first_divergence: Option<Divergence>,
}

impl VerifySummary {
    pub fn ok(&self) -> bool {
        self.first_divergence.is_none()
    }
}

/// Seed of trial `i`, independent of scheduling.
pub fn trial_seed(seed: u64, i: usize) -> u64 {
    // splitmix64 step
    let mut z = seed.wrapping_add((i as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Applies `fault` to a copy of `net`.
pub fn inject_fault(net: &Network, fault: Fault) -> Result<Network, String> {
    let mut faulty = net.clone();
    let p = faulty
        .params
        .get_mut(fault.layer)
        .and_then(|p| p.as_mut())
        .ok_or_else(|| format!("layer {} has no weights", fault.layer))?;
    if fault.index >= p.weights.len() {
        return Err(format!(
            "index {} outside the {} weights of layer {}",
            fault.index,
            p.weights.len(),
            fault.layer
        ));
    }
    let t = p.weights.get_flat(fault.index);
    let flipped = match t {
        Trit::Zero => Trit::Pos,
        Trit::Pos => Trit::Neg,
        Trit::Neg => Trit::Zero,
    };
    p.weights.set_flat(fault.index, flipped);
    Ok(faulty)
}

fn first_mismatch(expected: &[i32], actual: &[i32], shape: &[usize]) -> Option<(Vec<usize>, i32, i32)> {
    let i = expected.iter().zip(actual).position(|(a, b)| a != b)?;
    let mut pos = vec![0; shape.len()];
    let mut rem = i;
    for (d, &n) in shape.iter().enumerate().rev() {
        pos[d] = rem % n;
        rem /= n;
    }
    Some((pos, expected[i], actual[i]))
}

/// Compares one inference; returns the first mismatch.
fn compare(reference: &Network, device: &Network, input: &NetworkInput) -> Result<Option<Divergence>, String> {
    let want = evaluate_network(reference, input).map_err(|e| e.to_string())?;
    let mut acc = Accelerator::new(HardwareConfig::default(), SimOptions::default());
    let got = acc.run_network(device, input).map_err(|e| e.to_string())?;
    let mk = |layer, (position, expected, actual)| Divergence {
        trial: 0,
        layer,
        position,
        expected,
        actual,
        input_nonzeros: 0,
        minimized_nonzeros: 0,
        minimized_input: Vec::new(),
    };
    let split = reference.plan.tcn_start.unwrap_or(usize::MAX);
    for (i, (w, g)) in want.layers.iter().zip(got.layers.iter().map(|r| &r.output)).enumerate() {
        if i == split {
            if let Some(x) = &got.tcn_input {
                let features = stack(&want.frame_features, x.shape());
                if let Some(m) = first_mismatch(&features, &values(x), x.shape()) {
                    return Ok(Some(mk(None, m)));
                }
            }
        }
        if w.shape() != g.shape() {
            return Ok(Some(mk(Some(i), (vec![], w.values().len() as i32, g.values().len() as i32))));
        }
        if let Some(m) = first_mismatch(&w.values(), &g.values(), w.shape()) {
            return Ok(Some(mk(Some(i), m)));
        }
    }
    if want.prediction != got.prediction {
        let n = reference.plan.layers.len();
        return Ok(Some(mk(Some(n - 1), (vec![], want.prediction.class as i32, got.prediction.class as i32))));
    }
    Ok(None)
}

fn values(t: &TernaryTensor) -> Vec<i32> {
    LayerValue::Ternary(t.clone()).values()
}

fn stack(features: &[TernaryTensor], shape: &[usize]) -> Vec<i32> {
    if features.is_empty() {
        return vec![0; shape.iter().product()];
    }
    features.iter().flat_map(values).collect()
}

fn nonzeros(input: &NetworkInput) -> usize {
    input
        .tensors()
        .iter()
        .map(|t| t.len() - t.sparsity().zero_count as usize)
        .sum()
}

/// Greedily zeroes chunks of the input while the divergence persists.
fn shrink(reference: &Network, device: &Network, input: &NetworkInput, budget: usize) -> NetworkInput {
    let mut best = input.clone();
    let mut spent = 0;
    let total: usize = best.tensors().iter().map(|t| t.len()).sum();
    let mut chunk = total.div_ceil(2).max(1);
    while chunk >= 1 && spent < budget {
        let mut start = 0;
        while start < total && spent < budget {
            let candidate = zero_range(&best, start, chunk);
            if candidate != best {
                spent += 1;
                if matches!(compare(reference, device, &candidate), Ok(Some(_))) {
                    best = candidate;
                }
            }
            start += chunk;
        }
        if chunk == 1 {
            break;
        }
        chunk = chunk.div_ceil(2);
    }
    best
}

fn zero_range(input: &NetworkInput, start: usize, len: usize) -> NetworkInput {
    let mut offset = 0;
    let mut edit = |t: &TernaryTensor| {
        let mut t = t.clone();
        for i in 0..t.len() {
            let g = offset + i;
            if g >= start && g < start + len {
                t.set_flat(i, Trit::Zero);
            }
        }
        offset += t.len();
        t
    };
    match input {
        NetworkInput::Frame(t) => NetworkInput::Frame(edit(t)),
        NetworkInput::Sequence(t) => NetworkInput::Sequence(edit(t)),
        NetworkInput::Frames(f) => NetworkInput::Frames(f.iter().map(&mut edit).collect()),
    }
}

/// Runs `cfg.trials` random inferences through both models. Trials run in
/// parallel; the result does not depend on the thread count.
pub fn verify(net: &Network, cfg: &VerifyConfig) -> Result<VerifySummary, String> {
    verify_against(net, net, cfg)
}

/// Like [`verify`], but the accelerator runs `device` (for example weights
/// read from a different file) while the reference chain runs `net`.
pub fn verify_against(net: &Network, device: &Network, cfg: &VerifyConfig) -> Result<VerifySummary, String> {
    if device.plan != net.plan {
        return Err("reference and device networks have different layouts".into());
    }
    let device = match cfg.fault {
        Some(f) => inject_fault(device, f)?,
        None => device.clone(),
    };
    let results: Vec<Result<Option<Divergence>, String>> = (0..cfg.trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(cfg.seed, i));
            let input = synth::synth_input(&net.plan, cfg.profile, &mut rng);
            compare(net, &device, &input).map(|d| {
                d.map(|mut d| {
                    d.trial = i;
                    d.input_nonzeros = nonzeros(&input);
                    d
                })
            })
        })
        .collect();
    let mut passed = 0;
    let mut first = None;
    for r in results {
        match r? {
            None => passed += 1,
            Some(d) if first.is_none() => first = Some(d),
            Some(_) => {}
        }
    }
    if let Some(d) = first.as_mut() {
        let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(cfg.seed, d.trial));
        let input = synth::synth_input(&net.plan, cfg.profile, &mut rng);
        let small = shrink(net, &device, &input, cfg.minimize_budget);
        d.minimized_nonzeros = nonzeros(&small);
        d.minimized_input = small.tensors().iter().map(|t| t.to_i8()).collect();
        if let Ok(Some(again)) = compare(net, &device, &small) {
            d.layer = again.layer;
            d.position = again.position;
            d.expected = again.expected;
            d.actual = again.actual;
        }
    }
    Ok(VerifySummary {
        network: net.name().to_string(),
        trials: cfg.trials,
        passed,
        first_divergence: first,
    })
}
