//! Random networks and parameters shared by the integration tests.
#![allow(dead_code)]

use cutie::netcfg::{parse_network_str, LayerOp, NetworkPlan};
use cutie::network::{LayerParams, Network, NetworkInput};
use cutie::oracle::ThresholdPair;
use cutie::trit::{TernaryTensor, Trit};
use rand::Rng;

pub fn random_tensor(rng: &mut impl Rng, shape: &[usize], zero: f64) -> TernaryTensor {
    let n: usize = shape.iter().product();
    let trits: Vec<Trit> = (0..n)
        .map(|_| {
            if rng.gen_bool(zero) {
                Trit::Zero
            } else if rng.gen_bool(0.5) {
                Trit::Pos
            } else {
                Trit::Neg
            }
        })
        .collect();
    TernaryTensor::from_trits(shape, &trits).unwrap()
}

fn active(rng: &mut impl Rng, cout: usize) -> String {
    if rng.gen_bool(0.2) {
        format!("active_channels = {}\n", rng.gen_range(1..=cout))
    } else {
        String::new()
    }
}

/// Spatial layers on an `h x w x c` map; returns the TOML and the final
/// `(h, w, c)`.
fn spatial_layers(rng: &mut impl Rng, mut h: usize, mut w: usize, mut c: usize, n: usize, max_c: usize) -> (String, (usize, usize, usize)) {
    let mut s = String::new();
    for _ in 0..n {
        if h % 2 == 0 && w % 2 == 0 && h >= 2 && w >= 2 && rng.gen_bool(0.15) {
            s.push_str("[[layer]]\nkind = \"maxpool\"\n");
            h /= 2;
            w /= 2;
            continue;
        }
        let cout = rng.gen_range(1..=max_c);
        let pad: [usize; 4] = if rng.gen_bool(0.6) {
            [1, 1, 1, 1]
        } else {
            [0; 4].map(|_| rng.gen_range(0..=2))
        };
        let (ph, pw) = (h + pad[0] + pad[1], w + pad[2] + pad[3]);
        if ph < 3 || pw < 3 {
            continue;
        }
        let (mut ho, mut wo) = (ph - 2, pw - 2);
        if ho > 64 || wo > 64 {
            continue;
        }
        let pool = ho % 2 == 0 && wo % 2 == 0 && rng.gen_bool(0.3);
        if pool {
            ho /= 2;
            wo /= 2;
        }
        s.push_str(&format!(
            "[[layer]]\nkind = \"conv2d\"\ncout = {cout}\npool = {pool}\npadding = {pad:?}\n{}",
            active(rng, cout)
        ));
        h = ho;
        w = wo;
        c = cout;
    }
    (s, (h, w, c))
}

/// Sequence layers keeping the receptive field within 24 steps.
fn sequence_layers(rng: &mut impl Rng, t: usize, n: usize, max_c: usize) -> String {
    let mut s = String::new();
    let mut budget = 23usize;
    for _ in 0..n {
        let cout = rng.gen_range(1..=max_c);
        let mut kernel = rng.gen_range(1..=3usize);
        if kernel - 1 > budget {
            kernel = 1;
        }
        let max_d = if kernel > 1 { (budget / (kernel - 1)).clamp(1, 8) } else { 8 };
        let d = rng.gen_range(1..=max_d);
        if t.div_ceil(d) > 64 {
            continue;
        }
        budget -= (kernel - 1) * d;
        if rng.gen_bool(0.3) {
            // lowered form; arbitrary 3x3 kernels
            let top = rng.gen_range(0..=2usize);
            s.push_str(&format!(
                "[[layer]]\nkind = \"conv2d\"\ncout = {cout}\npadding = [{top}, {}, 1, 1]\nfold = {{ dilation = {d}, steps = {t}, taps = {kernel} }}\n{}",
                2 - top,
                active(rng, cout)
            ));
        } else {
            s.push_str(&format!(
                "[[layer]]\nkind = \"tcn1d\"\ncout = {cout}\nkernel = {kernel}\ndilation = {d}\n{}",
                active(rng, cout)
            ));
        }
    }
    s
}

fn fc(rng: &mut impl Rng) -> String {
    let cout = rng.gen_range(1..=10);
    format!("[[layer]]\nkind = \"fc\"\ncout = {cout}\n")
}

/// A random valid network config with `layers` layers at most.
pub fn random_config(rng: &mut impl Rng, layers: usize) -> String {
    let head = "schema_version = 1\nname = \"random\"\n";
    loop {
        let kind = rng.gen_range(0..3);
        let text = match kind {
            0 => {
                let (h, w, c) = (rng.gen_range(1..=12), rng.gen_range(1..=12), rng.gen_range(1..=12));
                let n = rng.gen_range(1..=layers);
                let (body, _) = spatial_layers(rng, h, w, c, n, 12);
                let tail = if rng.gen_bool(0.3) { fc(rng) } else { String::new() };
                format!("{head}[input]\nkind = \"frame\"\nshape = [{h}, {w}, {c}]\n{body}{tail}")
            }
            1 => {
                let (t, c) = (rng.gen_range(1..=24), rng.gen_range(1..=12));
                let n = rng.gen_range(1..=layers);
                let body = sequence_layers(rng, t, n, 12);
                format!("{head}[input]\nkind = \"sequence\"\nshape = [{t}, {c}]\n{body}")
            }
            _ => {
                let (h, w, c) = (rng.gen_range(1..=6), rng.gen_range(1..=6), rng.gen_range(1..=6));
                let steps = rng.gen_range(1..=6);
                let hop = rng.gen_range(1..=steps);
                let n = rng.gen_range(1..=layers.max(2) - 1);
                let (body, (fh, fw, fc_)) = spatial_layers(rng, h, w, c, n, 6);
                if fh * fw * fc_ > 96 {
                    continue;
                }
                let depth = rng.gen_range(1..=2);
                let seq = sequence_layers(rng, steps, depth, 8);
                format!(
                    "{head}[input]\nkind = \"stream\"\nshape = [{h}, {w}, {c}]\nsteps = {steps}\nhop = {hop}\n{body}{seq}"
                )
            }
        };
        if let Ok(plan) = parse_network_str(&text) {
            if !plan.layers.is_empty() {
                return text;
            }
        }
    }
}

/// Random weights and per-channel thresholds (possibly asymmetric).
pub fn random_params(rng: &mut impl Rng, plan: &NetworkPlan) -> Vec<Option<LayerParams>> {
    let wz = rng.gen_range(0.0..0.8);
    let last_pooled = plan
        .layers
        .last()
        .is_some_and(|l| matches!(l.op, LayerOp::Conv2d { pool: true, .. }));
    let raw_terminal = !last_pooled && rng.gen_bool(0.5);
    plan.layers
        .iter()
        .map(|l| {
            let shape = l.weight_shape.as_ref()?;
            let weights = random_tensor(rng, shape, wz);
            let terms: usize = shape[..shape.len() - 1].iter().product();
            let s = ((terms as f64).sqrt() as i32).max(1);
            let thresholds = if l.terminal && raw_terminal {
                None
            } else {
                Some(
                    (0..l.cout)
                        .map(|_| {
                            let a = rng.gen_range(-s..=s);
                            let b = rng.gen_range(-s..=s);
                            ThresholdPair::new(a.min(b), a.max(b)).unwrap()
                        })
                        .collect(),
                )
            };
            Some(LayerParams { weights, thresholds })
        })
        .collect()
}

pub fn random_network(rng: &mut impl Rng, layers: usize) -> Network {
    let plan = parse_network_str(&random_config(rng, layers)).unwrap();
    let params = random_params(rng, &plan);
    Network::new(plan, params).unwrap()
}

/// Random input for `net`; stream inputs get between `steps` and
/// `steps + 3` frames.
pub fn random_input(rng: &mut impl Rng, net: &Network) -> NetworkInput {
    let z = rng.gen_range(0.0..0.9);
    match &net.plan.config.input {
        cutie::netcfg::InputSpec::Frame { shape } => NetworkInput::Frame(random_tensor(rng, shape, z)),
        cutie::netcfg::InputSpec::Sequence { shape } => NetworkInput::Sequence(random_tensor(rng, shape, z)),
        cutie::netcfg::InputSpec::Stream { shape, steps, .. } => {
            let n = steps + rng.gen_range(0..=3);
            NetworkInput::Frames((0..n).map(|_| random_tensor(rng, shape, z)).collect())
        }
    }
}
