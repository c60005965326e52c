//! Cycle-approximate, bit-exact model of the accelerator datapath.
//!
//! Timing per layer:
//!
//! | layer            | cycles                                         |
//! |------------------|------------------------------------------------|
//! | conv2d / TCN     | `(K-1)*W_p + K` prefill + `H_out*W_out` + 1    |
//! | maxpool          | `W_in + 2` prefill + `H_out*W_out` + 1         |
//! | fc               | one per input position + 1                     |
//!
//! `W_p` is the padded row width held in the line buffer. With
//! [`SimOptions::model_weight_reload`] every layer also pays one cycle per
//! weight trit held in an OCU (units load in parallel).

mod line_buffer;
mod ocu;
mod tcn_memory;

pub use line_buffer::LineBuffer;
pub use ocu::{OcuArray, OcuState};
pub use tcn_memory::TcnMemory;

use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netcfg::{InputSpec, LayerOp, ResolvedLayer};
use crate::network::{flatten, LayerParams, LayerValue, Network, NetworkError, NetworkInput, Prediction};
use crate::oracle::{ConvResult, Padding2d};
use crate::tcn_map::{self, MapError};
use crate::trit::{TernaryTensor, Trit};

/// Dimensioning of the modeled accelerator instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HardwareConfig {
    pub num_ocu: usize,
    pub max_channels: usize,
    pub max_fmap_h: usize,
    pub max_fmap_w: usize,
    pub kernel: usize,
    /// Depth of the TCN memory in time steps.
    pub tcn_steps: usize,
    /// Width of one TCN memory entry in trits.
    pub tcn_width: usize,
}

impl Default for HardwareConfig {
    fn default() -> Self {
        Self {
            num_ocu: 96,
            max_channels: 96,
            max_fmap_h: 64,
            max_fmap_w: 64,
            kernel: 3,
            tcn_steps: 24,
            tcn_width: 96,
        }
    }
}

#[derive(Debug, Error)]
pub enum AccelError {
    #[error("dimension exceeds hardware: {0}")]
    DimensionExceedsHardware(String),
    #[error("layer {layer}: weights not loaded")]
    WeightsNotLoaded { layer: usize },
    #[error("TCN underflow: the window needs {needed} steps but only {available} are retained")]
    TcnUnderflow { needed: usize, available: usize },
    #[error("TCN read at step {start} misses the {retained} retained steps")]
    OutOfHistory { start: isize, retained: usize },
    #[error("feature vector of {width} trits exceeds the {max}-trit TCN memory width")]
    VectorTooWide { width: usize, max: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Network(#[from] NetworkError),
}

/// Switching and access activity of a run. All sizes are in trits.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ActivityCounters {
    pub cycles: u64,
    pub mac_ops: u64,
    /// MACs whose operands were both nonzero.
    pub nonzero_mac_ops: u64,
    /// Toggle proxy: operand pairs that were both nonzero.
    pub toggles: u64,
    pub fmap_reads: u64,
    pub fmap_writes: u64,
    pub weight_loads: u64,
}

impl Add for ActivityCounters {
    type Output = Self;

    fn add(mut self, o: Self) -> Self {
        self += o;
        self
    }
}

impl AddAssign for ActivityCounters {
    fn add_assign(&mut self, o: Self) {
        self.cycles += o.cycles;
        self.mac_ops += o.mac_ops;
        self.nonzero_mac_ops += o.nonzero_mac_ops;
        self.toggles += o.toggles;
        self.fmap_reads += o.fmap_reads;
        self.fmap_writes += o.fmap_writes;
        self.weight_loads += o.weight_loads;
    }
}

impl std::iter::Sum for ActivityCounters {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::default(), Add::add)
    }
}

/// Cycle breakdown of one layer.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CycleBreakdown {
    pub prefill: u64,
    pub compute: u64,
    pub drain: u64,
    pub reload: u64,
}

impl CycleBreakdown {
    pub fn total(&self) -> u64 {
        self.prefill + self.compute + self.drain + self.reload
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimOptions {
    /// Charge cycles for loading each layer's weights into the OCUs.
    pub model_weight_reload: bool,
}

pub const DRAIN_CYCLES: u64 = 1;

impl Add for CycleBreakdown {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        Self {
            prefill: self.prefill + o.prefill,
            compute: self.compute + o.compute,
            drain: self.drain + o.drain,
            reload: self.reload + o.reload,
        }
    }
}

/// Result of one layer on the accelerator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerRun {
    pub index: usize,
    /// Output of the last invocation.
    pub output: LayerValue,
    /// Counters and timing summed over all invocations.
    pub counters: ActivityCounters,
    pub timing: CycleBreakdown,
    /// Times the layer ran within the measured inference (frames per hop
    /// for 2D layers of a stream network, otherwise 1).
    pub invocations: usize,
}

impl LayerRun {
    fn absorb(&mut self, later: LayerRun) {
        self.output = later.output;
        self.counters += later.counters;
        self.timing = self.timing + later.timing;
        self.invocations += later.invocations;
    }
}

/// Result of one inference.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkRun {
    /// Layers of the classified frame plus the sequence layers.
    pub layers: Vec<LayerRun>,
    /// Activity of history frames processed before the classified one.
    pub warmup: ActivityCounters,
    pub warmup_frames: usize,
    /// The `T x C` sequence read from the TCN memory, if any.
    pub tcn_input: Option<TernaryTensor>,
    pub prediction: Prediction,
}

impl NetworkRun {
    /// Activity of the measured inference (warm-up excluded).
    pub fn total(&self) -> ActivityCounters {
        self.layers.iter().map(|l| l.counters).sum()
    }
}

/// One accelerator instance: OCU array, line buffer and TCN memory.
#[derive(Debug, Clone)]
pub struct Accelerator {
    hw: HardwareConfig,
    options: SimOptions,
    ocus: OcuArray,
    tcn: TcnMemory,
    loaded: Option<usize>,
}

impl Default for Accelerator {
    fn default() -> Self {
        Self::new(HardwareConfig::default(), SimOptions::default())
    }
}

impl Accelerator {
    pub fn new(hw: HardwareConfig, options: SimOptions) -> Self {
        Self {
            hw,
            options,
            ocus: OcuArray::new(hw.num_ocu),
            tcn: TcnMemory::new(hw.tcn_steps, hw.tcn_width),
            loaded: None,
        }
    }

    pub fn hardware(&self) -> &HardwareConfig {
        &self.hw
    }

    pub fn options(&self) -> SimOptions {
        self.options
    }

    pub fn tcn_memory(&self) -> &TcnMemory {
        &self.tcn
    }

    pub fn tcn_push(&mut self, v: &TernaryTensor) -> Result<(), AccelError> {
        self.tcn.push_tensor(v)
    }

    pub fn ocus(&self) -> &OcuArray {
        &self.ocus
    }

    /// Clears the TCN history and the OCU weight buffers.
    pub fn reset(&mut self) {
        self.tcn.clear();
        self.ocus = OcuArray::new(self.hw.num_ocu);
        self.loaded = None;
    }

    /// Gates OCUs `[active..)` and returns the mask (true = gated).
    pub fn apply_clock_gating(&mut self, active: usize) -> Vec<bool> {
        self.ocus.apply_clock_gating(active.clamp(1, self.hw.num_ocu))
    }

    fn check_dims(&self, layer: &ResolvedLayer) -> Result<(), AccelError> {
        let hw = &self.hw;
        let over = |m: String| Err(AccelError::DimensionExceedsHardware(m));
        if layer.cout > hw.num_ocu {
            return over(format!("{} output channels > {} OCUs", layer.cout, hw.num_ocu));
        }
        if !matches!(layer.op, LayerOp::Fc) && layer.cin > hw.max_channels {
            return over(format!("{} input channels > {}", layer.cin, hw.max_channels));
        }
        let dims = layer.input.dims();
        if let [h, w, _] = dims[..] {
            if h > hw.max_fmap_h || w > hw.max_fmap_w {
                return over(format!(
                    "feature map {h}x{w} > {}x{}",
                    hw.max_fmap_h, hw.max_fmap_w
                ));
            }
        }
        Ok(())
    }

    /// Loads the OCU weight buffers and thresholds of one layer. Returns
    /// the number of weight trits written into active units.
    fn load_layer(&mut self, layer: &ResolvedLayer, weights: &TernaryTensor, p: &LayerParams) -> u64 {
        self.apply_clock_gating(layer.active_channels);
        let n = self
            .ocus
            .load(&weights.to_i8(), layer.cout, p.thresholds.as_deref());
        self.loaded = Some(layer.index);
        n
    }

    /// Runs one layer on `input`, which must have the layer's input shape.
    pub fn run_layer(
        &mut self,
        layer: &ResolvedLayer,
        params: Option<&LayerParams>,
        input: &TernaryTensor,
    ) -> Result<LayerRun, AccelError> {
        self.check_dims(layer)?;
        if input.shape() != layer.input.dims().as_slice() {
            return Err(AccelError::Shape(format!(
                "layer {} expects {}, got {:?}",
                layer.index,
                layer.input,
                input.shape()
            )));
        }
        if let LayerOp::Maxpool = layer.op {
            return Ok(self.run_maxpool(layer, input));
        }
        let p = params.ok_or(AccelError::WeightsNotLoaded { layer: layer.index })?;
        let active = layer.active_channels;

        let (acc, mut counters, mut timing) = match &layer.op {
            LayerOp::Conv2d {
                padding,
                fold: None,
                ..
            } => {
                let loads = self.load_layer(layer, &p.weights, p);
                let (acc, mut c, t) = self.conv_engine(input, *padding, layer.cout)?;
                c.weight_loads = loads;
                (acc, c, t)
            }
            LayerOp::Conv2d {
                padding,
                fold: Some(f),
                ..
            } => {
                let loads = self.load_layer(layer, &p.weights, p);
                let z = tcn_map::fold_1d_to_2d(input, f.dilation)?;
                let (folded, mut c, t) = self.conv_engine(&z, *padding, layer.cout)?;
                c.weight_loads = loads;
                c.fmap_reads = input.len() as u64;
                (tcn_map::unfold_2d_to_1d(&folded, f.steps), c, t)
            }
            LayerOp::Tcn1d { spec } => {
                let mapped = tcn_map::compile_tcn_layer(spec, &p.weights, &self.hw)?;
                let loads = self.load_layer(layer, &mapped.kernel_2d, p);
                let z = tcn_map::fold_1d_to_2d(input, spec.dilation)?;
                let (folded, mut c, t) = self.conv_engine(&z, mapped.padding, layer.cout)?;
                c.weight_loads = loads;
                c.fmap_reads = input.len() as u64;
                (mapped.unfold(&folded), c, t)
            }
            LayerOp::Fc => {
                let loads = self.load_layer(layer, &p.weights, p);
                let (acc, mut c, t) = self.fc_engine(input, layer.cout);
                c.weight_loads = loads;
                (acc, c, t)
            }
            LayerOp::Maxpool => unreachable!(),
        };

        let per_unit = p.weights.len() as u64 / layer.cout as u64;
        if self.options.model_weight_reload {
            timing.reload = match layer.op {
                // projected TCN kernels fill a full 3x3 window
                LayerOp::Tcn1d { spec } => (self.hw.kernel * self.hw.kernel * spec.cin) as u64,
                _ => per_unit,
            };
        }

        let output = match &p.thresholds {
            None => LayerValue::Raw(acc),
            Some(_) => {
                let c = acc.channels();
                let trits: Vec<Trit> = acc
                    .acc
                    .iter()
                    .enumerate()
                    .map(|(i, &a)| self.ocus.units[i % c].activate(a))
                    .collect();
                let mut t = TernaryTensor::from_trits(&acc.shape, &trits)
                    .map_err(|e| AccelError::Shape(e.to_string()))?;
                if let LayerOp::Conv2d { pool: true, .. } = layer.op {
                    t = pool2x2(&t);
                }
                LayerValue::Ternary(t)
            }
        };
        let positions = output.shape().iter().rev().skip(1).product::<usize>() as u64;
        counters.fmap_writes = positions * active as u64;
        counters.cycles = timing.total();
        Ok(LayerRun {
            index: layer.index,
            output,
            counters,
            timing,
            invocations: 1,
        })
    }

    /// Streams `x` (`H x W x Cin`) through the line buffer, one window per
    /// compute cycle, every active OCU consuming each window.
    fn conv_engine(
        &mut self,
        x: &TernaryTensor,
        pad: Padding2d,
        cout: usize,
    ) -> Result<(ConvResult, ActivityCounters, CycleBreakdown), AccelError> {
        let (h, w, cin) = match *x.shape() {
            [a, b, c] => (a, b, c),
            ref s => return Err(AccelError::Shape(format!("conv input {s:?}"))),
        };
        let k = self.hw.kernel;
        let (ph, pw) = (h + pad.top + pad.bottom, w + pad.left + pad.right);
        if ph < k || pw < k {
            return Err(AccelError::Shape(format!("padded input {ph}x{pw} below kernel")));
        }
        let (ho, wo) = (ph - k + 1, pw - k + 1);
        for u in &self.ocus.units[..cout] {
            if u.weight_buffer.len() != k * k * cin {
                return Err(AccelError::WeightsNotLoaded {
                    layer: self.loaded.unwrap_or(0),
                });
            }
        }

        let xs = x.to_i8();
        let zero = vec![0i8; cin];
        let mut lb = LineBuffer::new(k, pw, cin);
        let mut window = vec![0i8; k * k * cin];
        let mut out = ConvResult::zeros(&[ho, wo, cout]);
        let mut windows = 0u64;
        let mut toggles = 0u64;
        let active: Vec<&OcuState> = self.ocus.units[..cout].iter().filter(|u| !u.gated).collect();
        let first_window_at = lb.prefill_pixels();
        for py in 0..ph {
            for px in 0..pw {
                let inside = py >= pad.top && py < pad.top + h && px >= pad.left && px < pad.left + w;
                let pixel = if inside {
                    let i = ((py - pad.top) * w + px - pad.left) * cin;
                    &xs[i..i + cin]
                } else {
                    &zero[..]
                };
                if let Some((oy, ox)) = lb.push(pixel) {
                    debug_assert!(lb.fill_level() >= first_window_at);
                    lb.window(oy, ox, &mut window);
                    let base = (oy * wo + ox) * cout;
                    for (o, u) in active.iter().enumerate() {
                        let (acc, t) = u.mac(&window);
                        out.acc[base + o] = acc;
                        toggles += t;
                    }
                    windows += 1;
                }
            }
        }
        assert_eq!(windows, (ho * wo) as u64, "line buffer must emit one window per output");
        let n_active = active.len() as u64;
        let counters = ActivityCounters {
            mac_ops: windows * n_active * (k * k * cin) as u64,
            nonzero_mac_ops: toggles,
            toggles,
            fmap_reads: (h * w * cin) as u64,
            ..Default::default()
        };
        let timing = CycleBreakdown {
            prefill: first_window_at as u64,
            compute: windows,
            drain: DRAIN_CYCLES,
            reload: 0,
        };
        Ok((out, counters, timing))
    }

    /// Channel-parallel dot product: one input position (all its channels)
    /// per cycle.
    fn fc_engine(&self, x: &TernaryTensor, cout: usize) -> (ConvResult, ActivityCounters, CycleBreakdown) {
        let xs = x.to_i8();
        let c = *x.shape().last().unwrap_or(&1);
        let positions = xs.len() / c;
        let mut out = ConvResult::zeros(&[cout]);
        let mut toggles = 0;
        let mut n_active = 0u64;
        for (o, u) in self.ocus.units[..cout].iter().enumerate() {
            if u.gated {
                continue;
            }
            n_active += 1;
            let mut acc = 0;
            for p in 0..positions {
                let (a, t) = u.mac_slice(&xs[p * c..(p + 1) * c], p * c);
                acc += a;
                toggles += t;
            }
            out.acc[o] = acc;
        }
        let counters = ActivityCounters {
            mac_ops: positions as u64 * n_active * c as u64,
            nonzero_mac_ops: toggles,
            toggles,
            fmap_reads: xs.len() as u64,
            ..Default::default()
        };
        let timing = CycleBreakdown {
            prefill: 0,
            compute: positions as u64,
            drain: DRAIN_CYCLES,
            reload: 0,
        };
        (out, counters, timing)
    }

    fn run_maxpool(&mut self, layer: &ResolvedLayer, x: &TernaryTensor) -> LayerRun {
        let out = pool2x2(x);
        let (w, (ho, wo)) = (x.shape()[1], (out.shape()[0], out.shape()[1]));
        let timing = CycleBreakdown {
            prefill: (w + 2) as u64,
            compute: (ho * wo) as u64,
            drain: DRAIN_CYCLES,
            reload: 0,
        };
        let counters = ActivityCounters {
            cycles: timing.total(),
            fmap_reads: x.len() as u64,
            fmap_writes: out.len() as u64,
            ..Default::default()
        };
        LayerRun {
            index: layer.index,
            output: LayerValue::Ternary(out),
            counters,
            timing,
            invocations: 1,
        }
    }

    /// Gathers the last `steps` vectors from the TCN memory as a `T x C`
    /// sequence, reading three steps per access.
    pub fn read_tcn_sequence(&self, steps: usize, width: usize) -> Result<TernaryTensor, AccelError> {
        let len = self.tcn.len();
        if len < steps {
            return Err(AccelError::TcnUnderflow {
                needed: steps,
                available: len,
            });
        }
        let first = (len - steps) as isize;
        let mut x = TernaryTensor::zeros(&[steps, width]);
        let mut t = 0;
        while t < steps {
            // align the last access to the newest step
            let start = (first + t as isize).min(len as isize - 3);
            let win = self.tcn.window_padded(start)?;
            for (k, v) in win.iter().enumerate() {
                let step = start + k as isize - first;
                if step < t as isize || step >= steps as isize {
                    continue;
                }
                for c in 0..width {
                    x.set(&[step as usize, c], v[c]);
                }
            }
            t = (start + 3 - first) as usize;
        }
        Ok(x)
    }

    /// Runs one inference the way the on-chip controller sequences it.
    ///
    /// Stream networks run the 2D layers once per frame and push each
    /// flattened feature vector into the TCN memory. The newest `hop` frames
    /// belong to the measured inference; earlier frames count as warm-up.
    /// The TCN layers then read the newest `steps` vectors. History already
    /// in the memory from earlier calls is used.
    pub fn run_network(&mut self, net: &Network, input: &NetworkInput) -> Result<NetworkRun, AccelError> {
        check_input_shapes(net, input)?;
        let plan = &net.plan;
        let mut layers = Vec::with_capacity(plan.layers.len());
        let mut warmup = ActivityCounters::default();
        let mut warmup_frames = 0;
        let mut tcn_input = None;

        match input {
            NetworkInput::Frame(x) => {
                self.run_chain(net, plan.frame_layers(), x.clone(), &mut layers)?;
            }
            NetworkInput::Frames(frames) => {
                let steps = plan.tcn_steps.expect("stream networks have steps");
                let width = plan.tcn_width.expect("stream networks have a TCN width");
                let measured_from = frames.len().saturating_sub(plan.hop());
                for (i, f) in frames.iter().enumerate() {
                    let mut runs = Vec::new();
                    let last = self.run_chain(net, plan.frame_layers(), f.clone(), &mut runs)?;
                    self.tcn.push_tensor(&flatten(&last))?;
                    if i < measured_from {
                        warmup += runs.iter().map(|r| r.counters).sum();
                        warmup_frames += 1;
                    } else if layers.is_empty() {
                        layers = runs;
                    } else {
                        for (acc, r) in layers.iter_mut().zip(runs) {
                            acc.absorb(r);
                        }
                    }
                }
                let x = self.read_tcn_sequence(steps, width)?;
                tcn_input = Some(x.clone());
                self.run_chain(net, plan.sequence_layers(), x, &mut layers)?;
            }
            NetworkInput::Sequence(x) => {
                let (steps, width) = (x.shape()[0], x.shape()[1]);
                for t in 0..steps {
                    let row: Vec<Trit> = (0..width).map(|c| x.get(&[t, c])).collect();
                    self.tcn.push(&row)?;
                }
                let x = self.read_tcn_sequence(steps, width)?;
                tcn_input = Some(x.clone());
                self.run_chain(net, plan.sequence_layers(), x, &mut layers)?;
            }
        }

        let last = &layers.last().expect("validated networks have layers").output;
        let prediction = Prediction::from_output(last, plan.output());
        Ok(NetworkRun {
            layers,
            warmup,
            warmup_frames,
            tcn_input,
            prediction,
        })
    }

    fn run_chain(
        &mut self,
        net: &Network,
        layers: &[ResolvedLayer],
        mut x: TernaryTensor,
        runs: &mut Vec<LayerRun>,
    ) -> Result<TernaryTensor, AccelError> {
        for layer in layers {
            let r = self.run_layer(layer, net.params[layer.index].as_ref(), &x)?;
            if let LayerValue::Ternary(t) = &r.output {
                x = t.clone();
            }
            runs.push(r);
        }
        Ok(x)
    }
}

fn check_input_shapes(net: &Network, input: &NetworkInput) -> Result<(), AccelError> {
    let ok = match (&net.plan.config.input, input) {
        (InputSpec::Frame { shape }, NetworkInput::Frame(t)) => t.shape() == shape,
        (InputSpec::Stream { shape, .. }, NetworkInput::Frames(f)) => {
            !f.is_empty() && f.iter().all(|t| t.shape() == shape)
        }
        (InputSpec::Sequence { shape }, NetworkInput::Sequence(t)) => t.shape() == shape,
        _ => false,
    };
    if ok {
        Ok(())
    } else {
        Err(AccelError::Shape(format!(
            "input does not match {:?}",
            net.plan.config.input
        )))
    }
}

/// Pooling unit behind the threshold stage: 2x2 max under -1 < 0 < +1.
fn pool2x2(x: &TernaryTensor) -> TernaryTensor {
    let (h, w, c) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let xs = x.to_i8();
    let mut out = vec![0i8; (h / 2) * (w / 2) * c];
    for y in 0..h / 2 {
        for xx in 0..w / 2 {
            for ch in 0..c {
                let at = |dy: usize, dx: usize| xs[((2 * y + dy) * w + 2 * xx + dx) * c + ch];
                out[(y * (w / 2) + xx) * c + ch] = at(0, 0).max(at(0, 1)).max(at(1, 0)).max(at(1, 1));
            }
        }
    }
    TernaryTensor::from_i8(&[h / 2, w / 2, c], &out).expect("pooled values are trits")
}

#[cfg(test)]
mod tests;
