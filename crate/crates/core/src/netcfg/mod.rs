//! Network description files: parsing, validation against the hardware
//! limits, and shape resolution.
//!
//! Networks are TOML documents:
//!
//! ```toml
//! schema_version = 1
//! name = "cifar10-9layer"
//! dataset = "cifar10"
//!
//! [input]
//! kind = "frame"          # frame | stream | sequence
//! shape = [32, 32, 96]    # H W C (frame, stream) or T C (sequence)
//! # steps = 5             # stream only: TCN window length per inference
//! # hop = 1               # stream only: new frames per inference
//!
//! [[layer]]
//! kind = "conv2d"         # conv2d | tcn1d | maxpool | fc
//! cout = 96
//! pool = true
//! ```
//!
//! See the README for the full field reference.

pub mod blob;
pub mod lower;
pub mod synth;

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::accel::HardwareConfig;
use crate::oracle::Padding2d;
use crate::tcn_map::{self, TcnLayerSpec};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error(transparent)]
    Validation(#[from] ValidationError),
}

/// A violated network constraint.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub struct ValidationError {
    /// `None` for network-level constraints.
    pub layer: Option<usize>,
    pub kind: Option<&'static str>,
    pub message: String,
}

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.layer, self.kind) {
            (Some(i), Some(k)) => write!(f, "layer {i} ({k}): {}", self.message),
            (Some(i), None) => write!(f, "layer {i}: {}", self.message),
            _ => write!(f, "network: {}", self.message),
        }
    }
}

/// Input of a network.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum InputSpec {
    /// A single `H x W x C` feature map per inference.
    Frame { shape: [usize; 3] },
    /// A stream of `H x W x C` frames; the 2D layers run once per frame and
    /// the TCN layers see the last `steps` feature vectors. Each inference
    /// consumes `hop` new frames (1 = sliding window, `steps` = whole clip).
    Stream {
        shape: [usize; 3],
        steps: usize,
        #[serde(default = "default_hop")]
        hop: usize,
    },
    /// A `T x C` sequence fed straight into the TCN memory.
    Sequence { shape: [usize; 2] },
}

fn default_hop() -> usize {
    1
}

/// Folded-sequence annotation of a lowered TCN layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FoldAnnotation {
    pub dilation: usize,
    pub steps: usize,
    /// Kernel length of the original 1D layer (informational).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub taps: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Conv2dConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cin: Option<usize>,
    pub cout: usize,
    #[serde(default = "default_kernel")]
    pub kernel: usize,
    #[serde(default, skip_serializing_if = "is_false")]
    pub pool: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub active_channels: Option<usize>,
    /// `[top, bottom, left, right]`; defaults to 1 on every edge.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub padding: Option<[usize; 4]>,
    /// Present on lowered TCN layers: the input is a `T x C` sequence that
    /// is folded to `ceil(T/D) x D` before the convolution and unfolded after.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fold: Option<FoldAnnotation>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tcn1dConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cin: Option<usize>,
    pub cout: usize,
    pub kernel: usize,
    pub dilation: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub active_channels: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FcConfig {
    pub cout: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub active_channels: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaxpoolConfig {}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LayerConfig {
    Conv2d(Conv2dConfig),
    Tcn1d(Tcn1dConfig),
    Maxpool(MaxpoolConfig),
    Fc(FcConfig),
}

impl LayerConfig {
    pub fn kind_name(&self) -> &'static str {
        match self {
            LayerConfig::Conv2d(c) if c.fold.is_some() => "conv2d/folded",
            LayerConfig::Conv2d(_) => "conv2d",
            LayerConfig::Tcn1d(_) => "tcn1d",
            LayerConfig::Maxpool(_) => "maxpool",
            LayerConfig::Fc(_) => "fc",
        }
    }
}

fn default_kernel() -> usize {
    3
}

fn is_false(b: &bool) -> bool {
    !*b
}

/// Declarative network description as written in a `.net` file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    pub schema_version: u32,
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub dataset: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub notes: String,
    pub input: InputSpec,
    #[serde(rename = "layer")]
    pub layers: Vec<LayerConfig>,
}

/// Activation shape between layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Shape {
    Spatial { h: usize, w: usize, c: usize },
    Sequence { t: usize, c: usize },
    Vector { n: usize },
}

impl Shape {
    pub fn dims(&self) -> Vec<usize> {
        match *self {
            Shape::Spatial { h, w, c } => vec![h, w, c],
            Shape::Sequence { t, c } => vec![t, c],
            Shape::Vector { n } => vec![n],
        }
    }

    pub fn len(&self) -> usize {
        self.dims().iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn channels(&self) -> usize {
        match *self {
            Shape::Spatial { c, .. } | Shape::Sequence { c, .. } => c,
            Shape::Vector { n } => n,
        }
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let d = self.dims();
        let s: Vec<String> = d.iter().map(|x| x.to_string()).collect();
        f.write_str(&s.join("x"))
    }
}

/// Fully resolved operation of one layer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LayerOp {
    Conv2d {
        padding: Padding2d,
        pool: bool,
        /// `Some` for folded (lowered TCN) layers.
        fold: Option<FoldAnnotation>,
    },
    Tcn1d {
        spec: TcnLayerSpec,
    },
    Maxpool,
    Fc,
}

/// A layer after validation, with concrete shapes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResolvedLayer {
    pub index: usize,
    pub kind: &'static str,
    pub op: LayerOp,
    pub input: Shape,
    pub output: Shape,
    pub cin: usize,
    pub cout: usize,
    /// Output channels computed by un-gated OCUs.
    pub active_channels: usize,
    /// `None` for layers without parameters (maxpool).
    pub weight_shape: Option<Vec<usize>>,
    /// True when this layer consumes 2D feature maps flattened into TCN
    /// memory vectors (the single 2D-to-TCN transition).
    pub reads_tcn_memory: bool,
    pub terminal: bool,
}

/// Validated network with resolved shapes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkPlan {
    pub config: NetworkConfig,
    pub layers: Vec<ResolvedLayer>,
    /// Index of the first layer that runs on the TCN sequence, if any.
    pub tcn_start: Option<usize>,
    /// TCN window length (steps per inference), if the network has TCN layers.
    pub tcn_steps: Option<usize>,
    /// Width of the vectors pushed into the TCN memory.
    pub tcn_width: Option<usize>,
}

impl NetworkPlan {
    pub fn output(&self) -> Shape {
        self.layers.last().map(|l| l.output).unwrap_or(match self.config.input {
            InputSpec::Frame { shape } | InputSpec::Stream { shape, .. } => Shape::Spatial {
                h: shape[0],
                w: shape[1],
                c: shape[2],
            },
            InputSpec::Sequence { shape } => Shape::Sequence {
                t: shape[0],
                c: shape[1],
            },
        })
    }

    /// Layers that run once per frame, before the TCN transition.
    /// New frames consumed per inference; 1 for non-stream inputs.
    pub fn hop(&self) -> usize {
        match self.config.input {
            InputSpec::Stream { hop, .. } => hop,
            _ => 1,
        }
    }

    pub fn frame_layers(&self) -> &[ResolvedLayer] {
        &self.layers[..self.tcn_start.unwrap_or(self.layers.len())]
    }

    pub fn sequence_layers(&self) -> &[ResolvedLayer] {
        &self.layers[self.tcn_start.unwrap_or(self.layers.len())..]
    }
}

/// Reads and validates a network file.
pub fn parse_network(path: impl AsRef<Path>) -> Result<NetworkPlan, ConfigError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_network_str(&text)
}

pub fn parse_network_str(text: &str) -> Result<NetworkPlan, ConfigError> {
    let cfg: NetworkConfig = toml::from_str(text).map_err(|e| {
        let (line, column) = e
            .span()
            .map(|s| line_col(text, s.start))
            .unwrap_or((0, 0));
        ConfigError::Parse {
            line,
            column,
            message: e.message().trim().to_string(),
        }
    })?;
    Ok(validate(cfg, &HardwareConfig::default())?)
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.len() - before.rfind('\n').map(|i| i + 1).unwrap_or(0) + 1;
    (line, column)
}

pub fn to_toml(cfg: &NetworkConfig) -> String {
    toml::to_string(cfg).expect("network config serializes")
}

struct LayerCtx {
    index: usize,
    kind: &'static str,
}

impl LayerCtx {
    fn err(&self, message: impl Into<String>) -> ValidationError {
        ValidationError {
            layer: Some(self.index),
            kind: Some(self.kind),
            message: message.into(),
        }
    }
}

fn net_err(message: impl Into<String>) -> ValidationError {
    ValidationError {
        layer: None,
        kind: None,
        message: message.into(),
    }
}

fn check_channels(ctx: &LayerCtx, field: &str, v: usize, hw: &HardwareConfig) -> Result<(), ValidationError> {
    if v == 0 {
        return Err(ctx.err(format!("{field} must be >= 1")));
    }
    if v > hw.max_channels {
        return Err(ctx.err(format!(
            "{field} = {v} exceeds the {}-channel limit",
            hw.max_channels
        )));
    }
    Ok(())
}

fn check_fmap(ctx: &LayerCtx, what: &str, h: usize, w: usize, hw: &HardwareConfig) -> Result<(), ValidationError> {
    if h > hw.max_fmap_h || w > hw.max_fmap_w {
        return Err(ctx.err(format!(
            "{what} {h}x{w} exceeds the {}x{} feature map limit",
            hw.max_fmap_h, hw.max_fmap_w
        )));
    }
    Ok(())
}

fn check_active(ctx: &LayerCtx, active: Option<usize>, cout: usize) -> Result<usize, ValidationError> {
    match active {
        None => Ok(cout),
        Some(a) if a >= 1 && a <= cout => Ok(a),
        Some(a) => Err(ctx.err(format!("active_channels = {a} must be in 1..={cout}"))),
    }
}

fn check_cin(ctx: &LayerCtx, declared: Option<usize>, actual: usize) -> Result<(), ValidationError> {
    match declared {
        Some(c) if c != actual => Err(ctx.err(format!(
            "declared cin = {c} but the incoming activation has {actual} channels"
        ))),
        _ => Ok(()),
    }
}

/// Validates a configuration against `hw` and resolves all layer shapes.
pub fn validate(cfg: NetworkConfig, hw: &HardwareConfig) -> Result<NetworkPlan, ValidationError> {
    if cfg.schema_version != SCHEMA_VERSION {
        return Err(net_err(format!(
            "unsupported schema_version {} (expected {SCHEMA_VERSION})",
            cfg.schema_version
        )));
    }
    if cfg.layers.is_empty() {
        return Err(net_err("network has no layers"));
    }

    let (mut shape, stream_steps) = match cfg.input {
        InputSpec::Frame { shape } => (
            Shape::Spatial {
                h: shape[0],
                w: shape[1],
                c: shape[2],
            },
            None,
        ),
        InputSpec::Stream { shape, steps, hop } => {
            if hop == 0 || hop > steps {
                return Err(net_err(format!("stream hop = {hop} must be in 1..={steps}")));
            }
            (
            Shape::Spatial {
                h: shape[0],
                w: shape[1],
                c: shape[2],
            },
            Some(steps),
        )
        }
        InputSpec::Sequence { shape } => (
            Shape::Sequence {
                t: shape[0],
                c: shape[1],
            },
            None,
        ),
    };
    if shape.dims().contains(&0) {
        return Err(net_err("input dimensions must be >= 1"));
    }
    match shape {
        Shape::Spatial { h, w, c } => {
            if h > hw.max_fmap_h || w > hw.max_fmap_w {
                return Err(net_err(format!(
                    "input {h}x{w} exceeds the {}x{} feature map limit",
                    hw.max_fmap_h, hw.max_fmap_w
                )));
            }
            if c > hw.max_channels {
                return Err(net_err(format!(
                    "input has {c} channels, exceeding the {}-channel limit",
                    hw.max_channels
                )));
            }
        }
        Shape::Sequence { t, c } => {
            if t > hw.tcn_steps {
                return Err(net_err(format!(
                    "input sequence of {t} steps exceeds the {}-step TCN memory",
                    hw.tcn_steps
                )));
            }
            if c > hw.tcn_width {
                return Err(net_err(format!(
                    "sequence vectors of {c} trits exceed the {}-trit TCN memory width",
                    hw.tcn_width
                )));
            }
        }
        Shape::Vector { .. } => unreachable!(),
    }
    if let Some(steps) = stream_steps {
        if steps == 0 || steps > hw.tcn_steps {
            return Err(net_err(format!(
                "stream steps = {steps} must be in 1..={} (TCN memory depth)",
                hw.tcn_steps
            )));
        }
    }

    let n = cfg.layers.len();
    let mut layers = Vec::with_capacity(n);
    let mut tcn_start = match cfg.input {
        InputSpec::Sequence { .. } => Some(0),
        _ => None,
    };
    let mut tcn_width = match shape {
        Shape::Sequence { c, .. } => Some(c),
        _ => None,
    };
    let mut tcn_taps: Vec<(usize, usize)> = Vec::new();

    for (index, layer) in cfg.layers.iter().enumerate() {
        let ctx = LayerCtx {
            index,
            kind: layer.kind_name(),
        };
        let terminal = index + 1 == n;
        let mut reads_tcn_memory = false;
        let sequence_layer = match layer {
            LayerConfig::Tcn1d(_) => true,
            LayerConfig::Conv2d(c) => c.fold.is_some(),
            _ => false,
        };
        let input = match shape {
            Shape::Spatial { h, w, c } if sequence_layer => {
                let Some(steps) = stream_steps else {
                    return Err(ctx.err("a 2D-to-TCN transition needs a stream input with `steps`"));
                };
                if tcn_start.is_some() {
                    return Err(ctx.err("only one 2D-to-TCN transition is allowed"));
                }
                let width = h * w * c;
                if width > hw.tcn_width {
                    return Err(ctx.err(format!(
                        "flattened feature vector of {width} trits ({h}x{w}x{c}) exceeds \
                         the {}-trit TCN memory width",
                        hw.tcn_width
                    )));
                }
                tcn_start = Some(index);
                tcn_width = Some(width);
                reads_tcn_memory = true;
                Shape::Sequence { t: steps, c: width }
            }
            other => other,
        };

        let resolved = match layer {
            LayerConfig::Conv2d(c) => {
                if c.kernel != hw.kernel {
                    return Err(ctx.err(format!(
                        "kernel = {} but the datapath only supports {k}x{k} kernels",
                        c.kernel,
                        k = hw.kernel
                    )));
                }
                check_channels(&ctx, "cout", c.cout, hw)?;
                let active = check_active(&ctx, c.active_channels, c.cout)?;
                let pad = c
                    .padding
                    .map(|[top, bottom, left, right]| Padding2d {
                        top,
                        bottom,
                        left,
                        right,
                    })
                    .unwrap_or(Padding2d::symmetric(1));
                if pad.as_array().iter().any(|&p| p > 2) {
                    return Err(ctx.err("padding per edge must be <= 2"));
                }
                match (c.fold, input) {
                    (None, Shape::Spatial { h, w, c: cin }) => {
                        check_cin(&ctx, c.cin, cin)?;
                        check_channels(&ctx, "cin", cin, hw)?;
                        check_fmap(&ctx, "input", h, w, hw)?;
                        let ph = h + pad.top + pad.bottom;
                        let pw = w + pad.left + pad.right;
                        if ph < c.kernel || pw < c.kernel {
                            return Err(ctx.err("padded input smaller than the kernel"));
                        }
                        let (mut ho, mut wo) = (ph - c.kernel + 1, pw - c.kernel + 1);
                        check_fmap(&ctx, "output", ho, wo, hw)?;
                        if c.pool {
                            if ho % 2 != 0 || wo % 2 != 0 {
                                return Err(ctx.err(format!(
                                    "2x2 pooling needs even output dims, got {ho}x{wo}"
                                )));
                            }
                            ho /= 2;
                            wo /= 2;
                        }
                        ResolvedLayer {
                            index,
                            kind: ctx.kind,
                            op: LayerOp::Conv2d {
                                padding: pad,
                                pool: c.pool,
                                fold: None,
                            },
                            input,
                            output: Shape::Spatial {
                                h: ho,
                                w: wo,
                                c: c.cout,
                            },
                            cin,
                            cout: c.cout,
                            active_channels: active,
                            weight_shape: Some(vec![c.kernel, c.kernel, cin, c.cout]),
                            reads_tcn_memory: false,
                            terminal,
                        }
                    }
                    (Some(fold), Shape::Sequence { t, c: cin }) => {
                        check_cin(&ctx, c.cin, cin)?;
                        check_channels(&ctx, "cin", cin, hw)?;
                        if c.pool {
                            return Err(ctx.err("folded layers cannot pool"));
                        }
                        if fold.dilation == 0 {
                            return Err(ctx.err("fold dilation must be >= 1"));
                        }
                        if fold.steps != t {
                            return Err(ctx.err(format!(
                                "fold steps = {} but the incoming sequence has {t} steps",
                                fold.steps
                            )));
                        }
                        let rows = t.div_ceil(fold.dilation);
                        check_fmap(&ctx, "folded map", rows, fold.dilation, hw)?;
                        let pw = fold.dilation + pad.left + pad.right;
                        if rows + pad.top + pad.bottom != rows + 2 || pw != fold.dilation + 2 {
                            return Err(ctx.err(
                                "folded layers need padding that preserves the folded shape \
                                 (top + bottom = 2, left = right = 1)",
                            ));
                        }
                        let taps = fold.taps.unwrap_or(3);
                        tcn_taps.push((taps, fold.dilation));
                        ResolvedLayer {
                            index,
                            kind: ctx.kind,
                            op: LayerOp::Conv2d {
                                padding: pad,
                                pool: false,
                                fold: Some(fold),
                            },
                            input,
                            output: Shape::Sequence { t, c: c.cout },
                            cin,
                            cout: c.cout,
                            active_channels: active,
                            weight_shape: Some(vec![c.kernel, c.kernel, cin, c.cout]),
                            reads_tcn_memory,
                            terminal,
                        }
                    }
                    (None, other) => {
                        return Err(ctx.err(format!(
                            "conv2d needs a spatial input, got {other}"
                        )))
                    }
                    (Some(_), other) => {
                        return Err(ctx.err(format!(
                            "folded conv2d needs a sequence input, got {other}"
                        )))
                    }
                }
            }
            LayerConfig::Tcn1d(tc) => {
                check_channels(&ctx, "cout", tc.cout, hw)?;
                let active = check_active(&ctx, tc.active_channels, tc.cout)?;
                let (t, cin) = match input {
                    Shape::Sequence { t, c } => (t, c),
                    Shape::Spatial { .. } => unreachable!("spatial inputs are converted above"),
                    Shape::Vector { .. } => {
                        return Err(ctx.err("tcn1d cannot follow a vector output"))
                    }
                };
                check_cin(&ctx, tc.cin, cin)?;
                check_channels(&ctx, "cin", cin, hw)?;
                let spec = TcnLayerSpec {
                    kernel: tc.kernel,
                    dilation: tc.dilation,
                    cin,
                    cout: tc.cout,
                    steps: t,
                };
                spec.validate(hw).map_err(|e| ctx.err(e.to_string()))?;
                tcn_taps.push((tc.kernel, tc.dilation));
                ResolvedLayer {
                    index,
                    kind: ctx.kind,
                    op: LayerOp::Tcn1d { spec },
                    input,
                    output: Shape::Sequence { t, c: tc.cout },
                    cin,
                    cout: tc.cout,
                    active_channels: active,
                    weight_shape: Some(vec![tc.kernel, cin, tc.cout]),
                    reads_tcn_memory,
                    terminal,
                }
            }
            LayerConfig::Maxpool(_) => {
                let Shape::Spatial { h, w, c } = input else {
                    return Err(ctx.err(format!("maxpool needs a spatial input, got {input}")));
                };
                if h % 2 != 0 || w % 2 != 0 {
                    return Err(ctx.err(format!("2x2 pooling needs even dims, got {h}x{w}")));
                }
                ResolvedLayer {
                    index,
                    kind: ctx.kind,
                    op: LayerOp::Maxpool,
                    input,
                    output: Shape::Spatial {
                        h: h / 2,
                        w: w / 2,
                        c,
                    },
                    cin: c,
                    cout: c,
                    active_channels: c,
                    weight_shape: None,
                    reads_tcn_memory: false,
                    terminal,
                }
            }
            LayerConfig::Fc(fc) => {
                if !terminal {
                    return Err(ctx.err("fc layers are only supported as the final classifier"));
                }
                check_channels(&ctx, "cout", fc.cout, hw)?;
                let active = check_active(&ctx, fc.active_channels, fc.cout)?;
                if let Shape::Spatial { h, w, .. } = input {
                    check_fmap(&ctx, "input", h, w, hw)?;
                }
                let f = input.len();
                ResolvedLayer {
                    index,
                    kind: ctx.kind,
                    op: LayerOp::Fc,
                    input,
                    output: Shape::Vector { n: fc.cout },
                    cin: f,
                    cout: fc.cout,
                    active_channels: active,
                    weight_shape: Some(vec![f, fc.cout]),
                    reads_tcn_memory: false,
                    terminal,
                }
            }
        };
        shape = resolved.output;
        layers.push(resolved);
    }

    if stream_steps.is_some() && tcn_start.is_none() {
        return Err(net_err(
            "stream inputs need a tcn1d layer consuming the per-frame feature vectors",
        ));
    }
    let tcn_steps = match cfg.input {
        InputSpec::Stream { steps, .. } => Some(steps),
        InputSpec::Sequence { shape } => Some(shape[0]),
        InputSpec::Frame { .. } => None,
    };
    if !tcn_taps.is_empty() {
        let rf = tcn_map::receptive_field_of(&tcn_taps);
        if rf > hw.tcn_steps {
            return Err(net_err(format!(
                "TCN receptive field of {rf} steps exceeds the {}-step TCN memory",
                hw.tcn_steps
            )));
        }
    }

    Ok(NetworkPlan {
        config: cfg,
        layers,
        tcn_start,
        tcn_steps,
        tcn_width,
    })
}

/// Failure to assemble a runnable network from files.
#[derive(Debug, Error)]
pub enum LoadError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Blob(#[from] blob::BlobError),
    #[error(transparent)]
    Network(#[from] crate::network::NetworkError),
}

impl LoadError {
    /// True for missing or unreadable files (as opposed to bad contents).
    pub fn is_io(&self) -> bool {
        matches!(
            self,
            LoadError::Config(ConfigError::Io { .. }) | LoadError::Blob(blob::BlobError::Io { .. })
        )
    }
}

/// Parses a network file and binds the weights file to it.
pub fn load_network(
    net_path: impl AsRef<Path>,
    weights_path: impl AsRef<Path>,
    opts: blob::ReadOptions,
) -> Result<crate::network::Network, LoadError> {
    let plan = parse_network(net_path)?;
    let blobs = blob::read_file(weights_path, opts)?;
    let params = blob::blobs_to_params(&blobs, plan.layers.len())?;
    Ok(crate::network::Network::new(plan, params)?)
}

/// Reads an activation file as the input of `plan`: one frame for frame
/// networks, all frames for stream networks, one `T x C` blob for sequence
/// networks.
pub fn load_input(plan: &NetworkPlan, path: impl AsRef<Path>) -> Result<crate::network::NetworkInput, LoadError> {
    use crate::network::{NetworkError, NetworkInput};
    let mut frames = blob::blobs_to_tensors(&blob::read_file(path, blob::ReadOptions::default())?)?;
    let input = match plan.config.input {
        InputSpec::Stream { .. } => NetworkInput::Frames(frames),
        _ if frames.len() != 1 => {
            return Err(NetworkError::Input(format!(
                "expected one activation blob, found {}",
                frames.len()
            ))
            .into())
        }
        InputSpec::Frame { .. } => NetworkInput::Frame(frames.remove(0)),
        InputSpec::Sequence { .. } => NetworkInput::Sequence(frames.remove(0)),
    };
    Ok(input)
}

pub fn save_input(path: impl AsRef<Path>, input: &crate::network::NetworkInput) -> Result<(), blob::BlobError> {
    let frames: Vec<crate::trit::TernaryTensor> = input.tensors().into_iter().cloned().collect();
    blob::write_file(path, &blob::tensors_to_blobs(&frames))
}
