//! A validated network bound to its parameters, plus the input and output
//! types shared by the oracle and the accelerator model.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netcfg::{InputSpec, LayerOp, NetworkPlan, ResolvedLayer, Shape};
use crate::oracle::{ConvResult, OracleError, ThresholdPair};
use crate::tcn_map::MapError;
use crate::trit::{TernaryTensor, Trit};

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("layer {layer}: {message}")]
    Params { layer: usize, message: String },
    #[error("input: {0}")]
    Input(String),
    #[error("TCN underflow: the window needs {needed} steps but only {available} were pushed")]
    TcnUnderflow { needed: usize, available: usize },
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Map(#[from] MapError),
}

/// Weights and thresholds of one layer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerParams {
    pub weights: TernaryTensor,
    /// One pair per output channel. `None` marks a raw terminal layer whose
    /// integer accumulators are the class scores.
    pub thresholds: Option<Vec<ThresholdPair>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Network {
    pub plan: NetworkPlan,
    /// Indexed like `plan.layers`; `None` for parameter-free layers.
    pub params: Vec<Option<LayerParams>>,
}

impl Network {
    /// Binds parameters to a plan, checking every shape.
    pub fn new(plan: NetworkPlan, params: Vec<Option<LayerParams>>) -> Result<Self, NetworkError> {
        if params.len() != plan.layers.len() {
            return Err(NetworkError::Params {
                layer: params.len().min(plan.layers.len()),
                message: format!(
                    "{} parameter sets for {} layers",
                    params.len(),
                    plan.layers.len()
                ),
            });
        }
        for (layer, p) in plan.layers.iter().zip(&params) {
            check_params(layer, p.as_ref())?;
        }
        Ok(Self { plan, params })
    }

    pub fn name(&self) -> &str {
        &self.plan.config.name
    }

    /// Number of frames a [`NetworkInput::Frames`] input must hold at least.
    pub fn min_frames(&self) -> usize {
        match self.plan.config.input {
            InputSpec::Stream { steps, .. } => steps,
            _ => 1,
        }
    }
}

fn check_params(layer: &ResolvedLayer, p: Option<&LayerParams>) -> Result<(), NetworkError> {
    let err = |message: String| NetworkError::Params {
        layer: layer.index,
        message,
    };
    match (&layer.weight_shape, p) {
        (None, None) => Ok(()),
        (None, Some(_)) => Err(err(format!("{} layers take no weights", layer.kind))),
        (Some(_), None) => Err(err("missing weights".into())),
        (Some(shape), Some(p)) => {
            if p.weights.shape() != shape.as_slice() {
                return Err(err(format!(
                    "weight shape {:?} does not match the expected {:?}",
                    p.weights.shape(),
                    shape
                )));
            }
            match &p.thresholds {
                Some(th) if th.len() != layer.cout => Err(err(format!(
                    "{} threshold pairs for {} output channels",
                    th.len(),
                    layer.cout
                ))),
                None if !layer.terminal => {
                    Err(err("only the final layer may omit thresholds".into()))
                }
                None if matches!(layer.op, LayerOp::Conv2d { pool: true, .. }) => {
                    Err(err("a pooling layer needs thresholds".into()))
                }
                _ => Ok(()),
            }
        }
    }
}

/// One inference worth of input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NetworkInput {
    /// `H x W x C` map for frame networks.
    Frame(TernaryTensor),
    /// Successive `H x W x C` frames for stream networks, oldest first. The
    /// last frame is the one being classified; earlier frames fill the TCN
    /// history.
    Frames(Vec<TernaryTensor>),
    /// `T x C` sequence for sequence networks.
    Sequence(TernaryTensor),
}

impl NetworkInput {
    /// Checks the input against the network's declared input.
    pub fn check(&self, net: &Network) -> Result<(), NetworkError> {
        let bad = |m: String| Err(NetworkError::Input(m));
        match (&net.plan.config.input, self) {
            (InputSpec::Frame { shape }, NetworkInput::Frame(t)) => {
                if t.shape() != shape {
                    return bad(format!("expected {shape:?}, got {:?}", t.shape()));
                }
            }
            (InputSpec::Stream { shape, steps, .. }, NetworkInput::Frames(frames)) => {
                if let Some(f) = frames.iter().find(|f| f.shape() != shape) {
                    return bad(format!("expected frames of {shape:?}, got {:?}", f.shape()));
                }
                if frames.len() < *steps {
                    return Err(NetworkError::TcnUnderflow {
                        needed: *steps,
                        available: frames.len(),
                    });
                }
            }
            (InputSpec::Sequence { shape }, NetworkInput::Sequence(t)) => {
                if t.shape() != shape {
                    return bad(format!("expected {shape:?}, got {:?}", t.shape()));
                }
            }
            (spec, _) => return bad(format!("input kind does not match {spec:?}")),
        }
        Ok(())
    }

    pub fn tensors(&self) -> Vec<&TernaryTensor> {
        match self {
            NetworkInput::Frame(t) | NetworkInput::Sequence(t) => vec![t],
            NetworkInput::Frames(f) => f.iter().collect(),
        }
    }
}

/// Output of one layer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LayerValue {
    Ternary(TernaryTensor),
    /// Accumulators of a raw terminal layer.
    Raw(ConvResult),
}

impl LayerValue {
    pub fn shape(&self) -> &[usize] {
        match self {
            LayerValue::Ternary(t) => t.shape(),
            LayerValue::Raw(r) => &r.shape,
        }
    }

    /// Values as integers, row-major.
    pub fn values(&self) -> Vec<i32> {
        match self {
            LayerValue::Ternary(t) => t.to_i8().into_iter().map(i32::from).collect(),
            LayerValue::Raw(r) => r.acc.clone(),
        }
    }

    pub fn as_ternary(&self) -> Option<&TernaryTensor> {
        match self {
            LayerValue::Ternary(t) => Some(t),
            LayerValue::Raw(_) => None,
        }
    }
}

/// Class decision of one inference.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub class: usize,
    pub scores: Vec<i64>,
}

impl Prediction {
    /// Scores from the terminal output: the vector itself for fc layers, the
    /// last time step for sequences, per-channel sums for feature maps.
    /// The class is the first index of the maximum score.
    pub fn from_output(value: &LayerValue, shape: Shape) -> Self {
        let v = value.values();
        let scores: Vec<i64> = match shape {
            Shape::Vector { .. } => v.iter().map(|&x| x as i64).collect(),
            Shape::Sequence { t, c } => v[(t - 1) * c..t * c].iter().map(|&x| x as i64).collect(),
            Shape::Spatial { c, .. } => {
                let mut s = vec![0i64; c];
                for (i, &x) in v.iter().enumerate() {
                    s[i % c] += x as i64;
                }
                s
            }
        };
        let mut class = 0;
        for (i, &s) in scores.iter().enumerate() {
            if s > scores[class] {
                class = i;
            }
        }
        Self { class, scores }
    }
}

/// Zeroes channels `[active..)` of a channels-last tensor.
pub(crate) fn gate_ternary(t: &mut TernaryTensor, active: usize) {
    let c = *t.shape().last().unwrap_or(&0);
    if active >= c {
        return;
    }
    for i in 0..t.len() {
        if i % c >= active {
            t.set_flat(i, Trit::Zero);
        }
    }
}

pub(crate) fn gate_raw(r: &mut ConvResult, active: usize) {
    let c = r.channels();
    if active >= c {
        return;
    }
    for (i, a) in r.acc.iter_mut().enumerate() {
        if i % c >= active {
            *a = 0;
        }
    }
}

/// Flattens a terminal or intermediate tensor to a 1D vector.
pub(crate) fn flatten(t: &TernaryTensor) -> TernaryTensor {
    t.reshape(&[t.len()]).expect("flatten keeps the element count")
}
