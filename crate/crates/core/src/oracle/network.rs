//! Whole-network reference evaluation by chaining the layer oracles.
//!
//! TCN layers are evaluated directly with [`dilated_conv1d_ref`], never
//! through the 2D lowering, so this chain is an independent check of the
//! accelerator's mapped execution.

use super::{
    conv2d_ref_padded, dilated_conv1d_ref, fc_accumulate, maxpool2x2_ref, ternarize, ConvResult,
};
use crate::netcfg::LayerOp;
use crate::network::{
    flatten, gate_raw, gate_ternary, LayerParams, LayerValue, Network, NetworkError, NetworkInput,
    Prediction,
};
use crate::tcn_map::{fold_1d_to_2d, unfold_2d_to_1d};
use crate::trit::TernaryTensor;
use crate::netcfg::ResolvedLayer;

/// Everything the oracle computed for one inference.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkTrace {
    /// Flattened per-frame feature vectors that form the TCN input
    /// (stream networks only), oldest first.
    pub frame_features: Vec<TernaryTensor>,
    /// Output of every layer for the classified frame, indexed like
    /// `plan.layers`.
    pub layers: Vec<LayerValue>,
    pub prediction: Prediction,
}

/// Evaluates `net` on `input` with the reference implementations.
pub fn evaluate_network(net: &Network, input: &NetworkInput) -> Result<NetworkTrace, NetworkError> {
    input.check(net)?;
    let plan = &net.plan;
    let frame_layers = plan.frame_layers();
    let mut outputs: Vec<LayerValue> = Vec::with_capacity(plan.layers.len());
    let mut frame_features = Vec::new();

    let seq_input: Option<TernaryTensor> = match input {
        NetworkInput::Frame(x) => {
            run_chain(net, frame_layers, x.clone(), &mut outputs)?;
            None
        }
        NetworkInput::Frames(frames) => {
            let steps = net.min_frames();
            let recent = &frames[frames.len() - steps..];
            for (i, f) in recent.iter().enumerate() {
                let mut outs = Vec::new();
                let last = run_chain(net, frame_layers, f.clone(), &mut outs)?;
                frame_features.push(flatten(&last));
                if i + 1 == recent.len() {
                    outputs = outs;
                }
            }
            let width = plan.tcn_width.expect("stream networks have a TCN width");
            let mut x = TernaryTensor::zeros(&[steps, width]);
            for (t, v) in frame_features.iter().enumerate() {
                for c in 0..width {
                    x.set(&[t, c], v.get_flat(c));
                }
            }
            Some(x)
        }
        NetworkInput::Sequence(x) => Some(x.clone()),
    };

    if let Some(x) = seq_input {
        run_chain(net, plan.sequence_layers(), x, &mut outputs)?;
    }

    let last = outputs.last().expect("validated networks have layers");
    let prediction = Prediction::from_output(last, plan.output());
    Ok(NetworkTrace {
        frame_features,
        layers: outputs,
        prediction,
    })
}

/// Runs consecutive layers, returning the last ternary activation.
fn run_chain(
    net: &Network,
    layers: &[ResolvedLayer],
    mut x: TernaryTensor,
    outputs: &mut Vec<LayerValue>,
) -> Result<TernaryTensor, NetworkError> {
    for layer in layers {
        let v = evaluate_layer(layer, net.params[layer.index].as_ref(), &x)?;
        if let LayerValue::Ternary(t) = &v {
            x = t.clone();
        }
        outputs.push(v);
    }
    Ok(x)
}

/// Reference output of a single layer.
pub fn evaluate_layer(
    layer: &ResolvedLayer,
    params: Option<&LayerParams>,
    x: &TernaryTensor,
) -> Result<LayerValue, NetworkError> {
    if let LayerOp::Maxpool = layer.op {
        return Ok(LayerValue::Ternary(maxpool2x2_ref(x)?));
    }
    let p = params.ok_or_else(|| NetworkError::Params {
        layer: layer.index,
        message: "missing weights".into(),
    })?;
    let acc: ConvResult = match &layer.op {
        LayerOp::Conv2d {
            padding,
            fold: None,
            ..
        } => conv2d_ref_padded(x, &p.weights, *padding)?,
        LayerOp::Conv2d {
            padding,
            fold: Some(f),
            ..
        } => {
            let z = fold_1d_to_2d(x, f.dilation)?;
            let folded = conv2d_ref_padded(&z, &p.weights, *padding)?;
            unfold_2d_to_1d(&folded, f.steps)
        }
        LayerOp::Tcn1d { spec } => dilated_conv1d_ref(x, &p.weights, spec.dilation)?,
        LayerOp::Fc => fc_accumulate(x, &p.weights)?,
        LayerOp::Maxpool => unreachable!(),
    };
    Ok(match &p.thresholds {
        None => {
            let mut acc = acc;
            gate_raw(&mut acc, layer.active_channels);
            LayerValue::Raw(acc)
        }
        Some(th) => {
            let mut t = ternarize(&acc, th)?;
            gate_ternary(&mut t, layer.active_channels);
            if let LayerOp::Conv2d { pool: true, .. } = layer.op {
                t = maxpool2x2_ref(&t)?;
            }
            LayerValue::Ternary(t)
        }
    })
}
