//! Rewrites `tcn1d` layers as folded `conv2d` layers, the form the
//! accelerator executes.

use super::{Conv2dConfig, FoldAnnotation, LayerConfig, LayerOp, NetworkConfig, NetworkPlan};
use crate::network::{LayerParams, Network};
use crate::tcn_map::{self, MapError};

/// Config with every `tcn1d` layer replaced by its folded `conv2d` form.
pub fn lower_config(plan: &NetworkPlan) -> NetworkConfig {
    let mut cfg = plan.config.clone();
    for (layer, resolved) in cfg.layers.iter_mut().zip(&plan.layers) {
        let (LayerConfig::Tcn1d(t), LayerOp::Tcn1d { spec }) = (&*layer, &resolved.op) else {
            continue;
        };
        let pad = tcn_map::mapping_padding(spec.kernel);
        *layer = LayerConfig::Conv2d(Conv2dConfig {
            cin: t.cin,
            cout: t.cout,
            kernel: tcn_map::KERNEL_2D,
            pool: false,
            active_channels: t.active_channels,
            padding: Some(pad.as_array()),
            fold: Some(FoldAnnotation {
                dilation: spec.dilation,
                steps: spec.steps,
                taps: Some(spec.kernel),
            }),
        });
    }
    if !cfg.notes.is_empty() {
        cfg.notes.push_str("; ");
    }
    cfg.notes.push_str("tcn1d layers lowered to folded conv2d");
    cfg
}

/// Lowered network with projected 3x3 kernels.
pub fn lower_network(net: &Network) -> Result<Network, MapError> {
    let cfg = lower_config(&net.plan);
    let plan = super::validate(cfg, &Default::default())
        .map_err(|e| MapError::InvalidSpec(e.to_string()))?;
    let params = net
        .plan
        .layers
        .iter()
        .zip(&net.params)
        .map(|(l, p)| match (&l.op, p) {
            (LayerOp::Tcn1d { .. }, Some(p)) => Ok(Some(LayerParams {
                weights: tcn_map::project_kernel(&p.weights)?,
                thresholds: p.thresholds.clone(),
            })),
            _ => Ok(p.clone()),
        })
        .collect::<Result<Vec<_>, MapError>>()?;
    Network::new(plan, params).map_err(|e| MapError::InvalidSpec(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netcfg::synth::{self, SynthProfile};
    use crate::netcfg::{parse_network_str, to_toml};
    use crate::oracle::evaluate_network;
    use crate::workloads;

    #[test]
    fn lowered_dvs_network_is_equivalent() {
        let w = workloads::dvs();
        let low = lower_network(&w.network).unwrap();
        assert!(low
            .plan
            .layers
            .iter()
            .all(|l| !matches!(l.op, LayerOp::Tcn1d { .. })));
        let a = evaluate_network(&w.network, &w.input).unwrap();
        let b = evaluate_network(&low, &w.input).unwrap();
        assert_eq!(a.layers, b.layers);
        assert_eq!(a.prediction, b.prediction);
    }

    #[test]
    fn lowered_config_round_trips_through_text() {
        let text = "schema_version = 1\nname = \"seq\"\n[input]\nkind = \"sequence\"\nshape = [20, 8]\n\
                    [[layer]]\nkind = \"tcn1d\"\ncout = 8\nkernel = 3\ndilation = 4\n\
                    [[layer]]\nkind = \"tcn1d\"\ncout = 4\nkernel = 2\ndilation = 2\n";
        let plan = parse_network_str(text).unwrap();
        let lowered = lower_config(&plan);
        let again = parse_network_str(&to_toml(&lowered)).unwrap();
        assert_eq!(again.config, lowered);
        let net = synth::synth_network(plan, SynthProfile::UNIFORM, 5);
        let low = lower_network(&net).unwrap();
        let mut rng = synth::rng(6);
        for _ in 0..20 {
            let x = synth::synth_input(&net.plan, SynthProfile::UNIFORM, &mut rng);
            assert_eq!(
                evaluate_network(&net, &x).unwrap().layers,
                evaluate_network(&low, &x).unwrap().layers
            );
        }
    }
}
