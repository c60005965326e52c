//! Simulation report: per-layer and total activity of one inference.

use serde::{Deserialize, Serialize};

use crate::accel::{ActivityCounters, CycleBreakdown, HardwareConfig, NetworkRun, SimOptions, DRAIN_CYCLES};
use crate::network::{LayerValue, Network, Prediction};

pub const SIM_REPORT_SCHEMA: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerReport {
    pub index: usize,
    pub kind: String,
    pub input_shape: Vec<usize>,
    pub output_shape: Vec<usize>,
    pub cin: usize,
    pub cout: usize,
    pub active_channels: usize,
    /// Times the layer ran within the inference; counters are summed.
    pub invocations: usize,
    pub timing: CycleBreakdown,
    pub counters: ActivityCounters,
    /// Zero fraction of the layer output; `None` for raw outputs.
    pub output_zero_fraction: Option<f64>,
}

/// Constants of the cycle model, echoed so reports are self-describing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CycleModel {
    pub conv_prefill: String,
    pub pool_prefill: String,
    pub fc_cycles: String,
    pub drain_cycles: u64,
}

impl Default for CycleModel {
    fn default() -> Self {
        Self {
            conv_prefill: "(K-1)*W_padded + K".into(),
            pool_prefill: "W_in + 2".into(),
            fc_cycles: "input positions".into(),
            drain_cycles: DRAIN_CYCLES,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub schema_version: u32,
    pub network: String,
    pub dataset: String,
    pub hardware: HardwareConfig,
    pub options: SimOptions,
    pub cycle_model: CycleModel,
    /// Frames processed only to fill the TCN history.
    pub warmup_frames: usize,
    pub warmup: ActivityCounters,
    pub layers: Vec<LayerReport>,
    /// Activity of the measured inference.
    pub total: ActivityCounters,
    pub prediction: Prediction,
}

impl SimReport {
    pub fn new(net: &Network, run: &NetworkRun, hw: &HardwareConfig, options: SimOptions) -> Self {
        let layers = run
            .layers
            .iter()
            .map(|r| {
                let l = &net.plan.layers[r.index];
                LayerReport {
                    index: r.index,
                    kind: l.kind.to_string(),
                    input_shape: l.input.dims(),
                    output_shape: r.output.shape().to_vec(),
                    cin: l.cin,
                    cout: l.cout,
                    active_channels: l.active_channels,
                    invocations: r.invocations,
                    timing: r.timing,
                    counters: r.counters,
                    output_zero_fraction: match &r.output {
                        LayerValue::Ternary(t) => Some(t.sparsity().zero_fraction()),
                        LayerValue::Raw(_) => None,
                    },
                }
            })
            .collect();
        Self {
            schema_version: SIM_REPORT_SCHEMA,
            network: net.plan.config.name.clone(),
            dataset: net.plan.config.dataset.clone(),
            hardware: *hw,
            options,
            cycle_model: CycleModel::default(),
            warmup_frames: run.warmup_frames,
            warmup: run.warmup,
            layers,
            total: run.total(),
            prediction: run.prediction.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Short human-readable table.
    pub fn to_text(&self) -> String {
        let mut s = format!("network {} ({})\n", self.network, self.dataset);
        s.push_str("layer kind            output        cycles      MACs         toggles\n");
        for l in &self.layers {
            let shape: Vec<String> = l.output_shape.iter().map(|d| d.to_string()).collect();
            let kind = if l.invocations > 1 {
                format!("{} x{}", l.kind, l.invocations)
            } else {
                l.kind.clone()
            };
            s.push_str(&format!(
                "{:>5} {:<15} {:<13} {:>6} {:>12} {:>12}\n",
                l.index,
                kind,
                shape.join("x"),
                l.counters.cycles,
                l.counters.mac_ops,
                l.counters.toggles
            ));
        }
        s.push_str(&format!(
            "total cycles {}  MACs {}  toggles {}  predicted class {}\n",
            self.total.cycles, self.total.mac_ops, self.total.toggles, self.prediction.class
        ));
        if self.warmup_frames > 0 {
            s.push_str(&format!(
                "warm-up: {} frames, {} cycles (not included above)\n",
                self.warmup_frames, self.warmup.cycles
            ));
        }
        s
    }
}
