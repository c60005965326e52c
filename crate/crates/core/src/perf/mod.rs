//! Operating points, energy, throughput and efficiency estimates.
//!
//! Energy of a run is
//! `e_toggle * toggles + e_mem * (fmap_reads + fmap_writes + weight_loads)
//! + p_leak_idle * cycles / f`.

pub mod calibration;

pub use calibration::{Calibration, CalibrationError, FitReport};

use serde::{Deserialize, Serialize};

use crate::accel::ActivityCounters;
use crate::report::{LayerReport, SimReport};

pub const PERF_REPORT_SCHEMA: u32 = 1;

/// A supply voltage / clock corner with its energy coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub voltage: f64,
    /// Clock frequency in Hz.
    pub fmax: f64,
    /// Joules per counted toggle.
    pub e_toggle: f64,
    /// Joules per feature-map or weight access (per trit).
    pub e_mem: f64,
    /// Watts drawn regardless of activity.
    pub p_leak_idle: f64,
    pub calibrated: bool,
}

impl OperatingPoint {
    pub fn with_fmax(self, fmax: f64) -> Self {
        Self { fmax, ..self }
    }
}

/// How ops are counted in throughput and efficiency figures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "lowercase")]
pub enum OpsPolicy {
    /// Two ops per MAC.
    Analytic,
    /// Two ops per MAC times a fitted convention factor.
    Calibrated { scale: f64 },
}

impl OpsPolicy {
    pub fn scale(&self) -> f64 {
        match self {
            OpsPolicy::Analytic => 1.0,
            OpsPolicy::Calibrated { scale } => *scale,
        }
    }
}

/// Two ops per MAC, zero-operand MACs included.
pub fn ops_count(c: &ActivityCounters) -> u64 {
    2 * c.mac_ops
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub toggle: f64,
    pub memory: f64,
    pub leakage: f64,
    pub total: f64,
}

/// Energy of an activity record at `op`.
pub fn energy(c: &ActivityCounters, op: &OperatingPoint) -> EnergyBreakdown {
    let toggle = op.e_toggle * c.toggles as f64;
    let memory = op.e_mem * (c.fmap_reads + c.fmap_writes + c.weight_loads) as f64;
    let leakage = op.p_leak_idle * c.cycles as f64 / op.fmax;
    EnergyBreakdown {
        toggle,
        memory,
        leakage,
        total: toggle + memory + leakage,
    }
}

/// Energy of a layer with its weights already resident (no weight loads,
/// no reload cycles).
pub fn steady_state_energy(l: &LayerReport, op: &OperatingPoint) -> EnergyBreakdown {
    let c = ActivityCounters {
        weight_loads: 0,
        cycles: l.counters.cycles - l.timing.reload,
        ..l.counters
    };
    energy(&c, op)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyEstimate {
    pub op_point: OperatingPoint,
    pub energy_per_inference: f64,
    pub breakdown: EnergyBreakdown,
    pub warnings: Vec<String>,
}

pub fn estimate_energy(report: &SimReport, op: &OperatingPoint) -> EnergyEstimate {
    let breakdown = energy(&report.total, op);
    let mut warnings = Vec::new();
    if !op.calibrated {
        warnings.push(format!(
            "operating point {:.2} V is uncalibrated; energy figures are indicative only",
            op.voltage
        ));
    }
    EnergyEstimate {
        op_point: *op,
        energy_per_inference: breakdown.total,
        breakdown,
        warnings,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerPerf {
    pub index: usize,
    pub kind: String,
    /// Analytic ops (2 per MAC).
    pub ops: u64,
    pub cycles: u64,
    /// Ops per second under the report's ops policy.
    pub throughput: f64,
    /// Steady-state energy (weights resident).
    pub energy: f64,
    /// Ops per second per watt under the report's ops policy.
    pub efficiency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerfReport {
    pub schema_version: u32,
    pub network: String,
    pub op_point: OperatingPoint,
    pub ops_policy: OpsPolicy,
    /// 2 x MACs of one inference.
    pub total_ops: u64,
    /// `total_ops` under the ops policy.
    pub policy_ops: f64,
    pub cycles: u64,
    pub latency: f64,
    pub inferences_per_second: f64,
    pub energy_per_inference: f64,
    pub energy: EnergyBreakdown,
    pub avg_power: f64,
    /// `policy_ops * f / cycles`.
    pub avg_throughput: f64,
    /// `avg_throughput / avg_power`.
    pub energy_efficiency: f64,
    pub layers: Vec<LayerPerf>,
    /// Layer with the highest efficiency.
    pub peak_layer: usize,
    pub peak_throughput: f64,
    pub peak_efficiency: f64,
    pub warnings: Vec<String>,
}

impl PerfReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_text(&self) -> String {
        format!(
            "operating point {:.2} V @ {:.1} MHz ({} ops)\n\
             cycles/inference   {}\n\
             inferences/s       {:.1}\n\
             energy/inference   {:.3} uJ (toggle {:.3}, memory {:.3}, leakage {:.3})\n\
             average power      {:.3} mW\n\
             avg throughput     {:.3} TOp/s\n\
             efficiency         {:.1} TOp/s/W\n\
             peak layer {}       {:.3} TOp/s, {:.1} TOp/s/W\n",
            self.op_point.voltage,
            self.op_point.fmax / 1e6,
            match self.ops_policy {
                OpsPolicy::Analytic => "analytic".to_string(),
                OpsPolicy::Calibrated { scale } => format!("calibrated x{scale:.3}"),
            },
            self.cycles,
            self.inferences_per_second,
            self.energy_per_inference * 1e6,
            self.energy.toggle * 1e6,
            self.energy.memory * 1e6,
            self.energy.leakage * 1e6,
            self.avg_power * 1e3,
            self.avg_throughput / 1e12,
            self.energy_efficiency / 1e12,
            self.peak_layer,
            self.peak_throughput / 1e12,
            self.peak_efficiency / 1e12,
        )
    }
}

/// Whole-network and per-layer throughput and efficiency at `op`.
pub fn throughput_and_efficiency(report: &SimReport, op: &OperatingPoint, policy: OpsPolicy) -> PerfReport {
    let est = estimate_energy(report, op);
    let s = policy.scale();
    let cycles = report.total.cycles;
    let total_ops = ops_count(&report.total);
    let policy_ops = total_ops as f64 * s;
    let latency = cycles as f64 / op.fmax;
    let avg_power = if latency > 0.0 {
        est.energy_per_inference / latency
    } else {
        0.0
    };
    let avg_throughput = if cycles > 0 {
        policy_ops * op.fmax / cycles as f64
    } else {
        0.0
    };
    let layers: Vec<LayerPerf> = report
        .layers
        .iter()
        .map(|l| {
            let ops = ops_count(&l.counters);
            let cycles = l.counters.cycles - l.timing.reload;
            let e = steady_state_energy(l, op).total;
            LayerPerf {
                index: l.index,
                kind: l.kind.clone(),
                ops,
                cycles,
                throughput: ops as f64 * s * op.fmax / cycles.max(1) as f64,
                energy: e,
                efficiency: if e > 0.0 { ops as f64 * s / e } else { 0.0 },
            }
        })
        .collect();
    let peak = layers
        .iter()
        .fold(None::<&LayerPerf>, |best, l| match best {
            Some(b) if b.efficiency >= l.efficiency => Some(b),
            _ => Some(l),
        })
        .cloned();
    PerfReport {
        schema_version: PERF_REPORT_SCHEMA,
        network: report.network.clone(),
        op_point: *op,
        ops_policy: policy,
        total_ops,
        policy_ops,
        cycles,
        latency,
        inferences_per_second: if latency > 0.0 { 1.0 / latency } else { 0.0 },
        energy_per_inference: est.energy_per_inference,
        energy: est.breakdown,
        avg_power,
        avg_throughput,
        energy_efficiency: if avg_power > 0.0 {
            avg_throughput / avg_power
        } else {
            0.0
        },
        peak_layer: peak.as_ref().map(|p| p.index).unwrap_or(0),
        peak_throughput: peak.as_ref().map(|p| p.throughput).unwrap_or(0.0),
        peak_efficiency: peak.as_ref().map(|p| p.efficiency).unwrap_or(0.0),
        layers,
        warnings: est.warnings,
    }
}

/// One row of a voltage sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub network: String,
    pub voltage: f64,
    pub fmax_hz: f64,
    pub energy_per_inference_j: f64,
    pub inferences_per_second: f64,
    pub avg_throughput_ops: f64,
    pub peak_layer: usize,
    pub peak_layer_efficiency_ops_per_w: f64,
    pub peak_layer_throughput_ops: f64,
}

/// Evaluates every report at every operating point. Rows are sorted by
/// network name, then voltage.
pub fn sweep(reports: &[SimReport], points: &[OperatingPoint], policy: OpsPolicy) -> Vec<SweepRow> {
    let mut rows: Vec<SweepRow> = reports
        .iter()
        .flat_map(|r| {
            points.iter().map(move |op| {
                let p = throughput_and_efficiency(r, op, policy);
                SweepRow {
                    network: r.network.clone(),
                    voltage: op.voltage,
                    fmax_hz: op.fmax,
                    energy_per_inference_j: p.energy_per_inference,
                    inferences_per_second: p.inferences_per_second,
                    avg_throughput_ops: p.avg_throughput,
                    peak_layer: p.peak_layer,
                    peak_layer_efficiency_ops_per_w: p.peak_efficiency,
                    peak_layer_throughput_ops: p.peak_throughput,
                }
            })
        })
        .collect();
    rows.sort_by(|a, b| {
        a.network
            .cmp(&b.network)
            .then(a.voltage.partial_cmp(&b.voltage).expect("finite voltages"))
    });
    rows
}

pub fn sweep_to_csv(rows: &[SweepRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("rows serialize");
    }
    String::from_utf8(w.into_inner().expect("in-memory writer")).expect("utf-8 csv")
}

pub fn sweep_from_csv(text: &str) -> Result<Vec<SweepRow>, csv::Error> {
    csv::Reader::from_reader(text.as_bytes()).deserialize().collect()
}

pub fn sweep_to_json(rows: &[SweepRow]) -> String {
    serde_json::to_string_pretty(rows).expect("rows serialize")
}
