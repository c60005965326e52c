//! Versioned energy and ops constants, and the fit that produces them.
//!
//! The three energy coefficients at the reference corner are the
//! non-negative least-squares solution of
//!
//! - energy of the CIFAR-10 workload = `cifar_energy`
//! - energy of the DVS workload = `dvs_energy`
//! - energy of the sparse workload = `(1 - sparse_reduction)` x energy of its
//!   dense counterpart
//!
//! each row scaled to relative error. The ops convention factor then makes
//! the steady-state efficiency of the CIFAR-10 first layer equal
//! `first_layer_efficiency`. Other voltages scale dynamic energy and
//! leakage power by `(V / V_ref)^exponent`; the clock interpolates linearly
//! between the two corners.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{energy, steady_state_energy, ops_count, OperatingPoint, OpsPolicy};
use crate::accel::ActivityCounters;
use crate::report::{LayerReport, SimReport};

pub const CALIBRATION_VERSION: u32 = 1;

/// Shipped calibration, produced by `cutie calibrate`.
pub const SHIPPED: &str = include_str!("../../calibration/default.toml");

#[derive(Debug, Error)]
pub enum CalibrationError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("calibration file: {0}")]
    Parse(String),
    #[error("unsupported calibration version {0}")]
    Version(u32),
    #[error("voltage {v} V outside the calibrated range {lo}..={hi} V")]
    VoltageOutOfRange { v: f64, lo: f64, hi: f64 },
    #[error("calibration fit has no non-negative solution")]
    Infeasible,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corner {
    pub voltage: f64,
    pub fmax_hz: f64,
    pub origin: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyCoefficients {
    pub e_toggle: f64,
    pub e_mem: f64,
    pub p_leak_idle: f64,
    pub origin: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoltageScaling {
    pub dynamic_exponent: f64,
    pub leakage_exponent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpsConvention {
    pub scale: f64,
    pub origin: String,
}

/// Published figures the constants are fitted to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Targets {
    pub cifar_energy_j: f64,
    pub dvs_energy_j: f64,
    pub sparse_reduction: f64,
    pub first_layer_efficiency_ops_per_w: f64,
}

impl Default for Targets {
    fn default() -> Self {
        Self {
            cifar_energy_j: 2.72e-6,
            dvs_energy_j: 5.5e-6,
            sparse_reduction: 0.36,
            first_layer_efficiency_ops_per_w: 1036e12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub version: u32,
    pub reference: Corner,
    pub high: Corner,
    pub energy: EnergyCoefficients,
    pub scaling: VoltageScaling,
    pub ops: OpsConvention,
    pub targets: Targets,
}

impl Calibration {
    pub fn shipped() -> Self {
        Self::from_toml(SHIPPED).expect("shipped calibration parses")
    }

    pub fn from_toml(text: &str) -> Result<Self, CalibrationError> {
        let c: Self = toml::from_str(text).map_err(|e| CalibrationError::Parse(e.to_string()))?;
        if c.version != CALIBRATION_VERSION {
            return Err(CalibrationError::Version(c.version));
        }
        Ok(c)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CalibrationError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| CalibrationError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        let body = toml::to_string(self).expect("calibration serializes");
        format!(
            "# Energy model constants. Regenerate with `cutie calibrate`.\n\
             # Dynamic coefficients and leakage refer to the reference corner.\n{body}"
        )
    }

    /// Clock at `v`, interpolated linearly between the two corners.
    pub fn fmax_at(&self, v: f64) -> Result<f64, CalibrationError> {
        self.check_range(v)?;
        let (a, b) = (&self.reference, &self.high);
        let t = (v - a.voltage) / (b.voltage - a.voltage);
        Ok(a.fmax_hz + t * (b.fmax_hz - a.fmax_hz))
    }

    fn check_range(&self, v: f64) -> Result<(), CalibrationError> {
        let (lo, hi) = (self.reference.voltage, self.high.voltage);
        if !(v >= lo - 1e-9 && v <= hi + 1e-9) {
            return Err(CalibrationError::VoltageOutOfRange { v, lo, hi });
        }
        Ok(())
    }

    pub fn operating_point(&self, v: f64) -> Result<OperatingPoint, CalibrationError> {
        let fmax = self.fmax_at(v)?;
        let r = v / self.reference.voltage;
        let dynamic = r.powf(self.scaling.dynamic_exponent);
        let leak = r.powf(self.scaling.leakage_exponent);
        Ok(OperatingPoint {
            voltage: v,
            fmax,
            e_toggle: self.energy.e_toggle * dynamic,
            e_mem: self.energy.e_mem * dynamic,
            p_leak_idle: self.energy.p_leak_idle * leak,
            calibrated: true,
        })
    }

    pub fn ops_policy(&self) -> OpsPolicy {
        OpsPolicy::Calibrated {
            scale: self.ops.scale,
        }
    }
}

/// Simulated activity the fit is computed from.
#[derive(Debug, Clone)]
pub struct FitObservations {
    pub cifar: SimReport,
    pub dvs: SimReport,
    pub sparse: SimReport,
    /// Dense counterpart of `sparse`.
    pub dense: SimReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    /// Modeled / target for the two network energies.
    pub cifar_ratio: f64,
    pub dvs_ratio: f64,
    pub sparse_reduction: f64,
    pub first_layer_efficiency_ops_per_w: f64,
    /// Coefficients forced to zero by the non-negativity constraint.
    pub clamped: Vec<String>,
}

fn features(c: &ActivityCounters, f: f64) -> [f64; 3] {
    [
        c.toggles as f64,
        (c.fmap_reads + c.fmap_writes + c.weight_loads) as f64,
        c.cycles as f64 / f,
    ]
}

/// Non-negative least squares by enumerating active sets; exact for the
/// handful of unknowns used here.
pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let n = a.ncols();
    let mut best: Option<(f64, DVector<f64>)> = None;
    for mask in 1u32..(1 << n) {
        let cols: Vec<usize> = (0..n).filter(|j| mask & (1 << j) != 0).collect();
        let sub = DMatrix::from_fn(a.nrows(), cols.len(), |i, k| a[(i, cols[k])]);
        let svd = sub.clone().svd(true, true);
        let Ok(x) = svd.solve(b, 1e-12) else { continue };
        if x.iter().any(|&v| v < 0.0) {
            continue;
        }
        let mut full = DVector::zeros(n);
        for (k, &j) in cols.iter().enumerate() {
            full[j] = x[k];
        }
        let r = (a * &full - b).norm();
        if best.as_ref().is_none_or(|(br, _)| r < *br - 1e-15) {
            best = Some((r, full));
        }
    }
    best.map(|(_, x)| x)
}

/// Fits the reference-corner coefficients and the ops convention factor.
pub fn fit(
    obs: &FitObservations,
    targets: &Targets,
    reference: Corner,
    high: Corner,
    scaling: VoltageScaling,
) -> Result<(Calibration, FitReport), CalibrationError> {
    let f = reference.fmax_hz;
    let fc = features(&obs.cifar.total, f);
    let fd = features(&obs.dvs.total, f);
    let fs = features(&obs.sparse.total, f);
    let fdense = features(&obs.dense.total, f);
    let keep = 1.0 - targets.sparse_reduction;
    let e_dense = fdense_scale(targets);
    let rows = [
        fc.map(|v| v / targets.cifar_energy_j),
        fd.map(|v| v / targets.dvs_energy_j),
        [0, 1, 2].map(|j| (fs[j] - keep * fdense[j]) / e_dense),
    ];
    let rhs = [1.0, 1.0, 0.0];
    // column scaling keeps the three coefficients on comparable magnitudes
    let norms: Vec<f64> = (0..3)
        .map(|j| rows.iter().map(|r| r[j] * r[j]).sum::<f64>().sqrt().max(f64::MIN_POSITIVE))
        .collect();
    let a = DMatrix::from_fn(3, 3, |i, j| rows[i][j] / norms[j]);
    let b = DVector::from_row_slice(&rhs);
    let x = nnls(&a, &b).ok_or(CalibrationError::Infeasible)?;
    let theta: Vec<f64> = (0..3).map(|j| x[j] / norms[j]).collect();
    let names = ["e_toggle", "e_mem", "p_leak_idle"];
    let clamped = (0..3)
        .filter(|&j| theta[j] == 0.0)
        .map(|j| names[j].to_string())
        .collect();

    let op = OperatingPoint {
        voltage: reference.voltage,
        fmax: f,
        e_toggle: theta[0],
        e_mem: theta[1],
        p_leak_idle: theta[2],
        calibrated: true,
    };
    let first = first_conv(&obs.cifar.layers);
    let e1 = steady_state_energy(first, &op).total;
    let ops1 = ops_count(&first.counters) as f64;
    let scale = targets.first_layer_efficiency_ops_per_w * e1 / ops1;

    let e = |r: &SimReport| energy(&r.total, &op).total;
    let report = FitReport {
        cifar_ratio: e(&obs.cifar) / targets.cifar_energy_j,
        dvs_ratio: e(&obs.dvs) / targets.dvs_energy_j,
        sparse_reduction: 1.0 - e(&obs.sparse) / e(&obs.dense),
        first_layer_efficiency_ops_per_w: ops1 * scale / e1,
        clamped,
    };
    let cal = Calibration {
        version: CALIBRATION_VERSION,
        reference,
        high,
        energy: EnergyCoefficients {
            e_toggle: theta[0],
            e_mem: theta[1],
            p_leak_idle: theta[2],
            origin: "fit: non-negative least squares on network energies and sparsity reduction".into(),
        },
        scaling,
        ops: OpsConvention {
            scale,
            origin: "fit: first-layer efficiency of the CIFAR-10 network".into(),
        },
        targets: targets.clone(),
    };
    Ok((cal, report))
}

fn fdense_scale(t: &Targets) -> f64 {
    t.cifar_energy_j
}

/// First conv layer of a report (the efficiency reference layer).
pub fn first_conv(layers: &[LayerReport]) -> &LayerReport {
    layers
        .iter()
        .find(|l| l.kind == "conv2d")
        .unwrap_or(&layers[0])
}

/// Default corners: the published 0.5 V / 54 MHz point and a 0.9 V point
/// whose clock follows the published peak-throughput ratio 56 / 16.
pub fn default_corners() -> (Corner, Corner) {
    (
        Corner {
            voltage: 0.5,
            fmax_hz: 54e6,
            origin: "published".into(),
        },
        Corner {
            voltage: 0.9,
            fmax_hz: 54e6 * 56.0 / 16.0,
            origin: "extrapolated: 54 MHz x 56/16 peak-throughput ratio".into(),
        },
    )
}

pub fn default_scaling() -> VoltageScaling {
    VoltageScaling {
        dynamic_exponent: 2.0,
        leakage_exponent: 2.0,
    }
}
