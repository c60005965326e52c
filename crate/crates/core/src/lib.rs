//! Functional simulator and performance model of a ternary CNN/TCN
//! accelerator with a 96-channel output-stationary compute array.
//!
//! - [`trit`]: trits, packed storage and tensors.
//! - [`oracle`]: brute-force reference implementations of every layer.
//! - [`tcn_map`]: lowering of dilated causal 1D convolutions onto the 3x3
//!   2D datapath.
//! - [`accel`]: cycle-approximate, bit-exact accelerator model.
//! - [`perf`]: operating points, energy and throughput estimates.
//! - [`netcfg`]: network files, weight blobs and synthetic artifacts.

pub mod accel;
pub mod netcfg;
pub mod network;
pub mod oracle;
pub mod perf;
pub mod report;
pub mod tcn_map;
pub mod trit;
pub mod verify;
pub mod workloads;

pub use accel::{Accelerator, ActivityCounters, HardwareConfig};
pub use network::{Network, NetworkInput, Prediction};
pub use trit::{PackedTritBuffer, TernaryTensor, Trit};
