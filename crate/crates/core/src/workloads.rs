//! The shipped benchmark networks with their fixed synthetic weights and
//! inputs.

use crate::accel::{Accelerator, HardwareConfig, SimOptions};
use crate::netcfg::synth::{self, SynthProfile};
use crate::netcfg::{parse_network_str, NetworkPlan};
use crate::network::{Network, NetworkInput};
use crate::perf::calibration::{self, Calibration, CalibrationError, FitObservations, FitReport, Targets};
use crate::report::SimReport;

pub const CIFAR_NET: &str = include_str!("../configs/cifar9.net");
pub const DVS_NET: &str = include_str!("../configs/dvs_hybrid.net");

pub const WEIGHT_SEED: u64 = 0x7C07_1E00;
pub const INPUT_SEED: u64 = 0x1A9D_0001;

pub fn cifar_plan() -> NetworkPlan {
    parse_network_str(CIFAR_NET).expect("shipped CIFAR-10 config is valid")
}

pub fn dvs_plan() -> NetworkPlan {
    parse_network_str(DVS_NET).expect("shipped DVS config is valid")
}

/// A network with synthetic parameters and one input.
#[derive(Debug, Clone)]
pub struct Workload {
    pub network: Network,
    pub input: NetworkInput,
    pub profile: SynthProfile,
}

impl Workload {
    pub fn new(plan: NetworkPlan, profile: SynthProfile) -> Self {
        let network = synth::synth_network(plan, profile, WEIGHT_SEED);
        let mut rng = synth::rng(INPUT_SEED);
        let input = synth::synth_input(&network.plan, profile, &mut rng);
        Self {
            network,
            input,
            profile,
        }
    }

    pub fn simulate(&self, options: SimOptions) -> SimReport {
        let hw = HardwareConfig::default();
        let mut acc = Accelerator::new(hw, options);
        let run = acc
            .run_network(&self.network, &self.input)
            .expect("benchmark workloads run");
        SimReport::new(&self.network, &run, &hw, options)
    }
}

/// CIFAR-10 network on frame-camera style data.
pub fn cifar() -> Workload {
    Workload::new(cifar_plan(), SynthProfile::DENSE)
}

/// The CIFAR-10 network on highly sparse weights and activations.
pub fn cifar_sparse() -> Workload {
    Workload::new(cifar_plan(), SynthProfile::SPARSE)
}

/// Hybrid DVS network on accumulated event frames.
pub fn dvs() -> Workload {
    Workload::new(dvs_plan(), SynthProfile::EVENT)
}

/// Simulated activity behind the shipped calibration.
pub fn fit_observations() -> FitObservations {
    let opts = SimOptions::default();
    let reports: Vec<SimReport> = {
        use rayon::prelude::*;
        [cifar as fn() -> Workload, dvs, cifar_sparse]
            .par_iter()
            .map(|w| w().simulate(opts))
            .collect()
    };
    let [cifar, dvs, sparse]: [SimReport; 3] = reports.try_into().expect("three reports");
    FitObservations {
        dense: cifar.clone(),
        cifar,
        dvs,
        sparse,
    }
}

/// Refits the calibration from the shipped workloads.
pub fn calibrate() -> Result<(Calibration, FitReport), CalibrationError> {
    let (reference, high) = calibration::default_corners();
    calibration::fit(
        &fit_observations(),
        &Targets::default(),
        reference,
        high,
        calibration::default_scaling(),
    )
}
