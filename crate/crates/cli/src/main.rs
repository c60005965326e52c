//! `cutie`: command-line driver for the ternary accelerator simulator.
//!
//! Exit codes: 0 success, 1 verification divergence, 2 I/O error,
//! 3 parse or validation error.

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use cutie::accel::{Accelerator, HardwareConfig, SimOptions};
use cutie::netcfg::blob::{self, ReadOptions};
use cutie::netcfg::synth::{self, SynthProfile};
use cutie::netcfg::{self, lower, LoadError, NetworkPlan};
use cutie::network::{Network, NetworkInput};
use cutie::perf::{self, Calibration, OperatingPoint, OpsPolicy, PerfReport};
use cutie::report::SimReport;
use cutie::verify::{self, Fault, VerifyConfig};
use cutie::workloads::{self, Workload};

#[derive(Debug, Parser)]
#[command(name = "cutie", version, about = "Ternary CNN/TCN accelerator simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Simulate one inference and estimate its cost.
    Run(RunArgs),
    /// Compare the accelerator model against the reference chain.
    Verify(VerifyArgs),
    /// Evaluate networks over a range of supply voltages.
    Sweep(SweepArgs),
    /// Write synthetic weights and inputs for a network.
    Gen(GenArgs),
    /// Rewrite tcn1d layers as folded conv2d layers.
    Lower(LowerArgs),
    /// Refit the energy calibration from the built-in workloads.
    Calibrate(CalibrateArgs),
    /// Validate a network file and print its resolved layers.
    Check(CheckArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PolicyArg {
    Analytic,
    Calibrated,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ProfileArg {
    Uniform,
    Dense,
    Sparse,
    Event,
}

impl ProfileArg {
    fn profile(self) -> SynthProfile {
        match self {
            ProfileArg::Uniform => SynthProfile::UNIFORM,
            ProfileArg::Dense => SynthProfile::DENSE,
            ProfileArg::Sparse => SynthProfile::SPARSE,
            ProfileArg::Event => SynthProfile::EVENT,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Builtin {
    Cifar,
    CifarSparse,
    Dvs,
}

impl Builtin {
    fn workload(self) -> Workload {
        match self {
            Builtin::Cifar => workloads::cifar(),
            Builtin::CifarSparse => workloads::cifar_sparse(),
            Builtin::Dvs => workloads::dvs(),
        }
    }

    fn stem(self) -> &'static str {
        match self {
            Builtin::Cifar => "cifar9",
            Builtin::CifarSparse => "cifar9_sparse",
            Builtin::Dvs => "dvs_hybrid",
        }
    }

    fn config(self) -> &'static str {
        match self {
            Builtin::Cifar | Builtin::CifarSparse => workloads::CIFAR_NET,
            Builtin::Dvs => workloads::DVS_NET,
        }
    }
}

#[derive(Debug, Args)]
struct CostArgs {
    /// Calibration file (defaults to the built-in one).
    #[arg(long)]
    calibration: Option<PathBuf>,
    /// How ops are counted in throughput and efficiency figures.
    #[arg(long, value_enum, default_value = "calibrated")]
    ops_policy: PolicyArg,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long)]
    net: PathBuf,
    #[arg(long)]
    weights: PathBuf,
    #[arg(long)]
    input: PathBuf,
    /// Supply voltage in volts.
    #[arg(long, default_value_t = 0.5)]
    vdd: f64,
    /// Clock in Hz (defaults to the calibrated maximum at --vdd).
    #[arg(long)]
    fmax: Option<f64>,
    #[command(flatten)]
    cost: CostArgs,
    /// Charge cycles for loading each layer's weights.
    #[arg(long)]
    model_weight_reload: bool,
    /// Accept blobs with a bad checksum.
    #[arg(long)]
    skip_checksum: bool,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[arg(long)]
    net: PathBuf,
    /// Weights executed by the accelerator model.
    #[arg(long)]
    weights: PathBuf,
    /// Weights for the reference chain (defaults to --weights).
    #[arg(long)]
    reference_weights: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Statistics of the random inputs.
    #[arg(long, value_enum, default_value = "uniform")]
    profile: ProfileArg,
    /// Flip one weight trit in the accelerator's copy: `LAYER,INDEX`.
    #[arg(long, value_parser = parse_fault)]
    inject_fault: Option<Fault>,
    /// Accept blobs with a bad checksum.
    #[arg(long)]
    skip_checksum: bool,
    /// Re-simulations spent shrinking a counterexample.
    #[arg(long, default_value_t = 32)]
    minimize_budget: usize,
    /// Write the minimized counterexample input as an activation file.
    #[arg(long)]
    dump: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// Network files; pair each with --weights and --input in order.
    #[arg(long)]
    net: Vec<PathBuf>,
    #[arg(long)]
    weights: Vec<PathBuf>,
    #[arg(long)]
    input: Vec<PathBuf>,
    /// Built-in workloads to include.
    #[arg(long, value_enum, value_delimiter = ',')]
    builtin: Vec<Builtin>,
    /// Supply voltages in volts.
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.5, 0.6, 0.7, 0.8, 0.9])]
    vdd: Vec<f64>,
    #[command(flatten)]
    cost: CostArgs,
    #[arg(long)]
    model_weight_reload: bool,
    /// Write CSV here (stdout when neither --csv nor --json is given).
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GenArgs {
    /// Network to generate data for.
    #[arg(long, conflicts_with = "builtin", required_unless_present = "builtin")]
    net: Option<PathBuf>,
    /// Write a built-in workload (config, weights and input) into --out-dir.
    #[arg(long, value_enum)]
    builtin: Option<Builtin>,
    #[arg(long, requires = "builtin")]
    out_dir: Option<PathBuf>,
    #[arg(long, requires = "net")]
    weights: Option<PathBuf>,
    #[arg(long, requires = "net")]
    input: Option<PathBuf>,
    #[arg(long, default_value_t = workloads::WEIGHT_SEED)]
    seed: u64,
    #[arg(long, value_enum, default_value = "uniform")]
    profile: ProfileArg,
}

#[derive(Debug, Args)]
struct LowerArgs {
    #[arg(long)]
    net: PathBuf,
    /// Write the lowered config here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Weights to convert along with the config.
    #[arg(long, requires = "weights_out")]
    weights: Option<PathBuf>,
    #[arg(long, requires = "weights")]
    weights_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CalibrateArgs {
    /// Write the calibration file here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CheckArgs {
    #[arg(long)]
    net: PathBuf,
}

fn parse_fault(s: &str) -> Result<Fault, String> {
    let (l, i) = s.split_once(',').ok_or("expected LAYER,INDEX")?;
    Ok(Fault {
        layer: l.trim().parse().map_err(|e| format!("layer: {e}"))?,
        index: i.trim().parse().map_err(|e| format!("index: {e}"))?,
    })
}

/// A failed command with its exit code.
#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn io(m: impl fmt::Display) -> Self {
        Self {
            code: 2,
            message: m.to_string(),
        }
    }

    fn invalid(m: impl fmt::Display) -> Self {
        Self {
            code: 3,
            message: m.to_string(),
        }
    }
}

impl From<LoadError> for Failure {
    fn from(e: LoadError) -> Self {
        if e.is_io() {
            Failure::io(e)
        } else {
            Failure::invalid(e)
        }
    }
}

impl From<netcfg::ConfigError> for Failure {
    fn from(e: netcfg::ConfigError) -> Self {
        LoadError::from(e).into()
    }
}

impl From<blob::BlobError> for Failure {
    fn from(e: blob::BlobError) -> Self {
        LoadError::from(e).into()
    }
}

impl From<perf::CalibrationError> for Failure {
    fn from(e: perf::CalibrationError) -> Self {
        match e {
            perf::CalibrationError::Io { .. } => Failure::io(e),
            _ => Failure::invalid(e),
        }
    }
}

type CmdResult = Result<(), Failure>;

fn write_output(path: Option<&Path>, text: &str) -> CmdResult {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| Failure::io(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn read_options(skip_checksum: bool) -> ReadOptions {
    ReadOptions {
        verify_checksum: !skip_checksum,
    }
}

fn calibration(path: Option<&Path>) -> Result<Calibration, Failure> {
    Ok(match path {
        Some(p) => Calibration::load(p)?,
        None => Calibration::shipped(),
    })
}

fn policy(arg: PolicyArg, cal: &Calibration) -> OpsPolicy {
    match arg {
        PolicyArg::Analytic => OpsPolicy::Analytic,
        PolicyArg::Calibrated => cal.ops_policy(),
    }
}

fn simulate(net: &Network, input: &NetworkInput, options: SimOptions) -> Result<SimReport, Failure> {
    let hw = HardwareConfig::default();
    let run = Accelerator::new(hw, options)
        .run_network(net, input)
        .map_err(Failure::invalid)?;
    Ok(SimReport::new(net, &run, &hw, options))
}

#[derive(Serialize)]
struct RunOutput<'a> {
    sim: &'a SimReport,
    perf: &'a PerfReport,
}

fn cmd_run(a: RunArgs) -> CmdResult {
    let net = netcfg::load_network(&a.net, &a.weights, read_options(a.skip_checksum))?;
    let input = netcfg::load_input(&net.plan, &a.input)?;
    let cal = calibration(a.cost.calibration.as_deref())?;
    let mut op = cal.operating_point(a.vdd)?;
    if let Some(f) = a.fmax {
        if !(f > 0.0 && f.is_finite()) {
            return Err(Failure::invalid(format!("--fmax must be positive, got {f}")));
        }
        op = op.with_fmax(f);
    }
    let options = SimOptions {
        model_weight_reload: a.model_weight_reload,
    };
    let sim = simulate(&net, &input, options)?;
    let perf = perf::throughput_and_efficiency(&sim, &op, policy(a.cost.ops_policy, &cal));
    for w in &perf.warnings {
        eprintln!("warning: {w}");
    }
    let text = match a.format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&RunOutput {
                sim: &sim,
                perf: &perf,
            })
            .expect("reports serialize");
            s.push('\n');
            s
        }
        Format::Text => format!("{}\n{}", sim.to_text(), perf.to_text()),
    };
    write_output(a.out.as_deref(), &text)
}

fn cmd_verify(a: VerifyArgs) -> CmdResult {
    let opts = read_options(a.skip_checksum);
    let device = netcfg::load_network(&a.net, &a.weights, opts)?;
    let reference = match &a.reference_weights {
        Some(p) => netcfg::load_network(&a.net, p, opts)?,
        None => device.clone(),
    };
    let cfg = VerifyConfig {
        trials: a.trials,
        seed: a.seed,
        profile: a.profile.profile(),
        fault: a.inject_fault,
        minimize_budget: a.minimize_budget,
    };
    let summary = verify::verify_against(&reference, &device, &cfg).map_err(Failure::invalid)?;
    let text = match a.format {
        Format::Json => serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n",
        Format::Text => match &summary.first_divergence {
            None => format!(
                "PASS {}: {}/{} trials bit-exact (seed {})\n",
                summary.network, summary.passed, summary.trials, a.seed
            ),
            Some(d) => {
                let at = match d.layer {
                    Some(l) => format!("layer {l}"),
                    None => "TCN memory read-out".to_string(),
                };
                format!(
                    "FAIL {}: {}/{} trials bit-exact (seed {})\n\
                     first divergence: trial {}, {at}, position {:?}: expected {}, got {}\n\
                     counterexample shrunk from {} to {} nonzero input trits\n",
                    summary.network,
                    summary.passed,
                    summary.trials,
                    a.seed,
                    d.trial,
                    d.position,
                    d.expected,
                    d.actual,
                    d.input_nonzeros,
                    d.minimized_nonzeros
                )
            }
        },
    };
    print!("{text}");
    if let (Some(path), Some(d)) = (&a.dump, &summary.first_divergence) {
        let frames = counterexample_frames(&reference.plan, &d.minimized_input)?;
        blob::write_file(path, &blob::tensors_to_blobs(&frames))?;
    }
    if summary.ok() {
        Ok(())
    } else {
        Err(Failure {
            code: 1,
            message: "accelerator output diverged from the reference".into(),
        })
    }
}

fn counterexample_frames(plan: &NetworkPlan, frames: &[Vec<i8>]) -> Result<Vec<cutie::TernaryTensor>, Failure> {
    let shape: Vec<usize> = match &plan.config.input {
        netcfg::InputSpec::Frame { shape } | netcfg::InputSpec::Stream { shape, .. } => shape.to_vec(),
        netcfg::InputSpec::Sequence { shape } => shape.to_vec(),
    };
    frames
        .iter()
        .map(|v| cutie::TernaryTensor::from_i8(&shape, v).map_err(Failure::invalid))
        .collect()
}

fn cmd_sweep(a: SweepArgs) -> CmdResult {
    if a.net.len() != a.weights.len() || a.net.len() != a.input.len() {
        return Err(Failure::invalid(
            "each --net needs exactly one --weights and one --input",
        ));
    }
    if a.net.is_empty() && a.builtin.is_empty() {
        return Err(Failure::invalid("no networks given (use --net or --builtin)"));
    }
    let cal = calibration(a.cost.calibration.as_deref())?;
    let points = a
        .vdd
        .iter()
        .map(|&v| cal.operating_point(v))
        .collect::<Result<Vec<OperatingPoint>, _>>()?;
    let options = SimOptions {
        model_weight_reload: a.model_weight_reload,
    };
    let mut jobs: Vec<(Network, NetworkInput)> = Vec::new();
    for ((n, w), i) in a.net.iter().zip(&a.weights).zip(&a.input) {
        let net = netcfg::load_network(n, w, ReadOptions::default())?;
        let input = netcfg::load_input(&net.plan, i)?;
        jobs.push((net, input));
    }
    for b in &a.builtin {
        let w = b.workload();
        jobs.push((w.network, w.input));
    }
    let reports = jobs
        .par_iter()
        .map(|(net, input)| simulate(net, input, options))
        .collect::<Result<Vec<_>, _>>()?;
    let rows = perf::sweep(&reports, &points, policy(a.cost.ops_policy, &cal));
    let csv = perf::sweep_to_csv(&rows);
    if a.csv.is_none() && a.json.is_none() {
        return write_output(None, &csv);
    }
    if let Some(p) = &a.csv {
        write_output(Some(p), &csv)?;
    }
    if let Some(p) = &a.json {
        write_output(Some(p), &(perf::sweep_to_json(&rows) + "\n"))?;
    }
    Ok(())
}

fn cmd_gen(a: GenArgs) -> CmdResult {
    if let Some(b) = a.builtin {
        let dir = a.out_dir.unwrap_or_else(|| PathBuf::from("."));
        std::fs::create_dir_all(&dir).map_err(|e| Failure::io(format!("{}: {e}", dir.display())))?;
        let w = b.workload();
        let stem = b.stem();
        write_output(Some(&dir.join(format!("{stem}.net"))), b.config())?;
        blob::write_file(dir.join(format!("{stem}.weights")), &blob::params_to_blobs(&w.network.params))?;
        netcfg::save_input(dir.join(format!("{stem}.input")), &w.input)?;
        eprintln!("wrote {stem}.net, {stem}.weights, {stem}.input to {}", dir.display());
        return Ok(());
    }
    let path = a.net.expect("clap enforces --net or --builtin");
    let plan = netcfg::parse_network(&path)?;
    let profile = a.profile.profile();
    let net = synth::synth_network(plan, profile, a.seed);
    if let Some(p) = &a.weights {
        blob::write_file(p, &blob::params_to_blobs(&net.params))?;
    }
    if let Some(p) = &a.input {
        let mut rng = synth::rng(a.seed ^ workloads::INPUT_SEED);
        netcfg::save_input(p, &synth::synth_input(&net.plan, profile, &mut rng))?;
    }
    if a.weights.is_none() && a.input.is_none() {
        return Err(Failure::invalid("nothing to write (give --weights and/or --input)"));
    }
    Ok(())
}

fn cmd_lower(a: LowerArgs) -> CmdResult {
    let plan = netcfg::parse_network(&a.net)?;
    let text = netcfg::to_toml(&lower::lower_config(&plan));
    if let (Some(w), Some(out)) = (&a.weights, &a.weights_out) {
        let net = netcfg::load_network(&a.net, w, ReadOptions::default())?;
        let low = lower::lower_network(&net).map_err(Failure::invalid)?;
        blob::write_file(out, &blob::params_to_blobs(&low.params))?;
    }
    write_output(a.out.as_deref(), &text)
}

fn cmd_calibrate(a: CalibrateArgs) -> CmdResult {
    let (cal, report) = workloads::calibrate()?;
    eprintln!(
        "fit: CIFAR {:.4}x target, DVS {:.4}x target, sparse reduction {:.1}%, first-layer {:.1} TOp/s/W{}",
        report.cifar_ratio,
        report.dvs_ratio,
        report.sparse_reduction * 100.0,
        report.first_layer_efficiency_ops_per_w / 1e12,
        if report.clamped.is_empty() {
            String::new()
        } else {
            format!(", clamped to zero: {}", report.clamped.join(", "))
        }
    );
    write_output(a.out.as_deref(), &cal.to_toml())
}

fn cmd_check(a: CheckArgs) -> CmdResult {
    let plan = netcfg::parse_network(&a.net)?;
    let mut s = format!("{}: valid, {} layers\n", plan.config.name, plan.layers.len());
    for l in &plan.layers {
        s.push_str(&format!(
            "{:>3} {:<14} {} -> {}{}\n",
            l.index,
            l.kind,
            l.input,
            l.output,
            if l.reads_tcn_memory { "  (reads TCN memory)" } else { "" }
        ));
    }
    write_output(None, &s)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(3) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.cmd {
        Cmd::Run(a) => cmd_run(a),
        Cmd::Verify(a) => cmd_verify(a),
        Cmd::Sweep(a) => cmd_sweep(a),
        Cmd::Gen(a) => cmd_gen(a),
        Cmd::Lower(a) => cmd_lower(a),
        Cmd::Calibrate(a) => cmd_calibrate(a),
        Cmd::Check(a) => cmd_check(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
