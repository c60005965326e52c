//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails. Informational lines start with `INFO`.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use cutie::accel::{Accelerator, AccelError, HardwareConfig, SimOptions, TcnMemory};
use cutie::netcfg::{parse_network_str, LayerOp};
use cutie::network::NetworkInput;
use cutie::oracle::{dilated_conv1d_ref, evaluate_layer, evaluate_network, ternarize, ThresholdPair};
use cutie::perf::{self, Calibration};
use cutie::report::SimReport;
use cutie::tcn_map::{self, DilationSchedule, TcnLayerSpec};
use cutie::trit::{packed_len, TernaryTensor, Trit};
use cutie::verify::{self, VerifyConfig};
use cutie::workloads;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// pinned limits and tolerances
const C1_CASES: usize = 2000;
const C1_TIME_LIMIT: Duration = Duration::from_secs(60);
const C2_LAYERS: usize = 10_000;
const C2_NETWORKS: usize = 200;
const C2_TIME_LIMIT: Duration = Duration::from_secs(600);
const C3_STEPS: usize = 24;
const C3_LAYERS_DILATED: usize = 5;
const C3_LAYERS_UNDILATED: usize = 12;
const C3_PERTURB_STACKS: usize = 300;
const C4_BYTES: usize = 576;
const C4_OPS: usize = 100_000;
const C5_FREQ_HZ: f64 = 54e6;
const C5_CIFAR_RATE: f64 = 3200.0;
const C5_DVS_RATE: f64 = 8000.0;
const C5_SLACK: f64 = 0.25;
const C6_CIFAR_J: f64 = 2.72e-6;
const C6_DVS_J: f64 = 5.5e-6;
const C6_FIRST_LAYER_EFF: f64 = 1036e12;
const C6_REPRO_TOL: f64 = 0.10;
const C6_HIGH_EFF: f64 = 318e12;
const C6_HIGH_TOL: f64 = 0.25;
const C6_REFIT_TOL: f64 = 1e-6;
const C7_REDUCTION: f64 = 0.36;
const C7_TOL_PP: f64 = 0.10;
const C7_CASES: usize = 400;
const C8_RUNS: usize = 3;
const C8_THREADS: [usize; 3] = [1, 2, 4];

struct Outcome {
    id: u32,
    pass: bool,
    detail: String,
    info: Vec<String>,
}

fn outcome(id: u32, pass: bool, detail: String) -> Outcome {
    Outcome {
        id,
        pass,
        detail,
        info: Vec::new(),
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn main() -> ExitCode {
    let criteria: [fn() -> Outcome; 8] = [c1, c2, c3, c4, c5, c6, c7, c8];
    let mut failed = 0;
    for c in criteria {
        let o = c();
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("{tag} criterion {}: {}", o.id, o.detail);
        for line in &o.info {
            println!("INFO criterion {}: {line}", o.id);
        }
        failed += !o.pass as usize;
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criterion(s) failed");
        ExitCode::FAILURE
    }
}

/// Direct causal dilated convolution, written independently of the library.
fn direct_tcn(x: &[i8], t: usize, cin: usize, w: &[i8], n: usize, cout: usize, d: usize) -> Vec<i32> {
    let mut out = vec![0i32; t * cout];
    for step in 0..t {
        for o in 0..cout {
            let mut acc = 0i32;
            for k in 0..n {
                // tap k multiplies x[step - (n-1-k) d]
                let back = (n - 1 - k) * d;
                if back > step {
                    continue;
                }
                for c in 0..cin {
                    acc += x[(step - back) * cin + c] as i32 * w[(k * cin + c) * cout + o] as i32;
                }
            }
            out[step * cout + o] = acc;
        }
    }
    out
}

fn c1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xC1);
    let mut bad = 0;
    for _ in 0..C1_CASES {
        let n = rng.gen_range(1..=3);
        let d = rng.gen_range(1..=8);
        let t = rng.gen_range(1..=64);
        let cin = rng.gen_range(1..=8);
        let cout = rng.gen_range(1..=8);
        let x = common::random_tensor(&mut rng, &[t, cin], 1.0 / 3.0);
        let w = common::random_tensor(&mut rng, &[n, cin, cout], 1.0 / 3.0);
        let spec = TcnLayerSpec {
            kernel: n,
            dilation: d,
            cin,
            cout,
            steps: t,
        };
        let (_, mapped) = tcn_map::map_tcn_layer(&spec, &x, &w).expect("mapping feasible");
        let reference = dilated_conv1d_ref(&x, &w, d).unwrap();
        let direct = direct_tcn(&x.to_i8(), t, cin, &w.to_i8(), n, cout, d);
        if mapped != reference || mapped.acc != direct || mapped.shape != [t, cout] {
            bad += 1;
        }
    }
    let took = start.elapsed();
    outcome(
        1,
        bad == 0 && took < C1_TIME_LIMIT,
        format!(
            "TCN mapping equivalence: {} cases, {bad} mismatches (exact), {:.1} s (limit {} s)",
            C1_CASES,
            took.as_secs_f64(),
            C1_TIME_LIMIT.as_secs()
        ),
    )
}

fn hardware_limit_layers() -> Vec<String> {
    let head = "schema_version = 1\nname = \"limit\"\n";
    vec![
        format!("{head}[input]\nkind = \"frame\"\nshape = [64, 64, 96]\n[[layer]]\nkind = \"conv2d\"\ncout = 96\npool = true\n"),
        format!("{head}[input]\nkind = \"sequence\"\nshape = [24, 96]\n[[layer]]\nkind = \"tcn1d\"\ncout = 96\nkernel = 3\ndilation = 8\n"),
        format!("{head}[input]\nkind = \"frame\"\nshape = [2, 2, 96]\n[[layer]]\nkind = \"fc\"\ncout = 96\n"),
    ]
}

/// Runs every layer of `net` on a fresh random input through both models;
/// returns the number of mismatching layers.
fn check_layers(rng: &mut ChaCha8Rng, net: &cutie::Network) -> usize {
    let mut bad = 0;
    for l in &net.plan.layers {
        let z = rng.gen_range(0.0..0.9);
        let x = common::random_tensor(rng, &l.input.dims(), z);
        let p = net.params[l.index].as_ref();
        let want = evaluate_layer(l, p, &x).expect("oracle runs");
        let opts = SimOptions {
            model_weight_reload: rng.gen_bool(0.5),
        };
        let got = Accelerator::new(HardwareConfig::default(), opts)
            .run_layer(l, p, &x)
            .expect("accelerator runs");
        bad += (got.output != want) as usize;
    }
    bad
}

fn network_matches(net: &cutie::Network, input: &NetworkInput) -> bool {
    let want = evaluate_network(net, input).expect("oracle runs");
    let got = Accelerator::default().run_network(net, input).expect("accelerator runs");
    want.layers.len() == got.layers.len()
        && want.layers.iter().zip(&got.layers).all(|(w, g)| *w == g.output)
        && want.prediction == got.prediction
}

fn c2() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xC2);
    let (mut layers, mut layer_bad) = (0, 0);
    for text in hardware_limit_layers() {
        let plan = parse_network_str(&text).unwrap();
        let params = common::random_params(&mut rng, &plan);
        let net = cutie::Network::new(plan, params).unwrap();
        layer_bad += check_layers(&mut rng, &net);
        layers += net.plan.layers.len();
    }
    while layers < C2_LAYERS {
        let net = common::random_network(&mut rng, 4);
        layer_bad += check_layers(&mut rng, &net);
        layers += net.plan.layers.len();
    }

    let (mut nets, mut net_bad) = (0, 0);
    for w in [workloads::cifar(), workloads::dvs()] {
        net_bad += !network_matches(&w.network, &w.input) as usize;
        nets += 1;
    }
    while nets < C2_NETWORKS {
        let net = common::random_network(&mut rng, 6);
        let input = common::random_input(&mut rng, &net);
        net_bad += !network_matches(&net, &input) as usize;
        nets += 1;
    }
    let took = start.elapsed();
    outcome(
        2,
        layer_bad == 0 && net_bad == 0 && took < C2_TIME_LIMIT,
        format!(
            "accelerator bit-exactness: {layers} layers ({layer_bad} mismatches), {nets} networks \
             ({net_bad} mismatches), {:.1} s (limit {} s)",
            took.as_secs_f64(),
            C2_TIME_LIMIT.as_secs()
        ),
    )
}

/// Runs a 1-channel stack through the oracle, thresholding between layers.
fn run_stack(x: &TernaryTensor, stack: &[(TernaryTensor, usize)], th: ThresholdPair) -> Vec<Trit> {
    let mut x = x.clone();
    for (w, d) in stack {
        let acc = dilated_conv1d_ref(&x, w, *d).unwrap();
        x = ternarize(&acc, &vec![th; w.shape()[2]]).unwrap();
    }
    let c = x.shape()[1];
    let t = x.shape()[0];
    (0..c).map(|o| x.get(&[t - 1, o])).collect()
}

/// Input steps whose perturbation changes the last output step.
fn influence(base: &TernaryTensor, stack: &[(TernaryTensor, usize)], th: ThresholdPair) -> Vec<usize> {
    let t = base.shape()[0];
    let cin = base.shape()[1];
    let reference = run_stack(base, stack, th);
    (0..t)
        .filter(|&s| {
            (0..cin).any(|c| {
                Trit::ALL.iter().any(|&v| {
                    let mut x = base.clone();
                    x.set(&[s, c], v);
                    run_stack(&x, stack, th) != reference
                })
            })
        })
        .collect()
}

fn c3() -> Outcome {
    let rf_dilated = tcn_map::receptive_field(C3_LAYERS_DILATED, 3, &DilationSchedule::Exponential);
    let rf_undilated = tcn_map::receptive_field(C3_LAYERS_UNDILATED, 3, &DilationSchedule::Undilated);
    let min_undilated = tcn_map::layers_to_cover(C3_STEPS, 3, &DilationSchedule::Undilated);
    let min_dilated = tcn_map::layers_to_cover(C3_STEPS, 3, &DilationSchedule::Exponential);
    // closed form against the generic sum
    let closed_ok = (0..8).all(|k| {
        tcn_map::receptive_field_at_layer(k, 3) == tcn_map::receptive_field(k + 1, 3, &DilationSchedule::Exponential)
    });
    let formula_ok = rf_dilated >= C3_STEPS
        && rf_undilated >= C3_STEPS
        && min_undilated == Some(C3_LAYERS_UNDILATED)
        && closed_ok;

    let mut rng = ChaCha8Rng::seed_from_u64(0xC3);
    let (mut dense_ok, mut bound_ok) = (0, 0);
    for i in 0..C3_PERTURB_STACKS {
        let depth = rng.gen_range(1..=5);
        let exponential = i % 2 == 0;
        let taps: Vec<(usize, usize)> = (0..depth)
            .map(|l| {
                let n = rng.gen_range(1..=3);
                let d = if exponential { 1 << l } else { rng.gen_range(1..=8) };
                (n, d)
            })
            .collect();
        let rf = tcn_map::receptive_field_of(&taps);
        let t = rf + rng.gen_range(1..=6);
        let c = rng.gen_range(1..=3);
        let dense = i % 4 < 2;
        let th = ThresholdPair::new(-1, 0).unwrap();
        let stack: Vec<(TernaryTensor, usize)> = taps
            .iter()
            .map(|&(n, d)| {
                let w = if dense {
                    TernaryTensor::from_i8(&[n, c, c], &vec![1; n * c * c]).unwrap()
                } else {
                    common::random_tensor(&mut rng, &[n, c, c], 0.3)
                };
                (w, d)
            })
            .collect();
        let base = if dense {
            TernaryTensor::zeros(&[t, c])
        } else {
            common::random_tensor(&mut rng, &[t, c], 0.3)
        };
        let inf = influence(&base, &stack, th);
        let earliest = t - rf;
        let within = inf.iter().all(|&s| s >= earliest);
        if dense {
            // dilated taps leave holes; the span is what must match
            dense_ok += (within && inf.first() == Some(&earliest) && inf.last() == Some(&(t - 1))) as usize;
        } else {
            bound_ok += within as usize;
        }
    }
    let half = C3_PERTURB_STACKS / 2;
    let mut o = outcome(
        3,
        formula_ok && dense_ok == half && bound_ok == half,
        format!(
            "receptive field: N=3 exponential x{C3_LAYERS_DILATED} covers {rf_dilated} >= {C3_STEPS} steps, \
             undilated needs {:?} layers (rf {rf_undilated}); perturbation: dense equal {dense_ok}/{half}, \
             random bounded {bound_ok}/{half}",
            min_undilated
        ),
    );
    o.info.push(format!(
        "smallest exponential N=3 stack covering {C3_STEPS} steps has {:?} layers (f = {} at 4 layers)",
        min_dilated,
        tcn_map::receptive_field(4, 3, &DilationSchedule::Exponential)
    ));
    o
}

fn c4() -> Outcome {
    let hw = HardwareConfig::default();
    let mem = TcnMemory::new(hw.tcn_steps, hw.tcn_width);
    let arithmetic = hw.tcn_steps * hw.tcn_width * 2 / 8;
    let bytes_ok = mem.packed_bytes() == C4_BYTES && packed_len(24 * 96) == C4_BYTES && arithmetic == C4_BYTES;

    let mut rng = ChaCha8Rng::seed_from_u64(0xC4);
    let (cap, width) = (hw.tcn_steps, hw.tcn_width);
    let mut mem = TcnMemory::new(cap, width);
    let mut model: std::collections::VecDeque<Vec<Trit>> = Default::default();
    let mut bad = 0;
    let vec_of = |rng: &mut ChaCha8Rng, n: usize| -> Vec<Trit> { (0..n).map(|_| Trit::ALL[rng.gen_range(0..3)]).collect() };
    for _ in 0..C4_OPS {
        match rng.gen_range(0..100) {
            0..=44 => {
                let n = rng.gen_range(0..=width + 2);
                let v = vec_of(&mut rng, n);
                let r = mem.push(&v);
                if n > width {
                    bad += !matches!(r, Err(AccelError::VectorTooWide { .. })) as usize;
                } else {
                    bad += r.is_err() as usize;
                    let mut full = v.clone();
                    full.resize(width, Trit::Zero);
                    if model.len() == cap {
                        model.pop_front();
                    }
                    model.push_back(full);
                }
            }
            45..=69 => {
                let s = rng.gen_range(0..cap + 2);
                match (mem.step(s), model.get(s)) {
                    (Ok(a), Some(b)) => bad += (&a != b) as usize,
                    (Err(_), None) => {}
                    _ => bad += 1,
                }
            }
            70..=94 => {
                let s = rng.gen_range(-3..cap as isize + 2);
                let expect: Option<Vec<Vec<Trit>>> = if s + 3 > model.len() as isize {
                    None
                } else {
                    Some(
                        (s..s + 3)
                            .map(|i| if i < 0 { vec![Trit::Zero; width] } else { model[i as usize].clone() })
                            .collect(),
                    )
                };
                match (mem.window_padded(s), expect) {
                    (Ok(a), Some(b)) => bad += (a.to_vec() != b) as usize,
                    (Err(_), None) => {}
                    _ => bad += 1,
                }
            }
            95..=98 => bad += (mem.len() != model.len()) as usize,
            _ => {
                mem.clear();
                model.clear();
            }
        }
    }
    outcome(
        4,
        bytes_ok && bad == 0,
        format!(
            "TCN memory: {}x{} trits pack to {} bytes (expected {C4_BYTES}); {C4_OPS} ring ops, {bad} disagreements",
            hw.tcn_steps,
            hw.tcn_width,
            TcnMemory::new(hw.tcn_steps, hw.tcn_width).packed_bytes()
        ),
    )
}

/// Cycle count of a plan from the documented schedule, computed here
/// rather than by the simulator.
fn schedule_cycles(plan: &cutie::netcfg::NetworkPlan) -> u64 {
    let per_layer = |l: &cutie::netcfg::ResolvedLayer| -> u64 {
        match &l.op {
            LayerOp::Conv2d { padding, fold, .. } => {
                let (h, w) = match fold {
                    Some(f) => (f.steps.div_ceil(f.dilation), f.dilation),
                    None => (l.input.dims()[0], l.input.dims()[1]),
                };
                let wp = w + padding.left + padding.right;
                let hp = h + padding.top + padding.bottom;
                (2 * wp + 3 + (hp - 2) * (wp - 2) + 1) as u64
            }
            LayerOp::Tcn1d { spec } => {
                let p = tcn_map::mapping_padding(spec.kernel);
                let (h, w) = (spec.folded_rows(), spec.dilation);
                let wp = w + p.left + p.right;
                let hp = h + p.top + p.bottom;
                (2 * wp + 3 + (hp - 2) * (wp - 2) + 1) as u64
            }
            LayerOp::Maxpool => {
                let d = l.input.dims();
                (d[1] + 2 + (d[0] / 2) * (d[1] / 2) + 1) as u64
            }
            LayerOp::Fc => {
                let d = l.input.dims();
                (d.iter().product::<usize>() / d[d.len() - 1] + 1) as u64
            }
        }
    };
    let frames = plan.hop() as u64;
    plan.frame_layers().iter().map(per_layer).sum::<u64>() * if plan.tcn_start.is_some() { frames } else { 1 }
        + plan.sequence_layers().iter().map(per_layer).sum::<u64>()
}

fn c5() -> Outcome {
    let cifar = workloads::cifar().simulate(SimOptions::default());
    let dvs = workloads::dvs().simulate(SimOptions::default());
    let cifar_budget = C5_FREQ_HZ / C5_CIFAR_RATE;
    let dvs_budget = C5_FREQ_HZ / C5_DVS_RATE;
    let (cc, dc) = (cifar.total.cycles as f64, dvs.total.cycles as f64);
    let schedule_ok = schedule_cycles(&workloads::cifar_plan()) == cifar.total.cycles
        && schedule_ok_dvs(&dvs);
    // ">= rate": the cycle count must fit the budget
    let cifar_ok = cc <= cifar_budget;
    // "~ rate within -0/+25%": rate in [rate, 1.25 rate]
    let dvs_ok = dc <= dvs_budget && dc >= dvs_budget / (1.0 + C5_SLACK);
    let mut o = outcome(
        5,
        schedule_ok && cifar_ok && dvs_ok,
        format!(
            "cycles at 54 MHz: CIFAR {} (budget <= {:.0}, {:.0} inf/s >= {C5_CIFAR_RATE}); DVS {} (window \
             [{:.0}, {:.0}], {:.0} inf/s); schedule formula agrees: {schedule_ok}",
            cifar.total.cycles,
            cifar_budget,
            C5_FREQ_HZ / cc,
            dvs.total.cycles,
            dvs_budget / (1.0 + C5_SLACK),
            dvs_budget,
            C5_FREQ_HZ / dc
        ),
    );
    let strict = cc >= cifar_budget / (1.0 + C5_SLACK) && cc <= cifar_budget;
    o.info.push(format!(
        "CIFAR under the two-sided window [{:.0}, {:.0}] cycles: {} (the one-window-per-cycle schedule \
         runs {:.1}x faster than the budget)",
        cifar_budget / (1.0 + C5_SLACK),
        cifar_budget,
        if strict { "inside" } else { "outside" },
        cifar_budget / cc
    ));
    o
}

fn schedule_ok_dvs(report: &SimReport) -> bool {
    schedule_cycles(&workloads::dvs_plan()) == report.total.cycles
}

/// Solves the 3x3 system with Cramer's rule.
fn solve3(a: [[f64; 3]; 3], b: [f64; 3]) -> [f64; 3] {
    let det = |m: [[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(a);
    [0, 1, 2].map(|j| {
        let mut m = a;
        for i in 0..3 {
            m[i][j] = b[i];
        }
        det(m) / d
    })
}

fn c6() -> Outcome {
    let cal = Calibration::shipped();
    let policy = cal.ops_policy();
    let op05 = cal.operating_point(0.5).unwrap();
    let op09 = cal.operating_point(0.9).unwrap();
    let cifar = workloads::cifar().simulate(SimOptions::default());
    let dvs = workloads::dvs().simulate(SimOptions::default());
    let sparse = workloads::cifar_sparse().simulate(SimOptions::default());

    let e_cifar = perf::estimate_energy(&cifar, &op05).energy_per_inference;
    let e_dvs = perf::estimate_energy(&dvs, &op05).energy_per_inference;
    // independent evaluation of the energy formula
    let by_hand = |r: &SimReport| {
        let c = &r.total;
        op05.e_toggle * c.toggles as f64
            + op05.e_mem * (c.fmap_reads + c.fmap_writes + c.weight_loads) as f64
            + op05.p_leak_idle * c.cycles as f64 / op05.fmax
    };
    let formula_ok = rel(by_hand(&cifar), e_cifar) < 1e-12 && rel(by_hand(&dvs), e_dvs) < 1e-12;

    let first = |r: &SimReport, op| perf::throughput_and_efficiency(r, op, policy).layers[0].efficiency;
    let eff05 = first(&cifar, &op05);
    let eff09 = first(&cifar, &op09);

    // the shipped constants must be the exact solution of the fit equations
    let f = op05.fmax;
    let feat = |r: &SimReport| {
        let c = &r.total;
        [c.toggles as f64, (c.fmap_reads + c.fmap_writes + c.weight_loads) as f64, c.cycles as f64 / f]
    };
    let (fc, fd, fs) = (feat(&cifar), feat(&dvs), feat(&sparse));
    let keep = 1.0 - C7_REDUCTION;
    let theta = solve3(
        [fc, fd, [0, 1, 2].map(|j| fs[j] - keep * fc[j])],
        [C6_CIFAR_J, C6_DVS_J, 0.0],
    );
    let shipped = [cal.energy.e_toggle, cal.energy.e_mem, cal.energy.p_leak_idle];
    let refit_ok = theta.iter().all(|&t| t > 0.0)
        && theta.iter().zip(shipped).all(|(&a, b)| rel(b, a) < C6_REFIT_TOL);

    let repro_ok = rel(e_cifar, C6_CIFAR_J) <= C6_REPRO_TOL
        && rel(e_dvs, C6_DVS_J) <= C6_REPRO_TOL
        && rel(eff05, C6_FIRST_LAYER_EFF) <= C6_REPRO_TOL;
    let cross_ok = rel(eff09, C6_HIGH_EFF) <= C6_HIGH_TOL;

    // voltage trends over both networks
    let volts: Vec<f64> = (0..=8).map(|i| 0.5 + 0.05 * i as f64).collect();
    let points: Vec<_> = volts.iter().map(|&v| cal.operating_point(v).unwrap()).collect();
    let rows = perf::sweep(&[cifar.clone(), dvs.clone()], &points, policy);
    let mut trend_ok = true;
    for w in rows.windows(2).filter(|w| w[0].network == w[1].network) {
        trend_ok &= w[1].energy_per_inference_j > w[0].energy_per_inference_j;
        trend_ok &= w[1].inferences_per_second > w[0].inferences_per_second;
        trend_ok &= w[1].peak_layer_throughput_ops > w[0].peak_layer_throughput_ops;
        trend_ok &= w[1].peak_layer_efficiency_ops_per_w < w[0].peak_layer_efficiency_ops_per_w;
    }

    let mut o = outcome(
        6,
        formula_ok && refit_ok && repro_ok && cross_ok && trend_ok,
        format!(
            "energy at 0.5 V: CIFAR {:.3} uJ, DVS {:.3} uJ (+-{:.0}%); first-layer {:.1} TOp/s/W at 0.5 V \
             (+-{:.0}% of 1036), {:.1} TOp/s/W at 0.9 V (+-{:.0}% of 318); refit {refit_ok}; trends {trend_ok}",
            e_cifar * 1e6,
            e_dvs * 1e6,
            C6_REPRO_TOL * 100.0,
            eff05 / 1e12,
            C6_REPRO_TOL * 100.0,
            eff09 / 1e12,
            C6_HIGH_TOL * 100.0
        ),
    );
    let peak05 = perf::throughput_and_efficiency(&cifar, &op05, policy).layers[0].throughput;
    let peak09 = perf::throughput_and_efficiency(&cifar, &op09, policy).layers[0].throughput;
    let analytic05 = perf::throughput_and_efficiency(&cifar, &op05, perf::OpsPolicy::Analytic).layers[0].throughput;
    o.info.push(format!(
        "first-layer throughput: {:.1} / {:.1} TOp/s at 0.5 / 0.9 V under the calibrated ops convention \
         (scale {:.3}), {:.2} TOp/s analytic at 0.5 V; published figures 14.9 / 51.7 (text), 16 / 56 (table)",
        peak05 / 1e12,
        peak09 / 1e12,
        cal.ops.scale,
        analytic05 / 1e12
    ));
    o.info.push(format!(
        "0.9 V first-layer efficiency vs the table's 446 TOp/s/W: {:+.1}%",
        (eff09 / 446e12 - 1.0) * 100.0
    ));
    o
}

fn c7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC7);
    let hw = HardwareConfig::default();
    let mut checks = 0;
    let mut mono_bad = 0;
    let mut zero_bad = 0;
    while checks < C7_CASES {
        let net = common::random_network(&mut rng, 3);
        for l in &net.plan.layers {
            if l.weight_shape.is_none() {
                continue;
            }
            let p = net.params[l.index].as_ref();
            let dims = l.input.dims();
            let z = rng.gen_range(0.0..0.7);
            let mut x = common::random_tensor(&mut rng, &dims, z);
            let mut acc = Accelerator::new(hw, SimOptions::default());
            let mut prev = acc.run_layer(l, p, &x).unwrap().counters.toggles;
            for _ in 0..4 {
                let nz: Vec<usize> = (0..x.len()).filter(|&i| !x.get_flat(i).is_zero()).collect();
                if nz.is_empty() {
                    break;
                }
                x.set_flat(nz[rng.gen_range(0..nz.len())], Trit::Zero);
                let now = acc.run_layer(l, p, &x).unwrap().counters.toggles;
                mono_bad += (now > prev) as usize;
                prev = now;
            }
            let zeros = TernaryTensor::zeros(&dims);
            zero_bad += (acc.run_layer(l, p, &zeros).unwrap().counters.toggles != 0) as usize;
            checks += 1;
        }
    }
    // whole shipped networks on all-zero inputs
    for w in [workloads::cifar(), workloads::dvs()] {
        let input = match &w.input {
            NetworkInput::Frame(x) => NetworkInput::Frame(TernaryTensor::zeros(x.shape())),
            NetworkInput::Frames(f) => NetworkInput::Frames(f.iter().map(|x| TernaryTensor::zeros(x.shape())).collect()),
            NetworkInput::Sequence(x) => NetworkInput::Sequence(TernaryTensor::zeros(x.shape())),
        };
        let run = Accelerator::default().run_network(&w.network, &input).unwrap();
        zero_bad += (run.total().toggles + run.warmup.toggles != 0) as usize;
    }

    let cal = Calibration::shipped();
    let op = cal.operating_point(0.5).unwrap();
    let dense = workloads::cifar().simulate(SimOptions::default());
    let sparse = workloads::cifar_sparse().simulate(SimOptions::default());
    let e = |r: &SimReport| perf::estimate_energy(r, &op).energy_per_inference;
    let reduction = 1.0 - e(&sparse) / e(&dense);
    let red_ok = (reduction - C7_REDUCTION).abs() <= C7_TOL_PP;
    outcome(
        7,
        mono_bad == 0 && zero_bad == 0 && red_ok,
        format!(
            "sparsity: {checks} layers, {mono_bad} toggle increases under zeroing, {zero_bad} nonzero \
             all-zero runs; sparse vs dense energy reduction {:.1}% (36% +- {:.0} pp)",
            reduction * 100.0,
            C7_TOL_PP * 100.0
        ),
    )
}

fn c8() -> Outcome {
    let report_json = || {
        let c = workloads::cifar().simulate(SimOptions::default()).to_json();
        let d = workloads::dvs().simulate(SimOptions::default()).to_json();
        format!("{c}{d}")
    };
    let first = report_json();
    let runs_ok = (1..C8_RUNS).all(|_| report_json() == first);

    let net = common::random_network(&mut ChaCha8Rng::seed_from_u64(0xC8), 5);
    let cfg = VerifyConfig {
        trials: 64,
        seed: 8,
        ..Default::default()
    };
    let in_pool = |n: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap();
        pool.install(|| {
            let v = serde_json::to_string(&verify::verify(&net, &cfg).unwrap()).unwrap();
            let (cal, _) = workloads::calibrate().unwrap();
            format!("{v}{}", cal.to_toml())
        })
    };
    let outputs: Vec<String> = C8_THREADS.iter().map(|&n| in_pool(n)).collect();
    let threads_ok = outputs.windows(2).all(|w| w[0] == w[1]);
    let shipped_ok = workloads::calibrate().unwrap().0 == Calibration::shipped();
    outcome(
        8,
        runs_ok && threads_ok && shipped_ok,
        format!(
            "determinism: {C8_RUNS} runs byte-identical: {runs_ok}; verify + calibration identical across \
             {:?} threads: {threads_ok}; shipped calibration equals refit: {shipped_ok}",
            C8_THREADS
        ),
    )
}
