use super::*;
use crate::netcfg::{parse_network_str, NetworkPlan};
use crate::network::LayerParams;
use crate::oracle::{self, ThresholdPair};
use crate::oracle::testutil::random_tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn plan(text: &str) -> NetworkPlan {
    parse_network_str(text).unwrap()
}

fn conv_net(h: usize, w: usize, cin: usize, cout: usize, extra: &str) -> NetworkPlan {
    plan(&format!(
        "schema_version = 1\nname = \"t\"\n[input]\nkind = \"frame\"\nshape = [{h}, {w}, {cin}]\n\
         [[layer]]\nkind = \"conv2d\"\ncout = {cout}\n{extra}"
    ))
}

fn thresholds(rng: &mut impl Rng, n: usize) -> Vec<ThresholdPair> {
    (0..n)
        .map(|_| {
            let lo = rng.gen_range(-6..=2);
            ThresholdPair::new(lo, lo + rng.gen_range(0..=6)).unwrap()
        })
        .collect()
}

#[test]
fn one_by_one_map_takes_one_compute_cycle() {
    let p = conv_net(1, 1, 4, 2, "");
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let params = LayerParams {
        weights: random_tensor(&mut rng, &[3, 3, 4, 2]),
        thresholds: Some(thresholds(&mut rng, 2)),
    };
    let x = random_tensor(&mut rng, &[1, 1, 4]);
    let mut acc = Accelerator::default();
    let run = acc.run_layer(&p.layers[0], Some(&params), &x).unwrap();
    assert_eq!(run.timing.compute, 1);
    // padded row width 3: 2 * 3 + 3
    assert_eq!(run.timing.prefill, 9);
    assert_eq!(run.counters.cycles, 9 + 1 + DRAIN_CYCLES);
    let want = oracle::evaluate_layer(&p.layers[0], Some(&params), &x).unwrap();
    assert_eq!(run.output, want);
}

#[test]
fn cifar_sized_layer_counts() {
    let p = conv_net(32, 32, 96, 96, "");
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let params = LayerParams {
        weights: random_tensor(&mut rng, &[3, 3, 96, 96]),
        thresholds: Some(thresholds(&mut rng, 96)),
    };
    let x = random_tensor(&mut rng, &[32, 32, 96]);
    let run = Accelerator::default()
        .run_layer(&p.layers[0], Some(&params), &x)
        .unwrap();
    assert_eq!(run.timing.compute, 1024);
    // analytic: windows x OCUs x 3 x 3 x Cin
    assert_eq!(run.counters.mac_ops, 1024 * 9 * 96 * 96);
    assert_eq!(run.counters.mac_ops, 84_934_656);
    assert_eq!(run.counters.fmap_reads, 32 * 32 * 96);
    assert_eq!(run.counters.weight_loads, 9 * 96 * 96);
    assert!(run.counters.toggles <= run.counters.mac_ops);
}

#[test]
fn cycles_do_not_depend_on_data() {
    let p = conv_net(9, 7, 5, 6, "pool = false\n");
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let params = LayerParams {
        weights: random_tensor(&mut rng, &[3, 3, 5, 6]),
        thresholds: Some(thresholds(&mut rng, 6)),
    };
    let zero = TernaryTensor::zeros(&[9, 7, 5]);
    let dense = random_tensor(&mut rng, &[9, 7, 5]);
    let mut acc = Accelerator::default();
    let a = acc.run_layer(&p.layers[0], Some(&params), &zero).unwrap();
    let b = acc.run_layer(&p.layers[0], Some(&params), &dense).unwrap();
    assert_eq!(a.timing, b.timing);
    assert_eq!(a.counters.toggles, 0);
    assert!(b.counters.toggles > 0);
}

#[test]
fn missing_weights_are_reported() {
    let p = conv_net(4, 4, 2, 2, "");
    let err = Accelerator::default()
        .run_layer(&p.layers[0], None, &TernaryTensor::zeros(&[4, 4, 2]))
        .unwrap_err();
    assert!(matches!(err, AccelError::WeightsNotLoaded { layer: 0 }));
}

#[test]
fn oversized_layers_are_rejected_on_small_hardware() {
    let p = conv_net(16, 16, 8, 8, "");
    let hw = HardwareConfig {
        max_fmap_h: 8,
        max_fmap_w: 8,
        ..Default::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let params = LayerParams {
        weights: random_tensor(&mut rng, &[3, 3, 8, 8]),
        thresholds: Some(thresholds(&mut rng, 8)),
    };
    let err = Accelerator::new(hw, SimOptions::default())
        .run_layer(&p.layers[0], Some(&params), &random_tensor(&mut rng, &[16, 16, 8]))
        .unwrap_err();
    assert!(matches!(err, AccelError::DimensionExceedsHardware(_)));
}

#[test]
fn gating_half_the_units_halves_toggles() {
    // columns o and o + 48 carry identical weights, so the gated half is an
    // exact copy of the active half
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let half = random_tensor(&mut rng, &[3, 3, 16, 48]).to_i8();
    let mut w = Vec::with_capacity(half.len() * 2);
    for row in half.chunks(48) {
        w.extend_from_slice(row);
        w.extend_from_slice(row);
    }
    let weights = TernaryTensor::from_i8(&[3, 3, 16, 96], &w).unwrap();
    let th = thresholds(&mut rng, 96);
    let x = random_tensor(&mut rng, &[12, 12, 16]);
    let full = conv_net(12, 12, 16, 96, "");
    let gated = conv_net(12, 12, 16, 96, "active_channels = 48\n");
    let params = LayerParams {
        weights,
        thresholds: Some(th),
    };
    let mut acc = Accelerator::default();
    let a = acc.run_layer(&full.layers[0], Some(&params), &x).unwrap();
    let b = acc.run_layer(&gated.layers[0], Some(&params), &x).unwrap();
    assert_eq!(a.counters.toggles, 2 * b.counters.toggles);
    assert_eq!(a.counters.mac_ops, 2 * b.counters.mac_ops);
    assert_eq!(a.timing, b.timing);

    // active channels are unaffected, gated ones read zero
    let (ta, tb) = (a.output.as_ternary().unwrap(), b.output.as_ternary().unwrap());
    for i in 0..ta.len() {
        if i % 96 < 48 {
            assert_eq!(ta.get_flat(i), tb.get_flat(i));
        } else {
            assert_eq!(tb.get_flat(i), Trit::Zero);
        }
    }

    let one = conv_net(12, 12, 16, 96, "active_channels = 1\n");
    let c = acc.run_layer(&one.layers[0], Some(&params), &x).unwrap();
    assert_eq!(c.counters.mac_ops, 144 * 9 * 16);
    assert_eq!(c.counters.weight_loads, 9 * 16);
}

#[test]
fn weight_reload_flag_adds_cycles() {
    let p = conv_net(8, 8, 4, 4, "");
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let params = LayerParams {
        weights: random_tensor(&mut rng, &[3, 3, 4, 4]),
        thresholds: Some(thresholds(&mut rng, 4)),
    };
    let x = random_tensor(&mut rng, &[8, 8, 4]);
    let base = Accelerator::default()
        .run_layer(&p.layers[0], Some(&params), &x)
        .unwrap();
    let reload = Accelerator::new(
        HardwareConfig::default(),
        SimOptions {
            model_weight_reload: true,
        },
    )
    .run_layer(&p.layers[0], Some(&params), &x)
    .unwrap();
    assert_eq!(reload.counters.cycles, base.counters.cycles + 36);
    assert_eq!(reload.output, base.output);
}

#[test]
fn tcn_sequence_reads_match_memory() {
    let mut acc = Accelerator::default();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let vs: Vec<TernaryTensor> = (0..30).map(|_| random_tensor(&mut rng, &[10])).collect();
    for v in &vs {
        acc.tcn_push(v).unwrap();
    }
    for steps in [1, 2, 3, 4, 5, 7, 24] {
        let x = acc.read_tcn_sequence(steps, 10).unwrap();
        for t in 0..steps {
            let src = &vs[30 - steps + t];
            for c in 0..10 {
                assert_eq!(x.get(&[t, c]), src.get_flat(c));
            }
        }
    }
    assert!(matches!(
        acc.read_tcn_sequence(25, 10),
        Err(AccelError::TcnUnderflow { needed: 25, available: 24 })
    ));
    let mut fresh = Accelerator::default();
    fresh.tcn_push(&vs[0]).unwrap();
    let x = fresh.read_tcn_sequence(1, 10).unwrap();
    assert_eq!(x.reshape(&[10]).unwrap(), vs[0]);
}
