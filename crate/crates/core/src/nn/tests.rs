use super::*;
use crate::data::{roll_dataset, synth_panoramic, RollPolicy};
use crate::group_action::roll;
use crate::nn::gradcheck::network_gradient_error;

fn spec(input: [usize; 3], layers: &str) -> NetworkSpec {
    let layers = layers
        .split(';')
        .map(|l| l.parse().unwrap())
        .collect();
    NetworkSpec::new("test", input, layers)
}

fn worst_grad_error(spec: &NetworkSpec, mode: Mode, seed: u64) -> f64 {
    network_gradient_error(spec, mode, seed, 3).unwrap()
}

const LAYER_CASES: &[(&str, [usize; 3], &str)] = &[
    ("ccl", [2, 5, 6], "ccl(3,3,3);gap(30);softmax"),
    ("ccl-wide", [1, 4, 7], "ccl(2,3,5);gap(28);softmax"),
    ("conv", [2, 5, 6], "conv(3,3,3);gap(30);softmax"),
    ("relu", [1, 4, 6], "fc(24,5);relu;fc(5,3);softmax"),
    ("maxpool", [2, 6, 6], "maxpool(2,2);fc(18,3);softmax"),
    ("orbitpool-max", [2, 4, 6], "orbitpool(max);fc(8,3);softmax"),
    ("orbitpool-avg", [2, 4, 6], "orbitpool(avg);fc(8,3);softmax"),
    ("gap", [3, 4, 5], "gap(20);softmax"),
    ("bn", [2, 4, 6], "bn;fc(48,3);softmax"),
    ("fc", [1, 3, 4], "fc(12,4);softmax"),
];

#[test]
fn every_layer_passes_finite_differences() {
    for (name, input, layers) in LAYER_CASES {
        let s = spec(*input, layers);
        for mode in [Mode::Direct, Mode::Spectral] {
            let err = worst_grad_error(&s, mode, 1);
            assert!(err < 1e-6, "{name} ({mode:?}): relative error {err:e}");
        }
    }
}

#[test]
fn two_layer_composition_passes_finite_differences() {
    let s = spec([1, 6, 8], "ccl(3,3,3);relu;ccl(2,3,3);relu;orbitpool(max);fc(12,4);softmax");
    for mode in [Mode::Direct, Mode::Spectral] {
        let err = worst_grad_error(&s, mode, 2);
        assert!(err < 1e-6, "{mode:?}: relative error {err:e}");
    }
}

#[test]
fn zero_fc_gives_log_k_loss() {
    let s = spec([1, 3, 4], "fc(12,7);softmax");
    let mut net = Network::<f64>::build(&s, 0, Mode::Direct).unwrap();
    for p in net.params_mut() {
        p.data_mut().iter_mut().for_each(|v| *v = 0.0);
    }
    let x = Tensor::<f64>::random_normal(&[4, 1, 3, 4], 3, 0.0, 1.0).unwrap();
    let logits = net.logits(&x).unwrap();
    let (loss, _) = softmax_cross_entropy_batch(&logits, &[0, 3, 6, 2]).unwrap();
    assert!((loss - 7f64.ln()).abs() < 1e-12);
}

#[test]
fn build_is_seeded() {
    let s = NetworkSpec::named("mnist-ccl").unwrap();
    let mut a = Network::<f32>::build(&s, 5, Mode::Direct).unwrap();
    let mut b = Network::<f32>::build(&s, 5, Mode::Direct).unwrap();
    let mut c = Network::<f32>::build(&s, 6, Mode::Direct).unwrap();
    let pa: Vec<Tensor<f32>> = a.params_mut().into_iter().map(|t| t.clone()).collect();
    let pb: Vec<Tensor<f32>> = b.params_mut().into_iter().map(|t| t.clone()).collect();
    let pc: Vec<Tensor<f32>> = c.params_mut().into_iter().map(|t| t.clone()).collect();
    assert_eq!(pa, pb);
    assert_ne!(pa, pc);
    assert_eq!(a.num_classes(), 10);
}

#[test]
fn orbit_pooled_network_is_roll_invariant() {
    let s = spec([1, 6, 12], "ccl(4,3,3);relu;ccl(3,3,3);relu;orbitpool(max);fc(18,5);softmax");
    let mut net = Network::<f32>::build(&s, 8, Mode::Direct).unwrap();
    let f = CylinderMap::<f32>::random_normal(1, 6, 12, 4).unwrap();
    let base = net.logits(&f.clone().into_tensor().reshape(&[1, 1, 6, 12]).unwrap()).unwrap();
    for r in 0..12 {
        let g = roll(&f, r).into_tensor().reshape(&[1, 1, 6, 12]).unwrap();
        assert_eq!(net.logits(&g).unwrap(), base, "roll {r}");
    }
}

#[test]
fn stride_two_pooling_breaks_odd_roll_invariance() {
    let s = spec([1, 6, 12], "ccl(3,3,3);relu;maxpool(2,2);orbitpool(avg);fc(9,4);softmax");
    let mut net = Network::<f64>::build(&s, 8, Mode::Direct).unwrap();
    let f = CylinderMap::<f64>::random_normal(1, 6, 12, 4).unwrap();
    let as_batch = |m: CylinderMap<f64>| m.into_tensor().reshape(&[1, 1, 6, 12]).unwrap();
    let base = net.logits(&as_batch(f.clone())).unwrap();
    assert!(net.logits(&as_batch(roll(&f, 2))).unwrap().max_abs_diff(&base).unwrap() < 1e-12);
    let d = net.logits(&as_batch(roll(&f, 1))).unwrap().max_abs_diff(&base).unwrap();
    assert!(d > 1e-6, "{d}");
}

#[test]
fn training_reduces_loss() {
    let ds = synth_panoramic::<f32>(16, 3, 8, 16, 3).unwrap();
    let s = spec([1, 8, 16], "ccl(4,3,3);relu;ccl(4,3,3);relu;orbitpool(max);fc(32,3);softmax");
    let mut net = Network::<f32>::build(&s, 1, Mode::Direct).unwrap();
    let cfg = TrainConfig {
        epochs: 11,
        batch_size: 8,
        lr: 3e-3,
        seed: 2,
    };
    let mut adam = AdamState::new(cfg.lr);
    let first = train_epoch(&mut net, &mut adam, &ds, &cfg, 0).unwrap();
    let mut last = first;
    for e in 1..cfg.epochs {
        last = train_epoch(&mut net, &mut adam, &ds, &cfg, e).unwrap();
    }
    assert!(last.loss < 0.5 * first.loss, "{first:?} -> {last:?}");
    // orbit pooling makes the trained classifier blind to rolls
    let rolled = roll_dataset(&ds, &RollPolicy::uniform(9)).unwrap();
    assert_eq!(predict(&mut net, &ds).unwrap(), predict(&mut net, &rolled).unwrap());
    let eval = evaluate(&mut net, &ds).unwrap();
    assert!(eval.accuracy > 0.8, "{eval:?}");
}

#[test]
fn training_is_deterministic() {
    let ds = synth_panoramic::<f32>(4, 2, 6, 12, 3).unwrap();
    let s = spec([1, 6, 12], "ccl(2,3,3);relu;gap(72);fc(2,2);softmax");
    let run = || {
        let mut net = Network::<f32>::build(&s, 1, Mode::Direct).unwrap();
        let cfg = TrainConfig {
            epochs: 2,
            batch_size: 3,
            lr: 1e-2,
            seed: 4,
        };
        let mut adam = AdamState::new(cfg.lr);
        let m: Vec<EpochMetrics> = (0..2)
            .map(|e| train_epoch(&mut net, &mut adam, &ds, &cfg, e).unwrap())
            .collect();
        (m, net.params_mut().into_iter().map(|t| t.clone()).collect::<Vec<_>>())
    };
    assert_eq!(run(), run());
}

#[test]
fn checkpoint_round_trip() {
    let s = spec([1, 6, 12], "ccl(3,3,3);bn;relu;orbitpool(avg);fc(18,4);softmax");
    let mut net = Network::<f64>::build(&s, 3, Mode::Direct).unwrap();
    let x = Tensor::<f64>::random_normal(&[4, 1, 6, 12], 1, 0.0, 1.0).unwrap();
    net.forward_train(&x).unwrap();
    let want = net.logits(&x).unwrap();
    let dir = std::env::temp_dir().join(format!("ccl-ckpt-{}", std::process::id()));
    save_checkpoint(&mut net, &dir).unwrap();
    assert_eq!(checkpoint_precision(&dir).unwrap(), crate::scalar::Precision::F64);
    let mut back = load_checkpoint::<f64>(&dir, Mode::Direct).unwrap();
    assert_eq!(back.logits(&x).unwrap(), want);
    assert!(load_checkpoint::<f32>(&dir, Mode::Direct).is_err());
    std::fs::remove_dir_all(dir).ok();
}

#[test]
fn gap_network_is_nearly_invariant() {
    let s = spec([1, 6, 12], "ccl(4,3,3);relu;ccl(3,3,3);relu;gap(72);fc(3,3);softmax");
    let mut net = Network::<f32>::build(&s, 2, Mode::Spectral).unwrap();
    let f = CylinderMap::<f32>::random_normal(1, 6, 12, 7).unwrap();
    let as_batch = |m: CylinderMap<f32>| m.into_tensor().reshape(&[1, 1, 6, 12]).unwrap();
    let base = net.logits(&as_batch(f.clone())).unwrap();
    for r in 0..12 {
        let d = net.logits(&as_batch(roll(&f, r))).unwrap().max_abs_diff(&base).unwrap();
        assert!(d < 1e-6, "roll {r}: {d}");
    }
}
