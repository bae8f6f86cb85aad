//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits nonzero if any fails.
//!
//! Run all: `cargo test --release --test acceptance`
//! Run some: `cargo test --release --test acceptance -- 3 5`

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use ccl_core::ccl::{CclKernel, CclLayer, KernelEmbedding, Mode};
use ccl_core::data::{bundled_mnist_dir, load_mnist, RolledComposition, Split};
use ccl_core::group_action::roll;
use ccl_core::harness::{
    oracle_deviation, orbit_invariance_deviation, run_accuracy_matrix, run_bench, run_discretization_sweep,
    AccuracyConfig, BenchConfig, DataVariant, SweepConfig, SIZES,
};
use ccl_core::nn::gradcheck::network_gradient_error;
use ccl_core::nn::{Network, NetworkSpec, TrainConfig};
use ccl_core::spectral::{dct2, dct3_inverse};
use ccl_core::tensor::{CounterRng, CylinderMap};

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Outcome {
            pass,
            detail: detail.into(),
        }
    }
}

fn spec(name: &str, input: [usize; 3], layers: &str) -> NetworkSpec {
    NetworkSpec::new(name, input, layers.split(';').map(|l| l.parse().unwrap()).collect())
}

fn within(elapsed: Duration, limit_s: u64) -> bool {
    elapsed <= Duration::from_secs(limit_s)
}

/// 200 random pairs per size, H, W in {4, 7, 16, 28}, C in {1, 3}, f64.
fn c1_spectral_oracle_equivalence() -> Outcome {
    let t = Instant::now();
    let mut worst = 0.0f64;
    for h in SIZES {
        for w in SIZES {
            for c in [1, 3] {
                let seed = ((h * 100 + w) * 10 + c) as u64;
                worst = worst.max(oracle_deviation::<f64>(h, w, c, 200, seed, KernelEmbedding::Centered).unwrap());
            }
        }
    }
    let el = t.elapsed();
    Outcome::new(
        worst < 1e-10 && within(el, 30),
        format!("max |oracle - spectral| = {worst:.3e} (< 1e-10), {:.1} s (< 30 s)", el.as_secs_f64()),
    )
}

/// Single layer f64 under every roll; 3-layer ReLU stack f32, N = 100.
fn c2_rotation_equivariance() -> Outcome {
    let t = Instant::now();
    let mut single = 0.0f64;
    for (i, (h, w)) in [(28, 28), (16, 28), (7, 16)].into_iter().enumerate() {
        let mut rng = CounterRng::new(100 + i as u64);
        let kernel = CclKernel::<f64>::random_normal(10, 10, 3, 3, rng.next_u64()).unwrap();
        let f = CylinderMap::<f64>::random_normal(10, h, w, rng.next_u64()).unwrap();
        for mode in [Mode::Direct, Mode::Spectral] {
            let mut layer = CclLayer::new(kernel.clone(), mode);
            let out = layer.forward(&f).unwrap();
            for s in 0..w as isize {
                let d = roll(&out, s).max_abs_diff(&layer.forward(&roll(&f, s)).unwrap()).unwrap();
                single = single.max(d);
            }
        }
    }
    let cfg = SweepConfig {
        depths: vec![3],
        resolutions: vec![28],
        samples: 100,
        seed: 7,
        mode: Mode::Spectral,
        channels: 10,
        kernel: 3,
    };
    let report = run_discretization_sweep::<f32>(&cfg).unwrap();
    let eps = report.records[0].eps_mean;
    let el = t.elapsed();
    Outcome::new(
        single < 1e-12 && (1e-8..=1e-6).contains(&eps) && within(el, 120),
        format!(
            "single layer max dev {single:.3e} (< 1e-12); 3-layer f32 eps mean {eps:.3e} (in [1e-8, 1e-6]); {:.1} s (< 120 s)",
            el.as_secs_f64()
        ),
    )
}

/// Direct summation of `F_k = sum_n x_n cos(pi/N (n + 1/2) k)` as the oracle.
fn c3_dct() -> Outcome {
    let (mut direct, mut round) = (0.0f64, 0.0f64);
    for n in [1usize, 2, 5, 28, 48] {
        let mut rng = CounterRng::new(n as u64);
        let x: Vec<f64> = (0..n).map(|_| rng.next_normal()).collect();
        let c = dct2(&x).unwrap();
        for (k, ck) in c.iter().enumerate() {
            let mut want = 0.0;
            for (i, xi) in x.iter().enumerate() {
                want += xi * (std::f64::consts::PI / n as f64 * (i as f64 + 0.5) * k as f64).cos();
            }
            direct = direct.max((ck - want).abs());
        }
        for (a, b) in dct3_inverse(&c).unwrap().iter().zip(&x) {
            round = round.max((a - b).abs());
        }
    }
    Outcome::new(
        direct < 1e-11 && round < 1e-12,
        format!("dct2 vs direct {direct:.3e} (< 1e-11); dct3_inverse(dct2) {round:.3e} (< 1e-12)"),
    )
}

/// Every layer type and a 2-layer CCL composition, f64, both paths.
fn c4_gradient_checks() -> Outcome {
    let t = Instant::now();
    let cases = [
        ("ccl", spec("ccl", [2, 5, 6], "ccl(3,3,3);gap(30);softmax")),
        ("conv", spec("conv", [2, 5, 6], "conv(3,3,3);gap(30);softmax")),
        ("relu", spec("relu", [1, 4, 6], "fc(24,5);relu;fc(5,3);softmax")),
        ("maxpool", spec("maxpool", [2, 6, 6], "maxpool(2,2);fc(18,3);softmax")),
        ("orbitpool-max", spec("orbit-max", [2, 4, 6], "orbitpool(max);fc(8,3);softmax")),
        ("orbitpool-avg", spec("orbit-avg", [2, 4, 6], "orbitpool(avg);fc(8,3);softmax")),
        ("gap", spec("gap", [3, 4, 5], "gap(20);softmax")),
        ("batchnorm", spec("bn", [2, 4, 6], "bn;fc(48,3);softmax")),
        ("fc+softmax", spec("fc", [1, 3, 4], "fc(12,4);softmax")),
        (
            "2-layer",
            spec("two", [1, 6, 8], "ccl(3,3,3);relu;ccl(2,3,3);relu;orbitpool(max);fc(12,4);softmax"),
        ),
    ];
    let mut worst = (0.0f64, "");
    for (name, s) in &cases {
        for mode in [Mode::Direct, Mode::Spectral] {
            let e = network_gradient_error(s, mode, 11, 3).unwrap();
            if e > worst.0 || worst.1.is_empty() {
                worst = (e, name);
            }
        }
    }
    let el = t.elapsed();
    Outcome::new(
        worst.0 < 1e-6 && within(el, 60),
        format!(
            "{} cases, worst relative error {:.3e} ({}) (< 1e-6), {:.1} s (< 60 s)",
            cases.len(),
            worst.0,
            worst.1,
            el.as_secs_f64()
        ),
    )
}

/// Orbit-max network bit-identical under all 28 rolls; average-pooled
/// network within 1e-6 in f32.
fn c5_pooled_invariance() -> Outcome {
    let orbit32 = orbit_invariance_deviation::<f32>(3).unwrap();
    let orbit64 = orbit_invariance_deviation::<f64>(3).unwrap();
    let s = spec("ccl-gap-28", [1, 28, 28], "ccl(8,3,3);relu;ccl(8,3,3);relu;ccl(10,3,3);relu;gap(28);softmax");
    let mut net = Network::<f32>::build(&s, 3, Mode::Direct).unwrap();
    let f = CylinderMap::<f32>::random_normal(1, 28, 28, 4).unwrap();
    let batch = |m: CylinderMap<f32>| m.into_tensor().reshape(&[1, 1, 28, 28]).unwrap();
    let base = net.logits(&batch(f.clone())).unwrap();
    let mut gap = 0.0f64;
    for r in 0..28 {
        gap = gap.max(net.logits(&batch(roll(&f, r))).unwrap().max_abs_diff(&base).unwrap());
    }
    Outcome::new(
        orbit32 == 0.0 && orbit64 == 0.0 && gap < 1e-6,
        format!("orbit-max max dev f32 {orbit32:e}, f64 {orbit64:e} (== 0); avg-pool f32 {gap:.3e} (< 1e-6)"),
    )
}

/// CCL and planar twin trained on the original 2000-sample subset, tested on
/// the original and uniformly rolled 500-sample test set.
fn c6_rotation_generalization() -> Outcome {
    let t = Instant::now();
    let dir = bundled_mnist_dir();
    let train = load_mnist::<f32>(&dir, Split::Train).unwrap();
    let test = load_mnist::<f32>(&dir, Split::Test).unwrap();
    let ccl = NetworkSpec::named("mnist-ccl").unwrap();
    let cfg = AccuracyConfig {
        models: vec![ccl.clone(), ccl.planar_twin()],
        train: TrainConfig::default(),
        mode: Mode::Direct,
        train_variants: vec![DataVariant::Original],
        test_variants: vec![DataVariant::Original, DataVariant::Rolled],
        composition: RolledComposition::Replace,
        roll_seed: 7,
    };
    let m = run_accuracy_matrix(&train, &test, &cfg, |_, _, _| {}).unwrap();
    let acc = |model: &str, v| 100.0 * m.accuracy(model, "original", v).unwrap();
    let (co, cr) = (acc("mnist-ccl", DataVariant::Original), acc("mnist-ccl", DataVariant::Rolled));
    let (po, pr) = (acc("mnist-conv", DataVariant::Original), acc("mnist-conv", DataVariant::Rolled));
    let el = t.elapsed();
    let ccl_ok = (co - cr).abs() < 2.0;
    let conv_ok = po - pr > 20.0;
    Outcome::new(
        ccl_ok && conv_ok && within(el, 900),
        format!(
            "ccl {co:.1} -> {cr:.1} (gap {:.1} < 2: {}); conv {po:.1} -> {pr:.1} (drop {:.1} > 20: {}); {:.0} s (< 900 s)",
            (co - cr).abs(),
            if ccl_ok { "ok" } else { "no" },
            po - pr,
            if conv_ok { "ok" } else { "no" },
            el.as_secs_f64()
        ),
    )
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("ccl-acceptance-{name}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

/// Full-size kernels over N in {32, ..., 512}; report written as CSV.
fn c7_complexity() -> Outcome {
    let report = run_bench(&BenchConfig::default()).unwrap();
    let dir = scratch("bench");
    report.write_csv(&dir.join("bench.csv"), &dir.join("bench_summary.csv")).unwrap();
    let csv_ok = std::fs::read_to_string(dir.join("bench.csv"))
        .map(|s| s.lines().count() == 1 + report.records.len())
        .unwrap_or(false);
    let _ = std::fs::remove_dir_all(&dir);
    Outcome::new(
        report.spectral_slope < report.oracle_slope && csv_ok && report.max_deviation < 1e-9,
        format!(
            "log-log slope spectral {:.2} < oracle {:.2}; crossover {}; CSV written: {csv_ok}",
            report.spectral_slope,
            report.oracle_slope,
            report.crossover.map_or("none".into(), |n| format!("N={n}"))
        ),
    )
}

fn run_cli(args: &[&str]) -> bool {
    Command::new(env!("CARGO_BIN_EXE_ccl"))
        .args(args)
        .output()
        .map(|o| o.status.success())
        .unwrap_or(false)
}

fn same_files(a: &Path, b: &Path, files: &[&str]) -> Result<(), String> {
    for f in files {
        let x = std::fs::read(a.join(f)).map_err(|e| format!("{f}: {e}"))?;
        let y = std::fs::read(b.join(f)).map_err(|e| format!("{f}: {e}"))?;
        if x != y {
            return Err(format!("{f} differs"));
        }
    }
    Ok(())
}

/// `verify`, `sweep` and `train` twice each with the same seed.
fn c8_determinism() -> Outcome {
    let root = scratch("determinism");
    let runs: [(&str, Vec<&str>, Vec<&str>); 3] = [
        ("verify", vec!["verify", "--seed", "7", "--trials", "3"], vec!["margins.csv", "config.txt"]),
        (
            "sweep",
            vec!["sweep", "--depths", "1,3", "--res", "16", "--n", "10", "--seed", "7"],
            vec!["sweep.csv", "sweep_samples.csv", "config.txt"],
        ),
        (
            "train",
            vec!["train", "--spec", "mnist-ccl", "--epochs", "2", "--train-n", "96", "--test-n", "48", "--seed", "7"],
            vec![
                "metrics.csv",
                "config.txt",
                "checkpoint/manifest.txt",
                "checkpoint/layer00_weight.bin",
                "checkpoint/layer10_bias.bin",
            ],
        ),
    ];
    let mut notes = Vec::new();
    let mut pass = true;
    for (name, args, files) in &runs {
        let a = root.join(format!("{name}-a"));
        let b = root.join(format!("{name}-b"));
        let mut ok = true;
        for dir in [&a, &b] {
            let mut full = args.clone();
            full.extend(["--out", dir.to_str().unwrap()]);
            ok &= run_cli(&full);
        }
        let verdict = if !ok {
            "run failed".to_string()
        } else {
            match same_files(&a, &b, files) {
                Ok(()) => "identical".to_string(),
                Err(e) => e,
            }
        };
        pass &= verdict == "identical";
        notes.push(format!("{name} {verdict}"));
    }
    let _ = std::fs::remove_dir_all(&root);
    Outcome::new(pass, notes.join("; "))
}

type Criterion = (usize, &'static str, fn() -> Outcome);

const CRITERIA: [Criterion; 8] = [
    (1, "spectral/oracle equivalence", c1_spectral_oracle_equivalence),
    (2, "rotation equivariance", c2_rotation_equivariance),
    (3, "DCT correctness", c3_dct),
    (4, "gradient checks", c4_gradient_checks),
    (5, "pooled-network invariance", c5_pooled_invariance),
    (6, "rotation-generalization gap", c6_rotation_generalization),
    (7, "complexity benchmark", c7_complexity),
    (8, "determinism", c8_determinism),
];

fn main() {
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (id, name, run) in CRITERIA {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let t = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Outcome::new(false, format!("panicked: {msg}"))
        });
        println!(
            "criterion {id} ({name}): {} [{:.1} s] {}",
            if outcome.pass { "PASS" } else { "FAIL" },
            t.elapsed().as_secs_f64(),
            outcome.detail
        );
        if !outcome.pass {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}
