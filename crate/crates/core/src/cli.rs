//! The `ccl` command-line front end.
//!
//! Exit codes: 0 success, 1 verification failure, 2 usage error, 3 I/O error.
//! The default MNIST directory is taken from `CCL_DATA_DIR`, falling back to
//! the subset bundled with the crate.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::ccl::Mode;
use crate::data::{
    bundled_mnist_dir, load_mnist, roll_dataset, rolled_variant, synth_panoramic, LabeledDataset, RollPolicy,
    RolledComposition, Split, DATA_DIR_ENV,
};
use crate::error::{CclError, Result};
use crate::harness::{
    fmt_f64, run_accuracy_matrix, run_bench, run_discretization_sweep, run_invariance_curves, run_verify,
    write_csv, write_curve_csv, AccuracyConfig, BenchConfig, CurveKind, DataVariant, Fault, KernelExtent,
    RunInfo, SweepConfig, VerifyConfig,
};
use crate::nn::{
    checkpoint_precision, evaluate, load_checkpoint, save_checkpoint, train_epoch, AdamState, EvalMetrics,
    LayerSpec, Network, NetworkSpec, TrainConfig,
};
use crate::scalar::{Precision, Scalar};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "ccl", version, about = "Circular-symmetric correlation layers: verification, experiments and training")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the numerical self-check suite.
    Verify(VerifyArgs),
    /// Measure equivariance error of random CCL stacks.
    Sweep(SweepArgs),
    /// Train a network and write a checkpoint plus metrics.
    Train(TrainArgs),
    /// Evaluate a checkpoint, optionally over a roll or translation sweep.
    Eval(EvalArgs),
    /// Time the direct and spectral forward paths.
    Bench(BenchArgs),
    /// Generate a dataset (synthetic panoramas or rolled MNIST).
    GenData(GenDataArgs),
    /// Train CCL and planar twins on original/rolled data and cross-evaluate.
    Matrix(MatrixArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// Random seed.
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Floating-point precision (f32 or f64).
    #[arg(long, default_value = "f64")]
    pub precision: Precision,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl Common {
    fn out_dir(&self, command: &str) -> PathBuf {
        self.out.clone().unwrap_or_else(|| Path::new("out").join(command))
    }
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub common: Common,
    /// Random (f, k) pairs per grid size in the equivalence check.
    #[arg(long, default_value_t = 10)]
    pub trials: usize,
    /// Negative control: corrupt a component on purpose.
    #[arg(long, hide = true)]
    pub inject_fault: Option<Fault>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: Common,
    /// Stack depths.
    #[arg(long, value_delimiter = ',', default_value = "1,3,5")]
    pub depths: Vec<usize>,
    /// Square grid resolutions.
    #[arg(long = "res", value_delimiter = ',', default_value = "16,28,64")]
    pub resolutions: Vec<usize>,
    /// Random inputs per configuration.
    #[arg(long = "n", default_value_t = 100)]
    pub samples: usize,
    /// Evaluation path (direct or spectral).
    #[arg(long, default_value = "spectral")]
    pub mode: Mode,
    /// Channels of every layer.
    #[arg(long, default_value_t = 10)]
    pub channels: usize,
    /// Kernel extent (square, odd).
    #[arg(long, default_value_t = 3)]
    pub kernel: usize,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// MNIST directory with uncompressed IDX files (default: $CCL_DATA_DIR,
    /// then the bundled subset).
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Use the synthetic panoramic dataset instead of MNIST.
    #[arg(long)]
    pub synth: bool,
    /// Synthetic: number of classes.
    #[arg(long, default_value_t = 3)]
    pub classes: usize,
    /// Synthetic: samples per class in the training split (test gets a quarter).
    #[arg(long, default_value_t = 100)]
    pub per_class: usize,
    /// Synthetic: image height.
    #[arg(long, default_value_t = 16)]
    pub height: usize,
    /// Synthetic: image width.
    #[arg(long, default_value_t = 32)]
    pub width: usize,
    /// Keep only the first N training samples.
    #[arg(long)]
    pub train_n: Option<usize>,
    /// Keep only the first N test samples.
    #[arg(long)]
    pub test_n: Option<usize>,
}

impl DataArgs {
    fn data_dir(&self) -> PathBuf {
        self.data
            .clone()
            .or_else(|| std::env::var_os(DATA_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(bundled_mnist_dir)
    }

    fn describe(&self) -> String {
        if self.synth {
            format!(
                "synth(classes={},per_class={},h={},w={})",
                self.classes, self.per_class, self.height, self.width
            )
        } else {
            self.data_dir().display().to_string()
        }
    }

    fn load<T: Scalar>(&self, seed: u64) -> Result<(LabeledDataset<T>, LabeledDataset<T>)> {
        let (train, test) = if self.synth {
            let test_per_class = self.per_class.div_ceil(4);
            (
                synth_panoramic(self.per_class, self.classes, self.height, self.width, seed)?,
                synth_panoramic(test_per_class, self.classes, self.height, self.width, seed.wrapping_add(1))?,
            )
        } else {
            let dir = self.data_dir();
            (load_mnist(&dir, Split::Train)?, load_mnist(&dir, Split::Test)?)
        };
        let train = match self.train_n {
            Some(n) => train.take(n)?,
            None => train,
        };
        let test = match self.test_n {
            Some(n) => test.take(n)?,
            None => test,
        };
        Ok((train, test))
    }

    fn record(&self, info: &mut RunInfo) {
        info.push("data", self.describe());
        info.push("train_n", self.train_n.map_or("all".into(), |n| n.to_string()));
        info.push("test_n", self.test_n.map_or("all".into(), |n| n.to_string()));
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub data: DataArgs,
    /// Named architecture (mnist-ccl, mnist-conv, mnist-ccl-orbit, ...).
    #[arg(long)]
    pub spec: Option<String>,
    /// Explicit layer list separated by `;`, e.g. "ccl(8,3,3);relu;orbitpool(max);fc(128,3);softmax".
    #[arg(long, conflicts_with = "spec")]
    pub layers: Option<String>,
    #[arg(long, default_value_t = 20)]
    pub epochs: usize,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    /// Evaluation path of CCL layers (direct or spectral).
    #[arg(long, default_value = "direct")]
    pub mode: Mode,
    /// Train on a rolled copy of the training set.
    #[arg(long)]
    pub rolled: bool,
    /// With --rolled: replace the originals or add to them (replace|union).
    #[arg(long, default_value = "replace")]
    pub composition: Composition,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Composition {
    Replace,
    Union,
}

impl From<Composition> for RolledComposition {
    fn from(c: Composition) -> Self {
        match c {
            Composition::Replace => RolledComposition::Replace,
            Composition::Union => RolledComposition::Union,
        }
    }
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Checkpoint directory written by `train`.
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Seed of the uniform roll policy for the rolled test set.
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long, default_value = "direct")]
    pub mode: Mode,
    /// Also sweep every roll or translation (rolls|translations).
    #[arg(long)]
    pub curve: Option<CurveKind>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Seed and output directory (precision is fixed to f64).
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Map widths, ascending.
    #[arg(long, value_delimiter = ',', default_value = "32,64,128,256,512")]
    pub sizes: Vec<usize>,
    #[arg(long, default_value_t = 4)]
    pub height: usize,
    /// Azimuthal kernel extent: `full` or an odd number.
    #[arg(long, default_value = "full")]
    pub kernel: String,
    #[arg(long, default_value_t = 2)]
    pub c_in: usize,
    #[arg(long, default_value_t = 2)]
    pub c_out: usize,
    #[arg(long, default_value_t = 5)]
    pub reps: usize,
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    #[command(flatten)]
    pub common: Common,
    /// Generate synthetic panoramas (otherwise roll an MNIST split).
    #[arg(long)]
    pub synth: bool,
    #[arg(long, default_value_t = 3)]
    pub classes: usize,
    /// Synthetic: total number of samples (a multiple of --classes).
    #[arg(long = "n", default_value_t = 300)]
    pub samples: usize,
    #[arg(long, default_value_t = 16)]
    pub height: usize,
    #[arg(long, default_value_t = 32)]
    pub width: usize,
    /// MNIST: source directory (default: $CCL_DATA_DIR, then the bundled subset).
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// MNIST: which split to roll (train|test).
    #[arg(long, default_value = "test")]
    pub split: String,
    /// MNIST: one fixed roll for every image instead of uniform random rolls.
    #[arg(long, allow_hyphen_values = true)]
    pub roll: Option<isize>,
}

#[derive(Debug, Args)]
pub struct MatrixArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub data: DataArgs,
    /// CCL architectures; each is paired with its planar twin.
    #[arg(long, value_delimiter = ',', default_value = "mnist-ccl")]
    pub models: Vec<String>,
    #[arg(long, default_value_t = 20)]
    pub epochs: usize,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value = "direct")]
    pub mode: Mode,
    #[arg(long, value_delimiter = ',', default_value = "original,rolled")]
    pub train_variants: Vec<DataVariant>,
    #[arg(long, value_delimiter = ',', default_value = "original,rolled")]
    pub test_variants: Vec<DataVariant>,
    #[arg(long, default_value = "replace")]
    pub composition: Composition,
}

fn exit_code(e: &CclError) -> i32 {
    match e {
        CclError::Io { .. } | CclError::Format { .. } => EXIT_IO,
        _ => EXIT_USAGE,
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, A>(args: I) -> i32
where
    I: IntoIterator<Item = A>,
    A: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(cmd: Command) -> Result<i32> {
    match cmd {
        Command::Verify(a) => match a.common.precision {
            Precision::F32 => cmd_verify::<f32>(&a),
            Precision::F64 => cmd_verify::<f64>(&a),
        },
        Command::Sweep(a) => match a.common.precision {
            Precision::F32 => cmd_sweep::<f32>(&a),
            Precision::F64 => cmd_sweep::<f64>(&a),
        },
        Command::Train(a) => match a.common.precision {
            Precision::F32 => cmd_train::<f32>(&a),
            Precision::F64 => cmd_train::<f64>(&a),
        },
        Command::Eval(a) => match checkpoint_precision(&a.checkpoint)? {
            Precision::F32 => cmd_eval::<f32>(&a),
            Precision::F64 => cmd_eval::<f64>(&a),
        },
        Command::Bench(a) => cmd_bench(&a),
        Command::GenData(a) => match a.common.precision {
            Precision::F32 => cmd_gen_data::<f32>(&a),
            Precision::F64 => cmd_gen_data::<f64>(&a),
        },
        Command::Matrix(a) => match a.common.precision {
            Precision::F32 => cmd_matrix::<f32>(&a),
            Precision::F64 => cmd_matrix::<f64>(&a),
        },
    }
}

fn cmd_verify<T: Scalar>(a: &VerifyArgs) -> Result<i32> {
    let out = a.common.out_dir("verify");
    let cfg = VerifyConfig {
        seed: a.common.seed,
        trials: a.trials,
        fault: a.inject_fault,
    };
    let mut info = RunInfo::new("verify")
        .with("seed", cfg.seed)
        .with("precision", T::PRECISION)
        .with("trials", cfg.trials);
    if let Some(f) = cfg.fault {
        info.push("inject_fault", format!("{f:?}"));
    }
    let t = Instant::now();
    let report = run_verify::<T>(&cfg)?;
    for c in &report.checks {
        println!("{c}");
    }
    report.write_csv(&out.join("margins.csv"))?;
    info.write(&out)?;
    println!("{} checks in {:.1} s", report.checks.len(), t.elapsed().as_secs_f64());
    match report.first_failure() {
        None => {
            println!("all checks passed");
            Ok(EXIT_OK)
        }
        Some(c) => {
            eprintln!("verification failed: {}", c.name);
            Ok(EXIT_VERIFY_FAILED)
        }
    }
}

fn cmd_sweep<T: Scalar>(a: &SweepArgs) -> Result<i32> {
    let out = a.common.out_dir("sweep");
    let cfg = SweepConfig {
        depths: a.depths.clone(),
        resolutions: a.resolutions.clone(),
        samples: a.samples,
        seed: a.common.seed,
        mode: a.mode,
        channels: a.channels,
        kernel: a.kernel,
    };
    let report = run_discretization_sweep::<T>(&cfg)?;
    for r in &report.records {
        println!(
            "depth {:>2}  res {:>3}  eps mean {:.3e}  std {:.3e}  max {:.3e}",
            r.depth, r.resolution, r.eps_mean, r.eps_std, r.eps_max
        );
    }
    report.write_csv(&out.join("sweep.csv"), &out.join("sweep_samples.csv"))?;
    RunInfo::new("sweep")
        .with("seed", cfg.seed)
        .with("precision", T::PRECISION)
        .with("depths", join(&cfg.depths))
        .with("resolutions", join(&cfg.resolutions))
        .with("samples", cfg.samples)
        .with("mode", cfg.mode)
        .with("channels", cfg.channels)
        .with("kernel", cfg.kernel)
        .write(&out)?;
    Ok(EXIT_OK)
}

fn join(v: &[usize]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn parse_layers(text: &str) -> Result<Vec<LayerSpec>> {
    text.split(';').filter(|s| !s.trim().is_empty()).map(str::parse).collect()
}

/// CCL stack with orbit pooling sized for the synthetic panoramas.
fn synth_spec(input: [usize; 3], classes: usize) -> NetworkSpec {
    use crate::nn::PoolMode;
    use LayerSpec::*;
    NetworkSpec::new(
        "synth-ccl",
        input,
        vec![
            LayerSpec::ccl(8),
            Relu,
            LayerSpec::ccl(8),
            Relu,
            OrbitPool(PoolMode::Max),
            Fc {
                l_in: 8 * input[1],
                l_out: classes,
            },
            Softmax,
        ],
    )
}

fn resolve_spec(spec: Option<&str>, layers: Option<&str>, input: [usize; 3], classes: usize, synth: bool) -> Result<NetworkSpec> {
    match (spec, layers) {
        (_, Some(l)) => Ok(NetworkSpec::new("custom", input, parse_layers(l)?)),
        (Some(name), None) => Ok(NetworkSpec::named(name)?.with_input(input)),
        (None, None) if synth => Ok(synth_spec(input, classes)),
        (None, None) => Ok(NetworkSpec::named("mnist-ccl")?.with_input(input)),
    }
}

fn metrics_row(epoch: usize, split: &str, loss: f64, acc: f64) -> Vec<String> {
    vec![epoch.to_string(), split.to_string(), fmt_f64(loss), fmt_f64(acc)]
}

fn cmd_train<T: Scalar>(a: &TrainArgs) -> Result<i32> {
    let out = a.common.out_dir("train");
    let seed = a.common.seed;
    let (train, test) = a.data.load::<T>(seed)?;
    let train = if a.rolled {
        rolled_variant(&train, &RollPolicy::uniform(seed), a.composition.into())?
    } else {
        train
    };
    let spec = resolve_spec(
        a.spec.as_deref(),
        a.layers.as_deref(),
        train.sample_shape(),
        train.class_count(),
        a.data.synth,
    )?;
    let cfg = TrainConfig {
        epochs: a.epochs,
        batch_size: a.batch_size,
        lr: a.lr,
        seed,
    };
    let mut info = RunInfo::new("train")
        .with("seed", seed)
        .with("precision", T::PRECISION)
        .with("spec", &spec.name)
        .with("layers", spec.layers.iter().map(|l| l.to_string()).collect::<Vec<_>>().join(";"))
        .with("epochs", cfg.epochs)
        .with("batch_size", cfg.batch_size)
        .with("lr", cfg.lr)
        .with("mode", a.mode)
        .with("rolled", a.rolled);
    if a.rolled {
        info.push("composition", format!("{:?}", a.composition).to_lowercase());
    }
    a.data.record(&mut info);

    let mut net = Network::<T>::build(&spec, seed, a.mode)?;
    let mut adam = AdamState::new(cfg.lr);
    let mut rows = Vec::new();
    for e in 0..cfg.epochs {
        let t = Instant::now();
        let m = train_epoch(&mut net, &mut adam, &train, &cfg, e)?;
        let ev = evaluate(&mut net, &test)?;
        eprintln!(
            "epoch {e:>3}  train loss {:.4} acc {:.4}  test loss {:.4} acc {:.4}  ({:.1} s)",
            m.loss,
            m.accuracy,
            ev.loss,
            ev.accuracy,
            t.elapsed().as_secs_f64()
        );
        rows.push(metrics_row(e, "train", m.loss, m.accuracy));
        rows.push(metrics_row(e, "test", ev.loss, ev.accuracy));
    }
    write_csv(&out.join("metrics.csv"), &["epoch", "split", "loss", "accuracy"], rows)?;
    save_checkpoint(&mut net, &out.join("checkpoint"))?;
    info.write(&out)?;
    Ok(EXIT_OK)
}

fn cmd_eval<T: Scalar>(a: &EvalArgs) -> Result<i32> {
    let out = a.out.clone().unwrap_or_else(|| Path::new("out").join("eval"));
    let mut net = load_checkpoint::<T>(&a.checkpoint, a.mode)?;
    let (_, test) = a.data.load::<T>(a.seed)?;
    let rolled = roll_dataset(&test, &RollPolicy::uniform(a.seed))?;
    let mut rows = Vec::new();
    for (name, ds) in [("original", &test), ("rolled", &rolled)] {
        let EvalMetrics { loss, accuracy } = evaluate(&mut net, ds)?;
        println!("{name:<9} loss {loss:.4}  accuracy {accuracy:.4}");
        rows.push(vec![name.to_string(), fmt_f64(loss), fmt_f64(accuracy)]);
    }
    write_csv(&out.join("eval.csv"), &["test_set", "loss", "accuracy"], rows)?;
    let mut info = RunInfo::new("eval")
        .with("checkpoint", a.checkpoint.display())
        .with("seed", a.seed)
        .with("precision", T::PRECISION)
        .with("mode", a.mode);
    a.data.record(&mut info);
    if let Some(kind) = a.curve {
        let points = run_invariance_curves(&mut net, &test, kind)?;
        write_curve_csv(&out.join("curve.csv"), &net.spec().name, kind, &points)?;
        info.push("curve", format!("{kind:?}").to_lowercase());
    }
    info.write(&out)?;
    Ok(EXIT_OK)
}

fn cmd_bench(a: &BenchArgs) -> Result<i32> {
    let out = a.out.clone().unwrap_or_else(|| Path::new("out").join("bench"));
    let kphi = match a.kernel.as_str() {
        "full" => KernelExtent::Full,
        k => KernelExtent::Fixed(
            k.parse()
                .map_err(|_| CclError::arg(format!("--kernel must be `full` or an odd number, got `{k}`")))?,
        ),
    };
    let cfg = BenchConfig {
        sizes: a.sizes.clone(),
        height: a.height,
        kz: 3.min(a.height - (1 - a.height % 2)),
        kphi,
        c_in: a.c_in,
        c_out: a.c_out,
        reps: a.reps,
        seed: a.seed,
    };
    let report = run_bench(&cfg)?;
    for r in &report.records {
        println!(
            "{:<9} n {:>4}  kphi {:>4}  median {:>12.0} ns  {:>8.1} ns/output",
            r.implementation, r.n, r.kphi, r.median_ns, r.ns_per_output
        );
    }
    println!(
        "log-log slope: oracle {:.3}  spectral {:.3}  crossover {}",
        report.oracle_slope,
        report.spectral_slope,
        report.crossover.map_or("none".into(), |n| n.to_string())
    );
    report.write_csv(&out.join("bench.csv"), &out.join("bench_summary.csv"))?;
    RunInfo::new("bench")
        .with("seed", cfg.seed)
        .with("precision", "f64")
        .with("sizes", join(&cfg.sizes))
        .with("height", cfg.height)
        .with("kz", cfg.kz)
        .with("kernel", &a.kernel)
        .with("c_in", cfg.c_in)
        .with("c_out", cfg.c_out)
        .with("reps", cfg.reps)
        .write(&out)?;
    Ok(EXIT_OK)
}

fn cmd_gen_data<T: Scalar>(a: &GenDataArgs) -> Result<i32> {
    let out = a.common.out_dir("gen-data");
    let seed = a.common.seed;
    let mut info = RunInfo::new("gen-data")
        .with("seed", seed)
        .with("precision", T::PRECISION);
    let ds: LabeledDataset<T> = if a.synth {
        if a.classes < 2 {
            return Err(CclError::arg("--classes must be at least 2"));
        }
        if a.samples == 0 || a.samples % a.classes != 0 {
            return Err(CclError::arg(format!(
                "--n ({}) must be a positive multiple of --classes ({})",
                a.samples, a.classes
            )));
        }
        info.push("source", "synth");
        info.push("classes", a.classes);
        info.push("n", a.samples);
        info.push("height", a.height);
        info.push("width", a.width);
        synth_panoramic(a.samples / a.classes, a.classes, a.height, a.width, seed)?
    } else {
        let dir = a
            .data
            .clone()
            .or_else(|| std::env::var_os(DATA_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(bundled_mnist_dir);
        let split = match a.split.as_str() {
            "train" => Split::Train,
            "test" => Split::Test,
            other => return Err(CclError::arg(format!("--split must be train or test, got `{other}`"))),
        };
        let policy = match a.roll {
            Some(s) => RollPolicy::fixed(s),
            None => RollPolicy::uniform(seed),
        };
        info.push("source", dir.display());
        info.push("split", &a.split);
        info.push("roll", a.roll.map_or("uniform".into(), |s| s.to_string()));
        roll_dataset(&load_mnist::<T>(&dir, split)?, &policy)?
    };
    ds.export(&out)?;
    info.write(&out)?;
    println!("wrote {} samples of shape {:?} to {}", ds.len(), ds.sample_shape(), out.display());
    Ok(EXIT_OK)
}

fn cmd_matrix<T: Scalar>(a: &MatrixArgs) -> Result<i32> {
    let out = a.common.out_dir("matrix");
    let seed = a.common.seed;
    let (train, test) = a.data.load::<T>(seed)?;
    let mut models = Vec::new();
    for name in &a.models {
        let spec = if a.data.synth && name == "synth-ccl" {
            synth_spec(train.sample_shape(), train.class_count())
        } else {
            NetworkSpec::named(name)?.with_input(train.sample_shape())
        };
        models.push(spec.planar_twin());
        models.insert(models.len() - 1, spec);
    }
    let cfg = AccuracyConfig {
        models,
        train: TrainConfig {
            epochs: a.epochs,
            batch_size: a.batch_size,
            lr: a.lr,
            seed,
        },
        mode: a.mode,
        train_variants: a.train_variants.clone(),
        test_variants: a.test_variants.clone(),
        composition: a.composition.into(),
        roll_seed: seed,
    };
    let matrix = run_accuracy_matrix(&train, &test, &cfg, |model, set, m| {
        eprintln!("{model} [{set}] epoch {:>3}  loss {:.4}  acc {:.4}", m.epoch, m.loss, m.accuracy)
    })?;
    for r in &matrix.rows {
        println!(
            "{:<16} train {:<16} test {:<9} accuracy {:.4}",
            r.model, r.train_set, r.test_set, r.accuracy
        );
    }
    matrix.write_csv(&out.join("matrix.csv"), &out.join("history.csv"))?;
    let mut info = RunInfo::new("matrix")
        .with("seed", seed)
        .with("precision", T::PRECISION)
        .with("models", cfg.models.iter().map(|m| m.name.clone()).collect::<Vec<_>>().join(","))
        .with("epochs", cfg.train.epochs)
        .with("batch_size", cfg.train.batch_size)
        .with("lr", cfg.train.lr)
        .with("mode", cfg.mode)
        .with("composition", format!("{:?}", a.composition).to_lowercase());
    a.data.record(&mut info);
    info.write(&out)?;
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp(name: &str) -> PathBuf {
        std::env::temp_dir().join(format!("ccl-cli-{name}-{}", std::process::id()))
    }

    fn args(list: &[&str]) -> Vec<String> {
        std::iter::once("ccl").chain(list.iter().copied()).map(String::from).collect()
    }

    #[test]
    fn help_and_usage_codes() {
        assert_eq!(run(args(&["--help"])), EXIT_OK);
        for sub in ["verify", "sweep", "train", "eval", "bench", "gen-data", "matrix"] {
            assert_eq!(run(args(&[sub, "--help"])), EXIT_OK, "{sub}");
        }
        assert_eq!(run(args(&["verify", "--bogus"])), EXIT_USAGE);
        assert_eq!(run(args(&["nope"])), EXIT_USAGE);
        assert_eq!(run(args(&["sweep", "--precision", "f16"])), EXIT_USAGE);
    }

    #[test]
    fn missing_inputs_are_io_errors() {
        let out = tmp("missing");
        let o = out.to_str().unwrap();
        assert_eq!(run(args(&["train", "--data", "/nonexistent", "--epochs", "1", "--out", o])), EXIT_IO);
        assert_eq!(run(args(&["eval", "--checkpoint", "/nonexistent", "--out", o])), EXIT_IO);
    }

    #[test]
    fn invalid_values_are_usage_errors() {
        let out = tmp("invalid");
        let o = out.to_str().unwrap();
        assert_eq!(run(args(&["gen-data", "--synth", "--classes", "3", "--n", "10", "--out", o])), EXIT_USAGE);
        assert_eq!(run(args(&["bench", "--reps", "1", "--out", o])), EXIT_USAGE);
        assert_eq!(run(args(&["train", "--spec", "nope", "--epochs", "1", "--out", o])), EXIT_USAGE);
    }

    #[test]
    fn sweep_writes_csv_and_config() {
        let out = tmp("sweep");
        let o = out.to_str().unwrap();
        let code = run(args(&["sweep", "--depths", "1", "--res", "8", "--n", "3", "--channels", "2", "--out", o]));
        assert_eq!(code, EXIT_OK);
        let csv = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
        assert!(csv.starts_with("depth,resolution,precision,mode,n_samples,eps_mean,eps_std,eps_max\n1,8,f64,spectral,3,"));
        let cfg = std::fs::read_to_string(out.join("config.txt")).unwrap();
        assert!(cfg.contains("depths = 1\n") && cfg.contains("samples = 3\n"));
        std::fs::remove_dir_all(out).ok();
    }

    #[test]
    fn train_then_eval_on_synthetic_data() {
        let out = tmp("train");
        let o = out.to_str().unwrap();
        let common = ["--synth", "--classes", "3", "--per-class", "4", "--height", "6", "--width", "12"];
        let mut a = vec!["train", "--epochs", "2", "--batch-size", "4", "--precision", "f32", "--out", o];
        a.extend(common);
        assert_eq!(run(args(&a)), EXIT_OK);
        let metrics = std::fs::read_to_string(out.join("metrics.csv")).unwrap();
        assert_eq!(metrics.lines().count(), 5);
        let ck = out.join("checkpoint");
        let eo = out.join("eval");
        let mut e = vec!["eval", "--checkpoint", ck.to_str().unwrap(), "--curve", "rolls", "--out", eo.to_str().unwrap()];
        e.extend(common);
        assert_eq!(run(args(&e)), EXIT_OK);
        let curve = std::fs::read_to_string(eo.join("curve.csv")).unwrap();
        assert_eq!(curve.lines().count(), 13);
        std::fs::remove_dir_all(out).ok();
    }

    #[test]
    fn gen_data_synth_and_rolled_mnist() {
        let out = tmp("gen");
        let o = out.to_str().unwrap();
        assert_eq!(run(args(&["gen-data", "--synth", "--classes", "3", "--n", "30", "--out", o])), EXIT_OK);
        let labels = std::fs::read_to_string(out.join("labels.csv")).unwrap();
        assert_eq!(labels.lines().count(), 31);
        let o2 = out.join("mnist");
        assert_eq!(
            run(args(&["gen-data", "--split", "test", "--roll", "-7", "--precision", "f32", "--out", o2.to_str().unwrap()])),
            EXIT_OK
        );
        assert!(o2.join("images.bin").exists());
        std::fs::remove_dir_all(out).ok();
    }
}
