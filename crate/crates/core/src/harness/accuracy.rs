//! Train/test accuracy matrices over original and rolled data, and accuracy
//! curves under fixed rolls or z translations.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use super::report::{fmt_f64, write_csv};
use crate::ccl::Mode;
use crate::data::{roll_dataset, rolled_variant, LabeledDataset, RollPolicy, RolledComposition};
use crate::error::{CclError, Result};
use crate::nn::{evaluate, train_epoch, AdamState, EpochMetrics, Network, NetworkSpec, TrainConfig};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DataVariant {
    Original,
    Rolled,
}

impl DataVariant {
    pub fn as_str(self) -> &'static str {
        match self {
            DataVariant::Original => "original",
            DataVariant::Rolled => "rolled",
        }
    }
}

impl fmt::Display for DataVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DataVariant {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "original" => Ok(DataVariant::Original),
            "rolled" => Ok(DataVariant::Rolled),
            other => Err(format!("unknown data variant `{other}` (expected original or rolled)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyConfig {
    /// Architectures to train; typically a CCL net and its planar twin.
    pub models: Vec<NetworkSpec>,
    pub train: TrainConfig,
    pub mode: Mode,
    pub train_variants: Vec<DataVariant>,
    pub test_variants: Vec<DataVariant>,
    /// How a rolled training set is assembled.
    pub composition: RolledComposition,
    /// Seed of the uniform roll policy; test rolls use `roll_seed + 1`.
    pub roll_seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyRow {
    pub model: String,
    pub train_set: String,
    pub test_set: DataVariant,
    pub loss: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistoryRow {
    pub model: String,
    pub train_set: String,
    pub metrics: EpochMetrics,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AccuracyMatrix {
    pub rows: Vec<AccuracyRow>,
    pub history: Vec<HistoryRow>,
}

impl AccuracyMatrix {
    pub fn accuracy(&self, model: &str, train_set: &str, test_set: DataVariant) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.model == model && r.train_set == train_set && r.test_set == test_set)
            .map(|r| r.accuracy)
    }

    pub fn write_csv(&self, matrix: &Path, history: &Path) -> Result<()> {
        write_csv(
            matrix,
            &["model", "train_set", "test_set", "loss", "accuracy"],
            self.rows.iter().map(|r| {
                vec![
                    r.model.clone(),
                    r.train_set.clone(),
                    r.test_set.to_string(),
                    fmt_f64(r.loss),
                    fmt_f64(r.accuracy),
                ]
            }),
        )?;
        write_csv(
            history,
            &["model", "train_set", "epoch", "split", "loss", "accuracy"],
            self.history.iter().map(|h| {
                vec![
                    h.model.clone(),
                    h.train_set.clone(),
                    h.metrics.epoch.to_string(),
                    "train".to_string(),
                    fmt_f64(h.metrics.loss),
                    fmt_f64(h.metrics.accuracy),
                ]
            }),
        )
    }
}

/// Builds `spec` from `cfg.seed` and runs `cfg.epochs` epochs of Adam.
pub fn train_network<T: Scalar>(
    spec: &NetworkSpec,
    train: &LabeledDataset<T>,
    cfg: &TrainConfig,
    mode: Mode,
    mut on_epoch: impl FnMut(&EpochMetrics),
) -> Result<(Network<T>, Vec<EpochMetrics>)> {
    let spec = spec.clone().with_input(train.sample_shape());
    let mut net = Network::build(&spec, cfg.seed, mode)?;
    if net.num_classes() < train.class_count() {
        return Err(CclError::InvalidSpec(format!(
            "{} has {} outputs but the data has {} classes",
            spec.name,
            net.num_classes(),
            train.class_count()
        )));
    }
    let mut adam = AdamState::new(cfg.lr);
    let mut history = Vec::with_capacity(cfg.epochs);
    for e in 0..cfg.epochs {
        let m = train_epoch(&mut net, &mut adam, train, cfg, e)?;
        on_epoch(&m);
        history.push(m);
    }
    Ok((net, history))
}

fn train_label(v: DataVariant, c: RolledComposition) -> String {
    match (v, c) {
        (DataVariant::Original, _) => "original".into(),
        (DataVariant::Rolled, RolledComposition::Replace) => "rolled".into(),
        (DataVariant::Rolled, RolledComposition::Union) => "original+rolled".into(),
    }
}

/// Trains every model on every train variant and evaluates it on every test
/// variant. Rolled sets draw one uniform roll per image.
pub fn run_accuracy_matrix<T: Scalar>(
    train: &LabeledDataset<T>,
    test: &LabeledDataset<T>,
    cfg: &AccuracyConfig,
    mut progress: impl FnMut(&str, &str, &EpochMetrics),
) -> Result<AccuracyMatrix> {
    if cfg.models.is_empty() || cfg.train_variants.is_empty() || cfg.test_variants.is_empty() {
        return Err(CclError::arg("accuracy matrix needs models, train variants and test variants"));
    }
    let rolled_test = roll_dataset(test, &RollPolicy::uniform(cfg.roll_seed.wrapping_add(1)))?;
    let mut out = AccuracyMatrix::default();
    for &tv in &cfg.train_variants {
        let train_set = match tv {
            DataVariant::Original => train.clone(),
            DataVariant::Rolled => rolled_variant(train, &RollPolicy::uniform(cfg.roll_seed), cfg.composition)?,
        };
        let label = train_label(tv, cfg.composition);
        for spec in &cfg.models {
            let (mut net, history) = train_network(spec, &train_set, &cfg.train, cfg.mode, |m| {
                progress(&spec.name, &label, m)
            })?;
            out.history.extend(history.into_iter().map(|metrics| HistoryRow {
                model: spec.name.clone(),
                train_set: label.clone(),
                metrics,
            }));
            for &sv in &cfg.test_variants {
                let ds = match sv {
                    DataVariant::Original => test,
                    DataVariant::Rolled => &rolled_test,
                };
                let m = evaluate(&mut net, ds)?;
                out.rows.push(AccuracyRow {
                    model: spec.name.clone(),
                    train_set: label.clone(),
                    test_set: sv,
                    loss: m.loss,
                    accuracy: m.accuracy,
                });
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurveKind {
    /// Every column roll `0..W`.
    Rolls,
    /// Every z shift in `-H/2..=H/2`.
    Translations,
}

impl FromStr for CurveKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "rolls" => Ok(CurveKind::Rolls),
            "translations" => Ok(CurveKind::Translations),
            other => Err(format!("unknown curve `{other}` (expected rolls or translations)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub shift: isize,
    pub loss: f64,
    pub accuracy: f64,
}

/// Accuracy of `net` on `test` with every image moved by the same amount.
pub fn run_invariance_curves<T: Scalar>(
    net: &mut Network<T>,
    test: &LabeledDataset<T>,
    kind: CurveKind,
) -> Result<Vec<CurvePoint>> {
    let [_, h, w] = test.sample_shape();
    let shifts: Vec<isize> = match kind {
        CurveKind::Rolls => (0..w as isize).collect(),
        CurveKind::Translations => (-(h as isize) / 2..=h as isize / 2).collect(),
    };
    shifts
        .into_iter()
        .map(|s| {
            let policy = match kind {
                CurveKind::Rolls => RollPolicy::fixed(s),
                CurveKind::Translations => RollPolicy::translation(s),
            };
            let m = evaluate(net, &roll_dataset(test, &policy)?)?;
            Ok(CurvePoint {
                shift: s,
                loss: m.loss,
                accuracy: m.accuracy,
            })
        })
        .collect()
}

pub fn write_curve_csv(path: &Path, model: &str, kind: CurveKind, points: &[CurvePoint]) -> Result<()> {
    let kind = match kind {
        CurveKind::Rolls => "roll",
        CurveKind::Translations => "translation",
    };
    write_csv(
        path,
        &["model", "kind", "shift", "loss", "accuracy"],
        points.iter().map(|p| {
            vec![
                model.to_string(),
                kind.to_string(),
                p.shift.to_string(),
                fmt_f64(p.loss),
                fmt_f64(p.accuracy),
            ]
        }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synth_panoramic;

    fn tiny_specs() -> Vec<NetworkSpec> {
        let layers = |corr: &str| {
            format!("{corr}(4,3,3);relu;{corr}(4,3,3);relu;orbitpool(max);fc(32,3);softmax")
                .split(';')
                .map(|l| l.parse().unwrap())
                .collect()
        };
        vec![
            NetworkSpec::new("tiny-ccl", [1, 8, 16], layers("ccl")),
            NetworkSpec::new("tiny-conv", [1, 8, 16], layers("conv")),
        ]
    }

    fn cfg() -> AccuracyConfig {
        AccuracyConfig {
            models: tiny_specs(),
            train: TrainConfig {
                epochs: 3,
                batch_size: 8,
                lr: 3e-3,
                seed: 1,
            },
            mode: Mode::Direct,
            train_variants: vec![DataVariant::Original, DataVariant::Rolled],
            test_variants: vec![DataVariant::Original, DataVariant::Rolled],
            composition: RolledComposition::Union,
            roll_seed: 5,
        }
    }

    #[test]
    fn matrix_has_all_cells_and_is_deterministic() {
        let train = synth_panoramic::<f32>(6, 3, 8, 16, 1).unwrap();
        let test = synth_panoramic::<f32>(4, 3, 8, 16, 2).unwrap();
        let a = run_accuracy_matrix(&train, &test, &cfg(), |_, _, _| {}).unwrap();
        assert_eq!(a.rows.len(), 8);
        assert_eq!(a.history.len(), 12);
        assert!(a.accuracy("tiny-ccl", "original+rolled", DataVariant::Rolled).is_some());
        // orbit pooling over a CCL stack: rolled and original test sets agree
        for t in ["original", "original+rolled"] {
            assert_eq!(
                a.accuracy("tiny-ccl", t, DataVariant::Original),
                a.accuracy("tiny-ccl", t, DataVariant::Rolled)
            );
        }
        let b = run_accuracy_matrix(&train, &test, &cfg(), |_, _, _| {}).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn roll_curve_is_flat_for_invariant_net() {
        let train = synth_panoramic::<f32>(4, 3, 8, 16, 1).unwrap();
        let (mut net, _) = train_network(&tiny_specs()[0], &train, &cfg().train, Mode::Direct, |_| {}).unwrap();
        let curve = run_invariance_curves(&mut net, &train, CurveKind::Rolls).unwrap();
        assert_eq!(curve.len(), 16);
        assert!(curve.iter().all(|p| p.loss == curve[0].loss && p.accuracy == curve[0].accuracy));
        let tr = run_invariance_curves(&mut net, &train, CurveKind::Translations).unwrap();
        assert_eq!(tr.iter().map(|p| p.shift).collect::<Vec<_>>(), (-4..=4).collect::<Vec<_>>());
        let zero = tr.iter().find(|p| p.shift == 0).unwrap();
        assert_eq!(zero.loss, curve[0].loss);
    }

    #[test]
    fn class_count_must_fit() {
        let train = synth_panoramic::<f32>(2, 5, 8, 16, 1).unwrap();
        assert!(train_network(&tiny_specs()[0], &train, &cfg().train, Mode::Direct, |_| {}).is_err());
    }
}
