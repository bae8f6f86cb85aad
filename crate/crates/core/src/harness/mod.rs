//! Experiment drivers: the equivariance-error sweep, accuracy matrices and
//! invariance curves, the complexity benchmark and the verification suite.
//! Every driver returns plain records and can write them as CSV.

mod accuracy;
mod bench;
mod report;
mod sweep;
mod verify;

pub use accuracy::{
    run_accuracy_matrix, run_invariance_curves, train_network, write_curve_csv, AccuracyConfig,
    AccuracyMatrix, AccuracyRow, CurveKind, CurvePoint, DataVariant, HistoryRow,
};
pub use bench::{loglog_slope, run_bench, BenchConfig, BenchRecord, BenchReport, Implementation, KernelExtent};
pub use report::{fmt_f64, write_csv, RunInfo};
pub use sweep::{
    population_std, run_discretization_sweep, CclStack, EquivarianceRecord, EquivarianceReport,
    EquivarianceSample, SweepConfig,
};
pub use verify::{
    gradcheck_spec, invariant_spec, oracle_deviation, orbit_invariance_deviation, run_verify, CheckResult, Fault,
    VerifyConfig, VerifyReport, DCT_LENGTHS, SIZES, TRANSFORM_LENGTHS,
};
