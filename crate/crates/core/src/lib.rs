//! Circular-symmetric correlation layers (CCL) on the lateral surface of a
//! cylinder.
//!
//! Feature maps are sampled on a `z × φ` grid: the φ axis is periodic and the
//! z axis is bounded. A CCL layer correlates along φ circularly and along z
//! under half-sample symmetric (DCT-II style) extension, which makes it exactly
//! equivariant to integer column rolls.
//!
//! Two evaluation paths are provided for every layer: a direct nested-loop
//! reference ([`ccl::Mode::Direct`]) and an FFT path ([`ccl::Mode::Spectral`]).
//! Both compute the same function and are cross-checked in the test suites.

pub mod ccl;
pub mod cli;
pub mod data;
pub mod error;
pub mod group_action;
pub mod harness;
pub mod nn;
mod par;
pub mod scalar;
pub mod spectral;
pub mod tensor;

pub use ccl::{CclKernel, CclLayer, Mode};
pub use error::{CclError, Result};
pub use group_action::RotoTranslation;
pub use scalar::{Precision, Scalar};
pub use tensor::{CylinderMap, Tensor};

/// Library version, echoed into run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
