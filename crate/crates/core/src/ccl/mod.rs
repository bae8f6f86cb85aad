//! The circular-symmetric correlation layer.
//!
//! For input `f: [C_in, H, W]` and kernel `k: [C_out, C_in, K_z, K_φ]` with odd
//! spatial dims and radii `r = (K − 1)/2`:
//!
//! ```text
//! out[o, z, φ] = bias[o] + Σ_c Σ_{i=-r_z..r_z} Σ_{j=-r_φ..r_φ}
//!                f_ext[c, z+i, (φ+j) mod W] · k[o, c, i+r_z, j+r_φ]
//! ```
//!
//! where `f_ext` extends z by half-sample symmetry (`z < 0 ↦ −1−z`,
//! `z ≥ H ↦ 2H−1−z`). The output has the input's spatial size.

mod direct;
mod spectral;

pub use direct::{AxisBoundary, DirectCorrelation};
pub use spectral::{KernelEmbedding, SpectralCorrelator};

use crate::error::{CclError, Result};
use crate::group_action::{act, RotoTranslation};
use crate::scalar::Scalar;
use crate::tensor::{CounterRng, CylinderMap, Tensor};

/// Evaluation path for a layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Mode {
    /// Nested loops; reference semantics, bit-exact under integer rolls.
    #[default]
    Direct,
    /// Row/column FFTs on the symmetrically extended grid.
    Spectral,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Direct => "direct",
            Mode::Spectral => "spectral",
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "direct" | "oracle" => Ok(Mode::Direct),
            "spectral" | "fft" => Ok(Mode::Spectral),
            other => Err(format!("unknown mode `{other}` (expected direct or spectral)")),
        }
    }
}

/// Correlation weights `[C_out, C_in, K_z, K_φ]` plus one bias per output channel.
#[derive(Debug, Clone, PartialEq)]
pub struct CclKernel<T> {
    weights: Tensor<T>,
    bias: Tensor<T>,
}

impl<T: Scalar> CclKernel<T> {
    pub fn new(weights: Tensor<T>, bias: Tensor<T>) -> Result<Self> {
        let shape = weights.shape();
        if shape.len() != 4 {
            return Err(CclError::InvalidKernel(format!(
                "weights must be [C_out, C_in, K_z, K_phi], got {shape:?}"
            )));
        }
        if shape[2] % 2 == 0 || shape[3] % 2 == 0 {
            return Err(CclError::InvalidKernel(format!(
                "spatial kernel dims must be odd, got {}x{}",
                shape[2], shape[3]
            )));
        }
        if bias.shape() != [shape[0]] {
            return Err(CclError::ShapeMismatch {
                expected: vec![shape[0]],
                actual: bias.shape().to_vec(),
            });
        }
        Ok(CclKernel { weights, bias })
    }

    pub fn zeros(c_out: usize, c_in: usize, kz: usize, kphi: usize) -> Result<Self> {
        Self::new(Tensor::zeros(&[c_out, c_in, kz, kphi])?, Tensor::zeros(&[c_out])?)
    }

    /// Glorot-uniform weights in `±√(6/(fan_in + fan_out))` with
    /// `fan = C·K_z·K_φ`, zero bias.
    pub fn glorot(c_out: usize, c_in: usize, kz: usize, kphi: usize, seed: u64) -> Result<Self> {
        let receptive = (kz * kphi) as f64;
        let limit = (6.0 / (receptive * (c_in + c_out) as f64)).sqrt();
        let weights =
            Tensor::random_uniform(&[c_out, c_in, kz, kphi], seed, T::lit(-limit), T::lit(limit))?;
        Self::new(weights, Tensor::zeros(&[c_out])?)
    }

    /// Standard-normal weights and bias.
    pub fn random_normal(c_out: usize, c_in: usize, kz: usize, kphi: usize, seed: u64) -> Result<Self> {
        let mut rng = CounterRng::new(seed);
        let weights = Tensor::from_fn(&[c_out, c_in, kz, kphi], |_| T::lit(rng.next_normal()))?;
        let bias = Tensor::from_fn(&[c_out], |_| T::lit(rng.next_normal()))?;
        Self::new(weights, bias)
    }

    /// `δ` at the center of every diagonal `(c, c)` slice.
    pub fn identity(channels: usize, kz: usize, kphi: usize) -> Result<Self> {
        let mut k = Self::zeros(channels, channels, kz, kphi)?;
        for c in 0..channels {
            let off = ((c * channels + c) * kz + kz / 2) * kphi + kphi / 2;
            k.weights.data_mut()[off] = T::one();
        }
        Ok(k)
    }

    pub fn c_out(&self) -> usize {
        self.weights.shape()[0]
    }

    pub fn c_in(&self) -> usize {
        self.weights.shape()[1]
    }

    pub fn kz(&self) -> usize {
        self.weights.shape()[2]
    }

    pub fn kphi(&self) -> usize {
        self.weights.shape()[3]
    }

    pub fn weights(&self) -> &Tensor<T> {
        &self.weights
    }

    pub fn bias(&self) -> &Tensor<T> {
        &self.bias
    }

    pub fn weights_mut(&mut self) -> &mut Tensor<T> {
        &mut self.weights
    }

    pub fn bias_mut(&mut self) -> &mut Tensor<T> {
        &mut self.bias
    }

    pub fn parts_mut(&mut self) -> (&mut Tensor<T>, &mut Tensor<T>) {
        (&mut self.weights, &mut self.bias)
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    fn check_input(&self, f: &CylinderMap<T>) -> Result<()> {
        if f.channels() != self.c_in() {
            return Err(CclError::ShapeMismatch {
                expected: vec![self.c_in(), f.height(), f.width()],
                actual: f.values().shape().to_vec(),
            });
        }
        if self.kz() > f.height() || self.kphi() > f.width() {
            return Err(CclError::InvalidKernel(format!(
                "kernel {}x{} exceeds map {}x{}",
                self.kz(),
                self.kphi(),
                f.height(),
                f.width()
            )));
        }
        Ok(())
    }
}

/// Gradients returned by the backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct CclGrads<T> {
    pub input: CylinderMap<T>,
    pub weights: Tensor<T>,
    pub bias: Tensor<T>,
}

/// A CCL layer with cached geometry-dependent state.
#[derive(Debug, Clone)]
pub struct CclLayer<T: Scalar> {
    kernel: CclKernel<T>,
    mode: Mode,
    embedding: KernelEmbedding,
    direct: Option<DirectCorrelation>,
    spectral: Option<SpectralCorrelator<T>>,
    geometry: Option<(usize, usize)>,
}

impl<T: Scalar> CclLayer<T> {
    pub fn new(kernel: CclKernel<T>, mode: Mode) -> Self {
        CclLayer {
            kernel,
            mode,
            embedding: KernelEmbedding::Centered,
            direct: None,
            spectral: None,
            geometry: None,
        }
    }

    pub fn kernel(&self) -> &CclKernel<T> {
        &self.kernel
    }

    /// Mutable kernel access; drops cached kernel spectra.
    pub fn kernel_mut(&mut self) -> &mut CclKernel<T> {
        self.spectral = None;
        &mut self.kernel
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn set_mode(&mut self, mode: Mode) {
        self.mode = mode;
    }

    pub fn set_embedding(&mut self, embedding: KernelEmbedding) {
        self.embedding = embedding;
        self.spectral = None;
    }

    /// Builds the caches for maps of size `H × W`.
    pub fn prepare(&mut self, height: usize, width: usize) -> Result<()> {
        if self.geometry != Some((height, width)) {
            self.direct = None;
            self.spectral = None;
            self.geometry = Some((height, width));
        }
        if self.kernel.kz() > height || self.kernel.kphi() > width {
            return Err(CclError::InvalidKernel(format!(
                "kernel {}x{} exceeds map {height}x{width}",
                self.kernel.kz(),
                self.kernel.kphi()
            )));
        }
        match self.mode {
            Mode::Direct if self.direct.is_none() => {
                self.direct = Some(DirectCorrelation::new(
                    height,
                    width,
                    self.kernel.kz(),
                    self.kernel.kphi(),
                    AxisBoundary::Symmetric,
                    AxisBoundary::Circular,
                )?);
            }
            Mode::Spectral if self.spectral.is_none() => {
                let k = &self.kernel;
                self.spectral = Some(SpectralCorrelator::new(
                    k.weights.data(),
                    k.c_out(),
                    k.c_in(),
                    k.kz(),
                    k.kphi(),
                    height,
                    width,
                    self.embedding,
                )?);
            }
            _ => {}
        }
        Ok(())
    }

    fn check_prepared(&self, f: &CylinderMap<T>) -> Result<()> {
        self.kernel.check_input(f)?;
        let ready = match self.mode {
            Mode::Direct => self.direct.is_some(),
            Mode::Spectral => self.spectral.is_some(),
        };
        if !ready || self.geometry != Some((f.height(), f.width())) {
            return Err(CclError::arg(format!(
                "layer not prepared for {}x{} maps",
                f.height(),
                f.width()
            )));
        }
        Ok(())
    }

    pub fn forward(&mut self, f: &CylinderMap<T>) -> Result<CylinderMap<T>> {
        self.kernel.check_input(f)?;
        self.prepare(f.height(), f.width())?;
        self.forward_prepared(f)
    }

    /// Forward pass through caches built by [`CclLayer::prepare`].
    pub fn forward_prepared(&self, f: &CylinderMap<T>) -> Result<CylinderMap<T>> {
        self.check_prepared(f)?;
        let k = &self.kernel;
        let out = match self.mode {
            Mode::Direct => self.direct.as_ref().unwrap().forward(
                f.data(),
                k.weights.data(),
                k.bias.data(),
                k.c_in(),
            ),
            Mode::Spectral => self.spectral.as_ref().unwrap().forward(f.data(), k.bias.data()),
        };
        CylinderMap::from_vec(k.c_out(), f.height(), f.width(), out)
    }

    pub fn backward(&mut self, f: &CylinderMap<T>, grad_out: &CylinderMap<T>) -> Result<CclGrads<T>> {
        self.kernel.check_input(f)?;
        self.prepare(f.height(), f.width())?;
        self.backward_prepared(f, grad_out)
    }

    pub fn backward_prepared(&self, f: &CylinderMap<T>, grad_out: &CylinderMap<T>) -> Result<CclGrads<T>> {
        self.check_prepared(f)?;
        let k = &self.kernel;
        let expected = [k.c_out(), f.height(), f.width()];
        if grad_out.values().shape() != expected {
            return Err(CclError::ShapeMismatch {
                expected: expected.to_vec(),
                actual: grad_out.values().shape().to_vec(),
            });
        }
        let (gi, gw, gb) = match self.mode {
            Mode::Direct => self.direct.as_ref().unwrap().backward(
                f.data(),
                k.weights.data(),
                grad_out.data(),
                k.c_in(),
                k.c_out(),
            ),
            Mode::Spectral => self.spectral.as_ref().unwrap().backward(f.data(), grad_out.data()),
        };
        Ok(CclGrads {
            input: CylinderMap::from_vec(k.c_in(), f.height(), f.width(), gi)?,
            weights: Tensor::new(k.weights.shape().to_vec(), gw)?,
            bias: Tensor::new(vec![k.c_out()], gb)?,
        })
    }
}

pub fn ccl_forward_oracle<T: Scalar>(f: &CylinderMap<T>, k: &CclKernel<T>) -> Result<CylinderMap<T>> {
    CclLayer::new(k.clone(), Mode::Direct).forward(f)
}

pub fn ccl_forward_spectral<T: Scalar>(f: &CylinderMap<T>, k: &CclKernel<T>) -> Result<CylinderMap<T>> {
    CclLayer::new(k.clone(), Mode::Spectral).forward(f)
}

pub fn ccl_backward<T: Scalar>(
    f: &CylinderMap<T>,
    k: &CclKernel<T>,
    grad_out: &CylinderMap<T>,
    mode: Mode,
) -> Result<CclGrads<T>> {
    CclLayer::new(k.clone(), mode).backward(f, grad_out)
}

/// `max |act(ξ, layer(f)) − layer(act(ξ, f))|` for a pure rotation `ξ`.
pub fn equivariance_check<T: Scalar>(
    layer: &mut CclLayer<T>,
    f: &CylinderMap<T>,
    xi: &RotoTranslation,
) -> Result<f64> {
    if !xi.is_rotation() {
        return Err(CclError::arg("equivariance check takes pure rotations (shift 0)"));
    }
    let lhs = act(xi, &layer.forward(f)?);
    let rhs = layer.forward(&act(xi, f))?;
    lhs.max_abs_diff(&rhs)
}
