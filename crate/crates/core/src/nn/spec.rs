use std::fmt;
use std::str::FromStr;

use super::layers::{maxpool_shape, PoolMode};
use crate::error::{CclError, Result};

/// One layer descriptor. Text form (used in manifests and `--layers`):
/// `ccl(c_out,kz,kphi)`, `conv(c_out,kz,kphi)`, `relu`, `maxpool(k,s)`,
/// `orbitpool(max|avg)`, `gap(k)`, `bn`, `fc(l_in,l_out)`, `softmax`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LayerSpec {
    Ccl { c_out: usize, kz: usize, kphi: usize },
    Conv { c_out: usize, kz: usize, kphi: usize },
    Relu,
    MaxPool { k: usize, s: usize },
    OrbitPool(PoolMode),
    /// Global average pool; `k` is the declared window (side length of a
    /// square map, or the number of pooled positions).
    GlobalAvgPool(usize),
    BatchNorm,
    Fc { l_in: usize, l_out: usize },
    Softmax,
}

impl LayerSpec {
    pub fn ccl(c_out: usize) -> Self {
        LayerSpec::Ccl { c_out, kz: 3, kphi: 3 }
    }

    pub fn conv(c_out: usize) -> Self {
        LayerSpec::Conv { c_out, kz: 3, kphi: 3 }
    }

    /// Output shape for a per-sample input shape.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let spatial = |what: &str| -> Result<(usize, usize, usize)> {
            match *input {
                [c, h, w] => Ok((c, h, w)),
                _ => Err(CclError::InvalidSpec(format!(
                    "{what} needs a [C, H, W] input, got {input:?}"
                ))),
            }
        };
        match *self {
            LayerSpec::Ccl { c_out, kz, kphi } | LayerSpec::Conv { c_out, kz, kphi } => {
                let (_, h, w) = spatial("correlation")?;
                if kz % 2 == 0 || kphi % 2 == 0 || kz > h || kphi > w || c_out == 0 {
                    return Err(CclError::InvalidSpec(format!(
                        "kernel {kz}x{kphi} with {c_out} outputs does not fit a {h}x{w} map"
                    )));
                }
                Ok(vec![c_out, h, w])
            }
            LayerSpec::Relu | LayerSpec::Softmax => Ok(input.to_vec()),
            LayerSpec::BatchNorm => {
                if input.is_empty() {
                    return Err(CclError::InvalidSpec("batch norm on an empty shape".into()));
                }
                Ok(input.to_vec())
            }
            LayerSpec::MaxPool { k, s } => {
                let (c, h, w) = spatial("maxpool")?;
                let (oh, ow) =
                    maxpool_shape(h, w, k, s).map_err(|e| CclError::InvalidSpec(e.to_string()))?;
                Ok(vec![c, oh, ow])
            }
            LayerSpec::OrbitPool(_) => {
                let (c, h, _) = spatial("orbit pool")?;
                Ok(vec![c, h])
            }
            LayerSpec::GlobalAvgPool(k) => {
                let (c, h, w) = spatial("global average pool")?;
                if !((h == k && w == k) || h * w == k) {
                    return Err(CclError::InvalidSpec(format!(
                        "gap({k}) does not cover a {h}x{w} map"
                    )));
                }
                Ok(vec![c])
            }
            LayerSpec::Fc { l_in, l_out } => {
                let n: usize = input.iter().product();
                if n != l_in {
                    return Err(CclError::InvalidSpec(format!(
                        "fc({l_in},{l_out}) receives {n} features ({input:?})"
                    )));
                }
                Ok(vec![l_out])
            }
        }
    }
}

impl fmt::Display for LayerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            LayerSpec::Ccl { c_out, kz, kphi } => write!(f, "ccl({c_out},{kz},{kphi})"),
            LayerSpec::Conv { c_out, kz, kphi } => write!(f, "conv({c_out},{kz},{kphi})"),
            LayerSpec::Relu => f.write_str("relu"),
            LayerSpec::MaxPool { k, s } => write!(f, "maxpool({k},{s})"),
            LayerSpec::OrbitPool(PoolMode::Max) => f.write_str("orbitpool(max)"),
            LayerSpec::OrbitPool(PoolMode::Avg) => f.write_str("orbitpool(avg)"),
            LayerSpec::GlobalAvgPool(k) => write!(f, "gap({k})"),
            LayerSpec::BatchNorm => f.write_str("bn"),
            LayerSpec::Fc { l_in, l_out } => write!(f, "fc({l_in},{l_out})"),
            LayerSpec::Softmax => f.write_str("softmax"),
        }
    }
}

impl FromStr for LayerSpec {
    type Err = CclError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, args) = match s.find('(') {
            Some(i) if s.ends_with(')') => (&s[..i], &s[i + 1..s.len() - 1]),
            Some(_) => return Err(CclError::InvalidSpec(format!("unbalanced `{s}`"))),
            None => (s, ""),
        };
        let args: Vec<&str> = if args.is_empty() {
            vec![]
        } else {
            args.split(',').map(str::trim).collect()
        };
        let nums = || -> Result<Vec<usize>> {
            args.iter()
                .map(|a| {
                    a.parse()
                        .map_err(|_| CclError::InvalidSpec(format!("bad number `{a}` in `{s}`")))
                })
                .collect()
        };
        let arity = |n: usize| -> Result<Vec<usize>> {
            let v = nums()?;
            if v.len() != n {
                return Err(CclError::InvalidSpec(format!("`{name}` takes {n} arguments")));
            }
            Ok(v)
        };
        Ok(match name {
            "ccl" | "conv" => {
                let v = nums()?;
                let (c_out, kz, kphi) = match v.as_slice() {
                    [c] => (*c, 3, 3),
                    [c, kz, kp] => (*c, *kz, *kp),
                    _ => return Err(CclError::InvalidSpec(format!("`{name}` takes 1 or 3 arguments"))),
                };
                if name == "ccl" {
                    LayerSpec::Ccl { c_out, kz, kphi }
                } else {
                    LayerSpec::Conv { c_out, kz, kphi }
                }
            }
            "relu" => {
                arity(0)?;
                LayerSpec::Relu
            }
            "maxpool" => {
                let v = arity(2)?;
                LayerSpec::MaxPool { k: v[0], s: v[1] }
            }
            "orbitpool" => match args.as_slice() {
                [m] => LayerSpec::OrbitPool(m.parse().map_err(CclError::InvalidSpec)?),
                _ => return Err(CclError::InvalidSpec("`orbitpool` takes max or avg".into())),
            },
            "gap" => LayerSpec::GlobalAvgPool(arity(1)?[0]),
            "bn" => {
                arity(0)?;
                LayerSpec::BatchNorm
            }
            "fc" => {
                let v = arity(2)?;
                LayerSpec::Fc { l_in: v[0], l_out: v[1] }
            }
            "softmax" => {
                arity(0)?;
                LayerSpec::Softmax
            }
            other => return Err(CclError::InvalidSpec(format!("unknown layer `{other}`"))),
        })
    }
}

/// A named architecture over a fixed per-sample input shape `[C, H, W]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkSpec {
    pub name: String,
    pub input: [usize; 3],
    pub layers: Vec<LayerSpec>,
}

/// Names accepted by [`NetworkSpec::named`].
pub const NAMED_SPECS: &[&str] = &[
    "mnist-ccl",
    "mnist-conv",
    "mnist-ccl-orbit",
    "cifar10-ccl",
    "cifar10-conv",
    "shapenet-ccl",
    "shapenet-conv",
];

impl NetworkSpec {
    pub fn new(name: impl Into<String>, input: [usize; 3], layers: Vec<LayerSpec>) -> Self {
        NetworkSpec {
            name: name.into(),
            input,
            layers,
        }
    }

    /// MNIST column of the architecture table, with `corr` building the
    /// correlation layers (CCL or its planar twin).
    fn mnist(name: &str, corr: fn(usize) -> LayerSpec) -> Self {
        use LayerSpec::*;
        Self::new(
            name,
            [1, 28, 28],
            vec![
                corr(8),
                Relu,
                corr(8),
                Relu,
                MaxPool { k: 2, s: 2 },
                corr(8),
                Relu,
                corr(8),
                Relu,
                MaxPool { k: 2, s: 2 },
                corr(10),
                Relu,
                GlobalAvgPool(7),
                Softmax,
            ],
        )
    }

    fn cifar10(name: &str, corr: fn(usize) -> LayerSpec) -> Self {
        use LayerSpec::*;
        Self::new(
            name,
            [3, 32, 32],
            vec![
                corr(128),
                Relu,
                corr(128),
                Relu,
                MaxPool { k: 2, s: 2 },
                corr(128),
                Relu,
                corr(256),
                Relu,
                MaxPool { k: 2, s: 2 },
                GlobalAvgPool(8),
                Fc { l_in: 256, l_out: 120 },
                Relu,
                Fc { l_in: 120, l_out: 84 },
                Relu,
                Fc { l_in: 84, l_out: 10 },
                Softmax,
            ],
        )
    }

    fn shapenet(name: &str, corr: fn(usize) -> LayerSpec) -> Self {
        use LayerSpec::*;
        Self::new(
            name,
            [1, 48, 100],
            vec![
                corr(64),
                BatchNorm,
                Relu,
                MaxPool { k: 2, s: 2 },
                corr(64),
                BatchNorm,
                Relu,
                corr(128),
                BatchNorm,
                Relu,
                MaxPool { k: 2, s: 2 },
                corr(256),
                BatchNorm,
                Relu,
                GlobalAvgPool(300),
                Fc { l_in: 256, l_out: 100 },
                Relu,
                Fc { l_in: 100, l_out: 55 },
                Softmax,
            ],
        )
    }

    pub fn named(name: &str) -> Result<Self> {
        use LayerSpec::*;
        Ok(match name {
            "mnist-ccl" => Self::mnist(name, LayerSpec::ccl),
            "mnist-conv" => Self::mnist(name, LayerSpec::conv),
            "mnist-ccl-orbit" => {
                let mut s = Self::mnist(name, LayerSpec::ccl);
                s.layers.truncate(12);
                s.layers.extend([OrbitPool(PoolMode::Max), Fc { l_in: 70, l_out: 10 }, Softmax]);
                s
            }
            "cifar10-ccl" => Self::cifar10(name, LayerSpec::ccl),
            "cifar10-conv" => Self::cifar10(name, LayerSpec::conv),
            "shapenet-ccl" => Self::shapenet(name, LayerSpec::ccl),
            "shapenet-conv" => Self::shapenet(name, LayerSpec::conv),
            other => {
                return Err(CclError::InvalidSpec(format!(
                    "unknown network `{other}` (known: {})",
                    NAMED_SPECS.join(", ")
                )))
            }
        })
    }

    /// Same architecture with every CCL replaced by a planar convolution.
    pub fn planar_twin(&self) -> Self {
        let layers = self
            .layers
            .iter()
            .map(|l| match *l {
                LayerSpec::Ccl { c_out, kz, kphi } => LayerSpec::Conv { c_out, kz, kphi },
                other => other,
            })
            .collect();
        let name = self.name.replace("-ccl", "-conv");
        NetworkSpec::new(name, self.input, layers)
    }

    /// With a different input shape (channel count and grid).
    pub fn with_input(mut self, input: [usize; 3]) -> Self {
        self.input = input;
        self
    }

    /// Per-layer output shapes; the last must be a logit vector.
    pub fn resolve(&self) -> Result<Vec<Vec<usize>>> {
        if self.input.iter().any(|&d| d == 0) {
            return Err(CclError::InvalidSpec(format!("empty input {:?}", self.input)));
        }
        if self.layers.is_empty() {
            return Err(CclError::InvalidSpec("no layers".into()));
        }
        let mut shape = self.input.to_vec();
        let mut out = Vec::with_capacity(self.layers.len());
        for (i, l) in self.layers.iter().enumerate() {
            shape = l
                .output_shape(&shape)
                .map_err(|e| CclError::InvalidSpec(format!("layer {i} ({l}): {e}")))?;
            out.push(shape.clone());
        }
        if shape.len() != 1 {
            return Err(CclError::InvalidSpec(format!(
                "network ends in shape {shape:?}, expected a logit vector"
            )));
        }
        Ok(out)
    }
}
