//! Labeled image datasets: MNIST IDX ingestion, rolled/translated variants
//! and a procedurally generated panoramic set.

pub mod idx;
mod synth;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

pub use synth::synth_panoramic;

use crate::error::{CclError, Result};
use crate::group_action::{act, RotoTranslation};
use crate::scalar::Scalar;
use crate::tensor::{write_dump, CounterRng, CylinderMap, Tensor};

/// Environment variable naming the default MNIST directory.
pub const DATA_DIR_ENV: &str = "CCL_DATA_DIR";

/// Images `[N, C, H, W]` with one label in `[0, class_count)` each.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset<T> {
    images: Tensor<T>,
    labels: Vec<usize>,
    class_count: usize,
}

impl<T: Scalar> LabeledDataset<T> {
    pub fn new(images: Tensor<T>, labels: Vec<usize>, class_count: usize) -> Result<Self> {
        if images.rank() != 4 {
            return Err(CclError::InvalidShape {
                shape: images.shape().to_vec(),
                reason: "dataset images are [N, C, H, W]".into(),
            });
        }
        if images.shape()[0] != labels.len() {
            return Err(CclError::LengthMismatch {
                expected: images.shape()[0],
                actual: labels.len(),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= class_count) {
            return Err(CclError::arg(format!("label {bad} outside {class_count} classes")));
        }
        Ok(LabeledDataset {
            images,
            labels,
            class_count,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn images(&self) -> &Tensor<T> {
        &self.images
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    /// Per-sample shape `[C, H, W]`.
    pub fn sample_shape(&self) -> [usize; 3] {
        let s = self.images.shape();
        [s[1], s[2], s[3]]
    }

    pub fn image(&self, i: usize) -> CylinderMap<T> {
        let [c, h, w] = self.sample_shape();
        CylinderMap::from_vec(c, h, w, self.images.outer(i).to_vec()).expect("valid sample")
    }

    /// Stacks the selected samples into a batch.
    pub fn batch(&self, indices: &[usize]) -> Result<(Tensor<T>, Vec<usize>)> {
        let [c, h, w] = self.sample_shape();
        let mut data = Vec::with_capacity(indices.len() * c * h * w);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= self.len() {
                return Err(CclError::arg(format!("sample {i} out of range")));
            }
            data.extend_from_slice(self.images.outer(i));
            labels.push(self.labels[i]);
        }
        Ok((Tensor::new(vec![indices.len(), c, h, w], data)?, labels))
    }

    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let (images, labels) = self.batch(indices)?;
        Self::new(images, labels, self.class_count)
    }

    /// First `n` samples (all of them if `n` exceeds the size).
    pub fn take(&self, n: usize) -> Result<Self> {
        let idx: Vec<usize> = (0..n.min(self.len())).collect();
        self.subset(&idx)
    }

    /// Applies `f` to every image independently.
    pub fn map_images(&self, mut f: impl FnMut(usize, &CylinderMap<T>) -> CylinderMap<T>) -> Result<Self> {
        let mut data = Vec::with_capacity(self.images.len());
        for i in 0..self.len() {
            data.extend_from_slice(f(i, &self.image(i)).data());
        }
        Self::new(
            Tensor::new(self.images.shape().to_vec(), data)?,
            self.labels.clone(),
            self.class_count,
        )
    }

    pub fn concat(&self, other: &Self) -> Result<Self> {
        if self.sample_shape() != other.sample_shape() {
            return Err(CclError::ShapeMismatch {
                expected: self.sample_shape().to_vec(),
                actual: other.sample_shape().to_vec(),
            });
        }
        let mut shape = self.images.shape().to_vec();
        shape[0] += other.len();
        let data = [self.images.data(), other.images.data()].concat();
        let labels = [self.labels.as_slice(), other.labels.as_slice()].concat();
        Self::new(
            Tensor::new(shape, data)?,
            labels,
            self.class_count.max(other.class_count),
        )
    }

    pub fn cast<U: Scalar>(&self) -> LabeledDataset<U> {
        LabeledDataset {
            images: self.images.cast(),
            labels: self.labels.clone(),
            class_count: self.class_count,
        }
    }

    /// Writes `images.bin` (tensor dump) and `labels.csv` into `dir`.
    pub fn export(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| CclError::io(dir, e))?;
        write_dump(&dir.join("images.bin"), &self.images)?;
        let mut csv = String::from("index,label\n");
        for (i, l) in self.labels.iter().enumerate() {
            writeln!(csv, "{i},{l}").unwrap();
        }
        let path = dir.join("labels.csv");
        fs::write(&path, csv).map_err(|e| CclError::io(path, e))
    }
}

/// Parses an IDX image/label pair held in memory. Pixel bytes are scaled to
/// `[0, 1]` by `/255`; images become `[N, 1, rows, cols]`.
pub fn decode_idx<T: Scalar>(image_bytes: &[u8], label_bytes: &[u8]) -> Result<LabeledDataset<T>> {
    let (n, rows, cols, pixels) = idx::parse_images(image_bytes)?;
    let labels = idx::parse_labels(label_bytes)?;
    if labels.len() != n {
        return Err(CclError::format(
            "IDX pair",
            format!("{n} images but {} labels", labels.len()),
        ));
    }
    let scale = 1.0 / 255.0;
    let images = Tensor::new(
        vec![n, 1, rows, cols],
        pixels.iter().map(|&b| T::lit(b as f64 * scale)).collect(),
    )?;
    let labels: Vec<usize> = labels.iter().map(|&l| l as usize).collect();
    let classes = labels.iter().max().map_or(1, |m| m + 1).max(10);
    LabeledDataset::new(images, labels, classes)
}

pub fn load_idx<T: Scalar>(images_path: &Path, labels_path: &Path) -> Result<LabeledDataset<T>> {
    let images = fs::read(images_path).map_err(|e| CclError::io(images_path, e))?;
    let labels = fs::read(labels_path).map_err(|e| CclError::io(labels_path, e))?;
    decode_idx(&images, &labels)
}

/// Which standard MNIST file pair to load from a directory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

/// Paths of the standard file names (`train-*` / `t10k-*`, uncompressed).
pub fn mnist_paths(dir: &Path, split: Split) -> (PathBuf, PathBuf) {
    let prefix = match split {
        Split::Train => "train",
        Split::Test => "t10k",
    };
    (
        dir.join(format!("{prefix}-images-idx3-ubyte")),
        dir.join(format!("{prefix}-labels-idx1-ubyte")),
    )
}

pub fn load_mnist<T: Scalar>(dir: &Path, split: Split) -> Result<LabeledDataset<T>> {
    let (images, labels) = mnist_paths(dir, split);
    load_idx(&images, &labels)
}

/// Directory holding the bundled 2000/500 MNIST subset.
pub fn bundled_mnist_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data/mnist-subset")
}

/// How rolls are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RollSpec {
    /// Uniform over the integer columns `[0, W)`.
    Uniform,
    Fixed(isize),
}

/// How z translations are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShiftSpec {
    None,
    Fixed(isize),
    /// Uniform over the inclusive range.
    Uniform(isize, isize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RollPolicy {
    pub seed: u64,
    pub roll: RollSpec,
    pub shift: ShiftSpec,
}

impl RollPolicy {
    pub fn uniform(seed: u64) -> Self {
        RollPolicy {
            seed,
            roll: RollSpec::Uniform,
            shift: ShiftSpec::None,
        }
    }

    pub fn fixed(roll: isize) -> Self {
        RollPolicy {
            seed: 0,
            roll: RollSpec::Fixed(roll),
            shift: ShiftSpec::None,
        }
    }

    /// A fixed rotation angle quantized to the nearest column of a `width`-wide grid.
    pub fn fixed_angle(psi: f64, width: usize) -> Self {
        Self::fixed(RotoTranslation::from_angle(psi, 0, width).roll() as isize)
    }

    pub fn translation(shift: isize) -> Self {
        RollPolicy {
            seed: 0,
            roll: RollSpec::Fixed(0),
            shift: ShiftSpec::Fixed(shift),
        }
    }

    /// The group element applied to sample `i`.
    pub fn element(&self, i: usize, width: usize) -> RotoTranslation {
        let mut rng = CounterRng::substream(self.seed, i as u64);
        let roll = match self.roll {
            RollSpec::Uniform => rng.below(width as u64) as isize,
            RollSpec::Fixed(s) => s,
        };
        let shift = match self.shift {
            ShiftSpec::None => 0,
            ShiftSpec::Fixed(v) => v,
            ShiftSpec::Uniform(lo, hi) => lo + rng.below((hi - lo + 1) as u64) as isize,
        };
        RotoTranslation::new(roll, shift, width)
    }
}

/// Applies the policy's group element to every image; labels unchanged.
pub fn roll_dataset<T: Scalar>(ds: &LabeledDataset<T>, policy: &RollPolicy) -> Result<LabeledDataset<T>> {
    let width = ds.sample_shape()[2];
    ds.map_images(|i, img| act(&policy.element(i, width), img))
}

/// How a rolled training set relates to the original.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RolledComposition {
    /// Every image replaced by its rolled copy.
    Replace,
    /// Originals followed by rolled copies.
    Union,
}

pub fn rolled_variant<T: Scalar>(
    ds: &LabeledDataset<T>,
    policy: &RollPolicy,
    composition: RolledComposition,
) -> Result<LabeledDataset<T>> {
    let rolled = roll_dataset(ds, policy)?;
    match composition {
        RolledComposition::Replace => Ok(rolled),
        RolledComposition::Union => ds.concat(&rolled),
    }
}
