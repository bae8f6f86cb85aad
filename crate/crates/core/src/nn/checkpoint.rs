//! Checkpoints: a directory with `manifest.txt` plus one tensor dump per
//! named parameter.
//!
//! ```text
//! name mnist-ccl
//! input 1 28 28
//! precision f32
//! layer ccl(8,3,3)
//! ...
//! param layer00_weight layer00_weight.bin
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{LayerSpec, Network, NetworkSpec};
use crate::ccl::Mode;
use crate::error::{CclError, Result};
use crate::scalar::{Precision, Scalar};
use crate::tensor::{read_dump, write_dump};

const MANIFEST: &str = "manifest.txt";

pub fn save_checkpoint<T: Scalar>(net: &mut Network<T>, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CclError::io(dir, e))?;
    let spec = net.spec().clone();
    let mut manifest = String::new();
    writeln!(manifest, "name {}", spec.name).unwrap();
    let [c, h, w] = spec.input;
    writeln!(manifest, "input {c} {h} {w}").unwrap();
    writeln!(manifest, "precision {}", T::PRECISION).unwrap();
    for l in &spec.layers {
        writeln!(manifest, "layer {l}").unwrap();
    }
    for (name, t) in net.state_mut() {
        let file = format!("{name}.bin");
        write_dump(&dir.join(&file), t)?;
        writeln!(manifest, "param {name} {file}").unwrap();
    }
    let path = dir.join(MANIFEST);
    fs::write(&path, manifest).map_err(|e| CclError::io(path, e))
}

struct Manifest {
    spec: NetworkSpec,
    precision: Precision,
    params: Vec<(String, String)>,
}

fn parse_manifest(text: &str) -> Result<Manifest> {
    let bad = |reason: String| CclError::format("checkpoint manifest", reason);
    let mut name = None;
    let mut input = None;
    let mut precision = None;
    let mut layers = Vec::new();
    let mut params = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, rest) = line.split_once(' ').unwrap_or((line, ""));
        match key {
            "name" => name = Some(rest.to_string()),
            "input" => {
                let dims: Vec<usize> = rest
                    .split_whitespace()
                    .map(|d| d.parse().map_err(|_| bad(format!("line {}: bad extent {d:?}", n + 1))))
                    .collect::<Result<_>>()?;
                let dims: [usize; 3] = dims
                    .try_into()
                    .map_err(|_| bad(format!("line {}: input needs 3 extents", n + 1)))?;
                input = Some(dims);
            }
            "precision" => precision = Some(rest.parse::<Precision>().map_err(bad)?),
            "layer" => layers.push(rest.parse::<LayerSpec>()?),
            "param" => {
                let (pname, file) = rest
                    .split_once(' ')
                    .ok_or_else(|| bad(format!("line {}: param needs a name and a file", n + 1)))?;
                params.push((pname.to_string(), file.trim().to_string()));
            }
            other => return Err(bad(format!("line {}: unknown key {other:?}", n + 1))),
        }
    }
    Ok(Manifest {
        spec: NetworkSpec::new(
            name.ok_or_else(|| bad("missing name".into()))?,
            input.ok_or_else(|| bad("missing input".into()))?,
            layers,
        ),
        precision: precision.ok_or_else(|| bad("missing precision".into()))?,
        params,
    })
}

/// Reads the precision recorded in a checkpoint without loading it.
pub fn checkpoint_precision(dir: &Path) -> Result<Precision> {
    let path = dir.join(MANIFEST);
    let text = fs::read_to_string(&path).map_err(|e| CclError::io(&path, e))?;
    Ok(parse_manifest(&text)?.precision)
}

pub fn load_checkpoint<T: Scalar>(dir: &Path, mode: Mode) -> Result<Network<T>> {
    let path = dir.join(MANIFEST);
    let text = fs::read_to_string(&path).map_err(|e| CclError::io(&path, e))?;
    let m = parse_manifest(&text)?;
    if m.precision != T::PRECISION {
        return Err(CclError::format(
            "checkpoint",
            format!("stored as {} but loading as {}", m.precision, T::PRECISION),
        ));
    }
    let mut net = Network::build(&m.spec, 0, mode)?;
    {
        let state = net.state_mut();
        if state.len() != m.params.len() {
            return Err(CclError::format(
                "checkpoint",
                format!("{} parameters expected, manifest lists {}", state.len(), m.params.len()),
            ));
        }
        for ((name, slot), (pname, file)) in state.into_iter().zip(&m.params) {
            if &name != pname {
                return Err(CclError::format(
                    "checkpoint",
                    format!("expected parameter {name}, found {pname}"),
                ));
            }
            let t = read_dump::<T>(&dir.join(file))?;
            if t.shape() != slot.shape() {
                return Err(CclError::ShapeMismatch {
                    expected: slot.shape().to_vec(),
                    actual: t.shape().to_vec(),
                });
            }
            *slot = t;
        }
    }
    net.refresh()?;
    Ok(net)
}
