//! Binary tensor dump: `u32` rank, `rank × u32` extents, then the raw
//! elements, everything little-endian. The element width (4 or 8 bytes) is
//! implied by the payload length.

use std::fs;
use std::path::Path;

use super::Tensor;
use crate::error::{CclError, Result};
use crate::scalar::Scalar;

pub fn encode_dump<T: Scalar>(t: &Tensor<T>) -> Vec<u8> {
    let mut out = Vec::with_capacity(4 + 4 * t.rank() + T::BYTES * t.len());
    out.extend_from_slice(&(t.rank() as u32).to_le_bytes());
    for &d in t.shape() {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for &x in t.data() {
        x.write_le(&mut out);
    }
    out
}

pub fn decode_dump<T: Scalar>(bytes: &[u8]) -> Result<Tensor<T>> {
    let word = |i: usize| -> Result<usize> {
        bytes
            .get(4 * i..4 * i + 4)
            .map(|b| u32::from_le_bytes(b.try_into().unwrap()) as usize)
            .ok_or_else(|| CclError::format("tensor dump", "truncated header"))
    };
    let rank = word(0)?;
    if rank == 0 {
        return Err(CclError::format("tensor dump", "rank 0"));
    }
    let shape = (1..=rank).map(word).collect::<Result<Vec<_>>>()?;
    let len: usize = shape.iter().product();
    let payload = &bytes[4 * (rank + 1)..];
    if payload.len() != len * T::BYTES {
        return Err(CclError::format(
            "tensor dump",
            format!(
                "payload of {} bytes does not hold {len} {}-byte scalars",
                payload.len(),
                T::BYTES
            ),
        ));
    }
    let data = payload.chunks_exact(T::BYTES).map(T::read_le).collect();
    Tensor::new(shape, data)
}

pub fn write_dump<T: Scalar>(path: &Path, t: &Tensor<T>) -> Result<()> {
    fs::write(path, encode_dump(t)).map_err(|e| CclError::io(path, e))
}

pub fn read_dump<T: Scalar>(path: &Path) -> Result<Tensor<T>> {
    let bytes = fs::read(path).map_err(|e| CclError::io(path, e))?;
    decode_dump(&bytes)
}
