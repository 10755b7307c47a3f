//! Dataset binary: magic `GCRL`, `u32` version, `u32` group count, one `u32`
//! per group dimension, `u64` row count, then row-major `f64`s. All integers
//! and floats are little-endian.

use std::fs;
use std::path::Path;

use gcarl_core::{GroupLayout, Matrix};

use crate::error::{Error, Result};

pub const DATASET_MAGIC: &[u8; 4] = b"GCRL";
pub const DATASET_VERSION: u32 = 1;

pub fn encode_dataset(x: &Matrix, layout: &GroupLayout) -> Vec<u8> {
    assert_eq!(x.cols(), layout.total(), "matrix does not match the layout");
    let mut out = Vec::with_capacity(20 + 4 * layout.num_groups() + 8 * x.as_slice().len());
    out.extend_from_slice(DATASET_MAGIC);
    out.extend_from_slice(&DATASET_VERSION.to_le_bytes());
    out.extend_from_slice(&(layout.num_groups() as u32).to_le_bytes());
    for &d in layout.dims() {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    out.extend_from_slice(&(x.rows() as u64).to_le_bytes());
    for v in x.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], String> {
        let end = self.at.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or("truncated dataset")?;
        let s = &self.bytes[self.at..end];
        self.at = end;
        Ok(s)
    }

    fn u32(&mut self) -> std::result::Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

pub fn decode_dataset(bytes: &[u8]) -> std::result::Result<(Matrix, GroupLayout), String> {
    let mut r = Reader { bytes, at: 0 };
    if r.take(4)? != DATASET_MAGIC {
        return Err("not a GCRL dataset".into());
    }
    let version = r.u32()?;
    if version != DATASET_VERSION {
        return Err(format!("unsupported dataset version {version}"));
    }
    let groups = r.u32()? as usize;
    let dims = (0..groups).map(|_| r.u32().map(|d| d as usize)).collect::<std::result::Result<Vec<_>, _>>()?;
    if dims.contains(&0) {
        return Err("zero group dimension".into());
    }
    let n = u64::from_le_bytes(r.take(8)?.try_into().unwrap()) as usize;
    let layout = GroupLayout::new(dims);
    let count = n.checked_mul(layout.total()).ok_or("dataset size overflows")?;
    let body = r.take(count.checked_mul(8).ok_or("dataset size overflows")?)?;
    if r.at != bytes.len() {
        return Err("trailing bytes after the data".into());
    }
    let data = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    Ok((Matrix::from_vec(n, layout.total(), data).unwrap(), layout))
}

pub fn write_dataset(path: &Path, x: &Matrix, layout: &GroupLayout) -> Result<()> {
    super::write_bytes(path, &encode_dataset(x, layout))
}

pub fn read_dataset(path: &Path) -> Result<(Matrix, GroupLayout)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_dataset(&bytes).map_err(|m| Error::format(path, m))
}
