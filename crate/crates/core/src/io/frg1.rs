use std::path::Path;

use ndarray::Array2;

use super::bytes::{put_f32s, Reader};
use super::{read_file, write_file};
use crate::error::{Error, Result};
use crate::forward::{FringeFrame, GridTag};

pub const FRG1_VERSION: u16 = 1;
pub const PAIR_VERSION: u16 = 1;
const DTYPE_F32: u8 = 0;

/// Contents of an FRG1 block: a real matrix and its sampling-grid tag.
#[derive(Debug, Clone, PartialEq)]
pub struct Frg1 {
    pub grid: GridTag,
    pub data: Array2<f64>,
}

impl From<&FringeFrame> for Frg1 {
    fn from(f: &FringeFrame) -> Self {
        Self {
            grid: f.grid,
            data: f.samples.clone(),
        }
    }
}

impl Frg1 {
    pub fn image(data: Array2<f64>) -> Self {
        Self {
            grid: GridTag::LambdaLinear,
            data,
        }
    }

    pub fn into_frame(self) -> Result<FringeFrame> {
        FringeFrame::new(self.data, self.grid)
    }
}

/// 16-byte header followed by row-major float32 samples.
pub fn encode_frg1(block: &Frg1) -> Vec<u8> {
    let (rows, cols) = block.data.dim();
    let mut out = Vec::with_capacity(16 + 4 * rows * cols);
    out.extend_from_slice(b"FRG1");
    out.extend_from_slice(&FRG1_VERSION.to_le_bytes());
    out.push(DTYPE_F32);
    out.push(block.grid.code());
    out.extend_from_slice(&(rows as u32).to_le_bytes());
    out.extend_from_slice(&(cols as u32).to_le_bytes());
    put_f32s(&mut out, block.data.iter().map(|&v| v as f32));
    out
}

fn read_block(r: &mut Reader<'_>) -> Result<Frg1> {
    r.magic(b"FRG1")?;
    let at = r.pos();
    let version = r.u16("version")?;
    if version != FRG1_VERSION {
        return Err(Error::format(at, format!("unsupported FRG1 version {version}")));
    }
    let at = r.pos();
    let dtype = r.u8("dtype")?;
    if dtype != DTYPE_F32 {
        return Err(Error::format(at, format!("unsupported dtype {dtype}")));
    }
    let at = r.pos();
    let tag = r.u8("grid tag")?;
    let grid = GridTag::from_code(tag).ok_or_else(|| Error::format(at, format!("unknown grid tag {tag}")))?;
    let rows = r.u32("row count")? as usize;
    let cols = r.u32("column count")? as usize;
    let n = rows
        .checked_mul(cols)
        .ok_or_else(|| Error::format(r.pos(), "matrix size overflows"))?;
    let at = r.pos();
    let values = r.f32s(n, "samples")?;
    if let Some(k) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::format(at + 4 * k, "non-finite sample"));
    }
    let data = Array2::from_shape_vec((rows, cols), values.into_iter().map(f64::from).collect())
        .expect("length checked");
    Ok(Frg1 { grid, data })
}

/// Parses exactly one FRG1 block; trailing bytes are an error.
pub fn decode_frg1(bytes: &[u8]) -> Result<Frg1> {
    let mut r = Reader::new(bytes);
    let block = read_block(&mut r)?;
    if r.remaining() != 0 {
        return Err(Error::format(r.pos(), format!("{} trailing bytes", r.remaining())));
    }
    Ok(block)
}

/// PAIR header ("PAIR", version, 10 reserved bytes), then the input block
/// and the target block.
pub fn encode_pair(input: &Frg1, target: &Frg1) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(b"PAIR");
    out.extend_from_slice(&PAIR_VERSION.to_le_bytes());
    out.extend_from_slice(&[0u8; 10]);
    out.extend(encode_frg1(input));
    out.extend(encode_frg1(target));
    out
}

pub fn decode_pair(bytes: &[u8]) -> Result<(Frg1, Frg1)> {
    let mut r = Reader::new(bytes);
    r.magic(b"PAIR")?;
    let at = r.pos();
    let version = r.u16("version")?;
    if version != PAIR_VERSION {
        return Err(Error::format(at, format!("unsupported PAIR version {version}")));
    }
    r.take(10, "reserved header bytes")?;
    let input = read_block(&mut r)?;
    let target = read_block(&mut r)?;
    if r.remaining() != 0 {
        return Err(Error::format(r.pos(), format!("{} trailing bytes", r.remaining())));
    }
    Ok((input, target))
}

fn with_path<T>(path: &Path, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Format { offset, message } => Error::Format {
            offset,
            message: format!("{}: {message}", path.display()),
        },
        other => other,
    })
}

pub fn read_frg1(path: &Path) -> Result<Frg1> {
    with_path(path, decode_frg1(&read_file(path)?))
}

pub fn write_frg1(path: &Path, block: &Frg1) -> Result<()> {
    write_file(path, &encode_frg1(block))
}

pub fn read_pair(path: &Path) -> Result<(Frg1, Frg1)> {
    with_path(path, decode_pair(&read_file(path)?))
}

pub fn write_pair(path: &Path, input: &Frg1, target: &Frg1) -> Result<()> {
    write_file(path, &encode_pair(input, target))
}
