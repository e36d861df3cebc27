use std::path::Path;

use ndarray::Array2;

use super::{read_file, write_file};
use crate::error::{Error, Result};

/// Binary 8-bit PGM (P5).
pub fn encode_pgm(image: &Array2<u8>) -> Vec<u8> {
    let (h, w) = image.dim();
    let mut out = format!("P5\n{w} {h}\n255\n").into_bytes();
    out.extend(image.iter().copied());
    out
}

/// Parses P5 files with maxval 255. Comments are not supported.
pub fn decode_pgm(bytes: &[u8]) -> Result<Array2<u8>> {
    let mut fields = Vec::with_capacity(4);
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::format(pos, "truncated PGM header"));
        }
        fields.push((start, String::from_utf8_lossy(&bytes[start..pos]).into_owned()));
    }
    if fields[0].1 != "P5" {
        return Err(Error::format(0, "not a binary PGM (P5)"));
    }
    let num = |i: usize| -> Result<usize> {
        fields[i]
            .1
            .parse()
            .map_err(|_| Error::format(fields[i].0, format!("bad number {:?}", fields[i].1)))
    };
    let (w, h, maxval) = (num(1)?, num(2)?, num(3)?);
    if maxval != 255 {
        return Err(Error::format(fields[3].0, format!("unsupported maxval {maxval}")));
    }
    // exactly one whitespace byte separates the header from the raster
    pos += 1;
    let body = bytes.get(pos..).unwrap_or_default();
    if body.len() != w * h {
        return Err(Error::format(
            pos,
            format!("raster has {} bytes, header declares {}", body.len(), w * h),
        ));
    }
    Ok(Array2::from_shape_vec((h, w), body.to_vec()).expect("length checked"))
}

pub fn write_pgm(path: &Path, image: &Array2<u8>) -> Result<()> {
    write_file(path, &encode_pgm(image))
}

pub fn read_pgm(path: &Path) -> Result<Array2<u8>> {
    decode_pgm(&read_file(path)?)
}
