//! Binary and image file formats.
//!
//! * FRG1: a single real matrix (fringe or image) stored as float32.
//! * PAIR: an input image and its target, as two FRG1 blocks.
//! * WUN1: model checkpoints.
//! * PGM: 8-bit grayscale previews.
//!
//! All multi-byte fields are little-endian. Readers check every declared
//! size against the bytes actually present and report the offending offset.

mod bytes;
mod frg1;
mod pgm;
mod wun1;

use std::path::Path;

pub use frg1::{decode_frg1, decode_pair, encode_frg1, encode_pair, read_frg1, read_pair, write_frg1, write_pair, Frg1};
pub use pgm::{decode_pgm, encode_pgm, read_pgm, write_pgm};
pub use wun1::{decode_wun1, encode_wun1, NamedTensor, Wun1};

use crate::error::{Error, Result};

pub fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

/// Writes `bytes`, creating parent directories as needed.
pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
