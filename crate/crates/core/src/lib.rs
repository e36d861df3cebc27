//! Swept-source OCT simulation and reconstruction.
//!
//! The crate covers the whole chain from a reflector phantom to a quality
//! report:
//!
//! * [`forward`] synthesizes wavelength-linear fringes, with speckle and
//!   detector noise.
//! * [`spectral`] turns fringes into B-scans, either directly in λ-space or
//!   after resampling onto a uniform wavenumber grid.
//! * [`tensor`] is a small reverse-mode autodiff engine.
//! * [`unet`] builds the residual attention U-Net that maps λ-space images,
//!   plus a wavenumber channel, to despeckled reconstructions.
//! * [`train`] generates paired datasets, trains, checkpoints and runs
//!   volume inference.
//! * [`metrics`] computes PSNR, SSIM and MSE reports.
//! * [`io`] holds the binary and image file formats.

pub mod error;
pub mod forward;
pub mod io;
pub mod metrics;
pub mod rng;
pub mod spectral;
pub mod tensor;
pub mod train;
pub mod unet;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/forward-model.md")]
    mod forward_model {}
    #[doc = include_str!("../../../book/src/reconstruction.md")]
    mod reconstruction {}
    #[doc = include_str!("../../../book/src/tensors.md")]
    mod tensors {}
    #[doc = include_str!("../../../book/src/network.md")]
    mod network {}
    #[doc = include_str!("../../../book/src/training.md")]
    mod training {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    mod metrics {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
