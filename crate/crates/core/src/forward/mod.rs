//! Synthesis of wavelength-linear swept-source fringes from reflector phantoms.
//!
//! The laser sweeps linearly in wavelength, so the wavenumbers `k = 2π/λ`
//! visited by the detector are non-uniformly spaced. Every fringe produced
//! here is sampled on that non-uniform grid unless a caller explicitly asks
//! for a uniform-k grid.

mod fringe;
mod phantom;
mod sweep;

pub use fringe::{
    background_column, source_spectrum, synthesize_fringe, synthesize_volume, synthesize_volume_on,
    FringeFrame, GridTag, NoiseConfig,
};
pub use phantom::{Layer, Phantom, Reflector};
pub use sweep::{
    sweep_wavelength_grid, time_from_wavenumber, time_from_wavenumber_series, to_wavenumbers,
    uniform_k_grid, SweepConfig, WavelengthGrid, WavenumberGrid,
};
