use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};

/// A point reflector. `reflectivity` is the intensity reflectivity `s`; the
/// fringe amplitude scales with its square root.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Reflector {
    /// Depth relative to the reference mirror, in meters.
    pub depth: f64,
    pub reflectivity: f64,
    /// Phase offset in radians.
    #[serde(default)]
    pub phase: f64,
}

/// A scattering layer between `top` and `bottom`, realized as a dense cloud
/// of sub-resolution point scatterers (`density` per meter of thickness,
/// each with intensity reflectivity `reflectivity`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Layer {
    pub top: f64,
    pub bottom: f64,
    pub reflectivity: f64,
    pub density: f64,
}

impl Layer {
    pub fn scatterer_count(&self) -> usize {
        (self.density * (self.bottom - self.top)).round().max(0.0) as usize
    }
}

/// The scene seen by one A-line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Phantom {
    #[serde(default)]
    pub reflectors: Vec<Reflector>,
    #[serde(default)]
    pub layers: Vec<Layer>,
    /// Reference-arm reflectivity R.
    #[serde(default = "default_reference_reflectivity")]
    pub reference_reflectivity: f64,
    /// Reference mirror position d_R.
    #[serde(default)]
    pub reference_depth: f64,
}

fn default_reference_reflectivity() -> f64 {
    1.0
}

impl Default for Phantom {
    fn default() -> Self {
        Self {
            reflectors: Vec::new(),
            layers: Vec::new(),
            reference_reflectivity: 1.0,
            reference_depth: 0.0,
        }
    }
}

impl Phantom {
    pub fn single(depth: f64, reflectivity: f64) -> Self {
        Self {
            reflectors: vec![Reflector {
                depth,
                reflectivity,
                phase: 0.0,
            }],
            ..Self::default()
        }
    }

    /// Checks depths against `[0, max_depth)` and reflectivities against `[0, 1]`.
    pub fn validate(&self, max_depth: f64) -> Result<()> {
        ensure!(
            (0.0..=1.0).contains(&self.reference_reflectivity),
            Config,
            "reference reflectivity {} outside [0, 1]",
            self.reference_reflectivity
        );
        for (i, r) in self.reflectors.iter().enumerate() {
            ensure!(
                r.depth >= 0.0 && r.depth < max_depth,
                Config,
                "reflector {i}: depth {} outside [0, {max_depth})",
                r.depth
            );
            ensure!(
                (0.0..=1.0).contains(&r.reflectivity),
                Config,
                "reflector {i}: reflectivity {} outside [0, 1]",
                r.reflectivity
            );
            ensure!(r.phase.is_finite(), Config, "reflector {i}: non-finite phase");
        }
        for (i, l) in self.layers.iter().enumerate() {
            ensure!(
                l.top >= 0.0 && l.top < l.bottom && l.bottom <= max_depth,
                Config,
                "layer {i}: [{}, {}] is not a valid depth interval within [0, {max_depth}]",
                l.top,
                l.bottom
            );
            ensure!(
                (0.0..=1.0).contains(&l.reflectivity),
                Config,
                "layer {i}: reflectivity {} outside [0, 1]",
                l.reflectivity
            );
            ensure!(l.density >= 0.0, Config, "layer {i}: negative density");
        }
        Ok(())
    }

    /// Expands every layer into point scatterers. Scatterer depths come from
    /// `positions`; phases come from `phases` when given (one speckle
    /// realization) and are otherwise drawn from `positions` too, so that a
    /// phantom realized twice without a phase stream is identical.
    pub fn realize<P: Rng, Q: Rng>(&self, positions: &mut P, phases: Option<&mut Q>) -> Phantom {
        let mut reflectors = self.reflectors.clone();
        let mut scatterers = Vec::new();
        for layer in &self.layers {
            for _ in 0..layer.scatterer_count() {
                let depth = positions.random_range(layer.top..layer.bottom);
                let fixed_phase = positions.random_range(0.0..2.0 * PI);
                scatterers.push((depth, layer.reflectivity, fixed_phase));
            }
        }
        match phases {
            Some(rng) => reflectors.extend(scatterers.into_iter().map(|(depth, s, _)| Reflector {
                depth,
                reflectivity: s,
                phase: rng.random_range(0.0..2.0 * PI),
            })),
            None => reflectors.extend(scatterers.into_iter().map(|(depth, s, phase)| Reflector {
                depth,
                reflectivity: s,
                phase,
            })),
        }
        Phantom {
            reflectors,
            layers: Vec::new(),
            reference_reflectivity: self.reference_reflectivity,
            reference_depth: self.reference_depth,
        }
    }
}
