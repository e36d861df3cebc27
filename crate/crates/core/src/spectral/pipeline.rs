use ndarray::{s, Array2, Zip};
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::resample::{resample_to_linear_k, Interpolation};
use super::transform::idft_columns;
use super::window::hann_weights;
use crate::error::{ensure, Result};
use crate::forward::{FringeFrame, WavenumberGrid};

/// Floor added to magnitudes before taking logarithms.
pub const DEFAULT_DB_FLOOR: f64 = 1e-12;

/// Complex depth profile, one column per A-line.
pub type ComplexProfile = Array2<Complex64>;

/// Where a B-scan came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BScanKind {
    LambdaSpace,
    KResampled,
    GroundTruth,
    NetworkOutput,
}

/// Log-intensity image in dB, rows are depth bins.
#[derive(Debug, Clone, PartialEq)]
pub struct BScan {
    pub intensity: Array2<f64>,
    pub kind: BScanKind,
}

impl BScan {
    pub fn depth_bins(&self) -> usize {
        self.intensity.nrows()
    }

    pub fn n_alines(&self) -> usize {
        self.intensity.ncols()
    }
}

pub fn subtract_background(frame: &FringeFrame, background: &[f64]) -> Result<FringeFrame> {
    ensure!(
        background.len() == frame.n_rows(),
        Dimension,
        "background has {} samples but frame has {} rows",
        background.len(),
        frame.n_rows()
    );
    let mut samples = frame.samples.clone();
    for mut col in samples.columns_mut() {
        col.iter_mut().zip(background).for_each(|(v, b)| *v -= b);
    }
    Ok(FringeFrame {
        samples,
        grid: frame.grid,
    })
}

/// Multiplies every column by the symmetric Hann window.
pub fn apply_hann(frame: &FringeFrame) -> Result<FringeFrame> {
    let w = hann_weights(frame.n_rows())?;
    let mut samples = frame.samples.clone();
    for mut col in samples.columns_mut() {
        col.iter_mut().zip(&w).for_each(|(v, w)| *v *= w);
    }
    Ok(FringeFrame {
        samples,
        grid: frame.grid,
    })
}

/// `20·log10(|z| + floor_eps)` elementwise.
pub fn magnitude_db(profile: &ComplexProfile, floor_eps: f64) -> Result<Array2<f64>> {
    ensure!(floor_eps > 0.0, Domain, "dB floor must be positive, got {floor_eps}");
    Ok(profile.mapv(|z| 20.0 * (z.norm() + floor_eps).log10()))
}

/// Keeps rows `0..N/2`, discarding the conjugate-symmetric half.
pub fn truncate_conjugate<T: Clone>(matrix: &Array2<T>) -> Result<Array2<T>> {
    let n = matrix.nrows();
    ensure!(n % 2 == 0, Dimension, "conjugate truncation needs an even row count, got {n}");
    Ok(matrix.slice(s![..n / 2, ..]).to_owned())
}

fn to_bscan(frame: &FringeFrame, kind: BScanKind) -> Result<BScan> {
    let windowed = apply_hann(frame)?;
    let profile = idft_columns(&windowed.samples)?;
    let db = magnitude_db(&profile, DEFAULT_DB_FLOOR)?;
    Ok(BScan {
        intensity: truncate_conjugate(&db)?,
        kind,
    })
}

/// λ-space image: the fringe is transformed on its native, non-uniform grid.
pub fn lambda_space_image(raw: &FringeFrame, background: &[f64]) -> Result<BScan> {
    let clean = subtract_background(raw, background)?;
    to_bscan(&clean, BScanKind::LambdaSpace)
}

/// Standard processing: k-linearization before windowing and transforming.
pub fn classic_reconstruct(
    raw: &FringeFrame,
    background: &[f64],
    source_k: &WavenumberGrid,
    method: Interpolation,
) -> Result<BScan> {
    let clean = subtract_background(raw, background)?;
    let linear = resample_to_linear_k(&clean, source_k, method)?;
    to_bscan(&linear, BScanKind::KResampled)
}

/// Elementwise mean of the first `n` B-scans.
pub fn average_bscans(stack: &[BScan], n: usize) -> Result<BScan> {
    ensure!(n >= 1, Usage, "cannot average zero frames");
    ensure!(
        stack.len() >= n,
        Usage,
        "asked to average {n} frames but only {} were given",
        stack.len()
    );
    let shape = stack[0].intensity.dim();
    let mut sum = Array2::<f64>::zeros(shape);
    for (i, b) in stack[..n].iter().enumerate() {
        ensure!(
            b.intensity.dim() == shape,
            Dimension,
            "frame {i} has shape {:?}, expected {:?}",
            b.intensity.dim(),
            shape
        );
        Zip::from(&mut sum).and(&b.intensity).for_each(|s, v| *s += v);
    }
    sum.mapv_inplace(|v| v / n as f64);
    Ok(BScan {
        intensity: sum,
        kind: BScanKind::GroundTruth,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::{
        source_spectrum, sweep_wavelength_grid, synthesize_fringe, to_wavenumbers, GridTag,
        Phantom, SweepConfig,
    };

    fn frame(cols: Vec<Vec<f64>>) -> FringeFrame {
        let n = cols[0].len();
        let m = Array2::from_shape_fn((n, cols.len()), |(r, c)| cols[c][r]);
        FringeFrame::new(m, GridTag::LambdaLinear).unwrap()
    }

    #[test]
    fn background_subtraction() {
        let bg = vec![1.0, 2.0, 3.0];
        let f = frame(vec![bg.clone(), bg.clone()]);
        let out = subtract_background(&f, &bg).unwrap();
        assert!(out.samples.iter().all(|&v| v == 0.0));
        let out = subtract_background(&f, &[0.0; 3]).unwrap();
        assert_eq!(out, f);
        assert!(subtract_background(&f, &[0.0; 2]).is_err());
    }

    #[test]
    fn subtraction_leaves_pure_cross_term() {
        let cfg = SweepConfig { n_samples: 64, ..SweepConfig::default() };
        let k = to_wavenumbers(&sweep_wavelength_grid(&cfg).unwrap()).unwrap();
        let s = source_spectrum(&k, &cfg);
        let p = Phantom::single(3e-4, 0.25);
        let f = synthesize_fringe(&p, &k, &s, false).unwrap();
        let bg = synthesize_fringe(&Phantom::default(), &k, &s, false).unwrap();
        let out = subtract_background(&frame(vec![f]), &bg).unwrap();
        for j in 0..64 {
            let expected = s[j] * 2.0 * 1.0 * 0.5 * (2.0 * k.values()[j] * 3e-4).cos() / 4.0;
            assert!((out.samples[[j, 0]] - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn db_conversion() {
        let p = Array2::from_shape_vec(
            (3, 1),
            vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 10.0), Complex64::new(0.0, 0.0)],
        )
        .unwrap();
        let db = magnitude_db(&p, DEFAULT_DB_FLOOR).unwrap();
        assert!(db[[0, 0]].abs() < 1e-10);
        assert!((db[[1, 0]] - 20.0).abs() < 1e-10);
        assert!((db[[2, 0]] + 240.0).abs() < 1e-10);
        assert!(magnitude_db(&p, 0.0).is_err());
    }

    #[test]
    fn truncation() {
        let m = Array2::from_shape_vec((4, 1), vec![1, 2, 3, 4]).unwrap();
        assert_eq!(truncate_conjugate(&m).unwrap().into_raw_vec_and_offset().0, vec![1, 2]);
        assert_eq!(truncate_conjugate(&Array2::<f64>::zeros((2304, 3))).unwrap().nrows(), 1152);
        assert!(truncate_conjugate(&Array2::<f64>::zeros((5, 1))).is_err());
    }

    #[test]
    fn background_only_is_floor() {
        let bg: Vec<f64> = (0..32).map(|j| 1.0 + j as f64 * 0.01).collect();
        let img = lambda_space_image(&frame(vec![bg.clone()]), &bg).unwrap();
        assert_eq!(img.kind, BScanKind::LambdaSpace);
        assert_eq!(img.depth_bins(), 16);
        for v in img.intensity.iter() {
            assert!((v + 240.0).abs() < 1e-9);
        }
    }

    #[test]
    fn averaging() {
        let a = BScan { intensity: Array2::from_elem((2, 2), 3.0), kind: BScanKind::KResampled };
        let out = average_bscans(&vec![a.clone(); 7], 7).unwrap();
        assert_eq!(out.intensity, a.intensity);
        assert_eq!(out.kind, BScanKind::GroundTruth);
        let neg = BScan { intensity: -a.intensity.clone(), kind: BScanKind::KResampled };
        let out = average_bscans(&[a.clone(), neg], 2).unwrap();
        assert!(out.intensity.iter().all(|&v| v == 0.0));
        let other = BScan { intensity: Array2::zeros((3, 2)), kind: BScanKind::KResampled };
        assert!(average_bscans(&[a.clone(), other], 2).is_err());
        assert!(average_bscans(&[a], 2).is_err());
    }
}
