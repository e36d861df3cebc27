use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::forward::{uniform_k_grid, FringeFrame, GridTag, WavenumberGrid};

/// Interpolation used for k-linearization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    Linear,
    #[default]
    CubicSpline,
}

/// Piecewise-linear interpolation of `(xs, ys)` at ascending `targets`.
/// `xs` must be strictly increasing; targets outside the range are clamped.
pub fn interpolate_linear(xs: &[f64], ys: &[f64], targets: &[f64]) -> Vec<f64> {
    let last = xs.len() - 1;
    let mut i = 0;
    targets
        .iter()
        .map(|&x| {
            if x <= xs[0] {
                return ys[0];
            }
            if x >= xs[last] {
                return ys[last];
            }
            while xs[i + 1] < x {
                i += 1;
            }
            let t = (x - xs[i]) / (xs[i + 1] - xs[i]);
            ys[i] + t * (ys[i + 1] - ys[i])
        })
        .collect()
}

/// Natural cubic spline (zero second derivative at both ends) through
/// `(xs, ys)`, evaluated at ascending `targets`. Targets outside the range
/// are clamped to the end knots.
pub fn interpolate_cubic_spline(xs: &[f64], ys: &[f64], targets: &[f64]) -> Vec<f64> {
    let n = xs.len();
    if n < 3 {
        return interpolate_linear(xs, ys, targets);
    }
    let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();

    // Tridiagonal system for the interior second derivatives, Thomas algorithm.
    let m = n - 2;
    let mut diag = vec![0.0; m];
    let mut rhs = vec![0.0; m];
    let mut upper = vec![0.0; m];
    for r in 0..m {
        let i = r + 1;
        diag[r] = 2.0 * (h[i - 1] + h[i]);
        upper[r] = h[i];
        rhs[r] = 6.0 * ((ys[i + 1] - ys[i]) / h[i] - (ys[i] - ys[i - 1]) / h[i - 1]);
    }
    for r in 1..m {
        let w = h[r] / diag[r - 1];
        diag[r] -= w * upper[r - 1];
        rhs[r] -= w * rhs[r - 1];
    }
    let mut second = vec![0.0; n];
    second[m] = rhs[m - 1] / diag[m - 1];
    for r in (0..m - 1).rev() {
        second[r + 1] = (rhs[r] - upper[r] * second[r + 2]) / diag[r];
    }

    let last = n - 1;
    let mut i = 0;
    targets
        .iter()
        .map(|&x| {
            if x <= xs[0] {
                return ys[0];
            }
            if x >= xs[last] {
                return ys[last];
            }
            while xs[i + 1] < x {
                i += 1;
            }
            let hi = h[i];
            let a = (xs[i + 1] - x) / hi;
            let b = (x - xs[i]) / hi;
            a * ys[i]
                + b * ys[i + 1]
                + ((a * a * a - a) * second[i] + (b * b * b - b) * second[i + 1]) * hi * hi / 6.0
        })
        .collect()
}

/// Resamples every column from `source_k` onto the uniform grid
/// `uniform_k_grid(min(source_k), max(source_k), N)`, which is ascending.
pub fn resample_to_linear_k(
    frame: &FringeFrame,
    source_k: &WavenumberGrid,
    method: Interpolation,
) -> Result<FringeFrame> {
    let n = source_k.len();
    ensure!(
        frame.n_rows() == n,
        Dimension,
        "frame has {} rows but the wavenumber grid has {n} points",
        frame.n_rows()
    );
    let target = uniform_k_grid(source_k.min(), source_k.max(), n)?;
    let ascending = source_k.is_ascending();
    let xs: Vec<f64> = if ascending {
        source_k.values().to_vec()
    } else {
        source_k.values().iter().rev().copied().collect()
    };
    let mut out = Array2::<f64>::zeros((n, frame.n_cols()));
    for c in 0..frame.n_cols() {
        let col = frame.samples.column(c);
        let ys: Vec<f64> = if ascending {
            col.to_vec()
        } else {
            col.iter().rev().copied().collect()
        };
        let values = match method {
            Interpolation::Linear => interpolate_linear(&xs, &ys, target.values()),
            Interpolation::CubicSpline => interpolate_cubic_spline(&xs, &ys, target.values()),
        };
        out.column_mut(c).iter_mut().zip(values).for_each(|(o, v)| *o = v);
    }
    FringeFrame::new(out, GridTag::KLinear)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::{sweep_wavelength_grid, to_wavenumbers, SweepConfig};

    #[test]
    fn spline_reproduces_cubic_free_data() {
        // Natural splines reproduce straight lines exactly.
        let xs = [0.0, 0.5, 1.7, 2.0, 3.5];
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x - 1.0).collect();
        let t = [0.1, 0.9, 1.8, 3.0];
        for (x, v) in t.iter().zip(interpolate_cubic_spline(&xs, &ys, &t)) {
            assert!((v - (3.0 * x - 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn spline_hits_knots_and_is_smooth() {
        let xs: Vec<f64> = (0..20).map(|i| i as f64 * 0.3).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x.sin()).collect();
        let v = interpolate_cubic_spline(&xs, &ys, &xs);
        for (a, b) in v.iter().zip(&ys) {
            assert!((a - b).abs() < 1e-12);
        }
        let mid: Vec<f64> = xs.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        let v = interpolate_cubic_spline(&xs, &ys, &mid[2..16]);
        for (a, x) in v.iter().zip(&mid[2..16]) {
            assert!((a - x.sin()).abs() < 1e-3);
        }
    }

    #[test]
    fn identity_on_uniform_input() {
        let k = uniform_k_grid(4.6e6, 5.0e6, 64).unwrap();
        let samples = Array2::from_shape_fn((64, 3), |(j, c)| ((j * 3 + c) as f64 * 0.37).sin());
        let frame = FringeFrame::new(samples.clone(), GridTag::KLinear).unwrap();
        for method in [Interpolation::Linear, Interpolation::CubicSpline] {
            let out = resample_to_linear_k(&frame, &k, method).unwrap();
            for (a, b) in out.samples.iter().zip(samples.iter()) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn linear_function_of_k_is_recovered() {
        let cfg = SweepConfig { n_samples: 128, ..SweepConfig::default() };
        let k = to_wavenumbers(&sweep_wavelength_grid(&cfg).unwrap()).unwrap();
        let (k0, k1) = (k.min(), k.max());
        let f = |kv: f64| 2.0 * (kv - k0) / (k1 - k0) - 0.5;
        let samples = Array2::from_shape_fn((128, 1), |(j, _)| f(k.values()[j]));
        let frame = FringeFrame::new(samples, GridTag::LambdaLinear).unwrap();
        let out = resample_to_linear_k(&frame, &k, Interpolation::Linear).unwrap();
        let target = uniform_k_grid(k0, k1, 128).unwrap();
        for (v, kv) in out.samples.column(0).iter().zip(target.values()) {
            assert!((v - f(*kv)).abs() < 1e-12);
        }
        assert_eq!(out.grid, GridTag::KLinear);
    }

    #[test]
    fn rejects_mismatch() {
        let k = uniform_k_grid(1.0, 2.0, 8).unwrap();
        let frame = FringeFrame::new(Array2::zeros((7, 1)), GridTag::LambdaLinear).unwrap();
        assert!(resample_to_linear_k(&frame, &k, Interpolation::Linear).is_err());
        assert!(WavenumberGrid::new(vec![1.0, 3.0, 2.0]).is_err());
    }
}
