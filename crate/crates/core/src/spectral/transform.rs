use ndarray::Array2;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{ensure, Result};

/// Inverse DFT with 1/N normalization,
/// `out[p] = (1/N)·Σ_j in[j]·exp(+i·2πjp/N)`, by direct O(N²) summation.
///
/// This is the reference the fast path is checked against.
pub fn idft_direct(input: &[Complex64]) -> Vec<Complex64> {
    let n = input.len();
    let scale = 1.0 / n as f64;
    (0..n)
        .map(|p| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (j, &x) in input.iter().enumerate() {
                // Reduce jp mod N first so the phase stays small and accurate.
                let phase = 2.0 * std::f64::consts::PI * ((j * p) % n) as f64 / n as f64;
                acc += x * Complex64::from_polar(1.0, phase);
            }
            acc * scale
        })
        .collect()
}

/// Fast inverse DFT of one sequence, same convention as [`idft_direct`].
pub fn idft_fast(input: &[Complex64]) -> Vec<Complex64> {
    let n = input.len();
    let mut buf = input.to_vec();
    if n == 0 {
        return buf;
    }
    FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
    let scale = 1.0 / n as f64;
    buf.iter_mut().for_each(|v| *v *= scale);
    buf
}

/// Column-wise inverse DFT of a real matrix (one transform per A-line).
pub fn idft_columns(samples: &Array2<f64>) -> Result<Array2<Complex64>> {
    let (n, cols) = samples.dim();
    ensure!(n >= 2, Dimension, "inverse transform needs at least 2 rows, got {n}");
    let fft = FftPlanner::new().plan_fft_inverse(n);
    let scale = 1.0 / n as f64;
    let mut out = Array2::<Complex64>::zeros((n, cols));
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    for c in 0..cols {
        for (b, &v) in buf.iter_mut().zip(samples.column(c)) {
            *b = Complex64::new(v, 0.0);
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        for (o, b) in out.column_mut(c).iter_mut().zip(&buf) {
            *o = b * scale;
        }
    }
    Ok(out)
}
