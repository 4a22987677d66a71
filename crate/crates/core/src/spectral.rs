//! Thin FFT helpers for real periodic signals.

use num_complex::Complex64;
use rustfft::FftPlanner;

/// Fourier coefficients `F_m = N^{-1} Σ_k f_k e^{-2πimk/N}`.
pub(crate) fn spectrum(samples: &[f64]) -> Vec<Complex64> {
    let n = samples.len();
    let mut buf: Vec<Complex64> = samples.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let inv = 1.0 / n as f64;
    buf.iter_mut().for_each(|z| *z *= inv);
    buf
}

/// Real part of `Σ_m F_m e^{2πimk/N}`.
pub(crate) fn synthesize_real(mut coeffs: Vec<Complex64>) -> Vec<f64> {
    let n = coeffs.len();
    FftPlanner::new().plan_fft_inverse(n).process(&mut coeffs);
    coeffs.into_iter().map(|z| z.re).collect()
}

/// Signed bin index in `(−N/2, N/2]`.
#[inline]
pub(crate) fn signed_bin(m: usize, n: usize) -> i64 {
    if m > n / 2 {
        m as i64 - n as i64
    } else {
        m as i64
    }
}

/// Angular frequency `2π m / T` of bin `m`.
#[inline]
pub(crate) fn angular(m: usize, n: usize, period: f64) -> f64 {
    2.0 * std::f64::consts::PI * signed_bin(m, n) as f64 / period
}
