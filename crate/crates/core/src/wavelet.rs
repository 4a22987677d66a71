//! Compactly supported orthonormal wavelets (Daubechies family) on a
//! periodic grid.
//!
//! Coefficients use the un-normalized convention
//! `c(Q) = l(Q)^{-1} ⟨f, ψ_Q⟩` with `ψ_Q(x) = ψ(l(Q)^{-1}(x − x_Q))`. The
//! periodic pyramid works with the unit-norm functions
//! `ψ_{j,k} = 2^{j/2} ψ(2^j x − k)`; [`unit_to_cube`] and [`cube_to_unit`] are the
//! only places the two conventions meet.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::CoeffField;
use crate::lattice::{pow2, DyadicCube};
use crate::signal::SampledSignal;

/// Hölder exponents of the Daubechies scaling functions with 1..=10
/// vanishing moments.
const HOLDER: [f64; 10] = [
    0.0, 0.550, 1.088, 1.618, 1.969, 2.189, 2.460, 2.761, 3.074, 3.361,
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WaveletBasis {
    moments: usize,
    lowpass: Vec<f64>,
    highpass: Vec<f64>,
    /// `φ(m)` for `m = 0, …, 2N − 1`.
    phi_integers: Vec<f64>,
}

/// Unit-norm pyramid coefficient → `c(Q)`: multiply by `2^{j/2}`.
pub fn unit_to_cube(level: i32, d: f64) -> f64 {
    d * pow2(level).sqrt()
}

/// `c(Q)` → unit-norm pyramid coefficient.
pub fn cube_to_unit(level: i32, c: f64) -> f64 {
    c / pow2(level).sqrt()
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn horner(coeffs: &[f64], z: Complex64) -> (Complex64, Complex64) {
    let mut p = Complex64::new(0.0, 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    for &c in coeffs.iter().rev() {
        dp = dp * z + p;
        p = p * z + c;
    }
    (p, dp)
}

/// Roots of `Σ_k a_k y^k` (ascending coefficients) by companion-matrix
/// eigenvalues, polished with Newton steps.
fn poly_roots(a: &[f64]) -> Vec<Complex64> {
    let deg = a.len() - 1;
    if deg == 0 {
        return Vec::new();
    }
    let lead = a[deg];
    let mut m = DMatrix::<f64>::zeros(deg, deg);
    for i in 1..deg {
        m[(i, i - 1)] = 1.0;
    }
    for i in 0..deg {
        m[(i, deg - 1)] = -a[i] / lead;
    }
    m.complex_eigenvalues()
        .iter()
        .map(|&z0| {
            let mut z = z0;
            for _ in 0..20 {
                let (p, dp) = horner(a, z);
                if dp.norm() == 0.0 {
                    break;
                }
                let step = p / dp;
                z -= step;
                if step.norm() < 1e-17 * z.norm().max(1.0) {
                    break;
                }
            }
            z
        })
        .collect()
}

/// Daubechies low-pass filter with `n` vanishing moments, `Σ h = √2`.
fn daubechies_filter(n: usize) -> Vec<f64> {
    let p: Vec<f64> = (0..n).map(|k| binomial(n - 1 + k, k)).collect();
    // poly in z, ascending; start from (1 + z)^n
    let mut poly = vec![Complex64::new(1.0, 0.0)];
    let mul = |poly: &mut Vec<Complex64>, root: Complex64| {
        // poly *= (z − root)
        let mut next = vec![Complex64::new(0.0, 0.0); poly.len() + 1];
        for (i, c) in poly.iter().enumerate() {
            next[i + 1] += c;
            next[i] -= c * root;
        }
        *poly = next;
    };
    for _ in 0..n {
        mul(&mut poly, Complex64::new(-1.0, 0.0));
    }
    for y in poly_roots(&p) {
        // z² − (2 − 4y) z + 1 = 0; keep the root outside the unit circle
        let b = Complex64::new(1.0, 0.0) - 2.0 * y;
        let disc = (b * b - 1.0).sqrt();
        let (z1, z2) = (b + disc, b - disc);
        mul(&mut poly, if z1.norm() > z2.norm() { z1 } else { z2 });
    }
    let h: Vec<f64> = poly.iter().map(|c| c.re).collect();
    let s: f64 = h.iter().sum();
    h.iter().map(|v| v * std::f64::consts::SQRT_2 / s).collect()
}

impl WaveletBasis {
    /// The Daubechies family with `moments` vanishing moments (1 = Haar).
    pub fn new(moments: usize) -> Result<Self> {
        if !(1..=10).contains(&moments) {
            return Err(Error::Unsupported(format!(
                "{moments} vanishing moments (supported: 1..=10)"
            )));
        }
        let lowpass = daubechies_filter(moments);
        let len = lowpass.len();
        let highpass = (0..len)
            .map(|k| if k % 2 == 0 { 1.0 } else { -1.0 } * lowpass[len - 1 - k])
            .collect();
        let phi_integers = if moments == 1 {
            vec![1.0, 0.0]
        } else {
            integer_values(&lowpass)?
        };
        Ok(Self {
            moments,
            lowpass,
            highpass,
            phi_integers,
        })
    }

    pub fn moments(&self) -> usize {
        self.moments
    }

    pub fn lowpass(&self) -> &[f64] {
        &self.lowpass
    }

    pub fn highpass(&self) -> &[f64] {
        &self.highpass
    }

    /// Hölder exponent of `φ` and `ψ` from the standard regularity table.
    pub fn smoothness(&self) -> f64 {
        HOLDER[self.moments - 1]
    }

    /// Largest integer derivative order that exists classically.
    pub fn derivative_order(&self) -> usize {
        let s = self.smoothness();
        if s.fract() == 0.0 {
            (s as usize).saturating_sub(1)
        } else {
            s.floor() as usize
        }
    }

    /// Decay exponent of `|ψ(x)| ≲ (1 + |x|)^{-L}`; unbounded for compact support.
    pub fn decay(&self) -> f64 {
        f64::INFINITY
    }

    /// `φ` and `ψ` vanish outside `[0, support]`.
    pub fn support(&self) -> f64 {
        (self.lowpass.len() - 1) as f64
    }

    pub fn phi_integers(&self) -> &[f64] {
        &self.phi_integers
    }

    /// `φ(m 2^{-bits})` for `m = 0, …, (2N − 1) 2^{bits}`.
    pub fn phi_grid(&self, bits: u32) -> Vec<f64> {
        let mut v = self.phi_integers.clone();
        for r in 0..bits {
            v = self.refine(&v, r, &self.lowpass);
        }
        v
    }

    /// `ψ(m 2^{-bits})` for `m = 0, …, (2N − 1) 2^{bits}`, `bits ≥ 1`.
    pub fn psi_grid(&self, bits: u32) -> Vec<f64> {
        let bits = bits.max(1);
        let phi = self.phi_grid(bits - 1);
        self.refine(&phi, bits - 1, &self.highpass)
    }

    /// Values on the grid `2^{-(r+1)}` of `√2 Σ_k a_k φ(2x − k)` from `φ` on `2^{-r}`.
    fn refine(&self, phi: &[f64], r: u32, a: &[f64]) -> Vec<f64> {
        let step = 1usize << r;
        let count = (self.lowpass.len() - 1) * (step << 1) + 1;
        (0..count)
            .map(|m| {
                a.iter()
                    .enumerate()
                    .filter_map(|(k, &ak)| {
                        m.checked_sub(k * step)
                            .and_then(|i| phi.get(i))
                            .map(|v| ak * v)
                    })
                    .sum::<f64>()
                    * std::f64::consts::SQRT_2
            })
            .collect()
    }
}

/// `φ` at the integers: the eigenvector of `M_{mk} = √2 h_{2m−k}` for
/// eigenvalue 1, normalized by `Σ_m φ(m) = 1`.
fn integer_values(h: &[f64]) -> Result<Vec<f64>> {
    let len = h.len();
    let mut a = DMatrix::<f64>::zeros(len + 1, len);
    for m in 0..len {
        for k in 0..len {
            let idx = 2 * m as i64 - k as i64;
            if (0..len as i64).contains(&idx) {
                a[(m, k)] = std::f64::consts::SQRT_2 * h[idx as usize];
            }
        }
        a[(m, m)] -= 1.0;
        a[(len, m)] = 1.0;
    }
    let mut b = DVector::<f64>::zeros(len + 1);
    b[len] = 1.0;
    let v = a
        .svd(true, true)
        .solve(&b, 1e-14)
        .map_err(|_| Error::IllConditioned {
            cond: f64::INFINITY,
        })?;
    Ok(v.iter().copied().collect())
}

/// `(J, K_J)`: the grid level `2^{-J} = h` and the checks shared by both
/// directions of the transform.
fn grid_level(len: usize, period: f64, levels: (i32, i32)) -> Result<i32> {
    let grid = (len as f64 / period).log2().round() as i32;
    if levels.0 > levels.1 {
        return Err(Error::param("empty level window"));
    }
    if levels.1 > grid - 1 {
        return Err(Error::Resolution(format!(
            "level {} needs a grid finer than 2^-{grid}",
            levels.1
        )));
    }
    if pow2(levels.0) * period < 1.0 {
        return Err(Error::param(format!(
            "level {} is coarser than the period",
            levels.0
        )));
    }
    Ok(grid)
}

/// One analysis step of the periodic pyramid.
fn split(a: &[f64], h: &[f64], g: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let k = a.len();
    let half = k / 2;
    let mut lo = vec![0.0; half];
    let mut hi = vec![0.0; half];
    for m in 0..half {
        for (i, (&hi_i, &gi)) in h.iter().zip(g).enumerate() {
            let v = a[(2 * m + i) % k];
            lo[m] += hi_i * v;
            hi[m] += gi * v;
        }
    }
    (lo, hi)
}

/// Inverse of [`split`].
fn merge(lo: &[f64], hi: &[f64], h: &[f64], g: &[f64]) -> Vec<f64> {
    let k = 2 * lo.len();
    let mut a = vec![0.0; k];
    for m in 0..lo.len() {
        for (i, (&hi_i, &gi)) in h.iter().zip(g).enumerate() {
            a[(2 * m + i) % k] += hi_i * lo[m] + gi * hi[m];
        }
    }
    a
}

impl WaveletBasis {
    /// Circular symbol of the integer samples of `φ` on `len` points.
    fn integer_symbol(&self, len: usize) -> Vec<Complex64> {
        let mut buf = vec![Complex64::new(0.0, 0.0); len];
        for (m, &v) in self.phi_integers.iter().enumerate() {
            buf[m % len] += v;
        }
        FftPlanner::new().plan_fft_forward(len).process(&mut buf);
        buf
    }

    /// Finest-level scaling coefficients `a_{J,k}` whose expansion
    /// `Σ_k a_{J,k} φ_{J,k}` interpolates the samples.
    fn prefilter(&self, f: &SampledSignal, grid: i32) -> Result<Vec<f64>> {
        let len = f.len();
        let sym = self.integer_symbol(len);
        let smallest = sym.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min);
        if smallest < 1e-8 {
            return Err(Error::IllConditioned {
                cond: 1.0 / smallest,
            });
        }
        let mut buf: Vec<Complex64> = f
            .samples()
            .iter()
            .map(|&v| Complex64::new(v, 0.0))
            .collect();
        let mut planner = FftPlanner::new();
        planner.plan_fft_forward(len).process(&mut buf);
        let scale = 1.0 / (pow2(grid).sqrt() * len as f64);
        for (z, s) in buf.iter_mut().zip(&sym) {
            *z = *z / s * scale;
        }
        planner.plan_fft_inverse(len).process(&mut buf);
        Ok(buf.into_iter().map(|z| z.re).collect())
    }

    /// Samples of `Σ_k a_{J,k} φ_{J,k}` at the grid points.
    fn evaluate_finest(&self, a: &[f64], grid: i32) -> Vec<f64> {
        let len = a.len();
        let amp = pow2(grid).sqrt();
        (0..len)
            .map(|m| {
                self.phi_integers
                    .iter()
                    .enumerate()
                    .map(|(i, &v)| v * a[(m + len - i % len) % len])
                    .sum::<f64>()
                    * amp
            })
            .collect()
    }
}

/// `c(Q) = l(Q)^{-1} ⟨f, ψ_Q⟩` for every `Q ⊆ [0, T)` with level in `levels`.
///
/// The samples are read as the unique expansion `Σ_k a_k φ_{J,k}`
/// (`2^{-J}` = grid step) interpolating them; the pyramid then runs
/// periodically down to `levels.0`.
pub fn dwt_analyze(
    f: &SampledSignal,
    basis: &WaveletBasis,
    levels: (i32, i32),
) -> Result<CoeffField> {
    let grid = grid_level(f.len(), f.period(), levels)?;
    let mut a = basis.prefilter(f, grid)?;
    let mut field = CoeffField::new(levels, f.domain())?;
    for j in (levels.0..grid).rev() {
        let (lo, hi) = split(&a, &basis.lowpass, &basis.highpass);
        if j <= levels.1 {
            for (k, d) in hi.iter().enumerate() {
                field.insert(DyadicCube::new_1d(j, k as i64), unit_to_cube(j, *d))?;
            }
        }
        a = lo;
    }
    Ok(field)
}

/// `Σ_Q c(Q) ψ_Q` on a grid of `len` points over the field's window `[0, T)`.
pub fn dwt_synthesize(c: &CoeffField, basis: &WaveletBasis, len: usize) -> Result<SampledSignal> {
    if c.dim() != 1 {
        return Err(Error::Unsupported(format!(
            "wavelet synthesis in dimension {}",
            c.dim()
        )));
    }
    let window = c.spatial_window();
    if window.lower[0] != 0.0 {
        return Err(Error::param(
            "synthesis needs a spatial window starting at 0",
        ));
    }
    let t = window.upper[0];
    let out = SampledSignal::zeros(len, t)?;
    let levels = c.level_window();
    let grid = grid_level(len, t, levels)?;
    let mut a = vec![0.0; (pow2(levels.0) * t).round() as usize];
    for j in levels.0..grid {
        let mut d = vec![0.0; a.len()];
        if j <= levels.1 {
            let count = d.len() as i64;
            for (q, v) in c.level_entries(j) {
                d[q.index[0].rem_euclid(count) as usize] += cube_to_unit(j, v);
            }
        }
        a = merge(&a, &d, &basis.lowpass, &basis.highpass);
    }
    out.with_samples(basis.evaluate_finest(&a, grid))
}

/// Quadrature reference for [`dwt_analyze`].
#[derive(Clone, Debug, PartialEq)]
pub struct OracleCoeffs {
    pub field: CoeffField,
    /// Resolution `2^{-bits}` (in units of `l(Q)`) at which the sums settled.
    pub bits: u32,
}

/// `c(Q) = ∫ f((t + k) 2^{-j}) ψ(t) dt` for the `T`-periodic extension of
/// `f`, by Riemann sums against exact dyadic values of `ψ`.
///
/// The resolution doubles until every level changes by at most `rel_tol`
/// times its largest coefficient.
pub fn oracle_coeffs(
    f: &(dyn Fn(f64) -> f64 + Sync),
    period: f64,
    basis: &WaveletBasis,
    levels: (i32, i32),
    rel_tol: f64,
) -> Result<OracleCoeffs> {
    use rayon::prelude::*;
    if levels.0 > levels.1 || pow2(levels.0) * period < 1.0 {
        return Err(Error::param(
            "oracle levels must be nonempty and no coarser than the period",
        ));
    }
    let compute = |bits: u32| -> Vec<Vec<f64>> {
        let psi = basis.psi_grid(bits);
        let w = pow2(-(bits as i32));
        (levels.0..=levels.1)
            .map(|j| {
                let count = (pow2(j) * period).round() as usize;
                let m_total = count << bits;
                let h = period / m_total as f64;
                let values: Vec<f64> = (0..m_total)
                    .into_par_iter()
                    .map(|m| f(m as f64 * h))
                    .collect();
                (0..count)
                    .into_par_iter()
                    .map(|k| {
                        psi.iter()
                            .enumerate()
                            .map(|(m, p)| p * values[(m + (k << bits)) % m_total])
                            .sum::<f64>()
                            * w
                    })
                    .collect()
            })
            .collect()
    };
    let mut bits = 6;
    let mut prev = compute(bits);
    loop {
        bits += 1;
        let next = compute(bits);
        let settled = prev.iter().zip(&next).all(|(a, b)| {
            let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            a.iter()
                .zip(b)
                .all(|(x, y)| (x - y).abs() <= rel_tol * scale)
        });
        if settled {
            let mut field =
                CoeffField::new(levels, crate::lattice::Region::interval(0.0, period)?)?;
            for (j, row) in (levels.0..).zip(&next) {
                for (k, v) in row.iter().enumerate() {
                    field.insert(DyadicCube::new_1d(j, k as i64), *v)?;
                }
            }
            return Ok(OracleCoeffs { field, bits });
        }
        if bits >= 18 {
            return Err(Error::Quadrature(format!(
                "oracle sums did not settle to {rel_tol:e} by 2^-{bits}"
            )));
        }
        prev = next;
    }
}
