//! Test signals with known pointwise behavior at `x₀` and slope-based
//! scans of the wavelet-side norms over the `(s', σ)` plane.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{CoeffField, NormConfig};
use crate::lattice::DyadicCube;
use crate::params::{compute_j, Family, SpaceParams};
use crate::signal::SampledSignal;
use crate::wavelet::{self, WaveletBasis};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SignalKind {
    /// `|x − x₀|^α`
    Cusp { alpha: f64 },
    /// `|x − x₀|^α sin(|x − x₀|^{-β})`
    Chirp { alpha: f64, beta: f64 },
    /// `sgn(x − x₀) / 2`
    Step,
    /// The cutoff itself.
    SmoothBump,
}

/// A signal centered at `x0`, multiplied by a `C^∞` cutoff equal to 1 on
/// `|x − x₀| ≤ radius` and vanishing beyond `2 radius`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestSignalSpec {
    pub kind: SignalKind,
    pub x0: f64,
    pub radius: f64,
}

fn smooth_step(u: f64) -> f64 {
    // 0 for u ≤ 0, 1 for u ≥ 1
    let g = |t: f64| if t > 0.0 { (-1.0 / t).exp() } else { 0.0 };
    let (a, b) = (g(u), g(1.0 - u));
    a / (a + b)
}

impl TestSignalSpec {
    pub fn new(kind: SignalKind, x0: f64, radius: f64) -> Result<Self> {
        match kind {
            SignalKind::Cusp { alpha } if !(alpha > 0.0) => {
                return Err(Error::param(format!(
                    "cusp exponent α = {alpha} must be positive"
                )))
            }
            SignalKind::Chirp { alpha, beta } if !(alpha > 0.0 && beta > 0.0) => {
                return Err(Error::param(format!(
                    "chirp exponents ({alpha}, {beta}) must be positive"
                )))
            }
            _ => {}
        }
        if !(radius > 0.0) {
            return Err(Error::param("cutoff radius must be positive"));
        }
        Ok(Self { kind, x0, radius })
    }

    pub fn cutoff(&self, x: f64) -> f64 {
        let r = (x - self.x0).abs() / self.radius;
        1.0 - smooth_step(r - 1.0)
    }

    /// Value before the mean is removed.
    pub fn value(&self, x: f64) -> f64 {
        let d = x - self.x0;
        let r = d.abs();
        if r >= 2.0 * self.radius {
            return 0.0;
        }
        let core = match self.kind {
            SignalKind::Cusp { alpha } => r.powf(alpha),
            SignalKind::Chirp { alpha, beta } => {
                if r == 0.0 {
                    0.0
                } else {
                    r.powf(alpha) * r.powf(-beta).sin()
                }
            }
            SignalKind::Step => 0.5 * d.signum(),
            SignalKind::SmoothBump => 1.0,
        };
        core * self.cutoff(x)
    }

    /// Support `[x₀ − 2R, x₀ + 2R]` must sit inside `(0, T)` with `margin`
    /// to spare on both sides.
    pub fn check_margin(&self, period: f64, margin: f64) -> Result<()> {
        let (lo, hi) = (self.x0 - 2.0 * self.radius, self.x0 + 2.0 * self.radius);
        if lo < margin || hi > period - margin {
            return Err(Error::param(format!(
                "cutoff support [{lo}, {hi}] leaves the torus interior (0 + {margin}, {period} − {margin})"
            )));
        }
        Ok(())
    }

    pub fn sample_raw(&self, len: usize, period: f64) -> Result<SampledSignal> {
        self.check_margin(period, 0.0)?;
        SampledSignal::from_fn(len, period, |x| self.value(x))
    }
}

/// Samples the signal on `len` points of `[0, T)` and removes the mean.
pub fn synth_signal(spec: &TestSignalSpec, len: usize, period: f64) -> Result<SampledSignal> {
    Ok(spec.sample_raw(len, period)?.mean_zero())
}

/// Quadrature coefficients of the signal, independent of the pyramid.
/// The mean is irrelevant since `ψ` integrates to zero.
pub fn oracle_coeffs(
    spec: &TestSignalSpec,
    basis: &WaveletBasis,
    levels: (i32, i32),
    period: f64,
    rel_tol: f64,
) -> Result<wavelet::OracleCoeffs> {
    spec.check_margin(period, 0.0)?;
    let f = |x: f64| spec.value(x);
    wavelet::oracle_coeffs(&f, period, basis, levels, rel_tol)
}

/// Largest `|c(Q)|` over cubes whose wavelet support contains `x0`, per
/// level, with the least-squares slope of its `log₂` against the level.
pub fn level_max_slope(
    field: &CoeffField,
    basis: &WaveletBasis,
    x0: f64,
    levels: (i32, i32),
) -> (Vec<(i32, f64)>, f64) {
    let span = basis.support().ceil() as i64;
    let maxima: Vec<(i32, f64)> = (levels.0..=levels.1)
        .map(|j| {
            let k0 = (x0 * 2f64.powi(j)).floor() as i64;
            let m = (k0 - span + 1..=k0)
                .map(|k| field.get(&DyadicCube::new_1d(j, k)).abs())
                .fold(0.0, f64::max);
            (j, m)
        })
        .collect();
    let pts: Vec<(f64, f64)> = maxima
        .iter()
        .filter(|(_, m)| *m > 0.0)
        .map(|&(j, m)| (j as f64, m.log2()))
        .collect();
    (maxima, slope(&pts))
}

fn slope(pts: &[(f64, f64)]) -> f64 {
    if pts.len() < 2 {
        return 0.0;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx
}

/// Largest `|a(Q) − b(Q)|` over cubes of each level, divided by the
/// largest `|b(Q)|` on that level; the maximum over `levels`.
pub fn max_level_deviation(a: &CoeffField, b: &CoeffField, levels: (i32, i32)) -> f64 {
    let mut worst = 0.0f64;
    for j in levels.0..=levels.1 {
        let scale = b.level_entries(j).fold(0.0f64, |m, (_, v)| m.max(v.abs()));
        let cubes: std::collections::BTreeSet<&DyadicCube> = a
            .level_entries(j)
            .chain(b.level_entries(j))
            .map(|(q, _)| q)
            .collect();
        let diff = cubes
            .iter()
            .map(|q| (a.get(q) - b.get(q)).abs())
            .fold(0.0, f64::max);
        if diff > 0.0 {
            worst = worst.max(if scale > 0.0 {
                diff / scale
            } else {
                f64::INFINITY
            });
        }
    }
    worst
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    pub family: Family,
    pub tilde: bool,
    pub s: f64,
    pub p: f64,
    pub q: f64,
    pub x0: f64,
    pub s_primes: Vec<f64>,
    pub sigmas: Vec<f64>,
    /// Coarsest wavelet level.
    pub jmin: i32,
    /// Deepest level of each truncation window, shallowest first.
    pub windows: Vec<i32>,
    /// Flag threshold on the fitted `log₂` growth per level.
    pub slope_threshold: f64,
    pub norm: NormConfig,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            family: Family::B,
            tilde: true,
            s: 0.0,
            p: 2.0,
            q: 2.0,
            x0: 0.5,
            s_primes: (0..=8).map(|i| -0.5 + 0.25 * i as f64).collect(),
            sigmas: (0..=6).map(|i| -1.0 + 0.25 * i as f64).collect(),
            jmin: 2,
            windows: vec![6, 8, 10],
            slope_threshold: 0.05,
            norm: NormConfig::default(),
        }
    }
}

impl ScanConfig {
    pub fn params(&self, s_prime: f64, sigma: f64) -> SpaceParams {
        SpaceParams::new(self.family, self.s, s_prime, sigma, self.p, self.q)
            .with_tilde(self.tilde)
            .with_x0(vec![self.x0])
    }

    /// Wavelet regularity the characterization needs at one cell.
    pub fn required_regularity(&self, s_prime: f64, sigma: f64) -> f64 {
        let n = 1.0;
        let j = compute_j(self.family, 1, self.p, self.q);
        let inv_p = if self.p.is_infinite() {
            0.0
        } else {
            1.0 / self.p
        };
        if self.tilde {
            let (up, down) = (sigma.max(0.0), sigma.min(0.0));
            (s_prime + up)
                .max(up + self.s + s_prime - n * inv_p)
                .max(j - n - s_prime - down)
        } else {
            s_prime
                .max(sigma + self.s + s_prime - n * inv_p)
                .max(j - n - s_prime)
        }
    }
}

/// Slope field and divergence flags over the `(s', σ)` grid. Rows follow
/// `sigmas`, columns `s_primes`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrontierScan {
    pub config: ScanConfig,
    pub basis_moments: usize,
    /// `min(moments, Hölder exponent)` of the basis.
    pub basis_regularity: f64,
    pub slopes: Vec<Vec<f64>>,
    /// Norm at the deepest window.
    pub norms: Vec<Vec<f64>>,
    pub flags: Vec<Vec<bool>>,
    /// Per `σ`, the smallest flagged `s'`, if any.
    pub frontier: Vec<(f64, Option<f64>)>,
}

/// Evaluates the wavelet-side norm of `f` on every cell at each truncation
/// window and flags cells whose norm keeps growing. Scan ranges the basis
/// cannot characterize are refused.
pub fn frontier_scan(
    f: &SampledSignal,
    cfg: &ScanConfig,
    basis: &WaveletBasis,
) -> Result<FrontierScan> {
    if cfg.windows.len() < 2 || cfg.s_primes.is_empty() || cfg.sigmas.is_empty() {
        return Err(Error::param(
            "scan needs at least two windows and a nonempty grid",
        ));
    }
    let basis_regularity = (basis.moments() as f64).min(basis.smoothness());
    for &sp in &cfg.s_primes {
        for &sg in &cfg.sigmas {
            let need = cfg.required_regularity(sp, sg);
            if need >= basis_regularity {
                return Err(Error::Unsupported(format!(
                    "cell (s' = {sp}, σ = {sg}) needs wavelet regularity above {need:.3}; the {}-moment basis has {basis_regularity:.3}",
                    basis.moments()
                )));
            }
        }
    }
    let deepest = *cfg.windows.iter().max().unwrap();
    let c = wavelet::dwt_analyze(f, basis, (cfg.jmin, deepest))?;
    let truncated: Vec<CoeffField> = cfg
        .windows
        .iter()
        .map(|&w| c.with_level_window((cfg.jmin, w)))
        .collect::<Result<_>>()?;
    let cells: Vec<(usize, usize)> = (0..cfg.sigmas.len())
        .flat_map(|i| (0..cfg.s_primes.len()).map(move |k| (i, k)))
        .collect();
    let values = cells
        .par_iter()
        .map(|&(i, k)| {
            let params = cfg.params(cfg.s_primes[k], cfg.sigmas[i]);
            let norms = truncated
                .iter()
                .map(|t| Ok(t.space_norm(&params, &cfg.norm)?.value))
                .collect::<Result<Vec<f64>>>()?;
            let pts: Vec<(f64, f64)> = cfg
                .windows
                .iter()
                .zip(&norms)
                .filter(|(_, v)| **v > 0.0)
                .map(|(&w, &v)| (w as f64, v.log2()))
                .collect();
            Ok((slope(&pts), *norms.last().unwrap()))
        })
        .collect::<Result<Vec<(f64, f64)>>>()?;
    let (rows, cols) = (cfg.sigmas.len(), cfg.s_primes.len());
    let mut slopes = vec![vec![0.0; cols]; rows];
    let mut norms = vec![vec![0.0; cols]; rows];
    let mut flags = vec![vec![false; cols]; rows];
    for (&(i, k), &(sl, v)) in cells.iter().zip(&values) {
        slopes[i][k] = sl;
        norms[i][k] = v;
        flags[i][k] = sl > cfg.slope_threshold;
    }
    let frontier = cfg
        .sigmas
        .iter()
        .zip(&flags)
        .map(|(&sg, row)| (sg, row.iter().position(|&b| b).map(|k| cfg.s_primes[k])))
        .collect();
    Ok(FrontierScan {
        config: cfg.clone(),
        basis_moments: basis.moments(),
        basis_regularity,
        slopes,
        norms,
        flags,
        frontier,
    })
}

impl FrontierScan {
    /// Whether flags never switch off as `s'` grows (first) and as `σ`
    /// grows (second).
    pub fn monotone(&self) -> (bool, bool) {
        let along_s = self
            .flags
            .iter()
            .all(|row| row.windows(2).all(|w| !w[0] || w[1]));
        let along_sigma = self
            .flags
            .windows(2)
            .all(|r| r[0].iter().zip(&r[1]).all(|(a, b)| !a || *b));
        (along_s, along_sigma)
    }

    pub fn flagged(&self) -> usize {
        self.flags.iter().flatten().filter(|b| **b).count()
    }

    /// Slopes as a CSV matrix: first column `σ`, one column per `s'`.
    pub fn write_slopes_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["sigma".to_string()];
        header.extend(self.config.s_primes.iter().map(|s| format!("{s}")));
        wr.write_record(&header)?;
        for (sg, row) in self.config.sigmas.iter().zip(&self.slopes) {
            let mut rec = vec![format!("{sg}")];
            rec.extend(row.iter().map(|v| format!("{v}")));
            wr.write_record(&rec)?;
        }
        wr.flush()?;
        Ok(())
    }

    /// `s' σ slope flag` lines, one block per `σ`, for `splot ... with pm3d`.
    pub fn write_gnuplot<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# s_prime sigma slope flag")?;
        for (i, sg) in self.config.sigmas.iter().enumerate() {
            for (k, sp) in self.config.s_primes.iter().enumerate() {
                writeln!(
                    w,
                    "{sp} {sg} {} {}",
                    self.slopes[i][k], self.flags[i][k] as u8
                )?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}
