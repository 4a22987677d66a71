//! Fourier multipliers, sampled pseudo-differential symbols, kernel
//! condition checks and boundedness experiments on the periodic grid.

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::almost_diag::Verdict;
use crate::ensemble::{decay_for, generate, EnsembleConfig};
use crate::error::{Error, Result};
use crate::field::NormConfig;
use crate::frames::{
    sample_wavelet, verify_frame_decay, FrameCheckConfig, FrameKind, FrameReport, MoleculeSpec,
};
use crate::lattice::{DyadicCube, Region};
use crate::lp::{function_space_norm, synthesize, LpPair};
use crate::params::SpaceParams;
use crate::seed::SeedTree;
use crate::signal::SampledSignal;
use crate::spectral;
use crate::wavelet::WaveletBasis;

/// Largest fraction of output energy allowed in the top octave below
/// Nyquist after an order-raising operator.
pub const ALIASING_TOL: f64 = 1e-6;

/// An operator acting on periodic samples.
#[derive(Clone, Debug, PartialEq)]
pub enum Operator {
    Identity,
    /// Multiplier `−i sgn ξ`; the Nyquist bin is sent to zero.
    Hilbert,
    /// `(1 − Δ)^{μ/2}`, multiplier `(1 + |ξ|²)^{μ/2}`, of order `μ`.
    Bessel(f64),
    /// `∂^γ`, multiplier `(iξ)^γ`.
    Derivative(u32),
    /// A sampled symbol `a(x, ξ)`.
    Symbol(Box<SymbolSpec>),
}

impl Operator {
    /// Parses `identity`, `hilbert`, `bessel:<mu>`, `derivative:<gamma>` or
    /// `symbol:<csv file>`.
    pub fn parse(preset: &str) -> Result<Self> {
        let (name, arg) = match preset.split_once(':') {
            Some((n, a)) => (n.trim(), Some(a.trim())),
            None => (preset.trim(), None),
        };
        let need =
            |what: &str| arg.ok_or_else(|| Error::Parse(format!("operator {name} needs {what}")));
        match name {
            "identity" => Ok(Operator::Identity),
            "hilbert" => Ok(Operator::Hilbert),
            "bessel" => {
                let mu = need("an order")?
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad bessel order in {preset}")))?;
                Ok(Operator::Bessel(mu))
            }
            "derivative" => {
                let g = need("an order")?
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad derivative order in {preset}")))?;
                Ok(Operator::Derivative(g))
            }
            "symbol" => Ok(Operator::Symbol(Box::new(SymbolSpec::load(Path::new(
                need("a file")?,
            ))?))),
            _ => Err(Error::Parse(format!("unknown operator {preset}"))),
        }
    }

    /// Preset string accepted by [`Operator::parse`] (symbols print as
    /// `symbol`).
    pub fn name(&self) -> String {
        match self {
            Operator::Identity => "identity".into(),
            Operator::Hilbert => "hilbert".into(),
            Operator::Bessel(mu) => format!("bessel:{mu}"),
            Operator::Derivative(g) => format!("derivative:{g}"),
            Operator::Symbol(_) => "symbol".into(),
        }
    }

    /// Order `μ`: the operator maps `s'` to `s' − μ`.
    pub fn order(&self) -> f64 {
        match self {
            Operator::Identity | Operator::Hilbert => 0.0,
            Operator::Bessel(mu) => *mu,
            Operator::Derivative(g) => *g as f64,
            Operator::Symbol(s) => s.mu,
        }
    }

    /// Whether `T(x^γ) = 0` and `T*(x^γ) = 0` hold by construction: the
    /// multiplier is odd, or vanishes at the origin, and is smooth off it.
    /// Not verified numerically.
    pub fn annihilates_polynomials(&self) -> bool {
        matches!(self, Operator::Hilbert | Operator::Derivative(1..))
    }

    /// Symbol at frequency `xi`; `None` for `x`-dependent symbols.
    pub fn multiplier(&self, xi: f64, nyquist: bool) -> Option<Complex64> {
        let z = match self {
            Operator::Identity => Complex64::new(1.0, 0.0),
            Operator::Hilbert => {
                if nyquist || xi == 0.0 {
                    Complex64::new(0.0, 0.0)
                } else {
                    Complex64::new(0.0, -xi.signum())
                }
            }
            Operator::Bessel(mu) => Complex64::new((1.0 + xi * xi).powf(0.5 * mu), 0.0),
            Operator::Derivative(g) => {
                if nyquist && g % 2 == 1 {
                    // (iξ)^γ is not real-symmetric at the Nyquist bin
                    Complex64::new(0.0, 0.0)
                } else {
                    Complex64::new(0.0, xi).powu(*g)
                }
            }
            Operator::Symbol(s) if !s.x_dependent => return Some(s.values[s.index(0, xi)?]),
            Operator::Symbol(_) => return None,
        };
        Some(z)
    }

    pub fn apply(&self, f: &SampledSignal) -> Result<SampledSignal> {
        match self {
            Operator::Symbol(s) => apply_symbol(f, s),
            _ => apply_multiplier(f, self),
        }
    }
}

fn top_octave_fraction(spec: &[Complex64]) -> f64 {
    let n = spec.len();
    let (mut top, mut total) = (0.0, 0.0);
    for (m, z) in spec.iter().enumerate() {
        let e = z.norm_sqr();
        total += e;
        if spectral::signed_bin(m, n).unsigned_abs() as usize > n / 4 {
            top += e;
        }
    }
    if total > 0.0 {
        top / total
    } else {
        0.0
    }
}

/// Multiplies the discrete spectrum of `f` by the operator's symbol.
/// Order-raising operators fail with [`Error::Aliasing`] when the output
/// carries more than [`ALIASING_TOL`] of its energy in the top octave.
pub fn apply_multiplier(f: &SampledSignal, op: &Operator) -> Result<SampledSignal> {
    let (n, t) = (f.len(), f.period());
    let mut spec = spectral::spectrum(f.samples());
    for (m, z) in spec.iter_mut().enumerate() {
        let xi = spectral::angular(m, n, t);
        let a = op.multiplier(xi, n % 2 == 0 && m == n / 2).ok_or_else(|| {
            Error::Unsupported("x-dependent symbol passed as a multiplier".into())
        })?;
        *z *= a;
    }
    if op.order() > 0.0 {
        let fraction = top_octave_fraction(&spec);
        if fraction > ALIASING_TOL {
            return Err(Error::Aliasing { fraction });
        }
    }
    f.with_samples(spectral::synthesize_real(spec))
}

/// A symbol `a(x, ξ)` sampled on the product of the `N`-point spatial grid
/// and the `N` discrete frequencies of a torus of period `T`.
#[derive(Clone, Debug, PartialEq)]
pub struct SymbolSpec {
    pub mu: f64,
    pub x_dependent: bool,
    pub period: f64,
    len: usize,
    /// Row-major `[x][bin]`; a single row when `x_dependent` is false.
    values: Vec<Complex64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Seminorm {
    pub alpha: u32,
    pub beta: u32,
    /// `sup (1 + |ξ|)^{-μ-α+β} |∂_x^α ∂_ξ^β a|` over the grid interior.
    pub value: f64,
}

impl SymbolSpec {
    pub fn from_fn(
        len: usize,
        period: f64,
        mu: f64,
        a: impl Fn(f64, f64) -> Complex64 + Sync,
    ) -> Result<Self> {
        if len < 2 || !(period > 0.0) {
            return Err(Error::param(
                "symbol grid needs len ≥ 2 and a positive period",
            ));
        }
        let h = period / len as f64;
        let values: Vec<Complex64> = (0..len * len)
            .into_par_iter()
            .map(|i| {
                a(
                    (i / len) as f64 * h,
                    spectral::angular(i % len, len, period),
                )
            })
            .collect();
        let x_dependent = values.chunks(len).any(|row| row != &values[..len]);
        let values = if x_dependent {
            values
        } else {
            values[..len].to_vec()
        };
        Ok(Self {
            mu,
            x_dependent,
            period,
            len,
            values,
        })
    }

    pub fn multiplier(
        len: usize,
        period: f64,
        mu: f64,
        a: impl Fn(f64) -> Complex64 + Sync,
    ) -> Result<Self> {
        Self::from_fn(len, period, mu, |_, xi| a(xi))
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    fn index(&self, row: usize, xi: f64) -> Option<usize> {
        let m = (xi * self.period / (2.0 * PI)).round() as i64;
        let bin = m.rem_euclid(self.len as i64) as usize;
        let row = if self.x_dependent { row } else { 0 };
        Some(row * self.len + bin)
    }

    /// `a(x_n, ξ_m)` by grid indices.
    pub fn at(&self, n: usize, m: usize) -> Complex64 {
        let row = if self.x_dependent { n } else { 0 };
        self.values[row * self.len + m]
    }

    /// Seminorms for every `α + β ≤ order`, by differences on the grid.
    pub fn seminorms(&self, order: u32) -> Vec<Seminorm> {
        let n = self.len;
        let h = self.period / n as f64;
        let dxi = 2.0 * PI / self.period;
        // bins sorted by signed frequency
        let bins: Vec<usize> = (0..n)
            .map(|k| (k as i64 - (n as i64 - 1) / 2).rem_euclid(n as i64) as usize)
            .collect();
        let rows = if self.x_dependent { n } else { 1 };
        let mut out = Vec::new();
        for alpha in 0..=order {
            // ∂_x^α, one column per bin
            let dx: Vec<Vec<Complex64>> = if alpha == 0 {
                (0..rows)
                    .map(|r| bins.iter().map(|&m| self.values[r * n + m]).collect())
                    .collect()
            } else if !self.x_dependent {
                vec![vec![Complex64::new(0.0, 0.0); n]]
            } else {
                let cols: Vec<Vec<Complex64>> = bins
                    .iter()
                    .map(|&m| {
                        let re: Vec<f64> = (0..n).map(|r| self.values[r * n + m].re).collect();
                        let im: Vec<f64> = (0..n).map(|r| self.values[r * n + m].im).collect();
                        let (dre, dim) = (
                            crate::frames::difference(&re, h, alpha, 1),
                            crate::frames::difference(&im, h, alpha, 1),
                        );
                        dre.into_iter()
                            .zip(dim)
                            .map(|(a, b)| Complex64::new(a, b))
                            .collect()
                    })
                    .collect();
                (0..n)
                    .map(|r| cols.iter().map(|c| c[r]).collect())
                    .collect()
            };
            for beta in 0..=(order - alpha) {
                let reach = beta as usize;
                let mut sup = 0.0f64;
                for row in &dx {
                    for k in reach..n.saturating_sub(reach) {
                        let d = xi_difference(row, k, beta, dxi);
                        let xi = (k as f64 - (n as f64 - 1.0).div_euclid(2.0)) * dxi;
                        let w = (1.0 + xi.abs()).powf(-self.mu - alpha as f64 + beta as f64);
                        sup = sup.max(w * d.norm());
                    }
                }
                out.push(Seminorm {
                    alpha,
                    beta,
                    value: sup,
                });
            }
        }
        out
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# mu={}", self.mu)?;
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["x", "xi", "re", "im"])?;
        let h = self.period / self.len as f64;
        let rows = if self.x_dependent { self.len } else { 1 };
        for r in 0..rows {
            for m in 0..self.len {
                let z = self.values[r * self.len + m];
                let xi = spectral::angular(m, self.len, self.period);
                wr.write_record(&[
                    format!("{}", r as f64 * h),
                    format!("{xi}"),
                    format!("{}", z.re),
                    format!("{}", z.im),
                ])?;
            }
        }
        wr.flush()?;
        Ok(())
    }

    /// Reads the format of [`SymbolSpec::write_csv`]: a `# mu=` line, then
    /// `x,xi,re,im` rows, either `N` rows for one `x` or `N²` rows.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut text = String::new();
        let mut r = r;
        r.read_to_string(&mut text)?;
        let mu = text
            .lines()
            .find_map(|l| l.trim().strip_prefix("# mu="))
            .ok_or_else(|| Error::Parse("symbol file lacks a `# mu=` line".into()))?
            .trim()
            .parse::<f64>()
            .map_err(|_| Error::Parse("bad symbol order".into()))?;
        let mut rd = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let mut rows: Vec<[f64; 4]> = Vec::new();
        for rec in rd.records() {
            let rec = rec?;
            let mut v = [0.0; 4];
            for (i, slot) in v.iter_mut().enumerate() {
                *slot = rec
                    .get(i)
                    .ok_or_else(|| Error::Parse("symbol row needs four columns".into()))?
                    .trim()
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad number in symbol row {rec:?}")))?;
            }
            rows.push(v);
        }
        let x0 = rows
            .first()
            .ok_or_else(|| Error::Parse("empty symbol file".into()))?[0];
        let len = rows.iter().take_while(|r| r[0] == x0).count();
        if len < 2 || (rows.len() != len && rows.len() != len * len) {
            return Err(Error::Parse(format!(
                "{} rows do not form an N or N² table",
                rows.len()
            )));
        }
        let dxi = rows[1][1] - rows[0][1];
        if !(dxi > 0.0) {
            return Err(Error::Parse(
                "frequencies must follow the FFT bin order".into(),
            ));
        }
        let period = 2.0 * PI / dxi;
        let values: Vec<Complex64> = rows.iter().map(|r| Complex64::new(r[2], r[3])).collect();
        let x_dependent = values.len() > len && values.chunks(len).any(|row| row != &values[..len]);
        let values = if x_dependent {
            values
        } else {
            values[..len].to_vec()
        };
        Ok(Self {
            mu,
            x_dependent,
            period,
            len,
            values,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_csv(std::io::BufWriter::new(std::fs::File::create(path)?))
    }
}

/// Centered `β`-th difference along sorted frequencies.
fn xi_difference(row: &[Complex64], k: usize, beta: u32, step: f64) -> Complex64 {
    if beta == 0 {
        return row[k];
    }
    // even: offsets β/2 − j; odd: (β − 2j) with doubled step
    let denom = if beta % 2 == 0 { step } else { 2.0 * step };
    let mut acc = Complex64::new(0.0, 0.0);
    let mut binom = 1.0;
    for j in 0..=beta {
        let off = if beta % 2 == 0 {
            beta as i64 / 2 - j as i64
        } else {
            beta as i64 - 2 * j as i64
        };
        let idx = (k as i64 + off) as usize;
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        acc += row[idx] * (sign * binom);
        binom = binom * (beta - j) as f64 / (j + 1) as f64;
    }
    acc / denom.powi(beta as i32)
}

/// `a(x, D) f (x_n) = Σ_m a(x_n, ξ_m) F_m e^{iξ_m x_n}`, one quadrature per
/// output sample.
pub fn apply_symbol(f: &SampledSignal, a: &SymbolSpec) -> Result<SampledSignal> {
    let n = f.len();
    if a.len != n || (a.period - f.period()).abs() > 1e-12 * f.period() {
        return Err(Error::param(format!(
            "symbol grid ({}, T={}) does not match the signal ({n}, T={})",
            a.len,
            a.period,
            f.period()
        )));
    }
    let spec = spectral::spectrum(f.samples());
    if a.mu > 0.0 {
        let image: Vec<Complex64> = spec
            .iter()
            .enumerate()
            .map(|(m, z)| z * a.at(0, m))
            .collect();
        let fraction = top_octave_fraction(&image);
        if fraction > ALIASING_TOL {
            return Err(Error::Aliasing { fraction });
        }
    }
    let twiddle: Vec<Complex64> = (0..n)
        .map(|k| Complex64::from_polar(1.0, 2.0 * PI * k as f64 / n as f64))
        .collect();
    let out: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|x| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (m, z) in spec.iter().enumerate() {
                acc += a.at(x, m) * z * twiddle[(m * x) % n];
            }
            acc.re
        })
        .collect();
    f.with_samples(out)
}

/// Kernel regularity `r₁`, Taylor order `r₂` and Hölder exponent `ε`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CzKernelSpec {
    pub r1: u32,
    pub r2: u32,
    pub epsilon: f64,
}

impl CzKernelSpec {
    pub fn new(r1: u32, r2: u32, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0) || epsilon > 1.0 {
            return Err(Error::param(format!(
                "kernel exponent ε = {epsilon} must lie in (0, 1]"
            )));
        }
        Ok(Self { r1, r2, epsilon })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CzConfig {
    /// Evaluation points `x` in `[−1, 1]`.
    pub points: usize,
    /// Closest approach `|x − y|` of the finest sweep.
    pub min_distance: f64,
    pub max_distance: f64,
    /// Number of halvings of the closest approach.
    pub sweeps: u32,
    pub growth_tol: f64,
}

impl Default for CzConfig {
    fn default() -> Self {
        Self {
            points: 9,
            min_distance: 1.0 / 64.0,
            max_distance: 2.0,
            sweeps: 3,
            growth_tol: 0.05,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelCondition {
    /// `size`, `taylor_y`, `holder_y` or `holder_x`.
    pub condition: String,
    pub order: u32,
    /// Fitted constant at each closest approach, coarsest first.
    pub constants: Vec<f64>,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CzReport {
    pub spec: CzKernelSpec,
    pub conditions: Vec<KernelCondition>,
    pub pass: bool,
}

/// `∂^k g(t)` by a Richardson-extrapolated centered difference with step `eta`.
fn derivative_at(g: &dyn Fn(f64) -> f64, t: f64, k: u32, eta: f64) -> f64 {
    let stencil = |e: f64| -> f64 {
        if k == 0 {
            return g(t);
        }
        // centered k-th difference on offsets (k/2 − j) e, scaled to unit spacing
        (0..=k)
            .map(|j| {
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                sign * (0..j).fold(1.0, |acc, i| acc * (k - i) as f64 / (i + 1) as f64)
                    * g(t + (k as f64 / 2.0 - j as f64) * e)
            })
            .sum::<f64>()
            / e.powi(k as i32)
    };
    let (a, b) = (stencil(eta), stencil(0.5 * eta));
    (4.0 * b - a) / 3.0
}

/// Fits the constants of the kernel size, Taylor and Hölder conditions over
/// pairs with `|x − y|` at least the closest approach, halving it
/// `cfg.sweeps` times. A condition passes when its constant stops growing.
/// The Taylor condition subtracts the degree-`r₂` Taylor polynomial of
/// `K(x, ·)` at `y`; for `r₂ = 0` this is the plain difference.
pub fn verify_cz_kernel(
    kernel: &(dyn Fn(f64, f64) -> f64 + Sync),
    spec: &CzKernelSpec,
    cfg: &CzConfig,
) -> Result<CzReport> {
    if cfg.points < 2 || !(cfg.min_distance > 0.0) || cfg.max_distance <= cfg.min_distance {
        return Err(Error::param(
            "kernel check needs points and a distance range",
        ));
    }
    let xs: Vec<f64> = (0..cfg.points)
        .map(|i| -1.0 + 2.0 * i as f64 / (cfg.points - 1) as f64)
        .collect();
    let eps = spec.epsilon;
    let n = 1.0;
    // fitted constant for one condition over all pairs with |x − y| ≥ delta
    let fit = |delta: f64, cond: &(dyn Fn(f64, f64) -> f64 + Sync)| -> f64 {
        let steps = (cfg.max_distance / delta).log2().ceil().max(0.0) as i32 * 4;
        xs.par_iter()
            .map(|&x| {
                let mut best = 0.0f64;
                for k in 0..=steps {
                    let d = delta * 2f64.powf(k as f64 / 4.0);
                    if d > cfg.max_distance * (1.0 + 1e-12) {
                        break;
                    }
                    for y in [x - d, x + d] {
                        best = best.max(cond(x, y));
                    }
                }
                best
            })
            .reduce(|| 0.0, f64::max)
    };
    let size = |order: u32| {
        move |x: f64, y: f64| -> f64 {
            let d = (x - y).abs();
            let g = |t: f64| kernel(t, y);
            derivative_at(&g, x, order, d / 64.0).abs() * d.powf(n + order as f64)
        }
    };
    let taylor = move |x: f64, y: f64| -> f64 {
        let d = (x - y).abs();
        let g = |t: f64| kernel(x, t);
        let derivs: Vec<f64> = (0..=spec.r2)
            .map(|k| derivative_at(&g, y, k, d / 64.0))
            .collect();
        let mut worst = 0.0f64;
        for frac in [0.5, 0.25, 0.125] {
            for sign in [-1.0, 1.0] {
                let u = sign * frac * d / 2.0;
                let mut poly = 0.0;
                let mut fact = 1.0;
                for (k, dk) in derivs.iter().enumerate() {
                    if k > 0 {
                        fact *= k as f64;
                    }
                    poly += dk * u.powi(k as i32) / fact;
                }
                let rem = (kernel(x, y + u) - poly).abs();
                let bound =
                    u.abs().powf(spec.r2 as f64 + eps) * d.powf(-(n + spec.r2 as f64 + eps));
                worst = worst.max(rem / bound);
            }
        }
        worst
    };
    let holder = |order: u32, in_x: bool| {
        move |x: f64, y: f64| -> f64 {
            let d = (x - y).abs();
            let dk = |xx: f64, yy: f64| {
                let g = |t: f64| kernel(t, yy);
                derivative_at(&g, xx, order, d / 64.0)
            };
            let base = dk(x, y);
            let mut worst = 0.0f64;
            for frac in [0.5, 0.25, 0.125] {
                for sign in [-1.0, 1.0] {
                    let u = sign * frac * d / 2.0;
                    let moved = if in_x { dk(x + u, y) } else { dk(x, y + u) };
                    let bound = u.abs().powf(eps) * d.powf(-(n + order as f64 + eps));
                    worst = worst.max((moved - base).abs() / bound);
                }
            }
            worst
        }
    };
    let deltas: Vec<f64> = (0..=cfg.sweeps)
        .map(|k| cfg.min_distance * 2f64.powi((cfg.sweeps - k) as i32))
        .collect();
    let sweep =
        |name: &str, order: u32, cond: &(dyn Fn(f64, f64) -> f64 + Sync)| -> KernelCondition {
            let constants: Vec<f64> = deltas.iter().map(|&d| fit(d, cond)).collect();
            let stable = constants
                .windows(2)
                .all(|w| w[1] <= (1.0 + cfg.growth_tol) * w[0] + f64::MIN_POSITIVE);
            let pass = stable && constants.iter().all(|c| c.is_finite());
            KernelCondition {
                condition: name.into(),
                order,
                constants,
                pass,
            }
        };
    let mut conditions = Vec::new();
    for order in 0..=spec.r1 {
        conditions.push(sweep("size", order, &size(order)));
    }
    conditions.push(sweep("taylor_y", spec.r2, &taylor));
    for order in 1..=spec.r1 {
        conditions.push(sweep("holder_y", order, &holder(order, false)));
    }
    for order in 0..=spec.r1 {
        conditions.push(sweep("holder_x", order, &holder(order, true)));
    }
    let pass = conditions.iter().all(|c| c.pass);
    Ok(CzReport {
        spec: *spec,
        conditions,
        pass,
    })
}

/// The Hilbert kernel `1/(π(x − y))`.
pub fn hilbert_kernel(x: f64, y: f64) -> f64 {
    1.0 / (PI * (x - y))
}

/// `max ‖Tf‖₂ / ‖f‖₂` over the given signals.
pub fn l2_amplification(op: &Operator, signals: &[SampledSignal]) -> Result<f64> {
    let ratios = signals
        .par_iter()
        .map(|f| {
            let norm = f.l2_norm();
            if norm == 0.0 {
                return Ok(0.0);
            }
            Ok(op.apply(f)?.l2_norm() / norm)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(ratios.into_iter().fold(0.0, f64::max))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageCheck {
    pub cube: DyadicCube,
    /// Verification on the torus of period `T`, then `2T`.
    pub reports: [FrameReport; 2],
    /// Largest relative change of a fitted decay or derivative constant
    /// between the two tori.
    pub window_change: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageReport {
    pub operator: String,
    pub spec: MoleculeSpec,
    pub checks: Vec<ImageCheck>,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageConfig {
    pub len: usize,
    pub period: f64,
    pub window_tol: f64,
    pub frame: FrameCheckConfig,
}

impl Default for ImageConfig {
    fn default() -> Self {
        Self {
            len: 1 << 16,
            period: 16.0,
            window_tol: 0.05,
            frame: FrameCheckConfig::default(),
        }
    }
}

/// Computes `m_Q = T ψ_Q` for each cube and checks it against the molecule
/// envelope with decay `n + r₂ + ε`, derivative decay `n + ε` and moments
/// below `r₂`, on the torus of period `T` and again on `2T`.
pub fn image_molecule_check(
    op: &Operator,
    basis: &WaveletBasis,
    cubes: &[DyadicCube],
    r1: u32,
    r2: u32,
    epsilon: f64,
    cfg: &ImageConfig,
) -> Result<ImageReport> {
    let spec = MoleculeSpec::new(r1, r2, 1.0 + epsilon, 1.0 + r2 as f64 + epsilon)?;
    let checks = cubes
        .iter()
        .map(|q| {
            let run = |scale: usize| -> Result<FrameReport> {
                let psi = sample_wavelet(basis, q, cfg.len * scale, cfg.period * scale as f64)?;
                let m = op.apply(&psi)?;
                verify_frame_decay(&m, FrameKind::Molecule(spec), q, &cfg.frame)
            };
            let (a, b) = (run(1)?, run(2)?);
            let window_change = a
                .conditions
                .iter()
                .zip(&b.conditions)
                .filter(|(c, _)| c.condition != "moment")
                .map(|(c, d)| {
                    if c.fitted > 0.0 {
                        (d.fitted / c.fitted - 1.0).abs()
                    } else {
                        0.0
                    }
                })
                .fold(0.0, f64::max);
            let pass = a.pass && b.pass && window_change <= cfg.window_tol;
            Ok(ImageCheck {
                cube: q.clone(),
                reports: [a, b],
                window_change,
                pass,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let pass = checks.iter().all(|c| c.pass);
    Ok(ImageReport {
        operator: op.name(),
        spec,
        checks,
        pass,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundednessConfig {
    pub ensemble_size: usize,
    pub density: f64,
    pub len: usize,
    pub period: f64,
    pub jmin: i32,
    pub depths: Vec<i32>,
    pub margin: f64,
    pub growth_tol: f64,
    pub lp_order: u32,
    pub norm: NormConfig,
}

impl Default for BoundednessConfig {
    fn default() -> Self {
        Self {
            ensemble_size: 12,
            density: 0.15,
            len: 1 << 14,
            period: 1.0,
            jmin: 2,
            depths: vec![8, 10, 12],
            margin: 1.0,
            growth_tol: 0.05,
            lp_order: 6,
            norm: NormConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundednessReport {
    pub operator: String,
    pub params_in: SpaceParams,
    pub params_out: SpaceParams,
    pub seed: u64,
    pub depths: Vec<i32>,
    /// `max ‖Tf‖_out / ‖f‖_in` per depth.
    pub max_ratios: Vec<f64>,
    pub min_ratios: Vec<f64>,
    /// Relative growth of the largest ratio over the final depth step.
    pub growth: f64,
    pub verdict: Verdict,
}

/// Ratios `‖Tf‖_out / ‖f‖_in` over an LP-synthesized ensemble at each depth.
pub fn operator_boundedness_check(
    op: &Operator,
    params_in: &SpaceParams,
    params_out: &SpaceParams,
    seed: u64,
    cfg: &BoundednessConfig,
) -> Result<BoundednessReport> {
    params_in.validate()?;
    params_out.validate()?;
    let deepest = *cfg
        .depths
        .iter()
        .max()
        .ok_or_else(|| Error::param("no depths"))?;
    let pair = LpPair::new(cfg.lp_order)?;
    let mut ens = EnsembleConfig::unit(cfg.ensemble_size, cfg.density, (cfg.jmin, deepest), 0.0);
    ens.region = Region::interval(0.0, cfg.period)?;
    ens.decay = decay_for(&[params_in, params_out], cfg.margin);
    let tree = SeedTree::new(seed).derive("operator-boundedness");
    let fields = (0..cfg.ensemble_size)
        .into_par_iter()
        .map(|i| generate(&ens, &tree, i, &cfg.norm.budget))
        .collect::<Result<Vec<_>>>()?;
    let mut max_ratios = Vec::new();
    let mut min_ratios = Vec::new();
    for &d in &cfg.depths {
        let levels = (cfg.jmin, d);
        let ratios = fields
            .par_iter()
            .map(|c| {
                let f = synthesize(&c.with_level_window(levels)?, &pair, cfg.len)?;
                let tf = op.apply(&f)?;
                let din = function_space_norm(&f, params_in, &pair, levels, &cfg.norm)?.value;
                let dout = function_space_norm(&tf, params_out, &pair, levels, &cfg.norm)?.value;
                if din > 0.0 {
                    Ok(dout / din)
                } else {
                    Err(Error::param("input norm vanished on a nonzero signal"))
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        max_ratios.push(ratios.iter().copied().fold(0.0, f64::max));
        min_ratios.push(ratios.iter().copied().fold(f64::INFINITY, f64::min));
    }
    let growth = match max_ratios.as_slice() {
        [.., a, b] if *a > 0.0 => b / a - 1.0,
        _ => 0.0,
    };
    Ok(BoundednessReport {
        operator: op.name(),
        params_in: params_in.clone(),
        params_out: params_out.clone(),
        seed,
        depths: cfg.depths.clone(),
        max_ratios,
        min_ratios,
        growth,
        verdict: if growth <= cfg.growth_tol {
            Verdict::Bounded
        } else {
            Verdict::Growing
        },
    })
}
