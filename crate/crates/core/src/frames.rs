//! Atoms, molecules and wavelets on the periodic grid: verification of the
//! decay, smoothness, moment and support conditions, Gram decay between an
//! analysis and a synthesis family, and a smooth atomic decomposition.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::CoeffField;
use crate::lattice::{DyadicCube, Region};
use crate::lp::{synthesize, LpPair};
use crate::signal::SampledSignal;
use crate::spectral;
use crate::wavelet::{dwt_synthesize, WaveletBasis};

/// Decay `max(L, L₂)` with `L₂ > n + r₂`, derivatives up to `r₁`, moments
/// below `r₂`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MoleculeSpec {
    pub r1: u32,
    pub r2: u32,
    pub l: f64,
    pub l2: f64,
}

impl MoleculeSpec {
    pub fn new(r1: u32, r2: u32, l: f64, l2: f64) -> Result<Self> {
        if !(l > 1.0) || !(l2 > 1.0 + r2 as f64) {
            return Err(Error::param(format!(
                "molecule needs L > n and L₂ > n + r₂ (got {l}, {l2})"
            )));
        }
        Ok(Self { r1, r2, l, l2 })
    }
}

/// Support in `3Q`, derivatives up to `r₁` bounded by `l(Q)^{-|γ|}`,
/// moments below `r₂`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtomSpec {
    pub r1: u32,
    pub r2: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum FrameKind {
    Molecule(MoleculeSpec),
    Atom(AtomSpec),
    /// A dilated, translated wavelet `ψ_Q` with smoothness `r` and decay `L`.
    Wavelet {
        r: u32,
        l: f64,
    },
}

/// Tolerances of [`verify_frame_decay`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameCheckConfig {
    /// Largest allowed growth of a fitted derivative constant per halving of
    /// the difference step.
    pub refinement_growth: f64,
    /// Largest allowed growth of the decay constant from the inner half of
    /// the torus to all of it.
    pub window_growth: f64,
    /// Relative moment tolerance.
    pub moment_tol: f64,
    /// Relative size below which samples outside `3Q` count as zero.
    pub support_tol: f64,
}

impl Default for FrameCheckConfig {
    fn default() -> Self {
        Self {
            refinement_growth: 1.2,
            window_growth: 1.2,
            moment_tol: 1e-8,
            support_tol: 1e-12,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    /// `decay`, `derivative`, `moment`, `support` or `bound`.
    pub condition: String,
    pub order: u32,
    /// Smallest feasible constant (relative moment for `moment`).
    pub fitted: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameReport {
    pub cube: DyadicCube,
    pub kind: FrameKind,
    pub conditions: Vec<ConditionReport>,
    pub pass: bool,
}

/// `x − x_Q` reduced to `[−T/2, T/2)`.
fn torus_offset(x: f64, center: f64, period: f64) -> f64 {
    (x - center + 0.5 * period).rem_euclid(period) - 0.5 * period
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Centered difference approximation of the `order`-th derivative with
/// base step `stride · h`.
pub(crate) fn difference(samples: &[f64], h: f64, order: u32, stride: usize) -> Vec<f64> {
    let n = samples.len() as i64;
    let step = if order % 2 == 0 {
        stride as f64 * h
    } else {
        2.0 * stride as f64 * h
    };
    let denom = step.powi(order as i32);
    let weights: Vec<(i64, f64)> = (0..=order)
        .map(|k| {
            let offset = if order % 2 == 0 {
                (order as i64 / 2 - k as i64) * stride as i64
            } else {
                (order as i64 - 2 * k as i64) * stride as i64
            };
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            (offset, sign * binomial(order, k))
        })
        .collect();
    (0..n)
        .map(|i| {
            weights
                .iter()
                .map(|(o, w)| w * samples[(i + o).rem_euclid(n) as usize])
                .sum::<f64>()
                / denom
        })
        .collect()
}

struct Geometry {
    center: f64,
    side: f64,
    period: f64,
    step: f64,
}

impl Geometry {
    fn new(f: &SampledSignal, q: &DyadicCube) -> Result<Self> {
        if q.dim() != 1 || f.dim() != 1 {
            return Err(Error::Unsupported(
                "frame checks are one-dimensional".into(),
            ));
        }
        let side = q.side();
        if 3.0 * side > f.period() {
            return Err(Error::param(format!(
                "3Q does not fit on a torus of period {}",
                f.period()
            )));
        }
        Ok(Self {
            center: q.corner()[0],
            side,
            period: f.period(),
            step: f.step(),
        })
    }

    /// `l(Q)^{-1}|x − x_Q|` with `x_Q` the lower corner.
    fn scaled_distance(&self, x: f64) -> f64 {
        torus_offset(x, self.center, self.period).abs() / self.side
    }

    fn in_3q(&self, x: f64) -> bool {
        let d = torus_offset(x, self.center, self.period);
        d >= -self.side - 1e-12 * self.side && d < 2.0 * self.side - 1e-12 * self.side
    }
}

fn decay_condition(
    f: &SampledSignal,
    g: &Geometry,
    exponent: f64,
    cfg: &FrameCheckConfig,
) -> ConditionReport {
    let (mut inner, mut full) = (0.0f64, 0.0f64);
    let half = 0.25 * g.period / g.side;
    for (i, v) in f.samples().iter().enumerate() {
        let d = g.scaled_distance(f.point(i));
        let c = v.abs() * (1.0 + d).powf(exponent);
        full = full.max(c);
        if d <= half {
            inner = inner.max(c);
        }
    }
    ConditionReport {
        condition: "decay".into(),
        order: 0,
        fitted: full,
        pass: full <= cfg.window_growth * inner,
    }
}

/// Fits the derivative constant at strides 4, 2, 1 and requires it to
/// settle. `exponent` is the spatial decay weight (0 for atoms).
fn derivative_condition(
    f: &SampledSignal,
    g: &Geometry,
    order: u32,
    exponent: f64,
    cfg: &FrameCheckConfig,
) -> Result<ConditionReport> {
    let points_per_side = g.side / g.step;
    let needed = 8.0 * (order as f64 + 2.0);
    if points_per_side < needed {
        return Err(Error::Resolution(format!(
            "derivative of order {order} needs {needed} samples per side, have {points_per_side}"
        )));
    }
    let fit = |stride: usize| -> f64 {
        let d = difference(f.samples(), g.step, order, stride);
        d.iter()
            .enumerate()
            .map(|(i, v)| {
                v.abs()
                    * g.side.powi(order as i32)
                    * (1.0 + g.scaled_distance(f.point(i))).powf(exponent)
            })
            .fold(0.0, f64::max)
    };
    let fits = [fit(4), fit(2), fit(1)];
    // geometric mean growth over the two halvings
    let settled = fits[2] <= cfg.refinement_growth.powi(2) * fits[0] + f64::MIN_POSITIVE;
    Ok(ConditionReport {
        condition: "derivative".into(),
        order,
        fitted: fits[2],
        pass: settled && fits[2].is_finite(),
    })
}

fn moment_condition(
    f: &SampledSignal,
    g: &Geometry,
    order: u32,
    cfg: &FrameCheckConfig,
) -> ConditionReport {
    let (mut moment, mut scale) = (0.0, 0.0);
    for (i, v) in f.samples().iter().enumerate() {
        let t = torus_offset(f.point(i), g.center, g.period);
        let w = t.powi(order as i32);
        moment += w * v;
        scale += w.abs() * v.abs();
    }
    let rel = if scale > 0.0 {
        moment.abs() / scale
    } else {
        0.0
    };
    ConditionReport {
        condition: "moment".into(),
        order,
        fitted: rel,
        pass: rel <= cfg.moment_tol,
    }
}

fn support_condition(f: &SampledSignal, g: &Geometry, cfg: &FrameCheckConfig) -> ConditionReport {
    let peak = f.max_abs();
    let outside = f
        .samples()
        .iter()
        .enumerate()
        .filter(|(i, _)| !g.in_3q(f.point(*i)))
        .map(|(_, v)| v.abs())
        .fold(0.0, f64::max);
    let rel = if peak > 0.0 { outside / peak } else { 0.0 };
    ConditionReport {
        condition: "support".into(),
        order: 0,
        fitted: rel,
        pass: rel <= cfg.support_tol,
    }
}

/// Checks a sampled function against the molecule, atom or wavelet
/// conditions for the cube `q` and reports the smallest feasible constants.
pub fn verify_frame_decay(
    f: &SampledSignal,
    kind: FrameKind,
    q: &DyadicCube,
    cfg: &FrameCheckConfig,
) -> Result<FrameReport> {
    let g = Geometry::new(f, q)?;
    let mut conditions = Vec::new();
    match kind {
        FrameKind::Molecule(m) => {
            conditions.push(decay_condition(f, &g, m.l.max(m.l2), cfg));
            for order in 1..=m.r1 {
                conditions.push(derivative_condition(f, &g, order, m.l, cfg)?);
            }
            for order in 0..m.r2 {
                conditions.push(moment_condition(f, &g, order, cfg));
            }
        }
        FrameKind::Atom(a) => {
            conditions.push(support_condition(f, &g, cfg));
            let bound = f.max_abs();
            conditions.push(ConditionReport {
                condition: "bound".into(),
                order: 0,
                fitted: bound,
                pass: bound.is_finite(),
            });
            for order in 1..=a.r1 {
                conditions.push(derivative_condition(f, &g, order, 0.0, cfg)?);
            }
            for order in 0..a.r2 {
                conditions.push(moment_condition(f, &g, order, cfg));
            }
        }
        FrameKind::Wavelet { r, l } => {
            if !(l > 1.0) {
                return Err(Error::param(format!("wavelet decay L = {l} must exceed n")));
            }
            conditions.push(decay_condition(f, &g, l.max(2.0 + r as f64), cfg));
            for order in 1..=r {
                conditions.push(derivative_condition(f, &g, order, l, cfg)?);
            }
            for order in 0..r {
                conditions.push(moment_condition(f, &g, order, cfg));
            }
        }
    }
    let pass = conditions.iter().all(|c| c.pass);
    Ok(FrameReport {
        cube: q.clone(),
        kind,
        conditions,
        pass,
    })
}

/// Samples `ψ_Q` for an orthonormal wavelet, with unit peak normalization
/// `ψ(l(Q)^{-1}(x − x_Q))`.
pub fn sample_wavelet(
    basis: &WaveletBasis,
    q: &DyadicCube,
    len: usize,
    period: f64,
) -> Result<SampledSignal> {
    let mut c = CoeffField::new((q.level, q.level), Region::interval(0.0, period)?)?;
    c.insert(q.clone(), 1.0)?;
    dwt_synthesize(&c, basis, len)
}

/// Verifies `ψ_Q` against the wavelet conditions with smoothness `r`.
/// Orders beyond the derivatives the basis actually has are refused.
pub fn verify_wavelet(
    basis: &WaveletBasis,
    r: u32,
    l: f64,
    q: &DyadicCube,
    len: usize,
    period: f64,
    cfg: &FrameCheckConfig,
) -> Result<FrameReport> {
    if r as usize > basis.derivative_order() {
        return Err(Error::Unsupported(format!(
            "r = {r} exceeds the {} bounded derivatives of the {}-moment wavelet",
            basis.derivative_order(),
            basis.moments()
        )));
    }
    if r as usize > basis.moments() {
        return Err(Error::Unsupported(format!(
            "r = {r} exceeds {} vanishing moments",
            basis.moments()
        )));
    }
    let f = sample_wavelet(basis, q, len, period)?;
    verify_frame_decay(&f, FrameKind::Wavelet { r, l }, q, cfg)
}

/// A family `{f_Q}` generated by `f_Q(x) = f(l(Q)^{-1}(x − x_Q))`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "family")]
pub enum Family {
    /// Analysis function of the LP pair of the given order.
    Lp { order: u32 },
    /// Daubechies wavelet with the given number of vanishing moments.
    Wavelet { moments: usize },
}

impl Family {
    fn sample(&self, level: i32, len: usize, period: f64) -> Result<Vec<f64>> {
        let mut c = CoeffField::new((level, level), Region::interval(0.0, period)?)?;
        c.insert(DyadicCube::new_1d(level, 0), 1.0)?;
        let s = match self {
            Family::Lp { order } => synthesize(&c, &LpPair::new(*order)?, len)?,
            Family::Wavelet { moments } => dwt_synthesize(&c, &WaveletBasis::new(*moments)?, len)?,
        };
        Ok(s.into_samples())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GramConfig {
    pub analysis: Family,
    pub synthesis: Family,
    pub r1: u32,
    pub r2: u32,
    pub l: f64,
    pub levels: (i32, i32),
    pub period: f64,
    pub len: usize,
    /// Spatial windows `|x_P − x_R| ≤ W max(l(P), l(R))`, each compared
    /// with the next.
    pub windows: Vec<f64>,
    pub growth_tol: f64,
}

impl Default for GramConfig {
    fn default() -> Self {
        Self {
            analysis: Family::Lp { order: 6 },
            synthesis: Family::Wavelet { moments: 10 },
            r1: 3,
            r2: 3,
            l: 4.0,
            levels: (0, 6),
            period: 32.0,
            len: 1 << 15,
            windows: vec![24.0, 48.0],
            growth_tol: 0.05,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GramReport {
    pub config: GramConfig,
    /// Smallest constant fitted over each window.
    pub constants: Vec<f64>,
    /// Level pair `(j_P, j_R)` and offset `x_R − x_P` attaining the largest
    /// window's constant.
    pub worst: (i32, i32, f64),
    pub max_growth: f64,
    pub pass: bool,
}

/// `∫ a(x) b(x − m h) dx` for every grid shift `m`.
fn correlation(a: &[f64], b: &[f64], h: f64) -> Vec<f64> {
    let n = a.len();
    let (sa, sb) = (spectral::spectrum(a), spectral::spectrum(b));
    let prod: Vec<Complex64> = sa
        .iter()
        .zip(&sb)
        .map(|(x, y)| x * y.conj() * (n as f64 * h))
        .collect();
    spectral::synthesize_real(prod)
}

/// Fits the constant of the two-sided pairing bound between the analysis
/// family `φ_P` and the synthesis family `ϕ_R` over growing spatial windows.
pub fn gram_decay_check(cfg: &GramConfig) -> Result<GramReport> {
    let (jmin, jmax) = cfg.levels;
    if jmin > jmax || cfg.windows.is_empty() {
        return Err(Error::param(
            "gram check needs levels and at least one window",
        ));
    }
    if pow2f(jmin) * cfg.period < 1.0 {
        return Err(Error::param("coarsest level exceeds the period"));
    }
    let h = cfg.period / cfg.len as f64;
    let sample_all = |fam: Family| -> Result<Vec<Vec<f64>>> {
        (jmin..=jmax)
            .map(|j| fam.sample(j, cfg.len, cfg.period))
            .collect()
    };
    let phi = sample_all(cfg.analysis)?;
    let vphi = sample_all(cfg.synthesis)?;
    let pairs: Vec<(i32, i32)> = (jmin..=jmax)
        .flat_map(|a| (jmin..=jmax).map(move |b| (a, b)))
        .collect();
    // per level pair: (constant, offset) for each window
    let fitted: Vec<Vec<(f64, f64)>> = pairs
        .par_iter()
        .map(|&(jp, jr)| {
            let corr = correlation(&phi[(jp - jmin) as usize], &vphi[(jr - jmin) as usize], h);
            let fine = jp.max(jr);
            let stride = ((pow2f(-fine)) / h).round() as usize;
            let mut best = vec![(0.0f64, 0.0f64); cfg.windows.len()];
            for m in (0..cfg.len).step_by(stride.max(1)) {
                let d = torus_offset(m as f64 * h, 0.0, cfg.period);
                let (value, envelope) = if jp >= jr {
                    let v = pow2f(jp) * corr[m].abs();
                    let e = pow2f(-(jp - jr)).powi(cfg.r1 as i32)
                        * (1.0 + pow2f(jr) * d.abs()).powf(-cfg.l);
                    (v, e)
                } else {
                    let v = pow2f(jr) * corr[m].abs();
                    let e = pow2f(-(jr - jp)).powi(cfg.r2 as i32)
                        * (1.0 + pow2f(jp) * d.abs()).powf(-cfg.l);
                    (v, e)
                };
                let ratio = value / envelope;
                for (w, slot) in cfg.windows.iter().zip(best.iter_mut()) {
                    if d.abs() <= *w * pow2f(-jp.min(jr)) + 1e-12 && ratio > slot.0 {
                        *slot = (ratio, d);
                    }
                }
            }
            best
        })
        .collect();
    let mut constants = vec![0.0f64; cfg.windows.len()];
    let mut worst = (jmin, jmin, 0.0);
    for (&(jp, jr), best) in pairs.iter().zip(&fitted) {
        for (w, &(c, d)) in best.iter().enumerate() {
            if c > constants[w] {
                constants[w] = c;
                if w + 1 == cfg.windows.len() {
                    worst = (jp, jr, d);
                }
            }
        }
    }
    let max_growth = constants
        .windows(2)
        .map(|w| if w[0] > 0.0 { w[1] / w[0] - 1.0 } else { 0.0 })
        .fold(0.0, f64::max);
    let pass = max_growth <= cfg.growth_tol && constants.iter().all(|c| c.is_finite());
    Ok(GramReport {
        config: cfg.clone(),
        constants,
        worst,
        max_growth,
        pass,
    })
}

fn pow2f(j: i32) -> f64 {
    2f64.powi(j)
}

/// One smooth atom, stored on its grid window `start .. start + values.len()`
/// (indices taken modulo the grid length).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub cube: DyadicCube,
    pub coefficient: f64,
    pub start: i64,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AtomicDecomposition {
    pub period: f64,
    pub len: usize,
    pub r1: u32,
    pub requested_r2: u32,
    /// Moment order actually achieved; below `requested_r2` when the
    /// correction was ill-conditioned.
    pub r2: u32,
    pub atoms: Vec<Atom>,
    /// The new coefficients `c'(Q)`.
    pub coeffs: CoeffField,
}

impl AtomicDecomposition {
    /// `a_Q` on the full grid.
    pub fn atom_signal(&self, atom: &Atom) -> Result<SampledSignal> {
        let mut v = vec![0.0; self.len];
        for (i, x) in atom.values.iter().enumerate() {
            v[(atom.start + i as i64).rem_euclid(self.len as i64) as usize] += x;
        }
        SampledSignal::new(v, self.period)
    }

    /// `Σ_Q c'(Q) a_Q`.
    pub fn reconstruct(&self) -> Result<SampledSignal> {
        let mut v = vec![0.0; self.len];
        for atom in &self.atoms {
            for (i, x) in atom.values.iter().enumerate() {
                v[(atom.start + i as i64).rem_euclid(self.len as i64) as usize] +=
                    atom.coefficient * x;
            }
        }
        SampledSignal::new(v, self.period)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtomicConfig {
    pub r1: u32,
    pub r2: u32,
    pub len: usize,
    /// Smallest admissible `|Θ_i|` on the support of `φ̂_i`, relative to its
    /// peak.
    pub min_symbol: f64,
}

impl Default for AtomicConfig {
    fn default() -> Self {
        Self {
            r1: 2,
            r2: 2,
            len: 1 << 12,
            min_symbol: 1e-12,
        }
    }
}

/// Kernel `θ_i` on grid offsets `−half ..= half`: the `r₂`-th centered
/// difference of the bump `(1 − (x/a)²)^M`, `a < l`, normalized to unit
/// `L¹` norm. Its discrete moments of order `< r₂` vanish.
fn kernel(side: f64, h: f64, r1: u32, r2: u32) -> (i64, Vec<f64>) {
    let exponent = (r1 + r2 + 3) as i32;
    let reach = (r2 as i64 + 1) / 2 + 1;
    let half = (side / h).round() as i64 - 1;
    let a = (half - reach) as f64 * h;
    let bump = |n: i64| {
        let y = n as f64 * h / a;
        if y.abs() < 1.0 {
            (1.0 - y * y).powi(exponent)
        } else {
            0.0
        }
    };
    // forward difference shifted by ⌊r₂/2⌋
    let shift = (r2 / 2) as i64;
    let mut theta: Vec<f64> = (-half..=half)
        .map(|n| {
            (0..=r2)
                .map(|k| {
                    let sign = if (r2 - k) % 2 == 0 { 1.0 } else { -1.0 };
                    sign * binomial(r2, k) * bump(n + k as i64 - shift)
                })
                .sum()
        })
        .collect();
    let mass: f64 = theta.iter().map(|v| v.abs()).sum::<f64>() * h;
    theta.iter_mut().for_each(|v| *v /= mass);
    (half, theta)
}

/// Rewrites `f = Σ_Q c(Q) φ_Q` as `Σ_Q c'(Q) a_Q` with smooth atoms
/// supported in `3Q`.
///
/// With `θ_i` compactly supported and moment-free and `Θ_i` its discrete
/// symbol, `G_i = F^{-1}[φ̂_i² Θ_i^{-1} F f]` gives
/// `f = Σ_i Σ_{Q at level i} ∫_Q θ_i(· − y) G_i(y) dy`, and each term is
/// `c'(Q) a_Q` with `c'(Q) = sup_Q |G_i|`.
pub fn atomic_decompose(
    c: &CoeffField,
    pair: &LpPair,
    cfg: &AtomicConfig,
) -> Result<AtomicDecomposition> {
    let period = c.spatial_window().upper[0];
    let f = synthesize(c, pair, cfg.len)?;
    let (jmin, jmax) = c.level_window();
    let (lo, hi) = (jmin - 1, jmax + 1);
    if 3.0 * pow2f(-lo) > period {
        return Err(Error::param(format!(
            "level {lo} is too coarse for 3Q on a torus of period {period}"
        )));
    }
    let h = f.step();
    if pow2f(-hi) / h < 4.0 * (cfg.r2 as f64 + 2.0) {
        return Err(Error::Resolution(format!(
            "level {hi} needs a finer grid than {} points",
            cfg.len
        )));
    }
    let spec = spectral::spectrum(f.samples());
    let n = cfg.len;
    let mut r2 = cfg.r2;
    loop {
        match decompose_with(&spec, pair, period, h, (lo, hi), cfg.r1, r2, cfg.min_symbol) {
            Ok((atoms, coeffs)) => {
                return Ok(AtomicDecomposition {
                    period,
                    len: n,
                    r1: cfg.r1,
                    requested_r2: cfg.r2,
                    r2,
                    atoms,
                    coeffs,
                })
            }
            Err(Error::IllConditioned { .. }) if r2 > 0 => r2 -= 1,
            Err(e) => return Err(e),
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn decompose_with(
    spec: &[Complex64],
    pair: &LpPair,
    period: f64,
    h: f64,
    levels: (i32, i32),
    r1: u32,
    r2: u32,
    min_symbol: f64,
) -> Result<(Vec<Atom>, CoeffField)> {
    let n = spec.len();
    let mut atoms = Vec::new();
    let mut coeffs = CoeffField::new(levels, Region::interval(0.0, period)?)?;
    for i in levels.0..=levels.1 {
        let side = pow2f(-i);
        let (half, theta) = kernel(side, h, r1, r2);
        let mut placed = vec![0.0; n];
        for (t, v) in theta.iter().enumerate() {
            placed[(t as i64 - half).rem_euclid(n as i64) as usize] += v;
        }
        let symbol: Vec<Complex64> = spectral::spectrum(&placed)
            .iter()
            .map(|z| z * (n as f64 * h))
            .collect();
        let peak = symbol.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let mut block = vec![Complex64::new(0.0, 0.0); n];
        for m in 0..n {
            let w = pair.level_symbol(i, spectral::angular(m, n, period));
            if w == 0.0 {
                continue;
            }
            let s = symbol[m].norm();
            if s < min_symbol * peak {
                return Err(Error::IllConditioned {
                    cond: peak / s.max(f64::MIN_POSITIVE),
                });
            }
            block[m] = spec[m] * (w * w) / symbol[m];
        }
        let g = spectral::synthesize_real(block);
        let stride = (side / h).round() as i64;
        let count = (period / side).round() as i64;
        for k in 0..count {
            let cells = (k * stride)..((k + 1) * stride);
            let sup = cells
                .clone()
                .map(|m| g[m as usize].abs())
                .fold(0.0, f64::max);
            if sup == 0.0 {
                continue;
            }
            let start = k * stride - half;
            let width = (stride + 2 * half) as usize;
            let mut values = vec![0.0; width];
            for m in cells {
                let gm = g[m as usize] * h / sup;
                for (t, th) in theta.iter().enumerate() {
                    // x = m + t − half
                    values[(m - k * stride) as usize + t] += th * gm;
                }
            }
            let cube = DyadicCube::new_1d(i, k);
            coeffs.insert(cube.clone(), sup)?;
            atoms.push(Atom {
                cube,
                coefficient: sup,
                start,
                values,
            });
        }
    }
    Ok((atoms, coeffs))
}
