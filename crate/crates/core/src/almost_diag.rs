//! Almost-diagonal cube matrices: certification, application and an
//! empirical boundedness harness on the truncated sequence spaces.

use std::collections::HashMap;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::{decay_for, generate, EnsembleConfig};
use crate::error::{Error, Result};
use crate::field::{CoeffField, NormConfig, WeightEval};
use crate::lattice::{enumerate, DyadicCube, Region, TruncationBudget};
use crate::params::SpaceParams;
use crate::seed::SeedTree;

/// Decay exponents `(r₁, r₂, L)` and constant `C` of an almost-diagonal bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlmostDiagSpec {
    pub r1: f64,
    pub r2: f64,
    pub l: f64,
    pub c: f64,
}

impl AlmostDiagSpec {
    pub fn new(r1: f64, r2: f64, l: f64) -> Result<Self> {
        if !(r1 >= 0.0 && r2 >= 0.0 && l > 0.0) {
            return Err(Error::param(format!(
                "invalid almost-diagonal exponents ({r1}, {r2}, {l})"
            )));
        }
        Ok(Self { r1, r2, l, c: 1.0 })
    }

    pub fn with_constant(self, c: f64) -> Self {
        Self { c, ..self }
    }

    /// The bound on `|a_{QP}|`:
    /// `C (l(Q)/l(P))^{r₁} (1 + l(P)^{-1}|x_Q − x_P|)^{-L}` if `l(Q) ≤ l(P)`,
    /// `C (l(P)/l(Q))^{r₂} (1 + l(Q)^{-1}|x_Q − x_P|)^{-L}` otherwise.
    pub fn envelope(&self, q: &DyadicCube, p: &DyadicCube) -> f64 {
        let d = corner_dist(q, p);
        let (lq, lp) = (q.side(), p.side());
        if lq <= lp {
            self.c * (lq / lp).powf(self.r1) * (1.0 + d / lp).powf(-self.l)
        } else {
            self.c * (lp / lq).powf(self.r2) * (1.0 + d / lq).powf(-self.l)
        }
    }
}

/// `|x_Q − x_P|` between lower-left corners; cubes of different dimension
/// are infinitely far apart.
fn corner_dist(q: &DyadicCube, p: &DyadicCube) -> f64 {
    if q.index.len() != p.index.len() {
        return f64::INFINITY;
    }
    let (sq, sp) = (q.side(), p.side());
    q.index
        .iter()
        .zip(&p.index)
        .map(|(&a, &b)| {
            let d = a as f64 * sq - b as f64 * sp;
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

type Generator = dyn Fn(&DyadicCube, &DyadicCube) -> f64 + Send + Sync;

/// A matrix `a_{QP}` given by a pure generator, truncated to a level window
/// and a spatial region. Entries outside the window are zero.
#[derive(Clone)]
pub struct CubeMatrix {
    generator: Arc<Generator>,
    pub level_window: (i32, i32),
    pub region: Region,
}

impl std::fmt::Debug for CubeMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CubeMatrix")
            .field("level_window", &self.level_window)
            .field("region", &self.region)
            .finish()
    }
}

impl CubeMatrix {
    pub fn new(
        generator: impl Fn(&DyadicCube, &DyadicCube) -> f64 + Send + Sync + 'static,
        level_window: (i32, i32),
        region: Region,
    ) -> Self {
        Self {
            generator: Arc::new(generator),
            level_window,
            region,
        }
    }

    pub fn identity(level_window: (i32, i32), region: Region) -> Self {
        Self::new(|q, p| if q == p { 1.0 } else { 0.0 }, level_window, region)
    }

    /// `a_{QP}`, zero outside the window.
    pub fn entry(&self, q: &DyadicCube, p: &DyadicCube) -> f64 {
        if self.in_window(q) && self.in_window(p) {
            (self.generator)(q, p)
        } else {
            0.0
        }
    }

    fn in_window(&self, q: &DyadicCube) -> bool {
        (self.level_window.0..=self.level_window.1).contains(&q.level) && q.intersects(&self.region)
    }

    /// Every cube of the window, coarse levels first.
    pub fn cubes(&self, budget: &TruncationBudget) -> Result<Vec<DyadicCube>> {
        let mut out = Vec::new();
        for level in self.level_window.0..=self.level_window.1 {
            out.extend(enumerate(level, &self.region, budget)?);
        }
        Ok(out)
    }
}

/// Result of [`verify_almost_diagonal`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    /// Smallest `C` for which every windowed entry obeys the envelope.
    pub smallest_c: f64,
    /// The worst pair when `smallest_c > 0`.
    pub worst: Option<(DyadicCube, DyadicCube)>,
    pub pairs: usize,
    pub level_window: (i32, i32),
    /// `smallest_c ≤ spec.c`.
    pub pass: bool,
}

/// Checks both regimes of the envelope over every pair of windowed cubes.
pub fn verify_almost_diagonal(
    a: &CubeMatrix,
    spec: &AlmostDiagSpec,
    budget: &TruncationBudget,
) -> Result<VerifyReport> {
    let unit = spec.with_constant(1.0);
    let cubes = a.cubes(budget)?;
    let (c, worst) = cubes
        .par_iter()
        .map(|q| {
            let mut best = (0.0f64, None);
            for p in &cubes {
                let v = a.entry(q, p).abs();
                if v > 0.0 {
                    let r = v / unit.envelope(q, p);
                    if r > best.0 {
                        best = (r, Some((q.clone(), p.clone())));
                    }
                }
            }
            best
        })
        .reduce(|| (0.0, None), |x, y| if y.0 > x.0 { y } else { x });
    Ok(VerifyReport {
        smallest_c: c,
        worst,
        pairs: cubes.len() * cubes.len(),
        level_window: a.level_window,
        pass: c <= spec.c * (1.0 + 1e-12),
    })
}

/// The pieces `A₀c, A₁c, A₂c` of `Ac` relative to a reference level `j_P`,
/// plus the rows coarser than the reference, which none of them cover.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitParts {
    pub reference_level: i32,
    /// `l(R) ≤ l(R′) ≤ l(P)`.
    pub a0: CoeffField,
    /// `l(R′) < l(R) ≤ l(P)`.
    pub a1: CoeffField,
    /// `l(R) ≤ l(P) < l(R′)`.
    pub a2: CoeffField,
    /// `l(R) > l(P)`.
    pub rest: CoeffField,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Applied {
    pub total: CoeffField,
    pub parts: Option<SplitParts>,
}

fn part_index(row: i32, col: i32, reference: i32) -> usize {
    if row < reference {
        3
    } else if col > row {
        1
    } else if col >= reference {
        0
    } else {
        2
    }
}

/// `(Ac)(Q) = Σ_P a_{QP} c(P)` for every `Q` of the matrix window.
///
/// With `split = Some(j)`, also returns the partition of the sum by the
/// levels of `R` and `R′` relative to a reference cube of level `j`.
pub fn apply_matrix(
    a: &CubeMatrix,
    c: &CoeffField,
    split: Option<i32>,
    budget: &TruncationBudget,
) -> Result<Applied> {
    if c.dim() != a.region.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.region.dim(),
            got: c.dim(),
        });
    }
    let (lo, hi) = c.level_window();
    if lo < a.level_window.0 || hi > a.level_window.1 {
        return Err(Error::OutsideWindow(format!(
            "field levels [{lo}, {hi}] exceed matrix window {:?}",
            a.level_window
        )));
    }
    let rows = a.cubes(budget)?;
    let cols: Vec<(DyadicCube, f64)> = c.iter().map(|(p, v)| (p.clone(), v)).collect();
    let sums: Vec<[f64; 4]> = rows
        .par_iter()
        .map(|q| {
            let mut acc = [0.0; 4];
            for (p, v) in &cols {
                let e = a.entry(q, p);
                if e != 0.0 {
                    let slot = split.map_or(0, |r| part_index(q.level, p.level, r));
                    acc[slot] += e * v;
                }
            }
            acc
        })
        .collect();
    let empty = CoeffField::new(a.level_window, a.region.clone())?;
    let mut total = empty.clone();
    let mut parts = [empty.clone(), empty.clone(), empty.clone(), empty];
    for (q, s) in rows.iter().zip(&sums) {
        total.insert(q.clone(), s.iter().sum())?;
        if split.is_some() {
            for (f, v) in parts.iter_mut().zip(s) {
                f.insert(q.clone(), *v)?;
            }
        }
    }
    let parts = split.map(|reference_level| {
        let [a0, a1, a2, rest] = parts;
        SplitParts {
            reference_level,
            a0,
            a1,
            a2,
            rest,
        }
    });
    Ok(Applied { total, parts })
}

/// Knobs of the boundedness harness.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HarnessConfig {
    pub ensemble_size: usize,
    pub density: f64,
    /// Members whose signs follow the matrix sign mask.
    pub aligned_members: usize,
    pub jmin: i32,
    pub depths: Vec<i32>,
    /// Extra amplitude decay of the ensemble beyond the space's threshold.
    pub margin: f64,
    /// Allowed ratio growth over the final depth step.
    pub growth_tol: f64,
    /// Distance of the canonical exponents above the boundedness thresholds.
    pub excess: f64,
    pub norm: NormConfig,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        Self {
            ensemble_size: 12,
            density: 0.15,
            aligned_members: 4,
            jmin: 0,
            depths: vec![6, 8, 10],
            margin: 0.4,
            growth_tol: 0.05,
            excess: 1.5,
            norm: NormConfig {
                weight_eval: WeightEval::Centers,
                ..NormConfig::default()
            },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Bounded,
    Growing,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HarnessReport {
    pub spec: AlmostDiagSpec,
    pub params: SpaceParams,
    pub seed: u64,
    pub depths: Vec<i32>,
    /// Level window of the matrix at each depth; entries outside are zero.
    pub windows: Vec<(i32, i32)>,
    /// Largest `‖Ac‖ / ‖c‖` over the ensemble at each depth.
    pub max_ratios: Vec<f64>,
    /// Relative growth of the ratio over the final depth step.
    pub growth: f64,
    pub verdict: Verdict,
}

/// Sufficient exponents for boundedness on the space of `params`:
/// `(r₁, r₂, L)` must strictly exceed the returned values.
pub fn boundedness_thresholds(params: &SpaceParams) -> (f64, f64, f64) {
    let j = params.compute_j();
    let n_over_p = if params.p.is_infinite() {
        0.0
    } else {
        params.n as f64 / params.p
    };
    let (s, sp, sigma) = (params.s, params.s_prime, params.sigma);
    if params.tilde {
        let pos = sigma.max(0.0);
        (
            (sp + pos).max(pos + s + sp - n_over_p),
            j - sp - sigma.min(0.0),
            j,
        )
    } else {
        (sp.max(sigma + s + sp - n_over_p), j - sp, j)
    }
}

/// Exponents `excess` above every threshold (and at least 0).
pub fn canonical_spec(params: &SpaceParams, excess: f64) -> Result<AlmostDiagSpec> {
    let (r1, r2, l) = boundedness_thresholds(params);
    AlmostDiagSpec::new((r1 + excess).max(0.0), (r2 + excess).max(0.0), l + excess)
}

/// Ten parameter points covering both families, plain and weighted
/// spaces, and `p, q` on both sides of 1.
pub fn standard_points() -> Vec<SpaceParams> {
    use crate::params::Family::{B, F};
    vec![
        SpaceParams::new(B, 0.1, 0.2, 0.1, 2.0, 2.0),
        SpaceParams::new(F, 0.1, 0.2, 0.1, 2.0, 1.0),
        SpaceParams::new(B, 0.2, 0.3, -0.2, 2.0, 1.0).with_tilde(true),
        SpaceParams::new(F, 0.2, 0.3, 0.2, 1.5, 2.0).with_tilde(true),
        SpaceParams::new(B, 0.0, 0.4, 0.3, 1.0, 2.0),
        SpaceParams::new(F, 0.1, 0.1, 0.0, 1.0, 1.0),
        SpaceParams::new(B, 0.3, 0.2, 0.1, 1.0, 1.0).with_tilde(true),
        SpaceParams::new(F, 0.1, 0.4, -0.1, 2.0, 2.0).with_tilde(true),
        SpaceParams::new(B, 0.1, 0.3, 0.2, 3.0, 2.0).with_tilde(true),
        SpaceParams::new(F, 0.1, 0.25, 0.2, 3.0, 1.5).with_tilde(true),
    ]
}

/// Pseudo-random signs `ε(Q)`, one derived stream per level.
pub fn sign_mask(seed: &SeedTree, cubes: &[DyadicCube]) -> HashMap<DyadicCube, f64> {
    let mut streams = HashMap::new();
    cubes
        .iter()
        .map(|q| {
            let rng = streams
                .entry(q.level)
                .or_insert_with(|| seed.derive_index("sign-level", q.level as i64 as u64).rng());
            (q.clone(), if rng.gen::<bool>() { 1.0 } else { -1.0 })
        })
        .collect()
}

/// Largest `‖Ac‖ / ‖c‖` over a seeded ensemble for each depth, with
/// `matrix(depth)` supplying the truncated operator.
///
/// The first `aligned_members` fields carry the signs `mask(P)` so that no
/// cancellation hides growth of sign-patterned matrices.
pub fn ratio_profile(
    matrix: impl Fn(i32) -> CubeMatrix,
    mask: Option<&HashMap<DyadicCube, f64>>,
    params: &SpaceParams,
    seed: u64,
    cfg: &HarnessConfig,
) -> Result<Vec<f64>> {
    params.validate()?;
    let deepest = *cfg
        .depths
        .iter()
        .max()
        .ok_or_else(|| Error::param("no depths"))?;
    let mut ens = EnsembleConfig::unit(cfg.ensemble_size, cfg.density, (cfg.jmin, deepest), 0.0);
    ens.region = Region::unit(params.n, 1.0);
    ens.decay = decay_for(&[params], cfg.margin);
    ens.aligned_members = cfg.aligned_members;
    let tree = SeedTree::new(seed).derive("almost-diagonal");
    let fields = (0..cfg.ensemble_size)
        .map(|i| {
            let f = generate(&ens, &tree, i, &cfg.norm.budget)?;
            Ok(match mask {
                Some(m) if i < cfg.aligned_members => {
                    f.map(|q, v| v * m.get(q).copied().unwrap_or(1.0))
                }
                _ => f,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = Vec::with_capacity(cfg.depths.len());
    for &d in &cfg.depths {
        let a = matrix(d);
        let rows = a.cubes(&cfg.norm.budget)?;
        let truncated = fields
            .iter()
            .map(|f| f.with_level_window((cfg.jmin, d)))
            .collect::<Result<Vec<_>>>()?;
        let mut needed: Vec<DyadicCube> = truncated
            .iter()
            .flat_map(|f| f.iter().map(|(p, _)| p.clone()))
            .collect();
        needed.sort();
        needed.dedup();
        let columns: HashMap<DyadicCube, Vec<f64>> = needed
            .par_iter()
            .map(|p| (p.clone(), rows.iter().map(|q| a.entry(q, p)).collect()))
            .collect();
        let ratios = truncated
            .par_iter()
            .map(|c| {
                let mut acc = vec![0.0; rows.len()];
                for (p, v) in c.iter() {
                    for (s, e) in acc.iter_mut().zip(&columns[p]) {
                        *s += e * v;
                    }
                }
                let mut ac = CoeffField::new(a.level_window, a.region.clone())?;
                for (q, v) in rows.iter().zip(acc) {
                    ac.insert(q.clone(), v)?;
                }
                let num = ac.space_norm(params, &cfg.norm)?.value;
                let den = c.space_norm(params, &cfg.norm)?.value;
                Ok(if den > 0.0 { num / den } else { 0.0 })
            })
            .collect::<Result<Vec<f64>>>()?;
        out.push(ratios.into_iter().fold(0.0, f64::max));
    }
    Ok(out)
}

fn final_growth(ratios: &[f64]) -> f64 {
    match ratios {
        [.., a, b] if *a > 0.0 => b / a - 1.0,
        _ => 0.0,
    }
}

/// Runs the envelope matrix of `spec` with a rank-one sign mask
/// `ε(Q)ε(P)` through [`ratio_profile`].
pub fn boundedness_harness(
    spec: &AlmostDiagSpec,
    params: &SpaceParams,
    seed: u64,
    cfg: &HarnessConfig,
) -> Result<HarnessReport> {
    let deepest = *cfg
        .depths
        .iter()
        .max()
        .ok_or_else(|| Error::param("no depths"))?;
    let region = Region::unit(params.n, 1.0);
    let all = CubeMatrix::identity((cfg.jmin, deepest), region.clone()).cubes(&cfg.norm.budget)?;
    let mask = Arc::new(sign_mask(&SeedTree::new(seed).derive("sign-mask"), &all));
    let env = *spec;
    let make = |d: i32| {
        let m = Arc::clone(&mask);
        CubeMatrix::new(
            move |q, p| {
                env.envelope(q, p)
                    * m.get(q).copied().unwrap_or(1.0)
                    * m.get(p).copied().unwrap_or(1.0)
            },
            (cfg.jmin, d),
            region.clone(),
        )
    };
    let max_ratios = ratio_profile(make, Some(&mask), params, seed, cfg)?;
    let growth = final_growth(&max_ratios);
    Ok(HarnessReport {
        spec: *spec,
        params: params.clone(),
        seed,
        depths: cfg.depths.clone(),
        windows: cfg.depths.iter().map(|&d| (cfg.jmin, d)).collect(),
        max_ratios,
        growth,
        verdict: if growth <= cfg.growth_tol {
            Verdict::Bounded
        } else {
            Verdict::Growing
        },
    })
}

/// The canonical matrix above the thresholds, and the same matrix with
/// `r₂` lowered to `0.5` below its threshold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdCheck {
    pub bounded: HarnessReport,
    pub contrapositive: HarnessReport,
    /// First verdict bounded, second growing.
    pub pass: bool,
}

pub fn threshold_check(
    params: &SpaceParams,
    seed: u64,
    cfg: &HarnessConfig,
) -> Result<ThresholdCheck> {
    let spec = canonical_spec(params, cfg.excess)?;
    let (_, r2_min, _) = boundedness_thresholds(params);
    let low = r2_min - 0.5;
    if low < 0.0 {
        return Err(Error::param(format!(
            "r₂ threshold {r2_min} leaves no nonnegative violating exponent"
        )));
    }
    let bounded = boundedness_harness(&spec, params, seed, cfg)?;
    let contrapositive =
        boundedness_harness(&AlmostDiagSpec { r2: low, ..spec }, params, seed, cfg)?;
    let pass = bounded.verdict == Verdict::Bounded && contrapositive.verdict == Verdict::Growing;
    Ok(ThresholdCheck {
        bounded,
        contrapositive,
        pass,
    })
}
