//! Sparse cube-indexed coefficient sequences and their sequence-space norms.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{BufRead, Write};
use std::ops::Bound;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::Accumulator;
use crate::error::{Error, Result};
use crate::lattice::{base_chain, enumerate, pow2, DyadicCube, Region, TruncationBudget};
use crate::params::{Family, SpaceParams};

/// Where the 2-microlocal weight `(2^{-i} + |x₀ − x|)^{-σ}` is evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum WeightEval {
    /// Midpoints of a uniform grid `quad_refine_bits` levels below the
    /// finest window level.
    Nodes,
    /// Center of the coefficient's own cube.
    Centers,
}

/// Truncation and quadrature knobs for norm evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormConfig {
    /// Number of outer levels coarser than `j_min` included in the sups.
    pub outer_levels: i32,
    /// Level distance used by the plateau test.
    pub plateau_span: i32,
    /// Growth factor over `plateau_span` levels that sets the divergence flag.
    pub divergence_factor: f64,
    pub quad_refine_bits: i32,
    pub weight_eval: WeightEval,
    pub budget: TruncationBudget,
}

impl Default for NormConfig {
    fn default() -> Self {
        Self {
            outer_levels: 4,
            plateau_span: 3,
            divergence_factor: 1.5,
            quad_refine_bits: 2,
            weight_eval: WeightEval::Nodes,
            budget: TruncationBudget::default(),
        }
    }
}

/// A truncated norm together with its divergence diagnostic.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormValue {
    pub value: f64,
    pub diverging: bool,
    /// `(level, sup attained at this outer level)`.
    pub levels: Vec<(i32, f64)>,
    /// `(level, running sup from the finest level down to this one)`.
    pub profile: Vec<(i32, f64)>,
}

impl NormValue {
    pub(crate) fn zero() -> Self {
        Self {
            value: 0.0,
            diverging: false,
            levels: Vec::new(),
            profile: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoeffField {
    n: usize,
    level_window: (i32, i32),
    spatial: Region,
    entries: BTreeMap<DyadicCube, f64>,
}

impl CoeffField {
    pub fn new(level_window: (i32, i32), spatial: Region) -> Result<Self> {
        if level_window.0 > level_window.1 {
            return Err(Error::param("empty level window"));
        }
        Ok(Self {
            n: spatial.dim(),
            level_window,
            spatial,
            entries: BTreeMap::new(),
        })
    }

    /// Field on `[0, 1)^n` with levels `[jmin, jmax]`.
    pub fn unit(n: usize, jmin: i32, jmax: i32) -> Result<Self> {
        Self::new((jmin, jmax), Region::unit(n, 1.0))
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn level_window(&self) -> (i32, i32) {
        self.level_window
    }

    pub fn spatial_window(&self) -> &Region {
        &self.spatial
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Sets `c(Q)`; zero amplitudes remove the entry.
    pub fn insert(&mut self, q: DyadicCube, amplitude: f64) -> Result<()> {
        if q.dim() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: q.dim(),
            });
        }
        if q.level < self.level_window.0 || q.level > self.level_window.1 {
            return Err(Error::OutsideWindow(format!(
                "{q} (level window {:?})",
                self.level_window
            )));
        }
        if !q.intersects(&self.spatial) {
            return Err(Error::OutsideWindow(q.to_string()));
        }
        if !amplitude.is_finite() {
            return Err(Error::param("amplitude must be finite"));
        }
        if amplitude == 0.0 {
            self.entries.remove(&q);
        } else {
            self.entries.insert(q, amplitude);
        }
        Ok(())
    }

    pub fn get(&self, q: &DyadicCube) -> f64 {
        self.entries.get(q).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&DyadicCube, f64)> {
        self.entries.iter().map(|(q, &a)| (q, a))
    }

    /// Entries at one level, in index order.
    pub fn level_entries(&self, level: i32) -> impl Iterator<Item = (&DyadicCube, f64)> {
        let lo = DyadicCube::new(level, Vec::new());
        let hi = DyadicCube::new(level + 1, Vec::new());
        self.entries.range(lo..hi).map(|(q, &a)| (q, a))
    }

    /// Keyed cubes `R ⊆ p` at `level >= p.level`.
    pub fn entries_within(
        &self,
        p: &DyadicCube,
        level: i32,
    ) -> impl Iterator<Item = (&DyadicCube, f64)> + '_ {
        let shift = (level - p.level) as u32;
        let lo = DyadicCube::new(level, vec![p.index[0] << shift]);
        let hi = DyadicCube::new(level, vec![(p.index[0] + 1) << shift]);
        let p = p.clone();
        self.entries
            .range((Bound::Included(lo), Bound::Excluded(hi)))
            .filter(move |(q, _)| q.ancestor(p.level) == p)
            .map(|(q, &a)| (q, a))
    }

    /// The same coefficients with a different level window, dropping
    /// entries that fall outside it.
    pub fn with_level_window(&self, level_window: (i32, i32)) -> Result<Self> {
        let mut out = Self::new(level_window, self.spatial.clone())?;
        for (q, a) in self.iter() {
            if q.level >= level_window.0 && q.level <= level_window.1 {
                out.entries.insert(q.clone(), a);
            }
        }
        Ok(out)
    }

    pub fn map(&self, f: impl Fn(&DyadicCube, f64) -> f64) -> Self {
        let mut out = Self {
            entries: BTreeMap::new(),
            ..self.clone()
        };
        for (q, a) in self.iter() {
            let v = f(q, a);
            if v != 0.0 {
                out.entries.insert(q.clone(), v);
            }
        }
        out
    }

    pub fn scaled(&self, lambda: f64) -> Self {
        self.map(|_, a| lambda * a)
    }

    /// Entrywise sum; windows must agree.
    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.level_window != other.level_window || self.spatial != other.spatial {
            return Err(Error::param("fields have different windows"));
        }
        let mut out = self.clone();
        for (q, a) in other.iter() {
            let v = out.get(q) + a;
            if v == 0.0 {
                out.entries.remove(q);
            } else {
                out.entries.insert(q.clone(), v);
            }
        }
        Ok(out)
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.values().fold(0.0, |m, a| m.max(a.abs()))
    }

    /// Deepest level carrying an entry.
    pub fn deepest_level(&self) -> Option<i32> {
        self.entries.keys().next_back().map(|q| q.level)
    }
}

/// `(2^{-i} + |x₀ − x|)^{-σ}`.
#[inline]
pub fn microlocal_weight(level: i32, x0: &[f64], x: &[f64], sigma: f64) -> f64 {
    if sigma == 0.0 {
        return 1.0;
    }
    let d = x0
        .iter()
        .zip(x)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    (pow2(-level) + d).powf(-sigma)
}

/// Prepared evaluation state for one `(field, params)` pair.
struct Evaluator<'a> {
    field: &'a CoeffField,
    params: &'a SpaceParams,
    cfg: &'a NormConfig,
    /// Every ancestor-or-self of a keyed cube down to `floor`.
    shadow: HashSet<DyadicCube>,
    node_level: i32,
    /// B family: per keyed cube, `∫_R v^p` (or `sup_R v` when `p = ∞`).
    b_terms: HashMap<DyadicCube, f64>,
}

impl<'a> Evaluator<'a> {
    fn new(
        field: &'a CoeffField,
        params: &'a SpaceParams,
        cfg: &'a NormConfig,
        floor: i32,
    ) -> Result<Self> {
        params.validate()?;
        if params.n != field.n {
            return Err(Error::DimensionMismatch {
                expected: field.n,
                got: params.n,
            });
        }
        let mut shadow = HashSet::new();
        for q in field.entries.keys() {
            let mut level = q.level;
            while level >= floor {
                if !shadow.insert(q.ancestor(level)) {
                    break;
                }
                level -= 1;
            }
        }
        let node_level = field.level_window.1 + cfg.quad_refine_bits.max(0);
        let mut ev = Self {
            field,
            params,
            cfg,
            shadow,
            node_level,
            b_terms: HashMap::new(),
        };
        if params.family == Family::B {
            let terms: Vec<(DyadicCube, f64)> = field
                .entries
                .par_iter()
                .map(|(q, &a)| Ok((q.clone(), ev.b_term(q, a)?)))
                .collect::<Result<_>>()?;
            ev.b_terms = terms.into_iter().collect();
        }
        Ok(ev)
    }

    fn weighted(&self) -> bool {
        self.params.tilde && self.params.sigma != 0.0
    }

    fn amplitude(&self, q: &DyadicCube, a: f64) -> f64 {
        pow2(q.level).powf(self.params.s_prime) * a.abs()
    }

    fn nodes_under(&self, q: &DyadicCube) -> Result<Vec<DyadicCube>> {
        let level = self.node_level.max(q.level);
        let count = 1usize
            .checked_shl(((level - q.level) as usize * q.dim()) as u32)
            .unwrap_or(usize::MAX);
        if count > self.cfg.budget.max_cubes {
            return Err(Error::Budget(format!("{count} quadrature nodes under {q}")));
        }
        Ok(q.descendants(level))
    }

    fn b_term(&self, q: &DyadicCube, a: f64) -> Result<f64> {
        let v = self.amplitude(q, a);
        let p = self.params.p;
        if !self.weighted() {
            return Ok(if p.is_infinite() {
                v
            } else {
                v.powf(p) * q.volume()
            });
        }
        let (x0, sigma) = (&self.params.x0, self.params.sigma);
        match self.cfg.weight_eval {
            WeightEval::Centers => {
                let w = microlocal_weight(q.level, x0, &q.center(), sigma);
                Ok(if p.is_infinite() {
                    v * w
                } else {
                    (v * w).powf(p) * q.volume()
                })
            }
            WeightEval::Nodes => {
                let nodes = self.nodes_under(q)?;
                let mut acc = 0.0f64;
                for node in &nodes {
                    let w = microlocal_weight(q.level, x0, &node.center(), sigma);
                    if p.is_infinite() {
                        acc = acc.max(v * w);
                    } else {
                        acc += (v * w).powf(p) * node.volume();
                    }
                }
                Ok(acc)
            }
        }
    }

    fn levels_for(&self, p: &DyadicCube) -> Option<(i32, i32)> {
        let (jmin, jmax) = self.field.level_window;
        let i0 = p.level.max(jmin);
        (i0 <= jmax).then_some((i0, jmax))
    }

    fn block_norm(&self, p: &DyadicCube) -> Result<f64> {
        let Some((i0, i1)) = self.levels_for(p) else {
            return Ok(0.0);
        };
        if !self.shadow.contains(p) {
            return Ok(0.0);
        }
        let nlev = (i1 - i0 + 1) as usize;
        let mut acc = Accumulator::new(self.params.family, self.params.p, self.params.q, nlev);
        match self.params.family {
            Family::B => {
                for i in i0..=i1 {
                    for (r, _) in self.field.entries_within(p, i) {
                        acc.push_level_integral((i - i0) as usize, self.b_terms[r]);
                    }
                }
            }
            Family::F => {
                let mut stack = Vec::new();
                self.f_recurse(p, (i0, i1), &mut stack, &mut acc)?;
            }
        }
        Ok(acc.finish(p.side(), self.field.n))
    }

    /// Walks the keyed subtree of `r`; `stack` holds `(level, amplitude,
    /// center weight)` for keyed ancestors within the level range.
    fn f_recurse(
        &self,
        r: &DyadicCube,
        range: (i32, i32),
        stack: &mut Vec<(i32, f64, f64)>,
        acc: &mut Accumulator,
    ) -> Result<()> {
        let keyed = if r.level >= range.0 && r.level <= range.1 {
            self.field.entries.get(r).copied()
        } else {
            None
        };
        if let Some(a) = keyed {
            let w = if self.weighted() {
                microlocal_weight(r.level, &self.params.x0, &r.center(), self.params.sigma)
            } else {
                1.0
            };
            stack.push((r.level, self.amplitude(r, a), w));
        }
        let children: Vec<DyadicCube> = if r.level < range.1 {
            r.children()
        } else {
            Vec::new()
        };
        let live: Vec<&DyadicCube> = children
            .iter()
            .filter(|c| self.shadow.contains(*c))
            .collect();
        if live.is_empty() {
            self.f_leaf(r, range, stack, acc)?;
        } else {
            for c in &children {
                if self.shadow.contains(c) {
                    self.f_recurse(c, range, stack, acc)?;
                } else {
                    self.f_leaf(c, range, stack, acc)?;
                }
            }
        }
        if keyed.is_some() {
            stack.pop();
        }
        Ok(())
    }

    fn f_leaf(
        &self,
        r: &DyadicCube,
        range: (i32, i32),
        stack: &[(i32, f64, f64)],
        acc: &mut Accumulator,
    ) -> Result<()> {
        if stack.is_empty() {
            return Ok(());
        }
        let mut values = vec![0.0; acc.levels()];
        if self.weighted() && self.cfg.weight_eval == WeightEval::Nodes {
            for node in self.nodes_under(r)? {
                let x = node.center();
                for &(i, v, _) in stack {
                    values[(i - range.0) as usize] =
                        v * microlocal_weight(i, &self.params.x0, &x, self.params.sigma);
                }
                acc.push_node(node.volume(), &values);
            }
        } else {
            for &(i, v, w) in stack {
                values[(i - range.0) as usize] = v * w;
            }
            acc.push_node(r.volume(), &values);
        }
        Ok(())
    }

    /// `l(P)^{-s} · block(P)` over every candidate cube with level in `levels`.
    fn scaled_blocks(&self, levels: (i32, i32)) -> Result<Vec<(DyadicCube, f64)>> {
        let mut cand: Vec<&DyadicCube> = self
            .shadow
            .iter()
            .filter(|q| q.level >= levels.0 && q.level <= levels.1)
            .collect();
        cand.sort();
        cand.into_par_iter()
            .map(|p| {
                Ok((
                    p.clone(),
                    p.side().powf(-self.params.s) * self.block_norm(p)?,
                ))
            })
            .collect()
    }
}

impl CoeffField {
    /// The local block quantity `c(ė^{s'}_{pq})(P)`, or its weighted
    /// counterpart when `params.tilde` is set.
    pub fn block_norm(
        &self,
        p: &DyadicCube,
        params: &SpaceParams,
        cfg: &NormConfig,
    ) -> Result<f64> {
        if p.dim() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: p.dim(),
            });
        }
        if !p.intersects(&self.spatial) {
            return Err(Error::OutsideWindow(p.to_string()));
        }
        let floor = p.level.min(self.level_window.0);
        Evaluator::new(self, params, cfg, floor)?.block_norm(p)
    }

    /// Truncated sequence-space norm with a divergence diagnostic.
    ///
    /// Outer cubes `Q ∋ x₀` range over levels `[j_min − E, j_max]` with
    /// `E = outer_levels`; localizing cubes `P` over `[j_min − E − 1, j_max]`
    /// (the weighted form reports one outer level per `P` level). The
    /// flag is raised when the running sup grows by more than
    /// `divergence_factor` across the `plateau_span` coarsest outer levels.
    pub fn space_norm(&self, params: &SpaceParams, cfg: &NormConfig) -> Result<NormValue> {
        if self.entries.is_empty() {
            params.validate()?;
            return Ok(NormValue::zero());
        }
        let (jmin, jmax) = self.level_window;
        let lo = jmin - cfg.outer_levels.max(0);
        let ev = Evaluator::new(self, params, cfg, lo - 1)?;
        let blocks = ev.scaled_blocks((lo - 1, jmax))?;
        outer_sup(&blocks, params, cfg, (lo, jmax))
    }

    /// Smallest `C` with `|c(P)| ≤ C (|x₀ − x_P| + l(P))^σ l(P)^{s+s'−n/p}`
    /// for every keyed cube, compared against the space norm.
    pub fn coefficient_bound_check(
        &self,
        params: &SpaceParams,
        cfg: &NormConfig,
    ) -> Result<BoundCheck> {
        params.validate()?;
        let n_over_p = if params.p.is_infinite() {
            0.0
        } else {
            self.n as f64 / params.p
        };
        let mut constant = 0.0f64;
        for (q, a) in self.iter() {
            let x = q.corner();
            let dist = params
                .x0
                .iter()
                .zip(&x)
                .map(|(u, v)| (u - v) * (u - v))
                .sum::<f64>()
                .sqrt();
            let env = (dist + q.side()).powf(params.sigma)
                * q.side().powf(params.s + params.s_prime - n_over_p);
            constant = constant.max(a.abs() / env);
        }
        let norm = self.space_norm(params, cfg)?;
        let kappa = bound_kappa(params);
        Ok(BoundCheck {
            constant,
            kappa,
            space_norm: norm.value,
            holds: constant <= kappa * norm.value * (1.0 + 1e-12),
            holds_with_unit_kappa: constant <= norm.value * (1.0 + 1e-12),
        })
    }
}

/// Worst-case geometric loss between the per-cube bound and the norm.
///
/// Without weights the smallest outer cube `Q ∋ x₀` with `P ⊆ 3Q` has side
/// below `2(|x₀ − x_P| + l(P))`; with weights the weight varies across `P`
/// by at most a factor `(2 + √n)^{|σ|}`.
pub fn bound_kappa(params: &SpaceParams) -> f64 {
    if params.tilde {
        (2.0 + (params.n as f64).sqrt()).powf(params.sigma.abs())
    } else {
        2f64.powf(params.sigma.max(0.0))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub constant: f64,
    pub kappa: f64,
    pub space_norm: f64,
    pub holds: bool,
    pub holds_with_unit_kappa: bool,
}

/// The outer supremum shared by the sequence and function sides.
///
/// `blocks` holds `(P, l(P)^{-s} · block(P))` for every `P` that may be
/// nonzero at levels `[levels.0 − 1, levels.1]`.
pub(crate) fn outer_sup(
    blocks: &[(DyadicCube, f64)],
    params: &SpaceParams,
    cfg: &NormConfig,
    levels: (i32, i32),
) -> Result<NormValue> {
    let (lo, hi) = levels;
    let per_level: Vec<(i32, f64)> = if params.tilde {
        (lo - 1..=hi)
            .map(|l| {
                let m = blocks
                    .iter()
                    .filter(|(p, _)| p.level == l)
                    .fold(0.0f64, |m, (_, v)| m.max(*v));
                (l, m)
            })
            .collect()
    } else {
        let chain = base_chain(&params.x0, (lo, hi), &cfg.budget)?;
        let mut out = Vec::with_capacity(chain.len());
        for q in &chain {
            let mut m = 0.0f64;
            for (p, v) in blocks {
                if *v > m && p.level >= q.level - 1 && p.in_3q(q)? {
                    m = *v;
                }
            }
            out.push((q.level, q.side().powf(-params.sigma) * m));
        }
        out
    };
    Ok(plateau(per_level, cfg))
}

fn plateau(per_level: Vec<(i32, f64)>, cfg: &NormConfig) -> NormValue {
    let mut running = 0.0f64;
    let mut profile: Vec<(i32, f64)> = per_level
        .iter()
        .rev()
        .map(|&(l, v)| {
            running = running.max(v);
            (l, running)
        })
        .collect();
    profile.reverse();
    let value = profile.first().map_or(0.0, |x| x.1);
    let span = cfg.plateau_span.max(1) as usize;
    let diverging = profile.len() > span && {
        let coarse = profile[0].1;
        let inner = profile[span].1;
        coarse > 0.0 && coarse > cfg.divergence_factor * inner
    };
    NormValue {
        value,
        diverging,
        levels: per_level,
        profile,
    }
}

impl CoeffField {
    /// `c*(P) = Σ_{l(R) = l(P)} |c(R)| (1 + 2^j |x_P − x_R|)^{-L}` on every
    /// cube of the level and spatial windows.
    pub fn regularize_star(&self, l_exp: f64, budget: &TruncationBudget) -> Result<Self> {
        if !(l_exp > self.n as f64) {
            return Err(Error::param(format!(
                "kernel exponent L = {l_exp} must exceed the dimension {}",
                self.n
            )));
        }
        let mut out = Self::new(self.level_window, self.spatial.clone())?;
        for j in self.level_window.0..=self.level_window.1 {
            let keyed: Vec<(Vec<f64>, f64)> = self
                .level_entries(j)
                .map(|(q, a)| (q.corner(), a.abs()))
                .collect();
            if keyed.is_empty() {
                continue;
            }
            let scale = pow2(j);
            let cubes = enumerate(j, &self.spatial, budget)?;
            let values: Vec<f64> = cubes
                .par_iter()
                .map(|p| {
                    let xp = p.corner();
                    keyed
                        .iter()
                        .map(|(xr, a)| {
                            let d = xp
                                .iter()
                                .zip(xr)
                                .map(|(u, v)| (u - v) * (u - v))
                                .sum::<f64>()
                                .sqrt();
                            a * (1.0 + scale * d).powf(-l_exp)
                        })
                        .sum()
                })
                .collect();
            for (p, v) in cubes.into_iter().zip(values) {
                if v != 0.0 {
                    out.entries.insert(p, v);
                }
            }
        }
        Ok(out)
    }

    /// Writes the field as CSV with a `#n=…,jmin=…,jmax=…,lower=…,upper=…`
    /// metadata line; multi-dimensional corners are `;`-separated.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let join = |v: &[f64]| {
            v.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(";")
        };
        writeln!(
            w,
            "#n={},jmin={},jmax={},lower={},upper={}",
            self.n,
            self.level_window.0,
            self.level_window.1,
            join(&self.spatial.lower),
            join(&self.spatial.upper)
        )?;
        let mut cw = csv::Writer::from_writer(w);
        let mut header = vec!["level".to_string()];
        header.extend((0..self.n).map(|d| format!("k{d}")));
        header.push("amplitude".into());
        cw.write_record(&header)?;
        for (q, a) in self.iter() {
            let mut rec = vec![q.level.to_string()];
            rec.extend(q.index.iter().map(|k| k.to_string()));
            rec.push(format!("{a:e}"));
            cw.write_record(&rec)?;
        }
        cw.flush()?;
        Ok(())
    }

    pub fn read_csv<R: BufRead>(mut r: R) -> Result<Self> {
        let mut first = String::new();
        r.read_line(&mut first)?;
        let meta = first
            .trim()
            .strip_prefix('#')
            .ok_or_else(|| Error::Parse("missing '#' metadata line".into()))?;
        let mut kv = HashMap::new();
        for part in meta.split(',') {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("bad metadata entry {part:?}")))?;
            kv.insert(k.trim().to_string(), v.trim().to_string());
        }
        let get = |k: &str| {
            kv.get(k)
                .ok_or_else(|| Error::Parse(format!("metadata lacks {k}")))
        };
        let parse_i = |k: &str| -> Result<i64> {
            get(k)?
                .parse()
                .map_err(|_| Error::Parse(format!("bad integer for {k}")))
        };
        let parse_v = |k: &str| -> Result<Vec<f64>> {
            get(k)?
                .split(';')
                .map(|x| {
                    x.trim()
                        .parse()
                        .map_err(|_| Error::Parse(format!("bad number in {k}")))
                })
                .collect()
        };
        let n = parse_i("n")? as usize;
        let region = Region::new(parse_v("lower")?, parse_v("upper")?)?;
        if region.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: region.dim(),
            });
        }
        let mut field = Self::new((parse_i("jmin")? as i32, parse_i("jmax")? as i32), region)?;
        let mut cr = csv::Reader::from_reader(r);
        for rec in cr.records() {
            let rec = rec?;
            if rec.len() != n + 2 {
                return Err(Error::Parse(format!(
                    "expected {} columns, got {}",
                    n + 2,
                    rec.len()
                )));
            }
            let num = |i: usize| -> Result<i64> {
                rec[i]
                    .trim()
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad integer {:?}", &rec[i])))
            };
            let level = num(0)? as i32;
            let index = (1..=n).map(num).collect::<Result<Vec<_>>>()?;
            let a: f64 = rec[n + 1]
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad amplitude {:?}", &rec[n + 1])))?;
            field.insert(DyadicCube::new(level, index), a)?;
        }
        Ok(field)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn single(level: i32, k: i64) -> CoeffField {
        let mut c = CoeffField::unit(1, 0, 8).unwrap();
        c.insert(DyadicCube::new_1d(level, k), 1.0).unwrap();
        c
    }

    fn b22(sp: f64) -> SpaceParams {
        SpaceParams::new(Family::B, 0.0, sp, 0.0, 2.0, 2.0)
    }

    #[test]
    fn single_coefficient_block_norms() {
        let c = single(3, 0);
        let cfg = NormConfig::default();
        let unit = DyadicCube::new_1d(0, 0);
        assert_relative_eq!(
            c.block_norm(&unit, &b22(0.0), &cfg).unwrap(),
            2f64.powf(-1.5),
            max_relative = 1e-12
        );
        assert_relative_eq!(
            c.block_norm(&unit, &b22(1.0), &cfg).unwrap(),
            2f64.powf(1.5),
            max_relative = 1e-12
        );
        let mut f = b22(0.0);
        f.family = Family::F;
        assert_relative_eq!(
            c.block_norm(&unit, &f, &cfg).unwrap(),
            2f64.powf(-1.5),
            max_relative = 1e-12
        );
    }

    #[test]
    fn weighted_block_converges_to_continuum() {
        // ∫_0^{1/8} (1/8 + x)^{-2} dx = 4, square root 2
        let c = single(3, 0);
        let p = b22(0.0).with_tilde(true);
        let p = SpaceParams { sigma: 1.0, ..p };
        let unit = DyadicCube::new_1d(0, 0);
        let mut last_err = f64::INFINITY;
        for bits in [2, 4, 6, 8] {
            let cfg = NormConfig {
                quad_refine_bits: bits,
                ..Default::default()
            };
            // node grid is relative to jmax = 8, so refine from the coefficient's level
            let v = c
                .with_level_window((0, 3))
                .unwrap()
                .block_norm(&unit, &p, &cfg)
                .unwrap();
            let err = (v - 2.0).abs();
            assert!(err < last_err);
            last_err = err;
        }
        assert!(last_err < 1e-4, "{last_err}");
    }

    #[test]
    fn single_coefficient_space_norm() {
        let c = single(3, 0);
        let cfg = NormConfig::default();
        let v = c.space_norm(&b22(0.0), &cfg).unwrap();
        assert_relative_eq!(v.value, 2f64.powf(-1.5), max_relative = 1e-12);
        assert!(!v.diverging);

        let neg = SpaceParams {
            sigma: -0.5,
            ..b22(0.0)
        };
        assert!(c.space_norm(&neg, &cfg).unwrap().diverging);
    }

    #[test]
    fn zero_field_is_zero() {
        let c = CoeffField::unit(1, 0, 8).unwrap();
        let cfg = NormConfig::default();
        for tilde in [false, true] {
            let v = c.space_norm(&b22(0.3).with_tilde(tilde), &cfg).unwrap();
            assert_eq!(v.value, 0.0);
        }
        assert_eq!(
            c.coefficient_bound_check(&b22(0.0), &cfg).unwrap().constant,
            0.0
        );
    }

    #[test]
    fn one_cube_bound_fit() {
        let c = single(3, 0);
        let chk = c
            .coefficient_bound_check(&b22(0.0), &NormConfig::default())
            .unwrap();
        assert_relative_eq!(chk.constant, 2f64.powf(-1.5), max_relative = 1e-12);
        assert!(chk.holds);
    }

    #[test]
    fn star_of_single_entry() {
        let c = single(3, 2);
        let star = c
            .regularize_star(4.0, &TruncationBudget::default())
            .unwrap();
        assert!(star.get(&DyadicCube::new_1d(3, 2)) >= 1.0);
        for k in 0..8 {
            let expect = (1.0 + (k as f64 - 2.0).abs()).powf(-4.0);
            assert_relative_eq!(
                star.get(&DyadicCube::new_1d(3, k)),
                expect,
                max_relative = 1e-14
            );
        }
        assert!(c
            .regularize_star(1.0, &TruncationBudget::default())
            .is_err());
    }

    #[test]
    fn star_is_translation_equivariant() {
        let mut a = CoeffField::unit(1, 0, 5).unwrap();
        let mut b = a.clone();
        for (k, v) in [(3, 1.0), (7, -2.0), (10, 0.5)] {
            a.insert(DyadicCube::new_1d(5, k), v).unwrap();
            b.insert(DyadicCube::new_1d(5, k + 1), v).unwrap();
        }
        let sa = a
            .regularize_star(3.0, &TruncationBudget::default())
            .unwrap();
        let sb = b
            .regularize_star(3.0, &TruncationBudget::default())
            .unwrap();
        for k in 1..30 {
            assert_relative_eq!(
                sa.get(&DyadicCube::new_1d(5, k - 1)),
                sb.get(&DyadicCube::new_1d(5, k)),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn csv_round_trip() {
        let mut c = CoeffField::unit(1, 0, 6).unwrap();
        c.insert(DyadicCube::new_1d(2, 1), -0.25).unwrap();
        c.insert(DyadicCube::new_1d(6, 63), 1e-7).unwrap();
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("#n=1,jmin=0,jmax=6,lower=0,upper=1\nlevel,k0,amplitude\n"));
        let back = CoeffField::read_csv(&buf[..]).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn window_violations_rejected() {
        let mut c = CoeffField::unit(1, 0, 4).unwrap();
        assert!(c.insert(DyadicCube::new_1d(5, 0), 1.0).is_err());
        assert!(c.insert(DyadicCube::new_1d(2, 9), 1.0).is_err());
        assert!(c.insert(DyadicCube::new(2, vec![0, 0]), 1.0).is_err());
        let p = b22(0.0);
        assert!(c
            .block_norm(&DyadicCube::new_1d(0, 3), &p, &NormConfig::default())
            .is_err());
    }

    fn arb_field() -> impl Strategy<Value = Vec<(i32, i64, f64)>> {
        prop::collection::vec((0i32..6, 0i64..64, -3.0f64..3.0), 1..25)
    }

    fn build(entries: &[(i32, i64, f64)]) -> CoeffField {
        let mut c = CoeffField::unit(1, 0, 5).unwrap();
        for &(j, k, a) in entries {
            c.insert(DyadicCube::new_1d(j, k % (1 << j)), a).unwrap();
        }
        c
    }

    fn arb_params() -> impl Strategy<Value = SpaceParams> {
        (
            prop::bool::ANY,
            prop::bool::ANY,
            -0.5f64..0.5,
            -0.5f64..0.5,
            prop::sample::select(vec![0.5, 1.0, 2.0, 3.0, f64::INFINITY]),
            prop::sample::select(vec![0.5, 1.0, 2.0, f64::INFINITY]),
        )
            .prop_map(|(fam, tilde, sp, sigma, p, q)| {
                let family = if fam { Family::B } else { Family::F };
                SpaceParams::new(family, 0.0, sp, sigma, p, q)
                    .with_tilde(tilde)
                    .with_x0(vec![0.3])
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn block_norm_monotone_in_field(e in arb_field(), params in arb_params(), shrink in 0.0f64..1.0) {
            let c2 = build(&e);
            let c1 = c2.map(|_, a| a * shrink);
            let cfg = NormConfig::default();
            let p = DyadicCube::new_1d(0, 0);
            let b1 = c1.block_norm(&p, &params, &cfg).unwrap();
            let b2 = c2.block_norm(&p, &params, &cfg).unwrap();
            prop_assert!(b1 <= b2 * (1.0 + 1e-12));
        }

        #[test]
        fn block_norm_monotone_in_cube(e in arb_field(), params in arb_params(), k in 0i64..8) {
            let c = build(&e);
            let cfg = NormConfig::default();
            let small = DyadicCube::new_1d(3, k);
            let big = small.ancestor(1);
            let b_small = c.block_norm(&small, &params, &cfg).unwrap();
            let b_big = c.block_norm(&big, &params, &cfg).unwrap();
            if params.family == Family::F && params.p.is_infinite() && params.q.is_finite() {
                // the l(P)^{-n/q} prefactor breaks monotonicity in P
                return Ok(());
            }
            prop_assert!(b_small <= b_big * (1.0 + 1e-12));
        }

        #[test]
        fn block_norm_homogeneous(e in arb_field(), params in arb_params(), lambda in -4.0f64..4.0) {
            let c = build(&e);
            let cfg = NormConfig::default();
            let p = DyadicCube::new_1d(0, 0);
            let a = c.scaled(lambda).block_norm(&p, &params, &cfg).unwrap();
            let b = lambda.abs() * c.block_norm(&p, &params, &cfg).unwrap();
            prop_assert!((a - b).abs() <= 1e-10 * b.max(1e-300));
        }

        #[test]
        fn block_norm_q_monotone(e in arb_field(), mut params in arb_params(), q1 in 0.5f64..3.0, dq in 0.0f64..3.0) {
            let c = build(&e);
            let cfg = NormConfig::default();
            let p = DyadicCube::new_1d(0, 0);
            params.q = q1;
            let b1 = c.block_norm(&p, &params, &cfg).unwrap();
            params.q = q1 + dq;
            let b2 = c.block_norm(&p, &params, &cfg).unwrap();
            if params.family == Family::F && params.p.is_infinite() {
                return Ok(());
            }
            prop_assert!(b2 <= b1 * (1.0 + 1e-12));
        }

        #[test]
        fn star_dominates(e in arb_field(), l in 1.5f64..6.0) {
            let c = build(&e);
            let star = c.regularize_star(l, &TruncationBudget::default()).unwrap();
            for (q, a) in c.iter() {
                prop_assert!(a.abs() <= star.get(q));
            }
        }
    }
}
