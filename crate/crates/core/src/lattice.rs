//! Dyadic cube arithmetic.
//!
//! A cube is `Q = 2^{-j}([0,1)^n + k)`. All cubes are half-open, so the
//! cubes of one level partition space exactly and a point on a right face
//! belongs to the neighbouring cube.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest level gap for which exact integer comparisons are performed.
const MAX_LEVEL_GAP: i32 = 52;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DyadicCube {
    pub level: i32,
    pub index: Vec<i64>,
}

impl fmt::Display for DyadicCube {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(j={}, k={:?})", self.level, self.index)
    }
}

#[inline]
pub(crate) fn pow2(j: i32) -> f64 {
    2f64.powi(j)
}

impl DyadicCube {
    pub fn new(level: i32, index: Vec<i64>) -> Self {
        Self { level, index }
    }

    pub fn new_1d(level: i32, k: i64) -> Self {
        Self {
            level,
            index: vec![k],
        }
    }

    pub fn dim(&self) -> usize {
        self.index.len()
    }

    /// Side length `l(Q) = 2^{-j}`.
    pub fn side(&self) -> f64 {
        pow2(-self.level)
    }

    /// Lower corner `x_Q = 2^{-j} k`.
    pub fn corner(&self) -> Vec<f64> {
        let l = self.side();
        self.index.iter().map(|&k| k as f64 * l).collect()
    }

    pub fn center(&self) -> Vec<f64> {
        let l = self.side();
        self.index.iter().map(|&k| (k as f64 + 0.5) * l).collect()
    }

    pub fn volume(&self) -> f64 {
        pow2(-self.level * self.dim() as i32)
    }

    pub fn contains_point(&self, x: &[f64]) -> bool {
        let scale = pow2(self.level);
        self.index
            .iter()
            .zip(x)
            .all(|(&k, &xi)| (xi * scale).floor() as i64 == k)
    }

    pub fn parent(&self) -> Self {
        self.ancestor(self.level - 1)
    }

    /// The unique cube at `level <= self.level` containing `self`.
    pub fn ancestor(&self, level: i32) -> Self {
        debug_assert!(level <= self.level);
        let shift = (self.level - level) as u32;
        Self {
            level,
            index: self.index.iter().map(|&k| k >> shift).collect(),
        }
    }

    /// All `2^n` children, in lexicographic order.
    pub fn children(&self) -> Vec<Self> {
        self.descendants(self.level + 1)
    }

    /// All descendants at a finer level, in lexicographic order.
    pub fn descendants(&self, level: i32) -> Vec<Self> {
        assert!(level >= self.level);
        let shift = (level - self.level) as u32;
        let width = 1i64 << shift;
        let ranges: Vec<(i64, i64)> = self
            .index
            .iter()
            .map(|&k| (k << shift, (k << shift) + width))
            .collect();
        product_indices(&ranges)
            .into_iter()
            .map(|index| Self { level, index })
            .collect()
    }

    fn check_dim(&self, other: &Self) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        Ok(())
    }

    /// Set inclusion `other ⊆ self`.
    pub fn contains(&self, other: &Self) -> Result<bool> {
        self.check_dim(other)?;
        Ok(other.level >= self.level && other.ancestor(self.level) == *self)
    }

    /// `self ⊆ 3Q`, where `3Q` shares `Q`'s center and has side `3 l(Q)`.
    pub fn in_3q(&self, q: &Self) -> Result<bool> {
        self.check_dim(q)?;
        let m = self.level.max(q.level);
        if m - self.level.min(q.level) > MAX_LEVEL_GAP {
            return Err(Error::Budget(
                "level gap too large for exact comparison".into(),
            ));
        }
        let sp = (m - self.level) as u32;
        let sq = (m - q.level) as u32;
        Ok(self.index.iter().zip(&q.index).all(|(&kp, &kq)| {
            let lo = kp << sp;
            let hi = (kp + 1) << sp;
            lo >= (kq - 1) << sq && hi <= (kq + 2) << sq
        }))
    }

    /// Euclidean distance between lower corners.
    pub fn corner_distance(&self, other: &Self) -> Result<f64> {
        self.check_dim(other)?;
        Ok(self
            .corner()
            .iter()
            .zip(other.corner())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt())
    }

    pub fn intersects(&self, region: &Region) -> bool {
        let l = self.side();
        self.index
            .iter()
            .zip(region.lower.iter().zip(&region.upper))
            .all(|(&k, (&lo, &hi))| {
                let a = k as f64 * l;
                a < hi && a + l > lo
            })
    }
}

fn product_indices(ranges: &[(i64, i64)]) -> Vec<Vec<i64>> {
    let mut out: Vec<Vec<i64>> = vec![Vec::with_capacity(ranges.len())];
    for &(lo, hi) in ranges {
        let mut next = Vec::with_capacity(out.len() * (hi - lo).max(0) as usize);
        for prefix in &out {
            for k in lo..hi {
                let mut v = prefix.clone();
                v.push(k);
                next.push(v);
            }
        }
        out = next;
    }
    out
}

/// Axis-aligned half-open box `[lower, upper)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Region {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(Error::param(
                "region corners must have equal nonzero length",
            ));
        }
        if lower.iter().zip(&upper).any(|(a, b)| !(a < b)) {
            return Err(Error::param(
                "region must satisfy lower < upper componentwise",
            ));
        }
        Ok(Self { lower, upper })
    }

    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo], vec![hi])
    }

    /// `[0, side)^n`.
    pub fn unit(n: usize, side: f64) -> Self {
        Self {
            lower: vec![0.0; n],
            upper: vec![side; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains_point(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(&xi, (&lo, &hi))| xi >= lo && xi < hi)
    }
}

/// Global truncation bounds for levels and enumeration sizes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncationBudget {
    pub level_min: i32,
    pub level_max: i32,
    pub max_cubes: usize,
}

impl Default for TruncationBudget {
    fn default() -> Self {
        Self {
            level_min: -40,
            level_max: 40,
            max_cubes: 1 << 22,
        }
    }
}

impl TruncationBudget {
    fn check_level(&self, level: i32) -> Result<()> {
        if level < self.level_min || level > self.level_max {
            return Err(Error::Budget(format!(
                "level {level} outside [{}, {}]",
                self.level_min, self.level_max
            )));
        }
        Ok(())
    }
}

/// All level-`level` cubes intersecting `window`, in lexicographic order.
pub fn enumerate(
    level: i32,
    window: &Region,
    budget: &TruncationBudget,
) -> Result<Vec<DyadicCube>> {
    budget.check_level(level)?;
    let scale = pow2(level);
    let ranges: Vec<(i64, i64)> = window
        .lower
        .iter()
        .zip(&window.upper)
        .map(|(&lo, &hi)| ((lo * scale).floor() as i64, (hi * scale).ceil() as i64))
        .collect();
    let count = ranges
        .iter()
        .try_fold(1usize, |acc, &(lo, hi)| {
            acc.checked_mul((hi - lo).max(0) as usize)
        })
        .unwrap_or(usize::MAX);
    if count > budget.max_cubes {
        return Err(Error::Budget(format!(
            "{count} cubes at level {level} exceed the budget of {}",
            budget.max_cubes
        )));
    }
    Ok(product_indices(&ranges)
        .into_iter()
        .map(|index| DyadicCube { level, index })
        .filter(|q| q.intersects(window))
        .collect())
}

/// For each level in `levels` (inclusive, coarse to fine) the cube containing `x0`.
pub fn base_chain(
    x0: &[f64],
    levels: (i32, i32),
    budget: &TruncationBudget,
) -> Result<Vec<DyadicCube>> {
    let (lo, hi) = levels;
    if lo > hi {
        return Err(Error::param("empty level range"));
    }
    budget.check_level(lo)?;
    budget.check_level(hi)?;
    Ok((lo..=hi).map(|l| cube_containing(x0, l)).collect())
}

pub fn cube_containing(x: &[f64], level: i32) -> DyadicCube {
    let scale = pow2(level);
    DyadicCube {
        level,
        index: x.iter().map(|&xi| (xi * scale).floor() as i64).collect(),
    }
}

/// Relation queries between two cubes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RelationMode {
    Contains,
    In3Q,
    Parent,
    NeighborDistance,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Relation {
    Bool(bool),
    Cube(DyadicCube),
    Distance(f64),
}

/// `relate(P, Q, mode)`: `Contains` asks `P ⊆ Q`, `In3Q` asks `P ⊆ 3Q`,
/// `Parent` returns the parent of `P`, `NeighborDistance` returns `|x_P − x_Q|`.
pub fn relate(p: &DyadicCube, q: &DyadicCube, mode: RelationMode) -> Result<Relation> {
    if p.dim() != q.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            got: q.dim(),
        });
    }
    Ok(match mode {
        RelationMode::Contains => Relation::Bool(q.contains(p)?),
        RelationMode::In3Q => Relation::Bool(p.in_3q(q)?),
        RelationMode::Parent => Relation::Cube(p.parent()),
        RelationMode::NeighborDistance => Relation::Distance(p.corner_distance(q)?),
    })
}
