//! Streaming aggregation shared by the sequence-side and the function-side
//! norms.
//!
//! Both sides reduce to the same shape: a cube `P`, a list of levels
//! `i = i0, i0+1, …`, and quadrature nodes `x` of volume `dx` carrying the
//! nonnegative values `v_i(x)` (already multiplied by `2^{is'}` and any
//! weight). The accumulator turns these into
//!
//! - B: `(Σ_i (Σ_x v_i(x)^p dx)^{q/p})^{1/q}`,
//! - F, `p < ∞`: `(Σ_x (Σ_i v_i(x)^q)^{p/q} dx)^{1/p}`,
//! - F, `p = ∞`: `l(P)^{-n/q} (Σ_x Σ_i v_i(x)^q dx)^{1/q}`,
//!
//! with suprema replacing sums when an exponent is infinite.

use crate::params::Family;

#[derive(Clone, Debug)]
pub struct Accumulator {
    family: Family,
    p: f64,
    q: f64,
    per_level: Vec<f64>,
    total: f64,
}

#[inline]
fn pow_or_max(acc: &mut f64, v: f64, dx: f64, e: f64) {
    if e.is_infinite() {
        if v > *acc {
            *acc = v;
        }
    } else if v > 0.0 {
        *acc += v.powf(e) * dx;
    }
}

impl Accumulator {
    pub fn new(family: Family, p: f64, q: f64, levels: usize) -> Self {
        Self {
            family,
            p,
            q,
            per_level: vec![0.0; levels],
            total: 0.0,
        }
    }

    pub fn levels(&self) -> usize {
        self.per_level.len()
    }

    /// Adds one node carrying the values of every level (index 0 = coarsest).
    pub fn push_node(&mut self, dx: f64, values: &[f64]) {
        debug_assert_eq!(values.len(), self.per_level.len());
        match self.family {
            Family::B => {
                for (acc, &v) in self.per_level.iter_mut().zip(values) {
                    pow_or_max(acc, v, dx, self.p);
                }
            }
            Family::F => {
                let g = lq_combine(values, self.q);
                if self.p.is_infinite() {
                    if self.q.is_infinite() {
                        self.total = self.total.max(g);
                    } else {
                        // g already holds (Σ_i v^q)^{1/q}
                        self.total += g.powf(self.q) * dx;
                    }
                } else {
                    pow_or_max(&mut self.total, g, dx, self.p);
                }
            }
        }
    }

    /// F family: adds a node whose level combination `g = (Σ_i v_i^q)^{1/q}`
    /// has already been raised to the accumulation power, i.e. `g^p`
    /// (`p < ∞`), `g^q` (`p = ∞`, `q < ∞`) or `g` (both infinite).
    pub fn push_raised(&mut self, dx: f64, term: f64) {
        debug_assert_eq!(self.family, Family::F);
        if self.p.is_infinite() && self.q.is_infinite() {
            self.total = self.total.max(term);
        } else {
            self.total += term * dx;
        }
    }

    /// The power `push_raised` expects the level combination to be raised to.
    pub fn raised_power(&self) -> f64 {
        match (self.p.is_infinite(), self.q.is_infinite()) {
            (false, _) => self.p,
            (true, false) => self.q,
            (true, true) => 1.0,
        }
    }

    /// Adds a single level's contribution `v^p dx` at one node.
    ///
    /// Only meaningful for the B family, where levels never mix before the
    /// inner L^p norm is taken.
    pub fn push_level_term(&mut self, level: usize, dx: f64, v: f64) {
        debug_assert_eq!(self.family, Family::B);
        pow_or_max(&mut self.per_level[level], v, dx, self.p);
    }

    /// Adds a precomputed `∫ v^p` (or a sup when `p = ∞`) for one level.
    pub fn push_level_integral(&mut self, level: usize, integral: f64) {
        debug_assert_eq!(self.family, Family::B);
        if self.p.is_infinite() {
            self.per_level[level] = self.per_level[level].max(integral);
        } else {
            self.per_level[level] += integral;
        }
    }

    /// Final norm; `side` is `l(P)` and `n` the dimension (used by F, p = ∞).
    pub fn finish(&self, side: f64, n: usize) -> f64 {
        match self.family {
            Family::B => {
                let inner = self.per_level.iter().map(|&a| {
                    if self.p.is_infinite() {
                        a
                    } else {
                        a.powf(1.0 / self.p)
                    }
                });
                if self.q.is_infinite() {
                    inner.fold(0.0, f64::max)
                } else {
                    inner
                        .map(|v| v.powf(self.q))
                        .sum::<f64>()
                        .powf(1.0 / self.q)
                }
            }
            Family::F => {
                if self.p.is_infinite() {
                    if self.q.is_infinite() {
                        self.total
                    } else {
                        side.powf(-(n as f64) / self.q) * self.total.powf(1.0 / self.q)
                    }
                } else {
                    self.total.powf(1.0 / self.p)
                }
            }
        }
    }
}

/// `(Σ v^q)^{1/q}`, or `max v` when `q = ∞`.
pub fn lq_combine(values: &[f64], q: f64) -> f64 {
    if q.is_infinite() {
        values.iter().copied().fold(0.0, f64::max)
    } else {
        values
            .iter()
            .filter(|v| **v > 0.0)
            .map(|v| v.powf(q))
            .sum::<f64>()
            .powf(1.0 / q)
    }
}
