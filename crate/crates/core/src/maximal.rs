//! The fractional maximal operator `M_t g(x) = sup_{Q ∋ x} (l(Q)^{-n} ∫_Q |g|^t)^{1/t}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::pow2;
use crate::signal::SampledSignal;

/// Which cubes enter the supremum.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CubeClass {
    /// Dyadic cubes containing `x`.
    Dyadic,
    /// Dyadic cubes containing `x` and their concentric 3-dilates.
    DyadicWithDilates,
}

/// Number of dyadic levels coarser than the period that are still scanned.
const COARSE_LEVELS: i32 = 8;

/// `M_t g` at every sample point.
///
/// The samples are read as a piecewise-constant function on the grid
/// cells and extended by zero outside `[0, T)`; cubes range from the grid
/// cell up to side `2^8 T`.
pub fn maximal_mt(g: &SampledSignal, t: f64, class: CubeClass) -> Result<SampledSignal> {
    if !(t > 0.0 && t <= 1.0) {
        return Err(Error::param(format!("t = {t} must lie in (0, 1]")));
    }
    let n = g.len();
    let h = g.step();
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for v in g.samples() {
        acc += v.abs().powf(t) * h;
        prefix.push(acc);
    }
    // ∫_{[a,b) ∩ [0,T)} |g|^t for grid-aligned integer endpoints in cells
    let integral = |a: i64, b: i64| -> f64 {
        let a = a.clamp(0, n as i64) as usize;
        let b = b.clamp(0, n as i64) as usize;
        if b > a {
            prefix[b] - prefix[a]
        } else {
            0.0
        }
    };
    let fine = -(h.log2().round() as i32);
    let coarse = -(g.period().log2().round() as i32) - COARSE_LEVELS;
    let out = (0..n)
        .map(|k| {
            let x = k as f64 * h;
            let mut best = 0.0f64;
            for level in (coarse..=fine).rev() {
                let side = pow2(-level);
                let cells = (side / h).round() as i64;
                let a = (x / side).floor() as i64 * cells;
                let mut avg = integral(a, a + cells) / side;
                if class == CubeClass::DyadicWithDilates {
                    avg = avg.max(integral(a - cells, a + 2 * cells) / (3.0 * side));
                }
                best = best.max(avg);
            }
            best.powf(1.0 / t)
        })
        .collect();
    g.with_samples(out)
}
