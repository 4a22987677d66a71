//! Seeded heavy-tailed random coefficient fields.
//!
//! Each level is drawn from its own derived generator, so a field generated
//! with a deeper level window agrees with the shallower one on every shared
//! level. Refinement studies compare nested truncations of one field.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::CoeffField;
use crate::lattice::{enumerate, DyadicCube, Region, TruncationBudget};
use crate::params::SpaceParams;
use crate::seed::SeedTree;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub size: usize,
    /// Probability that a cube carries a coefficient.
    pub density: f64,
    pub level_window: (i32, i32),
    pub region: Region,
    /// Amplitudes at level `i` are scaled by `2^{-i·decay}`.
    pub decay: f64,
    /// Members whose amplitudes all share one sign.
    pub aligned_members: usize,
}

impl EnsembleConfig {
    pub fn unit(size: usize, density: f64, level_window: (i32, i32), decay: f64) -> Self {
        Self {
            size,
            density,
            level_window,
            region: Region::unit(1, 1.0),
            decay,
            aligned_members: 0,
        }
    }

    pub fn with_levels(&self, level_window: (i32, i32)) -> Self {
        Self {
            level_window,
            ..self.clone()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.density > 0.0 && self.density <= 1.0) {
            return Err(Error::param("density must lie in (0, 1]"));
        }
        if self.size == 0 {
            return Err(Error::param("ensemble size must be positive"));
        }
        Ok(())
    }
}

/// A decay rate under which every listed parameter set has a convergent
/// truncated norm: `max(s', s + s' − n/p) + max(σ, 0)`, maximized over the
/// sets, plus `margin`.
///
/// The first term controls dense fields (every level fills `P`), the second
/// isolated coefficients on small cubes.
pub fn decay_for(params: &[&SpaceParams], margin: f64) -> f64 {
    params
        .iter()
        .map(|p| {
            let n_over_p = if p.p.is_infinite() {
                0.0
            } else {
                p.n as f64 / p.p
            };
            p.s_prime.max(p.s + p.s_prime - n_over_p) + p.sigma.max(0.0)
        })
        .fold(f64::NEG_INFINITY, f64::max)
        + margin
}

/// Member `index` of the ensemble.
pub fn generate(
    cfg: &EnsembleConfig,
    seed: &SeedTree,
    index: usize,
    budget: &TruncationBudget,
) -> Result<CoeffField> {
    cfg.validate()?;
    let member = seed.derive_index("ensemble-member", index as u64);
    let aligned = index < cfg.aligned_members;
    let mut field = CoeffField::new(cfg.level_window, cfg.region.clone())?;
    for level in cfg.level_window.0..=cfg.level_window.1 {
        let mut rng = member.derive_index("level", level as i64 as u64).rng();
        let scale = 2f64.powf(-(level as f64) * cfg.decay);
        let cubes = enumerate(level, &cfg.region, budget)?;
        let forced = if level == cfg.level_window.0 {
            Some(rng.gen_range(0..cubes.len()))
        } else {
            None
        };
        for (pos, q) in cubes.into_iter().enumerate() {
            let keep: bool = rng.gen_bool(cfg.density);
            let g: f64 = StandardNormal.sample(&mut rng);
            let sign: bool = rng.gen();
            if keep || forced == Some(pos) {
                let mag = g.abs().powi(3).max(1e-3);
                let s = if aligned || sign { 1.0 } else { -1.0 };
                field.insert(q, s * mag * scale)?;
            }
        }
    }
    Ok(field)
}

/// The whole ensemble, in member order.
pub fn generate_all(
    cfg: &EnsembleConfig,
    seed: &SeedTree,
    budget: &TruncationBudget,
) -> Result<Vec<CoeffField>> {
    (0..cfg.size)
        .map(|i| generate(cfg, seed, i, budget))
        .collect()
}

/// A one-entry field, convenient for examples and oracles.
pub fn single_entry(
    level_window: (i32, i32),
    region: Region,
    cube: DyadicCube,
    amplitude: f64,
) -> Result<CoeffField> {
    let mut f = CoeffField::new(level_window, region)?;
    f.insert(cube, amplitude)?;
    Ok(f)
}
