//! Function-side versus sequence-side norms of synthesized signals.
//!
//! Random coefficient fields are synthesized with the LP pair; each signal
//! is measured once through its Littlewood–Paley blocks and once through
//! its coefficients (φ-transform or wavelet). The spread of the ratio over
//! the ensemble forms a bracket that should stop widening as the level
//! window deepens.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::{decay_for, generate, EnsembleConfig};
use crate::error::{Error, Result};
use crate::field::NormConfig;
use crate::lp::{function_space_norm, phi_transform_coeffs, synthesize, LpPair};
use crate::params::SpaceParams;
use crate::seed::SeedTree;
use crate::signal::SampledSignal;
use crate::wavelet::{dwt_analyze, WaveletBasis};

/// Which coefficients feed the sequence-side norm.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoefficientSide {
    Phi,
    Wavelet { moments: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceOptions {
    pub signals: usize,
    pub len: usize,
    pub period: f64,
    /// Coarsest synthesized and analyzed LP level.
    pub jmin: i32,
    /// Coarsest wavelet level analyzed.
    pub wavelet_jmin: i32,
    pub depths: Vec<i32>,
    pub density: f64,
    pub margin: f64,
    pub growth_tol: f64,
    pub lp_order: u32,
    pub norm: NormConfig,
}

impl Default for EquivalenceOptions {
    fn default() -> Self {
        Self {
            signals: 50,
            len: 1 << 15,
            period: 1.0,
            jmin: 2,
            wavelet_jmin: 0,
            depths: vec![8, 10, 12],
            density: 0.15,
            margin: 1.0,
            growth_tol: 0.05,
            lp_order: 6,
            norm: NormConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub params: SpaceParams,
    pub side: CoefficientSide,
    pub seed: u64,
    pub depths: Vec<i32>,
    /// `[min, max]` of function norm / sequence norm per depth.
    pub brackets: Vec<[f64; 2]>,
    /// Largest relative widening of either bracket end between depths.
    pub max_growth: f64,
    pub pass: bool,
}

fn bracket_growth(brackets: &[[f64; 2]]) -> f64 {
    brackets
        .windows(2)
        .map(|w| {
            let up = w[1][1] / w[0][1] - 1.0;
            let down = w[0][0] / w[1][0] - 1.0;
            up.max(down)
        })
        .fold(0.0, f64::max)
}

/// Runs the ensemble at every depth of `opts.depths`.
pub fn run_equivalence(
    params: &SpaceParams,
    side: CoefficientSide,
    seed: u64,
    opts: &EquivalenceOptions,
) -> Result<EquivalenceReport> {
    params.validate()?;
    let deepest = *opts
        .depths
        .iter()
        .max()
        .ok_or_else(|| Error::param("no depths"))?;
    let pair = LpPair::new(opts.lp_order)?;
    let basis = match side {
        CoefficientSide::Phi => None,
        CoefficientSide::Wavelet { moments } => Some(WaveletBasis::new(moments)?),
    };
    let mut cfg = EnsembleConfig::unit(opts.signals, opts.density, (opts.jmin, deepest), 0.0);
    cfg.region = crate::lattice::Region::interval(0.0, opts.period)?;
    cfg.decay = decay_for(&[params], opts.margin);
    let tree = SeedTree::new(seed).derive("equivalence");
    let fields = (0..opts.signals)
        .into_par_iter()
        .map(|i| generate(&cfg, &tree, i, &opts.norm.budget))
        .collect::<Result<Vec<_>>>()?;
    let mut brackets = Vec::with_capacity(opts.depths.len());
    for &d in &opts.depths {
        let ratios = fields
            .par_iter()
            .map(|c| {
                let f: SampledSignal =
                    synthesize(&c.with_level_window((opts.jmin, d))?, &pair, opts.len)?;
                let func =
                    function_space_norm(&f, params, &pair, (opts.jmin, d), &opts.norm)?.value;
                let coeffs = match &basis {
                    None => phi_transform_coeffs(&f, &pair, (opts.jmin, d))?,
                    Some(b) => dwt_analyze(&f, b, (opts.wavelet_jmin, d))?,
                };
                let seq = coeffs.space_norm(params, &opts.norm)?.value;
                if seq > 0.0 {
                    Ok(func / seq)
                } else {
                    Err(Error::param("sequence norm vanished on a nonzero signal"))
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = ratios.iter().copied().fold(0.0, f64::max);
        brackets.push([lo, hi]);
    }
    let max_growth = bracket_growth(&brackets);
    let pass =
        max_growth <= opts.growth_tol && brackets.iter().all(|b| b[0] > 0.0 && b[1].is_finite());
    Ok(EquivalenceReport {
        params: params.clone(),
        side,
        seed,
        depths: opts.depths.clone(),
        brackets,
        max_growth,
        pass,
    })
}
