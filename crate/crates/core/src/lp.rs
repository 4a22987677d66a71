//! Band-limited Littlewood–Paley pair and the φ-transform on a periodic grid.
//!
//! The profile is built from the smooth step
//! `B(t) = t^{m+1} Σ_{k=0}^{m} C(m+k, k) (1 − t)^k` on `[0, 1]`, which
//! satisfies `B(t) + B(1 − t) = 1`. With `S(u) = B(u + 1/2)` and
//! `χ(u) = S(u + 1/2) − S(u − 1/2)` the translates `χ(u − j)` telescope to
//! one, so `φ̂(ξ) = χ(log₂|ξ|)^{1/2}` satisfies `Σ_j φ̂(2^{-j}ξ)² = 1` for
//! `ξ ≠ 0`. The pair is self-dual: `ϕ = φ`.
//!
//! Frequencies are angular: `f̂(ξ) = ∫ f(x) e^{-ixξ} dx`. Level `i`
//! occupies `2^{i-1} ≤ |ξ| ≤ 2^{i+1}`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::engine::Accumulator;
use crate::error::{Error, Result};
use crate::field::{microlocal_weight, outer_sup, CoeffField, NormConfig, NormValue};
use crate::lattice::{pow2, DyadicCube};
use crate::params::{Family, SpaceParams};
use crate::signal::SampledSignal;
use crate::spectral;

/// A self-dual Littlewood–Paley pair of smoothness order `m`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LpPair {
    order: u32,
    binom: Vec<f64>,
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

impl LpPair {
    pub fn new(order: u32) -> Result<Self> {
        if !(2..=20).contains(&order) {
            return Err(Error::param(format!(
                "profile order {order} outside 2..=20"
            )));
        }
        let binom = (0..=order).map(|k| binomial(order + k, k)).collect();
        Ok(Self { order, binom })
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    /// The smooth step `B`, clamped to 0 below 0 and 1 above 1.
    pub fn step(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        if t >= 1.0 {
            return 1.0;
        }
        let u = 1.0 - t;
        let mut poly = 0.0;
        for b in self.binom.iter().rev() {
            poly = poly * u + b;
        }
        t.powi(self.order as i32 + 1) * poly
    }

    /// `χ(u)`, supported in `[−1, 1]` with `χ(0) = 1`.
    pub fn chi(&self, u: f64) -> f64 {
        let s = |v: f64| self.step(v + 0.5);
        (s(u + 0.5) - s(u - 0.5)).max(0.0)
    }

    /// `φ̂(ξ)`, radial and supported in `1/2 ≤ |ξ| ≤ 2`.
    pub fn phi_hat(&self, xi: f64) -> f64 {
        let a = xi.abs();
        if !(0.5..=2.0).contains(&a) {
            return 0.0;
        }
        self.chi(a.log2()).sqrt()
    }

    /// `ϕ̂ = φ̂`.
    pub fn varphi_hat(&self, xi: f64) -> f64 {
        self.phi_hat(xi)
    }

    /// `φ̂(2^{-i} ξ)`.
    pub fn level_symbol(&self, level: i32, xi: f64) -> f64 {
        self.phi_hat(xi * pow2(-level))
    }

    /// Lower bound of `φ̂` on `3/5 ≤ |ξ| ≤ 5/3`, attained at the endpoints.
    pub fn c0(&self) -> f64 {
        self.phi_hat(0.6)
    }

    /// `Σ_j φ̂(2^{-j} ξ)²` over all `j` meeting `ξ`.
    pub fn partition_sum(&self, xi: f64) -> f64 {
        if xi == 0.0 {
            return 0.0;
        }
        let u = xi.abs().log2();
        let j0 = u.floor() as i32;
        (j0 - 1..=j0 + 2)
            .map(|j| self.level_symbol(j, xi).powi(2))
            .sum()
    }
}

/// The index `k₀ = max(⌊σ + s + s′ − n/p⌋, −1)` of the distribution class
/// modulo polynomials in which the φ-transform expansion converges.
///
/// Recorded for reports only; the finite-grid transforms remove the mean
/// and nothing else.
pub fn convergence_index(params: &SpaceParams) -> i64 {
    let n_over_p = if params.p.is_infinite() {
        0.0
    } else {
        params.n as f64 / params.p
    };
    ((params.sigma + params.s + params.s_prime - n_over_p).floor() as i64).max(-1)
}

/// Finest level whose band fits below the grid's Nyquist limit,
/// `2^{i} ≤ N / (2T)`.
pub fn nyquist_level(len: usize, period: f64) -> i32 {
    (len as f64 / (2.0 * period)).log2().floor() as i32
}

/// Coarsest level that meets a nonzero frequency of the torus.
pub fn min_useful_level(period: f64) -> i32 {
    let l = (2.0 * std::f64::consts::PI / period).log2();
    l.floor() as i32
}

fn check_levels(f: &SampledSignal, levels: (i32, i32)) -> Result<()> {
    if levels.0 > levels.1 {
        return Err(Error::param("empty level window"));
    }
    let max = nyquist_level(f.len(), f.period());
    if levels.1 > max {
        return Err(Error::Nyquist {
            level: levels.1,
            max,
        });
    }
    Ok(())
}

/// `φ_i * f` sampled on the grid of `f`, for `i` in `levels` (coarsest first).
pub fn analyze_blocks(
    f: &SampledSignal,
    pair: &LpPair,
    levels: (i32, i32),
) -> Result<Vec<SampledSignal>> {
    check_levels(f, levels)?;
    let (n, t) = (f.len(), f.period());
    let spec = spectral::spectrum(f.samples());
    (levels.0..=levels.1)
        .map(|i| {
            let block: Vec<Complex64> = spec
                .iter()
                .enumerate()
                .map(|(m, z)| z * pair.level_symbol(i, spectral::angular(m, n, t)))
                .collect();
            f.with_samples(spectral::synthesize_real(block))
        })
        .collect()
}

/// `c(P) = (ϕ_j * f)(x_P)` for every dyadic `P ⊆ [0, T)` with level in
/// `levels`. The field's spatial window is `[0, T)`.
pub fn phi_transform_coeffs(
    f: &SampledSignal,
    pair: &LpPair,
    levels: (i32, i32),
) -> Result<CoeffField> {
    let blocks = analyze_blocks(f, pair, levels)?;
    let mut field = CoeffField::new(levels, f.domain())?;
    let h = f.step();
    for (i, block) in (levels.0..).zip(&blocks) {
        let side = pow2(-i);
        let count = (f.period() / side).round().max(1.0) as i64;
        let stride = (side / h).round() as usize;
        for k in 0..count {
            let v = block.samples()[(k as usize * stride) % f.len()];
            field.insert(DyadicCube::new_1d(i, k), v)?;
        }
    }
    Ok(field)
}

/// `Σ_Q c(Q) φ_Q` on a grid of `len` points, `φ_Q(x) = φ(2^j (x − x_Q))`,
/// periodized over the field's spatial window `[0, T)`.
pub fn synthesize(c: &CoeffField, pair: &LpPair, len: usize) -> Result<SampledSignal> {
    if c.dim() != 1 {
        return Err(Error::Unsupported(format!(
            "synthesis in dimension {}",
            c.dim()
        )));
    }
    let window = c.spatial_window();
    if window.lower[0] != 0.0 {
        return Err(Error::param(
            "synthesis needs a spatial window starting at 0",
        ));
    }
    let t = window.upper[0];
    let out = SampledSignal::zeros(len, t)?;
    let (jmin, jmax) = c.level_window();
    let max = nyquist_level(len, t);
    if jmax > max {
        return Err(Error::Nyquist { level: jmax, max });
    }
    let h = out.step();
    let mut total = vec![Complex64::new(0.0, 0.0); len];
    for j in jmin..=jmax {
        let mut comb = vec![0.0; len];
        let mut any = false;
        for (q, a) in c.level_entries(j) {
            let pos = q.corner()[0] / h;
            comb[(pos.round() as i64).rem_euclid(len as i64) as usize] += a;
            any = true;
        }
        if !any {
            continue;
        }
        // Σ_k c_k e^{-iξ x_k}, then F_m = (2^{-j}/T) φ̂(2^{-j} ξ_m) D_m
        let d = spectral::spectrum(&comb);
        let scale = pow2(-j) / t * len as f64;
        for (m, (acc, dm)) in total.iter_mut().zip(&d).enumerate() {
            let xi = spectral::angular(m, len, t);
            *acc += dm * (scale * pair.level_symbol(j, xi));
        }
    }
    out.with_samples(spectral::synthesize_real(total))
}

/// The function-side norm `‖f‖_{A^{s,σ}(E^{s'})}` truncated to the
/// Littlewood–Paley levels `levels`.
///
/// Blocks are `φ_i * (f − mean f)`, read at the grid samples (quadrature
/// step `h`) and taken to vanish outside `[0, T)`. Localizing cubes,
/// outer chain and plateau test are those of [`CoeffField::space_norm`]
/// with `j_min = levels.0`.
pub fn function_space_norm(
    f: &SampledSignal,
    params: &SpaceParams,
    pair: &LpPair,
    levels: (i32, i32),
    cfg: &NormConfig,
) -> Result<NormValue> {
    params.validate()?;
    if params.n != 1 {
        return Err(Error::Unsupported(format!(
            "function norms in dimension {}",
            params.n
        )));
    }
    let blocks = analyze_blocks(&f.mean_zero(), pair, levels)?;
    let (imin, imax) = levels;
    let h = f.step();
    let x0 = &params.x0;
    let sigma = if params.tilde { params.sigma } else { 0.0 };
    // v_i(x_k) = 2^{is'} |φ_i * f|(x_k) (2^{-i} + |x₀ − x_k|)^{-σ}, level-major
    let values: Vec<Vec<f64>> = (imin..=imax)
        .zip(&blocks)
        .map(|(i, b)| {
            let scale = pow2(i).powf(params.s_prime);
            b.samples()
                .iter()
                .enumerate()
                .map(|(k, v)| scale * v.abs() * microlocal_weight(i, x0, &[f.point(k)], sigma))
                .collect()
        })
        .collect();
    let lo = imin - cfg.outer_levels.max(0);
    let (p, q) = (params.p, params.q);
    let power = |v: f64, e: f64| if e.is_infinite() { v } else { v.powf(e) };
    let mut scaled = Vec::new();
    let mut push = |jp: i32, accs: Vec<Accumulator>| {
        let side = pow2(-jp);
        for (k, acc) in accs.iter().enumerate() {
            let v = acc.finish(side, 1);
            if v > 0.0 {
                scaled.push((DyadicCube::new_1d(jp, k as i64), side.powf(-params.s) * v));
            }
        }
    };
    let cubes_at = |jp: i32| -> (usize, usize) {
        let side = pow2(-jp);
        let count = (f.period() / side).round().max(1.0) as usize;
        (count, f.len() / count)
    };
    match params.family {
        Family::B => {
            let raised: Vec<Vec<f64>> = values
                .iter()
                .map(|row| row.iter().map(|&v| power(v, p)).collect())
                .collect();
            for jp in lo - 1..=imax {
                let first = (jp.max(imin) - imin) as usize;
                let (count, cells) = cubes_at(jp);
                let mut accs =
                    vec![Accumulator::new(params.family, p, q, raised.len() - first); count];
                for (slot, row) in raised[first..].iter().enumerate() {
                    for (c, acc) in accs.iter_mut().enumerate() {
                        let chunk = &row[c * cells..(c + 1) * cells];
                        let integral = if p.is_infinite() {
                            chunk.iter().copied().fold(0.0, f64::max)
                        } else {
                            chunk.iter().sum::<f64>() * h
                        };
                        acc.push_level_integral(slot, integral);
                    }
                }
                push(jp, accs);
            }
        }
        Family::F => {
            let e = Accumulator::new(Family::F, p, q, 1).raised_power();
            // running Σ_{i ≥ first} v_i^q (or max) per node, extended one level at a time
            let mut comb = vec![0.0f64; f.len()];
            let mut included = values.len();
            for jp in (lo - 1..=imax).rev() {
                let first = (jp.max(imin) - imin) as usize;
                while included > first {
                    included -= 1;
                    for (c, &v) in comb.iter_mut().zip(&values[included]) {
                        if q.is_infinite() {
                            *c = c.max(v);
                        } else {
                            *c += power(v, q);
                        }
                    }
                }
                let (count, cells) = cubes_at(jp);
                let mut accs = vec![Accumulator::new(params.family, p, q, 1); count];
                for (c, acc) in accs.iter_mut().enumerate() {
                    for &s in &comb[c * cells..(c + 1) * cells] {
                        let term = if q.is_infinite() {
                            power(s, e)
                        } else {
                            power(s, e / q)
                        };
                        acc.push_raised(h, term);
                    }
                }
                push(jp, accs);
            }
        }
    }
    outer_sup(&scaled, params, cfg, (lo, imax))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Region;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use std::f64::consts::PI;

    fn pair() -> LpPair {
        LpPair::new(6).unwrap()
    }

    /// A real mean-zero trigonometric polynomial with bins `1..=mmax`.
    fn trig_poly(seed: u64, len: usize, period: f64, mmax: usize) -> SampledSignal {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let terms: Vec<(f64, f64, f64)> = (1..=mmax)
            .map(|m| {
                (
                    2.0 * PI * m as f64 / period,
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                )
            })
            .collect();
        SampledSignal::from_fn(len, period, |x| {
            terms
                .iter()
                .map(|(w, a, b)| a * (w * x).cos() + b * (w * x).sin())
                .sum()
        })
        .unwrap()
    }

    #[test]
    fn partition_of_unity() {
        let p = pair();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10_000 {
            let xi = 10f64.powf(rng.gen_range(-3.0..3.0)) * if rng.gen() { 1.0 } else { -1.0 };
            assert!((p.partition_sum(xi) - 1.0).abs() < 1e-12, "xi = {xi}");
        }
    }

    #[test]
    fn profile_shape() {
        let p = pair();
        assert_eq!(p.phi_hat(0.49), 0.0);
        assert_eq!(p.phi_hat(2.01), 0.0);
        assert!((p.phi_hat(1.0) - 1.0).abs() < 1e-15);
        assert!(p.c0() > 0.1);
        for k in 0..=100 {
            let xi = 0.6 + k as f64 * (5.0 / 3.0 - 0.6) / 100.0;
            assert!(p.phi_hat(xi) >= p.c0() - 1e-12);
        }
        for k in 0..=20 {
            let t = k as f64 / 20.0;
            assert!((p.step(t) + p.step(1.0 - t) - 1.0).abs() < 1e-13);
        }
        assert!(LpPair::new(1).is_err());
    }

    #[test]
    fn pure_wave_blocks() {
        let p = pair();
        let (len, t) = (1024, 1.0);
        let m0 = 5usize;
        let w = 2.0 * PI * m0 as f64 / t;
        let f = SampledSignal::from_fn(len, t, |x| (w * x).cos()).unwrap();
        let blocks = analyze_blocks(&f, &p, (0, 8)).unwrap();
        for (i, b) in (0..).zip(&blocks) {
            let amp = p.level_symbol(i, w);
            for k in 0..len {
                let want = amp * (w * f.point(k)).cos();
                assert!((b.samples()[k] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn nyquist_guard() {
        let f = SampledSignal::zeros(256, 1.0).unwrap();
        assert_eq!(nyquist_level(256, 1.0), 7);
        assert!(analyze_blocks(&f, &pair(), (2, 7)).is_ok());
        assert!(matches!(
            analyze_blocks(&f, &pair(), (2, 8)),
            Err(Error::Nyquist { level: 8, max: 7 })
        ));
        assert_eq!(min_useful_level(1.0), 2);
    }

    #[test]
    fn reproduction_on_band() {
        let p = pair();
        let (len, t) = (2048, 1.0);
        // 2π·40 < 2^8, so every bin lies in the band [2^2, 2^10]
        let f = trig_poly(7, len, t, 40);
        let c = phi_transform_coeffs(&f, &p, (2, 10)).unwrap();
        let g = synthesize(&c, &p, len).unwrap();
        for (a, b) in f.samples().iter().zip(g.samples()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn single_coefficient_matches_series() {
        let p = pair();
        let (len, t) = (512, 2.0);
        let q = DyadicCube::new_1d(4, 11);
        let mut c = CoeffField::new((2, 6), Region::interval(0.0, t).unwrap()).unwrap();
        c.insert(q.clone(), 1.5).unwrap();
        let g = synthesize(&c, &p, len).unwrap();
        // periodized φ(2^j (x − x_Q)) as an explicit cosine series
        let xq = q.corner()[0];
        let l = q.side();
        for k in (0..len).step_by(7) {
            let x = g.point(k);
            let mut v = 0.0;
            for m in 1..len as i64 {
                let xi = 2.0 * PI * m as f64 / t;
                v += 2.0 * l / t * p.phi_hat(l * xi) * (xi * (x - xq)).cos();
            }
            assert!((g.samples()[k] - 1.5 * v).abs() < 1e-10);
        }
    }

    #[test]
    fn coefficients_of_a_synthesis_atom_match_direct_convolution() {
        let p = pair();
        let (len, t) = (256, 1.0);
        let q0 = DyadicCube::new_1d(4, 3);
        let atom = synthesize(&single(q0.clone(), t), &p, len).unwrap();
        let c = phi_transform_coeffs(&atom, &p, (2, 6)).unwrap();
        // ϕ_j on the torus as a cosine series, then a Riemann sum
        let kernel = |j: i32, x: f64| -> f64 {
            (1..len as i64 / 2)
                .map(|m| {
                    let xi = 2.0 * PI * m as f64 / t;
                    2.0 / t * p.level_symbol(j, xi) * (xi * x).cos()
                })
                .sum()
        };
        for j in 2..=6 {
            for k in 0..(1i64 << j) {
                let xp = k as f64 * pow2(-j);
                let direct: f64 = (0..len)
                    .map(|n| kernel(j, xp - atom.point(n)) * atom.samples()[n] * atom.step())
                    .sum();
                let got = c.get(&DyadicCube::new_1d(j, k));
                assert!(
                    (got - direct).abs() < 1e-10,
                    "j={j} k={k}: {got} vs {direct}"
                );
            }
        }
    }

    fn single(q: DyadicCube, t: f64) -> CoeffField {
        let mut c = CoeffField::new((2, 6), Region::interval(0.0, t).unwrap()).unwrap();
        c.insert(q, 1.0).unwrap();
        c
    }

    #[test]
    fn shift_covariance() {
        let p = pair();
        let (len, t) = (512, 1.0);
        let f = trig_poly(3, len, t, 20);
        let j0 = 3;
        let shift = len >> j0;
        let a = phi_transform_coeffs(&f, &p, (j0, 7)).unwrap();
        let b = phi_transform_coeffs(&f.shifted(shift as isize), &p, (j0, 7)).unwrap();
        for (q, v) in a.iter() {
            let moved = (q.index[0] + (1 << (q.level - j0))).rem_euclid(1 << q.level);
            let w = b.get(&DyadicCube::new_1d(q.level, moved));
            assert!((v - w).abs() < 1e-12);
        }
    }

    #[test]
    fn l2_norm_by_parseval() {
        let p = pair();
        let f = trig_poly(9, 1024, 1.0, 30);
        let params = SpaceParams::new(Family::F, 0.0, 0.0, 0.0, 2.0, 2.0);
        let v = function_space_norm(&f, &params, &p, (2, 9), &NormConfig::default()).unwrap();
        assert!((v.value - f.l2_norm()).abs() < 1e-10 * f.l2_norm());
        assert!(!v.diverging);
    }

    #[test]
    fn sup_norm_of_a_pure_wave() {
        let p = pair();
        let w = 2.0 * PI * 9.0;
        let f = SampledSignal::from_fn(1024, 1.0, |x| (w * x).cos()).unwrap();
        for sp in [0.0, 1.0, -0.5] {
            let params = SpaceParams::new(Family::B, 0.0, sp, 0.0, f64::INFINITY, f64::INFINITY);
            let v = function_space_norm(&f, &params, &p, (2, 9), &NormConfig::default()).unwrap();
            let want = (2..=9)
                .map(|i| pow2(i).powf(sp) * p.level_symbol(i, w))
                .fold(0.0, f64::max);
            assert!((v.value - want).abs() < 1e-12 * want);
        }
    }

    #[test]
    fn zero_in_zero_out() {
        let p = pair();
        let z = SampledSignal::zeros(128, 1.0).unwrap();
        assert!(phi_transform_coeffs(&z, &p, (2, 5)).unwrap().is_empty());
        let c = CoeffField::new((2, 5), Region::interval(0.0, 1.0).unwrap()).unwrap();
        assert_eq!(synthesize(&c, &p, 128).unwrap().max_abs(), 0.0);
        let params = SpaceParams::new(Family::F, 0.3, 0.2, 0.1, 2.0, 1.0);
        assert_eq!(
            function_space_norm(&z, &params, &p, (2, 5), &NormConfig::default())
                .unwrap()
                .value,
            0.0
        );
    }

    #[test]
    fn wave_meets_at_most_three_levels() {
        let p = pair();
        for m0 in [3usize, 10, 37, 100] {
            let w = 2.0 * PI * m0 as f64;
            let f = SampledSignal::from_fn(1024, 1.0, |x| (w * x).sin()).unwrap();
            let centre = w.log2().round() as i32;
            for (i, b) in (0..).zip(analyze_blocks(&f, &p, (0, 9)).unwrap()) {
                if (i - centre).abs() > 1 {
                    assert!(b.max_abs() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn distant_blocks_are_orthogonal() {
        let p = pair();
        let f = trig_poly(5, 1024, 1.0, 60);
        let blocks = analyze_blocks(&f, &p, (2, 9)).unwrap();
        for a in 0..blocks.len() {
            for b in a + 2..blocks.len() {
                let dot: f64 = blocks[a]
                    .samples()
                    .iter()
                    .zip(blocks[b].samples())
                    .map(|(x, y)| x * y)
                    .sum();
                let scale = blocks[a].l2_norm() * blocks[b].l2_norm() / blocks[a].step();
                assert!(dot.abs() <= 1e-12 * scale.max(1e-300));
            }
        }
    }

    #[test]
    fn windowed_wave_scales_with_smoothness() {
        let p = pair();
        let sp = 0.5;
        let params = SpaceParams::new(Family::B, 0.0, sp, 0.0, 2.0, 2.0);
        let norm = |m: f64| {
            let w = 2.0 * PI * m;
            let f = SampledSignal::from_fn(2048, 1.0, |x| {
                let b = if (0.25..0.75).contains(&x) {
                    (2.0 * PI * (x - 0.25)).sin().powi(2)
                } else {
                    0.0
                };
                b * (w * x).cos()
            })
            .unwrap();
            function_space_norm(&f, &params, &p, (2, 10), &NormConfig::default())
                .unwrap()
                .value
        };
        let ratio = norm(80.0) / norm(40.0);
        assert!((ratio / 2f64.powf(sp) - 1.0).abs() < 0.1, "ratio {ratio}");
    }

    #[test]
    fn convergence_index_formula() {
        let a = SpaceParams::new(Family::B, 0.5, 1.7, 0.2, 2.0, 2.0);
        assert_eq!(convergence_index(&a), 1);
        let b = SpaceParams::new(Family::B, -1.0, 0.0, -1.0, 1.0, 2.0);
        assert_eq!(convergence_index(&b), -1);
    }

    /// Direct node-by-node evaluation of the tilde (single-sup) norm.
    fn brute_tilde(f: &SampledSignal, params: &SpaceParams, levels: (i32, i32), outer: i32) -> f64 {
        let p = pair();
        let blocks = analyze_blocks(&f.mean_zero(), &p, levels).unwrap();
        let mut best = 0.0f64;
        for jp in levels.0 - outer - 1..=levels.1 {
            let side = pow2(-jp);
            let count = (f.period() / side).round().max(1.0) as usize;
            let i0 = jp.max(levels.0);
            for c in 0..count {
                let mut acc = Accumulator::new(
                    params.family,
                    params.p,
                    params.q,
                    (levels.1 - i0 + 1) as usize,
                );
                for k in 0..f.len() {
                    let x = f.point(k);
                    if ((x / side).floor() as usize).min(count - 1) != c {
                        continue;
                    }
                    let vals: Vec<f64> = (i0..=levels.1)
                        .map(|i| {
                            let b = blocks[(i - levels.0) as usize].samples()[k].abs();
                            pow2(i).powf(params.s_prime)
                                * b
                                * microlocal_weight(i, &params.x0, &[x], params.sigma)
                        })
                        .collect();
                    acc.push_node(f.step(), &vals);
                }
                best = best.max(side.powf(-params.s) * acc.finish(side, 1));
            }
        }
        best
    }

    #[test]
    fn fast_paths_match_node_by_node_evaluation() {
        let f = trig_poly(21, 256, 1.0, 25);
        let cfg = NormConfig::default();
        for (family, pp, qq) in [
            (Family::B, 2.0, 1.5),
            (Family::B, f64::INFINITY, 3.0),
            (Family::F, 1.5, 2.5),
            (Family::F, 2.0, f64::INFINITY),
            (Family::F, f64::INFINITY, 2.0),
            (Family::F, f64::INFINITY, f64::INFINITY),
        ] {
            let params = SpaceParams::new(family, 0.3, 0.4, -0.6, pp, qq)
                .with_x0(vec![0.4])
                .with_tilde(true);
            let got = function_space_norm(&f, &params, &pair(), (2, 6), &cfg)
                .unwrap()
                .value;
            let want = brute_tilde(&f, &params, (2, 6), cfg.outer_levels);
            assert!(
                (got - want).abs() < 1e-12 * want,
                "{family:?} {pp} {qq}: {got} vs {want}"
            );
        }
    }

    proptest! {
        #[test]
        fn coefficients_are_linear(s1 in 0u64..1000, s2 in 0u64..1000, a in -3.0f64..3.0) {
            let p = pair();
            let f = trig_poly(s1, 256, 1.0, 12);
            let g = trig_poly(s2, 256, 1.0, 12);
            let h = f.scaled(a).add(&g).unwrap();
            let cf = phi_transform_coeffs(&f, &p, (2, 6)).unwrap();
            let cg = phi_transform_coeffs(&g, &p, (2, 6)).unwrap();
            let ch = phi_transform_coeffs(&h, &p, (2, 6)).unwrap();
            let want = cf.scaled(a).add(&cg).unwrap();
            for (q, v) in ch.iter() {
                prop_assert!((v - want.get(q)).abs() < 1e-11);
            }
        }
    }
}
