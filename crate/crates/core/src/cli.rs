//! Command-line front end: configuration files, presets and dispatch.
//!
//! Configuration is line-oriented `key = value` text. Keys before the first
//! `[section]` apply to every command; a `[norm]` (etc.) section applies to
//! that command only. Command-line flags override file values.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use crate::almost_diag::{self, AlmostDiagSpec, HarnessConfig};
use crate::embeddings::{self, CaseId, HarnessOptions};
use crate::error::{Error, Result};
use crate::field::NormConfig;
use crate::lattice::DyadicCube;
use crate::lp::{self, LpPair};
use crate::operators::{self, BoundednessConfig, ImageConfig, Operator};
use crate::params::{parse_ext_real, Family, SpaceParams};
use crate::regularity::{self, ScanConfig, SignalKind, TestSignalSpec};
use crate::report::Report;
use crate::seed::SeedTree;
use crate::signal::SampledSignal;
use crate::wavelet::{self, WaveletBasis};

/// Parsed `key = value` file; section keys are stored as `section.key`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConfigFile {
    pub entries: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        let mut section: Option<String> = None;
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split(['#', ';']).next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| {
                        Error::Parse(format!("line {}: unterminated section header", no + 1))
                    })?
                    .trim();
                if name.is_empty() {
                    return Err(Error::Parse(format!("line {}: empty section name", no + 1)));
                }
                section = Some(name.to_string());
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::Parse(format!(
                    "line {}: expected key = value, got {line:?}",
                    no + 1
                ))
            })?;
            let key = k.trim().replace('-', "_");
            if key.is_empty() {
                return Err(Error::Parse(format!("line {}: empty key", no + 1)));
            }
            let full = match &section {
                Some(s) => format!("{s}.{key}"),
                None => key,
            };
            entries.insert(full, v.trim().to_string());
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    /// Global keys overlaid with the keys of `section`.
    pub fn for_command(&self, section: &str) -> BTreeMap<String, String> {
        let prefix = format!("{section}.");
        let mut out: BTreeMap<String, String> = self
            .entries
            .iter()
            .filter(|(k, _)| !k.contains('.'))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        for (k, v) in &self.entries {
            if let Some(rest) = k.strip_prefix(&prefix) {
                out.insert(rest.to_string(), v.clone());
            }
        }
        out
    }
}

fn preset_args(arg: Option<&str>) -> Result<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    for item in arg
        .unwrap_or("")
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
    {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("preset argument {item:?} is not key=value")))?;
        out.insert(k.trim().to_string(), parse_ext_real(v)?);
    }
    Ok(out)
}

/// Parameter tuples of the named classical spaces, in dimension one.
///
/// - `homogeneous:family=..,s=..,p=..,q=..` is `Ė^s_{pq}`.
/// - `besov-type:s=..,tau=..,p=..,q=..[,family=F]` is `A^{nτ}(Ė^s_{pq})⁰`.
/// - `morrey:u=..,p=..` is `A^{n(1/p−1/u)}(Ḟ⁰_{p2})⁰`, `1 < p < u < ∞`.
/// - `local-morrey:p=..,lambda=..` is `(Ḟ⁰_{p2})^{λ/p}` at the origin.
/// - `b-sigma-morrey:p=..,lambda=..,sigma=..` is `A^{λ+n/p}(Ḟ⁰_{p2})^σ`
///   at the origin.
///
/// The first two accept `family=F`; the default is B.
pub fn preset(spec: &str) -> Result<SpaceParams> {
    let (name, arg) = match spec.split_once(':') {
        Some((n, a)) => (n.trim(), Some(a)),
        None => (spec.trim(), None),
    };
    let mut family = None;
    let numeric = arg.map(|a| {
        a.split(',')
            .filter(|item| match item.split_once('=') {
                Some((k, v)) if k.trim() == "family" => {
                    family = Some(v.trim().to_string());
                    false
                }
                _ => true,
            })
            .collect::<Vec<_>>()
            .join(",")
    });
    let args = preset_args(numeric.as_deref())?;
    let get = |k: &str| {
        args.get(k)
            .copied()
            .ok_or_else(|| Error::Parse(format!("preset {name} needs {k}=")))
    };
    let allow = |keys: &[&str]| -> Result<()> {
        match args.keys().find(|k| !keys.contains(&k.as_str())) {
            Some(k) => Err(Error::Parse(format!("preset {name} does not take {k}="))),
            None => Ok(()),
        }
    };
    let fam = |default: Family| -> Result<Family> {
        family.as_deref().map_or(Ok(default), Family::from_str)
    };
    let n = 1.0;
    let params = match name {
        "homogeneous" => {
            allow(&["s", "p", "q"])?;
            SpaceParams::new(fam(Family::B)?, 0.0, get("s")?, 0.0, get("p")?, get("q")?)
        }
        "besov-type" => {
            allow(&["s", "tau", "p", "q"])?;
            let tau = get("tau")?;
            if tau < 0.0 {
                return Err(Error::param(format!("besov-type needs τ ≥ 0, got {tau}")));
            }
            SpaceParams::new(
                fam(Family::B)?,
                n * tau,
                get("s")?,
                0.0,
                get("p")?,
                get("q")?,
            )
        }
        "morrey" => {
            allow(&["u", "p"])?;
            let (u, p) = (get("u")?, get("p")?);
            if !(1.0 < p && p < u && u.is_finite()) {
                return Err(Error::param(format!(
                    "morrey needs 1 < p < u < ∞, got p = {p}, u = {u}"
                )));
            }
            SpaceParams::new(Family::F, n * (1.0 / p - 1.0 / u), 0.0, 0.0, p, 2.0)
        }
        "local-morrey" => {
            allow(&["p", "lambda"])?;
            let (p, lambda) = (get("p")?, get("lambda")?);
            if !(1.0 < p && p.is_finite()) {
                return Err(Error::param(format!(
                    "local-morrey needs 1 < p < ∞, got {p}"
                )));
            }
            SpaceParams::new(Family::F, 0.0, 0.0, lambda / p, p, 2.0)
        }
        "b-sigma-morrey" => {
            allow(&["p", "lambda", "sigma"])?;
            let (p, lambda) = (get("p")?, get("lambda")?);
            if !(1.0 < p && p.is_finite()) {
                return Err(Error::param(format!(
                    "b-sigma-morrey needs 1 < p < ∞, got {p}"
                )));
            }
            SpaceParams::new(Family::F, lambda + n / p, 0.0, get("sigma")?, p, 2.0)
        }
        _ => return Err(Error::Parse(format!("unknown preset {name:?}"))),
    };
    if family.is_some() && !matches!(name, "homogeneous" | "besov-type") {
        return Err(Error::Parse(format!("preset {name} fixes the family")));
    }
    let params = params.with_x0(vec![0.0]);
    params.validate()?;
    Ok(params)
}

/// Resolved key/value settings of one run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub command: String,
    pub values: BTreeMap<String, String>,
}

const SPACE_KEYS: &[&str] = &[
    "preset", "family", "tilde", "s", "s_prime", "sigma", "p", "q", "x0",
];
const NORM_KEYS: &[&str] = &[
    "outer_levels",
    "plateau_span",
    "divergence_factor",
    "budget_level_min",
    "budget_level_max",
    "budget_max_cubes",
];
const SIGNAL_KEYS: &[&str] = &["kind", "alpha", "beta", "x0", "radius", "len", "period"];

fn allowed_keys(command: &str) -> Vec<&'static str> {
    let own: &[&str] = match command {
        "norm" => &["signal", "coeffs", "jmin", "jmax", "lp_order"],
        "scan" => &[
            "signal",
            "basis",
            "s_primes",
            "sigmas",
            "windows",
            "jmin",
            "threshold",
            "slopes_out",
            "gnuplot_out",
        ],
        "embed-suite" => &[
            "case",
            "size",
            "depths",
            "jmin",
            "density",
            "margin",
            "growth_tol",
        ],
        "ad-harness" => &[
            "r1",
            "r2",
            "l",
            "depths",
            "size",
            "jmin",
            "excess",
            "growth_tol",
        ],
        "op-check" => &[
            "op",
            "out_s_prime",
            "image",
            "basis",
            "r1",
            "r2",
            "eps",
            "cubes",
            "size",
            "depths",
            "len",
            "growth_tol",
        ],
        "synth" => &["out"],
        "oracle" => &["basis", "jmin", "jmax", "rel_tol", "out"],
        _ => &[],
    };
    let mut keys = vec!["seed"];
    keys.extend_from_slice(own);
    match command {
        "synth" | "oracle" => keys.extend_from_slice(SIGNAL_KEYS),
        "embed-suite" => keys.extend_from_slice(NORM_KEYS),
        _ => {
            keys.extend_from_slice(SPACE_KEYS);
            keys.extend_from_slice(NORM_KEYS);
        }
    }
    keys
}

impl RunConfig {
    /// `file` values for `command`, overridden by `flags`; unknown keys are
    /// rejected.
    pub fn resolve(
        command: &str,
        file: Option<&ConfigFile>,
        flags: BTreeMap<String, String>,
    ) -> Result<Self> {
        let mut values = file.map(|f| f.for_command(command)).unwrap_or_default();
        values.extend(flags);
        let allowed = allowed_keys(command);
        if let Some(k) = values.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(Error::Parse(format!(
                "unknown key {k:?} for command {command}"
            )));
        }
        Ok(Self {
            command: command.to_string(),
            values,
        })
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.values
            .get(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|_| Error::Parse(format!("bad value {v:?} for {key}")))
            })
            .transpose()
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn real(&self, key: &str) -> Result<Option<f64>> {
        self.values.get(key).map(|v| parse_ext_real(v)).transpose()
    }

    pub fn real_or(&self, key: &str, default: f64) -> Result<f64> {
        Ok(self.real(key)?.unwrap_or(default))
    }

    fn require(&self, key: &str) -> Result<&str> {
        self.values
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| Error::Parse(format!("{} needs {key}", self.command)))
    }

    pub fn seed(&self) -> Result<u64> {
        self.get_or("seed", 0)
    }

    /// Root of every random stream of this run.
    pub fn seed_tree(&self) -> Result<SeedTree> {
        Ok(SeedTree::new(self.seed()?).derive(&self.command))
    }

    /// Preset (if any) with explicit keys applied on top.
    pub fn space_params(&self) -> Result<SpaceParams> {
        let mut p = match self.values.get("preset") {
            Some(name) => preset(name)?,
            None => SpaceParams::new(Family::B, 0.0, 0.0, 0.0, 2.0, 2.0).with_x0(vec![0.5]),
        };
        if let Some(f) = self.get::<Family>("family")? {
            p.family = f;
        }
        if let Some(t) = self.get::<bool>("tilde")? {
            p.tilde = t;
        }
        for (key, slot) in [
            ("s", &mut p.s),
            ("s_prime", &mut p.s_prime),
            ("sigma", &mut p.sigma),
            ("p", &mut p.p),
            ("q", &mut p.q),
        ] {
            if let Some(v) = self.real(key)? {
                *slot = v;
            }
        }
        if let Some(x) = self.real("x0")? {
            p.x0 = vec![x];
        }
        p.validate()?;
        Ok(p)
    }

    /// `base` with the norm and budget keys applied.
    pub fn norm_config(&self, base: NormConfig) -> Result<NormConfig> {
        let mut cfg = base;
        cfg.outer_levels = self.get_or("outer_levels", cfg.outer_levels)?;
        cfg.plateau_span = self.get_or("plateau_span", cfg.plateau_span)?;
        cfg.divergence_factor = self.get_or("divergence_factor", cfg.divergence_factor)?;
        cfg.budget.level_min = self.get_or("budget_level_min", cfg.budget.level_min)?;
        cfg.budget.level_max = self.get_or("budget_level_max", cfg.budget.level_max)?;
        cfg.budget.max_cubes = self.get_or("budget_max_cubes", cfg.budget.max_cubes)?;
        Ok(cfg)
    }

    pub fn signal_spec(&self) -> Result<TestSignalSpec> {
        let kind = match self.require("kind")? {
            "cusp" => SignalKind::Cusp {
                alpha: self.real_or("alpha", 0.5)?,
            },
            "chirp" => SignalKind::Chirp {
                alpha: self.real_or("alpha", 1.0)?,
                beta: self.real_or("beta", 1.0)?,
            },
            "step" => SignalKind::Step,
            "smooth_bump" | "smooth-bump" | "bump" => SignalKind::SmoothBump,
            other => return Err(Error::Parse(format!("unknown signal kind {other:?}"))),
        };
        TestSignalSpec::new(
            kind,
            self.real_or("x0", 0.5)?,
            self.real_or("radius", 0.125)?,
        )
    }

    fn echo(&self) -> Value {
        json!(self.values)
    }
}

/// `a:b:step` (inclusive) or a comma-separated list.
pub fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() == 3 {
        let (a, b, h) = (
            parse_ext_real(parts[0])?,
            parse_ext_real(parts[1])?,
            parse_ext_real(parts[2])?,
        );
        if !(h > 0.0) || b < a {
            return Err(Error::Parse(format!("bad range {text:?}")));
        }
        let count = ((b - a) / h + 1e-9).floor() as usize;
        return Ok((0..=count).map(|i| a + h * i as f64).collect());
    }
    text.split(',').map(parse_ext_real).collect()
}

fn parse_levels(text: &str) -> Result<Vec<i32>> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<i32>()
                .map_err(|_| Error::Parse(format!("bad level list {text:?}")))
        })
        .collect()
}

fn levels_from(cfg: &RunConfig, default: &[i32]) -> Result<Vec<i32>> {
    match cfg.values.get("depths") {
        Some(t) => parse_levels(t),
        None => Ok(default.to_vec()),
    }
}

#[derive(Serialize)]
struct NormResult {
    params: SpaceParams,
    coefficients: String,
    levels: (i32, i32),
    grid: crate::signal::GridMeta,
    lp_order: u32,
    truncation: NormConfig,
    norm: crate::field::NormValue,
}

fn run_norm(cfg: &RunConfig) -> Result<Report> {
    let params = cfg.space_params()?;
    let f = SampledSignal::load(Path::new(cfg.require("signal")?))?;
    let truncation = cfg.norm_config(NormConfig::default())?;
    let nyq = lp::nyquist_level(f.len(), f.period());
    let levels = (
        cfg.get_or("jmin", 2)?,
        cfg.get_or("jmax", (nyq - 1).min(12))?,
    );
    let lp_order = cfg.get_or("lp_order", 6u32)?;
    let pair = LpPair::new(lp_order)?;
    let side = cfg
        .values
        .get("coeffs")
        .cloned()
        .unwrap_or_else(|| "lp".to_string());
    let norm = match side.as_str() {
        "lp" => lp::function_space_norm(&f, &params, &pair, levels, &truncation)?,
        "phi" => lp::phi_transform_coeffs(&f.mean_zero(), &pair, levels)?
            .space_norm(&params, &truncation)?,
        other => {
            let m = other
                .strip_prefix("wavelet:")
                .and_then(|m| m.parse::<usize>().ok())
                .ok_or_else(|| {
                    Error::Parse(format!(
                        "coeffs must be lp, phi or wavelet:<moments>, got {other:?}"
                    ))
                })?;
            wavelet::dwt_analyze(&f, &WaveletBasis::new(m)?, levels)?
                .space_norm(&params, &truncation)?
        }
    };
    let result = NormResult {
        params,
        coefficients: side,
        levels,
        grid: f.meta(),
        lp_order,
        truncation,
        norm,
    };
    Report::new("norm", cfg.echo(), result, None)
}

fn run_scan(cfg: &RunConfig) -> Result<Report> {
    let f = SampledSignal::load(Path::new(cfg.require("signal")?))?;
    let basis = WaveletBasis::new(cfg.get_or("basis", 10)?)?;
    let d = ScanConfig::default();
    let scan = ScanConfig {
        family: cfg.get_or("family", d.family)?,
        tilde: cfg.get_or("tilde", d.tilde)?,
        s: cfg.real_or("s", d.s)?,
        p: cfg.real_or("p", d.p)?,
        q: cfg.real_or("q", d.q)?,
        x0: cfg.real_or("x0", d.x0)?,
        s_primes: cfg
            .values
            .get("s_primes")
            .map(|t| parse_grid(t))
            .transpose()?
            .unwrap_or(d.s_primes),
        sigmas: cfg
            .values
            .get("sigmas")
            .map(|t| parse_grid(t))
            .transpose()?
            .unwrap_or(d.sigmas),
        jmin: cfg.get_or("jmin", d.jmin)?,
        windows: cfg
            .values
            .get("windows")
            .map(|t| parse_levels(t))
            .transpose()?
            .unwrap_or(d.windows),
        slope_threshold: cfg.get_or("threshold", d.slope_threshold)?,
        norm: cfg.norm_config(d.norm)?,
    };
    if cfg.values.contains_key("preset")
        || cfg.values.contains_key("s_prime")
        || cfg.values.contains_key("sigma")
    {
        return Err(Error::Parse(
            "scan sweeps s' and sigma; use s_primes and sigmas".into(),
        ));
    }
    let r = regularity::frontier_scan(&f, &scan, &basis)?;
    if let Some(path) = cfg.values.get("slopes_out") {
        r.write_slopes_csv(fs::File::create(path)?)?;
    }
    if let Some(path) = cfg.values.get("gnuplot_out") {
        r.write_gnuplot(std::io::BufWriter::new(fs::File::create(path)?))?;
    }
    let (along_s, along_sigma) = r.monotone();
    let result = json!({
        "grid": f.meta(),
        "flagged": r.flagged(),
        "monotone_in_s_prime": along_s,
        "monotone_in_sigma": along_sigma,
        "scan": r,
    });
    Report::new("scan", cfg.echo(), result, None)
}

fn run_embed_suite(cfg: &RunConfig) -> Result<Report> {
    let ids: Vec<CaseId> = match cfg.values.get("case").map(String::as_str).unwrap_or("all") {
        "all" => CaseId::ALL.to_vec(),
        list => list
            .split(',')
            .map(CaseId::from_str)
            .collect::<Result<_>>()?,
    };
    let d = HarnessOptions::default();
    let opts = HarnessOptions {
        density: cfg.get_or("density", d.density)?,
        jmin: cfg.get_or("jmin", d.jmin)?,
        depths: levels_from(cfg, &d.depths)?,
        margin: cfg.get_or("margin", d.margin)?,
        growth_tol: cfg.get_or("growth_tol", d.growth_tol)?,
        norm: cfg.norm_config(d.norm)?,
    };
    let size = cfg.get_or("size", 50usize)?;
    let tree = cfg.seed_tree()?;
    let reports = ids
        .iter()
        .map(|id| {
            embeddings::run_case(
                &embeddings::default_case(*id),
                size,
                tree.derive(&id.to_string()).as_u64(),
                &opts,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let pass = reports.iter().all(|r| r.pass);
    Report::new(
        "embed-suite",
        cfg.echo(),
        json!({ "options": opts, "cases": reports }),
        Some(pass),
    )
}

fn run_ad_harness(cfg: &RunConfig) -> Result<Report> {
    let params = cfg.space_params()?;
    let d = HarnessConfig::default();
    let hc = HarnessConfig {
        ensemble_size: cfg.get_or("size", d.ensemble_size)?,
        jmin: cfg.get_or("jmin", d.jmin)?,
        depths: levels_from(cfg, &d.depths)?,
        excess: cfg.get_or("excess", d.excess)?,
        growth_tol: cfg.get_or("growth_tol", d.growth_tol)?,
        norm: cfg.norm_config(d.norm.clone())?,
        ..d
    };
    let seed = cfg.seed_tree()?.as_u64();
    let thresholds = almost_diag::boundedness_thresholds(&params);
    let explicit = [cfg.real("r1")?, cfg.real("r2")?, cfg.real("l")?];
    match explicit {
        [Some(r1), Some(r2), Some(l)] => {
            let spec = AlmostDiagSpec::new(r1, r2, l)?;
            let r = almost_diag::boundedness_harness(&spec, &params, seed, &hc)?;
            let result = json!({ "config": hc, "thresholds": thresholds, "harness": r });
            Report::new("ad-harness", cfg.echo(), result, None)
        }
        [None, None, None] => {
            let check = almost_diag::threshold_check(&params, seed, &hc)?;
            let pass = check.pass;
            let result = json!({ "config": hc, "thresholds": thresholds, "check": check });
            Report::new("ad-harness", cfg.echo(), result, Some(pass))
        }
        _ => Err(Error::Parse("give all of r1, r2, l or none of them".into())),
    }
}

fn parse_cubes(text: &str) -> Result<Vec<DyadicCube>> {
    text.split(',')
        .map(|item| {
            let (j, k) = item
                .split_once(':')
                .ok_or_else(|| Error::Parse(format!("cube {item:?} is not level:index")))?;
            let j = j
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad level in {item:?}")))?;
            let k = k
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad index in {item:?}")))?;
            Ok(DyadicCube::new_1d(j, k))
        })
        .collect()
}

fn run_op_check(cfg: &RunConfig) -> Result<Report> {
    let op = Operator::parse(
        cfg.values
            .get("op")
            .map(String::as_str)
            .unwrap_or("hilbert"),
    )?;
    let params_in = cfg.space_params()?;
    let params_out = SpaceParams {
        s_prime: cfg.real_or("out_s_prime", params_in.s_prime - op.order())?,
        ..params_in.clone()
    };
    let d = BoundednessConfig::default();
    let bc = BoundednessConfig {
        ensemble_size: cfg.get_or("size", d.ensemble_size)?,
        depths: levels_from(cfg, &d.depths)?,
        len: cfg.get_or("len", d.len)?,
        growth_tol: cfg.get_or("growth_tol", d.growth_tol)?,
        norm: cfg.norm_config(d.norm.clone())?,
        ..d
    };
    let seed = cfg.seed_tree()?.as_u64();
    let bounded = operators::operator_boundedness_check(&op, &params_in, &params_out, seed, &bc)?;
    let mut pass = bounded.verdict == almost_diag::Verdict::Bounded;
    let image = if cfg.get_or("image", false)? {
        let basis = WaveletBasis::new(cfg.get_or("basis", 4)?)?;
        let cubes = parse_cubes(
            cfg.values
                .get("cubes")
                .map(String::as_str)
                .unwrap_or("5:7,5:20"),
        )?;
        let r = operators::image_molecule_check(
            &op,
            &basis,
            &cubes,
            cfg.get_or("r1", 1)?,
            cfg.get_or("r2", 3)?,
            cfg.real_or("eps", 0.5)?,
            &ImageConfig::default(),
        )?;
        pass &= r.pass;
        Some(r)
    } else {
        None
    };
    let result = json!({ "config": bc, "boundedness": bounded, "image": image });
    Report::new("op-check", cfg.echo(), result, Some(pass))
}

fn run_synth(cfg: &RunConfig) -> Result<Report> {
    let spec = cfg.signal_spec()?;
    let f = regularity::synth_signal(
        &spec,
        cfg.get_or("len", 1usize << 14)?,
        cfg.real_or("period", 1.0)?,
    )?;
    let out = PathBuf::from(cfg.require("out")?);
    f.save(&out)?;
    let result = json!({
        "spec": spec,
        "grid": f.meta(),
        "max_abs": f.max_abs(),
        "l2_norm": f.l2_norm(),
    });
    Report::new("synth", cfg.echo(), result, None)
}

fn run_oracle(cfg: &RunConfig) -> Result<Report> {
    let spec = cfg.signal_spec()?;
    let basis = WaveletBasis::new(cfg.get_or("basis", 4)?)?;
    let levels = (cfg.get_or("jmin", 2)?, cfg.get_or("jmax", 8)?);
    let period = cfg.real_or("period", 1.0)?;
    let o = regularity::oracle_coeffs(
        &spec,
        &basis,
        levels,
        period,
        cfg.real_or("rel_tol", 1e-10)?,
    )?;
    let f = regularity::synth_signal(&spec, cfg.get_or("len", 1usize << 14)?, period)?;
    let dwt = wavelet::dwt_analyze(&f, &basis, levels)?;
    let deviation = regularity::max_level_deviation(&dwt, &o.field, levels);
    if let Some(path) = cfg.values.get("out") {
        o.field
            .write_csv(std::io::BufWriter::new(fs::File::create(path)?))?;
    }
    let result = json!({
        "spec": spec,
        "levels": levels,
        "quadrature_bits": o.bits,
        "grid": f.meta(),
        "dwt_max_level_deviation": deviation,
        "coefficients": o.field.len(),
    });
    Report::new("oracle", cfg.echo(), result, None)
}

/// Dispatches a resolved configuration.
pub fn run(cfg: &RunConfig) -> Result<Report> {
    match cfg.command.as_str() {
        "norm" => run_norm(cfg),
        "scan" => run_scan(cfg),
        "embed-suite" => run_embed_suite(cfg),
        "ad-harness" => run_ad_harness(cfg),
        "op-check" => run_op_check(cfg),
        "synth" => run_synth(cfg),
        "oracle" => run_oracle(cfg),
        other => Err(Error::Parse(format!("unknown command {other:?}"))),
    }
}

/// 2 for configuration and budget problems, 1 for everything that ran
/// into a numerical or assertion failure.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Parse(_)
        | Error::InvalidParameter(_)
        | Error::Budget(_)
        | Error::DimensionMismatch { .. }
        | Error::Io(_)
        | Error::Csv(_)
        | Error::Json(_)
        | Error::Unsupported(_)
        | Error::Nyquist { .. }
        | Error::OutsideWindow(_) => 2,
        Error::Aliasing { .. }
        | Error::Resolution(_)
        | Error::Quadrature(_)
        | Error::IllConditioned { .. } => 1,
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "microlocal",
    version,
    about = "Truncated 2-microlocal norms, scans and operator checks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone, Default)]
pub struct Common {
    /// key = value configuration file with optional [command] sections
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// JSON report path; stdout when omitted
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Any configuration key, as KEY=VALUE
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct SpaceArgs {
    /// e.g. morrey:u=4,p=2 or besov-type:s=0.5,tau=0.25,p=2,q=2
    #[arg(long)]
    pub preset: Option<String>,
    /// B or F
    #[arg(long)]
    pub family: Option<String>,
    #[arg(long)]
    pub tilde: Option<bool>,
    #[arg(long = "s", allow_negative_numbers = true)]
    pub s: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub s_prime: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub sigma: Option<String>,
    #[arg(short, long)]
    pub p: Option<String>,
    #[arg(short, long)]
    pub q: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub x0: Option<String>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct SignalArgs {
    /// cusp, chirp, step or smooth_bump
    #[arg(long)]
    pub kind: Option<String>,
    #[arg(long)]
    pub alpha: Option<String>,
    #[arg(long)]
    pub beta: Option<String>,
    #[arg(long)]
    pub x0: Option<String>,
    /// Cutoff radius
    #[arg(long)]
    pub radius: Option<String>,
    #[arg(long)]
    pub len: Option<usize>,
    #[arg(long)]
    pub period: Option<String>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Norm of a sampled signal (CSV with JSON sidecar)
    Norm {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        space: SpaceArgs,
        #[arg(long)]
        signal: Option<PathBuf>,
        /// lp, phi or wavelet:<moments>
        #[arg(long)]
        coeffs: Option<String>,
        #[arg(long, allow_negative_numbers = true)]
        jmin: Option<i32>,
        #[arg(long)]
        jmax: Option<i32>,
    },
    /// Slope-flag scan over the (s', sigma) grid
    Scan {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        space: SpaceArgs,
        #[arg(long)]
        signal: Option<PathBuf>,
        /// Vanishing moments of the Daubechies basis
        #[arg(long)]
        basis: Option<usize>,
        /// a:b:step or a comma list
        #[arg(long, allow_hyphen_values = true)]
        s_primes: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        sigmas: Option<String>,
        /// Deepest level of each truncation window, e.g. 6,8,10
        #[arg(long)]
        windows: Option<String>,
        #[arg(long)]
        slopes_out: Option<PathBuf>,
        #[arg(long)]
        gnuplot_out: Option<PathBuf>,
    },
    /// Embedding relations on random coefficient ensembles
    EmbedSuite {
        #[command(flatten)]
        common: Common,
        /// Case id, comma list, or all
        #[arg(long)]
        case: Option<String>,
        #[arg(long)]
        size: Option<usize>,
        #[arg(long)]
        depths: Option<String>,
    },
    /// Almost-diagonal boundedness harness
    AdHarness {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        space: SpaceArgs,
        #[arg(long)]
        r1: Option<String>,
        #[arg(long)]
        r2: Option<String>,
        #[arg(long)]
        l: Option<String>,
        #[arg(long)]
        depths: Option<String>,
        #[arg(long)]
        size: Option<usize>,
    },
    /// Operator boundedness and molecule images
    OpCheck {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        space: SpaceArgs,
        /// identity, hilbert, bessel:<mu>, derivative:<k> or symbol:<file>
        #[arg(long)]
        op: Option<String>,
        #[arg(long, allow_negative_numbers = true)]
        out_s_prime: Option<String>,
        /// Also check images of wavelets against the molecule envelopes
        #[arg(long)]
        image: bool,
        #[arg(long)]
        basis: Option<usize>,
        #[arg(long)]
        depths: Option<String>,
        #[arg(long)]
        size: Option<usize>,
    },
    /// Writes a test signal
    Synth {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        signal: SignalArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Quadrature wavelet coefficients compared with the pyramid transform
    Oracle {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        signal: SignalArgs,
        #[arg(long)]
        basis: Option<usize>,
        #[arg(long)]
        jmin: Option<i32>,
        #[arg(long)]
        jmax: Option<i32>,
        #[arg(long)]
        rel_tol: Option<String>,
        /// Coefficient CSV
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

struct Flags(BTreeMap<String, String>);

impl Flags {
    fn put<T: ToString>(&mut self, key: &str, v: &Option<T>) {
        if let Some(v) = v {
            self.0.insert(key.to_string(), v.to_string());
        }
    }

    fn path(&mut self, key: &str, v: &Option<PathBuf>) {
        self.put(key, &v.as_ref().map(|p| p.display().to_string()));
    }

    fn space(&mut self, a: &SpaceArgs) {
        self.put("preset", &a.preset);
        self.put("family", &a.family);
        self.put("tilde", &a.tilde);
        self.put("s", &a.s);
        self.put("s_prime", &a.s_prime);
        self.put("sigma", &a.sigma);
        self.put("p", &a.p);
        self.put("q", &a.q);
        self.put("x0", &a.x0);
    }

    fn signal(&mut self, a: &SignalArgs) {
        self.put("kind", &a.kind);
        self.put("alpha", &a.alpha);
        self.put("beta", &a.beta);
        self.put("x0", &a.x0);
        self.put("radius", &a.radius);
        self.put("len", &a.len);
        self.put("period", &a.period);
    }
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Norm { .. } => "norm",
            Command::Scan { .. } => "scan",
            Command::EmbedSuite { .. } => "embed-suite",
            Command::AdHarness { .. } => "ad-harness",
            Command::OpCheck { .. } => "op-check",
            Command::Synth { .. } => "synth",
            Command::Oracle { .. } => "oracle",
        }
    }

    fn common(&self) -> &Common {
        match self {
            Command::Norm { common, .. }
            | Command::Scan { common, .. }
            | Command::EmbedSuite { common, .. }
            | Command::AdHarness { common, .. }
            | Command::OpCheck { common, .. }
            | Command::Synth { common, .. }
            | Command::Oracle { common, .. } => common,
        }
    }

    fn flags(&self) -> Result<BTreeMap<String, String>> {
        let mut f = Flags(BTreeMap::new());
        match self {
            Command::Norm {
                space,
                signal,
                coeffs,
                jmin,
                jmax,
                ..
            } => {
                f.space(space);
                f.path("signal", signal);
                f.put("coeffs", coeffs);
                f.put("jmin", jmin);
                f.put("jmax", jmax);
            }
            Command::Scan {
                space,
                signal,
                basis,
                s_primes,
                sigmas,
                windows,
                slopes_out,
                gnuplot_out,
                ..
            } => {
                f.space(space);
                f.path("signal", signal);
                f.put("basis", basis);
                f.put("s_primes", s_primes);
                f.put("sigmas", sigmas);
                f.put("windows", windows);
                f.path("slopes_out", slopes_out);
                f.path("gnuplot_out", gnuplot_out);
            }
            Command::EmbedSuite {
                case, size, depths, ..
            } => {
                f.put("case", case);
                f.put("size", size);
                f.put("depths", depths);
            }
            Command::AdHarness {
                space,
                r1,
                r2,
                l,
                depths,
                size,
                ..
            } => {
                f.space(space);
                f.put("r1", r1);
                f.put("r2", r2);
                f.put("l", l);
                f.put("depths", depths);
                f.put("size", size);
            }
            Command::OpCheck {
                space,
                op,
                out_s_prime,
                image,
                basis,
                depths,
                size,
                ..
            } => {
                f.space(space);
                f.put("op", op);
                f.put("out_s_prime", out_s_prime);
                if *image {
                    f.put("image", &Some(true));
                }
                f.put("basis", basis);
                f.put("depths", depths);
                f.put("size", size);
            }
            Command::Synth { signal, out, .. } => {
                f.signal(signal);
                f.path("out", out);
            }
            Command::Oracle {
                signal,
                basis,
                jmin,
                jmax,
                rel_tol,
                out,
                ..
            } => {
                f.signal(signal);
                f.put("basis", basis);
                f.put("jmin", jmin);
                f.put("jmax", jmax);
                f.put("rel_tol", rel_tol);
                f.path("out", out);
            }
        }
        let common = self.common();
        for item in &common.set {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("--set expects KEY=VALUE, got {item:?}")))?;
            f.0.insert(k.trim().replace('-', "_"), v.trim().to_string());
        }
        f.put("seed", &common.seed);
        Ok(f.0)
    }
}

impl Cli {
    /// Configuration file, then flags; returns the report destination too.
    pub fn resolve(&self) -> Result<(RunConfig, Option<PathBuf>)> {
        let common = self.command.common();
        let file = common.config.as_deref().map(ConfigFile::load).transpose()?;
        let cfg = RunConfig::resolve(self.command.name(), file.as_ref(), self.command.flags()?)?;
        Ok((cfg, common.report.clone()))
    }
}

/// Runs the parsed command line and returns the process exit code.
pub fn main_with(cli: Cli) -> i32 {
    let outcome = cli.resolve().and_then(|(cfg, dest)| {
        let report = run(&cfg)?;
        match &dest {
            Some(path) => report.save(path)?,
            None => report.write_to(std::io::stdout().lock())?,
        }
        Ok(report)
    });
    match outcome {
        Ok(r) if r.pass == Some(false) => {
            eprintln!("microlocal {}: assertion failed", r.command);
            1
        }
        Ok(_) => 0,
        Err(e) => {
            eprintln!("microlocal: {e}");
            exit_code(&e)
        }
    }
}
