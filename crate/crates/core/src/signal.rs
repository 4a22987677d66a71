//! Uniformly sampled signals on a periodic interval `[0, T)`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::Region;

/// Samples `f(k h)`, `h = T / N`, of a function on the torus `[0, T)`.
///
/// `N` and `T` are powers of two so that every dyadic corner coarser than
/// the grid step is a sample point.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledSignal {
    samples: Vec<f64>,
    period: f64,
}

/// Grid metadata stored next to a signal CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridMeta {
    #[serde(rename = "N")]
    pub len: usize,
    #[serde(rename = "T")]
    pub period: f64,
    pub n: usize,
}

pub(crate) fn is_pow2_real(x: f64) -> bool {
    x > 0.0 && x.log2().fract() == 0.0
}

impl SampledSignal {
    pub fn new(samples: Vec<f64>, period: f64) -> Result<Self> {
        if !samples.len().is_power_of_two() || samples.len() < 2 {
            return Err(Error::param(format!(
                "sample count {} is not a power of two",
                samples.len()
            )));
        }
        if !is_pow2_real(period) {
            return Err(Error::param(format!(
                "period {period} is not a power of two"
            )));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("samples must be finite"));
        }
        Ok(Self { samples, period })
    }

    pub fn zeros(len: usize, period: f64) -> Result<Self> {
        Self::new(vec![0.0; len], period)
    }

    /// Samples `f` at `x_k = k T / N`.
    pub fn from_fn(len: usize, period: f64, f: impl Fn(f64) -> f64) -> Result<Self> {
        let h = period / len as f64;
        Self::new((0..len).map(|k| f(k as f64 * h)).collect(), period)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn step(&self) -> f64 {
        self.period / self.samples.len() as f64
    }

    pub fn dim(&self) -> usize {
        1
    }

    pub fn domain(&self) -> Region {
        Region::unit(1, self.period)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [f64] {
        &mut self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn point(&self, k: usize) -> f64 {
        k as f64 * self.step()
    }

    /// Same grid, new samples.
    pub fn with_samples(&self, samples: Vec<f64>) -> Result<Self> {
        if samples.len() != self.samples.len() {
            return Err(Error::DimensionMismatch {
                expected: self.samples.len(),
                got: samples.len(),
            });
        }
        Self::new(samples, self.period)
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.samples.len() as f64
    }

    /// Removes the zero-frequency component.
    pub fn mean_zero(&self) -> Self {
        let m = self.mean();
        Self {
            samples: self.samples.iter().map(|v| v - m).collect(),
            period: self.period,
        }
    }

    /// `(Σ |f_k|² h)^{1/2}`.
    pub fn l2_norm(&self) -> f64 {
        (self.samples.iter().map(|v| v * v).sum::<f64>() * self.step()).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `f(x − m h)` (circular).
    pub fn shifted(&self, m: isize) -> Self {
        let n = self.samples.len() as isize;
        let samples = (0..n)
            .map(|k| self.samples[(k - m).rem_euclid(n) as usize])
            .collect();
        Self {
            samples,
            period: self.period,
        }
    }

    pub fn scaled(&self, lambda: f64) -> Self {
        Self {
            samples: self.samples.iter().map(|v| lambda * v).collect(),
            period: self.period,
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if other.samples.len() != self.samples.len() || other.period != self.period {
            return Err(Error::param("signals live on different grids"));
        }
        Ok(Self {
            samples: self
                .samples
                .iter()
                .zip(&other.samples)
                .map(|(a, b)| a + b)
                .collect(),
            period: self.period,
        })
    }

    pub fn meta(&self) -> GridMeta {
        GridMeta {
            len: self.samples.len(),
            period: self.period,
            n: 1,
        }
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut cw = csv::Writer::from_writer(w);
        cw.write_record(["index", "value"])?;
        for (k, v) in self.samples.iter().enumerate() {
            cw.write_record([k.to_string(), format!("{v:e}")])?;
        }
        cw.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R, meta: &GridMeta) -> Result<Self> {
        if meta.n != 1 {
            return Err(Error::Unsupported(format!(
                "signals of dimension {}",
                meta.n
            )));
        }
        let mut samples = vec![f64::NAN; meta.len];
        let mut cr = csv::Reader::from_reader(r);
        for rec in cr.records() {
            let rec = rec?;
            if rec.len() != 2 {
                return Err(Error::Parse(format!(
                    "expected 2 columns, got {}",
                    rec.len()
                )));
            }
            let k: usize = rec[0]
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad index {:?}", &rec[0])))?;
            let v: f64 = rec[1]
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad value {:?}", &rec[1])))?;
            if k >= meta.len {
                return Err(Error::Parse(format!("index {k} beyond N = {}", meta.len)));
            }
            samples[k] = v;
        }
        if samples.iter().any(|v| v.is_nan()) {
            return Err(Error::Parse("missing sample indices".into()));
        }
        Self::new(samples, meta.period)
    }

    /// Writes `path` (CSV) and the sidecar returned by [`sidecar_path`].
    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_csv(BufWriter::new(File::create(path)?))?;
        let side = File::create(sidecar_path(path))?;
        serde_json::to_writer_pretty(side, &self.meta())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let meta: GridMeta =
            serde_json::from_reader(BufReader::new(File::open(sidecar_path(path))?))?;
        Self::read_csv(BufReader::new(File::open(path)?), &meta)
    }
}

/// `s.csv` → `s.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_validation() {
        assert!(SampledSignal::new(vec![0.0; 6], 1.0).is_err());
        assert!(SampledSignal::new(vec![0.0; 8], 3.0).is_err());
        assert!(SampledSignal::new(vec![0.0; 8], 0.5).is_ok());
    }

    #[test]
    fn shift_and_mean() {
        let s = SampledSignal::new(vec![1.0, 2.0, 3.0, 6.0], 1.0).unwrap();
        assert_eq!(s.shifted(1).samples(), &[6.0, 1.0, 2.0, 3.0]);
        assert_eq!(s.mean_zero().mean(), 0.0);
        assert_eq!(s.step(), 0.25);
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        let s = SampledSignal::from_fn(16, 2.0, |x| (x * 3.0).sin()).unwrap();
        s.save(&path).unwrap();
        let text = std::fs::read_to_string(dir.path().join("s.json")).unwrap();
        assert!(text.contains("\"N\": 16"));
        assert_eq!(SampledSignal::load(&path).unwrap(), s);
    }
}
