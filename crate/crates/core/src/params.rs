//! Parameter tuples selecting which norm is evaluated.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    /// Besov: outer ℓ^q over levels of inner L^p norms.
    B,
    /// Triebel–Lizorkin: L^p of the levelwise ℓ^q aggregate.
    F,
}

impl std::str::FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "B" | "b" => Ok(Family::B),
            "F" | "f" => Ok(Family::F),
            other => Err(Error::Parse(format!("unknown family {other:?}"))),
        }
    }
}

/// Full parameter tuple `(family, tilde, s, s', σ, p, q, x₀, n)`.
///
/// `p` and `q` may be `f64::INFINITY`. Infinite values serialize as the
/// string `"inf"`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpaceParams {
    pub family: Family,
    pub tilde: bool,
    pub s: f64,
    pub s_prime: f64,
    pub sigma: f64,
    #[serde(with = "ext_real")]
    pub p: f64,
    #[serde(with = "ext_real")]
    pub q: f64,
    pub x0: Vec<f64>,
    pub n: usize,
}

impl SpaceParams {
    /// One-dimensional parameters with `x₀ = 0`, `tilde = false`.
    pub fn new(family: Family, s: f64, s_prime: f64, sigma: f64, p: f64, q: f64) -> Self {
        Self {
            family,
            tilde: false,
            s,
            s_prime,
            sigma,
            p,
            q,
            x0: vec![0.0],
            n: 1,
        }
    }

    pub fn with_tilde(mut self, tilde: bool) -> Self {
        self.tilde = tilde;
        self
    }

    pub fn with_x0(mut self, x0: Vec<f64>) -> Self {
        self.n = x0.len();
        self.x0 = x0;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::param("dimension n must be at least 1"));
        }
        if self.x0.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: self.x0.len(),
            });
        }
        if !(self.p > 0.0) || !(self.q > 0.0) {
            return Err(Error::param("p and q must be positive"));
        }
        for v in [self.s, self.s_prime, self.sigma] {
            if !v.is_finite() {
                return Err(Error::param("s, s', sigma must be finite"));
            }
        }
        Ok(())
    }

    /// `J = n / min(1, p, q)` for F, `n / min(1, p)` for B.
    pub fn compute_j(&self) -> f64 {
        compute_j(self.family, self.n, self.p, self.q)
    }
}

pub fn compute_j(family: Family, n: usize, p: f64, q: f64) -> f64 {
    let m = match family {
        Family::F => 1f64.min(p).min(q),
        Family::B => 1f64.min(p),
    };
    n as f64 / m
}

/// Serde helper for extended reals in `(0, ∞]`.
pub(crate) mod ext_real {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => super::parse_ext_real(&t).map_err(serde::de::Error::custom),
        }
    }
}

/// Parses a real number, accepting `inf`/`infinity` (any case).
pub fn parse_ext_real(text: &str) -> Result<f64> {
    let t = text.trim();
    match t.to_ascii_lowercase().as_str() {
        "inf" | "infinity" | "+inf" => Ok(f64::INFINITY),
        _ => t
            .parse::<f64>()
            .map_err(|_| Error::Parse(format!("not a number: {t:?}"))),
    }
}
