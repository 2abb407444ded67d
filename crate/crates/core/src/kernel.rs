//! Stationary covariance functions and Gram matrices.
//!
//! Two families are supported: Matérn with half-integer smoothness
//! (ν ∈ {½, 1½, 2½}, evaluated through their closed forms) and the
//! squared exponential. A [`KernelSpec`] has a compact text record,
//! e.g. `matern,0.5,8,0.001` or `se,,8,0.001`, which is also its serde form.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Power of the length scale in the squared-exponential denominator,
/// `exp(-δ² / (2 ℓ^p))`.
///
/// The evaluation protocol being reproduced writes the denominator as `2ℓ`,
/// so `p = 1`. Set this to `2` for the conventional `exp(-δ² / (2ℓ²))`.
pub const SE_LENGTHSCALE_EXPONENT: i32 = 1;

/// Half-integer Matérn smoothness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Smoothness {
    Half,
    ThreeHalves,
    FiveHalves,
}

impl Smoothness {
    pub const ALL: [Smoothness; 3] = [Smoothness::Half, Smoothness::ThreeHalves, Smoothness::FiveHalves];

    pub fn value(self) -> f64 {
        match self {
            Smoothness::Half => 0.5,
            Smoothness::ThreeHalves => 1.5,
            Smoothness::FiveHalves => 2.5,
        }
    }

    pub fn from_value(nu: f64) -> Result<Self> {
        if nu == 0.5 {
            Ok(Smoothness::Half)
        } else if nu == 1.5 {
            Ok(Smoothness::ThreeHalves)
        } else if nu == 2.5 {
            Ok(Smoothness::FiveHalves)
        } else {
            Err(Error::domain(format!("unsupported Matérn smoothness {nu}; expected 0.5, 1.5 or 2.5")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum KernelFamily {
    Matern(Smoothness),
    SquaredExponential,
}

/// A covariance function with its hyperparameters.
///
/// Construct through [`KernelSpec::matern`] or
/// [`KernelSpec::squared_exponential`]; both reject non-positive or
/// non-finite length scales and variances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct KernelSpec {
    family: KernelFamily,
    lengthscale: f64,
    output_variance: f64,
}

impl KernelSpec {
    pub fn matern(nu: Smoothness, lengthscale: f64, output_variance: f64) -> Result<Self> {
        Self::new(KernelFamily::Matern(nu), lengthscale, output_variance)
    }

    pub fn squared_exponential(lengthscale: f64, output_variance: f64) -> Result<Self> {
        Self::new(KernelFamily::SquaredExponential, lengthscale, output_variance)
    }

    pub fn new(family: KernelFamily, lengthscale: f64, output_variance: f64) -> Result<Self> {
        if !(lengthscale.is_finite() && lengthscale > 0.0) {
            return Err(Error::domain(format!("lengthscale must be positive, got {lengthscale}")));
        }
        if !(output_variance.is_finite() && output_variance > 0.0) {
            return Err(Error::domain(format!(
                "output variance must be positive, got {output_variance}"
            )));
        }
        Ok(Self {
            family,
            lengthscale,
            output_variance,
        })
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn nu(&self) -> Option<Smoothness> {
        match self.family {
            KernelFamily::Matern(nu) => Some(nu),
            KernelFamily::SquaredExponential => None,
        }
    }

    pub fn lengthscale(&self) -> f64 {
        self.lengthscale
    }

    pub fn output_variance(&self) -> f64 {
        self.output_variance
    }

    /// Same kernel with a different output variance.
    pub fn with_output_variance(&self, output_variance: f64) -> Result<Self> {
        Self::new(self.family, self.lengthscale, output_variance)
    }

    /// Covariance at distance `delta`.
    pub fn kernel_value(&self, delta: f64) -> Result<f64> {
        if delta.is_nan() || delta < 0.0 {
            return Err(Error::domain(format!("distance must be non-negative, got {delta}")));
        }
        Ok(self.covariance(delta))
    }

    /// Unchecked evaluation; `delta` must be non-negative.
    pub(crate) fn covariance(&self, delta: f64) -> f64 {
        let s2 = self.output_variance;
        let r = delta / self.lengthscale;
        match self.family {
            KernelFamily::Matern(Smoothness::Half) => s2 * (-r).exp(),
            KernelFamily::Matern(Smoothness::ThreeHalves) => {
                let a = 3f64.sqrt() * r;
                s2 * (1.0 + a) * (-a).exp()
            }
            KernelFamily::Matern(Smoothness::FiveHalves) => {
                let a = 5f64.sqrt() * r;
                s2 * (1.0 + a + 5.0 * r * r / 3.0) * (-a).exp()
            }
            KernelFamily::SquaredExponential => {
                let denom = 2.0 * self.lengthscale.powi(SE_LENGTHSCALE_EXPONENT);
                s2 * (-(delta * delta) / denom).exp()
            }
        }
    }

    /// Short human-readable label, e.g. `Matérn 1½ (ℓ=8)`.
    pub fn label(&self) -> String {
        match self.family {
            KernelFamily::Matern(Smoothness::Half) => format!("Matérn ½ (ℓ={})", self.lengthscale),
            KernelFamily::Matern(Smoothness::ThreeHalves) => format!("Matérn 1½ (ℓ={})", self.lengthscale),
            KernelFamily::Matern(Smoothness::FiveHalves) => format!("Matérn 2½ (ℓ={})", self.lengthscale),
            KernelFamily::SquaredExponential => format!("SE (ℓ={})", self.lengthscale),
        }
    }

    /// Ordering key used wherever reports must not depend on input order.
    pub(crate) fn canonical_cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.family
            .cmp(&other.family)
            .then(self.lengthscale.total_cmp(&other.lengthscale))
            .then(self.output_variance.total_cmp(&other.output_variance))
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.family {
            KernelFamily::Matern(nu) => write!(
                f,
                "matern,{},{},{}",
                nu.value(),
                self.lengthscale,
                self.output_variance
            ),
            KernelFamily::SquaredExponential => {
                write!(f, "se,,{},{}", self.lengthscale, self.output_variance)
            }
        }
    }
}

impl FromStr for KernelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let fields: Vec<&str> = s.split(',').map(str::trim).collect();
        let [family, nu, lengthscale, variance] = fields.as_slice() else {
            return Err(Error::domain(format!(
                "kernel record needs 4 comma-separated fields (family,nu,lengthscale,variance), got {s:?}"
            )));
        };
        let num = |name: &str, v: &str| -> Result<f64> {
            v.parse::<f64>()
                .map_err(|_| Error::domain(format!("kernel record {s:?}: bad {name} {v:?}")))
        };
        let lengthscale = num("lengthscale", lengthscale)?;
        let variance = num("output_variance", variance)?;
        match family.to_ascii_lowercase().as_str() {
            "matern" => {
                let nu = Smoothness::from_value(num("nu", nu)?)?;
                KernelSpec::matern(nu, lengthscale, variance)
            }
            "se" => {
                if !nu.is_empty() {
                    return Err(Error::domain(format!("kernel record {s:?}: se takes no nu")));
                }
                KernelSpec::squared_exponential(lengthscale, variance)
            }
            other => Err(Error::domain(format!("unknown kernel family {other:?}"))),
        }
    }
}

impl TryFrom<String> for KernelSpec {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<KernelSpec> for String {
    fn from(k: KernelSpec) -> String {
        k.to_string()
    }
}

/// Observation noise variance σ_ε².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct NoiseSpec {
    noise_variance: f64,
}

impl NoiseSpec {
    pub fn new(noise_variance: f64) -> Result<Self> {
        if !(noise_variance.is_finite() && noise_variance >= 0.0) {
            return Err(Error::domain(format!(
                "noise variance must be non-negative, got {noise_variance}"
            )));
        }
        Ok(Self { noise_variance })
    }

    pub fn noiseless() -> Self {
        Self { noise_variance: 0.0 }
    }

    pub fn variance(&self) -> f64 {
        self.noise_variance
    }
}

impl TryFrom<f64> for NoiseSpec {
    type Error = Error;

    fn try_from(v: f64) -> Result<Self> {
        NoiseSpec::new(v)
    }
}

impl From<NoiseSpec> for f64 {
    fn from(n: NoiseSpec) -> f64 {
        n.noise_variance
    }
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Common dimension of a point list; `None` for an empty list.
pub(crate) fn common_dimension<P: AsRef<[f64]>>(points: &[P]) -> Result<Option<usize>> {
    let Some(first) = points.first() else {
        return Ok(None);
    };
    let d = first.as_ref().len();
    if d == 0 {
        return Err(Error::domain("points must have dimension at least 1"));
    }
    if let Some((i, p)) = points.iter().enumerate().find(|(_, p)| p.as_ref().len() != d) {
        return Err(Error::domain(format!(
            "point {i} has dimension {} but point 0 has dimension {d}",
            p.as_ref().len()
        )));
    }
    Ok(Some(d))
}

/// `k(X, X) + σ_ε² I`.
pub fn gram_matrix<P: AsRef<[f64]>>(spec: &KernelSpec, noise: &NoiseSpec, points: &[P]) -> Result<DMatrix<f64>> {
    common_dimension(points)?;
    let n = points.len();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        k[(i, i)] = spec.output_variance + noise.noise_variance;
        for j in 0..i {
            let v = spec.covariance(euclidean(points[i].as_ref(), points[j].as_ref()));
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    Ok(k)
}

/// `k(X, x*)`; dimensions are assumed already checked.
pub(crate) fn cross_covariance<P: AsRef<[f64]>>(spec: &KernelSpec, points: &[P], query: &[f64]) -> DVector<f64> {
    DVector::from_iterator(
        points.len(),
        points.iter().map(|p| spec.covariance(euclidean(p.as_ref(), query))),
    )
}
