//! Expected absolute error of the 1-nearest-neighbour predictor on a
//! GP-sampled function observed at uniform inputs on an interval.
//!
//! With `n` uniform inputs on `[0, L]`, the distance `d` from a query to its
//! nearest other input has (away from the interval ends) density
//! `2(n−1)/L · (1 − 2d/L)^(n−2)` on `[0, L/2]`. Given `d`, the difference of
//! two noisy GP observations is Gaussian with variance `V(d)`, and its
//! expected magnitude is `√(2/π)·√V(d)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{KernelSpec, NoiseSpec};
use crate::quadrature::integrate;

pub const ABS_TOL: f64 = 1e-10;
pub const REL_TOL: f64 = 1e-8;

const SQRT_2_OVER_PI: f64 = 0.797_884_560_802_865_4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundQuery {
    pub kernel: KernelSpec,
    pub noise: NoiseSpec,
    /// Total inputs on the interval, the query included.
    pub n_inputs: usize,
    pub length: f64,
}

impl BoundQuery {
    pub fn new(kernel: KernelSpec, noise: NoiseSpec, n_inputs: usize, length: f64) -> Result<Self> {
        let q = Self {
            kernel,
            noise,
            n_inputs,
            length,
        };
        q.validate()?;
        Ok(q)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_inputs < 2 {
            return Err(Error::domain(format!("need at least 2 inputs, got {}", self.n_inputs)));
        }
        if !(self.length.is_finite() && self.length > 0.0) {
            return Err(Error::domain(format!("interval length must be positive, got {}", self.length)));
        }
        Ok(())
    }
}

/// What the integral averages over the distance density.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrand {
    /// `√V(d)`: the expected magnitude given the distance.
    #[default]
    SqrtVariance,
    /// `V(d)` as literally displayed in the source derivation. Not an error
    /// magnitude; kept for comparison only.
    Variance,
}

/// Variance of `y(x) − y(x′)` for noisy observations at distance `d`.
pub fn variance_at_distance(kernel: &KernelSpec, noise: &NoiseSpec, d: f64) -> Result<f64> {
    let k = kernel.kernel_value(d)?;
    Ok(2.0 * kernel.output_variance() + 2.0 * noise.variance() - 2.0 * k)
}

/// Nearest-neighbour distance density; zero outside `[0, L/2]`.
pub fn nn_distance_pdf(n_inputs: usize, length: f64, d: f64) -> f64 {
    if n_inputs < 2 || !(0.0..=length / 2.0).contains(&d) {
        return 0.0;
    }
    2.0 * (n_inputs - 1) as f64 / length * (1.0 - 2.0 * d / length).powi(n_inputs as i32 - 2)
}

/// `P(D ≤ d) = 1 − (1 − 2d/L)^(n−1)`.
pub fn nn_distance_cdf(n_inputs: usize, length: f64, d: f64) -> f64 {
    if d <= 0.0 {
        0.0
    } else if d >= length / 2.0 {
        1.0
    } else {
        1.0 - (1.0 - 2.0 * d / length).powi(n_inputs as i32 - 1)
    }
}

pub fn expected_1nn_mae(query: &BoundQuery) -> Result<f64> {
    expected_1nn_mae_with(query, Integrand::SqrtVariance, ABS_TOL, REL_TOL)
}

pub fn expected_1nn_mae_with(query: &BoundQuery, integrand: Integrand, abs_tol: f64, rel_tol: f64) -> Result<f64> {
    query.validate()?;
    let BoundQuery {
        kernel,
        noise,
        n_inputs,
        length,
    } = *query;
    let f = |d: f64| {
        let v = variance_at_distance(&kernel, &noise, d).unwrap_or(f64::NAN).max(0.0);
        let g = match integrand {
            Integrand::SqrtVariance => v.sqrt(),
            Integrand::Variance => v,
        };
        g * nn_distance_pdf(n_inputs, length, d)
    };
    let r = integrate(f, 0.0, length / 2.0, abs_tol, rel_tol)?;
    Ok(SQRT_2_OVER_PI * r.value)
}

/// Bound for a prompt with `n_demos` demonstrations: the query plus the
/// demonstrations make `n_demos + 1` inputs. `None` when there is no
/// demonstration to copy.
pub fn bound_for_demos(
    kernel: &KernelSpec,
    noise: &NoiseSpec,
    n_demos: usize,
    length: f64,
) -> Result<Option<f64>> {
    if n_demos == 0 {
        return Ok(None);
    }
    expected_1nn_mae(&BoundQuery::new(*kernel, *noise, n_demos + 1, length)?).map(Some)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::Smoothness;

    fn paper_noise() -> NoiseSpec {
        NoiseSpec::new(0.001).unwrap()
    }

    #[test]
    fn variance_closed_form() {
        let k = KernelSpec::matern(Smoothness::Half, 1.0, 1.0).unwrap();
        let v = variance_at_distance(&k, &NoiseSpec::noiseless(), 1.0).unwrap();
        assert!((v - 1.264_241_117_657_115_36).abs() < 1e-14);
        let k = KernelSpec::squared_exponential(8.0, 0.001).unwrap();
        assert!((variance_at_distance(&k, &paper_noise(), 0.0).unwrap() - 0.002).abs() < 1e-18);
    }

    #[test]
    fn pdf_support_and_cdf() {
        assert_eq!(nn_distance_pdf(2, 29.0, 3.0), 2.0 / 29.0);
        assert_eq!(nn_distance_pdf(5, 29.0, 14.6), 0.0);
        assert_eq!(nn_distance_pdf(5, 29.0, -0.1), 0.0);
        assert_eq!(nn_distance_cdf(7, 29.0, 14.5), 1.0);
    }

    #[test]
    fn flat_kernel_gives_noise_only() {
        // Output variance 0 is rejected by KernelSpec, so use a tiny one.
        let k = KernelSpec::squared_exponential(1.0, 1e-300).unwrap();
        let q = BoundQuery::new(k, paper_noise(), 10, 29.0).unwrap();
        let v = expected_1nn_mae(&q).unwrap();
        assert!((v - 0.035_682_482_323_055_422_3).abs() < 1e-12, "{v}");
    }

    #[test]
    fn matches_high_precision_table() {
        // 30-digit reference quadrature, σ_f² = σ_ε² = 0.001, L = 29.
        let table: [(KernelSpec, [f64; 5]); 4] = [
            (
                KernelSpec::matern(Smoothness::Half, 1.0, 0.001).unwrap(),
                [0.0495261612885883, 0.0473682104610551, 0.0450256794997211, 0.0416054486993885, 0.0394042397584997],
            ),
            (
                KernelSpec::matern(Smoothness::Half, 8.0, 0.001).unwrap(),
                [0.0441189031933891, 0.0402022155772366, 0.0383009856592503, 0.0368570707165442, 0.0362970961094468],
            ),
            (
                KernelSpec::squared_exponential(1.0, 0.001).unwrap(),
                [0.0492482530867779, 0.0463169865149499, 0.0430637391233854, 0.0387799971372221, 0.0368328158049796],
            ),
            (
                KernelSpec::squared_exponential(8.0, 0.001).unwrap(),
                [0.0470278169354704, 0.0415935347166598, 0.0383479181589444, 0.0363154869709477, 0.0358591143505794],
            ),
        ];
        for (k, expected) in table {
            for (n, e) in [2, 5, 10, 25, 50].into_iter().zip(expected) {
                let v = expected_1nn_mae(&BoundQuery::new(k, paper_noise(), n, 29.0).unwrap()).unwrap();
                assert!((v - e).abs() / e < 1e-8, "{k} n={n}: {v} vs {e}");
            }
        }
    }

    #[test]
    fn tolerance_halving_is_stable() {
        let k = KernelSpec::matern(Smoothness::Half, 8.0, 0.001).unwrap();
        for n in [2, 7, 50] {
            let q = BoundQuery::new(k, paper_noise(), n, 29.0).unwrap();
            let a = expected_1nn_mae(&q).unwrap();
            let b = expected_1nn_mae_with(&q, Integrand::SqrtVariance, ABS_TOL / 2.0, REL_TOL / 2.0).unwrap();
            assert!((a - b).abs() / a <= 1e-9);
        }
    }

    #[test]
    fn rejects_small_n() {
        let k = KernelSpec::squared_exponential(1.0, 1.0).unwrap();
        assert!(BoundQuery::new(k, paper_noise(), 1, 29.0).is_err());
        assert!(BoundQuery::new(k, paper_noise(), 2, 0.0).is_err());
        assert_eq!(bound_for_demos(&k, &paper_noise(), 0, 29.0).unwrap(), None);
    }
}
