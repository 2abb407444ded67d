//! Exact Gaussian-process inference: prior sampling and the posterior
//! predictive at a single query point.

use std::sync::atomic::{AtomicU64, Ordering};

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{common_dimension, cross_covariance, gram_matrix, KernelSpec, NoiseSpec};
use crate::rng::stream_rng;

/// Diagonal jitter tried, relative to σ_f², when a factorization fails.
pub const JITTER_STEPS: [f64; 2] = [1e-9, 1e-6];

static CLAMPED_VARIANCES: AtomicU64 = AtomicU64::new(0);

/// Number of negative posterior variances clamped to zero so far in this
/// process.
pub fn clamped_variance_count() -> u64 {
    CLAMPED_VARIANCES.load(Ordering::Relaxed)
}

/// One in-context demonstration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Demo {
    pub x: Vec<f64>,
    pub y: f64,
}

impl Demo {
    pub fn new(x: Vec<f64>, y: f64) -> Self {
        Self { x, y }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PosteriorPredictive {
    pub mean: f64,
    /// Variance of the latent value f*.
    pub variance_f: f64,
    /// Variance of a noisy observation y*: `variance_f + σ_ε²`.
    pub variance_y: f64,
}

/// Cholesky factorization with the jitter ladder from [`JITTER_STEPS`].
///
/// Returns the factor and the jitter that was added (0 when none).
pub(crate) fn factorize(matrix: DMatrix<f64>, output_variance: f64) -> Result<(Cholesky<f64, Dyn>, f64)> {
    if let Some(chol) = Cholesky::new(matrix.clone()) {
        return Ok((chol, 0.0));
    }
    for rel in JITTER_STEPS {
        let jitter = rel * output_variance;
        let mut m = matrix.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += jitter;
        }
        if let Some(chol) = Cholesky::new(m) {
            return Ok((chol, jitter));
        }
    }
    let diag = matrix.diagonal();
    let (lo, hi) = diag
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let eig = matrix.clone().symmetric_eigenvalues();
    let (emin, emax) = eig
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    Err(Error::Numerical {
        message: "Cholesky factorization failed after jitter retries".into(),
        diagnostics: format!(
            "size {n}, diagonal in [{lo:e}, {hi:e}], eigenvalues in [{emin:e}, {emax:e}], condition ~{cond:e}",
            n = matrix.nrows(),
            cond = emax / emin.abs().max(f64::MIN_POSITIVE)
        ),
    })
}

fn clamp_variance(v: f64) -> f64 {
    if v < 0.0 {
        CLAMPED_VARIANCES.fetch_add(1, Ordering::Relaxed);
        0.0
    } else {
        v
    }
}

/// Posterior predictive at `query` after conditioning on `demos`.
///
/// `mean = k*ᵀ K_ε⁻¹ y`, `variance_f = k(x*, x*) − k*ᵀ K_ε⁻¹ k*`, both
/// through triangular solves against the Cholesky factor of `K_ε`.
pub fn posterior_predictive(
    spec: &KernelSpec,
    noise: &NoiseSpec,
    demos: &[Demo],
    query: &[f64],
) -> Result<PosteriorPredictive> {
    if query.is_empty() {
        return Err(Error::domain("query point must have dimension at least 1"));
    }
    let xs: Vec<&[f64]> = demos.iter().map(|d| d.x.as_slice()).collect();
    if let Some(d) = common_dimension(&xs)? {
        if d != query.len() {
            return Err(Error::domain(format!(
                "query has dimension {} but demonstrations have dimension {d}",
                query.len()
            )));
        }
    }
    let prior = spec.output_variance();
    if demos.is_empty() {
        return Ok(PosteriorPredictive {
            mean: 0.0,
            variance_f: prior,
            variance_y: prior + noise.variance(),
        });
    }
    let k = gram_matrix(spec, noise, &xs)?;
    let (chol, _) = factorize(k, prior)?;
    let y = DVector::from_iterator(demos.len(), demos.iter().map(|d| d.y));
    let k_star = cross_covariance(spec, &xs, query);
    Ok(predict_with_factor(&chol, &k_star, &y, prior, noise.variance()))
}

fn predict_with_factor(
    chol: &Cholesky<f64, Dyn>,
    k_star: &DVector<f64>,
    y: &DVector<f64>,
    prior: f64,
    noise_variance: f64,
) -> PosteriorPredictive {
    let l = chol.l_dirty();
    let v = l
        .solve_lower_triangular(k_star)
        .expect("Cholesky factor has a positive diagonal");
    let w = l
        .solve_lower_triangular(y)
        .expect("Cholesky factor has a positive diagonal");
    let mean = v.dot(&w);
    let variance_f = clamp_variance(prior - v.dot(&v));
    PosteriorPredictive {
        mean,
        variance_f,
        variance_y: variance_f + noise_variance,
    }
}

/// Posterior predictives for every prefix of an ordered point sequence.
///
/// The Cholesky factor of a leading principal block is the leading block of
/// the full factor, so one factorization of the whole sequence serves every
/// `prefix(n)` query: demonstrations `0..n`, query point `n`.
pub struct PrefixPosterior<'a> {
    spec: KernelSpec,
    noise_variance: f64,
    points: Vec<&'a [f64]>,
    ys: Vec<f64>,
    chol: Option<Cholesky<f64, Dyn>>,
}

impl<'a> PrefixPosterior<'a> {
    pub fn new(spec: &KernelSpec, noise: &NoiseSpec, points: Vec<&'a [f64]>, ys: Vec<f64>) -> Result<Self> {
        if points.len() != ys.len() {
            return Err(Error::domain("points and outputs differ in length"));
        }
        common_dimension(&points)?;
        // The last point is only ever a query.
        let demos = points.len().saturating_sub(1);
        let chol = if demos == 0 {
            None
        } else {
            let k = gram_matrix(spec, noise, &points[..demos])?;
            Some(factorize(k, spec.output_variance())?.0)
        };
        Ok(Self {
            spec: *spec,
            noise_variance: noise.variance(),
            points,
            ys,
            chol,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Predictive at point `n` given points `0..n`.
    pub fn prefix(&self, n: usize) -> Result<PosteriorPredictive> {
        if n >= self.points.len() {
            return Err(Error::domain(format!(
                "prefix {n} out of range for {} points",
                self.points.len()
            )));
        }
        let prior = self.spec.output_variance();
        if n == 0 {
            return Ok(PosteriorPredictive {
                mean: 0.0,
                variance_f: prior,
                variance_y: prior + self.noise_variance,
            });
        }
        let chol = self.chol.as_ref().expect("factor exists when there are demonstrations");
        let l = chol.l_dirty().view((0, 0), (n, n)).into_owned();
        let k_star = cross_covariance(&self.spec, &self.points[..n], self.points[n]);
        let y = DVector::from_column_slice(&self.ys[..n]);
        let v = l.solve_lower_triangular(&k_star).expect("positive diagonal");
        let w = l.solve_lower_triangular(&y).expect("positive diagonal");
        let variance_f = clamp_variance(prior - v.dot(&v));
        Ok(PosteriorPredictive {
            mean: v.dot(&w),
            variance_f,
            variance_y: variance_f + self.noise_variance,
        })
    }
}

/// One draw of `f(X)` from the zero-mean GP prior.
///
/// `L z` with `L` the (jittered) Cholesky factor of the noise-free Gram
/// matrix and `z` a standard-normal vector from the stream keyed by `seed`.
pub fn sample_function<P: AsRef<[f64]>>(spec: &KernelSpec, points: &[P], seed: u64) -> Result<Vec<f64>> {
    if points.is_empty() {
        return Err(Error::domain("cannot sample a function at zero points"));
    }
    common_dimension(points)?;
    if let Some((i, j)) = first_duplicate(points) {
        return Err(Error::domain(format!("points {i} and {j} coincide; the Gram matrix is degenerate")));
    }
    let k = gram_matrix(spec, &NoiseSpec::noiseless(), points)?;
    let (chol, _) = factorize(k, spec.output_variance())?;
    let mut rng = stream_rng(seed, &[]);
    let z = DVector::from_iterator(points.len(), (0..points.len()).map(|_| StandardNormal.sample(&mut rng)));
    let f = chol.l_dirty().lower_triangle() * z;
    Ok(f.iter().copied().collect())
}

pub(crate) fn first_duplicate<P: AsRef<[f64]>>(points: &[P]) -> Option<(usize, usize)> {
    for i in 0..points.len() {
        for j in 0..i {
            if points[i].as_ref() == points[j].as_ref() {
                return Some((j, i));
            }
        }
    }
    None
}
