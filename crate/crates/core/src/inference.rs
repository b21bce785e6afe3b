//! Sparse Bayesian learning over the occupancy vector.
//!
//! Each cell carries a zero-mean Gaussian prior with its own variance
//! `gamma[m]`. With a Gaussian likelihood `N(X beta, Sigma)` the posterior is
//! Gaussian with
//!
//! ```text
//! V  = (Gamma^-1 + X^T Sigma^-1 X)^-1
//! mu = V X^T Sigma^-1 y
//! ```
//!
//! Sensing rows are one-hot, so `X^T Sigma^-1 X` is diagonal and the whole
//! posterior factorizes per cell. [`Evidence`] keeps the two per-cell sums
//! that the posterior depends on; stacking order of measurements is therefore
//! irrelevant and adding a measurement is `O(Q)`.

use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::sensing::Measurement;

/// Hyperparameters of the inverse-gamma hyperprior and numerical guards.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, bound(deserialize = "T: Real + Deserialize<'de>"))]
pub struct SblConfig<T> {
    /// Inverse-gamma shape.
    pub a: T,
    /// Inverse-gamma scale.
    pub b: T,
    /// EM rounds per fit.
    pub em_iterations: usize,
    /// Added to every noise variance before it is inverted.
    pub jitter: T,
    /// Lower bound on every prior variance.
    pub gamma_floor: T,
    /// Agents carry their prior variances from one decision to the next
    /// instead of restarting every fit from one.
    pub warm_start: bool,
}

impl<T: Real> Default for SblConfig<T> {
    fn default() -> Self {
        Self {
            a: T::zero(),
            b: T::zero(),
            em_iterations: 1,
            jitter: T::of(1e-9),
            gamma_floor: T::of(1e-8),
            warm_start: false,
        }
    }
}

impl<T: Real> SblConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let ok = |x: T| x >= T::zero() && x.is_finite();
        if !(ok(self.a) && ok(self.b) && ok(self.jitter)) {
            return Err(Error::config("SBL a, b and jitter must be finite and >= 0"));
        }
        if !(self.gamma_floor > T::zero() && self.gamma_floor.is_finite()) {
            return Err(Error::config("SBL gamma_floor must be positive"));
        }
        Ok(())
    }

    pub fn cast<U: Real>(&self) -> SblConfig<U> {
        SblConfig {
            a: U::of(self.a.as_f64()),
            b: U::of(self.b.as_f64()),
            em_iterations: self.em_iterations,
            jitter: U::of(self.jitter.as_f64()),
            gamma_floor: U::of(self.gamma_floor.as_f64()),
            warm_start: self.warm_start,
        }
    }
}

/// Sufficient statistics of a stacked measurement set:
/// `diag(X^T Sigma^-1 X)` and `X^T Sigma^-1 y`.
#[derive(Debug, Clone, PartialEq)]
pub struct Evidence<T> {
    precision: Vec<T>,
    weighted: Vec<T>,
    rows: usize,
}

impl<T: Real> Evidence<T> {
    pub fn new(cells: usize) -> Self {
        Self {
            precision: vec![T::zero(); cells],
            weighted: vec![T::zero(); cells],
            rows: 0,
        }
    }

    pub fn from_measurements<'a, I>(cells: usize, data: I, jitter: T) -> Result<Self>
    where
        I: IntoIterator<Item = &'a Measurement>,
    {
        let mut ev = Self::new(cells);
        for m in data {
            ev.add(m, jitter)?;
        }
        Ok(ev)
    }

    pub fn add(&mut self, m: &Measurement, jitter: T) -> Result<()> {
        for (cell, y, var) in m.rows() {
            self.add_row(cell, T::of(y), T::of(var), jitter)?;
        }
        Ok(())
    }

    pub fn add_row(&mut self, cell: usize, y: T, variance: T, jitter: T) -> Result<()> {
        if cell >= self.precision.len() {
            return Err(Error::config(format!(
                "sensing row references cell {cell} outside grid of {}",
                self.precision.len()
            )));
        }
        let s = variance + jitter;
        if !(s > T::zero()) || !y.is_finite() {
            return Err(Error::Numerical {
                message: format!("non-positive noise variance at cell {cell}; raise jitter"),
                condition: f64::INFINITY,
            });
        }
        let p = s.recip();
        self.precision[cell] = self.precision[cell] + p;
        self.weighted[cell] = self.weighted[cell] + p * y;
        self.rows += 1;
        Ok(())
    }

    pub fn cells(&self) -> usize {
        self.precision.len()
    }

    /// Number of stacked sensing rows.
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn precision(&self) -> &[T] {
        &self.precision
    }

    pub fn weighted(&self) -> &[T] {
        &self.weighted
    }
}

/// Gaussian belief `N(mu, V)` together with the prior variances that produced it.
///
/// `V` is diagonal for one-hot sensing; only its diagonal is stored.
#[derive(Debug, Clone, PartialEq)]
pub struct SblPosterior<T> {
    pub mu: Vec<T>,
    pub var: Vec<T>,
    pub gamma: Vec<T>,
}

impl<T: Real> SblPosterior<T> {
    /// Belief before any data: `mu = 0`, `V = diag(gamma)`.
    pub fn prior(gamma: Vec<T>) -> Self {
        Self {
            mu: vec![T::zero(); gamma.len()],
            var: gamma.clone(),
            gamma,
        }
    }

    pub fn len(&self) -> usize {
        self.mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }

    /// Dense row-major `V`.
    pub fn covariance(&self) -> Vec<T> {
        let m = self.len();
        let mut out = vec![T::zero(); m * m];
        for (i, &v) in self.var.iter().enumerate() {
            out[i * m + i] = v;
        }
        out
    }

    /// `log det V`.
    pub fn log_det(&self) -> T {
        self.var.iter().map(|v| v.ln()).sum()
    }

    /// CSV rows `cell,mu,var,gamma`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "cell,mu,var,gamma")?;
        for m in 0..self.len() {
            writeln!(w, "{m},{},{},{}", self.mu[m], self.var[m], self.gamma[m])?;
        }
        Ok(())
    }
}

/// Closed-form posterior for the given prior variances.
pub fn compute_posterior<T: Real>(evidence: &Evidence<T>, gamma: &[T]) -> Result<SblPosterior<T>> {
    if gamma.len() != evidence.cells() {
        return Err(Error::config(format!(
            "gamma has {} entries, grid has {}",
            gamma.len(),
            evidence.cells()
        )));
    }
    let mut mu = Vec::with_capacity(gamma.len());
    let mut var = Vec::with_capacity(gamma.len());
    for ((&g, &p), &w) in gamma.iter().zip(evidence.precision()).zip(evidence.weighted()) {
        if !(g > T::zero()) || !g.is_finite() {
            return Err(Error::Numerical {
                message: format!("prior variance {g} is not positive and finite"),
                condition: f64::INFINITY,
            });
        }
        let v = (g.recip() + p).recip();
        let mean = v * w;
        if !v.is_finite() || !mean.is_finite() {
            return Err(Error::Numerical {
                message: "posterior moments are not finite".into(),
                condition: condition_estimate(evidence, gamma),
            });
        }
        var.push(v);
        mu.push(mean);
    }
    Ok(SblPosterior {
        mu,
        var,
        gamma: gamma.to_vec(),
    })
}

/// Ratio of the largest to the smallest diagonal of the posterior precision.
fn condition_estimate<T: Real>(evidence: &Evidence<T>, gamma: &[T]) -> f64 {
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for (&g, &p) in gamma.iter().zip(evidence.precision()) {
        let d = (g.recip() + p).as_f64();
        lo = lo.min(d);
        hi = hi.max(d);
    }
    hi / lo
}

/// Draw `mu + L z` with `L L^T = V`.
pub fn sample_posterior<T, R>(post: &SblPosterior<T>, jitter: T, rng: &mut R) -> Result<Vec<T>>
where
    T: Real,
    R: Rng + ?Sized,
    StandardNormal: Distribution<T>,
{
    post.mu
        .iter()
        .zip(&post.var)
        .map(|(&mu, &v)| {
            let v = if v >= T::zero() { v } else { v + jitter };
            if !(v >= T::zero()) {
                return Err(Error::Numerical {
                    message: format!("posterior variance {v} is negative"),
                    condition: f64::INFINITY,
                });
            }
            let z: T = StandardNormal.sample(rng);
            Ok(mu + v.sqrt() * z)
        })
        .collect()
}

/// EM maximization step: `gamma = (V_mm + mu_m^2 + 2b) / (1 + 2a)`, floored.
pub fn em_update_gamma<T: Real>(post: &SblPosterior<T>, config: &SblConfig<T>) -> Vec<T> {
    let two = T::one() + T::one();
    let denom = T::one() + two * config.a;
    post.mu
        .iter()
        .zip(&post.var)
        .map(|(&mu, &v)| ((v + mu * mu + two * config.b) / denom).max(config.gamma_floor))
        .collect()
}

/// Alternate posterior and EM updates starting from unit prior variances.
pub fn fit<T: Real>(evidence: &Evidence<T>, config: &SblConfig<T>) -> Result<SblPosterior<T>> {
    fit_from(evidence, vec![T::one(); evidence.cells()], config)
}

/// [`fit`] with explicit initial prior variances.
pub fn fit_from<T: Real>(evidence: &Evidence<T>, gamma: Vec<T>, config: &SblConfig<T>) -> Result<SblPosterior<T>> {
    let mut post = compute_posterior(evidence, &gamma)?;
    for _ in 0..config.em_iterations {
        let gamma = em_update_gamma(&post, config);
        post = compute_posterior(evidence, &gamma)?;
    }
    Ok(post)
}

/// `1` where the posterior mean strictly exceeds `threshold`.
pub fn estimate_beta<T: Real>(post: &SblPosterior<T>, threshold: T) -> Vec<u8> {
    post.mu.iter().map(|&m| u8::from(m > threshold)).collect()
}
