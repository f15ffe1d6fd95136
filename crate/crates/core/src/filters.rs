//! Linear filters over the samples of one symbol interval and their SINR.
//!
//! The decision variable is `y = f . r`. With equiprobable on-off keying the
//! SINR of `f` is
//!
//! ```text
//! SINR(f) = 0.5 (f . c_s)^2 / f^T B f,   B = 0.5 diag(c_s) + C_i
//! ```
//!
//! which is a generalized Rayleigh quotient. Its maximizer is
//! `f = B^{-1} c_s` ([`matched_filter`]) with value `0.5 c_s^T B^{-1} c_s`
//! ([`optimal_sinr`]). [`rayleigh_quotient_oracle`] reaches the same answer
//! through the dominant eigenpair of `B^{-1} c_s c_s^T` and is kept as an
//! independent check.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::Cir;
use crate::error::{invalid, Error, Result};
use crate::stats::{stream_rng, InterferenceCov};

const POWER_TOL: f64 = 1e-12;
const POWER_MAX_ITER: usize = 10_000;
const POWER_RESTART_SEED: u64 = 0x005e_ed0f_e16e;

/// Where a filter's weights came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterKind {
    Matched,
    Sum,
    Correlator,
    Peak,
    Custom,
}

impl FilterKind {
    /// The four designs compared in a sweep.
    pub const BENCHMARKED: [FilterKind; 4] = [
        FilterKind::Matched,
        FilterKind::Sum,
        FilterKind::Correlator,
        FilterKind::Peak,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FilterKind::Matched => "matched",
            FilterKind::Sum => "sum",
            FilterKind::Correlator => "correlator",
            FilterKind::Peak => "peak",
            FilterKind::Custom => "custom",
        }
    }
}

impl fmt::Display for FilterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FilterKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "matched" => Ok(FilterKind::Matched),
            "sum" => Ok(FilterKind::Sum),
            "correlator" => Ok(FilterKind::Correlator),
            "peak" => Ok(FilterKind::Peak),
            "custom" => Ok(FilterKind::Custom),
            other => Err(invalid("filter", format!("unknown filter `{other}`"))),
        }
    }
}

/// Weight vector applied to the `M` samples of one symbol interval.
#[derive(Debug, Clone, PartialEq)]
pub struct Filter {
    weights: DVector<f64>,
    kind: FilterKind,
}

impl Filter {
    pub fn new(weights: DVector<f64>, kind: FilterKind) -> Result<Self> {
        if weights.is_empty() || weights.iter().any(|w| !w.is_finite()) || weights.iter().all(|&w| w == 0.0) {
            return Err(Error::InvalidFilter);
        }
        Ok(Self { weights, kind })
    }

    pub fn custom(weights: &[f64]) -> Result<Self> {
        Self::new(DVector::from_column_slice(weights), FilterKind::Custom)
    }

    pub fn weights(&self) -> &DVector<f64> {
        &self.weights
    }

    pub fn kind(&self) -> FilterKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Same direction rescaled to unit Euclidean norm.
    pub fn normalized(&self) -> DVector<f64> {
        self.weights.normalize()
    }

    /// Cosine of the angle between two weight vectors.
    pub fn cosine(&self, other: &DVector<f64>) -> f64 {
        self.weights.dot(other) / (self.weights.norm() * other.norm())
    }
}

fn check_dims(cir: &Cir, cov: &InterferenceCov) -> Result<()> {
    if cov.dim() != cir.m_samples() {
        return Err(Error::DimensionMismatch {
            context: "covariance size vs samples per symbol",
            expected: cir.m_samples(),
            actual: cov.dim(),
        });
    }
    Ok(())
}

/// `B = 0.5 diag(c_s) + C_i`, the covariance of noise plus interference at
/// the filter input averaged over the current symbol.
pub fn noise_plus_interference(cir: &Cir, cov: &InterferenceCov) -> Result<DMatrix<f64>> {
    check_dims(cir, cov)?;
    let mut b = cov.matrix().clone();
    for (i, s) in cir.signal().iter().enumerate() {
        b[(i, i)] += 0.5 * s;
    }
    Ok(b)
}

/// Solves `B x = c_s` by Cholesky factorization.
fn solve_signal(cir: &Cir, cov: &InterferenceCov) -> Result<DVector<f64>> {
    let b = noise_plus_interference(cir, cov)?;
    let chol = b.cholesky().ok_or(Error::NotPositiveDefinite)?;
    Ok(chol.solve(&cir.signal()))
}

/// SINR-maximizing filter `f = B^{-1} c_s`.
pub fn matched_filter(cir: &Cir, cov: &InterferenceCov) -> Result<Filter> {
    Filter::new(solve_signal(cir, cov)?, FilterKind::Matched)
}

/// Equal weights on every sample.
pub fn sum_filter(m_samples: usize) -> Result<Filter> {
    if m_samples == 0 {
        return Err(invalid("m_samples", "must be >= 1"));
    }
    Filter::new(DVector::from_element(m_samples, 1.0), FilterKind::Sum)
}

/// Weights equal to the expected signal samples.
pub fn correlator_filter(cir: &Cir) -> Result<Filter> {
    Filter::new(cir.signal(), FilterKind::Correlator)
}

/// Single-sample detector at the largest expected signal sample. Ties go
/// to the earliest sample.
pub fn peak_filter(cir: &Cir) -> Result<Filter> {
    let signal = cir.signal();
    let mut best = 0;
    for (i, &v) in signal.iter().enumerate() {
        if v > signal[best] {
            best = i;
        }
    }
    let mut w = DVector::zeros(signal.len());
    w[best] = 1.0;
    Filter::new(w, FilterKind::Peak)
}

/// Builds any of the named filter designs.
pub fn design(kind: FilterKind, cir: &Cir, cov: &InterferenceCov) -> Result<Filter> {
    match kind {
        FilterKind::Matched => matched_filter(cir, cov),
        FilterKind::Sum => sum_filter(cir.m_samples()),
        FilterKind::Correlator => correlator_filter(cir),
        FilterKind::Peak => peak_filter(cir),
        FilterKind::Custom => Err(invalid("filter", "custom filters need explicit weights")),
    }
}

/// Output SINR `0.5 (f . c_s)^2 / f^T B f`.
pub fn sinr(f: &Filter, cir: &Cir, cov: &InterferenceCov) -> Result<f64> {
    if f.len() != cir.m_samples() {
        return Err(Error::DimensionMismatch {
            context: "filter length vs samples per symbol",
            expected: cir.m_samples(),
            actual: f.len(),
        });
    }
    let b = noise_plus_interference(cir, cov)?;
    let w = f.weights();
    let den = (w.transpose() * &b * w)[(0, 0)];
    if den.is_nan() || den <= 0.0 {
        return Err(Error::DegenerateSinr);
    }
    let num = w.dot(&cir.signal());
    Ok(0.5 * num * num / den)
}

/// Closed-form maximum SINR `0.5 c_s^T B^{-1} c_s`.
pub fn optimal_sinr(cir: &Cir, cov: &InterferenceCov) -> Result<f64> {
    let x = solve_signal(cir, cov)?;
    Ok((0.5 * cir.signal().dot(&x)).max(0.0))
}

/// `B^{-1} c_s c_s^T` with the inverse formed by LU decomposition.
pub fn rayleigh_operator(cir: &Cir, cov: &InterferenceCov) -> Result<DMatrix<f64>> {
    let b = noise_plus_interference(cir, cov)?;
    let b_inv = b.lu().try_inverse().ok_or(Error::NotPositiveDefinite)?;
    let s = cir.signal();
    Ok(b_inv * &s * s.transpose())
}

/// Dominant eigenpair of `B^{-1} c_s c_s^T` by power iteration. Returns the
/// unit eigenvector, oriented to correlate positively with `c_s`, and half
/// the eigenvalue (the maximum SINR).
pub fn rayleigh_quotient_oracle(cir: &Cir, cov: &InterferenceCov) -> Result<(Filter, f64)> {
    let b = noise_plus_interference(cir, cov)?;
    if b.clone().cholesky().is_none() {
        return Err(Error::NotPositiveDefinite);
    }
    let op = rayleigh_operator(cir, cov)?;
    let m = op.nrows();
    let scale = op.norm().max(f64::MIN_POSITIVE);

    let mut v = DVector::from_element(m, 1.0 / (m as f64).sqrt());
    let mut restarted = false;
    let mut converged = false;
    for _ in 0..POWER_MAX_ITER {
        let w = &op * &v;
        let norm = w.norm();
        if norm <= 1e-300 * scale || !norm.is_finite() {
            if restarted {
                return Err(Error::NoConvergence(POWER_MAX_ITER));
            }
            let mut rng = stream_rng(POWER_RESTART_SEED, 0);
            v = DVector::from_fn(m, |_, _| rng.gen::<f64>() - 0.5).normalize();
            restarted = true;
            continue;
        }
        let mut next = w / norm;
        if next.dot(&v) < 0.0 {
            next = -next;
        }
        let step = (&next - &v).norm();
        v = next;
        if step <= POWER_TOL {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NoConvergence(POWER_MAX_ITER));
    }
    let kappa = v.dot(&(&op * &v)) / v.dot(&v);
    if v.dot(&cir.signal()) < 0.0 {
        v = -v;
    }
    Ok((Filter::new(v, FilterKind::Custom)?, 0.5 * kappa))
}
