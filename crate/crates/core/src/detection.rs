//! Threshold detection on the filter output and its Gaussian-approximation
//! bit error rate.

use crate::channel::Cir;
use crate::error::{invalid, Error, Result};
use crate::filters::Filter;
use crate::stats::{all_patterns, interference_mean, q_function, IsiPattern};

/// Number of grid points used to bracket the BER-minimizing threshold.
pub const THRESHOLD_GRID: usize = 4001;

/// A filter plus the threshold `xi` applied to its output.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorSpec {
    pub filter: Filter,
    pub threshold: f64,
}

impl DetectorSpec {
    pub fn new(filter: Filter, threshold: f64) -> Result<Self> {
        if !threshold.is_finite() {
            return Err(invalid("threshold", "must be finite"));
        }
        Ok(Self { filter, threshold })
    }
}

#[inline]
pub(crate) fn decide(y: f64, threshold: f64) -> u8 {
    u8::from(y >= threshold)
}

/// Decides 1 when `f . r >= xi`, otherwise 0.
pub fn detect(spec: &DetectorSpec, observations: &[u64]) -> Result<u8> {
    let w = spec.filter.weights();
    if observations.len() != w.len() {
        return Err(Error::DimensionMismatch {
            context: "observation length vs filter length",
            expected: w.len(),
            actual: observations.len(),
        });
    }
    let y: f64 = w.iter().zip(observations).map(|(f, &r)| f * r as f64).sum();
    Ok(decide(y, spec.threshold))
}

/// Mean and variance of the filter output given the ISI pattern, for both
/// values of the current symbol, treating every sample as Poisson.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianMoments {
    pub mu0: f64,
    pub var0: f64,
    pub mu1: f64,
    pub var1: f64,
}

impl GaussianMoments {
    /// `(mean, variance)` for the given current symbol.
    pub fn for_bit(&self, bit: u8) -> (f64, f64) {
        if bit == 0 {
            (self.mu0, self.var0)
        } else {
            (self.mu1, self.var1)
        }
    }

    /// Probability of a wrong decision at threshold `xi`, averaged over the
    /// two equiprobable symbols.
    pub fn conditional_ber(&self, xi: f64) -> f64 {
        let miss = 1.0 - upper_tail(xi, self.mu1, self.var1);
        let false_alarm = upper_tail(xi, self.mu0, self.var0);
        (0.5 * (miss + false_alarm)).clamp(0.0, 1.0)
    }
}

/// `P(Y >= xi)` for `Y ~ N(mu, var)`; a zero variance makes `Y` deterministic.
fn upper_tail(xi: f64, mu: f64, var: f64) -> f64 {
    if var > 0.0 {
        q_function((xi - mu) / var.sqrt())
    } else if xi <= mu {
        1.0
    } else {
        0.0
    }
}

pub fn gaussian_moments(f: &Filter, cir: &Cir, s: &IsiPattern, c_ext: f64) -> Result<GaussianMoments> {
    if f.len() != cir.m_samples() {
        return Err(Error::DimensionMismatch {
            context: "filter length vs samples per symbol",
            expected: cir.m_samples(),
            actual: f.len(),
        });
    }
    let interference = interference_mean(cir, s, c_ext)?;
    let signal = cir.signal();
    let w = f.weights();
    let mut m = GaussianMoments {
        mu0: 0.0,
        var0: 0.0,
        mu1: 0.0,
        var1: 0.0,
    };
    for i in 0..w.len() {
        let w2 = w[i] * w[i];
        let c0 = interference[i];
        let c1 = interference[i] + signal[i];
        m.mu0 += w[i] * c0;
        m.var0 += w2 * c0;
        m.mu1 += w[i] * c1;
        m.var1 += w2 * c1;
    }
    Ok(m)
}

/// Gaussian-approximation BER of a fixed filter, one moment set per
/// equiprobable ISI pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct BerModel {
    patterns: Vec<GaussianMoments>,
}

impl BerModel {
    pub fn new(f: &Filter, cir: &Cir, c_ext: f64) -> Result<Self> {
        let patterns = all_patterns(cir.l_taps() - 1)?
            .map(|s| gaussian_moments(f, cir, &s, c_ext))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { patterns })
    }

    pub fn from_moments(patterns: Vec<GaussianMoments>) -> Result<Self> {
        if patterns.is_empty() {
            return Err(invalid("moments", "need at least one pattern"));
        }
        Ok(Self { patterns })
    }

    pub fn patterns(&self) -> &[GaussianMoments] {
        &self.patterns
    }

    pub fn ber(&self, xi: f64) -> f64 {
        let total: f64 = self.patterns.iter().map(|m| m.conditional_ber(xi)).sum();
        (total / self.patterns.len() as f64).clamp(0.0, 1.0)
    }

    /// Threshold search interval: from the lowest "0" mean minus four of
    /// the largest "0" standard deviations to the highest "1" mean plus four
    /// of the largest "1" standard deviations.
    pub fn threshold_bracket(&self) -> (f64, f64) {
        let sd0 = self.patterns.iter().map(|m| m.var0.sqrt()).fold(0.0, f64::max);
        let sd1 = self.patterns.iter().map(|m| m.var1.sqrt()).fold(0.0, f64::max);
        let lo = self.patterns.iter().map(|m| m.mu0).fold(f64::INFINITY, f64::min) - 4.0 * sd0;
        let hi = self.patterns.iter().map(|m| m.mu1).fold(f64::NEG_INFINITY, f64::max) + 4.0 * sd1;
        if lo < hi {
            return (lo, hi);
        }
        // mixed-sign filters can put the "1" cloud below the "0" cloud
        let sd = sd0.max(sd1);
        let all = self.patterns.iter().flat_map(|m| [m.mu0, m.mu1]);
        let (min, max) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
        (min - 4.0 * sd, max + 4.0 * sd)
    }

    /// Grid search over the bracket followed by golden-section refinement
    /// around the best grid point. Ties resolve to the smaller threshold.
    pub fn optimal_threshold(&self) -> f64 {
        let (lo, hi) = self.threshold_bracket();
        if hi.partial_cmp(&lo) != Some(std::cmp::Ordering::Greater) {
            return lo;
        }
        let step = (hi - lo) / (THRESHOLD_GRID - 1) as f64;
        let mut best_i = 0;
        let mut best = f64::INFINITY;
        for i in 0..THRESHOLD_GRID {
            let ber = self.ber(lo + step * i as f64);
            if ber < best {
                best = ber;
                best_i = i;
            }
        }
        let best_x = lo + step * best_i as f64;
        let (x, ber) = golden_min(|x| self.ber(x), best_x - step, best_x + step);
        if ber < best {
            x
        } else {
            best_x
        }
    }
}

fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..200 {
        if (b - a).abs() <= 1e-12 * (1.0 + a.abs().max(b.abs())) {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    if fc <= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Approximate BER at threshold `xi`, averaged over all ISI patterns.
pub fn analytical_ber(f: &Filter, cir: &Cir, c_ext: f64, xi: f64) -> Result<f64> {
    Ok(BerModel::new(f, cir, c_ext)?.ber(xi))
}

/// Threshold minimizing [`analytical_ber`].
pub fn optimize_threshold(f: &Filter, cir: &Cir, c_ext: f64) -> Result<f64> {
    Ok(BerModel::new(f, cir, c_ext)?.optimal_threshold())
}
