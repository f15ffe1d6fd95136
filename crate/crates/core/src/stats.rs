//! Probability primitives and the interference covariance of the
//! molecule-counting receiver.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use statrs::function::gamma::ln_gamma;

use crate::channel::Cir;
use crate::error::{invalid, Error, Result};

/// Largest ISI pattern length that is enumerated exhaustively.
pub const MAX_PATTERN_BITS: usize = 24;

/// Random stream used by every sampler in the crate.
pub type StreamRng = ChaCha8Rng;

/// Opens stream `index` of the generator keyed by `seed`. Identical
/// `(seed, index)` pairs always yield identical draw sequences.
pub fn stream_rng(seed: u64, index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Poisson sampler with a fixed mean. A mean of zero always yields zero.
#[derive(Debug, Clone, Copy)]
pub struct PoissonSampler {
    inner: Option<Poisson<f64>>,
}

impl PoissonSampler {
    pub fn new(lambda: f64) -> Result<Self> {
        if !lambda.is_finite() || lambda < 0.0 {
            return Err(invalid("lambda", format!("{lambda} is not a finite mean >= 0")));
        }
        if lambda == 0.0 {
            return Ok(Self { inner: None });
        }
        let dist = Poisson::new(lambda).map_err(|e| invalid("lambda", e.to_string()))?;
        Ok(Self { inner: Some(dist) })
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        match &self.inner {
            Some(d) => d.sample(rng) as u64,
            None => 0,
        }
    }
}

/// One exact Poisson(`lambda`) draw.
pub fn sample_poisson<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> Result<u64> {
    Ok(PoissonSampler::new(lambda)?.sample(rng))
}

/// PMF of a Poisson variable with its mean subtracted. The support is
/// `{j - lambda : j = 0, 1, 2, ...}`; any other `x` has probability zero.
pub fn shifted_poisson_pmf(lambda: f64, x: f64) -> f64 {
    if lambda.is_nan() || lambda < 0.0 || !x.is_finite() {
        return 0.0;
    }
    let j = x + lambda;
    let k = j.round();
    if k < 0.0 || (j - k).abs() > 1e-9 * k.max(1.0) {
        return 0.0;
    }
    poisson_pmf(lambda, k as u64)
}

/// `P(N = k)` for `N ~ Poisson(lambda)`, evaluated in log-space.
pub fn poisson_pmf(lambda: f64, k: u64) -> f64 {
    if lambda == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    let k = k as f64;
    (k * lambda.ln() - lambda - ln_gamma(k + 1.0)).exp()
}

/// Standard Gaussian upper-tail probability.
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// Standard Gaussian CDF.
pub fn normal_cdf(x: f64) -> f64 {
    q_function(-x)
}

/// Values of the `L - 1` symbols preceding the current one. Position `j`
/// holds the symbol sent `j + 1` intervals earlier and is weighted by tap
/// `j + 1` of the CIR.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct IsiPattern {
    bits: Vec<u8>,
}

impl IsiPattern {
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        if bits.iter().any(|&b| b > 1) {
            return Err(invalid("isi_pattern", "symbols must be 0 or 1"));
        }
        Ok(Self { bits })
    }

    pub fn zeros(len: usize) -> Self {
        Self { bits: vec![0; len] }
    }

    /// Pattern whose bit `j` is bit `j` of `index`.
    pub fn from_index(index: u64, len: usize) -> Self {
        Self {
            bits: (0..len).map(|j| ((index >> j) & 1) as u8).collect(),
        }
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }
}

/// Every pattern of the given length, each equally likely.
pub fn all_patterns(len: usize) -> Result<impl Iterator<Item = IsiPattern>> {
    if len > MAX_PATTERN_BITS {
        return Err(Error::TooManyPatterns(len));
    }
    Ok((0..1u64 << len).map(move |i| IsiPattern::from_index(i, len)))
}

/// Mean interference per sample given the preceding symbols:
/// `c_ext + sum_j taps[j + 1] * s[j]`.
pub fn interference_mean(cir: &Cir, s: &IsiPattern, c_ext: f64) -> Result<DVector<f64>> {
    if s.len() + 1 != cir.l_taps() {
        return Err(Error::DimensionMismatch {
            context: "ISI pattern length",
            expected: cir.l_taps() - 1,
            actual: s.len(),
        });
    }
    let mut mean = DVector::from_element(cir.m_samples(), c_ext);
    for (j, &bit) in s.bits().iter().enumerate() {
        if bit == 1 {
            mean += cir.taps().row(j + 1).transpose();
        }
    }
    Ok(mean)
}

/// Covariance of the interference vector (ISI plus external molecules)
/// over all equiprobable ISI patterns.
#[derive(Debug, Clone, PartialEq)]
pub struct InterferenceCov {
    mat: DMatrix<f64>,
}

impl InterferenceCov {
    /// Wraps an arbitrary symmetric matrix. Symmetry is checked; positive
    /// semidefiniteness is the caller's responsibility.
    pub fn from_matrix(mat: DMatrix<f64>) -> Result<Self> {
        if !mat.is_square() {
            return Err(invalid("covariance", "must be square"));
        }
        let n = mat.nrows();
        for i in 0..n {
            for j in 0..i {
                if (mat[(i, j)] - mat[(j, i)]).abs() > 1e-12 * (1.0 + mat[(i, j)].abs()) {
                    return Err(invalid("covariance", "must be symmetric"));
                }
            }
        }
        if mat.iter().any(|x| !x.is_finite()) {
            return Err(invalid("covariance", "entries must be finite"));
        }
        Ok(Self { mat })
    }

    /// Uncorrelated interference with equal variance on every sample.
    pub fn diagonal(m: usize, var: f64) -> Self {
        Self {
            mat: DMatrix::from_diagonal_element(m, m, var),
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.mat
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }
}

/// Exact interference covariance by enumerating all `2^(L-1)` ISI
/// patterns. Diagonal entries add the Poisson variance (equal to the
/// conditional mean) to the variance of the conditional mean.
pub fn interference_covariance(cir: &Cir, c_ext: f64) -> Result<InterferenceCov> {
    let bits = cir.l_taps() - 1;
    let m = cir.m_samples();
    let mut second = DMatrix::<f64>::zeros(m, m);
    let mut first = DVector::<f64>::zeros(m);
    let mut count = 0u64;
    for s in all_patterns(bits)? {
        let mean = interference_mean(cir, &s, c_ext)?;
        second += &mean * mean.transpose();
        first += &mean;
        count += 1;
    }
    let n = count as f64;
    let e_mean = first / n;
    let mut mat = second / n - &e_mean * e_mean.transpose();
    for i in 0..m {
        mat[(i, i)] += e_mean[i];
    }
    // exact symmetry regardless of rounding in the outer products
    let mat = (&mat + mat.transpose()) * 0.5;
    Ok(InterferenceCov { mat })
}
