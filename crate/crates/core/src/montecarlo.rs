//! Monte Carlo simulation of the Poisson observation model with on-off
//! keying, and the empirical BER/SINR estimators built on it.
//!
//! Trials are split into fixed-size blocks. Block `b` draws from stream `b`
//! of the master seed and starts from an all-zero symbol history, so the
//! result depends only on the seed and never on how blocks are scheduled.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::channel::Cir;
use crate::detection::{decide, DetectorSpec};
use crate::error::{invalid, Error, Result};
use crate::stats::{stream_rng, PoissonSampler, StreamRng};

/// Symbols per independently seeded block.
pub const BLOCK_LEN: usize = 8192;
/// Batches used for the batch-means SINR interval.
pub const SINR_BATCHES: usize = 20;
const Z_975: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Detected symbols after warm-up.
    pub trials: usize,
    /// Leading symbols discarded in every block; at least `L - 1`.
    pub warmup: usize,
    pub seed: u64,
    /// Worker threads; 0 uses the global pool. Results do not depend on it.
    pub workers: usize,
}

impl SimConfig {
    pub fn new(trials: usize, seed: u64) -> Self {
        Self {
            trials,
            warmup: 8,
            seed,
            workers: 0,
        }
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }

    pub fn validate(&self, cir: &Cir) -> Result<()> {
        if self.trials == 0 {
            return Err(invalid("trials", "must be >= 1"));
        }
        if self.warmup + 1 < cir.l_taps() {
            return Err(invalid("warmup", format!("must be >= L - 1 = {}", cir.l_taps() - 1)));
        }
        Ok(())
    }
}

/// One emitted symbol interval.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StreamSymbol {
    pub symbol: u8,
    pub observations: Vec<u64>,
    /// Set for warm-up symbols that should not be scored.
    pub warmup: bool,
}

/// Lazily generated OOK symbol stream with Poisson sample counts.
#[derive(Debug, Clone)]
pub struct SymbolStream {
    m: usize,
    /// Sampler for window `w` and sample `i` at `w * m + i`. Bit `l` of the
    /// window is the symbol sent `l` intervals ago.
    samplers: Vec<PoissonSampler>,
    window_mask: u64,
    window: u64,
    rng: StreamRng,
    emitted: usize,
    warmup: usize,
    total: usize,
}

impl SymbolStream {
    /// Stream of `config.warmup + config.trials` symbols driven by `rng`.
    pub fn new(cir: &Cir, c_ext: f64, config: &SimConfig, rng: StreamRng) -> Result<Self> {
        config.validate(cir)?;
        Self::with_length(cir, c_ext, config.warmup, config.warmup + config.trials, rng)
    }

    fn with_length(cir: &Cir, c_ext: f64, warmup: usize, total: usize, rng: StreamRng) -> Result<Self> {
        let l = cir.l_taps();
        let m = cir.m_samples();
        if l > 24 {
            return Err(Error::TooManyPatterns(l));
        }
        if !(c_ext.is_finite() && c_ext >= 0.0) {
            return Err(invalid("c_ext", "must be finite and >= 0"));
        }
        let windows = 1usize << l;
        let taps = cir.taps();
        let mut samplers = Vec::with_capacity(windows * m);
        for w in 0..windows {
            for i in 0..m {
                let lambda = c_ext + (0..l).filter(|&j| (w >> j) & 1 == 1).map(|j| taps[(j, i)]).sum::<f64>();
                samplers.push(PoissonSampler::new(lambda)?);
            }
        }
        Ok(Self {
            m,
            samplers,
            window_mask: (windows - 1) as u64,
            window: 0,
            rng,
            emitted: 0,
            warmup,
            total,
        })
    }

    pub fn m_samples(&self) -> usize {
        self.m
    }

    /// Sends `symbol` and writes the counts of its interval into `out`.
    pub fn step_with(&mut self, symbol: u8, out: &mut [u64]) {
        self.window = ((self.window << 1) | u64::from(symbol & 1)) & self.window_mask;
        let base = self.window as usize * self.m;
        for (i, slot) in out.iter_mut().enumerate().take(self.m) {
            *slot = self.samplers[base + i].sample(&mut self.rng);
        }
        self.emitted += 1;
    }

    /// Draws an equiprobable symbol and writes its counts into `out`.
    pub fn step(&mut self, out: &mut [u64]) -> u8 {
        let symbol = u8::from(self.rng.gen::<bool>());
        self.step_with(symbol, out);
        symbol
    }

    /// Emits a chosen symbol instead of a random one.
    pub fn next_with_symbol(&mut self, symbol: u8) -> StreamSymbol {
        let warmup = self.emitted < self.warmup;
        let mut observations = vec![0; self.m];
        self.step_with(symbol, &mut observations);
        StreamSymbol {
            symbol: symbol & 1,
            observations,
            warmup,
        }
    }
}

impl Iterator for SymbolStream {
    type Item = StreamSymbol;

    fn next(&mut self) -> Option<StreamSymbol> {
        if self.emitted >= self.total {
            return None;
        }
        let warmup = self.emitted < self.warmup;
        let mut observations = vec![0; self.m];
        let symbol = self.step(&mut observations);
        Some(StreamSymbol {
            symbol,
            observations,
            warmup,
        })
    }
}

/// Emits `config.warmup + config.trials` symbols from stream 0 of the seed.
pub fn simulate_symbol_stream(cir: &Cir, c_ext: f64, config: &SimConfig) -> Result<SymbolStream> {
    SymbolStream::new(cir, c_ext, config, stream_rng(config.seed, 0))
}

/// Empirical detector performance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub empirical_ber: f64,
    /// 95% binomial half-width (Agresti-Coull).
    pub ber_halfwidth: f64,
    pub empirical_sinr: f64,
    /// 95% batch-means half-width.
    pub sinr_halfwidth: f64,
    pub trials_run: u64,
    pub errors: u64,
}

/// Running mean and sum of squared deviations.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Moments {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    fn merge(&mut self, other: &Moments) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        self.mean += delta * other.n as f64 / n as f64;
        self.m2 += other.m2 + delta * delta * (self.n as f64 * other.n as f64) / n as f64;
        self.n = n;
    }

    fn variance(&self) -> Option<f64> {
        (self.n >= 2).then(|| self.m2 / (self.n - 1) as f64)
    }
}

#[derive(Debug, Clone, Default)]
struct BlockTally {
    errors: u64,
    trials: u64,
    /// `(batch index, moments of z)` for each batch touched by the block.
    batches: Vec<(usize, Moments)>,
}

fn sinr_from_variance(gain: f64, var: Option<f64>) -> f64 {
    if gain == 0.0 {
        return 0.0;
    }
    match var {
        Some(v) if v > 0.0 => 0.5 * gain * gain / v,
        _ => f64::INFINITY,
    }
}

/// Simulates the detector over `config.trials` symbols.
///
/// The BER counts decisions that differ from the sent symbol. The SINR
/// estimate is `0.5 (f . c_s)^2 / Var(z)` with `z = f . r - s (f . c_s)`,
/// whose variance equals the analytical SINR denominator.
pub fn run_trials(cir: &Cir, c_ext: f64, spec: &DetectorSpec, config: &SimConfig) -> Result<SimResult> {
    config.validate(cir)?;
    let w: Vec<f64> = spec.filter.weights().iter().copied().collect();
    if w.len() != cir.m_samples() {
        return Err(Error::DimensionMismatch {
            context: "filter length vs samples per symbol",
            expected: cir.m_samples(),
            actual: w.len(),
        });
    }
    let gain = spec.filter.weights().dot(&cir.signal());
    let trials = config.trials;
    let n_batches = SINR_BATCHES.min(trials);
    let n_blocks = trials.div_ceil(BLOCK_LEN);

    let run_block = |b: usize| -> Result<BlockTally> {
        let start = b * BLOCK_LEN;
        let len = BLOCK_LEN.min(trials - start);
        let mut stream = SymbolStream::with_length(
            cir,
            c_ext,
            config.warmup,
            config.warmup + len,
            stream_rng(config.seed, b as u64),
        )?;
        let mut obs = vec![0u64; w.len()];
        for _ in 0..config.warmup {
            stream.step(&mut obs);
        }
        let mut tally = BlockTally::default();
        let mut current: Option<(usize, Moments)> = None;
        for t in start..start + len {
            let symbol = stream.step(&mut obs);
            let y: f64 = w.iter().zip(&obs).map(|(f, &r)| f * r as f64).sum();
            if decide(y, spec.threshold) != symbol {
                tally.errors += 1;
            }
            let z = y - f64::from(symbol) * gain;
            let batch = t * n_batches / trials;
            match &mut current {
                Some((idx, m)) if *idx == batch => m.push(z),
                _ => {
                    if let Some(done) = current.take() {
                        tally.batches.push(done);
                    }
                    let mut m = Moments::default();
                    m.push(z);
                    current = Some((batch, m));
                }
            }
        }
        tally.batches.extend(current);
        tally.trials = len as u64;
        Ok(tally)
    };

    let tallies: Vec<Result<BlockTally>> = if config.workers == 0 {
        (0..n_blocks).into_par_iter().map(run_block).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.workers)
            .build()
            .map_err(|e| invalid("workers", e.to_string()))?;
        pool.install(|| (0..n_blocks).into_par_iter().map(run_block).collect())
    };

    let mut errors = 0u64;
    let mut trials_run = 0u64;
    let mut batches = vec![Moments::default(); n_batches];
    for tally in tallies {
        let tally = tally?;
        errors += tally.errors;
        trials_run += tally.trials;
        for (idx, m) in &tally.batches {
            batches[*idx].merge(m);
        }
    }
    let mut total = Moments::default();
    for m in &batches {
        total.merge(m);
    }

    let n = trials_run as f64;
    let empirical_ber = errors as f64 / n;
    let z2 = Z_975 * Z_975;
    let n_adj = n + z2;
    let p_adj = (errors as f64 + 0.5 * z2) / n_adj;
    let ber_halfwidth = Z_975 * (p_adj * (1.0 - p_adj) / n_adj).sqrt();

    let empirical_sinr = sinr_from_variance(gain, total.variance());
    let sinr_halfwidth = batch_means_halfwidth(batches.iter().map(|m| sinr_from_variance(gain, m.variance())));

    Ok(SimResult {
        empirical_ber,
        ber_halfwidth,
        empirical_sinr,
        sinr_halfwidth,
        trials_run,
        errors,
    })
}

fn batch_means_halfwidth(estimates: impl Iterator<Item = f64>) -> f64 {
    let mut m = Moments::default();
    for x in estimates {
        if !x.is_finite() {
            return f64::INFINITY;
        }
        m.push(x);
    }
    let Some(var) = m.variance() else {
        return f64::INFINITY;
    };
    let df = (m.n - 1) as f64;
    let t = StudentsT::new(0.0, 1.0, df)
        .map(|d| d.inverse_cdf(0.975))
        .unwrap_or(Z_975);
    t * (var / m.n as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filters::{matched_filter, sum_filter, Filter};
    use crate::stats::InterferenceCov;

    #[test]
    fn silent_channel_is_pure_interference() {
        let cir = Cir::from_rows(&[vec![0.0; 4], vec![0.0; 4]]).unwrap();
        let cfg = SimConfig::new(25_000, 9);
        let stream = simulate_symbol_stream(&cir, 2.0, &cfg).unwrap();
        let (mut sum, mut n) = (0.0, 0.0);
        for item in stream.filter(|s| !s.warmup) {
            for r in item.observations {
                sum += r as f64;
                n += 1.0;
            }
        }
        assert_eq!(n, 100_000.0);
        assert!((sum / n - 2.0).abs() < 0.02);
    }

    #[test]
    fn streams_replay() {
        let cir = Cir::from_rows(&[vec![3.0, 1.0], vec![0.5, 0.2]]).unwrap();
        let cfg = SimConfig::new(500, 42);
        let a: Vec<_> = simulate_symbol_stream(&cir, 1.0, &cfg).unwrap().collect();
        let b: Vec<_> = simulate_symbol_stream(&cir, 1.0, &cfg).unwrap().collect();
        assert_eq!(a, b);
        assert_eq!(a.len(), 508);
        assert!(a[..8].iter().all(|s| s.warmup));
        assert!(a[8..].iter().all(|s| !s.warmup));
    }

    #[test]
    fn forced_ones_have_signal_plus_interference_mean() {
        let cir = Cir::single_tap(&[3.0, 7.0]).unwrap();
        let cfg = SimConfig::new(1, 1);
        let mut stream = simulate_symbol_stream(&cir, 2.0, &cfg).unwrap();
        let n = 100_000;
        let mut sums = [0.0; 2];
        for _ in 0..n {
            let s = stream.next_with_symbol(1);
            sums[0] += s.observations[0] as f64;
            sums[1] += s.observations[1] as f64;
        }
        assert!((sums[0] / n as f64 - 5.0).abs() < 0.03);
        assert!((sums[1] / n as f64 - 9.0).abs() < 0.04);
    }

    #[test]
    fn warmup_must_cover_memory() {
        let cir = Cir::from_rows(&[vec![1.0], vec![1.0], vec![1.0]]).unwrap();
        let mut cfg = SimConfig::new(10, 1);
        cfg.warmup = 1;
        assert!(cfg.validate(&cir).is_err());
        cfg.warmup = 2;
        assert!(cfg.validate(&cir).is_ok());
        cfg.trials = 0;
        assert!(cfg.validate(&cir).is_err());
    }

    #[test]
    fn perfect_separation() {
        let cir = Cir::single_tap(&[1e6, 1e6]).unwrap();
        let cov = InterferenceCov::diagonal(2, 0.0);
        let f = matched_filter(&cir, &cov).unwrap();
        let xi = crate::detection::optimize_threshold(&f, &cir, 0.0).unwrap();
        let spec = DetectorSpec::new(f, xi).unwrap();
        let res = run_trials(&cir, 0.0, &spec, &SimConfig::new(10_000, 3)).unwrap();
        assert_eq!(res.errors, 0);
        assert_eq!(res.trials_run, 10_000);
        assert!(res.ber_halfwidth > 0.0);
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let cir = Cir::from_rows(&[vec![4.0, 2.0, 1.0], vec![1.0, 0.8, 0.5]]).unwrap();
        let spec = DetectorSpec::new(sum_filter(3).unwrap(), 6.5).unwrap();
        let base = SimConfig::new(50_000, 77);
        let r1 = run_trials(&cir, 2.0, &spec, &base.with_workers(1)).unwrap();
        let r2 = run_trials(&cir, 2.0, &spec, &base.with_workers(2)).unwrap();
        let r8 = run_trials(&cir, 2.0, &spec, &base.with_workers(8)).unwrap();
        let r0 = run_trials(&cir, 2.0, &spec, &base).unwrap();
        assert_eq!(r1, r2);
        assert_eq!(r1, r8);
        assert_eq!(r1, r0);
    }

    #[test]
    fn tiny_runs_have_unbounded_intervals() {
        let cir = Cir::single_tap(&[4.0]).unwrap();
        let spec = DetectorSpec::new(Filter::custom(&[1.0]).unwrap(), 3.0).unwrap();
        let res = run_trials(&cir, 2.0, &spec, &SimConfig::new(1, 0)).unwrap();
        assert_eq!(res.trials_run, 1);
        assert!(res.sinr_halfwidth.is_infinite());
        assert!(res.empirical_ber == 0.0 || res.empirical_ber == 1.0);
    }

    #[test]
    fn moments_merge_matches_single_pass() {
        let xs: Vec<f64> = (0..101).map(|i| ((i * 37) % 17) as f64 * 0.3).collect();
        let mut whole = Moments::default();
        xs.iter().for_each(|&x| whole.push(x));
        let mut a = Moments::default();
        let mut b = Moments::default();
        xs[..40].iter().for_each(|&x| a.push(x));
        xs[40..].iter().for_each(|&x| b.push(x));
        a.merge(&b);
        assert!((a.mean - whole.mean).abs() < 1e-12);
        assert!((a.m2 - whole.m2).abs() < 1e-9);
    }
}
