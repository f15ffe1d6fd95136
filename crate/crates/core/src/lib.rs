//! Matched-filter design and evaluation for molecule-counting receivers.
//!
//! A transmitter releases `n_tx` molecules for every "1" symbol; the
//! receiver counts molecules `M` times per symbol interval and detects each
//! symbol by thresholding a weighted sum of its counts. This crate builds
//! the channel impulse response, the ISI/interference statistics, the
//! SINR-optimal weights and the benchmark designs, and evaluates them both
//! analytically and by Poisson Monte Carlo simulation.

pub mod channel;
pub mod config;
pub mod detection;
pub mod error;
pub mod filters;
pub mod montecarlo;
pub mod stats;
pub mod sweep;

pub use channel::{build_cir, expected_concentration, reference_time, ChannelParams, Cir, TimingConfig};
pub use config::{parse_config, ExperimentConfig};
pub use detection::{analytical_ber, detect, gaussian_moments, optimize_threshold, DetectorSpec, GaussianMoments};
pub use error::{Error, Result};
pub use filters::{
    correlator_filter, matched_filter, optimal_sinr, peak_filter, rayleigh_quotient_oracle, sinr, sum_filter, Filter,
    FilterKind,
};
pub use montecarlo::{run_trials, simulate_symbol_stream, SimConfig, SimResult};
pub use stats::{
    interference_covariance, interference_mean, q_function, sample_poisson, shifted_poisson_pmf, InterferenceCov,
    IsiPattern,
};
pub use sweep::{run_sweep, SweepPoint, SweepReport, TsymbResult};
