//! Diffusive channel with flow and enzymatic degradation, observed by a
//! transparent spherical receiver.
//!
//! The expected number of molecules inside the receiver `t` seconds after
//! releasing `n_tx` molecules at distance `d` is
//!
//! ```text
//! c(t) = n_tx * V / (4 pi D t)^{3/2} * exp(-k_d t - ((d - v_par t)^2 + (v_perp t)^2) / (4 D t))
//! ```
//!
//! where `k_d` is the effective first-order degradation rate. Sampling the
//! curve on the symbol grid yields the multi-tap [`Cir`].

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{invalid, Error, Result};

/// Receiver radius used by the default parameter set (50 nm).
pub const DEFAULT_RX_RADIUS: f64 = 50e-9;
/// Transmitter-receiver distance (500 nm).
pub const DEFAULT_DISTANCE: f64 = 500e-9;
/// Diffusion coefficient of the signalling molecule (m^2/s).
pub const DEFAULT_DIFF_COEFF: f64 = 4.3e-10;
/// Enzyme concentration in molecule per cubic micrometre.
pub const DEFAULT_ENZYME_PER_UM3: f64 = 1e5;
/// Degradation reaction rate constant.
pub const DEFAULT_KAPPA: f64 = 2e-19;
/// Flow velocity component along the transmitter-receiver axis (m/s).
pub const DEFAULT_V_PAR: f64 = 1e-3;
/// Flow velocity component perpendicular to the axis (m/s).
pub const DEFAULT_V_PERP: f64 = 1e-3;
/// Expected external interference count per sample.
pub const DEFAULT_C_EXT: f64 = 2.0;

/// Lower end of the reference-time search bracket (s).
const TREF_BRACKET_LO: f64 = 1e-9;
const TREF_REL_TOL: f64 = 1e-9;

const UM3_PER_M3: f64 = 1e18;

/// Volume of a sphere of the given radius.
pub fn sphere_volume(radius: f64) -> f64 {
    4.0 / 3.0 * PI * radius.powi(3)
}

/// Physical channel constants plus the transmit budget and the external
/// interference level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    /// Molecules released for a "1" symbol.
    pub n_tx: f64,
    /// Receiver volume (m^3).
    pub v_rx: f64,
    /// Transmitter-receiver distance (m).
    pub d: f64,
    /// Diffusion coefficient (m^2/s).
    pub diff_coeff: f64,
    /// Effective degradation rate `kappa * c_e` (1/s).
    pub degradation_rate: f64,
    /// Flow velocity parallel to the link axis (m/s).
    pub v_par: f64,
    /// Flow velocity perpendicular to the link axis (m/s).
    pub v_perp: f64,
    /// Expected external interference count per sample.
    pub c_ext: f64,
}

impl ChannelParams {
    /// Builds parameters from the tabulated units: the enzyme concentration is
    /// given in molecule/um^3 and the reaction constant `kappa` is such that
    /// `kappa * c_e` (with `c_e` in molecule/m^3) is a rate in 1/s.
    #[allow(clippy::too_many_arguments)]
    pub fn from_table_units(
        n_tx: f64,
        v_rx: f64,
        d: f64,
        diff_coeff: f64,
        enzyme_per_um3: f64,
        kappa: f64,
        v_par: f64,
        v_perp: f64,
        c_ext: f64,
    ) -> Self {
        Self {
            n_tx,
            v_rx,
            d,
            diff_coeff,
            degradation_rate: kappa * enzyme_per_um3 * UM3_PER_M3,
            v_par,
            v_perp,
            c_ext,
        }
    }

    /// Builds parameters from a pre-multiplied degradation rate `k_d` (1/s).
    #[allow(clippy::too_many_arguments)]
    pub fn with_degradation_rate(
        n_tx: f64,
        v_rx: f64,
        d: f64,
        diff_coeff: f64,
        degradation_rate: f64,
        v_par: f64,
        v_perp: f64,
        c_ext: f64,
    ) -> Self {
        Self {
            n_tx,
            v_rx,
            d,
            diff_coeff,
            degradation_rate,
            v_par,
            v_perp,
            c_ext,
        }
    }

    /// Default system parameters with the given transmit budget.
    pub fn default_with_n_tx(n_tx: f64) -> Self {
        Self::from_table_units(
            n_tx,
            sphere_volume(DEFAULT_RX_RADIUS),
            DEFAULT_DISTANCE,
            DEFAULT_DIFF_COEFF,
            DEFAULT_ENZYME_PER_UM3,
            DEFAULT_KAPPA,
            DEFAULT_V_PAR,
            DEFAULT_V_PERP,
            DEFAULT_C_EXT,
        )
    }

    pub fn with_n_tx(mut self, n_tx: f64) -> Self {
        self.n_tx = n_tx;
        self
    }

    /// Diffusion-only peak time `d^2 / (6 D)`.
    pub fn diffusion_peak_time(&self) -> f64 {
        self.d * self.d / (6.0 * self.diff_coeff)
    }

    pub fn validate(&self) -> Result<()> {
        let finite_all = [
            self.n_tx,
            self.v_rx,
            self.d,
            self.diff_coeff,
            self.degradation_rate,
            self.v_par,
            self.v_perp,
            self.c_ext,
        ]
        .iter()
        .all(|x| x.is_finite());
        if !finite_all {
            return Err(invalid("channel", "all parameters must be finite"));
        }
        if self.n_tx < 0.0 {
            return Err(invalid("n_tx", "must be >= 0"));
        }
        if self.v_rx <= 0.0 {
            return Err(invalid("v_rx", "must be > 0"));
        }
        if self.d <= 0.0 {
            return Err(invalid("d", "must be > 0"));
        }
        if self.diff_coeff <= 0.0 {
            return Err(invalid("diff_coeff", "must be > 0"));
        }
        if self.degradation_rate < 0.0 {
            return Err(invalid("degradation_rate", "kappa * c_e must be >= 0"));
        }
        if self.c_ext < 0.0 {
            return Err(invalid("c_ext", "must be >= 0"));
        }
        Ok(())
    }

    /// Log of the time-dependent factor of the curve, without the
    /// `n_tx * V` prefactor. Finite for every `t > 0`.
    fn log_shape(&self, t: f64) -> f64 {
        let drift = (self.d - self.v_par * t).powi(2) + (self.v_perp * t).powi(2);
        -1.5 * (4.0 * PI * self.diff_coeff * t).ln() - self.degradation_rate * t - drift / (4.0 * self.diff_coeff * t)
    }
}

/// Sampling layout of one symbol interval, in units of the reference time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingConfig {
    /// Samples per symbol interval (M).
    pub m_samples: usize,
    /// Channel memory in symbol intervals (L).
    pub l_taps: usize,
    /// Sampling interval divided by the reference time.
    pub dt_norm: f64,
    /// Symbol duration divided by the reference time.
    pub t_symb_norm: f64,
}

impl Default for TimingConfig {
    fn default() -> Self {
        Self {
            m_samples: 6,
            l_taps: 3,
            dt_norm: 0.25,
            t_symb_norm: 1.5,
        }
    }
}

impl TimingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m_samples == 0 {
            return Err(invalid("m_samples", "must be >= 1"));
        }
        if self.l_taps == 0 {
            return Err(invalid("l_taps", "must be >= 1"));
        }
        if !(self.dt_norm.is_finite() && self.dt_norm > 0.0) {
            return Err(invalid("dt_norm", "must be finite and > 0"));
        }
        if !(self.t_symb_norm.is_finite() && self.t_symb_norm > 0.0) {
            return Err(invalid("t_symb_norm", "must be finite and > 0"));
        }
        let span = self.m_samples as f64 * self.dt_norm;
        if span > self.t_symb_norm * (1.0 + 1e-12) {
            return Err(invalid(
                "m_samples",
                format!(
                    "m_samples * dt_norm = {span} exceeds t_symb_norm = {}",
                    self.t_symb_norm
                ),
            ));
        }
        Ok(())
    }
}

/// Expected per-sample counts: entry `(l, m)` is the mean count at sample
/// `m` caused by a release `l` symbol intervals earlier (0-based). Row 0 is
/// the desired-signal vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Cir {
    taps: DMatrix<f64>,
}

impl Cir {
    pub fn new(taps: DMatrix<f64>) -> Result<Self> {
        if taps.nrows() == 0 || taps.ncols() == 0 {
            return Err(invalid("cir", "needs at least one tap and one sample"));
        }
        if taps.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(invalid("cir", "entries must be finite and >= 0"));
        }
        Ok(Self { taps })
    }

    /// Builds a CIR from one row per tap.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let l = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != m) {
            return Err(Error::DimensionMismatch {
                context: "cir rows",
                expected: m,
                actual: bad.len(),
            });
        }
        Self::new(DMatrix::from_fn(l, m, |i, j| rows[i][j]))
    }

    /// ISI-free channel with the given signal vector.
    pub fn single_tap(signal: &[f64]) -> Result<Self> {
        Self::from_rows(&[signal.to_vec()])
    }

    pub fn l_taps(&self) -> usize {
        self.taps.nrows()
    }

    pub fn m_samples(&self) -> usize {
        self.taps.ncols()
    }

    pub fn taps(&self) -> &DMatrix<f64> {
        &self.taps
    }

    /// Desired-signal vector (first tap).
    pub fn signal(&self) -> DVector<f64> {
        self.taps.row(0).transpose()
    }

    /// Tap `l` (0-based) as a vector over samples.
    pub fn tap(&self, l: usize) -> DVector<f64> {
        self.taps.row(l).transpose()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.taps.row_iter().map(|r| r.iter().copied().collect()).collect()
    }

    /// Multiplies every tap by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(&self.taps * factor)
    }
}

/// Expected molecule count inside the receiver at time `t` after release.
/// Zero for `t <= 0`.
pub fn expected_concentration(t: f64, p: &ChannelParams) -> f64 {
    if t <= 0.0 || p.n_tx == 0.0 {
        return 0.0;
    }
    p.n_tx * p.v_rx * p.log_shape(t).exp()
}

/// Time at which [`expected_concentration`] peaks, found by golden-section
/// search on the log-curve over `(1 ns, 10 d^2 / (6 D)]`.
pub fn reference_time(p: &ChannelParams) -> Result<f64> {
    p.validate()?;
    if p.n_tx == 0.0 {
        return Err(Error::ZeroCurve);
    }
    let mut lo = TREF_BRACKET_LO;
    let mut hi = 10.0 * p.diffusion_peak_time();
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;

    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = p.log_shape(x1);
    let mut f2 = p.log_shape(x2);
    for _ in 0..500 {
        if hi - lo <= TREF_REL_TOL * 0.5 * (hi + lo) {
            break;
        }
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = p.log_shape(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = p.log_shape(x1);
        }
    }
    let t_ref = 0.5 * (lo + hi);
    if expected_concentration(t_ref, p) > 0.0 {
        Ok(t_ref)
    } else {
        Err(Error::ZeroCurve)
    }
}

/// Samples the curve on the symbol grid, using a precomputed reference
/// time. Sample `m` (1-based) of tap `l` (0-based) is taken at
/// `(l * t_symb_norm + m * dt_norm) * t_ref`.
pub fn build_cir_with_tref(p: &ChannelParams, tc: &TimingConfig, t_ref: f64) -> Result<Cir> {
    p.validate()?;
    tc.validate()?;
    let taps = DMatrix::from_fn(tc.l_taps, tc.m_samples, |l, m| {
        let t_norm = l as f64 * tc.t_symb_norm + (m + 1) as f64 * tc.dt_norm;
        expected_concentration(t_norm * t_ref, p)
    });
    Cir::new(taps)
}

/// Samples the curve on the symbol grid normalized by [`reference_time`].
pub fn build_cir(p: &ChannelParams, tc: &TimingConfig) -> Result<Cir> {
    let t_ref = reference_time(p)?;
    build_cir_with_tref(p, tc, t_ref)
}
