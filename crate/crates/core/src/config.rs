//! Experiment configuration: flat `key = value` text files with `#`
//! comments. Omitted keys keep their defaults.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::channel::{
    sphere_volume, ChannelParams, TimingConfig, DEFAULT_C_EXT, DEFAULT_DIFF_COEFF, DEFAULT_DISTANCE,
    DEFAULT_ENZYME_PER_UM3, DEFAULT_KAPPA, DEFAULT_RX_RADIUS, DEFAULT_V_PAR, DEFAULT_V_PERP,
};
use crate::error::{Error, Result};
use crate::filters::FilterKind;

pub const DEFAULT_TRIALS: usize = 100_000;
pub const DEFAULT_SEED: u64 = 20170505;
pub const DEFAULT_N_TX_MIN: f64 = 1e2;
pub const DEFAULT_N_TX_MAX: f64 = 1.6e5;
pub const DEFAULT_N_TX_POINTS: usize = 13;
pub const DEFAULT_WARMUP: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub v_rx: f64,
    pub distance: f64,
    pub diff_coeff: f64,
    /// Enzyme concentration in molecule/um^3.
    pub enzyme_conc: f64,
    pub kappa: f64,
    pub v_par: f64,
    pub v_perp: f64,
    pub c_ext: f64,
    pub m_samples: usize,
    pub l_taps: usize,
    pub dt_norm: f64,
    /// One output set is produced per symbol duration.
    pub t_symb_norm: Vec<f64>,
    pub n_tx_grid: Vec<f64>,
    pub filters: Vec<FilterKind>,
    pub trials: usize,
    /// Warm-up symbols discarded at the start of every simulation block.
    pub warmup: usize,
    pub seed: u64,
    pub workers: usize,
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let timing = TimingConfig::default();
        Self {
            v_rx: sphere_volume(DEFAULT_RX_RADIUS),
            distance: DEFAULT_DISTANCE,
            diff_coeff: DEFAULT_DIFF_COEFF,
            enzyme_conc: DEFAULT_ENZYME_PER_UM3,
            kappa: DEFAULT_KAPPA,
            v_par: DEFAULT_V_PAR,
            v_perp: DEFAULT_V_PERP,
            c_ext: DEFAULT_C_EXT,
            m_samples: timing.m_samples,
            l_taps: timing.l_taps,
            dt_norm: timing.dt_norm,
            t_symb_norm: vec![1.5, 3.0],
            n_tx_grid: log_grid(DEFAULT_N_TX_MIN, DEFAULT_N_TX_MAX, DEFAULT_N_TX_POINTS),
            filters: FilterKind::BENCHMARKED.to_vec(),
            trials: DEFAULT_TRIALS,
            warmup: DEFAULT_WARMUP,
            seed: DEFAULT_SEED,
            workers: 0,
            out_dir: PathBuf::from("results"),
        }
    }
}

/// `points` values log-spaced from `min` to `max`, both included.
pub fn log_grid(min: f64, max: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![min],
        _ => {
            let (a, b) = (min.log10(), max.log10());
            let step = (b - a) / (points - 1) as f64;
            (0..points)
                .map(|k| match k {
                    0 => min,
                    k if k == points - 1 => max,
                    k => 10f64.powf(a + step * k as f64),
                })
                .collect()
        }
    }
}

impl ExperimentConfig {
    pub fn channel_params(&self, n_tx: f64) -> ChannelParams {
        ChannelParams::from_table_units(
            n_tx,
            self.v_rx,
            self.distance,
            self.diff_coeff,
            self.enzyme_conc,
            self.kappa,
            self.v_par,
            self.v_perp,
            self.c_ext,
        )
    }

    pub fn timing(&self, t_symb_norm: f64) -> TimingConfig {
        TimingConfig {
            m_samples: self.m_samples,
            l_taps: self.l_taps,
            dt_norm: self.dt_norm,
            t_symb_norm,
        }
    }

    /// Checks every invariant. The error names the violated field.
    pub fn validate(&self) -> Result<()> {
        let field = |name: &'static str, msg: &str| Error::InvalidParameter {
            name,
            reason: msg.to_string(),
        };
        if self.n_tx_grid.is_empty() {
            return Err(field("n_tx_grid", "sweep grid must be nonempty"));
        }
        if self.n_tx_grid.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
            return Err(field("n_tx_grid", "values must be finite and > 0"));
        }
        if self.n_tx_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(field("n_tx_grid", "sweep grid must be strictly increasing"));
        }
        if self.t_symb_norm.is_empty() {
            return Err(field("t_symb_norm", "need at least one symbol duration"));
        }
        if self.filters.is_empty() {
            return Err(field("filters", "need at least one filter"));
        }
        if self.filters.contains(&FilterKind::Custom) {
            return Err(field("filters", "must be a subset of matched, sum, correlator, peak"));
        }
        if self.trials == 0 {
            return Err(field("trials", "must be >= 1"));
        }
        if self.warmup + 1 < self.l_taps {
            return Err(field("warmup", "must be >= l_taps - 1"));
        }
        self.channel_params(self.n_tx_grid[0]).validate()?;
        for &t in &self.t_symb_norm {
            self.timing(t).validate()?;
        }
        Ok(())
    }
}

const KEYS: &[&str] = &[
    "v_rx",
    "distance",
    "diff_coeff",
    "enzyme_conc",
    "kappa",
    "v_par",
    "v_perp",
    "c_ext",
    "m_samples",
    "l_taps",
    "dt_norm",
    "t_symb_norm",
    "n_tx_grid",
    "n_tx_min",
    "n_tx_max",
    "n_tx_points",
    "filters",
    "trials",
    "warmup",
    "seed",
    "workers",
    "out_dir",
];

pub fn parse_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config_str(&text)
}

pub fn parse_config_str(text: &str) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::default();
    let mut lines: HashMap<&'static str, usize> = HashMap::new();
    let mut range: (Option<f64>, Option<f64>, Option<usize>) = (None, None, None);

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| Error::Config { line: line_no, message };
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err(format!("expected `key = value`, got `{line}`")))?;
        let key = key.trim();
        let value = value.trim();
        let key: &'static str = KEYS
            .iter()
            .copied()
            .find(|k| *k == key)
            .ok_or_else(|| err(format!("unknown key `{key}`")))?;
        if lines.insert(key, line_no).is_some() {
            return Err(err(format!("duplicate key `{key}`")));
        }

        let float = |v: &str| -> Result<f64> {
            v.parse::<f64>()
                .map_err(|_| err(format!("`{key}`: expected a number, got `{v}`")))
        };
        let uint = |v: &str| -> Result<u64> {
            v.parse::<u64>()
                .map_err(|_| err(format!("`{key}`: expected a non-negative integer, got `{v}`")))
        };
        let floats = |v: &str| -> Result<Vec<f64>> { v.split(',').map(|x| float(x.trim())).collect() };

        match key {
            "v_rx" => cfg.v_rx = float(value)?,
            "distance" => cfg.distance = float(value)?,
            "diff_coeff" => cfg.diff_coeff = float(value)?,
            "enzyme_conc" => cfg.enzyme_conc = float(value)?,
            "kappa" => cfg.kappa = float(value)?,
            "v_par" => cfg.v_par = float(value)?,
            "v_perp" => cfg.v_perp = float(value)?,
            "c_ext" => cfg.c_ext = float(value)?,
            "m_samples" => cfg.m_samples = uint(value)? as usize,
            "l_taps" => cfg.l_taps = uint(value)? as usize,
            "dt_norm" => cfg.dt_norm = float(value)?,
            "t_symb_norm" => cfg.t_symb_norm = floats(value)?,
            "n_tx_grid" => cfg.n_tx_grid = floats(value)?,
            "n_tx_min" => range.0 = Some(float(value)?),
            "n_tx_max" => range.1 = Some(float(value)?),
            "n_tx_points" => range.2 = Some(uint(value)? as usize),
            "filters" => {
                cfg.filters = value
                    .split(',')
                    .map(|f| f.parse::<FilterKind>().map_err(|e| err(e.to_string())))
                    .collect::<Result<_>>()?
            }
            "trials" => cfg.trials = uint(value)? as usize,
            "warmup" => cfg.warmup = uint(value)? as usize,
            "seed" => cfg.seed = uint(value)?,
            "workers" => cfg.workers = uint(value)? as usize,
            "out_dir" => cfg.out_dir = PathBuf::from(value),
            _ => unreachable!("key list and match arms disagree"),
        }
    }

    if range != (None, None, None) {
        if let Some(&line) = lines.get("n_tx_grid") {
            return Err(Error::Config {
                line,
                message: "`n_tx_grid` cannot be combined with n_tx_min/n_tx_max/n_tx_points".into(),
            });
        }
        let min = range.0.unwrap_or(DEFAULT_N_TX_MIN);
        let max = range.1.unwrap_or(DEFAULT_N_TX_MAX);
        let points = range.2.unwrap_or(DEFAULT_N_TX_POINTS);
        let line = ["n_tx_min", "n_tx_max", "n_tx_points"]
            .iter()
            .filter_map(|k| lines.get(k))
            .copied()
            .min()
            .unwrap_or(0);
        if !(min > 0.0 && max > min) && points > 1 {
            return Err(Error::Config {
                line,
                message: "n_tx_grid: need 0 < n_tx_min < n_tx_max".into(),
            });
        }
        cfg.n_tx_grid = log_grid(min, max, points);
        lines.insert("n_tx_grid", line);
    }

    cfg.validate().map_err(|e| match e {
        Error::InvalidParameter { name, reason } => Error::Config {
            line: lines.get(name).copied().unwrap_or(0),
            message: format!("invariant violated for `{name}`: {reason}"),
        },
        other => other,
    })?;
    Ok(cfg)
}

/// Serializes a configuration in the same `key = value` format accepted by
/// [`parse_config_str`].
pub fn to_config_string(cfg: &ExperimentConfig) -> String {
    let join = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", ");
    let mut out = String::new();
    let mut push = |k: &str, v: String| {
        out.push_str(k);
        out.push_str(" = ");
        out.push_str(&v);
        out.push('\n');
    };
    push("v_rx", format!("{:?}", cfg.v_rx));
    push("distance", format!("{:?}", cfg.distance));
    push("diff_coeff", format!("{:?}", cfg.diff_coeff));
    push("enzyme_conc", format!("{:?}", cfg.enzyme_conc));
    push("kappa", format!("{:?}", cfg.kappa));
    push("v_par", format!("{:?}", cfg.v_par));
    push("v_perp", format!("{:?}", cfg.v_perp));
    push("c_ext", format!("{:?}", cfg.c_ext));
    push("m_samples", cfg.m_samples.to_string());
    push("l_taps", cfg.l_taps.to_string());
    push("dt_norm", format!("{:?}", cfg.dt_norm));
    push("t_symb_norm", join(&cfg.t_symb_norm));
    push("n_tx_grid", join(&cfg.n_tx_grid));
    push(
        "filters",
        cfg.filters.iter().map(|f| f.name()).collect::<Vec<_>>().join(", "),
    );
    push("trials", cfg.trials.to_string());
    push("warmup", cfg.warmup.to_string());
    push("seed", cfg.seed.to_string());
    push("workers", cfg.workers.to_string());
    push("out_dir", cfg.out_dir.display().to_string());
    out
}
