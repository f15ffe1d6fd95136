//! Parameter sweeps over the transmitted molecule count and their CSV /
//! JSON outputs.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::channel::{build_cir_with_tref, reference_time, Cir};
use crate::config::ExperimentConfig;
use crate::detection::{BerModel, DetectorSpec};
use crate::error::Result;
use crate::filters::{design, sinr, FilterKind};
use crate::montecarlo::{run_trials, SimConfig};
use crate::stats::interference_covariance;

/// Nominal reference time for the default channel in seconds, kept in the
/// manifest next to the computed value.
pub const CROSS_CHECK_T_REF: f64 = 1.76e-4;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub n_tx: f64,
    pub filter: FilterKind,
    pub sinr_analytical: f64,
    pub sinr_empirical: f64,
    pub sinr_halfwidth: f64,
    pub threshold: f64,
    pub ber_analytical: f64,
    pub ber_empirical: f64,
    pub ber_halfwidth: f64,
    /// Simulation seed; shared by all filters at the same `n_tx`.
    pub seed: u64,
}

/// Results for one symbol duration.
#[derive(Debug, Clone, PartialEq)]
pub struct TsymbResult {
    pub t_symb_norm: f64,
    /// Reference time in seconds.
    pub t_ref: f64,
    pub points: Vec<SweepPoint>,
    /// Matched-filter weights at each grid point, when the matched filter is
    /// part of the sweep.
    pub matched_taps: Vec<(f64, Vec<f64>)>,
}

impl TsymbResult {
    pub fn dir_name(&self) -> String {
        format!("tsymb_{}", self.t_symb_norm)
    }

    pub fn point(&self, n_tx: f64, filter: FilterKind) -> Option<&SweepPoint> {
        self.points.iter().find(|p| p.n_tx == n_tx && p.filter == filter)
    }

    pub fn series(&self, filter: FilterKind) -> Vec<&SweepPoint> {
        self.points.iter().filter(|p| p.filter == filter).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub results: Vec<TsymbResult>,
    pub files: Vec<PathBuf>,
}

/// Deterministic per-point seed (splitmix64 finalizer over the inputs).
pub fn point_seed(seed: u64, t_symb_index: usize, point_index: usize) -> u64 {
    let mut z = seed
        ^ (t_symb_index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ (point_index as u64).wrapping_mul(0xD1B5_4A32_D192_ED03);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Shortest round-trip decimal; exponent form outside `[1e-4, 1e15)`.
pub fn format_float(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || !x.is_finite() || (1e-4..1e15).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

/// Evaluates every filter at every grid point for one symbol duration.
pub fn sweep_tsymb(cfg: &ExperimentConfig, t_symb_index: usize) -> Result<TsymbResult> {
    cfg.validate()?;
    let t_symb_norm = cfg.t_symb_norm[t_symb_index];
    let timing = cfg.timing(t_symb_norm);
    let t_ref = reference_time(&cfg.channel_params(cfg.n_tx_grid[0]))?;

    let mut points = Vec::new();
    let mut matched_taps = Vec::new();
    for (k, &n_tx) in cfg.n_tx_grid.iter().enumerate() {
        let cir = build_cir_with_tref(&cfg.channel_params(n_tx), &timing, t_ref)?;
        let seed = point_seed(cfg.seed, t_symb_index, k);
        for &kind in &cfg.filters {
            let point = evaluate(cfg, &cir, kind, n_tx, seed)?;
            if kind == FilterKind::Matched {
                matched_taps.push((n_tx, point.1));
            }
            points.push(point.0);
        }
    }
    Ok(TsymbResult {
        t_symb_norm,
        t_ref,
        points,
        matched_taps,
    })
}

fn evaluate(
    cfg: &ExperimentConfig,
    cir: &Cir,
    kind: FilterKind,
    n_tx: f64,
    seed: u64,
) -> Result<(SweepPoint, Vec<f64>)> {
    let cov = interference_covariance(cir, cfg.c_ext)?;
    let filter = design(kind, cir, &cov)?;
    let sinr_analytical = sinr(&filter, cir, &cov)?;
    let model = BerModel::new(&filter, cir, cfg.c_ext)?;
    let threshold = model.optimal_threshold();
    let ber_analytical = model.ber(threshold);
    let sim = SimConfig {
        trials: cfg.trials,
        warmup: cfg.warmup,
        seed,
        workers: cfg.workers,
    };
    let weights = filter.weights().iter().copied().collect();
    let spec = DetectorSpec::new(filter, threshold)?;
    let res = run_trials(cir, cfg.c_ext, &spec, &sim)?;
    Ok((
        SweepPoint {
            n_tx,
            filter: kind,
            sinr_analytical,
            sinr_empirical: res.empirical_sinr,
            sinr_halfwidth: res.sinr_halfwidth,
            threshold,
            ber_analytical,
            ber_empirical: res.empirical_ber,
            ber_halfwidth: res.ber_halfwidth,
            seed,
        },
        weights,
    ))
}

pub fn compute_sweep(cfg: &ExperimentConfig) -> Result<Vec<TsymbResult>> {
    (0..cfg.t_symb_norm.len()).map(|i| sweep_tsymb(cfg, i)).collect()
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)?)
}

#[derive(Serialize)]
struct Manifest<'a> {
    crate_version: &'static str,
    config: &'a ExperimentConfig,
    t_symb_norm: f64,
    t_ref_s: f64,
    cross_check_t_ref_s: f64,
    t_ref_ratio: f64,
    seed: u64,
    point_seeds: Vec<u64>,
}

/// Writes `sinr.csv`, `ber.csv`, `filter_taps.csv` and `manifest.json` into
/// `out_dir/tsymb_<value>/` for each result.
pub fn write_outputs(cfg: &ExperimentConfig, results: &[TsymbResult], out_dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for res in results {
        let dir = out_dir.join(res.dir_name());
        fs::create_dir_all(&dir)?;

        let path = dir.join("sinr.csv");
        let mut w = csv_writer(&path)?;
        w.write_record(["n_tx", "filter", "sinr_analytical", "sinr_empirical", "sinr_halfwidth"])?;
        for p in &res.points {
            w.write_record([
                format_float(p.n_tx),
                p.filter.name().to_string(),
                format_float(p.sinr_analytical),
                format_float(p.sinr_empirical),
                format_float(p.sinr_halfwidth),
            ])?;
        }
        w.flush()?;
        files.push(path);

        let path = dir.join("ber.csv");
        let mut w = csv_writer(&path)?;
        w.write_record([
            "n_tx",
            "filter",
            "threshold",
            "ber_analytical",
            "ber_empirical",
            "ber_halfwidth",
        ])?;
        for p in &res.points {
            w.write_record([
                format_float(p.n_tx),
                p.filter.name().to_string(),
                format_float(p.threshold),
                format_float(p.ber_analytical),
                format_float(p.ber_empirical),
                format_float(p.ber_halfwidth),
            ])?;
        }
        w.flush()?;
        files.push(path);

        let path = dir.join("filter_taps.csv");
        let mut w = csv_writer(&path)?;
        w.write_record(["n_tx", "tap_index", "weight"])?;
        for (n_tx, taps) in &res.matched_taps {
            for (i, wt) in taps.iter().enumerate() {
                w.write_record([format_float(*n_tx), (i + 1).to_string(), format_float(*wt)])?;
            }
        }
        w.flush()?;
        files.push(path);

        let mut seeds: Vec<u64> = res.points.iter().map(|p| p.seed).collect();
        seeds.dedup();
        let manifest = Manifest {
            crate_version: env!("CARGO_PKG_VERSION"),
            config: cfg,
            t_symb_norm: res.t_symb_norm,
            t_ref_s: res.t_ref,
            cross_check_t_ref_s: CROSS_CHECK_T_REF,
            t_ref_ratio: res.t_ref / CROSS_CHECK_T_REF,
            seed: cfg.seed,
            point_seeds: seeds,
        };
        let path = dir.join("manifest.json");
        let mut json = serde_json::to_string_pretty(&manifest)?;
        json.push('\n');
        fs::write(&path, json)?;
        files.push(path);
    }
    Ok(files)
}

/// Runs the full sweep and writes its outputs under `cfg.out_dir`.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepReport> {
    let results = compute_sweep(cfg)?;
    let files = write_outputs(cfg, &results, &cfg.out_dir)?;
    Ok(SweepReport { results, files })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format() {
        assert_eq!(format_float(0.0), "0");
        assert_eq!(format_float(1.5), "1.5");
        assert_eq!(format_float(100000.0), "100000");
        assert_eq!(format_float(1e-4), "0.0001");
        assert_eq!(format_float(5.4697e-5), "5.4697e-5");
        assert_eq!(format_float(2e15), "2e15");
        assert_eq!(format_float(-3.25e-7), "-3.25e-7");
        for x in [0.1 + 0.2, 1.0 / 3.0, 6.02e23, 1.234e-300] {
            assert_eq!(format_float(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn seeds_differ_between_points() {
        let a = point_seed(1, 0, 0);
        assert_ne!(a, point_seed(1, 0, 1));
        assert_ne!(a, point_seed(1, 1, 0));
        assert_ne!(a, point_seed(2, 0, 0));
        assert_eq!(a, point_seed(1, 0, 0));
    }

    #[test]
    fn small_sweep_writes_files() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig {
            n_tx_grid: vec![100.0, 1000.0],
            t_symb_norm: vec![1.5],
            trials: 2000,
            out_dir: dir.path().to_path_buf(),
            ..ExperimentConfig::default()
        };
        let report = run_sweep(&cfg).unwrap();
        assert_eq!(report.files.len(), 4);
        let res = &report.results[0];
        assert_eq!(res.points.len(), 8);
        assert_eq!(res.matched_taps.len(), 2);
        let sinr = std::fs::read_to_string(dir.path().join("tsymb_1.5/sinr.csv")).unwrap();
        assert!(sinr.starts_with("n_tx,filter,sinr_analytical,sinr_empirical,sinr_halfwidth\n"));
        assert_eq!(sinr.lines().count(), 9);
        assert!(!sinr.contains('\r'));
        let taps = std::fs::read_to_string(dir.path().join("tsymb_1.5/filter_taps.csv")).unwrap();
        assert_eq!(taps.lines().count(), 1 + 2 * 6);
        let seeds: Vec<u64> = res.series(FilterKind::Sum).iter().map(|p| p.seed).collect();
        for kind in FilterKind::BENCHMARKED {
            let s: Vec<u64> = res.series(kind).iter().map(|p| p.seed).collect();
            assert_eq!(s, seeds);
        }
    }
}
