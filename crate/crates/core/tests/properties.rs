mod common;

use common::{random_cir, random_instance, rng, table_cir};
use molfilter::channel::{build_cir, expected_concentration, reference_time, ChannelParams, Cir, TimingConfig};
use molfilter::detection::{gaussian_moments, BerModel};
use molfilter::filters::{correlator_filter, matched_filter, peak_filter, sinr, sum_filter, Filter};
use molfilter::montecarlo::{run_trials, SimConfig};
use molfilter::stats::{all_patterns, interference_covariance, shifted_poisson_pmf};
use molfilter::DetectorSpec;
use nalgebra::SymmetricEigen;
use proptest::prelude::*;
use rand::Rng;

fn channel() -> impl Strategy<Value = ChannelParams> {
    (
        1e2f64..1e6,
        2e-7f64..2e-6,
        1e-10f64..1e-9,
        0.0f64..5e3,
        0.0f64..3e-3,
        0.0f64..3e-3,
    )
        .prop_map(|(n_tx, d, diff, kd, vp, vq)| {
            let v = ChannelParams::default_with_n_tx(n_tx);
            ChannelParams::with_degradation_rate(n_tx, v.v_rx, d, diff, kd, vp, vq, 2.0)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn concentration_positive_and_vanishing(p in channel(), x in 0.01f64..5.0) {
        let t = x * p.diffusion_peak_time();
        prop_assert!(expected_concentration(t, &p) > 0.0);
        prop_assert_eq!(expected_concentration(0.0, &p), 0.0);
        prop_assert_eq!(expected_concentration(-t, &p), 0.0);
        let peak = expected_concentration(reference_time(&p).unwrap(), &p);
        prop_assert!(expected_concentration(1e-4 * p.diffusion_peak_time(), &p) < 1e-6 * peak);
        prop_assert!(expected_concentration(1e4 * p.diffusion_peak_time(), &p) < 1e-6 * peak);
    }

    #[test]
    fn reference_time_is_a_local_maximum(p in channel()) {
        let t = reference_time(&p).unwrap();
        let h = 1e-9;
        let c = |t| expected_concentration(t, &p);
        // forward / backward differences bracket the stationary point
        prop_assert!(c(t) - c(t - 3.0 * h) >= 0.0);
        prop_assert!(c(t + 3.0 * h) - c(t) <= 0.0);
        prop_assert!(t <= p.diffusion_peak_time() * (1.0 + 1e-6));
    }

    #[test]
    fn cir_linear_in_n_tx(a in 1.0f64..1e6, t_symb in 1.5f64..4.0) {
        let tc = TimingConfig { t_symb_norm: t_symb, ..TimingConfig::default() };
        let one = build_cir(&ChannelParams::default_with_n_tx(a), &tc).unwrap();
        let two = build_cir(&ChannelParams::default_with_n_tx(2.0 * a), &tc).unwrap();
        for (x, y) in one.taps().iter().zip(two.taps().iter()) {
            prop_assert!((2.0 * x - y).abs() <= 1e-12 * y.abs().max(1e-300));
        }
    }

    #[test]
    fn cir_first_row_peaks_near_reference(m in 4usize..12, t_symb in 3.0f64..5.0) {
        let tc = TimingConfig { m_samples: m, l_taps: 2, dt_norm: 0.25, t_symb_norm: t_symb };
        let p = ChannelParams::default_with_n_tx(1e4);
        let cir = build_cir(&p, &tc).unwrap();
        let s = cir.signal();
        let peak = expected_concentration(reference_time(&p).unwrap(), &p);
        // sample 4 sits at t = T^ref
        prop_assert_eq!(s.imax(), 3);
        prop_assert!(s.iter().all(|&x| x <= peak * (1.0 + 1e-12)));
    }

    #[test]
    fn covariance_symmetric_psd(seed in any::<u64>()) {
        let (cir, c_ext, cov) = random_instance(&mut rng(seed), 6, 3);
        let m = cov.matrix();
        prop_assert_eq!(m.clone(), m.transpose());
        let eig = SymmetricEigen::new(m.clone());
        let scale = m.abs().max().max(1.0);
        prop_assert!(eig.eigenvalues.min() >= -1e-10 * scale);
        for i in 0..cir.m_samples() {
            prop_assert!(m[(i, i)] >= c_ext - 1e-12);
        }
    }

    #[test]
    fn single_tap_covariance_is_diagonal(seed in any::<u64>(), c_ext in 0.0f64..100.0) {
        let mut r = rng(seed);
        let m = r.gen_range(1..8);
        let cir = random_cir(&mut r, m, 1);
        let cov = interference_covariance(&cir, c_ext).unwrap();
        for i in 0..m {
            for j in 0..m {
                let want = if i == j { c_ext } else { 0.0 };
                prop_assert_eq!(cov.matrix()[(i, j)], want);
            }
        }
    }

    #[test]
    fn matched_filter_dominates(seed in any::<u64>()) {
        let mut r = rng(seed);
        let (cir, _, cov) = random_instance(&mut r, 8, 3);
        let best = sinr(&matched_filter(&cir, &cov).unwrap(), &cir, &cov).unwrap();
        let tol = 1e-9 * best.max(1.0);
        for f in [sum_filter(cir.m_samples()).unwrap(), correlator_filter(&cir).unwrap(), peak_filter(&cir).unwrap()] {
            prop_assert!(best >= sinr(&f, &cir, &cov).unwrap() - tol);
        }
        for _ in 0..20 {
            let w: Vec<f64> = (0..cir.m_samples()).map(|_| r.gen_range(-1.0..1.0)).collect();
            if let Ok(f) = Filter::custom(&w) {
                prop_assert!(best >= sinr(&f, &cir, &cov).unwrap() - tol);
            }
        }
    }

    #[test]
    fn sinr_scale_invariant(seed in any::<u64>(), alpha in prop_oneof![1e-6f64..1e6, -1e6f64..-1e-6]) {
        let mut r = rng(seed);
        let (cir, _, cov) = random_instance(&mut r, 6, 3);
        let w: Vec<f64> = (0..cir.m_samples()).map(|_| r.gen_range(0.1..1.0)).collect();
        let scaled: Vec<f64> = w.iter().map(|x| alpha * x).collect();
        let a = sinr(&Filter::custom(&w).unwrap(), &cir, &cov).unwrap();
        let b = sinr(&Filter::custom(&scaled).unwrap(), &cir, &cov).unwrap();
        prop_assert!((a - b).abs() <= 1e-10 * a);
    }

    #[test]
    fn ber_bounded_and_threshold_optimal(seed in any::<u64>()) {
        let mut r = rng(seed);
        let (cir, c_ext, cov) = random_instance(&mut r, 6, 3);
        let w: Vec<f64> = (0..cir.m_samples()).map(|_| r.gen_range(-0.5..1.0)).collect();
        for f in [matched_filter(&cir, &cov).unwrap(), Filter::custom(&w).unwrap()] {
            let model = BerModel::new(&f, &cir, c_ext).unwrap();
            let xi = model.optimal_threshold();
            let best = model.ber(xi);
            prop_assert!((0.0..=1.0).contains(&best));
            let (lo, hi) = model.threshold_bracket();
            for _ in 0..100 {
                let x = r.gen_range(lo..=hi);
                let b = model.ber(x);
                prop_assert!((0.0..=1.0).contains(&b));
                prop_assert!(best <= b + 1e-12);
            }
        }
    }

    #[test]
    fn nonnegative_filters_add_variance(seed in any::<u64>()) {
        let mut r = rng(seed);
        let (cir, c_ext, _) = random_instance(&mut r, 6, 3);
        let w: Vec<f64> = (0..cir.m_samples()).map(|_| r.gen_range(0.0..1.0)).collect();
        let Ok(f) = Filter::custom(&w) else { return Ok(()) };
        for s in all_patterns(cir.l_taps() - 1).unwrap() {
            let g = gaussian_moments(&f, &cir, &s, c_ext).unwrap();
            prop_assert!(g.var0 >= 0.0 && g.var1 >= g.var0);
            prop_assert!(g.mu1 >= g.mu0);
        }
    }

    #[test]
    fn more_interference_never_helps(seed in any::<u64>()) {
        let mut r = rng(seed);
        let (cir, c_ext, cov) = random_instance(&mut r, 6, 3);
        let f = matched_filter(&cir, &cov).unwrap();
        let ber = |c| {
            let m = BerModel::new(&f, &cir, c).unwrap();
            m.ber(m.optimal_threshold())
        };
        let lo = ber(c_ext);
        let hi = ber(c_ext * r.gen_range(1.1..5.0));
        prop_assert!(hi >= lo - 1e-9, "{} < {}", hi, lo);
    }

    #[test]
    fn shifted_pmf_normalized(lambda in 0.05f64..2000.0) {
        let sd = lambda.sqrt();
        let hi = (lambda + 12.0 * sd + 30.0).ceil() as u64;
        let total: f64 = (0..=hi).map(|j| shifted_poisson_pmf(lambda, j as f64 - lambda)).sum();
        prop_assert!((total - 1.0).abs() < 1e-9);
        prop_assert_eq!(shifted_poisson_pmf(lambda, 0.5 - lambda), 0.0);
    }

    #[test]
    fn simulation_outputs_in_range(seed in any::<u64>(), trials in 1usize..3000) {
        let mut r = rng(seed);
        let (cir, c_ext, cov) = random_instance(&mut r, 4, 3);
        let f = matched_filter(&cir, &cov).unwrap();
        let xi = BerModel::new(&f, &cir, c_ext).unwrap().optimal_threshold();
        let res = run_trials(&cir, c_ext, &DetectorSpec::new(f, xi).unwrap(), &SimConfig::new(trials, seed)).unwrap();
        prop_assert!((0.0..=1.0).contains(&res.empirical_ber));
        prop_assert!(res.empirical_sinr >= 0.0);
        prop_assert!(res.errors <= res.trials_run);
        prop_assert_eq!(res.trials_run, trials as u64);
    }
}

#[test]
fn longer_symbols_sit_deeper_in_the_tail() {
    let short = table_cir(1e4, 1.5);
    let long = table_cir(1e4, 3.0);
    let s = short.tap(1);
    let l = long.tap(1);
    for m in 0..6 {
        assert!(s[m] > l[m], "sample {m}: {} <= {}", s[m], l[m]);
    }
}

#[test]
fn isi_free_cir_has_single_pattern() {
    let cir = Cir::single_tap(&[3.0, 1.0]).unwrap();
    let f = sum_filter(2).unwrap();
    let model = BerModel::new(&f, &cir, 1.0).unwrap();
    assert_eq!(model.patterns().len(), 1);
}
