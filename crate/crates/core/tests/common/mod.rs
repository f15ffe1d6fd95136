#![allow(dead_code)]

use molfilter::{build_cir, interference_covariance, ChannelParams, Cir, InterferenceCov, TimingConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random positive CIR with a dominant first row.
pub fn random_cir<R: Rng>(rng: &mut R, m: usize, l: usize) -> Cir {
    let rows: Vec<Vec<f64>> = (0..l)
        .map(|row| {
            let scale = if row == 0 { 20.0 } else { 8.0 / row as f64 };
            (0..m).map(|_| rng.gen_range(0.05..1.0) * scale).collect()
        })
        .collect();
    Cir::from_rows(&rows).unwrap()
}

pub fn random_instance<R: Rng>(rng: &mut R, max_m: usize, max_l: usize) -> (Cir, f64, InterferenceCov) {
    let m = rng.gen_range(1..=max_m);
    let l = rng.gen_range(1..=max_l);
    let cir = random_cir(rng, m, l);
    let c_ext = rng.gen_range(0.01..50.0);
    let cov = interference_covariance(&cir, c_ext).unwrap();
    (cir, c_ext, cov)
}

pub fn table_cir(n_tx: f64, t_symb_norm: f64) -> Cir {
    let tc = TimingConfig {
        t_symb_norm,
        ..TimingConfig::default()
    };
    build_cir(&ChannelParams::default_with_n_tx(n_tx), &tc).unwrap()
}
