#![allow(dead_code)]

use isac_core::geometry::{AirPoint, CMat};
use isac_core::scenario::{Scenario, ScenarioConfig};
use isac_core::signal::SlotBeams;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn desk() -> Scenario {
    ScenarioConfig::desk_scale().build().unwrap()
}

/// Random Hermitian PSD matrix of rank `rank` with trace `trace`.
pub fn random_psd(n: usize, rank: usize, trace: f64, rng: &mut impl Rng) -> CMat {
    let a = DMatrix::from_fn(n, rank, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    let m = &a * a.adjoint();
    let t = m.trace().re;
    m * Complex64::new(trace / t, 0.0)
}

/// Random covariances with each base station using at most its budget.
pub fn random_beams(s: &Scenario, rng: &mut impl Rng) -> SlotBeams {
    let na = s.array.n_antennas;
    let mut b = SlotBeams::zeros(s.n_gbs(), s.n_uavs(), na);
    for l in 0..s.n_gbs() {
        let total = s.p_max * rng.gen_range(0.2..1.0);
        let mut shares: Vec<f64> = (0..=s.n_uavs()).map(|_| rng.gen_range(0.05..1.0)).collect();
        let sum: f64 = shares.iter().sum();
        shares.iter_mut().for_each(|x| *x *= total / sum);
        for k in 0..s.n_uavs() {
            b.w[l][k] = random_psd(na, 1, shares[k], rng);
        }
        b.r[l] = random_psd(na, rng.gen_range(1..=na), shares[s.n_uavs()], rng);
    }
    b
}

pub fn random_point(rng: &mut impl Rng) -> AirPoint {
    AirPoint::new(rng.gen_range(0.0..400.0), rng.gen_range(0.0..400.0), rng.gen_range(40.0..120.0))
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}
