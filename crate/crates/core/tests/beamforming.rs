mod common;

use common::{desk, random_beams, random_psd, rng};
use isac_core::beamforming::{
    assemble_beamforming_sdr, initial_cuts, optimize_slot, rank_one_reconstruct, rate_lower_bound_coeffs, Transmission,
};
use isac_core::geometry::{CMat, Orientation};
use isac_core::scenario::{ArraySpec, BoxSpec, Level, ScenarioConfig, SensingSpec, UavConfig};
use isac_core::signal::{Receiver, SensingGeometry, SlotBeams, SlotChannels, TrajectoryPlan};
use nalgebra::SymmetricEigen;
use num_complex::Complex64;
use rand::Rng;

fn quad(h: &nalgebra::DVector<Complex64>, m: &CMat) -> f64 {
    h.dotc(&(m * h)).re
}

#[test]
fn subproblem_has_one_block_per_covariance() {
    let s = desk();
    let traj = TrajectoryPlan::straight(&s);
    let ch = SlotChannels::new(&s, &traj, 0);
    let geo = SensingGeometry::new(&s);
    let local = random_beams(&s, &mut rng(1));
    let lin = rate_lower_bound_coeffs(Receiver::TypeI, &ch, &local, &[0, 1]);
    let sdr =
        assemble_beamforming_sdr(Transmission::Beamformed, &lin, &initial_cuts(&lin), &ch, &geo, &s).unwrap();
    let expected = s.n_gbs() * s.n_uavs() + s.n_gbs();
    assert_eq!(sdr.n_blocks(), expected);
    assert_eq!(sdr.problem.psd_sizes().len(), expected);
    assert!(sdr.problem.psd_sizes().iter().all(|&n| n == 2 * s.array.n_antennas));
}

#[test]
fn reconstruction_preserves_served_gain_and_total_covariance() {
    let s = desk();
    let traj = TrajectoryPlan::straight(&s);
    let mut r = rng(2);
    for trial in 0..40 {
        let ch = SlotChannels::new(&s, &traj, trial % s.n_slots);
        let na = s.array.n_antennas;
        let w: Vec<Vec<CMat>> = (0..s.n_gbs())
            .map(|_| (0..s.n_uavs()).map(|_| random_psd(na, r.gen_range(1..=na), r.gen_range(0.1..1.0), &mut r)).collect())
            .collect();
        let rr: Vec<CMat> = (0..s.n_gbs()).map(|_| random_psd(na, r.gen_range(1..=na), 0.5, &mut r)).collect();
        let bar = rank_one_reconstruct(&w, &rr, &ch);
        for l in 0..s.n_gbs() {
            let mut before = rr[l].clone();
            let mut after = bar.r[l].clone();
            for i in 0..s.n_uavs() {
                before += &w[l][i];
                after += &bar.w[l][i];
                let h = &ch.h[l][i];
                let g0 = quad(h, &w[l][i]);
                assert!((quad(h, &bar.w[l][i]) - g0).abs() <= 1e-9 * g0);
                let ev = SymmetricEigen::new(bar.w[l][i].clone()).eigenvalues;
                let mut ev: Vec<f64> = ev.iter().copied().collect();
                ev.sort_by(|a, b| b.total_cmp(a));
                assert!(ev[1].abs() <= 1e-9 * ev[0]);
            }
            assert!((&before - &after).norm() <= 1e-12 * before.norm());
            let min = SymmetricEigen::new(bar.r[l].clone()).eigenvalues.min();
            assert!(min >= -1e-10 * bar.r[l].trace().re, "sensing covariance not PSD: {min}");
        }
    }
}

/// One base station, one UAV, no sensing requirement and a receiver that
/// cancels the sensing signal: the optimum sends all power along the channel.
#[test]
fn single_link_reaches_channel_capacity() {
    let cfg = ScenarioConfig {
        gbs: vec![[0.0, 0.0]],
        uavs: vec![UavConfig { start: [60.0, 30.0], end: [60.0, 30.0], altitude: 80.0 }],
        array: ArraySpec { n_antennas: 4, spacing_over_wavelength: 0.5, orientation: Orientation::Horizontal },
        receiver: Receiver::TypeII,
        p_max: Level::Linear(3.0),
        noise: Level::db(-100.0, "dBW"),
        kappa: Level::db(-45.0, "dB"),
        gamma: Level::Linear(0.0),
        n_slots: 2,
        max_step: 10.0,
        d_min: 0.0,
        sensing: SensingSpec::Box(BoxSpec { x: [100.0, 120.0], y: [100.0, 120.0], altitude: 50.0, count: 1 }),
        solver: Default::default(),
        seed: 0,
    };
    let s = cfg.build().unwrap();
    let traj = TrajectoryPlan::straight(&s);
    let ch = SlotChannels::new(&s, &traj, 0);
    let geo = SensingGeometry::new(&s);
    let na = s.array.n_antennas;
    let mut init = SlotBeams::zeros(1, 1, na);
    init.w[0][0] = CMat::identity(na, na) * Complex64::new(0.1, 0.0);
    init.r[0] = CMat::identity(na, na) * Complex64::new(0.5, 0.0);
    let out = optimize_slot(Transmission::Beamformed, Receiver::TypeII, &s, &ch, &geo, &[0], &init, 1e-9, 40).unwrap();
    let capacity = (1.0 + s.p_max * ch.h[0][0].norm_squared()).log2();
    let got = *out.history.last().unwrap();
    assert!((got - capacity).abs() <= 1e-6 * capacity, "{got} vs {capacity}");
    for w in out.history.windows(2) {
        assert!(w[1] >= w[0] - 1e-12);
    }
}

#[test]
fn slot_histories_never_decrease() {
    let s = desk();
    let traj = TrajectoryPlan::straight(&s);
    let geo = SensingGeometry::new(&s);
    let init = isac_core::ao::initialize(&s, Transmission::Beamformed).unwrap();
    for n in [0, 4, 9] {
        let ch = SlotChannels::new(&s, &traj, n);
        let serving: Vec<usize> = (0..s.n_uavs()).map(|k| init.association.serving(k, n)).collect();
        for rx in [Receiver::TypeI, Receiver::TypeII] {
            let out =
                optimize_slot(Transmission::Beamformed, rx, &s, &ch, &geo, &serving, &init.beams.slots[n], 1e-4, 20)
                    .unwrap();
            for w in out.history.windows(2) {
                assert!(w[1] >= w[0] - 1e-12, "{:?}", out.history);
            }
            for l in 0..s.n_gbs() {
                assert!(out.beams.power(l) <= s.p_max * (1.0 + 1e-8));
            }
            for q in 0..s.sensing.len() {
                assert!(geo.illumination(q, &out.beams) >= s.gamma * (1.0 - 1e-6));
            }
        }
    }
}

#[test]
fn isotropic_slot_keeps_scaled_identities() {
    let s = desk();
    let traj = TrajectoryPlan::straight(&s);
    let geo = SensingGeometry::new(&s);
    let init = isac_core::ao::initialize(&s, Transmission::Isotropic).unwrap();
    let ch = SlotChannels::new(&s, &traj, 3);
    let serving: Vec<usize> = (0..s.n_uavs()).map(|k| init.association.serving(k, 3)).collect();
    let out = optimize_slot(Transmission::Isotropic, Receiver::TypeI, &s, &ch, &geo, &serving, &init.beams.slots[3], 1e-4, 20)
        .unwrap();
    for m in out.beams.w.iter().flatten().chain(out.beams.r.iter()) {
        let d = m[(0, 0)];
        let off = m - CMat::identity(m.nrows(), m.ncols()) * d;
        assert!(off.norm() <= 1e-12 * (1.0 + d.norm()));
    }
}
