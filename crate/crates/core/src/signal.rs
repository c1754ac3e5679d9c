//! Transmit covariances, SINR and rate for both receiver types, sum rate and
//! illumination power.
//!
//! Rates are computed with channels scaled by `kappa / sigma^2`, so the noise
//! term is 1 and covariances stay in watts.

use nalgebra::{SymmetricEigen, Vector2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::geometry::{
    channel_vector, distance_squared, outer, quad_form, steering_toward, AirPoint, CMat, CVec,
};
use crate::scenario::Scenario;
use crate::CoreError;

/// UAV receiver capability.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Receiver {
    /// Sensing signals are treated as interference.
    TypeI,
    /// Sensing signals are cancelled before decoding.
    TypeII,
}

/// Covariances of one slot: `w[l][i]` for GBS `l` and UAV `i`, `r[l]` for the
/// dedicated sensing signal of GBS `l`.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotBeams {
    pub w: Vec<Vec<CMat>>,
    pub r: Vec<CMat>,
    /// Whether `w[l][i]` is known to be rank one.
    pub rank1: Vec<Vec<bool>>,
}

impl SlotBeams {
    pub fn zeros(n_gbs: usize, n_uavs: usize, n_antennas: usize) -> Self {
        let z = CMat::zeros(n_antennas, n_antennas);
        SlotBeams {
            w: vec![vec![z.clone(); n_uavs]; n_gbs],
            r: vec![z; n_gbs],
            rank1: vec![vec![false; n_uavs]; n_gbs],
        }
    }

    pub fn n_gbs(&self) -> usize {
        self.r.len()
    }

    pub fn n_uavs(&self) -> usize {
        self.w.first().map_or(0, |v| v.len())
    }

    /// `sum_i W_{l,i} + R_l` (or without `R_l`).
    pub fn total(&self, l: usize, with_sensing: bool) -> CMat {
        let mut t = if with_sensing { self.r[l].clone() } else { CMat::zeros(self.r[l].nrows(), self.r[l].ncols()) };
        for w in &self.w[l] {
            t += w;
        }
        t
    }

    /// Transmit power of GBS `l`.
    pub fn power(&self, l: usize) -> f64 {
        self.w[l].iter().map(|w| w.trace().re).sum::<f64>() + self.r[l].trace().re
    }

    /// Convex combination `(1 - t) self + t other`.
    pub fn lerp(&self, other: &SlotBeams, t: f64) -> SlotBeams {
        let mix = |a: &CMat, b: &CMat| a * Complex64::new(1.0 - t, 0.0) + b * Complex64::new(t, 0.0);
        SlotBeams {
            w: self
                .w
                .iter()
                .zip(&other.w)
                .map(|(a, b)| a.iter().zip(b).map(|(x, y)| mix(x, y)).collect())
                .collect(),
            r: self.r.iter().zip(&other.r).map(|(x, y)| mix(x, y)).collect(),
            rank1: vec![vec![false; self.n_uavs()]; self.n_gbs()],
        }
    }
}

/// Covariances for every slot.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformingSolution {
    pub slots: Vec<SlotBeams>,
}

/// One serving GBS per (UAV, slot): `gbs_of[k][n]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Association {
    pub gbs_of: Vec<Vec<usize>>,
}

impl Association {
    pub fn uniform(n_uavs: usize, n_slots: usize, gbs: usize) -> Self {
        Association { gbs_of: vec![vec![gbs; n_slots]; n_uavs] }
    }

    pub fn serving(&self, k: usize, n: usize) -> usize {
        self.gbs_of[k][n]
    }
}

/// Horizontal UAV positions `q[k][n]` at fixed altitudes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPlan {
    pub q: Vec<Vec<Vector2<f64>>>,
    pub altitudes: Vec<f64>,
}

impl TrajectoryPlan {
    /// Constant-velocity flight from each start to each end point.
    pub fn straight(scenario: &Scenario) -> Self {
        let n = scenario.n_slots;
        let q = scenario
            .uavs
            .iter()
            .map(|u| {
                (0..n)
                    .map(|i| u.start + (u.end - u.start) * (i as f64 / (n - 1) as f64))
                    .collect()
            })
            .collect();
        TrajectoryPlan { q, altitudes: scenario.uavs.iter().map(|u| u.altitude).collect() }
    }

    pub fn point(&self, k: usize, n: usize) -> AirPoint {
        AirPoint { horizontal: self.q[k][n], altitude: self.altitudes[k] }
    }

    pub fn n_slots(&self) -> usize {
        self.q.first().map_or(0, |v| v.len())
    }

    /// Worst violations of the endpoint, speed and separation constraints
    /// (all in metres, zero when satisfied).
    pub fn flight_residuals(&self, scenario: &Scenario) -> FlightResiduals {
        let mut res = FlightResiduals::default();
        for (k, path) in self.q.iter().enumerate() {
            let u = &scenario.uavs[k];
            let n = path.len();
            res.endpoint = res.endpoint.max((path[0] - u.start).norm()).max((path[n - 1] - u.end).norm());
            for w in path.windows(2) {
                res.speed = res.speed.max((w[1] - w[0]).norm() - scenario.max_step);
            }
        }
        for k in 0..self.q.len() {
            for i in (k + 1)..self.q.len() {
                let dh = self.altitudes[k] - self.altitudes[i];
                for n in 0..self.n_slots() {
                    let d = ((self.q[k][n] - self.q[i][n]).norm_squared() + dh * dh).sqrt();
                    res.separation = res.separation.max(scenario.d_min - d);
                }
            }
        }
        res
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct FlightResiduals {
    pub endpoint: f64,
    pub speed: f64,
    pub separation: f64,
}

impl FlightResiduals {
    pub fn max(&self) -> f64 {
        self.endpoint.max(self.speed).max(self.separation)
    }
}

/// Noise-normalised channels of one slot: `h[l][k]` from GBS `l` to UAV `k`.
#[derive(Debug, Clone)]
pub struct SlotChannels {
    pub h: Vec<Vec<CVec>>,
}

impl SlotChannels {
    pub fn new(scenario: &Scenario, traj: &TrajectoryPlan, n: usize) -> Self {
        let kappa = scenario.normalized_kappa();
        let h = scenario
            .gbs
            .iter()
            .map(|g| {
                (0..traj.q.len())
                    .map(|k| channel_vector(g, &traj.point(k, n), &scenario.array, kappa).entries)
                    .collect()
            })
            .collect();
        SlotChannels { h }
    }

    /// `tr(H_{l,k} X)`.
    pub fn gain(&self, l: usize, k: usize, x: &CMat) -> f64 {
        quad_form(&self.h[l][k], x)
    }
}

/// Signal and interference-plus-noise seen by UAV `k` when decoding the beam
/// `w[m][k]` (noise normalised to 1).
pub(crate) fn signal_and_interference(
    receiver: Receiver,
    ch: &SlotChannels,
    beams: &SlotBeams,
    m: usize,
    k: usize,
) -> (f64, f64) {
    let mut signal = 0.0;
    let mut interf = 1.0;
    for l in 0..beams.n_gbs() {
        for (i, w) in beams.w[l].iter().enumerate() {
            let g = ch.gain(l, k, w);
            if (l, i) == (m, k) {
                signal = g;
            } else {
                interf += g;
            }
        }
        if receiver == Receiver::TypeI {
            interf += ch.gain(l, k, &beams.r[l]);
        }
    }
    (signal.max(0.0), interf.max(1.0))
}

/// Rate in bit/s/Hz of UAV `k` served by GBS `m`.
pub(crate) fn rate_fast(receiver: Receiver, ch: &SlotChannels, beams: &SlotBeams, m: usize, k: usize) -> f64 {
    let (s, i) = signal_and_interference(receiver, ch, beams, m, k);
    (1.0 + s / i).log2()
}

fn check_psd(m: &CMat, what: &str) -> Result<(), CoreError> {
    let herm = (m - m.adjoint()).norm();
    let scale = m.norm().max(f64::MIN_POSITIVE);
    if herm > 1e-9 * scale {
        return Err(CoreError::ModelViolation(format!("{what} is not Hermitian")));
    }
    let tr = m.trace().re;
    let min = SymmetricEigen::new(m.clone()).eigenvalues.min();
    if min < -1e-9 * tr.abs().max(scale) {
        return Err(CoreError::ModelViolation(format!("{what} is not PSD (min eigenvalue {min:e})")));
    }
    Ok(())
}

/// SINR of UAV `k` served by GBS `m`.
///
/// `h_all[l]` is the channel outer product from GBS `l` to UAV `k`; the
/// interference from GBS `l` is measured with that GBS's own channel.
pub fn sinr(
    receiver: Receiver,
    h_all: &[CMat],
    serving: (usize, usize),
    beams: &SlotBeams,
    sigma2: f64,
) -> Result<f64, CoreError> {
    if h_all.len() != beams.n_gbs() {
        return Err(CoreError::Dimension(format!(
            "{} channel matrices for {} base stations",
            h_all.len(),
            beams.n_gbs()
        )));
    }
    let (m, k) = serving;
    let tr = |a: &CMat, b: &CMat| (a * b).trace().re;
    let mut signal = 0.0;
    let mut interf = sigma2;
    for (l, h) in h_all.iter().enumerate() {
        for (i, w) in beams.w[l].iter().enumerate() {
            check_psd(w, &format!("W[{l}][{i}]"))?;
            if (l, i) == (m, k) {
                signal = tr(h, w);
            } else {
                interf += tr(h, w);
            }
        }
        check_psd(&beams.r[l], &format!("R[{l}]"))?;
        if receiver == Receiver::TypeI {
            interf += tr(h, &beams.r[l]);
        }
    }
    Ok(signal.max(0.0) / interf)
}

/// `log2(1 + sinr)`.
pub fn rate(
    receiver: Receiver,
    h_all: &[CMat],
    serving: (usize, usize),
    beams: &SlotBeams,
    sigma2: f64,
) -> Result<f64, CoreError> {
    Ok((1.0 + sinr(receiver, h_all, serving, beams, sigma2)?).log2())
}

/// Per-slot and total sum rate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SumRate {
    /// `per_uav[n][k]`
    pub per_uav: Vec<Vec<f64>>,
    pub per_slot: Vec<f64>,
    pub total: f64,
}

impl SumRate {
    /// Sum rate averaged over slots.
    pub fn average(&self) -> f64 {
        if self.per_slot.is_empty() {
            0.0
        } else {
            self.total / self.per_slot.len() as f64
        }
    }
}

pub fn sum_rate(
    receiver: Receiver,
    assoc: &Association,
    beams: &BeamformingSolution,
    traj: &TrajectoryPlan,
    scenario: &Scenario,
) -> SumRate {
    let per_uav: Vec<Vec<f64>> = (0..beams.slots.len())
        .map(|n| {
            let ch = SlotChannels::new(scenario, traj, n);
            (0..traj.q.len())
                .map(|k| rate_fast(receiver, &ch, &beams.slots[n], assoc.serving(k, n), k))
                .collect()
        })
        .collect();
    let per_slot: Vec<f64> = per_uav.iter().map(|r| r.iter().sum()).collect();
    let total = per_slot.iter().sum();
    SumRate { per_uav, per_slot, total }
}

/// Steering vectors and inverse squared distances from every GBS to every
/// sensing sample: `a[q][l]`, `inv_d2[q][l]`.
#[derive(Debug, Clone)]
pub struct SensingGeometry {
    pub a: Vec<Vec<CVec>>,
    pub inv_d2: Vec<Vec<f64>>,
}

impl SensingGeometry {
    pub fn new(scenario: &Scenario) -> Self {
        let mut a = Vec::new();
        let mut inv_d2 = Vec::new();
        for p in &scenario.sensing {
            a.push(scenario.gbs.iter().map(|g| steering_toward(g, p, &scenario.array)).collect());
            inv_d2.push(
                scenario
                    .gbs
                    .iter()
                    .map(|g| 1.0 / distance_squared(&g.u, &p.horizontal, p.altitude))
                    .collect(),
            );
        }
        SensingGeometry { a, inv_d2 }
    }

    /// `a a^H / d^2` for sample `q` and GBS `l`.
    pub fn weight(&self, q: usize, l: usize) -> CMat {
        outer(&self.a[q][l]) * Complex64::new(self.inv_d2[q][l], 0.0)
    }

    pub fn illumination(&self, q: usize, beams: &SlotBeams) -> f64 {
        (0..beams.n_gbs())
            .map(|l| quad_form(&self.a[q][l], &beams.total(l, true)) * self.inv_d2[q][l])
            .sum()
    }
}

/// Illumination power at sensing sample `q` for one slot.
pub fn illumination_power(q: usize, beams: &SlotBeams, scenario: &Scenario) -> f64 {
    illumination_at(&scenario.sensing[q], beams, scenario)
}

/// Illumination power at an arbitrary point for one slot.
pub fn illumination_at(p: &AirPoint, beams: &SlotBeams, scenario: &Scenario) -> f64 {
    scenario
        .gbs
        .iter()
        .enumerate()
        .map(|(l, g)| {
            let a = steering_toward(g, p, &scenario.array);
            quad_form(&a, &beams.total(l, true)) / distance_squared(&g.u, &p.horizontal, p.altitude)
        })
        .sum()
}
