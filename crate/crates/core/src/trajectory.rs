//! Trajectory stage.
//!
//! For fixed covariances, the rate of a UAV depends on its own horizontal
//! position only, through the inverse squared distances and the array
//! responses of every GBS. Both enter via the quadratic forms
//! `eta = a^H W a` and `mu = a^H R a`. Each trust-region step maximises the
//! first-order model of the sum rate over all interior waypoints, subject to
//! the speed limit and a linearised separation constraint, and is accepted
//! only when the true sum rate improves.

use std::f64::consts::{LOG2_E, PI};

use isac_conic::{ConicProblem, LinExpr, SocVar, SolveStatus};
use nalgebra::Vector2;
use num_complex::Complex64;

use crate::geometry::{distance_squared, steering_toward, AirPoint, ArrayConfig, CMat, GbsSite, Orientation};
use crate::scenario::Scenario;
use crate::signal::{rate_fast, Association, BeamformingSolution, Receiver, SlotBeams, SlotChannels, TrajectoryPlan};
use crate::CoreError;

/// Quadratic forms of every covariance seen from one point:
/// `eta[l][i] = a_l^H W_{l,i} a_l`, `mu[l] = a_l^H R_l a_l`.
#[derive(Debug, Clone, PartialEq)]
pub struct EtaMu {
    pub eta: Vec<Vec<f64>>,
    pub mu: Vec<f64>,
    /// Squared distances to every GBS.
    pub d2: Vec<f64>,
}

pub fn eta_mu(scenario: &Scenario, beams: &SlotBeams, point: &AirPoint) -> EtaMu {
    let mut eta = Vec::with_capacity(scenario.n_gbs());
    let mut mu = Vec::with_capacity(scenario.n_gbs());
    let mut d2 = Vec::with_capacity(scenario.n_gbs());
    for (l, g) in scenario.gbs.iter().enumerate() {
        let a = steering_toward(g, point, &scenario.array);
        eta.push(beams.w[l].iter().map(|w| crate::geometry::quad_form(&a, w)).collect());
        mu.push(crate::geometry::quad_form(&a, &beams.r[l]));
        d2.push(distance_squared(&g.u, &point.horizontal, point.altitude));
    }
    EtaMu { eta, mu, d2 }
}

/// Rate of UAV `k` served by GBS `m` written with distance ratios:
/// `log2(g) - log2(g - eta_{m,k})` where
/// `g = sum_l (D_m / D_l)(sum_i eta_{l,i} + mu_l) + D_m / kappa'`.
pub fn rate_via_eta_mu(receiver: Receiver, scenario: &Scenario, em: &EtaMu, m: usize, k: usize) -> f64 {
    let dm = em.d2[m];
    let mut g = dm / scenario.normalized_kappa();
    for l in 0..em.eta.len() {
        let mut e: f64 = em.eta[l].iter().sum();
        if receiver == Receiver::TypeI {
            e += em.mu[l];
        }
        g += dm / em.d2[l] * e;
    }
    let h = g - em.eta[m][k];
    g.log2() - h.log2()
}

/// `a^H M a` and its derivative with respect to the direction cosine.
fn form_and_slope(m: &CMat, cos: f64, cfg: &ArrayConfig) -> (f64, f64) {
    let w = 2.0 * PI * cfg.spacing_over_wavelength;
    let phi = w * cos;
    let mut val = 0.0;
    let mut der = 0.0;
    for p in 0..m.nrows() {
        for r in 0..m.ncols() {
            let k = r as f64 - p as f64;
            let e = Complex64::from_polar(1.0, phi * k);
            let t = m[(p, r)] * e;
            val += t.re;
            der += -t.im * w * k;
        }
    }
    (val, der)
}

/// Direction cosine and its gradient with respect to the horizontal position.
fn cosine_and_gradient(orientation: Orientation, gbs: &GbsSite, point: &AirPoint) -> (f64, Vector2<f64>) {
    let diff = point.horizontal - gbs.u;
    let d2 = diff.norm_squared() + point.altitude * point.altitude;
    let d = d2.sqrt();
    let d3 = d2 * d;
    match orientation {
        Orientation::Horizontal => (diff.x / d, Vector2::new(1.0 / d, 0.0) - diff * (diff.x / d3)),
        Orientation::Vertical => (point.altitude / d, -diff * (point.altitude / d3)),
    }
}

/// Rate of UAV `k` (served by `m`) at `point` and its gradient with respect
/// to the horizontal position, for fixed covariances.
pub fn rate_and_gradient(
    receiver: Receiver,
    scenario: &Scenario,
    beams: &SlotBeams,
    point: &AirPoint,
    m: usize,
    k: usize,
) -> (f64, Vector2<f64>) {
    let kappa = scenario.normalized_kappa();
    let mut s = 1.0;
    let mut ds = Vector2::zeros();
    let mut sig = 0.0;
    let mut dsig = Vector2::zeros();
    for (l, g) in scenario.gbs.iter().enumerate() {
        let (c, dc) = cosine_and_gradient(scenario.array.orientation, g, point);
        let diff = point.horizontal - g.u;
        let d2 = diff.norm_squared() + point.altitude * point.altitude;
        let dd2 = diff * 2.0;
        let total = beams.total(l, receiver == Receiver::TypeI);
        let (e, de) = form_and_slope(&total, c, &scenario.array);
        s += kappa * e / d2;
        ds += (dc * de / d2 - dd2 * (e / (d2 * d2))) * kappa;
        if l == m {
            let (e, de) = form_and_slope(&beams.w[m][k], c, &scenario.array);
            sig = kappa * e / d2;
            dsig = (dc * de / d2 - dd2 * (e / (d2 * d2))) * kappa;
        }
    }
    let i = s - sig;
    let rate = s.log2() - i.log2();
    let grad = (ds / s - (ds - dsig) / i) * LOG2_E;
    (rate, grad)
}

/// True sum rate over all slots for a given trajectory.
pub fn trajectory_sum_rate(
    receiver: Receiver,
    scenario: &Scenario,
    traj: &TrajectoryPlan,
    assoc: &Association,
    beams: &BeamformingSolution,
) -> f64 {
    (0..traj.n_slots())
        .map(|n| {
            let ch = SlotChannels::new(scenario, traj, n);
            (0..traj.q.len()).map(|k| rate_fast(receiver, &ch, &beams.slots[n], assoc.serving(k, n), k)).sum::<f64>()
        })
        .sum()
}

/// First-order coefficients `d[k][n]` of every UAV's rate at the current
/// waypoints.
pub fn traj_taylor_coeffs(
    receiver: Receiver,
    scenario: &Scenario,
    traj: &TrajectoryPlan,
    assoc: &Association,
    beams: &BeamformingSolution,
) -> Vec<Vec<Vector2<f64>>> {
    (0..traj.q.len())
        .map(|k| {
            (0..traj.n_slots())
                .map(|n| {
                    rate_and_gradient(receiver, scenario, &beams.slots[n], &traj.point(k, n), assoc.serving(k, n), k).1
                })
                .collect()
        })
        .collect()
}

/// Linearised separation constraint between two waypoints at `o_k`, `o_i`:
/// returns `(c, rhs)` such that the constraint reads
/// `c . (delta_k - delta_i) >= rhs`.
pub fn linearize_collision(o_k: &Vector2<f64>, o_i: &Vector2<f64>, d_min: f64, altitude_gap: f64) -> (Vector2<f64>, f64) {
    let diff = o_k - o_i;
    (diff * 2.0, d_min * d_min - altitude_gap * altitude_gap - diff.norm_squared())
}

/// An assembled trust-region subproblem.
#[derive(Debug, Clone)]
pub struct TrajSubproblem {
    pub problem: ConicProblem,
    /// `(omega, dx, dy)` for interior slots; `None` at the fixed endpoints.
    delta: Vec<Vec<Option<SocVar>>>,
}

impl TrajSubproblem {
    pub fn n_variables(&self) -> usize {
        self.delta.iter().flatten().filter(|d| d.is_some()).count() * 2
    }
}

const FEAS_MARGIN: f64 = 1e-7;

/// Builds the trust-region subproblem around `traj` with radius `omega`.
pub fn assemble_traj_subproblem(
    scenario: &Scenario,
    traj: &TrajectoryPlan,
    coeffs: &[Vec<Vector2<f64>>],
    omega: f64,
) -> TrajSubproblem {
    let n_slots = traj.n_slots();
    let mut p = ConicProblem::new();
    // Each offset is the tail of a second-order-cone vector whose head is
    // pinned to the trust-region radius.
    let delta: Vec<Vec<Option<SocVar>>> = (0..traj.q.len())
        .map(|_| (0..n_slots).map(|n| (n > 0 && n + 1 < n_slots).then(|| p.add_soc_var(3))).collect())
        .collect();
    let comp = |d: &Option<SocVar>, j: usize, sign: f64, e: &mut LinExpr| {
        if let Some(v) = d {
            e.add_soc_entry(*v, 1 + j, sign);
        }
    };

    let mut obj = LinExpr::new();
    for (k, row) in delta.iter().enumerate() {
        for (n, d) in row.iter().enumerate() {
            if let Some(v) = d {
                obj.add_soc_entry(*v, 1, coeffs[k][n].x);
                obj.add_soc_entry(*v, 2, coeffs[k][n].y);
                let mut head = LinExpr::new();
                head.add_soc_entry(*v, 0, 1.0);
                p.add_eq(head, omega);
            }
        }
        for n in 0..n_slots.saturating_sub(1) {
            if row[n].is_none() && row[n + 1].is_none() {
                continue;
            }
            let base = traj.q[k][n + 1] - traj.q[k][n];
            let parts: Vec<LinExpr> = (0..2)
                .map(|j| {
                    let mut e = LinExpr::constant(base[j]);
                    comp(&row[n + 1], j, 1.0, &mut e);
                    comp(&row[n], j, -1.0, &mut e);
                    e
                })
                .collect();
            p.add_soc(LinExpr::constant(scenario.max_step * (1.0 - FEAS_MARGIN)), parts);
        }
    }
    for k in 0..traj.q.len() {
        for i in k + 1..traj.q.len() {
            let gap = traj.altitudes[k] - traj.altitudes[i];
            if gap.abs() >= scenario.d_min {
                continue;
            }
            for n in 1..n_slots.saturating_sub(1) {
                let (c, rhs) = linearize_collision(&traj.q[k][n], &traj.q[i][n], scenario.d_min, gap);
                let mut e = LinExpr::new();
                for j in 0..2 {
                    comp(&delta[k][n], j, c[j], &mut e);
                    comp(&delta[i][n], j, -c[j], &mut e);
                }
                p.add_ge(e, rhs + FEAS_MARGIN * scenario.d_min * scenario.d_min);
            }
        }
    }
    p.maximize(obj);
    TrajSubproblem { problem: p, delta }
}

/// Outcome of the trajectory stage.
#[derive(Debug, Clone)]
pub struct TrajectoryOutcome {
    pub traj: TrajectoryPlan,
    /// True total sum rate after each accepted step (first entry: start).
    pub history: Vec<f64>,
    pub iterations: usize,
    pub final_radius: f64,
}

fn feasible(traj: &TrajectoryPlan, scenario: &Scenario) -> bool {
    let r = traj.flight_residuals(scenario);
    r.endpoint <= 1e-9 && r.speed <= 1e-9 * scenario.max_step && r.separation <= 1e-9 * scenario.d_min
}

/// Trust-region SCA over the interior waypoints for fixed covariances and
/// association.
pub fn optimize_trajectory(
    receiver: Receiver,
    scenario: &Scenario,
    traj: &TrajectoryPlan,
    assoc: &Association,
    beams: &BeamformingSolution,
) -> Result<TrajectoryOutcome, CoreError> {
    let params = &scenario.params;
    let mut cur = traj.clone();
    let mut f = trajectory_sum_rate(receiver, scenario, &cur, assoc, beams);
    let mut history = vec![f];
    let mut omega = params.omega0;
    let mut iterations = 0;
    if cur.n_slots() <= 2 {
        return Ok(TrajectoryOutcome { traj: cur, history, iterations, final_radius: omega });
    }
    separate_coincident(&mut cur, scenario);
    let mut coeffs = traj_taylor_coeffs(receiver, scenario, &cur, assoc, beams);
    while omega >= params.xi && iterations < params.max_traj_iters {
        iterations += 1;
        if coeffs.iter().flatten().all(|d| d.norm() == 0.0) {
            break;
        }
        let sub = assemble_traj_subproblem(scenario, &cur, &coeffs, omega);
        let sol = crate::solve_with_retry(&sub.problem, scenario)?;
        if sol.status != SolveStatus::Optimal {
            log::warn!("trajectory subproblem ended with {:?}; shrinking the trust region", sol.status);
            omega *= 0.5;
            continue;
        }
        let mut cand = cur.clone();
        for (k, row) in sub.delta.iter().enumerate() {
            for (n, d) in row.iter().enumerate() {
                if let Some(v) = d {
                    let x = sol.soc(*v);
                    cand.q[k][n] += Vector2::new(x[1], x[2]);
                }
            }
        }
        let fc = trajectory_sum_rate(receiver, scenario, &cand, assoc, beams);
        if fc > f && feasible(&cand, scenario) {
            cur = cand;
            f = fc;
            history.push(f);
            coeffs = traj_taylor_coeffs(receiver, scenario, &cur, assoc, beams);
        } else {
            omega *= 0.5;
        }
    }
    Ok(TrajectoryOutcome { traj: cur, history, iterations, final_radius: omega })
}

/// Moves interior waypoints that coincide with another UAV's waypoint by a
/// millimetre so the separation constraint has a usable linearisation.
fn separate_coincident(traj: &mut TrajectoryPlan, scenario: &Scenario) {
    let n_slots = traj.n_slots();
    for k in 0..traj.q.len() {
        for i in k + 1..traj.q.len() {
            if (traj.altitudes[k] - traj.altitudes[i]).abs() >= scenario.d_min {
                continue;
            }
            for n in 1..n_slots.saturating_sub(1) {
                if (traj.q[k][n] - traj.q[i][n]).norm() < 1e-9 {
                    let angle = 2.0 * PI * (k + n) as f64 / 7.0;
                    traj.q[k][n] += Vector2::new(angle.cos(), angle.sin()) * 1e-3;
                }
            }
        }
    }
}
