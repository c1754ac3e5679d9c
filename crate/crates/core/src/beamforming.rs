//! Beamforming stage: rate lower bounds, the semidefinite relaxation of each
//! slot, rank-one reconstruction and the successive convex approximation
//! loop.
//!
//! The concave `log2(S)` term of each rate is represented inside the conic
//! program by a set of tangent cuts `t <= ln x_j - 1 + S / x_j`, one of them
//! at the current local point. The resulting model is exact to first order
//! at the local point, and every candidate step is screened with the true
//! slot sum rate before it is accepted.

use std::f64::consts::LOG2_E;

use isac_conic::{
    embed_hermitian, extract_hermitian, ConicProblem, ConicSolution, LinExpr, PsdVar, ScalarDomain,
    ScalarVar, SolveStatus,
};
use nalgebra::SymmetricEigen;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::geometry::{outer, CMat};
use crate::scenario::Scenario;
use crate::signal::{Association, BeamformingSolution, Receiver, SensingGeometry, SlotBeams, SlotChannels};
use crate::CoreError;

/// How the covariances are parameterised.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Transmission {
    /// Arbitrary Hermitian PSD covariances.
    Beamformed,
    /// Scaled identities `p / N_a * I`.
    Isotropic,
}

/// First-order data of one UAV's rate at the local point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UavLinearization {
    pub serving: usize,
    /// `a = log2(I0 + 1)` with `I0` the interference at the local point.
    pub offset: f64,
    /// `log2(e) / (I0 + 1)`; the slope matrix for GBS `l` is this times `H_{l,k}`.
    pub slope: f64,
    pub interference0: f64,
    /// Total received power plus noise at the local point.
    pub s0: f64,
}

/// Rate linearisation of one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct RateLinearization {
    pub receiver: Receiver,
    pub uavs: Vec<UavLinearization>,
}

impl RateLinearization {
    /// Slope matrix `B_{l}` of UAV `k`.
    pub fn slope_matrix(&self, ch: &SlotChannels, l: usize, k: usize) -> CMat {
        outer(&ch.h[l][k]) * Complex64::new(self.uavs[k].slope, 0.0)
    }
}

/// Received power at UAV `k` split into the decoded signal, the interference
/// and the total (all without noise).
fn received(receiver: Receiver, ch: &SlotChannels, beams: &SlotBeams, m: usize, k: usize) -> (f64, f64) {
    let mut signal = 0.0;
    let mut interf = 0.0;
    for l in 0..beams.n_gbs() {
        for (i, w) in beams.w[l].iter().enumerate() {
            let g = ch.gain(l, k, w);
            if (l, i) == (m, k) {
                signal += g;
            } else {
                interf += g;
            }
        }
        if receiver == Receiver::TypeI {
            interf += ch.gain(l, k, &beams.r[l]);
        }
    }
    (signal, interf)
}

/// Coefficients of the rate lower bound at `local` (noise normalised to 1).
pub fn rate_lower_bound_coeffs(
    receiver: Receiver,
    ch: &SlotChannels,
    local: &SlotBeams,
    serving: &[usize],
) -> RateLinearization {
    let uavs = serving
        .iter()
        .enumerate()
        .map(|(k, &m)| {
            let (s, i) = received(receiver, ch, local, m, k);
            let i = i.max(0.0);
            UavLinearization {
                serving: m,
                offset: (i + 1.0).log2(),
                slope: LOG2_E / (i + 1.0),
                interference0: i,
                s0: s.max(0.0) + i + 1.0,
            }
        })
        .collect();
    RateLinearization { receiver, uavs }
}

/// The lower bound `r_bar_k` of every UAV's rate at `beams`.
pub fn lower_bound_rates(lin: &RateLinearization, ch: &SlotChannels, beams: &SlotBeams) -> Vec<f64> {
    lin.uavs
        .iter()
        .enumerate()
        .map(|(k, u)| {
            let (s, i) = received(lin.receiver, ch, beams, u.serving, k);
            (s + i + 1.0).log2() - u.offset - u.slope * (i - u.interference0)
        })
        .collect()
}

/// Cut points for the logarithm around `s0` (all >= 1 since `S >= 1`).
fn cut_points(s0: f64) -> Vec<f64> {
    let rho = std::f64::consts::SQRT_2;
    let mut pts: Vec<f64> = (-4..=8).map(|j| s0 * rho.powi(j)).filter(|&x| x >= 1.0).collect();
    if pts.first().is_none_or(|&x| x > 1.0) {
        pts.insert(0, 1.0);
    }
    pts
}

/// Default tangent points of every UAV's logarithm cuts, spread
/// geometrically around the received power at the local point.
pub fn initial_cuts(lin: &RateLinearization) -> Vec<Vec<f64>> {
    lin.uavs.iter().map(|u| cut_points(u.s0)).collect()
}

/// Value of the cut model (in bits) for every UAV.
fn model_rates(lin: &RateLinearization, cuts: &[Vec<f64>], ch: &SlotChannels, beams: &SlotBeams) -> Vec<f64> {
    lin.uavs
        .iter()
        .enumerate()
        .map(|(k, u)| {
            let (s, i) = received(lin.receiver, ch, beams, u.serving, k);
            let s = s + i + 1.0;
            let t = cuts[k].iter().map(|&x| x.ln() - 1.0 + s / x).fold(f64::INFINITY, f64::min);
            LOG2_E * t - u.offset - u.slope * (i - u.interference0)
        })
        .collect()
}

#[derive(Debug, Clone, Copy)]
enum CovVar {
    Psd(PsdVar),
    Iso(ScalarVar),
}

fn add_trace_term(e: &mut LinExpr, v: CovVar, m: &CMat, factor: f64) {
    match v {
        CovVar::Psd(p) => {
            let emb = embed_hermitian(&((m + m.adjoint()) * Complex64::new(0.5, 0.0))).expect("Hermitian by construction");
            e.add_psd(p, &(emb * (0.5 * factor)));
        }
        CovVar::Iso(s) => {
            e.add_scalar(s, factor * m.trace().re / m.nrows() as f64);
        }
    }
}

fn add_power_term(e: &mut LinExpr, v: CovVar, n: usize, factor: f64) {
    match v {
        CovVar::Psd(p) => {
            e.add_psd(p, &(nalgebra::DMatrix::identity(2 * n, 2 * n) * (0.5 * factor)));
        }
        CovVar::Iso(s) => {
            e.add_scalar(s, factor);
        }
    }
}

fn cov_value(sol: &ConicSolution, v: CovVar, n: usize) -> CMat {
    match v {
        CovVar::Psd(p) => extract_hermitian(sol.psd(p)),
        CovVar::Iso(s) => CMat::identity(n, n) * Complex64::new(sol.scalar(s).max(0.0) / n as f64, 0.0),
    }
}

/// An assembled slot subproblem together with its variable handles.
#[derive(Debug, Clone)]
pub struct BeamformingSdr {
    pub problem: ConicProblem,
    w: Vec<Vec<CovVar>>,
    r: Vec<CovVar>,
    /// Tangent points of each UAV's logarithm cuts.
    pub cuts: Vec<Vec<f64>>,
    n_antennas: usize,
}

impl BeamformingSdr {
    /// Number of covariance blocks (`M K + M`).
    pub fn n_blocks(&self) -> usize {
        self.w.iter().map(|v| v.len()).sum::<usize>() + self.r.len()
    }

    pub fn extract(&self, sol: &ConicSolution) -> SlotBeams {
        let n = self.n_antennas;
        SlotBeams {
            w: self.w.iter().map(|row| row.iter().map(|&v| cov_value(sol, v, n)).collect()).collect(),
            r: self.r.iter().map(|&v| cov_value(sol, v, n)).collect(),
            rank1: vec![vec![false; self.w.first().map_or(0, |v| v.len())]; self.r.len()],
        }
    }
}

/// Builds the relaxed slot problem: maximise the sum of the cut models of
/// all UAV rates subject to the per-GBS power budget and the illumination
/// threshold at every sensing sample.
pub fn assemble_beamforming_sdr(
    transmission: Transmission,
    lin: &RateLinearization,
    cuts: &[Vec<f64>],
    ch: &SlotChannels,
    geo: &SensingGeometry,
    scenario: &Scenario,
) -> Result<BeamformingSdr, CoreError> {
    let n_gbs = scenario.n_gbs();
    let n_uavs = lin.uavs.len();
    let na = scenario.array.n_antennas;
    if ch.h.len() != n_gbs || ch.h.iter().any(|v| v.len() != n_uavs) || geo.a.len() != scenario.sensing.len() {
        return Err(CoreError::Dimension("channels, linearisation and scenario disagree".into()));
    }
    let mut p = ConicProblem::new();
    let new_var = |p: &mut ConicProblem| match transmission {
        Transmission::Beamformed => CovVar::Psd(p.add_psd(2 * na)),
        Transmission::Isotropic => CovVar::Iso(p.add_scalar(ScalarDomain::NonNeg)),
    };
    let w: Vec<Vec<CovVar>> = (0..n_gbs).map(|_| (0..n_uavs).map(|_| new_var(&mut p)).collect()).collect();
    let r: Vec<CovVar> = (0..n_gbs).map(|_| new_var(&mut p)).collect();
    let t: Vec<ScalarVar> = (0..n_uavs).map(|_| p.add_scalar(ScalarDomain::NonNeg)).collect();

    for l in 0..n_gbs {
        let mut e = LinExpr::new();
        for &v in w[l].iter().chain(std::iter::once(&r[l])) {
            add_power_term(&mut e, v, na, 1.0);
        }
        p.add_le(e, scenario.p_max);
    }
    if scenario.gamma > 0.0 {
        for q in 0..scenario.sensing.len() {
            let mut e = LinExpr::new();
            for l in 0..n_gbs {
                let g = geo.weight(q, l) * Complex64::new(1.0 / scenario.gamma, 0.0);
                for &v in w[l].iter().chain(std::iter::once(&r[l])) {
                    add_trace_term(&mut e, v, &g, 1.0);
                }
            }
            p.add_ge(e, 1.0);
        }
    }

    let with_r = lin.receiver == Receiver::TypeI;
    let mut obj = LinExpr::new();
    for (k, u) in lin.uavs.iter().enumerate() {
        // received power without noise, tied to an auxiliary scalar so that
        // the cuts only involve two scalars
        let recv = p.add_scalar(ScalarDomain::NonNeg);
        let mut s = LinExpr::scalar(recv, -1.0);
        for l in 0..n_gbs {
            let h = outer(&ch.h[l][k]);
            for &v in &w[l] {
                add_trace_term(&mut s, v, &h, 1.0);
            }
            if with_r {
                add_trace_term(&mut s, r[l], &h, 1.0);
            }
        }
        p.add_eq(s, 0.0);
        for &x in &cuts[k] {
            let mut e = LinExpr::scalar(t[k], 1.0);
            e.add_scalar(recv, -1.0 / x);
            p.add_le(e, x.ln() - 1.0 + 1.0 / x);
        }

        obj.add_scalar(t[k], LOG2_E);
        for l in 0..n_gbs {
            let h = outer(&ch.h[l][k]);
            for (i, &v) in w[l].iter().enumerate() {
                if (l, i) != (u.serving, k) {
                    add_trace_term(&mut obj, v, &h, -u.slope);
                }
            }
            if with_r {
                add_trace_term(&mut obj, r[l], &h, -u.slope);
            }
        }
        obj.add_constant(-u.offset + u.slope * u.interference0);
    }
    p.maximize(obj);
    Ok(BeamformingSdr { problem: p, w, r, cuts: cuts.to_vec(), n_antennas: na })
}

/// Rank-one reconstruction: `w_bar = (h^H W* h)^{-1/2} W* h` with `h` the
/// channel from GBS `l` to UAV `i`, and the remainder of each GBS's total
/// covariance moved into its sensing covariance.
pub fn rank_one_reconstruct(w_star: &[Vec<CMat>], r_star: &[CMat], ch: &SlotChannels) -> SlotBeams {
    let mut out_w = Vec::with_capacity(w_star.len());
    let mut out_r = Vec::with_capacity(w_star.len());
    let mut flags = Vec::with_capacity(w_star.len());
    for (l, row) in w_star.iter().enumerate() {
        let mut total = r_star[l].clone();
        let mut new_row = Vec::with_capacity(row.len());
        let mut row_flags = Vec::with_capacity(row.len());
        for (i, w) in row.iter().enumerate() {
            total += w;
            let h = &ch.h[l][i];
            let wh = w * h;
            let c = h.dotc(&wh).re;
            let eps = 1e-12 * w.trace().re.max(1.0);
            if c <= eps {
                new_row.push(CMat::zeros(w.nrows(), w.ncols()));
            } else {
                let v = wh / Complex64::new(c.sqrt(), 0.0);
                new_row.push(outer(&v));
            }
            row_flags.push(true);
        }
        let mut r = total;
        for w in &new_row {
            r -= w;
        }
        out_r.push((&r + r.adjoint()) * Complex64::new(0.5, 0.0));
        out_w.push(new_row);
        flags.push(row_flags);
    }
    SlotBeams { w: out_w, r: out_r, rank1: flags }
}

/// Relative changes caused by one reconstruction.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct ReconstructionCheck {
    pub objective: f64,
    pub power: f64,
    pub illumination: f64,
    pub eigen_ratio: f64,
}

impl ReconstructionCheck {
    pub fn worst(self, other: ReconstructionCheck) -> ReconstructionCheck {
        ReconstructionCheck {
            objective: self.objective.max(other.objective),
            power: self.power.max(other.power),
            illumination: self.illumination.max(other.illumination),
            eigen_ratio: self.eigen_ratio.max(other.eigen_ratio),
        }
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

fn eigen_ratio(w: &CMat) -> f64 {
    let mut ev: Vec<f64> = SymmetricEigen::new(w.clone()).eigenvalues.iter().cloned().collect();
    ev.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    if ev.is_empty() || ev[0] <= 0.0 {
        0.0
    } else {
        ev.get(1).copied().unwrap_or(0.0).max(0.0) / ev[0]
    }
}

fn check_reconstruction(
    lin: &RateLinearization,
    cuts: &[Vec<f64>],
    ch: &SlotChannels,
    geo: &SensingGeometry,
    star: &SlotBeams,
    bar: &SlotBeams,
) -> ReconstructionCheck {
    let obj_star: f64 = model_rates(lin, cuts, ch, star).iter().sum();
    let obj_bar: f64 = model_rates(lin, cuts, ch, bar).iter().sum();
    let mut c = ReconstructionCheck { objective: rel(obj_star, obj_bar), ..Default::default() };
    for l in 0..star.n_gbs() {
        c.power = c.power.max(rel(star.power(l), bar.power(l)));
    }
    for q in 0..geo.a.len() {
        c.illumination = c.illumination.max(rel(geo.illumination(q, star), geo.illumination(q, bar)));
    }
    for row in &bar.w {
        for w in row {
            c.eigen_ratio = c.eigen_ratio.max(eigen_ratio(w));
        }
    }
    c
}

/// Clips each GBS's covariances so that its power never exceeds the budget.
fn enforce_power(beams: &mut SlotBeams, p_max: f64) {
    for l in 0..beams.n_gbs() {
        let p = beams.power(l);
        if p > p_max {
            let s = Complex64::new(p_max / p, 0.0);
            for w in &mut beams.w[l] {
                *w *= s;
            }
            beams.r[l] *= s;
        }
    }
}

fn slot_objective(receiver: Receiver, ch: &SlotChannels, beams: &SlotBeams, serving: &[usize]) -> f64 {
    serving
        .iter()
        .enumerate()
        .map(|(k, &m)| crate::signal::rate_fast(receiver, ch, beams, m, k))
        .sum()
}

/// Outcome of the SCA loop on one slot.
#[derive(Debug, Clone)]
pub struct SlotOutcome {
    pub beams: SlotBeams,
    /// True slot sum rate after each accepted iteration (first entry: start).
    pub history: Vec<f64>,
    pub checks: Vec<ReconstructionCheck>,
    /// Subproblem solves that failed after the looser retry.
    pub failed_solves: usize,
}

/// Solves the slot subproblem, adding a tangent cut at every UAV's achieved
/// received power until the cut model of the logarithm is exact there.
fn solve_refined(
    transmission: Transmission,
    lin: &RateLinearization,
    ch: &SlotChannels,
    geo: &SensingGeometry,
    scenario: &Scenario,
) -> Result<(BeamformingSdr, ConicSolution), CoreError> {
    let mut cuts = initial_cuts(lin);
    let mut rounds = 0;
    loop {
        let sdr = assemble_beamforming_sdr(transmission, lin, &cuts, ch, geo, scenario)?;
        let sol = crate::solve_with_retry(&sdr.problem, scenario)?;
        if sol.status != SolveStatus::Optimal || rounds == MAX_CUT_ROUNDS {
            return Ok((sdr, sol));
        }
        rounds += 1;
        let star = sdr.extract(&sol);
        let mut added = false;
        for (k, u) in lin.uavs.iter().enumerate() {
            let (sig, i) = received(lin.receiver, ch, &star, u.serving, k);
            let s = sig + i + 1.0;
            let model = cuts[k].iter().map(|&x| x.ln() - 1.0 + s / x).fold(f64::INFINITY, f64::min);
            let fresh = cuts[k].iter().all(|&x| (x - s).abs() > 1e-6 * s);
            if model - s.ln() > CUT_GAP && fresh {
                cuts[k].push(s);
                added = true;
            }
        }
        if !added {
            return Ok((sdr, sol));
        }
    }
}

const MAX_CUT_ROUNDS: usize = 8;
const CUT_GAP: f64 = 1e-6;

/// Runs the SCA loop on slot `n` starting from `init`.
#[allow(clippy::too_many_arguments)]
pub fn optimize_slot(
    transmission: Transmission,
    receiver: Receiver,
    scenario: &Scenario,
    ch: &SlotChannels,
    geo: &SensingGeometry,
    serving: &[usize],
    init: &SlotBeams,
    eps_bf: f64,
    max_sca_iters: usize,
) -> Result<SlotOutcome, CoreError> {
    let mut local = init.clone();
    let mut f = slot_objective(receiver, ch, &local, serving);
    let mut history = vec![f];
    let mut checks = Vec::new();
    let mut failed_solves = 0;
    for it in 0..max_sca_iters {
        let lin = rate_lower_bound_coeffs(receiver, ch, &local, serving);
        let (sdr, sol) = solve_refined(transmission, &lin, ch, geo, scenario)?;
        match sol.status {
            SolveStatus::Optimal => {}
            SolveStatus::Infeasible if it == 0 => {
                return Err(CoreError::InfeasibleScenario(
                    "beamforming subproblem has no feasible point".into(),
                ));
            }
            status => {
                log::warn!(
                    "beamforming subproblem ended with {status:?} after {} iterations (residuals {:?}); keeping the previous point",
                    sol.iterations,
                    sol.residuals
                );
                failed_solves += 1;
                break;
            }
        }
        let star = sdr.extract(&sol);
        let candidate = match transmission {
            Transmission::Beamformed => {
                let bar = rank_one_reconstruct(&star.w, &star.r, ch);
                let check = check_reconstruction(&lin, &sdr.cuts, ch, geo, &star, &bar);
                if check.objective > 1e-7 {
                    log::warn!("rank-one reconstruction changed the subproblem objective by {:.3e}", check.objective);
                }
                checks.push(check);
                bar
            }
            Transmission::Isotropic => star,
        };

        // Screen with the true objective, shortening the step toward the
        // local point until it does not decrease.
        let mut accepted = None;
        let mut step = 1.0;
        for _ in 0..8 {
            let mut trial = local.lerp(&candidate, step);
            if transmission == Transmission::Beamformed {
                trial = rank_one_reconstruct(&trial.w, &trial.r, ch);
            }
            enforce_power(&mut trial, scenario.p_max);
            let ft = slot_objective(receiver, ch, &trial, serving);
            if ft >= f {
                accepted = Some((trial, ft));
                break;
            }
            step *= 0.5;
        }
        let Some((next, fn_)) = accepted else {
            break;
        };
        let gain = fn_ - f;
        local = next;
        f = fn_;
        history.push(f);
        if gain < eps_bf {
            break;
        }
    }
    Ok(SlotOutcome { beams: local, history, checks, failed_solves })
}

/// Result of the beamforming stage over all slots.
#[derive(Debug, Clone)]
pub struct BeamformingOutcome {
    pub beams: BeamformingSolution,
    /// Total (summed over slots) true rate after each SCA iteration.
    pub history: Vec<f64>,
    pub slot_histories: Vec<Vec<f64>>,
    pub checks: Vec<ReconstructionCheck>,
    pub failed_solves: usize,
}

/// Optimises the covariances of every slot for fixed trajectory and
/// association. Slots are independent and solved in parallel; results do not
/// depend on scheduling.
pub fn optimize_beamforming(
    transmission: Transmission,
    receiver: Receiver,
    scenario: &Scenario,
    traj: &crate::signal::TrajectoryPlan,
    assoc: &Association,
    init: &BeamformingSolution,
) -> Result<BeamformingOutcome, CoreError> {
    let geo = SensingGeometry::new(scenario);
    let p = &scenario.params;
    let outcomes: Vec<SlotOutcome> = (0..scenario.n_slots)
        .into_par_iter()
        .map(|n| {
            let ch = SlotChannels::new(scenario, traj, n);
            let serving: Vec<usize> = (0..scenario.n_uavs()).map(|k| assoc.serving(k, n)).collect();
            optimize_slot(transmission, receiver, scenario, &ch, &geo, &serving, &init.slots[n], p.eps_bf, p.max_sca_iters)
        })
        .collect::<Result<_, _>>()?;
    let len = outcomes.iter().map(|o| o.history.len()).max().unwrap_or(0);
    let history = (0..len)
        .map(|i| outcomes.iter().map(|o| o.history[i.min(o.history.len() - 1)]).sum())
        .collect();
    Ok(BeamformingOutcome {
        slot_histories: outcomes.iter().map(|o| o.history.clone()).collect(),
        checks: outcomes.iter().flat_map(|o| o.checks.iter().copied()).collect(),
        failed_solves: outcomes.iter().map(|o| o.failed_solves).sum(),
        beams: BeamformingSolution { slots: outcomes.into_iter().map(|o| o.beams).collect() },
        history,
    })
}

/// Largest common illumination level reachable at every sensing sample under
/// the power budget, with the per-GBS covariances attaining it.
pub fn max_min_illumination(
    transmission: Transmission,
    scenario: &Scenario,
    geo: &SensingGeometry,
) -> Result<(Vec<CMat>, f64), CoreError> {
    let na = scenario.array.n_antennas;
    let n_gbs = scenario.n_gbs();
    if transmission == Transmission::Isotropic {
        let x = vec![CMat::identity(na, na) * Complex64::new(scenario.p_max / na as f64, 0.0); n_gbs];
        let t = min_illumination(geo, &x);
        return Ok((x, t));
    }
    let mut p = ConicProblem::new();
    let xs: Vec<PsdVar> = (0..n_gbs).map(|_| p.add_psd(2 * na)).collect();
    let t = p.add_scalar(ScalarDomain::NonNeg);
    for &x in &xs {
        let mut e = LinExpr::new();
        e.add_psd(x, &(nalgebra::DMatrix::identity(2 * na, 2 * na) * 0.5));
        p.add_le(e, scenario.p_max);
    }
    // Work in units of the isotropic level so the scalar is of order one.
    let iso: Vec<CMat> = vec![CMat::identity(na, na) * Complex64::new(scenario.p_max / na as f64, 0.0); n_gbs];
    let scale = min_illumination(geo, &iso).max(1e-300);
    for q in 0..geo.a.len() {
        let mut e = LinExpr::scalar(t, -1.0);
        for (l, &x) in xs.iter().enumerate() {
            let g = geo.weight(q, l) * Complex64::new(1.0 / scale, 0.0);
            add_trace_term(&mut e, CovVar::Psd(x), &g, 1.0);
        }
        p.add_ge(e, 0.0);
    }
    p.maximize(LinExpr::scalar(t, 1.0));
    let sol = crate::solve_with_retry(&p, scenario)?;
    if sol.status != SolveStatus::Optimal {
        return Err(CoreError::InfeasibleScenario(format!(
            "max-min illumination problem ended with {:?}",
            sol.status
        )));
    }
    let mut x: Vec<CMat> = xs.iter().map(|&v| extract_hermitian(sol.psd(v))).collect();
    for m in &mut x {
        let tr = m.trace().re;
        if tr > scenario.p_max {
            *m *= Complex64::new(scenario.p_max / tr, 0.0);
        }
    }
    let t = min_illumination(geo, &x);
    Ok((x, t))
}

/// `min_q sum_l a^H X_l a / d^2`.
pub fn min_illumination(geo: &SensingGeometry, x: &[CMat]) -> f64 {
    (0..geo.a.len())
        .map(|q| {
            x.iter()
                .enumerate()
                .map(|(l, m)| crate::geometry::quad_form(&geo.a[q][l], m) * geo.inv_d2[q][l])
                .sum::<f64>()
        })
        .fold(f64::INFINITY, f64::min)
}
