//! Alternating optimisation driver and the serialisable run report.

use std::time::Instant;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::beamforming::{max_min_illumination, optimize_beamforming, ReconstructionCheck, Transmission};
use crate::geometry::{outer, CMat, Orientation};
use crate::scenario::{to_dbw, Scenario};
use crate::signal::{
    rate_fast, sum_rate, Association, BeamformingSolution, FlightResiduals, Receiver, SensingGeometry, SlotBeams,
    SlotChannels, SumRate, TrajectoryPlan,
};
use crate::trajectory::optimize_trajectory;
use crate::CoreError;

/// Array orientation and receiver type of one evaluation case.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseSpec {
    pub orientation: Orientation,
    pub receiver: Receiver,
}

impl CaseSpec {
    /// Cases 1..=4: horizontal/Type-I, horizontal/Type-II, vertical/Type-I,
    /// vertical/Type-II.
    pub fn numbered(case: u8) -> Result<CaseSpec, CoreError> {
        let (orientation, receiver) = match case {
            1 => (Orientation::Horizontal, Receiver::TypeI),
            2 => (Orientation::Horizontal, Receiver::TypeII),
            3 => (Orientation::Vertical, Receiver::TypeI),
            4 => (Orientation::Vertical, Receiver::TypeII),
            other => return Err(CoreError::Config(format!("case must be 1..=4, got {other}"))),
        };
        Ok(CaseSpec { orientation, receiver })
    }

    pub fn of(scenario: &Scenario) -> CaseSpec {
        CaseSpec { orientation: scenario.array.orientation, receiver: scenario.receiver }
    }

    /// The scenario with this case's orientation and receiver.
    pub fn apply(&self, scenario: &Scenario) -> Scenario {
        let mut s = scenario.with_orientation(self.orientation);
        s.receiver = self.receiver;
        s
    }

    pub fn number(&self) -> u8 {
        match (self.orientation, self.receiver) {
            (Orientation::Horizontal, Receiver::TypeI) => 1,
            (Orientation::Horizontal, Receiver::TypeII) => 2,
            (Orientation::Vertical, Receiver::TypeI) => 3,
            (Orientation::Vertical, Receiver::TypeII) => 4,
        }
    }
}

/// Which parts of the design are optimised.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Benchmark {
    /// Full joint design.
    #[default]
    None,
    /// Trajectory fixed to constant-velocity straight flight.
    StraightFlight,
    /// Covariances restricted to scaled identities.
    Isotropic,
}

/// A complex matrix as separate real and imaginary parts, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexMatrix {
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl From<&CMat> for ComplexMatrix {
    fn from(m: &CMat) -> Self {
        let rows = |f: fn(&Complex64) -> f64| (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| f(&m[(i, j)])).collect()).collect();
        ComplexMatrix { re: rows(|c| c.re), im: rows(|c| c.im) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotBeamsReport {
    pub w: Vec<Vec<ComplexMatrix>>,
    pub r: Vec<ComplexMatrix>,
}

/// Worst relative constraint violations of the returned design.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct ConstraintResiduals {
    /// `max(0, P_l - P) / P` over GBSs and slots.
    pub power: f64,
    /// `max(0, Gamma - zeta) / Gamma` over samples and slots.
    pub illumination: f64,
    /// Most negative eigenvalue relative to the trace, over all covariances.
    pub psd: f64,
    pub flight: FlightResiduals,
}

/// Statistics of the rank-one reconstructions performed during the run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct SdrStats {
    pub subproblems: usize,
    /// Subproblems whose reconstruction left the relaxed objective unchanged
    /// to 1e-7 relative.
    pub exact: usize,
    pub worst: ReconstructionCheck,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Timings {
    pub init_s: f64,
    pub association_s: f64,
    pub beamforming_s: f64,
    pub trajectory_s: f64,
    pub total_s: f64,
}

/// Everything produced by one run.
#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub case: CaseSpec,
    pub case_number: u8,
    pub benchmark: Benchmark,
    pub gamma_w: f64,
    pub gamma_dbw: f64,
    /// Largest common illumination level the power budget allows.
    pub max_min_illumination_w: f64,
    /// Average sum rate (bit/s/Hz) at initialisation and after each round.
    pub objective_history: Vec<f64>,
    pub initial_objective: f64,
    pub objective: f64,
    pub rounds: usize,
    pub converged: bool,
    /// Per round: average sum rate after each SCA iteration of the
    /// beamforming stage.
    pub beamforming_histories: Vec<Vec<f64>>,
    /// Per round: average sum rate after each accepted trajectory step.
    pub trajectory_histories: Vec<Vec<f64>>,
    pub association: Association,
    pub trajectory: TrajectoryPlan,
    pub rates: SumRate,
    /// `illumination[q][n]` in watts.
    pub illumination: Vec<Vec<f64>>,
    pub residuals: ConstraintResiduals,
    /// Residuals of the design held after each round.
    pub round_residuals: Vec<ConstraintResiduals>,
    pub sdr: SdrStats,
    pub failed_solves: usize,
    /// Wall-clock times; left out of the serialized report so that it is
    /// reproducible byte for byte.
    #[serde(skip)]
    pub timings: Timings,
    pub beams: Vec<SlotBeamsReport>,
    #[serde(skip)]
    pub solution: BeamformingSolution,
}

/// `r[m][k][n]`: rate of UAV `k` if it decoded `W_{m,k}` in slot `n`.
pub fn rate_tensor(
    receiver: Receiver,
    scenario: &Scenario,
    traj: &TrajectoryPlan,
    beams: &BeamformingSolution,
) -> Vec<Vec<Vec<f64>>> {
    let chans: Vec<SlotChannels> = (0..scenario.n_slots).map(|n| SlotChannels::new(scenario, traj, n)).collect();
    (0..scenario.n_gbs())
        .map(|m| {
            (0..scenario.n_uavs())
                .map(|k| (0..scenario.n_slots).map(|n| rate_fast(receiver, &chans[n], &beams.slots[n], m, k)).collect())
                .collect()
        })
        .collect()
}

/// Serving GBS of each UAV in each slot: the one with the highest rate,
/// lowest index on ties.
pub fn optimize_association(rates: &[Vec<Vec<f64>>]) -> Association {
    let n_uavs = rates.first().map_or(0, |v| v.len());
    let n_slots = rates.first().and_then(|v| v.first()).map_or(0, |v| v.len());
    let gbs_of = (0..n_uavs)
        .map(|k| {
            (0..n_slots)
                .map(|n| {
                    let mut best = 0;
                    for m in 1..rates.len() {
                        if rates[m][k][n] > rates[best][k][n] {
                            best = m;
                        }
                    }
                    best
                })
                .collect()
        })
        .collect();
    Association { gbs_of }
}

/// A feasible starting point.
#[derive(Debug, Clone)]
pub struct Initialization {
    pub trajectory: TrajectoryPlan,
    pub association: Association,
    pub beams: BeamformingSolution,
    /// Sensing covariances meeting the threshold at the worst sample.
    pub sensing: Vec<CMat>,
    pub max_min_illumination: f64,
}

fn scaled(m: &CMat, s: f64) -> CMat {
    m * Complex64::new(s, 0.0)
}

/// Covariance with power `p` pointed along `h` (or spread isotropically).
fn directed(transmission: Transmission, h: &crate::geometry::CVec, p: f64) -> CMat {
    let n = h.len();
    let hn = h.norm_squared();
    if transmission == Transmission::Isotropic || hn == 0.0 {
        return CMat::identity(n, n) * Complex64::new(p / n as f64, 0.0);
    }
    scaled(&outer(h), p / hn)
}

/// Straight flight, the sensing covariances scaled from the max-min
/// illumination design to meet the threshold with equality at the worst
/// sample, and the remaining power split over the served UAVs along their
/// channels.
pub fn initialize(scenario: &Scenario, transmission: Transmission) -> Result<Initialization, CoreError> {
    let receiver = scenario.receiver;
    let geo = SensingGeometry::new(scenario);
    let (x, t_star) = max_min_illumination(transmission, scenario, &geo)?;
    if scenario.gamma > t_star * (1.0 + 1e-9) {
        return Err(CoreError::InfeasibleScenario(format!(
            "illumination threshold {:.3} dBW exceeds the reachable maximum {:.3} dBW",
            to_dbw(scenario.gamma),
            to_dbw(t_star)
        )));
    }
    let ratio = if scenario.gamma > 0.0 { (scenario.gamma / t_star).min(1.0) } else { 0.0 };
    let r: Vec<CMat> = x.iter().map(|m| scaled(m, ratio)).collect();
    let leftover: Vec<f64> = r.iter().map(|m| (scenario.p_max - m.trace().re).max(0.0)).collect();
    let traj = TrajectoryPlan::straight(scenario);
    let (n_gbs, n_uavs, na) = (scenario.n_gbs(), scenario.n_uavs(), scenario.array.n_antennas);

    let chans: Vec<SlotChannels> = (0..scenario.n_slots).map(|n| SlotChannels::new(scenario, &traj, n)).collect();
    let provisional = BeamformingSolution {
        slots: chans
            .iter()
            .map(|ch| {
                let mut b = SlotBeams::zeros(n_gbs, n_uavs, na);
                for l in 0..n_gbs {
                    for k in 0..n_uavs {
                        b.w[l][k] = directed(transmission, &ch.h[l][k], leftover[l] / n_uavs as f64);
                    }
                    b.r[l] = r[l].clone();
                }
                b
            })
            .collect(),
    };
    let assoc = optimize_association(&rate_tensor(receiver, scenario, &traj, &provisional));
    let beams = fresh_beams(scenario, transmission, &traj, &assoc, &r);
    Ok(Initialization { trajectory: traj, association: assoc, beams, sensing: r, max_min_illumination: t_star })
}

/// Covariances built from scratch for a given trajectory and association:
/// the sensing covariances `sensing`, and the remaining power of each GBS
/// split evenly over the UAVs it serves along their channels.
pub fn fresh_beams(
    scenario: &Scenario,
    transmission: Transmission,
    traj: &TrajectoryPlan,
    assoc: &Association,
    sensing: &[CMat],
) -> BeamformingSolution {
    let (n_gbs, n_uavs, na) = (scenario.n_gbs(), scenario.n_uavs(), scenario.array.n_antennas);
    let slots = (0..scenario.n_slots)
        .map(|n| {
            let ch = SlotChannels::new(scenario, traj, n);
            let mut b = SlotBeams::zeros(n_gbs, n_uavs, na);
            for l in 0..n_gbs {
                let leftover = (scenario.p_max - sensing[l].trace().re).max(0.0);
                let served: Vec<usize> = (0..n_uavs).filter(|&k| assoc.serving(k, n) == l).collect();
                for &k in &served {
                    b.w[l][k] = directed(transmission, &ch.h[l][k], leftover / served.len() as f64);
                }
                b.r[l] = sensing[l].clone();
            }
            b
        })
        .collect();
    BeamformingSolution { slots }
}

fn min_eig_ratio(m: &CMat) -> f64 {
    let tr = m.trace().re;
    if tr <= 0.0 {
        return 0.0;
    }
    let min = nalgebra::SymmetricEigen::new(m.clone()).eigenvalues.min();
    (-min / tr).max(0.0)
}

fn residuals(scenario: &Scenario, traj: &TrajectoryPlan, beams: &BeamformingSolution, illum: &[Vec<f64>]) -> ConstraintResiduals {
    let mut res = ConstraintResiduals { flight: traj.flight_residuals(scenario), ..Default::default() };
    for slot in &beams.slots {
        for l in 0..slot.n_gbs() {
            res.power = res.power.max((slot.power(l) - scenario.p_max) / scenario.p_max);
            for m in slot.w[l].iter().chain(std::iter::once(&slot.r[l])) {
                res.psd = res.psd.max(min_eig_ratio(m));
            }
        }
    }
    if scenario.gamma > 0.0 {
        for row in illum {
            for &z in row {
                res.illumination = res.illumination.max((scenario.gamma - z) / scenario.gamma);
            }
        }
    }
    res
}

fn transmission_of(benchmark: Benchmark) -> Transmission {
    match benchmark {
        Benchmark::Isotropic => Transmission::Isotropic,
        _ => Transmission::Beamformed,
    }
}

/// Runs the alternating optimisation for one case from the default
/// initialisation.
pub fn solve(scenario: &Scenario, case: CaseSpec, benchmark: Benchmark) -> Result<SolveReport, CoreError> {
    let t_start = Instant::now();
    let sc = case.apply(scenario);
    let init = initialize(&sc, transmission_of(benchmark))?;
    let start = Start {
        trajectory: init.trajectory,
        association: init.association,
        beams: init.beams,
        max_min_illumination: init.max_min_illumination,
    };
    run_ao(&sc, case, benchmark, start, t_start)
}

/// Runs the alternating optimisation for one case starting from the design
/// held in `warm`, typically the result of a related run: a stricter
/// threshold, the other receiver type, or a benchmark whose design is also
/// feasible here.
///
/// Fails with [`CoreError::Config`] when that design does not fit the
/// scenario or violates its constraints, and with
/// [`CoreError::InfeasibleScenario`] when no design can meet the threshold.
pub fn solve_from(
    scenario: &Scenario,
    case: CaseSpec,
    benchmark: Benchmark,
    warm: &SolveReport,
) -> Result<SolveReport, CoreError> {
    let t_start = Instant::now();
    let sc = case.apply(scenario);
    let scenario = &sc;
    let transmission = transmission_of(benchmark);
    let geo = SensingGeometry::new(scenario);
    let (_, t_star) = max_min_illumination(transmission, scenario, &geo)?;
    if scenario.gamma > t_star * (1.0 + 1e-9) {
        return Err(CoreError::InfeasibleScenario(format!(
            "illumination threshold {:.3} dBW exceeds the reachable maximum {:.3} dBW",
            to_dbw(scenario.gamma),
            to_dbw(t_star)
        )));
    }
    let traj = &warm.trajectory;
    let beams = &warm.solution;
    let dims_ok = traj.q.len() == scenario.n_uavs()
        && traj.n_slots() == scenario.n_slots
        && beams.slots.len() == scenario.n_slots
        && beams.slots.iter().all(|b| b.n_gbs() == scenario.n_gbs() && b.n_uavs() == scenario.n_uavs());
    if !dims_ok {
        return Err(CoreError::Config("warm start has different dimensions from the scenario".into()));
    }
    if transmission == Transmission::Isotropic && warm.benchmark != Benchmark::Isotropic {
        return Err(CoreError::Config("the isotropic benchmark needs an isotropic warm start".into()));
    }
    if benchmark == Benchmark::StraightFlight && *traj != TrajectoryPlan::straight(scenario) {
        return Err(CoreError::Config("the straight-flight benchmark needs a straight warm start".into()));
    }
    let illumination: Vec<Vec<f64>> =
        (0..scenario.sensing.len()).map(|q| beams.slots.iter().map(|b| geo.illumination(q, b)).collect()).collect();
    let res = residuals(scenario, traj, beams, &illumination);
    if res.illumination > 1e-6 || res.power > 1e-8 || res.flight.max() > 1e-6 {
        return Err(CoreError::Config("warm start violates the constraints of the scenario".into()));
    }
    let start = Start {
        trajectory: traj.clone(),
        association: warm.association.clone(),
        beams: beams.clone(),
        max_min_illumination: t_star,
    };
    run_ao(scenario, case, benchmark, start, t_start)
}

/// Solves from the default initialisation and from every usable design in
/// `warm`, keeping the run with the largest average sum rate (the earliest
/// one on ties). Warm starts that do not fit the scenario are skipped.
pub fn solve_best_of(
    scenario: &Scenario,
    case: CaseSpec,
    benchmark: Benchmark,
    warm: &[&SolveReport],
) -> Result<SolveReport, CoreError> {
    let mut best = solve(scenario, case, benchmark)?;
    for w in warm {
        match solve_from(scenario, case, benchmark, w) {
            Ok(r) if r.objective > best.objective => best = r,
            Ok(_) => {}
            Err(CoreError::Config(msg)) => log::debug!("warm start skipped: {msg}"),
            Err(e) => return Err(e),
        }
    }
    Ok(best)
}

/// Solves one case at every threshold in `gammas` (watts).
///
/// Thresholds are visited from the strictest down. Each point is also
/// started from the design kept at the previous feasible point, which meets
/// every looser threshold, and from the designs in `seeds[i]`, keeping the
/// best run. Results are returned in the order of `gammas`.
pub fn sweep_gamma(
    scenario: &Scenario,
    case: CaseSpec,
    benchmark: Benchmark,
    gammas: &[f64],
    seeds: &[Vec<&SolveReport>],
) -> Vec<Result<SolveReport, CoreError>> {
    let mut order: Vec<usize> = (0..gammas.len()).collect();
    order.sort_by(|&a, &b| gammas[b].total_cmp(&gammas[a]));
    let mut out: Vec<Option<Result<SolveReport, CoreError>>> = (0..gammas.len()).map(|_| None).collect();
    let mut previous: Option<usize> = None;
    for i in order {
        let sc = scenario.with_gamma(gammas[i]);
        let mut warm: Vec<&SolveReport> = seeds.get(i).cloned().unwrap_or_default();
        if let Some(Some(Ok(r))) = previous.map(|j| &out[j]) {
            warm.push(r);
        }
        let res = solve_best_of(&sc, case, benchmark, &warm);
        if res.is_ok() {
            previous = Some(i);
        }
        out[i] = Some(res);
    }
    out.into_iter().map(|r| r.expect("every point visited")).collect()
}

struct Start {
    trajectory: TrajectoryPlan,
    association: Association,
    beams: BeamformingSolution,
    max_min_illumination: f64,
}

fn run_ao(
    scenario: &Scenario,
    case: CaseSpec,
    benchmark: Benchmark,
    init: Start,
    t_start: Instant,
) -> Result<SolveReport, CoreError> {
    let receiver = case.receiver;
    let transmission = transmission_of(benchmark);
    let n_slots = scenario.n_slots as f64;
    let params = &scenario.params;
    let mut timings = Timings::default();
    timings.init_s = t_start.elapsed().as_secs_f64();
    let mut traj = init.trajectory;
    let mut assoc = init.association;
    let mut beams = init.beams;
    let f0 = sum_rate(receiver, &assoc, &beams, &traj, scenario).average();
    let mut history = vec![f0];
    let mut bf_hist = Vec::new();
    let mut traj_hist = Vec::new();
    let mut sdr = SdrStats::default();
    let mut failed = 0;
    let mut converged = false;
    let mut rounds = 0;
    let geo = SensingGeometry::new(scenario);
    let illumination_of = |beams: &BeamformingSolution| -> Vec<Vec<f64>> {
        (0..scenario.sensing.len()).map(|q| beams.slots.iter().map(|b| geo.illumination(q, b)).collect()).collect()
    };
    let mut round_residuals = Vec::new();

    while rounds < params.max_rounds {
        rounds += 1;
        let t = Instant::now();
        assoc = optimize_association(&rate_tensor(receiver, scenario, &traj, &beams));
        timings.association_s += t.elapsed().as_secs_f64();

        let t = Instant::now();
        let bf = optimize_beamforming(transmission, receiver, scenario, &traj, &assoc, &beams)?;
        timings.beamforming_s += t.elapsed().as_secs_f64();
        for c in &bf.checks {
            sdr.subproblems += 1;
            if c.objective <= 1e-7 {
                sdr.exact += 1;
            }
            sdr.worst = sdr.worst.worst(*c);
        }
        failed += bf.failed_solves;
        bf_hist.push(bf.history.iter().map(|v| v / n_slots).collect());
        beams = bf.beams;

        if benchmark != Benchmark::StraightFlight {
            let t = Instant::now();
            let tr = optimize_trajectory(receiver, scenario, &traj, &assoc, &beams)?;
            timings.trajectory_s += t.elapsed().as_secs_f64();
            traj_hist.push(tr.history.iter().map(|v| v / n_slots).collect());
            traj = tr.traj;
        }

        round_residuals.push(residuals(scenario, &traj, &beams, &illumination_of(&beams)));
        let f = sum_rate(receiver, &assoc, &beams, &traj, scenario).average();
        let prev = *history.last().unwrap_or(&f);
        history.push(f);
        log::info!("round {rounds}: average sum rate {f:.6} bit/s/Hz");
        if f - prev < params.ao_tol * (1.0 + f.abs()) {
            converged = true;
            break;
        }
    }

    let rates = sum_rate(receiver, &assoc, &beams, &traj, scenario);
    let illumination = illumination_of(&beams);
    let residuals = residuals(scenario, &traj, &beams, &illumination);
    timings.total_s = t_start.elapsed().as_secs_f64();
    Ok(SolveReport {
        case,
        case_number: case.number(),
        benchmark,
        gamma_w: scenario.gamma,
        gamma_dbw: to_dbw(scenario.gamma),
        max_min_illumination_w: init.max_min_illumination,
        initial_objective: f0,
        objective: rates.average(),
        objective_history: history,
        rounds,
        converged,
        beamforming_histories: bf_hist,
        trajectory_histories: traj_hist,
        association: assoc,
        trajectory: traj,
        rates,
        illumination,
        residuals,
        round_residuals,
        sdr,
        failed_solves: failed,
        timings,
        beams: beams
            .slots
            .iter()
            .map(|b| SlotBeamsReport {
                w: b.w.iter().map(|row| row.iter().map(ComplexMatrix::from).collect()).collect(),
                r: b.r.iter().map(ComplexMatrix::from).collect(),
            })
            .collect(),
        solution: beams,
    })
}

/// Runs a benchmark design for the case implied by the scenario.
pub fn run_benchmark(scenario: &Scenario, benchmark: Benchmark) -> Result<SolveReport, CoreError> {
    solve(scenario, CaseSpec::of(scenario), benchmark)
}
