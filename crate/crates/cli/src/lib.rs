//! Batch runner behind the `isac-plan` binary: scenario loading with
//! command-line overrides, single runs, threshold sweeps and artifact export.
//!
//! A sweep visits thresholds from the strictest down and also starts each
//! point from the design kept at the previous one, so a looser threshold
//! never ends with a lower rate than a stricter one.

pub mod args;
pub mod export;
pub mod plots;

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use isac_core::ao::{solve, sweep_gamma, Benchmark, CaseSpec, SolveReport};
use isac_core::scenario::{load_scenario, Level, Scenario, ScenarioConfig};
use isac_core::CoreError;

use crate::args::Args;
use crate::export::SweepPoint;

/// Process exit code for an error chain: 2 when the scenario is infeasible,
/// 1 otherwise.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    let infeasible = err
        .chain()
        .any(|e| matches!(e.downcast_ref::<CoreError>(), Some(CoreError::InfeasibleScenario(_))));
    if infeasible {
        2
    } else {
        1
    }
}

/// The scenario named by `--scenario` (or the bundled default) with the
/// tolerance and seed overrides applied.
pub fn effective_config(args: &Args) -> Result<ScenarioConfig> {
    let mut cfg = match &args.scenario {
        Some(p) => load_scenario(p).with_context(|| format!("loading {}", p.display()))?,
        None => ScenarioConfig::reference_default(),
    };
    if let Some(v) = args.max_ao_rounds {
        cfg.solver.max_rounds = v;
    }
    if let Some(v) = args.ao_tol {
        cfg.solver.ao_tol = v;
    }
    if let Some(v) = args.solver_tol {
        cfg.solver.solver_tol = v;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    cfg.build()?;
    Ok(cfg)
}

/// Plot settings shared by every run of an invocation.
#[derive(Debug, Clone)]
pub struct PlotOptions {
    pub enabled: bool,
    pub slots: Vec<usize>,
    pub altitude: Option<f64>,
    pub cells: usize,
}

impl PlotOptions {
    pub fn from_args(args: &Args) -> Self {
        PlotOptions {
            enabled: args.emit_plots,
            slots: args.heatmap_slots.clone(),
            altitude: args.heatmap_altitude,
            cells: args.heatmap_cells,
        }
    }

    /// Distinct, in-range heatmap slots in ascending order.
    pub fn heatmap_slots(&self, n_slots: usize) -> Vec<usize> {
        let mut s: Vec<usize> = if self.slots.is_empty() {
            vec![0, n_slots / 2, n_slots.saturating_sub(1)]
        } else {
            self.slots.iter().copied().filter(|&n| n < n_slots).collect()
        };
        s.sort_unstable();
        s.dedup();
        s
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    std::io::Write::write_all(&mut w, b"\n")?;
    Ok(())
}

/// Writes the JSON, CSV and (optionally) SVG artifacts of one run into `dir`.
/// `scenario` must be the case-adjusted scenario the report was solved on.
pub fn write_artifacts(dir: &Path, cfg: &ScenarioConfig, scenario: &Scenario, report: &SolveReport, plots: &PlotOptions) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    write_json(&dir.join("scenario.json"), cfg)?;
    write_json(&dir.join("report.json"), report)?;
    write_json(&dir.join("timings.json"), &report.timings)?;
    export::write_rates(create(&dir.join("rates.csv"))?, report)?;
    export::write_trajectory(create(&dir.join("trajectory.csv"))?, report)?;
    export::write_illumination(create(&dir.join("illumination.csv"))?, scenario, report)?;
    export::write_association(create(&dir.join("association.csv"))?, report)?;
    if plots.enabled {
        if let Err(e) = write_run_plots(dir, scenario, report, plots) {
            log::warn!("plots for {} were not written: {e:#}", dir.display());
        }
    }
    Ok(())
}

fn write_run_plots(dir: &Path, scenario: &Scenario, report: &SolveReport, plots: &PlotOptions) -> Result<()> {
    let plot_dir = dir.join("plots");
    fs::create_dir_all(&plot_dir)?;
    let altitude = plots.altitude.unwrap_or_else(|| scenario.sensing[0].altitude);
    for n in plots.heatmap_slots(report.solution.slots.len()) {
        let hm = plots::compute_heatmap(scenario, report, n, altitude, plots.cells);
        fs::write(plot_dir.join(format!("heatmap_slot_{n:03}.svg")), plots::heatmap_svg(&hm, scenario, report))?;
    }
    fs::write(plot_dir.join("trajectory.svg"), plots::trajectory_svg(scenario, report))?;
    Ok(())
}

/// Result of [`run`]: the directories that received artifacts.
#[derive(Debug, Clone, PartialEq)]
pub enum RunSummary {
    Single { dir: PathBuf, objective: f64 },
    Sweep { points: Vec<SweepPoint> },
}

/// Executes the invocation described by `args`.
pub fn run(args: &Args) -> Result<RunSummary> {
    let cfg = effective_config(args)?;
    let base = cfg.build()?;
    let case = match args.case {
        Some(c) => CaseSpec::numbered(c)?,
        None => CaseSpec::of(&base),
    };
    let benchmark: Benchmark = args.benchmark.into();
    let scenario = case.apply(&base);
    let plots = PlotOptions::from_args(args);
    match &args.sweep_gamma {
        None => {
            let report = solve(&scenario, case, benchmark)?;
            write_artifacts(&args.out, &cfg, &scenario, &report, &plots)?;
            Ok(RunSummary::Single { dir: args.out.clone(), objective: report.objective })
        }
        Some(sweep) => {
            fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
            write_json(&args.out.join("scenario.json"), &cfg)?;
            let gammas_dbw = sweep.points_dbw();
            let gammas: Vec<f64> = gammas_dbw.iter().map(|g| 10f64.powf(g / 10.0)).collect();
            let results = sweep_gamma(&scenario, case, benchmark, &gammas, &[]);
            let mut points = Vec::with_capacity(gammas.len());
            for (i, res) in results.into_iter().enumerate() {
                let (g_dbw, gamma_w) = (gammas_dbw[i], gammas[i]);
                match res {
                    Ok(report) => {
                        let dir_name = format!("gamma_{i:02}");
                        let mut point_cfg = cfg.clone();
                        point_cfg.gamma = Level::db(g_dbw, "dBW");
                        let sc = scenario.with_gamma(gamma_w);
                        write_artifacts(&args.out.join(&dir_name), &point_cfg, &sc, &report, &plots)?;
                        points.push(SweepPoint {
                            gamma_dbw: g_dbw,
                            gamma_w,
                            average_sum_rate: Some(report.objective),
                            rounds: report.rounds,
                            dir: dir_name,
                        });
                    }
                    Err(CoreError::InfeasibleScenario(msg)) => {
                        log::warn!("threshold {g_dbw} dBW is infeasible: {msg}");
                        points.push(SweepPoint { gamma_dbw: g_dbw, gamma_w, average_sum_rate: None, rounds: 0, dir: String::new() });
                    }
                    Err(e) => return Err(anyhow::Error::new(e).context(format!("threshold {g_dbw} dBW"))),
                }
            }
            export::write_sweep(create(&args.out.join("rate_vs_gamma.csv"))?, &points)?;
            if plots.enabled {
                let curve: Vec<(f64, f64)> =
                    points.iter().filter_map(|p| p.average_sum_rate.map(|r| (p.gamma_dbw, r))).collect();
                if let Some(svg) = plots::rate_curve_svg(&curve) {
                    let plot_dir = args.out.join("plots");
                    if let Err(e) = fs::create_dir_all(&plot_dir).and_then(|_| fs::write(plot_dir.join("rate_vs_gamma.svg"), svg)) {
                        log::warn!("rate curve was not written: {e}");
                    }
                }
            }
            Ok(RunSummary::Sweep { points })
        }
    }
}
