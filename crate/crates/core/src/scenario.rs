//! Scenario configuration: JSON ingestion, unit conversion, validation and
//! sensing-grid sampling.

use std::path::Path;

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::geometry::{AirPoint, ArrayConfig, GbsSite, Orientation};
use crate::signal::Receiver;
use crate::CoreError;

/// A power or gain given either as a linear number or as a string with a
/// `dB`, `dBW` or `dBm` suffix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Level {
    Linear(f64),
    Tagged(String),
}

impl Level {
    pub fn db(v: f64, unit: &str) -> Level {
        Level::Tagged(format!("{v}{unit}"))
    }

    /// Converts to linear scale; `key` names the field in error messages.
    pub fn to_linear(&self, key: &str) -> Result<f64, CoreError> {
        match self {
            Level::Linear(v) => Ok(*v),
            Level::Tagged(s) => {
                let s = s.trim();
                let (num, offset) = if let Some(n) = s.strip_suffix("dBm") {
                    (n, -30.0)
                } else if let Some(n) = s.strip_suffix("dBW") {
                    (n, 0.0)
                } else if let Some(n) = s.strip_suffix("dB") {
                    (n, 0.0)
                } else {
                    return Err(CoreError::Config(format!(
                        "{key}: expected a number or a string ending in dB/dBW/dBm, got {s:?}"
                    )));
                };
                let v: f64 = num.trim().parse().map_err(|_| {
                    CoreError::Config(format!("{key}: cannot parse {num:?} as a number"))
                })?;
                Ok(10f64.powf((v + offset) / 10.0))
            }
        }
    }
}

/// Converts a linear power to dBW.
pub fn to_dbw(v: f64) -> f64 {
    10.0 * v.log10()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UavConfig {
    pub start: [f64; 2],
    pub end: [f64; 2],
    pub altitude: f64,
}

fn default_spacing() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArraySpec {
    pub n_antennas: usize,
    #[serde(default = "default_spacing")]
    pub spacing_over_wavelength: f64,
    pub orientation: Orientation,
}

/// Axis-aligned sampling box at a fixed altitude.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxSpec {
    pub x: [f64; 2],
    pub y: [f64; 2],
    pub altitude: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointSpec {
    pub x: f64,
    pub y: f64,
    pub altitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensingSpec {
    Box(BoxSpec),
    Points(Vec<PointSpec>),
}

/// Iteration limits and tolerances of the optimisation stages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverParams {
    pub solver_tol: f64,
    pub solver_max_iters: usize,
    /// Beamforming SCA stops once a pass improves the slot rate by less than this.
    pub eps_bf: f64,
    pub max_sca_iters: usize,
    /// Initial trust-region radius (m).
    pub omega0: f64,
    /// Trust-region termination radius (m).
    pub xi: f64,
    pub max_traj_iters: usize,
    pub ao_tol: f64,
    pub max_rounds: usize,
}

impl Default for SolverParams {
    fn default() -> Self {
        SolverParams {
            solver_tol: 1e-8,
            solver_max_iters: 100,
            eps_bf: 1e-4,
            max_sca_iters: 20,
            omega0: 20.0,
            xi: 0.1,
            max_traj_iters: 30,
            ao_tol: 1e-3,
            max_rounds: 10,
        }
    }
}

/// The on-disk scenario description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub gbs: Vec<[f64; 2]>,
    pub uavs: Vec<UavConfig>,
    pub array: ArraySpec,
    pub receiver: Receiver,
    pub p_max: Level,
    pub noise: Level,
    pub kappa: Level,
    pub gamma: Level,
    pub n_slots: usize,
    /// Largest horizontal displacement per slot, `V_max * dt` (m).
    pub max_step: f64,
    pub d_min: f64,
    pub sensing: SensingSpec,
    #[serde(default)]
    pub solver: SolverParams,
    #[serde(default)]
    pub seed: u64,
}

/// A validated scenario in linear units.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scenario {
    pub gbs: Vec<GbsSite>,
    pub uavs: Vec<UavSpec>,
    pub array: ArrayConfig,
    pub receiver: Receiver,
    pub p_max: f64,
    pub noise: f64,
    pub kappa: f64,
    pub gamma: f64,
    pub n_slots: usize,
    pub max_step: f64,
    pub d_min: f64,
    pub sensing: Vec<AirPoint>,
    pub params: SolverParams,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UavSpec {
    pub start: Vector2<f64>,
    pub end: Vector2<f64>,
    pub altitude: f64,
}

impl Scenario {
    pub fn n_gbs(&self) -> usize {
        self.gbs.len()
    }

    pub fn n_uavs(&self) -> usize {
        self.uavs.len()
    }

    /// Channel gain at 1 m relative to the noise power; channels are built
    /// with this so that the noise is 1 internally.
    pub fn normalized_kappa(&self) -> f64 {
        self.kappa / self.noise
    }

    pub fn with_gamma(&self, gamma: f64) -> Scenario {
        Scenario { gamma, ..self.clone() }
    }

    pub fn with_orientation(&self, orientation: Orientation) -> Scenario {
        let mut s = self.clone();
        s.array.orientation = orientation;
        s
    }
}

/// Reads and parses a scenario file.
pub fn load_scenario(path: &Path) -> Result<ScenarioConfig, CoreError> {
    let text = std::fs::read_to_string(path)?;
    let cfg: ScenarioConfig = serde_json::from_str(&text).map_err(|e| {
        CoreError::Config(format!("{}: {e}", path.display()))
    })?;
    cfg.build()?;
    Ok(cfg)
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), CoreError> {
    if cond {
        Ok(())
    } else {
        Err(CoreError::Config(msg()))
    }
}

fn finite2(v: &[f64; 2]) -> bool {
    v[0].is_finite() && v[1].is_finite()
}

impl ScenarioConfig {
    /// Validates and converts to a [`Scenario`].
    pub fn build(&self) -> Result<Scenario, CoreError> {
        check(!self.gbs.is_empty(), || "gbs: at least one base station is required".into())?;
        for (i, g) in self.gbs.iter().enumerate() {
            check(finite2(g), || format!("gbs[{i}]: position must be finite"))?;
        }
        for (k, u) in self.uavs.iter().enumerate() {
            check(finite2(&u.start) && finite2(&u.end), || format!("uavs[{k}]: endpoints must be finite"))?;
            check(u.altitude > 0.0 && u.altitude.is_finite(), || format!("uavs[{k}].altitude must be > 0"))?;
        }
        check(self.array.n_antennas >= 1, || "array.n_antennas must be >= 1".into())?;
        check(self.array.spacing_over_wavelength > 0.0, || "array.spacing_over_wavelength must be > 0".into())?;
        let p_max = self.p_max.to_linear("p_max")?;
        let noise = self.noise.to_linear("noise")?;
        let kappa = self.kappa.to_linear("kappa")?;
        let gamma = self.gamma.to_linear("gamma")?;
        check(p_max > 0.0 && p_max.is_finite(), || "p_max must be > 0".into())?;
        check(noise > 0.0 && noise.is_finite(), || "noise must be > 0".into())?;
        check(kappa > 0.0 && kappa.is_finite(), || "kappa must be > 0".into())?;
        check(gamma >= 0.0 && gamma.is_finite(), || "gamma must be >= 0".into())?;
        check(self.n_slots >= 2, || "n_slots must be >= 2".into())?;
        check(self.max_step > 0.0 && self.max_step.is_finite(), || "max_step must be > 0".into())?;
        check(self.d_min >= 0.0 && self.d_min.is_finite(), || "d_min must be >= 0".into())?;
        let reach = (self.n_slots - 1) as f64 * self.max_step;
        for (k, u) in self.uavs.iter().enumerate() {
            let dist = (Vector2::from(u.end) - Vector2::from(u.start)).norm();
            check(dist <= reach + 1e-9, || {
                format!("uavs[{k}]: endpoints {dist:.3} m apart but at most {reach:.3} m reachable in n_slots - 1 steps")
            })?;
        }
        let sensing = match &self.sensing {
            SensingSpec::Box(b) => sample_sensing_grid(b)?,
            SensingSpec::Points(pts) => {
                check(!pts.is_empty(), || "sensing.points must not be empty".into())?;
                pts.iter()
                    .enumerate()
                    .map(|(i, p)| {
                        check(p.x.is_finite() && p.y.is_finite(), || format!("sensing.points[{i}] must be finite"))?;
                        check(p.altitude > 0.0, || format!("sensing.points[{i}].altitude must be > 0"))?;
                        Ok(AirPoint::new(p.x, p.y, p.altitude))
                    })
                    .collect::<Result<Vec<_>, CoreError>>()?
            }
        };
        let sp = &self.solver;
        check((1e-10..=1e-4).contains(&sp.solver_tol), || "solver.solver_tol must lie in [1e-10, 1e-4]".into())?;
        check(sp.solver_max_iters > 0, || "solver.solver_max_iters must be > 0".into())?;
        check(sp.eps_bf > 0.0, || "solver.eps_bf must be > 0".into())?;
        check(sp.xi > 0.0 && sp.omega0 > 0.0, || "solver.omega0 and solver.xi must be > 0".into())?;
        check(sp.ao_tol > 0.0, || "solver.ao_tol must be > 0".into())?;

        Ok(Scenario {
            gbs: self
                .gbs
                .iter()
                .enumerate()
                .map(|(id, u)| GbsSite { id, u: Vector2::from(*u) })
                .collect(),
            uavs: self
                .uavs
                .iter()
                .map(|u| UavSpec { start: Vector2::from(u.start), end: Vector2::from(u.end), altitude: u.altitude })
                .collect(),
            array: ArrayConfig {
                n_antennas: self.array.n_antennas,
                spacing_over_wavelength: self.array.spacing_over_wavelength,
                orientation: self.array.orientation,
            },
            receiver: self.receiver,
            p_max,
            noise,
            kappa,
            gamma,
            n_slots: self.n_slots,
            max_step: self.max_step,
            d_min: self.d_min,
            sensing,
            params: *sp,
            seed: self.seed,
        })
    }

    /// The reference setup: three base stations in a
    /// 400 m x 400 m area, two UAVs at 80 m, four antennas, 3 W, 40 slots,
    /// 10 m/s with 2 s slots, -45 dB reference gain, -100 dBW noise and 20
    /// sensing samples.
    ///
    /// Base-station sites and the sensing box are approximate.
    pub fn reference_default() -> ScenarioConfig {
        ScenarioConfig {
            gbs: vec![[100.0, 320.0], [120.0, 60.0], [320.0, 80.0]],
            uavs: vec![
                UavConfig { start: [50.0, 250.0], end: [350.0, 250.0], altitude: 80.0 },
                UavConfig { start: [50.0, 150.0], end: [350.0, 150.0], altitude: 80.0 },
            ],
            array: ArraySpec { n_antennas: 4, spacing_over_wavelength: 0.5, orientation: Orientation::Horizontal },
            receiver: Receiver::TypeI,
            p_max: Level::Linear(3.0),
            noise: Level::db(-100.0, "dBW"),
            kappa: Level::db(-45.0, "dB"),
            gamma: Level::db(-40.0, "dBW"),
            n_slots: 40,
            max_step: 20.0,
            d_min: 10.0,
            sensing: SensingSpec::Box(BoxSpec { x: [240.0, 360.0], y: [290.0, 370.0], altitude: 60.0, count: 20 }),
            solver: SolverParams::default(),
            seed: 0,
        }
    }

    /// A reduced instance (10 slots, 6 sensing samples) used by the
    /// acceptance checks.
    pub fn desk_scale() -> ScenarioConfig {
        let mut c = Self::reference_default();
        c.n_slots = 10;
        c.max_step = 50.0;
        if let SensingSpec::Box(b) = &mut c.sensing {
            b.count = 6;
        }
        c
    }
}

/// Deterministic lattice of `count` points over the box, row-major (rows
/// along y, columns along x), using the factor pair of `count` closest to
/// square with the larger factor on the longer side.
pub fn sample_sensing_grid(spec: &BoxSpec) -> Result<Vec<AirPoint>, CoreError> {
    let q = spec.count;
    check(q >= 1, || "sensing.box.count must be >= 1".into())?;
    let w = spec.x[1] - spec.x[0];
    let h = spec.y[1] - spec.y[0];
    check(w > 0.0 && h > 0.0, || "sensing.box must have positive extents".into())?;
    check(spec.altitude > 0.0, || "sensing.box.altitude must be > 0".into())?;
    let mut small = (q as f64).sqrt().floor() as usize;
    while q % small != 0 {
        small -= 1;
    }
    let large = q / small;
    let (nx, ny) = if w >= h { (large, small) } else { (small, large) };
    let mut pts = Vec::with_capacity(q);
    for iy in 0..ny {
        for ix in 0..nx {
            let x = spec.x[0] + (ix as f64 + 0.5) * w / nx as f64;
            let y = spec.y[0] + (iy as f64 + 0.5) * h / ny as f64;
            pts.push(AirPoint::new(x, y, spec.altitude));
        }
    }
    Ok(pts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit_box(count: usize) -> BoxSpec {
        BoxSpec { x: [0.0, 4.0], y: [0.0, 4.0], altitude: 10.0, count }
    }

    #[test]
    fn single_sample_is_the_centre() {
        let p = sample_sensing_grid(&unit_box(1)).unwrap();
        assert_eq!(p, vec![AirPoint::new(2.0, 2.0, 10.0)]);
    }

    #[test]
    fn four_samples_on_a_square_sit_at_quarter_points() {
        let p = sample_sensing_grid(&unit_box(4)).unwrap();
        let xy: Vec<(f64, f64)> = p.iter().map(|a| (a.horizontal.x, a.horizontal.y)).collect();
        assert_eq!(xy, vec![(1.0, 1.0), (3.0, 1.0), (1.0, 3.0), (3.0, 3.0)]);
    }

    #[test]
    fn twenty_samples_form_five_by_four() {
        let b = BoxSpec { x: [0.0, 100.0], y: [0.0, 80.0], altitude: 60.0, count: 20 };
        let p = sample_sensing_grid(&b).unwrap();
        assert_eq!(p.len(), 20);
        let distinct_x: std::collections::BTreeSet<u64> = p.iter().map(|a| a.horizontal.x.to_bits()).collect();
        let distinct_y: std::collections::BTreeSet<u64> = p.iter().map(|a| a.horizontal.y.to_bits()).collect();
        assert_eq!(distinct_x.len(), 5);
        assert_eq!(distinct_y.len(), 4);
    }

    #[test]
    fn zero_count_is_rejected() {
        assert!(sample_sensing_grid(&unit_box(0)).is_err());
    }

    #[test]
    fn db_strings_convert() {
        assert_relative_eq!(Level::db(-45.0, "dB").to_linear("k").unwrap(), 10f64.powf(-4.5));
        assert_relative_eq!(Level::db(-100.0, "dBW").to_linear("k").unwrap(), 1e-10, max_relative = 1e-12);
        assert_relative_eq!(Level::db(30.0, "dBm").to_linear("k").unwrap(), 1.0, max_relative = 1e-12);
        assert!(Level::Tagged("3 W".into()).to_linear("p_max").is_err());
    }

    #[test]
    fn default_matches_the_reference_setup() {
        let s = ScenarioConfig::reference_default().build().unwrap();
        assert_eq!(s.n_gbs(), 3);
        assert_eq!(s.n_uavs(), 2);
        assert_eq!(s.array.n_antennas, 4);
        assert_eq!(s.array.spacing_over_wavelength, 0.5);
        assert_eq!(s.p_max, 3.0);
        assert_eq!(s.n_slots, 40);
        assert_eq!(s.sensing.len(), 20);
        assert_relative_eq!(s.kappa, 10f64.powf(-4.5), max_relative = 1e-12);
        assert_relative_eq!(s.noise, 1e-10, max_relative = 1e-12);
        assert!(s.uavs.iter().all(|u| u.altitude == 80.0));
        for g in &s.gbs {
            assert!((0.0..=400.0).contains(&g.u.x) && (0.0..=400.0).contains(&g.u.y));
        }
    }

    #[test]
    fn unreachable_endpoints_are_rejected() {
        let mut c = ScenarioConfig::reference_default();
        c.max_step = 5.0;
        let err = c.build().unwrap_err().to_string();
        assert!(err.contains("reachable"), "{err}");
    }
}
