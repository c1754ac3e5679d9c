use std::path::PathBuf;
use std::str::FromStr;

use clap::{ArgAction, Parser, ValueEnum};
use isac_core::ao::Benchmark;

/// Plan coordinated ISAC beamforming, UAV association and trajectories for a
/// scenario file and export the results.
#[derive(Debug, Clone, Parser)]
#[command(name = "isac-plan", version)]
pub struct Args {
    /// Scenario JSON file. The bundled default scenario is used when omitted.
    #[arg(long, value_name = "PATH")]
    pub scenario: Option<PathBuf>,

    /// Evaluation case: 1 horizontal/Type-I, 2 horizontal/Type-II,
    /// 3 vertical/Type-I, 4 vertical/Type-II. Defaults to the scenario's own
    /// orientation and receiver.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=4))]
    pub case: Option<u8>,

    #[arg(long, value_enum, default_value_t = BenchmarkArg::None)]
    pub benchmark: BenchmarkArg,

    /// Sweep the illumination threshold, e.g. `-46:-34:4dBW`. Bounds are
    /// inclusive and given in dBW.
    #[arg(long, value_name = "LO:HI:STEP[dBW]", allow_hyphen_values = true)]
    pub sweep_gamma: Option<GammaSweep>,

    #[arg(long, value_name = "DIR", default_value = "out")]
    pub out: PathBuf,

    #[arg(long, value_name = "INT")]
    pub max_ao_rounds: Option<usize>,

    #[arg(long, value_name = "FLOAT")]
    pub ao_tol: Option<f64>,

    #[arg(long, value_name = "FLOAT")]
    pub solver_tol: Option<f64>,

    #[arg(long, value_name = "INT")]
    pub seed: Option<u64>,

    #[arg(long, value_name = "BOOL", default_value_t = true, action = ArgAction::Set)]
    pub emit_plots: bool,

    /// Worker threads; defaults to the number of logical CPUs.
    #[arg(long, value_name = "INT")]
    pub threads: Option<usize>,

    /// Slots drawn as illumination heatmaps. Defaults to the first, middle
    /// and last slot.
    #[arg(long, value_name = "N,N,...", value_delimiter = ',')]
    pub heatmap_slots: Vec<usize>,

    /// Altitude of the heatmap plane in metres. Defaults to the altitude of
    /// the first sensing sample.
    #[arg(long, value_name = "M")]
    pub heatmap_altitude: Option<f64>,

    /// Heatmap cells along the longer side of the plotted area.
    #[arg(long, value_name = "INT", default_value_t = 48)]
    pub heatmap_cells: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BenchmarkArg {
    None,
    Straight,
    Isotropic,
}

impl From<BenchmarkArg> for Benchmark {
    fn from(b: BenchmarkArg) -> Self {
        match b {
            BenchmarkArg::None => Benchmark::None,
            BenchmarkArg::Straight => Benchmark::StraightFlight,
            BenchmarkArg::Isotropic => Benchmark::Isotropic,
        }
    }
}

/// An inclusive arithmetic progression of thresholds in dBW.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaSweep {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl GammaSweep {
    /// Threshold values in dBW; empty when `lo > hi`.
    pub fn points_dbw(&self) -> Vec<f64> {
        if self.lo > self.hi {
            return Vec::new();
        }
        let n = ((self.hi - self.lo) / self.step + 1e-9).floor() as usize + 1;
        (0..n).map(|i| self.lo + i as f64 * self.step).collect()
    }
}

impl FromStr for GammaSweep {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let body = s.trim();
        let body = body.strip_suffix("dBW").unwrap_or(body);
        let parts: Vec<&str> = body.split(':').collect();
        if parts.len() != 3 {
            return Err(format!("expected LO:HI:STEP, got {s:?}"));
        }
        let parse = |p: &str, what: &str| -> Result<f64, String> {
            let v: f64 = p.trim().parse().map_err(|_| format!("{what}: cannot parse {p:?}"))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(format!("{what} must be finite"))
            }
        };
        let sweep = GammaSweep { lo: parse(parts[0], "LO")?, hi: parse(parts[1], "HI")?, step: parse(parts[2], "STEP")? };
        if sweep.step <= 0.0 {
            return Err("STEP must be positive".into());
        }
        Ok(sweep)
    }
}
