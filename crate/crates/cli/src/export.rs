//! CSV and JSON writers for run artifacts.
//!
//! Every floating-point number is written with 17 significant digits, which
//! is enough to recover the exact `f64`.
//!
//! | file | header |
//! |------|--------|
//! | `rates.csv` | `slot,uav_0,...,uav_{K-1}` (bit/s/Hz) |
//! | `trajectory.csv` | `slot,uav,x_m,y_m,altitude_m` |
//! | `illumination.csv` | `sample,x_m,y_m,altitude_m,slot_0,...,slot_{N-1}` (W) |
//! | `association.csv` | `slot,uav,gbs` |
//! | `rate_vs_gamma.csv` | `gamma_dbw,gamma_w,status,average_sum_rate,rounds,dir` |

use std::io::Write;

use anyhow::Result;
use isac_core::ao::SolveReport;
use isac_core::scenario::Scenario;

pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_rates<W: Write>(w: W, report: &SolveReport) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let k = report.rates.per_uav.first().map_or(0, |r| r.len());
    let mut header = vec!["slot".to_string()];
    header.extend((0..k).map(|i| format!("uav_{i}")));
    out.write_record(&header)?;
    for (n, row) in report.rates.per_uav.iter().enumerate() {
        let mut rec = vec![n.to_string()];
        rec.extend(row.iter().map(|&v| num(v)));
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_trajectory<W: Write>(w: W, report: &SolveReport) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["slot", "uav", "x_m", "y_m", "altitude_m"])?;
    let traj = &report.trajectory;
    for n in 0..traj.n_slots() {
        for (k, q) in traj.q.iter().enumerate() {
            out.write_record([n.to_string(), k.to_string(), num(q[n].x), num(q[n].y), num(traj.altitudes[k])])?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn write_illumination<W: Write>(w: W, scenario: &Scenario, report: &SolveReport) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let n_slots = report.illumination.first().map_or(0, |r| r.len());
    let mut header: Vec<String> = ["sample", "x_m", "y_m", "altitude_m"].iter().map(|s| s.to_string()).collect();
    header.extend((0..n_slots).map(|n| format!("slot_{n}")));
    out.write_record(&header)?;
    for (q, row) in report.illumination.iter().enumerate() {
        let p = &scenario.sensing[q];
        let mut rec = vec![q.to_string(), num(p.horizontal.x), num(p.horizontal.y), num(p.altitude)];
        rec.extend(row.iter().map(|&v| num(v)));
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_association<W: Write>(w: W, report: &SolveReport) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["slot", "uav", "gbs"])?;
    let gbs_of = &report.association.gbs_of;
    let n_slots = gbs_of.first().map_or(0, |r| r.len());
    for n in 0..n_slots {
        for (k, row) in gbs_of.iter().enumerate() {
            out.write_record([n.to_string(), k.to_string(), row[n].to_string()])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Outcome of one point of a threshold sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub gamma_dbw: f64,
    pub gamma_w: f64,
    /// `None` when the threshold cannot be met.
    pub average_sum_rate: Option<f64>,
    pub rounds: usize,
    pub dir: String,
}

pub fn write_sweep<W: Write>(w: W, points: &[SweepPoint]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["gamma_dbw", "gamma_w", "status", "average_sum_rate", "rounds", "dir"])?;
    for p in points {
        let (status, rate) = match p.average_sum_rate {
            Some(r) => ("ok", num(r)),
            None => ("infeasible", String::new()),
        };
        out.write_record([num(p.gamma_dbw), num(p.gamma_w), status.into(), rate, p.rounds.to_string(), p.dir.clone()])?;
    }
    out.flush()?;
    Ok(())
}
