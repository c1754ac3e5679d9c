//! Positions, angles of departure, steering vectors and line-of-sight
//! channels for a uniform linear array at each ground base station.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Vector2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub type CVec = DVector<Complex64>;
pub type CMat = DMatrix<Complex64>;

/// Placement of the array elements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    /// Elements along the x axis.
    Horizontal,
    /// Elements along the z axis.
    Vertical,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbsSite {
    pub id: usize,
    /// Horizontal position in metres; the array sits at zero altitude.
    pub u: Vector2<f64>,
}

/// A point in the airspace: horizontal position plus altitude (> 0).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AirPoint {
    pub horizontal: Vector2<f64>,
    pub altitude: f64,
}

impl AirPoint {
    pub fn new(x: f64, y: f64, altitude: f64) -> Self {
        AirPoint { horizontal: Vector2::new(x, y), altitude }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrayConfig {
    pub n_antennas: usize,
    pub spacing_over_wavelength: f64,
    pub orientation: Orientation,
}

impl ArrayConfig {
    pub fn new(n_antennas: usize, orientation: Orientation) -> Self {
        ArrayConfig { n_antennas, spacing_over_wavelength: 0.5, orientation }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelVector {
    pub entries: CVec,
    pub gbs: usize,
    pub target: AirPoint,
}

/// Squared 3D distance between a GBS (at ground level) and an air point.
pub fn distance_squared(u: &Vector2<f64>, q: &Vector2<f64>, altitude: f64) -> f64 {
    (q - u).norm_squared() + altitude * altitude
}

/// Cosine of the angle of departure from `gbs` toward `point`.
pub fn aod_cosine(orientation: Orientation, gbs: &GbsSite, point: &AirPoint) -> f64 {
    let diff = point.horizontal - gbs.u;
    let dist = distance_squared(&gbs.u, &point.horizontal, point.altitude).sqrt();
    let c = match orientation {
        Orientation::Horizontal => diff.x / dist,
        Orientation::Vertical => point.altitude / dist,
    };
    c.clamp(-1.0, 1.0)
}

/// Array response; entry `r` is `exp(j 2 pi (d/lambda) r cos_theta)`.
pub fn steering_vector(cos_theta: f64, cfg: &ArrayConfig) -> CVec {
    let phase = 2.0 * PI * cfg.spacing_over_wavelength * cos_theta;
    CVec::from_fn(cfg.n_antennas, |r, _| Complex64::from_polar(1.0, phase * r as f64))
}

/// Steering vector from `gbs` toward `point`.
pub fn steering_toward(gbs: &GbsSite, point: &AirPoint, cfg: &ArrayConfig) -> CVec {
    steering_vector(aod_cosine(cfg.orientation, gbs, point), cfg)
}

/// Line-of-sight channel `sqrt(kappa / d^2) a(theta)`.
pub fn channel_vector(gbs: &GbsSite, point: &AirPoint, cfg: &ArrayConfig, kappa: f64) -> ChannelVector {
    let d2 = distance_squared(&gbs.u, &point.horizontal, point.altitude);
    let gain = (kappa / d2).sqrt();
    let entries = steering_toward(gbs, point, cfg) * Complex64::new(gain, 0.0);
    ChannelVector { entries, gbs: gbs.id, target: *point }
}

/// Outer product `h h^H`.
pub fn channel_outer(h: &ChannelVector) -> CMat {
    outer(&h.entries)
}

pub(crate) fn outer(v: &CVec) -> CMat {
    v * v.adjoint()
}

/// `Re(v^H M v)`.
pub(crate) fn quad_form(v: &CVec, m: &CMat) -> f64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for j in 0..v.len() {
        let mut col = Complex64::new(0.0, 0.0);
        for i in 0..v.len() {
            col += v[i].conj() * m[(i, j)];
        }
        acc += col * v[j];
    }
    acc.re
}
