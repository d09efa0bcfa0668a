use std::io::Write;

use nalgebra::{Vector2, Vector3};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::vehicle::CommandProfile;

pub const TRACE_HEADER: [&str; 11] = [
    "t", "int_e", "e", "vz", "theta_rad", "q_rad_s", "delta_rad", "u_rad", "w1", "w2", "q_meas_rad_s",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: f64,
    /// `[∫e, e, v_z]`
    pub x: Vector3<f64>,
    pub theta: f64,
    pub q: f64,
    pub delta: f64,
    pub u: f64,
    pub w: Vector2<f64>,
    pub q_measured: f64,
    /// Whether the servo rate clamp was active on the step leaving this sample.
    pub rate_limited: bool,
}

impl Sample {
    pub fn is_finite(&self) -> bool {
        [self.t, self.theta, self.q, self.delta, self.u, self.q_measured]
            .iter()
            .chain(self.x.iter())
            .chain(self.w.iter())
            .all(|v| v.is_finite())
    }

    fn csv_row(&self) -> [String; 11] {
        [
            self.t, self.x[0], self.x[1], self.x[2], self.theta, self.q, self.delta, self.u, self.w[0],
            self.w[1], self.q_measured,
        ]
        .map(|v| v.to_string())
    }
}

/// Uniformly sampled closed-loop history.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SimulationTrace {
    pub samples: Vec<Sample>,
}

impl SimulationTrace {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn last(&self) -> Option<&Sample> {
        self.samples.last()
    }

    /// Largest `|Δδ| / Δt` between consecutive samples.
    pub fn max_deflection_rate(&self) -> f64 {
        self.samples
            .windows(2)
            .map(|w| (w[1].delta - w[0].delta).abs() / (w[1].t - w[0].t))
            .fold(0.0, f64::max)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let err = |e: csv::Error| Error::Parse(e.to_string());
        w.write_record(TRACE_HEADER).map_err(err)?;
        for s in &self.samples {
            w.write_record(s.csv_row()).map_err(err)?;
        }
        w.flush().map_err(|e| Error::Parse(e.to_string()))
    }
}

/// Whole-run summary. Serialized as a flat JSON object.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Metrics {
    pub rms_e: f64,
    pub max_abs_e: f64,
    pub rms_theta_err: f64,
    pub max_abs_delta: f64,
    pub servo_saturation_fraction: f64,
    /// `∫e² dt / ∫‖w‖² dt`, zero when there is no disturbance energy.
    pub energy_ratio: f64,
}

/// Trapezoid integral of `f` over the samples.
fn trapezoid(samples: &[Sample], f: impl Fn(&Sample) -> f64) -> f64 {
    samples
        .windows(2)
        .map(|w| 0.5 * (f(&w[0]) + f(&w[1])) * (w[1].t - w[0].t))
        .sum()
}

/// Time-averaged RMS (trapezoid), or the single value for one sample.
fn rms(samples: &[Sample], f: impl Fn(&Sample) -> f64) -> f64 {
    match samples {
        [] => 0.0,
        [only] => f(only).abs(),
        [first, .., last] => {
            let span = last.t - first.t;
            (trapezoid(samples, |s| f(s).powi(2)) / span).sqrt()
        }
    }
}

pub fn compute_metrics(trace: &SimulationTrace, profile: &CommandProfile) -> Metrics {
    let s = &trace.samples;
    if s.is_empty() {
        return Metrics::default();
    }
    let e = |x: &Sample| x.x[1];
    let theta_err = |x: &Sample| profile.integral(x.t) - x.theta;
    let w_energy = trapezoid(s, |x| x.w.norm_squared());
    let e_energy = trapezoid(s, |x| e(x).powi(2));
    Metrics {
        rms_e: rms(s, e),
        max_abs_e: s.iter().map(|x| e(x).abs()).fold(0.0, f64::max),
        rms_theta_err: rms(s, theta_err),
        max_abs_delta: s.iter().map(|x| x.delta.abs()).fold(0.0, f64::max),
        servo_saturation_fraction: s.iter().filter(|x| x.rate_limited).count() as f64 / s.len() as f64,
        energy_ratio: if w_energy > 0.0 { e_energy / w_energy } else { 0.0 },
    }
}
