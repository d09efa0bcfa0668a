//! Launch-vehicle pitch channel: time-varying coefficients, the
//! tracking-error plant and the command-driven affine forcing.
//!
//! State ordering is fixed as `x̂ = [∫e, e, v_z]` with `q = q_c − e`.
//! Angles are radians and rates radians per second throughout; the CSV
//! command format is the only place degrees appear.

use std::io::{Read, Write};

use nalgebra::{DMatrix, Matrix3, Matrix3x2, RowVector3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pitch-channel coefficients at one instant, in the vehicle's native
/// numerical units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DynamicCoefficients {
    pub z_v: f64,
    pub z_q: f64,
    pub z_theta: f64,
    pub z_delta: f64,
    pub m_v: f64,
    pub m_q: f64,
    pub m_delta: f64,
}

impl DynamicCoefficients {
    pub const ZERO: Self = Self {
        z_v: 0.0,
        z_q: 0.0,
        z_theta: 0.0,
        z_delta: 0.0,
        m_v: 0.0,
        m_q: 0.0,
        m_delta: 0.0,
    };

    /// Snapshot at t = 60 s.
    pub const T60: Self = Self {
        z_v: -0.054252,
        z_q: 608.84,
        z_theta: -6.4939,
        z_delta: -3.4855,
        m_v: -0.003439,
        m_q: -0.18404,
        m_delta: -1.9594,
    };

    /// Snapshot at t = 100 s.
    pub const T100: Self = Self {
        z_v: -0.0020551,
        z_q: 1827.8,
        z_theta: -6.4939,
        z_delta: -6.2007,
        m_v: 0.0002725,
        m_q: -0.014108,
        m_delta: -2.1086,
    };

    /// Field order matches the CSV header `Zv,Zq,Ztheta,Zdelta,Mv,Mq,Mdelta`.
    pub fn to_array(&self) -> [f64; 7] {
        [
            self.z_v,
            self.z_q,
            self.z_theta,
            self.z_delta,
            self.m_v,
            self.m_q,
            self.m_delta,
        ]
    }

    pub fn from_array(v: [f64; 7]) -> Self {
        Self {
            z_v: v[0],
            z_q: v[1],
            z_theta: v[2],
            z_delta: v[3],
            m_v: v[4],
            m_q: v[5],
            m_delta: v[6],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    fn lerp(&self, other: &Self, s: f64) -> Self {
        let (a, b) = (self.to_array(), other.to_array());
        Self::from_array(std::array::from_fn(|i| a[i] + s * (b[i] - a[i])))
    }
}

/// Piecewise-linear coefficient schedule, clamped outside its breakpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientSchedule {
    breakpoints: Vec<(f64, DynamicCoefficients)>,
}

impl CoefficientSchedule {
    pub fn new(breakpoints: Vec<(f64, DynamicCoefficients)>) -> Result<Self> {
        if breakpoints.is_empty() {
            return Err(Error::InvalidInput("schedule needs at least one breakpoint".into()));
        }
        for (t, c) in &breakpoints {
            if !t.is_finite() || !c.is_finite() {
                return Err(Error::InvalidInput(format!("non-finite schedule entry at t = {t}")));
            }
        }
        if breakpoints.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::InvalidInput("schedule times must be strictly increasing".into()));
        }
        Ok(Self { breakpoints })
    }

    pub fn constant(coeffs: DynamicCoefficients) -> Self {
        Self {
            breakpoints: vec![(0.0, coeffs)],
        }
    }

    /// Two anchors: the t = 60 s snapshot and the t = 100 s snapshot.
    pub fn paper_default() -> Self {
        Self {
            breakpoints: vec![
                (60.0, DynamicCoefficients::T60),
                (100.0, DynamicCoefficients::T100),
            ],
        }
    }

    pub fn breakpoints(&self) -> &[(f64, DynamicCoefficients)] {
        &self.breakpoints
    }

    /// Per-coefficient linear interpolation, constant outside the range.
    pub fn coefficients_at(&self, t: f64) -> DynamicCoefficients {
        let bp = &self.breakpoints;
        let first = &bp[0];
        let last = &bp[bp.len() - 1];
        if t <= first.0 {
            return first.1;
        }
        if t >= last.0 {
            return last.1;
        }
        // first index with time > t; t lies in [bp[i-1].0, bp[i].0)
        let i = bp.partition_point(|(ti, _)| *ti <= t);
        let (t0, c0) = &bp[i - 1];
        let (t1, c1) = &bp[i];
        if t == *t0 {
            return *c0;
        }
        c0.lerp(c1, (t - t0) / (t1 - t0))
    }

    /// Reads `t,Zv,Zq,Ztheta,Zdelta,Mv,Mq,Mdelta`.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let expected = ["t", "Zv", "Zq", "Ztheta", "Zdelta", "Mv", "Mq", "Mdelta"];
        let headers = rdr.headers().map_err(|e| Error::Parse(e.to_string()))?.clone();
        if headers.iter().collect::<Vec<_>>() != expected {
            return Err(Error::Parse(format!(
                "schedule header must be `{}`",
                expected.join(",")
            )));
        }
        let mut breakpoints = Vec::new();
        for (line, record) in rdr.records().enumerate() {
            let record = record.map_err(|e| Error::Parse(e.to_string()))?;
            let values = parse_row::<8>(&record, line + 2)?;
            let coeffs = DynamicCoefficients::from_array(std::array::from_fn(|i| values[i + 1]));
            breakpoints.push((values[0], coeffs));
        }
        Self::new(breakpoints)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let io = |e: csv::Error| Error::Parse(e.to_string());
        w.write_record(["t", "Zv", "Zq", "Ztheta", "Zdelta", "Mv", "Mq", "Mdelta"])
            .map_err(io)?;
        for (t, c) in &self.breakpoints {
            let mut row = vec![t.to_string()];
            row.extend(c.to_array().iter().map(f64::to_string));
            w.write_record(&row).map_err(io)?;
        }
        w.flush().map_err(|e| Error::Parse(e.to_string()))
    }
}

fn parse_row<const N: usize>(record: &csv::StringRecord, line: usize) -> Result<[f64; N]> {
    if record.len() != N {
        return Err(Error::Parse(format!(
            "line {line}: expected {N} fields, found {}",
            record.len()
        )));
    }
    let mut out = [0.0; N];
    for (slot, field) in out.iter_mut().zip(record.iter()) {
        *slot = field
            .parse::<f64>()
            .map_err(|_| Error::Parse(format!("line {line}: `{field}` is not a number")))?;
        if !slot.is_finite() {
            return Err(Error::Parse(format!("line {line}: `{field}` is not finite")));
        }
    }
    Ok(out)
}

/// Augmented tracking plant `ẋ̂ = A x̂ + B u + B_w w + f(t)`, `y = C x̂`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantModel {
    pub a: Matrix3<f64>,
    pub b: Vector3<f64>,
    pub bw: Matrix3x2<f64>,
    pub c_meas: RowVector3<f64>,
}

impl PlantModel {
    pub fn a_dyn(&self) -> DMatrix<f64> {
        DMatrix::from_column_slice(3, 3, self.a.as_slice())
    }

    pub fn b_dyn(&self) -> DMatrix<f64> {
        DMatrix::from_column_slice(3, 1, self.b.as_slice())
    }

    pub fn bw_dyn(&self) -> DMatrix<f64> {
        DMatrix::from_column_slice(3, 2, self.bw.as_slice())
    }

    pub fn c_meas_dyn(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(1, 3, self.c_meas.as_slice())
    }
}

/// Disturbance input map: channel 1 drives `v̇_z`, channel 2 drives `ė`.
pub fn disturbance_map() -> Matrix3x2<f64> {
    Matrix3x2::new(0.0, 0.0, 0.0, 1.0, 1.0, 0.0)
}

pub fn assemble_pitch_plant(c: &DynamicCoefficients) -> PlantModel {
    PlantModel {
        a: Matrix3::new(
            0.0, 1.0, 0.0, //
            0.0, c.m_q, -c.m_v, //
            -c.z_theta, -c.z_q, c.z_v,
        ),
        b: Vector3::new(0.0, -c.m_delta, c.z_delta),
        bw: disturbance_map(),
        c_meas: RowVector3::new(0.0, 1.0, 0.0),
    }
}

/// Piecewise-linear pitch-rate command, clamped outside its breakpoints,
/// with the running integral `∫₀ᵗ q_c dτ` kept in closed form.
#[derive(Debug, Clone, PartialEq)]
pub struct CommandProfile {
    times: Vec<f64>,
    rates: Vec<f64>,
    /// Antiderivative at each breakpoint, zero at the first one.
    cumulative: Vec<f64>,
    /// Antiderivative value at t = 0, subtracted so the integral starts there.
    offset: f64,
}

impl CommandProfile {
    /// Breakpoints as `(t [s], q_c [rad/s])`.
    pub fn new(breakpoints: Vec<(f64, f64)>) -> Result<Self> {
        if breakpoints.is_empty() {
            return Err(Error::InvalidInput("profile needs at least one breakpoint".into()));
        }
        if breakpoints.iter().any(|(t, q)| !t.is_finite() || !q.is_finite()) {
            return Err(Error::InvalidInput("profile entries must be finite".into()));
        }
        if breakpoints.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::InvalidInput("profile times must be strictly increasing".into()));
        }
        let (times, rates): (Vec<f64>, Vec<f64>) = breakpoints.into_iter().unzip();
        let mut cumulative = vec![0.0; times.len()];
        for i in 1..times.len() {
            cumulative[i] =
                cumulative[i - 1] + 0.5 * (rates[i - 1] + rates[i]) * (times[i] - times[i - 1]);
        }
        let mut profile = Self {
            times,
            rates,
            cumulative,
            offset: 0.0,
        };
        profile.offset = profile.antiderivative(0.0);
        Ok(profile)
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    pub fn constant(q_c: f64) -> Self {
        Self::new(vec![(0.0, q_c)]).expect("single finite breakpoint")
    }

    /// Pitch-over stand-in: hold at zero until 2 s, ramp to −0.015 rad/s at
    /// 12 s, hold until 60 s, ramp back to zero at 80 s.
    pub fn paper_default() -> Self {
        Self::new(vec![
            (0.0, 0.0),
            (2.0, 0.0),
            (12.0, -0.015),
            (60.0, -0.015),
            (80.0, 0.0),
        ])
        .expect("static profile is valid")
    }

    pub fn breakpoints(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.times.iter().copied().zip(self.rates.iter().copied())
    }

    /// Index of the segment `[times[i], times[i+1])` containing t, if any.
    fn segment(&self, t: f64) -> Option<usize> {
        if t < self.times[0] || t >= self.times[self.times.len() - 1] {
            return None;
        }
        Some(self.times.partition_point(|ti| *ti <= t) - 1)
    }

    pub fn rate(&self, t: f64) -> f64 {
        let n = self.times.len();
        if t <= self.times[0] {
            return self.rates[0];
        }
        if t >= self.times[n - 1] {
            return self.rates[n - 1];
        }
        let i = self.segment(t).expect("inside range");
        let s = (t - self.times[i]) / (self.times[i + 1] - self.times[i]);
        self.rates[i] + s * (self.rates[i + 1] - self.rates[i])
    }

    /// Slope of the segment containing t (right-continuous); zero in the
    /// clamped regions.
    pub fn rate_derivative(&self, t: f64) -> f64 {
        match self.segment(t) {
            Some(i) => (self.rates[i + 1] - self.rates[i]) / (self.times[i + 1] - self.times[i]),
            None => 0.0,
        }
    }

    fn antiderivative(&self, t: f64) -> f64 {
        let n = self.times.len();
        if t <= self.times[0] {
            return self.rates[0] * (t - self.times[0]);
        }
        if t >= self.times[n - 1] {
            return self.cumulative[n - 1] + self.rates[n - 1] * (t - self.times[n - 1]);
        }
        let i = self.segment(t).expect("inside range");
        let dt = t - self.times[i];
        self.cumulative[i] + 0.5 * (self.rates[i] + self.rate(t)) * dt
    }

    /// `∫₀ᵗ q_c dτ`, exact for the piecewise-linear profile.
    pub fn integral(&self, t: f64) -> f64 {
        self.antiderivative(t) - self.offset
    }

    /// Reads `t,qc_deg_per_s`; rates are converted to rad/s.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers().map_err(|e| Error::Parse(e.to_string()))?.clone();
        if headers.iter().collect::<Vec<_>>() != ["t", "qc_deg_per_s"] {
            return Err(Error::Parse("profile header must be `t,qc_deg_per_s`".into()));
        }
        let mut breakpoints = Vec::new();
        for (line, record) in rdr.records().enumerate() {
            let record = record.map_err(|e| Error::Parse(e.to_string()))?;
            let [t, q_deg] = parse_row::<2>(&record, line + 2)?;
            breakpoints.push((t, q_deg.to_radians()));
        }
        Self::new(breakpoints)
    }
}

/// `[0; q̇_c − M_q q_c; Z_q q_c + Z_θ ∫₀ᵗ q_c dτ]`
pub fn affine_forcing(c: &DynamicCoefficients, profile: &CommandProfile, t: f64) -> Vector3<f64> {
    let q_c = profile.rate(t);
    Vector3::new(
        0.0,
        profile.rate_derivative(t) - c.m_q * q_c,
        c.z_q * q_c + c.z_theta * profile.integral(t),
    )
}

/// `ẋ̂ = A x̂ + B u + B_w w + f(t)` for coefficients already resolved at t.
pub fn pitch_derivative(
    x: &Vector3<f64>,
    u: f64,
    w: &Vector2<f64>,
    coeffs: &DynamicCoefficients,
    profile: &CommandProfile,
    t: f64,
) -> Vector3<f64> {
    let plant = assemble_pitch_plant(coeffs);
    plant.a * x + plant.b * u + plant.bw * w + affine_forcing(coeffs, profile, t)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Attitude {
    /// Pitch angle, rad.
    pub theta: f64,
    /// Pitch rate, rad/s.
    pub q: f64,
}

/// Pitch rate and angle implied by the tracking-error state.
pub fn reconstruct_attitude(profile: &CommandProfile, x: &Vector3<f64>, t: f64) -> Attitude {
    Attitude {
        theta: profile.integral(t) - x[0],
        q: profile.rate(t) - x[1],
    }
}
