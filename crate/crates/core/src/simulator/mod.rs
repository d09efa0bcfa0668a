//! Closed-loop pitch simulation: frozen H∞ gain, rate-limited servo, rate
//! gyro, scheduled coefficients and exogenous disturbances.
//!
//! Each step runs controller, servo, plant, gyro in that order, with `u` and
//! `w` held over the step.

mod disturbance;
mod integrator;
mod trace;

pub use disturbance::{DisturbanceSpec, Primitive};
pub use integrator::rk4_step;
pub use trace::{compute_metrics, Metrics, Sample, SimulationTrace, TRACE_HEADER};

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::actuators::{GyroState, ServoState, GYRO_MAX_DT};
use crate::controller::{synthesize, DesignPoint};
use crate::error::{Error, Result};
use crate::vehicle::{pitch_derivative, reconstruct_attitude, CoefficientSchedule, CommandProfile};

pub const DEFAULT_DT: f64 = 2e-4;
pub const MAX_DT: f64 = GYRO_MAX_DT;

/// Which pitch rate the controller's error channel sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedbackSource {
    #[default]
    TrueState,
    GyroRate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlantMode {
    /// Coefficients interpolated along the schedule.
    #[default]
    Ltv,
    /// Coefficients frozen at the design time.
    LtiFrozen,
}

/// How the deflection command reaches the plant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActuatorMode {
    /// Rate-limited first-order servo.
    #[default]
    Servo,
    /// `δ = u` exactly.
    Ideal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub schedule: CoefficientSchedule,
    pub profile: CommandProfile,
    pub disturbances: DisturbanceSpec,
    pub design: DesignPoint,
    pub t_span: (f64, f64),
    pub dt: f64,
    pub feedback_source: FeedbackSource,
    pub plant_mode: PlantMode,
    pub actuator: ActuatorMode,
    /// `x̂(t0)`
    pub initial_state: Vector3<f64>,
    /// Keep every n-th step in the trace (the final step is always kept).
    pub record_every: usize,
}

impl Scenario {
    /// LTV plant with the gain designed at t = 100 s, γ = 7.8.
    pub fn paper_ltv() -> Self {
        Self {
            name: "paper-ltv".into(),
            schedule: CoefficientSchedule::paper_default(),
            profile: CommandProfile::paper_default(),
            disturbances: DisturbanceSpec::paper_default(),
            design: DesignPoint::paper_ltv(),
            t_span: (60.0, 160.0),
            dt: DEFAULT_DT,
            feedback_source: FeedbackSource::TrueState,
            plant_mode: PlantMode::Ltv,
            actuator: ActuatorMode::Servo,
            initial_state: Vector3::zeros(),
            record_every: 1,
        }
    }

    /// Plant frozen at t = 60 s with the gain designed there, γ = 20.
    pub fn paper_lti() -> Self {
        Self {
            name: "paper-lti".into(),
            design: DesignPoint::paper_lti(),
            plant_mode: PlantMode::LtiFrozen,
            ..Self::paper_ltv()
        }
    }

    /// No command, no disturbance, zero initial state.
    pub fn zero() -> Self {
        Self {
            name: "zero".into(),
            profile: CommandProfile::zero(),
            disturbances: DisturbanceSpec::none(),
            ..Self::paper_lti()
        }
    }

    pub fn builtin(name: &str) -> Option<Self> {
        match name {
            "paper-ltv" => Some(Self::paper_ltv()),
            "paper-lti" => Some(Self::paper_lti()),
            "zero" => Some(Self::zero()),
            _ => None,
        }
    }

    pub const BUILTIN_NAMES: [&'static str; 3] = ["paper-ltv", "paper-lti", "zero"];

    pub fn validate(&self) -> Result<()> {
        let (t0, tf) = self.t_span;
        if !(t0.is_finite() && tf.is_finite() && t0 < tf) {
            return Err(Error::InvalidInput(format!("time span must satisfy t0 < tf, got ({t0}, {tf})")));
        }
        if !(self.dt > 0.0 && self.dt <= MAX_DT) {
            return Err(Error::InvalidInput(format!("dt must lie in (0, {MAX_DT}], got {}", self.dt)));
        }
        if self.record_every == 0 {
            return Err(Error::InvalidInput("record_every must be at least 1".into()));
        }
        if !self.initial_state.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidInput("initial state must be finite".into()));
        }
        if !(self.disturbances.noise_hold > 0.0) {
            return Err(Error::InvalidInput("noise hold interval must be positive".into()));
        }
        Ok(())
    }

    /// Number of integration steps covering the span.
    pub fn steps(&self) -> usize {
        let (t0, tf) = self.t_span;
        ((tf - t0) / self.dt - 1e-9).ceil().max(1.0) as usize
    }
}

/// Trace and metrics of a run; on divergence the trace holds every sample
/// up to the last finite one.
#[derive(Debug, Clone, PartialEq)]
pub struct Run {
    pub trace: SimulationTrace,
    pub outcome: Result<Metrics>,
}

pub fn simulate(scenario: &Scenario) -> Result<(SimulationTrace, Metrics)> {
    let run = run_scenario(scenario)?;
    let metrics = run.outcome?;
    Ok((run.trace, metrics))
}

/// Like [`simulate`] but keeps the partial trace when the state diverges.
/// Invalid scenarios and failed syntheses are still plain errors.
pub fn run_scenario(scenario: &Scenario) -> Result<Run> {
    scenario.validate()?;
    let synthesis = synthesize(&scenario.design).map_err(|e| Error::SynthesisFailed(Box::new(e)))?;
    let gain = synthesis.gain;
    let dt = scenario.dt;
    let (t0, _) = scenario.t_span;
    let n = scenario.steps();
    let profile = &scenario.profile;
    let disturbances = DisturbanceSpec {
        noise_hold: dt,
        ..scenario.disturbances.clone()
    };
    let frozen = scenario.schedule.coefficients_at(scenario.design.t_design);
    let coeffs_at = |t: f64| match scenario.plant_mode {
        PlantMode::Ltv => scenario.schedule.coefficients_at(t),
        PlantMode::LtiFrozen => frozen,
    };

    let mut x = scenario.initial_state;
    let mut servo = ServoState::new(0.0);
    let mut gyro = GyroState::new(reconstruct_attitude(profile, &x, t0).q);
    let mut trace = SimulationTrace {
        samples: Vec::with_capacity(n / scenario.record_every + 2),
    };

    for k in 0..=n {
        let t = t0 + k as f64 * dt;
        let w = disturbances.sample(t);
        let attitude = reconstruct_attitude(profile, &x, t);
        let q_feedback = match scenario.feedback_source {
            FeedbackSource::TrueState => attitude.q,
            FeedbackSource::GyroRate => gyro.measured(),
        };
        let x_ctrl = Vector3::new(x[0], profile.rate(t) - q_feedback, x[2]);
        let u = gain.control_law(&x_ctrl);
        let (delta_now, rate_limited) = match scenario.actuator {
            ActuatorMode::Servo => (servo.delta, servo.is_rate_limited(u)),
            ActuatorMode::Ideal => (u, false),
        };
        let sample = Sample {
            t,
            x,
            theta: attitude.theta,
            q: attitude.q,
            delta: delta_now,
            u,
            w,
            q_measured: gyro.measured(),
            rate_limited: rate_limited && k < n,
        };
        if !sample.is_finite() {
            return Ok(Run {
                trace,
                outcome: Err(Error::NonFiniteState { t }),
            });
        }
        if k % scenario.record_every == 0 || k == n {
            trace.samples.push(sample);
        }
        if k == n {
            break;
        }

        let delta = match scenario.actuator {
            ActuatorMode::Servo => {
                servo = servo.step(u, dt);
                servo.delta
            }
            ActuatorMode::Ideal => u,
        };
        let step = rk4_step(
            |s: &Vector3<f64>, tau| pitch_derivative(s, delta, &w, &coeffs_at(tau), profile, tau),
            &x,
            t,
            dt,
        );
        x = match step {
            Ok(next) => next,
            Err(_) => {
                return Ok(Run {
                    trace,
                    outcome: Err(Error::NonFiniteState { t: t + dt }),
                })
            }
        };
        gyro = gyro.step(attitude.q, dt)?;
    }

    let metrics = compute_metrics(&trace, profile);
    Ok(Run {
        trace,
        outcome: Ok(metrics),
    })
}

/// Disturbance at time `t`; noise terms use the default hold interval.
pub fn disturbance_sample(spec: &DisturbanceSpec, t: f64) -> Vector2<f64> {
    spec.sample(t)
}
