//! Thrust-vector servo and rate gyro as discrete state-in/state-out blocks.

use nalgebra::{DMatrix, Vector2};

use crate::care::StateSpace;
use crate::error::{Error, Result};
use crate::simulator::rk4_step;

/// Servo time constant, s.
pub const SERVO_TAU: f64 = 0.1;
/// Deflection rate limit, 25 deg/s in rad/s.
pub const SERVO_RATE_LIMIT: f64 = 25.0 * std::f64::consts::PI / 180.0;

/// Gyro natural frequency 80π rad/s.
pub const GYRO_OMEGA_N: f64 = 80.0 * std::f64::consts::PI;
/// Gyro `2ζω_n` = 40π rad/s, so ζ = 0.25.
pub const GYRO_TWO_ZETA_OMEGA: f64 = 40.0 * std::f64::consts::PI;
/// Largest step accepted by [`GyroState::step`].
pub const GYRO_MAX_DT: f64 = 1e-3;

/// First-order lag `1/(τs + 1)` whose rate is clamped before integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ServoState {
    /// Deflection, rad.
    pub delta: f64,
    pub tau: f64,
    /// Rate limit, rad/s.
    pub rate_limit: f64,
}

impl Default for ServoState {
    fn default() -> Self {
        Self::new(0.0)
    }
}

impl ServoState {
    pub fn new(delta: f64) -> Self {
        Self {
            delta,
            tau: SERVO_TAU,
            rate_limit: SERVO_RATE_LIMIT,
        }
    }

    pub fn with_params(delta: f64, tau: f64, rate_limit: f64) -> Result<Self> {
        if !(tau > 0.0) || !(rate_limit > 0.0) {
            return Err(Error::InvalidInput(format!(
                "servo needs tau > 0 and rate_limit > 0 (got {tau}, {rate_limit})"
            )));
        }
        Ok(Self {
            delta,
            tau,
            rate_limit,
        })
    }

    /// Unconstrained rate `(δ_c − δ)/τ`.
    pub fn commanded_rate(&self, delta_c: f64) -> f64 {
        (delta_c - self.delta) / self.tau
    }

    pub fn is_rate_limited(&self, delta_c: f64) -> bool {
        self.commanded_rate(delta_c).abs() > self.rate_limit
    }

    /// One forward-Euler step with the rate saturated at `±rate_limit`.
    pub fn step(&self, delta_c: f64, dt: f64) -> Self {
        debug_assert!(dt > 0.0);
        let rate = self
            .commanded_rate(delta_c)
            .clamp(-self.rate_limit, self.rate_limit);
        Self {
            delta: self.delta + rate * dt,
            ..*self
        }
    }

    /// Linear (unsaturated) model as a state-space system.
    pub fn linear_model(&self) -> StateSpace {
        StateSpace::new(
            DMatrix::from_element(1, 1, -1.0 / self.tau),
            DMatrix::from_element(1, 1, 1.0 / self.tau),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::zeros(1, 1),
        )
        .expect("scalar model is consistent")
    }
}

/// Second-order rate gyro `ω_n² / (s² + 2ζω_n s + ω_n²)`:
/// `ẋ1 = x2`, `ẋ2 = ω_n²(q − x1) − 2ζω_n x2`, output `x1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GyroState {
    /// Measured rate, rad/s.
    pub x1: f64,
    /// Its time derivative, rad/s².
    pub x2: f64,
    pub omega_n: f64,
    pub two_zeta_omega: f64,
}

impl GyroState {
    /// Settled on `q0`.
    pub fn new(q0: f64) -> Self {
        Self {
            x1: q0,
            x2: 0.0,
            omega_n: GYRO_OMEGA_N,
            two_zeta_omega: GYRO_TWO_ZETA_OMEGA,
        }
    }

    pub fn damping(&self) -> f64 {
        self.two_zeta_omega / (2.0 * self.omega_n)
    }

    pub fn measured(&self) -> f64 {
        self.x1
    }

    /// One classical RK4 step with `q_true` held over the step.
    pub fn step(&self, q_true: f64, dt: f64) -> Result<Self> {
        if dt > GYRO_MAX_DT {
            return Err(Error::StepTooLarge {
                dt,
                limit: GYRO_MAX_DT,
            });
        }
        if !(dt > 0.0) {
            return Err(Error::InvalidInput(format!("gyro step must be positive, got {dt}")));
        }
        let wn2 = self.omega_n * self.omega_n;
        let c = self.two_zeta_omega;
        let x = Vector2::new(self.x1, self.x2);
        let next = rk4_step(
            |s: &Vector2<f64>, _| Vector2::new(s[1], wn2 * (q_true - s[0]) - c * s[1]),
            &x,
            0.0,
            dt,
        )?;
        Ok(Self {
            x1: next[0],
            x2: next[1],
            ..*self
        })
    }

    pub fn linear_model(&self) -> StateSpace {
        let wn2 = self.omega_n * self.omega_n;
        StateSpace::new(
            DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -wn2, -self.two_zeta_omega]),
            DMatrix::from_row_slice(2, 1, &[0.0, wn2]),
            DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
            DMatrix::zeros(1, 1),
        )
        .expect("second-order model is consistent")
    }
}
