//! Published design-point data: the two coefficient snapshots, the printed
//! Riccati solutions (4 decimals) and the printed t = 60 s gain, plus the
//! performance weightings fitted to reproduce those solutions.

use nalgebra::{DMatrix, Matrix3, RowVector3};
use serde::Serialize;

use crate::vehicle::DynamicCoefficients;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum DesignCase {
    /// Frozen plant at t = 60 s, γ = 20.
    T60,
    /// Time-varying plant designed at t = 100 s, γ = 7.8.
    T100,
}

impl DesignCase {
    pub const ALL: [DesignCase; 2] = [DesignCase::T60, DesignCase::T100];

    pub fn t_design(self) -> f64 {
        match self {
            DesignCase::T60 => 60.0,
            DesignCase::T100 => 100.0,
        }
    }

    pub fn gamma(self) -> f64 {
        match self {
            DesignCase::T60 => 20.0,
            DesignCase::T100 => 7.8,
        }
    }

    pub fn coeffs(self) -> DynamicCoefficients {
        match self {
            DesignCase::T60 => DynamicCoefficients::T60,
            DesignCase::T100 => DynamicCoefficients::T100,
        }
    }

    /// Printed X∞.
    pub fn printed_x(self) -> Matrix3<f64> {
        match self {
            DesignCase::T60 => X_T60,
            DesignCase::T100 => X_T100,
        }
    }

    /// Printed gain, where one was printed numerically.
    pub fn printed_gain(self) -> Option<RowVector3<f64>> {
        match self {
            DesignCase::T60 => Some(K_T60),
            DesignCase::T100 => None,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            DesignCase::T60 => "t=60s, gamma=20 (LTI)",
            DesignCase::T100 => "t=100s, gamma=7.8 (LTV)",
        }
    }
}

pub const X_T100: Matrix3<f64> = Matrix3::new(
    63.3031, 0.6819, 0.034, //
    0.6819, 1.8298, -0.0002, //
    0.034, -0.0002, 0.0000,
);

pub const X_T60: Matrix3<f64> = Matrix3::new(
    25.4427, 0.7938, 0.0405, //
    0.7938, 0.809, 0.0013, //
    0.0405, 0.0013, 0.0001,
);

pub const K_T60: RowVector3<f64> = RowVector3::new(1.4141, 1.5804, 0.0024);

/// Diagonal of `CᵀC` found by [`super::calibration::calibrate_weighting`],
/// frozen to 6 significant digits.
pub const CALIBRATED_STATE_WEIGHT_T60: [f64; 3] = [1.51767, 1.81958, 4.11661e-6];
pub const CALIBRATED_STATE_WEIGHT_T100: [f64; 3] = [1.10170, 13.4865, 8.35281e-8];

/// Performance weighting `C = diag(√q)` shipped as `paper-calibrated`.
pub fn calibrated_weighting(case: DesignCase) -> DMatrix<f64> {
    let q = match case {
        DesignCase::T60 => CALIBRATED_STATE_WEIGHT_T60,
        DesignCase::T100 => CALIBRATED_STATE_WEIGHT_T100,
    };
    DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(3, q.iter().map(|v| v.sqrt())))
}
