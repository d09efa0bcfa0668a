//! H∞ tracking controller: design points, gain extraction `K = BᵀX` and the
//! control law `u = −K x̂`.
//!
//! Gains are computed once at a design point and then frozen; the
//! simulator applies them to whatever plant it integrates.

pub mod calibration;
pub mod reference;

use nalgebra::{DMatrix, RowVector3, Vector3};
use serde::Serialize;

use crate::care::{solve_care, CareProblem, HinfSolution};
use crate::error::{Error, Result};
use crate::linalg;
use crate::vehicle::{assemble_pitch_plant, CoefficientSchedule, DynamicCoefficients, PlantModel};

/// Operating point and weighting for one synthesis.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DesignPoint {
    pub t_design: f64,
    pub gamma: f64,
    pub coeffs: DynamicCoefficients,
    /// Performance weighting `C` in the Riccati equation (q×3).
    #[serde(serialize_with = "crate::care::ser_matrix")]
    pub c_perf: DMatrix<f64>,
}

impl DesignPoint {
    pub fn new(t_design: f64, gamma: f64, coeffs: DynamicCoefficients, c_perf: DMatrix<f64>) -> Result<Self> {
        if !(gamma > 0.0) {
            return Err(Error::InvalidInput(format!("gamma must be positive, got {gamma}")));
        }
        if c_perf.ncols() != 3 || c_perf.nrows() == 0 {
            return Err(Error::Shape(format!(
                "performance weighting is {}x{}, expected q×3",
                c_perf.nrows(),
                c_perf.ncols()
            )));
        }
        if !coeffs.is_finite() || !linalg::all_finite(&c_perf) || !t_design.is_finite() {
            return Err(Error::InvalidInput("design point must be finite".into()));
        }
        Ok(Self {
            t_design,
            gamma,
            coeffs,
            c_perf,
        })
    }

    /// Design at time `t` of a schedule.
    pub fn from_schedule(
        schedule: &CoefficientSchedule,
        t_design: f64,
        gamma: f64,
        c_perf: DMatrix<f64>,
    ) -> Result<Self> {
        Self::new(t_design, gamma, schedule.coefficients_at(t_design), c_perf)
    }

    /// Frozen-plant design: t = 60 s, γ = 20, calibrated weighting.
    pub fn paper_lti() -> Self {
        Self::new(
            60.0,
            20.0,
            DynamicCoefficients::T60,
            reference::calibrated_weighting(reference::DesignCase::T60),
        )
        .expect("static design point is valid")
    }

    /// Time-varying design: t = 100 s, γ = 7.8, calibrated weighting.
    pub fn paper_ltv() -> Self {
        Self::new(
            100.0,
            7.8,
            DynamicCoefficients::T100,
            reference::calibrated_weighting(reference::DesignCase::T100),
        )
        .expect("static design point is valid")
    }

    pub fn plant(&self) -> PlantModel {
        assemble_pitch_plant(&self.coeffs)
    }

    pub fn care_problem(&self) -> Result<CareProblem> {
        self.care_problem_at(self.gamma)
    }

    pub fn care_problem_at(&self, gamma: f64) -> Result<CareProblem> {
        let plant = self.plant();
        CareProblem::new(
            plant.a_dyn(),
            plant.b_dyn(),
            plant.bw_dyn(),
            self.c_perf.clone(),
            gamma,
        )
    }
}

/// Feedback row mapping `x̂ = [∫e, e, v_z]` to a deflection command.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerGain {
    pub k: RowVector3<f64>,
    pub origin: Option<DesignPoint>,
}

impl ControllerGain {
    pub fn new(k: RowVector3<f64>) -> Self {
        Self { k, origin: None }
    }

    /// `u = −K x̂`
    pub fn control_law(&self, x: &Vector3<f64>) -> f64 {
        -(self.k * x)[0]
    }

    pub fn as_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(1, 3, self.k.as_slice())
    }
}

/// `K = BᵀX` for the three-state pitch plant.
pub fn gain_from_solution(b: &DMatrix<f64>, x: &DMatrix<f64>) -> Result<ControllerGain> {
    if b.shape() != (3, 1) || x.shape() != (3, 3) {
        return Err(Error::Shape(format!(
            "gain needs B 3x1 and X 3x3, got {}x{} and {}x{}",
            b.nrows(),
            b.ncols(),
            x.nrows(),
            x.ncols()
        )));
    }
    let k = b.transpose() * x;
    Ok(ControllerGain::new(RowVector3::new(k[(0, 0)], k[(0, 1)], k[(0, 2)])))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Synthesis {
    pub solution: HinfSolution,
    pub gain: ControllerGain,
    pub plant: PlantModel,
}

/// Riccati solve at the design point followed by gain extraction; rejects
/// gains whose nominal closed loop `A − BK` is not Hurwitz.
pub fn synthesize(design: &DesignPoint) -> Result<Synthesis> {
    let plant = design.plant();
    let solution = solve_care(&design.care_problem()?)?;
    let mut gain = gain_from_solution(&plant.b_dyn(), &solution.x)?;
    let max_real = solution
        .nominal_closed_loop_eigs
        .iter()
        .map(|l| l.re)
        .fold(f64::NEG_INFINITY, f64::max);
    if max_real >= 0.0 {
        return Err(Error::ClosedLoopUnstable { max_real });
    }
    gain.origin = Some(design.clone());
    Ok(Synthesis {
        solution,
        gain,
        plant,
    })
}
