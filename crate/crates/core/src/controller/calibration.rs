//! Fitting the performance weighting `C` to a printed Riccati solution.
//!
//! The printed X matrices carry four decimals, and the map X ↦ residual is
//! badly conditioned here (entries of A reach ~1.8e3), so a weighting is
//! scored by how closely the solver's own X matches the printed one. The
//! residual of the printed X under each weighting is reported alongside.
//!
//! Search: a coarse log grid over `CᵀC = diag(q₁, q₂, q₃)`, then Nelder–Mead
//! in log10(q) from the best few grid points. The named candidates `[0 1 0]`
//! and `I` are reported for comparison.

use argmin::core::{CostFunction, Executor, State};
use argmin::solver::neldermead::NelderMead;
use nalgebra::{DMatrix, DVector, Matrix3};
use serde::Serialize;

use super::reference::DesignCase;
use crate::care::{care_residual, solve_care, CareProblem};
use crate::linalg;
use crate::vehicle::{assemble_pitch_plant, DynamicCoefficients};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateReport {
    pub label: String,
    #[serde(serialize_with = "crate::care::ser_matrix")]
    pub c_perf: DMatrix<f64>,
    /// Frobenius residual of the printed X under this weighting.
    pub residual_of_printed: f64,
    /// Max elementwise |X_solver − X_printed|; `None` when infeasible.
    pub mismatch: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Calibration {
    pub case: DesignCase,
    /// Diagonal of `CᵀC` for the best weighting.
    pub state_weight: [f64; 3],
    pub best: CandidateReport,
    pub named: Vec<CandidateReport>,
    /// The weighting minimizing the printed-X residual over all PSD `CᵀC`.
    pub residual_optimal: CandidateReport,
    pub evaluations: usize,
}

const GRID_Q12: (f64, f64, f64) = (-2.0, 2.0, 0.5);
const GRID_Q3: (f64, f64, f64) = (-10.0, 0.0, 1.0);
const REFINE_STARTS: usize = 6;
const SIMPLEX_SIZE: f64 = 0.3;
const REFINE_TOL: f64 = 1e-9;
const REFINE_ITERS: u64 = 2000;
const RESTARTS: usize = 8;

fn problem(coeffs: &DynamicCoefficients, gamma: f64, c_perf: &DMatrix<f64>) -> CareProblem {
    let plant = assemble_pitch_plant(coeffs);
    CareProblem::new(plant.a_dyn(), plant.b_dyn(), plant.bw_dyn(), c_perf.clone(), gamma)
        .expect("pitch plant shapes are consistent")
}

fn to_dyn(m: &Matrix3<f64>) -> DMatrix<f64> {
    DMatrix::from_column_slice(3, 3, m.as_slice())
}

/// Max elementwise deviation between the solver's X and `printed`.
pub fn solution_mismatch(
    coeffs: &DynamicCoefficients,
    gamma: f64,
    c_perf: &DMatrix<f64>,
    printed: &Matrix3<f64>,
) -> Option<f64> {
    let sol = solve_care(&problem(coeffs, gamma, c_perf)).ok()?;
    Some((sol.x - to_dyn(printed)).abs().max())
}

pub fn printed_residual(
    coeffs: &DynamicCoefficients,
    gamma: f64,
    c_perf: &DMatrix<f64>,
    printed: &Matrix3<f64>,
) -> f64 {
    care_residual(&problem(coeffs, gamma, c_perf), &to_dyn(printed)).expect("3x3 operands")
}

/// `C` with `CᵀC` equal to the PSD part of the weight implied by the printed
/// X, i.e. the minimizer of the printed-X residual over all weightings.
pub fn residual_optimal_weighting(
    coeffs: &DynamicCoefficients,
    gamma: f64,
    printed: &Matrix3<f64>,
) -> DMatrix<f64> {
    let p = problem(coeffs, gamma, &DMatrix::zeros(1, 3));
    let x = to_dyn(printed);
    let implied = -(&x * &p.a + p.a.transpose() * &x - &x * p.quadratic_term() * &x);
    let eig = linalg::symmetrize(&implied).symmetric_eigen();
    let root = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    DMatrix::from_diagonal(&root) * eig.eigenvectors.transpose()
}

fn diag_weighting(log_q: &[f64; 3]) -> DMatrix<f64> {
    DMatrix::from_diagonal(&DVector::from_iterator(
        3,
        log_q.iter().map(|l| 10f64.powf(*l).sqrt()),
    ))
}

fn range((lo, hi, step): (f64, f64, f64)) -> Vec<f64> {
    let n = ((hi - lo) / step).round() as usize;
    (0..=n).map(|i| lo + step * i as f64).collect()
}

fn report(
    label: String,
    coeffs: &DynamicCoefficients,
    gamma: f64,
    c_perf: DMatrix<f64>,
    printed: &Matrix3<f64>,
) -> CandidateReport {
    CandidateReport {
        label,
        residual_of_printed: printed_residual(coeffs, gamma, &c_perf, printed),
        mismatch: solution_mismatch(coeffs, gamma, &c_perf, printed),
        c_perf,
    }
}

#[derive(Clone, Copy)]
struct Mismatch<'a> {
    coeffs: &'a DynamicCoefficients,
    gamma: f64,
    printed: &'a Matrix3<f64>,
}

impl Mismatch<'_> {
    fn eval(&self, log_q: &[f64; 3]) -> f64 {
        solution_mismatch(self.coeffs, self.gamma, &diag_weighting(log_q), self.printed)
            .unwrap_or(f64::INFINITY)
    }
}

impl CostFunction for Mismatch<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, p: &Vec<f64>) -> std::result::Result<f64, argmin::core::Error> {
        Ok(self.eval(&[p[0], p[1], p[2]]))
    }
}

fn simplex_around(p: [f64; 3], size: f64) -> Vec<Vec<f64>> {
    let mut simplex = vec![p.to_vec()];
    for axis in 0..3 {
        let mut v = p.to_vec();
        v[axis] += size;
        simplex.push(v);
    }
    simplex
}

/// Fits a diagonal weighting for one published design point.
pub fn calibrate_weighting(case: DesignCase) -> Calibration {
    let coeffs = case.coeffs();
    let gamma = case.gamma();
    let printed = case.printed_x();
    let objective = Mismatch {
        coeffs: &coeffs,
        gamma,
        printed: &printed,
    };

    let mut grid = Vec::new();
    for &a in &range(GRID_Q12) {
        for &b in &range(GRID_Q12) {
            for &c in &range(GRID_Q3) {
                let p = [a, b, c];
                grid.push((p, objective.eval(&p)));
            }
        }
    }
    grid.sort_by(|x, y| x.1.total_cmp(&y.1));

    let mut evaluations = grid.len();
    let mut refine = |start: [f64; 3]| -> Option<([f64; 3], f64)> {
        let solver = NelderMead::new(simplex_around(start, SIMPLEX_SIZE))
            .with_sd_tolerance(REFINE_TOL)
            .ok()?;
        let res = Executor::new(objective, solver)
            .configure(|state| state.max_iters(REFINE_ITERS))
            .run()
            .ok()?;
        evaluations += res.state().get_func_counts().values().sum::<u64>() as usize;
        let p = res.state().get_best_param()?;
        let p = [p[0], p[1], p[2]];
        Some((p, objective.eval(&p)))
    };

    let mut best = grid.first().map(|&(p, s)| (p, s)).unwrap_or(([0.0; 3], f64::INFINITY));
    for &(start, _) in grid.iter().filter(|(_, s)| s.is_finite()).take(REFINE_STARTS) {
        if let Some(found) = refine(start) {
            if found.1 < best.1 {
                best = found;
            }
        }
    }
    for _ in 0..RESTARTS {
        match refine(best.0) {
            Some(found) if found.1 < best.1 => best = found,
            _ => break,
        }
    }

    let mut row = DMatrix::zeros(1, 3);
    row[(0, 1)] = 1.0;
    let named = vec![
        report("[0 1 0]".into(), &coeffs, gamma, row, &printed),
        report("identity".into(), &coeffs, gamma, DMatrix::identity(3, 3), &printed),
    ];
    let residual_optimal = report(
        "residual-optimal".into(),
        &coeffs,
        gamma,
        residual_optimal_weighting(&coeffs, gamma, &printed),
        &printed,
    );
    let state_weight = best.0.map(|l| 10f64.powf(l));
    Calibration {
        case,
        state_weight,
        best: report("paper-calibrated".into(), &coeffs, gamma, diag_weighting(&best.0), &printed),
        named,
        residual_optimal,
        evaluations,
    }
}
