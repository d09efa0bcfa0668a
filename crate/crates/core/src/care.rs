//! γ-parameterized continuous algebraic Riccati equation
//!
//! ```text
//! XA + AᵀX − X(BBᵀ − γ⁻²B_wB_wᵀ)X + CᵀC = 0
//! ```
//!
//! solved through the stable invariant subspace of the associated
//! Hamiltonian, plus the pieces built on top of it: residual evaluation,
//! LQR as the γ → ∞ limit, and bisection for the smallest feasible γ.
//! The closed-loop H∞ norm lives in [`crate::norm`].

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, C64};

/// Relative distance from the imaginary axis below which a Hamiltonian
/// eigenvalue is treated as lying on it.
pub const IMAGINARY_AXIS_TOL: f64 = 1e-9;
/// Largest acceptable condition number of the top block `X₁`.
pub const MAX_X1_CONDITION: f64 = 1e12;
/// Rank threshold for the PBH tests, relative to σ_max.
pub const PBH_RANK_TOL: f64 = 1e-9;

const RESIDUAL_REL_TOL: f64 = 1e-8;
const PSD_REL_TOL: f64 = 1e-8;
const CLUSTER_REL_TOL: f64 = 1e-7;
const NEWTON_REFINEMENTS: usize = 3;

/// Linear time-invariant system `(A, B, C, D)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
}

impl StateSpace {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>, d: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if !a.is_square() {
            return Err(Error::Shape(format!("A is {}x{}", a.nrows(), a.ncols())));
        }
        if b.nrows() != n {
            return Err(Error::Shape(format!("B has {} rows, A has {n}", b.nrows())));
        }
        if c.ncols() != n {
            return Err(Error::Shape(format!("C has {} columns, A has {n}", c.ncols())));
        }
        if d.shape() != (c.nrows(), b.ncols()) {
            return Err(Error::Shape(format!(
                "D is {}x{}, expected {}x{}",
                d.nrows(),
                d.ncols(),
                c.nrows(),
                b.ncols()
            )));
        }
        if ![&a, &b, &c, &d].iter().all(|m| linalg::all_finite(m)) {
            return Err(Error::InvalidInput("state-space matrices must be finite".into()));
        }
        Ok(Self { a, b, c, d })
    }

    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    /// Closed loop of `ẋ = Ax + Bu + B_w w` under `u = −Kx`, seen from `w` to
    /// the stacked performance output `[C x; u]`.
    pub fn closed_loop(
        a: &DMatrix<f64>,
        b: &DMatrix<f64>,
        bw: &DMatrix<f64>,
        c: &DMatrix<f64>,
        k: &DMatrix<f64>,
    ) -> Result<Self> {
        let acl = a - b * k;
        let q = c.nrows();
        let m = k.nrows();
        let n = a.nrows();
        let mut out = DMatrix::zeros(q + m, n);
        out.rows_mut(0, q).copy_from(c);
        out.rows_mut(q, m).copy_from(&(-k));
        let d = DMatrix::zeros(q + m, bw.ncols());
        Self::new(acl, bw.clone(), out, d)
    }
}

/// Data of one γ-level Riccati problem.
#[derive(Debug, Clone, PartialEq)]
pub struct CareProblem {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub bw: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub gamma: f64,
}

impl CareProblem {
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        bw: DMatrix<f64>,
        c: DMatrix<f64>,
        gamma: f64,
    ) -> Result<Self> {
        check_problem_shapes(&a, &b, &bw, &c)?;
        if !(gamma > 0.0) {
            return Err(Error::InvalidInput(format!("gamma must be positive, got {gamma}")));
        }
        Ok(Self { a, b, bw, c, gamma })
    }

    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    /// `BBᵀ − γ⁻² B_w B_wᵀ`
    pub fn quadratic_term(&self) -> DMatrix<f64> {
        let g2 = self.gamma * self.gamma;
        &self.b * self.b.transpose() - (&self.bw * self.bw.transpose()) / g2
    }

    pub fn state_weight(&self) -> DMatrix<f64> {
        self.c.transpose() * &self.c
    }

    /// PBH stabilizability of (A, B) and detectability of (C, A). Failures
    /// come back as human-readable warnings, never as errors.
    pub fn assumption_warnings(&self) -> Vec<String> {
        assumption_warnings(&self.a, &self.b, &self.c)
    }

    /// Scale of the residual tolerance:
    /// `max(1, ‖CᵀC‖_F, ‖X‖_F²·‖BBᵀ‖_F)`.
    pub fn residual_scale(&self, x: &DMatrix<f64>) -> f64 {
        let bbt = &self.b * self.b.transpose();
        let xf = x.norm();
        1f64.max(self.state_weight().norm()).max(xf * xf * bbt.norm())
    }
}

fn check_problem_shapes(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    bw: &DMatrix<f64>,
    c: &DMatrix<f64>,
) -> Result<()> {
    let n = a.nrows();
    if !a.is_square() {
        return Err(Error::Shape(format!("A is {}x{}", a.nrows(), a.ncols())));
    }
    if b.nrows() != n || bw.nrows() != n {
        return Err(Error::Shape(format!(
            "B has {} rows and B_w has {}, A has {n}",
            b.nrows(),
            bw.nrows()
        )));
    }
    if c.ncols() != n {
        return Err(Error::Shape(format!("C has {} columns, A has {n}", c.ncols())));
    }
    if ![a, b, bw, c].iter().all(|m| linalg::all_finite(m)) {
        return Err(Error::InvalidInput("problem matrices must be finite".into()));
    }
    Ok(())
}

/// Result of a successful Riccati solve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HinfSolution {
    /// Attenuation level; `f64::INFINITY` for the LQR limit.
    pub gamma: f64,
    #[serde(serialize_with = "ser_matrix")]
    pub x: DMatrix<f64>,
    /// Feedback gain `BᵀX` (the control law applies the minus sign).
    #[serde(serialize_with = "ser_matrix")]
    pub k: DMatrix<f64>,
    /// Spectrum of `A − (BBᵀ − γ⁻²B_wB_wᵀ)X`.
    #[serde(serialize_with = "ser_complex")]
    pub closed_loop_eigs: Vec<C64>,
    /// Spectrum of `A − BK`.
    #[serde(serialize_with = "ser_complex")]
    pub nominal_closed_loop_eigs: Vec<C64>,
    /// Frobenius norm of the Riccati residual at `x`.
    pub residual: f64,
    pub warnings: Vec<String>,
}

pub(crate) fn ser_matrix<S: serde::Serializer>(m: &DMatrix<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(m.nrows()))?;
    for r in 0..m.nrows() {
        let row: Vec<f64> = m.row(r).iter().copied().collect();
        seq.serialize_element(&row)?;
    }
    seq.end()
}

pub(crate) fn ser_complex<S: serde::Serializer>(v: &[C64], s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for z in v {
        seq.serialize_element(&[z.re, z.im])?;
    }
    seq.end()
}

/// `‖XA + AᵀX − X(BBᵀ − γ⁻²B_wB_wᵀ)X + CᵀC‖_F`
pub fn care_residual(problem: &CareProblem, x: &DMatrix<f64>) -> Result<f64> {
    let n = problem.order();
    if x.shape() != (n, n) {
        return Err(Error::Shape(format!(
            "X is {}x{}, expected {n}x{n}",
            x.nrows(),
            x.ncols()
        )));
    }
    Ok(riccati_residual(&problem.a, &problem.quadratic_term(), &problem.state_weight(), x).norm())
}

fn riccati_residual(
    a: &DMatrix<f64>,
    s: &DMatrix<f64>,
    q: &DMatrix<f64>,
    x: &DMatrix<f64>,
) -> DMatrix<f64> {
    x * a + a.transpose() * x - x * s * x + q
}

/// Solves the γ-level Riccati equation for its stabilizing, positive
/// semi-definite solution.
pub fn solve_care(problem: &CareProblem) -> Result<HinfSolution> {
    let s = problem.quadratic_term();
    let q = problem.state_weight();
    let x = solve_riccati(&problem.a, &s, &q)?;
    finish(problem, s, x, problem.assumption_warnings())
}

/// Standard LQR Riccati equation `XA + AᵀX − XBBᵀX + CᵀC = 0`; the γ → ∞
/// limit of [`solve_care`].
pub fn solve_lqr(a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>) -> Result<HinfSolution> {
    let bw = DMatrix::zeros(a.nrows(), 0);
    check_problem_shapes(a, b, &bw, c)?;
    let problem = CareProblem {
        a: a.clone(),
        b: b.clone(),
        bw,
        c: c.clone(),
        gamma: f64::INFINITY,
    };
    let s = b * b.transpose();
    let x = solve_riccati(a, &s, &problem.state_weight())?;
    finish(&problem, s, x, problem.assumption_warnings())
}

fn finish(
    problem: &CareProblem,
    s: DMatrix<f64>,
    x: DMatrix<f64>,
    warnings: Vec<String>,
) -> Result<HinfSolution> {
    let a = &problem.a;
    let worst = a - &s * &x;
    let closed_loop_eigs = linalg::eigenvalues(&worst)?;
    let abscissa = closed_loop_eigs
        .iter()
        .map(|l| l.re)
        .fold(f64::NEG_INFINITY, f64::max);
    if !(abscissa < 0.0) {
        return Err(Error::NoStabilizingSolution(format!(
            "solution is not stabilizing (max real part {abscissa:e})"
        )));
    }

    let xf = x.norm();
    let min_eig = linalg::min_symmetric_eigenvalue(&x);
    if min_eig < -PSD_REL_TOL * xf.max(1.0) {
        return Err(Error::IndefiniteSolution { min_eig });
    }

    let residual = riccati_residual(a, &s, &problem.state_weight(), &x).norm();
    let scale = problem.residual_scale(&x);
    if !(residual <= RESIDUAL_REL_TOL * scale) {
        return Err(Error::NoStabilizingSolution(format!(
            "residual {residual:e} exceeds {:e}",
            RESIDUAL_REL_TOL * scale
        )));
    }

    let k = problem.b.transpose() * &x;
    let nominal_closed_loop_eigs = linalg::eigenvalues(&(a - &problem.b * &k))?;
    Ok(HinfSolution {
        gamma: problem.gamma,
        x,
        k,
        closed_loop_eigs,
        nominal_closed_loop_eigs,
        residual,
        warnings,
    })
}

/// Stabilizing solution of `XA + AᵀX − XSX + Q = 0` with symmetric `S`, `Q`.
fn solve_riccati(a: &DMatrix<f64>, s: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let mut h = DMatrix::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(a);
    h.view_mut((0, n), (n, n)).copy_from(&(-s));
    h.view_mut((n, 0), (n, n)).copy_from(&(-q));
    h.view_mut((n, n), (n, n)).copy_from(&(-a.transpose()));

    let basis = stable_invariant_subspace(&h, n)?;
    let x1 = basis.rows(0, n).clone_owned();
    let x2 = basis.rows(n, n).clone_owned();
    let cond = linalg::condition_number(&x1);
    if !(cond <= MAX_X1_CONDITION) {
        return Err(Error::NoStabilizingSolution(format!(
            "top block of the stable subspace is singular (condition {cond:e})"
        )));
    }
    // X = X₂ X₁⁻¹  ⇔  X₁ᵀ Xᵀ = X₂ᵀ
    let xt = x1
        .transpose()
        .lu()
        .solve(&x2.transpose())
        .ok_or_else(|| Error::NoStabilizingSolution("singular X1".into()))?;
    let mut x = linalg::symmetrize(&xt.transpose());

    // Newton corrections on the residual; keep each one only if it helps.
    let mut res = riccati_residual(a, s, q, &x);
    let mut res_norm = res.norm();
    for _ in 0..NEWTON_REFINEMENTS {
        if res_norm == 0.0 {
            break;
        }
        let m = a - s * &x;
        let Ok(delta) = linalg::solve_lyapunov(&m, &(-&res)) else { break };
        let candidate = linalg::symmetrize(&(&x + delta));
        let cand_res = riccati_residual(a, s, q, &candidate);
        let cand_norm = cand_res.norm();
        if !(cand_norm < res_norm) {
            break;
        }
        x = candidate;
        res = cand_res;
        res_norm = cand_norm;
    }
    Ok(x)
}

/// Real orthonormal basis (2n×n) of the invariant subspace for the
/// open-left-half-plane eigenvalues of the Hamiltonian `h`.
///
/// Eigenvalues are sorted by real part and clustered; for a cluster of
/// multiplicity k around λ the generalized eigenspace is the null space of
/// `(H − λI)^k`. Complex clusters contribute the real and imaginary parts
/// of their vectors, which also span the conjugate cluster.
fn stable_invariant_subspace(h: &DMatrix<f64>, n: usize) -> Result<DMatrix<f64>> {
    let hnorm = h.norm().max(1.0);
    let mut eigs = linalg::eigenvalues(h)?;
    if let Some(l) = eigs.iter().find(|l| l.re.abs() < IMAGINARY_AXIS_TOL * hnorm) {
        return Err(Error::NoStabilizingSolution(format!(
            "Hamiltonian eigenvalue {:.6e}{:+.6e}i on the imaginary axis",
            l.re, l.im
        )));
    }
    eigs.retain(|l| l.re < 0.0);
    if eigs.len() != n {
        return Err(Error::NoStabilizingSolution(format!(
            "stable subspace has dimension {}, expected {n}",
            eigs.len()
        )));
    }
    eigs.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));

    let tol = CLUSTER_REL_TOL * hnorm;
    let mut clusters: Vec<Vec<C64>> = Vec::new();
    for l in eigs {
        match clusters
            .iter_mut()
            .find(|c| c.iter().any(|m| (m - l).norm() <= tol))
        {
            Some(c) => c.push(l),
            None => clusters.push(vec![l]),
        }
    }

    let dim = 2 * n;
    let mut columns: Vec<nalgebra::DVector<f64>> = Vec::with_capacity(n);
    for cluster in &clusters {
        let k = cluster.len();
        let center = cluster.iter().sum::<C64>() / k as f64;
        if center.im.abs() <= tol {
            let mut shifted = h.clone();
            for i in 0..dim {
                shifted[(i, i)] -= center.re;
            }
            let power = matrix_power(&shifted, k);
            let v = linalg::smallest_right_singular_vectors(&power, k)?;
            columns.extend(v.column_iter().map(|c| c.clone_owned()));
        } else if center.im > 0.0 {
            let mut shifted = linalg::to_complex(h);
            for i in 0..dim {
                shifted[(i, i)] -= center;
            }
            let power = matrix_power(&shifted, k);
            let v = linalg::smallest_right_singular_vectors_complex(&power, k)?;
            for col in v.column_iter() {
                columns.push(col.map(|z| z.re));
                columns.push(col.map(|z| z.im));
            }
        }
    }
    if columns.len() != n {
        return Err(Error::NoStabilizingSolution(format!(
            "could not pair stable eigenvalues into a real basis ({} columns for n = {n})",
            columns.len()
        )));
    }
    let basis = DMatrix::from_columns(&columns);
    Ok(basis.qr().q())
}

fn matrix_power<T: nalgebra::ComplexField>(m: &DMatrix<T>, k: usize) -> DMatrix<T> {
    let mut out = m.clone();
    for _ in 1..k {
        out = &out * m;
    }
    out
}

pub(crate) fn assumption_warnings(a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>) -> Vec<String> {
    let mut warnings = Vec::new();
    let n = a.nrows();
    let Ok(eigs) = linalg::eigenvalues(a) else {
        warnings.push("PBH tests skipped: eigenvalues of A did not converge".to_string());
        return warnings;
    };
    let ac = linalg::to_complex(a);
    for l in eigs.iter().filter(|l| l.re >= 0.0) {
        let mut shifted = ac.clone();
        for i in 0..n {
            shifted[(i, i)] -= l;
        }
        let mut ctrb = DMatrix::<C64>::zeros(n, n + b.ncols());
        ctrb.columns_mut(0, n).copy_from(&shifted);
        ctrb.columns_mut(n, b.ncols()).copy_from(&linalg::to_complex(b));
        if linalg::complex_rank(&ctrb, PBH_RANK_TOL) < n {
            warnings.push(format!(
                "(A, B) not stabilizable: mode {:.6e}{:+.6e}i is uncontrollable",
                l.re, l.im
            ));
        }
        let mut obsv = DMatrix::<C64>::zeros(n + c.nrows(), n);
        obsv.rows_mut(0, n).copy_from(&shifted);
        obsv.rows_mut(n, c.nrows()).copy_from(&linalg::to_complex(c));
        if linalg::complex_rank(&obsv, PBH_RANK_TOL) < n {
            warnings.push(format!(
                "(C, A) not detectable: mode {:.6e}{:+.6e}i is unobservable",
                l.re, l.im
            ));
        }
    }
    warnings
}

/// One probe of the γ bisection.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GammaProbe {
    pub gamma: f64,
    pub feasible: bool,
    pub reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GammaSearch {
    pub gamma_min: f64,
    pub history: Vec<GammaProbe>,
}

/// Bisection (in log γ) for the smallest γ at which [`solve_care`] succeeds.
///
/// On return, `gamma_min` is feasible and `gamma_min·(1 − tol)` lies at or
/// below the last infeasible probe. A feasible lower bound is returned as is.
pub fn gamma_search(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    bw: &DMatrix<f64>,
    c: &DMatrix<f64>,
    bracket: (f64, f64),
    tol: f64,
) -> Result<GammaSearch> {
    let (mut lo, mut hi) = bracket;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::InvalidInput(format!("bracket ({lo}, {hi}) must satisfy 0 < lo < hi")));
    }
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::InvalidInput(format!("tolerance {tol} must lie in (0, 1)")));
    }
    check_problem_shapes(a, b, bw, c)?;
    let mut history = Vec::new();
    let mut probe = |gamma: f64| -> bool {
        let problem = CareProblem {
            a: a.clone(),
            b: b.clone(),
            bw: bw.clone(),
            c: c.clone(),
            gamma,
        };
        let outcome = solve_care(&problem);
        let feasible = outcome.is_ok();
        history.push(GammaProbe {
            gamma,
            feasible,
            reason: outcome.err().map(|e| e.to_string()),
        });
        feasible
    };

    if !probe(hi) {
        return Err(Error::BracketInvalid { upper: hi });
    }
    if probe(lo) {
        return Ok(GammaSearch { gamma_min: lo, history });
    }
    while hi * (1.0 - tol) > lo {
        let mid = (lo * hi).sqrt();
        if probe(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(GammaSearch { gamma_min: hi, history })
}
