//! Dense helpers shared by the Riccati solver, norm computation and tests.
//!
//! Everything here works on small `DMatrix<f64>` (n ≤ ~12) in plain 64-bit
//! arithmetic. Nothing tries to exploit structure.

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;

const SCHUR_MAX_ITER: usize = 10_000;

/// Eigenvalues of a real square matrix via the real Schur form.
pub fn eigenvalues(m: &DMatrix<f64>) -> Result<Vec<C64>> {
    if !m.is_square() {
        return Err(Error::Shape(format!(
            "eigenvalues of a {}x{} matrix",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.nrows() == 0 {
        return Ok(Vec::new());
    }
    let schur = nalgebra::linalg::Schur::try_new(m.clone(), f64::EPSILON, SCHUR_MAX_ITER)
        .ok_or(Error::NoConvergence)?;
    Ok(schur.complex_eigenvalues().iter().copied().collect())
}

/// Largest real part over the spectrum; `-inf` for an empty matrix.
pub fn spectral_abscissa(m: &DMatrix<f64>) -> Result<f64> {
    Ok(eigenvalues(m)?
        .iter()
        .map(|l| l.re)
        .fold(f64::NEG_INFINITY, f64::max))
}

pub fn frobenius(m: &DMatrix<f64>) -> f64 {
    m.norm()
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub fn all_finite(m: &DMatrix<f64>) -> bool {
    m.iter().all(|v| v.is_finite())
}

/// Smallest eigenvalue of the symmetric part of `m`.
pub fn min_symmetric_eigenvalue(m: &DMatrix<f64>) -> f64 {
    let sym = symmetrize(m);
    sym.symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Singular values sorted in descending order.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    let mut s: Vec<f64> = m.singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

pub fn complex_singular_values(m: &DMatrix<C64>) -> Vec<f64> {
    let mut s: Vec<f64> = m.singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Numerical rank with threshold `rel_tol · σ_max`.
pub fn complex_rank(m: &DMatrix<C64>, rel_tol: f64) -> usize {
    let s = complex_singular_values(m);
    let Some(&top) = s.first() else { return 0 };
    if top == 0.0 {
        return 0;
    }
    s.iter().filter(|&&v| v > rel_tol * top).count()
}

/// 2-norm condition number; infinite for a singular matrix.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let s = singular_values(m);
    match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        _ => f64::INFINITY,
    }
}

/// Orthonormal basis (as columns) of the `k` right singular vectors of `m`
/// belonging to its `k` smallest singular values.
pub fn smallest_right_singular_vectors(m: &DMatrix<f64>, k: usize) -> Result<DMatrix<f64>> {
    let n = m.ncols();
    let svd = m.clone().svd(false, true);
    let v_t = svd.v_t.ok_or(Error::NoConvergence)?;
    // Pad with zeros when m is wide so every column has a singular value.
    let mut sv: Vec<(f64, usize)> = svd
        .singular_values
        .iter()
        .copied()
        .enumerate()
        .map(|(i, s)| (s, i))
        .collect();
    sv.sort_by(|a, b| a.0.total_cmp(&b.0));
    if v_t.nrows() < n || k > sv.len() {
        return Err(Error::Shape("null space extraction needs a square matrix".into()));
    }
    let mut out = DMatrix::zeros(n, k);
    for (col, &(_, row)) in sv.iter().take(k).enumerate() {
        for j in 0..n {
            out[(j, col)] = v_t[(row, j)];
        }
    }
    Ok(out)
}

pub fn smallest_right_singular_vectors_complex(
    m: &DMatrix<C64>,
    k: usize,
) -> Result<DMatrix<C64>> {
    let n = m.ncols();
    let svd = m.clone().svd(false, true);
    let v_t = svd.v_t.ok_or(Error::NoConvergence)?;
    let mut sv: Vec<(f64, usize)> = svd
        .singular_values
        .iter()
        .copied()
        .enumerate()
        .map(|(i, s)| (s, i))
        .collect();
    sv.sort_by(|a, b| a.0.total_cmp(&b.0));
    if v_t.nrows() < n || k > sv.len() {
        return Err(Error::Shape("null space extraction needs a square matrix".into()));
    }
    let mut out = DMatrix::zeros(n, k);
    for (col, &(_, row)) in sv.iter().take(k).enumerate() {
        for j in 0..n {
            // rows of V^H are conjugated right singular vectors
            out[(j, col)] = v_t[(row, j)].conj();
        }
    }
    Ok(out)
}

pub fn to_complex(m: &DMatrix<f64>) -> DMatrix<C64> {
    m.map(|v| C64::new(v, 0.0))
}

/// Solves the continuous Lyapunov equation `Mᵀ Δ + Δ M = R` by Kronecker
/// vectorization. Only sensible for small n.
pub fn solve_lyapunov(m: &DMatrix<f64>, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    if !m.is_square() || rhs.shape() != (n, n) {
        return Err(Error::Shape("lyapunov operands must be square and equal".into()));
    }
    let eye = DMatrix::<f64>::identity(n, n);
    let mt = m.transpose();
    // vec(MᵀΔ) = (I ⊗ Mᵀ) vec Δ ; vec(ΔM) = (Mᵀ ⊗ I) vec Δ
    let op = eye.kronecker(&mt) + mt.kronecker(&eye);
    let rhs_vec = DVector::from_column_slice(rhs.as_slice());
    let sol = op
        .lu()
        .solve(&rhs_vec)
        .ok_or_else(|| Error::NoStabilizingSolution("singular Lyapunov operator".into()))?;
    Ok(DMatrix::from_column_slice(n, n, sol.as_slice()))
}

/// Frequency response `C (jωI − A)⁻¹ B + D`.
pub fn frequency_response(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    c: &DMatrix<f64>,
    d: &DMatrix<f64>,
    omega: f64,
) -> Option<DMatrix<C64>> {
    let n = a.nrows();
    let mut m = to_complex(a).map(|v| -v);
    for i in 0..n {
        m[(i, i)] += C64::new(0.0, omega);
    }
    let x = m.lu().solve(&to_complex(b))?;
    Some(to_complex(c) * x + to_complex(d))
}

/// Largest singular value of the frequency response at `omega`.
pub fn sigma_max_at(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    c: &DMatrix<f64>,
    d: &DMatrix<f64>,
    omega: f64,
) -> Option<f64> {
    let g = frequency_response(a, b, c, d, omega)?;
    Some(complex_singular_values(&g).first().copied().unwrap_or(0.0))
}
