//! H∞ norm of a stable LTI system.
//!
//! Bisection on γ with the Hamiltonian test: for γ > σ_max(D) the matrix
//!
//! ```text
//! H(γ) = [ A + B R⁻¹DᵀC          B R⁻¹ Bᵀ          ]    R = γ²I − DᵀD
//!        [ −Cᵀ(I + D R⁻¹Dᵀ)C     −(A + B R⁻¹DᵀC)ᵀ  ]
//! ```
//!
//! has an imaginary-axis eigenvalue jω exactly when γ is a singular value
//! of G(jω). Candidate frequencies read off near-imaginary eigenvalues are
//! always checked against a direct σ_max evaluation, so the lower end of
//! the bracket only ever moves to values that are actually attained.

use nalgebra::DMatrix;

use crate::care::StateSpace;
use crate::error::{Error, Result};
use crate::linalg;

const GRID_POINTS: usize = 200;
const MAX_BISECTIONS: usize = 400;
/// Eigenvalues this close to the axis (relative to ‖H‖) are checked as
/// crossing candidates. Loose on purpose: false candidates only cost an
/// extra σ_max evaluation.
const CANDIDATE_REL_TOL: f64 = 1e-5;

/// `sup_ω σ_max(C(jωI − A)⁻¹B + D)` to relative tolerance `tol`.
pub fn hinf_norm(sys: &StateSpace, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::InvalidInput(format!("tolerance {tol} must be positive")));
    }
    let eigs = linalg::eigenvalues(&sys.a)?;
    let max_real = eigs.iter().map(|l| l.re).fold(f64::NEG_INFINITY, f64::max);
    if max_real >= 0.0 {
        return Err(Error::UnstableSystem { max_real });
    }
    let sigma_d = linalg::singular_values(&sys.d).first().copied().unwrap_or(0.0);
    if sys.b.norm() == 0.0 || sys.c.norm() == 0.0 || sys.order() == 0 {
        return Ok(sigma_d);
    }

    let eval = |w: f64| linalg::sigma_max_at(&sys.a, &sys.b, &sys.c, &sys.d, w).unwrap_or(0.0);

    let mut lo = sigma_d.max(eval(0.0));
    for w in initial_frequencies(&eigs) {
        lo = lo.max(eval(w));
    }
    if lo == 0.0 {
        return Ok(0.0);
    }

    let mut hi = 2.0 * lo;
    let mut iterations = 0;
    // Grow the upper bound until the Hamiltonian test clears it.
    loop {
        iterations += 1;
        if iterations > MAX_BISECTIONS {
            return Err(Error::NoConvergence);
        }
        let peak = crossing_peak(sys, hi, &eval)?;
        lo = lo.max(peak);
        if peak < hi {
            break;
        }
        hi *= 2.0;
    }

    while hi - lo > tol * lo {
        iterations += 1;
        if iterations > MAX_BISECTIONS {
            return Err(Error::NoConvergence);
        }
        let gamma = 0.5 * (lo + hi);
        let peak = crossing_peak(sys, gamma, &eval)?;
        lo = lo.max(peak);
        if peak < gamma {
            hi = gamma;
        } else if lo >= hi {
            hi = lo * (1.0 + 0.5 * tol);
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Frequencies for the initial lower bound: the modal frequencies of A and
/// a logarithmic sweep spanning its spectrum.
fn initial_frequencies(eigs: &[linalg::C64]) -> Vec<f64> {
    let mut out: Vec<f64> = eigs.iter().flat_map(|l| [l.im.abs(), l.norm()]).collect();
    let mags: Vec<f64> = eigs.iter().map(|l| l.norm()).filter(|m| *m > 0.0).collect();
    let lo = mags.iter().copied().fold(f64::INFINITY, f64::min).min(1.0) * 1e-3;
    let hi = mags.iter().copied().fold(0.0, f64::max).max(1.0) * 1e3;
    let (llo, lhi) = (lo.log10(), hi.log10());
    out.extend((0..GRID_POINTS).map(|i| {
        10f64.powf(llo + (lhi - llo) * i as f64 / (GRID_POINTS - 1) as f64)
    }));
    out
}

/// Largest σ_max found at the imaginary-axis crossing candidates of H(γ)
/// and at the midpoints between consecutive candidates; 0 if none.
fn crossing_peak(sys: &StateSpace, gamma: f64, eval: &impl Fn(f64) -> f64) -> Result<f64> {
    let h = hamiltonian(sys, gamma)?;
    let hnorm = h.norm().max(1.0);
    let mut omegas: Vec<f64> = linalg::eigenvalues(&h)?
        .into_iter()
        .filter(|l| l.re.abs() <= CANDIDATE_REL_TOL * hnorm)
        .map(|l| l.im.abs())
        .collect();
    if omegas.is_empty() {
        return Ok(0.0);
    }
    omegas.sort_by(f64::total_cmp);
    omegas.dedup();
    let mut peak = 0f64;
    for w in &omegas {
        peak = peak.max(eval(*w));
    }
    for pair in omegas.windows(2) {
        peak = peak.max(eval(0.5 * (pair[0] + pair[1])));
    }
    Ok(peak)
}

fn hamiltonian(sys: &StateSpace, gamma: f64) -> Result<DMatrix<f64>> {
    let n = sys.order();
    let (a, b, c, d) = (&sys.a, &sys.b, &sys.c, &sys.d);
    let m = b.ncols();
    let p = c.nrows();
    let r = DMatrix::identity(m, m) * (gamma * gamma) - d.transpose() * d;
    let r_inv = r
        .try_inverse()
        .ok_or_else(|| Error::InvalidInput(format!("γ = {gamma} equals a singular value of D")))?;
    let ah = a + b * &r_inv * d.transpose() * c;
    let top_right = b * &r_inv * b.transpose();
    let bottom_left = -(c.transpose() * (DMatrix::identity(p, p) + d * &r_inv * d.transpose()) * c);
    let mut h = DMatrix::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(&ah);
    h.view_mut((0, n), (n, n)).copy_from(&top_right);
    h.view_mut((n, 0), (n, n)).copy_from(&bottom_left);
    h.view_mut((n, n), (n, n)).copy_from(&(-ah.transpose()));
    Ok(h)
}
