#![allow(dead_code)]

use nalgebra::{Complex, DMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hinf_autopilot::care::{solve_care, CareProblem, HinfSolution};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-scale..scale))
}

/// Random dense (A, B, B_w, C) with n ≤ 5; generically stabilizable and
/// detectable.
pub struct RandomPlant {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub bw: DMatrix<f64>,
    pub c: DMatrix<f64>,
}

pub fn random_plant(rng: &mut ChaCha8Rng) -> RandomPlant {
    let n = rng.random_range(1..=5);
    let m = rng.random_range(1..=2);
    let mw = rng.random_range(1..=2);
    let q = rng.random_range(1..=n);
    RandomPlant {
        a: uniform(rng, n, n, 2.0),
        b: uniform(rng, n, m, 1.0),
        bw: uniform(rng, n, mw, 1.0),
        c: uniform(rng, q, n, 1.0),
    }
}

impl RandomPlant {
    pub fn problem(&self, gamma: f64) -> CareProblem {
        CareProblem::new(self.a.clone(), self.b.clone(), self.bw.clone(), self.c.clone(), gamma).unwrap()
    }

    /// First γ in 10, 20, 40, … (up to 1e5) with a successful solve.
    pub fn feasible_solve(&self) -> Option<HinfSolution> {
        let mut gamma = 10.0;
        while gamma <= 1e5 {
            if let Ok(sol) = solve_care(&self.problem(gamma)) {
                return Some(sol);
            }
            gamma *= 2.0;
        }
        None
    }
}

/// Orthogonal matrix from the QR factors of a random matrix.
pub fn random_orthogonal(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    uniform(rng, n, n, 1.0).qr().q()
}

/// Random stable, well-damped (ζ ≥ 0.4) state-space system.
pub fn random_stable_system(rng: &mut ChaCha8Rng) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let n = rng.random_range(1..=5);
    let mut blocks = DMatrix::zeros(n, n);
    let mut i = 0;
    while i < n {
        let sigma = rng.random_range(0.2..5.0);
        if i + 1 < n && rng.random_bool(0.5) {
            let omega = sigma * rng.random_range(0.1..2.2);
            blocks[(i, i)] = -sigma;
            blocks[(i + 1, i + 1)] = -sigma;
            blocks[(i, i + 1)] = omega;
            blocks[(i + 1, i)] = -omega;
            i += 2;
        } else {
            blocks[(i, i)] = -sigma;
            i += 1;
        }
    }
    let q = random_orthogonal(rng, n);
    let a = &q * blocks * q.transpose();
    let m = rng.random_range(1..=2);
    let p = rng.random_range(1..=2);
    let b = uniform(rng, n, m, 1.0);
    let c = uniform(rng, p, n, 1.0);
    let d = if rng.random_bool(0.3) {
        uniform(rng, p, m, 0.5)
    } else {
        DMatrix::zeros(p, m)
    };
    (a, b, c, d)
}

/// σ_max of `C (jωI − A)⁻¹ B + D`, computed from scratch.
pub fn sigma_max(a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>, d: &DMatrix<f64>, omega: f64) -> f64 {
    let n = a.nrows();
    let cx = |m: &DMatrix<f64>| m.map(|v| Complex::new(v, 0.0));
    let shifted = DMatrix::from_fn(n, n, |i, j| {
        let diag = if i == j { Complex::new(0.0, omega) } else { Complex::new(0.0, 0.0) };
        diag - Complex::new(a[(i, j)], 0.0)
    });
    let resolvent_b = shifted.lu().solve(&cx(b)).expect("jω is not an eigenvalue");
    let g = cx(c) * resolvent_b + cx(d);
    g.singular_values().max()
}

/// Peak of σ_max over ω = 0 and `points` log-spaced frequencies.
pub fn grid_peak(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    c: &DMatrix<f64>,
    d: &DMatrix<f64>,
    (lo, hi): (f64, f64),
    points: usize,
) -> f64 {
    let (llo, lhi) = (lo.log10(), hi.log10());
    (0..points)
        .map(|i| 10f64.powf(llo + (lhi - llo) * i as f64 / (points - 1) as f64))
        .chain(std::iter::once(0.0))
        .map(|w| sigma_max(a, b, c, d, w))
        .fold(0.0, f64::max)
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.abs().max()
}
