//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.

mod common;

use std::time::Instant;

use nalgebra::{DMatrix, Matrix3, Matrix4, RowVector3, Vector3, Vector4};

use hinf_autopilot::actuators::{GyroState, ServoState, SERVO_RATE_LIMIT, SERVO_TAU};
use hinf_autopilot::care::{solve_care, solve_lqr, StateSpace};
use hinf_autopilot::cli::reproduce_report;
use hinf_autopilot::controller::reference::{DesignCase, K_T60, X_T100, X_T60};
use hinf_autopilot::controller::{gain_from_solution, synthesize, DesignPoint};
use hinf_autopilot::linalg;
use hinf_autopilot::norm::hinf_norm;
use hinf_autopilot::simulator::{
    rk4_step, simulate, DisturbanceSpec, FeedbackSource, Primitive, Scenario,
};
use hinf_autopilot::vehicle::{CommandProfile, DynamicCoefficients};

use common::*;

type Check<'a> = Box<dyn Fn() -> Outcome + 'a>;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn b_of(c: &DynamicCoefficients) -> DMatrix<f64> {
    DMatrix::from_row_slice(3, 1, &[0.0, -c.m_delta, c.z_delta])
}

fn dyn3(m: &Matrix3<f64>) -> DMatrix<f64> {
    DMatrix::from_column_slice(3, 3, m.as_slice())
}

fn max_dev(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn criterion_1() -> Outcome {
    let k = gain_from_solution(&b_of(&DynamicCoefficients::T60), &dyn3(&X_T60)).unwrap().k;
    let dev = max_dev(k.as_slice(), K_T60.as_slice());
    outcome(dev <= 5e-4, format!("K = {:.5?}, max deviation from printed gain {dev:.2e} (limit 5e-4)", k.as_slice()))
}

fn criterion_2() -> Outcome {
    // independent row-by-column product of the printed matrices
    let b = [0.0, 2.1086, -6.2007];
    let x = [[63.3031, 0.6819, 0.034], [0.6819, 1.8298, -0.0002], [0.034, -0.0002, 0.0]];
    let oracle: Vec<f64> = (0..3).map(|j| (0..3).map(|i| b[i] * x[i][j]).sum()).collect();
    let expected = [1.2270, 3.8597, -0.0004];
    let k = gain_from_solution(&b_of(&DynamicCoefficients::T100), &dyn3(&X_T100)).unwrap().k;
    let dev_oracle = max_dev(k.as_slice(), &oracle);
    let dev_expected = max_dev(k.as_slice(), &expected);
    outcome(
        dev_oracle <= 1e-12 && dev_expected <= 5e-4,
        format!(
            "K = {:.5?}; vs product oracle {dev_oracle:.1e}, vs [1.2270, 3.8597, -0.0004] {dev_expected:.2e} (limit 5e-4)",
            k.as_slice()
        ),
    )
}

fn criterion_3() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (case, design) in [(DesignCase::T60, DesignPoint::paper_lti()), (DesignCase::T100, DesignPoint::paper_ltv())] {
        let s = synthesize(&design).unwrap();
        let x = &s.solution.x;
        let dev = (x - dyn3(&case.printed_x())).abs().max();
        let problem = design.care_problem().unwrap();
        let scale = problem.residual_scale(x);
        let xnorm = linalg::frobenius(x).max(1.0);
        let asym = linalg::frobenius(&(x - x.transpose()));
        let min_eig = linalg::min_symmetric_eigenvalue(x);
        let stabilizing = s.solution.closed_loop_eigs.iter().all(|l| l.re < 0.0);
        let printed_res = hinf_autopilot::care::care_residual(&problem, &dyn3(&case.printed_x())).unwrap();
        let ok = dev <= 0.05
            && s.solution.residual <= 1e-8 * scale
            && asym <= 1e-10 * xnorm
            && min_eig >= -1e-8 * xnorm
            && stabilizing;
        pass &= ok;
        parts.push(format!(
            "t={}: max|X-X_published| {dev:.4} (limit 0.05), residual {:.1e}, printed-X residual {printed_res:.3}",
            case.t_design(),
            s.solution.residual
        ));
    }
    outcome(pass, parts.join("; "))
}

fn random_solutions() -> Vec<(RandomPlant, hinf_autopilot::care::HinfSolution)> {
    let mut r = rng(0xACCE_0004);
    (0..100)
        .filter_map(|_| {
            let p = random_plant(&mut r);
            p.feasible_solve().map(|s| (p, s))
        })
        .collect()
}

fn criterion_4(solved: &[(RandomPlant, hinf_autopilot::care::HinfSolution)]) -> Outcome {
    let mut failures = Vec::new();
    let mut worst_margin = 0f64;
    for (i, (p, s)) in solved.iter().enumerate() {
        let problem = p.problem(s.gamma);
        let scale = problem.residual_scale(&s.x);
        let xnorm = linalg::frobenius(&s.x).max(1.0);
        let asym = linalg::frobenius(&(&s.x - s.x.transpose()));
        let min_eig = linalg::min_symmetric_eigenvalue(&s.x);
        let stabilizing = s.closed_loop_eigs.iter().all(|l| l.re < 0.0)
            && s.nominal_closed_loop_eigs.iter().all(|l| l.re < 0.0);
        let cl = StateSpace::closed_loop(&p.a, &p.b, &p.bw, &p.c, &s.k).unwrap();
        let norm = hinf_norm(&cl, 1e-8).unwrap();
        worst_margin = worst_margin.max(norm / s.gamma);
        let ok = s.residual <= 1e-8 * scale
            && asym <= 1e-10 * xnorm
            && min_eig >= -1e-8 * xnorm
            && stabilizing
            && norm < s.gamma;
        if !ok {
            failures.push(i);
        }
    }
    outcome(
        failures.is_empty() && solved.len() >= 90,
        format!(
            "{} of 100 systems solved, {} violations {:?}; max ||T||/gamma = {worst_margin:.4}",
            solved.len(),
            failures.len(),
            failures
        ),
    )
}

fn criterion_5(solved: &[(RandomPlant, hinf_autopilot::care::HinfSolution)]) -> Outcome {
    let mut worst = 0f64;
    let mut failed = 0;
    for (p, _) in solved {
        match (solve_care(&p.problem(1e6)), solve_lqr(&p.a, &p.b, &p.c)) {
            (Ok(h), Ok(l)) => {
                let rel = linalg::frobenius(&(&h.x - &l.x)) / linalg::frobenius(&l.x).max(f64::MIN_POSITIVE);
                worst = worst.max(rel);
            }
            _ => failed += 1,
        }
    }
    outcome(
        failed == 0 && worst <= 1e-6,
        format!("{} systems, {failed} solve failures, max relative difference {worst:.2e} (limit 1e-6)", solved.len()),
    )
}

fn criterion_6() -> Outcome {
    let zeta: f64 = 0.25;
    let analytic = 1.0 / (2.0 * zeta * (1.0 - zeta * zeta).sqrt());
    let gyro = hinf_norm(&GyroState::new(0.0).linear_model(), 1e-9).unwrap();
    let servo = hinf_norm(&ServoState::new(0.0).linear_model(), 1e-9).unwrap();
    let mut r = rng(0xACCE_0006);
    let mut worst = 0f64;
    for _ in 0..100 {
        let (a, b, c, d) = random_stable_system(&mut r);
        let mags: Vec<f64> = linalg::eigenvalues(&a).unwrap().iter().map(|l| l.norm()).collect();
        let lo = mags.iter().copied().fold(f64::INFINITY, f64::min) * 1e-3;
        let hi = mags.iter().copied().fold(0.0, f64::max) * 1e3;
        let grid = grid_peak(&a, &b, &c, &d, (lo, hi), 100_000);
        let norm = hinf_norm(&StateSpace::new(a, b, c, d).unwrap(), 1e-9).unwrap();
        worst = worst.max((norm - grid).abs() / norm);
    }
    outcome(
        (gyro - 2.0656).abs() <= 1e-3 && (gyro - analytic).abs() <= 1e-6 && (servo - 1.0).abs() <= 1e-6 && worst <= 1e-4,
        format!(
            "gyro {gyro:.6} (analytic {analytic:.6}), servo {servo:.9}, max relative gap to 1e5-point grid {worst:.2e} (limit 1e-4)"
        ),
    )
}

fn criterion_7() -> Outcome {
    let mut r = rng(0xACCE_0007);
    let q = random_orthogonal(&mut r, 3);
    let poles = DMatrix::from_row_slice(3, 3, &[-1.0, 2.0, 0.0, -2.0, -1.0, 0.0, 0.0, 0.0, -0.5]);
    let a = Matrix3::from_iterator((&q * poles * q.transpose()).iter().copied());
    let x0 = Vector3::new(1.0, -0.5, 0.25);
    let t_end = 2.0;
    let truth = (a * t_end).exp() * x0;
    let err = |dt: f64| {
        let steps = (t_end / dt).round() as usize;
        let mut x = x0;
        for k in 0..steps {
            x = rk4_step(|s: &Vector3<f64>, _| a * s, &x, k as f64 * dt, dt).unwrap();
        }
        (x - truth).norm()
    };
    let errors: Vec<f64> = [0.2, 0.1, 0.05, 0.025].iter().map(|&dt| err(dt)).collect();
    let ratios: Vec<f64> = errors.windows(2).map(|w| w[0] / w[1]).collect();
    outcome(
        ratios.iter().all(|&r| r >= 12.0),
        format!(
            "errors [{}], reduction ratios {ratios:.2?} (each >= 12)",
            errors.iter().map(|e| format!("{e:.2e}")).collect::<Vec<_>>().join(", ")
        ),
    )
}

fn shipped_scenarios() -> Vec<Scenario> {
    let mut out = Vec::new();
    for name in Scenario::BUILTIN_NAMES {
        let s = Scenario::builtin(name).unwrap();
        let mut gyro = s.clone();
        gyro.feedback_source = FeedbackSource::GyroRate;
        gyro.name.push_str("+gyro");
        out.push(s);
        out.push(gyro);
    }
    out
}

fn criterion_8() -> Outcome {
    let limit = SERVO_RATE_LIMIT + 1e-12;
    let mut parts = Vec::new();
    let mut pass = true;
    for s in shipped_scenarios() {
        let (trace, _) = simulate(&s).unwrap();
        let rate = trace.max_deflection_rate();
        pass &= rate <= limit;
        parts.push(format!("{} {rate:.4}", s.name));
    }
    outcome(pass, format!("max |d delta/dt| rad/s: {} (limit {limit:.6})", parts.join(", ")))
}

/// Closed loop of plant + first-order servo under `u = −K x̂` at frozen
/// coefficients, state `[∫e, e, v_z, δ]`.
fn servo_loop(c: &DynamicCoefficients, k: &RowVector3<f64>) -> Matrix4<f64> {
    let mut m = Matrix4::zeros();
    m[(0, 1)] = 1.0;
    m[(1, 1)] = c.m_q;
    m[(1, 2)] = -c.m_v;
    m[(1, 3)] = -c.m_delta;
    m[(2, 0)] = -c.z_theta;
    m[(2, 1)] = -c.z_q;
    m[(2, 2)] = c.z_v;
    m[(2, 3)] = c.z_delta;
    for j in 0..3 {
        m[(3, j)] = -k[j] / SERVO_TAU;
    }
    m[(3, 3)] = -1.0 / SERVO_TAU;
    m
}

fn criterion_9() -> Outcome {
    let q_c = -0.015;
    let mut s = Scenario::paper_lti();
    s.disturbances = DisturbanceSpec::none();
    s.profile = CommandProfile::constant(q_c);
    let (trace, _) = simulate(&s).unwrap();
    let last = trace.last().unwrap();
    let e_tf = last.x[1];

    // Oracle: with q_c constant the forcing is f0 + f1·t
    // (f0 = [0, −M_q q_c, Z_q q_c], f1 = [0, 0, Z_θ q_c]); the loop's affine
    // particular solution is p0 + p1·t with M p1 + f1 = 0 and M p0 + f0 = p1.
    let c = DynamicCoefficients::T60;
    let k = synthesize(&s.design).unwrap().gain.k;
    let m = servo_loop(&c, &k);
    let lu = m.lu();
    let f0 = Vector4::new(0.0, -c.m_q * q_c, c.z_q * q_c, 0.0);
    let f1 = Vector4::new(0.0, 0.0, c.z_theta * q_c, 0.0);
    let p1 = lu.solve(&(-f1)).unwrap();
    let p0 = lu.solve(&(p1 - f0)).unwrap();
    let e_oracle = p0[1] + p1[1] * last.t;
    outcome(
        e_tf.abs() < 1e-6,
        format!(
            "|e(tf)| = {:.3e} rad/s (limit 1e-6); affine-equilibrium oracle e = {e_oracle:.3e} rad/s; slowest closed-loop pole {:.4}",
            e_tf.abs(),
            linalg::spectral_abscissa(&DMatrix::from_column_slice(4, 4, m.as_slice())).unwrap()
        ),
    )
}

fn criterion_10() -> Outcome {
    let gamma = 20.0;
    let design = DesignPoint::paper_lti();
    let syn = synthesize(&design).unwrap();
    let cl = StateSpace::new(
        syn.plant.a_dyn() - syn.plant.b_dyn() * syn.gain.as_matrix(),
        syn.plant.bw_dyn(),
        syn.plant.c_meas_dyn(),
        DMatrix::zeros(1, 2),
    )
    .unwrap();
    let norm = hinf_norm(&cl, 1e-6).unwrap();
    let primitives = [
        ("step", Primitive::Step { t0: 70.0, amplitude: 0.05 }),
        ("sine", Primitive::Sine { amplitude: 0.02, frequency: 2.0, phase: 0.0 }),
        ("ramp", Primitive::Ramp { t0: 70.0, slope: 1e-3 }),
        ("noise", Primitive::Noise { amplitude: 0.05, seed: Some(11) }),
    ];
    let mut pass = norm < gamma;
    let mut parts = Vec::new();
    let mut worst = 0f64;
    for channel in [1, 2] {
        for (label, p) in &primitives {
            let mut s = Scenario::paper_lti();
            s.profile = CommandProfile::zero();
            s.disturbances = DisturbanceSpec::none();
            match channel {
                1 => s.disturbances.channel1.push(p.clone()),
                _ => s.disturbances.channel2.push(p.clone()),
            }
            let (_, m) = simulate(&s).unwrap();
            pass &= m.energy_ratio < gamma * gamma && m.energy_ratio > 0.0;
            worst = worst.max(m.energy_ratio);
            parts.push(format!("{label}@w{channel} {:.2e}", m.energy_ratio));
        }
    }
    outcome(
        pass,
        format!(
            "energy ratios {} (max {worst:.2e} < gamma^2 = {}); ||T_ew||^2 = {:.3e}",
            parts.join(", "),
            gamma * gamma,
            norm * norm
        ),
    )
}

fn criterion_11() -> Outcome {
    let mut noisy = Scenario::paper_ltv();
    noisy.disturbances.channel1.push(Primitive::Noise { amplitude: 0.01, seed: None });
    noisy.disturbances.seed = 42;
    let a = simulate(&noisy).unwrap();
    let b = simulate(&noisy).unwrap();
    let deterministic = a == b;

    let mut pass = deterministic;
    let mut parts = vec![format!("determinism {}", if deterministic { "ok" } else { "broken" })];
    for base in [Scenario::paper_ltv(), Scenario::paper_lti()] {
        let mut s = base.clone();
        s.disturbances.channel1.clear();
        s.disturbances.channel2.clear();
        let (_, coarse) = simulate(&s).unwrap();
        s.dt /= 2.0;
        let (_, fine) = simulate(&s).unwrap();
        let change = (coarse.rms_e - fine.rms_e).abs() / fine.rms_e;
        pass &= change < 0.01;
        parts.push(format!("{} dt-halving rms_e change {change:.2e}", base.name));
    }
    let report = reproduce_report().unwrap();
    let has_comparison = report.contains("paper-ltv") && report.contains("paper-lti");
    pass &= has_comparison;
    parts.push(format!("LTV-vs-LTI comparison emitted: {has_comparison}"));
    outcome(pass, parts.join("; "))
}

fn main() {
    let start = Instant::now();
    let solved = random_solutions();
    let criteria: Vec<(u32, &str, Check)> = vec![
        (1, "gain fixture t=60", Box::new(criterion_1)),
        (2, "gain fixture t=100", Box::new(criterion_2)),
        (3, "X-matrix reproduction", Box::new(criterion_3)),
        (4, "Riccati property suite", Box::new(|| criterion_4(&solved))),
        (5, "LQR limit", Box::new(|| criterion_5(&solved))),
        (6, "norm computation", Box::new(criterion_6)),
        (7, "integrator order", Box::new(criterion_7)),
        (8, "servo rate bound", Box::new(criterion_8)),
        (9, "tracking with integral action", Box::new(criterion_9)),
        (10, "time-domain attenuation", Box::new(criterion_10)),
        (11, "figure substitutes: determinism, step-size robustness, comparison", Box::new(criterion_11)),
    ];
    let mut failed = 0;
    for (id, title, check) in &criteria {
        let t = Instant::now();
        let o = check();
        if !o.pass {
            failed += 1;
        }
        println!(
            "{} criterion {id:>2} ({title}) [{:.2}s]: {}",
            if o.pass { "PASS" } else { "FAIL" },
            t.elapsed().as_secs_f64(),
            o.detail
        );
    }
    println!(
        "acceptance: {} passed, {failed} failed ({:.1}s)",
        criteria.len() - failed,
        start.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
