mod common;

use nalgebra::{DMatrix, Matrix3, Vector3};

use hinf_autopilot::care::StateSpace;
use hinf_autopilot::controller::synthesize;
use hinf_autopilot::norm::hinf_norm;
use hinf_autopilot::simulator::{
    simulate, ActuatorMode, DisturbanceSpec, FeedbackSource, Metrics, PlantMode, Primitive, Scenario,
};
use hinf_autopilot::vehicle::{CoefficientSchedule, CommandProfile};

fn quiet(mut s: Scenario) -> Scenario {
    s.disturbances = DisturbanceSpec::none();
    s
}

#[test]
fn lti_run_matches_zero_order_hold_discretization() {
    let mut s = quiet(Scenario::paper_lti());
    s.profile = CommandProfile::zero();
    s.actuator = ActuatorMode::Ideal;
    s.t_span = (60.0, 70.0);
    s.initial_state = Vector3::new(0.01, -0.02, 1.5);
    let (trace, _) = simulate(&s).unwrap();

    let syn = synthesize(&s.design).unwrap();
    let a = syn.plant.a;
    let b = syn.plant.b;
    let k = syn.gain.k;
    // exp([[A, B], [0, 0]]·dt) gives Φ and Γ of the held-input step
    let mut aug = DMatrix::zeros(4, 4);
    aug.view_mut((0, 0), (3, 3)).copy_from(&a);
    aug.view_mut((0, 3), (3, 1)).copy_from(&b);
    let e = (aug * s.dt).exp();
    let phi = Matrix3::from_fn(|i, j| e[(i, j)]);
    let gamma = Vector3::from_fn(|i, _| e[(i, 3)]);
    let step = phi - gamma * k;
    let mut x = s.initial_state;
    for _ in 0..s.steps() {
        x = step * x;
    }
    let sim = trace.last().unwrap().x;
    let rel = (sim - x).norm() / x.norm();
    assert!(rel < 1e-6, "relative mismatch {rel:e}");
}

#[test]
fn halving_dt_barely_moves_rms_error() {
    for base in [Scenario::paper_ltv(), Scenario::paper_lti()] {
        let mut s = quiet(base);
        let (_, coarse) = simulate(&s).unwrap();
        s.dt /= 2.0;
        let (_, fine) = simulate(&s).unwrap();
        assert!((coarse.rms_e - fine.rms_e).abs() < 0.01 * fine.rms_e);
    }
}

#[test]
fn gyro_feedback_changes_rms_error_by_under_five_percent() {
    for base in [Scenario::paper_ltv(), Scenario::paper_lti()] {
        let (_, truth) = simulate(&base).unwrap();
        let mut g = base.clone();
        g.feedback_source = FeedbackSource::GyroRate;
        let (_, gyro) = simulate(&g).unwrap();
        assert!((truth.rms_e - gyro.rms_e).abs() < 0.05 * truth.rms_e);
    }
}

#[test]
fn runs_are_bitwise_deterministic() {
    let mut s = Scenario::paper_ltv();
    s.t_span = (60.0, 75.0);
    s.disturbances.channel2.push(Primitive::Noise { amplitude: 0.02, seed: None });
    s.disturbances.seed = 3;
    let a = simulate(&s).unwrap();
    let b = simulate(&s).unwrap();
    assert_eq!(a, b);
    s.disturbances.seed = 4;
    assert_ne!(simulate(&s).unwrap().0, a.0);
}

#[test]
fn zero_scenario_gives_zero_metrics() {
    let (trace, m) = simulate(&Scenario::zero()).unwrap();
    assert_eq!(m, Metrics::default());
    assert!(trace.samples.iter().all(|s| s.x == Vector3::zeros() && s.delta == 0.0));
}

#[test]
fn unit_energy_burst_is_attenuated_below_gamma_squared() {
    let mut s = quiet(Scenario::paper_lti());
    s.profile = CommandProfile::zero();
    for channel in [1, 2] {
        let burst = vec![
            Primitive::Step { t0: 80.0, amplitude: 1.0 },
            Primitive::Step { t0: 81.0, amplitude: -1.0 },
        ];
        let mut run = s.clone();
        match channel {
            1 => run.disturbances.channel1 = burst,
            _ => run.disturbances.channel2 = burst,
        }
        let (_, m) = simulate(&run).unwrap();
        assert!(m.energy_ratio > 0.0 && m.energy_ratio < 400.0, "{m:?}");
    }
    let syn = synthesize(&s.design).unwrap();
    let cl = StateSpace::new(
        syn.plant.a_dyn() - syn.plant.b_dyn() * syn.gain.as_matrix(),
        syn.plant.bw_dyn(),
        syn.plant.c_meas_dyn(),
        DMatrix::zeros(1, 2),
    )
    .unwrap();
    assert!(hinf_norm(&cl, 1e-6).unwrap() < 20.0);
}

#[test]
fn ltv_on_constant_schedule_equals_frozen_plant() {
    let mut ltv = quiet(Scenario::paper_lti());
    ltv.t_span = (60.0, 70.0);
    ltv.schedule = CoefficientSchedule::constant(ltv.design.coeffs);
    ltv.plant_mode = PlantMode::Ltv;
    let mut lti = ltv.clone();
    lti.plant_mode = PlantMode::LtiFrozen;
    assert_eq!(simulate(&ltv).unwrap(), simulate(&lti).unwrap());
}

#[test]
fn trace_time_grid_is_uniform_and_finite() {
    let (trace, m) = simulate(&Scenario::paper_ltv()).unwrap();
    assert_eq!(trace.len(), 500_001);
    let dt = 2e-4;
    for (k, s) in trace.samples.iter().enumerate() {
        assert!(s.is_finite());
        assert!((s.t - (60.0 + k as f64 * dt)).abs() < 1e-9);
    }
    assert!((0.0..=1.0).contains(&m.servo_saturation_fraction));
    for v in [m.rms_e, m.max_abs_e, m.rms_theta_err, m.max_abs_delta, m.energy_ratio] {
        assert!(v >= 0.0);
    }
}
