mod common;

use common::*;
use hytwin_core::plant::{build_default_plant, default_scenario, Disturbances, ScenarioSchedule};
use proptest::prelude::*;

#[test]
fn mass_closes_on_default_scenario() {
    let (change, net, scale) = mass_balance(&default_run());
    assert!((change - net).abs() <= 1e-9 * scale, "{change} vs {net}");
}

#[test]
fn energy_closes_without_heat_loss() {
    let plant = build_default_plant().with_ua_scaled(0.0);
    let (change, sum, scale) = energy_balance(&run(&plant, &default_scenario()));
    assert!((change - sum).abs() <= 1e-6 * scale, "{change} vs {sum}");
}

#[test]
fn heat_loss_shows_in_energy_balance() {
    let (change, sum, scale) = energy_balance(&default_run());
    assert!((change - sum).abs() > 1e-6 * scale);
}

#[test]
fn repeat_runs_are_bit_identical() {
    let a = default_run();
    let b = default_run();
    assert_eq!(a, b);
    assert!(a.values().iter().zip(b.values()).all(|(x, y)| x.to_bits() == y.to_bits()));
}

#[test]
fn fixed_step_grid() {
    let f = default_run();
    assert_eq!(f.len(), 3001);
    assert!(f.times().windows(2).all(|w| w[1] - w[0] == 1.0));
    let odd = ScenarioSchedule { dt: 0.7, ..step_scenario(40.0, 50.0, 100.0, 350.0) };
    let f = run(&build_default_plant(), &odd);
    assert_eq!(f.len(), 501);
    // Non-representable steps are stamped on the grid instead of accumulated.
    for (k, t) in f.times().iter().enumerate() {
        assert_eq!(*t, f.times()[0] + 0.7 * k as f64, "row {k}");
    }
}

#[test]
fn zero_duration_is_initial_row() {
    let f = run(&build_default_plant(), &step_scenario(40.0, 50.0, 1000.0, 0.0));
    assert_eq!(f.len(), 1);
}

#[test]
fn actuator_commands_in_unit_range() {
    let f = default_run();
    for tag in ["E100.u", "P100.u", "V106.u"] {
        assert!(col(&f, tag).iter().all(|u| (0.0..=1.0).contains(u)), "{tag}");
    }
}

#[test]
fn settles_at_constant_setpoint() {
    let f = run(&build_default_plant(), &step_scenario(40.0, 40.0, 0.0, 3000.0));
    let t = col(&f, "T100.T");
    let u = col(&f, "E100.u");
    let n = t.len();
    assert!((t[n - 1] - 40.0).abs() < 0.5, "final T {}", t[n - 1]);
    // Unsaturated stretches hold the setpoint closely.
    let held: Vec<f64> = (n - 600..n).filter(|&k| u[k] > 0.0 && u[k] < 1.0).map(|k| t[k]).collect();
    assert!(!held.is_empty());
    assert!(mae(&held, &vec![40.0; held.len()]) < 0.5);
}

#[test]
fn rises_after_setpoint_step() {
    let f = default_run();
    let (t, y) = (f.times(), col(&f, "T100.T"));
    let rise = rise_time(t, &y, 1000.0, 40.0, 50.0).expect("reaches the new setpoint");
    assert!(rise > 0.0 && rise < 600.0, "{rise}");
    let start = t.iter().position(|&x| x >= 1000.0).unwrap();
    let end = t.iter().position(|&x| x >= 1000.0 + rise).unwrap();
    for k in start + 1..=end {
        assert!(y[k] >= y[k - 1], "T falls at t={}", t[k]);
    }
    assert!(y[end] > y[start] + 5.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn mass_closes_for_any_scenario(
        seed in 0u64..1000,
        sp in 30.0f64..60.0,
        target in 30.0f64..60.0,
        at in 0.0f64..600.0,
        level in 0.02f64..0.4,
    ) {
        let mut d = Disturbances::excitation(seed, 600.0);
        d.level_setpoint = level;
        let sc = hytwin_core::plant::reference_scenario(
            600.0,
            hytwin_core::plant::SetpointStep { initial: sp, target, at },
            &d,
        );
        let f = run(&build_default_plant(), &sc);
        let (change, net, scale) = mass_balance(&f);
        prop_assert!((change - net).abs() <= 1e-9 * scale);

        let adiabatic = build_default_plant().with_ua_scaled(0.0);
        let (change, sum, scale) = energy_balance(&run(&adiabatic, &sc));
        prop_assert!((change - sum).abs() <= 1e-6 * scale);
    }
}
