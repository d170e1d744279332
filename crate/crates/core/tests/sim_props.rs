mod common;

use std::sync::Arc;

use dosq::codec::Phase;
use dosq::dos::{AttackStyle, DoSSequence};
use dosq::dynamics::{lookup, ControlSystem, LinearPlant, QuadraticCertificate};
use dosq::sim::{audit, run, sweep_r, write_sweep_csv, AttackSpec, Event, Outcome};
use proptest::prelude::*;

use common::{example_config, example_params};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn runs_are_deterministic(seed in any::<u64>(), bits in 2u32..=12) {
        let cfg = example_config(bits, AttackStyle::Random, seed, 3.0);
        let a = run(&cfg).unwrap();
        let b = run(&cfg).unwrap();
        prop_assert_eq!(a.rows, b.rows);
        prop_assert_eq!(a.outcome, b.outcome);
    }

    #[test]
    fn containment_and_contraction_hold_at_the_sufficient_rate(seed in any::<u64>()) {
        let p = example_params();
        let trace = run(&example_config(p.R_prop1, AttackStyle::Random, seed, 6.0)).unwrap();
        let report = audit(&trace, p);
        prop_assert!(report.envelope_applicable);
        prop_assert_eq!(report.containment.violations, 0);
        prop_assert_eq!(report.contraction.violations, 0);
        prop_assert_eq!(report.transmission_timing.violations, 0);
        prop_assert!(trace.rows.iter().all(|r| r.error_ratio <= 0.5 * (1.0 + 1e-9)));
    }
}

#[test]
fn estimate_is_held_before_the_first_success() {
    let trace = run(&example_config(4, AttackStyle::WorstCase, 0, 3.0)).unwrap();
    let z0 = trace.log.first_success().unwrap();
    assert!(z0 > 0.0);
    for r in trace.rows.iter().filter(|r| r.t < z0) {
        assert_eq!(r.phase, Phase::PreFirstSuccess);
        assert_eq!(r.xhat, vec![0.0]);
        assert_eq!(r.u, vec![0.0]);
        assert!(r.phimax.is_some());
    }
    let first = trace.rows.iter().position(|r| matches!(r.event, Event::Success { .. })).unwrap();
    assert_eq!(trace.rows[first].t, z0);
}

#[test]
fn sweep_finds_small_stabilizing_rate_and_reports_bound() {
    let p = example_params();
    let result = sweep_r(&example_config(2, AttackStyle::Random, 7, 20.0), p, 1..=16).unwrap();
    assert_eq!(result.rows.len(), 16);
    assert!(result.minimal_stabilizing.unwrap() <= 2);
    assert_eq!(result.r_thm, p.R_thm);
    let mut buf = Vec::new();
    write_sweep_csv(&result, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("R,stabilized,final_norm,outcome,"));
    assert!(text.contains(&format!("R_thm,{}", p.R_thm)));
    assert!(text.contains("R_min_stabilizing,"));
    for row in result.rows.iter().filter(|r| r.bits >= p.R_prop1) {
        assert!(row.stabilized && row.envelope_applicable);
        assert_eq!(row.clauses_passed, row.clauses_total, "R = {}", row.bits);
    }
}

#[test]
fn worst_case_needs_at_least_the_random_rate() {
    let p = example_params();
    for seed in 0..3 {
        let random = sweep_r(&example_config(2, AttackStyle::Random, seed, 20.0), p, 1..=12).unwrap();
        let worst = sweep_r(&example_config(2, AttackStyle::WorstCase, seed, 20.0), p, 1..=12).unwrap();
        assert!(worst.minimal_stabilizing.unwrap() >= random.minimal_stabilizing.unwrap());
    }
}

#[test]
fn contracting_plant_stabilizes_at_every_rate() {
    let sys = lookup("linear-contracting").unwrap();
    let mut cfg = example_config(1, AttackStyle::Random, 0, 20.0);
    cfg.system = sys;
    cfg.x0 = vec![0.5];
    cfg.f_lip = 1.0;
    cfg.attack = AttackSpec::Sequence(DoSSequence::empty(20.0));
    for bits in 1..=6 {
        cfg.bits = bits;
        let trace = run(&cfg).unwrap();
        assert!(trace.stabilized(), "R = {bits}");
        assert!(trace.rows.iter().all(|r| r.error_ratio <= 0.5 * (1.0 + 1e-9)));
    }
}

#[test]
fn understated_lipschitz_constant_overflows() {
    let unstable = ControlSystem::new(
        "unstable",
        Arc::new(LinearPlant::new(1, vec![5.0])),
        Arc::new(QuadraticCertificate::linear_feedback(0.5, 0.5, 1.0, 10.0)),
    );
    let mut cfg = example_config(2, AttackStyle::Random, 0, 5.0);
    cfg.system = unstable;
    cfg.f_lip = 0.0;
    cfg.attack = AttackSpec::Sequence(DoSSequence::empty(5.0));
    let trace = run(&cfg).unwrap();
    assert!(matches!(trace.outcome, Outcome::Overflow { .. }), "{:?}", trace.outcome);
    assert_eq!(trace.rows.last().unwrap().event, Event::Overflow);
}

#[test]
fn one_bit_under_attack_does_not_stabilize() {
    let trace = run(&example_config(1, AttackStyle::Random, 0, 20.0)).unwrap();
    assert!(!trace.stabilized());
    assert!(!matches!(trace.outcome, Outcome::Completed) || trace.final_norm() > 1e-3);
}

#[test]
fn initial_state_outside_region_is_rejected() {
    let mut cfg = example_config(2, AttackStyle::Random, 0, 1.0);
    cfg.x0 = vec![0.7];
    assert!(run(&cfg).is_err());
}
