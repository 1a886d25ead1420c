mod common;

use roving::analysis::{report, ReportConfig};
use roving::sim::{compare, simulate, SimConfig, SimError};
use roving::{Discipline, DistributionSpec, QueueSpec, RawConfig};

fn quick(seed: u64) -> SimConfig {
    SimConfig {
        warmup_cycles: 200,
        measured_cycles: 20_000,
        replications: 4,
        seed,
        ..Default::default()
    }
}

fn no_grid() -> ReportConfig {
    ReportConfig {
        omega_grid: Vec::new(),
        ..Default::default()
    }
}

#[test]
fn same_seed_same_estimate() {
    let model = common::katayama_model(0.4);
    let a = simulate(&model, &quick(7)).unwrap();
    let b = simulate(&model, &quick(7)).unwrap();
    assert_eq!(a, b);
    let c = simulate(&model, &quick(8)).unwrap();
    assert_ne!(a.queues[0].arbitrary, c.queues[0].arbitrary);
}

#[test]
fn no_arrivals_gives_pure_switching() {
    let model = roving::model::validate(RawConfig {
        queues: vec![
            QueueSpec {
                arrival_rate: 0.0,
                service: DistributionSpec::Exponential { rate: 1.0 },
                switchover_after: DistributionSpec::Deterministic { value: 1.5 },
                discipline: Discipline::Gated,
            },
            QueueSpec {
                arrival_rate: 0.0,
                service: DistributionSpec::Exponential { rate: 1.0 },
                switchover_after: DistributionSpec::Exponential { rate: 2.0 },
                discipline: Discipline::Exhaustive,
            },
        ],
        routing: vec![vec![1.0, 0.0, 0.0], vec![1.0, 0.0, 0.0]],
    })
    .unwrap();
    let est = simulate(&model, &quick(3)).unwrap();
    for q in &est.queues {
        assert!(q.arbitrary.is_none());
        let c = q.cycle.as_ref().unwrap();
        assert!((c.mean - 2.0).abs() < 4.0 * c.se + 1e-9, "cycle {}", c.mean);
    }
}

#[test]
fn vacation_queue_matches_decomposition() {
    let net = common::vacation();
    let est = simulate(net.model(), &quick(11)).unwrap();
    let w = est.queues[0].external.as_ref().unwrap();
    assert!((w.mean - 1.5).abs() < 4.0 * w.se, "{} +- {}", w.mean, w.se);
}

#[test]
fn little_and_flow_balance() {
    let net = common::katayama(0.5);
    let est = simulate(net.model(), &quick(5)).unwrap();
    let t = net.traffic();
    for (i, q) in est.queues.iter().enumerate() {
        let rate = q.service_rate.as_ref().unwrap();
        assert!((rate.mean - t.gamma[i]).abs() < 4.0 * rate.se + 1e-3 * t.gamma[i]);
        // L = gamma (E W + b)
        let len = q.queue_length.as_ref().unwrap();
        let w = q.arbitrary.as_ref().unwrap();
        let little = rate.mean * (w.mean + net.model().service(i).mean());
        assert!((len.mean - little).abs() < 0.02 * little, "{} vs {}", len.mean, little);
    }
    let thr = est.throughput.as_ref().unwrap();
    let lambda: f64 = (0..3).map(|i| net.model().lambda(i)).sum();
    assert!((thr.mean - lambda).abs() < 4.0 * thr.se + 1e-3 * lambda);
}

#[test]
fn takacs_agrees_with_analysis() {
    let net = common::takacs(2);
    let rep = report(&net, &no_grid()).unwrap();
    let est = simulate(net.model(), &quick(21)).unwrap();
    let cmp = compare(&rep, &est).unwrap();
    for r in &cmp.rows {
        println!("{:?}", r);
    }
    assert!(cmp.max_abs_z() < 4.5, "max |z| = {}", cmp.max_abs_z());
}

#[test]
fn mismatched_models_are_refused() {
    let rep = report(&common::takacs(1), &no_grid()).unwrap();
    let est = simulate(common::takacs(2).model(), &quick(1)).unwrap();
    assert!(matches!(compare(&rep, &est), Err(SimError::ModelMismatch { .. })));
}

#[test]
fn overload_is_flagged() {
    let model = common::katayama_model(0.5).with_load(1.2).unwrap();
    let cfg = SimConfig {
        max_backlog: 2_000,
        ..quick(2)
    };
    let est = simulate(&model, &cfg).unwrap();
    assert!(est.diverged);
}

#[test]
fn shifted_analytic_means_fail_the_comparison() {
    let net = common::katayama(0.5);
    let mut rep = report(&net, &no_grid()).unwrap();
    let est = simulate(net.model(), &quick(4)).unwrap();
    assert!(compare(&rep, &est).unwrap().passed);
    roving::sim::shift_analytic_means(&mut rep, &est, 10.0);
    let cmp = compare(&rep, &est).unwrap();
    assert!(!cmp.passed);
    assert!(cmp.rows.iter().all(|r| r.z > 6.0), "{:?}", cmp.rows);
}

#[test]
fn takacs_closed_form_means_within_ci() {
    // M = 1, mu = 1: E W1 = 1, E W2 = 4/3
    let est = simulate(common::takacs(1).model(), &quick(9)).unwrap();
    for (q, want) in est.queues.iter().zip([1.0, 4.0 / 3.0]) {
        let w = q.arbitrary.as_ref().unwrap();
        assert!((w.mean - want).abs() < 4.0 * w.se, "{} vs {want}", w.mean);
        assert_eq!(
            w.observations,
            q.internal.as_ref().map_or(0, |s| s.observations)
                + q.external.as_ref().map_or(0, |s| s.observations)
        );
    }
}
