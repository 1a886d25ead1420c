mod common;

use approx::assert_relative_eq;
use roving::analysis::{self, report, ReportConfig};
use roving::transforms::{moments_from_jet, Jet};

fn jet() -> Jet {
    Jet::variable(0.0, 4 + analysis::JET_SLACK)
}

#[test]
fn takacs_first_three_moments() {
    for m in [1, 2, 3, 5] {
        let net = common::takacs(m);
        let expected = common::takacs_moments(m);
        for (i, row) in expected.iter().enumerate() {
            let w = analysis::wait_arbitrary(&net, i, jet()).unwrap();
            let got = moments_from_jet(&w, 3).unwrap();
            for k in 0..3 {
                assert_relative_eq!(got.raw[k], row[k], max_relative = 1e-9);
            }
        }
    }
}

#[test]
fn takacs_feedback_queue_has_one_source() {
    let net = common::takacs(2);
    for w in [0.1, 0.7, 2.0] {
        let a = analysis::wait_internal(&net, 1, w).unwrap();
        let b = analysis::wait_internal_cond(&net, 1, 1, w).unwrap();
        assert_relative_eq!(a, b, epsilon = 1e-14);
        let c = analysis::wait_arbitrary(&net, 1, w).unwrap();
        assert_relative_eq!(a, c, epsilon = 1e-14);
    }
}

#[test]
fn katayama_mean_cycle() {
    let net = common::katayama(0.5);
    for i in 0..3 {
        let c = analysis::cycle_time(&net, i, jet()).unwrap();
        assert_relative_eq!(-c.coeff(1), 8.0, epsilon = 1e-9);
    }
    let a = analysis::cycle_time(&net, 0, 0.05).unwrap();
    let b = analysis::cycle_time_little(&net, 0, 0.05).unwrap();
    assert!((a - b).abs() < 1e-8, "{a} vs {b}");
}

#[test]
fn katayama_light_traffic() {
    let cfg = ReportConfig {
        omega_grid: vec![0.5, 1.0, 2.0],
        ..Default::default()
    };
    let rep = report(&common::katayama(1e-6), &cfg).unwrap();
    let sd = [(4.0f64 / 3.0).sqrt(), (4.0f64 / 3.0).sqrt()];
    for q in &rep.queues {
        let a = q.arbitrary.as_ref().unwrap();
        assert!((a.mean() - 2.0).abs() < 1e-3, "queue {} mean {}", q.queue, a.mean());
        if q.queue < 3 {
            assert!((a.sd.unwrap() - sd[q.queue - 1]).abs() < 1e-3);
        }
    }
    for s in &rep.queues[2].lst {
        let w = s.arbitrary.unwrap();
        assert!((w - (-2.0 * s.omega).exp()).abs() < 1e-3, "{} at {}", w, s.omega);
    }
}

#[test]
fn katayama_third_queue_variance_scales_with_load() {
    let var = |rho: f64| {
        let net = common::katayama(rho);
        let w = analysis::wait_arbitrary(&net, 2, jet()).unwrap();
        moments_from_jet(&w, 2).unwrap().variance.unwrap() / rho
    };
    let (a, b, c) = (var(1e-4), var(1e-6), var(1e-8));
    println!("Var[W3]/rho: {a} {b} {c}");
    assert_relative_eq!(a, b, max_relative = 1e-3);
    assert_relative_eq!(b, c, max_relative = 1e-3);
}
