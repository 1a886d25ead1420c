//! Structural invariants over randomly generated networks.

mod common;

use proptest::prelude::*;
use roving::analysis::{self, JET_SLACK};
use roving::kernels::{busy_period, kernel_table};
use roving::model::{self, solve_traffic, Discipline, NetworkModel};
use roving::pgf::{boundary_pgf, cycle_map, ArgVector, Boundary};
use roving::transforms::{lst, Jet};
use roving::{Network, Tolerances};

fn jet0() -> Jet {
    Jet::variable(0.0, 2 + JET_SLACK)
}

/// The same network with every served customer leaving.
fn pure_polling(seed: u64) -> NetworkModel {
    let mut raw = common::fuzz_model(seed).to_config();
    let n = raw.queues.len();
    for row in &mut raw.routing {
        *row = std::iter::once(1.0).chain(std::iter::repeat_n(0.0, n)).collect();
    }
    model::validate(raw).unwrap().with_load(0.5).unwrap()
}

fn cases(n: u32) -> ProptestConfig {
    ProptestConfig {
        cases: n,
        ..ProptestConfig::default()
    }
}

proptest! {
    #![proptest_config(cases(64))]

    #[test]
    fn visit_rates_dominate_arrivals_and_flow_balances(seed in any::<u64>()) {
        let m = common::fuzz_model(seed);
        let t = solve_traffic(&m).unwrap();
        let mut out = 0.0;
        for i in 0..m.n() {
            prop_assert!(t.gamma[i] >= m.lambda(i) - 1e-15);
            out += t.gamma[i] * m.p_exit(i);
        }
        let inflow: f64 = (0..m.n()).map(|i| m.lambda(i)).sum();
        prop_assert!((out - inflow).abs() < 1e-10, "{out} vs {inflow}");
        prop_assert!((t.rho - t.rho_i.iter().sum::<f64>()).abs() < 1e-12);
        prop_assert!((t.mean_cycle - t.r / (1.0 - t.rho)).abs() < 1e-9 * t.mean_cycle);
    }

    #[test]
    fn relabelling_permutes_the_traffic_solution(seed in any::<u64>(), shift in 0usize..4) {
        let m = common::fuzz_model(seed);
        let n = m.n();
        let perm: Vec<usize> = (0..n).map(|k| (k + shift) % n).collect();
        let raw = m.to_config();
        let mut moved = raw.clone();
        for (new, &old) in perm.iter().enumerate() {
            moved.queues[new] = raw.queues[old].clone();
            moved.routing[new][0] = raw.routing[old][0];
            for (j, &oj) in perm.iter().enumerate() {
                moved.routing[new][1 + j] = raw.routing[old][1 + oj];
            }
        }
        let a = solve_traffic(&m).unwrap();
        let b = solve_traffic(&model::validate(moved).unwrap()).unwrap();
        prop_assert!((a.rho - b.rho).abs() < 1e-12);
        for (new, &old) in perm.iter().enumerate() {
            prop_assert!((b.gamma[new] - a.gamma[old]).abs() < 1e-12 * a.gamma[old].max(1.0));
        }
    }

    #[test]
    fn kernels_are_normalized_monotone_and_dominate_service(seed in any::<u64>()) {
        let net = common::fuzz_network(seed);
        let m = net.model();
        for i in 0..net.n() {
            let at0 = kernel_table(&net, i, jet0()).unwrap();
            for (k, b) in at0.btilde.iter().enumerate() {
                prop_assert!((b.value() - 1.0).abs() < 1e-12);
                let mean = -b.coeff(1);
                prop_assert!(mean >= m.service(m.back(i, k)).mean() - 1e-12);
            }
            for p in &at0.ptilde {
                prop_assert!((p.value() - 1.0).abs() < 1e-12);
            }
            let mut prev: Option<Vec<f64>> = None;
            for w in [0.05, 0.2, 0.7, 2.0, 6.0] {
                let t = kernel_table(&net, i, w).unwrap();
                if let Some(p) = &prev {
                    for (before, now) in p.iter().zip(&t.btilde) {
                        prop_assert!(*now <= before + 1e-14);
                    }
                }
                prev = Some(t.btilde);
            }
        }
    }

    #[test]
    fn busy_period_reproduces_itself(seed in any::<u64>(), z in 0.0f64..1.0, w in 0.0f64..5.0) {
        let net = common::fuzz_network(seed);
        let m = net.model();
        let tol = Tolerances::default();
        for i in 0..net.n() {
            let p_self = m.p(i, i);
            let lambda = m.lambda(i);
            let x = busy_period(m.service(i), lambda, p_self, z, w, &tol).unwrap();
            let s = w + (1.0 - x) * lambda;
            let b = lst(m.service(i), s).unwrap();
            let again = z * b * (1.0 - p_self) / (1.0 - p_self * b);
            prop_assert!((again - x).abs() < 1e-12, "{again} vs {x}");
        }
    }

    #[test]
    fn pgfs_are_one_at_ones_and_gates_are_consistent(seed in any::<u64>(), g1 in 0.0f64..1.0, g2 in 0.0f64..1.0) {
        let net = common::fuzz_network(seed);
        let n = net.n();
        let ones = ArgVector::ones(n, 0.0f64);
        let z: Vec<f64> = (0..n).map(|k| 0.3 + 0.6 * ((seed >> (8 * k)) & 0xff) as f64 / 255.0).collect();
        for i in 0..n {
            for b in [Boundary::VisitBegin(i), Boundary::VisitEnd(i), Boundary::SwitchBegin(i), Boundary::SwitchEnd(i)] {
                let v = boundary_pgf(&net, b, &ones).unwrap().value;
                prop_assert!((v - 1.0).abs() < 1e-10, "{b:?}: {v}");
            }
            if net.model().discipline(i) == Discipline::Gated {
                let a = boundary_pgf(&net, Boundary::SwitchBegin(i), &ArgVector::new(z.clone(), g1)).unwrap().value;
                let b = boundary_pgf(&net, Boundary::SwitchBegin(i), &ArgVector::new(z.clone(), g2)).unwrap().value;
                prop_assert!((a - b).abs() < 1e-12, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn cycle_map_contracts_towards_ones(seed in any::<u64>()) {
        let net = common::fuzz_network(seed);
        let n = net.n();
        for i in 0..n {
            let mut z = ArgVector::new(vec![0.2; n], 0.2);
            let mut dist = Vec::new();
            for _ in 0..8 {
                z = cycle_map(&net, i, &z).unwrap().0;
                dist.push(z.distance_to_ones());
            }
            for pair in dist[1..].windows(2) {
                prop_assert!(pair[1] <= pair[0] || pair[1] < 1e-15, "{dist:?}");
            }
        }
    }
}

proptest! {
    #![proptest_config(cases(32))]

    #[test]
    fn waiting_time_transforms_are_normalized_and_completely_monotone(seed in any::<u64>()) {
        let net = common::fuzz_network(seed);
        for i in 0..net.n() {
            let mut forms: Vec<Box<dyn Fn(f64) -> f64>> = vec![
                Box::new(|w| analysis::cycle_time(&net, i, w).unwrap()),
            ];
            let at0 = analysis::cycle_time(&net, i, jet0()).unwrap();
            prop_assert!((at0.value() - 1.0).abs() < 1e-9);
            if net.gamma(i) > net.model().lambda(i) {
                let v = analysis::wait_internal(&net, i, jet0()).unwrap();
                prop_assert!((v.value() - 1.0).abs() < 1e-9);
                forms.push(Box::new(|w| analysis::wait_internal(&net, i, w).unwrap()));
            }
            if net.model().lambda(i) > 0.0 {
                let v = analysis::wait_external(&net, i, jet0()).unwrap();
                prop_assert!((v.value() - 1.0).abs() < 1e-9);
                forms.push(Box::new(|w| analysis::wait_external(&net, i, w).unwrap()));
            }
            let grid: Vec<f64> = (1..=50).map(|k| 0.1 * k as f64).collect();
            for f in &forms {
                let v: Vec<f64> = grid.iter().map(|&w| f(w)).collect();
                for t in v.windows(3) {
                    prop_assert!(t[0] > 0.0 && t[1] <= t[0] + 1e-14);
                    // equal spacing, so convexity is a nonnegative second difference
                    prop_assert!(t[0] - 2.0 * t[1] + t[2] >= -1e-12, "{t:?}");
                }
            }
        }
    }

    #[test]
    fn mixture_weights_sum_to_one(seed in any::<u64>()) {
        let net = common::fuzz_network(seed);
        for i in 0..net.n() {
            if net.gamma(i) > net.model().lambda(i) {
                let s: f64 = analysis::internal_weights(&net, i).unwrap().iter().map(|(_, w)| w).sum();
                prop_assert!((s - 1.0).abs() < 1e-12, "internal {s}");
            }
            if net.model().lambda(i) > 0.0 {
                let s: f64 = analysis::external_weights(&net, i).unwrap().iter().map(|(_, w)| w).sum();
                prop_assert!((s - 1.0).abs() < 1e-12, "external {s}");
            }
        }
    }

    #[test]
    fn cycle_time_routes_agree(seed in any::<u64>(), w in 0.01f64..5.0) {
        let net = common::fuzz_network(seed);
        for i in (0..net.n()).filter(|&i| net.model().lambda(i) > 0.0) {
            let a = analysis::cycle_time(&net, i, w).unwrap();
            let b = analysis::cycle_time_little(&net, i, w).unwrap();
            prop_assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn pure_polling_has_no_internal_customers(seed in any::<u64>(), w in 0.0f64..5.0) {
        let net = Network::new(pure_polling(seed)).unwrap();
        for i in 0..net.n() {
            let t = kernel_table(&net, i, w).unwrap();
            for (k, p) in t.ptilde.iter().enumerate() {
                if net.model().discipline(net.model().back(i, k)) == Discipline::Gated {
                    prop_assert!((p - 1.0).abs() < 1e-14, "k = {k}: {p}");
                }
            }
            if net.model().lambda(i) > 0.0 {
                let a = analysis::wait_arbitrary(&net, i, w).unwrap();
                let e = analysis::wait_external(&net, i, w).unwrap();
                prop_assert!(a == e, "{a} vs {e}");
            }
        }
    }
}
