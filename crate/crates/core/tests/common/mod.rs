//! Fixtures shared by the integration tests: the two worked networks, the
//! single-queue vacation model, and a random stable-network generator.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use roving::{Discipline, DistributionSpec, Network, NetworkModel, QueueSpec, RawConfig};

pub fn network(raw: RawConfig) -> Network {
    Network::new(roving::model::validate(raw).expect("valid fixture")).expect("traffic")
}

/// Waiting room feeding a service room with feedback: queue 1 holds the
/// arrivals (zero service), queue 2 the exponential services, `m` overhead
/// services folded into an Erlang switch-over.
pub fn takacs_model(m: u32, mu: f64) -> NetworkModel {
    let lambda = mu / 6.0;
    roving::model::validate(RawConfig {
        queues: vec![
            QueueSpec {
                arrival_rate: lambda,
                service: DistributionSpec::zero(),
                switchover_after: DistributionSpec::Erlang { phases: m, rate: mu },
                discipline: Discipline::Gated,
            },
            QueueSpec {
                arrival_rate: 0.0,
                service: DistributionSpec::Exponential { rate: mu },
                switchover_after: DistributionSpec::zero(),
                discipline: Discipline::Gated,
            },
        ],
        routing: vec![vec![0.0, 0.0, 1.0], vec![2.0 / 3.0, 1.0 / 3.0, 0.0]],
    })
    .unwrap()
}

pub fn takacs(m: u32) -> Network {
    Network::new(takacs_model(m, 1.0)).unwrap()
}

/// Closed-form moments `[E W, E W^2, E W^3]` of queues 1 and 2 for `mu = 1`.
pub fn takacs_moments(m: u32) -> [[f64; 3]; 2] {
    let m = m as f64;
    [
        [
            (1.0 + m) / 2.0,
            (m + 1.0) * (11.0 * m + 25.0) / 27.0,
            (m + 1.0) * (m * (43.0 * m + 223.0) + 310.0) / 108.0,
        ],
        [
            (1.0 + 7.0 * m) / 6.0,
            (m + 1.0) * (37.0 * m + 11.0) / 27.0,
            (m + 1.0) * (m + 2.0) * (175.0 * m + 81.0) / 108.0,
        ],
    ]
}

/// Two parallel first-stage queues feeding a third, all exhaustive, scaled
/// to total load `rho`.
pub fn katayama_model(rho: f64) -> NetworkModel {
    let det = |value| DistributionSpec::Deterministic { value };
    let q = |lambda, b, r| QueueSpec {
        arrival_rate: lambda,
        service: det(b),
        switchover_after: det(r),
        discipline: Discipline::Exhaustive,
    };
    let base = roving::model::validate(RawConfig {
        queues: vec![q(0.1, 1.0, 0.0), q(1.0, 1.0, 2.0), q(0.0, 5.0, 2.0)],
        routing: vec![
            vec![0.0, 0.0, 0.0, 1.0],
            vec![0.0, 0.0, 0.0, 1.0],
            vec![1.0, 0.0, 0.0, 0.0],
        ],
    })
    .unwrap();
    base.with_load(rho).unwrap()
}

pub fn katayama(rho: f64) -> Network {
    Network::new(katayama_model(rho)).unwrap()
}

pub fn vacation() -> Network {
    network(RawConfig {
        queues: vec![QueueSpec {
            arrival_rate: 0.5,
            service: DistributionSpec::Exponential { rate: 1.0 },
            switchover_after: DistributionSpec::Deterministic { value: 1.0 },
            discipline: Discipline::Exhaustive,
        }],
        routing: vec![vec![1.0, 0.0]],
    })
}

fn random_distribution(rng: &mut ChaCha8Rng, mean: f64) -> DistributionSpec {
    match rng.random_range(0..5) {
        0 => DistributionSpec::Deterministic { value: mean },
        1 => DistributionSpec::Exponential { rate: 1.0 / mean },
        2 => {
            let phases = rng.random_range(2..=4);
            DistributionSpec::Erlang {
                phases,
                rate: phases as f64 / mean,
            }
        }
        3 => {
            // two phases with balanced means
            let w: f64 = rng.random_range(0.1..0.9);
            DistributionSpec::HyperExponential {
                weights: vec![w, 1.0 - w],
                rates: vec![1.0 / (2.0 * w * mean), 1.0 / (2.0 * (1.0 - w) * mean)],
            }
        }
        _ => {
            let shape = rng.random_range(0.5..3.0);
            DistributionSpec::Gamma {
                shape,
                rate: shape / mean,
            }
        }
    }
}

/// Random stable network: up to four queues, mixed disciplines and
/// families, exit probability at least 0.2 from every queue, positive total
/// switch-over time, total load in [0.1, 0.8].
pub fn fuzz_model(seed: u64) -> NetworkModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=4);
    let mut queues = Vec::with_capacity(n);
    for _ in 0..n {
        let lambda = if rng.random_bool(0.25) {
            0.0
        } else {
            rng.random_range(0.1..1.0)
        };
        let service_mean = rng.random_range(0.2..2.0);
        let service = random_distribution(&mut rng, service_mean);
        let switchover = if rng.random_bool(0.2) {
            DistributionSpec::zero()
        } else {
            let mean = rng.random_range(0.1..2.0);
            random_distribution(&mut rng, mean)
        };
        let discipline = if rng.random_bool(0.5) {
            Discipline::Gated
        } else {
            Discipline::Exhaustive
        };
        queues.push(QueueSpec {
            arrival_rate: lambda,
            service,
            switchover_after: switchover,
            discipline,
        });
    }
    if queues.iter().all(|q| q.arrival_rate == 0.0) {
        queues[0].arrival_rate = 0.5;
    }
    if queues.iter().all(|q| q.switchover_after.mean() == 0.0) {
        queues[n - 1].switchover_after = DistributionSpec::Exponential { rate: 1.0 };
    }
    let routing = (0..n)
        .map(|_| {
            let exit = rng.random_range(0.2..1.0);
            let raw: Vec<f64> = (0..n)
                .map(|_| if rng.random_bool(0.5) { rng.random::<f64>() } else { 0.0 })
                .collect();
            let total: f64 = raw.iter().sum();
            let mut row = vec![exit];
            if total > 0.0 {
                row.extend(raw.iter().map(|x| (1.0 - exit) * x / total));
            } else {
                row[0] = 1.0;
                row.extend(std::iter::repeat_n(0.0, n));
            }
            // absorb rounding so the row sums to one
            let s: f64 = row.iter().sum();
            row[0] += 1.0 - s;
            row
        })
        .collect();
    let model = roving::model::validate(RawConfig { queues, routing }).expect("fuzz model valid");
    let rho = rng.random_range(0.1..0.8);
    model.with_load(rho).expect("load targeting")
}

pub fn fuzz_network(seed: u64) -> Network {
    Network::new(fuzz_model(seed)).unwrap()
}
