//! One replication of the cyclic server. The server's activities are
//! strictly sequential, so time advances service by service and switch-over
//! by switch-over; external arrivals falling inside each interval are
//! delivered in order before the interval ends.

use std::collections::{BTreeMap, VecDeque};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp, Gamma};
use serde::{Deserialize, Serialize};

use super::stats::Acc;
use super::SimConfig;
use crate::model::{Discipline, DistributionSpec, NetworkModel};

#[derive(Debug, Clone)]
enum Sampler {
    Fixed(f64),
    Exp(Exp<f64>),
    Gamma(Gamma<f64>),
    Mixture(WeightedIndex<f64>, Vec<Exp<f64>>),
}

impl Sampler {
    fn new(d: &DistributionSpec) -> Sampler {
        let exp = |rate: f64| Exp::new(rate).expect("validated rate");
        match d {
            DistributionSpec::Deterministic { value } => Sampler::Fixed(*value),
            DistributionSpec::Exponential { rate } => Sampler::Exp(exp(*rate)),
            DistributionSpec::Erlang { phases, rate } => {
                Sampler::Gamma(Gamma::new(*phases as f64, 1.0 / rate).expect("validated erlang"))
            }
            DistributionSpec::HyperExponential { weights, rates } => Sampler::Mixture(
                WeightedIndex::new(weights).expect("validated weights"),
                rates.iter().map(|r| exp(*r)).collect(),
            ),
            DistributionSpec::Gamma { shape, rate } => {
                Sampler::Gamma(Gamma::new(*shape, 1.0 / rate).expect("validated gamma"))
            }
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            Sampler::Fixed(v) => *v,
            Sampler::Exp(e) => e.sample(rng),
            Sampler::Gamma(g) => g.sample(rng),
            Sampler::Mixture(pick, phases) => phases[pick.sample(rng)].sample(rng),
        }
    }
}

/// Server activity during which an external customer arrived (0-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Activity {
    Visit(usize),
    Switch(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub(crate) enum Origin {
    External(Activity),
    Internal { from: usize },
}

#[derive(Debug, Clone, Copy)]
struct Customer {
    arrival: f64,
    origin: Origin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub(crate) enum Key {
    Wait { queue: usize, external: bool },
    WaitAny(usize),
    Conditional { queue: usize, origin: Origin },
    Cycle(usize),
    QueueLength(usize),
    ServiceRate(usize),
    Throughput,
}

/// Per-batch accumulators of one replication.
#[derive(Debug, Clone, Default)]
pub(crate) struct RunRecord {
    pub stats: BTreeMap<Key, Vec<Acc>>,
    pub diverged: bool,
    pub max_backlog: usize,
}

struct Engine<'a> {
    model: &'a NetworkModel,
    cfg: &'a SimConfig,
    rng: ChaCha8Rng,
    service: Vec<Sampler>,
    switchover: Vec<Sampler>,
    routes: Vec<WeightedIndex<f64>>,
    pick_queue: Option<WeightedIndex<f64>>,
    inter_arrival: Option<Exp<f64>>,
    next_arrival: f64,
    t: f64,
    queues: Vec<VecDeque<Customer>>,
    /// Customers at each queue, the one in service included.
    present: Vec<usize>,
    backlog: usize,
    last_change: Vec<f64>,
    area: Vec<f64>,
    services: Vec<u64>,
    exits: u64,
    activity: Activity,
    batch: Option<usize>,
    record: RunRecord,
}

impl<'a> Engine<'a> {
    fn new(model: &'a NetworkModel, cfg: &'a SimConfig, replication: usize) -> Self {
        let n = model.n();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(replication as u64));
        let lambdas: Vec<f64> = (0..n).map(|i| model.lambda(i)).collect();
        let total: f64 = lambdas.iter().sum();
        let (pick_queue, inter_arrival) = if total > 0.0 {
            (
                Some(WeightedIndex::new(&lambdas).expect("positive arrival rates")),
                Some(Exp::new(total).expect("positive total rate")),
            )
        } else {
            (None, None)
        };
        let next_arrival = inter_arrival.map_or(f64::INFINITY, |e| e.sample(&mut rng));
        Engine {
            model,
            cfg,
            rng,
            service: model.queues().iter().map(|q| Sampler::new(&q.service)).collect(),
            switchover: model
                .queues()
                .iter()
                .map(|q| Sampler::new(&q.switchover_after))
                .collect(),
            routes: model
                .routing()
                .iter()
                .map(|row| WeightedIndex::new(row).expect("validated routing row"))
                .collect(),
            pick_queue,
            inter_arrival,
            next_arrival,
            t: 0.0,
            queues: vec![VecDeque::new(); n],
            present: vec![0; n],
            backlog: 0,
            last_change: vec![0.0; n],
            area: vec![0.0; n],
            services: vec![0; n],
            exits: 0,
            activity: Activity::Visit(0),
            batch: None,
            record: RunRecord::default(),
        }
    }

    fn push(&mut self, key: Key, x: f64) {
        if let Some(b) = self.batch {
            let batches = self.cfg.batches;
            self.record.stats.entry(key).or_insert_with(|| vec![Acc::default(); batches])[b].push(x);
        }
    }

    fn change(&mut self, q: usize, at: f64, up: bool) {
        self.area[q] += self.present[q] as f64 * (at - self.last_change[q]);
        self.last_change[q] = at;
        if up {
            self.present[q] += 1;
            self.backlog += 1;
            self.record.max_backlog = self.record.max_backlog.max(self.backlog);
        } else {
            self.present[q] -= 1;
            self.backlog -= 1;
        }
    }

    fn arrive(&mut self, q: usize, at: f64, origin: Origin) {
        self.change(q, at, true);
        self.queues[q].push_back(Customer { arrival: at, origin });
    }

    /// Delivers the external arrivals up to `until`. Returns false once the
    /// backlog cap is exceeded.
    fn advance(&mut self, until: f64) -> bool {
        while self.next_arrival <= until {
            let at = self.next_arrival;
            let q = self.pick_queue.as_ref().expect("arrivals imply rates").sample(&mut self.rng);
            self.arrive(q, at, Origin::External(self.activity));
            let gap = self.inter_arrival.expect("arrivals imply rates").sample(&mut self.rng);
            self.next_arrival = at + gap;
            if self.backlog > self.cfg.max_backlog {
                self.record.diverged = true;
                return false;
            }
        }
        self.t = until;
        true
    }

    fn serve_one(&mut self, q: usize) -> bool {
        let c = self.queues[q].pop_front().expect("non-empty queue");
        let wait = self.t - c.arrival;
        let external = matches!(c.origin, Origin::External(_));
        self.push(Key::Wait { queue: q, external }, wait);
        self.push(Key::WaitAny(q), wait);
        self.push(Key::Conditional { queue: q, origin: c.origin }, wait);
        let s = self.service[q].sample(&mut self.rng);
        if !self.advance(self.t + s) {
            return false;
        }
        let done = self.t;
        self.change(q, done, false);
        if self.batch.is_some() {
            self.services[q] += 1;
        }
        match self.routes[q].sample(&mut self.rng) {
            0 => {
                if self.batch.is_some() {
                    self.exits += 1;
                }
            }
            dest => self.arrive(dest - 1, done, Origin::Internal { from: q }),
        }
        true
    }

    fn reset_window(&mut self) {
        for q in 0..self.model.n() {
            self.last_change[q] = self.t;
            self.area[q] = 0.0;
            self.services[q] = 0;
        }
        self.exits = 0;
    }

    fn close_batch(&mut self, started: f64) {
        let span = self.t - started;
        for q in 0..self.model.n() {
            self.change_flush(q);
            let (len, rate) = if span > 0.0 {
                (self.area[q] / span, self.services[q] as f64 / span)
            } else {
                (0.0, 0.0)
            };
            self.push(Key::QueueLength(q), len);
            self.push(Key::ServiceRate(q), rate);
        }
        let thr = if span > 0.0 { self.exits as f64 / span } else { 0.0 };
        self.push(Key::Throughput, thr);
    }

    fn change_flush(&mut self, q: usize) {
        self.area[q] += self.present[q] as f64 * (self.t - self.last_change[q]);
        self.last_change[q] = self.t;
    }

    fn run(mut self) -> RunRecord {
        let n = self.model.n();
        let warmup = self.cfg.warmup_cycles;
        let measured = self.cfg.measured_cycles;
        let batches = self.cfg.batches as u64;
        let mut last_visit: Vec<Option<f64>> = vec![None; n];
        let mut batch_start = 0.0;
        'cycles: for cycle in 0..=warmup + measured {
            if cycle >= warmup {
                let b = ((cycle - warmup) * batches / measured.max(1)) as usize;
                if self.batch != Some(b) {
                    if self.batch.is_some() {
                        self.close_batch(batch_start);
                    }
                    if cycle == warmup + measured {
                        break;
                    }
                    self.batch = Some(b);
                    self.reset_window();
                    batch_start = self.t;
                }
            }
            for i in 0..n {
                if let Some(prev) = last_visit[i] {
                    self.push(Key::Cycle(i), self.t - prev);
                }
                last_visit[i] = Some(self.t);
                self.activity = Activity::Visit(i);
                match self.model.discipline(i) {
                    Discipline::Gated => {
                        for _ in 0..self.queues[i].len() {
                            if !self.serve_one(i) {
                                break 'cycles;
                            }
                        }
                    }
                    Discipline::Exhaustive => {
                        while !self.queues[i].is_empty() {
                            if !self.serve_one(i) {
                                break 'cycles;
                            }
                        }
                    }
                }
                self.activity = Activity::Switch(i);
                let r = self.switchover[i].sample(&mut self.rng);
                if !self.advance(self.t + r) {
                    break 'cycles;
                }
            }
        }
        self.record
    }
}

pub(crate) fn run_replication(model: &NetworkModel, cfg: &SimConfig, replication: usize) -> RunRecord {
    Engine::new(model, cfg, replication).run()
}
