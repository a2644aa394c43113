//! Event-driven dynamics of the ring.
//!
//! Only arrivals are events. Between arrivals every workload drains at unit
//! rate and stops at zero, so the state is brought forward lazily when the
//! next arrival is processed.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::io;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::distributions::LengthSampler;

/// Server to the left of flow `flow`, i.e. `s_{i−1}`.
pub fn left_server(flow: usize, k: usize) -> usize {
    (flow + k - 1) % k
}

/// Server chosen by an arrival of `flow` given workloads `w`: the lesser
/// workload of `s_{i−1}` and `s_i`, with ties going to `s_{i−1}`.
pub fn route(w: &[f64], flow: usize) -> usize {
    let left = left_server(flow, w.len());
    if w[flow] < w[left] {
        flow
    } else {
        left
    }
}

/// Waiting time of a zero-length message arriving with `flow` now.
pub fn virtual_wait(w: &[f64], flow: usize) -> f64 {
    w[flow].min(w[left_server(flow, w.len())])
}

/// One line of the optional arrival log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub t: f64,
    pub flow: usize,
    pub server: usize,
    pub length: f64,
    pub w_before_min: f64,
}

/// Write records as CSV with header `t,flow,server,length,w_before_min`.
pub fn write_event_log<W: io::Write>(records: &[EventRecord], out: W) -> csv::Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    for r in records {
        wtr.serialize(r)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Workloads and cumulative work counters of the ring.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState {
    pub t: f64,
    /// Unfinished work at each server.
    pub w: Vec<f64>,
    /// Work brought by each flow so far.
    pub arrived: Vec<f64>,
    /// Work assigned to each server so far.
    pub assigned: Vec<f64>,
    /// Work completed by each server so far.
    pub served: Vec<f64>,
}

impl NetworkState {
    pub fn empty(k: usize) -> Self {
        Self { t: 0.0, w: vec![0.0; k], arrived: vec![0.0; k], assigned: vec![0.0; k], served: vec![0.0; k] }
    }

    pub fn k(&self) -> usize {
        self.w.len()
    }

    /// Drain all servers up to time `t`.
    pub fn advance_to(&mut self, t: f64) {
        let dt = t - self.t;
        debug_assert!(dt >= 0.0);
        for (w, s) in self.w.iter_mut().zip(self.served.iter_mut()) {
            let done = w.min(dt);
            *w -= done;
            *s += done;
        }
        self.t = t;
    }

    /// Process an arrival of `length` on `flow` at time `t`; returns the
    /// server it joined.
    pub fn arrive(&mut self, t: f64, flow: usize, length: f64) -> EventRecord {
        self.advance_to(t);
        let w_before_min = virtual_wait(&self.w, flow);
        let server = route(&self.w, flow);
        self.w[server] += length;
        self.arrived[flow] += length;
        self.assigned[server] += length;
        EventRecord { t, flow, server, length, w_before_min }
    }

    pub fn virtual_wait(&self, flow: usize) -> f64 {
        virtual_wait(&self.w, flow)
    }

    /// Relative error of `Σ assigned − Σ served = Σ w`.
    pub fn conservation_error(&self) -> f64 {
        let assigned: f64 = self.assigned.iter().sum();
        let served: f64 = self.served.iter().sum();
        let held: f64 = self.w.iter().sum();
        (assigned - served - held).abs() / assigned.max(1.0)
    }

    /// Relative gap between `Σ arrived` and `Σ assigned`.
    pub fn assignment_error(&self) -> f64 {
        let arrived: f64 = self.arrived.iter().sum();
        let assigned: f64 = self.assigned.iter().sum();
        (arrived - assigned).abs() / arrived.max(1.0)
    }
}

/// Arrival process of one flow: Poisson rate and length sampler, with its
/// own random stream.
#[derive(Debug, Clone)]
pub struct FlowSource {
    pub rate: f64,
    pub lengths: LengthSampler,
    rng: ChaCha8Rng,
}

impl FlowSource {
    /// Stream `stream` of the generator seeded by `seed`.
    pub fn new(rate: f64, lengths: LengthSampler, seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { rate, lengths, rng }
    }

    fn next_gap(&mut self) -> f64 {
        Exp::new(self.rate).expect("positive rate").sample(&mut self.rng)
    }

    fn next_length(&mut self) -> f64 {
        self.lengths.sample(&mut self.rng)
    }
}

#[derive(Debug, Clone, Copy)]
struct Pending {
    t: f64,
    flow: usize,
}

impl PartialEq for Pending {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Pending {}
impl PartialOrd for Pending {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Pending {
    // reversed: BinaryHeap pops the earliest arrival first
    fn cmp(&self, other: &Self) -> Ordering {
        other.t.total_cmp(&self.t).then_with(|| other.flow.cmp(&self.flow))
    }
}

/// A ring with its flow sources and pending-arrival queue.
#[derive(Debug, Clone)]
pub struct Network {
    pub state: NetworkState,
    pub sources: Vec<FlowSource>,
    pending: BinaryHeap<Pending>,
    log: Option<Vec<EventRecord>>,
}

impl Network {
    pub fn new(sources: Vec<FlowSource>) -> Self {
        let k = sources.len();
        let mut net = Self { state: NetworkState::empty(k), sources, pending: BinaryHeap::new(), log: None };
        net.reschedule_all();
        net
    }

    pub fn with_log(mut self) -> Self {
        self.log = Some(Vec::new());
        self
    }

    pub fn log(&self) -> Option<&[EventRecord]> {
        self.log.as_deref()
    }

    /// Redraw every pending arrival from the current time. Exact for Poisson
    /// flows by memorylessness; used when source rates change.
    pub fn reschedule_all(&mut self) {
        self.pending.clear();
        let now = self.state.t;
        for (flow, src) in self.sources.iter_mut().enumerate() {
            let t = now + src.next_gap();
            self.pending.push(Pending { t, flow });
        }
    }

    /// Process the next arrival.
    pub fn step(&mut self) -> EventRecord {
        let Pending { t, flow } = self.pending.pop().expect("every flow has a pending arrival");
        let length = self.sources[flow].next_length();
        let rec = self.state.arrive(t, flow, length);
        let next = t + self.sources[flow].next_gap();
        self.pending.push(Pending { t: next, flow });
        if let Some(log) = self.log.as_mut() {
            log.push(rec);
        }
        rec
    }

    /// Process all arrivals up to `horizon`, calling `on_arrival` for each,
    /// then drain the servers to `horizon`.
    /// A horizon already in the past is a no-op.
    pub fn run_until<F: FnMut(&EventRecord)>(&mut self, horizon: f64, mut on_arrival: F) {
        let horizon = horizon.max(self.state.t);
        while self.pending.peek().is_some_and(|p| p.t <= horizon) {
            let rec = self.step();
            on_arrival(&rec);
        }
        self.state.advance_to(horizon);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::MessageLengthModel;

    #[test]
    fn tie_goes_to_left_server() {
        let mut s = NetworkState::empty(4);
        let rec = s.arrive(0.0, 0, 1.0);
        assert_eq!(rec.server, 3);
        assert_eq!(s.w[3], 1.0);
        for flow in 0..4 {
            let mut s = NetworkState::empty(4);
            s.w = vec![2.0; 4];
            assert_eq!(s.arrive(0.0, flow, 1.0).server, left_server(flow, 4));
        }
    }

    #[test]
    fn lesser_workload_wins() {
        let mut s = NetworkState::empty(3);
        s.w = vec![2.0, 5.0, 0.0];
        assert_eq!(s.arrive(0.0, 1, 1.0).server, 0);
        s.w = vec![5.0, 2.0, 0.0];
        assert_eq!(route(&s.w, 1), 1);
    }

    #[test]
    fn virtual_wait_is_min_of_two() {
        assert_eq!(virtual_wait(&[0.0; 3], 0), 0.0);
        assert_eq!(virtual_wait(&[7.0, 1.0, 3.0], 0), 3.0);
    }

    #[test]
    fn workloads_drain_and_floor() {
        let mut s = NetworkState::empty(3);
        s.arrive(0.0, 1, 2.0);
        s.advance_to(0.5);
        assert_eq!(s.w[0], 1.5);
        s.advance_to(10.0);
        assert_eq!(s.w, vec![0.0; 3]);
        assert_eq!(s.served[0], 2.0);
    }

    #[test]
    fn conservation_over_random_runs() {
        let m = MessageLengthModel::mixture(1.0, 0.5).unwrap();
        for k in [3usize, 5, 8] {
            let sources = (0..k).map(|f| FlowSource::new(0.5, m.sampler(), 11, f as u64)).collect();
            let mut net = Network::new(sources);
            for _ in 0..10_000 {
                net.step();
                assert!(net.state.w.iter().all(|w| *w >= 0.0));
                assert!(net.state.conservation_error() < 1e-9);
                assert!(net.state.assignment_error() < 1e-12);
            }
        }
    }

    #[test]
    fn event_log_csv_header() {
        let recs = [EventRecord { t: 0.5, flow: 0, server: 2, length: 1.25, w_before_min: 0.0 }];
        let mut buf = Vec::new();
        write_event_log(&recs, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "t,flow,server,length,w_before_min\n0.5,0,2,1.25,0.0\n");
    }
}
