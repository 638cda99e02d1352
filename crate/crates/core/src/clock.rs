//! Graphical-representation clocks shared by every continuous-time process.
//!
//! Each site `x` carries one Poisson process of rate `1 + d * lambda_ref`.
//! An event is a recovery with probability `1 / (1 + d * lambda_ref)`;
//! otherwise it is an infection attempt along a uniformly chosen axis,
//! carrying a uniform mark `u` used for thinning: a process with rate
//! `lambda <= lambda_ref` accepts the attempt iff `u < lambda / lambda_ref`.
//! Superposed, this gives exactly rate-1 recoveries and rate-`lambda`
//! attempts per edge.
//!
//! Time is cut into blocks of length `1 / rate` and the events of block `k`
//! at site `x` come from a generator seeded by `hash(seed, x, k)`. The event
//! stream of a site is therefore a fixed function of the seed, whenever and
//! however often the site becomes active. Two processes that read the same
//! clocks are coupled pathwise, which is what gives monotonicity in `lambda`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::rngs::SmallRng;
use rand::{Rng, SeedableRng};
use rustc_hash::FxHashMap;

use crate::keyed::{domain, hash_vertex};
use crate::lattice::Vertex;

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Mark {
    Recover,
    Attempt { axis: usize, u: f64 },
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct ClockField {
    seed: u64,
    d: usize,
    lambda_ref: f64,
    rate: f64,
    block_len: f64,
}

impl ClockField {
    pub(crate) fn new(seed: u64, d: usize, lambda_ref: f64) -> Self {
        let rate = 1.0 + d as f64 * lambda_ref;
        Self {
            seed,
            d,
            lambda_ref,
            rate,
            block_len: 1.0 / rate,
        }
    }

    fn block_rng(&self, site: &Vertex, block: u64) -> SmallRng {
        SmallRng::seed_from_u64(hash_vertex(self.seed, domain::CLOCK, site, &[block]))
    }

    /// Draw one (gap, mark) pair. Always consumes three uniforms so the
    /// stream layout does not depend on the mark.
    fn draw(&self, rng: &mut SmallRng) -> (f64, Mark) {
        let gap = -(1.0 - rng.random::<f64>()).ln() / self.rate;
        let kind = rng.random::<f64>() * self.rate;
        let u = rng.random::<f64>();
        let mark = if kind < 1.0 {
            Mark::Recover
        } else {
            let axis = (((kind - 1.0) / self.lambda_ref) as usize).min(self.d - 1);
            Mark::Attempt { axis, u }
        };
        (gap, mark)
    }

    /// The first event of `site` strictly after `after`.
    pub(crate) fn start(&self, site: &Vertex, after: f64) -> SiteClock {
        let block = (after.max(0.0) / self.block_len).floor() as u64;
        let mut clock = SiteClock {
            block,
            rng: self.block_rng(site, block),
            time: block as f64 * self.block_len,
            mark: Mark::Recover,
        };
        loop {
            self.advance(site, &mut clock);
            if clock.time > after {
                return clock;
            }
        }
    }

    /// Move `clock` to its next event.
    pub(crate) fn advance(&self, site: &Vertex, clock: &mut SiteClock) {
        loop {
            let (gap, mark) = self.draw(&mut clock.rng);
            let t = clock.time + gap;
            let block_end = (clock.block + 1) as f64 * self.block_len;
            if t < block_end {
                clock.time = t;
                clock.mark = mark;
                return;
            }
            clock.block += 1;
            clock.rng = self.block_rng(site, clock.block);
            clock.time = block_end;
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct SiteClock {
    block: u64,
    rng: SmallRng,
    time: f64,
    mark: Mark,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Event {
    pub time: f64,
    pub site: Vertex,
    pub mark: Mark,
}

struct Entry {
    time: f64,
    seq: u64,
    site: Vertex,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Entry {}
impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Entry {
    // Reversed: BinaryHeap is a max-heap and we want the earliest event.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

struct Active {
    clock: SiteClock,
    seq: u64,
}

/// Next-event queue over the currently active sites.
///
/// Only active sites have running clocks; the events of inactive sites are
/// no-ops for every process built on this queue, so skipping them is exact.
pub(crate) struct Scheduler {
    field: ClockField,
    heap: BinaryHeap<Entry>,
    active: FxHashMap<Vertex, Active>,
    seq: u64,
}

impl Scheduler {
    pub(crate) fn new(field: ClockField) -> Self {
        Self {
            field,
            heap: BinaryHeap::new(),
            active: FxHashMap::default(),
            seq: 0,
        }
    }

    pub(crate) fn active_count(&self) -> usize {
        self.active.len()
    }

    pub(crate) fn active_sites(&self) -> impl Iterator<Item = &Vertex> {
        self.active.keys()
    }

    pub(crate) fn is_active(&self, site: &Vertex) -> bool {
        self.active.contains_key(site)
    }

    /// Start the clock of `site` at time `now`. No-op if already active.
    pub(crate) fn activate(&mut self, site: Vertex, now: f64) {
        if self.active.contains_key(&site) {
            return;
        }
        let clock = self.field.start(&site, now);
        self.seq += 1;
        self.heap.push(Entry {
            time: clock.time,
            seq: self.seq,
            site,
        });
        self.active.insert(site, Active { clock, seq: self.seq });
    }

    pub(crate) fn deactivate(&mut self, site: &Vertex) {
        self.active.remove(site);
    }

    /// Pop the earliest event of an active site at or before `horizon`.
    pub(crate) fn next_event(&mut self, horizon: f64) -> Option<Event> {
        while let Some(top) = self.heap.peek() {
            if top.time > horizon {
                return None;
            }
            let entry = self.heap.pop().expect("peeked");
            let Some(state) = self.active.get_mut(&entry.site) else {
                continue;
            };
            if state.seq != entry.seq {
                continue;
            }
            let event = Event {
                time: state.clock.time,
                site: entry.site,
                mark: state.clock.mark,
            };
            self.field.advance(&entry.site, &mut state.clock);
            self.seq += 1;
            state.seq = self.seq;
            self.heap.push(Entry {
                time: state.clock.time,
                seq: self.seq,
                site: entry.site,
            });
            return Some(event);
        }
        None
    }
}
