//! Exact continuous-time simulation of the filling process.
//!
//! Two equivalent representations are provided:
//!
//! * [`ABState`] tracks only what the dynamics needs. An empty vertex hosts a
//!   passive `B` particle, and every particle above the bottom of a pile is an
//!   active `A` particle. An `A` hopping onto a `B` annihilates with it.
//! * [`PileState`] tracks every pile with particle identities, bottom first.
//!
//! Both use one aggregate exponential clock: with `m` mobile particles each
//! hopping at overall rate 1 the next event comes after `Exp(m)`, and the mover
//! is uniform among them. The target is a uniform neighbor.

use rand::Rng;
use rand_distr::Exp1;
use thiserror::Error;

use crate::graphs::RegularGraph;

/// Default ceiling on hops per run.
pub const DEFAULT_MAX_EVENTS: u64 = 10_000_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("event ceiling of {limit} hops reached at t = {clock} with m = {remaining} empty vertices left")]
    EventCeiling { limit: u64, clock: f64, remaining: usize },
    #[error("vertex {vertex} is out of range for a graph with {vertices} vertices")]
    InvalidVertex { vertex: usize, vertices: usize },
    #[error("occupancy vector has length {got}, graph has {expected} vertices")]
    OccupancyLength { got: usize, expected: usize },
    #[error("occupancy holds {particles} particles, graph has {vertices} vertices")]
    ParticleCount { particles: usize, vertices: usize },
    #[error("trace grid must be nonnegative and strictly increasing")]
    BadGrid,
}

/// Outcome of one replica run to halting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HaltingSample {
    /// Time at which every vertex holds exactly one particle.
    pub halting_time: f64,
    /// Time spent with exactly one empty vertex.
    pub last_step: f64,
    /// Empty vertices at the start.
    pub m0: usize,
    /// Hops performed, or transitions for the fast complete-graph sampler.
    pub events: u64,
    /// Seed of the replica stream; zero unless the replica harness sets it.
    pub seed: u64,
}

impl HaltingSample {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// Receives the piecewise-constant trajectory of `m`.
pub trait TraceObserver {
    /// `m` empty vertices held from the previous call up to (excluding) `until`.
    fn hold(&mut self, until: f64, m: usize);
}

/// Records `m` on a fixed time grid.
///
/// The value stored for grid time `g` is the one in force on the interval
/// containing `g`, i.e. the state just before the first event after `g`.
#[derive(Debug, Clone)]
pub struct MTrace {
    grid: Vec<f64>,
    values: Vec<usize>,
}

/// Build an [`MTrace`] for `grid`.
pub fn observe_m_trace(grid: &[f64]) -> Result<MTrace, EngineError> {
    MTrace::new(grid.to_vec())
}

impl MTrace {
    pub fn new(grid: Vec<f64>) -> Result<Self, EngineError> {
        let increasing = grid.windows(2).all(|w| w[0] < w[1]);
        if !increasing || grid.first().is_some_and(|&t| !(t >= 0.0)) || grid.iter().any(|t| !t.is_finite()) {
            return Err(EngineError::BadGrid);
        }
        Ok(MTrace {
            values: Vec::with_capacity(grid.len()),
            grid,
        })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    /// Recorded values; shorter than the grid if the run stopped early.
    pub fn values(&self) -> &[usize] {
        &self.values
    }

    pub fn is_complete(&self) -> bool {
        self.values.len() == self.grid.len()
    }

    pub fn into_values(self) -> Vec<usize> {
        self.values
    }
}

impl TraceObserver for MTrace {
    fn hold(&mut self, until: f64, m: usize) {
        while let Some(&g) = self.grid.get(self.values.len()) {
            if g < until {
                self.values.push(m);
            } else {
                break;
            }
        }
    }
}

/// Whether a run stopped because the process halted or because it reached
/// its time horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RunStatus {
    Halted(HaltingSample),
    Horizon { remaining: usize },
}

fn occupancy_uniform<R: Rng + ?Sized>(vertices: usize, rng: &mut R) -> Vec<u32> {
    let mut occupancy = vec![0u32; vertices];
    for _ in 0..vertices {
        occupancy[rng.random_range(0..vertices)] += 1;
    }
    occupancy
}

/// Initial number of empty vertices when `vertices` particles land
/// independently and uniformly on `vertices` vertices.
///
/// Consumes the random stream exactly like [`init_uncorrelated`], so both
/// produce the same `m0` from the same stream.
pub fn sample_uncorrelated_m0<R: Rng + ?Sized>(vertices: usize, rng: &mut R, scratch: &mut Vec<bool>) -> usize {
    scratch.clear();
    scratch.resize(vertices, false);
    let mut hit = 0;
    for _ in 0..vertices {
        let v = rng.random_range(0..vertices);
        if !scratch[v] {
            scratch[v] = true;
            hit += 1;
        }
    }
    vertices - hit
}

fn check_occupancy(graph: &RegularGraph, occupancy: &[u32]) -> Result<(), EngineError> {
    let vertices = graph.vertex_count();
    if occupancy.len() != vertices {
        return Err(EngineError::OccupancyLength {
            got: occupancy.len(),
            expected: vertices,
        });
    }
    let particles: usize = occupancy.iter().map(|&k| k as usize).sum();
    if particles != vertices {
        return Err(EngineError::ParticleCount { particles, vertices });
    }
    Ok(())
}

/// Annihilation-representation state.
#[derive(Debug, Clone)]
pub struct ABState {
    a_count: Vec<u32>,
    a_index: Vec<u32>,
    b_site: Vec<bool>,
    m: usize,
    m0: usize,
    clock: f64,
    events: u64,
    entered_last_step: f64,
}

/// `V` particles placed independently and uniformly on the `V` vertices.
pub fn init_uncorrelated<R: Rng + ?Sized>(graph: &RegularGraph, rng: &mut R) -> ABState {
    let occupancy = occupancy_uniform(graph.vertex_count(), rng);
    ABState::build(&occupancy)
}

/// All `V` particles stacked on `vertex`.
pub fn init_localized(graph: &RegularGraph, vertex: usize) -> Result<ABState, EngineError> {
    ABState::from_occupancy(graph, &localized_occupancy(graph, vertex)?)
}

fn localized_occupancy(graph: &RegularGraph, vertex: usize) -> Result<Vec<u32>, EngineError> {
    let vertices = graph.vertex_count();
    if vertex >= vertices {
        return Err(EngineError::InvalidVertex { vertex, vertices });
    }
    let mut occupancy = vec![0u32; vertices];
    occupancy[vertex] = vertices as u32;
    Ok(occupancy)
}

impl ABState {
    /// Translate a pile-size vector: `k + 1` particles become `k` A's, zero
    /// particles become one B.
    pub fn from_occupancy(graph: &RegularGraph, occupancy: &[u32]) -> Result<Self, EngineError> {
        check_occupancy(graph, occupancy)?;
        Ok(Self::build(occupancy))
    }

    fn build(occupancy: &[u32]) -> Self {
        let a_count: Vec<u32> = occupancy.iter().map(|&k| k.saturating_sub(1)).collect();
        let b_site: Vec<bool> = occupancy.iter().map(|&k| k == 0).collect();
        let a_index: Vec<u32> = a_count
            .iter()
            .enumerate()
            .flat_map(|(v, &k)| std::iter::repeat_n(v as u32, k as usize))
            .collect();
        let m = b_site.iter().filter(|&&b| b).count();
        debug_assert_eq!(m, a_index.len());
        ABState {
            a_count,
            a_index,
            b_site,
            m,
            m0: m,
            clock: 0.0,
            events: 0,
            entered_last_step: 0.0,
        }
    }

    /// Number of B particles, equal to the number of A particles.
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn m0(&self) -> usize {
        self.m0
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub fn events(&self) -> u64 {
        self.events
    }

    pub fn a_count(&self, v: usize) -> u32 {
        self.a_count[v]
    }

    pub fn has_b(&self, v: usize) -> bool {
        self.b_site[v]
    }

    pub fn a_positions(&self) -> &[u32] {
        &self.a_index
    }

    /// Pile sizes of the equivalent DSF configuration.
    pub fn occupancy(&self) -> Vec<u32> {
        self.a_count
            .iter()
            .zip(&self.b_site)
            .map(|(&a, &b)| if b { 0 } else { a + 1 })
            .collect()
    }

    /// Conservation and exclusion checks.
    pub fn check_invariants(&self) -> Result<(), String> {
        let a_total: u64 = self.a_count.iter().map(|&k| k as u64).sum();
        let b_total = self.b_site.iter().filter(|&&b| b).count();
        if a_total as usize != self.a_index.len() {
            return Err(format!("a_index has {} entries, counts sum to {a_total}", self.a_index.len()));
        }
        if b_total != self.m || self.a_index.len() != self.m {
            return Err(format!("#A = {}, #B = {b_total}, m = {}", self.a_index.len(), self.m));
        }
        if let Some(v) = (0..self.b_site.len()).find(|&v| self.b_site[v] && self.a_count[v] > 0) {
            return Err(format!("vertex {v} hosts both A and B"));
        }
        Ok(())
    }

    fn sample(&self) -> HaltingSample {
        HaltingSample {
            halting_time: self.clock,
            last_step: if self.m0 == 0 { 0.0 } else { self.clock - self.entered_last_step },
            m0: self.m0,
            events: self.events,
            seed: 0,
        }
    }
}

/// Run the annihilation dynamics until no B particle is left.
pub fn run_to_halt<R: Rng + ?Sized>(
    graph: &RegularGraph,
    state: &mut ABState,
    rng: &mut R,
    observer: Option<&mut dyn TraceObserver>,
) -> Result<HaltingSample, EngineError> {
    match advance(graph, state, rng, f64::INFINITY, DEFAULT_MAX_EVENTS, observer)? {
        RunStatus::Halted(sample) => Ok(sample),
        RunStatus::Horizon { .. } => unreachable!("infinite horizon"),
    }
}

/// Run the annihilation dynamics until it halts, the next event would fall
/// after `horizon`, or `max_events` hops have been made (an error).
///
/// On a horizon stop the clock is moved to `horizon` and the pending event
/// is discarded; by memorylessness a later call may resume from there. The
/// observer has then been told the state up to and including `horizon`.
pub fn advance<R: Rng + ?Sized>(
    graph: &RegularGraph,
    state: &mut ABState,
    rng: &mut R,
    horizon: f64,
    max_events: u64,
    mut observer: Option<&mut dyn TraceObserver>,
) -> Result<RunStatus, EngineError> {
    debug_assert_eq!(state.a_count.len(), graph.vertex_count());
    if state.m == 1 && state.events == 0 {
        state.entered_last_step = state.clock;
    }
    while state.m > 0 {
        let wait: f64 = rng.sample::<f64, _>(Exp1) / state.m as f64;
        let next = state.clock + wait;
        if next > horizon {
            if let Some(obs) = observer.as_deref_mut() {
                obs.hold(horizon.next_up(), state.m);
            }
            state.clock = horizon;
            return Ok(RunStatus::Horizon { remaining: state.m });
        }
        if state.events >= max_events {
            return Err(EngineError::EventCeiling {
                limit: max_events,
                clock: state.clock,
                remaining: state.m,
            });
        }
        state.clock = next;
        state.events += 1;

        let i = rng.random_range(0..state.a_index.len());
        let from = state.a_index[i] as usize;
        let to = graph.random_neighbor(from, rng);
        state.a_count[from] -= 1;
        if state.b_site[to] {
            if let Some(obs) = observer.as_deref_mut() {
                obs.hold(next, state.m);
            }
            state.b_site[to] = false;
            state.a_index.swap_remove(i);
            state.m -= 1;
            if state.m == 1 {
                state.entered_last_step = next;
            }
        } else {
            state.a_count[to] += 1;
            state.a_index[i] = to as u32;
        }
    }
    if let Some(obs) = observer {
        obs.hold(f64::INFINITY, 0);
    }
    Ok(RunStatus::Halted(state.sample()))
}

/// Pile-representation state: every stack with particle identities.
#[derive(Debug, Clone)]
pub struct PileState {
    stacks: Vec<Vec<u32>>,
    location: Vec<u32>,
    // Mobile particles and, for each particle, its slot in `mobile`.
    mobile: Vec<u32>,
    mobile_slot: Vec<u32>,
    empty: usize,
    m0: usize,
    clock: f64,
    events: u64,
    entered_last_step: f64,
}

const NOT_MOBILE: u32 = u32::MAX;

impl PileState {
    /// Stacks built from pile sizes; particle identities are assigned in
    /// vertex order, bottom first.
    pub fn from_occupancy(graph: &RegularGraph, occupancy: &[u32]) -> Result<Self, EngineError> {
        check_occupancy(graph, occupancy)?;
        let vertices = graph.vertex_count();
        let mut stacks = Vec::with_capacity(vertices);
        let mut location = vec![0u32; vertices];
        let mut mobile = Vec::new();
        let mut mobile_slot = vec![NOT_MOBILE; vertices];
        let mut next_id = 0u32;
        for (v, &k) in occupancy.iter().enumerate() {
            let stack: Vec<u32> = (next_id..next_id + k).collect();
            for (depth, &p) in stack.iter().enumerate() {
                location[p as usize] = v as u32;
                if depth > 0 {
                    mobile_slot[p as usize] = mobile.len() as u32;
                    mobile.push(p);
                }
            }
            next_id += k;
            stacks.push(stack);
        }
        let empty = stacks.iter().filter(|s| s.is_empty()).count();
        Ok(PileState {
            stacks,
            location,
            mobile,
            mobile_slot,
            empty,
            m0: empty,
            clock: 0.0,
            events: 0,
            entered_last_step: 0.0,
        })
    }

    pub fn uncorrelated<R: Rng + ?Sized>(graph: &RegularGraph, rng: &mut R) -> Self {
        let occupancy = occupancy_uniform(graph.vertex_count(), rng);
        Self::from_occupancy(graph, &occupancy).expect("uniform placement conserves particles")
    }

    pub fn localized(graph: &RegularGraph, vertex: usize) -> Result<Self, EngineError> {
        Self::from_occupancy(graph, &localized_occupancy(graph, vertex)?)
    }

    pub fn stacks(&self) -> &[Vec<u32>] {
        &self.stacks
    }

    pub fn empty_vertices(&self) -> usize {
        self.empty
    }

    pub fn mobile_count(&self) -> usize {
        self.mobile.len()
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub fn occupancy(&self) -> Vec<u32> {
        self.stacks.iter().map(|s| s.len() as u32).collect()
    }

    /// The annihilation-representation image of this configuration.
    pub fn to_ab_state(&self) -> ABState {
        ABState::build(&self.occupancy())
    }

    pub fn check_invariants(&self) -> Result<(), String> {
        let vertices = self.stacks.len();
        let total: usize = self.stacks.iter().map(Vec::len).sum();
        if total != vertices {
            return Err(format!("{total} particles on {vertices} vertices"));
        }
        let occupied = self.stacks.iter().filter(|s| !s.is_empty()).count();
        if self.mobile.len() != vertices - occupied {
            return Err(format!("{} mobile particles, {} empty vertices", self.mobile.len(), vertices - occupied));
        }
        for (v, stack) in self.stacks.iter().enumerate() {
            for (depth, &p) in stack.iter().enumerate() {
                if self.location[p as usize] as usize != v {
                    return Err(format!("particle {p} misplaced"));
                }
                let is_mobile = self.mobile_slot[p as usize] != NOT_MOBILE;
                if is_mobile != (depth > 0) {
                    return Err(format!("particle {p} at depth {depth} has wrong mobility"));
                }
            }
        }
        Ok(())
    }

    fn drop_mobile(&mut self, p: u32) {
        let slot = self.mobile_slot[p as usize] as usize;
        self.mobile.swap_remove(slot);
        if let Some(&moved) = self.mobile.get(slot) {
            self.mobile_slot[moved as usize] = slot as u32;
        }
        self.mobile_slot[p as usize] = NOT_MOBILE;
    }
}

/// Run the pile dynamics to halting: a uniformly chosen non-bottom particle
/// leaves its pile and lands on top of a uniform neighbor's pile.
pub fn run_to_halt_piles<R: Rng + ?Sized>(
    graph: &RegularGraph,
    state: &mut PileState,
    rng: &mut R,
    observer: Option<&mut dyn TraceObserver>,
) -> Result<HaltingSample, EngineError> {
    run_piles_limited(graph, state, rng, DEFAULT_MAX_EVENTS, observer)
}

pub fn run_piles_limited<R: Rng + ?Sized>(
    graph: &RegularGraph,
    state: &mut PileState,
    rng: &mut R,
    max_events: u64,
    mut observer: Option<&mut dyn TraceObserver>,
) -> Result<HaltingSample, EngineError> {
    if state.empty == 1 && state.events == 0 {
        state.entered_last_step = state.clock;
    }
    while !state.mobile.is_empty() {
        if state.events >= max_events {
            return Err(EngineError::EventCeiling {
                limit: max_events,
                clock: state.clock,
                remaining: state.empty,
            });
        }
        let wait: f64 = rng.sample::<f64, _>(Exp1) / state.mobile.len() as f64;
        state.clock += wait;
        state.events += 1;

        let p = state.mobile[rng.random_range(0..state.mobile.len())];
        let from = state.location[p as usize] as usize;
        let to = graph.random_neighbor(from, rng);
        let stack = &mut state.stacks[from];
        let depth = stack.iter().position(|&q| q == p).expect("particle is on its stack");
        stack.remove(depth);
        state.location[p as usize] = to as u32;
        state.stacks[to].push(p);
        if state.stacks[to].len() == 1 {
            if let Some(obs) = observer.as_deref_mut() {
                obs.hold(state.clock, state.empty);
            }
            state.drop_mobile(p);
            state.empty -= 1;
            if state.empty == 1 {
                state.entered_last_step = state.clock;
            }
        }
    }
    if let Some(obs) = observer {
        obs.hold(f64::INFINITY, 0);
    }
    Ok(HaltingSample {
        halting_time: state.clock,
        last_step: if state.m0 == 0 { 0.0 } else { state.clock - state.entered_last_step },
        m0: state.m0,
        events: state.events,
        seed: 0,
    })
}

/// Halting time on `K_{N+1}` as the sum of independent exponential
/// transition times with rates `m^2 / N`, `m = m0, ..., 1`.
///
/// `events` counts transitions, not hops.
pub fn sample_complete_fast<R: Rng + ?Sized>(rate_scale: f64, m0: usize, rng: &mut R) -> HaltingSample {
    let mut total = 0.0;
    let mut last = 0.0;
    for m in (1..=m0).rev() {
        let step = rng.sample::<f64, _>(Exp1) * rate_scale / (m * m) as f64;
        total += step;
        last = step;
    }
    HaltingSample {
        halting_time: total,
        last_step: last,
        m0,
        events: m0 as u64,
        seed: 0,
    }
}
