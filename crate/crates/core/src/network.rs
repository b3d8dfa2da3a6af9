//! The delayed-communication variant.
//!
//! Agent `i` receives agent `j`'s samples `τ_ij` iterations late, so at
//! iteration `k` its gradient uses strategies drawn from `p_j^{k−τ_ij}`.
//! Delays are simulated with per-agent ring buffers of published batches
//! inside one process. Over a peer-to-peer graph the delay between two agents
//! is their hop distance.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::multilinear::ProbabilityProfile;
use crate::objective::{Choice, Objective};
use crate::optimizer::{
    agent_update, batch_value, check_start, draw_batches, is_equilibrium_profile, update_rows,
    RunConfig, RunOutcome,
};
use crate::trace::IterationTrace;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Provenance {
    Explicit,
    /// Undirected edge list; delays are shortest-path distances minus `hop_offset`.
    Graph {
        edges: Vec<(usize, usize)>,
        hop_offset: usize,
    },
}

/// Pairwise delays `τ_ij` with `τ_ii = 0`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DelayTopology {
    agents: usize,
    delays: Vec<usize>,
    distances: Option<Vec<usize>>,
    provenance: Provenance,
}

impl DelayTopology {
    /// All delays zero.
    pub fn zero(agents: usize) -> Self {
        Self {
            agents,
            delays: vec![0; agents * agents],
            distances: None,
            provenance: Provenance::Explicit,
        }
    }

    pub fn from_matrix(matrix: Vec<Vec<usize>>) -> Result<Self> {
        let agents = matrix.len();
        let mut delays = Vec::with_capacity(agents * agents);
        for (i, row) in matrix.into_iter().enumerate() {
            if row.len() != agents {
                return Err(Error::InvalidTopology(format!(
                    "row {i} has {} entries, expected {agents}",
                    row.len()
                )));
            }
            if row[i] != 0 {
                return Err(Error::InvalidTopology(format!(
                    "self-delay of agent {i} is {}",
                    row[i]
                )));
            }
            delays.extend(row);
        }
        Ok(Self {
            agents,
            delays,
            distances: None,
            provenance: Provenance::Explicit,
        })
    }

    /// Delays equal to hop distances on a connected undirected graph.
    pub fn from_graph(edges: &[(usize, usize)], agents: usize) -> Result<Self> {
        if agents == 0 {
            return Err(Error::InvalidTopology("graph has no nodes".into()));
        }
        let mut adj = vec![Vec::new(); agents];
        for &(u, v) in edges {
            if u >= agents || v >= agents {
                return Err(Error::InvalidTopology(format!(
                    "edge ({u}, {v}) outside {agents} nodes"
                )));
            }
            if u != v {
                adj[u].push(v);
                adj[v].push(u);
            }
        }
        let mut distances = vec![0; agents * agents];
        for src in 0..agents {
            let mut dist = vec![usize::MAX; agents];
            dist[src] = 0;
            let mut queue = VecDeque::from([src]);
            while let Some(u) = queue.pop_front() {
                for &v in &adj[u] {
                    if dist[v] == usize::MAX {
                        dist[v] = dist[u] + 1;
                        queue.push_back(v);
                    }
                }
            }
            if let Some(unreached) = dist.iter().position(|&d| d == usize::MAX) {
                return Err(Error::Disconnected(unreached));
            }
            distances[src * agents..(src + 1) * agents].copy_from_slice(&dist);
        }
        Ok(Self {
            agents,
            delays: distances.clone(),
            distances: Some(distances),
            provenance: Provenance::Graph {
                edges: edges.to_vec(),
                hop_offset: 0,
            },
        })
    }

    /// Delays `max(δ_ij − offset, 0)` for graph-derived topologies; counts the
    /// first `offset` hops as instantaneous.
    pub fn with_hop_offset(mut self, offset: usize) -> Result<Self> {
        let Some(distances) = &self.distances else {
            return Err(Error::InvalidTopology(
                "hop offset needs a graph-derived topology".into(),
            ));
        };
        self.delays = distances.iter().map(|d| d.saturating_sub(offset)).collect();
        if let Provenance::Graph { hop_offset, .. } = &mut self.provenance {
            *hop_offset = offset;
        }
        Ok(self)
    }

    pub fn complete(agents: usize) -> Self {
        let edges: Vec<_> = (0..agents)
            .flat_map(|u| (u + 1..agents).map(move |v| (u, v)))
            .collect();
        Self::from_graph(&edges, agents).expect("complete graph is connected")
    }

    /// Path graph `0 − 1 − … − (n−1)`.
    pub fn string(agents: usize) -> Self {
        let edges: Vec<_> = (1..agents).map(|v| (v - 1, v)).collect();
        Self::from_graph(&edges, agents).expect("path graph is connected")
    }

    pub fn ring(agents: usize) -> Self {
        let mut edges: Vec<_> = (1..agents).map(|v| (v - 1, v)).collect();
        if agents > 2 {
            edges.push((agents - 1, 0));
        }
        Self::from_graph(&edges, agents).expect("ring is connected")
    }

    /// Hub 0 linked to every other node.
    pub fn star(agents: usize) -> Self {
        let edges: Vec<_> = (1..agents).map(|v| (0, v)).collect();
        Self::from_graph(&edges, agents).expect("star is connected")
    }

    /// A ten-node connected graph whose largest hop distance is four.
    pub fn general_ten() -> Self {
        Self::from_graph(&GENERAL_TEN_EDGES, 10).expect("built-in graph is connected")
    }

    pub fn agents(&self) -> usize {
        self.agents
    }

    /// `τ_ij`: iterations before agent `i` sees agent `j`'s samples.
    pub fn delay(&self, i: usize, j: usize) -> usize {
        self.delays[i * self.agents + j]
    }

    /// The delay bound `D = max τ_ij`.
    pub fn max_delay(&self) -> usize {
        self.delays.iter().copied().max().unwrap_or(0)
    }

    /// Largest hop distance for graph-derived topologies.
    pub fn max_distance(&self) -> Option<usize> {
        self.distances
            .as_ref()
            .map(|d| d.iter().copied().max().unwrap_or(0))
    }

    pub fn distance(&self, i: usize, j: usize) -> Option<usize> {
        self.distances.as_ref().map(|d| d[i * self.agents + j])
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn edges(&self) -> Option<&[(usize, usize)]> {
        match &self.provenance {
            Provenance::Graph { edges, .. } => Some(edges),
            Provenance::Explicit => None,
        }
    }
}

const GENERAL_TEN_EDGES: [(usize, usize); 13] = [
    (0, 1),
    (0, 2),
    (1, 2),
    (2, 6),
    (1, 3),
    (2, 4),
    (3, 5),
    (4, 5),
    (4, 6),
    (5, 7),
    (6, 8),
    (7, 8),
    (8, 9),
];

/// See [`DelayTopology::from_graph`].
pub fn topology_from_graph(edges: &[(usize, usize)], agents: usize) -> Result<DelayTopology> {
    DelayTopology::from_graph(edges, agents)
}

/// What an agent uses for a peer it has not heard from yet.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Bootstrap {
    /// The peer abstains.
    #[default]
    Empty,
    /// Strategies sampled from the peer's initial distribution.
    UniformSample,
}

/// The last `D + 1` published batches of every agent.
#[derive(Clone, Debug)]
pub struct SampleBuffer {
    depth: usize,
    slots: Vec<VecDeque<(usize, Vec<Choice>)>>,
}

impl SampleBuffer {
    pub fn new(agents: usize, max_delay: usize) -> Self {
        Self {
            depth: max_delay + 1,
            slots: vec![VecDeque::with_capacity(max_delay + 1); agents],
        }
    }

    pub fn publish(&mut self, agent: usize, iteration: usize, batch: Vec<Choice>) {
        let slot = &mut self.slots[agent];
        slot.push_back((iteration, batch));
        while slot.len() > self.depth {
            slot.pop_front();
        }
    }

    /// The batch `agent` published at `iteration`, if still held.
    pub fn lookup(&self, agent: usize, iteration: usize) -> Option<&[Choice]> {
        self.slots[agent]
            .iter()
            .find(|(t, _)| *t == iteration)
            .map(|(_, b)| b.as_slice())
    }

    pub fn oldest(&self, agent: usize) -> Option<usize> {
        self.slots[agent].front().map(|(t, _)| *t)
    }
}

/// Which batch agent `receiver` used for `sender` at `iteration`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ProvenanceRecord {
    pub iteration: usize,
    pub receiver: usize,
    pub sender: usize,
    /// Iteration tag of the batch, or `None` for the bootstrap value.
    pub source: Option<usize>,
}

/// Result of an instrumented delayed run.
#[derive(Clone, Debug)]
pub struct DelayedRun {
    pub outcome: RunOutcome,
    pub provenance: Vec<ProvenanceRecord>,
    /// Oldest batch iteration any lookup requested, relative to the current one.
    pub max_lookup_age: usize,
}

/// Delayed iteration over `topo`.
pub fn run_algorithm2<O: Objective + ?Sized>(
    oracle: &O,
    p0: &ProbabilityProfile,
    cfg: &RunConfig,
    topo: &DelayTopology,
    bootstrap: Bootstrap,
) -> Result<RunOutcome> {
    Ok(run_delayed(oracle, p0, cfg, topo, bootstrap, false)?.outcome)
}

/// As [`run_algorithm2`], also recording where every context entry came from.
pub fn run_algorithm2_traced<O: Objective + ?Sized>(
    oracle: &O,
    p0: &ProbabilityProfile,
    cfg: &RunConfig,
    topo: &DelayTopology,
    bootstrap: Bootstrap,
) -> Result<DelayedRun> {
    run_delayed(oracle, p0, cfg, topo, bootstrap, true)
}

fn run_delayed<O: Objective + ?Sized>(
    oracle: &O,
    p0: &ProbabilityProfile,
    cfg: &RunConfig,
    topo: &DelayTopology,
    bootstrap: Bootstrap,
    instrument: bool,
) -> Result<DelayedRun> {
    check_start(oracle, p0, cfg)?;
    let agents = p0.agents();
    if topo.agents() != agents {
        return Err(Error::DimensionMismatch {
            expected: agents,
            actual: topo.agents(),
        });
    }
    let k = oracle.strategies();
    let m = cfg.sample_size;
    let d = topo.max_delay();
    let empty_batch = vec![Choice::EMPTY; m];

    let mut trace = IterationTrace::new(agents, cfg.record_trace.then_some(p0));
    let mut provenance = Vec::new();
    let mut max_lookup_age = 0;
    let mut buffer = SampleBuffer::new(agents, d);
    for (j, batch) in draw_batches(p0, k, cfg.seed, 0, m)?.into_iter().enumerate() {
        buffer.publish(j, 0, batch);
    }
    let mut window: VecDeque<ProbabilityProfile> = VecDeque::from([p0.clone()]);
    let mut p = p0.clone();

    for t in 0..cfg.max_iters {
        // Resolve every (receiver, sender) pair against the buffer first.
        let mut sources: Vec<&[Choice]> = Vec::with_capacity(agents * agents);
        for i in 0..agents {
            for j in 0..agents {
                let tau = topo.delay(i, j);
                let (batch, source) = if i == j {
                    (empty_batch.as_slice(), None)
                } else if t >= tau {
                    let batch = buffer
                        .lookup(j, t - tau)
                        .expect("buffer holds the last D + 1 batches");
                    max_lookup_age = max_lookup_age.max(tau);
                    (batch, Some(t - tau))
                } else {
                    match bootstrap {
                        Bootstrap::Empty => (empty_batch.as_slice(), None),
                        Bootstrap::UniformSample => {
                            (buffer.lookup(j, 0).expect("initial batch held"), None)
                        }
                    }
                };
                if instrument && i != j {
                    provenance.push(ProvenanceRecord {
                        iteration: t,
                        receiver: i,
                        sender: j,
                        source,
                    });
                }
                sources.push(batch);
            }
        }
        let own: Vec<Vec<Choice>> = (0..agents)
            .map(|j| {
                buffer
                    .lookup(j, t)
                    .expect("own batch for this iteration")
                    .to_vec()
            })
            .collect();
        let f_sample = batch_value(oracle, &own);

        let rows = update_rows(&p, m, |i| {
            agent_update(oracle, &p, i, cfg.gamma, m, |j, s| {
                sources[i * agents + j][s]
            })
        })?;
        drop(sources);
        let mut next = p.clone();
        for (i, row) in rows.iter().enumerate() {
            next.set_row(i, row);
        }

        let iteration = t + 1;
        window.push_back(next.clone());
        while window.len() > d + 1 {
            window.pop_front();
        }
        let found = if iteration % cfg.check_every == 0 && window.len() == d + 1 {
            let profiles: Vec<ProbabilityProfile> = window.iter().cloned().collect();
            windowed_equilibrium(&profiles, oracle, cfg.eps_vertex, cfg.eps_eq)
        } else {
            None
        };
        trace.push(&p, &next, f_sample, found.is_some());
        p = next;
        if let Some(a) = found {
            if trace.equilibrium.is_none() {
                trace.equilibrium = Some((iteration, a));
            }
            if cfg.stop_on_equilibrium {
                break;
            }
        }
        for (j, batch) in draw_batches(&p, k, cfg.seed, iteration, m)?
            .into_iter()
            .enumerate()
        {
            buffer.publish(j, iteration, batch);
        }
    }

    Ok(DelayedRun {
        outcome: RunOutcome {
            trace,
            final_profile: p,
        },
        provenance,
        max_lookup_age,
    })
}

fn windowed_equilibrium<O: Objective + ?Sized>(
    window: &[ProbabilityProfile],
    oracle: &O,
    eps_vertex: f64,
    eps_eq: f64,
) -> Option<crate::objective::StrategyProfile> {
    let k = oracle.strategies();
    let first = window.first()?.vertex_profile(k, eps_vertex)?;
    for pair in window.windows(2) {
        let moved: f64 = (0..pair[0].agents())
            .map(|i| pair[1].row_sq_distance(&pair[0], i))
            .sum();
        if moved.sqrt() > eps_vertex {
            return None;
        }
        if pair[1].vertex_profile(k, eps_vertex).as_ref() != Some(&first) {
            return None;
        }
    }
    is_equilibrium_profile(oracle, &first, eps_eq).then_some(first)
}

/// True when `window` holds at least `bound` consecutive profiles that are
/// all the same vertex profile and that profile is an equilibrium.
pub fn windowed_equilibrium_check<O: Objective + ?Sized>(
    window: &[ProbabilityProfile],
    bound: usize,
    oracle: &O,
    eps_vertex: f64,
    eps_eq: f64,
) -> Result<bool> {
    let required = bound.max(1);
    if window.len() < required {
        return Err(Error::WindowTooShort {
            required,
            actual: window.len(),
        });
    }
    Ok(windowed_equilibrium(window, oracle, eps_vertex, eps_eq).is_some())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::{CoverageObjective, StrategyProfile};

    fn dominant() -> CoverageObjective {
        CoverageObjective::new(2, 9, vec![vec![0, 1, 2, 3], vec![4], vec![5, 6, 7]]).unwrap()
    }

    #[test]
    fn complete_graph_has_unit_delays() {
        let t = DelayTopology::complete(5);
        assert_eq!(t.max_delay(), 1);
        for i in 0..5 {
            for j in 0..5 {
                assert_eq!(t.delay(i, j), usize::from(i != j));
            }
        }
    }

    #[test]
    fn string_graph_distances() {
        let t = DelayTopology::string(10);
        assert_eq!(t.max_distance(), Some(9));
        assert_eq!(t.max_delay(), 9);
        assert_eq!(t.delay(2, 7), 5);
        let offset = t.with_hop_offset(1).unwrap();
        assert_eq!(offset.max_delay(), 8);
        assert_eq!(offset.max_distance(), Some(9));
        assert_eq!(offset.delay(3, 4), 0);
    }

    #[test]
    fn general_graph_has_diameter_four() {
        let t = DelayTopology::general_ten();
        assert_eq!(t.max_distance(), Some(4));
        assert_eq!(t.with_hop_offset(1).unwrap().max_delay(), 3);
    }

    #[test]
    fn ring_and_star() {
        assert_eq!(DelayTopology::ring(6).max_delay(), 3);
        assert_eq!(DelayTopology::star(6).max_delay(), 2);
    }

    #[test]
    fn disconnected_graph_is_rejected() {
        assert!(matches!(
            DelayTopology::from_graph(&[(0, 1), (2, 3)], 4),
            Err(Error::Disconnected(2))
        ));
        assert!(DelayTopology::from_graph(&[(0, 5)], 3).is_err());
    }

    #[test]
    fn explicit_matrix_validation() {
        assert!(DelayTopology::from_matrix(vec![vec![0, 2], vec![1, 0]]).is_ok());
        assert!(DelayTopology::from_matrix(vec![vec![1, 2], vec![1, 0]]).is_err());
        assert!(DelayTopology::zero(3).with_hop_offset(1).is_err());
    }

    #[test]
    fn buffer_keeps_last_batches() {
        let mut b = SampleBuffer::new(1, 2);
        for t in 0..5 {
            b.publish(0, t, vec![Choice::strategy(t)]);
        }
        assert_eq!(b.oldest(0), Some(2));
        assert_eq!(b.lookup(0, 3), Some(&[Choice::strategy(3)][..]));
        assert_eq!(b.lookup(0, 1), None);
    }

    #[test]
    fn window_checks() {
        let f = dominant();
        let eq =
            ProbabilityProfile::from_strategies(&StrategyProfile::from_indices(&[0, 2]), 3, false)
                .unwrap();
        let non =
            ProbabilityProfile::from_strategies(&StrategyProfile::from_indices(&[1, 2]), 3, false)
                .unwrap();
        let window = vec![eq.clone(); 3];
        assert!(windowed_equilibrium_check(&window, 3, &f, 1e-9, 1e-12).unwrap());
        assert!(
            !windowed_equilibrium_check(&[non.clone(), non.clone(), non], 3, &f, 1e-9, 1e-12)
                .unwrap()
        );
        let moving =
            ProbabilityProfile::new(vec![vec![0.99, 0.01, 0.0], vec![0.0, 0.0, 1.0]]).unwrap();
        assert!(
            !windowed_equilibrium_check(&[moving, eq.clone(), eq.clone()], 3, &f, 1e-9, 1e-12)
                .unwrap()
        );
        assert!(matches!(
            windowed_equilibrium_check(&[eq], 3, &f, 1e-9, 1e-12),
            Err(Error::WindowTooShort {
                required: 3,
                actual: 1
            })
        ));
    }

    #[test]
    fn zero_delay_matches_algorithm1() {
        let f = dominant();
        let cfg = RunConfig {
            gamma: 0.05,
            max_iters: 200,
            seed: 5,
            ..Default::default()
        };
        let p0 = ProbabilityProfile::uniform(2, 3);
        let a = crate::optimizer::run_algorithm1(&f, &p0, &cfg).unwrap();
        let b = run_algorithm2(&f, &p0, &cfg, &DelayTopology::zero(2), Bootstrap::Empty).unwrap();
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.final_profile, b.final_profile);
    }

    #[test]
    fn topology_size_must_match() {
        let f = dominant();
        let r = run_algorithm2(
            &f,
            &ProbabilityProfile::uniform(2, 3),
            &RunConfig::default(),
            &DelayTopology::string(3),
            Bootstrap::Empty,
        );
        assert!(matches!(r, Err(Error::DimensionMismatch { .. })));
    }
}
