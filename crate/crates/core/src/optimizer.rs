//! Synchronous projected stochastic gradient ascent.
//!
//! Each iteration every agent draws `M` strategies from its own distribution
//! and publishes them. Agent `i` then averages `F(a; Â_{−i}^s)` over the
//! published batches to estimate its gradient block, and all agents move to
//! `Π(p_i + γ ĝ_i)` at once. Every update reads the same snapshot `P^k`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::multilinear::{
    column_choice, sample_mean_gradient, sample_strategy, ProbabilityProfile,
};
use crate::objective::{
    delta_max, Choice, DeltaMaxMode, DeltaMaxOptions, Objective, StrategyProfile,
};
use crate::rng;
use crate::simplex::projected_step;
use crate::trace::IterationTrace;

/// Step size used in the movie-recommendation experiment.
pub const EXPERIMENT_STEP_SIZE: f64 = 0.0005;
/// Sample size used in the movie-recommendation experiment.
pub const EXPERIMENT_SAMPLE_SIZE: usize = 3;

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub gamma: f64,
    pub sample_size: usize,
    pub max_iters: usize,
    pub seed: u64,
    pub eps_vertex: f64,
    pub eps_eq: f64,
    pub stop_on_equilibrium: bool,
    /// Keep every `P^k`; otherwise only displacements and the last profile.
    pub record_trace: bool,
    /// Equilibrium detection runs every `check_every` iterations.
    pub check_every: usize,
    /// Accept an initial profile made only of vertices.
    pub allow_vertex_start: bool,
    /// Known `Δ^max`, used only to warn when `γ ≥ 2/Δ^max`.
    pub delta_max_hint: Option<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            gamma: EXPERIMENT_STEP_SIZE,
            sample_size: EXPERIMENT_SAMPLE_SIZE,
            max_iters: 1000,
            seed: 0,
            eps_vertex: 1e-9,
            eps_eq: 1e-12,
            stop_on_equilibrium: false,
            record_trace: false,
            check_every: 10,
            allow_vertex_start: false,
            delta_max_hint: None,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidStepSize(self.gamma));
        }
        if self.sample_size == 0 {
            return Err(Error::InvalidConfig(
                "sample size must be at least 1".into(),
            ));
        }
        if self.check_every == 0 {
            return Err(Error::InvalidConfig(
                "check_every must be at least 1".into(),
            ));
        }
        if !(self.eps_vertex >= 0.0 && self.eps_vertex < 0.5) {
            return Err(Error::InvalidConfig(format!(
                "eps_vertex {} outside [0, 0.5)",
                self.eps_vertex
            )));
        }
        if self.eps_eq.is_nan() || self.eps_eq < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "eps_eq {} is negative",
                self.eps_eq
            )));
        }
        Ok(())
    }
}

/// `min(0.0005, 1/Δ̂)` with `Δ̂` a sampled lower estimate of `Δ^max`.
pub fn default_step_size<O: Objective + ?Sized>(oracle: &O, seed: u64) -> f64 {
    step_size_with(oracle, seed, DeltaMaxOptions::default())
}

/// As [`default_step_size`], with explicit `Δ^max` estimation options.
pub fn step_size_with<O: Objective + ?Sized>(oracle: &O, seed: u64, opts: DeltaMaxOptions) -> f64 {
    let est = delta_max(
        oracle,
        DeltaMaxMode::Sampled {
            samples: 2000,
            seed,
        },
        opts,
    )
    .map(|e| e.value)
    .unwrap_or(0.0);
    if est > 0.0 {
        EXPERIMENT_STEP_SIZE.min(1.0 / est)
    } else {
        EXPERIMENT_STEP_SIZE
    }
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub trace: IterationTrace,
    pub final_profile: ProbabilityProfile,
}

impl RunOutcome {
    /// Iteration index and profile of the first detected equilibrium.
    pub fn equilibrium(&self) -> Option<(usize, &StrategyProfile)> {
        self.trace.equilibrium.as_ref().map(|(k, a)| (*k, a))
    }
}

/// `batches[j][s]`: the `s`-th strategy agent `j` published.
pub type SampleBatches = Vec<Vec<Choice>>;

/// Every agent's batch for `iteration`, drawn from its own stream.
pub fn draw_batches(
    p: &ProbabilityProfile,
    k: usize,
    seed: u64,
    iteration: usize,
    sample_size: usize,
) -> Result<SampleBatches> {
    (0..p.agents())
        .map(|j| {
            let mut r = rng::stream(seed, j, iteration);
            (0..sample_size)
                .map(|_| sample_strategy(p.row(j), &mut r).map(|col| column_choice(col, k)))
                .collect()
        })
        .collect()
}

/// Mean of `F` over the `M` published joint profiles.
pub fn batch_value<O: Objective + ?Sized>(oracle: &O, batches: &SampleBatches) -> f64 {
    let m = batches.first().map_or(0, Vec::len);
    if m == 0 {
        return 0.0;
    }
    let mut profile = vec![Choice::EMPTY; batches.len()];
    let mut total = 0.0;
    for s in 0..m {
        for (slot, batch) in profile.iter_mut().zip(batches) {
            *slot = batch[s];
        }
        total += oracle.value(&profile);
    }
    total / m as f64
}

/// New row for `agent` given context entries `entry(j, s)` for `j ≠ agent`.
pub fn agent_update<O, F>(
    oracle: &O,
    p: &ProbabilityProfile,
    agent: usize,
    gamma: f64,
    sample_size: usize,
    entry: F,
) -> Result<Vec<f64>>
where
    O: Objective + ?Sized,
    F: Fn(usize, usize) -> Choice,
{
    let mut contexts: Vec<Vec<Choice>> = (0..sample_size)
        .map(|s| {
            (0..p.agents())
                .map(|j| {
                    if j == agent {
                        Choice::EMPTY
                    } else {
                        entry(j, s)
                    }
                })
                .collect()
        })
        .collect();
    let g = sample_mean_gradient(oracle, agent, p.width(), &mut contexts);
    projected_step(p.row(agent), &g, gamma)
}

/// One synchronous step from published batches, computing agent updates in
/// `order`. Every update reads `p`, so the order cannot matter.
pub fn jacobi_step<O: Objective + ?Sized>(
    oracle: &O,
    p: &ProbabilityProfile,
    batches: &SampleBatches,
    gamma: f64,
    order: &[usize],
) -> Result<ProbabilityProfile> {
    let m = batches.first().map_or(0, Vec::len);
    let mut next = p.clone();
    for &agent in order {
        let row = agent_update(oracle, p, agent, gamma, m, |j, s| batches[j][s])?;
        next.set_row(agent, &row);
    }
    Ok(next)
}

const PARALLEL_WORK: usize = 4096;

/// Runs `update` for every agent, across threads only when the step is large
/// enough to pay for the handoff.
pub(crate) fn update_rows<F>(
    p: &ProbabilityProfile,
    sample_size: usize,
    update: F,
) -> Result<Vec<Vec<f64>>>
where
    F: Fn(usize) -> Result<Vec<f64>> + Sync + Send,
{
    let work = p.agents() * p.width() * sample_size;
    if rayon::current_num_threads() > 1 && work >= PARALLEL_WORK {
        (0..p.agents()).into_par_iter().map(update).collect()
    } else {
        (0..p.agents()).map(update).collect()
    }
}

fn parallel_step<O: Objective + ?Sized>(
    oracle: &O,
    p: &ProbabilityProfile,
    gamma: f64,
    sample_size: usize,
    entry: &(dyn Fn(usize, usize, usize) -> Choice + Sync),
) -> Result<ProbabilityProfile> {
    let rows = update_rows(p, sample_size, |i| {
        agent_update(oracle, p, i, gamma, sample_size, |j, s| entry(i, j, s))
    })?;
    let mut next = p.clone();
    for (i, row) in rows.iter().enumerate() {
        next.set_row(i, row);
    }
    Ok(next)
}

pub(crate) fn check_start<O: Objective + ?Sized>(
    oracle: &O,
    p0: &ProbabilityProfile,
    cfg: &RunConfig,
) -> Result<()> {
    cfg.validate()?;
    p0.check_dims(oracle)?;
    if !cfg.allow_vertex_start
        && p0
            .vertex_profile(oracle.strategies(), cfg.eps_vertex)
            .is_some()
    {
        return Err(Error::VertexStart);
    }
    if let Some(dm) = cfg.delta_max_hint {
        if dm > 0.0 && cfg.gamma >= 2.0 / dm {
            log::warn!(
                "step size {} is not below 2/Δmax = {}; vertex profiles may trap the iteration",
                cfg.gamma,
                2.0 / dm
            );
        }
    }
    Ok(())
}

/// Synchronous iteration without delays.
pub fn run_algorithm1<O: Objective + ?Sized>(
    oracle: &O,
    p0: &ProbabilityProfile,
    cfg: &RunConfig,
) -> Result<RunOutcome> {
    check_start(oracle, p0, cfg)?;
    let k = oracle.strategies();
    let m = cfg.sample_size;
    let mut trace = IterationTrace::new(p0.agents(), cfg.record_trace.then_some(p0));
    let mut p = p0.clone();
    let mut batches = draw_batches(&p, k, cfg.seed, 0, m)?;

    for t in 0..cfg.max_iters {
        let f_sample = batch_value(oracle, &batches);
        let next = parallel_step(oracle, &p, cfg.gamma, m, &|_, j, s| batches[j][s])?;
        let iteration = t + 1;
        let found = (iteration % cfg.check_every == 0)
            .then(|| detect_equilibrium(&next, oracle, cfg.eps_vertex, cfg.eps_eq))
            .flatten();
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
        batches = draw_batches(&p, k, cfg.seed, iteration, m)?;
    }
    Ok(RunOutcome {
        trace,
        final_profile: p,
    })
}

/// An agent with a strictly better unilateral alternative.
#[derive(Clone, Debug, PartialEq)]
pub struct Deviation {
    pub agent: usize,
    pub current: Choice,
    pub better: usize,
    pub current_value: f64,
    pub better_value: f64,
}

/// First agent (by index) that gains more than `eps_eq` by switching, with
/// its best alternative (lowest index on ties).
pub fn equilibrium_violation<O: Objective + ?Sized>(
    oracle: &O,
    profile: &StrategyProfile,
    eps_eq: f64,
) -> Option<Deviation> {
    let mut values = vec![0.0; oracle.strategies()];
    let current_value = oracle.value(profile.choices());
    for agent in 0..profile.len() {
        oracle.values_for_agent(profile.choices(), agent, &mut values);
        let (better, best) = argmax(&values);
        if best > current_value + eps_eq {
            return Some(Deviation {
                agent,
                current: profile.get(agent),
                better,
                current_value,
                better_value: best,
            });
        }
    }
    None
}

/// Lowest index attaining the maximum.
pub(crate) fn argmax(values: &[f64]) -> (usize, f64) {
    values
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| {
            if v > bv {
                (i, v)
            } else {
                (bi, bv)
            }
        })
}

/// No agent can raise `F` by more than `eps_eq` by changing its own strategy.
pub fn is_equilibrium_profile<O: Objective + ?Sized>(
    oracle: &O,
    profile: &StrategyProfile,
    eps_eq: f64,
) -> bool {
    equilibrium_violation(oracle, profile, eps_eq).is_none()
}

/// Rounds `p` to a strategy profile when every row is a vertex and returns it
/// if it is an equilibrium.
pub fn detect_equilibrium<O: Objective + ?Sized>(
    p: &ProbabilityProfile,
    oracle: &O,
    eps_vertex: f64,
    eps_eq: f64,
) -> Option<StrategyProfile> {
    let a = p.vertex_profile(oracle.strategies(), eps_vertex)?;
    is_equilibrium_profile(oracle, &a, eps_eq).then_some(a)
}
