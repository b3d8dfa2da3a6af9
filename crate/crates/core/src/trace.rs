//! Per-iteration records of a run and their CSV exports.

use std::io::Write;

use crate::error::{Error, Result};
use crate::multilinear::ProbabilityProfile;
use crate::objective::StrategyProfile;

/// Header of `trace.csv`.
pub const TRACE_HEADER: &str = "iter,J_k,sum_sq_displacement,f_sample,equilibrium_flag";

/// Header of `probs.csv`.
pub const PROBS_HEADER: &str = "iter,agent,strategy,probability";

/// Everything recorded while iterating. Row `t` (0-based) describes the step
/// from `P^t` to `P^{t+1}`, reported as iteration `t + 1`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct IterationTrace {
    agents: usize,
    cumulative: f64,
    /// `‖p_i^{t+1} − p_i^t‖²` for every agent, row-major by iteration.
    pub agent_sq: Vec<f64>,
    pub sum_sq: Vec<f64>,
    pub jk: Vec<f64>,
    /// Mean objective value over the sampled profiles of `P^t`.
    pub f_samples: Vec<f64>,
    pub equilibrium_flags: Vec<bool>,
    /// `P^0, P^1, …` when full recording is on.
    pub profiles: Option<Vec<ProbabilityProfile>>,
    /// First iteration at which an equilibrium was detected, with the rounded profile.
    pub equilibrium: Option<(usize, StrategyProfile)>,
}

impl IterationTrace {
    pub(crate) fn new(agents: usize, initial: Option<&ProbabilityProfile>) -> Self {
        Self {
            agents,
            profiles: initial.map(|p| vec![p.clone()]),
            ..Default::default()
        }
    }

    pub fn iterations(&self) -> usize {
        self.sum_sq.len()
    }

    pub fn agent_displacements(&self, iteration: usize) -> &[f64] {
        let t = iteration - 1;
        &self.agent_sq[t * self.agents..(t + 1) * self.agents]
    }

    pub(crate) fn push(
        &mut self,
        prev: &ProbabilityProfile,
        next: &ProbabilityProfile,
        f_sample: f64,
        flag: bool,
    ) {
        let mut total = 0.0;
        for agent in 0..self.agents {
            let d = next.row_sq_distance(prev, agent);
            self.agent_sq.push(d);
            total += d;
        }
        self.sum_sq.push(total);
        self.cumulative += total;
        self.jk.push(self.cumulative / self.sum_sq.len() as f64);
        self.f_samples.push(f_sample);
        self.equilibrium_flags.push(flag);
        if let Some(profiles) = self.profiles.as_mut() {
            profiles.push(next.clone());
        }
    }

    /// Appends `extra` zero-displacement iterations, as produced by a run that
    /// stopped at a permanent fixed point.
    pub fn extend_at_rest(&mut self, extra: usize) {
        let f = self.f_samples.last().copied().unwrap_or(0.0);
        for _ in 0..extra {
            self.agent_sq.extend(std::iter::repeat_n(0.0, self.agents));
            self.sum_sq.push(0.0);
            self.jk.push(self.cumulative / self.sum_sq.len() as f64);
            self.f_samples.push(f);
            self.equilibrium_flags.push(false);
            if let Some(profiles) = self.profiles.as_mut() {
                let last = profiles
                    .last()
                    .cloned()
                    .expect("trajectory starts with P^0");
                profiles.push(last);
            }
        }
    }

    /// Writes `trace.csv`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{TRACE_HEADER}")?;
        for t in 0..self.iterations() {
            writeln!(
                out,
                "{},{},{},{},{}",
                t + 1,
                self.jk[t],
                self.sum_sq[t],
                self.f_samples[t],
                u8::from(self.equilibrium_flags[t])
            )?;
        }
        Ok(())
    }

    /// Writes `probs.csv`; requires full recording.
    pub fn write_probs_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let profiles = self.profiles.as_ref().ok_or_else(|| {
            Error::InvalidConfig("probability trajectory was not recorded".into())
        })?;
        writeln!(out, "{PROBS_HEADER}")?;
        for (t, p) in profiles.iter().enumerate() {
            for (agent, row) in p.rows().enumerate() {
                for (s, prob) in row.iter().enumerate() {
                    writeln!(out, "{t},{agent},{s},{prob}")?;
                }
            }
        }
        Ok(())
    }
}

/// Running averages `J^k = (1/k) Σ_{t≤k} s_t` of per-iteration squared displacements.
pub fn compute_jk(sum_sq: &[f64]) -> Result<Vec<f64>> {
    if sum_sq.is_empty() {
        return Err(Error::EmptyHistory);
    }
    let mut acc = 0.0;
    Ok(sum_sq
        .iter()
        .enumerate()
        .map(|(t, s)| {
            acc += s;
            acc / (t + 1) as f64
        })
        .collect())
}
