//! Strategy profiles, objective oracles and exhaustive property checks.
//!
//! Agents choose strategies by dense index `0..K`. [`Choice::EMPTY`] marks an
//! agent that abstains; it contributes nothing, so the all-empty profile has
//! value zero.

use std::fmt;

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng;

/// One agent's pick: a strategy index or the empty strategy.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Choice(u32);

impl Choice {
    pub const EMPTY: Choice = Choice(u32::MAX);

    pub fn strategy(index: usize) -> Self {
        assert!(index < u32::MAX as usize, "strategy index overflow");
        Choice(index as u32)
    }

    pub fn index(self) -> Option<usize> {
        if self.is_empty() {
            None
        } else {
            Some(self.0 as usize)
        }
    }

    pub fn is_empty(self) -> bool {
        self == Self::EMPTY
    }
}

impl From<usize> for Choice {
    fn from(index: usize) -> Self {
        Choice::strategy(index)
    }
}

impl fmt::Debug for Choice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.index() {
            Some(i) => write!(f, "{i}"),
            None => f.write_str("-"),
        }
    }
}

impl fmt::Display for Choice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// One choice per agent.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StrategyProfile(Vec<Choice>);

impl StrategyProfile {
    pub fn new(choices: Vec<Choice>) -> Self {
        Self(choices)
    }

    /// The all-empty profile for `agents` agents.
    pub fn empty(agents: usize) -> Self {
        Self(vec![Choice::EMPTY; agents])
    }

    pub fn from_indices(indices: &[usize]) -> Self {
        Self(indices.iter().map(|&i| Choice::strategy(i)).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn choices(&self) -> &[Choice] {
        &self.0
    }

    pub fn get(&self, agent: usize) -> Choice {
        self.0[agent]
    }

    pub fn set(&mut self, agent: usize, choice: Choice) {
        self.0[agent] = choice;
    }

    /// Copy of this profile with `agent` switched to `choice`.
    pub fn with(&self, agent: usize, choice: Choice) -> Self {
        let mut out = self.clone();
        out.0[agent] = choice;
        out
    }

    /// Strategy indices when no agent is empty.
    pub fn indices(&self) -> Option<Vec<usize>> {
        self.0.iter().map(|c| c.index()).collect()
    }
}

impl fmt::Debug for StrategyProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.0.iter()).finish()
    }
}

impl fmt::Display for StrategyProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// A set function over strategy profiles shared by every agent.
///
/// Implementations must be pure and safe to call from several threads.
pub trait Objective: Send + Sync {
    /// Number of agents `I`.
    fn agents(&self) -> usize;

    /// Strategies per agent `K`.
    fn strategies(&self) -> usize;

    /// `F(A)` without bounds checks. Empty entries contribute nothing.
    fn value(&self, profile: &[Choice]) -> f64;

    /// Upper bound on every value, used for gradient sanity checks.
    fn upper_bound(&self) -> f64 {
        f64::INFINITY
    }

    /// Fills `out[a] = F(a; context_{-agent})` for every strategy `a`.
    ///
    /// `context[agent]` is ignored.
    fn values_for_agent(&self, context: &[Choice], agent: usize, out: &mut [f64]) {
        let mut scratch = context.to_vec();
        for (a, slot) in out.iter_mut().enumerate() {
            scratch[agent] = Choice::strategy(a);
            *slot = self.value(&scratch);
        }
    }
}

impl<T: Objective + ?Sized> Objective for &T {
    fn agents(&self) -> usize {
        (**self).agents()
    }
    fn strategies(&self) -> usize {
        (**self).strategies()
    }
    fn value(&self, profile: &[Choice]) -> f64 {
        (**self).value(profile)
    }
    fn upper_bound(&self) -> f64 {
        (**self).upper_bound()
    }
    fn values_for_agent(&self, context: &[Choice], agent: usize, out: &mut [f64]) {
        (**self).values_for_agent(context, agent, out)
    }
}

/// Checks `profile` against the oracle's dimensions.
pub fn validate_profile<O: Objective + ?Sized>(
    oracle: &O,
    profile: &StrategyProfile,
) -> Result<()> {
    if profile.len() != oracle.agents() {
        return Err(Error::DimensionMismatch {
            expected: oracle.agents(),
            actual: profile.len(),
        });
    }
    let k = oracle.strategies();
    for (agent, c) in profile.choices().iter().enumerate() {
        if let Some(strategy) = c.index() {
            if strategy >= k {
                return Err(Error::StrategyOutOfRange { agent, strategy, k });
            }
        }
    }
    Ok(())
}

/// `F(A)` with dimension and range checks.
pub fn evaluate<O: Objective + ?Sized>(oracle: &O, profile: &StrategyProfile) -> Result<f64> {
    validate_profile(oracle, profile)?;
    Ok(oracle.value(profile.choices()))
}

/// `F(A ∪ {a}) − F(A)` where `agent` is empty in `A` and takes `strategy`.
pub fn marginal_gain<O: Objective + ?Sized>(
    oracle: &O,
    profile: &StrategyProfile,
    agent: usize,
    strategy: usize,
) -> Result<f64> {
    validate_profile(oracle, profile)?;
    if agent >= oracle.agents() {
        return Err(Error::AgentOutOfRange {
            agent,
            agents: oracle.agents(),
        });
    }
    if strategy >= oracle.strategies() {
        return Err(Error::StrategyOutOfRange {
            agent,
            strategy,
            k: oracle.strategies(),
        });
    }
    if !profile.get(agent).is_empty() {
        return Err(Error::SlotOccupied(agent));
    }
    let base = oracle.value(profile.choices());
    let grown = profile.with(agent, Choice::strategy(strategy));
    Ok(oracle.value(grown.choices()) - base)
}

/// Oracle backed by a closure. Handy for tests and synthetic objectives.
pub struct FnObjective<F> {
    agents: usize,
    strategies: usize,
    f: F,
}

impl<F> FnObjective<F>
where
    F: Fn(&[Choice]) -> f64 + Send + Sync,
{
    pub fn new(agents: usize, strategies: usize, f: F) -> Self {
        Self {
            agents,
            strategies,
            f,
        }
    }
}

impl<F> Objective for FnObjective<F>
where
    F: Fn(&[Choice]) -> f64 + Send + Sync,
{
    fn agents(&self) -> usize {
        self.agents
    }
    fn strategies(&self) -> usize {
        self.strategies
    }
    fn value(&self, profile: &[Choice]) -> f64 {
        (self.f)(profile)
    }
}

/// Universes at or below this many users store liker sets as bitsets.
pub const BITSET_THRESHOLD: usize = 4096;

#[derive(Clone, Debug, PartialEq, Eq)]
enum LikerSet {
    Bits(Vec<u64>),
    Sorted(Vec<u32>),
}

/// Unweighted coverage: `F(A) = |⋃ U(a_i)|` over the chosen strategies.
///
/// Every agent draws from the same candidate list, so two agents picking the
/// same strategy cover its users once.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoverageObjective {
    agents: usize,
    universe: usize,
    words: usize,
    sets: Vec<LikerSet>,
}

impl CoverageObjective {
    /// Builds the objective from per-strategy user ids in `0..universe`.
    pub fn new(agents: usize, universe: usize, liker_sets: Vec<Vec<u32>>) -> Result<Self> {
        if agents == 0 {
            return Err(Error::InvalidConfig(
                "coverage objective needs at least one agent".into(),
            ));
        }
        if liker_sets.is_empty() {
            return Err(Error::InvalidConfig(
                "coverage objective needs at least one strategy".into(),
            ));
        }
        let words = universe.div_ceil(64).max(1);
        let bitsets = universe <= BITSET_THRESHOLD;
        let mut sets = Vec::with_capacity(liker_sets.len());
        for (strategy, mut ids) in liker_sets.into_iter().enumerate() {
            ids.sort_unstable();
            ids.dedup();
            if let Some(&last) = ids.last() {
                if last as usize >= universe {
                    return Err(Error::InvalidConfig(format!(
                        "strategy {strategy} lists user {last} outside a universe of {universe}"
                    )));
                }
            }
            sets.push(if bitsets {
                let mut bits = vec![0u64; words];
                for id in ids {
                    bits[id as usize / 64] |= 1 << (id % 64);
                }
                LikerSet::Bits(bits)
            } else {
                LikerSet::Sorted(ids)
            });
        }
        Ok(Self {
            agents,
            universe,
            words,
            sets,
        })
    }

    pub fn universe_size(&self) -> usize {
        self.universe
    }

    /// Sorted user ids liking `strategy`.
    pub fn liker_ids(&self, strategy: usize) -> Vec<u32> {
        match &self.sets[strategy] {
            LikerSet::Sorted(ids) => ids.clone(),
            LikerSet::Bits(bits) => bits
                .iter()
                .enumerate()
                .flat_map(|(w, &word)| {
                    (0..64)
                        .filter(move |b| word >> b & 1 == 1)
                        .map(move |b| (w * 64 + b) as u32)
                })
                .collect(),
        }
    }

    pub fn liker_count(&self, strategy: usize) -> usize {
        match &self.sets[strategy] {
            LikerSet::Sorted(ids) => ids.len(),
            LikerSet::Bits(bits) => bits.iter().map(|w| w.count_ones() as usize).sum(),
        }
    }

    /// Users liking at least one candidate; no profile can cover more.
    pub fn involved_users(&self) -> usize {
        let mut acc = vec![0u64; self.words];
        for s in 0..self.sets.len() {
            self.union_into(&mut acc, s);
        }
        popcount(&acc)
    }

    /// Same objective with a different agent count.
    pub fn with_agents(&self, agents: usize) -> Self {
        Self {
            agents,
            ..self.clone()
        }
    }

    fn union_into(&self, acc: &mut [u64], strategy: usize) {
        match &self.sets[strategy] {
            LikerSet::Bits(bits) => {
                for (a, b) in acc.iter_mut().zip(bits) {
                    *a |= b;
                }
            }
            LikerSet::Sorted(ids) => {
                for &id in ids {
                    acc[id as usize / 64] |= 1 << (id % 64);
                }
            }
        }
    }

    fn count_new(&self, covered: &[u64], strategy: usize) -> usize {
        match &self.sets[strategy] {
            LikerSet::Bits(bits) => bits
                .iter()
                .zip(covered)
                .map(|(b, c)| (b & !c).count_ones() as usize)
                .sum(),
            LikerSet::Sorted(ids) => ids
                .iter()
                .filter(|&&id| covered[id as usize / 64] >> (id % 64) & 1 == 0)
                .count(),
        }
    }
}

fn popcount(words: &[u64]) -> usize {
    words.iter().map(|w| w.count_ones() as usize).sum()
}

impl Objective for CoverageObjective {
    fn agents(&self) -> usize {
        self.agents
    }

    fn strategies(&self) -> usize {
        self.sets.len()
    }

    fn value(&self, profile: &[Choice]) -> f64 {
        let mut acc = vec![0u64; self.words];
        for c in profile {
            if let Some(s) = c.index() {
                self.union_into(&mut acc, s);
            }
        }
        popcount(&acc) as f64
    }

    fn upper_bound(&self) -> f64 {
        self.universe as f64
    }

    fn values_for_agent(&self, context: &[Choice], agent: usize, out: &mut [f64]) {
        let mut acc = vec![0u64; self.words];
        for (j, c) in context.iter().enumerate() {
            if j == agent {
                continue;
            }
            if let Some(s) = c.index() {
                self.union_into(&mut acc, s);
            }
        }
        let base = popcount(&acc);
        for (a, slot) in out.iter_mut().enumerate() {
            *slot = (base + self.count_new(&acc, a)) as f64;
        }
    }
}

/// `radix^digits`, or `None` on overflow.
pub fn checked_count(radix: usize, digits: usize) -> Option<u64> {
    (radix as u64).checked_pow(u32::try_from(digits).ok()?)
}

/// Mixed-radix odometer over profiles. Digit `k` of a radix-`k + 1` space
/// stands for EMPTY.
#[derive(Clone, Debug)]
pub struct ProfileSpace {
    agents: usize,
    strategies: usize,
    with_empty: bool,
}

impl ProfileSpace {
    pub fn new(agents: usize, strategies: usize, with_empty: bool) -> Self {
        Self {
            agents,
            strategies,
            with_empty,
        }
    }

    pub fn radix(&self) -> usize {
        self.strategies + usize::from(self.with_empty)
    }

    pub fn size(&self) -> Option<u64> {
        checked_count(self.radix(), self.agents)
    }

    fn digit_choice(&self, d: usize) -> Choice {
        if d == self.strategies {
            Choice::EMPTY
        } else {
            Choice::strategy(d)
        }
    }

    /// Profile at lexicographic position `index` (agent 0 most significant).
    pub fn decode(&self, mut index: u64) -> StrategyProfile {
        let radix = self.radix() as u64;
        let mut choices = vec![Choice::EMPTY; self.agents];
        for slot in choices.iter_mut().rev() {
            *slot = self.digit_choice((index % radix) as usize);
            index /= radix;
        }
        StrategyProfile::new(choices)
    }

    pub fn encode(&self, profile: &[Choice]) -> u64 {
        let radix = self.radix() as u64;
        profile.iter().fold(0, |acc, c| {
            let d = c.index().unwrap_or(self.strategies) as u64;
            acc * radix + d
        })
    }

    /// Every profile in lexicographic order.
    pub fn iter(&self) -> impl Iterator<Item = StrategyProfile> + '_ {
        let total = self.size().expect("profile space overflow");
        (0..total).map(move |i| self.decode(i))
    }
}

fn require_within(required: Option<u64>, limit: u64) -> Result<u64> {
    match required {
        Some(n) if n <= limit => Ok(n),
        Some(n) => Err(Error::TooLarge { required: n, limit }),
        None => Err(Error::TooLarge {
            required: u64::MAX,
            limit,
        }),
    }
}

/// A witnessed failure of monotonicity or submodularity.
#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    Monotone {
        subset: StrategyProfile,
        superset: StrategyProfile,
        subset_value: f64,
        superset_value: f64,
    },
    Submodular {
        subset: StrategyProfile,
        superset: StrategyProfile,
        agent: usize,
        strategy: usize,
        subset_gain: f64,
        superset_gain: f64,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckReport {
    pub violation: Option<Violation>,
    pub oracle_calls: u64,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.violation.is_none()
    }
}

const CHECK_TOL: f64 = 1e-12;

fn exceeds(lhs: f64, rhs: f64) -> bool {
    lhs > rhs + CHECK_TOL * lhs.abs().max(rhs.abs()).max(1.0)
}

/// Evaluates every profile (EMPTY included) once.
fn value_table<O: Objective + ?Sized>(oracle: &O, limit: u64) -> Result<(ProfileSpace, Vec<f64>)> {
    let space = ProfileSpace::new(oracle.agents(), oracle.strategies(), true);
    require_within(space.size(), limit)?;
    let table = space.iter().map(|p| oracle.value(p.choices())).collect();
    Ok((space, table))
}

/// Exhaustively checks `F(A') ≤ F(A)` for every profile `A` and every `A'`
/// obtained by blanking one agent. Containment chains make this complete.
pub fn check_monotone<O: Objective + ?Sized>(oracle: &O, limit: u64) -> Result<CheckReport> {
    let (space, table) = value_table(oracle, limit)?;
    let radix = space.radix() as u64;
    let empty_digit = oracle.strategies() as u64;
    let agents = oracle.agents();
    for (idx, &value) in table.iter().enumerate() {
        let idx = idx as u64;
        for agent in 0..agents {
            let weight = radix.pow((agents - 1 - agent) as u32);
            let digit = idx / weight % radix;
            if digit == empty_digit {
                continue;
            }
            let smaller = idx - digit * weight + empty_digit * weight;
            let smaller_value = table[smaller as usize];
            if exceeds(smaller_value, value) {
                return Ok(CheckReport {
                    violation: Some(Violation::Monotone {
                        subset: space.decode(smaller),
                        superset: space.decode(idx),
                        subset_value: smaller_value,
                        superset_value: value,
                    }),
                    oracle_calls: table.len() as u64,
                });
            }
        }
    }
    Ok(CheckReport {
        violation: None,
        oracle_calls: table.len() as u64,
    })
}

/// Exhaustively checks diminishing returns over every triple
/// `(A' ⊆ A, agent free in A, strategy)`.
pub fn check_submodular<O: Objective + ?Sized>(oracle: &O, limit: u64) -> Result<CheckReport> {
    let (space, table) = value_table(oracle, limit)?;
    let radix = space.radix() as u64;
    let k = oracle.strategies() as u64;
    let agents = oracle.agents();
    let weights: Vec<u64> = (0..agents)
        .map(|a| radix.pow((agents - 1 - a) as u32))
        .collect();
    let calls = table.len() as u64;

    for idx in 0..table.len() as u64 {
        let digits: Vec<u64> = weights.iter().map(|w| idx / w % radix).collect();
        let filled: Vec<usize> = (0..agents).filter(|&a| digits[a] != k).collect();
        let free: Vec<usize> = (0..agents).filter(|&a| digits[a] == k).collect();
        if free.is_empty() {
            continue;
        }
        for mask in 0u64..(1 << filled.len()) {
            // A' keeps the filled slots selected by `mask`.
            let mut sub = idx;
            for (bit, &a) in filled.iter().enumerate() {
                if mask >> bit & 1 == 0 {
                    sub = sub - digits[a] * weights[a] + k * weights[a];
                }
            }
            for &agent in &free {
                for s in 0..k {
                    // Free slot holds digit k; switching it to s subtracts (k - s) * w.
                    let shift = (k - s) * weights[agent];
                    let sub_gain = table[(sub - shift) as usize] - table[sub as usize];
                    let sup_gain = table[(idx - shift) as usize] - table[idx as usize];
                    if exceeds(sup_gain, sub_gain) {
                        return Ok(CheckReport {
                            violation: Some(Violation::Submodular {
                                subset: space.decode(sub),
                                superset: space.decode(idx),
                                agent,
                                strategy: s as usize,
                                subset_gain: sub_gain,
                                superset_gain: sup_gain,
                            }),
                            oracle_calls: calls,
                        });
                    }
                }
            }
        }
    }
    Ok(CheckReport {
        violation: None,
        oracle_calls: calls,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DeltaMaxMode {
    Exact,
    Sampled { samples: usize, seed: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DeltaMaxOptions {
    /// Let context entries be EMPTY as well as real strategies.
    pub include_empty: bool,
    pub limit: u64,
}

impl Default for DeltaMaxOptions {
    fn default() -> Self {
        Self {
            include_empty: true,
            limit: crate::DEFAULT_ENUMERATION_LIMIT,
        }
    }
}

/// Largest gap between two strategies of one agent over a context.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DeltaMaxEstimate {
    pub value: f64,
    /// True when every context was enumerated; otherwise `value` is a lower bound.
    pub exact: bool,
    pub samples_used: u64,
    /// Whether every enumerated context had a unique best strategy.
    /// Only known in exact mode.
    pub distinguishable: Option<bool>,
}

pub fn delta_max<O: Objective + ?Sized>(
    oracle: &O,
    mode: DeltaMaxMode,
    opts: DeltaMaxOptions,
) -> Result<DeltaMaxEstimate> {
    let agents = oracle.agents();
    let k = oracle.strategies();
    let mut values = vec![0.0; k];
    let spread = |vals: &[f64]| {
        let (lo, hi) = vals
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        hi - lo
    };

    match mode {
        DeltaMaxMode::Exact => {
            let space = ProfileSpace::new(agents.saturating_sub(1), k, opts.include_empty);
            let contexts = space.size();
            let calls = contexts.and_then(|c| c.checked_mul((agents * k) as u64));
            let calls = require_within(calls, opts.limit)?;
            let mut best = 0.0f64;
            let mut distinguishable = true;
            let mut context = vec![Choice::EMPTY; agents];
            for agent in 0..agents {
                for others in space.iter() {
                    let mut it = others.choices().iter();
                    for (j, slot) in context.iter_mut().enumerate() {
                        if j != agent {
                            *slot = *it.next().unwrap();
                        }
                    }
                    oracle.values_for_agent(&context, agent, &mut values);
                    best = best.max(spread(&values));
                    let top = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    if values.iter().filter(|&&v| v == top).count() > 1 {
                        distinguishable = false;
                    }
                }
            }
            Ok(DeltaMaxEstimate {
                value: best,
                exact: true,
                samples_used: calls,
                distinguishable: Some(distinguishable),
            })
        }
        DeltaMaxMode::Sampled { samples, seed } => {
            let mut rng = rng::aux_stream(seed, 0xDE17A);
            let radix = k + usize::from(opts.include_empty);
            let mut best = 0.0f64;
            let mut context = vec![Choice::EMPTY; agents];
            for _ in 0..samples {
                let agent = rng.gen_range(0..agents);
                for slot in context.iter_mut() {
                    let d = rng.gen_range(0..radix);
                    *slot = if d == k {
                        Choice::EMPTY
                    } else {
                        Choice::strategy(d)
                    };
                }
                oracle.values_for_agent(&context, agent, &mut values);
                best = best.max(spread(&values));
            }
            Ok(DeltaMaxEstimate {
                value: best,
                exact: false,
                samples_used: samples as u64,
                distinguishable: None,
            })
        }
    }
}
