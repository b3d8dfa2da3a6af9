//! The multi-linear extension `f(P) = E[F(Ã)]` with `ã_i ~ p_i` independent,
//! its exact gradient and the sampled estimator used by the optimizer.
//!
//! Because `f` is linear in each agent's row, the partial derivative with
//! respect to `p_i(a)` is the expected value of `F(a; Ã_{−i})`. Sampling the
//! other agents' strategies therefore gives an unbiased gradient whose
//! entries are themselves oracle values.

use rand::Rng;

use crate::error::{Error, Result};
use crate::objective::{checked_count, Choice, Objective, StrategyProfile};
use crate::simplex::{self, check_feasible};

/// One distribution per agent, stored row-major.
///
/// Rows have `K` entries, or `K + 1` when the empty strategy is itself
/// samplable; the extra last column then stands for EMPTY.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbabilityProfile {
    agents: usize,
    width: usize,
    data: Vec<f64>,
}

impl ProbabilityProfile {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let agents = rows.len();
        if agents == 0 {
            return Err(Error::InvalidConfig(
                "profile needs at least one agent".into(),
            ));
        }
        let width = rows[0].len();
        let mut data = Vec::with_capacity(agents * width);
        for (agent, row) in rows.into_iter().enumerate() {
            if row.len() != width {
                return Err(Error::DimensionMismatch {
                    expected: width,
                    actual: row.len(),
                });
            }
            check_feasible(&row).map_err(|reason| Error::InvalidDistribution { agent, reason })?;
            data.extend(row);
        }
        Ok(Self {
            agents,
            width,
            data,
        })
    }

    /// Every row uniform over `width` entries.
    pub fn uniform(agents: usize, width: usize) -> Self {
        Self {
            agents,
            width,
            data: vec![1.0 / width as f64; agents * width],
        }
    }

    /// The vertex profile encoding `profile`. EMPTY entries need `width = K + 1`.
    pub fn from_strategies(
        profile: &StrategyProfile,
        k: usize,
        include_empty: bool,
    ) -> Result<Self> {
        let width = k + usize::from(include_empty);
        let mut data = vec![0.0; profile.len() * width];
        for (agent, c) in profile.choices().iter().enumerate() {
            let col = match c.index() {
                Some(s) if s < k => s,
                Some(s) => {
                    return Err(Error::StrategyOutOfRange {
                        agent,
                        strategy: s,
                        k,
                    })
                }
                None if include_empty => k,
                None => {
                    return Err(Error::InvalidDistribution {
                        agent,
                        reason: "EMPTY is not a samplable strategy".into(),
                    })
                }
            };
            data[agent * width + col] = 1.0;
        }
        Ok(Self {
            agents: profile.len(),
            width,
            data,
        })
    }

    pub fn agents(&self) -> usize {
        self.agents
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn row(&self, agent: usize) -> &[f64] {
        &self.data[agent * self.width..(agent + 1) * self.width]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.width)
    }

    pub(crate) fn set_row(&mut self, agent: usize, row: &[f64]) {
        self.data[agent * self.width..(agent + 1) * self.width].copy_from_slice(row);
    }

    /// Checks the profile against an oracle with `k` strategies.
    pub fn check_dims<O: Objective + ?Sized>(&self, oracle: &O) -> Result<()> {
        if self.agents != oracle.agents() {
            return Err(Error::DimensionMismatch {
                expected: oracle.agents(),
                actual: self.agents,
            });
        }
        let k = oracle.strategies();
        if self.width != k && self.width != k + 1 {
            return Err(Error::DimensionMismatch {
                expected: k,
                actual: self.width,
            });
        }
        Ok(())
    }

    /// Rounds to a strategy profile when every row is a vertex within `tol`.
    pub fn vertex_profile(&self, k: usize, tol: f64) -> Option<StrategyProfile> {
        self.rows()
            .map(|row| simplex::is_vertex(row, tol).map(|col| column_choice(col, k)))
            .collect::<Option<Vec<_>>>()
            .map(StrategyProfile::new)
    }

    /// Squared Euclidean distance between matching rows.
    pub fn row_sq_distance(&self, other: &Self, agent: usize) -> f64 {
        self.row(agent)
            .iter()
            .zip(other.row(agent))
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }
}

/// Column `col` of a row over `k` strategies (column `k` is EMPTY).
pub fn column_choice(col: usize, k: usize) -> Choice {
    if col >= k {
        Choice::EMPTY
    } else {
        Choice::strategy(col)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GradientKind {
    Full,
    Sampled { sample_size: usize },
}

/// Partial derivatives of `f` with respect to one agent's row.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientBlock {
    pub agent: usize,
    pub values: Vec<f64>,
    pub kind: GradientKind,
    /// Context profiles behind a sampled estimate, when requested.
    pub samples: Option<Vec<StrategyProfile>>,
}

/// `F(a; context_{−agent})` for every column of a row of `width` entries.
pub fn column_values<O: Objective + ?Sized>(
    oracle: &O,
    context: &mut [Choice],
    agent: usize,
    out: &mut [f64],
) {
    let k = oracle.strategies();
    oracle.values_for_agent(context, agent, &mut out[..k]);
    if out.len() > k {
        let saved = context[agent];
        context[agent] = Choice::EMPTY;
        out[k] = oracle.value(context);
        context[agent] = saved;
    }
}

fn require_calls(required: Option<u64>, limit: u64) -> Result<()> {
    match required {
        Some(n) if n <= limit => Ok(()),
        Some(n) => Err(Error::TooLarge { required: n, limit }),
        None => Err(Error::TooLarge {
            required: u64::MAX,
            limit,
        }),
    }
}

/// Exact `f(P)` by summing over every profile.
pub fn eval_f_exact<O: Objective + ?Sized>(
    oracle: &O,
    p: &ProbabilityProfile,
    limit: u64,
) -> Result<f64> {
    p.check_dims(oracle)?;
    require_calls(checked_count(p.width(), p.agents()), limit)?;
    let k = oracle.strategies();
    let mut profile = vec![Choice::EMPTY; p.agents()];
    Ok(expand(oracle, p, k, 0, 1.0, &mut profile))
}

// Depth-first sum over the profile tree; zero-probability branches are pruned.
fn expand<O: Objective + ?Sized>(
    oracle: &O,
    p: &ProbabilityProfile,
    k: usize,
    depth: usize,
    weight: f64,
    profile: &mut [Choice],
) -> f64 {
    if depth == p.agents() {
        return weight * oracle.value(profile);
    }
    let mut total = 0.0;
    for (col, &prob) in p.row(depth).iter().enumerate() {
        if prob == 0.0 {
            continue;
        }
        profile[depth] = column_choice(col, k);
        total += expand(oracle, p, k, depth + 1, weight * prob, profile);
    }
    profile[depth] = Choice::EMPTY;
    total
}

/// Exact gradient block for `agent`, enumerating every context.
pub fn full_gradient<O: Objective + ?Sized>(
    oracle: &O,
    p: &ProbabilityProfile,
    agent: usize,
    limit: u64,
) -> Result<GradientBlock> {
    p.check_dims(oracle)?;
    if agent >= p.agents() {
        return Err(Error::AgentOutOfRange {
            agent,
            agents: p.agents(),
        });
    }
    let contexts = checked_count(p.width(), p.agents() - 1);
    require_calls(
        contexts.and_then(|c| c.checked_mul(p.width() as u64)),
        limit,
    )?;
    let k = oracle.strategies();
    let mut values = vec![0.0; p.width()];
    let mut scratch = vec![0.0; p.width()];
    let mut context = vec![Choice::EMPTY; p.agents()];
    gradient_walk(
        oracle,
        p,
        k,
        agent,
        0,
        1.0,
        &mut context,
        &mut scratch,
        &mut values,
    );
    Ok(GradientBlock {
        agent,
        values,
        kind: GradientKind::Full,
        samples: None,
    })
}

#[allow(clippy::too_many_arguments)]
fn gradient_walk<O: Objective + ?Sized>(
    oracle: &O,
    p: &ProbabilityProfile,
    k: usize,
    agent: usize,
    depth: usize,
    weight: f64,
    context: &mut [Choice],
    scratch: &mut [f64],
    acc: &mut [f64],
) {
    if depth == p.agents() {
        column_values(oracle, context, agent, scratch);
        for (a, v) in acc.iter_mut().zip(scratch.iter()) {
            *a += weight * v;
        }
        return;
    }
    if depth == agent {
        gradient_walk(
            oracle,
            p,
            k,
            agent,
            depth + 1,
            weight,
            context,
            scratch,
            acc,
        );
        return;
    }
    for (col, &prob) in p.row(depth).iter().enumerate() {
        if prob == 0.0 {
            continue;
        }
        context[depth] = column_choice(col, k);
        gradient_walk(
            oracle,
            p,
            k,
            agent,
            depth + 1,
            weight * prob,
            context,
            scratch,
            acc,
        );
    }
    context[depth] = Choice::EMPTY;
}

/// Draws a column with probability `row[col]` by inverse-CDF sampling.
pub fn sample_strategy<R: Rng + ?Sized>(row: &[f64], rng: &mut R) -> Result<usize> {
    let total: f64 = row.iter().sum();
    if !total.is_finite() || total <= 1e-12 {
        return Err(Error::DegenerateRow(total));
    }
    let u = rng.gen::<f64>() * total;
    let mut cum = 0.0;
    let mut last_positive = 0;
    for (i, &x) in row.iter().enumerate() {
        if x <= 0.0 {
            continue;
        }
        cum += x;
        last_positive = i;
        if u < cum {
            return Ok(i);
        }
    }
    Ok(last_positive)
}

/// Averages `F(a; context)` over the given contexts for each column.
///
/// The summation order is fixed (context by context) so that callers
/// assembling the same contexts get bit-identical results.
pub fn sample_mean_gradient<O: Objective + ?Sized>(
    oracle: &O,
    agent: usize,
    width: usize,
    contexts: &mut [Vec<Choice>],
) -> Vec<f64> {
    let mut acc = vec![0.0; width];
    let mut scratch = vec![0.0; width];
    for context in contexts.iter_mut() {
        column_values(oracle, context, agent, &mut scratch);
        for (a, v) in acc.iter_mut().zip(&scratch) {
            *a += v;
        }
    }
    let m = contexts.len() as f64;
    acc.iter_mut().for_each(|a| *a /= m);
    acc
}

/// Sampled gradient from `sample_size` i.i.d. context profiles.
///
/// One batch of contexts is shared by every column of the block.
pub fn stochastic_gradient<O: Objective + ?Sized, R: Rng + ?Sized>(
    oracle: &O,
    p: &ProbabilityProfile,
    agent: usize,
    sample_size: usize,
    rng: &mut R,
    keep_samples: bool,
) -> Result<GradientBlock> {
    p.check_dims(oracle)?;
    if sample_size == 0 {
        return Err(Error::InvalidConfig(
            "sample size must be at least 1".into(),
        ));
    }
    if agent >= p.agents() {
        return Err(Error::AgentOutOfRange {
            agent,
            agents: p.agents(),
        });
    }
    let k = oracle.strategies();
    let mut contexts = Vec::with_capacity(sample_size);
    for _ in 0..sample_size {
        let mut ctx = vec![Choice::EMPTY; p.agents()];
        for (j, slot) in ctx.iter_mut().enumerate() {
            if j != agent {
                *slot = column_choice(sample_strategy(p.row(j), rng)?, k);
            }
        }
        contexts.push(ctx);
    }
    let values = sample_mean_gradient(oracle, agent, p.width(), &mut contexts);
    Ok(GradientBlock {
        agent,
        values,
        kind: GradientKind::Sampled { sample_size },
        samples: keep_samples.then(|| contexts.into_iter().map(StrategyProfile::new).collect()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::{CoverageObjective, FnObjective};
    use crate::rng;
    use crate::DEFAULT_ENUMERATION_LIMIT as LIMIT;

    fn cov(agents: usize, universe: usize, sets: &[&[u32]]) -> CoverageObjective {
        CoverageObjective::new(agents, universe, sets.iter().map(|s| s.to_vec()).collect()).unwrap()
    }

    #[test]
    fn vertex_profile_collapses_to_f() {
        let f = cov(3, 5, &[&[0, 1], &[2], &[3, 4, 0]]);
        let a = StrategyProfile::from_indices(&[2, 0, 2]);
        let p = ProbabilityProfile::from_strategies(&a, 3, false).unwrap();
        assert_eq!(eval_f_exact(&f, &p, LIMIT).unwrap(), 4.0);
    }

    #[test]
    fn uniform_two_agent_average() {
        // Values: [0,0]=1, [0,1]=2, [1,0]=2, [1,1]=1 -> mean 1.5
        let f = cov(2, 2, &[&[0], &[1]]);
        let p = ProbabilityProfile::uniform(2, 2);
        assert_eq!(eval_f_exact(&f, &p, LIMIT).unwrap(), 1.5);
    }

    #[test]
    fn constant_oracle_gives_constant() {
        let f = FnObjective::new(3, 3, |_: &[Choice]| 4.25);
        let p = ProbabilityProfile::new(vec![
            vec![0.2, 0.3, 0.5],
            vec![0.9, 0.05, 0.05],
            vec![0.0, 0.0, 1.0],
        ])
        .unwrap();
        assert!((eval_f_exact(&f, &p, LIMIT).unwrap() - 4.25).abs() < 1e-12);
    }

    #[test]
    fn exact_routines_refuse_large_instances() {
        let f = cov(12, 4, &[&[0], &[1], &[2], &[3]]);
        let p = ProbabilityProfile::uniform(12, 4);
        assert!(matches!(
            eval_f_exact(&f, &p, LIMIT),
            Err(Error::TooLarge { .. })
        ));
        assert!(matches!(
            full_gradient(&f, &p, 0, LIMIT),
            Err(Error::TooLarge { .. })
        ));
    }

    #[test]
    fn gradient_with_vertex_context() {
        let f = cov(2, 4, &[&[0, 1], &[1, 2], &[3]]);
        let other = 1;
        let mut p = ProbabilityProfile::uniform(2, 3);
        p.set_row(1, &[0.0, 1.0, 0.0]);
        let g = full_gradient(&f, &p, 0, LIMIT).unwrap();
        let mut expected = vec![0.0; 3];
        let ctx = StrategyProfile::from_indices(&[0, other]);
        f.values_for_agent(ctx.choices(), 0, &mut expected);
        assert_eq!(g.values, expected);
        assert_eq!(g.values, vec![3.0, 2.0, 3.0]);
    }

    #[test]
    fn single_agent_gradient_is_values() {
        let f = cov(1, 4, &[&[0, 1], &[1, 2, 3], &[3]]);
        let p = ProbabilityProfile::uniform(1, 3);
        assert_eq!(
            full_gradient(&f, &p, 0, LIMIT).unwrap().values,
            vec![2.0, 3.0, 1.0]
        );
    }

    #[test]
    fn three_agent_gradient_four_context_average() {
        // U(0) = {0}, U(1) = {1, 2}. Contexts for agents 1, 2 each uniform.
        // entry 0: contexts (0,0)->1, (0,1)->3, (1,0)->3, (1,1)->3 => 2.5
        // entry 1: contexts (0,0)->3, (0,1)->3, (1,0)->3, (1,1)->2 => 2.75
        let f = cov(3, 3, &[&[0], &[1, 2]]);
        let p = ProbabilityProfile::uniform(3, 2);
        let g = full_gradient(&f, &p, 0, LIMIT).unwrap();
        assert_eq!(g.values, vec![2.5, 2.75]);
    }

    #[test]
    fn sampling_examples() {
        let mut r = rng::stream(1, 0, 0);
        for _ in 0..100 {
            assert_eq!(sample_strategy(&[0.0, 0.0, 1.0, 0.0], &mut r).unwrap(), 2);
        }
        let draw = |seed| {
            let mut r = rng::stream(seed, 0, 0);
            (0..20)
                .map(|_| sample_strategy(&[0.9, 0.1], &mut r).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(5), draw(5));
        assert!(matches!(
            sample_strategy(&[0.0, 0.0], &mut r),
            Err(Error::DegenerateRow(_))
        ));
    }

    #[test]
    fn uniform_sampling_frequencies_within_three_sigma() {
        let mut r = rng::stream(42, 0, 0);
        let n = 100_000;
        let mut counts = [0usize; 4];
        for _ in 0..n {
            counts[sample_strategy(&[0.25; 4], &mut r).unwrap()] += 1;
        }
        let sigma = (n as f64 * 0.25 * 0.75).sqrt();
        for c in counts {
            assert!(
                (c as f64 - n as f64 * 0.25).abs() <= 3.0 * sigma,
                "{counts:?}"
            );
        }
    }

    #[test]
    fn stochastic_equals_full_when_context_is_vertex() {
        let f = cov(3, 6, &[&[0, 1], &[2, 3], &[4, 5, 0]]);
        let mut p = ProbabilityProfile::uniform(3, 3);
        p.set_row(1, &[0.0, 0.0, 1.0]);
        p.set_row(2, &[1.0, 0.0, 0.0]);
        let full = full_gradient(&f, &p, 0, LIMIT).unwrap();
        for m in [1, 3, 17] {
            let mut r = rng::stream(9, 0, m);
            let g = stochastic_gradient(&f, &p, 0, m, &mut r, true).unwrap();
            assert_eq!(g.values, full.values);
            assert_eq!(g.samples.unwrap().len(), m);
        }
    }

    #[test]
    fn stochastic_gradient_close_to_full() {
        let f = cov(2, 3, &[&[0], &[1, 2]]);
        let p = ProbabilityProfile::uniform(2, 2);
        let full = full_gradient(&f, &p, 0, LIMIT).unwrap();
        let m = 100_000;
        let mut r = rng::stream(3, 0, 0);
        let g = stochastic_gradient(&f, &p, 0, m, &mut r, false).unwrap();
        // Each entry is a mean of values in {1,3} / {2,3} with variance <= 1.
        let se = (1.0 / m as f64).sqrt();
        for (a, b) in g.values.iter().zip(&full.values) {
            assert!((a - b).abs() <= 3.0 * se, "{a} vs {b}");
        }
    }

    #[test]
    fn empty_column_is_supported() {
        let f = cov(2, 3, &[&[0], &[1, 2]]);
        let p = ProbabilityProfile::new(vec![vec![0.5, 0.0, 0.5], vec![0.0, 0.0, 1.0]]).unwrap();
        // Agent 1 is always EMPTY; agent 0 picks strategy 0 or EMPTY.
        assert_eq!(eval_f_exact(&f, &p, LIMIT).unwrap(), 0.5);
        // Agent 1's columns: {0} -> 1 either way; {1,2} -> 3 or 2; EMPTY -> 1 or 0.
        let g = full_gradient(&f, &p, 1, LIMIT).unwrap();
        assert_eq!(g.values, vec![1.0, 2.5, 0.5]);
        let rounded =
            ProbabilityProfile::from_strategies(&StrategyProfile::empty(2), 2, true).unwrap();
        assert_eq!(
            rounded.vertex_profile(2, 1e-9),
            Some(StrategyProfile::empty(2))
        );
    }

    #[test]
    fn profile_validation() {
        assert!(ProbabilityProfile::new(vec![vec![0.5, 0.4]]).is_err());
        assert!(ProbabilityProfile::new(vec![vec![0.5, 0.5], vec![1.0]]).is_err());
        assert!(ProbabilityProfile::from_strategies(&StrategyProfile::empty(1), 2, false).is_err());
    }
}
