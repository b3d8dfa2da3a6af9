//! Sequential greedy, exhaustive search and equilibrium enumeration.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::objective::{checked_count, Choice, Objective, ProfileSpace, StrategyProfile};
use crate::optimizer::argmax;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolutionKind {
    Greedy,
    BruteForce,
    Equilibrium,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CertifiedSolution {
    pub profile: StrategyProfile,
    pub value: f64,
    pub kind: SolutionKind,
    /// `value / F(A*)`, or 1 when the optimum is 0.
    pub ratio_vs_optimal: Option<f64>,
}

/// How an equilibrium treats alternatives that tie with the current strategy.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TieRule {
    /// No alternative is better by more than `eps_eq`.
    #[default]
    Weak,
    /// Every alternative is worse by more than `eps_eq`.
    Strict,
}

pub(crate) fn ratio(value: f64, optimum: f64) -> f64 {
    if optimum > 0.0 {
        value / optimum
    } else {
        1.0
    }
}

/// Fills agents in index order with their best marginal gain.
pub fn greedy<O: Objective + ?Sized>(oracle: &O) -> CertifiedSolution {
    let order: Vec<usize> = (0..oracle.agents()).collect();
    greedy_with_order(oracle, &order).expect("index order is a permutation")
}

/// Greedy filling agents in `order`, which must be a permutation of `0..I`.
pub fn greedy_with_order<O: Objective + ?Sized>(
    oracle: &O,
    order: &[usize],
) -> Result<CertifiedSolution> {
    let agents = oracle.agents();
    let mut seen = vec![false; agents];
    for &i in order {
        if i >= agents || std::mem::replace(&mut seen[i], true) {
            return Err(Error::InvalidConfig(format!(
                "greedy order {order:?} is not a permutation of 0..{agents}"
            )));
        }
    }
    if order.len() != agents {
        return Err(Error::InvalidConfig(format!(
            "greedy order {order:?} is not a permutation of 0..{agents}"
        )));
    }
    let mut profile = StrategyProfile::empty(agents);
    let mut values = vec![0.0; oracle.strategies()];
    for &agent in order {
        oracle.values_for_agent(profile.choices(), agent, &mut values);
        let (best, _) = argmax(&values);
        profile.set(agent, Choice::strategy(best));
    }
    let value = oracle.value(profile.choices());
    Ok(CertifiedSolution {
        profile,
        value,
        kind: SolutionKind::Greedy,
        ratio_vs_optimal: None,
    })
}

fn space_size<O: Objective + ?Sized>(oracle: &O, per_profile: u64, limit: u64) -> Result<u64> {
    let size = checked_count(oracle.strategies(), oracle.agents());
    let required = size
        .and_then(|s| s.checked_mul(per_profile))
        .unwrap_or(u64::MAX);
    if required > limit {
        return Err(Error::TooLarge { required, limit });
    }
    Ok(size.expect("bounded by limit"))
}

/// Exact optimum over all `K^I` profiles; ties go to the lexicographically
/// smallest profile.
pub fn brute_force<O: Objective + ?Sized>(oracle: &O, limit: u64) -> Result<CertifiedSolution> {
    let size = space_size(oracle, 1, limit)?;
    let space = ProfileSpace::new(oracle.agents(), oracle.strategies(), false);
    let (index, value) = (0..size)
        .into_par_iter()
        .map(|idx| (idx, oracle.value(space.decode(idx).choices())))
        .reduce(
            || (u64::MAX, f64::NEG_INFINITY),
            |a, b| {
                if b.1 > a.1 || (b.1 == a.1 && b.0 < a.0) {
                    b
                } else {
                    a
                }
            },
        );
    Ok(CertifiedSolution {
        profile: space.decode(index),
        value,
        kind: SolutionKind::BruteForce,
        ratio_vs_optimal: Some(1.0),
    })
}

/// True when `profile` is an equilibrium under `rule`.
pub fn is_equilibrium_with<O: Objective + ?Sized>(
    oracle: &O,
    profile: &StrategyProfile,
    eps_eq: f64,
    rule: TieRule,
) -> bool {
    let mut values = vec![0.0; oracle.strategies()];
    (0..profile.len()).all(|agent| {
        let Some(current) = profile.get(agent).index() else {
            return false;
        };
        oracle.values_for_agent(profile.choices(), agent, &mut values);
        let own = values[current];
        values.iter().enumerate().all(|(a, &v)| match rule {
            TieRule::Weak => v <= own + eps_eq,
            TieRule::Strict => a == current || v < own - eps_eq,
        })
    })
}

/// Every vertex profile satisfying the equilibrium condition, in
/// lexicographic order, each rated against the brute-force optimum.
pub fn enumerate_equilibria<O: Objective + ?Sized>(
    oracle: &O,
    eps_eq: f64,
    rule: TieRule,
    limit: u64,
) -> Result<Vec<CertifiedSolution>> {
    let per_profile = (oracle.agents() as u64).saturating_mul(oracle.strategies() as u64);
    let size = space_size(oracle, per_profile, limit)?;
    let optimum = brute_force(oracle, limit)?.value;
    let space = ProfileSpace::new(oracle.agents(), oracle.strategies(), false);
    let found: Vec<CertifiedSolution> = (0..size)
        .into_par_iter()
        .filter_map(|idx| {
            let profile = space.decode(idx);
            is_equilibrium_with(oracle, &profile, eps_eq, rule).then(|| {
                let value = oracle.value(profile.choices());
                CertifiedSolution {
                    profile,
                    value,
                    kind: SolutionKind::Equilibrium,
                    ratio_vs_optimal: Some(ratio(value, optimum)),
                }
            })
        })
        .collect();
    Ok(found)
}

/// Attaches `value / F(A*)` to `solution`.
pub fn certify(mut solution: CertifiedSolution, optimum: f64) -> CertifiedSolution {
    solution.ratio_vs_optimal = Some(ratio(solution.value, optimum));
    solution
}
