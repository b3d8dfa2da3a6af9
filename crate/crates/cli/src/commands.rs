use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use submax::baselines::{
    brute_force, certify, enumerate_equilibria, greedy, greedy_with_order, TieRule,
};
use submax::ingest::{build_coverage, load_ratings, synth_instance, SynthOptions, TieCheck};
use submax::instance::{read_instance, read_topology, write_instance};
use submax::network::{run_algorithm2, DelayTopology};
use submax::objective::DeltaMaxOptions;
use submax::optimizer::{equilibrium_violation, run_algorithm1, step_size_with};
use submax::simplex::check_feasible;
use submax::{
    rng, Choice, CoverageObjective, Objective, ProbabilityProfile, RunConfig, RunOutcome,
    StrategyProfile,
};

use crate::error::{io_context, CliError, CliResult};
use crate::manifest::{
    parse_bootstrap, Algorithm, ExperimentManifest, StepSize, TopologySpec, SCHEMA_VERSION,
};
use crate::{BaselineArgs, IngestArgs, RunArgs, VerifyArgs};

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn create(path: &Path) -> CliResult<BufWriter<fs::File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io_context(parent))?;
    }
    Ok(BufWriter::new(
        fs::File::create(path).map_err(io_context(path))?,
    ))
}

fn load_instance(path: &Path) -> CliResult<CoverageObjective> {
    let file = fs::File::open(path).map_err(io_context(path))?;
    read_instance(BufReader::new(file)).map_err(|e| match e {
        submax::Error::Io(io) => io_context(path)(io),
        other => CliError::Validation(format!("{}: {other}", path.display())),
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn choices_of(profile: &StrategyProfile) -> Vec<Option<usize>> {
    profile.choices().iter().map(|c| c.index()).collect()
}

// ---------------------------------------------------------------- ingest

/// Parses `I=4,K=5,U=30,d=0.2`.
fn parse_synth(spec: &str) -> CliResult<(usize, usize, usize, f64)> {
    let (mut i, mut k, mut u, mut d) = (None, None, None, None);
    for part in spec.split(',') {
        let (key, value) = part
            .split_once('=')
            .ok_or_else(|| usage(format!("synthetic spec entry `{part}` is not `key=value`")))?;
        let bad = || {
            usage(format!(
                "invalid value `{value}` for `{key}` in synthetic spec"
            ))
        };
        match key.trim() {
            "I" => i = Some(value.trim().parse().map_err(|_| bad())?),
            "K" => k = Some(value.trim().parse().map_err(|_| bad())?),
            "U" => u = Some(value.trim().parse().map_err(|_| bad())?),
            "d" => d = Some(value.trim().parse().map_err(|_| bad())?),
            other => {
                return Err(usage(format!(
                    "unknown key `{other}` in synthetic spec (expected I, K, U, d)"
                )))
            }
        }
    }
    match (i, k, u, d) {
        (Some(i), Some(k), Some(u), Some(d)) => Ok((i, k, u, d)),
        _ => Err(usage(format!(
            "synthetic spec `{spec}` needs all of I, K, U and d"
        ))),
    }
}

fn parse_tie_check(s: &str) -> CliResult<TieCheck> {
    match s {
        "off" => Ok(TieCheck::Off),
        "non-flat" => Ok(TieCheck::NonFlat),
        "distinguishable" => Ok(TieCheck::Distinguishable),
        "strict-equilibria" => Ok(TieCheck::StrictEquilibria),
        _ => Err(usage(format!(
            "unknown tie check `{s}` (expected off, non-flat, distinguishable or strict-equilibria)"
        ))),
    }
}

pub fn ingest(a: &IngestArgs) -> CliResult<()> {
    let (objective, movie_ids) = if let Some(spec) = &a.synth {
        let (agents, k, universe, density) = parse_synth(spec)?;
        let opts = SynthOptions {
            tie_check: parse_tie_check(&a.tie_check)?,
            ..Default::default()
        };
        (
            synth_instance(agents, k, universe, density, a.seed, opts)?,
            None,
        )
    } else {
        let path = a.ratings.as_ref().expect("clap enforces one source");
        let table = load_ratings(path).map_err(|e| match e {
            submax::Error::Io(io) => io_context(path)(io),
            other => other.into(),
        })?;
        let build = build_coverage(&table, a.agents, a.rbar, a.min_likers, a.top_n)?;
        (build.objective, Some(build.movie_ids))
    };
    let mut out = create(&a.out)?;
    write_instance(&objective, &mut out)?;
    out.flush()?;
    if let (Some(path), Some(ids)) = (&a.movie_ids, &movie_ids) {
        let mut w = create(path)?;
        for id in ids {
            writeln!(w, "{id}")?;
        }
        w.flush()?;
    }
    println!(
        "candidates {}, involved users {}, universe {}, agents {} -> {}",
        objective.strategies(),
        objective.involved_users(),
        objective.universe_size(),
        objective.agents(),
        a.out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------- run

fn manifest_from(a: &RunArgs) -> CliResult<ExperimentManifest> {
    let mut m = ExperimentManifest::default();
    if let Some(path) = &a.config {
        let text = fs::read_to_string(path).map_err(io_context(path))?;
        m.apply_config(&text)
            .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    }
    if let Some(v) = &a.instance {
        m.instance = v.clone();
    }
    if let Some(v) = &a.alg {
        m.algorithm = v.parse().map_err(usage)?;
    }
    if let Some(v) = &a.gamma {
        m.gamma = v.parse().map_err(usage)?;
    }
    if let Some(v) = a.sample_size {
        m.sample_size = v;
    }
    if let Some(v) = a.iters {
        m.max_iters = v;
    }
    if let Some(v) = a.seed {
        m.seed = v;
    }
    if let Some(v) = a.eps_vertex {
        m.eps_vertex = v;
    }
    if let Some(v) = a.eps_eq {
        m.eps_eq = v;
    }
    if let Some(v) = a.check_every {
        m.check_every = v;
    }
    if let Some(v) = a.stop_on_equilibrium {
        m.stop_on_equilibrium = v;
    }
    if let Some(v) = a.include_empty_strategy {
        m.include_empty_strategy = v;
    }
    if let Some(v) = a.delta_max_includes_empty {
        m.delta_max_includes_empty = v;
    }
    if let Some(v) = &a.topology {
        m.topology = v.parse().map_err(usage)?;
    }
    if let Some(v) = a.hop_offset {
        m.hop_offset = v;
    }
    if let Some(v) = &a.bootstrap {
        m.bootstrap = parse_bootstrap(v).map_err(usage)?;
    }
    if let Some(v) = a.trials {
        m.trials = v;
    }
    if let Some(v) = a.probs {
        m.probs = v;
    }
    if let Some(v) = &a.out {
        m.out = v.clone();
    }
    m.validate()?;
    Ok(m)
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct TopologyInfo {
    pub spec: String,
    pub agents: usize,
    /// Largest delay `D` actually applied.
    pub max_delay: usize,
    /// Largest hop distance, for graph-derived topologies.
    pub max_distance: Option<usize>,
    pub hop_offset: usize,
    pub edges: Option<usize>,
}

struct Prepared {
    objective: CoverageObjective,
    topology: Option<DelayTopology>,
    topology_info: Option<TopologyInfo>,
    gamma: f64,
    width: usize,
}

fn build_topology(m: &ExperimentManifest, agents: usize) -> CliResult<Option<DelayTopology>> {
    if m.algorithm == Algorithm::Alg1 {
        return Ok(None);
    }
    let topo = match &m.topology {
        TopologySpec::None => return Ok(Some(DelayTopology::zero(agents))),
        TopologySpec::Builtin(name) => match name.as_str() {
            "complete" => DelayTopology::complete(agents),
            "string" => DelayTopology::string(agents),
            "ring" => DelayTopology::ring(agents),
            "star" => DelayTopology::star(agents),
            "general10" if agents == 10 => DelayTopology::general_ten(),
            "general10" => {
                return Err(CliError::Validation(format!(
                    "topology general10 has 10 nodes but the instance has {agents} agents"
                )))
            }
            other => unreachable!("unlisted built-in topology {other}"),
        },
        TopologySpec::File(path) => {
            let file = fs::File::open(path).map_err(io_context(path))?;
            let (nodes, edges) = read_topology(BufReader::new(file))
                .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
            if nodes != agents {
                return Err(CliError::Validation(format!(
                    "{}: topology has {nodes} nodes but the instance has {agents} agents",
                    path.display()
                )));
            }
            DelayTopology::from_graph(&edges, nodes)?
        }
    };
    Ok(Some(if m.hop_offset > 0 {
        topo.with_hop_offset(m.hop_offset)?
    } else {
        topo
    }))
}

fn prepare(m: &ExperimentManifest) -> CliResult<Prepared> {
    let objective = load_instance(&m.instance)?;
    let topology = build_topology(m, objective.agents())?;
    let topology_info = topology.as_ref().map(|t| TopologyInfo {
        spec: m.topology.to_string(),
        agents: t.agents(),
        max_delay: t.max_delay(),
        max_distance: t.max_distance(),
        hop_offset: m.hop_offset,
        edges: t.edges().map(<[_]>::len),
    });
    let gamma = match m.gamma {
        StepSize::Fixed(g) => g,
        StepSize::Auto => step_size_with(
            &objective,
            m.seed,
            DeltaMaxOptions {
                include_empty: m.delta_max_includes_empty,
                ..Default::default()
            },
        ),
    };
    let width = objective.strategies() + usize::from(m.include_empty_strategy);
    Ok(Prepared {
        objective,
        topology,
        topology_info,
        gamma,
        width,
    })
}

fn run_config(m: &ExperimentManifest, gamma: f64, seed: u64) -> RunConfig {
    RunConfig {
        gamma,
        sample_size: m.sample_size,
        max_iters: m.max_iters,
        seed,
        eps_vertex: m.eps_vertex,
        eps_eq: m.eps_eq,
        stop_on_equilibrium: m.stop_on_equilibrium,
        record_trace: m.probs,
        check_every: m.check_every,
        allow_vertex_start: false,
        delta_max_hint: None,
    }
}

fn execute(m: &ExperimentManifest, prep: &Prepared, seed: u64) -> CliResult<RunOutcome> {
    let f = &prep.objective;
    let p0 = ProbabilityProfile::uniform(f.agents(), prep.width);
    let cfg = run_config(m, prep.gamma, seed);
    Ok(match &prep.topology {
        None => run_algorithm1(f, &p0, &cfg)?,
        Some(topo) => run_algorithm2(f, &p0, &cfg, topo, m.bootstrap)?,
    })
}

/// Vertex rounding when every row is a vertex, otherwise the most likely
/// strategy of each row (lowest index on ties).
fn round_profile(p: &ProbabilityProfile, k: usize, eps_vertex: f64) -> (StrategyProfile, bool) {
    if let Some(a) = p.vertex_profile(k, eps_vertex) {
        return (a, true);
    }
    let choices = p
        .rows()
        .map(|row| {
            let best = row
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| {
                    if v > bv {
                        (i, v)
                    } else {
                        (bi, bv)
                    }
                })
                .0;
            if best < k {
                Choice::strategy(best)
            } else {
                Choice::EMPTY
            }
        })
        .collect();
    (StrategyProfile::new(choices), false)
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct RunResult {
    pub schema_version: u32,
    pub manifest_hash: String,
    pub algorithm: String,
    pub seed: u64,
    pub gamma: f64,
    pub iterations: usize,
    pub equilibrium: bool,
    pub equilibrium_iteration: Option<usize>,
    /// Rounded final profile; `null` marks an empty slot.
    pub strategies: Vec<Option<usize>>,
    /// Whether every final row was a vertex.
    pub vertex: bool,
    /// Objective value of `strategies`.
    pub value: f64,
    pub final_profile: Vec<Vec<f64>>,
    pub topology: Option<TopologyInfo>,
}

fn result_of(
    m: &ExperimentManifest,
    prep: &Prepared,
    seed: u64,
    out: &RunOutcome,
    hash: &str,
) -> RunResult {
    let f = &prep.objective;
    let (rounded, vertex) = round_profile(&out.final_profile, f.strategies(), m.eps_vertex);
    RunResult {
        schema_version: SCHEMA_VERSION,
        manifest_hash: hash.to_string(),
        algorithm: m.algorithm.to_string(),
        seed,
        gamma: prep.gamma,
        iterations: out.trace.iterations(),
        equilibrium: out.equilibrium().is_some(),
        equilibrium_iteration: out.equilibrium().map(|(k, _)| k),
        value: f.value(rounded.choices()),
        strategies: choices_of(&rounded),
        vertex,
        final_profile: out.final_profile.rows().map(<[f64]>::to_vec).collect(),
        topology: prep.topology_info.clone(),
    }
}

fn write_manifest(m: &ExperimentManifest, prep: &Prepared, dir: &Path) -> CliResult<String> {
    let hash = m.hash();
    let mut w = create(&dir.join("manifest.txt"))?;
    writeln!(w, "# sha256 {hash}")?;
    writeln!(w, "# resolved gamma {}", prep.gamma)?;
    if let Some(t) = &prep.topology_info {
        let distance = t.max_distance.map_or("n/a".to_string(), |d| d.to_string());
        writeln!(
            w,
            "# topology {}: {} agents, max delay {}, max distance {distance}",
            t.spec, t.agents, t.max_delay
        )?;
    }
    w.write_all(m.to_config().as_bytes())?;
    w.flush()?;
    Ok(hash)
}

fn write_traces(m: &ExperimentManifest, out: &RunOutcome, dir: &Path) -> CliResult<()> {
    let mut w = create(&dir.join("trace.csv"))?;
    out.trace.write_csv(&mut w)?;
    w.flush()?;
    if m.probs {
        let mut w = create(&dir.join("probs.csv"))?;
        out.trace.write_probs_csv(&mut w)?;
        w.flush()?;
    }
    Ok(())
}

pub fn run(a: &RunArgs) -> CliResult<()> {
    let m = manifest_from(a)?;
    let prep = prepare(&m)?;
    let out = execute(&m, &prep, m.seed)?;
    fs::create_dir_all(&m.out).map_err(io_context(&m.out))?;
    let hash = write_manifest(&m, &prep, &m.out)?;
    write_traces(&m, &out, &m.out)?;
    let result = result_of(&m, &prep, m.seed, &out, &hash);
    write_json(&m.out.join("result.json"), &result)?;
    match result.equilibrium_iteration {
        Some(k) => println!(
            "equilibrium at iteration {k}, F = {}, {} iterations -> {}",
            result.value,
            result.iterations,
            m.out.display()
        ),
        None => println!(
            "no equilibrium detected, rounded F = {}, {} iterations -> {}",
            result.value,
            result.iterations,
            m.out.display()
        ),
    }
    Ok(())
}

// ---------------------------------------------------------------- montecarlo

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct TrialSummary {
    pub trial: usize,
    pub seed: u64,
    pub equilibrium_iteration: Option<usize>,
    pub value: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct MonteCarloSummary {
    pub schema_version: u32,
    pub manifest_hash: String,
    pub gamma: f64,
    pub trials: Vec<TrialSummary>,
    pub converged: usize,
    /// Median first-equilibrium iteration when every trial converged.
    pub median_equilibrium_iteration: Option<f64>,
    pub topology: Option<TopologyInfo>,
}

fn median(sorted: &[usize]) -> Option<f64> {
    let n = sorted.len();
    match n {
        0 => None,
        _ if n % 2 == 1 => Some(sorted[n / 2] as f64),
        _ => Some((sorted[n / 2 - 1] + sorted[n / 2]) as f64 / 2.0),
    }
}

pub fn montecarlo(a: &RunArgs) -> CliResult<()> {
    let m = manifest_from(a)?;
    let prep = prepare(&m)?;
    let outcomes: Vec<(u64, RunOutcome)> = (0..m.trials)
        .into_par_iter()
        .map(|t| {
            let seed = rng::trial_seed(m.seed, t as u64);
            let mut out = execute(&m, &prep, seed)?;
            // A detected equilibrium is a permanent fixed point, so an early
            // stop is padded to the full horizon for averaging.
            let done = out.trace.iterations();
            if out.equilibrium().is_some() && done < m.max_iters {
                out.trace.extend_at_rest(m.max_iters - done);
            }
            Ok((seed, out))
        })
        .collect::<CliResult<_>>()?;

    fs::create_dir_all(&m.out).map_err(io_context(&m.out))?;
    let hash = write_manifest(&m, &prep, &m.out)?;
    let mut summaries = Vec::with_capacity(m.trials);
    for (t, (seed, out)) in outcomes.iter().enumerate() {
        let dir = m.out.join("trials").join(format!("trial_{t:03}"));
        write_traces(&m, out, &dir)?;
        let result = result_of(&m, &prep, *seed, out, &hash);
        write_json(&dir.join("result.json"), &result)?;
        summaries.push(TrialSummary {
            trial: t,
            seed: *seed,
            equilibrium_iteration: result.equilibrium_iteration,
            value: result.value,
        });
    }

    let horizon = outcomes
        .iter()
        .map(|(_, o)| o.trace.iterations())
        .min()
        .unwrap_or(0);
    let mut w = create(&m.out.join("jk_mean.csv"))?;
    writeln!(w, "iter,J_k_mean")?;
    for k in 0..horizon {
        let total: f64 = outcomes.iter().map(|(_, o)| o.trace.jk[k]).sum();
        writeln!(w, "{},{}", k + 1, total / m.trials as f64)?;
    }
    w.flush()?;

    let mut hits: Vec<usize> = summaries
        .iter()
        .filter_map(|s| s.equilibrium_iteration)
        .collect();
    hits.sort_unstable();
    let converged = hits.len();
    let summary = MonteCarloSummary {
        schema_version: SCHEMA_VERSION,
        manifest_hash: hash,
        gamma: prep.gamma,
        converged,
        median_equilibrium_iteration: if converged == m.trials {
            median(&hits)
        } else {
            None
        },
        trials: summaries,
        topology: prep.topology_info.clone(),
    };
    write_json(&m.out.join("summary.json"), &summary)?;
    println!(
        "{converged}/{} trials reached an equilibrium, median iteration {} -> {}",
        m.trials,
        summary
            .median_equilibrium_iteration
            .map_or("n/a".to_string(), |x| x.to_string()),
        m.out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------- verify

fn parse_profile(text: &str) -> CliResult<StrategyProfile> {
    text.split(',')
        .map(|tok| match tok.trim() {
            "-" => Ok(Choice::EMPTY),
            t => t
                .parse()
                .map(Choice::strategy)
                .map_err(|_| usage(format!("invalid strategy `{t}` in profile"))),
        })
        .collect::<CliResult<Vec<_>>>()
        .map(StrategyProfile::new)
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct ViolationReport {
    pub agent: usize,
    pub current: Option<usize>,
    pub better: usize,
    pub gain: f64,
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct VerifyReport {
    pub strategies: Vec<Option<usize>>,
    pub value: f64,
    pub equilibrium: bool,
    pub violation: Option<ViolationReport>,
    /// Every row of the recorded final profile lies on the simplex.
    pub rows_feasible: Option<bool>,
    /// `brute_force` or `upper_bound`.
    pub reference: String,
    pub reference_value: f64,
    pub ratio: f64,
    pub half_bound_met: bool,
}

pub fn verify(a: &VerifyArgs) -> CliResult<()> {
    let f = load_instance(&a.instance)?;
    let (profile, rows) = match (&a.result, &a.profile) {
        (Some(path), _) => {
            let file = fs::File::open(path).map_err(io_context(path))?;
            let result: RunResult = serde_json::from_reader(BufReader::new(file))
                .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
            let choices = result
                .strategies
                .iter()
                .map(|c| c.map_or(Choice::EMPTY, Choice::strategy))
                .collect();
            (StrategyProfile::new(choices), Some(result.final_profile))
        }
        (None, Some(text)) => (parse_profile(text)?, None),
        (None, None) => unreachable!("clap enforces one subject"),
    };
    submax::objective::validate_profile(&f, &profile)?;

    let value = f.value(profile.choices());
    let violation = if profile.choices().iter().any(|c| c.index().is_none()) {
        // An empty slot is never an equilibrium choice, even when no move gains.
        equilibrium_violation(&f, &profile, a.eps_eq).or_else(|| {
            let agent = profile.choices().iter().position(|c| c.index().is_none())?;
            Some(submax::optimizer::Deviation {
                agent,
                current: Choice::EMPTY,
                better: 0,
                current_value: value,
                better_value: value,
            })
        })
    } else {
        equilibrium_violation(&f, &profile, a.eps_eq)
    };
    let rows_feasible =
        rows.map(|rows| rows.len() == f.agents() && rows.iter().all(|r| check_feasible(r).is_ok()));
    let (reference, reference_value) = match brute_force(&f, a.limit) {
        Ok(best) => ("brute_force", best.value),
        Err(submax::Error::TooLarge { .. }) => ("upper_bound", f.involved_users() as f64),
        Err(e) => return Err(e.into()),
    };
    let ratio = if reference_value > 0.0 {
        value / reference_value
    } else {
        1.0
    };
    let report = VerifyReport {
        strategies: choices_of(&profile),
        value,
        equilibrium: violation.is_none(),
        violation: violation.map(|d| ViolationReport {
            agent: d.agent,
            current: d.current.index(),
            better: d.better,
            gain: d.better_value - d.current_value,
        }),
        rows_feasible,
        reference: reference.to_string(),
        reference_value,
        ratio,
        half_bound_met: 2.0 * value >= reference_value,
    };
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

// ---------------------------------------------------------------- baseline

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct SolutionReport {
    pub strategies: Vec<Option<usize>>,
    pub value: f64,
    pub ratio_vs_optimal: Option<f64>,
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct BaselineReport {
    pub method: String,
    pub optimum: Option<f64>,
    pub solutions: Vec<SolutionReport>,
}

pub fn baseline(a: &BaselineArgs) -> CliResult<()> {
    let f = load_instance(&a.instance)?;
    let optimum = match brute_force(&f, a.limit) {
        Ok(best) => Some(best.value),
        Err(submax::Error::TooLarge { .. }) => None,
        Err(e) => return Err(e.into()),
    };
    let solutions = match a.method.as_str() {
        "greedy" => {
            let g = match &a.order {
                None => greedy(&f),
                Some(text) => {
                    let order = text
                        .split(',')
                        .map(|t| t.trim().parse::<usize>())
                        .collect::<Result<Vec<_>, _>>()
                        .map_err(|_| usage(format!("invalid greedy order `{text}`")))?;
                    greedy_with_order(&f, &order)?
                }
            };
            vec![match optimum {
                Some(opt) => certify(g, opt),
                None => g,
            }]
        }
        "brute-force" => vec![brute_force(&f, a.limit)?],
        "equilibria" => {
            let rule = match a.tie_rule.as_str() {
                "weak" => TieRule::Weak,
                "strict" => TieRule::Strict,
                other => {
                    return Err(usage(format!(
                        "unknown tie rule `{other}` (expected weak or strict)"
                    )))
                }
            };
            enumerate_equilibria(&f, a.eps_eq, rule, a.limit)?
        }
        other => {
            return Err(usage(format!(
                "unknown method `{other}` (expected greedy, brute-force or equilibria)"
            )))
        }
    };
    let report = BaselineReport {
        method: a.method.clone(),
        optimum,
        solutions: solutions
            .into_iter()
            .map(|s| SolutionReport {
                strategies: choices_of(&s.profile),
                value: s.value,
                ratio_vs_optimal: s.ratio_vs_optimal,
            })
            .collect(),
    };
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synth_spec_parsing() {
        assert_eq!(parse_synth("I=4,K=5,U=30,d=0.2").unwrap(), (4, 5, 30, 0.2));
        assert_eq!(parse_synth("d=0.5, U=9, K=2, I=1").unwrap(), (1, 2, 9, 0.5));
        for bad in [
            "I=4,K=5,U=30",
            "I=4,K=5,U=30,d=x",
            "I=4,K=5,U=30,d=0.2,Z=1",
            "I4",
        ] {
            assert!(matches!(parse_synth(bad), Err(CliError::Usage(_))), "{bad}");
        }
    }

    #[test]
    fn profile_parsing() {
        let p = parse_profile("2, -,0").unwrap();
        assert_eq!(choices_of(&p), vec![Some(2), None, Some(0)]);
        assert!(parse_profile("1,x").is_err());
    }

    #[test]
    fn rounding_prefers_vertices_then_argmax() {
        let p = ProbabilityProfile::new(vec![vec![0.0, 1.0], vec![0.5, 0.5]]).unwrap();
        let (a, vertex) = round_profile(&p, 2, 1e-9);
        assert!(!vertex);
        assert_eq!(choices_of(&a), vec![Some(1), Some(0)]);
        let q = ProbabilityProfile::new(vec![vec![0.0, 0.0, 1.0]]).unwrap();
        let (b, vertex) = round_profile(&q, 2, 1e-9);
        assert!(vertex);
        assert_eq!(choices_of(&b), vec![None]);
    }

    #[test]
    fn medians() {
        assert_eq!(median(&[]), None);
        assert_eq!(median(&[3]), Some(3.0));
        assert_eq!(median(&[1, 2, 4, 9]), Some(3.0));
    }
}
