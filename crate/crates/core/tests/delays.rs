use proptest::prelude::*;

use submax::baselines::{enumerate_equilibria, TieRule};
use submax::ingest::{synth_instance, SynthOptions};
use submax::network::{run_algorithm2, run_algorithm2_traced, Bootstrap, DelayTopology};
use submax::optimizer::run_algorithm1;
use submax::{ProbabilityProfile, RunConfig, DEFAULT_ENUMERATION_LIMIT};

fn small_instance(seed: u64) -> submax::CoverageObjective {
    synth_instance(5, 4, 25, 0.25, seed, SynthOptions::default()).unwrap()
}

fn cfg(seed: u64, iters: usize) -> RunConfig {
    RunConfig {
        gamma: 0.05,
        max_iters: iters,
        seed,
        ..Default::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn lookups_follow_the_delay_matrix(seed in 0u64..1000, which in 0usize..4, offset in 0usize..2) {
        let topo = match which {
            0 => DelayTopology::complete(5),
            1 => DelayTopology::string(5),
            2 => DelayTopology::ring(5),
            _ => DelayTopology::star(5),
        }
        .with_hop_offset(offset)
        .unwrap();
        let f = small_instance(seed);
        let run = run_algorithm2_traced(&f, &ProbabilityProfile::uniform(5, 4), &cfg(seed, 30), &topo, Bootstrap::Empty).unwrap();
        prop_assert!(run.max_lookup_age <= topo.max_delay());
        prop_assert_eq!(run.provenance.len(), 30 * 5 * 4);
        for r in &run.provenance {
            let tau = topo.delay(r.receiver, r.sender);
            let expected = r.iteration.checked_sub(tau);
            prop_assert_eq!(r.source, expected);
        }
    }
}

#[test]
fn zero_delay_matches_the_synchronous_run() {
    let f = small_instance(5);
    let p0 = ProbabilityProfile::uniform(5, 4);
    let c = RunConfig {
        record_trace: true,
        ..cfg(9, 300)
    };
    let a = run_algorithm1(&f, &p0, &c).unwrap();
    let b = run_algorithm2(
        &f,
        &p0,
        &c,
        &DelayTopology::zero(5),
        Bootstrap::UniformSample,
    )
    .unwrap();
    assert_eq!(a.trace, b.trace);
    assert_eq!(a.final_profile, b.final_profile);
}

#[test]
fn equilibrium_start_is_stable_with_sampled_bootstrap() {
    let f = small_instance(17);
    let eq = enumerate_equilibria(&f, 1e-12, TieRule::Weak, DEFAULT_ENUMERATION_LIMIT).unwrap();
    let p0 = ProbabilityProfile::from_strategies(&eq[0].profile, 4, false).unwrap();
    let c = RunConfig {
        allow_vertex_start: true,
        ..cfg(3, 200)
    };
    // An EMPTY placeholder changes the gradient, so only the sampled
    // bootstrap is guaranteed to leave the vertex untouched.
    let out = run_algorithm2(
        &f,
        &p0,
        &c,
        &DelayTopology::string(5),
        Bootstrap::UniformSample,
    )
    .unwrap();
    assert_eq!(out.final_profile, p0);
    assert!(out.trace.sum_sq.iter().all(|&d| d == 0.0));
    assert_eq!(out.equilibrium().map(|(_, a)| a), Some(&eq[0].profile));
}

#[test]
fn delayed_runs_are_reproducible() {
    let f = small_instance(2);
    let p0 = ProbabilityProfile::uniform(5, 4);
    let topo = DelayTopology::string(5);
    let a = run_algorithm2(&f, &p0, &cfg(4, 200), &topo, Bootstrap::Empty).unwrap();
    let b = run_algorithm2(&f, &p0, &cfg(4, 200), &topo, Bootstrap::Empty).unwrap();
    let c = run_algorithm2(&f, &p0, &cfg(5, 200), &topo, Bootstrap::Empty).unwrap();
    assert_eq!(a.trace, b.trace);
    assert_ne!(a.trace, c.trace);
}

#[test]
fn topology_size_must_match() {
    let f = small_instance(1);
    let err = run_algorithm2(
        &f,
        &ProbabilityProfile::uniform(5, 4),
        &cfg(0, 5),
        &DelayTopology::complete(4),
        Bootstrap::Empty,
    );
    assert!(err.is_err());
}
