use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use submax::multilinear::{eval_f_exact, full_gradient};
use submax::objective::{check_monotone, check_submodular};
use submax::optimizer::{draw_batches, jacobi_step, run_algorithm1};
use submax::simplex::{check_feasible, project, projected_step, vertex_fixed_point_check};
use submax::{
    CoverageObjective, Objective, ProbabilityProfile, RunConfig, DEFAULT_ENUMERATION_LIMIT,
};

fn coverage() -> impl Strategy<Value = CoverageObjective> {
    (1usize..=4, 1usize..=4, 1usize..=12).prop_flat_map(|(agents, k, universe)| {
        prop::collection::vec(prop::collection::vec(0..universe as u32, 0..=universe), k)
            .prop_map(move |sets| CoverageObjective::new(agents, universe, sets).unwrap())
    })
}

fn row(k: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1.0, k).prop_map(|mut v| {
        if v.iter().sum::<f64>() == 0.0 {
            v[0] = 1.0;
        }
        let s: f64 = v.iter().sum();
        v.iter().map(|x| x / s).collect()
    })
}

fn instance_and_profile() -> impl Strategy<Value = (CoverageObjective, ProbabilityProfile)> {
    coverage().prop_flat_map(|f| {
        let (agents, k) = (f.agents(), f.strategies());
        prop::collection::vec(row(k), agents)
            .prop_map(move |rows| (f.clone(), ProbabilityProfile::new(rows).unwrap()))
    })
}

proptest! {
    #[test]
    fn projection_is_feasible_and_idempotent(v in prop::collection::vec(-50.0f64..50.0, 1..40)) {
        let p = project(&v).unwrap();
        prop_assert!(check_feasible(p.as_slice()).is_ok());
        let again = project(p.as_slice()).unwrap();
        for (a, b) in p.as_slice().iter().zip(again.as_slice()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn projection_ignores_uniform_shifts(v in prop::collection::vec(-5.0f64..5.0, 1..20), c in -10.0f64..10.0) {
        let a = project(&v).unwrap();
        let shifted: Vec<f64> = v.iter().map(|x| x + c).collect();
        let b = project(&shifted).unwrap();
        for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
            prop_assert!((x - y).abs() <= 1e-9);
        }
    }

    #[test]
    fn projection_beats_every_vertex(v in prop::collection::vec(-3.0f64..3.0, 1..20)) {
        let p = project(&v).unwrap();
        let dist = |q: &[f64]| -> f64 { v.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum() };
        let own = dist(p.as_slice());
        for n in 0..v.len() {
            let mut e = vec![0.0; v.len()];
            e[n] = 1.0;
            prop_assert!(own <= dist(&e) + 1e-12);
        }
    }

    #[test]
    fn vertex_with_top_gradient_is_fixed(k in 1usize..10, n in 0usize..10, g in prop::collection::vec(-5.0f64..5.0, 10), gamma in 1e-4f64..2.0) {
        let n = n % k;
        let mut g = g[..k].to_vec();
        let top = g.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        g[n] = top + 0.5;
        let mut p = vec![0.0; k];
        p[n] = 1.0;
        prop_assert_eq!(projected_step(&p, &g, gamma).unwrap(), p.clone());
        let delta: Vec<f64> = g.iter().map(|x| gamma * x).collect();
        prop_assert!(vertex_fixed_point_check(&p, &delta));
    }

    #[test]
    fn extension_is_linear_in_each_row((f, p) in instance_and_profile()) {
        let value = eval_f_exact(&f, &p, DEFAULT_ENUMERATION_LIMIT).unwrap();
        for agent in 0..f.agents() {
            let g = full_gradient(&f, &p, agent, DEFAULT_ENUMERATION_LIMIT).unwrap();
            let inner: f64 = p.row(agent).iter().zip(&g.values).map(|(a, b)| a * b).sum();
            prop_assert!((value - inner).abs() <= 1e-9);
        }
    }

    #[test]
    fn coverage_is_monotone_and_submodular(f in coverage()) {
        prop_assert!(check_monotone(&f, DEFAULT_ENUMERATION_LIMIT).unwrap().passed());
        prop_assert!(check_submodular(&f, DEFAULT_ENUMERATION_LIMIT).unwrap().passed());
    }

    #[test]
    fn update_order_does_not_matter((f, p) in instance_and_profile(), seed in any::<u64>()) {
        let batches = draw_batches(&p, f.strategies(), seed, 0, 3).unwrap();
        let forward: Vec<usize> = (0..f.agents()).collect();
        let backward: Vec<usize> = forward.iter().rev().copied().collect();
        let a = jacobi_step(&f, &p, &batches, 0.05, &forward).unwrap();
        let b = jacobi_step(&f, &p, &batches, 0.05, &backward).unwrap();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn rows_stay_feasible_over_a_long_run() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let sets: Vec<Vec<u32>> = (0..6)
        .map(|_| {
            (0..25u32)
                .filter(|_| rand::Rng::gen_bool(&mut rng, 0.3))
                .collect()
        })
        .collect();
    let f = CoverageObjective::new(4, 25, sets).unwrap();
    let cfg = RunConfig {
        gamma: 0.02,
        max_iters: 10_000,
        record_trace: true,
        ..Default::default()
    };
    let out = run_algorithm1(&f, &ProbabilityProfile::uniform(4, 6), &cfg).unwrap();
    for p in out.trace.profiles.as_ref().unwrap() {
        for row in p.rows() {
            assert!(check_feasible(row).is_ok());
            assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        }
    }
}
