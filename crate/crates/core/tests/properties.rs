// SPDX-License-Identifier: Apache-2.0

use proptest::prelude::*;
use socialml::baselines::adaboost_rounds;
use socialml::graph::{build_averaging_matrix, perron_eigenvector, random_connected_adjacency, CombinationMatrix};
use socialml::model::{LabeledDataset, MlpArchitecture, MlpModel};
use socialml::seed;
use socialml::social::{beliefs_from_lambda, decide_agent, BeliefState, Engine};
use socialml::statistics::DebiasedStatistic;

fn random_matrix(k: usize, p: f64, s: u64) -> CombinationMatrix {
    let mut rng = seed::rng(s);
    build_averaging_matrix(&random_connected_adjacency(k, p, &mut rng)).unwrap()
}

fn run(engine: Engine, a: &CombinationMatrix, init: &[Vec<f64>], stats: &[Vec<Vec<f64>>]) -> Vec<Vec<f64>> {
    let mut state = BeliefState {
        lambda: init.to_vec(),
        time: 0,
    };
    for c in stats {
        state = engine.step(&state, a, c).unwrap();
    }
    state.lambda
}

fn engine_strategy() -> impl Strategy<Value = Engine> {
    prop_oneof![Just(Engine::Sl), (0.01f64..0.99).prop_map(|delta| Engine::Asl { delta })]
}

fn stats_strategy(k: usize, m: usize, steps: usize) -> impl Strategy<Value = Vec<Vec<Vec<f64>>>> {
    prop::collection::vec(prop::collection::vec(prop::collection::vec(-5.0f64..5.0, m), k), steps)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn recursion_is_linear(
        engine in engine_strategy(),
        s in any::<u64>(),
        (x, y, ix, iy) in (1usize..6, 1usize..3).prop_flat_map(|(k, m)| (
            stats_strategy(k, m, 10),
            stats_strategy(k, m, 10),
            prop::collection::vec(prop::collection::vec(-3.0f64..3.0, m), k),
            prop::collection::vec(prop::collection::vec(-3.0f64..3.0, m), k),
        )),
        alpha in -2.0f64..2.0,
    ) {
        let a = random_matrix(x[0].len(), 0.4, s);
        let combined: Vec<Vec<Vec<f64>>> = x.iter().zip(&y).map(|(cx, cy)| {
            cx.iter().zip(cy).map(|(u, v)| u.iter().zip(v).map(|(p, q)| p + alpha * q).collect()).collect()
        }).collect();
        let init: Vec<Vec<f64>> = ix.iter().zip(&iy).map(|(u, v)| u.iter().zip(v).map(|(p, q)| p + alpha * q).collect()).collect();
        let lx = run(engine, &a, &ix, &x);
        let ly = run(engine, &a, &iy, &y);
        let lz = run(engine, &a, &init, &combined);
        for k in 0..lz.len() {
            for g in 0..lz[k].len() {
                let expected = lx[k][g] + alpha * ly[k][g];
                prop_assert!((lz[k][g] - expected).abs() <= 1e-12 * (1.0 + expected.abs()));
            }
        }
    }

    #[test]
    fn adaptive_beliefs_stay_bounded(
        delta in 0.01f64..0.99,
        s in any::<u64>(),
        stats in (1usize..6).prop_flat_map(|k| stats_strategy(k, 1, 200)),
        init in -10.0f64..10.0,
    ) {
        let k = stats[0].len();
        let a = random_matrix(k, 0.5, s);
        let cmax = stats.iter().flatten().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        let bound = cmax / delta + init.abs() + 1e-9;
        let mut state = BeliefState { lambda: vec![vec![init]; k], time: 0 };
        for c in &stats {
            state = Engine::Asl { delta }.step(&state, &a, c).unwrap();
            prop_assert!(state.lambda.iter().flatten().all(|l| l.abs() <= bound));
        }
    }

    #[test]
    fn decisions_ignore_positive_rescaling(
        lambda in prop::collection::vec(-50.0f64..50.0, 1..6),
        scale in 1e-3f64..1e3,
    ) {
        let scaled: Vec<f64> = lambda.iter().map(|l| l * scale).collect();
        prop_assert_eq!(decide_agent(&lambda), decide_agent(&scaled));
    }

    #[test]
    fn beliefs_are_a_pmf_matching_decision(lambda in prop::collection::vec(-800.0f64..800.0, 1..6)) {
        let b = beliefs_from_lambda(&lambda);
        prop_assert_eq!(b.len(), lambda.len() + 1);
        prop_assert!((b.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(b.iter().all(|p| (0.0..=1.0).contains(p)));
        let best = b.iter().cloned().fold(f64::MIN, f64::max);
        prop_assert!(b[decide_agent(&lambda)] >= best * (1.0 - 1e-12));
    }

    #[test]
    fn binary_rule_matches_argmax_rule(l in -20.0f64..20.0) {
        let binary = if l >= 0.0 { 0 } else { 1 };
        prop_assert_eq!(decide_agent(&[l]), binary);
        prop_assert_eq!(decide_agent(&[0.0]), 0);
    }

    #[test]
    fn binary_and_multiclass_statistics_agree(s in any::<u64>(), n in 4usize..20) {
        let model = MlpModel::random(MlpArchitecture::new(2, &[5], 2), s).unwrap();
        let mut rng = seed::rng(s ^ 1);
        use rand::Rng;
        let features: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)]).collect();
        let labels: Vec<usize> = (0..n).map(|i| i % 2).collect();
        let d = LabeledDataset::new(features, labels, 2).unwrap();
        let b = DebiasedStatistic::binary(0, model.clone(), &d).unwrap();
        let m = DebiasedStatistic::multiclass(0, model, &d).unwrap();
        for h in &d.features {
            prop_assert!((b.evaluate_scalar(h).unwrap() - m.evaluate(h).unwrap()[0]).abs() <= 1e-12);
        }
    }

    #[test]
    fn sample_weights_remain_a_pmf(
        labels in prop::collection::vec(prop_oneof![Just(1i8), Just(-1i8)], 2..40),
        s in any::<u64>(),
        rounds in 1usize..8,
    ) {
        let mut rng = seed::rng(s);
        use rand::Rng;
        let preds: Vec<Vec<i8>> = (0..rounds)
            .map(|_| labels.iter().map(|&y| if rng.random::<f64>() < 0.3 { -y } else { y }).collect())
            .collect();
        let out = adaboost_rounds(&labels, rounds, |r, _| Ok(preds[r].clone())).unwrap();
        for w in &out.sample_weights {
            prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(w.iter().all(|&v| v >= 0.0 && v.is_finite()));
        }
        prop_assert!(out.errors.iter().all(|e| (0.0..=1.0).contains(e)));
    }

    #[test]
    fn perron_vector_of_random_primitive_matrices(k in 1usize..20, p in 0.05f64..0.9, s in any::<u64>()) {
        let a = random_matrix(k, p, s);
        let pi = perron_eigenvector(&a, 1e-13).unwrap();
        prop_assert!((pi.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(pi.as_slice().iter().all(|&v| v > 0.0));
        let api = a.apply(pi.as_slice());
        for (x, y) in api.iter().zip(pi.as_slice()) {
            prop_assert!((x - y).abs() < 1e-10);
        }
    }
}
