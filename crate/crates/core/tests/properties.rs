use detour_core::agent::{detect_step, hard_weighted_em, AgentConfig};
use detour_core::discovery::{conditional_entropy, normalized_transfer_entropy, transfer_entropy};
use detour_core::environment::{env_step, WorldConfig, WorldState, Point};
use detour_core::harness::ExperimentConfig;
use detour_core::network::{
    expected_utility, predict_joint, select_action_meu, utility_distribution, DiscreteAction,
    DiscreteObservation, ObsVar, TwoSliceNetwork, UtilityModel,
};
use detour_core::rng::substream;
use detour_core::surprise::{
    entropy, influence_probability, information_dispersion, kl_divergence, surprise_coefficient,
    surprise_divergence, two_sided_p_value, Distribution,
};
use proptest::prelude::*;
use proptest::sample::subsequence;
use rand::Rng;

fn distribution(k: usize) -> impl Strategy<Value = Distribution> {
    prop::collection::vec(0.001f64..1.0, k).prop_map(|w| Distribution::from_counts(&w).unwrap())
}

fn pair() -> impl Strategy<Value = (Distribution, Distribution)> {
    (2usize..9).prop_flat_map(|k| (distribution(k), distribution(k)))
}

fn observation() -> impl Strategy<Value = DiscreteObservation> {
    (0usize..220).prop_map(DiscreteObservation::from_index)
}

fn action() -> impl Strategy<Value = DiscreteAction> {
    (0usize..5, 0usize..11).prop_map(|(f, a)| DiscreteAction::new(f, a).unwrap())
}

fn hidden_vars() -> impl Strategy<Value = Vec<ObsVar>> {
    subsequence(ObsVar::ALL.to_vec(), 1..=4)
}

/// A network with a hidden variable whose tables are filled at random.
fn random_hidden_network(vars: &[ObsVar], seed: u64) -> TwoSliceNetwork {
    let mut net = TwoSliceNetwork::initial().insert_hidden(vars, vars).unwrap();
    let mut rng = substream(seed, &[99]);
    let mut tables: Vec<_> = net.hidden_children().into_iter().map(|v| net.cpt(v).clone()).collect();
    tables.push(net.hidden().unwrap().cpt().clone());
    for mut t in tables {
        for i in 0..t.config_count() {
            let w: Vec<f64> = (0..t.child_cardinality()).map(|_| rng.random::<f64>() + 0.01).collect();
            let s: f64 = w.iter().sum();
            t.set_column(i, w.into_iter().map(|x| x / s).collect()).unwrap();
        }
        net.replace_table(t).unwrap();
    }
    net
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn information_measures_are_well_behaved((q, p) in pair()) {
        let h = entropy(&p);
        prop_assert!(h >= 0.0 && h <= (p.len() as f64).ln() + 1e-12);
        prop_assert!(information_dispersion(&p) >= 0.0);
        prop_assert!(kl_divergence(&q, &p).unwrap() >= 0.0);
        prop_assert_eq!(surprise_divergence(&p, &p).unwrap(), 0.0);
        let lhs = surprise_divergence(&q, &p).unwrap();
        let rhs = (kl_divergence(&q, &p).unwrap() + entropy(&q) - entropy(&p))
            / information_dispersion(&p).sqrt();
        prop_assert!((lhs - rhs).abs() <= 1e-9 * rhs.abs().max(1.0));
    }

    #[test]
    fn surprise_test_outputs_are_in_range(p in (2usize..9).prop_flat_map(distribution), i in 0usize..8) {
        let i = i % p.len();
        let c = surprise_coefficient(i, &p).unwrap();
        prop_assert!(c >= 0.0);
        let pv = two_sided_p_value(c);
        prop_assert!((0.0..=1.0).contains(&pv));
    }

    #[test]
    fn influence_probability_is_antisymmetric(c in -50.0f64..50.0) {
        let (a, b) = (influence_probability(c), influence_probability(-c));
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert!((a + b - 1.0).abs() <= 1e-12);
        let on_its_side = if c < 0.0 { a <= 0.5 } else { a >= 0.5 };
        prop_assert!(on_its_side);
    }

    #[test]
    fn hidden_networks_stay_stochastic(vars in hidden_vars(), seed in any::<u64>(), o in observation(), a in action()) {
        let net = random_hidden_network(&vars, seed);
        for t in net.all_tables() {
            for col in t.columns() {
                prop_assert!((col.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
            }
        }
        let joint = predict_joint(&net, &o, &a, None).unwrap();
        prop_assert!((joint.probs().iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        let ud = utility_distribution(&net, &o, &a).unwrap();
        prop_assert!((ud.mean() - expected_utility(&net, &o, &a).unwrap()).abs() <= 1e-9);
    }

    #[test]
    fn insertion_is_neutral(vars in hidden_vars(), o in observation(), a in action()) {
        let base = TwoSliceNetwork::initial();
        let with = base.insert_hidden(&vars, &vars).unwrap();
        let p = predict_joint(&base, &o, &a, None).unwrap();
        let q = predict_joint(&with, &o, &a, None).unwrap();
        for (x, y) in p.probs().iter().zip(q.probs()) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn meu_argmax_survives_affine_rescaling(o in observation(), scale in 0.1f64..10.0, offset in -20.0f64..20.0) {
        let base = TwoSliceNetwork::initial();
        let moved = base.clone().with_utility(UtilityModel { scale, offset });
        let (a, eu) = select_action_meu(&base, &o).unwrap();
        let (b, eu2) = select_action_meu(&moved, &o).unwrap();
        prop_assert_eq!(a, b);
        prop_assert!((eu2 - (scale * eu + offset)).abs() <= 1e-9 * eu2.abs().max(1.0));
    }

    #[test]
    fn agent_stays_in_bounds_and_clear(x in 0.0f64..=10.0, y in 0.0f64..=15.0, a in action(), seed in any::<u64>()) {
        let cfg = WorldConfig::default();
        let p = Point::new(x, y);
        prop_assume!(!cfg.barrier_overlaps(p));
        let state = WorldState { agent_position: p, config: cfg };
        let tr = env_step(&state, &a, &mut substream(seed, &[1]));
        prop_assert!(cfg.bounds.contains(tr.state.agent_position));
        prop_assert!(!cfg.barrier_overlaps(tr.state.agent_position));
    }

    #[test]
    fn config_round_trips(
        seed in any::<u64>(),
        alpha in 0.001f64..0.999,
        steps in 1usize..500,
        width in 0.1f64..1.0,
        barrier in any::<bool>(),
        threshold in 0.0f64..1.0,
    ) {
        let mut c = ExperimentConfig::default();
        c.seed = seed;
        c.agent.alpha = alpha;
        c.agent.steps_per_epoch = steps;
        c.world.agent_width = width;
        c.world.barrier_exists = barrier;
        c.discovery.threshold = threshold;
        prop_assert_eq!(ExperimentConfig::from_json(&c.to_json().unwrap()).unwrap(), c);
    }

    #[test]
    fn entropy_estimates_are_ordered(x in prop::collection::vec(0usize..3, 2..200), seed in any::<u64>()) {
        let mut rng = substream(seed, &[7]);
        let y: Vec<usize> = x.iter().map(|_| rng.random_range(0..3)).collect();
        let h = conditional_entropy(&y, &[]).unwrap();
        let hx = conditional_entropy(&y, &[&x]).unwrap();
        prop_assert!(hx <= h + 1e-12 && hx >= -1e-12);
        prop_assert!(transfer_entropy(&x, &y, 1).unwrap() >= 0.0);
        if let Ok(n) = normalized_transfer_entropy(&x, &y, &[]) {
            prop_assert!((0.0..=1.0).contains(&n));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn em_never_lowers_its_objective(
        vars in hidden_vars(),
        steps in prop::collection::vec((observation(), action(), observation()), 1..40),
        seed in any::<u64>(),
    ) {
        let base = TwoSliceNetwork::initial();
        let net = base.insert_hidden(&vars, &vars).unwrap();
        let data: Vec<_> = steps
            .iter()
            .map(|(o, a, o1)| detect_step(&base, o, a, o1, 0.2).unwrap())
            .collect();
        let config = AgentConfig::default();
        let (fitted, log) = hard_weighted_em(&net, &data, &config, seed, 0).unwrap();
        for it in &log.iterations {
            prop_assert!(it.objective_after >= it.objective_before - 1e-9 * it.objective_before.abs().max(1.0));
        }
        prop_assert!(log.iterations.len() <= config.max_iters);
        let hidden = fitted.hidden().unwrap();
        let visited: std::collections::BTreeSet<usize> =
            data.iter().map(|r| hidden.config_of(&r.obs_t)).collect();
        for i in (0..hidden.cpt().config_count()).filter(|i| !visited.contains(i)) {
            prop_assert_eq!(hidden.cpt().column(i), &[0.5, 0.5]);
        }
    }
}
