use ordinal_rl::envs::{exact_policy_distributions, Chain, EnvKind, CHAIN_STATES};
use ordinal_rl::harness::{train_seed, Algorithm, ExperimentConfig, TrainedLearner};
use ordinal_rl::ordinal::TierMap;
use ordinal_rl::tabular::ActionTable;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOAL: usize = CHAIN_STATES - 1;

fn config(algo: Algorithm, episodes: usize) -> ExperimentConfig {
    ExperimentConfig {
        env: EnvKind::Chain,
        algo,
        episodes,
        seeds: Some(vec![0]),
        timing: false,
        ..ExperimentConfig::default()
    }
}

fn greedy_policy(table: &dyn ActionTable) -> Vec<usize> {
    (0..GOAL)
        .map(|s| {
            let scores = table.scores(s).unwrap();
            if scores[1] > scores[0] {
                1
            } else {
                0
            }
        })
        .collect()
}

#[test]
fn numeric_q_learning_matches_value_iteration() {
    let q_star = Chain::mdp().value_iteration(0.9, 1e-12);
    let optimal: Vec<usize> = (0..GOAL)
        .map(|s| if q_star[s][1] > q_star[s][0] { 1 } else { 0 })
        .collect();
    for seed in 0..3 {
        let (_, _, learner) = train_seed(&config(Algorithm::Q, 5000), seed).unwrap();
        let TrainedLearner::Q(table) = learner else {
            unreachable!()
        };
        assert_eq!(greedy_policy(&table), optimal);
        let mut worst: f64 = 0.0;
        for s in 0..GOAL {
            for a in 0..2 {
                worst = worst.max((table.get(s, a) - q_star[s][a]).abs());
            }
        }
        assert!(worst < 1e-2, "seed {seed}: Q error {worst}");
    }
}

#[test]
fn ordinal_q_learning_matches_exhaustive_enumeration() {
    let mdp = Chain::mdp();
    let tiers = TierMap::from_rewards(&mdp.rewards()).unwrap();
    let best = mdp.superiority_optimal_policy(0.9, &tiers).unwrap();
    let exact = exact_policy_distributions(&mdp, &best, 0.9, &tiers).unwrap();
    for seed in 0..3 {
        let (_, _, learner) = train_seed(&config(Algorithm::OrdinalQ, 5000), seed).unwrap();
        let TrainedLearner::OrdinalQ(table) = learner else {
            unreachable!()
        };
        assert_eq!(greedy_policy(&table), best[..GOAL].to_vec());
        let mut worst: f64 = 0.0;
        for s in 0..GOAL {
            for a in 0..2 {
                let learned = table.distribution(s, a).mass();
                for (x, y) in learned.iter().zip(exact[s][a].mass()) {
                    assert!(*x >= 0.0);
                    worst = worst.max((x - y).abs());
                }
            }
        }
        assert!(worst < 1e-2, "seed {seed}: D error {worst}");
    }
}

fn small_deep(algo: Algorithm) -> ExperimentConfig {
    let mut cfg = config(algo, 300);
    cfg.hyper.hidden = vec![16];
    cfg.hyper.learning_rate = 0.001;
    cfg.hyper.batch = 32;
    cfg.hyper.sync_period = 50;
    cfg
}

#[test]
fn numeric_dqn_on_one_hot_chain_matches_value_iteration() {
    let (_, _, learner) = train_seed(&small_deep(Algorithm::Dqn), 0).unwrap();
    let TrainedLearner::Dqn(dqn) = learner else {
        unreachable!()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for s in 0..GOAL {
        let x = EnvKind::Chain.features(&[s as f64]);
        assert_eq!(dqn.act(&x, 0.0, &mut rng).unwrap(), 1, "state {s}");
    }
}

#[test]
fn ordinal_dqn_on_one_hot_chain_matches_enumeration() {
    let (_, _, learner) = train_seed(&small_deep(Algorithm::OrdinalDqn), 0).unwrap();
    let TrainedLearner::OrdinalDqn(dqn) = learner else {
        unreachable!()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for s in 0..GOAL {
        let x = EnvKind::Chain.features(&[s as f64]);
        assert_eq!(dqn.act(&x, 0.0, &mut rng).unwrap(), 1, "state {s}");
    }
}
