use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ordinal_rl::deep::{DqnConfig, Experience, OrdinalDqn};
use ordinal_rl::envs::{Chain, Environment};
use ordinal_rl::ordinal::{OrdinalTier, TierMap};
use ordinal_rl::tabular::{ActionTable, OrdinalQTable};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    // Random walks with arbitrary learning rates never produce negative mass.
    #[test]
    fn ordinal_tables_stay_nonnegative(seed in any::<u64>(), alpha in 0.0f64..=1.0, gamma in 0.0f64..0.99) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut env = Chain::new();
        let tiers = TierMap::from_rewards(&env.spec().rewards).unwrap();
        let mut table = OrdinalQTable::new(5, 2, tiers.tiers());
        for _ in 0..20 {
            let mut s = env.reset(0)[0] as usize;
            loop {
                let a = table.act(s, 0.5, &mut rng).unwrap();
                let out = env.step(a).unwrap();
                let next = out.next_state[0] as usize;
                let tier = tiers.tier_of(out.reward).unwrap();
                table.step(s, a, tier, next, out.terminal, alpha, gamma, &mut rng).unwrap();
                if out.done() {
                    break;
                }
                s = next;
            }
        }
        for s in 0..5 {
            for a in 0..2 {
                prop_assert!(table.distribution(s, a).mass().iter().all(|&m| m >= 0.0 && m.is_finite()));
            }
        }
    }

    // Targets are nonnegative with mass in [1, 1 + gamma * max clamped target mass].
    #[test]
    fn ordinal_dqn_targets_are_valid(seed in any::<u64>(), terminal in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = DqnConfig { hidden: vec![6], batch: 8, ..DqnConfig::default() };
        let dqn = OrdinalDqn::new(3, 3, 4, cfg.clone(), seed).unwrap();
        let batch: Vec<Experience<OrdinalTier>> = (0..8)
            .map(|_| Experience {
                state: (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect(),
                action: rng.gen_range(0..3),
                reward: OrdinalTier::new(rng.gen_range(1..=4), 4).unwrap(),
                next_state: (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect(),
                terminal: terminal && rng.gen_bool(0.5),
            })
            .collect();
        let refs: Vec<&Experience<OrdinalTier>> = batch.iter().collect();
        let (_, targets) = dqn.targets(&refs, &mut rng).unwrap();
        for (i, e) in batch.iter().enumerate() {
            let row = targets.row(i);
            prop_assert!(row.iter().all(|&v| v >= 0.0));
            let mass: f64 = row.sum();
            let max_mass = (0..3)
                .map(|a| {
                    dqn.target_net(a)
                        .forward(&e.next_state)
                        .unwrap()
                        .iter()
                        .map(|v| v.max(0.0))
                        .sum::<f64>()
                })
                .fold(0.0, f64::max);
            prop_assert!(mass >= 1.0 - 1e-12);
            prop_assert!(mass <= 1.0 + cfg.gamma * max_mass + 1e-9);
            if e.terminal {
                prop_assert_eq!(mass, 1.0);
            }
        }
    }
}
