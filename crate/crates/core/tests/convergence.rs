mod oracles;

use hyql_core::context::StateId;
use hyql_core::qlearning::{ActionId, QTable};
use hyql_core::seeded_rng;
use rand::Rng;

const BUDGET: u32 = 200_000;

/// Steps until max |Q - Q*| < 1e-3 under uniform exploration, or `None`.
fn steps_to_converge(seed: u64) -> Option<u32> {
    let mdp = oracles::Mdp::three_state();
    let optimal = mdp.value_iteration();
    let mut table = QTable::new([ActionId(0), ActionId(1)], 0.0).unwrap();
    let mut rng = seeded_rng(seed);
    let error = |t: &QTable| {
        let mut worst: f64 = 0.0;
        for (s, row) in optimal.iter().enumerate() {
            for (a, q) in row.iter().enumerate() {
                worst = worst.max((t.get(StateId(s as u64), ActionId(a as u32)) - q).abs());
            }
        }
        worst
    };

    let mut s = 0;
    let mut steps = 0;
    while steps < BUDGET {
        // ε = 1: every action uniformly at random.
        let a = rng.gen_range(0..2);
        let next = mdp.next[s][a];
        table
            .update_decaying(
                StateId(s as u64),
                ActionId(a as u32),
                mdp.reward[s][a],
                StateId(next as u64),
                mdp.gamma,
            )
            .unwrap();
        s = next;
        steps += 1;
        if error(&table) < 1e-3 {
            return Some(steps);
        }
    }
    None
}

#[test]
fn decaying_rate_q_learning_reaches_value_iteration() {
    for seed in [1, 7, 17, 99, 2024] {
        let steps = steps_to_converge(seed);
        assert!(steps.is_some(), "seed {seed}: no convergence within {BUDGET} steps");
    }
}

#[test]
fn value_iteration_is_a_fixed_point() {
    let mdp = oracles::Mdp::three_state();
    let q = mdp.value_iteration();
    for s in 0..3 {
        for a in 0..2 {
            let next = mdp.next[s][a];
            let v = q[next].iter().cloned().fold(f64::MIN, f64::max);
            assert!((q[s][a] - (mdp.reward[s][a] + mdp.gamma * v)).abs() < 1e-12);
        }
    }
}
