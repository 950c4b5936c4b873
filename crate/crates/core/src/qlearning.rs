//! Tabular Q-learning.
//!
//! [`QTable`] stores action values keyed by `(StateId, ActionId)`; unseen
//! pairs read as the table's default value. [`QTable::update`] applies the
//! one-step rule
//!
//! ```text
//! Q(s,a) <- Q(s,a) + alpha * (r + gamma * max_a' Q(s',a') - Q(s,a))
//! ```
//!
//! and [`greedy_policy`] / [`epsilon_greedy_policy`] are the two baseline
//! action-selection strategies.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;

use crate::context::StateId;
use crate::{Error, Result};

/// A recommendable resource.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ActionId(pub u32);

impl fmt::Display for ActionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearningParams {
    /// Learning rate, in (0, 1].
    pub alpha: f64,
    /// Discount factor, in [0, 1).
    pub gamma: f64,
    /// Random-action probability of the ε-greedy baseline.
    pub epsilon: f64,
    /// Exploitation probability of the hybrid policy.
    pub p: f64,
}

impl Default for LearningParams {
    fn default() -> Self {
        LearningParams {
            alpha: 0.1,
            gamma: 0.9,
            epsilon: 0.1,
            p: 0.9,
        }
    }
}

impl LearningParams {
    pub fn new(alpha: f64, gamma: f64, epsilon: f64, p: f64) -> Result<Self> {
        let params = LearningParams {
            alpha,
            gamma,
            epsilon,
            p,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::InvalidParams(format!("alpha = {} not in (0, 1]", self.alpha)));
        }
        check_gamma(self.gamma)?;
        for (name, v) in [("epsilon", self.epsilon), ("p", self.p)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidParams(format!("{name} = {v} not in [0, 1]")));
            }
        }
        Ok(())
    }

    /// Upper bound of any value reachable from rewards in [0, 1].
    pub fn value_bound(&self) -> f64 {
        1.0 / (1.0 - self.gamma)
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::InvalidParams(format!("gamma = {gamma} not in [0, 1)")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    actions: Vec<ActionId>,
    default_value: f64,
    values: BTreeMap<(StateId, ActionId), f64>,
    visits: BTreeMap<(StateId, ActionId), u64>,
}

impl QTable {
    /// Actions are kept sorted and deduplicated; that order is the
    /// tie-break order of [`QTable::max_q`].
    pub fn new(actions: impl IntoIterator<Item = ActionId>, default_value: f64) -> Result<Self> {
        if !default_value.is_finite() {
            return Err(Error::InvalidParams(format!(
                "default value {default_value} is not finite"
            )));
        }
        let mut actions: Vec<ActionId> = actions.into_iter().collect();
        actions.sort_unstable();
        actions.dedup();
        Ok(QTable {
            actions,
            default_value,
            values: BTreeMap::new(),
            visits: BTreeMap::new(),
        })
    }

    /// Rebuilds a table from stored cells, e.g. when restoring a checkpoint.
    pub fn from_parts(
        actions: Vec<ActionId>,
        default_value: f64,
        cells: impl IntoIterator<Item = (StateId, ActionId, f64, u64)>,
    ) -> Result<Self> {
        let mut table = QTable::new(actions, default_value)?;
        for (s, a, v, n) in cells {
            table.check_action(a)?;
            if !v.is_finite() {
                return Err(Error::Malformed(format!("Q({s}, {a}) = {v} is not finite")));
            }
            table.values.insert((s, a), v);
            if n > 0 {
                table.visits.insert((s, a), n);
            }
        }
        Ok(table)
    }

    pub fn actions(&self) -> &[ActionId] {
        &self.actions
    }

    pub fn default_value(&self) -> f64 {
        self.default_value
    }

    pub fn get(&self, state: StateId, action: ActionId) -> f64 {
        self.values.get(&(state, action)).copied().unwrap_or(self.default_value)
    }

    pub fn visits(&self, state: StateId, action: ActionId) -> u64 {
        self.visits.get(&(state, action)).copied().unwrap_or(0)
    }

    /// Stored cells as `(state, action, value, visits)` in key order.
    pub fn cells(&self) -> impl Iterator<Item = (StateId, ActionId, f64, u64)> + '_ {
        self.values.iter().map(|(&(s, a), &v)| (s, a, v, self.visits(s, a)))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn check_action(&self, action: ActionId) -> Result<()> {
        self.actions
            .binary_search(&action)
            .map(|_| ())
            .map_err(|_| Error::UnknownAction(action.0))
    }

    /// Best action and its value; ties go to the lowest action id.
    pub fn max_q(&self, state: StateId) -> Result<(ActionId, f64)> {
        let mut best: Option<(ActionId, f64)> = None;
        for &a in &self.actions {
            let v = self.get(state, a);
            match best {
                Some((_, bv)) if v <= bv => {}
                _ => best = Some((a, v)),
            }
        }
        best.ok_or(Error::EmptyActionSpace)
    }

    /// One-step Q-learning update with the constant rate in `params`.
    /// Returns the new Q(s, a).
    pub fn update(
        &mut self,
        state: StateId,
        action: ActionId,
        reward: f64,
        next_state: StateId,
        params: &LearningParams,
    ) -> Result<f64> {
        params.validate()?;
        self.apply(state, action, reward, next_state, params.alpha, params.gamma)
    }

    /// Same rule with α = 1/n(s,a), n counting this update.
    pub fn update_decaying(
        &mut self,
        state: StateId,
        action: ActionId,
        reward: f64,
        next_state: StateId,
        gamma: f64,
    ) -> Result<f64> {
        let n = self.visits(state, action) + 1;
        self.apply(state, action, reward, next_state, 1.0 / n as f64, gamma)
    }

    /// Update with an explicit rate. Unlike [`LearningParams`], α = 0 is
    /// accepted here and leaves the value unchanged.
    pub fn apply(
        &mut self,
        state: StateId,
        action: ActionId,
        reward: f64,
        next_state: StateId,
        alpha: f64,
        gamma: f64,
    ) -> Result<f64> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::InvalidParams(format!("alpha = {alpha} not in [0, 1]")));
        }
        check_gamma(gamma)?;
        if !reward.is_finite() {
            return Err(Error::InvalidParams(format!("reward {reward} is not finite")));
        }
        self.check_action(action)?;
        let (_, next_best) = self.max_q(next_state)?;
        let current = self.get(state, action);
        let updated = current + alpha * (reward + gamma * next_best - current);
        if !updated.is_finite() {
            return Err(Error::InvalidParams(format!(
                "update of Q({state}, {action}) overflowed"
            )));
        }
        self.values.insert((state, action), updated);
        *self.visits.entry((state, action)).or_insert(0) += 1;
        Ok(updated)
    }
}

pub fn greedy_policy(table: &QTable, state: StateId) -> Result<ActionId> {
    table.max_q(state).map(|(a, _)| a)
}

/// With probability ε a uniformly random action, otherwise the greedy one.
pub fn epsilon_greedy_policy<R: Rng + ?Sized>(
    table: &QTable,
    state: StateId,
    epsilon: f64,
    rng: &mut R,
) -> Result<ActionId> {
    epsilon_greedy_choice(table, state, epsilon, rng).map(|(a, _)| a)
}

/// Like [`epsilon_greedy_policy`], also reporting whether the random branch
/// was taken. Exactly one uniform draw is consumed for the branch, plus one
/// for the random action when exploring.
pub fn epsilon_greedy_choice<R: Rng + ?Sized>(
    table: &QTable,
    state: StateId,
    epsilon: f64,
    rng: &mut R,
) -> Result<(ActionId, bool)> {
    if table.actions.is_empty() {
        return Err(Error::EmptyActionSpace);
    }
    let u: f64 = rng.gen();
    if u < epsilon {
        let i = rng.gen_range(0..table.actions.len());
        Ok((table.actions[i], true))
    } else {
        greedy_policy(table, state).map(|a| (a, false))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeded_rng;
    use proptest::prelude::*;

    const S0: StateId = StateId(0);
    const S1: StateId = StateId(1);

    fn table(n: u32) -> QTable {
        QTable::new((0..n).map(ActionId), 0.0).unwrap()
    }

    #[test]
    fn fresh_table_ties_to_lowest_action() {
        let t = table(4);
        assert_eq!(t.max_q(S0).unwrap(), (ActionId(0), 0.0));
        assert_eq!(greedy_policy(&t, S0).unwrap(), ActionId(0));
        assert_eq!(greedy_policy(&t, S0).unwrap(), greedy_policy(&t, S0).unwrap());
    }

    #[test]
    fn argmax_follows_updates() {
        let mut t = table(2);
        t.apply(S0, ActionId(0), 0.2, S1, 1.0, 0.0).unwrap();
        t.apply(S0, ActionId(1), 0.9, S1, 1.0, 0.0).unwrap();
        assert_eq!(t.max_q(S0).unwrap(), (ActionId(1), 0.9));
        assert_eq!(greedy_policy(&t, S0).unwrap(), ActionId(1));
        t.apply(S0, ActionId(0), 1.0, S1, 1.0, 0.0).unwrap();
        assert_eq!(greedy_policy(&t, S0).unwrap(), ActionId(0));
    }

    #[test]
    fn empty_action_space() {
        let t = QTable::new([], 0.0).unwrap();
        assert_eq!(t.max_q(S0), Err(Error::EmptyActionSpace));
        let mut rng = seeded_rng(1);
        assert_eq!(
            epsilon_greedy_policy(&t, S0, 0.5, &mut rng),
            Err(Error::EmptyActionSpace)
        );
    }

    #[test]
    fn zero_rate_leaves_value() {
        let mut t = table(2);
        t.apply(S0, ActionId(1), 0.5, S1, 1.0, 0.0).unwrap();
        let v = t.apply(S0, ActionId(1), 1.0, S1, 0.0, 0.9).unwrap();
        assert_eq!(v, 0.5);
    }

    #[test]
    fn full_replacement_by_reward() {
        let mut t = table(2);
        let params = LearningParams::new(1.0, 0.0, 0.1, 0.9).unwrap();
        assert_eq!(t.update(S0, ActionId(0), 1.0, S1, &params).unwrap(), 1.0);
    }

    #[test]
    fn worked_update() {
        // 0.5 + 0.1 * (1 + 0.9 * 0.8 - 0.5), evaluated by hand: 0.622.
        let mut t = table(2);
        t.apply(S0, ActionId(0), 0.5, S0, 1.0, 0.0).unwrap();
        t.apply(S1, ActionId(1), 0.8, S1, 1.0, 0.0).unwrap();
        let params = LearningParams::new(0.1, 0.9, 0.1, 0.9).unwrap();
        let v = t.update(S0, ActionId(0), 1.0, S1, &params).unwrap();
        assert!((v - 0.622).abs() < 1e-12, "{v}");
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(LearningParams::new(0.0, 0.9, 0.1, 0.9).is_err());
        assert!(LearningParams::new(1.1, 0.9, 0.1, 0.9).is_err());
        assert!(LearningParams::new(0.1, 1.0, 0.1, 0.9).is_err());
        assert!(LearningParams::new(0.1, 0.9, -0.1, 0.9).is_err());
        assert!(LearningParams::new(0.1, 0.9, 0.1, 1.5).is_err());
        let mut t = table(2);
        let bad = LearningParams {
            gamma: 1.0,
            ..LearningParams::default()
        };
        assert!(t.update(S0, ActionId(0), 1.0, S1, &bad).is_err());
        assert!(t.apply(S0, ActionId(0), f64::NAN, S1, 0.1, 0.9).is_err());
        assert_eq!(
            t.apply(S0, ActionId(7), 1.0, S1, 0.1, 0.9),
            Err(Error::UnknownAction(7))
        );
        assert!(t.is_empty());
    }

    #[test]
    fn epsilon_zero_is_greedy() {
        let mut t = table(5);
        t.apply(S0, ActionId(3), 1.0, S1, 1.0, 0.0).unwrap();
        let mut rng = seeded_rng(3);
        for _ in 0..1_000 {
            assert_eq!(epsilon_greedy_policy(&t, S0, 0.0, &mut rng).unwrap(), ActionId(3));
        }
    }

    #[test]
    fn epsilon_one_is_uniform() {
        let t = table(5);
        let mut rng = seeded_rng(11);
        let mut counts = [0usize; 5];
        let draws = 100_000;
        for _ in 0..draws {
            counts[epsilon_greedy_policy(&t, S0, 1.0, &mut rng).unwrap().0 as usize] += 1;
        }
        for c in counts {
            let freq = c as f64 / draws as f64;
            assert!((freq - 0.2).abs() < 0.02, "{counts:?}");
        }
    }

    #[test]
    fn epsilon_mixture_law() {
        let mut t = table(4);
        t.apply(S0, ActionId(2), 1.0, S1, 1.0, 0.0).unwrap();
        let mut rng = seeded_rng(5);
        let draws = 100_000;
        let greedy = (0..draws)
            .filter(|_| epsilon_greedy_policy(&t, S0, 0.3, &mut rng).unwrap() == ActionId(2))
            .count();
        let expected = 0.7 + 0.3 / 4.0;
        assert!((greedy as f64 / draws as f64 - expected).abs() < 0.02);
    }

    #[test]
    fn seeded_runs_are_identical() {
        let run = || {
            let mut t = table(6);
            let mut rng = seeded_rng(42);
            let params = LearningParams::default();
            let mut picks = Vec::new();
            for step in 0..500u64 {
                let s = StateId(step % 3);
                let a = epsilon_greedy_policy(&t, s, params.epsilon, &mut rng).unwrap();
                let r = if a.0 % 2 == 0 { 1.0 } else { 0.0 };
                t.update(s, a, r, StateId((step + 1) % 3), &params).unwrap();
                picks.push(a);
            }
            (picks, t)
        };
        assert_eq!(run(), run());
    }

    proptest! {
        #[test]
        fn values_stay_bounded(
            gamma in 0.0f64..0.99,
            alpha in 0.01f64..=1.0,
            init in 0.0f64..=1.0,
            steps in proptest::collection::vec((0u64..4, 0u32..3, 0u8..2, 0u64..4), 1..200),
        ) {
            let bound = 1.0 / (1.0 - gamma);
            let mut t = QTable::new((0..3).map(ActionId), init * bound).unwrap();
            for (s, a, r, next) in steps {
                let v = t.apply(StateId(s), ActionId(a), r as f64, StateId(next), alpha, gamma).unwrap();
                prop_assert!(v >= 0.0 && v <= bound * (1.0 + 1e-12), "{} outside [0, {}]", v, bound);
            }
        }

        #[test]
        fn update_touches_one_cell(
            seed_cells in proptest::collection::vec((0u64..3, 0u32..3, 0.0f64..5.0), 0..9),
            s in 0u64..3, a in 0u32..3, r in 0.0f64..1.0, next in 0u64..3,
        ) {
            let mut t = QTable::new((0..3).map(ActionId), 0.0).unwrap();
            for (cs, ca, v) in seed_cells {
                t.apply(StateId(cs), ActionId(ca), v, StateId(cs), 1.0, 0.0).unwrap();
            }
            let before = t.clone();
            t.apply(StateId(s), ActionId(a), r, StateId(next), 0.3, 0.8).unwrap();
            for cs in 0..3 {
                for ca in 0..3 {
                    if (cs, ca) != (s, a) {
                        prop_assert_eq!(
                            t.get(StateId(cs), ActionId(ca)).to_bits(),
                            before.get(StateId(cs), ActionId(ca)).to_bits()
                        );
                    }
                }
            }
        }
    }
}
