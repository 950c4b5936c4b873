use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng as _;

use super::{class_quota, drift_count, Environment, SimConfig};
use crate::collab::{Transaction, UserId};
use crate::context::{GroupId, RawContext, Situation};
use crate::qlearning::ActionId;
use crate::{seeded_rng, Error, Result, Rng};

#[derive(Debug, Clone, PartialEq)]
pub struct SimUser {
    pub user_id: UserId,
    pub team: GroupId,
    /// `|interest_set| = interest_size`.
    pub interest_set: BTreeSet<ActionId>,
    /// `(team core resource, personal replacement)` pairs.
    pub personal_quirk: Vec<(ActionId, ActionId)>,
    /// One reading per trial plus the one after the last trial.
    pub situation_schedule: Vec<RawContext>,
    /// Interest set in force from the given trial on.
    pub drift: Option<(u32, BTreeSet<ActionId>)>,
}

impl SimUser {
    pub fn interests_at(&self, trial: u32) -> &BTreeSet<ActionId> {
        match &self.drift {
            Some((at, drifted)) if trial >= *at => drifted,
            _ => &self.interest_set,
        }
    }
}

/// Swaps `count` members of `set` for same-class resources outside
/// `excluded` and `set`, falling back to any such resource.
fn substitute(
    env: &Environment,
    set: &mut BTreeSet<ActionId>,
    excluded: &BTreeSet<ActionId>,
    count: u32,
    rng: &mut Rng,
) -> Result<Vec<(ActionId, ActionId)>> {
    let members: Vec<ActionId> = set.iter().copied().collect();
    let chosen: Vec<ActionId> = members.choose_multiple(rng, count as usize).copied().collect();
    let mut swaps = Vec::with_capacity(chosen.len());
    for old in chosen {
        let free = |r: &ActionId| !set.contains(r) && !excluded.contains(r);
        let same_class: Vec<ActionId> = env
            .resources()
            .filter(|r| env.class_of(*r) == env.class_of(old))
            .filter(free)
            .collect();
        let pool = if same_class.is_empty() {
            env.resources().filter(free).collect()
        } else {
            same_class
        };
        let new = *pool
            .choose(rng)
            .ok_or_else(|| Error::InvalidConfig(format!("no resource left to replace {old}")))?;
        set.remove(&old);
        set.insert(new);
        swaps.push((old, new));
    }
    Ok(swaps)
}

/// Users are numbered team by team. Team cores are disjoint and spread over
/// resource classes as evenly as possible.
pub fn make_population(config: &SimConfig, env: &Environment, seed: u64) -> Result<Vec<SimUser>> {
    config.validate()?;
    let mut rng = seeded_rng(seed);
    let k = env.n_slots();

    let mut pools: Vec<Vec<ActionId>> = (0..k)
        .map(|c| env.resources().filter(|r| env.class_of(*r) == c).collect())
        .collect();
    for pool in &mut pools {
        pool.shuffle(&mut rng);
    }
    let cores: Vec<BTreeSet<ActionId>> = (0..config.n_teams)
        .map(|team| {
            (0..k)
                .flat_map(|c| {
                    let quota = class_quota(config.interest_size, k, c) as usize;
                    let start = team as usize * quota;
                    pools[c as usize][start..start + quota].iter().copied()
                })
                .collect()
        })
        .collect();

    let mut users = Vec::with_capacity((config.n_teams * config.users_per_team) as usize);
    for (team, core) in cores.iter().enumerate() {
        let group = GroupId(team as u32);
        for i in 0..config.users_per_team {
            let mut interest_set = core.clone();
            let personal_quirk = substitute(env, &mut interest_set, core, config.quirk_size, &mut rng)?;
            let situation_schedule = (0..=config.n_trials)
                .map(|t| env.raw_context(t, group, rng.gen_range(0..30)))
                .collect();
            let drift = match config.drift {
                Some(d) => {
                    let mut drifted = interest_set.clone();
                    let n = drift_count(d.fraction, config.interest_size);
                    substitute(env, &mut drifted, &BTreeSet::new(), n, &mut rng)?;
                    Some((d.at_trial, drifted))
                }
                None => None,
            };
            users.push(SimUser {
                user_id: UserId(team as u32 * config.users_per_team + i),
                team: group,
                interest_set,
                personal_quirk,
                situation_schedule,
                drift,
            });
        }
    }
    Ok(users)
}

/// Immediate reward of recommending `resource`. Consumes exactly one draw.
pub fn user_feedback(
    env: &Environment,
    user: &SimUser,
    trial: u32,
    situation: &Situation,
    resource: ActionId,
    rng: &mut Rng,
) -> f64 {
    let wanted = user.interests_at(trial).contains(&resource) && env.matches_class(situation, env.class_of(resource));
    let p_accept = if wanted {
        1.0 - env.acceptance_noise()
    } else {
        env.acceptance_noise()
    };
    let u: f64 = rng.gen();
    if u < p_accept {
        1.0
    } else {
        0.0
    }
}

/// Implicit ratings of one by `members`, each on a resource of their own
/// interest set, logged in the state of the slot that resource belongs to.
pub fn generate_team_history(
    env: &Environment,
    members: &[&SimUser],
    n_events: u32,
    include_cognitive: bool,
    seed: u64,
) -> Result<Vec<Transaction>> {
    let mut rng = seeded_rng(seed);
    let mut history = Vec::with_capacity(n_events as usize);
    if members.is_empty() {
        return Ok(history);
    }
    for id in 0..n_events as u64 {
        let user = members[rng.gen_range(0..members.len())];
        let interests: Vec<ActionId> = user.interests_at(0).iter().copied().collect();
        let Some(&item) = interests.choose(&mut rng) else {
            continue;
        };
        let situation = env.slot_situation(env.class_of(item), user.team)?;
        history.push(Transaction {
            id,
            user: user.user_id,
            item,
            rating: 1.0,
            state: situation.state_view(include_cognitive).encode(),
            trial: 0,
        });
    }
    Ok(history)
}
