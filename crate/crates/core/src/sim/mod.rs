//! Cold-start simulation.
//!
//! Teams of simulated users share a core of interesting resources; each user
//! swaps a few of them for personal picks. Every trial the target user is in
//! one slot of a daily calendar template, the agent recommends one resource,
//! and the user accepts it when it is interesting *and* belongs to the
//! resource class of the current slot (resource `r` has class
//! `r mod n_slots`), up to acceptance noise.
//!
//! Agents see only situations and rewards. Feedback draws come from an
//! environment stream shared by all variants of a `(seed, target)` pair, so
//! variants are compared on common random numbers.

mod metrics;
mod population;

pub use metrics::{early_precision, precision_curve, summarize, CurveSummary, PrecisionCurve, TrialLog, TrialRecord};
pub use population::{generate_team_history, make_population, user_feedback, SimUser};

use alloc::borrow::ToOwned;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::collab::{Transaction, UserId};
use crate::context::{
    CognitiveAction, ContextModel, GroupId, LocationGranularity, LocationHierarchy, PlaceId, RawContext, Situation,
    TimeGranularity, TimeVocabulary,
};
use crate::hyql::{Agent, AgentConfig, Decision, Source, Variant};
use crate::qlearning::ActionId;
use crate::{seeded_rng, Error, Result, Rng};

/// 2011-03-07 00:00 UTC, a Monday.
pub const EPOCH_MONDAY: u64 = 1_299_456_000;

/// One entry of the daily calendar template.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlotSpec {
    /// Local hour the slot starts at.
    pub hour: u8,
    pub place: String,
    pub cognitive: CognitiveAction,
}

impl SlotSpec {
    pub fn new(hour: u8, place: &str, cognitive: CognitiveAction) -> Self {
        SlotSpec {
            hour,
            place: place.to_owned(),
            cognitive,
        }
    }
}

/// Flips part of every user's interest set from a given trial on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Drift {
    pub at_trial: u32,
    /// Fraction of the interest set replaced, rounded to the nearest count.
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub n_teams: u32,
    pub users_per_team: u32,
    pub n_resources: u32,
    pub n_trials: u32,
    pub window: u32,
    pub acceptance_noise: f64,
    /// Size of each team's interest core and of every user's interest set.
    pub interest_size: u32,
    /// Core resources each user swaps for personal ones.
    pub quirk_size: u32,
    /// Team-history transactions loaded before a hybrid agent's first trial.
    pub history_events: u32,
    /// Learning agents per team; the first users of each team are targets.
    pub targets_per_team: u32,
    pub seeds: Vec<u64>,
    pub variants: Vec<Variant>,
    pub drift: Option<Drift>,
    pub agent: AgentConfig,
    pub context: ContextModel,
    pub time_granularity: TimeGranularity,
    pub location_granularity: LocationGranularity,
    pub schedule: Vec<SlotSpec>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n_teams: 2,
            users_per_team: 10,
            n_resources: 100,
            n_trials: 100,
            window: 10,
            acceptance_noise: 0.1,
            interest_size: 10,
            quirk_size: 2,
            history_events: 100,
            targets_per_team: 1,
            seeds: (0..30).collect(),
            variants: alloc::vec![Variant::QLearning, Variant::HyQL],
            drift: None,
            agent: AgentConfig::default(),
            context: ContextModel::new(TimeVocabulary::default(), default_hierarchy()),
            time_granularity: TimeGranularity::PeriodOfDay,
            location_granularity: LocationGranularity::Place,
            schedule: default_schedule(),
        }
    }
}

pub fn default_hierarchy() -> LocationHierarchy {
    LocationHierarchy::new(
        &[("evry", "ile-de-france"), ("paris", "ile-de-france")],
        &[("home", "evry"), ("office", "evry"), ("client-site", "paris")],
    )
    .expect("default hierarchy is consistent")
}

/// Morning paperwork at the office, a client meeting at midday, e-mail in
/// the afternoon.
pub fn default_schedule() -> Vec<SlotSpec> {
    alloc::vec![
        SlotSpec::new(9, "office", CognitiveAction::ReadDocument),
        SlotSpec::new(12, "client-site", CognitiveAction::Call),
        SlotSpec::new(15, "office", CognitiveAction::SendEmail),
    ]
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        for (key, value) in [
            ("n_teams", self.n_teams),
            ("users_per_team", self.users_per_team),
            ("n_resources", self.n_resources),
            ("n_trials", self.n_trials),
            ("window", self.window),
            ("interest_size", self.interest_size),
            ("targets_per_team", self.targets_per_team),
        ] {
            if value == 0 {
                return bad(format!("{key} must be at least 1"));
            }
        }
        if !self.n_trials.is_multiple_of(self.window) {
            return Err(Error::InvalidWindow {
                n_trials: self.n_trials as usize,
                window: self.window as usize,
            });
        }
        if !(0.0..=1.0).contains(&self.acceptance_noise) {
            return bad(format!("acceptance_noise {} outside [0, 1]", self.acceptance_noise));
        }
        if self.interest_size > self.n_resources {
            return bad(format!(
                "interest_size {} exceeds n_resources {}",
                self.interest_size, self.n_resources
            ));
        }
        if self.quirk_size > self.interest_size {
            return bad(format!(
                "quirk_size {} exceeds interest_size {}",
                self.quirk_size, self.interest_size
            ));
        }
        if self.targets_per_team > self.users_per_team {
            return bad(format!(
                "targets_per_team {} exceeds users_per_team {}",
                self.targets_per_team, self.users_per_team
            ));
        }
        if self.seeds.is_empty() {
            return bad("seeds must not be empty".into());
        }
        if self.variants.is_empty() {
            return bad("variants must not be empty".into());
        }
        if (1..self.seeds.len()).any(|i| self.seeds[..i].contains(&self.seeds[i])) {
            return bad("seeds must not repeat".into());
        }
        if (1..self.variants.len()).any(|i| self.variants[..i].contains(&self.variants[i])) {
            return bad("variants must not repeat".into());
        }
        if let Some(d) = self.drift {
            if !(0.0..=1.0).contains(&d.fraction) || d.at_trial >= self.n_trials {
                return bad(format!(
                    "drift at trial {} with fraction {} is outside the run",
                    d.at_trial, d.fraction
                ));
            }
        }
        self.agent.validate()?;
        let slots = self.resolve_schedule()?;
        // Every team core must fit into each class disjointly, with room left
        // for personal substitutions.
        let k = slots.len() as u32;
        for class in 0..k.min(self.interest_size) {
            let quota = class_quota(self.interest_size, k, class);
            let capacity = class_size(self.n_resources, k, class);
            if self.n_teams * quota > capacity {
                return bad(format!(
                    "{} teams of {} interests do not fit disjointly into {} resources over {} slots",
                    self.n_teams, self.interest_size, self.n_resources, k
                ));
            }
            let swapped = self
                .quirk_size
                .max(self.drift.map_or(0, |d| drift_count(d.fraction, self.interest_size)));
            if swapped > 0 && capacity <= quota {
                return bad(format!("resource class {class} has no room for personal substitutions"));
            }
        }
        Ok(())
    }

    fn resolve_schedule(&self) -> Result<Vec<Slot>> {
        if self.schedule.is_empty() {
            return Err(Error::InvalidConfig("schedule must not be empty".into()));
        }
        if self.schedule.len() as u32 > self.n_resources {
            return Err(Error::InvalidConfig("more schedule slots than resources".into()));
        }
        self.schedule
            .iter()
            .map(|s| {
                if s.hour >= 24 {
                    return Err(Error::InvalidConfig(format!("slot hour {} outside 0..24", s.hour)));
                }
                Ok(Slot {
                    hour: s.hour,
                    place: self.context.hierarchy.place_id(&s.place)?,
                    cognitive: s.cognitive,
                })
            })
            .collect()
    }

    /// Identifiers of every `(seed, variant, target)` run, in output order.
    pub fn run_keys(&self) -> Vec<RunKey> {
        let mut keys = Vec::new();
        for &seed in &self.seeds {
            for &variant in &self.variants {
                for team in 0..self.n_teams {
                    for i in 0..self.targets_per_team {
                        keys.push(RunKey {
                            seed,
                            variant,
                            target: UserId(team * self.users_per_team + i),
                        });
                    }
                }
            }
        }
        keys.sort();
        keys.dedup();
        keys
    }
}

/// Resources of class `class` a team core gets out of `interest_size`.
pub(crate) fn class_quota(interest_size: u32, n_classes: u32, class: u32) -> u32 {
    interest_size / n_classes + u32::from(class < interest_size % n_classes)
}

pub(crate) fn class_size(n_resources: u32, n_classes: u32, class: u32) -> u32 {
    n_resources / n_classes + u32::from(class < n_resources % n_classes)
}

pub(crate) fn drift_count(fraction: f64, interest_size: u32) -> u32 {
    libm::round(fraction * interest_size as f64) as u32
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Slot {
    pub hour: u8,
    pub place: PlaceId,
    pub cognitive: CognitiveAction,
}

/// Resolved calendar and context abstraction shared by a whole experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Environment {
    context: ContextModel,
    time_granularity: TimeGranularity,
    location_granularity: LocationGranularity,
    slots: Vec<Slot>,
    n_resources: u32,
    acceptance_noise: f64,
}

impl Environment {
    pub fn new(config: &SimConfig) -> Result<Self> {
        config.validate()?;
        Ok(Environment {
            context: config.context.clone(),
            time_granularity: config.time_granularity,
            location_granularity: config.location_granularity,
            slots: config.resolve_schedule()?,
            n_resources: config.n_resources,
            acceptance_noise: config.acceptance_noise,
        })
    }

    pub fn context(&self) -> &ContextModel {
        &self.context
    }

    pub fn acceptance_noise(&self) -> f64 {
        self.acceptance_noise
    }

    pub fn n_slots(&self) -> u32 {
        self.slots.len() as u32
    }

    pub fn resources(&self) -> impl Iterator<Item = ActionId> {
        (0..self.n_resources).map(ActionId)
    }

    pub fn class_of(&self, resource: ActionId) -> u32 {
        resource.0 % self.n_slots()
    }

    pub fn aggregate(&self, raw: &RawContext) -> Result<Situation> {
        self.context
            .aggregate(raw, self.time_granularity, self.location_granularity)
    }

    /// Raw reading for `trial`: slots cycle through the day, days skip
    /// weekends, and `jitter_minutes` is added to the slot hour.
    pub fn raw_context(&self, trial: u32, group: GroupId, jitter_minutes: u32) -> RawContext {
        let n = self.n_slots();
        let slot = self.slots[(trial % n) as usize];
        let day = trial / n;
        let calendar_day = (day / 5) * 7 + day % 5;
        let local = calendar_day as i64 * 86_400 + slot.hour as i64 * 3_600 + jitter_minutes as i64 * 60;
        let timestamp = EPOCH_MONDAY as i64 + local - self.context.vocabulary.utc_offset_seconds() as i64;
        RawContext {
            timestamp: timestamp as u64,
            place: slot.place,
            group,
            cognitive: slot.cognitive,
        }
    }

    /// The abstract situation of a slot at its nominal hour.
    pub fn slot_situation(&self, slot: u32, group: GroupId) -> Result<Situation> {
        self.aggregate(&self.raw_context(slot % self.n_slots(), group, 0))
    }

    /// Whether `situation` is the scheduled context for resources of `class`.
    pub fn matches_class(&self, situation: &Situation, class: u32) -> bool {
        self.slot_situation(class, situation.group)
            .is_ok_and(|s| s.time == situation.time && s.location == situation.location)
    }
}

/// Anything that can be driven through the trial protocol.
pub trait Recommender {
    fn select(&mut self, situation: &Situation) -> Result<Decision>;

    /// Learns from feedback, returning the Q-value of the chosen pair
    /// before and after.
    fn learn(&mut self, situation: &Situation, decision: Decision, reward: f64, next: &Situation)
        -> Result<(f64, f64)>;
}

impl Recommender for Agent {
    fn select(&mut self, situation: &Situation) -> Result<Decision> {
        self.select_action(situation)
    }

    fn learn(
        &mut self,
        situation: &Situation,
        decision: Decision,
        reward: f64,
        next: &Situation,
    ) -> Result<(f64, f64)> {
        let out = self.step(situation, decision, reward, next)?;
        Ok((out.q_before, out.q_after))
    }
}

/// Upper-bound harness agent that reads the user's interest set, which real
/// agents never see.
#[derive(Debug, Clone)]
pub struct Oracle {
    picks: BTreeMap<(crate::context::TimeConcept, crate::context::LocationConcept), ActionId>,
}

impl Oracle {
    pub fn new(env: &Environment, user: &SimUser) -> Result<Self> {
        let mut picks = BTreeMap::new();
        for slot in 0..env.n_slots() {
            let s = env.slot_situation(slot, user.team)?;
            if let Some(&r) = user.interest_set.iter().find(|r| env.class_of(**r) == slot) {
                picks.insert((s.time, s.location), r);
            }
        }
        Ok(Oracle { picks })
    }
}

impl Recommender for Oracle {
    fn select(&mut self, situation: &Situation) -> Result<Decision> {
        let action = self
            .picks
            .get(&(situation.time, situation.location))
            .copied()
            .unwrap_or(ActionId(0));
        Ok(Decision {
            action,
            source: Source::ExploitGreedy,
        })
    }

    fn learn(&mut self, _: &Situation, _: Decision, _: f64, _: &Situation) -> Result<(f64, f64)> {
        Ok((0.0, 0.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RunKey {
    pub seed: u64,
    pub variant: Variant,
    pub target: UserId,
}

// Random streams are keyed by purpose so adding a consumer never shifts
// another one's draws.
const STREAM_POPULATION: u64 = 1;
const STREAM_HISTORY: u64 = 2;
const STREAM_FEEDBACK: u64 = 3;
const STREAM_AGENT: u64 = 4;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of the random stream `stream` for `parts`, derived from `seed`.
pub fn stream_seed(seed: u64, stream: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(splitmix(seed ^ splitmix(stream)), |acc, p| splitmix(acc ^ *p))
}

fn variant_tag(v: Variant) -> u64 {
    match v {
        Variant::QLearning => 1,
        Variant::QLearningGreedy => 2,
        Variant::HyQL => 3,
    }
}

/// Population and environment of one seed.
#[derive(Debug, Clone)]
pub struct World {
    pub env: Environment,
    pub users: Vec<SimUser>,
}

impl World {
    pub fn new(config: &SimConfig, seed: u64) -> Result<Self> {
        let env = Environment::new(config)?;
        let users = make_population(config, &env, stream_seed(seed, STREAM_POPULATION, &[]))?;
        Ok(World { env, users })
    }

    pub fn user(&self, id: UserId) -> Result<&SimUser> {
        self.users
            .iter()
            .find(|u| u.user_id == id)
            .ok_or(Error::UnknownUser(id.0))
    }

    pub fn roster(&self) -> Vec<(UserId, GroupId)> {
        self.users.iter().map(|u| (u.user_id, u.team)).collect()
    }

    /// Bootstrap history for `target`, drawn from its teammates.
    pub fn team_history(&self, config: &SimConfig, seed: u64, target: UserId) -> Result<Vec<Transaction>> {
        let team = self.user(target)?.team;
        let mates: Vec<&SimUser> = self
            .users
            .iter()
            .filter(|u| u.team == team && u.user_id != target)
            .collect();
        generate_team_history(
            &self.env,
            &mates,
            config.history_events,
            config.agent.include_cognitive,
            stream_seed(seed, STREAM_HISTORY, &[target.0 as u64]),
        )
    }

    /// A fresh agent for `key`, bootstrapped when hybrid.
    pub fn agent(&self, config: &SimConfig, key: RunKey) -> Result<Agent> {
        let user = self.user(key.target)?;
        let agent_config = AgentConfig {
            variant: key.variant,
            ..config.agent.clone()
        };
        let agent_seed = stream_seed(key.seed, STREAM_AGENT, &[variant_tag(key.variant), key.target.0 as u64]);
        let mut agent = Agent::new(
            agent_config,
            user.user_id,
            user.team,
            self.env.resources(),
            &self.roster(),
            agent_seed,
        )?;
        if key.variant.is_hybrid() {
            agent.bootstrap_from_group(&self.team_history(config, key.seed, key.target)?)?;
        }
        Ok(agent)
    }
}

/// A single run in progress. It can be stopped after any trial and resumed
/// from its parts.
#[derive(Debug, Clone)]
pub struct Run<R: Recommender = Agent> {
    key: RunKey,
    env: Environment,
    user: SimUser,
    situations: Vec<Situation>,
    agent: R,
    feedback_rng: Rng,
    records: Vec<TrialRecord>,
}

impl Run<Agent> {
    pub fn start(config: &SimConfig, key: RunKey) -> Result<Self> {
        let world = World::new(config, key.seed)?;
        let agent = world.agent(config, key)?;
        Run::with_recommender(&world, key, agent)
    }

    /// Rebuilds a run stopped after `records.len()` trials.
    pub fn resume(
        config: &SimConfig,
        key: RunKey,
        agent: Agent,
        feedback_rng: Rng,
        records: Vec<TrialRecord>,
    ) -> Result<Self> {
        let world = World::new(config, key.seed)?;
        if agent.user() != key.target || agent.variant() != key.variant {
            return Err(Error::Malformed(format!(
                "agent for {} ({}) does not belong to run {} ({})",
                agent.user(),
                agent.variant(),
                key.target,
                key.variant
            )));
        }
        if records.len() > config.n_trials as usize || agent.trial() as usize != records.len() {
            return Err(Error::Malformed(format!(
                "{} logged trials against {} agent steps",
                records.len(),
                agent.trial()
            )));
        }
        let mut run = Run::with_recommender(&world, key, agent)?;
        for (t, r) in records.iter().enumerate() {
            if r.key() != key || r.trial as usize != t {
                return Err(Error::Malformed(format!(
                    "trial record {t} does not belong to this run"
                )));
            }
        }
        run.feedback_rng = feedback_rng;
        run.records = records;
        Ok(run)
    }
}

impl<R: Recommender> Run<R> {
    pub fn with_recommender(world: &World, key: RunKey, agent: R) -> Result<Self> {
        let user = world.user(key.target)?.clone();
        let situations = user
            .situation_schedule
            .iter()
            .map(|raw| world.env.aggregate(raw))
            .collect::<Result<Vec<_>>>()?;
        Ok(Run {
            key,
            env: world.env.clone(),
            user,
            situations,
            agent,
            feedback_rng: seeded_rng(stream_seed(key.seed, STREAM_FEEDBACK, &[key.target.0 as u64])),
            records: Vec::new(),
        })
    }

    pub fn key(&self) -> RunKey {
        self.key
    }

    pub fn agent(&self) -> &R {
        &self.agent
    }

    pub fn feedback_rng(&self) -> &Rng {
        &self.feedback_rng
    }

    pub fn records(&self) -> &[TrialRecord] {
        &self.records
    }

    pub fn n_trials(&self) -> u32 {
        self.situations.len() as u32 - 1
    }

    pub fn is_finished(&self) -> bool {
        self.records.len() as u32 >= self.n_trials()
    }

    /// Situation, recommendation, feedback, learning.
    pub fn step(&mut self) -> Result<&TrialRecord> {
        let trial = self.records.len() as u32;
        if trial >= self.n_trials() {
            return Err(Error::InvalidConfig(format!("run already has {trial} trials")));
        }
        let situation = self.situations[trial as usize];
        let next = self.situations[trial as usize + 1];
        let decision = self.agent.select(&situation)?;
        if decision.action.0 >= self.env.n_resources {
            return Err(Error::UnknownAction(decision.action.0));
        }
        let reward = user_feedback(
            &self.env,
            &self.user,
            trial,
            &situation,
            decision.action,
            &mut self.feedback_rng,
        );
        let (q_before, q_after) = self.agent.learn(&situation, decision, reward, &next)?;
        self.records.push(TrialRecord {
            seed: self.key.seed,
            variant: self.key.variant,
            user: self.key.target,
            trial,
            situation,
            action: decision.action,
            source: decision.source,
            accepted: reward == 1.0,
            q_before,
            q_after,
        });
        Ok(self.records.last().expect("just pushed"))
    }

    pub fn run_to_end(&mut self) -> Result<()> {
        while !self.is_finished() {
            self.step()?;
        }
        Ok(())
    }

    pub fn into_parts(self) -> (R, Vec<TrialRecord>) {
        (self.agent, self.records)
    }
}

/// A finished run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub key: RunKey,
    pub log: TrialLog,
    pub curve: PrecisionCurve,
    pub agent: Agent,
}

impl RunOutput {
    /// Smallest and largest Q-value in the final table (0 for an empty one).
    pub fn q_range(&self) -> (f64, f64) {
        self.agent
            .qtable()
            .cells()
            .map(|(_, _, v, _)| v)
            .fold((0.0, 0.0), |(lo, hi), v: f64| (lo.min(v), hi.max(v)))
    }
}

pub fn run_single(config: &SimConfig, key: RunKey) -> Result<RunOutput> {
    let mut run = Run::start(config, key)?;
    run.run_to_end()?;
    let (agent, records) = run.into_parts();
    let log = TrialLog::new(records);
    let curve = precision_curve(&log, config.window as usize)?;
    Ok(RunOutput { key, log, curve, agent })
}

/// Every run of the configuration, sorted by seed, variant then target.
pub fn run_experiment(config: &SimConfig) -> Result<Vec<RunOutput>> {
    config.validate()?;
    config.run_keys().into_iter().map(|k| run_single(config, k)).collect()
}
