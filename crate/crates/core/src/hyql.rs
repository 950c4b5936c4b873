//! The recommending agent.
//!
//! Two variants share one [`Agent`] type:
//!
//! - plain Q-learning, choosing actions ε-greedily (or purely greedily);
//! - the hybrid agent, which per step first tries to reuse a stored case,
//!   then draws `q` uniformly on (0, 1] and exploits the greedy action when
//!   `q <= p`, otherwise explores with the action collaborative filtering
//!   picks from the user's social group.
//!
//! Both run the same one-step Q update after feedback; the hybrid agent also
//! retains the outcome as a case and, on acceptance, logs an implicit rating
//! of one for the CF model.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::Rng as _;

use crate::casebase::{adapt, CaseBase, SimilarityModel};
use crate::collab::{GroupModel, Neighbourhood, Transaction, UserId};
use crate::context::{GroupId, Situation, StateId};
use crate::qlearning::{epsilon_greedy_choice, greedy_policy, ActionId, LearningParams, QTable};
use crate::{seeded_rng, Error, Result, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Variant {
    /// ε-greedy Q-learning.
    QLearning,
    /// Q-learning that always exploits (ε = 0).
    QLearningGreedy,
    HyQL,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::QLearning, Variant::QLearningGreedy, Variant::HyQL];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::QLearning => "qlearning",
            Variant::QLearningGreedy => "qlearning-greedy",
            Variant::HyQL => "hyql",
        }
    }

    pub fn is_hybrid(self) -> bool {
        self == Variant::HyQL
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown variant {s:?}")))
    }
}

/// Which branch produced an action.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Source {
    CbrReuse,
    ExploitGreedy,
    ExploreCf,
    ExploreRandom,
}

impl Source {
    pub const ALL: [Source; 4] = [
        Source::CbrReuse,
        Source::ExploitGreedy,
        Source::ExploreCf,
        Source::ExploreRandom,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Source::CbrReuse => "cbr-reuse",
            Source::ExploitGreedy => "exploit-greedy",
            Source::ExploreCf => "explore-cf",
            Source::ExploreRandom => "explore-random",
        }
    }
}

impl FromStr for Source {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Source::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| Error::Malformed(format!("unknown source {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Decision {
    pub action: ActionId,
    pub source: Source,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub situation: Situation,
    pub state: StateId,
    pub chosen_action: ActionId,
    pub source: Source,
    pub reward: f64,
    pub q_before: f64,
    pub q_after: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentConfig {
    pub variant: Variant,
    pub params: LearningParams,
    /// Keep the cognitive dimension in the Q-learning state.
    pub include_cognitive: bool,
    pub reuse_threshold: f64,
    pub success_threshold: f64,
    pub similarity: SimilarityModel,
    pub neighbourhood: Neighbourhood,
    /// The CF model sees new ratings only every this many steps.
    pub rebuild_every: u32,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            variant: Variant::HyQL,
            params: LearningParams::default(),
            include_cognitive: false,
            reuse_threshold: CaseBase::DEFAULT_REUSE_THRESHOLD,
            success_threshold: CaseBase::DEFAULT_SUCCESS_THRESHOLD,
            similarity: SimilarityModel::default(),
            neighbourhood: Neighbourhood::default(),
            rebuild_every: 10,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.rebuild_every == 0 {
            return Err(Error::InvalidConfig("rebuild_every must be at least 1".into()));
        }
        if self.neighbourhood.k_users == 0 || self.neighbourhood.k_items == 0 {
            return Err(Error::InvalidNeighbourhood("k_users and k_items must be at least 1"));
        }
        CaseBase::new(self.reuse_threshold, self.success_threshold, self.similarity.clone()).map(|_| ())
    }

    fn epsilon(&self) -> f64 {
        match self.variant {
            Variant::QLearningGreedy => 0.0,
            _ => self.params.epsilon,
        }
    }
}

/// Ratings log and model cache behind the CF exploration branch.
///
/// The model is computed from the first `visible` transactions. New ratings
/// are appended immediately but only become visible every `rebuild_every`
/// steps, at which point cached models are dropped.
#[derive(Debug, Clone)]
pub struct CfState {
    user: UserId,
    items: Vec<ActionId>,
    roster: BTreeMap<UserId, GroupId>,
    transactions: Vec<Transaction>,
    visible: usize,
    steps_since_rebuild: u32,
    sizes: Neighbourhood,
    rebuild_every: u32,
    cache: BTreeMap<Option<StateId>, GroupModel>,
}

impl PartialEq for CfState {
    fn eq(&self, other: &Self) -> bool {
        // The cache is derived from the other fields.
        self.user == other.user
            && self.items == other.items
            && self.roster == other.roster
            && self.transactions == other.transactions
            && self.visible == other.visible
            && self.steps_since_rebuild == other.steps_since_rebuild
            && self.sizes == other.sizes
            && self.rebuild_every == other.rebuild_every
    }
}

/// Everything needed to rebuild a [`CfState`].
#[derive(Debug, Clone, PartialEq)]
pub struct CfParts {
    pub user: UserId,
    pub items: Vec<ActionId>,
    pub roster: BTreeMap<UserId, GroupId>,
    pub transactions: Vec<Transaction>,
    pub visible: usize,
    pub steps_since_rebuild: u32,
    pub sizes: Neighbourhood,
    pub rebuild_every: u32,
}

impl CfState {
    fn new(
        user: UserId,
        items: Vec<ActionId>,
        roster: BTreeMap<UserId, GroupId>,
        sizes: Neighbourhood,
        rebuild_every: u32,
    ) -> Self {
        CfState {
            user,
            items,
            roster,
            transactions: Vec::new(),
            visible: 0,
            steps_since_rebuild: 0,
            sizes,
            rebuild_every,
            cache: BTreeMap::new(),
        }
    }

    pub fn from_parts(parts: CfParts) -> Result<Self> {
        let mut cf = CfState::new(parts.user, parts.items, parts.roster, parts.sizes, parts.rebuild_every);
        if !cf.roster.contains_key(&cf.user) {
            return Err(Error::UnknownUser(cf.user.0));
        }
        if parts.rebuild_every == 0 || parts.steps_since_rebuild >= parts.rebuild_every {
            return Err(Error::Malformed(format!(
                "rebuild counter {}/{}",
                parts.steps_since_rebuild, parts.rebuild_every
            )));
        }
        if parts.visible > parts.transactions.len() {
            return Err(Error::Malformed(format!(
                "{} visible transactions out of {}",
                parts.visible,
                parts.transactions.len()
            )));
        }
        for t in &parts.transactions {
            cf.check(t)?;
        }
        cf.transactions = parts.transactions;
        cf.visible = parts.visible;
        cf.steps_since_rebuild = parts.steps_since_rebuild;
        Ok(cf)
    }

    pub fn parts(&self) -> CfParts {
        CfParts {
            user: self.user,
            items: self.items.clone(),
            roster: self.roster.clone(),
            transactions: self.transactions.clone(),
            visible: self.visible,
            steps_since_rebuild: self.steps_since_rebuild,
            sizes: self.sizes,
            rebuild_every: self.rebuild_every,
        }
    }

    pub fn transactions(&self) -> &[Transaction] {
        &self.transactions
    }

    pub fn visible(&self) -> usize {
        self.visible
    }

    fn check(&self, t: &Transaction) -> Result<()> {
        if !self.roster.contains_key(&t.user) {
            return Err(Error::UnknownUser(t.user.0));
        }
        if self.items.binary_search(&t.item).is_err() {
            return Err(Error::UnknownAction(t.item.0));
        }
        if !(0.0..=1.0).contains(&t.rating) {
            return Err(Error::InvalidRating(t.rating));
        }
        Ok(())
    }

    fn model(&mut self, state: Option<StateId>) -> Result<&GroupModel> {
        if !self.cache.contains_key(&state) {
            let built = GroupModel::build(
                &self.items,
                &self.roster,
                &self.transactions[..self.visible],
                self.user,
                state,
                self.sizes,
            )?;
            self.cache.insert(state, built);
        }
        Ok(&self.cache[&state])
    }

    fn next_id(&self) -> u64 {
        self.transactions.last().map_or(0, |t| t.id + 1)
    }

    fn bootstrap(&mut self, history: &[Transaction]) -> Result<()> {
        for t in history {
            self.check(t)?;
        }
        self.transactions.extend_from_slice(history);
        self.visible = self.transactions.len();
        self.steps_since_rebuild = 0;
        self.cache.clear();
        self.model(None)?;
        Ok(())
    }

    fn tick(&mut self) {
        self.steps_since_rebuild += 1;
        if self.steps_since_rebuild >= self.rebuild_every {
            self.steps_since_rebuild = 0;
            if self.visible != self.transactions.len() {
                self.visible = self.transactions.len();
                self.cache.clear();
            }
        }
    }
}

/// Restorable agent state.
#[derive(Debug, Clone)]
pub struct AgentParts {
    pub config: AgentConfig,
    pub user: UserId,
    pub group: GroupId,
    pub qtable: QTable,
    pub casebase: Option<CaseBase>,
    pub cf: Option<CfState>,
    pub rng: Rng,
    pub trial: u32,
}

#[derive(Debug, Clone)]
pub struct Agent {
    config: AgentConfig,
    user: UserId,
    group: GroupId,
    qtable: QTable,
    casebase: Option<CaseBase>,
    cf: Option<CfState>,
    rng: Rng,
    trial: u32,
}

impl PartialEq for Agent {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config
            && self.user == other.user
            && self.group == other.group
            && self.qtable == other.qtable
            && self.casebase == other.casebase
            && self.cf == other.cf
            && self.rng == other.rng
            && self.trial == other.trial
    }
}

impl Agent {
    /// `roster` lists the users whose ratings the CF branch may draw on; it
    /// must contain `user`. Plain variants ignore it.
    pub fn new(
        config: AgentConfig,
        user: UserId,
        group: GroupId,
        actions: impl IntoIterator<Item = ActionId>,
        roster: &[(UserId, GroupId)],
        seed: u64,
    ) -> Result<Self> {
        config.validate()?;
        let qtable = QTable::new(actions, 0.0)?;
        if qtable.actions().is_empty() {
            return Err(Error::EmptyActionSpace);
        }
        let (casebase, cf) = if config.variant.is_hybrid() {
            let mut roster: BTreeMap<UserId, GroupId> = roster.iter().copied().collect();
            roster.insert(user, group);
            let casebase = CaseBase::new(
                config.reuse_threshold,
                config.success_threshold,
                config.similarity.clone(),
            )?;
            let cf = CfState::new(
                user,
                qtable.actions().to_vec(),
                roster,
                config.neighbourhood,
                config.rebuild_every,
            );
            (Some(casebase), Some(cf))
        } else {
            (None, None)
        };
        Ok(Agent {
            config,
            user,
            group,
            qtable,
            casebase,
            cf,
            rng: seeded_rng(seed),
            trial: 0,
        })
    }

    pub fn from_parts(parts: AgentParts) -> Result<Self> {
        parts.config.validate()?;
        let hybrid = parts.config.variant.is_hybrid();
        if hybrid != parts.casebase.is_some() || hybrid != parts.cf.is_some() {
            return Err(Error::Malformed(format!(
                "{} agent with casebase: {}, cf: {}",
                parts.config.variant,
                parts.casebase.is_some(),
                parts.cf.is_some()
            )));
        }
        if parts.qtable.actions().is_empty() {
            return Err(Error::EmptyActionSpace);
        }
        Ok(Agent {
            config: parts.config,
            user: parts.user,
            group: parts.group,
            qtable: parts.qtable,
            casebase: parts.casebase,
            cf: parts.cf,
            rng: parts.rng,
            trial: parts.trial,
        })
    }

    pub fn parts(&self) -> AgentParts {
        AgentParts {
            config: self.config.clone(),
            user: self.user,
            group: self.group,
            qtable: self.qtable.clone(),
            casebase: self.casebase.clone(),
            cf: self.cf.clone(),
            rng: self.rng.clone(),
            trial: self.trial,
        }
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn variant(&self) -> Variant {
        self.config.variant
    }

    pub fn user(&self) -> UserId {
        self.user
    }

    pub fn group(&self) -> GroupId {
        self.group
    }

    pub fn qtable(&self) -> &QTable {
        &self.qtable
    }

    pub fn casebase(&self) -> Option<&CaseBase> {
        self.casebase.as_ref()
    }

    pub fn cf(&self) -> Option<&CfState> {
        self.cf.as_ref()
    }

    pub fn rng(&self) -> &Rng {
        &self.rng
    }

    /// Steps taken so far.
    pub fn trial(&self) -> u32 {
        self.trial
    }

    /// Q-learning state key of a situation.
    pub fn state_of(&self, situation: &Situation) -> StateId {
        situation.state_view(self.config.include_cognitive).encode()
    }

    /// Loads the social group's interaction history into the CF state and
    /// builds the model. The Q-table is not touched.
    pub fn bootstrap_from_group(&mut self, history: &[Transaction]) -> Result<()> {
        let cf = self
            .cf
            .as_mut()
            .ok_or_else(|| Error::InvalidConfig(format!("{} agents have no CF state", self.config.variant)))?;
        cf.bootstrap(history)
    }

    pub fn select_action(&mut self, situation: &Situation) -> Result<Decision> {
        let state = self.state_of(situation);
        if !self.config.variant.is_hybrid() {
            let (action, explored) = epsilon_greedy_choice(&self.qtable, state, self.config.epsilon(), &mut self.rng)?;
            let source = if explored {
                Source::ExploreRandom
            } else {
                Source::ExploitGreedy
            };
            return Ok(Decision { action, source });
        }

        if let Some(casebase) = &self.casebase {
            if let Some((case, _)) = casebase.retrieve(situation) {
                return Ok(Decision {
                    action: adapt(case, situation),
                    source: Source::CbrReuse,
                });
            }
        }

        // q on (0, 1] so that p = 0 never exploits and p = 1 always does.
        let q = 1.0 - self.rng.gen::<f64>();
        if q <= self.config.params.p {
            let action = greedy_policy(&self.qtable, state)?;
            return Ok(Decision {
                action,
                source: Source::ExploitGreedy,
            });
        }
        let cf = self
            .cf
            .as_mut()
            .ok_or(Error::InvalidConfig("missing CF state".into()))?;
        let action = cf.model(Some(state))?.recommend(self.qtable.actions())?;
        Ok(Decision {
            action,
            source: Source::ExploreCf,
        })
    }

    /// Learns from the feedback on `decision`, taken in `situation`.
    pub fn step(
        &mut self,
        situation: &Situation,
        decision: Decision,
        reward: f64,
        next_situation: &Situation,
    ) -> Result<StepOutcome> {
        if reward != 0.0 && reward != 1.0 {
            return Err(Error::InvalidParams(format!("feedback reward {reward} is not 0 or 1")));
        }
        let state = self.state_of(situation);
        let next_state = self.state_of(next_situation);
        let action = decision.action;
        let q_before = self.qtable.get(state, action);
        let q_after = self
            .qtable
            .update(state, action, reward, next_state, &self.config.params)?;

        if let Some(casebase) = &mut self.casebase {
            casebase.retain(situation, action, reward, self.trial)?;
        }
        if let Some(cf) = &mut self.cf {
            if reward == 1.0 {
                let id = cf.next_id();
                cf.transactions.push(Transaction {
                    id,
                    user: self.user,
                    item: action,
                    rating: 1.0,
                    state,
                    trial: self.trial,
                });
            }
            cf.tick();
        }
        self.trial += 1;

        Ok(StepOutcome {
            situation: *situation,
            state,
            chosen_action: action,
            source: decision.source,
            reward,
            q_before,
            q_after,
        })
    }
}
