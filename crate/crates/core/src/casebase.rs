//! Case-based reasoning: past `(situation, action)` outcomes, retrieved by
//! situation similarity and reused when the evidence is favourable.

use alloc::collections::BTreeMap;
use alloc::format;

use crate::context::{LocationConcept, Situation, StateId, TimeConcept, TimeVocabulary};
use crate::qlearning::ActionId;
use crate::{Error, Result};

/// Relative weight of each context dimension in [`case_similarity`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DimensionWeights {
    pub time: f64,
    pub location: f64,
    pub group: f64,
    pub cognitive: f64,
}

impl Default for DimensionWeights {
    fn default() -> Self {
        DimensionWeights {
            time: 0.25,
            location: 0.25,
            group: 0.25,
            cognitive: 0.25,
        }
    }
}

impl DimensionWeights {
    pub fn validate(&self) -> Result<()> {
        let all = [self.time, self.location, self.group, self.cognitive];
        if all.iter().any(|w| !w.is_finite() || *w < 0.0) || all.iter().sum::<f64>() <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "similarity weights {all:?} must be non-negative with a positive sum"
            )));
        }
        Ok(())
    }
}

/// 1 for the same concept; 0.5 for an hour inside the same period, two
/// hours in the same period, or neighbouring periods; otherwise 0.
pub fn time_similarity(a: TimeConcept, b: TimeConcept, vocab: &TimeVocabulary) -> f64 {
    use TimeConcept::*;
    if a == b {
        return 1.0;
    }
    let related = match (a, b) {
        (Hour(x), Hour(y)) => vocab.period_of_hour(x) == vocab.period_of_hour(y),
        (Period(x), Period(y)) => x.is_adjacent(y),
        (Hour(h), Period(p)) | (Period(p), Hour(h)) => vocab.period_of_hour(h) == p,
        _ => false,
    };
    if related {
        0.5
    } else {
        0.0
    }
}

/// By the deepest common ancestor: same node 1, same city 0.5, same region
/// 0.25, otherwise 0.
pub fn location_similarity(a: &LocationConcept, b: &LocationConcept) -> f64 {
    if a == b {
        1.0
    } else if a.city.is_some() && a.city == b.city {
        0.5
    } else if a.region == b.region {
        0.25
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimilarityModel {
    pub weights: DimensionWeights,
    pub vocabulary: TimeVocabulary,
}

/// Weighted mean of the per-dimension similarities; reflexive, symmetric and
/// within [0, 1].
pub fn case_similarity(a: &Situation, b: &Situation, model: &SimilarityModel) -> f64 {
    let w = &model.weights;
    let indicator = |same: bool| if same { 1.0 } else { 0.0 };
    let total = w.time + w.location + w.group + w.cognitive;
    let sum = w.time * time_similarity(a.time, b.time, &model.vocabulary)
        + w.location * location_similarity(&a.location, &b.location)
        + w.group * indicator(a.group == b.group)
        + w.cognitive * indicator(a.cognitive == b.cognitive);
    (sum / total).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Case {
    pub situation: Situation,
    pub action: ActionId,
    pub successes: u32,
    pub attempts: u32,
    pub last_trial: u32,
}

impl Case {
    pub fn success_rate(&self) -> f64 {
        if self.attempts == 0 {
            0.0
        } else {
            self.successes as f64 / self.attempts as f64
        }
    }

    fn validate(&self) -> Result<()> {
        if self.attempts == 0 || self.successes > self.attempts {
            return Err(Error::Malformed(format!(
                "case with {}/{} successes",
                self.successes, self.attempts
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseBase {
    cases: BTreeMap<(StateId, ActionId), Case>,
    reuse_threshold: f64,
    success_threshold: f64,
    similarity: SimilarityModel,
}

impl CaseBase {
    pub const DEFAULT_REUSE_THRESHOLD: f64 = 0.75;
    pub const DEFAULT_SUCCESS_THRESHOLD: f64 = 0.5;

    pub fn new(reuse_threshold: f64, success_threshold: f64, similarity: SimilarityModel) -> Result<Self> {
        for (name, t) in [("reuse", reuse_threshold), ("success", success_threshold)] {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::InvalidConfig(format!("{name} threshold {t} not in [0, 1]")));
            }
        }
        similarity.weights.validate()?;
        Ok(CaseBase {
            cases: BTreeMap::new(),
            reuse_threshold,
            success_threshold,
            similarity,
        })
    }

    pub fn reuse_threshold(&self) -> f64 {
        self.reuse_threshold
    }

    pub fn success_threshold(&self) -> f64 {
        self.success_threshold
    }

    pub fn similarity_model(&self) -> &SimilarityModel {
        &self.similarity
    }

    pub fn len(&self) -> usize {
        self.cases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cases.is_empty()
    }

    /// Cases ordered by (situation encoding, action).
    pub fn cases(&self) -> impl Iterator<Item = &Case> {
        self.cases.values()
    }

    pub fn get(&self, situation: &Situation, action: ActionId) -> Option<&Case> {
        self.cases.get(&(situation.encode(), action))
    }

    /// Adds a stored case verbatim (checkpoint restore). A second case for the
    /// same `(situation, action)` is an error.
    pub fn insert(&mut self, case: Case) -> Result<()> {
        case.validate()?;
        let key = (case.situation.encode(), case.action);
        if self.cases.contains_key(&key) {
            return Err(Error::Malformed(format!(
                "duplicate case for state {} action {}",
                key.0, key.1
            )));
        }
        self.cases.insert(key, case);
        Ok(())
    }

    pub fn similarity(&self, a: &Situation, b: &Situation) -> f64 {
        case_similarity(a, b, &self.similarity)
    }

    /// The most similar case whose success rate reaches the success
    /// threshold, if its similarity reaches the reuse threshold.
    ///
    /// Ties on similarity go to the most recent `last_trial`, then the lowest
    /// action id, then the lowest situation encoding.
    pub fn retrieve(&self, situation: &Situation) -> Option<(&Case, f64)> {
        let mut best: Option<(&Case, f64)> = None;
        // Map order is (encoding, action) ascending, so a strictly-better test
        // keeps the earliest key among full ties.
        for case in self.cases.values() {
            if case.success_rate() < self.success_threshold {
                continue;
            }
            let sim = self.similarity(situation, &case.situation);
            let better = match best {
                None => true,
                Some((b, bs)) => {
                    sim > bs
                        || (sim == bs
                            && (case.last_trial > b.last_trial
                                || (case.last_trial == b.last_trial && case.action < b.action)))
                }
            };
            if better {
                best = Some((case, sim));
            }
        }
        best.filter(|&(_, sim)| sim >= self.reuse_threshold)
    }

    /// Merges one outcome into the `(situation, action)` case, creating it if
    /// needed. `reward` must be 0 or 1.
    pub fn retain(&mut self, situation: &Situation, action: ActionId, reward: f64, trial: u32) -> Result<()> {
        let success = if reward == 1.0 {
            1
        } else if reward == 0.0 {
            0
        } else {
            return Err(Error::InvalidParams(format!("case reward {reward} is not 0 or 1")));
        };
        let case = self.cases.entry((situation.encode(), action)).or_insert(Case {
            situation: *situation,
            action,
            successes: 0,
            attempts: 0,
            last_trial: trial,
        });
        case.successes += success;
        case.attempts += 1;
        case.last_trial = trial;
        Ok(())
    }
}

/// Reuses a retrieved case in the current situation. Resources are available
/// in every situation, so the stored action carries over unchanged.
pub fn adapt(case: &Case, _current: &Situation) -> ActionId {
    case.action
}
