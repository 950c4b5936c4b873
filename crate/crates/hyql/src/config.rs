//! TOML experiment configuration.
//!
//! Every key is optional; missing keys take the built-in defaults, which are
//! also what `configs/default.toml` spells out. Unknown keys are rejected.
//! A run manifest is accepted wherever a configuration is, through its
//! `[config]` table.

use std::collections::BTreeMap;
use std::path::Path;

use hyql_core::casebase::{DimensionWeights, SimilarityModel};
use hyql_core::collab::Neighbourhood;
use hyql_core::context::{ContextModel, LocationHierarchy, TimeVocabulary};
use hyql_core::hyql::{AgentConfig, Variant};
use hyql_core::qlearning::LearningParams;
use hyql_core::sim::{Drift, SimConfig, SlotSpec};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Environment variable naming the configuration used when `--config` is
/// not given.
pub const CONFIG_ENV: &str = "HYQL_CONFIG";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConfigFile {
    pub experiment: Experiment,
    pub learning: Learning,
    pub cf: Cf,
    pub cbr: Cbr,
    pub context: Context,
    pub location: Location,
    pub schedule: Vec<Slot>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub drift: Option<DriftSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Experiment {
    pub n_teams: u32,
    pub users_per_team: u32,
    pub n_resources: u32,
    pub n_trials: u32,
    pub window: u32,
    pub acceptance_noise: f64,
    pub interest_size: u32,
    pub quirk_size: u32,
    pub history_events: u32,
    pub targets_per_team: u32,
    pub seeds: Vec<u64>,
    pub variants: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Learning {
    pub alpha: f64,
    pub gamma: f64,
    pub epsilon: f64,
    pub p: f64,
    pub include_cognitive: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Cf {
    pub k_users: usize,
    pub k_items: usize,
    pub rebuild_every: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Cbr {
    pub reuse_threshold: f64,
    pub success_threshold: f64,
    pub weights: Weights,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Weights {
    pub time: f64,
    pub location: f64,
    pub group: f64,
    pub cognitive: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Context {
    pub time_granularity: String,
    pub location_granularity: String,
    pub period_boundaries: [u8; 4],
    pub utc_offset_seconds: i32,
}

/// `cities` maps city to region, `places` maps place to city.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Location {
    pub cities: BTreeMap<String, String>,
    pub places: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Slot {
    pub hour: u8,
    pub place: String,
    pub cognitive: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftSection {
    pub at_trial: u32,
    pub fraction: f64,
}

impl From<&SimConfig> for ConfigFile {
    fn from(c: &SimConfig) -> Self {
        let a = &c.agent;
        let w = &a.similarity.weights;
        let (cities, places) = c.context.hierarchy.tables();
        let owned = |pairs: Vec<(&str, &str)>| pairs.into_iter().map(|(k, v)| (k.to_owned(), v.to_owned())).collect();
        ConfigFile {
            experiment: Experiment {
                n_teams: c.n_teams,
                users_per_team: c.users_per_team,
                n_resources: c.n_resources,
                n_trials: c.n_trials,
                window: c.window,
                acceptance_noise: c.acceptance_noise,
                interest_size: c.interest_size,
                quirk_size: c.quirk_size,
                history_events: c.history_events,
                targets_per_team: c.targets_per_team,
                seeds: c.seeds.clone(),
                variants: c.variants.iter().map(|v| v.as_str().to_owned()).collect(),
            },
            learning: Learning {
                alpha: a.params.alpha,
                gamma: a.params.gamma,
                epsilon: a.params.epsilon,
                p: a.params.p,
                include_cognitive: a.include_cognitive,
            },
            cf: Cf {
                k_users: a.neighbourhood.k_users,
                k_items: a.neighbourhood.k_items,
                rebuild_every: a.rebuild_every,
            },
            cbr: Cbr {
                reuse_threshold: a.reuse_threshold,
                success_threshold: a.success_threshold,
                weights: Weights {
                    time: w.time,
                    location: w.location,
                    group: w.group,
                    cognitive: w.cognitive,
                },
            },
            context: Context {
                time_granularity: c.time_granularity.as_str().to_owned(),
                location_granularity: c.location_granularity.as_str().to_owned(),
                period_boundaries: c.context.vocabulary.boundaries(),
                utc_offset_seconds: c.context.vocabulary.utc_offset_seconds(),
            },
            location: Location {
                cities: owned(cities),
                places: owned(places),
            },
            schedule: c
                .schedule
                .iter()
                .map(|s| Slot {
                    hour: s.hour,
                    place: s.place.clone(),
                    cognitive: s.cognitive.as_str().to_owned(),
                })
                .collect(),
            drift: c.drift.map(|d| DriftSection {
                at_trial: d.at_trial,
                fraction: d.fraction,
            }),
        }
    }
}

fn defaults() -> ConfigFile {
    ConfigFile::from(&SimConfig::default())
}

impl Default for ConfigFile {
    fn default() -> Self {
        defaults()
    }
}

macro_rules! section_default {
    ($($ty:ident => $field:ident),* $(,)?) => {
        $(impl Default for $ty {
            fn default() -> Self {
                defaults().$field
            }
        })*
    };
}

section_default!(Experiment => experiment, Learning => learning, Cf => cf, Cbr => cbr, Context => context, Location => location);

impl Default for Weights {
    fn default() -> Self {
        defaults().cbr.weights
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e: T::Err| Error::config(key, e))
}

impl ConfigFile {
    /// Converts to a validated simulation configuration.
    pub fn to_sim(&self) -> Result<SimConfig> {
        let e = &self.experiment;
        let variants = e
            .variants
            .iter()
            .map(|v| parse::<Variant>("experiment.variants", v))
            .collect::<Result<Vec<_>>>()?;
        let vocabulary = TimeVocabulary::new(self.context.period_boundaries, self.context.utc_offset_seconds)
            .map_err(|err| Error::config("context.period_boundaries", err))?;
        let cities: Vec<(&str, &str)> = self
            .location
            .cities
            .iter()
            .map(|(k, v)| (k.as_str(), v.as_str()))
            .collect();
        let places: Vec<(&str, &str)> = self
            .location
            .places
            .iter()
            .map(|(k, v)| (k.as_str(), v.as_str()))
            .collect();
        let hierarchy = LocationHierarchy::new(&cities, &places).map_err(|err| Error::config("location", err))?;
        let schedule = self
            .schedule
            .iter()
            .map(|s| {
                Ok(SlotSpec {
                    hour: s.hour,
                    place: s.place.clone(),
                    cognitive: parse("schedule.cognitive", &s.cognitive)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let l = &self.learning;
        let w = &self.cbr.weights;
        let config = SimConfig {
            n_teams: e.n_teams,
            users_per_team: e.users_per_team,
            n_resources: e.n_resources,
            n_trials: e.n_trials,
            window: e.window,
            acceptance_noise: e.acceptance_noise,
            interest_size: e.interest_size,
            quirk_size: e.quirk_size,
            history_events: e.history_events,
            targets_per_team: e.targets_per_team,
            seeds: e.seeds.clone(),
            variants,
            drift: self.drift.as_ref().map(|d| Drift {
                at_trial: d.at_trial,
                fraction: d.fraction,
            }),
            agent: AgentConfig {
                variant: Variant::HyQL,
                params: LearningParams {
                    alpha: l.alpha,
                    gamma: l.gamma,
                    epsilon: l.epsilon,
                    p: l.p,
                },
                include_cognitive: l.include_cognitive,
                reuse_threshold: self.cbr.reuse_threshold,
                success_threshold: self.cbr.success_threshold,
                similarity: SimilarityModel {
                    weights: DimensionWeights {
                        time: w.time,
                        location: w.location,
                        group: w.group,
                        cognitive: w.cognitive,
                    },
                    vocabulary: vocabulary.clone(),
                },
                neighbourhood: Neighbourhood {
                    k_users: self.cf.k_users,
                    k_items: self.cf.k_items,
                },
                rebuild_every: self.cf.rebuild_every,
            },
            context: ContextModel::new(vocabulary, hierarchy),
            time_granularity: parse("context.time_granularity", &self.context.time_granularity)?,
            location_granularity: parse("context.location_granularity", &self.context.location_granularity)?,
            schedule,
        };
        config.validate().map_err(|err| Error::config(section_of(&err), err))?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration always serializes")
    }
}

/// Best guess at the section a validation error belongs to.
fn section_of(err: &hyql_core::Error) -> &'static str {
    use hyql_core::Error as E;
    match err {
        E::InvalidParams(_) => "learning",
        E::InvalidNeighbourhood(_) => "cf",
        E::UnknownPlace(_) => "schedule.place",
        E::InvalidWindow { .. } => "experiment.window",
        E::InvalidConfig(m) if m.contains("threshold") || m.contains("weights") => "cbr",
        E::InvalidConfig(m) if m.contains("rebuild_every") => "cf.rebuild_every",
        E::InvalidConfig(m) if m.contains("slot") || m.contains("schedule") => "schedule",
        E::InvalidConfig(m) if m.contains("drift") => "drift",
        _ => "experiment",
    }
}

/// Parses configuration text. `origin` names the source in messages.
pub fn parse_config(text: &str, origin: &str) -> Result<ConfigFile> {
    let table: toml::Table = toml::from_str(text).map_err(|e| Error::config(origin, e))?;
    from_table(table, origin)
}

fn from_table(mut table: toml::Table, origin: &str) -> Result<ConfigFile> {
    // A manifest carries the configuration it ran with.
    if table
        .get("format")
        .and_then(|f| f.as_str())
        .is_some_and(|f| f.starts_with("hyql-run"))
    {
        table = match table.remove("config") {
            Some(toml::Value::Table(t)) => t,
            _ => return Err(Error::config(origin, "manifest has no [config] table")),
        };
    }
    ConfigFile::deserialize(toml::Value::Table(table)).map_err(|e| Error::config(origin, e))
}

/// Reads a configuration file (or a run manifest).
pub fn load_config(path: &Path) -> Result<ConfigFile> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text, &path.display().to_string())
}

/// Applies `section.key=value` overrides. Values are read as TOML, falling
/// back to a plain string.
pub fn apply_overrides(config: &ConfigFile, overrides: &[String]) -> Result<ConfigFile> {
    if overrides.is_empty() {
        return Ok(config.clone());
    }
    let mut table: toml::Table = toml::from_str(&config.to_toml()).expect("serialized configuration parses");
    for spec in overrides {
        let (key, raw) = spec
            .split_once('=')
            .ok_or_else(|| Error::config(spec, "expected key=value"))?;
        let key = key.trim();
        let value = toml::from_str::<toml::Table>(&format!("v = {}", raw.trim()))
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(raw.trim().to_owned()));
        let mut path: Vec<&str> = key.split('.').collect();
        let leaf = path
            .pop()
            .filter(|l| !l.is_empty())
            .ok_or_else(|| Error::config(key, "empty key"))?;
        let mut node = &mut table;
        for part in path {
            node = node
                .entry(part)
                .or_insert_with(|| toml::Value::Table(toml::Table::new()))
                .as_table_mut()
                .ok_or_else(|| Error::config(key, format!("`{part}` is not a table")))?;
        }
        node.insert(leaf.to_owned(), value);
    }
    from_table(table, "override")
}

/// Parses `0..30`, `0..=29` or `1,2,5`.
pub fn parse_seeds(spec: &str) -> Result<Vec<u64>> {
    let bad = |m: String| Error::config("--seeds", m);
    let num = |s: &str| s.trim().parse::<u64>().map_err(|e| bad(format!("{s:?}: {e}")));
    let seeds: Vec<u64> = if let Some((a, b)) = spec.split_once("..=") {
        (num(a)?..=num(b)?).collect()
    } else if let Some((a, b)) = spec.split_once("..") {
        (num(a)?..num(b)?).collect()
    } else {
        spec.split(',').map(num).collect::<Result<_>>()?
    };
    if seeds.is_empty() {
        return Err(bad(format!("{spec:?} selects no seeds")));
    }
    Ok(seeds)
}
