//! Files of a run directory.
//!
//! `simulate` writes `trials.tsv`, `curves.tsv`, `qtables.tsv`, the `db/`
//! store and, last, `manifest.toml`. A directory without a manifest is an
//! incomplete run.

use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use hyql_core::collab::UserId;
use hyql_core::context::{ContextModel, Situation, StateId};
use hyql_core::hyql::{Source, Variant};
use hyql_core::qlearning::ActionId;
use hyql_core::sim::{RunOutput, TrialRecord};
use serde::{Deserialize, Serialize};

use crate::config::ConfigFile;
use crate::store::table::{self, field, Record};
use crate::{Error, Result};

pub const MANIFEST: &str = "manifest.toml";
pub const TRIALS: &str = "trials.tsv";
pub const CURVES: &str = "curves.tsv";
pub const QTABLES: &str = "qtables.tsv";
pub const DB: &str = "db";
pub const CHECKPOINTS: &str = "checkpoints";

/// Value of the manifest `format` key.
pub const MANIFEST_FORMAT: &str = "hyql-run 1";

/// One trial. `state_id` is the learning state, `situation_id` the full
/// situation it was projected from.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRow {
    pub seed: u64,
    pub variant: Variant,
    pub user: UserId,
    pub trial: u32,
    pub state_id: StateId,
    pub situation_id: StateId,
    pub situation: String,
    pub action: ActionId,
    pub source: Source,
    pub accepted: bool,
    pub q_before: f64,
    pub q_after: f64,
}

impl TrialRow {
    pub fn new(record: &TrialRecord, context: &ContextModel, include_cognitive: bool) -> Self {
        TrialRow {
            seed: record.seed,
            variant: record.variant,
            user: record.user,
            trial: record.trial,
            state_id: record.situation.state_view(include_cognitive).encode(),
            situation_id: record.situation.encode(),
            situation: context.describe(&record.situation),
            action: record.action,
            source: record.source,
            accepted: record.accepted,
            q_before: record.q_before,
            q_after: record.q_after,
        }
    }

    pub fn to_record(&self, context: &ContextModel) -> Result<TrialRecord> {
        Ok(TrialRecord {
            seed: self.seed,
            variant: self.variant,
            user: self.user,
            trial: self.trial,
            situation: Situation::decode(self.situation_id, &context.hierarchy)?,
            action: self.action,
            source: self.source,
            accepted: self.accepted,
            q_before: self.q_before,
            q_after: self.q_after,
        })
    }
}

impl Record for TrialRow {
    const TABLE: &'static str = "trials";
    const COLUMNS: &'static [&'static str] = &[
        "seed",
        "variant",
        "user",
        "trial",
        "state_id",
        "situation_id",
        "situation",
        "action",
        "source",
        "accepted",
        "q_before",
        "q_after",
    ];

    fn fields(&self) -> Vec<String> {
        vec![
            self.seed.to_string(),
            self.variant.to_string(),
            self.user.0.to_string(),
            self.trial.to_string(),
            self.state_id.0.to_string(),
            self.situation_id.0.to_string(),
            self.situation.clone(),
            self.action.0.to_string(),
            self.source.as_str().to_owned(),
            u8::from(self.accepted).to_string(),
            self.q_before.to_string(),
            self.q_after.to_string(),
        ]
    }

    fn parse(f: &[&str]) -> std::result::Result<Self, String> {
        Ok(TrialRow {
            seed: field::parse("seed", f[0])?,
            variant: field::parse("variant", f[1])?,
            user: UserId(field::parse("user", f[2])?),
            trial: field::parse("trial", f[3])?,
            state_id: StateId(field::parse("state_id", f[4])?),
            situation_id: StateId(field::parse("situation_id", f[5])?),
            situation: f[6].to_owned(),
            action: ActionId(field::parse("action", f[7])?),
            source: field::parse("source", f[8])?,
            accepted: field::flag("accepted", f[9])?,
            q_before: field::parse("q_before", f[10])?,
            q_after: field::parse("q_after", f[11])?,
        })
    }

    fn validate(&self) -> std::result::Result<(), String> {
        if !self.q_before.is_finite() || !self.q_after.is_finite() {
            return Err(format!("non-finite Q-value in trial {}", self.trial));
        }
        Ok(())
    }
}

/// Precision of one window of one run. Windows are numbered from 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveRow {
    pub seed: u64,
    pub variant: Variant,
    pub user: UserId,
    pub window: u32,
    pub precision: f64,
}

impl Record for CurveRow {
    const TABLE: &'static str = "curves";
    const COLUMNS: &'static [&'static str] = &["seed", "variant", "user", "window", "precision"];

    fn fields(&self) -> Vec<String> {
        vec![
            self.seed.to_string(),
            self.variant.to_string(),
            self.user.0.to_string(),
            self.window.to_string(),
            self.precision.to_string(),
        ]
    }

    fn parse(f: &[&str]) -> std::result::Result<Self, String> {
        Ok(CurveRow {
            seed: field::parse("seed", f[0])?,
            variant: field::parse("variant", f[1])?,
            user: UserId(field::parse("user", f[2])?),
            window: field::parse("window", f[3])?,
            precision: field::parse("precision", f[4])?,
        })
    }

    fn validate(&self) -> std::result::Result<(), String> {
        if self.window == 0 {
            return Err("window numbers start at 1".into());
        }
        if !(0.0..=1.0).contains(&self.precision) {
            return Err(format!("precision {} not in [0, 1]", self.precision));
        }
        Ok(())
    }
}

/// One cell of a final Q-table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QRow {
    pub seed: u64,
    pub variant: Variant,
    pub user: UserId,
    pub state_id: StateId,
    pub action_id: ActionId,
    pub value: f64,
    pub visits: u64,
}

impl Record for QRow {
    const TABLE: &'static str = "qtables";
    const COLUMNS: &'static [&'static str] = &["seed", "variant", "user", "state_id", "action_id", "value", "visits"];

    fn fields(&self) -> Vec<String> {
        vec![
            self.seed.to_string(),
            self.variant.to_string(),
            self.user.0.to_string(),
            self.state_id.0.to_string(),
            self.action_id.0.to_string(),
            self.value.to_string(),
            self.visits.to_string(),
        ]
    }

    fn parse(f: &[&str]) -> std::result::Result<Self, String> {
        Ok(QRow {
            seed: field::parse("seed", f[0])?,
            variant: field::parse("variant", f[1])?,
            user: UserId(field::parse("user", f[2])?),
            state_id: StateId(field::parse("state_id", f[3])?),
            action_id: ActionId(field::parse("action_id", f[4])?),
            value: field::parse("value", f[5])?,
            visits: field::parse("visits", f[6])?,
        })
    }

    fn validate(&self) -> std::result::Result<(), String> {
        if !self.value.is_finite() {
            return Err(format!("Q-value {} is not finite", self.value));
        }
        Ok(())
    }
}

pub fn trial_rows(output: &RunOutput, context: &ContextModel) -> Vec<TrialRow> {
    let include_cognitive = output.agent.config().include_cognitive;
    output
        .log
        .records
        .iter()
        .map(|r| TrialRow::new(r, context, include_cognitive))
        .collect()
}

pub fn curve_rows(output: &RunOutput) -> Vec<CurveRow> {
    output
        .curve
        .values
        .iter()
        .enumerate()
        .map(|(i, &precision)| CurveRow {
            seed: output.key.seed,
            variant: output.key.variant,
            user: output.key.target,
            window: i as u32 + 1,
            precision,
        })
        .collect()
}

pub fn q_rows(output: &RunOutput) -> Vec<QRow> {
    output
        .agent
        .qtable()
        .cells()
        .map(|(state_id, action_id, value, visits)| QRow {
            seed: output.key.seed,
            variant: output.key.variant,
            user: output.key.target,
            state_id,
            action_id,
            value,
            visits,
        })
        .collect()
}

/// Everything needed to reproduce a run directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format: String,
    /// Version of the tool that wrote the run.
    pub version: String,
    /// Unix seconds.
    pub started: u64,
    pub ended: u64,
    pub runs: usize,
    /// Paths relative to the run directory.
    pub outputs: Vec<String>,
    pub config: ConfigFile,
}

pub fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

impl Manifest {
    pub fn new(config: ConfigFile, runs: usize, outputs: Vec<String>, started: u64) -> Self {
        Manifest {
            format: MANIFEST_FORMAT.to_owned(),
            version: env!("CARGO_PKG_VERSION").to_owned(),
            started,
            ended: unix_now(),
            runs,
            outputs,
            config,
        }
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let text = toml::to_string(self).expect("manifest always serializes");
        table::write_atomic(&dir.join(MANIFEST), &text)
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let manifest: Manifest = toml::from_str(&text).map_err(|e| Error::data(&path, 0, e))?;
        if manifest.format != MANIFEST_FORMAT {
            return Err(Error::data(
                &path,
                0,
                format!("format {:?}, expected {MANIFEST_FORMAT:?}", manifest.format),
            ));
        }
        Ok(manifest)
    }
}

/// The manifest and precision curves of a finished run directory.
pub fn load_curves(dir: &Path) -> Result<(Manifest, Vec<CurveRow>)> {
    let manifest = Manifest::read(dir)?;
    let rows = table::read_table(&dir.join(CURVES))?;
    Ok((manifest, rows))
}
