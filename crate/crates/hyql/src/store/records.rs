use hyql_core::collab::UserId;
use hyql_core::context::{CognitiveAction, GroupId, StateId};
use hyql_core::hyql::{Source, Variant};
use hyql_core::qlearning::ActionId;

use super::table::{check_text, field, Record};

/// A registered user and the device they use.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserRecord {
    pub user_id: UserId,
    pub group_id: GroupId,
    pub device_id: String,
}

impl Record for UserRecord {
    const TABLE: &'static str = "users";
    const COLUMNS: &'static [&'static str] = &["user_id", "group_id", "device_id"];

    fn fields(&self) -> Vec<String> {
        vec![
            self.user_id.0.to_string(),
            self.group_id.0.to_string(),
            self.device_id.clone(),
        ]
    }

    fn parse(f: &[&str]) -> Result<Self, String> {
        Ok(UserRecord {
            user_id: UserId(field::parse("user_id", f[0])?),
            group_id: GroupId(field::parse("group_id", f[1])?),
            device_id: f[2].to_owned(),
        })
    }

    fn key(&self) -> Option<String> {
        Some(self.user_id.0.to_string())
    }
}

/// Device characteristics. Kept for schema completeness; learning never
/// reads it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeviceRecord {
    pub device_id: String,
    pub screen_class: String,
    /// Stored comma-separated, `-` when empty.
    pub capabilities: Vec<String>,
}

impl Record for DeviceRecord {
    const TABLE: &'static str = "devices";
    const COLUMNS: &'static [&'static str] = &["device_id", "screen_class", "capabilities"];

    fn fields(&self) -> Vec<String> {
        let caps = if self.capabilities.is_empty() {
            "-".to_owned()
        } else {
            self.capabilities.join(",")
        };
        vec![self.device_id.clone(), self.screen_class.clone(), caps]
    }

    fn parse(f: &[&str]) -> Result<Self, String> {
        Ok(DeviceRecord {
            device_id: f[0].to_owned(),
            screen_class: f[1].to_owned(),
            capabilities: match f[2] {
                "-" => Vec::new(),
                caps => caps.split(',').map(str::to_owned).collect(),
            },
        })
    }

    fn validate(&self) -> Result<(), String> {
        for c in &self.capabilities {
            check_text("capability", c)?;
            if c.contains(',') || c == "-" {
                return Err(format!("capability {c:?} is not a plain name"));
            }
        }
        Ok(())
    }

    fn key(&self) -> Option<String> {
        Some(self.device_id.clone())
    }
}

/// A `(recommended action, user reward)` couple.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PreferenceRecord {
    pub seed: u64,
    pub variant: Variant,
    pub user_id: UserId,
    pub action_id: ActionId,
    /// 0 or 1.
    pub reward: f64,
    pub trial: u32,
    pub state_id: StateId,
}

impl Record for PreferenceRecord {
    const TABLE: &'static str = "preferences";
    const COLUMNS: &'static [&'static str] =
        &["seed", "variant", "user_id", "action_id", "reward", "trial", "state_id"];

    fn fields(&self) -> Vec<String> {
        vec![
            self.seed.to_string(),
            self.variant.to_string(),
            self.user_id.0.to_string(),
            self.action_id.0.to_string(),
            self.reward.to_string(),
            self.trial.to_string(),
            self.state_id.0.to_string(),
        ]
    }

    fn parse(f: &[&str]) -> Result<Self, String> {
        Ok(PreferenceRecord {
            seed: field::parse("seed", f[0])?,
            variant: field::parse("variant", f[1])?,
            user_id: UserId(field::parse("user_id", f[2])?),
            action_id: ActionId(field::parse("action_id", f[3])?),
            reward: field::parse("reward", f[4])?,
            trial: field::parse("trial", f[5])?,
            state_id: StateId(field::parse("state_id", f[6])?),
        })
    }

    fn validate(&self) -> Result<(), String> {
        field::reward("reward", self.reward)
    }
}

/// An action the system took: what it recommended, why, and the outcome.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionEvent {
    pub seed: u64,
    pub variant: Variant,
    pub user_id: UserId,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
    pub action_id: ActionId,
    pub source: Source,
    pub reward: f64,
}

impl Record for ActionEvent {
    const TABLE: &'static str = "action_history";
    const COLUMNS: &'static [&'static str] = &[
        "seed",
        "variant",
        "user_id",
        "timestamp",
        "action_id",
        "source",
        "reward",
    ];

    fn fields(&self) -> Vec<String> {
        vec![
            self.seed.to_string(),
            self.variant.to_string(),
            self.user_id.0.to_string(),
            self.timestamp.to_string(),
            self.action_id.0.to_string(),
            self.source.as_str().to_owned(),
            self.reward.to_string(),
        ]
    }

    fn parse(f: &[&str]) -> Result<Self, String> {
        Ok(ActionEvent {
            seed: field::parse("seed", f[0])?,
            variant: field::parse("variant", f[1])?,
            user_id: UserId(field::parse("user_id", f[2])?),
            timestamp: field::parse("timestamp", f[3])?,
            action_id: ActionId(field::parse("action_id", f[4])?),
            source: field::parse("source", f[5])?,
            reward: field::parse("reward", f[6])?,
        })
    }

    fn validate(&self) -> Result<(), String> {
        field::reward("reward", self.reward)
    }
}

/// A calendar entry registered by the user.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CalendarEvent {
    pub seed: u64,
    pub user_id: UserId,
    pub timestamp: u64,
    pub place: String,
    pub cognitive: CognitiveAction,
}

impl Record for CalendarEvent {
    const TABLE: &'static str = "event_history";
    const COLUMNS: &'static [&'static str] = &["seed", "user_id", "timestamp", "place", "cognitive"];

    fn fields(&self) -> Vec<String> {
        vec![
            self.seed.to_string(),
            self.user_id.0.to_string(),
            self.timestamp.to_string(),
            self.place.clone(),
            self.cognitive.as_str().to_owned(),
        ]
    }

    fn parse(f: &[&str]) -> Result<Self, String> {
        Ok(CalendarEvent {
            seed: field::parse("seed", f[0])?,
            user_id: UserId(field::parse("user_id", f[1])?),
            timestamp: field::parse("timestamp", f[2])?,
            place: f[3].to_owned(),
            cognitive: field::parse("cognitive", f[4])?,
        })
    }
}

/// Either kind of history entry; the kind selects the table.
#[derive(Debug, Clone, PartialEq)]
pub enum HistoryRecord {
    Action(ActionEvent),
    Event(CalendarEvent),
}

impl HistoryRecord {
    pub fn user_id(&self) -> UserId {
        match self {
            HistoryRecord::Action(a) => a.user_id,
            HistoryRecord::Event(e) => e.user_id,
        }
    }

    pub fn timestamp(&self) -> u64 {
        match self {
            HistoryRecord::Action(a) => a.timestamp,
            HistoryRecord::Event(e) => e.timestamp,
        }
    }
}
