//! Flat-file persistence.
//!
//! A store is a directory holding one tab-separated file per table: users,
//! devices, preferences, and the two history tables. Each file starts with a
//! version line and a column header. Tables are append-only.

mod checkpoint;
mod records;
pub mod table;

use std::fs;
use std::path::{Path, PathBuf};

pub use checkpoint::Checkpoint;
pub use records::{ActionEvent, CalendarEvent, DeviceRecord, HistoryRecord, PreferenceRecord, UserRecord};
pub use table::Record;

use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct Store {
    dir: PathBuf,
}

fn ensure_table<R: Record>(dir: &Path) -> Result<()> {
    let path = dir.join(format!("{}.tsv", R::TABLE));
    if path.exists() {
        table::read_table::<R>(&path).map(|_| ())
    } else {
        table::write_table::<R>(&path, &[])
    }
}

impl Store {
    /// Opens the store in `dir`, creating it and any missing table.
    pub fn create(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        ensure_table::<UserRecord>(&dir)?;
        ensure_table::<DeviceRecord>(&dir)?;
        ensure_table::<PreferenceRecord>(&dir)?;
        ensure_table::<ActionEvent>(&dir)?;
        ensure_table::<CalendarEvent>(&dir)?;
        Ok(Store { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path<R: Record>(&self) -> PathBuf {
        self.dir.join(format!("{}.tsv", R::TABLE))
    }

    pub fn append<R: Record>(&self, record: R) -> Result<()> {
        self.append_all(&[record])
    }

    /// All or nothing: any invalid record rejects the whole batch.
    pub fn append_all<R: Record>(&self, records: &[R]) -> Result<()> {
        table::append_rows(&self.path::<R>(), records)
    }

    pub fn append_history(&self, record: HistoryRecord) -> Result<()> {
        match record {
            HistoryRecord::Action(a) => self.append(a),
            HistoryRecord::Event(e) => self.append(e),
        }
    }

    /// Rows in append order.
    pub fn scan<R: Record>(&self) -> Result<Vec<R>> {
        table::read_table(&self.path::<R>())
    }

    /// Both history tables merged, ordered by user then timestamp; append
    /// order is kept among equal keys.
    pub fn history(&self) -> Result<Vec<HistoryRecord>> {
        let mut all: Vec<HistoryRecord> = self
            .scan::<CalendarEvent>()?
            .into_iter()
            .map(HistoryRecord::Event)
            .chain(self.scan::<ActionEvent>()?.into_iter().map(HistoryRecord::Action))
            .collect();
        all.sort_by_key(|r| (r.user_id(), r.timestamp()));
        Ok(all)
    }
}
