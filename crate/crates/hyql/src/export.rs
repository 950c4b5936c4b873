//! Plot-ready precision table: one row per variant and window.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use hyql_core::hyql::Variant;

use crate::report::load_curves;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExportFormat {
    #[default]
    Tsv,
    Csv,
}

impl ExportFormat {
    fn delimiter(self) -> u8 {
        match self {
            ExportFormat::Tsv => b'\t',
            ExportFormat::Csv => b',',
        }
    }
}

impl FromStr for ExportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tsv" => Ok(ExportFormat::Tsv),
            "csv" => Ok(ExportFormat::Csv),
            other => Err(Error::config(
                "--format",
                format!("unknown format {other:?}, expected tsv or csv"),
            )),
        }
    }
}

impl fmt::Display for ExportFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExportFormat::Tsv => "tsv",
            ExportFormat::Csv => "csv",
        })
    }
}

pub const COLUMNS: [&str; 7] = ["variant", "window", "first_trial", "last_trial", "runs", "mean", "sd"];

/// Mean and sample standard deviation of each window over the runs of each
/// variant, variants in their canonical order.
pub fn export(dir: &Path, format: ExportFormat) -> Result<String> {
    let (manifest, rows) = load_curves(dir)?;
    if rows.is_empty() {
        return Err(Error::data(dir.join(crate::report::CURVES), 0, "no precision curves"));
    }
    let window = u64::from(manifest.config.experiment.window);
    let mut groups: BTreeMap<(Variant, u32), Vec<f64>> = BTreeMap::new();
    for r in &rows {
        groups.entry((r.variant, r.window)).or_default().push(r.precision);
    }
    let mut w = csv::WriterBuilder::new()
        .delimiter(format.delimiter())
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let io = |e: csv::Error| Error::data(dir, 0, e);
    w.write_record(COLUMNS).map_err(io)?;
    for ((variant, win), values) in groups {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let sd = if values.len() < 2 {
            0.0
        } else {
            (values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        let first = (u64::from(win) - 1) * window;
        w.write_record([
            variant.to_string(),
            win.to_string(),
            first.to_string(),
            (first + window - 1).to_string(),
            values.len().to_string(),
            mean.to_string(),
            sd.to_string(),
        ])
        .map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::data(dir, 0, e.error()))?;
    Ok(String::from_utf8(bytes).expect("fields are ASCII"))
}
