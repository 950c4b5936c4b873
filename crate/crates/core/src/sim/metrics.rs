use alloc::format;
use alloc::vec::Vec;

use super::RunKey;
use crate::collab::UserId;
use crate::context::Situation;
use crate::hyql::{Source, Variant};
use crate::qlearning::ActionId;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialRecord {
    pub seed: u64,
    pub variant: Variant,
    pub user: UserId,
    /// Zero-based.
    pub trial: u32,
    pub situation: Situation,
    pub action: ActionId,
    pub source: Source,
    pub accepted: bool,
    pub q_before: f64,
    pub q_after: f64,
}

impl TrialRecord {
    pub fn key(&self) -> RunKey {
        RunKey {
            seed: self.seed,
            variant: self.variant,
            target: self.user,
        }
    }
}

/// The trials of one run, in order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrialLog {
    pub records: Vec<TrialRecord>,
}

impl TrialLog {
    pub fn new(records: Vec<TrialRecord>) -> Self {
        TrialLog { records }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrecisionCurve {
    pub window: usize,
    /// Accepted fraction of each consecutive window.
    pub values: Vec<f64>,
    /// Accepted fraction of the whole run.
    pub overall: f64,
}

pub fn precision_curve(log: &TrialLog, window: usize) -> Result<PrecisionCurve> {
    let n = log.len();
    if window == 0 || n == 0 || !n.is_multiple_of(window) {
        return Err(Error::InvalidWindow { n_trials: n, window });
    }
    let accepted = |rs: &[TrialRecord]| rs.iter().filter(|r| r.accepted).count() as f64;
    let values = log
        .records
        .chunks(window)
        .map(|w| accepted(w) / window as f64)
        .collect();
    Ok(PrecisionCurve {
        window,
        values,
        overall: accepted(&log.records) / n as f64,
    })
}

/// Mean precision over the first `windows` windows.
pub fn early_precision(curve: &PrecisionCurve, windows: usize) -> Result<f64> {
    if windows == 0 || windows > curve.values.len() {
        return Err(Error::InvalidConfig(format!(
            "{windows} early windows requested from a curve of {}",
            curve.values.len()
        )));
    }
    Ok(curve.values[..windows].iter().sum::<f64>() / windows as f64)
}

/// Per-window mean and sample standard deviation over runs.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveSummary {
    pub runs: usize,
    pub mean: Vec<f64>,
    /// Zero when there is a single run.
    pub sd: Vec<f64>,
}

pub fn summarize<'a>(curves: impl IntoIterator<Item = &'a PrecisionCurve>) -> Result<CurveSummary> {
    let curves: Vec<&PrecisionCurve> = curves.into_iter().collect();
    let first = curves
        .first()
        .ok_or_else(|| Error::InvalidConfig("no curves to summarize".into()))?;
    let len = first.values.len();
    if curves.iter().any(|c| c.values.len() != len || c.window != first.window) {
        return Err(Error::InvalidConfig("curves have different windows".into()));
    }
    let n = curves.len() as f64;
    let mean: Vec<f64> = (0..len)
        .map(|w| curves.iter().map(|c| c.values[w]).sum::<f64>() / n)
        .collect();
    let sd = (0..len)
        .map(|w| {
            if curves.len() < 2 {
                return 0.0;
            }
            let ss: f64 = curves
                .iter()
                .map(|c| (c.values[w] - mean[w]) * (c.values[w] - mean[w]))
                .sum();
            libm::sqrt(ss / (n - 1.0))
        })
        .collect();
    Ok(CurveSummary {
        runs: curves.len(),
        mean,
        sd,
    })
}
