//! Cross-run comparison and the early-window ordering verdict.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use hyql_core::collab::UserId;
use hyql_core::hyql::Variant;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::config::ConfigFile;
use crate::report::{load_curves, CurveRow};
use crate::{Error, Result};

/// Windows averaged for the cold-start verdict.
pub const EARLY_WINDOWS: usize = 5;

/// Confidence level of the verdict.
pub const CONFIDENCE: f64 = 0.95;

/// One-sided paired t-test of `mean > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairedTest {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation of the differences.
    pub sd: f64,
    pub t: f64,
    pub p_value: f64,
    /// One-sided lower confidence bound on the mean difference.
    pub lower_bound: f64,
}

impl PairedTest {
    /// Fewer than two differences give no test.
    pub fn new(diffs: &[f64]) -> Option<Self> {
        let n = diffs.len();
        if n < 2 {
            return None;
        }
        let nf = n as f64;
        let mean = diffs.iter().sum::<f64>() / nf;
        let sd = (diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (nf - 1.0)).sqrt();
        let se = sd / nf.sqrt();
        if se == 0.0 {
            let p_value = if mean > 0.0 { 0.0 } else { 1.0 };
            return Some(PairedTest {
                n,
                mean,
                sd,
                t: if mean > 0.0 { f64::INFINITY } else { f64::NEG_INFINITY },
                p_value,
                lower_bound: mean,
            });
        }
        let dist = StudentsT::new(0.0, 1.0, nf - 1.0).expect("at least one degree of freedom");
        let t = mean / se;
        Some(PairedTest {
            n,
            mean,
            sd,
            t,
            p_value: 1.0 - dist.cdf(t),
            lower_bound: mean - dist.inverse_cdf(CONFIDENCE) * se,
        })
    }

    pub fn is_positive(&self) -> bool {
        self.mean > 0.0 && self.p_value < 1.0 - CONFIDENCE
    }
}

/// Per-run early precision keyed by `(seed, target)`.
pub fn early_by_run(rows: &[CurveRow], variant: Variant) -> BTreeMap<(u64, UserId), f64> {
    let mut sums: BTreeMap<(u64, UserId), (f64, usize)> = BTreeMap::new();
    for r in rows
        .iter()
        .filter(|r| r.variant == variant && r.window as usize <= EARLY_WINDOWS)
    {
        let e = sums.entry((r.seed, r.user)).or_default();
        e.0 += r.precision;
        e.1 += 1;
    }
    sums.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect()
}

/// `a − b` for every run present in both.
pub fn paired_differences(a: &BTreeMap<(u64, UserId), f64>, b: &BTreeMap<(u64, UserId), f64>) -> Vec<f64> {
    a.iter().filter_map(|(k, x)| b.get(k).map(|y| x - y)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowStats {
    pub dir: usize,
    pub variant: Variant,
    pub window: u32,
    pub runs: usize,
    pub mean: f64,
    pub sd: f64,
    /// Mean minus the first directory's mean for the same variant and window.
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub hybrid: Variant,
    pub baseline: Variant,
    pub hybrid_early: f64,
    pub baseline_early: f64,
    pub test: Option<PairedTest>,
}

impl Verdict {
    pub fn holds(&self) -> bool {
        self.hybrid_early > self.baseline_early && self.test.is_some_and(|t| t.is_positive())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub dirs: Vec<PathBuf>,
    pub rows: Vec<WindowStats>,
    pub verdict: Option<Verdict>,
}

fn window_stats(rows: &[CurveRow]) -> BTreeMap<(Variant, u32), (usize, f64, f64)> {
    let mut groups: BTreeMap<(Variant, u32), Vec<f64>> = BTreeMap::new();
    for r in rows {
        groups.entry((r.variant, r.window)).or_default().push(r.precision);
    }
    groups
        .into_iter()
        .map(|(k, v)| {
            let n = v.len() as f64;
            let mean = v.iter().sum::<f64>() / n;
            let sd = if v.len() < 2 {
                0.0
            } else {
                (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            };
            (k, (v.len(), mean, sd))
        })
        .collect()
}

/// Configurations that differ only in seeds and variants.
fn comparable(a: &ConfigFile, b: &ConfigFile) -> bool {
    let strip = |c: &ConfigFile| {
        let mut c = c.clone();
        c.experiment.seeds.clear();
        c.experiment.variants.clear();
        c
    };
    strip(a) == strip(b)
}

/// Compares run directories. A verdict needs at least two directories and
/// pairs the first directory holding the hybrid variant with the first
/// holding a plain baseline, ε-greedy preferred.
pub fn compare(dirs: &[PathBuf]) -> Result<Comparison> {
    if dirs.is_empty() {
        return Err(Error::config("compare", "no run directories given"));
    }
    let mut loaded: Vec<(PathBuf, ConfigFile, Vec<CurveRow>)> = Vec::with_capacity(dirs.len());
    for dir in dirs {
        let (manifest, rows) = load_curves(dir)?;
        if rows.is_empty() {
            return Err(Error::data(dir.join(crate::report::CURVES), 0, "no precision curves"));
        }
        if let Some((first_dir, first, _)) = loaded.first() {
            if !comparable(first, &manifest.config) {
                return Err(Error::Incompatible(format!(
                    "{} and {} were run with different configurations",
                    first_dir.display(),
                    dir.display()
                )));
            }
        }
        loaded.push((dir.clone(), manifest.config, rows));
    }

    let stats: Vec<_> = loaded.iter().map(|(_, _, rows)| window_stats(rows)).collect();
    let mut rows = Vec::new();
    for (i, s) in stats.iter().enumerate() {
        for (&(variant, window), &(runs, mean, sd)) in s {
            rows.push(WindowStats {
                dir: i,
                variant,
                window,
                runs,
                mean,
                sd,
                delta: stats[0].get(&(variant, window)).map(|&(_, m0, _)| mean - m0),
            });
        }
    }

    let verdict = if loaded.len() < 2 {
        None
    } else {
        let find = |v: Variant| {
            loaded
                .iter()
                .find(|(_, _, rows)| rows.iter().any(|r| r.variant == v))
                .map(|(_, _, rows)| early_by_run(rows, v))
        };
        let hybrid = find(Variant::HyQL);
        let baseline = [Variant::QLearning, Variant::QLearningGreedy]
            .into_iter()
            .find_map(|v| find(v).map(|runs| (v, runs)));
        match (hybrid, baseline) {
            (Some(h), Some((baseline, b))) => {
                let mean = |m: &BTreeMap<_, f64>| m.values().sum::<f64>() / m.len() as f64;
                Some(Verdict {
                    hybrid: Variant::HyQL,
                    baseline,
                    hybrid_early: mean(&h),
                    baseline_early: mean(&b),
                    test: PairedTest::new(&paired_differences(&h, &b)),
                })
            }
            _ => None,
        }
    };

    Ok(Comparison {
        dirs: dirs.to_vec(),
        rows,
        verdict,
    })
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, d) in self.dirs.iter().enumerate() {
            writeln!(f, "# [{i}] {}", d.display())?;
        }
        writeln!(f, "dir\tvariant\twindow\truns\tmean\tsd\tdelta")?;
        for r in &self.rows {
            let delta = r.delta.map_or_else(|| "-".to_owned(), |d| format!("{d:+.4}"));
            writeln!(
                f,
                "{}\t{}\t{}\t{}\t{:.4}\t{:.4}\t{delta}",
                r.dir, r.variant, r.window, r.runs, r.mean, r.sd
            )?;
        }
        if let Some(v) = &self.verdict {
            write!(
                f,
                "verdict: {} early precision {:.4} vs {} {:.4}",
                v.hybrid, v.hybrid_early, v.baseline, v.baseline_early
            )?;
            match v.test {
                Some(t) => write!(
                    f,
                    "; paired n={} mean diff {:+.4}, t={:.3}, one-sided p={:.3e}",
                    t.n, t.mean, t.t, t.p_value
                )?,
                None => write!(f, "; too few paired runs for a test")?,
            }
            writeln!(
                f,
                " => {}",
                if v.holds() {
                    "hybrid ahead"
                } else {
                    "no significant lead"
                }
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn t_test_matches_hand_computation() {
        // mean 2, sd 1, n 4: t = 2 / (1/2) = 4 on 3 degrees of freedom.
        let t = PairedTest::new(&[1.0, 2.0, 3.0, 2.0]).unwrap();
        assert!((t.mean - 2.0).abs() < 1e-15);
        assert!((t.sd - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
        let d = [1.0, 2.0, 3.0, 4.0, 5.0];
        let t = PairedTest::new(&d).unwrap();
        assert!((t.t - 3.0 / (2.5f64.sqrt() / 5f64.sqrt())).abs() < 1e-12);
        // Upper tail of t(4) at 4.2426: 0.006620 from standard tables.
        assert!((t.p_value - 0.00662).abs() < 2e-5, "{}", t.p_value);
        assert!(t.is_positive());
        assert!(!PairedTest::new(&[-1.0, 1.0, 0.5, -0.5]).unwrap().is_positive());
        assert!(PairedTest::new(&[1.0]).is_none());
    }

    #[test]
    fn constant_differences_decide_by_sign() {
        assert!(PairedTest::new(&[0.1; 5]).unwrap().is_positive());
        assert!(!PairedTest::new(&[0.0; 5]).unwrap().is_positive());
    }
}
