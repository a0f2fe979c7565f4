use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use super::report::{fixed, read_summary, ExperimentReport};
use crate::error::ExperimentError;

/// The figures of a run that a comparison needs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunSummary {
    pub horizon: f64,
    pub utility: f64,
    pub failed_fraction: f64,
    pub total_cost: f64,
    pub mean_debt: f64,
}

impl RunSummary {
    pub fn of(report: &ExperimentReport) -> RunSummary {
        RunSummary {
            horizon: report.horizon,
            utility: report.totals.aggregate_utility,
            failed_fraction: report.totals.failed_fraction,
            total_cost: report.totals.total_cost,
            mean_debt: report.totals.mean_debt,
        }
    }

    /// Reads the summary written into a run directory.
    pub fn read(dir: &Path) -> Result<RunSummary, ExperimentError> {
        let map = read_summary(dir)?;
        let get = |key: &str| -> Result<f64, ExperimentError> {
            map.get(key)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| ExperimentError::Summary {
                    path: dir.join("summary.csv"),
                    reason: format!("missing or non-numeric {key}"),
                })
        };
        Ok(RunSummary {
            horizon: get("horizon")?,
            utility: get("aggregate_utility")?,
            failed_fraction: get("failed_fraction")?,
            total_cost: get("total_cost")?,
            mean_debt: get("mean_debt")?,
        })
    }
}

/// Differences of run A relative to run B.
#[derive(Clone, Debug, PartialEq)]
pub struct Comparison {
    pub a: RunSummary,
    pub b: RunSummary,
    pub utility_delta: f64,
    /// Relative to B's utility, in percent; zero when B's utility is zero.
    pub utility_delta_pct: f64,
    /// In percentage points.
    pub failed_fraction_delta_points: f64,
    pub cost_delta: f64,
}

pub fn compare(a: RunSummary, b: RunSummary) -> Result<Comparison, ExperimentError> {
    if (a.horizon - b.horizon).abs() > 1e-9 {
        return Err(ExperimentError::HorizonMismatch(a.horizon, b.horizon));
    }
    let utility_delta = a.utility - b.utility;
    let utility_delta_pct = if b.utility == 0.0 {
        0.0
    } else {
        100.0 * utility_delta / b.utility.abs()
    };
    Ok(Comparison {
        a,
        b,
        utility_delta,
        utility_delta_pct,
        failed_fraction_delta_points: 100.0 * (a.failed_fraction - b.failed_fraction),
        cost_delta: a.total_cost - b.total_cost,
    })
}

pub fn compare_reports(a: &ExperimentReport, b: &ExperimentReport) -> Result<Comparison, ExperimentError> {
    compare(RunSummary::of(a), RunSummary::of(b))
}

pub fn compare_dirs(a: &Path, b: &Path) -> Result<Comparison, ExperimentError> {
    compare(RunSummary::read(a)?, RunSummary::read(b)?)
}

impl Comparison {
    pub fn rows(&self) -> BTreeMap<&'static str, String> {
        BTreeMap::from([
            ("utility_a", fixed(self.a.utility)),
            ("utility_b", fixed(self.b.utility)),
            ("utility_delta", fixed(self.utility_delta)),
            ("utility_delta_pct", format!("{:.2}", self.utility_delta_pct)),
            ("failed_fraction_a", fixed(self.a.failed_fraction)),
            ("failed_fraction_b", fixed(self.b.failed_fraction)),
            ("failed_fraction_delta_points", format!("{:.2}", self.failed_fraction_delta_points)),
            ("cost_delta", fixed(self.cost_delta)),
            ("mean_debt_a", fixed(self.a.mean_debt)),
            ("mean_debt_b", fixed(self.b.mean_debt)),
        ])
    }
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "metric,value")?;
        for (k, v) in self.rows() {
            writeln!(f, "{k},{v}")?;
        }
        Ok(())
    }
}
