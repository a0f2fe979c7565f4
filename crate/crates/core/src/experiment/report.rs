use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::economics::AdaptationRecord;
use crate::error::ExperimentError;
use crate::policy::{Action, QTable};
use crate::sim::{SimulationResult, WindowRow};

/// One monitoring window of an experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub time: f64,
    pub end: f64,
    pub ready_vms: usize,
    pub pending_vms: usize,
    pub provisioned_vms: usize,
    pub ideal_vms: Option<usize>,
    pub submitted: u64,
    pub successes: u64,
    pub failures: u64,
    pub revenue: f64,
    pub penalty: f64,
    pub vm_cost: f64,
    pub utility: f64,
    pub cumulative_utility: f64,
    pub vm_cycles: u64,
    pub action: Action,
    pub debt: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ReportTotals {
    pub submitted: u64,
    pub successes: u64,
    pub failures: u64,
    pub failed_fraction: f64,
    pub vm_cycles: u64,
    pub revenue: f64,
    pub penalty: f64,
    /// VM cost plus penalties.
    pub total_cost: f64,
    pub vm_cost: f64,
    pub aggregate_utility: f64,
    pub total_debt: f64,
    pub decisions: usize,
    pub mean_debt: f64,
    pub launches: usize,
    pub releases: usize,
    pub mean_vms: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentReport {
    pub policy: String,
    pub seed: u64,
    pub horizon: f64,
    pub rows: Vec<ReportRow>,
    pub adaptations: Vec<AdaptationRecord>,
    pub totals: ReportTotals,
    pub qtable: Option<QTable>,
    /// Seconds spent simulating; never written to the CSV files.
    pub wall_clock: f64,
}

impl ExperimentReport {
    pub fn from_result(result: SimulationResult, seed: u64, qtable: Option<QTable>, wall_clock: f64) -> Self {
        let mut cumulative = 0.0;
        let rows = result
            .windows
            .iter()
            .map(|w: &WindowRow| {
                cumulative += w.utility.utility;
                ReportRow {
                    time: w.start,
                    end: w.end,
                    ready_vms: w.ready_vms,
                    pending_vms: w.pending_vms,
                    provisioned_vms: w.provisioned_vms,
                    ideal_vms: w.ideal_vms,
                    submitted: w.submitted,
                    successes: w.utility.successes,
                    failures: w.utility.failures,
                    revenue: w.utility.revenue,
                    penalty: w.utility.penalty,
                    vm_cost: w.utility.vm_cost,
                    utility: w.utility.utility,
                    cumulative_utility: cumulative,
                    vm_cycles: w.utility.vm_cycles,
                    action: w.action,
                    debt: w.debt,
                }
            })
            .collect();
        let t = &result.totals;
        let totals = ReportTotals {
            submitted: t.submitted,
            successes: t.successes,
            failures: t.failures,
            failed_fraction: t.failed_fraction(),
            vm_cycles: t.vm_cycles,
            revenue: t.revenue,
            penalty: t.penalty,
            total_cost: t.vm_cost + t.penalty,
            vm_cost: t.vm_cost,
            aggregate_utility: cumulative,
            total_debt: t.total_debt,
            decisions: t.decisions,
            mean_debt: if t.decisions == 0 {
                0.0
            } else {
                t.total_debt / t.decisions as f64
            },
            launches: t.launches,
            releases: t.releases,
            mean_vms: t.mean_vms,
        };
        ExperimentReport {
            policy: result.policy,
            seed,
            horizon: result.horizon,
            rows,
            adaptations: result.adaptations,
            totals,
            qtable,
            wall_clock,
        }
    }

    /// Summary as ordered `(metric, value)` pairs, as written to
    /// `summary.csv`.
    pub fn summary(&self) -> Vec<(&'static str, String)> {
        let t = &self.totals;
        vec![
            ("policy", self.policy.clone()),
            ("seed", self.seed.to_string()),
            ("horizon", fixed(self.horizon)),
            ("submitted", t.submitted.to_string()),
            ("successes", t.successes.to_string()),
            ("failures", t.failures.to_string()),
            ("failed_fraction", fixed(t.failed_fraction)),
            ("vm_cycles", t.vm_cycles.to_string()),
            ("revenue", fixed(t.revenue)),
            ("penalty", fixed(t.penalty)),
            ("vm_cost", fixed(t.vm_cost)),
            ("total_cost", fixed(t.total_cost)),
            ("aggregate_utility", fixed(t.aggregate_utility)),
            ("total_debt", fixed(t.total_debt)),
            ("decisions", t.decisions.to_string()),
            ("mean_debt", fixed(t.mean_debt)),
            ("launches", t.launches.to_string()),
            ("releases", t.releases.to_string()),
            ("mean_vms", fixed(t.mean_vms)),
        ]
    }
}

/// Fixed-point with 6 decimals; never prints a negative zero.
pub fn fixed(x: f64) -> String {
    let s = format!("{x:.6}");
    if s == "-0.000000" {
        "0.000000".into()
    } else {
        s
    }
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(String::new, |v| v.to_string())
}

pub fn provisioning_csv(report: &ExperimentReport) -> String {
    let mut out = String::from("time,end,ready_vms,pending_vms,provisioned_vms,ideal_vms,action\n");
    for r in &report.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            fixed(r.time),
            fixed(r.end),
            r.ready_vms,
            r.pending_vms,
            r.provisioned_vms,
            opt(r.ideal_vms),
            r.action
        );
    }
    out
}

pub fn penalties_csv(report: &ExperimentReport) -> String {
    let mut out = String::from("time,end,submitted,successes,failures,penalty\n");
    for r in &report.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            fixed(r.time),
            fixed(r.end),
            r.submitted,
            r.successes,
            r.failures,
            fixed(r.penalty)
        );
    }
    out
}

pub fn debt_csv(report: &ExperimentReport) -> String {
    let mut out = String::from(
        "time,state,requested,action,ideal_action,u_actual,u_ideal,debt,window_end,u_maintain,u_launch,u_release\n",
    );
    for a in &report.adaptations {
        let _ = write!(out, "{},{},{},{}", fixed(a.time), a.state, a.requested, a.action_taken);
        match &a.valuation {
            Some(v) => {
                let per = |act: Action| v.per_action_utilities.get(&act).map(|u| fixed(*u));
                let _ = writeln!(
                    out,
                    ",{},{},{},{},{},{},{},{}",
                    v.ideal_action,
                    fixed(v.u_actual),
                    fixed(v.u_ideal),
                    fixed(v.debt),
                    fixed(v.window_end),
                    opt(per(Action::Maintain)),
                    opt(per(Action::Launch)),
                    opt(per(Action::Release))
                );
            }
            None => out.push_str(",,,,,,,,\n"),
        }
    }
    out
}

pub fn utility_csv(report: &ExperimentReport) -> String {
    let mut out = String::from("time,end,revenue,penalty,vm_cost,utility,cumulative_utility,vm_cycles\n");
    for r in &report.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            fixed(r.time),
            fixed(r.end),
            fixed(r.revenue),
            fixed(r.penalty),
            fixed(r.vm_cost),
            fixed(r.utility),
            fixed(r.cumulative_utility),
            r.vm_cycles
        );
    }
    out
}

pub fn summary_csv(report: &ExperimentReport) -> String {
    let mut out = String::from("metric,value\n");
    for (k, v) in report.summary() {
        let _ = writeln!(out, "{k},{v}");
    }
    out
}

/// Writes every CSV of `report` into `dir`, creating it if needed.
pub fn emit_csv(report: &ExperimentReport, dir: &Path) -> Result<(), ExperimentError> {
    std::fs::create_dir_all(dir).map_err(|e| ExperimentError::io(dir, e))?;
    let mut files = vec![
        ("provisioning.csv", provisioning_csv(report)),
        ("penalties.csv", penalties_csv(report)),
        ("debt.csv", debt_csv(report)),
        ("utility.csv", utility_csv(report)),
        ("summary.csv", summary_csv(report)),
    ];
    if let Some(q) = &report.qtable {
        files.push(("qtable.csv", q.to_csv()));
    }
    for (name, body) in files {
        let path = dir.join(name);
        std::fs::write(&path, body).map_err(|e| ExperimentError::io(&path, e))?;
    }
    Ok(())
}

/// Reads `summary.csv` from a run directory.
pub fn read_summary(dir: &Path) -> Result<BTreeMap<String, String>, ExperimentError> {
    let path = dir.join("summary.csv");
    let text = std::fs::read_to_string(&path).map_err(|e| ExperimentError::io(&path, e))?;
    let mut lines = text.lines();
    if lines.next() != Some("metric,value") {
        return Err(ExperimentError::Summary {
            path,
            reason: "missing metric,value header".into(),
        });
    }
    let mut out = BTreeMap::new();
    for line in lines.filter(|l| !l.is_empty()) {
        let (k, v) = line.split_once(',').ok_or_else(|| ExperimentError::Summary {
            path: path.clone(),
            reason: format!("bad line {line:?}"),
        })?;
        out.insert(k.to_string(), v.to_string());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::economics::UtilityBreakdown;
    use crate::sim::RunTotals;

    fn report(windows: Vec<WindowRow>) -> ExperimentReport {
        let result = SimulationResult {
            policy: "voting".into(),
            horizon: 60.0,
            windows,
            adaptations: Vec::new(),
            requests: Vec::new(),
            vms: Vec::new(),
            totals: RunTotals::default(),
        };
        ExperimentReport::from_result(result, 1, None, 0.5)
    }

    #[test]
    fn empty_report_has_headers_only() {
        let r = report(Vec::new());
        for body in [provisioning_csv(&r), penalties_csv(&r), debt_csv(&r), utility_csv(&r)] {
            assert_eq!(body.lines().count(), 1);
            assert!(body.ends_with('\n') && !body.contains('\r'));
        }
    }

    #[test]
    fn one_window_round_trip() {
        let row = WindowRow {
            start: 0.0,
            end: 60.0,
            ready_vms: 2,
            pending_vms: 0,
            provisioned_vms: 2,
            ideal_vms: Some(1),
            submitted: 10,
            utility: UtilityBreakdown {
                revenue: 0.012344,
                penalty: 0.0,
                vm_cost: 0.02222,
                utility: 0.012344 - 0.02222,
                window: (0.0, 60.0),
                successes: 10,
                failures: 0,
                vm_cycles: 2,
            },
            decided: true,
            requested: Action::Maintain,
            action: Action::Maintain,
            debt: Some(-0.01111),
        };
        let r = report(vec![row]);
        let body = utility_csv(&r);
        let line = body.lines().nth(1).unwrap();
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields[5], "-0.009876");
        assert_eq!(fields[6], "-0.009876");
        assert_eq!(provisioning_csv(&r).lines().nth(1).unwrap(), "0.000000,60.000000,2,0,2,1,maintain");
        assert_eq!(r.totals.aggregate_utility, r.rows[0].cumulative_utility);
    }

    #[test]
    fn negative_zero_is_normalized() {
        assert_eq!(fixed(-0.0), "0.000000");
        assert_eq!(fixed(-1e-12), "0.000000");
        assert_eq!(fixed(1.06774), "1.067740");
    }
}
