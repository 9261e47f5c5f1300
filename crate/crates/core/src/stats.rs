//! Step counts of a program and of its forward elimination under the
//! round-robin scheduler.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::corpus::list_sum_source;
use crate::explore::{run, Outcome, SchedulerPolicy, Trace};
use crate::parser::parse_program;
use crate::runtime::{Rule, RuntimeError};
use crate::syntax::{FutureId, Program};
use crate::transform::{fwd_elim, TransformError};
use crate::typecheck::ForwardMode;

/// The task whose synchronisations are counted: the main task.
pub const READER: FutureId = FutureId(0);

#[derive(Debug, Error)]
pub enum StatsError {
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error(transparent)]
    Runtime(#[from] RuntimeError),
    #[error("generated program does not parse: {0}")]
    Generated(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RunCounts {
    pub steps: usize,
    pub rules: BTreeMap<Rule, usize>,
    pub reader_get_future: usize,
    pub reader_get_data: usize,
    pub chain_updates: usize,
    pub outcome: String,
}

impl RunCounts {
    pub fn of_trace(trace: &Trace) -> RunCounts {
        let mut rules = BTreeMap::new();
        let (mut gf, mut gd) = (0, 0);
        for label in trace.labels() {
            *rules.entry(label.rule).or_insert(0) += 1;
            if label.actor == READER {
                match label.rule {
                    Rule::GetFuture => gf += 1,
                    Rule::GetData => gd += 1,
                    _ => {}
                }
            }
        }
        RunCounts {
            steps: trace.steps.len(),
            chain_updates: rules.get(&Rule::ChainUpdate).copied().unwrap_or(0),
            rules,
            reader_get_future: gf,
            reader_get_data: gd,
            outcome: match &trace.outcome {
                Outcome::Terminated(Some(v)) => format!("terminated: {v}"),
                Outcome::Terminated(None) => "terminated".into(),
                Outcome::Deadlocked(_) => "deadlocked".into(),
                Outcome::DepthExceeded => "step bound reached".into(),
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct StatsReport {
    pub forward: RunCounts,
    pub eliminated: RunCounts,
}

impl fmt::Display for StatsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<16} {:>16} {:>16}", "", "forward*", "fwdElim")?;
        let row = |f: &mut fmt::Formatter<'_>, name: &str, a: usize, b: usize| {
            writeln!(f, "{name:<16} {a:>16} {b:>16}")
        };
        row(f, "steps", self.forward.steps, self.eliminated.steps)?;
        row(
            f,
            "reader GET-FUT",
            self.forward.reader_get_future,
            self.eliminated.reader_get_future,
        )?;
        row(
            f,
            "reader GET-DATA",
            self.forward.reader_get_data,
            self.eliminated.reader_get_data,
        )?;
        row(
            f,
            "CHAIN-UPDATE",
            self.forward.chain_updates,
            self.eliminated.chain_updates,
        )?;
        for rule in Rule::ALL.into_iter().filter(|r| *r != Rule::ChainUpdate) {
            let (a, b) = (
                self.forward.rules.get(&rule).copied().unwrap_or(0),
                self.eliminated.rules.get(&rule).copied().unwrap_or(0),
            );
            if a + b > 0 {
                row(f, rule.name(), a, b)?;
            }
        }
        write!(
            f,
            "{:<16} {:>16} {:>16}",
            "outcome", self.forward.outcome, self.eliminated.outcome
        )
    }
}

/// Runs `p` under `mode` and its forward elimination under strict mode,
/// both with the round-robin scheduler.
pub fn compare(
    p: &Program,
    mode: ForwardMode,
    max_steps: usize,
) -> Result<StatsReport, StatsError> {
    let eliminated = fwd_elim(p)?;
    let a = run(p, SchedulerPolicy::RoundRobin, mode, max_steps)?;
    let b = run(
        &eliminated,
        SchedulerPolicy::RoundRobin,
        ForwardMode::Strict,
        max_steps,
    )?;
    Ok(StatsReport {
        forward: RunCounts::of_trace(&a),
        eliminated: RunCounts::of_trace(&b),
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ChainRow {
    pub n: u32,
    pub report: StatsReport,
}

/// Step counts of the list summation with delegation chains of each
/// length in `ns`.
pub fn list_sum_table(ns: &[u32], max_steps: usize) -> Result<Vec<ChainRow>, StatsError> {
    ns.iter()
        .map(|&n| {
            let p = parse_program(&list_sum_source(n, true))
                .map_err(|e| StatsError::Generated(format!("{e:?}")))?;
            Ok(ChainRow {
                n,
                report: compare(&p, ForwardMode::Strict, max_steps)?,
            })
        })
        .collect()
}

pub fn format_chain_table(rows: &[ChainRow]) -> String {
    let mut out = String::from("    n  GET-FUT(fwdElim)  GET-FUT(forward*)  CHAIN-UPDATE\n");
    for r in rows {
        out.push_str(&format!(
            "{:>5}  {:>16}  {:>17}  {:>12}\n",
            r.n,
            r.report.eliminated.reader_get_future,
            r.report.forward.reader_get_future,
            r.report.forward.chain_updates
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;

    #[test]
    fn worked_example_counts() {
        let p = corpus::get("delegate_forward").unwrap().parse().unwrap();
        let r = compare(&p, ForwardMode::Strict, 10_000).unwrap();
        assert_eq!(r.forward.outcome, "terminated: 10");
        assert_eq!(r.eliminated.outcome, "terminated: 10");
        assert_eq!(r.forward.chain_updates, 2);
        assert_eq!(r.eliminated.chain_updates, 0);
    }

    #[test]
    fn chains() {
        for row in list_sum_table(&[1, 2, 4], 10_000).unwrap() {
            let n = row.n as usize;
            assert_eq!(row.report.eliminated.reader_get_future, n + 1);
            assert_eq!(row.report.eliminated.reader_get_data, 1);
            assert_eq!(row.report.forward.reader_get_future, 1);
            assert_eq!(row.report.forward.reader_get_data, 1);
            assert_eq!(row.report.forward.chain_updates, n);
        }
    }

    #[test]
    fn without_forward_nothing_changes() {
        let p = corpus::get("delegate").unwrap().parse().unwrap();
        let r = compare(&p, ForwardMode::Strict, 10_000).unwrap();
        assert_eq!(r.forward, r.eliminated);
    }
}
