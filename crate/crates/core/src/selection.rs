//! History-based worker selection.
//!
//! Each worker's capacity score is the contribution- and complexity-weighted
//! mean of the speed gains of the iterations it took part in. Its behavior
//! factor is −1 if any audit in its recent window shows misbehavior. Only
//! workers with score > 1 and behavior factor +1 are used; if none qualify
//! the delegator runs the task alone.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::adversary::AuditReport;
use crate::error::{ConfigError, SelectionError};
use crate::ledger::{Channel, LedgerStore};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ColdStart {
    /// Workers without history get a provisional score just above 1.
    #[default]
    Optimistic,
    /// Workers without history are never selected.
    Strict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SelectionPolicy {
    pub cold_start: ColdStart,
    /// Provisional score for unknown workers is `1 + optimism_margin`.
    pub optimism_margin: f64,
    /// Number of most recent audits consulted for the behavior factor.
    pub lambda_window: usize,
    /// Incomplete chunks within the window that count as repeated failure.
    pub failure_threshold: u64,
}

impl Default for SelectionPolicy {
    fn default() -> Self {
        SelectionPolicy {
            cold_start: ColdStart::Optimistic,
            optimism_margin: 0.01,
            lambda_window: 10,
            failure_threshold: 2,
        }
    }
}

impl SelectionPolicy {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.optimism_margin.is_finite() && self.optimism_margin > 0.0) {
            return Err(ConfigError::invalid("selection_policy.optimism_margin", "must be > 0"));
        }
        if self.lambda_window == 0 {
            return Err(ConfigError::invalid("selection_policy.lambda_window", "must be ≥ 1"));
        }
        if self.failure_threshold == 0 {
            return Err(ConfigError::invalid("selection_policy.failure_threshold", "must be ≥ 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Contribution {
    pub iteration_id: u64,
    /// Share of the iteration's jobs this worker completed.
    pub wc: f64,
    pub complexity: f64,
    pub iteration_speed_gain: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorkerAssessment {
    pub worker_id: String,
    pub fractional_speed_gain: f64,
    pub lambda: i8,
    pub history_length: usize,
    pub contributions: Vec<Contribution>,
}

impl WorkerAssessment {
    pub fn passes_gate(&self) -> bool {
        self.fractional_speed_gain > 1.0 && self.lambda > 0
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SelectionDecision {
    Selected(Vec<String>),
    LocalExecution,
}

impl SelectionDecision {
    pub fn selected(&self) -> &[String] {
        match self {
            SelectionDecision::Selected(ids) => ids,
            SelectionDecision::LocalExecution => &[],
        }
    }
}

pub fn fractional_contribution(jobs_by_worker: u64, total_jobs: u64) -> Result<f64, SelectionError> {
    if total_jobs == 0 {
        return Err(SelectionError::ZeroTotalJobs);
    }
    Ok(jobs_by_worker.min(total_jobs) as f64 / total_jobs as f64)
}

/// `Σ c·Wc·S / Σ c·Wc` over `(wc, complexity, speed_gain)` entries;
/// 0 when every weight is zero.
pub fn fractional_speed_gain(contributions: &[(f64, f64, f64)]) -> f64 {
    let (num, den) = contributions
        .iter()
        .fold((0.0, 0.0), |(num, den), &(wc, c, s)| (num + c * wc * s, den + c * wc));
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// −1 if any audit in the last `lambda_window` entries shows a count
/// mismatch, fabricated ids or a missed deadline, or if incomplete chunks
/// in the window reach `failure_threshold`.
pub fn evaluate_lambda(audit_history: &[AuditReport], policy: &SelectionPolicy) -> i8 {
    let start = audit_history.len().saturating_sub(policy.lambda_window);
    let window = &audit_history[start..];
    let incomplete: u64 = window.iter().map(|a| a.incomplete_chunks).sum();
    let flagged = window
        .iter()
        .any(|a| a.count_mismatch || a.id_fabrication || a.deadline_violations > 0);
    if flagged || incomplete >= policy.failure_threshold {
        -1
    } else {
        1
    }
}

/// Descending by score, ties by id; the input is left untouched.
pub fn find_max(assessments: &[WorkerAssessment]) -> Vec<WorkerAssessment> {
    let mut sorted = assessments.to_vec();
    sorted.sort_by(|a, b| {
        b.fractional_speed_gain
            .total_cmp(&a.fractional_speed_gain)
            .then_with(|| a.worker_id.cmp(&b.worker_id))
    });
    sorted
}

/// Builds one worker's assessment from the delegator channel.
pub fn assess_worker(ledger: &LedgerStore, worker_id: &str, policy: &SelectionPolicy) -> WorkerAssessment {
    let history = ledger.query_worker_history(Channel::Delegator, worker_id);
    if history.is_empty() {
        let provisional = match policy.cold_start {
            ColdStart::Optimistic => 1.0 + policy.optimism_margin,
            ColdStart::Strict => 0.0,
        };
        return WorkerAssessment {
            worker_id: worker_id.to_string(),
            fractional_speed_gain: provisional,
            lambda: 1,
            history_length: 0,
            contributions: Vec::new(),
        };
    }
    let contributions: Vec<Contribution> = history
        .iter()
        .map(|r| Contribution {
            iteration_id: r.iteration_id,
            wc: fractional_contribution(r.jobs_executed, r.task_jobs).unwrap_or(0.0),
            complexity: r.task_complexity,
            iteration_speed_gain: r.speed_gain,
        })
        .collect();
    let weighted: Vec<(f64, f64, f64)> = contributions
        .iter()
        .map(|c| (c.wc, c.complexity, c.iteration_speed_gain))
        .collect();
    let audits: Vec<AuditReport> = history.iter().map(|r| r.audit.clone()).collect();
    WorkerAssessment {
        worker_id: worker_id.to_string(),
        fractional_speed_gain: fractional_speed_gain(&weighted),
        lambda: evaluate_lambda(&audits, policy),
        history_length: history.len(),
        contributions,
    }
}

pub fn assess_pool(
    pool: &[String],
    ledger: &LedgerStore,
    policy: &SelectionPolicy,
) -> Result<Vec<WorkerAssessment>, SelectionError> {
    if !ledger.is_connected() {
        return Err(SelectionError::LedgerUnavailable);
    }
    Ok(pool.iter().map(|id| assess_worker(ledger, id, policy)).collect())
}

pub fn select_from(assessments: &[WorkerAssessment]) -> SelectionDecision {
    let chosen: Vec<String> = find_max(assessments)
        .into_iter()
        .filter(WorkerAssessment::passes_gate)
        .map(|a| a.worker_id)
        .collect();
    if chosen.is_empty() {
        SelectionDecision::LocalExecution
    } else {
        SelectionDecision::Selected(chosen)
    }
}

/// Every pool member passing the gate, best first.
pub fn select_workers(
    pool: &[String],
    ledger: &LedgerStore,
    policy: &SelectionPolicy,
) -> Result<SelectionDecision, SelectionError> {
    Ok(select_from(&assess_pool(pool, ledger, policy)?))
}

/// CSV columns: `worker_id,S_i,lambda,history_length`.
pub fn write_assessments_csv<W: Write>(assessments: &[WorkerAssessment], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["worker_id", "S_i", "lambda", "history_length"])?;
    for a in assessments {
        w.write_record([
            a.worker_id.clone(),
            a.fractional_speed_gain.to_string(),
            a.lambda.to_string(),
            a.history_length.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
