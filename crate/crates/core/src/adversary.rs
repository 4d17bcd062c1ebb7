//! Dishonest-worker behaviors and the delegator-side audit that catches them.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::model::{BehaviorKind, JobId};
use crate::sim::WorkerIterationStats;

/// Evidence from auditing one worker's claims for one iteration.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AuditReport {
    pub device_id: String,
    pub count_mismatch: bool,
    pub id_fabrication: bool,
    pub incomplete_chunks: u64,
    pub deadline_violations: u64,
}

impl AuditReport {
    pub fn is_clear(&self) -> bool {
        !self.count_mismatch
            && !self.id_fabrication
            && self.incomplete_chunks == 0
            && self.deadline_violations == 0
    }
}

/// Rewrites the worker's report according to its behavior. Verified
/// counts and ids are never touched.
pub fn apply_behavior(behavior: &BehaviorKind, true_stats: &WorkerIterationStats) -> WorkerIterationStats {
    let mut out = true_stats.clone();
    match *behavior {
        BehaviorKind::Honest | BehaviorKind::DelayInjector { .. } => {}
        BehaviorKind::CountInflator { extra_jobs } => out.jobs_claimed += extra_jobs,
        BehaviorKind::IdFabricator { fabricated_ids } => {
            let base = out.assigned_ids.iter().next_back().map_or(0, |&m| m + 1);
            out.claimed_ids.extend((0..fabricated_ids).map(|k| base + k));
        }
    }
    out
}

pub fn audit_claims(
    device_id: &str,
    assigned_ids: &BTreeSet<JobId>,
    stats: &WorkerIterationStats,
) -> AuditReport {
    AuditReport {
        device_id: device_id.to_string(),
        count_mismatch: stats.jobs_claimed != stats.jobs_verified,
        id_fabrication: !stats.claimed_ids.is_subset(assigned_ids),
        incomplete_chunks: stats.chunks_incomplete,
        deadline_violations: stats.deadline_violations,
    }
}
