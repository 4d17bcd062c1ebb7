//! Discrete-event model of a shared job queue drained by a delegator and a
//! set of work-stealing workers.
//!
//! Timing per worker chunk, starting at the steal instant `t`:
//!
//! ```text
//! inbound  = Σ payload_bytes / bandwidth + latency
//! compute  = Σ compute_cost / processing_rate
//! outbound = Σ result_bytes / bandwidth + latency + injected delay
//! ```
//!
//! The worker steals again the moment its result lands. The delegator
//! drains the same queue one job at a time and its compute is never
//! blocked by transfers. Events at the same instant are handled in
//! participant order: delegator first, then workers in list order.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, VecDeque};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::adversary::apply_behavior;
use crate::error::{ConfigError, SimError};
use crate::model::{DeviceProfile, JobId, JobSpec, TaskSpec};

/// Rate used for a chunk's expected response time when checking deadlines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DeadlineReference {
    /// The delegator's own processing rate; flags devices much slower than it.
    #[default]
    Delegator,
    /// The worker's own profiled rate; flags only injected slowdowns.
    Worker,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimParams {
    /// A chunk violates its deadline when its response time exceeds
    /// `slack_factor` times the expected response.
    pub slack_factor: f64,
    pub deadline_reference: DeadlineReference,
    /// Outstanding chunks older than this are taken back and re-queued.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reclaim_timeout_s: Option<f64>,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            slack_factor: 3.0,
            deadline_reference: DeadlineReference::Delegator,
            reclaim_timeout_s: None,
        }
    }
}

impl SimParams {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.slack_factor.is_finite() && self.slack_factor >= 1.0) {
            return Err(ConfigError::invalid("sim.slack_factor", "must be ≥ 1"));
        }
        if let Some(t) = self.reclaim_timeout_s {
            if !(t.is_finite() && t > 0.0) {
                return Err(ConfigError::invalid("sim.reclaim_timeout_s", "must be > 0"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    Steal,
    TransferStart,
    TransferEnd,
    ComputeEnd,
    ResultReceived,
    Reclaim,
    ResultDiscarded,
}

impl EventKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EventKind::Steal => "steal",
            EventKind::TransferStart => "transfer-start",
            EventKind::TransferEnd => "transfer-end",
            EventKind::ComputeEnd => "compute-end",
            EventKind::ResultReceived => "result-received",
            EventKind::Reclaim => "reclaim",
            EventKind::ResultDiscarded => "result-discarded",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub time_s: f64,
    pub kind: EventKind,
    pub device_id: String,
    pub job_ids: Vec<JobId>,
}

/// What one worker did during one iteration. `jobs_claimed` and
/// `claimed_ids` are what the worker reports; everything else is ground
/// truth observed by the delegator.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct WorkerIterationStats {
    pub jobs_verified: u64,
    pub jobs_claimed: u64,
    pub assigned_ids: BTreeSet<JobId>,
    pub verified_ids: BTreeSet<JobId>,
    pub claimed_ids: BTreeSet<JobId>,
    pub chunks_stolen: u64,
    /// Chunks taken back by the delegator before their result arrived.
    pub chunks_incomplete: u64,
    pub deadline_violations: u64,
    /// Injected delay accumulated over returned chunks.
    pub total_response_delay_s: f64,
}

impl WorkerIterationStats {
    /// Truthful report: claims equal verified results.
    pub(crate) fn record_verified(&mut self, ids: &[JobId]) {
        for &id in ids {
            self.verified_ids.insert(id);
            self.claimed_ids.insert(id);
        }
        self.jobs_verified += ids.len() as u64;
        self.jobs_claimed += ids.len() as u64;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationOutcome {
    pub iteration_id: u64,
    pub time_1_s: f64,
    pub time_2_s: f64,
    pub speed_gain: f64,
    /// Jobs the delegator executed itself.
    pub delegator_jobs: u64,
    pub worker_stats: BTreeMap<String, WorkerIterationStats>,
    pub event_log: Vec<Event>,
}

impl IterationOutcome {
    pub fn total_verified(&self) -> u64 {
        self.delegator_jobs + self.worker_stats.values().map(|s| s.jobs_verified).sum::<u64>()
    }

    pub fn write_event_log_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        write_event_log_csv(&self.event_log, out)
    }
}

/// CSV columns: `timestamp_s,event_kind,device_id,job_ids` with job ids
/// space-separated.
pub fn write_event_log_csv<W: Write>(events: &[Event], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["timestamp_s", "event_kind", "device_id", "job_ids"])?;
    for e in events {
        let ids = e
            .job_ids
            .iter()
            .map(|id| id.to_string())
            .collect::<Vec<_>>()
            .join(" ");
        w.write_record([e.time_s.to_string().as_str(), e.kind.as_str(), &e.device_id, &ids])?;
    }
    w.flush()?;
    Ok(())
}

/// Time for the delegator to run the whole task alone.
pub fn simulate_local(task: &TaskSpec, delegator: &DeviceProfile) -> f64 {
    // Same per-job accumulation as the engine, so a worker-less shared run
    // reproduces this time exactly.
    task.jobs
        .iter()
        .fold(0.0, |t, j| t + j.compute_cost / delegator.processing_rate)
}

pub fn speed_gain(time_1_s: f64, time_2_s: f64) -> Result<f64, SimError> {
    if !(time_1_s > 0.0 && time_2_s > 0.0) || !time_1_s.is_finite() || !time_2_s.is_finite() {
        return Err(SimError::NonPositiveTime {
            time_1: time_1_s,
            time_2: time_2_s,
        });
    }
    Ok(time_1_s / time_2_s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Action {
    /// Participant asks the queue for work.
    Request,
    DelegatorComputeEnd,
    InboundEnd { chunk: usize },
    ComputeEnd { chunk: usize },
    ResultArrives { chunk: usize },
    ReclaimCheck { chunk: usize },
}

#[derive(Debug, Clone, Copy)]
struct Pending {
    time: f64,
    participant: usize,
    seq: u64,
    action: Action,
}

impl PartialEq for Pending {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Pending {}
impl PartialOrd for Pending {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Pending {
    // Reversed so BinaryHeap pops the earliest event first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.participant.cmp(&self.participant))
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

struct Chunk {
    jobs: Vec<usize>,
    stolen_at: f64,
    inbound_s: f64,
    compute_s: f64,
    outbound_s: f64,
    delay_s: f64,
    deadline_s: f64,
    reclaimed: bool,
}

struct Engine<'a> {
    task: &'a TaskSpec,
    delegator: &'a DeviceProfile,
    workers: &'a [DeviceProfile],
    params: &'a SimParams,
    queue: VecDeque<usize>,
    heap: BinaryHeap<Pending>,
    seq: u64,
    chunks: Vec<Chunk>,
    delegator_job: Option<usize>,
    idle: BTreeSet<usize>,
    dropped: BTreeSet<usize>,
    stats: Vec<WorkerIterationStats>,
    delegator_jobs: u64,
    verified: usize,
    log: Vec<Event>,
}

impl<'a> Engine<'a> {
    fn device_id(&self, participant: usize) -> &str {
        if participant == 0 {
            &self.delegator.device_id
        } else {
            &self.workers[participant - 1].device_id
        }
    }

    fn push(&mut self, time: f64, participant: usize, action: Action) {
        self.seq += 1;
        self.heap.push(Pending {
            time,
            participant,
            seq: self.seq,
            action,
        });
    }

    fn log(&mut self, time_s: f64, kind: EventKind, participant: usize, jobs: &[usize]) {
        let job_ids = jobs.iter().map(|&j| self.task.jobs[j].job_id).collect();
        let device_id = self.device_id(participant).to_string();
        self.log.push(Event {
            time_s,
            kind,
            device_id,
            job_ids,
        });
    }

    fn job(&self, index: usize) -> &JobSpec {
        &self.task.jobs[index]
    }

    fn request(&mut self, now: f64, participant: usize) {
        if self.queue.is_empty() {
            self.idle.insert(participant);
            return;
        }
        if participant == 0 {
            let job = self.queue.pop_front().expect("queue non-empty");
            self.log(now, EventKind::Steal, 0, &[job]);
            let done = now + self.job(job).compute_cost / self.delegator.processing_rate;
            self.delegator_job = Some(job);
            self.push(done, 0, Action::DelegatorComputeEnd);
            return;
        }

        let worker = &self.workers[participant - 1];
        let take = self.task.steal_chunk_size.min(self.queue.len());
        let jobs: Vec<usize> = self.queue.drain(..take).collect();
        let payload: u64 = jobs.iter().map(|&j| self.job(j).payload_bytes).sum();
        let results: u64 = jobs.iter().map(|&j| self.job(j).result_bytes).sum();
        let cost: f64 = jobs.iter().map(|&j| self.job(j).compute_cost).sum();

        let inbound_s = payload as f64 / worker.bandwidth_bps + worker.link_latency_s;
        let compute_s = cost / worker.processing_rate;
        let outbound_s = results as f64 / worker.bandwidth_bps + worker.link_latency_s;
        let delay_s = worker.behavior.injected_delay();
        let reference_rate = match self.params.deadline_reference {
            DeadlineReference::Delegator => self.delegator.processing_rate,
            DeadlineReference::Worker => worker.processing_rate,
        };
        let deadline_s =
            self.params.slack_factor * (inbound_s + cost / reference_rate + outbound_s);

        self.log(now, EventKind::Steal, participant, &jobs);
        self.log(now, EventKind::TransferStart, participant, &jobs);
        let stats = &mut self.stats[participant - 1];
        stats.chunks_stolen += 1;
        stats
            .assigned_ids
            .extend(jobs.iter().map(|&j| self.task.jobs[j].job_id));

        self.chunks.push(Chunk {
            jobs,
            stolen_at: now,
            inbound_s,
            compute_s,
            outbound_s,
            delay_s,
            deadline_s,
            reclaimed: false,
        });
        let chunk = self.chunks.len() - 1;
        self.push(now + inbound_s, participant, Action::InboundEnd { chunk });
        if let Some(timeout) = self.params.reclaim_timeout_s {
            self.push(now + timeout, participant, Action::ReclaimCheck { chunk });
        }
    }

    fn wake_idle(&mut self, now: f64) {
        let idle: Vec<usize> = std::mem::take(&mut self.idle).into_iter().collect();
        for participant in idle {
            if !self.dropped.contains(&participant) {
                self.push(now, participant, Action::Request);
            }
        }
    }

    fn run(mut self, start: f64) -> (f64, Self) {
        for participant in 0..=self.workers.len() {
            self.push(start, participant, Action::Request);
        }
        let total = self.task.jobs.len();
        let mut end = start;
        while let Some(Pending {
            time,
            participant,
            action,
            ..
        }) = self.heap.pop()
        {
            match action {
                Action::Request => self.request(time, participant),
                Action::DelegatorComputeEnd => {
                    let job = self.delegator_job.take().expect("delegator job in flight");
                    self.log(time, EventKind::ComputeEnd, 0, &[job]);
                    self.delegator_jobs += 1;
                    self.verified += 1;
                    end = time;
                    if self.verified == total {
                        break;
                    }
                    self.request(time, 0);
                }
                Action::InboundEnd { chunk } => {
                    let c = &self.chunks[chunk];
                    let (jobs, next) = (c.jobs.clone(), time + c.compute_s);
                    self.log(time, EventKind::TransferEnd, participant, &jobs);
                    self.push(next, participant, Action::ComputeEnd { chunk });
                }
                Action::ComputeEnd { chunk } => {
                    let c = &self.chunks[chunk];
                    let (jobs, next) = (c.jobs.clone(), time + c.outbound_s + c.delay_s);
                    self.log(time, EventKind::ComputeEnd, participant, &jobs);
                    self.log(time, EventKind::TransferStart, participant, &jobs);
                    self.push(next, participant, Action::ResultArrives { chunk });
                }
                Action::ResultArrives { chunk } => {
                    let c = &self.chunks[chunk];
                    let jobs = c.jobs.clone();
                    let response = c.inbound_s + c.compute_s + c.outbound_s + c.delay_s;
                    let (deadline, delay, reclaimed) = (c.deadline_s, c.delay_s, c.reclaimed);
                    if reclaimed {
                        self.log(time, EventKind::ResultDiscarded, participant, &jobs);
                        continue;
                    }
                    self.log(time, EventKind::TransferEnd, participant, &jobs);
                    self.log(time, EventKind::ResultReceived, participant, &jobs);
                    let ids: Vec<JobId> = jobs.iter().map(|&j| self.task.jobs[j].job_id).collect();
                    let stats = &mut self.stats[participant - 1];
                    stats.record_verified(&ids);
                    stats.total_response_delay_s += delay;
                    if response > deadline {
                        stats.deadline_violations += 1;
                    }
                    self.verified += jobs.len();
                    end = time;
                    if self.verified == total {
                        break;
                    }
                    self.request(time, participant);
                }
                Action::ReclaimCheck { chunk } => {
                    let c = &self.chunks[chunk];
                    let arrival = c.stolen_at + c.inbound_s + c.compute_s + c.outbound_s + c.delay_s;
                    // Arrivals at exactly the timeout instant still count.
                    if arrival <= time {
                        continue;
                    }
                    let jobs = c.jobs.clone();
                    self.chunks[chunk].reclaimed = true;
                    self.log(time, EventKind::Reclaim, participant, &jobs);
                    self.stats[participant - 1].chunks_incomplete += 1;
                    self.dropped.insert(participant);
                    for &j in jobs.iter().rev() {
                        self.queue.push_front(j);
                    }
                    self.wake_idle(time);
                }
            }
        }
        assert_eq!(self.verified, total, "simulation ended with unverified jobs");
        (end, self)
    }
}

/// Runs one shared iteration. `query_overhead_s` is charged once per
/// selected worker before any work starts; pass 0 for accept-all runs.
pub fn simulate_shared(
    task: &TaskSpec,
    delegator: &DeviceProfile,
    selected_workers: &[DeviceProfile],
    query_overhead_s: f64,
    params: &SimParams,
) -> IterationOutcome {
    let time_1_s = simulate_local(task, delegator);
    let start = query_overhead_s * selected_workers.len() as f64;
    let engine = Engine {
        task,
        delegator,
        workers: selected_workers,
        params,
        queue: (0..task.jobs.len()).collect(),
        heap: BinaryHeap::new(),
        seq: 0,
        chunks: Vec::new(),
        delegator_job: None,
        idle: BTreeSet::new(),
        dropped: BTreeSet::new(),
        stats: vec![WorkerIterationStats::default(); selected_workers.len()],
        delegator_jobs: 0,
        verified: 0,
        log: Vec::new(),
    };
    let (end, engine) = engine.run(start);
    let time_2_s = end;

    let worker_stats = selected_workers
        .iter()
        .zip(engine.stats)
        .map(|(w, truth)| (w.device_id.clone(), apply_behavior(&w.behavior, &truth)))
        .collect();

    IterationOutcome {
        iteration_id: 0,
        time_1_s,
        time_2_s,
        speed_gain: time_1_s / time_2_s,
        delegator_jobs: engine.delegator_jobs,
        worker_stats,
        event_log: engine.log,
    }
}
