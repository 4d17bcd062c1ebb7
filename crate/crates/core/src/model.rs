//! Domain types shared by every stage of an offloading run: jobs, tasks,
//! device profiles, adversarial behaviors and the scenario that ties them
//! together.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::privacy::PrivacyParams;
use crate::selection::SelectionPolicy;
use crate::sim::SimParams;

pub type JobId = u64;

/// Bytes returned per job when a config does not say otherwise.
pub const DEFAULT_RESULT_BYTES: u64 = 64;

fn default_result_bytes() -> u64 {
    DEFAULT_RESULT_BYTES
}

/// One unit of work: an opaque payload plus the compute it costs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobSpec {
    pub job_id: JobId,
    pub payload_bytes: u64,
    pub compute_cost: f64,
    #[serde(default = "default_result_bytes")]
    pub result_bytes: u64,
}

impl JobSpec {
    pub fn new(job_id: JobId, payload_bytes: u64, compute_cost: f64) -> Self {
        JobSpec {
            job_id,
            payload_bytes,
            compute_cost,
            result_bytes: DEFAULT_RESULT_BYTES,
        }
    }
}

/// A divisible workload. Workers take `steal_chunk_size` jobs at a time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSpec {
    pub task_id: u64,
    pub jobs: Vec<JobSpec>,
    pub steal_chunk_size: usize,
    /// Task-level weight; `None` means the mean per-job compute cost.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub complexity: Option<f64>,
}

impl TaskSpec {
    pub fn new(task_id: u64, jobs: Vec<JobSpec>, steal_chunk_size: usize) -> Self {
        TaskSpec {
            task_id,
            jobs,
            steal_chunk_size,
            complexity: None,
        }
    }

    pub fn total_compute(&self) -> f64 {
        self.jobs.iter().map(|j| j.compute_cost).sum()
    }

    pub fn complexity(&self) -> f64 {
        match self.complexity {
            Some(c) => c,
            None if self.jobs.is_empty() => 0.0,
            None => self.total_compute() / self.jobs.len() as f64,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.jobs.is_empty() {
            return Err(ConfigError::invalid("jobs", "must be non-empty"));
        }
        if self.steal_chunk_size == 0 {
            return Err(ConfigError::invalid("steal_chunk_size", "must be ≥ 1"));
        }
        let mut seen = HashSet::with_capacity(self.jobs.len());
        for job in &self.jobs {
            if !seen.insert(job.job_id) {
                return Err(ConfigError::invalid(
                    "job_id",
                    format!("duplicate id {} in task {}", job.job_id, self.task_id),
                ));
            }
            if !(job.compute_cost.is_finite() && job.compute_cost > 0.0) {
                return Err(ConfigError::invalid(
                    "compute_cost",
                    format!("must be > 0 (job {})", job.job_id),
                ));
            }
        }
        if let Some(c) = self.complexity {
            if !(c.is_finite() && c > 0.0) {
                return Err(ConfigError::invalid("complexity", "must be > 0"));
            }
        }
        Ok(())
    }
}

/// How a device (mis)behaves when it works for a delegator.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BehaviorKind {
    #[default]
    Honest,
    /// Holds every result for `delay_s` seconds before sending it.
    DelayInjector { delay_s: f64 },
    /// Reports `extra_jobs` more completions than it produced.
    CountInflator { extra_jobs: u64 },
    /// Reports `fabricated_ids` job ids it was never assigned.
    IdFabricator { fabricated_ids: u64 },
}

impl BehaviorKind {
    pub fn is_honest(&self) -> bool {
        matches!(self, BehaviorKind::Honest)
    }

    pub fn injected_delay(&self) -> f64 {
        match self {
            BehaviorKind::DelayInjector { delay_s } => *delay_s,
            _ => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceProfile {
    pub device_id: String,
    /// Work units per second.
    pub processing_rate: f64,
    /// Bytes per second, same in both directions.
    pub bandwidth_bps: f64,
    /// One-way latency charged per message.
    #[serde(default)]
    pub link_latency_s: f64,
    #[serde(default)]
    pub behavior: BehaviorKind,
    /// Opaque tag copied onto ledger records.
    #[serde(default)]
    pub location: String,
}

impl DeviceProfile {
    pub fn honest(id: impl Into<String>, processing_rate: f64, bandwidth_bps: f64) -> Self {
        DeviceProfile {
            device_id: id.into(),
            processing_rate,
            bandwidth_bps,
            link_latency_s: 0.0,
            behavior: BehaviorKind::Honest,
            location: String::new(),
        }
    }

    pub fn with_behavior(mut self, behavior: BehaviorKind) -> Self {
        self.behavior = behavior;
        self
    }

    pub fn with_latency(mut self, latency_s: f64) -> Self {
        self.link_latency_s = latency_s;
        self
    }

    pub fn validate(&self, field: &str) -> Result<(), ConfigError> {
        let field = |name: &str| format!("{field}.{name}");
        if self.device_id.is_empty() {
            return Err(ConfigError::invalid(field("device_id"), "must be non-empty"));
        }
        if !(self.processing_rate.is_finite() && self.processing_rate > 0.0) {
            return Err(ConfigError::invalid(field("processing_rate"), "must be > 0"));
        }
        if !(self.bandwidth_bps.is_finite() && self.bandwidth_bps > 0.0) {
            return Err(ConfigError::invalid(field("bandwidth_bps"), "must be > 0"));
        }
        if !(self.link_latency_s.is_finite() && self.link_latency_s >= 0.0) {
            return Err(ConfigError::invalid(field("link_latency_s"), "must be ≥ 0"));
        }
        match self.behavior {
            BehaviorKind::DelayInjector { delay_s } if !(delay_s.is_finite() && delay_s > 0.0) => {
                Err(ConfigError::invalid(field("behavior.delay_s"), "must be > 0"))
            }
            BehaviorKind::CountInflator { extra_jobs: 0 } => {
                Err(ConfigError::invalid(field("behavior.extra_jobs"), "must be ≥ 1"))
            }
            BehaviorKind::IdFabricator { fabricated_ids: 0 } => Err(ConfigError::invalid(
                field("behavior.fabricated_ids"),
                "must be ≥ 1",
            )),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Accept every worker; no ledger.
    Baseline,
    /// History-based selection plus ledger writes.
    Bdmec,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Baseline => "baseline",
            Mode::Bdmec => "bdmec",
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Recipe for drawing a fresh synthetic task per (seed, iteration).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskGenerator {
    pub n_jobs: usize,
    pub payload_bytes: [u64; 2],
    pub compute_cost: [f64; 2],
    pub steal_chunk_size: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub complexity: Option<f64>,
    #[serde(default = "default_result_bytes")]
    pub result_bytes: u64,
}

impl TaskGenerator {
    pub fn generate(&self, task_id: u64, seed: u64) -> Result<TaskSpec, ConfigError> {
        let mut task = generate_task(
            self.n_jobs,
            (self.payload_bytes[0], self.payload_bytes[1]),
            (self.compute_cost[0], self.compute_cost[1]),
            self.steal_chunk_size,
            self.complexity,
            seed,
        )?;
        task.task_id = task_id;
        for job in &mut task.jobs {
            job.result_bytes = self.result_bytes;
        }
        Ok(task)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub delegator: DeviceProfile,
    pub workers: Vec<DeviceProfile>,
    /// Explicit tasks, used cyclically across iterations.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tasks: Vec<TaskSpec>,
    /// When present, replaces `tasks` with one generated task per iteration.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<TaskGenerator>,
    pub iterations: usize,
    pub mode: Mode,
    #[serde(default)]
    pub privacy: PrivacyParams,
    #[serde(default)]
    pub selection_policy: SelectionPolicy,
    #[serde(default)]
    pub sim: SimParams,
    #[serde(default)]
    pub ledger_query_overhead_s: f64,
    #[serde(default)]
    pub rng_seed: u64,
}

impl ScenarioConfig {
    /// Task for `iteration` (0-based) under repetition seed `seed`.
    pub fn task_for(&self, iteration: usize, seed: u64) -> Result<TaskSpec, ConfigError> {
        match &self.generator {
            Some(generator) => {
                let task = generator.generate(iteration as u64, derive_seed(seed, iteration as u64))?;
                task.validate()?;
                Ok(task)
            }
            None => {
                if self.tasks.is_empty() {
                    return Err(ConfigError::invalid("tasks", "must be non-empty"));
                }
                Ok(self.tasks[iteration % self.tasks.len()].clone())
            }
        }
    }
}

/// Checks every invariant of the scenario and fills derived defaults
/// (task complexity). Valid input comes back unchanged apart from those
/// defaults, so the operation is idempotent.
pub fn validate_scenario(config: ScenarioConfig) -> Result<ScenarioConfig, ConfigError> {
    let mut config = config;
    config.delegator.validate("delegator")?;
    if config.workers.is_empty() {
        return Err(ConfigError::invalid("workers", "must be non-empty"));
    }
    let mut ids = HashSet::new();
    ids.insert(config.delegator.device_id.clone());
    for (i, worker) in config.workers.iter().enumerate() {
        worker.validate(&format!("workers[{i}]"))?;
        if !ids.insert(worker.device_id.clone()) {
            return Err(ConfigError::invalid("workers", "duplicate id"));
        }
    }
    if config.iterations == 0 {
        return Err(ConfigError::invalid("iterations", "must be ≥ 1"));
    }
    match &config.generator {
        Some(g) => {
            if g.n_jobs == 0 {
                return Err(ConfigError::invalid("generator.n_jobs", "must be ≥ 1"));
            }
            if g.steal_chunk_size == 0 {
                return Err(ConfigError::invalid("steal_chunk_size", "must be ≥ 1"));
            }
            check_range("generator.payload_bytes", g.payload_bytes[0] as f64, g.payload_bytes[1] as f64)?;
            check_range("generator.compute_cost", g.compute_cost[0], g.compute_cost[1])?;
            if g.compute_cost[0] <= 0.0 {
                return Err(ConfigError::invalid("generator.compute_cost", "must be > 0"));
            }
            if let Some(c) = g.complexity {
                if !(c.is_finite() && c > 0.0) {
                    return Err(ConfigError::invalid("complexity", "must be > 0"));
                }
            }
        }
        None => {
            if config.tasks.is_empty() {
                return Err(ConfigError::invalid("tasks", "must be non-empty"));
            }
        }
    }
    let mut task_ids = HashSet::new();
    for task in &mut config.tasks {
        task.validate()?;
        if !task_ids.insert(task.task_id) {
            return Err(ConfigError::invalid("tasks", "duplicate task_id"));
        }
        if task.complexity.is_none() {
            task.complexity = Some(task.complexity());
        }
    }
    config.privacy.validate()?;
    config.selection_policy.validate()?;
    config.sim.validate()?;
    if !(config.ledger_query_overhead_s.is_finite() && config.ledger_query_overhead_s >= 0.0) {
        return Err(ConfigError::invalid("ledger_query_overhead_s", "must be ≥ 0"));
    }
    Ok(config)
}

fn check_range(field: &str, lower: f64, upper: f64) -> Result<(), ConfigError> {
    if !(lower.is_finite() && upper.is_finite()) || lower > upper {
        return Err(ConfigError::InvalidRange {
            field: field.to_string(),
            lower,
            upper,
        });
    }
    Ok(())
}

/// Draws `n_jobs` jobs with uniform payloads and compute costs. The
/// result depends only on the arguments.
pub fn generate_task(
    n_jobs: usize,
    payload_bytes: (u64, u64),
    compute_cost: (f64, f64),
    chunk: usize,
    complexity: Option<f64>,
    seed: u64,
) -> Result<TaskSpec, ConfigError> {
    if n_jobs == 0 {
        return Err(ConfigError::invalid("n_jobs", "must be ≥ 1"));
    }
    if chunk == 0 {
        return Err(ConfigError::invalid("steal_chunk_size", "must be ≥ 1"));
    }
    if payload_bytes.0 > payload_bytes.1 {
        return Err(ConfigError::InvalidRange {
            field: "payload_bytes".into(),
            lower: payload_bytes.0 as f64,
            upper: payload_bytes.1 as f64,
        });
    }
    check_range("compute_cost", compute_cost.0, compute_cost.1)?;
    if compute_cost.0 <= 0.0 {
        return Err(ConfigError::InvalidRange {
            field: "compute_cost".into(),
            lower: compute_cost.0,
            upper: compute_cost.1,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jobs = (0..n_jobs as u64)
        .map(|job_id| {
            let payload = rng.gen_range(payload_bytes.0..=payload_bytes.1);
            let cost = if compute_cost.0 == compute_cost.1 {
                compute_cost.0
            } else {
                rng.gen_range(compute_cost.0..compute_cost.1)
            };
            JobSpec::new(job_id, payload, cost)
        })
        .collect();
    let mut task = TaskSpec::new(0, jobs, chunk);
    task.complexity = Some(complexity.unwrap_or_else(|| task.complexity()));
    Ok(task)
}

/// splitmix64 over (base, stream); used to give every repetition and
/// iteration its own independent seed.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base
        .wrapping_add(stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn sample_config() -> ScenarioConfig {
        let task = TaskSpec::new(
            1,
            (0..10).map(|i| JobSpec::new(i, 100, 1.0)).collect(),
            2,
        );
        ScenarioConfig {
            delegator: DeviceProfile::honest("d", 1.0, 1e6),
            workers: (1..=4)
                .map(|i| DeviceProfile::honest(format!("w{i}"), 1.0, 1e6))
                .collect(),
            tasks: vec![task],
            generator: None,
            iterations: 3,
            mode: Mode::Bdmec,
            privacy: PrivacyParams::default(),
            selection_policy: SelectionPolicy::default(),
            sim: SimParams::default(),
            ledger_query_overhead_s: 0.2,
            rng_seed: 7,
        }
    }

    #[test]
    fn valid_config_round_trips() {
        let mut cfg = sample_config();
        cfg.tasks[0].complexity = Some(1.0);
        let out = validate_scenario(cfg.clone()).unwrap();
        assert_eq!(out, cfg);
    }

    #[test]
    fn validation_is_idempotent() {
        let once = validate_scenario(sample_config()).unwrap();
        let twice = validate_scenario(once.clone()).unwrap();
        assert_eq!(once, twice);
        assert_eq!(once.tasks[0].complexity, Some(1.0));
    }

    #[test]
    fn zero_chunk_rejected() {
        let mut cfg = sample_config();
        cfg.tasks[0].steal_chunk_size = 0;
        assert_eq!(
            validate_scenario(cfg).unwrap_err(),
            ConfigError::invalid("steal_chunk_size", "must be ≥ 1")
        );
    }

    #[test]
    fn duplicate_worker_rejected() {
        let mut cfg = sample_config();
        cfg.workers[1].device_id = "w1".into();
        assert_eq!(
            validate_scenario(cfg).unwrap_err(),
            ConfigError::invalid("workers", "duplicate id")
        );
    }

    #[test]
    fn empty_pool_and_zero_iterations_rejected() {
        let mut cfg = sample_config();
        cfg.workers.clear();
        assert!(validate_scenario(cfg).is_err());
        let mut cfg = sample_config();
        cfg.iterations = 0;
        assert!(validate_scenario(cfg).is_err());
    }

    #[test]
    fn bad_costs_and_rates_rejected() {
        let mut cfg = sample_config();
        cfg.tasks[0].jobs[3].compute_cost = 0.0;
        assert!(validate_scenario(cfg).is_err());
        let mut cfg = sample_config();
        cfg.workers[0].processing_rate = -1.0;
        assert!(validate_scenario(cfg).is_err());
        let mut cfg = sample_config();
        cfg.workers[0].behavior = BehaviorKind::DelayInjector { delay_s: 0.0 };
        assert!(validate_scenario(cfg).is_err());
        let mut cfg = sample_config();
        cfg.tasks[0].jobs[1].job_id = 0;
        assert!(validate_scenario(cfg).is_err());
    }

    #[test]
    fn generated_task_matches_request() {
        let task = generate_task(1000, (1_000_000, 2_000_000), (0.5, 1.0), 40, None, 3).unwrap();
        assert_eq!(task.jobs.len(), 1000);
        assert_eq!(task.steal_chunk_size, 40);
        for (i, job) in task.jobs.iter().enumerate() {
            assert_eq!(job.job_id, i as u64);
            assert!((1_000_000..=2_000_000).contains(&job.payload_bytes));
            assert!((0.5..1.0).contains(&job.compute_cost));
        }
        let mean = task.total_compute() / 1000.0;
        assert_eq!(task.complexity, Some(mean));
    }

    #[test]
    fn degenerate_range_is_exact() {
        let task = generate_task(1, (4096, 4096), (2.0, 2.0), 1, Some(3.0), 0).unwrap();
        assert_eq!(task.jobs[0].payload_bytes, 4096);
        assert_eq!(task.jobs[0].compute_cost, 2.0);
        assert_eq!(task.complexity, Some(3.0));
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate_task(200, (10, 700_000), (0.1, 0.4), 40, None, 99).unwrap();
        let b = generate_task(200, (10, 700_000), (0.1, 0.4), 40, None, 99).unwrap();
        assert_eq!(format!("{a:?}"), format!("{b:?}"));
        let c = generate_task(200, (10, 700_000), (0.1, 0.4), 40, None, 100).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn inverted_ranges_rejected() {
        assert!(matches!(
            generate_task(5, (10, 1), (1.0, 2.0), 1, None, 0),
            Err(ConfigError::InvalidRange { .. })
        ));
        assert!(matches!(
            generate_task(5, (1, 10), (2.0, 1.0), 1, None, 0),
            Err(ConfigError::InvalidRange { .. })
        ));
    }

    #[test]
    fn derived_seeds_differ_per_stream() {
        let seeds: HashSet<u64> = (0..64).map(|s| derive_seed(42, s)).collect();
        assert_eq!(seeds.len(), 64);
    }
}
