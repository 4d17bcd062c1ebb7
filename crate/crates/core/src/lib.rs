//! Deterministic simulation of cooperative task offloading between nearby
//! devices, with tamper-evident bookkeeping of who did what, Laplace-noised
//! public statistics and ledger-driven worker selection.
//!
//! * [`sim`] — discrete-event engine for work stealing over a shared queue.
//! * [`adversary`] — misbehaving workers and the audit that exposes them.
//! * [`ledger`] — two SHA-256 hash chains (delegator and worker channels).
//! * [`privacy`] — Laplace perturbation of job counts and its cost.
//! * [`selection`] — ranking and gating workers from ledger history.
//! * [`harness`] — seeded repetitions, presets and CSV output.

pub mod adversary;
pub mod error;
pub mod harness;
pub mod ledger;
pub mod model;
pub mod privacy;
pub mod selection;
pub mod sim;

pub use adversary::{apply_behavior, audit_claims, AuditReport};
pub use error::{ConfigError, Error, PrivacyError, Result, SelectionError, SimError};
pub use ledger::{Block, Channel, LedgerError, LedgerStore, Receipt, TransactionRecord, Violation};
pub use model::{
    derive_seed, generate_task, validate_scenario, BehaviorKind, DeviceProfile, JobId, JobSpec, Mode,
    ScenarioConfig, TaskGenerator, TaskSpec,
};
pub use privacy::{laplace_sample, perturb_count, relative_error, PrivacyParams};
pub use selection::{select_workers, ColdStart, SelectionDecision, SelectionPolicy, WorkerAssessment};
pub use sim::{
    simulate_local, simulate_shared, speed_gain, DeadlineReference, Event, EventKind, IterationOutcome, SimParams,
    WorkerIterationStats,
};
