//! Experiment runner: repeats a scenario under consecutive seeds, writes
//! both ledger channels in selection mode, and emits CSV summaries plus a
//! manifest that reproduces the run.

pub mod manifest;
pub mod presets;
pub mod stats;

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::adversary::{audit_claims, AuditReport};
use crate::error::Result;
use crate::ledger::{Channel, LedgerStore, TransactionRecord};
use crate::model::{derive_seed, DeviceProfile, Mode, ScenarioConfig, TaskSpec};
use crate::privacy::{perturb_count, privacy_sweep, write_privacy_csv, PrivacyRow};
use crate::selection::{assess_pool, evaluate_lambda, select_from, write_assessments_csv, WorkerAssessment};
use crate::sim::{simulate_shared, IterationOutcome};

pub use manifest::{load_manifest, ExperimentKind, Manifest};
pub use presets::{preset_manifest, PRESET_NAMES};
pub use stats::summarize;

/// Stream id reserved for ledger noise, distinct from iteration streams.
const NOISE_STREAM: u64 = 1 << 40;

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub mode: Mode,
    pub seed: u64,
    pub iteration: u64,
    pub speed_gain: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub mode: Mode,
    /// `None` summarizes every iteration of the mode.
    pub iteration: Option<u64>,
    pub n: usize,
    pub mean: f64,
    pub ci95_halfwidth: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub scenario: String,
    pub repetitions: Vec<ResultRow>,
    pub summary: Vec<SummaryRow>,
    /// Percentage change of the selection-mode mean over the accept-all
    /// mean, when both modes ran.
    pub uplift_percent: Option<f64>,
}

impl ExperimentResult {
    pub fn mean(&self, mode: Mode) -> Option<f64> {
        self.summary
            .iter()
            .find(|s| s.mode == mode && s.iteration.is_none())
            .map(|s| s.mean)
    }
}

/// Everything one repetition produced.
#[derive(Debug, Clone)]
pub struct RepetitionTrace {
    pub mode: Mode,
    pub seed: u64,
    pub outcomes: Vec<IterationOutcome>,
    /// Workers used in each iteration, in the order handed to the engine.
    pub selections: Vec<Vec<String>>,
    /// Present in selection mode only.
    pub ledger: Option<LedgerStore>,
    pub final_assessments: Vec<WorkerAssessment>,
}

fn record_for(
    worker: &DeviceProfile,
    outcome: &IterationOutcome,
    task: &TaskSpec,
    jobs_executed: u64,
    lambda: i8,
    timestamp: u64,
    audit: &AuditReport,
) -> TransactionRecord {
    TransactionRecord {
        iteration_id: outcome.iteration_id,
        task_id: task.task_id,
        worker_id: worker.device_id.clone(),
        jobs_executed,
        task_jobs: task.jobs.len() as u64,
        speed_gain: outcome.speed_gain,
        steal_chunk_size: task.steal_chunk_size as u64,
        location: worker.location.clone(),
        lambda,
        task_complexity: task.complexity(),
        timestamp,
        audit: audit.clone(),
    }
}

/// Runs every iteration of `config` once under `seed`.
pub fn run_repetition(config: &ScenarioConfig, seed: u64) -> Result<RepetitionTrace> {
    let pool: Vec<String> = config.workers.iter().map(|w| w.device_id.clone()).collect();
    let mut ledger = (config.mode == Mode::Bdmec).then(LedgerStore::new);
    let mut noise_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, NOISE_STREAM));
    let mut clock = 0u64;
    let mut outcomes = Vec::with_capacity(config.iterations);
    let mut selections = Vec::with_capacity(config.iterations);

    for i in 0..config.iterations {
        let task = config.task_for(i, seed)?;
        let (selected, overhead): (Vec<&DeviceProfile>, f64) = match &ledger {
            None => (config.workers.iter().collect(), 0.0),
            Some(store) => {
                let decision = select_from(&assess_pool(&pool, store, &config.selection_policy)?);
                let chosen = decision
                    .selected()
                    .iter()
                    .map(|id| config.workers.iter().find(|w| &w.device_id == id).expect("pool member"))
                    .collect();
                (chosen, config.ledger_query_overhead_s)
            }
        };
        let profiles: Vec<DeviceProfile> = selected.iter().map(|&w| w.clone()).collect();
        let mut outcome = simulate_shared(&task, &config.delegator, &profiles, overhead, &config.sim);
        outcome.iteration_id = i as u64 + 1;

        if let Some(store) = ledger.as_mut() {
            // Pool order keeps ledger layout independent of ranking.
            for worker in config.workers.iter().filter(|w| outcome.worker_stats.contains_key(&w.device_id)) {
                let stats = &outcome.worker_stats[&worker.device_id];
                let audit = audit_claims(&worker.device_id, &stats.assigned_ids, stats);
                let mut audits: Vec<AuditReport> = store
                    .query_worker_history(Channel::Delegator, &worker.device_id)
                    .into_iter()
                    .map(|r| r.audit.clone())
                    .collect();
                audits.push(audit.clone());
                let lambda = evaluate_lambda(&audits, &config.selection_policy);
                let noised = perturb_count(stats.jobs_verified, &config.privacy, &mut noise_rng);
                for (channel, jobs) in [(Channel::Delegator, stats.jobs_verified), (Channel::Worker, noised)] {
                    clock += 1;
                    let record = record_for(worker, &outcome, &task, jobs, lambda, clock, &audit);
                    store.append_transaction(channel, record)?;
                }
            }
        }
        selections.push(profiles.into_iter().map(|w| w.device_id).collect());
        outcomes.push(outcome);
    }

    let final_assessments = match &ledger {
        Some(store) => assess_pool(&pool, store, &config.selection_policy)?,
        None => Vec::new(),
    };
    Ok(RepetitionTrace {
        mode: config.mode,
        seed,
        outcomes,
        selections,
        ledger,
        final_assessments,
    })
}

/// Runs `repetitions` independent repetitions (seed = rng_seed + r) in
/// parallel and merges them in repetition order.
pub fn run_traced(config: &ScenarioConfig, repetitions: usize) -> Result<Vec<RepetitionTrace>> {
    let results: Vec<Result<RepetitionTrace>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..repetitions as u64)
            .map(|r| scope.spawn(move || run_repetition(config, config.rng_seed.wrapping_add(r))))
            .collect();
        handles.into_iter().map(|h| h.join().expect("repetition panicked")).collect()
    });
    results.into_iter().collect()
}

fn rows_from(traces: &[RepetitionTrace]) -> Vec<ResultRow> {
    traces
        .iter()
        .flat_map(|t| {
            t.outcomes.iter().map(move |o| ResultRow {
                mode: t.mode,
                seed: t.seed,
                iteration: o.iteration_id,
                speed_gain: o.speed_gain,
            })
        })
        .collect()
}

fn summary_for(rows: &[ResultRow], modes: &[Mode]) -> Result<Vec<SummaryRow>> {
    let mut out = Vec::new();
    for &mode in modes {
        let of_mode: Vec<&ResultRow> = rows.iter().filter(|r| r.mode == mode).collect();
        let mut iterations: Vec<u64> = of_mode.iter().map(|r| r.iteration).collect();
        iterations.sort_unstable();
        iterations.dedup();
        let groups = iterations
            .into_iter()
            .map(Some)
            .chain(std::iter::once(None));
        for iteration in groups {
            let gains: Vec<f64> = of_mode
                .iter()
                .filter(|r| iteration.is_none_or(|i| r.iteration == i))
                .map(|r| r.speed_gain)
                .collect();
            let (mean, ci95_halfwidth) = if gains.len() >= 2 {
                summarize(&gains)?
            } else {
                (gains.iter().sum::<f64>() / gains.len().max(1) as f64, f64::NAN)
            };
            out.push(SummaryRow {
                mode,
                iteration,
                n: gains.len(),
                mean,
                ci95_halfwidth,
            });
        }
    }
    Ok(out)
}

fn assemble(scenario: &str, rows: Vec<ResultRow>, modes: &[Mode]) -> Result<ExperimentResult> {
    let summary = summary_for(&rows, modes)?;
    let mean = |m: Mode| summary.iter().find(|s| s.mode == m && s.iteration.is_none()).map(|s| s.mean);
    let uplift_percent = match (mean(Mode::Baseline), mean(Mode::Bdmec)) {
        (Some(base), Some(sel)) => Some((sel - base) / base * 100.0),
        _ => None,
    };
    Ok(ExperimentResult {
        scenario: scenario.to_string(),
        repetitions: rows,
        summary,
        uplift_percent,
    })
}

/// Runs the scenario in its configured mode.
pub fn run_scenario(config: &ScenarioConfig, repetitions: usize) -> Result<ExperimentResult> {
    let traces = run_traced(config, repetitions)?;
    assemble("scenario", rows_from(&traces), &[config.mode])
}

/// Runs the same scenario once per mode and combines the results.
pub fn run_modes(
    name: &str,
    config: &ScenarioConfig,
    modes: &[Mode],
    repetitions: usize,
) -> Result<(ExperimentResult, Vec<RepetitionTrace>)> {
    let mut traces = Vec::new();
    for &mode in modes {
        let mut c = config.clone();
        c.mode = mode;
        traces.extend(run_traced(&c, repetitions)?);
    }
    let result = assemble(name, rows_from(&traces), modes)?;
    Ok((result, traces))
}

/// Overrides accepted on top of a preset.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub repetitions: Option<usize>,
    pub iterations: Option<usize>,
    pub trials: Option<u64>,
    pub epsilons: Option<Vec<f64>>,
}

impl Overrides {
    pub fn apply(&self, mut manifest: Manifest) -> Result<Manifest> {
        if let Some(r) = self.repetitions {
            manifest.experiment.repetitions = r;
        }
        if let Some(s) = manifest.scenario.as_mut() {
            if let Some(seed) = self.seed {
                s.rng_seed = seed;
            }
            if let Some(i) = self.iterations {
                s.iterations = i;
            }
        }
        if let Some(p) = manifest.privacy_sweep.as_mut() {
            if let Some(seed) = self.seed {
                p.seed = seed;
            }
            if let Some(t) = self.trials {
                p.trials = t;
            }
            if let Some(e) = &self.epsilons {
                p.epsilons = e.clone();
            }
        }
        Ok(manifest.validate()?)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct OutputOptions {
    /// Also write one event-log CSV per (mode, seed, iteration).
    pub event_logs: bool,
}

/// What `run_manifest` produced.
#[derive(Debug, Clone)]
pub enum RunReport {
    Simulation {
        result: ExperimentResult,
        files: Vec<PathBuf>,
    },
    Privacy {
        rows: Vec<PrivacyRow>,
        files: Vec<PathBuf>,
    },
}

impl RunReport {
    pub fn files(&self) -> &[PathBuf] {
        match self {
            RunReport::Simulation { files, .. } | RunReport::Privacy { files, .. } => files,
        }
    }
}

fn fmt_f64(v: f64) -> String {
    v.to_string()
}

pub fn write_results_csv(result: &ExperimentResult, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["scenario", "mode", "seed", "iteration", "speed_gain"])?;
    for r in &result.repetitions {
        w.write_record([
            result.scenario.clone(),
            r.mode.to_string(),
            r.seed.to_string(),
            r.iteration.to_string(),
            fmt_f64(r.speed_gain),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary_csv(result: &ExperimentResult, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["scenario", "mode", "iteration", "n", "mean", "ci95_halfwidth"])?;
    for s in &result.summary {
        w.write_record([
            result.scenario.clone(),
            s.mode.to_string(),
            s.iteration.map_or_else(|| "all".to_string(), |i| i.to_string()),
            s.n.to_string(),
            fmt_f64(s.mean),
            fmt_f64(s.ci95_halfwidth),
        ])?;
    }
    if let Some(u) = result.uplift_percent {
        w.write_record([
            result.scenario.clone(),
            "uplift_percent".to_string(),
            "all".to_string(),
            result.repetitions.len().to_string(),
            fmt_f64(u),
            String::new(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Runs a manifest and writes its outputs into `out_dir`.
pub fn run_manifest(manifest: &Manifest, out_dir: &Path, options: OutputOptions) -> Result<RunReport> {
    let manifest = manifest.clone().validate()?;
    fs::create_dir_all(out_dir)?;
    let mut files = Vec::new();
    let manifest_path = out_dir.join("manifest.toml");
    fs::write(&manifest_path, manifest.to_toml()?)?;
    files.push(manifest_path);

    match manifest.experiment.kind {
        ExperimentKind::Privacy => {
            let sweep = manifest.privacy_sweep.as_ref().expect("validated");
            let rows = privacy_sweep(&sweep.counts, &sweep.epsilons, sweep.sensitivity, sweep.trials, sweep.seed)?;
            let path = out_dir.join("privacy.csv");
            write_privacy_csv(&rows, BufWriter::new(File::create(&path)?))?;
            files.push(path);
            Ok(RunReport::Privacy { rows, files })
        }
        ExperimentKind::Simulation => {
            let config = manifest.scenario.as_ref().expect("validated");
            let (result, traces) = run_modes(
                &manifest.experiment.name,
                config,
                &manifest.experiment.modes,
                manifest.experiment.repetitions,
            )?;
            let path = out_dir.join("results.csv");
            write_results_csv(&result, &path)?;
            files.push(path);
            let path = out_dir.join("summary.csv");
            write_summary_csv(&result, &path)?;
            files.push(path);

            for trace in traces.iter().filter(|t| t.ledger.is_some()) {
                let ledger = trace.ledger.as_ref().expect("filtered");
                let path = out_dir.join(format!("ledger_seed{}.tsv", trace.seed));
                ledger.export(BufWriter::new(File::create(&path)?))?;
                files.push(path);
                let path = out_dir.join(format!("assessments_seed{}.csv", trace.seed));
                write_assessments_csv(&trace.final_assessments, BufWriter::new(File::create(&path)?))?;
                files.push(path);
            }
            if options.event_logs {
                let dir = out_dir.join("events");
                fs::create_dir_all(&dir)?;
                for trace in &traces {
                    for o in &trace.outcomes {
                        let path = dir.join(format!("{}_seed{}_iter{}.csv", trace.mode, trace.seed, o.iteration_id));
                        o.write_event_log_csv(BufWriter::new(File::create(&path)?))?;
                        files.push(path);
                    }
                }
            }
            Ok(RunReport::Simulation { result, files })
        }
    }
}

/// Resolves a named preset, applies overrides and runs it.
pub fn run_preset(name: &str, overrides: &Overrides, out_dir: &Path, options: OutputOptions) -> Result<RunReport> {
    let manifest = overrides.apply(preset_manifest(name)?)?;
    run_manifest(&manifest, out_dir, options)
}
