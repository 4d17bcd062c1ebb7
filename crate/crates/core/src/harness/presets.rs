//! Named desk-scale scenarios. Device rates and link figures are free
//! parameters chosen to stand in for a phone testbed (one delegator, three
//! comparable workers and one markedly slower one); they are not
//! measurements.

use std::collections::BTreeMap;

use super::manifest::{ExperimentKind, ExperimentSpec, Manifest, PrivacySweepSpec};
use crate::error::{Error, Result};
use crate::model::{BehaviorKind, DeviceProfile, Mode, ScenarioConfig, TaskGenerator};
use crate::privacy::PrivacyParams;
use crate::selection::SelectionPolicy;
use crate::sim::SimParams;

pub const PRESET_NAMES: [&str; 4] = ["speed-gain", "malicious", "small-jobs", "privacy-tradeoff"];

pub const DEFAULT_SEED: u64 = 2024;
pub const TABLE_EPSILONS: [f64; 5] = [0.01, 0.1, 0.5, 1.0, 2.0];

const MB: u64 = 1_000_000;
const KB: u64 = 1_000;
const LINK_BPS: f64 = 20e6;
const LINK_LATENCY_S: f64 = 1.0;

fn device(id: &str, rate: f64) -> DeviceProfile {
    DeviceProfile {
        location: "lab".into(),
        ..DeviceProfile::honest(id, rate, LINK_BPS).with_latency(LINK_LATENCY_S)
    }
}

fn pool() -> (DeviceProfile, Vec<DeviceProfile>) {
    let delegator = device("pixel-0", 1.0);
    let workers = vec![
        device("pixel-1", 1.0),
        device("pixel-2", 1.0),
        device("pixel-3", 1.0),
        device("a21", 0.08),
    ];
    (delegator, workers)
}

fn scenario(generator: TaskGenerator, workers: Vec<DeviceProfile>, delegator: DeviceProfile) -> ScenarioConfig {
    ScenarioConfig {
        delegator,
        workers,
        tasks: Vec::new(),
        generator: Some(generator),
        iterations: 5,
        mode: Mode::Bdmec,
        privacy: PrivacyParams::default(),
        selection_policy: SelectionPolicy::default(),
        sim: SimParams::default(),
        ledger_query_overhead_s: 0.2,
        rng_seed: DEFAULT_SEED,
    }
}

fn large_images() -> TaskGenerator {
    TaskGenerator {
        n_jobs: 1000,
        payload_bytes: [MB, 2 * MB],
        compute_cost: [0.25, 0.5],
        steal_chunk_size: 40,
        complexity: None,
        result_bytes: 64,
    }
}

fn small_images() -> TaskGenerator {
    TaskGenerator {
        n_jobs: 4000,
        payload_bytes: [10 * KB, 700 * KB],
        compute_cost: [0.004, 0.012],
        steal_chunk_size: 40,
        complexity: None,
        result_bytes: 64,
    }
}

fn simulation(name: &str, config: ScenarioConfig) -> Manifest {
    Manifest {
        experiment: ExperimentSpec {
            name: name.to_string(),
            kind: ExperimentKind::Simulation,
            repetitions: 5,
            modes: vec![Mode::Baseline, Mode::Bdmec],
        },
        scenario: Some(config),
        privacy_sweep: None,
    }
}

pub fn preset_manifest(name: &str) -> Result<Manifest> {
    let manifest = match name {
        "speed-gain" => {
            let (d, w) = pool();
            simulation(name, scenario(large_images(), w, d))
        }
        "malicious" => {
            let (d, mut w) = pool();
            // The slow device also sits on each result for 50 s.
            w[3].behavior = BehaviorKind::DelayInjector { delay_s: 50.0 };
            simulation(name, scenario(large_images(), w, d))
        }
        "small-jobs" => {
            let (d, w) = pool();
            simulation(name, scenario(small_images(), w, d))
        }
        "privacy-tradeoff" => Manifest {
            experiment: ExperimentSpec {
                name: name.to_string(),
                kind: ExperimentKind::Privacy,
                repetitions: 1,
                modes: vec![Mode::Bdmec],
            },
            scenario: None,
            privacy_sweep: Some(PrivacySweepSpec {
                epsilons: TABLE_EPSILONS.to_vec(),
                sensitivity: 1.0,
                trials: 10_000,
                seed: DEFAULT_SEED,
                counts: BTreeMap::from([("worker-1".to_string(), 316), ("worker-2".to_string(), 217)]),
            }),
        },
        other => return Err(Error::UnknownPreset(other.to_string())),
    };
    Ok(manifest.validate()?)
}
