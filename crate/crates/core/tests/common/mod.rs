//! Independent reference schedule for small instances: repeatedly hand the
//! next jobs to whichever participant frees up first (ties: delegator, then
//! workers in order). No event queue is involved.

use bdmec_core::{simulate_shared, BehaviorKind, DeviceProfile, JobSpec, SimParams, TaskSpec};

/// Completion time of the whole task, computed without any event queue.
pub fn enumerate(task: &TaskSpec, delegator: &DeviceProfile, workers: &[DeviceProfile], start: f64) -> f64 {
    let mut next_job = 0usize;
    let n = task.jobs.len();
    // free[0] is the delegator; free[k] is worker k-1.
    let mut free = vec![start; workers.len() + 1];
    let mut finish = start;
    while next_job < n {
        let (who, &now) = free
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.partial_cmp(b.1).unwrap().then(a.0.cmp(&b.0)))
            .unwrap();
        if who == 0 {
            let job = &task.jobs[next_job];
            next_job += 1;
            free[0] = now + job.compute_cost / delegator.processing_rate;
            finish = finish.max(free[0]);
            continue;
        }
        let w = &workers[who - 1];
        let end = (next_job + task.steal_chunk_size).min(n);
        let chunk = &task.jobs[next_job..end];
        next_job = end;
        let payload: u64 = chunk.iter().map(|j| j.payload_bytes).sum();
        let results: u64 = chunk.iter().map(|j| j.result_bytes).sum();
        let cost: f64 = chunk.iter().map(|j| j.compute_cost).sum();
        let arrive = now
            + (payload as f64 / w.bandwidth_bps + w.link_latency_s)
            + cost / w.processing_rate
            + (results as f64 / w.bandwidth_bps + w.link_latency_s + w.behavior.injected_delay());
        free[who] = arrive;
        finish = finish.max(arrive);
    }
    finish
}

pub fn task(n: usize, chunk: usize, tied: bool) -> TaskSpec {
    let jobs = (0..n as u64)
        .map(|i| {
            if tied {
                let mut j = JobSpec::new(i, 0, 1.0);
                j.result_bytes = 0;
                j
            } else {
                let mut j = JobSpec::new(i, (i * 1000) % 3000, 0.5 + ((i * 7) % 5) as f64 * 0.3);
                j.result_bytes = 10 + i;
                j
            }
        })
        .collect();
    TaskSpec::new(0, jobs, chunk)
}

pub fn profiles(tied: bool) -> Vec<DeviceProfile> {
    if tied {
        return vec![
            DeviceProfile::honest("t1", 1.0, 1e6),
            DeviceProfile::honest("t2", 2.0, 1e6),
            DeviceProfile::honest("t3", 0.5, 1e6),
            DeviceProfile::honest("t4", 1.0, 1e6).with_behavior(BehaviorKind::DelayInjector { delay_s: 1.0 }),
        ];
    }
    vec![
        DeviceProfile::honest("a", 1.0, 1e4).with_latency(0.1),
        DeviceProfile::honest("b", 2.5, 5e3),
        DeviceProfile::honest("c", 0.4, 1e5).with_latency(0.3),
        DeviceProfile::honest("d", 1.0, 1e4).with_behavior(BehaviorKind::DelayInjector { delay_s: 1.5 }),
    ]
}

pub fn worker_sets(pool: &[DeviceProfile]) -> Vec<Vec<DeviceProfile>> {
    let mut sets = vec![Vec::new()];
    for a in pool {
        sets.push(vec![a.clone()]);
        for b in pool {
            let mut b = b.clone();
            b.device_id.push('\'');
            sets.push(vec![a.clone(), b]);
        }
    }
    sets
}

/// Runs every instance with ≤ 10 jobs, ≤ 2 workers and chunk ∈ {1, 2}
/// over two job/device families, two delegator rates and two query
/// overheads. Returns the number of instances checked, or the first
/// mismatch.
pub fn check_all_small_instances(tolerance_s: f64) -> Result<usize, String> {
    let params = SimParams::default();
    let mut cases = 0;
    for tied in [false, true] {
        let pool = profiles(tied);
        for delegator_rate in [1.0, 0.7] {
            let delegator = DeviceProfile::honest("del", delegator_rate, 1e4);
            for n in 1..=10 {
                for chunk in [1, 2] {
                    let t = task(n, chunk, tied);
                    for workers in worker_sets(&pool) {
                        for overhead in [0.0, 0.2] {
                            let out = simulate_shared(&t, &delegator, &workers, overhead, &params);
                            let expected = enumerate(&t, &delegator, &workers, overhead * workers.len() as f64);
                            if (out.time_2_s - expected).abs() > tolerance_s || out.total_verified() != n as u64 {
                                return Err(format!(
                                    "n={n} chunk={chunk} tied={tied} workers={:?} overhead={overhead}: engine {} vs {expected}",
                                    workers.iter().map(|w| &w.device_id).collect::<Vec<_>>(),
                                    out.time_2_s,
                                ));
                            }
                            cases += 1;
                        }
                    }
                }
            }
        }
    }
    Ok(cases)
}
