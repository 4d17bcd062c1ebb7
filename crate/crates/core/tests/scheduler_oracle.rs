//! Exhaustive small-instance check of the engine's shared completion time
//! against a direct enumeration.

mod common;

use bdmec_core::{simulate_shared, DeviceProfile, SimParams};

#[test]
fn engine_matches_enumeration_on_all_small_instances() {
    let cases = common::check_all_small_instances(1e-9).unwrap();
    assert_eq!(cases, 2 * 2 * 10 * 2 * 21 * 2);
}

#[test]
fn hand_computed_instance() {
    // Delegator rate 1, one worker rate 1, free links, four unit jobs, chunk 2.
    // t=0: delegator takes job 0, worker takes jobs 1-2 (done at 2).
    // t=1: delegator takes job 3 (done at 2). Completion at 2.
    let t = common::task(4, 2, true);
    let d = DeviceProfile::honest("d", 1.0, 1e6);
    let w = DeviceProfile::honest("w", 1.0, 1e6);
    let out = simulate_shared(&t, &d, &[w], 0.0, &SimParams::default());
    assert_eq!(out.time_2_s, 2.0);
    assert_eq!(out.time_1_s, 4.0);
    assert_eq!(out.speed_gain, 2.0);
    assert_eq!(out.delegator_jobs, 2);
}
