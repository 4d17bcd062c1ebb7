//! Laplace noise for published job counts, plus the two measures used to
//! judge it: relative error of a noised count and precision of the top
//! ranking after noising.

use std::collections::BTreeMap;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ConfigError, PrivacyError};
use crate::model::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrivacyParams {
    pub epsilon: f64,
    /// Sensitivity of the count query; one job per neighbouring history.
    #[serde(default = "default_sensitivity")]
    pub sensitivity: f64,
}

fn default_sensitivity() -> f64 {
    1.0
}

impl Default for PrivacyParams {
    fn default() -> Self {
        PrivacyParams {
            epsilon: 0.1,
            sensitivity: 1.0,
        }
    }
}

impl PrivacyParams {
    pub fn new(epsilon: f64, sensitivity: f64) -> Self {
        PrivacyParams { epsilon, sensitivity }
    }

    pub fn scale(&self) -> f64 {
        self.sensitivity / self.epsilon
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(ConfigError::invalid("privacy.epsilon", "must be > 0"));
        }
        if !(self.sensitivity.is_finite() && self.sensitivity > 0.0) {
            return Err(ConfigError::invalid("privacy.sensitivity", "must be > 0"));
        }
        Ok(())
    }
}

/// Inverse CDF of Laplace(0, b) at `u - 1/2` for `u` in (-1/2, 1/2).
pub fn laplace_inverse_cdf(scale_b: f64, u: f64) -> f64 {
    if u == 0.0 {
        return 0.0;
    }
    -scale_b * u.signum() * (-2.0 * u.abs()).ln_1p()
}

pub fn laplace_sample<R: Rng + ?Sized>(scale_b: f64, rng: &mut R) -> f64 {
    loop {
        let u = rng.gen::<f64>() - 0.5;
        // u = -1/2 would give an infinite draw.
        if u > -0.5 {
            return laplace_inverse_cdf(scale_b, u);
        }
    }
}

/// Noised count, rounded and clamped at zero.
pub fn perturb_count<R: Rng + ?Sized>(v: u64, params: &PrivacyParams, rng: &mut R) -> u64 {
    let noisy = (v as f64 + laplace_sample(params.scale(), rng)).round();
    if noisy <= 0.0 {
        0
    } else {
        noisy as u64
    }
}

/// `|v - v'| / v` in percent.
pub fn relative_error(v: f64, v_prime: f64) -> Result<f64, PrivacyError> {
    if v.is_nan() || v <= 0.0 {
        return Err(PrivacyError::NonPositiveTrueValue(v));
    }
    Ok((v - v_prime).abs() / v * 100.0)
}

/// Position of `target` when counts are sorted descending, ties by id.
fn rank_of<'a, I>(counts: I, target: &str) -> usize
where
    I: IntoIterator<Item = (&'a str, u64)>,
{
    let mut sorted: Vec<(&str, u64)> = counts.into_iter().collect();
    sorted.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    sorted.iter().position(|(id, _)| *id == target).expect("target in counts")
}

/// Per-worker tallies over a batch of noising trials.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TrialTally {
    pub true_positive: u64,
    pub false_negative: u64,
    pub sum_relative_error: f64,
    pub trials: u64,
}

impl TrialTally {
    pub fn precision_percent(&self) -> Option<f64> {
        let classified = self.true_positive + self.false_negative;
        (classified > 0).then(|| self.true_positive as f64 / classified as f64 * 100.0)
    }

    pub fn mean_relative_error(&self) -> f64 {
        self.sum_relative_error / self.trials as f64
    }
}

/// Each trial noises every worker's count independently. A worker scores
/// a true positive when its noised rank equals its true rank, and a false
/// negative when noise pushed it strictly lower. Being pushed higher is
/// neither.
pub fn run_trials<R: Rng + ?Sized>(
    true_counts: &BTreeMap<String, u64>,
    params: &PrivacyParams,
    trials: u64,
    rng: &mut R,
) -> Result<BTreeMap<String, TrialTally>, PrivacyError> {
    params
        .validate()
        .map_err(|e| PrivacyError::InvalidParams(e.to_string()))?;
    if true_counts.values().any(|&v| v == 0) {
        return Err(PrivacyError::NonPositiveTrueValue(0.0));
    }
    let ids: Vec<&str> = true_counts.keys().map(String::as_str).collect();
    let true_rank: Vec<usize> = ids
        .iter()
        .map(|id| rank_of(true_counts.iter().map(|(k, &v)| (k.as_str(), v)), id))
        .collect();
    let mut tallies: Vec<TrialTally> = vec![TrialTally::default(); ids.len()];
    let mut noisy = vec![0u64; ids.len()];

    for _ in 0..trials {
        for (slot, (_, &v)) in noisy.iter_mut().zip(true_counts.iter()) {
            *slot = perturb_count(v, params, rng);
        }
        for (i, (_, &v)) in true_counts.iter().enumerate() {
            let tally = &mut tallies[i];
            tally.trials += 1;
            tally.sum_relative_error += relative_error(v as f64, noisy[i] as f64)?;
            let rank = rank_of(ids.iter().copied().zip(noisy.iter().copied()), ids[i]);
            match rank.cmp(&true_rank[i]) {
                std::cmp::Ordering::Equal => tally.true_positive += 1,
                std::cmp::Ordering::Greater => tally.false_negative += 1,
                std::cmp::Ordering::Less => {}
            }
        }
    }
    Ok(ids.into_iter().map(String::from).zip(tallies).collect())
}

/// Precision (percent) of `target`'s ranking surviving the noise.
pub fn precision_experiment<R: Rng + ?Sized>(
    true_counts: &BTreeMap<String, u64>,
    target: &str,
    params: &PrivacyParams,
    trials: u64,
    rng: &mut R,
) -> Result<f64, PrivacyError> {
    if !true_counts.contains_key(target) {
        return Err(PrivacyError::UnknownTarget(target.to_string()));
    }
    let tallies = run_trials(true_counts, params, trials.max(1), rng)?;
    tallies[target]
        .precision_percent()
        .ok_or(PrivacyError::NoClassifiedTrials)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrivacyRow {
    pub epsilon: f64,
    pub worker_id: String,
    pub mean_r_percent: f64,
    /// `NaN` when no trial classified the worker.
    pub p_percent: f64,
    pub trials: u64,
    pub seed: u64,
}

/// One row per (epsilon, worker). Each epsilon draws from its own stream
/// derived from `seed`.
pub fn privacy_sweep(
    true_counts: &BTreeMap<String, u64>,
    epsilons: &[f64],
    sensitivity: f64,
    trials: u64,
    seed: u64,
) -> Result<Vec<PrivacyRow>, PrivacyError> {
    let mut rows = Vec::new();
    for (i, &epsilon) in epsilons.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, i as u64));
        let params = PrivacyParams::new(epsilon, sensitivity);
        for (worker_id, tally) in run_trials(true_counts, &params, trials, &mut rng)? {
            rows.push(PrivacyRow {
                epsilon,
                worker_id,
                mean_r_percent: tally.mean_relative_error(),
                p_percent: tally.precision_percent().unwrap_or(f64::NAN),
                trials,
                seed,
            });
        }
    }
    Ok(rows)
}

/// CSV columns: `epsilon,worker_id,mean_R_percent,P_percent,trials,seed`.
pub fn write_privacy_csv<W: Write>(rows: &[PrivacyRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["epsilon", "worker_id", "mean_R_percent", "P_percent", "trials", "seed"])?;
    for r in rows {
        w.write_record([
            r.epsilon.to_string(),
            r.worker_id.clone(),
            r.mean_r_percent.to_string(),
            r.p_percent.to_string(),
            r.trials.to_string(),
            r.seed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
