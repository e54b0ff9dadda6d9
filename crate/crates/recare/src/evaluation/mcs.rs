//! Model confidence set by iterative elimination on loss differentials.
//!
//! Bootstrap means are drawn once with a stationary block bootstrap and
//! shared across elimination rounds, so per-model p-values are monotone
//! and the set at a lower confidence is always contained in the set at a
//! higher one.

use crate::error::{Error, Result};
use crate::seeding::derive_seed;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum McsStatistic {
    /// Max absolute studentized pairwise differential.
    R,
    /// Sum of squared studentized pairwise differentials.
    Sq,
}

impl McsStatistic {
    pub fn as_str(&self) -> &'static str {
        match self {
            McsStatistic::R => "r",
            McsStatistic::Sq => "sq",
        }
    }

    pub fn parse(s: &str) -> Option<McsStatistic> {
        match s {
            "r" => Some(McsStatistic::R),
            "sq" => Some(McsStatistic::Sq),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct McsConfig {
    /// Confidence level of the reported set (default 90%).
    pub confidence: f64,
    pub statistic: McsStatistic,
    pub resamples: usize,
    /// Expected block length; `None` uses ceil(m^(1/3)).
    pub expected_block: Option<f64>,
    pub seed: u64,
}

impl McsConfig {
    pub fn new(statistic: McsStatistic, seed: u64) -> McsConfig {
        McsConfig {
            confidence: 0.90,
            statistic,
            resamples: 5000,
            expected_block: None,
            seed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct McsResult {
    /// Models (by input index) in the set at the configured confidence.
    pub included: Vec<usize>,
    /// Per-model MCS p-values (running max over elimination rounds).
    pub p_values: Vec<f64>,
    /// Elimination order, worst first; survivors are absent.
    pub eliminated: Vec<usize>,
    pub statistic: McsStatistic,
    pub confidence: f64,
}

impl McsResult {
    /// The set at another confidence level on the same bootstrap draws.
    pub fn included_at(&self, confidence: f64) -> Vec<usize> {
        let cut = 1.0 - confidence;
        (0..self.p_values.len())
            .filter(|&i| self.p_values[i] >= cut)
            .collect()
    }
}

/// Studentize a differential, treating zero-variance pairs as exact
/// ties (statistic zero) unless the mean differential is itself nonzero.
fn studentize(num: f64, var: f64) -> f64 {
    if var > 1e-300 {
        num / var.sqrt()
    } else if num.abs() < 1e-12 {
        0.0
    } else {
        num.signum() * 1e12
    }
}

/// Stationary-bootstrap mean losses: one row per resample, one column
/// per model, drawn with a shared index path per resample.
fn bootstrap_means(
    losses: &[Vec<f64>],
    m: usize,
    resamples: usize,
    expected_block: f64,
    seed: u64,
) -> Vec<Vec<f64>> {
    let k = losses.len();
    let restart = 1.0 / expected_block.max(1.0);
    (0..resamples)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha20Rng::seed_from_u64(derive_seed(seed, b as u64));
            let mut sums = vec![0.0f64; k];
            let mut idx = rng.gen_range(0..m);
            for step in 0..m {
                if step > 0 {
                    if rng.gen::<f64>() < restart {
                        idx = rng.gen_range(0..m);
                    } else {
                        idx = (idx + 1) % m;
                    }
                }
                for (s, loss) in sums.iter_mut().zip(losses) {
                    *s += loss[idx];
                }
            }
            sums.iter_mut().for_each(|s| *s /= m as f64);
            sums
        })
        .collect()
}

/// Run the elimination procedure over per-day losses (one series per
/// model, aligned on days).
pub fn model_confidence_set(losses: &[Vec<f64>], cfg: &McsConfig) -> Result<McsResult> {
    let k = losses.len();
    if k < 2 {
        return Err(Error::TooFewModels { need: 2, have: k });
    }
    let m = losses[0].len();
    if m < 2 {
        return Err(Error::InvalidInput("need at least 2 days of losses".into()));
    }
    for l in losses {
        if l.len() != m {
            return Err(Error::LengthMismatch {
                left: m,
                right: l.len(),
            });
        }
    }
    if !(cfg.confidence > 0.0 && cfg.confidence < 1.0) {
        return Err(Error::InvalidLevel {
            name: "confidence",
            value: cfg.confidence,
        });
    }

    let sample_means: Vec<f64> = losses
        .iter()
        .map(|l| l.iter().sum::<f64>() / m as f64)
        .collect();
    let block = cfg
        .expected_block
        .unwrap_or_else(|| (m as f64).powf(1.0 / 3.0).ceil());
    let boot = bootstrap_means(losses, m, cfg.resamples, block, cfg.seed);
    let b = boot.len() as f64;

    // Pairwise differential variances from the bootstrap, computed once.
    let mut pair_var = vec![0.0f64; k * k];
    for i in 0..k {
        for j in (i + 1)..k {
            let d = sample_means[i] - sample_means[j];
            let v = boot
                .iter()
                .map(|row| (row[i] - row[j] - d).powi(2))
                .sum::<f64>()
                / b;
            pair_var[i * k + j] = v;
            pair_var[j * k + i] = v;
        }
    }

    let mut survivors: Vec<usize> = (0..k).collect();
    let mut p_values = vec![1.0f64; k];
    let mut eliminated = Vec::new();
    let mut running_max = 0.0f64;

    while survivors.len() > 1 {
        let s = &survivors;
        // Observed statistic over the surviving set.
        let mut observed = 0.0f64;
        for (a, &i) in s.iter().enumerate() {
            for &j in &s[a + 1..] {
                let t = studentize(sample_means[i] - sample_means[j], pair_var[i * k + j]);
                match cfg.statistic {
                    McsStatistic::R => observed = observed.max(t.abs()),
                    McsStatistic::Sq => observed += t * t,
                }
            }
        }
        // Bootstrap distribution under recentered differentials.
        let exceed = boot
            .par_iter()
            .filter(|row| {
                let mut stat = 0.0f64;
                for (a, &i) in s.iter().enumerate() {
                    for &j in &s[a + 1..] {
                        let d = sample_means[i] - sample_means[j];
                        let t = studentize(row[i] - row[j] - d, pair_var[i * k + j]);
                        match cfg.statistic {
                            McsStatistic::R => stat = stat.max(t.abs()),
                            McsStatistic::Sq => stat += t * t,
                        }
                    }
                }
                stat >= observed
            })
            .count();
        let p = exceed as f64 / b;
        running_max = running_max.max(p);

        // Worst model: largest studentized mean excess loss vs the
        // surviving-set average.
        let set_mean_obs: f64 = s.iter().map(|&i| sample_means[i]).sum::<f64>() / s.len() as f64;
        let mut worst = 0usize;
        let mut worst_t = f64::NEG_INFINITY;
        for (a, &i) in s.iter().enumerate() {
            let d_i = sample_means[i] - set_mean_obs;
            let v_i = boot
                .iter()
                .map(|row| {
                    let set_mean_b: f64 =
                        s.iter().map(|&j| row[j]).sum::<f64>() / s.len() as f64;
                    (row[i] - set_mean_b - d_i).powi(2)
                })
                .sum::<f64>()
                / b;
            let t_i = studentize(d_i, v_i);
            if t_i > worst_t {
                worst_t = t_i;
                worst = a;
            }
        }

        let worst_model = s[worst];
        p_values[worst_model] = running_max;
        eliminated.push(worst_model);
        survivors.remove(worst);
    }
    // The last survivor keeps p-value 1.
    p_values[survivors[0]] = 1.0;

    let result = McsResult {
        included: vec![],
        p_values,
        eliminated,
        statistic: cfg.statistic,
        confidence: cfg.confidence,
    };
    Ok(McsResult {
        included: result.included_at(cfg.confidence),
        ..result
    })
}
