//! Simulation-study driver: generate replications, fit both estimators,
//! and summarize bias and precision per parameter row.

use crate::error::{Error, Result};
use crate::estimation::{
    fit_at_tau, full_grid_tau_search, ml_estimate, two_step_tau_search, GridCriterion,
    GridScorer, McmcConfig, NelderMeadOptions, TauSearchConfig,
};
use crate::expectile::expectile_to_es;
use crate::model::{filter, initial_expectile, one_step_mu, RecareParams, Variant};
use crate::seeding::derive_seed;
use crate::simulation::{map_rgarch_to_recare, simulate_rgarch, RgarchSimParams};
use rayon::prelude::*;

#[derive(Debug, Clone)]
pub struct StudyConfig {
    pub replications: usize,
    pub n: usize,
    pub alpha: f64,
    pub seed: u64,
    /// Also run the maximum-likelihood arm.
    pub include_ml: bool,
    pub search: TauSearchConfig,
    pub mcmc: McmcConfig,
}

impl StudyConfig {
    pub fn new(seed: u64) -> StudyConfig {
        StudyConfig {
            replications: 100,
            n: 3000,
            alpha: 0.01,
            seed,
            include_ml: true,
            search: TauSearchConfig::new(0.01, seed),
            mcmc: McmcConfig::new(seed),
        }
    }
}

/// One estimator's point estimates for a replication.
#[derive(Debug, Clone, Copy)]
pub struct ArmEstimates {
    pub theta: [f64; 8],
    pub tau: f64,
    pub var_next: f64,
    pub es_next: f64,
}

#[derive(Debug, Clone)]
pub struct Replication {
    pub index: usize,
    pub true_var_next: f64,
    pub true_es_next: f64,
    pub rwm: ArmEstimates,
    pub ml: Option<ArmEstimates>,
}

/// Mean/RMSE summary for one reported row.
#[derive(Debug, Clone)]
pub struct StudyRow {
    pub name: &'static str,
    pub truth: f64,
    pub rwm_mean: f64,
    pub rwm_rmse: f64,
    pub ml_mean: Option<f64>,
    pub ml_rmse: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct StudyReport {
    pub rows: Vec<StudyRow>,
    pub replications: Vec<Replication>,
    pub failures: usize,
}

pub const STUDY_ROWS: [&str; 11] = [
    "beta1", "beta2", "beta3", "xi", "phi", "tau1", "tau2", "sigma_u", "tau", "var_next",
    "es_next",
];

fn forecast_from(
    params: &RecareParams,
    fallback: &RecareParams,
    r: &[f64],
    x: &[f64],
) -> Result<(f64, f64, [f64; 8])> {
    let mu0 = initial_expectile(r, params.alpha)?;
    // Posterior means can land just outside the support even when every
    // draw is inside it; fall back to the max-likelihood draw.
    let (used, out) = match filter(params, r, x, mu0, params.variant) {
        Ok(out) if params.in_support() => (params, out),
        _ => (
            fallback,
            filter(fallback, r, x, mu0, fallback.variant)?,
        ),
    };
    let mu_next = one_step_mu(used, *out.mu.last().expect("non-empty"), x[x.len() - 1]);
    if !(mu_next < 0.0) {
        return Err(Error::SignViolation {
            t: r.len(),
            mu: mu_next,
        });
    }
    let es_next = expectile_to_es(mu_next, used.tau, used.alpha)?;
    Ok((mu_next, es_next, used.to_array()))
}

fn run_replication(cfg: &StudyConfig, k: usize) -> Result<Replication> {
    let sim = RgarchSimParams::new(cfg.n, derive_seed(cfg.seed, k as u64));
    let data = simulate_rgarch(&sim, cfg.alpha)?;

    // Bayesian arm: targeted level search, then the full MCMC fit.
    let search_cfg = TauSearchConfig {
        alpha: cfg.alpha,
        seed: derive_seed(cfg.seed, 1_000_000 + k as u64),
        ..cfg.search
    };
    let search = two_step_tau_search(&data.r, &data.x, Variant::Sav, &search_cfg)?;
    let mcmc_cfg = McmcConfig {
        seed: derive_seed(cfg.seed, 2_000_000 + k as u64),
        ..cfg.mcmc
    };
    let (est, _) = fit_at_tau(&data.r, &data.x, Variant::Sav, search, &mcmc_cfg)?;
    let (var_next, es_next, theta) =
        forecast_from(&est.params, &est.maxlik_params, &data.r, &data.x)?;
    let rwm = ArmEstimates {
        theta,
        tau: est.tau_hat,
        var_next,
        es_next,
    };

    // ML arm: plain grid search on the step-1 grid (no refinement),
    // then a multi-start fit at the chosen level.
    let ml = if cfg.include_ml {
        let grid: Vec<f64> = (0..search_cfg.m1_points)
            .map(|i| {
                search_cfg.grid_lo
                    + (search_cfg.grid_hi - search_cfg.grid_lo) * i as f64
                        / (search_cfg.m1_points - 1) as f64
            })
            .collect();
        let ml_search_cfg = TauSearchConfig {
            seed: derive_seed(cfg.seed, 3_000_000 + k as u64),
            ..search_cfg
        };
        let trace = full_grid_tau_search(
            &data.r,
            &data.x,
            Variant::Sav,
            &grid,
            GridScorer::Ml,
            GridCriterion::QuantileLoss,
            &ml_search_cfg,
        )?;
        let mu0 = initial_expectile(&data.r, cfg.alpha)?;
        let init = crate::estimation::default_init(&data.x, Variant::Sav, trace.best_tau, cfg.alpha);
        let fit = ml_estimate(
            &data.r,
            &data.x,
            mu0,
            &init,
            &NelderMeadOptions::default(),
            derive_seed(cfg.seed, 4_000_000 + k as u64),
        )?;
        let (var_next, es_next, theta) =
            forecast_from(&fit.params, &fit.params, &data.r, &data.x)?;
        Some(ArmEstimates {
            theta,
            tau: trace.best_tau,
            var_next,
            es_next,
        })
    } else {
        None
    };

    Ok(Replication {
        index: k,
        true_var_next: data.var_next,
        true_es_next: data.es_next,
        rwm,
        ml,
    })
}

fn row_value(arm: &ArmEstimates, row: usize) -> f64 {
    match row {
        0..=7 => arm.theta[row],
        8 => arm.tau,
        9 => arm.var_next,
        10 => arm.es_next,
        _ => unreachable!(),
    }
}

/// Run the study: R parallel replications, each fitted with the RW-M
/// pipeline (and optionally ML), summarized as mean and RMSE against the
/// mapped true values. Failed replications are excluded and counted.
pub fn run_study(cfg: &StudyConfig) -> Result<StudyReport> {
    let results: Vec<Result<Replication>> = (0..cfg.replications)
        .into_par_iter()
        .map(|k| run_replication(cfg, k))
        .collect();

    let mut replications = Vec::new();
    let mut failures = 0usize;
    for res in results {
        match res {
            Ok(rep) => replications.push(rep),
            Err(e) => {
                failures += 1;
                eprintln!("warning: replication failed: {e}");
            }
        }
    }
    if replications.is_empty() {
        return Err(Error::OptimizationFailed(
            "every replication failed".into(),
        ));
    }

    let truth_params = map_rgarch_to_recare(&RgarchSimParams::new(cfg.n, 0), cfg.alpha)?;
    let truth_theta = truth_params.to_array();
    let used = replications.len() as f64;

    let mut rows = Vec::with_capacity(STUDY_ROWS.len());
    for (row, name) in STUDY_ROWS.iter().enumerate() {
        // Truth: mapped parameters for the first nine rows, the average
        // of the per-replication dataset truths for the forecasts.
        let truth = match row {
            0..=7 => truth_theta[row],
            8 => truth_params.tau,
            9 => replications.iter().map(|r| r.true_var_next).sum::<f64>() / used,
            10 => replications.iter().map(|r| r.true_es_next).sum::<f64>() / used,
            _ => unreachable!(),
        };
        let per_rep_truth = |rep: &Replication| match row {
            0..=7 => truth_theta[row],
            8 => truth_params.tau,
            9 => rep.true_var_next,
            10 => rep.true_es_next,
            _ => unreachable!(),
        };

        let rwm_vals: Vec<f64> = replications.iter().map(|r| row_value(&r.rwm, row)).collect();
        let rwm_mean = rwm_vals.iter().sum::<f64>() / used;
        let rwm_rmse = (replications
            .iter()
            .map(|r| (row_value(&r.rwm, row) - per_rep_truth(r)).powi(2))
            .sum::<f64>()
            / used)
            .sqrt();

        let (ml_mean, ml_rmse) = if cfg.include_ml {
            let vals: Vec<(f64, f64)> = replications
                .iter()
                .filter_map(|r| r.ml.as_ref().map(|ml| (row_value(ml, row), per_rep_truth(r))))
                .collect();
            if vals.is_empty() {
                (None, None)
            } else {
                let n = vals.len() as f64;
                let mean = vals.iter().map(|(v, _)| v).sum::<f64>() / n;
                let rmse =
                    (vals.iter().map(|(v, t)| (v - t).powi(2)).sum::<f64>() / n).sqrt();
                (Some(mean), Some(rmse))
            }
        } else {
            (None, None)
        };

        rows.push(StudyRow {
            name,
            truth,
            rwm_mean,
            rwm_rmse,
            ml_mean,
            ml_rmse,
        });
    }

    Ok(StudyReport {
        rows,
        replications,
        failures,
    })
}
