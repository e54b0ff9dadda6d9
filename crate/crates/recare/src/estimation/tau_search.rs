//! Expectile-level search.
//!
//! The expectile level is a nuisance parameter chosen so the fitted
//! expectile series behaves like the target quantile. Three searches are
//! provided: a stochastic random-walk Metropolis objective that scores
//! every iterate's expectile path with the quantile loss, the two-step
//! targeted grid search built on it, and a plain full-grid search with
//! either an RW-M or ML scorer and either the quantile-loss or
//! violation-rate criterion.

use crate::error::{Error, Result};
use crate::estimation::mcmc::{run_rwm, McmcTarget, RecareTarget, RwmOptions, StopRule};
use crate::estimation::ml::{default_init, ml_estimate, NelderMeadOptions};
use crate::expectile::quantile_loss;
use crate::model::{filter, initial_expectile, RecareParams, Variant};
use crate::seeding::derive_seed;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// Settings for the two-step targeted search.
#[derive(Debug, Clone, Copy)]
pub struct TauSearchConfig {
    pub alpha: f64,
    /// Step-1 grid size.
    pub m1_points: usize,
    /// Step-1 grid bounds.
    pub grid_lo: f64,
    pub grid_hi: f64,
    /// Step-2 refinement size (even; half on either side).
    pub m2_points: usize,
    pub first_min_iters: usize,
    pub first_max_iters: usize,
    pub later_min_iters: usize,
    pub later_max_iters: usize,
    pub stall_window: usize,
    pub adapt_interval: usize,
    pub target_accept: f64,
    pub initial_scale: f64,
    pub seed: u64,
}

impl TauSearchConfig {
    pub fn new(alpha: f64, seed: u64) -> TauSearchConfig {
        TauSearchConfig {
            alpha,
            m1_points: 7,
            grid_lo: 1e-4,
            grid_hi: alpha / 1.5,
            m2_points: 6,
            first_min_iters: 10_000,
            first_max_iters: 15_000,
            later_min_iters: 2_000,
            later_max_iters: 10_000,
            stall_window: 1_000,
            adapt_interval: 100,
            target_accept: 0.234,
            initial_scale: 0.05,
            seed,
        }
    }

    /// Narrow the step-1 interval around a previous estimate (used when
    /// re-searching on a rolling refit).
    pub fn centered_at(mut self, tau_prev: f64) -> TauSearchConfig {
        let lo = (tau_prev * 0.5).max(self.grid_lo);
        let hi = (tau_prev * 2.0).min(self.grid_hi);
        if lo < hi {
            self.grid_lo = lo;
            self.grid_hi = hi;
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.grid_lo > 0.0 && self.grid_lo < self.grid_hi && self.grid_hi < self.alpha) {
            return Err(Error::InvalidConfig(format!(
                "need 0 < grid_lo < grid_hi < alpha, got [{}, {}] vs alpha {}",
                self.grid_lo, self.grid_hi, self.alpha
            )));
        }
        if self.m1_points < 3 {
            return Err(Error::InvalidConfig("step-1 grid needs >= 3 points".into()));
        }
        if self.m2_points == 0 || self.m2_points % 2 != 0 {
            return Err(Error::InvalidConfig(
                "step-2 point count must be even and positive".into(),
            ));
        }
        if self.first_min_iters > self.first_max_iters
            || self.later_min_iters > self.later_max_iters
        {
            return Err(Error::InvalidConfig("min iterations exceed max".into()));
        }
        Ok(())
    }

    fn rwm_options(&self) -> RwmOptions {
        RwmOptions {
            adapt_interval: self.adapt_interval,
            target_accept: self.target_accept,
            initial_scale: self.initial_scale,
            record_updates: false,
        }
    }
}

/// Outcome of one RW-M objective run at a fixed expectile level.
#[derive(Debug, Clone)]
pub struct TauObjective {
    pub tau: f64,
    /// Minimum quantile loss over all iterates.
    pub min_qloss: f64,
    /// Parameters attaining the minimum loss.
    pub qloss_params: RecareParams,
    /// Maximum-likelihood iterate (used to warm-start the next level).
    pub maxlik_params: RecareParams,
    pub maxlik: f64,
    pub iters: usize,
}

/// Run the RW-M stochastic search at a fixed `tau`: every iterate's
/// expectile path is scored with the quantile loss at `alpha`, and the
/// chain stops once the likelihood maximum stalls (see [`StopRule`]).
#[allow(clippy::too_many_arguments)]
pub fn rwm_tau_objective(
    r: &[f64],
    x: &[f64],
    variant: Variant,
    tau: f64,
    alpha: f64,
    init: &RecareParams,
    stop: &StopRule,
    opts: &RwmOptions,
    seed: u64,
) -> Result<TauObjective> {
    let mu0 = initial_expectile(r, alpha)?;
    let template = RecareParams {
        tau,
        alpha,
        variant,
        ..*init
    };
    let target = RecareTarget {
        r,
        x,
        mu0,
        template,
    };
    let init_vec = template.to_array();
    if !target.in_support(&init_vec) {
        return Err(Error::OutsideSupport);
    }

    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut min_qloss = f64::INFINITY;
    let mut qloss_theta = init_vec.to_vec();
    let run = run_rwm(
        &target,
        &init_vec,
        &crate::estimation::mcmc::recare_blocks(),
        opts,
        stop,
        &mut rng,
        |iter, theta, _ll, changed| {
            // Re-score only when the draw moved (the loss of a repeated
            // draw cannot improve on itself).
            if !changed && iter > 0 {
                return;
            }
            let p = template.with_array(theta);
            if let Ok(out) = filter(&p, r, x, mu0, variant) {
                if let Ok(q) = quantile_loss(r, &out.mu, alpha) {
                    if q < min_qloss {
                        min_qloss = q;
                        qloss_theta.copy_from_slice(theta);
                    }
                }
            }
        },
    )?;

    Ok(TauObjective {
        tau,
        min_qloss,
        qloss_params: template.with_array(&qloss_theta),
        maxlik_params: template.with_array(&run.best_theta),
        maxlik: run.best_loglik,
        iters: run.iters,
    })
}

/// Result of the two-step targeted search.
#[derive(Debug, Clone)]
pub struct TauSearchResult {
    pub tau_hat: f64,
    /// Parameters at the overall minimum quantile loss.
    pub params_hat: RecareParams,
    /// Max-likelihood iterate at `tau_hat` (warm start for final fits).
    pub maxlik_params: RecareParams,
    pub min_qloss: f64,
    /// Every `(tau, min quantile loss)` evaluated, in evaluation order.
    pub trace: Vec<(f64, f64)>,
    /// Step-1 minimizer fell on the grid boundary.
    pub boundary: bool,
    pub objective_runs: usize,
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n)
        .map(|i| {
            if i == n - 1 {
                hi
            } else {
                lo + (hi - lo) * i as f64 / (n - 1) as f64
            }
        })
        .collect()
}

/// Interior points between `lo` and `hi`, endpoints excluded.
fn interior(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (1..=n)
        .map(|i| lo + (hi - lo) * i as f64 / (n + 1) as f64)
        .collect()
}

/// Two-step targeted expectile-level search.
///
/// Step 1 scores `m1_points` equally spaced levels on the configured
/// interval; the first run starts from the default initialization and
/// each later run warm-starts from the previous level's max-likelihood
/// iterate. Step 2 refines with `m2_points` placed strictly inside the
/// interval bracketing the step-1 minimizer, half on either side. The
/// overall minimizer over both steps is returned.
pub fn two_step_tau_search(
    r: &[f64],
    x: &[f64],
    variant: Variant,
    cfg: &TauSearchConfig,
) -> Result<TauSearchResult> {
    let opts = cfg.rwm_options();
    let first_stop = StopRule {
        min_iters: cfg.first_min_iters,
        max_iters: cfg.first_max_iters,
        stall_window: Some(cfg.stall_window),
    };
    let later_stop = StopRule {
        min_iters: cfg.later_min_iters,
        max_iters: cfg.later_max_iters,
        stall_window: Some(cfg.stall_window),
    };
    let seed = cfg.seed;
    let alpha = cfg.alpha;
    run_two_step(cfg, default_init(x, variant, cfg.grid_lo, alpha), |run, tau, warm| {
        let stop = if run == 0 { &first_stop } else { &later_stop };
        rwm_tau_objective(
            r,
            x,
            variant,
            tau,
            alpha,
            warm,
            stop,
            &opts,
            derive_seed(seed, run as u64),
        )
    })
}

/// The grid logic behind [`two_step_tau_search`], generic over the
/// per-level objective so it can be exercised with stubs. `objective`
/// receives the running evaluation index, the level, and the warm-start
/// parameters (the previous level's max-likelihood iterate).
pub fn run_two_step<F>(
    cfg: &TauSearchConfig,
    first_init: RecareParams,
    mut objective: F,
) -> Result<TauSearchResult>
where
    F: FnMut(usize, f64, &RecareParams) -> Result<TauObjective>,
{
    cfg.validate()?;
    let grid = linspace(cfg.grid_lo, cfg.grid_hi, cfg.m1_points);

    let mut results: Vec<TauObjective> = Vec::with_capacity(cfg.m1_points + cfg.m2_points);
    let mut init = first_init;
    for (i, &tau) in grid.iter().enumerate() {
        let obj = objective(i, tau, &init)?;
        init = obj.maxlik_params;
        results.push(obj);
    }

    let best1 = results
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.min_qloss.partial_cmp(&b.1.min_qloss).unwrap())
        .map(|(i, _)| i)
        .expect("non-empty grid");
    let boundary = best1 == 0 || best1 == grid.len() - 1;
    if boundary {
        eprintln!(
            "warning: step-1 minimizer at grid boundary (tau = {}), refining one-sided",
            grid[best1]
        );
    }

    // Refinement points strictly inside the bracketing interval(s).
    let half = cfg.m2_points / 2;
    let mut refined = Vec::with_capacity(cfg.m2_points);
    if best1 == 0 {
        refined.extend(interior(grid[0], grid[1], cfg.m2_points));
    } else if best1 == grid.len() - 1 {
        refined.extend(interior(grid[best1 - 1], grid[best1], cfg.m2_points));
    } else {
        refined.extend(interior(grid[best1 - 1], grid[best1], half));
        refined.extend(interior(grid[best1], grid[best1 + 1], half));
    }

    let mut init = results[best1].maxlik_params;
    for (j, &tau) in refined.iter().enumerate() {
        let obj = objective(cfg.m1_points + j, tau, &init)?;
        init = obj.maxlik_params;
        results.push(obj);
    }

    let best = results
        .iter()
        .min_by(|a, b| a.min_qloss.partial_cmp(&b.min_qloss).unwrap())
        .expect("non-empty results");

    Ok(TauSearchResult {
        tau_hat: best.tau,
        params_hat: best.qloss_params,
        maxlik_params: best.maxlik_params,
        min_qloss: best.min_qloss,
        trace: results.iter().map(|o| (o.tau, o.min_qloss)).collect(),
        boundary,
        objective_runs: results.len(),
    })
}

/// How a full-grid point is scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridScorer {
    /// RW-M stochastic search (minimum quantile loss over iterates).
    RwM,
    /// Nelder-Mead maximum likelihood at each level.
    Ml,
}

/// Which criterion picks the level.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridCriterion {
    QuantileLoss,
    /// Distance of the in-sample violation rate from `alpha`.
    VRate,
}

#[derive(Debug, Clone)]
pub struct GridPoint {
    pub tau: f64,
    /// Criterion value (quantile loss, or |vrate - alpha|).
    pub criterion: f64,
    pub qloss: f64,
    pub vrate: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct GridTrace {
    pub points: Vec<GridPoint>,
    pub best_tau: f64,
    pub best_index: usize,
}

/// Score every level of an ascending grid with the chosen scorer and
/// criterion; scorer failures are recorded per point and skipped when
/// picking the winner. Ties on the criterion go to the smaller level.
#[allow(clippy::too_many_arguments)]
pub fn full_grid_tau_search(
    r: &[f64],
    x: &[f64],
    variant: Variant,
    grid: &[f64],
    scorer: GridScorer,
    criterion: GridCriterion,
    cfg: &TauSearchConfig,
) -> Result<GridTrace> {
    if grid.is_empty() {
        return Err(Error::InvalidConfig("empty tau grid".into()));
    }
    if grid
        .windows(2)
        .any(|w| w[0] >= w[1])
        || grid[0] <= 0.0
        || *grid.last().unwrap() >= cfg.alpha
    {
        return Err(Error::InvalidConfig(
            "tau grid must be ascending within (0, alpha)".into(),
        ));
    }
    let mu0 = initial_expectile(r, cfg.alpha)?;
    let opts = cfg.rwm_options();
    let mut points = Vec::with_capacity(grid.len());
    let mut warm = default_init(x, variant, grid[0], cfg.alpha);
    for (i, &tau) in grid.iter().enumerate() {
        let scored: Result<(RecareParams, f64)> = match scorer {
            GridScorer::RwM => {
                let stop = if i == 0 {
                    StopRule {
                        min_iters: cfg.first_min_iters,
                        max_iters: cfg.first_max_iters,
                        stall_window: Some(cfg.stall_window),
                    }
                } else {
                    StopRule {
                        min_iters: cfg.later_min_iters,
                        max_iters: cfg.later_max_iters,
                        stall_window: Some(cfg.stall_window),
                    }
                };
                rwm_tau_objective(
                    r,
                    x,
                    variant,
                    tau,
                    cfg.alpha,
                    &warm,
                    &stop,
                    &opts,
                    derive_seed(cfg.seed, i as u64),
                )
                .map(|obj| {
                    warm = obj.maxlik_params;
                    (obj.maxlik_params, obj.min_qloss)
                })
            }
            GridScorer::Ml => {
                let init = RecareParams {
                    tau,
                    alpha: cfg.alpha,
                    variant,
                    ..default_init(x, variant, tau, cfg.alpha)
                };
                ml_estimate(
                    r,
                    x,
                    mu0,
                    &init,
                    &NelderMeadOptions::default(),
                    derive_seed(cfg.seed, 1000 + i as u64),
                )
                .and_then(|fit| {
                    let out = filter(&fit.params, r, x, mu0, variant)?;
                    let q = quantile_loss(r, &out.mu, cfg.alpha)?;
                    Ok((fit.params, q))
                })
            }
        };
        match scored {
            Ok((params, qloss)) => {
                let vrate = match filter(&params, r, x, mu0, variant) {
                    Ok(out) => {
                        r.iter().zip(&out.mu).filter(|(rt, mt)| rt < mt).count() as f64
                            / r.len() as f64
                    }
                    Err(_) => f64::NAN,
                };
                let criterion_value = match criterion {
                    GridCriterion::QuantileLoss => qloss,
                    GridCriterion::VRate => (vrate - cfg.alpha).abs(),
                };
                points.push(GridPoint {
                    tau,
                    criterion: criterion_value,
                    qloss,
                    vrate,
                    error: None,
                });
            }
            Err(e) => points.push(GridPoint {
                tau,
                criterion: f64::NAN,
                qloss: f64::NAN,
                vrate: f64::NAN,
                error: Some(e.to_string()),
            }),
        }
    }

    let mut best_index: Option<usize> = None;
    for (i, p) in points.iter().enumerate() {
        if p.error.is_some() || !p.criterion.is_finite() {
            continue;
        }
        // Strict inequality keeps ties at the smaller tau.
        if best_index.is_none() || p.criterion < points[best_index.unwrap()].criterion {
            best_index = Some(i);
        }
    }
    let best_index = best_index
        .ok_or_else(|| Error::OptimizationFailed("every grid point failed".into()))?;
    Ok(GridTrace {
        best_tau: points[best_index].tau,
        best_index,
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulation::{simulate_rgarch, RgarchSimParams};

    fn small_dataset() -> (Vec<f64>, Vec<f64>) {
        let sim = RgarchSimParams::new(600, 21);
        let d = simulate_rgarch(&sim, 0.01).unwrap();
        (d.r, d.x)
    }

    #[test]
    fn config_validation() {
        let cfg = TauSearchConfig::new(0.01, 1);
        assert!(cfg.validate().is_ok());
        let mut bad = cfg;
        bad.grid_hi = 0.02;
        assert!(bad.validate().is_err());
        let mut bad = cfg;
        bad.m2_points = 5;
        assert!(bad.validate().is_err());
        let mut bad = cfg;
        bad.m1_points = 2;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn objective_runs_and_stalls() {
        let (r, x) = small_dataset();
        let stop = StopRule {
            min_iters: 300,
            max_iters: 5_000,
            stall_window: Some(200),
        };
        let init = default_init(&x, Variant::Sav, 0.002, 0.01);
        let obj = rwm_tau_objective(
            &r,
            &x,
            Variant::Sav,
            0.002,
            0.01,
            &init,
            &stop,
            &RwmOptions::default(),
            9,
        )
        .unwrap();
        assert!(obj.iters >= 300 && obj.iters <= 5_000);
        assert!(obj.min_qloss.is_finite());
        assert!(obj.qloss_params.in_support());
        assert!(obj.maxlik_params.in_support());
    }

    #[test]
    fn two_step_counts_and_bracket() {
        let (r, x) = small_dataset();
        let mut cfg = TauSearchConfig::new(0.01, 5);
        cfg.first_min_iters = 400;
        cfg.first_max_iters = 800;
        cfg.later_min_iters = 200;
        cfg.later_max_iters = 500;
        cfg.stall_window = 150;
        let res = two_step_tau_search(&r, &x, Variant::Sav, &cfg).unwrap();
        assert_eq!(res.objective_runs, cfg.m1_points + cfg.m2_points);
        assert_eq!(res.trace.len(), res.objective_runs);
        assert!(res.tau_hat > 0.0 && res.tau_hat < cfg.alpha);
        // Step-2 points lie strictly inside the step-1 bracket.
        let step1: Vec<f64> = res.trace[..cfg.m1_points].iter().map(|t| t.0).collect();
        let best1 = res.trace[..cfg.m1_points]
            .iter()
            .enumerate()
            .min_by(|a, b| a.1 .1.partial_cmp(&b.1 .1).unwrap())
            .unwrap()
            .0;
        if !res.boundary {
            let lo = step1[best1 - 1];
            let hi = step1[best1 + 1];
            for &(t, _) in &res.trace[cfg.m1_points..] {
                assert!(t > lo && t < hi, "step-2 tau {t} outside ({lo}, {hi})");
            }
        }
    }

    #[test]
    fn singleton_grid_returns_it() {
        let (r, x) = small_dataset();
        let mut cfg = TauSearchConfig::new(0.01, 6);
        cfg.first_min_iters = 200;
        cfg.first_max_iters = 400;
        cfg.stall_window = 100;
        let trace = full_grid_tau_search(
            &r,
            &x,
            Variant::Sav,
            &[0.002],
            GridScorer::RwM,
            GridCriterion::QuantileLoss,
            &cfg,
        )
        .unwrap();
        assert_eq!(trace.best_tau, 0.002);
        assert_eq!(trace.points.len(), 1);
    }

    #[test]
    fn grid_rejects_bad_inputs() {
        let (r, x) = small_dataset();
        let cfg = TauSearchConfig::new(0.01, 6);
        for grid in [vec![], vec![0.002, 0.001], vec![0.002, 0.02]] {
            assert!(full_grid_tau_search(
                &r,
                &x,
                Variant::Sav,
                &grid,
                GridScorer::RwM,
                GridCriterion::QuantileLoss,
                &cfg,
            )
            .is_err());
        }
    }

    #[test]
    fn monotone_stub_refines_rightmost_interval() {
        // A loss strictly decreasing in tau puts the step-1 minimizer on
        // the right boundary; the refinement must stay inside the last
        // interval and the final pick lands there.
        let cfg = TauSearchConfig::new(0.01, 0);
        let dummy = default_init(&[1.0, 1.2, 0.8], Variant::Sav, cfg.grid_lo, cfg.alpha);
        let res = run_two_step(&cfg, dummy, |_, tau, warm| {
            Ok(TauObjective {
                tau,
                min_qloss: -tau,
                qloss_params: *warm,
                maxlik_params: *warm,
                maxlik: 0.0,
                iters: 1,
            })
        })
        .unwrap();
        assert!(res.boundary);
        assert_eq!(res.tau_hat, cfg.grid_hi);
        let grid_step = (cfg.grid_hi - cfg.grid_lo) / (cfg.m1_points - 1) as f64;
        let second_last = cfg.grid_hi - grid_step;
        for &(t, _) in &res.trace[cfg.m1_points..] {
            assert!(t > second_last && t < cfg.grid_hi);
        }
        assert_eq!(res.objective_runs, cfg.m1_points + cfg.m2_points);
    }

    #[test]
    fn centered_interval_stays_inside_bounds() {
        let cfg = TauSearchConfig::new(0.01, 0).centered_at(0.0015);
        assert!(cfg.grid_lo >= 1e-4);
        assert!(cfg.grid_hi <= 0.01 / 1.5);
        assert!(cfg.validate().is_ok());
        // Degenerate centring (tiny tau) leaves the interval untouched.
        let cfg2 = TauSearchConfig::new(0.01, 0).centered_at(1e-6);
        assert!(cfg2.validate().is_ok());
    }
}
