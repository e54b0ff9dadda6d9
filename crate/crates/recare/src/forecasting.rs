//! Rolling fixed-window one-step-ahead VaR/ES forecasting and
//! cross-model forecast combination.

use crate::error::{Error, Result};
use crate::estimation::{estimate_recare, McmcConfig, TauSearchConfig};
use crate::expectile::expectile_to_es;
use crate::model::{filter, initial_expectile, one_step_mu, RecareParams, Variant};
use crate::seeding::derive_seed;

/// Aligned per-day VaR/ES forecasts with the realized returns.
#[derive(Debug, Clone)]
pub struct ForecastSeries {
    pub model_id: String,
    pub dates: Vec<String>,
    pub var: Vec<f64>,
    pub es: Vec<f64>,
    pub realized: Vec<f64>,
}

impl ForecastSeries {
    pub fn new(
        model_id: impl Into<String>,
        dates: Vec<String>,
        var: Vec<f64>,
        es: Vec<f64>,
        realized: Vec<f64>,
    ) -> Result<ForecastSeries> {
        let n = dates.len();
        for len in [var.len(), es.len(), realized.len()] {
            if len != n {
                return Err(Error::LengthMismatch { left: n, right: len });
            }
        }
        for t in 0..n {
            if !(var[t] < 0.0) || !(es[t] <= var[t]) {
                return Err(Error::InvalidInput(format!(
                    "day {t}: need es <= var < 0, got var {} es {}",
                    var[t], es[t]
                )));
            }
        }
        Ok(ForecastSeries {
            model_id: model_id.into(),
            dates,
            var,
            es,
            realized,
        })
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }
}

/// How each rolling window is fitted.
#[derive(Debug, Clone)]
pub enum ModelSpec {
    /// Use these parameters everywhere (no estimation).
    Fixed(RecareParams),
    /// Re-estimate (level search + MCMC) per refit window.
    Estimate {
        variant: Variant,
        search: TauSearchConfig,
        mcmc: McmcConfig,
    },
}

#[derive(Debug, Clone)]
pub struct RollingConfig {
    /// In-sample window length.
    pub window: usize,
    /// Steps between re-estimations (1 = refit daily).
    pub refit_interval: usize,
    pub alpha: f64,
    pub model_id: String,
    pub seed: u64,
}

impl RollingConfig {
    fn validate(&self) -> Result<()> {
        if self.window < 200 {
            return Err(Error::InvalidConfig(format!(
                "rolling window must be >= 200, got {}",
                self.window
            )));
        }
        if self.refit_interval == 0 {
            return Err(Error::InvalidConfig("refit interval must be >= 1".into()));
        }
        Ok(())
    }
}

/// Per-step diagnostics of a rolling run.
#[derive(Debug, Clone, Default)]
pub struct RollingDiagnostics {
    /// Steps where estimation failed and stale parameters were reused.
    pub carried_forward: Vec<usize>,
    /// Number of re-estimations performed.
    pub refits: usize,
}

/// Produce one-step-ahead forecasts for every day after the first
/// `window` observations.
///
/// At each refit the model is estimated on the trailing window (the
/// level search re-centers on the previous estimate); between refits the
/// last parameters are reused. The forecast for day `t+1` runs the
/// filter over the window and advances the recursion one step from the
/// last in-window state; ES is the scaled expectile.
pub fn rolling_forecast(
    dates: &[String],
    r: &[f64],
    x: &[f64],
    spec: &ModelSpec,
    cfg: &RollingConfig,
) -> Result<(ForecastSeries, RollingDiagnostics)> {
    cfg.validate()?;
    let n = cfg.window;
    if r.len() != x.len() || r.len() != dates.len() {
        return Err(Error::LengthMismatch {
            left: r.len(),
            right: x.len().min(dates.len()),
        });
    }
    if r.len() < n + 1 {
        return Err(Error::InsufficientHistory {
            need: n + 1,
            have: r.len(),
        });
    }

    let mut diag = RollingDiagnostics::default();
    let mut out_dates = Vec::new();
    let mut var = Vec::new();
    let mut es = Vec::new();
    let mut realized = Vec::new();

    let mut current: Option<RecareParams> = None;
    let mut prev_tau: Option<f64> = None;

    for (step, t) in (n..r.len()).enumerate() {
        let window_r = &r[t - n..t];
        let window_x = &x[t - n..t];

        if step % cfg.refit_interval == 0 || current.is_none() {
            match spec {
                ModelSpec::Fixed(p) => {
                    current = Some(*p);
                }
                ModelSpec::Estimate {
                    variant,
                    search,
                    mcmc,
                } => {
                    let mut search_cfg = *search;
                    search_cfg.seed = derive_seed(cfg.seed, step as u64);
                    if let Some(tp) = prev_tau {
                        search_cfg = search_cfg.centered_at(tp);
                    }
                    let mcmc_cfg = McmcConfig {
                        seed: derive_seed(cfg.seed, 1_000_000 + step as u64),
                        ..*mcmc
                    };
                    match estimate_recare(window_r, window_x, *variant, &search_cfg, &mcmc_cfg) {
                        Ok(est) => {
                            prev_tau = Some(est.tau_hat);
                            current = Some(est.params);
                            diag.refits += 1;
                        }
                        Err(e) => {
                            if current.is_none() {
                                return Err(Error::ForecastStep {
                                    step,
                                    source: Box::new(e),
                                });
                            }
                            diag.carried_forward.push(step);
                        }
                    }
                }
            }
        }

        let params = current.as_ref().expect("set above");
        let mu0 = initial_expectile(window_r, params.alpha)?;
        let out = filter(params, window_r, window_x, mu0, params.variant).map_err(|e| {
            Error::ForecastStep {
                step,
                source: Box::new(e),
            }
        })?;
        let mu_next = one_step_mu(params, *out.mu.last().expect("non-empty"), window_x[n - 1]);
        if !(mu_next < 0.0) {
            return Err(Error::ForecastStep {
                step,
                source: Box::new(Error::SignViolation { t, mu: mu_next }),
            });
        }
        out_dates.push(dates[t].clone());
        var.push(mu_next);
        es.push(expectile_to_es(mu_next, params.tau, params.alpha)?);
        realized.push(r[t]);
    }

    let series = ForecastSeries::new(cfg.model_id.clone(), out_dates, var, es, realized)?;
    Ok((series, diag))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CombineRule {
    Mean,
    Median,
    /// Most extreme (most negative) forecast.
    Min,
    /// Least extreme forecast.
    Max,
}

impl CombineRule {
    pub fn as_str(&self) -> &'static str {
        match self {
            CombineRule::Mean => "fc-mean",
            CombineRule::Median => "fc-med",
            CombineRule::Min => "fc-min",
            CombineRule::Max => "fc-max",
        }
    }

    pub fn parse(s: &str) -> Option<CombineRule> {
        match s {
            "mean" => Some(CombineRule::Mean),
            "median" | "med" => Some(CombineRule::Median),
            "min" => Some(CombineRule::Min),
            "max" => Some(CombineRule::Max),
            _ => None,
        }
    }

    fn apply(&self, values: &mut Vec<f64>) -> f64 {
        match self {
            CombineRule::Mean => values.iter().sum::<f64>() / values.len() as f64,
            CombineRule::Median => {
                values.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
                let n = values.len();
                if n % 2 == 1 {
                    values[n / 2]
                } else {
                    0.5 * (values[n / 2 - 1] + values[n / 2])
                }
            }
            CombineRule::Min => values.iter().cloned().fold(f64::INFINITY, f64::min),
            CombineRule::Max => values.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

/// Day-wise combination of VaR and (separately) ES across models.
/// All series must share dates and realized returns.
pub fn combine_forecasts(series: &[ForecastSeries], rule: CombineRule) -> Result<ForecastSeries> {
    if series.len() < 2 {
        return Err(Error::TooFewModels {
            need: 2,
            have: series.len(),
        });
    }
    let first = &series[0];
    for s in &series[1..] {
        if s.len() != first.len() {
            return Err(Error::LengthMismatch {
                left: first.len(),
                right: s.len(),
            });
        }
        for (i, (a, b)) in first.dates.iter().zip(&s.dates).enumerate() {
            if a != b {
                return Err(Error::DateMismatch(i));
            }
        }
    }
    let n = first.len();
    let mut var = Vec::with_capacity(n);
    let mut es = Vec::with_capacity(n);
    let mut buf = Vec::with_capacity(series.len());
    for t in 0..n {
        buf.clear();
        buf.extend(series.iter().map(|s| s.var[t]));
        var.push(rule.apply(&mut buf));
        buf.clear();
        buf.extend(series.iter().map(|s| s.es[t]));
        es.push(rule.apply(&mut buf));
    }
    ForecastSeries::new(
        rule.as_str(),
        first.dates.clone(),
        var,
        es,
        first.realized.clone(),
    )
}
