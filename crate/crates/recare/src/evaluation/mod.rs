//! Forecast evaluation: violation rates, coverage/independence tests,
//! the ES residual bootstrap test, the joint VaR-ES scoring rule, and
//! model confidence sets.

pub mod backtests;
pub mod fz;
pub mod mcs;

pub use backtests::{
    christoffersen_cc, dq_test, es_bootstrap_ttest, hits, kupiec_uc, vqr_test, vrate,
    EsTestOutcome, TestOutcome, VqrOutcome,
};
pub use fz::{fz_joint_loss, fz_loss_single};
pub use mcs::{model_confidence_set, McsConfig, McsResult, McsStatistic};

use crate::error::Result;
use crate::forecasting::ForecastSeries;

/// Settings for a full backtest report.
#[derive(Debug, Clone, Copy)]
pub struct BacktestConfig {
    pub alpha: f64,
    /// Bootstrap resamples for the ES residual test.
    pub es_resamples: usize,
    pub seed: u64,
}

impl BacktestConfig {
    pub fn new(alpha: f64, seed: u64) -> BacktestConfig {
        BacktestConfig {
            alpha,
            es_resamples: 1000,
            seed,
        }
    }
}

/// Everything the `backtest` command reports for one model.
#[derive(Debug, Clone)]
pub struct BacktestReport {
    pub model_id: String,
    pub m: usize,
    pub n_violations: usize,
    pub vrate: f64,
    pub uc: TestOutcome,
    pub cc: TestOutcome,
    pub dq1: TestOutcome,
    pub dq4: TestOutcome,
    pub vqr: VqrOutcome,
    pub es_ttest: EsTestOutcome,
    pub mean_fz_loss: f64,
}

impl BacktestReport {
    /// Significance marker used in report tables: the violation rate
    /// differs from `alpha` by the UC test at the 5% level.
    pub fn uc_rejects(&self) -> bool {
        self.uc.p_value < 0.05
    }
}

/// Run the whole test battery on one forecast series.
pub fn backtest_report(fc: &ForecastSeries, cfg: &BacktestConfig) -> Result<BacktestReport> {
    let h = hits(fc);
    let uc = kupiec_uc(&h, cfg.alpha);
    let cc = christoffersen_cc(&h, cfg.alpha);
    let dq1 = dq_test(&h, &fc.var, cfg.alpha, 1)?;
    let dq4 = dq_test(&h, &fc.var, cfg.alpha, 4)?;
    let vqr = vqr_test(&fc.realized, &fc.var, cfg.alpha)?;
    let es_ttest = es_bootstrap_ttest(fc, cfg.es_resamples, cfg.seed);
    let (total, _) = fz_joint_loss(fc, cfg.alpha)?;
    Ok(BacktestReport {
        model_id: fc.model_id.clone(),
        m: fc.len(),
        n_violations: h.iter().filter(|v| **v).count(),
        vrate: vrate(fc),
        uc,
        cc,
        dq1,
        dq4,
        vqr,
        es_ttest,
        mean_fz_loss: total / fc.len() as f64,
    })
}
