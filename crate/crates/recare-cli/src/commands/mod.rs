pub mod backtest;
pub mod combine;
pub mod fit;
pub mod forecast;
pub mod mcs;
pub mod measures;
pub mod simulate;
pub mod table1;
pub mod tausearch;

use recare::estimation::{McmcConfig, TauSearchConfig};
use recare::model::Variant;

use crate::config::{effective, FileSettings};
use crate::CliError;

pub fn check_alpha(alpha: f64) -> Result<f64, CliError> {
    if alpha > 0.0 && alpha < 0.5 {
        Ok(alpha)
    } else {
        Err(CliError::usage(format!(
            "alpha must lie in (0, 0.5), got {alpha}"
        )))
    }
}

pub fn parse_variant(raw: &str) -> Result<Variant, CliError> {
    Variant::parse(raw)
        .ok_or_else(|| CliError::usage(format!("unknown variant `{raw}` (expected sav or ig)")))
}

/// Estimation iteration knobs shared by fit, forecast and the study.
#[derive(Debug, clap::Args)]
pub struct EstimationFlags {
    /// MCMC burn-in iterations
    #[arg(long)]
    pub burnin: Option<usize>,
    /// MCMC sampling iterations
    #[arg(long)]
    pub sampling: Option<usize>,
    /// Level search: min/max RW-M iterations at the first grid point
    #[arg(long)]
    pub search_first_min: Option<usize>,
    #[arg(long)]
    pub search_first_max: Option<usize>,
    /// Level search: min/max RW-M iterations at warm-started points
    #[arg(long)]
    pub search_later_min: Option<usize>,
    #[arg(long)]
    pub search_later_max: Option<usize>,
    /// Stop a search chain once its likelihood maximum has been flat
    /// this many iterations
    #[arg(long)]
    pub stall_window: Option<usize>,
}

impl EstimationFlags {
    pub fn search_config(
        &self,
        alpha: f64,
        seed: u64,
        fs: &FileSettings,
    ) -> Result<TauSearchConfig, CliError> {
        let mut cfg = TauSearchConfig::new(alpha, seed);
        cfg.first_min_iters = effective(
            self.search_first_min,
            fs.usize("search-first-min")?,
            cfg.first_min_iters,
        );
        cfg.first_max_iters = effective(
            self.search_first_max,
            fs.usize("search-first-max")?,
            cfg.first_max_iters,
        );
        cfg.later_min_iters = effective(
            self.search_later_min,
            fs.usize("search-later-min")?,
            cfg.later_min_iters,
        );
        cfg.later_max_iters = effective(
            self.search_later_max,
            fs.usize("search-later-max")?,
            cfg.later_max_iters,
        );
        cfg.stall_window = effective(
            self.stall_window,
            fs.usize("stall-window")?,
            cfg.stall_window,
        );
        cfg.validate().map_err(|e| CliError::usage(e.to_string()))?;
        Ok(cfg)
    }

    pub fn mcmc_config(&self, seed: u64, fs: &FileSettings) -> Result<McmcConfig, CliError> {
        let mut cfg = McmcConfig::new(seed);
        cfg.burnin_iters = effective(self.burnin, fs.usize("burnin")?, cfg.burnin_iters);
        cfg.sampling_iters = effective(self.sampling, fs.usize("sampling")?, cfg.sampling_iters);
        if cfg.burnin_iters < 20 || cfg.sampling_iters == 0 {
            return Err(CliError::usage("burnin must be >= 20 and sampling >= 1"));
        }
        Ok(cfg)
    }

    pub fn annotate(&self, meta: &mut crate::config::Metadata, search: &TauSearchConfig, mcmc: &McmcConfig) {
        meta.set("burnin", mcmc.burnin_iters);
        meta.set("sampling", mcmc.sampling_iters);
        meta.set("search-first-min", search.first_min_iters);
        meta.set("search-first-max", search.first_max_iters);
        meta.set("search-later-min", search.later_min_iters);
        meta.set("search-later-max", search.later_max_iters);
        meta.set("stall-window", search.stall_window);
    }
}
