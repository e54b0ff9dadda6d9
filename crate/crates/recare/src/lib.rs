//! Semi-parametric Realized-CARE tail-risk modelling.
//!
//! The crate covers the full pipeline from intraday bars to evaluated
//! tail-risk forecasts:
//!
//! - [`measures`]: realized volatility measures (squared return, Parkinson
//!   range, RV, RR) with trailing-window scaling and offset-grid
//!   sub-sampling.
//! - [`expectile`]: expectile losses, the expectile-to-ES mapping and the
//!   integrated CARE likelihood kernel.
//! - [`model`]: the Re-CARE-SAV and Re-CARE-IG state filters and their
//!   joint log-likelihood.
//! - [`estimation`]: adaptive two-block MCMC (random-walk Metropolis
//!   burn-in, independent-kernel MH sampling), Nelder-Mead maximum
//!   likelihood, and the expectile-level search procedures.
//! - [`simulation`]: the square-root Realized-GARCH data generator and its
//!   exact mapping onto Re-CARE-SAV parameters.
//! - [`forecasting`]: rolling one-step-ahead VaR/ES forecasts and
//!   cross-model combinations.
//! - [`evaluation`]: coverage/independence backtests, the joint VaR-ES
//!   scoring rule, and model confidence sets.
//! - [`replication`]: the simulation-study driver that summarizes both
//!   estimators over many replications.

pub mod error;
pub mod estimation;
pub mod evaluation;
pub mod expectile;
pub mod forecasting;
pub mod measures;
pub mod model;
pub mod replication;
pub mod seeding;
pub mod simulation;

pub use error::{Error, Result};
