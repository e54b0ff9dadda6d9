//! Square-root Realized-GARCH data generator for the simulation study.
//!
//! Replications follow
//!
//! ```text
//! r_t      = sqrt(h_t) e_t,                      e_t ~ N(0, 1)
//! sqrt(h_t) = omega + beta sqrt(h_{t-1}) + gamma x_{t-1}
//! x_t      = xi + varphi sqrt(h_t) + t1 e_t + t2 (e_t^2 - 1) + u_t,
//!            u_t ~ N(0, sigma_u^2)
//! ```
//!
//! and the exact parameter mapping onto the equivalent Re-CARE-SAV
//! model, which supplies the true values recovered in the study.

use crate::error::{Error, Result};
use crate::expectile::{normal_es_quantile_level, true_tau_for_normal};
use crate::model::{RecareParams, Variant};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::distribution::{ContinuousCDF, Normal};

/// Generator parameters; defaults are the study's values.
#[derive(Debug, Clone, Copy)]
pub struct RgarchSimParams {
    pub omega: f64,
    pub beta: f64,
    pub gamma: f64,
    pub xi: f64,
    pub varphi: f64,
    pub t1: f64,
    pub t2: f64,
    pub sigma_u: f64,
    /// Initial sqrt(h_1); `None` starts at the noise-free fixed point.
    pub h0: Option<f64>,
    pub n: usize,
    pub seed: u64,
}

impl RgarchSimParams {
    pub fn new(n: usize, seed: u64) -> RgarchSimParams {
        RgarchSimParams {
            omega: 0.02,
            beta: 0.75,
            gamma: 0.25,
            xi: 0.1,
            varphi: 0.9,
            t1: -0.02,
            t2: 0.02,
            sigma_u: 0.3,
            h0: None,
            n,
            seed,
        }
    }

    /// Fixed point of the volatility map with all noise terms at their
    /// means: `(omega + gamma xi) / (1 - beta - gamma varphi)`.
    pub fn sqrt_h_fixed_point(&self) -> f64 {
        (self.omega + self.gamma * self.xi) / (1.0 - self.beta - self.gamma * self.varphi)
    }

    fn validate(&self) -> Result<()> {
        if !(self.beta + self.gamma * self.varphi < 1.0) {
            return Err(Error::InvalidParameter {
                name: "beta + gamma*varphi",
                value: self.beta + self.gamma * self.varphi,
            });
        }
        if !(self.sigma_u > 0.0) {
            return Err(Error::InvalidParameter {
                name: "sigma_u",
                value: self.sigma_u,
            });
        }
        if self.n < 2 {
            return Err(Error::InvalidInput("need n >= 2".into()));
        }
        Ok(())
    }
}

/// One simulated replication with its true one-step-ahead tail risk.
#[derive(Debug, Clone)]
pub struct SimulatedDataset {
    pub r: Vec<f64>,
    pub x: Vec<f64>,
    pub sqrt_h: Vec<f64>,
    /// sqrt(h_{n+1}), already determined by day n.
    pub sqrt_h_next: f64,
    pub var_next: f64,
    pub es_next: f64,
    /// Innovation pairs re-drawn to keep sqrt(h) positive.
    pub redraws: usize,
}

/// Deterministic volatility update (exposed for fixed-point tests).
pub fn volatility_step(params: &RgarchSimParams, sqrt_h: f64, x: f64) -> f64 {
    params.omega + params.beta * sqrt_h + params.gamma * x
}

/// Measurement equation at given innovations.
pub fn measurement(params: &RgarchSimParams, sqrt_h: f64, eps: f64, u: f64) -> f64 {
    params.xi + params.varphi * sqrt_h + params.t1 * eps + params.t2 * (eps * eps - 1.0) + u
}

/// Simulate one replication and its true VaR/ES at level `alpha`.
///
/// If an innovation pair drives `sqrt(h)` non-positive the pair is
/// re-drawn (rather than truncated) and counted.
pub fn simulate_rgarch(params: &RgarchSimParams, alpha: f64) -> Result<SimulatedDataset> {
    params.validate()?;
    if !(alpha > 0.0 && alpha < 0.5) {
        return Err(Error::InvalidLevel {
            name: "alpha",
            value: alpha,
        });
    }
    let mut rng = ChaCha20Rng::seed_from_u64(params.seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let z_alpha = normal.inverse_cdf(alpha);
    let z_delta = normal.inverse_cdf(normal_es_quantile_level(alpha)?);

    let n = params.n;
    let mut r = Vec::with_capacity(n);
    let mut x = Vec::with_capacity(n);
    let mut sqrt_h = Vec::with_capacity(n);
    let mut redraws = 0usize;

    let mut s = params.h0.unwrap_or_else(|| params.sqrt_h_fixed_point());
    if !(s > 0.0) {
        return Err(Error::InvalidParameter {
            name: "h0",
            value: s,
        });
    }
    for _ in 0..n {
        sqrt_h.push(s);
        let mut tries = 0usize;
        let (rt, xt, s_next) = loop {
            let eps: f64 = StandardNormal.sample(&mut rng);
            let noise: f64 = StandardNormal.sample(&mut rng);
            let u = params.sigma_u * noise;
            let xt = measurement(params, s, eps, u);
            let s_next = volatility_step(params, s, xt);
            if s_next > 0.0 {
                break (s * eps, xt, s_next);
            }
            redraws += 1;
            tries += 1;
            if tries > 1000 {
                return Err(Error::SimulationStuck(tries));
            }
        };
        r.push(rt);
        x.push(xt);
        s = s_next;
    }

    Ok(SimulatedDataset {
        r,
        x,
        sqrt_h,
        sqrt_h_next: s,
        var_next: s * z_alpha,
        es_next: s * z_delta,
        redraws,
    })
}

/// Map the generator onto its equivalent Re-CARE-SAV parameterization:
/// with `z = Phi^{-1}(alpha)` and `mu_t = z sqrt(h_t)`,
/// `b1 = omega z`, `b2 = beta`, `b3 = gamma z`, `phi = -varphi / z`,
/// `tau1 = t1 z`, `tau2 = t2 z^2`, and the expectile level solving the
/// normal ES/VaR ratio.
pub fn map_rgarch_to_recare(params: &RgarchSimParams, alpha: f64) -> Result<RecareParams> {
    if !(alpha > 0.0 && alpha < 0.5) {
        return Err(Error::InvalidLevel {
            name: "alpha",
            value: alpha,
        });
    }
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let z = normal.inverse_cdf(alpha);
    Ok(RecareParams {
        beta1: params.omega * z,
        beta2: params.beta,
        beta3: params.gamma * z,
        xi: params.xi,
        phi: -params.varphi / z,
        tau1: params.t1 * z,
        tau2: params.t2 * z * z,
        sigma_u: params.sigma_u,
        tau: true_tau_for_normal(alpha)?,
        alpha,
        variant: Variant::Sav,
    })
}
