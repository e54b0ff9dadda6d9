//! Re-CARE state filters and joint log-likelihood.
//!
//! Two variants share the structure: a CARE equation driving the latent
//! expectile from the lagged realized measure, and a measurement
//! equation tying the measure back to the expectile through the
//! multiplicative error `eps_t = r_t / mu_t` with Gaussian noise.
//!
//! SAV: `mu_t = b1 + b2 mu_{t-1} + b3 x_{t-1}`,
//!      `x_t = xi + phi |mu_t| + t1 eps_t + t2 (eps_t^2 - eps2bar) + u_t`.
//!
//! IG:  `mu_t = -sqrt(b1 + b2 mu_{t-1}^2 + b3 x_{t-1}^2)`,
//!      `x_t^2 = xi + phi mu_t^2 + t1 eps_t + t2 (eps_t^2 - eps2bar) + u_t`.
//!
//! `eps2bar` is the in-sample mean of `eps_t^2`, recomputed on every
//! filter pass because it depends on the parameters through `mu`.

use crate::error::{Error, Result};
use crate::expectile::{als_loss, care_loglik};

const LN_2PI: f64 = 1.8378770664093453;

/// Guard on `|mu_t|` below which the multiplicative error is rejected.
const MU_GUARD: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    Sav,
    Ig,
}

impl Variant {
    pub fn as_str(&self) -> &'static str {
        match self {
            Variant::Sav => "sav",
            Variant::Ig => "ig",
        }
    }

    pub fn parse(s: &str) -> Option<Variant> {
        match s {
            "sav" => Some(Variant::Sav),
            "ig" => Some(Variant::Ig),
            _ => None,
        }
    }
}

/// Number of free model parameters.
pub const N_PARAMS: usize = 8;

/// Canonical parameter names in vector order.
pub const PARAM_NAMES: [&str; N_PARAMS] = [
    "beta1", "beta2", "beta3", "xi", "phi", "tau1", "tau2", "sigma_u",
];

/// The eight Re-CARE parameters plus the expectile level, target
/// quantile level and model variant they belong to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecareParams {
    pub beta1: f64,
    pub beta2: f64,
    pub beta3: f64,
    pub xi: f64,
    pub phi: f64,
    pub tau1: f64,
    pub tau2: f64,
    pub sigma_u: f64,
    pub tau: f64,
    pub alpha: f64,
    pub variant: Variant,
}

impl RecareParams {
    /// The free parameters in canonical order.
    pub fn to_array(&self) -> [f64; N_PARAMS] {
        [
            self.beta1,
            self.beta2,
            self.beta3,
            self.xi,
            self.phi,
            self.tau1,
            self.tau2,
            self.sigma_u,
        ]
    }

    pub fn with_array(&self, theta: &[f64]) -> RecareParams {
        assert_eq!(theta.len(), N_PARAMS);
        RecareParams {
            beta1: theta[0],
            beta2: theta[1],
            beta3: theta[2],
            xi: theta[3],
            phi: theta[4],
            tau1: theta[5],
            tau2: theta[6],
            sigma_u: theta[7],
            ..*self
        }
    }

    /// Prior support: stationarity, positivity for IG, positive noise sd.
    pub fn in_support(&self) -> bool {
        check_stationarity(self) && self.sigma_u > 0.0
    }
}

/// Necessary non-divergence condition `beta2 + beta3 phi < 1`, plus the
/// positivity constraints that keep the IG radicand positive.
pub fn check_stationarity(params: &RecareParams) -> bool {
    if params.variant == Variant::Ig
        && !(params.beta1 > 0.0 && params.beta2 > 0.0 && params.beta3 > 0.0)
    {
        return false;
    }
    params.beta2 + params.beta3 * params.phi < 1.0
}

/// Output of one filter pass.
#[derive(Debug, Clone)]
pub struct FilterOutput {
    /// Latent expectile series (strictly negative).
    pub mu: Vec<f64>,
    /// Measurement residuals.
    pub u: Vec<f64>,
    /// Multiplicative errors `r_t / mu_t`.
    pub eps: Vec<f64>,
    /// In-sample mean of `eps^2`.
    pub eps2_bar: f64,
    /// CARE (integrated likelihood) term.
    pub loglik_r: f64,
    /// Gaussian measurement term.
    pub loglik_x: f64,
}

impl FilterOutput {
    pub fn loglik(&self) -> f64 {
        self.loglik_r + self.loglik_x
    }
}

/// Run the Re-CARE-SAV filter: expectile recursion, multiplicative
/// errors, measurement residuals and both likelihood terms.
pub fn filter_sav(
    params: &RecareParams,
    r: &[f64],
    x: &[f64],
    mu0: f64,
) -> Result<FilterOutput> {
    filter(params, r, x, mu0, Variant::Sav)
}

/// Run the Re-CARE-IG filter.
pub fn filter_ig(params: &RecareParams, r: &[f64], x: &[f64], mu0: f64) -> Result<FilterOutput> {
    filter(params, r, x, mu0, Variant::Ig)
}

/// Variant-dispatched filter. `mu0` seeds the recursion and must be
/// negative; sign violations and near-zero expectiles are reported as
/// errors so samplers can treat them as rejected proposals.
pub fn filter(
    params: &RecareParams,
    r: &[f64],
    x: &[f64],
    mu0: f64,
    variant: Variant,
) -> Result<FilterOutput> {
    let n = r.len();
    if n != x.len() {
        return Err(Error::LengthMismatch {
            left: n,
            right: x.len(),
        });
    }
    if n < 2 {
        return Err(Error::InvalidInput("need at least 2 observations".into()));
    }
    if !(mu0 < 0.0) {
        return Err(Error::NonNegativeInit(mu0));
    }
    if !(params.sigma_u > 0.0) {
        return Err(Error::InvalidParameter {
            name: "sigma_u",
            value: params.sigma_u,
        });
    }

    let mut mu = Vec::with_capacity(n);
    mu.push(mu0);
    match variant {
        Variant::Sav => {
            for t in 1..n {
                let m = params.beta1 + params.beta2 * mu[t - 1] + params.beta3 * x[t - 1];
                if m >= 0.0 {
                    return Err(Error::SignViolation { t, mu: m });
                }
                mu.push(m);
            }
        }
        Variant::Ig => {
            for t in 1..n {
                let rad = params.beta1
                    + params.beta2 * mu[t - 1] * mu[t - 1]
                    + params.beta3 * x[t - 1] * x[t - 1];
                // Positivity constraints make a negative radicand
                // impossible; the guard stays for unchecked parameters.
                if rad <= 0.0 {
                    return Err(Error::SignViolation { t, mu: rad });
                }
                mu.push(-rad.sqrt());
            }
        }
    }

    let mut eps = Vec::with_capacity(n);
    let mut eps2_sum = 0.0;
    for t in 0..n {
        if mu[t].abs() < MU_GUARD {
            return Err(Error::NearZeroExpectile { t });
        }
        let e = r[t] / mu[t];
        eps.push(e);
        eps2_sum += e * e;
    }
    let eps2_bar = eps2_sum / n as f64;

    let mut u = Vec::with_capacity(n);
    for t in 0..n {
        let asym = params.tau1 * eps[t] + params.tau2 * (eps[t] * eps[t] - eps2_bar);
        let resid = match variant {
            Variant::Sav => x[t] - params.xi - params.phi * mu[t].abs() - asym,
            Variant::Ig => x[t] * x[t] - params.xi - params.phi * mu[t] * mu[t] - asym,
        };
        u.push(resid);
    }

    let loglik_r = care_loglik(als_loss(r, &mu, params.tau)?, n)?;
    let sigma2 = params.sigma_u * params.sigma_u;
    let mut loglik_x = 0.0;
    for &ut in &u {
        loglik_x += LN_2PI + sigma2.ln() + ut * ut / sigma2;
    }
    loglik_x *= -0.5;

    Ok(FilterOutput {
        mu,
        u,
        eps,
        eps2_bar,
        loglik_r,
        loglik_x,
    })
}

/// Joint log-likelihood of the CARE and measurement equations.
pub fn joint_loglik(params: &RecareParams, r: &[f64], x: &[f64], mu0: f64) -> Result<f64> {
    Ok(filter(params, r, x, mu0, params.variant)?.loglik())
}

/// One-step-ahead expectile from the last in-sample state.
pub fn one_step_mu(params: &RecareParams, mu_last: f64, x_last: f64) -> f64 {
    match params.variant {
        Variant::Sav => params.beta1 + params.beta2 * mu_last + params.beta3 * x_last,
        Variant::Ig => {
            let rad = params.beta1 + params.beta2 * mu_last * mu_last + params.beta3 * x_last * x_last;
            -rad.max(0.0).sqrt()
        }
    }
}

/// Empirical `alpha`-level lower quantile of the in-sample returns,
/// used to seed the expectile recursion. Must land strictly below zero.
pub fn initial_expectile(r: &[f64], alpha: f64) -> Result<f64> {
    if r.is_empty() {
        return Err(Error::InvalidInput("empty return series".into()));
    }
    let mut sorted = r.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite returns"));
    let k = ((alpha * r.len() as f64).ceil() as usize).clamp(1, r.len());
    let q = sorted[k - 1];
    if q >= 0.0 {
        return Err(Error::NonNegativeInit(q));
    }
    Ok(q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn sav_params() -> RecareParams {
        RecareParams {
            beta1: -0.1,
            beta2: 0.5,
            beta3: -0.2,
            xi: 0.1,
            phi: 0.4,
            tau1: 0.05,
            tau2: 0.1,
            sigma_u: 0.3,
            tau: 0.01,
            alpha: 0.05,
            variant: Variant::Sav,
        }
    }

    #[test]
    fn sav_hand_recursion() {
        // b1 = -0.1, b2 = 0.5, b3 = -0.2, x = (1,1,1), mu1 = -1:
        // mu2 = -0.1 - 0.5 - 0.2 = -0.8, mu3 = -0.1 - 0.4 - 0.2 = -0.7.
        let p = sav_params();
        let r = [-0.5, 0.2, -0.1];
        let x = [1.0, 1.0, 1.0];
        let out = filter_sav(&p, &r, &x, -1.0).unwrap();
        assert_relative_eq!(out.mu[0], -1.0);
        assert_relative_eq!(out.mu[1], -0.8, max_relative = 1e-14);
        assert_relative_eq!(out.mu[2], -0.7, max_relative = 1e-14);
    }

    #[test]
    fn sav_degenerate_recursion_constant() {
        let p = RecareParams {
            beta2: 0.0,
            beta3: 0.0,
            ..sav_params()
        };
        let r = [0.1, -0.2, 0.3, -0.4];
        let x = [1.0, 2.0, 3.0, 4.0];
        let out = filter_sav(&p, &r, &x, -1.0).unwrap();
        for &m in &out.mu[1..] {
            assert_relative_eq!(m, p.beta1, max_relative = 1e-14);
        }
    }

    #[test]
    fn sav_zero_returns() {
        let p = sav_params();
        let r = [0.0, 0.0, 0.0];
        let x = [1.0, 1.2, 0.9];
        let out = filter_sav(&p, &r, &x, -1.0).unwrap();
        assert_eq!(out.eps, vec![0.0; 3]);
        assert_eq!(out.eps2_bar, 0.0);
        for t in 0..3 {
            assert_relative_eq!(
                out.u[t],
                x[t] - p.xi - p.phi * out.mu[t].abs(),
                max_relative = 1e-14
            );
        }
    }

    #[test]
    fn sav_sign_violation() {
        let p = RecareParams {
            beta1: 2.0,
            ..sav_params()
        };
        let r = [0.1, -0.2];
        let x = [1.0, 1.0];
        assert!(matches!(
            filter_sav(&p, &r, &x, -1.0),
            Err(Error::SignViolation { t: 1, .. })
        ));
    }

    fn ig_params() -> RecareParams {
        RecareParams {
            beta1: 0.01,
            beta2: 0.25,
            beta3: 0.04,
            xi: 0.1,
            phi: 0.4,
            tau1: 0.05,
            tau2: 0.1,
            sigma_u: 0.3,
            tau: 0.01,
            alpha: 0.05,
            variant: Variant::Ig,
        }
    }

    #[test]
    fn ig_hand_evaluation() {
        // mu2 = -sqrt(0.01 + 0.25*1 + 0.04*4) = -sqrt(0.42).
        let p = ig_params();
        let r = [-0.5, 0.2];
        let x = [2.0, 1.0];
        let out = filter_ig(&p, &r, &x, -1.0).unwrap();
        assert_relative_eq!(out.mu[1], -(0.42f64).sqrt(), max_relative = 1e-14);
        assert!(out.mu.iter().all(|&m| m < 0.0));
    }

    #[test]
    fn ig_constant_when_no_feedback() {
        let p = RecareParams {
            beta2: 0.0,
            beta3: 0.0,
            ..ig_params()
        };
        // beta2 = beta3 = 0 violates IG positivity for the support check
        // but the filter itself still runs: mu_t = -sqrt(beta1).
        let r = [0.1, -0.2, 0.3];
        let x = [1.0, 2.0, 3.0];
        let out = filter_ig(&p, &r, &x, -1.0).unwrap();
        for &m in &out.mu[1..] {
            assert_relative_eq!(m, -(0.01f64).sqrt(), max_relative = 1e-14);
        }
    }

    #[test]
    fn eps2_centering_is_exact() {
        let p = sav_params();
        let r = [-1.2, 0.7, -0.3, 0.9, -2.0, 0.4];
        let x = [1.0, 1.1, 0.8, 1.3, 1.7, 0.9];
        let out = filter_sav(&p, &r, &x, -1.5).unwrap();
        let centered: f64 = out
            .eps
            .iter()
            .map(|e| e * e - out.eps2_bar)
            .sum::<f64>()
            / r.len() as f64;
        assert!(centered.abs() < 1e-12);
    }

    #[test]
    fn loglik_decomposes() {
        let p = sav_params();
        let r = [-1.2, 0.7, -0.3, 0.9, -2.0, 0.4];
        let x = [1.0, 1.1, 0.8, 1.3, 1.7, 0.9];
        let out = filter_sav(&p, &r, &x, -1.5).unwrap();
        let joint = joint_loglik(&p, &r, &x, -1.5).unwrap();
        assert_relative_eq!(
            joint,
            out.loglik_r + out.loglik_x,
            max_relative = 1e-12
        );
        // Recompute the terms independently.
        let als = als_loss(&r, &out.mu, p.tau).unwrap();
        assert_relative_eq!(
            out.loglik_r,
            care_loglik(als, r.len()).unwrap(),
            max_relative = 1e-12
        );
        let s2 = p.sigma_u * p.sigma_u;
        let by_hand: f64 = out
            .u
            .iter()
            .map(|u| LN_2PI + s2.ln() + u * u / s2)
            .sum::<f64>()
            * -0.5;
        assert_relative_eq!(out.loglik_x, by_hand, max_relative = 1e-12);
    }

    #[test]
    fn measurement_term_examples() {
        // u == 0, sigma_u = 1: term is -(n/2) ln(2 pi).
        let n = 4;
        let s2: f64 = 1.0;
        let term: f64 = -0.5 * (n as f64) * (LN_2PI + s2.ln());
        assert_relative_eq!(
            term,
            -(n as f64) / 2.0 * LN_2PI,
            max_relative = 1e-14
        );
        // Increasing any |u_t| decreases the term.
        let base: f64 = -0.5 * (LN_2PI + 0.0 + 0.0);
        let worse: f64 = -0.5 * (LN_2PI + 0.0 + 2.0f64.powi(2));
        assert!(worse < base);
    }

    #[test]
    fn filter_is_deterministic() {
        let p = sav_params();
        let r = [-1.2, 0.7, -0.3];
        let x = [1.0, 1.1, 0.8];
        let a = filter_sav(&p, &r, &x, -1.5).unwrap();
        let b = filter_sav(&p, &r, &x, -1.5).unwrap();
        assert_eq!(a.mu, b.mu);
        assert_eq!(a.u, b.u);
        assert_eq!(a.loglik(), b.loglik());
    }

    #[test]
    fn stationarity_examples() {
        let mut p = sav_params();
        p.beta2 = 0.75;
        p.beta3 = -0.58;
        p.phi = 0.39;
        assert!(check_stationarity(&p));

        p.beta2 = 1.0;
        p.beta3 = 0.0;
        assert!(!check_stationarity(&p));

        p.beta2 = 0.0;
        p.phi = 0.0;
        assert!(check_stationarity(&p));

        // IG adds positivity.
        let mut q = ig_params();
        assert!(check_stationarity(&q));
        q.beta3 = -0.1;
        assert!(!check_stationarity(&q));
    }

    #[test]
    fn initial_expectile_is_lower_quantile() {
        let r = [-3.0, -1.0, 0.5, 1.0, 2.0, -2.0, 0.1, -0.5, 0.9, 1.5];
        let q = initial_expectile(&r, 0.1).unwrap();
        assert_eq!(q, -3.0);
        let all_pos = [0.5, 1.0, 2.0];
        assert!(initial_expectile(&all_pos, 0.1).is_err());
    }
}
