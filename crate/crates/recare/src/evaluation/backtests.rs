//! VaR coverage and independence backtests plus the ES residual test.

use crate::error::{Error, Result};
use crate::estimation::linalg::Cholesky;
use crate::estimation::{nelder_mead_max, NelderMeadOptions};
use crate::forecasting::ForecastSeries;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Violation indicators `I(r_t < VaR_t)`.
pub fn hits(fc: &ForecastSeries) -> Vec<bool> {
    fc.realized
        .iter()
        .zip(&fc.var)
        .map(|(r, v)| r < v)
        .collect()
}

/// Proportion of returns below the forecast VaR.
pub fn vrate(fc: &ForecastSeries) -> f64 {
    if fc.is_empty() {
        return 0.0;
    }
    hits(fc).iter().filter(|h| **h).count() as f64 / fc.len() as f64
}

#[derive(Debug, Clone, Copy)]
pub struct TestOutcome {
    pub stat: f64,
    pub p_value: f64,
}

fn chi2_p(stat: f64, df: f64) -> f64 {
    if !stat.is_finite() {
        return 0.0;
    }
    let dist = ChiSquared::new(df).expect("positive df");
    (1.0 - dist.cdf(stat.max(0.0))).clamp(0.0, 1.0)
}

/// `x ln p` with the `0 ln 0 = 0` convention.
fn xlnp(x: f64, p: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * p.ln()
    }
}

/// Kupiec unconditional coverage likelihood-ratio test, chi-square(1).
pub fn kupiec_uc(hit_series: &[bool], alpha: f64) -> TestOutcome {
    let m = hit_series.len() as f64;
    let x = hit_series.iter().filter(|h| **h).count() as f64;
    let phat = x / m;
    let ll_null = xlnp(x, alpha) + xlnp(m - x, 1.0 - alpha);
    let ll_alt = xlnp(x, phat) + xlnp(m - x, 1.0 - phat);
    let stat = (-2.0 * (ll_null - ll_alt)).max(0.0);
    TestOutcome {
        stat,
        p_value: chi2_p(stat, 1.0),
    }
}

/// Christoffersen conditional coverage test: the Kupiec statistic plus a
/// first-order Markov independence statistic, chi-square(2).
pub fn christoffersen_cc(hit_series: &[bool], alpha: f64) -> TestOutcome {
    let mut counts = [0.0f64; 4]; // n00, n01, n10, n11
    for w in hit_series.windows(2) {
        let idx = (w[0] as usize) * 2 + w[1] as usize;
        counts[idx] += 1.0;
    }
    let (n00, n01, n10, n11) = (counts[0], counts[1], counts[2], counts[3]);
    let total = n00 + n01 + n10 + n11;
    let pi = (n01 + n11) / total.max(1.0);
    let pi01 = if n00 + n01 > 0.0 { n01 / (n00 + n01) } else { 0.0 };
    let pi11 = if n10 + n11 > 0.0 { n11 / (n10 + n11) } else { 0.0 };
    let ll_indep = xlnp(n01 + n11, pi) + xlnp(n00 + n10, 1.0 - pi);
    let ll_markov =
        xlnp(n00, 1.0 - pi01) + xlnp(n01, pi01) + xlnp(n10, 1.0 - pi11) + xlnp(n11, pi11);
    let lr_ind = (-2.0 * (ll_indep - ll_markov)).max(0.0);
    let stat = kupiec_uc(hit_series, alpha).stat + lr_ind;
    TestOutcome {
        stat,
        p_value: chi2_p(stat, 2.0),
    }
}

/// Solve the symmetric positive (semi-)definite system `A z = b`,
/// retrying with a ridge when the factorization fails. Returns the
/// solution and whether a ridge was applied.
fn solve_spd(a: &mut [f64], b: &[f64], dim: usize) -> Result<(Vec<f64>, bool)> {
    let mut ridged = false;
    let chol = match Cholesky::new(a, dim) {
        Some(c) => c,
        None => {
            ridged = true;
            for i in 0..dim {
                a[i * dim + i] += 1e-10;
            }
            Cholesky::new(a, dim)
                .ok_or_else(|| Error::OptimizationFailed("singular regressor matrix".into()))?
        }
    };
    let mut z = vec![0.0; dim];
    chol.solve(b, &mut z);
    Ok((z, ridged))
}

/// Engle-Manganelli dynamic quantile test.
///
/// Regresses the demeaned hit on a constant, `lags` lagged demeaned
/// hits, and the contemporaneous VaR forecast; the Wald statistic is
/// referred to chi-square(lags + 2). A singular regressor matrix gets a
/// 1e-10 ridge.
pub fn dq_test(hit_series: &[bool], var_forecast: &[f64], alpha: f64, lags: usize) -> Result<TestOutcome> {
    let m = hit_series.len();
    if m != var_forecast.len() {
        return Err(Error::LengthMismatch {
            left: m,
            right: var_forecast.len(),
        });
    }
    if m <= lags + 2 {
        return Err(Error::InvalidInput(format!(
            "need more than {} observations for DQ({lags})",
            lags + 2
        )));
    }
    let k = lags + 2;
    let demeaned: Vec<f64> = hit_series
        .iter()
        .map(|&h| f64::from(h) - alpha)
        .collect();

    let rows = m - lags;
    let mut xtx = vec![0.0; k * k];
    let mut xth = vec![0.0; k];
    let mut row = vec![0.0; k];
    for t in lags..m {
        row[0] = 1.0;
        for j in 0..lags {
            row[1 + j] = demeaned[t - 1 - j];
        }
        row[k - 1] = var_forecast[t];
        for i in 0..k {
            xth[i] += row[i] * demeaned[t];
            for j in 0..k {
                xtx[i * k + j] += row[i] * row[j];
            }
        }
    }
    let _ = rows;
    let (z, _ridged) = solve_spd(&mut xtx, &xth, k)?;
    let quad: f64 = z.iter().zip(&xth).map(|(a, b)| a * b).sum();
    let stat = (quad / (alpha * (1.0 - alpha))).max(0.0);
    Ok(TestOutcome {
        stat,
        p_value: chi2_p(stat, k as f64),
    })
}

#[derive(Debug, Clone, Copy)]
pub struct VqrOutcome {
    pub stat: f64,
    pub p_value: f64,
    /// Constant VaR series: only the intercept was testable.
    pub degenerate: bool,
}

/// Quantile-regression backtest: regress returns on (1, VaR) at level
/// `alpha` and Wald-test (intercept, slope) = (0, 1), with the standard
/// iid-error covariance using a Gaussian-kernel sparsity estimate.
pub fn vqr_test(returns: &[f64], var_forecast: &[f64], alpha: f64) -> Result<VqrOutcome> {
    let m = returns.len();
    if m != var_forecast.len() {
        return Err(Error::LengthMismatch {
            left: m,
            right: var_forecast.len(),
        });
    }
    if m < 50 {
        return Err(Error::InvalidInput(
            "VQR needs at least 50 observations".into(),
        ));
    }
    let mean_v = var_forecast.iter().sum::<f64>() / m as f64;
    let var_v =
        var_forecast.iter().map(|v| (v - mean_v).powi(2)).sum::<f64>() / (m - 1) as f64;
    let degenerate = var_v < 1e-12;

    let pinball = |b: &[f64]| -> f64 {
        let mut loss = 0.0;
        for t in 0..m {
            let fitted = if degenerate {
                b[0]
            } else {
                b[0] + b[1] * var_forecast[t]
            };
            let u = returns[t] - fitted;
            loss += u * (alpha - f64::from(u < 0.0));
        }
        -loss
    };

    // Fit by simplex from the null point and an alternative start.
    let opts = NelderMeadOptions {
        max_evals: 4000,
        f_tol: 1e-12,
        initial_step: 0.25,
    };
    let start_null: Vec<f64> = if degenerate { vec![mean_v] } else { vec![0.0, 1.0] };
    let fit1 = nelder_mead_max(pinball, &start_null, &opts);
    let start_alt: Vec<f64> = if degenerate {
        vec![mean_v - 1.0]
    } else {
        vec![-0.5, 0.8]
    };
    let fit2 = nelder_mead_max(pinball, &start_alt, &opts);
    let b = if fit1.f >= fit2.f { fit1.x } else { fit2.x };

    // Gaussian-kernel sparsity at zero from the fitted residuals.
    let resid: Vec<f64> = (0..m)
        .map(|t| {
            returns[t]
                - if degenerate {
                    b[0]
                } else {
                    b[0] + b[1] * var_forecast[t]
                }
        })
        .collect();
    let rm = resid.iter().sum::<f64>() / m as f64;
    let rsd = (resid.iter().map(|u| (u - rm).powi(2)).sum::<f64>() / (m - 1) as f64).sqrt();
    let mut sorted = resid.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let iqr = sorted[(0.75 * m as f64) as usize] - sorted[(0.25 * m as f64) as usize];
    let spread = if iqr > 0.0 { rsd.min(iqr / 1.34) } else { rsd };
    let h = 0.9 * spread.max(1e-12) * (m as f64).powf(-0.2);
    let f0 = resid
        .iter()
        .map(|u| (-0.5 * (u / h).powi(2)).exp())
        .sum::<f64>()
        / (m as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
    let sparsity = 1.0 / f0.max(1e-12);

    // Wald statistic against (0, 1) (or intercept 0 when degenerate).
    let scale = alpha * (1.0 - alpha) * sparsity * sparsity;
    let (stat, df) = if degenerate {
        let xtx = m as f64;
        let dev = b[0] - mean_v; // fitted constant vs the VaR level
        (dev * dev * xtx / scale, 1.0)
    } else {
        let mut xtx = [0.0f64; 4];
        for &v in var_forecast {
            xtx[0] += 1.0;
            xtx[1] += v;
            xtx[2] += v;
            xtx[3] += v * v;
        }
        let dev = [b[0], b[1] - 1.0];
        // (dev)' (X'X) (dev) / scale
        let quad = dev[0] * (xtx[0] * dev[0] + xtx[1] * dev[1])
            + dev[1] * (xtx[2] * dev[0] + xtx[3] * dev[1]);
        (quad / scale, 2.0)
    };
    let stat = stat.max(0.0);
    Ok(VqrOutcome {
        stat,
        p_value: chi2_p(stat, df),
        degenerate,
    })
}

/// ES residual bootstrap t-test result.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EsTestOutcome {
    PValue(f64),
    /// Fewer than two violation days: no test.
    NotApplicable,
}

impl EsTestOutcome {
    pub fn p_value(&self) -> Option<f64> {
        match self {
            EsTestOutcome::PValue(p) => Some(*p),
            EsTestOutcome::NotApplicable => None,
        }
    }
}

fn t_statistic(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    if var > 1e-300 {
        mean / (var / n).sqrt()
    } else if mean.abs() < 1e-300 {
        0.0
    } else {
        f64::INFINITY * mean.signum()
    }
}

/// Two-sided bootstrap t-test that the ES residuals `r_t - ES_t` on
/// violation days have mean zero. The null distribution is the t
/// statistic over resamples of the centered residuals.
pub fn es_bootstrap_ttest(fc: &ForecastSeries, resamples: usize, seed: u64) -> EsTestOutcome {
    let d: Vec<f64> = fc
        .realized
        .iter()
        .zip(&fc.var)
        .zip(&fc.es)
        .filter(|((r, v), _)| r < v)
        .map(|((r, _), e)| r - e)
        .collect();
    if d.len() < 2 {
        return EsTestOutcome::NotApplicable;
    }
    let t_obs = t_statistic(&d);
    let mean = d.iter().sum::<f64>() / d.len() as f64;
    let centered: Vec<f64> = d.iter().map(|v| v - mean).collect();

    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut exceed = 0usize;
    let mut resample = vec![0.0; d.len()];
    for _ in 0..resamples {
        for slot in resample.iter_mut() {
            *slot = centered[rng.gen_range(0..centered.len())];
        }
        let t_b = t_statistic(&resample);
        if t_b.abs() >= t_obs.abs() {
            exceed += 1;
        }
    }
    EsTestOutcome::PValue(exceed as f64 / resamples as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn fc_from(realized: Vec<f64>, var: Vec<f64>, es: Vec<f64>) -> ForecastSeries {
        let dates = (0..realized.len()).map(|i| format!("d{i:05}")).collect();
        ForecastSeries::new("test", dates, var, es, realized).unwrap()
    }

    fn sample_normal(rng: &mut ChaCha20Rng) -> f64 {
        rand_distr::Distribution::sample(&rand_distr::StandardNormal, rng)
    }

    #[test]
    fn vrate_boundaries() {
        let fc = fc_from(vec![1.0; 5], vec![-1.0; 5], vec![-2.0; 5]);
        assert_eq!(vrate(&fc), 0.0);
        let fc = fc_from(vec![-3.0; 5], vec![-1.0; 5], vec![-2.0; 5]);
        assert_eq!(vrate(&fc), 1.0);
    }

    #[test]
    fn vrate_study_consistency() {
        // 22 violations out of 2113 is 1.041%.
        let m = 2113;
        let x = 22;
        let mut realized = vec![1.0; m];
        for slot in realized.iter_mut().take(x) {
            *slot = -2.0;
        }
        let fc = fc_from(realized, vec![-1.0; m], vec![-2.5; m]);
        assert_relative_eq!(vrate(&fc), 0.01041, epsilon = 5e-6);
        assert_eq!((vrate(&fc) * m as f64).round() as usize, x);
    }

    #[test]
    fn kupiec_examples() {
        let alpha = 0.05;
        // Exactly alpha * m violations: statistic 0, p = 1.
        let m = 200;
        let mut hits_v = vec![false; m];
        for slot in hits_v.iter_mut().take(10) {
            *slot = true;
        }
        let out = kupiec_uc(&hits_v, alpha);
        assert!(out.stat.abs() < 1e-12);
        assert_relative_eq!(out.p_value, 1.0, epsilon = 1e-9);

        // Zero violations boundary convention.
        let out = kupiec_uc(&vec![false; 100], 0.01);
        assert_relative_eq!(
            out.stat,
            -2.0 * 100.0 * (0.99f64).ln(),
            max_relative = 1e-12
        );

        // m = 250, x = 10 against a per-observation oracle.
        let m = 250;
        let x = 10;
        let mut hits_v = vec![false; m];
        for slot in hits_v.iter_mut().take(x) {
            *slot = true;
        }
        let alpha = 0.01;
        let phat = x as f64 / m as f64;
        let oracle: f64 = hits_v
            .iter()
            .map(|&h| {
                let (p0, p1): (f64, f64) =
                    if h { (alpha, phat) } else { (1.0 - alpha, 1.0 - phat) };
                -2.0 * (p0.ln() - p1.ln())
            })
            .sum();
        let out = kupiec_uc(&hits_v, alpha);
        assert_relative_eq!(out.stat, oracle, max_relative = 1e-10);
    }

    #[test]
    fn kupiec_is_deterministic_in_x_m_alpha() {
        // Same (x, m) in different arrangements gives the same statistic.
        let mut a = vec![false; 50];
        a[3] = true;
        a[20] = true;
        let mut b = vec![false; 50];
        b[0] = true;
        b[49] = true;
        let oa = kupiec_uc(&a, 0.03);
        let ob = kupiec_uc(&b, 0.03);
        assert_eq!(oa.stat, ob.stat);
        assert_eq!(oa.p_value, ob.p_value);
    }

    #[test]
    fn cc_detects_alternation() {
        let hits_v: Vec<bool> = (0..200).map(|i| i % 2 == 0).collect();
        let out = christoffersen_cc(&hits_v, 0.5);
        assert!(out.p_value < 1e-6, "p = {}", out.p_value);
    }

    #[test]
    fn cc_all_zero_hits_reduces_to_uc() {
        let hits_v = vec![false; 150];
        let cc = christoffersen_cc(&hits_v, 0.01);
        let uc = kupiec_uc(&hits_v, 0.01);
        assert_relative_eq!(cc.stat, uc.stat, max_relative = 1e-12);
    }

    #[test]
    fn cc_calibrated_under_null() {
        use rand::Rng;
        let mut rng = ChaCha20Rng::seed_from_u64(314);
        let alpha = 0.01;
        let reps = 500;
        let m = 100_000;
        let mut rejections = 0;
        for _ in 0..reps {
            let hits_v: Vec<bool> = (0..m).map(|_| rng.gen::<f64>() < alpha).collect();
            if christoffersen_cc(&hits_v, alpha).p_value < 0.05 {
                rejections += 1;
            }
        }
        let rate = rejections as f64 / reps as f64;
        assert!(rate >= 0.03 && rate <= 0.07, "CC rejection rate {rate}");
    }

    #[test]
    fn dq_detects_persistent_hits() {
        // Deterministic hit pattern Hit_t = Hit_{t-1}: blocks of hits.
        let hits_v: Vec<bool> = (0..400).map(|i| (i / 40) % 2 == 0).collect();
        let var = vec![-1.0; 400];
        let out = dq_test(&hits_v, &var, 0.05, 1).unwrap();
        assert!(out.p_value < 1e-8);
    }

    #[test]
    fn dq_zero_hits_constant_var_convention() {
        // Singular regressors (constant VaR, no hits) fall back to the
        // ridge; the statistic reduces to alpha*T/(1-alpha).
        let m = 100;
        let alpha = 0.01;
        let hits_v = vec![false; m];
        let var = vec![-2.5; m];
        let out = dq_test(&hits_v, &var, alpha, 1).unwrap();
        let t = (m - 1) as f64;
        assert_relative_eq!(out.stat, alpha * t / (1.0 - alpha), max_relative = 1e-4);
        assert!(out.p_value > 0.05, "p = {}", out.p_value);
    }

    #[test]
    fn vqr_perfect_fit_statistic_near_zero() {
        // Returns whose alpha-quantile given VaR_t is exactly VaR_t:
        // a degenerate in-sample construction where each VaR is crossed
        // by the empirical quantile. Use r = VaR + iid noise with known
        // alpha-quantile zero.
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        let alpha = 0.1;
        let z = statrs::distribution::Normal::new(0.0, 1.0)
            .unwrap()
            .inverse_cdf(alpha);
        let m = 4000;
        let var: Vec<f64> = (0..m)
            .map(|_| -1.5 + 0.3 * rng.gen::<f64>())
            .collect();
        let r: Vec<f64> = var
            .iter()
            .map(|v| {
                let e = sample_normal(&mut rng);
                v + (e - z)
            })
            .collect();
        let out = vqr_test(&r, &var, alpha).unwrap();
        assert!(!out.degenerate);
        assert!(out.p_value > 0.01, "p = {}", out.p_value);
    }

    #[test]
    fn vqr_shifted_var_rejected() {
        let alpha = 0.05;
        let z = statrs::distribution::Normal::new(0.0, 1.0)
            .unwrap()
            .inverse_cdf(alpha);
        let m = 2000;
        let reps = 50;
        let mut rejections = 0;
        for rep in 0..reps {
            let mut rng = ChaCha20Rng::seed_from_u64(1000 + rep);
            let sigma: Vec<f64> = (0..m).map(|_| 0.8 + 0.4 * rng.gen::<f64>()).collect();
            let r: Vec<f64> = sigma
                .iter()
                .map(|s| s * sample_normal(&mut rng))
                .collect();
            let var: Vec<f64> = sigma.iter().map(|s| s * z - 1.0).collect();
            if vqr_test(&r, &var, alpha).unwrap().p_value < 0.05 {
                rejections += 1;
            }
        }
        let power = rejections as f64 / reps as f64;
        assert!(power > 0.8, "power {power}");
    }

    #[test]
    fn vqr_degenerate_constant_var() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let m = 1000;
        let r: Vec<f64> = (0..m)
            .map(|_| sample_normal(&mut rng))
            .collect();
        let var = vec![-1.6449; m]; // the 5% normal quantile
        let out = vqr_test(&r, &var, 0.05).unwrap();
        assert!(out.degenerate);
        assert!(out.p_value > 0.01);
    }

    #[test]
    fn es_ttest_edge_cases() {
        // Residuals identically zero: p = 1.
        let m = 100;
        let mut realized = vec![1.0; m];
        let var = vec![-1.0; m];
        let mut es = vec![-2.0; m];
        for t in 0..10 {
            realized[t] = -2.0; // violation with residual exactly 0
            es[t] = -2.0;
        }
        let fc = fc_from(realized, var.clone(), es);
        assert_eq!(
            es_bootstrap_ttest(&fc, 400, 1),
            EsTestOutcome::PValue(1.0)
        );

        // Residuals all +1 with tiny jitter: p near 0.
        let mut realized = vec![1.0; m];
        let mut es = vec![-2.0; m];
        for t in 0..10 {
            realized[t] = -1.0 - 1e-9 * t as f64;
            es[t] = -2.0; // residual ~ +1
        }
        let fc = fc_from(realized, var.clone(), es);
        match es_bootstrap_ttest(&fc, 400, 1) {
            EsTestOutcome::PValue(p) => assert!(p < 0.02, "p = {p}"),
            EsTestOutcome::NotApplicable => panic!("test should apply"),
        }

        // No violations: not applicable.
        let fc = fc_from(vec![1.0; m], var, vec![-2.0; m]);
        assert_eq!(es_bootstrap_ttest(&fc, 400, 1), EsTestOutcome::NotApplicable);
    }
}
