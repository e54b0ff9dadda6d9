//! `forecast`: rolling one-step-ahead VaR/ES forecasts.

use std::path::PathBuf;

use recare::forecasting::{rolling_forecast, ModelSpec, RollingConfig};
use recare::model::{RecareParams, N_PARAMS};

use crate::commands::{check_alpha, parse_variant, EstimationFlags};
use crate::config::{effective, fmt10, FileSettings, Metadata};
use crate::{io, CliError};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Daily series CSV (`date,r,x` or `t,r,x`)
    #[arg(long)]
    input: PathBuf,
    /// Forecast CSV output (`date,model,var,es,return`)
    #[arg(long)]
    output: PathBuf,
    /// In-sample window length (>= 200)
    #[arg(long)]
    window: Option<usize>,
    /// Days between re-estimations (1 = refit daily)
    #[arg(long)]
    stride: Option<usize>,
    #[arg(long)]
    variant: Option<String>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Model label in the output (default: input file stem)
    #[arg(long)]
    model_id: Option<String>,
    /// Skip estimation: comma-separated
    /// beta1,beta2,beta3,xi,phi,tau1,tau2,sigma_u,tau
    #[arg(long)]
    fixed_params: Option<String>,
    #[command(flatten)]
    est: EstimationFlags,
}

fn parse_fixed(raw: &str, alpha: f64, variant: recare::model::Variant) -> Result<RecareParams, CliError> {
    let parts: Vec<f64> = raw
        .split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| CliError::usage(format!("fixed-params: cannot parse `{p}`")))
        })
        .collect::<Result<_, _>>()?;
    if parts.len() != N_PARAMS + 1 {
        return Err(CliError::usage(format!(
            "fixed-params needs {} comma-separated values (8 parameters + tau), got {}",
            N_PARAMS + 1,
            parts.len()
        )));
    }
    let params = RecareParams {
        beta1: parts[0],
        beta2: parts[1],
        beta3: parts[2],
        xi: parts[3],
        phi: parts[4],
        tau1: parts[5],
        tau2: parts[6],
        sigma_u: parts[7],
        tau: parts[8],
        alpha,
        variant,
    };
    if !params.in_support() {
        return Err(CliError::usage(
            "fixed-params violate the stationarity/positivity constraints",
        ));
    }
    if !(params.tau > 0.0 && params.tau < alpha) {
        return Err(CliError::usage("fixed-params tau must lie in (0, alpha)"));
    }
    Ok(params)
}

pub fn run(args: Args, fs: &FileSettings) -> Result<(), CliError> {
    let variant = parse_variant(&effective(
        args.variant.clone(),
        fs.string("variant"),
        "sav".into(),
    ))?;
    let alpha = check_alpha(effective(args.alpha, fs.f64("alpha")?, 0.01))?;
    let seed = effective(args.seed, fs.u64("seed")?, 0);
    let window = effective(args.window, fs.usize("window")?, 1000);
    let stride = effective(args.stride, fs.usize("stride")?, 1);
    let model_id = args.model_id.clone().unwrap_or_else(|| {
        args.input
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "model".into())
    });

    let search_cfg = args.est.search_config(alpha, seed, fs)?;
    let mcmc_cfg = args.est.mcmc_config(seed, fs)?;
    let spec = match &args.fixed_params {
        Some(raw) => ModelSpec::Fixed(parse_fixed(raw, alpha, variant)?),
        None => ModelSpec::Estimate {
            variant,
            search: search_cfg,
            mcmc: mcmc_cfg,
        },
    };
    let cfg = RollingConfig {
        window,
        refit_interval: stride,
        alpha,
        model_id: model_id.clone(),
        seed,
    };

    let data = io::read_daily(&args.input)?;
    let (fc, diag) = rolling_forecast(&data.labels, &data.r, &data.x, &spec, &cfg)?;

    let mut meta = Metadata::new("forecast");
    meta.set("input", args.input.display())
        .set("model", &model_id)
        .set("variant", variant.as_str())
        .set("alpha", fmt10(alpha))
        .set("seed", seed)
        .set("window", window)
        .set("stride", stride)
        .set("refits", diag.refits)
        .set("carried-forward-steps", diag.carried_forward.len())
        .set(
            "estimation",
            if args.fixed_params.is_some() {
                "fixed-parameters"
            } else {
                "two-step search + MCMC"
            },
        );
    if args.fixed_params.is_none() {
        args.est.annotate(&mut meta, &search_cfg, &mcmc_cfg);
    }
    io::write_forecasts(&args.output, &meta, &fc)
}
