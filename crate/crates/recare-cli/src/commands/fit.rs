//! `fit`: level search plus adaptive MCMC on one daily series.

use std::path::PathBuf;

use recare::estimation::{estimate_recare_with_chain, McmcChain};
use recare::model::PARAM_NAMES;

use crate::commands::{check_alpha, parse_variant, EstimationFlags};
use crate::config::{effective, fmt10, FileSettings, Metadata};
use crate::{io, CliError};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Daily series CSV (`date,r,x` or `t,r,x`)
    #[arg(long)]
    input: PathBuf,
    /// Parameter summary output (`key,value` rows)
    #[arg(long)]
    output: PathBuf,
    /// Model variant: sav or ig
    #[arg(long)]
    variant: Option<String>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Fix the expectile level instead of searching for it
    #[arg(long)]
    tau: Option<f64>,
    /// Full chain dump (`iter,phase,block,accepted,params...,loglik`)
    #[arg(long)]
    chain_out: Option<PathBuf>,
    #[command(flatten)]
    est: EstimationFlags,
}

pub fn write_chain(path: &PathBuf, meta: &Metadata, chain: &McmcChain) -> Result<(), CliError> {
    let rows = chain
        .burnin
        .updates
        .iter()
        .map(|u| (u, "burnin"))
        .chain(chain.sampling.updates.iter().map(|u| (u, "sampling")))
        .map(|(u, phase)| {
            let params = u.theta.iter().map(|v| fmt10(*v)).collect::<Vec<_>>().join(",");
            format!(
                "{},{phase},{},{},{params},{}",
                u.iter,
                u.block + 1,
                u.accepted as u8,
                fmt10(u.loglik)
            )
        });
    io::write_csv(
        path,
        meta,
        "iter,phase,block,accepted,beta1,beta2,beta3,xi,phi,tau1,tau2,sigma_u,loglik",
        rows,
    )
}

pub fn run(args: Args, fs: &FileSettings) -> Result<(), CliError> {
    let variant = parse_variant(&effective(
        args.variant.clone(),
        fs.string("variant"),
        "sav".into(),
    ))?;
    let alpha = check_alpha(effective(args.alpha, fs.f64("alpha")?, 0.01))?;
    let seed = effective(args.seed, fs.u64("seed")?, 0);
    let tau_fixed = args.tau.map(check_tau(alpha)).transpose()?;

    let search_cfg = args.est.search_config(alpha, seed, fs)?;
    let mut mcmc_cfg = args.est.mcmc_config(seed.wrapping_add(1), fs)?;
    mcmc_cfg.record_updates = args.chain_out.is_some();

    let data = io::read_daily(&args.input)?;
    let (est, chain) =
        estimate_recare_with_chain(&data.r, &data.x, variant, tau_fixed, &search_cfg, &mcmc_cfg)?;

    let mut meta = Metadata::new("fit");
    meta.set("input", args.input.display())
        .set("variant", variant.as_str())
        .set("alpha", fmt10(alpha))
        .set("seed", seed)
        .set("n", data.r.len());
    if let Some(t) = tau_fixed {
        meta.set("tau-fixed", fmt10(t));
    }
    args.est.annotate(&mut meta, &search_cfg, &mcmc_cfg);

    let theta = est.params.to_array();
    let ml_theta = est.maxlik_params.to_array();
    let mut rows = vec![
        format!("tau_hat,{}", fmt10(est.tau_hat)),
        format!("mu0,{}", fmt10(est.mu0)),
        format!("loglik_max,{}", fmt10(est.maxlik)),
        format!("accept_block1,{}", fmt10(est.acceptance[0])),
        format!("accept_block2,{}", fmt10(est.acceptance[1])),
        format!("burnin_iters,{}", est.burnin_iters),
        format!("sampling_iters,{}", est.sampling_iters),
        format!("search_runs,{}", est.search.objective_runs),
        format!("search_min_qloss,{}", fmt10(est.search.min_qloss)),
        format!("search_boundary,{}", est.search.boundary as u8),
    ];
    for (i, name) in PARAM_NAMES.iter().enumerate() {
        rows.push(format!("{name},{}", fmt10(theta[i])));
    }
    for (i, name) in PARAM_NAMES.iter().enumerate() {
        rows.push(format!("sd_{name},{}", fmt10(est.posterior_sd[i])));
    }
    for (i, name) in PARAM_NAMES.iter().enumerate() {
        rows.push(format!("maxlik_{name},{}", fmt10(ml_theta[i])));
    }
    io::write_csv(&args.output, &meta, "key,value", rows.into_iter())?;

    if let Some(chain_path) = &args.chain_out {
        write_chain(chain_path, &meta, &chain)?;
    }
    Ok(())
}

fn check_tau(alpha: f64) -> impl Fn(f64) -> Result<f64, CliError> {
    move |tau| {
        if tau > 0.0 && tau < alpha {
            Ok(tau)
        } else {
            Err(CliError::usage(format!(
                "tau must lie in (0, alpha = {alpha}), got {tau}"
            )))
        }
    }
}
