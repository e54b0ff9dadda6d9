//! `tausearch`: expectile-level search traces.

use std::path::PathBuf;

use recare::estimation::{
    full_grid_tau_search, two_step_tau_search, GridCriterion, GridScorer,
};

use crate::commands::{check_alpha, parse_variant, EstimationFlags};
use crate::config::{effective, fmt10, FileSettings, Metadata};
use crate::{io, CliError};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Daily series CSV (`date,r,x` or `t,r,x`)
    #[arg(long)]
    input: PathBuf,
    /// Trace output
    #[arg(long)]
    output: PathBuf,
    #[arg(long)]
    variant: Option<String>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Run a plain full grid with this many points instead of the
    /// two-step targeted search
    #[arg(long)]
    full_grid: Option<usize>,
    /// Full-grid scorer: rwm (stochastic search) or ml (Nelder-Mead)
    #[arg(long)]
    scorer: Option<String>,
    /// Full-grid criterion: qloss or vrate
    #[arg(long)]
    criterion: Option<String>,
    #[command(flatten)]
    est: EstimationFlags,
}

pub fn run(args: Args, fs: &FileSettings) -> Result<(), CliError> {
    let variant = parse_variant(&effective(
        args.variant.clone(),
        fs.string("variant"),
        "sav".into(),
    ))?;
    let alpha = check_alpha(effective(args.alpha, fs.f64("alpha")?, 0.01))?;
    let seed = effective(args.seed, fs.u64("seed")?, 0);
    let cfg = args.est.search_config(alpha, seed, fs)?;

    let data = io::read_daily(&args.input)?;

    let mut meta = Metadata::new("tausearch");
    meta.set("input", args.input.display())
        .set("variant", variant.as_str())
        .set("alpha", fmt10(alpha))
        .set("seed", seed)
        .set("n", data.r.len());

    match args.full_grid {
        None => {
            let res = two_step_tau_search(&data.r, &data.x, variant, &cfg)?;
            meta.set("mode", "two-step")
                .set("tau-hat", fmt10(res.tau_hat))
                .set("boundary", res.boundary as u8);
            let m1 = cfg.m1_points;
            io::write_csv(
                &args.output,
                &meta,
                "index,step,tau,qloss",
                res.trace.iter().enumerate().map(|(i, (tau, q))| {
                    format!(
                        "{i},{},{},{}",
                        if i < m1 { 1 } else { 2 },
                        fmt10(*tau),
                        fmt10(*q)
                    )
                }),
            )
        }
        Some(points) => {
            if points == 0 {
                return Err(CliError::usage("full-grid point count must be >= 1"));
            }
            let scorer = match effective(args.scorer.clone(), fs.string("scorer"), "rwm".into())
                .as_str()
            {
                "rwm" => GridScorer::RwM,
                "ml" => GridScorer::Ml,
                other => {
                    return Err(CliError::usage(format!("unknown scorer `{other}`")));
                }
            };
            let criterion = match effective(
                args.criterion.clone(),
                fs.string("criterion"),
                "qloss".into(),
            )
            .as_str()
            {
                "qloss" => GridCriterion::QuantileLoss,
                "vrate" => GridCriterion::VRate,
                other => {
                    return Err(CliError::usage(format!("unknown criterion `{other}`")));
                }
            };
            let grid: Vec<f64> = if points == 1 {
                vec![cfg.grid_lo]
            } else {
                (0..points)
                    .map(|i| {
                        cfg.grid_lo
                            + (cfg.grid_hi - cfg.grid_lo) * i as f64 / (points - 1) as f64
                    })
                    .collect()
            };
            let trace =
                full_grid_tau_search(&data.r, &data.x, variant, &grid, scorer, criterion, &cfg)?;
            meta.set("mode", "full-grid")
                .set("points", points)
                .set(
                    "scorer",
                    if scorer == GridScorer::RwM { "rwm" } else { "ml" },
                )
                .set(
                    "criterion",
                    if criterion == GridCriterion::QuantileLoss {
                        "qloss"
                    } else {
                        "vrate"
                    },
                )
                .set("tau-hat", fmt10(trace.best_tau));
            io::write_csv(
                &args.output,
                &meta,
                "index,tau,criterion,qloss,vrate,error",
                trace.points.iter().enumerate().map(|(i, p)| {
                    format!(
                        "{i},{},{},{},{},{}",
                        fmt10(p.tau),
                        fmt10(p.criterion),
                        fmt10(p.qloss),
                        fmt10(p.vrate),
                        p.error.clone().unwrap_or_default()
                    )
                }),
            )
        }
    }
}
