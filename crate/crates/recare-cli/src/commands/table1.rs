//! `reproduce-table1`: the simulation study at configurable scale.

use std::path::PathBuf;

use recare::replication::{run_study, StudyConfig};

use crate::commands::{check_alpha, EstimationFlags};
use crate::config::{effective, fmt10, FileSettings, Metadata};
use crate::{io, CliError};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Summary CSV output
    #[arg(long)]
    output: PathBuf,
    /// Number of replications
    #[arg(long)]
    replications: Option<usize>,
    /// Observations per replication
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Skip the maximum-likelihood comparison arm
    #[arg(long)]
    skip_ml: bool,
    #[command(flatten)]
    est: EstimationFlags,
}

pub fn run(args: Args, fs: &FileSettings, threads: Option<usize>) -> Result<(), CliError> {
    let replications = effective(args.replications, fs.usize("replications")?, 100);
    let n = effective(args.n, fs.usize("n")?, 3000);
    let alpha = check_alpha(effective(args.alpha, fs.f64("alpha")?, 0.01))?;
    let seed = effective(args.seed, fs.u64("seed")?, 0);
    if replications == 0 || n < 300 {
        return Err(CliError::usage("need replications >= 1 and n >= 300"));
    }

    let search = args.est.search_config(alpha, seed, fs)?;
    let mut mcmc = args.est.mcmc_config(seed, fs)?;
    mcmc.record_updates = false;
    let cfg = StudyConfig {
        replications,
        n,
        alpha,
        seed,
        include_ml: !args.skip_ml,
        search,
        mcmc,
    };
    let report = run_study(&cfg).map_err(|e| CliError::runtime(e.to_string()))?;

    let mut meta = Metadata::new("reproduce-table1");
    meta.set("replications", replications)
        .set("n", n)
        .set("alpha", fmt10(alpha))
        .set("seed", seed)
        .set("ml-arm", (!args.skip_ml) as u8)
        .set("failures", report.failures);
    if let Some(t) = threads {
        meta.set("threads", t);
    }
    args.est.annotate(&mut meta, &search, &mcmc);

    io::write_csv(
        &args.output,
        &meta,
        "row,true,rwm_mean,rwm_rmse,ml_mean,ml_rmse",
        report.rows.iter().map(|r| {
            format!(
                "{},{},{},{},{},{}",
                r.name,
                fmt10(r.truth),
                fmt10(r.rwm_mean),
                fmt10(r.rwm_rmse),
                r.ml_mean.map(fmt10).unwrap_or_default(),
                r.ml_rmse.map(fmt10).unwrap_or_default(),
            )
        }),
    )?;

    println!(
        "{:<10} {:>11} {:>11} {:>11} {:>11} {:>11}",
        "row", "true", "rwm_mean", "rwm_rmse", "ml_mean", "ml_rmse"
    );
    for r in &report.rows {
        println!(
            "{:<10} {:>11.4} {:>11.4} {:>11.4} {:>11} {:>11}",
            r.name,
            r.truth,
            r.rwm_mean,
            r.rwm_rmse,
            r.ml_mean.map(|v| format!("{v:.4}")).unwrap_or_default(),
            r.ml_rmse.map(|v| format!("{v:.4}")).unwrap_or_default(),
        );
    }
    if report.failures > 0 {
        println!("{} replication(s) failed and were excluded", report.failures);
    }
    Ok(())
}
