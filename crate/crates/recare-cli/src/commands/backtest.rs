//! `backtest`: run the full test battery on forecast files.

use std::path::PathBuf;

use recare::evaluation::{backtest_report, BacktestConfig, BacktestReport, EsTestOutcome};

use crate::commands::check_alpha;
use crate::config::{effective, fmt10, FileSettings, Metadata};
use crate::{io, CliError};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Report CSV output (one row per model)
    #[arg(long)]
    output: PathBuf,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Bootstrap resamples for the ES residual test
    #[arg(long)]
    es_resamples: Option<usize>,
    /// One or more forecast CSVs (one model per file)
    #[arg(required = true, num_args = 1..)]
    inputs: Vec<PathBuf>,
}

fn es_cell(outcome: &EsTestOutcome) -> String {
    match outcome.p_value() {
        Some(p) => fmt10(p),
        None => "na".into(),
    }
}

fn print_table(reports: &[BacktestReport], alpha: f64) {
    println!(
        "{:<16} {:>6} {:>6} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8} {:>10}",
        "model", "m", "viol", "vrate%", "uc_p", "cc_p", "dq1_p", "dq4_p", "vqr_p", "es_p", "mean_fz"
    );
    for r in reports {
        // A star marks a violation rate significantly different from
        // alpha by the UC test at the 5% level.
        let star = if r.uc_rejects() { "*" } else { "" };
        println!(
            "{:<16} {:>6} {:>6} {:>7.3}{} {:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>8} {:>10.4}",
            r.model_id,
            r.m,
            r.n_violations,
            r.vrate * 100.0,
            star,
            r.uc.p_value,
            r.cc.p_value,
            r.dq1.p_value,
            r.dq4.p_value,
            r.vqr.p_value,
            match r.es_ttest.p_value() {
                Some(p) => format!("{p:.4}"),
                None => "na".into(),
            },
            r.mean_fz_loss,
        );
    }
    println!("(alpha = {alpha}; * = UC rejection at the 5% level)");
}

pub fn run(args: Args, fs: &FileSettings) -> Result<(), CliError> {
    let alpha = check_alpha(effective(args.alpha, fs.f64("alpha")?, 0.01))?;
    let seed = effective(args.seed, fs.u64("seed")?, 0);
    let resamples = effective(args.es_resamples, fs.usize("es-resamples")?, 1000);
    if resamples == 0 {
        return Err(CliError::usage("es-resamples must be >= 1"));
    }
    let cfg = BacktestConfig {
        alpha,
        es_resamples: resamples,
        seed,
    };

    let mut reports = Vec::new();
    for path in &args.inputs {
        let fc = io::read_forecasts(path)?;
        reports.push(backtest_report(&fc, &cfg)?);
    }

    let mut meta = Metadata::new("backtest");
    meta.set("alpha", fmt10(alpha))
        .set("seed", seed)
        .set("es-resamples", resamples)
        .set(
            "inputs",
            args.inputs
                .iter()
                .map(|p| p.display().to_string())
                .collect::<Vec<_>>()
                .join(";"),
        );
    io::write_csv(
        &args.output,
        &meta,
        "model,m,violations,vrate,uc_stat,uc_p,cc_stat,cc_p,dq1_stat,dq1_p,dq4_stat,dq4_p,vqr_stat,vqr_p,es_p,mean_fz,uc_reject_5pct",
        reports.iter().map(|r| {
            format!(
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.model_id,
                r.m,
                r.n_violations,
                fmt10(r.vrate),
                fmt10(r.uc.stat),
                fmt10(r.uc.p_value),
                fmt10(r.cc.stat),
                fmt10(r.cc.p_value),
                fmt10(r.dq1.stat),
                fmt10(r.dq1.p_value),
                fmt10(r.dq4.stat),
                fmt10(r.dq4.p_value),
                fmt10(r.vqr.stat),
                fmt10(r.vqr.p_value),
                es_cell(&r.es_ttest),
                fmt10(r.mean_fz_loss),
                r.uc_rejects() as u8,
            )
        }),
    )?;
    print_table(&reports, alpha);
    Ok(())
}
