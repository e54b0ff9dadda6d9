//! `simulate`: replications from the square-root Realized-GARCH process.

use std::path::PathBuf;

use recare::seeding::derive_seed;
use recare::simulation::{map_rgarch_to_recare, simulate_rgarch, RgarchSimParams};

use crate::commands::check_alpha;
use crate::config::{effective, fmt10, FileSettings, Metadata};
use crate::{io, CliError};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Observations per replication
    #[arg(long)]
    n: Option<usize>,
    /// Number of replications
    #[arg(long)]
    replications: Option<usize>,
    /// Target quantile level
    #[arg(long)]
    alpha: Option<f64>,
    /// Master seed (replication k uses a derived stream)
    #[arg(long)]
    seed: Option<u64>,
    /// Initial sqrt(h); default is the noise-free fixed point
    #[arg(long)]
    h0: Option<f64>,
    /// Directory for rep_####.csv files and the truth sidecar
    #[arg(long)]
    output_dir: PathBuf,
}

pub fn run(args: Args, fs: &FileSettings) -> Result<(), CliError> {
    let n = effective(args.n, fs.usize("n")?, 3000);
    let reps = effective(args.replications, fs.usize("replications")?, 1);
    let alpha = check_alpha(effective(args.alpha, fs.f64("alpha")?, 0.01))?;
    let seed = effective(args.seed, fs.u64("seed")?, 0);
    if n < 2 || reps == 0 {
        return Err(CliError::usage("need n >= 2 and replications >= 1"));
    }
    std::fs::create_dir_all(&args.output_dir)
        .map_err(|e| CliError::runtime(format!("cannot create output dir: {e}")))?;

    let mut meta = Metadata::new("simulate");
    meta.set("n", n)
        .set("replications", reps)
        .set("alpha", fmt10(alpha))
        .set("seed", seed);
    if let Some(h0) = args.h0 {
        meta.set("h0", fmt10(h0));
    }

    let truth = map_rgarch_to_recare(&RgarchSimParams::new(n, 0), alpha)?;
    let mut truth_rows = Vec::with_capacity(reps);
    for k in 0..reps {
        let mut params = RgarchSimParams::new(n, derive_seed(seed, k as u64));
        params.h0 = args.h0;
        let data = simulate_rgarch(&params, alpha)?;
        if data.redraws * 1000 > n {
            eprintln!(
                "warning: replication {k}: {} re-draws to keep volatility positive",
                data.redraws
            );
        }
        let path = args.output_dir.join(format!("rep_{:04}.csv", k + 1));
        let mut rep_meta = meta.clone();
        rep_meta.set("replication", k + 1);
        io::write_csv(
            &path,
            &rep_meta,
            "t,r,x",
            (0..n).map(|t| format!("{},{},{}", t + 1, fmt10(data.r[t]), fmt10(data.x[t]))),
        )?;
        truth_rows.push(format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            k + 1,
            fmt10(truth.beta1),
            fmt10(truth.beta2),
            fmt10(truth.beta3),
            fmt10(truth.xi),
            fmt10(truth.phi),
            fmt10(truth.tau1),
            fmt10(truth.tau2),
            fmt10(truth.sigma_u),
            fmt10(truth.tau),
            fmt10(data.var_next),
            fmt10(data.es_next)
        ));
    }
    io::write_csv(
        &args.output_dir.join("truth.csv"),
        &meta,
        "replication,beta1,beta2,beta3,xi,phi,tau1,tau2,sigma_u,tau,var_next,es_next",
        truth_rows.into_iter(),
    )
}
