//! `mcs`: model confidence set over forecast files under the joint
//! VaR-ES loss.

use std::path::PathBuf;

use recare::evaluation::{fz_joint_loss, model_confidence_set, McsConfig, McsStatistic};

use crate::commands::check_alpha;
use crate::config::{effective, fmt10, FileSettings, Metadata};
use crate::{io, CliError};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Survivors/p-values CSV output
    #[arg(long)]
    output: PathBuf,
    #[arg(long)]
    alpha: Option<f64>,
    /// Confidence level of the reported set
    #[arg(long)]
    confidence: Option<f64>,
    /// Test statistic: r or sq
    #[arg(long)]
    statistic: Option<String>,
    /// Bootstrap resamples
    #[arg(long)]
    resamples: Option<usize>,
    /// Expected block length (default: ceil(m^(1/3)))
    #[arg(long)]
    block_length: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Two or more forecast CSVs, aligned on dates
    #[arg(required = true, num_args = 2..)]
    inputs: Vec<PathBuf>,
}

pub fn run(args: Args, fs: &FileSettings) -> Result<(), CliError> {
    let alpha = check_alpha(effective(args.alpha, fs.f64("alpha")?, 0.01))?;
    let confidence = effective(args.confidence, fs.f64("confidence")?, 0.90);
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(CliError::usage("confidence must lie in (0, 1)"));
    }
    let statistic = {
        let raw = effective(args.statistic.clone(), fs.string("statistic"), "r".into());
        McsStatistic::parse(&raw)
            .ok_or_else(|| CliError::usage(format!("unknown statistic `{raw}`")))?
    };
    let resamples = effective(args.resamples, fs.usize("resamples")?, 5000);
    if resamples == 0 {
        return Err(CliError::usage("resamples must be >= 1"));
    }
    let seed = effective(args.seed, fs.u64("seed")?, 0);

    let mut models = Vec::new();
    let mut losses = Vec::new();
    let mut dates: Option<Vec<String>> = None;
    for path in &args.inputs {
        let fc = io::read_forecasts(path)?;
        match &dates {
            None => dates = Some(fc.dates.clone()),
            Some(d) => {
                if *d != fc.dates {
                    return Err(CliError::runtime(format!(
                        "{}: dates do not align with the first input",
                        path.display()
                    )));
                }
            }
        }
        let (_, per_day) = fz_joint_loss(&fc, alpha)?;
        models.push(fc.model_id);
        losses.push(per_day);
    }

    let cfg = McsConfig {
        confidence,
        statistic,
        resamples,
        expected_block: args.block_length.or(fs.f64("block-length")?),
        seed,
    };
    let result = model_confidence_set(&losses, &cfg)?;

    let mut meta = Metadata::new("mcs");
    meta.set("alpha", fmt10(alpha))
        .set("confidence", fmt10(confidence))
        .set("statistic", statistic.as_str())
        .set("resamples", resamples)
        .set("seed", seed)
        .set("loss", "joint VaR-ES score")
        .set("models", models.join(";"));
    if let Some(b) = cfg.expected_block {
        meta.set("block-length", fmt10(b));
    }
    io::write_csv(
        &args.output,
        &meta,
        "model,p_value,included",
        (0..models.len()).map(|i| {
            format!(
                "{},{},{}",
                models[i],
                fmt10(result.p_values[i]),
                result.included.contains(&i) as u8
            )
        }),
    )?;

    println!(
        "{:.0}% model confidence set ({} statistic): {} of {} models",
        confidence * 100.0,
        statistic.as_str(),
        result.included.len(),
        models.len()
    );
    for &i in &result.included {
        println!("  {} (p = {:.4})", models[i], result.p_values[i]);
    }
    Ok(())
}
