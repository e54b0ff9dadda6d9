//! `combine`: day-wise forecast combinations across models.

use std::path::PathBuf;

use recare::forecasting::{combine_forecasts, CombineRule};

use crate::config::{FileSettings, Metadata};
use crate::{io, CliError};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Combination rule: mean, median, min (most extreme), max
    #[arg(long)]
    rule: String,
    /// Combined forecast CSV output
    #[arg(long)]
    output: PathBuf,
    /// Two or more forecast CSVs, aligned on dates
    #[arg(required = true, num_args = 2..)]
    inputs: Vec<PathBuf>,
}

pub fn run(args: Args, _fs: &FileSettings) -> Result<(), CliError> {
    let rule = CombineRule::parse(&args.rule)
        .ok_or_else(|| CliError::usage(format!("unknown combination rule `{}`", args.rule)))?;
    let series = args
        .inputs
        .iter()
        .map(|p| io::read_forecasts(p))
        .collect::<Result<Vec<_>, _>>()?;
    let combined = combine_forecasts(&series, rule)?;

    let mut meta = Metadata::new("combine");
    meta.set("rule", rule.as_str()).set(
        "inputs",
        args.inputs
            .iter()
            .map(|p| p.display().to_string())
            .collect::<Vec<_>>()
            .join(";"),
    );
    meta.set(
        "models",
        series
            .iter()
            .map(|s| s.model_id.as_str())
            .collect::<Vec<_>>()
            .join(";"),
    );
    io::write_forecasts(&args.output, &meta, &combined)
}
