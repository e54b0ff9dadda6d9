//! `measures`: daily realized measures from an intraday bar file.

use std::path::PathBuf;

use recare::measures::{
    daily_return, parkinson_range_sq, range_overnight_sq, realized_range, realized_variance,
    scale_measure, subsample_rr, subsample_rv, IntradayDay, MeasureKind, MeasureSeries,
};

use crate::config::{effective, fmt10, FileSettings, Metadata};
use crate::{io, CliError};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Intraday CSV (`date,time,open,high,low,close`)
    #[arg(long)]
    input: PathBuf,
    /// Measure to compute: return2, range2, rangeovernight2, rv, rr,
    /// scaledrv, scaledrr, subrv, subrr
    #[arg(long)]
    kind: String,
    /// Measure CSV output (`date,value,kind`)
    #[arg(long)]
    output: PathBuf,
    /// Coarse interval in minutes for sub-sampled measures
    #[arg(long)]
    coarse_minutes: Option<u32>,
    /// Trailing window for scaled measures
    #[arg(long)]
    scale_q: Option<usize>,
    /// Also write a modelling series (`date,r,x`) with percentage
    /// returns and the square-root measure
    #[arg(long)]
    daily_out: Option<PathBuf>,
    /// Keep x in raw volatility units instead of percentage units
    #[arg(long)]
    no_percent: bool,
}

/// Per-day series in squared-log units for one base estimator.
fn base_series(days: &[IntradayDay], kind: MeasureKind) -> Result<MeasureSeries, CliError> {
    let mut dates = Vec::new();
    let mut values = Vec::new();
    for (i, day) in days.iter().enumerate() {
        let value = match kind {
            MeasureKind::Return2 => {
                if i == 0 {
                    continue; // no previous close for the first day
                }
                let r = daily_return(day.daily_close(), day.prev_close)? / 100.0;
                r * r
            }
            MeasureKind::RangeOvernight2 => {
                if i == 0 {
                    continue;
                }
                range_overnight_sq(day.daily_high(), day.daily_low(), day.prev_close)?
            }
            MeasureKind::Range2 => parkinson_range_sq(day.daily_high(), day.daily_low())?,
            MeasureKind::Rv => realized_variance(day)?,
            MeasureKind::Rr => realized_range(day)?,
            _ => unreachable!("composite kinds handled by the caller"),
        };
        dates.push(day.date.clone());
        values.push(value);
    }
    Ok(MeasureSeries::new(dates, values, kind)?)
}

fn subsampled(
    days: &[IntradayDay],
    kind: MeasureKind,
    coarse: u32,
) -> Result<MeasureSeries, CliError> {
    let mut dates = Vec::new();
    let mut values = Vec::new();
    for day in days {
        let fine = day.bar_interval_minutes;
        let v = match kind {
            MeasureKind::SubRv => subsample_rv(day, coarse, fine)?,
            MeasureKind::SubRr => subsample_rr(day, coarse, fine)?,
            _ => unreachable!(),
        };
        dates.push(day.date.clone());
        values.push(v);
    }
    Ok(MeasureSeries::new(dates, values, kind)?)
}

/// Restrict both series to their common dates (order-preserving).
fn align(a: MeasureSeries, b: MeasureSeries) -> (MeasureSeries, MeasureSeries) {
    let keep: Vec<String> = a
        .dates
        .iter()
        .filter(|d| b.dates.contains(d))
        .cloned()
        .collect();
    let filter = |s: MeasureSeries| {
        let pairs: Vec<(String, f64)> = s
            .dates
            .into_iter()
            .zip(s.values)
            .filter(|(d, _)| keep.contains(d))
            .collect();
        MeasureSeries::new(
            pairs.iter().map(|(d, _)| d.clone()).collect(),
            pairs.iter().map(|(_, v)| *v).collect(),
            s.kind,
        )
        .expect("aligned lengths")
    };
    (filter(a), filter(b))
}

pub fn compute(
    days: &[IntradayDay],
    kind: MeasureKind,
    coarse: u32,
    q: usize,
) -> Result<MeasureSeries, CliError> {
    match kind {
        MeasureKind::Return2
        | MeasureKind::Range2
        | MeasureKind::RangeOvernight2
        | MeasureKind::Rv
        | MeasureKind::Rr => base_series(days, kind),
        MeasureKind::SubRv | MeasureKind::SubRr => subsampled(days, kind, coarse),
        MeasureKind::ScaledRv => {
            let hf = base_series(days, MeasureKind::Rv)?;
            let daily = base_series(days, MeasureKind::Return2)?;
            let (hf, daily) = align(hf, daily);
            let (scaled, _) = scale_measure(&hf, &daily, q)?;
            Ok(scaled)
        }
        MeasureKind::ScaledRr => {
            let hf = base_series(days, MeasureKind::Rr)?;
            let daily = base_series(days, MeasureKind::Range2)?;
            let (hf, daily) = align(hf, daily);
            let (scaled, _) = scale_measure(&hf, &daily, q)?;
            Ok(scaled)
        }
    }
}

pub fn run(args: Args, fs: &FileSettings) -> Result<(), CliError> {
    let kind = MeasureKind::parse(&args.kind)
        .ok_or_else(|| CliError::usage(format!("unknown measure kind `{}`", args.kind)))?;
    let coarse = effective(args.coarse_minutes, fs.u32("coarse-minutes")?, 5);
    let q = effective(args.scale_q, fs.usize("scale-q")?, 66);
    if q == 0 {
        return Err(CliError::usage("scale-q must be >= 1"));
    }
    let percent = !args.no_percent;

    let days = io::read_intraday(&args.input)?;
    let series = compute(&days, kind, coarse, q)?;

    let mut meta = Metadata::new("measures");
    meta.set("input", args.input.display())
        .set("kind", kind.as_str())
        .set("coarse-minutes", coarse)
        .set("scale-q", q)
        .set("bar-interval-minutes", days[0].bar_interval_minutes)
        .set("subsample-windows", "complete-only (trailing partials dropped)");
    io::write_csv(
        &args.output,
        &meta,
        "date,value,kind",
        series
            .dates
            .iter()
            .zip(&series.values)
            .map(|(d, v)| format!("{d},{},{}", fmt10(*v), series.kind.as_str())),
    )?;

    if let Some(daily_path) = &args.daily_out {
        // Percentage close-to-close returns, from the second day on.
        let mut ret_dates = Vec::new();
        let mut rets = Vec::new();
        for day in days.iter().skip(1) {
            ret_dates.push(day.date.clone());
            rets.push(daily_return(day.daily_close(), day.prev_close)?);
        }
        let scale = if percent { 100.0 } else { 1.0 };
        let mut rows = Vec::new();
        for (d, v) in series.dates.iter().zip(&series.values) {
            if let Some(pos) = ret_dates.iter().position(|rd| rd == d) {
                rows.push(format!(
                    "{d},{},{}",
                    fmt10(rets[pos]),
                    fmt10(v.sqrt() * scale)
                ));
            }
        }
        let mut meta = Metadata::new("measures");
        meta.set("input", args.input.display())
            .set("kind", kind.as_str())
            .set("x-transform", if percent { "sqrt*100" } else { "sqrt" })
            .set("r-units", "percentage log return");
        io::write_csv(daily_path, &meta, "date,r,x", rows.into_iter())?;
    }
    Ok(())
}
