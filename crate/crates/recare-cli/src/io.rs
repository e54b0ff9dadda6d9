//! CSV ingestion and output for every command.
//!
//! All outputs start with a `#`-comment metadata block followed by a
//! plain CSV header; readers skip comment lines, so outputs feed back
//! into other commands unchanged.

use std::path::Path;

use recare::forecasting::ForecastSeries;
use recare::measures::{Bar, IntradayDay};

use crate::config::Metadata;
use crate::CliError;

fn reader(path: &Path) -> Result<csv::Reader<std::fs::File>, CliError> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::usage(format!("cannot open {}: {e}", path.display())))
}

fn parse_field<T: std::str::FromStr>(
    raw: &str,
    path: &Path,
    line: u64,
    column: &str,
) -> Result<T, CliError> {
    raw.parse::<T>().map_err(|_| {
        CliError::runtime(format!(
            "{} line {line} column {column}: cannot parse `{raw}`",
            path.display()
        ))
    })
}

fn header_index(headers: &csv::StringRecord, names: &[&str]) -> Option<usize> {
    headers
        .iter()
        .position(|h| names.contains(&h.to_ascii_lowercase().as_str()))
}

/// One instrument's intraday bars grouped into days, with previous
/// closes chained across days. Input header: `date,time,open,high,low,close`.
///
/// Bars within a day must be equally spaced with no gaps; a day with a
/// missing bar is an error, never imputed. The first day's previous
/// close is its own first open (its return and overnight range are not
/// emitted).
pub fn read_intraday(path: &Path) -> Result<Vec<IntradayDay>, CliError> {
    let mut rdr = reader(path)?;
    let headers = rdr
        .headers()
        .map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))?
        .clone();
    let need = ["date", "time", "open", "high", "low", "close"];
    let idx: Vec<usize> = need
        .iter()
        .map(|name| {
            header_index(&headers, &[name]).ok_or_else(|| {
                CliError::usage(format!(
                    "{}: missing column `{name}` (header: {})",
                    path.display(),
                    headers.iter().collect::<Vec<_>>().join(",")
                ))
            })
        })
        .collect::<Result<_, _>>()?;

    struct Row {
        date: String,
        minute: u32,
        bar: Bar,
        line: u64,
    }
    let mut rows: Vec<Row> = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let date = record.get(idx[0]).unwrap_or("").to_string();
        let time = record.get(idx[1]).unwrap_or("");
        let minute = parse_time(time, path, line)?;
        let open: f64 = parse_field(record.get(idx[2]).unwrap_or(""), path, line, "open")?;
        let high: f64 = parse_field(record.get(idx[3]).unwrap_or(""), path, line, "high")?;
        let low: f64 = parse_field(record.get(idx[4]).unwrap_or(""), path, line, "low")?;
        let close: f64 = parse_field(record.get(idx[5]).unwrap_or(""), path, line, "close")?;
        let bar = Bar::new(open, high, low, close).map_err(|e| {
            CliError::runtime(format!("{} line {line}: {e}", path.display()))
        })?;
        rows.push(Row {
            date,
            minute,
            bar,
            line,
        });
    }
    if rows.is_empty() {
        return Err(CliError::runtime(format!("{}: no data rows", path.display())));
    }

    let mut days: Vec<IntradayDay> = Vec::new();
    let mut i = 0usize;
    let mut prev_close: Option<f64> = None;
    while i < rows.len() {
        let date = rows[i].date.clone();
        let mut j = i;
        while j < rows.len() && rows[j].date == date {
            j += 1;
        }
        let day_rows = &rows[i..j];
        // Infer and verify the bar spacing.
        let interval = if day_rows.len() >= 2 {
            let step = day_rows[1].minute.checked_sub(day_rows[0].minute);
            let step = step.filter(|s| *s > 0).ok_or_else(|| {
                CliError::runtime(format!(
                    "{} line {}: bars out of order within {date}",
                    path.display(),
                    day_rows[1].line
                ))
            })?;
            for w in day_rows.windows(2) {
                if w[1].minute.checked_sub(w[0].minute) != Some(step) {
                    return Err(CliError::runtime(format!(
                        "{} line {}: missing or unevenly spaced bar in {date} (day rejected)",
                        path.display(),
                        w[1].line
                    )));
                }
            }
            step
        } else {
            1
        };
        let bars: Vec<Bar> = day_rows.iter().map(|r| r.bar).collect();
        let pc = prev_close.unwrap_or(bars[0].open);
        let day = IntradayDay::new(date, interval, bars, pc)
            .map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))?;
        prev_close = Some(day.daily_close());
        days.push(day);
        i = j;
    }
    Ok(days)
}

fn parse_time(raw: &str, path: &Path, line: u64) -> Result<u32, CliError> {
    let (h, m) = raw.split_once(':').ok_or_else(|| {
        CliError::runtime(format!(
            "{} line {line} column time: expected HH:MM, got `{raw}`",
            path.display()
        ))
    })?;
    let h: u32 = parse_field(h, path, line, "time")?;
    let m: u32 = parse_field(m, path, line, "time")?;
    if h > 23 || m > 59 {
        return Err(CliError::runtime(format!(
            "{} line {line} column time: out of range `{raw}`",
            path.display()
        )));
    }
    Ok(h * 60 + m)
}

/// A per-day modelling series: labels, percentage returns and the
/// volatility-unit measure. Header `date,r,x` (or `t,r,x`).
#[derive(Debug, Clone)]
pub struct DailyData {
    pub labels: Vec<String>,
    pub r: Vec<f64>,
    pub x: Vec<f64>,
}

pub fn read_daily(path: &Path) -> Result<DailyData, CliError> {
    let mut rdr = reader(path)?;
    let headers = rdr
        .headers()
        .map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))?
        .clone();
    let label_idx = header_index(&headers, &["date", "t"]).ok_or_else(|| {
        CliError::usage(format!("{}: missing `date` or `t` column", path.display()))
    })?;
    let r_idx = header_index(&headers, &["r", "return"])
        .ok_or_else(|| CliError::usage(format!("{}: missing `r` column", path.display())))?;
    let x_idx = header_index(&headers, &["x", "measure"])
        .ok_or_else(|| CliError::usage(format!("{}: missing `x` column", path.display())))?;

    let mut data = DailyData {
        labels: vec![],
        r: vec![],
        x: vec![],
    };
    for record in rdr.records() {
        let record = record.map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        data.labels.push(record.get(label_idx).unwrap_or("").to_string());
        data.r
            .push(parse_field(record.get(r_idx).unwrap_or(""), path, line, "r")?);
        data.x
            .push(parse_field(record.get(x_idx).unwrap_or(""), path, line, "x")?);
    }
    if data.r.is_empty() {
        return Err(CliError::runtime(format!("{}: no data rows", path.display())));
    }
    Ok(data)
}

/// Forecast CSV: `date,model,var,es,return`, one model per file.
pub fn read_forecasts(path: &Path) -> Result<ForecastSeries, CliError> {
    let mut rdr = reader(path)?;
    let headers = rdr
        .headers()
        .map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))?
        .clone();
    let cols = ["date", "model", "var", "es", "return"];
    let idx: Vec<usize> = cols
        .iter()
        .map(|name| {
            header_index(&headers, &[name]).ok_or_else(|| {
                CliError::usage(format!("{}: missing column `{name}`", path.display()))
            })
        })
        .collect::<Result<_, _>>()?;

    let mut model: Option<String> = None;
    let mut dates = vec![];
    let mut var = vec![];
    let mut es = vec![];
    let mut realized = vec![];
    for record in rdr.records() {
        let record = record.map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let row_model = record.get(idx[1]).unwrap_or("").to_string();
        match &model {
            None => model = Some(row_model),
            Some(m) if *m != row_model => {
                return Err(CliError::runtime(format!(
                    "{} line {line}: mixed models `{m}` and `{row_model}` in one file",
                    path.display()
                )));
            }
            _ => {}
        }
        dates.push(record.get(idx[0]).unwrap_or("").to_string());
        var.push(parse_field(record.get(idx[2]).unwrap_or(""), path, line, "var")?);
        es.push(parse_field(record.get(idx[3]).unwrap_or(""), path, line, "es")?);
        realized.push(parse_field(
            record.get(idx[4]).unwrap_or(""),
            path,
            line,
            "return",
        )?);
    }
    let model = model.ok_or_else(|| {
        CliError::runtime(format!("{}: no forecast rows", path.display()))
    })?;
    ForecastSeries::new(model, dates, var, es, realized)
        .map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))
}

/// Write an output file: metadata block, header, then rows.
pub fn write_csv(
    path: &Path,
    meta: &Metadata,
    header: &str,
    rows: impl Iterator<Item = String>,
) -> Result<(), CliError> {
    let mut out = meta.header();
    out.push_str(header);
    out.push('\n');
    for row in rows {
        out.push_str(&row);
        out.push('\n');
    }
    std::fs::write(path, out)
        .map_err(|e| CliError::runtime(format!("cannot write {}: {e}", path.display())))
}

pub fn write_forecasts(
    path: &Path,
    meta: &Metadata,
    fc: &ForecastSeries,
) -> Result<(), CliError> {
    use crate::config::fmt10;
    write_csv(
        path,
        meta,
        "date,model,var,es,return",
        (0..fc.len()).map(|t| {
            format!(
                "{},{},{},{},{}",
                fc.dates[t],
                fc.model_id,
                fmt10(fc.var[t]),
                fmt10(fc.es[t]),
                fmt10(fc.realized[t])
            )
        }),
    )
}
