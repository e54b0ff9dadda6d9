//! Realized volatility measures from intraday OHLC bars.
//!
//! Daily estimators (squared return, Parkinson range, overnight-adjusted
//! range) plus the high-frequency realized variance (RV) and realized
//! range (RR), with the two standard microstructure-noise treatments:
//! trailing-window scaling against a daily measure and offset-grid
//! sub-sampling.
//!
//! All kernels work in squared-log (variance) units. The square-root
//! transform that turns a measure into a model input happens at series
//! assembly time, not here.

use crate::error::{Error, Result};

/// Range normalization constant `4 ln 2` from the extreme-value variance
/// of a driftless Brownian bridge.
const RANGE_NORM: f64 = 4.0 * std::f64::consts::LN_2;

/// Which estimator produced a [`MeasureSeries`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MeasureKind {
    /// Squared close-to-close log return.
    Return2,
    /// Squared daily high-low log range, normalized by `4 ln 2`.
    Range2,
    /// Squared overnight-adjusted range, normalized by `4 ln 2`.
    RangeOvernight2,
    /// Realized variance.
    Rv,
    /// Realized range.
    Rr,
    /// RV scaled by the trailing daily-to-HF ratio.
    ScaledRv,
    /// RR scaled by the trailing daily-to-HF ratio.
    ScaledRr,
    /// Sub-sampled RV.
    SubRv,
    /// Sub-sampled RR.
    SubRr,
}

impl MeasureKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            MeasureKind::Return2 => "return2",
            MeasureKind::Range2 => "range2",
            MeasureKind::RangeOvernight2 => "rangeovernight2",
            MeasureKind::Rv => "rv",
            MeasureKind::Rr => "rr",
            MeasureKind::ScaledRv => "scaledrv",
            MeasureKind::ScaledRr => "scaledrr",
            MeasureKind::SubRv => "subrv",
            MeasureKind::SubRr => "subrr",
        }
    }

    pub fn parse(s: &str) -> Option<MeasureKind> {
        match s {
            "return2" => Some(MeasureKind::Return2),
            "range2" => Some(MeasureKind::Range2),
            "rangeovernight2" => Some(MeasureKind::RangeOvernight2),
            "rv" => Some(MeasureKind::Rv),
            "rr" => Some(MeasureKind::Rr),
            "scaledrv" => Some(MeasureKind::ScaledRv),
            "scaledrr" => Some(MeasureKind::ScaledRr),
            "subrv" => Some(MeasureKind::SubRv),
            "subrr" => Some(MeasureKind::SubRr),
            _ => None,
        }
    }
}

/// One intraday OHLC bar. Prices must be strictly positive with
/// `low <= min(open, close)` and `high >= max(open, close)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bar {
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
}

impl Bar {
    pub fn new(open: f64, high: f64, low: f64, close: f64) -> Result<Bar> {
        let bar = Bar {
            open,
            high,
            low,
            close,
        };
        bar.validate()?;
        Ok(bar)
    }

    fn validate(&self) -> Result<()> {
        for p in [self.open, self.high, self.low, self.close] {
            if !(p > 0.0) || !p.is_finite() {
                return Err(Error::NonPositivePrice(p));
            }
        }
        if self.high < self.low
            || self.low > self.open.min(self.close)
            || self.high < self.open.max(self.close)
        {
            return Err(Error::InvertedBar {
                high: self.high,
                low: self.low,
            });
        }
        Ok(())
    }
}

/// One trading day of regularly spaced bars.
///
/// Bars are assumed contiguous and equally spaced at
/// `bar_interval_minutes`; days with missing bars must be rejected at
/// ingestion rather than imputed.
#[derive(Debug, Clone)]
pub struct IntradayDay {
    pub date: String,
    pub bar_interval_minutes: u32,
    pub bars: Vec<Bar>,
    pub prev_close: f64,
}

impl IntradayDay {
    pub fn new(
        date: impl Into<String>,
        bar_interval_minutes: u32,
        bars: Vec<Bar>,
        prev_close: f64,
    ) -> Result<IntradayDay> {
        if bars.is_empty() {
            return Err(Error::EmptyDay);
        }
        if bar_interval_minutes == 0 {
            return Err(Error::InvalidConfig("bar interval must be positive".into()));
        }
        if !(prev_close > 0.0) || !prev_close.is_finite() {
            return Err(Error::NonPositivePrice(prev_close));
        }
        for bar in &bars {
            bar.validate()?;
        }
        Ok(IntradayDay {
            date: date.into(),
            bar_interval_minutes,
            bars,
            prev_close,
        })
    }

    /// Day-level high, low and close.
    pub fn daily_high(&self) -> f64 {
        self.bars.iter().map(|b| b.high).fold(f64::MIN, f64::max)
    }

    pub fn daily_low(&self) -> f64 {
        self.bars.iter().map(|b| b.low).fold(f64::MAX, f64::min)
    }

    pub fn daily_close(&self) -> f64 {
        self.bars.last().expect("non-empty").close
    }

    /// The intraday log-price grid: first bar open, then each bar close.
    fn log_closes(&self) -> Vec<f64> {
        let mut grid = Vec::with_capacity(self.bars.len() + 1);
        grid.push(self.bars[0].open.ln());
        grid.extend(self.bars.iter().map(|b| b.close.ln()));
        grid
    }
}

/// Per-day values of one measure, aligned with their dates.
#[derive(Debug, Clone)]
pub struct MeasureSeries {
    pub dates: Vec<String>,
    pub values: Vec<f64>,
    pub kind: MeasureKind,
}

impl MeasureSeries {
    pub fn new(dates: Vec<String>, values: Vec<f64>, kind: MeasureKind) -> Result<MeasureSeries> {
        if dates.len() != values.len() {
            return Err(Error::LengthMismatch {
                left: dates.len(),
                right: values.len(),
            });
        }
        Ok(MeasureSeries {
            dates,
            values,
            kind,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Percentage log return `100 (ln c_t - ln c_{t-1})`.
pub fn daily_return(close: f64, close_prev: f64) -> Result<f64> {
    if !(close > 0.0) || !close.is_finite() {
        return Err(Error::NonPositivePrice(close));
    }
    if !(close_prev > 0.0) || !close_prev.is_finite() {
        return Err(Error::NonPositivePrice(close_prev));
    }
    Ok(100.0 * (close.ln() - close_prev.ln()))
}

/// Parkinson range estimator `(ln H - ln L)^2 / (4 ln 2)`.
pub fn parkinson_range_sq(high: f64, low: f64) -> Result<f64> {
    if !(low > 0.0) || !low.is_finite() || !high.is_finite() {
        return Err(Error::NonPositivePrice(low.min(high)));
    }
    if high < low {
        return Err(Error::InvertedBar { high, low });
    }
    let r = high.ln() - low.ln();
    Ok(r * r / RANGE_NORM)
}

/// Log range widened to include the previous close:
/// `ln max(H, C_prev) - ln min(L, C_prev)`.
pub fn range_overnight(high: f64, low: f64, prev_close: f64) -> Result<f64> {
    for p in [high, low, prev_close] {
        if !(p > 0.0) || !p.is_finite() {
            return Err(Error::NonPositivePrice(p));
        }
    }
    if high < low {
        return Err(Error::InvertedBar { high, low });
    }
    Ok(high.max(prev_close).ln() - low.min(prev_close).ln())
}

/// Squared overnight-adjusted range normalized by `4 ln 2`.
pub fn range_overnight_sq(high: f64, low: f64, prev_close: f64) -> Result<f64> {
    let r = range_overnight(high, low, prev_close)?;
    Ok(r * r / RANGE_NORM)
}

/// Realized variance: sum of squared log increments of the intraday
/// close grid. The first increment is taken from the day's first bar
/// open, so RV is strictly intraday; the overnight jump is left to the
/// overnight-adjusted range.
pub fn realized_variance(day: &IntradayDay) -> Result<f64> {
    let grid = day.log_closes();
    Ok(grid.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum())
}

/// Realized range: sum of squared per-bar log high-low ranges over
/// `4 ln 2`.
pub fn realized_range(day: &IntradayDay) -> Result<f64> {
    let mut sum = 0.0;
    for bar in &day.bars {
        if bar.high < bar.low {
            return Err(Error::InvertedBar {
                high: bar.high,
                low: bar.low,
            });
        }
        let r = bar.high.ln() - bar.low.ln();
        sum += r * r;
    }
    Ok(sum / RANGE_NORM)
}

fn subsample_grid(day: &IntradayDay, coarse_minutes: u32, fine_minutes: u32) -> Result<usize> {
    if fine_minutes != day.bar_interval_minutes {
        return Err(Error::InvalidConfig(format!(
            "bar data is at {} min, not the requested fine interval {} min",
            day.bar_interval_minutes, fine_minutes
        )));
    }
    if coarse_minutes == 0 || fine_minutes == 0 || coarse_minutes % fine_minutes != 0 {
        return Err(Error::IndivisibleFrequencies {
            coarse: coarse_minutes,
            fine: fine_minutes,
        });
    }
    let n_k = (coarse_minutes / fine_minutes) as usize;
    if day.bars.len() < n_k {
        return Err(Error::InsufficientBars {
            have: day.bars.len(),
            need: n_k,
        });
    }
    Ok(n_k)
}

/// Sub-sampled realized variance: the coarse-grid RV averaged over all
/// fine-grid offsets.
///
/// Each offset grid keeps only complete coarse windows; offsets whose
/// grid has no complete window (possible when the coarse window nearly
/// spans the day) drop out of the average.
pub fn subsample_rv(day: &IntradayDay, coarse_minutes: u32, fine_minutes: u32) -> Result<f64> {
    let n_k = subsample_grid(day, coarse_minutes, fine_minutes)?;
    let grid = day.log_closes();
    let n = grid.len() - 1;
    let mut total = 0.0;
    let mut offsets = 0usize;
    for i in 0..n_k {
        let mut rv_i = 0.0;
        let mut m = 1usize;
        let mut any = false;
        while i + m * n_k <= n {
            let d = grid[i + m * n_k] - grid[i + (m - 1) * n_k];
            rv_i += d * d;
            any = true;
            m += 1;
        }
        if any {
            total += rv_i;
            offsets += 1;
        }
    }
    debug_assert!(offsets > 0);
    Ok(total / offsets as f64)
}

/// Sub-sampled realized range: per-window highs/lows are the max/min of
/// the fine-bar highs/lows inside each coarse window, and the offset
/// average is normalized by `4 ln 2`.
pub fn subsample_rr(day: &IntradayDay, coarse_minutes: u32, fine_minutes: u32) -> Result<f64> {
    let n_k = subsample_grid(day, coarse_minutes, fine_minutes)?;
    let n = day.bars.len();
    let mut total = 0.0;
    let mut offsets = 0usize;
    for i in 0..n_k {
        let mut rr_i = 0.0;
        let mut m = 1usize;
        let mut any = false;
        while i + m * n_k <= n {
            let window = &day.bars[i + (m - 1) * n_k..i + m * n_k];
            let high = window.iter().map(|b| b.high).fold(f64::MIN, f64::max);
            let low = window.iter().map(|b| b.low).fold(f64::MAX, f64::min);
            let r = high.ln() - low.ln();
            rr_i += r * r;
            any = true;
            m += 1;
        }
        if any {
            total += rr_i;
            offsets += 1;
        }
    }
    debug_assert!(offsets > 0);
    Ok(total / (RANGE_NORM * offsets as f64))
}

/// Scale a high-frequency measure by the trailing `q`-day ratio of a
/// daily measure to the high-frequency one:
/// `out_t = (sum_{l=1..q} daily_{t-l} / sum_{l=1..q} hf_{t-l}) hf_t`.
///
/// The output starts at index `q` of the input (the first day with a
/// full trailing window); the start offset is returned alongside.
pub fn scale_measure(
    hf: &MeasureSeries,
    daily: &MeasureSeries,
    q: usize,
) -> Result<(MeasureSeries, usize)> {
    if q == 0 {
        return Err(Error::InvalidConfig("scaling window q must be >= 1".into()));
    }
    if hf.len() != daily.len() {
        return Err(Error::LengthMismatch {
            left: hf.len(),
            right: daily.len(),
        });
    }
    for (i, (a, b)) in hf.dates.iter().zip(daily.dates.iter()).enumerate() {
        if a != b {
            return Err(Error::DateMismatch(i));
        }
    }
    if hf.len() < q + 1 {
        return Err(Error::InsufficientHistory {
            need: q + 1,
            have: hf.len(),
        });
    }
    let kind = match hf.kind {
        MeasureKind::Rv | MeasureKind::SubRv => MeasureKind::ScaledRv,
        MeasureKind::Rr | MeasureKind::SubRr => MeasureKind::ScaledRr,
        other => other,
    };
    let mut dates = Vec::with_capacity(hf.len() - q);
    let mut values = Vec::with_capacity(hf.len() - q);
    for t in q..hf.len() {
        let hf_sum: f64 = hf.values[t - q..t].iter().sum();
        let daily_sum: f64 = daily.values[t - q..t].iter().sum();
        if !(hf_sum > 0.0) {
            return Err(Error::DegenerateScale(t));
        }
        dates.push(hf.dates[t].clone());
        values.push(daily_sum / hf_sum * hf.values[t]);
    }
    Ok((MeasureSeries { dates, values, kind }, q))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn flat_bar(p: f64) -> Bar {
        Bar::new(p, p, p, p).unwrap()
    }

    fn day_from_closes(closes: &[f64], interval: u32) -> IntradayDay {
        // Bars touching their neighbours: open = previous close.
        let mut bars = Vec::new();
        let mut prev = closes[0];
        for &c in &closes[1..] {
            bars.push(Bar::new(prev, prev.max(c), prev.min(c), c).unwrap());
            prev = c;
        }
        IntradayDay::new("2020-01-02", interval, bars, closes[0]).unwrap()
    }

    #[test]
    fn daily_return_examples() {
        assert_eq!(daily_return(100.0, 100.0).unwrap(), 0.0);
        // 100 ln(1.01), high-precision reference.
        assert_relative_eq!(
            daily_return(101.0, 100.0).unwrap(),
            0.99503308531681,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            daily_return(100.0, 101.0).unwrap(),
            -daily_return(101.0, 100.0).unwrap(),
            max_relative = 1e-15
        );
        assert!(daily_return(0.0, 100.0).is_err());
        assert!(daily_return(100.0, -1.0).is_err());
    }

    #[test]
    fn parkinson_examples() {
        assert_eq!(parkinson_range_sq(5.0, 5.0).unwrap(), 0.0);
        // H = e L gives 1 / (4 ln 2) = 0.36067376022224085.
        let v = parkinson_range_sq(std::f64::consts::E * 2.0, 2.0).unwrap();
        assert_relative_eq!(v, 0.36067376022224085, max_relative = 1e-12);
        assert!(parkinson_range_sq(1.0, 2.0).is_err());
    }

    #[test]
    fn parkinson_scale_invariant() {
        let a = parkinson_range_sq(103.0, 99.0).unwrap();
        let b = parkinson_range_sq(103.0 * 7.3, 99.0 * 7.3).unwrap();
        assert_relative_eq!(a, b, max_relative = 1e-12);
    }

    #[test]
    fn range_overnight_branches() {
        // prev close inside [low, high]: plain range.
        let r = range_overnight(102.0, 99.0, 100.0).unwrap();
        assert_relative_eq!(r, (102.0f64 / 99.0).ln(), max_relative = 1e-14);
        // prev close above the high.
        let r = range_overnight(102.0, 99.0, 105.0).unwrap();
        assert_relative_eq!(r, (105.0f64 / 99.0).ln(), max_relative = 1e-14);
        // prev close below the low.
        let r = range_overnight(102.0, 99.0, 95.0).unwrap();
        assert_relative_eq!(r, (102.0f64 / 95.0).ln(), max_relative = 1e-14);
        let sq = range_overnight_sq(102.0, 99.0, 105.0).unwrap();
        assert_relative_eq!(
            sq,
            (105.0f64 / 99.0).ln().powi(2) / (4.0 * std::f64::consts::LN_2),
            max_relative = 1e-14
        );
    }

    #[test]
    fn rv_examples() {
        let day = day_from_closes(&[100.0, 100.0, 100.0], 5);
        assert_eq!(realized_variance(&day).unwrap(), 0.0);

        let day = day_from_closes(&[100.0, 100.0, 101.0], 5);
        assert_relative_eq!(
            realized_variance(&day).unwrap(),
            (1.01f64).ln().powi(2),
            max_relative = 1e-14
        );

        // Single bar: squared open-to-close log return.
        let day = IntradayDay::new(
            "2020-01-02",
            30,
            vec![Bar::new(100.0, 103.0, 99.0, 102.0).unwrap()],
            100.0,
        )
        .unwrap();
        assert_relative_eq!(
            realized_variance(&day).unwrap(),
            (102.0f64 / 100.0).ln().powi(2),
            max_relative = 1e-14
        );
    }

    #[test]
    fn rr_examples() {
        let day = IntradayDay::new(
            "2020-01-02",
            5,
            vec![flat_bar(100.0), flat_bar(100.0)],
            100.0,
        )
        .unwrap();
        assert_eq!(realized_range(&day).unwrap(), 0.0);

        let e = std::f64::consts::E;
        let day = IntradayDay::new(
            "2020-01-02",
            30,
            vec![Bar::new(2.0, 2.0 * e, 2.0, 2.0).unwrap()],
            2.0,
        )
        .unwrap();
        assert_relative_eq!(
            realized_range(&day).unwrap(),
            parkinson_range_sq(2.0 * e, 2.0).unwrap(),
            max_relative = 1e-14
        );
    }

    #[test]
    fn empty_day_rejected() {
        assert!(matches!(
            IntradayDay::new("2020-01-02", 5, vec![], 100.0),
            Err(Error::EmptyDay)
        ));
    }

    #[test]
    fn subsample_single_offset_equals_plain() {
        let closes: Vec<f64> = (0..13).map(|i| 100.0 + (i as f64 * 0.77).sin()).collect();
        let day = day_from_closes(&closes, 5);
        // Coarse == fine: bitwise identical summation order.
        assert_eq!(
            subsample_rv(&day, 5, 5).unwrap(),
            realized_variance(&day).unwrap()
        );
        assert_eq!(
            subsample_rr(&day, 5, 5).unwrap(),
            realized_range(&day).unwrap()
        );
    }

    #[test]
    fn subsample_constant_path_zero() {
        let day = IntradayDay::new("2020-01-02", 1, vec![flat_bar(50.0); 30], 50.0).unwrap();
        assert_eq!(subsample_rv(&day, 5, 1).unwrap(), 0.0);
        assert_eq!(subsample_rr(&day, 5, 1).unwrap(), 0.0);
    }

    #[test]
    fn subsample_rr_whole_day_window() {
        // A coarse window spanning the whole day degenerates to the daily
        // Parkinson estimate: only offset 0 has a complete window.
        let mut bars = Vec::new();
        for i in 0..6u32 {
            let base = 100.0 + i as f64;
            bars.push(Bar::new(base, base + 2.0, base - 1.0, base + 1.0).unwrap());
        }
        let day = IntradayDay::new("2020-01-02", 5, bars, 100.0).unwrap();
        let high = day.daily_high();
        let low = day.daily_low();
        assert_relative_eq!(
            subsample_rr(&day, 30, 5).unwrap(),
            parkinson_range_sq(high, low).unwrap(),
            max_relative = 1e-14
        );
    }

    #[test]
    fn subsample_mean_of_offset_grids() {
        // The sub-sampled measure is the mean of independently computed
        // offset-grid measures.
        let closes: Vec<f64> = (0..31)
            .map(|i| 100.0 * (1.0 + 0.001 * (i as f64 * 1.3).sin()))
            .collect();
        let day = day_from_closes(&closes, 1);
        let n_k = 5usize;
        let grid: Vec<f64> = {
            let mut g = vec![day.bars[0].open.ln()];
            g.extend(day.bars.iter().map(|b| b.close.ln()));
            g
        };
        let n = grid.len() - 1;
        let mut per_offset = Vec::new();
        for i in 0..n_k {
            let mut rv = 0.0;
            let mut m = 1;
            while i + m * n_k <= n {
                rv += (grid[i + m * n_k] - grid[i + (m - 1) * n_k]).powi(2);
                m += 1;
            }
            per_offset.push(rv);
        }
        let mean = per_offset.iter().sum::<f64>() / per_offset.len() as f64;
        assert_relative_eq!(
            subsample_rv(&day, 5, 1).unwrap(),
            mean,
            max_relative = 1e-12
        );
    }

    #[test]
    fn subsample_rejects_bad_frequencies() {
        let day = day_from_closes(&[100.0, 101.0, 100.5], 2);
        assert!(matches!(
            subsample_rv(&day, 5, 2),
            Err(Error::IndivisibleFrequencies { .. })
        ));
        assert!(subsample_rv(&day, 4, 1).is_err()); // wrong fine interval
        let short = day_from_closes(&[100.0, 101.0], 1);
        assert!(matches!(
            subsample_rv(&short, 5, 1),
            Err(Error::InsufficientBars { .. })
        ));
    }

    fn series(kind: MeasureKind, values: &[f64]) -> MeasureSeries {
        let dates = (0..values.len()).map(|i| format!("d{i:03}")).collect();
        MeasureSeries::new(dates, values.to_vec(), kind).unwrap()
    }

    #[test]
    fn scale_identity_and_constant_ratio() {
        let hf = series(MeasureKind::Rv, &[1.0, 2.0, 3.0, 4.0, 5.0]);
        let (out, start) = scale_measure(&hf, &hf, 2).unwrap();
        assert_eq!(start, 2);
        assert_eq!(out.values, vec![3.0, 4.0, 5.0]);
        assert_eq!(out.dates, vec!["d002", "d003", "d004"]);

        let daily = series(MeasureKind::Return2, &[2.0, 4.0, 6.0, 8.0, 10.0]);
        let (out, _) = scale_measure(&hf, &daily, 2).unwrap();
        for (o, h) in out.values.iter().zip(&hf.values[2..]) {
            assert_relative_eq!(*o, 2.0 * h, max_relative = 1e-14);
        }
    }

    #[test]
    fn scale_hand_example() {
        // q = 2, hf = (1, 1, 4), daily = (2, 2, .) gives (4/2) * 4 = 8.
        let hf = series(MeasureKind::Rv, &[1.0, 1.0, 4.0]);
        let daily = series(MeasureKind::Return2, &[2.0, 2.0, 0.0]);
        let (out, start) = scale_measure(&hf, &daily, 2).unwrap();
        assert_eq!(start, 2);
        assert_eq!(out.values, vec![8.0]);
        assert_eq!(out.kind, MeasureKind::ScaledRv);
    }

    #[test]
    fn scale_errors() {
        let hf = series(MeasureKind::Rv, &[0.0, 0.0, 4.0]);
        let daily = series(MeasureKind::Return2, &[2.0, 2.0, 0.0]);
        assert!(matches!(
            scale_measure(&hf, &daily, 2),
            Err(Error::DegenerateScale(2))
        ));
        let short = series(MeasureKind::Rv, &[1.0, 2.0]);
        let short_daily = series(MeasureKind::Return2, &[1.0, 2.0]);
        assert!(matches!(
            scale_measure(&short, &short_daily, 2),
            Err(Error::InsufficientHistory { .. })
        ));
    }

    #[test]
    fn measures_nonnegative_and_finite() {
        let closes: Vec<f64> = (0..61)
            .map(|i| 100.0 * (1.0 + 0.002 * ((i * 17 % 13) as f64 - 6.0)))
            .collect();
        let day = day_from_closes(&closes, 1);
        for v in [
            realized_variance(&day).unwrap(),
            realized_range(&day).unwrap(),
            subsample_rv(&day, 5, 1).unwrap(),
            subsample_rr(&day, 5, 1).unwrap(),
        ] {
            assert!(v.is_finite() && v >= 0.0);
        }
    }
}
