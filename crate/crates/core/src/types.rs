//! Shared domain vocabulary: ticks, minute bars, pair configuration, fixing
//! windows and London-time handling.
//!
//! Timestamps are UTC milliseconds since the Unix epoch. London local time is
//! only ever a derived view (see [`london_offset`]).

use std::fmt;
use std::sync::Arc;

use chrono::{Datelike, Duration, NaiveDate, NaiveTime, Timelike, Weekday};
use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Exact decimal price. All fix-engine arithmetic stays on this type.
pub type Price = Decimal;

pub const MS_PER_SECOND: i64 = 1_000;
pub const MS_PER_MINUTE: i64 = 60 * MS_PER_SECOND;
pub const MS_PER_HOUR: i64 = 60 * MS_PER_MINUTE;
pub const MS_PER_DAY: i64 = 24 * MS_PER_HOUR;
pub const MINUTES_PER_DAY: usize = 1440;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TypeError {
    #[error("price must be positive, got {0}")]
    NonPositivePrice(String),
    #[error("invalid minute bar at {date} minute {minute}: {reason}")]
    InvalidBar {
        date: NaiveDate,
        minute: u16,
        reason: String,
    },
    #[error("invalid fix window: {0}")]
    InvalidWindow(String),
    #[error("invalid pair config for {pair}: {reason}")]
    InvalidPair { pair: String, reason: String },
}

/// Identifier of a market-data source (e.g. `EBS`, `Reuters`).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SourceId(Arc<str>);

impl SourceId {
    pub fn new(name: &str) -> Self {
        Self(Arc::from(name))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for SourceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for SourceId {
    fn from(s: &str) -> Self {
        Self::new(s)
    }
}

impl Serialize for SourceId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for SourceId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Ok(Self::new(&s))
    }
}

fn check_positive(p: Price) -> Result<Price, TypeError> {
    if p > Decimal::ZERO {
        Ok(p)
    } else {
        Err(TypeError::NonPositivePrice(p.to_string()))
    }
}

/// Best bid/ask quote from one source.
///
/// Crossed quotes (`ask < bid`) can be constructed so that raw feeds can be
/// represented faithfully; the quality filter drops them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Quote {
    pub timestamp: i64,
    pub bid: Price,
    pub ask: Price,
    pub source: SourceId,
}

impl Quote {
    pub fn new(timestamp: i64, bid: Price, ask: Price, source: SourceId) -> Result<Self, TypeError> {
        Ok(Self {
            timestamp,
            bid: check_positive(bid)?,
            ask: check_positive(ask)?,
            source,
        })
    }

    pub fn is_crossed(&self) -> bool {
        self.ask < self.bid
    }

    pub fn mid(&self) -> Price {
        (self.bid + self.ask) / Decimal::TWO
    }

    pub fn spread(&self) -> Price {
        self.ask - self.bid
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trade {
    pub timestamp: i64,
    pub price: Price,
    pub source: SourceId,
}

impl Trade {
    pub fn new(timestamp: i64, price: Price, source: SourceId) -> Result<Self, TypeError> {
        Ok(Self {
            timestamp,
            price: check_positive(price)?,
            source,
        })
    }
}

/// One event of a tick stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tick {
    Quote(Quote),
    Trade(Trade),
}

impl Tick {
    pub fn timestamp(&self) -> i64 {
        match self {
            Tick::Quote(q) => q.timestamp,
            Tick::Trade(t) => t.timestamp,
        }
    }

    pub fn source(&self) -> &SourceId {
        match self {
            Tick::Quote(q) => &q.source,
            Tick::Trade(t) => &t.source,
        }
    }

    /// Shift every price by `delta`.
    pub fn shifted(&self, delta: Price) -> Tick {
        match self {
            Tick::Quote(q) => Tick::Quote(Quote {
                bid: q.bid + delta,
                ask: q.ask + delta,
                ..q.clone()
            }),
            Tick::Trade(t) => Tick::Trade(Trade {
                price: t.price + delta,
                ..t.clone()
            }),
        }
    }
}

/// Per-minute HLOC record, labelled in London local time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinuteBar {
    pub date: NaiveDate,
    /// Minute of the (London) day, `0..1440`.
    pub minute: u16,
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
}

impl MinuteBar {
    pub fn new(
        date: NaiveDate,
        minute: u16,
        open: f64,
        high: f64,
        low: f64,
        close: f64,
    ) -> Result<Self, TypeError> {
        let invalid = |reason: &str| TypeError::InvalidBar {
            date,
            minute,
            reason: reason.to_string(),
        };
        if minute as usize >= MINUTES_PER_DAY {
            return Err(invalid("minute out of range"));
        }
        for p in [open, high, low, close] {
            if !(p.is_finite() && p > 0.0) {
                return Err(invalid("prices must be positive and finite"));
            }
        }
        if low > high {
            return Err(invalid("low above high"));
        }
        if !(low <= open && open <= high) {
            return Err(invalid("open outside [low, high]"));
        }
        if !(low <= close && close <= high) {
            return Err(invalid("close outside [low, high]"));
        }
        Ok(Self {
            date,
            minute,
            open,
            high,
            low,
            close,
        })
    }

    pub fn price(&self, stream: PriceStream) -> f64 {
        match stream {
            PriceStream::Open => self.open,
            PriceStream::High => self.high,
            PriceStream::Low => self.low,
            PriceStream::Close => self.close,
        }
    }

    /// Multiply every price by `factor`.
    pub fn scaled(&self, factor: f64) -> MinuteBar {
        MinuteBar {
            open: self.open * factor,
            high: self.high * factor,
            low: self.low * factor,
            close: self.close * factor,
            ..*self
        }
    }
}

/// Which HLOC field an analysis reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PriceStream {
    Open,
    High,
    Low,
    Close,
}

impl PriceStream {
    /// The three streams the analyses average over.
    pub const ANALYSED: [PriceStream; 3] = [PriceStream::High, PriceStream::Low, PriceStream::Close];

    pub fn as_str(self) -> &'static str {
        match self {
            PriceStream::Open => "open",
            PriceStream::High => "high",
            PriceStream::Low => "low",
            PriceStream::Close => "close",
        }
    }
}

impl fmt::Display for PriceStream {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for PriceStream {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "open" => Ok(Self::Open),
            "high" => Ok(Self::High),
            "low" => Ok(Self::Low),
            "close" => Ok(Self::Close),
            other => Err(format!("unknown price stream `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CurrencyClass {
    /// Liquid pairs fixed from trades with quote fallback.
    Trade,
    /// Illiquid pairs fixed from quote medians.
    Quote,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Methodology {
    /// ±30 s trade window / ±60 s quote window.
    Pre2015,
    /// ±150 s window for both classes.
    Post2015,
}

/// How trade data from several sources feeds the trade path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TradeSourcePolicy {
    /// First source alone; remaining sources pooled in only when the primary
    /// lacks enough trade intervals.
    PrimaryWithSupplement,
    /// All sources merged into one stream before sampling.
    Pooled,
}

/// Fixing configuration for one currency pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairConfig {
    pub pair: String,
    pub currency_class: CurrencyClass,
    /// Standard spread `S_S`, in price units.
    pub standard_spread: Price,
    /// Ordered source list; the first entry is the primary source.
    pub sources: Vec<String>,
    #[serde(default = "default_fix_time")]
    pub fix_time: NaiveTime,
    #[serde(default = "default_methodology")]
    pub methodology: Methodology,
    /// Valid trade intervals required before falling back to quotes.
    /// Defaults to half the interval count, rounded up.
    #[serde(default)]
    pub min_trade_intervals: Option<usize>,
    /// Maximum fractional deviation from the surveillance reference.
    #[serde(default = "default_quality_tolerance")]
    pub quality_tolerance: f64,
    /// Trade-currency sampling period override (ms) for the post-2015 window.
    #[serde(default)]
    pub sample_period_ms: Option<i64>,
    #[serde(default)]
    pub trade_source_policy: Option<TradeSourcePolicy>,
}

fn default_fix_time() -> NaiveTime {
    NaiveTime::from_hms_opt(16, 0, 0).expect("valid time")
}

fn default_methodology() -> Methodology {
    Methodology::Pre2015
}

fn default_quality_tolerance() -> f64 {
    0.01
}

impl PairConfig {
    pub fn new(pair: &str, class: CurrencyClass, standard_spread: Price, sources: &[&str]) -> Self {
        Self {
            pair: pair.to_string(),
            currency_class: class,
            standard_spread,
            sources: sources.iter().map(|s| s.to_string()).collect(),
            fix_time: default_fix_time(),
            methodology: default_methodology(),
            min_trade_intervals: None,
            quality_tolerance: default_quality_tolerance(),
            sample_period_ms: None,
            trade_source_policy: None,
        }
    }

    pub fn validate(&self) -> Result<(), TypeError> {
        let invalid = |reason: String| TypeError::InvalidPair {
            pair: self.pair.clone(),
            reason,
        };
        if self.standard_spread <= Decimal::ZERO {
            return Err(invalid("standard_spread must be positive".into()));
        }
        if self.sources.is_empty() {
            return Err(invalid("at least one source required".into()));
        }
        if !(self.quality_tolerance.is_finite() && self.quality_tolerance > 0.0) {
            return Err(invalid("quality_tolerance must be positive".into()));
        }
        let spec = self.window_spec()?;
        let total = spec.sample_count();
        if let Some(m) = self.min_trade_intervals {
            if m > total {
                return Err(invalid(format!(
                    "min_trade_intervals {m} exceeds the {total} sampling intervals"
                )));
            }
        }
        Ok(())
    }

    /// Window geometry implied by class and methodology.
    pub fn window_spec(&self) -> Result<WindowSpec, TypeError> {
        let mut spec = WindowSpec::standard(self.currency_class, self.methodology);
        if let (Some(p), CurrencyClass::Trade) = (self.sample_period_ms, self.currency_class) {
            spec.sample_period_ms = p;
        }
        spec.check()?;
        Ok(spec)
    }

    pub fn min_trade_intervals(&self) -> usize {
        let total = self.window_spec().map(|s| s.sample_count()).unwrap_or(61);
        self.min_trade_intervals.unwrap_or(total.div_ceil(2))
    }

    pub fn trade_source_policy(&self) -> TradeSourcePolicy {
        self.trade_source_policy.unwrap_or(match self.methodology {
            Methodology::Pre2015 => TradeSourcePolicy::PrimaryWithSupplement,
            Methodology::Post2015 => TradeSourcePolicy::Pooled,
        })
    }

    pub fn source_ids(&self) -> Vec<SourceId> {
        self.sources.iter().map(|s| SourceId::new(s)).collect()
    }

    /// Fixing window for `date`, centred on the London-local fix time.
    pub fn window_on(&self, date: NaiveDate) -> Result<FixWindow, TypeError> {
        let center = london_to_utc_ms(date, self.fix_time.num_seconds_from_midnight() as i64 * MS_PER_SECOND);
        self.window_spec()?.at(center)
    }
}

/// Window geometry without a position in time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowSpec {
    pub half_width_ms: i64,
    pub sample_period_ms: i64,
}

impl WindowSpec {
    pub fn standard(class: CurrencyClass, methodology: Methodology) -> Self {
        let half_width_ms = match (class, methodology) {
            (CurrencyClass::Trade, Methodology::Pre2015) => 30 * MS_PER_SECOND,
            (CurrencyClass::Quote, Methodology::Pre2015) => 60 * MS_PER_SECOND,
            (_, Methodology::Post2015) => 150 * MS_PER_SECOND,
        };
        let sample_period_ms = match class {
            CurrencyClass::Trade => MS_PER_SECOND,
            CurrencyClass::Quote => 15 * MS_PER_SECOND,
        };
        Self {
            half_width_ms,
            sample_period_ms,
        }
    }

    fn check(&self) -> Result<(), TypeError> {
        if self.sample_period_ms <= 0 || self.half_width_ms < 0 {
            return Err(TypeError::InvalidWindow(
                "sample period must be positive and half width non-negative".into(),
            ));
        }
        if self.half_width_ms % self.sample_period_ms != 0 {
            return Err(TypeError::InvalidWindow(format!(
                "half width {} ms is not a multiple of the {} ms sample period",
                self.half_width_ms, self.sample_period_ms
            )));
        }
        Ok(())
    }

    pub fn sample_count(&self) -> usize {
        (2 * self.half_width_ms / self.sample_period_ms + 1) as usize
    }

    pub fn at(self, center_ms: i64) -> Result<FixWindow, TypeError> {
        FixWindow::new(center_ms, self.half_width_ms, self.sample_period_ms)
    }
}

/// Data-sourcing window around a fix time.
///
/// Sampling point `i` sits at `center - half_width + i * sample_period`; the
/// interval it closes is `(point - sample_period, point]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FixWindow {
    center_ms: i64,
    half_width_ms: i64,
    sample_period_ms: i64,
}

impl FixWindow {
    pub fn new(center_ms: i64, half_width_ms: i64, sample_period_ms: i64) -> Result<Self, TypeError> {
        WindowSpec {
            half_width_ms,
            sample_period_ms,
        }
        .check()?;
        Ok(Self {
            center_ms,
            half_width_ms,
            sample_period_ms,
        })
    }

    pub fn center(&self) -> i64 {
        self.center_ms
    }

    pub fn half_width(&self) -> i64 {
        self.half_width_ms
    }

    pub fn sample_period(&self) -> i64 {
        self.sample_period_ms
    }

    pub fn sample_count(&self) -> usize {
        (2 * self.half_width_ms / self.sample_period_ms + 1) as usize
    }

    /// End (sampling instant) of interval `i`.
    pub fn interval_end(&self, i: usize) -> i64 {
        self.center_ms - self.half_width_ms + i as i64 * self.sample_period_ms
    }

    /// Index of the interval containing `ts`, if any.
    pub fn interval_of(&self, ts: i64) -> Option<usize> {
        let first_start = self.interval_end(0) - self.sample_period_ms;
        if ts <= first_start {
            return None;
        }
        // (start, end] intervals: shift by one ms so `end` maps into its own bucket.
        let idx = (ts - first_start - 1) / self.sample_period_ms;
        (idx < self.sample_count() as i64).then_some(idx as usize)
    }
}

fn last_sunday(year: i32, month: u32) -> NaiveDate {
    let first_next = if month == 12 {
        NaiveDate::from_ymd_opt(year + 1, 1, 1)
    } else {
        NaiveDate::from_ymd_opt(year, month + 1, 1)
    }
    .expect("valid date");
    let last = first_next - Duration::days(1);
    let back = last.weekday().num_days_from_sunday() as i64;
    last - Duration::days(back)
}

/// London offset from GMT in hours for a calendar date.
///
/// Summer time runs from the last Sunday in March up to (not including) the
/// last Sunday in October. The rule is applied per date; the 01:00 UTC
/// switch-over hour on the two transition Sundays is not modelled.
pub fn london_offset(date: NaiveDate) -> i64 {
    let start = last_sunday(date.year(), 3);
    let end = last_sunday(date.year(), 10);
    if date >= start && date < end {
        1
    } else {
        0
    }
}

fn epoch() -> NaiveDate {
    NaiveDate::from_ymd_opt(1970, 1, 1).expect("valid date")
}

/// UTC milliseconds of the London-local time `local_ms` after midnight on `date`.
/// `local_ms` may be negative or exceed a day; the offset of `date` is used.
pub fn london_to_utc_ms(date: NaiveDate, local_ms: i64) -> i64 {
    let days = (date - epoch()).num_days();
    days * MS_PER_DAY + local_ms - london_offset(date) * MS_PER_HOUR
}

/// London-local date and millisecond-of-day for a UTC timestamp.
pub fn utc_ms_to_london(ts: i64) -> (NaiveDate, i64) {
    let utc_date = epoch() + Duration::days(ts.div_euclid(MS_PER_DAY));
    let local = ts + london_offset(utc_date) * MS_PER_HOUR;
    let date = epoch() + Duration::days(local.div_euclid(MS_PER_DAY));
    (date, local.rem_euclid(MS_PER_DAY))
}

/// Bar label of a UTC timestamp: minute bars are centred on the minute, so
/// bar `m` collects events in `[m - 30 s, m + 30 s)` London time.
pub fn centred_minute_label(ts: i64) -> (NaiveDate, u16) {
    let (date, local_ms) = utc_ms_to_london(ts);
    let shifted = local_ms + 30 * MS_PER_SECOND;
    if shifted >= MS_PER_DAY {
        (date + Duration::days(1), ((shifted - MS_PER_DAY) / MS_PER_MINUTE) as u16)
    } else {
        (date, (shifted / MS_PER_MINUTE) as u16)
    }
}

pub fn is_weekday(date: NaiveDate) -> bool {
    !matches!(date.weekday(), Weekday::Sat | Weekday::Sun)
}

/// `HH:MM` label of a minute-of-day.
pub fn minute_label(minute: usize) -> String {
    format!("{:02}:{:02}", minute / 60, minute % 60)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn px(s: &str) -> Price {
        s.parse().unwrap()
    }

    fn d(y: i32, m: u32, day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, day).unwrap()
    }

    #[test]
    fn london_offset_examples() {
        assert_eq!(london_offset(d(2013, 7, 1)), 1);
        assert_eq!(london_offset(d(2013, 1, 15)), 0);
        // last Sunday of March 2013
        assert_eq!(d(2013, 3, 31).weekday(), Weekday::Sun);
        assert_eq!(london_offset(d(2013, 3, 31)), 1);
        assert_eq!(london_offset(d(2013, 3, 30)), 0);
        // last Sunday of October 2013 is the 27th
        assert_eq!(london_offset(d(2013, 10, 26)), 1);
        assert_eq!(london_offset(d(2013, 10, 27)), 0);
    }

    #[test]
    fn london_offset_matches_calendar_scan() {
        // Independent rule: scan the month backwards for the last Sunday.
        fn scan_last_sunday(y: i32, m: u32) -> NaiveDate {
            (1..=31)
                .rev()
                .filter_map(|day| NaiveDate::from_ymd_opt(y, m, day))
                .find(|dt| dt.weekday() == Weekday::Sun)
                .unwrap()
        }
        let mut date = d(1999, 1, 1);
        while date < d(2031, 1, 1) {
            let start = scan_last_sunday(date.year(), 3);
            let end = scan_last_sunday(date.year(), 10);
            let expected = i64::from(date >= start && date < end);
            assert_eq!(london_offset(date), expected, "{date}");
            assert_eq!(london_offset(date), london_offset(date));
            date += Duration::days(1);
        }
    }

    #[test]
    fn window_sample_counts() {
        let trade = WindowSpec::standard(CurrencyClass::Trade, Methodology::Pre2015);
        let quote = WindowSpec::standard(CurrencyClass::Quote, Methodology::Pre2015);
        let post = WindowSpec::standard(CurrencyClass::Trade, Methodology::Post2015);
        assert_eq!(trade.sample_count(), 61);
        assert_eq!(quote.sample_count(), 9);
        assert_eq!(post.sample_count(), 301);
        assert!(FixWindow::new(0, 30_000, 7_000).is_err());
    }

    #[test]
    fn interval_membership_is_left_open() {
        let w = FixWindow::new(60_000, 30_000, 1_000).unwrap();
        assert_eq!(w.interval_end(0), 30_000);
        assert_eq!(w.interval_of(29_000), None);
        assert_eq!(w.interval_of(29_001), Some(0));
        assert_eq!(w.interval_of(30_000), Some(0));
        assert_eq!(w.interval_of(30_001), Some(1));
        assert_eq!(w.interval_of(90_000), Some(60));
        assert_eq!(w.interval_of(90_001), None);
    }

    #[test]
    fn london_round_trip_and_centred_labels() {
        let summer = d(2013, 7, 1);
        let ts = london_to_utc_ms(summer, 16 * MS_PER_HOUR);
        assert_eq!(utc_ms_to_london(ts), (summer, 16 * MS_PER_HOUR));
        assert_eq!(centred_minute_label(ts), (summer, 960));
        assert_eq!(centred_minute_label(ts - 30_001), (summer, 959));
        assert_eq!(centred_minute_label(ts - 30_000), (summer, 960));
        assert_eq!(centred_minute_label(ts + 29_999), (summer, 960));
        // the last 30 s of a day belong to bar 0 of the next day
        let late = london_to_utc_ms(summer, MS_PER_DAY - 10_000);
        assert_eq!(centred_minute_label(late), (d(2013, 7, 2), 0));
    }

    #[test]
    fn bar_invariants() {
        let date = d(2012, 5, 3);
        assert!(MinuteBar::new(date, 959, 1.2, 1.2004, 1.1999, 1.2002).is_ok());
        assert!(MinuteBar::new(date, 959, 1.2, 1.1, 1.3, 1.2).is_err());
        assert!(MinuteBar::new(date, 1440, 1.2, 1.2, 1.2, 1.2).is_err());
        assert!(MinuteBar::new(date, 0, 0.0, 1.2, 0.0, 1.2).is_err());
    }

    #[test]
    fn quote_validation() {
        let s = SourceId::new("EBS");
        assert!(Quote::new(0, px("1.1"), px("1.1002"), s.clone()).is_ok());
        assert!(Quote::new(0, px("0"), px("1.1002"), s.clone()).is_err());
        assert!(Quote::new(0, px("1.2"), px("1.1"), s.clone()).unwrap().is_crossed());
        assert!(Trade::new(0, px("-1"), s).is_err());
    }

    #[test]
    fn pair_defaults() {
        let mut p = PairConfig::new("EURUSD", CurrencyClass::Trade, px("0.0002"), &["EBS"]);
        assert_eq!(p.min_trade_intervals(), 31);
        assert!(p.validate().is_ok());
        p.min_trade_intervals = Some(62);
        assert!(p.validate().is_err());
        p.min_trade_intervals = None;
        p.methodology = Methodology::Post2015;
        assert_eq!(p.min_trade_intervals(), 151);
        assert_eq!(p.trade_source_policy(), TradeSourcePolicy::Pooled);
    }
}
