//! CSV ingestion for minute bars and ticks, the completeness filter and the
//! split into the two analysis periods.
//!
//! Bar CSV: `date,time,open,high,low,close` with ISO dates and `HH:MM` times
//! in London local time. A first line `# tz=UTC` declares UTC times instead;
//! they are relabelled to London time on load.
//!
//! Tick CSV: `timestamp_ms,kind,bid,ask,price,source` with `kind` `Q` (bid
//! and ask filled, price empty) or `T` (price filled, bid and ask empty).

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use chrono::{NaiveDate, NaiveTime, Timelike};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{
    utc_ms_to_london, MinuteBar, Price, Quote, SourceId, Tick, Trade, TypeError, MINUTES_PER_DAY,
    MS_PER_MINUTE,
};

pub const BAR_HEADER: [&str; 6] = ["date", "time", "open", "high", "low", "close"];
pub const TICK_HEADER: [&str; 6] = ["timestamp_ms", "kind", "bid", "ask", "price", "source"];

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("unexpected header `{found}`, expected `{expected}`")]
    Header { found: String, expected: String },
    #[error("line {line}: malformed row: {reason}")]
    Parse { line: u64, reason: String },
    #[error("line {line}: invalid row: {reason}")]
    Validation { line: u64, reason: String },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IngestError + '_ {
    move |source| IngestError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Bars as parsed: per date, per minute. Days may be incomplete.
pub type RawDayMap = BTreeMap<NaiveDate, BTreeMap<u16, MinuteBar>>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TimeBasis {
    #[default]
    London,
    Utc,
}

fn time_basis(first_line: &str) -> TimeBasis {
    let directive = first_line.trim_start_matches('#').trim().to_ascii_lowercase();
    if first_line.starts_with('#') && directive.replace(' ', "") == "tz=utc" {
        TimeBasis::Utc
    } else {
        TimeBasis::London
    }
}

fn check_header(headers: &csv::StringRecord, expected: &[&str]) -> Result<(), IngestError> {
    let found: Vec<&str> = headers.iter().map(str::trim).collect();
    if found != expected {
        return Err(IngestError::Header {
            found: found.join(","),
            expected: expected.join(","),
        });
    }
    Ok(())
}

fn line_of(record: &csv::StringRecord) -> u64 {
    record.position().map_or(0, |p| p.line())
}

fn parse_minute(raw: &str) -> Option<u16> {
    let t = NaiveTime::parse_from_str(raw, "%H:%M")
        .or_else(|_| NaiveTime::parse_from_str(raw, "%H:%M:%S"))
        .ok()?;
    if t.second() != 0 {
        return None;
    }
    Some((t.hour() * 60 + t.minute()) as u16)
}

/// Parse a bar CSV file.
pub fn parse_bar_csv(path: impl AsRef<Path>) -> Result<RawDayMap, IngestError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(io_err(path))?;
    parse_bar_reader(file)
}

/// Parse bar CSV text from any reader. An empty input yields an empty map.
pub fn parse_bar_reader(reader: impl Read) -> Result<RawDayMap, IngestError> {
    let mut reader = BufReader::new(reader);
    let mut first = String::new();
    reader.read_line(&mut first).map_err(|source| IngestError::Io {
        path: "<reader>".into(),
        source,
    })?;
    if first.trim().is_empty() {
        return Ok(RawDayMap::new());
    }
    let basis = time_basis(&first);
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(first.as_bytes().chain(reader));
    check_header(rdr.headers()?, &BAR_HEADER)?;

    let mut out = RawDayMap::new();
    for record in rdr.records() {
        let record = record.map_err(|e| IngestError::Parse {
            line: e.position().map_or(0, |p| p.line()),
            reason: e.to_string(),
        })?;
        let line = line_of(&record);
        let malformed = |reason: String| IngestError::Parse { line, reason };
        let date = NaiveDate::parse_from_str(&record[0], "%Y-%m-%d")
            .map_err(|_| malformed(format!("bad date `{}`", &record[0])))?;
        let minute = parse_minute(&record[1]).ok_or_else(|| malformed(format!("bad time `{}`", &record[1])))?;
        let mut prices = [0.0f64; 4];
        for (slot, raw) in prices.iter_mut().zip(record.iter().skip(2)) {
            *slot = raw
                .parse::<f64>()
                .map_err(|_| malformed(format!("bad price `{raw}`")))?;
        }
        let (date, minute) = match basis {
            TimeBasis::London => (date, minute),
            TimeBasis::Utc => {
                let midnight = date.and_time(NaiveTime::MIN).and_utc().timestamp_millis();
                let utc = midnight + minute as i64 * MS_PER_MINUTE;
                let (d, ms) = utc_ms_to_london(utc);
                (d, (ms / MS_PER_MINUTE) as u16)
            }
        };
        let [open, high, low, close] = prices;
        let bar = MinuteBar::new(date, minute, open, high, low, close).map_err(|e| IngestError::Validation {
            line,
            reason: e.to_string(),
        })?;
        if out.entry(date).or_default().insert(minute, bar).is_some() {
            return Err(IngestError::Validation {
                line,
                reason: format!("duplicate bar for {date} minute {minute}"),
            });
        }
    }
    Ok(out)
}

/// Write bars in London time, in the order given.
pub fn write_bar_csv<'a>(writer: impl Write, bars: impl IntoIterator<Item = &'a MinuteBar>) -> Result<(), IngestError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(BAR_HEADER)?;
    for b in bars {
        w.write_record([
            b.date.format("%Y-%m-%d").to_string(),
            crate::types::minute_label(b.minute as usize),
            b.open.to_string(),
            b.high.to_string(),
            b.low.to_string(),
            b.close.to_string(),
        ])?;
    }
    w.flush().map_err(|source| IngestError::Io {
        path: "<writer>".into(),
        source,
    })?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PeriodTag {
    #[serde(rename = "pre-2013-06")]
    Pre,
    #[serde(rename = "post-2013-06")]
    Post,
    #[serde(rename = "full")]
    Full,
}

/// One complete day: exactly 1440 bars, indexed by minute.
#[derive(Debug, Clone, PartialEq)]
pub struct DayBars {
    pub date: NaiveDate,
    bars: Vec<MinuteBar>,
}

impl DayBars {
    /// Accepts exactly one bar per minute `0..1440`, in any order.
    pub fn new(date: NaiveDate, bars: impl IntoIterator<Item = MinuteBar>) -> Option<Self> {
        let mut slots: Vec<Option<MinuteBar>> = vec![None; MINUTES_PER_DAY];
        for b in bars {
            if b.date != date || slots[b.minute as usize].replace(b).is_some() {
                return None;
            }
        }
        let bars = slots.into_iter().collect::<Option<Vec<_>>>()?;
        Some(Self { date, bars })
    }

    pub fn bars(&self) -> &[MinuteBar] {
        &self.bars
    }

    pub fn price(&self, minute: usize, stream: crate::types::PriceStream) -> f64 {
        self.bars[minute].price(stream)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub pair: String,
    pub days: Vec<DayBars>,
    pub period: PeriodTag,
}

impl Dataset {
    pub fn is_empty(&self) -> bool {
        self.days.is_empty()
    }

    pub fn len(&self) -> usize {
        self.days.len()
    }

    pub fn to_raw(&self) -> RawDayMap {
        self.days
            .iter()
            .map(|d| (d.date, d.bars.iter().map(|b| (b.minute, *b)).collect()))
            .collect()
    }

    pub fn write_csv(&self, writer: impl Write) -> Result<(), IngestError> {
        write_bar_csv(writer, self.days.iter().flat_map(|d| d.bars.iter()))
    }
}

/// Result of the completeness filter.
#[derive(Debug, Clone, PartialEq)]
pub struct Completeness {
    pub dataset: Dataset,
    /// Days dropped for missing minutes.
    pub excluded: Vec<NaiveDate>,
}

/// Keep only days with a bar for every one of the 1440 minutes.
pub fn filter_complete_days(raw: &RawDayMap, pair: &str) -> Completeness {
    let mut days = Vec::new();
    let mut excluded = Vec::new();
    for (date, bars) in raw {
        if bars.is_empty() {
            continue;
        }
        match DayBars::new(*date, bars.values().copied()) {
            Some(day) => days.push(day),
            None => excluded.push(*date),
        }
    }
    if !excluded.is_empty() {
        tracing::warn!(pair, excluded = excluded.len(), "dropped incomplete days");
    }
    if days.is_empty() && !raw.is_empty() {
        tracing::warn!(pair, "no complete day left after filtering");
    }
    Completeness {
        dataset: Dataset {
            pair: pair.to_string(),
            days,
            period: PeriodTag::Full,
        },
        excluded,
    }
}

/// Last day of the first analysis period.
pub fn period_boundary() -> NaiveDate {
    NaiveDate::from_ymd_opt(2013, 5, 31).expect("valid date")
}

/// Split into days up to 2013-05-31 and days from 2013-06-01.
pub fn split_periods(dataset: &Dataset) -> (Dataset, Dataset) {
    let (pre, post): (Vec<DayBars>, Vec<DayBars>) =
        dataset.days.iter().cloned().partition(|d| d.date <= period_boundary());
    (
        Dataset {
            pair: dataset.pair.clone(),
            days: pre,
            period: PeriodTag::Pre,
        },
        Dataset {
            pair: dataset.pair.clone(),
            days: post,
            period: PeriodTag::Post,
        },
    )
}

/// Parse a tick CSV file.
pub fn parse_tick_csv(path: impl AsRef<Path>) -> Result<Vec<Tick>, IngestError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(io_err(path))?;
    parse_tick_reader(file)
}

pub fn parse_tick_reader(reader: impl Read) -> Result<Vec<Tick>, IngestError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    if rdr.headers()?.is_empty() {
        return Ok(Vec::new());
    }
    check_header(rdr.headers()?, &TICK_HEADER)?;
    let mut sources: BTreeMap<String, SourceId> = BTreeMap::new();
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| IngestError::Parse {
            line: e.position().map_or(0, |p| p.line()),
            reason: e.to_string(),
        })?;
        let line = line_of(&record);
        let malformed = |reason: String| IngestError::Parse { line, reason };
        let invalid = |e: TypeError| IngestError::Validation {
            line,
            reason: e.to_string(),
        };
        let ts: i64 = record[0]
            .parse()
            .map_err(|_| malformed(format!("bad timestamp `{}`", &record[0])))?;
        let price = |i: usize| -> Result<Price, IngestError> {
            record[i]
                .parse::<Price>()
                .map_err(|_| malformed(format!("bad price `{}` in column {}", &record[i], TICK_HEADER[i])))
        };
        let source = sources
            .entry(record[5].to_string())
            .or_insert_with(|| SourceId::new(&record[5]))
            .clone();
        let tick = match &record[1] {
            "Q" => Tick::Quote(Quote::new(ts, price(2)?, price(3)?, source).map_err(invalid)?),
            "T" => Tick::Trade(Trade::new(ts, price(4)?, source).map_err(invalid)?),
            other => return Err(malformed(format!("unknown kind `{other}`"))),
        };
        out.push(tick);
    }
    Ok(out)
}

pub fn write_tick_csv<'a>(writer: impl Write, ticks: impl IntoIterator<Item = &'a Tick>) -> Result<(), IngestError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(TICK_HEADER)?;
    for t in ticks {
        match t {
            Tick::Quote(q) => w.write_record([
                q.timestamp.to_string(),
                "Q".into(),
                q.bid.to_string(),
                q.ask.to_string(),
                String::new(),
                q.source.to_string(),
            ])?,
            Tick::Trade(tr) => w.write_record([
                tr.timestamp.to_string(),
                "T".into(),
                String::new(),
                String::new(),
                tr.price.to_string(),
                tr.source.to_string(),
            ])?,
        }
    }
    w.flush().map_err(|source| IngestError::Io {
        path: "<writer>".into(),
        source,
    })?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(y: i32, m: u32, day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, day).unwrap()
    }

    fn full_day(date: NaiveDate, skip: Option<u16>) -> Vec<MinuteBar> {
        (0..1440u16)
            .filter(|m| Some(*m) != skip)
            .map(|m| MinuteBar::new(date, m, 1.0, 1.0, 1.0, 1.0).unwrap())
            .collect()
    }

    fn raw_of(days: &[Vec<MinuteBar>]) -> RawDayMap {
        let mut raw = RawDayMap::new();
        for bars in days {
            for b in bars {
                raw.entry(b.date).or_default().insert(b.minute, *b);
            }
        }
        raw
    }

    #[test]
    fn parses_documented_row() {
        let text = "date,time,open,high,low,close\n2012-05-03,15:59,1.2000,1.2004,1.1999,1.2002\n";
        let raw = parse_bar_reader(text.as_bytes()).unwrap();
        let bar = raw[&d(2012, 5, 3)][&959];
        assert_eq!((bar.open, bar.high, bar.low, bar.close), (1.2, 1.2004, 1.1999, 1.2002));
    }

    #[test]
    fn rejects_low_above_high_with_line() {
        let text = "date,time,open,high,low,close\n2012-05-03,15:58,1.2,1.2,1.2,1.2\n2012-05-03,15:59,1.2,1.1,1.3,1.2\n";
        match parse_bar_reader(text.as_bytes()) {
            Err(IngestError::Validation { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_and_non_positive_rows() {
        let bad_time = "date,time,open,high,low,close\n2012-05-03,25:61,1,1,1,1\n";
        assert!(matches!(parse_bar_reader(bad_time.as_bytes()), Err(IngestError::Parse { line: 2, .. })));
        let zero = "date,time,open,high,low,close\n2012-05-03,10:00,0,1,0,1\n";
        assert!(matches!(parse_bar_reader(zero.as_bytes()), Err(IngestError::Validation { line: 2, .. })));
        let header = "day,time,open,high,low,close\n";
        assert!(matches!(parse_bar_reader(header.as_bytes()), Err(IngestError::Header { .. })));
        let dup = "date,time,open,high,low,close\n2012-05-03,10:00,1,1,1,1\n2012-05-03,10:00,1,1,1,1\n";
        assert!(matches!(parse_bar_reader(dup.as_bytes()), Err(IngestError::Validation { line: 3, .. })));
    }

    #[test]
    fn empty_input_is_empty_map() {
        assert!(parse_bar_reader("".as_bytes()).unwrap().is_empty());
        assert!(parse_bar_reader("date,time,open,high,low,close\n".as_bytes()).unwrap().is_empty());
    }

    #[test]
    fn utc_declared_files_are_relabelled() {
        let text = "# tz=UTC\ndate,time,open,high,low,close\n2013-07-01,15:00,1,1,1,1\n2013-01-15,15:00,1,1,1,1\n";
        let raw = parse_bar_reader(text.as_bytes()).unwrap();
        assert!(raw[&d(2013, 7, 1)].contains_key(&960));
        assert!(raw[&d(2013, 1, 15)].contains_key(&900));
    }

    #[test]
    fn completeness_filter() {
        let raw = raw_of(&[full_day(d(2012, 1, 2), None), full_day(d(2012, 1, 3), Some(700))]);
        let c = filter_complete_days(&raw, "EURUSD");
        assert_eq!(c.dataset.len(), 1);
        assert_eq!(c.dataset.days[0].date, d(2012, 1, 2));
        assert_eq!(c.excluded, vec![d(2012, 1, 3)]);
        // idempotent
        let again = filter_complete_days(&c.dataset.to_raw(), "EURUSD");
        assert_eq!(again.dataset, c.dataset);
        assert!(again.excluded.is_empty());

        let none = filter_complete_days(&raw_of(&[full_day(d(2012, 1, 3), Some(0))]), "X");
        assert!(none.dataset.is_empty());
        assert_eq!(none.excluded.len(), 1);
    }

    #[test]
    fn period_split_boundaries() {
        let raw = raw_of(&[full_day(d(2013, 5, 31), None), full_day(d(2013, 6, 1), None)]);
        let ds = filter_complete_days(&raw, "X").dataset;
        let (pre, post) = split_periods(&ds);
        assert_eq!(pre.days.iter().map(|x| x.date).collect::<Vec<_>>(), vec![d(2013, 5, 31)]);
        assert_eq!(post.days.iter().map(|x| x.date).collect::<Vec<_>>(), vec![d(2013, 6, 1)]);
        assert_eq!(pre.period, PeriodTag::Pre);

        let empty = Dataset {
            pair: "X".into(),
            days: vec![],
            period: PeriodTag::Full,
        };
        let (a, b) = split_periods(&empty);
        assert!(a.is_empty() && b.is_empty());
    }

    #[test]
    fn tick_csv_round_trip() {
        let src = SourceId::new("EBS");
        let ticks = vec![
            Tick::Quote(Quote::new(5, "1.10".parse().unwrap(), "1.1002".parse().unwrap(), src.clone()).unwrap()),
            Tick::Trade(Trade::new(7, "1.1002".parse().unwrap(), src).unwrap()),
        ];
        let mut buf = Vec::new();
        write_tick_csv(&mut buf, &ticks).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("timestamp_ms,kind,bid,ask,price,source\n5,Q,1.10,1.1002,,EBS\n"));
        assert_eq!(parse_tick_reader(buf.as_slice()).unwrap(), ticks);
    }

    #[test]
    fn tick_csv_errors() {
        let bad = "timestamp_ms,kind,bid,ask,price,source\n1,X,,,1.0,A\n";
        assert!(matches!(parse_tick_reader(bad.as_bytes()), Err(IngestError::Parse { line: 2, .. })));
        let neg = "timestamp_ms,kind,bid,ask,price,source\n1,T,,,-1.0,A\n";
        assert!(matches!(parse_tick_reader(neg.as_bytes()), Err(IngestError::Validation { line: 2, .. })));
        assert!(parse_tick_reader("".as_bytes()).unwrap().is_empty());
    }
}
