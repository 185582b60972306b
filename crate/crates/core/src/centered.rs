//! Extrema located exactly at the centre of a sliding ±20-minute window.
//!
//! For a centre minute `c` the window is `[c − 20, c + 20]` and returns are
//! taken against the window start. The centre is an event when it is the
//! unique maximum (or minimum) of the window, anchor included. The size of
//! the move is `|R(c)|`.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use chrono::NaiveDate;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::extrema::ExtremumKind;
use crate::ingest::{Dataset, DayBars};
use crate::stats::{parity_test, Welford};
use crate::types::{PriceStream, MINUTES_PER_DAY};

pub const CENTERED_HALF_WIDTH: usize = 20;
pub const BASIS_POINT: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CenteredEvent {
    pub minute: usize,
    pub kind: ExtremumKind,
    /// `|R(minute)|` as a raw fraction.
    pub delta_r: f64,
}

impl CenteredEvent {
    pub fn delta_r_bpt(&self) -> f64 {
        self.delta_r / BASIS_POINT
    }

    /// `+1` for a maximum, `−1` for a minimum.
    pub fn sign(&self) -> i8 {
        match self.kind {
            ExtremumKind::Max => 1,
            ExtremumKind::Min => -1,
        }
    }
}

/// Events of one day and stream, ordered by minute.
pub fn centered_extrema(day: &DayBars, stream: PriceStream) -> Vec<CenteredEvent> {
    centered_extrema_with(day, stream, CENTERED_HALF_WIDTH)
}

pub fn centered_extrema_with(day: &DayBars, stream: PriceStream, half_width: usize) -> Vec<CenteredEvent> {
    let prices: Vec<f64> = day.bars().iter().map(|b| b.price(stream)).collect();
    let n = prices.len();
    if half_width == 0 || n < 2 * half_width + 1 {
        return Vec::new();
    }
    // Distance to the nearest point at least as high (low) on each side.
    let above = dominance_reach(&prices, |a, b| a >= b);
    let below = dominance_reach(&prices, |a, b| a <= b);
    let mut out = Vec::new();
    for c in half_width..n - half_width {
        let base = prices[c - half_width];
        let r = (prices[c] - base) / base;
        if above[c].0 > half_width && above[c].1 > half_width {
            out.push(CenteredEvent {
                minute: c,
                kind: ExtremumKind::Max,
                delta_r: r.abs(),
            });
        }
        if below[c].0 > half_width && below[c].1 > half_width {
            out.push(CenteredEvent {
                minute: c,
                kind: ExtremumKind::Min,
                delta_r: r.abs(),
            });
        }
    }
    out
}

/// For every index, the distance to the nearest index on the left and on the
/// right whose value `blocks` it; `usize::MAX` when none exists.
fn dominance_reach(x: &[f64], blocks: impl Fn(f64, f64) -> bool) -> Vec<(usize, usize)> {
    let n = x.len();
    let mut out = vec![(usize::MAX, usize::MAX); n];
    let mut stack: Vec<usize> = Vec::with_capacity(n);
    for i in 0..n {
        while let Some(&j) = stack.last() {
            if blocks(x[j], x[i]) {
                break;
            }
            stack.pop();
        }
        if let Some(&j) = stack.last() {
            out[i].0 = i - j;
        }
        stack.push(i);
    }
    stack.clear();
    for i in (0..n).rev() {
        while let Some(&j) = stack.last() {
            if blocks(x[j], x[i]) {
                break;
            }
            stack.pop();
        }
        if let Some(&j) = stack.last() {
            out[i].1 = j - i;
        }
        stack.push(i);
    }
    out
}

/// Combined size estimate in basis points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SizeEstimate {
    pub mean_bpt: f64,
    /// Absent when a contributing stream had fewer than two events.
    pub stderr_bpt: Option<f64>,
}

/// Per-minute statistics of one extremum kind.
#[derive(Debug, Clone, PartialEq)]
pub struct KindHistogram {
    /// Events summed over days and streams.
    pub count: Vec<u64>,
    /// `count / (days · streams)`.
    pub prob: Vec<f64>,
    pub size: Vec<Option<SizeEstimate>>,
    /// Per-stream counts, in the order of `CenteredHistogram::streams`.
    pub stream_counts: Vec<Vec<u64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CenteredHistogram {
    pub day_count: u64,
    pub streams: Vec<PriceStream>,
    pub max: KindHistogram,
    pub min: KindHistogram,
}

impl CenteredHistogram {
    pub fn kind(&self, kind: ExtremumKind) -> &KindHistogram {
        match kind {
            ExtremumKind::Max => &self.max,
            ExtremumKind::Min => &self.min,
        }
    }

    /// Two-sided binomial p-value for equal numbers of maxima and minima.
    pub fn parity_p_value(&self, minute: usize) -> f64 {
        parity_test(self.max.count[minute], self.min.count[minute])
    }

    pub fn rows(&self) -> impl Iterator<Item = HistogramRow> + '_ {
        (0..MINUTES_PER_DAY).flat_map(move |minute| {
            ExtremumKind::ALL.into_iter().map(move |kind| {
                let h = self.kind(kind);
                let size = h.size[minute];
                HistogramRow {
                    minute,
                    kind,
                    count: h.count[minute],
                    probability: h.prob[minute],
                    size_bpt: size.map(|s| s.mean_bpt),
                    stderr_bpt: size.and_then(|s| s.stderr_bpt),
                }
            })
        })
    }

    pub fn write_csv(&self, writer: impl Write) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for row in self.rows() {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramRow {
    pub minute: usize,
    pub kind: ExtremumKind,
    pub count: u64,
    pub probability: f64,
    pub size_bpt: Option<f64>,
    pub stderr_bpt: Option<f64>,
}

pub fn read_histogram_csv(reader: impl Read) -> csv::Result<Vec<HistogramRow>> {
    csv::Reader::from_reader(reader).deserialize().collect()
}

/// Per stream and kind: event counts and size moments per minute.
struct Tally {
    sizes: Vec<[Vec<Welford>; 2]>,
}

impl Tally {
    fn new(streams: usize) -> Self {
        Self {
            sizes: vec![[vec![Welford::new(); MINUTES_PER_DAY], vec![Welford::new(); MINUTES_PER_DAY]]; streams],
        }
    }
}

fn kind_index(kind: ExtremumKind) -> usize {
    match kind {
        ExtremumKind::Max => 0,
        ExtremumKind::Min => 1,
    }
}

/// Count centred events over a dataset and combine the given streams.
///
/// Sizes are averaged per stream first; the stream means are then averaged
/// with errors combined as `sqrt(Σ eᵢ²) / n`.
pub fn aggregate(dataset: &Dataset, streams: &[PriceStream]) -> CenteredHistogram {
    // Events are found in parallel but accumulated in day order, so the
    // floating-point moments do not depend on thread scheduling.
    let per_day: Vec<Vec<Vec<CenteredEvent>>> = dataset
        .days
        .par_iter()
        .map(|day| streams.iter().map(|&s| centered_extrema(day, s)).collect())
        .collect();
    let mut tally = Tally::new(streams.len());
    for day in &per_day {
        for (s, events) in day.iter().enumerate() {
            for e in events {
                tally.sizes[s][kind_index(e.kind)][e.minute].push(e.delta_r_bpt());
            }
        }
    }

    let days = dataset.len() as u64;
    let build = |kind: ExtremumKind| {
        let k = kind_index(kind);
        let stream_counts: Vec<Vec<u64>> = tally.sizes.iter().map(|s| s[k].iter().map(Welford::count).collect()).collect();
        let count: Vec<u64> = (0..MINUTES_PER_DAY).map(|m| stream_counts.iter().map(|c| c[m]).sum()).collect();
        let denom = (days * streams.len() as u64) as f64;
        let prob = count.iter().map(|&c| if denom > 0.0 { c as f64 / denom } else { 0.0 }).collect();
        let size = (0..MINUTES_PER_DAY)
            .map(|m| combine(tally.sizes.iter().map(|s| &s[k][m])))
            .collect();
        KindHistogram {
            count,
            prob,
            size,
            stream_counts,
        }
    };
    CenteredHistogram {
        day_count: days,
        streams: streams.to_vec(),
        max: build(ExtremumKind::Max),
        min: build(ExtremumKind::Min),
    }
}

/// Mean of per-stream means; error `sqrt(Σ eᵢ²) / n`.
pub fn combine<'a>(per_stream: impl Iterator<Item = &'a Welford>) -> Option<SizeEstimate> {
    let mut n = 0usize;
    let mut sum = 0.0;
    let mut var = Some(0.0);
    for w in per_stream {
        let Some(mean) = w.mean() else { continue };
        n += 1;
        sum += mean;
        var = var.zip(w.std_error()).map(|(v, e)| v + e * e);
    }
    (n > 0).then(|| SizeEstimate {
        mean_bpt: sum / n as f64,
        stderr_bpt: var.map(|v| v.sqrt() / n as f64),
    })
}

/// Signed events of one stream at one minute: `+1` max, `−1` min.
pub fn events_at(dataset: &Dataset, stream: PriceStream, minute: usize) -> Vec<(NaiveDate, i8)> {
    dataset
        .days
        .iter()
        .flat_map(|day| {
            centered_extrema(day, stream)
                .into_iter()
                .filter(move |e| e.minute == minute)
                .map(move |e| (day.date, e.sign()))
        })
        .collect()
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CorrelationError {
    #[error("only {0} dates overlap the external series; at least 10 are needed")]
    Insufficient(usize),
    #[error("one of the sign series is constant")]
    Degenerate,
    #[error("malformed external series: {0}")]
    Csv(String),
}

pub const MIN_OVERLAP: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correlation {
    pub r: f64,
    /// Two-sided permutation p-value, `(1 + #{|r*| ≥ |r|}) / (1 + shuffles)`.
    pub p_value: f64,
    pub n: usize,
    pub shuffles: usize,
}

/// Pearson correlation between event signs and the signs of an external
/// daily return on the same dates.
pub fn directional_correlation(
    events: &[(NaiveDate, i8)],
    external: &BTreeMap<NaiveDate, f64>,
    shuffles: usize,
    seed: u64,
) -> Result<Correlation, CorrelationError> {
    let (x, mut y): (Vec<f64>, Vec<f64>) = events
        .iter()
        .filter_map(|(d, s)| external.get(d).map(|r| (*s as f64, sign(*r))))
        .unzip();
    if x.len() < MIN_OVERLAP {
        return Err(CorrelationError::Insufficient(x.len()));
    }
    let r = pearson(&x, &y).ok_or(CorrelationError::Degenerate)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let threshold = r.abs() - 1e-12;
    let mut extreme = 0usize;
    for _ in 0..shuffles {
        y.shuffle(&mut rng);
        if pearson(&x, &y).expect("variance preserved by shuffling").abs() >= threshold {
            extreme += 1;
        }
    }
    Ok(Correlation {
        r,
        p_value: (1 + extreme) as f64 / (1 + shuffles) as f64,
        n: x.len(),
        shuffles,
    })
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    (sxx > 0.0 && syy > 0.0).then(|| (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Debug, Deserialize)]
struct ExternalRow {
    date: NaiveDate,
    #[serde(rename = "return")]
    ret: f64,
}

/// Read a `date,return` series.
pub fn read_external_returns(reader: impl Read) -> Result<BTreeMap<NaiveDate, f64>, CorrelationError> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader)
        .deserialize::<ExternalRow>()
        .map(|row| row.map(|r| (r.date, r.ret)).map_err(|e| CorrelationError::Csv(e.to_string())))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::PeriodTag;
    use crate::types::MinuteBar;

    fn date(d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2012, 3, d).unwrap()
    }

    fn day_of(d: NaiveDate, price: impl Fn(usize) -> f64) -> DayBars {
        DayBars::new(
            d,
            (0..MINUTES_PER_DAY).map(|m| {
                let p = price(m);
                MinuteBar::new(d, m as u16, p, p, p, p).unwrap()
            }),
        )
        .unwrap()
    }

    #[test]
    fn monotone_day_has_no_max_events() {
        let day = day_of(date(5), |m| 1.0 + m as f64 * 1e-5);
        assert!(centered_extrema(&day, PriceStream::Close).iter().all(|e| e.kind != ExtremumKind::Max));
        assert!(centered_extrema(&day, PriceStream::Close).is_empty());
    }

    #[test]
    fn single_peak_is_found() {
        let day = day_of(date(5), |m| if m == 700 { 1.002 } else { 1.0 });
        let events = centered_extrema(&day, PriceStream::High);
        assert_eq!(events.len(), 1);
        assert_eq!(events[0].minute, 700);
        assert_eq!(events[0].kind, ExtremumKind::Max);
        assert!((events[0].delta_r_bpt() - 20.0).abs() < 1e-9);
    }

    #[test]
    fn plateau_at_centre_is_not_an_event() {
        let day = day_of(date(5), |m| if m == 700 || m == 705 { 1.002 } else { 1.0 });
        assert!(centered_extrema(&day, PriceStream::Close).is_empty());
    }

    #[test]
    fn peak_near_the_day_edge_is_skipped() {
        let day = day_of(date(5), |m| if m == 10 { 1.002 } else { 1.0 });
        assert!(centered_extrema(&day, PriceStream::Close).is_empty());
    }

    #[test]
    fn stream_combination() {
        let mk = |xs: &[f64]| -> Welford { xs.iter().copied().collect() };
        let a = mk(&[1.0, 3.0]);
        let est = combine([a, a, a].iter()).unwrap();
        assert!((est.mean_bpt - 2.0).abs() < 1e-12);
        let e = a.std_error().unwrap();
        assert!((est.stderr_bpt.unwrap() - e / 3f64.sqrt()).abs() < 1e-12);
        let lone = combine([mk(&[5.0]), mk(&[])].iter()).unwrap();
        assert_eq!(lone.mean_bpt, 5.0);
        assert_eq!(lone.stderr_bpt, None);
        assert!(combine([mk(&[])].iter()).is_none());
    }

    #[test]
    fn aggregate_counts_and_probabilities() {
        let days: Vec<DayBars> = (5..9)
            .map(|d| day_of(date(d), |m| if m == 960 { 1.001 } else { 1.0 }))
            .collect();
        let ds = Dataset {
            pair: "X".into(),
            days,
            period: PeriodTag::Full,
        };
        let h = aggregate(&ds, &PriceStream::ANALYSED);
        assert_eq!(h.max.count[960], 12);
        assert_eq!(h.max.prob[960], 1.0);
        assert_eq!(h.min.count.iter().sum::<u64>(), 0);
        let size = h.max.size[960].unwrap();
        assert!((size.mean_bpt - 10.0).abs() < 1e-9);
        assert!(size.stderr_bpt.unwrap() < 1e-9);
        assert!(h.max.size[100].is_none());

        let mut buf = Vec::new();
        h.write_csv(&mut buf).unwrap();
        let rows = read_histogram_csv(buf.as_slice()).unwrap();
        assert_eq!(rows.len(), 2 * MINUTES_PER_DAY);
        assert_eq!(rows, h.rows().collect::<Vec<_>>());
    }

    fn dated(signs: &[i8]) -> Vec<(NaiveDate, i8)> {
        let start = NaiveDate::from_ymd_opt(2010, 1, 1).unwrap();
        signs
            .iter()
            .enumerate()
            .map(|(i, &s)| (start + chrono::Days::new(i as u64), s))
            .collect()
    }

    #[test]
    fn correlation_extremes() {
        let signs: Vec<i8> = (0..40).map(|i| if (i * 7) % 3 == 0 { 1 } else { -1 }).collect();
        let events = dated(&signs);
        let same: BTreeMap<_, _> = events.iter().map(|(d, s)| (*d, *s as f64 * 0.01)).collect();
        let neg: BTreeMap<_, _> = events.iter().map(|(d, s)| (*d, -(*s as f64) * 0.01)).collect();
        let c = directional_correlation(&events, &same, 2_000, 1).unwrap();
        assert!((c.r - 1.0).abs() < 1e-12);
        assert!(c.p_value < 0.01);
        let c = directional_correlation(&events, &neg, 2_000, 1).unwrap();
        assert!((c.r + 1.0).abs() < 1e-12);
    }

    #[test]
    fn correlation_errors() {
        let events = dated(&[1; 12]);
        let ext: BTreeMap<_, _> = events.iter().map(|(d, _)| (*d, 0.01)).collect();
        assert_eq!(directional_correlation(&events, &ext, 10, 1), Err(CorrelationError::Degenerate));
        let few = dated(&[1, -1, 1]);
        assert_eq!(
            directional_correlation(&few, &ext, 10, 1),
            Err(CorrelationError::Insufficient(3))
        );
    }

    #[test]
    fn external_series_parses() {
        let text = "date,return\n2012-03-05,0.01\n2012-03-06,-0.002\n";
        let m = read_external_returns(text.as_bytes()).unwrap();
        assert_eq!(m[&date(6)], -0.002);
        assert!(read_external_returns("date,return\nx,1\n".as_bytes()).is_err());
    }
}
