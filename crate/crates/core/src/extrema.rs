//! Extreme period returns around hourly fixing times and the probability
//! surfaces of where each day's most extreme move falls.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{Dataset, DayBars};
use crate::types::{PriceStream, MINUTES_PER_DAY};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    /// `[T_F − Δt, T_F]`, anchored at its start.
    Int1,
    /// `[T_F, T_F + Δt]`, anchored at `T_F`.
    Int2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExtremumKind {
    Max,
    Min,
}

impl Side {
    pub const ALL: [Side; 2] = [Side::Int1, Side::Int2];

    pub fn as_str(self) -> &'static str {
        match self {
            Side::Int1 => "int1",
            Side::Int2 => "int2",
        }
    }
}

impl ExtremumKind {
    pub const ALL: [ExtremumKind; 2] = [ExtremumKind::Max, ExtremumKind::Min];

    pub fn as_str(self) -> &'static str {
        match self {
            ExtremumKind::Max => "max",
            ExtremumKind::Min => "min",
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Display for ExtremumKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Side {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "int1" => Ok(Side::Int1),
            "int2" => Ok(Side::Int2),
            other => Err(format!("unknown side `{other}`")),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ExtremaError {
    #[error("interval of {delta_t} min {side} at minute {t_f} leaves the day")]
    OutOfDay { t_f: usize, delta_t: usize, side: Side },
    #[error("empty hour or interval grid")]
    EmptyGrid,
}

/// Anchor minute and the first/last minute of the return series.
fn interval(t_f: usize, delta_t: usize, side: Side) -> Result<(usize, usize), ExtremaError> {
    let err = ExtremaError::OutOfDay { t_f, delta_t, side };
    if delta_t == 0 {
        return Err(err);
    }
    let anchor = match side {
        Side::Int1 => t_f.checked_sub(delta_t).ok_or(err.clone())?,
        Side::Int2 => t_f,
    };
    if anchor + delta_t >= MINUTES_PER_DAY {
        return Err(err);
    }
    Ok((anchor, anchor + delta_t))
}

/// Returns relative to the interval's anchor for every minute after the
/// anchor up to the far end: `Δt` values, the anchor itself excluded.
pub fn period_returns(
    day: &DayBars,
    stream: PriceStream,
    t_f: usize,
    delta_t: usize,
    side: Side,
) -> Result<Vec<f64>, ExtremaError> {
    let (anchor, end) = interval(t_f, delta_t, side)?;
    let base = day.price(anchor, stream);
    Ok((anchor + 1..=end).map(|t| (day.price(t, stream) - base) / base).collect())
}

fn extremum(day: &DayBars, stream: PriceStream, t_f: usize, delta_t: usize, side: Side, kind: ExtremumKind) -> f64 {
    let (anchor, end) = interval(t_f, delta_t, side).expect("validated grid");
    let bars = &day.bars()[anchor + 1..=end];
    let price = match kind {
        ExtremumKind::Max => bars.iter().map(|b| b.price(stream)).fold(f64::NEG_INFINITY, f64::max),
        ExtremumKind::Min => bars.iter().map(|b| b.price(stream)).fold(f64::INFINITY, f64::min),
    };
    let base = day.price(anchor, stream);
    (price - base) / base
}

/// Fixing hours and interval sizes a surface is evaluated on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurfaceGrid {
    pub hours: Vec<usize>,
    pub delta_ts: Vec<usize>,
}

impl Default for SurfaceGrid {
    fn default() -> Self {
        Self {
            hours: (2..=23).collect(),
            delta_ts: (1..=59).collect(),
        }
    }
}

impl SurfaceGrid {
    pub fn validate(&self) -> Result<(), ExtremaError> {
        if self.hours.is_empty() || self.delta_ts.is_empty() {
            return Err(ExtremaError::EmptyGrid);
        }
        for &h in &self.hours {
            for &dt in &self.delta_ts {
                for side in Side::ALL {
                    interval(h * 60, dt, side)?;
                }
            }
        }
        Ok(())
    }
}

/// Hour whose interval holds the day's largest `|extremum|` of the given kind.
/// Ties go to the earliest hour.
pub fn daily_global_extremum(
    day: &DayBars,
    delta_t: usize,
    side: Side,
    kind: ExtremumKind,
    stream: PriceStream,
    hours: &[usize],
) -> Result<usize, ExtremaError> {
    for &h in hours {
        interval(h * 60, delta_t, side)?;
    }
    let mut best: Option<(usize, f64)> = None;
    for &h in hours {
        let v = extremum(day, stream, h * 60, delta_t, side, kind).abs();
        if best.map_or(true, |(_, b)| v > b) {
            best = Some((h, v));
        }
    }
    best.map(|(h, _)| h).ok_or(ExtremaError::EmptyGrid)
}

/// Where the most extreme move of each day fell, per interval size.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtremaSurface {
    pub side: Side,
    pub kind: ExtremumKind,
    pub stream: PriceStream,
    pub grid: SurfaceGrid,
    /// `counts[i][j]`: days whose extreme hour for `delta_ts[i]` is `hours[j]`.
    pub counts: Vec<Vec<u64>>,
    pub day_count: u64,
}

impl ExtremaSurface {
    fn empty(side: Side, kind: ExtremumKind, stream: PriceStream, grid: &SurfaceGrid) -> Self {
        Self {
            side,
            kind,
            stream,
            grid: grid.clone(),
            counts: vec![vec![0; grid.hours.len()]; grid.delta_ts.len()],
            day_count: 0,
        }
    }

    fn merge(mut self, other: Self) -> Self {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        self.day_count += other.day_count;
        self
    }

    /// Counts for one interval size, ordered like `grid.hours`.
    pub fn row(&self, delta_t: usize) -> Option<&[u64]> {
        let i = self.grid.delta_ts.iter().position(|&d| d == delta_t)?;
        Some(&self.counts[i])
    }

    /// Count normalised by the number of days in the dataset.
    pub fn probability(&self, delta_t: usize, hour: usize) -> Option<f64> {
        let j = self.grid.hours.iter().position(|&h| h == hour)?;
        let c = self.row(delta_t)?[j];
        Some(if self.day_count == 0 { 0.0 } else { c as f64 / self.day_count as f64 })
    }

    pub fn rows(&self) -> impl Iterator<Item = SurfaceRow> + '_ {
        self.grid.delta_ts.iter().zip(&self.counts).flat_map(move |(&dt, counts)| {
            self.grid.hours.iter().zip(counts).map(move |(&h, &c)| SurfaceRow {
                hour: h,
                delta_t: dt,
                side: self.side,
                kind: self.kind,
                stream: self.stream,
                probability: if self.day_count == 0 { 0.0 } else { c as f64 / self.day_count as f64 },
            })
        })
    }
}

pub fn build_surface(dataset: &Dataset, side: Side, kind: ExtremumKind, stream: PriceStream) -> ExtremaSurface {
    build_surface_on(dataset, side, kind, stream, &SurfaceGrid::default()).expect("default grid is valid")
}

pub fn build_surface_on(
    dataset: &Dataset,
    side: Side,
    kind: ExtremumKind,
    stream: PriceStream,
    grid: &SurfaceGrid,
) -> Result<ExtremaSurface, ExtremaError> {
    grid.validate()?;
    let empty = || ExtremaSurface::empty(side, kind, stream, grid);
    Ok(dataset
        .days
        .par_iter()
        .fold(empty, |mut acc, day| {
            for (i, &dt) in grid.delta_ts.iter().enumerate() {
                let h = daily_global_extremum(day, dt, side, kind, stream, &grid.hours).expect("validated grid");
                let j = grid.hours.iter().position(|&x| x == h).expect("hour from grid");
                acc.counts[i][j] += 1;
            }
            acc.day_count += 1;
            acc
        })
        .reduce(empty, ExtremaSurface::merge))
}

/// Spread between the highest high and the lowest low over the interval,
/// both relative to the close at the anchor minute. Never negative.
pub fn delta_r(day: &DayBars, t_f: usize, delta_t: usize, side: Side) -> Result<f64, ExtremaError> {
    let (anchor, _) = interval(t_f, delta_t, side)?;
    let base = day.price(anchor, PriceStream::Close);
    let hi = extremum_from(day, PriceStream::High, anchor, delta_t, ExtremumKind::Max);
    let lo = extremum_from(day, PriceStream::Low, anchor, delta_t, ExtremumKind::Min);
    Ok((hi - base) / base - (lo - base) / base)
}

fn extremum_from(day: &DayBars, stream: PriceStream, anchor: usize, delta_t: usize, kind: ExtremumKind) -> f64 {
    let prices = day.bars()[anchor + 1..=anchor + delta_t].iter().map(|b| b.price(stream));
    match kind {
        ExtremumKind::Max => prices.fold(f64::NEG_INFINITY, f64::max),
        ExtremumKind::Min => prices.fold(f64::INFINITY, f64::min),
    }
}

/// One cell of a surface in long format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceRow {
    pub hour: usize,
    pub delta_t: usize,
    pub side: Side,
    pub kind: ExtremumKind,
    pub stream: PriceStream,
    pub probability: f64,
}

pub fn write_surfaces_csv<'a>(writer: impl Write, surfaces: impl IntoIterator<Item = &'a ExtremaSurface>) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["hour", "delta_t", "side", "kind", "stream", "probability"])?;
    for s in surfaces {
        for row in s.rows() {
            w.write_record([
                row.hour.to_string(),
                row.delta_t.to_string(),
                row.side.to_string(),
                row.kind.to_string(),
                row.stream.to_string(),
                row.probability.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_surfaces_csv(reader: impl Read) -> csv::Result<Vec<SurfaceRow>> {
    csv::Reader::from_reader(reader).deserialize().collect()
}
