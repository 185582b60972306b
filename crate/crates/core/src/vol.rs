//! Per-minute return matrices, annualised volatility profiles and spike
//! detection.

use std::io::{Read, Write};

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::Dataset;
use crate::stats::{median_f64, Welford};
use crate::types::{minute_label, PriceStream, MINUTES_PER_DAY};

/// `sqrt(252 * 24 * 60)`: business days times minutes per day.
pub fn annualisation_factor() -> f64 {
    (252.0f64 * 24.0 * 60.0).sqrt()
}

/// Scale from a MAD to a normal standard deviation.
pub const MAD_SCALE: f64 = 1.4826;

#[derive(Debug, Error, PartialEq)]
pub enum VolError {
    #[error("zero price on {date} minute {minute}")]
    ZeroPrice { date: NaiveDate, minute: usize },
    #[error("malformed profile csv: {0}")]
    Csv(String),
}

/// Days × 1440 arithmetic minute returns; `NaN` marks an absent entry.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnMatrix {
    pub pair: String,
    pub stream: PriceStream,
    pub dates: Vec<NaiveDate>,
    values: Vec<f64>,
}

impl ReturnMatrix {
    pub fn day_count(&self) -> usize {
        self.dates.len()
    }

    pub fn row(&self, day: usize) -> &[f64] {
        &self.values[day * MINUTES_PER_DAY..(day + 1) * MINUTES_PER_DAY]
    }

    pub fn get(&self, day: usize, minute: usize) -> Option<f64> {
        let v = self.row(day)[minute];
        (!v.is_nan()).then_some(v)
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(MINUTES_PER_DAY)
    }
}

/// `R(t) = (S(t) − S(t−1)) / S(t−1)` per day. Minute 0 uses the last bar of
/// the previous calendar day when that day is in the dataset, else absent.
pub fn minute_returns(dataset: &Dataset, stream: PriceStream) -> Result<ReturnMatrix, VolError> {
    let mut values = Vec::with_capacity(dataset.len() * MINUTES_PER_DAY);
    let mut prev: Option<(NaiveDate, f64)> = None;
    for day in &dataset.days {
        let prices: Vec<f64> = day.bars().iter().map(|b| b.price(stream)).collect();
        let first = match prev {
            Some((d, p)) if d.succ_opt() == Some(day.date) => ratio(prices[0], p).ok_or(VolError::ZeroPrice {
                date: d,
                minute: MINUTES_PER_DAY - 1,
            })?,
            _ => f64::NAN,
        };
        values.push(first);
        for m in 1..MINUTES_PER_DAY {
            values.push(ratio(prices[m], prices[m - 1]).ok_or(VolError::ZeroPrice {
                date: day.date,
                minute: m - 1,
            })?);
        }
        prev = Some((day.date, prices[MINUTES_PER_DAY - 1]));
    }
    Ok(ReturnMatrix {
        pair: dataset.pair.clone(),
        stream,
        dates: dataset.days.iter().map(|d| d.date).collect(),
        values,
    })
}

fn ratio(s: f64, base: f64) -> Option<f64> {
    (base != 0.0).then(|| (s - base) / base)
}

/// Per-minute running moments; rows can be fed without keeping the matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct VolAccumulator {
    columns: Vec<Welford>,
}

impl Default for VolAccumulator {
    fn default() -> Self {
        Self {
            columns: vec![Welford::new(); MINUTES_PER_DAY],
        }
    }
}

impl VolAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds one day of 1440 returns; `NaN` entries are skipped.
    pub fn push_row(&mut self, row: &[f64]) {
        assert_eq!(row.len(), MINUTES_PER_DAY, "row must have 1440 minutes");
        for (w, &x) in self.columns.iter_mut().zip(row) {
            if !x.is_nan() {
                w.push(x);
            }
        }
    }

    pub fn merge(&mut self, other: &VolAccumulator) {
        for (a, b) in self.columns.iter_mut().zip(&other.columns) {
            a.merge(b);
        }
    }

    pub fn finish(&self) -> VolatilityProfile {
        let alpha = annualisation_factor();
        VolatilityProfile {
            sigma: self.columns.iter().map(|w| w.sample_std().map(|s| s * alpha)).collect(),
            sample_counts: self.columns.iter().map(Welford::count).collect(),
        }
    }
}

/// Annualised sample standard deviation of returns per minute.
#[derive(Debug, Clone, PartialEq)]
pub struct VolatilityProfile {
    /// Absent for minutes with fewer than two returns.
    pub sigma: Vec<Option<f64>>,
    pub sample_counts: Vec<u64>,
}

pub fn vol_profile(matrix: &ReturnMatrix) -> VolatilityProfile {
    let rows: Vec<&[f64]> = matrix.rows().collect();
    // Fixed chunks merged in order keep the result independent of scheduling.
    let partials: Vec<VolAccumulator> = rows
        .par_chunks(256)
        .map(|chunk| {
            let mut acc = VolAccumulator::new();
            for row in chunk {
                acc.push_row(row);
            }
            acc
        })
        .collect();
    let mut total = VolAccumulator::new();
    for p in &partials {
        total.merge(p);
    }
    total.finish()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub minute: usize,
    pub sigma: Option<f64>,
    pub count: u64,
}

impl VolatilityProfile {
    pub fn write_csv(&self, writer: impl Write) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for (minute, (sigma, count)) in self.sigma.iter().zip(&self.sample_counts).enumerate() {
            w.serialize(ProfileRow {
                minute,
                sigma: *sigma,
                count: *count,
            })?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(reader: impl Read) -> Result<Self, VolError> {
        let mut sigma = Vec::new();
        let mut sample_counts = Vec::new();
        for row in csv::Reader::from_reader(reader).deserialize::<ProfileRow>() {
            let row = row.map_err(|e| VolError::Csv(e.to_string()))?;
            if row.minute != sigma.len() {
                return Err(VolError::Csv(format!("minute {} out of sequence", row.minute)));
            }
            sigma.push(row.sigma);
            sample_counts.push(row.count);
        }
        Ok(Self { sigma, sample_counts })
    }
}

/// A minute whose volatility stands out of its neighbourhood.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spike {
    /// Column index of the return; the move spans `minute − 1 → minute`.
    pub minute: usize,
    pub sigma: f64,
    pub background: f64,
    pub z_score: f64,
}

impl Spike {
    pub fn interval_start(&self) -> usize {
        (self.minute + MINUTES_PER_DAY - 1) % MINUTES_PER_DAY
    }

    /// `HH:MM-HH:MM` of the minute-to-minute move.
    pub fn label(&self) -> String {
        format!("{}-{}", minute_label(self.interval_start()), minute_label(self.minute))
    }
}

/// Robust local-outlier test on a profile.
///
/// Minute `t` is flagged when `(σ(t) − med) / (1.4826 · MAD) > z_threshold`,
/// with median and MAD over the present values of `[t−k, t+k] \ {t}`.
/// Candidates whose neighbourhood leaves the day, or has fewer than `k`
/// present values, are skipped. A zero MAD with a positive excess gives an
/// infinite score. Output is sorted by descending score, then minute.
pub fn detect_spikes(profile: &VolatilityProfile, window_k: usize, z_threshold: f64) -> Vec<Spike> {
    let n = profile.sigma.len();
    let mut out = Vec::new();
    if window_k == 0 || n < 2 * window_k + 1 {
        return out;
    }
    let mut neighbours = Vec::with_capacity(2 * window_k);
    for t in window_k..n - window_k {
        let Some(sigma) = profile.sigma[t] else { continue };
        neighbours.clear();
        neighbours.extend((t - window_k..=t + window_k).filter(|&j| j != t).filter_map(|j| profile.sigma[j]));
        if neighbours.len() < window_k {
            continue;
        }
        let Some((background, z)) = robust_score(sigma, &mut neighbours) else { continue };
        if z > z_threshold {
            out.push(Spike {
                minute: t,
                sigma,
                background,
                z_score: z,
            });
        }
    }
    out.sort_by(|a, b| b.z_score.total_cmp(&a.z_score).then(a.minute.cmp(&b.minute)));
    out
}

/// `(median, z)` of `x` against `sample`; reorders `sample`.
fn robust_score(x: f64, sample: &mut [f64]) -> Option<(f64, f64)> {
    let med = median_f64(sample)?;
    let mut dev: Vec<f64> = sample.iter().map(|v| (v - med).abs()).collect();
    let mad = median_f64(&mut dev)?;
    let excess = x - med;
    let z = if mad > 0.0 {
        excess / (MAD_SCALE * mad)
    } else if excess > 0.0 {
        f64::INFINITY
    } else if excess < 0.0 {
        f64::NEG_INFINITY
    } else {
        0.0
    };
    Some((med, z))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpikeRow {
    pub interval_start: usize,
    pub interval_end: usize,
    pub label: String,
    pub sigma: f64,
    pub z_score: f64,
}

impl From<&Spike> for SpikeRow {
    fn from(s: &Spike) -> Self {
        Self {
            interval_start: s.interval_start(),
            interval_end: s.minute,
            label: s.label(),
            sigma: s.sigma,
            z_score: s.z_score,
        }
    }
}

pub fn write_spikes_csv(writer: impl Write, spikes: &[Spike]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    if spikes.is_empty() {
        w.write_record(["interval_start", "interval_end", "label", "sigma", "z_score"])?;
    }
    for s in spikes {
        w.serialize(SpikeRow::from(s))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_spikes_csv(reader: impl Read) -> csv::Result<Vec<SpikeRow>> {
    csv::Reader::from_reader(reader).deserialize().collect()
}
