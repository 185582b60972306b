//! Benchmark fix computation from a tick stream.
//!
//! The pipeline is: quality filter, per-source interval sampling, then either
//! the trade path (bid/offer trade medians with inferred opposite sides) or
//! the quote path (bid/ask quote medians), with source selection deciding
//! which snapshots feed which path.

mod compute;
mod filter;
mod sampling;

use std::collections::BTreeMap;
use std::fmt;

use chrono::NaiveDate;
use thiserror::Error;

use crate::types::{FixWindow, PairConfig, Price, SourceId, Tick, TypeError};

pub use compute::{
    classify_trade, compute_quote_fix, compute_trade_fix, infer_opposite, select_source,
    ClassifiedTrade, Classification, TradeSide, MARKET_SPREAD_DP,
};
pub use filter::{quality_filter, QualityFilter, REFERENCE_BOUNDARY_MS};
pub use sampling::{pool_snapshots, sample_intervals, IntervalSnapshot};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FixError {
    #[error("no usable trade or quote data in the fixing window")]
    NoData,
    #[error(transparent)]
    Config(#[from] TypeError),
}

/// Which source(s) the final rate came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SourceUsed {
    /// Computed directly from the snapshots handed in, without source selection.
    Unattributed,
    Single(SourceId),
    /// Trade data merged across several sources.
    Pooled,
    /// Mean of per-source quote fixes with equal quote counts.
    Averaged,
}

impl fmt::Display for SourceUsed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SourceUsed::Unattributed => f.write_str("-"),
            SourceUsed::Single(s) => write!(f, "{s}"),
            SourceUsed::Pooled => f.write_str("pooled"),
            SourceUsed::Averaged => f.write_str("averaged"),
        }
    }
}

/// A computed benchmark rate with its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct FixResult {
    pub mid: Price,
    pub fix_bid: Price,
    pub fix_ask: Price,
    pub spread_used: Price,
    /// Mean interval spread `S_M`; absent when no interval had a quote pair.
    pub market_spread: Option<Price>,
    pub n_trade_points: usize,
    pub used_quote_fallback: bool,
    pub source_used: SourceUsed,
}

/// Split a tick stream by source, keeping only the configured sources.
pub fn split_by_source<'a>(ticks: &'a [Tick], sources: &[SourceId]) -> BTreeMap<SourceId, Vec<&'a Tick>> {
    let mut out: BTreeMap<SourceId, Vec<&Tick>> = sources.iter().map(|s| (s.clone(), Vec::new())).collect();
    for t in ticks {
        if let Some(v) = out.get_mut(t.source()) {
            v.push(t);
        }
    }
    out
}

/// Full pipeline for one fixing window.
pub fn compute_fix(ticks: &[Tick], config: &PairConfig, window: &FixWindow) -> Result<FixResult, FixError> {
    config.validate()?;
    let relevant = window_slice(ticks, window, QualityFilter::new(config.quality_tolerance).reference_samples);
    let filtered = quality_filter(&relevant, config.quality_tolerance);
    let sources = config.source_ids();
    let per_source: BTreeMap<SourceId, Vec<IntervalSnapshot>> = split_by_source(&filtered, &sources)
        .into_iter()
        .map(|(s, ticks)| (s, sample_intervals(ticks, window)))
        .collect();
    select_source(&per_source, config)
}

/// The ticks that can influence a window's fix: everything the filter's
/// reference needs for ticks inside the window, plus the ticks themselves.
/// Filtering the slice gives the same verdicts on in-window ticks as
/// filtering the whole stream.
fn window_slice(ticks: &[Tick], window: &FixWindow, reference_samples: usize) -> Vec<Tick> {
    let first = window.interval_end(0) - window.sample_period();
    let last = window.interval_end(window.sample_count() - 1);
    let cutoff = (first.div_euclid(REFERENCE_BOUNDARY_MS) - reference_samples as i64) * REFERENCE_BOUNDARY_MS;
    // The latest trade at or before the cutoff seeds the carried-forward samples.
    let seed = ticks
        .iter()
        .enumerate()
        .filter(|(_, t)| matches!(t, Tick::Trade(_)) && t.timestamp() <= cutoff)
        .max_by_key(|(i, t)| (t.timestamp(), *i))
        .map(|(i, _)| i);
    ticks
        .iter()
        .enumerate()
        .filter(|(i, t)| Some(*i) == seed || (t.timestamp() > cutoff && t.timestamp() <= last))
        .map(|(_, t)| t.clone())
        .collect()
}

/// Full pipeline for the configured fix time on a London calendar date.
pub fn compute_fix_on(ticks: &[Tick], config: &PairConfig, date: NaiveDate) -> Result<FixResult, FixError> {
    let window = config.window_on(date)?;
    compute_fix(ticks, config, &window)
}
