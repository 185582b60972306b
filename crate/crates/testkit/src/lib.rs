//! Independent brute-force oracles and random fixtures.
//!
//! Every oracle here is written from the definitions, deliberately avoiding
//! the data structures and shortcuts of the library code it checks.

use chrono::NaiveDate;
use fixlab_core::extrema::ExtremumKind;
use fixlab_core::fix::IntervalSnapshot;
use fixlab_core::ingest::DayBars;
use fixlab_core::types::{utc_ms_to_london, MinuteBar, Price, PriceStream, Tick, MINUTES_PER_DAY};
use rand::Rng;
use rust_decimal::prelude::ToPrimitive;
use rust_decimal::Decimal;

/// Prices in the fixtures live on a 1e-5 grid.
pub const TICK_DP: u32 = 5;

/// Oracle arithmetic unit: 1e-12 of a price unit.
const UNIT_DP: u32 = 12;
const TICK_IN_UNITS: i128 = 10_000_000; // 1e-5 / 1e-12

pub fn px(ticks: i64) -> Price {
    Decimal::new(ticks, TICK_DP)
}

fn units(ticks: i64) -> i128 {
    ticks as i128 * TICK_IN_UNITS
}

fn from_units(u: i128) -> Price {
    Decimal::from_i128_with_scale(u, UNIT_DP)
}

/// One sampling interval in integer ticks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RawInterval {
    pub quote: Option<(i64, i64)>,
    pub trade: Option<i64>,
}

impl RawInterval {
    pub fn snapshot(&self, index: usize) -> IntervalSnapshot {
        let mut s = IntervalSnapshot::empty(index);
        if let Some((b, a)) = self.quote {
            s.last_bid = Some(px(b));
            s.last_ask = Some(px(a));
            s.spread = Some(px(a - b));
            s.last_quote_ts = Some(index as i64);
        }
        if let Some(t) = self.trade {
            s.last_trade = Some(px(t));
            s.last_trade_ts = Some(index as i64);
        }
        s
    }
}

pub fn snapshots(intervals: &[RawInterval]) -> Vec<IntervalSnapshot> {
    intervals.iter().enumerate().map(|(i, r)| r.snapshot(i)).collect()
}

/// Random intervals around 1.20000 with spreads of 0..=6 ticks; trades land
/// on the quotes, strictly inside, at the exact mid or outside.
pub fn random_intervals(rng: &mut impl Rng, n: usize, p_quote: f64, p_trade: f64) -> Vec<RawInterval> {
    let mut level = 120_000i64;
    (0..n)
        .map(|_| {
            level += rng.gen_range(-3..=3);
            let spread = rng.gen_range(0..=6);
            let quote = rng.gen_bool(p_quote).then_some((level, level + spread));
            let trade = rng.gen_bool(p_trade).then(|| {
                let (b, a) = quote.unwrap_or((level, level + spread));
                match rng.gen_range(0..6) {
                    0 | 1 => b,
                    2 | 3 => a,
                    4 => rng.gen_range(b - 3..=a + 3),
                    _ => (b + a) / 2,
                }
            });
            RawInterval { quote, trade }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleFix {
    pub mid: Price,
    pub fix_bid: Price,
    pub fix_ask: Price,
    pub spread_used: Price,
    pub market_spread: Option<Price>,
    pub n_trade_points: usize,
    pub used_quote_fallback: bool,
}

fn median_units(mut v: Vec<i128>) -> Option<i128> {
    if v.is_empty() {
        return None;
    }
    v.sort_unstable();
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { (v[n / 2 - 1] + v[n / 2]) / 2 })
}

/// Mean of the quoted spreads rounded half-to-even at 10 decimals, in units.
fn market_spread_units(intervals: &[RawInterval]) -> Option<i128> {
    let spreads: Vec<i64> = intervals.iter().filter_map(|r| r.quote.map(|(b, a)| a - b)).collect();
    if spreads.is_empty() {
        return None;
    }
    // mean in 1e-10 units = sum_ticks * 1e5 / n
    let num = spreads.iter().map(|&s| s as i128).sum::<i128>() * 100_000;
    let n = spreads.len() as i128;
    let (q, r) = (num.div_euclid(n), num.rem_euclid(n));
    let rounded = match (2 * r).cmp(&n) {
        std::cmp::Ordering::Less => q,
        std::cmp::Ordering::Greater => q + 1,
        std::cmp::Ordering::Equal => q + (q & 1),
    };
    Some(rounded * 100)
}

/// Quote-median fix over intervals holding a quote pair.
pub fn oracle_quote_fix(intervals: &[RawInterval]) -> Option<OracleFix> {
    let bids: Vec<i128> = intervals.iter().filter_map(|r| r.quote.map(|(b, _)| units(b))).collect();
    let asks: Vec<i128> = intervals.iter().filter_map(|r| r.quote.map(|(_, a)| units(a))).collect();
    let mb = median_units(bids)?;
    let ma = median_units(asks)?;
    let mid = (mb + ma) / 2;
    let spread = ma - mb;
    Some(OracleFix {
        mid: from_units(mid),
        fix_bid: from_units(mid - spread / 2),
        fix_ask: from_units(mid + spread / 2),
        spread_used: from_units(spread),
        market_spread: market_spread_units(intervals).map(from_units),
        n_trade_points: 0,
        used_quote_fallback: false,
    })
}

/// Trade-path fix built from first principles, with the quote fallback.
pub fn oracle_trade_fix(intervals: &[RawInterval], standard_spread: Price, min_trades: usize) -> Option<OracleFix> {
    let mut bid_side = Vec::new();
    let mut offer_side = Vec::new();
    for r in intervals {
        let (Some(t), Some((b, a))) = (r.trade, r.quote) else { continue };
        let s = a - b;
        // distance to each quote, doubled to stay integral
        let to_bid = 2 * (t - b);
        let to_ask = 2 * (a - t);
        let is_bid = t == b || (t > b && t < a && to_bid < to_ask);
        let is_offer = t == a || (t > b && t < a && to_ask < to_bid);
        if is_bid {
            bid_side.push(units(t));
            offer_side.push(units(t + s));
        } else if is_offer {
            offer_side.push(units(t));
            bid_side.push(units(t - s));
        }
    }
    let n = bid_side.len();
    if n == 0 || n < min_trades {
        let mut q = oracle_quote_fix(intervals)?;
        q.used_quote_fallback = true;
        return Some(q);
    }
    let mid = (median_units(bid_side)? + median_units(offer_side)?) / 2;
    let s_m = market_spread_units(intervals);
    let s_s = (standard_spread * Decimal::from(10i64.pow(UNIT_DP))).to_i128().expect("spread fits");
    let used = s_m.map_or(s_s, |m| m.max(s_s));
    Some(OracleFix {
        mid: from_units(mid),
        fix_bid: from_units(mid - used / 2),
        fix_ask: from_units(mid + used / 2),
        spread_used: from_units(used),
        market_spread: s_m.map(from_units),
        n_trade_points: n,
        used_quote_fallback: false,
    })
}

/// Reference filter applied tick by tick, recomputing the reference from
/// scratch for each one.
pub fn oracle_quality_filter(ticks: &[Tick], tolerance: f64, samples: i64) -> Vec<Tick> {
    const BOUNDARY: i64 = 15_000;
    let last_trade_at = |edge: i64| -> Option<Decimal> {
        let mut best: Option<(i64, Decimal)> = None;
        for t in ticks {
            if let Tick::Trade(tr) = t {
                if tr.timestamp <= edge && best.map_or(true, |(ts, _)| tr.timestamp >= ts) {
                    best = Some((tr.timestamp, tr.price));
                }
            }
        }
        best.map(|(_, p)| p)
    };
    let reference = |ts: i64| -> Option<Decimal> {
        let last = ts.div_euclid(BOUNDARY);
        let mut present: Vec<Decimal> = Vec::new();
        for b in last - samples + 1..=last {
            if let Some(p) = last_trade_at(b * BOUNDARY) {
                present.push(p);
            }
        }
        if present.is_empty() {
            return None;
        }
        present.sort();
        let n = present.len();
        Some(if n % 2 == 1 {
            present[n / 2]
        } else {
            (present[n / 2 - 1] + present[n / 2]) / Decimal::TWO
        })
    };
    let tol: Decimal = tolerance.to_string().parse().expect("plain decimal tolerance");
    ticks
        .iter()
        .filter(|t| {
            let price = match t {
                Tick::Quote(q) if q.ask < q.bid => return false,
                Tick::Quote(q) => (q.bid + q.ask) / Decimal::TWO,
                Tick::Trade(tr) => tr.price,
            };
            match reference(t.timestamp()) {
                Some(r) => (price - r).abs() <= tol * r,
                None => true,
            }
        })
        .cloned()
        .collect()
}

fn decimal_f64(d: Decimal) -> f64 {
    d.to_string().parse().expect("decimal renders as a float")
}

/// Per-minute first/max/min/last of trades, one minute at a time.
pub fn oracle_bars(ticks: &[Tick]) -> Vec<MinuteBar> {
    let trades: Vec<(NaiveDate, u16, f64)> = ticks
        .iter()
        .filter_map(|t| match t {
            Tick::Trade(tr) => {
                let (date, ms) = utc_ms_to_london(tr.timestamp + 30_000);
                Some((date, (ms / 60_000) as u16, decimal_f64(tr.price)))
            }
            Tick::Quote(_) => None,
        })
        .collect();
    let mut keys: Vec<(NaiveDate, u16)> = trades.iter().map(|&(d, m, _)| (d, m)).collect();
    keys.sort();
    keys.dedup();
    keys.into_iter()
        .map(|(d, m)| {
            let prices: Vec<f64> = trades.iter().filter(|t| t.0 == d && t.1 == m).map(|t| t.2).collect();
            MinuteBar {
                date: d,
                minute: m,
                open: prices[0],
                high: prices.iter().cloned().fold(f64::MIN, f64::max),
                low: prices.iter().cloned().fold(f64::MAX, f64::min),
                close: *prices.last().expect("non-empty"),
            }
        })
        .collect()
}

/// A random complete day: a coarse-grid random walk so that plateaus and
/// ties occur, with high/low bracketing open and close.
pub fn random_day(rng: &mut impl Rng, date: NaiveDate) -> DayBars {
    let mut level = 13_000i64; // 1e-4 grid
    let bars = (0..MINUTES_PER_DAY).map(|m| {
        let open = level;
        level = (level + rng.gen_range(-2..=2)).max(100);
        let close = level;
        let high = open.max(close) + rng.gen_range(0..=1);
        let low = (open.min(close) - rng.gen_range(0..=1)).max(50);
        let f = |x: i64| x as f64 * 1e-4;
        MinuteBar::new(date, m as u16, f(open), f(high), f(low), f(close)).expect("consistent bar")
    });
    DayBars::new(date, bars).expect("complete day")
}

/// Centred events by scanning every full ±`half_width` window of returns.
pub fn oracle_centered(day: &DayBars, stream: PriceStream, half_width: usize) -> Vec<(usize, ExtremumKind, f64)> {
    let prices: Vec<f64> = day.bars().iter().map(|b| b.price(stream)).collect();
    let mut out = Vec::new();
    for c in half_width..MINUTES_PER_DAY - half_width {
        let anchor = prices[c - half_width];
        let r: Vec<f64> = (c - half_width..=c + half_width).map(|t| (prices[t] - anchor) / anchor).collect();
        let centre = r[half_width];
        let others = r.iter().enumerate().filter(|(i, _)| *i != half_width).map(|(_, v)| *v);
        if others.clone().all(|v| v < centre) {
            out.push((c, ExtremumKind::Max, centre.abs()));
        }
        if others.clone().all(|v| v > centre) {
            out.push((c, ExtremumKind::Min, centre.abs()));
        }
    }
    out
}
