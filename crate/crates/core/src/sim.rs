//! Synthetic tick market.
//!
//! One simulated day is one London business day. Its stream covers the local
//! span `[-30 s, 24 h - 30 s)` so that the centred minute bars `0..1440` of
//! that date are all populated.
//!
//! Each second the latent mid takes a multiplicative Gaussian step. A quote
//! straddling the mid is published at the start of every second, then trades
//! arrive (Poisson count, uniform millisecond offsets) at the prevailing bid
//! or ask. Every trade may move the mid by `trade_impact`, in which case a
//! fresh quote follows it. The move is permanent, or decays with
//! `impact_half_life_s` when that is set. Inside the fixing window the trade rate is
//! multiplied by `compression_factor` and buys/sells are skewed by the day's
//! flow imbalance. The manipulation scenario additionally places
//! `manipulation_size` one-sided trades in the last `manipulation_tail_ms` of
//! each 1-s sampling interval of the window.
//!
//! Randomness: ChaCha8 seeded from `seed`. Day `d` draws market events from
//! stream `2d` and manipulation timing from stream `2d + 1`, so turning the
//! manipulation on leaves the market draws of a day untouched.

use std::collections::BTreeMap;
use std::ops::Range;

use chrono::{Datelike, Duration, NaiveDate, NaiveTime, Timelike};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;
use rust_decimal::prelude::ToPrimitive;
use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{
    centred_minute_label, london_to_utc_ms, MinuteBar, Quote, SourceId, Tick, Trade, MINUTES_PER_DAY, MS_PER_DAY,
    MS_PER_MINUTE, MS_PER_SECOND,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Manipulation {
    Off,
    EndOfInterval,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OrderSide {
    Buy,
    Sell,
}

impl OrderSide {
    fn sign(self) -> f64 {
        match self {
            OrderSide::Buy => 1.0,
            OrderSide::Sell => -1.0,
        }
    }
}

/// How the sign of the fix-window flow imbalance is chosen per day.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ImbalanceDirection {
    /// Always the sign of `flow_imbalance`.
    Fixed,
    /// A fair coin per day.
    RandomDaily,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimScenario {
    pub seed: u64,
    pub day_count: usize,
    /// First simulated date; weekends are skipped.
    pub start_date: NaiveDate,
    pub base_price: f64,
    /// Per-second return standard deviation of the latent mid.
    pub step_vol: f64,
    /// Quoted spread in price units.
    pub base_spread: f64,
    /// Decimal places of the price grid.
    pub tick_decimals: u32,
    /// Expected trades per second outside the fixing window.
    pub tick_rate: f64,
    /// London-local fix time.
    pub fix_time: NaiveTime,
    pub window_half_width_ms: i64,
    pub sample_period_ms: i64,
    pub compression_factor: f64,
    /// Signed buy-minus-sell fraction of in-window trades.
    pub flow_imbalance: f64,
    pub imbalance_direction: ImbalanceDirection,
    /// Probability that a given day carries the fix-window imbalance at all.
    pub fix_flow_probability: f64,
    /// Fractional move of the mid per trade, in the trade's direction.
    pub trade_impact: f64,
    /// Half-life in seconds over which trade impact decays; permanent when absent.
    pub impact_half_life_s: Option<f64>,
    pub manipulation: Manipulation,
    pub manipulation_size: usize,
    pub manipulation_side: OrderSide,
    pub manipulation_tail_ms: i64,
    pub source: String,
}

impl Default for SimScenario {
    fn default() -> Self {
        Self {
            seed: 1,
            day_count: 250,
            start_date: NaiveDate::from_ymd_opt(2010, 1, 4).expect("valid date"),
            base_price: 1.3,
            step_vol: 2e-5,
            base_spread: 0.0002,
            tick_decimals: 5,
            tick_rate: 1.0,
            fix_time: NaiveTime::from_hms_opt(16, 0, 0).expect("valid time"),
            window_half_width_ms: 30_000,
            sample_period_ms: 1_000,
            compression_factor: 1.0,
            flow_imbalance: 0.0,
            imbalance_direction: ImbalanceDirection::RandomDaily,
            fix_flow_probability: 1.0,
            trade_impact: 0.0,
            impact_half_life_s: None,
            manipulation: Manipulation::Off,
            manipulation_size: 1,
            manipulation_side: OrderSide::Buy,
            manipulation_tail_ms: 100,
            source: "SIM".to_string(),
        }
    }
}

impl SimScenario {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |m: &str| Err(ScenarioError::Invalid(m.to_string()));
        if !(self.base_price.is_finite() && self.base_price > 0.0) {
            return bad("base_price must be positive");
        }
        if !(self.step_vol.is_finite() && self.step_vol >= 0.0) {
            return bad("step_vol must be non-negative");
        }
        if !(self.tick_rate.is_finite() && self.tick_rate > 0.0) {
            return bad("tick_rate must be positive");
        }
        if !(self.flow_imbalance.abs() <= 1.0) {
            return bad("flow_imbalance must lie in [-1, 1]");
        }
        if !(self.compression_factor.is_finite() && self.compression_factor > 0.0) {
            return bad("compression_factor must be positive");
        }
        if !(0.0..=1.0).contains(&self.fix_flow_probability) {
            return bad("fix_flow_probability must lie in [0, 1]");
        }
        if !(self.base_spread.is_finite() && self.base_spread >= 0.0) {
            return bad("base_spread must be non-negative");
        }
        if self.tick_decimals > 12 {
            return bad("tick_decimals must be at most 12");
        }
        if self.sample_period_ms <= 0 || self.sample_period_ms % MS_PER_SECOND != 0 {
            return bad("sample_period_ms must be a positive whole number of seconds");
        }
        if self.window_half_width_ms < 0 || self.window_half_width_ms % self.sample_period_ms != 0 {
            return bad("window half width must be a non-negative multiple of the sample period");
        }
        if !(1..=MS_PER_SECOND).contains(&self.manipulation_tail_ms) {
            return bad("manipulation_tail_ms must lie in (0, 1000]");
        }
        if !(self.trade_impact.is_finite() && self.trade_impact.abs() < 0.01) {
            return bad("trade_impact must be a small fraction");
        }
        if self.impact_half_life_s.is_some_and(|h| !(h.is_finite() && h > 0.0)) {
            return bad("impact_half_life_s must be positive");
        }
        Ok(())
    }

    /// London date of simulated day `day_index` (business days only).
    pub fn date_of(&self, day_index: usize) -> NaiveDate {
        let mut start = self.start_date;
        while !crate::types::is_weekday(start) {
            start += Duration::days(1);
        }
        let weekday = start.weekday().num_days_from_monday() as usize;
        let weeks = day_index / 5;
        let rem = day_index % 5;
        let extra = if weekday + rem >= 5 { 2 } else { 0 };
        start + Duration::days((weeks * 7 + rem + extra) as i64)
    }

    /// Local millisecond of day of the fix.
    fn fix_local_ms(&self) -> i64 {
        self.fix_time.num_seconds_from_midnight() as i64 * MS_PER_SECOND
    }
}

/// Everything the generator needs for one day, resolved up front.
struct DayPlan {
    tick: f64,
    spread_ticks: i64,
    /// Local second starts (ms) whose trades land in sampling intervals of the window.
    window_first_second: i64,
    window_last_second: i64,
    day_imbalance: f64,
}

const SPAN_START_MS: i64 = -30 * MS_PER_SECOND;
const SECONDS_PER_DAY: i64 = MS_PER_DAY / MS_PER_SECOND;

fn day_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Receives a day's events in time order; prices are in grid ticks and
/// times are London-local milliseconds of the simulated date.
trait Sink {
    fn second(&mut self, _mid: f64) {}
    fn quote(&mut self, local_ms: i64, bid: i64, ask: i64);
    fn trade(&mut self, local_ms: i64, price: i64);
}

struct TickSink {
    utc_base: i64,
    decimals: u32,
    source: SourceId,
    ticks: Vec<Tick>,
}

impl Sink for TickSink {
    fn quote(&mut self, local_ms: i64, bid: i64, ask: i64) {
        self.ticks.push(Tick::Quote(Quote {
            timestamp: self.utc_base + local_ms,
            bid: Decimal::new(bid, self.decimals),
            ask: Decimal::new(ask, self.decimals),
            source: self.source.clone(),
        }));
    }

    fn trade(&mut self, local_ms: i64, price: i64) {
        self.ticks.push(Tick::Trade(Trade {
            timestamp: self.utc_base + local_ms,
            price: Decimal::new(price, self.decimals),
            source: self.source.clone(),
        }));
    }
}

struct MidSink(Vec<f64>);

impl Sink for MidSink {
    fn second(&mut self, mid: f64) {
        self.0.push(mid);
    }
    fn quote(&mut self, _: i64, _: i64, _: i64) {}
    fn trade(&mut self, _: i64, _: i64) {}
}

/// Centred bars built straight from the trades, in grid ticks.
struct BarSink {
    bars: Vec<Option<[i64; 4]>>,
}

impl BarSink {
    fn new() -> Self {
        Self {
            bars: vec![None; MINUTES_PER_DAY],
        }
    }

    fn finish(self, date: NaiveDate, decimals: u32) -> Vec<MinuteBar> {
        let to_f64 = |p: i64| Decimal::new(p, decimals).to_f64().expect("finite decimal");
        self.bars
            .into_iter()
            .enumerate()
            .filter_map(|(m, bar)| {
                let [open, high, low, close] = bar?;
                Some(MinuteBar {
                    date,
                    minute: m as u16,
                    open: to_f64(open),
                    high: to_f64(high),
                    low: to_f64(low),
                    close: to_f64(close),
                })
            })
            .collect()
    }
}

impl Sink for BarSink {
    fn quote(&mut self, _: i64, _: i64, _: i64) {}

    fn trade(&mut self, local_ms: i64, price: i64) {
        let minute = (local_ms + MS_PER_MINUTE / 2).div_euclid(MS_PER_MINUTE);
        let Some(slot) = usize::try_from(minute).ok().and_then(|m| self.bars.get_mut(m)) else {
            return;
        };
        match slot {
            Some([_, high, low, close]) => {
                *high = (*high).max(price);
                *low = (*low).min(price);
                *close = price;
            }
            None => *slot = Some([price; 4]),
        }
    }
}

struct SpanSink {
    bars: BarSink,
    ticks: TickSink,
    span: Range<i64>,
}

impl Sink for SpanSink {
    fn quote(&mut self, local_ms: i64, bid: i64, ask: i64) {
        if self.span.contains(&local_ms) {
            self.ticks.quote(local_ms, bid, ask);
        }
    }

    fn trade(&mut self, local_ms: i64, price: i64) {
        self.bars.trade(local_ms, price);
        if self.span.contains(&local_ms) {
            self.ticks.trade(local_ms, price);
        }
    }
}

/// Simulate one day's tick stream.
pub fn gen_day(scenario: &SimScenario, day_index: usize) -> Vec<Tick> {
    let date = scenario.date_of(day_index);
    let mut sink = TickSink {
        utc_base: london_to_utc_ms(date, 0),
        decimals: scenario.tick_decimals,
        source: SourceId::new(&scenario.source),
        ticks: Vec::with_capacity((SECONDS_PER_DAY as f64 * (1.0 + 2.0 * scenario.tick_rate)) as usize),
    };
    generate(scenario, day_index, &mut sink);
    sink.ticks
}

/// Latent mid at the start of every simulated second of a day.
pub fn latent_mids(scenario: &SimScenario, day_index: usize) -> Vec<f64> {
    let mut sink = MidSink(Vec::with_capacity(SECONDS_PER_DAY as usize));
    generate(scenario, day_index, &mut sink);
    sink.0
}

/// Minute bars of one simulated day; same as `ticks_to_bars(&gen_day(..))`
/// without materialising the ticks.
pub fn gen_day_bars(scenario: &SimScenario, day_index: usize) -> Vec<MinuteBar> {
    let mut sink = BarSink::new();
    generate(scenario, day_index, &mut sink);
    sink.finish(scenario.date_of(day_index), scenario.tick_decimals)
}

/// Bars of the whole day together with the ticks whose London-local time
/// lies in `local_span`, from a single pass over the day.
pub fn gen_day_bars_and_ticks(scenario: &SimScenario, day_index: usize, local_span: Range<i64>) -> (Vec<MinuteBar>, Vec<Tick>) {
    let date = scenario.date_of(day_index);
    let mut sink = SpanSink {
        bars: BarSink::new(),
        ticks: TickSink {
            utc_base: london_to_utc_ms(date, 0),
            decimals: scenario.tick_decimals,
            source: SourceId::new(&scenario.source),
            ticks: Vec::new(),
        },
        span: local_span,
    };
    generate(scenario, day_index, &mut sink);
    (sink.bars.finish(date, scenario.tick_decimals), sink.ticks.ticks)
}

fn generate(scenario: &SimScenario, day_index: usize, sink: &mut impl Sink) {
    let mut market = day_rng(scenario.seed, 2 * day_index as u64);
    let mut manip = day_rng(scenario.seed, 2 * day_index as u64 + 1);

    let has_flow = market.gen::<f64>() < scenario.fix_flow_probability;
    let coin = market.gen::<bool>();
    let sign = match scenario.imbalance_direction {
        ImbalanceDirection::Fixed => scenario.flow_imbalance.signum(),
        ImbalanceDirection::RandomDaily => {
            if coin {
                1.0
            } else {
                -1.0
            }
        }
    };
    let tick = 10f64.powi(-(scenario.tick_decimals as i32));
    let fix = scenario.fix_local_ms();
    let plan = DayPlan {
        tick,
        spread_ticks: (scenario.base_spread / tick).round() as i64,
        window_first_second: fix - scenario.window_half_width_ms - scenario.sample_period_ms,
        window_last_second: fix + scenario.window_half_width_ms - MS_PER_SECOND,
        day_imbalance: if has_flow { sign * scenario.flow_imbalance.abs() } else { 0.0 },
    };

    let in_window_rate = scenario.tick_rate * scenario.compression_factor;
    let normal_arrivals = Poisson::new(scenario.tick_rate).expect("positive rate");
    let window_arrivals = Poisson::new(in_window_rate).expect("positive rate");
    let manipulating = scenario.manipulation == Manipulation::EndOfInterval && scenario.manipulation_size > 0;
    // Per-second retention of the transient price displacement.
    let retention = scenario.impact_half_life_s.map(|h| 0.5f64.powf(1.0 / h));

    let mut efficient = scenario.base_price;
    let mut displacement = 0.0f64;
    // (offset ms, buy?, manipulation?)
    let mut events: Vec<(i64, bool, bool)> = Vec::new();

    for second in 0..SECONDS_PER_DAY {
        let z: f64 = market.sample(StandardNormal);
        if second > 0 {
            efficient *= 1.0 + scenario.step_vol * z;
            if let Some(r) = retention {
                displacement *= r;
            }
        }
        let mut mid = efficient * (1.0 + displacement);
        sink.second(mid);
        let local = SPAN_START_MS + second * MS_PER_SECOND;
        let (bid, ask) = grid_quote(&plan, mid);
        sink.quote(local, bid, ask);

        let in_window = local >= plan.window_first_second && local <= plan.window_last_second;
        let (arrivals, p_buy) = if in_window {
            (window_arrivals.sample(&mut market) as usize, 0.5 * (1.0 + plan.day_imbalance))
        } else {
            (normal_arrivals.sample(&mut market) as usize, 0.5)
        };
        events.clear();
        for _ in 0..arrivals {
            let offset = market.gen_range(0..MS_PER_SECOND);
            let buy = market.gen::<f64>() < p_buy;
            events.push((offset, buy, false));
        }
        // the sampling interval closing at local + 1 s ends inside the window
        let interval_end = local + MS_PER_SECOND;
        if manipulating
            && in_window
            && (interval_end - (fix - scenario.window_half_width_ms)) % scenario.sample_period_ms == 0
        {
            let buy = scenario.manipulation_side == OrderSide::Buy;
            for _ in 0..scenario.manipulation_size {
                let offset = MS_PER_SECOND - manip.gen_range(1..=scenario.manipulation_tail_ms);
                events.push((offset, buy, true));
            }
        }
        events.sort_by_key(|e| (e.0, e.2));

        for &(offset, buy, _) in &events {
            let (bid, ask) = grid_quote(&plan, mid);
            sink.trade(local + offset, if buy { ask } else { bid });
            if scenario.trade_impact != 0.0 {
                let side = if buy { OrderSide::Buy } else { OrderSide::Sell };
                let push = scenario.trade_impact * side.sign();
                match retention {
                    Some(_) => displacement += push,
                    None => efficient *= 1.0 + push,
                }
                mid = efficient * (1.0 + displacement);
                let (bid, ask) = grid_quote(&plan, mid);
                sink.quote(local + offset, bid, ask);
            }
        }
    }
}

/// Bid and ask on the tick grid, in ticks.
fn grid_quote(plan: &DayPlan, mid: f64) -> (i64, i64) {
    let bid = ((mid - 0.5 * plan.spread_ticks as f64 * plan.tick) / plan.tick).round() as i64;
    (bid.max(1), bid.max(1) + plan.spread_ticks)
}

/// Aggregate trades into centred London minute bars.
///
/// Bar `m` takes the trades in `[m - 30 s, m + 30 s)`; open and close are the
/// first and last trade in stream order. Minutes without trades get no bar.
pub fn ticks_to_bars(ticks: &[Tick]) -> Vec<MinuteBar> {
    struct Acc {
        open: f64,
        high: f64,
        low: f64,
        close: f64,
    }
    let mut bars: BTreeMap<(NaiveDate, u16), Acc> = BTreeMap::new();
    let mut last_key = None;
    let mut current: Option<Acc> = None;
    let flush = |key: Option<(NaiveDate, u16)>, acc: Option<Acc>, bars: &mut BTreeMap<_, Acc>| {
        if let (Some(k), Some(a)) = (key, acc) {
            match bars.get_mut(&k) {
                Some(prev) => {
                    prev.high = prev.high.max(a.high);
                    prev.low = prev.low.min(a.low);
                    prev.close = a.close;
                }
                None => {
                    bars.insert(k, a);
                }
            }
        }
    };
    for tick in ticks {
        let Tick::Trade(t) = tick else { continue };
        let price = t.price.to_f64().expect("finite decimal");
        let key = centred_minute_label(t.timestamp);
        if last_key != Some(key) {
            flush(last_key, current.take(), &mut bars);
            last_key = Some(key);
        }
        match current.as_mut() {
            Some(a) => {
                a.high = a.high.max(price);
                a.low = a.low.min(price);
                a.close = price;
            }
            None => {
                current = Some(Acc {
                    open: price,
                    high: price,
                    low: price,
                    close: price,
                })
            }
        }
    }
    flush(last_key, current.take(), &mut bars);
    bars.into_iter()
        .map(|((date, minute), a)| MinuteBar {
            date,
            minute,
            open: a.open,
            high: a.high,
            low: a.low,
            close: a.close,
        })
        .collect()
}

/// Bars of every simulated day, keyed by date. Days are generated in
/// parallel; the result does not depend on scheduling.
pub fn simulate_bars(scenario: &SimScenario) -> BTreeMap<NaiveDate, Vec<MinuteBar>> {
    (0..scenario.day_count)
        .into_par_iter()
        .map(|d| (scenario.date_of(d), gen_day_bars(scenario, d)))
        .collect::<Vec<_>>()
        .into_iter()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::Weekday;

    fn px(s: &str) -> Decimal {
        s.parse().unwrap()
    }

    fn quiet() -> SimScenario {
        SimScenario {
            step_vol: 0.0,
            ..SimScenario::default()
        }
    }

    #[test]
    fn zero_volatility_keeps_mid_at_base() {
        let ticks = gen_day(&quiet(), 0);
        assert!(!ticks.is_empty());
        for t in &ticks {
            match t {
                Tick::Quote(q) => assert_eq!(q.mid(), px("1.3")),
                Tick::Trade(tr) => assert!(tr.price == px("1.2999") || tr.price == px("1.3001")),
            }
        }
    }

    #[test]
    fn deterministic_per_seed_and_day() {
        let s = SimScenario {
            trade_impact: 1e-6,
            ..SimScenario::default()
        };
        assert_eq!(gen_day(&s, 3), gen_day(&s, 3));
        assert_ne!(gen_day(&s, 3), gen_day(&s, 4));
    }

    #[test]
    fn stream_is_time_ordered_and_spans_the_day() {
        let s = SimScenario::default();
        let ticks = gen_day(&s, 0);
        assert!(ticks.windows(2).all(|w| w[0].timestamp() <= w[1].timestamp()));
        let bars = ticks_to_bars(&ticks);
        assert_eq!(bars.len(), 1440);
        assert!(bars.iter().all(|b| b.date == s.date_of(0)));
    }

    #[test]
    fn direct_bars_match_tick_bars() {
        let s = SimScenario {
            trade_impact: 2e-6,
            impact_half_life_s: Some(20.0),
            compression_factor: 8.0,
            flow_imbalance: 0.6,
            ..SimScenario::default()
        };
        for d in [0, 7] {
            assert_eq!(gen_day_bars(&s, d), ticks_to_bars(&gen_day(&s, d)));
        }
    }

    #[test]
    fn span_ticks_are_a_slice_of_the_full_stream() {
        let s = SimScenario {
            trade_impact: 1e-6,
            ..SimScenario::default()
        };
        let span = 15 * 3_600_000..16 * 3_600_000 + 60_000;
        let (bars, ticks) = gen_day_bars_and_ticks(&s, 3, span.clone());
        let full = gen_day(&s, 3);
        let base = london_to_utc_ms(s.date_of(3), 0);
        let expected: Vec<Tick> = full.iter().filter(|t| span.contains(&(t.timestamp() - base))).cloned().collect();
        assert_eq!(ticks, expected);
        assert_eq!(bars, ticks_to_bars(&full));
    }

    #[test]
    fn business_day_calendar() {
        let s = SimScenario::default();
        assert_eq!(s.date_of(0), NaiveDate::from_ymd_opt(2010, 1, 4).unwrap());
        assert_eq!(s.date_of(4), NaiveDate::from_ymd_opt(2010, 1, 8).unwrap());
        assert_eq!(s.date_of(5), NaiveDate::from_ymd_opt(2010, 1, 11).unwrap());
        let mid_week = SimScenario {
            start_date: NaiveDate::from_ymd_opt(2010, 1, 7).unwrap(),
            ..SimScenario::default()
        };
        let dates: Vec<_> = (0..12).map(|i| mid_week.date_of(i)).collect();
        assert!(dates.iter().all(|d| !matches!(d.weekday(), Weekday::Sat | Weekday::Sun)));
        assert!(dates.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(dates[2], NaiveDate::from_ymd_opt(2010, 1, 11).unwrap());
    }

    #[test]
    fn bar_from_single_trade_and_sequence() {
        let src = SourceId::new("S");
        let base = london_to_utc_ms(NaiveDate::from_ymd_opt(2012, 1, 10).unwrap(), 600 * 60_000);
        let tr = |ts: i64, p: &str| Tick::Trade(Trade::new(ts, px(p), src.clone()).unwrap());
        let bars = ticks_to_bars(&[tr(base, "1.5")]);
        assert_eq!(bars.len(), 1);
        assert_eq!((bars[0].open, bars[0].high, bars[0].low, bars[0].close), (1.5, 1.5, 1.5, 1.5));
        assert_eq!(bars[0].minute, 600);

        let seq = [tr(base - 20_000, "1.0"), tr(base, "1.2"), tr(base + 1_000, "0.9"), tr(base + 29_999, "1.1")];
        let bars = ticks_to_bars(&seq);
        assert_eq!(bars.len(), 1);
        assert_eq!((bars[0].open, bars[0].high, bars[0].low, bars[0].close), (1.0, 1.2, 0.9, 1.1));
    }

    #[test]
    fn validation() {
        assert!(SimScenario::default().validate().is_ok());
        let bad = SimScenario {
            flow_imbalance: 1.5,
            ..SimScenario::default()
        };
        assert!(bad.validate().is_err());
        let bad = SimScenario {
            tick_rate: 0.0,
            ..SimScenario::default()
        };
        assert!(bad.validate().is_err());
    }
}
