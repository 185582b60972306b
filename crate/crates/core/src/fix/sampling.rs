use std::borrow::Borrow;

use crate::types::{FixWindow, Price, Tick};

/// What was captured at the end of one sampling interval.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct IntervalSnapshot {
    pub interval_index: usize,
    pub last_bid: Option<Price>,
    pub last_ask: Option<Price>,
    pub last_trade: Option<Price>,
    /// `last_ask - last_bid`, present iff both sides are.
    pub spread: Option<Price>,
    pub last_quote_ts: Option<i64>,
    pub last_trade_ts: Option<i64>,
}

impl IntervalSnapshot {
    pub fn empty(interval_index: usize) -> Self {
        Self {
            interval_index,
            ..Self::default()
        }
    }

    pub fn has_quote(&self) -> bool {
        self.last_bid.is_some() && self.last_ask.is_some()
    }

    fn set_quote(&mut self, ts: i64, bid: Price, ask: Price) {
        self.last_bid = Some(bid);
        self.last_ask = Some(ask);
        self.spread = Some(ask - bid);
        self.last_quote_ts = Some(ts);
    }

    fn set_trade(&mut self, ts: i64, price: Price) {
        self.last_trade = Some(price);
        self.last_trade_ts = Some(ts);
    }
}

/// Capture the last quote and the last trade of every sampling interval.
///
/// "Last" means greatest timestamp; among equal timestamps the later event in
/// the stream wins. Intervals without events of a kind leave those fields
/// empty; nothing is carried forward from earlier intervals.
pub fn sample_intervals<T: Borrow<Tick>>(ticks: impl IntoIterator<Item = T>, window: &FixWindow) -> Vec<IntervalSnapshot> {
    let mut snaps: Vec<IntervalSnapshot> = (0..window.sample_count()).map(IntervalSnapshot::empty).collect();
    for tick in ticks {
        let tick = tick.borrow();
        let Some(i) = window.interval_of(tick.timestamp()) else {
            continue;
        };
        let snap = &mut snaps[i];
        match tick {
            Tick::Quote(q) => {
                if snap.last_quote_ts.map_or(true, |t| q.timestamp >= t) {
                    snap.set_quote(q.timestamp, q.bid, q.ask);
                }
            }
            Tick::Trade(t) => {
                if snap.last_trade_ts.map_or(true, |prev| t.timestamp >= prev) {
                    snap.set_trade(t.timestamp, t.price);
                }
            }
        }
    }
    snaps
}

/// Merge per-source snapshots of the same window, interval by interval.
///
/// Equivalent to sampling the merged tick stream: the most recent quote and
/// trade across sources win; on equal timestamps the earlier-listed source
/// is kept.
pub fn pool_snapshots(sources: &[&[IntervalSnapshot]]) -> Vec<IntervalSnapshot> {
    let n = sources.iter().map(|s| s.len()).max().unwrap_or(0);
    (0..n)
        .map(|i| {
            let mut out = IntervalSnapshot::empty(i);
            for snap in sources.iter().filter_map(|s| s.get(i)) {
                if let (Some(ts), Some(b), Some(a)) = (snap.last_quote_ts, snap.last_bid, snap.last_ask) {
                    if out.last_quote_ts.map_or(true, |prev| ts > prev) {
                        out.set_quote(ts, b, a);
                    }
                }
                if let (Some(ts), Some(p)) = (snap.last_trade_ts, snap.last_trade) {
                    if out.last_trade_ts.map_or(true, |prev| ts > prev) {
                        out.set_trade(ts, p);
                    }
                }
            }
            out
        })
        .collect()
}
