use std::collections::VecDeque;

use rust_decimal::prelude::FromPrimitive;
use rust_decimal::Decimal;

use crate::types::{Price, Tick};

/// Spacing of the surveillance samples of the trade rate.
pub const REFERENCE_BOUNDARY_MS: i64 = 15_000;

/// Deviation filter against a market-level reference.
///
/// The reference is the median of the last `reference_samples` trade rates
/// captured at 15-second boundaries (the last trade at or before each
/// boundary). Ticks are judged against the reference prevailing at their own
/// timestamp; trades by price, quotes by mid. Crossed quotes are always
/// dropped, and ticks arriving before any reference exists are kept.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QualityFilter {
    pub tolerance: f64,
    pub reference_samples: usize,
}

impl QualityFilter {
    pub fn new(tolerance: f64) -> Self {
        Self {
            tolerance,
            reference_samples: 20,
        }
    }

    pub fn apply(&self, ticks: &[Tick]) -> Vec<Tick> {
        if ticks.is_empty() {
            return Vec::new();
        }
        let tolerance = Decimal::from_f64(self.tolerance).unwrap_or(Decimal::MAX);
        let mut order: Vec<usize> = (0..ticks.len()).collect();
        order.sort_by_key(|&i| ticks[i].timestamp());
        let trades: Vec<(i64, Price)> = order
            .iter()
            .filter_map(|&i| match &ticks[i] {
                Tick::Trade(tr) => Some((tr.timestamp, tr.price)),
                Tick::Quote(_) => None,
            })
            .collect();
        let mut reference = ReferenceTrack::new(&trades, self.reference_samples.max(1));

        // Judged in time order, emitted in input order.
        let mut keep = vec![false; ticks.len()];
        for &i in &order {
            let tick = &ticks[i];
            let price = match tick {
                Tick::Quote(q) if q.is_crossed() => continue,
                Tick::Quote(q) => q.mid(),
                Tick::Trade(t) => t.price,
            };
            keep[i] = match reference.at(tick.timestamp()) {
                Some(r) => (price - r).abs() <= tolerance * r,
                None => true,
            };
        }
        ticks
            .iter()
            .zip(keep)
            .filter_map(|(t, k)| k.then(|| t.clone()))
            .collect()
    }
}

/// Filter with the default reference length.
pub fn quality_filter(ticks: &[Tick], tolerance: f64) -> Vec<Tick> {
    QualityFilter::new(tolerance).apply(ticks)
}

/// Rolling median of boundary samples, advanced monotonically in time.
struct ReferenceTrack<'a> {
    trades: &'a [(i64, Price)],
    window: usize,
    next_trade: usize,
    last_trade: Option<Price>,
    samples: VecDeque<Option<Price>>,
    /// Index of the last boundary folded into `samples`.
    boundary: Option<i64>,
    cached: Option<Price>,
}

impl<'a> ReferenceTrack<'a> {
    fn new(trades: &'a [(i64, Price)], window: usize) -> Self {
        Self {
            trades,
            window,
            next_trade: 0,
            last_trade: None,
            samples: VecDeque::with_capacity(window),
            boundary: None,
            cached: None,
        }
    }

    fn at(&mut self, ts: i64) -> Option<Price> {
        let target = ts.div_euclid(REFERENCE_BOUNDARY_MS);
        let mut b = match self.boundary {
            Some(b) if b >= target => return self.cached,
            Some(b) if target - b > self.window as i64 => target - self.window as i64,
            Some(b) => b,
            None => target - self.window as i64,
        };
        while b < target {
            b += 1;
            let edge = b * REFERENCE_BOUNDARY_MS;
            while let Some(&(t, p)) = self.trades.get(self.next_trade) {
                if t > edge {
                    break;
                }
                self.last_trade = Some(p);
                self.next_trade += 1;
            }
            if self.samples.len() == self.window {
                self.samples.pop_front();
            }
            self.samples.push_back(self.last_trade);
        }
        self.boundary = Some(target);
        let mut present: Vec<Price> = self.samples.iter().flatten().copied().collect();
        self.cached = super::compute::median(&mut present);
        self.cached
    }
}
