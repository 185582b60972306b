use std::collections::BTreeMap;

use rust_decimal::Decimal;

use super::sampling::{pool_snapshots, IntervalSnapshot};
use super::{FixError, FixResult, SourceUsed};
use crate::types::{CurrencyClass, PairConfig, Price, SourceId, TradeSourcePolicy};

/// Decimal places kept for the mean interval spread `S_M`.
///
/// A mean over n spreads is not generally a terminating decimal; rounding it
/// once keeps every later sum and difference exact.
pub const MARKET_SPREAD_DP: u32 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TradeSide {
    /// The trade hit the best bid.
    Bid,
    /// The trade lifted the best offer.
    Offer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    Side(TradeSide),
    Excluded,
}

/// A trade assigned to one side, with the opposite side inferred from the
/// interval spread.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClassifiedTrade {
    pub side: TradeSide,
    pub actual_rate: Price,
    pub inferred_rate: Price,
}

impl ClassifiedTrade {
    pub fn bid_rate(&self) -> Price {
        match self.side {
            TradeSide::Bid => self.actual_rate,
            TradeSide::Offer => self.inferred_rate,
        }
    }

    pub fn offer_rate(&self) -> Price {
        match self.side {
            TradeSide::Bid => self.inferred_rate,
            TradeSide::Offer => self.actual_rate,
        }
    }
}

/// Assign a trade to the side of the book it hit.
///
/// Trades at the quotes take that side. Trades outside the quotes walked the
/// book and are excluded. Trades strictly inside the spread go to the nearer
/// quote; a trade exactly at the mid is excluded.
pub fn classify_trade(price: Price, bid: Price, ask: Price) -> Classification {
    if price == bid {
        return Classification::Side(TradeSide::Bid);
    }
    if price == ask {
        return Classification::Side(TradeSide::Offer);
    }
    if price < bid || price > ask {
        return Classification::Excluded;
    }
    let to_bid = price - bid;
    let to_ask = ask - price;
    match to_bid.cmp(&to_ask) {
        std::cmp::Ordering::Less => Classification::Side(TradeSide::Bid),
        std::cmp::Ordering::Greater => Classification::Side(TradeSide::Offer),
        std::cmp::Ordering::Equal => Classification::Excluded,
    }
}

pub fn infer_opposite(price: Price, side: TradeSide, spread: Price) -> ClassifiedTrade {
    let inferred_rate = match side {
        TradeSide::Bid => price + spread,
        TradeSide::Offer => price - spread,
    };
    ClassifiedTrade {
        side,
        actual_rate: price,
        inferred_rate,
    }
}

/// Median; the mean of the two middle values for even sizes.
pub(crate) fn median(values: &mut [Price]) -> Option<Price> {
    if values.is_empty() {
        return None;
    }
    values.sort_unstable();
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / Decimal::TWO
    })
}

fn market_spread(snapshots: &[IntervalSnapshot]) -> Option<Price> {
    let spreads: Vec<Price> = snapshots.iter().filter_map(|s| s.spread).collect();
    if spreads.is_empty() {
        return None;
    }
    let sum: Price = spreads.iter().sum();
    Some((sum / Decimal::from(spreads.len())).round_dp(MARKET_SPREAD_DP))
}

/// Classified trades of every interval holding both a trade and a quote pair.
fn classified_trades(snapshots: &[IntervalSnapshot]) -> Vec<ClassifiedTrade> {
    snapshots
        .iter()
        .filter_map(|s| {
            let (trade, bid, ask, spread) = (s.last_trade?, s.last_bid?, s.last_ask?, s.spread?);
            match classify_trade(trade, bid, ask) {
                Classification::Side(side) => Some(infer_opposite(trade, side, spread)),
                Classification::Excluded => None,
            }
        })
        .collect()
}

fn around(mid: Price, spread: Price) -> (Price, Price) {
    let half = spread / Decimal::TWO;
    (mid - half, mid + half)
}

/// Trade-path fix if enough intervals carry a valid trade.
fn trade_path(snapshots: &[IntervalSnapshot], config: &PairConfig) -> Option<FixResult> {
    let classified = classified_trades(snapshots);
    if classified.is_empty() || classified.len() < config.min_trade_intervals() {
        return None;
    }
    let mut bids: Vec<Price> = classified.iter().map(ClassifiedTrade::bid_rate).collect();
    let mut offers: Vec<Price> = classified.iter().map(ClassifiedTrade::offer_rate).collect();
    let median_bid = median(&mut bids)?;
    let median_offer = median(&mut offers)?;
    let mid = (median_bid + median_offer) / Decimal::TWO;
    let s_m = market_spread(snapshots);
    let spread_used = s_m.map_or(config.standard_spread, |m| m.max(config.standard_spread));
    let (fix_bid, fix_ask) = around(mid, spread_used);
    Some(FixResult {
        mid,
        fix_bid,
        fix_ask,
        spread_used,
        market_spread: s_m,
        n_trade_points: classified.len(),
        used_quote_fallback: false,
        source_used: SourceUsed::Unattributed,
    })
}

/// Trade-currency fix over one set of snapshots, falling back to the quote
/// medians of the same snapshots when too few valid trades were captured.
pub fn compute_trade_fix(snapshots: &[IntervalSnapshot], config: &PairConfig) -> Result<FixResult, FixError> {
    if let Some(fix) = trade_path(snapshots, config) {
        return Ok(fix);
    }
    let mut fix = compute_quote_fix(snapshots)?;
    fix.used_quote_fallback = true;
    Ok(fix)
}

/// Quote-median fix: mid of the median bid and median ask.
pub fn compute_quote_fix(snapshots: &[IntervalSnapshot]) -> Result<FixResult, FixError> {
    let mut bids: Vec<Price> = snapshots.iter().filter(|s| s.has_quote()).filter_map(|s| s.last_bid).collect();
    let mut asks: Vec<Price> = snapshots.iter().filter(|s| s.has_quote()).filter_map(|s| s.last_ask).collect();
    let (Some(median_bid), Some(median_ask)) = (median(&mut bids), median(&mut asks)) else {
        return Err(FixError::NoData);
    };
    let mid = (median_bid + median_ask) / Decimal::TWO;
    let spread_used = median_ask - median_bid;
    let (fix_bid, fix_ask) = around(mid, spread_used);
    Ok(FixResult {
        mid,
        fix_bid,
        fix_ask,
        spread_used,
        market_spread: market_spread(snapshots),
        n_trade_points: 0,
        used_quote_fallback: false,
        source_used: SourceUsed::Unattributed,
    })
}

fn valid_quotes(snaps: &[IntervalSnapshot]) -> usize {
    snaps.iter().filter(|s| s.has_quote()).count()
}

fn latest_quote(snaps: &[IntervalSnapshot]) -> Option<i64> {
    snaps.iter().filter(|s| s.has_quote()).filter_map(|s| s.last_quote_ts).max()
}

/// Quote fix from the source with the most valid quote snapshots.
fn quote_selection(per_source: &BTreeMap<SourceId, Vec<IntervalSnapshot>>) -> Result<FixResult, FixError> {
    let best_count = per_source.values().map(|s| valid_quotes(s)).max().unwrap_or(0);
    if best_count == 0 {
        return Err(FixError::NoData);
    }
    let best: Vec<(&SourceId, &Vec<IntervalSnapshot>)> =
        per_source.iter().filter(|(_, s)| valid_quotes(s) == best_count).collect();

    let single = |(id, snaps): (&SourceId, &Vec<IntervalSnapshot>)| -> Result<FixResult, FixError> {
        let mut fix = compute_quote_fix(snaps)?;
        fix.source_used = SourceUsed::Single(id.clone());
        Ok(fix)
    };

    if best.len() == 1 {
        return single(best[0]);
    }
    if best_count == 1 {
        // One datapoint each: the most recent update wins; the first listed on ties.
        let mut pick = best[0];
        for cand in &best[1..] {
            if latest_quote(cand.1) > latest_quote(pick.1) {
                pick = *cand;
            }
        }
        return single(pick);
    }

    let fixes = best
        .iter()
        .map(|(_, s)| compute_quote_fix(s))
        .collect::<Result<Vec<_>, _>>()?;
    let n = Decimal::from(fixes.len());
    let mid = fixes.iter().map(|f| f.mid).sum::<Price>() / n;
    let spread_used = fixes.iter().map(|f| f.spread_used).sum::<Price>() / n;
    let spreads: Vec<Price> = fixes.iter().filter_map(|f| f.market_spread).collect();
    let market_spread = (!spreads.is_empty())
        .then(|| (spreads.iter().sum::<Price>() / Decimal::from(spreads.len())).round_dp(MARKET_SPREAD_DP));
    let (fix_bid, fix_ask) = around(mid, spread_used);
    Ok(FixResult {
        mid,
        fix_bid,
        fix_ask,
        spread_used,
        market_spread,
        n_trade_points: 0,
        used_quote_fallback: false,
        source_used: SourceUsed::Averaged,
    })
}

/// Choose the data feeding the fix across sources.
///
/// Trade currencies first try the trade path: the primary source alone (then
/// pooled with the secondaries if it is short of trades) or all sources pooled
/// from the start, depending on the pair's policy. Quote currencies, and trade
/// currencies without enough trades, use the quote path on the single source
/// with the most valid quotes, with ties resolved by averaging or, when every
/// tied source has one datapoint, by recency.
pub fn select_source(
    per_source: &BTreeMap<SourceId, Vec<IntervalSnapshot>>,
    config: &PairConfig,
) -> Result<FixResult, FixError> {
    if config.currency_class == CurrencyClass::Trade {
        let primary = config
            .sources
            .first()
            .map(|s| SourceId::new(s))
            .and_then(|id| per_source.get_key_value(&id));
        let pooled = || {
            let all: Vec<&[IntervalSnapshot]> = per_source.values().map(Vec::as_slice).collect();
            pool_snapshots(&all)
        };
        let attempt = match (config.trade_source_policy(), primary) {
            (TradeSourcePolicy::PrimaryWithSupplement, Some((id, snaps))) => trade_path(snaps, config)
                .map(|mut f| {
                    f.source_used = SourceUsed::Single(id.clone());
                    f
                })
                .or_else(|| {
                    (per_source.len() > 1)
                        .then(|| trade_path(&pooled(), config))
                        .flatten()
                        .map(|mut f| {
                            f.source_used = SourceUsed::Pooled;
                            f
                        })
                }),
            _ => trade_path(&pooled(), config).map(|mut f| {
                f.source_used = if per_source.len() == 1 {
                    SourceUsed::Single(per_source.keys().next().cloned().expect("one source"))
                } else {
                    SourceUsed::Pooled
                };
                f
            }),
        };
        if let Some(fix) = attempt {
            return Ok(fix);
        }
    }
    let mut fix = quote_selection(per_source)?;
    fix.used_quote_fallback = config.currency_class == CurrencyClass::Trade;
    Ok(fix)
}
