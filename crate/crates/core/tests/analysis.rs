use std::collections::BTreeMap;

use chrono::{Datelike, Duration, NaiveDate};
use fixlab_core::centered::{
    aggregate, centered_extrema, centered_extrema_with, directional_correlation, CorrelationError, CENTERED_HALF_WIDTH,
};
use fixlab_core::extrema::{
    build_surface, build_surface_on, daily_global_extremum, delta_r, period_returns, ExtremumKind, Side, SurfaceGrid,
};
use fixlab_core::ingest::{DayBars, Dataset, PeriodTag};
use fixlab_core::stats::chi_square_homogeneity;
use fixlab_core::types::{PriceStream, MINUTES_PER_DAY};
use fixlab_core::vol::{annualisation_factor, detect_spikes, minute_returns, vol_profile, VolAccumulator};
use fixlab_testkit::{oracle_centered, random_day};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

const STREAMS: [PriceStream; 4] = [PriceStream::Open, PriceStream::High, PriceStream::Low, PriceStream::Close];

fn start() -> NaiveDate {
    NaiveDate::from_ymd_opt(2011, 3, 1).unwrap()
}

/// Random complete days on consecutive calendar dates.
fn random_dataset(seed: u64, days: usize) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Dataset {
        pair: "TEST".into(),
        days: (0..days).map(|i| random_day(&mut rng, start() + Duration::days(i as i64))).collect(),
        period: PeriodTag::Full,
    }
}

fn scaled(ds: &Dataset, factor: f64) -> Dataset {
    Dataset {
        days: ds
            .days
            .iter()
            .map(|d| DayBars::new(d.date, d.bars().iter().map(|b| b.scaled(factor))).unwrap())
            .collect(),
        ..ds.clone()
    }
}

fn prices(day: &DayBars, stream: PriceStream) -> Vec<f64> {
    day.bars().iter().map(|b| b.price(stream)).collect()
}

#[test]
fn minute_returns_match_direct_computation() {
    let ds = random_dataset(1, 6);
    let m = minute_returns(&ds, PriceStream::Close).unwrap();
    for (i, day) in ds.days.iter().enumerate() {
        let p = prices(day, PriceStream::Close);
        for t in 1..MINUTES_PER_DAY {
            assert_eq!(m.get(i, t), Some((p[t] - p[t - 1]) / p[t - 1]));
        }
        let expected_first = (i > 0).then(|| {
            let prev = prices(&ds.days[i - 1], PriceStream::Close)[MINUTES_PER_DAY - 1];
            (p[0] - prev) / prev
        });
        assert_eq!(m.get(i, 0), expected_first);
    }
}

#[test]
fn minute_zero_is_absent_across_a_calendar_gap() {
    let mut ds = random_dataset(2, 3);
    ds.days.remove(1);
    let m = minute_returns(&ds, PriceStream::Open).unwrap();
    assert_eq!(m.get(1, 0), None);
    assert!(m.get(1, 1).is_some());
}

#[test]
fn profile_matches_two_pass_standard_deviation() {
    let ds = random_dataset(3, 40);
    let m = minute_returns(&ds, PriceStream::Close).unwrap();
    let profile = vol_profile(&m);
    for t in 0..MINUTES_PER_DAY {
        let xs: Vec<f64> = (0..m.day_count()).filter_map(|d| m.get(d, t)).collect();
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let expected = var.sqrt() * annualisation_factor();
        let got = profile.sigma[t].unwrap();
        assert!((got - expected).abs() <= 1e-12 * expected.max(1e-300), "minute {t}: {got} vs {expected}");
        assert_eq!(profile.sample_counts[t], xs.len() as u64);
    }
}

#[test]
fn injected_volatility_is_flagged_at_the_fix_minute() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let normal = Normal::new(0.0, 1e-4).unwrap();
    let mut acc = VolAccumulator::new();
    for _ in 0..500 {
        let mut row: Vec<f64> = (0..MINUTES_PER_DAY).map(|_| normal.sample(&mut rng)).collect();
        row[960] *= 3.0;
        acc.push_row(&row);
    }
    let spikes = detect_spikes(&acc.finish(), 30, 4.0);
    assert_eq!(spikes.len(), 1, "{spikes:?}");
    assert_eq!(spikes[0].minute, 960);
    assert_eq!(spikes[0].label(), "15:59-16:00");
}

#[test]
fn binary_rescaling_leaves_every_result_unchanged() {
    let ds = random_dataset(5, 30);
    for factor in [0.25, 2.0, 1024.0] {
        let other = scaled(&ds, factor);
        for stream in STREAMS {
            let a = vol_profile(&minute_returns(&ds, stream).unwrap());
            let b = vol_profile(&minute_returns(&other, stream).unwrap());
            assert_eq!(a, b);
            assert_eq!(detect_spikes(&a, 30, 4.0), detect_spikes(&b, 30, 4.0));
        }
        assert_eq!(aggregate(&ds, &STREAMS), aggregate(&other, &STREAMS));
        let grid = SurfaceGrid {
            hours: (2..=23).collect(),
            delta_ts: vec![1, 10, 30],
        };
        for side in Side::ALL {
            let a = build_surface_on(&ds, side, ExtremumKind::Max, PriceStream::Close, &grid).unwrap();
            let b = build_surface_on(&other, side, ExtremumKind::Max, PriceStream::Close, &grid).unwrap();
            assert_eq!(a, b);
        }
    }
}

#[test]
fn additive_shift_keeps_price_differences() {
    let ds = random_dataset(6, 3);
    let shift = 0.37;
    let shifted = Dataset {
        days: ds
            .days
            .iter()
            .map(|d| {
                DayBars::new(
                    d.date,
                    d.bars().iter().map(|b| fixlab_core::types::MinuteBar {
                        open: b.open + shift,
                        high: b.high + shift,
                        low: b.low + shift,
                        close: b.close + shift,
                        ..*b
                    }),
                )
                .unwrap()
            })
            .collect(),
        ..ds.clone()
    };
    let a = minute_returns(&ds, PriceStream::Close).unwrap();
    let b = minute_returns(&shifted, PriceStream::Close).unwrap();
    for (i, day) in ds.days.iter().enumerate() {
        let p = prices(day, PriceStream::Close);
        for t in 1..MINUTES_PER_DAY {
            let num_a = a.get(i, t).unwrap() * p[t - 1];
            let num_b = b.get(i, t).unwrap() * (p[t - 1] + shift);
            assert!((num_a - num_b).abs() < 1e-12, "day {i} minute {t}");
        }
    }
}

fn oracle_returns(day: &DayBars, stream: PriceStream, t_f: usize, dt: usize, side: Side) -> Vec<f64> {
    let p = prices(day, stream);
    let anchor = if side == Side::Int1 { t_f - dt } else { t_f };
    let mut out = Vec::new();
    let mut t = anchor + 1;
    while t <= anchor + dt {
        out.push((p[t] - p[anchor]) / p[anchor]);
        t += 1;
    }
    out
}

#[test]
fn global_extremum_matches_exhaustive_search() {
    let ds = random_dataset(7, 25);
    let hours: Vec<usize> = (2..=23).collect();
    for day in &ds.days {
        for dt in [1, 2, 7, 30, 59] {
            for side in Side::ALL {
                for kind in ExtremumKind::ALL {
                    let mut best_hour = 0;
                    let mut best = -1.0;
                    for &h in &hours {
                        let r = oracle_returns(day, PriceStream::Close, h * 60, dt, side);
                        assert_eq!(period_returns(day, PriceStream::Close, h * 60, dt, side).unwrap(), r);
                        let e = match kind {
                            ExtremumKind::Max => r.iter().cloned().fold(f64::MIN, f64::max),
                            ExtremumKind::Min => r.iter().cloned().fold(f64::MAX, f64::min),
                        };
                        if e.abs() > best {
                            best = e.abs();
                            best_hour = h;
                        }
                    }
                    let got = daily_global_extremum(day, dt, side, kind, PriceStream::Close, &hours).unwrap();
                    assert_eq!(got, best_hour);
                }
            }
        }
    }
}

#[test]
fn surface_rows_account_for_every_day() {
    let ds = random_dataset(8, 20);
    let s = build_surface(&ds, Side::Int2, ExtremumKind::Min, PriceStream::Low);
    for dt in s.grid.delta_ts.clone() {
        assert_eq!(s.row(dt).unwrap().iter().sum::<u64>(), 20);
        let total: f64 = s.grid.hours.iter().map(|&h| s.probability(dt, h).unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }
}

#[test]
fn interval_sides_share_one_distribution_without_structure() {
    let ds = random_dataset(9, 400);
    let grid = SurfaceGrid {
        hours: (2..=23).collect(),
        delta_ts: vec![10],
    };
    for kind in ExtremumKind::ALL {
        let a = build_surface_on(&ds, Side::Int1, kind, PriceStream::Close, &grid).unwrap();
        let b = build_surface_on(&ds, Side::Int2, kind, PriceStream::Close, &grid).unwrap();
        let test = chi_square_homogeneity(a.row(10).unwrap(), b.row(10).unwrap()).unwrap();
        assert!(test.p_value > 0.01, "{kind}: {test:?}");
    }
}

#[test]
fn centred_events_match_window_scan() {
    let ds = random_dataset(10, 100);
    for day in &ds.days {
        for stream in STREAMS {
            let got: Vec<(usize, ExtremumKind, f64)> =
                centered_extrema(day, stream).into_iter().map(|e| (e.minute, e.kind, e.delta_r)).collect();
            let mut expected = oracle_centered(day, stream, CENTERED_HALF_WIDTH);
            expected.sort_by(|a, b| a.0.cmp(&b.0).then((a.1 as u8).cmp(&(b.1 as u8))));
            assert_eq!(got, expected, "{} {stream:?}", day.date);
        }
    }
}

#[test]
fn centred_events_of_one_kind_are_separated() {
    let ds = random_dataset(11, 50);
    for day in &ds.days {
        for hw in [3, 20] {
            let events = centered_extrema_with(day, PriceStream::Close, hw);
            for kind in ExtremumKind::ALL {
                let minutes: Vec<usize> = events.iter().filter(|e| e.kind == kind).map(|e| e.minute).collect();
                assert!(minutes.windows(2).all(|w| w[1] - w[0] > hw));
                assert!(minutes.iter().all(|&m| m >= hw && m < MINUTES_PER_DAY - hw));
            }
        }
    }
}

#[test]
fn aggregate_counts_are_per_stream_sums() {
    let ds = random_dataset(12, 30);
    let h = aggregate(&ds, &STREAMS);
    let events: Vec<_> = STREAMS
        .iter()
        .flat_map(|&s| ds.days.iter().flat_map(move |d| centered_extrema(d, s)))
        .collect();
    for kind in ExtremumKind::ALL {
        let k = h.kind(kind);
        for m in 0..MINUTES_PER_DAY {
            let direct = events.iter().filter(|e| e.minute == m && e.kind == kind).count() as u64;
            assert_eq!(k.count[m], direct);
            assert_eq!(k.stream_counts.iter().map(|c| c[m]).sum::<u64>(), direct);
            assert!((k.prob[m] - direct as f64 / 120.0).abs() < 1e-15);
            assert_eq!(k.size[m].is_some(), direct > 0);
        }
    }
}

#[test]
fn correlation_of_independent_signs_is_not_significant() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let dates: Vec<NaiveDate> = (0..200).map(|i| start() + Duration::days(i)).collect();
    let events: Vec<(NaiveDate, i8)> = dates.iter().map(|&d| (d, if rng.gen_bool(0.5) { 1 } else { -1 })).collect();
    let external: BTreeMap<NaiveDate, f64> = dates.iter().map(|&d| (d, rng.gen_range(-1.0..1.0))).collect();
    let c = directional_correlation(&events, &external, 2000, 1).unwrap();
    assert!(c.p_value > 0.01, "{c:?}");
    assert_eq!(c.n, 200);

    let aligned: BTreeMap<NaiveDate, f64> = events.iter().map(|&(d, s)| (d, s as f64 * 0.01)).collect();
    let c = directional_correlation(&events, &aligned, 2000, 1).unwrap();
    assert!((c.r - 1.0).abs() < 1e-12);
    assert!(c.p_value < 0.001);
}

#[test]
fn correlation_rejects_thin_or_constant_input() {
    let events: Vec<(NaiveDate, i8)> = (0..5).map(|i| (start() + Duration::days(i), 1)).collect();
    let external: BTreeMap<NaiveDate, f64> = events.iter().map(|&(d, _)| (d, 1.0)).collect();
    assert_eq!(directional_correlation(&events, &external, 10, 0), Err(CorrelationError::Insufficient(5)));
    let events: Vec<(NaiveDate, i8)> = (0..12).map(|i| (start() + Duration::days(i), 1)).collect();
    let external: BTreeMap<NaiveDate, f64> = events.iter().map(|&(d, _)| (d, if d.day0() % 2 == 0 { 1.0 } else { -1.0 })).collect();
    assert_eq!(directional_correlation(&events, &external, 10, 0), Err(CorrelationError::Degenerate));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn delta_r_is_never_negative(seed in any::<u64>(), hour in 2usize..=23, dt in 1usize..=59, int2 in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let day = random_day(&mut rng, start());
        let side = if int2 { Side::Int2 } else { Side::Int1 };
        let v = delta_r(&day, hour * 60, dt, side).unwrap();
        prop_assert!(v >= 0.0);
    }

    #[test]
    fn centred_oracle_agrees_for_any_half_width(seed in any::<u64>(), hw in 1usize..=40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let day = random_day(&mut rng, start());
        let got: Vec<(usize, ExtremumKind, f64)> = centered_extrema_with(&day, PriceStream::High, hw)
            .into_iter()
            .map(|e| (e.minute, e.kind, e.delta_r))
            .collect();
        let mut expected = oracle_centered(&day, PriceStream::High, hw);
        expected.sort_by(|a, b| a.0.cmp(&b.0).then((a.1 as u8).cmp(&(b.1 as u8))));
        prop_assert_eq!(got, expected);
    }
}
