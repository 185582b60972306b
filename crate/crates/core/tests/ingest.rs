use chrono::{Duration, NaiveDate};
use fixlab_core::ingest::{
    filter_complete_days, parse_bar_reader, parse_tick_reader, period_boundary, split_periods,
    write_tick_csv, Dataset, IngestError, PeriodTag, RawDayMap,
};
use fixlab_core::sim::{gen_day, SimScenario};
use fixlab_testkit::random_day;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn dataset(seed: u64, first: NaiveDate, days: usize) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Dataset {
        pair: "EURUSD".into(),
        days: (0..days).map(|i| random_day(&mut rng, first + Duration::days(i as i64 * 3))).collect(),
        period: PeriodTag::Full,
    }
}

fn to_csv(ds: &Dataset) -> Vec<u8> {
    let mut buf = Vec::new();
    ds.write_csv(&mut buf).unwrap();
    buf
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn bar_csv_round_trips(seed in any::<u64>(), days in 1usize..4, offset in 0i64..4000) {
        let first = NaiveDate::from_ymd_opt(2008, 1, 1).unwrap() + Duration::days(offset);
        let ds = dataset(seed, first, days);
        let text = to_csv(&ds);
        let parsed = filter_complete_days(&parse_bar_reader(text.as_slice()).unwrap(), "EURUSD");
        prop_assert!(parsed.excluded.is_empty());
        prop_assert_eq!(&parsed.dataset, &ds);
        prop_assert_eq!(to_csv(&parsed.dataset), text);
    }
}

#[test]
fn completeness_filter_is_idempotent() {
    let ds = dataset(1, NaiveDate::from_ymd_opt(2012, 4, 2).unwrap(), 4);
    let mut raw: RawDayMap = ds.to_raw();
    let gappy = ds.days[1].date;
    raw.get_mut(&gappy).unwrap().remove(&777);
    let once = filter_complete_days(&raw, "EURUSD");
    assert_eq!(once.excluded, vec![gappy]);
    assert_eq!(once.dataset.len(), 3);
    let twice = filter_complete_days(&once.dataset.to_raw(), "EURUSD");
    assert!(twice.excluded.is_empty());
    assert_eq!(twice.dataset, once.dataset);
}

#[test]
fn period_split_partitions_at_the_boundary() {
    let first = period_boundary() - Duration::days(30);
    let ds = dataset(2, first, 25);
    let (pre, post) = split_periods(&ds);
    assert_eq!(pre.len() + post.len(), ds.len());
    assert_eq!(pre.len(), 11);
    assert!(pre.days.iter().all(|d| d.date <= period_boundary()));
    assert!(post.days.iter().all(|d| d.date > period_boundary()));
    assert_eq!((pre.period, post.period), (PeriodTag::Pre, PeriodTag::Post));
}

#[test]
fn utc_files_are_relabelled_to_london_time() {
    let text = "# tz=UTC\ndate,time,open,high,low,close\n2012-07-02,15:00,1.25,1.26,1.24,1.255\n2012-12-03,15:00,1.3,1.3,1.3,1.3\n";
    let raw = parse_bar_reader(text.as_bytes()).unwrap();
    let summer = NaiveDate::from_ymd_opt(2012, 7, 2).unwrap();
    let winter = NaiveDate::from_ymd_opt(2012, 12, 3).unwrap();
    assert!(raw[&summer].contains_key(&(16 * 60)));
    assert!(raw[&winter].contains_key(&(15 * 60)));
}

#[test]
fn malformed_rows_report_their_line() {
    let text = "date,time,open,high,low,close\n2012-07-02,15:00,1.25,1.26,1.24,1.255\n2012-07-02,15:01,1.25,1.20,1.24,1.255\n";
    match parse_bar_reader(text.as_bytes()) {
        Err(IngestError::Validation { line, .. }) => assert_eq!(line, 3),
        other => panic!("{other:?}"),
    }
    let text = "date,time,open,high,low,close\n2012-07-02,25:00,1,1,1,1\n";
    assert!(matches!(parse_bar_reader(text.as_bytes()), Err(IngestError::Parse { line: 2, .. })));
    let text = "date,minute,open,high,low,close\n";
    assert!(matches!(parse_bar_reader(text.as_bytes()), Err(IngestError::Header { .. })));
}

#[test]
fn simulated_ticks_round_trip_through_csv() {
    let scenario = SimScenario {
        tick_rate: 0.05,
        ..SimScenario::default()
    };
    let ticks = gen_day(&scenario, 0);
    let mut buf = Vec::new();
    write_tick_csv(&mut buf, &ticks).unwrap();
    assert_eq!(parse_tick_reader(buf.as_slice()).unwrap(), ticks);
}
