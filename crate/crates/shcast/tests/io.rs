use chrono::{Days, NaiveDate};
use proptest::prelude::*;
use shcast::{
    parse_belgium_csv, parse_france_csv, read_series_csv, read_trajectory_csv, write_series_csv,
    write_trajectory_csv, ParseError,
};
use shcast_core::{
    aggregate_national, reconcile_flows, simulate, ObservedSeries, SHParams, SHState, Schema,
};

fn day(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).unwrap()
}

fn belgian_fixture(from: NaiveDate, to: NaiveDate) -> String {
    let mut out = String::from("DATE,PROVINCE,REGION,NR_REPORTING,TOTAL_IN,TOTAL_IN_ICU,TOTAL_IN_RESP,TOTAL_IN_ECMO,NEW_IN,NEW_OUT\n");
    let mut date = from;
    let mut k = 0u32;
    while date <= to {
        for (prov, base) in [("Antwerpen", 10), ("Namur", 15)] {
            out.push_str(&format!(
                "{date},{prov},X,3,{},1,0,0,{},{}\n",
                base + k,
                2 + k % 3,
                k % 2
            ));
        }
        date = date + Days::new(1);
        k += 1;
    }
    out
}

#[test]
fn belgian_snapshot_span_has_123_dates() {
    let text = belgian_fixture(day(2020, 3, 15), day(2020, 7, 15));
    let set = parse_belgium_csv(text.as_bytes()).unwrap();
    assert_eq!(set.distinct_dates(), 123);
    assert_eq!(set.len(), 246);
    let national = aggregate_national(&set).unwrap();
    assert_eq!(national.len(), 123);
    assert_eq!(national.h()[0], 25.0);
}

#[test]
fn french_snapshot_span_has_122_dates() {
    let mut text = String::from("dep;sexe;jour;hosp;rea;rad;dc\n");
    let mut date = day(2020, 3, 18);
    while date <= day(2020, 7, 17) {
        for sexe in 0..3 {
            text.push_str(&format!("\"75\";{sexe};{date};10;1;2;1\n"));
        }
        date = date + Days::new(1);
    }
    let set = parse_france_csv(text.as_bytes()).unwrap();
    assert_eq!(set.distinct_dates(), 122);
    assert_eq!(set.len(), 122);
}

#[test]
fn two_provinces_on_one_date_sum_to_25() {
    let text = "DATE,PROVINCE,TOTAL_IN,NEW_IN,NEW_OUT\n2020-03-15,A,10,1,0\n2020-03-15,B,15,2,1\n";
    let set = parse_belgium_csv(text.as_bytes()).unwrap();
    assert_eq!(set.len(), 2);
    let national = aggregate_national(&set).unwrap();
    assert_eq!(national.h(), &[25.0]);
}

#[test]
fn cumulative_rad_is_differenced() {
    let text = "dep;sexe;jour;hosp;rea;rad;dc\n01;0;2020-03-18;4;0;5;0\n01;1;2020-03-18;2;0;3;0\n01;0;2020-03-19;6;0;8;0\n";
    let set = parse_france_csv(text.as_bytes()).unwrap();
    let national = aggregate_national(&set).unwrap();
    assert_eq!(national.start_date(), day(2020, 3, 19));
    assert_eq!(national.l(), &[3.0]);
}

#[test]
fn header_only_file_fails_at_aggregation() {
    let set = parse_belgium_csv("DATE,TOTAL_IN,NEW_IN,NEW_OUT\n".as_bytes()).unwrap();
    assert!(set.is_empty());
    assert!(aggregate_national(&set).is_err());
}

#[test]
fn french_schema_error_names_the_column() {
    let err = parse_france_csv("dep;sexe;jour;hosp;rad\n".as_bytes()).unwrap_err();
    assert!(matches!(err, ParseError::MissingColumn("dc")));
}

#[test]
fn reconciled_fixture_survives_a_series_round_trip() {
    let text = belgian_fixture(day(2020, 3, 15), day(2020, 4, 30));
    let national = aggregate_national(&parse_belgium_csv(text.as_bytes()).unwrap()).unwrap();
    let series = reconcile_flows(&national, Schema::Belgium).unwrap();
    assert_eq!(series.max_stock_flow_residual(), 0.0);

    let csv = write_series_csv(&series);
    assert!(csv.starts_with("date,H,E,L\n2020-03-15,"));
    let back = read_series_csv(csv.as_bytes()).unwrap();
    assert_eq!(back.start_date, series.start_date());
    assert_eq!(back.h, series.h());
    assert_eq!(back.e, series.e());
    assert_eq!(back.l, series.l());
}

#[test]
fn series_reader_rejects_gaps() {
    let csv = "date,H,E,L\n2020-03-15,1,0,0\n2020-03-17,2,1,0\n";
    match read_series_csv(csv.as_bytes()).unwrap_err() {
        ParseError::Row { line, .. } => assert_eq!(line, 3),
        other => panic!("unexpected {other}"),
    }
}

#[test]
fn trajectory_round_trip_is_exact() {
    let params = SHParams::new(1e-5, 0.08).unwrap();
    let traj = simulate(SHState::new(2e4, 50.0), &params, 30).unwrap();
    let csv = write_trajectory_csv(&traj);
    assert!(csv.starts_with("day,S_bar,H,E,L\n0,20000,50,"));
    let cols = read_trajectory_csv(csv.as_bytes()).unwrap();
    assert_eq!(cols.h, traj.h().collect::<Vec<_>>());
    assert_eq!(cols.e, traj.admissions);
    assert_eq!(cols.l, traj.discharges);
}

proptest! {
    #[test]
    fn series_csv_round_trips_bit_exactly(
        h in prop::collection::vec(0.0f64..1e7, 2..60),
        seed in prop::collection::vec(-1e5f64..1e5, 60),
        tiny in 1e-300f64..1e-200,
    ) {
        let n = h.len();
        let mut e: Vec<f64> = seed[..n].to_vec();
        e[0] = tiny;
        let l: Vec<f64> = seed[..n].iter().map(|v| v * 1e12).collect();
        let series = ObservedSeries::new(day(2020, 3, 15), h, e, l, "p").unwrap();
        let back = read_series_csv(write_series_csv(&series).as_bytes()).unwrap();
        prop_assert_eq!(back.h.as_slice(), series.h());
        prop_assert_eq!(back.e.as_slice(), series.e());
        prop_assert_eq!(back.l.as_slice(), series.l());
    }
}
