//! Observed hospitalization series: national aggregation and stock/flow
//! reconciliation.
//!
//! An [`ObservedSeries`] carries three aligned daily arrays:
//!
//! * `h`: hospital census at the end of day `t`,
//! * `e`: admissions on day `t`,
//! * `l`: discharges on day `t`.
//!
//! Reconciled series satisfy `h[t] = h[t-1] + e[t] - l[t]` for every `t > 0`.
//! The flows at index 0 carry no information (they are set to 0 by
//! reconciliation) and the estimators never read them.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use chrono::{Days, NaiveDate};
use thiserror::Error;

/// Source dataset layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Schema {
    /// Census, intakes and discharges per province (`TOTAL_IN`, `NEW_IN`, `NEW_OUT`).
    Belgium,
    /// Census plus cumulative returns home and deaths per department (`hosp`, `rad`, `dc`).
    France,
}

impl Schema {
    pub fn name(self) -> &'static str {
        match self {
            Schema::Belgium => "belgium",
            Schema::France => "france",
        }
    }
}

impl fmt::Display for Schema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DataError {
    #[error("no records to aggregate")]
    Empty,
    #[error("dates are not contiguous: {missing} missing after {after}")]
    Gap { after: NaiveDate, missing: u64 },
    #[error("record on {date} has {found} schema but the set is {expected}")]
    SchemaMismatch {
        date: NaiveDate,
        expected: Schema,
        found: Schema,
    },
    #[error("need at least {needed} days, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("series arrays differ in length (h={h}, e={e}, l={l})")]
    LengthMismatch { h: usize, e: usize, l: usize },
    #[error("non-finite value in {column} at day {index}")]
    NonFinite { column: &'static str, index: usize },
    #[error("negative census {value} at day {index}")]
    NegativeCensus { index: usize, value: f64 },
    #[error("date range {from}..={to} is outside the series")]
    OutOfRange { from: NaiveDate, to: NaiveDate },
}

/// Counts read from one CSV row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RawCounts {
    Belgium {
        total_in: f64,
        new_in: f64,
        new_out: f64,
    },
    /// `rad` and `dc` are cumulative since the start of the epidemic.
    France { hosp: f64, rad: f64, dc: f64 },
}

impl RawCounts {
    pub fn schema(&self) -> Schema {
        match self {
            RawCounts::Belgium { .. } => Schema::Belgium,
            RawCounts::France { .. } => Schema::France,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawRecord {
    pub date: NaiveDate,
    /// Province or department key; empty when the file has none.
    pub region: String,
    pub counts: RawCounts,
}

/// Rows as parsed from a source file, before any aggregation.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRecordSet {
    pub schema: Schema,
    pub rows: Vec<RawRecord>,
}

impl RawRecordSet {
    pub fn new(schema: Schema) -> Self {
        Self {
            schema,
            rows: Vec::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    /// Number of distinct dates present.
    pub fn distinct_dates(&self) -> usize {
        let mut dates: Vec<NaiveDate> = self.rows.iter().map(|r| r.date).collect();
        dates.sort_unstable();
        dates.dedup();
        dates.len()
    }

    /// Keeps only rows dated within `from..=to`.
    pub fn retain_dates(&mut self, from: NaiveDate, to: NaiveDate) {
        self.rows.retain(|r| r.date >= from && r.date <= to);
    }
}

/// Daily national series on a contiguous date index.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservedSeries {
    start_date: NaiveDate,
    h: Vec<f64>,
    e: Vec<f64>,
    l: Vec<f64>,
    pub label: String,
}

impl ObservedSeries {
    /// Builds a series after checking lengths, finiteness and `h >= 0`.
    pub fn new(
        start_date: NaiveDate,
        h: Vec<f64>,
        e: Vec<f64>,
        l: Vec<f64>,
        label: impl Into<String>,
    ) -> Result<Self, DataError> {
        if h.len() != e.len() || h.len() != l.len() {
            return Err(DataError::LengthMismatch {
                h: h.len(),
                e: e.len(),
                l: l.len(),
            });
        }
        if h.is_empty() {
            return Err(DataError::InsufficientData { needed: 1, got: 0 });
        }
        for (column, values) in [("H", &h), ("E", &e), ("L", &l)] {
            if let Some(index) = values.iter().position(|v| !v.is_finite()) {
                return Err(DataError::NonFinite { column, index });
            }
        }
        if let Some(index) = h.iter().position(|&v| v < 0.0) {
            return Err(DataError::NegativeCensus {
                index,
                value: h[index],
            });
        }
        Ok(Self {
            start_date,
            h,
            e,
            l,
            label: label.into(),
        })
    }

    pub fn start_date(&self) -> NaiveDate {
        self.start_date
    }

    pub fn end_date(&self) -> NaiveDate {
        self.date(self.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.h.len()
    }

    pub fn is_empty(&self) -> bool {
        self.h.is_empty()
    }

    pub fn h(&self) -> &[f64] {
        &self.h
    }

    pub fn e(&self) -> &[f64] {
        &self.e
    }

    pub fn l(&self) -> &[f64] {
        &self.l
    }

    /// Calendar date of day `index`.
    pub fn date(&self, index: usize) -> NaiveDate {
        self.start_date + Days::new(index as u64)
    }

    /// Day index of `date`, if it falls inside the series.
    pub fn index_of(&self, date: NaiveDate) -> Option<usize> {
        let offset = date.signed_duration_since(self.start_date).num_days();
        usize::try_from(offset).ok().filter(|&i| i < self.len())
    }

    /// Index of the maximum census (first one on ties).
    pub fn peak_index(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.h.iter().enumerate() {
            if v > self.h[best] {
                best = i;
            }
        }
        best
    }

    /// Sub-series covering `from..=to`. Flows on the new first day are kept
    /// as they are; callers that need the start-day convention re-reconcile.
    pub fn slice_dates(&self, from: NaiveDate, to: NaiveDate) -> Result<Self, DataError> {
        let (Some(a), Some(b)) = (self.index_of(from), self.index_of(to)) else {
            return Err(DataError::OutOfRange { from, to });
        };
        if a > b {
            return Err(DataError::OutOfRange { from, to });
        }
        Ok(Self {
            start_date: from,
            h: self.h[a..=b].to_vec(),
            e: self.e[a..=b].to_vec(),
            l: self.l[a..=b].to_vec(),
            label: self.label.clone(),
        })
    }

    /// Largest absolute violation of `h[t] - h[t-1] - e[t] + l[t] = 0` over `t > 0`.
    pub fn max_stock_flow_residual(&self) -> f64 {
        (1..self.len())
            .map(|t| (self.h[t] - self.h[t - 1] - self.e[t] + self.l[t]).abs())
            .fold(0.0, f64::max)
    }
}

/// Sums all regions per date into one national series.
///
/// For the French layout the summed cumulative `rad + dc` is first
/// differenced into daily discharges and the first day is dropped; admissions
/// are left at 0 until [`reconcile_flows`] defines them. The result is not
/// reconciled.
pub fn aggregate_national(records: &RawRecordSet) -> Result<ObservedSeries, DataError> {
    if records.rows.is_empty() {
        return Err(DataError::Empty);
    }
    let mut by_date: BTreeMap<NaiveDate, [f64; 3]> = BTreeMap::new();
    for row in &records.rows {
        let found = row.counts.schema();
        if found != records.schema {
            return Err(DataError::SchemaMismatch {
                date: row.date,
                expected: records.schema,
                found,
            });
        }
        let acc = by_date.entry(row.date).or_insert([0.0; 3]);
        match row.counts {
            RawCounts::Belgium {
                total_in,
                new_in,
                new_out,
            } => {
                acc[0] += total_in;
                acc[1] += new_in;
                acc[2] += new_out;
            }
            RawCounts::France { hosp, rad, dc } => {
                acc[0] += hosp;
                acc[2] += rad + dc;
            }
        }
    }

    let mut prev: Option<NaiveDate> = None;
    for &date in by_date.keys() {
        if let Some(p) = prev {
            let step = date.signed_duration_since(p).num_days();
            if step != 1 {
                return Err(DataError::Gap {
                    after: p,
                    missing: (step - 1) as u64,
                });
            }
        }
        prev = Some(date);
    }

    let start = *by_date.keys().next().expect("non-empty");
    let sums: Vec<[f64; 3]> = by_date.into_values().collect();
    let label = String::from(records.schema.name());
    match records.schema {
        Schema::Belgium => ObservedSeries::new(
            start,
            sums.iter().map(|s| s[0]).collect(),
            sums.iter().map(|s| s[1]).collect(),
            sums.iter().map(|s| s[2]).collect(),
            label,
        ),
        Schema::France => {
            if sums.len() < 2 {
                return Err(DataError::InsufficientData {
                    needed: 2,
                    got: sums.len(),
                });
            }
            let h: Vec<f64> = sums[1..].iter().map(|s| s[0]).collect();
            let l: Vec<f64> = sums.windows(2).map(|w| w[1][2] - w[0][2]).collect();
            let e = alloc::vec![0.0; h.len()];
            ObservedSeries::new(start + Days::new(1), h, e, l, label)
        }
    }
}

/// Redefines one flow so that the census obeys `h[t] = h[t-1] + e[t] - l[t]`.
///
/// Belgium keeps the reported intakes and recomputes discharges; France keeps
/// the discharges and recomputes intakes. Flows on the first day are set to 0.
/// Negative discharges are kept as they are.
pub fn reconcile_flows(
    series: &ObservedSeries,
    schema: Schema,
) -> Result<ObservedSeries, DataError> {
    let n = series.len();
    if n < 2 {
        return Err(DataError::InsufficientData { needed: 2, got: n });
    }
    let h = &series.h;
    let mut e = series.e.clone();
    let mut l = series.l.clone();
    e[0] = 0.0;
    l[0] = 0.0;
    for t in 1..n {
        match schema {
            Schema::Belgium => l[t] = -h[t] + h[t - 1] + e[t],
            Schema::France => e[t] = h[t] - h[t - 1] + l[t],
        }
    }
    ObservedSeries::new(series.start_date, h.clone(), e, l, series.label.clone())
}


#[cfg(test)]
mod proptests {
    use super::*;
    use alloc::vec::Vec;
    use proptest::prelude::*;

    fn integer_series() -> impl Strategy<Value = ObservedSeries> {
        (2usize..60).prop_flat_map(|n| {
            (
                proptest::collection::vec(0u32..20_000, n),
                proptest::collection::vec(0u32..2_000, n),
                proptest::collection::vec(0u32..2_000, n),
            )
                .prop_map(|(h, e, l)| {
                    let f = |v: Vec<u32>| v.into_iter().map(f64::from).collect::<Vec<_>>();
                    ObservedSeries::new(
                        NaiveDate::from_ymd_opt(2020, 3, 15).unwrap(),
                        f(h),
                        f(e),
                        f(l),
                        "p",
                    )
                    .unwrap()
                })
        })
    }

    proptest! {
        #[test]
        fn reconciled_series_obey_stock_flow_and_are_idempotent(s in integer_series()) {
            for schema in [Schema::Belgium, Schema::France] {
                let r = reconcile_flows(&s, schema).unwrap();
                prop_assert_eq!(r.max_stock_flow_residual(), 0.0);
                prop_assert_eq!(&reconcile_flows(&r, schema).unwrap(), &r);
                prop_assert_eq!(r.h(), s.h());
            }
        }

        #[test]
        fn real_valued_reconciliation_within_one_ulp(
            h in proptest::collection::vec(0.0f64..1e5, 2..40),
            e in proptest::collection::vec(0.0f64..1e3, 40),
        ) {
            let n = h.len();
            let s = ObservedSeries::new(
                NaiveDate::from_ymd_opt(2020, 3, 15).unwrap(),
                h.clone(), e[..n].to_vec(), alloc::vec![0.0; n], "p").unwrap();
            let r = reconcile_flows(&s, Schema::Belgium).unwrap();
            for t in 1..n {
                let resid = (r.h()[t] - r.h()[t - 1] - r.e()[t] + r.l()[t]).abs();
                let scale = r.h()[t].abs().max(r.h()[t - 1].abs()).max(r.e()[t].abs()).max(1.0);
                prop_assert!(resid <= 2.0 * f64::EPSILON * scale, "t={} resid={}", t, resid);
            }
        }
    }
}
