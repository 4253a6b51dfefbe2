//! Readers for the Belgian and French hospitalization files.

use std::io::Read;

use chrono::NaiveDate;
use shcast_core::{RawCounts, RawRecord, RawRecordSet, Schema};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("missing required column `{0}`")]
    MissingColumn(&'static str),
    #[error("line {line}: {message}")]
    Row { line: u64, message: String },
    #[error("input is not valid UTF-8")]
    Encoding,
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn read_text(mut raw: impl Read) -> Result<String, ParseError> {
    let mut bytes = Vec::new();
    raw.read_to_end(&mut bytes)?;
    let text = String::from_utf8(bytes).map_err(|_| ParseError::Encoding)?;
    Ok(text
        .strip_prefix('\u{feff}')
        .map(str::to_owned)
        .unwrap_or(text))
}

/// `;` when the header line has more semicolons than commas, else `,`.
fn detect_delimiter(text: &str) -> u8 {
    let header = text.lines().next().unwrap_or("");
    let semis = header.matches(';').count();
    let commas = header.matches(',').count();
    if semis > commas {
        b';'
    } else {
        b','
    }
}

fn reader(text: &str, delimiter: u8) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .trim(csv::Trim::All)
        .flexible(false)
        .from_reader(text.as_bytes())
}

fn column(headers: &csv::StringRecord, name: &'static str) -> Result<usize, ParseError> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or(ParseError::MissingColumn(name))
}

fn line_of(record: &csv::StringRecord) -> u64 {
    record.position().map(|p| p.line()).unwrap_or(0)
}

fn parse_date(record: &csv::StringRecord, idx: usize) -> Result<NaiveDate, ParseError> {
    let raw = &record[idx];
    NaiveDate::parse_from_str(raw, "%Y-%m-%d").map_err(|_| ParseError::Row {
        line: line_of(record),
        message: format!("unparseable date `{raw}`"),
    })
}

fn parse_count(
    record: &csv::StringRecord,
    idx: usize,
    name: &'static str,
) -> Result<f64, ParseError> {
    let raw = &record[idx];
    match raw.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(ParseError::Row {
            line: line_of(record),
            message: format!("unparseable {name} value `{raw}`"),
        }),
    }
}

/// Parses the Belgian layout (`DATE`, optional `PROVINCE`, `TOTAL_IN`,
/// `NEW_IN`, `NEW_OUT`). One record per row; province rows are kept apart.
pub fn parse_belgium_csv(raw: impl Read) -> Result<RawRecordSet, ParseError> {
    let text = read_text(raw)?;
    let mut rdr = reader(&text, detect_delimiter(&text));
    let headers = rdr.headers()?.clone();
    let date = column(&headers, "DATE")?;
    let province = headers.iter().position(|h| h == "PROVINCE");
    let total_in = column(&headers, "TOTAL_IN")?;
    let new_in = column(&headers, "NEW_IN")?;
    let new_out = column(&headers, "NEW_OUT")?;

    let mut set = RawRecordSet::new(Schema::Belgium);
    for record in rdr.records() {
        let record = record?;
        set.rows.push(RawRecord {
            date: parse_date(&record, date)?,
            region: province.map(|i| record[i].to_owned()).unwrap_or_default(),
            counts: RawCounts::Belgium {
                total_in: parse_count(&record, total_in, "TOTAL_IN")?,
                new_in: parse_count(&record, new_in, "NEW_IN")?,
                new_out: parse_count(&record, new_out, "NEW_OUT")?,
            },
        });
    }
    Ok(set)
}

/// Parses the French layout (`dep`, `sexe`, `jour`, `hosp`, `rad`, `dc`),
/// keeping only the all-sexes stratum (`sexe = 0`).
pub fn parse_france_csv(raw: impl Read) -> Result<RawRecordSet, ParseError> {
    let text = read_text(raw)?;
    let mut rdr = reader(&text, detect_delimiter(&text));
    let headers = rdr.headers()?.clone();
    let dep = column(&headers, "dep")?;
    let sexe = column(&headers, "sexe")?;
    let jour = column(&headers, "jour")?;
    let hosp = column(&headers, "hosp")?;
    let rad = column(&headers, "rad")?;
    let dc = column(&headers, "dc")?;

    let mut set = RawRecordSet::new(Schema::France);
    for record in rdr.records() {
        let record = record?;
        if record[sexe].trim() != "0" {
            continue;
        }
        set.rows.push(RawRecord {
            date: parse_date(&record, jour)?,
            region: record[dep].to_owned(),
            counts: RawCounts::France {
                hosp: parse_count(&record, hosp, "hosp")?,
                rad: parse_count(&record, rad, "rad")?,
                dc: parse_count(&record, dc, "dc")?,
            },
        });
    }
    Ok(set)
}
