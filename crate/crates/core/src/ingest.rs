//! Parsers for the three source CSV families and the FIPS join that turns
//! them into [`CountyRecord`] values.
//!
//! FIPS codes are kept as zero-padded 5-character strings throughout:
//! CA/OR/WA codes start with a zero and integer keys would corrupt joins.
//! FIPS 0 rows ("Statewide Unallocated" in the epidemic series) are dropped
//! at parse time because they are not attributable to any county.

use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDate;

use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValueKind {
    Cases,
    Deaths,
}

impl ValueKind {
    pub fn name(self) -> &'static str {
        match self {
            ValueKind::Cases => "cases",
            ValueKind::Deaths => "deaths",
        }
    }
}

/// One county row of an epidemic series file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawSeries {
    pub fips: String,
    pub county_name: String,
    pub state: String,
    pub values: Vec<u64>,
}

/// A parsed epidemic series file: the date axis is shared by every row.
/// Dates are strictly increasing with no gaps (one column per day).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeriesTable {
    pub kind: ValueKind,
    pub dates: Vec<NaiveDate>,
    pub rows: Vec<RawSeries>,
}

/// Census covariates for one county, before the mask survey is joined in.
#[derive(Debug, Clone, PartialEq)]
pub struct CensusRow {
    pub population: u64,
    pub median_income: f64,
    /// Fraction in [0, 1]; percent inputs are normalized at parse time.
    pub education_level: f64,
}

/// Mask-usage survey shares for one county. Each value is a fraction in
/// [0, 1] and the five sum to 1 within +/- 0.02 (survey rounding).
#[derive(Debug, Clone, PartialEq)]
pub struct MaskRow {
    pub never: f64,
    pub rarely: f64,
    pub sometimes: f64,
    pub frequently: f64,
    pub always: f64,
}

/// Joined per-county time series: identity plus the two cumulative arrays,
/// aligned on one date axis.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountySeries {
    pub fips: String,
    pub county_name: String,
    pub state: String,
    pub dates: Vec<NaiveDate>,
    pub cumulative_cases: Vec<u64>,
    pub cumulative_deaths: Vec<u64>,
}

/// Socioeconomic and mask covariates joined for one county.
#[derive(Debug, Clone, PartialEq)]
pub struct CountyCovariates {
    pub fips: String,
    pub population: u64,
    pub median_income: f64,
    pub education_level: f64,
    pub mask_never: f64,
    pub mask_rarely: f64,
    pub mask_sometimes: f64,
    pub mask_frequently: f64,
    pub mask_always: f64,
}

/// The join product: everything known about one county.
#[derive(Debug, Clone, PartialEq)]
pub struct CountyRecord {
    pub series: CountySeries,
    pub covariates: CountyCovariates,
}

/// A county excluded by the join, with the sources it was missing from.
/// Reported explicitly so snapshot drift never hides behind a silent drop.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MissingCounty {
    pub fips: String,
    pub missing_sources: Vec<&'static str>,
}

const SERIES_HEADER: [&str; 4] = ["countyFIPS", "County Name", "State", "StateFIPS"];
const CENSUS_HEADER: [&str; 4] = ["fips", "population", "median_income", "hs_completion"];
const MASK_HEADER: [&str; 6] = [
    "COUNTYFP",
    "NEVER",
    "RARELY",
    "SOMETIMES",
    "FREQUENTLY",
    "ALWAYS",
];

fn csv_records(text: &str, file: &str) -> Result<Vec<csv::StringRecord>, Error> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::Csv {
            file: file.to_string(),
            detail: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}

/// Accepts ISO (`2020-06-01`) or US short form (`6/1/20`, `06/01/2020`).
fn parse_header_date(s: &str) -> Option<NaiveDate> {
    let s = s.trim();
    if s.contains('-') {
        return NaiveDate::parse_from_str(s, "%Y-%m-%d").ok();
    }
    let mut parts = s.split('/');
    let m: u32 = parts.next()?.trim().parse().ok()?;
    let d: u32 = parts.next()?.trim().parse().ok()?;
    let y: i32 = parts.next()?.trim().parse().ok()?;
    if parts.next().is_some() {
        return None;
    }
    let y = if y < 100 { 2000 + y } else { y };
    NaiveDate::from_ymd_opt(y, m, d)
}

/// Parses a FIPS cell to the canonical zero-padded 5-character form.
/// Returns None for non-numeric or out-of-range input, Some(None) for the
/// FIPS-0 unallocated marker.
fn parse_fips(cell: &str) -> Option<Option<String>> {
    let n: u32 = cell.trim().parse().ok()?;
    if n == 0 {
        return Some(None);
    }
    if n > 99999 {
        return None;
    }
    Some(Some(format!("{:05}", n)))
}

fn bad_value(file: &str, row: usize, column: &str, value: &str) -> Error {
    Error::BadValue {
        file: file.to_string(),
        row,
        column: column.to_string(),
        value: value.to_string(),
    }
}

/// Parses one cumulative epidemic series file (cases or deaths).
///
/// Header: `countyFIPS,County Name,State,StateFIPS,<date>,<date>,...` with
/// dates in ISO or M/D/YY form, one column per consecutive day. Values must
/// be nonnegative integers. FIPS-0 rows are dropped.
pub fn parse_county_timeseries(text: &str, kind: ValueKind) -> Result<SeriesTable, Error> {
    let file = kind.name();
    let records = csv_records(text, file)?;
    let header = records.first().ok_or_else(|| Error::MalformedHeader {
        file: file.to_string(),
        detail: "empty file".to_string(),
    })?;

    if header.len() < SERIES_HEADER.len() + 1 {
        return Err(Error::MalformedHeader {
            file: file.to_string(),
            detail: "expected identity columns plus at least one date column".to_string(),
        });
    }
    for (i, want) in SERIES_HEADER.iter().enumerate() {
        if header.get(i).map(str::trim) != Some(*want) {
            return Err(Error::MalformedHeader {
                file: file.to_string(),
                detail: format!("column {} must be {:?}", i + 1, want),
            });
        }
    }

    let mut dates: Vec<NaiveDate> = Vec::with_capacity(header.len() - SERIES_HEADER.len());
    for cell in header.iter().skip(SERIES_HEADER.len()) {
        let d = parse_header_date(cell).ok_or_else(|| Error::MalformedHeader {
            file: file.to_string(),
            detail: format!("unparseable date column {:?}", cell),
        })?;
        if let Some(prev) = dates.last() {
            // Strictly increasing, gap-free: exactly one day per column.
            if d != prev.succ_opt().expect("date overflow") {
                return Err(Error::NonMonotonicDates {
                    file: file.to_string(),
                    prev: prev.to_string(),
                    next: d.to_string(),
                });
            }
        }
        dates.push(d);
    }

    let mut rows = Vec::new();
    let mut seen = BTreeSet::new();
    for (ri, rec) in records.iter().enumerate().skip(1) {
        let row_no = ri + 1; // 1-based line number including the header
        if rec.len() != header.len() {
            return Err(Error::Csv {
                file: file.to_string(),
                detail: format!("row {} has {} fields, expected {}", row_no, rec.len(), header.len()),
            });
        }
        let fips_cell = rec.get(0).unwrap_or("");
        let fips = match parse_fips(fips_cell) {
            None => return Err(bad_value(file, row_no, "countyFIPS", fips_cell)),
            Some(None) => continue, // unallocated row
            Some(Some(f)) => f,
        };
        if !seen.insert(fips.clone()) {
            return Err(Error::DuplicateFips {
                file: file.to_string(),
                fips,
            });
        }
        let mut values = Vec::with_capacity(dates.len());
        for (ci, cell) in rec.iter().enumerate().skip(SERIES_HEADER.len()) {
            let v: u64 = cell.trim().parse().map_err(|_| {
                bad_value(file, row_no, &dates[ci - SERIES_HEADER.len()].to_string(), cell)
            })?;
            values.push(v);
        }
        rows.push(RawSeries {
            fips,
            county_name: rec.get(1).unwrap_or("").trim().to_string(),
            state: rec.get(2).unwrap_or("").trim().to_string(),
            values,
        });
    }

    Ok(SeriesTable { kind, dates, rows })
}

/// Parses the census covariate file.
///
/// `hs_completion` may arrive as a percentage (values above 1 are divided
/// by 100) or as a fraction; the result is always a fraction in [0, 1].
pub fn parse_census_covariates(text: &str) -> Result<BTreeMap<String, CensusRow>, Error> {
    let file = "census";
    let records = csv_records(text, file)?;
    let header = records.first().ok_or_else(|| Error::MalformedHeader {
        file: file.to_string(),
        detail: "empty file".to_string(),
    })?;
    let got: Vec<&str> = header.iter().map(str::trim).collect();
    if got != CENSUS_HEADER {
        return Err(Error::MalformedHeader {
            file: file.to_string(),
            detail: format!("expected {:?}", CENSUS_HEADER.join(",")),
        });
    }

    let mut out = BTreeMap::new();
    for (ri, rec) in records.iter().enumerate().skip(1) {
        let row_no = ri + 1;
        let fips_cell = rec.get(0).unwrap_or("");
        let fips = match parse_fips(fips_cell) {
            None | Some(None) => return Err(bad_value(file, row_no, "fips", fips_cell)),
            Some(Some(f)) => f,
        };
        let population: u64 = rec
            .get(1)
            .unwrap_or("")
            .trim()
            .parse()
            .map_err(|_| bad_value(file, row_no, "population", rec.get(1).unwrap_or("")))?;
        if population == 0 {
            return Err(bad_value(file, row_no, "population", "0"));
        }
        let median_income: f64 = rec
            .get(2)
            .unwrap_or("")
            .trim()
            .parse()
            .map_err(|_| bad_value(file, row_no, "median_income", rec.get(2).unwrap_or("")))?;
        if !median_income.is_finite() || median_income <= 0.0 {
            return Err(bad_value(file, row_no, "median_income", rec.get(2).unwrap_or("")));
        }
        let raw_el: f64 = rec
            .get(3)
            .unwrap_or("")
            .trim()
            .parse()
            .map_err(|_| bad_value(file, row_no, "hs_completion", rec.get(3).unwrap_or("")))?;
        let education_level = if raw_el > 1.0 { raw_el / 100.0 } else { raw_el };
        if !education_level.is_finite() || !(0.0..=1.0).contains(&education_level) {
            return Err(bad_value(file, row_no, "hs_completion", rec.get(3).unwrap_or("")));
        }
        if out
            .insert(
                fips.clone(),
                CensusRow {
                    population,
                    median_income,
                    education_level,
                },
            )
            .is_some()
        {
            return Err(Error::DuplicateFips {
                file: file.to_string(),
                fips,
            });
        }
    }
    Ok(out)
}

/// Parses the mask-usage survey. Rows whose five shares do not sum to 1
/// within +/- 0.02 are rejected with the offending sum.
pub fn parse_mask_survey(text: &str) -> Result<BTreeMap<String, MaskRow>, Error> {
    let file = "mask";
    let records = csv_records(text, file)?;
    let header = records.first().ok_or_else(|| Error::MalformedHeader {
        file: file.to_string(),
        detail: "empty file".to_string(),
    })?;
    let got: Vec<&str> = header.iter().map(str::trim).collect();
    if got != MASK_HEADER {
        return Err(Error::MalformedHeader {
            file: file.to_string(),
            detail: format!("expected {:?}", MASK_HEADER.join(",")),
        });
    }

    let mut out = BTreeMap::new();
    for (ri, rec) in records.iter().enumerate().skip(1) {
        let row_no = ri + 1;
        let fips_cell = rec.get(0).unwrap_or("");
        let fips = match parse_fips(fips_cell) {
            None | Some(None) => return Err(bad_value(file, row_no, "COUNTYFP", fips_cell)),
            Some(Some(f)) => f,
        };
        let mut vals = [0.0f64; 5];
        for (slot, name) in MASK_HEADER.iter().enumerate().skip(1) {
            let cell = rec.get(slot).unwrap_or("");
            let v: f64 = cell
                .trim()
                .parse()
                .map_err(|_| bad_value(file, row_no, name, cell))?;
            if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                return Err(bad_value(file, row_no, name, cell));
            }
            vals[slot - 1] = v;
        }
        let sum: f64 = vals.iter().sum();
        if (sum - 1.0).abs() > 0.02 {
            return Err(Error::BadFractionSum { fips, sum });
        }
        if out
            .insert(
                fips.clone(),
                MaskRow {
                    never: vals[0],
                    rarely: vals[1],
                    sometimes: vals[2],
                    frequently: vals[3],
                    always: vals[4],
                },
            )
            .is_some()
        {
            return Err(Error::DuplicateFips {
                file: file.to_string(),
                fips,
            });
        }
    }
    Ok(out)
}

/// Inner join of the four sources on FIPS, restricted to `states`.
///
/// The county universe is every FIPS seen in either epidemic series with a
/// state in `states`; counties missing from any source are returned in the
/// missing report and excluded from the join. Output is sorted by FIPS.
pub fn join_records(
    cases: &SeriesTable,
    deaths: &SeriesTable,
    census: &BTreeMap<String, CensusRow>,
    mask: &BTreeMap<String, MaskRow>,
    states: &BTreeSet<String>,
) -> Result<(Vec<CountyRecord>, Vec<MissingCounty>), Error> {
    if cases.dates != deaths.dates {
        return Err(Error::MalformedHeader {
            file: "deaths".to_string(),
            detail: "case and death files must cover identical dates".to_string(),
        });
    }

    let case_rows: BTreeMap<&str, &RawSeries> = cases
        .rows
        .iter()
        .filter(|r| states.contains(&r.state))
        .map(|r| (r.fips.as_str(), r))
        .collect();
    let death_rows: BTreeMap<&str, &RawSeries> = deaths
        .rows
        .iter()
        .filter(|r| states.contains(&r.state))
        .map(|r| (r.fips.as_str(), r))
        .collect();

    let universe: BTreeSet<&str> = case_rows.keys().chain(death_rows.keys()).copied().collect();

    let mut records = Vec::new();
    let mut missing = Vec::new();
    for fips in universe {
        let mut absent: Vec<&'static str> = Vec::new();
        if !case_rows.contains_key(fips) {
            absent.push("cases");
        }
        if !death_rows.contains_key(fips) {
            absent.push("deaths");
        }
        if !census.contains_key(fips) {
            absent.push("census");
        }
        if !mask.contains_key(fips) {
            absent.push("mask");
        }
        if !absent.is_empty() {
            missing.push(MissingCounty {
                fips: fips.to_string(),
                missing_sources: absent,
            });
            continue;
        }
        let c = case_rows[fips];
        let d = death_rows[fips];
        let cen = &census[fips];
        let m = &mask[fips];
        records.push(CountyRecord {
            series: CountySeries {
                fips: fips.to_string(),
                county_name: c.county_name.clone(),
                state: c.state.clone(),
                dates: cases.dates.clone(),
                cumulative_cases: c.values.clone(),
                cumulative_deaths: d.values.clone(),
            },
            covariates: CountyCovariates {
                fips: fips.to_string(),
                population: cen.population,
                median_income: cen.median_income,
                education_level: cen.education_level,
                mask_never: m.never,
                mask_rarely: m.rarely,
                mask_sometimes: m.sometimes,
                mask_frequently: m.frequently,
                mask_always: m.always,
            },
        });
    }

    if records.is_empty() {
        return Err(Error::EmptyJoin);
    }
    Ok((records, missing))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series_text(rows: &[(&str, &str, &str, &[u64])]) -> String {
        let mut s = String::from("countyFIPS,County Name,State,StateFIPS,6/1/20,6/2/20,6/3/20\n");
        for (fips, name, state, vals) in rows {
            let v: Vec<String> = vals.iter().map(|x| x.to_string()).collect();
            s.push_str(&format!("{},{},{},{},{}\n", fips, name, state, "06", v.join(",")));
        }
        s
    }

    #[test]
    fn fips_zero_rows_are_dropped() {
        let text = series_text(&[
            ("06037", "Los Angeles County", "CA", &[1, 2, 3]),
            ("0", "Statewide Unallocated", "CA", &[5, 5, 5]),
        ]);
        let t = parse_county_timeseries(&text, ValueKind::Cases).unwrap();
        assert_eq!(t.rows.len(), 1);
        assert_eq!(t.rows[0].fips, "06037");
    }

    #[test]
    fn short_dates_normalize_to_iso() {
        let text = series_text(&[("06037", "Los Angeles County", "CA", &[0, 0, 0])]);
        let t = parse_county_timeseries(&text, ValueKind::Cases).unwrap();
        let iso: Vec<String> = t.dates.iter().map(|d| d.to_string()).collect();
        assert_eq!(iso, ["2020-06-01", "2020-06-02", "2020-06-03"]);
    }

    #[test]
    fn negative_cell_is_a_bad_value_naming_the_cell() {
        let mut text = String::from("countyFIPS,County Name,State,StateFIPS,6/1/20,6/2/20\n");
        text.push_str("06037,Los Angeles County,CA,06,4,-3\n");
        let err = parse_county_timeseries(&text, ValueKind::Deaths).unwrap_err();
        match err {
            Error::BadValue { row, column, value, .. } => {
                assert_eq!(row, 2);
                assert_eq!(column, "2020-06-02");
                assert_eq!(value, "-3");
            }
            other => panic!("unexpected: {other:?}"),
        }
    }

    #[test]
    fn wrong_identity_columns_fail_the_header_check() {
        let text = "fips,County Name,State,StateFIPS,6/1/20\n06037,LA,CA,06,1\n";
        assert!(matches!(
            parse_county_timeseries(text, ValueKind::Cases),
            Err(Error::MalformedHeader { .. })
        ));
    }

    #[test]
    fn decreasing_and_gapped_date_columns_are_rejected() {
        for dates in ["6/2/20,6/1/20", "6/1/20,6/3/20"] {
            let text = format!(
                "countyFIPS,County Name,State,StateFIPS,{}\n06037,LA,CA,06,1,2\n",
                dates
            );
            assert!(matches!(
                parse_county_timeseries(&text, ValueKind::Cases),
                Err(Error::NonMonotonicDates { .. })
            ));
        }
    }

    #[test]
    fn census_percent_normalizes_to_fraction() {
        let text = "fips,population,median_income,hs_completion\n06037,10039110,68044,78.9\n";
        let m = parse_census_covariates(text).unwrap();
        let row = &m["06037"];
        assert!((row.education_level - 0.789).abs() < 1e-12);
        assert_eq!(row.population, 10039110);
    }

    #[test]
    fn census_duplicate_fips_is_rejected() {
        let text = "fips,population,median_income,hs_completion\n\
                    41001,1000,50000,0.8\n41001,1000,50000,0.8\n";
        assert!(matches!(
            parse_census_covariates(text),
            Err(Error::DuplicateFips { .. })
        ));
    }

    #[test]
    fn mask_row_summing_to_one_is_accepted() {
        let text = "COUNTYFP,NEVER,RARELY,SOMETIMES,FREQUENTLY,ALWAYS\n\
                    53033,0.01,0.02,0.04,0.16,0.77\n";
        let m = parse_mask_survey(text).unwrap();
        assert!((m["53033"].always - 0.77).abs() < 1e-12);
    }

    #[test]
    fn mask_row_summing_to_090_is_rejected() {
        let text = "COUNTYFP,NEVER,RARELY,SOMETIMES,FREQUENTLY,ALWAYS\n\
                    53033,0.01,0.02,0.04,0.16,0.67\n";
        match parse_mask_survey(text).unwrap_err() {
            Error::BadFractionSum { fips, sum } => {
                assert_eq!(fips, "53033");
                assert!((sum - 0.90).abs() < 1e-9);
            }
            other => panic!("unexpected: {other:?}"),
        }
    }

    fn small_inputs() -> (SeriesTable, SeriesTable, BTreeMap<String, CensusRow>, BTreeMap<String, MaskRow>) {
        let cases = series_text(&[
            ("06037", "Los Angeles County", "CA", &[1, 2, 3]),
            ("06001", "Alameda County", "CA", &[1, 1, 2]),
            ("16001", "Ada County", "ID", &[9, 9, 9]),
        ]);
        let deaths = series_text(&[
            ("06037", "Los Angeles County", "CA", &[0, 0, 1]),
            ("06001", "Alameda County", "CA", &[0, 0, 0]),
            ("16001", "Ada County", "ID", &[1, 1, 1]),
        ]);
        let census = "fips,population,median_income,hs_completion\n\
                      06037,10039110,68044,78.9\n06001,1671329,99406,90.2\n";
        let mask = "COUNTYFP,NEVER,RARELY,SOMETIMES,FREQUENTLY,ALWAYS\n\
                    06037,0.02,0.03,0.05,0.13,0.77\n";
        (
            parse_county_timeseries(&cases, ValueKind::Cases).unwrap(),
            parse_county_timeseries(&deaths, ValueKind::Deaths).unwrap(),
            parse_census_covariates(census).unwrap(),
            parse_mask_survey(mask).unwrap(),
        )
    }

    #[test]
    fn counties_missing_a_source_are_reported_not_joined() {
        let (cases, deaths, census, mask) = small_inputs();
        let states: BTreeSet<String> = ["CA".to_string()].into();
        let (records, missing) = join_records(&cases, &deaths, &census, &mask, &states).unwrap();
        assert_eq!(records.len(), 1);
        assert_eq!(records[0].series.fips, "06037");
        assert_eq!(missing.len(), 1);
        assert_eq!(missing[0].fips, "06001");
        assert_eq!(missing[0].missing_sources, vec!["mask"]);
    }

    #[test]
    fn out_of_scope_states_never_enter_the_join() {
        let (cases, deaths, census, mask) = small_inputs();
        let states: BTreeSet<String> = ["CA".to_string()].into();
        let (records, missing) = join_records(&cases, &deaths, &census, &mask, &states).unwrap();
        assert!(records.iter().all(|r| r.series.state == "CA"));
        assert!(missing.iter().all(|m| m.fips != "16001"));
    }

    #[test]
    fn empty_state_set_yields_empty_join() {
        let (cases, deaths, census, mask) = small_inputs();
        let states = BTreeSet::new();
        assert!(matches!(
            join_records(&cases, &deaths, &census, &mask, &states),
            Err(Error::EmptyJoin)
        ));
    }

    #[test]
    fn join_output_is_sorted_by_fips_regardless_of_input_order() {
        let cases = series_text(&[
            ("06075", "San Francisco County", "CA", &[1, 2, 3]),
            ("06001", "Alameda County", "CA", &[1, 1, 2]),
        ]);
        let deaths = series_text(&[
            ("06001", "Alameda County", "CA", &[0, 0, 0]),
            ("06075", "San Francisco County", "CA", &[0, 1, 1]),
        ]);
        let census = "fips,population,median_income,hs_completion\n\
                      06075,881549,112449,88.0\n06001,1671329,99406,90.2\n";
        let mask = "COUNTYFP,NEVER,RARELY,SOMETIMES,FREQUENTLY,ALWAYS\n\
                    06001,0.02,0.03,0.05,0.13,0.77\n06075,0.01,0.01,0.03,0.10,0.85\n";
        let cases = parse_county_timeseries(&cases, ValueKind::Cases).unwrap();
        let deaths = parse_county_timeseries(&deaths, ValueKind::Deaths).unwrap();
        let census = parse_census_covariates(census).unwrap();
        let mask = parse_mask_survey(mask).unwrap();
        let states: BTreeSet<String> = ["CA".to_string()].into();
        let (records, _) = join_records(&cases, &deaths, &census, &mask, &states).unwrap();
        let fips: Vec<&str> = records.iter().map(|r| r.series.fips.as_str()).collect();
        assert_eq!(fips, ["06001", "06075"]);
    }
}
