//! Monthly hydrological series: dated records, CSV ingestion and export,
//! chronological splitting and discharge unit conversion.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A calendar month. Ordering is chronological.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct MonthKey {
    year: i32,
    month: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MonthKeyError {
    #[error("month {0} outside 1..=12")]
    MonthOutOfRange(u32),
    #[error("malformed month `{0}`, expected YYYY-MM")]
    Malformed(String),
}

impl MonthKey {
    pub fn new(year: i32, month: u32) -> Result<Self, MonthKeyError> {
        if !(1..=12).contains(&month) {
            return Err(MonthKeyError::MonthOutOfRange(month));
        }
        Ok(Self { year, month })
    }

    pub fn year(self) -> i32 {
        self.year
    }

    pub fn month(self) -> u32 {
        self.month
    }

    pub fn succ(self) -> Self {
        if self.month == 12 {
            Self { year: self.year + 1, month: 1 }
        } else {
            Self { year: self.year, month: self.month + 1 }
        }
    }

    /// Month offset `n` steps later (or earlier for negative `n`).
    pub fn add_months(self, n: i64) -> Self {
        let idx = self.index() + n;
        let year = idx.div_euclid(12);
        let month = idx.rem_euclid(12) as u32 + 1;
        Self { year: year as i32, month }
    }

    /// Months since year 0, January.
    fn index(self) -> i64 {
        i64::from(self.year) * 12 + i64::from(self.month) - 1
    }

    /// Number of months from `self` to `later` (negative if `later` precedes).
    pub fn months_until(self, later: MonthKey) -> i64 {
        later.index() - self.index()
    }

    pub fn is_leap_year(self) -> bool {
        let y = self.year;
        (y % 4 == 0 && y % 100 != 0) || y % 400 == 0
    }

    pub fn days_in_month(self) -> u32 {
        match self.month {
            1 | 3 | 5 | 7 | 8 | 10 | 12 => 31,
            4 | 6 | 9 | 11 => 30,
            _ if self.is_leap_year() => 29,
            _ => 28,
        }
    }

    /// Day-of-year (1-based) of the given day within this month.
    pub fn day_of_year(self, day: u32) -> u32 {
        let mut doy = day;
        let mut m = MonthKey { year: self.year, month: 1 };
        while m.month < self.month {
            doy += m.days_in_month();
            m = m.succ();
        }
        doy
    }
}

impl fmt::Display for MonthKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl FromStr for MonthKey {
    type Err = MonthKeyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || MonthKeyError::Malformed(s.to_string());
        let (y, m) = s.trim().split_once('-').ok_or_else(bad)?;
        if y.len() != 4 || m.len() != 2 || !y.bytes().chain(m.bytes()).all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        let year: i32 = y.parse().map_err(|_| bad())?;
        let month: u32 = m.parse().map_err(|_| bad())?;
        MonthKey::new(year, month)
    }
}

impl TryFrom<String> for MonthKey {
    type Error = MonthKeyError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<MonthKey> for String {
    fn from(k: MonthKey) -> String {
        k.to_string()
    }
}

/// One month of forcing and (optional) observations. Depths in mm, temperature in °C.
#[derive(Debug, Clone, PartialEq)]
pub struct MonthlyRecord {
    pub key: MonthKey,
    pub p_mm: f64,
    pub t_c: f64,
    pub pet_mm: Option<f64>,
    pub q_mm: Option<f64>,
    pub et_mm: Option<f64>,
    pub sm_mm: Option<f64>,
    pub gw_mm: Option<f64>,
}

impl MonthlyRecord {
    pub fn new(key: MonthKey, p_mm: f64, t_c: f64) -> Self {
        Self {
            key,
            p_mm,
            t_c,
            pet_mm: None,
            q_mm: None,
            et_mm: None,
            sm_mm: None,
            gw_mm: None,
        }
    }

    fn depths(&self) -> [(&'static str, Option<f64>); 6] {
        [
            ("p_mm", Some(self.p_mm)),
            ("pet_mm", self.pet_mm),
            ("q_mm", self.q_mm),
            ("et_mm", self.et_mm),
            ("sm_mm", self.sm_mm),
            ("gw_mm", self.gw_mm),
        ]
    }

    fn validate(&self) -> Result<(), SeriesError> {
        if !self.t_c.is_finite() {
            return Err(SeriesError::NonFinite { key: self.key, column: "t_c" });
        }
        for (column, v) in self.depths() {
            if let Some(v) = v {
                if !v.is_finite() {
                    return Err(SeriesError::NonFinite { key: self.key, column });
                }
                if v < 0.0 {
                    return Err(SeriesError::NegativeDepth { key: self.key, column, value: v });
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SeriesError {
    #[error("series is empty")]
    Empty,
    #[error("gap in series: {missing} is missing")]
    Gap { missing: MonthKey },
    #[error("duplicate or out-of-order month {key}")]
    Duplicate { key: MonthKey },
    #[error("negative depth {value} in column {column} at {key}")]
    NegativeDepth { key: MonthKey, column: &'static str, value: f64 },
    #[error("non-finite value in column {column} at {key}")]
    NonFinite { key: MonthKey, column: &'static str },
    #[error("split boundary {boundary} not strictly inside {first}..={last}")]
    BoundaryOutsideSpan { boundary: MonthKey, first: MonthKey, last: MonthKey },
    #[error("series {first} does not directly follow {last}")]
    NotContiguous { last: MonthKey, first: MonthKey },
}

/// A non-empty, gap-free, strictly monthly series.
#[derive(Debug, Clone, PartialEq)]
pub struct MonthlySeries {
    records: Vec<MonthlyRecord>,
}

impl MonthlySeries {
    pub fn new(records: Vec<MonthlyRecord>) -> Result<Self, SeriesError> {
        let first = records.first().ok_or(SeriesError::Empty)?;
        first.validate()?;
        for w in records.windows(2) {
            let (prev, cur) = (&w[0], &w[1]);
            cur.validate()?;
            if cur.key <= prev.key {
                return Err(SeriesError::Duplicate { key: cur.key });
            }
            if cur.key != prev.key.succ() {
                return Err(SeriesError::Gap { missing: prev.key.succ() });
            }
        }
        Ok(Self { records })
    }

    pub fn records(&self) -> &[MonthlyRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<MonthlyRecord> {
        self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn first_key(&self) -> MonthKey {
        self.records[0].key
    }

    pub fn last_key(&self) -> MonthKey {
        self.records[self.records.len() - 1].key
    }

    pub fn keys(&self) -> Vec<MonthKey> {
        self.records.iter().map(|r| r.key).collect()
    }

    /// Position of `key` within the series, if covered.
    pub fn index_of(&self, key: MonthKey) -> Option<usize> {
        let off = self.first_key().months_until(key);
        (0..self.len() as i64).contains(&off).then_some(off as usize)
    }

    /// Splits into `key < boundary` and `key >= boundary`. Both parts must be non-empty.
    pub fn split_at(&self, boundary: MonthKey) -> Result<(MonthlySeries, MonthlySeries), SeriesError> {
        let (first, last) = (self.first_key(), self.last_key());
        if boundary <= first || boundary > last {
            return Err(SeriesError::BoundaryOutsideSpan { boundary, first, last });
        }
        let at = first.months_until(boundary) as usize;
        let (head, tail) = self.records.split_at(at);
        Ok((
            MonthlySeries { records: head.to_vec() },
            MonthlySeries { records: tail.to_vec() },
        ))
    }

    /// Appends `later`, which must start the month after `self` ends.
    pub fn concat(&self, later: &MonthlySeries) -> Result<MonthlySeries, SeriesError> {
        if self.last_key().succ() != later.first_key() {
            return Err(SeriesError::NotContiguous { last: self.last_key(), first: later.first_key() });
        }
        let mut records = self.records.clone();
        records.extend_from_slice(&later.records);
        Ok(MonthlySeries { records })
    }

    pub fn precipitation(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.p_mm).collect()
    }

    pub fn temperature(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.t_c).collect()
    }

    pub fn observed_q(&self) -> Vec<Option<f64>> {
        self.records.iter().map(|r| r.q_mm).collect()
    }

    pub fn observed_et(&self) -> Vec<Option<f64>> {
        self.records.iter().map(|r| r.et_mm).collect()
    }

    pub fn observed_sm(&self) -> Vec<Option<f64>> {
        self.records.iter().map(|r| r.sm_mm).collect()
    }

    pub fn observed_gw(&self) -> Vec<Option<f64>> {
        self.records.iter().map(|r| r.gw_mm).collect()
    }

    /// Writes the series in the ingestion schema. Optional columns appear only
    /// when at least one record carries a value.
    pub fn to_csv(&self) -> String {
        let optional: [(&str, fn(&MonthlyRecord) -> Option<f64>); 5] = [
            ("pet_mm", |r| r.pet_mm),
            ("q_mm", |r| r.q_mm),
            ("et_mm", |r| r.et_mm),
            ("sm_mm", |r| r.sm_mm),
            ("gw_mm", |r| r.gw_mm),
        ];
        let present: Vec<_> = optional
            .iter()
            .filter(|(_, get)| self.records.iter().any(|r| get(r).is_some()))
            .collect();

        let mut out = String::from("date,p_mm,t_c");
        for (name, _) in &present {
            out.push(',');
            out.push_str(name);
        }
        out.push('\n');
        for r in &self.records {
            out.push_str(&format!("{},{},{}", r.key, r.p_mm, r.t_c));
            for (_, get) in &present {
                out.push(',');
                if let Some(v) = get(r) {
                    out.push_str(&v.to_string());
                }
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CsvError {
    #[error("missing required column `{0}`")]
    MissingColumn(&'static str),
    #[error("row {row}, column {column}: {message}")]
    Cell { row: usize, column: String, message: String },
    #[error("row {row}: {message}")]
    Row { row: usize, message: String },
    #[error("row {row}: gap in series, {missing} is missing")]
    Gap { row: usize, missing: MonthKey },
    #[error("row {row}: duplicate or out-of-order month {key}")]
    Duplicate { row: usize, key: MonthKey },
    #[error("empty document")]
    Empty,
    #[error("column q_cms requires a catchment area for conversion; column q_mm is also present")]
    ConflictingDischarge,
    #[error(transparent)]
    Unit(#[from] UnitError),
}

/// Options for [`parse_forcing_csv_with`].
#[derive(Debug, Clone, Copy, Default)]
pub struct ParseOptions {
    /// When set, a `q_cms` discharge column is converted to `q_mm` depth.
    pub area_km2: Option<f64>,
}

/// A parsed document plus warnings about ignored columns.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedForcing {
    pub series: MonthlySeries,
    pub warnings: Vec<String>,
}

const REQUIRED: [&str; 3] = ["date", "p_mm", "t_c"];
const OPTIONAL: [&str; 5] = ["pet_mm", "q_mm", "et_mm", "sm_mm", "gw_mm"];

pub fn parse_forcing_csv(text: &str) -> Result<ParsedForcing, CsvError> {
    parse_forcing_csv_with(text, ParseOptions::default())
}

/// Parses `date,p_mm,t_c[,pet_mm,q_mm,et_mm,sm_mm,gw_mm]` in any column order.
/// Row numbers in errors count data rows from 1.
pub fn parse_forcing_csv_with(text: &str, opts: ParseOptions) -> Result<ParsedForcing, CsvError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| CsvError::Row { row: 0, message: e.to_string() })?
        .clone();
    let find = |name: &str| headers.iter().position(|h| h == name);

    let mut req = [0usize; 3];
    for (slot, name) in req.iter_mut().zip(REQUIRED) {
        *slot = find(name).ok_or(CsvError::MissingColumn(name))?;
    }
    let opt: Vec<(&'static str, Option<usize>)> = OPTIONAL.iter().map(|&n| (n, find(n))).collect();

    let q_cms = find("q_cms");
    let convert_cms = match (q_cms, opts.area_km2) {
        (Some(_), Some(_)) if find("q_mm").is_some() => return Err(CsvError::ConflictingDischarge),
        (Some(_), Some(area)) => {
            if area <= 0.0 || !area.is_finite() {
                return Err(UnitError::NonPositiveArea(area).into());
            }
            true
        }
        _ => false,
    };

    let mut warnings = Vec::new();
    for h in headers.iter() {
        let known = REQUIRED.contains(&h) || OPTIONAL.contains(&h) || (h == "q_cms" && convert_cms);
        if !known {
            warnings.push(format!("ignored column `{h}`"));
        }
    }

    let mut records: Vec<MonthlyRecord> = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row_no = i + 1;
        let row = row.map_err(|e| CsvError::Row { row: row_no, message: e.to_string() })?;
        let cell = |idx: usize| row.get(idx).unwrap_or("");
        let number = |idx: usize, column: &str, required: bool| -> Result<Option<f64>, CsvError> {
            let raw = cell(idx);
            if raw.is_empty() {
                if required {
                    return Err(CsvError::Cell {
                        row: row_no,
                        column: column.to_string(),
                        message: "missing value".into(),
                    });
                }
                return Ok(None);
            }
            let v: f64 = raw.parse().map_err(|_| CsvError::Cell {
                row: row_no,
                column: column.to_string(),
                message: format!("not a number: `{raw}`"),
            })?;
            if !v.is_finite() {
                return Err(CsvError::Cell {
                    row: row_no,
                    column: column.to_string(),
                    message: "non-finite value".into(),
                });
            }
            if column != "t_c" && v < 0.0 {
                return Err(CsvError::Cell {
                    row: row_no,
                    column: column.to_string(),
                    message: format!("negative depth {v}"),
                });
            }
            Ok(Some(v))
        };

        let key: MonthKey = cell(req[0]).parse().map_err(|e: MonthKeyError| CsvError::Cell {
            row: row_no,
            column: "date".into(),
            message: e.to_string(),
        })?;
        let mut rec = MonthlyRecord::new(
            key,
            number(req[1], "p_mm", true)?.unwrap_or_default(),
            number(req[2], "t_c", true)?.unwrap_or_default(),
        );
        for &(name, idx) in &opt {
            let Some(idx) = idx else { continue };
            let v = number(idx, name, false)?;
            match name {
                "pet_mm" => rec.pet_mm = v,
                "q_mm" => rec.q_mm = v,
                "et_mm" => rec.et_mm = v,
                "sm_mm" => rec.sm_mm = v,
                "gw_mm" => rec.gw_mm = v,
                _ => unreachable!(),
            }
        }
        if let (true, Some(idx), Some(area)) = (convert_cms, q_cms, opts.area_km2) {
            rec.q_mm = number(idx, "q_cms", false)?
                .map(|q| cms_to_mm_per_month(q, area, key))
                .transpose()?;
        }

        if let Some(prev) = records.last() {
            if key <= prev.key {
                return Err(CsvError::Duplicate { row: row_no, key });
            }
            if key != prev.key.succ() {
                return Err(CsvError::Gap { row: row_no, missing: prev.key.succ() });
            }
        }
        records.push(rec);
    }

    let series = MonthlySeries::new(records).map_err(|e| match e {
        SeriesError::Empty => CsvError::Empty,
        other => CsvError::Row { row: 0, message: other.to_string() },
    })?;
    Ok(ParsedForcing { series, warnings })
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum UnitError {
    #[error("catchment area must be positive, got {0} km²")]
    NonPositiveArea(f64),
    #[error("discharge must be non-negative and finite, got {0} m³/s")]
    InvalidDischarge(f64),
}

/// Mean discharge (m³/s) over a month expressed as a depth over the catchment (mm/month).
pub fn cms_to_mm_per_month(q_cms: f64, area_km2: f64, key: MonthKey) -> Result<f64, UnitError> {
    if !(area_km2 > 0.0) || !area_km2.is_finite() {
        return Err(UnitError::NonPositiveArea(area_km2));
    }
    if !(q_cms >= 0.0) || !q_cms.is_finite() {
        return Err(UnitError::InvalidDischarge(q_cms));
    }
    let volume_m3 = q_cms * 86_400.0 * f64::from(key.days_in_month());
    Ok(volume_m3 / (area_km2 * 1.0e6) * 1000.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key(y: i32, m: u32) -> MonthKey {
        MonthKey::new(y, m).unwrap()
    }

    #[test]
    fn month_key_succession_and_order() {
        assert_eq!(key(1979, 12).succ(), key(1980, 1));
        assert!(key(1979, 12) < key(1980, 1));
        assert_eq!(key(1979, 1).add_months(360), key(2009, 1));
        assert_eq!(key(2009, 1).add_months(-1), key(2008, 12));
        assert_eq!(key(1979, 1).months_until(key(2014, 12)), 431);
        assert!(MonthKey::new(2000, 13).is_err());
        assert!("1979-1".parse::<MonthKey>().is_err());
        assert!("79-01".parse::<MonthKey>().is_err());
        assert_eq!("2014-07".parse::<MonthKey>().unwrap(), key(2014, 7));
    }

    #[test]
    fn leap_rules() {
        assert_eq!(key(2012, 2).days_in_month(), 29);
        assert_eq!(key(2011, 2).days_in_month(), 28);
        assert_eq!(key(1900, 2).days_in_month(), 28);
        assert_eq!(key(2000, 2).days_in_month(), 29);
        assert_eq!(key(2012, 3).day_of_year(1), 61);
        assert_eq!(key(2011, 12).day_of_year(31), 365);
    }

    #[test]
    fn minimal_document() {
        let doc = "date,p_mm,t_c\n1979-01,120.5,24.1\n1979-02,80.0,25.0\n";
        let parsed = parse_forcing_csv(doc).unwrap();
        assert_eq!(parsed.series.len(), 2);
        assert!(parsed.warnings.is_empty());
        let r = &parsed.series.records()[0];
        assert_eq!((r.p_mm, r.t_c, r.q_mm), (120.5, 24.1, None));
    }

    #[test]
    fn gap_is_reported_with_missing_month() {
        let doc = "date,p_mm,t_c\n1979-01,1,2\n1979-03,1,2\n";
        let err = parse_forcing_csv(doc).unwrap_err();
        assert_eq!(err, CsvError::Gap { row: 2, missing: key(1979, 2) });
        assert!(err.to_string().contains("1979-02"));
    }

    #[test]
    fn duplicate_month_rejected() {
        let doc = "date,p_mm,t_c\n1979-01,1,2\n1979-01,1,2\n";
        assert_eq!(
            parse_forcing_csv(doc).unwrap_err(),
            CsvError::Duplicate { row: 2, key: key(1979, 1) }
        );
    }

    #[test]
    fn negative_depth_names_row_and_column() {
        let doc = "date,p_mm,t_c\n1979-01,-5.0,24.1\n";
        match parse_forcing_csv(doc).unwrap_err() {
            CsvError::Cell { row, column, .. } => assert_eq!((row, column.as_str()), (1, "p_mm")),
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn negative_temperature_allowed() {
        let doc = "date,p_mm,t_c\n1979-01,5.0,-12.5\n";
        assert_eq!(parse_forcing_csv(doc).unwrap().series.records()[0].t_c, -12.5);
    }

    #[test]
    fn malformed_date_and_missing_column() {
        let doc = "date,p_mm,t_c\n1979/01,5.0,1\n";
        match parse_forcing_csv(doc).unwrap_err() {
            CsvError::Cell { row, column, .. } => assert_eq!((row, column.as_str()), (1, "date")),
            e => panic!("unexpected {e:?}"),
        }
        assert_eq!(
            parse_forcing_csv("date,t_c\n1979-01,1\n").unwrap_err(),
            CsvError::MissingColumn("p_mm")
        );
    }

    #[test]
    fn column_order_optional_cells_and_extras() {
        let doc = "t_c,extra,q_mm,date,p_mm\r\n20,x,,1979-01,3\r\n21,y,4.5,1979-02,0\r\n";
        let parsed = parse_forcing_csv(doc).unwrap();
        assert_eq!(parsed.warnings, vec!["ignored column `extra`".to_string()]);
        let recs = parsed.series.records();
        assert_eq!(recs[0].q_mm, None);
        assert_eq!(recs[1].q_mm, Some(4.5));
        assert_eq!(recs[1].p_mm, 0.0);
    }

    #[test]
    fn q_cms_converted_when_area_given() {
        let doc = "date,p_mm,t_c,q_cms\n1979-04,3,20,1\n";
        let with_area =
            parse_forcing_csv_with(doc, ParseOptions { area_km2: Some(8667.95) }).unwrap();
        let q = with_area.series.records()[0].q_mm.unwrap();
        assert!((q - 0.299_032_643_7).abs() < 1e-9);
        let without = parse_forcing_csv(doc).unwrap();
        assert_eq!(without.series.records()[0].q_mm, None);
        assert_eq!(without.warnings.len(), 1);
    }

    fn series(start: MonthKey, n: usize) -> MonthlySeries {
        let recs = (0..n)
            .map(|i| MonthlyRecord::new(start.add_months(i as i64), i as f64, 20.0))
            .collect();
        MonthlySeries::new(recs).unwrap()
    }

    #[test]
    fn split_lengths_and_identity() {
        let s = series(key(1979, 1), 432);
        assert_eq!(s.last_key(), key(2014, 12));
        let (train, test) = s.split_at(key(2009, 1)).unwrap();
        assert_eq!((train.len(), test.len()), (360, 72));
        assert_eq!(train.concat(&test).unwrap(), s);
    }

    #[test]
    fn split_at_edges_rejected() {
        let s = series(key(1979, 1), 24);
        assert!(s.split_at(key(1979, 1)).is_err());
        assert!(s.split_at(key(1981, 1)).is_err());
        assert!(s.split_at(key(1980, 12)).is_ok());
    }

    #[test]
    fn unit_conversion() {
        let q = cms_to_mm_per_month(1.0, 8667.95, key(1979, 4)).unwrap();
        let expected = 1.0 * 86400.0 * 30.0 / 8.66795e9 * 1000.0;
        assert!((q - expected).abs() < 1e-15);
        assert!((q - 0.29903).abs() < 5e-6);
        assert_eq!(cms_to_mm_per_month(0.0, 10.0, key(2000, 2)).unwrap(), 0.0);
        let leap = cms_to_mm_per_month(3.0, 50.0, key(2012, 2)).unwrap();
        let common = cms_to_mm_per_month(3.0, 50.0, key(2011, 2)).unwrap();
        assert!((leap / common - 29.0 / 28.0).abs() < 1e-15);
        assert!(cms_to_mm_per_month(1.0, 0.0, key(2000, 1)).is_err());
        assert!(cms_to_mm_per_month(1.0, -3.0, key(2000, 1)).is_err());
    }
}
