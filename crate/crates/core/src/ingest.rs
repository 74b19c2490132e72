//! AIS record parsing, validation, categorization, and stream partitioning.
//!
//! Input is delimiter-separated text with a header row. Only identity, time,
//! and position are mandatory; kinematic fields are optional. Malformed rows
//! are never silently dropped: every rejected row is logged with its line
//! number and a reason, and `rows parsed = records emitted + rows rejected`
//! holds exactly.

use std::collections::BTreeMap;
use std::io;

use chrono::{DateTime, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One validated AIS position report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AisRecord {
    pub vessel_id: u64,
    /// UTC instant, unix seconds.
    pub ts: i64,
    pub lat: f64,
    pub lon: f64,
    pub sog: Option<f64>,
    pub cog: Option<f64>,
    pub nav_status: Option<u8>,
    pub ship_type: Option<u16>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VesselCategory {
    Commercial,
    Fishing,
    Passenger,
    Other,
}

impl VesselCategory {
    pub const ALL: [VesselCategory; 4] = [
        VesselCategory::Commercial,
        VesselCategory::Fishing,
        VesselCategory::Passenger,
        VesselCategory::Other,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            VesselCategory::Commercial => "commercial",
            VesselCategory::Fishing => "fishing",
            VesselCategory::Passenger => "passenger",
            VesselCategory::Other => "other",
        }
    }
}

impl std::fmt::Display for VesselCategory {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for VesselCategory {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "commercial" => Ok(VesselCategory::Commercial),
            "fishing" => Ok(VesselCategory::Fishing),
            "passenger" => Ok(VesselCategory::Passenger),
            "other" => Ok(VesselCategory::Other),
            _ => Err(Error::Config(format!("unknown vessel category `{s}`"))),
        }
    }
}

/// Stream selector: one concrete category, or the "all" aggregate that
/// unions the four.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CategoryKey {
    All,
    Cat(VesselCategory),
}

impl CategoryKey {
    pub const EVERY: [CategoryKey; 5] = [
        CategoryKey::All,
        CategoryKey::Cat(VesselCategory::Commercial),
        CategoryKey::Cat(VesselCategory::Fishing),
        CategoryKey::Cat(VesselCategory::Passenger),
        CategoryKey::Cat(VesselCategory::Other),
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            CategoryKey::All => "all",
            CategoryKey::Cat(c) => c.as_str(),
        }
    }
}

impl std::fmt::Display for CategoryKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for CategoryKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("all") {
            Ok(CategoryKey::All)
        } else {
            Ok(CategoryKey::Cat(s.parse()?))
        }
    }
}

/// Ship-type code ranges mapped to categories. Shipped as a versioned
/// fixture file rather than hardcoded; first matching range wins and
/// unmatched or absent codes map to `Other`.
#[derive(Debug, Clone)]
pub struct CategoryTable {
    rules: Vec<(u16, u16, VesselCategory)>,
}

pub const DEFAULT_CATEGORY_TABLE: &str = include_str!("../fixtures/ship_type_categories.v1.tsv");

impl CategoryTable {
    pub fn from_tsv(text: &str) -> Result<Self> {
        let mut rules = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut it = line.split('\t');
            let (lo, hi, cat) = (it.next(), it.next(), it.next());
            let parse = || -> Option<(u16, u16, VesselCategory)> {
                let lo: u16 = lo?.trim().parse().ok()?;
                let hi: u16 = hi?.trim().parse().ok()?;
                let cat: VesselCategory = cat?.trim().parse().ok()?;
                Some((lo, hi, cat))
            };
            match parse() {
                Some((lo, hi, cat)) if lo <= hi => rules.push((lo, hi, cat)),
                _ => {
                    return Err(Error::Config(format!(
                        "category table line {}: malformed rule `{line}`",
                        lineno + 1
                    )))
                }
            }
        }
        Ok(CategoryTable { rules })
    }

    pub fn categorize(&self, ship_type: Option<u16>) -> VesselCategory {
        match ship_type {
            Some(code) => self
                .rules
                .iter()
                .find(|&&(lo, hi, _)| lo <= code && code <= hi)
                .map(|&(_, _, cat)| cat)
                .unwrap_or(VesselCategory::Other),
            None => VesselCategory::Other,
        }
    }
}

impl Default for CategoryTable {
    fn default() -> Self {
        CategoryTable::from_tsv(DEFAULT_CATEGORY_TABLE).expect("bundled fixture is valid")
    }
}

/// CSV schema: delimiter and column names. Only the first four columns are
/// mandatory in the input header.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SchemaConfig {
    pub delimiter: char,
    pub vessel_id: String,
    pub timestamp: String,
    pub lat: String,
    pub lon: String,
    pub sog: String,
    pub cog: String,
    pub nav_status: String,
    pub ship_type: String,
    /// Navigational status codes dropped at ingestion (logged as rejections).
    pub exclude_nav_status: Vec<u8>,
}

impl Default for SchemaConfig {
    fn default() -> Self {
        SchemaConfig {
            delimiter: ',',
            vessel_id: "vessel_id".into(),
            timestamp: "timestamp".into(),
            lat: "lat".into(),
            lon: "lon".into(),
            sog: "sog".into(),
            cog: "cog".into(),
            nav_status: "nav_status".into(),
            ship_type: "ship_type".into(),
            exclude_nav_status: Vec::new(),
        }
    }
}

/// A rejected input row: line number and reason.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rejection {
    pub row: u64,
    pub reason: String,
}

impl Rejection {
    /// Rejection-log line format: `row<TAB>reason`.
    pub fn log_line(&self) -> String {
        format!("{}\t{}", self.row, self.reason)
    }
}

/// A parsed record together with its source row, kept so later stages
/// (for example duplicate collapsing) can log auditable rejections.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParsedRow {
    pub row: u64,
    pub record: AisRecord,
}

#[derive(Debug, Default)]
pub struct ParseOutput {
    pub records: Vec<ParsedRow>,
    pub rejections: Vec<Rejection>,
    pub rows_read: u64,
}

struct ColumnMap {
    vessel_id: usize,
    timestamp: usize,
    lat: usize,
    lon: usize,
    sog: Option<usize>,
    cog: Option<usize>,
    nav_status: Option<usize>,
    ship_type: Option<usize>,
}

fn resolve_columns(headers: &csv::StringRecord, schema: &SchemaConfig) -> Result<ColumnMap> {
    let find = |name: &str| headers.iter().position(|h| h.trim() == name);
    let mandatory = |name: &str| {
        find(name).ok_or_else(|| Error::Config(format!("missing mandatory column `{name}`")))
    };
    Ok(ColumnMap {
        vessel_id: mandatory(&schema.vessel_id)?,
        timestamp: mandatory(&schema.timestamp)?,
        lat: mandatory(&schema.lat)?,
        lon: mandatory(&schema.lon)?,
        sog: find(&schema.sog),
        cog: find(&schema.cog),
        nav_status: find(&schema.nav_status),
        ship_type: find(&schema.ship_type),
    })
}

fn parse_row(
    rec: &csv::StringRecord,
    cols: &ColumnMap,
    schema: &SchemaConfig,
) -> std::result::Result<AisRecord, String> {
    let field = |idx: usize| rec.get(idx).map(str::trim).unwrap_or("");
    let opt_field = |idx: Option<usize>| idx.map(|i| field(i)).filter(|s| !s.is_empty());

    let vessel_id: u64 = field(cols.vessel_id)
        .parse()
        .ok()
        .filter(|&v| v > 0)
        .ok_or("vessel_id not a positive integer")?;
    let ts = DateTime::parse_from_rfc3339(field(cols.timestamp))
        .map_err(|_| "timestamp not ISO-8601 UTC")?
        .timestamp();
    let lat: f64 = field(cols.lat)
        .parse()
        .map_err(|_| "latitude not a number")?;
    if !(-90.0..=90.0).contains(&lat) || !lat.is_finite() {
        return Err("latitude out of range".into());
    }
    let lon: f64 = field(cols.lon)
        .parse()
        .map_err(|_| "longitude not a number")?;
    if !(-180.0..=180.0).contains(&lon) || !lon.is_finite() {
        return Err("longitude out of range".into());
    }
    let sog = match opt_field(cols.sog) {
        Some(s) => {
            let v: f64 = s.parse().map_err(|_| "sog not a number")?;
            if !(v >= 0.0) {
                return Err("sog negative".into());
            }
            Some(v)
        }
        None => None,
    };
    let cog = match opt_field(cols.cog) {
        Some(s) => {
            let v: f64 = s.parse().map_err(|_| "cog not a number")?;
            if !(0.0..360.0).contains(&v) {
                return Err("cog out of range".into());
            }
            Some(v)
        }
        None => None,
    };
    let nav_status = match opt_field(cols.nav_status) {
        Some(s) => Some(s.parse::<u8>().map_err(|_| "nav_status not a small integer")?),
        None => None,
    };
    if let Some(ns) = nav_status {
        if schema.exclude_nav_status.contains(&ns) {
            return Err(format!("navigational status {ns} excluded by configuration"));
        }
    }
    let ship_type = match opt_field(cols.ship_type) {
        Some(s) => Some(s.parse::<u16>().map_err(|_| "ship_type not an integer")?),
        None => None,
    };
    Ok(AisRecord {
        vessel_id,
        ts,
        lat,
        lon,
        sog,
        cog,
        nav_status,
        ship_type,
    })
}

/// Parses one delimiter-separated input. Row numbers in rejections are file
/// line numbers (the header is line 1), offset by `row_offset` so multiple
/// inputs can share one log.
pub fn parse_ais_csv<R: io::Read>(
    reader: R,
    schema: &SchemaConfig,
    row_offset: u64,
) -> Result<ParseOutput> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter as u8)
        .flexible(true)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let cols = resolve_columns(&headers, schema)?;

    let mut out = ParseOutput::default();
    for item in rdr.records() {
        let rec = match item {
            Ok(rec) => rec,
            Err(e) => {
                // The csv crate reports the line of the malformed record.
                let row = match e.position() {
                    Some(p) => row_offset + p.line(),
                    None => 0,
                };
                out.rows_read += 1;
                out.rejections.push(Rejection {
                    row,
                    reason: "unparseable row".into(),
                });
                continue;
            }
        };
        out.rows_read += 1;
        let row = row_offset + rec.position().map(|p| p.line()).unwrap_or(0);
        match parse_row(&rec, &cols, schema) {
            Ok(record) => out.records.push(ParsedRow { row, record }),
            Err(reason) => out.rejections.push(Rejection { row, reason }),
        }
    }
    Ok(out)
}

#[derive(Debug, Default)]
pub struct VesselStreams {
    /// Per-vessel records, strictly increasing timestamps.
    pub by_vessel: BTreeMap<u64, Vec<AisRecord>>,
    /// Duplicate `(vessel_id, timestamp)` rows dropped (first kept).
    pub duplicate_rejections: Vec<Rejection>,
}

/// Groups parsed rows by vessel, sorts by timestamp, and collapses duplicate
/// `(vessel_id, timestamp)` rows keeping the first input occurrence.
pub fn group_by_vessel(parsed: &[ParsedRow]) -> VesselStreams {
    let mut grouped: BTreeMap<u64, Vec<(u64, AisRecord)>> = BTreeMap::new();
    for p in parsed {
        grouped
            .entry(p.record.vessel_id)
            .or_default()
            .push((p.row, p.record));
    }
    let mut out = VesselStreams::default();
    for (vessel, mut rows) in grouped {
        rows.sort_by_key(|&(row, rec)| (rec.ts, row));
        let mut kept: Vec<AisRecord> = Vec::with_capacity(rows.len());
        for (row, rec) in rows {
            if kept.last().map(|last| last.ts) == Some(rec.ts) {
                out.duplicate_rejections.push(Rejection {
                    row,
                    reason: format!("duplicate timestamp for vessel {vessel}"),
                });
            } else {
                kept.push(rec);
            }
        }
        out.by_vessel.insert(vessel, kept);
    }
    out
}

/// Analysis time window, inclusive day bounds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimeWindow {
    pub label: String,
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl TimeWindow {
    pub fn new(label: impl Into<String>, start: NaiveDate, end: NaiveDate) -> Self {
        TimeWindow {
            label: label.into(),
            start,
            end,
        }
    }

    pub fn start_ts(&self) -> i64 {
        self.start.and_hms_opt(0, 0, 0).unwrap().and_utc().timestamp()
    }

    pub fn end_ts_exclusive(&self) -> i64 {
        self.end
            .succ_opt()
            .unwrap()
            .and_hms_opt(0, 0, 0)
            .unwrap()
            .and_utc()
            .timestamp()
    }

    pub fn contains_ts(&self, ts: i64) -> bool {
        ts >= self.start_ts() && ts < self.end_ts_exclusive()
    }
}

/// The four-phase yearly windows used as the default preset: a 2019
/// reference year, the two pandemic years, and the 2022 recovery year.
pub fn pandemic_window_preset() -> Vec<TimeWindow> {
    let d = |y: i32, m: u32, day: u32| NaiveDate::from_ymd_opt(y, m, day).unwrap();
    vec![
        TimeWindow::new("pre", d(2019, 1, 1), d(2019, 12, 31)),
        TimeWindow::new("pandemic_p1", d(2020, 1, 1), d(2020, 12, 31)),
        TimeWindow::new("pandemic_p2", d(2021, 1, 1), d(2021, 12, 31)),
        TimeWindow::new("post", d(2022, 1, 1), d(2022, 12, 31)),
    ]
}

pub fn validate_windows(windows: &[TimeWindow]) -> Result<()> {
    if windows.is_empty() {
        return Err(Error::Config("no time windows configured".into()));
    }
    for w in windows {
        if w.start > w.end {
            return Err(Error::Config(format!(
                "window `{}` has start after end",
                w.label
            )));
        }
    }
    let mut sorted: Vec<&TimeWindow> = windows.iter().collect();
    sorted.sort_by_key(|w| w.start);
    for pair in sorted.windows(2) {
        if pair[1].start <= pair[0].end {
            return Err(Error::Config(format!(
                "windows `{}` and `{}` overlap",
                pair[0].label, pair[1].label
            )));
        }
    }
    let mut labels: Vec<&str> = windows.iter().map(|w| w.label.as_str()).collect();
    labels.sort_unstable();
    labels.dedup();
    if labels.len() != windows.len() {
        return Err(Error::Config("duplicate window labels".into()));
    }
    Ok(())
}

/// Streams keyed by (category, window label). A record lands in at most one
/// window and, within it, in exactly two streams: its own category and the
/// "all" aggregate (when those streams are requested).
#[derive(Debug, Default)]
pub struct Partitioned {
    pub streams: BTreeMap<(CategoryKey, String), Vec<AisRecord>>,
    pub unassigned: u64,
}

pub fn partition_records(
    records: &[AisRecord],
    windows: &[TimeWindow],
    table: &CategoryTable,
    emit: &[CategoryKey],
) -> Result<Partitioned> {
    validate_windows(windows)?;
    let mut out = Partitioned::default();
    for key in emit {
        for w in windows {
            out.streams.insert((*key, w.label.clone()), Vec::new());
        }
    }
    let bounds: Vec<(i64, i64)> = windows
        .iter()
        .map(|w| (w.start_ts(), w.end_ts_exclusive()))
        .collect();
    for rec in records {
        let win = bounds
            .iter()
            .position(|&(s, e)| rec.ts >= s && rec.ts < e);
        let Some(win) = win else {
            out.unassigned += 1;
            continue;
        };
        let label = &windows[win].label;
        let cat = table.categorize(rec.ship_type);
        for key in [CategoryKey::All, CategoryKey::Cat(cat)] {
            if let Some(stream) = out.streams.get_mut(&(key, label.clone())) {
                stream.push(*rec);
            }
        }
    }
    Ok(out)
}

const TS_FORMAT: &str = "%Y-%m-%dT%H:%M:%SZ";

pub fn format_ts(ts: i64) -> String {
    DateTime::from_timestamp(ts, 0)
        .expect("timestamp in range")
        .format(TS_FORMAT)
        .to_string()
}

/// Serializes records in the ingestion schema. Floats use the shortest
/// round-trip representation, so re-parsing reproduces records bit-exactly.
pub fn write_records_csv<W: io::Write>(mut w: W, records: &[AisRecord]) -> io::Result<()> {
    writeln!(w, "vessel_id,timestamp,lat,lon,sog,cog,nav_status,ship_type")?;
    let opt_f = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            r.vessel_id,
            format_ts(r.ts),
            r.lat,
            r.lon,
            opt_f(r.sog),
            opt_f(r.cog),
            r.nav_status.map(|x| x.to_string()).unwrap_or_default(),
            r.ship_type.map(|x| x.to_string()).unwrap_or_default(),
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const HEADER: &str = "vessel_id,timestamp,lat,lon,sog,cog,nav_status,ship_type\n";

    fn parse(text: &str) -> ParseOutput {
        parse_ais_csv(text.as_bytes(), &SchemaConfig::default(), 0).unwrap()
    }

    #[test]
    fn parses_a_well_formed_row() {
        let out = parse(&format!(
            "{HEADER}123456789,2019-06-01T00:00:00Z,48.5,-62.0,10.2,90.0,0,30\n"
        ));
        assert_eq!(out.rejections.len(), 0);
        assert_eq!(out.records.len(), 1);
        let r = out.records[0].record;
        assert_eq!(r.vessel_id, 123456789);
        assert_eq!(format_ts(r.ts), "2019-06-01T00:00:00Z");
        assert_eq!(r.lat, 48.5);
        assert_eq!(r.lon, -62.0);
        assert_eq!(r.sog, Some(10.2));
        assert_eq!(r.cog, Some(90.0));
        assert_eq!(r.nav_status, Some(0));
        assert_eq!(r.ship_type, Some(30));
        assert_eq!(
            CategoryTable::default().categorize(r.ship_type),
            VesselCategory::Fishing
        );
    }

    #[test]
    fn latitude_out_of_range_is_rejected() {
        let out = parse(&format!(
            "{HEADER}1,2019-06-01T00:00:00Z,91.0,-62.0,,,,\n"
        ));
        assert!(out.records.is_empty());
        assert_eq!(out.rejections.len(), 1);
        assert_eq!(out.rejections[0].reason, "latitude out of range");
        assert_eq!(out.rejections[0].row, 2);
    }

    #[test]
    fn empty_input_with_header_is_empty() {
        let out = parse(HEADER);
        assert!(out.records.is_empty());
        assert!(out.rejections.is_empty());
        assert_eq!(out.rows_read, 0);
    }

    #[test]
    fn missing_mandatory_column_is_fatal() {
        let err = parse_ais_csv(
            "vessel_id,timestamp,lat\n1,2019-06-01T00:00:00Z,48.0\n".as_bytes(),
            &SchemaConfig::default(),
            0,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn optional_fields_may_be_absent() {
        let out = parse(&format!("{HEADER}7,2019-06-01T12:30:00Z,48.0,-61.0,,,,\n"));
        assert_eq!(out.records.len(), 1);
        let r = out.records[0].record;
        assert_eq!(r.sog, None);
        assert_eq!(r.cog, None);
        assert_eq!(r.nav_status, None);
        assert_eq!(r.ship_type, None);
    }

    #[test]
    fn conservation_parsed_equals_emitted_plus_rejected() {
        let out = parse(&format!(
            "{HEADER}\
             1,2019-06-01T00:00:00Z,48.0,-61.0,,,,70\n\
             2,not-a-time,48.0,-61.0,,,,\n\
             3,2019-06-01T00:00:00Z,99.0,-61.0,,,,\n\
             4,2019-06-01T00:00:00Z,48.0,-61.0,,,,\n"
        ));
        assert_eq!(out.rows_read, 4);
        assert_eq!(out.records.len() + out.rejections.len(), 4);
    }

    #[test]
    fn nav_status_exclusion_rejects_with_reason() {
        let schema = SchemaConfig {
            exclude_nav_status: vec![1],
            ..SchemaConfig::default()
        };
        let text = format!(
            "{HEADER}\
             1,2019-06-01T00:00:00Z,48.0,-61.0,,,1,\n\
             1,2019-06-01T00:01:00Z,48.0,-61.0,,,0,\n"
        );
        let out = parse_ais_csv(text.as_bytes(), &schema, 0).unwrap();
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.rejections.len(), 1);
        assert!(out.rejections[0].reason.contains("excluded by configuration"));
    }

    #[test]
    fn categorize_covers_the_code_table() {
        let t = CategoryTable::default();
        assert_eq!(t.categorize(Some(30)), VesselCategory::Fishing);
        assert_eq!(t.categorize(Some(65)), VesselCategory::Passenger);
        assert_eq!(t.categorize(Some(60)), VesselCategory::Passenger);
        assert_eq!(t.categorize(Some(69)), VesselCategory::Passenger);
        assert_eq!(t.categorize(Some(70)), VesselCategory::Commercial);
        assert_eq!(t.categorize(Some(89)), VesselCategory::Commercial);
        assert_eq!(t.categorize(Some(31)), VesselCategory::Other);
        assert_eq!(t.categorize(Some(90)), VesselCategory::Other);
        assert_eq!(t.categorize(None), VesselCategory::Other);
    }

    #[test]
    fn duplicates_keep_first_occurrence() {
        let rec = |row: u64, ts: i64, lat: f64| ParsedRow {
            row,
            record: AisRecord {
                vessel_id: 5,
                ts,
                lat,
                lon: -61.0,
                sog: None,
                cog: None,
                nav_status: None,
                ship_type: None,
            },
        };
        let streams = group_by_vessel(&[rec(2, 100, 48.0), rec(3, 100, 49.0), rec(4, 40, 47.0)]);
        let kept = &streams.by_vessel[&5];
        assert_eq!(kept.len(), 2);
        assert_eq!(kept[0].ts, 40);
        assert_eq!(kept[1].ts, 100);
        assert_eq!(kept[1].lat, 48.0, "first occurrence wins");
        assert_eq!(streams.duplicate_rejections.len(), 1);
        assert_eq!(streams.duplicate_rejections[0].row, 3);
    }

    fn quick_record(ts: i64, ship_type: Option<u16>) -> AisRecord {
        AisRecord {
            vessel_id: 1,
            ts,
            lat: 48.0,
            lon: -61.0,
            sog: None,
            cog: None,
            nav_status: None,
            ship_type,
        }
    }

    fn ts_of(date: &str) -> i64 {
        DateTime::parse_from_rfc3339(&format!("{date}T12:00:00Z"))
            .unwrap()
            .timestamp()
    }

    #[test]
    fn partition_assigns_pandemic_windows() {
        let windows = pandemic_window_preset();
        let table = CategoryTable::default();
        let recs = [
            quick_record(ts_of("2020-06-01"), Some(30)),
            quick_record(ts_of("2018-01-01"), Some(30)),
        ];
        let part = partition_records(&recs, &windows, &table, &CategoryKey::EVERY).unwrap();
        let fishing_p1 = &part.streams[&(
            CategoryKey::Cat(VesselCategory::Fishing),
            "pandemic_p1".to_string(),
        )];
        assert_eq!(fishing_p1.len(), 1);
        assert_eq!(part.unassigned, 1);
    }

    #[test]
    fn partition_counts_balance_per_window() {
        let windows = pandemic_window_preset();
        let table = CategoryTable::default();
        let recs: Vec<AisRecord> = (0..10)
            .map(|k| quick_record(ts_of("2019-03-05") + k * 60, Some(30)))
            .collect();
        let part = partition_records(&recs, &windows, &table, &CategoryKey::EVERY).unwrap();
        let count = |key: CategoryKey| part.streams[&(key, "pre".to_string())].len();
        assert_eq!(count(CategoryKey::Cat(VesselCategory::Fishing)), 10);
        assert_eq!(count(CategoryKey::All), 10);
        let sum: usize = VesselCategory::ALL
            .iter()
            .map(|&c| count(CategoryKey::Cat(c)))
            .sum();
        assert_eq!(sum, count(CategoryKey::All));
    }

    #[test]
    fn overlapping_windows_are_fatal() {
        let d = |s: &str| NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap();
        let windows = vec![
            TimeWindow::new("a", d("2020-01-01"), d("2020-06-30")),
            TimeWindow::new("b", d("2020-06-30"), d("2020-12-31")),
        ];
        assert!(matches!(
            validate_windows(&windows),
            Err(Error::Config(_))
        ));
    }

    proptest! {
        #[test]
        fn serialization_round_trips_bit_exactly(
            vessel_id in 1u64..1_000_000,
            ts in 0i64..2_000_000_000,
            lat in -90.0f64..=90.0,
            lon in -180.0f64..=180.0,
            sog in proptest::option::of(0.0f64..60.0),
            cog in proptest::option::of(0.0f64..359.99),
            nav_status in proptest::option::of(0u8..16),
            ship_type in proptest::option::of(0u16..100),
        ) {
            let rec = AisRecord { vessel_id, ts, lat, lon, sog, cog, nav_status, ship_type };
            let mut buf = Vec::new();
            write_records_csv(&mut buf, &[rec]).unwrap();
            let out = parse_ais_csv(buf.as_slice(), &SchemaConfig::default(), 0).unwrap();
            prop_assert!(out.rejections.is_empty(), "{:?}", out.rejections);
            prop_assert_eq!(out.records.len(), 1);
            prop_assert_eq!(out.records[0].record, rec);
        }
    }
}
