//! Reading and writing long-format aggregate tables.
//!
//! Input files are UTF-8, comma-delimited, with the header
//! `origin,program,kind,year,class,domain_a,domain_b,volume`. Rows that fail
//! validation are quarantined in a [`ParseReport`]; only a bad header rejects
//! the whole file.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::index::{
    AggregateClass, AggregateRecord, DomainKey, Index, LabelScope, RecordKind, YearRange,
};

pub const TABLE_HEADER: [&str; 8] = [
    "origin", "program", "kind", "year", "class", "domain_a", "domain_b", "volume",
];

pub const SYNONYM_HEADER: [&str; 3] = ["variant", "canonical", "scope"];

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("bad header: expected {expected:?}, found {found:?}")]
    BadHeader {
        expected: Vec<String>,
        found: Vec<String>,
    },
    #[error("empty input: no header line")]
    MissingHeader,
    #[error("age {0} outside 0..=120")]
    AgeOutOfRange(i32),
    #[error("synonym {variant:?} ({scope}) maps to both {first:?} and {second:?}")]
    SynonymConflict {
        scope: LabelScope,
        variant: String,
        first: String,
        second: String,
    },
    #[error("synonym table line {line}: {reason}")]
    BadSynonymRow { line: u64, reason: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn fold(label: &str) -> String {
    collapse_whitespace(label).to_lowercase()
}

fn collapse_whitespace(label: &str) -> String {
    label.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn normalize_age_label(label: &str) -> String {
    let mut s = collapse_whitespace(label);
    for dash in ['_', '\u{2013}', '\u{2014}'] {
        s = s.replace(dash, "-");
    }
    s = s.replace(" to ", "-");
    s.retain(|c| !c.is_whitespace());
    s
}

fn title_case(label: &str) -> String {
    collapse_whitespace(label)
        .split(' ')
        .map(|word| {
            let mut chars = word.chars();
            match chars.next() {
                Some(first) => first.to_uppercase().chain(chars.flat_map(char::to_lowercase)).collect(),
                None => String::new(),
            }
        })
        .collect::<Vec<String>>()
        .join(" ")
}

/// Harmonization table from label variants to canonical labels, scoped by
/// label vocabulary. Lookups are case- and whitespace-insensitive.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SynonymMap {
    entries: BTreeMap<(LabelScope, String), String>,
}

const DEFAULT_RACES: &[(&str, &[&str])] = &[
    ("White", &["Caucasian", "White, not Hispanic"]),
    (
        "Black",
        &["Black/African American", "African American", "Black or African American"],
    ),
    ("Hispanic", &["Hispanic/Latino", "Hispanic or Latino", "Latino", "Latinx"]),
    ("Asian", &[]),
    (
        "AIAN",
        &[
            "American Indian/Alaska Native",
            "American Indian or Alaska Native",
            "Native American",
        ],
    ),
    (
        "NHPI",
        &["Native Hawaiian/Other Pacific Islander", "Native Hawaiian or Other Pacific Islander"],
    ),
    ("Multiple Races", &["Multiracial", "Multiple", "Two or more races"]),
];

const STATES: &[(&str, &str)] = &[
    ("AL", "Alabama"), ("AK", "Alaska"), ("AZ", "Arizona"), ("AR", "Arkansas"),
    ("CA", "California"), ("CO", "Colorado"), ("CT", "Connecticut"), ("DE", "Delaware"),
    ("DC", "District of Columbia"), ("FL", "Florida"), ("GA", "Georgia"), ("HI", "Hawaii"),
    ("ID", "Idaho"), ("IL", "Illinois"), ("IN", "Indiana"), ("IA", "Iowa"),
    ("KS", "Kansas"), ("KY", "Kentucky"), ("LA", "Louisiana"), ("ME", "Maine"),
    ("MD", "Maryland"), ("MA", "Massachusetts"), ("MI", "Michigan"), ("MN", "Minnesota"),
    ("MS", "Mississippi"), ("MO", "Missouri"), ("MT", "Montana"), ("NE", "Nebraska"),
    ("NV", "Nevada"), ("NH", "New Hampshire"), ("NJ", "New Jersey"), ("NM", "New Mexico"),
    ("NY", "New York"), ("NC", "North Carolina"), ("ND", "North Dakota"), ("OH", "Ohio"),
    ("OK", "Oklahoma"), ("OR", "Oregon"), ("PA", "Pennsylvania"), ("PR", "Puerto Rico"),
    ("RI", "Rhode Island"), ("SC", "South Carolina"), ("SD", "South Dakota"), ("TN", "Tennessee"),
    ("TX", "Texas"), ("UT", "Utah"), ("VT", "Vermont"), ("VA", "Virginia"),
    ("WA", "Washington"), ("WV", "West Virginia"), ("WI", "Wisconsin"), ("WY", "Wyoming"),
];

impl SynonymMap {
    /// An empty map: labels are only whitespace- and case-normalized.
    pub fn new() -> Self {
        SynonymMap::default()
    }

    /// Race labels seen in published surveillance tables plus US state
    /// postal codes and the top-coded age group.
    pub fn with_defaults() -> Self {
        let mut map = SynonymMap::new();
        for (canonical, variants) in DEFAULT_RACES {
            map.insert(LabelScope::Race, canonical, canonical)
                .expect("default race table is consistent");
            for v in *variants {
                map.insert(LabelScope::Race, v, canonical)
                    .expect("default race table is consistent");
            }
        }
        for (code, name) in STATES {
            map.insert(LabelScope::Place, code, name)
                .expect("default place table is consistent");
        }
        for v in ["65 and older", "65 and over", "65 or older", "65+ years"] {
            map.insert(LabelScope::Age, v, "65+")
                .expect("default age table is consistent");
        }
        map
    }

    /// Registers `variant` as an alias of `canonical`. The canonical label is
    /// registered as mapping to itself.
    pub fn insert(&mut self, scope: LabelScope, variant: &str, canonical: &str) -> Result<(), IngestError> {
        let canonical = collapse_whitespace(canonical);
        for label in [canonical.as_str(), variant] {
            let folded = fold(label);
            match self.entries.get(&(scope, folded.clone())) {
                Some(existing) if *existing != canonical => {
                    return Err(IngestError::SynonymConflict {
                        scope,
                        variant: collapse_whitespace(label),
                        first: existing.clone(),
                        second: canonical.clone(),
                    })
                }
                Some(_) => {}
                None => {
                    self.entries.insert((scope, folded), canonical.clone());
                }
            }
        }
        Ok(())
    }

    /// Reads a `variant,canonical,scope` table and adds it to this map.
    pub fn extend_from_reader<R: Read>(&mut self, source: R) -> Result<(), IngestError> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .from_reader(source);
        let mut rows = reader.records();
        let header = rows.next().ok_or(IngestError::MissingHeader)??;
        check_header(&header, &SYNONYM_HEADER)?;
        for row in rows {
            let row = row?;
            let line = row.position().map_or(0, |p| p.line());
            if row.len() != 3 {
                return Err(IngestError::BadSynonymRow {
                    line,
                    reason: format!("expected 3 fields, found {}", row.len()),
                });
            }
            let scope: LabelScope = row[2]
                .parse()
                .map_err(|reason| IngestError::BadSynonymRow { line, reason })?;
            if row[0].trim().is_empty() || row[1].trim().is_empty() {
                return Err(IngestError::BadSynonymRow {
                    line,
                    reason: "empty label".into(),
                });
            }
            self.insert(scope, &row[0], &row[1])?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Canonical form of a raw label. Mapped labels take the map's spelling;
    /// unmapped age labels get normalized separators and other unmapped labels
    /// are title-cased. Idempotent.
    pub fn canonicalize(&self, scope: LabelScope, raw: &str) -> String {
        let candidate = match scope {
            LabelScope::Age => normalize_age_label(raw),
            _ => collapse_whitespace(raw),
        };
        if let Some(canonical) = self.entries.get(&(scope, fold(&candidate))) {
            return canonical.clone();
        }
        match scope {
            LabelScope::Age => candidate,
            _ => title_case(&candidate),
        }
    }

    pub fn canonical_key(&self, class: AggregateClass, a: &str, b: Option<&str>) -> DomainKey {
        let scopes = class.slot_scopes();
        let a = self.canonicalize(scopes[0], a);
        let b = b.map(|b| self.canonicalize(*scopes.get(1).unwrap_or(&scopes[0]), b));
        DomainKey::new(a, b)
    }
}

/// Why a data row was quarantined.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum RejectReason {
    FieldCount(usize),
    Malformed(String),
    EmptyField(&'static str),
    BadKind(String),
    BadYear(String),
    YearOutOfRange(i32),
    UnknownClass(String),
    MissingDomainB,
    UnexpectedDomainB,
    NegativeVolume(String),
    BadVolume(String),
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RejectReason::FieldCount(n) => write!(f, "expected 8 fields, found {n}"),
            RejectReason::Malformed(e) => write!(f, "malformed row: {e}"),
            RejectReason::EmptyField(name) => write!(f, "empty {name}"),
            RejectReason::BadKind(k) => write!(f, "unknown kind {k:?}"),
            RejectReason::BadYear(y) => write!(f, "unparseable year {y:?}"),
            RejectReason::YearOutOfRange(y) => write!(f, "year {y} outside the valid range"),
            RejectReason::UnknownClass(c) => write!(f, "unknown aggregate class {c:?}"),
            RejectReason::MissingDomainB => f.write_str("two-slot class with empty domain_b"),
            RejectReason::UnexpectedDomainB => f.write_str("one-slot class with non-empty domain_b"),
            RejectReason::NegativeVolume(v) => write!(f, "negative volume {v:?}"),
            RejectReason::BadVolume(v) => write!(f, "unparseable volume {v:?}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RejectedRow {
    /// 1-based line number in the source.
    pub line: u64,
    pub reason: RejectReason,
    pub raw: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ParseReport {
    pub data_rows: usize,
    pub accepted: usize,
    pub rejected: Vec<RejectedRow>,
}

impl ParseReport {
    pub fn is_clean(&self) -> bool {
        self.rejected.is_empty()
    }
}

#[derive(Debug, Clone, Default)]
pub struct ParsedTable {
    pub records: Vec<AggregateRecord>,
    pub report: ParseReport,
}

#[derive(Debug, Clone, Default)]
pub struct ParseOptions {
    pub synonyms: SynonymMap,
    pub years: YearRange,
}

fn check_header(found: &csv::StringRecord, expected: &[&str]) -> Result<(), IngestError> {
    let fields: Vec<String> = found
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let f = if i == 0 { f.trim_start_matches('\u{feff}') } else { f };
            f.to_string()
        })
        .collect();
    if fields.iter().map(String::as_str).eq(expected.iter().copied()) {
        Ok(())
    } else {
        Err(IngestError::BadHeader {
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: fields,
        })
    }
}

fn parse_volume(raw: &str) -> Result<u64, RejectReason> {
    let cleaned: String = raw
        .trim()
        .chars()
        .filter(|c| !matches!(c, ',' | '_' | ' '))
        .collect();
    if cleaned.is_empty() {
        return Err(RejectReason::EmptyField("volume"));
    }
    if cleaned.starts_with('-') {
        return Err(RejectReason::NegativeVolume(raw.to_string()));
    }
    cleaned
        .parse::<u64>()
        .map_err(|_| RejectReason::BadVolume(raw.to_string()))
}

fn parse_row(row: &csv::StringRecord, options: &ParseOptions) -> Result<AggregateRecord, RejectReason> {
    if row.len() != TABLE_HEADER.len() {
        return Err(RejectReason::FieldCount(row.len()));
    }
    let field = |i: usize| row[i].trim();
    for (i, name) in [(0, "origin"), (1, "program"), (5, "domain_a")] {
        if field(i).is_empty() {
            return Err(RejectReason::EmptyField(name));
        }
    }
    let kind: RecordKind = field(2)
        .parse()
        .map_err(|_| RejectReason::BadKind(field(2).to_string()))?;
    let year: i32 = field(3)
        .parse()
        .map_err(|_| RejectReason::BadYear(field(3).to_string()))?;
    if !options.years.contains(year) {
        return Err(RejectReason::YearOutOfRange(year));
    }
    let class: AggregateClass = field(4)
        .parse()
        .map_err(|_| RejectReason::UnknownClass(field(4).to_string()))?;
    let domain_b = match (class.arity(), field(6)) {
        (2, "") => return Err(RejectReason::MissingDomainB),
        (1, b) if !b.is_empty() => return Err(RejectReason::UnexpectedDomainB),
        (1, _) => None,
        (_, b) => Some(b),
    };
    let volume = parse_volume(&row[7])?;
    Ok(AggregateRecord {
        origin: field(0).to_string(),
        program: field(1).to_string(),
        kind,
        year,
        class,
        key: options.synonyms.canonical_key(class, field(5), domain_b),
        volume,
    })
}

/// Parses a long-format aggregate table. Every data row is either accepted
/// or listed in the report with its line number.
pub fn parse_table<R: Read>(source: R, options: &ParseOptions) -> Result<ParsedTable, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(source);
    let mut rows = reader.records();
    let header = rows.next().ok_or(IngestError::MissingHeader)??;
    check_header(&header, &TABLE_HEADER)?;

    let mut table = ParsedTable::default();
    for row in rows {
        table.report.data_rows += 1;
        let row = match row {
            Ok(row) => row,
            Err(err) => {
                table.report.rejected.push(RejectedRow {
                    line: err.position().map_or(0, |p| p.line()),
                    reason: RejectReason::Malformed(err.to_string()),
                    raw: String::new(),
                });
                continue;
            }
        };
        match parse_row(&row, options) {
            Ok(record) => table.records.push(record),
            Err(reason) => table.report.rejected.push(RejectedRow {
                line: row.position().map_or(0, |p| p.line()),
                reason,
                raw: row.iter().collect::<Vec<_>>().join(","),
            }),
        }
    }
    table.report.accepted = table.records.len();
    Ok(table)
}

/// Writes every record of the index, in key order, in the schema
/// [`parse_table`] reads.
pub fn serialize_index<W: Write>(index: &Index, sink: W) -> Result<(), IngestError> {
    serialize_records(index.records(), sink)
}

pub fn serialize_records<'a, W: Write>(
    records: impl IntoIterator<Item = &'a AggregateRecord>,
    sink: W,
) -> Result<(), IngestError> {
    let mut writer = csv::Writer::from_writer(sink);
    writer.write_record(TABLE_HEADER)?;
    for r in records {
        let year = r.year.to_string();
        let volume = r.volume.to_string();
        writer.write_record([
            r.origin.as_str(),
            r.program.as_str(),
            &r.kind.to_string(),
            &year,
            r.class.name(),
            r.key.domain_a(),
            r.key.domain_b().unwrap_or(""),
            &volume,
        ])?;
    }
    writer.flush()?;
    Ok(())
}

pub fn serialize_index_to_vec(index: &Index) -> Vec<u8> {
    let mut out = Vec::new();
    serialize_index(index, &mut out).expect("writing to a Vec cannot fail");
    out
}

/// Age grouping: five-year bins with a top-coded `65+`, or five-year bins
/// all the way up.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgeBinning {
    #[default]
    TopCoded,
    Disaggregated,
}

pub const MAX_AGE: i32 = 120;

impl AgeBinning {
    pub fn bin_index(self, age: i32) -> Result<usize, IngestError> {
        if !(0..=MAX_AGE).contains(&age) {
            return Err(IngestError::AgeOutOfRange(age));
        }
        let bin = (age / 5) as usize;
        Ok(match self {
            AgeBinning::TopCoded => bin.min(13),
            AgeBinning::Disaggregated => bin,
        })
    }

    pub fn bin_count(self) -> usize {
        match self {
            AgeBinning::TopCoded => 14,
            AgeBinning::Disaggregated => (MAX_AGE / 5) as usize + 1,
        }
    }

    pub fn label(self, bin: usize) -> String {
        match self {
            AgeBinning::TopCoded if bin >= 13 => "65+".to_string(),
            _ => format!("{}-{}", bin * 5, bin * 5 + 4),
        }
    }
}

/// Five-year age group label with `65+` top-coding.
pub fn age_bin(age_years: i32) -> Result<String, IngestError> {
    age_bin_with(age_years, AgeBinning::TopCoded)
}

pub fn age_bin_with(age_years: i32, binning: AgeBinning) -> Result<String, IngestError> {
    Ok(binning.label(binning.bin_index(age_years)?))
}
