//! The long index: one row per (program, year, aggregate class, domain) with a
//! distinct-person volume, plus the join of service rows onto their
//! surveillance counterparts.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::Bound;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IndexError {
    #[error("duplicate key: program {program}, year {year}, class {class}, domain {key}")]
    DuplicateKey {
        program: String,
        year: i32,
        class: AggregateClass,
        key: DomainKey,
    },
    #[error("class {class} expects {expected} domain slot(s) but domain {key} uses {found}")]
    ArityMismatch {
        class: AggregateClass,
        key: DomainKey,
        expected: usize,
        found: usize,
    },
    #[error("year {year} outside the valid range {range}")]
    YearOutOfRange { year: i32, range: YearRange },
    #[error("empty {0} label")]
    EmptyLabel(&'static str),
    #[error("unknown aggregate class {0:?}")]
    UnknownClass(String),
    #[error("unknown record kind {0:?}")]
    UnknownKind(String),
    #[error("program {program} reported as both surveillance and service")]
    KindConflict { program: String },
    #[error("unknown program {0}")]
    UnknownProgram(String),
    #[error("program {program} is not a {expected} program")]
    WrongKind { program: String, expected: RecordKind },
}

/// The six demographic cell types of the index.
///
/// Declaration order matches the lexical order of the class names, so the
/// derived `Ord` sorts classes the same way their names sort.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AggregateClass {
    #[serde(rename = "Age")]
    Age,
    #[serde(rename = "Age_Death")]
    AgeDeath,
    #[serde(rename = "Place_Race")]
    PlaceRace,
    #[serde(rename = "Race")]
    Race,
    #[serde(rename = "Race_Age")]
    RaceAge,
    #[serde(rename = "Race_Death")]
    RaceDeath,
}

/// Which vocabulary a domain label is drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelScope {
    Age,
    Race,
    Place,
}

impl AggregateClass {
    pub const ALL: [AggregateClass; 6] = [
        AggregateClass::Age,
        AggregateClass::AgeDeath,
        AggregateClass::PlaceRace,
        AggregateClass::Race,
        AggregateClass::RaceAge,
        AggregateClass::RaceDeath,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AggregateClass::Age => "Age",
            AggregateClass::AgeDeath => "Age_Death",
            AggregateClass::PlaceRace => "Place_Race",
            AggregateClass::Race => "Race",
            AggregateClass::RaceAge => "Race_Age",
            AggregateClass::RaceDeath => "Race_Death",
        }
    }

    /// Number of domain slots the class uses.
    pub fn arity(self) -> usize {
        self.slot_scopes().len()
    }

    /// Label vocabulary of each domain slot, in slot order.
    pub fn slot_scopes(self) -> &'static [LabelScope] {
        match self {
            AggregateClass::Age | AggregateClass::AgeDeath => &[LabelScope::Age],
            AggregateClass::Race | AggregateClass::RaceDeath => &[LabelScope::Race],
            AggregateClass::PlaceRace => &[LabelScope::Place, LabelScope::Race],
            AggregateClass::RaceAge => &[LabelScope::Race, LabelScope::Age],
        }
    }

    /// Death classes count deaths occurring in the year rather than persons living.
    pub fn is_death(self) -> bool {
        matches!(self, AggregateClass::AgeDeath | AggregateClass::RaceDeath)
    }
}

impl fmt::Display for AggregateClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AggregateClass {
    type Err = IndexError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let wanted = s.trim();
        AggregateClass::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(wanted))
            .ok_or_else(|| IndexError::UnknownClass(s.to_string()))
    }
}

impl fmt::Display for LabelScope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LabelScope::Age => "age",
            LabelScope::Race => "race",
            LabelScope::Place => "place",
        })
    }
}

impl FromStr for LabelScope {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "age" => Ok(LabelScope::Age),
            "race" => Ok(LabelScope::Race),
            "place" => Ok(LabelScope::Place),
            other => Err(format!("unknown label scope {other:?}")),
        }
    }
}

/// Domain labels of one aggregate cell. `b` is present only for two-slot classes.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DomainKey {
    a: String,
    b: Option<String>,
}

impl DomainKey {
    pub fn single(a: impl Into<String>) -> Self {
        DomainKey {
            a: a.into(),
            b: None,
        }
    }

    pub fn pair(a: impl Into<String>, b: impl Into<String>) -> Self {
        DomainKey {
            a: a.into(),
            b: Some(b.into()),
        }
    }

    pub fn new(a: impl Into<String>, b: Option<String>) -> Self {
        DomainKey { a: a.into(), b }
    }

    pub fn domain_a(&self) -> &str {
        &self.a
    }

    pub fn domain_b(&self) -> Option<&str> {
        self.b.as_deref()
    }

    pub fn slots(&self) -> usize {
        1 + usize::from(self.b.is_some())
    }

    /// Item-response label, e.g. `Maryland Black` or `65+`.
    pub fn label(&self) -> String {
        match &self.b {
            Some(b) => format!("{} {}", self.a, b),
            None => self.a.clone(),
        }
    }

    fn min() -> Self {
        DomainKey {
            a: String::new(),
            b: None,
        }
    }
}

impl fmt::Display for DomainKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.b {
            Some(b) => write!(f, "{}_{}", self.a, b),
            None => f.write_str(&self.a),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordKind {
    Surveillance,
    Service,
}

impl fmt::Display for RecordKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RecordKind::Surveillance => "surveillance",
            RecordKind::Service => "service",
        })
    }
}

impl FromStr for RecordKind {
    type Err = IndexError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "surveillance" => Ok(RecordKind::Surveillance),
            "service" | "services" => Ok(RecordKind::Service),
            _ => Err(IndexError::UnknownKind(s.to_string())),
        }
    }
}

/// Inclusive range of calendar years accepted into an index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct YearRange {
    pub first: i32,
    pub last: i32,
}

impl YearRange {
    pub fn new(first: i32, last: i32) -> Self {
        YearRange { first, last }
    }

    pub fn contains(&self, year: i32) -> bool {
        (self.first..=self.last).contains(&year)
    }

    pub fn years(&self) -> impl Iterator<Item = i32> {
        self.first..=self.last
    }
}

impl Default for YearRange {
    /// Union of the collection ranges of all source programs.
    fn default() -> Self {
        YearRange::new(1999, 2019)
    }
}

impl fmt::Display for YearRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.first, self.last)
    }
}

/// One row of the long index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AggregateRecord {
    pub origin: String,
    pub program: String,
    pub kind: RecordKind,
    pub year: i32,
    pub class: AggregateClass,
    pub key: DomainKey,
    pub volume: u64,
}

impl AggregateRecord {
    pub fn validate(&self, years: &YearRange) -> Result<(), IndexError> {
        if self.origin.trim().is_empty() {
            return Err(IndexError::EmptyLabel("origin"));
        }
        if self.program.trim().is_empty() {
            return Err(IndexError::EmptyLabel("program"));
        }
        if self.key.a.trim().is_empty() || self.key.b.as_deref().is_some_and(|b| b.trim().is_empty())
        {
            return Err(IndexError::EmptyLabel("domain"));
        }
        if self.key.slots() != self.class.arity() {
            return Err(IndexError::ArityMismatch {
                class: self.class,
                key: self.key.clone(),
                expected: self.class.arity(),
                found: self.key.slots(),
            });
        }
        if !years.contains(self.year) {
            return Err(IndexError::YearOutOfRange {
                year: self.year,
                range: *years,
            });
        }
        Ok(())
    }

    pub fn index_key(&self) -> IndexKey {
        IndexKey {
            program: self.program.clone(),
            year: self.year,
            class: self.class,
            key: self.key.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct IndexKey {
    pub program: String,
    pub year: i32,
    pub class: AggregateClass,
    pub key: DomainKey,
}

/// Immutable, ordered collection of aggregate records keyed by
/// (program, year, class, domain).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Index {
    records: BTreeMap<IndexKey, AggregateRecord>,
    kinds: BTreeMap<String, RecordKind>,
}

impl Index {
    pub fn build(records: impl IntoIterator<Item = AggregateRecord>) -> Result<Index, IndexError> {
        Index::build_with(records, &YearRange::default())
    }

    pub fn build_with(
        records: impl IntoIterator<Item = AggregateRecord>,
        years: &YearRange,
    ) -> Result<Index, IndexError> {
        let mut index = Index::default();
        for record in records {
            record.validate(years)?;
            match index.kinds.get(&record.program) {
                Some(kind) if *kind != record.kind => {
                    return Err(IndexError::KindConflict {
                        program: record.program,
                    })
                }
                Some(_) => {}
                None => {
                    index.kinds.insert(record.program.clone(), record.kind);
                }
            }
            let key = record.index_key();
            if index.records.contains_key(&key) {
                return Err(IndexError::DuplicateKey {
                    program: key.program,
                    year: key.year,
                    class: key.class,
                    key: key.key,
                });
            }
            index.records.insert(key, record);
        }
        Ok(index)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Records in key order.
    pub fn records(&self) -> impl Iterator<Item = &AggregateRecord> {
        self.records.values()
    }

    pub fn get(
        &self,
        program: &str,
        year: i32,
        class: AggregateClass,
        key: &DomainKey,
    ) -> Option<&AggregateRecord> {
        self.records.get(&IndexKey {
            program: program.to_string(),
            year,
            class,
            key: key.clone(),
        })
    }

    /// Distinct (class, domain) aggregate kinds across all programs and years.
    pub fn aggregate_kinds(&self) -> BTreeSet<(AggregateClass, &DomainKey)> {
        self.records.keys().map(|k| (k.class, &k.key)).collect()
    }

    pub fn programs(&self) -> impl Iterator<Item = (&str, RecordKind)> {
        self.kinds.iter().map(|(p, k)| (p.as_str(), *k))
    }

    pub fn program_kind(&self, program: &str) -> Option<RecordKind> {
        self.kinds.get(program).copied()
    }

    pub fn year_span(&self) -> Option<(i32, i32)> {
        let mut years = self.records.keys().map(|k| k.year);
        let first = years.next()?;
        Some(years.fold((first, first), |(lo, hi), y| (lo.min(y), hi.max(y))))
    }

    /// All records of one program, ordered by (year, class, domain).
    pub fn program_records<'a>(
        &'a self,
        program: &'a str,
    ) -> impl Iterator<Item = &'a AggregateRecord> + 'a {
        let start = IndexKey {
            program: program.to_string(),
            year: i32::MIN,
            class: AggregateClass::Age,
            key: DomainKey::min(),
        };
        self.records
            .range((Bound::Included(start), Bound::Unbounded))
            .take_while(move |(k, _)| k.program == program)
            .map(|(_, r)| r)
    }

    /// Records of one (program, year, class) scope, ordered by domain.
    pub fn scope<'a>(
        &'a self,
        program: &'a str,
        year: i32,
        class: AggregateClass,
    ) -> impl Iterator<Item = &'a AggregateRecord> + 'a {
        let start = IndexKey {
            program: program.to_string(),
            year,
            class,
            key: DomainKey::min(),
        };
        self.records
            .range((Bound::Included(start), Bound::Unbounded))
            .take_while(move |(k, _)| k.program == program && k.year == year && k.class == class)
            .map(|(_, r)| r)
    }

    /// Distinct (year, class) scopes present for a program.
    pub fn program_scopes(&self, program: &str) -> BTreeSet<(i32, AggregateClass)> {
        self.program_records(program)
            .map(|r| (r.year, r.class))
            .collect()
    }

    fn require(&self, program: &str, expected: RecordKind) -> Result<(), IndexError> {
        match self.program_kind(program) {
            None => Err(IndexError::UnknownProgram(program.to_string())),
            Some(kind) if kind != expected => Err(IndexError::WrongKind {
                program: program.to_string(),
                expected,
            }),
            Some(_) => Ok(()),
        }
    }
}

/// A service aggregate paired with the surveillance aggregate of the same
/// (year, class, domain).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JoinedRecord {
    pub origin: String,
    pub program: String,
    pub year: i32,
    pub class: AggregateClass,
    pub key: DomainKey,
    pub service_volume: u64,
    pub surveillance_volume: u64,
}

/// Service aggregates that had no surveillance counterpart.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct UnmatchedReport {
    pub records: Vec<IndexKey>,
    pub per_scope: BTreeMap<(i32, AggregateClass), usize>,
}

impl UnmatchedReport {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Join {
    pub joined: Vec<JoinedRecord>,
    pub unmatched: UnmatchedReport,
}

/// Pairs every aggregate of `program` with the `surveillance_program`
/// aggregate for the same year, class and domain. Aggregates without a
/// counterpart are listed in the unmatched report.
pub fn join_to_surveillance(
    index: &Index,
    program: &str,
    surveillance_program: &str,
) -> Result<Join, IndexError> {
    index.require(program, RecordKind::Service)?;
    index.require(surveillance_program, RecordKind::Surveillance)?;

    let mut join = Join::default();
    for record in index.program_records(program) {
        match index.get(surveillance_program, record.year, record.class, &record.key) {
            Some(surv) => join.joined.push(JoinedRecord {
                origin: record.origin.clone(),
                program: record.program.clone(),
                year: record.year,
                class: record.class,
                key: record.key.clone(),
                service_volume: record.volume,
                surveillance_volume: surv.volume,
            }),
            None => {
                *join
                    .unmatched
                    .per_scope
                    .entry((record.year, record.class))
                    .or_default() += 1;
                join.unmatched.records.push(record.index_key());
            }
        }
    }
    Ok(join)
}

/// Joins several service programs and concatenates the results in the
/// order given.
pub fn join_many(
    index: &Index,
    programs: &[String],
    surveillance_program: &str,
) -> Result<Join, IndexError> {
    let mut all = Join::default();
    for program in programs {
        let join = join_to_surveillance(index, program, surveillance_program)?;
        all.joined.extend(join.joined);
        all.unmatched.records.extend(join.unmatched.records);
        for (scope, n) in join.unmatched.per_scope {
            *all.unmatched.per_scope.entry(scope).or_default() += n;
        }
    }
    Ok(all)
}
