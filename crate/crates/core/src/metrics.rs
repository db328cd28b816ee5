//! Domain share, surveillance share and surveillance remainder.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::index::{AggregateClass, DomainKey, Index, JoinedRecord};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MetricsError {
    #[error("no records in scope {program}/{year}/{class}")]
    EmptyScope {
        program: String,
        year: i32,
        class: AggregateClass,
    },
    #[error("zero total volume in scope {program}/{year}/{class}")]
    ZeroTotal {
        program: String,
        year: i32,
        class: AggregateClass,
    },
}

/// Each domain's fraction of the total volume of one (program, year, class).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DomainShareTable {
    pub program: String,
    pub year: i32,
    pub class: AggregateClass,
    pub total: u64,
    pub entries: BTreeMap<DomainKey, f64>,
}

impl DomainShareTable {
    pub fn share(&self, key: &DomainKey) -> Option<f64> {
        self.entries.get(key).copied()
    }
}

pub fn domain_share(
    index: &Index,
    program: &str,
    year: i32,
    class: AggregateClass,
) -> Result<DomainShareTable, MetricsError> {
    let cells: Vec<(&DomainKey, u64)> = index
        .scope(program, year, class)
        .map(|r| (&r.key, r.volume))
        .collect();
    if cells.is_empty() {
        return Err(MetricsError::EmptyScope {
            program: program.to_string(),
            year,
            class,
        });
    }
    let total: u64 = cells.iter().map(|(_, v)| v).sum();
    if total == 0 {
        return Err(MetricsError::ZeroTotal {
            program: program.to_string(),
            year,
            class,
        });
    }
    let entries = cells
        .into_iter()
        .map(|(k, v)| (k.clone(), v as f64 / total as f64))
        .collect();
    Ok(DomainShareTable {
        program: program.to_string(),
        year,
        class,
        total,
        entries,
    })
}

/// Every non-empty, non-zero scope of a program, in (year, class) order.
pub fn program_domain_shares(index: &Index, program: &str) -> Vec<DomainShareTable> {
    index
        .program_scopes(program)
        .into_iter()
        .filter_map(|(year, class)| domain_share(index, program, year, class).ok())
        .collect()
}

/// Sign of the surveillance remainder.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RemainderConvention {
    /// service − surveillance: positive means services know more persons.
    #[default]
    ServiceMinusSurveillance,
    /// surveillance − service.
    SurveillanceMinusService,
}

/// Service volume as a multiple of surveillance volume.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum SurveillanceShare {
    Finite(f64),
    /// Surveillance volume is zero while service volume is positive.
    Unbounded,
}

impl SurveillanceShare {
    pub fn as_f64(self) -> f64 {
        match self {
            SurveillanceShare::Finite(v) => v,
            SurveillanceShare::Unbounded => f64::INFINITY,
        }
    }

    pub fn is_unbounded(self) -> bool {
        matches!(self, SurveillanceShare::Unbounded)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivedMeasures {
    pub surveillance_share: SurveillanceShare,
    pub surveillance_remainder: i64,
}

pub fn derived_measures(joined: &JoinedRecord) -> DerivedMeasures {
    derived_measures_with(joined, RemainderConvention::default())
}

pub fn derived_measures_with(joined: &JoinedRecord, convention: RemainderConvention) -> DerivedMeasures {
    let service = joined.service_volume;
    let surveillance = joined.surveillance_volume;
    let surveillance_share = match (service, surveillance) {
        (0, 0) => SurveillanceShare::Finite(1.0),
        (_, 0) => SurveillanceShare::Unbounded,
        (s, v) => SurveillanceShare::Finite(s as f64 / v as f64),
    };
    let diff = service as i64 - surveillance as i64;
    let surveillance_remainder = match convention {
        RemainderConvention::ServiceMinusSurveillance => diff,
        RemainderConvention::SurveillanceMinusService => -diff,
    };
    DerivedMeasures {
        surveillance_share,
        surveillance_remainder,
    }
}
