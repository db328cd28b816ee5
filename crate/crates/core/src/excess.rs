//! Cells where a service program reports more persons than surveillance.
//!
//! [`excess_report`] summarizes each (program, class) the way a national
//! excess table does; [`excess_timeline`] counts exceeding cells per year and
//! smooths the counts.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::distribution::{lowess, LowessConfig, LowessError};
use crate::index::{join_to_surveillance, AggregateClass, Index, IndexError, JoinedRecord};

/// When a service volume counts as exceeding its surveillance volume.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieRule {
    /// service > surveillance
    #[default]
    Strict,
    /// service ≥ surveillance
    Inclusive,
}

impl TieRule {
    pub fn exceeds(self, service: u64, surveillance: u64) -> bool {
        match self {
            TieRule::Strict => service > surveillance,
            TieRule::Inclusive => service >= surveillance,
        }
    }
}

/// Percentage `100 · num / den` rounded half-up to two decimals, as text.
/// Zero denominators give `0.00`.
pub fn percent_display(num: u64, den: u64) -> String {
    if den == 0 {
        return "0.00".to_string();
    }
    let (num, den) = (num as u128, den as u128);
    let hundredths = (2 * num * 10_000 + den) / (2 * den);
    format!("{}.{:02}", hundredths / 100, hundredths % 100)
}

fn percent(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        100.0 * num as f64 / den as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExcessReportRow {
    pub program: String,
    pub class: AggregateClass,
    /// Joined aggregates in scope.
    pub aggregates: u64,
    /// Aggregates whose service volume exceeds surveillance.
    pub exceeding: u64,
    /// Sum of the full service volumes of exceeding aggregates.
    pub excess_candidates: u64,
    /// Sum of service volumes over all joined aggregates.
    pub case_volume: u64,
    /// Sum of (service − surveillance) over exceeding aggregates.
    pub overage: u64,
    /// `100 · exceeding / aggregates`
    pub excess_share: f64,
    /// `100 · excess_candidates / case_volume`
    pub volume_share: f64,
}

impl ExcessReportRow {
    pub fn from_counts(
        program: impl Into<String>,
        class: AggregateClass,
        aggregates: u64,
        exceeding: u64,
        excess_candidates: u64,
        case_volume: u64,
        overage: u64,
    ) -> Self {
        ExcessReportRow {
            program: program.into(),
            class,
            aggregates,
            exceeding,
            excess_candidates,
            case_volume,
            overage,
            excess_share: percent(exceeding, aggregates),
            volume_share: percent(excess_candidates, case_volume),
        }
    }

    pub fn excess_share_display(&self) -> String {
        percent_display(self.exceeding, self.aggregates)
    }

    pub fn volume_share_display(&self) -> String {
        percent_display(self.excess_candidates, self.case_volume)
    }

    /// Exact comparison of volume shares by cross-multiplication.
    fn cmp_volume_share(&self, other: &Self) -> Ordering {
        let frac = |r: &Self| {
            if r.case_volume == 0 {
                (0u128, 1u128)
            } else {
                (r.excess_candidates as u128, r.case_volume as u128)
            }
        };
        let (an, ad) = frac(self);
        let (bn, bd) = frac(other);
        (an * bd).cmp(&(bn * ad))
    }
}

#[derive(Default)]
struct Tally {
    aggregates: u64,
    exceeding: u64,
    excess_candidates: u64,
    case_volume: u64,
    overage: u64,
}

/// Summarizes joined records per (program, class), sorted by volume share
/// descending, then program and class ascending.
pub fn excess_report_from_joined(joined: &[JoinedRecord], tie: TieRule) -> Vec<ExcessReportRow> {
    let mut tallies: BTreeMap<(&str, AggregateClass), Tally> = BTreeMap::new();
    for r in joined {
        let t = tallies.entry((r.program.as_str(), r.class)).or_default();
        t.aggregates += 1;
        t.case_volume += r.service_volume;
        if tie.exceeds(r.service_volume, r.surveillance_volume) {
            t.exceeding += 1;
            t.excess_candidates += r.service_volume;
            t.overage += r.service_volume - r.surveillance_volume;
        }
    }
    let mut rows: Vec<ExcessReportRow> = tallies
        .into_iter()
        .map(|((program, class), t)| {
            ExcessReportRow::from_counts(
                program,
                class,
                t.aggregates,
                t.exceeding,
                t.excess_candidates,
                t.case_volume,
                t.overage,
            )
        })
        .collect();
    rows.sort_by(|a, b| {
        b.cmp_volume_share(a)
            .then_with(|| a.program.cmp(&b.program))
            .then_with(|| a.class.cmp(&b.class))
    });
    rows
}

pub fn excess_report(
    index: &Index,
    service_programs: &[String],
    surveillance_program: &str,
    tie: TieRule,
) -> Result<Vec<ExcessReportRow>, IndexError> {
    let mut joined = Vec::new();
    for program in service_programs {
        joined.extend(join_to_surveillance(index, program, surveillance_program)?.joined);
    }
    Ok(excess_report_from_joined(&joined, tie))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TimelineConfig {
    pub smoothing: LowessConfig,
    pub tie: TieRule,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimelinePoint {
    pub year: i32,
    pub class: AggregateClass,
    /// `None` for the series pooled over all service programs.
    pub program: Option<String>,
    pub exceed_count: u64,
    pub smoothed: f64,
}

fn smooth_series(series: &BTreeMap<i32, u64>, config: &LowessConfig) -> Vec<f64> {
    let points: Vec<(f64, f64)> = series.iter().map(|(&y, &c)| (y as f64, c as f64)).collect();
    match lowess(&points, config) {
        Ok(fit) => fit,
        Err(LowessError::TooFewPoints(_)) => points.iter().map(|p| p.1).collect(),
        // Years and counts are finite; only an invalid span reaches here.
        Err(_) => points.iter().map(|p| p.1).collect(),
    }
}

/// Yearly counts of exceeding aggregates per (program, class) and pooled per
/// class, each with a LOWESS fit over year. Years with joined data but no
/// exceeding aggregates appear with a zero count.
pub fn excess_timeline(
    index: &Index,
    service_programs: &[String],
    surveillance_program: &str,
    config: &TimelineConfig,
) -> Result<Vec<TimelinePoint>, IndexError> {
    let mut per_program: BTreeMap<(AggregateClass, String), BTreeMap<i32, u64>> = BTreeMap::new();
    let mut pooled: BTreeMap<AggregateClass, BTreeMap<i32, u64>> = BTreeMap::new();
    for program in service_programs {
        for r in join_to_surveillance(index, program, surveillance_program)?.joined {
            let hit = u64::from(config.tie.exceeds(r.service_volume, r.surveillance_volume));
            *per_program
                .entry((r.class, r.program.clone()))
                .or_default()
                .entry(r.year)
                .or_default() += hit;
            *pooled.entry(r.class).or_default().entry(r.year).or_default() += hit;
        }
    }

    let mut points = Vec::new();
    for (class, series) in &pooled {
        let smoothed = smooth_series(series, &config.smoothing);
        for ((&year, &count), s) in series.iter().zip(smoothed) {
            points.push(TimelinePoint {
                year,
                class: *class,
                program: None,
                exceed_count: count,
                smoothed: s,
            });
        }
    }
    for ((class, program), series) in &per_program {
        let smoothed = smooth_series(series, &config.smoothing);
        for ((&year, &count), s) in series.iter().zip(smoothed) {
            points.push(TimelinePoint {
                year,
                class: *class,
                program: Some(program.clone()),
                exceed_count: count,
                smoothed: s,
            });
        }
    }
    Ok(points)
}
