//! Person-level synthetic cohorts with known surveillance status, their
//! aggregation into program tables, and exact SUSK counts per cell.

mod aggregate;
mod generate;

pub use aggregate::{aggregate, ground_truth_susk, SuskCounts};
pub use generate::{generate, generate_detailed, write_persons, Cohort, InjectionOutcome, PersonRecord};

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::index::{AggregateClass, LabelScope, YearRange};
use crate::ingest::AgeBinning;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid scenario: {0}")]
    InvalidConfig(String),
    #[error("cannot read scenario: {0}")]
    Toml(#[from] toml::de::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProgramSpec {
    pub name: String,
    pub origin: String,
    /// Chance a person ever enrolls.
    pub enrollment_probability: f64,
    /// Mean years from HIV acquisition to enrollment (geometric).
    #[serde(default)]
    pub enrollment_lag_mean: f64,
    /// Mean enrollment length in years beyond the first (geometric).
    #[serde(default = "default_duration")]
    pub duration_mean: f64,
    /// Youngest age at enrollment.
    #[serde(default)]
    pub min_age: Option<i32>,
    /// Oldest age at enrollment, e.g. 62 for "under 63".
    #[serde(default)]
    pub max_age: Option<i32>,
}

fn default_duration() -> f64 {
    4.0
}

impl ProgramSpec {
    pub fn new(name: &str, origin: &str, enrollment_probability: f64) -> Self {
        ProgramSpec {
            name: name.into(),
            origin: origin.into(),
            enrollment_probability,
            enrollment_lag_mean: 0.0,
            duration_mean: default_duration(),
            min_age: None,
            max_age: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurveillanceSpec {
    pub name: String,
    pub origin: String,
    /// Chance a person is ever captured.
    pub capture_probability: f64,
    /// Mean years from acquisition to capture (geometric); 0 means same year.
    pub lag_mean: f64,
}

impl Default for SurveillanceSpec {
    fn default() -> Self {
        SurveillanceSpec {
            name: "Surveillance".into(),
            origin: "CDC".into(),
            capture_probability: 1.0,
            lag_mean: 0.0,
        }
    }
}

/// Program that counts deaths of anyone who was ever enrolled in a service
/// program, regardless of which one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeathCohortSpec {
    pub name: String,
    pub origin: String,
}

/// Converts matching persons into SUSK cases: they are enrolled in
/// `program` for every year in `years`, and surveillance capture is pushed
/// past the window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Injection {
    pub program: String,
    pub class: AggregateClass,
    /// Domain labels: one for single-slot classes, two for pairs.
    pub key: Vec<String>,
    pub years: YearRange,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub population: usize,
    pub seed: u64,
    /// Years covered by the emitted tables.
    pub years: YearRange,
    pub birth_years: YearRange,
    /// Range of HIV acquisition years (clamped to the birth year).
    pub hiv_years: YearRange,
    /// Annual probability of death after acquisition.
    pub mortality_hazard: f64,
    pub races: Vec<String>,
    pub race_weights: Vec<f64>,
    pub places: Vec<String>,
    pub place_weights: Vec<f64>,
    pub surveillance: SurveillanceSpec,
    pub programs: Vec<ProgramSpec>,
    pub death_cohort: Option<DeathCohortSpec>,
    pub injections: Vec<Injection>,
    pub classes: Vec<AggregateClass>,
    pub binning: AgeBinning,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let races = ["White", "Black", "Hispanic", "Asian"];
        let places = ["California", "Maryland", "New York", "Texas"];
        ScenarioConfig {
            population: 10_000,
            seed: 0,
            years: YearRange::new(2005, 2015),
            birth_years: YearRange::new(1940, 1990),
            hiv_years: YearRange::new(1995, 2015),
            mortality_hazard: 0.01,
            races: races.iter().map(|s| s.to_string()).collect(),
            race_weights: vec![1.0; races.len()],
            places: places.iter().map(|s| s.to_string()).collect(),
            place_weights: vec![1.0; places.len()],
            surveillance: SurveillanceSpec::default(),
            programs: vec![
                ProgramSpec::new("Medicare", "CMS", 0.2),
                ProgramSpec::new("Medicaid", "CMS", 0.2),
                ProgramSpec {
                    max_age: Some(62),
                    ..ProgramSpec::new("SSDI", "CMS", 0.2)
                },
                ProgramSpec::new("RWA", "HRSA", 0.2),
            ],
            death_cohort: Some(DeathCohortSpec {
                name: "Deaths".into(),
                origin: "CMS".into(),
            }),
            injections: Vec::new(),
            classes: AggregateClass::ALL.to_vec(),
            binning: AgeBinning::TopCoded,
        }
    }
}

fn probability(name: &str, p: f64) -> Result<(), SynthError> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(SynthError::InvalidConfig(format!("{name} = {p} is not a probability")))
    }
}

fn non_negative(name: &str, v: f64) -> Result<(), SynthError> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(SynthError::InvalidConfig(format!("{name} = {v} must be a non-negative number")))
    }
}

fn check_range(name: &str, r: &YearRange) -> Result<(), SynthError> {
    if r.first <= r.last {
        Ok(())
    } else {
        Err(SynthError::InvalidConfig(format!("{name} range {r} is empty")))
    }
}

fn check_labels(name: &str, labels: &[String], weights: &[f64]) -> Result<(), SynthError> {
    let invalid = |m: String| Err(SynthError::InvalidConfig(m));
    if labels.is_empty() {
        return invalid(format!("{name} list is empty"));
    }
    if labels.len() != weights.len() {
        return invalid(format!("{name} has {} labels but {} weights", labels.len(), weights.len()));
    }
    if labels.iter().collect::<BTreeSet<_>>().len() != labels.len() {
        return invalid(format!("{name} labels repeat"));
    }
    if labels.iter().any(|l| l.trim().is_empty()) {
        return invalid(format!("{name} label is blank"));
    }
    if weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) || weights.iter().sum::<f64>() <= 0.0 {
        return invalid(format!("{name} weights must be non-negative with a positive sum"));
    }
    Ok(())
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self, SynthError> {
        let config: ScenarioConfig = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let invalid = |m: String| Err(SynthError::InvalidConfig(m));
        check_range("years", &self.years)?;
        check_range("birth_years", &self.birth_years)?;
        check_range("hiv_years", &self.hiv_years)?;
        probability("mortality_hazard", self.mortality_hazard)?;
        probability("surveillance.capture_probability", self.surveillance.capture_probability)?;
        non_negative("surveillance.lag_mean", self.surveillance.lag_mean)?;
        check_labels("races", &self.races, &self.race_weights)?;
        check_labels("places", &self.places, &self.place_weights)?;
        if self.classes.is_empty() {
            return invalid("no aggregate classes selected".into());
        }

        let mut names = BTreeSet::from([self.surveillance.name.as_str()]);
        for p in &self.programs {
            probability(&format!("{}.enrollment_probability", p.name), p.enrollment_probability)?;
            non_negative(&format!("{}.enrollment_lag_mean", p.name), p.enrollment_lag_mean)?;
            non_negative(&format!("{}.duration_mean", p.name), p.duration_mean)?;
            if let (Some(lo), Some(hi)) = (p.min_age, p.max_age) {
                if lo > hi {
                    return invalid(format!("{} age bounds are inverted", p.name));
                }
            }
            if !names.insert(p.name.as_str()) {
                return invalid(format!("program name {} repeats", p.name));
            }
        }
        if let Some(d) = &self.death_cohort {
            if !names.insert(d.name.as_str()) {
                return invalid(format!("program name {} repeats", d.name));
            }
        }
        let origins = self.programs.iter().map(|p| p.origin.as_str());
        if names.iter().copied().chain(origins).any(|s| s.trim().is_empty()) {
            return invalid("program names and origins must be non-empty".into());
        }

        for inj in &self.injections {
            probability("injection rate", inj.rate)?;
            check_range("injection years", &inj.years)?;
            if !self.programs.iter().any(|p| p.name == inj.program) {
                return invalid(format!("injection names unknown service program {}", inj.program));
            }
            if inj.class.is_death() {
                return invalid(format!("injections into {} are not supported", inj.class));
            }
            if inj.key.len() != inj.class.arity() {
                return invalid(format!("{} keys take {} labels", inj.class, inj.class.arity()));
            }
            for (label, scope) in inj.key.iter().zip(inj.class.slot_scopes()) {
                let known = match scope {
                    LabelScope::Race => self.races.contains(label),
                    LabelScope::Place => self.places.contains(label),
                    LabelScope::Age => {
                        (0..self.binning.bin_count()).any(|b| self.binning.label(b) == *label)
                    }
                };
                if !known {
                    return invalid(format!("injection label {label} is not a known {scope} value"));
                }
            }
        }
        Ok(())
    }
}
