use std::collections::BTreeMap;
use std::io::Write;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Geometric;
use serde::Serialize;

use super::{Injection, ScenarioConfig, SynthError};
use crate::index::AggregateClass;
use crate::ingest::{AgeBinning, MAX_AGE};
use crate::model::derive_seed;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PersonRecord {
    pub id: u64,
    pub birth_year: i32,
    pub race: String,
    pub place: String,
    pub hiv_year: i32,
    pub death_year: Option<i32>,
    pub surveillance_year: Option<i32>,
    /// Sorted, disjoint, non-adjacent inclusive year intervals per program.
    pub enrollments: BTreeMap<String, Vec<(i32, i32)>>,
    /// Index of the injection rule that converted this person.
    pub injection: Option<usize>,
}

impl PersonRecord {
    /// Living with HIV at some point during `year`.
    pub fn alive_in(&self, year: i32) -> bool {
        self.hiv_year <= year && self.death_year.is_none_or(|d| d >= year)
    }

    pub fn captured_by(&self, year: i32) -> bool {
        self.surveillance_year.is_some_and(|s| s <= year)
    }

    pub fn enrolled_in(&self, program: &str, year: i32) -> bool {
        self.enrollments
            .get(program)
            .is_some_and(|spans| spans.iter().any(|&(a, b)| a <= year && year <= b))
    }

    /// Enrolled in any program at or before `year`.
    pub fn known_to_services_by(&self, year: i32) -> bool {
        self.enrollments.values().flatten().any(|&(a, _)| a <= year)
    }

    pub fn age_in(&self, year: i32) -> i32 {
        (year - self.birth_year).clamp(0, MAX_AGE)
    }

    fn enroll(&mut self, program: &str, span: (i32, i32)) {
        let spans = self.enrollments.entry(program.to_string()).or_default();
        spans.push(span);
        spans.sort_unstable();
        let mut merged: Vec<(i32, i32)> = Vec::with_capacity(spans.len());
        for &(a, b) in spans.iter() {
            match merged.last_mut() {
                Some(last) if a <= last.1 + 1 => last.1 = last.1.max(b),
                _ => merged.push((a, b)),
            }
        }
        *spans = merged;
    }
}

/// Eligible and converted persons for one injection rule.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct InjectionOutcome {
    pub eligible: u64,
    pub converted: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cohort {
    pub persons: Vec<PersonRecord>,
    pub outcomes: Vec<InjectionOutcome>,
}

fn geometric_years(rng: &mut ChaCha8Rng, mean: f64) -> i32 {
    if mean <= 0.0 {
        return 0;
    }
    let draw = Geometric::new(1.0 / (1.0 + mean)).expect("probability in (0, 1]").sample(rng);
    draw.min(1_000) as i32
}

fn matches_cell(person: &PersonRecord, inj: &Injection, binning: AgeBinning) -> bool {
    let first = inj.years.first;
    if person.hiv_year > first || person.death_year.is_some_and(|d| d <= inj.years.last) {
        return false;
    }
    let age = || binning.label(binning.bin_index(person.age_in(first)).expect("clamped age"));
    match inj.class {
        AggregateClass::Race => person.race == inj.key[0],
        AggregateClass::Age => age() == inj.key[0],
        AggregateClass::PlaceRace => person.place == inj.key[0] && person.race == inj.key[1],
        AggregateClass::RaceAge => person.race == inj.key[0] && age() == inj.key[1],
        AggregateClass::AgeDeath | AggregateClass::RaceDeath => false,
    }
}

fn person(config: &ScenarioConfig, races: &WeightedIndex<f64>, places: &WeightedIndex<f64>, master: u64, id: u64) -> (PersonRecord, ChaCha8Rng) {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(id);
    let birth_year = rng.random_range(config.birth_years.first..=config.birth_years.last);
    let race = config.races[races.sample(&mut rng)].clone();
    let place = config.places[places.sample(&mut rng)].clone();
    let hiv_year = rng.random_range(config.hiv_years.first..=config.hiv_years.last).max(birth_year);

    let death_year = if config.mortality_hazard > 0.0 {
        let draw = Geometric::new(config.mortality_hazard).expect("validated").sample(&mut rng);
        let year = hiv_year as i64 + draw as i64;
        (year <= config.years.last as i64).then_some(year as i32)
    } else {
        None
    };

    let surveillance_year = if rng.random_bool(config.surveillance.capture_probability) {
        let year = hiv_year + geometric_years(&mut rng, config.surveillance.lag_mean);
        death_year.is_none_or(|d| year <= d).then_some(year)
    } else {
        None
    };

    let mut record = PersonRecord {
        id,
        birth_year,
        race,
        place,
        hiv_year,
        death_year,
        surveillance_year,
        enrollments: BTreeMap::new(),
        injection: None,
    };
    for program in &config.programs {
        if !rng.random_bool(program.enrollment_probability) {
            continue;
        }
        let start = hiv_year + geometric_years(&mut rng, program.enrollment_lag_mean);
        let mut end = start + geometric_years(&mut rng, program.duration_mean);
        let age = start - birth_year;
        if program.min_age.is_some_and(|m| age < m) || program.max_age.is_some_and(|m| age > m) {
            continue;
        }
        if let Some(d) = death_year {
            if d < start {
                continue;
            }
            end = end.min(d);
        }
        record.enroll(&program.name, (start, end));
    }
    (record, rng)
}

/// Seeded cohort with per-rule injection tallies. Each person draws from an
/// independent stream keyed by id, so any id range can be generated alone.
pub fn generate_detailed(config: &ScenarioConfig) -> Result<Cohort, SynthError> {
    config.validate()?;
    let races = WeightedIndex::new(&config.race_weights).map_err(|e| SynthError::InvalidConfig(e.to_string()))?;
    let places = WeightedIndex::new(&config.place_weights).map_err(|e| SynthError::InvalidConfig(e.to_string()))?;
    let master = derive_seed(config.seed, 0x5eed);
    let mut outcomes = vec![InjectionOutcome::default(); config.injections.len()];
    let mut persons = Vec::with_capacity(config.population);
    for id in 0..config.population as u64 {
        let (mut p, mut rng) = person(config, &races, &places, master, id);
        for (i, inj) in config.injections.iter().enumerate() {
            if p.injection.is_some() || !matches_cell(&p, inj, config.binning) {
                continue;
            }
            outcomes[i].eligible += 1;
            if rng.random_bool(inj.rate) {
                outcomes[i].converted += 1;
                p.injection = Some(i);
                p.enroll(&inj.program, (inj.years.first, inj.years.last));
                p.surveillance_year = p
                    .surveillance_year
                    .map(|s| s.max(inj.years.last + 1))
                    .filter(|&s| p.death_year.is_none_or(|d| s <= d));
            }
        }
        persons.push(p);
    }
    Ok(Cohort { persons, outcomes })
}

pub fn generate(config: &ScenarioConfig) -> Result<Vec<PersonRecord>, SynthError> {
    Ok(generate_detailed(config)?.persons)
}

fn year_cell(y: Option<i32>) -> String {
    y.map(|v| v.to_string()).unwrap_or_default()
}

/// Person-level audit dump. Enrollments are written as
/// `program:start-end` items joined by `;`.
pub fn write_persons<W: Write>(persons: &[PersonRecord], sink: W) -> Result<(), SynthError> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record([
        "id",
        "birth_year",
        "race",
        "place",
        "hiv_year",
        "death_year",
        "surveillance_year",
        "enrollments",
        "injection",
    ])?;
    for p in persons {
        let enrollments: Vec<String> = p
            .enrollments
            .iter()
            .flat_map(|(prog, spans)| spans.iter().map(move |(a, b)| format!("{prog}:{a}-{b}")))
            .collect();
        w.write_record([
            p.id.to_string(),
            p.birth_year.to_string(),
            p.race.clone(),
            p.place.clone(),
            p.hiv_year.to_string(),
            year_cell(p.death_year),
            year_cell(p.surveillance_year),
            enrollments.join(";"),
            p.injection.map(|i| i.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
