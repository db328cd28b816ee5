use std::collections::{BTreeMap, BTreeSet};

use super::{PersonRecord, ScenarioConfig};
use crate::index::{AggregateClass, AggregateRecord, DomainKey, RecordKind};
use crate::ingest::AgeBinning;

fn age_label(binning: AgeBinning, person: &PersonRecord, year: i32) -> String {
    binning.label(binning.bin_index(person.age_in(year)).expect("clamped age"))
}

/// Domain of `person` in `class` during `year` (the death year for death
/// classes).
fn domain_of(person: &PersonRecord, class: AggregateClass, year: i32, binning: AgeBinning) -> DomainKey {
    match class {
        AggregateClass::Age | AggregateClass::AgeDeath => DomainKey::single(age_label(binning, person, year)),
        AggregateClass::Race | AggregateClass::RaceDeath => DomainKey::single(person.race.clone()),
        AggregateClass::PlaceRace => DomainKey::pair(person.place.clone(), person.race.clone()),
        AggregateClass::RaceAge => DomainKey::pair(person.race.clone(), age_label(binning, person, year)),
    }
}

struct Layout {
    races: Vec<String>,
    places: Vec<String>,
    bins: usize,
}

impl Layout {
    fn size(&self, class: AggregateClass) -> usize {
        let (r, l, a) = (self.races.len(), self.places.len(), self.bins);
        match class {
            AggregateClass::Age | AggregateClass::AgeDeath => a,
            AggregateClass::Race | AggregateClass::RaceDeath => r,
            AggregateClass::PlaceRace => l * r,
            AggregateClass::RaceAge => r * a,
        }
    }

    fn slot(&self, class: AggregateClass, race: usize, place: usize, bin: usize) -> usize {
        match class {
            AggregateClass::Age | AggregateClass::AgeDeath => bin,
            AggregateClass::Race | AggregateClass::RaceDeath => race,
            AggregateClass::PlaceRace => place * self.races.len() + race,
            AggregateClass::RaceAge => race * self.bins + bin,
        }
    }

    fn key(&self, class: AggregateClass, slot: usize, binning: AgeBinning) -> DomainKey {
        let r = self.races.len();
        match class {
            AggregateClass::Age | AggregateClass::AgeDeath => DomainKey::single(binning.label(slot)),
            AggregateClass::Race | AggregateClass::RaceDeath => DomainKey::single(self.races[slot].clone()),
            AggregateClass::PlaceRace => DomainKey::pair(self.places[slot / r].clone(), self.races[slot % r].clone()),
            AggregateClass::RaceAge => {
                DomainKey::pair(self.races[slot / self.bins].clone(), binning.label(slot % self.bins))
            }
        }
    }
}

/// Distinct-person counts per (program, year, class, domain).
///
/// Prevalence classes count persons alive during the year who are enrolled
/// in the program (service) or were captured by the end of the year
/// (surveillance). Death classes count deaths in the year, by age and race
/// at death, among persons enrolled that year or captured by then. The death
/// cohort counts deaths of anyone enrolled in some program by the death
/// year. Every domain seen in any program for a (year, class) is emitted
/// for all programs, zero volumes included. Output is sorted by program,
/// year, class and domain.
pub fn aggregate(persons: &[PersonRecord], config: &ScenarioConfig) -> Vec<AggregateRecord> {
    let layout = Layout {
        races: persons.iter().map(|p| p.race.clone()).collect::<BTreeSet<_>>().into_iter().collect(),
        places: persons.iter().map(|p| p.place.clone()).collect::<BTreeSet<_>>().into_iter().collect(),
        bins: config.binning.bin_count(),
    };
    let classes = &config.classes;
    let years = config.years;
    let n_years = (years.last - years.first + 1) as usize;
    let services = config.programs.len();
    let n_programs = services + 1 + usize::from(config.death_cohort.is_some());
    let cohort = config.death_cohort.as_ref().map(|_| services + 1);

    let cell = |p: usize, y: usize, c: usize| (p * n_years + y) * classes.len() + c;
    let mut counts: Vec<Vec<u64>> = (0..n_programs * n_years * classes.len())
        .map(|i| vec![0; layout.size(classes[i % classes.len()])])
        .collect();

    let mut members = Vec::with_capacity(n_programs);
    for person in persons {
        let race = layout.races.binary_search(&person.race).expect("race collected");
        let place = layout.places.binary_search(&person.place).expect("place collected");
        let first = person.hiv_year.max(years.first);
        let last = person.death_year.map_or(years.last, |d| d.min(years.last));
        for year in first..=last {
            let yi = (year - years.first) as usize;
            let bin = config.binning.bin_index(person.age_in(year)).expect("clamped age");
            members.clear();
            if person.captured_by(year) {
                members.push(0);
            }
            for (i, program) in config.programs.iter().enumerate() {
                if person.enrolled_in(&program.name, year) {
                    members.push(i + 1);
                }
            }
            let died = person.death_year == Some(year);
            if died {
                if let Some(c) = cohort {
                    if person.known_to_services_by(year) {
                        members.push(c);
                    }
                }
            }
            for (ci, &class) in classes.iter().enumerate() {
                if class.is_death() && !died {
                    continue;
                }
                let slot = layout.slot(class, race, place, bin);
                for &p in &members {
                    if Some(p) == cohort && !class.is_death() {
                        continue;
                    }
                    counts[cell(p, yi, ci)][slot] += 1;
                }
            }
        }
    }

    let mut records = Vec::new();
    let label = |p: usize| -> (&str, &str, RecordKind) {
        if p == 0 {
            (&config.surveillance.origin, &config.surveillance.name, RecordKind::Surveillance)
        } else if Some(p) == cohort {
            let d = config.death_cohort.as_ref().expect("cohort configured");
            (&d.origin, &d.name, RecordKind::Service)
        } else {
            let s = &config.programs[p - 1];
            (&s.origin, &s.name, RecordKind::Service)
        }
    };
    for yi in 0..n_years {
        for (ci, &class) in classes.iter().enumerate() {
            let active: Vec<usize> = (0..n_programs)
                .filter(|&p| class.is_death() || Some(p) != cohort)
                .collect();
            for slot in 0..layout.size(class) {
                if active.iter().all(|&p| counts[cell(p, yi, ci)][slot] == 0) {
                    continue;
                }
                let key = layout.key(class, slot, config.binning);
                for &p in &active {
                    let (origin, program, kind) = label(p);
                    records.push(AggregateRecord {
                        origin: origin.to_string(),
                        program: program.to_string(),
                        kind,
                        year: years.first + yi as i32,
                        class,
                        key: key.clone(),
                        volume: counts[cell(p, yi, ci)][slot],
                    });
                }
            }
        }
    }
    records.sort_by(|a, b| a.index_key().cmp(&b.index_key()));
    records
}

/// Nonzero SUSK counts keyed by (program, class, domain).
pub type SuskCounts = BTreeMap<(String, AggregateClass, DomainKey), u64>;

/// Persons counted by a service program in `year` who were not captured by
/// surveillance by the end of `year`.
pub fn ground_truth_susk(persons: &[PersonRecord], year: i32, config: &ScenarioConfig) -> SuskCounts {
    let mut out = SuskCounts::new();
    for person in persons {
        if !person.alive_in(year) || person.captured_by(year) {
            continue;
        }
        let died = person.death_year == Some(year);
        let mut programs: Vec<(&str, bool)> = config
            .programs
            .iter()
            .filter(|p| person.enrolled_in(&p.name, year))
            .map(|p| (p.name.as_str(), true))
            .collect();
        if let Some(d) = &config.death_cohort {
            if died && person.known_to_services_by(year) {
                programs.push((d.name.as_str(), false));
            }
        }
        for &class in &config.classes {
            if class.is_death() && !died {
                continue;
            }
            let key = domain_of(person, class, year, config.binning);
            for &(program, counts_prevalence) in &programs {
                if !class.is_death() && !counts_prevalence {
                    continue;
                }
                *out.entry((program.to_string(), class, key.clone())).or_default() += 1;
            }
        }
    }
    out
}
