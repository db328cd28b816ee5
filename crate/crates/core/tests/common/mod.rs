//! Generators and reference implementations shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use susk::index::{AggregateClass, AggregateRecord, DomainKey, JoinedRecord, RecordKind, YearRange};
use susk::synth::{Injection, ScenarioConfig};

pub const RACES: &[&str] = &[
    "White",
    "Black",
    "Hispanic",
    "Asian",
    "AIAN",
    "NHPI",
    "Multiple Races",
];
pub const PLACES: &[&str] = &[
    "California",
    "Florida",
    "Georgia",
    "Maryland",
    "New York",
    "Texas",
    "Ohio",
];
pub const AGES: &[&str] = &[
    "0-4", "5-9", "10-14", "15-19", "20-24", "25-29", "30-34", "35-39", "40-44", "45-49", "50-54",
    "55-59", "60-64", "65+",
];

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests")
        .join("fixtures")
        .join(name)
}

fn pick<'a>(rng: &mut ChaCha8Rng, pool: &[&'a str]) -> &'a str {
    pool.choose(rng).expect("non-empty pool")
}

pub fn random_key(rng: &mut ChaCha8Rng, class: AggregateClass) -> DomainKey {
    match class {
        AggregateClass::Age | AggregateClass::AgeDeath => DomainKey::single(pick(rng, AGES)),
        AggregateClass::Race | AggregateClass::RaceDeath => DomainKey::single(pick(rng, RACES)),
        AggregateClass::PlaceRace => DomainKey::pair(pick(rng, PLACES), pick(rng, RACES)),
        AggregateClass::RaceAge => DomainKey::pair(pick(rng, RACES), pick(rng, AGES)),
    }
}

/// A random index with one surveillance program and one to three service
/// programs. Service programs reuse most surveillance cells so joins are
/// non-trivial; some volumes are zero.
pub fn random_records(seed: u64) -> Vec<AggregateRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let services = ["Medicare", "Medicaid", "RWA"];
    let n_services = rng.random_range(1..=services.len());
    let mut cells = BTreeSet::new();
    for _ in 0..rng.random_range(5..60) {
        let year = rng.random_range(2000..=2018);
        let class = *AggregateClass::ALL.choose(&mut rng).unwrap();
        cells.insert((year, class, random_key(&mut rng, class)));
    }
    let volume = |rng: &mut ChaCha8Rng| {
        if rng.random_bool(0.1) {
            0
        } else {
            rng.random_range(1..200_000u64)
        }
    };
    let mut out = Vec::new();
    let programs = std::iter::once(("CDC", "Surveillance", RecordKind::Surveillance))
        .chain(services[..n_services].iter().map(|p| ("CMS", *p, RecordKind::Service)));
    for (origin, program, kind) in programs {
        for (year, class, key) in &cells {
            if kind == RecordKind::Service && rng.random_bool(0.2) {
                continue;
            }
            out.push(AggregateRecord {
                origin: origin.into(),
                program: program.into(),
                kind,
                year: *year,
                class: *class,
                key: key.clone(),
                volume: volume(&mut rng),
            });
        }
    }
    out
}

/// Brute-force LOWESS: every local fit weighs all points by their distance
/// relative to the q-th smallest distance and solves the 2x2 normal
/// equations directly.
pub fn lowess_oracle(points: &[(f64, f64)], span: f64, iterations: usize) -> Vec<f64> {
    let n = points.len();
    let q = ((span * n as f64 + 1e-7).floor() as usize).clamp(2, n);
    let tricube = |u: f64| if u < 1.0 { (1.0 - u.powi(3)).powi(3) } else { 0.0 };
    let range = {
        let (lo, hi) = points
            .iter()
            .fold((f64::MAX, f64::MIN), |(lo, hi), p| (lo.min(p.0), hi.max(p.0)));
        hi - lo
    };
    let fit = |robust: &[f64]| -> Vec<f64> {
        points
            .iter()
            .map(|&(x0, y0)| {
                let mut d: Vec<f64> = points.iter().map(|p| (p.0 - x0).abs()).collect();
                let mut sorted = d.clone();
                sorted.sort_by(f64::total_cmp);
                let h = sorted[q - 1];
                for (j, dj) in d.iter_mut().enumerate() {
                    let base = if h > 0.0 { tricube(*dj / h) } else { 1.0 };
                    *dj = base * robust[j];
                }
                let w = d;
                let s0: f64 = w.iter().sum();
                if s0 <= 0.0 {
                    return y0;
                }
                let s1: f64 = w.iter().zip(points).map(|(w, p)| w * p.0).sum();
                let s2: f64 = w.iter().zip(points).map(|(w, p)| w * p.0 * p.0).sum();
                let t0: f64 = w.iter().zip(points).map(|(w, p)| w * p.1).sum();
                let t1: f64 = w.iter().zip(points).map(|(w, p)| w * p.0 * p.1).sum();
                let det = s0 * s2 - s1 * s1;
                let var = det / (s0 * s0);
                if var > 0.0 && var.sqrt() > 1e-7 * range {
                    let b = (s0 * t1 - s1 * t0) / det;
                    let a = (t0 - b * s1) / s0;
                    a + b * x0
                } else {
                    t0 / s0
                }
            })
            .collect()
    };
    let y_scale = points.iter().map(|p| p.1.abs()).fold(0.0, f64::max);
    let mut robust = vec![1.0; n];
    let mut fitted = fit(&robust);
    for _ in 0..iterations {
        let resid: Vec<f64> = points.iter().zip(&fitted).map(|(p, f)| p.1 - f).collect();
        let mut abs: Vec<f64> = resid.iter().map(|r| r.abs()).collect();
        let mean = abs.iter().sum::<f64>() / n as f64;
        abs.sort_by(f64::total_cmp);
        let s = if n % 2 == 1 {
            abs[n / 2]
        } else {
            (abs[n / 2 - 1] + abs[n / 2]) / 2.0
        };
        if s == 0.0 || s <= 1e-7 * mean || s <= 1e-10 * y_scale {
            break;
        }
        robust = resid
            .iter()
            .map(|r| {
                let u = r / (6.0 * s);
                if u.abs() < 1.0 {
                    (1.0 - u * u).powi(2)
                } else {
                    0.0
                }
            })
            .collect();
        fitted = fit(&robust);
    }
    fitted
}

#[derive(Debug, Clone, serde::Deserialize)]
pub struct ExcessCountRow {
    pub program: String,
    pub class: AggregateClass,
    pub aggregates: u64,
    pub exceeding: u64,
    pub excess_share: f64,
    pub excess_candidates: u64,
    pub case_volume: u64,
    pub volume_share: f64,
}

pub fn excess_count_rows() -> Vec<ExcessCountRow> {
    csv::Reader::from_path(fixture("national_excess_counts.csv"))
        .expect("fixture present")
        .deserialize()
        .collect::<Result<_, _>>()
        .expect("fixture parses")
}

/// Long-format aggregate table realizing every row's counts: exceeding
/// cells have zero surveillance volume and share the excess candidates,
/// the other cells match surveillance exactly and share the rest of the
/// case volume. Cell labels are unique per row, so the surveillance
/// program holds one counterpart per service cell.
pub fn excess_counts_index_csv(rows: &[ExcessCountRow]) -> String {
    let mut out = String::from("origin,program,kind,year,class,domain_a,domain_b,volume\n");
    let split = |total: u64, parts: u64, i: u64| -> u64 {
        let base = total / parts;
        if i + 1 == parts {
            total - base * (parts - 1)
        } else {
            base
        }
    };
    for (r, row) in rows.iter().enumerate() {
        let normal = row.aggregates - row.exceeding;
        for i in 0..row.aggregates {
            let year = 1999 + (i / 100) as i32;
            let a = format!("Cell{r}n{}", i % 100);
            let b = if row.class.arity() == 2 { "Any" } else { "" };
            let (service, surveillance) = if i < row.exceeding {
                (split(row.excess_candidates, row.exceeding, i), 0)
            } else {
                let v = split(row.case_volume - row.excess_candidates, normal, i - row.exceeding);
                (v, v)
            };
            out.push_str(&format!(
                "X,{},service,{year},{},{a},{b},{service}\n",
                row.program, row.class
            ));
            out.push_str(&format!(
                "CDC,Surveillance,surveillance,{year},{},{a},{b},{surveillance}\n",
                row.class
            ));
        }
    }
    out
}

/// Programs and the fraction of surveillance volume each one reports.
pub const PLANTED_PROGRAMS: [(&str, &str, f64); 4] = [
    ("CMS", "Medicare", 0.3),
    ("CMS", "Medicaid", 0.5),
    ("HRSA", "RWA", 0.2),
    ("CMS", "SSDI", 0.4),
];

/// Joined data where service volume is a fixed fraction of surveillance
/// volume per (program, domain), up to 2% noise. Surveillance volumes vary
/// by domain (`spread`) and by year (`noise`). A `decoupled` domain label
/// instead gets service volumes drawn around the domain's mean level,
/// unrelated to that year's surveillance volume.
pub fn planted_joined(seed: u64, decoupled: Option<&str>, noise: f64, spread: f64) -> Vec<JoinedRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let races = ["White", "Black", "Hispanic", "Asian", "Multiple Races"];
    let places = ["California", "Maryland", "New York", "Texas"];
    let mut keys: Vec<(AggregateClass, DomainKey)> = Vec::new();
    for r in races {
        keys.push((AggregateClass::Race, DomainKey::single(r)));
    }
    for a in 0..10 {
        let label = format!("{}-{}", a * 5 + 15, a * 5 + 19);
        keys.push((AggregateClass::Age, DomainKey::single(label)));
    }
    for p in places {
        for r in races {
            keys.push((AggregateClass::PlaceRace, DomainKey::pair(p, r)));
        }
    }
    let effects: Vec<f64> = keys.iter().map(|_| rng.random_range(-spread..spread)).collect();
    let coverage: Vec<f64> = keys.iter().map(|_| rng.random_range(-0.7..0.0)).collect();
    let years = YearRange::new(2005, 2014);
    let surveillance: Vec<Vec<f64>> = effects
        .iter()
        .map(|a| {
            years
                .years()
                .map(|y| 3.0 + a + 0.03 * (y - 2005) as f64 + rng.random_range(-noise..noise))
                .collect()
        })
        .collect();
    let mut out = Vec::new();
    for (origin, program, fraction) in PLANTED_PROGRAMS {
        for (k, (class, key)) in keys.iter().enumerate() {
            let level = surveillance[k].iter().sum::<f64>() / surveillance[k].len() as f64;
            for (yi, year) in years.years().enumerate() {
                let s = 10f64.powf(surveillance[k][yi]);
                let mut v = s * fraction * 10f64.powf(coverage[k]) * (1.0 + rng.random_range(-0.02..0.02));
                if decoupled.is_some_and(|d| key.label() == d) {
                    v = 10f64.powf(level + fraction.log10() + coverage[k] + rng.random_range(-0.1..0.1));
                }
                out.push(JoinedRecord {
                    origin: origin.into(),
                    program: program.into(),
                    year,
                    class: *class,
                    key: key.clone(),
                    service_volume: v.round() as u64,
                    surveillance_volume: s.round() as u64,
                });
            }
        }
    }
    out
}

/// The five SUSK cells planted in the end-to-end scenario:
/// (program, class, key, year).
pub const DESIGNATED_CELLS: [(&str, AggregateClass, [&str; 2], i32); 5] = [
    ("Medicare", AggregateClass::RaceAge, ["Black", "40-44"], 2008),
    ("Medicaid", AggregateClass::PlaceRace, ["Maryland", "Hispanic"], 2010),
    ("SSDI", AggregateClass::RaceAge, ["White", "30-34"], 2012),
    ("RWA", AggregateClass::PlaceRace, ["Texas", "Asian"], 2013),
    ("Medicare", AggregateClass::PlaceRace, ["California", "Black"], 2015),
];

/// Full-capture scenario with SUSK injected into the designated cells.
pub fn designated_scenario(population: usize, seed: u64) -> ScenarioConfig {
    ScenarioConfig {
        population,
        seed,
        injections: DESIGNATED_CELLS
            .iter()
            .map(|(program, class, key, year)| Injection {
                program: program.to_string(),
                class: *class,
                key: key.iter().map(|s| s.to_string()).collect(),
                years: YearRange::new(*year, *year),
                rate: 0.6,
            })
            .collect(),
        ..ScenarioConfig::default()
    }
}
