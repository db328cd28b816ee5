//! Analyses checked against independent brute-force computations.

mod common;

use std::collections::{BTreeMap, BTreeSet};

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{Binomial, DiscreteCDF};

use susk::distribution::{lowess, LowessConfig};
use susk::index::{AggregateClass, DomainKey, JoinedRecord, YearRange};
use susk::ingest::age_bin;
use susk::model::{
    encode_dataset, evaluate_protocol, permutation_importance, train_mlp, EncodedDataset,
    EncodingConfig, ModelConfig, TargetKind, TrainedModel,
};
use susk::synth::{aggregate, generate, generate_detailed, ground_truth_susk, Injection, PersonRecord, ScenarioConfig};

use common::*;

fn alive(p: &PersonRecord, year: i32) -> bool {
    p.hiv_year <= year && p.death_year.is_none_or(|d| year <= d)
}

fn enrolled(p: &PersonRecord, program: &str, year: i32) -> bool {
    p.enrollments
        .get(program)
        .is_some_and(|spans| spans.iter().any(|&(a, b)| a <= year && year <= b))
}

fn in_cell(p: &PersonRecord, class: AggregateClass, key: &DomainKey, year: i32) -> bool {
    let age = age_bin((year - p.birth_year).clamp(0, 120)).unwrap();
    let domain = match class {
        AggregateClass::Age | AggregateClass::AgeDeath => DomainKey::single(age),
        AggregateClass::Race | AggregateClass::RaceDeath => DomainKey::single(p.race.clone()),
        AggregateClass::PlaceRace => DomainKey::pair(p.place.clone(), p.race.clone()),
        AggregateClass::RaceAge => DomainKey::pair(p.race.clone(), age),
    };
    (!class.is_death() || p.death_year == Some(year)) && domain == *key
}

fn counted_by(p: &PersonRecord, program: &str, class: AggregateClass, year: i32, config: &ScenarioConfig) -> bool {
    if !alive(p, year) {
        return false;
    }
    if program == config.surveillance.name {
        return p.surveillance_year.is_some_and(|s| s <= year);
    }
    if config.death_cohort.as_ref().is_some_and(|d| d.name == program) {
        return class.is_death()
            && p.death_year == Some(year)
            && p.enrollments.values().flatten().any(|&(a, _)| a <= year);
    }
    enrolled(p, program, year)
}

fn scenario(seed: u64) -> ScenarioConfig {
    let mut config = designated_scenario(4000, seed);
    config.surveillance.capture_probability = 0.7;
    config.surveillance.lag_mean = 2.0;
    config.programs[0].enrollment_lag_mean = 1.0;
    config
}

#[test]
fn aggregate_volumes_match_person_loop() {
    for seed in [1, 2] {
        let config = scenario(seed);
        let persons = generate(&config).unwrap();
        let records = aggregate(&persons, &config);
        let mut total = 0;
        for r in &records {
            let brute = persons
                .iter()
                .filter(|p| in_cell(p, r.class, &r.key, r.year) && counted_by(p, &r.program, r.class, r.year, &config))
                .count() as u64;
            assert_eq!(r.volume, brute, "{} {} {} {}", r.program, r.year, r.class, r.key.label());
            total += brute;
        }
        let mut programs = vec![config.surveillance.name.clone()];
        programs.extend(config.programs.iter().map(|p| p.name.clone()));
        programs.extend(config.death_cohort.iter().map(|d| d.name.clone()));
        let mut expected = 0u64;
        for p in &persons {
            for year in config.years.years() {
                for &class in &config.classes {
                    for program in &programs {
                        expected += u64::from(counted_by(p, program, class, year, &config) && (!class.is_death() || p.death_year == Some(year)));
                    }
                }
            }
        }
        assert_eq!(total, expected, "some nonzero cell is missing");
    }
}

#[test]
fn ground_truth_matches_person_filter() {
    let config = scenario(3);
    let persons = generate(&config).unwrap();
    for year in config.years.years() {
        let truth = ground_truth_susk(&persons, year, &config);
        let mut brute: BTreeMap<(String, AggregateClass, DomainKey), u64> = BTreeMap::new();
        for p in persons.iter().filter(|p| alive(p, year) && p.surveillance_year.is_none_or(|s| s > year)) {
            for &class in &config.classes {
                let mut programs: Vec<&str> = config.programs.iter().map(|s| s.name.as_str()).collect();
                programs.extend(config.death_cohort.iter().map(|d| d.name.as_str()));
                for program in programs {
                    if !counted_by(p, program, class, year, &config) {
                        continue;
                    }
                    let keys: BTreeSet<DomainKey> = [
                        DomainKey::single(age_bin((year - p.birth_year).clamp(0, 120)).unwrap()),
                        DomainKey::single(p.race.clone()),
                        DomainKey::pair(p.place.clone(), p.race.clone()),
                        DomainKey::pair(p.race.clone(), age_bin((year - p.birth_year).clamp(0, 120)).unwrap()),
                    ]
                    .into_iter()
                    .filter(|k| in_cell(p, class, k, year))
                    .collect();
                    for key in keys {
                        *brute.entry((program.to_string(), class, key)).or_default() += 1;
                    }
                }
            }
        }
        assert_eq!(truth, brute, "year {year}");
    }
}

#[test]
fn full_capture_has_no_susk() {
    let config = ScenarioConfig { population: 5000, seed: 4, ..ScenarioConfig::default() };
    let persons = generate(&config).unwrap();
    for year in config.years.years() {
        assert!(ground_truth_susk(&persons, year, &config).is_empty());
    }
}

#[test]
fn injected_rate_falls_in_binomial_interval() {
    for seed in [5, 6, 7] {
        let rate = 0.1;
        let config = ScenarioConfig {
            population: 30_000,
            seed,
            injections: vec![Injection {
                program: "Medicaid".into(),
                class: AggregateClass::Race,
                key: vec!["Black".into()],
                years: YearRange::new(2010, 2011),
                rate,
            }],
            ..ScenarioConfig::default()
        };
        let cohort = generate_detailed(&config).unwrap();
        let outcome = cohort.outcomes[0];
        assert!(outcome.eligible > 1000, "{outcome:?}");
        let dist = Binomial::new(rate, outcome.eligible).unwrap();
        let k = outcome.converted;
        let lower_tail = dist.cdf(k);
        let upper_tail = if k == 0 { 1.0 } else { 1.0 - dist.cdf(k - 1) };
        assert!(lower_tail >= 0.005 && upper_tail >= 0.005, "{k} of {} at seed {seed}", outcome.eligible);
        let tagged = cohort.persons.iter().filter(|p| p.injection == Some(0)).count() as u64;
        assert_eq!(tagged, k);
    }
}

#[test]
fn population_zero_is_empty() {
    let config = ScenarioConfig { population: 0, ..ScenarioConfig::default() };
    assert!(generate(&config).unwrap().is_empty());
    assert!(aggregate(&[], &config).is_empty());
}

/// Permutation importance recomputed with fresh matrices and an explicit
/// prediction loop, consuming the generator in the same order.
fn importance_oracle(model: &TrainedModel, data: &EncodedDataset, repeats: usize, seed: u64) -> Vec<f64> {
    let mse = |x: &Array2<f64>| -> f64 {
        let p = model.predict(x.view());
        p.iter().zip(&data.targets).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / p.len() as f64
    };
    let base = mse(&data.features);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut perm: Vec<usize> = (0..data.len()).collect();
    let mut raw = Vec::new();
    for j in 0..data.dim() {
        let mut increases = Vec::new();
        for _ in 0..repeats {
            perm.shuffle(&mut rng);
            let mut x = data.features.clone();
            for (i, &p) in perm.iter().enumerate() {
                x[[i, j]] = data.features[[p, j]];
            }
            increases.push(mse(&x) - base);
        }
        raw.push((increases.iter().sum::<f64>() / repeats as f64).max(0.0));
    }
    let top = raw.iter().copied().fold(0.0, f64::max);
    raw.iter().map(|r| r / top).collect()
}

#[test]
fn permutation_importance_matches_reimplementation() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let x = Array2::from_shape_fn((200, 4), |_| rng.random_range(-1.0..1.0));
    let t: Array1<f64> = x.rows().into_iter().map(|r| r[0] - 0.5 * r[1] * r[2]).collect();
    let names = (0..4).map(|i| format!("x{i}")).collect();
    let data = EncodedDataset::from_parts(names, x, t).unwrap();
    let model = train_mlp(&data, &ModelConfig { hidden_layers: vec![8], epochs: 30, seed: 2, ..Default::default() }).unwrap();
    let table = permutation_importance(&model, &data, 4, 99);
    let oracle = importance_oracle(&model, &data, 4, 99);
    for (a, b) in table.scores.iter().zip(&oracle) {
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }
    assert_eq!(table.scores.iter().copied().fold(0.0, f64::max), 1.0);
}

#[test]
fn planted_linear_target_is_learned() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let x = Array2::from_shape_fn((800, 3), |_| rng.random_range(-1.0..1.0));
    let t: Array1<f64> = x.rows().into_iter().map(|r| 2.0 * r[0] - r[1] + 0.5 * r[2] + 1.0).collect();
    let data = EncodedDataset::from_parts((0..3).map(|i| format!("x{i}")).collect(), x, t).unwrap();
    let eval = evaluate_protocol(&data, &ModelConfig { seed: 12, ..Default::default() }).unwrap();
    assert!(eval.metrics.r2_validation.unwrap() > 0.99, "{:?}", eval.metrics);
    assert!(eval.metrics.r2_cv.unwrap() > 0.99, "{:?}", eval.metrics);
}

#[test]
fn encoded_width_counts_distinct_values() {
    let joined = planted_joined(13, None, 0.8, 0.4);
    let rows: Vec<&JoinedRecord> = joined.iter().filter(|r| r.surveillance_volume > r.service_volume).collect();
    let distinct = |f: &dyn Fn(&JoinedRecord) -> String| rows.iter().map(|r| f(r)).collect::<BTreeSet<_>>().len();
    let width = distinct(&|r| r.origin.clone())
        + distinct(&|r| r.program.clone())
        + distinct(&|r| r.class.name().to_string())
        + distinct(&|r| r.key.label())
        + 2;
    let data = encode_dataset(&joined, TargetKind::Surveillance, &EncodingConfig::default()).unwrap();
    assert_eq!(data.dim(), width);
    assert_eq!(data.len(), rows.len());
    for (i, r) in rows.iter().enumerate() {
        assert_eq!(data.targets[i], (r.surveillance_volume as f64 + 1.0).log10());
        assert!(data.features.row(i).iter().filter(|v| **v == 1.0).count() >= 4);
    }
}

#[test]
fn lowess_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..200 {
        let n = rng.random_range(20..120);
        let points: Vec<(f64, f64)> = (0..n)
            .map(|_| {
                let x: f64 = rng.random_range(-3.0..3.0);
                let spike = if rng.random_bool(0.05) { 8.0 } else { 0.0 };
                (x, x * x + rng.random_range(-0.5..0.5) + spike)
            })
            .collect();
        let config = LowessConfig { span: rng.random_range(0.3..1.0), robustness_iters: rng.random_range(0..6) };
        let got = lowess(&points, &config).unwrap();
        let want = lowess_oracle(&points, config.span, config.robustness_iters);
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-9, "{g} vs {w}");
        }
    }
}
