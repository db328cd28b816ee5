mod common;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use sha2::{Digest, Sha256};

use susk::index::{AggregateClass, DomainKey};
use susk::synth::{aggregate, generate, ground_truth_susk};

use common::*;

fn susk(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_susk"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

fn read_dir(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect()
}

fn csv_rows(file: &Path) -> Vec<BTreeMap<String, String>> {
    csv::Reader::from_path(file).unwrap().deserialize().collect::<Result<_, _>>().unwrap()
}

fn small_model_config(dir: &Path, scenario: Option<&Path>) -> std::path::PathBuf {
    let mut text = String::new();
    if let Some(s) = scenario {
        text.push_str(&format!("scenario = {:?}\n", path(s)));
    }
    text.push_str("[params.model.model]\nhidden_layers = [8]\nepochs = 5\n");
    let file = dir.join("run.toml");
    fs::write(&file, text).unwrap();
    file
}

#[test]
fn excess_on_sample_counts() {
    let dir = tempfile::tempdir().unwrap();
    let input = fixture("sample_counts.csv");
    let before = fs::read(&input).unwrap();
    let out = dir.path().join("out");
    let run = susk(&["excess", "--input", path(&input), "--out-dir", path(&out)]);
    assert_eq!(run.status.code(), Some(0), "{}", String::from_utf8_lossy(&run.stderr));
    let rows = csv_rows(&out.join("excess_report.csv"));
    let rwa = rows.iter().find(|r| r["program"] == "RWA").unwrap();
    assert_eq!((rwa["class"].as_str(), rwa["exceeding"].as_str()), ("Race", "1"));
    for program in ["Medicaid", "SSDI"] {
        let row = rows.iter().find(|r| r["program"] == program).unwrap();
        assert_eq!(row["exceeding"], "0");
    }
    assert_eq!(fs::read(&input).unwrap(), before);
}

#[test]
fn manifest_lists_every_output_with_digest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let input = fixture("sample_counts.csv");
    let run = susk(&["all", "--seed", "3", "--input", path(&input), "--out-dir", path(&out), "--config", path(&small_model_config(dir.path(), None))]);
    assert_eq!(run.status.code(), Some(0), "{}", String::from_utf8_lossy(&run.stderr));
    let files = read_dir(&out);
    let manifest: serde_json::Value = serde_json::from_slice(&files["run_manifest.json"]).unwrap();
    let listed: BTreeMap<String, String> = manifest["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|o| (o["path"].as_str().unwrap().to_string(), o["sha256"].as_str().unwrap().to_string()))
        .collect();
    let on_disk: BTreeMap<String, String> = files
        .iter()
        .filter(|(name, _)| *name != "run_manifest.json")
        .map(|(name, bytes)| (name.clone(), hex::encode(Sha256::digest(bytes))))
        .collect();
    assert_eq!(listed, on_disk);
    assert_eq!(manifest["seed"], 3);
    assert_eq!(manifest["inputs"][0]["sha256"], hex::encode(Sha256::digest(fs::read(&input).unwrap())));
    for name in ["excess_report.csv", "model_metrics.json", "importance_diff.csv", "share_pairs.csv", "timeline.csv"] {
        assert!(listed.contains_key(name), "{name} missing");
    }
}

#[test]
fn all_is_byte_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("scenario.toml");
    fs::write(&scenario, "population = 2000\n").unwrap();
    let config = small_model_config(dir.path(), Some(&scenario));
    let mut outputs = Vec::new();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        let run = susk(&["all", "--seed", "21", "--config", path(&config), "--out-dir", path(&out)]);
        assert_eq!(run.status.code(), Some(0), "{}", String::from_utf8_lossy(&run.stderr));
        outputs.push(read_dir(&out));
    }
    assert_eq!(outputs[0], outputs[1]);
    let other = dir.path().join("c");
    susk(&["all", "--seed", "22", "--config", path(&config), "--out-dir", path(&other)]);
    assert_ne!(read_dir(&other)["persons.csv"], outputs[0]["persons.csv"]);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let input = fixture("sample_counts.csv");
    assert_eq!(susk(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(susk(&["excess", "--seed", "many"]).status.code(), Some(2));
    let missing_seed = susk(&["model", "--input", path(&input), "--out-dir", path(&out)]);
    assert_eq!(missing_seed.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing_seed.stderr).contains("--seed"));
    let absent = susk(&["excess", "--input", "/nonexistent/table.csv", "--out-dir", path(&out)]);
    assert_eq!(absent.status.code(), Some(2));

    let bad = dir.path().join("bad.csv");
    fs::write(
        &bad,
        "origin,program,kind,year,class,domain_a,domain_b,volume\nCMS,Medicare,service,2010,Race,Black,,-5\n",
    )
    .unwrap();
    let run = susk(&["validate", "--input", path(&bad), "--out-dir", path(&out)]);
    assert_eq!(run.status.code(), Some(1));
    let report = csv_rows(&out.join("parse_report.csv"));
    assert_eq!(report.len(), 1);
}

#[test]
fn synth_then_excess_matches_ground_truth() {
    let dir = tempfile::tempdir().unwrap();
    let mut scenario = designated_scenario(20_000, 31);
    let file = dir.path().join("scenario.toml");
    fs::write(&file, toml::to_string(&scenario).unwrap()).unwrap();
    let synth_out = dir.path().join("synth");
    let run = susk(&["synth", "--seed", "31", "--scenario", path(&file), "--out-dir", path(&synth_out)]);
    assert_eq!(run.status.code(), Some(0), "{}", String::from_utf8_lossy(&run.stderr));
    let excess_out = dir.path().join("excess");
    let index_file = synth_out.join("synthetic_index.csv");
    let run = susk(&["excess", "--input", path(&index_file), "--out-dir", path(&excess_out)]);
    assert_eq!(run.status.code(), Some(0), "{}", String::from_utf8_lossy(&run.stderr));

    scenario.seed = 31;
    let persons = generate(&scenario).unwrap();
    let volumes: BTreeMap<(String, i32, AggregateClass, DomainKey), u64> = aggregate(&persons, &scenario)
        .into_iter()
        .map(|r| ((r.program, r.year, r.class, r.key), r.volume))
        .collect();
    // Under full capture only cells holding SUSK persons can exceed.
    let mut expected: BTreeMap<(String, String), u64> = BTreeMap::new();
    for year in scenario.years.years() {
        for ((program, class, key), susk) in ground_truth_susk(&persons, year, &scenario) {
            let surveillance = volumes.get(&("Surveillance".to_string(), year, class, key.clone())).copied().unwrap_or(0);
            let service = volumes[&(program.clone(), year, class, key)];
            assert!(service >= susk);
            if service > surveillance {
                *expected.entry((program, class.to_string())).or_default() += 1;
            }
        }
    }
    let rows = csv_rows(&excess_out.join("excess_report.csv"));
    let reported: BTreeMap<(String, String), u64> = rows
        .iter()
        .filter(|r| r["exceeding"] != "0")
        .map(|r| ((r["program"].clone(), r["class"].clone()), r["exceeding"].parse().unwrap()))
        .collect();
    assert_eq!(reported, expected);
    let designated: u64 = expected.values().sum();
    assert_eq!(designated, DESIGNATED_CELLS.len() as u64);
}
