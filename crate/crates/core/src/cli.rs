//! Command-line pipeline: ingest, validate, join, metrics, analyses and
//! synthetic scenarios, each writing data files plus a run manifest.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::distribution::{share_pairs, smooth_pairs, DistributionConfig, LowessConfig};
use crate::excess::{excess_report_from_joined, excess_timeline, TieRule, TimelineConfig};
use crate::index::{join_many, Index, JoinedRecord, RecordKind, YearRange};
use crate::ingest::{parse_table, serialize_index, ParseOptions, ParseReport, SynonymMap};
use crate::metrics::{derived_measures_with, program_domain_shares, RemainderConvention};
use crate::model::{run_dual_model, DualModelConfig};
use crate::synth::{aggregate, generate_detailed, ground_truth_susk, write_persons, ScenarioConfig};

pub const MANIFEST: &str = "run_manifest.json";

#[derive(Debug, Parser)]
#[command(name = "susk", version, about = "Reconcile service-program counts against surveillance counts")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    /// Parse and check input tables.
    Validate,
    /// Pair service aggregates with surveillance aggregates.
    Join,
    /// Domain shares, surveillance shares and remainders.
    Metrics,
    /// Per (program, class) counts of aggregates exceeding surveillance.
    Excess,
    /// Yearly exceeding-aggregate counts with a smoothed trend.
    Timeline,
    /// Domain share comparison with off-trend flags.
    Distribution,
    /// Paired regression models, r² and importance differences.
    Model,
    /// Generate a synthetic cohort and its aggregate tables.
    Synth,
    /// Every analysis; synthesizes inputs from the scenario when none are given.
    All,
}

#[derive(Debug, Clone, Default, clap::Args)]
pub struct Flags {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed for model and synth runs.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// Surveillance program name.
    #[arg(long, global = true)]
    pub surveillance: Option<String>,
    /// Comma-separated service program names.
    #[arg(long, global = true, value_delimiter = ',')]
    pub services: Option<Vec<String>>,
    /// Aggregate table; repeat for several files.
    #[arg(long = "input", global = true)]
    pub inputs: Vec<PathBuf>,
    /// Label synonym table.
    #[arg(long, global = true)]
    pub synonyms: Option<PathBuf>,
    /// Synthetic scenario TOML.
    #[arg(long, global = true)]
    pub scenario: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    pub years: YearRange,
    pub tie: TieRule,
    pub remainder: RemainderConvention,
    pub smoothing: LowessConfig,
    /// Band half-width for share-pair flags.
    pub k: f64,
    pub model: DualModelConfig,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            years: YearRange::default(),
            tie: TieRule::default(),
            remainder: RemainderConvention::default(),
            smoothing: LowessConfig::default(),
            k: DistributionConfig::default().k,
            model: DualModelConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub inputs: Vec<PathBuf>,
    pub synonyms: Option<PathBuf>,
    pub scenario: Option<PathBuf>,
    pub surveillance: String,
    /// Empty means every service program in the index.
    pub services: Vec<String>,
    pub out_dir: PathBuf,
    pub seed: Option<u64>,
    pub params: Params,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            inputs: Vec::new(),
            synonyms: None,
            scenario: None,
            surveillance: "Surveillance".into(),
            services: Vec::new(),
            out_dir: PathBuf::from("out"),
            seed: None,
            params: Params::default(),
        }
    }
}

/// How a run ended; maps onto the process exit status.
#[derive(Debug)]
pub enum Failure {
    /// Bad flags or configuration (exit 2).
    Usage(String),
    /// Inputs failed validation (exit 1).
    Validation(String),
    /// An analysis step failed (exit 1).
    Analysis(anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Validation(_) | Failure::Analysis(_) => 1,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "usage error: {m}"),
            Failure::Validation(m) => write!(f, "validation failed: {m}"),
            Failure::Analysis(e) => write!(f, "{e:#}"),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Analysis(e)
    }
}

/// Merges the config file (if any) with flag overrides.
pub fn resolve_config(flags: &Flags) -> Result<RunConfig, Failure> {
    let mut config = match &flags.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::Usage(format!("--config {}: {e}", path.display())))?;
            toml::from_str(&text).map_err(|e| Failure::Usage(format!("--config {}: {e}", path.display())))?
        }
        None => RunConfig::default(),
    };
    if !flags.inputs.is_empty() {
        config.inputs = flags.inputs.clone();
    }
    if let Some(v) = &flags.synonyms {
        config.synonyms = Some(v.clone());
    }
    if let Some(v) = &flags.scenario {
        config.scenario = Some(v.clone());
    }
    if let Some(v) = &flags.surveillance {
        config.surveillance = v.clone();
    }
    if let Some(v) = &flags.services {
        config.services = v.iter().map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect();
    }
    if let Some(v) = &flags.out_dir {
        config.out_dir = v.clone();
    }
    if flags.seed.is_some() {
        config.seed = flags.seed;
    }
    for path in config.inputs.iter().chain(&config.synonyms).chain(&config.scenario) {
        if !path.is_file() {
            return Err(Failure::Usage(format!("input file {} does not exist", path.display())));
        }
    }
    Ok(config)
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Serialize)]
struct FileDigest {
    path: String,
    sha256: String,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: Command,
    seed: Option<u64>,
    surveillance: &'a str,
    services: &'a [String],
    inputs: Vec<FileDigest>,
    parameters: &'a Params,
    scenario: Option<&'a ScenarioConfig>,
    outputs: Vec<FileDigest>,
}

/// Output directory writer; every file is written to a temporary file and
/// renamed into place.
struct Outputs {
    dir: PathBuf,
    written: Vec<FileDigest>,
}

impl Outputs {
    fn new(dir: &Path) -> anyhow::Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Outputs {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> anyhow::Result<()> {
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir)?;
        tmp.write_all(bytes)?;
        tmp.as_file().sync_all()?;
        tmp.persist(self.dir.join(name))
            .with_context(|| format!("writing {name}"))?;
        self.written.retain(|f| f.path != name);
        self.written.push(FileDigest {
            path: name.to_string(),
            sha256: sha256_hex(bytes),
        });
        Ok(())
    }

    fn csv(&mut self, name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> anyhow::Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)?;
        for row in rows {
            w.write_record(&row)?;
        }
        let bytes = w.into_inner().map_err(|e| anyhow!("{e}"))?;
        self.write(name, &bytes)
    }
}

struct Loaded {
    index: Index,
    report: ParseReport,
    inputs: Vec<FileDigest>,
}

fn load_inputs(config: &RunConfig) -> Result<Loaded, Failure> {
    if config.inputs.is_empty() {
        return Err(Failure::Usage("no --input given".into()));
    }
    let mut synonyms = SynonymMap::with_defaults();
    let mut inputs = Vec::new();
    if let Some(path) = &config.synonyms {
        let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        synonyms
            .extend_from_reader(bytes.as_slice())
            .map_err(|e| Failure::Validation(format!("{}: {e}", path.display())))?;
        inputs.push(FileDigest {
            path: path.display().to_string(),
            sha256: sha256_hex(&bytes),
        });
    }
    let options = ParseOptions {
        synonyms,
        years: config.params.years,
    };
    let mut records = Vec::new();
    let mut report = ParseReport::default();
    for path in &config.inputs {
        let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        let table = parse_table(bytes.as_slice(), &options)
            .map_err(|e| Failure::Validation(format!("{}: {e}", path.display())))?;
        report.data_rows += table.report.data_rows;
        report.accepted += table.report.accepted;
        report.rejected.extend(table.report.rejected);
        records.extend(table.records);
        inputs.push(FileDigest {
            path: path.display().to_string(),
            sha256: sha256_hex(&bytes),
        });
    }
    let index = Index::build_with(records, &config.params.years).map_err(|e| Failure::Validation(e.to_string()))?;
    Ok(Loaded { index, report, inputs })
}

fn service_programs(config: &RunConfig, index: &Index) -> Result<Vec<String>, Failure> {
    match index.program_kind(&config.surveillance) {
        Some(RecordKind::Surveillance) => {}
        Some(RecordKind::Service) => {
            return Err(Failure::Usage(format!("--surveillance {} names a service program", config.surveillance)))
        }
        None => return Err(Failure::Usage(format!("--surveillance {} is not in the inputs", config.surveillance))),
    }
    if config.services.is_empty() {
        return Ok(index
            .programs()
            .filter(|(_, kind)| *kind == RecordKind::Service)
            .map(|(name, _)| name.to_string())
            .collect());
    }
    for name in &config.services {
        if index.program_kind(name) != Some(RecordKind::Service) {
            return Err(Failure::Usage(format!("--services {name} is not a service program in the inputs")));
        }
    }
    Ok(config.services.clone())
}

fn require_seed(config: &RunConfig, command: Command) -> Result<u64, Failure> {
    config.seed.ok_or_else(|| {
        let name = serde_json::to_value(command).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
        Failure::Usage(format!("--seed is required for {name}"))
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn key_cells(key: &crate::index::DomainKey) -> [String; 2] {
    [key.domain_a().to_string(), key.domain_b().unwrap_or("").to_string()]
}

fn write_parse_report(out: &mut Outputs, report: &ParseReport) -> anyhow::Result<()> {
    out.csv(
        "parse_report.csv",
        &["line", "reason", "raw"],
        report
            .rejected
            .iter()
            .map(|r| vec![r.line.to_string(), r.reason.to_string(), r.raw.clone()]),
    )
}

fn write_join(out: &mut Outputs, joined: &[JoinedRecord], unmatched: &[crate::index::IndexKey]) -> anyhow::Result<()> {
    out.csv(
        "joined.csv",
        &["origin", "program", "year", "class", "domain_a", "domain_b", "service_volume", "surveillance_volume"],
        joined.iter().map(|r| {
            let [a, b] = key_cells(&r.key);
            vec![
                r.origin.clone(),
                r.program.clone(),
                r.year.to_string(),
                r.class.to_string(),
                a,
                b,
                r.service_volume.to_string(),
                r.surveillance_volume.to_string(),
            ]
        }),
    )?;
    out.csv(
        "unmatched.csv",
        &["program", "year", "class", "domain_a", "domain_b"],
        unmatched.iter().map(|k| {
            let [a, b] = key_cells(&k.key);
            vec![k.program.clone(), k.year.to_string(), k.class.to_string(), a, b]
        }),
    )
}

fn write_metrics(out: &mut Outputs, index: &Index, programs: &[String], surveillance: &str, joined: &[JoinedRecord], convention: RemainderConvention) -> anyhow::Result<()> {
    let mut rows = Vec::new();
    for program in std::iter::once(surveillance).chain(programs.iter().map(String::as_str)) {
        for table in program_domain_shares(index, program) {
            for (key, share) in &table.entries {
                let [a, b] = key_cells(key);
                rows.push(vec![
                    table.program.clone(),
                    table.year.to_string(),
                    table.class.to_string(),
                    a,
                    b,
                    table.total.to_string(),
                    share.to_string(),
                ]);
            }
        }
    }
    out.csv("domain_shares.csv", &["program", "year", "class", "domain_a", "domain_b", "scope_total", "share"], rows)?;
    out.csv(
        "derived_measures.csv",
        &[
            "program",
            "year",
            "class",
            "domain_a",
            "domain_b",
            "service_volume",
            "surveillance_volume",
            "surveillance_share",
            "surveillance_remainder",
        ],
        joined.iter().map(|r| {
            let m = derived_measures_with(r, convention);
            let [a, b] = key_cells(&r.key);
            vec![
                r.program.clone(),
                r.year.to_string(),
                r.class.to_string(),
                a,
                b,
                r.service_volume.to_string(),
                r.surveillance_volume.to_string(),
                if m.surveillance_share.is_unbounded() { "inf".to_string() } else { m.surveillance_share.as_f64().to_string() },
                m.surveillance_remainder.to_string(),
            ]
        }),
    )
}

fn write_excess(out: &mut Outputs, joined: &[JoinedRecord], tie: TieRule) -> anyhow::Result<()> {
    out.csv(
        "excess_report.csv",
        &[
            "program",
            "class",
            "aggregates",
            "exceeding",
            "excess_candidates",
            "case_volume",
            "overage",
            "excess_share",
            "volume_share",
        ],
        excess_report_from_joined(joined, tie).into_iter().map(|r| {
            vec![
                r.program.clone(),
                r.class.to_string(),
                r.aggregates.to_string(),
                r.exceeding.to_string(),
                r.excess_candidates.to_string(),
                r.case_volume.to_string(),
                r.overage.to_string(),
                r.excess_share_display(),
                r.volume_share_display(),
            ]
        }),
    )
}

fn write_timeline(out: &mut Outputs, index: &Index, programs: &[String], surveillance: &str, params: &Params) -> anyhow::Result<()> {
    let config = TimelineConfig {
        smoothing: params.smoothing,
        tie: params.tie,
    };
    let points = excess_timeline(index, programs, surveillance, &config)?;
    out.csv(
        "timeline.csv",
        &["series", "class", "year", "exceed_count", "smoothed"],
        points.into_iter().map(|p| {
            vec![
                p.program.unwrap_or_else(|| "pooled".to_string()),
                p.class.to_string(),
                p.year.to_string(),
                p.exceed_count.to_string(),
                p.smoothed.to_string(),
            ]
        }),
    )
}

fn write_distribution(out: &mut Outputs, index: &Index, programs: &[String], surveillance: &str, params: &Params) -> anyhow::Result<()> {
    let mut pairs = Vec::new();
    for program in programs {
        pairs.extend(share_pairs(index, program, surveillance)?);
    }
    let config = DistributionConfig {
        smoothing: params.smoothing,
        k: params.k,
    };
    let smoothed = smooth_pairs(pairs, &config)?;
    out.csv(
        "share_pairs.csv",
        &["program", "year", "class", "domain_a", "domain_b", "surveillance_share", "service_share", "fitted", "residual", "flag"],
        smoothed.into_iter().map(|s| {
            let [a, b] = key_cells(&s.pair.key);
            vec![
                s.pair.program.clone(),
                s.pair.year.to_string(),
                s.pair.class.to_string(),
                a,
                b,
                s.pair.x.to_string(),
                s.pair.y.to_string(),
                fmt_opt(s.band.map(|b| b.fitted)),
                fmt_opt(s.band.map(|b| b.residual)),
                s.band.map(|b| b.flag.to_string()).unwrap_or_default(),
            ]
        }),
    )
}

fn write_model(out: &mut Outputs, joined: &[JoinedRecord], params: &Params, seed: u64) -> anyhow::Result<()> {
    let mut config = params.model.clone();
    config.model.seed = seed;
    let report = run_dual_model(joined, &config).context("model run")?;
    let metrics = serde_json::json!({
        "services": report.services.evaluation.metrics,
        "surveillance": report.surveillance.evaluation.metrics,
        "rows": report.services.evaluation.training_rows.len() + report.services.evaluation.evaluation_rows.len(),
    });
    let mut text = serde_json::to_string_pretty(&metrics)?;
    text.push('\n');
    out.write("model_metrics.json", text.as_bytes())?;
    let services = &report.services.importance;
    let surveillance = &report.surveillance.importance;
    out.csv(
        "importance.csv",
        &["feature", "services", "surveillance"],
        services.ranking().into_iter().map(|i| {
            let feature = &services.features[i];
            vec![
                feature.clone(),
                services.scores[i].to_string(),
                surveillance.score(feature).map(|s| s.to_string()).unwrap_or_default(),
            ]
        }),
    )?;
    out.csv(
        "importance_diff.csv",
        &["feature", "diff", "flag"],
        report
            .diff
            .entries
            .iter()
            .map(|e| vec![e.feature.clone(), e.diff.to_string(), e.flag.to_string()]),
    )
}

fn load_scenario(config: &RunConfig, seed: u64) -> Result<ScenarioConfig, Failure> {
    let mut scenario = match &config.scenario {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            toml::from_str::<ScenarioConfig>(&text)
                .map_err(|e| Failure::Usage(format!("--scenario {}: {e}", path.display())))?
        }
        None => ScenarioConfig::default(),
    };
    scenario.seed = seed;
    scenario
        .validate()
        .map_err(|e| Failure::Usage(format!("scenario: {e}")))?;
    if scenario.surveillance.name != config.surveillance && config.surveillance != RunConfig::default().surveillance {
        return Err(Failure::Usage(format!(
            "--surveillance {} does not match the scenario's {}",
            config.surveillance, scenario.surveillance.name
        )));
    }
    Ok(scenario)
}

/// Generates the scenario, writes its files and returns the aggregate index.
fn run_synth(out: &mut Outputs, scenario: &ScenarioConfig) -> Result<Index, Failure> {
    let cohort = generate_detailed(scenario).context("generating cohort")?;
    let records = aggregate(&cohort.persons, scenario);
    let index = Index::build_with(records, &scenario.years).context("indexing synthetic aggregates")?;

    let mut persons = Vec::new();
    write_persons(&cohort.persons, &mut persons).context("writing persons")?;
    out.write("persons.csv", &persons)?;
    let mut table = Vec::new();
    serialize_index(&index, &mut table).context("writing index")?;
    out.write("synthetic_index.csv", &table)?;

    let mut truth = Vec::new();
    for year in scenario.years.years() {
        for ((program, class, key), count) in ground_truth_susk(&cohort.persons, year, scenario) {
            let [a, b] = key_cells(&key);
            truth.push(vec![program, year.to_string(), class.to_string(), a, b, count.to_string()]);
        }
    }
    out.csv("susk_truth.csv", &["program", "year", "class", "domain_a", "domain_b", "susk"], truth)?;
    out.csv(
        "injections.csv",
        &["rule", "program", "class", "domain_a", "domain_b", "first_year", "last_year", "rate", "eligible", "converted"],
        scenario.injections.iter().zip(&cohort.outcomes).enumerate().map(|(i, (inj, o))| {
            vec![
                i.to_string(),
                inj.program.clone(),
                inj.class.to_string(),
                inj.key[0].clone(),
                inj.key.get(1).cloned().unwrap_or_default(),
                inj.years.first.to_string(),
                inj.years.last.to_string(),
                inj.rate.to_string(),
                o.eligible.to_string(),
                o.converted.to_string(),
            ]
        }),
    )?;
    Ok(index)
}

/// Runs one subcommand against a resolved configuration.
pub fn execute(command: Command, config: &RunConfig) -> Result<(), Failure> {
    let mut out = Outputs::new(&config.out_dir)?;
    let mut scenario = None;
    let needs_seed = matches!(command, Command::Model | Command::Synth | Command::All);
    let seed = if needs_seed { Some(require_seed(config, command)?) } else { config.seed };

    let (index, inputs) = if command == Command::Synth || (command == Command::All && config.inputs.is_empty()) {
        let s = load_scenario(config, seed.expect("seed checked"))?;
        let index = run_synth(&mut out, &s)?;
        scenario = Some(s);
        (index, Vec::new())
    } else {
        let loaded = match load_inputs(config) {
            Err(Failure::Validation(msg)) => {
                write_parse_report(&mut out, &ParseReport::default())?;
                return Err(Failure::Validation(msg));
            }
            other => other?,
        };
        write_parse_report(&mut out, &loaded.report)?;
        if command == Command::Validate || command == Command::All {
            let mut table = Vec::new();
            serialize_index(&loaded.index, &mut table).context("writing index")?;
            out.write("index.csv", &table)?;
        }
        if command == Command::Validate && !loaded.report.is_clean() {
            write_manifest(&mut out, command, config, seed, loaded.inputs, None)?;
            return Err(Failure::Validation(format!(
                "{} of {} rows quarantined; see parse_report.csv",
                loaded.report.rejected.len(),
                loaded.report.data_rows
            )));
        }
        (loaded.index, loaded.inputs)
    };

    if command != Command::Validate && command != Command::Synth {
        let programs = service_programs(config, &index)?;
        let join = join_many(&index, &programs, &config.surveillance).context("join")?;
        let params = &config.params;
        let all = command == Command::All;
        if all || command == Command::Join {
            write_join(&mut out, &join.joined, &join.unmatched.records)?;
        }
        if all || command == Command::Metrics {
            write_metrics(&mut out, &index, &programs, &config.surveillance, &join.joined, params.remainder)?;
        }
        if all || command == Command::Excess {
            write_excess(&mut out, &join.joined, params.tie)?;
        }
        if all || command == Command::Timeline {
            write_timeline(&mut out, &index, &programs, &config.surveillance, params)?;
        }
        if all || command == Command::Distribution {
            write_distribution(&mut out, &index, &programs, &config.surveillance, params)?;
        }
        if all || command == Command::Model {
            write_model(&mut out, &join.joined, params, seed.expect("seed checked"))?;
        }
    }
    write_manifest(&mut out, command, config, seed, inputs, scenario.as_ref())?;
    Ok(())
}

fn write_manifest(
    out: &mut Outputs,
    command: Command,
    config: &RunConfig,
    seed: Option<u64>,
    inputs: Vec<FileDigest>,
    scenario: Option<&ScenarioConfig>,
) -> anyhow::Result<()> {
    let mut outputs: Vec<FileDigest> = out
        .written
        .iter()
        .map(|f| FileDigest {
            path: f.path.clone(),
            sha256: f.sha256.clone(),
        })
        .collect();
    outputs.sort_by(|a, b| a.path.cmp(&b.path));
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        command,
        seed,
        surveillance: &config.surveillance,
        services: &config.services,
        inputs,
        parameters: &config.params,
        scenario,
        outputs,
    };
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    out.write(MANIFEST, text.as_bytes())
}

/// Parses `args` (program name first) and runs. Returns the exit status.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = resolve_config(&cli.flags).and_then(|config| execute(cli.command, &config));
    match result {
        Ok(()) => 0,
        Err(failure) => {
            eprintln!("susk: {failure}");
            failure.exit_code()
        }
    }
}
