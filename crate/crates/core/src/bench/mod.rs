//! Benchmark corpus, the two baseline fuzzers, and seeded campaigns
//! comparing them with TDS-guided search.

use std::collections::BTreeSet;
use std::fmt::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::exec::ExecutionTrace;
use crate::ga::{search, Breeding, GaConfig, GaError, GaResult, Grammar, Scoring, TdsScoring};
use crate::lang::{parse_program, vulnerable_statements, Location, ParseError, Program};
use crate::taint::{
    compute_taint, dedupe_tds, derive_input_regex, select_tds, tds_for_vulnerability, InputPatterns, RegexConfig,
    TaintEnv, TaintError, Tds,
};

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Metadata { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Parse { path: PathBuf, source: ParseError },
    #[error("no benchmark cases in {0}")]
    NoCases(PathBuf),
    #[error("location {0} has no TDS: not input-reachable")]
    NoTds(Location),
    #[error(transparent)]
    Taint(#[from] TaintError),
    #[error(transparent)]
    Ga(#[from] GaError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    TdsGa,
    CoverageGa,
    Random,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::TdsGa, Method::CoverageGa, Method::Random];

    pub fn name(self) -> &'static str {
        match self {
            Method::TdsGa => "tds-ga",
            Method::CoverageGa => "coverage-ga",
            Method::Random => "random",
        }
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown method `{s}` (expected tds-ga, coverage-ga or random)"))
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CaseMeta {
    name: String,
    source: PathBuf,
    constraint: String,
    vulnerable_location: u32,
    reference_tds: Vec<u32>,
}

#[derive(Debug, Clone)]
pub struct BenchmarkCase {
    pub name: String,
    pub source_path: PathBuf,
    pub constraint: String,
    pub vulnerable_location: Location,
    pub reference_tds: Tds,
    pub program: Program,
}

/// Loads one case from its metadata file; the source path is relative to it.
pub fn load_case(meta_path: &Path) -> Result<BenchmarkCase, BenchError> {
    let read = |p: &Path| {
        std::fs::read_to_string(p).map_err(|source| BenchError::Io {
            path: p.to_path_buf(),
            source,
        })
    };
    let bad = |message: String| BenchError::Metadata {
        path: meta_path.to_path_buf(),
        message,
    };
    let meta: CaseMeta = toml::from_str(&read(meta_path)?).map_err(|e| bad(e.to_string()))?;
    let source_path = meta_path.parent().unwrap_or(Path::new(".")).join(&meta.source);
    let program = parse_program(&read(&source_path)?).map_err(|source| BenchError::Parse {
        path: source_path.clone(),
        source,
    })?;
    let vulnerable_location = Location(meta.vulnerable_location);
    if !vulnerable_statements(&program).contains(&vulnerable_location) {
        return Err(bad(format!("line {vulnerable_location} is not a vulnerable statement")));
    }
    let reference_tds = Tds::from_lines(&meta.reference_tds).map_err(|e| bad(e.to_string()))?;
    if reference_tds.target() != vulnerable_location {
        return Err(bad("reference TDS does not end at the vulnerable location".into()));
    }
    Ok(BenchmarkCase {
        name: meta.name,
        source_path,
        constraint: meta.constraint,
        vulnerable_location,
        reference_tds,
        program,
    })
}

/// Every `*.toml` case in `dir`, sorted by file name.
pub fn load_corpus(dir: &Path) -> Result<Vec<BenchmarkCase>, BenchError> {
    let entries = std::fs::read_dir(dir).map_err(|source| BenchError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut metas: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    metas.sort();
    if metas.is_empty() {
        return Err(BenchError::NoCases(dir.to_path_buf()));
    }
    metas.iter().map(|m| load_case(m)).collect()
}

/// Static results feeding a fuzzing run for one vulnerable location.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub env: TaintEnv,
    pub target: Location,
    pub tds: Tds,
    pub tds_dedup: Tds,
    pub patterns: InputPatterns,
}

pub fn prepare(p: &Program, target: Location, regex: &RegexConfig) -> Result<Prepared, BenchError> {
    let env = compute_taint(p)?;
    prepare_with_env(p, env, target, regex)
}

pub fn prepare_with_env(p: &Program, env: TaintEnv, target: Location, regex: &RegexConfig) -> Result<Prepared, BenchError> {
    let set = tds_for_vulnerability(&env, target)?;
    let tds = select_tds(&set).map_err(|_| BenchError::NoTds(target))?;
    let patterns = derive_input_regex(p, &env, &tds, regex);
    Ok(Prepared {
        tds_dedup: dedupe_tds(&tds),
        env,
        target,
        tds,
        patterns,
    })
}

/// Weights of the coverage-guided fitness.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoverageWeights {
    pub alpha: f64,
    pub beta: f64,
}

impl Default for CoverageWeights {
    fn default() -> Self {
        CoverageWeights { alpha: 1.0, beta: 10.0 }
    }
}

/// `alpha * covered / total + beta * vuln_hits`
pub fn coverage_fitness(covered: usize, total: usize, vuln_hits: u64, w: CoverageWeights) -> f64 {
    w.alpha * covered as f64 / total.max(1) as f64 + w.beta * vuln_hits as f64
}

struct CoverageScoring {
    all: BTreeSet<Location>,
    vuln: Location,
    weights: CoverageWeights,
}

impl Scoring for CoverageScoring {
    fn instrumented(&self) -> &BTreeSet<Location> {
        &self.all
    }

    fn score(&self, traces: &[ExecutionTrace]) -> Vec<f64> {
        traces
            .iter()
            .map(|t| {
                let covered = t.frequencies.values().filter(|&&c| c > 0).count();
                let hits = t.frequencies.get(&self.vuln).copied().unwrap_or(0);
                coverage_fitness(covered, self.all.len(), hits, self.weights)
            })
            .collect()
    }
}

struct NoScoring(BTreeSet<Location>);

impl Scoring for NoScoring {
    fn instrumented(&self) -> &BTreeSet<Location> {
        &self.0
    }

    fn score(&self, traces: &[ExecutionTrace]) -> Vec<f64> {
        vec![0.0; traces.len()]
    }
}

/// Fresh samples from the input grammar each iteration, one batch of
/// `population_size` per iteration.
pub fn random_fuzz(p: &Program, patterns: &[String], cfg: &GaConfig) -> Result<GaResult, GaError> {
    let grammar = Grammar::new(patterns, cfg)?;
    search(p, &grammar, &NoScoring(BTreeSet::new()), cfg, Breeding::Resample)
}

/// The same genetic loop with a fitness rewarding statement coverage and
/// executions of the vulnerable statement.
pub fn coverage_ga(
    p: &Program,
    patterns: &[String],
    vuln: Location,
    weights: CoverageWeights,
    cfg: &GaConfig,
) -> Result<GaResult, GaError> {
    let grammar = Grammar::new(patterns, cfg)?;
    let scoring = CoverageScoring {
        all: p.all_locations().into_iter().collect(),
        vuln,
        weights,
    };
    search(p, &grammar, &scoring, cfg, Breeding::Evolve)
}

pub fn run_method(
    p: &Program,
    prepared: &Prepared,
    method: Method,
    weights: CoverageWeights,
    cfg: &GaConfig,
) -> Result<GaResult, GaError> {
    let patterns = &prepared.patterns.patterns;
    match method {
        Method::TdsGa => {
            let grammar = Grammar::new(patterns, cfg)?;
            search(p, &grammar, &TdsScoring::new(&prepared.tds_dedup), cfg, Breeding::Evolve)
        }
        Method::CoverageGa => coverage_ga(p, patterns, prepared.target, weights, cfg),
        Method::Random => random_fuzz(p, patterns, cfg),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub seed: u64,
    /// Generations to the first crash; `None` when the threshold was hit.
    pub generations: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignStats {
    pub case: String,
    pub method: Method,
    pub runs: usize,
    pub outcomes: Vec<RunOutcome>,
    pub successes: usize,
    /// Mean generations over successful runs.
    pub mean_generations: Option<f64>,
}

impl CampaignStats {
    fn from_outcomes(case: &str, method: Method, outcomes: Vec<RunOutcome>) -> Self {
        let gens: Vec<usize> = outcomes.iter().filter_map(|o| o.generations).collect();
        CampaignStats {
            case: case.to_string(),
            method,
            runs: outcomes.len(),
            successes: gens.len(),
            mean_generations: (!gens.is_empty()).then(|| gens.iter().sum::<usize>() as f64 / gens.len() as f64),
            outcomes,
        }
    }

    pub fn all_succeeded(&self) -> bool {
        self.successes == self.runs
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignConfig {
    pub runs: usize,
    pub seed_base: u64,
    pub ga: GaConfig,
    pub coverage: CoverageWeights,
    pub regex: RegexConfig,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        CampaignConfig {
            runs: 20,
            seed_base: 0,
            ga: GaConfig::default(),
            coverage: CoverageWeights::default(),
            regex: RegexConfig::default(),
        }
    }
}

/// Runs `runs` independent searches with seeds `seed_base + i`.
pub fn run_campaign(case: &BenchmarkCase, method: Method, cc: &CampaignConfig) -> Result<CampaignStats, BenchError> {
    if cc.runs == 0 {
        return Err(GaError::InvalidConfig("runs must be at least 1".into()).into());
    }
    let prepared = prepare(&case.program, case.vulnerable_location, &cc.regex)?;
    let outcomes = (0..cc.runs as u64)
        .into_par_iter()
        .map(|i| {
            let seed = cc.seed_base + i;
            let cfg = GaConfig {
                rng_seed: seed,
                ..cc.ga.clone()
            };
            let r = run_method(&case.program, &prepared, method, cc.coverage, &cfg)?;
            Ok(RunOutcome {
                seed,
                generations: r.crashed().then_some(r.generation),
            })
        })
        .collect::<Result<Vec<_>, GaError>>()?;
    Ok(CampaignStats::from_outcomes(&case.name, method, outcomes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub case: String,
    pub constraint: String,
    pub stats: Vec<CampaignStats>,
}

impl ComparisonRow {
    pub fn get(&self, m: Method) -> Option<&CampaignStats> {
        self.stats.iter().find(|s| s.method == m)
    }
}

pub fn compare(cases: &[BenchmarkCase], cc: &CampaignConfig) -> Result<Vec<ComparisonRow>, BenchError> {
    cases
        .iter()
        .map(|c| {
            let stats = Method::ALL
                .iter()
                .map(|&m| run_campaign(c, m, cc))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(ComparisonRow {
                case: c.name.clone(),
                constraint: c.constraint.clone(),
                stats,
            })
        })
        .collect()
}

fn cell(s: Option<&CampaignStats>) -> String {
    match s {
        Some(s) => match s.mean_generations {
            Some(m) => format!("{m:.1} ({}/{})", s.successes, s.runs),
            None => format!("DNF (0/{})", s.runs),
        },
        None => "-".into(),
    }
}

pub fn render_markdown(rows: &[ComparisonRow]) -> String {
    let mut out = String::from("| case | constraints | TDS+GA | coverage+GA | random |\n|---|---|---|---|---|\n");
    for r in rows {
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} | {} |",
            r.case,
            r.constraint.replace('|', "\\|"),
            cell(r.get(Method::TdsGa)),
            cell(r.get(Method::CoverageGa)),
            cell(r.get(Method::Random))
        );
    }
    let runs = rows.iter().flat_map(|r| &r.stats).map(|s| s.runs).max().unwrap_or(0);
    if runs == 1 {
        out.push_str("\nSingle run per cell: figures are not statistically meaningful.\n");
    }
    out
}

pub fn render_csv(rows: &[ComparisonRow]) -> String {
    let mut out = String::from(
        "case,constraint,tds_ga_mean,tds_ga_successes,coverage_ga_mean,coverage_ga_successes,random_mean,random_successes,runs\n",
    );
    for r in rows {
        let _ = write!(out, "{},\"{}\"", r.case, r.constraint.replace('"', "\"\""));
        let mut runs = 0;
        for m in Method::ALL {
            match r.get(m) {
                Some(s) => {
                    runs = s.runs;
                    let mean = s.mean_generations.map(|m| format!("{m:.2}")).unwrap_or_default();
                    let _ = write!(out, ",{mean},{}", s.successes);
                }
                None => out.push_str(",,"),
            }
        }
        let _ = writeln!(out, ",{runs}");
    }
    out
}
