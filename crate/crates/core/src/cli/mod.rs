//! The `tdsfuzz` command line.
//!
//! Exit codes: 0 crash found (or command succeeded), 1 runtime error,
//! 2 usage or parse error, 3 generation threshold exhausted, 4 the target
//! has no TDS (not input-reachable).

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bench::{self, BenchError, CampaignConfig, CoverageWeights, Method, Prepared};
use crate::exec::CrashReport;
use crate::ga::{GaConfig, GaResult, Individual, Status};
use crate::lang::{parse_program, vulnerable_statements, Location, Program};
use crate::taint::{compute_taint, tds_for_vulnerability, RegexConfig, TaintEnv};

pub const SEED_ENV: &str = "TDSFUZZ_SEED";

pub const EXIT_CRASH: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_EXHAUSTED: i32 = 3;
pub const EXIT_NO_TDS: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "tdsfuzz", version, about = "Taint-guided genetic fuzzing for MiniC buffer overflows")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// List vulnerable statements and the TDS reaching each.
    Analyze {
        file: PathBuf,
        /// Write the vulnerability list and taint environment as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Search for an input that overflows a buffer at the target statement.
    Fuzz {
        file: PathBuf,
        /// Line of the vulnerable statement (default: the one with most TDS).
        #[arg(long)]
        target: Option<u32>,
        /// TOML or JSON file with GA settings.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "tds-ga")]
        method: Method,
        /// Write the run manifest as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
        /// Write the crash report as JSON.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Run every method on every case of a corpus directory.
    Compare {
        dir: PathBuf,
        #[arg(long, default_value_t = 20)]
        runs: usize,
        /// First seed; run i uses seed + i.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        json: Option<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Re-run a fuzzing manifest and check that the outcome is identical.
    Replay { manifest: PathBuf },
}

/// Everything needed to repeat a fuzzing run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub program: String,
    pub program_sha256: String,
    pub method: Method,
    pub target: Location,
    pub tds: Vec<u32>,
    pub tds_dedup: Vec<u32>,
    pub patterns: Vec<String>,
    pub config: GaConfig,
    pub coverage: CoverageWeights,
    pub regex: RegexConfig,
    pub rng_seed: u64,
    pub outcome: Outcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outcome {
    pub status: Status,
    pub generation: usize,
    pub executions: u64,
    pub individual: Individual,
    pub best_fitness_history: Vec<f64>,
    pub crash_report: Option<CrashReport>,
}

impl From<GaResult> for Outcome {
    fn from(r: GaResult) -> Self {
        Outcome {
            status: r.status,
            generation: r.generation,
            executions: r.executions,
            individual: r.individual,
            best_fitness_history: r.best_fitness_history,
            crash_report: r.crash_report,
        }
    }
}

struct Failure {
    code: i32,
    message: String,
}

fn fail(code: i32, message: impl std::fmt::Display) -> Failure {
    Failure {
        code,
        message: message.to_string(),
    }
}

type CliResult = Result<i32, Failure>;

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = if e.use_stderr() {
                write!(err, "{e}")
            } else {
                write!(out, "{e}")
            };
            return code;
        }
    };
    let seed_env = std::env::var(SEED_ENV).ok();
    match dispatch(cli.command, seed_env.as_deref(), out) {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

fn dispatch(cmd: Command, seed_env: Option<&str>, out: &mut dyn Write) -> CliResult {
    match cmd {
        Command::Analyze { file, json } => analyze(&file, json.as_deref(), out),
        Command::Fuzz {
            file,
            target,
            config,
            seed,
            method,
            json,
            report,
        } => {
            let cfg = resolve_config(config.as_deref(), seed, seed_env)?;
            fuzz(&file, target, method, cfg, json.as_deref(), report.as_deref(), out)
        }
        Command::Compare {
            dir,
            runs,
            seed,
            config,
            json,
            csv,
        } => {
            let cfg = resolve_config(config.as_deref(), seed, seed_env)?;
            compare(&dir, runs, cfg, json.as_deref(), csv.as_deref(), out)
        }
        Command::Replay { manifest } => replay(&manifest, out),
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| fail(EXIT_ERROR, format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    std::fs::write(path, contents).map_err(|e| fail(EXIT_ERROR, format!("{}: {e}", path.display())))
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serialisable");
    s.push('\n');
    s
}

fn load_program(path: &Path) -> Result<(String, Program), Failure> {
    let src = read(path)?;
    let p = parse_program(&src).map_err(|e| fail(EXIT_USAGE, format!("{}:{e}", path.display())))?;
    Ok((src, p))
}

/// Settings from `--config`, with the seed taken from the flag, then the
/// environment, then the file.
pub fn load_config(path: Option<&Path>) -> Result<GaConfig, String> {
    let Some(path) = path else {
        return Ok(GaConfig::default());
    };
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let cfg: GaConfig = if path.extension().is_some_and(|x| x == "json") {
        serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?
    } else {
        toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?
    };
    Ok(cfg)
}

fn resolve_config(path: Option<&Path>, seed: Option<u64>, seed_env: Option<&str>) -> Result<GaConfig, Failure> {
    let mut cfg = load_config(path).map_err(|m| fail(EXIT_USAGE, m))?;
    let env_seed = match seed_env {
        Some(s) => Some(
            s.trim()
                .parse::<u64>()
                .map_err(|_| fail(EXIT_USAGE, format!("{SEED_ENV}={s} is not an unsigned integer")))?,
        ),
        None => None,
    };
    if let Some(s) = seed.or(env_seed) {
        cfg.rng_seed = s;
    }
    cfg.validate().map_err(|e| fail(EXIT_USAGE, e))?;
    Ok(cfg)
}

#[derive(Serialize)]
struct AnalyzeDump {
    vulnerable: Vec<VulnEntry>,
    taint: serde_json::Value,
}

#[derive(Serialize)]
struct VulnEntry {
    location: Location,
    tds: Vec<Vec<u32>>,
}

fn analyze(file: &Path, json: Option<&Path>, out: &mut dyn Write) -> CliResult {
    let (_, p) = load_program(file)?;
    let env = compute_taint(&p).map_err(|e| fail(EXIT_ERROR, e))?;
    let mut vulnerable = Vec::new();
    for v in vulnerable_statements(&p) {
        let set = tds_for_vulnerability(&env, v).map_err(|e| fail(EXIT_ERROR, e))?;
        vulnerable.push(VulnEntry {
            location: v,
            tds: set.iter().map(|t| t.lines()).collect(),
        });
    }
    let lines: Vec<String> = vulnerable.iter().map(|v| v.location.to_string()).collect();
    let w = |out: &mut dyn Write, s: String| writeln!(out, "{s}").map_err(|e| fail(EXIT_ERROR, e));
    if vulnerable.is_empty() {
        w(out, "no vulnerable statements".into())?;
    } else {
        w(out, format!("vulnerable statements: {}", lines.join(", ")))?;
    }
    if vulnerable.iter().all(|v| v.tds.is_empty()) {
        w(out, "no dangerous paths: no buffer write is reachable from the inputs".into())?;
    }
    for v in &vulnerable {
        if v.tds.is_empty() {
            w(out, format!("line {}: not input-reachable", v.location))?;
            continue;
        }
        w(out, format!("line {}: {} TDS", v.location, v.tds.len()))?;
        for t in &v.tds {
            let parts: Vec<String> = t.iter().map(|l| l.to_string()).collect();
            w(out, format!("  <{}>", parts.join(",")))?;
        }
    }
    if let Some(path) = json {
        let dump = AnalyzeDump {
            vulnerable,
            taint: env.to_json(),
        };
        write_file(path, &to_json(&dump))?;
    }
    Ok(0)
}

fn default_target(p: &Program, env: &TaintEnv) -> Option<Location> {
    vulnerable_statements(p)
        .into_iter()
        .map(|v| (tds_for_vulnerability(env, v).map(|s| s.len()).unwrap_or(0), v))
        .filter(|(n, _)| *n > 0)
        .max_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)))
        .map(|(_, v)| v)
}

fn sha256_hex(s: &str) -> String {
    Sha256::digest(s.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

/// Runs the fuzzing pipeline and builds its manifest.
fn fuzz_manifest(
    file: &Path,
    target: Option<u32>,
    method: Method,
    cfg: GaConfig,
    coverage: CoverageWeights,
    regex: RegexConfig,
) -> Result<RunManifest, Failure> {
    let (src, p) = load_program(file)?;
    let env = compute_taint(&p).map_err(|e| fail(EXIT_ERROR, e))?;
    let target = match target {
        Some(t) => {
            let t = Location(t);
            if !vulnerable_statements(&p).contains(&t) {
                return Err(fail(EXIT_USAGE, format!("line {t} is not a vulnerable statement")));
            }
            t
        }
        None => default_target(&p, &env)
            .ok_or_else(|| fail(EXIT_NO_TDS, "no vulnerable statement is reachable from the inputs"))?,
    };
    let prepared: Prepared = bench::prepare_with_env(&p, env, target, &regex).map_err(|e| match e {
        BenchError::NoTds(_) => fail(EXIT_NO_TDS, format!("line {target} has no TDS: not input-reachable")),
        e => fail(EXIT_ERROR, e),
    })?;
    let result = bench::run_method(&p, &prepared, method, coverage, &cfg).map_err(|e| fail(EXIT_ERROR, e))?;
    Ok(RunManifest {
        program: file.display().to_string(),
        program_sha256: sha256_hex(&src),
        method,
        target,
        tds: prepared.tds.lines(),
        tds_dedup: prepared.tds_dedup.lines(),
        patterns: prepared.patterns.patterns.clone(),
        rng_seed: cfg.rng_seed,
        config: cfg,
        coverage,
        regex,
        outcome: result.into(),
    })
}

fn exit_for(o: &Outcome) -> i32 {
    match o.status {
        Status::Crash => EXIT_CRASH,
        Status::ThresholdExhausted => EXIT_EXHAUSTED,
    }
}

fn print_outcome(m: &RunManifest, out: &mut dyn Write) -> Result<(), Failure> {
    let o = &m.outcome;
    let tds: Vec<String> = m.tds.iter().map(|l| l.to_string()).collect();
    let mut text = format!(
        "method: {}\ntarget: line {}\nTDS: <{}>\nseed: {}\n",
        m.method.name(),
        m.target,
        tds.join(","),
        m.rng_seed
    );
    match o.status {
        Status::Crash => {
            text.push_str(&format!("crash found in generation {} ({} executions)\n", o.generation, o.executions));
            match &o.crash_report {
                Some(r) => text.push_str(&r.render_text()),
                None => {
                    text.push_str("Malicious inputs:\n");
                    for i in &o.individual.inputs {
                        text.push_str(&format!("{i}\n"));
                    }
                }
            }
        }
        Status::ThresholdExhausted => {
            text.push_str(&format!(
                "no crash after {} generations ({} executions)\n",
                o.generation, o.executions
            ));
        }
    }
    write!(out, "{text}").map_err(|e| fail(EXIT_ERROR, e))
}

fn fuzz(
    file: &Path,
    target: Option<u32>,
    method: Method,
    cfg: GaConfig,
    json: Option<&Path>,
    report: Option<&Path>,
    out: &mut dyn Write,
) -> CliResult {
    let m = fuzz_manifest(file, target, method, cfg, CoverageWeights::default(), RegexConfig::default())?;
    print_outcome(&m, out)?;
    if let Some(path) = json {
        write_file(path, &to_json(&m))?;
    }
    if let (Some(path), Some(r)) = (report, &m.outcome.crash_report) {
        write_file(path, &to_json(r))?;
    }
    Ok(exit_for(&m.outcome))
}

fn replay(path: &Path, out: &mut dyn Write) -> CliResult {
    let text = read(path)?;
    let m: RunManifest = serde_json::from_str(&text)
        .map_err(|e| fail(EXIT_USAGE, format!("{}: {e}", path.display())))?;
    let program = PathBuf::from(&m.program);
    let (src, _) = load_program(&program)?;
    if sha256_hex(&src) != m.program_sha256 {
        return Err(fail(EXIT_ERROR, format!("{} changed since the manifest was written", m.program)));
    }
    let cfg = GaConfig {
        rng_seed: m.rng_seed,
        ..m.config.clone()
    };
    let again = fuzz_manifest(&program, Some(m.target.0), m.method, cfg, m.coverage, m.regex.clone())?;
    if again != m {
        return Err(fail(EXIT_ERROR, "replay diverged from the manifest"));
    }
    writeln!(out, "replay reproduced the recorded outcome").map_err(|e| fail(EXIT_ERROR, e))?;
    print_outcome(&again, out)?;
    Ok(exit_for(&again.outcome))
}

fn compare(
    dir: &Path,
    runs: usize,
    cfg: GaConfig,
    json: Option<&Path>,
    csv: Option<&Path>,
    out: &mut dyn Write,
) -> CliResult {
    let cases = bench::load_corpus(dir).map_err(|e| fail(EXIT_ERROR, e))?;
    let cc = CampaignConfig {
        runs,
        seed_base: cfg.rng_seed,
        ga: cfg,
        ..CampaignConfig::default()
    };
    let rows = bench::compare(&cases, &cc).map_err(|e| fail(EXIT_ERROR, e))?;
    write!(out, "{}", bench::render_markdown(&rows)).map_err(|e| fail(EXIT_ERROR, e))?;
    if let Some(path) = json {
        write_file(path, &to_json(&rows))?;
    }
    if let Some(path) = csv {
        write_file(path, &bench::render_csv(&rows))?;
    }
    Ok(0)
}
