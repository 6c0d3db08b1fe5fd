//! Genetic search for inputs that drive execution along a TDS.
//!
//! Each generation every individual is executed with the (deduplicated)
//! TDS locations instrumented. Column `j` of the resulting frequency matrix
//! is weighted by `j / max(1, column sum)`: locations late in the TDS and
//! rarely reached weigh the most. An individual's fitness is its weighted
//! frequency row. The best individuals survive unchanged, the rest of the
//! next generation is bred by roulette selection, crossover and appending
//! strings drawn from the input grammar.

mod sampler;

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::exec::{analyze_crash, simulate_frame_with, CrashReport, ExecConfig, ExecError, ExecutionTrace, Interpreter, OverflowFault};
use crate::lang::{Location, Program};
use crate::taint::{self, dedupe_tds, derive_input_regex, RegexConfig, TaintError, Tds};

pub use sampler::RegexSampler;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GaError {
    #[error("pattern `{0}` matches no string in the requested length range")]
    EmptyLanguage(String),
    #[error("invalid pattern `{pattern}`: {message}")]
    InvalidPattern { pattern: String, message: String },
    #[error("frequency row has {row} entries but there are {weights} weights")]
    LengthMismatch { row: usize, weights: usize },
    #[error("individual {0} has not been evaluated")]
    Unevaluated(usize),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Exec(#[from] ExecError),
    #[error(transparent)]
    Taint(#[from] TaintError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CrossoverKind {
    SinglePoint,
    TwoPoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaConfig {
    pub population_size: usize,
    pub max_generations: usize,
    pub crossover: CrossoverKind,
    pub crossover_rate: f64,
    /// Grammar for appended strings; the input's own pattern when absent.
    pub mutation_pattern: Option<String>,
    pub mutation_max_append: usize,
    pub elite_count: usize,
    pub rng_seed: u64,
    /// Length range of strings in the initial population.
    pub init_min_len: usize,
    pub init_max_len: usize,
    pub step_budget: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig {
            population_size: 50,
            max_generations: 1000,
            crossover: CrossoverKind::SinglePoint,
            crossover_rate: 1.0,
            mutation_pattern: None,
            mutation_max_append: 4,
            elite_count: 2,
            rng_seed: 0,
            init_min_len: 1,
            init_max_len: 32,
            step_budget: 1_000_000,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<(), GaError> {
        let bad = |m: &str| Err(GaError::InvalidConfig(m.to_string()));
        if self.population_size < self.elite_count + 2 {
            return bad("population_size must be at least elite_count + 2");
        }
        if !(0.0..=1.0).contains(&self.crossover_rate) {
            return bad("crossover_rate must lie in [0, 1]");
        }
        if self.mutation_max_append == 0 {
            return bad("mutation_max_append must be positive");
        }
        if self.init_min_len > self.init_max_len {
            return bad("init_min_len exceeds init_max_len");
        }
        if self.step_budget == 0 {
            return bad("step_budget must be positive");
        }
        Ok(())
    }

    fn exec_config(&self) -> ExecConfig {
        ExecConfig {
            step_budget: self.step_budget,
            ..ExecConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Individual {
    pub inputs: Vec<String>,
    pub fitness: Option<f64>,
}

impl Individual {
    pub fn new(inputs: Vec<String>) -> Self {
        Individual { inputs, fitness: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Population {
    pub members: Vec<Individual>,
    pub generation: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrequencyMatrix {
    pub columns: Vec<Location>,
    pub rows: Vec<Vec<u64>>,
}

impl FrequencyMatrix {
    pub fn from_traces(columns: &[Location], traces: &[ExecutionTrace]) -> Self {
        let rows = traces
            .iter()
            .map(|t| columns.iter().map(|l| t.frequencies.get(l).copied().unwrap_or(0)).collect())
            .collect();
        FrequencyMatrix {
            columns: columns.to_vec(),
            rows,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    pub w: Vec<f64>,
}

/// Samplers for each input, for initial strings and for mutation.
#[derive(Debug, Clone)]
pub struct Grammar {
    init: Vec<RegexSampler>,
    mutation: Vec<RegexSampler>,
}

impl Grammar {
    pub fn new(patterns: &[String], cfg: &GaConfig) -> Result<Self, GaError> {
        if patterns.is_empty() {
            return Err(GaError::InvalidConfig("no input patterns".into()));
        }
        let init = patterns
            .iter()
            .map(|p| RegexSampler::new(p, cfg.init_max_len))
            .collect::<Result<Vec<_>, _>>()?;
        let mutation = patterns
            .iter()
            .map(|p| RegexSampler::new(cfg.mutation_pattern.as_deref().unwrap_or(p), cfg.mutation_max_append))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Grammar { init, mutation })
    }

    pub fn arity(&self) -> usize {
        self.init.len()
    }

    pub fn sample_individual<R: Rng + ?Sized>(&self, rng: &mut R, cfg: &GaConfig) -> Result<Individual, GaError> {
        let inputs = self
            .init
            .iter()
            .map(|s| s.sample(rng, cfg.init_min_len, cfg.init_max_len))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Individual::new(inputs))
    }
}

pub fn init_population(patterns: &[String], cfg: &GaConfig) -> Result<Population, GaError> {
    cfg.validate()?;
    let grammar = Grammar::new(patterns, cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    init_population_with(&grammar, cfg, &mut rng)
}

pub fn init_population_with<R: Rng + ?Sized>(grammar: &Grammar, cfg: &GaConfig, rng: &mut R) -> Result<Population, GaError> {
    let members = (0..cfg.population_size)
        .map(|_| grammar.sample_individual(rng, cfg))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Population { members, generation: 0 })
}

pub fn build_frequency_matrix(p: &Program, pop: &Population, t_dedup: &Tds) -> Result<FrequencyMatrix, GaError> {
    let interp = Interpreter::new(p);
    let columns = t_dedup.labels().to_vec();
    let set: BTreeSet<Location> = columns.iter().copied().collect();
    let traces = evaluate(&interp, &pop.members, &set, &ExecConfig::default())?;
    Ok(FrequencyMatrix::from_traces(&columns, &traces))
}

pub fn compute_weights(freq: &FrequencyMatrix) -> WeightVector {
    let k = freq.columns.len();
    let w = (0..k)
        .map(|j| {
            let sum: u64 = freq.rows.iter().map(|r| r[j]).sum();
            (j + 1) as f64 / sum.max(1) as f64
        })
        .collect();
    WeightVector { w }
}

pub fn fitness(row: &[u64], w: &WeightVector) -> Result<f64, GaError> {
    if row.len() != w.w.len() {
        return Err(GaError::LengthMismatch {
            row: row.len(),
            weights: w.w.len(),
        });
    }
    Ok(row.iter().zip(&w.w).map(|(&f, &w)| f as f64 * w).sum())
}

/// The `k` fittest members; ties go to the earlier member.
pub fn select_elite(pop: &Population, k: usize) -> Result<Vec<Individual>, GaError> {
    let mut scored = pop
        .members
        .iter()
        .enumerate()
        .map(|(i, m)| m.fitness.map(|f| (i, f)).ok_or(GaError::Unevaluated(i)))
        .collect::<Result<Vec<_>, _>>()?;
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(scored.iter().take(k).map(|&(i, _)| pop.members[i].clone()).collect())
}

/// Single-point crossover with cut `ca` in `a` and `cb` in `b`.
pub fn crossover_single(a: &str, b: &str, ca: usize, cb: usize) -> (String, String) {
    (format!("{}{}", &a[..ca], &b[cb..]), format!("{}{}", &b[..cb], &a[ca..]))
}

/// Two-point crossover exchanging `a[a1..a2]` and `b[b1..b2]`.
pub fn crossover_two(a: &str, b: &str, (a1, a2): (usize, usize), (b1, b2): (usize, usize)) -> (String, String) {
    (
        format!("{}{}{}", &a[..a1], &b[b1..b2], &a[a2..]),
        format!("{}{}{}", &b[..b1], &a[a1..a2], &b[b2..]),
    )
}

fn cuts<R: Rng + ?Sized>(rng: &mut R, len: usize) -> (usize, usize) {
    let x = rng.gen_range(0..=len);
    let y = rng.gen_range(0..=len);
    (x.min(y), x.max(y))
}

pub fn crossover<R: Rng + ?Sized>(a: &Individual, b: &Individual, cfg: &GaConfig, rng: &mut R) -> (Individual, Individual) {
    if !rng.gen_bool(cfg.crossover_rate) {
        return (Individual::new(a.inputs.clone()), Individual::new(b.inputs.clone()));
    }
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for (sa, sb) in a.inputs.iter().zip(&b.inputs) {
        let (ca, cb) = match cfg.crossover {
            CrossoverKind::SinglePoint => {
                let ca = rng.gen_range(0..=sa.len());
                let cb = rng.gen_range(0..=sb.len());
                crossover_single(sa, sb, ca, cb)
            }
            CrossoverKind::TwoPoint => {
                let pa = cuts(rng, sa.len());
                let pb = cuts(rng, sb.len());
                crossover_two(sa, sb, pa, pb)
            }
        };
        x.push(ca);
        y.push(cb);
    }
    (Individual::new(x), Individual::new(y))
}

/// Appends a short string from the mutation grammar to every input.
pub fn mutate<R: Rng + ?Sized>(ind: &Individual, grammar: &Grammar, cfg: &GaConfig, rng: &mut R) -> Result<Individual, GaError> {
    let inputs = ind
        .inputs
        .iter()
        .zip(&grammar.mutation)
        .map(|(s, g)| Ok(format!("{s}{}", g.sample(rng, 1, cfg.mutation_max_append)?)))
        .collect::<Result<Vec<_>, GaError>>()?;
    Ok(Individual::new(inputs))
}

fn roulette<R: Rng + ?Sized>(fit: &[f64], rng: &mut R) -> usize {
    let total: f64 = fit.iter().sum();
    if !(total > 0.0) {
        return rng.gen_range(0..fit.len());
    }
    let mut r = rng.gen::<f64>() * total;
    for (i, f) in fit.iter().enumerate() {
        r -= f;
        if r < 0.0 {
            return i;
        }
    }
    fit.len() - 1
}

/// Next generation: elites, then children bred in pairs.
pub fn next_generation<R: Rng + ?Sized>(pop: &Population, grammar: &Grammar, cfg: &GaConfig, rng: &mut R) -> Result<Population, GaError> {
    let mut members: Vec<Individual> = select_elite(pop, cfg.elite_count)?
        .into_iter()
        .map(|i| Individual::new(i.inputs))
        .collect();
    let fit: Vec<f64> = pop.members.iter().map(|m| m.fitness.unwrap_or(0.0)).collect();
    while members.len() < cfg.population_size {
        let a = &pop.members[roulette(&fit, rng)];
        let b = &pop.members[roulette(&fit, rng)];
        let (x, y) = crossover(a, b, cfg, rng);
        members.push(mutate(&x, grammar, cfg, rng)?);
        if members.len() < cfg.population_size {
            members.push(mutate(&y, grammar, cfg, rng)?);
        }
    }
    Ok(Population {
        members,
        generation: pop.generation + 1,
    })
}

pub(crate) fn evaluate(
    interp: &Interpreter,
    members: &[Individual],
    instrumented: &BTreeSet<Location>,
    cfg: &ExecConfig,
) -> Result<Vec<ExecutionTrace>, GaError> {
    members
        .par_iter()
        .map(|m| interp.run(&m.inputs, instrumented, cfg).map_err(GaError::from))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Crash,
    ThresholdExhausted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaResult {
    pub status: Status,
    /// Generation (0 = initial population) that crashed or was last evaluated.
    pub generation: usize,
    /// The crashing individual, or the fittest of the last generation.
    pub individual: Individual,
    pub fault: Option<OverflowFault>,
    pub crash_report: Option<CrashReport>,
    pub best_fitness_history: Vec<f64>,
    pub executions: u64,
}

impl GaResult {
    pub fn crashed(&self) -> bool {
        self.status == Status::Crash
    }
}

/// Fitness of a generation from its traces.
pub(crate) trait Scoring: Sync {
    fn instrumented(&self) -> &BTreeSet<Location>;
    fn score(&self, traces: &[ExecutionTrace]) -> Vec<f64>;
}

pub(crate) struct TdsScoring {
    columns: Vec<Location>,
    set: BTreeSet<Location>,
}

impl TdsScoring {
    pub fn new(t_dedup: &Tds) -> Self {
        TdsScoring {
            columns: t_dedup.labels().to_vec(),
            set: t_dedup.labels().iter().copied().collect(),
        }
    }
}

impl Scoring for TdsScoring {
    fn instrumented(&self) -> &BTreeSet<Location> {
        &self.set
    }

    fn score(&self, traces: &[ExecutionTrace]) -> Vec<f64> {
        let m = FrequencyMatrix::from_traces(&self.columns, traces);
        let w = compute_weights(&m);
        m.rows.iter().map(|r| fitness(r, &w).expect("row width matches")).collect()
    }
}

/// How each generation is produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Breeding {
    Evolve,
    /// Fresh samples from the grammar every iteration.
    Resample,
}

/// The search loop shared by all methods: evaluate, stop at the first
/// fault, otherwise produce the next generation.
pub(crate) fn search(
    p: &Program,
    grammar: &Grammar,
    scoring: &dyn Scoring,
    cfg: &GaConfig,
    breeding: Breeding,
) -> Result<GaResult, GaError> {
    cfg.validate()?;
    if grammar.arity() != p.inputs.len() {
        return Err(ExecError::ArityMismatch {
            expected: p.inputs.len(),
            got: grammar.arity(),
        }
        .into());
    }
    let interp = Interpreter::new(p);
    let exec_cfg = cfg.exec_config();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut pop = init_population_with(grammar, cfg, &mut rng)?;
    let mut history = Vec::new();
    let mut executions = 0u64;
    loop {
        let traces = evaluate(&interp, &pop.members, scoring.instrumented(), &exec_cfg)?;
        executions += traces.len() as u64;
        if let Some(i) = traces.iter().position(|t| t.fault.is_some()) {
            let individual = pop.members[i].clone();
            let fault = traces[i].fault.clone();
            let crash_report = crash_report(p, &traces[i], &individual.inputs)?;
            return Ok(GaResult {
                status: Status::Crash,
                generation: pop.generation,
                individual,
                fault,
                crash_report,
                best_fitness_history: history,
                executions,
            });
        }
        let fit = scoring.score(&traces);
        for (m, f) in pop.members.iter_mut().zip(&fit) {
            m.fitness = Some(*f);
        }
        history.push(fit.iter().cloned().fold(0.0, f64::max));
        if pop.generation >= cfg.max_generations {
            let best = select_elite(&pop, 1)?.remove(0);
            return Ok(GaResult {
                status: Status::ThresholdExhausted,
                generation: pop.generation,
                individual: best,
                fault: None,
                crash_report: None,
                best_fitness_history: history,
                executions,
            });
        }
        pop = match breeding {
            Breeding::Evolve => next_generation(&pop, grammar, cfg, &mut rng)?,
            Breeding::Resample => Population {
                generation: pop.generation + 1,
                ..init_population_with(grammar, cfg, &mut rng)?
            },
        };
    }
}

fn crash_report(p: &Program, trace: &ExecutionTrace, inputs: &[String]) -> Result<Option<CrashReport>, GaError> {
    let Some(fault) = &trace.fault else { return Ok(None) };
    let Some(f) = p.function(&fault.function) else { return Ok(None) };
    let frame = simulate_frame_with(f, &fault.buffer, ExecConfig::default().slot_size)?;
    Ok(Some(analyze_crash(trace, &frame, inputs)?))
}

/// Runs the TDS-guided search for `t`, deriving input grammars from the
/// program's taint analysis.
pub fn ga_run(p: &Program, t: &Tds, cfg: &GaConfig) -> Result<GaResult, GaError> {
    let env = taint::compute_taint(p)?;
    let patterns = derive_input_regex(p, &env, t, &RegexConfig::default()).patterns;
    ga_run_with(p, t, &patterns, cfg)
}

pub fn ga_run_with(p: &Program, t: &Tds, patterns: &[String], cfg: &GaConfig) -> Result<GaResult, GaError> {
    let grammar = Grammar::new(patterns, cfg)?;
    search(p, &grammar, &TdsScoring::new(&dedupe_tds(t)), cfg, Breeding::Evolve)
}
