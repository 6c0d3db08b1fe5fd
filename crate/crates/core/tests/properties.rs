//! Property tests over generated MiniC programs and GA components.

mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{corpus_dir, untainted_but_input_dependent};
use tdsfuzz::bench::prepare;
use tdsfuzz::exec::{execute, ExecutionTrace};
use tdsfuzz::ga::{
    build_frequency_matrix, compute_weights, fitness, ga_run_with, init_population_with, next_generation, GaConfig,
    Grammar, RegexSampler, WeightVector,
};
use tdsfuzz::lang::{parse_program, pretty_print, vulnerable_statements, Location, Program};
use tdsfuzz::taint::{compute_taint, dedupe_tds, labels_connected, tds_for_vulnerability, RegexConfig, Tds};

const SIMPLE: [&str; 9] = [
    "c = *p;",
    "n = n + 1;",
    "b[i] = c;",
    "*q = *p;",
    "q++;",
    "c = toupper(c);",
    "n = strlen(s);",
    "i = i + 1;",
    "strcpy(b, p);",
];

const CONDS: [&str; 4] = ["c == 'a'", "*p != '-'", "n < 3", "i > 1 && c != 'b'"];

#[derive(Debug, Clone)]
enum Inner {
    Simple(usize),
    If(usize, Vec<usize>, Vec<usize>),
}

#[derive(Debug, Clone)]
enum Top {
    Inner(Inner),
    While(Vec<Inner>),
    For(Vec<Inner>),
}

fn inner() -> impl Strategy<Value = Inner> {
    let simple = 0..SIMPLE.len();
    prop_oneof![
        3 => simple.clone().prop_map(Inner::Simple),
        1 => (0..CONDS.len(), prop::collection::vec(simple.clone(), 1..3), prop::collection::vec(simple, 0..2))
            .prop_map(|(c, t, e)| Inner::If(c, t, e)),
    ]
}

fn top() -> impl Strategy<Value = Top> {
    prop_oneof![
        3 => inner().prop_map(Top::Inner),
        1 => prop::collection::vec(inner(), 1..3).prop_map(Top::While),
        1 => prop::collection::vec(inner(), 1..3).prop_map(Top::For),
    ]
}

fn emit_inner(s: &Inner, out: &mut String) {
    match s {
        Inner::Simple(i) => out.push_str(&format!("  {}\n", SIMPLE[*i])),
        Inner::If(c, t, e) => {
            out.push_str(&format!("  if ({}) {{\n", CONDS[*c]));
            for i in t {
                out.push_str(&format!("    {}\n", SIMPLE[*i]));
            }
            if e.is_empty() {
                out.push_str("  }\n");
            } else {
                out.push_str("  } else {\n");
                for i in e {
                    out.push_str(&format!("    {}\n", SIMPLE[*i]));
                }
                out.push_str("  }\n");
            }
        }
    }
}

/// Source text of a program built from `body`; every loop is bounded.
fn render(body: &[Top]) -> String {
    let mut out = String::from(
        "int main(int argc, char **argv)\n{\n  char b[8];\n  char *s;\n  char *p;\n  char *q;\n  int i;\n  int k;\n  int n;\n  int c;\n  s = argv[1];\n  p = s;\n  q = b;\n  i = 0;\n  n = 0;\n  c = 0;\n",
    );
    for s in body {
        match s {
            Top::Inner(s) => emit_inner(s, &mut out),
            Top::While(b) => {
                out.push_str("  k = 0;\n  while (*p != '\\0' && k < 6) {\n");
                b.iter().for_each(|s| emit_inner(s, &mut out));
                out.push_str("  k++;\n  p++;\n  }\n");
            }
            Top::For(b) => {
                out.push_str("  for (k = 0; k < 3; k++) {\n");
                b.iter().for_each(|s| emit_inner(s, &mut out));
                out.push_str("  }\n");
            }
        }
    }
    out.push_str("  return 0;\n}\n");
    out
}

fn program() -> impl Strategy<Value = String> {
    prop::collection::vec(top(), 1..6).prop_map(|b| render(&b))
}

fn run(p: &Program, input: &str, instrumented: &BTreeSet<Location>) -> ExecutionTrace {
    execute(p, &[input.to_string()], instrumented, 100_000).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn pretty_print_round_trips(src in program()) {
        let p = parse_program(&src).unwrap();
        let again = parse_program(&pretty_print(&p)).unwrap();
        prop_assert_eq!(p.without_locations(), again.without_locations());
    }

    #[test]
    fn labels_increase_and_vulnerable_are_statements(src in program()) {
        let p = parse_program(&src).unwrap();
        let locs = p.statement_locations();
        prop_assert!(locs.windows(2).all(|w| w[0] < w[1]), "{:?}", locs);
        let all: BTreeSet<Location> = locs.into_iter().collect();
        prop_assert!(vulnerable_statements(&p).is_subset(&all));
    }

    #[test]
    fn tds_follow_cfg_paths(src in program()) {
        let p = parse_program(&src).unwrap();
        let env = compute_taint(&p).unwrap();
        for v in vulnerable_statements(&p) {
            for t in tds_for_vulnerability(&env, v).unwrap() {
                prop_assert_eq!(t.target(), v);
                for w in t.labels().windows(2) {
                    prop_assert!(labels_connected(&p, w[0], w[1]), "{} in {}\n{}", t, v, src);
                }
            }
        }
    }

    #[test]
    fn generated_programs_are_soundly_tainted(src in program()) {
        let missed = untainted_but_input_dependent(&src, &['a', 'b', '-'], 2);
        prop_assert!(missed.is_empty(), "{:?}\n{}", missed, src);
    }

    #[test]
    fn execution_is_deterministic_and_instrumentation_additive(
        src in program(),
        input in "[abc&-]{0,12}",
        split in any::<u64>(),
    ) {
        let p = parse_program(&src).unwrap();
        let locs = p.statement_locations();
        let a: BTreeSet<Location> = locs.iter().enumerate().filter(|(i, _)| split >> (i % 64) & 1 == 1).map(|(_, l)| *l).collect();
        let b: BTreeSet<Location> = locs.iter().copied().filter(|l| !a.contains(l)).collect();
        let ab: BTreeSet<Location> = locs.iter().copied().collect();
        let full = run(&p, &input, &ab);
        prop_assert_eq!(&full, &run(&p, &input, &ab));
        let (ta, tb) = (run(&p, &input, &a), run(&p, &input, &b));
        prop_assert_eq!(&ta.fault, &full.fault);
        for l in &ab {
            let part = if a.contains(l) { &ta } else { &tb };
            prop_assert_eq!(full.frequencies.get(l), part.frequencies.get(l));
        }
    }

    #[test]
    fn dedupe_is_idempotent(lines in prop::collection::vec(1u32..8, 1..12)) {
        let t = Tds::from_lines(&lines).unwrap();
        let once = dedupe_tds(&t);
        prop_assert_eq!(dedupe_tds(&once), once.clone());
        prop_assert_eq!(once.target(), t.target());
        prop_assert_eq!(once.unique_count(), once.labels().len());
    }

    #[test]
    fn fitness_is_monotone_in_each_frequency(
        row_w in prop::collection::vec((0u64..50, 0.01f64..10.0), 1..10),
        pick in any::<prop::sample::Index>(),
    ) {
        let (mut row, w): (Vec<u64>, Vec<f64>) = row_w.into_iter().unzip();
        let w = WeightVector { w };
        let before = fitness(&row, &w).unwrap();
        let j = pick.index(row.len());
        row[j] += 1;
        prop_assert!(fitness(&row, &w).unwrap() > before);
    }

    #[test]
    fn sampled_strings_match(class in prop::sample::subsequence(vec!['a', 'b', '&', '%', '-', '0'], 1..6), max in 0usize..20) {
        let body: String = class.iter().map(|c| if *c == '-' { "\\-".to_string() } else { c.to_string() }).collect();
        let pattern = format!("[{body}]*");
        let s = RegexSampler::new(&pattern, max).unwrap();
        let re = regex::Regex::new(&format!("^{pattern}$")).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(max as u64);
        for _ in 0..20 {
            let x = s.sample(&mut rng, 0, max).unwrap();
            prop_assert!(re.is_match(&x) && x.len() <= max, "{:?} !~ {}", x, pattern);
        }
    }
}

fn buildfname() -> Program {
    parse_program(&std::fs::read_to_string(corpus_dir().join("buildfname.mc")).unwrap()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 8, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn ga_run_is_deterministic(seed in any::<u64>()) {
        let p = buildfname();
        let prep = prepare(&p, Location(8), &RegexConfig::default()).unwrap();
        let cfg = GaConfig { population_size: 12, max_generations: 4, rng_seed: seed, ..GaConfig::default() };
        let a = ga_run_with(&p, &prep.tds, &prep.patterns.patterns, &cfg).unwrap();
        let b = ga_run_with(&p, &prep.tds, &prep.patterns.patterns, &cfg).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn elite_fitness_never_drops_under_fixed_weights(seed in any::<u64>()) {
        let p = buildfname();
        let prep = prepare(&p, Location(8), &RegexConfig::default()).unwrap();
        let cfg = GaConfig { population_size: 16, rng_seed: seed, ..GaConfig::default() };
        let grammar = Grammar::new(&prep.patterns.patterns, &cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pop = init_population_with(&grammar, &cfg, &mut rng).unwrap();
        let mut fixed: Option<WeightVector> = None;
        let mut best = f64::NEG_INFINITY;
        for _ in 0..6 {
            let m = build_frequency_matrix(&p, &pop, &prep.tds_dedup).unwrap();
            let w = fixed.get_or_insert_with(|| compute_weights(&m)).clone();
            for (member, row) in pop.members.iter_mut().zip(&m.rows) {
                member.fitness = Some(fitness(row, &w).unwrap());
            }
            let top = pop.members.iter().filter_map(|m| m.fitness).fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(top >= best, "best fell from {} to {}", best, top);
            best = top;
            let next = next_generation(&pop, &grammar, &cfg, &mut rng).unwrap();
            prop_assert_eq!(next.members.len(), cfg.population_size);
            prop_assert_eq!(next.generation, pop.generation + 1);
            pop = next;
        }
    }
}
