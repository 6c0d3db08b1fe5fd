#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use tdsfuzz::exec::{ExecConfig, Interpreter, ObservedValue, Observer};
use tdsfuzz::lang::{parse_program, Location};
use tdsfuzz::taint::compute_taint;

pub fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

pub fn schema_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../schemas").join(name)
}

/// Runs the CLI in-process, returning (exit code, stdout, stderr).
pub fn cli(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("tdsfuzz").chain(args.iter().copied());
    let code = tdsfuzz::cli::run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

pub fn validate(schema: &str, doc: &serde_json::Value) -> Result<(), String> {
    let s: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(schema_path(schema)).unwrap()).unwrap();
    let compiled = jsonschema::JSONSchema::compile(&s).map_err(|e| e.to_string())?;
    let result = compiled.validate(doc);
    result.map_err(|errs| errs.map(|e| format!("{} at {}", e, e.instance_path)).collect::<Vec<_>>().join("; "))
}

/// Small programs for brute-force checking of the taint analysis.
pub const ORACLE_PROGRAMS: [&str; 10] = [
    // direct data flow, plus a constant
    "int main(int argc, char **argv)\n{\n  char *s;\n  int c;\n  int x;\n  int y;\n  s = argv[1];\n  c = *s;\n  x = c + 1;\n  y = 5;\n  return 0;\n}\n",
    // implicit flow through a branch
    "int main(int argc, char **argv)\n{\n  char *s;\n  int x;\n  s = argv[1];\n  if (*s == 'a') {\n    x = 1;\n  } else {\n    x = 2;\n  }\n  return 0;\n}\n",
    // counting loop
    "int main(int argc, char **argv)\n{\n  char *s;\n  char *p;\n  int n;\n  s = argv[1];\n  n = 0;\n  p = s;\n  while (*p != '\\0') {\n    n++;\n    p++;\n  }\n  return 0;\n}\n",
    // strcpy into a local buffer, then a read back
    "int main(int argc, char **argv)\n{\n  char b[8];\n  char *s;\n  int c;\n  s = argv[1];\n  strcpy(b, s);\n  c = b[1];\n  return 0;\n}\n",
    // toupper of the first byte
    "int main(int argc, char **argv)\n{\n  char *s;\n  int c;\n  s = argv[1];\n  c = toupper(*s);\n  return 0;\n}\n",
    // flow through a helper's pointer parameter
    "void put(char *d, char *t)\n{\n  *d = *t;\n}\nint main(int argc, char **argv)\n{\n  char b[4];\n  char *s;\n  int c;\n  s = argv[1];\n  put(b, s);\n  c = b[0];\n  return 0;\n}\n",
    // two inputs compared
    "int main(int argc, char **argv)\n{\n  char *a;\n  char *b;\n  int x;\n  int y;\n  a = argv[1];\n  b = argv[2];\n  x = 0;\n  if (*a == *b) {\n    x = 1;\n  }\n  y = *b;\n  return 0;\n}\n",
    // strlen and a guarded constant
    "int main(int argc, char **argv)\n{\n  char *s;\n  int n;\n  int m;\n  s = argv[1];\n  n = strlen(s);\n  m = 0;\n  if (n > 1) {\n    m = 7;\n  }\n  return 0;\n}\n",
    // indexed stores while walking a pointer
    "int main(int argc, char **argv)\n{\n  char b[4];\n  char *s;\n  char *p;\n  int i;\n  int c;\n  s = argv[1];\n  i = 0;\n  p = s;\n  while (*p != '\\0' && i < 3) {\n    b[i] = *p;\n    i++;\n    p++;\n  }\n  c = b[1];\n  return 0;\n}\n",
    // counting matches in a for loop
    "int main(int argc, char **argv)\n{\n  char *s;\n  char *p;\n  int k;\n  int z;\n  s = argv[1];\n  k = 0;\n  z = 0;\n  for (p = s; *p != '\\0'; p++) {\n    if (*p == 'b') {\n      k = k + 1;\n    }\n  }\n  if (k > 1) {\n    z = k * 2;\n  }\n  return 0;\n}\n",
];

#[derive(Default)]
struct Recorder(BTreeMap<(Location, String), Vec<ObservedValue>>);

impl Observer for Recorder {
    fn on_def(&mut self, loc: Location, name: &str, value: ObservedValue) {
        self.0.entry((loc, name.to_string())).or_default().push(value);
    }
}

fn strings(alphabet: &[char], max_len: usize) -> Vec<String> {
    let mut all = vec![String::new()];
    let mut layer = vec![String::new()];
    for _ in 0..max_len {
        layer = layer
            .iter()
            .flat_map(|s| alphabet.iter().map(move |c| format!("{s}{c}")))
            .collect();
        all.extend(layer.iter().cloned());
    }
    all
}

/// Every (location, variable) whose sequence of defined values differs
/// between two inputs over `alphabet` up to `max_len` bytes.
pub fn input_dependent(src: &str, alphabet: &[char], max_len: usize) -> Vec<(Location, String)> {
    let p = parse_program(src).unwrap();
    let interp = Interpreter::new(&p);
    let words = strings(alphabet, max_len);
    let mut tuples: Vec<Vec<String>> = vec![Vec::new()];
    for _ in 0..interp.arity() {
        tuples = tuples
            .iter()
            .flat_map(|t| words.iter().map(move |w| [t.clone(), vec![w.clone()]].concat()))
            .collect();
    }
    let cfg = ExecConfig::default();
    let mut seen: BTreeMap<(Location, String), BTreeSet<Vec<ObservedValue>>> = BTreeMap::new();
    let mut keys = BTreeSet::new();
    let runs: Vec<Recorder> = tuples
        .iter()
        .map(|inputs| {
            let mut r = Recorder::default();
            interp.run_observed(inputs, &BTreeSet::new(), &cfg, &mut r).unwrap();
            keys.extend(r.0.keys().cloned());
            r
        })
        .collect();
    for r in &runs {
        for k in &keys {
            seen.entry(k.clone()).or_default().insert(r.0.get(k).cloned().unwrap_or_default());
        }
    }
    seen.into_iter()
        .filter(|(_, vals)| vals.len() > 1)
        .map(|(k, _)| k)
        .collect()
}

/// The input-dependent definitions the analysis reports as untainted.
pub fn untainted_but_input_dependent(src: &str, alphabet: &[char], max_len: usize) -> Vec<(Location, String)> {
    let env = compute_taint(&parse_program(src).unwrap()).unwrap();
    input_dependent(src, alphabet, max_len)
        .into_iter()
        .filter(|(loc, name)| !env.is_tainted(*loc, name))
        .collect()
}
