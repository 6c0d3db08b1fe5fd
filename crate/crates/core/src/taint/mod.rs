//! Static taint analysis producing taint dependency sequences (TDS).
//!
//! Every input parameter is a taint source at the statement that binds it.
//! Taint moves through assignments, through stores into and loads from
//! buffers (tracked per buffer, weakly), and through control dependence
//! computed from post-dominators on a CFG where helper calls are inlined.
//! Each tainted `(location, variable)` pair carries the set of location
//! sequences explaining the taint, each ending at that location.
//!
//! TDS sets are kept finite: a location may occur at most twice in one
//! sequence (a third visit cuts the sequence back to the first visit), and
//! each set keeps only its `max_tds_per_var` shortest members.

pub(crate) mod cfg;
mod regex;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::lang::{BinOp, BufferId, Builtin, Expr, Location, PointsTo, Program};
use cfg::{Cfg, NodeKind};

pub use self::regex::{derive_input_regex, InputPatterns, RegexConfig};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TaintError {
    #[error("taint fixpoint did not stabilise within {0} node visits")]
    AnalysisBudgetExceeded(usize),
    #[error("location {0} is not a statement of the program")]
    UnknownLocation(Location),
    #[error("empty TDS set")]
    EmptySet,
    #[error("a TDS needs at least one location")]
    EmptyTds,
}

/// A taint dependency sequence: locations an execution must pass through
/// for input-derived data to reach `target`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Tds {
    labels: Vec<Location>,
    target: Location,
}

impl Tds {
    pub fn new(labels: Vec<Location>) -> Result<Self, TaintError> {
        let target = *labels.last().ok_or(TaintError::EmptyTds)?;
        Ok(Tds { labels, target })
    }

    pub fn from_lines(lines: &[u32]) -> Result<Self, TaintError> {
        Tds::new(lines.iter().map(|&l| Location(l)).collect())
    }

    pub fn labels(&self) -> &[Location] {
        &self.labels
    }

    pub fn target(&self) -> Location {
        self.target
    }

    pub fn lines(&self) -> Vec<u32> {
        self.labels.iter().map(|l| l.0).collect()
    }

    pub fn unique_count(&self) -> usize {
        self.labels.iter().collect::<BTreeSet<_>>().len()
    }
}

impl fmt::Display for Tds {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.labels.iter().map(|l| l.to_string()).collect();
        write!(f, "<{}>", parts.join(","))
    }
}

/// Keeps only the first occurrence of each location; the target is kept.
pub fn dedupe_tds(t: &Tds) -> Tds {
    let mut seen = BTreeSet::new();
    let labels = t.labels.iter().copied().filter(|l| seen.insert(*l)).collect();
    Tds {
        labels,
        target: t.target,
    }
}

/// Picks the TDS with the most distinct locations; ties go to the
/// lexicographically smallest label sequence.
pub fn select_tds<'a>(tdss: impl IntoIterator<Item = &'a Tds>) -> Result<Tds, TaintError> {
    tdss.into_iter()
        .min_by(|a, b| {
            b.unique_count()
                .cmp(&a.unique_count())
                .then_with(|| a.labels.cmp(&b.labels))
        })
        .cloned()
        .ok_or(TaintError::EmptySet)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaintConfig {
    pub max_tds_per_var: usize,
    pub max_label_repeats: usize,
    pub max_node_visits: usize,
}

impl Default for TaintConfig {
    fn default() -> Self {
        TaintConfig {
            max_tds_per_var: 64,
            max_label_repeats: 2,
            max_node_visits: 200_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TaintInfo {
    pub tainted: bool,
    pub tds_set: BTreeSet<Tds>,
}

/// Taint status of every variable referenced at every location.
///
/// Buffer contents appear as `*name` (the declared array, or the input
/// parameter for input strings). A pointer dereferenced at a location also
/// carries the taint of the contents it points into.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TaintEnv {
    entries: BTreeMap<(Location, String), TaintInfo>,
    locations: BTreeSet<Location>,
}

impl TaintEnv {
    pub fn get(&self, loc: Location, var: &str) -> Option<&TaintInfo> {
        self.entries.get(&(loc, var.to_string()))
    }

    pub fn is_tainted(&self, loc: Location, var: &str) -> bool {
        self.get(loc, var).is_some_and(|i| i.tainted)
    }

    pub fn entries_at(&self, loc: Location) -> impl Iterator<Item = (&str, &TaintInfo)> {
        self.entries
            .range((loc, String::new())..)
            .take_while(move |((l, _), _)| *l == loc)
            .map(|((_, v), i)| (v.as_str(), i))
    }

    pub fn iter(&self) -> impl Iterator<Item = (Location, &str, &TaintInfo)> {
        self.entries.iter().map(|((l, v), i)| (*l, v.as_str(), i))
    }

    pub fn locations(&self) -> &BTreeSet<Location> {
        &self.locations
    }

    /// `{location: {variable: [[l1, l2, ...], ...]}}`
    pub fn to_json(&self) -> serde_json::Value {
        let mut out = serde_json::Map::new();
        for ((loc, var), info) in &self.entries {
            let per_loc = out
                .entry(loc.to_string())
                .or_insert_with(|| serde_json::Value::Object(Default::default()));
            let seqs: Vec<serde_json::Value> =
                info.tds_set.iter().map(|t| serde_json::json!(t.lines())).collect();
            per_loc
                .as_object_mut()
                .unwrap()
                .insert(var.clone(), serde_json::Value::Array(seqs));
        }
        serde_json::Value::Object(out)
    }
}

/// The TDS reaching a vulnerable statement: every sequence attached to a
/// variable read or written there.
pub fn tds_for_vulnerability(env: &TaintEnv, v: Location) -> Result<BTreeSet<Tds>, TaintError> {
    if !env.locations.contains(&v) {
        return Err(TaintError::UnknownLocation(v));
    }
    Ok(env
        .entries_at(v)
        .flat_map(|(_, info)| info.tds_set.iter().cloned())
        .collect())
}

pub fn compute_taint(p: &Program) -> Result<TaintEnv, TaintError> {
    compute_taint_with(p, &TaintConfig::default())
}

pub fn compute_taint_with(p: &Program, config: &TaintConfig) -> Result<TaintEnv, TaintError> {
    Analyzer::new(p, *config).run()
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
enum Cell {
    Var { func: String, name: String },
    Mem(BufferId),
}

type Seq = Vec<Location>;

/// A TDS set ordered shortest-first, then lexicographically.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
struct SeqSet(BTreeSet<(usize, Seq)>);

impl SeqSet {
    fn single(l: Location) -> Self {
        SeqSet([(1, vec![l])].into_iter().collect())
    }

    fn union_with(&mut self, other: &SeqSet) {
        self.0.extend(other.0.iter().cloned());
    }

    fn truncate(&mut self, k: usize) {
        while self.0.len() > k {
            self.0.pop_last();
        }
    }

    fn seqs(&self) -> impl Iterator<Item = &Seq> {
        self.0.iter().map(|(_, s)| s)
    }

    /// Appends `l` to every sequence, cutting cycles that would exceed the
    /// repeat bound.
    fn extended(&self, l: Location, max_repeats: usize) -> SeqSet {
        let mut out = BTreeSet::new();
        for s in self.seqs() {
            let next = if s.last() == Some(&l) {
                s.clone()
            } else if s.iter().filter(|&&x| x == l).count() >= max_repeats {
                let first = s.iter().position(|&x| x == l).unwrap();
                s[..=first].to_vec()
            } else {
                let mut n = s.clone();
                n.push(l);
                n
            };
            out.insert((next.len(), next));
        }
        SeqSet(out)
    }
}

type State = Vec<SeqSet>;

struct Analyzer<'p> {
    program: &'p Program,
    config: TaintConfig,
    cfg: Cfg,
    ancestors: Vec<Vec<usize>>,
    points_to: PointsTo,
    cells: Vec<Cell>,
    index: HashMap<Cell, usize>,
}

/// A variable read at a location and the cells its value depends on.
struct Access {
    name: String,
    cells: Vec<usize>,
}

impl<'p> Analyzer<'p> {
    fn new(program: &'p Program, config: TaintConfig) -> Self {
        let cfg = Cfg::build(program);
        let ancestors = cfg.control_ancestors();
        let points_to = PointsTo::compute(program);
        let mut cells = Vec::new();
        for f in &program.functions {
            for name in f.params.iter().map(|p| &p.name).chain(f.locals.iter().map(|l| &l.name)) {
                cells.push(Cell::Var {
                    func: f.name.clone(),
                    name: name.clone(),
                });
            }
            for (name, _) in f.buffers() {
                cells.push(Cell::Mem(BufferId::Local {
                    func: f.name.clone(),
                    name: name.to_string(),
                }));
            }
        }
        for i in 0..program.inputs.len() {
            cells.push(Cell::Mem(BufferId::Input(i)));
        }
        let index = cells.iter().cloned().enumerate().map(|(i, c)| (c, i)).collect();
        Analyzer {
            program,
            config,
            cfg,
            ancestors,
            points_to,
            cells,
            index,
        }
    }

    fn var(&self, func: &str, name: &str) -> usize {
        self.index[&Cell::Var {
            func: func.to_string(),
            name: name.to_string(),
        }]
    }

    fn mem_of(&self, func: &str, e: &Expr) -> Vec<usize> {
        self.points_to
            .sources(func, e)
            .into_iter()
            .map(|b| self.index[&Cell::Mem(b)])
            .collect()
    }

    fn cell_name(&self, c: usize) -> String {
        match &self.cells[c] {
            Cell::Var { name, .. } => name.clone(),
            Cell::Mem(BufferId::Local { name, .. }) => format!("*{name}"),
            Cell::Mem(BufferId::Input(i)) => format!("*{}", self.program.inputs[*i]),
        }
    }

    /// Cells whose values flow into the value of `e`.
    fn uses(&self, func: &str, e: &Expr, out: &mut Vec<usize>) {
        match e {
            Expr::Int(_) | Expr::Char(_) | Expr::Input(_) => {}
            Expr::Var(v) | Expr::PostInc { var: v, .. } => out.push(self.var(func, v)),
            Expr::Deref(inner) => {
                self.uses(func, inner, out);
                out.extend(self.mem_of(func, inner));
            }
            Expr::Index(base, idx) => {
                self.uses(func, base, out);
                self.uses(func, idx, out);
                out.extend(self.mem_of(func, base));
            }
            Expr::Call(Builtin::Strlen, args) => {
                self.uses(func, &args[0], out);
                out.extend(self.mem_of(func, &args[0]));
            }
            Expr::Call(_, args) => args.iter().for_each(|a| self.uses(func, a, out)),
            Expr::Unary(_, a) => self.uses(func, a, out),
            Expr::Binary(_, a, b) => {
                self.uses(func, a, out);
                self.uses(func, b, out);
            }
        }
    }

    /// Variables read in `e`; pointers used as a base of a dereference also
    /// carry the contents they point into.
    fn accesses(&self, func: &str, e: &Expr, deref: bool, out: &mut Vec<Access>) {
        match e {
            Expr::Int(_) | Expr::Char(_) | Expr::Input(_) => {}
            Expr::Var(v) | Expr::PostInc { var: v, .. } => {
                let mut cells = vec![self.var(func, v)];
                if deref {
                    cells.extend(self.mem_of(func, e));
                }
                out.push(Access {
                    name: v.clone(),
                    cells,
                });
            }
            Expr::Deref(inner) => self.accesses(func, inner, true, out),
            Expr::Index(base, idx) => {
                self.accesses(func, base, true, out);
                self.accesses(func, idx, false, out);
            }
            Expr::Call(Builtin::Strlen, args) => self.accesses(func, &args[0], true, out),
            Expr::Call(_, args) => args.iter().for_each(|a| self.accesses(func, a, false, out)),
            Expr::Unary(_, a) => self.accesses(func, a, deref, out),
            Expr::Binary(op, a, b) => {
                let keep = deref && matches!(op, BinOp::Add | BinOp::Sub);
                self.accesses(func, a, keep, out);
                self.accesses(func, b, keep, out);
            }
        }
    }

    fn gather(&self, state: &State, cells: &[usize]) -> SeqSet {
        let mut s = SeqSet::default();
        for &c in cells {
            s.union_with(&state[c]);
        }
        s
    }

    fn ext(&self, s: &SeqSet, l: Location) -> SeqSet {
        let mut e = s.extended(l, self.config.max_label_repeats);
        e.truncate(self.config.max_tds_per_var);
        e
    }

    fn post_incs(&self, func: &str, e: &Expr, out: &mut Vec<usize>) {
        e.for_each_post_inc(&mut |v| out.push(self.var(func, v)));
    }

    /// Applies node `n` to `state`. Returns the definitions it made (cell,
    /// new set) so the environment can record them.
    fn transfer(&self, n: usize, state: &mut State, pc: &SeqSet) -> Vec<(usize, SeqSet)> {
        let node = &self.cfg.nodes[n];
        let func = node.func.as_str();
        let mut defs: Vec<(usize, SeqSet, bool)> = Vec::new(); // (cell, set, strong)
        let label = node.label;
        let with_pc = |mut s: SeqSet| {
            s.union_with(pc);
            s
        };
        let mut incs = Vec::new();
        match &node.kind {
            NodeKind::Entry | NodeKind::Exit | NodeKind::Nop | NodeKind::Marker => {}
            NodeKind::Assign { var, value } => {
                let l = label.unwrap();
                if let Expr::Input(k) = value {
                    let mut s = SeqSet::single(l);
                    s.union_with(&self.ext(pc, l));
                    defs.push((self.var(func, var), s.clone(), true));
                    defs.push((self.index[&Cell::Mem(BufferId::Input(k - 1))], s, true));
                } else {
                    let mut u = Vec::new();
                    self.uses(func, value, &mut u);
                    self.post_incs(func, value, &mut incs);
                    let s = self.ext(&with_pc(self.gather(state, &u)), l);
                    defs.push((self.var(func, var), s, true));
                }
            }
            NodeKind::PtrAssign { target, value } => {
                let l = label.unwrap();
                let mut u = Vec::new();
                self.uses(func, value, &mut u);
                self.uses(func, target.base(), &mut u);
                if let crate::lang::Place::Index(_, idx) = target {
                    self.uses(func, idx, &mut u);
                }
                let s = self.ext(&with_pc(self.gather(state, &u)), l);
                for m in self.mem_of(func, target.base()) {
                    defs.push((m, s.clone(), false));
                }
                self.post_incs(func, value, &mut incs);
                self.post_incs(func, target.base(), &mut incs);
                if let crate::lang::Place::Index(_, idx) = target {
                    self.post_incs(func, idx, &mut incs);
                }
            }
            NodeKind::Builtin { builtin, args } => {
                let l = label.unwrap();
                if *builtin == Builtin::Strcpy {
                    let mut u = Vec::new();
                    self.uses(func, &args[0], &mut u);
                    self.uses(func, &args[1], &mut u);
                    u.extend(self.mem_of(func, &args[1]));
                    let s = self.ext(&with_pc(self.gather(state, &u)), l);
                    for m in self.mem_of(func, &args[0]) {
                        defs.push((m, s.clone(), false));
                    }
                }
                for a in args {
                    self.post_incs(func, a, &mut incs);
                }
            }
            NodeKind::Branch { cond } => self.post_incs(func, cond, &mut incs),
            NodeKind::Return { value } => {
                if let Some(v) = value {
                    self.post_incs(func, v, &mut incs);
                }
            }
            NodeKind::Bind { param, arg, caller } => {
                let mut u = Vec::new();
                self.uses(caller, arg, &mut u);
                defs.push((self.var(func, param), with_pc(self.gather(state, &u)), true));
            }
            NodeKind::InputParam { param, index } => {
                let s = SeqSet::single(label.unwrap());
                defs.push((self.var(func, param), s.clone(), true));
                defs.push((self.index[&Cell::Mem(BufferId::Input(*index))], s, true));
            }
        }
        if let Some(l) = label {
            for c in incs {
                let mut s = state[c].clone();
                s.union_with(pc);
                defs.push((c, self.ext(&s, l), true));
            }
        }
        let mut out = Vec::new();
        for (cell, set, strong) in defs {
            if strong {
                state[cell] = set.clone();
            } else {
                state[cell].union_with(&set);
                state[cell].truncate(self.config.max_tds_per_var);
            }
            out.push((cell, set));
        }
        out
    }

    fn cond_taint(&self, n: usize, state: &State) -> SeqSet {
        let node = &self.cfg.nodes[n];
        let NodeKind::Branch { cond } = &node.kind else {
            return SeqSet::default();
        };
        let mut u = Vec::new();
        self.uses(&node.func, cond, &mut u);
        self.ext(&self.gather(state, &u), node.label.unwrap())
    }

    fn pc(&self, n: usize, cond: &[SeqSet]) -> SeqSet {
        let mut s = SeqSet::default();
        for &a in &self.ancestors[n] {
            s.union_with(&cond[a]);
        }
        s
    }

    fn join(&self, n: usize, out: &[State]) -> State {
        let mut s = vec![SeqSet::default(); self.cells.len()];
        for &p in &self.cfg.pred[n] {
            for (c, set) in out[p].iter().enumerate() {
                s[c].union_with(set);
            }
        }
        for set in &mut s {
            set.truncate(self.config.max_tds_per_var);
        }
        s
    }

    fn run(self) -> Result<TaintEnv, TaintError> {
        let n_nodes = self.cfg.nodes.len();
        let k = self.config.max_tds_per_var;
        let mut out: Vec<State> = vec![vec![SeqSet::default(); self.cells.len()]; n_nodes];
        let mut cond: Vec<SeqSet> = vec![SeqSet::default(); n_nodes];
        let mut dependents = vec![Vec::new(); n_nodes];
        for (m, anc) in self.ancestors.iter().enumerate() {
            for &a in anc {
                dependents[a].push(m);
            }
        }
        let mut queued = vec![true; n_nodes];
        let mut work: std::collections::VecDeque<usize> = (0..n_nodes).collect();
        let mut visits = 0usize;

        while let Some(n) = work.pop_front() {
            queued[n] = false;
            visits += 1;
            if visits > self.config.max_node_visits {
                return Err(TaintError::AnalysisBudgetExceeded(self.config.max_node_visits));
            }
            let mut state = self.join(n, &out);

            let mut new_cond = cond[n].clone();
            new_cond.union_with(&self.cond_taint(n, &state));
            new_cond.truncate(k);
            if new_cond != cond[n] {
                cond[n] = new_cond;
                for &m in &dependents[n] {
                    if !queued[m] {
                        queued[m] = true;
                        work.push_back(m);
                    }
                }
            }

            let pc = self.pc(n, &cond);
            self.transfer(n, &mut state, &pc);
            let mut changed = false;
            for (acc, new) in out[n].iter_mut().zip(state) {
                let before = acc.clone();
                acc.union_with(&new);
                acc.truncate(k);
                changed |= *acc != before;
            }
            if changed {
                for &s in &self.cfg.succ[n] {
                    if !queued[s] {
                        queued[s] = true;
                        work.push_back(s);
                    }
                }
            }
        }

        Ok(self.environment(&out, &cond))
    }

    fn environment(&self, out: &[State], cond: &[SeqSet]) -> TaintEnv {
        let k = self.config.max_tds_per_var;
        let mut raw: BTreeMap<(Location, String), SeqSet> = BTreeMap::new();
        for (n, node) in self.cfg.nodes.iter().enumerate() {
            let Some(l) = node.label else { continue };
            let func = node.func.as_str();
            let mut state = self.join(n, out);
            let mut accesses = Vec::new();
            match &node.kind {
                NodeKind::Assign { value, .. } => self.accesses(func, value, false, &mut accesses),
                NodeKind::PtrAssign { target, value } => {
                    self.accesses(func, target.base(), true, &mut accesses);
                    if let crate::lang::Place::Index(_, idx) = target {
                        self.accesses(func, idx, false, &mut accesses);
                    }
                    self.accesses(func, value, false, &mut accesses);
                }
                NodeKind::Builtin { builtin, args } => {
                    let deref = *builtin == Builtin::Strcpy;
                    for a in args {
                        self.accesses(func, a, deref, &mut accesses);
                    }
                }
                NodeKind::Branch { cond } => self.accesses(func, cond, false, &mut accesses),
                NodeKind::Return { value: Some(v) } => self.accesses(func, v, false, &mut accesses),
                _ => {}
            }
            for a in accesses {
                let set = self.ext(&self.gather(&state, &a.cells), l);
                raw.entry((l, a.name)).or_default().union_with(&set);
            }
            let pc = self.pc(n, cond);
            for (cell, set) in self.transfer(n, &mut state, &pc) {
                raw.entry((l, self.cell_name(cell))).or_default().union_with(&set);
            }
        }
        let entries = raw
            .into_iter()
            .map(|(key, mut set)| {
                set.truncate(k);
                let tds_set: BTreeSet<Tds> = set
                    .seqs()
                    .map(|s| Tds::new(s.clone()).expect("sequences are never empty"))
                    .collect();
                (
                    key,
                    TaintInfo {
                        tainted: !tds_set.is_empty(),
                        tds_set,
                    },
                )
            })
            .collect();
        TaintEnv {
            entries,
            locations: self.program.all_locations().into_iter().collect(),
        }
    }
}

/// CFG connectivity check exposed for tests of the path-projection property.
pub fn labels_connected(p: &Program, from: Location, to: Location) -> bool {
    Cfg::build(p).label_reaches(from, to)
}
