//! MiniC: the small C dialect every other module works on.
//!
//! A program is a `main`-like entry function that binds its string inputs
//! (either `x = argv[n];` statements or `char *` parameters) and at most a
//! handful of helper functions called from the entry. Every statement is
//! labelled by its 1-based source line, so at most one statement may start
//! on any line. The grammar is described in `docs/minic.md`.

mod ast;
mod lexer;
mod parser;
mod pretty;

use std::collections::{BTreeMap, BTreeSet};

pub use ast::*;
pub use pretty::pretty_print;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("syntax error at {line}:{col}: {message}")]
    SyntaxError { line: u32, col: u32, message: String },
    #[error("unsupported construct at {line}:{col}: {construct}")]
    UnsupportedConstruct {
        line: u32,
        col: u32,
        construct: String,
    },
}

impl ParseError {
    pub(crate) fn syntax(line: u32, col: u32, message: impl Into<String>) -> Self {
        ParseError::SyntaxError {
            line,
            col,
            message: message.into(),
        }
    }

    pub(crate) fn unsupported(line: u32, col: u32, construct: impl Into<String>) -> Self {
        ParseError::UnsupportedConstruct {
            line,
            col,
            construct: construct.into(),
        }
    }

    pub fn line(&self) -> u32 {
        match self {
            ParseError::SyntaxError { line, .. } | ParseError::UnsupportedConstruct { line, .. } => {
                *line
            }
        }
    }
}

/// Parses and validates MiniC source.
pub fn parse_program(source: &str) -> Result<Program, ParseError> {
    let functions = parser::parse(source)?;
    validate(functions)
}

fn validate(functions: Vec<FunctionDef>) -> Result<Program, ParseError> {
    let mut seen = BTreeSet::new();
    for f in &functions {
        if !seen.insert(f.name.as_str()) {
            return Err(ParseError::syntax(
                f.location.0,
                1,
                format!("function `{}` defined twice", f.name),
            ));
        }
    }
    let entry = if functions.iter().any(|f| f.name == "main") {
        "main".to_string()
    } else if functions.len() == 1 {
        functions[0].name.clone()
    } else if functions.is_empty() {
        return Err(ParseError::syntax(1, 1, "no function definitions"));
    } else {
        return Err(ParseError::syntax(
            functions[0].location.0,
            1,
            "no `main` function to use as entry",
        ));
    };
    let entry_fn = functions.iter().find(|f| f.name == entry).unwrap();

    for f in &functions {
        let is_entry = f.name == entry;
        for p in &f.params {
            if p.ty == Type::Argv && !is_entry {
                return Err(ParseError::unsupported(
                    f.location.0,
                    1,
                    format!("argv parameter `{}` outside the entry function", p.name),
                ));
            }
        }
        check_function(f, is_entry, &functions)?;
    }

    let inputs = if entry_fn.is_argv_entry() {
        let shape_ok = entry_fn.params.len() == 2
            && entry_fn.params[0].ty == Type::Int
            && entry_fn.params[1].ty == Type::Argv;
        if !shape_ok {
            return Err(ParseError::unsupported(
                entry_fn.location.0,
                1,
                "entry parameters must be `(int argc, char **argv)` or `char *` inputs",
            ));
        }
        argv_inputs(entry_fn)?
    } else {
        if let Some(p) = entry_fn.params.iter().find(|p| p.ty != Type::CharPtr) {
            return Err(ParseError::unsupported(
                entry_fn.location.0,
                1,
                format!("entry parameter `{}` is not a `char *` input", p.name),
            ));
        }
        entry_fn.params.iter().map(|p| p.name.clone()).collect()
    };

    Ok(Program {
        functions,
        entry,
        inputs,
    })
}

fn argv_inputs(entry: &FunctionDef) -> Result<Vec<String>, ParseError> {
    let mut bound: BTreeMap<usize, String> = BTreeMap::new();
    fn walk(stmts: &[Stmt], bound: &mut BTreeMap<usize, String>) {
        for s in stmts {
            match &s.kind {
                StmtKind::Assign {
                    var,
                    value: Expr::Input(n),
                } => {
                    bound.entry(*n).or_insert_with(|| var.clone());
                }
                StmtKind::If {
                    then_body,
                    else_body,
                    ..
                } => {
                    walk(then_body, bound);
                    walk(else_body, bound);
                }
                StmtKind::While { body, .. } | StmtKind::For { body, .. } => walk(body, bound),
                _ => {}
            }
        }
    }
    walk(&entry.body, &mut bound);
    for (i, n) in bound.keys().enumerate() {
        if *n != i + 1 {
            return Err(ParseError::unsupported(
                entry.location.0,
                1,
                format!("argv[{}] used without binding argv[{}]", n, i + 1),
            ));
        }
    }
    Ok(bound.into_values().collect())
}

fn check_function(f: &FunctionDef, is_entry: bool, all: &[FunctionDef]) -> Result<(), ParseError> {
    let declared = |name: &str| f.type_of(name).is_some();
    let mut err: Option<ParseError> = None;
    let mut visit = |s: &Stmt| -> Result<(), ParseError> {
        let line = s.location.0;
        let undeclared = |name: &str| {
            ParseError::syntax(line, 1, format!("undeclared identifier `{name}`"))
        };
        let check_expr = |e: &Expr, top_level_input: bool| -> Result<(), ParseError> {
            let mut bad = None;
            e.for_each_var(&mut |v| {
                if bad.is_none() && !declared(v) {
                    bad = Some(undeclared(v));
                }
                if bad.is_none() && f.type_of(v) == Some(Type::Argv) {
                    bad = Some(ParseError::unsupported(line, 1, "argv used outside `argv[n]`"));
                }
            });
            if let Some(b) = bad {
                return Err(b);
            }
            if !top_level_input && contains_input(e) {
                return Err(ParseError::unsupported(
                    line,
                    1,
                    "argv[n] outside a plain input-binding assignment",
                ));
            }
            if contains_strcpy(e) {
                return Err(ParseError::unsupported(line, 1, "strcpy used as a value"));
            }
            if let Some((b, n)) = bad_builtin_arity(e) {
                return Err(ParseError::syntax(
                    line,
                    1,
                    format!("`{}` takes {} argument(s), got {n}", b.name(), b.arity()),
                ));
            }
            Ok(())
        };
        match &s.kind {
            StmtKind::Assign { var, value } => {
                if !declared(var) {
                    return Err(undeclared(var));
                }
                if let Some(Local {
                    buffer_size: Some(_),
                    ..
                }) = f.local(var)
                {
                    return Err(ParseError::syntax(line, 1, format!("cannot assign to array `{var}`")));
                }
                let binding = is_entry && matches!(value, Expr::Input(_));
                check_expr(value, binding)?;
            }
            StmtKind::PtrAssign { target, value } => {
                match target {
                    Place::Deref(p) => check_expr(p, false)?,
                    Place::Index(b, i) => {
                        check_expr(b, false)?;
                        check_expr(i, false)?;
                    }
                }
                check_expr(value, false)?;
            }
            StmtKind::If { cond, .. } | StmtKind::While { cond, .. } => check_expr(cond, false)?,
            StmtKind::For { cond, .. } => {
                if let Some(c) = cond {
                    check_expr(c, false)?;
                }
            }
            StmtKind::Return(Some(e)) => check_expr(e, false)?,
            StmtKind::Return(None) => {}
            StmtKind::Call { callee, args } => {
                for a in args {
                    check_expr(a, false)?;
                }
                match callee {
                    Callee::Builtin(b) => {
                        if args.len() != b.arity() {
                            return Err(ParseError::syntax(
                                line,
                                1,
                                format!("`{}` takes {} argument(s)", b.name(), b.arity()),
                            ));
                        }
                    }
                    Callee::User(name) => {
                        if !is_entry {
                            return Err(ParseError::unsupported(
                                line,
                                1,
                                "calls to user functions outside the entry function",
                            ));
                        }
                        let Some(target) = all.iter().find(|g| &g.name == name) else {
                            return Err(ParseError::syntax(
                                line,
                                1,
                                format!("call to undefined function `{name}`"),
                            ));
                        };
                        if target.name == f.name {
                            return Err(ParseError::unsupported(line, 1, "recursion"));
                        }
                        if target.params.len() != args.len() {
                            return Err(ParseError::syntax(
                                line,
                                1,
                                format!(
                                    "`{name}` takes {} argument(s), got {}",
                                    target.params.len(),
                                    args.len()
                                ),
                            ));
                        }
                        for a in args {
                            if !matches!(a, Expr::Var(_) | Expr::Int(_) | Expr::Char(_)) {
                                return Err(ParseError::unsupported(
                                    line,
                                    1,
                                    "user-function arguments must be variables or literals",
                                ));
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    };
    fn walk(
        stmts: &[Stmt],
        visit: &mut impl FnMut(&Stmt) -> Result<(), ParseError>,
    ) -> Result<(), ParseError> {
        for s in stmts {
            visit(s)?;
            match &s.kind {
                StmtKind::If {
                    then_body,
                    else_body,
                    ..
                } => {
                    walk(then_body, visit)?;
                    walk(else_body, visit)?;
                }
                StmtKind::While { body, .. } => walk(body, visit)?,
                StmtKind::For {
                    init, step, body, ..
                } => {
                    if let Some(i) = init {
                        visit(i)?;
                    }
                    if let Some(st) = step {
                        visit(st)?;
                    }
                    walk(body, visit)?;
                }
                _ => {}
            }
        }
        Ok(())
    }
    if let Err(e) = walk(&f.body, &mut visit) {
        err = Some(e);
    }
    match err {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn contains_input(e: &Expr) -> bool {
    match e {
        Expr::Input(_) => true,
        Expr::Int(_) | Expr::Char(_) | Expr::Var(_) | Expr::PostInc { .. } => false,
        Expr::Deref(a) | Expr::Unary(_, a) => contains_input(a),
        Expr::Index(a, b) | Expr::Binary(_, a, b) => contains_input(a) || contains_input(b),
        Expr::Call(_, args) => args.iter().any(contains_input),
    }
}

fn contains_strcpy(e: &Expr) -> bool {
    match e {
        Expr::Call(Builtin::Strcpy, _) => true,
        Expr::Int(_) | Expr::Char(_) | Expr::Var(_) | Expr::PostInc { .. } | Expr::Input(_) => {
            false
        }
        Expr::Deref(a) | Expr::Unary(_, a) => contains_strcpy(a),
        Expr::Index(a, b) | Expr::Binary(_, a, b) => contains_strcpy(a) || contains_strcpy(b),
        Expr::Call(_, args) => args.iter().any(contains_strcpy),
    }
}

fn bad_builtin_arity(e: &Expr) -> Option<(Builtin, usize)> {
    match e {
        Expr::Call(b, args) if args.len() != b.arity() => Some((*b, args.len())),
        Expr::Call(_, args) => args.iter().find_map(bad_builtin_arity),
        Expr::Deref(a) | Expr::Unary(_, a) => bad_builtin_arity(a),
        Expr::Index(a, b) | Expr::Binary(_, a, b) => {
            bad_builtin_arity(a).or_else(|| bad_builtin_arity(b))
        }
        _ => None,
    }
}

/// Identity of a memory object a `char *` can point into.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BufferId {
    /// A fixed-size `char name[N]` array of `func`.
    Local { func: String, name: String },
    /// The string of input parameter `index` (0-based).
    Input(usize),
}

impl BufferId {
    pub fn is_fixed(&self) -> bool {
        matches!(self, BufferId::Local { .. })
    }
}

/// Flow-insensitive points-to sets for every pointer-valued variable,
/// keyed by `(function, variable)`.
#[derive(Debug, Clone, Default)]
pub struct PointsTo {
    sets: BTreeMap<(String, String), BTreeSet<BufferId>>,
}

impl PointsTo {
    pub fn compute(p: &Program) -> Self {
        let mut pt = PointsTo::default();
        for f in &p.functions {
            for (name, _) in f.buffers() {
                pt.sets.entry((f.name.clone(), name.to_string())).or_default().insert(
                    BufferId::Local {
                        func: f.name.clone(),
                        name: name.to_string(),
                    },
                );
            }
        }
        let entry = p.entry_function();
        if !entry.is_argv_entry() {
            for (i, param) in entry.params.iter().enumerate() {
                pt.sets
                    .entry((entry.name.clone(), param.name.clone()))
                    .or_default()
                    .insert(BufferId::Input(i));
            }
        }
        loop {
            let mut changed = false;
            p.visit_statements(&mut |func, s| match &s.kind {
                StmtKind::Assign { var, value } => {
                    let src = pt.sources(&func.name, value);
                    changed |= pt.add(&func.name, var, src);
                }
                StmtKind::Call {
                    callee: Callee::User(name),
                    args,
                } => {
                    if let Some(target) = p.function(name) {
                        for (param, arg) in target.params.iter().zip(args) {
                            let src = pt.sources(&func.name, arg);
                            changed |= pt.add(&target.name, &param.name, src);
                        }
                    }
                }
                _ => {}
            });
            if !changed {
                return pt;
            }
        }
    }

    fn add(&mut self, func: &str, var: &str, src: BTreeSet<BufferId>) -> bool {
        if src.is_empty() {
            return false;
        }
        let set = self.sets.entry((func.to_string(), var.to_string())).or_default();
        let before = set.len();
        set.extend(src);
        set.len() != before
    }

    pub fn of_var(&self, func: &str, var: &str) -> BTreeSet<BufferId> {
        self.sets
            .get(&(func.to_string(), var.to_string()))
            .cloned()
            .unwrap_or_default()
    }

    /// Buffers a pointer-valued expression may point into.
    pub fn sources(&self, func: &str, e: &Expr) -> BTreeSet<BufferId> {
        match e {
            Expr::Var(v) | Expr::PostInc { var: v, .. } => self.of_var(func, v),
            Expr::Input(n) => [BufferId::Input(n - 1)].into_iter().collect(),
            Expr::Binary(BinOp::Add | BinOp::Sub, a, b) => {
                let mut s = self.sources(func, a);
                s.extend(self.sources(func, b));
                s
            }
            _ => BTreeSet::new(),
        }
    }
}

/// Statements that write through a pointer into a fixed-size buffer:
/// `strcpy` destinations and `*p = …` / `p[i] = …` stores.
///
/// A store `*q = …` that immediately follows, in the same block, a store to
/// `*q` or a `strcpy(q, …)` with `q` unchanged re-writes a byte the previous
/// statement already wrote, so it cannot be the first out-of-bounds write and
/// is not reported.
pub fn vulnerable_statements(p: &Program) -> BTreeSet<Location> {
    let pt = PointsTo::compute(p);
    let mut out = BTreeSet::new();
    let hits_buffer = |func: &str, e: &Expr| pt.sources(func, e).iter().any(BufferId::is_fixed);

    fn walk(
        func: &FunctionDef,
        stmts: &[Stmt],
        hits: &dyn Fn(&str, &Expr) -> bool,
        out: &mut BTreeSet<Location>,
    ) {
        let mut prev_write: Option<&str> = None;
        for s in stmts {
            let mut this_write = None;
            match &s.kind {
                StmtKind::PtrAssign { target, value } => {
                    let rewrite = match (target, prev_write) {
                        (Place::Deref(Expr::Var(q)), Some(prev)) => q == prev,
                        _ => false,
                    };
                    if hits(&func.name, target.base()) && !rewrite {
                        out.insert(s.location);
                    }
                    let mut incs = false;
                    value.for_each_post_inc(&mut |_| incs = true);
                    if let Place::Deref(Expr::Var(q)) = target {
                        if !incs {
                            this_write = Some(q.as_str());
                        }
                    }
                }
                StmtKind::Call {
                    callee: Callee::Builtin(Builtin::Strcpy),
                    args,
                } => {
                    if hits(&func.name, &args[0]) {
                        out.insert(s.location);
                    }
                    if let Expr::Var(q) = &args[0] {
                        this_write = Some(q.as_str());
                    }
                }
                StmtKind::If {
                    then_body,
                    else_body,
                    ..
                } => {
                    walk(func, then_body, hits, out);
                    walk(func, else_body, hits, out);
                }
                StmtKind::While { body, .. } => walk(func, body, hits, out),
                StmtKind::For {
                    init, step, body, ..
                } => {
                    for sub in [init, step].into_iter().flatten() {
                        walk(func, std::slice::from_ref(sub.as_ref()), hits, out);
                    }
                    walk(func, body, hits, out);
                }
                _ => {}
            }
            prev_write = this_write;
        }
    }
    for f in &p.functions {
        walk(f, &f.body, &hits_buffer, &mut out);
    }
    out
}
