use std::fmt;

use serde::{Deserialize, Serialize};

/// A program point, identified by the 1-based source line of its statement.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct Location(pub u32);

impl Location {
    pub fn line(self) -> u32 {
        self.0
    }
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Type {
    Int,
    Char,
    /// `char *`, a pointer walking some character buffer.
    CharPtr,
    /// `char **argv` / `char *argv[]` on the entry function.
    Argv,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Param {
    pub name: String,
    pub ty: Type,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Local {
    pub name: String,
    pub ty: Type,
    /// Present for fixed-size `char name[N]` arrays.
    pub buffer_size: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReturnType {
    Void,
    Int,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionDef {
    pub name: String,
    /// Line of the function header.
    pub location: Location,
    pub ret: ReturnType,
    pub params: Vec<Param>,
    pub locals: Vec<Local>,
    pub body: Vec<Stmt>,
}

impl FunctionDef {
    pub fn local(&self, name: &str) -> Option<&Local> {
        self.locals.iter().find(|l| l.name == name)
    }

    pub fn param(&self, name: &str) -> Option<&Param> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn type_of(&self, name: &str) -> Option<Type> {
        self.param(name)
            .map(|p| p.ty)
            .or_else(|| self.local(name).map(|l| l.ty))
    }

    /// Fixed-size character arrays declared in this function, in declaration order.
    pub fn buffers(&self) -> impl Iterator<Item = (&str, usize)> {
        self.locals
            .iter()
            .filter_map(|l| l.buffer_size.map(|n| (l.name.as_str(), n)))
    }

    pub fn is_argv_entry(&self) -> bool {
        self.params.iter().any(|p| p.ty == Type::Argv)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stmt {
    pub location: Location,
    pub kind: StmtKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StmtKind {
    /// `x = e;` on a scalar or pointer variable.
    Assign { var: String, value: Expr },
    /// `*p = e;`, `*p++ = e;`, `p[i] = e;`
    PtrAssign { target: Place, value: Expr },
    If {
        cond: Expr,
        then_body: Vec<Stmt>,
        else_body: Vec<Stmt>,
    },
    While { cond: Expr, body: Vec<Stmt> },
    /// Init and step carry the location of the `for` itself.
    For {
        init: Option<Box<Stmt>>,
        cond: Option<Expr>,
        step: Option<Box<Stmt>>,
        body: Vec<Stmt>,
    },
    Call { callee: Callee, args: Vec<Expr> },
    Return(Option<Expr>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Place {
    Deref(Expr),
    Index(Expr, Expr),
}

impl Place {
    /// The pointer expression the write goes through.
    pub fn base(&self) -> &Expr {
        match self {
            Place::Deref(e) | Place::Index(e, _) => e,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Callee {
    Builtin(Builtin),
    User(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Builtin {
    Strcpy,
    Strlen,
    Toupper,
}

impl Builtin {
    pub fn name(self) -> &'static str {
        match self {
            Builtin::Strcpy => "strcpy",
            Builtin::Strlen => "strlen",
            Builtin::Toupper => "toupper",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "strcpy" => Some(Builtin::Strcpy),
            "strlen" => Some(Builtin::Strlen),
            "toupper" => Some(Builtin::Toupper),
            _ => None,
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Builtin::Strcpy => 2,
            Builtin::Strlen | Builtin::Toupper => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnOp {
    Neg,
    Not,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::And => "&&",
            BinOp::Or => "||",
        }
    }

    pub(crate) fn precedence(self) -> u8 {
        match self {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Eq | BinOp::Ne => 3,
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 4,
            BinOp::Add | BinOp::Sub => 5,
            BinOp::Mul => 6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    Int(i64),
    Char(u8),
    Var(String),
    /// `argv[n]` (n >= 1) in the entry function.
    Input(usize),
    Deref(Box<Expr>),
    Index(Box<Expr>, Box<Expr>),
    /// `x++` (delta 1) or `x--` (delta -1); yields the old value.
    PostInc { var: String, delta: i64 },
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Builtin, Vec<Expr>),
}

impl Expr {
    /// Calls `f` on every variable name read by this expression, including
    /// the targets of post-increments.
    pub fn for_each_var<'a>(&'a self, f: &mut impl FnMut(&'a str)) {
        match self {
            Expr::Int(_) | Expr::Char(_) | Expr::Input(_) => {}
            Expr::Var(v) | Expr::PostInc { var: v, .. } => f(v),
            Expr::Deref(e) | Expr::Unary(_, e) => e.for_each_var(f),
            Expr::Index(a, b) | Expr::Binary(_, a, b) => {
                a.for_each_var(f);
                b.for_each_var(f);
            }
            Expr::Call(_, args) => args.iter().for_each(|a| a.for_each_var(f)),
        }
    }

    /// Variables modified as a side effect (`x++`).
    pub fn for_each_post_inc<'a>(&'a self, f: &mut impl FnMut(&'a str)) {
        match self {
            Expr::Int(_) | Expr::Char(_) | Expr::Input(_) | Expr::Var(_) => {}
            Expr::PostInc { var, .. } => f(var),
            Expr::Deref(e) | Expr::Unary(_, e) => e.for_each_post_inc(f),
            Expr::Index(a, b) | Expr::Binary(_, a, b) => {
                a.for_each_post_inc(f);
                b.for_each_post_inc(f);
            }
            Expr::Call(_, args) => args.iter().for_each(|a| a.for_each_post_inc(f)),
        }
    }

    pub fn vars(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.for_each_var(&mut |v| out.push(v));
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Program {
    pub functions: Vec<FunctionDef>,
    /// Name of the entry function.
    pub entry: String,
    /// Input parameter names, in argument order.
    pub inputs: Vec<String>,
}

impl Program {
    pub fn function(&self, name: &str) -> Option<&FunctionDef> {
        self.functions.iter().find(|f| f.name == name)
    }

    pub fn entry_function(&self) -> &FunctionDef {
        self.function(&self.entry)
            .expect("validated program always has its entry function")
    }

    /// Visits every statement (including `for` init/step) with its enclosing function.
    pub fn visit_statements<'a>(&'a self, f: &mut impl FnMut(&'a FunctionDef, &'a Stmt)) {
        fn walk<'a>(
            func: &'a FunctionDef,
            stmts: &'a [Stmt],
            f: &mut impl FnMut(&'a FunctionDef, &'a Stmt),
        ) {
            for s in stmts {
                f(func, s);
                match &s.kind {
                    StmtKind::If {
                        then_body,
                        else_body,
                        ..
                    } => {
                        walk(func, then_body, f);
                        walk(func, else_body, f);
                    }
                    StmtKind::While { body, .. } => walk(func, body, f),
                    StmtKind::For {
                        init, step, body, ..
                    } => {
                        if let Some(i) = init {
                            f(func, i);
                        }
                        walk(func, body, f);
                        if let Some(s) = step {
                            f(func, s);
                        }
                    }
                    _ => {}
                }
            }
        }
        for func in &self.functions {
            walk(func, &func.body, f);
        }
    }

    /// Locations of all top-level statements (not `for` sub-clauses), in source order.
    pub fn statement_locations(&self) -> Vec<Location> {
        let mut out = Vec::new();
        fn walk(stmts: &[Stmt], out: &mut Vec<Location>) {
            for s in stmts {
                out.push(s.location);
                match &s.kind {
                    StmtKind::If {
                        then_body,
                        else_body,
                        ..
                    } => {
                        walk(then_body, out);
                        walk(else_body, out);
                    }
                    StmtKind::While { body, .. } | StmtKind::For { body, .. } => walk(body, out),
                    _ => {}
                }
            }
        }
        let mut funcs: Vec<&FunctionDef> = self.functions.iter().collect();
        funcs.sort_by_key(|f| f.location);
        for f in funcs {
            walk(&f.body, &mut out);
        }
        out
    }

    /// Every location a TDS may mention: statements plus function headers of
    /// entry functions that take their inputs as parameters.
    pub fn all_locations(&self) -> Vec<Location> {
        let mut out = self.statement_locations();
        let entry = self.entry_function();
        if !entry.is_argv_entry() && !entry.params.is_empty() {
            out.push(entry.location);
        }
        out.sort();
        out
    }

    /// Locations where input parameters are bound, indexed by input position.
    pub fn input_bindings(&self) -> Vec<Location> {
        let entry = self.entry_function();
        if !entry.is_argv_entry() {
            return vec![entry.location; self.inputs.len()];
        }
        let mut out = vec![None; self.inputs.len()];
        self.visit_statements(&mut |func, s| {
            if func.name != entry.name {
                return;
            }
            if let StmtKind::Assign {
                value: Expr::Input(n),
                ..
            } = &s.kind
            {
                if let Some(slot) = out.get_mut(n - 1) {
                    slot.get_or_insert(s.location);
                }
            }
        });
        out.into_iter()
            .map(|l| l.expect("validated program binds every input"))
            .collect()
    }

    /// The function whose body contains the statement at `loc`.
    pub fn function_at(&self, loc: Location) -> Option<&FunctionDef> {
        let mut found = None;
        self.visit_statements(&mut |func, s| {
            if s.location == loc && found.is_none() {
                found = Some(func);
            }
        });
        found.or_else(|| self.functions.iter().find(|f| f.location == loc))
    }

    /// The top-level statement labelled `loc`.
    pub fn statement_at(&self, loc: Location) -> Option<&Stmt> {
        let mut found = None;
        self.visit_statements(&mut |_, s| {
            if s.location == loc && found.is_none() {
                found = Some(s);
            }
        });
        found
    }

    /// Copy with all location labels zeroed, for structural comparison.
    pub fn without_locations(&self) -> Program {
        fn strip(stmts: &[Stmt]) -> Vec<Stmt> {
            stmts.iter().map(strip_one).collect()
        }
        fn strip_one(s: &Stmt) -> Stmt {
            let kind = match &s.kind {
                StmtKind::If {
                    cond,
                    then_body,
                    else_body,
                } => StmtKind::If {
                    cond: cond.clone(),
                    then_body: strip(then_body),
                    else_body: strip(else_body),
                },
                StmtKind::While { cond, body } => StmtKind::While {
                    cond: cond.clone(),
                    body: strip(body),
                },
                StmtKind::For {
                    init,
                    cond,
                    step,
                    body,
                } => StmtKind::For {
                    init: init.as_ref().map(|i| Box::new(strip_one(i))),
                    cond: cond.clone(),
                    step: step.as_ref().map(|s| Box::new(strip_one(s))),
                    body: strip(body),
                },
                k => k.clone(),
            };
            Stmt {
                location: Location(0),
                kind,
            }
        }
        Program {
            functions: self
                .functions
                .iter()
                .map(|f| FunctionDef {
                    location: Location(0),
                    body: strip(&f.body),
                    ..f.clone()
                })
                .collect(),
            ..self.clone()
        }
    }
}
