//! Slot-resolved form of the AST used by the interpreter.

use std::collections::HashMap;

use crate::lang::{BinOp, Builtin, Callee, Expr, FunctionDef, Location, Place, Program, Stmt, StmtKind, Type, UnOp};

#[derive(Debug, Clone)]
pub(crate) enum LExpr {
    Int(i64),
    Slot(usize),
    /// Input string `i` (0-based).
    Input(usize),
    Deref(Box<LExpr>),
    Index(Box<LExpr>, Box<LExpr>),
    PostInc(usize, i64),
    Unary(UnOp, Box<LExpr>),
    Binary(BinOp, Box<LExpr>, Box<LExpr>),
    Strlen(Box<LExpr>),
    Toupper(Box<LExpr>),
}

#[derive(Debug, Clone)]
pub(crate) enum LKind {
    Assign(usize, LExpr),
    Store(LExpr, Option<LExpr>, LExpr),
    If(LExpr, Vec<LStmt>, Vec<LStmt>),
    While(LExpr, Vec<LStmt>),
    For(Option<Box<LStmt>>, Option<LExpr>, Option<Box<LStmt>>, Vec<LStmt>),
    Call(usize, Vec<LExpr>),
    Strcpy(LExpr, LExpr),
    Eval(LExpr),
    Return(Option<LExpr>),
}

#[derive(Debug, Clone)]
pub(crate) struct LStmt {
    pub loc: Location,
    pub kind: LKind,
}

#[derive(Debug, Clone)]
pub(crate) struct LFunc {
    pub name: String,
    pub location: Location,
    pub slot_names: Vec<String>,
    pub params: Vec<usize>,
    /// `(slot, size)` for each local array.
    pub arrays: Vec<(usize, usize)>,
    pub body: Vec<LStmt>,
    pub argv_entry: bool,
}

#[derive(Debug, Clone)]
pub(crate) struct LProgram {
    pub funcs: Vec<LFunc>,
    pub entry: usize,
    pub inputs: Vec<String>,
}

pub(crate) fn lower(p: &Program) -> LProgram {
    let index: HashMap<&str, usize> = p
        .functions
        .iter()
        .enumerate()
        .map(|(i, f)| (f.name.as_str(), i))
        .collect();
    let funcs = p.functions.iter().map(|f| lower_fn(f, &index)).collect();
    LProgram {
        funcs,
        entry: index[p.entry.as_str()],
        inputs: p.inputs.clone(),
    }
}

struct Ctx<'a> {
    slots: HashMap<&'a str, usize>,
    funcs: &'a HashMap<&'a str, usize>,
}

fn lower_fn(f: &FunctionDef, funcs: &HashMap<&str, usize>) -> LFunc {
    let mut slot_names = Vec::new();
    let mut slots = HashMap::new();
    for name in f.params.iter().map(|p| &p.name).chain(f.locals.iter().map(|l| &l.name)) {
        slots.insert(name.as_str(), slot_names.len());
        slot_names.push(name.clone());
    }
    let ctx = Ctx { slots, funcs };
    LFunc {
        name: f.name.clone(),
        location: f.location,
        params: f
            .params
            .iter()
            .filter(|p| p.ty != Type::Argv)
            .map(|p| ctx.slots[p.name.as_str()])
            .collect(),
        arrays: f.buffers().map(|(n, size)| (ctx.slots[n], size)).collect(),
        body: f.body.iter().map(|s| ctx.stmt(s)).collect(),
        argv_entry: f.is_argv_entry(),
        slot_names,
    }
}

impl Ctx<'_> {
    fn stmt(&self, s: &Stmt) -> LStmt {
        let kind = match &s.kind {
            StmtKind::Assign { var, value } => LKind::Assign(self.slots[var.as_str()], self.expr(value)),
            StmtKind::PtrAssign { target, value } => match target {
                Place::Deref(b) => LKind::Store(self.expr(b), None, self.expr(value)),
                Place::Index(b, i) => LKind::Store(self.expr(b), Some(self.expr(i)), self.expr(value)),
            },
            StmtKind::If {
                cond,
                then_body,
                else_body,
            } => LKind::If(self.expr(cond), self.block(then_body), self.block(else_body)),
            StmtKind::While { cond, body } => LKind::While(self.expr(cond), self.block(body)),
            StmtKind::For {
                init,
                cond,
                step,
                body,
            } => LKind::For(
                init.as_ref().map(|s| Box::new(self.stmt(s))),
                cond.as_ref().map(|c| self.expr(c)),
                step.as_ref().map(|s| Box::new(self.stmt(s))),
                self.block(body),
            ),
            StmtKind::Call {
                callee: Callee::User(name),
                args,
            } => LKind::Call(self.funcs[name.as_str()], args.iter().map(|a| self.expr(a)).collect()),
            StmtKind::Call {
                callee: Callee::Builtin(Builtin::Strcpy),
                args,
            } => LKind::Strcpy(self.expr(&args[0]), self.expr(&args[1])),
            StmtKind::Call {
                callee: Callee::Builtin(b),
                args,
            } => LKind::Eval(self.expr(&Expr::Call(*b, args.clone()))),
            StmtKind::Return(v) => LKind::Return(v.as_ref().map(|e| self.expr(e))),
        };
        LStmt { loc: s.location, kind }
    }

    fn block(&self, b: &[Stmt]) -> Vec<LStmt> {
        b.iter().map(|s| self.stmt(s)).collect()
    }

    fn expr(&self, e: &Expr) -> LExpr {
        let bx = |e: &Expr| Box::new(self.expr(e));
        match e {
            Expr::Int(n) => LExpr::Int(*n),
            Expr::Char(c) => LExpr::Int(*c as i64),
            Expr::Var(v) => LExpr::Slot(self.slots[v.as_str()]),
            Expr::Input(n) => LExpr::Input(n - 1),
            Expr::Deref(a) => LExpr::Deref(bx(a)),
            Expr::Index(a, b) => LExpr::Index(bx(a), bx(b)),
            Expr::PostInc { var, delta } => LExpr::PostInc(self.slots[var.as_str()], *delta),
            Expr::Unary(op, a) => LExpr::Unary(*op, bx(a)),
            Expr::Binary(op, a, b) => LExpr::Binary(*op, bx(a), bx(b)),
            Expr::Call(Builtin::Strlen, args) => LExpr::Strlen(bx(&args[0])),
            Expr::Call(Builtin::Toupper, args) => LExpr::Toupper(bx(&args[0])),
            Expr::Call(Builtin::Strcpy, _) => unreachable!("strcpy is statement-only"),
        }
    }
}
