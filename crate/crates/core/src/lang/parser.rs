use std::collections::BTreeSet;

use super::ast::*;
use super::lexer::{tokenize, Tok, Token};
use super::ParseError;

const UNSUPPORTED_KEYWORDS: &[&str] = &[
    "struct", "union", "enum", "typedef", "unsigned", "signed", "long", "short", "float", "double",
    "const", "static", "extern", "volatile", "do", "switch", "case", "default", "goto", "break",
    "continue", "sizeof", "malloc", "free",
];

pub(crate) fn parse(src: &str) -> Result<Vec<FunctionDef>, ParseError> {
    let toks = tokenize(src)?;
    let mut p = Parser {
        toks,
        pos: 0,
        used_lines: BTreeSet::new(),
        params: Vec::new(),
    };
    let mut funcs = Vec::new();
    while !p.at_eof() {
        funcs.push(p.function()?);
    }
    Ok(funcs)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    used_lines: BTreeSet<u32>,
    /// Parameters of the function being parsed, for recognising `argv[n]`.
    params: Vec<Param>,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn peek_at(&self, n: usize) -> &Tok {
        &self.toks[(self.pos + n).min(self.toks.len() - 1)].tok
    }

    fn at_eof(&self) -> bool {
        matches!(self.peek().tok, Tok::Eof)
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn is_punct(&self, p: &str) -> bool {
        matches!(&self.peek().tok, Tok::Punct(q) if *q == p)
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(&self.peek().tok, Tok::Ident(s) if s == kw)
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if self.is_punct(p) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_punct(&mut self, p: &str) -> Result<(), ParseError> {
        if self.eat_punct(p) {
            Ok(())
        } else {
            Err(self.error(format!("expected `{p}`")))
        }
    }

    fn error(&self, msg: impl Into<String>) -> ParseError {
        let t = self.peek();
        let found = match &t.tok {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Int(n) => format!("`{n}`"),
            Tok::Char(c) => format!("character literal {:?}", *c as char),
            Tok::Punct(p) => format!("`{p}`"),
            Tok::Eof => "end of input".to_string(),
        };
        ParseError::syntax(t.line, t.col, format!("{}, found {found}", msg.into()))
    }

    fn check_supported(&self) -> Result<(), ParseError> {
        if let Tok::Ident(s) = &self.peek().tok {
            if UNSUPPORTED_KEYWORDS.contains(&s.as_str()) {
                let t = self.peek();
                return Err(ParseError::unsupported(t.line, t.col, format!("`{s}`")));
            }
        }
        Ok(())
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        self.check_supported()?;
        match &self.peek().tok {
            Tok::Ident(s) if !is_type_kw(s) && !is_stmt_kw(s) => {
                let s = s.clone();
                self.bump();
                Ok(s)
            }
            _ => Err(self.error("expected identifier")),
        }
    }

    fn function(&mut self) -> Result<FunctionDef, ParseError> {
        self.check_supported()?;
        let header = self.peek().clone();
        let ret = if self.is_kw("void") {
            self.bump();
            ReturnType::Void
        } else if self.is_kw("int") {
            self.bump();
            ReturnType::Int
        } else if self.is_kw("char") {
            return Err(ParseError::unsupported(
                header.line,
                header.col,
                "functions returning char",
            ));
        } else {
            return Err(self.error("expected function definition"));
        };
        let name = self.ident()?;
        self.expect_punct("(")?;
        let params = self.params()?;
        self.params = params.clone();
        self.expect_punct("{")?;

        let mut locals: Vec<Local> = Vec::new();
        let mut body = Vec::new();
        while !self.is_punct("}") {
            if self.at_eof() {
                return Err(self.error("expected `}`"));
            }
            self.check_supported()?;
            if self.is_kw("int") || self.is_kw("char") {
                self.declaration(&mut locals, &mut body)?;
            } else {
                body.push(self.statement()?);
            }
        }
        self.bump();
        Ok(FunctionDef {
            name,
            location: Location(header.line),
            ret,
            params,
            locals,
            body,
        })
    }

    fn params(&mut self) -> Result<Vec<Param>, ParseError> {
        let mut params = Vec::new();
        if self.eat_punct(")") {
            return Ok(params);
        }
        if self.is_kw("void") && matches!(self.peek_at(1), Tok::Punct(")")) {
            self.bump();
            self.bump();
            return Ok(params);
        }
        loop {
            self.check_supported()?;
            let base = if self.is_kw("int") {
                Type::Int
            } else if self.is_kw("char") {
                Type::Char
            } else {
                return Err(self.error("expected parameter type"));
            };
            self.bump();
            let mut stars = 0;
            while self.eat_punct("*") {
                stars += 1;
            }
            let name = self.ident()?;
            if self.eat_punct("[") {
                self.expect_punct("]")?;
                stars += 1;
            }
            let ty = match (base, stars) {
                (Type::Int, 0) => Type::Int,
                (Type::Char, 0) => Type::Char,
                (Type::Char, 1) => Type::CharPtr,
                (Type::Char, 2) => Type::Argv,
                _ => {
                    let t = self.peek();
                    return Err(ParseError::unsupported(
                        t.line,
                        t.col,
                        format!("parameter type of `{name}`"),
                    ));
                }
            };
            params.push(Param { name, ty });
            if self.eat_punct(")") {
                return Ok(params);
            }
            self.expect_punct(",")?;
        }
    }

    fn declaration(&mut self, locals: &mut Vec<Local>, body: &mut Vec<Stmt>) -> Result<(), ParseError> {
        let base = if self.is_kw("int") { Type::Int } else { Type::Char };
        self.bump();
        loop {
            let start = self.peek().clone();
            let mut stars = 0;
            while self.eat_punct("*") {
                stars += 1;
            }
            let name = self.ident()?;
            let ty = match (base, stars) {
                (Type::Int, 0) => Type::Int,
                (Type::Char, 0) => Type::Char,
                (Type::Char, 1) => Type::CharPtr,
                _ => {
                    return Err(ParseError::unsupported(
                        start.line,
                        start.col,
                        format!("declared type of `{name}`"),
                    ))
                }
            };
            let mut buffer_size = None;
            if self.eat_punct("[") {
                let t = self.peek().clone();
                match t.tok {
                    Tok::Int(n) if n > 0 && ty == Type::Char => {
                        self.bump();
                        buffer_size = Some(n as usize);
                    }
                    Tok::Int(_) if ty == Type::Char => {
                        return Err(ParseError::syntax(t.line, t.col, "buffer size must be positive"))
                    }
                    Tok::Int(_) => {
                        return Err(ParseError::unsupported(t.line, t.col, "arrays of non-char type"))
                    }
                    _ => {
                        return Err(ParseError::unsupported(
                            t.line,
                            t.col,
                            "array size that is not an integer literal",
                        ))
                    }
                }
                self.expect_punct("]")?;
            }
            if locals.iter().any(|l| l.name == name) || self.params.iter().any(|p| p.name == name) {
                return Err(ParseError::syntax(
                    start.line,
                    start.col,
                    format!("`{name}` declared twice"),
                ));
            }
            locals.push(Local {
                name: name.clone(),
                ty,
                buffer_size,
            });
            if self.is_punct("=") {
                if buffer_size.is_some() {
                    let t = self.peek();
                    return Err(ParseError::unsupported(t.line, t.col, "array initialiser"));
                }
                self.bump();
                let value = self.expr()?;
                let location = self.claim_line(&start)?;
                body.push(Stmt {
                    location,
                    kind: StmtKind::Assign { var: name, value },
                });
            }
            if self.eat_punct(";") {
                return Ok(());
            }
            self.expect_punct(",")?;
        }
    }

    fn claim_line(&mut self, t: &Token) -> Result<Location, ParseError> {
        if !self.used_lines.insert(t.line) {
            return Err(ParseError::unsupported(
                t.line,
                t.col,
                "more than one statement on a line",
            ));
        }
        Ok(Location(t.line))
    }

    fn body(&mut self) -> Result<Vec<Stmt>, ParseError> {
        if self.eat_punct("{") {
            let mut out = Vec::new();
            while !self.eat_punct("}") {
                if self.at_eof() {
                    return Err(self.error("expected `}`"));
                }
                if self.is_kw("int") || self.is_kw("char") {
                    let t = self.peek();
                    return Err(ParseError::unsupported(t.line, t.col, "declaration inside a nested block"));
                }
                out.push(self.statement()?);
            }
            Ok(out)
        } else {
            Ok(vec![self.statement()?])
        }
    }

    fn statement(&mut self) -> Result<Stmt, ParseError> {
        self.check_supported()?;
        let start = self.peek().clone();
        if self.is_punct("{") {
            return Err(ParseError::unsupported(start.line, start.col, "bare block"));
        }
        if self.is_punct(";") {
            return Err(ParseError::unsupported(start.line, start.col, "empty statement"));
        }
        let location = self.claim_line(&start)?;
        let kind = if self.is_kw("if") {
            self.bump();
            self.expect_punct("(")?;
            let cond = self.expr()?;
            self.expect_punct(")")?;
            let then_body = self.body()?;
            let else_body = if self.is_kw("else") {
                self.bump();
                if self.is_kw("if") {
                    vec![self.statement()?]
                } else {
                    self.body()?
                }
            } else {
                Vec::new()
            };
            StmtKind::If {
                cond,
                then_body,
                else_body,
            }
        } else if self.is_kw("while") {
            self.bump();
            self.expect_punct("(")?;
            let cond = self.expr()?;
            self.expect_punct(")")?;
            StmtKind::While {
                cond,
                body: self.body()?,
            }
        } else if self.is_kw("for") {
            self.bump();
            self.expect_punct("(")?;
            let init = if self.is_punct(";") {
                None
            } else {
                Some(Box::new(Stmt {
                    location,
                    kind: self.simple()?,
                }))
            };
            self.expect_punct(";")?;
            let cond = if self.is_punct(";") { None } else { Some(self.expr()?) };
            self.expect_punct(";")?;
            let step = if self.is_punct(")") {
                None
            } else {
                Some(Box::new(Stmt {
                    location,
                    kind: self.simple()?,
                }))
            };
            self.expect_punct(")")?;
            StmtKind::For {
                init,
                cond,
                step,
                body: self.body()?,
            }
        } else if self.is_kw("return") {
            self.bump();
            let value = if self.is_punct(";") { None } else { Some(self.expr()?) };
            self.expect_punct(";")?;
            StmtKind::Return(value)
        } else if self.is_kw("else") {
            return Err(self.error("`else` without `if`"));
        } else {
            let k = self.simple()?;
            self.expect_punct(";")?;
            k
        };
        Ok(Stmt { location, kind })
    }

    /// Assignment, increment or call, without the trailing `;`.
    fn simple(&mut self) -> Result<StmtKind, ParseError> {
        let start = self.peek().clone();
        // `(void) call(...)`
        if self.is_punct("(") && matches!(self.peek_at(1), Tok::Ident(s) if s == "void") {
            self.bump();
            self.bump();
            self.expect_punct(")")?;
            let e = self.expr()?;
            return self.call_stmt(e, &start);
        }
        if self.is_punct("++") || self.is_punct("--") {
            let delta = if self.is_punct("++") { 1 } else { -1 };
            self.bump();
            let var = self.ident()?;
            return Ok(increment(var, delta));
        }
        if let (Tok::Ident(name), Tok::Punct("(")) = (&self.peek().tok, self.peek_at(1)) {
            if Builtin::from_name(name).is_none() && !is_stmt_kw(name) && !is_type_kw(name) {
                let callee = name.clone();
                self.bump();
                self.bump();
                let args = self.args()?;
                return Ok(StmtKind::Call {
                    callee: Callee::User(callee),
                    args,
                });
            }
        }
        let lhs = self.expr()?;
        let op = match &self.peek().tok {
            Tok::Punct(p @ ("=" | "+=" | "-=")) => Some(*p),
            _ => None,
        };
        let Some(op) = op else {
            return match lhs {
                Expr::PostInc { var, delta } => Ok(increment(var, delta)),
                Expr::Call(..) => self.call_stmt(lhs, &start),
                _ => Err(ParseError::unsupported(
                    start.line,
                    start.col,
                    "expression statement without effect",
                )),
            };
        };
        self.bump();
        let rhs = self.expr()?;
        let value = match op {
            "=" => rhs,
            "+=" => Expr::Binary(BinOp::Add, Box::new(lhs.clone()), Box::new(rhs)),
            _ => Expr::Binary(BinOp::Sub, Box::new(lhs.clone()), Box::new(rhs)),
        };
        match lhs {
            Expr::Var(var) => Ok(StmtKind::Assign { var, value }),
            Expr::Deref(p) if op == "=" => Ok(StmtKind::PtrAssign {
                target: Place::Deref(*p),
                value,
            }),
            Expr::Index(b, i) if op == "=" => Ok(StmtKind::PtrAssign {
                target: Place::Index(*b, *i),
                value,
            }),
            Expr::Deref(_) | Expr::Index(..) => Err(ParseError::unsupported(
                start.line,
                start.col,
                "compound assignment through a pointer",
            )),
            _ => Err(ParseError::syntax(start.line, start.col, "invalid assignment target")),
        }
    }

    fn call_stmt(&self, e: Expr, start: &Token) -> Result<StmtKind, ParseError> {
        match e {
            Expr::Call(b, args) => Ok(StmtKind::Call {
                callee: Callee::Builtin(b),
                args,
            }),
            _ => Err(ParseError::syntax(start.line, start.col, "expected a call after `(void)`")),
        }
    }

    fn args(&mut self) -> Result<Vec<Expr>, ParseError> {
        let mut args = Vec::new();
        if self.eat_punct(")") {
            return Ok(args);
        }
        loop {
            args.push(self.expr()?);
            if self.eat_punct(")") {
                return Ok(args);
            }
            self.expect_punct(",")?;
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        self.binary(1)
    }

    fn binary(&mut self, min_prec: u8) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match &self.peek().tok {
                Tok::Punct(p) => match *p {
                    "||" => BinOp::Or,
                    "&&" => BinOp::And,
                    "==" => BinOp::Eq,
                    "!=" => BinOp::Ne,
                    "<" => BinOp::Lt,
                    "<=" => BinOp::Le,
                    ">" => BinOp::Gt,
                    ">=" => BinOp::Ge,
                    "+" => BinOp::Add,
                    "-" => BinOp::Sub,
                    "*" => BinOp::Mul,
                    _ => break,
                },
                _ => break,
            };
            let prec = op.precedence();
            if prec < min_prec {
                break;
            }
            self.bump();
            let rhs = self.binary(prec + 1)?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat_punct("!") {
            return Ok(Expr::Unary(UnOp::Not, Box::new(self.unary()?)));
        }
        if self.eat_punct("-") {
            return Ok(Expr::Unary(UnOp::Neg, Box::new(self.unary()?)));
        }
        if self.eat_punct("*") {
            return Ok(Expr::Deref(Box::new(self.unary()?)));
        }
        if self.is_punct("++") || self.is_punct("--") {
            let t = self.peek();
            return Err(ParseError::unsupported(t.line, t.col, "prefix increment inside an expression"));
        }
        self.postfix()
    }

    fn postfix(&mut self) -> Result<Expr, ParseError> {
        let mut e = self.primary()?;
        loop {
            if self.is_punct("[") {
                let t = self.peek().clone();
                self.bump();
                let idx = self.expr()?;
                self.expect_punct("]")?;
                if let Expr::Var(v) = &e {
                    if self.params.iter().any(|p| &p.name == v && p.ty == Type::Argv) {
                        match idx {
                            Expr::Int(n) if n >= 1 => {
                                e = Expr::Input(n as usize);
                                continue;
                            }
                            _ => {
                                return Err(ParseError::unsupported(
                                    t.line,
                                    t.col,
                                    "argv indexed by anything but a positive literal",
                                ))
                            }
                        }
                    }
                }
                e = Expr::Index(Box::new(e), Box::new(idx));
            } else if self.is_punct("++") || self.is_punct("--") {
                let t = self.peek().clone();
                let delta = if self.is_punct("++") { 1 } else { -1 };
                self.bump();
                match e {
                    Expr::Var(var) => e = Expr::PostInc { var, delta },
                    _ => {
                        return Err(ParseError::unsupported(
                            t.line,
                            t.col,
                            "increment of a non-variable",
                        ))
                    }
                }
            } else {
                return Ok(e);
            }
        }
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        self.check_supported()?;
        let t = self.peek().clone();
        match t.tok {
            Tok::Int(n) => {
                self.bump();
                Ok(Expr::Int(n))
            }
            Tok::Char(c) => {
                self.bump();
                Ok(Expr::Char(c))
            }
            Tok::Punct("(") => {
                self.bump();
                if self.is_kw("char") || self.is_kw("int") || self.is_kw("void") {
                    return Err(ParseError::unsupported(t.line, t.col, "cast"));
                }
                let e = self.expr()?;
                self.expect_punct(")")?;
                Ok(e)
            }
            Tok::Ident(ref name) => {
                if matches!(self.peek_at(1), Tok::Punct("(")) {
                    let Some(b) = Builtin::from_name(name) else {
                        return Err(ParseError::unsupported(
                            t.line,
                            t.col,
                            format!("call to `{name}` inside an expression"),
                        ));
                    };
                    if b == Builtin::Strcpy {
                        // only valid as a statement, handled by `call_stmt`
                        self.bump();
                        self.bump();
                        let args = self.args()?;
                        return Ok(Expr::Call(b, args));
                    }
                    self.bump();
                    self.bump();
                    let args = self.args()?;
                    return Ok(Expr::Call(b, args));
                }
                let name = self.ident()?;
                Ok(Expr::Var(name))
            }
            _ => Err(self.error("expected expression")),
        }
    }
}

fn increment(var: String, delta: i64) -> StmtKind {
    let op = if delta > 0 { BinOp::Add } else { BinOp::Sub };
    StmtKind::Assign {
        value: Expr::Binary(op, Box::new(Expr::Var(var.clone())), Box::new(Expr::Int(1))),
        var,
    }
}

fn is_type_kw(s: &str) -> bool {
    matches!(s, "int" | "char" | "void")
}

fn is_stmt_kw(s: &str) -> bool {
    matches!(s, "if" | "else" | "while" | "for" | "return")
}
