use std::fmt::Write;

use super::ast::*;

/// Renders a program back to MiniC source. Line numbers are not preserved;
/// re-parsing yields the same structure with fresh labels.
pub fn pretty_print(p: &Program) -> String {
    let mut out = String::new();
    for (i, f) in p.functions.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        function(&mut out, f);
    }
    out
}

fn function(out: &mut String, f: &FunctionDef) {
    let ret = match f.ret {
        ReturnType::Void => "void",
        ReturnType::Int => "int",
    };
    let params: Vec<String> = f
        .params
        .iter()
        .map(|p| match p.ty {
            Type::Int => format!("int {}", p.name),
            Type::Char => format!("char {}", p.name),
            Type::CharPtr => format!("char *{}", p.name),
            Type::Argv => format!("char **{}", p.name),
        })
        .collect();
    let _ = writeln!(out, "{ret} {}({})", f.name, params.join(", "));
    out.push_str("{\n");
    for l in &f.locals {
        let decl = match (l.ty, l.buffer_size) {
            (_, Some(n)) => format!("char {}[{n}];", l.name),
            (Type::Int, None) => format!("int {};", l.name),
            (Type::CharPtr, None) => format!("char *{};", l.name),
            _ => format!("char {};", l.name),
        };
        let _ = writeln!(out, "  {decl}");
    }
    let argv = f
        .params
        .iter()
        .find(|p| p.ty == Type::Argv)
        .map(|p| p.name.as_str())
        .unwrap_or("argv");
    block(out, &f.body, 1, argv);
    out.push_str("}\n");
}

fn block(out: &mut String, stmts: &[Stmt], depth: usize, argv: &str) {
    for s in stmts {
        stmt(out, s, depth, argv);
    }
}

fn stmt(out: &mut String, s: &Stmt, depth: usize, argv: &str) {
    let pad = "  ".repeat(depth);
    match &s.kind {
        StmtKind::If {
            cond,
            then_body,
            else_body,
        } => {
            let _ = writeln!(out, "{pad}if ({}) {{", expr(cond, argv));
            block(out, then_body, depth + 1, argv);
            if else_body.is_empty() {
                let _ = writeln!(out, "{pad}}}");
            } else {
                let _ = writeln!(out, "{pad}}} else {{");
                block(out, else_body, depth + 1, argv);
                let _ = writeln!(out, "{pad}}}");
            }
        }
        StmtKind::While { cond, body } => {
            let _ = writeln!(out, "{pad}while ({}) {{", expr(cond, argv));
            block(out, body, depth + 1, argv);
            let _ = writeln!(out, "{pad}}}");
        }
        StmtKind::For {
            init,
            cond,
            step,
            body,
        } => {
            let init = init.as_ref().map(|s| simple(s, argv)).unwrap_or_default();
            let cond = cond.as_ref().map(|c| expr(c, argv)).unwrap_or_default();
            let step = step.as_ref().map(|s| simple(s, argv)).unwrap_or_default();
            let _ = writeln!(out, "{pad}for ({init}; {cond}; {step}) {{");
            block(out, body, depth + 1, argv);
            let _ = writeln!(out, "{pad}}}");
        }
        StmtKind::Return(None) => {
            let _ = writeln!(out, "{pad}return;");
        }
        StmtKind::Return(Some(e)) => {
            let _ = writeln!(out, "{pad}return {};", expr(e, argv));
        }
        _ => {
            let _ = writeln!(out, "{pad}{};", simple(s, argv));
        }
    }
}

fn simple(s: &Stmt, argv: &str) -> String {
    match &s.kind {
        StmtKind::Assign { var, value } => format!("{var} = {}", expr(value, argv)),
        StmtKind::PtrAssign { target, value } => {
            let lhs = match target {
                Place::Deref(p) => expr(&Expr::Deref(Box::new(p.clone())), argv),
                Place::Index(b, i) => {
                    expr(&Expr::Index(Box::new(b.clone()), Box::new(i.clone())), argv)
                }
            };
            format!("{lhs} = {}", expr(value, argv))
        }
        StmtKind::Call { callee, args } => {
            let name = match callee {
                Callee::Builtin(b) => b.name(),
                Callee::User(n) => n.as_str(),
            };
            let args: Vec<String> = args.iter().map(|a| expr(a, argv)).collect();
            format!("{name}({})", args.join(", "))
        }
        _ => unreachable!("compound statement in simple position"),
    }
}

pub(crate) fn char_literal(c: u8) -> String {
    match c {
        0 => r"'\0'".into(),
        b'\n' => r"'\n'".into(),
        b'\t' => r"'\t'".into(),
        b'\r' => r"'\r'".into(),
        b'\\' => r"'\\'".into(),
        b'\'' => r"'\''".into(),
        c => format!("'{}'", c as char),
    }
}

/// Precedence of the outermost operator; atoms bind tightest.
fn prec(e: &Expr) -> u8 {
    match e {
        Expr::Binary(op, ..) => op.precedence(),
        Expr::Unary(..) | Expr::Deref(_) => 7,
        _ => 8,
    }
}

fn expr(e: &Expr, argv: &str) -> String {
    match e {
        Expr::Int(n) => n.to_string(),
        Expr::Char(c) => char_literal(*c),
        Expr::Var(v) => v.clone(),
        Expr::Input(n) => format!("{argv}[{n}]"),
        Expr::PostInc { var, delta } => {
            format!("{var}{}", if *delta > 0 { "++" } else { "--" })
        }
        Expr::Deref(inner) => format!("*{}", wrap(inner, 7, argv)),
        Expr::Unary(op, inner) => {
            let sym = match op {
                UnOp::Neg => "-",
                UnOp::Not => "!",
            };
            format!("{sym}{}", wrap(inner, 7, argv))
        }
        Expr::Index(base, idx) => format!("{}[{}]", wrap(base, 8, argv), expr(idx, argv)),
        Expr::Binary(op, l, r) => {
            let p = op.precedence();
            format!("{} {} {}", wrap(l, p, argv), op.symbol(), wrap(r, p + 1, argv))
        }
        Expr::Call(b, args) => {
            let args: Vec<String> = args.iter().map(|a| expr(a, argv)).collect();
            format!("{}({})", b.name(), args.join(", "))
        }
    }
}

fn wrap(e: &Expr, min: u8, argv: &str) -> String {
    if prec(e) < min {
        format!("({})", expr(e, argv))
    } else {
        expr(e, argv)
    }
}
