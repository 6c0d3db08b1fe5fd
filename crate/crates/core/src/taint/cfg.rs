//! Whole-program control-flow graph with helper calls inlined at their call
//! sites, plus post-dominance and control dependence over it.

use crate::lang::{Builtin, Callee, Expr, FunctionDef, Location, Place, Program, Stmt, StmtKind};

#[derive(Debug, Clone)]
pub(crate) enum NodeKind {
    Entry,
    Exit,
    /// Unlabelled join point (end of an inlined callee).
    Nop,
    /// A labelled statement with no data effect (user call site).
    Marker,
    Assign { var: String, value: Expr },
    PtrAssign { target: Place, value: Expr },
    Branch { cond: Expr },
    Builtin { builtin: Builtin, args: Vec<Expr> },
    Return { value: Option<Expr> },
    /// Callee parameter bound to an argument evaluated in `caller`.
    Bind {
        param: String,
        arg: Expr,
        caller: String,
    },
    /// Entry-function `char *` parameter receiving input `index`.
    InputParam { param: String, index: usize },
}

#[derive(Debug, Clone)]
pub(crate) struct Node {
    pub label: Option<Location>,
    pub func: String,
    pub kind: NodeKind,
}

#[derive(Debug, Clone)]
pub(crate) struct Cfg {
    pub nodes: Vec<Node>,
    pub succ: Vec<Vec<usize>>,
    pub pred: Vec<Vec<usize>>,
    pub entry: usize,
    pub exit: usize,
}

struct Builder<'p> {
    program: &'p Program,
    cfg: Cfg,
}

impl Cfg {
    pub fn build(program: &Program) -> Cfg {
        let mut b = Builder {
            program,
            cfg: Cfg {
                nodes: Vec::new(),
                succ: Vec::new(),
                pred: Vec::new(),
                entry: 0,
                exit: 0,
            },
        };
        let entry_fn = program.entry_function();
        let entry = b.node(None, &entry_fn.name, NodeKind::Entry);
        let exit = b.node(None, &entry_fn.name, NodeKind::Exit);
        b.cfg.entry = entry;
        b.cfg.exit = exit;
        let mut frontier = vec![entry];
        if !entry_fn.is_argv_entry() {
            for (index, param) in entry_fn.params.iter().enumerate() {
                let n = b.node(
                    Some(entry_fn.location),
                    &entry_fn.name,
                    NodeKind::InputParam {
                        param: param.name.clone(),
                        index,
                    },
                );
                b.connect(&frontier, n);
                frontier = vec![n];
            }
        }
        let tail = b.block(entry_fn, &entry_fn.body, frontier, exit);
        b.connect(&tail, exit);
        b.cfg
    }

    /// Whether some node labelled `to` is reachable, in one or more edges,
    /// from some node labelled `from`.
    pub fn label_reaches(&self, from: Location, to: Location) -> bool {
        let mut seen = vec![false; self.nodes.len()];
        let mut stack: Vec<usize> = Vec::new();
        for i in 0..self.nodes.len() {
            if self.nodes[i].label == Some(from) {
                stack.extend(self.succ[i].iter().copied());
            }
        }
        while let Some(n) = stack.pop() {
            if seen[n] {
                continue;
            }
            seen[n] = true;
            if self.nodes[n].label == Some(to) {
                return true;
            }
            stack.extend(self.succ[n].iter().copied());
        }
        false
    }

    /// Post-dominator sets as bit vectors (`pdom[n][m]` = m post-dominates n).
    pub fn post_dominators(&self) -> Vec<Vec<bool>> {
        let n = self.nodes.len();
        let mut pdom = vec![vec![true; n]; n];
        pdom[self.exit] = vec![false; n];
        pdom[self.exit][self.exit] = true;
        let mut changed = true;
        while changed {
            changed = false;
            for v in (0..n).rev() {
                if v == self.exit {
                    continue;
                }
                let mut next = vec![true; n];
                if self.succ[v].is_empty() {
                    next = vec![false; n];
                }
                for &s in &self.succ[v] {
                    for (x, bit) in next.iter_mut().enumerate() {
                        *bit &= pdom[s][x];
                    }
                }
                next[v] = true;
                if next != pdom[v] {
                    pdom[v] = next;
                    changed = true;
                }
            }
        }
        pdom
    }

    /// For every node, the branch nodes it is (transitively) control
    /// dependent on.
    pub fn control_ancestors(&self) -> Vec<Vec<usize>> {
        let n = self.nodes.len();
        let pdom = self.post_dominators();
        // direct[m] = branches m is directly control dependent on
        let mut direct = vec![Vec::new(); n];
        for a in 0..n {
            if self.succ[a].len() < 2 {
                continue;
            }
            for m in 0..n {
                let strictly_pdoms_a = m != a && pdom[a][m];
                if strictly_pdoms_a {
                    continue;
                }
                if self.succ[a].iter().any(|&s| pdom[s][m]) {
                    direct[m].push(a);
                }
            }
        }
        let mut out = vec![Vec::new(); n];
        for m in 0..n {
            let mut seen = vec![false; n];
            let mut stack = direct[m].clone();
            while let Some(a) = stack.pop() {
                if seen[a] {
                    continue;
                }
                seen[a] = true;
                stack.extend(direct[a].iter().copied());
            }
            out[m] = (0..n).filter(|&a| seen[a]).collect();
        }
        out
    }
}

impl<'p> Builder<'p> {
    fn node(&mut self, label: Option<Location>, func: &str, kind: NodeKind) -> usize {
        self.cfg.nodes.push(Node {
            label,
            func: func.to_string(),
            kind,
        });
        self.cfg.succ.push(Vec::new());
        self.cfg.pred.push(Vec::new());
        self.cfg.nodes.len() - 1
    }

    fn connect(&mut self, from: &[usize], to: usize) {
        for &f in from {
            if !self.cfg.succ[f].contains(&to) {
                self.cfg.succ[f].push(to);
                self.cfg.pred[to].push(f);
            }
        }
    }

    /// Builds `stmts`, returning the nodes that fall through to whatever
    /// follows. `ret` is where `return` jumps.
    fn block(&mut self, f: &FunctionDef, stmts: &[Stmt], mut frontier: Vec<usize>, ret: usize) -> Vec<usize> {
        for s in stmts {
            frontier = self.stmt(f, s, frontier, ret);
        }
        frontier
    }

    fn simple(&mut self, f: &FunctionDef, s: &Stmt) -> usize {
        let label = Some(s.location);
        let kind = match &s.kind {
            StmtKind::Assign { var, value } => NodeKind::Assign {
                var: var.clone(),
                value: value.clone(),
            },
            StmtKind::PtrAssign { target, value } => NodeKind::PtrAssign {
                target: target.clone(),
                value: value.clone(),
            },
            StmtKind::Call {
                callee: Callee::Builtin(b),
                args,
            } => NodeKind::Builtin {
                builtin: *b,
                args: args.clone(),
            },
            _ => NodeKind::Marker,
        };
        self.node(label, &f.name, kind)
    }

    fn stmt(&mut self, f: &FunctionDef, s: &Stmt, frontier: Vec<usize>, ret: usize) -> Vec<usize> {
        let label = Some(s.location);
        match &s.kind {
            StmtKind::Assign { .. }
            | StmtKind::PtrAssign { .. }
            | StmtKind::Call {
                callee: Callee::Builtin(_),
                ..
            } => {
                let n = self.simple(f, s);
                self.connect(&frontier, n);
                vec![n]
            }
            StmtKind::Call {
                callee: Callee::User(name),
                args,
            } => {
                let site = self.node(label, &f.name, NodeKind::Marker);
                self.connect(&frontier, site);
                let callee = self
                    .program
                    .function(name)
                    .expect("validated call target");
                let mut cur = vec![site];
                for (param, arg) in callee.params.iter().zip(args) {
                    let b = self.node(
                        None,
                        &callee.name,
                        NodeKind::Bind {
                            param: param.name.clone(),
                            arg: arg.clone(),
                            caller: f.name.clone(),
                        },
                    );
                    self.connect(&cur, b);
                    cur = vec![b];
                }
                let end = self.node(None, &callee.name, NodeKind::Nop);
                let tail = self.block(callee, &callee.body, cur, end);
                self.connect(&tail, end);
                vec![end]
            }
            StmtKind::Return(value) => {
                let n = self.node(label, &f.name, NodeKind::Return { value: value.clone() });
                self.connect(&frontier, n);
                self.connect(&[n], ret);
                Vec::new()
            }
            StmtKind::If {
                cond,
                then_body,
                else_body,
            } => {
                let b = self.node(label, &f.name, NodeKind::Branch { cond: cond.clone() });
                self.connect(&frontier, b);
                let mut out = self.block(f, then_body, vec![b], ret);
                out.extend(self.block(f, else_body, vec![b], ret));
                out
            }
            StmtKind::While { cond, body } => {
                let b = self.node(label, &f.name, NodeKind::Branch { cond: cond.clone() });
                self.connect(&frontier, b);
                let tail = self.block(f, body, vec![b], ret);
                self.connect(&tail, b);
                vec![b]
            }
            StmtKind::For {
                init,
                cond,
                step,
                body,
            } => {
                let mut cur = frontier;
                if let Some(i) = init {
                    let n = self.simple(f, i);
                    self.connect(&cur, n);
                    cur = vec![n];
                }
                let cond = cond.clone().unwrap_or(Expr::Int(1));
                let b = self.node(label, &f.name, NodeKind::Branch { cond });
                self.connect(&cur, b);
                let mut tail = self.block(f, body, vec![b], ret);
                if let Some(st) = step {
                    let n = self.simple(f, st);
                    self.connect(&tail, n);
                    tail = vec![n];
                }
                self.connect(&tail, b);
                vec![b]
            }
        }
    }
}
