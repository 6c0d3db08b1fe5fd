//! Concrete interpreter with statement-frequency instrumentation and a
//! bounds-checked memory model.
//!
//! Every local array is followed in memory by a saved-frame-pointer slot and
//! a saved-return slot. Writes that run off the end of an array land in
//! those slots and the program is stopped at the end of that statement;
//! writes past the return slot (or before the array) stop it at once.
//! Reads outside an object yield 0.

mod frame;
mod lower;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::lang::{BinOp, Location, Program, UnOp};
use lower::{LExpr, LKind, LProgram, LStmt};

pub use frame::{analyze_crash, simulate_frame, simulate_frame_with, ByteRange, CrashReport, FrameLayout, Severity};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExecError {
    #[error("program takes {expected} input(s), got {got}")]
    ArityMismatch { expected: usize, got: usize },
    #[error("line {0}: dereference of a value that is not a live pointer")]
    InvalidPointer(Location),
    #[error("{function} has no local array named {buffer}")]
    UnknownBuffer { function: String, buffer: String },
    #[error("execution trace has no fault")]
    NoFault,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecConfig {
    pub step_budget: u64,
    /// Bytes in each of the saved-frame-pointer and saved-return slots.
    pub slot_size: usize,
}

impl Default for ExecConfig {
    fn default() -> Self {
        ExecConfig {
            step_budget: 1_000_000,
            slot_size: 4,
        }
    }
}

/// Where a byte came from: position `index` of input `input`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Origin {
    pub input: usize,
    pub index: usize,
    /// Passed through a character transformation (`toupper`).
    pub transformed: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TailWrite {
    pub offset: usize,
    pub value: u8,
    pub origin: Option<Origin>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverflowFault {
    /// Function owning the buffer; empty for input strings.
    pub function: String,
    pub buffer: String,
    pub buffer_size: usize,
    /// First out-of-bounds offset written by the faulting statement.
    pub write_offset: i64,
    pub faulting_location: Location,
    /// Offset, in the concatenation of all inputs, of the byte written at
    /// `write_offset`.
    pub input_index: Option<usize>,
    /// Bytes that landed past the buffer (frame slots), in write order.
    pub tail_writes: Vec<TailWrite>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ExecutionTrace {
    pub frequencies: BTreeMap<Location, u64>,
    pub steps: u64,
    pub budget_exhausted: bool,
    pub fault: Option<OverflowFault>,
}

/// A value written by a definition, for input-sensitivity checks.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ObservedValue {
    Int(i64),
    Ptr { buffer: String, offset: i64 },
}

pub trait Observer {
    /// `name` is a variable, or `*buffer` for a store into a buffer.
    fn on_def(&mut self, loc: Location, name: &str, value: ObservedValue);
}

impl Observer for () {
    fn on_def(&mut self, _: Location, _: &str, _: ObservedValue) {}
}

pub fn execute(
    p: &Program,
    inputs: &[String],
    instrumented: &BTreeSet<Location>,
    step_budget: u64,
) -> Result<ExecutionTrace, ExecError> {
    let cfg = ExecConfig {
        step_budget,
        ..ExecConfig::default()
    };
    Interpreter::new(p).run(inputs, instrumented, &cfg)
}

/// A program prepared for repeated execution.
#[derive(Debug, Clone)]
pub struct Interpreter {
    prog: LProgram,
}

impl Interpreter {
    pub fn new(p: &Program) -> Self {
        Interpreter { prog: lower::lower(p) }
    }

    pub fn arity(&self) -> usize {
        self.prog.inputs.len()
    }

    pub fn run(
        &self,
        inputs: &[String],
        instrumented: &BTreeSet<Location>,
        cfg: &ExecConfig,
    ) -> Result<ExecutionTrace, ExecError> {
        self.run_observed(inputs, instrumented, cfg, &mut ())
    }

    pub fn run_observed<O: Observer>(
        &self,
        inputs: &[String],
        instrumented: &BTreeSet<Location>,
        cfg: &ExecConfig,
        observer: &mut O,
    ) -> Result<ExecutionTrace, ExecError> {
        if inputs.len() != self.arity() {
            return Err(ExecError::ArityMismatch {
                expected: self.arity(),
                got: inputs.len(),
            });
        }
        let max_line = instrumented.iter().map(|l| l.0 as usize).max().unwrap_or(0);
        let mut counter = vec![None; max_line + 1];
        for (i, l) in instrumented.iter().enumerate() {
            counter[l.0 as usize] = Some(i);
        }
        let mut m = Machine {
            prog: &self.prog,
            cfg,
            bufs: Vec::new(),
            counter,
            counts: vec![0; instrumented.len()],
            steps: 0,
            pending: None,
            observer,
            input_offsets: Vec::new(),
        };
        let mut offset = 0;
        for (i, s) in inputs.iter().enumerate() {
            m.input_offsets.push(offset);
            offset += s.len();
            let mut data = s.as_bytes().to_vec();
            data.push(0);
            let origin = (0..data.len())
                .map(|index| {
                    Some(Origin {
                        input: i,
                        index,
                        transformed: false,
                    })
                })
                .collect();
            m.bufs.push(Some(Buffer {
                size: data.len(),
                limit: data.len(),
                data,
                origin,
                name: self.prog.inputs[i].clone(),
                function: String::new(),
            }));
        }
        let entry = &self.prog.funcs[self.prog.entry];
        let args: Vec<Val> = if entry.argv_entry {
            Vec::new()
        } else {
            m.count(entry.location);
            (0..inputs.len()).map(|i| Val::ptr(i, 0)).collect()
        };
        let outcome = m.call(self.prog.entry, args);
        let (budget_exhausted, fault) = match outcome {
            Ok(_) => (false, None),
            Err(Halt::Budget) => (true, None),
            Err(Halt::Fault(f)) => (false, Some(*f)),
            Err(Halt::Error(e)) => return Err(e),
        };
        let frequencies = instrumented.iter().copied().zip(m.counts.iter().copied()).collect();
        Ok(ExecutionTrace {
            frequencies,
            steps: m.steps,
            budget_exhausted,
            fault,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum V {
    Int(i64),
    Ptr(usize, i64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Val {
    v: V,
    origin: Option<Origin>,
}

impl Val {
    fn int(n: i64) -> Self {
        Val {
            v: V::Int(n),
            origin: None,
        }
    }

    fn ptr(buf: usize, off: i64) -> Self {
        Val {
            v: V::Ptr(buf, off),
            origin: None,
        }
    }

    fn truthy(self) -> bool {
        match self.v {
            V::Int(n) => n != 0,
            V::Ptr(..) => true,
        }
    }
}

struct Buffer {
    data: Vec<u8>,
    origin: Vec<Option<Origin>>,
    /// Declared size (inputs: length plus terminator).
    size: usize,
    /// Size plus frame slots; writes at or past this fault immediately.
    limit: usize,
    name: String,
    function: String,
}

enum Halt {
    Fault(Box<OverflowFault>),
    Budget,
    Error(ExecError),
}

enum Flow {
    Next,
    Return,
}

struct Machine<'a, O> {
    prog: &'a LProgram,
    cfg: &'a ExecConfig,
    /// `None` once the owning call has returned.
    bufs: Vec<Option<Buffer>>,
    counter: Vec<Option<usize>>,
    counts: Vec<u64>,
    steps: u64,
    pending: Option<OverflowFault>,
    observer: &'a mut O,
    input_offsets: Vec<usize>,
}

type R<T> = Result<T, Halt>;

impl<O: Observer> Machine<'_, O> {
    fn count(&mut self, loc: Location) {
        if let Some(Some(i)) = self.counter.get(loc.0 as usize) {
            self.counts[*i] += 1;
        }
    }

    fn step(&mut self) -> R<()> {
        self.steps += 1;
        if self.steps > self.cfg.step_budget {
            return Err(Halt::Budget);
        }
        Ok(())
    }

    fn call(&mut self, f: usize, args: Vec<Val>) -> R<()> {
        let func = &self.prog.funcs[f];
        let mut frame = vec![Val::int(0); func.slot_names.len()];
        for (&slot, a) in func.params.iter().zip(args) {
            frame[slot] = a;
        }
        let first_buf = self.bufs.len();
        for &(slot, size) in &func.arrays {
            let limit = size + 2 * self.cfg.slot_size;
            frame[slot] = Val::ptr(self.bufs.len(), 0);
            self.bufs.push(Some(Buffer {
                data: vec![0; limit],
                origin: vec![None; limit],
                size,
                limit,
                name: func.slot_names[slot].clone(),
                function: func.name.clone(),
            }));
        }
        let r = self.block(&func.body, &mut frame, f);
        for b in &mut self.bufs[first_buf..] {
            *b = None;
        }
        r.map(|_| ())
    }

    fn block(&mut self, stmts: &[LStmt], frame: &mut [Val], f: usize) -> R<Flow> {
        for s in stmts {
            if let Flow::Return = self.stmt(s, frame, f)? {
                return Ok(Flow::Return);
            }
        }
        Ok(Flow::Next)
    }

    fn stmt(&mut self, s: &LStmt, frame: &mut [Val], f: usize) -> R<Flow> {
        self.step()?;
        self.count(s.loc);
        match &s.kind {
            LKind::If(c, t, e) => {
                if self.eval(c, frame, s.loc, f)?.truthy() {
                    self.block(t, frame, f)
                } else {
                    self.block(e, frame, f)
                }
            }
            LKind::While(c, body) => {
                while self.eval(c, frame, s.loc, f)?.truthy() {
                    self.step()?;
                    if let Flow::Return = self.block(body, frame, f)? {
                        return Ok(Flow::Return);
                    }
                }
                Ok(Flow::Next)
            }
            LKind::For(init, cond, st, body) => {
                if let Some(i) = init {
                    self.simple(i, frame, f)?;
                }
                loop {
                    if let Some(c) = cond {
                        if !self.eval(c, frame, s.loc, f)?.truthy() {
                            break;
                        }
                    }
                    self.step()?;
                    if let Flow::Return = self.block(body, frame, f)? {
                        return Ok(Flow::Return);
                    }
                    if let Some(st) = st {
                        self.simple(st, frame, f)?;
                    }
                }
                Ok(Flow::Next)
            }
            LKind::Return(v) => {
                if let Some(v) = v {
                    self.eval(v, frame, s.loc, f)?;
                }
                Ok(Flow::Return)
            }
            LKind::Call(callee, args) => {
                let vals = args
                    .iter()
                    .map(|a| self.eval(a, frame, s.loc, f))
                    .collect::<R<Vec<_>>>()?;
                self.call(*callee, vals)?;
                Ok(Flow::Next)
            }
            _ => {
                self.simple(s, frame, f)?;
                Ok(Flow::Next)
            }
        }
    }

    /// Executes a non-compound statement, raising any fault it left pending.
    fn simple(&mut self, s: &LStmt, frame: &mut [Val], f: usize) -> R<()> {
        let loc = s.loc;
        match &s.kind {
            LKind::Assign(slot, e) => {
                let v = self.eval(e, frame, loc, f)?;
                frame[*slot] = v;
                self.observe(loc, f, *slot, v);
            }
            LKind::Store(base, idx, value) => {
                let p = self.eval(base, frame, loc, f)?;
                let off = match idx {
                    Some(i) => {
                        let i = self.eval(i, frame, loc, f)?;
                        self.as_int(i)
                    }
                    None => 0,
                };
                let v = self.eval(value, frame, loc, f)?;
                let V::Ptr(b, o) = p.v else {
                    return Err(Halt::Error(ExecError::InvalidPointer(loc)));
                };
                self.write(b, o + off, v, loc)?;
            }
            LKind::Strcpy(dst, src) => {
                let d = self.eval(dst, frame, loc, f)?;
                let s = self.eval(src, frame, loc, f)?;
                let (V::Ptr(db, doff), V::Ptr(sb, soff)) = (d.v, s.v) else {
                    return Err(Halt::Error(ExecError::InvalidPointer(loc)));
                };
                let mut k = 0;
                loop {
                    let c = self.read(sb, soff + k, loc)?;
                    self.write(db, doff + k, c, loc)?;
                    if c.v == V::Int(0) {
                        break;
                    }
                    k += 1;
                }
            }
            LKind::Eval(e) => {
                self.eval(e, frame, loc, f)?;
            }
            _ => unreachable!("compound statement in simple position"),
        }
        match self.pending.take() {
            Some(fault) => Err(Halt::Fault(Box::new(fault))),
            None => Ok(()),
        }
    }

    fn observe(&mut self, loc: Location, f: usize, slot: usize, v: Val) {
        let value = self.observed(v);
        self.observer.on_def(loc, &self.prog.funcs[f].slot_names[slot], value);
    }

    fn observed(&self, v: Val) -> ObservedValue {
        match v.v {
            V::Int(n) => ObservedValue::Int(n),
            V::Ptr(b, offset) => ObservedValue::Ptr {
                buffer: self.bufs[b].as_ref().map(|b| b.name.clone()).unwrap_or_default(),
                offset,
            },
        }
    }

    fn as_int(&self, v: Val) -> i64 {
        match v.v {
            V::Int(n) => n,
            V::Ptr(_, o) => o,
        }
    }

    fn buffer(&self, b: usize, loc: Location) -> R<&Buffer> {
        self.bufs[b]
            .as_ref()
            .ok_or(Halt::Error(ExecError::InvalidPointer(loc)))
    }

    fn read(&self, b: usize, off: i64, loc: Location) -> R<Val> {
        let buf = self.buffer(b, loc)?;
        if off < 0 || off as usize >= buf.size {
            return Ok(Val::int(0));
        }
        let i = off as usize;
        Ok(Val {
            v: V::Int(buf.data[i] as i64),
            origin: buf.origin[i],
        })
    }

    fn write(&mut self, b: usize, off: i64, v: Val, loc: Location) -> R<()> {
        let byte = match v.v {
            V::Int(n) => n as u8,
            V::Ptr(..) => return Err(Halt::Error(ExecError::InvalidPointer(loc))),
        };
        let input_index = v
            .origin
            .map(|o| self.input_offsets[o.input] + o.index);
        let (size, limit) = {
            let buf = self.buffer(b, loc)?;
            (buf.size, buf.limit)
        };
        if off >= 0 && (off as usize) < size {
            let buf = self.bufs[b].as_mut().unwrap();
            buf.data[off as usize] = byte;
            buf.origin[off as usize] = v.origin;
            let name = format!("*{}", buf.name);
            self.observer.on_def(loc, &name, ObservedValue::Int(byte as i64));
            return Ok(());
        }
        if self.pending.is_none() {
            let buf = self.bufs[b].as_ref().unwrap();
            self.pending = Some(OverflowFault {
                function: buf.function.clone(),
                buffer: buf.name.clone(),
                buffer_size: size,
                write_offset: off,
                faulting_location: loc,
                input_index,
                tail_writes: Vec::new(),
            });
        }
        if off < 0 || off as usize >= limit {
            return Err(Halt::Fault(Box::new(self.pending.take().unwrap())));
        }
        let pending = self.pending.as_mut().unwrap();
        pending.tail_writes.push(TailWrite {
            offset: off as usize,
            value: byte,
            origin: v.origin,
        });
        Ok(())
    }

    fn eval(&mut self, e: &LExpr, frame: &mut [Val], loc: Location, f: usize) -> R<Val> {
        Ok(match e {
            LExpr::Int(n) => Val::int(*n),
            LExpr::Slot(s) => frame[*s],
            LExpr::Input(i) => Val::ptr(*i, 0),
            LExpr::Deref(p) => {
                let p = self.eval(p, frame, loc, f)?;
                match p.v {
                    V::Ptr(b, o) => self.read(b, o, loc)?,
                    V::Int(_) => return Err(Halt::Error(ExecError::InvalidPointer(loc))),
                }
            }
            LExpr::Index(p, i) => {
                let p = self.eval(p, frame, loc, f)?;
                let i = self.eval(i, frame, loc, f)?;
                match p.v {
                    V::Ptr(b, o) => {
                        let i = self.as_int(i);
                        self.read(b, o + i, loc)?
                    }
                    V::Int(_) => return Err(Halt::Error(ExecError::InvalidPointer(loc))),
                }
            }
            LExpr::PostInc(slot, d) => {
                let old = frame[*slot];
                let new = match old.v {
                    V::Int(n) => Val::int(n + d),
                    V::Ptr(b, o) => Val::ptr(b, o + d),
                };
                frame[*slot] = new;
                self.observe(loc, f, *slot, new);
                old
            }
            LExpr::Unary(op, a) => {
                let a = self.eval(a, frame, loc, f)?;
                match op {
                    UnOp::Neg => Val::int(-self.as_int(a)),
                    UnOp::Not => Val::int(!a.truthy() as i64),
                }
            }
            LExpr::Binary(BinOp::And, a, b) => {
                let r = self.eval(a, frame, loc, f)?.truthy() && self.eval(b, frame, loc, f)?.truthy();
                Val::int(r as i64)
            }
            LExpr::Binary(BinOp::Or, a, b) => {
                let r = self.eval(a, frame, loc, f)?.truthy() || self.eval(b, frame, loc, f)?.truthy();
                Val::int(r as i64)
            }
            LExpr::Binary(op, a, b) => {
                let a = self.eval(a, frame, loc, f)?;
                let b = self.eval(b, frame, loc, f)?;
                binary(*op, a, b)
            }
            LExpr::Strlen(p) => {
                let p = self.eval(p, frame, loc, f)?;
                let V::Ptr(b, o) = p.v else {
                    return Err(Halt::Error(ExecError::InvalidPointer(loc)));
                };
                let mut n = 0;
                while self.read(b, o + n, loc)?.v != V::Int(0) {
                    n += 1;
                }
                Val::int(n)
            }
            LExpr::Toupper(c) => {
                let c = self.eval(c, frame, loc, f)?;
                let n = self.as_int(c);
                let up = if (b'a' as i64..=b'z' as i64).contains(&n) { n - 32 } else { n };
                Val {
                    v: V::Int(up),
                    origin: c.origin.map(|o| Origin {
                        transformed: true,
                        ..o
                    }),
                }
            }
        })
    }
}

fn binary(op: BinOp, a: Val, b: Val) -> Val {
    use V::*;
    let cmp = |x: i64, y: i64| -> i64 {
        (match op {
            BinOp::Eq => x == y,
            BinOp::Ne => x != y,
            BinOp::Lt => x < y,
            BinOp::Le => x <= y,
            BinOp::Gt => x > y,
            BinOp::Ge => x >= y,
            _ => unreachable!(),
        }) as i64
    };
    match (op, a.v, b.v) {
        (BinOp::Add, Ptr(buf, o), Int(n)) | (BinOp::Add, Int(n), Ptr(buf, o)) => Val::ptr(buf, o + n),
        (BinOp::Sub, Ptr(buf, o), Int(n)) => Val::ptr(buf, o - n),
        (BinOp::Sub, Ptr(_, x), Ptr(_, y)) => Val::int(x - y),
        (BinOp::Add, Int(x), Int(y)) => Val::int(x.wrapping_add(y)),
        (BinOp::Sub, Int(x), Int(y)) => Val::int(x.wrapping_sub(y)),
        (BinOp::Mul, Int(x), Int(y)) => Val::int(x.wrapping_mul(y)),
        (BinOp::Mul, ..) => Val::int(0),
        (_, Int(x), Int(y)) => Val::int(cmp(x, y)),
        (_, Ptr(p, x), Ptr(q, y)) => match op {
            BinOp::Eq => Val::int((p == q && x == y) as i64),
            BinOp::Ne => Val::int((p != q || x != y) as i64),
            _ => Val::int(cmp(x, y)),
        },
        // pointer against an integer: only null comparisons are meaningful
        (_, Ptr(..), Int(_)) | (_, Int(_), Ptr(..)) => match op {
            BinOp::Ne => Val::int(1),
            _ => Val::int(0),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse_program;
    use crate::lang::tests_support::BUILDFNAME;

    fn locs(ls: &[u32]) -> BTreeSet<Location> {
        ls.iter().map(|&l| Location(l)).collect()
    }

    fn run(src: &str, inputs: &[&str], instr: &[u32]) -> ExecutionTrace {
        let p = parse_program(src).unwrap();
        let inputs: Vec<String> = inputs.iter().map(|s| s.to_string()).collect();
        execute(&p, &inputs, &locs(instr), 1_000_000).unwrap()
    }

    fn freqs(t: &ExecutionTrace) -> Vec<(u32, u64)> {
        t.frequencies.iter().map(|(l, c)| (l.0, *c)).collect()
    }

    #[test]
    fn buildfname_single_char() {
        let t = run(BUILDFNAME, &["a", "b"], &[21, 5, 13, 8]);
        assert_eq!(freqs(&t), vec![(5, 1), (8, 0), (13, 1), (21, 1)]);
        assert!(t.fault.is_none());
    }

    #[test]
    fn buildfname_empty_inputs() {
        let t = run(BUILDFNAME, &["", ""], &[21, 5, 13, 8]);
        assert_eq!(freqs(&t), vec![(5, 1), (8, 0), (13, 0), (21, 1)]);
        assert!(t.fault.is_none());
    }

    #[test]
    fn buildfname_ampersands_overflow() {
        let gecos = "&".repeat(600);
        let t = run(BUILDFNAME, &[&gecos, "x"], &[8]);
        let f = t.fault.expect("overflow");
        assert!(f.faulting_location == Location(8) || f.faulting_location == Location(13));
        assert!(f.write_offset >= 512);
        assert_eq!(f.buffer, "buf");
        // the k-th '&' copies "x\0" to offsets k-1 and k, so the 512th
        // copy puts its terminator at offset 512
        assert_eq!(t.frequencies[&Location(8)], 512);
        assert_eq!(f.write_offset, 512);
    }

    #[test]
    fn arity_is_checked() {
        let p = parse_program(BUILDFNAME).unwrap();
        let e = execute(&p, &["a".into()], &BTreeSet::new(), 100).unwrap_err();
        assert_eq!(e, ExecError::ArityMismatch { expected: 2, got: 1 });
    }

    #[test]
    fn step_budget_is_not_an_error() {
        let src = "void f(char *s)\n{\n  int x;\n  x = 0;\n  while (*s != 'q')\n    x++;\n}\n";
        let p = parse_program(src).unwrap();
        let t = execute(&p, &["a".into()], &locs(&[6]), 1000).unwrap();
        assert!(t.budget_exhausted);
        assert!(t.fault.is_none());
        assert!(t.steps >= t.frequencies.values().sum::<u64>());
    }

    #[test]
    fn index_write_past_slots_faults_immediately() {
        let src = "void f(char *s)\n{\n  char b[4];\n  b[20] = *s;\n}\n";
        let t = run(src, &["z"], &[]);
        let f = t.fault.unwrap();
        assert_eq!(f.write_offset, 20);
        assert!(f.tail_writes.is_empty());
        assert_eq!(f.input_index, Some(0));
    }

    #[test]
    fn fp_slot_write_faults_at_statement_end() {
        let src = "void f(char *s)\n{\n  char b[4];\n  b[5] = *s;\n  b[0] = 'x';\n}\n";
        let t = run(src, &["z"], &[5]);
        let f = t.fault.unwrap();
        assert_eq!(f.write_offset, 5);
        assert_eq!(f.faulting_location, Location(4));
        assert_eq!(t.frequencies[&Location(5)], 0);
    }

    #[test]
    fn writing_past_an_input_string_faults() {
        let src = "void f(char *s)\n{\n  s[3] = 'x';\n}\n";
        let t = run(src, &["ab"], &[]);
        let f = t.fault.unwrap();
        assert_eq!(f.buffer, "s");
        assert_eq!(f.buffer_size, 3);
        assert_eq!(f.write_offset, 3);
    }

    #[test]
    fn helper_arrays_die_with_their_call() {
        let src = "void g(char *s)\n{\n  char t[8];\n  strcpy(t, s);\n}\nvoid main(char *s)\n{\n  g(s);\n  g(s);\n}\n";
        let t = run(src, &["abc"], &[4]);
        assert_eq!(t.frequencies[&Location(4)], 2);
        assert!(t.fault.is_none());
    }
}
