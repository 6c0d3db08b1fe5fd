use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::{ExecError, ExecutionTrace, OverflowFault, TailWrite};
use crate::lang::FunctionDef;

/// Half-open byte range `[start, end)` relative to the start of a buffer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ByteRange {
    pub start: usize,
    pub end: usize,
}

impl ByteRange {
    fn offsets(self) -> std::ops::Range<usize> {
        self.start..self.end
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameLayout {
    pub function: String,
    pub buffer: String,
    pub buffer_extent: ByteRange,
    pub saved_frame_pointer: ByteRange,
    pub saved_return: ByteRange,
}

pub fn simulate_frame(f: &FunctionDef, buffer: &str) -> Result<FrameLayout, ExecError> {
    simulate_frame_with(f, buffer, 4)
}

pub fn simulate_frame_with(f: &FunctionDef, buffer: &str, slot_size: usize) -> Result<FrameLayout, ExecError> {
    let size = f
        .buffers()
        .find(|(n, _)| *n == buffer)
        .map(|(_, s)| s)
        .ok_or_else(|| ExecError::UnknownBuffer {
            function: f.name.clone(),
            buffer: buffer.to_string(),
        })?;
    Ok(FrameLayout {
        function: f.name.clone(),
        buffer: buffer.to_string(),
        buffer_extent: ByteRange { start: 0, end: size },
        saved_frame_pointer: ByteRange {
            start: size,
            end: size + slot_size,
        },
        saved_return: ByteRange {
            start: size + slot_size,
            end: size + 2 * slot_size,
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Severity {
    EasyExploit,
    HardExploit,
    NoControl,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrashReport {
    pub inputs: Vec<String>,
    pub fault: OverflowFault,
    pub frame: FrameLayout,
    pub overwrote_return: bool,
    pub return_overwrite_bytes: Option<Vec<u8>>,
    pub return_overwrite_input_index: Option<usize>,
    pub overwrote_frame_pointer: bool,
    pub frame_pointer_overwrite_bytes: Option<Vec<u8>>,
    pub frame_pointer_overwrite_input_index: Option<usize>,
    pub severity: Severity,
}

struct Slot {
    covered: bool,
    bytes: Vec<u8>,
    writes: Vec<Option<TailWrite>>,
}

fn slot(fault: &OverflowFault, range: ByteRange) -> Slot {
    let writes: Vec<Option<TailWrite>> = range
        .offsets()
        .map(|o| fault.tail_writes.iter().rev().find(|w| w.offset == o).cloned())
        .collect();
    Slot {
        covered: writes.iter().all(Option::is_some),
        bytes: writes.iter().map(|w| w.as_ref().map_or(0, |w| w.value)).collect(),
        writes,
    }
}

pub fn analyze_crash(trace: &ExecutionTrace, frame: &FrameLayout, inputs: &[String]) -> Result<CrashReport, ExecError> {
    let fault = trace.fault.clone().ok_or(ExecError::NoFault)?;
    let offsets: Vec<usize> = inputs
        .iter()
        .scan(0, |acc, s| {
            let o = *acc;
            *acc += s.len();
            Some(o)
        })
        .collect();
    let same_buffer = fault.buffer == frame.buffer && fault.function == frame.function;
    let empty = OverflowFault {
        tail_writes: Vec::new(),
        ..fault.clone()
    };
    let source = if same_buffer { &fault } else { &empty };
    let ret = slot(source, frame.saved_return);
    let fp = slot(source, frame.saved_frame_pointer);

    let index_of = |s: &Slot| {
        s.writes
            .first()
            .and_then(|w| w.as_ref())
            .and_then(|w| w.origin)
            .map(|o| offsets[o.input] + o.index)
    };
    let verbatim = |w: &TailWrite| {
        w.origin.is_some_and(|o| {
            !o.transformed && inputs[o.input].as_bytes().get(o.index) == Some(&w.value)
        })
    };
    let severity = if !ret.covered {
        Severity::NoControl
    } else if ret.writes.iter().flatten().all(verbatim) {
        Severity::EasyExploit
    } else if ret.writes.iter().flatten().any(|w| w.origin.is_some()) {
        Severity::HardExploit
    } else {
        Severity::NoControl
    };
    Ok(CrashReport {
        inputs: inputs.to_vec(),
        overwrote_return: ret.covered,
        return_overwrite_input_index: if ret.covered { index_of(&ret) } else { None },
        return_overwrite_bytes: ret.covered.then(|| ret.bytes.clone()),
        overwrote_frame_pointer: fp.covered,
        frame_pointer_overwrite_input_index: if fp.covered { index_of(&fp) } else { None },
        frame_pointer_overwrite_bytes: fp.covered.then(|| fp.bytes.clone()),
        severity,
        fault,
        frame: frame.clone(),
    })
}

fn show_bytes(b: &[u8]) -> String {
    let mut s = String::new();
    for &c in b {
        if (0x20..0x7f).contains(&c) {
            s.push(c as char);
        } else {
            let _ = write!(s, "\\x{c:02x}");
        }
    }
    s
}

impl CrashReport {
    /// Plain-text rendering in the style of a debugger post-mortem.
    pub fn render_text(&self) -> String {
        let mut out = String::from("Malicious inputs:\n");
        for i in &self.inputs {
            let _ = writeln!(out, "{}", show_bytes(i.as_bytes()));
        }
        let lens: Vec<String> = self.inputs.iter().map(|i| i.len().to_string()).collect();
        let _ = writeln!(out, "Lengths: {}", lens.join(" "));
        let f = &self.fault;
        let _ = writeln!(
            out,
            "Overflow of {}[{}] at line {}, offset {}",
            f.buffer, f.buffer_size, f.faulting_location, f.write_offset
        );
        let mut reg = |name: &str, bytes: &Option<Vec<u8>>, idx: Option<usize>| match bytes {
            Some(b) => {
                let at = idx.map_or("-".to_string(), |i| i.to_string());
                let _ = writeln!(out, "{name} is overwritten by:  {}  at index:  {at}", show_bytes(b));
            }
            None => {
                let _ = writeln!(out, "{name} is intact");
            }
        };
        reg("EBP", &self.frame_pointer_overwrite_bytes, self.frame_pointer_overwrite_input_index);
        reg("EIP", &self.return_overwrite_bytes, self.return_overwrite_input_index);
        let sev = serde_json::to_value(self.severity).unwrap();
        let _ = writeln!(out, "Severity: {}", sev.as_str().unwrap());
        out
    }
}
