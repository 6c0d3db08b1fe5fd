//! Taint-guided genetic fuzzing for stack buffer overflows in MiniC programs.
//!
//! The pipeline: [`lang`] parses a program, [`taint`] computes taint
//! dependency sequences (TDS) from inputs to vulnerable writes, [`exec`]
//! runs candidate inputs while counting how often each TDS location
//! executes, and [`ga`] evolves inputs along a chosen TDS until a write
//! leaves its buffer. [`bench`] compares against coverage-guided and random
//! fuzzing; [`cli`] wires everything into the `tdsfuzz` binary.

pub mod lang;
pub mod taint;
pub mod exec;
pub mod ga;
pub mod bench;
pub mod cli;
