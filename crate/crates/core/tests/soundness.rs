mod common;

use common::{input_dependent, untainted_but_input_dependent, ORACLE_PROGRAMS};
use tdsfuzz::lang::Location;

const ALPHABET: [char; 3] = ['a', 'b', 'c'];

#[test]
fn oracle_programs_have_input_dependent_definitions() {
    for (i, src) in ORACLE_PROGRAMS.iter().enumerate() {
        let dep = input_dependent(src, &ALPHABET, 3);
        eprintln!("program {i}: {dep:?}");
        assert!(!dep.is_empty(), "program {i} exercises nothing");
    }
}

#[test]
fn no_input_dependent_definition_is_untainted() {
    for (i, src) in ORACLE_PROGRAMS.iter().enumerate() {
        let missed = untainted_but_input_dependent(src, &ALPHABET, 3);
        assert!(missed.is_empty(), "program {i}: {missed:?}");
    }
}

#[test]
fn constants_are_not_input_dependent() {
    let dep = input_dependent(ORACLE_PROGRAMS[0], &ALPHABET, 3);
    assert!(!dep.contains(&(Location(10), "y".to_string())));
    assert!(dep.contains(&(Location(9), "x".to_string())));
}
