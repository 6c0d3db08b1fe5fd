//! Uniform sampling of strings from the language of a regular expression.
//!
//! The pattern is compiled to a DFA over ASCII bytes 1..=127. For a string
//! length `n`, `count[n][q]` holds (a scaled) number of accepted strings of
//! length `n` starting in state `q`; walking the DFA and choosing each byte
//! in proportion to the count of its successor yields every string of that
//! length with equal probability.

use rand::Rng;
use regex_automata::dfa::{dense, Automaton, StartKind};
use regex_automata::util::syntax;
use regex_automata::{Anchored, Input, MatchKind};

use super::GaError;

const ALPHABET: std::ops::RangeInclusive<u8> = 1..=127;
const DEAD: u32 = u32::MAX;

#[derive(Debug, Clone)]
pub struct RegexSampler {
    pattern: String,
    /// `trans[q][b - 1]`
    trans: Vec<[u32; 127]>,
    /// Per length, per state, scaled count of accepted completions.
    count: Vec<Vec<f64>>,
}

impl RegexSampler {
    /// Prepares sampling of strings up to `max_len` bytes long.
    pub fn new(pattern: &str, max_len: usize) -> Result<Self, GaError> {
        let invalid = |e: &dyn std::fmt::Display| GaError::InvalidPattern {
            pattern: pattern.to_string(),
            message: e.to_string(),
        };
        let dfa = dense::Builder::new()
            .syntax(syntax::Config::new().unicode(false).utf8(false))
            .configure(
                dense::Config::new()
                    .start_kind(StartKind::Anchored)
                    .match_kind(MatchKind::All),
            )
            .build(&format!("(?:{pattern})$"))
            .map_err(|e| invalid(&e))?;
        let start = dfa
            .start_state_forward(&Input::new("").anchored(Anchored::Yes))
            .map_err(|e| invalid(&e))?;

        let mut ids = vec![start];
        let mut index = std::collections::HashMap::from([(start, 0u32)]);
        let mut trans = Vec::new();
        let mut accept = Vec::new();
        let mut q = 0;
        while q < ids.len() {
            let s = ids[q];
            accept.push(dfa.is_match_state(dfa.next_eoi_state(s)));
            let mut row = [DEAD; 127];
            for b in ALPHABET {
                let t = dfa.next_state(s, b);
                if dfa.is_dead_state(t) || dfa.is_quit_state(t) {
                    continue;
                }
                let next = ids.len() as u32;
                let id = *index.entry(t).or_insert_with(|| {
                    ids.push(t);
                    next
                });
                row[(b - 1) as usize] = id;
            }
            trans.push(row);
            q += 1;
        }

        let mut count = vec![accept.iter().map(|&a| a as u8 as f64).collect::<Vec<_>>()];
        for n in 1..=max_len {
            let prev = &count[n - 1];
            let mut cur: Vec<f64> = trans
                .iter()
                .map(|row| row.iter().filter(|&&t| t != DEAD).map(|&t| prev[t as usize]).sum())
                .collect();
            let scale = cur.iter().cloned().fold(0.0, f64::max);
            if scale > 0.0 {
                cur.iter_mut().for_each(|c| *c /= scale);
            }
            count.push(cur);
        }
        Ok(RegexSampler {
            pattern: pattern.to_string(),
            trans,
            count,
        })
    }

    pub fn pattern(&self) -> &str {
        &self.pattern
    }

    pub fn max_len(&self) -> usize {
        self.count.len() - 1
    }

    /// Whether some string of exactly `n` bytes matches.
    pub fn has_length(&self, n: usize) -> bool {
        n < self.count.len() && self.count[n][0] > 0.0
    }

    /// Picks a length uniformly among the matchable lengths in
    /// `min_len..=max_len`, then a string of that length uniformly.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, min_len: usize, max_len: usize) -> Result<String, GaError> {
        let max_len = max_len.min(self.max_len());
        let lengths: Vec<usize> = (min_len..=max_len).filter(|&n| self.has_length(n)).collect();
        if lengths.is_empty() {
            return Err(GaError::EmptyLanguage(self.pattern.clone()));
        }
        let n = lengths[rng.gen_range(0..lengths.len())];
        Ok(self.sample_exact(rng, n))
    }

    fn sample_exact<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> String {
        let mut out = Vec::with_capacity(n);
        let mut q = 0usize;
        for remaining in (1..=n).rev() {
            let weights = &self.count[remaining - 1];
            let row = &self.trans[q];
            let total: f64 = row.iter().filter(|&&t| t != DEAD).map(|&t| weights[t as usize]).sum();
            let mut r = rng.gen::<f64>() * total;
            let mut pick = None;
            for (i, &t) in row.iter().enumerate() {
                if t == DEAD || weights[t as usize] == 0.0 {
                    continue;
                }
                pick = Some((i, t));
                r -= weights[t as usize];
                if r < 0.0 {
                    break;
                }
            }
            let (i, t) = pick.expect("a feasible length always has a successor");
            out.push(i as u8 + 1);
            q = t as usize;
        }
        String::from_utf8(out).expect("ASCII only")
    }
}
