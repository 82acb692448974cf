//! Abbadingo-style sample files.
//!
//! ```text
//! <count> <alphabet_size>
//! <label> <len> <sym_1> ... <sym_len>
//! ```
//!
//! Label 1 marks an accepted word, 0 a rejected one. `#` starts a comment.

use std::fmt::Write as _;

use super::TeacherError;
use crate::automata::{Label, Word};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleSet {
    pub alphabet_size: usize,
    pub entries: Vec<(Word, Label)>,
}

fn format_err(line: usize, msg: impl Into<String>) -> TeacherError {
    TeacherError::SampleFormat { line, msg: msg.into() }
}

pub fn parse_samples(input: &str) -> Result<SampleSet, TeacherError> {
    let mut lines = input
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());
    let (hline, header) = lines.next().ok_or_else(|| format_err(1, "missing header"))?;
    let nums: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| format_err(hline, format!("invalid number `{t}`"))))
        .collect::<Result<_, _>>()?;
    let [count, alphabet_size] = nums[..] else {
        return Err(format_err(hline, "header must be `<count> <alphabet_size>`"));
    };
    if alphabet_size == 0 {
        return Err(format_err(hline, "alphabet size must be positive"));
    }
    let mut entries = Vec::with_capacity(count);
    for (line, text) in lines {
        let nums: Vec<usize> = text
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| format_err(line, format!("invalid number `{t}`"))))
            .collect::<Result<_, _>>()?;
        let (label, len, word) = match nums.as_slice() {
            [label, len, word @ ..] => (*label, *len, word),
            _ => return Err(format_err(line, "expected `<label> <len> <symbols>`")),
        };
        let label = match label {
            1 => Label::Accept,
            0 => Label::Reject,
            other => return Err(format_err(line, format!("label must be 0 or 1, got {other}"))),
        };
        if word.len() != len {
            return Err(format_err(line, format!("length {len} but {} symbols", word.len())));
        }
        if let Some(bad) = word.iter().find(|&&a| a >= alphabet_size) {
            return Err(format_err(line, format!("symbol {bad} outside alphabet of size {alphabet_size}")));
        }
        entries.push((word.to_vec(), label));
    }
    if entries.len() != count {
        return Err(format_err(hline, format!("header announces {count} words, found {}", entries.len())));
    }
    Ok(SampleSet { alphabet_size, entries })
}

pub fn write_samples(set: &SampleSet) -> String {
    let mut out = format!("{} {}\n", set.entries.len(), set.alphabet_size);
    for (w, l) in &set.entries {
        write!(out, "{} {}", u8::from(l.is_accept()), w.len()).unwrap();
        for a in w {
            write!(out, " {a}").unwrap();
        }
        out.push('\n');
    }
    out
}
