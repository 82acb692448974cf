//! Line-oriented text format and DOT export.
//!
//! ```text
//! 3nfa <num_states> <num_symbols>
//! initial <id>
//! label <id> +|-
//! trans <src> <symbol-index> <dst>
//! ```
//!
//! Lines starting with `#` are comments. Observation-tree snapshots add
//! `dontcare <id>` and `basis <id> <index>` lines.

use std::fmt::Write as _;

use thiserror::Error;

use super::{Alphabet, AutomataError, Label, StateId, ThreeNfa};

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("missing `3nfa` header line")]
    MissingHeader,
    #[error("missing `initial` line")]
    MissingInitial,
    #[error(transparent)]
    Automaton(#[from] AutomataError),
}

/// Parsed automaton together with any observation-tree extension lines.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub automaton: ThreeNfa,
    pub dontcare: Vec<StateId>,
    pub basis: Vec<(StateId, usize)>,
}

fn syntax(line: usize, msg: impl Into<String>) -> FormatError {
    FormatError::Syntax { line, msg: msg.into() }
}

fn number(tok: Option<&str>, line: usize, what: &str) -> Result<usize, FormatError> {
    let tok = tok.ok_or_else(|| syntax(line, format!("missing {what}")))?;
    tok.parse().map_err(|_| syntax(line, format!("invalid {what} `{tok}`")))
}

/// Parses a document, accepting the extension lines.
pub fn parse_document(input: &str) -> Result<Document, FormatError> {
    let mut header: Option<(usize, usize)> = None;
    let mut initial = None;
    let mut labels = Vec::new();
    let mut trans = Vec::new();
    let mut dontcare = Vec::new();
    let mut basis = Vec::new();
    for (i, raw) in input.lines().enumerate() {
        let line = i + 1;
        let text = raw.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let mut toks = text.split_whitespace();
        let kind = toks.next().expect("non-empty line");
        if header.is_none() && kind != "3nfa" {
            return Err(FormatError::MissingHeader);
        }
        match kind {
            "3nfa" => {
                if header.is_some() {
                    return Err(syntax(line, "duplicate header"));
                }
                let n = number(toks.next(), line, "state count")?;
                let k = number(toks.next(), line, "symbol count")?;
                header = Some((n, k));
            }
            "initial" => {
                if initial.is_some() {
                    return Err(syntax(line, "duplicate initial state"));
                }
                initial = Some(number(toks.next(), line, "state")?);
            }
            "label" => {
                let q = number(toks.next(), line, "state")?;
                let l = match toks.next() {
                    Some("+") => Label::Accept,
                    Some("-") => Label::Reject,
                    other => return Err(syntax(line, format!("invalid label {other:?}"))),
                };
                labels.push((line, q, l));
            }
            "trans" => {
                let src = number(toks.next(), line, "source")?;
                let a = number(toks.next(), line, "symbol")?;
                let dst = number(toks.next(), line, "target")?;
                trans.push((line, src, a, dst));
            }
            "dontcare" => dontcare.push(number(toks.next(), line, "state")?),
            "basis" => {
                let q = number(toks.next(), line, "state")?;
                let idx = number(toks.next(), line, "index")?;
                basis.push((q, idx));
            }
            other => return Err(syntax(line, format!("unknown line kind `{other}`"))),
        }
        if toks.next().is_some() {
            return Err(syntax(line, "trailing tokens"));
        }
    }
    let (n, k) = header.ok_or(FormatError::MissingHeader)?;
    let init = initial.ok_or(FormatError::MissingInitial)?;
    let mut automaton = ThreeNfa::new(n, k, init)?;
    for (line, q, l) in labels {
        automaton.check_state(q).map_err(|e| syntax(line, e.to_string()))?;
        if automaton.label(q).is_some_and(|old| old != l) {
            return Err(syntax(line, format!("state {q} labeled twice")));
        }
        automaton.set_label(q, Some(l))?;
    }
    for (line, src, a, dst) in trans {
        automaton.add_transition(src, a, dst).map_err(|e| syntax(line, e.to_string()))?;
    }
    for &q in &dontcare {
        automaton.check_state(q)?;
    }
    for &(q, _) in &basis {
        automaton.check_state(q)?;
    }
    Ok(Document { automaton, dontcare, basis })
}

/// Parses a plain automaton; extension lines are rejected.
pub fn parse(input: &str) -> Result<ThreeNfa, FormatError> {
    let doc = parse_document(input)?;
    if !doc.dontcare.is_empty() || !doc.basis.is_empty() {
        return Err(syntax(0, "observation-tree lines in a plain automaton"));
    }
    Ok(doc.automaton)
}

pub fn write(a: &ThreeNfa) -> String {
    write_document(a, &[], &[])
}

/// Serializes with lines sorted by kind, then by ids.
pub fn write_document(a: &ThreeNfa, dontcare: &[StateId], basis: &[(StateId, usize)]) -> String {
    let mut out = String::new();
    writeln!(out, "3nfa {} {}", a.num_states(), a.num_symbols()).unwrap();
    writeln!(out, "initial {}", a.initial()).unwrap();
    for q in 0..a.num_states() {
        if let Some(l) = a.label(q) {
            writeln!(out, "label {q} {l}").unwrap();
        }
    }
    for (src, s, dst) in a.transitions() {
        writeln!(out, "trans {src} {s} {dst}").unwrap();
    }
    let mut dc = dontcare.to_vec();
    dc.sort_unstable();
    for q in dc {
        writeln!(out, "dontcare {q}").unwrap();
    }
    let mut b = basis.to_vec();
    b.sort_unstable();
    for (q, idx) in b {
        writeln!(out, "basis {q} {idx}").unwrap();
    }
    out
}

/// Graphviz rendering: accepting states are double circles, rejecting
/// states single circles, unknown states dashed.
pub fn to_dot(a: &ThreeNfa, alphabet: Option<&Alphabet>) -> String {
    let mut out = String::from("digraph automaton {\n  rankdir=LR;\n  __start [shape=point];\n");
    for q in 0..a.num_states() {
        let style = match a.label(q) {
            Some(Label::Accept) => "shape=doublecircle",
            Some(Label::Reject) => "shape=circle",
            None => "shape=circle, style=dashed",
        };
        writeln!(out, "  s{q} [label=\"{q}\", {style}];").unwrap();
    }
    writeln!(out, "  __start -> s{};", a.initial()).unwrap();
    // one edge per (src, dst) with all symbols joined
    let mut edges: std::collections::BTreeMap<(StateId, StateId), Vec<String>> = Default::default();
    for (src, s, dst) in a.transitions() {
        let name = alphabet
            .and_then(|al| al.name(s))
            .map_or_else(|| s.to_string(), str::to_owned);
        edges.entry((src, dst)).or_default().push(name);
    }
    for ((src, dst), names) in edges {
        writeln!(out, "  s{src} -> s{dst} [label=\"{}\"];", names.join(",")).unwrap();
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::automata::ops::tests::incompatible_not_apart;

    #[test]
    fn write_then_parse_is_identity() {
        let c = incompatible_not_apart();
        let text = write(&c);
        assert!(text.starts_with("3nfa 5 2\ninitial 0\nlabel 0 +\n"));
        assert_eq!(parse(&text).unwrap(), c);
    }

    #[test]
    fn parser_tolerates_comments_and_order() {
        let text = "# odd length\n3nfa 2 2\ntrans 1 0 0\n\nlabel 1 +\ninitial 0\nlabel 0 -\ntrans 0 0 1\ntrans 0 1 1\ntrans 1 1 0\n";
        let a = parse(text).unwrap();
        assert!(a.is_complete() && a.is_deterministic());
        assert_eq!(a.label(1), Some(Label::Accept));
    }

    #[test]
    fn parser_reports_bad_lines() {
        assert!(matches!(parse("initial 0\n"), Err(FormatError::MissingHeader)));
        assert!(matches!(parse("3nfa 1 1\n"), Err(FormatError::MissingInitial)));
        assert!(matches!(parse("3nfa 1 1\ninitial 0\nlabel 0 ?\n"), Err(FormatError::Syntax { line: 3, .. })));
        assert!(matches!(parse("3nfa 1 1\ninitial 0\ntrans 0 1 0\n"), Err(FormatError::Syntax { line: 3, .. })));
        assert!(matches!(parse("3nfa 1 1\ninitial 0\nbogus\n"), Err(FormatError::Syntax { line: 3, .. })));
        assert!(parse("3nfa 2 1\ninitial 0\ndontcare 1\n").is_err());
        assert!(parse_document("3nfa 2 1\ninitial 0\ndontcare 1\nbasis 0 1\n").is_ok());
    }

    #[test]
    fn dot_marks_label_styles() {
        let dot = to_dot(&incompatible_not_apart(), Some(&Alphabet::new(["a", "b"]).unwrap()));
        assert!(dot.contains("s0 [label=\"0\", shape=doublecircle]"));
        assert!(dot.contains("s1 [label=\"1\", shape=circle]"));
        assert!(dot.contains("s2 [label=\"2\", shape=circle, style=dashed]"));
        assert!(dot.contains("s0 -> s2 [label=\"b\"]"));
    }
}
