//! SMT-LIB v2 encoding and the external solver process.

use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::PathBuf;
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use super::{RawModel, SynthesisError, SynthesisProblem};
use crate::automata::Label;

/// Environment variable naming the external solver executable.
pub const SOLVER_ENV: &str = "SEPDFA_SMT_SOLVER";

/// Script over `delta: [1..n] x [0..k) -> [1..n]`, `out: [1..n] -> {0,1}` and
/// `f: [1..m] -> [1..n]`, with assertions in a fixed order: ranges, tree
/// transitions, labels, basis fixing, candidate domains.
pub fn encode_smtlib(problem: &SynthesisProblem<'_>) -> String {
    let tree = problem.tree();
    let (n, k, m) = (problem.n(), tree.num_symbols(), tree.len());
    let basis_len = problem.basis().len();
    let mut s = String::new();
    writeln!(s, "; n={n} k={k} m={m} basis={basis_len}").unwrap();
    s.push_str("(set-logic QF_UFLIA)\n");
    s.push_str("(declare-fun delta (Int Int) Int)\n(declare-fun out (Int) Int)\n(declare-fun f (Int) Int)\n");
    for st in 1..=n {
        for a in 0..k {
            writeln!(s, "(assert (and (<= 1 (delta {st} {a})) (<= (delta {st} {a}) {n})))").unwrap();
        }
    }
    for st in 1..=n {
        writeln!(s, "(assert (or (= (out {st}) 0) (= (out {st}) 1)))").unwrap();
    }
    for i in 1..=m {
        writeln!(s, "(assert (and (<= 1 (f {i})) (<= (f {i}) {n})))").unwrap();
    }
    let nodes = problem.nodes_by_index();
    // transitions, ordered by source index then symbol
    for (i, &q) in nodes.iter().enumerate() {
        for (a, c) in tree.children(q) {
            writeln!(s, "(assert (= (delta (f {}) {a}) (f {})))", i + 1, problem.node_index(c)).unwrap();
        }
    }
    for (i, &q) in nodes.iter().enumerate() {
        if let Some(l) = tree.label(q) {
            writeln!(s, "(assert (= (out (f {})) {}))", i + 1, u8::from(l == Label::Accept)).unwrap();
        }
    }
    if problem.redundant_clauses() {
        for i in 1..=basis_len {
            writeln!(s, "(assert (= (f {i}) {i}))").unwrap();
        }
        for (i, &q) in nodes.iter().enumerate().skip(basis_len) {
            let idx = i + 1;
            let mut disj = vec![format!("(> (f {idx}) {basis_len})")];
            disj.extend(problem.candidate_indices(q).map(|p| format!("(= (f {idx}) {p})")));
            if disj.len() == 1 {
                writeln!(s, "(assert {})", disj[0]).unwrap();
            } else {
                writeln!(s, "(assert (or {}))", disj.join(" ")).unwrap();
            }
        }
    }
    s.push_str("(check-sat)\n");
    let mut terms = Vec::new();
    for st in 1..=n {
        for a in 0..k {
            terms.push(format!("(delta {st} {a})"));
        }
    }
    terms.extend((1..=n).map(|st| format!("(out {st})")));
    terms.extend((1..=m).map(|i| format!("(f {i})")));
    writeln!(s, "(get-value ({}))", terms.join(" ")).unwrap();
    s
}

/// A solver executable reading an SMT-LIB script on standard input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExternalSolver {
    pub program: PathBuf,
    pub args: Vec<String>,
}

impl ExternalSolver {
    /// Uses `-in` as argument when the executable is z3, none otherwise.
    pub fn new(program: PathBuf) -> Self {
        let is_z3 = program.file_stem().is_some_and(|s| s == "z3");
        ExternalSolver { program, args: if is_z3 { vec!["-in".into()] } else { Vec::new() } }
    }

    pub fn with_args(program: PathBuf, args: Vec<String>) -> Self {
        ExternalSolver { program, args }
    }

    pub(super) fn run(&self, problem: &SynthesisProblem<'_>, deadline: Option<Instant>) -> Result<Option<RawModel>, SynthesisError> {
        let script = encode_smtlib(problem);
        let output = self.execute(&script, deadline)?;
        parse_response(&output, problem)
    }

    fn execute(&self, script: &str, deadline: Option<Instant>) -> Result<String, SynthesisError> {
        let backend = |e: std::io::Error| SynthesisError::Backend(format!("{}: {e}", self.program.display()));
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(backend)?;
        let mut stdin = child.stdin.take().expect("piped stdin");
        let script = script.to_owned();
        let writer = std::thread::spawn(move || stdin.write_all(script.as_bytes()));
        let mut stdout = child.stdout.take().expect("piped stdout");
        let reader = std::thread::spawn(move || {
            let mut buf = String::new();
            stdout.read_to_string(&mut buf).map(|_| buf)
        });
        loop {
            if child.try_wait().map_err(backend)?.is_some() {
                break;
            }
            if deadline.is_some_and(|d| Instant::now() >= d) {
                let _ = child.kill();
                let _ = child.wait();
                return Err(SynthesisError::Budget);
            }
            std::thread::sleep(Duration::from_millis(2));
        }
        // a solver may exit before reading all input; that shows up in its output
        let _ = writer.join();
        reader.join().map_err(|_| SynthesisError::Backend("reader thread panicked".into()))?.map_err(backend)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Sexp {
    Atom(String),
    List(Vec<Sexp>),
}

fn parse_sexps(text: &str) -> Result<Vec<Sexp>, SynthesisError> {
    let bad = |msg: &str| SynthesisError::Backend(format!("unparsable solver output: {msg}"));
    let mut stack: Vec<Vec<Sexp>> = vec![Vec::new()];
    let mut atom = String::new();
    let flush = |atom: &mut String, stack: &mut Vec<Vec<Sexp>>| {
        if !atom.is_empty() {
            stack.last_mut().expect("open list").push(Sexp::Atom(std::mem::take(atom)));
        }
    };
    for c in text.chars() {
        match c {
            '(' => {
                flush(&mut atom, &mut stack);
                stack.push(Vec::new());
            }
            ')' => {
                flush(&mut atom, &mut stack);
                let list = stack.pop().expect("open list");
                stack.last_mut().ok_or_else(|| bad("unbalanced `)`"))?.push(Sexp::List(list));
            }
            c if c.is_whitespace() => flush(&mut atom, &mut stack),
            c => atom.push(c),
        }
    }
    flush(&mut atom, &mut stack);
    if stack.len() != 1 {
        return Err(bad("unbalanced `(`"));
    }
    Ok(stack.pop().expect("top level"))
}

fn int_value(e: &Sexp) -> Option<i64> {
    match e {
        Sexp::Atom(a) => a.parse().ok(),
        Sexp::List(items) => match items.as_slice() {
            [Sexp::Atom(minus), inner] if minus == "-" => int_value(inner).map(|v| -v),
            _ => None,
        },
    }
}

fn parse_response(text: &str, problem: &SynthesisProblem<'_>) -> Result<Option<RawModel>, SynthesisError> {
    let bad = |msg: String| SynthesisError::Backend(format!("unexpected solver output: {msg}"));
    let exprs = parse_sexps(text)?;
    let verdict = match exprs.first() {
        Some(Sexp::Atom(v)) => v.as_str(),
        _ => return Err(bad(text.trim().chars().take(200).collect())),
    };
    match verdict {
        "unsat" => return Ok(None),
        "sat" => {}
        "unknown" => return Err(SynthesisError::Backend("solver answered unknown".into())),
        other => return Err(bad(other.to_owned())),
    }
    let tree = problem.tree();
    let (n, k) = (problem.n(), tree.num_symbols());
    let mut model = RawModel { delta: vec![None; n * k], labels: vec![None; n], f: vec![None; tree.len()] };
    let Some(Sexp::List(pairs)) = exprs.get(1) else { return Err(bad("missing value list".into())) };
    let in_range = |v: i64| (1..=n as i64).contains(&v).then(|| v as usize - 1);
    for pair in pairs {
        let Sexp::List(pv) = pair else { return Err(bad("value entry is not a pair".into())) };
        let [Sexp::List(term), value] = pv.as_slice() else { return Err(bad("value entry is not a pair".into())) };
        let value = int_value(value).ok_or_else(|| bad(format!("non-integer value in {pair:?}")))?;
        let args: Vec<i64> = term[1..].iter().filter_map(int_value).collect();
        match (term.first(), args.as_slice()) {
            (Some(Sexp::Atom(name)), &[s, a]) if name == "delta" => {
                let s = in_range(s).ok_or_else(|| bad("delta state out of range".into()))?;
                let t = in_range(value).ok_or_else(|| bad("delta value out of range".into()))?;
                let a = usize::try_from(a).ok().filter(|&a| a < k).ok_or_else(|| bad("symbol out of range".into()))?;
                model.delta[s * k + a] = Some(t);
            }
            (Some(Sexp::Atom(name)), &[s]) if name == "out" => {
                let s = in_range(s).ok_or_else(|| bad("out state out of range".into()))?;
                model.labels[s] = Some(Label::from_accepting(value == 1));
            }
            (Some(Sexp::Atom(name)), &[i]) if name == "f" => {
                let i = usize::try_from(i).ok().filter(|&i| (1..=tree.len()).contains(&i)).ok_or_else(|| bad("node index out of range".into()))?;
                let t = in_range(value).ok_or_else(|| bad("f value out of range".into()))?;
                model.f[problem.nodes_by_index()[i - 1]] = Some(t);
            }
            _ => return Err(bad(format!("unknown term {term:?}"))),
        }
    }
    if model.delta.iter().any(Option::is_none) || model.f.iter().any(Option::is_none) {
        return Err(bad("incomplete model".into()));
    }
    Ok(Some(model))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::observation_tree::{Relation, RelationCache};
    use crate::synthesis::tests::example_run_tree;
    use crate::synthesis::{verify_model, HypothesisModel};

    #[test]
    fn encoding_is_deterministic_and_ordered() {
        let (t, b) = example_run_tree();
        let p = SynthesisProblem::new(&t, &b, 2, Relation::Apartness, &mut RelationCache::new()).unwrap();
        let one = encode_smtlib(&p);
        assert_eq!(one, encode_smtlib(&p));
        let pos = |needle: &str| one.find(needle).unwrap_or_else(|| panic!("missing {needle}"));
        // root has index 1, node `a` index 2 (basis), then b, aa, ab
        assert!(pos("(assert (= (delta (f 1) 0) (f 2)))") < pos("(assert (= (out (f 1)) 1))"));
        assert!(pos("(assert (= (out (f 1)) 1))") < pos("(assert (= (f 1) 1))"));
        assert!(pos("(assert (= (f 2) 2))") < pos("(check-sat)"));
        // ab is a don't-care leaf: no label, every basis index allowed
        assert!(one.contains("(assert (or (> (f 5) 2) (= (f 5) 1) (= (f 5) 2)))"));
        // aa (+) is apart from a (-)
        assert!(one.contains("(assert (or (> (f 4) 2) (= (f 4) 1)))"));
        let plain = encode_smtlib(&p.clone().with_redundant_clauses(false));
        assert!(!plain.contains("(assert (= (f 1) 1))"));
        assert!(!plain.contains("(> (f"));
    }

    #[test]
    fn empty_candidate_disjunction_is_just_the_fresh_bound() {
        let (t, _) = example_run_tree();
        let b1 = crate::observation_tree::Basis::new(&t);
        let p = SynthesisProblem::new(&t, &b1, 2, Relation::Apartness, &mut RelationCache::new()).unwrap();
        // node `a` (index 2) is apart from the only basis node
        assert!(encode_smtlib(&p).contains("(assert (> (f 2) 1))"));
    }

    #[test]
    fn sat_response_is_parsed_into_a_model() {
        let (t, b) = example_run_tree();
        let p = SynthesisProblem::new(&t, &b, 2, Relation::Apartness, &mut RelationCache::new()).unwrap();
        // root=1 (+) a=2 (-), both symbols toggle; f: ε,a,b,aa,ab -> 1,2,2,1,1
        let reply = "sat\n(((delta 1 0) 2) ((delta 1 1) 2) ((delta 2 0) 1) ((delta 2 1) 1)\n ((out 1) 1) ((out 2) 0)\n ((f 1) 1) ((f 2) 2) ((f 3) 2) ((f 4) 1) ((f 5) 1))\n";
        let raw = parse_response(reply, &p).unwrap().unwrap();
        let model: HypothesisModel = raw.finish(&p).unwrap();
        assert!(verify_model(&p, &model));
        assert_eq!(model.hypothesis.num_states(), 2);
    }

    #[test]
    fn unsat_and_garbage_responses() {
        let (t, b) = example_run_tree();
        let p = SynthesisProblem::new(&t, &b, 2, Relation::Apartness, &mut RelationCache::new()).unwrap();
        assert!(parse_response("unsat\n(error \"model not available\")\n", &p).unwrap().is_none());
        assert!(matches!(parse_response("segfault", &p), Err(SynthesisError::Backend(_))));
        assert!(matches!(parse_response("sat\n(((f 1) 1)", &p), Err(SynthesisError::Backend(_))));
        assert!(matches!(parse_response("sat\n(((f 1) 7))", &p), Err(SynthesisError::Backend(_))));
    }

    #[test]
    fn negative_literals_parse() {
        assert_eq!(int_value(&parse_sexps("(- 3)").unwrap()[0]), Some(-3));
    }

    #[test]
    fn z3_gets_stdin_flag() {
        assert_eq!(ExternalSolver::new("/usr/bin/z3".into()).args, vec!["-in"]);
        assert!(ExternalSolver::new("/opt/cvc5".into()).args.is_empty());
    }

    #[test]
    fn missing_executable_is_a_backend_error() {
        let (t, b) = example_run_tree();
        let p = SynthesisProblem::new(&t, &b, 2, Relation::Apartness, &mut RelationCache::new()).unwrap();
        let solver = ExternalSolver::new("/nonexistent/solver".into());
        assert!(matches!(solver.run(&p, None), Err(SynthesisError::Backend(_))));
    }
}
