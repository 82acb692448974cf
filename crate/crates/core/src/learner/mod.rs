//! The active learner: rule scheduling over the observation tree, hypothesis
//! synthesis and validity queries, until a separating DFA is accepted.

mod establish;

use std::collections::{HashMap, HashSet};
use std::fs;
use std::io::{self, Write};
use std::path::Path;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::automata::{CompleteDfa, Symbol, Word};
use crate::observation_tree::{
    frontier, promote, replace_basis, Answer, Basis, NodeId, ObservationTree, Relation, RelationCache, TreeError,
};
use crate::synthesis::{solve, Backend, SolveLimits, SynthesisError, SynthesisOutcome, SynthesisProblem, DEFAULT_MAX_EXPANSIONS};
use crate::teacher::{Teacher, TeacherError, Validity};

#[derive(Debug, Clone)]
pub struct LearnerConfig {
    pub relation: Relation,
    pub basis_replacement: bool,
    /// Query to turn incompatible basis pairs into apart ones.
    /// Only used with [`Relation::Incompatibility`].
    pub establish_apartness: bool,
    /// Locate the separating pair along a cycle by bisection instead of a scan.
    pub binary_search: bool,
    /// Record a counterexample's label as the opposite of the hypothesis
    /// output instead of querying it.
    pub infer_counterexample_label: bool,
    pub backend: Backend,
    pub redundant_clauses: bool,
    pub max_expansions: u64,
    pub timeout: Option<Duration>,
    pub max_membership_queries: Option<u64>,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        LearnerConfig {
            relation: Relation::Apartness,
            basis_replacement: false,
            establish_apartness: false,
            binary_search: false,
            infer_counterexample_label: false,
            backend: Backend::Internal,
            redundant_clauses: true,
            max_expansions: DEFAULT_MAX_EXPANSIONS,
            timeout: None,
            max_membership_queries: None,
        }
    }
}

impl LearnerConfig {
    pub fn incompatibility() -> Self {
        LearnerConfig { relation: Relation::Incompatibility, establish_apartness: true, ..Self::default() }
    }

    pub fn mode_name(&self) -> &'static str {
        match self.relation {
            Relation::Apartness => "apartness",
            Relation::Incompatibility => "incompatibility",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunStats {
    pub membership_queries: u64,
    pub dontcare_answers: u64,
    pub validity_queries: u64,
    pub unsat_rounds: u64,
    pub input_symbols: u64,
    pub wall_time_ms: u64,
    pub learned_size: usize,
    pub n: usize,
    pub basis_size: usize,
    pub tree_size: usize,
    pub promotions: u64,
    pub replacements: u64,
    pub established: u64,
}

/// Everything the learner knew when it stopped early.
#[derive(Debug, Clone)]
pub struct PartialRun {
    pub tree: ObservationTree,
    pub basis: Basis,
    pub n: usize,
    pub stats: RunStats,
}

#[derive(Debug, Error)]
pub enum LearnerError {
    #[error("run budget exhausted")]
    Budget(Box<PartialRun>),
    #[error("synthesis budget exhausted")]
    SynthesisBudget(Box<PartialRun>),
    #[error(transparent)]
    Synthesis(SynthesisError),
    #[error(transparent)]
    Teacher(#[from] TeacherError),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error("teacher is inconsistent: {0}")]
    Inconsistent(String),
}

impl LearnerError {
    pub fn partial(&self) -> Option<&PartialRun> {
        match self {
            LearnerError::Budget(p) | LearnerError::SynthesisBudget(p) => Some(p),
            _ => None,
        }
    }

    pub fn is_budget(&self) -> bool {
        self.partial().is_some()
    }
}

/// One applied rule, in order of application.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Step {
    Initial,
    Promotion(NodeId),
    Replacement { old: NodeId, new: NodeId },
    Extension(Word),
    Identification(Word),
    Establish(Word),
    Unsat(usize),
    Hypothesis(usize),
    Counterexample(Word),
    Accepted(usize),
}

#[derive(Debug, Clone)]
pub struct LearnOutcome {
    pub hypothesis: CompleteDfa,
    pub stats: RunStats,
    pub tree: ObservationTree,
    pub basis: Basis,
    pub n: usize,
}

pub struct Learner<T> {
    teacher: T,
    config: LearnerConfig,
    tree: ObservationTree,
    basis: Basis,
    n: usize,
    cache: RelationCache,
    // next index into the length-lex enumeration of extension words, per basis node
    cursors: HashMap<NodeId, u64>,
    // (p, q) pairs already handed to establish_apartness
    attempted: HashSet<(NodeId, NodeId)>,
    hypotheses: Vec<CompleteDfa>,
    trace: Vec<Step>,
    unsat_rounds: u64,
    promotions: u64,
    replacements: u64,
    established: u64,
    started: Instant,
}

impl<T: Teacher> Learner<T> {
    pub fn new(teacher: T, config: LearnerConfig) -> Self {
        let tree = ObservationTree::new(teacher.num_symbols());
        let basis = Basis::new(&tree);
        Learner {
            teacher,
            config,
            tree,
            basis,
            n: 1,
            cache: RelationCache::new(),
            cursors: HashMap::new(),
            attempted: HashSet::new(),
            hypotheses: Vec::new(),
            trace: Vec::new(),
            unsat_rounds: 0,
            promotions: 0,
            replacements: 0,
            established: 0,
            started: Instant::now(),
        }
    }

    pub fn tree(&self) -> &ObservationTree {
        &self.tree
    }

    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn teacher(&self) -> &T {
        &self.teacher
    }

    pub fn config(&self) -> &LearnerConfig {
        &self.config
    }

    pub fn trace(&self) -> &[Step] {
        &self.trace
    }

    /// Every hypothesis proposed to the teacher, in order.
    pub fn hypotheses(&self) -> &[CompleteDfa] {
        &self.hypotheses
    }

    pub fn relation_cache(&mut self) -> &mut RelationCache {
        &mut self.cache
    }

    pub fn stats(&self) -> RunStats {
        let c = self.teacher.counters();
        RunStats {
            membership_queries: c.membership,
            dontcare_answers: c.dontcare,
            validity_queries: c.validity,
            unsat_rounds: self.unsat_rounds,
            input_symbols: c.symbols,
            wall_time_ms: self.started.elapsed().as_millis() as u64,
            learned_size: 0,
            n: self.n,
            basis_size: self.basis.len(),
            tree_size: self.tree.len(),
            promotions: self.promotions,
            replacements: self.replacements,
            established: self.established,
        }
    }

    fn partial(&self) -> Box<PartialRun> {
        Box::new(PartialRun { tree: self.tree.clone(), basis: self.basis.clone(), n: self.n, stats: self.stats() })
    }

    fn deadline(&self) -> Option<Instant> {
        self.config.timeout.map(|t| self.started + t)
    }

    fn check_budget(&self) -> Result<(), LearnerError> {
        let late = self.deadline().is_some_and(|d| Instant::now() >= d);
        let over = self.config.max_membership_queries.is_some_and(|cap| self.teacher.counters().membership >= cap);
        if late || over {
            Err(LearnerError::Budget(self.partial()))
        } else {
            Ok(())
        }
    }

    /// Poses a membership query and records the answer.
    fn query(&mut self, word: &[Symbol]) -> Result<Answer, LearnerError> {
        let answer = self.teacher.membership(word);
        self.tree.add_observation(word, answer)?;
        Ok(answer)
    }

    fn queried(&self, word: &[Symbol]) -> bool {
        self.tree.get(word).is_some_and(|q| self.tree.is_queried(q))
    }

    /// Runs until a hypothesis is accepted.
    pub fn run(mut self) -> Result<LearnOutcome, LearnerError> {
        self.started = Instant::now();
        loop {
            if let Some(hypothesis) = self.step()? {
                let mut stats = self.stats();
                stats.learned_size = hypothesis.num_states();
                return Ok(LearnOutcome { hypothesis, stats, tree: self.tree, basis: self.basis, n: self.n });
            }
        }
    }

    /// Applies one rule. Returns the accepted hypothesis once finished.
    pub fn step(&mut self) -> Result<Option<CompleteDfa>, LearnerError> {
        self.check_budget()?;
        if !self.tree.is_queried(self.tree.root()) {
            self.query(&[])?;
            self.trace.push(Step::Initial);
            return Ok(None);
        }
        if self.rule_promotion()? {
            return Ok(None);
        }
        if self.config.relation == Relation::Incompatibility && self.config.establish_apartness && self.rule_establish()? {
            return Ok(None);
        }
        if self.config.basis_replacement && self.rule_replacement()? {
            return Ok(None);
        }
        if self.rule_extension()? || self.rule_identification()? {
            return Ok(None);
        }
        self.rule_validity()
    }

    fn has_candidate(&mut self, q: NodeId) -> bool {
        let relation = self.config.relation;
        // an unlabeled subtree cannot be distinguished from anything
        if self.tree.stamp(q) == 0 {
            return true;
        }
        let basis = self.basis.members().to_vec();
        basis.into_iter().any(|p| !self.cache.distinguished(&self.tree, relation, p, q))
    }

    /// Promotes the first non-basis node, breadth-first, distinguished from
    /// the whole basis.
    pub fn rule_promotion(&mut self) -> Result<bool, LearnerError> {
        for q in self.tree.breadth_first() {
            if self.basis.contains(q) || self.has_candidate(q) {
                continue;
            }
            self.n = promote(&self.tree, &mut self.basis, q, self.n, self.config.relation, &mut self.cache)?;
            debug_assert!(self.basis.len() <= self.n);
            self.promotions += 1;
            self.trace.push(Step::Promotion(q));
            return Ok(true);
        }
        Ok(false)
    }

    /// Swaps a basis node for a shallower node whose only candidate it is.
    pub fn rule_replacement(&mut self) -> Result<bool, LearnerError> {
        let deepest = self.basis.members().iter().map(|&b| self.tree.depth(b)).max().unwrap_or(0);
        let relation = self.config.relation;
        for q in self.tree.breadth_first() {
            if self.tree.depth(q) >= deepest {
                break;
            }
            if self.basis.contains(q) || self.tree.stamp(q) == 0 {
                continue;
            }
            let members = self.basis.members().to_vec();
            let mut only = None;
            let mut count = 0;
            for p in members {
                if !self.cache.distinguished(&self.tree, relation, p, q) {
                    count += 1;
                    only = Some(p);
                    if count > 1 {
                        break;
                    }
                }
            }
            let Some(p) = only.filter(|_| count == 1) else { continue };
            if self.tree.depth(q) >= self.tree.depth(p) {
                continue;
            }
            replace_basis(&self.tree, &mut self.basis, q, p, relation, &mut self.cache)?;
            self.cursors.remove(&p);
            self.replacements += 1;
            self.trace.push(Step::Replacement { old: p, new: q });
            return Ok(true);
        }
        Ok(false)
    }

    /// Queries the first unqueried `access(b)·v` with `|v| <= n - |S| + 1`,
    /// basis nodes in order, words `v` in length-lexicographic order.
    pub fn rule_extension(&mut self) -> Result<bool, LearnerError> {
        let bound = self.n - self.basis.len() + 1;
        let k = self.tree.num_symbols();
        for b in self.basis.members().to_vec() {
            let access = self.tree.access(b);
            loop {
                let cursor = *self.cursors.get(&b).unwrap_or(&0);
                let v = length_lex_word(cursor, k);
                if v.len() > bound {
                    break;
                }
                let mut w = access.clone();
                w.extend_from_slice(&v);
                if self.queried(&w) {
                    self.cursors.insert(b, cursor + 1);
                    continue;
                }
                self.query(&w)?;
                self.cursors.insert(b, cursor + 1);
                self.trace.push(Step::Extension(w));
                return Ok(true);
            }
        }
        Ok(false)
    }

    /// For a frontier node with two candidates `p ⋕ r`, queries `access(q)·v`
    /// for the cached witness `v` of `p ⋕ r`. Pairs are tried in basis order.
    pub fn rule_identification(&mut self) -> Result<bool, LearnerError> {
        let relation = self.config.relation;
        for q in frontier(&self.tree, &self.basis) {
            let cands: Vec<NodeId> = self
                .basis
                .members()
                .to_vec()
                .into_iter()
                .filter(|&p| !self.cache.distinguished(&self.tree, relation, p, q))
                .collect();
            if cands.len() < 2 {
                continue;
            }
            let access = self.tree.access(q);
            for (i, &p) in cands.iter().enumerate() {
                for &r in &cands[i + 1..] {
                    let Some(v) = self.cache.witness(&self.tree, p, r) else { continue };
                    let w = [access.as_slice(), v].concat();
                    if !self.queried(&w) {
                        self.query(&w)?;
                        self.trace.push(Step::Identification(w));
                        return Ok(true);
                    }
                }
            }
        }
        Ok(false)
    }

    fn rule_establish(&mut self) -> Result<bool, LearnerError> {
        let members = self.basis.members().to_vec();
        for (i, &p) in members.iter().enumerate() {
            for &q in &members[i + 1..] {
                if self.attempted.contains(&(p, q)) || self.cache.is_apart(&self.tree, p, q) {
                    continue;
                }
                self.attempted.insert((p, q));
                let before = self.teacher.counters().membership;
                let witness = self.establish_apartness(p, q)?;
                if let Some(w) = witness {
                    self.established += 1;
                    self.trace.push(Step::Establish(w));
                }
                if self.teacher.counters().membership > before {
                    return Ok(true);
                }
            }
        }
        Ok(false)
    }

    /// Solves at the current `n`; on a model, asks the teacher.
    pub fn rule_validity(&mut self) -> Result<Option<CompleteDfa>, LearnerError> {
        let outcome = {
            let problem = SynthesisProblem::new(&self.tree, &self.basis, self.n, self.config.relation, &mut self.cache)
                .map_err(LearnerError::Synthesis)?
                .with_redundant_clauses(self.config.redundant_clauses);
            let limits = SolveLimits { max_expansions: self.config.max_expansions, deadline: self.deadline() };
            solve(&problem, &self.config.backend, &limits)
        };
        let model = match outcome {
            Ok(SynthesisOutcome::Sat(model)) => model,
            Ok(SynthesisOutcome::Unsat) => {
                self.trace.push(Step::Unsat(self.n));
                self.unsat_rounds += 1;
                self.n += 1;
                return Ok(None);
            }
            Err(SynthesisError::Budget) => return Err(LearnerError::SynthesisBudget(self.partial())),
            Err(e) => return Err(LearnerError::Synthesis(e)),
        };
        let hypothesis = model.hypothesis;
        self.trace.push(Step::Hypothesis(hypothesis.num_states()));
        self.hypotheses.push(hypothesis.clone());
        match self.teacher.validity(&hypothesis)? {
            Validity::Accepted => {
                self.trace.push(Step::Accepted(hypothesis.num_states()));
                Ok(Some(hypothesis))
            }
            Validity::Counterexample(w) => {
                self.trace.push(Step::Counterexample(w.clone()));
                self.process_counterexample(&hypothesis, &w)?;
                Ok(None)
            }
        }
    }

    /// Queries every unqueried prefix of `w`, shortest first, then `w`.
    pub fn process_counterexample(&mut self, hypothesis: &CompleteDfa, w: &[Symbol]) -> Result<(), LearnerError> {
        for len in 0..w.len() {
            if !self.queried(&w[..len]) {
                self.query(&w[..len])?;
            }
        }
        let predicted = hypothesis.accepts(w).map_err(|e| LearnerError::Inconsistent(e.to_string()))?;
        if !self.queried(w) {
            if self.config.infer_counterexample_label {
                self.tree.add_observation(w, Answer::from_label(predicted.opposite()))?;
            } else {
                self.query(w)?;
            }
        }
        let node = self.tree.get(w).expect("queried");
        match self.tree.label(node) {
            Some(l) if l != predicted => Ok(()),
            other => Err(LearnerError::Inconsistent(format!(
                "counterexample {w:?} answered {other:?}, hypothesis says {predicted}"
            ))),
        }
    }
}

/// `index`-th word over `k` symbols in length-lexicographic order.
pub(crate) fn length_lex_word(mut index: u64, k: usize) -> Word {
    let k64 = k as u64;
    let mut len = 0u32;
    let mut block = 1u64;
    while index >= block {
        index -= block;
        len += 1;
        block = block.saturating_mul(k64);
    }
    let mut word = vec![0; len as usize];
    for slot in word.iter_mut().rev() {
        *slot = (index % k64) as Symbol;
        index /= k64;
    }
    word
}

/// Writes the tree and basis to `path` (with `n` in a leading comment) and
/// appends one JSON line holding `n` and `stats` to `<path>.stats.jsonl`.
pub fn write_snapshot(path: &Path, tree: &ObservationTree, basis: &Basis, n: usize, stats: &RunStats) -> io::Result<()> {
    fs::write(path, format!("# n {n}\n{}", tree.to_snapshot(basis)))?;
    let mut jsonl = path.as_os_str().to_owned();
    jsonl.push(".stats.jsonl");
    let mut file = fs::OpenOptions::new().create(true).append(true).open(jsonl)?;
    let line = serde_json::json!({ "n": n, "stats": stats });
    writeln!(file, "{line}")
}

/// Runs the learner to completion.
pub fn learn<T: Teacher>(teacher: T, config: LearnerConfig) -> Result<LearnOutcome, LearnerError> {
    Learner::new(teacher, config).run()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::automata::{product, shortest_word, ProductMode};
    use crate::observation_tree::tests::w;
    use crate::teacher::tests::example_teacher;

    #[test]
    fn length_lex_enumeration() {
        let words: Vec<Word> = (0..7).map(|i| length_lex_word(i, 2)).collect();
        assert_eq!(words, vec![w(""), w("a"), w("b"), w("aa"), w("ab"), w("ba"), w("bb")]);
        assert_eq!(length_lex_word(3, 1), vec![0, 0, 0]);
    }

    #[test]
    fn example_run_follows_the_expected_rules() {
        let mut learner = Learner::new(example_teacher(), LearnerConfig::default());
        let mut result = None;
        while result.is_none() {
            result = learner.step().unwrap();
        }
        let h = result.unwrap();
        assert_eq!(h.num_states(), 2);
        let parity = CompleteDfa::new(2, 0, vec![true, false], vec![1, 1, 0, 0]).unwrap();
        for (a, b) in [(&h, &parity), (&parity, &h)] {
            assert_eq!(shortest_word(&product(a, b, ProductMode::FirstAcceptsSecondRejects).unwrap()), None);
        }
        let t = learner.tree();
        let trace = learner.trace();
        assert_eq!(trace[0], Step::Initial);
        assert_eq!(trace[1], Step::Extension(w("a")));
        assert_eq!(trace[2], Step::Promotion(t.get(&w("a")).unwrap()));
        assert_eq!(&trace[3..6], &[Step::Extension(w("b")), Step::Extension(w("aa")), Step::Extension(w("ab"))]);
        assert_eq!(trace[6], Step::Hypothesis(2));
        assert_eq!(learner.n(), 2);
        // final tree: ε a b aa ab, plus bb once the first hypothesis was wrong
        assert!(t.len() == 5 || t.len() == 6);
        assert_eq!(t.answer(t.get(&w("ab")).unwrap()), Some(Answer::DontCare));
    }

    #[test]
    fn single_word_language_gives_one_state() {
        let eps = CompleteDfa::new(1, 0, vec![true, false], vec![1, 1]).unwrap();
        let empty = CompleteDfa::new(1, 0, vec![false], vec![0]).unwrap();
        let teacher = crate::teacher::ExactTeacher::new(eps, empty).unwrap();
        let out = learn(teacher, LearnerConfig::default()).unwrap();
        assert_eq!(out.hypothesis.num_states(), 1);
        assert!(out.hypothesis.is_accepting(0));
        assert_eq!(out.hypothesis.step(0, 0), 0);
    }

    #[test]
    fn membership_cap_yields_partial_run() {
        let config = LearnerConfig { max_membership_queries: Some(2), ..LearnerConfig::default() };
        match learn(example_teacher(), config) {
            Err(LearnerError::Budget(p)) => assert_eq!(p.stats.membership_queries, 2),
            other => panic!("expected budget error, got {other:?}"),
        }
    }

    #[test]
    fn snapshot_files_round_trip() {
        let out = learn(example_teacher(), LearnerConfig::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.snap");
        write_snapshot(&path, &out.tree, &out.basis, out.n, &out.stats).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("# n 2\n"));
        let (tree, basis) = ObservationTree::from_snapshot(&text).unwrap();
        assert_eq!((tree.len(), basis.len()), (out.tree.len(), out.basis.len()));
        let jsonl = fs::read_to_string(dir.path().join("run.snap.stats.jsonl")).unwrap();
        let v: serde_json::Value = serde_json::from_str(jsonl.trim()).unwrap();
        assert_eq!(v["stats"]["learned_size"], 2);
    }

    #[test]
    fn infer_flag_skips_the_final_query() {
        let config = LearnerConfig { infer_counterexample_label: true, ..LearnerConfig::default() };
        let out = learn(example_teacher(), config).unwrap();
        assert_eq!(out.hypothesis.num_states(), 2);
    }
}
