//! Hypothesis synthesis: find a complete DFA with at most `n` states that the
//! observation tree maps into.
//!
//! Hypothesis states carry indices `1..=n` in the constraint system; in the
//! returned [`HypothesisModel`] they are the 0-based states of a
//! [`CompleteDfa`], so index `i` becomes state `i - 1`.

mod internal;
pub mod smtlib;

use std::collections::VecDeque;
use std::path::PathBuf;
use std::time::Instant;

use thiserror::Error;

use crate::automata::{check_morphism, CompleteDfa, Label, StateMap};
use crate::observation_tree::{Basis, NodeId, ObservationTree, Relation, RelationCache};

pub use smtlib::{encode_smtlib, ExternalSolver, SOLVER_ENV};

/// Default cap on search-node expansions for the internal solver.
pub const DEFAULT_MAX_EXPANSIONS: u64 = 10_000_000;

#[derive(Debug, Error)]
pub enum SynthesisError {
    #[error("state budget n = {n} is smaller than the basis size {basis}")]
    BudgetBelowBasis { n: usize, basis: usize },
    #[error("basis node {0} is not in the tree or listed twice")]
    BadBasis(NodeId),
    #[error("synthesis budget exhausted")]
    Budget,
    #[error("solver backend failed: {0}")]
    Backend(String),
    #[error("solver returned a model that fails verification")]
    InvalidModel,
}

/// One synthesis instance. Tree nodes get indices `1..=m`: basis members
/// first (their fixed indices), then all other nodes breadth-first.
#[derive(Debug, Clone)]
pub struct SynthesisProblem<'a> {
    tree: &'a ObservationTree,
    basis: &'a Basis,
    n: usize,
    redundant_clauses: bool,
    order: Vec<NodeId>,
    index: Vec<usize>,
    // basis positions (0-based) of C(q) for every non-basis node
    candidates: Vec<Vec<usize>>,
    live: Vec<bool>,
}

impl<'a> SynthesisProblem<'a> {
    pub fn new(
        tree: &'a ObservationTree,
        basis: &'a Basis,
        n: usize,
        relation: Relation,
        cache: &mut RelationCache,
    ) -> Result<Self, SynthesisError> {
        if n < basis.len().max(1) {
            return Err(SynthesisError::BudgetBelowBasis { n, basis: basis.len() });
        }
        let m = tree.len();
        let mut index = vec![0; m];
        let mut order = Vec::with_capacity(m);
        for &b in basis.members() {
            if b >= m || index[b] != 0 {
                return Err(SynthesisError::BadBasis(b));
            }
            order.push(b);
            index[b] = order.len();
        }
        for q in tree.breadth_first() {
            if index[q] == 0 {
                order.push(q);
                index[q] = order.len();
            }
        }
        // a node is live if its subtree holds a label or a basis node
        let mut live: Vec<bool> = (0..m).map(|q| tree.stamp(q) > 0).collect();
        for &b in basis.members() {
            let mut cur = Some(b);
            while let Some(x) = cur {
                live[x] = true;
                cur = tree.parent(x);
            }
        }
        let all: Vec<usize> = (0..basis.len()).collect();
        let candidates = (0..m)
            .map(|q| {
                if index[q] <= basis.len() {
                    Vec::new()
                } else if !live[q] {
                    // nothing in an unlabeled subtree can separate it from a basis node
                    all.clone()
                } else {
                    (0..basis.len())
                        .filter(|&i| !cache.distinguished(tree, relation, basis.members()[i], q))
                        .collect()
                }
            })
            .collect();
        Ok(SynthesisProblem { tree, basis, n, redundant_clauses: true, order, index, candidates, live })
    }

    /// Enables or disables basis fixing, the candidate-domain clauses and
    /// the matching pruning in the internal search.
    pub fn with_redundant_clauses(mut self, on: bool) -> Self {
        self.redundant_clauses = on;
        self
    }

    pub fn tree(&self) -> &ObservationTree {
        self.tree
    }

    pub fn basis(&self) -> &Basis {
        self.basis
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn redundant_clauses(&self) -> bool {
        self.redundant_clauses
    }

    /// Index `I_q` in `1..=m`.
    pub fn node_index(&self, q: NodeId) -> usize {
        self.index[q]
    }

    /// Nodes by index: `nodes_by_index()[i - 1]` has index `i`.
    pub fn nodes_by_index(&self) -> &[NodeId] {
        &self.order
    }

    /// Fixed indices `I_p` of the basis nodes in `C(q)`; empty for basis nodes.
    pub fn candidate_indices(&self, q: NodeId) -> impl Iterator<Item = usize> + '_ {
        self.candidates[q].iter().map(|&i| i + 1)
    }

    pub(crate) fn candidate_positions(&self, q: NodeId) -> &[usize] {
        &self.candidates[q]
    }

    pub(crate) fn is_live(&self, q: NodeId) -> bool {
        self.live[q]
    }

    /// Basis position (0-based) of `q`, if it is a basis node.
    pub(crate) fn basis_position(&self, q: NodeId) -> Option<usize> {
        (self.index[q] <= self.basis.len()).then(|| self.index[q] - 1)
    }
}

/// A hypothesis together with the morphism from the tree into it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HypothesisModel {
    pub hypothesis: CompleteDfa,
    /// Tree node id to hypothesis state.
    pub morphism: StateMap,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SynthesisOutcome {
    Sat(HypothesisModel),
    Unsat,
}

impl SynthesisOutcome {
    pub fn is_sat(&self) -> bool {
        matches!(self, SynthesisOutcome::Sat(_))
    }

    pub fn model(&self) -> Option<&HypothesisModel> {
        match self {
            SynthesisOutcome::Sat(m) => Some(m),
            SynthesisOutcome::Unsat => None,
        }
    }
}

/// Checks a model: at most `n` states, a valid morphism from the tree, and
/// basis member `i` (1-based) mapped to hypothesis index `i`.
pub fn verify_model(problem: &SynthesisProblem<'_>, model: &HypothesisModel) -> bool {
    let tree = problem.tree();
    if model.hypothesis.num_states() > problem.n() || model.morphism.len() != tree.len() {
        return false;
    }
    if model.hypothesis.num_symbols() != tree.num_symbols() {
        return false;
    }
    let basis_fixed = problem.basis().members().iter().enumerate().all(|(i, &b)| model.morphism.get(b) == i);
    basis_fixed
        && check_morphism(&tree.to_three_nfa(), &model.hypothesis.to_three_nfa(), &model.morphism).unwrap_or(false)
}

/// Raw assignment over hypothesis states `0..n`, possibly partial.
#[derive(Debug, Clone)]
pub(crate) struct RawModel {
    pub delta: Vec<Option<usize>>,
    pub labels: Vec<Option<Label>>,
    pub f: Vec<Option<usize>>,
}

impl RawModel {
    /// Completes undecided cells (self-loops, reject), extends `f` to every
    /// node along `delta`, then renumbers: basis images first in basis order,
    /// remaining reachable states breadth-first. Unreachable states are dropped.
    pub fn finish(mut self, problem: &SynthesisProblem<'_>) -> Result<HypothesisModel, SynthesisError> {
        let tree = problem.tree();
        let k = tree.num_symbols();
        let n = self.labels.len();
        for s in 0..n {
            for a in 0..k {
                self.delta[s * k + a].get_or_insert(s);
            }
        }
        let delta: Vec<usize> = self.delta.iter().map(|c| c.expect("completed")).collect();
        let mut f = vec![0; tree.len()];
        for q in tree.breadth_first() {
            f[q] = match (self.f[q], tree.parent(q)) {
                (Some(s), _) => s,
                (None, Some(p)) => delta[f[p] * k + tree.incoming_symbol(q).expect("non-root")],
                (None, None) => return Err(SynthesisError::InvalidModel),
            };
        }
        let mut rename: Vec<Option<usize>> = vec![None; n];
        let mut states = Vec::new();
        for &b in problem.basis().members() {
            let s = f[b];
            if rename[s].is_some() {
                return Err(SynthesisError::InvalidModel);
            }
            rename[s] = Some(states.len());
            states.push(s);
        }
        let mut queue: VecDeque<usize> = VecDeque::from([f[tree.root()]]);
        if rename[f[tree.root()]].is_none() {
            rename[f[tree.root()]] = Some(states.len());
            states.push(f[tree.root()]);
        }
        let mut seen = vec![false; n];
        while let Some(s) = queue.pop_front() {
            if std::mem::replace(&mut seen[s], true) {
                continue;
            }
            for a in 0..k {
                let t = delta[s * k + a];
                if rename[t].is_none() {
                    rename[t] = Some(states.len());
                    states.push(t);
                }
                queue.push_back(t);
            }
        }
        let table = states
            .iter()
            .flat_map(|&s| (0..k).map(move |a| (s, a)))
            .map(|(s, a)| rename[delta[s * k + a]].expect("reachable"))
            .collect();
        let accepting = states.iter().map(|&s| self.labels[s] == Some(Label::Accept)).collect();
        let initial = rename[f[tree.root()]].expect("root image");
        let hypothesis = CompleteDfa::new(k, initial, accepting, table).map_err(|_| SynthesisError::InvalidModel)?;
        let morphism = StateMap::new(f.iter().map(|&s| rename[s].expect("image reachable")).collect());
        Ok(HypothesisModel { hypothesis, morphism })
    }
}

/// Which decision procedure answers synthesis problems.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum Backend {
    #[default]
    Internal,
    External(ExternalSolver),
}

impl Backend {
    pub fn name(&self) -> &'static str {
        match self {
            Backend::Internal => "internal",
            Backend::External(_) => "smt",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveLimits {
    pub max_expansions: u64,
    pub deadline: Option<Instant>,
}

impl Default for SolveLimits {
    fn default() -> Self {
        SolveLimits { max_expansions: DEFAULT_MAX_EXPANSIONS, deadline: None }
    }
}

/// Internal backtracking search. Sat models are verified before returning.
pub fn solve_internal(problem: &SynthesisProblem<'_>, limits: &SolveLimits) -> Result<SynthesisOutcome, SynthesisError> {
    match internal::search(problem, limits)? {
        Some(raw) => checked(problem, raw),
        None => Ok(SynthesisOutcome::Unsat),
    }
}

/// Solves with the chosen backend. Sat models are verified before returning.
pub fn solve(problem: &SynthesisProblem<'_>, backend: &Backend, limits: &SolveLimits) -> Result<SynthesisOutcome, SynthesisError> {
    match backend {
        Backend::Internal => solve_internal(problem, limits),
        Backend::External(solver) => match solver.run(problem, limits.deadline)? {
            Some(raw) => checked(problem, raw),
            None => Ok(SynthesisOutcome::Unsat),
        },
    }
}

fn checked(problem: &SynthesisProblem<'_>, raw: RawModel) -> Result<SynthesisOutcome, SynthesisError> {
    let model = raw.finish(problem)?;
    if verify_model(problem, &model) {
        Ok(SynthesisOutcome::Sat(model))
    } else {
        Err(SynthesisError::InvalidModel)
    }
}

/// Solver path from the environment, if set.
pub fn solver_from_env() -> Option<ExternalSolver> {
    std::env::var_os(SOLVER_ENV).map(|p| ExternalSolver::new(PathBuf::from(p)))
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::automata::{product, shortest_word, ProductMode};
    use crate::observation_tree::tests::w;
    use crate::observation_tree::Answer;

    /// Tree of the example run before the first counterexample:
    /// ε:+ a:- b:- aa:+ ab:□, basis {ε, a}.
    pub(crate) fn example_run_tree() -> (ObservationTree, Basis) {
        let mut t = ObservationTree::new(2);
        for (s, ans) in [("", Answer::Accept), ("a", Answer::Reject), ("b", Answer::Reject), ("aa", Answer::Accept), ("ab", Answer::DontCare)] {
            t.add_observation(&w(s), ans).unwrap();
        }
        let basis = Basis::from_members(vec![0, t.get(&w("a")).unwrap()]);
        (t, basis)
    }

    fn solve_at(t: &ObservationTree, b: &Basis, n: usize, redundant: bool) -> SynthesisOutcome {
        let p = SynthesisProblem::new(t, b, n, Relation::Apartness, &mut RelationCache::new())
            .unwrap()
            .with_redundant_clauses(redundant);
        solve_internal(&p, &SolveLimits::default()).unwrap()
    }

    #[test]
    fn conflicting_root_and_child_are_unsat_at_one_state() {
        let (t, _) = example_run_tree();
        let b = Basis::new(&t);
        for redundant in [true, false] {
            assert_eq!(solve_at(&t, &b, 1, redundant), SynthesisOutcome::Unsat);
        }
        let text = encode_smtlib(&SynthesisProblem::new(&t, &b, 1, Relation::Apartness, &mut RelationCache::new()).unwrap());
        assert!(text.contains("(assert (= (out (f 1)) 1))"));
        assert!(text.contains("(assert (= (out (f 2)) 0))"));
    }

    #[test]
    fn example_run_is_sat_at_two_states() {
        let (t, b) = example_run_tree();
        for redundant in [true, false] {
            let out = solve_at(&t, &b, 2, redundant);
            let m = out.model().unwrap();
            assert_eq!(m.hypothesis.num_states(), 2);
            assert_eq!(m.morphism.get(0), 0);
            assert_eq!(m.morphism.get(t.get(&w("a")).unwrap()), 1);
        }
    }

    #[test]
    fn after_bb_the_model_is_the_parity_automaton() {
        let (mut t, b) = example_run_tree();
        t.add_observation(&w("bb"), Answer::Accept).unwrap();
        let model = solve_at(&t, &b, 2, true).model().cloned().unwrap();
        let parity = CompleteDfa::new(2, 0, vec![true, false], vec![1, 1, 0, 0]).unwrap();
        let mode = ProductMode::FirstAcceptsSecondRejects;
        assert_eq!(shortest_word(&product(&model.hypothesis, &parity, mode).unwrap()), None);
        assert_eq!(shortest_word(&product(&parity, &model.hypothesis, mode).unwrap()), None);
    }

    #[test]
    fn remapped_basis_node_fails_verification() {
        let (t, b) = example_run_tree();
        let p = SynthesisProblem::new(&t, &b, 2, Relation::Apartness, &mut RelationCache::new()).unwrap();
        let mut model = solve_internal(&p, &SolveLimits::default()).unwrap().model().cloned().unwrap();
        assert!(verify_model(&p, &model));
        let mut f = model.morphism.as_slice().to_vec();
        f[b.members()[1]] = 0;
        model.morphism = StateMap::new(f);
        assert!(!verify_model(&p, &model));
    }

    #[test]
    fn dangling_transition_cannot_form_a_hypothesis() {
        assert!(CompleteDfa::new(2, 0, vec![true, false], vec![1, 1, 0]).is_err());
    }

    #[test]
    fn budget_is_reported_separately() {
        let (t, b) = example_run_tree();
        let p = SynthesisProblem::new(&t, &b, 2, Relation::Apartness, &mut RelationCache::new()).unwrap();
        let limits = SolveLimits { max_expansions: 0, deadline: None };
        assert!(matches!(solve_internal(&p, &limits), Err(SynthesisError::Budget)));
    }

    #[test]
    fn problem_rejects_budget_below_basis() {
        let (t, b) = example_run_tree();
        assert!(matches!(
            SynthesisProblem::new(&t, &b, 1, Relation::Apartness, &mut RelationCache::new()),
            Err(SynthesisError::BudgetBelowBasis { n: 1, basis: 2 })
        ));
    }
}
