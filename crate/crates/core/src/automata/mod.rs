//! Three-valued automata.
//!
//! A [`ThreeNfa`] is a nondeterministic automaton whose states are accepting,
//! rejecting, or of unknown status. Deterministic automata, complete DFAs and
//! prefix trees are all special cases; [`CompleteDfa`] is the dense
//! table-backed form used wherever a total classification of words is needed.
//!
//! States and symbols are dense indices starting at zero, and every iteration
//! over states, symbols or transitions follows index order.

pub(crate) mod lang;
pub(crate) mod ops;
pub mod text;

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

pub use lang::{minimize, product, random_dfa, shortest_word, ProductMode};
pub use ops::{
    check_morphism, compatible, merge, strongly_determinizable, strongly_determinizable_seeded,
};

/// Index of an input symbol in the alphabet.
pub type Symbol = usize;
/// Index of an automaton state.
pub type StateId = usize;
/// A finite sequence of symbols.
pub type Word = Vec<Symbol>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AutomataError {
    #[error("alphabet must contain at least one symbol")]
    EmptyAlphabet,
    #[error("duplicate symbol name `{0}`")]
    DuplicateSymbol(String),
    #[error("symbol {symbol} is outside an alphabet of size {size}")]
    UnknownSymbol { symbol: Symbol, size: usize },
    #[error("unknown symbol name `{0}`")]
    UnknownSymbolName(String),
    #[error("state {state} is outside an automaton with {num_states} states")]
    UnknownState { state: StateId, num_states: usize },
    #[error("automata have different alphabet sizes ({0} vs {1})")]
    AlphabetMismatch(usize, usize),
    #[error("state map has {got} entries but the source automaton has {expected} states")]
    MapNotTotal { expected: usize, got: usize },
    #[error("automaton is not a complete DFA: {0}")]
    NotCompleteDfa(String),
    #[error("cannot merge state {0} with itself")]
    SelfMerge(StateId),
    #[error("cannot merge conflicting states {0} and {1}")]
    ConflictingMerge(StateId, StateId),
    #[error("automaton needs at least one state")]
    NoStates,
}

/// Ordered, duplicate-free set of symbol names. Symbol `i` is the `i`-th name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alphabet {
    names: Vec<String>,
}

impl Alphabet {
    pub fn new<I, S>(names: I) -> Result<Self, AutomataError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.is_empty() {
            return Err(AutomataError::EmptyAlphabet);
        }
        let mut seen = BTreeSet::new();
        for name in &names {
            if !seen.insert(name.as_str()) {
                return Err(AutomataError::DuplicateSymbol(name.clone()));
            }
        }
        Ok(Alphabet { names })
    }

    /// Alphabet `{0, 1, ..., size-1}` named by the decimal index.
    pub fn indexed(size: usize) -> Result<Self, AutomataError> {
        Self::new((0..size).map(|i| i.to_string()))
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn name(&self, symbol: Symbol) -> Option<&str> {
        self.names.get(symbol).map(String::as_str)
    }

    pub fn index_of(&self, name: &str) -> Option<Symbol> {
        self.names.iter().position(|n| n == name)
    }

    /// Parses a word. Whitespace-separated tokens are looked up as names;
    /// a single token is split into characters when every name is one
    /// character long. The empty string (or `ε`) is the empty word.
    pub fn parse_word(&self, s: &str) -> Result<Word, AutomataError> {
        let s = s.trim();
        if s.is_empty() || s == "ε" {
            return Ok(Vec::new());
        }
        let single_chars = self.names.iter().all(|n| n.chars().count() == 1);
        let tokens: Vec<String> = if s.contains(char::is_whitespace) || !single_chars {
            s.split_whitespace().map(str::to_owned).collect()
        } else {
            s.chars().map(String::from).collect()
        };
        tokens
            .iter()
            .map(|t| self.index_of(t).ok_or_else(|| AutomataError::UnknownSymbolName(t.clone())))
            .collect()
    }

    pub fn format_word(&self, word: &[Symbol]) -> String {
        if word.is_empty() {
            return "ε".to_owned();
        }
        let single_chars = self.names.iter().all(|n| n.chars().count() == 1);
        let parts: Vec<&str> = word.iter().map(|&a| self.name(a).unwrap_or("?")).collect();
        if single_chars {
            parts.concat()
        } else {
            parts.join(" ")
        }
    }
}

/// Classification of a state: `+` or `-`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Label {
    Accept,
    Reject,
}

impl Label {
    pub fn from_accepting(accepting: bool) -> Self {
        if accepting {
            Label::Accept
        } else {
            Label::Reject
        }
    }

    pub fn is_accept(self) -> bool {
        self == Label::Accept
    }

    pub fn opposite(self) -> Self {
        match self {
            Label::Accept => Label::Reject,
            Label::Reject => Label::Accept,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Accept => "+",
            Label::Reject => "-",
        })
    }
}

/// Three-valued nondeterministic finite automaton.
///
/// `finals[q]` is `None` when the status of `q` is unknown.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ThreeNfa {
    num_symbols: usize,
    initial: StateId,
    finals: Vec<Option<Label>>,
    succ: Vec<Vec<BTreeSet<StateId>>>,
}

impl ThreeNfa {
    /// Automaton with `num_states` unlabeled states and no transitions.
    pub fn new(num_states: usize, num_symbols: usize, initial: StateId) -> Result<Self, AutomataError> {
        if num_symbols == 0 {
            return Err(AutomataError::EmptyAlphabet);
        }
        if num_states == 0 {
            return Err(AutomataError::NoStates);
        }
        if initial >= num_states {
            return Err(AutomataError::UnknownState { state: initial, num_states });
        }
        Ok(ThreeNfa {
            num_symbols,
            initial,
            finals: vec![None; num_states],
            succ: vec![vec![BTreeSet::new(); num_symbols]; num_states],
        })
    }

    pub fn num_states(&self) -> usize {
        self.finals.len()
    }

    pub fn num_symbols(&self) -> usize {
        self.num_symbols
    }

    pub fn initial(&self) -> StateId {
        self.initial
    }

    pub fn label(&self, q: StateId) -> Option<Label> {
        self.finals[q]
    }

    pub fn set_label(&mut self, q: StateId, label: Option<Label>) -> Result<(), AutomataError> {
        self.check_state(q)?;
        self.finals[q] = label;
        Ok(())
    }

    pub fn add_transition(&mut self, src: StateId, symbol: Symbol, dst: StateId) -> Result<(), AutomataError> {
        self.check_state(src)?;
        self.check_state(dst)?;
        self.check_symbol(symbol)?;
        self.succ[src][symbol].insert(dst);
        Ok(())
    }

    /// Successors of `q` on `symbol`, in increasing order.
    pub fn successors(&self, q: StateId, symbol: Symbol) -> impl Iterator<Item = StateId> + '_ {
        self.succ[q][symbol].iter().copied()
    }

    pub(crate) fn successor_set(&self, q: StateId, symbol: Symbol) -> &BTreeSet<StateId> {
        &self.succ[q][symbol]
    }

    /// All transitions `(src, symbol, dst)` in lexicographic order.
    pub fn transitions(&self) -> impl Iterator<Item = (StateId, Symbol, StateId)> + '_ {
        self.succ.iter().enumerate().flat_map(|(q, row)| {
            row.iter()
                .enumerate()
                .flat_map(move |(a, targets)| targets.iter().map(move |&t| (q, a, t)))
        })
    }

    pub fn is_deterministic(&self) -> bool {
        self.succ.iter().all(|row| row.iter().all(|t| t.len() <= 1))
    }

    /// `F` is total and every state has an outgoing transition on every symbol.
    pub fn is_complete(&self) -> bool {
        self.finals.iter().all(Option::is_some)
            && self.succ.iter().all(|row| row.iter().all(|t| !t.is_empty()))
    }

    /// Both states are labeled and their labels differ.
    pub fn conflicting(&self, p: StateId, q: StateId) -> bool {
        matches!((self.finals[p], self.finals[q]), (Some(x), Some(y)) if x != y)
    }

    /// The set of states reachable from `from` by reading `word`.
    pub fn run_word(&self, from: StateId, word: &[Symbol]) -> Result<BTreeSet<StateId>, AutomataError> {
        self.check_state(from)?;
        for &a in word {
            self.check_symbol(a)?;
        }
        let mut current = BTreeSet::from([from]);
        for &a in word {
            let next: BTreeSet<StateId> = current.iter().flat_map(|&q| self.succ[q][a].iter().copied()).collect();
            if next.is_empty() {
                return Ok(next);
            }
            current = next;
        }
        Ok(current)
    }

    pub(crate) fn check_state(&self, q: StateId) -> Result<(), AutomataError> {
        if q < self.num_states() {
            Ok(())
        } else {
            Err(AutomataError::UnknownState { state: q, num_states: self.num_states() })
        }
    }

    pub(crate) fn check_symbol(&self, a: Symbol) -> Result<(), AutomataError> {
        if a < self.num_symbols {
            Ok(())
        } else {
            Err(AutomataError::UnknownSymbol { symbol: a, size: self.num_symbols })
        }
    }
}

/// Total map from the states of one automaton to the states of another.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct StateMap(Vec<StateId>);

impl StateMap {
    pub fn new(mapping: Vec<StateId>) -> Self {
        StateMap(mapping)
    }

    pub fn identity(num_states: usize) -> Self {
        StateMap((0..num_states).collect())
    }

    pub fn get(&self, q: StateId) -> StateId {
        self.0[q]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[StateId] {
        &self.0
    }

    /// `other ∘ self`: first apply `self`, then `other`.
    pub fn then(&self, other: &StateMap) -> StateMap {
        StateMap(self.0.iter().map(|&q| other.get(q)).collect())
    }
}

/// Deterministic, complete automaton with a total accept/reject labeling.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CompleteDfa {
    num_symbols: usize,
    initial: StateId,
    accepting: Vec<bool>,
    // row-major: table[state * num_symbols + symbol]
    table: Vec<StateId>,
}

impl CompleteDfa {
    pub fn new(
        num_symbols: usize,
        initial: StateId,
        accepting: Vec<bool>,
        table: Vec<StateId>,
    ) -> Result<Self, AutomataError> {
        if num_symbols == 0 {
            return Err(AutomataError::EmptyAlphabet);
        }
        let n = accepting.len();
        if n == 0 {
            return Err(AutomataError::NoStates);
        }
        if initial >= n {
            return Err(AutomataError::UnknownState { state: initial, num_states: n });
        }
        if table.len() != n * num_symbols {
            return Err(AutomataError::NotCompleteDfa(format!(
                "transition table has {} cells, expected {}",
                table.len(),
                n * num_symbols
            )));
        }
        if let Some(&bad) = table.iter().find(|&&t| t >= n) {
            return Err(AutomataError::UnknownState { state: bad, num_states: n });
        }
        Ok(CompleteDfa { num_symbols, initial, accepting, table })
    }

    /// Converts a deterministic, complete 3NFA.
    pub fn from_three_nfa(a: &ThreeNfa) -> Result<Self, AutomataError> {
        if !a.is_deterministic() {
            return Err(AutomataError::NotCompleteDfa("nondeterministic".into()));
        }
        if !a.is_complete() {
            return Err(AutomataError::NotCompleteDfa("missing labels or transitions".into()));
        }
        let k = a.num_symbols();
        let mut table = Vec::with_capacity(a.num_states() * k);
        for q in 0..a.num_states() {
            for s in 0..k {
                table.push(*a.successor_set(q, s).first().expect("complete"));
            }
        }
        let accepting = (0..a.num_states()).map(|q| a.label(q) == Some(Label::Accept)).collect();
        CompleteDfa::new(k, a.initial(), accepting, table)
    }

    pub fn to_three_nfa(&self) -> ThreeNfa {
        let mut a = ThreeNfa::new(self.num_states(), self.num_symbols, self.initial).expect("valid dfa");
        for q in 0..self.num_states() {
            a.finals[q] = Some(Label::from_accepting(self.accepting[q]));
            for s in 0..self.num_symbols {
                a.succ[q][s].insert(self.step(q, s));
            }
        }
        a
    }

    pub fn num_states(&self) -> usize {
        self.accepting.len()
    }

    pub fn num_symbols(&self) -> usize {
        self.num_symbols
    }

    pub fn initial(&self) -> StateId {
        self.initial
    }

    pub fn is_accepting(&self, q: StateId) -> bool {
        self.accepting[q]
    }

    pub fn label(&self, q: StateId) -> Label {
        Label::from_accepting(self.accepting[q])
    }

    pub fn step(&self, q: StateId, symbol: Symbol) -> StateId {
        self.table[q * self.num_symbols + symbol]
    }

    pub fn run_from(&self, from: StateId, word: &[Symbol]) -> Result<StateId, AutomataError> {
        let mut q = from;
        for &a in word {
            if a >= self.num_symbols {
                return Err(AutomataError::UnknownSymbol { symbol: a, size: self.num_symbols });
            }
            q = self.step(q, a);
        }
        Ok(q)
    }

    pub fn run(&self, word: &[Symbol]) -> Result<StateId, AutomataError> {
        self.run_from(self.initial, word)
    }

    pub fn accepts(&self, word: &[Symbol]) -> Result<Label, AutomataError> {
        self.run(word).map(|q| self.label(q))
    }

    pub fn complement(&self) -> CompleteDfa {
        let mut c = self.clone();
        c.accepting.iter_mut().for_each(|b| *b = !*b);
        c
    }

    /// States reachable from the initial state, in BFS order.
    pub fn reachable_states(&self) -> Vec<StateId> {
        let mut seen = vec![false; self.num_states()];
        let mut order = vec![self.initial];
        seen[self.initial] = true;
        let mut i = 0;
        while i < order.len() {
            let q = order[i];
            i += 1;
            for a in 0..self.num_symbols {
                let t = self.step(q, a);
                if !seen[t] {
                    seen[t] = true;
                    order.push(t);
                }
            }
        }
        order
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    /// Even number of a's and even number of b's (a = 0, b = 1).
    pub(crate) fn even_even() -> CompleteDfa {
        // state = (a parity) + 2 * (b parity)
        let table = vec![1, 2, 0, 3, 3, 0, 2, 1];
        CompleteDfa::new(2, 0, vec![true, false, false, false], table).unwrap()
    }

    #[test]
    fn run_word_empty_word_is_reflexive() {
        let a = even_even().to_three_nfa();
        for q in 0..4 {
            assert_eq!(a.run_word(q, &[]).unwrap(), BTreeSet::from([q]));
        }
    }

    #[test]
    fn run_word_rejects_unknown_symbol() {
        let a = even_even().to_three_nfa();
        assert!(matches!(a.run_word(0, &[0, 5]), Err(AutomataError::UnknownSymbol { .. })));
    }

    #[test]
    fn accepts_even_even() {
        let d = even_even();
        assert_eq!(d.accepts(&[0, 1, 0, 1]).unwrap(), Label::Accept);
        assert_eq!(d.accepts(&[0]).unwrap(), Label::Reject);
        assert_eq!(d.accepts(&[]).unwrap(), Label::Accept);
        assert!(d.accepts(&[2]).is_err());
    }

    #[test]
    fn conflicting_needs_two_different_labels() {
        let mut a = ThreeNfa::new(3, 1, 0).unwrap();
        a.set_label(0, Some(Label::Accept)).unwrap();
        a.set_label(1, Some(Label::Reject)).unwrap();
        assert!(a.conflicting(0, 1));
        assert!(!a.conflicting(0, 0));
        assert!(!a.conflicting(0, 2));
    }

    #[test]
    fn complete_dfa_round_trips_through_three_nfa() {
        let d = even_even();
        let a = d.to_three_nfa();
        assert!(a.is_deterministic() && a.is_complete());
        assert_eq!(CompleteDfa::from_three_nfa(&a).unwrap(), d);
    }

    #[test]
    fn incomplete_automaton_is_not_a_complete_dfa() {
        let mut a = ThreeNfa::new(1, 2, 0).unwrap();
        a.set_label(0, Some(Label::Accept)).unwrap();
        a.add_transition(0, 0, 0).unwrap();
        assert!(CompleteDfa::from_three_nfa(&a).is_err());
    }

    #[test]
    fn alphabet_parses_and_formats() {
        let ab = Alphabet::new(["a", "b"]).unwrap();
        assert_eq!(ab.parse_word("abba").unwrap(), vec![0, 1, 1, 0]);
        assert_eq!(ab.parse_word("a b").unwrap(), vec![0, 1]);
        assert_eq!(ab.parse_word("").unwrap(), Vec::<Symbol>::new());
        assert_eq!(ab.format_word(&[1, 0]), "ba");
        assert!(ab.parse_word("abc").is_err());
        assert!(Alphabet::new(["a", "a"]).is_err());
        assert!(Alphabet::new(Vec::<String>::new()).is_err());
    }
}
