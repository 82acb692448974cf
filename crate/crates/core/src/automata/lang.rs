//! Language operations on complete DFAs.

use std::collections::{HashMap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{AutomataError, CompleteDfa, StateId, Symbol, Word};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProductMode {
    /// `L(d1) ∩ L(d2)`
    BothAccept,
    /// `L(d1) \ L(d2)`
    FirstAcceptsSecondRejects,
}

/// Product automaton over the reachable state pairs.
pub fn product(d1: &CompleteDfa, d2: &CompleteDfa, mode: ProductMode) -> Result<CompleteDfa, AutomataError> {
    if d1.num_symbols() != d2.num_symbols() {
        return Err(AutomataError::AlphabetMismatch(d1.num_symbols(), d2.num_symbols()));
    }
    let k = d1.num_symbols();
    let mut index: HashMap<(StateId, StateId), StateId> = HashMap::new();
    let mut pairs = vec![(d1.initial(), d2.initial())];
    index.insert(pairs[0], 0);
    let mut table = Vec::new();
    let mut i = 0;
    while i < pairs.len() {
        let (p, q) = pairs[i];
        i += 1;
        for a in 0..k {
            let next = (d1.step(p, a), d2.step(q, a));
            let id = *index.entry(next).or_insert_with(|| {
                pairs.push(next);
                pairs.len() - 1
            });
            table.push(id);
        }
    }
    let accepting = pairs
        .iter()
        .map(|&(p, q)| match mode {
            ProductMode::BothAccept => d1.is_accepting(p) && d2.is_accepting(q),
            ProductMode::FirstAcceptsSecondRejects => d1.is_accepting(p) && !d2.is_accepting(q),
        })
        .collect();
    CompleteDfa::new(k, 0, accepting, table)
}

/// Shortest accepted word, lexicographically least among the shortest.
pub fn shortest_word(d: &CompleteDfa) -> Option<Word> {
    // BFS visiting symbols in increasing order discovers every state along
    // its length-lexicographically least access word.
    let n = d.num_states();
    let mut parent: Vec<Option<(StateId, Symbol)>> = vec![None; n];
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([d.initial()]);
    seen[d.initial()] = true;
    while let Some(q) = queue.pop_front() {
        if d.is_accepting(q) {
            let mut word = Vec::new();
            let mut cur = q;
            while let Some((prev, a)) = parent[cur] {
                word.push(a);
                cur = prev;
            }
            word.reverse();
            return Some(word);
        }
        for a in 0..d.num_symbols() {
            let t = d.step(q, a);
            if !seen[t] {
                seen[t] = true;
                parent[t] = Some((q, a));
                queue.push_back(t);
            }
        }
    }
    None
}

/// Minimal equivalent DFA (reachable part, Moore partition refinement).
/// States of the result are numbered in BFS order from the initial state.
pub fn minimize(d: &CompleteDfa) -> CompleteDfa {
    let reach = d.reachable_states();
    let k = d.num_symbols();
    let mut class: HashMap<StateId, usize> =
        reach.iter().map(|&q| (q, usize::from(d.is_accepting(q)))).collect();
    let mut num_classes = class.values().copied().max().map_or(0, |m| m + 1);
    loop {
        let mut signatures: HashMap<Vec<usize>, usize> = HashMap::new();
        let mut next = HashMap::new();
        for &q in &reach {
            let mut sig = Vec::with_capacity(k + 1);
            sig.push(class[&q]);
            sig.extend((0..k).map(|a| class[&d.step(q, a)]));
            let len = signatures.len();
            let id = *signatures.entry(sig).or_insert(len);
            next.insert(q, id);
        }
        let refined = signatures.len();
        class = next;
        if refined == num_classes {
            break;
        }
        num_classes = refined;
    }
    // renumber classes in BFS order
    let mut order: HashMap<usize, StateId> = HashMap::new();
    let mut reps = Vec::new();
    for &q in &reach {
        let c = class[&q];
        if let std::collections::hash_map::Entry::Vacant(e) = order.entry(c) {
            e.insert(reps.len());
            reps.push(q);
        }
    }
    let accepting = reps.iter().map(|&q| d.is_accepting(q)).collect();
    let table = reps
        .iter()
        .flat_map(|&q| (0..k).map(move |a| (q, a)))
        .map(|(q, a)| order[&class[&d.step(q, a)]])
        .collect();
    CompleteDfa::new(k, 0, accepting, table).expect("well-formed quotient")
}

/// Random complete DFA with exactly `num_states` states, all reachable, that
/// is already minimal. Transition targets and labels are uniform; candidates
/// failing reachability or minimality are redrawn.
pub fn random_dfa(num_states: usize, num_symbols: usize, seed: u64) -> Result<CompleteDfa, AutomataError> {
    if num_states == 0 {
        return Err(AutomataError::NoStates);
    }
    if num_symbols == 0 {
        return Err(AutomataError::EmptyAlphabet);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let table = (0..num_states * num_symbols).map(|_| rng.gen_range(0..num_states)).collect();
        let accepting = (0..num_states).map(|_| rng.gen_bool(0.5)).collect();
        let d = CompleteDfa::new(num_symbols, 0, accepting, table)?;
        if d.reachable_states().len() == num_states && minimize(&d).num_states() == num_states {
            return Ok(d);
        }
    }
}
