//! Turning an incompatible basis pair into an apart one.
//!
//! When `q = p·u` lies below `p`, identifying the two closes a cycle. Nodes
//! `c = |u|` apart along the path `p·u·u·…` (the spine) fall into the same
//! state, so some pair of spine nodes a multiple of `c` apart is apart by a
//! witness `w`. Replaying `w` from the spine nodes in between yields, once
//! answered, two consecutive ones that are apart, and the shared prefix turns
//! that into a witness for `p ⋕ q`.
//!
//! Incompatible nodes in disjoint subtrees are always apart already: the fold
//! only ever pairs `p·v` with `q·v`.

use super::{Learner, LearnerError};
use crate::automata::Word;
use crate::observation_tree::NodeId;
use crate::teacher::Teacher;

/// Spine pair `(t, t + k·c)` with the witness separating its ends.
struct Chain {
    start: usize,
    steps: usize,
    witness: Word,
}

impl<T: Teacher> Learner<T> {
    /// Tries to make basis nodes `p` and `q` apart with membership queries.
    /// Returns a witness for `p ⋕ q`, or `None` when the pair is compatible
    /// or don't-care answers left it undecided.
    pub fn establish_apartness(&mut self, p: NodeId, q: NodeId) -> Result<Option<Word>, LearnerError> {
        if let Some(w) = self.cache.witness(&self.tree, p, q) {
            return Ok(Some(w.clone()));
        }
        if !self.cache.is_incompatible(&self.tree, p, q) {
            return Ok(None);
        }
        let (top, bottom) = if self.tree.is_ancestor(p, q) {
            (p, q)
        } else if self.tree.is_ancestor(q, p) {
            (q, p)
        } else {
            return Ok(None);
        };
        let top_access = self.tree.access(top);
        let cycle = self.tree.access(bottom)[top_access.len()..].to_vec();
        let spine = self.spine(top, &cycle);
        let period = cycle.len();
        let mut chains = Vec::new();
        for steps in 2.. {
            if steps * period >= spine.len() {
                break;
            }
            for start in 0..spine.len() - steps * period {
                if let Some(w) = self.tree.apart(spine[start], spine[start + steps * period]) {
                    chains.push(Chain { start, steps, witness: w });
                }
            }
        }
        for chain in chains {
            let positions: Vec<usize> = (0..=chain.steps).map(|j| chain.start + j * period).collect();
            self.replay_chain(&spine, &positions, &chain.witness)?;
            if let Some(w) = self.cache.witness(&self.tree, p, q) {
                return Ok(Some(w.clone()));
            }
        }
        Ok(None)
    }

    /// Nodes `top·x` for growing prefixes `x` of `cycle·cycle·…`, while present.
    fn spine(&self, top: NodeId, cycle: &[usize]) -> Vec<NodeId> {
        let mut nodes = vec![top];
        let mut cur = top;
        for &a in cycle.iter().cycle() {
            match self.tree.child(cur, a) {
                Some(c) => {
                    nodes.push(c);
                    cur = c;
                }
                None => break,
            }
        }
        nodes
    }

    /// Queries `access(r)·w` for the inner chain nodes until two neighbours
    /// are apart. Bisects when configured, falling back to a scan after a
    /// don't-care answer.
    fn replay_chain(&mut self, spine: &[NodeId], positions: &[usize], w: &Word) -> Result<(), LearnerError> {
        let label_of = |this: &Self, i: usize| {
            this.tree.walk(spine[positions[i]], w).and_then(|x| this.tree.label(x))
        };
        let mut lo = 0;
        let mut hi = positions.len() - 1;
        if self.config.binary_search {
            while hi - lo > 1 {
                let mid = (lo + hi) / 2;
                self.replay(spine[positions[mid]], w)?;
                match label_of(self, mid) {
                    Some(l) if Some(l) == label_of(self, lo) => lo = mid,
                    Some(_) => hi = mid,
                    None => break,
                }
            }
            if hi - lo == 1 {
                return Ok(());
            }
        }
        for i in lo + 1..hi {
            self.replay(spine[positions[i]], w)?;
            let (prev, here) = (label_of(self, i - 1), label_of(self, i));
            if matches!((prev, here), (Some(a), Some(b)) if a != b) {
                return Ok(());
            }
        }
        Ok(())
    }

    fn replay(&mut self, node: NodeId, w: &Word) -> Result<(), LearnerError> {
        let word = [self.tree.access(node), w.clone()].concat();
        if !self.queried(&word) {
            self.query(&word)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::automata::{CompleteDfa, Symbol};
    use crate::learner::{LearnerConfig, Step};
    use crate::observation_tree::{Answer, Relation};
    use crate::teacher::{QueryCounters, Teacher, TeacherError, Validity};
    use std::collections::HashMap;

    /// Scripted teacher: fixed answers, don't-care elsewhere, logs queries.
    struct Scripted {
        k: usize,
        answers: HashMap<Word, Answer>,
        log: Vec<Word>,
        counters: QueryCounters,
    }

    impl Teacher for Scripted {
        fn num_symbols(&self) -> usize {
            self.k
        }
        fn membership(&mut self, word: &[Symbol]) -> Answer {
            self.log.push(word.to_vec());
            self.counters.membership += 1;
            self.classify(word)
        }
        fn validity(&mut self, _: &CompleteDfa) -> Result<Validity, TeacherError> {
            Ok(Validity::Accepted)
        }
        fn classify(&self, word: &[Symbol]) -> Answer {
            self.answers.get(word).copied().unwrap_or(Answer::DontCare)
        }
        fn counters(&self) -> QueryCounters {
            self.counters
        }
    }

    fn word(s: &str, alphabet: &str) -> Word {
        s.chars().map(|c| alphabet.find(c).unwrap()).collect()
    }

    fn learner_with(k: usize, observations: &[(&str, Answer)], alphabet: &str, answers: &[(&str, Answer)]) -> Learner<Scripted> {
        let teacher = Scripted {
            k,
            answers: answers.iter().map(|(s, a)| (word(s, alphabet), *a)).collect(),
            log: Vec::new(),
            counters: QueryCounters::default(),
        };
        let mut l = Learner::new(teacher, LearnerConfig::incompatibility());
        for (s, a) in observations {
            l.tree.add_observation(&word(s, alphabet), *a).unwrap();
        }
        l
    }

    fn incompatible_fixture(answer_ba: Answer) -> Learner<Scripted> {
        use Answer::*;
        learner_with(2, &[("", Accept), ("a", Reject), ("bb", Accept), ("bba", Accept)], "ab", &[("ba", answer_ba)])
    }

    #[test]
    fn definite_answer_to_ba_separates_the_incompatible_pair() {
        for (answer, witness) in [(Answer::Accept, "a"), (Answer::Reject, "ba")] {
            let mut l = incompatible_fixture(answer);
            let q = l.tree.get(&word("b", "ab")).unwrap();
            assert!(!l.cache.is_apart(&l.tree, 0, q));
            assert!(l.cache.is_incompatible(&l.tree, 0, q));
            let got = l.establish_apartness(0, q).unwrap();
            assert_eq!(l.teacher.log, vec![word("ba", "ab")]);
            assert_eq!(got, Some(word(witness, "ab")));
        }
    }

    #[test]
    fn dont_care_leaves_the_pair_unresolved() {
        let mut l = incompatible_fixture(Answer::DontCare);
        let q = l.tree.get(&word("b", "ab")).unwrap();
        assert_eq!(l.establish_apartness(0, q).unwrap(), None);
        assert!(l.cache.is_incompatible(&l.tree, 0, q));
    }

    #[test]
    fn apart_pair_needs_no_queries() {
        let mut l = incompatible_fixture(Answer::Accept);
        let a = l.tree.get(&word("a", "ab")).unwrap();
        assert_eq!(l.establish_apartness(0, a).unwrap(), Some(vec![]));
        assert!(l.teacher.log.is_empty());
    }

    fn wool(answers: &[(&str, Answer)], binary: bool) -> (Learner<Scripted>, NodeId) {
        use Answer::*;
        let obs = [
            ("", Accept),
            ("a", Reject),
            ("ab", DontCare),
            ("aba", DontCare),
            ("abab", DontCare),
            ("ababa", DontCare),
            ("ababab", DontCare),
            ("ad", Reject),
            ("ababad", Accept),
            ("abababe", Reject),
            ("abababeb", Reject),
            ("e", Reject),
            ("eb", Accept),
        ];
        // symbols: a=0 b=1 d=2 e=3; node names follow the construction order
        let mut l = learner_with(4, &obs, "abde", answers);
        l.config.binary_search = binary;
        let t2 = l.tree.get(&word("ab", "abde")).unwrap();
        (l, t2)
    }

    #[test]
    fn wool_fixture_is_incompatible_but_not_apart() {
        let (mut l, t2) = wool(&[], false);
        assert!(!l.cache.is_apart(&l.tree, 0, t2));
        assert!(l.cache.is_incompatible(&l.tree, 0, t2));
    }

    #[test]
    fn wool_strategy_asks_abad_first() {
        use Answer::*;
        let (mut l, t2) = wool(&[("abad", Accept)], false);
        let got = l.establish_apartness(0, t2).unwrap();
        assert_eq!(l.teacher.log, vec![word("abad", "abde")]);
        assert!(got.is_some());
        let (mut l, t2) = wool(&[("abad", Reject)], false);
        assert!(l.establish_apartness(0, t2).unwrap().is_some());
    }

    #[test]
    fn wool_strategy_falls_back_to_eb() {
        use Answer::*;
        let allowed = ["abad", "abeb", "ababeb"].map(|s| word(s, "abde"));
        for (abeb, ababeb) in [(Accept, Accept), (Reject, Reject), (Accept, Reject), (Reject, Accept)] {
            for binary in [false, true] {
                let (mut l, t2) = wool(&[("abeb", abeb), ("ababeb", ababeb)], binary);
                let got = l.establish_apartness(0, t2).unwrap();
                assert!(got.is_some(), "{abeb:?} {ababeb:?}");
                assert_eq!(l.teacher.log[0], allowed[0]);
                assert!(l.teacher.log.iter().all(|w| allowed.contains(w)));
            }
        }
    }

    #[test]
    fn learner_in_incompatibility_mode_records_established_pairs() {
        let mut l = incompatible_fixture(Answer::Reject);
        let q = l.tree.get(&word("b", "ab")).unwrap();
        l.basis = crate::observation_tree::Basis::from_members(vec![0, q]);
        l.n = 2;
        assert!(l.rule_establish().unwrap());
        assert!(matches!(l.trace.last(), Some(Step::Establish(_))));
        assert_eq!(l.config.relation, Relation::Incompatibility);
    }
}
