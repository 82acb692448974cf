//! Simulated teachers answering membership and validity queries.

mod samples;

use std::collections::{HashMap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::automata::{product, shortest_word, CompleteDfa, Label, ProductMode, Symbol, Word};
use crate::observation_tree::Answer;

pub use samples::{parse_samples, write_samples, SampleSet};

#[derive(Debug, Error)]
pub enum TeacherError {
    #[error("alphabet sizes differ: {expected} vs {got}")]
    AlphabetMismatch { expected: usize, got: usize },
    #[error("languages overlap, both contain {0:?}")]
    NotDisjoint(Word),
    #[error("word {0:?} is both a positive and a negative sample")]
    ConflictingSample(Word),
    #[error("sample file line {line}: {msg}")]
    SampleFormat { line: usize, msg: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Validity {
    Accepted,
    Counterexample(Word),
}

/// Query counts accumulated by one teacher.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryCounters {
    pub membership: u64,
    pub dontcare: u64,
    pub validity: u64,
    /// Sum of the lengths of all membership-query words.
    pub symbols: u64,
}

impl QueryCounters {
    fn record(&mut self, word: &[Symbol], answer: Answer) {
        self.membership += 1;
        self.symbols += word.len() as u64;
        if answer == Answer::DontCare {
            self.dontcare += 1;
        }
    }
}

pub trait Teacher {
    fn num_symbols(&self) -> usize;

    /// Counted membership query.
    fn membership(&mut self, word: &[Symbol]) -> Answer;

    /// Counted validity query.
    fn validity(&mut self, hypothesis: &CompleteDfa) -> Result<Validity, TeacherError>;

    /// Classification of `word` without touching any counter.
    fn classify(&self, word: &[Symbol]) -> Answer;

    fn counters(&self) -> QueryCounters;
}

fn check_alphabet(expected: usize, got: usize) -> Result<(), TeacherError> {
    if expected == got {
        Ok(())
    } else {
        Err(TeacherError::AlphabetMismatch { expected, got })
    }
}

/// `L(l1) ∩ L(l2) = ∅`.
pub fn check_disjoint(l1: &CompleteDfa, l2: &CompleteDfa) -> Result<bool, TeacherError> {
    Ok(shared_word(l1, l2)?.is_none())
}

fn shared_word(l1: &CompleteDfa, l2: &CompleteDfa) -> Result<Option<Word>, TeacherError> {
    check_alphabet(l1.num_symbols(), l2.num_symbols())?;
    let both = product(l1, l2, ProductMode::BothAccept).expect("alphabets checked");
    Ok(shortest_word(&both))
}

/// Teacher for two disjoint regular languages given as complete DFAs.
#[derive(Debug, Clone)]
pub struct ExactTeacher {
    l1: CompleteDfa,
    l2: CompleteDfa,
    counters: QueryCounters,
}

impl ExactTeacher {
    pub fn new(l1: CompleteDfa, l2: CompleteDfa) -> Result<Self, TeacherError> {
        if let Some(w) = shared_word(&l1, &l2)? {
            return Err(TeacherError::NotDisjoint(w));
        }
        Ok(ExactTeacher { l1, l2, counters: QueryCounters::default() })
    }

    pub fn l1(&self) -> &CompleteDfa {
        &self.l1
    }

    pub fn l2(&self) -> &CompleteDfa {
        &self.l2
    }
}

/// Shortest counterexample for `h` against `l1`/`l2`; on equal length the
/// word from `l1` that `h` rejects wins.
pub fn exact_counterexample(l1: &CompleteDfa, l2: &CompleteDfa, h: &CompleteDfa) -> Result<Option<Word>, TeacherError> {
    check_alphabet(l1.num_symbols(), h.num_symbols())?;
    let missed = shortest_word(&product(l1, h, ProductMode::FirstAcceptsSecondRejects).expect("alphabets checked"));
    let wrong = shortest_word(&product(l2, h, ProductMode::BothAccept).expect("alphabets checked"));
    Ok(match (missed, wrong) {
        (Some(a), Some(b)) => Some(if b.len() < a.len() { b } else { a }),
        (a, b) => a.or(b),
    })
}

impl Teacher for ExactTeacher {
    fn num_symbols(&self) -> usize {
        self.l1.num_symbols()
    }

    fn membership(&mut self, word: &[Symbol]) -> Answer {
        let answer = self.classify(word);
        self.counters.record(word, answer);
        answer
    }

    fn validity(&mut self, hypothesis: &CompleteDfa) -> Result<Validity, TeacherError> {
        self.counters.validity += 1;
        Ok(match exact_counterexample(&self.l1, &self.l2, hypothesis)? {
            Some(w) => Validity::Counterexample(w),
            None => Validity::Accepted,
        })
    }

    fn classify(&self, word: &[Symbol]) -> Answer {
        if self.l1.accepts(word).is_ok_and(Label::is_accept) {
            Answer::Accept
        } else if self.l2.accepts(word).is_ok_and(Label::is_accept) {
            Answer::Reject
        } else {
            Answer::DontCare
        }
    }

    fn counters(&self) -> QueryCounters {
        self.counters
    }
}

/// Teacher backed by finite sets of classified words.
#[derive(Debug, Clone)]
pub struct SampleTeacher {
    num_symbols: usize,
    labels: HashMap<Word, Label>,
    // all sample words in (length, lexicographic) order
    ordered: Vec<Word>,
    counters: QueryCounters,
}

impl SampleTeacher {
    pub fn new(set: &SampleSet) -> Result<Self, TeacherError> {
        let mut labels = HashMap::new();
        for (w, l) in &set.entries {
            if let Some(&old) = labels.get(w) {
                if old != *l {
                    return Err(TeacherError::ConflictingSample(w.clone()));
                }
            }
            labels.insert(w.clone(), *l);
        }
        let mut ordered: Vec<Word> = labels.keys().cloned().collect();
        ordered.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
        Ok(SampleTeacher { num_symbols: set.alphabet_size, labels, ordered, counters: QueryCounters::default() })
    }

    pub fn len(&self) -> usize {
        self.ordered.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ordered.is_empty()
    }

    /// Sample words in (length, lexicographic) order with their labels.
    pub fn samples(&self) -> impl Iterator<Item = (&Word, Label)> {
        self.ordered.iter().map(|w| (w, self.labels[w]))
    }
}

impl Teacher for SampleTeacher {
    fn num_symbols(&self) -> usize {
        self.num_symbols
    }

    fn membership(&mut self, word: &[Symbol]) -> Answer {
        let answer = self.classify(word);
        self.counters.record(word, answer);
        answer
    }

    fn validity(&mut self, hypothesis: &CompleteDfa) -> Result<Validity, TeacherError> {
        check_alphabet(self.num_symbols, hypothesis.num_symbols())?;
        self.counters.validity += 1;
        for w in &self.ordered {
            if hypothesis.accepts(w).ok() != Some(self.labels[w]) {
                return Ok(Validity::Counterexample(w.clone()));
            }
        }
        Ok(Validity::Accepted)
    }

    fn classify(&self, word: &[Symbol]) -> Answer {
        self.labels.get(word).map_or(Answer::DontCare, |&l| Answer::from_label(l))
    }

    fn counters(&self) -> QueryCounters {
        self.counters
    }
}

/// Parameters of the randomized validity check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RandomWMethodConfig {
    /// Test words per validity query.
    pub walks: usize,
    /// Maximum length of the random infix after the access word.
    pub expected_extra_states: usize,
    /// Maximum length of the random suffix.
    pub max_suffix: usize,
    pub seed: u64,
}

impl Default for RandomWMethodConfig {
    fn default() -> Self {
        RandomWMethodConfig { walks: 2000, expected_extra_states: 2, max_suffix: 8, seed: 0 }
    }
}

/// Wraps a teacher and replaces its validity check by random testing: each
/// test word is the access word of a random hypothesis state, a random infix
/// and a random suffix. Acceptance is not a proof of validity.
#[derive(Debug, Clone)]
pub struct RandomWMethod<T> {
    inner: T,
    config: RandomWMethodConfig,
    rng: ChaCha8Rng,
    validity: u64,
}

impl<T: Teacher> RandomWMethod<T> {
    pub fn new(inner: T, config: RandomWMethodConfig) -> Self {
        RandomWMethod { inner, config, rng: ChaCha8Rng::seed_from_u64(config.seed), validity: 0 }
    }

    pub fn inner(&self) -> &T {
        &self.inner
    }
}

/// Length-lexicographically least access word of every state.
fn access_words(h: &CompleteDfa) -> Vec<Word> {
    let mut access: Vec<Option<Word>> = vec![None; h.num_states()];
    access[h.initial()] = Some(Vec::new());
    let mut queue = VecDeque::from([h.initial()]);
    while let Some(q) = queue.pop_front() {
        for a in 0..h.num_symbols() {
            let t = h.step(q, a);
            if access[t].is_none() {
                let mut w = access[q].clone().expect("visited");
                w.push(a);
                access[t] = Some(w);
                queue.push_back(t);
            }
        }
    }
    access.into_iter().flatten().collect()
}

impl<T: Teacher> Teacher for RandomWMethod<T> {
    fn num_symbols(&self) -> usize {
        self.inner.num_symbols()
    }

    fn membership(&mut self, word: &[Symbol]) -> Answer {
        self.inner.membership(word)
    }

    fn validity(&mut self, hypothesis: &CompleteDfa) -> Result<Validity, TeacherError> {
        let k = self.inner.num_symbols();
        check_alphabet(k, hypothesis.num_symbols())?;
        self.validity += 1;
        let access = access_words(hypothesis);
        for _ in 0..self.config.walks {
            let mut w = access[self.rng.gen_range(0..access.len())].clone();
            let infix = self.rng.gen_range(0..=self.config.expected_extra_states);
            let suffix = self.rng.gen_range(0..=self.config.max_suffix);
            w.extend((0..infix + suffix).map(|_| self.rng.gen_range(0..k)));
            if let Some(expected) = self.inner.classify(&w).label() {
                if hypothesis.accepts(&w).ok() != Some(expected) {
                    return Ok(Validity::Counterexample(w));
                }
            }
        }
        Ok(Validity::Accepted)
    }

    fn classify(&self, word: &[Symbol]) -> Answer {
        self.inner.classify(word)
    }

    fn counters(&self) -> QueryCounters {
        QueryCounters { validity: self.validity, ..self.inner.counters() }
    }
}

impl<T: Teacher + ?Sized> Teacher for Box<T> {
    fn num_symbols(&self) -> usize {
        (**self).num_symbols()
    }

    fn membership(&mut self, word: &[Symbol]) -> Answer {
        (**self).membership(word)
    }

    fn validity(&mut self, hypothesis: &CompleteDfa) -> Result<Validity, TeacherError> {
        (**self).validity(hypothesis)
    }

    fn classify(&self, word: &[Symbol]) -> Answer {
        (**self).classify(word)
    }

    fn counters(&self) -> QueryCounters {
        (**self).counters()
    }
}
