//! Morphisms, state merging and strong determinizability.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{AutomataError, StateId, StateMap, ThreeNfa};

/// Checks that `f` is a morphism from `a` to `b`: it preserves the initial
/// state, every defined label, and every transition.
pub fn check_morphism(a: &ThreeNfa, b: &ThreeNfa, f: &StateMap) -> Result<bool, AutomataError> {
    if f.len() != a.num_states() {
        return Err(AutomataError::MapNotTotal { expected: a.num_states(), got: f.len() });
    }
    if a.num_symbols() != b.num_symbols() {
        return Err(AutomataError::AlphabetMismatch(a.num_symbols(), b.num_symbols()));
    }
    for q in 0..a.num_states() {
        b.check_state(f.get(q))?;
    }
    if f.get(a.initial()) != b.initial() {
        return Ok(false);
    }
    for q in 0..a.num_states() {
        if let Some(l) = a.label(q) {
            if b.label(f.get(q)) != Some(l) {
                return Ok(false);
            }
        }
    }
    Ok(a
        .transitions()
        .all(|(q, s, t)| b.successor_set(f.get(q), s).contains(&f.get(t))))
}

/// Merges `q` into `p`.
///
/// The result has one state fewer: `q` disappears and states above it shift
/// down by one. The returned map sends every state of `a` to its image and is
/// a morphism from `a` to the result.
pub fn merge(a: &ThreeNfa, p: StateId, q: StateId) -> Result<(ThreeNfa, StateMap), AutomataError> {
    a.check_state(p)?;
    a.check_state(q)?;
    if p == q {
        return Err(AutomataError::SelfMerge(p));
    }
    if a.conflicting(p, q) {
        return Err(AutomataError::ConflictingMerge(p, q));
    }
    let renumber = |r: StateId| if r > q { r - 1 } else { r };
    let alpha: Vec<StateId> = (0..a.num_states())
        .map(|r| if r == q { renumber(p) } else { renumber(r) })
        .collect();
    let alpha = StateMap::new(alpha);

    let mut b = ThreeNfa::new(a.num_states() - 1, a.num_symbols(), alpha.get(a.initial()))?;
    for r in 0..a.num_states() {
        if r == q {
            continue;
        }
        let label = if r == p { a.label(q).or(a.label(p)) } else { a.label(r) };
        b.finals[alpha.get(r)] = label;
    }
    for (src, s, dst) in a.transitions() {
        b.succ[alpha.get(src)][s].insert(alpha.get(dst));
    }
    Ok((b, alpha))
}

/// Two distinct, nonconflicting successors of one state on one symbol.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct MergeSite {
    keep: StateId,
    drop: StateId,
}

fn allowed_merges(a: &ThreeNfa) -> Vec<MergeSite> {
    let mut sites = Vec::new();
    for q in 0..a.num_states() {
        for s in 0..a.num_symbols() {
            let targets: Vec<StateId> = a.successors(q, s).collect();
            for (i, &x) in targets.iter().enumerate() {
                for &y in &targets[i + 1..] {
                    if !a.conflicting(x, y) {
                        sites.push(MergeSite { keep: x, drop: y });
                    }
                }
            }
        }
    }
    sites
}

fn first_allowed_merge(a: &ThreeNfa) -> Option<MergeSite> {
    for q in 0..a.num_states() {
        for s in 0..a.num_symbols() {
            let targets = a.successor_set(q, s);
            if targets.len() < 2 {
                continue;
            }
            let targets: Vec<StateId> = targets.iter().copied().collect();
            for (i, &x) in targets.iter().enumerate() {
                if let Some(&y) = targets[i + 1..].iter().find(|&&y| !a.conflicting(x, y)) {
                    return Some(MergeSite { keep: x, drop: y });
                }
            }
        }
    }
    None
}

/// Decides whether some 3DFA admits a morphism from `a`.
///
/// Repeatedly merges two nonconflicting successors of one state on one
/// symbol until no merge applies. Returns the verdict together with the
/// residual automaton; on `false` the residual has a state with two
/// conflicting successors on the same symbol.
///
/// Merges are chosen at the lowest-numbered source state and symbol that
/// allows one, taking the two lowest-numbered mergeable targets.
pub fn strongly_determinizable(a: &ThreeNfa) -> (bool, ThreeNfa) {
    let mut current = a.clone();
    while let Some(site) = first_allowed_merge(&current) {
        current = merge(&current, site.keep, site.drop).expect("allowed merge").0;
    }
    (current.is_deterministic(), current)
}

/// Same decision procedure as [`strongly_determinizable`], with the merge
/// picked uniformly at random among all allowed merges at every step.
pub fn strongly_determinizable_seeded(a: &ThreeNfa, seed: u64) -> (bool, ThreeNfa) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut current = a.clone();
    loop {
        let sites = allowed_merges(&current);
        let Some(&site) = sites.choose(&mut rng) else { break };
        current = merge(&current, site.keep, site.drop).expect("allowed merge").0;
    }
    (current.is_deterministic(), current)
}

/// States `p` and `q` can be identified by a morphism into some 3DFA.
pub fn compatible(a: &ThreeNfa, p: StateId, q: StateId) -> Result<bool, AutomataError> {
    a.check_state(p)?;
    a.check_state(q)?;
    if p == q {
        return Err(AutomataError::SelfMerge(p));
    }
    if a.conflicting(p, q) {
        return Ok(false);
    }
    let (merged, _) = merge(a, p, q)?;
    Ok(strongly_determinizable(&merged).0)
}
