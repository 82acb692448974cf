//! Independent oracles and random generators shared by the integration tests.
//! Nothing here calls into the solver, the fold or the merge loop.
#![allow(dead_code)]

use std::collections::HashMap;

use rand::Rng;
use sepdfa::automata::{CompleteDfa, Label, ThreeNfa, Word};
use sepdfa::observation_tree::{Answer, Basis, NodeId, ObservationTree, Relation};

pub fn word(s: &str) -> Word {
    s.chars().map(|c| (c as u8 - b'a') as usize).collect()
}

pub fn even_even() -> CompleteDfa {
    CompleteDfa::new(2, 0, vec![true, false, false, false], vec![1, 2, 0, 3, 3, 0, 2, 1]).unwrap()
}

pub fn odd_length() -> CompleteDfa {
    CompleteDfa::new(2, 0, vec![false, true], vec![1, 1, 0, 0]).unwrap()
}

/// All words up to length `max`, shortest first.
pub fn words_up_to(k: usize, max: usize) -> Vec<Word> {
    let mut out = vec![vec![]];
    let mut layer = vec![vec![]];
    for _ in 0..max {
        let mut next = Vec::new();
        for w in &layer {
            for a in 0..k {
                let mut v: Word = w.clone();
                v.push(a);
                next.push(v);
            }
        }
        out.extend(next.iter().cloned());
        layer = next;
    }
    out
}

/// Random tree with at most `max_nodes` nodes over `k` symbols. Every node
/// gets `+`, `-`, `□` or no answer with the given weights.
pub fn random_tree(rng: &mut impl Rng, k: usize, max_nodes: usize, weights: [u32; 4]) -> ObservationTree {
    let mut t = ObservationTree::new(k);
    let target = rng.gen_range(1..=max_nodes);
    let total: u32 = weights.iter().sum();
    let pick_answer = |rng: &mut dyn rand::RngCore| {
        let mut x = rng.gen_range(0..total);
        for (i, &wt) in weights.iter().enumerate() {
            if x < wt {
                return [Some(Answer::Accept), Some(Answer::Reject), Some(Answer::DontCare), None][i];
            }
            x -= wt;
        }
        None
    };
    if let Some(a) = pick_answer(rng) {
        t.add_observation(&[], a).unwrap();
    }
    let mut attempts = 0;
    while t.len() < target && attempts < 10 * max_nodes {
        attempts += 1;
        let parent = rng.gen_range(0..t.len());
        let a = rng.gen_range(0..k);
        if t.child(parent, a).is_some() {
            continue;
        }
        let mut w = t.access(parent);
        w.push(a);
        match pick_answer(rng) {
            Some(ans) => t.add_observation(&w, ans).unwrap(),
            None => t.ensure_path(&w).unwrap(),
        };
    }
    t
}

/// Labels of the tree by access word, for rebuilding and comparing.
pub fn answers(t: &ObservationTree) -> Vec<(Word, Option<Answer>)> {
    (0..t.len()).map(|q| (t.access(q), t.answer(q))).collect()
}

/// Apartness by definition: some word reaches labeled, conflicting nodes.
pub fn apart_by_definition(t: &ObservationTree, p: NodeId, q: NodeId) -> bool {
    let depth = (0..t.len()).map(|x| t.depth(x)).max().unwrap_or(0);
    words_up_to(t.num_symbols(), depth).iter().any(|w| match (t.walk(p, w), t.walk(q, w)) {
        (Some(x), Some(y)) => matches!((t.label(x), t.label(y)), (Some(a), Some(b)) if a != b),
        _ => false,
    })
}

/// Greedy basis: the root, then random nodes distinguished from every member.
pub fn random_basis(rng: &mut impl Rng, t: &ObservationTree, relation: Relation, max: usize) -> Basis {
    let mut members = vec![t.root()];
    let mut order: Vec<NodeId> = (1..t.len()).collect();
    for i in (1..order.len()).rev() {
        order.swap(i, rng.gen_range(0..=i));
    }
    for q in order {
        if members.len() >= max {
            break;
        }
        let distinct = members.iter().all(|&m| match relation {
            Relation::Apartness => apart_by_definition(t, m, q),
            Relation::Incompatibility => !t.compatible(m, q),
        });
        if distinct {
            members.push(q);
        }
    }
    Basis::from_members(members)
}

/// Does some complete DFA with exactly `n` states admit a tree morphism?
/// Enumerates every transition table; labels follow from the nodes mapped
/// onto each state.
pub fn exists_dfa(t: &ObservationTree, n: usize) -> bool {
    let k = t.num_symbols();
    let cells = n * k;
    let order = t.breadth_first();
    let mut table = vec![0usize; cells];
    let mut image = vec![0usize; t.len()];
    loop {
        if consistent(t, &order, &table, k, n, &mut image) {
            return true;
        }
        // next table in odometer order
        let mut i = 0;
        loop {
            if i == cells {
                return false;
            }
            table[i] += 1;
            if table[i] < n {
                break;
            }
            table[i] = 0;
            i += 1;
        }
    }
}

fn consistent(
    t: &ObservationTree,
    order: &[NodeId],
    table: &[usize],
    k: usize,
    n: usize,
    image: &mut [usize],
) -> bool {
    let mut label: Vec<Option<Label>> = vec![None; n];
    for &q in order {
        let s = match t.parent(q) {
            None => 0,
            Some(p) => table[image[p] * k + t.incoming_symbol(q).unwrap()],
        };
        image[q] = s;
        if let Some(l) = t.label(q) {
            match label[s] {
                Some(m) if m != l => return false,
                _ => label[s] = Some(l),
            }
        }
    }
    true
}

/// Synthesis oracle: a DFA with at most `n` states and a morphism from the tree.
pub fn synthesis_oracle(t: &ObservationTree, n: usize) -> bool {
    (1..=n).any(|m| exists_dfa(t, m))
}

/// Set partitions of `0..n` as block assignments in restricted growth form.
pub fn partitions(n: usize) -> Vec<Vec<usize>> {
    fn go(i: usize, n: usize, cur: &mut Vec<usize>, used: usize, out: &mut Vec<Vec<usize>>) {
        if i == n {
            out.push(cur.clone());
            return;
        }
        for b in 0..=used {
            cur.push(b);
            go(i + 1, n, cur, used.max(b + 1), out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, n, &mut Vec::new(), 0, &mut out);
    out
}

/// Quotient by `blocks` is a 3DFA: labels agree within each block and every
/// block has at most one successor block per symbol.
pub fn quotient_is_deterministic(a: &ThreeNfa, blocks: &[usize]) -> bool {
    let mut label: HashMap<usize, Label> = HashMap::new();
    for (q, &block) in blocks.iter().enumerate() {
        if let Some(l) = a.label(q) {
            if *label.entry(block).or_insert(l) != l {
                return false;
            }
        }
    }
    let mut succ: HashMap<(usize, usize), usize> = HashMap::new();
    for (p, sym, q) in a.transitions() {
        if *succ.entry((blocks[p], sym)).or_insert(blocks[q]) != blocks[q] {
            return false;
        }
    }
    true
}

/// Strong determinizability by trying every set partition of the states.
pub fn sd_oracle(a: &ThreeNfa) -> bool {
    partitions(a.num_states()).iter().any(|b| quotient_is_deterministic(a, b))
}

/// Compatibility of two tree nodes: some quotient of the tree identifying
/// them is a 3DFA. Only for small trees.
pub fn partition_compatible(t: &ObservationTree, p: NodeId, q: NodeId) -> bool {
    let a = t.to_three_nfa();
    if a.num_states() > 9 {
        panic!("tree too large for the partition oracle");
    }
    partitions(a.num_states()).iter().any(|b| b[p] == b[q] && quotient_is_deterministic(&a, b))
}

/// Random 3NFA with `n` states over `k` symbols.
pub fn random_three_nfa(rng: &mut impl Rng, n: usize, k: usize) -> ThreeNfa {
    let mut a = ThreeNfa::new(n, k, 0).unwrap();
    for q in 0..n {
        let l = match rng.gen_range(0..4) {
            0 => Some(Label::Accept),
            1 => Some(Label::Reject),
            _ => None,
        };
        a.set_label(q, l).unwrap();
    }
    let edges = rng.gen_range(0..=n * k + 2);
    for _ in 0..edges {
        a.add_transition(rng.gen_range(0..n), rng.gen_range(0..k), rng.gen_range(0..n)).unwrap();
    }
    a
}

/// Size of the smallest complete DFA consistent with the labeled words.
/// Backtracks over the prefix tree of the sample in breadth-first order,
/// opening states in order of first use.
pub fn min_consistent_dfa(k: usize, samples: &[(Word, Label)]) -> usize {
    let mut t = ObservationTree::new(k);
    for (w, l) in samples {
        t.add_observation(w, Answer::from_label(*l)).unwrap();
    }
    let order = t.breadth_first();
    (1..).find(|&n| {
        let mut table = vec![None; n * k];
        let mut label = vec![None; n];
        let mut image = vec![usize::MAX; t.len()];
        search(&t, &order, 0, n, k, 0, &mut table, &mut label, &mut image)
    })
    .unwrap()
}

#[allow(clippy::too_many_arguments)]
fn search(
    t: &ObservationTree,
    order: &[NodeId],
    i: usize,
    n: usize,
    k: usize,
    used: usize,
    table: &mut Vec<Option<usize>>,
    label: &mut Vec<Option<Label>>,
    image: &mut Vec<usize>,
) -> bool {
    let Some(&q) = order.get(i) else { return true };
    let (choices, cell): (Vec<usize>, Option<usize>) = match t.parent(q) {
        None => (vec![0], None),
        Some(p) => {
            let cell = image[p] * k + t.incoming_symbol(q).unwrap();
            match table[cell] {
                Some(s) => (vec![s], None),
                None => ((0..(used + 1).min(n)).collect(), Some(cell)),
            }
        }
    };
    for s in choices {
        let old = label[s];
        if let Some(l) = t.label(q) {
            if matches!(old, Some(m) if m != l) {
                continue;
            }
            label[s] = Some(l);
        }
        if let Some(c) = cell {
            table[c] = Some(s);
        }
        image[q] = s;
        let used2 = used.max(s + 1);
        if search(t, order, i + 1, n, k, used2, table, label, image) {
            return true;
        }
        if let Some(c) = cell {
            table[c] = None;
        }
        label[s] = old;
    }
    false
}
