//! Backtracking search over the images of live tree nodes.
//!
//! Nodes are visited breadth-first. A node whose parent's transition cell is
//! already decided is forced; otherwise the search branches on the cell.
//! States are introduced in order of first use, so isomorphic models are
//! explored once.

use std::collections::HashMap;

use super::{RawModel, SolveLimits, SynthesisError, SynthesisProblem};
use crate::automata::Label;
use crate::observation_tree::NodeId;

enum Undo {
    F(NodeId),
    Delta(usize),
    Label(usize),
    Rep(usize),
    Used(usize),
}

struct Search<'p, 'a> {
    problem: &'p SynthesisProblem<'a>,
    n: usize,
    redundant: bool,
    f: Vec<Option<usize>>,
    delta: Vec<Option<usize>>,
    labels: Vec<Option<Label>>,
    // first node mapped to each state, for apartness pruning
    rep: Vec<Option<NodeId>>,
    used: usize,
    trail: Vec<Undo>,
    apart_memo: HashMap<(NodeId, NodeId), bool>,
}

struct Frame {
    pos: usize,
    trail_len: usize,
    options: Vec<usize>,
    next: usize,
}

impl Search<'_, '_> {
    fn undo_to(&mut self, len: usize) {
        while self.trail.len() > len {
            match self.trail.pop().expect("non-empty trail") {
                Undo::F(q) => self.f[q] = None,
                Undo::Delta(c) => self.delta[c] = None,
                Undo::Label(s) => self.labels[s] = None,
                Undo::Rep(s) => self.rep[s] = None,
                Undo::Used(old) => self.used = old,
            }
        }
    }

    fn apart(&mut self, x: NodeId, y: NodeId) -> bool {
        let tree = self.problem.tree();
        let key = if x < y { (x, y) } else { (y, x) };
        *self.apart_memo.entry(key).or_insert_with(|| tree.apart(x, y).is_some())
    }

    /// Maps `q` to state `s`, checking every constraint that mentions only
    /// decided values. Leaves partial effects on the trail on failure.
    fn assign(&mut self, q: NodeId, s: usize) -> bool {
        let basis_len = self.problem.basis().len();
        if self.redundant {
            match self.problem.basis_position(q) {
                Some(i) if s != i => return false,
                None if s < basis_len && !self.problem.candidate_positions(q).contains(&s) => return false,
                _ => {}
            }
        }
        if let Some(l) = self.problem.tree().label(q) {
            match self.labels[s] {
                Some(old) if old != l => return false,
                Some(_) => {}
                None => {
                    self.labels[s] = Some(l);
                    self.trail.push(Undo::Label(s));
                }
            }
        }
        if self.redundant {
            match self.rep[s] {
                Some(r) => {
                    if self.apart(q, r) {
                        return false;
                    }
                }
                None => {
                    self.rep[s] = Some(q);
                    self.trail.push(Undo::Rep(s));
                }
            }
        }
        if s >= self.used {
            self.trail.push(Undo::Used(self.used));
            self.used = s + 1;
        }
        self.f[q] = Some(s);
        self.trail.push(Undo::F(q));
        true
    }

    /// Values worth trying for a fresh cell leading to `q`.
    fn options(&self, q: NodeId) -> Vec<usize> {
        let basis_len = self.problem.basis().len();
        let mut out = Vec::new();
        if self.redundant {
            if let Some(i) = self.problem.basis_position(q) {
                return vec![i];
            }
            out.extend(self.problem.candidate_positions(q).iter().copied());
            out.extend(basis_len..self.used);
        } else {
            out.extend(0..self.used);
        }
        if self.used < self.n {
            out.push(self.used);
        }
        out
    }
}

pub(super) fn search(problem: &SynthesisProblem<'_>, limits: &SolveLimits) -> Result<Option<RawModel>, SynthesisError> {
    let tree = problem.tree();
    let (k, n) = (tree.num_symbols(), problem.n());
    let redundant = problem.redundant_clauses();
    let mut s = Search {
        problem,
        n,
        redundant,
        f: vec![None; tree.len()],
        delta: vec![None; n * k],
        labels: vec![None; n],
        rep: vec![None; n],
        // with basis fixing, states 0..|S| are reserved for the basis
        used: if redundant { problem.basis().len() } else { 0 },
        trail: Vec::new(),
        apart_memo: HashMap::new(),
    };
    let order: Vec<NodeId> = tree.breadth_first().into_iter().filter(|&q| problem.is_live(q)).collect();
    let mut stack: Vec<Frame> = Vec::new();
    let mut expansions: u64 = 0;
    let mut pos = 0;

    'outer: loop {
        // descend: place order[pos..] until a branch point or failure
        let mut failed = false;
        while pos < order.len() {
            let q = order[pos];
            let forced = match tree.parent(q) {
                None => None,
                Some(p) => {
                    let cell = s.f[p].expect("parent placed first") * k + tree.incoming_symbol(q).expect("non-root");
                    match s.delta[cell] {
                        Some(t) => Some(t),
                        None => {
                            stack.push(Frame { pos, trail_len: s.trail.len(), options: s.options(q), next: 0 });
                            break;
                        }
                    }
                }
            };
            match forced {
                Some(t) => {
                    if !s.assign(q, t) {
                        failed = true;
                        break;
                    }
                }
                None if tree.parent(q).is_none() => {
                    stack.push(Frame { pos, trail_len: s.trail.len(), options: s.options(q), next: 0 });
                    break;
                }
                None => unreachable!(),
            }
            pos += 1;
        }
        if !failed && pos == order.len() {
            return Ok(Some(RawModel { delta: s.delta, labels: s.labels, f: s.f }));
        }
        // try the next option of the innermost open frame, backtracking as needed
        loop {
            let Some(frame) = stack.last_mut() else { return Ok(None) };
            if frame.next == frame.options.len() {
                let len = frame.trail_len;
                stack.pop();
                s.undo_to(len);
                continue;
            }
            let value = frame.options[frame.next];
            frame.next += 1;
            let (fpos, len) = (frame.pos, frame.trail_len);
            s.undo_to(len);
            if expansions >= limits.max_expansions {
                return Err(SynthesisError::Budget);
            }
            expansions += 1;
            if expansions.is_multiple_of(1024) && limits.deadline.is_some_and(|d| std::time::Instant::now() >= d) {
                return Err(SynthesisError::Budget);
            }
            let q = order[fpos];
            // options were computed before any assignment at this frame
            if let Some(p) = tree.parent(q) {
                let cell = s.f[p].expect("parent placed") * k + tree.incoming_symbol(q).expect("non-root");
                s.delta[cell] = Some(value);
                s.trail.push(Undo::Delta(cell));
            }
            if s.assign(q, value) {
                pos = fpos + 1;
                continue 'outer;
            }
        }
    }
}
