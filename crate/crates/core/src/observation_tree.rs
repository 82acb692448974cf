//! Observation tree: the prefix tree holding every membership-query outcome,
//! plus the basis, apartness witnesses and candidate sets built on top of it.

use std::collections::{HashMap, HashSet};
use std::fmt;

use thiserror::Error;

use crate::automata::text::{self, FormatError};
use crate::automata::{Label, StateId, Symbol, ThreeNfa, Word};

pub type NodeId = usize;

/// Reply to a membership query.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Answer {
    Accept,
    Reject,
    /// The word is in neither language.
    DontCare,
}

impl Answer {
    pub fn label(self) -> Option<Label> {
        match self {
            Answer::Accept => Some(Label::Accept),
            Answer::Reject => Some(Label::Reject),
            Answer::DontCare => None,
        }
    }

    pub fn from_label(label: Label) -> Self {
        match label {
            Label::Accept => Answer::Accept,
            Label::Reject => Answer::Reject,
        }
    }
}

impl fmt::Display for Answer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Answer::Accept => "+",
            Answer::Reject => "-",
            Answer::DontCare => "□",
        })
    }
}

/// Relation that keeps basis states distinct.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Relation {
    Apartness,
    Incompatibility,
}

#[derive(Debug, Error)]
pub enum TreeError {
    #[error("word {word:?} was answered {previous} before, now {new}")]
    Contradiction { word: Word, previous: Answer, new: Answer },
    #[error("symbol {symbol} is outside an alphabet of size {size}")]
    UnknownSymbol { symbol: Symbol, size: usize },
    #[error("node {0} is already in the basis")]
    AlreadyInBasis(NodeId),
    #[error("node {0} still has basis candidates")]
    NotDistinguished(NodeId),
    #[error("cannot replace basis node {basis} by {node}: {reason}")]
    Replacement { node: NodeId, basis: NodeId, reason: &'static str },
    #[error("malformed snapshot: {0}")]
    Malformed(String),
    #[error(transparent)]
    Format(#[from] FormatError),
}

#[derive(Debug, Clone)]
struct Node {
    parent: Option<NodeId>,
    symbol: Symbol,
    depth: usize,
    children: Vec<Option<NodeId>>,
    answer: Option<Answer>,
    // clock value of the latest label added anywhere in this subtree
    stamp: u64,
}

/// Prefix tree of queried words. Node 0 is the root (the empty word).
/// Answers are write-once.
#[derive(Debug, Clone)]
pub struct ObservationTree {
    num_symbols: usize,
    nodes: Vec<Node>,
    clock: u64,
}

impl ObservationTree {
    pub fn new(num_symbols: usize) -> Self {
        assert!(num_symbols > 0, "alphabet must be non-empty");
        ObservationTree {
            num_symbols,
            nodes: vec![Node {
                parent: None,
                symbol: 0,
                depth: 0,
                children: vec![None; num_symbols],
                answer: None,
                stamp: 0,
            }],
            clock: 0,
        }
    }

    pub fn root(&self) -> NodeId {
        0
    }

    pub fn num_symbols(&self) -> usize {
        self.num_symbols
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn parent(&self, q: NodeId) -> Option<NodeId> {
        self.nodes[q].parent
    }

    /// Symbol on the edge into `q`; `None` for the root.
    pub fn incoming_symbol(&self, q: NodeId) -> Option<Symbol> {
        self.nodes[q].parent.map(|_| self.nodes[q].symbol)
    }

    pub fn child(&self, q: NodeId, symbol: Symbol) -> Option<NodeId> {
        self.nodes[q].children[symbol]
    }

    pub fn children(&self, q: NodeId) -> impl Iterator<Item = (Symbol, NodeId)> + '_ {
        self.nodes[q].children.iter().enumerate().filter_map(|(a, c)| c.map(|c| (a, c)))
    }

    pub fn depth(&self, q: NodeId) -> usize {
        self.nodes[q].depth
    }

    pub fn answer(&self, q: NodeId) -> Option<Answer> {
        self.nodes[q].answer
    }

    pub fn label(&self, q: NodeId) -> Option<Label> {
        self.nodes[q].answer.and_then(Answer::label)
    }

    pub fn is_dontcare(&self, q: NodeId) -> bool {
        self.nodes[q].answer == Some(Answer::DontCare)
    }

    pub fn is_queried(&self, q: NodeId) -> bool {
        self.nodes[q].answer.is_some()
    }

    /// Number of labels recorded so far; increases on every `+`/`-` answer.
    pub fn clock(&self) -> u64 {
        self.clock
    }

    /// Clock value of the latest label added inside the subtree of `q`
    /// (0 when the subtree has no labels).
    pub fn stamp(&self, q: NodeId) -> u64 {
        self.nodes[q].stamp
    }

    pub fn conflicting(&self, p: NodeId, q: NodeId) -> bool {
        matches!((self.label(p), self.label(q)), (Some(x), Some(y)) if x != y)
    }

    /// Records the answer for `word`, creating nodes for it and its prefixes.
    pub fn add_observation(&mut self, word: &[Symbol], answer: Answer) -> Result<NodeId, TreeError> {
        let q = self.ensure_path(word)?;
        match self.nodes[q].answer {
            Some(prev) if prev == answer => return Ok(q),
            Some(prev) => {
                return Err(TreeError::Contradiction { word: word.to_vec(), previous: prev, new: answer })
            }
            None => {}
        }
        self.nodes[q].answer = Some(answer);
        if answer.label().is_some() {
            self.clock += 1;
            let mut cur = Some(q);
            while let Some(x) = cur {
                self.nodes[x].stamp = self.clock;
                cur = self.nodes[x].parent;
            }
        }
        Ok(q)
    }

    /// Node for `word`, creating unqueried nodes along the way.
    pub fn ensure_path(&mut self, word: &[Symbol]) -> Result<NodeId, TreeError> {
        if let Some(&bad) = word.iter().find(|&&a| a >= self.num_symbols) {
            return Err(TreeError::UnknownSymbol { symbol: bad, size: self.num_symbols });
        }
        let mut q = self.root();
        for &a in word {
            q = match self.nodes[q].children[a] {
                Some(c) => c,
                None => {
                    let id = self.nodes.len();
                    let depth = self.nodes[q].depth + 1;
                    self.nodes.push(Node {
                        parent: Some(q),
                        symbol: a,
                        depth,
                        children: vec![None; self.num_symbols],
                        answer: None,
                        stamp: 0,
                    });
                    self.nodes[q].children[a] = Some(id);
                    id
                }
            };
        }
        Ok(q)
    }

    /// Node reached from `from` by `word`, if the path exists.
    pub fn walk(&self, from: NodeId, word: &[Symbol]) -> Option<NodeId> {
        word.iter()
            .try_fold(from, |q, &a| self.nodes[q].children.get(a).copied().flatten())
    }

    pub fn get(&self, word: &[Symbol]) -> Option<NodeId> {
        self.walk(self.root(), word)
    }

    pub fn access(&self, q: NodeId) -> Word {
        let mut word = Vec::with_capacity(self.nodes[q].depth);
        let mut cur = q;
        while let Some(p) = self.nodes[cur].parent {
            word.push(self.nodes[cur].symbol);
            cur = p;
        }
        word.reverse();
        word
    }

    /// `true` if `anc` lies on the path from the root to `q` (inclusive).
    pub fn is_ancestor(&self, anc: NodeId, q: NodeId) -> bool {
        let mut cur = q;
        loop {
            if cur == anc {
                return true;
            }
            if self.nodes[cur].depth <= self.nodes[anc].depth {
                return false;
            }
            match self.nodes[cur].parent {
                Some(p) => cur = p,
                None => return false,
            }
        }
    }

    /// All nodes ordered by depth, then id.
    pub fn breadth_first(&self) -> Vec<NodeId> {
        let mut order: Vec<NodeId> = (0..self.len()).collect();
        order.sort_by_key(|&q| (self.nodes[q].depth, q));
        order
    }

    /// Common-path BFS from (p, q). Calls `visit` on every reached pair with
    /// the index of its BFS record; stops early when `visit` returns true.
    fn pair_bfs(&self, p: NodeId, q: NodeId, mut visit: impl FnMut(&[PairStep], usize) -> bool) {
        let mut steps = vec![PairStep { x: p, y: q, from: usize::MAX, symbol: 0 }];
        let mut i = 0;
        while i < steps.len() {
            if visit(&steps, i) {
                return;
            }
            let PairStep { x, y, .. } = steps[i];
            for a in 0..self.num_symbols {
                if let (Some(cx), Some(cy)) = (self.nodes[x].children[a], self.nodes[y].children[a]) {
                    steps.push(PairStep { x: cx, y: cy, from: i, symbol: a });
                }
            }
            i += 1;
        }
    }

    /// Shortest (then lexicographically least) witness `w` such that both
    /// `p` and `q` have a `w`-path ending in conflicting nodes.
    pub fn apart(&self, p: NodeId, q: NodeId) -> Option<Word> {
        let mut found = None;
        self.pair_bfs(p, q, |steps, i| {
            if self.conflicting(steps[i].x, steps[i].y) {
                found = Some(PairStep::word(steps, i));
                true
            } else {
                false
            }
        });
        found
    }

    /// Every witness for `p ⋕ q`, in length-lexicographic order.
    pub fn witnesses(&self, p: NodeId, q: NodeId) -> Vec<Word> {
        let mut all = Vec::new();
        self.pair_bfs(p, q, |steps, i| {
            if self.conflicting(steps[i].x, steps[i].y) {
                all.push(PairStep::word(steps, i));
            }
            false
        });
        all
    }

    /// Whether `p` and `q` can be mapped to one state by a morphism into some
    /// 3DFA. Decided by folding the two subtrees together with union-find:
    /// the tree form of merging `p` with `q` and then strongly determinizing.
    pub fn compatible(&self, p: NodeId, q: NodeId) -> bool {
        if p == q {
            return true;
        }
        let mut fold = Fold { tree: self, parent: HashMap::new(), class: HashMap::new(), pending: vec![(p, q)] };
        while let Some((x, y)) = fold.pending.pop() {
            if !fold.union(x, y) {
                return false;
            }
        }
        true
    }

    pub fn to_three_nfa(&self) -> ThreeNfa {
        let mut a = ThreeNfa::new(self.len(), self.num_symbols, self.root()).expect("non-empty tree");
        for q in 0..self.len() {
            a.set_label(q, self.label(q)).expect("node in range");
            for (s, c) in self.children(q) {
                a.add_transition(q, s, c).expect("node in range");
            }
        }
        a
    }

    /// Text snapshot: the tree as a 3NFA plus `dontcare` and `basis` lines.
    pub fn to_snapshot(&self, basis: &Basis) -> String {
        let dontcare: Vec<StateId> = (0..self.len()).filter(|&q| self.is_dontcare(q)).collect();
        let members: Vec<(StateId, usize)> = basis.members().iter().enumerate().map(|(i, &q)| (q, i + 1)).collect();
        text::write_document(&self.to_three_nfa(), &dontcare, &members)
    }

    /// Rebuilds a tree and basis from [`ObservationTree::to_snapshot`] output.
    /// Node ids are reassigned in breadth-first order.
    pub fn from_snapshot(input: &str) -> Result<(ObservationTree, Basis), TreeError> {
        let doc = text::parse_document(input)?;
        let a = &doc.automaton;
        if !a.is_deterministic() {
            return Err(TreeError::Malformed("nondeterministic transitions".into()));
        }
        let dontcare: HashSet<StateId> = doc.dontcare.iter().copied().collect();
        let mut tree = ObservationTree::new(a.num_symbols());
        let mut map: HashMap<StateId, NodeId> = HashMap::from([(a.initial(), tree.root())]);
        let mut words: Vec<(StateId, Word)> = vec![(a.initial(), Vec::new())];
        let mut i = 0;
        while i < words.len() {
            let (s, w) = words[i].clone();
            i += 1;
            let node = tree.ensure_path(&w)?;
            map.insert(s, node);
            let answer = match (a.label(s), dontcare.contains(&s)) {
                (Some(_), true) => return Err(TreeError::Malformed(format!("state {s} both labeled and don't-care"))),
                (Some(l), false) => Some(Answer::from_label(l)),
                (None, true) => Some(Answer::DontCare),
                (None, false) => None,
            };
            if let Some(ans) = answer {
                tree.add_observation(&w, ans)?;
            }
            for sym in 0..a.num_symbols() {
                for t in a.successors(s, sym) {
                    if map.contains_key(&t) || words.iter().any(|(x, _)| *x == t) {
                        return Err(TreeError::Malformed(format!("state {t} has several incoming edges")));
                    }
                    let mut next = w.clone();
                    next.push(sym);
                    words.push((t, next));
                }
            }
        }
        if words.len() != a.num_states() {
            return Err(TreeError::Malformed("unreachable states".into()));
        }
        let mut members = doc.basis.clone();
        members.sort_by_key(|&(_, idx)| idx);
        if members.iter().enumerate().any(|(i, &(_, idx))| idx != i + 1) {
            return Err(TreeError::Malformed("basis indices must be 1..|S|".into()));
        }
        let basis = Basis { members: members.iter().map(|(s, _)| map[s]).collect() };
        Ok((tree, basis))
    }
}

#[derive(Debug, Clone, Copy)]
struct PairStep {
    x: NodeId,
    y: NodeId,
    from: usize,
    symbol: Symbol,
}

impl PairStep {
    fn word(steps: &[PairStep], mut i: usize) -> Word {
        let mut w = Vec::new();
        while steps[i].from != usize::MAX {
            w.push(steps[i].symbol);
            i = steps[i].from;
        }
        w.reverse();
        w
    }
}

struct Fold<'a> {
    tree: &'a ObservationTree,
    parent: HashMap<NodeId, NodeId>,
    // per class representative: merged label and one child per symbol
    class: HashMap<NodeId, (Option<Label>, Vec<Option<NodeId>>)>,
    pending: Vec<(NodeId, NodeId)>,
}

impl Fold<'_> {
    fn find(&mut self, x: NodeId) -> NodeId {
        let mut root = x;
        while let Some(&p) = self.parent.get(&root) {
            root = p;
        }
        let mut cur = x;
        while let Some(&p) = self.parent.get(&cur) {
            if p == root {
                break;
            }
            self.parent.insert(cur, root);
            cur = p;
        }
        root
    }

    fn data(&mut self, rep: NodeId) -> (Option<Label>, Vec<Option<NodeId>>) {
        self.class
            .remove(&rep)
            .unwrap_or_else(|| (self.tree.label(rep), self.tree.nodes[rep].children.clone()))
    }

    fn union(&mut self, x: NodeId, y: NodeId) -> bool {
        let (rx, ry) = (self.find(x), self.find(y));
        if rx == ry {
            return true;
        }
        let (lx, mut cx) = self.data(rx);
        let (ly, cy) = self.data(ry);
        if matches!((lx, ly), (Some(a), Some(b)) if a != b) {
            return false;
        }
        for (slot, other) in cx.iter_mut().zip(cy) {
            match (*slot, other) {
                (Some(a), Some(b)) => self.pending.push((a, b)),
                (None, Some(b)) => *slot = Some(b),
                _ => {}
            }
        }
        self.parent.insert(ry, rx);
        self.class.insert(rx, (lx.or(ly), cx));
        true
    }
}

/// Basis: tree nodes that must end up in distinct hypothesis states.
/// Position `i` (0-based) carries the fixed hypothesis index `i + 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Basis {
    members: Vec<NodeId>,
}

impl Basis {
    /// The initial basis `{root}`.
    pub fn new(tree: &ObservationTree) -> Self {
        Basis { members: vec![tree.root()] }
    }

    pub fn from_members(members: Vec<NodeId>) -> Self {
        Basis { members }
    }

    pub fn members(&self) -> &[NodeId] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, q: NodeId) -> bool {
        self.members.contains(&q)
    }

    /// Fixed hypothesis index (1-based) of a basis node.
    pub fn index_of(&self, q: NodeId) -> Option<usize> {
        self.members.iter().position(|&m| m == q).map(|i| i + 1)
    }
}

/// Memoized apartness witnesses and compatibility verdicts.
///
/// Positive results (a witness, an incompatibility) stay valid forever since
/// answers are write-once. Negative results are valid until a label is added
/// to the subtree of either node.
#[derive(Debug, Default, Clone)]
pub struct RelationCache {
    witnesses: HashMap<(NodeId, NodeId), Word>,
    not_apart: HashMap<(NodeId, NodeId), u64>,
    incompatible: HashSet<(NodeId, NodeId)>,
    compatible: HashMap<(NodeId, NodeId), u64>,
}

fn key(p: NodeId, q: NodeId) -> (NodeId, NodeId) {
    if p <= q {
        (p, q)
    } else {
        (q, p)
    }
}

fn still_valid(tree: &ObservationTree, (p, q): (NodeId, NodeId), checked_at: u64) -> bool {
    tree.stamp(p).max(tree.stamp(q)) <= checked_at
}

impl RelationCache {
    pub fn new() -> Self {
        Self::default()
    }

    /// Cached witness for `p ⋕ q`, computing it if needed.
    pub fn witness(&mut self, tree: &ObservationTree, p: NodeId, q: NodeId) -> Option<&Word> {
        let k = key(p, q);
        if !self.witnesses.contains_key(&k) {
            if let Some(&at) = self.not_apart.get(&k) {
                if still_valid(tree, k, at) {
                    return None;
                }
            }
            match tree.apart(k.0, k.1) {
                Some(w) => {
                    self.not_apart.remove(&k);
                    self.witnesses.insert(k, w);
                }
                None => {
                    self.not_apart.insert(k, tree.clock());
                    return None;
                }
            }
        }
        self.witnesses.get(&k)
    }

    pub fn is_apart(&mut self, tree: &ObservationTree, p: NodeId, q: NodeId) -> bool {
        self.witness(tree, p, q).is_some()
    }

    pub fn is_incompatible(&mut self, tree: &ObservationTree, p: NodeId, q: NodeId) -> bool {
        if p == q {
            return false;
        }
        let k = key(p, q);
        if self.incompatible.contains(&k) {
            return true;
        }
        if let Some(&at) = self.compatible.get(&k) {
            if still_valid(tree, k, at) {
                return false;
            }
        }
        let incompatible = self.is_apart(tree, p, q) || !tree.compatible(p, q);
        if incompatible {
            self.compatible.remove(&k);
            self.incompatible.insert(k);
        } else {
            self.compatible.insert(k, tree.clock());
        }
        incompatible
    }

    /// `p` and `q` must be distinct hypothesis states under `relation`.
    pub fn distinguished(&mut self, tree: &ObservationTree, relation: Relation, p: NodeId, q: NodeId) -> bool {
        match relation {
            Relation::Apartness => self.is_apart(tree, p, q),
            Relation::Incompatibility => self.is_incompatible(tree, p, q),
        }
    }

    pub fn cached_witnesses(&self) -> impl Iterator<Item = ((NodeId, NodeId), &Word)> {
        self.witnesses.iter().map(|(&k, w)| (k, w))
    }
}

/// Basis nodes not (yet) distinguished from `q`.
pub fn candidate_set(
    tree: &ObservationTree,
    basis: &Basis,
    q: NodeId,
    relation: Relation,
    cache: &mut RelationCache,
) -> Vec<NodeId> {
    basis
        .members()
        .iter()
        .copied()
        .filter(|&p| !cache.distinguished(tree, relation, p, q))
        .collect()
}

/// Non-basis children of basis nodes, in id order.
pub fn frontier(tree: &ObservationTree, basis: &Basis) -> Vec<NodeId> {
    let mut out: Vec<NodeId> = basis
        .members()
        .iter()
        .flat_map(|&b| tree.children(b).map(|(_, c)| c))
        .filter(|&c| !basis.contains(c))
        .collect();
    out.sort_unstable();
    out
}

/// Adds `q` to the basis and returns `max(n, |S|)`.
pub fn promote(
    tree: &ObservationTree,
    basis: &mut Basis,
    q: NodeId,
    n: usize,
    relation: Relation,
    cache: &mut RelationCache,
) -> Result<usize, TreeError> {
    if basis.contains(q) {
        return Err(TreeError::AlreadyInBasis(q));
    }
    if !candidate_set(tree, basis, q, relation, cache).is_empty() {
        return Err(TreeError::NotDistinguished(q));
    }
    basis.members.push(q);
    Ok(n.max(basis.len()))
}

/// Replaces basis node `p` by the shallower node `q`, whose only candidate is `p`.
/// `q` takes over `p`'s index.
pub fn replace_basis(
    tree: &ObservationTree,
    basis: &mut Basis,
    q: NodeId,
    p: NodeId,
    relation: Relation,
    cache: &mut RelationCache,
) -> Result<(), TreeError> {
    let err = |reason| TreeError::Replacement { node: q, basis: p, reason };
    if basis.contains(q) {
        return Err(err("node already in basis"));
    }
    let slot = basis.members.iter().position(|&m| m == p).ok_or_else(|| err("target not in basis"))?;
    if tree.depth(q) >= tree.depth(p) {
        return Err(err("replacement is not shallower"));
    }
    if candidate_set(tree, basis, q, relation, cache) != [p] {
        return Err(err("candidate set is not exactly the target"));
    }
    basis.members[slot] = q;
    Ok(())
}
