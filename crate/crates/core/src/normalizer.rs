//! Ortholattice normal forms.
//!
//! [`Normalizer::normalize`] rewrites a formula bottom-up into a canonical
//! representative of its equivalence class: nested connectives are flattened,
//! constants folded, complementary and redundant children removed, and the
//! survivors rebuilt right-nested in id order. Redundancy is decided by
//! [`LeqCache::leq`], a cut-free backward search whose failures are cached
//! only when they did not depend on a goal still in progress.

use rustc_hash::FxHashMap;

use crate::entailment::{prove, LimitExceeded, Limits, Sequent, Verdict};
use crate::formula::{FormulaId, FormulaStore, Kind, Node};

/// Verdicts of the axiom-free word problem, shared across queries.
#[derive(Debug, Default, Clone)]
pub struct LeqCache {
    map: FxHashMap<Sequent, bool>,
    in_progress: FxHashMap<Sequent, usize>,
}

#[derive(Clone, Copy)]
struct Alternative {
    premises: [Sequent; 2],
    len: u8,
}

impl Alternative {
    fn one(s: Sequent) -> Self {
        Alternative {
            premises: [s, s],
            len: 1,
        }
    }

    fn two(a: Sequent, b: Sequent) -> Self {
        Alternative {
            premises: [a, b],
            len: 2,
        }
    }
}

struct Frame {
    goal: Sequent,
    alternatives: Vec<Alternative>,
    alt: usize,
    sub: usize,
    /// Shallowest in-progress goal some failure below depended on.
    low: usize,
}

enum Lookup {
    Known(bool),
    OnPath(usize),
    Unknown,
}

impl LeqCache {
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of cached verdicts.
    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Cached verdict for the right-only sequent `s`, if any.
    pub fn cached(&self, s: Sequent) -> Option<bool> {
        self.map.get(&s).copied()
    }

    /// All cached verdicts, keyed by right-only sequent.
    pub fn entries(&self) -> impl Iterator<Item = (Sequent, bool)> + '_ {
        self.map.iter().map(|(&s, &v)| (s, v))
    }

    /// True iff `a ≤ b` holds in every ortholattice. Non-NNF arguments are
    /// converted first.
    pub fn leq(&mut self, store: &mut FormulaStore, a: FormulaId, b: FormulaId) -> bool {
        let a = store.nnf(a);
        let b = store.nnf(b);
        let not_a = store.get_inverse(a).expect("nnf output");
        store.get_inverse(b).expect("nnf output");
        self.derivable(store, Sequent::new(not_a, b))
    }

    fn lookup(&self, store: &FormulaStore, s: Sequent) -> Lookup {
        let (p, q) = (s.first(), s.second());
        if matches!(store.node(p), Node::Top) || matches!(store.node(q), Node::Top) {
            return Lookup::Known(true);
        }
        if store.is_literal(p) && store.cached_inverse(p) == Some(q) {
            return Lookup::Known(true);
        }
        if let Some(&v) = self.map.get(&s) {
            return Lookup::Known(v);
        }
        match self.in_progress.get(&s) {
            Some(&d) => Lookup::OnPath(d),
            None => Lookup::Unknown,
        }
    }

    fn frame(store: &FormulaStore, goal: Sequent) -> Frame {
        let (p, q) = (goal.first(), goal.second());
        let mut alternatives = Vec::new();
        let sides: &[(FormulaId, FormulaId)] = if p == q { &[(p, q)] } else { &[(p, q), (q, p)] };
        for &(x, y) in sides {
            match store.node(x) {
                Node::Or(l, r) => {
                    alternatives.push(Alternative::one(Sequent::new(l, y)));
                    alternatives.push(Alternative::one(Sequent::new(r, y)));
                }
                Node::And(l, r) => {
                    alternatives.push(Alternative::two(Sequent::new(l, y), Sequent::new(r, y)))
                }
                _ => {}
            }
        }
        if p != q {
            alternatives.push(Alternative::one(Sequent::new(p, p)));
            alternatives.push(Alternative::one(Sequent::new(q, q)));
        }
        Frame {
            goal,
            alternatives,
            alt: 0,
            sub: 0,
            low: usize::MAX,
        }
    }

    fn derivable(&mut self, store: &FormulaStore, goal: Sequent) -> bool {
        match self.lookup(store, goal) {
            Lookup::Known(v) => return v,
            Lookup::OnPath(_) => unreachable!("no search is running"),
            Lookup::Unknown => {}
        }
        self.in_progress.insert(goal, 0);
        let mut stack = vec![Self::frame(store, goal)];
        let mut returned: Option<(bool, usize)> = None;
        loop {
            let depth = stack.len() - 1;
            let top = stack.last_mut().expect("stack is nonempty inside the loop");
            if let Some((v, low)) = returned.take() {
                if v {
                    top.sub += 1;
                } else {
                    top.low = top.low.min(low);
                    top.alt += 1;
                    top.sub = 0;
                }
            }
            let outcome = loop {
                let Some(alt) = top.alternatives.get(top.alt) else {
                    break Some(false);
                };
                if top.sub == alt.len as usize {
                    break Some(true);
                }
                let next = alt.premises[top.sub];
                match self.lookup(store, next) {
                    Lookup::Known(true) => top.sub += 1,
                    Lookup::Known(false) => {
                        top.alt += 1;
                        top.sub = 0;
                    }
                    Lookup::OnPath(d) => {
                        top.low = top.low.min(d);
                        top.alt += 1;
                        top.sub = 0;
                    }
                    Lookup::Unknown => break None,
                }
            };
            match outcome {
                None => {
                    let next = top.alternatives[top.alt].premises[top.sub];
                    self.in_progress.insert(next, depth + 1);
                    stack.push(Self::frame(store, next));
                }
                Some(v) => {
                    let done = stack.pop().expect("stack is nonempty inside the loop");
                    self.in_progress.remove(&done.goal);
                    // a failure resting on a shallower in-progress goal may
                    // flip once that goal is decided, so it is not cached
                    let independent = done.low >= depth;
                    if v || independent {
                        self.map.insert(done.goal, v);
                    }
                    if stack.is_empty() {
                        return v;
                    }
                    returned = Some((
                        v,
                        if v || independent {
                            usize::MAX
                        } else {
                            done.low
                        },
                    ));
                }
            }
        }
    }
}

/// Bottom-up normalizer with per-node memoization and a shared [`LeqCache`].
#[derive(Debug, Default, Clone)]
pub struct Normalizer {
    leq: LeqCache,
    memo: FxHashMap<FormulaId, FormulaId>,
}

impl Normalizer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn leq_cache(&mut self) -> &mut LeqCache {
        &mut self.leq
    }

    pub fn normalize(&mut self, store: &mut FormulaStore, f: FormulaId) -> FormulaId {
        let g = store.nnf(f);
        for h in store.postorder_until(&[g], |h| self.memo.contains_key(&h)) {
            if self.memo.contains_key(&h) {
                continue;
            }
            let r = match store.node(h) {
                Node::And(..) => self.combine(store, Kind::And, h),
                Node::Or(..) => self.combine(store, Kind::Or, h),
                _ => h,
            };
            self.memo.insert(h, r);
        }
        self.memo[&g]
    }

    fn combine(&mut self, store: &mut FormulaStore, op: Kind, h: FormulaId) -> FormulaId {
        let kids = store.node(h).children().map(|c| self.memo[&c]).collect();
        self.reduce(store, op, kids)
    }

    /// Normal form of the `op`-connective over `pending`, whose members are
    /// already normal.
    fn reduce(
        &mut self,
        store: &mut FormulaStore,
        op: Kind,
        mut pending: Vec<FormulaId>,
    ) -> FormulaId {
        let dual = match op {
            Kind::And => Kind::Or,
            _ => Kind::And,
        };
        let (absorbing, neutral) = match op {
            Kind::And => (store.bot(), store.top()),
            _ => (store.top(), store.bot()),
        };
        'restart: loop {
            let mut kids = flatten(store, op, &pending);
            if kids.contains(&absorbing) {
                return absorbing;
            }
            kids.retain(|&k| k != neutral);
            kids.sort();
            kids.dedup();
            if kids.is_empty() {
                return neutral;
            }
            for &k in &kids {
                let inv = store.get_inverse(k).expect("normal forms are in nnf");
                if kids.binary_search(&inv).is_ok() {
                    return absorbing;
                }
            }
            if kids.len() > 1 {
                let whole = rebuild(store, op, &kids);
                if self.below(store, op, whole, absorbing) {
                    return absorbing;
                }
            }
            let mut i = 0;
            while i < kids.len() && kids.len() > 1 {
                let mut rest = kids.clone();
                let c = rest.remove(i);
                let rest = rebuild(store, op, &rest);
                if self.below(store, op, rest, c) {
                    kids.remove(i);
                    i = 0;
                } else {
                    i += 1;
                }
            }
            // a child's own children may be unnecessary next to its siblings:
            // in x ∧ (a ∨ b), drop b whenever the whole conjunction is below a
            let whole = rebuild(store, op, &kids);
            for i in 0..kids.len() {
                if store.node(kids[i]).kind() != dual {
                    continue;
                }
                let parts = flatten(store, dual, &[kids[i]]);
                for j in 0..parts.len() {
                    let mut rest = parts.clone();
                    rest.remove(j);
                    let candidate = rebuild(store, dual, &rest);
                    if self.below(store, op, whole, candidate) {
                        kids[i] = self.reduce(store, dual, rest);
                        pending = kids;
                        continue 'restart;
                    }
                }
            }
            return whole;
        }
    }

    /// `whole ≤ part` for a conjunction, `part ≤ whole` for a disjunction.
    fn below(
        &mut self,
        store: &mut FormulaStore,
        op: Kind,
        whole: FormulaId,
        part: FormulaId,
    ) -> bool {
        match op {
            Kind::And => self.leq.leq(store, whole, part),
            _ => self.leq.leq(store, part, whole),
        }
    }
}

/// Operands of the maximal `op`-connective prefixes of `roots`.
fn flatten(store: &FormulaStore, op: Kind, roots: &[FormulaId]) -> Vec<FormulaId> {
    let mut out = Vec::new();
    let mut pending = roots.to_vec();
    while let Some(x) = pending.pop() {
        if store.node(x).kind() == op {
            pending.extend(store.node(x).children());
        } else {
            out.push(x);
        }
    }
    out
}

/// Right-nested binary connective over `kids`, which must be nonempty.
fn rebuild(store: &mut FormulaStore, op: Kind, kids: &[FormulaId]) -> FormulaId {
    let (&last, init) = kids.split_last().expect("at least one child");
    init.iter().rev().fold(last, |acc, &k| match op {
        Kind::And => store.and(k, acc),
        _ => store.or(k, acc),
    })
}

/// Normal form of `f` with a fresh cache.
pub fn normalize(store: &mut FormulaStore, f: FormulaId) -> FormulaId {
    Normalizer::new().normalize(store, f)
}

/// True iff the saturation engine proves `f ≤ g` and `g ≤ f` without axioms.
pub fn certify_equivalence(
    store: &mut FormulaStore,
    f: FormulaId,
    g: FormulaId,
) -> Result<bool, LimitExceeded> {
    for (l, r) in [(f, g), (g, f)] {
        if prove(store, l, r, &[], Limits::none())?.verdict != Verdict::Proved {
            return Ok(false);
        }
    }
    Ok(true)
}
