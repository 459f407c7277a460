//! Forward-saturation prover for orthologic with axioms.
//!
//! Goals and axioms are first rewritten into sequents of two right-annotated
//! NNF formulas: `φ ≤ ψ` becomes `(φ', ψ)` where `φ'` is the inverse of
//! `nnf(φ)`. Only six rules remain (Ax, Hyp, Cut, ∧-R, ∨-R, Replace), and
//! every derivable sequent is a pair of formulas from the *universe*: the
//! subformulas of the goal and the axioms, closed under inversion.
//!
//! Saturation pops a proven sequent `(a, b)`, updates the four indexes and
//! derives every consequence that has `(a, b)` as its last premise:
//!
//! * `sf_or[a]`: disjunctions with `a` as a direct child (∨-R),
//! * `p_and[(b, a)]`: conjunctions `x ∧ a` such that `(x, b)` was popped (∧-R),
//! * `p_cut[a]`: formulas `c` such that `(a', c)` was popped (Cut on an
//!   axiom formula),
//! * every universe formula when `a == b` (Replace),
//!
//! and symmetrically for `b`. Each sequent can be attempted only O(1 + |A|)
//! times, which gives the O(n²(1 + |A|)) time bound; the indexes are O(n²).

use std::collections::VecDeque;
use std::fmt;
use std::time::{Duration, Instant};

use rustc_hash::{FxHashMap, FxHashSet};
use thiserror::Error;

use crate::formula::{FormulaId, FormulaStore, Node};

/// Name of the variable used to express `⊤`/`⊥` as `z ∨ ¬z`/`z ∧ ¬z`.
pub const CONSTANT_VAR: &str = "__z0";

/// An unordered pair of right-annotated NNF formulas, stored as (min, max).
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct Sequent {
    first: FormulaId,
    second: FormulaId,
}

impl Sequent {
    pub fn new(a: FormulaId, b: FormulaId) -> Self {
        if a <= b {
            Sequent {
                first: a,
                second: b,
            }
        } else {
            Sequent {
                first: b,
                second: a,
            }
        }
    }

    pub fn first(&self) -> FormulaId {
        self.first
    }

    pub fn second(&self) -> FormulaId {
        self.second
    }

    pub fn contains(&self, f: FormulaId) -> bool {
        self.first == f || self.second == f
    }

    /// The component paired with `f`, if `f` is one of the two.
    pub fn other(&self, f: FormulaId) -> Option<FormulaId> {
        if self.first == f {
            Some(self.second)
        } else if self.second == f {
            Some(self.first)
        } else {
            None
        }
    }
}

impl fmt::Display for Sequent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.first, self.second)
    }
}

/// Axioms in right-only form together with their formulas and inverses.
#[derive(Debug, Clone, Default)]
pub struct AxiomSet {
    pub axioms: Vec<Sequent>,
    formulas: Vec<FormulaId>,
}

impl AxiomSet {
    /// Axiom formulas, closed under inversion, sorted by id.
    pub fn formulas(&self) -> &[FormulaId] {
        &self.formulas
    }

    pub fn is_axiom_formula(&self, f: FormulaId) -> bool {
        self.formulas.binary_search(&f).is_ok()
    }

    pub fn len(&self) -> usize {
        self.axioms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.axioms.is_empty()
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum Rule {
    Ax,
    Hyp,
    Cut,
    AndR,
    OrR,
    Replace,
}

/// How one proven sequent was first derived.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DerivationRecord {
    pub rule: Rule,
    pub premises: Vec<Sequent>,
    /// Cut formula, for [`Rule::Cut`].
    pub cut_formula: Option<FormulaId>,
    /// Position in the order in which sequents were proven.
    pub order: usize,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Verdict {
    Proved,
    NotProvable,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Default)]
pub struct Limits {
    pub max_sequents: Option<usize>,
    pub max_millis: Option<u64>,
}

impl Limits {
    pub fn none() -> Self {
        Limits::default()
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Default)]
pub enum WorklistOrder {
    /// Depth-first, the default.
    #[default]
    Lifo,
    Fifo,
}

#[derive(Clone, Copy, Debug)]
pub struct ProverOptions {
    pub order: WorklistOrder,
    pub record_derivations: bool,
}

impl Default for ProverOptions {
    fn default() -> Self {
        ProverOptions {
            order: WorklistOrder::Lifo,
            record_derivations: true,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("limit exceeded after {proven} sequents and {attempts} deduction attempts")]
pub struct LimitExceeded {
    pub proven: usize,
    pub attempts: u64,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("sequent {sequent} is not justified: {reason}")]
pub struct DerivationError {
    pub sequent: Sequent,
    pub reason: String,
}

#[derive(Clone, Debug, Default)]
pub struct ProofStats {
    pub proven: usize,
    pub attempts: u64,
    pub universe: usize,
    pub elapsed: Duration,
}

#[derive(Clone, Debug)]
pub struct ProofReport {
    pub verdict: Verdict,
    pub stats: ProofStats,
}

type Local = u32;

fn key(a: Local, b: Local) -> u64 {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    (lo as u64) << 32 | hi as u64
}

fn unkey(k: u64) -> (Local, Local) {
    ((k >> 32) as Local, k as Local)
}

#[derive(Clone, Copy, Debug)]
struct Record {
    rule: Rule,
    premises: [u64; 2],
    arity: u8,
    cut: Local,
    order: u32,
}

/// Proven sequents, the worklist and the bookkeeping that comes with them.
#[derive(Debug)]
struct Closure {
    proven: FxHashSet<u64>,
    worklist: VecDeque<(Local, Local)>,
    order: WorklistOrder,
    records: Option<FxHashMap<u64, Record>>,
    attempts: u64,
    goal: u64,
}

impl Closure {
    /// Adds `(a, b)` if unseen. Returns true when it is the goal.
    #[inline]
    fn try_push(&mut self, a: Local, b: Local, rule: Rule, premises: &[u64], cut: Local) -> bool {
        self.attempts += 1;
        let k = key(a, b);
        if !self.proven.insert(k) {
            return false;
        }
        if let Some(records) = &mut self.records {
            let mut p = [0; 2];
            p[..premises.len()].copy_from_slice(premises);
            records.insert(
                k,
                Record {
                    rule,
                    premises: p,
                    arity: premises.len() as u8,
                    cut,
                    order: records.len() as u32,
                },
            );
        }
        self.worklist.push_back((a, b));
        k == self.goal
    }

    fn pop(&mut self) -> Option<(Local, Local)> {
        match self.order {
            WorklistOrder::Lifo => self.worklist.pop_back(),
            WorklistOrder::Fifo => self.worklist.pop_front(),
        }
    }
}

/// Everything the main loop reads and updates besides the proven set.
#[derive(Debug)]
pub struct EntailmentState {
    universe: Vec<FormulaId>,
    local: FxHashMap<FormulaId, Local>,
    inverse: Vec<Local>,
    axiom_formula: Vec<bool>,
    /// `sf_and[a]` lists `(k, c)` for every conjunction `c ∈ {a ∧ k, k ∧ a}`.
    sf_and: Vec<Vec<(Local, Local)>>,
    /// `sf_or[a]` lists the disjunctions that have `a` as a child.
    sf_or: Vec<Vec<Local>>,
    /// `p_cut[a] = { b | (a', b) popped }`; empty outside axiom formulas.
    p_cut: Vec<Vec<Local>>,
    /// `p_and[(b, k)] = { a ∧ k | (a, b) popped }`.
    p_and: FxHashMap<(Local, Local), Vec<Local>>,
    /// Child pairs of conjunctions, indexed like `universe`.
    and_children: Vec<Option<(Local, Local)>>,
    axioms: Vec<u64>,
    closure: Closure,
}

/// Output of [`prepare_goal`].
#[derive(Debug)]
pub struct Prepared {
    pub goal: Sequent,
    pub axioms: AxiomSet,
    pub state: EntailmentState,
}

/// Replaces `⊤`/`⊥` below `f` by `z ∨ ¬z`/`z ∧ ¬z`.
fn eliminate_constants(
    store: &mut FormulaStore,
    f: FormulaId,
    memo: &mut FxHashMap<FormulaId, FormulaId>,
) -> FormulaId {
    for g in store.postorder(&[f]) {
        if memo.contains_key(&g) {
            continue;
        }
        let r = match store.node(g) {
            Node::Var(_) => g,
            Node::Top | Node::Bot => {
                let z = store.var(CONSTANT_VAR);
                let nz = store.not(z);
                if store.node(g) == Node::Top {
                    store.or(z, nz)
                } else {
                    store.and(z, nz)
                }
            }
            Node::Not(c) => {
                let c = memo[&c];
                store.not(c)
            }
            Node::And(l, r) => {
                let (l, r) = (memo[&l], memo[&r]);
                store.and(l, r)
            }
            Node::Or(l, r) => {
                let (l, r) = (memo[&l], memo[&r]);
                store.or(l, r)
            }
        };
        memo.insert(g, r);
    }
    memo[&f]
}

/// Turns `lhs ≤ rhs` into its right-only NNF sequent.
pub fn right_only(store: &mut FormulaStore, lhs: FormulaId, rhs: FormulaId) -> Sequent {
    let mut memo = FxHashMap::default();
    right_only_with(store, lhs, rhs, &mut memo)
}

fn right_only_with(
    store: &mut FormulaStore,
    lhs: FormulaId,
    rhs: FormulaId,
    memo: &mut FxHashMap<FormulaId, FormulaId>,
) -> Sequent {
    let lhs = eliminate_constants(store, lhs, memo);
    let rhs = eliminate_constants(store, rhs, memo);
    let l = store.nnf(lhs);
    let l = store.get_inverse(l).expect("nnf output is in nnf");
    let r = store.nnf(rhs);
    Sequent::new(l, r)
}

/// Converts the goal `lhs ≤ rhs` and the axiom inequalities, builds the
/// universe and the static indexes, and seeds the proven set with the axioms
/// and the `(x, ¬x)` hypotheses.
pub fn prepare_goal(
    store: &mut FormulaStore,
    lhs: FormulaId,
    rhs: FormulaId,
    axioms: &[(FormulaId, FormulaId)],
    options: ProverOptions,
) -> Prepared {
    let mut memo = FxHashMap::default();
    let goal = right_only_with(store, lhs, rhs, &mut memo);
    let axiom_seqs: Vec<Sequent> = axioms
        .iter()
        .map(|&(l, r)| right_only_with(store, l, r, &mut memo))
        .collect();

    let mut axiom_formulas = Vec::new();
    for s in &axiom_seqs {
        for f in [s.first, s.second] {
            axiom_formulas.push(f);
            axiom_formulas.push(store.get_inverse(f).expect("nnf"));
        }
    }
    axiom_formulas.sort();
    axiom_formulas.dedup();

    let mut roots = vec![goal.first, goal.second];
    roots.extend(axiom_seqs.iter().flat_map(|s| [s.first, s.second]));
    let subformulas = store.postorder(&roots);
    let mut closed = subformulas.clone();
    for &f in &subformulas {
        closed.push(store.get_inverse(f).expect("nnf"));
    }
    let universe = store.postorder(&closed);

    let n = universe.len();
    let local: FxHashMap<FormulaId, Local> = universe
        .iter()
        .enumerate()
        .map(|(i, &f)| (f, i as Local))
        .collect();
    let inverse: Vec<Local> = universe
        .iter()
        .map(|&f| local[&store.cached_inverse(f).expect("universe is inverse-closed")])
        .collect();
    let mut axiom_formula = vec![false; n];
    for f in &axiom_formulas {
        axiom_formula[local[f] as usize] = true;
    }

    let mut sf_and = vec![Vec::new(); n];
    let mut sf_or = vec![Vec::new(); n];
    let mut and_children = vec![None; n];
    let mut hyps = Vec::new();
    for (i, &f) in universe.iter().enumerate() {
        let i = i as Local;
        match store.node(f) {
            Node::And(l, r) => {
                let (l, r) = (local[&l], local[&r]);
                sf_and[l as usize].push((r, i));
                if l != r {
                    sf_and[r as usize].push((l, i));
                }
                and_children[i as usize] = Some((l, r));
            }
            Node::Or(l, r) => {
                let (l, r) = (local[&l], local[&r]);
                sf_or[l as usize].push(i);
                if l != r {
                    sf_or[r as usize].push(i);
                }
            }
            Node::Var(_) => hyps.push((i, inverse[i as usize])),
            _ => {}
        }
    }

    let axiom_keys: Vec<u64> = axiom_seqs
        .iter()
        .map(|s| key(local[&s.first], local[&s.second]))
        .collect();
    let goal_key = key(local[&goal.first], local[&goal.second]);

    let mut closure = Closure {
        proven: FxHashSet::default(),
        worklist: VecDeque::new(),
        order: options.order,
        records: options.record_derivations.then(FxHashMap::default),
        attempts: 0,
        goal: goal_key,
    };
    for &k in &axiom_keys {
        let (a, b) = unkey(k);
        closure.try_push(a, b, Rule::Ax, &[], 0);
    }
    for (x, nx) in hyps {
        closure.try_push(x, nx, Rule::Hyp, &[], 0);
    }
    closure.attempts = 0;

    let state = EntailmentState {
        universe,
        local,
        inverse,
        axiom_formula,
        sf_and,
        sf_or,
        p_cut: vec![Vec::new(); n],
        p_and: FxHashMap::default(),
        and_children,
        axioms: axiom_keys,
        closure,
    };
    Prepared {
        goal,
        axioms: AxiomSet {
            axioms: axiom_seqs,
            formulas: axiom_formulas,
        },
        state,
    }
}

/// Result of one iteration of the main loop.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Step {
    Continue,
    Done(Verdict),
}

impl EntailmentState {
    /// Subformulas of the goal and axioms, closed under inversion.
    pub fn universe(&self) -> &[FormulaId] {
        &self.universe
    }

    pub fn in_universe(&self, f: FormulaId) -> bool {
        self.local.contains_key(&f)
    }

    pub fn proven_count(&self) -> usize {
        self.closure.proven.len()
    }

    pub fn attempts(&self) -> u64 {
        self.closure.attempts
    }

    pub fn is_proven(&self, s: Sequent) -> bool {
        match (self.local.get(&s.first), self.local.get(&s.second)) {
            (Some(&a), Some(&b)) => self.closure.proven.contains(&key(a, b)),
            _ => false,
        }
    }

    fn sequent(&self, k: u64) -> Sequent {
        let (a, b) = unkey(k);
        Sequent::new(self.universe[a as usize], self.universe[b as usize])
    }

    /// Every proven sequent, in no particular order.
    pub fn proven(&self) -> impl Iterator<Item = Sequent> + '_ {
        self.closure.proven.iter().map(|&k| self.sequent(k))
    }

    /// Sequents proven but not yet processed.
    pub fn worklist(&self) -> impl Iterator<Item = Sequent> + '_ {
        self.closure
            .worklist
            .iter()
            .map(|&(a, b)| self.sequent(key(a, b)))
    }

    pub fn derivation(&self, s: Sequent) -> Option<DerivationRecord> {
        let (a, b) = (*self.local.get(&s.first)?, *self.local.get(&s.second)?);
        let r = self.closure.records.as_ref()?.get(&key(a, b))?;
        Some(self.export_record(r))
    }

    fn export_record(&self, r: &Record) -> DerivationRecord {
        DerivationRecord {
            rule: r.rule,
            premises: r.premises[..r.arity as usize]
                .iter()
                .map(|&k| self.sequent(k))
                .collect(),
            cut_formula: (r.rule == Rule::Cut).then(|| self.universe[r.cut as usize]),
            order: r.order as usize,
        }
    }

    /// Overwrites a derivation record. Only meant for exercising the checker.
    pub fn set_derivation(&mut self, s: Sequent, record: DerivationRecord) -> bool {
        let (Some(&a), Some(&b)) = (self.local.get(&s.first), self.local.get(&s.second)) else {
            return false;
        };
        let mut premises = [0; 2];
        for (slot, p) in premises.iter_mut().zip(&record.premises) {
            match (self.local.get(&p.first), self.local.get(&p.second)) {
                (Some(&x), Some(&y)) => *slot = key(x, y),
                _ => return false,
            }
        }
        let cut = match record.cut_formula {
            Some(c) => match self.local.get(&c) {
                Some(&c) => c,
                None => return false,
            },
            None => 0,
        };
        let Some(records) = self.closure.records.as_mut() else {
            return false;
        };
        records.insert(
            key(a, b),
            Record {
                rule: record.rule,
                premises,
                arity: record.premises.len().min(2) as u8,
                cut,
                order: record.order as u32,
            },
        );
        true
    }

    /// Processes one sequent from the worklist.
    pub fn step(&mut self) -> Step {
        let Some((a, b)) = self.closure.pop() else {
            return Step::Done(Verdict::NotProvable);
        };
        let ab = key(a, b);
        if ab == self.closure.goal {
            return Step::Done(Verdict::Proved);
        }
        let (au, bu) = (a as usize, b as usize);

        if self.axiom_formula[au] {
            self.p_cut[self.inverse[au] as usize].push(b);
        }
        if a != b && self.axiom_formula[bu] {
            self.p_cut[self.inverse[bu] as usize].push(a);
        }
        for &(k, conj) in &self.sf_and[au] {
            self.p_and.entry((b, k)).or_default().push(conj);
        }
        if a != b {
            for &(k, conj) in &self.sf_and[bu] {
                self.p_and.entry((a, k)).or_default().push(conj);
            }
        }

        let closure = &mut self.closure;
        let mut proved = false;
        for (this, other) in [(a, b), (b, a)] {
            let tu = this as usize;
            for &phi in &self.sf_or[tu] {
                proved |= closure.try_push(phi, other, Rule::OrR, &[ab], 0);
            }
            if let Some(conjs) = self.p_and.get(&(other, this)) {
                for &phi in conjs {
                    let (l, r) = self.and_children[phi as usize].expect("conjunction");
                    let x = if l == this { r } else { l };
                    proved |= closure.try_push(phi, other, Rule::AndR, &[ab, key(x, other)], 0);
                }
            }
            for &phi in &self.p_cut[tu] {
                let side = key(self.inverse[tu], phi);
                proved |= closure.try_push(phi, other, Rule::Cut, &[ab, side], this);
            }
            if a == b {
                break;
            }
        }
        if a == b {
            for phi in 0..self.universe.len() as Local {
                proved |= closure.try_push(phi, a, Rule::Replace, &[ab], 0);
            }
        }
        if proved {
            Step::Done(Verdict::Proved)
        } else {
            Step::Continue
        }
    }

    /// Runs the main loop until the goal is proven, the worklist is empty or
    /// a limit is hit.
    pub fn saturate(&mut self, limits: Limits) -> Result<Verdict, LimitExceeded> {
        // the goal may already be an axiom or a hypothesis
        if self.closure.proven.contains(&self.closure.goal) {
            return Ok(Verdict::Proved);
        }
        let start = Instant::now();
        let mut iterations: u64 = 0;
        loop {
            if let Some(max) = limits.max_sequents {
                if self.closure.proven.len() > max {
                    return Err(self.limit_exceeded());
                }
            }
            if let Some(ms) = limits.max_millis {
                if iterations.is_multiple_of(1024) && start.elapsed() >= Duration::from_millis(ms) {
                    return Err(self.limit_exceeded());
                }
            }
            iterations += 1;
            if let Step::Done(v) = self.step() {
                return Ok(v);
            }
        }
    }

    fn limit_exceeded(&self) -> LimitExceeded {
        LimitExceeded {
            proven: self.closure.proven.len(),
            attempts: self.closure.attempts,
        }
    }

    fn popped(&self) -> FxHashSet<u64> {
        let pending: FxHashSet<u64> = self
            .closure
            .worklist
            .iter()
            .map(|&(a, b)| key(a, b))
            .collect();
        self.closure
            .proven
            .iter()
            .copied()
            .filter(|k| !pending.contains(k))
            .collect()
    }

    /// Recomputes the cut and conjunction indexes from the processed
    /// sequents and compares them with the incremental ones.
    pub fn check_invariants(&self) -> Result<(), String> {
        let n = self.universe.len();
        for (a, b) in self.closure.worklist.iter() {
            if !self.closure.proven.contains(&key(*a, *b)) {
                return Err(format!("worklist entry ({a}, {b}) is not proven"));
            }
        }
        let popped = self.popped();
        let mut cut: Vec<FxHashSet<Local>> = vec![FxHashSet::default(); n];
        let mut and: FxHashMap<(Local, Local), FxHashSet<Local>> = FxHashMap::default();
        for &k in &popped {
            let (a, b) = unkey(k);
            for (x, y) in [(a, b), (b, a)] {
                if self.axiom_formula[x as usize] {
                    cut[self.inverse[x as usize] as usize].insert(y);
                }
                for &(k2, conj) in &self.sf_and[x as usize] {
                    and.entry((y, k2)).or_default().insert(conj);
                }
            }
        }
        for (i, expected) in cut.iter().enumerate() {
            let actual: FxHashSet<Local> = self.p_cut[i].iter().copied().collect();
            if actual.len() != self.p_cut[i].len() {
                return Err(format!("p_cut[{i}] has duplicates"));
            }
            if &actual != expected {
                return Err(format!("p_cut[{i}] differs from its definition"));
            }
            if !actual.is_empty() && !self.axiom_formula[i] {
                return Err(format!("p_cut[{i}] is set on a non-axiom formula"));
            }
        }
        let mut per_b: FxHashMap<Local, usize> = FxHashMap::default();
        for (k, conjs) in &self.p_and {
            let actual: FxHashSet<Local> = conjs.iter().copied().collect();
            if actual.len() != conjs.len() {
                return Err(format!("p_and{k:?} has duplicates"));
            }
            if and.get(k).map_or(!actual.is_empty(), |e| e != &actual) {
                return Err(format!("p_and{k:?} differs from its definition"));
            }
            *per_b.entry(k.0).or_default() += conjs.len();
        }
        for (k, e) in &and {
            if !e.is_empty() && !self.p_and.contains_key(k) {
                return Err(format!("p_and{k:?} is missing"));
            }
        }
        if let Some((b, total)) = per_b.into_iter().find(|&(_, t)| t > 2 * n) {
            return Err(format!("p_and({b}, ·) holds {total} > 2·{n} entries"));
        }
        Ok(())
    }
}

/// `prepare_goal` followed by `saturate`, with statistics.
pub fn prove(
    store: &mut FormulaStore,
    lhs: FormulaId,
    rhs: FormulaId,
    axioms: &[(FormulaId, FormulaId)],
    limits: Limits,
) -> Result<ProofReport, LimitExceeded> {
    prove_with(store, lhs, rhs, axioms, limits, ProverOptions::default()).map(|(r, _)| r)
}

/// Like [`prove`], also returning the prepared goal and final state.
pub fn prove_with(
    store: &mut FormulaStore,
    lhs: FormulaId,
    rhs: FormulaId,
    axioms: &[(FormulaId, FormulaId)],
    limits: Limits,
    options: ProverOptions,
) -> Result<(ProofReport, Prepared), LimitExceeded> {
    let start = Instant::now();
    let mut prepared = prepare_goal(store, lhs, rhs, axioms, options);
    let verdict = prepared.state.saturate(limits)?;
    let stats = ProofStats {
        proven: prepared.state.proven_count(),
        attempts: prepared.state.attempts(),
        universe: prepared.state.universe.len(),
        elapsed: start.elapsed(),
    };
    Ok((ProofReport { verdict, stats }, prepared))
}

/// Replays every derivation record against the rule schemas. Cut formulas
/// must be axiom formulas and premises must have been proven earlier.
pub fn check_derivations(store: &FormulaStore, prepared: &Prepared) -> Result<(), DerivationError> {
    let state = &prepared.state;
    let Some(records) = state.closure.records.as_ref() else {
        return Ok(());
    };
    let mut keys: Vec<u64> = state.closure.proven.iter().copied().collect();
    keys.sort_unstable();
    for k in keys {
        let concl = state.sequent(k);
        let fail = |reason: &str| DerivationError {
            sequent: concl,
            reason: reason.to_owned(),
        };
        let Some(raw) = records.get(&k) else {
            return Err(fail("no derivation record"));
        };
        let rec = state.export_record(raw);
        for p in &rec.premises {
            let Some(pr) = state
                .local
                .get(&p.first)
                .zip(state.local.get(&p.second))
                .and_then(|(&a, &b)| records.get(&key(a, b)))
            else {
                return Err(fail("premise is not proven"));
            };
            if pr.order >= raw.order {
                return Err(fail("premise was proven after the conclusion"));
            }
        }
        let ok = match rec.rule {
            Rule::Ax => rec.premises.is_empty() && state.axioms.contains(&k),
            Rule::Hyp => {
                rec.premises.is_empty()
                    && [(concl.first, concl.second), (concl.second, concl.first)]
                        .iter()
                        .any(|&(x, nx)| {
                            matches!(store.node(x), Node::Var(_)) && store.node(nx) == Node::Not(x)
                        })
            }
            Rule::OrR => {
                rec.premises.len() == 1
                    && orientations(concl).any(|(phi, c)| match store.node(phi) {
                        Node::Or(l, r) => {
                            rec.premises[0] == Sequent::new(l, c)
                                || rec.premises[0] == Sequent::new(r, c)
                        }
                        _ => false,
                    })
            }
            Rule::AndR => {
                rec.premises.len() == 2
                    && orientations(concl).any(|(phi, c)| match store.node(phi) {
                        Node::And(l, r) => {
                            let (p, q) = (Sequent::new(l, c), Sequent::new(r, c));
                            (rec.premises[0] == p && rec.premises[1] == q)
                                || (rec.premises[0] == q && rec.premises[1] == p)
                        }
                        _ => false,
                    })
            }
            Rule::Cut => match rec.cut_formula {
                Some(gamma)
                    if prepared.axioms.is_axiom_formula(gamma) && rec.premises.len() == 2 =>
                {
                    let inv = store.cached_inverse(gamma);
                    let (p1, p2) = (rec.premises[0], rec.premises[1]);
                    [(p1, p2), (p2, p1)].iter().any(|&(x, y)| {
                        match (x.other(gamma), inv.and_then(|i| y.other(i))) {
                            (Some(p), Some(q)) => Sequent::new(p, q) == concl,
                            _ => false,
                        }
                    })
                }
                _ => false,
            },
            Rule::Replace => {
                rec.premises.len() == 1
                    && rec.premises[0].first == rec.premises[0].second
                    && concl.contains(rec.premises[0].first)
            }
        };
        if !ok {
            return Err(fail(&format!("does not instantiate {:?}", rec.rule)));
        }
    }
    Ok(())
}

fn orientations(s: Sequent) -> impl Iterator<Item = (FormulaId, FormulaId)> {
    [(s.first, s.second), (s.second, s.first)].into_iter()
}
