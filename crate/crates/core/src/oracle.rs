//! Slow reference deciders and formula generators.
//!
//! Nothing here shares code with the saturation engine beyond the formula
//! store: [`naive_prove`] reads the proof rules backwards and searches
//! exhaustively, [`brute_force_tautology`] enumerates assignments.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustc_hash::{FxHashMap, FxHashSet};
use thiserror::Error;

use crate::circuits::CnfInstance;
use crate::entailment::{AxiomSet, Sequent, Verdict};
use crate::formula::{Evaluator, FormulaId, FormulaStore, Node, VarId};

pub const MAX_BRUTE_FORCE_VARS: usize = 20;
pub const MAX_POOL_VARS: usize = 3;
pub const MAX_POOL_CONNECTIVES: usize = 9;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OracleError {
    #[error("backward search exceeded depth {0}")]
    DepthExceeded(usize),
    #[error("backward search exceeded {0} expanded sequents")]
    BudgetExceeded(u64),
    #[error("{0} variables exceed the brute-force limit of {MAX_BRUTE_FORCE_VARS}")]
    TooManyVars(usize),
    #[error("pool bound ({vars} vars, {connectives} connectives) exceeds the guard")]
    PoolGuard { vars: usize, connectives: usize },
}

/// Default depth bound for [`naive_prove`] over a universe of `n` formulas.
pub fn default_depth_limit(universe: usize) -> usize {
    2 * (universe * universe + 1)
}

struct Backward<'a> {
    store: &'a FormulaStore,
    axioms: FxHashSet<Sequent>,
    cut_formulas: &'a [FormulaId],
    path: FxHashSet<Sequent>,
    derived: FxHashSet<Sequent>,
    limit: usize,
    hard_limit: bool,
    truncated: bool,
    expanded: u64,
    budget: u64,
    models: Vec<Countermodels>,
}

/// Valuation budget per lattice for countermodel pruning; lattices whose
/// valuation space exceeds it are skipped.
pub const MAX_PRUNING_VALUATIONS: usize = 1 << 16;

/// A finite ortholattice given by its order and complement.
struct FiniteLattice {
    leq: Vec<Vec<bool>>,
    comp: Vec<u8>,
    meet: Vec<Vec<u8>>,
    join: Vec<Vec<u8>>,
    bot: u8,
    top: u8,
}

impl FiniteLattice {
    /// `covers` lists strict order pairs; `comp` is the orthocomplement.
    /// Element 0 is the bottom and element `comp[0]` the top.
    fn new(size: usize, covers: &[(u8, u8)], comp: &[u8]) -> Self {
        let mut leq = vec![vec![false; size]; size];
        for (x, row) in leq.iter_mut().enumerate() {
            row[x] = true;
            row[comp[0] as usize] = true;
        }
        for row in leq[0].iter_mut() {
            *row = true;
        }
        for &(x, y) in covers {
            leq[x as usize][y as usize] = true;
        }
        let bound = |upper: bool, x: usize, y: usize| -> u8 {
            let ok = |z: usize| {
                if upper {
                    leq[x][z] && leq[y][z]
                } else {
                    leq[z][x] && leq[z][y]
                }
            };
            let best = (0..size)
                .filter(|&z| ok(z))
                .find(|&z| {
                    (0..size)
                        .filter(|&w| ok(w))
                        .all(|w| if upper { leq[z][w] } else { leq[w][z] })
                })
                .expect("lattice bounds exist");
            best as u8
        };
        let table = |upper: bool| {
            (0..size)
                .map(|x| (0..size).map(|y| bound(upper, x, y)).collect())
                .collect()
        };
        FiniteLattice {
            meet: table(false),
            join: table(true),
            comp: comp.to_vec(),
            leq,
            bot: 0,
            top: comp[0],
        }
    }

    fn all() -> Vec<Self> {
        vec![Self::boolean(), Self::mo2(), Self::benzene()]
    }

    fn size(&self) -> usize {
        self.comp.len()
    }

    /// Sequent `(p, q)` holds when the complement of `p` lies below `q`.
    fn holds(&self, p: u8, q: u8) -> bool {
        self.leq[self.comp[p as usize] as usize][q as usize]
    }

    fn boolean() -> Self {
        Self::new(2, &[], &[1, 0])
    }

    /// Two incomparable complemented pairs.
    fn mo2() -> Self {
        Self::new(6, &[], &[5, 2, 1, 4, 3, 0])
    }

    /// The benzene lattice: a < b and b' < a'. Not orthomodular.
    fn benzene() -> Self {
        Self::new(6, &[(1, 2), (3, 4)], &[5, 4, 3, 2, 1, 0])
    }
}

/// Valuations of the goal variables in one finite ortholattice, restricted
/// to those satisfying every axiom. A sequent failing under one of them has
/// no derivation, since derivable sequents hold in every ortholattice model
/// of the axioms.
struct Countermodels {
    lattice: FiniteLattice,
    valuations: usize,
    vars: FxHashMap<VarId, usize>,
    tables: FxHashMap<FormulaId, Vec<u8>>,
    allowed: Vec<bool>,
}

impl Countermodels {
    fn new(
        store: &FormulaStore,
        lattice: FiniteLattice,
        vars: &[VarId],
        axioms: &AxiomSet,
    ) -> Option<Self> {
        let valuations = (0..vars.len()).try_fold(1usize, |acc, _| {
            acc.checked_mul(lattice.size())
                .filter(|&v| v <= MAX_PRUNING_VALUATIONS)
        })?;
        let mut models = Countermodels {
            lattice,
            valuations,
            vars: vars.iter().enumerate().map(|(k, &v)| (v, k)).collect(),
            tables: FxHashMap::default(),
            allowed: vec![true; valuations],
        };
        for a in &axioms.axioms {
            models.table(store, a.first());
            models.table(store, a.second());
            let (x, y) = (&models.tables[&a.first()], &models.tables[&a.second()]);
            for (i, ok) in models.allowed.iter_mut().enumerate() {
                *ok &= models.lattice.holds(x[i], y[i]);
            }
        }
        Some(models)
    }

    fn table(&mut self, store: &FormulaStore, f: FormulaId) {
        if self.tables.contains_key(&f) {
            return;
        }
        let size = self.lattice.size();
        for g in store.postorder_until(&[f], |g| self.tables.contains_key(&g)) {
            if self.tables.contains_key(&g) {
                continue;
            }
            let l = &self.lattice;
            let t: Vec<u8> = match store.node(g) {
                Node::Var(v) => {
                    let stride = size.pow(self.vars[&v] as u32);
                    (0..self.valuations)
                        .map(|i| ((i / stride) % size) as u8)
                        .collect()
                }
                Node::Not(c) => self.tables[&c]
                    .iter()
                    .map(|&x| l.comp[x as usize])
                    .collect(),
                Node::And(a, b) => {
                    let (x, y) = (&self.tables[&a], &self.tables[&b]);
                    x.iter()
                        .zip(y)
                        .map(|(&x, &y)| l.meet[x as usize][y as usize])
                        .collect()
                }
                Node::Or(a, b) => {
                    let (x, y) = (&self.tables[&a], &self.tables[&b]);
                    x.iter()
                        .zip(y)
                        .map(|(&x, &y)| l.join[x as usize][y as usize])
                        .collect()
                }
                Node::Top => vec![l.top; self.valuations],
                Node::Bot => vec![l.bot; self.valuations],
            };
            self.tables.insert(g, t);
        }
    }

    fn refutes(&mut self, store: &FormulaStore, s: Sequent) -> bool {
        let (p, q) = (s.first(), s.second());
        self.table(store, p);
        self.table(store, q);
        let (x, y) = (&self.tables[&p], &self.tables[&q]);
        (0..self.valuations).any(|i| self.allowed[i] && !self.lattice.holds(x[i], y[i]))
    }
}

fn countermodels(store: &FormulaStore, goal: Sequent, axioms: &AxiomSet) -> Vec<Countermodels> {
    let mut roots = vec![goal.first(), goal.second()];
    for a in &axioms.axioms {
        roots.extend([a.first(), a.second()]);
    }
    let vars = store.variables(&roots);
    FiniteLattice::all()
        .into_iter()
        .filter_map(|l| Countermodels::new(store, l, &vars, axioms))
        .collect()
}

impl Backward<'_> {
    fn inverse(&self, f: FormulaId) -> FormulaId {
        self.store
            .cached_inverse(f)
            .expect("goal formulas come from prepare_goal")
    }

    fn search(&mut self, s: Sequent, depth: usize) -> Result<bool, OracleError> {
        if depth > self.limit {
            if self.hard_limit {
                return Err(OracleError::DepthExceeded(self.limit));
            }
            self.truncated = true;
            return Ok(false);
        }
        if self.axioms.contains(&s) || self.derived.contains(&s) {
            return Ok(true);
        }
        let (p, q) = (s.first(), s.second());
        if self.store.is_literal(p) && self.store.cached_inverse(q) == Some(p) {
            return Ok(true);
        }
        let store = self.store;
        if self.models.iter_mut().any(|m| m.refutes(store, s)) {
            return Ok(false);
        }
        if !self.path.insert(s) {
            return Ok(false);
        }
        self.expanded += 1;
        if self.expanded > self.budget {
            self.path.remove(&s);
            return Err(OracleError::BudgetExceeded(self.budget));
        }
        let found = self.expand(p, q, depth + 1);
        self.path.remove(&s);
        if let Ok(true) = found {
            self.derived.insert(s);
        }
        found
    }

    fn expand(&mut self, p: FormulaId, q: FormulaId, depth: usize) -> Result<bool, OracleError> {
        for (x, y) in [(p, q), (q, p)] {
            match self.store.node(x) {
                Node::Or(l, r) => {
                    if self.search(Sequent::new(l, y), depth)?
                        || self.search(Sequent::new(r, y), depth)?
                    {
                        return Ok(true);
                    }
                }
                Node::And(l, r)
                    if self.search(Sequent::new(l, y), depth)?
                        && self.search(Sequent::new(r, y), depth)? =>
                {
                    return Ok(true);
                }
                _ => {}
            }
        }
        for x in [p, q] {
            if self.search(Sequent::new(x, x), depth)? {
                return Ok(true);
            }
        }
        for &gamma in self.cut_formulas {
            if self.search(Sequent::new(p, gamma), depth)?
                && self.search(Sequent::new(self.inverse(gamma), q), depth)?
            {
                return Ok(true);
            }
        }
        Ok(false)
    }
}

/// Exhaustive backward proof search with Cut restricted to axiom formulas.
/// Branches that revisit a sequent of the current path fail. Only successes
/// are remembered across branches, never failures. Subgoals refuted by a valuation in a small
/// finite ortholattice satisfying the axioms are cut off early, and the depth
/// bound is deepened iteratively up to `depth_limit`.
pub fn naive_prove(
    store: &FormulaStore,
    goal: Sequent,
    axioms: &AxiomSet,
    depth_limit: usize,
) -> Result<Verdict, OracleError> {
    naive_prove_within(store, goal, axioms, depth_limit, u64::MAX)
}

/// [`naive_prove`] that gives up after expanding `budget` sequents in total.
pub fn naive_prove_within(
    store: &FormulaStore,
    goal: Sequent,
    axioms: &AxiomSet,
    depth_limit: usize,
    budget: u64,
) -> Result<Verdict, OracleError> {
    let mut search = Backward {
        store,
        axioms: axioms.axioms.iter().copied().collect(),
        cut_formulas: axioms.formulas(),
        path: FxHashSet::default(),
        derived: FxHashSet::default(),
        limit: 4.min(depth_limit),
        hard_limit: false,
        truncated: false,
        expanded: 0,
        budget,
        models: countermodels(store, goal, axioms),
    };
    loop {
        search.hard_limit = search.limit >= depth_limit;
        search.truncated = false;
        if search.search(goal, 0)? {
            return Ok(Verdict::Proved);
        }
        if !search.truncated {
            return Ok(Verdict::NotProvable);
        }
        search.limit = (search.limit * 2).min(depth_limit);
    }
}

/// Least fixed point of the proof rules over the pairs of the inverse-closed
/// universe of `goal` and `axioms`, recomputed by full rescans until nothing
/// changes. Polynomial, and shares nothing with the saturation engine.
pub fn fixpoint_prove(store: &FormulaStore, goal: Sequent, axioms: &AxiomSet) -> Verdict {
    let mut roots = vec![goal.first(), goal.second()];
    for a in &axioms.axioms {
        roots.extend([a.first(), a.second()]);
    }
    let inverse = |f: FormulaId| {
        store
            .cached_inverse(f)
            .expect("goal formulas come from prepare_goal")
    };
    let inverses: Vec<_> = roots.iter().map(|&f| inverse(f)).collect();
    roots.extend(inverses);
    let universe = store.postorder(&roots);
    let mut proven: FxHashSet<Sequent> = axioms.axioms.iter().copied().collect();
    loop {
        let mut changed = false;
        for (i, &p) in universe.iter().enumerate() {
            for &q in &universe[i..] {
                let s = Sequent::new(p, q);
                if proven.contains(&s) {
                    continue;
                }
                let has = |x: FormulaId, y: FormulaId| proven.contains(&Sequent::new(x, y));
                let rule = |x: FormulaId, y: FormulaId| match store.node(x) {
                    Node::Or(l, r) => has(l, y) || has(r, y),
                    Node::And(l, r) => has(l, y) && has(r, y),
                    _ => false,
                };
                let derivable = (store.is_literal(p) && inverse(q) == p)
                    || rule(p, q)
                    || rule(q, p)
                    || has(p, p)
                    || has(q, q)
                    || axioms
                        .formulas()
                        .iter()
                        .any(|&g| has(p, g) && has(inverse(g), q));
                if derivable {
                    proven.insert(s);
                    changed = true;
                }
            }
        }
        if proven.contains(&goal) {
            return Verdict::Proved;
        }
        if !changed {
            return Verdict::NotProvable;
        }
    }
}

/// True iff `f` evaluates to true under every assignment of its variables.
pub fn brute_force_tautology(store: &FormulaStore, f: FormulaId) -> Result<bool, OracleError> {
    let ev = Evaluator::new(store, &[f]);
    let n = ev.vars().len();
    if n > MAX_BRUTE_FORCE_VARS {
        return Err(OracleError::TooManyVars(n));
    }
    let mut values = Vec::new();
    Ok((0..1u64 << n).all(|mask| {
        ev.run(mask, &mut values);
        ev.root(0, &values)
    }))
}

/// True iff `f` and `g` agree under every assignment.
pub fn brute_force_equivalent(
    store: &FormulaStore,
    f: FormulaId,
    g: FormulaId,
) -> Result<bool, OracleError> {
    let ev = Evaluator::new(store, &[f, g]);
    let n = ev.vars().len();
    if n > MAX_BRUTE_FORCE_VARS {
        return Err(OracleError::TooManyVars(n));
    }
    let mut values = Vec::new();
    Ok((0..1u64 << n).all(|mask| {
        ev.run(mask, &mut values);
        ev.root(0, &values) == ev.root(1, &values)
    }))
}

/// Exhaustive DPLL search with unit propagation and no learning, branching
/// on the lowest unassigned variable. Returns a model indexed by variable
/// (entry 0 unused) when one exists.
pub fn exhaustive_sat(cnf: &CnfInstance) -> Option<Vec<bool>> {
    let n = cnf.num_vars as usize;
    let index = |l: i32| 2 * l.unsigned_abs() as usize + usize::from(l < 0);
    let mut occurs = vec![Vec::new(); 2 * n + 2];
    for (k, c) in cnf.clauses.iter().enumerate() {
        for &l in c {
            occurs[index(l)].push(k);
        }
    }
    // 0 unassigned, 1 true, -1 false
    let mut value = vec![0i8; n + 1];
    let mut trail: Vec<i32> = Vec::new();
    let truth =
        |value: &[i8], l: i32| value[l.unsigned_abs() as usize] * if l > 0 { 1 } else { -1 };

    // assigns `start` and everything it implies; false on conflict
    let propagate = |value: &mut Vec<i8>, trail: &mut Vec<i32>, start: &[i32]| -> bool {
        let mut queue = Vec::new();
        for &l in start {
            match truth(value, l) {
                1 => {}
                -1 => return false,
                _ => {
                    value[l.unsigned_abs() as usize] = if l > 0 { 1 } else { -1 };
                    trail.push(l);
                    queue.push(l);
                }
            }
        }
        while let Some(l) = queue.pop() {
            for &k in &occurs[index(-l)] {
                let mut open = None;
                let mut open_count = 0;
                let mut satisfied = false;
                for &m in &cnf.clauses[k] {
                    match truth(value, m) {
                        1 => {
                            satisfied = true;
                            break;
                        }
                        0 => {
                            open_count += 1;
                            open = Some(m);
                        }
                        _ => {}
                    }
                }
                if satisfied {
                    continue;
                }
                match (open_count, open) {
                    (0, _) => return false,
                    (1, Some(m)) => {
                        value[m.unsigned_abs() as usize] = if m > 0 { 1 } else { -1 };
                        trail.push(m);
                        queue.push(m);
                    }
                    _ => {}
                }
            }
        }
        true
    };

    let units: Vec<i32> = cnf
        .clauses
        .iter()
        .filter(|c| c.len() == 1)
        .map(|c| c[0])
        .collect();
    if !propagate(&mut value, &mut trail, &units) {
        return None;
    }
    // (trail length before the decision, variable, second branch taken)
    let mut decisions: Vec<(usize, i32, bool)> = Vec::new();
    loop {
        let Some(var) = (1..=n).find(|&v| value[v] == 0) else {
            return Some(value.iter().map(|&v| v > 0).collect());
        };
        decisions.push((trail.len(), var as i32, false));
        let mut ok = propagate(&mut value, &mut trail, &[var as i32]);
        while !ok {
            let (len, var, flipped) = decisions.pop()?;
            for l in trail.drain(len..) {
                value[l.unsigned_abs() as usize] = 0;
            }
            if !flipped {
                decisions.push((len, var, true));
                ok = propagate(&mut value, &mut trail, &[-var]);
            }
        }
    }
}

pub fn pool_var_name(k: usize) -> String {
    format!("v{k}")
}

/// Deterministic enumeration of the NNF formulas over `v0..v(vars-1)` by
/// increasing connective count. Levels are built lazily as the iterator
/// reaches them.
pub struct Enumeration<'s> {
    store: &'s mut FormulaStore,
    levels: Vec<Vec<FormulaId>>,
    max_connectives: usize,
    level: usize,
    pos: usize,
}

impl Iterator for Enumeration<'_> {
    type Item = FormulaId;

    fn next(&mut self) -> Option<FormulaId> {
        loop {
            if let Some(&f) = self.levels.get(self.level).and_then(|l| l.get(self.pos)) {
                self.pos += 1;
                return Some(f);
            }
            if self.level >= self.max_connectives {
                return None;
            }
            self.level += 1;
            self.pos = 0;
            self.build_level(self.level);
        }
    }
}

impl Enumeration<'_> {
    fn build_level(&mut self, c: usize) {
        let mut out = Vec::new();
        for op in 0..2 {
            for left in 0..c {
                let right = c - 1 - left;
                for i in 0..self.levels[left].len() {
                    for j in 0..self.levels[right].len() {
                        let (l, r) = (self.levels[left][i], self.levels[right][j]);
                        out.push(if op == 0 {
                            self.store.and(l, r)
                        } else {
                            self.store.or(l, r)
                        });
                    }
                }
            }
        }
        self.levels.push(out);
    }
}

pub fn enumerate_formulas(
    store: &mut FormulaStore,
    vars: usize,
    max_connectives: usize,
) -> Result<Enumeration<'_>, OracleError> {
    if vars == 0 || vars > MAX_POOL_VARS || max_connectives > MAX_POOL_CONNECTIVES {
        return Err(OracleError::PoolGuard {
            vars,
            connectives: max_connectives,
        });
    }
    let mut literals = Vec::new();
    for k in 0..vars {
        let x = store.var(&pool_var_name(k));
        literals.push(x);
        literals.push(store.not(x));
    }
    Ok(Enumeration {
        store,
        levels: vec![literals],
        max_connectives,
        level: 0,
        pos: 0,
    })
}

/// A seeded random NNF formula over `v0..v(vars-1)` with exactly
/// `connectives` distinct And/Or nodes.
///
/// Tree shapes are uniform (Rémy's algorithm); connectives, variables and
/// leaf polarities are uniform. Draws in which hash-consing merges two
/// identical subtrees are rejected, so the count holds unless 10 000
/// consecutive draws all collapse, in which case the last draw is returned.
pub fn random_formula(
    store: &mut FormulaStore,
    seed: u64,
    vars: usize,
    connectives: usize,
) -> FormulaId {
    assert!(vars > 0, "need at least one variable");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut last = None;
    for _ in 0..10_000 {
        let f = random_tree(store, &mut rng, vars, connectives);
        if store.connective_count(f) == connectives {
            return f;
        }
        last = Some(f);
    }
    last.expect("at least one draw")
}

fn random_tree(
    store: &mut FormulaStore,
    rng: &mut ChaCha8Rng,
    vars: usize,
    connectives: usize,
) -> FormulaId {
    // Rémy: grow a uniform binary tree by grafting a new leaf onto a
    // uniformly chosen edge.
    let mut children: Vec<Option<(usize, usize)>> = vec![None];
    let mut parent: Vec<Option<usize>> = vec![None];
    let mut root = 0;
    for _ in 0..connectives {
        let x = rng.gen_range(0..children.len());
        let y = children.len();
        let z = y + 1;
        children.push(Some(if rng.gen_bool(0.5) { (x, z) } else { (z, x) }));
        parent.push(parent[x]);
        children.push(None);
        parent.push(Some(y));
        match parent[x] {
            Some(p) => {
                let (l, r) = children[p].expect("parent is internal");
                children[p] = Some(if l == x { (y, r) } else { (l, y) });
            }
            None => root = y,
        }
        parent[x] = Some(y);
    }
    let mut built: Vec<Option<FormulaId>> = vec![None; children.len()];
    let mut stack = vec![(root, false)];
    while let Some((i, expanded)) = stack.pop() {
        match children[i] {
            None => {
                let x = store.var(&pool_var_name(rng.gen_range(0..vars)));
                built[i] = Some(if rng.gen_bool(0.5) { x } else { store.not(x) });
            }
            Some((l, r)) if expanded => {
                let (l, r) = (built[l].expect("built"), built[r].expect("built"));
                built[i] = Some(if rng.gen_bool(0.5) {
                    store.and(l, r)
                } else {
                    store.or(l, r)
                });
            }
            Some((l, r)) => {
                stack.push((i, true));
                stack.push((r, false));
                stack.push((l, false));
            }
        }
    }
    built[root].expect("root built")
}
