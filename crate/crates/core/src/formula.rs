//! Hash-consed propositional formulas.
//!
//! Every structurally distinct formula is stored exactly once in a
//! [`FormulaStore`] and is referred to by a dense [`FormulaId`]. Equality of
//! ids is therefore equality of formulas, which is what lets the prover keep
//! its hash maps keyed by plain integers.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;

use rustc_hash::FxHashMap;
use thiserror::Error;

/// Identity of an interned formula. Dense, starting at zero.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct FormulaId(u32);

impl FormulaId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for FormulaId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// Identity of a variable name within a store.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct VarId(u32);

impl VarId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// One node of the formula DAG. Connectives are strictly binary.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum Node {
    Var(VarId),
    Not(FormulaId),
    And(FormulaId, FormulaId),
    Or(FormulaId, FormulaId),
    Top,
    Bot,
}

impl Node {
    pub fn kind(&self) -> Kind {
        match self {
            Node::Var(_) => Kind::Var,
            Node::Not(_) => Kind::Not,
            Node::And(..) => Kind::And,
            Node::Or(..) => Kind::Or,
            Node::Top => Kind::Top,
            Node::Bot => Kind::Bot,
        }
    }

    /// Children in left-to-right order.
    pub fn children(&self) -> impl Iterator<Item = FormulaId> {
        let (a, b) = match *self {
            Node::Not(c) => (Some(c), None),
            Node::And(l, r) | Node::Or(l, r) => (Some(l), Some(r)),
            _ => (None, None),
        };
        a.into_iter().chain(b)
    }
}

/// Node kind without its payload, used by [`FormulaStore::intern`].
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum Kind {
    Var,
    Not,
    And,
    Or,
    Top,
    Bot,
}

impl Kind {
    pub fn arity(self) -> usize {
        match self {
            Kind::Var | Kind::Top | Kind::Bot => 0,
            Kind::Not => 1,
            Kind::And | Kind::Or => 2,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FormulaError {
    #[error("{kind:?} expects {expected} children, got {got}")]
    Arity {
        kind: Kind,
        expected: usize,
        got: usize,
    },
    #[error("a variable needs a name")]
    MissingName,
    #[error("unknown formula id {0}")]
    UnknownId(FormulaId),
    #[error("formula {0} is not in negation normal form")]
    NotNnf(FormulaId),
    #[error("variable `{0}` is not assigned")]
    Unassigned(String),
    #[error("{line}:{col}: {msg}")]
    Syntax {
        line: usize,
        col: usize,
        msg: String,
    },
}

/// Append-only arena of hash-consed formulas.
///
/// Besides the cons table, each node carries two memo slots: its negation
/// normal form and, for NNF nodes, its inverse (the NNF of its negation).
/// Once set, neither slot changes.
#[derive(Debug, Default, Clone)]
pub struct FormulaStore {
    nodes: Vec<Node>,
    cons: FxHashMap<Node, FormulaId>,
    is_nnf: Vec<bool>,
    nnf: Vec<Option<FormulaId>>,
    inverse: Vec<Option<FormulaId>>,
    var_names: Vec<String>,
    var_ids: FxHashMap<String, VarId>,
}

impl FormulaStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of nodes ever interned.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, f: FormulaId) -> Node {
        self.nodes[f.index()]
    }

    pub fn contains(&self, f: FormulaId) -> bool {
        f.index() < self.nodes.len()
    }

    pub fn var_name(&self, v: VarId) -> &str {
        &self.var_names[v.index()]
    }

    pub fn var_id(&self, name: &str) -> Option<VarId> {
        self.var_ids.get(name).copied()
    }

    pub fn num_vars(&self) -> usize {
        self.var_names.len()
    }

    fn var_id_or_insert(&mut self, name: &str) -> VarId {
        if let Some(&v) = self.var_ids.get(name) {
            return v;
        }
        let v = VarId(self.var_names.len() as u32);
        self.var_names.push(name.to_owned());
        self.var_ids.insert(name.to_owned(), v);
        v
    }

    /// Interns a node whose children are already in the store. Purely
    /// structural: no simplification of any kind happens here.
    pub fn mk(&mut self, node: Node) -> FormulaId {
        if let Some(&id) = self.cons.get(&node) {
            return id;
        }
        debug_assert!(node.children().all(|c| self.contains(c)));
        let id = FormulaId(self.nodes.len() as u32);
        let nnf = match node {
            Node::Var(_) | Node::Top | Node::Bot => true,
            Node::Not(c) => matches!(self.nodes[c.index()], Node::Var(_)),
            Node::And(l, r) | Node::Or(l, r) => self.is_nnf[l.index()] && self.is_nnf[r.index()],
        };
        self.nodes.push(node);
        self.is_nnf.push(nnf);
        self.nnf.push(nnf.then_some(id));
        self.inverse.push(None);
        self.cons.insert(node, id);
        id
    }

    /// Checked interning from a kind and a child list.
    pub fn intern(
        &mut self,
        kind: Kind,
        name: Option<&str>,
        children: &[FormulaId],
    ) -> Result<FormulaId, FormulaError> {
        if children.len() != kind.arity() {
            return Err(FormulaError::Arity {
                kind,
                expected: kind.arity(),
                got: children.len(),
            });
        }
        if let Some(&c) = children.iter().find(|c| !self.contains(**c)) {
            return Err(FormulaError::UnknownId(c));
        }
        let node = match kind {
            Kind::Var => Node::Var(self.var_id_or_insert(name.ok_or(FormulaError::MissingName)?)),
            Kind::Not => Node::Not(children[0]),
            Kind::And => Node::And(children[0], children[1]),
            Kind::Or => Node::Or(children[0], children[1]),
            Kind::Top => Node::Top,
            Kind::Bot => Node::Bot,
        };
        Ok(self.mk(node))
    }

    pub fn var(&mut self, name: &str) -> FormulaId {
        let v = self.var_id_or_insert(name);
        self.mk(Node::Var(v))
    }

    pub fn not(&mut self, f: FormulaId) -> FormulaId {
        self.mk(Node::Not(f))
    }

    pub fn and(&mut self, l: FormulaId, r: FormulaId) -> FormulaId {
        self.mk(Node::And(l, r))
    }

    pub fn or(&mut self, l: FormulaId, r: FormulaId) -> FormulaId {
        self.mk(Node::Or(l, r))
    }

    pub fn top(&mut self) -> FormulaId {
        self.mk(Node::Top)
    }

    pub fn bot(&mut self) -> FormulaId {
        self.mk(Node::Bot)
    }

    /// Whether the whole DAG below `f` is in negation normal form.
    pub fn is_nnf(&self, f: FormulaId) -> bool {
        self.is_nnf[f.index()]
    }

    /// Whether `f` is a variable or a negated variable.
    pub fn is_literal(&self, f: FormulaId) -> bool {
        match self.node(f) {
            Node::Var(_) => true,
            Node::Not(c) => matches!(self.node(c), Node::Var(_)),
            _ => false,
        }
    }

    /// Nodes reachable from `roots`, children before parents. Nodes for which
    /// `stop` holds are emitted but not descended into.
    pub fn postorder_until(
        &self,
        roots: &[FormulaId],
        mut stop: impl FnMut(FormulaId) -> bool,
    ) -> Vec<FormulaId> {
        let mut seen = vec![false; self.nodes.len()];
        let mut order = Vec::new();
        let mut stack: Vec<(FormulaId, bool)> = roots.iter().rev().map(|&r| (r, false)).collect();
        while let Some((f, expanded)) = stack.pop() {
            if expanded {
                order.push(f);
                continue;
            }
            if seen[f.index()] {
                continue;
            }
            seen[f.index()] = true;
            stack.push((f, true));
            if stop(f) {
                continue;
            }
            let node = self.nodes[f.index()];
            let children: Vec<_> = node.children().collect();
            for &c in children.iter().rev() {
                if !seen[c.index()] {
                    stack.push((c, false));
                }
            }
        }
        order
    }

    /// All distinct subformulas of `roots`, children before parents.
    pub fn postorder(&self, roots: &[FormulaId]) -> Vec<FormulaId> {
        self.postorder_until(roots, |_| false)
    }

    /// Number of distinct nodes reachable from `f`.
    pub fn size(&self, f: FormulaId) -> usize {
        self.postorder(&[f]).len()
    }

    /// Number of distinct And/Or nodes reachable from `f`.
    pub fn connective_count(&self, f: FormulaId) -> usize {
        self.connective_count_all(&[f])
    }

    /// Distinct And/Or nodes reachable from any of `roots`.
    pub fn connective_count_all(&self, roots: &[FormulaId]) -> usize {
        self.postorder(roots)
            .into_iter()
            .filter(|&g| matches!(self.node(g), Node::And(..) | Node::Or(..)))
            .count()
    }

    /// Variables occurring in `roots`, in natural name order.
    pub fn variables(&self, roots: &[FormulaId]) -> Vec<VarId> {
        let mut vars: Vec<VarId> = self
            .postorder(roots)
            .into_iter()
            .filter_map(|g| match self.node(g) {
                Node::Var(v) => Some(v),
                _ => None,
            })
            .collect();
        vars.sort_by(|a, b| natural_cmp(self.var_name(*a), self.var_name(*b)));
        vars
    }

    /// Negation normal form of `f`, memoized on every visited node.
    pub fn nnf(&mut self, f: FormulaId) -> FormulaId {
        if let Some(n) = self.nnf[f.index()] {
            return n;
        }
        let order = self.postorder_until(&[f], |g| self.nnf[g.index()].is_some());
        for g in order {
            if self.nnf[g.index()].is_some() {
                continue;
            }
            let n = match self.node(g) {
                Node::Var(_) | Node::Top | Node::Bot => g,
                Node::And(l, r) => {
                    let (l, r) = (self.nnf_cached(l), self.nnf_cached(r));
                    self.and(l, r)
                }
                Node::Or(l, r) => {
                    let (l, r) = (self.nnf_cached(l), self.nnf_cached(r));
                    self.or(l, r)
                }
                Node::Not(c) => {
                    let c = self.nnf_cached(c);
                    self.inverse_of_nnf(c)
                }
            };
            self.nnf[g.index()] = Some(n);
        }
        self.nnf[f.index()].expect("nnf computed")
    }

    fn nnf_cached(&self, f: FormulaId) -> FormulaId {
        self.nnf[f.index()].expect("children are processed first")
    }

    /// The NNF of `¬f` for an NNF formula `f`, by structural recursion.
    /// Memoized in both directions, so it is an involution on ids.
    pub fn get_inverse(&mut self, f: FormulaId) -> Result<FormulaId, FormulaError> {
        if !self.contains(f) {
            return Err(FormulaError::UnknownId(f));
        }
        if !self.is_nnf(f) {
            return Err(FormulaError::NotNnf(f));
        }
        Ok(self.inverse_of_nnf(f))
    }

    /// Cached inverse if already computed.
    pub fn cached_inverse(&self, f: FormulaId) -> Option<FormulaId> {
        self.inverse[f.index()]
    }

    fn inverse_of_nnf(&mut self, f: FormulaId) -> FormulaId {
        if let Some(i) = self.inverse[f.index()] {
            return i;
        }
        let order = self.postorder_until(&[f], |g| {
            self.inverse[g.index()].is_some() || matches!(self.nodes[g.index()], Node::Not(_))
        });
        for g in order {
            if self.inverse[g.index()].is_some() {
                continue;
            }
            let inv = match self.node(g) {
                Node::Var(_) => self.not(g),
                Node::Not(c) => c,
                Node::Top => self.bot(),
                Node::Bot => self.top(),
                Node::And(l, r) => {
                    let (l, r) = (self.inverse_cached(l), self.inverse_cached(r));
                    self.or(l, r)
                }
                Node::Or(l, r) => {
                    let (l, r) = (self.inverse_cached(l), self.inverse_cached(r));
                    self.and(l, r)
                }
            };
            self.inverse[g.index()] = Some(inv);
            self.inverse[inv.index()] = Some(g);
        }
        self.inverse[f.index()].expect("inverse computed")
    }

    fn inverse_cached(&self, f: FormulaId) -> FormulaId {
        self.inverse[f.index()].expect("children are processed first")
    }

    /// Classical evaluation. `assign` maps a variable to its value.
    pub fn evaluate_with(
        &self,
        f: FormulaId,
        mut assign: impl FnMut(VarId) -> Option<bool>,
    ) -> Result<bool, FormulaError> {
        let order = self.postorder(&[f]);
        let mut value: FxHashMap<FormulaId, bool> = FxHashMap::default();
        for g in order {
            let v = match self.node(g) {
                Node::Var(x) => assign(x)
                    .ok_or_else(|| FormulaError::Unassigned(self.var_name(x).to_owned()))?,
                Node::Not(c) => !value[&c],
                Node::And(l, r) => value[&l] && value[&r],
                Node::Or(l, r) => value[&l] || value[&r],
                Node::Top => true,
                Node::Bot => false,
            };
            value.insert(g, v);
        }
        Ok(value[&f])
    }

    pub fn evaluate(
        &self,
        f: FormulaId,
        assignment: &HashMap<String, bool>,
    ) -> Result<bool, FormulaError> {
        self.evaluate_with(f, |v| assignment.get(self.var_name(v)).copied())
    }

    /// Canonical s-expression rendering.
    pub fn display(&self, f: FormulaId) -> Display<'_> {
        Display {
            store: self,
            root: f,
        }
    }

    pub fn parse(&mut self, text: &str) -> Result<FormulaId, FormulaError> {
        let mut parser = Parser::new(text);
        let f = parser.formula(self)?;
        parser.expect_end()?;
        Ok(f)
    }

    /// Parses `φ |- ψ`.
    pub fn parse_sequent(&mut self, text: &str) -> Result<(FormulaId, FormulaId), FormulaError> {
        let mut parser = Parser::new(text);
        let lhs = parser.formula(self)?;
        parser.expect_turnstile()?;
        let rhs = parser.formula(self)?;
        parser.expect_end()?;
        Ok((lhs, rhs))
    }
}

/// Orders names by their non-numeric prefix, then by trailing number, so
/// that `i2 < i10`.
pub fn natural_cmp(a: &str, b: &str) -> Ordering {
    fn split(s: &str) -> (&str, Option<u64>) {
        let cut = s.trim_end_matches(|c: char| c.is_ascii_digit()).len();
        let (head, digits) = s.split_at(cut);
        (head, digits.parse().ok())
    }
    let (ha, na) = split(a);
    let (hb, nb) = split(b);
    ha.cmp(hb).then(na.cmp(&nb)).then(a.cmp(b))
}

/// Compiled evaluator for repeated classical evaluation of a set of roots.
pub struct Evaluator {
    ops: Vec<Op>,
    roots: Vec<usize>,
    vars: Vec<VarId>,
}

#[derive(Clone, Copy)]
enum Op {
    Var(usize),
    Not(usize),
    And(usize, usize),
    Or(usize, usize),
    Const(bool),
}

impl Evaluator {
    pub fn new(store: &FormulaStore, roots: &[FormulaId]) -> Self {
        let vars = store.variables(roots);
        Self::with_vars(store, roots, vars)
    }

    /// Like [`Evaluator::new`] but with an explicit variable order. Variables
    /// of `roots` missing from `vars` evaluate to false.
    pub fn with_vars(store: &FormulaStore, roots: &[FormulaId], vars: Vec<VarId>) -> Self {
        let var_pos: FxHashMap<VarId, usize> =
            vars.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        let order = store.postorder(roots);
        let slot: FxHashMap<FormulaId, usize> =
            order.iter().enumerate().map(|(i, &g)| (g, i)).collect();
        let ops = order
            .iter()
            .map(|&g| match store.node(g) {
                Node::Var(v) => var_pos.get(&v).map_or(Op::Const(false), |&k| Op::Var(k)),
                Node::Not(c) => Op::Not(slot[&c]),
                Node::And(l, r) => Op::And(slot[&l], slot[&r]),
                Node::Or(l, r) => Op::Or(slot[&l], slot[&r]),
                Node::Top => Op::Const(true),
                Node::Bot => Op::Const(false),
            })
            .collect();
        let roots = roots.iter().map(|r| slot[r]).collect();
        Evaluator { ops, roots, vars }
    }

    /// Variables in input order: bit `k` of an assignment mask belongs to
    /// `vars()[k]`.
    pub fn vars(&self) -> &[VarId] {
        &self.vars
    }

    /// Value of every node under `mask`; read roots with [`Evaluator::root`].
    pub fn run(&self, mask: u64, values: &mut Vec<bool>) {
        values.clear();
        for op in &self.ops {
            let v = match *op {
                Op::Var(k) => mask >> k & 1 == 1,
                Op::Not(c) => !values[c],
                Op::And(l, r) => values[l] && values[r],
                Op::Or(l, r) => values[l] || values[r],
                Op::Const(b) => b,
            };
            values.push(v);
        }
    }

    pub fn root(&self, k: usize, values: &[bool]) -> bool {
        values[self.roots[k]]
    }

    /// Evaluates the first root under `mask`.
    pub fn eval(&self, mask: u64) -> bool {
        let mut values = Vec::with_capacity(self.ops.len());
        self.run(mask, &mut values);
        self.root(0, &values)
    }
}

pub struct Display<'a> {
    store: &'a FormulaStore,
    root: FormulaId,
}

impl fmt::Display for Display<'_> {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        enum Item {
            Formula(FormulaId),
            Text(&'static str),
        }
        let mut stack = vec![Item::Formula(self.root)];
        while let Some(item) = stack.pop() {
            let f = match item {
                Item::Text(t) => {
                    out.write_str(t)?;
                    continue;
                }
                Item::Formula(f) => f,
            };
            match self.store.node(f) {
                Node::Var(v) => out.write_str(self.store.var_name(v))?,
                Node::Top => out.write_str("true")?,
                Node::Bot => out.write_str("false")?,
                Node::Not(c) => {
                    out.write_str("(not ")?;
                    stack.push(Item::Text(")"));
                    stack.push(Item::Formula(c));
                }
                Node::And(l, r) | Node::Or(l, r) => {
                    let head = if matches!(self.store.node(f), Node::And(..)) {
                        "(and "
                    } else {
                        "(or "
                    };
                    out.write_str(head)?;
                    stack.push(Item::Text(")"));
                    stack.push(Item::Formula(r));
                    stack.push(Item::Text(" "));
                    stack.push(Item::Formula(l));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Open,
    Close,
    Turnstile,
    Atom(String),
    End,
}

/// Iterative s-expression reader; nesting depth is limited only by memory.
struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    line: usize,
    col: usize,
}

#[derive(Clone, Copy, PartialEq)]
enum Head {
    Not,
    And,
    Or,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Self {
        Parser {
            src: text.as_bytes(),
            pos: 0,
            line: 1,
            col: 1,
        }
    }

    fn error<T>(&self, line: usize, col: usize, msg: impl Into<String>) -> Result<T, FormulaError> {
        Err(FormulaError::Syntax {
            line,
            col,
            msg: msg.into(),
        })
    }

    fn bump(&mut self) {
        if self.src[self.pos] == b'\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        self.pos += 1;
    }

    fn next_token(&mut self) -> Result<(Token, usize, usize), FormulaError> {
        loop {
            match self.src.get(self.pos) {
                Some(c) if c.is_ascii_whitespace() => self.bump(),
                Some(b';') => {
                    while self.pos < self.src.len() && self.src[self.pos] != b'\n' {
                        self.bump();
                    }
                }
                _ => break,
            }
        }
        let (line, col) = (self.line, self.col);
        let Some(&c) = self.src.get(self.pos) else {
            return Ok((Token::End, line, col));
        };
        let tok = match c {
            b'(' => {
                self.bump();
                Token::Open
            }
            b')' => {
                self.bump();
                Token::Close
            }
            b'|' if self.src.get(self.pos + 1) == Some(&b'-') => {
                self.bump();
                self.bump();
                Token::Turnstile
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                let start = self.pos;
                while self
                    .src
                    .get(self.pos)
                    .is_some_and(|c| c.is_ascii_alphanumeric() || *c == b'_')
                {
                    self.bump();
                }
                Token::Atom(String::from_utf8_lossy(&self.src[start..self.pos]).into_owned())
            }
            _ => {
                let ch = std::str::from_utf8(&self.src[self.pos..])
                    .ok()
                    .and_then(|s| s.chars().next())
                    .unwrap_or('?');
                return self.error(line, col, format!("unexpected character `{ch}`"));
            }
        };
        Ok((tok, line, col))
    }

    fn formula(&mut self, store: &mut FormulaStore) -> Result<FormulaId, FormulaError> {
        struct Frame {
            head: Head,
            args: Vec<FormulaId>,
            line: usize,
            col: usize,
        }
        let mut stack: Vec<Frame> = Vec::new();
        loop {
            let (tok, line, col) = self.next_token()?;
            let done = match tok {
                Token::Open => {
                    let (head, hl, hc) = self.next_token()?;
                    let head = match head {
                        Token::Atom(ref a) if a == "not" => Head::Not,
                        Token::Atom(ref a) if a == "and" => Head::And,
                        Token::Atom(ref a) if a == "or" => Head::Or,
                        _ => return self.error(hl, hc, "expected `and`, `or` or `not`"),
                    };
                    stack.push(Frame {
                        head,
                        args: Vec::new(),
                        line,
                        col,
                    });
                    continue;
                }
                Token::Atom(a) => match a.as_str() {
                    "true" => store.top(),
                    "false" => store.bot(),
                    "and" | "or" | "not" => {
                        return self.error(line, col, format!("`{a}` is a keyword"))
                    }
                    _ => store.var(&a),
                },
                Token::Close => {
                    let Some(frame) = stack.pop() else {
                        return self.error(line, col, "unbalanced `)`");
                    };
                    match frame.head {
                        Head::Not => {
                            if frame.args.len() != 1 {
                                return self.error(
                                    frame.line,
                                    frame.col,
                                    format!(
                                        "arity error: `not` takes 1 operand, got {}",
                                        frame.args.len()
                                    ),
                                );
                            }
                            store.not(frame.args[0])
                        }
                        Head::And | Head::Or => {
                            let mut args = frame.args.into_iter();
                            let Some(first) = args.next() else {
                                return self.error(
                                    frame.line,
                                    frame.col,
                                    "arity error: empty `and`/`or`",
                                );
                            };
                            args.fold(first, |acc, f| {
                                if frame.head == Head::And {
                                    store.and(acc, f)
                                } else {
                                    store.or(acc, f)
                                }
                            })
                        }
                    }
                }
                Token::Turnstile => return self.error(line, col, "unexpected `|-`"),
                Token::End => return self.error(line, col, "unexpected end of input"),
            };
            match stack.last_mut() {
                Some(frame) => frame.args.push(done),
                None => return Ok(done),
            }
        }
    }

    fn expect_turnstile(&mut self) -> Result<(), FormulaError> {
        match self.next_token()? {
            (Token::Turnstile, _, _) => Ok(()),
            (_, line, col) => self.error(line, col, "expected `|-`"),
        }
    }

    fn expect_end(&mut self) -> Result<(), FormulaError> {
        match self.next_token()? {
            (Token::End, _, _) => Ok(()),
            (_, line, col) => self.error(line, col, "trailing input"),
        }
    }
}
