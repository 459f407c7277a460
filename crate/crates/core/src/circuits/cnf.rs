use std::fmt::Write as _;

use rustc_hash::FxHashMap;

use super::CircuitError;
use crate::formula::{FormulaId, FormulaStore, Node, VarId};

/// A clause list over variables `1..=num_vars`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CnfInstance {
    pub num_vars: u32,
    pub clauses: Vec<Vec<i32>>,
    /// Provenance lines, written as `c` comments.
    pub comments: Vec<String>,
}

impl CnfInstance {
    pub fn new(num_vars: u32) -> Self {
        CnfInstance {
            num_vars,
            ..Default::default()
        }
    }

    pub fn fresh_var(&mut self) -> i32 {
        self.num_vars += 1;
        self.num_vars as i32
    }

    /// Appends a clause. Empty clauses and out-of-range literals are bugs in
    /// the caller.
    pub fn add_clause(&mut self, clause: &[i32]) {
        assert!(!clause.is_empty(), "empty clause");
        assert!(
            clause
                .iter()
                .all(|&l| l != 0 && l.unsigned_abs() <= self.num_vars),
            "literal out of range in {clause:?}"
        );
        self.clauses.push(clause.to_vec());
    }

    pub fn to_dimacs(&self) -> String {
        let mut out = String::new();
        for c in &self.comments {
            let _ = writeln!(out, "c {c}");
        }
        let _ = writeln!(out, "p cnf {} {}", self.num_vars, self.clauses.len());
        for clause in &self.clauses {
            for l in clause {
                let _ = write!(out, "{l} ");
            }
            out.push_str("0\n");
        }
        out
    }

    /// Reads DIMACS CNF. Clauses may span lines; a `%` line ends the input.
    pub fn parse_dimacs(text: &str) -> Result<Self, CircuitError> {
        let err = |line: usize, msg: String| CircuitError::Parse { line, msg };
        let mut cnf = CnfInstance::default();
        let mut declared: Option<(u32, usize, usize)> = None;
        let mut current = Vec::new();
        let mut last = 0;
        for (k, raw) in text.lines().enumerate() {
            let line = k + 1;
            last = line;
            let t = raw.trim();
            if t.is_empty() {
                continue;
            }
            if t == "c" || t.starts_with("c ") {
                cnf.comments.push(t.get(2..).unwrap_or("").to_string());
                continue;
            }
            if t.starts_with('%') {
                break;
            }
            if let Some(rest) = t.strip_prefix("p ") {
                if declared.is_some() {
                    return Err(err(line, "duplicate header".into()));
                }
                let f: Vec<&str> = rest.split_whitespace().collect();
                let (vars, clauses) = match f.as_slice() {
                    ["cnf", v, c] => (v.parse::<u32>(), c.parse::<usize>()),
                    _ => return Err(err(line, format!("malformed header {t:?}"))),
                };
                let (Ok(vars), Ok(clauses)) = (vars, clauses) else {
                    return Err(err(line, format!("malformed header {t:?}")));
                };
                cnf.num_vars = vars;
                declared = Some((vars, clauses, line));
                continue;
            }
            let Some((vars, _, _)) = declared else {
                return Err(err(line, "clause before header".into()));
            };
            for field in t.split_whitespace() {
                let l: i32 = field
                    .parse()
                    .map_err(|_| err(line, format!("invalid literal {field:?}")))?;
                if l == 0 {
                    if current.is_empty() {
                        return Err(err(line, "empty clause".into()));
                    }
                    cnf.clauses.push(std::mem::take(&mut current));
                } else if l.unsigned_abs() > vars {
                    return Err(err(line, format!("literal {l} exceeds {vars} variables")));
                } else {
                    current.push(l);
                }
            }
        }
        let Some((_, clauses, header_line)) = declared else {
            return Err(err(last.max(1), "missing header".into()));
        };
        if !current.is_empty() {
            return Err(err(last, "last clause is not terminated by 0".into()));
        }
        if cnf.clauses.len() != clauses {
            return Err(err(
                header_line,
                format!(
                    "header declares {clauses} clauses, found {}",
                    cnf.clauses.len()
                ),
            ));
        }
        Ok(cnf)
    }
}

/// Shared state of one encoding: input variables are numbered first, then
/// the constant (if any), then gates in the order they are first reached.
struct Encoder<'s> {
    store: &'s FormulaStore,
    cnf: CnfInstance,
    inputs: FxHashMap<VarId, i32>,
    constant: Option<i32>,
}

impl<'s> Encoder<'s> {
    fn new(store: &'s FormulaStore, inputs: &[VarId], roots: &[FormulaId]) -> Self {
        let mut cnf = CnfInstance::new(inputs.len() as u32);
        for (k, &v) in inputs.iter().enumerate() {
            cnf.comments
                .push(format!("input {} {}", k + 1, store.var_name(v)));
        }
        let has_constant = store
            .postorder(roots)
            .into_iter()
            .any(|f| matches!(store.node(f), Node::Top | Node::Bot));
        let constant = has_constant.then(|| {
            let t = cnf.fresh_var();
            cnf.add_clause(&[t]);
            cnf.comments.push(format!("constant {t} true"));
            t
        });
        Encoder {
            store,
            cnf,
            inputs: inputs
                .iter()
                .enumerate()
                .map(|(k, &v)| (v, k as i32 + 1))
                .collect(),
            constant,
        }
    }

    fn check(&self, roots: &[FormulaId]) -> Result<(), CircuitError> {
        for v in self.store.variables(roots) {
            if !self.inputs.contains_key(&v) {
                return Err(CircuitError::UnknownVariable(
                    self.store.var_name(v).to_string(),
                ));
            }
        }
        Ok(())
    }

    fn encode(&mut self, root: FormulaId, nodes: &mut FxHashMap<FormulaId, i32>) -> i32 {
        for f in self
            .store
            .postorder_until(&[root], |g| nodes.contains_key(&g))
        {
            if nodes.contains_key(&f) {
                continue;
            }
            let lit = match self.store.node(f) {
                Node::Var(v) => self.inputs[&v],
                Node::Not(c) => -nodes[&c],
                Node::Top => self.constant.expect("constant allocated"),
                Node::Bot => -self.constant.expect("constant allocated"),
                Node::And(a, b) => {
                    let (a, b) = (nodes[&a], nodes[&b]);
                    let g = self.cnf.fresh_var();
                    self.cnf.add_clause(&[-g, a]);
                    self.cnf.add_clause(&[-g, b]);
                    self.cnf.add_clause(&[g, -a, -b]);
                    g
                }
                Node::Or(a, b) => {
                    let (a, b) = (nodes[&a], nodes[&b]);
                    let g = self.cnf.fresh_var();
                    self.cnf.add_clause(&[g, -a]);
                    self.cnf.add_clause(&[g, -b]);
                    self.cnf.add_clause(&[-g, a, b]);
                    g
                }
            };
            nodes.insert(f, lit);
        }
        nodes[&root]
    }
}

/// Tseitin encoding of `f` with inputs in natural name order. With
/// `assert_root` the CNF is satisfiable iff `f` is.
pub fn tseitin(store: &FormulaStore, f: FormulaId, assert_root: bool) -> CnfInstance {
    let inputs = store.variables(&[f]);
    tseitin_over(store, &[f], &inputs, assert_root).expect("inputs cover the formula")
}

/// Tseitin encoding of several roots over the given input order, sharing
/// gates between roots. With `assert_root` every root is asserted.
pub fn tseitin_over(
    store: &FormulaStore,
    roots: &[FormulaId],
    inputs: &[VarId],
    assert_root: bool,
) -> Result<CnfInstance, CircuitError> {
    let mut e = Encoder::new(store, inputs, roots);
    e.check(roots)?;
    let mut nodes = FxHashMap::default();
    let lits: Vec<i32> = roots.iter().map(|&r| e.encode(r, &mut nodes)).collect();
    if assert_root {
        for l in lits {
            e.cnf.add_clause(&[l]);
        }
    }
    Ok(e.cnf)
}

/// CNF that is satisfiable iff `f` and `g` differ on some assignment of the
/// union of their variables.
pub fn miter_cnf(
    store: &FormulaStore,
    f: FormulaId,
    g: FormulaId,
    share_subterms: bool,
) -> CnfInstance {
    let inputs = store.variables(&[f, g]);
    miter_cnf_over(store, f, g, &inputs, share_subterms).expect("inputs cover both sides")
}

/// [`miter_cnf`] over a fixed input order; a variable of either side that
/// is not an input is an error. Without `share_subterms` each side gets its
/// own internal variables and only inputs are shared.
pub fn miter_cnf_over(
    store: &FormulaStore,
    f: FormulaId,
    g: FormulaId,
    inputs: &[VarId],
    share_subterms: bool,
) -> Result<CnfInstance, CircuitError> {
    let mut e = Encoder::new(store, inputs, &[f, g]);
    e.check(&[f, g])?;
    let mut left = FxHashMap::default();
    let p = e.encode(f, &mut left);
    let q = if share_subterms {
        e.encode(g, &mut left)
    } else {
        e.encode(g, &mut FxHashMap::default())
    };
    e.cnf.add_clause(&[p, q]);
    e.cnf.add_clause(&[-p, -q]);
    Ok(e.cnf)
}
