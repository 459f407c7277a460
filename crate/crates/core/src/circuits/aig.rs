use std::fmt::Write as _;

use rustc_hash::FxHashMap;

use super::CircuitError;
use crate::formula::{FormulaId, FormulaStore, Node, VarId};

/// An AND gate `lhs = rhs0 ∧ rhs1` over AIGER literals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Gate {
    pub lhs: u32,
    pub rhs0: u32,
    pub rhs1: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SymbolKind {
    Input,
    Output,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Symbol {
    pub kind: SymbolKind,
    pub index: usize,
    pub name: String,
}

/// A combinational AIGER circuit. Gates are stored in topological order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AigCircuit {
    /// `M` from the header; at least the number of inputs plus gates.
    pub max_var: u32,
    pub inputs: Vec<u32>,
    pub gates: Vec<Gate>,
    pub outputs: Vec<u32>,
    pub symbols: Vec<Symbol>,
    /// Lines after the `c` marker, verbatim.
    pub comments: Vec<String>,
}

fn parse_err(line: usize, msg: impl Into<String>) -> CircuitError {
    CircuitError::Parse {
        line,
        msg: msg.into(),
    }
}

fn numbers(line: usize, text: &str, count: usize) -> Result<Vec<u32>, CircuitError> {
    let fields: Vec<&str> = text.split_whitespace().collect();
    if fields.len() != count {
        return Err(parse_err(
            line,
            format!("expected {count} numbers, found {}", fields.len()),
        ));
    }
    fields
        .iter()
        .map(|f| {
            f.parse::<u32>()
                .map_err(|_| parse_err(line, format!("invalid number {f:?}")))
        })
        .collect()
}

impl AigCircuit {
    pub fn num_inputs(&self) -> usize {
        self.inputs.len()
    }

    /// Parses ASCII AIGER (`aag`). Latches are rejected.
    pub fn parse_aag(text: &str) -> Result<Self, CircuitError> {
        let mut lines = text.lines().enumerate().map(|(k, l)| (k + 1, l));
        let (_, header) = lines.next().ok_or_else(|| parse_err(1, "missing header"))?;
        let mut fields = header.split_whitespace();
        if fields.next() != Some("aag") {
            return Err(parse_err(1, "header must start with \"aag\""));
        }
        let rest: Vec<&str> = fields.collect();
        let h = numbers(1, &rest.join(" "), 5)?;
        let (m, i, l, o, a) = (h[0], h[1] as usize, h[2], h[3] as usize, h[4] as usize);
        if l > 0 {
            return Err(CircuitError::Sequential { line: 1 });
        }
        if (m as u64) < i as u64 + a as u64 {
            return Err(parse_err(
                1,
                format!("M = {m} is smaller than I + A = {}", i + a),
            ));
        }
        let eof = text.lines().count() + 1;
        let mut next = |what: &str| {
            lines
                .next()
                .ok_or_else(|| parse_err(eof, format!("unexpected end of file, expected {what}")))
        };
        let mut c = AigCircuit {
            max_var: m,
            ..Default::default()
        };
        // 0 undefined, 1 input, 2 gate
        let mut defined = vec![0u8; m as usize + 1];
        for _ in 0..i {
            let (ln, t) = next("an input")?;
            let lit = numbers(ln, t, 1)?[0];
            if lit < 2 || lit % 2 == 1 || lit / 2 > m {
                return Err(parse_err(ln, format!("invalid input literal {lit}")));
            }
            if defined[(lit / 2) as usize] != 0 {
                return Err(parse_err(ln, format!("variable {} defined twice", lit / 2)));
            }
            defined[(lit / 2) as usize] = 1;
            c.inputs.push(lit);
        }
        let mut output_lines = Vec::with_capacity(o);
        for _ in 0..o {
            let (ln, t) = next("an output")?;
            let lit = numbers(ln, t, 1)?[0];
            if lit / 2 > m {
                return Err(parse_err(ln, format!("output literal {lit} exceeds M")));
            }
            c.outputs.push(lit);
            output_lines.push(ln);
        }
        let max_input = c.inputs.iter().copied().max().unwrap_or(0);
        for _ in 0..a {
            let (ln, t) = next("an AND gate")?;
            let g = numbers(ln, t, 3)?;
            let (lhs, rhs0, rhs1) = (g[0], g[1], g[2]);
            if lhs % 2 == 1 || lhs <= max_input || lhs / 2 > m {
                return Err(parse_err(ln, format!("invalid gate literal {lhs}")));
            }
            if defined[(lhs / 2) as usize] != 0 {
                return Err(parse_err(ln, format!("variable {} defined twice", lhs / 2)));
            }
            for r in [rhs0, rhs1] {
                if r / 2 > m || (r / 2 != 0 && defined[(r / 2) as usize] == 0) {
                    return Err(parse_err(
                        ln,
                        format!("gate {lhs} uses literal {r} before its definition"),
                    ));
                }
            }
            defined[(lhs / 2) as usize] = 2;
            c.gates.push(Gate { lhs, rhs0, rhs1 });
        }
        for (&lit, &ln) in c.outputs.iter().zip(&output_lines) {
            if lit / 2 != 0 && defined[(lit / 2) as usize] == 0 {
                return Err(parse_err(ln, format!("output literal {lit} is undefined")));
            }
        }
        let mut first_comment = None;
        for (ln, t) in lines.by_ref() {
            if t == "c" {
                break;
            }
            if let Some(text) = t.strip_prefix("c ") {
                first_comment = Some(text.to_string());
                break;
            }
            if t.trim().is_empty() {
                continue;
            }
            let (tag, name) = t
                .split_once(' ')
                .ok_or_else(|| parse_err(ln, "malformed symbol line"))?;
            let (kind, limit) = match tag.as_bytes().first() {
                Some(b'i') => (SymbolKind::Input, i),
                Some(b'o') => (SymbolKind::Output, o),
                _ => return Err(parse_err(ln, format!("unsupported symbol {tag:?}"))),
            };
            let index: usize = tag[1..]
                .parse()
                .map_err(|_| parse_err(ln, format!("invalid symbol {tag:?}")))?;
            if index >= limit {
                return Err(parse_err(ln, format!("symbol {tag} out of range")));
            }
            c.symbols.push(Symbol {
                kind,
                index,
                name: name.to_string(),
            });
        }
        c.comments = first_comment
            .into_iter()
            .chain(lines.map(|(_, t)| t.to_string()))
            .collect();
        Ok(c)
    }

    pub fn emit_aag(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "aag {} {} 0 {} {}",
            self.max_var,
            self.inputs.len(),
            self.outputs.len(),
            self.gates.len()
        );
        for i in &self.inputs {
            let _ = writeln!(out, "{i}");
        }
        for o in &self.outputs {
            let _ = writeln!(out, "{o}");
        }
        for g in &self.gates {
            let _ = writeln!(out, "{} {} {}", g.lhs, g.rhs0, g.rhs1);
        }
        for s in &self.symbols {
            let tag = match s.kind {
                SymbolKind::Input => 'i',
                SymbolKind::Output => 'o',
            };
            let _ = writeln!(out, "{tag}{} {}", s.index, s.name);
        }
        if !self.comments.is_empty() {
            out.push_str("c\n");
            for l in &self.comments {
                out.push_str(l);
                out.push('\n');
            }
        }
        out
    }

    /// Name of input `k` from the symbol table, if any.
    pub fn input_name(&self, k: usize) -> Option<&str> {
        self.symbols
            .iter()
            .find(|s| s.kind == SymbolKind::Input && s.index == k)
            .map(|s| s.name.as_str())
    }

    pub fn output_name(&self, k: usize) -> Option<&str> {
        self.symbols
            .iter()
            .find(|s| s.kind == SymbolKind::Output && s.index == k)
            .map(|s| s.name.as_str())
    }

    pub fn simulate(&self, input_bits: &[bool]) -> Result<Vec<bool>, CircuitError> {
        if input_bits.len() != self.inputs.len() {
            return Err(CircuitError::Arity {
                expected: self.inputs.len(),
                got: input_bits.len(),
            });
        }
        let mut value = vec![false; self.max_var as usize + 1];
        for (&lit, &b) in self.inputs.iter().zip(input_bits) {
            value[(lit / 2) as usize] = b;
        }
        let read = |value: &[bool], lit: u32| value[(lit / 2) as usize] ^ (lit & 1 == 1);
        for g in &self.gates {
            value[(g.lhs / 2) as usize] = read(&value, g.rhs0) && read(&value, g.rhs1);
        }
        Ok(self.outputs.iter().map(|&o| read(&value, o)).collect())
    }

    /// Gates in the cone of output `k`, in topological order.
    pub fn cone_gates(&self, k: usize) -> Result<Vec<Gate>, CircuitError> {
        let out = *self.outputs.get(k).ok_or(CircuitError::OutputIndex {
            index: k,
            outputs: self.outputs.len(),
        })?;
        let mut needed = vec![false; self.max_var as usize + 1];
        needed[(out / 2) as usize] = true;
        let mut cone: Vec<Gate> = Vec::new();
        for g in self.gates.iter().rev() {
            if needed[(g.lhs / 2) as usize] {
                needed[(g.rhs0 / 2) as usize] = true;
                needed[(g.rhs1 / 2) as usize] = true;
                cone.push(*g);
            }
        }
        cone.reverse();
        Ok(cone)
    }

    /// Output `k` as a formula over variables named `i0`, `i1`, ...
    pub fn cone_formula(
        &self,
        store: &mut FormulaStore,
        k: usize,
    ) -> Result<FormulaId, CircuitError> {
        let vars: Vec<VarId> = (0..self.inputs.len())
            .map(|j| {
                let f = store.var(&format!("i{j}"));
                match store.node(f) {
                    Node::Var(v) => v,
                    _ => unreachable!("var() interns a variable"),
                }
            })
            .collect();
        self.cone_formula_with(store, k, &vars)
    }

    /// Output `k` as a formula, reading input `j` as `inputs[j]`.
    pub fn cone_formula_with(
        &self,
        store: &mut FormulaStore,
        k: usize,
        inputs: &[VarId],
    ) -> Result<FormulaId, CircuitError> {
        if inputs.len() != self.inputs.len() {
            return Err(CircuitError::Arity {
                expected: self.inputs.len(),
                got: inputs.len(),
            });
        }
        let gates = self.cone_gates(k)?;
        let mut formula: FxHashMap<u32, FormulaId> = FxHashMap::default();
        for (&lit, &v) in self.inputs.iter().zip(inputs) {
            let name = store.var_name(v).to_string();
            formula.insert(lit / 2, store.var(&name));
        }
        let lit_formula =
            |store: &mut FormulaStore, formula: &FxHashMap<u32, FormulaId>, lit: u32| match lit {
                0 => store.bot(),
                1 => store.top(),
                _ => {
                    let f = formula[&(lit / 2)];
                    if lit & 1 == 1 {
                        store.not(f)
                    } else {
                        f
                    }
                }
            };
        for g in gates {
            let a = lit_formula(store, &formula, g.rhs0);
            let b = lit_formula(store, &formula, g.rhs1);
            let f = store.and(a, b);
            formula.insert(g.lhs / 2, f);
        }
        Ok(lit_formula(store, &formula, self.outputs[k]))
    }
}

/// Incremental AIG construction with structural hashing of AND gates.
#[derive(Debug, Clone)]
pub struct AigBuilder {
    num_inputs: u32,
    gates: Vec<Gate>,
    strash: FxHashMap<(u32, u32), u32>,
    outputs: Vec<u32>,
    symbols: Vec<Symbol>,
}

impl AigBuilder {
    pub fn new(num_inputs: usize) -> Self {
        AigBuilder {
            num_inputs: num_inputs as u32,
            gates: Vec::new(),
            strash: FxHashMap::default(),
            outputs: Vec::new(),
            symbols: Vec::new(),
        }
    }

    pub fn input(&self, k: usize) -> u32 {
        assert!(k < self.num_inputs as usize, "input {k} out of range");
        2 * (k as u32 + 1)
    }

    pub fn and(&mut self, a: u32, b: u32) -> u32 {
        let key = (a.min(b), a.max(b));
        if let Some(&lhs) = self.strash.get(&key) {
            return lhs;
        }
        let lhs = 2 * (self.num_inputs + self.gates.len() as u32 + 1);
        self.gates.push(Gate {
            lhs,
            rhs0: key.1,
            rhs1: key.0,
        });
        self.strash.insert(key, lhs);
        lhs
    }

    pub fn or(&mut self, a: u32, b: u32) -> u32 {
        self.and(a ^ 1, b ^ 1) ^ 1
    }

    pub fn xor(&mut self, a: u32, b: u32) -> u32 {
        let l = self.and(a, b ^ 1);
        let r = self.and(a ^ 1, b);
        self.or(l, r)
    }

    pub fn num_gates(&self) -> usize {
        self.gates.len()
    }

    pub fn output(&mut self, lit: u32) -> usize {
        self.outputs.push(lit);
        self.outputs.len() - 1
    }

    pub fn name_input(&mut self, k: usize, name: &str) {
        self.symbols.push(Symbol {
            kind: SymbolKind::Input,
            index: k,
            name: name.to_string(),
        });
    }

    pub fn name_output(&mut self, k: usize, name: &str) {
        self.symbols.push(Symbol {
            kind: SymbolKind::Output,
            index: k,
            name: name.to_string(),
        });
    }

    pub fn finish(mut self) -> AigCircuit {
        self.symbols.sort_by_key(|s| (s.kind, s.index));
        AigCircuit {
            max_var: self.num_inputs + self.gates.len() as u32,
            inputs: (1..=self.num_inputs).map(|v| 2 * v).collect(),
            gates: self.gates,
            outputs: self.outputs,
            symbols: self.symbols,
            comments: Vec::new(),
        }
    }
}

/// Single-output circuit for `f`, with one input per variable of `f` in
/// natural name order.
pub fn formula_to_circuit(store: &FormulaStore, f: FormulaId) -> AigCircuit {
    let inputs = store.variables(&[f]);
    formulas_to_circuit(store, &[f], &inputs).expect("inputs cover the formula")
}

/// Circuit with one output per root, reading variable `inputs[j]` from input
/// `j`. Or becomes `¬(¬a ∧ ¬b)`, Not a negation bit, and shared subformulas
/// shared gates.
pub fn formulas_to_circuit(
    store: &FormulaStore,
    roots: &[FormulaId],
    inputs: &[VarId],
) -> Result<AigCircuit, CircuitError> {
    let mut b = AigBuilder::new(inputs.len());
    let position: FxHashMap<VarId, usize> =
        inputs.iter().enumerate().map(|(k, &v)| (v, k)).collect();
    for (k, &v) in inputs.iter().enumerate() {
        b.name_input(k, store.var_name(v));
    }
    let mut lit: FxHashMap<FormulaId, u32> = FxHashMap::default();
    for f in store.postorder(roots) {
        let l = match store.node(f) {
            Node::Var(v) => {
                let k = *position
                    .get(&v)
                    .ok_or_else(|| CircuitError::UnknownVariable(store.var_name(v).to_string()))?;
                b.input(k)
            }
            Node::Not(c) => lit[&c] ^ 1,
            Node::And(x, y) => b.and(lit[&x], lit[&y]),
            Node::Or(x, y) => b.or(lit[&x], lit[&y]),
            Node::Top => 1,
            Node::Bot => 0,
        };
        lit.insert(f, l);
    }
    for &r in roots {
        b.output(lit[&r]);
    }
    Ok(b.finish())
}
