#![allow(dead_code)]

use ortho_core::entailment::{prepare_goal, ProverOptions, Verdict};
use ortho_core::oracle::{default_depth_limit, naive_prove};
use ortho_core::{FormulaId, FormulaStore};
use proptest::prelude::*;

/// Random formula text over `x0..x{vars-1}`, with occasional constants.
pub fn expr(vars: u8) -> impl Strategy<Value = String> {
    let leaf = prop_oneof![
        8 => (0..vars).prop_map(|v| format!("x{v}")),
        1 => Just("true".to_owned()),
        1 => Just("false".to_owned()),
    ];
    leaf.prop_recursive(5, 24, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|t| format!("(not {t})")),
            (inner.clone(), inner.clone()).prop_map(|(l, r)| format!("(and {l} {r})")),
            (inner.clone(), inner).prop_map(|(l, r)| format!("(or {l} {r})")),
        ]
    })
}

pub fn parse(store: &mut FormulaStore, text: &str) -> FormulaId {
    store.parse(text).unwrap_or_else(|e| panic!("{text}: {e}"))
}

/// Verdict of the backward-search oracle on `l ≤ r` under `axioms`.
pub fn oracle_leq(
    store: &mut FormulaStore,
    l: FormulaId,
    r: FormulaId,
    axioms: &[(FormulaId, FormulaId)],
) -> Verdict {
    let p = prepare_goal(store, l, r, axioms, ProverOptions::default());
    let depth = default_depth_limit(p.state.universe().len());
    naive_prove(store, p.goal, &p.axioms, depth).expect("oracle within limits")
}
