//! Shared helpers for the solver-backed integration tests.
#![allow(dead_code)] // not every test target uses every helper

use std::collections::BTreeMap;

use dpncheck_core::constraint::{Constraint, Sort, Substitution, Var};
use dpncheck_core::smt::{SmtGateway, SolverConfig};

pub fn gateway() -> SmtGateway {
    let config = SolverConfig::from_env()
        .expect("no SMT solver found; install z3 or cvc5, or set DPNCHECK_SOLVER");
    SmtGateway::new(config).expect("solver session starts")
}

/// Builds a constraint over plain rational variables `o`, `t` and
/// their placeholder copies `o_0`, `t_0` from guard-style text.
pub fn auction_formula(text: &str) -> Constraint {
    let decls: BTreeMap<String, Sort> = [
        ("o".to_string(), Sort::Rat),
        ("t".to_string(), Sort::Rat),
        ("o_0".to_string(), Sort::Rat),
        ("t_0".to_string(), Sort::Rat),
    ]
    .into_iter()
    .collect();
    let parsed = dpncheck_core::guard::parse_guard(text, &decls).expect("test formula parses");
    let mut subst = Substitution::new();
    for name in ["o", "t"] {
        subst.insert_var(Var::read(name, Sort::Rat), Var::plain(name, Sort::Rat));
        subst.insert_var(
            Var::read(format!("{name}_0"), Sort::Rat),
            Var::placeholder(name, Sort::Rat),
        );
    }
    parsed.rename(&subst).expect("test formula renames")
}

/// Same equivalence-class matching used in several places: every
/// `actual` formula must match exactly one `expected` and vice versa.
pub fn assert_formula_multiset_eq(
    gw: &mut SmtGateway,
    actual: &[Constraint],
    expected: &[Constraint],
    context: &str,
) {
    assert_eq!(actual.len(), expected.len(), "{context}: cardinality");
    let mut used = vec![false; expected.len()];
    for a in actual {
        let mut found = false;
        for (i, e) in expected.iter().enumerate() {
            if used[i] {
                continue;
            }
            if gw.equivalent(a, e).expect("equivalence check") {
                used[i] = true;
                found = true;
                break;
            }
        }
        assert!(found, "{context}: no expected formula matches {a}");
    }
}
