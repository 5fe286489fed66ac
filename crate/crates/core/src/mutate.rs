//! Benchmark mutations: sequential control-state padding and
//! chained-variable guard obfuscation. Both are verdict-preserving on
//! the shipped models (asserted by the regression tests, not proved).

use std::collections::BTreeMap;

use crate::constraint::{Atom, CmpOp, Constraint, LinTerm, Sort, Value, Var, VarKind};
use crate::dpn::{Dpn, Marking, Transition};

/// Prepends a chain of `n` fresh places joined by true-guarded
/// transitions in front of the initial marking: the net must take `n`
/// silent steps before behaving exactly like the original.
pub fn add_sequential_states(dpn: &Dpn, n: usize) -> Dpn {
    if n == 0 {
        return dpn.clone();
    }
    let mut out = dpn.clone();
    let prefix = fresh_prefix(dpn, "seq");
    let place_ids: Vec<String> = (1..=n).map(|i| format!("{prefix}{i}")).collect();
    for (i, id) in place_ids.iter().enumerate() {
        out.places.insert(i, id.clone());
    }
    for i in 1..=n {
        let pre: BTreeMap<String, u32> = [(place_ids[i - 1].clone(), 1)].into_iter().collect();
        let post: BTreeMap<String, u32> = if i < n {
            [(place_ids[i].clone(), 1)].into_iter().collect()
        } else {
            dpn.initial_marking
                .iter()
                .map(|(p, &k)| (p.clone(), k))
                .collect()
        };
        out.transitions.insert(
            i - 1,
            Transition {
                id: format!("{prefix}tau{i}"),
                label: format!("{prefix}tau{i}"),
                guard: Constraint::tt(),
                pre,
                post,
            },
        );
    }
    out.initial_marking = Marking::of(&[(place_ids[0].as_str(), 1)]);
    out
}

/// Obfuscates guards by threading comparisons through chains of fresh
/// written variables: each top-level (conjunctive) atom `e ⊙ e'`
/// becomes `e L z1 && z1 L z2 && ... && zk ⊙ e'`, where the link
/// operator `L` is `=` by default. Each atom gets its own chain so
/// firings stay independent; chains of the same position are reused
/// across transitions.
pub fn add_chained_vars(dpn: &Dpn, chain_len: usize, link: CmpOp) -> Dpn {
    if chain_len == 0 {
        return dpn.clone();
    }
    let mut out = dpn.clone();
    let prefix = fresh_prefix(dpn, "z");
    let mut declared: BTreeMap<String, Sort> = BTreeMap::new();

    for t in &mut out.transitions {
        let mut atom_counter = 0usize;
        t.guard = rewrite_conjuncts(&t.guard, &mut |atom| {
            let sort = atom
                .lhs
                .var_sort()
                .or_else(|| atom.rhs.var_sort())
                .unwrap_or(Sort::Rat);
            atom_counter += 1;
            let sort_tag = match sort {
                Sort::Int => "i",
                Sort::Rat => "q",
                Sort::Bool => unreachable!("atoms are numeric"),
            };
            let chain: Vec<Var> = (1..=chain_len)
                .map(|i| {
                    let name = format!("{prefix}{sort_tag}{i}_{atom_counter}");
                    declared.insert(name.clone(), sort);
                    Var {
                        name,
                        sort,
                        kind: VarKind::Written,
                    }
                })
                .collect();
            let mut parts = Vec::with_capacity(chain_len + 1);
            let mut prev = atom.lhs.clone();
            for z in &chain {
                parts.push(Constraint::cmp(prev, link, LinTerm::var(z.clone())));
                prev = LinTerm::var(z.clone());
            }
            parts.push(Constraint::cmp(prev, atom.op, atom.rhs.clone()));
            Constraint::And(parts)
        });
    }
    for (name, sort) in declared {
        out.vars.push(Var::plain(&name, sort));
        out.initial_assignment
            .set(Var::plain(&name, sort), Value::zero_of(sort))
            .expect("fresh variable");
    }
    out
}

/// Rewrites atoms in conjunctive positions only; disjunctions and
/// anything below them pass through untouched.
fn rewrite_conjuncts(c: &Constraint, rewrite: &mut impl FnMut(&Atom) -> Constraint) -> Constraint {
    match c {
        Constraint::And(parts) => Constraint::And(
            parts
                .iter()
                .map(|p| rewrite_conjuncts(p, rewrite))
                .collect(),
        ),
        Constraint::Atom(atom) if !(atom.lhs.is_constant() && atom.rhs.is_constant()) => {
            rewrite(atom)
        }
        other => other.clone(),
    }
}

/// A name prefix no existing identifier starts with.
fn fresh_prefix(dpn: &Dpn, base: &str) -> String {
    let mut prefix = base.to_string();
    let taken = |p: &str| {
        dpn.places.iter().any(|id| id.starts_with(p))
            || dpn.transitions.iter().any(|t| t.id.starts_with(p))
            || dpn.vars.iter().any(|v| v.name.starts_with(p))
    };
    while taken(&prefix) {
        prefix.push('_');
    }
    prefix
}
