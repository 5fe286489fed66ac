//! Property tests for the constraint language: no solver involved;
//! logical claims are checked by exhaustive or sampled evaluation.

use std::collections::BTreeSet;

use proptest::prelude::*;

use dpncheck_core::constraint::{
    canonical_key, eliminate_equalities, rat, ratio, simplify, transition_formula, Assignment,
    CmpOp, Constraint, LinTerm, Rat, Sort, Value, Var, VarKind,
};

fn arb_term(sort: Sort) -> impl Strategy<Value = LinTerm> {
    let names: Vec<&str> = match sort {
        Sort::Int => vec!["a", "b"],
        _ => vec!["c", "d"],
    };
    (
        -3i64..=3,
        proptest::collection::vec((0..names.len(), -2i64..=2), 0..3),
    )
        .prop_map(move |(c, coeffs)| {
            let mut term = LinTerm::constant(rat(c));
            for (i, k) in coeffs {
                term = term.add(&LinTerm::var(Var::plain(names[i], sort)).scale(&rat(k)));
            }
            term
        })
}

fn arb_atom() -> impl Strategy<Value = Constraint> {
    let op = prop_oneof![
        Just(CmpOp::Eq),
        Just(CmpOp::Ne),
        Just(CmpOp::Ge),
        Just(CmpOp::Gt),
        Just(CmpOp::Le),
        Just(CmpOp::Lt)
    ];
    (prop_oneof![Just(Sort::Int), Just(Sort::Rat)], op).prop_flat_map(|(sort, op)| {
        (arb_term(sort), arb_term(sort))
            .prop_map(move |(l, r)| Constraint::atom(l, op, r).expect("same-sort atom"))
    })
}

fn arb_constraint() -> impl Strategy<Value = Constraint> {
    let leaf = prop_oneof![
        arb_atom(),
        Just(Constraint::tt()),
        Just(Constraint::ff()),
        Just(Constraint::BoolVar(Var::plain("flag", Sort::Bool))),
    ];
    leaf.prop_recursive(3, 24, 4, |inner| {
        prop_oneof![
            proptest::collection::vec(inner.clone(), 1..4).prop_map(Constraint::and),
            proptest::collection::vec(inner.clone(), 1..4).prop_map(Constraint::or),
            inner.prop_map(Constraint::not),
        ]
    })
}

fn arb_assignment() -> impl Strategy<Value = Assignment> {
    (
        proptest::collection::vec(-4i64..=4, 2),
        proptest::collection::vec((-8i64..=8, 1i64..=2), 2),
        any::<bool>(),
    )
        .prop_map(|(ints, rats, flag)| {
            let mut a = Assignment::new();
            a.set(Var::plain("a", Sort::Int), Value::int(ints[0]))
                .unwrap();
            a.set(Var::plain("b", Sort::Int), Value::int(ints[1]))
                .unwrap();
            a.set(
                Var::plain("c", Sort::Rat),
                Value::Rat(ratio(rats[0].0, rats[0].1)),
            )
            .unwrap();
            a.set(
                Var::plain("d", Sort::Rat),
                Value::Rat(ratio(rats[1].0, rats[1].1)),
            )
            .unwrap();
            a.set(Var::plain("flag", Sort::Bool), Value::Bool(flag))
                .unwrap();
            a
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn evaluation_is_compositional(
        c1 in arb_constraint(),
        c2 in arb_constraint(),
        a in arb_assignment(),
    ) {
        let both = Constraint::and(vec![c1.clone(), c2.clone()]);
        prop_assert_eq!(
            both.evaluate(&a).unwrap(),
            c1.evaluate(&a).unwrap() && c2.evaluate(&a).unwrap()
        );
        let either = Constraint::or(vec![c1.clone(), c2.clone()]);
        prop_assert_eq!(
            either.evaluate(&a).unwrap(),
            c1.evaluate(&a).unwrap() || c2.evaluate(&a).unwrap()
        );
        prop_assert_eq!(
            Constraint::not(c1.clone()).evaluate(&a).unwrap(),
            !c1.evaluate(&a).unwrap()
        );
    }

    #[test]
    fn simplify_preserves_meaning(c in arb_constraint(), a in arb_assignment()) {
        let s = simplify(&c);
        prop_assert_eq!(s.evaluate(&a).unwrap(), c.evaluate(&a).unwrap(), "simplified {}", s);
    }

    #[test]
    fn canonical_key_is_sound_for_equality(c in arb_constraint(), a in arb_assignment()) {
        // Equal keys must mean equal truth values everywhere; sampled.
        let again = simplify(&c);
        if canonical_key(&again) == canonical_key(&c) {
            prop_assert_eq!(again.evaluate(&a).unwrap(), c.evaluate(&a).unwrap());
        }
    }

    #[test]
    fn rename_round_trips_through_fresh_names(c in arb_constraint(), a in arb_assignment()) {
        // Push every variable onto a fresh copy and back.
        let mut forward = dpncheck_core::constraint::Substitution::new();
        let mut backward = dpncheck_core::constraint::Substitution::new();
        for v in c.free_vars() {
            let fresh = Var { name: format!("{}_fresh", v.name), sort: v.sort, kind: v.kind };
            forward.insert_var(v.clone(), fresh.clone());
            backward.insert_var(fresh, v);
        }
        let there = c.rename(&forward).unwrap();
        let back = there.rename(&backward).unwrap();
        prop_assert_eq!(back.evaluate(&a).unwrap(), c.evaluate(&a).unwrap());
        prop_assert_eq!(canonical_key(&back), canonical_key(&c));
    }

    #[test]
    fn transition_formula_implies_frames(
        guard in arb_atom(),
        a in arb_assignment(),
        writes in proptest::collection::vec(-3i64..=3, 5),
    ) {
        // Build β over read/written copies: reads from `a`, writes from
        // the sampled values. For unwritten vars the frame must force
        // equality — satisfied β implies copied values.
        let all_vars: Vec<Var> = vec![
            Var::plain("a", Sort::Int),
            Var::plain("b", Sort::Int),
            Var::plain("c", Sort::Rat),
            Var::plain("d", Sort::Rat),
            Var::plain("flag", Sort::Bool),
        ];
        // Lift the plain-variable guard onto read/written copies: reads
        // for one side, writes for the other when the atom allows it.
        let mut to_rw = dpncheck_core::constraint::Substitution::new();
        for (i, v) in all_vars.iter().enumerate() {
            let kind = if i % 2 == 0 { VarKind::Read } else { VarKind::Written };
            to_rw.insert_var(v.clone(), v.with_kind(kind));
        }
        let guard = guard.rename(&to_rw).unwrap();
        let delta = transition_formula(&guard, &all_vars);
        let written: BTreeSet<Var> = guard.write_vars();

        let mut beta = Assignment::new();
        for (i, v) in all_vars.iter().enumerate() {
            let value = a.get(v).unwrap().clone();
            beta.set(v.with_kind(VarKind::Read), value.clone()).unwrap();
            let written_value = if written.contains(v) {
                match v.sort {
                    Sort::Int => Value::int(writes[i]),
                    Sort::Rat => Value::Rat(rat(writes[i])),
                    Sort::Bool => Value::Bool(writes[i] % 2 == 0),
                }
            } else {
                value
            };
            beta.set(v.with_kind(VarKind::Written), written_value).unwrap();
        }
        // β frames unwritten variables by construction, so Δ evaluates
        // exactly like the guard.
        prop_assert_eq!(delta.evaluate(&beta).unwrap(), guard.evaluate(&beta).unwrap());

        // And whenever Δ holds, unwritten copies agree.
        if delta.evaluate(&beta).unwrap() {
            for v in &all_vars {
                if !written.contains(v) {
                    prop_assert_eq!(
                        beta.get(&v.with_kind(VarKind::Read)),
                        beta.get(&v.with_kind(VarKind::Written))
                    );
                }
            }
        }
    }

    #[test]
    fn equality_elimination_preserves_truth(
        c in arb_constraint(),
        a in arb_assignment(),
    ) {
        // Eliminating a variable the constraint pins by equality keeps
        // the remaining formula's truth value at any extension.
        let vars = vec![Var::plain("a", Sort::Int), Var::plain("c", Sort::Rat)];
        let (left, reduced) = eliminate_equalities(&vars, &c);
        // Only check instances where elimination fully succeeded and the
        // eliminated variable is genuinely pinned by the assignment.
        if left.is_empty() {
            // reduced has no a/c unless they were free in `c`'s pinning
            // terms; evaluating both under the same total assignment must
            // agree whenever c holds (∃-witness is the pinned value).
            if c.evaluate(&a).unwrap() {
                prop_assert!(reduced.evaluate(&a).unwrap(), "reduced {} must hold", reduced);
            }
        }
    }
}

#[test]
fn exact_arithmetic_regression() {
    // No precision loss across scaled rationals.
    let third: Rat = ratio(1, 3);
    let mut acc = Rat::zero();
    for _ in 0..300 {
        acc += &third;
    }
    assert_eq!(acc, rat(100));
}

use num_traits::Zero;
