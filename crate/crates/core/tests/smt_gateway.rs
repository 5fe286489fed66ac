//! Gateway integration against a live solver: satisfiability with
//! models, quantifier elimination, equivalence, and caching.

mod common;

use common::{auction_formula, gateway};
use dpncheck_core::constraint::{rat, Assignment, CmpOp, Constraint, LinTerm, Sort, Value, Var};
use dpncheck_core::oracle::DomainBox;
use dpncheck_core::smt::{SatResult, SmtError, SmtGateway, SolverConfig};

fn int_var(name: &str) -> Var {
    Var::plain(name, Sort::Int)
}

fn atom(lhs: LinTerm, op: CmpOp, rhs: LinTerm) -> Constraint {
    Constraint::cmp(lhs, op, rhs)
}

#[test]
fn sat_with_model_on_blocked_shape() {
    let mut gw = gateway();
    // o_0 = 0 && t_0 <= 0 — the blocked formula of the auction model.
    let c = auction_formula("o_0 = 0 && t_0 <= 0");
    match gw.is_sat(&c).unwrap() {
        SatResult::Sat(model) => {
            assert_eq!(c.evaluate(&model), Ok(true));
            let o0 = Var::placeholder("o", Sort::Rat);
            assert_eq!(model.get(&o0).unwrap(), &Value::Rat(rat(0)));
        }
        other => panic!("expected sat, got {other:?}"),
    }
}

#[test]
fn unsat_cases() {
    let mut gw = gateway();
    assert_eq!(gw.is_sat(&Constraint::ff()).unwrap(), SatResult::Unsat);
    let x = int_var("x");
    let contradictory = Constraint::and(vec![
        atom(
            LinTerm::var(x.clone()),
            CmpOp::Gt,
            LinTerm::constant(rat(0)),
        ),
        atom(LinTerm::var(x), CmpOp::Lt, LinTerm::constant(rat(0))),
    ]);
    assert_eq!(gw.is_sat(&contradictory).unwrap(), SatResult::Unsat);
}

#[test]
fn models_satisfy_their_query() {
    let mut gw = gateway();
    let b = Var::plain("flag", Sort::Bool);
    let y = Var::plain("y", Sort::Rat);
    let queries = vec![
        auction_formula("2*o + 1/2 <= t && t < 3"),
        Constraint::and(vec![
            Constraint::BoolVar(b.clone()),
            atom(
                LinTerm::var(y.clone()),
                CmpOp::Gt,
                LinTerm::constant(rat(7)),
            ),
        ]),
        Constraint::or(vec![
            Constraint::not(Constraint::BoolVar(b)),
            atom(LinTerm::var(y), CmpOp::Eq, LinTerm::constant(rat(-2))),
        ]),
    ];
    for q in queries {
        match gw.is_sat(&q).unwrap() {
            SatResult::Sat(model) => assert_eq!(q.evaluate(&model), Ok(true), "query {q}"),
            other => panic!("expected sat for {q}, got {other:?}"),
        }
    }
}

#[test]
fn qe_of_bid_update_matches_hand_elimination() {
    // ∃o',t'. t'>0 && o'=0 && o>o' && t=t'  ≡  t>0 && o>0
    let mut gw = gateway();
    let o_pre = Var::plain("o.qe", Sort::Rat);
    let t_pre = Var::plain("t.qe", Sort::Rat);
    let o = Var::plain("o", Sort::Rat);
    let t = Var::plain("t", Sort::Rat);
    let body = Constraint::and(vec![
        atom(
            LinTerm::var(t_pre.clone()),
            CmpOp::Gt,
            LinTerm::constant(rat(0)),
        ),
        atom(
            LinTerm::var(o_pre.clone()),
            CmpOp::Eq,
            LinTerm::constant(rat(0)),
        ),
        atom(
            LinTerm::var(o.clone()),
            CmpOp::Gt,
            LinTerm::var(o_pre.clone()),
        ),
        atom(
            LinTerm::var(t.clone()),
            CmpOp::Eq,
            LinTerm::var(t_pre.clone()),
        ),
    ]);
    let result = gw.qe(&[o_pre, t_pre], &body).unwrap();
    let expected = auction_formula("t > 0 && o > 0");
    assert!(gw.equivalent(&result, &expected).unwrap(), "got {result}");
    // And the simplified form is small: two atoms.
    let small = format!("{result}");
    assert!(small.split("&&").count() <= 2, "not shrunk: {small}");
}

#[test]
fn qe_is_vacuous_on_non_free_variables() {
    let mut gw = gateway();
    let c = auction_formula("o > 0");
    let x = int_var("unused");
    let result = gw.qe(&[x], &c).unwrap();
    assert_eq!(result, c);
}

#[test]
fn qe_of_final_formula_disjunction() {
    // As printed, the three final formulas of the placeholder graph
    // project to t_0 > 0 once the current values are eliminated.
    let mut gw = gateway();
    let phi1 = auction_formula("o = o_0 && o_0 > 0 && t = t_0 && t_0 > 0");
    let phi2 = auction_formula("o = o_0 && o_0 > 0 && t_0 > t && t <= 0 && t_0 > 0");
    let phi3 = auction_formula("o > o_0 && o > 0 && t_0 > t && t <= 0 && t_0 > 0");
    let disjunction = Constraint::or(vec![phi1, phi2, phi3]);
    let vars = vec![Var::plain("o", Sort::Rat), Var::plain("t", Sort::Rat)];
    let result = gw.qe(&vars, &disjunction).unwrap();
    let expected = auction_formula("t_0 > 0");
    assert!(gw.equivalent(&result, &expected).unwrap(), "got {result}");

    // Independent finite check: for every grid point, membership in the
    // eliminated formula coincides with satisfiability of the original.
    let box_ = DomainBox::from_range(-2, 2);
    let o0 = Var::placeholder("o", Sort::Rat);
    let t0 = Var::placeholder("t", Sort::Rat);
    for ov in box_.values_for(&o0) {
        for tv in box_.values_for(&t0) {
            let point: Assignment = [(o0.clone(), ov.clone()), (t0.clone(), tv.clone())]
                .into_iter()
                .collect();
            let member = result.evaluate(&point).unwrap();
            let grounded =
                Constraint::and(vec![disjunction.clone(), Constraint::of_assignment(&point)]);
            let witnessed = gw.is_sat_bool(&grounded).unwrap();
            assert_eq!(member, witnessed, "disagreement at o_0={ov}, t_0={tv}");
        }
    }
}

#[test]
fn equivalence_examples() {
    let mut gw = gateway();
    let a = auction_formula("t > 0 && o > 0");
    let b = auction_formula("o > 0 && t > 0");
    assert!(gw.equivalent(&a, &b).unwrap());

    let c = auction_formula("o = 0");
    let d = auction_formula("o = 0 && t > 0");
    assert!(!gw.equivalent(&c, &d).unwrap());

    // Integer tightening: x >= 1 iff x > 0 over the integers.
    let x = int_var("x");
    let ge1 = atom(
        LinTerm::var(x.clone()),
        CmpOp::Ge,
        LinTerm::constant(rat(1)),
    );
    let gt0 = atom(LinTerm::var(x), CmpOp::Gt, LinTerm::constant(rat(0)));
    assert!(gw.equivalent(&ge1, &gt0).unwrap());
}

#[test]
fn equivalence_is_an_equivalence_relation() {
    let mut gw = gateway();
    let forms = [
        auction_formula("o > 0"),
        auction_formula("0 < o"),
        auction_formula("2*o > 0"),
        auction_formula("o > 0 && o > -1"),
    ];
    for f in &forms {
        assert!(gw.equivalent(f, f).unwrap(), "reflexive on {f}");
    }
    for a in &forms {
        for b in &forms {
            assert_eq!(
                gw.equivalent(a, b).unwrap(),
                gw.equivalent(b, a).unwrap(),
                "symmetric on {a}, {b}"
            );
        }
    }
    // Transitivity spot check across the chain.
    assert!(gw.equivalent(&forms[0], &forms[1]).unwrap());
    assert!(gw.equivalent(&forms[1], &forms[2]).unwrap());
    assert!(gw.equivalent(&forms[0], &forms[2]).unwrap());
}

#[test]
fn qe_soundness_sampled() {
    // For ψ = qe(∃X. c): over sampled assignments a of the free
    // variables, a ⊨ ψ iff c ∧ (a as equalities) is satisfiable.
    let mut gw = gateway();
    let x = int_var("x");
    let y = int_var("y");
    let z = int_var("z");
    let instances = vec![
        // ∃x. y <= x && x <= z
        Constraint::and(vec![
            atom(LinTerm::var(y.clone()), CmpOp::Le, LinTerm::var(x.clone())),
            atom(LinTerm::var(x.clone()), CmpOp::Le, LinTerm::var(z.clone())),
        ]),
        // ∃x. x > y && x < z  (integer gap matters)
        Constraint::and(vec![
            atom(LinTerm::var(x.clone()), CmpOp::Gt, LinTerm::var(y.clone())),
            atom(LinTerm::var(x.clone()), CmpOp::Lt, LinTerm::var(z.clone())),
        ]),
        // ∃x. y = x && (x >= 0 || z < x)
        Constraint::and(vec![
            atom(LinTerm::var(y.clone()), CmpOp::Eq, LinTerm::var(x.clone())),
            Constraint::or(vec![
                atom(
                    LinTerm::var(x.clone()),
                    CmpOp::Ge,
                    LinTerm::constant(rat(0)),
                ),
                atom(LinTerm::var(z.clone()), CmpOp::Lt, LinTerm::var(x.clone())),
            ]),
        ]),
    ];
    let mut checked = 0;
    for c in instances {
        let psi = gw.qe(std::slice::from_ref(&x), &c).unwrap();
        for yv in -5..5 {
            for zv in -5..5 {
                let a: Assignment = [(y.clone(), Value::int(yv)), (z.clone(), Value::int(zv))]
                    .into_iter()
                    .collect();
                let member = psi.evaluate(&a).unwrap();
                let grounded = Constraint::and(vec![c.clone(), Constraint::of_assignment(&a)]);
                assert_eq!(
                    member,
                    gw.is_sat_bool(&grounded).unwrap(),
                    "at y={yv}, z={zv} for {c}"
                );
                checked += 1;
            }
        }
    }
    assert!(checked >= 100);
}

#[test]
fn qe_handles_mixed_sorts_and_booleans() {
    let mut gw = gateway();
    let n = int_var("n");
    let q = Var::plain("q", Sort::Rat);
    let flag = Var::plain("flag", Sort::Bool);
    // ∃n, flag. n >= 0 && q > n && (flag || n >= 1)
    let body = Constraint::and(vec![
        atom(
            LinTerm::var(n.clone()),
            CmpOp::Ge,
            LinTerm::constant(rat(0)),
        ),
        atom(
            LinTerm::var(q.clone()),
            CmpOp::Gt,
            LinTerm::constant(rat(0)),
        ),
        Constraint::or(vec![
            Constraint::BoolVar(flag.clone()),
            atom(
                LinTerm::var(n.clone()),
                CmpOp::Ge,
                LinTerm::constant(rat(1)),
            ),
        ]),
    ]);
    let result = gw.qe(&[n, flag.clone()], &body).unwrap();
    let expected = atom(LinTerm::var(q), CmpOp::Gt, LinTerm::constant(rat(0)));
    assert!(gw.equivalent(&result, &expected).unwrap(), "got {result}");

    // Eliminating only the boolean keeps the numeric structure.
    let keep = Constraint::or(vec![
        Constraint::BoolVar(flag.clone()),
        auction_formula("o > 1"),
    ]);
    let result = gw.qe(&[flag], &keep).unwrap();
    assert!(gw.equivalent(&result, &Constraint::tt()).unwrap());
}

#[test]
fn cache_changes_stats_but_never_answers() {
    let run = |cache: bool| -> (Vec<bool>, u64, u64) {
        let mut config = SolverConfig::from_env().unwrap();
        config.cache = cache;
        let mut gw = SmtGateway::new(config).unwrap();
        let queries = [
            auction_formula("o > 0 && o < 1/2"),
            auction_formula("o > 0 && o < 1/2"),
            auction_formula("o > 1 && o < 1"),
            auction_formula("o > 1 && o < 1"),
        ];
        let answers: Vec<bool> = queries.iter().map(|q| gw.is_sat_bool(q).unwrap()).collect();
        (answers, gw.stats.sat_checks, gw.stats.cache_hits)
    };
    let (with_cache, calls_cached, hits_cached) = run(true);
    let (without_cache, calls_plain, hits_plain) = run(false);
    assert_eq!(with_cache, without_cache);
    assert_eq!(with_cache, vec![true, true, false, false]);
    assert_eq!(calls_cached, calls_plain);
    assert!(hits_cached >= 2);
    assert_eq!(hits_plain, 0);
}

#[test]
fn forked_gateways_share_the_cache() {
    let mut gw = gateway();
    let q = auction_formula("o > 0 && t <= -1");
    assert!(gw.is_sat_bool(&q).unwrap());
    let mut worker = gw.fork().unwrap();
    assert!(worker.is_sat_bool(&q).unwrap());
    assert_eq!(worker.stats.cache_hits, 1);
}

#[test]
fn stats_are_monotone() {
    let mut gw = gateway();
    let mut last = gw.stats.clone();
    for text in ["o > 0", "o > 1", "o > 0 && t > 0"] {
        gw.is_sat_bool(&auction_formula(text)).unwrap();
        let now = gw.stats.clone();
        assert!(now.sat_checks >= last.sat_checks);
        assert!(now.cache_hits >= last.cache_hits);
        assert!(now.elapsed >= last.elapsed);
        last = now;
    }
}

#[test]
fn unavailable_solver_is_a_clean_error() {
    let config = SolverConfig::new("/nonexistent/solver-binary");
    match SmtGateway::new(config) {
        Err(SmtError::SolverUnavailable(msg)) => {
            assert!(msg.contains("/nonexistent/solver-binary"))
        }
        other => panic!("expected SolverUnavailable, got {:?}", other.err()),
    }
}

#[test]
fn unknown_answers_surface_as_inconclusive() {
    // A fake solver that always answers `unknown`.
    use std::io::Write;
    use std::os::unix::fs::PermissionsExt;
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("fake-solver");
    let mut f = std::fs::File::create(&path).unwrap();
    writeln!(
        f,
        "#!/bin/sh\nwhile read line; do\n  case \"$line\" in\n    *check-sat*) echo unknown ;;\n    *reason-unknown*) echo '(:reason-unknown \"fake timeout\")' ;;\n    *echo*) echo dpncheck-sync ;;\n  esac\ndone"
    )
    .unwrap();
    drop(f);
    std::fs::set_permissions(&path, std::fs::Permissions::from_mode(0o755)).unwrap();

    let mut config = SolverConfig::new(&path);
    config.dialect = Some(dpncheck_core::smt::session::Dialect::Z3);
    let mut gw = SmtGateway::new(config).unwrap();
    let q = auction_formula("o > 0");
    match gw.is_sat(&q).unwrap() {
        SatResult::Unknown(reason) => assert!(reason.contains("fake timeout")),
        other => panic!("expected unknown, got {other:?}"),
    }
    match gw.equivalent(&q, &q.clone()) {
        Ok(true) => {} // syntactic fast path, no solver involved
        other => panic!("unexpected {other:?}"),
    }
    // A pair the sample panel cannot separate must consult the solver.
    let r = gw.equivalent(&q, &auction_formula("o > 0 && o < 10000"));
    assert!(matches!(r, Err(SmtError::Inconclusive(_))));
}
