//! Random net generation for the test harness (behind the `testgen`
//! feature; not part of the shipped tool).
//!
//! Generated guards use only variable-to-constant and
//! variable-to-variable comparisons with constants in a small range,
//! and every written variable is clamped by explicit bounds, so the
//! nets have finite history sets and box-restricted enumeration is
//! exact on them.

use rand::Rng;

use crate::constraint::{rat, Assignment, CmpOp, Constraint, LinTerm, Sort, Value, Var, VarKind};
use crate::dpn::{Dpn, Marking, Transition};

#[derive(Debug, Clone)]
pub struct GenParams {
    pub max_places: usize,
    pub max_transitions: usize,
    pub max_vars: usize,
    pub const_range: i64,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams {
            max_places: 4,
            max_transitions: 4,
            max_vars: 2,
            const_range: 2,
        }
    }
}

pub fn random_dpn(rng: &mut impl Rng, params: &GenParams) -> Dpn {
    let n_places = rng.random_range(2..=params.max_places);
    let n_transitions = rng.random_range(1..=params.max_transitions);
    let n_vars = rng.random_range(0..=params.max_vars);
    let places: Vec<String> = (1..=n_places).map(|i| format!("p{i}")).collect();
    let vars: Vec<Var> = (1..=n_vars)
        .map(|i| Var::plain(format!("v{i}"), Sort::Int))
        .collect();
    let mut initial_assignment = Assignment::new();
    for v in &vars {
        initial_assignment.set(v.clone(), Value::int(0)).unwrap();
    }

    let mut transitions = Vec::new();
    for i in 1..=n_transitions {
        // Bias toward forward token flow (consume early places, produce
        // later ones) so runs and termination are common; sprinkle in
        // fully random arcs for branching, loops, and dead structure.
        let mut pre = std::collections::BTreeMap::new();
        let mut post = std::collections::BTreeMap::new();
        if rng.random_bool(0.7) {
            let from = (i - 1).min(n_places - 1);
            pre.insert(places[from].clone(), 1u32);
            let to = rng.random_range(from.min(n_places - 1)..n_places);
            post.insert(places[to].clone(), 1u32);
        } else {
            for _ in 0..rng.random_range(1..=2usize) {
                pre.insert(places[rng.random_range(0..n_places)].clone(), 1u32);
            }
            for _ in 0..rng.random_range(1..=2usize) {
                post.insert(places[rng.random_range(0..n_places)].clone(), 1u32);
            }
        }
        let guard = random_guard(rng, &vars, params.const_range);
        transitions.push(Transition {
            id: format!("t{i}"),
            label: format!("t{i}"),
            guard,
            pre,
            post,
        });
    }

    Dpn {
        name: "random".into(),
        places: places.clone(),
        transitions,
        vars,
        initial_marking: Marking::of(&[(places[0].as_str(), 1)]),
        final_marking: Marking::of(&[(places[places.len() - 1].as_str(), 1)]),
        initial_assignment,
    }
}

fn random_guard(rng: &mut impl Rng, vars: &[Var], range: i64) -> Constraint {
    if vars.is_empty() {
        return Constraint::tt();
    }
    let mut parts = Vec::new();
    // Written variables, each clamped inside [-range, range].
    for v in vars {
        if rng.random_bool(0.4) {
            let lo = rng.random_range(-range..=range);
            let hi = rng.random_range(lo..=range);
            let written = LinTerm::var(v.with_kind(VarKind::Written));
            parts.push(Constraint::cmp(
                written.clone(),
                CmpOp::Ge,
                LinTerm::constant(rat(lo)),
            ));
            parts.push(Constraint::cmp(
                written,
                CmpOp::Le,
                LinTerm::constant(rat(hi)),
            ));
        }
    }
    // A few read-only atoms, sometimes disjoined.
    let read_atom = |rng: &mut dyn rand::RngCore| {
        let v = &vars[rng.random_range(0..vars.len())];
        let op = [
            CmpOp::Eq,
            CmpOp::Ne,
            CmpOp::Ge,
            CmpOp::Gt,
            CmpOp::Le,
            CmpOp::Lt,
        ][rng.random_range(0..6)];
        let lhs = LinTerm::var(v.with_kind(VarKind::Read));
        if rng.random_bool(0.3) && vars.len() > 1 {
            let u = &vars[rng.random_range(0..vars.len())];
            Constraint::cmp(lhs, op, LinTerm::var(u.with_kind(VarKind::Read)))
        } else {
            let c = rng.random_range(-range..=range);
            Constraint::cmp(lhs, op, LinTerm::constant(rat(c)))
        }
    };
    let extra = rng.random_range(0..=2);
    for _ in 0..extra {
        if rng.random_bool(0.25) {
            parts.push(Constraint::or(vec![read_atom(rng), read_atom(rng)]));
        } else {
            parts.push(read_atom(rng));
        }
    }
    Constraint::and(parts)
}
