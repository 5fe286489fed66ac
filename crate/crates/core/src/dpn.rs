//! Data Petri nets: markings, transition firing, and validation.
//!
//! This is the concrete-state engine. The symbolic checker never fires
//! transitions itself but reuses these semantics to replay witnesses,
//! and the brute-force oracle is built directly on top of them.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::constraint::{Assignment, Constraint, Sort, Value, Var, VarKind};
use crate::smt::{SatResult, SmtError, SmtGateway};

/// A marking: tokens per place. Zero entries are not stored, so equal
/// markings compare equal structurally.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Marking(BTreeMap<String, u32>);

impl Marking {
    pub fn new() -> Self {
        Marking(BTreeMap::new())
    }

    pub fn of(entries: &[(&str, u32)]) -> Self {
        let mut m = Marking::new();
        for (p, n) in entries {
            m.set(p, *n);
        }
        m
    }

    pub fn set(&mut self, place: &str, tokens: u32) {
        if tokens == 0 {
            self.0.remove(place);
        } else {
            self.0.insert(place.to_string(), tokens);
        }
    }

    pub fn tokens(&self, place: &str) -> u32 {
        self.0.get(place).copied().unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &u32)> {
        self.0.iter()
    }

    pub fn total(&self) -> u64 {
        self.0.values().map(|&n| n as u64).sum()
    }

    /// Pointwise comparison `self >= other`.
    pub fn geq(&self, other: &Marking) -> bool {
        other.iter().all(|(p, &n)| self.tokens(p) >= n)
    }

    /// Largest per-place token count.
    pub fn max_tokens(&self) -> u32 {
        self.0.values().copied().max().unwrap_or(0)
    }
}

impl fmt::Display for Marking {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "∅");
        }
        for (i, (p, n)) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            if *n == 1 {
                write!(f, "{p}")?;
            } else {
                write!(f, "{n}{p}")?;
            }
        }
        Ok(())
    }
}

/// A net transition: identifier, activity label, and a guard over
/// read/written variable copies, plus its pre- and post-multisets.
#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub id: String,
    pub label: String,
    pub guard: Constraint,
    pub pre: BTreeMap<String, u32>,
    pub post: BTreeMap<String, u32>,
}

/// A Data Petri net with one initial and one final marking.
#[derive(Clone, Debug, PartialEq)]
pub struct Dpn {
    pub name: String,
    pub places: Vec<String>,
    pub transitions: Vec<Transition>,
    pub vars: Vec<Var>,
    pub initial_marking: Marking,
    pub final_marking: Marking,
    pub initial_assignment: Assignment,
}

impl Dpn {
    pub fn var_decls(&self) -> BTreeMap<String, Sort> {
        self.vars.iter().map(|v| (v.name.clone(), v.sort)).collect()
    }

    pub fn transition_index(&self, id: &str) -> Option<usize> {
        self.transitions.iter().position(|t| t.id == id)
    }
}

/// A concrete state: marking plus a total assignment over the
/// process variables.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DpnState {
    pub marking: Marking,
    pub assignment: BTreeMap<Var, Value>,
}

impl DpnState {
    pub fn new(marking: Marking, assignment: &Assignment) -> Self {
        DpnState {
            marking,
            assignment: assignment
                .iter()
                .map(|(v, x)| (v.clone(), x.clone()))
                .collect(),
        }
    }

    pub fn assignment(&self) -> Assignment {
        self.assignment
            .iter()
            .map(|(v, x)| (v.clone(), x.clone()))
            .collect()
    }
}

/// A transition plus the variable assignment `β` over read/written
/// copies justifying its firing.
#[derive(Clone, Debug, PartialEq)]
pub struct TransitionFiring {
    pub transition: usize,
    pub beta: Assignment,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FireError {
    #[error("transition {0} is not token-enabled")]
    NotEnabled(String),
    #[error("firing reads {var} as {got}, but the state holds {expected}")]
    ReadMismatch {
        var: String,
        got: String,
        expected: String,
    },
    #[error("firing does not satisfy the guard of {0}")]
    GuardFailed(String),
    #[error("firing omits a value for read variable {0}")]
    MissingRead(String),
    #[error("firing omits a value for written variable {0}")]
    MissingWrite(String),
    #[error("{0}")]
    Eval(String),
}

/// Token-level enablement: every pre-place holds enough tokens.
pub fn token_enabled(t: &Transition, marking: &Marking) -> bool {
    t.pre.iter().all(|(p, &n)| marking.tokens(p) >= n)
}

/// Searches for a transition variable assignment `β` enabling `t` in
/// `state`: reads pinned to the current values, writes chosen by the
/// solver. Returns `None` when tokens are missing or the guard is
/// unsatisfiable under the pinned reads.
pub fn enabled_firing(
    dpn: &Dpn,
    state: &DpnState,
    transition: usize,
    gateway: &mut SmtGateway,
) -> Result<Option<TransitionFiring>, SmtError> {
    let t = &dpn.transitions[transition];
    if !token_enabled(t, &state.marking) {
        return Ok(None);
    }
    let reads = t.guard.read_vars();
    let mut parts = vec![t.guard.clone()];
    for v in &reads {
        let value = state
            .assignment
            .get(&v.with_kind(VarKind::Plain))
            .ok_or_else(|| SmtError::BadResponse(format!("state misses a value for {}", v.name)))?;
        parts.push(Constraint::var_eq_value(v.with_kind(VarKind::Read), value));
    }
    let query = Constraint::and(parts);
    match gateway.is_sat(&query)? {
        SatResult::Sat(model) => {
            let mut beta = Assignment::new();
            for v in query.free_vars() {
                if let Some(value) = model.get(&v) {
                    beta.set(v.clone(), value.clone()).expect("sorted model");
                }
            }
            // Reads not mentioned by the guard are still pinned, so that
            // β is total enough for DDS steps.
            for v in &dpn.vars {
                let read = v.with_kind(VarKind::Read);
                if beta.get(&read).is_none() {
                    let value = state.assignment[&v.with_kind(VarKind::Plain)].clone();
                    beta.set(read, value).expect("sorts agree");
                }
            }
            Ok(Some(TransitionFiring { transition, beta }))
        }
        SatResult::Unsat => Ok(None),
        SatResult::Unknown(reason) => Err(SmtError::Inconclusive(reason)),
    }
}

/// Fires a validated transition firing, producing the successor state.
pub fn fire(dpn: &Dpn, state: &DpnState, firing: &TransitionFiring) -> Result<DpnState, FireError> {
    let t = &dpn.transitions[firing.transition];
    if !token_enabled(t, &state.marking) {
        return Err(FireError::NotEnabled(t.id.clone()));
    }
    // Reads agree with the current assignment.
    for v in t.guard.read_vars() {
        let read = v.with_kind(VarKind::Read);
        let got = firing
            .beta
            .get(&read)
            .ok_or_else(|| FireError::MissingRead(read.to_string()))?;
        let expected = state
            .assignment
            .get(&v.with_kind(VarKind::Plain))
            .ok_or_else(|| FireError::Eval(format!("state misses a value for {}", v.name)))?;
        if got != expected {
            return Err(FireError::ReadMismatch {
                var: v.name.clone(),
                got: got.to_string(),
                expected: expected.to_string(),
            });
        }
    }
    if !t
        .guard
        .evaluate(&firing.beta)
        .map_err(|e| FireError::Eval(e.to_string()))?
    {
        return Err(FireError::GuardFailed(t.id.clone()));
    }
    let mut marking = state.marking.clone();
    for (p, &n) in &t.pre {
        marking.set(p, marking.tokens(p) - n);
    }
    for (p, &n) in &t.post {
        marking.set(p, marking.tokens(p) + n);
    }
    let mut assignment = state.assignment.clone();
    for v in t.guard.write_vars() {
        let written = v.with_kind(VarKind::Written);
        let value = firing
            .beta
            .get(&written)
            .ok_or_else(|| FireError::MissingWrite(written.to_string()))?;
        assignment.insert(v.with_kind(VarKind::Plain), value.clone());
    }
    Ok(DpnState {
        marking,
        assignment,
    })
}

// ── Validation ──────────────────────────────────────────────────────

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Diagnostic {
    NoPlaces,
    NoTransitions,
    IdClash(String),
    UnknownPlace {
        context: String,
        place: String,
    },
    UndeclaredVariable {
        transition: String,
        var: String,
    },
    GuardShape {
        transition: String,
        why: String,
    },
    MissingInitialValue(String),
    InitialValueSort {
        var: String,
        expected: Sort,
        got: Sort,
    },
    EmptyInitialMarking,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnostic::NoPlaces => write!(f, "the net has no places"),
            Diagnostic::NoTransitions => write!(f, "the net has no transitions"),
            Diagnostic::IdClash(id) => write!(f, "identifier '{id}' is used more than once"),
            Diagnostic::UnknownPlace { context, place } => {
                write!(f, "{context} refers to unknown place '{place}'")
            }
            Diagnostic::UndeclaredVariable { transition, var } => {
                write!(
                    f,
                    "guard of '{transition}' uses undeclared variable '{var}'"
                )
            }
            Diagnostic::GuardShape { transition, why } => {
                write!(f, "guard of '{transition}': {why}")
            }
            Diagnostic::MissingInitialValue(v) => {
                write!(f, "variable '{v}' has no initial value")
            }
            Diagnostic::InitialValueSort { var, expected, got } => {
                write!(
                    f,
                    "initial value of '{var}' has sort {got}, expected {expected}"
                )
            }
            Diagnostic::EmptyInitialMarking => write!(f, "the initial marking is empty"),
        }
    }
}

/// Structural and typing checks. An empty result means the net is
/// well-formed; every entry names the offending element.
pub fn validate(dpn: &Dpn) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    if dpn.places.is_empty() {
        out.push(Diagnostic::NoPlaces);
    }
    if dpn.transitions.is_empty() {
        out.push(Diagnostic::NoTransitions);
    }
    let mut ids = BTreeSet::new();
    for id in dpn
        .places
        .iter()
        .chain(dpn.transitions.iter().map(|t| &t.id))
    {
        if !ids.insert(id.clone()) {
            out.push(Diagnostic::IdClash(id.clone()));
        }
    }
    let places: BTreeSet<&String> = dpn.places.iter().collect();
    let check_places = |context: String, keys: Vec<&String>, out: &mut Vec<Diagnostic>| {
        for p in keys {
            if !places.contains(p) {
                out.push(Diagnostic::UnknownPlace {
                    context: context.clone(),
                    place: p.clone(),
                });
            }
        }
    };
    for t in &dpn.transitions {
        check_places(
            format!("transition '{}'", t.id),
            t.pre.keys().chain(t.post.keys()).collect(),
            &mut out,
        );
    }
    check_places(
        "the initial marking".into(),
        dpn.initial_marking.iter().map(|(p, _)| p).collect(),
        &mut out,
    );
    check_places(
        "the final marking".into(),
        dpn.final_marking.iter().map(|(p, _)| p).collect(),
        &mut out,
    );
    if dpn.initial_marking.total() == 0 {
        out.push(Diagnostic::EmptyInitialMarking);
    }

    let declared: BTreeMap<&String, Sort> = dpn.vars.iter().map(|v| (&v.name, v.sort)).collect();
    for t in &dpn.transitions {
        if let Err(why) = check_guard_shape(&t.guard) {
            out.push(Diagnostic::GuardShape {
                transition: t.id.clone(),
                why,
            });
        }
        for v in t.guard.free_vars() {
            match declared.get(&v.name) {
                None => out.push(Diagnostic::UndeclaredVariable {
                    transition: t.id.clone(),
                    var: v.name.clone(),
                }),
                Some(&sort) if sort != v.sort => out.push(Diagnostic::GuardShape {
                    transition: t.id.clone(),
                    why: format!(
                        "variable '{}' used with sort {}, declared {}",
                        v.name, v.sort, sort
                    ),
                }),
                _ => {}
            }
        }
    }
    for v in &dpn.vars {
        match dpn.initial_assignment.get(v) {
            None => out.push(Diagnostic::MissingInitialValue(v.name.clone())),
            Some(value) if value.sort() != v.sort => out.push(Diagnostic::InitialValueSort {
                var: v.name.clone(),
                expected: v.sort,
                got: value.sort(),
            }),
            _ => {}
        }
    }
    out
}

/// Guards are positive combinations of atoms over read/written copies;
/// negation, quantifiers, and plain/placeholder variables only arise in
/// internally built formulas.
fn check_guard_shape(guard: &Constraint) -> Result<(), String> {
    match guard {
        Constraint::BoolConst(_) => Ok(()),
        Constraint::BoolVar(v) => check_guard_var(v),
        Constraint::Atom(a) => {
            for v in a.lhs.vars().chain(a.rhs.vars()) {
                check_guard_var(v)?;
            }
            Ok(())
        }
        Constraint::And(parts) | Constraint::Or(parts) => {
            for p in parts {
                check_guard_shape(p)?;
            }
            Ok(())
        }
        Constraint::Not(_) => Err("negation is not part of the guard language".into()),
        Constraint::Exists(..) => Err("quantifiers are not part of the guard language".into()),
    }
}

fn check_guard_var(v: &Var) -> Result<(), String> {
    match v.kind {
        VarKind::Read | VarKind::Written => Ok(()),
        VarKind::Plain | VarKind::Placeholder => Err(format!(
            "variable occurrence '{v}' is neither read nor written"
        )),
    }
}
