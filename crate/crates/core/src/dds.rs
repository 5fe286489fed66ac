//! Unfolding a bounded DPN into a finite labelled transition system
//! over markings, with per-action guards: the input for constraint
//! graph construction.
//!
//! States are the flow-reachable k-bounded markings (guards ignored).
//! That over-approximates "all k-bounded markings" but yields the same
//! constraint graph, since graph construction only ever walks edges
//! out of guard-reachable nodes. Two net transitions sharing a label
//! stay distinct actions here, so dead transitions can be reported per
//! transition id rather than per label.

use std::collections::{BTreeSet, HashMap, VecDeque};

use thiserror::Error;

use crate::constraint::{transition_formula, Assignment, Constraint, Value, Var, VarKind};
use crate::dpn::{token_enabled, Dpn, Marking};

/// One action of the transition system: a net transition with its
/// precomputed transition formula (guard plus frame equalities).
#[derive(Clone, Debug)]
pub struct DdsAction {
    pub transition_id: String,
    pub label: String,
    pub guard: Constraint,
    pub delta: Constraint,
    pub writes: BTreeSet<Var>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DdsEdge {
    pub from: usize,
    pub action: usize,
    pub to: usize,
}

/// The unfolded transition system. `actions[i]` corresponds to the
/// i-th transition of the originating net.
#[derive(Clone, Debug)]
pub struct Dds {
    pub states: Vec<Marking>,
    pub initial: usize,
    pub final_state: Option<usize>,
    pub final_marking: Marking,
    pub actions: Vec<DdsAction>,
    pub edges: Vec<DdsEdge>,
    pub out: Vec<Vec<usize>>,
    pub vars: Vec<Var>,
    pub initial_assignment: Assignment,
}

impl Dds {
    pub fn state_index(&self, m: &Marking) -> Option<usize> {
        self.states.iter().position(|s| s == m)
    }

    pub fn is_final(&self, state: usize) -> bool {
        self.final_state == Some(state)
    }

    pub fn outgoing(&self, state: usize) -> impl Iterator<Item = &DdsEdge> {
        self.out[state].iter().map(|&e| &self.edges[e])
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DdsError {
    #[error("marking {marking} exceeds the bound k={k}; pass a larger --bound or fix the net")]
    BoundExceeded { k: u32, marking: String },
}

/// Unfolds the flow-reachable k-bounded markings of a validated DPN.
pub fn dpn_to_dds(dpn: &Dpn, k: u32) -> Result<Dds, DdsError> {
    let bound_check = |m: &Marking| -> Result<(), DdsError> {
        if m.max_tokens() > k {
            Err(DdsError::BoundExceeded {
                k,
                marking: m.to_string(),
            })
        } else {
            Ok(())
        }
    };
    bound_check(&dpn.initial_marking)?;
    bound_check(&dpn.final_marking)?;

    let actions: Vec<DdsAction> = dpn
        .transitions
        .iter()
        .map(|t| DdsAction {
            transition_id: t.id.clone(),
            label: t.label.clone(),
            guard: t.guard.clone(),
            delta: transition_formula(&t.guard, &dpn.vars),
            writes: t.guard.write_vars(),
        })
        .collect();

    let mut states = vec![dpn.initial_marking.clone()];
    let mut index: HashMap<Marking, usize> = HashMap::new();
    index.insert(dpn.initial_marking.clone(), 0);
    let mut edges = Vec::new();
    let mut out: Vec<Vec<usize>> = vec![Vec::new()];
    let mut queue = VecDeque::from([0usize]);

    while let Some(from) = queue.pop_front() {
        for (ti, t) in dpn.transitions.iter().enumerate() {
            let marking = states[from].clone();
            if !token_enabled(t, &marking) {
                continue;
            }
            let mut next = marking;
            for (p, &n) in &t.pre {
                next.set(p, next.tokens(p) - n);
            }
            for (p, &n) in &t.post {
                next.set(p, next.tokens(p) + n);
            }
            bound_check(&next)?;
            let to = match index.get(&next) {
                Some(&idx) => idx,
                None => {
                    let idx = states.len();
                    states.push(next.clone());
                    index.insert(next, idx);
                    out.push(Vec::new());
                    queue.push_back(idx);
                    idx
                }
            };
            out[from].push(edges.len());
            edges.push(DdsEdge {
                from,
                action: ti,
                to,
            });
        }
    }

    let final_state = index.get(&dpn.final_marking).copied();
    Ok(Dds {
        states,
        initial: 0,
        final_state,
        final_marking: dpn.final_marking.clone(),
        actions,
        edges,
        out,
        vars: dpn.vars.clone(),
        initial_assignment: dpn.initial_assignment.clone(),
    })
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StepError {
    #[error("no transition-system edge for action {action} from state {state}")]
    NoEdge { state: usize, action: usize },
    #[error("step reads {var} as {got}, but the configuration holds {expected}")]
    ReadMismatch {
        var: String,
        got: String,
        expected: String,
    },
    #[error("step does not satisfy the guard of {0}")]
    GuardFailed(String),
    #[error("step omits a value for {0}")]
    MissingValue(String),
    #[error("{0}")]
    Eval(String),
}

/// One step of the transition system from configuration
/// `(state, assignment)` via `(action, beta)`. The reads of `beta`
/// must pin every process variable.
pub fn dds_step(
    dds: &Dds,
    state: usize,
    assignment: &Assignment,
    action: usize,
    beta: &Assignment,
) -> Result<(usize, Assignment), StepError> {
    let edge = dds
        .outgoing(state)
        .find(|e| e.action == action)
        .copied()
        .ok_or(StepError::NoEdge { state, action })?;
    let info = &dds.actions[action];
    for v in &dds.vars {
        let read = v.with_kind(VarKind::Read);
        let got = beta
            .get(&read)
            .ok_or_else(|| StepError::MissingValue(read.to_string()))?;
        let expected = assignment
            .get(v)
            .ok_or_else(|| StepError::MissingValue(v.to_string()))?;
        if got != expected {
            return Err(StepError::ReadMismatch {
                var: v.name.clone(),
                got: got.to_string(),
                expected: expected.to_string(),
            });
        }
    }
    if !info
        .guard
        .evaluate(beta)
        .map_err(|e| StepError::Eval(e.to_string()))?
    {
        return Err(StepError::GuardFailed(info.transition_id.clone()));
    }
    let mut next = Assignment::new();
    for v in &dds.vars {
        let value: Value = if info.writes.contains(v) {
            beta.get(&v.with_kind(VarKind::Written))
                .ok_or_else(|| StepError::MissingValue(format!("{}'", v.name)))?
                .clone()
        } else {
            assignment.get(v).unwrap().clone()
        };
        next.set(v.clone(), value)
            .map_err(|e| StepError::Eval(e.to_string()))?;
    }
    Ok((edge.to, next))
}
