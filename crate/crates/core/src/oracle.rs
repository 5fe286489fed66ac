//! Brute-force ground truth: exhaustive state-space enumeration with
//! variable values drawn from finite domain boxes, and a soundness
//! verdict derived from the explicit graph.
//!
//! The oracle decides the box-restricted system, not the full net:
//! whenever a run of the real net needs a value outside the box, the
//! oracle cannot see it. For nets whose writes are syntactically
//! bounded inside the box ([`writes_box_bounded`]) the restriction is
//! vacuous and the oracle verdict is exact.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use num_bigint::BigInt;
use thiserror::Error;

use crate::constraint::{ratio, Assignment, CmpOp, Constraint, Rat, Sort, Value, Var, VarKind};
use crate::dpn::{fire, token_enabled, Dpn, DpnState, TransitionFiring};
use crate::soundness::Property;

/// Finite value domains per sort, with optional per-variable
/// overrides. Booleans always range over both truth values.
#[derive(Debug, Clone)]
pub struct DomainBox {
    int_values: Vec<Value>,
    rat_values: Vec<Value>,
    overrides: BTreeMap<String, Vec<Value>>,
}

impl DomainBox {
    /// Integers −3..3; rationals −2..2 plus ±1/2.
    pub fn default_box() -> Self {
        DomainBox {
            int_values: (-3..=3).map(Value::int).collect(),
            rat_values: rat_grid(-2, 2),
            overrides: BTreeMap::new(),
        }
    }

    /// Integers `lo..=hi`; rationals the same plus ±1/2 (clipped).
    pub fn from_range(lo: i64, hi: i64) -> Self {
        DomainBox {
            int_values: (lo..=hi).map(Value::int).collect(),
            rat_values: rat_grid(lo, hi),
            overrides: BTreeMap::new(),
        }
    }

    pub fn with_var(mut self, name: &str, values: Vec<Value>) -> Self {
        self.overrides.insert(name.to_string(), values);
        self
    }

    pub fn values_for(&self, var: &Var) -> Vec<Value> {
        if let Some(values) = self.overrides.get(&var.name) {
            return values.clone();
        }
        match var.sort {
            Sort::Bool => vec![Value::Bool(false), Value::Bool(true)],
            Sort::Int => self.int_values.clone(),
            Sort::Rat => self.rat_values.clone(),
        }
    }

    pub fn contains(&self, var: &Var, value: &Value) -> bool {
        self.values_for(var).contains(value)
    }

    /// Interval hull of the numeric values for `var`.
    fn hull(&self, var: &Var) -> Option<(Rat, Rat)> {
        let values = self.values_for(var);
        let mut rats = values.iter().filter_map(Value::as_rat);
        let first = rats.next()?;
        let (mut lo, mut hi) = (first.clone(), first);
        for q in rats {
            if q < lo {
                lo = q.clone();
            }
            if q > hi {
                hi = q;
            }
        }
        Some((lo, hi))
    }
}

fn rat_grid(lo: i64, hi: i64) -> Vec<Value> {
    let mut grid: Vec<Rat> = (lo..=hi).map(|n| ratio(n, 1)).collect();
    for half in [ratio(-1, 2), ratio(1, 2)] {
        if half >= ratio(lo, 1) && half <= ratio(hi, 1) && !grid.contains(&half) {
            grid.push(half);
        }
    }
    grid.sort();
    grid.into_iter().map(Value::Rat).collect()
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OracleError {
    #[error("state space exceeds the cap of {cap} states")]
    Explosion { cap: usize },
    #[error("marking {marking} exceeds the bound k={k}")]
    BoundExceeded { k: u32, marking: String },
    #[error("{0}")]
    Eval(String),
}

/// One discovered successor: source state, transition, written
/// values, successor state.
type Expansion = (usize, usize, Vec<(String, Value)>, DpnState);

#[derive(Debug, Clone, PartialEq)]
pub struct OracleEdge {
    pub from: usize,
    pub transition: usize,
    pub writes: Vec<(String, Value)>,
    pub to: usize,
}

/// Explicit reachable state graph under box-restricted writes.
#[derive(Debug, Clone)]
pub struct StateGraph {
    pub states: Vec<DpnState>,
    pub edges: Vec<OracleEdge>,
    pub initial: usize,
}

impl StateGraph {
    pub fn state_index(&self, state: &DpnState) -> Option<usize> {
        self.states.iter().position(|s| s == state)
    }

    pub fn outgoing(&self, state: usize) -> impl Iterator<Item = &OracleEdge> {
        self.edges.iter().filter(move |e| e.from == state)
    }
}

/// How frontier expansion runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExecMode {
    Sequential,
    #[cfg(feature = "parallel")]
    Parallel,
}

impl ExecMode {
    pub fn auto() -> Self {
        #[cfg(feature = "parallel")]
        {
            ExecMode::Parallel
        }
        #[cfg(not(feature = "parallel"))]
        {
            ExecMode::Sequential
        }
    }
}

pub fn enumerate_state_space(
    dpn: &Dpn,
    domain: &DomainBox,
    k: u32,
    cap: usize,
) -> Result<StateGraph, OracleError> {
    enumerate_state_space_with(dpn, domain, k, cap, ExecMode::auto())
}

/// Exhaustive breadth-first enumeration from the initial state. The
/// result (states, numbering, edges) is identical for both execution
/// modes: frontier expansion order is preserved when merging.
pub fn enumerate_state_space_with(
    dpn: &Dpn,
    domain: &DomainBox,
    k: u32,
    cap: usize,
    mode: ExecMode,
) -> Result<StateGraph, OracleError> {
    let initial = DpnState::new(dpn.initial_marking.clone(), &dpn.initial_assignment);
    if initial.marking.max_tokens() > k {
        return Err(OracleError::BoundExceeded {
            k,
            marking: initial.marking.to_string(),
        });
    }
    let mut states = vec![initial.clone()];
    let mut index: HashMap<DpnState, usize> = HashMap::new();
    index.insert(initial, 0);
    let mut edges = Vec::new();
    let mut frontier: VecDeque<usize> = VecDeque::from([0]);

    while !frontier.is_empty() {
        let batch: Vec<usize> = frontier.drain(..).collect();
        let expanded: Vec<Result<Vec<Expansion>, OracleError>> = {
            #[cfg(feature = "parallel")]
            {
                use rayon::prelude::*;
                match mode {
                    ExecMode::Parallel => batch
                        .par_iter()
                        .map(|&idx| expand_state(dpn, domain, k, idx, &states[idx]))
                        .collect(),
                    ExecMode::Sequential => batch
                        .iter()
                        .map(|&idx| expand_state(dpn, domain, k, idx, &states[idx]))
                        .collect(),
                }
            }
            #[cfg(not(feature = "parallel"))]
            {
                let _ = mode;
                batch
                    .iter()
                    .map(|&idx| expand_state(dpn, domain, k, idx, &states[idx]))
                    .collect()
            }
        };
        for result in expanded {
            for (from, transition, writes, next) in result? {
                let to = match index.get(&next) {
                    Some(&existing) => existing,
                    None => {
                        if states.len() >= cap {
                            return Err(OracleError::Explosion { cap });
                        }
                        let idx = states.len();
                        states.push(next.clone());
                        index.insert(next, idx);
                        frontier.push_back(idx);
                        idx
                    }
                };
                edges.push(OracleEdge {
                    from,
                    transition,
                    writes,
                    to,
                });
            }
        }
    }
    Ok(StateGraph {
        states,
        edges,
        initial: 0,
    })
}

/// All box-restricted successors of one state, in deterministic
/// (transition, write-combination) order.
fn expand_state(
    dpn: &Dpn,
    domain: &DomainBox,
    k: u32,
    from: usize,
    state: &DpnState,
) -> Result<Vec<Expansion>, OracleError> {
    let mut out = Vec::new();
    for (ti, t) in dpn.transitions.iter().enumerate() {
        if !token_enabled(t, &state.marking) {
            continue;
        }
        let reads: Vec<Var> = t.guard.read_vars().into_iter().collect();
        let writes: Vec<Var> = t.guard.write_vars().into_iter().collect();
        let mut base = Assignment::new();
        for v in &reads {
            let value = state.assignment[&v.with_kind(VarKind::Plain)].clone();
            base.set(v.with_kind(VarKind::Read), value)
                .map_err(|e| OracleError::Eval(e.to_string()))?;
        }
        for combo in combinations(domain, &writes) {
            let mut beta = base.clone();
            for (v, value) in writes.iter().zip(&combo) {
                beta.set(v.with_kind(VarKind::Written), value.clone())
                    .map_err(|e| OracleError::Eval(e.to_string()))?;
            }
            let satisfied = t
                .guard
                .evaluate(&beta)
                .map_err(|e| OracleError::Eval(e.to_string()))?;
            if !satisfied {
                continue;
            }
            let firing = TransitionFiring {
                transition: ti,
                beta,
            };
            let next = fire(dpn, state, &firing).map_err(|e| OracleError::Eval(e.to_string()))?;
            if next.marking.max_tokens() > k {
                return Err(OracleError::BoundExceeded {
                    k,
                    marking: next.marking.to_string(),
                });
            }
            let written: Vec<(String, Value)> = writes
                .iter()
                .zip(&combo)
                .map(|(v, value)| (v.name.clone(), value.clone()))
                .collect();
            out.push((from, ti, written, next));
        }
    }
    Ok(out)
}

/// Cartesian product of box values over the given variables.
fn combinations(domain: &DomainBox, vars: &[Var]) -> Vec<Vec<Value>> {
    let mut combos = vec![Vec::new()];
    for v in vars {
        let values = domain.values_for(v);
        let mut next = Vec::with_capacity(combos.len() * values.len());
        for combo in &combos {
            for value in &values {
                let mut extended = combo.clone();
                extended.push(value.clone());
                next.push(extended);
            }
        }
        combos = next;
    }
    combos
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleVerdict {
    Sound,
    Violated(Property),
}

/// Decides box-restricted soundness: covering markings first, then
/// dead transitions, then blocked states via backward reachability —
/// the same order the symbolic checker reports in.
pub fn oracle_soundness(
    dpn: &Dpn,
    domain: &DomainBox,
    k: u32,
    cap: usize,
) -> Result<OracleVerdict, OracleError> {
    let graph = enumerate_state_space(dpn, domain, k, cap)?;
    if graph
        .states
        .iter()
        .any(|s| s.marking.geq(&dpn.final_marking) && s.marking != dpn.final_marking)
    {
        return Ok(OracleVerdict::Violated(Property::P2));
    }
    let used: BTreeSet<usize> = graph.edges.iter().map(|e| e.transition).collect();
    if (0..dpn.transitions.len()).any(|t| !used.contains(&t)) {
        return Ok(OracleVerdict::Violated(Property::P3));
    }
    if !co_reachable(&graph, &dpn.final_marking)
        .iter()
        .all(|&ok| ok)
    {
        return Ok(OracleVerdict::Violated(Property::P1));
    }
    Ok(OracleVerdict::Sound)
}

/// Which states can still reach a final state, by backward search.
pub fn co_reachable(graph: &StateGraph, final_marking: &crate::dpn::Marking) -> Vec<bool> {
    let mut reverse: Vec<Vec<usize>> = vec![Vec::new(); graph.states.len()];
    for e in &graph.edges {
        reverse[e.to].push(e.from);
    }
    let mut ok = vec![false; graph.states.len()];
    let mut queue: VecDeque<usize> = graph
        .states
        .iter()
        .enumerate()
        .filter(|(_, s)| &s.marking == final_marking)
        .map(|(i, _)| i)
        .collect();
    for &i in &queue {
        ok[i] = true;
    }
    while let Some(i) = queue.pop_front() {
        for &p in &reverse[i] {
            if !ok[p] {
                ok[p] = true;
                queue.push_back(p);
            }
        }
    }
    ok
}

/// Syntactic check that every written variable is clamped inside the
/// box by top-level conjuncts of its guard, so box-restricted
/// enumeration is exact. Writes under disjunctions disqualify.
pub fn writes_box_bounded(dpn: &Dpn, domain: &DomainBox) -> bool {
    dpn.transitions.iter().all(|t| {
        let writes = t.guard.write_vars();
        if writes.is_empty() {
            return true;
        }
        let conjuncts = top_level_conjuncts(&t.guard);
        // No written occurrence may hide below a disjunction.
        fn writes_below_or(c: &Constraint) -> bool {
            match c {
                Constraint::Or(parts) => parts
                    .iter()
                    .any(|p| !p.write_vars().is_empty() || writes_below_or(p)),
                Constraint::And(parts) => parts.iter().any(writes_below_or),
                _ => false,
            }
        }
        if writes_below_or(&t.guard) {
            return false;
        }
        writes.iter().all(|v| {
            let Some((box_lo, box_hi)) = domain.hull(v) else {
                return v.sort == Sort::Bool;
            };
            let written = v.with_kind(VarKind::Written);
            let mut lower = false;
            let mut upper = false;
            for c in &conjuncts {
                if let Constraint::Atom(a) = c {
                    // Recognize single-variable bounds `v' op constant`
                    // in either orientation.
                    let (term, op, bound) = if a.lhs.coeffs().count() == 1
                        && a.rhs.is_constant()
                        && a.lhs.constant == Rat::from_integer(BigInt::from(0))
                    {
                        (a.lhs.clone(), a.op, a.rhs.constant.clone())
                    } else if a.rhs.coeffs().count() == 1
                        && a.lhs.is_constant()
                        && a.rhs.constant == Rat::from_integer(BigInt::from(0))
                    {
                        (a.rhs.clone(), flip(a.op), a.lhs.constant.clone())
                    } else {
                        continue;
                    };
                    let (tv, coeff) = term.coeffs().next().unwrap();
                    if tv != &written || coeff != &Rat::from_integer(BigInt::from(1)) {
                        continue;
                    }
                    match op {
                        CmpOp::Eq => {
                            if bound >= box_lo && bound <= box_hi {
                                lower = true;
                                upper = true;
                            }
                        }
                        CmpOp::Ge | CmpOp::Gt => {
                            if bound >= box_lo {
                                lower = true;
                            }
                        }
                        CmpOp::Le | CmpOp::Lt => {
                            if bound <= box_hi {
                                upper = true;
                            }
                        }
                        CmpOp::Ne => {}
                    }
                }
            }
            lower && upper
        })
    })
}

fn flip(op: CmpOp) -> CmpOp {
    match op {
        CmpOp::Ge => CmpOp::Le,
        CmpOp::Gt => CmpOp::Lt,
        CmpOp::Le => CmpOp::Ge,
        CmpOp::Lt => CmpOp::Gt,
        other => other,
    }
}

fn top_level_conjuncts(c: &Constraint) -> Vec<Constraint> {
    match c {
        Constraint::And(parts) => parts.iter().flat_map(top_level_conjuncts).collect(),
        other => vec![other.clone()],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samples;

    fn small_box() -> DomainBox {
        DomainBox::default_box()
            .with_var(
                "o",
                vec![
                    Value::rational(0, 1),
                    Value::rational(1, 1),
                    Value::rational(2, 1),
                ],
            )
            .with_var(
                "t",
                vec![
                    Value::rational(0, 1),
                    Value::rational(1, 1),
                    Value::rational(2, 1),
                ],
            )
    }

    #[test]
    fn auction_box_enumeration_contains_the_stuck_state() {
        let dpn = samples::auction();
        let graph = enumerate_state_space(&dpn, &small_box(), 1, 1_000_000).unwrap();
        let stuck = graph
            .states
            .iter()
            .position(|s| {
                s.marking == crate::dpn::Marking::of(&[("p1", 1), ("p2", 1)])
                    && s.assignment
                        .values()
                        .all(|v| v.as_rat().unwrap() == ratio(0, 1))
            })
            .expect("state ({p1,p2}, t=0, o=0) is reachable");
        assert_eq!(graph.outgoing(stuck).count(), 0);
    }

    #[test]
    fn degenerate_nets_have_one_state() {
        let mut dpn = samples::sound_trivial();
        dpn.transitions[0].pre.insert("done".into(), 1); // never enabled
        let graph = enumerate_state_space(&dpn, &DomainBox::default_box(), 1, 100).unwrap();
        assert_eq!(graph.states.len(), 1);

        // All guards false.
        let mut dpn = samples::sound_gate();
        dpn.transitions[0].guard = Constraint::ff();
        dpn.transitions[1].guard = Constraint::ff();
        let graph = enumerate_state_space(&dpn, &DomainBox::default_box(), 1, 100).unwrap();
        assert_eq!(graph.states.len(), 1);
        assert!(graph.edges.is_empty());
    }

    #[test]
    fn verdicts_on_sample_nets() {
        let b = small_box();
        assert_eq!(
            oracle_soundness(&samples::auction(), &b, 1, 1_000_000).unwrap(),
            OracleVerdict::Violated(Property::P1)
        );
        assert_eq!(
            oracle_soundness(&samples::auction_reset(), &b, 1, 1_000_000).unwrap(),
            OracleVerdict::Violated(Property::P3)
        );
        assert_eq!(
            oracle_soundness(&samples::sound_trivial(), &DomainBox::default_box(), 1, 100).unwrap(),
            OracleVerdict::Sound
        );
        assert_eq!(
            oracle_soundness(&samples::sound_gate(), &DomainBox::default_box(), 1, 10_000).unwrap(),
            OracleVerdict::Sound
        );
    }

    #[test]
    fn explosion_guard_fires() {
        let dpn = samples::road_fines();
        let tiny_cap = 10;
        match enumerate_state_space(&dpn, &DomainBox::from_range(-1, 1), 1, tiny_cap) {
            Err(OracleError::Explosion { cap }) => assert_eq!(cap, tiny_cap),
            other => panic!("expected explosion guard, got {other:?}"),
        }
    }

    #[test]
    fn sequential_and_parallel_agree_exactly() {
        let dpn = samples::auction();
        let b = small_box();
        let seq = enumerate_state_space_with(&dpn, &b, 1, 1_000_000, ExecMode::Sequential).unwrap();
        #[cfg(feature = "parallel")]
        {
            let par =
                enumerate_state_space_with(&dpn, &b, 1, 1_000_000, ExecMode::Parallel).unwrap();
            assert_eq!(seq.states, par.states);
            assert_eq!(seq.edges, par.edges);
        }
        assert!(seq.states.len() > 3);
    }

    #[test]
    fn write_boundedness_is_syntactic() {
        let domain = DomainBox::from_range(-3, 3);
        // Auction writes are unbounded above (o' > o, t' > 0).
        assert!(!writes_box_bounded(&samples::auction(), &domain));
        // A clamped write qualifies.
        let decls: std::collections::BTreeMap<String, Sort> =
            [("x".to_string(), Sort::Int)].into_iter().collect();
        let mut dpn = samples::sound_gate();
        dpn.transitions[0].guard = crate::guard::parse_guard("x' >= 0 && x' <= 2", &decls).unwrap();
        assert!(writes_box_bounded(&dpn, &domain));
        // A write under a disjunction does not.
        dpn.transitions[0].guard =
            crate::guard::parse_guard("(x' >= 0 && x' <= 2) || x >= 0", &decls).unwrap();
        assert!(!writes_box_bounded(&dpn, &domain));
    }
}
