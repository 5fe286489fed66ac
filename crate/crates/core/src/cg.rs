//! Constraint graphs: the symbolic reachable state space.
//!
//! Nodes pair a transition-system state with a formula over the
//! process variables (plus frozen placeholder copies in placeholder
//! mode). The one-step successor of a formula is its update: rename
//! the current variables to fresh copies, conjoin the transition
//! formula, and eliminate the copies. Nodes with equivalent formulas
//! at the same state are merged, so the graph is finite whenever the
//! net has a finite history set; a node budget makes divergence
//! observable otherwise.

use std::collections::HashMap;
use std::sync::Arc;

use thiserror::Error;

use crate::constraint::{Constraint, Substitution, Var, VarKind};
use crate::dds::Dds;
use crate::smt::{SmtError, SmtGateway};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CgMode {
    /// Start from the initial assignment formula `⋀ v = α_I(v)`.
    Main,
    /// Start from `⋀ v = v_0` with fresh placeholder copies, so node
    /// formulas relate current values to the values held on entry.
    Placeholder,
}

/// Worklist discipline. Breadth-first is the default and what verdict
/// reporting relies on (shallowest witnesses); depth-first exists to
/// demonstrate exploration-order independence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Order {
    Bfs,
    Dfs,
}

#[derive(Debug, Clone)]
pub struct CgNode {
    pub state: usize,
    pub formula: Constraint,
    pub depth: usize,
    pub parent: Option<(usize, usize)>, // (node, action)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CgEdge {
    pub from: usize,
    pub action: usize,
    pub to: usize,
}

#[derive(Debug, Clone)]
pub struct ConstraintGraph {
    pub mode: CgMode,
    pub start_state: usize,
    pub nodes: Vec<CgNode>,
    pub edges: Vec<CgEdge>,
}

impl ConstraintGraph {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }
    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// The recorded path from the root to `node`, as `(action, node)`
    /// pairs in firing order.
    pub fn path_to(&self, node: usize) -> Vec<(usize, usize)> {
        let mut path = Vec::new();
        let mut current = node;
        while let Some((parent, action)) = self.nodes[current].parent {
            path.push((action, current));
            current = parent;
        }
        path.reverse();
        path
    }
}

#[derive(Debug, Error)]
pub enum CgError {
    #[error(
        "constraint graph exceeded the node budget of {budget}; the net may have no finite \
         history set (raise --budget to keep exploring)"
    )]
    BudgetExceeded { budget: usize },
    #[error(transparent)]
    Smt(#[from] SmtError),
}

/// Fresh rename targets for the one-step update; user identifiers
/// cannot contain dots, so these never collide.
fn pre_copy(v: &Var) -> Var {
    Var {
        name: format!("{}.pre", v.name),
        sort: v.sort,
        kind: VarKind::Plain,
    }
}

/// The symbolic one-step successor of `formula` under `action`:
/// a quantifier-free formula equivalent to
/// `∃pre. formula[pre/V] ∧ Δ_action[pre/Vʳ, V/Vʷ]`.
/// Placeholder variables pass through untouched.
pub fn update(
    dds: &Dds,
    formula: &Constraint,
    action: usize,
    gateway: &mut SmtGateway,
) -> Result<Constraint, SmtError> {
    let mut to_pre = Substitution::new();
    let mut delta_subst = Substitution::new();
    let mut pre_vars = Vec::new();
    for v in &dds.vars {
        let pre = pre_copy(v);
        to_pre.insert_var(v.clone(), pre.clone());
        delta_subst.insert_var(v.with_kind(VarKind::Read), pre.clone());
        delta_subst.insert_var(v.with_kind(VarKind::Written), v.clone());
        pre_vars.push(pre);
    }
    let shifted = formula
        .rename(&to_pre)
        .map_err(|e| SmtError::BadResponse(format!("update rename: {e}")))?;
    let delta = dds.actions[action]
        .delta
        .rename(&delta_subst)
        .map_err(|e| SmtError::BadResponse(format!("delta rename: {e}")))?;
    gateway.qe(&pre_vars, &Constraint::and(vec![shifted, delta]))
}

/// The root formula for a graph in the given mode.
pub fn root_formula(dds: &Dds, mode: CgMode) -> Constraint {
    match mode {
        CgMode::Main => Constraint::of_assignment(&dds.initial_assignment),
        CgMode::Placeholder => Constraint::and(
            dds.vars
                .iter()
                .map(|v| Constraint::var_eq(v.clone(), v.with_kind(VarKind::Placeholder)))
                .collect(),
        ),
    }
}

/// Worklist fixpoint construction. For every node `(b, φ)` and
/// transition-system edge `b →a b'` with satisfiable update `ψ`, the
/// graph gets an edge to a node `(b', ψ')` with `ψ' ≡ ψ` — an existing
/// node when one exists (searched most-recent-first at `b'`), a fresh
/// one otherwise.
pub fn build_cg(
    dds: &Dds,
    start_state: usize,
    mode: CgMode,
    budget: usize,
    order: Order,
    gateway: &mut SmtGateway,
) -> Result<ConstraintGraph, CgError> {
    let root = CgNode {
        state: start_state,
        formula: root_formula(dds, mode),
        depth: 0,
        parent: None,
    };
    let mut nodes = vec![root];
    let mut edges: Vec<CgEdge> = Vec::new();
    let mut by_state: HashMap<usize, Vec<usize>> = HashMap::new();
    by_state.insert(start_state, vec![0]);
    let mut worklist: Vec<usize> = vec![0];

    while let Some(from) = match order {
        Order::Bfs => (!worklist.is_empty()).then(|| worklist.remove(0)),
        Order::Dfs => worklist.pop(),
    } {
        let dds_edges: Vec<_> = dds.outgoing(nodes[from].state).copied().collect();
        for dds_edge in dds_edges {
            let successor = update(dds, &nodes[from].formula, dds_edge.action, gateway)?;
            if successor == Constraint::ff() {
                continue;
            }
            if !gateway.is_sat_bool(&successor)? {
                continue;
            }
            let successor = gateway.simplified(&successor)?;
            let mut target = None;
            if let Some(candidates) = by_state.get(&dds_edge.to) {
                for &candidate in candidates.iter().rev() {
                    if gateway.equivalent(&nodes[candidate].formula, &successor)? {
                        target = Some(candidate);
                        break;
                    }
                }
            }
            let to = match target {
                Some(idx) => idx,
                None => {
                    if nodes.len() >= budget {
                        return Err(CgError::BudgetExceeded { budget });
                    }
                    let idx = nodes.len();
                    nodes.push(CgNode {
                        state: dds_edge.to,
                        formula: successor,
                        depth: nodes[from].depth + 1,
                        parent: Some((from, dds_edge.action)),
                    });
                    by_state.entry(dds_edge.to).or_default().push(idx);
                    worklist.push(idx);
                    idx
                }
            };
            edges.push(CgEdge {
                from,
                action: dds_edge.action,
                to,
            });
        }
    }
    Ok(ConstraintGraph {
        mode,
        start_state,
        nodes,
        edges,
    })
}

/// The formulas labelling final-state nodes of the placeholder graph
/// rooted at `b`, together with `∃V.⋁ formulas` already eliminated
/// down to the placeholder copies (what blocked-state checking needs).
#[derive(Debug, Clone)]
pub struct FinalInfo {
    pub formulas: Vec<Constraint>,
    /// Quantifier-free rendering of `∃V. ⋁ final(b)`, over `V_0`.
    /// `false` when no final state is reachable from `b` at all.
    pub reachable_final: Constraint,
}

/// Memo table for [`final_info`]; shared across one soundness run.
#[derive(Default)]
pub struct FinalMemo {
    map: HashMap<usize, Arc<FinalInfo>>,
}

impl FinalMemo {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, state: usize) -> Option<Arc<FinalInfo>> {
        self.map.get(&state).cloned()
    }

    pub fn insert(&mut self, state: usize, info: Arc<FinalInfo>) {
        self.map.insert(state, info);
    }
}

/// Computes (or recalls) `final(b)` for a control state `b`.
pub fn final_info(
    dds: &Dds,
    state: usize,
    budget: usize,
    gateway: &mut SmtGateway,
    memo: &mut FinalMemo,
) -> Result<Arc<FinalInfo>, CgError> {
    if let Some(hit) = memo.get(state) {
        return Ok(hit);
    }
    let info = compute_final_info(dds, state, budget, gateway)?;
    let info = Arc::new(info);
    memo.insert(state, Arc::clone(&info));
    Ok(info)
}

pub(crate) fn compute_final_info(
    dds: &Dds,
    state: usize,
    budget: usize,
    gateway: &mut SmtGateway,
) -> Result<FinalInfo, CgError> {
    let graph = build_cg(dds, state, CgMode::Placeholder, budget, Order::Bfs, gateway)?;
    let formulas: Vec<Constraint> = graph
        .nodes
        .iter()
        .filter(|n| dds.is_final(n.state))
        .map(|n| n.formula.clone())
        .collect();
    let reachable_final = if formulas.is_empty() {
        Constraint::ff()
    } else {
        let disjunction = Constraint::or(formulas.clone());
        gateway.qe(&dds.vars, &disjunction).map_err(CgError::Smt)?
    };
    Ok(FinalInfo {
        formulas,
        reachable_final,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dds::dpn_to_dds;
    use crate::samples;

    #[test]
    fn paths_walk_parent_pointers() {
        // Structure-only check; solver-backed construction is covered
        // by the integration tests.
        let cg = ConstraintGraph {
            mode: CgMode::Main,
            start_state: 0,
            nodes: vec![
                CgNode {
                    state: 0,
                    formula: Constraint::tt(),
                    depth: 0,
                    parent: None,
                },
                CgNode {
                    state: 1,
                    formula: Constraint::tt(),
                    depth: 1,
                    parent: Some((0, 2)),
                },
                CgNode {
                    state: 1,
                    formula: Constraint::ff(),
                    depth: 2,
                    parent: Some((1, 0)),
                },
            ],
            edges: vec![],
        };
        assert_eq!(cg.path_to(0), vec![]);
        assert_eq!(cg.path_to(2), vec![(2, 1), (0, 2)]);
    }

    #[test]
    fn root_formulas_by_mode() {
        let dds = dpn_to_dds(&samples::auction(), 1).unwrap();
        let main = root_formula(&dds, CgMode::Main);
        assert_eq!(main.to_string(), "o = 0 && t = 0");
        let ph = root_formula(&dds, CgMode::Placeholder);
        assert_eq!(ph.to_string(), "o = o_0 && t = t_0");
    }
}
