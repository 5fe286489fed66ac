//! The soundness decision: clean termination, dead transitions, and
//! blocked states, checked on the constraint graph in that order (the
//! first two are much cheaper), with concrete counterexample witnesses
//! replayed through the net semantics before they are reported.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::cg::{self, CgError, CgMode, ConstraintGraph, FinalInfo, FinalMemo, Order};
use crate::constraint::{Assignment, Constraint, Substitution, Value, Var, VarKind};
use crate::dds::{dpn_to_dds, Dds, DdsError};
use crate::dpn::{fire, validate, Dpn, DpnState, Marking, TransitionFiring};
use crate::smt::{SatResult, SmtError, SmtGateway, SolverConfig, SolverStats};

/// Knobs of one soundness run.
#[derive(Debug, Clone)]
pub struct CheckConfig {
    /// Per-place token bound k (all shipped models are 1-bounded).
    pub bound: u32,
    /// Node budget per constraint graph.
    pub budget: usize,
    pub solver: SolverConfig,
    /// Worker sessions for the final-formula precomputation.
    pub jobs: usize,
}

impl CheckConfig {
    pub fn new(solver: SolverConfig) -> Self {
        CheckConfig {
            bound: 1,
            budget: 10_000,
            solver,
            jobs: 1,
        }
    }
}

/// The soundness property a violation is attributed to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Property {
    /// Some reachable configuration cannot reach a final state.
    P1,
    /// A reachable marking strictly covers the final marking.
    P2,
    /// Some transition can never fire.
    P3,
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Property::P1 => write!(f, "P1"),
            Property::P2 => write!(f, "P2"),
            Property::P3 => write!(f, "P3"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WitnessStep {
    pub transition_id: String,
    pub label: String,
    /// Values written by this firing, variable name → value.
    pub writes: Vec<(String, Value)>,
    /// State after the step.
    pub marking: Marking,
    pub assignment: Vec<(String, Value)>,
}

/// A concrete run demonstrating a violation, replayable through the
/// firing semantics.
#[derive(Debug, Clone, PartialEq)]
pub struct Witness {
    pub initial_marking: Marking,
    pub initial_assignment: Vec<(String, Value)>,
    pub steps: Vec<WitnessStep>,
}

impl Witness {
    pub fn final_marking(&self) -> &Marking {
        self.steps
            .last()
            .map(|s| &s.marking)
            .unwrap_or(&self.initial_marking)
    }

    pub fn final_assignment(&self) -> Vec<(String, Value)> {
        self.steps
            .last()
            .map(|s| s.assignment.clone())
            .unwrap_or_else(|| self.initial_assignment.clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Sizes {
    pub dds_states: usize,
    pub dds_edges: usize,
    pub cg_nodes: usize,
    pub cg_edges: usize,
}

/// Everything a soundness run reports.
#[derive(Debug, Clone)]
pub struct SoundnessReport {
    pub net: String,
    pub sound: bool,
    pub violated: Option<Property>,
    pub witness: Option<Witness>,
    pub dead_transitions: Option<Vec<String>>,
    pub sizes: Sizes,
    pub stats: SolverStats,
    pub bound: u32,
    pub budget: usize,
}

#[derive(Debug, Error)]
pub enum CheckError {
    #[error("invalid net: {0}")]
    Invalid(String),
    #[error(transparent)]
    Bound(#[from] DdsError),
    #[error(transparent)]
    Graph(#[from] CgError),
    #[error(transparent)]
    Smt(#[from] SmtError),
    #[error("witness replay failed (this is a bug): {0}")]
    WitnessReplay(String),
}

/// A node whose blocked formula is satisfiable, with a model over the
/// placeholder copies (don't-care variables zeroed).
#[derive(Debug, Clone)]
pub struct BlockedHit {
    pub node: usize,
    pub model: Assignment,
}

/// The analysis pipeline for one net: transition system, main
/// constraint graph, and the machinery to interrogate them. Verdict
/// assembly lives in [`check_sound`]; tests use the parts directly.
pub struct Analyzer {
    dpn: Dpn,
    pub dds: Dds,
    pub cg: ConstraintGraph,
    gateway: SmtGateway,
    memo: FinalMemo,
    budget: usize,
    jobs: usize,
    extra_stats: SolverStats,
}

impl Analyzer {
    pub fn new(dpn: &Dpn, config: &CheckConfig) -> Result<Self, CheckError> {
        let diagnostics = validate(dpn);
        if !diagnostics.is_empty() {
            let text: Vec<String> = diagnostics.iter().map(|d| d.to_string()).collect();
            return Err(CheckError::Invalid(text.join("; ")));
        }
        let mut gateway = SmtGateway::new(config.solver.clone())?;
        let dds = dpn_to_dds(dpn, config.bound)?;
        let cg = cg::build_cg(
            &dds,
            dds.initial,
            CgMode::Main,
            config.budget,
            Order::Bfs,
            &mut gateway,
        )?;
        Ok(Analyzer {
            dpn: dpn.clone(),
            dds,
            cg,
            gateway,
            memo: FinalMemo::new(),
            budget: config.budget,
            jobs: config.jobs.max(1),
            extra_stats: SolverStats::default(),
        })
    }

    pub fn gateway(&mut self) -> &mut SmtGateway {
        &mut self.gateway
    }

    pub fn stats(&self) -> SolverStats {
        let mut stats = self.gateway.stats.clone();
        stats.absorb(&self.extra_stats);
        stats
    }

    pub fn sizes(&self) -> Sizes {
        Sizes {
            dds_states: self.dds.states.len(),
            dds_edges: self.dds.edges.len(),
            cg_nodes: self.cg.node_count(),
            cg_edges: self.cg.edge_count(),
        }
    }

    /// First node (in exploration order, hence shallowest) whose
    /// marking covers the final marking without being it.
    pub fn bad_termination(&self) -> Option<usize> {
        let final_marking = &self.dds.final_marking;
        self.cg.nodes.iter().position(|n| {
            let m = &self.dds.states[n.state];
            m.geq(final_marking) && m != final_marking
        })
    }

    /// Transitions whose id labels no constraint-graph edge.
    pub fn dead_transitions(&self) -> Option<Vec<String>> {
        let used: BTreeSet<usize> = self.cg.edges.iter().map(|e| e.action).collect();
        let dead: Vec<String> = self
            .dpn
            .transitions
            .iter()
            .enumerate()
            .filter(|(i, _)| !used.contains(i))
            .map(|(_, t)| t.id.clone())
            .collect();
        if dead.is_empty() {
            None
        } else {
            Some(dead)
        }
    }

    pub fn final_info(&mut self, state: usize) -> Result<Arc<FinalInfo>, CheckError> {
        Ok(cg::final_info(
            &self.dds,
            state,
            self.budget,
            &mut self.gateway,
            &mut self.memo,
        )?)
    }

    /// `blocked(b, φ) = φ[V_0/V] ∧ ¬(∃V. ⋁ final(b))`, quantifier-free.
    pub fn blocked_formula(&mut self, node: usize) -> Result<Constraint, CheckError> {
        let state = self.cg.nodes[node].state;
        let info = self.final_info(state)?;
        let subst = Substitution::plain_to_placeholder(&self.dds.vars);
        let renamed = self.cg.nodes[node]
            .formula
            .rename(&subst)
            .map_err(|e| CheckError::Invalid(format!("placeholder rename: {e}")))?;
        Ok(Constraint::and(vec![
            renamed,
            Constraint::not(info.reachable_final.clone()),
        ]))
    }

    /// States of non-final constraint-graph nodes, in first-encounter
    /// order; these are the placeholder graphs a full blocked-state
    /// scan needs.
    fn states_to_scan(&self) -> Vec<usize> {
        let mut seen = BTreeSet::new();
        let mut order = Vec::new();
        for n in &self.cg.nodes {
            if !self.dds.is_final(n.state) && seen.insert(n.state) {
                order.push(n.state);
            }
        }
        order
    }

    /// Precomputes `final(b)` for every state a blocked scan will
    /// touch, in parallel when configured (one solver session per
    /// worker, shared query cache, memo filled deterministically).
    fn precompute_final_infos(&mut self) -> Result<(), CheckError> {
        let states: Vec<usize> = self
            .states_to_scan()
            .into_iter()
            .filter(|s| self.memo.get(*s).is_none())
            .collect();
        if states.len() < 2 || self.jobs < 2 {
            for state in states {
                self.final_info(state)?;
            }
            return Ok(());
        }
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(self.jobs)
                .build()
                .map_err(|e| CheckError::Invalid(format!("thread pool: {e}")))?;
            let dds = &self.dds;
            let budget = self.budget;
            let gateway = &self.gateway;
            type WorkerResult = (usize, Result<(FinalInfo, SolverStats), String>);
            let results: Vec<WorkerResult> = pool.install(|| {
                    states
                        .par_iter()
                        .map(|&state| {
                            let outcome = (|| {
                                let mut worker = gateway.fork().map_err(|e| e.to_string())?;
                                let info = cg::compute_final_info(dds, state, budget, &mut worker)
                                    .map_err(|e| e.to_string())?;
                                Ok((info, worker.stats))
                            })();
                            (state, outcome)
                        })
                        .collect()
                });
            for (state, outcome) in results {
                let (info, stats) = outcome
                    .map_err(|e| CheckError::Invalid(format!("worker for state {state}: {e}")))?;
                self.extra_stats.absorb(&stats);
                self.memo.insert(state, Arc::new(info));
            }
            Ok(())
        }
        #[cfg(not(feature = "parallel"))]
        {
            for state in states {
                self.final_info(state)?;
            }
            Ok(())
        }
    }

    fn blocked_hit_at(&mut self, node: usize) -> Result<Option<BlockedHit>, CheckError> {
        let blocked = self.blocked_formula(node)?;
        match self.gateway.is_sat(&blocked)? {
            SatResult::Sat(model) => {
                // Total model over the placeholder copies; variables the
                // formula does not mention default to zero.
                let free = blocked.free_vars();
                let mut full = Assignment::new();
                for v in &self.dds.vars {
                    let ph = v.with_kind(VarKind::Placeholder);
                    let value = if free.contains(&ph) {
                        model
                            .get(&ph)
                            .cloned()
                            .unwrap_or_else(|| Value::zero_of(v.sort))
                    } else {
                        Value::zero_of(v.sort)
                    };
                    full.set(ph, value).expect("sorts agree");
                }
                Ok(Some(BlockedHit { node, model: full }))
            }
            SatResult::Unsat => Ok(None),
            SatResult::Unknown(reason) => Err(CheckError::Smt(SmtError::Inconclusive(reason))),
        }
    }

    /// First (shallowest) blocked node, or `None` when every reachable
    /// configuration can still reach a final state.
    pub fn blocked_state(&mut self) -> Result<Option<BlockedHit>, CheckError> {
        self.precompute_final_infos()?;
        for node in 0..self.cg.nodes.len() {
            if self.dds.is_final(self.cg.nodes[node].state) {
                continue;
            }
            if let Some(hit) = self.blocked_hit_at(node)? {
                return Ok(Some(hit));
            }
        }
        Ok(None)
    }

    /// Every blocked node, for diagnostics and tests; the verdict path
    /// uses the short-circuiting [`Self::blocked_state`].
    pub fn blocked_nodes_all(&mut self) -> Result<Vec<BlockedHit>, CheckError> {
        self.precompute_final_infos()?;
        let mut hits = Vec::new();
        for node in 0..self.cg.nodes.len() {
            if self.dds.is_final(self.cg.nodes[node].state) {
                continue;
            }
            if let Some(hit) = self.blocked_hit_at(node)? {
                hits.push(hit);
            }
        }
        Ok(hits)
    }

    /// Builds a concrete run to `node` along its recorded path: one
    /// indexed variable copy per step, the step transition formulas
    /// conjoined, the endpoint pinned to `pin` (or to the node formula
    /// when absent), one model extraction, then a full replay through
    /// the firing semantics.
    pub fn witness_for_node(
        &mut self,
        node: usize,
        pin: Option<&Assignment>,
    ) -> Result<Witness, CheckError> {
        let path = self.cg.path_to(node);
        let steps = path.len();
        let step_var = |v: &Var, i: usize| Var {
            name: format!("{}.s{i}", v.name),
            sort: v.sort,
            kind: VarKind::Plain,
        };

        let mut parts: Vec<Constraint> = Vec::new();
        for (v, value) in self.dds.initial_assignment.iter() {
            parts.push(Constraint::var_eq_value(step_var(v, 0), value));
        }
        for (j, (action, _)) in path.iter().enumerate() {
            let mut subst = Substitution::new();
            for v in &self.dds.vars {
                subst.insert_var(v.with_kind(VarKind::Read), step_var(v, j));
                subst.insert_var(v.with_kind(VarKind::Written), step_var(v, j + 1));
            }
            let delta = self.dds.actions[*action]
                .delta
                .rename(&subst)
                .map_err(|e| CheckError::Invalid(format!("witness rename: {e}")))?;
            parts.push(delta);
        }
        match pin {
            Some(values) => {
                for v in &self.dds.vars {
                    let value = values
                        .get(v)
                        .or_else(|| values.get(&v.with_kind(VarKind::Placeholder)))
                        .ok_or_else(|| {
                            CheckError::Invalid(format!("pin misses variable {}", v.name))
                        })?;
                    parts.push(Constraint::var_eq_value(step_var(v, steps), value));
                }
            }
            None => {
                let mut subst = Substitution::new();
                for v in &self.dds.vars {
                    subst.insert_var(v.clone(), step_var(v, steps));
                }
                let end = self.cg.nodes[node]
                    .formula
                    .rename(&subst)
                    .map_err(|e| CheckError::Invalid(format!("witness rename: {e}")))?;
                parts.push(end);
            }
        }

        let formula = Constraint::and(parts);
        let model = match self.gateway.is_sat(&formula)? {
            SatResult::Sat(model) => model,
            SatResult::Unsat => {
                return Err(CheckError::WitnessReplay(
                    "path formula unsatisfiable, yet the node formula was satisfiable".into(),
                ))
            }
            SatResult::Unknown(reason) => {
                return Err(CheckError::Smt(SmtError::Inconclusive(reason)))
            }
        };

        let value_at = |v: &Var, i: usize| -> Result<Value, CheckError> {
            match model.get(&step_var(v, i)) {
                Some(value) => Ok(value.clone()),
                // Unconstrained can only happen for nets without steps
                // touching the variable; fall back to its initial value.
                None => self
                    .dds
                    .initial_assignment
                    .get(v)
                    .cloned()
                    .ok_or_else(|| CheckError::Invalid(format!("no value for {}", v.name))),
            }
        };

        let mut state = DpnState::new(
            self.dds.states[self.cg.start_state].clone(),
            &self.dds.initial_assignment,
        );
        let mut witness = Witness {
            initial_marking: state.marking.clone(),
            initial_assignment: assignment_pairs(&self.dds.vars, &state),
            steps: Vec::new(),
        };
        for (j, (action, _)) in path.iter().enumerate() {
            let info = &self.dds.actions[*action];
            let mut beta = Assignment::new();
            for v in &self.dds.vars {
                beta.set(v.with_kind(VarKind::Read), value_at(v, j)?)
                    .map_err(|e| CheckError::Invalid(e.to_string()))?;
            }
            let mut writes = Vec::new();
            for v in &info.writes {
                let value = value_at(v, j + 1)?;
                writes.push((v.name.clone(), value.clone()));
                beta.set(v.with_kind(VarKind::Written), value)
                    .map_err(|e| CheckError::Invalid(e.to_string()))?;
            }
            let firing = TransitionFiring {
                transition: *action,
                beta,
            };
            state = fire(&self.dpn, &state, &firing)
                .map_err(|e| CheckError::WitnessReplay(e.to_string()))?;
            witness.steps.push(WitnessStep {
                transition_id: info.transition_id.clone(),
                label: info.label.clone(),
                writes,
                marking: state.marking.clone(),
                assignment: assignment_pairs(&self.dds.vars, &state),
            });
        }
        let expected = &self.dds.states[self.cg.nodes[node].state];
        if &state.marking != expected {
            return Err(CheckError::WitnessReplay(format!(
                "replay ended in {}, expected {}",
                state.marking, expected
            )));
        }
        Ok(witness)
    }
}

fn assignment_pairs(vars: &[Var], state: &DpnState) -> Vec<(String, Value)> {
    vars.iter()
        .map(|v| (v.name.clone(), state.assignment[v].clone()))
        .collect()
}

/// A finished check with its artifacts, for callers that also want to
/// render graphs or inspect the violating node.
pub struct CheckOutcome {
    pub report: SoundnessReport,
    pub analyzer: Analyzer,
    /// Constraint-graph node the verdict is anchored at (P1/P2 only).
    pub violation_node: Option<usize>,
}

/// The full check: transition system, constraint graph, then the three
/// property checks with the cheap ones first, stopping at the first
/// violation.
pub fn check_sound(dpn: &Dpn, config: &CheckConfig) -> Result<SoundnessReport, CheckError> {
    run_check(dpn, config).map(|outcome| outcome.report)
}

pub fn run_check(dpn: &Dpn, config: &CheckConfig) -> Result<CheckOutcome, CheckError> {
    let mut analyzer = Analyzer::new(dpn, config)?;

    let mut violated = None;
    let mut witness = None;
    let mut dead_transitions = None;
    let mut violation_node = None;

    if let Some(node) = analyzer.bad_termination() {
        violated = Some(Property::P2);
        witness = Some(analyzer.witness_for_node(node, None)?);
        violation_node = Some(node);
    } else if let Some(dead) = analyzer.dead_transitions() {
        violated = Some(Property::P3);
        dead_transitions = Some(dead);
    } else if let Some(hit) = analyzer.blocked_state()? {
        violated = Some(Property::P1);
        witness = Some(analyzer.witness_for_node(hit.node, Some(&hit.model))?);
        violation_node = Some(hit.node);
    }

    let report = SoundnessReport {
        net: dpn.name.clone(),
        sound: violated.is_none(),
        violated,
        witness,
        dead_transitions,
        sizes: analyzer.sizes(),
        stats: analyzer.stats(),
        bound: config.bound,
        budget: config.budget,
    };
    Ok(CheckOutcome {
        report,
        analyzer,
        violation_node,
    })
}

/// All three property verdicts without short-circuiting; the reported
/// short-circuit verdict must always be the first violation herein.
pub struct FullProperties {
    pub bad_termination: Option<usize>,
    pub dead_transitions: Option<Vec<String>>,
    pub blocked: Vec<BlockedHit>,
}

pub fn check_all_properties(dpn: &Dpn, config: &CheckConfig) -> Result<FullProperties, CheckError> {
    let mut analyzer = Analyzer::new(dpn, config)?;
    Ok(FullProperties {
        bad_termination: analyzer.bad_termination(),
        dead_transitions: analyzer.dead_transitions(),
        blocked: analyzer.blocked_nodes_all()?,
    })
}
