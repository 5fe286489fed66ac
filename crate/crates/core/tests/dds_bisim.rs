//! The unfolded transition system simulates the net and vice versa:
//! concrete runs co-simulated step by step, with firings drawn
//! pseudo-randomly from a small value pool (exact evaluation only, no
//! solver).

use dpncheck_core::constraint::{ratio, Assignment, Sort, Value, Var, VarKind};
use dpncheck_core::dds::{dds_step, dpn_to_dds};
use dpncheck_core::dpn::{fire, token_enabled, Dpn, DpnState, TransitionFiring};
use dpncheck_core::mutate::add_sequential_states;
use dpncheck_core::samples;

/// Tiny deterministic generator; good enough to scatter runs.
struct XorShift(u64);

impl XorShift {
    fn next(&mut self) -> u64 {
        let mut x = self.0;
        x ^= x << 13;
        x ^= x >> 7;
        x ^= x << 17;
        self.0 = x;
        x
    }

    fn pick(&mut self, n: usize) -> usize {
        (self.next() % n as u64) as usize
    }
}

fn value_pool(sort: Sort) -> Vec<Value> {
    match sort {
        Sort::Bool => vec![Value::Bool(false), Value::Bool(true)],
        Sort::Int => (-2..=2).map(Value::int).collect(),
        Sort::Rat => vec![
            Value::Rat(ratio(-2, 1)),
            Value::Rat(ratio(-1, 2)),
            Value::Rat(ratio(0, 1)),
            Value::Rat(ratio(1, 2)),
            Value::Rat(ratio(1, 1)),
            Value::Rat(ratio(2, 1)),
            Value::Rat(ratio(1001, 1)),
        ],
    }
}

/// All pool-valued firings enabled at a state, by exact evaluation.
fn enabled_pool_firings(dpn: &Dpn, state: &DpnState) -> Vec<TransitionFiring> {
    let mut out = Vec::new();
    for (ti, t) in dpn.transitions.iter().enumerate() {
        if !token_enabled(t, &state.marking) {
            continue;
        }
        let writes: Vec<Var> = t.guard.write_vars().into_iter().collect();
        let mut base = Assignment::new();
        for v in &dpn.vars {
            base.set(v.with_kind(VarKind::Read), state.assignment[v].clone())
                .unwrap();
        }
        let mut combos: Vec<Assignment> = vec![base];
        for v in &writes {
            let mut extended = Vec::new();
            for combo in &combos {
                for value in value_pool(v.sort) {
                    let mut next = combo.clone();
                    next.set(v.with_kind(VarKind::Written), value).unwrap();
                    extended.push(next);
                }
            }
            combos = extended;
        }
        for beta in combos {
            if t.guard.evaluate(&beta).unwrap() {
                out.push(TransitionFiring {
                    transition: ti,
                    beta,
                });
            }
        }
    }
    out
}

#[test]
fn nets_and_their_transition_systems_bisimulate() {
    let nets: Vec<Dpn> = samples::all()
        .into_iter()
        .chain(samples::all().iter().map(|n| add_sequential_states(n, 2)))
        .collect();
    let mut rng = XorShift(0x9e3779b97f4a7c15);
    let mut total_steps = 0usize;

    for dpn in &nets {
        let dds = dpn_to_dds(dpn, 1).unwrap();
        let runs = 1000 / nets.len() + 10;
        for _ in 0..runs {
            // One random concrete run of up to 6 steps, mirrored.
            let mut net_state = DpnState::new(dpn.initial_marking.clone(), &dpn.initial_assignment);
            let mut sys_state = dds.initial;
            let mut sys_assignment = dds.initial_assignment.clone();
            for _ in 0..6 {
                let firings = enabled_pool_firings(dpn, &net_state);
                if firings.is_empty() {
                    // The transition system must not offer a step the
                    // net cannot justify with pool values either: every
                    // outgoing edge's guard has no pool model here.
                    break;
                }
                let firing = &firings[rng.pick(firings.len())];

                // Net side.
                let next_net = fire(dpn, &net_state, firing).expect("net fires");
                // System side, same firing.
                let (next_sys, next_assignment) = dds_step(
                    &dds,
                    sys_state,
                    &sys_assignment,
                    firing.transition,
                    &firing.beta,
                )
                .expect("system mirrors the firing");

                // The two sides stay in lockstep.
                assert_eq!(dds.states[next_sys], next_net.marking);
                for v in &dpn.vars {
                    assert_eq!(next_assignment.get(v), Some(&next_net.assignment[v]));
                }
                net_state = next_net;
                sys_state = next_sys;
                sys_assignment = next_assignment;
                total_steps += 1;
            }
        }
    }
    assert!(total_steps >= 1000, "co-simulated only {total_steps} steps");
}

#[test]
fn system_steps_replay_as_net_firings() {
    // Converse direction: pick steps on the system side first.
    let dpn = samples::auction_thresh();
    let dds = dpn_to_dds(&dpn, 1).unwrap();
    let mut rng = XorShift(42);
    for _ in 0..200 {
        let mut sys_state = dds.initial;
        let mut assignment = dds.initial_assignment.clone();
        let mut net_state = DpnState::new(dpn.initial_marking.clone(), &dpn.initial_assignment);
        for _ in 0..5 {
            // Enumerate pool-valued steps the system admits.
            let mut options = Vec::new();
            for edge in dds.outgoing(sys_state) {
                let t = &dpn.transitions[edge.action];
                let writes: Vec<Var> = t.guard.write_vars().into_iter().collect();
                let mut base = Assignment::new();
                for v in &dds.vars {
                    base.set(
                        v.with_kind(VarKind::Read),
                        assignment.get(v).unwrap().clone(),
                    )
                    .unwrap();
                }
                let mut combos = vec![base];
                for v in &writes {
                    let mut extended = Vec::new();
                    for combo in &combos {
                        for value in value_pool(v.sort) {
                            let mut next = combo.clone();
                            next.set(v.with_kind(VarKind::Written), value).unwrap();
                            extended.push(next);
                        }
                    }
                    combos = extended;
                }
                for beta in combos {
                    if t.guard.evaluate(&beta).unwrap() {
                        options.push((edge.action, beta));
                    }
                }
            }
            if options.is_empty() {
                break;
            }
            let (action, beta) = options[rng.pick(options.len())].clone();
            let (next_sys, next_assignment) =
                dds_step(&dds, sys_state, &assignment, action, &beta).unwrap();
            let firing = TransitionFiring {
                transition: action,
                beta,
            };
            let next_net = fire(&dpn, &net_state, &firing).expect("net accepts the system step");
            assert_eq!(dds.states[next_sys], next_net.marking);
            sys_state = next_sys;
            assignment = next_assignment;
            net_state = next_net;
        }
    }
}
