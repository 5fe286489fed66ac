//! Machine-readable JSON view of a soundness report (schema 1, see
//! `docs/report.md`). Field order and map ordering are deterministic;
//! values carry exact rationals as strings.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::constraint::Value;
use crate::dpn::Marking;
use crate::soundness::{SoundnessReport, Witness};

#[derive(Serialize)]
struct ReportJson {
    schema: u32,
    net: String,
    sound: bool,
    violated: Option<String>,
    #[serde(rename = "deadTransitions")]
    dead_transitions: Option<Vec<String>>,
    witness: Option<WitnessJson>,
    sizes: SizesJson,
    stats: StatsJson,
    bound: u32,
    budget: usize,
}

#[derive(Serialize)]
struct SizesJson {
    dds: [usize; 2],
    cg: [usize; 2],
}

#[derive(Serialize)]
struct StatsJson {
    #[serde(rename = "satChecks")]
    sat_checks: u64,
    #[serde(rename = "qeCalls")]
    qe_calls: u64,
    #[serde(rename = "equivChecks")]
    equiv_checks: u64,
    #[serde(rename = "cacheHits")]
    cache_hits: u64,
    #[serde(rename = "elapsedMs")]
    elapsed_ms: u64,
}

#[derive(Serialize)]
struct WitnessJson {
    #[serde(rename = "initialMarking")]
    initial_marking: BTreeMap<String, u32>,
    #[serde(rename = "initialAssignment")]
    initial_assignment: BTreeMap<String, String>,
    steps: Vec<StepJson>,
}

#[derive(Serialize)]
struct StepJson {
    transition: String,
    label: String,
    writes: BTreeMap<String, String>,
    marking: BTreeMap<String, u32>,
    assignment: BTreeMap<String, String>,
}

fn marking_json(m: &Marking) -> BTreeMap<String, u32> {
    m.iter().map(|(p, &n)| (p.clone(), n)).collect()
}

fn values_json(pairs: &[(String, Value)]) -> BTreeMap<String, String> {
    pairs
        .iter()
        .map(|(name, value)| (name.clone(), value.to_string()))
        .collect()
}

fn witness_json(w: &Witness) -> WitnessJson {
    WitnessJson {
        initial_marking: marking_json(&w.initial_marking),
        initial_assignment: values_json(&w.initial_assignment),
        steps: w
            .steps
            .iter()
            .map(|s| StepJson {
                transition: s.transition_id.clone(),
                label: s.label.clone(),
                writes: values_json(&s.writes),
                marking: marking_json(&s.marking),
                assignment: values_json(&s.assignment),
            })
            .collect(),
    }
}

/// Renders a report as pretty-printed JSON. Deterministic except for
/// the `elapsedMs` field.
pub fn export_report(report: &SoundnessReport) -> String {
    let json = ReportJson {
        schema: 1,
        net: report.net.clone(),
        sound: report.sound,
        violated: report.violated.map(|p| p.to_string()),
        dead_transitions: report.dead_transitions.clone(),
        witness: report.witness.as_ref().map(witness_json),
        sizes: SizesJson {
            dds: [report.sizes.dds_states, report.sizes.dds_edges],
            cg: [report.sizes.cg_nodes, report.sizes.cg_edges],
        },
        stats: StatsJson {
            sat_checks: report.stats.sat_checks,
            qe_calls: report.stats.qe_calls,
            equiv_checks: report.stats.equiv_checks,
            cache_hits: report.stats.cache_hits,
            elapsed_ms: report.stats.elapsed.as_millis() as u64,
        },
        bound: report.bound,
        budget: report.budget,
    };
    let mut text = serde_json::to_string_pretty(&json).expect("report serializes");
    text.push('\n');
    text
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smt::SolverStats;
    use crate::soundness::{Property, Sizes};

    fn report(sound: bool) -> SoundnessReport {
        SoundnessReport {
            net: "n".into(),
            sound,
            violated: (!sound).then_some(Property::P3),
            witness: None,
            dead_transitions: (!sound).then(|| vec!["reset".to_string()]),
            sizes: Sizes {
                dds_states: 3,
                dds_edges: 5,
                cg_nodes: 6,
                cg_edges: 10,
            },
            stats: SolverStats::default(),
            bound: 1,
            budget: 10_000,
        }
    }

    #[test]
    fn sound_report_has_explicit_nulls() {
        let text = export_report(&report(true));
        let json: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(json["schema"], 1);
        assert_eq!(json["sound"], true);
        assert!(json["violated"].is_null());
        assert!(json["witness"].is_null());
        assert_eq!(json["sizes"]["dds"][0], 3);
        assert_eq!(json["sizes"]["cg"][1], 10);
    }

    #[test]
    fn dead_transition_report_lists_ids() {
        let text = export_report(&report(false));
        let json: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(json["violated"], "P3");
        assert_eq!(json["deadTransitions"][0], "reset");
    }
}
