//! Benchmark mutations must not change verdicts on any shipped net.

mod common;

use dpncheck_core::constraint::CmpOp;
use dpncheck_core::mutate::{add_chained_vars, add_sequential_states};
use dpncheck_core::samples;
use dpncheck_core::smt::SolverConfig;
use dpncheck_core::soundness::{check_sound, CheckConfig};

fn config() -> CheckConfig {
    CheckConfig::new(SolverConfig::from_env().expect("solver available"))
}

#[test]
fn sequential_padding_preserves_verdicts() {
    let _keep = common::gateway(); // fail fast if no solver
    for dpn in samples::all() {
        let base = check_sound(&dpn, &config()).unwrap();
        let padded = add_sequential_states(&dpn, 5);
        let report = check_sound(&padded, &config()).unwrap();
        assert_eq!(
            report.violated, base.violated,
            "{} with 5 extra states",
            dpn.name
        );
        assert_eq!(report.sound, base.sound, "{}", dpn.name);
    }
}

#[test]
fn chained_variables_preserve_verdicts() {
    for dpn in samples::all() {
        let base = check_sound(&dpn, &config()).unwrap();
        // The road-fines model is the heavyweight; one chain link there
        // already multiplies the variable count.
        let chain = if dpn.name == "road_fines" { 1 } else { 2 };
        let mutated = add_chained_vars(&dpn, chain, CmpOp::Eq);
        let report = check_sound(&mutated, &config()).unwrap();
        assert_eq!(
            report.violated, base.violated,
            "{} with chained guards",
            dpn.name
        );
        assert_eq!(report.sound, base.sound, "{}", dpn.name);
    }
}
