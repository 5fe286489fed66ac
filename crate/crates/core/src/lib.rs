//! Data-aware soundness checking for Data Petri nets (DPNs) whose
//! guards use linear arithmetic over booleans, integers, and
//! rationals.
//!
//! The pipeline: a bounded DPN is unfolded into a finite labelled
//! transition system over markings ([`dds`]), a constraint graph is
//! built as a symbolic representation of the reachable configurations
//! ([`cg`]), and three checks on that graph decide the soundness
//! properties — clean termination, no dead transitions, no blocked
//! states ([`soundness`]). All logical questions go to an external SMT
//! solver ([`smt`]). A brute-force enumeration over finite variable
//! domains ([`oracle`]) serves as independent ground truth in tests.

pub mod cg;
pub mod constraint;
pub mod dds;
pub mod dot;
pub mod dpn;
pub mod guard;
pub mod mutate;
pub mod oracle;
pub mod pnml;
pub mod report;
pub mod samples;
pub mod smt;
pub mod soundness;
#[cfg(feature = "testgen")]
pub mod testgen;
