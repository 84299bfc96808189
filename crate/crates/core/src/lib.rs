//! Predict which functions an automated test will invoke without running it,
//! and use those predicted traces to plan tests during spectrum-based fault
//! diagnosis.
//!
//! The pipeline, module by module:
//!
//! * [`project`]: tests, functions and call edges of a program, plus the
//!   ground-truth trace table and injected faults.
//! * [`synth`]: seeded generator for synthetic projects with known traces.
//! * [`features`]: the static call graph, the eight pair features and the
//!   labeled dataset built from them.
//! * [`classifier`]: a feed-forward network trained with Adam that yields
//!   `conf(c, t)` for every (component, test) pair.
//! * [`metrics`]: confusion rates, accuracy, AUC and all-but-one feature
//!   importance.
//! * [`diagnosis`]: minimal hitting sets, Barinel-style scoring and health
//!   states.
//! * [`planner`]: utility-driven next-test selection (predicted, oracle and
//!   random strategies).
//! * [`ldp`]: the closed diagnose/plan/execute loop and experiment driver.
//! * [`report`]: run manifests and report writers shared by the CLI.
//!
//! The guide under `book/` walks through each stage; its code blocks run as
//! doctests of this crate.

pub mod classifier;
pub mod diagnosis;
pub mod error;
pub mod features;
pub mod ldp;
pub mod metrics;
pub mod planner;
pub mod project;
pub mod report;
pub mod rng;
pub mod synth;

pub use error::{Error, Result};
pub use project::{Edge, FaultSet, FunctionRef, NodeId, Project, TestRef, TraceTable};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/corpus.md")]
    mod corpus {}
    #[doc = include_str!("../../../book/src/features.md")]
    mod features {}
    #[doc = include_str!("../../../book/src/classifier.md")]
    mod classifier {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    mod metrics {}
    #[doc = include_str!("../../../book/src/diagnosis.md")]
    mod diagnosis {}
    #[doc = include_str!("../../../book/src/planning.md")]
    mod planning {}
    #[doc = include_str!("../../../book/src/troubleshooting.md")]
    mod troubleshooting {}
}
