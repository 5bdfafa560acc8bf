//! Scenario replay, reports and the equivalence sweep behind the `pmm`
//! binary.
//!
//! A scenario is a JSON file describing a market and a sequence of protocol
//! calls ([`scenario`]). [`run::run_scenario`] executes it and produces a
//! JSON-lines trace, one record per event, with every float rounded to
//! twelve significant digits so that replays are byte-identical.
//! [`report`] turns traces into CSV tables.

pub mod format;
pub mod report;
pub mod run;
pub mod scenario;

pub use report::{ReportError, ReportKind};
pub use run::{run_scenario, BackendKind, RunOutcome, TraceRecord};
pub use scenario::{Event, Overrides, Scenario, ScenarioError};
