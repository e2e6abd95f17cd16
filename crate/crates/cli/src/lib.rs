//! Scenario-driven front end for the `trilevel` library.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod run;
pub mod scenario;

pub use run::{describe_map, run, Check, MapSummary, RunReport};
pub use scenario::{parse_scenario, Scenario, ScenarioError, Task};
