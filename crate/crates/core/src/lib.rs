//! Power-discretized wireless network design: models, GUB cover
//! inequalities, separation, a self-contained branch-and-cut engine and the
//! iterative power-set driver.

pub mod formulation;
pub mod gci;
pub mod instance;
pub mod milp;
pub mod report;
pub mod separation;
pub mod solver;
pub mod wplan;

pub use formulation::{build_discrete, ColumnLayout, FormulationKind, Model};
pub use gci::GubCoverCut;
pub use instance::{
    generate, read_instance, read_solution, verify, write_instance, write_solution, Assignment, Instance, PowerSet,
    PropagationConfig, SirSystem, SolutionFile, VerificationReport,
};
pub use milp::{branch_and_cut, BncConfig, SolveOutcome, SolveStatus};
pub use report::{Table, TableFormat};
pub use solver::{audit_outcome, solve_formulation, CutPool};
pub use wplan::{default_schedule, Schedule, ScheduleStyle, WplanConfig, WplanResult};

#[cfg(test)]
mod fixtures;
