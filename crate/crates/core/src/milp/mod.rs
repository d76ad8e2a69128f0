//! Self-contained LP and branch-and-cut machinery.

pub mod bnc;
pub mod lu;
pub mod lp;

pub use bnc::{
    branch_and_cut, gap_pct, Audit, BncConfig, NoHeuristic, NoSeparator, PrimalHeuristic, ProgressLine, Separator,
    SolveOutcome, SolveStatus,
};
pub use lp::{solve_lp, Basis, LpResult, LpRow, LpStatus, Simplex, VarStatus};
