//! Deceiver strategies that minimize the worst case over a fixed set of
//! infiltrator strategies.

mod bnb;
mod export;
mod lp;
mod milp;

pub use bnb::{
    brute_force_robust, solve_milp_bnb, solve_robust, BnbOptions, BnbResult, NodeBound, RobustBound, SolveReport,
    ENUMERATION_LIMIT,
};
pub use export::{build_robust_milp_export, count_robust_rows, RobustRowCounts, UNCERTAIN};
pub use lp::{parse_lp, write_lp, LinearProgram, LpRow, LpVar, Sense, VarKind};
pub use milp::{build_milp, check_big_m, compute_big_m, export_milp, milp_to_lp, BigMCheck, BigMPair, MilpProblem};
