//! Stability systems, stability indices and income adjustment.

mod indices;
mod program;

pub use indices::{
    adjust_grid, adjust_incomes, is_rationalizable, solve_stability_indices, summarize,
    summarize_indices, CoupleIndex, OptionIndex, SolveSettings, StabilityReport,
};
pub use program::{
    build_jc_constraints, build_program, build_spc_constraints, considered_pairs, IndexMode,
    ModelKind, NonlaborMode, OptionRow, ProgramOptions, RowKind, SplitMode, StabilityProgram,
};

pub(crate) use program::checked_index;
