//! Hyperparameter search: differential evolution with Nelder-Mead
//! refinement on stagnation, plus a two-parameter grid mode.

mod de;
mod dno;
mod grid;
mod nelder_mead;
mod objective;
mod space;

pub use de::{binomial_crossover, de_mutate, de_mutate_best1};
pub use dno::{dno_optimize, DnoConfig, DnoResult, Evaluation, Mutation, TraceRow};
pub use grid::{grid_search, GridSurface};
pub use nelder_mead::{nelder_mead, NmConfig, NmResult};
pub use objective::{apply_params, default_space, holdout_objective, HoldoutObjective};
pub use space::{decode_params, encode_params, ParamDef, ParamKind, ParamScale};
