//! Tabular reinforcement learning: grid-world MDPs, softmax policies,
//! truncated policy-gradient and policy-Hessian estimators, and the
//! first- and second-order policy optimizers built on them.

mod algorithms;
mod estimators;
mod mdp;
mod policy;

pub use algorithms::{
    evaluate_policy, isvr_scrn_rl_run, scrn_rl_run, spg_run, IsvrConfig, PgVariant, PolicyEval,
    RlIterRow, RlRunRecord, SpgConfig,
};
pub use estimators::{
    entropy_gradient, estimate_correction, estimate_from_pool, estimate_gradient, estimate_hessian,
    exact_return, importance_weight, sample_trajectory, PgBatchEstimate, ScoreWeighting, Step,
    Trajectory,
};
pub use mdp::{
    build_cliff_walking, build_grid_mdp, build_random_maze, cliff_walking_layout,
    random_maze_layout, Cell, GridLayout, GridRewards, MazeKind, TabularMdp, GRID_DISCOUNT,
    GRID_MOVES, MAZE_ATTEMPTS, MAZE_DENSITY, MAZE_SIZE,
};
pub use policy::{score_and_hessian, SoftmaxPolicy};

use thiserror::Error;

use crate::optimizers::OptError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RlError {
    #[error("invalid MDP: {0}")]
    InvalidMdp(String),
    #[error("invalid grid layout: {0}")]
    InvalidLayout(String),
    #[error("no connected maze after {0} attempts")]
    GenerationFailed(usize),
    #[error("state {state} / action {action} out of range")]
    IndexOutOfRange { state: usize, action: usize },
    #[error("policy has {got} parameters, expected {expected}")]
    ParamDim { expected: usize, got: usize },
    #[error("action {action} has zero probability in state {state} under the sampling policy")]
    ZeroDenominator { state: usize, action: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Optimizer(#[from] OptError),
}

pub type Result<T> = std::result::Result<T, RlError>;
