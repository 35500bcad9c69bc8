//! Contact mechanics and planning for bimanual in-hand regrasping with
//! frictional patch contacts.
//!
//! A rigid object is squeezed between two palm end-effectors. Each
//! palm/object contact is a patch contact whose friction capacity is
//! modelled by an ellipsoidal limit surface. By alternating which palm
//! moves, the object can be repositioned within the grasp: the moving
//! palm keeps sticking contact while the object slides on the static
//! palm ("slippage-free sliding").
//!
//! Modules:
//!
//! - [`frames`]: planar pose algebra, twists, wrenches, gravity
//!   decomposition on an inclined grasp.
//! - [`limit_surface`]: the ellipsoidal limit-surface model and every
//!   slippage-free constraint margin derived from it.
//! - [`contact_sim`]: an independent quasi-static simulator that resolves
//!   stick/slip contact modes per step; used as the verification oracle
//!   for planned trajectories.
//! - [`planner`]: the alternating-palm constrained trajectory optimizer
//!   and the unconstrained straight-line baseline.

pub mod contact_sim;
pub mod frames;
pub mod limit_surface;
mod nlp;
pub mod planner;

use thiserror::Error;

/// Errors produced by the mechanics, simulation, and planning layers.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A physical parameter was outside its valid range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Grasp incline must lie in [0, pi/2).
    #[error("grasp incline {0} rad outside [0, pi/2)")]
    InvalidIncline(f64),

    /// The twist-to-wrench map and the twist-space margins are undefined
    /// at zero twist; callers must branch on sticking explicitly.
    #[error("degenerate input: zero twist")]
    DegenerateTwist,

    /// The gravity-coupled SOC margin divides by `g_f' B g_f`, which is
    /// zero for a horizontal grasp.
    #[error("degenerate input: zero tangential gravity")]
    ZeroTangentialGravity,

    /// The dual-slide root finder did not reach the residual tolerance.
    #[error("slip resolution failed to converge: best residual {best_residual:.3e} N")]
    SlipSolverFailure { best_residual: f64 },

    /// A plan and a state disagree about which palm moves next.
    #[error("phase mismatch: plan expects {expected} to move, state says {actual}")]
    PhaseMismatch { expected: String, actual: String },

    /// A goal or waypoint lies outside the palm workspace disc.
    #[error("goal outside workspace: |({0:.4}, {1:.4})| > palm radius {2:.4}")]
    GoalOutsideWorkspace(f64, f64, f64),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
