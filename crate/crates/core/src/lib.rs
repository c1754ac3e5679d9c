//! Joint coordinated multi-base-station beamforming, UAV association and UAV
//! trajectory planning for networked integrated sensing and communication.
//!
//! The entry point is [`ao::solve`], which alternates between association,
//! beamforming and trajectory stages on a validated [`scenario::Scenario`].

pub mod ao;
pub mod beamforming;
pub mod geometry;
pub mod scenario;
pub mod signal;
pub mod trajectory;

use thiserror::Error;

/// Errors raised by the planner.
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("scenario is infeasible: {0}")]
    InfeasibleScenario(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("model violation: {0}")]
    ModelViolation(String),
    #[error("conic solver: {0}")]
    Conic(#[from] isac_conic::ConicError),
    #[error("I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("JSON: {0}")]
    Json(#[from] serde_json::Error),
}

/// Solves a conic subproblem; when the first attempt does not reach the
/// requested tolerance it is retried once with a ten times looser one.
pub(crate) fn solve_with_retry(
    problem: &isac_conic::ConicProblem,
    scenario: &scenario::Scenario,
) -> Result<isac_conic::ConicSolution, CoreError> {
    let tol = scenario.params.solver_tol;
    let sol = isac_conic::solve(problem, tol, scenario.params.solver_max_iters)?;
    if sol.status == isac_conic::SolveStatus::Optimal {
        return Ok(sol);
    }
    let loose = (tol * 10.0).min(1e-4);
    Ok(isac_conic::solve(problem, loose, scenario.params.solver_max_iters)?)
}
