//! Set-membership estimators: the standard centralized filter, the
//! finite-window ("OIT-inspired") centralized filter and the distributed
//! constrained-zonotopic filter.

mod centralized;
mod distributed;
mod oit;

use thiserror::Error;

use crate::czono::CzError;
use crate::sysmodel::ModelError;

pub use centralized::{centralized_predict, centralized_update, extract_agent_set, CentralizedFilter};
pub use distributed::{
    distributed_predict, finalize_hull, joint_prior, joint_update, update_intersection,
    update_intersection_with_fault, AgentState, DistributedFilter, ProjectionMatrix, ReceivedJoint,
};
pub use oit::OitFilter;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FilterError {
    #[error("empty posterior at step {k}{}: measurements inconsistent with the declared noise sets", agent_suffix(*.agent))]
    EmptyPosterior { k: usize, agent: Option<usize> },
    #[error("window length {delta_bar} is shorter than observability index {mu0} minus one")]
    WindowTooShort { delta_bar: usize, mu0: usize },
    #[error("agent {agent} is missing the prior of neighbor {neighbor}")]
    MissingNeighborPrior { agent: usize, neighbor: usize },
    #[error("inconsistent block dimensions: {0}")]
    BlockDimensions(String),
    #[error("interval hull is unbounded")]
    UnboundedHull,
    #[error("step {got} out of sequence, expected {expected}")]
    OutOfSequence { expected: usize, got: usize },
    #[error(transparent)]
    Set(#[from] CzError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

fn agent_suffix(agent: Option<usize>) -> String {
    agent.map(|a| format!(" (agent {})", a + 1)).unwrap_or_default()
}

/// Map an `EmptySet` from a set query onto `EmptyPosterior`.
pub(crate) fn empty_as_posterior(e: CzError, k: usize, agent: Option<usize>) -> FilterError {
    match e {
        CzError::EmptySet => FilterError::EmptyPosterior { k, agent },
        other => FilterError::Set(other),
    }
}
