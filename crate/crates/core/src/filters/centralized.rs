use nalgebra::DVector;

use super::FilterError;
use crate::czono::ConstrainedZonotope;
use crate::sysmodel::{MeasurementBatch, ModelError, MultiAgentSystem, StackedSystem};

/// `A_c Z ⊕ B_c W`, exact.
pub fn centralized_predict(
    posterior: &ConstrainedZonotope,
    stacked: &StackedSystem,
    wset: &ConstrainedZonotope,
) -> Result<ConstrainedZonotope, FilterError> {
    let propagated = posterior.linear_map(&stacked.a)?;
    let noise = wset.linear_map(&stacked.b)?;
    Ok(propagated.minkowski_sum(&noise)?)
}

/// `{ x in prior : Y - H_c x in V }`, with an emptiness check.
pub fn centralized_update(
    prior: &ConstrainedZonotope,
    stacked: &StackedSystem,
    y: &DVector<f64>,
    k: usize,
) -> Result<ConstrainedZonotope, FilterError> {
    let post = prior.intersect_under_map(&stacked.h, y, &stacked.vset)?;
    if post.is_empty()? {
        return Err(FilterError::EmptyPosterior { k, agent: None });
    }
    Ok(post)
}

/// Agent `i`'s block of a centralized set.
pub fn extract_agent_set(
    posterior: &ConstrainedZonotope,
    sys: &MultiAgentSystem,
    i: usize,
) -> Result<ConstrainedZonotope, FilterError> {
    if i >= sys.num_agents() {
        return Err(ModelError::UnknownAgent(i).into());
    }
    let coords: Vec<usize> = sys.state_range(i).collect();
    Ok(posterior.project(&coords)?)
}

/// Exact centralized recursion over the whole network. The posterior keeps
/// every generator and constraint it ever received.
#[derive(Debug, Clone)]
pub struct CentralizedFilter {
    initial: ConstrainedZonotope,
    posterior: Option<ConstrainedZonotope>,
    k: Option<usize>,
}

impl CentralizedFilter {
    pub fn new(initial: ConstrainedZonotope) -> Self {
        Self {
            initial,
            posterior: None,
            k: None,
        }
    }

    pub fn posterior(&self) -> Option<&ConstrainedZonotope> {
        self.posterior.as_ref()
    }

    pub fn time(&self) -> Option<usize> {
        self.k
    }

    /// Advance to `batch.k`. The first call updates the initial range
    /// directly; later calls must come in consecutive order.
    ///
    /// Emptiness is not checked here; it surfaces as `EmptySet` from the
    /// first LP query on the posterior.
    pub fn step(
        &mut self,
        sys: &MultiAgentSystem,
        batch: &MeasurementBatch,
    ) -> Result<&ConstrainedZonotope, FilterError> {
        let k = batch.k;
        let prior = match (&self.posterior, self.k) {
            (Some(post), Some(prev)) => {
                if k != prev + 1 {
                    return Err(FilterError::OutOfSequence { expected: prev + 1, got: k });
                }
                let st = sys.build_centralized(prev)?;
                centralized_predict(post, &st, &st.wset)?
            }
            _ => self.initial.clone(),
        };
        let st = sys.build_centralized(k)?;
        let post = prior.intersect_under_map(&st.h, &batch.stacked_centralized(), &st.vset)?;
        self.k = Some(k);
        Ok(self.posterior.insert(post))
    }
}
