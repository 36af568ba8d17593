use std::collections::VecDeque;

use nalgebra::DVector;

use super::centralized::{centralized_predict, CentralizedFilter};
use super::FilterError;
use crate::czono::ConstrainedZonotope;
use crate::sysmodel::{MeasurementBatch, MultiAgentSystem, StackedSystem};

#[derive(Debug, Clone)]
struct WindowEntry {
    k: usize,
    stacked: StackedSystem,
    y: DVector<f64>,
}

/// Finite-window centralized filter. Up to `k = delta_bar` it runs the
/// standard recursion; afterwards every step restarts from the whole space
/// at `k - delta_bar` and replays the last `delta_bar + 1` batches, so the
/// representation size stops growing.
#[derive(Debug, Clone)]
pub struct OitFilter {
    delta_bar: usize,
    standard: CentralizedFilter,
    window: VecDeque<WindowEntry>,
    posterior: Option<ConstrainedZonotope>,
    k: Option<usize>,
}

impl OitFilter {
    /// `mu0` is the observability index of the stacked system; the window
    /// must cover at least `mu0` batches.
    pub fn new(initial: ConstrainedZonotope, delta_bar: usize, mu0: usize) -> Result<Self, FilterError> {
        if delta_bar + 1 < mu0 {
            return Err(FilterError::WindowTooShort { delta_bar, mu0 });
        }
        Ok(Self {
            delta_bar,
            standard: CentralizedFilter::new(initial),
            window: VecDeque::with_capacity(delta_bar + 1),
            posterior: None,
            k: None,
        })
    }

    pub fn delta_bar(&self) -> usize {
        self.delta_bar
    }

    pub fn posterior(&self) -> Option<&ConstrainedZonotope> {
        self.posterior.as_ref()
    }

    pub fn time(&self) -> Option<usize> {
        self.k
    }

    pub fn step(
        &mut self,
        sys: &MultiAgentSystem,
        batch: &MeasurementBatch,
    ) -> Result<&ConstrainedZonotope, FilterError> {
        let k = batch.k;
        if let Some(prev) = self.k {
            if k != prev + 1 {
                return Err(FilterError::OutOfSequence { expected: prev + 1, got: k });
            }
        }
        self.window.push_back(WindowEntry {
            k,
            stacked: sys.build_centralized(k)?,
            y: batch.stacked_centralized(),
        });
        if self.window.len() > self.delta_bar + 1 {
            self.window.pop_front();
        }

        let post = if k <= self.delta_bar {
            self.standard.step(sys, batch)?.clone()
        } else {
            debug_assert!(
                sys.observability_index(k - self.delta_bar, self.delta_bar + 1).is_ok(),
                "window starting at {} is not observable",
                k - self.delta_bar
            );
            self.rebuild()?
        };
        self.k = Some(k);
        Ok(self.posterior.insert(post))
    }

    fn rebuild(&self) -> Result<ConstrainedZonotope, FilterError> {
        let first = &self.window[0];
        let mut z = ConstrainedZonotope::unbounded(first.stacked.a.ncols());
        let mut prev: Option<&WindowEntry> = None;
        for entry in &self.window {
            if let Some(p) = prev {
                debug_assert_eq!(p.k + 1, entry.k);
                z = centralized_predict(&z, &p.stacked, &p.stacked.wset)?;
            }
            z = z.intersect_under_map(&entry.stacked.h, &entry.y, &entry.stacked.vset)?;
            prev = Some(entry);
        }
        Ok(z)
    }
}
