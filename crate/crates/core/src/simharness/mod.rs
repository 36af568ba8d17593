//! Scenario execution: truth simulation, bounded noise, filter orchestration,
//! metrics and Monte Carlo runs.

mod config;
mod monte_carlo;
mod noise;
mod trial;

use thiserror::Error;

use crate::czono::CzError;
use crate::filters::FilterError;
use crate::sysmodel::ModelError;

pub use config::{
    build_uav_scenario, builtin, default_uav5_edges, pair1d, uav5, Algorithm, InitialRange, InitialTruth,
    ResolvedScenario, SampleKeyword, SamplingMode, ScenarioConfig,
};
pub use monte_carlo::{
    run_monte_carlo, summarize, threads_from_env, AbortedTrial, MonteCarloResult, MonteCarloSummary, StepStat,
    THREADS_ENV,
};
pub use noise::{NoiseSampler, SamplingTarget};
pub use trial::{
    box_metrics, compute_metrics, run_trial, trial_rng, write_metrics_csv, AgentEstimate, AlgorithmStep,
    MetricRow, RelativeMeasurement, StepRecord, TrialAbort, TrialLog,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("{}: step {k}: {source}", algorithm.name())]
    Filter {
        algorithm: Algorithm,
        k: usize,
        source: FilterError,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Set(#[from] CzError),
    #[error(transparent)]
    Filters(#[from] FilterError),
    #[error("i/o: {0}")]
    Io(String),
}
