use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::trial::{compute_metrics, run_trial, TrialAbort, TrialLog};
use super::{Algorithm, HarnessError, ResolvedScenario};

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "CZEST_THREADS";

/// Statistics over trials for one (step, algorithm, agent) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepStat {
    pub k: usize,
    pub algorithm: Algorithm,
    pub agent: usize,
    pub samples: usize,
    pub d_mean: f64,
    pub d_max: f64,
    pub gnorm_mean: f64,
    pub gnorm_max: f64,
    pub violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbortedTrial {
    pub trial: usize,
    #[serde(flatten)]
    pub abort: TrialAbort,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloSummary {
    pub trials: usize,
    pub seed: u64,
    pub delta_bar: usize,
    pub mu0: usize,
    /// Containment misses plus aborted trials.
    pub violations: usize,
    pub aborted: Vec<AbortedTrial>,
    pub stats: Vec<StepStat>,
}

#[derive(Debug, Clone)]
pub struct MonteCarloResult {
    pub logs: Vec<TrialLog>,
    pub summary: MonteCarloSummary,
}

/// `CZEST_THREADS` as a positive integer, if set.
pub fn threads_from_env() -> Result<Option<usize>, HarnessError> {
    match std::env::var(THREADS_ENV) {
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(HarnessError::Config(format!("{THREADS_ENV} must be a positive integer, got '{s}'"))),
        },
        Err(_) => Ok(None),
    }
}

/// Run `trials` independent trials, in parallel on `threads` workers (all
/// cores when `None`). Output does not depend on the thread count.
pub fn run_monte_carlo(
    sc: &ResolvedScenario,
    trials: usize,
    threads: Option<usize>,
) -> Result<MonteCarloResult, HarnessError> {
    if trials == 0 {
        return Err(HarnessError::Config("at least one trial is required".into()));
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| HarnessError::Io(e.to_string()))?;
    let logs: Vec<TrialLog> = pool.install(|| {
        (0..trials)
            .into_par_iter()
            .map(|t| run_trial(sc, t))
            .collect::<Result<_, _>>()
    })?;
    let summary = summarize(sc, &logs);
    Ok(MonteCarloResult { logs, summary })
}

/// Aggregate logs in trial order.
pub fn summarize(sc: &ResolvedScenario, logs: &[TrialLog]) -> MonteCarloSummary {
    #[derive(Default)]
    struct Acc {
        n: usize,
        d_sum: f64,
        d_max: f64,
        g_sum: f64,
        g_max: f64,
        misses: usize,
    }
    let mut cells: BTreeMap<(usize, Algorithm, usize), Acc> = BTreeMap::new();
    let mut violations = 0;
    let mut aborted = Vec::new();
    for log in logs {
        for row in compute_metrics(log) {
            let acc = cells.entry((row.k, row.algorithm, row.agent)).or_default();
            acc.n += 1;
            acc.d_sum += row.d;
            acc.d_max = acc.d_max.max(row.d);
            acc.g_sum += row.gnorm;
            acc.g_max = acc.g_max.max(row.gnorm);
            if !row.contained {
                acc.misses += 1;
                violations += 1;
            }
        }
        if let Some(abort) = &log.aborted {
            violations += 1;
            aborted.push(AbortedTrial {
                trial: log.trial,
                abort: abort.clone(),
            });
        }
    }
    let stats = cells
        .into_iter()
        .map(|((k, algorithm, agent), a)| StepStat {
            k,
            algorithm,
            agent,
            samples: a.n,
            d_mean: a.d_sum / a.n as f64,
            d_max: a.d_max,
            gnorm_mean: a.g_sum / a.n as f64,
            gnorm_max: a.g_max,
            violations: a.misses,
        })
        .collect();
    MonteCarloSummary {
        trials: logs.len(),
        seed: sc.config.seed,
        delta_bar: sc.delta_bar,
        mu0: sc.mu0,
        violations,
        aborted,
        stats,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simharness::pair1d;

    #[test]
    fn single_trial_matches_run_trial() {
        let sc = pair1d(4, 5).resolve().unwrap();
        let mc = run_monte_carlo(&sc, 1, Some(1)).unwrap();
        assert_eq!(mc.logs[0], run_trial(&sc, 0).unwrap());
        let row = &mc.summary.stats[0];
        assert_eq!(row.d_mean, row.d_max);
        assert_eq!(mc.summary.violations, 0);
    }

    #[test]
    fn thread_count_does_not_change_output() {
        let sc = pair1d(4, 9).resolve().unwrap();
        let a = run_monte_carlo(&sc, 6, Some(1)).unwrap();
        let b = run_monte_carlo(&sc, 6, Some(4)).unwrap();
        assert_eq!(a.summary, b.summary);
        for (x, y) in a.logs.iter().zip(&b.logs) {
            assert_eq!(x.to_jsonl(), y.to_jsonl());
        }
        assert!(run_monte_carlo(&sc, 0, None).is_err());
    }
}
