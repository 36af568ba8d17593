use super::Outcome;
use crate::simharness::{run_monte_carlo, Algorithm, ResolvedScenario, TrialLog};

/// Slack allowed when comparing hull diameters.
pub const ORDER_TOL: f64 = 1e-9;

/// Every containment flag is set and the standard filter's hull is never
/// wider than the OIT hull (past the window) or the distributed hull.
pub fn check_log(log: &TrialLog, delta_bar: usize, out: &mut Outcome) {
    if let Some(a) = &log.aborted {
        out.failures.push(format!("trial {} aborted at k={}: {}", log.trial, a.k, a.message));
    }
    for step in &log.steps {
        let find = |alg| step.estimates.iter().find(|e| e.algorithm == alg);
        for est in &step.estimates {
            for a in est.agents.iter().filter(|a| !a.contained) {
                out.failures.push(format!(
                    "trial {} k={} {} agent {}: truth outside the estimate",
                    log.trial,
                    step.k,
                    est.algorithm.name(),
                    a.agent
                ));
            }
        }
        let Some(cen) = find(Algorithm::Centralized) else { continue };
        for other in [Algorithm::Oit, Algorithm::Distributed] {
            if other == Algorithm::Oit && step.k <= delta_bar {
                continue;
            }
            let Some(est) = find(other) else { continue };
            for (c, o) in cen.agents.iter().zip(&est.agents) {
                out.cases += 1;
                if c.d > o.d + ORDER_TOL {
                    out.failures.push(format!(
                        "trial {} k={} agent {}: centralized d={} exceeds {} d={}",
                        log.trial,
                        step.k,
                        c.agent,
                        c.d,
                        other.name(),
                        o.d
                    ));
                }
            }
        }
    }
}

/// Containment and diameter ordering over `trials` trials.
pub fn ordering_suite(sc: &ResolvedScenario, trials: usize) -> Outcome {
    let mut out = Outcome::default();
    match run_monte_carlo(sc, trials, None) {
        Ok(mc) => {
            for log in &mc.logs {
                check_log(log, sc.delta_bar, &mut out);
            }
        }
        Err(e) => out.failures.push(e.to_string()),
    }
    out
}
