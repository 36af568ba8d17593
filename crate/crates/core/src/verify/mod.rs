//! Built-in oracle suites behind `czest verify`.
//!
//! Each check draws its own random stream from the base seed, so a check's
//! result does not depend on which other checks run.

pub mod filters;
pub mod geometry;
pub mod ordering;

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use crate::simharness::{pair1d, trial_rng, uav5};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Suite {
    Geometry,
    Filters,
    Ordering,
}

impl Suite {
    pub const ALL: [Suite; 3] = [Suite::Geometry, Suite::Filters, Suite::Ordering];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Geometry => "geometry",
            Suite::Filters => "filters",
            Suite::Ordering => "ordering",
        }
    }
}

impl std::str::FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| format!("unknown suite '{s}' (expected geometry, filters or ordering)"))
    }
}

/// Result of one check: how many cases ran and what went wrong.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Outcome {
    pub cases: usize,
    pub failures: Vec<String>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.failures.is_empty() && self.cases > 0
    }
}

#[derive(Debug, Clone)]
pub struct CheckReport {
    pub suite: Suite,
    pub name: String,
    pub outcome: Outcome,
    pub elapsed: Duration,
}

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    pub suites: Vec<Suite>,
    /// Swap the stacked intersection for its sign-flipped variant.
    pub inject_fault: bool,
    pub seed: u64,
    pub geometry_cases: usize,
    pub equivalence_instances: usize,
    pub equivalence_probes: usize,
    pub grid_spacing: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            suites: Suite::ALL.to_vec(),
            inject_fault: false,
            seed: 2024,
            geometry_cases: 200,
            equivalence_instances: 100,
            equivalence_probes: 1000,
            grid_spacing: 0.05,
        }
    }
}

fn timed(suite: Suite, name: &str, f: impl FnOnce() -> Outcome) -> CheckReport {
    let t = Instant::now();
    let outcome = f();
    CheckReport {
        suite,
        name: name.to_string(),
        outcome,
        elapsed: t.elapsed(),
    }
}

fn scenario_failure(e: impl std::fmt::Display) -> Outcome {
    Outcome {
        cases: 0,
        failures: vec![e.to_string()],
    }
}

/// Run the selected suites in order.
pub fn run_verify(opts: &VerifyOptions) -> Vec<CheckReport> {
    let mut reports = Vec::new();
    let mut stream = 0;
    let mut next_rng = || {
        stream += 1;
        trial_rng(opts.seed, stream)
    };
    for &suite in Suite::ALL.iter().filter(|s| opts.suites.contains(s)) {
        match suite {
            Suite::Geometry => {
                for (op, check) in geometry::OPERATIONS {
                    let mut rng = next_rng();
                    reports.push(timed(suite, op, || geometry::run_operation(op, check, opts.geometry_cases, &mut rng)));
                }
            }
            Suite::Filters => {
                let mut rng = next_rng();
                reports.push(timed(suite, "update_intersection_equivalence", || {
                    filters::intersection_equivalence(&mut rng, opts.equivalence_instances, opts.equivalence_probes, opts.inject_fault)
                }));
                reports.push(timed(suite, "pair1d_grid_oracle", || match pair1d(5, opts.seed).resolve() {
                    Ok(sc) => match crate::simharness::run_trial(&sc, 0) {
                        Ok(log) => filters::grid_agreement(&sc, &log, opts.grid_spacing),
                        Err(e) => scenario_failure(e),
                    },
                    Err(e) => scenario_failure(e),
                }));
                reports.push(timed(suite, "oit_window_equality", || {
                    let mut cfg = pair1d(8, opts.seed);
                    cfg.delta_bar = Some(8);
                    match cfg.resolve() {
                        Ok(sc) => filters::oit_window_equality(&sc, 0),
                        Err(e) => scenario_failure(e),
                    }
                }));
                reports.push(timed(suite, "oit_bounded_size", || match pair1d(12, opts.seed).resolve() {
                    Ok(sc) => filters::oit_bounded_size(&sc, 0),
                    Err(e) => scenario_failure(e),
                }));
            }
            Suite::Ordering => {
                reports.push(timed(suite, "pair1d_containment_ordering", || match pair1d(10, opts.seed).resolve() {
                    Ok(sc) => ordering::ordering_suite(&sc, 8),
                    Err(e) => scenario_failure(e),
                }));
                reports.push(timed(suite, "uav5_containment_ordering", || match uav5(8, None, opts.seed).resolve() {
                    Ok(sc) => ordering::ordering_suite(&sc, 1),
                    Err(e) => scenario_failure(e),
                }));
            }
        }
    }
    reports
}

/// Fixed-width pass/fail table, with the first few failures of each
/// failing check listed underneath.
pub fn render_table(reports: &[CheckReport]) -> String {
    let width = reports.iter().map(|r| r.name.len()).max().unwrap_or(5).max(5);
    let mut s = String::new();
    let _ = writeln!(s, "{:<9} {:<width$} {:>6} {:>8} {:>8}  result", "suite", "check", "cases", "failed", "time");
    for r in reports {
        let _ = writeln!(
            s,
            "{:<9} {:<width$} {:>6} {:>8} {:>7.2}s  {}",
            r.suite.name(),
            r.name,
            r.outcome.cases,
            r.outcome.failures.len(),
            r.elapsed.as_secs_f64(),
            if r.outcome.passed() { "PASS" } else { "FAIL" }
        );
    }
    for r in reports.iter().filter(|r| !r.outcome.passed()) {
        for f in r.outcome.failures.iter().take(5) {
            let _ = writeln!(s, "  {}: {f}", r.name);
        }
        if r.outcome.failures.len() > 5 {
            let _ = writeln!(s, "  {}: ... {} more", r.name, r.outcome.failures.len() - 5);
        }
    }
    s
}

pub fn all_passed(reports: &[CheckReport]) -> bool {
    reports.iter().all(|r| r.outcome.passed())
}
