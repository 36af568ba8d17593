use std::collections::BTreeMap;
use std::io::Write;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::noise::{NoiseSampler, SamplingTarget};
use super::{Algorithm, HarnessError, InitialRange, InitialTruth, ResolvedScenario};
use crate::czono::{ConstrainedZonotope, IntervalBox};
use crate::filters::{extract_agent_set, CentralizedFilter, DistributedFilter, FilterError, OitFilter};
use crate::sysmodel::MultiAgentSystem;

/// Estimate of one agent's state by one algorithm at one step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentEstimate {
    /// 1-based agent id.
    pub agent: usize,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    /// Widest edge of the hull.
    pub d: f64,
    /// Infinity norm of the diagonal hull generator matrix.
    pub gnorm: f64,
    pub contained: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmStep {
    pub algorithm: Algorithm,
    /// Representation size of the posterior; summed over the agents'
    /// neighborhood posteriors for the distributed filter.
    pub generators: usize,
    pub constraints: usize,
    pub agents: Vec<AgentEstimate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelativeMeasurement {
    pub agent: usize,
    pub neighbor: usize,
    pub z: Vec<f64>,
}

/// One line of a trial log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub trial: usize,
    pub k: usize,
    pub truth: Vec<f64>,
    pub y: Vec<Vec<f64>>,
    pub z: Vec<RelativeMeasurement>,
    pub estimates: Vec<AlgorithmStep>,
}

/// Why a trial stopped early.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialAbort {
    pub k: usize,
    pub algorithm: Algorithm,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialLog {
    pub trial: usize,
    pub seed: u64,
    pub steps: Vec<StepRecord>,
    pub aborted: Option<TrialAbort>,
}

impl TrialLog {
    /// One JSON object per step; an aborted trial ends with an `aborted` line.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for step in &self.steps {
            serde_json::to_writer(&mut w, step)?;
            w.write_all(b"\n")?;
        }
        if let Some(abort) = &self.aborted {
            #[derive(Serialize)]
            struct Line<'a> {
                trial: usize,
                aborted: &'a TrialAbort,
            }
            serde_json::to_writer(&mut w, &Line { trial: self.trial, aborted: abort })?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("JSON is UTF-8")
    }

    /// Number of (step, algorithm, agent) entries whose set missed the truth.
    pub fn violations(&self) -> usize {
        self.steps
            .iter()
            .flat_map(|s| s.estimates.iter())
            .flat_map(|e| e.agents.iter())
            .filter(|a| !a.contained)
            .count()
    }
}

/// Metric table row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub k: usize,
    pub algorithm: Algorithm,
    pub agent: usize,
    pub d: f64,
    pub gnorm: f64,
    pub contained: bool,
}

/// Flatten a log into metric rows.
///
/// # Panics
/// If a hull's diameter is not exactly twice its generator norm, which the
/// diagonal hull encoding guarantees.
pub fn compute_metrics(log: &TrialLog) -> Vec<MetricRow> {
    let mut rows = Vec::new();
    for step in &log.steps {
        for est in &step.estimates {
            for a in &est.agents {
                assert_eq!(a.d, 2.0 * a.gnorm, "diameter must equal twice the generator norm");
                rows.push(MetricRow {
                    k: step.k,
                    algorithm: est.algorithm,
                    agent: a.agent,
                    d: a.d,
                    gnorm: a.gnorm,
                    contained: a.contained,
                });
            }
        }
    }
    rows
}

/// CSV with header `k,algorithm,agent,d,gnorm,contained`.
pub fn write_metrics_csv<W: Write>(rows: &[MetricRow], w: W) -> Result<(), HarnessError> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r).map_err(|e| HarnessError::Io(e.to_string()))?;
    }
    out.flush().map_err(|e| HarnessError::Io(e.to_string()))
}

/// `d` and `gnorm` of a box: widest edge and widest half-edge.
pub fn box_metrics(bx: &IntervalBox) -> (f64, f64) {
    let gnorm = bx
        .widths()
        .iter()
        .map(|w| w / 2.0)
        .fold(0.0_f64, f64::max);
    (2.0 * gnorm, gnorm)
}

fn estimate(agent: usize, hull: &IntervalBox, contained: bool) -> AgentEstimate {
    let (d, gnorm) = box_metrics(hull);
    AgentEstimate {
        agent: agent + 1,
        lo: hull.lo().iter().copied().collect(),
        hi: hull.hi().iter().copied().collect(),
        d,
        gnorm,
        contained,
    }
}

/// Per-agent hulls and containment for a set over the whole network state.
/// `start` carries a feasible generator vector from one step to the next;
/// posteriors only append generators, so it stays a good LP start.
fn centralized_estimates(
    sys: &MultiAgentSystem,
    posterior: &ConstrainedZonotope,
    truth: &DVector<f64>,
    k: usize,
    start: &mut Vec<f64>,
) -> Result<Vec<AgentEstimate>, FilterError> {
    let empty = |e| crate::filters::empty_as_posterior(e, k, None);
    let (hull, point) = posterior.interval_hull_from(start).map_err(empty)?;
    let all_in = posterior.contains_from(truth, &point)?;
    *start = point;
    (0..sys.num_agents())
        .map(|i| {
            let range = sys.state_range(i);
            let coords: Vec<usize> = range.clone().collect();
            let contained = all_in || {
                let block = truth.rows(range.start, range.len()).into_owned();
                extract_agent_set(posterior, sys, i)?.contains(&block)?
            };
            Ok(estimate(i, &hull.select(&coords), contained))
        })
        .collect()
}

enum Runner {
    Centralized(CentralizedFilter, Vec<f64>),
    Oit(OitFilter, Vec<f64>),
    Distributed(DistributedFilter),
}

impl Runner {
    fn algorithm(&self) -> Algorithm {
        match self {
            Runner::Centralized(..) => Algorithm::Centralized,
            Runner::Oit(..) => Algorithm::Oit,
            Runner::Distributed(_) => Algorithm::Distributed,
        }
    }

    fn step(
        &mut self,
        sys: &MultiAgentSystem,
        batch: &crate::sysmodel::MeasurementBatch,
        truth: &DVector<f64>,
    ) -> Result<AlgorithmStep, FilterError> {
        let algorithm = self.algorithm();
        let k = batch.k;
        match self {
            Runner::Centralized(f, start) => {
                let post = f.step(sys, batch)?;
                Ok(AlgorithmStep {
                    algorithm,
                    generators: post.num_generators(),
                    constraints: post.num_constraints(),
                    agents: centralized_estimates(sys, post, truth, k, start)?,
                })
            }
            Runner::Oit(f, start) => {
                let post = f.step(sys, batch)?;
                Ok(AlgorithmStep {
                    algorithm,
                    generators: post.num_generators(),
                    constraints: post.num_constraints(),
                    agents: centralized_estimates(sys, post, truth, k, start)?,
                })
            }
            Runner::Distributed(f) => {
                let states = f.step(sys, batch)?;
                let mut agents = Vec::with_capacity(states.len());
                for (i, st) in states.iter().enumerate() {
                    let range = sys.state_range(i);
                    let block = truth.rows(range.start, range.len()).into_owned();
                    let hull = st.posterior.interval_hull()?;
                    agents.push(estimate(i, &hull, st.posterior.contains(&block)?));
                }
                Ok(AlgorithmStep {
                    algorithm,
                    generators: states.iter().map(|s| s.joint_posterior.num_generators()).sum(),
                    constraints: states.iter().map(|s| s.joint_posterior.num_constraints()).sum(),
                    agents,
                })
            }
        }
    }
}

/// Random stream of a trial: the base seed selects the generator, the trial
/// index selects an independent stream.
pub fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

/// Initial per-agent boxes and the initial truth.
fn initial_conditions(
    sc: &ResolvedScenario,
    sampler: &mut NoiseSampler,
) -> (Vec<IntervalBox>, DVector<f64>) {
    let sys = &sc.system;
    let boxes: Vec<IntervalBox> = match &sc.config.initial_range {
        InitialRange::Random { center_limit, half_width } => (0..sys.num_agents())
            .map(|i| {
                let n = sys.agent(i).state_dim();
                let center = DVector::from_iterator(
                    n,
                    (0..n).map(|_| {
                        if *center_limit > 0.0 {
                            sampler.rng().gen_range(-center_limit..=*center_limit)
                        } else {
                            0.0
                        }
                    }),
                );
                IntervalBox::centered(&center, *half_width).expect("checked in resolve")
            })
            .collect(),
        InitialRange::Boxes(b) => b.clone(),
    };
    let truth = match &sc.config.initial_truth {
        InitialTruth::Vector(v) => DVector::from_column_slice(v),
        InitialTruth::Sample(_) => {
            let parts: Vec<DVector<f64>> = boxes.iter().map(|b| sampler.uniform_in_box(b)).collect();
            let refs: Vec<&DVector<f64>> = parts.iter().collect();
            crate::linalg::concat(&refs)
        }
    };
    (boxes, truth)
}

/// Simulate one trial and run every enabled filter on it.
///
/// An empty posterior (only possible when noise leaves its declared set)
/// stops the trial and is recorded in [`TrialLog::aborted`].
pub fn run_trial(sc: &ResolvedScenario, trial: usize) -> Result<TrialLog, HarnessError> {
    let cfg = &sc.config;
    let sys = &sc.system;
    let mut sampler = NoiseSampler::new(trial_rng(cfg.seed, trial), cfg.noise_sampling, cfg.injected_noise_scale)
        .with_grid(cfg.noise_grid);
    let (boxes, mut x) = initial_conditions(sc, &mut sampler);

    let wt: Vec<SamplingTarget> = sys.agents().iter().map(|a| SamplingTarget::new(&a.wset)).collect::<Result<_, _>>()?;
    let vt: Vec<SamplingTarget> = sys.agents().iter().map(|a| SamplingTarget::new(&a.vset)).collect::<Result<_, _>>()?;
    let mut rt = BTreeMap::new();
    for (j, i) in sys.topology().edges() {
        rt.insert((i, j), SamplingTarget::new(&sys.agent(i).rsets[&j])?);
    }

    let box_sets: Vec<ConstrainedZonotope> = boxes
        .iter()
        .map(ConstrainedZonotope::from_box)
        .collect::<Result<_, _>>()?;
    let joint = ConstrainedZonotope::cartesian_product(&box_sets.iter().collect::<Vec<_>>())?;
    let mut runners = Vec::new();
    for alg in Algorithm::ALL.into_iter().filter(|a| cfg.has(*a)) {
        runners.push(match alg {
            Algorithm::Centralized => Runner::Centralized(CentralizedFilter::new(joint.clone()), Vec::new()),
            Algorithm::Oit => Runner::Oit(OitFilter::new(joint.clone(), sc.delta_bar, sc.mu0)?, Vec::new()),
            Algorithm::Distributed => Runner::Distributed(DistributedFilter::new(box_sets.clone())),
        });
    }

    let mut log = TrialLog {
        trial,
        seed: cfg.seed,
        steps: Vec::with_capacity(cfg.horizon),
        aborted: None,
    };
    for k in 0..cfg.horizon {
        if k > 0 {
            let parts: Vec<DVector<f64>> = wt.iter().map(|t| sampler.sample(t)).collect::<Result<_, _>>()?;
            let w = crate::linalg::concat(&parts.iter().collect::<Vec<_>>());
            x = if cfg.injected_noise_scale == 1.0 {
                sys.step_truth(k - 1, &x, &w)?
            } else {
                sys.step_truth_unchecked(k - 1, &x, &w)?
            };
        }
        let v: Vec<DVector<f64>> = vt.iter().map(|t| sampler.sample(t)).collect::<Result<_, _>>()?;
        let mut r = BTreeMap::new();
        for (key, t) in &rt {
            r.insert(*key, sampler.sample(t)?);
        }
        let batch = sys.measure(k, &x, &v, &r)?;

        let mut estimates = Vec::with_capacity(runners.len());
        for runner in &mut runners {
            match runner.step(sys, &batch, &x) {
                Ok(step) => estimates.push(step),
                Err(e) if is_emptiness(&e) => {
                    log.aborted = Some(TrialAbort {
                        k,
                        algorithm: runner.algorithm(),
                        message: e.to_string(),
                    });
                    break;
                }
                Err(e) => {
                    return Err(HarnessError::Filter {
                        algorithm: runner.algorithm(),
                        k,
                        source: e,
                    })
                }
            }
        }
        if log.aborted.is_some() {
            break;
        }
        log.steps.push(StepRecord {
            trial,
            k,
            truth: x.iter().copied().collect(),
            y: batch.y.iter().map(|v| v.iter().copied().collect()).collect(),
            z: batch
                .z
                .iter()
                .map(|(&(i, j), z)| RelativeMeasurement {
                    agent: i + 1,
                    neighbor: j + 1,
                    z: z.iter().copied().collect(),
                })
                .collect(),
            estimates,
        });
    }
    Ok(log)
}

fn is_emptiness(e: &FilterError) -> bool {
    matches!(
        e,
        FilterError::EmptyPosterior { .. } | FilterError::Set(crate::czono::CzError::EmptySet)
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simharness::pair1d;

    #[test]
    fn box_metric_examples() {
        let sq = IntervalBox::symmetric(2, 1.0).unwrap();
        assert_eq!(box_metrics(&sq), (2.0, 1.0));
        let r = IntervalBox::from_slices(&[0.0, 0.0], &[3.0, 1.0]).unwrap();
        assert_eq!(box_metrics(&r), (3.0, 1.5));
        let pt = IntervalBox::from_slices(&[0.5], &[0.5]).unwrap();
        assert_eq!(box_metrics(&pt), (0.0, 0.0));
    }

    #[test]
    fn pair_trial_contains_truth_and_is_reproducible() {
        let sc = pair1d(5, 11).resolve().unwrap();
        let a = run_trial(&sc, 0).unwrap();
        let b = run_trial(&sc, 0).unwrap();
        assert_eq!(a.to_jsonl(), b.to_jsonl());
        assert_eq!(a.steps.len(), 5);
        assert_eq!(a.violations(), 0);
        assert_ne!(run_trial(&sc, 1).unwrap().steps[0].truth, a.steps[0].truth);
        let rows = compute_metrics(&a);
        assert_eq!(rows.len(), 5 * 3 * 2);
    }

    #[test]
    fn injected_noise_is_caught() {
        let mut cfg = pair1d(5, 11);
        cfg.injected_noise_scale = 4.0;
        cfg.noise_sampling = crate::simharness::SamplingMode::Vertex;
        let log = run_trial(&cfg.resolve().unwrap(), 0).unwrap();
        assert!(log.aborted.is_some() || log.violations() > 0);
    }
}
