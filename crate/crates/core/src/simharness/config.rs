use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::czono::IntervalBox;
use crate::sysmodel::{AgentSpec, EdgeSpec, ModelSpec, MultiAgentSystem, NoiseSpec, SystemSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Centralized,
    Oit,
    Distributed,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::Centralized, Algorithm::Oit, Algorithm::Distributed];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Centralized => "centralized",
            Algorithm::Oit => "oit",
            Algorithm::Distributed => "distributed",
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| HarnessError::Config(format!("unknown algorithm '{s}' (expected centralized, oit or distributed)")))
    }
}

/// How each agent's initial range is chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialRange {
    /// Box of half-width `half_width` around a center drawn uniformly from
    /// `[-center_limit, center_limit]` per coordinate.
    Random { center_limit: f64, half_width: f64 },
    /// Explicit box per agent.
    Boxes(Vec<IntervalBox>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SampleKeyword {
    #[serde(rename = "sample-from-initial-range")]
    SampleFromInitialRange,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialTruth {
    Sample(SampleKeyword),
    Vector(Vec<f64>),
}

impl Default for InitialTruth {
    fn default() -> Self {
        InitialTruth::Sample(SampleKeyword::SampleFromInitialRange)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMode {
    /// Uniform over the noise set.
    #[default]
    Uniform,
    /// Random vertex of the noise set's interval hull.
    Vertex,
}

fn default_noise_scale() -> f64 {
    1.0
}

fn is_one(x: &f64) -> bool {
    *x == 1.0
}

fn default_algorithms() -> Vec<Algorithm> {
    Algorithm::ALL.to_vec()
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(rename = "_comment", default, skip_serializing_if = "Option::is_none")]
    pub comment: Option<String>,
    pub system: SystemSpec,
    pub horizon: usize,
    /// OIT window; `None` picks `mu0 + 1`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_bar: Option<usize>,
    #[serde(default = "default_algorithms")]
    pub algorithms: Vec<Algorithm>,
    pub seed: u64,
    pub initial_range: InitialRange,
    #[serde(default)]
    pub initial_truth: InitialTruth,
    #[serde(default)]
    pub noise_sampling: SamplingMode,
    /// Round the initial truth and every noise draw to multiples of this.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_grid: Option<f64>,
    /// Realized noise is pushed away from each set's center by this factor.
    /// Anything above 1 breaks the declared bounds; for test fixtures only.
    #[serde(default = "default_noise_scale", skip_serializing_if = "is_one")]
    pub injected_noise_scale: f64,
}

/// Configuration checked against the built system.
#[derive(Debug, Clone)]
pub struct ResolvedScenario {
    pub config: ScenarioConfig,
    pub system: MultiAgentSystem,
    pub delta_bar: usize,
    pub mu0: usize,
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        serde_json::from_str(text).map_err(|e| {
            HarnessError::Config(format!("line {}, column {}: {e}", e.line(), e.column()))
        })
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn has(&self, alg: Algorithm) -> bool {
        self.algorithms.contains(&alg)
    }

    /// Build the system, compute the observability index and settle the
    /// OIT window.
    pub fn resolve(&self) -> Result<ResolvedScenario, HarnessError> {
        if self.horizon == 0 {
            return Err(HarnessError::Config("horizon must be at least 1".into()));
        }
        if self.algorithms.is_empty() {
            return Err(HarnessError::Config("no algorithms selected".into()));
        }
        if !(self.injected_noise_scale.is_finite() && self.injected_noise_scale >= 0.0) {
            return Err(HarnessError::Config("injected_noise_scale must be finite and non-negative".into()));
        }
        if let Some(g) = self.noise_grid {
            if !(g.is_finite() && g > 0.0) {
                return Err(HarnessError::Config("noise_grid must be positive".into()));
            }
        }
        let system = self.system.build()?;
        let n_agents = system.num_agents();
        match &self.initial_range {
            InitialRange::Random { center_limit, half_width } => {
                if !(center_limit.is_finite() && *center_limit >= 0.0 && half_width.is_finite() && *half_width >= 0.0) {
                    return Err(HarnessError::Config("initial_range.random needs finite non-negative limits".into()));
                }
            }
            InitialRange::Boxes(boxes) => {
                if boxes.len() != n_agents {
                    return Err(HarnessError::Config(format!(
                        "initial_range.boxes has {} entries for {n_agents} agents",
                        boxes.len()
                    )));
                }
                for (i, b) in boxes.iter().enumerate() {
                    if b.dim() != system.agent(i).state_dim() || !b.is_bounded() {
                        return Err(HarnessError::Config(format!(
                            "initial box of agent {} must be bounded with dimension {}",
                            i + 1,
                            system.agent(i).state_dim()
                        )));
                    }
                }
            }
        }
        if let InitialTruth::Vector(v) = &self.initial_truth {
            if v.len() != system.total_state_dim() {
                return Err(HarnessError::Config(format!(
                    "initial_truth has {} entries, state dimension is {}",
                    v.len(),
                    system.total_state_dim()
                )));
            }
        }
        let mu_max = self.delta_bar.map_or(system.total_state_dim() + 1, |d| d + 1).max(1);
        let mu0 = match system.observability_index(0, mu_max) {
            Ok(mu) => mu,
            Err(e) if self.has(Algorithm::Oit) => {
                return Err(HarnessError::Config(format!("OIT window cannot be satisfied: {e}")))
            }
            Err(_) => mu_max,
        };
        let delta_bar = self.delta_bar.unwrap_or(mu0 + 1);
        Ok(ResolvedScenario {
            config: self.clone(),
            system,
            delta_bar,
            mu0,
        })
    }
}

/// Default five-UAV graph, read from the bundled data file.
pub fn default_uav5_edges() -> Vec<EdgeSpec> {
    #[derive(Deserialize)]
    struct TopologyFile {
        edges: Vec<EdgeSpec>,
    }
    let file: TopologyFile =
        serde_json::from_str(include_str!("../../data/uav5_topology.json")).expect("bundled topology parses");
    file.edges
}

/// Five planar UAVs with coordinated-turn dynamics and unit noise boxes.
pub fn build_uav_scenario(
    edges: Vec<EdgeSpec>,
    omega: f64,
    period: f64,
    horizon: usize,
    delta_bar: Option<usize>,
    seed: u64,
) -> ScenarioConfig {
    let agents = (1..=5)
        .map(|id| AgentSpec {
            id,
            model: ModelSpec::CoordinatedTurn {
                omega,
                period,
                measure_both_axes: true,
            },
            process_noise: NoiseSpec::symmetric_box(2, 1.0),
            measurement_noise: NoiseSpec::symmetric_box(2, 1.0),
            relative_noise: NoiseSpec::symmetric_box(2, 1.0),
            relative_noise_overrides: Default::default(),
        })
        .collect();
    ScenarioConfig {
        comment: None,
        system: SystemSpec { agents, edges },
        horizon,
        delta_bar,
        algorithms: Algorithm::ALL.to_vec(),
        seed,
        initial_range: InitialRange::Random {
            center_limit: 10.0,
            half_width: 2.0,
        },
        initial_truth: InitialTruth::default(),
        noise_sampling: SamplingMode::Uniform,
        noise_grid: None,
        injected_noise_scale: 1.0,
    }
}

/// The built-in `uav5` scenario with `omega = 1`, `T = pi/12`.
pub fn uav5(horizon: usize, delta_bar: Option<usize>, seed: u64) -> ScenarioConfig {
    build_uav_scenario(default_uav5_edges(), 1.0, PI / 12.0, horizon, delta_bar, seed)
}

/// Two scalar random-walk agents measuring each other. Truth and noise are
/// drawn on a 0.05 lattice, so every feasible set has lattice vertices and a
/// brute-force lattice search recovers its hull exactly.
pub fn pair1d(horizon: usize, seed: u64) -> ScenarioConfig {
    let agent = |id| AgentSpec {
        id,
        model: ModelSpec::Linear {
            a: vec![vec![1.0]],
            b: vec![vec![1.0]],
            c: vec![vec![1.0]],
            d: vec![vec![1.0]],
        },
        process_noise: NoiseSpec::symmetric_box(1, 0.25),
        measurement_noise: NoiseSpec::symmetric_box(1, 1.0),
        relative_noise: NoiseSpec::symmetric_box(1, 0.5),
        relative_noise_overrides: Default::default(),
    };
    let range = IntervalBox::symmetric(1, 2.0).expect("valid box");
    ScenarioConfig {
        comment: None,
        system: SystemSpec {
            agents: vec![agent(1), agent(2)],
            edges: vec![EdgeSpec { from: 1, to: 2 }, EdgeSpec { from: 2, to: 1 }],
        },
        horizon,
        delta_bar: None,
        algorithms: Algorithm::ALL.to_vec(),
        seed,
        initial_range: InitialRange::Boxes(vec![range.clone(), range]),
        initial_truth: InitialTruth::default(),
        noise_sampling: SamplingMode::Uniform,
        noise_grid: Some(0.05),
        injected_noise_scale: 1.0,
    }
}

/// Look up a built-in scenario by name.
pub fn builtin(name: &str, horizon: Option<usize>, seed: u64) -> Option<ScenarioConfig> {
    match name {
        "uav5" => Some(uav5(horizon.unwrap_or(30), None, seed)),
        "pair1d" => Some(pair1d(horizon.unwrap_or(5), seed)),
        _ => None,
    }
}
