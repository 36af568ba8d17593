//! JSON description of a multi-agent system.
//!
//! ```json
//! {
//!   "agents": [
//!     { "id": 1,
//!       "model": { "coordinated_turn": { "omega": 1.0, "period": 0.2617993877991494,
//!                                        "measure_both_axes": true } },
//!       "process_noise":     { "lo": [-1, -1], "hi": [1, 1] },
//!       "measurement_noise": { "lo": [-1, -1], "hi": [1, 1] },
//!       "relative_noise":    { "lo": [-1, -1], "hi": [1, 1] } }
//!   ],
//!   "edges": [ { "from": 1, "to": 2 } ]
//! }
//! ```
//!
//! Agent ids are 1-based and must be `1..=N` in order. An edge `from -> to`
//! makes `from` an in-neighbor of `to`. `model` is either
//! `{"coordinated_turn": {..}}` or `{"linear": {"A": .., "B": .., "C": .., "D": ..}}`
//! with row-major matrices. Noise sets are boxes `{"lo", "hi"}` or full
//! constrained zonotopes `{"G", "c", "A", "b", "h"}`. `relative_noise_overrides`
//! optionally maps a neighbor id (as a string key) to its own set.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{AgentModel, Dynamics, ModelError, MultiAgentSystem, Topology};
use crate::czono::{ConstrainedZonotope, IntervalBox};
use crate::linalg::{block_diag, from_rows};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    pub agents: Vec<AgentSpec>,
    pub edges: Vec<EdgeSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeSpec {
    pub from: usize,
    pub to: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSpec {
    pub id: usize,
    pub model: ModelSpec,
    pub process_noise: NoiseSpec,
    pub measurement_noise: NoiseSpec,
    pub relative_noise: NoiseSpec,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub relative_noise_overrides: BTreeMap<String, NoiseSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelSpec {
    CoordinatedTurn {
        omega: f64,
        period: f64,
        #[serde(default = "default_true")]
        measure_both_axes: bool,
    },
    Linear {
        #[serde(rename = "A")]
        a: Vec<Vec<f64>>,
        #[serde(rename = "B")]
        b: Vec<Vec<f64>>,
        #[serde(rename = "C")]
        c: Vec<Vec<f64>>,
        #[serde(rename = "D")]
        d: Vec<Vec<f64>>,
    },
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NoiseSpec {
    Box(IntervalBox),
    Set(ConstrainedZonotope),
}

impl NoiseSpec {
    pub fn symmetric_box(dim: usize, radius: f64) -> Self {
        NoiseSpec::Box(IntervalBox::symmetric(dim, radius).expect("valid radius"))
    }

    pub fn to_set(&self) -> Result<ConstrainedZonotope, ModelError> {
        match self {
            NoiseSpec::Box(b) => Ok(ConstrainedZonotope::from_box(b)?),
            NoiseSpec::Set(z) => Ok(z.clone()),
        }
    }
}

fn matrix(rows: &[Vec<f64>], agent: usize, name: &str) -> Result<DMatrix<f64>, ModelError> {
    let ncols = rows.first().map_or(0, |r| r.len());
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(ModelError::Inconsistent {
            agent,
            what: format!("matrix {name} has rows of unequal length"),
        });
    }
    Ok(from_rows(rows, ncols))
}

impl ModelSpec {
    fn matrices(&self, agent: usize) -> Result<(Dynamics, DMatrix<f64>, DMatrix<f64>, DMatrix<f64>), ModelError> {
        match self {
            ModelSpec::CoordinatedTurn {
                omega,
                period,
                measure_both_axes,
            } => {
                if *omega == 0.0 || !omega.is_finite() || !period.is_finite() {
                    return Err(ModelError::Inconsistent {
                        agent,
                        what: "coordinated_turn needs finite omega != 0 and finite period".into(),
                    });
                }
                let t = *period;
                let b_axis = DMatrix::from_row_slice(2, 1, &[t * t / 2.0, t]);
                let c_axis = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
                let c = if *measure_both_axes {
                    block_diag(&[&c_axis, &c_axis])
                } else {
                    DMatrix::from_row_slice(1, 4, &[1.0, 0.0, 0.0, 0.0])
                };
                let d = DMatrix::from_row_slice(2, 4, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
                Ok((
                    Dynamics::CoordinatedTurn {
                        omega: *omega,
                        period: *period,
                    },
                    block_diag(&[&b_axis, &b_axis]),
                    c,
                    d,
                ))
            }
            ModelSpec::Linear { a, b, c, d } => Ok((
                Dynamics::Constant(matrix(a, agent, "A")?),
                matrix(b, agent, "B")?,
                matrix(c, agent, "C")?,
                matrix(d, agent, "D")?,
            )),
        }
    }
}

impl SystemSpec {
    /// Build the validated system. Ids in the file are 1-based; the returned
    /// system indexes agents from 0.
    pub fn build(&self) -> Result<MultiAgentSystem, ModelError> {
        let n = self.agents.len();
        let mut edges = Vec::with_capacity(self.edges.len());
        for e in &self.edges {
            if e.from == 0 || e.to == 0 || e.from > n || e.to > n {
                return Err(ModelError::UnknownAgent(e.from.max(e.to)));
            }
            edges.push((e.from - 1, e.to - 1));
        }
        let topology = Topology::new(n, &edges)?;
        let mut agents = Vec::with_capacity(n);
        for (i, spec) in self.agents.iter().enumerate() {
            if spec.id != i + 1 {
                return Err(ModelError::Inconsistent {
                    agent: i,
                    what: format!("agent ids must be 1..=N in order; found id {} at position {}", spec.id, i + 1),
                });
            }
            let (dynamics, b, c, d) = spec.model.matrices(i)?;
            let mut rsets = BTreeMap::new();
            for &j in topology.in_neighbors(i) {
                let set = match spec.relative_noise_overrides.get(&(j + 1).to_string()) {
                    Some(ns) => ns.to_set()?,
                    None => spec.relative_noise.to_set()?,
                };
                rsets.insert(j, set);
            }
            agents.push(AgentModel {
                dynamics,
                b,
                c,
                d,
                wset: spec.process_noise.to_set()?,
                vset: spec.measurement_noise.to_set()?,
                rsets,
            });
        }
        MultiAgentSystem::new(agents, topology)
    }
}
