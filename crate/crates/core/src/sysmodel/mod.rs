//! Multi-agent linear system with absolute and relative measurements, and
//! the builders that stack it into centralized and per-neighborhood form.

mod schema;
mod topology;

use std::collections::BTreeMap;
use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::czono::{ConstrainedZonotope, CzError};
use crate::linalg::{block_diag, concat, rank, vstack};

pub use schema::{AgentSpec, EdgeSpec, ModelSpec, NoiseSpec, SystemSpec};
pub use topology::Topology;

/// Relative singular-value tolerance for numerical rank.
pub const RANK_TOL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("unknown agent {0}")]
    UnknownAgent(usize),
    #[error("self-loop on agent {0}")]
    SelfLoop(usize),
    #[error("duplicate edge {from} -> {to}")]
    DuplicateEdge { from: usize, to: usize },
    #[error("agent {agent}: {what}")]
    Inconsistent { agent: usize, what: String },
    #[error("agent {agent} has no relative-noise set for in-neighbor {neighbor}")]
    MissingRelativeNoise { agent: usize, neighbor: usize },
    #[error("system is not observable within {0} steps")]
    NotObservableWithin(usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Set(#[from] CzError),
}

/// Time-varying system matrix `A_i(k)`.
#[derive(Debug, Clone, PartialEq)]
pub enum Dynamics {
    Constant(DMatrix<f64>),
    /// Planar coordinated-turn family acting on `[p_x, v_x, p_y, v_y]`: the
    /// same 2x2 block applied to each axis.
    CoordinatedTurn { omega: f64, period: f64 },
}

impl Dynamics {
    pub fn dim(&self) -> usize {
        match self {
            Dynamics::Constant(m) => m.nrows(),
            Dynamics::CoordinatedTurn { .. } => 4,
        }
    }

    pub fn at(&self, k: usize) -> DMatrix<f64> {
        match self {
            Dynamics::Constant(m) => m.clone(),
            Dynamics::CoordinatedTurn { omega, period } => {
                let blk = coordinated_turn_block(*omega, *period, k);
                block_diag(&[&blk, &blk])
            }
        }
    }
}

/// `[[a11, a12], [-a12, a11]]` with
/// `a11 = 1 + (sin((k+1)wT) - sin(kwT)) / w` and
/// `a12 = -(cos((k+1)wT) - cos(kwT)) / w`.
pub fn coordinated_turn_block(omega: f64, period: f64, k: usize) -> DMatrix<f64> {
    let k = k as f64;
    let (s1, s0) = (((k + 1.0) * omega * period).sin(), (k * omega * period).sin());
    let (c1, c0) = (((k + 1.0) * omega * period).cos(), (k * omega * period).cos());
    let a11 = 1.0 + (s1 - s0) / omega;
    let a12 = -(c1 - c0) / omega;
    DMatrix::from_row_slice(2, 2, &[a11, a12, -a12, a11])
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentModel {
    pub dynamics: Dynamics,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
    pub wset: ConstrainedZonotope,
    pub vset: ConstrainedZonotope,
    /// Relative-measurement noise set per in-neighbor.
    pub rsets: BTreeMap<usize, ConstrainedZonotope>,
}

impl AgentModel {
    pub fn state_dim(&self) -> usize {
        self.dynamics.dim()
    }

    fn validate(&self, id: usize) -> Result<(), ModelError> {
        let n = self.state_dim();
        let bad = |what: String| Err(ModelError::Inconsistent { agent: id, what });
        if let Dynamics::Constant(m) = &self.dynamics {
            if !m.is_square() {
                return bad(format!("A is {}x{}, not square", m.nrows(), m.ncols()));
            }
        }
        if self.b.nrows() != n {
            return bad(format!("B has {} rows, state dimension is {n}", self.b.nrows()));
        }
        if self.wset.dim() != self.b.ncols() {
            return bad(format!(
                "process noise set has dimension {}, B has {} columns",
                self.wset.dim(),
                self.b.ncols()
            ));
        }
        if self.c.ncols() != n || self.vset.dim() != self.c.nrows() {
            return bad("C / measurement-noise dimensions disagree with the state".into());
        }
        if self.d.ncols() != n {
            return bad(format!("D has {} columns, state dimension is {n}", self.d.ncols()));
        }
        for (j, r) in &self.rsets {
            if r.dim() != self.d.nrows() {
                return bad(format!(
                    "relative noise set for neighbor {j} has dimension {}, D has {} rows",
                    r.dim(),
                    self.d.nrows()
                ));
            }
        }
        for (name, set) in [("process", &self.wset), ("measurement", &self.vset)]
            .into_iter()
            .chain(self.rsets.values().map(|r| ("relative", r)))
        {
            let hull = set.interval_hull().map_err(|e| ModelError::Inconsistent {
                agent: id,
                what: format!("{name} noise set: {e}"),
            })?;
            if !hull.is_bounded() {
                return bad(format!("{name} noise set is unbounded"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiAgentSystem {
    agents: Vec<AgentModel>,
    topology: Topology,
    offsets: Vec<usize>,
}

/// One time step of measurements.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementBatch {
    pub k: usize,
    /// Absolute measurement `y_i` per agent.
    pub y: Vec<DVector<f64>>,
    /// Relative measurement `z_{i,j}` keyed by `(i, j)` with `j in N_i`.
    pub z: BTreeMap<(usize, usize), DVector<f64>>,
}

impl MeasurementBatch {
    /// Centralized order: all `y_i`, then `z_{i,j}` by `i`, then `j`.
    pub fn stacked_centralized(&self) -> DVector<f64> {
        let parts: Vec<&DVector<f64>> = self.y.iter().chain(self.z.values()).collect();
        concat(&parts)
    }

    /// Neighborhood order for agent `i`: `y_i, y_{j1}, .., y_{js}, z_{i,j1}, .., z_{i,js}`.
    pub fn stacked_neighborhood(&self, topology: &Topology, i: usize) -> DVector<f64> {
        let mut parts: Vec<&DVector<f64>> = topology
            .closed_neighborhood(i)
            .iter()
            .map(|&a| &self.y[a])
            .collect();
        parts.extend(topology.in_neighbors(i).iter().map(|&j| &self.z[&(i, j)]));
        concat(&parts)
    }
}

/// Augmented linear system over a set of agent blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct StackedSystem {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub h: DMatrix<f64>,
    pub vset: ConstrainedZonotope,
    pub wset: ConstrainedZonotope,
    /// Agent id and its coordinate range, in block order.
    pub index_map: Vec<(usize, Range<usize>)>,
}

impl StackedSystem {
    pub fn range_of(&self, agent: usize) -> Option<Range<usize>> {
        self.index_map
            .iter()
            .find(|(a, _)| *a == agent)
            .map(|(_, r)| r.clone())
    }
}

impl MultiAgentSystem {
    pub fn new(agents: Vec<AgentModel>, topology: Topology) -> Result<Self, ModelError> {
        if agents.len() != topology.num_agents() {
            return Err(ModelError::DimensionMismatch {
                expected: topology.num_agents(),
                got: agents.len(),
            });
        }
        for (i, ag) in agents.iter().enumerate() {
            ag.validate(i)?;
            for &j in topology.in_neighbors(i) {
                if !ag.rsets.contains_key(&j) {
                    return Err(ModelError::MissingRelativeNoise { agent: i, neighbor: j });
                }
                if agents[j].state_dim() != ag.state_dim() {
                    return Err(ModelError::Inconsistent {
                        agent: i,
                        what: format!("neighbor {j} has a different state dimension"),
                    });
                }
            }
        }
        let mut offsets = Vec::with_capacity(agents.len() + 1);
        offsets.push(0);
        for ag in &agents {
            offsets.push(offsets.last().unwrap() + ag.state_dim());
        }
        Ok(Self {
            agents,
            topology,
            offsets,
        })
    }

    pub fn num_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn agent(&self, i: usize) -> &AgentModel {
        &self.agents[i]
    }

    pub fn agents(&self) -> &[AgentModel] {
        &self.agents
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn total_state_dim(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    /// Coordinates of agent `i` in the centralized state.
    pub fn state_range(&self, i: usize) -> Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }

    fn check_agent(&self, i: usize) -> Result<(), ModelError> {
        if i >= self.num_agents() {
            return Err(ModelError::UnknownAgent(i));
        }
        Ok(())
    }

    /// Stack the agents listed in `order` (state blocks in that order). The
    /// absolute rows cover every listed agent; relative rows are taken for
    /// each `(i, j)` in `relative` with both endpoints in `order`.
    fn stack(&self, order: &[usize], relative: &[(usize, usize)], k: usize) -> Result<StackedSystem, ModelError> {
        let mut index_map = Vec::with_capacity(order.len());
        let mut pos = BTreeMap::new();
        let mut off = 0;
        for &a in order {
            let n = self.agents[a].state_dim();
            index_map.push((a, off..off + n));
            pos.insert(a, off);
            off += n;
        }
        let a_blocks: Vec<DMatrix<f64>> = order.iter().map(|&a| self.agents[a].dynamics.at(k)).collect();
        let a_refs: Vec<&DMatrix<f64>> = a_blocks.iter().collect();
        let b_refs: Vec<&DMatrix<f64>> = order.iter().map(|&a| &self.agents[a].b).collect();
        let c_refs: Vec<&DMatrix<f64>> = order.iter().map(|&a| &self.agents[a].c).collect();

        let mut rel_rows = Vec::with_capacity(relative.len());
        for &(i, j) in relative {
            let d = &self.agents[i].d;
            let mut row = DMatrix::zeros(d.nrows(), off);
            row.view_mut((0, pos[&i]), d.shape()).copy_from(d);
            row.view_mut((0, pos[&j]), d.shape()).copy_from(&(-d));
            rel_rows.push(row);
        }
        let c_stack = block_diag(&c_refs);
        let mut h_parts: Vec<&DMatrix<f64>> = vec![&c_stack];
        h_parts.extend(rel_rows.iter());

        let mut v_parts: Vec<&ConstrainedZonotope> = order.iter().map(|&a| &self.agents[a].vset).collect();
        for &(i, j) in relative {
            v_parts.push(&self.agents[i].rsets[&j]);
        }
        let w_parts: Vec<&ConstrainedZonotope> = order.iter().map(|&a| &self.agents[a].wset).collect();

        Ok(StackedSystem {
            a: block_diag(&a_refs),
            b: block_diag(&b_refs),
            h: vstack(&h_parts),
            vset: ConstrainedZonotope::cartesian_product(&v_parts)?,
            wset: ConstrainedZonotope::cartesian_product(&w_parts)?,
            index_map,
        })
    }

    /// Whole-network stacking at time `k`.
    pub fn build_centralized(&self, k: usize) -> Result<StackedSystem, ModelError> {
        let order: Vec<usize> = (0..self.num_agents()).collect();
        let relative: Vec<(usize, usize)> = self.topology.edges().iter().map(|&(j, i)| (i, j)).collect();
        self.stack(&order, &relative, k)
    }

    /// Stacking over `{i} ∪ N_i` (agent `i` first) with `i`'s relative rows.
    pub fn build_neighborhood(&self, i: usize, k: usize) -> Result<StackedSystem, ModelError> {
        self.check_agent(i)?;
        let order = self.topology.closed_neighborhood(i);
        let relative: Vec<(usize, usize)> = self.topology.in_neighbors(i).iter().map(|&j| (i, j)).collect();
        self.stack(&order, &relative, k)
    }

    fn check_len(&self, got: usize, expected: usize) -> Result<(), ModelError> {
        if got != expected {
            return Err(ModelError::DimensionMismatch { expected, got });
        }
        Ok(())
    }

    fn total_noise_dim(&self) -> usize {
        self.agents.iter().map(|a| a.b.ncols()).sum()
    }

    /// `x_{i,k+1} = A_i(k) x_{i,k} + B_i w_{i,k}` for every agent.
    pub fn step_truth(&self, k: usize, x: &DVector<f64>, w: &DVector<f64>) -> Result<DVector<f64>, ModelError> {
        #[cfg(debug_assertions)]
        {
            let mut off = 0;
            for ag in &self.agents {
                let p = ag.b.ncols();
                if w.len() >= off + p {
                    let wi = w.rows(off, p).into_owned();
                    debug_assert!(
                        ag.wset.contains(&wi).unwrap_or(false),
                        "process noise outside its declared set"
                    );
                }
                off += p;
            }
        }
        self.step_truth_unchecked(k, x, w)
    }

    /// [`Self::step_truth`] without the debug-mode noise-membership assertion;
    /// used when out-of-model noise is injected on purpose.
    pub fn step_truth_unchecked(&self, k: usize, x: &DVector<f64>, w: &DVector<f64>) -> Result<DVector<f64>, ModelError> {
        self.check_len(x.len(), self.total_state_dim())?;
        self.check_len(w.len(), self.total_noise_dim())?;
        let mut next = DVector::zeros(x.len());
        let mut woff = 0;
        for (i, ag) in self.agents.iter().enumerate() {
            let r = self.state_range(i);
            let p = ag.b.ncols();
            let xi = x.rows(r.start, r.len());
            let wi = w.rows(woff, p);
            let xn = ag.dynamics.at(k) * xi + &ag.b * wi;
            next.rows_mut(r.start, r.len()).copy_from(&xn);
            woff += p;
        }
        Ok(next)
    }

    /// `y_i = C_i x_i + v_i` and `z_{i,j} = D_i (x_i - x_j) + r_{i,j}`.
    pub fn measure(
        &self,
        k: usize,
        x: &DVector<f64>,
        v: &[DVector<f64>],
        r: &BTreeMap<(usize, usize), DVector<f64>>,
    ) -> Result<MeasurementBatch, ModelError> {
        self.check_len(x.len(), self.total_state_dim())?;
        self.check_len(v.len(), self.num_agents())?;
        let block = |i: usize| x.rows(self.offsets[i], self.agents[i].state_dim());
        let mut y = Vec::with_capacity(self.num_agents());
        for (i, ag) in self.agents.iter().enumerate() {
            self.check_len(v[i].len(), ag.c.nrows())?;
            y.push(&ag.c * block(i) + &v[i]);
        }
        let mut z = BTreeMap::new();
        for (j, i) in self.topology.edges() {
            let d = &self.agents[i].d;
            let rij = r.get(&(i, j)).ok_or(ModelError::MissingRelativeNoise { agent: i, neighbor: j })?;
            self.check_len(rij.len(), d.nrows())?;
            z.insert((i, j), d * (block(i) - block(j)) + rij);
        }
        Ok(MeasurementBatch { k, y, z })
    }

    /// Smallest `mu` such that `[H(k0); H(k0+1) A(k0); ...]` over `mu` steps
    /// has full column rank.
    pub fn observability_index(&self, k0: usize, mu_max: usize) -> Result<usize, ModelError> {
        let n = self.total_state_dim();
        let mut phi = DMatrix::identity(n, n);
        let mut obs = DMatrix::zeros(0, n);
        for t in 0..mu_max {
            let st = self.build_centralized(k0 + t)?;
            obs = vstack(&[&obs, &(&st.h * &phi)]);
            if rank(&obs, RANK_TOL) == n {
                return Ok(t + 1);
            }
            phi = &st.a * phi;
        }
        Err(ModelError::NotObservableWithin(mu_max))
    }

    /// Same system with agent `a` renamed to `perm[a]`.
    pub fn relabeled(&self, perm: &[usize]) -> Result<Self, ModelError> {
        let n = self.num_agents();
        let mut agents: Vec<Option<AgentModel>> = vec![None; n];
        for (a, ag) in self.agents.iter().enumerate() {
            let mut ag = ag.clone();
            ag.rsets = ag.rsets.into_iter().map(|(j, s)| (perm[j], s)).collect();
            agents[perm[a]] = Some(ag);
        }
        let agents = agents.into_iter().map(|a| a.expect("perm is a permutation")).collect();
        Self::new(agents, self.topology.relabeled(perm)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::czono::IntervalBox;

    fn box1(r: f64) -> ConstrainedZonotope {
        ConstrainedZonotope::from_box(&IntervalBox::symmetric(1, r).unwrap()).unwrap()
    }

    fn scalar_agent(a: f64, nbrs: &[usize]) -> AgentModel {
        let one = DMatrix::from_element(1, 1, 1.0);
        AgentModel {
            dynamics: Dynamics::Constant(DMatrix::from_element(1, 1, a)),
            b: one.clone(),
            c: one.clone(),
            d: one,
            wset: box1(0.5),
            vset: box1(1.0),
            rsets: nbrs.iter().map(|&j| (j, box1(0.25))).collect(),
        }
    }

    fn pair() -> MultiAgentSystem {
        // edge 1 -> 0: agent 0 measures relative to agent 1
        MultiAgentSystem::new(
            vec![scalar_agent(1.0, &[1]), scalar_agent(1.0, &[])],
            Topology::new(2, &[(1, 0)]).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn single_agent_centralized() {
        let sys = MultiAgentSystem::new(vec![scalar_agent(2.0, &[])], Topology::new(1, &[]).unwrap()).unwrap();
        let st = sys.build_centralized(0).unwrap();
        assert_eq!(st.a, DMatrix::from_element(1, 1, 2.0));
        assert_eq!(st.h, DMatrix::from_element(1, 1, 1.0));
        assert_eq!(st.vset, box1(1.0));
    }

    #[test]
    fn pair_relative_row_appended() {
        let st = pair().build_centralized(0).unwrap();
        let expected = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, -1.0]);
        assert_eq!(st.h, expected);
        assert_eq!(st.vset.dim(), 3);
    }

    #[test]
    fn neighborhood_of_pair() {
        let st = pair().build_neighborhood(0, 0).unwrap();
        assert_eq!(st.h, DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, -1.0]));
        let st1 = pair().build_neighborhood(1, 0).unwrap();
        assert_eq!(st1.h, DMatrix::from_element(1, 1, 1.0));
        assert!(matches!(pair().build_neighborhood(5, 0), Err(ModelError::UnknownAgent(5))));
    }

    #[test]
    fn step_truth_examples() {
        let sys = MultiAgentSystem::new(vec![scalar_agent(2.0, &[])], Topology::new(1, &[]).unwrap()).unwrap();
        let x = sys
            .step_truth(0, &DVector::from_vec(vec![1.0]), &DVector::from_vec(vec![0.5]))
            .unwrap();
        assert_eq!(x[0], 2.5);
        let id = pair();
        let x = DVector::from_vec(vec![0.3, -0.7]);
        assert_eq!(id.step_truth(3, &x, &DVector::zeros(2)).unwrap(), x);
        assert!(id.step_truth(0, &x, &DVector::zeros(1)).is_err());
    }

    #[test]
    fn measure_examples() {
        let sys = pair();
        let x = DVector::from_vec(vec![1.5, 1.5]);
        let v = vec![DVector::zeros(1), DVector::zeros(1)];
        let mut r = BTreeMap::new();
        r.insert((0, 1), DVector::zeros(1));
        let m = sys.measure(0, &x, &v, &r).unwrap();
        assert_eq!(m.y[0], DVector::from_vec(vec![1.5]));
        assert_eq!(m.z[&(0, 1)], DVector::zeros(1));
    }

    #[test]
    fn measure_planar_offset() {
        let d = DMatrix::identity(2, 2);
        let ag = |nbrs: &[usize]| AgentModel {
            dynamics: Dynamics::Constant(DMatrix::identity(2, 2)),
            b: DMatrix::identity(2, 2),
            c: DMatrix::identity(2, 2),
            d: d.clone(),
            wset: ConstrainedZonotope::from_box(&IntervalBox::symmetric(2, 1.0).unwrap()).unwrap(),
            vset: ConstrainedZonotope::from_box(&IntervalBox::symmetric(2, 1.0).unwrap()).unwrap(),
            rsets: nbrs
                .iter()
                .map(|&j| (j, ConstrainedZonotope::from_box(&IntervalBox::symmetric(2, 1.0).unwrap()).unwrap()))
                .collect(),
        };
        let sys = MultiAgentSystem::new(vec![ag(&[1]), ag(&[])], Topology::new(2, &[(1, 0)]).unwrap()).unwrap();
        let x = DVector::from_vec(vec![1.0, 2.0, 0.0, 0.0]);
        let v = vec![DVector::zeros(2), DVector::zeros(2)];
        let mut r = BTreeMap::new();
        r.insert((0, 1), DVector::from_vec(vec![0.1, -0.1]));
        let m = sys.measure(0, &x, &v, &r).unwrap();
        assert!((m.z[&(0, 1)][0] - 1.1).abs() < 1e-15);
        assert!((m.z[&(0, 1)][1] - 1.9).abs() < 1e-15);
    }

    #[test]
    fn observability_index_examples() {
        assert_eq!(pair().observability_index(0, 5).unwrap(), 1);
        let di = AgentModel {
            dynamics: Dynamics::Constant(DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0])),
            b: DMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
            c: DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
            d: DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
            wset: box1(1.0),
            vset: box1(1.0),
            rsets: BTreeMap::new(),
        };
        let sys = MultiAgentSystem::new(vec![di.clone()], Topology::new(1, &[]).unwrap()).unwrap();
        assert_eq!(sys.observability_index(0, 5).unwrap(), 2);
        let mut blind = di;
        blind.dynamics = Dynamics::Constant(DMatrix::identity(2, 2));
        let sys = MultiAgentSystem::new(vec![blind], Topology::new(1, &[]).unwrap()).unwrap();
        assert_eq!(sys.observability_index(0, 4), Err(ModelError::NotObservableWithin(4)));
    }

    #[test]
    fn coordinated_turn_at_zero() {
        let t = std::f64::consts::PI / 12.0;
        let a = coordinated_turn_block(1.0, t, 0);
        assert!((a[(0, 0)] - (1.0 + t.sin())).abs() < 1e-15);
        assert!((a[(0, 1)] - (1.0 - t.cos())).abs() < 1e-15);
        assert_eq!(a[(1, 0)], -a[(0, 1)]);
        assert_eq!(a[(1, 1)], a[(0, 0)]);
    }

    #[test]
    fn rejects_inconsistent_agent() {
        let mut ag = scalar_agent(1.0, &[]);
        ag.c = DMatrix::zeros(1, 2);
        assert!(matches!(
            MultiAgentSystem::new(vec![ag], Topology::new(1, &[]).unwrap()),
            Err(ModelError::Inconsistent { agent: 0, .. })
        ));
        let ag = scalar_agent(1.0, &[]);
        assert_eq!(
            MultiAgentSystem::new(vec![ag.clone(), ag], Topology::new(2, &[(1, 0)]).unwrap()),
            Err(ModelError::MissingRelativeNoise { agent: 0, neighbor: 1 })
        );
    }
}
