use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::{empty_as_posterior, FilterError};
use crate::czono::{ConstrainedZonotope, HalfWidth};
use crate::linalg::{block_diag, concat, hstack, vstack};
use crate::sysmodel::{MeasurementBatch, MultiAgentSystem, StackedSystem, Topology};

/// `E_{alpha,u} = e_{alpha,u} ⊗ I_n`: selects block `alpha` (0-based) out of
/// `u` blocks of size `n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProjectionMatrix {
    pub alpha: usize,
    pub u: usize,
    pub n: usize,
}

impl ProjectionMatrix {
    pub fn new(alpha: usize, u: usize, n: usize) -> Result<Self, FilterError> {
        if alpha >= u {
            return Err(FilterError::BlockDimensions(format!(
                "block {alpha} out of {u}"
            )));
        }
        Ok(Self { alpha, u, n })
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        let mut e = DMatrix::zeros(self.n, self.u * self.n);
        e.view_mut((0, self.alpha * self.n), (self.n, self.n))
            .fill_with_identity();
        e
    }

    /// `E m` without forming `E`.
    pub fn apply(&self, m: &DMatrix<f64>) -> Result<DMatrix<f64>, FilterError> {
        self.check_rows(m.nrows())?;
        Ok(m.rows(self.alpha * self.n, self.n).into_owned())
    }

    pub fn apply_vec(&self, v: &DVector<f64>) -> Result<DVector<f64>, FilterError> {
        self.check_rows(v.len())?;
        Ok(v.rows(self.alpha * self.n, self.n).into_owned())
    }

    fn check_rows(&self, rows: usize) -> Result<(), FilterError> {
        if rows != self.u * self.n {
            return Err(FilterError::BlockDimensions(format!(
                "expected {} rows ({} blocks of {}), got {rows}",
                self.u * self.n,
                self.u,
                self.n
            )));
        }
        Ok(())
    }
}

/// A neighborhood posterior received from agent `from`, in which the
/// receiving agent occupies block `alpha`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceivedJoint {
    pub from: usize,
    pub joint: ConstrainedZonotope,
    pub alpha: usize,
}

/// `A_i(k-1) Z ⊕ B_i W_i`.
pub fn distributed_predict(
    posterior: &ConstrainedZonotope,
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    wset: &ConstrainedZonotope,
) -> Result<ConstrainedZonotope, FilterError> {
    Ok(posterior.linear_map(a)?.minkowski_sum(&wset.linear_map(b)?)?)
}

/// Product of the priors over the closed neighborhood of `i`, `i` first.
pub fn joint_prior(
    topology: &Topology,
    i: usize,
    priors: &BTreeMap<usize, ConstrainedZonotope>,
) -> Result<ConstrainedZonotope, FilterError> {
    let parts = topology
        .closed_neighborhood(i)
        .into_iter()
        .map(|j| {
            priors
                .get(&j)
                .ok_or(FilterError::MissingNeighborPrior { agent: i, neighbor: j })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ConstrainedZonotope::cartesian_product(&parts)?)
}

/// Neighborhood measurement update with an emptiness check.
pub fn joint_update(
    joint_prior: &ConstrainedZonotope,
    stacked: &StackedSystem,
    y: &DVector<f64>,
    k: usize,
    agent: usize,
) -> Result<ConstrainedZonotope, FilterError> {
    let post = joint_prior.intersect_under_map(&stacked.h, y, &stacked.vset)?;
    if post.is_empty()? {
        return Err(FilterError::EmptyPosterior { k, agent: Some(agent) });
    }
    Ok(post)
}

/// Agent `i`'s block of its own joint posterior, intersected with its block
/// of every received joint posterior. `n` is the block size; the own joint
/// has `i` in block 0.
pub fn update_intersection(
    own_joint: &ConstrainedZonotope,
    n: usize,
    received: &[ReceivedJoint],
) -> Result<ConstrainedZonotope, FilterError> {
    stack_intersection(own_joint, n, received, false)
}

/// [`update_intersection`] with the coupling offset negated. The result is
/// not the intended set; it exists so verification can show the checks
/// catch this mistake.
pub fn update_intersection_with_fault(
    own_joint: &ConstrainedZonotope,
    n: usize,
    received: &[ReceivedJoint],
) -> Result<ConstrainedZonotope, FilterError> {
    stack_intersection(own_joint, n, received, true)
}

fn blocks_of(z: &ConstrainedZonotope, n: usize) -> Result<usize, FilterError> {
    if n == 0 || z.dim() % n != 0 {
        return Err(FilterError::BlockDimensions(format!(
            "set of dimension {} is not a stack of {n}-blocks",
            z.dim()
        )));
    }
    Ok(z.dim() / n)
}

fn stack_intersection(
    own_joint: &ConstrainedZonotope,
    n: usize,
    received: &[ReceivedJoint],
    flip_offset: bool,
) -> Result<ConstrainedZonotope, FilterError> {
    let e1 = ProjectionMatrix::new(0, blocks_of(own_joint, n)?, n)?;
    let g_own = e1.apply(own_joint.generators())?;
    let c_own = e1.apply_vec(own_joint.center())?;

    let mut col_blocks = vec![own_joint.num_generators()];
    let mut a_parts = vec![own_joint.constraint_matrix()];
    let mut b_parts = vec![own_joint.constraint_offset().clone()];
    let mut h: Vec<HalfWidth> = own_joint.half_widths().to_vec();
    let mut selected = Vec::with_capacity(received.len());
    for r in received {
        let e = ProjectionMatrix::new(r.alpha, blocks_of(&r.joint, n)?, n)?;
        selected.push((e.apply(r.joint.generators())?, e.apply_vec(r.joint.center())?));
        col_blocks.push(r.joint.num_generators());
        a_parts.push(r.joint.constraint_matrix());
        b_parts.push(r.joint.constraint_offset().clone());
        h.extend_from_slice(r.joint.half_widths());
    }
    let total: usize = col_blocks.iter().sum();

    let mut coupling_rows = Vec::with_capacity(received.len());
    let mut col = col_blocks[0];
    for ((g_l, c_l), width) in selected.iter().zip(&col_blocks[1..]) {
        let mut row = DMatrix::zeros(n, total);
        row.view_mut((0, 0), g_own.shape()).copy_from(&g_own);
        row.view_mut((0, col), (n, *width)).copy_from(&(-g_l));
        coupling_rows.push(row);
        b_parts.push(if flip_offset { &c_own - c_l } else { c_l - &c_own });
        col += width;
    }

    let diag = block_diag(&a_parts);
    let mut a_all: Vec<&DMatrix<f64>> = vec![&diag];
    a_all.extend(coupling_rows.iter());
    let b_refs: Vec<&DVector<f64>> = b_parts.iter().collect();
    let g = hstack(&[&g_own, &DMatrix::zeros(n, total - col_blocks[0])]);
    Ok(ConstrainedZonotope::new(g, c_own, vstack(&a_all), concat(&b_refs), h)?)
}

/// Interval hull of `set` re-encoded as `(diag(half widths), center)` with
/// unit half-widths and no constraints.
pub fn finalize_hull(set: &ConstrainedZonotope, k: usize, agent: usize) -> Result<ConstrainedZonotope, FilterError> {
    let hull = set
        .interval_hull()
        .map_err(|e| empty_as_posterior(e, k, Some(agent)))?;
    if !hull.is_bounded() {
        return Err(FilterError::UnboundedHull);
    }
    let n = hull.dim();
    let widths = hull.widths();
    let half = DMatrix::from_diagonal(&DVector::from_iterator(n, widths.iter().map(|w| w / 2.0)));
    Ok(ConstrainedZonotope::zonotope(half, hull.center())?)
}

/// Per-agent state after a completed step.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    /// Finalized interval-hull set of the agent's own state.
    pub posterior: ConstrainedZonotope,
    /// Updated neighborhood set, as sent to out-neighbors in round 2.
    pub joint_posterior: ConstrainedZonotope,
}

/// Distributed filter run in lockstep for the whole network. Each agent only
/// uses its own model, its in-neighbors' priors and absolute measurements,
/// its own relative measurements, and the joint posteriors received back from
/// mutual neighbors.
#[derive(Debug, Clone)]
pub struct DistributedFilter {
    initial: Vec<ConstrainedZonotope>,
    states: Vec<AgentState>,
    k: Option<usize>,
}

impl DistributedFilter {
    /// One initial range per agent.
    pub fn new(initial: Vec<ConstrainedZonotope>) -> Self {
        Self {
            initial,
            states: Vec::new(),
            k: None,
        }
    }

    /// Split a joint initial range into per-agent interval hulls.
    pub fn from_joint_initial(sys: &MultiAgentSystem, initial: &ConstrainedZonotope) -> Result<Self, FilterError> {
        let hull = initial.interval_hull()?;
        let blocks = (0..sys.num_agents())
            .map(|i| {
                let coords: Vec<usize> = sys.state_range(i).collect();
                Ok(ConstrainedZonotope::from_box(&hull.select(&coords))?)
            })
            .collect::<Result<Vec<_>, FilterError>>()?;
        Ok(Self::new(blocks))
    }

    pub fn states(&self) -> &[AgentState] {
        &self.states
    }

    pub fn time(&self) -> Option<usize> {
        self.k
    }

    pub fn step(&mut self, sys: &MultiAgentSystem, batch: &MeasurementBatch) -> Result<&[AgentState], FilterError> {
        let k = batch.k;
        let n_agents = sys.num_agents();
        if self.initial.len() != n_agents {
            return Err(FilterError::BlockDimensions(format!(
                "{} initial ranges for {n_agents} agents",
                self.initial.len()
            )));
        }
        let topo = sys.topology();
        let priors: Vec<ConstrainedZonotope> = match self.k {
            Some(prev) => {
                if k != prev + 1 {
                    return Err(FilterError::OutOfSequence { expected: prev + 1, got: k });
                }
                (0..n_agents)
                    .into_par_iter()
                    .map(|i| {
                        let ag = sys.agent(i);
                        distributed_predict(&self.states[i].posterior, &ag.dynamics.at(prev), &ag.b, &ag.wset)
                    })
                    .collect::<Result<_, _>>()?
            }
            None => self.initial.clone(),
        };

        // round 1: priors and absolute measurements are published
        let joints: Vec<ConstrainedZonotope> = (0..n_agents)
            .into_par_iter()
            .map(|i| {
                let inbox: BTreeMap<usize, ConstrainedZonotope> = topo
                    .closed_neighborhood(i)
                    .into_iter()
                    .map(|j| (j, priors[j].clone()))
                    .collect();
                let prior = joint_prior(topo, i, &inbox)?;
                let st = sys.build_neighborhood(i, k)?;
                let y = batch.stacked_neighborhood(topo, i);
                Ok(prior.intersect_under_map(&st.h, &y, &st.vset)?)
            })
            .collect::<Result<_, FilterError>>()?;

        // round 2: joint posteriors are published
        let states: Vec<AgentState> = (0..n_agents)
            .into_par_iter()
            .map(|i| {
                let received: Vec<ReceivedJoint> = topo
                    .mutual_neighbors(i)
                    .into_iter()
                    .map(|l| ReceivedJoint {
                        from: l,
                        joint: joints[l].clone(),
                        alpha: topo.position_in_neighborhood(l, i).expect("mutual neighbor"),
                    })
                    .collect();
                let merged = update_intersection(&joints[i], sys.agent(i).state_dim(), &received)?;
                Ok(AgentState {
                    posterior: finalize_hull(&merged, k, i)?,
                    joint_posterior: joints[i].clone(),
                })
            })
            .collect::<Result<_, FilterError>>()?;

        self.states = states;
        self.k = Some(k);
        Ok(&self.states)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::czono::IntervalBox;

    fn interval(lo: f64, hi: f64) -> ConstrainedZonotope {
        ConstrainedZonotope::from_box(&IntervalBox::from_slices(&[lo], &[hi]).unwrap()).unwrap()
    }

    fn hull1(z: &ConstrainedZonotope) -> (f64, f64) {
        let h = z.interval_hull().unwrap();
        (h.lo()[0], h.hi()[0])
    }

    #[test]
    fn projection_matrices() {
        let e14 = ProjectionMatrix::new(0, 4, 2).unwrap().matrix();
        assert_eq!(e14.shape(), (2, 8));
        assert_eq!(e14.columns(0, 2), DMatrix::<f64>::identity(2, 2));
        assert!(e14.columns(2, 6).iter().all(|&v| v == 0.0));
        let e23 = ProjectionMatrix::new(1, 3, 2).unwrap().matrix();
        assert_eq!(e23.columns(2, 2), DMatrix::<f64>::identity(2, 2));
        assert!(e23.columns(0, 2).iter().all(|&v| v == 0.0));
        assert!(e23.columns(4, 2).iter().all(|&v| v == 0.0));
        assert!(ProjectionMatrix::new(3, 3, 2).is_err());
    }

    #[test]
    fn predict_example() {
        let one = DMatrix::from_element(1, 1, 1.0);
        let z = distributed_predict(&interval(0.0, 2.0), &(2.0 * &one), &one, &interval(-1.0, 1.0)).unwrap();
        assert_eq!(hull1(&z), (-1.0, 5.0));
        let same = distributed_predict(&interval(0.0, 2.0), &one, &one, &interval(0.0, 0.0)).unwrap();
        assert_eq!(hull1(&same), (0.0, 2.0));
    }

    #[test]
    fn joint_prior_order_and_missing() {
        let topo = Topology::new(5, &[(0, 1), (2, 1), (3, 1), (1, 3), (2, 3), (3, 4)]).unwrap();
        let priors: BTreeMap<usize, ConstrainedZonotope> =
            (0..5).map(|j| (j, interval(j as f64, j as f64 + 0.5))).collect();
        let joint = joint_prior(&topo, 1, &priors).unwrap();
        let h = joint.interval_hull().unwrap();
        assert_eq!(h.lo().as_slice(), &[1.0, 0.0, 2.0, 3.0]);
        let mut partial = priors.clone();
        partial.remove(&3);
        assert_eq!(
            joint_prior(&topo, 1, &partial),
            Err(FilterError::MissingNeighborPrior { agent: 1, neighbor: 3 })
        );
        assert_eq!(joint_prior(&topo, 2, &priors).unwrap(), priors[&2]);
    }

    #[test]
    fn diagonal_segment_update() {
        let prior = ConstrainedZonotope::cartesian_product(&[&interval(-1.0, 1.0), &interval(-1.0, 1.0)]).unwrap();
        let st = StackedSystem {
            a: DMatrix::identity(2, 2),
            b: DMatrix::identity(2, 2),
            h: DMatrix::from_row_slice(1, 2, &[1.0, -1.0]),
            vset: ConstrainedZonotope::singleton(DVector::zeros(1)),
            wset: ConstrainedZonotope::singleton(DVector::zeros(2)),
            index_map: vec![(0, 0..1), (1, 1..2)],
        };
        let post = joint_update(&prior, &st, &DVector::zeros(1), 0, 0).unwrap();
        let h = post.interval_hull().unwrap();
        assert_eq!(h.lo().as_slice(), &[-1.0, -1.0]);
        assert_eq!(h.hi().as_slice(), &[1.0, 1.0]);
        assert!(post.contains(&DVector::from_vec(vec![0.4, 0.4])).unwrap());
        assert!(!post.contains(&DVector::from_vec(vec![0.4, -0.4])).unwrap());
    }

    /// Block structure of the coupling for agent 2 (joint over 2,1,3,4) and
    /// agent 4 (joint over 4,2,3), where 2 sits in block 1 of agent 4's joint.
    #[test]
    fn uav_pair_block_structure() {
        let n = 2;
        let boxes = |cs: &[f64]| {
            let parts: Vec<ConstrainedZonotope> = cs
                .iter()
                .map(|&c| ConstrainedZonotope::from_box(&IntervalBox::centered(&DVector::from_element(n, c), 1.0).unwrap()).unwrap())
                .collect();
            let refs: Vec<&ConstrainedZonotope> = parts.iter().collect();
            ConstrainedZonotope::cartesian_product(&refs).unwrap()
        };
        let own = boxes(&[2.0, 1.0, 3.0, 4.0]);
        let from4 = boxes(&[2.5, 2.2, 3.0]);
        let recv = [ReceivedJoint { from: 3, joint: from4.clone(), alpha: 1 }];
        let z = update_intersection(&own, n, &recv).unwrap();

        let e14 = ProjectionMatrix::new(0, 4, n).unwrap().matrix();
        let e23 = ProjectionMatrix::new(1, 3, n).unwrap().matrix();
        let (g2, g4) = (own.generators(), from4.generators());
        assert_eq!(z.generators().columns(0, g2.ncols()), &e14 * g2);
        assert!(z.generators().columns(g2.ncols(), g4.ncols()).iter().all(|&v| v == 0.0));
        assert_eq!(z.center(), &(&e14 * own.center()));
        let rows = z.constraint_matrix().nrows();
        let coupling = z.constraint_matrix().rows(rows - n, n);
        assert_eq!(coupling.columns(0, g2.ncols()), &e14 * g2);
        assert_eq!(coupling.columns(g2.ncols(), g4.ncols()), -(&e23 * g4));
        let b = z.constraint_offset();
        assert_eq!(b.rows(b.len() - n, n), &e23 * from4.center() - &e14 * own.center());

        // own block [1,3]^2, received block [1.2,3.2]^2
        let hull = z.interval_hull().unwrap();
        for j in 0..n {
            assert!((hull.lo()[j] - 1.2).abs() < 1e-9 && (hull.hi()[j] - 3.0).abs() < 1e-9);
        }
        let faulty = update_intersection_with_fault(&own, n, &recv).unwrap();
        assert_ne!(faulty.interval_hull().unwrap(), hull);
    }

    #[test]
    fn no_mutual_neighbors_is_projection() {
        let own = ConstrainedZonotope::cartesian_product(&[&interval(0.0, 2.0), &interval(5.0, 6.0)]).unwrap();
        let z = update_intersection(&own, 1, &[]).unwrap();
        assert_eq!(hull1(&z), (0.0, 2.0));
        assert_eq!(z.num_constraints(), 0);
        assert!(update_intersection(&own, 3, &[]).is_err());
    }

    #[test]
    fn finalize_examples() {
        let bx = ConstrainedZonotope::from_box(&IntervalBox::from_slices(&[0.0, -1.0], &[2.0, 3.0]).unwrap()).unwrap();
        let f = finalize_hull(&bx, 0, 0).unwrap();
        assert_eq!(f.interval_hull().unwrap(), bx.interval_hull().unwrap());
        assert_eq!(f.num_constraints(), 0);

        // unit square cut by x1 + x2 = 1 then shifted: hull [0,1]^2
        let sliced = ConstrainedZonotope::unit(
            DMatrix::from_diagonal_element(2, 2, 0.5),
            DVector::from_vec(vec![0.5, 0.5]),
            DMatrix::from_row_slice(1, 2, &[0.5, 0.5]),
            DVector::zeros(1),
        )
        .unwrap();
        let h = finalize_hull(&sliced, 0, 0).unwrap().interval_hull().unwrap();
        assert!((h.lo()[0]).abs() < 1e-12 && (h.hi()[0] - 1.0).abs() < 1e-12);

        let empty = ConstrainedZonotope::unit(
            DMatrix::identity(1, 1),
            DVector::zeros(1),
            DMatrix::identity(1, 1),
            DVector::from_vec(vec![2.0]),
        )
        .unwrap();
        assert_eq!(
            finalize_hull(&empty, 3, 1),
            Err(FilterError::EmptyPosterior { k: 3, agent: Some(1) })
        );
    }
}
