use std::collections::BTreeSet;

use super::ModelError;

/// Directed, time-invariant measurement/communication graph. An edge `j -> i`
/// means `j` is an in-neighbor of `i`: agent `i` measures its state relative
/// to `j` and receives messages from `j`.
///
/// Agents are indexed `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    n: usize,
    in_nbrs: Vec<Vec<usize>>,
    out_nbrs: Vec<Vec<usize>>,
}

impl Topology {
    /// `edges` holds `(from, to)` pairs, i.e. `from` is an in-neighbor of `to`.
    pub fn new(n: usize, edges: &[(usize, usize)]) -> Result<Self, ModelError> {
        let mut in_sets = vec![BTreeSet::new(); n];
        let mut out_sets = vec![BTreeSet::new(); n];
        for &(from, to) in edges {
            if from >= n || to >= n {
                return Err(ModelError::UnknownAgent(from.max(to)));
            }
            if from == to {
                return Err(ModelError::SelfLoop(from));
            }
            if !in_sets[to].insert(from) {
                return Err(ModelError::DuplicateEdge { from, to });
            }
            out_sets[from].insert(to);
        }
        Ok(Self {
            n,
            in_nbrs: in_sets.into_iter().map(|s| s.into_iter().collect()).collect(),
            out_nbrs: out_sets.into_iter().map(|s| s.into_iter().collect()).collect(),
        })
    }

    pub fn num_agents(&self) -> usize {
        self.n
    }

    /// `N_i`, ascending.
    pub fn in_neighbors(&self, i: usize) -> &[usize] {
        &self.in_nbrs[i]
    }

    /// `M_i = { l : i in N_l }`, ascending.
    pub fn out_neighbors(&self, i: usize) -> &[usize] {
        &self.out_nbrs[i]
    }

    /// `{i} ∪ N_i` with `i` first, then ascending.
    pub fn closed_neighborhood(&self, i: usize) -> Vec<usize> {
        std::iter::once(i).chain(self.in_nbrs[i].iter().copied()).collect()
    }

    /// `q_i = |{i} ∪ N_i|`.
    pub fn q(&self, i: usize) -> usize {
        1 + self.in_nbrs[i].len()
    }

    /// Agents in both `M_i` and `N_i`: the ones whose joint posteriors agent
    /// `i` intersects with its own.
    pub fn mutual_neighbors(&self, i: usize) -> Vec<usize> {
        self.out_nbrs[i]
            .iter()
            .copied()
            .filter(|l| self.in_nbrs[i].binary_search(l).is_ok())
            .collect()
    }

    /// Block position (0-based) of agent `i` inside `l`'s closed neighborhood.
    pub fn position_in_neighborhood(&self, l: usize, i: usize) -> Option<usize> {
        if l == i {
            return Some(0);
        }
        self.in_nbrs[l].binary_search(&i).ok().map(|p| p + 1)
    }

    /// All edges `(from, to)` ordered by `to`, then `from`.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        (0..self.n)
            .flat_map(|i| self.in_nbrs[i].iter().map(move |&j| (j, i)))
            .collect()
    }

    /// The same graph with agent `a` renamed to `perm[a]`.
    pub fn relabeled(&self, perm: &[usize]) -> Result<Self, ModelError> {
        let edges: Vec<_> = self.edges().iter().map(|&(f, t)| (perm[f], perm[t])).collect();
        Self::new(self.n, &edges)
    }
}
