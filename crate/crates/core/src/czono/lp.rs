//! Dense bounded-variable two-phase simplex.
//!
//! Solves `min/max c'x  s.t.  Ax = b,  lo <= x <= hi` where bounds may be
//! infinite. Nonbasic variables sit at a bound, or at any interior value when
//! the variable is free (or has not been moved yet). Entering variables are
//! chosen by the largest reduced cost (lowest index on ties); after a long run
//! of degenerate pivots pricing switches to Bland's rule until the objective
//! moves again, which rules out cycling. The pivot sequence is a pure function
//! of the input.
//!
//! A [`Simplex`] keeps its basis between calls to [`Simplex::optimize`], so a
//! family of objectives over one feasible region (interval hulls need `2n` of
//! them) pays for phase one only once.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Feasibility / equality tolerance.
pub const LP_TOL: f64 = 1e-9;

const PIVOT_TOL: f64 = 1e-10;
const DROP_TOL: f64 = 1e-14;
/// Consecutive degenerate pivots after which pricing falls back to Bland's
/// rule until progress resumes.
const DEGENERATE_LIMIT: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpStatus {
    Optimal { value: f64, point: Vec<f64> },
    Infeasible,
    Unbounded,
}

impl LpStatus {
    pub fn is_optimal(&self) -> bool {
        matches!(self, LpStatus::Optimal { .. })
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("constraint matrix is {rows}x{cols} but rhs has {rhs} entries and there are {bounds} bounds")]
    Shape {
        rows: usize,
        cols: usize,
        rhs: usize,
        bounds: usize,
    },
    #[error("objective has {got} entries, expected {expected}")]
    Objective { got: usize, expected: usize },
    #[error("variable {var} has invalid bounds [{lo}, {hi}]")]
    Bounds { var: usize, lo: f64, hi: f64 },
    #[error("non-finite coefficient in constraint data")]
    NonFinite,
}

/// Solve a single LP from scratch.
pub fn lp_solve(
    objective: &[f64],
    eq_matrix: &DMatrix<f64>,
    eq_rhs: &DVector<f64>,
    bounds: &[(f64, f64)],
    sense: Sense,
) -> Result<LpStatus, LpError> {
    let mut simplex = Simplex::new(eq_matrix, eq_rhs, bounds)?;
    if objective.len() != simplex.num_vars() {
        return Err(LpError::Objective {
            got: objective.len(),
            expected: simplex.num_vars(),
        });
    }
    if !simplex.is_feasible() {
        return Ok(LpStatus::Infeasible);
    }
    Ok(simplex.optimize(objective, sense))
}

#[derive(Debug, Clone)]
pub struct Simplex {
    n_struct: usize,
    rows: usize,
    cols: usize,
    /// Row-major `rows x cols` tableau, i.e. `B^-1 A`.
    tab: Vec<f64>,
    basic_val: Vec<f64>,
    basis: Vec<usize>,
    /// Row of the basis a variable occupies, if basic.
    row_of: Vec<Option<usize>>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    /// Current value of every nonbasic variable.
    val: Vec<f64>,
    feasible: bool,
    pivots: usize,
}

impl Simplex {
    /// Build the tableau and run phase one.
    pub fn new(
        a: &DMatrix<f64>,
        b: &DVector<f64>,
        bounds: &[(f64, f64)],
    ) -> Result<Self, LpError> {
        Self::build(a, b, bounds, None)
    }

    /// Like [`Simplex::new`], with nonbasic variables starting at `start`
    /// (clamped to their bounds). A start close to a feasible point leaves
    /// phase one little to do.
    pub fn with_start(
        a: &DMatrix<f64>,
        b: &DVector<f64>,
        bounds: &[(f64, f64)],
        start: &[f64],
    ) -> Result<Self, LpError> {
        if start.len() != bounds.len() {
            return Err(LpError::Objective {
                got: start.len(),
                expected: bounds.len(),
            });
        }
        Self::build(a, b, bounds, Some(start))
    }

    fn build(
        a: &DMatrix<f64>,
        b: &DVector<f64>,
        bounds: &[(f64, f64)],
        start: Option<&[f64]>,
    ) -> Result<Self, LpError> {
        let (m, n) = a.shape();
        if b.len() != m || bounds.len() != n {
            return Err(LpError::Shape {
                rows: m,
                cols: n,
                rhs: b.len(),
                bounds: bounds.len(),
            });
        }
        if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(LpError::NonFinite);
        }
        for (var, &(lo, hi)) in bounds.iter().enumerate() {
            if lo.is_nan() || hi.is_nan() || lo > hi || lo == f64::INFINITY || hi == f64::NEG_INFINITY
            {
                return Err(LpError::Bounds { var, lo, hi });
            }
        }

        let mut lo: Vec<f64> = bounds.iter().map(|b| b.0).collect();
        let mut hi: Vec<f64> = bounds.iter().map(|b| b.1).collect();
        let mut val: Vec<f64> = bounds
            .iter()
            .enumerate()
            .map(|(j, &(l, h))| {
                let x = start.map_or(0.0, |s| s[j]);
                if x.is_finite() {
                    x.clamp(l, h)
                } else if l.is_finite() {
                    l
                } else {
                    h
                }
            })
            .collect();

        // Columns that appear in exactly one row can start in the basis.
        let mut owner: Vec<Option<usize>> = vec![None; n];
        let mut count = vec![0usize; n];
        for j in 0..n {
            for r in 0..m {
                if a[(r, j)] != 0.0 {
                    count[j] += 1;
                    owner[j] = Some(r);
                }
            }
        }

        let mut basis_choice: Vec<Option<usize>> = vec![None; m];
        let mut residual: Vec<f64> = (0..m)
            .map(|r| {
                let mut s = b[r];
                for j in 0..n {
                    let v = a[(r, j)];
                    if v != 0.0 {
                        s -= v * val[j];
                    }
                }
                s
            })
            .collect();
        for j in 0..n {
            if count[j] != 1 || lo[j] == hi[j] {
                continue;
            }
            let r = owner[j].unwrap();
            if basis_choice[r].is_some() || a[(r, j)].abs() < PIVOT_TOL {
                continue;
            }
            let coef = a[(r, j)];
            let target = val[j] + residual[r] / coef;
            let clamped = target.clamp(lo[j], hi[j]);
            if (target - clamped).abs() <= LP_TOL {
                basis_choice[r] = Some(j);
                residual[r] = 0.0;
                val[j] = clamped;
            } else {
                residual[r] -= coef * (clamped - val[j]);
                val[j] = clamped;
            }
        }

        let art_rows: Vec<usize> = (0..m).filter(|&r| basis_choice[r].is_none()).collect();
        let cols = n + art_rows.len();
        let mut tab = vec![0.0; m * cols];
        for r in 0..m {
            for j in 0..n {
                tab[r * cols + j] = a[(r, j)];
            }
        }
        let mut basis = vec![0usize; m];
        let mut basic_val = vec![0.0; m];
        let mut row_of = vec![None; cols];
        lo.resize(cols, 0.0);
        hi.resize(cols, f64::INFINITY);
        val.resize(cols, 0.0);
        for (k, &r) in art_rows.iter().enumerate() {
            let col = n + k;
            let sign = if residual[r] < 0.0 { -1.0 } else { 1.0 };
            tab[r * cols + col] = sign;
            basis_choice[r] = Some(col);
        }
        for r in 0..m {
            let j = basis_choice[r].unwrap();
            let piv = tab[r * cols + j];
            for v in &mut tab[r * cols..(r + 1) * cols] {
                *v /= piv;
            }
            basis[r] = j;
            row_of[j] = Some(r);
            basic_val[r] = if j >= n { residual[r].abs() } else { val[j] };
        }

        let mut s = Simplex {
            n_struct: n,
            rows: m,
            cols,
            tab,
            basic_val,
            basis,
            row_of,
            lo,
            hi,
            val,
            feasible: false,
            pivots: 0,
        };
        s.phase_one(&art_rows, b);
        Ok(s)
    }

    pub fn num_vars(&self) -> usize {
        self.n_struct
    }

    pub fn is_feasible(&self) -> bool {
        self.feasible
    }

    /// Total pivots performed so far (both phases).
    pub fn pivot_count(&self) -> usize {
        self.pivots
    }

    /// Current structural point.
    pub fn point(&self) -> Vec<f64> {
        (0..self.n_struct).map(|j| self.value_of(j)).collect()
    }

    fn value_of(&self, j: usize) -> f64 {
        match self.row_of[j] {
            Some(r) => self.basic_val[r],
            None => self.val[j],
        }
    }

    fn phase_one(&mut self, art_rows: &[usize], b: &DVector<f64>) {
        let n = self.n_struct;
        if !art_rows.is_empty() {
            let mut cost = vec![0.0; self.cols];
            for c in cost.iter_mut().skip(n) {
                *c = 1.0;
            }
            if self.iterate(&cost) == IterOutcome::Unbounded {
                // Cannot happen: the phase-one objective is bounded below by 0.
                self.feasible = false;
                return;
            }
            let infeas: f64 = (n..self.cols).map(|j| self.value_of(j)).sum();
            let scale = 1.0 + b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if infeas > LP_TOL * scale {
                self.feasible = false;
                return;
            }
        }
        self.feasible = true;
        self.expel_artificials();
    }

    /// Pivot zero-valued artificials out of the basis, drop rows that turn
    /// out to be linearly dependent, then drop the artificial columns.
    fn expel_artificials(&mut self) {
        let n = self.n_struct;
        if self.cols == n {
            return;
        }
        let mut redundant = Vec::new();
        for r in 0..self.rows {
            if self.basis[r] < n {
                continue;
            }
            let row = &self.tab[r * self.cols..r * self.cols + n];
            let mut best: Option<(usize, f64)> = None;
            for (j, &v) in row.iter().enumerate() {
                if self.row_of[j].is_none() && v.abs() > PIVOT_TOL {
                    if best.map_or(true, |(_, bv)| v.abs() > bv) {
                        best = Some((j, v.abs()));
                    }
                }
            }
            match best {
                Some((q, _)) => {
                    let leaving = self.basis[r];
                    let entering_val = self.val[q];
                    self.pivot(r, q, None);
                    self.basic_val[r] = entering_val;
                    self.row_of[leaving] = None;
                    self.val[leaving] = 0.0;
                }
                None => redundant.push(r),
            }
        }
        let keep_rows: Vec<usize> = (0..self.rows).filter(|r| !redundant.contains(r)).collect();
        let mut tab = Vec::with_capacity(keep_rows.len() * n);
        let mut basis = Vec::with_capacity(keep_rows.len());
        let mut basic_val = Vec::with_capacity(keep_rows.len());
        for &r in &keep_rows {
            tab.extend_from_slice(&self.tab[r * self.cols..r * self.cols + n]);
            basis.push(self.basis[r]);
            basic_val.push(self.basic_val[r]);
        }
        self.rows = keep_rows.len();
        self.cols = n;
        self.tab = tab;
        self.basis = basis;
        self.basic_val = basic_val;
        self.lo.truncate(n);
        self.hi.truncate(n);
        self.val.truncate(n);
        self.row_of = vec![None; n];
        for (r, &j) in self.basis.iter().enumerate() {
            self.row_of[j] = Some(r);
        }
    }

    /// Optimize a linear objective over the (feasible) region, warm-starting
    /// from the current basis.
    pub fn optimize(&mut self, objective: &[f64], sense: Sense) -> LpStatus {
        assert_eq!(objective.len(), self.n_struct, "objective length");
        if !self.feasible {
            return LpStatus::Infeasible;
        }
        let cost: Vec<f64> = match sense {
            Sense::Minimize => objective.to_vec(),
            Sense::Maximize => objective.iter().map(|v| -v).collect(),
        };
        if self.iterate(&cost) == IterOutcome::Unbounded {
            return LpStatus::Unbounded;
        }
        let point = self.point();
        let value = objective.iter().zip(&point).map(|(c, x)| c * x).sum();
        LpStatus::Optimal { value, point }
    }

    fn iterate(&mut self, cost: &[f64]) -> IterOutcome {
        let cols = self.cols;
        // Reduced costs d_j = c_j - c_B' T_j.
        let mut d = cost.to_vec();
        for r in 0..self.rows {
            let cb = cost[self.basis[r]];
            if cb != 0.0 {
                let row = &self.tab[r * cols..(r + 1) * cols];
                for (dj, &t) in d.iter_mut().zip(row) {
                    *dj -= cb * t;
                }
            }
        }
        let mut degenerate_run = 0usize;
        loop {
            let bland = degenerate_run >= DEGENERATE_LIMIT;
            let mut entering: Option<(usize, f64)> = None;
            let mut best = 0.0;
            for j in 0..cols {
                if self.row_of[j].is_some() || self.lo[j] == self.hi[j] {
                    continue;
                }
                let dj = d[j];
                let dir = if dj < -LP_TOL && self.val[j] < self.hi[j] {
                    1.0
                } else if dj > LP_TOL && self.val[j] > self.lo[j] {
                    -1.0
                } else {
                    continue;
                };
                if bland {
                    entering = Some((j, dir));
                    break;
                }
                if dj.abs() > best {
                    best = dj.abs();
                    entering = Some((j, dir));
                }
            }
            let Some((q, dir)) = entering else {
                return IterOutcome::Optimal;
            };

            // Ratio test.
            let own = if dir > 0.0 {
                self.hi[q] - self.val[q]
            } else {
                self.val[q] - self.lo[q]
            };
            let mut step = own;
            let mut leave: Option<(usize, f64)> = None; // (row, bound value)
            for r in 0..self.rows {
                let alpha = self.tab[r * cols + q];
                if alpha.abs() < PIVOT_TOL {
                    continue;
                }
                let rate = -dir * alpha;
                let j = self.basis[r];
                let x = self.basic_val[r];
                let (ratio, bound) = if rate < 0.0 {
                    if self.lo[j] == f64::NEG_INFINITY {
                        continue;
                    }
                    (((x - self.lo[j]).max(0.0)) / -rate, self.lo[j])
                } else {
                    if self.hi[j] == f64::INFINITY {
                        continue;
                    }
                    (((self.hi[j] - x).max(0.0)) / rate, self.hi[j])
                };
                // Ties go to the lowest variable index; a bound flip of the
                // entering variable wins ties against pivots.
                let better = ratio < step
                    || (ratio == step && leave.is_some_and(|(lr, _)| j < self.basis[lr]));
                if better {
                    step = ratio;
                    leave = Some((r, bound));
                }
            }
            if step == f64::INFINITY {
                return IterOutcome::Unbounded;
            }
            if step > 0.0 {
                degenerate_run = 0;
            } else {
                degenerate_run += 1;
            }

            for r in 0..self.rows {
                let alpha = self.tab[r * cols + q];
                if alpha != 0.0 {
                    self.basic_val[r] -= dir * alpha * step;
                }
            }
            let new_val = self.val[q] + dir * step;
            match leave {
                None => {
                    self.val[q] = if dir > 0.0 { self.hi[q] } else { self.lo[q] };
                }
                Some((r, bound)) => {
                    let leaving = self.basis[r];
                    self.pivot(r, q, Some(&mut d));
                    self.row_of[leaving] = None;
                    self.val[leaving] = bound;
                    self.basic_val[r] = new_val;
                }
            }
        }
    }

    /// Make `q` basic in row `p`. Basic values are the caller's job.
    fn pivot(&mut self, p: usize, q: usize, d: Option<&mut Vec<f64>>) {
        let cols = self.cols;
        let piv = self.tab[p * cols + q];
        let mut nz = Vec::new();
        {
            let prow = &mut self.tab[p * cols..(p + 1) * cols];
            for (j, v) in prow.iter_mut().enumerate() {
                if *v != 0.0 {
                    *v /= piv;
                    if v.abs() < DROP_TOL {
                        *v = 0.0;
                    } else {
                        nz.push(j);
                    }
                }
            }
            prow[q] = 1.0;
        }
        let (before, rest) = self.tab.split_at_mut(p * cols);
        let (prow, after) = rest.split_at_mut(cols);
        // Dense pivot rows are eliminated over their contiguous span, which
        // vectorizes; sparse ones by index.
        let dense = nz.len() * 4 > cols;
        let span = match (nz.first(), nz.last()) {
            (Some(&a), Some(&b)) => a..b + 1,
            _ => 0..0,
        };
        for row in before.chunks_exact_mut(cols).chain(after.chunks_exact_mut(cols)) {
            let f = row[q];
            if f == 0.0 {
                continue;
            }
            if dense {
                for (v, &pv) in row[span.clone()].iter_mut().zip(&prow[span.clone()]) {
                    *v -= f * pv;
                }
            } else {
                for &j in &nz {
                    let v = row[j] - f * prow[j];
                    row[j] = if v.abs() < DROP_TOL { 0.0 } else { v };
                }
            }
            row[q] = 0.0;
        }
        if let Some(d) = d {
            let f = d[q];
            if f != 0.0 {
                for &j in &nz {
                    d[j] -= f * prow[j];
                }
                d[q] = 0.0;
            }
        }
        self.basis[p] = q;
        self.row_of[q] = Some(p);
        self.pivots += 1;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum IterOutcome {
    Optimal,
    Unbounded,
}

#[cfg(test)]
mod tests {
    use super::*;

    const INF: f64 = f64::INFINITY;

    fn empty_eq(n: usize) -> (DMatrix<f64>, DVector<f64>) {
        (DMatrix::zeros(0, n), DVector::zeros(0))
    }

    #[test]
    fn minimize_over_box() {
        let (a, b) = empty_eq(2);
        let st = lp_solve(&[1.0, 0.0], &a, &b, &[(-1.0, 1.0); 2], Sense::Minimize).unwrap();
        match st {
            LpStatus::Optimal { value, point } => {
                assert_eq!(value, -1.0);
                assert_eq!(point[0], -1.0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn equality_outside_box_is_infeasible() {
        let a = DMatrix::from_row_slice(1, 1, &[1.0]);
        let b = DVector::from_vec(vec![5.0]);
        let st = lp_solve(&[1.0], &a, &b, &[(-1.0, 1.0)], Sense::Minimize).unwrap();
        assert_eq!(st, LpStatus::Infeasible);
    }

    #[test]
    fn free_variable_unbounded() {
        let (a, b) = empty_eq(1);
        let st = lp_solve(&[-1.0], &a, &b, &[(-INF, INF)], Sense::Minimize).unwrap();
        assert_eq!(st, LpStatus::Unbounded);
    }

    #[test]
    fn boundary_point_feasible() {
        let a = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let b = DVector::from_vec(vec![2.0]);
        let s = Simplex::new(&a, &b, &[(-1.0, 1.0); 2]).unwrap();
        assert!(s.is_feasible());
        let p = s.point();
        assert!((p[0] + p[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn redundant_rows_are_tolerated() {
        let a = DMatrix::from_row_slice(3, 3, &[1.0, 1.0, 0.0, 2.0, 2.0, 0.0, 0.0, 1.0, 1.0]);
        let b = DVector::from_vec(vec![1.0, 2.0, 0.5]);
        let st = lp_solve(&[1.0, 0.0, 0.0], &a, &b, &[(-1.0, 1.0); 3], Sense::Maximize).unwrap();
        match st {
            // x0 = 1 - x1, x1 >= max(0, -0.5) ... x1 in [0, 1] since x0 <= 1 and x2 = 0.5 - x1 in [-1,1]
            LpStatus::Optimal { value, .. } => assert!((value - 1.0).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn mixed_free_and_bounded() {
        // x = y + z, y free, z in [-1,1], y in [2,3] via a second equality y = w, w in [2,3]
        let a = DMatrix::from_row_slice(2, 4, &[1.0, -1.0, -1.0, 0.0, 0.0, 1.0, 0.0, -1.0]);
        let b = DVector::from_vec(vec![0.0, 0.0]);
        let bounds = [(-INF, INF), (-INF, INF), (-1.0, 1.0), (2.0, 3.0)];
        let mut s = Simplex::new(&a, &b, &bounds).unwrap();
        assert!(s.is_feasible());
        let lo = s.optimize(&[1.0, 0.0, 0.0, 0.0], Sense::Minimize);
        let hi = s.optimize(&[1.0, 0.0, 0.0, 0.0], Sense::Maximize);
        match (lo, hi) {
            (LpStatus::Optimal { value: l, .. }, LpStatus::Optimal { value: h, .. }) => {
                assert!((l - 1.0).abs() < 1e-12);
                assert!((h - 4.0).abs() < 1e-12);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn deterministic_output() {
        let a = DMatrix::from_row_slice(2, 4, &[1.0, 2.0, -1.0, 0.5, 0.0, 1.0, 1.0, -1.0]);
        let b = DVector::from_vec(vec![0.3, -0.2]);
        let bounds = [(-1.0, 1.0); 4];
        let c = [0.1, -0.7, 0.3, 1.1];
        let s1 = lp_solve(&c, &a, &b, &bounds, Sense::Maximize).unwrap();
        let s2 = lp_solve(&c, &a, &b, &bounds, Sense::Maximize).unwrap();
        assert_eq!(format!("{s1:?}"), format!("{s2:?}"));
    }

    #[test]
    fn rejects_malformed_input() {
        let a = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let b = DVector::from_vec(vec![1.0]);
        assert!(matches!(
            Simplex::new(&a, &b, &[(-1.0, 1.0)]),
            Err(LpError::Shape { .. })
        ));
        assert!(matches!(
            Simplex::new(&a, &b, &[(1.0, -1.0), (0.0, 1.0)]),
            Err(LpError::Bounds { var: 0, .. })
        ));
    }
}
