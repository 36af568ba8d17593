use nalgebra::{DMatrix, DVector};

use super::lp::{Sense, Simplex};
use super::{CzError, IntervalBox, LpStatus};
use crate::linalg::{block_diag, concat, hstack, vstack};

/// Half-width of one generator: a finite non-negative bound or no bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HalfWidth {
    Finite(f64),
    Unbounded,
}

impl HalfWidth {
    pub fn is_unbounded(self) -> bool {
        matches!(self, HalfWidth::Unbounded)
    }

    /// Variable bounds for the LP layer.
    pub fn bounds(self) -> (f64, f64) {
        match self {
            HalfWidth::Finite(v) => (-v, v),
            HalfWidth::Unbounded => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }
}

/// Extended constrained zonotope `{ G xi + c : A xi = b, xi_j in [-h_j, h_j] }`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstrainedZonotope {
    g: DMatrix<f64>,
    c: DVector<f64>,
    a: DMatrix<f64>,
    b: DVector<f64>,
    h: Vec<HalfWidth>,
}

/// LP solutions attaining the interval hull bounds of one coordinate, in
/// generator (`xi`) space. `None` where the bound is infinite or the
/// coordinate does not depend on any generator.
#[derive(Debug, Clone)]
pub struct HullWitness {
    pub coord: usize,
    pub lo_point: Option<DVector<f64>>,
    pub hi_point: Option<DVector<f64>>,
}

impl ConstrainedZonotope {
    pub fn new(
        g: DMatrix<f64>,
        c: DVector<f64>,
        a: DMatrix<f64>,
        b: DVector<f64>,
        h: Vec<HalfWidth>,
    ) -> Result<Self, CzError> {
        let mismatch = |op, expected, got| CzError::DimensionMismatch { op, expected, got };
        if g.nrows() != c.len() {
            return Err(mismatch("rows(G) vs len(c)", c.len(), g.nrows()));
        }
        if g.ncols() != h.len() {
            return Err(mismatch("cols(G) vs len(h)", h.len(), g.ncols()));
        }
        if a.ncols() != h.len() {
            return Err(mismatch("cols(A) vs len(h)", h.len(), a.ncols()));
        }
        if a.nrows() != b.len() {
            return Err(mismatch("rows(A) vs len(b)", b.len(), a.nrows()));
        }
        for (index, hw) in h.iter().enumerate() {
            if let HalfWidth::Finite(v) = *hw {
                if !(v >= 0.0 && v.is_finite()) {
                    return Err(CzError::InvalidHalfWidth { index, value: v });
                }
            }
        }
        Ok(Self { g, c, a, b, h })
    }

    /// Classical constrained zonotope: all half-widths equal to one.
    pub fn unit(
        g: DMatrix<f64>,
        c: DVector<f64>,
        a: DMatrix<f64>,
        b: DVector<f64>,
    ) -> Result<Self, CzError> {
        let ng = g.ncols();
        Self::new(g, c, a, b, vec![HalfWidth::Finite(1.0); ng])
    }

    /// Plain zonotope, no constraints, unit half-widths.
    pub fn zonotope(g: DMatrix<f64>, c: DVector<f64>) -> Result<Self, CzError> {
        let ng = g.ncols();
        Self::unit(g, c, DMatrix::zeros(0, ng), DVector::zeros(0))
    }

    pub fn singleton(x: DVector<f64>) -> Self {
        let n = x.len();
        Self {
            g: DMatrix::zeros(n, 0),
            c: x,
            a: DMatrix::zeros(0, 0),
            b: DVector::zeros(0),
            h: Vec::new(),
        }
    }

    /// The whole space `R^n`.
    pub fn unbounded(n: usize) -> Self {
        Self {
            g: DMatrix::identity(n, n),
            c: DVector::zeros(n),
            a: DMatrix::zeros(0, n),
            b: DVector::zeros(0),
            h: vec![HalfWidth::Unbounded; n],
        }
    }

    /// Diagonal encoding of a box: one generator per coordinate.
    pub fn from_box(bx: &IntervalBox) -> Result<Self, CzError> {
        let n = bx.dim();
        let mut g = DMatrix::zeros(n, n);
        let mut c = DVector::zeros(n);
        let mut h = Vec::with_capacity(n);
        for j in 0..n {
            let (lo, hi) = (bx.lo()[j], bx.hi()[j]);
            match (lo.is_finite(), hi.is_finite()) {
                (true, true) => {
                    g[(j, j)] = (hi - lo) / 2.0;
                    c[j] = lo + (hi - lo) / 2.0;
                    h.push(HalfWidth::Finite(1.0));
                }
                (false, false) => {
                    g[(j, j)] = 1.0;
                    h.push(HalfWidth::Unbounded);
                }
                _ => return Err(CzError::OneSidedInfinite { coord: j, lo, hi }),
            }
        }
        Self::new(g, c, DMatrix::zeros(0, n), DVector::zeros(0), h)
    }

    pub fn dim(&self) -> usize {
        self.c.len()
    }

    pub fn num_generators(&self) -> usize {
        self.h.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.b.len()
    }

    pub fn generators(&self) -> &DMatrix<f64> {
        &self.g
    }

    pub fn center(&self) -> &DVector<f64> {
        &self.c
    }

    pub fn constraint_matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn constraint_offset(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn half_widths(&self) -> &[HalfWidth] {
        &self.h
    }

    /// Maximum absolute row sum of `G`.
    pub fn generator_inf_norm(&self) -> f64 {
        self.g
            .row_iter()
            .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    fn check_dim(&self, op: &'static str, got: usize) -> Result<(), CzError> {
        if got != self.dim() {
            return Err(CzError::DimensionMismatch {
                op,
                expected: self.dim(),
                got,
            });
        }
        Ok(())
    }

    fn lp_bounds(&self) -> Vec<(f64, f64)> {
        self.h.iter().map(|hw| hw.bounds()).collect()
    }

    /// Image `{ M x : x in Z }`.
    pub fn linear_map(&self, m: &DMatrix<f64>) -> Result<Self, CzError> {
        self.check_dim("linear_map", m.ncols())?;
        Ok(Self {
            g: m * &self.g,
            c: m * &self.c,
            a: self.a.clone(),
            b: self.b.clone(),
            h: self.h.clone(),
        })
    }

    pub fn minkowski_sum(&self, other: &Self) -> Result<Self, CzError> {
        self.check_dim("minkowski_sum", other.dim())?;
        Ok(Self {
            g: hstack(&[&self.g, &other.g]),
            c: &self.c + &other.c,
            a: block_diag(&[&self.a, &other.a]),
            b: concat(&[&self.b, &other.b]),
            h: [self.h.as_slice(), other.h.as_slice()].concat(),
        })
    }

    /// Cartesian product in list order.
    pub fn cartesian_product(parts: &[&Self]) -> Result<Self, CzError> {
        if parts.is_empty() {
            return Err(CzError::EmptyProduct);
        }
        if parts.len() == 1 {
            return Ok(parts[0].clone());
        }
        let gs: Vec<&DMatrix<f64>> = parts.iter().map(|p| &p.g).collect();
        let as_: Vec<&DMatrix<f64>> = parts.iter().map(|p| &p.a).collect();
        let cs: Vec<&DVector<f64>> = parts.iter().map(|p| &p.c).collect();
        let bs: Vec<&DVector<f64>> = parts.iter().map(|p| &p.b).collect();
        Ok(Self {
            g: block_diag(&gs),
            c: concat(&cs),
            a: block_diag(&as_),
            b: concat(&bs),
            h: parts.iter().flat_map(|p| p.h.iter().copied()).collect(),
        })
    }

    /// `Z1 ∩ Z2`, keeping the affine part of `self`.
    pub fn intersect(&self, other: &Self) -> Result<Self, CzError> {
        self.check_dim("intersect", other.dim())?;
        let ng1 = self.num_generators();
        let ng2 = other.num_generators();
        let zeros_g = DMatrix::zeros(self.dim(), ng2);
        let top = block_diag(&[&self.a, &other.a]);
        let coupling = hstack(&[&self.g, &(-&other.g)]);
        debug_assert_eq!(coupling.ncols(), ng1 + ng2);
        Ok(Self {
            g: hstack(&[&self.g, &zeros_g]),
            c: self.c.clone(),
            a: vstack(&[&top, &coupling]),
            b: concat(&[&self.b, &other.b, &(&other.c - &self.c)]),
            h: [self.h.as_slice(), other.h.as_slice()].concat(),
        })
    }

    /// `{ x in Z : y - H x in V }`, realized by appending the constraint
    /// `H G xi + G_V xi_V = y - H c - c_V`. No rank condition on `H`.
    pub fn intersect_under_map(
        &self,
        hmat: &DMatrix<f64>,
        y: &DVector<f64>,
        vset: &Self,
    ) -> Result<Self, CzError> {
        self.check_dim("intersect_under_map (cols(H))", hmat.ncols())?;
        if hmat.nrows() != y.len() {
            return Err(CzError::DimensionMismatch {
                op: "intersect_under_map (rows(H) vs len(y))",
                expected: hmat.nrows(),
                got: y.len(),
            });
        }
        if vset.dim() != y.len() {
            return Err(CzError::DimensionMismatch {
                op: "intersect_under_map (dim(V) vs len(y))",
                expected: y.len(),
                got: vset.dim(),
            });
        }
        let ngv = vset.num_generators();
        let zeros_g = DMatrix::zeros(self.dim(), ngv);
        let top = block_diag(&[&self.a, &vset.a]);
        let coupling = hstack(&[&(hmat * &self.g), &vset.g]);
        let rhs = y - hmat * &self.c - &vset.c;
        Ok(Self {
            g: hstack(&[&self.g, &zeros_g]),
            c: self.c.clone(),
            a: vstack(&[&top, &coupling]),
            b: concat(&[&self.b, &vset.b, &rhs]),
            h: [self.h.as_slice(), vset.h.as_slice()].concat(),
        })
    }

    /// Coordinate projection onto `coords` (in the given order).
    pub fn project(&self, coords: &[usize]) -> Result<Self, CzError> {
        let n = self.dim();
        let mut seen = vec![false; n];
        for &j in coords {
            if j >= n {
                return Err(CzError::IndexOutOfRange { index: j, dim: n });
            }
            if seen[j] {
                return Err(CzError::DuplicateIndex(j));
            }
            seen[j] = true;
        }
        Ok(Self {
            g: self.g.select_rows(coords),
            c: self.c.select_rows(coords),
            a: self.a.clone(),
            b: self.b.clone(),
            h: self.h.clone(),
        })
    }

    /// Drop zero-width generators. The represented set is unchanged.
    pub fn compact(&self) -> Self {
        let keep: Vec<usize> = (0..self.num_generators())
            .filter(|&j| self.h[j] != HalfWidth::Finite(0.0))
            .collect();
        Self {
            g: self.g.select_columns(&keep),
            c: self.c.clone(),
            a: self.a.select_columns(&keep),
            b: self.b.clone(),
            h: keep.iter().map(|&j| self.h[j]).collect(),
        }
    }

    /// Point of the set for a generator vector `xi` (no feasibility check).
    pub fn point_at(&self, xi: &DVector<f64>) -> DVector<f64> {
        &self.g * xi + &self.c
    }

    /// Largest violation of `A xi = b` and of the half-width bounds.
    pub fn generator_violation(&self, xi: &DVector<f64>) -> f64 {
        let eq = if self.num_constraints() > 0 {
            (&self.a * xi - &self.b).amax()
        } else {
            0.0
        };
        let bx = self.h.iter().zip(xi.iter()).fold(0.0f64, |m, (hw, &x)| match hw {
            HalfWidth::Finite(v) => m.max(x.abs() - v),
            HalfWidth::Unbounded => m,
        });
        eq.max(bx)
    }

    pub fn is_empty(&self) -> Result<bool, CzError> {
        if self.num_constraints() == 0 {
            return Ok(false);
        }
        let simplex = Simplex::new(&self.a, &self.b, &self.lp_bounds())?;
        Ok(!simplex.is_feasible())
    }

    /// Membership by LP feasibility of `[G; A] xi = [x - c; b]`.
    pub fn contains(&self, x: &DVector<f64>) -> Result<bool, CzError> {
        self.contains_impl(x, None)
    }

    /// [`Self::contains`] with the LP started from generator values `start`
    /// (any length; missing entries are zero).
    pub fn contains_from(&self, x: &DVector<f64>, start: &[f64]) -> Result<bool, CzError> {
        self.contains_impl(x, Some(start))
    }

    fn contains_impl(&self, x: &DVector<f64>, start: Option<&[f64]>) -> Result<bool, CzError> {
        self.check_dim("contains", x.len())?;
        let eq = vstack(&[&self.g, &self.a]);
        let rhs = concat(&[&(x - &self.c), &self.b]);
        let simplex = match start {
            Some(s) => Simplex::with_start(&eq, &rhs, &self.lp_bounds(), &self.fit_start(s))?,
            None => Simplex::new(&eq, &rhs, &self.lp_bounds())?,
        };
        Ok(simplex.is_feasible())
    }

    fn fit_start(&self, start: &[f64]) -> Vec<f64> {
        let mut v = start.to_vec();
        v.resize(self.num_generators(), 0.0);
        v
    }

    pub fn interval_hull(&self) -> Result<IntervalBox, CzError> {
        self.hull_impl(false, None).map(|(b, _, _)| b)
    }

    /// Interval hull together with the LP solutions attaining each bound.
    pub fn interval_hull_with_witnesses(&self) -> Result<(IntervalBox, Vec<HullWitness>), CzError> {
        self.hull_impl(true, None).map(|(b, w, _)| (b, w))
    }

    /// Interval hull with the LPs started from generator values `start`
    /// (any length; missing entries are zero). Also returns a feasible
    /// generator vector, a good start for a related set.
    pub fn interval_hull_from(&self, start: &[f64]) -> Result<(IntervalBox, Vec<f64>), CzError> {
        self.hull_impl(false, Some(start)).map(|(b, _, p)| (b, p))
    }

    fn hull_impl(
        &self,
        witnesses: bool,
        start: Option<&[f64]>,
    ) -> Result<(IntervalBox, Vec<HullWitness>, Vec<f64>), CzError> {
        let n = self.dim();
        let mut lo = DVector::zeros(n);
        let mut hi = DVector::zeros(n);
        let mut wit = Vec::new();

        if self.num_constraints() == 0 {
            for j in 0..n {
                let mut radius = 0.0;
                let mut arg = DVector::zeros(self.num_generators());
                for (k, hw) in self.h.iter().enumerate() {
                    let gjk = self.g[(j, k)];
                    if gjk == 0.0 {
                        continue;
                    }
                    match hw {
                        HalfWidth::Finite(v) => {
                            radius += gjk.abs() * v;
                            arg[k] = gjk.signum() * v;
                        }
                        HalfWidth::Unbounded => radius = f64::INFINITY,
                    }
                }
                lo[j] = self.c[j] - radius;
                hi[j] = self.c[j] + radius;
                if witnesses {
                    let finite = radius.is_finite();
                    wit.push(HullWitness {
                        coord: j,
                        lo_point: finite.then(|| -arg.clone()),
                        hi_point: finite.then_some(arg),
                    });
                }
            }
            let feasible: Vec<f64> = self.fit_start(start.unwrap_or(&[]))
                .iter()
                .zip(&self.h)
                .map(|(&v, hw)| {
                    let (l, u) = hw.bounds();
                    v.clamp(l, u)
                })
                .collect();
            return Ok((IntervalBox::new(lo, hi)?, wit, feasible));
        }

        let mut simplex = match start {
            Some(s) => Simplex::with_start(&self.a, &self.b, &self.lp_bounds(), &self.fit_start(s))?,
            None => Simplex::new(&self.a, &self.b, &self.lp_bounds())?,
        };
        if !simplex.is_feasible() {
            return Err(CzError::EmptySet);
        }
        for j in 0..n {
            let row: Vec<f64> = self.g.row(j).iter().copied().collect();
            let mut w = HullWitness {
                coord: j,
                lo_point: None,
                hi_point: None,
            };
            if row.iter().all(|&v| v == 0.0) {
                lo[j] = self.c[j];
                hi[j] = self.c[j];
                if witnesses {
                    wit.push(w);
                }
                continue;
            }
            for sense in [Sense::Minimize, Sense::Maximize] {
                let (bound, point) = match simplex.optimize(&row, sense) {
                    LpStatus::Optimal { value, point } => (value + self.c[j], Some(point)),
                    LpStatus::Unbounded => match sense {
                        Sense::Minimize => (f64::NEG_INFINITY, None),
                        Sense::Maximize => (f64::INFINITY, None),
                    },
                    LpStatus::Infeasible => return Err(CzError::EmptySet),
                };
                let point = point.map(DVector::from_vec);
                match sense {
                    Sense::Minimize => {
                        lo[j] = bound;
                        w.lo_point = point;
                    }
                    Sense::Maximize => {
                        hi[j] = bound;
                        w.hi_point = point;
                    }
                }
            }
            // LP round-off must not produce an inverted interval.
            if lo[j] > hi[j] {
                let mid = 0.5 * (lo[j] + hi[j]);
                lo[j] = mid;
                hi[j] = mid;
            }
            if witnesses {
                wit.push(w);
            }
        }
        Ok((IntervalBox::new(lo, hi)?, wit, simplex.point()))
    }

    /// Infinity-norm diameter: the widest coordinate of the interval hull.
    pub fn diameter_inf(&self) -> Result<f64, CzError> {
        Ok(self.interval_hull()?.max_width())
    }
}
