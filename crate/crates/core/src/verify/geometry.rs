use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::Outcome;
use crate::czono::{ConstrainedZonotope, CzError, HalfWidth, IntervalBox};

const NULL_TOL: f64 = 1e-10;
const ATTAIN_TOL: f64 = 1e-6;

/// A random constrained zonotope together with a way to draw members of it
/// without solving any LP: points `xi0 + s * N t` where `N` spans the null
/// space of `A` and `s` keeps the factors inside their bounds.
#[derive(Debug, Clone)]
pub struct SampledSet {
    pub set: ConstrainedZonotope,
    xi0: DVector<f64>,
    null: DMatrix<f64>,
    radii: Vec<f64>,
}

fn uniform_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.gen_range(-1.0..=1.0))
}

fn uniform_vector(rng: &mut ChaCha8Rng, n: usize, s: f64) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.gen_range(-s..=s))
}

fn null_space(a: &DMatrix<f64>) -> DMatrix<f64> {
    let ng = a.ncols();
    if a.nrows() == 0 {
        return DMatrix::identity(ng, ng);
    }
    let eig = SymmetricEigen::new(a.transpose() * a);
    let scale = eig.eigenvalues.amax().max(1.0);
    let cols: Vec<DVector<f64>> = (0..ng)
        .filter(|&j| eig.eigenvalues[j].abs() <= NULL_TOL * scale)
        .map(|j| eig.eigenvectors.column(j).into_owned())
        .collect();
    if cols.is_empty() {
        DMatrix::zeros(ng, 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

impl SampledSet {
    /// `dim`-dimensional set with `ngen` generators and `ncon < ngen`
    /// constraints, non-empty by construction, containing `anchor` when
    /// given.
    pub fn random(
        rng: &mut ChaCha8Rng,
        dim: usize,
        ngen: usize,
        ncon: usize,
        anchor: Option<&DVector<f64>>,
    ) -> Self {
        let g = uniform_matrix(rng, dim, ngen);
        let radii: Vec<f64> = (0..ngen).map(|_| rng.gen_range(0.5..=1.5)).collect();
        let xi0 = DVector::from_fn(ngen, |j, _| rng.gen_range(-0.6..=0.6) * radii[j]);
        let a = uniform_matrix(rng, ncon, ngen);
        let b = &a * &xi0;
        let c = match anchor {
            Some(p) => p - &g * &xi0,
            None => uniform_vector(rng, dim, 2.0),
        };
        let h = radii.iter().map(|&r| HalfWidth::Finite(r)).collect();
        let set = ConstrainedZonotope::new(g, c, a.clone(), b, h).expect("consistent shapes");
        Self {
            set,
            xi0,
            null: null_space(&a),
            radii,
        }
    }

    /// A member of the set.
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> DVector<f64> {
        if self.null.ncols() == 0 {
            return self.set.point_at(&self.xi0);
        }
        let t = &self.null * uniform_vector(rng, self.null.ncols(), 1.0);
        let mut s_max = f64::INFINITY;
        for j in 0..t.len() {
            if t[j].abs() > 1e-14 {
                let room = if t[j] > 0.0 { self.radii[j] - self.xi0[j] } else { self.radii[j] + self.xi0[j] };
                s_max = s_max.min(room / t[j].abs());
            }
        }
        if !s_max.is_finite() {
            return self.set.point_at(&self.xi0);
        }
        let u = if rng.gen_bool(0.1) { 1.0 } else { rng.gen_range(0.0..1.0) };
        self.set.point_at(&(&self.xi0 + t * (u * s_max)))
    }
}

/// Uniform point of `bx` widened by a fifth of its width on each side.
pub fn around(rng: &mut ChaCha8Rng, bx: &IntervalBox) -> DVector<f64> {
    DVector::from_fn(bx.dim(), |j, _| {
        let (lo, hi) = (bx.lo()[j], bx.hi()[j]);
        let pad = 0.2 * (hi - lo) + 1e-3;
        rng.gen_range(lo - pad..=hi + pad)
    })
}

fn shape(rng: &mut ChaCha8Rng) -> (usize, usize, usize) {
    let dim = rng.gen_range(1..=3);
    let ngen = rng.gen_range(1..=5);
    let ncon = rng.gen_range(0..ngen.min(3));
    (dim, ngen, ncon)
}

fn random_set(rng: &mut ChaCha8Rng, dim: usize) -> SampledSet {
    let (_, ngen, ncon) = shape(rng);
    SampledSet::random(rng, dim, ngen, ncon, None)
}

/// Failure collector for one random instance.
pub struct Case<'a> {
    op: &'static str,
    index: usize,
    out: &'a mut Outcome,
}

impl Case<'_> {
    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        if !ok {
            self.out.failures.push(format!("{} case {}: {}", self.op, self.index, what()));
        }
    }

    fn result(&mut self, r: Result<(), CzError>) {
        if let Err(e) = r {
            self.out.failures.push(format!("{} case {}: {e}", self.op, self.index));
        }
    }
}

const PROBES: usize = 12;

fn check_membership(rng: &mut ChaCha8Rng, c: &mut Case) -> Result<(), CzError> {
    let (dim, ngen, ncon) = shape(rng);
    let z = SampledSet::random(rng, dim, ngen, ncon, None);
    for _ in 0..PROBES {
        let x = z.sample(rng);
        c.check(z.set.contains(&x)?, || format!("sampled member {x:?} rejected"));
    }
    Ok(())
}

fn check_linear_map(rng: &mut ChaCha8Rng, c: &mut Case) -> Result<(), CzError> {
    let n = rng.gen_range(1..=3);
    let m = rng.gen_range(1..=3);
    let z = random_set(rng, n);
    let mat = uniform_matrix(rng, m, n);
    let mz = z.set.linear_map(&mat)?;
    let hull = mz.interval_hull()?;
    for _ in 0..PROBES {
        let x = z.sample(rng);
        let y = &mat * &x;
        c.check(mz.contains(&y)?, || "image of a member not in the mapped set".into());
        c.check(hull.contains_point(&y, ATTAIN_TOL), || "image of a member outside mapped hull".into());
    }
    Ok(())
}

fn check_minkowski(rng: &mut ChaCha8Rng, c: &mut Case) -> Result<(), CzError> {
    let n = rng.gen_range(1..=3);
    let z = random_set(rng, n);
    let w = random_set(rng, n);
    let s = z.set.minkowski_sum(&w.set)?;
    for _ in 0..PROBES {
        let x = z.sample(rng) + w.sample(rng);
        c.check(s.contains(&x)?, || "sum of members not in the Minkowski sum".into());
    }
    Ok(())
}

fn check_cartesian(rng: &mut ChaCha8Rng, c: &mut Case) -> Result<(), CzError> {
    let (nz, nw) = (rng.gen_range(1..=2), rng.gen_range(1..=2));
    let z = random_set(rng, nz);
    let w = random_set(rng, nw);
    let p = ConstrainedZonotope::cartesian_product(&[&z.set, &w.set])?;
    let whull = w.set.interval_hull()?;
    for _ in 0..PROBES {
        let x = z.sample(rng);
        let y = if rng.gen_bool(0.5) { w.sample(rng) } else { around(rng, &whull) };
        let xy = DVector::from_iterator(x.len() + y.len(), x.iter().chain(y.iter()).copied());
        let expected = w.set.contains(&y)?;
        c.check(p.contains(&xy)? == expected, || format!("product membership differs from factor membership (expected {expected})"));
    }
    Ok(())
}

fn check_intersect(rng: &mut ChaCha8Rng, c: &mut Case) -> Result<(), CzError> {
    let n = rng.gen_range(1..=3);
    let z = random_set(rng, n);
    let shared = z.sample(rng);
    let (_, ngen, ncon) = shape(rng);
    let w = SampledSet::random(rng, n, ngen, ncon, Some(&shared));
    let both = z.set.intersect(&w.set)?;
    let hull = z.set.interval_hull()?;
    c.check(both.contains(&shared)?, || "common point missing from intersection".into());
    for t in 0..PROBES {
        let x = match t % 3 {
            0 => z.sample(rng),
            1 => w.sample(rng),
            _ => around(rng, &hull),
        };
        let expected = z.set.contains(&x)? && w.set.contains(&x)?;
        c.check(both.contains(&x)? == expected, || format!("intersection membership {x:?} expected {expected}"));
    }
    Ok(())
}

fn check_intersect_under_map(rng: &mut ChaCha8Rng, c: &mut Case) -> Result<(), CzError> {
    let n = rng.gen_range(1..=3);
    let m = rng.gen_range(1..=2);
    let z = random_set(rng, n);
    let v = random_set(rng, m);
    let hmat = uniform_matrix(rng, m, n);
    let x_true = z.sample(rng);
    let y = &hmat * &x_true + v.sample(rng);
    let s = z.set.intersect_under_map(&hmat, &y, &v.set)?;
    c.check(s.contains(&x_true)?, || "generating state not in the updated set".into());
    let hull = z.set.interval_hull()?;
    for t in 0..PROBES {
        let x = if t % 2 == 0 { z.sample(rng) } else { around(rng, &hull) };
        let expected = z.set.contains(&x)? && v.set.contains(&(&y - &hmat * &x))?;
        c.check(s.contains(&x)? == expected, || format!("measurement update membership {x:?} expected {expected}"));
    }
    Ok(())
}

fn check_project(rng: &mut ChaCha8Rng, c: &mut Case) -> Result<(), CzError> {
    let n = rng.gen_range(2..=3);
    let z = random_set(rng, n);
    let mut coords: Vec<usize> = (0..n).filter(|_| rng.gen_bool(0.6)).collect();
    if coords.is_empty() {
        coords.push(rng.gen_range(0..n));
    }
    if rng.gen_bool(0.5) {
        coords.reverse();
    }
    let p = z.set.project(&coords)?;
    let full = z.set.interval_hull()?;
    let ph = p.interval_hull()?;
    let expected = full.select(&coords);
    for j in 0..coords.len() {
        let close = (ph.lo()[j] - expected.lo()[j]).abs() <= ATTAIN_TOL && (ph.hi()[j] - expected.hi()[j]).abs() <= ATTAIN_TOL;
        c.check(close, || format!("projected hull coordinate {j} differs from the selected hull"));
    }
    for _ in 0..PROBES {
        let x = z.sample(rng);
        let sel = DVector::from_iterator(coords.len(), coords.iter().map(|&j| x[j]));
        c.check(p.contains(&sel)?, || "projection of a member not in the projected set".into());
    }
    Ok(())
}

fn check_hull(rng: &mut ChaCha8Rng, c: &mut Case) -> Result<(), CzError> {
    let (dim, ngen, ncon) = shape(rng);
    let z = SampledSet::random(rng, dim, ngen, ncon, None);
    let (hull, witnesses) = z.set.interval_hull_with_witnesses()?;
    for w in &witnesses {
        let constant = z.set.generators().row(w.coord).iter().all(|&v| v == 0.0);
        for (xi, bound) in [(&w.lo_point, hull.lo()[w.coord]), (&w.hi_point, hull.hi()[w.coord])] {
            match xi {
                Some(xi) => {
                    let p = z.set.point_at(xi);
                    c.check(z.set.generator_violation(xi) <= ATTAIN_TOL, || format!("hull witness of coordinate {} infeasible", w.coord));
                    c.check(z.set.contains(&p)?, || format!("hull witness of coordinate {} not a member", w.coord));
                    c.check((p[w.coord] - bound).abs() <= ATTAIN_TOL, || format!("hull bound of coordinate {} not attained", w.coord));
                }
                None => c.check(constant || !bound.is_finite(), || format!("finite bound of coordinate {} without witness", w.coord)),
            }
        }
    }
    for _ in 0..PROBES {
        let x = z.sample(rng);
        c.check(hull.contains_point(&x, ATTAIN_TOL), || "member outside the interval hull".into());
    }
    Ok(())
}

fn check_compact(rng: &mut ChaCha8Rng, c: &mut Case) -> Result<(), CzError> {
    let n = rng.gen_range(1..=3);
    let z = random_set(rng, n);
    let zc = z.set.compact();
    let hull = z.set.interval_hull()?;
    for t in 0..PROBES {
        let x = if t % 2 == 0 { z.sample(rng) } else { around(rng, &hull) };
        let expected = z.set.contains(&x)?;
        c.check(zc.contains(&x)? == expected, || "compaction changed membership".into());
    }
    Ok(())
}

pub type Check = fn(&mut ChaCha8Rng, &mut Case) -> Result<(), CzError>;

/// Operation name and check, in report order.
pub const OPERATIONS: [(&str, Check); 9] = [
    ("membership", check_membership),
    ("linear_map", check_linear_map),
    ("minkowski_sum", check_minkowski),
    ("cartesian_product", check_cartesian),
    ("intersect", check_intersect),
    ("intersect_under_map", check_intersect_under_map),
    ("project", check_project),
    ("interval_hull", check_hull),
    ("compact", check_compact),
];

/// `cases` random instances of one operation's sampling checks.
pub fn run_operation(op: &'static str, check: Check, cases: usize, rng: &mut ChaCha8Rng) -> Outcome {
    let mut out = Outcome::default();
    for index in 0..cases {
        out.cases += 1;
        let mut case = Case { op, index, out: &mut out };
        let r = check(rng, &mut case);
        case.result(r);
    }
    out
}
