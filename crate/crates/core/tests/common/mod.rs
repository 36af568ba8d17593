//! Reference computations that share no code with the library.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};

/// Minimum of `c'x` over `{Ax = b, lo <= x <= hi}` (finite bounds) by
/// enumerating basic solutions: every choice of `rank` basic columns and
/// every bound pattern of the rest. `None` when infeasible.
pub fn vertex_lp_min(c: &[f64], a: &DMatrix<f64>, b: &DVector<f64>, bounds: &[(f64, f64)]) -> Option<f64> {
    let n = c.len();
    let m = a.nrows();
    let rank = if m == 0 { 0 } else { a.clone().svd(false, false).rank(1e-9) };
    let mut best: Option<f64> = None;
    let mut consider = |x: &DVector<f64>| {
        let feasible = (a * x - b).amax() <= 1e-7
            && x.iter().zip(bounds).all(|(&v, &(lo, hi))| v >= lo - 1e-7 && v <= hi + 1e-7);
        if feasible {
            let val: f64 = x.iter().zip(c).map(|(v, ci)| v * ci).sum();
            best = Some(best.map_or(val, |b: f64| b.min(val)));
        }
    };
    for basis in combinations(n, rank) {
        let free: Vec<usize> = (0..n).filter(|j| !basis.contains(j)).collect();
        for pattern in 0..(1usize << free.len()) {
            let mut x = DVector::zeros(n);
            for (t, &j) in free.iter().enumerate() {
                x[j] = if pattern >> t & 1 == 1 { bounds[j].1 } else { bounds[j].0 };
            }
            if basis.is_empty() {
                consider(&x);
                continue;
            }
            let rhs = b - a * &x;
            let ab = DMatrix::from_fn(m, basis.len(), |r, k| a[(r, basis[k])]);
            // Least squares on the basic columns; rejected by the residual
            // check when the system is inconsistent.
            let Some(sol) = ab.clone().svd(true, true).solve(&rhs, 1e-12).ok() else { continue };
            for (k, &j) in basis.iter().enumerate() {
                x[j] = sol[k];
            }
            consider(&x);
        }
    }
    best
}

pub fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for j in start..n {
            cur.push(j);
            rec(j + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// Parameters of the two-agent scalar random walk used by the oracles.
#[derive(Debug, Clone, Copy)]
pub struct PairModel {
    pub w: f64,
    pub v: f64,
    pub r: f64,
    pub x0: f64,
}

pub const PAIR: PairModel = PairModel {
    w: 0.25,
    v: 1.0,
    r: 0.5,
    x0: 2.0,
};

/// Measurements of one step: `y1, y2, z12, z21` with `z_ij = x_i - x_j + r`.
#[derive(Debug, Clone, Copy)]
pub struct PairData {
    pub y: [f64; 2],
    pub z12: f64,
    pub z21: f64,
}

pub type Polygon = Vec<[f64; 2]>;

/// Keep the part of `poly` with `a . x <= b`.
fn clip(poly: &Polygon, a: [f64; 2], b: f64) -> Polygon {
    let f = |p: &[f64; 2]| a[0] * p[0] + a[1] * p[1] - b;
    let mut out = Vec::new();
    for i in 0..poly.len() {
        let (p, q) = (poly[i], poly[(i + 1) % poly.len()]);
        let (fp, fq) = (f(&p), f(&q));
        if fp <= 0.0 {
            out.push(p);
        }
        if (fp < 0.0 && fq > 0.0) || (fp > 0.0 && fq < 0.0) {
            let t = fp / (fp - fq);
            out.push([p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]);
        }
    }
    out
}

fn convex_hull(mut pts: Vec<[f64; 2]>) -> Polygon {
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: [f64; 2], a: [f64; 2], b: [f64; 2]| (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
    let mut lower: Vec<[f64; 2]> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<[f64; 2]> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

fn measurement_cut(poly: Polygon, m: &PairModel, d: &PairData) -> Polygon {
    let mut p = poly;
    for i in 0..2 {
        let mut a = [0.0; 2];
        a[i] = 1.0;
        p = clip(&p, a, d.y[i] + m.v);
        p = clip(&p, [-a[0], -a[1]], -(d.y[i] - m.v));
    }
    p = clip(&p, [1.0, -1.0], d.z12 + m.r);
    p = clip(&p, [-1.0, 1.0], -(d.z12 - m.r));
    p = clip(&p, [-1.0, 1.0], d.z21 + m.r);
    p = clip(&p, [1.0, -1.0], -(d.z21 - m.r));
    p
}

/// Exact feasible polygons of the pair model, one per step.
pub fn pair_polygons(m: &PairModel, data: &[PairData]) -> Vec<Polygon> {
    let s = m.x0;
    let mut poly: Polygon = vec![[-s, -s], [s, -s], [s, s], [-s, s]];
    let mut out = Vec::new();
    for (k, d) in data.iter().enumerate() {
        if k > 0 {
            let mut pts = Vec::new();
            for p in &poly {
                for dx in [-m.w, m.w] {
                    for dy in [-m.w, m.w] {
                        pts.push([p[0] + dx, p[1] + dy]);
                    }
                }
            }
            poly = convex_hull(pts);
        }
        poly = measurement_cut(poly, m, d);
        out.push(poly.clone());
    }
    out
}

pub fn polygon_hull(poly: &Polygon) -> [(f64, f64); 2] {
    let mut h = [(f64::INFINITY, f64::NEG_INFINITY); 2];
    for p in poly {
        for i in 0..2 {
            h[i] = (h[i].0.min(p[i]), h[i].1.max(p[i]));
        }
    }
    h
}

/// Lattice points of spacing `h` reachable by lattice trajectories that
/// agree with every measurement, per step; returns the hull of each step's
/// point set.
pub fn pair_lattice_hulls(m: &PairModel, data: &[PairData], h: f64) -> Vec<[(f64, f64); 2]> {
    let steps = data.len() as f64;
    let lim = ((m.x0 + m.w * steps) / h).ceil() as i64 + 1;
    let reach = (m.w / h + 1e-9).floor() as i64;
    let side = (2 * lim + 1) as usize;
    let val = |i: usize| (i as i64 - lim) as f64 * h;
    let eps = 1e-9;
    let ok = |p: [f64; 2], d: &PairData| {
        (d.y[0] - p[0]).abs() <= m.v + eps
            && (d.y[1] - p[1]).abs() <= m.v + eps
            && (d.z12 - (p[0] - p[1])).abs() <= m.r + eps
            && (d.z21 - (p[1] - p[0])).abs() <= m.r + eps
    };
    let mut live = vec![vec![false; side]; side];
    for (a, row) in live.iter_mut().enumerate() {
        for (b, cell) in row.iter_mut().enumerate() {
            *cell = val(a).abs() <= m.x0 + eps && val(b).abs() <= m.x0 + eps;
        }
    }
    let mut out = Vec::new();
    for (k, d) in data.iter().enumerate() {
        if k > 0 {
            let mut next = vec![vec![false; side]; side];
            for a in 0..side {
                for b in 0..side {
                    if !live[a][b] {
                        continue;
                    }
                    for da in -reach..=reach {
                        for db in -reach..=reach {
                            let (na, nb) = (a as i64 + da, b as i64 + db);
                            if na >= 0 && nb >= 0 && (na as usize) < side && (nb as usize) < side {
                                next[na as usize][nb as usize] = true;
                            }
                        }
                    }
                }
            }
            live = next;
        }
        let mut hull = [(f64::INFINITY, f64::NEG_INFINITY); 2];
        for a in 0..side {
            for b in 0..side {
                if live[a][b] {
                    let p = [val(a), val(b)];
                    live[a][b] = ok(p, d);
                    if live[a][b] {
                        for i in 0..2 {
                            hull[i] = (hull[i].0.min(p[i]), hull[i].1.max(p[i]));
                        }
                    }
                }
            }
        }
        out.push(hull);
    }
    out
}

/// Measurements of a logged pair trial, in the oracle's layout.
pub fn pair_data(log: &czest::simharness::TrialLog) -> Vec<PairData> {
    log.steps
        .iter()
        .map(|s| {
            let z = |i, j| s.z.iter().find(|r| r.agent == i && r.neighbor == j).expect("both edges present").z[0];
            PairData {
                y: [s.y[0][0], s.y[1][0]],
                z12: z(1, 2),
                z21: z(2, 1),
            }
        })
        .collect()
}
