use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::geometry::{around, SampledSet};
use super::Outcome;
use crate::czono::{ConstrainedZonotope, IntervalBox};
use crate::filters::{update_intersection, update_intersection_with_fault, FilterError, ReceivedJoint};
use crate::simharness::{run_trial, Algorithm, InitialRange, ResolvedScenario, StepRecord, TrialLog};
use crate::sysmodel::MultiAgentSystem;

const MEMBER_TOL: f64 = 1e-9;

/// Per-step, per-agent `(lo, hi)` of the lattice points of spacing
/// `spacing` that are consistent with every recorded measurement.
///
/// Only two scalar agents with `A = B = I` and box noise sets are
/// supported. The lattice set is propagated forward one step at a time:
/// dilation by the process-noise box, then filtering by the measurements.
pub fn grid_hulls(
    sys: &MultiAgentSystem,
    initial: &[IntervalBox],
    steps: &[StepRecord],
    spacing: f64,
) -> Result<Vec<Vec<(f64, f64)>>, String> {
    if sys.num_agents() != 2 || sys.total_state_dim() != 2 || initial.len() != 2 {
        return Err("grid oracle needs two scalar agents".into());
    }
    let eye = DMatrix::<f64>::identity(2, 2);
    let mut wlo = [0.0; 2];
    let mut whi = [0.0; 2];
    for i in 0..2 {
        let w = sys.agent(i).wset.interval_hull().map_err(|e| e.to_string())?;
        wlo[i] = w.lo()[0];
        whi[i] = w.hi()[0];
    }
    let horizon = steps.len();
    let lo_idx: Vec<i64> = (0..2)
        .map(|i| ((initial[i].lo()[0] + wlo[i] * horizon as f64) / spacing).floor() as i64 - 1)
        .collect();
    let hi_idx: Vec<i64> = (0..2)
        .map(|i| ((initial[i].hi()[0] + whi[i] * horizon as f64) / spacing).ceil() as i64 + 1)
        .collect();
    let dims = [(hi_idx[0] - lo_idx[0] + 1) as usize, (hi_idx[1] - lo_idx[1] + 1) as usize];
    let coord = |axis: usize, idx: usize| (lo_idx[axis] + idx as i64) as f64 * spacing;
    let at = |a: usize, b: usize| a * dims[1] + b;

    let mut cells = vec![false; dims[0] * dims[1]];
    for a in 0..dims[0] {
        for b in 0..dims[1] {
            let p = DVector::from_vec(vec![coord(0, a), coord(1, b)]);
            cells[at(a, b)] = initial[0].contains_point(&p.rows(0, 1).into_owned(), MEMBER_TOL)
                && initial[1].contains_point(&p.rows(1, 1).into_owned(), MEMBER_TOL);
        }
    }

    let mut out = Vec::with_capacity(horizon);
    for (t, step) in steps.iter().enumerate() {
        let k = step.k;
        if t > 0 {
            let prev = sys.build_centralized(k - 1).map_err(|e| e.to_string())?;
            if prev.a != eye || prev.b != eye {
                return Err("grid oracle needs A = B = I".into());
            }
            let reach = |axis: usize| {
                let lo = (wlo[axis] / spacing - 1e-9).ceil() as i64;
                let hi = (whi[axis] / spacing + 1e-9).floor() as i64;
                (lo, hi)
            };
            cells = dilate(&cells, dims, reach(0), reach(1));
        }
        let st = sys.build_centralized(k).map_err(|e| e.to_string())?;
        let vhull = st.vset.interval_hull().map_err(|e| e.to_string())?;
        let mut y: Vec<f64> = step.y.iter().flatten().copied().collect();
        y.extend(step.z.iter().flat_map(|r| r.z.iter().copied()));
        let y = DVector::from_vec(y);
        let mut hull = [(f64::INFINITY, f64::NEG_INFINITY); 2];
        for a in 0..dims[0] {
            for b in 0..dims[1] {
                if !cells[at(a, b)] {
                    continue;
                }
                let p = DVector::from_vec(vec![coord(0, a), coord(1, b)]);
                let keep = vhull.contains_point(&(&y - &st.h * &p), MEMBER_TOL);
                cells[at(a, b)] = keep;
                if keep {
                    for i in 0..2 {
                        hull[i] = (hull[i].0.min(p[i]), hull[i].1.max(p[i]));
                    }
                }
            }
        }
        if !hull[0].0.is_finite() {
            return Err(format!("no lattice point consistent with the data at step {k}"));
        }
        out.push(hull.to_vec());
    }
    Ok(out)
}

fn dilate(cells: &[bool], dims: [usize; 2], r0: (i64, i64), r1: (i64, i64)) -> Vec<bool> {
    let mut mid = vec![false; cells.len()];
    for a in 0..dims[0] {
        for b in 0..dims[1] {
            if cells[a * dims[1] + b] {
                for d in r0.0..=r0.1 {
                    let na = a as i64 + d;
                    if na >= 0 && (na as usize) < dims[0] {
                        mid[na as usize * dims[1] + b] = true;
                    }
                }
            }
        }
    }
    let mut out = vec![false; cells.len()];
    for a in 0..dims[0] {
        for b in 0..dims[1] {
            if mid[a * dims[1] + b] {
                for d in r1.0..=r1.1 {
                    let nb = b as i64 + d;
                    if nb >= 0 && (nb as usize) < dims[1] {
                        out[a * dims[1] + nb as usize] = true;
                    }
                }
            }
        }
    }
    out
}

fn estimates_of(step: &StepRecord, alg: Algorithm) -> Option<&crate::simharness::AlgorithmStep> {
    step.estimates.iter().find(|e| e.algorithm == alg)
}

/// Compare a trial's centralized hulls with [`grid_hulls`].
pub fn grid_agreement(sc: &ResolvedScenario, log: &TrialLog, spacing: f64) -> Outcome {
    let mut out = Outcome::default();
    let InitialRange::Boxes(boxes) = &sc.config.initial_range else {
        out.failures.push("grid oracle needs explicit initial boxes".into());
        return out;
    };
    let grid = match grid_hulls(&sc.system, boxes, &log.steps, spacing) {
        Ok(g) => g,
        Err(e) => {
            out.failures.push(e);
            return out;
        }
    };
    let tol = spacing + 1e-6;
    for (step, g) in log.steps.iter().zip(&grid) {
        let Some(cen) = estimates_of(step, Algorithm::Centralized) else {
            out.failures.push("centralized filter not enabled".into());
            return out;
        };
        for (a, &(glo, ghi)) in cen.agents.iter().zip(g) {
            out.cases += 1;
            if (a.lo[0] - glo).abs() > tol || (a.hi[0] - ghi).abs() > tol {
                out.failures.push(format!(
                    "k={} agent {}: filter [{}, {}] vs lattice [{glo}, {ghi}]",
                    step.k, a.agent, a.lo[0], a.hi[0]
                ));
            }
        }
    }
    out
}

fn anchored(rng: &mut ChaCha8Rng, n: usize, blocks: usize, alpha: usize, p: &DVector<f64>) -> SampledSet {
    let mut anchor = DVector::from_fn(n * blocks, |_, _| rng.gen_range(-2.0..=2.0));
    anchor.rows_mut(alpha * n, n).copy_from(p);
    let ngen = rng.gen_range(n * blocks..=n * blocks + 3);
    let ncon = rng.gen_range(0..=2);
    SampledSet::random(rng, n * blocks, ngen, ncon, Some(&anchor))
}

fn block(x: &DVector<f64>, alpha: usize, n: usize) -> DVector<f64> {
    x.rows(alpha * n, n).into_owned()
}

/// Membership agreement between the stacked intersection and the direct
/// composition `proj(own) ∩ proj(received_1) ∩ ...`, on `instances` random
/// instances with `probes` points each. With `fault`, the stacked side uses
/// the sign-flipped variant.
pub fn intersection_equivalence(rng: &mut ChaCha8Rng, instances: usize, probes: usize, fault: bool) -> Outcome {
    let mut out = Outcome::default();
    for inst in 0..instances {
        out.cases += 1;
        if let Err(e) = equivalence_instance(rng, probes, fault, &mut out, inst) {
            out.failures.push(format!("instance {inst}: {e}"));
        }
    }
    out
}

fn equivalence_instance(
    rng: &mut ChaCha8Rng,
    probes: usize,
    fault: bool,
    out: &mut Outcome,
    inst: usize,
) -> Result<(), FilterError> {
    let n = rng.gen_range(1..=2);
    let p = DVector::from_fn(n, |_, _| rng.gen_range(-2.0..=2.0));
    let own_blocks = rng.gen_range(2..=3);
    let own = anchored(rng, n, own_blocks, 0, &p);
    let mut senders = Vec::new();
    for from in 0..rng.gen_range(1..=2) {
        let blocks = rng.gen_range(2..=3);
        let alpha = rng.gen_range(1..blocks);
        senders.push((anchored(rng, n, blocks, alpha, &p), alpha, from));
    }
    let received: Vec<ReceivedJoint> = senders
        .iter()
        .map(|(s, alpha, from)| ReceivedJoint {
            from: *from,
            joint: s.set.clone(),
            alpha: *alpha,
        })
        .collect();
    let stacked = if fault {
        update_intersection_with_fault(&own.set, n, &received)?
    } else {
        update_intersection(&own.set, n, &received)?
    };
    let coords = |alpha: usize| (alpha * n..(alpha + 1) * n).collect::<Vec<_>>();
    let mut direct: ConstrainedZonotope = own.set.project(&coords(0))?;
    for (s, alpha, _) in &senders {
        direct = direct.intersect(&s.set.project(&coords(*alpha))?)?;
    }
    let own_hull = own.set.interval_hull()?.select(&coords(0));

    let mut disagreements = 0;
    for t in 0..probes {
        let x = match t % 4 {
            0 => &p + DVector::from_fn(n, |_, _| rng.gen_range(-0.1..=0.1)),
            1 => block(&own.sample(rng), 0, n),
            2 => {
                let (s, alpha, _) = &senders[t / 4 % senders.len()];
                block(&s.sample(rng), *alpha, n)
            }
            _ => around(rng, &own_hull),
        };
        if stacked.contains(&x)? != direct.contains(&x)? {
            disagreements += 1;
        }
    }
    if disagreements > 0 {
        out.failures.push(format!("instance {inst}: {disagreements} of {probes} probes disagree"));
    }
    Ok(())
}

/// Within the window the OIT filter must reproduce the standard filter
/// exactly; run with `delta_bar >= horizon`.
pub fn oit_window_equality(sc: &ResolvedScenario, trial: usize) -> Outcome {
    let mut out = Outcome::default();
    let log = match run_trial(sc, trial) {
        Ok(l) => l,
        Err(e) => {
            out.failures.push(e.to_string());
            return out;
        }
    };
    for step in &log.steps {
        out.cases += 1;
        let (Some(c), Some(o)) = (estimates_of(step, Algorithm::Centralized), estimates_of(step, Algorithm::Oit)) else {
            out.failures.push("needs centralized and oit".into());
            return out;
        };
        let same = c.agents.iter().zip(&o.agents).all(|(a, b)| {
            a.lo.iter().zip(&b.lo).all(|(x, y)| x.to_bits() == y.to_bits())
                && a.hi.iter().zip(&b.hi).all(|(x, y)| x.to_bits() == y.to_bits())
        });
        if !same {
            out.failures.push(format!("k={}: hulls differ", step.k));
        }
    }
    out
}

/// `(generators, constraints)` expected of the OIT posterior once the
/// window is full, for noise sets without constraints of their own.
pub fn oit_expected_size(sc: &ResolvedScenario) -> Result<(usize, usize), FilterError> {
    let st = sc.system.build_centralized(0)?;
    let d = sc.delta_bar;
    let gens = sc.system.total_state_dim() + (d + 1) * st.vset.num_generators() + d * st.wset.num_generators();
    let cons = (d + 1) * (st.h.nrows() + st.vset.num_constraints()) + d * st.wset.num_constraints();
    Ok((gens, cons))
}

/// OIT posterior size is the same at every step past the window.
pub fn oit_bounded_size(sc: &ResolvedScenario, trial: usize) -> Outcome {
    let mut out = Outcome::default();
    let expected = match oit_expected_size(sc) {
        Ok(e) => e,
        Err(e) => {
            out.failures.push(e.to_string());
            return out;
        }
    };
    let log = match run_trial(sc, trial) {
        Ok(l) => l,
        Err(e) => {
            out.failures.push(e.to_string());
            return out;
        }
    };
    for step in log.steps.iter().filter(|s| s.k > sc.delta_bar) {
        out.cases += 1;
        match estimates_of(step, Algorithm::Oit) {
            Some(o) if (o.generators, o.constraints) == expected => {}
            Some(o) => out.failures.push(format!(
                "k={}: size ({}, {}) instead of {expected:?}",
                step.k, o.generators, o.constraints
            )),
            None => out.failures.push("oit not enabled".into()),
        }
    }
    if out.cases == 0 {
        out.failures.push("horizon does not extend past the window".into());
    }
    out
}
