mod common;

use czest::czono::{ConstrainedZonotope, IntervalBox};
use czest::filters::{extract_agent_set, CentralizedFilter, DistributedFilter};
use czest::simharness::{pair1d, run_trial, uav5, Algorithm, AgentEstimate, SamplingMode, StepRecord, TrialLog};
use czest::sysmodel::{MeasurementBatch, MultiAgentSystem};
use nalgebra::DVector;

fn estimates(step: &StepRecord, alg: Algorithm) -> &[AgentEstimate] {
    &step.estimates.iter().find(|e| e.algorithm == alg).expect("algorithm ran").agents
}

fn batch(step: &StepRecord) -> MeasurementBatch {
    MeasurementBatch {
        k: step.k,
        y: step.y.iter().map(|v| DVector::from_column_slice(v)).collect(),
        z: step
            .z
            .iter()
            .map(|r| ((r.agent - 1, r.neighbor - 1), DVector::from_column_slice(&r.z)))
            .collect(),
    }
}

fn continuous_pair_log(seed: u64, horizon: usize) -> TrialLog {
    let mut cfg = pair1d(horizon, seed);
    cfg.noise_grid = None;
    let sc = cfg.resolve().unwrap();
    run_trial(&sc, 0).unwrap()
}

#[test]
fn centralized_matches_exact_polygon() {
    for seed in 0..25 {
        let log = continuous_pair_log(seed, 8);
        assert!(log.aborted.is_none());
        let polys = common::pair_polygons(&common::PAIR, &common::pair_data(&log));
        for (step, poly) in log.steps.iter().zip(&polys) {
            let want = common::polygon_hull(poly);
            for (i, est) in estimates(step, Algorithm::Centralized).iter().enumerate() {
                assert!(
                    (est.lo[0] - want[i].0).abs() <= 1e-7 && (est.hi[0] - want[i].1).abs() <= 1e-7,
                    "seed {seed} k {} agent {}: [{}, {}] vs {:?}",
                    step.k,
                    i + 1,
                    est.lo[0],
                    est.hi[0],
                    want[i]
                );
            }
        }
    }
}

#[test]
fn outer_estimates_contain_the_exact_hull() {
    for seed in 0..25 {
        let log = continuous_pair_log(seed, 8);
        let polys = common::pair_polygons(&common::PAIR, &common::pair_data(&log));
        for (step, poly) in log.steps.iter().zip(&polys) {
            let want = common::polygon_hull(poly);
            for alg in [Algorithm::Oit, Algorithm::Distributed] {
                for (i, est) in estimates(step, alg).iter().enumerate() {
                    assert!(
                        est.lo[0] <= want[i].0 + 1e-7 && est.hi[0] >= want[i].1 - 1e-7,
                        "seed {seed} k {} {} agent {}",
                        step.k,
                        alg.name(),
                        i + 1
                    );
                }
            }
        }
    }
}

#[test]
fn lattice_data_agrees_with_lattice_search() {
    let h = 0.05;
    for seed in 0..10 {
        let sc = pair1d(5, seed).resolve().unwrap();
        let log = run_trial(&sc, 0).unwrap();
        let want = common::pair_lattice_hulls(&common::PAIR, &common::pair_data(&log), h);
        for (step, w) in log.steps.iter().zip(&want) {
            for (i, est) in estimates(step, Algorithm::Centralized).iter().enumerate() {
                assert!(
                    (est.lo[0] - w[i].0).abs() <= h + 1e-6 && (est.hi[0] - w[i].1).abs() <= h + 1e-6,
                    "seed {seed} k {}",
                    step.k
                );
            }
        }
    }
}

#[test]
fn vertex_noise_stays_inside_every_estimate() {
    let mut pair = pair1d(12, 3);
    pair.noise_sampling = SamplingMode::Vertex;
    pair.noise_grid = None;
    let sc = pair.resolve().unwrap();
    for t in 0..40 {
        let log = run_trial(&sc, t).unwrap();
        assert!(log.aborted.is_none());
        assert_eq!(log.violations(), 0, "pair trial {t}");
    }
    let mut uav = uav5(8, None, 5);
    uav.noise_sampling = SamplingMode::Vertex;
    let sc = uav.resolve().unwrap();
    for t in 0..4 {
        let log = run_trial(&sc, t).unwrap();
        assert!(log.aborted.is_none());
        assert_eq!(log.violations(), 0, "uav trial {t}");
    }
}

#[test]
fn oit_equals_centralized_inside_the_window() {
    let sc = uav5(6, None, 9).resolve().unwrap();
    let log = run_trial(&sc, 0).unwrap();
    for step in log.steps.iter().filter(|s| s.k <= sc.delta_bar) {
        assert_eq!(estimates(step, Algorithm::Oit), estimates(step, Algorithm::Centralized));
    }
}

fn hulls(sys: &MultiAgentSystem, batches: &[MeasurementBatch]) -> (Vec<Vec<IntervalBox>>, Vec<Vec<IntervalBox>>) {
    let init = ConstrainedZonotope::from_box(&IntervalBox::symmetric(sys.total_state_dim(), 40.0).unwrap()).unwrap();
    let mut cen = CentralizedFilter::new(init.clone());
    let mut dis = DistributedFilter::from_joint_initial(sys, &init).unwrap();
    let (mut c_out, mut d_out) = (Vec::new(), Vec::new());
    for b in batches {
        let post = cen.step(sys, b).unwrap().clone();
        c_out.push(
            (0..sys.num_agents())
                .map(|i| extract_agent_set(&post, sys, i).unwrap().interval_hull().unwrap())
                .collect(),
        );
        d_out.push(dis.step(sys, b).unwrap().iter().map(|s| s.posterior.interval_hull().unwrap()).collect());
    }
    (c_out, d_out)
}

fn close(a: &IntervalBox, b: &IntervalBox, tol: f64) -> bool {
    (a.lo() - b.lo()).amax() <= tol && (a.hi() - b.hi()).amax() <= tol
}

#[test]
fn relabeling_agents_relabels_estimates() {
    let sc = uav5(4, None, 21).resolve().unwrap();
    let log = run_trial(&sc, 0).unwrap();
    let batches: Vec<MeasurementBatch> = log.steps.iter().map(batch).collect();
    let perm = [3usize, 0, 4, 2, 1];
    let moved = sc.system.relabeled(&perm).unwrap();
    let moved_batches: Vec<MeasurementBatch> = batches
        .iter()
        .map(|b| {
            let mut y = vec![DVector::zeros(0); 5];
            for (a, v) in b.y.iter().enumerate() {
                y[perm[a]] = v.clone();
            }
            MeasurementBatch {
                k: b.k,
                y,
                z: b.z.iter().map(|(&(i, j), v)| ((perm[i], perm[j]), v.clone())).collect(),
            }
        })
        .collect();
    let (c0, d0) = hulls(&sc.system, &batches);
    let (c1, d1) = hulls(&moved, &moved_batches);
    for k in 0..batches.len() {
        for a in 0..5 {
            assert!(close(&c0[k][a], &c1[k][perm[a]], 1e-7), "centralized k {k} agent {a}");
            assert!(close(&d0[k][a], &d1[k][perm[a]], 1e-7), "distributed k {k} agent {a}");
        }
    }
}
