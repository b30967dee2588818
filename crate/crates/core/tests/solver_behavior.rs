//! End-to-end solver behavior on the canned benchmarks: convergence at
//! fixed budgets against analytic optima, averaged-iterate structure, and
//! the cross-check against the projected-subgradient baseline.

use conex::conex::{run_conex, ConExParams, HKnob, ScheduleKind};
use conex::geometry::{Composite, FeasibleSet, Geometry, ProxRequest};
use conex::linalg;
use conex::metrics::optimality_and_infeasibility;
use conex::oracles::NoiseConfig;
use conex::problems::{make_benchmark, ConstrainedProblem, ParamMap, SmoothFn};
use conex::reference::projected_subgradient_baseline;

fn ball() -> ConstrainedProblem {
    make_benchmark("ball-projection", &ParamMap::new()).unwrap()
}

/// Deterministic accelerated run on the ball projection. The achieved errors
/// at these budgets were frozen from the implementation's own converged
/// values, validated against the analytic optimum; the published bound at
/// T = 2000 is around 7e-4, so low-thousands budgets land in the 1e-4..1e-3
/// band and both measures drop below 1e-4 by T = 6000.
#[test]
fn ball_projection_reaches_tolerance_band() {
    let p = ball();
    let opt = p.optimum.as_ref().unwrap();
    let b = opt.y[0] + 1.0;
    let noise = NoiseConfig::deterministic(1);
    let run = |t: usize| {
        let mut params = ConExParams::new(t, b, ScheduleKind::StronglyConvex);
        params.y_norm_hint = Some(opt.y[0]);
        let res = run_conex(&p, &noise, &params, 0).unwrap();
        optimality_and_infeasibility(&p, &res.x_bar, opt.psi0)
    };
    let (gap, infeas) = run(2000);
    assert!(gap <= 1e-4, "gap {gap}");
    assert!(infeas <= 1e-3, "infeas {infeas}");
    let (gap, infeas) = run(6000);
    assert!(gap <= 1e-4 && infeas <= 1e-4, "gap {gap} infeas {infeas}");
}

#[test]
fn conex_not_worse_than_baseline_at_equal_budget() {
    let p = ball();
    let opt = p.optimum.as_ref().unwrap();
    let b = opt.y[0] + 1.0;
    let noise = NoiseConfig::deterministic(1);
    let t = 2000;
    let mut params = ConExParams::new(t, b, ScheduleKind::StronglyConvex);
    params.y_norm_hint = Some(opt.y[0]);
    let res = run_conex(&p, &noise, &params, 0).unwrap();
    let (gap_c, infeas_c) = optimality_and_infeasibility(&p, &res.x_bar, opt.psi0);

    let x_base = projected_subgradient_baseline(&p, t, 2.0 * b);
    let (gap_b, infeas_b) = optimality_and_infeasibility(&p, &x_base, opt.psi0);
    assert!(
        gap_c.max(infeas_c) <= gap_b.max(infeas_b),
        "conex {:.2e} vs baseline {:.2e}",
        gap_c.max(infeas_c),
        gap_b.max(infeas_b)
    );
}

/// With the constant schedule all averaging weights are one, so the output
/// is the arithmetic mean of the iterates (replayed independently here).
#[test]
fn convex_schedule_average_is_arithmetic_mean() {
    let g = Geometry::euclidean(FeasibleSet::Box {
        lower: vec![-1.0],
        upper: vec![1.0],
    })
    .unwrap();
    let p = ConstrainedProblem::new(
        "mean",
        g,
        SmoothFn::new(|x| 0.5 * (x[0] - 0.4) * (x[0] - 0.4), |x| vec![x[0] - 0.4]),
        Composite::zero(),
        1.0,
        0.0,
        0.0,
        vec![],
    )
    .unwrap();
    let noise = NoiseConfig::deterministic(0);
    let t = 25;
    let mut params = ConExParams::new(t, 1.0, ScheduleKind::Convex);
    params.h_floor = 1.0;
    let res = run_conex(&p, &noise, &params, 0).unwrap();

    // replay the projected-gradient recursion and average by hand
    let agg = p.aggregate_constants();
    let h = conex::conex::effective_h(&agg, 1.0, HKnob::B, 1.0, None).unwrap();
    let sp = conex::conex::schedule_convex(t, 1.0, &agg, &noise, h).unwrap();
    let mut x = 0.0_f64;
    let mut sum = 0.0;
    for _ in 0..t {
        x = (x - (x - 0.4) / sp.eta).clamp(-1.0, 1.0);
        sum += x;
    }
    assert!((res.x_bar[0] - sum / t as f64).abs() < 1e-12);
    assert!((res.x_last[0] - x).abs() < 1e-12);
}

/// One 2-d prox instance against a refined grid search of the prox
/// criterion at effective step 1e-4.
#[test]
fn primal_prox_matches_fine_grid_on_2d_instance() {
    let g = Geometry::euclidean(FeasibleSet::Box {
        lower: vec![-1.0, -1.0],
        upper: vec![1.0, 1.0],
    })
    .unwrap();
    let chi0 = Composite::l1(0.4);
    let chis = vec![Composite::linear(vec![0.3, -0.2], 0.1)];
    let req = ProxRequest {
        weights: &[0.8],
        linear: &[0.7, -0.4],
        center: &[0.2, 0.1],
        eta: 1.2,
        chi0: &chi0,
        chis: &chis,
    };
    let x = g.prox_step(&req).unwrap();

    let criterion = |z: &[f64]| {
        chi0.value(&g, z)
            + 0.8 * chis[0].value(&g, z)
            + linalg::dot(req.linear, z)
            + req.eta * g.bregman_div(z, req.center).unwrap()
    };
    // two-stage grid: coarse 1e-2 pass, then 1e-4 within a +-3e-2 window
    let sweep = |lo: &[f64], hi: &[f64], h: f64| -> Vec<f64> {
        let mut best = (f64::INFINITY, vec![0.0, 0.0]);
        let mut a = lo[0];
        while a <= hi[0] + 1e-12 {
            let mut b = lo[1];
            while b <= hi[1] + 1e-12 {
                let z = [a, b];
                let v = criterion(&z);
                if v < best.0 {
                    best = (v, z.to_vec());
                }
                b += h;
            }
            a += h;
        }
        best.1
    };
    let coarse = sweep(&[-1.0, -1.0], &[1.0, 1.0], 1e-2);
    let lo: Vec<f64> = coarse.iter().map(|v| (v - 3e-2).max(-1.0)).collect();
    let hi: Vec<f64> = coarse.iter().map(|v| (v + 3e-2).min(1.0)).collect();
    let fine = sweep(&lo, &hi, 1e-4);
    assert!(
        linalg::dist2(&x, &fine) <= 2e-4,
        "prox {x:?} vs grid {fine:?}"
    );
}

/// Stochastic runs stay feasible and seeds decorrelate the outputs.
#[test]
fn stochastic_runs_differ_across_seeds_but_share_structure() {
    let p = ball();
    let noise = NoiseConfig::fully_stochastic(0.5, vec![0.3], 0.3);
    let params = ConExParams::new(400, 2.0, ScheduleKind::StronglyConvex);
    let a = run_conex(&p, &noise, &params, 1).unwrap();
    let b = run_conex(&p, &noise, &params, 2).unwrap();
    assert_ne!(a.x_bar, b.x_bar);
    assert!(p.geometry().contains(&a.x_bar) && p.geometry().contains(&b.x_bar));
    // both still approach the optimum
    let opt = p.optimum.as_ref().unwrap();
    for res in [&a, &b] {
        let (gap, infeas) = optimality_and_infeasibility(&p, &res.x_bar, opt.psi0);
        assert!(gap.max(infeas) < 0.5, "gap {gap} infeas {infeas}");
    }
}
