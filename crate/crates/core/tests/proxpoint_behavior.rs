//! Outer-loop behavior of the proximal-point solvers on nonconvex and
//! convex instances: descent, feasibility, fixed-point termination, dual
//! bounds and exact-versus-inexact agreement.

use conex::geometry::{Composite, FeasibleSet, Geometry};
use conex::linalg;
use conex::oracles::NoiseConfig;
use conex::problems::{
    make_benchmark, Constraint, ConstrainedProblem, ConstraintConstants, DiagQuadratic, ParamMap,
    QuadStructure, SmoothFn,
};
use conex::proxpoint::{
    dual_bound, proposition35_bound, run_exact_proxpoint, run_inexact_proxpoint, DualBoundResult,
    InexactOptions, InnerSolver, ToleranceSchedule,
};

fn nc_quad() -> ConstrainedProblem {
    make_benchmark("nonconvex-quadratic", &ParamMap::new()).unwrap()
}

/// A nonconvex instance whose box center is an exact KKT point: the smooth
/// part is stationary there and the constraint is slack.
fn kkt_at_center() -> ConstrainedProblem {
    let g = Geometry::euclidean(FeasibleSet::Box {
        lower: vec![-0.5, -0.5],
        upper: vec![0.5, 0.5],
    })
    .unwrap();
    let obj = DiagQuadratic {
        q: vec![0.2, -0.1],
        c: vec![0.0, 0.0],
        d: 0.0,
    };
    let con = DiagQuadratic {
        q: vec![2.0, 2.0],
        c: vec![0.0, 0.0],
        d: -0.5,
    };
    let f0 = {
        let q = obj.clone();
        SmoothFn::new(move |x| q.value(x), {
            let q = obj.clone();
            move |x| q.grad(x)
        })
    };
    let f1 = {
        let q = con.clone();
        SmoothFn::new(move |x| q.value(x), {
            let q = con.clone();
            move |x| q.grad(x)
        })
    };
    ConstrainedProblem::new(
        "kkt-at-center",
        g,
        f0,
        Composite::zero(),
        0.2,
        0.0,
        0.1,
        vec![Constraint {
            f: f1,
            chi: Composite::zero(),
            consts: ConstraintConstants {
                l: 2.0,
                m_f: 2.0 * f64::sqrt(2.0) * 0.5,
                mu: 0.0,
                ..Default::default()
            },
        }],
    )
    .unwrap()
    .with_quad(QuadStructure {
        objective: obj,
        constraints: vec![con],
    })
}

#[test]
fn starting_at_a_kkt_point_terminates_immediately() {
    let p = kkt_at_center();
    let x0 = vec![0.0, 0.0];
    let trace = run_exact_proxpoint(&p, &x0, 16, 1e-10).unwrap();
    assert_eq!(trace.terminated_early, Some(1));
    assert!(linalg::dist2(&trace.iterates[1], &x0) <= 1e-12);
    let r = &trace.residuals[0];
    assert!(r.stationarity < 1e-9 && r.complementarity < 1e-12);
}

#[test]
fn convex_instance_reduces_to_fixed_constraint_solves() {
    // all moduli zero: the subproblem is the base problem, so the first
    // outer step already lands on the optimum and the loop stops
    let p = make_benchmark("ball-projection", &ParamMap::new()).unwrap();
    let x0 = vec![0.0, 0.0];
    let trace = run_exact_proxpoint(&p, &x0, 16, 1e-10).unwrap();
    assert!(trace.terminated_early.is_some());
    assert!(trace.psi0.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    let opt = p.optimum.as_ref().unwrap();
    let last = trace.iterates.last().unwrap();
    assert!(linalg::dist2(last, &opt.x) < 1e-8);
}

#[test]
fn descending_objective_and_dual_bound_along_exact_run() {
    let p = nc_quad();
    let x0 = vec![0.0, 0.0];
    let trace = run_exact_proxpoint(&p, &x0, 32, 1e-10).unwrap();
    assert!(trace.steps() >= 30);
    for k in 1..=trace.steps() {
        let bound = proposition35_bound(&p, &trace, k).unwrap();
        assert!(
            trace.residuals[k - 1].dual_norm1 <= bound * (1.0 + 1e-6) + 1e-9,
            "step {k}: |y|_1 = {} > bound = {bound}",
            trace.residuals[k - 1].dual_norm1
        );
    }
    // a fixed point would force a zero bound and zero multipliers
    let stall = proposition35_bound(
        &p,
        &conex::proxpoint::ProxPointTrace {
            iterates: vec![x0.clone(), x0.clone()],
            psi0: vec![p.psi0(&x0), p.psi0(&x0)],
            duals: vec![vec![0.0]],
            residuals: vec![],
            sub_infeasibility: vec![0.0],
            k_hat: 1,
            terminated_early: Some(1),
            schedule: None,
        },
        1,
    )
    .unwrap();
    assert_eq!(stall, 0.0);
}

#[test]
fn shallow_certificate_names_the_violating_constraint() {
    let p = nc_quad();
    // a point whose slack is too shallow for the margin: near the region
    // where the constraint approaches zero
    let mut probe = None;
    for t in 0..100 {
        let x = [-0.5 + t as f64 * 0.01, 0.0];
        if !p.geometry().contains(&x) {
            continue;
        }
        let psi = p.psi(&x);
        let mu1 = p.constraints()[0].consts.mu;
        let d = p.geometry().diameter();
        if psi[0] > -2.0 * mu1 * d * d && psi[0] <= 0.0 {
            probe = Some(x.to_vec());
            break;
        }
    }
    let probe = probe.expect("a shallow feasible point exists");
    match dual_bound(&p, &probe, -10.0).unwrap() {
        DualBoundResult::ShallowConstraint { index, .. } => assert_eq!(index, 0),
        other => panic!("expected a shallow-constraint flag, got {other:?}"),
    }
}

#[test]
fn inexact_single_step_selects_the_only_index() {
    let p = nc_quad();
    let schedule = ToleranceSchedule {
        delta: 1e-4,
        delta_bar: 1e-4,
        k_outer: 1,
        c1: 2.0,
        c2: 2.0,
        b: 2.5,
        eps: 1e-2,
        eps_bar: 0.1,
    };
    let noise = NoiseConfig::deterministic(1);
    let trace = run_inexact_proxpoint(
        &p,
        &noise,
        &[0.0, 0.0],
        &schedule,
        &InexactOptions::default(),
        123,
    )
    .unwrap();
    assert_eq!(trace.k_hat, 1);
    assert_eq!(trace.steps(), 1);
}

#[test]
fn inexact_rejects_infeasible_start() {
    let p = nc_quad();
    let schedule = ToleranceSchedule {
        delta: 1e-4,
        delta_bar: 1e-4,
        k_outer: 1,
        c1: 2.0,
        c2: 2.0,
        b: 2.5,
        eps: 1e-2,
        eps_bar: 0.1,
    };
    let noise = NoiseConfig::deterministic(1);
    // (-0.5, 0) violates the constraint on this instance
    let res = run_inexact_proxpoint(
        &p,
        &noise,
        &[-0.5, 0.0],
        &schedule,
        &InexactOptions::default(),
        0,
    );
    assert!(res.is_err());
}

/// With near-machine inner tolerances the inexact trace is indistinguishable
/// from the exact one. The certified inner mode doubles the budget until the
/// measured gap and infeasibility against the reference solve meet the
/// tolerances, which keeps machine-accuracy targets affordable.
#[test]
fn tight_inexact_trace_matches_exact_trace() {
    let p = nc_quad();
    let x0 = vec![0.0, 0.0];
    let k = 3;
    let exact = run_exact_proxpoint(&p, &x0, k, 1e-10).unwrap();
    let schedule = ToleranceSchedule {
        delta: 1e-10,
        delta_bar: 1e-10,
        k_outer: k,
        c1: 2.0,
        c2: 3.5,
        b: 2.5,
        eps: 1e-2,
        eps_bar: 0.1,
    };
    let noise = NoiseConfig::deterministic(1);
    let options = InexactOptions {
        inner: InnerSolver::CertifiedBudget,
        use_last_iterate: false,
    };
    let inexact = run_inexact_proxpoint(&p, &noise, &x0, &schedule, &options, 5).unwrap();
    for (a, b) in exact.psi0.iter().zip(&inexact.psi0) {
        assert!((a - b).abs() <= 1e-6, "psi0 paths diverge: {a} vs {b}");
    }
    // the reported subproblem duals agree with the exact multipliers
    for (ya, yb) in exact.duals.iter().zip(&inexact.duals) {
        assert!((ya[0] - yb[0]).abs() <= 1e-3, "duals diverge: {ya:?} vs {yb:?}");
    }
}

/// Distance-based diagnostic on the reference-solvable benchmark: tight
/// inner solves satisfy both step conditions, and the conditions inherit
/// strict feasibility of the trace.
#[test]
fn distance_inexactness_diagnostic_on_tight_solves() {
    use conex::proxpoint::{build_subproblem, distance_inexactness_check};
    let p = nc_quad();
    let x0 = vec![0.0, 0.0];
    let schedule = ToleranceSchedule {
        delta: 1e-6,
        delta_bar: 1e-6,
        k_outer: 4,
        c1: 2.0,
        c2: 3.5,
        b: 2.5,
        eps: 1e-2,
        eps_bar: 0.1,
    };
    let noise = NoiseConfig::deterministic(1);
    let options = InexactOptions {
        inner: InnerSolver::CertifiedBudget,
        use_last_iterate: false,
    };
    let trace = run_inexact_proxpoint(&p, &noise, &x0, &schedule, &options, 0).unwrap();
    let mu: Vec<f64> = p.constraints().iter().map(|c| c.consts.mu).collect();
    for k in 1..=trace.steps() {
        let sub = build_subproblem(&p, &trace.iterates[k - 1]).unwrap();
        let exact = conex::reference::solve_diag_qcqp(&sub.problem).unwrap();
        // Lipschitz bounds of the shifted functions from the quadratic
        // structure over the box corners
        let quad = sub.problem.quad.as_ref().unwrap();
        let corner_max = |q: &conex::problems::DiagQuadratic| -> f64 {
            let mut best: f64 = 0.0;
            for mask in 0..4usize {
                let x = [
                    if mask & 1 == 1 { 0.5 } else { -0.5 },
                    if mask & 2 == 2 { 0.5 } else { -0.5 },
                ];
                best = best.max(linalg::norm2(&q.grad(&x)));
            }
            best
        };
        let m0 = corner_max(&quad.objective);
        let m: Vec<f64> = quad.constraints.iter().map(corner_max).collect();
        let check = distance_inexactness_check(
            p.mu0,
            &mu,
            m0,
            &m,
            &trace.iterates[k - 1],
            &trace.iterates[k],
            &exact.x,
        )
        .unwrap();
        assert!(check.all_hold(), "step {k}: {check:?}");
        // the conditions indeed deliver strict feasibility
        assert!(p.psi(&trace.iterates[k]).iter().all(|&v| v < 0.0));
    }
}

#[test]
fn last_iterate_flag_switches_the_reported_point() {
    let p = nc_quad();
    let x0 = vec![0.0, 0.0];
    let schedule = ToleranceSchedule {
        delta: 1e-3,
        delta_bar: 1e-3,
        k_outer: 1,
        c1: 2.0,
        c2: 3.5,
        b: 2.5,
        eps: 1e-2,
        eps_bar: 0.1,
    };
    let noise = NoiseConfig::deterministic(1);
    let averaged = run_inexact_proxpoint(
        &p,
        &noise,
        &x0,
        &schedule,
        &InexactOptions {
            inner: InnerSolver::CertifiedBudget,
            use_last_iterate: false,
        },
        0,
    )
    .unwrap();
    let last = run_inexact_proxpoint(
        &p,
        &noise,
        &x0,
        &schedule,
        &InexactOptions {
            inner: InnerSolver::CertifiedBudget,
            use_last_iterate: true,
        },
        0,
    )
    .unwrap();
    assert_ne!(averaged.iterates[1], last.iterates[1]);
    // both remain near the exact subproblem solution
    let sub = conex::proxpoint::build_subproblem(&p, &x0).unwrap();
    let exact = conex::reference::solve_diag_qcqp(&sub.problem).unwrap();
    assert!(linalg::dist2(&averaged.iterates[1], &exact.x) < 0.1);
    assert!(linalg::dist2(&last.iterates[1], &exact.x) < 0.1);
}

#[test]
fn inexact_runs_reproduce_and_respect_feasibility_guard() {
    let p = nc_quad();
    let x0 = vec![0.0, 0.0];
    let schedule = ToleranceSchedule {
        delta: 1e-5,
        delta_bar: 1e-5,
        k_outer: 3,
        c1: 2.0,
        c2: 3.5,
        b: 2.5,
        eps: 1e-2,
        eps_bar: 0.1,
    };
    let noise = NoiseConfig::deterministic(1);
    let options = InexactOptions {
        inner: InnerSolver::CertifiedBudget,
        use_last_iterate: false,
    };
    let a = run_inexact_proxpoint(&p, &noise, &x0, &schedule, &options, 9).unwrap();
    let b = run_inexact_proxpoint(&p, &noise, &x0, &schedule, &options, 9).unwrap();
    assert_eq!(a.iterates, b.iterates);
    assert_eq!(a.k_hat, b.k_hat);
    // shifted constraints dominate the originals, so the recorded
    // subproblem infeasibility bounds the original violation
    for k in 1..=a.steps() {
        let orig = linalg::positive_part_norm2(&p.psi(&a.iterates[k]));
        assert!(orig <= a.sub_infeasibility[k - 1] + 1e-12);
    }
}
