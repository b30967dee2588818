//! End-to-end coverage of the entropy/simplex geometry and the
//! scenario-subsampling oracle: a small linear program over the simplex with
//! one linear constraint, and stochastic runs on the CVaR benchmark.

use conex::conex::{run_conex, ConExParams, ScheduleKind};
use conex::geometry::{Composite, DistanceGenerator, FeasibleSet, Geometry};
use conex::metrics::optimality_and_infeasibility;
use conex::oracles::{
    oracle_second_moment_targets, verify_oracle_stats, NoiseConfig, NoiseLaw, Regime,
};
use conex::problems::{
    make_benchmark, Constraint, ConstrainedProblem, ConstraintConstants, ParamMap, SmoothFn,
};
use conex::reference::{grid_solve, GridSpec};

/// min x1 + 2 x2 over the 2-simplex subject to x1 <= 0.6. The optimum is
/// (0.6, 0.4) with value 1.4 and multiplier 1 (mixed support forces
/// c1 + y = c2).
fn simplex_lp() -> ConstrainedProblem {
    let g = Geometry::new(FeasibleSet::Simplex { dim: 2 }, DistanceGenerator::Entropy).unwrap();
    ConstrainedProblem::new(
        "simplex-lp",
        g,
        SmoothFn::new(|x| x[0] + 2.0 * x[1], |_| vec![1.0, 2.0]),
        Composite::zero(),
        0.0,
        0.0,
        0.0,
        vec![Constraint {
            f: SmoothFn::new(|x| x[0] - 0.6, |_| vec![1.0, 0.0]),
            chi: Composite::zero(),
            consts: ConstraintConstants {
                m_f: 1.0, // l-inf norm of the constraint gradient
                ..Default::default()
            },
        }],
    )
    .unwrap()
}

#[test]
fn entropy_geometry_run_converges_to_the_constrained_vertex() {
    let p = simplex_lp();
    let noise = NoiseConfig::deterministic(1);
    let mut params = ConExParams::new(3200, 2.0, ScheduleKind::Convex);
    params.y_norm_hint = Some(1.0);
    let res = run_conex(&p, &noise, &params, 0).unwrap();
    let (gap, infeas) = optimality_and_infeasibility(&p, &res.x_bar, 1.4);
    assert!(gap.abs() <= 6e-3, "gap {gap}");
    assert!(infeas <= 6e-3, "infeas {infeas}");
    assert!((res.y_last[0] - 1.0).abs() <= 1e-2, "dual {:?}", res.y_last);

    // the simplex lattice cross-checks the optimum
    let grid = grid_solve(
        &p,
        &GridSpec {
            lower: vec![0.0, 0.0],
            upper: vec![1.0, 1.0],
            step: 1e-3,
            slack: 1e-3,
        },
    )
    .unwrap();
    assert!((grid.value - 1.4).abs() <= grid.err_bound);
    assert!((grid.x[0] - 0.6).abs() < 2e-3);
}

#[test]
fn entropy_oracle_is_sharp_in_the_linf_norm() {
    let p = simplex_lp();
    let cfg = NoiseConfig::semi_stochastic(0.8, 1);
    let report = verify_oracle_stats(&p, &cfg, &[0.5, 0.5], 100_000, 3).unwrap();
    assert!(report.bias_ok && report.bound_ok && report.sharp_ok, "{report:?}");
    assert!((report.second_moment_g0 - 0.64).abs() / 0.64 <= 0.05);
}

#[test]
fn cvar_scenario_runs_converge_in_the_mean() {
    let p = make_benchmark("cvar-toy", &ParamMap::new()).unwrap();
    let grid = grid_solve(
        &p,
        &GridSpec {
            lower: vec![-1.0, -3.0],
            upper: vec![1.0, 3.0],
            step: 4e-3,
            slack: 4e-3,
        },
    )
    .unwrap();
    // oracle second moments at a probe point size the declared bounds
    let probe = NoiseConfig {
        regime: Regime::FullyStochastic,
        sigma0: 0.0,
        sigma: vec![0.0],
        sigma_f: 0.0,
        law: NoiseLaw::ScenarioSubsampling,
    };
    let (t0, tg, tf) = oracle_second_moment_targets(&p, &probe, &[0.0, 0.5]).unwrap();
    let cfg = NoiseConfig {
        regime: Regime::FullyStochastic,
        sigma0: (t0 * 4.0).sqrt(),
        sigma: vec![(tg[0] * 4.0).sqrt()],
        sigma_f: (tf * 4.0).sqrt(),
        law: NoiseLaw::ScenarioSubsampling,
    };
    let mean_at = |t: usize| -> f64 {
        (0..16)
            .map(|seed| {
                let mut params = ConExParams::new(t, 2.0, ScheduleKind::Convex);
                params.y_norm_hint = Some(1.0);
                let res = run_conex(&p, &cfg, &params, seed).unwrap();
                let (gap, infeas) = optimality_and_infeasibility(&p, &res.x_bar, grid.value);
                gap.max(infeas)
            })
            .sum::<f64>()
            / 16.0
    };
    let coarse = mean_at(250);
    let fine = mean_at(2000);
    assert!(fine < coarse, "no improvement: {coarse:.3e} -> {fine:.3e}");
    assert!(fine <= 0.1, "mean error {fine:.3e}");
}
