//! Independent reference solvers: exhaustive grid search, analytic KKT
//! triples for the canned benchmarks, a dual-bisection solver for
//! diagonal-quadratic problems over boxes, and a projected-subgradient
//! baseline. These supply ground truth for tests and stay independent of the
//! primal-dual solver they check.

use crate::error::{Error, Result};
use crate::geometry::FeasibleSet;
use crate::linalg;
use crate::problems::ConstrainedProblem;

/// Guard on the total number of grid evaluations.
pub const GRID_GUARD: u128 = 100_000_000;

#[derive(Debug, Clone)]
pub struct GridSpec {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub step: f64,
    /// Feasibility slack `||[psi]_+||_2 <= slack` for grid filtering;
    /// prevents discretization from emptying a nonempty feasible set.
    pub slack: f64,
}

#[derive(Debug, Clone)]
pub struct GridSolution {
    pub x: Vec<f64>,
    pub value: f64,
    pub infeasibility: f64,
    /// Estimated error versus the true optimum: local Lipschitz times the
    /// lattice spacing, plus the feasibility slack (which lets the lattice
    /// minimum sit slightly outside an active constraint).
    pub err_bound: f64,
}

/// Exhaustive minimization of `psi_0` over a lattice intersected with the
/// feasible set, keeping points with `||[psi]_+||_2 <= slack`.
pub fn grid_solve(p: &ConstrainedProblem, spec: &GridSpec) -> Result<GridSolution> {
    let n = p.dim();
    if n > 3 {
        return Err(Error::Config("grid_solve supports dimension <= 3".into()));
    }
    if !(spec.step > 0.0) {
        return Err(Error::Config("grid step must be positive".into()));
    }
    let mut counts = Vec::with_capacity(n);
    let mut total: u128 = 1;
    for j in 0..n {
        let span = spec.upper[j] - spec.lower[j];
        if span < 0.0 {
            return Err(Error::Config("grid bounds must satisfy lower <= upper".into()));
        }
        let c = (span / spec.step).floor() as u128 + 1;
        counts.push(c as usize);
        total = total.saturating_mul(c);
        if total > GRID_GUARD {
            return Err(Error::GridTooLarge { points: total, guard: GRID_GUARD });
        }
    }

    let mut best: Option<(f64, Vec<f64>, f64)> = None;
    let mut lipschitz: f64 = 0.0;
    let mut idx = vec![0usize; n];
    let mut x = vec![0.0; n];
    let grad_stride = (total / 100_000).max(1) as usize;
    let mut visit = 0usize;
    loop {
        for (j, xj) in x.iter_mut().enumerate() {
            *xj = (spec.lower[j] + idx[j] as f64 * spec.step).min(spec.upper[j]);
        }
        if p.geometry().contains(&x) {
            let infeas = p.infeasibility(&x);
            if infeas <= spec.slack {
                let v = p.psi0(&x);
                if best.as_ref().is_none_or(|(bv, _, _)| v < *bv) {
                    best = Some((v, x.clone(), infeas));
                }
            }
            if visit.is_multiple_of(grad_stride) {
                lipschitz = lipschitz.max(linalg::norm2(&p.psi0_subgrad(&x)));
            }
        }
        visit += 1;
        // odometer increment
        let mut j = 0;
        loop {
            idx[j] += 1;
            if idx[j] < counts[j] {
                break;
            }
            idx[j] = 0;
            j += 1;
            if j == n {
                return match best {
                    Some((value, x, infeasibility)) => Ok(GridSolution {
                        x,
                        value,
                        infeasibility,
                        err_bound: lipschitz * spec.step * (n as f64).sqrt() + spec.slack,
                    }),
                    None => Err(Error::EmptyFeasible { slack: spec.slack }),
                };
            }
        }
    }
}

/// Analytic KKT triple of `min 1/2 |x - a|^2  s.t. |x - b|^2 <= r^2`.
#[derive(Debug, Clone)]
pub struct BallProjectionSolution {
    pub x: Vec<f64>,
    pub y: f64,
    pub psi0: f64,
}

/// Radial projection: `x* = b + r (a - b) / |a - b|` when the constraint is
/// active, `x* = a, y* = 0` otherwise. The multiplier solves the stationarity
/// equation `(x* - a) + 2 y* (x* - b) = 0`.
pub fn analytic_ball_projection(a: &[f64], b: &[f64], r: f64) -> BallProjectionSolution {
    let dist = linalg::dist2(a, b);
    if dist <= r {
        return BallProjectionSolution {
            x: a.to_vec(),
            y: 0.0,
            psi0: 0.0,
        };
    }
    let s = r / dist;
    let x: Vec<f64> = b.iter().zip(a).map(|(bj, aj)| bj + s * (aj - bj)).collect();
    let y = (dist / r - 1.0) / 2.0;
    let gap = dist - r;
    BallProjectionSolution {
        x,
        y,
        psi0: 0.5 * gap * gap,
    }
}

/// Analytic KKT triple of
/// `min 1/2 |x - a|^2 + lambda |x|_1  s.t. |x|^2 <= r^2` (ball centered at
/// the origin). The KKT system collapses to soft-thresholding followed by a
/// radial scaling.
pub fn analytic_l1_ball_projection(a: &[f64], lambda: f64, r: f64) -> BallProjectionSolution {
    let soft: Vec<f64> = a
        .iter()
        .map(|&aj| crate::geometry::soft_threshold(aj, lambda))
        .collect();
    let norm = linalg::norm2(&soft);
    let (x, y) = if norm <= r {
        (soft, 0.0)
    } else {
        let scale = r / norm;
        let y = (norm / r - 1.0) / 2.0;
        (linalg::scale(&soft, scale), y)
    };
    let psi0 = 0.5 * linalg::dist2(&x, a).powi(2) + lambda * linalg::norm1(&x);
    BallProjectionSolution { x, y, psi0 }
}

#[derive(Debug, Clone)]
pub struct DiagQcqpSolution {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub value: f64,
}

const KKT_TOL: f64 = 1e-9;

/// Exact solver for diagonal-quadratic problems over a box with at most one
/// active quadratic constraint: enumerates active sets (none, or a single
/// constraint solved by dual bisection) and verifies the KKT system of every
/// candidate. Requires the problem's `quad` structure with a positive
/// definite (diagonal) objective.
pub fn solve_diag_qcqp(p: &ConstrainedProblem) -> Result<DiagQcqpSolution> {
    let quad = p
        .quad
        .as_ref()
        .ok_or_else(|| Error::Capability("exact solve needs diagonal-quadratic structure".into()))?;
    let (lower, upper) = match p.geometry().set() {
        FeasibleSet::Box { lower, upper } => (lower.clone(), upper.clone()),
        _ => return Err(Error::Capability("exact diagonal-quadratic solve needs a box".into())),
    };
    if quad.objective.q.iter().any(|&q| q <= 0.0) {
        return Err(Error::Capability(
            "exact solve needs a positive definite diagonal objective".into(),
        ));
    }
    let m = quad.constraints.len();
    let n = p.dim();

    // box-clamped minimizer of the weighted quadratic; exact for separable
    // strongly convex objectives
    let x_of = |y: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|j| {
                let mut qj = quad.objective.q[j];
                let mut cj = quad.objective.c[j];
                for (i, con) in quad.constraints.iter().enumerate() {
                    qj += y[i] * con.q[j];
                    cj += y[i] * con.c[j];
                }
                (-cj / qj).max(lower[j]).min(upper[j])
            })
            .collect()
    };

    let kkt_ok = |x: &[f64], y: &[f64]| -> bool {
        // feasibility + complementarity
        for (i, con) in quad.constraints.iter().enumerate() {
            let v = con.value(x);
            if v > KKT_TOL || (y[i] * v).abs() > KKT_TOL {
                return false;
            }
        }
        // stationarity with box normal cone, componentwise
        for j in 0..n {
            let mut g = quad.objective.q[j] * x[j] + quad.objective.c[j];
            for (i, con) in quad.constraints.iter().enumerate() {
                g += y[i] * (con.q[j] * x[j] + con.c[j]);
            }
            let at_lower = (x[j] - lower[j]).abs() <= 1e-11;
            let at_upper = (x[j] - upper[j]).abs() <= 1e-11;
            let ok = if at_lower {
                g >= -KKT_TOL
            } else if at_upper {
                g <= KKT_TOL
            } else {
                g.abs() <= KKT_TOL
            };
            if !ok {
                return false;
            }
        }
        true
    };

    // active set: none
    let y0 = vec![0.0; m];
    let x0 = x_of(&y0);
    if kkt_ok(&x0, &y0) {
        let value = p.psi0(&x0);
        return Ok(DiagQcqpSolution { x: x0, y: y0, value });
    }

    // active set: a single constraint, multiplier found by bisection on the
    // monotone dual path y -> psi_i(x(y))
    for i in 0..m {
        if quad.constraints[i].q.iter().any(|&q| q < 0.0) {
            continue; // nonconvex constraint: bisection path not monotone
        }
        let phi = |y: f64| -> f64 {
            let mut yv = vec![0.0; m];
            yv[i] = y;
            quad.constraints[i].value(&x_of(&yv))
        };
        if phi(0.0) <= KKT_TOL {
            continue; // constraint inactive on its own; covered by other sets
        }
        let mut hi = 1.0;
        let mut doubling_ok = false;
        for _ in 0..80 {
            if phi(hi) <= 0.0 {
                doubling_ok = true;
                break;
            }
            hi *= 2.0;
        }
        if !doubling_ok {
            continue; // constraint i cannot be satisfied alone
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if phi(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let mut y = vec![0.0; m];
        y[i] = 0.5 * (lo + hi);
        let x = x_of(&y);
        if kkt_ok(&x, &y) {
            let value = p.psi0(&x);
            return Ok(DiagQcqpSolution { x, y, value });
        }
    }

    Err(Error::SearchFailure(
        "no single-constraint active set satisfies the KKT system; \
         the instance needs a general solver"
            .into(),
    ))
}

/// Projected subgradient on the exact-penalty surrogate
/// `psi_0(x) + rho ||[psi(x)]_+||_2`, returning the averaged iterate. A
/// sanity baseline only.
pub fn projected_subgradient_baseline(
    p: &ConstrainedProblem,
    t: usize,
    rho: f64,
) -> Vec<f64> {
    let geom = p.geometry();
    let n = p.dim();
    let mut x = match geom.set() {
        FeasibleSet::Box { lower, upper } => lower
            .iter()
            .zip(upper)
            .map(|(l, u)| 0.5 * (l + u))
            .collect(),
        FeasibleSet::Ball { center, .. } => center.clone(),
        FeasibleSet::Simplex { dim } => vec![1.0 / *dim as f64; *dim],
    };
    if t == 0 {
        return x;
    }
    let d_x = geom.diameter();
    let mut avg = vec![0.0; n];
    for k in 0..t {
        let mut g = p.psi0_subgrad(&x);
        let psi = p.psi(&x);
        let infeas = linalg::positive_part_norm2(&psi);
        if rho > 0.0 && infeas > 0.0 {
            for (i, &v) in psi.iter().enumerate() {
                if v > 0.0 {
                    let gi = p.psi_subgrad(i, &x);
                    linalg::axpy(&mut g, rho * v / infeas, &gi);
                }
            }
        }
        let gnorm = linalg::norm2(&g).max(1e-12);
        let step = d_x / (gnorm * ((k + 1) as f64).sqrt());
        for j in 0..n {
            x[j] -= step * g[j];
        }
        x = geom.project(&x);
        linalg::axpy(&mut avg, 1.0, &x);
    }
    linalg::scale(&avg, 1.0 / t as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{make_benchmark, ParamMap};

    fn ball() -> ConstrainedProblem {
        make_benchmark("ball-projection", &ParamMap::new()).unwrap()
    }

    #[test]
    fn analytic_ball_projection_examples() {
        let s = analytic_ball_projection(&[1.0, 1.0], &[0.0, 0.0], 0.5);
        let e = 0.5 / f64::sqrt(2.0);
        assert!((s.x[0] - e).abs() < 1e-12 && (s.x[1] - e).abs() < 1e-12);
        // inactive constraint
        let s2 = analytic_ball_projection(&[0.1, 0.1], &[0.0, 0.0], 0.5);
        assert_eq!(s2.x, vec![0.1, 0.1]);
        assert_eq!(s2.y, 0.0);
    }

    #[test]
    fn analytic_triple_satisfies_stationarity() {
        let (a, b, r) = ([1.0, 1.0], [0.0, 0.0], 0.5);
        let s = analytic_ball_projection(&a, &b, r);
        // (x - a) + 2 y (x - b) = 0 componentwise
        for j in 0..2 {
            let res = (s.x[j] - a[j]) + 2.0 * s.y * (s.x[j] - b[j]);
            assert!(res.abs() < 1e-12);
        }
        // complementarity: constraint active
        let con = linalg::dot(&s.x, &s.x) - r * r;
        assert!(con.abs() < 1e-12);
    }

    #[test]
    fn grid_matches_analytic_ball_projection() {
        let p = ball();
        let opt = p.optimum.as_ref().unwrap();
        // tight slack keeps the lattice minimum near the active boundary
        let sol = grid_solve(
            &p,
            &GridSpec {
                lower: vec![-1.0, -1.0],
                upper: vec![1.0, 1.0],
                step: 1e-3,
                slack: 1e-4,
            },
        )
        .unwrap();
        assert!(linalg::dist2(&sol.x, &opt.x) < 2e-3);
        assert!((sol.value - opt.psi0).abs() <= sol.err_bound);

        // the loose default slack (step times constraint Lipschitz) stays
        // within the reported error bound as well
        let m_f = p.constraints()[0].consts.m_f;
        let sol = grid_solve(
            &p,
            &GridSpec {
                lower: vec![-1.0, -1.0],
                upper: vec![1.0, 1.0],
                step: 1e-3,
                slack: 1e-3 * m_f,
            },
        )
        .unwrap();
        assert!((sol.value - opt.psi0).abs() <= sol.err_bound);
    }

    #[test]
    fn grid_hits_on_grid_optimum_exactly() {
        use crate::geometry::{Composite, Geometry};
        use crate::problems::{ConstrainedProblem, SmoothFn};
        let g = Geometry::euclidean(FeasibleSet::Box {
            lower: vec![0.0],
            upper: vec![1.0],
        })
        .unwrap();
        let p = ConstrainedProblem::new(
            "quad1d",
            g,
            SmoothFn::new(|x| (x[0] - 0.5) * (x[0] - 0.5), |x| vec![2.0 * (x[0] - 0.5)]),
            Composite::zero(),
            2.0,
            0.0,
            0.0,
            vec![],
        )
        .unwrap();
        let sol = grid_solve(
            &p,
            &GridSpec {
                lower: vec![0.0],
                upper: vec![1.0],
                step: 0.1,
                slack: 0.0,
            },
        )
        .unwrap();
        assert!((sol.x[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn grid_infeasible_everywhere_errors() {
        use crate::geometry::{Composite, Geometry};
        use crate::problems::{Constraint, ConstraintConstants, ConstrainedProblem, SmoothFn};
        let g = Geometry::euclidean(FeasibleSet::Box {
            lower: vec![0.0],
            upper: vec![1.0],
        })
        .unwrap();
        let p = ConstrainedProblem::new(
            "infeasible",
            g,
            SmoothFn::zero(1),
            Composite::zero(),
            0.0,
            0.0,
            0.0,
            vec![Constraint {
                f: SmoothFn::new(|_| 1.0, |_| vec![0.0]),
                chi: Composite::zero(),
                consts: ConstraintConstants::default(),
            }],
        )
        .unwrap();
        assert!(matches!(
            grid_solve(
                &p,
                &GridSpec {
                    lower: vec![0.0],
                    upper: vec![1.0],
                    step: 0.1,
                    slack: 1e-6
                }
            ),
            Err(Error::EmptyFeasible { .. })
        ));
    }

    #[test]
    fn grid_guard_rejects_oversized_grids() {
        let p = ball();
        assert!(matches!(
            grid_solve(
                &p,
                &GridSpec {
                    lower: vec![-1.0, -1.0],
                    upper: vec![1.0, 1.0],
                    step: 1e-5,
                    slack: 1e-3
                }
            ),
            Err(Error::GridTooLarge { .. })
        ));
    }

    #[test]
    fn diag_qcqp_solver_matches_analytic_on_ball_projection() {
        let p = ball();
        let sol = solve_diag_qcqp(&p).unwrap();
        let opt = p.optimum.as_ref().unwrap();
        assert!(linalg::dist2(&sol.x, &opt.x) < 1e-9);
        assert!((sol.y[0] - opt.y[0]).abs() < 1e-8);
        assert!((sol.value - opt.psi0).abs() < 1e-10);
    }

    #[test]
    fn l1_analytic_matches_fine_grid() {
        let mut params = ParamMap::new();
        params.insert(
            "lambda".into(),
            crate::problems::ParamValue::Scalar(0.5),
        );
        let p = make_benchmark("nonsmooth-l1", &params).unwrap();
        let opt = p.optimum.as_ref().unwrap();
        // two-stage grid: coarse pass then a refined window
        let coarse = grid_solve(
            &p,
            &GridSpec {
                lower: vec![-1.0, -1.0],
                upper: vec![1.0, 1.0],
                step: 1e-2,
                slack: 3e-2,
            },
        )
        .unwrap();
        let fine = grid_solve(
            &p,
            &GridSpec {
                lower: coarse.x.iter().map(|v| v - 0.03).collect(),
                upper: coarse.x.iter().map(|v| v + 0.03).collect(),
                step: 1e-4,
                slack: 3e-4,
            },
        )
        .unwrap();
        assert!(
            linalg::dist2(&fine.x, &opt.x) < 3e-3,
            "grid {:?} vs analytic {:?}",
            fine.x,
            opt.x
        );
        assert!((fine.value - opt.psi0).abs() < 1e-3);
    }

    #[test]
    fn baseline_reaches_ball_projection_optimum() {
        let p = ball();
        let opt = p.optimum.as_ref().unwrap();
        let b = opt.y[0] + 1.0;
        let x = projected_subgradient_baseline(&p, 10_000, 2.0 * b);
        assert!(
            linalg::dist2(&x, &opt.x) < 1e-2,
            "baseline ended at {x:?}, optimum {:?}",
            opt.x
        );
    }

    #[test]
    fn baseline_zero_iterations_returns_start() {
        let p = ball();
        let x = projected_subgradient_baseline(&p, 0, 1.0);
        assert_eq!(x, vec![0.0, 0.0]);
    }

    #[test]
    fn baseline_without_penalty_ignores_the_constraint() {
        // rho = 0 is plain subgradient descent on psi_0, whose unconstrained
        // minimizer over the box is the corner at the target
        let p = ball();
        let x = projected_subgradient_baseline(&p, 20_000, 0.0);
        assert!(linalg::dist2(&x, &[1.0, 1.0]) < 5e-2, "ended at {x:?}");
        // well outside the ball: the constraint was indeed ignored
        assert!(p.infeasibility(&x) > 0.5);
    }

    #[test]
    fn analytic_triples_have_machine_precision_residuals() {
        use crate::proxpoint::kkt_residual;
        let p = ball();
        let opt = p.optimum.as_ref().unwrap();
        let r = kkt_residual(&p, &opt.x, &opt.y).unwrap();
        assert!(r.feasibility <= 1e-12);
        assert!(r.complementarity <= 1e-12);
        assert!(r.stationarity <= 1e-12);

        let mut params = ParamMap::new();
        params.insert("lambda".into(), crate::problems::ParamValue::Scalar(0.7));
        params.insert("a".into(), crate::problems::ParamValue::Vector(vec![1.2, 0.3]));
        params.insert("r".into(), crate::problems::ParamValue::Scalar(0.3));
        let l1 = make_benchmark("nonsmooth-l1", &params).unwrap();
        let opt = l1.optimum.as_ref().unwrap();
        let r = kkt_residual(&l1, &opt.x, &opt.y).unwrap();
        assert!(r.feasibility <= 1e-12 && r.complementarity <= 1e-12);
        assert!(r.stationarity <= 1e-12, "stationarity {}", r.stationarity);
    }

    #[test]
    fn grid_value_bound_holds_on_qcqp() {
        let p = make_benchmark("qcqp-convex", &ParamMap::new()).unwrap();
        let opt = p.optimum.as_ref().unwrap();
        let sol = grid_solve(
            &p,
            &GridSpec {
                lower: vec![-1.0, -1.0],
                upper: vec![1.0, 1.0],
                step: 2e-3,
                slack: 2e-3,
            },
        )
        .unwrap();
        assert!((sol.value - opt.psi0).abs() <= sol.err_bound);
    }
}
