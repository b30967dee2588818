//! Optimality and feasibility measures, the primal-dual gap diagnostic and
//! log-log rate-slope fitting for the benchmark harness.

use crate::error::{Error, Result};
use crate::linalg;
use crate::problems::ConstrainedProblem;

/// Floor applied to nonpositive values before log-log fitting.
pub const RATE_VALUE_FLOOR: f64 = 1e-16;

/// One point of a convergence curve.
#[derive(Debug, Clone, Copy)]
pub struct RatePoint {
    pub budget: usize,
    pub value: f64,
    pub seeds: usize,
    pub std_err: f64,
    /// Set when the raw value was nonpositive and got floored.
    pub clipped: bool,
}

impl RatePoint {
    pub fn new(budget: usize, value: f64) -> Self {
        RatePoint::aggregated(budget, value, 1, 0.0)
    }

    /// A seed-averaged point; nonpositive means are floored and flagged.
    pub fn aggregated(budget: usize, value: f64, seeds: usize, std_err: f64) -> Self {
        let clipped = !(value > RATE_VALUE_FLOOR);
        RatePoint {
            budget,
            value: if clipped { RATE_VALUE_FLOOR } else { value },
            seeds,
            std_err,
            clipped,
        }
    }

    /// Arithmetic mean over per-seed values at one budget.
    pub fn from_seed_values(budget: usize, values: &[f64]) -> Self {
        let k = values.len().max(1) as f64;
        let mean = values.iter().sum::<f64>() / k;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / k;
        RatePoint::aggregated(budget, mean, values.len(), (var / k).sqrt())
    }
}

/// Optimality gap and constraint violation against a reference optimal value.
/// The gap may be negative for infeasible points and is reported as-is.
pub fn optimality_and_infeasibility(
    p: &ConstrainedProblem,
    x: &[f64],
    psi0_ref: f64,
) -> (f64, f64) {
    let gap = p.psi0(x) - psi0_ref;
    let infeas = p.infeasibility(x);
    (gap, infeas)
}

/// Primal-dual gap `Q(z, z_bar) = L(x, y_bar) - L(x_bar, y)` for the
/// Lagrangian `L(x, y) = psi_0(x) + <y, psi(x)>`. Diagnostic only.
pub fn gap_function(
    p: &ConstrainedProblem,
    z: (&[f64], &[f64]),
    z_bar: (&[f64], &[f64]),
) -> Result<f64> {
    let (x, y) = z;
    let (x_bar, y_bar) = z_bar;
    if y.iter().any(|&v| v < 0.0) || y_bar.iter().any(|&v| v < 0.0) {
        return Err(Error::Precondition("gap function needs nonnegative duals".into()));
    }
    let lagrangian = |x: &[f64], y: &[f64]| p.psi0(x) + linalg::dot(y, &p.psi(x));
    Ok(lagrangian(x, y_bar) - lagrangian(x_bar, y))
}

#[derive(Debug, Clone, Copy)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Least-squares fit of `ln(value)` against `ln(budget)`.
pub fn loglog_slope(points: &[RatePoint]) -> Result<SlopeFit> {
    if points.len() < 4 {
        return Err(Error::Config(format!(
            "slope fit needs at least 4 points, got {}",
            points.len()
        )));
    }
    for w in points.windows(2) {
        if w[1].budget <= w[0].budget {
            return Err(Error::Config("slope fit needs strictly increasing budgets".into()));
        }
    }
    let xs: Vec<f64> = points.iter().map(|p| (p.budget as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.value.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    Ok(SlopeFit { slope, intercept, r2 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{make_benchmark, ParamMap};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ball() -> ConstrainedProblem {
        make_benchmark("ball-projection", &ParamMap::new()).unwrap()
    }

    #[test]
    fn gap_and_infeasibility_examples() {
        let p = ball();
        let opt = p.optimum.as_ref().unwrap();
        let (gap, infeas) = optimality_and_infeasibility(&p, &opt.x, opt.psi0);
        assert!(gap.abs() < 1e-12);
        assert!(infeas < 1e-9);

        let (gap, infeas) = optimality_and_infeasibility(&p, &[0.0, 0.0], opt.psi0);
        assert!((gap - (1.0 - opt.psi0)).abs() < 1e-9);
        assert_eq!(infeas, 0.0);
        assert!((gap - 0.5821067811865475).abs() < 1e-9);
    }

    #[test]
    fn positive_part_infeasibility() {
        // psi = (-1, 2) -> infeasibility 2
        assert_eq!(linalg::positive_part_norm2(&[-1.0, 2.0]), 2.0);
    }

    #[test]
    fn gap_function_properties() {
        let p = ball();
        let opt = p.optimum.as_ref().unwrap();
        let z_star = (opt.x.as_slice(), opt.y.as_slice());

        // equal arguments give zero
        let q = gap_function(&p, z_star, z_star).unwrap();
        assert!(q.abs() < 1e-12);

        // against the saddle point the gap is nonnegative for feasible z,
        // on every canned convex benchmark with a reference saddle
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let canned = [
            ball(),
            make_benchmark("nonsmooth-l1", &ParamMap::new()).unwrap(),
            make_benchmark("qcqp-convex", &ParamMap::new()).unwrap(),
        ];
        for bench in &canned {
            let opt = bench.optimum.as_ref().unwrap();
            let z_ref = (opt.x.as_slice(), opt.y.as_slice());
            for _ in 0..100 {
                let x = bench.geometry().set().sample(&mut rng);
                let y: Vec<f64> = (0..bench.num_constraints())
                    .map(|_| rng.random_range(0.0..2.0))
                    .collect();
                let q = gap_function(bench, (&x, &y), z_ref).unwrap();
                assert!(q >= -1e-9, "{}: gap {q} at {x:?}", bench.name);
            }
        }

        // with zero duals the gap reduces to an objective difference
        let x1 = [0.2, 0.1];
        let x2 = [-0.1, 0.3];
        let q = gap_function(&p, (&x1, &[0.0]), (&x2, &[0.0])).unwrap();
        assert!((q - (p.psi0(&x1) - p.psi0(&x2))).abs() < 1e-12);
    }

    #[test]
    fn slope_of_exact_power_laws() {
        let mk = |pow: f64| -> Vec<RatePoint> {
            (0..6)
                .map(|k| {
                    let t = 100 * (1 << k);
                    RatePoint::new(t, 3.0 * (t as f64).powf(pow))
                })
                .collect()
        };
        let fit = loglog_slope(&mk(-1.0)).unwrap();
        assert!((fit.slope + 1.0).abs() < 1e-12);
        let fit = loglog_slope(&mk(-2.0)).unwrap();
        assert!((fit.slope + 2.0).abs() < 1e-12);
        assert!(fit.r2 > 1.0 - 1e-12);
    }

    #[test]
    fn slope_with_noise_stays_near_half() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let points: Vec<RatePoint> = (0..8)
            .map(|k| {
                let t = 50 * (1 << k);
                let noise: f64 = 1.0 + 0.01 * rng.random_range(-1.0..1.0);
                RatePoint::new(t, 2.0 / (t as f64).sqrt() * noise)
            })
            .collect();
        let fit = loglog_slope(&points).unwrap();
        assert!(fit.slope <= -0.4 && fit.slope >= -0.6, "slope {}", fit.slope);
    }

    #[test]
    fn slope_is_scale_invariant() {
        let points: Vec<RatePoint> = (0..5)
            .map(|k| RatePoint::new(10 * (1 << k), 1.0 / (10 * (1 << k)) as f64))
            .collect();
        let scaled: Vec<RatePoint> = points
            .iter()
            .map(|p| RatePoint::new(p.budget, p.value * 1234.5))
            .collect();
        let a = loglog_slope(&points).unwrap();
        let b = loglog_slope(&scaled).unwrap();
        assert!((a.slope - b.slope).abs() < 1e-12);
    }

    #[test]
    fn slope_needs_enough_points() {
        let points: Vec<RatePoint> = (0..3).map(|k| RatePoint::new(1 + k, 1.0)).collect();
        assert!(loglog_slope(&points).is_err());
    }

    #[test]
    fn nonpositive_values_clip_with_flag() {
        let p = RatePoint::new(10, 0.0);
        assert!(p.clipped);
        assert_eq!(p.value, RATE_VALUE_FLOOR);
    }
}
