//! Constraint-extrapolation primal-dual solver for convex composite problems
//! with functional constraints.
//!
//! Each iteration forms an extrapolated linearization of the constraints,
//! takes a projected dual ascent step, and takes a Bregman prox step on the
//! primal using stochastic subgradients. Two published stepsize schedules are
//! provided (strongly convex and merely convex), together with the
//! iteration-count calculators that invert their convergence bounds.

use crate::error::{Error, Result};
use crate::geometry::ProxRequest;
use crate::linalg;
use crate::oracles::{NoiseConfig, OracleSample, OracleStream};
use crate::problems::{AggregatedConstants, ConstrainedProblem};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleKind {
    /// Accelerated schedule; requires `alpha_0 > 0`.
    StronglyConvex,
    /// Constant schedule with horizon-dependent stepsizes.
    Convex,
}

impl ScheduleKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ScheduleKind::StronglyConvex => "strongly-convex",
            ScheduleKind::Convex => "convex",
        }
    }
}

/// Which nonsmoothness constant enters the convex schedule: the sharp one
/// (needs a dual-norm estimate) or the computable surrogate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HKnob {
    /// `H_* ` evaluated with a supplied `|y*|` estimate.
    Star,
    /// `H_B = H_0 + B H_f`.
    B,
}

/// Solver parameters.
#[derive(Debug, Clone)]
pub struct ConExParams {
    /// Iteration budget `T >= 1`.
    pub budget: usize,
    /// Dual-bound constant `B >= 1`.
    pub b: f64,
    pub schedule: ScheduleKind,
    pub h_knob: HKnob,
    /// Floor substituted when the selected nonsmoothness constant is zero;
    /// keeps the convex schedule well defined on smooth deterministic
    /// problems at the cost of the faster rate.
    pub h_floor: f64,
    /// Estimate of the optimal dual norm, needed by the `Star` knob and by
    /// the iteration-count calculators.
    pub y_norm_hint: Option<f64>,
    /// Start point; defaults to the feasible-set anchor (box/ball center,
    /// simplex barycenter).
    pub x0: Option<Vec<f64>>,
    /// Record per-iteration `(gamma, eta, tau, theta)`.
    pub record_schedule: bool,
    /// When positive, evaluate objective and infeasibility of the running
    /// average and the current iterate at this many evenly spaced
    /// checkpoints.
    pub checkpoint_evals: usize,
}

impl ConExParams {
    pub fn new(budget: usize, b: f64, schedule: ScheduleKind) -> Self {
        ConExParams {
            budget,
            b,
            schedule,
            h_knob: HKnob::B,
            h_floor: 0.0,
            y_norm_hint: None,
            x0: None,
            record_schedule: false,
            checkpoint_evals: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.budget == 0 {
            return Err(Error::Config("iteration budget must be >= 1".into()));
        }
        if !(self.b >= 1.0) {
            return Err(Error::Config(format!("dual bound B must be >= 1, got {}", self.b)));
        }
        if self.h_floor < 0.0 {
            return Err(Error::Config("h_floor must be nonnegative".into()));
        }
        Ok(())
    }
}

/// One stepsize tuple.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchedulePoint {
    pub gamma: f64,
    pub eta: f64,
    pub tau: f64,
    pub theta: f64,
}

/// Accelerated schedule for `alpha_0 > 0`:
///
/// ```text
/// gamma_t = t + t0 + 2                 eta_t = alpha_0 (t + t0 + 1) / 2
/// theta_t = (t + t0 + 1)/(t + t0 + 2)
/// tau_t   = max{32 M^2/alpha_0, 384 |sigma|^2 T/alpha_0,
///               sigma_Xf T^{3/2}/(B sqrt(t0 + 2))} / (t + 1)
/// ```
pub fn schedule_strongly_convex(
    t: usize,
    horizon: usize,
    b: f64,
    agg: &AggregatedConstants,
    noise: &NoiseConfig,
) -> Result<SchedulePoint> {
    let t0 = agg.t0(b)?;
    let tf = t as f64;
    let big_t = horizon as f64;
    let sigma_norm = noise.sigma_norm();
    let sxf = agg.sigma_xf(noise.sigma_f, sigma_norm);
    let tau_num = (32.0 * agg.m_big * agg.m_big / agg.alpha0)
        .max(384.0 * sigma_norm * sigma_norm * big_t / agg.alpha0)
        .max(sxf * big_t.powf(1.5) / (b * (t0 + 2.0).sqrt()));
    Ok(SchedulePoint {
        gamma: tf + t0 + 2.0,
        eta: agg.alpha0 * (tf + t0 + 1.0) / 2.0,
        tau: tau_num / (tf + 1.0),
        theta: (tf + t0 + 1.0) / (tf + t0 + 2.0),
    })
}

/// Effective nonsmoothness constant entering the convex schedule.
pub fn effective_h(
    agg: &AggregatedConstants,
    b: f64,
    h_knob: HKnob,
    h_floor: f64,
    y_norm_hint: Option<f64>,
) -> Result<f64> {
    let h = match h_knob {
        HKnob::B => agg.h_b(b),
        HKnob::Star => {
            let yn = y_norm_hint.ok_or_else(|| {
                Error::Config("the sharp nonsmoothness knob needs a dual-norm estimate".into())
            })?;
            agg.h_star(yn, b)
        }
    };
    Ok(if h == 0.0 { h_floor } else { h })
}

/// Constant schedule for the merely convex case:
///
/// ```text
/// gamma = theta = 1,    eta_t = L_0 + B L_f + eta,    tau_t = tau
/// eta = max{sqrt(2T (H^2 + sigma_0^2 + 48 B^2 |sigma|^2))/D_X,
///           6 B max{M, 4|sigma|}/D_X}
/// tau = max{sqrt(96T) sigma_Xf / B, 2 D_X max{M, 4|sigma|}/B}
/// ```
pub fn schedule_convex(
    horizon: usize,
    b: f64,
    agg: &AggregatedConstants,
    noise: &NoiseConfig,
    h_eff: f64,
) -> Result<SchedulePoint> {
    if !(agg.d_x > 0.0) {
        return Err(Error::Schedule("degenerate feasible set: D_X must be positive".into()));
    }
    let big_t = horizon as f64;
    let sigma_norm = noise.sigma_norm();
    let sxf = agg.sigma_xf(noise.sigma_f, sigma_norm);
    let mix = agg.m_big.max(4.0 * sigma_norm);
    let eta_add = ((2.0
        * big_t
        * (h_eff * h_eff + noise.sigma0 * noise.sigma0 + 48.0 * b * b * sigma_norm * sigma_norm))
        .sqrt()
        / agg.d_x)
        .max(6.0 * b * mix / agg.d_x);
    let tau = ((96.0 * big_t).sqrt() * sxf / b).max(2.0 * agg.d_x * mix / b);
    Ok(SchedulePoint {
        gamma: 1.0,
        eta: agg.l0 + b * agg.l_f + eta_add,
        tau,
        theta: 1.0,
    })
}

/// Extrapolated constraint estimate
/// `s_t = (1 + theta)(chi(x_t) + l_F(x_t)) - theta (chi(x_{t-1}) + l_F(x_{t-1}))`.
pub fn extrapolate_constraints(
    chi_cur: &[f64],
    ell_cur: &[f64],
    chi_prev: &[f64],
    ell_prev: &[f64],
    theta: f64,
) -> Vec<f64> {
    chi_cur
        .iter()
        .zip(ell_cur)
        .zip(chi_prev.iter().zip(ell_prev))
        .map(|((c, e), (cp, ep))| (1.0 + theta) * (c + e) - theta * (cp + ep))
        .collect()
}

/// Stochastic linearization `l_F(x) = F + G^T (x - base)` from a sample
/// drawn at `base`.
pub fn linearize_constraints(sample: &OracleSample, base: &[f64], x: &[f64]) -> Vec<f64> {
    let step = linalg::sub(x, base);
    sample
        .f
        .iter()
        .zip(&sample.g)
        .map(|(fi, gi)| fi + linalg::dot(gi, &step))
        .collect()
}

/// Projected dual ascent `y_next = [y + s / tau]_+`, the closed form of the
/// nonnegatively constrained quadratic prox on the dual.
pub fn dual_ascent(y: &[f64], s: &[f64], tau: f64) -> Result<Vec<f64>> {
    if y.is_empty() {
        return Ok(Vec::new());
    }
    if !(tau > 0.0) {
        return Err(Error::Schedule(format!("dual stepsize must be positive, got {tau}")));
    }
    Ok(y.iter().zip(s).map(|(yi, si)| (yi + si / tau).max(0.0)).collect())
}

/// Primal step: composite prox at `center` with the dual-weighted sampled
/// subgradient `G_0 + sum_i y_i G_i` as the linear term.
pub fn primal_prox(
    p: &ConstrainedProblem,
    y_next: &[f64],
    sample: &OracleSample,
    center: &[f64],
    eta: f64,
) -> Result<Vec<f64>> {
    if y_next.iter().any(|&v| v < 0.0) {
        return Err(Error::Precondition("primal prox needs nonnegative dual weights".into()));
    }
    let mut v = sample.g0.clone();
    for (gi, &yi) in sample.g.iter().zip(y_next) {
        linalg::axpy(&mut v, yi, gi);
    }
    let chis: Vec<_> = p.constraints().iter().map(|c| c.chi.clone()).collect();
    p.geometry().prox_step(&ProxRequest {
        weights: y_next,
        linear: &v,
        center,
        eta,
        chi0: p.chi0(),
        chis: &chis,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct CheckpointEval {
    pub iteration: usize,
    pub psi0_avg: f64,
    pub infeas_avg: f64,
    pub psi0_last: f64,
    pub infeas_last: f64,
}

/// Solver output: weighted average, last iterates and optional traces.
#[derive(Debug, Clone)]
pub struct ConExResult {
    pub x_bar: Vec<f64>,
    pub x_last: Vec<f64>,
    pub y_last: Vec<f64>,
    pub iterations: usize,
    pub checkpoints: Vec<CheckpointEval>,
    pub schedule_trace: Vec<SchedulePoint>,
}

/// Relative tolerance for the per-iteration schedule-condition checks.
const SCHEDULE_COND_TOL: f64 = 1e-9;

fn check_schedule_conditions(
    prev: &SchedulePoint,
    cur: &SchedulePoint,
    alpha0: f64,
    t: usize,
) -> Result<()> {
    let ok_theta = (cur.gamma * cur.theta - prev.gamma).abs()
        <= SCHEDULE_COND_TOL * prev.gamma.max(1.0);
    let ok_tau = cur.gamma * cur.tau <= prev.gamma * prev.tau * (1.0 + SCHEDULE_COND_TOL);
    let ok_eta =
        cur.gamma * cur.eta <= prev.gamma * (prev.eta + alpha0) * (1.0 + SCHEDULE_COND_TOL);
    if ok_theta && ok_tau && ok_eta {
        Ok(())
    } else {
        Err(Error::Schedule(format!(
            "schedule conditions violated at iteration {t}: \
             gamma*theta={} vs {}, gamma*tau={} vs {}, gamma*eta={} vs {}",
            cur.gamma * cur.theta,
            prev.gamma,
            cur.gamma * cur.tau,
            prev.gamma * prev.tau,
            cur.gamma * cur.eta,
            prev.gamma * (prev.eta + alpha0),
        )))
    }
}

fn default_start(p: &ConstrainedProblem) -> Vec<f64> {
    use crate::geometry::FeasibleSet;
    match p.geometry().set() {
        FeasibleSet::Box { lower, upper } => lower
            .iter()
            .zip(upper)
            .map(|(l, u)| 0.5 * (l + u))
            .collect(),
        FeasibleSet::Ball { center, .. } => center.clone(),
        FeasibleSet::Simplex { dim } => vec![1.0 / *dim as f64; *dim],
    }
}

/// Runs the constraint-extrapolation method for `params.budget` iterations
/// with `y_0 = 0` and warm-started linearization caches. Uses two
/// conditionally independent oracle draws per iteration: one for the primal
/// step, one for the next linearization.
pub fn run_conex(
    p: &ConstrainedProblem,
    noise: &NoiseConfig,
    params: &ConExParams,
    seed: u64,
) -> Result<ConExResult> {
    params.validate()?;
    noise.validate(p.num_constraints())?;
    let agg = p.aggregate_constants();
    let m = p.num_constraints();
    let n = p.dim();
    let horizon = params.budget;
    let geom = p.geometry();

    let h_eff = match params.schedule {
        ScheduleKind::Convex => {
            effective_h(&agg, params.b, params.h_knob, params.h_floor, params.y_norm_hint)?
        }
        ScheduleKind::StronglyConvex => 0.0,
    };
    let schedule_at = |t: usize| -> Result<SchedulePoint> {
        match params.schedule {
            ScheduleKind::StronglyConvex => {
                schedule_strongly_convex(t, horizon, params.b, &agg, noise)
            }
            ScheduleKind::Convex => schedule_convex(horizon, params.b, &agg, noise, h_eff),
        }
    };
    // curvature margin used by the analysis; guard custom-schedule misuse
    if m > 0 {
        let sp0 = schedule_at(0)?;
        if sp0.eta - (agg.l0 + params.b * agg.l_f) <= 0.0 {
            return Err(Error::Schedule(
                "effective curvature margin eta - L_0 - B L_f is nonpositive; \
                 raise h_floor or B"
                    .into(),
            ));
        }
    }

    let x0 = match &params.x0 {
        Some(x) => {
            if !geom.contains(x) {
                return Err(Error::Precondition("start point lies outside the feasible set".into()));
            }
            x.clone()
        }
        None => default_start(p),
    };

    let stream = OracleStream::new(seed);
    let chis: Vec<_> = p.constraints().iter().map(|c| c.chi.clone()).collect();

    let mut x_prev = x0.clone();
    let mut x = x0.clone();
    let mut y = vec![0.0; m];
    // warm start: the draw at x_0 serves both l_F(x_0) and l_F(x_1)
    let mut lin_sample = stream.sample(p, noise, &x0, 0).map_err(|e| e.at_iteration(0))?;
    let mut ell_prev = lin_sample.f.clone();
    let mut chi_prev = p.chi_values(&x0);

    let mut weighted_sum = vec![0.0; n];
    let mut weight_total = 0.0;
    let mut prev_point: Option<SchedulePoint> = None;
    let mut schedule_trace = Vec::new();
    let mut checkpoints = Vec::new();
    let checkpoint_stride = horizon
        .checked_div(params.checkpoint_evals)
        .map_or(0, |s| s.max(1));

    for t in 0..horizon {
        let sp = schedule_at(t).map_err(|e| e.at_iteration(t))?;
        if let Some(prev) = &prev_point {
            check_schedule_conditions(prev, &sp, agg.alpha0, t).map_err(|e| e.at_iteration(t))?;
        }
        if params.record_schedule {
            schedule_trace.push(sp);
        }

        if m > 0 {
            let ell_cur = linearize_constraints(&lin_sample, &x_prev, &x);
            let chi_cur = p.chi_values(&x);
            let s = extrapolate_constraints(&chi_cur, &ell_cur, &chi_prev, &ell_prev, sp.theta);
            y = dual_ascent(&y, &s, sp.tau).map_err(|e| e.at_iteration(t))?;
            debug_assert!(y.iter().all(|&v| v >= 0.0));
            ell_prev = ell_cur;
            chi_prev = chi_cur;
        }

        let grad_sample = stream
            .sample(p, noise, &x, 2 * t as u64 + 1)
            .map_err(|e| e.at_iteration(t))?;
        let mut v = grad_sample.g0;
        for (gi, &yi) in grad_sample.g.iter().zip(&y) {
            linalg::axpy(&mut v, yi, gi);
        }
        // primal_prox, with the composite handles hoisted out of the loop
        let x_next = geom
            .prox_step(&ProxRequest {
                weights: &y,
                linear: &v,
                center: &x,
                eta: sp.eta,
                chi0: p.chi0(),
                chis: &chis,
            })
            .map_err(|e| e.at_iteration(t))?;
        debug_assert!(geom.contains(&x_next));

        if t + 1 < horizon {
            lin_sample = stream
                .sample(p, noise, &x, 2 * t as u64 + 2)
                .map_err(|e| e.at_iteration(t))?;
        }
        x_prev = std::mem::replace(&mut x, x_next);
        linalg::axpy(&mut weighted_sum, sp.gamma, &x);
        weight_total += sp.gamma;
        prev_point = Some(sp);

        if checkpoint_stride > 0 && ((t + 1).is_multiple_of(checkpoint_stride) || t + 1 == horizon)
        {
            let x_bar = linalg::scale(&weighted_sum, 1.0 / weight_total);
            checkpoints.push(CheckpointEval {
                iteration: t + 1,
                psi0_avg: p.psi0(&x_bar),
                infeas_avg: p.infeasibility(&x_bar),
                psi0_last: p.psi0(&x),
                infeas_last: p.infeasibility(&x),
            });
        }
    }

    Ok(ConExResult {
        x_bar: linalg::scale(&weighted_sum, 1.0 / weight_total),
        x_last: x,
        y_last: y,
        iterations: horizon,
        checkpoints,
        schedule_trace,
    })
}

/// What the iteration-count calculator targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ComplexityTarget {
    /// `(eps, eps)`-optimality of the averaged iterate.
    AveragedSolution,
    /// Bregman distance of the last iterate to the optimum (strongly convex
    /// schedule only).
    LastIterateDistance,
}

/// Evaluates the published worst-case iteration counts for an
/// `(eps, eps)`-optimal solution (or the last-iterate distance target),
/// rounded up to an integer. All constants must be supplied; the dual-norm
/// estimate is mandatory.
#[allow(clippy::too_many_arguments)]
pub fn iterations_for_accuracy(
    eps: f64,
    agg: &AggregatedConstants,
    noise: &NoiseConfig,
    schedule: ScheduleKind,
    b: f64,
    y_norm_estimate: Option<f64>,
    h_knob: HKnob,
    h_floor: f64,
    target: ComplexityTarget,
) -> Result<usize> {
    if !(eps > 0.0) {
        return Err(Error::Config(format!("accuracy must be positive, got {eps}")));
    }
    if !(b >= 1.0) {
        return Err(Error::Config("dual bound B must be >= 1".into()));
    }
    let yn = y_norm_estimate
        .ok_or_else(|| Error::Config("iteration counts need a dual-norm estimate".into()))?;
    let sigma_norm = noise.sigma_norm();
    let sigma0 = noise.sigma0;
    let sxf = agg.sigma_xf(noise.sigma_f, sigma_norm);
    let d = agg.d_x;
    let m_big = agg.m_big;
    let hs = agg.h_star(yn, b);

    let t = match schedule {
        ScheduleKind::StronglyConvex => {
            let t0 = agg.t0(b)?;
            let zeta = agg.zeta_strongly_convex(b, yn, sigma0, sigma_norm, noise.sigma_f)?;
            let noise_mix =
                zeta * zeta + hs * hs + 144.0 * (t0 + 2.0) * (yn + 1.0).powi(2) * sigma_norm * sigma_norm;
            match target {
                ComplexityTarget::AveragedSolution => {
                    let t1 = (5.0 * agg.alpha0 * (t0 + 2.0) * (t0 + 1.0) * d * d / eps
                        + 960.0 * (t0 + 2.0) * (yn + 1.0).powi(2) * m_big * m_big
                            / (agg.alpha0 * eps))
                        .sqrt();
                    let t2 = (65.0 * b * sxf * (t0 + 2.0).powf(1.5) / eps).powf(2.0 / 3.0);
                    let t3 = 80.0 * noise_mix / (agg.alpha0 * eps);
                    let t4 = 30.0 * (yn + 1.0).powi(2) * sxf * (t0 + 2.0) / (b * eps * eps);
                    let t5 = (130.0 * b * sxf / 3.0).powi(2) * (t0 + 2.0) / (eps * eps);
                    t1.max(t2).max(t3).max(t4).max(t5)
                }
                ComplexityTarget::LastIterateDistance => {
                    let a2 = agg.alpha0 * agg.alpha0;
                    let t1 = (5.0 * (t0 + 2.0) * (t0 + 1.0) * d * d / eps
                        + 960.0 * (t0 + 2.0) * (yn + 1.0).powi(2) * m_big * m_big / (a2 * eps))
                        .sqrt();
                    let t2 =
                        (60.0 * b * sxf * (t0 + 2.0).powf(1.5) / (agg.alpha0 * eps)).powf(2.0 / 3.0);
                    let t3 = 80.0 * noise_mix / (a2 * eps);
                    let t4 = (5.0 * yn * yn * sxf / (b * agg.alpha0)).powi(2) * (t0 + 2.0)
                        / (eps * eps);
                    let t5 = (40.0 * b * sxf / agg.alpha0).powi(2) * (t0 + 2.0) / (eps * eps);
                    t1.max(t2).max(t3).max(t4).max(t5)
                }
            }
        }
        ScheduleKind::Convex => {
            if target == ComplexityTarget::LastIterateDistance {
                return Err(Error::Config(
                    "last-iterate distance counts exist only for the strongly convex schedule"
                        .into(),
                ));
            }
            let h_sched = effective_h(agg, b, h_knob, h_floor, Some(yn))?;
            let zeta = agg.zeta_convex(b, yn, sigma0, sigma_norm);
            let denom_sq = h_sched * h_sched + sigma0 * sigma0 + 48.0 * b * b * sigma_norm * sigma_norm;
            let t1 = (3.0 * (agg.l0 + b * agg.l_f) * d * d
                + f64::max(36.0 * m_big, 144.0 * sigma_norm) * (yn + 1.0) * d)
                / eps;
            let t2 = (36.0 * 6.0_f64.sqrt() * (yn + 1.0).powi(2) / b
                + 13.0 * 3.0_f64.sqrt() * b / (4.0 * 2.0_f64.sqrt()))
            .powi(2)
                * sxf
                * sxf
                / (eps * eps);
            let t3 = if denom_sq > 0.0 {
                let bracket = d * denom_sq.sqrt() + d * (zeta * zeta + hs * hs) / denom_sq.sqrt();
                18.0 * bracket * bracket / (eps * eps)
            } else if zeta == 0.0 && hs == 0.0 {
                0.0
            } else {
                return Err(Error::Config(
                    "the schedule nonsmoothness constant is zero while the sharp one is not; \
                     set a positive h_floor"
                        .into(),
                ));
            };
            t1.max(t2).max(t3)
        }
    };
    Ok((t.ceil() as usize).max(1))
}
