//! The composite constrained problem model
//!
//! ```text
//! min_{x in X}  psi_0(x) = f_0(x) + chi_0(x)
//! s.t.          psi_i(x) = f_i(x) + chi_i(x) <= 0,   i = 1..m
//! ```
//!
//! together with the smoothness / nonsmoothness / Lipschitz constants each
//! solver schedule consumes, and desk-scale benchmark generators with known
//! optima or reference-solvable structure.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::{Composite, DistanceGenerator, FeasibleSet, Geometry};
use crate::linalg;
use crate::reference;

type ValueFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type GradFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// A smooth-ish function given by value and subgradient callables. For
/// differentiable functions the callable returns the gradient; at kinks it
/// must return the minimal-Euclidean-norm subgradient.
#[derive(Clone)]
pub struct SmoothFn {
    value: ValueFn,
    subgrad: GradFn,
}

impl SmoothFn {
    pub fn new(
        value: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        subgrad: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        SmoothFn {
            value: Arc::new(value),
            subgrad: Arc::new(subgrad),
        }
    }

    pub fn zero(n: usize) -> Self {
        SmoothFn::new(|_| 0.0, move |_| vec![0.0; n])
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }

    pub fn subgrad(&self, x: &[f64]) -> Vec<f64> {
        (self.subgrad)(x)
    }
}

impl fmt::Debug for SmoothFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SmoothFn")
    }
}

/// Constants attached to one functional constraint.
#[derive(Debug, Clone, Copy, Default)]
pub struct ConstraintConstants {
    /// Smoothness constant of `f_i`.
    pub l: f64,
    /// Nonsmoothness constant of `f_i`.
    pub h: f64,
    /// Lipschitz constant of `f_i`.
    pub m_f: f64,
    /// Lipschitz constant of `chi_i`.
    pub m_chi: f64,
    /// Strong convexity modulus of `chi_i`.
    pub alpha: f64,
    /// Lower-curvature modulus of `f_i` (zero means convex).
    pub mu: f64,
}

#[derive(Debug, Clone)]
pub struct Constraint {
    pub f: SmoothFn,
    pub chi: Composite,
    pub consts: ConstraintConstants,
}

/// Diagonal-quadratic description `1/2 x' diag(q) x + c' x + d` of a
/// composite total `psi_i`; enables exact reference solves.
#[derive(Debug, Clone)]
pub struct DiagQuadratic {
    pub q: Vec<f64>,
    pub c: Vec<f64>,
    pub d: f64,
}

impl DiagQuadratic {
    pub fn value(&self, x: &[f64]) -> f64 {
        let mut v = self.d;
        for (j, &xj) in x.iter().enumerate() {
            v += 0.5 * self.q[j] * xj * xj + self.c[j] * xj;
        }
        v
    }

    pub fn grad(&self, x: &[f64]) -> Vec<f64> {
        (0..x.len()).map(|j| self.q[j] * x[j] + self.c[j]).collect()
    }
}

/// Diagonal-quadratic structure of a whole problem (objective + constraints),
/// stated for the composite totals.
#[derive(Debug, Clone)]
pub struct QuadStructure {
    pub objective: DiagQuadratic,
    pub constraints: Vec<DiagQuadratic>,
}

/// Analytically known optimum of a benchmark.
#[derive(Debug, Clone)]
pub struct KnownOptimum {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub psi0: f64,
}

/// Finite scenario pool behind the CVaR benchmark: losses `a_s x + b_s` on a
/// scalar decision, CVaR level and expected-loss cap.
#[derive(Debug, Clone)]
pub struct ScenarioPool {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    /// CVaR level in (0, 1); the tail weight is `1 / (1 - level)`.
    pub level: f64,
    /// Cap on the expected loss.
    pub cap: f64,
}

impl ScenarioPool {
    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    pub fn tail_weight(&self) -> f64 {
        1.0 / (1.0 - self.level)
    }

    /// Objective subgradient contribution of one scenario at `(x, t)`.
    pub fn scenario_obj_subgrad(&self, s: usize, z: &[f64]) -> Vec<f64> {
        let kappa = self.tail_weight();
        let u = self.a[s] * z[0] + self.b[s] - z[1];
        if u > 0.0 {
            vec![kappa * self.a[s], 1.0 - kappa]
        } else {
            vec![0.0, 1.0]
        }
    }

    /// Constraint gradient contribution of one scenario.
    pub fn scenario_con_grad(&self, s: usize) -> Vec<f64> {
        vec![self.a[s], 0.0]
    }

    /// Constraint value contribution of one scenario.
    pub fn scenario_con_value(&self, s: usize, z: &[f64]) -> f64 {
        self.a[s] * z[0] + self.b[s] - self.cap
    }
}

/// The full problem model. Immutable after construction; evaluation is pure.
#[derive(Debug, Clone)]
pub struct ConstrainedProblem {
    pub name: String,
    dim: usize,
    f0: SmoothFn,
    chi0: Composite,
    constraints: Vec<Constraint>,
    /// Smoothness constant of `f_0`.
    pub l0: f64,
    /// Nonsmoothness constant of `f_0`.
    pub h0: f64,
    /// Strong convexity modulus of `chi_0`.
    pub alpha0: f64,
    /// Lower-curvature modulus of `f_0` (zero means convex).
    pub mu0: f64,
    geometry: Geometry,
    pub quad: Option<QuadStructure>,
    pub optimum: Option<KnownOptimum>,
    pub scenarios: Option<ScenarioPool>,
}

impl ConstrainedProblem {
    /// Validates invariants and prox capability. Capability failures surface
    /// here, at construction time.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: impl Into<String>,
        geometry: Geometry,
        f0: SmoothFn,
        chi0: Composite,
        l0: f64,
        h0: f64,
        mu0: f64,
        constraints: Vec<Constraint>,
    ) -> Result<Self> {
        let dim = geometry.dim();
        if l0 < 0.0 || h0 < 0.0 || mu0 < 0.0 {
            return Err(Error::Config("objective constants must be nonnegative".into()));
        }
        for (i, c) in constraints.iter().enumerate() {
            let k = &c.consts;
            if k.l < 0.0 || k.h < 0.0 || k.m_f < 0.0 || k.m_chi < 0.0 || k.alpha < 0.0 || k.mu < 0.0
            {
                return Err(Error::Config(format!(
                    "constraint {} constants must be nonnegative",
                    i + 1
                )));
            }
        }
        let chis: Vec<Composite> = constraints.iter().map(|c| c.chi.clone()).collect();
        geometry.check_prox_capability(&chi0, &chis)?;
        let alpha0 = chi0.strong_convexity();
        Ok(ConstrainedProblem {
            name: name.into(),
            dim,
            f0,
            chi0,
            constraints,
            l0,
            h0,
            alpha0,
            mu0,
            geometry,
            quad: None,
            optimum: None,
            scenarios: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn chi0(&self) -> &Composite {
        &self.chi0
    }

    pub fn f0(&self) -> &SmoothFn {
        &self.f0
    }

    /// True when every lower-curvature modulus is zero.
    pub fn is_convex(&self) -> bool {
        self.mu0 == 0.0 && self.constraints.iter().all(|c| c.consts.mu == 0.0)
    }

    /// Composite smooth means `H_0 = 0` and every `H_i = 0`.
    pub fn is_composite_smooth(&self) -> bool {
        self.h0 == 0.0 && self.constraints.iter().all(|c| c.consts.h == 0.0)
    }

    /// Exact composite values `(psi_0(x), psi(x))`.
    pub fn eval_full(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        if !self.geometry.contains(x) {
            return Err(Error::Domain("evaluation point lies outside the feasible set".into()));
        }
        Ok((self.psi0(x), self.psi(x)))
    }

    /// `psi_0` without a membership check (used on probes known to be in X).
    pub fn psi0(&self, x: &[f64]) -> f64 {
        self.f0.value(x) + self.chi0.value(&self.geometry, x)
    }

    pub fn psi(&self, x: &[f64]) -> Vec<f64> {
        self.constraints
            .iter()
            .map(|c| c.f.value(x) + c.chi.value(&self.geometry, x))
            .collect()
    }

    /// Values of the constraint composite parts `chi_i(x)`, `i = 1..m`.
    pub fn chi_values(&self, x: &[f64]) -> Vec<f64> {
        self.constraints
            .iter()
            .map(|c| c.chi.value(&self.geometry, x))
            .collect()
    }

    /// Values of the smooth constraint parts `f_i(x)`.
    pub fn f_values(&self, x: &[f64]) -> Vec<f64> {
        self.constraints.iter().map(|c| c.f.value(x)).collect()
    }

    /// Subgradients of the smooth parts: `f_0'(x)` and one column per
    /// constraint.
    pub fn subgradient_eval(&self, x: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
        let g0 = self.f0.subgrad(x);
        let g = self.constraints.iter().map(|c| c.f.subgrad(x)).collect();
        (g0, g)
    }

    /// Minimal-norm subgradient of the composite `psi_0`.
    pub fn psi0_subgrad(&self, x: &[f64]) -> Vec<f64> {
        let mut g = self.f0.subgrad(x);
        let gc = self.chi0.subgrad_min_norm(&self.geometry, x);
        linalg::axpy(&mut g, 1.0, &gc);
        g
    }

    /// Minimal-norm subgradient of the composite `psi_i`.
    pub fn psi_subgrad(&self, i: usize, x: &[f64]) -> Vec<f64> {
        let c = &self.constraints[i];
        let mut g = c.f.subgrad(x);
        let gc = c.chi.subgrad_min_norm(&self.geometry, x);
        linalg::axpy(&mut g, 1.0, &gc);
        g
    }

    /// Per-constraint noise-free infeasibility `||[psi(x)]_+||_2`.
    pub fn infeasibility(&self, x: &[f64]) -> f64 {
        linalg::positive_part_norm2(&self.psi(x))
    }

    /// Root-sum-square aggregation of the per-constraint constants plus the
    /// derived solver constants.
    pub fn aggregate_constants(&self) -> AggregatedConstants {
        let m_f = linalg::rss(self.constraints.iter().map(|c| c.consts.m_f));
        let m_chi = linalg::rss(self.constraints.iter().map(|c| c.consts.m_chi));
        let h_f = linalg::rss(self.constraints.iter().map(|c| c.consts.h));
        let l_f = linalg::rss(self.constraints.iter().map(|c| c.consts.l));
        AggregatedConstants {
            m_f,
            m_chi,
            h_f,
            l_f,
            m_big: f64::max(2.0 * m_f, m_chi + m_f),
            l0: self.l0,
            h0: self.h0,
            alpha0: self.alpha0,
            d_x: self.geometry.diameter(),
        }
    }

    pub fn with_quad(mut self, quad: QuadStructure) -> Self {
        self.quad = Some(quad);
        self
    }

    pub fn with_optimum(mut self, opt: KnownOptimum) -> Self {
        self.optimum = Some(opt);
        self
    }

    pub fn with_scenarios(mut self, pool: ScenarioPool) -> Self {
        self.scenarios = Some(pool);
        self
    }
}

/// Aggregates of the per-constraint constants plus evaluators for the
/// schedule constants that depend on `B`, a dual-norm estimate and noise
/// levels.
#[derive(Debug, Clone, Copy)]
pub struct AggregatedConstants {
    pub m_f: f64,
    pub m_chi: f64,
    pub h_f: f64,
    pub l_f: f64,
    /// `max{2 M_f, M_chi + M_f}`
    pub m_big: f64,
    pub l0: f64,
    pub h0: f64,
    pub alpha0: f64,
    pub d_x: f64,
}

impl AggregatedConstants {
    /// `H_* = H_0 + (|y*| + 1) H_f + L_f D_X [|y*| + 1 - B]_+ / 2`
    pub fn h_star(&self, y_norm: f64, b: f64) -> f64 {
        self.h0
            + (y_norm + 1.0) * self.h_f
            + 0.5 * self.l_f * self.d_x * (y_norm + 1.0 - b).max(0.0)
    }

    /// `H_B = H_0 + B H_f`, the computable surrogate.
    pub fn h_b(&self, b: f64) -> f64 {
        self.h0 + b * self.h_f
    }

    /// `sigma_{X,f} = (sigma_f^2 + D_X^2 |sigma|_2^2)^{1/2}`
    pub fn sigma_xf(&self, sigma_f: f64, sigma_norm: f64) -> f64 {
        (sigma_f * sigma_f + self.d_x * self.d_x * sigma_norm * sigma_norm).sqrt()
    }

    /// `t_0 = 4 (L_0 + B L_f) / alpha_0 + 2` for the strongly convex schedule.
    pub fn t0(&self, b: f64) -> Result<f64> {
        if self.alpha0 <= 0.0 {
            return Err(Error::Schedule(
                "strongly convex schedule requires alpha_0 > 0".into(),
            ));
        }
        Ok(4.0 * (self.l0 + b * self.l_f) / self.alpha0 + 2.0)
    }

    /// Variance-mixing constant of the strongly convex analysis.
    pub fn zeta_strongly_convex(
        &self,
        b: f64,
        y_norm: f64,
        sigma0: f64,
        sigma_norm: f64,
        sigma_f: f64,
    ) -> Result<f64> {
        let t0 = self.t0(b)?;
        let h_star = self.h_star(y_norm, b);
        let sxf = self.sigma_xf(sigma_f, sigma_norm);
        let inner = sigma0 * sigma0
            + 12.0 * (t0 + 3.0) * sigma_norm * sigma_norm * y_norm * y_norm
            + 96.0 * (t0 + 2.0) * b * b * sigma_norm * sigma_norm
            + 0.5 * h_star * h_star
            + 1.5 * self.alpha0 * b * sxf * (t0 + 2.0).powf(1.5);
        Ok(2.0 * std::f64::consts::E * inner.sqrt())
    }

    /// Variance-mixing constant of the merely-convex analysis.
    pub fn zeta_convex(
        &self,
        b: f64,
        y_norm: f64,
        sigma0: f64,
        sigma_norm: f64,
    ) -> f64 {
        let h_star = self.h_star(y_norm, b);
        let inner = sigma0 * sigma0
            + sigma_norm * sigma_norm * (14.0 * y_norm * y_norm + 123.0 * b * b)
            + 2.0 * f64::sqrt(3.0) * sigma_norm * (2.0 * b * h_star + b * sigma0);
        2.0 * std::f64::consts::E * inner.sqrt()
    }
}

/// A benchmark parameter value: scalar or vector.
#[derive(Debug, Clone, PartialEq)]
pub enum ParamValue {
    Scalar(f64),
    Vector(Vec<f64>),
}

impl ParamValue {
    pub fn scalar(&self) -> Result<f64> {
        match self {
            ParamValue::Scalar(v) => Ok(*v),
            ParamValue::Vector(_) => Err(Error::Config("expected a scalar parameter".into())),
        }
    }

    pub fn vector(&self) -> Result<Vec<f64>> {
        match self {
            ParamValue::Scalar(v) => Ok(vec![*v]),
            ParamValue::Vector(v) => Ok(v.clone()),
        }
    }
}

pub type ParamMap = BTreeMap<String, ParamValue>;

fn param_scalar(params: &ParamMap, key: &str, default: f64) -> Result<f64> {
    match params.get(key) {
        Some(v) => v.scalar(),
        None => Ok(default),
    }
}

fn param_vector(params: &ParamMap, key: &str, default: &[f64]) -> Result<Vec<f64>> {
    match params.get(key) {
        Some(v) => v.vector(),
        None => Ok(default.to_vec()),
    }
}

const KNOWN_BENCHMARKS: &[&str] = &[
    "ball-projection",
    "nonsmooth-l1",
    "qcqp-convex",
    "cvar-toy",
    "nonconvex-quadratic",
];

/// Builds a named benchmark. Unknown names and unknown parameter keys are
/// configuration errors.
pub fn make_benchmark(name: &str, params: &ParamMap) -> Result<ConstrainedProblem> {
    match name {
        "ball-projection" => ball_projection(params),
        "nonsmooth-l1" => nonsmooth_l1(params),
        "qcqp-convex" => qcqp_convex(params),
        "cvar-toy" => cvar_toy(params),
        "nonconvex-quadratic" => nonconvex_quadratic(params),
        _ => Err(Error::Config(format!(
            "unknown benchmark '{name}'; known: {}",
            KNOWN_BENCHMARKS.join(", ")
        ))),
    }
}

fn check_param_keys(params: &ParamMap, allowed: &[&str]) -> Result<()> {
    for key in params.keys() {
        if !allowed.contains(&key.as_str()) {
            return Err(Error::Config(format!(
                "unknown benchmark parameter '{key}'; allowed: {}",
                allowed.join(", ")
            )));
        }
    }
    Ok(())
}

fn box_geometry(lower: Vec<f64>, upper: Vec<f64>) -> Result<Geometry> {
    Geometry::new(
        FeasibleSet::Box { lower, upper },
        DistanceGenerator::Euclidean,
    )
}

/// Max of `||diag(q) x + c||_2` over the corners of a box; valid Lipschitz
/// bound for a diagonal quadratic since each component is monotone per
/// coordinate.
fn quad_lipschitz_on_box(q: &[f64], c: &[f64], lower: &[f64], upper: &[f64]) -> f64 {
    let n = q.len();
    let mut best: f64 = 0.0;
    for mask in 0..(1usize << n) {
        let mut s = 0.0;
        for j in 0..n {
            let xj = if mask >> j & 1 == 1 { upper[j] } else { lower[j] };
            let gj = q[j] * xj + c[j];
            s += gj * gj;
        }
        best = best.max(s.sqrt());
    }
    best
}

/// Projection of a point onto a ball through a box: strongly convex smooth
/// with one quadratic constraint and an analytic optimum.
///
/// The strong convexity is carried by the composite part: `psi_0` splits as
/// `chi_0 = 1/2 ||x||^2` plus the linear smooth remainder, so `alpha_0 = 1`
/// and `L_0 = 0`.
fn ball_projection(params: &ParamMap) -> Result<ConstrainedProblem> {
    check_param_keys(params, &["a", "b", "r", "box-lower", "box-upper"])?;
    let a = param_vector(params, "a", &[1.0, 1.0])?;
    let n = a.len();
    let b = param_vector(params, "b", &vec![0.0; n])?;
    let r = param_scalar(params, "r", 0.5)?;
    let lower = param_vector(params, "box-lower", &vec![-1.0; n])?;
    let upper = param_vector(params, "box-upper", &vec![1.0; n])?;
    if b.len() != n || lower.len() != n || upper.len() != n {
        return Err(Error::Config("ball-projection parameter dimensions disagree".into()));
    }
    if !(r > 0.0) {
        return Err(Error::Config("ball-projection needs r > 0".into()));
    }
    let geometry = box_geometry(lower.clone(), upper.clone())?;

    // f_0(x) = -<a, x> + 1/2 |a|^2 so that f_0 + chi_0 = 1/2 |x - a|^2
    let a0 = a.clone();
    let a_sq = 0.5 * linalg::dot(&a, &a);
    let f0 = SmoothFn::new(
        move |x| a_sq - linalg::dot(&a0, x),
        {
            let a1 = a.clone();
            move |_| linalg::scale(&a1, -1.0)
        },
    );
    let chi0 = Composite::anchor(1.0, vec![0.0; n]);

    let b1 = b.clone();
    let f1 = SmoothFn::new(
        {
            let b1 = b1.clone();
            move |x| {
                let d = linalg::dist2(x, &b1);
                d * d - r * r
            }
        },
        {
            let b1 = b1.clone();
            move |x| (0..x.len()).map(|j| 2.0 * (x[j] - b1[j])).collect()
        },
    );
    let m_f1 = quad_lipschitz_on_box(
        &vec![2.0; n],
        &linalg::scale(&b, -2.0),
        &lower,
        &upper,
    );
    let constraints = vec![Constraint {
        f: f1,
        chi: Composite::zero(),
        consts: ConstraintConstants {
            l: 2.0,
            m_f: m_f1,
            ..Default::default()
        },
    }];

    let sol = reference::analytic_ball_projection(&a, &b, r);
    let geometry_check = geometry.contains(&sol.x);
    if !geometry_check {
        return Err(Error::Config(
            "ball-projection optimum must lie inside the box; enlarge the box".into(),
        ));
    }
    let quad = QuadStructure {
        objective: DiagQuadratic {
            q: vec![1.0; n],
            c: linalg::scale(&a, -1.0),
            d: a_sq,
        },
        constraints: vec![DiagQuadratic {
            q: vec![2.0; n],
            c: linalg::scale(&b, -2.0),
            d: linalg::dot(&b, &b) - r * r,
        }],
    };

    Ok(ConstrainedProblem::new(
        "ball-projection",
        geometry,
        f0,
        chi0,
        0.0,
        0.0,
        0.0,
        constraints,
    )?
    .with_quad(quad)
    .with_optimum(KnownOptimum {
        x: sol.x,
        y: vec![sol.y],
        psi0: sol.psi0,
    }))
}

/// Where the l1 term of the nonsmooth benchmark lives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum L1Placement {
    /// In `chi_0`, handled by the prox (composite smooth, `H_0 = 0`).
    Prox,
    /// In `f_0` with `H_0 = lambda sqrt(n)`, exercising the nonsmooth rate.
    Objective,
}

/// Ball projection plus `lambda |x|_1`, with the l1 term either in the prox
/// or in the smooth part. Requires `b = 0` so the optimum stays analytic.
fn nonsmooth_l1(params: &ParamMap) -> Result<ConstrainedProblem> {
    check_param_keys(
        params,
        &["a", "r", "lambda", "box-lower", "box-upper", "placement"],
    )?;
    let a = param_vector(params, "a", &[1.0, 1.0])?;
    let n = a.len();
    let r = param_scalar(params, "r", 0.5)?;
    let lambda = param_scalar(params, "lambda", 0.5)?;
    let lower = param_vector(params, "box-lower", &vec![-1.0; n])?;
    let upper = param_vector(params, "box-upper", &vec![1.0; n])?;
    let placement_value = param_scalar(params, "placement", 0.0)?;
    let placement = if placement_value == 0.0 {
        L1Placement::Prox
    } else if placement_value == 1.0 {
        L1Placement::Objective
    } else {
        return Err(Error::Config(format!(
            "placement must be 0 (prox) or 1 (objective), got {placement_value}"
        )));
    };
    if !(lambda >= 0.0) {
        return Err(Error::Config("lambda must be nonnegative".into()));
    }
    let geometry = box_geometry(lower.clone(), upper.clone())?;

    let a_sq = 0.5 * linalg::dot(&a, &a);
    let (f0, chi0, h0) = match placement {
        L1Placement::Prox => {
            let a0 = a.clone();
            let f0 = SmoothFn::new(
                move |x| a_sq - linalg::dot(&a0, x),
                {
                    let a1 = a.clone();
                    move |_| linalg::scale(&a1, -1.0)
                },
            );
            let chi0 = Composite::anchor(1.0, vec![0.0; n]).with_l1(lambda);
            (f0, chi0, 0.0)
        }
        L1Placement::Objective => {
            let a0 = a.clone();
            let f0 = SmoothFn::new(
                move |x| a_sq - linalg::dot(&a0, x) + lambda * linalg::norm1(x),
                {
                    let a1 = a.clone();
                    move |x: &[f64]| {
                        (0..x.len())
                            .map(|j| {
                                -a1[j]
                                    + lambda
                                        * x[j].signum()
                                        * f64::from(u8::from(x[j] != 0.0))
                            })
                            .collect()
                    }
                },
            );
            let chi0 = Composite::anchor(1.0, vec![0.0; n]);
            // sharp envelope constant for the l1 part: the linearization
            // excess reaches 2 lambda |dx|_1 as the base point approaches a
            // kink, so lambda sqrt(n) alone is not valid
            (f0, chi0, 2.0 * lambda * (n as f64).sqrt())
        }
    };

    let f1 = SmoothFn::new(
        move |x| linalg::dot(x, x) - r * r,
        |x| linalg::scale(x, 2.0),
    );
    let m_f1 = quad_lipschitz_on_box(&vec![2.0; n], &vec![0.0; n], &lower, &upper);
    let constraints = vec![Constraint {
        f: f1,
        chi: Composite::zero(),
        consts: ConstraintConstants {
            l: 2.0,
            m_f: m_f1,
            ..Default::default()
        },
    }];

    let sol = reference::analytic_l1_ball_projection(&a, lambda, r);
    let geometry_check = geometry.contains(&sol.x);
    if !geometry_check {
        return Err(Error::Config(
            "nonsmooth-l1 optimum must lie inside the box; enlarge the box".into(),
        ));
    }
    Ok(ConstrainedProblem::new(
        "nonsmooth-l1",
        geometry,
        f0,
        chi0,
        0.0,
        h0,
        0.0,
        constraints,
    )?
    .with_optimum(KnownOptimum {
        x: sol.x,
        y: vec![sol.y],
        psi0: sol.psi0,
    }))
}

/// Convex QP objective with two quadratic constraints over a box; the second
/// constraint is slack at the optimum by construction so the dual-bisection
/// reference solver stays exact. `alpha_0 = 0`: no strong convexity is
/// declared.
fn qcqp_convex(params: &ParamMap) -> Result<ConstrainedProblem> {
    check_param_keys(
        params,
        &["q0", "c0", "q1", "c1", "d1", "q2", "c2", "d2", "box-lower", "box-upper"],
    )?;
    let q0 = param_vector(params, "q0", &[1.0, 0.5])?;
    let n = q0.len();
    let c0 = param_vector(params, "c0", &[-1.0, -0.5])?;
    let q1 = param_vector(params, "q1", &[2.0, 2.0])?;
    let c1 = param_vector(params, "c1", &vec![0.0; n])?;
    let d1 = param_scalar(params, "d1", -0.25)?;
    let q2 = param_vector(params, "q2", &[1.0, 1.0])?;
    let c2 = param_vector(params, "c2", &vec![0.0; n])?;
    let d2 = param_scalar(params, "d2", -4.0)?;
    let lower = param_vector(params, "box-lower", &vec![-1.0; n])?;
    let upper = param_vector(params, "box-upper", &vec![1.0; n])?;
    for q in q0.iter().chain(&q1).chain(&q2) {
        if *q < 0.0 {
            return Err(Error::Config("qcqp-convex requires PSD (diagonal >= 0) quadratics".into()));
        }
    }
    let geometry = box_geometry(lower.clone(), upper.clone())?;

    let quads = QuadStructure {
        objective: DiagQuadratic { q: q0.clone(), c: c0.clone(), d: 0.0 },
        constraints: vec![
            DiagQuadratic { q: q1.clone(), c: c1.clone(), d: d1 },
            DiagQuadratic { q: q2.clone(), c: c2.clone(), d: d2 },
        ],
    };
    let f0 = {
        let q = quads.objective.clone();
        SmoothFn::new(move |x| q.value(x), {
            let q = quads.objective.clone();
            move |x| q.grad(x)
        })
    };
    let mut constraints = Vec::new();
    for con in &quads.constraints {
        let c = con.clone();
        let g = con.clone();
        constraints.push(Constraint {
            f: SmoothFn::new(move |x| c.value(x), move |x| g.grad(x)),
            chi: Composite::zero(),
            consts: ConstraintConstants {
                l: con.q.iter().cloned().fold(0.0, f64::max),
                m_f: quad_lipschitz_on_box(&con.q, &con.c, &lower, &upper),
                ..Default::default()
            },
        });
    }

    let problem = ConstrainedProblem::new(
        "qcqp-convex",
        geometry,
        f0,
        Composite::zero(),
        q0.iter().cloned().fold(0.0, f64::max),
        0.0,
        0.0,
        constraints,
    )?
    .with_quad(quads);

    let sol = reference::solve_diag_qcqp(&problem)?;
    if sol.x.is_empty() {
        return Err(Error::Config("qcqp-convex reference solve failed".into()));
    }
    Ok(problem.with_optimum(KnownOptimum {
        x: sol.x,
        y: sol.y,
        psi0: sol.value,
    }))
}

/// Generates the deterministic scenario pool for the CVaR benchmark.
pub fn cvar_scenarios(count: usize, gen_seed: u64) -> (Vec<f64>, Vec<f64>) {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(gen_seed);
    let a: Vec<f64> = (0..count).map(|_| rng.random_range(0.5..1.5)).collect();
    let b: Vec<f64> = (0..count).map(|_| rng.random_range(-1.0..1.0)).collect();
    (a, b)
}

/// Scalar-decision CVaR minimization with an expected-loss constraint over a
/// finite scenario pool. Decision variables are `(x, t)` where `t` is the
/// CVaR auxiliary level.
fn cvar_toy(params: &ParamMap) -> Result<ConstrainedProblem> {
    check_param_keys(
        params,
        &["scenarios", "level", "cap", "gen-seed", "box-lower", "box-upper"],
    )?;
    let count = param_scalar(params, "scenarios", 200.0)? as usize;
    let level = param_scalar(params, "level", 0.9)?;
    let cap = param_scalar(params, "cap", 0.3)?;
    let gen_seed = param_scalar(params, "gen-seed", 7.0)? as u64;
    let lower = param_vector(params, "box-lower", &[-1.0, -3.0])?;
    let upper = param_vector(params, "box-upper", &[1.0, 3.0])?;
    if count == 0 {
        return Err(Error::Config("cvar-toy needs at least one scenario".into()));
    }
    if !(0.0 < level && level < 1.0) {
        return Err(Error::Config("cvar level must lie in (0, 1)".into()));
    }
    let (a, b) = cvar_scenarios(count, gen_seed);
    let pool = ScenarioPool { a, b, level, cap };
    // the feasible region must contain points with E[loss] <= cap
    let mean_a: f64 = pool.a.iter().sum::<f64>() / count as f64;
    let mean_b: f64 = pool.b.iter().sum::<f64>() / count as f64;
    if mean_a * lower[0] + mean_b > cap {
        return Err(Error::Config(
            "cvar-toy cap leaves the box entirely infeasible; raise cap".into(),
        ));
    }
    let geometry = box_geometry(lower.clone(), upper.clone())?;

    let kappa = pool.tail_weight();
    let f0 = {
        let pool = pool.clone();
        SmoothFn::new(
            {
                let pool = pool.clone();
                move |z: &[f64]| {
                    let mean_excess: f64 = pool
                        .a
                        .iter()
                        .zip(&pool.b)
                        .map(|(ai, bi)| (ai * z[0] + bi - z[1]).max(0.0))
                        .sum::<f64>()
                        / pool.len() as f64;
                    z[1] + kappa * mean_excess
                }
            },
            {
                let pool = pool.clone();
                move |z: &[f64]| {
                    let mut gx = 0.0;
                    let mut active = 0.0;
                    for (ai, bi) in pool.a.iter().zip(&pool.b) {
                        if ai * z[0] + bi - z[1] > 0.0 {
                            gx += ai;
                            active += 1.0;
                        }
                    }
                    let s = pool.len() as f64;
                    vec![kappa * gx / s, 1.0 - kappa * active / s]
                }
            },
        )
    };
    // subgradient-diameter bound for the piecewise-linear objective
    let max_a = pool.a.iter().cloned().fold(0.0, f64::max);
    let g_max = (kappa * max_a).hypot(f64::max(1.0, kappa - 1.0));
    let h0 = 2.0 * g_max;

    let f1 = {
        let (ma, mb) = (mean_a, mean_b);
        SmoothFn::new(
            move |z: &[f64]| ma * z[0] + mb - cap,
            move |_| vec![ma, 0.0],
        )
    };
    let constraints = vec![Constraint {
        f: f1,
        chi: Composite::zero(),
        consts: ConstraintConstants {
            m_f: mean_a.abs(),
            ..Default::default()
        },
    }];

    Ok(ConstrainedProblem::new(
        "cvar-toy",
        geometry,
        f0,
        Composite::zero(),
        0.0,
        h0,
        0.0,
        constraints,
    )?
    .with_scenarios(pool))
}

/// Indefinite diagonal quadratic objective and one indefinite quadratic
/// constraint over a small box. The box center is strictly feasible with the
/// margin `psi_1(center) <= -2 mu_1 D_X^2` required for the certified dual
/// bound, and the default constraint is active at the stationary point the
/// descent path finds (it cuts off the unconstrained box minimizer).
fn nonconvex_quadratic(params: &ParamMap) -> Result<ConstrainedProblem> {
    check_param_keys(
        params,
        &["q0", "c0", "q1", "c1", "d1", "box-lower", "box-upper"],
    )?;
    let q0 = param_vector(params, "q0", &[-0.1, 0.02])?;
    let n = q0.len();
    let c0 = param_vector(params, "c0", &[0.12, 0.002])?;
    let q1 = param_vector(params, "q1", &[0.05, -0.05])?;
    let c1 = param_vector(params, "c1", &[-0.6, 0.0])?;
    let lower = param_vector(params, "box-lower", &vec![-0.5; n])?;
    let upper = param_vector(params, "box-upper", &vec![0.5; n])?;
    let geometry = box_geometry(lower.clone(), upper.clone())?;
    let d_x = geometry.diameter();

    let mu0 = q0.iter().cloned().fold(0.0_f64, |m, q| m.max(-q));
    let mu1 = q1.iter().cloned().fold(0.0_f64, |m, q| m.max(-q));
    // default offset sits exactly on the strict-feasibility margin with 5%
    // headroom; an explicit d1 overrides it but is still validated
    let d1 = param_scalar(params, "d1", -2.0 * mu1 * d_x * d_x * 1.05)?;

    let center: Vec<f64> = lower
        .iter()
        .zip(&upper)
        .map(|(l, u)| 0.5 * (l + u))
        .collect();
    let quads = QuadStructure {
        objective: DiagQuadratic { q: q0.clone(), c: c0.clone(), d: 0.0 },
        constraints: vec![DiagQuadratic { q: q1.clone(), c: c1.clone(), d: d1 }],
    };
    let psi1_center = quads.constraints[0].value(&center);
    if psi1_center > -2.0 * mu1 * d_x * d_x {
        return Err(Error::Config(format!(
            "nonconvex-quadratic must satisfy psi_1(center) <= -2 mu_1 D_X^2, \
             got {psi1_center} > {}",
            -2.0 * mu1 * d_x * d_x
        )));
    }

    let f0 = {
        let q = quads.objective.clone();
        SmoothFn::new(move |x| q.value(x), {
            let q = quads.objective.clone();
            move |x| q.grad(x)
        })
    };
    let con = quads.constraints[0].clone();
    let grad_con = con.clone();
    let constraints = vec![Constraint {
        f: SmoothFn::new(move |x| con.value(x), move |x| grad_con.grad(x)),
        chi: Composite::zero(),
        consts: ConstraintConstants {
            l: q1.iter().cloned().fold(0.0, |m: f64, q| m.max(q.abs())),
            m_f: quad_lipschitz_on_box(&q1, &c1, &lower, &upper),
            mu: mu1,
            ..Default::default()
        },
    }];

    ConstrainedProblem::new(
        "nonconvex-quadratic",
        geometry,
        f0,
        Composite::zero(),
        q0.iter().cloned().fold(0.0, |m: f64, q| m.max(q.abs())),
        0.0,
        mu0,
        constraints,
    )
    .map(|p| p.with_quad(quads))
}
