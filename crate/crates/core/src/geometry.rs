//! Feasible sets, distance generating functions, Bregman divergences and the
//! composite prox operator every solver in this crate is built on.
//!
//! The prox operator solves
//!
//! ```text
//! argmin_{x in X}  chi_0(x) + sum_i w_i chi_i(x) + <v, x> + eta W(x, x_tilde)
//! ```
//!
//! for nonnegative weights `w` and a Bregman divergence `W` induced by the
//! distance generating function. Only pairings with a closed-form (or
//! separably solvable) minimizer are accepted; anything else is rejected when
//! the problem is constructed, never mid-run.

use crate::error::{Error, Result};
use crate::linalg;
use rand::Rng;

/// Tolerance for set-membership checks.
pub const MEMBERSHIP_TOL: f64 = 1e-12;

/// Interior truncation for the entropy geometry; keeps the gradient of the
/// distance generating function Lipschitz on the truncated simplex.
pub const ENTROPY_FLOOR: f64 = 1e-9;

/// A convex compact feasible set.
#[derive(Debug, Clone, PartialEq)]
pub enum FeasibleSet {
    /// Axis-aligned box `[lower_j, upper_j]` with `lower_j < upper_j`.
    Box { lower: Vec<f64>, upper: Vec<f64> },
    /// Euclidean ball of positive radius.
    Ball { center: Vec<f64>, radius: f64 },
    /// Probability simplex `{ x >= 0, sum x = 1 }` of dimension >= 2.
    Simplex { dim: usize },
}

impl FeasibleSet {
    pub fn validate(&self) -> Result<()> {
        match self {
            FeasibleSet::Box { lower, upper } => {
                if lower.is_empty() || lower.len() != upper.len() {
                    return Err(Error::Config("box bounds must be nonempty and equal-length".into()));
                }
                for (l, u) in lower.iter().zip(upper) {
                    if !(l < u) {
                        return Err(Error::Config(format!(
                            "box requires lower < upper per coordinate, got [{l}, {u}]"
                        )));
                    }
                }
                Ok(())
            }
            FeasibleSet::Ball { center, radius } => {
                if center.is_empty() {
                    return Err(Error::Config("ball center must be nonempty".into()));
                }
                if !(*radius > 0.0) {
                    return Err(Error::Config(format!("ball radius must be positive, got {radius}")));
                }
                Ok(())
            }
            FeasibleSet::Simplex { dim } => {
                if *dim < 2 {
                    return Err(Error::Config(format!("simplex dimension must be >= 2, got {dim}")));
                }
                Ok(())
            }
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            FeasibleSet::Box { lower, .. } => lower.len(),
            FeasibleSet::Ball { center, .. } => center.len(),
            FeasibleSet::Simplex { dim } => *dim,
        }
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        if x.len() != self.dim() {
            return false;
        }
        match self {
            FeasibleSet::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper))
                .all(|(xi, (l, u))| *xi >= l - tol && *xi <= u + tol),
            FeasibleSet::Ball { center, radius } => linalg::dist2(x, center) <= radius + tol,
            FeasibleSet::Simplex { .. } => {
                x.iter().all(|&xi| xi >= -tol) && (x.iter().sum::<f64>() - 1.0).abs() <= tol
            }
        }
    }

    /// Euclidean projection onto the set. Idempotent; identity on members.
    pub fn project(&self, z: &[f64]) -> Vec<f64> {
        match self {
            FeasibleSet::Box { lower, upper } => z
                .iter()
                .zip(lower.iter().zip(upper))
                .map(|(zi, (l, u))| zi.max(*l).min(*u))
                .collect(),
            FeasibleSet::Ball { center, radius } => {
                let d = linalg::dist2(z, center);
                if d <= *radius {
                    z.to_vec()
                } else {
                    let s = radius / d;
                    center
                        .iter()
                        .zip(z)
                        .map(|(c, zi)| c + s * (zi - c))
                        .collect()
                }
            }
            FeasibleSet::Simplex { .. } => project_simplex(z),
        }
    }

    /// A uniform-ish random member, used by sampling-based checks.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        match self {
            FeasibleSet::Box { lower, upper } => lower
                .iter()
                .zip(upper)
                .map(|(l, u)| rng.random_range(*l..*u))
                .collect(),
            FeasibleSet::Ball { center, radius } => {
                // rejection sampling from the bounding box
                loop {
                    let z: Vec<f64> = center
                        .iter()
                        .map(|c| rng.random_range(c - radius..c + radius))
                        .collect();
                    if linalg::dist2(&z, center) <= *radius {
                        return z;
                    }
                }
            }
            FeasibleSet::Simplex { dim } => {
                // exponential spacings normalize to a uniform simplex point
                let mut e: Vec<f64> = (0..*dim)
                    .map(|_| -f64::ln(1.0 - rng.random::<f64>()))
                    .collect();
                let s: f64 = e.iter().sum();
                for v in e.iter_mut() {
                    *v /= s;
                }
                e
            }
        }
    }
}

/// Sort-and-shift projection onto the probability simplex.
fn project_simplex(z: &[f64]) -> Vec<f64> {
    let mut u = z.to_vec();
    u.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cumsum += uj;
        let t = (cumsum - 1.0) / (j + 1) as f64;
        if uj - t > 0.0 {
            theta = t;
        }
    }
    z.iter().map(|&zi| (zi - theta).max(0.0)).collect()
}

/// Distance generating function paired with a norm: half squared Euclidean
/// (paired with l2) or negative entropy on the simplex (paired with l1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DistanceGenerator {
    Euclidean,
    Entropy,
}

impl DistanceGenerator {
    /// Lipschitz constant of the gradient of the distance generating
    /// function on its (truncated, for entropy) domain.
    pub fn l_omega(&self) -> f64 {
        match self {
            DistanceGenerator::Euclidean => 1.0,
            DistanceGenerator::Entropy => 1.0 / ENTROPY_FLOOR,
        }
    }
}

/// Which dual norm variance bounds and subgradient bounds are stated in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DualNorm {
    L2,
    LInf,
}

/// A feasible set together with a compatible distance generating function.
#[derive(Debug, Clone)]
pub struct Geometry {
    set: FeasibleSet,
    omega: DistanceGenerator,
}

impl Geometry {
    pub fn new(set: FeasibleSet, omega: DistanceGenerator) -> Result<Self> {
        set.validate()?;
        if omega == DistanceGenerator::Entropy && !matches!(set, FeasibleSet::Simplex { .. }) {
            return Err(Error::Capability(
                "entropy distance generator is only supported on the simplex".into(),
            ));
        }
        Ok(Geometry { set, omega })
    }

    pub fn euclidean(set: FeasibleSet) -> Result<Self> {
        Geometry::new(set, DistanceGenerator::Euclidean)
    }

    pub fn set(&self) -> &FeasibleSet {
        &self.set
    }

    pub fn omega(&self) -> DistanceGenerator {
        self.omega
    }

    pub fn dim(&self) -> usize {
        self.set.dim()
    }

    pub fn l_omega(&self) -> f64 {
        self.omega.l_omega()
    }

    /// Dual norm paired with the distance generating function.
    pub fn dual_norm(&self) -> DualNorm {
        match self.omega {
            DistanceGenerator::Euclidean => DualNorm::L2,
            DistanceGenerator::Entropy => DualNorm::LInf,
        }
    }

    pub fn dual_norm_of(&self, v: &[f64]) -> f64 {
        match self.dual_norm() {
            DualNorm::L2 => linalg::norm2(v),
            DualNorm::LInf => linalg::norm_inf(v),
        }
    }

    /// Primal norm paired with the distance generating function.
    pub fn primal_norm_of(&self, v: &[f64]) -> f64 {
        match self.omega {
            DistanceGenerator::Euclidean => linalg::norm2(v),
            DistanceGenerator::Entropy => linalg::norm1(v),
        }
    }

    /// Gradient of the distance generating function.
    pub fn grad_omega(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self.omega {
            DistanceGenerator::Euclidean => Ok(x.to_vec()),
            DistanceGenerator::Entropy => x
                .iter()
                .map(|&xi| {
                    if xi <= 0.0 {
                        Err(Error::Domain(format!(
                            "entropy gradient undefined at coordinate {xi}"
                        )))
                    } else {
                        Ok(1.0 + xi.ln())
                    }
                })
                .collect(),
        }
    }

    /// Bregman divergence `W(y, x) = omega(y) - omega(x) - <grad omega(x), y - x>`.
    pub fn bregman_div(&self, y: &[f64], x: &[f64]) -> Result<f64> {
        if y.len() != x.len() {
            return Err(Error::Domain("bregman_div: dimension mismatch".into()));
        }
        match self.omega {
            DistanceGenerator::Euclidean => {
                let mut acc = 0.0;
                for (yi, xi) in y.iter().zip(x) {
                    let d = yi - xi;
                    acc += d * d;
                }
                Ok(0.5 * acc)
            }
            DistanceGenerator::Entropy => {
                let mut acc = 0.0;
                for (&yi, &xi) in y.iter().zip(x) {
                    if xi <= 0.0 {
                        return Err(Error::Domain(format!(
                            "entropy divergence needs a strictly interior second argument, got {xi}"
                        )));
                    }
                    if yi < 0.0 {
                        return Err(Error::Domain(format!(
                            "entropy divergence needs a nonnegative first argument, got {yi}"
                        )));
                    }
                    // y ln y -> 0 as y -> 0
                    if yi > 0.0 {
                        acc += yi * (yi / xi).ln();
                    }
                    acc += xi - yi;
                }
                Ok(acc.max(0.0))
            }
        }
    }

    /// `D_X = max_{x,y in X} sqrt(2 W(x, y))`, exact for the Euclidean
    /// geometry, an interior-truncated bound for entropy.
    pub fn diameter(&self) -> f64 {
        match (&self.set, self.omega) {
            (FeasibleSet::Box { lower, upper }, DistanceGenerator::Euclidean) => {
                linalg::dist2(upper, lower)
            }
            (FeasibleSet::Ball { radius, .. }, DistanceGenerator::Euclidean) => 2.0 * radius,
            (FeasibleSet::Simplex { .. }, DistanceGenerator::Euclidean) => f64::sqrt(2.0),
            (FeasibleSet::Simplex { dim }, DistanceGenerator::Entropy) => {
                (2.0 * (*dim as f64 / ENTROPY_FLOOR).ln()).sqrt()
            }
            // rejected by the constructor
            _ => unreachable!("incompatible geometry pairing"),
        }
    }

    pub fn project(&self, z: &[f64]) -> Vec<f64> {
        let mut p = self.set.project(z);
        if self.omega == DistanceGenerator::Entropy {
            truncate_to_interior(&mut p);
        }
        p
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.set.contains(x, MEMBERSHIP_TOL)
    }

    /// Checks that the composite parts admit a closed-form prox kernel with
    /// this geometry. Called once at problem construction.
    pub fn check_prox_capability(&self, chi0: &Composite, chis: &[Composite]) -> Result<()> {
        for (i, chi) in chis.iter().enumerate() {
            if !chi.is_linear_or_zero() {
                return Err(Error::Capability(format!(
                    "weighted composite part {} must be linear or zero inside the prox; \
                     fold nonsmooth parts into the smooth function instead",
                    i + 1
                )));
            }
        }
        if chi0.l1 > 0.0 {
            let separable_box = matches!(self.set, FeasibleSet::Box { .. })
                && self.omega == DistanceGenerator::Euclidean;
            if !separable_box {
                return Err(Error::Capability(
                    "l1 composite objective is only prox-capable over a Euclidean box".into(),
                ));
            }
        }
        for anchor in &chi0.anchors {
            if anchor.center.len() != self.dim() {
                return Err(Error::Capability("anchor center dimension mismatch".into()));
            }
            if anchor.rho < 0.0 {
                return Err(Error::Capability("anchor weight must be nonnegative".into()));
            }
        }
        Ok(())
    }

    /// The composite prox operator. `req.weights` multiplies the constraint
    /// composites; the returned point is feasible within `MEMBERSHIP_TOL`.
    pub fn prox_step(&self, req: &ProxRequest<'_>) -> Result<Vec<f64>> {
        if !(req.eta > 0.0) {
            return Err(Error::Domain(format!("prox scale must be positive, got {}", req.eta)));
        }
        if req.weights.iter().any(|&w| w < 0.0) {
            return Err(Error::Domain("prox weights must be nonnegative".into()));
        }
        if !self.contains(req.center) {
            return Err(Error::Domain("prox center must lie in the feasible set".into()));
        }
        self.check_prox_capability(req.chi0, req.chis)?;

        let n = self.dim();
        // effective linear term: v plus all linear composite parts
        let mut a_eff = req.linear.to_vec();
        if let Some(a0) = &req.chi0.linear {
            linalg::axpy(&mut a_eff, 1.0, a0);
        }
        for (chi, &w) in req.chis.iter().zip(req.weights) {
            if let Some(ai) = &chi.linear {
                linalg::axpy(&mut a_eff, w, ai);
            }
        }
        let rho_total: f64 = req.chi0.anchors.iter().map(|a| a.rho).sum();
        let p_total = req.eta + rho_total;

        match self.omega {
            DistanceGenerator::Euclidean => {
                // quadratic part collapses to (p/2) ||x - z||^2 with a merged center
                let mut z = vec![0.0; n];
                linalg::axpy(&mut z, req.eta / p_total, req.center);
                for anchor in &req.chi0.anchors {
                    linalg::axpy(&mut z, anchor.rho / p_total, &anchor.center);
                }
                linalg::axpy(&mut z, -1.0 / p_total, &a_eff);
                if req.chi0.l1 > 0.0 {
                    let lam = req.chi0.l1 / p_total;
                    for zi in z.iter_mut() {
                        *zi = soft_threshold(*zi, lam);
                    }
                }
                Ok(self.set.project(&z))
            }
            DistanceGenerator::Entropy => {
                // multiplicative-weights closed form on the simplex
                let mut log_x = vec![0.0; n];
                for j in 0..n {
                    let mut num = req.eta * req.center[j].max(ENTROPY_FLOOR).ln();
                    for anchor in &req.chi0.anchors {
                        num += anchor.rho * anchor.center[j].max(ENTROPY_FLOOR).ln();
                    }
                    log_x[j] = (num - a_eff[j]) / p_total;
                }
                let m = log_x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let mut x: Vec<f64> = log_x.iter().map(|l| (l - m).exp()).collect();
                let s: f64 = x.iter().sum();
                for v in x.iter_mut() {
                    *v /= s;
                }
                truncate_to_interior(&mut x);
                Ok(x)
            }
        }
    }
}

fn truncate_to_interior(x: &mut [f64]) {
    let mut clipped = false;
    for v in x.iter_mut() {
        if *v < ENTROPY_FLOOR {
            *v = ENTROPY_FLOOR;
            clipped = true;
        }
    }
    if clipped {
        let s: f64 = x.iter().sum();
        for v in x.iter_mut() {
            *v /= s;
        }
    }
}

pub fn soft_threshold(z: f64, lam: f64) -> f64 {
    if z > lam {
        z - lam
    } else if z < -lam {
        z + lam
    } else {
        0.0
    }
}

/// `rho * W(x, center)` added to a composite part. With the Euclidean
/// geometry this is the quadratic `rho/2 ||x - center||^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Anchor {
    pub rho: f64,
    pub center: Vec<f64>,
}

/// A "simple" convex function handled through the prox operator: an optional
/// linear part, an l1 part and Bregman anchor terms.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Composite {
    pub linear: Option<Vec<f64>>,
    pub offset: f64,
    pub l1: f64,
    pub anchors: Vec<Anchor>,
}

impl Composite {
    pub fn zero() -> Self {
        Composite::default()
    }

    pub fn linear(a: Vec<f64>, offset: f64) -> Self {
        Composite {
            linear: Some(a),
            offset,
            ..Composite::default()
        }
    }

    pub fn l1(lambda: f64) -> Self {
        Composite {
            l1: lambda,
            ..Composite::default()
        }
    }

    pub fn anchor(rho: f64, center: Vec<f64>) -> Self {
        Composite {
            anchors: vec![Anchor { rho, center }],
            ..Composite::default()
        }
    }

    pub fn with_anchor(mut self, rho: f64, center: Vec<f64>) -> Self {
        self.anchors.push(Anchor { rho, center });
        self
    }

    pub fn with_l1(mut self, lambda: f64) -> Self {
        self.l1 = lambda;
        self
    }

    pub fn is_zero(&self) -> bool {
        self.linear.is_none() && self.l1 == 0.0 && self.anchors.is_empty() && self.offset == 0.0
    }

    pub fn is_linear_or_zero(&self) -> bool {
        self.l1 == 0.0 && self.anchors.is_empty()
    }

    /// Strong convexity modulus with respect to the Bregman divergence.
    pub fn strong_convexity(&self) -> f64 {
        self.anchors.iter().map(|a| a.rho).sum()
    }

    pub fn value(&self, geom: &Geometry, x: &[f64]) -> f64 {
        let mut v = self.offset;
        if let Some(a) = &self.linear {
            v += linalg::dot(a, x);
        }
        if self.l1 > 0.0 {
            v += self.l1 * linalg::norm1(x);
        }
        for anchor in &self.anchors {
            v += anchor.rho
                * geom
                    .bregman_div(x, &anchor.center)
                    .expect("anchor centers are interior by construction");
        }
        v
    }

    /// Selection-independent subgradient part plus the l1 weight; the l1
    /// subdifferential contributes `l1 * sign(x_j)` at nonzero coordinates
    /// and the interval `[-l1, l1]` at zero ones, which callers aggregating
    /// several subdifferentials must resolve jointly.
    pub fn subgrad_split(&self, geom: &Geometry, x: &[f64]) -> (Vec<f64>, f64) {
        let mut g = vec![0.0; x.len()];
        if let Some(a) = &self.linear {
            linalg::axpy(&mut g, 1.0, a);
        }
        if self.l1 > 0.0 {
            for (gi, &xi) in g.iter_mut().zip(x) {
                if xi != 0.0 {
                    *gi += self.l1 * xi.signum();
                }
            }
        }
        for anchor in &self.anchors {
            let gx = geom.grad_omega(x).expect("x in domain");
            let gc = geom.grad_omega(&anchor.center).expect("center in domain");
            for j in 0..x.len() {
                g[j] += anchor.rho * (gx[j] - gc[j]);
            }
        }
        (g, self.l1)
    }

    /// Minimal-norm subgradient; ties at l1 kinks resolve to zero.
    pub fn subgrad_min_norm(&self, geom: &Geometry, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; x.len()];
        if let Some(a) = &self.linear {
            linalg::axpy(&mut g, 1.0, a);
        }
        if self.l1 > 0.0 {
            for (gi, &xi) in g.iter_mut().zip(x) {
                *gi += self.l1 * xi.signum() * f64::from(u8::from(xi != 0.0));
            }
        }
        for anchor in &self.anchors {
            // gradient of rho W(x, c) is rho (grad omega(x) - grad omega(c))
            let gx = geom.grad_omega(x).expect("x in domain");
            let gc = geom.grad_omega(&anchor.center).expect("center in domain");
            for j in 0..x.len() {
                g[j] += anchor.rho * (gx[j] - gc[j]);
            }
        }
        g
    }

    /// Lipschitz bound over the given set, in the norm paired with `geom`.
    pub fn lipschitz_bound(&self, geom: &Geometry) -> f64 {
        let mut m = 0.0;
        if let Some(a) = &self.linear {
            m += geom.dual_norm_of(a);
        }
        if self.l1 > 0.0 {
            // |lambda||x|_1 - lambda|y|_1| <= lambda sqrt(n) |x-y|_2
            m += self.l1 * (geom.dim() as f64).sqrt();
        }
        for anchor in &self.anchors {
            m += anchor.rho * geom.l_omega() * geom.diameter();
        }
        m
    }
}

/// Inputs for one composite prox evaluation.
#[derive(Debug)]
pub struct ProxRequest<'a> {
    /// Nonnegative weights on the constraint composites.
    pub weights: &'a [f64],
    /// Linear term `v`.
    pub linear: &'a [f64],
    /// Prox center `x_tilde`, a member of the feasible set.
    pub center: &'a [f64],
    /// Positive scale on `W(x, x_tilde)`.
    pub eta: f64,
    pub chi0: &'a Composite,
    pub chis: &'a [Composite],
}
