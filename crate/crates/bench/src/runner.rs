//! Experiment orchestration: builds the problem, fans (budget, seed) cells
//! out to a worker pool, and emits deterministic CSV.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use conex::conex::{iterations_for_accuracy, run_conex, ComplexityTarget, ConExParams};
use conex::error::{Error, Result};
use conex::metrics::optimality_and_infeasibility;
use conex::oracles::NoiseConfig;
use conex::problems::{make_benchmark, ConstrainedProblem};
use conex::proxpoint::{
    dual_bound, run_exact_proxpoint, run_inexact_proxpoint, tolerance_schedule, DualBoundResult,
    InexactOptions, ToleranceInputs, ToleranceSchedule,
};
use conex::reference::{grid_solve, projected_subgradient_baseline, GridSpec};

use crate::config::{DualBoundChoice, ExperimentConfig, SolverKind};

/// One output row. Optional fields print as empty cells.
#[derive(Debug, Clone)]
pub struct CsvRow {
    pub problem: String,
    pub regime: &'static str,
    pub schedule: &'static str,
    pub budget: usize,
    pub seed: u64,
    pub gap: Option<f64>,
    pub infeas: Option<f64>,
    pub dist_w: Option<f64>,
    pub kkt_feas: Option<f64>,
    pub kkt_compl: Option<f64>,
    pub kkt_stat: Option<f64>,
    pub wall_time_s: f64,
    pub error: Option<String>,
}

pub const CSV_HEADER: &str =
    "problem,regime,schedule,budget,seed,gap,infeas,dist_w,kkt_feas,kkt_compl,kkt_stat,wall_time_s,error";

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(v) => format!("{v:.16e}"),
        None => String::new(),
    }
}

/// Renders rows as CSV: UTF-8, comma separated, LF endings, floats with 17
/// significant digits.
pub fn render_csv(rows: &[CsvRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{:.16e},{}\n",
            r.problem,
            r.regime,
            r.schedule,
            r.budget,
            r.seed,
            fmt_opt(r.gap),
            fmt_opt(r.infeas),
            fmt_opt(r.dist_w),
            fmt_opt(r.kkt_feas),
            fmt_opt(r.kkt_compl),
            fmt_opt(r.kkt_stat),
            r.wall_time_s,
            r.error.as_deref().unwrap_or(""),
        ));
    }
    out
}

/// Everything a worker needs, resolved once per experiment.
pub struct Experiment {
    pub cfg: ExperimentConfig,
    pub problem: ConstrainedProblem,
    pub noise: NoiseConfig,
    /// Reference optimal value for gap reporting, when available.
    pub psi0_ref: Option<f64>,
    pub x_ref: Option<Vec<f64>>,
    pub b: f64,
    /// Inexact outer schedule template (proxpoint-inexact only).
    pub schedule: Option<ToleranceSchedule>,
}

/// Resolves the problem, the noise model, the reference optimum, the dual
/// bound (running the doubling line search when `b = auto`) and, for the
/// inexact solver, the tolerance schedule.
pub fn prepare(cfg: &ExperimentConfig) -> Result<Experiment> {
    let problem = make_benchmark(&cfg.problem, &cfg.params)?;
    let m = problem.num_constraints();
    let mut sigma = cfg.sigma.clone();
    if sigma.len() != m {
        if sigma.iter().all(|&s| s == 0.0) {
            sigma = vec![sigma.first().copied().unwrap_or(0.0); m];
        } else if sigma.len() == 1 {
            sigma = vec![sigma[0]; m];
        } else {
            return Err(Error::Config(format!(
                "sigma has {} entries for {m} constraints",
                sigma.len()
            )));
        }
    }
    let noise = NoiseConfig {
        regime: cfg.regime,
        sigma0: cfg.sigma0,
        sigma,
        sigma_f: cfg.sigma_f,
        law: cfg.law,
    };
    noise.validate(m)?;

    let (psi0_ref, x_ref) = match &problem.optimum {
        Some(opt) => (Some(opt.psi0), Some(opt.x.clone())),
        None if problem.dim() <= 3 => {
            // reference solve for gap reporting on generators without an
            // analytic optimum
            match reference_grid(&problem) {
                Ok(sol) => (Some(sol.value), Some(sol.x)),
                Err(_) => (None, None),
            }
        }
        None => (None, None),
    };

    let b = match cfg.b {
        DualBoundChoice::Fixed(b) => b,
        DualBoundChoice::Auto => line_search_b(&problem, &noise, cfg, cfg.eps)?,
    };

    let schedule = if cfg.solver == SolverKind::ProxPointInexact {
        let psi0_lower = psi0_ref
            .ok_or_else(|| Error::Config("inexact proxpoint needs a reference optimum".into()))?;
        let x0 = default_start(&problem);
        let mu_max = problem
            .constraints()
            .iter()
            .map(|c| c.consts.mu)
            .fold(0.0, f64::max);
        let b_dual = match dual_bound(&problem, &x0, psi0_lower)? {
            DualBoundResult::Certified { b } => b.max(1.0),
            _ => b,
        };
        let inputs = ToleranceInputs {
            l_omega: problem.geometry().l_omega(),
            mu0: problem.mu0,
            mu_max,
            delta_psi0: problem.psi0(&x0) - psi0_lower,
            delta_bar0: conex::linalg::positive_part_norm2(&problem.psi(&x0)),
            c: cfg.c,
        };
        Some(tolerance_schedule(cfg.eps, b_dual, &inputs)?)
    } else {
        None
    };

    Ok(Experiment {
        cfg: cfg.clone(),
        problem,
        noise,
        psi0_ref,
        x_ref,
        b,
        schedule,
    })
}

fn reference_grid(p: &ConstrainedProblem) -> Result<conex::reference::GridSolution> {
    use conex::geometry::FeasibleSet;
    let (lower, upper) = match p.geometry().set() {
        FeasibleSet::Box { lower, upper } => (lower.clone(), upper.clone()),
        FeasibleSet::Ball { center, radius } => (
            center.iter().map(|c| c - radius).collect(),
            center.iter().map(|c| c + radius).collect(),
        ),
        FeasibleSet::Simplex { dim } => (vec![0.0; *dim], vec![1.0; *dim]),
    };
    let agg = p.aggregate_constants();
    let step = 2e-3;
    grid_solve(
        p,
        &GridSpec {
            lower,
            upper,
            step,
            slack: step * agg.m_f.max(1.0),
        },
    )
}

fn default_start(p: &ConstrainedProblem) -> Vec<f64> {
    use conex::geometry::FeasibleSet;
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

/// Doubling line search on the dual bound: starts at `B = 1` and doubles
/// until the measured infeasibility of the averaged iterate at the budget
/// prescribed for `eps` drops below `eps`. Capped at `2^16`.
pub fn line_search_b(
    p: &ConstrainedProblem,
    noise: &NoiseConfig,
    cfg: &ExperimentConfig,
    eps: f64,
) -> Result<f64> {
    use conex::oracles::Regime;
    if noise.regime == Regime::FullyStochastic {
        return Err(Error::Precondition(
            "the dual-bound line search needs exactly measurable constraints \
             (deterministic or semi-stochastic regime)"
                .into(),
        ));
    }
    let agg = p.aggregate_constants();
    let mut b = 1.0;
    while b <= 65536.0 {
        let t = iterations_for_accuracy(
            eps,
            &agg,
            noise,
            cfg.schedule,
            b,
            // under the hypothesis B >= |y*| + 1
            Some((b - 1.0).max(0.0)),
            cfg.h_knob,
            cfg.h_floor,
            ComplexityTarget::AveragedSolution,
        )?;
        let mut params = ConExParams::new(t, b, cfg.schedule);
        params.h_knob = cfg.h_knob;
        params.h_floor = cfg.h_floor;
        params.y_norm_hint = Some((b - 1.0).max(0.0));
        let res = run_conex(p, noise, &params, cfg.seeds.first().copied().unwrap_or(0))?;
        if p.infeasibility(&res.x_bar) <= eps {
            return Ok(b);
        }
        b *= 2.0;
    }
    Err(Error::SearchFailure(
        "dual-bound line search exceeded the 2^16 cap".into(),
    ))
}

/// Runs one (budget, seed) cell.
pub fn run_cell(exp: &Experiment, budget: usize, seed: u64, timing: bool) -> CsvRow {
    run_cell_with_checkpoints(exp, budget, seed, timing, 0).0
}

/// As [`run_cell`], additionally evaluating the running average at evenly
/// spaced checkpoints (primal-dual solver only).
pub fn run_cell_with_checkpoints(
    exp: &Experiment,
    budget: usize,
    seed: u64,
    timing: bool,
    checkpoints: usize,
) -> (CsvRow, Vec<conex::conex::CheckpointEval>) {
    let started = Instant::now();
    let mut row = CsvRow {
        problem: exp.cfg.problem.clone(),
        regime: exp.noise.regime.as_str(),
        schedule: exp.cfg.schedule.as_str(),
        budget,
        seed,
        gap: None,
        infeas: None,
        dist_w: None,
        kkt_feas: None,
        kkt_compl: None,
        kkt_stat: None,
        wall_time_s: 0.0,
        error: None,
    };
    let mut checkpoint_trace = Vec::new();
    let outcome = (|| -> Result<()> {
        match exp.cfg.solver {
            SolverKind::ConEx => {
                let mut params = ConExParams::new(budget, exp.b, exp.cfg.schedule);
                params.h_knob = exp.cfg.h_knob;
                params.h_floor = exp.cfg.h_floor;
                params.y_norm_hint = exp.cfg.y_norm_hint.or(Some((exp.b - 1.0).max(0.0)));
                params.checkpoint_evals = checkpoints;
                let res = run_conex(&exp.problem, &exp.noise, &params, seed)?;
                checkpoint_trace = res.checkpoints.clone();
                row.infeas = Some(exp.problem.infeasibility(&res.x_bar));
                if let Some(psi0_ref) = exp.psi0_ref {
                    let (gap, _) = optimality_and_infeasibility(&exp.problem, &res.x_bar, psi0_ref);
                    row.gap = Some(gap);
                }
                if let Some(x_ref) = &exp.x_ref {
                    row.dist_w =
                        Some(exp.problem.geometry().bregman_div(x_ref, &res.x_last)?);
                }
            }
            SolverKind::Baseline => {
                let x = projected_subgradient_baseline(&exp.problem, budget, 2.0 * exp.b);
                row.infeas = Some(exp.problem.infeasibility(&x));
                if let Some(psi0_ref) = exp.psi0_ref {
                    row.gap = Some(exp.problem.psi0(&x) - psi0_ref);
                }
            }
            SolverKind::ProxPointExact => {
                let x0 = default_start(&exp.problem);
                let trace =
                    run_exact_proxpoint(&exp.problem, &x0, budget, exp.cfg.inner_accuracy)?;
                let r = trace.residual_at_k_hat();
                row.kkt_feas = Some(r.feasibility);
                row.kkt_compl = Some(r.complementarity);
                row.kkt_stat = Some(r.stationarity);
                row.infeas = Some(r.feasibility);
                if let Some(psi0_ref) = exp.psi0_ref {
                    row.gap = Some(trace.psi0[trace.k_hat] - psi0_ref);
                }
            }
            SolverKind::ProxPointInexact => {
                let mut schedule = exp
                    .schedule
                    .ok_or_else(|| Error::Config("missing inexact schedule".into()))?;
                schedule.k_outer = budget;
                let x0 = default_start(&exp.problem);
                let trace = run_inexact_proxpoint(
                    &exp.problem,
                    &exp.noise,
                    &x0,
                    &schedule,
                    &InexactOptions::default(),
                    seed,
                )?;
                let r = trace.residual_at_k_hat();
                row.kkt_feas = Some(r.feasibility);
                row.kkt_compl = Some(r.complementarity);
                row.kkt_stat = Some(r.stationarity);
                row.infeas = Some(r.feasibility);
                if let Some(psi0_ref) = exp.psi0_ref {
                    row.gap = Some(trace.psi0[trace.k_hat] - psi0_ref);
                }
            }
        }
        Ok(())
    })();
    if let Err(e) = outcome {
        row.error = Some(e.to_string().replace(',', ";").replace('\n', " "));
    }
    if timing {
        row.wall_time_s = started.elapsed().as_secs_f64();
    }
    (row, checkpoint_trace)
}

/// Runs the whole experiment on `jobs` workers. Rows come back sorted by
/// (budget, seed) so the output is independent of scheduling; wall times are
/// zero unless `timing` is set, keeping the bytes deterministic.
pub fn run_experiment(cfg: &ExperimentConfig, jobs: usize, timing: bool) -> Result<Vec<CsvRow>> {
    let exp = prepare(cfg)?;
    let mut cells = Vec::new();
    for &budget in &cfg.budgets {
        for &seed in &cfg.seeds {
            cells.push((budget, seed));
        }
    }
    let jobs = jobs.max(1).min(cells.len().max(1));
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<CsvRow>>> = Mutex::new(vec![None; cells.len()]);
    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= cells.len() {
                    break;
                }
                let (budget, seed) = cells[i];
                let row = run_cell(&exp, budget, seed, timing);
                results.lock().unwrap()[i] = Some(row);
            });
        }
    });
    let mut rows: Vec<CsvRow> = results
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|r| r.expect("all cells computed"))
        .collect();
    rows.sort_by_key(|r| (r.budget, r.seed));
    Ok(rows)
}
