//! Flat `key = value` experiment configuration with typed sections.
//!
//! ```text
//! [problem]
//! name = ball-projection
//! a = 1.0, 1.0            # generator parameters, scalars or comma lists
//!
//! [noise]
//! regime = deterministic  # deterministic | semi-stochastic | fully-stochastic
//! sigma0 = 0.0
//! sigma = 0.0             # per-constraint list
//! sigmaf = 0.0
//! law = gaussian          # gaussian | scenario
//!
//! [solver]
//! kind = conex            # conex | proxpoint-exact | proxpoint-inexact | baseline
//! schedule = strongly-convex
//! b = 2.0                 # or: auto (doubling line search)
//! h-knob = hb             # hb | hstar
//! h-floor = 0.0
//! y-norm-hint = 1.0
//! eps = 0.01
//! c = 1.0
//! inner-accuracy = 1e-10
//!
//! [run]
//! budgets = 100, 200, 400
//! seeds = 0, 1, 2
//! checkpoints = 8
//! out = results.csv
//! ```
//!
//! Unknown sections or keys are rejected with their line number.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use conex::error::{Error, Result};
use conex::oracles::{NoiseLaw, Regime};
use conex::problems::{ParamMap, ParamValue};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    ConEx,
    ProxPointExact,
    ProxPointInexact,
    Baseline,
}

impl SolverKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolverKind::ConEx => "conex",
            SolverKind::ProxPointExact => "proxpoint-exact",
            SolverKind::ProxPointInexact => "proxpoint-inexact",
            SolverKind::Baseline => "baseline",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DualBoundChoice {
    Fixed(f64),
    /// Doubling line search on the measured infeasibility.
    Auto,
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub problem: String,
    pub params: ParamMap,
    pub regime: Regime,
    pub sigma0: f64,
    pub sigma: Vec<f64>,
    pub sigma_f: f64,
    pub law: NoiseLaw,
    pub solver: SolverKind,
    pub schedule: conex::conex::ScheduleKind,
    pub b: DualBoundChoice,
    pub h_knob: conex::conex::HKnob,
    pub h_floor: f64,
    pub y_norm_hint: Option<f64>,
    pub eps: f64,
    pub c: f64,
    pub inner_accuracy: f64,
    pub budgets: Vec<usize>,
    pub seeds: Vec<u64>,
    pub checkpoints: usize,
    pub out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            problem: String::new(),
            params: ParamMap::new(),
            regime: Regime::Deterministic,
            sigma0: 0.0,
            sigma: Vec::new(),
            sigma_f: 0.0,
            law: NoiseLaw::Gaussian,
            solver: SolverKind::ConEx,
            schedule: conex::conex::ScheduleKind::StronglyConvex,
            b: DualBoundChoice::Fixed(1.0),
            h_knob: conex::conex::HKnob::B,
            h_floor: 0.0,
            y_norm_hint: None,
            eps: 1e-2,
            c: 1.0,
            inner_accuracy: 1e-10,
            budgets: Vec::new(),
            seeds: vec![0],
            checkpoints: 8,
            out: None,
        }
    }
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Config(format!("line {line}: {}", msg.into()))
}

fn parse_floats(line: usize, value: &str) -> Result<Vec<f64>> {
    value
        .split(',')
        .map(|tok| {
            tok.trim()
                .parse::<f64>()
                .map_err(|_| parse_err(line, format!("expected a number, got '{}'", tok.trim())))
        })
        .collect()
}

/// Parses a configuration file.
pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config_str(&text)
}

/// Parses configuration text; exposed for tests and embedding.
pub fn parse_config_str(text: &str) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::default();
    let mut section = String::new();
    let mut seen_seeds = false;
    let mut raw_problem: BTreeMap<String, (usize, String)> = BTreeMap::new();

    for (idx, raw_line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = match raw_line.find('#') {
            Some(pos) => &raw_line[..pos],
            None => raw_line,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            section = name.trim().to_string();
            if !matches!(section.as_str(), "problem" | "noise" | "solver" | "run") {
                return Err(parse_err(lineno, format!("unknown section '[{section}]'")));
            }
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| parse_err(lineno, "expected 'key = value'"))?;
        let key = key.trim();
        let value = value.trim();
        match section.as_str() {
            "problem" => {
                raw_problem.insert(key.to_string(), (lineno, value.to_string()));
            }
            "noise" => match key {
                "regime" => {
                    cfg.regime = match value {
                        "deterministic" => Regime::Deterministic,
                        "semi-stochastic" => Regime::SemiStochastic,
                        "fully-stochastic" => Regime::FullyStochastic,
                        other => {
                            return Err(parse_err(lineno, format!("unknown regime '{other}'")))
                        }
                    }
                }
                "sigma0" => cfg.sigma0 = parse_floats(lineno, value)?[0],
                "sigma" => cfg.sigma = parse_floats(lineno, value)?,
                "sigmaf" => cfg.sigma_f = parse_floats(lineno, value)?[0],
                "law" => {
                    cfg.law = match value {
                        "gaussian" => NoiseLaw::Gaussian,
                        "scenario" => NoiseLaw::ScenarioSubsampling,
                        other => return Err(parse_err(lineno, format!("unknown law '{other}'"))),
                    }
                }
                other => return Err(parse_err(lineno, format!("unknown noise key '{other}'"))),
            },
            "solver" => match key {
                "kind" => {
                    cfg.solver = match value {
                        "conex" => SolverKind::ConEx,
                        "proxpoint-exact" => SolverKind::ProxPointExact,
                        "proxpoint-inexact" => SolverKind::ProxPointInexact,
                        "baseline" => SolverKind::Baseline,
                        other => {
                            return Err(parse_err(lineno, format!("unknown solver '{other}'")))
                        }
                    }
                }
                "schedule" => {
                    cfg.schedule = match value {
                        "strongly-convex" => conex::conex::ScheduleKind::StronglyConvex,
                        "convex" => conex::conex::ScheduleKind::Convex,
                        other => {
                            return Err(parse_err(lineno, format!("unknown schedule '{other}'")))
                        }
                    }
                }
                "b" => {
                    cfg.b = if value == "auto" {
                        DualBoundChoice::Auto
                    } else {
                        DualBoundChoice::Fixed(parse_floats(lineno, value)?[0])
                    }
                }
                "h-knob" => {
                    cfg.h_knob = match value {
                        "hb" => conex::conex::HKnob::B,
                        "hstar" => conex::conex::HKnob::Star,
                        other => return Err(parse_err(lineno, format!("unknown h-knob '{other}'"))),
                    }
                }
                "h-floor" => cfg.h_floor = parse_floats(lineno, value)?[0],
                "y-norm-hint" => cfg.y_norm_hint = Some(parse_floats(lineno, value)?[0]),
                "eps" => cfg.eps = parse_floats(lineno, value)?[0],
                "c" => cfg.c = parse_floats(lineno, value)?[0],
                "inner-accuracy" => cfg.inner_accuracy = parse_floats(lineno, value)?[0],
                other => return Err(parse_err(lineno, format!("unknown solver key '{other}'"))),
            },
            "run" => match key {
                "budgets" => {
                    cfg.budgets = parse_floats(lineno, value)?
                        .into_iter()
                        .map(|v| v as usize)
                        .collect()
                }
                "seeds" => {
                    cfg.seeds = parse_floats(lineno, value)?
                        .into_iter()
                        .map(|v| v as u64)
                        .collect();
                    seen_seeds = true;
                }
                "checkpoints" => cfg.checkpoints = parse_floats(lineno, value)?[0] as usize,
                "out" => cfg.out = Some(PathBuf::from(value)),
                other => return Err(parse_err(lineno, format!("unknown run key '{other}'"))),
            },
            "" => return Err(parse_err(lineno, "key outside of any [section]")),
            _ => unreachable!(),
        }
    }

    // problem parameters: 'name' is reserved, everything else is forwarded
    for (key, (lineno, value)) in raw_problem {
        if key == "name" {
            cfg.problem = value;
            continue;
        }
        let values = parse_floats(lineno, &value)?;
        let param = if values.len() == 1 {
            ParamValue::Scalar(values[0])
        } else {
            ParamValue::Vector(values)
        };
        cfg.params.insert(key, param);
    }
    if !seen_seeds {
        cfg.seeds = vec![0];
    }
    validate(&cfg)?;
    Ok(cfg)
}

fn validate(cfg: &ExperimentConfig) -> Result<()> {
    if cfg.problem.is_empty() {
        return Err(Error::Config("missing problem name ([problem] name = ...)".into()));
    }
    for w in cfg.budgets.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::Config("budgets strictly increasing".into()));
        }
    }
    if cfg.seeds.is_empty() {
        return Err(Error::Config("at least one seed is required".into()));
    }
    if cfg.regime != Regime::Deterministic && cfg.budgets.len() >= 2 && cfg.seeds.len() < 8 {
        return Err(Error::Config(
            "stochastic rate experiments (multiple budgets) require at least 8 seeds".into(),
        ));
    }
    if let DualBoundChoice::Fixed(b) = cfg.b {
        if !(b >= 1.0) {
            return Err(Error::Config("dual bound b must be >= 1 (or 'auto')".into()));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "\
[problem]
name = ball-projection

[run]
budgets = 100, 200
";

    #[test]
    fn minimal_config_fills_defaults() {
        let cfg = parse_config_str(MINIMAL).unwrap();
        assert_eq!(cfg.problem, "ball-projection");
        assert_eq!(cfg.seeds, vec![0]);
        assert_eq!(cfg.checkpoints, 8);
        assert_eq!(cfg.regime, Regime::Deterministic);
    }

    #[test]
    fn budgets_must_increase() {
        let text = "[problem]\nname = ball-projection\n[run]\nbudgets = 100, 50\n";
        let err = parse_config_str(text).unwrap_err();
        assert!(err.to_string().contains("strictly increasing"), "{err}");
    }

    #[test]
    fn stochastic_rate_needs_seeds() {
        let text = "\
[problem]
name = ball-projection
[noise]
regime = semi-stochastic
sigma0 = 1.0
[run]
budgets = 100, 200
seeds = 0
";
        let err = parse_config_str(text).unwrap_err();
        assert!(err.to_string().contains("8 seeds"), "{err}");
    }

    #[test]
    fn unknown_keys_are_rejected_with_line_numbers() {
        let text = "[problem]\nname = ball-projection\n[run]\nbudgets = 10\nbogus = 1\n";
        let err = parse_config_str(text).unwrap_err();
        assert!(err.to_string().contains("line 5"), "{err}");
        let text = "[nope]\nx = 1\n";
        assert!(parse_config_str(text).is_err());
    }

    #[test]
    fn problem_params_forwarded() {
        let text = "\
[problem]
name = ball-projection
a = 1.0, 1.0
r = 0.25
[run]
budgets = 10
";
        let cfg = parse_config_str(text).unwrap();
        assert_eq!(
            cfg.params.get("a"),
            Some(&ParamValue::Vector(vec![1.0, 1.0]))
        );
        assert_eq!(cfg.params.get("r"), Some(&ParamValue::Scalar(0.25)));
    }
}
