//! Experiment configuration: a single JSON document, optionally patched by
//! `key=value` overrides, validated field by field before any run.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use super::json::fmt17;
use crate::domain::{NonlinearityKind, NonlinearitySpec, SpatialGrid, TargetBall};
use crate::error::Error;
use crate::exec::Execution;
use crate::oracle::GalerkinSearch;
use crate::pde::{eigenmode_combination, first_eigenvalue};
use crate::problem::{ControlProblem, DEFAULT_STEPS};
use crate::reach::ReachOptions;
use crate::solvers::SolverOptions;

/// One rejected configuration field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

impl FieldError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub grid: GridConfig,
    /// Control region; the whole domain when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<OmegaConfig>,
    #[serde(default)]
    pub nonlinearity: NonlinearityConfig,
    pub y0: InitialState,
    pub r: f64,
    /// Time steps per solve, whatever the horizon.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nt: Option<usize>,
    /// Reference step; converted to `nt` through the spectral estimate of
    /// the free-decay hitting time.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub experiment: ExperimentParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "one")]
    pub ell: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OmegaConfig {
    pub a: f64,
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonlinearityConfig {
    pub kind: NonlinearityKind,
    #[serde(default)]
    pub lipschitz: f64,
}

impl Default for NonlinearityConfig {
    fn default() -> Self {
        Self {
            kind: NonlinearityKind::Zero,
            lipschitz: 0.0,
        }
    }
}

/// `{"modes": {"1": 2.0}}` means `2 e_1`; `{"file": "y0.txt"}` reads `n`
/// whitespace-separated nodal values, relative to the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialState {
    Modes(BTreeMap<String, f64>),
    File(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecutionKind {
    Sequential,
    Parallel,
}

impl From<ExecutionKind> for Execution {
    fn from(kind: ExecutionKind) -> Self {
        match kind {
            ExecutionKind::Sequential => Execution::Sequential,
            ExecutionKind::Parallel => Execution::Parallel,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub tol_time: f64,
    pub tol_norm: f64,
    pub max_doublings: usize,
    pub max_iters: usize,
    pub max_backtracks: usize,
    pub stagnation_tol: f64,
    pub feasibility_slack: f64,
    pub multi_start: bool,
    pub execution: ExecutionKind,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let s = SolverOptions::default();
        Self {
            tol_time: s.tol_time,
            tol_norm: s.tol_norm,
            max_doublings: s.max_doublings,
            max_iters: s.reach.max_iters,
            max_backtracks: s.reach.max_backtracks,
            stagnation_tol: s.reach.stagnation_tol,
            feasibility_slack: s.reach.feasibility_slack,
            multi_start: s.reach.multi_start,
            execution: ExecutionKind::Parallel,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentParams {
    /// `T` for `simulate`, `minnorm`, `gradcheck` and the Galerkin bracket.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    /// `M` for `mintime`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound: Option<f64>,
    /// Horizons for `equivalence`, `sweep` and `oracle-compare`.
    pub t_grid: Vec<f64>,
    /// Control bounds for `equivalence`, `sweep` and `oracle-compare`.
    pub m_grid: Vec<f64>,
    /// Relative band around the level for the bang-bang fraction.
    pub bangbang_delta: f64,
    pub gradcheck: GradcheckConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub galerkin: Option<GalerkinConfig>,
}

impl Default for ExperimentParams {
    fn default() -> Self {
        Self {
            horizon: None,
            bound: None,
            t_grid: Vec::new(),
            m_grid: Vec::new(),
            bangbang_delta: 0.05,
            gradcheck: GradcheckConfig::default(),
            galerkin: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradcheckConfig {
    pub samples: usize,
    pub seed: u64,
    /// Pointwise bound of the random base controls.
    pub bound: f64,
    /// Finite-difference step; chosen from the nonlinearity when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fd_step: Option<f64>,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        Self {
            samples: 20,
            seed: 0,
            bound: 5.0,
            fd_step: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GalerkinConfig {
    pub k_modes: usize,
    pub m_intervals: usize,
    pub amp_grid: Vec<f64>,
}

impl From<&GalerkinConfig> for GalerkinSearch {
    fn from(c: &GalerkinConfig) -> Self {
        GalerkinSearch {
            k_modes: c.k_modes,
            m_intervals: c.m_intervals,
            amp_grid: c.amp_grid.clone(),
        }
    }
}

fn one() -> f64 {
    1.0
}

/// Why a configuration could not be turned into an instance.
#[derive(Debug, Clone, PartialEq)]
pub enum ConfigError {
    Invalid(Vec<FieldError>),
    /// `y0` already lies in the target ball.
    InsideTarget {
        norm: f64,
        radius: f64,
    },
}

impl From<FieldError> for ConfigError {
    fn from(e: FieldError) -> Self {
        ConfigError::Invalid(vec![e])
    }
}

/// A validated configuration ready to run.
#[derive(Debug, Clone)]
pub struct Instance {
    pub config: ExperimentConfig,
    pub problem: ControlProblem,
    pub solver: SolverOptions,
    pub hash: String,
}

/// Reads `path`, applies `overrides` and validates the result.
pub fn load(path: &Path, overrides: &[String]) -> Result<Instance, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| FieldError::new("<config>", format!("cannot read {}: {e}", path.display())))?;
    let mut doc: Value = serde_json::from_str(&text)
        .map_err(|e| FieldError::new("<config>", format!("not valid JSON: {e}")))?;
    for o in overrides {
        apply_override(&mut doc, o)?;
    }
    let config = parse(doc)?;
    let base = path.parent().unwrap_or(Path::new("."));
    config.build(base)
}

/// Deserializes a configuration document, reporting the offending field.
pub fn parse(doc: Value) -> Result<ExperimentConfig, ConfigError> {
    serde_path_to_error::deserialize(doc).map_err(|e| {
        let field = match e.path().to_string() {
            p if p == "." => "<config>".to_string(),
            p => p,
        };
        FieldError::new(field, e.inner().to_string()).into()
    })
}

/// Sets the dotted `key` of `doc` to `value`, read as JSON when it parses
/// and as a string otherwise. Missing objects along the path are created.
pub fn apply_override(doc: &mut Value, spec: &str) -> Result<(), FieldError> {
    let (key, raw) = spec.split_once('=').ok_or_else(|| {
        FieldError::new("--override", format!("expected key=value, got {spec:?}"))
    })?;
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(FieldError::new(
            "--override",
            format!("malformed key {key:?}"),
        ));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = doc;
    for part in key.split('.') {
        if !node.is_object() {
            return Err(FieldError::new(key, "path crosses a non-object value"));
        }
        node = node
            .as_object_mut()
            .expect("checked above")
            .entry(part)
            .or_insert_with(|| Value::Object(Default::default()));
    }
    *node = value;
    Ok(())
}

impl ExperimentConfig {
    /// Field-level validation, then construction of the control problem.
    pub fn build(self, base: &Path) -> Result<Instance, ConfigError> {
        let mut errs = Vec::new();
        let mut check = |ok: bool, field: &str, msg: String| {
            if !ok {
                errs.push(FieldError::new(field, msg));
            }
        };
        let ell = self.grid.ell;
        check(
            ell.is_finite() && ell > 0.0,
            "grid.ell",
            format!("must be positive, got {ell}"),
        );
        check(
            self.grid.n >= 1,
            "grid.n",
            "needs at least one interior node".into(),
        );
        if let Some(w) = &self.omega {
            check(
                w.a.is_finite() && w.b.is_finite() && 0.0 <= w.a && w.a < w.b && w.b <= ell,
                "omega",
                format!(
                    "({}, {}) must be a nonempty subinterval of (0, {ell})",
                    w.a, w.b
                ),
            );
        }
        let lip = self.nonlinearity.lipschitz;
        check(
            lip.is_finite() && lip >= 0.0,
            "nonlinearity.lipschitz",
            format!("must be finite and nonnegative, got {lip}"),
        );
        check(
            self.r.is_finite() && self.r > 0.0,
            "r",
            format!("must be positive, got {}", self.r),
        );
        match (self.nt, self.dt) {
            (Some(_), Some(_)) => check(false, "dt", "give either nt or dt, not both".into()),
            (Some(nt), None) => check(nt >= 1, "nt", "must be at least 1".into()),
            (None, Some(dt)) => check(
                dt.is_finite() && dt > 0.0,
                "dt",
                format!("must be positive, got {dt}"),
            ),
            (None, None) => {}
        }
        let s = &self.solver;
        for (field, v) in [
            ("solver.tol_time", s.tol_time),
            ("solver.tol_norm", s.tol_norm),
            ("solver.stagnation_tol", s.stagnation_tol),
        ] {
            check(
                v.is_finite() && v > 0.0,
                field,
                format!("must be positive, got {v}"),
            );
        }
        check(
            s.feasibility_slack > 0.0 && s.feasibility_slack < 0.5,
            "solver.feasibility_slack",
            format!("must lie in (0, 0.5), got {}", s.feasibility_slack),
        );
        check(
            s.max_iters >= 1,
            "solver.max_iters",
            "must be at least 1".into(),
        );
        check(
            s.max_backtracks >= 1,
            "solver.max_backtracks",
            "must be at least 1".into(),
        );
        let e = &self.experiment;
        if let Some(t) = e.horizon {
            check(
                t.is_finite() && t > 0.0,
                "experiment.horizon",
                format!("must be positive, got {t}"),
            );
        }
        if let Some(m) = e.bound {
            check(
                m.is_finite() && m >= 0.0,
                "experiment.bound",
                format!("must be nonnegative, got {m}"),
            );
        }
        check(
            increasing(&e.t_grid) && e.t_grid.iter().all(|&t| t > 0.0),
            "experiment.t_grid",
            "must be positive and strictly increasing".into(),
        );
        check(
            increasing(&e.m_grid) && e.m_grid.iter().all(|&m| m >= 0.0),
            "experiment.m_grid",
            "must be nonnegative and strictly increasing".into(),
        );
        check(
            e.bangbang_delta > 0.0 && e.bangbang_delta < 1.0,
            "experiment.bangbang_delta",
            format!("must lie in (0, 1), got {}", e.bangbang_delta),
        );
        let gc = &e.gradcheck;
        check(
            gc.samples >= 1,
            "experiment.gradcheck.samples",
            "must be at least 1".into(),
        );
        check(
            gc.bound.is_finite() && gc.bound > 0.0,
            "experiment.gradcheck.bound",
            format!("must be positive, got {}", gc.bound),
        );
        if let Some(h) = gc.fd_step {
            check(
                h.is_finite() && h > 0.0,
                "experiment.gradcheck.fd_step",
                format!("must be positive, got {h}"),
            );
        }

        if !errs.is_empty() {
            return Err(ConfigError::Invalid(errs));
        }
        let grid = match &self.omega {
            Some(w) => SpatialGrid::new(ell, self.grid.n, w.a, w.b),
            None => SpatialGrid::whole_domain(ell, self.grid.n),
        }
        .map_err(|e| FieldError::new("omega", e.to_string()))?;
        let y0 = self.initial_state(&grid, base)?;

        let f = NonlinearitySpec::new(self.nonlinearity.kind, lip)
            .map_err(|e| FieldError::new("nonlinearity", e.to_string()))?;
        let ball = TargetBall::new(self.r).map_err(|e| FieldError::new("r", e.to_string()))?;
        let steps = match (self.nt, self.dt) {
            (Some(nt), _) => nt,
            (None, Some(dt)) => {
                let norm = crate::domain::l2_norm(&y0, &grid)
                    .map_err(|e| FieldError::new("y0", e.to_string()))?;
                let estimate = (norm / self.r).ln() / first_eigenvalue(&grid);
                if !(estimate > 0.0) {
                    return Err(ConfigError::InsideTarget {
                        norm,
                        radius: self.r,
                    });
                }
                (estimate / dt).ceil().max(1.0) as usize
            }
            (None, None) => DEFAULT_STEPS,
        };
        let problem = ControlProblem::new(grid, f, y0, ball, steps).map_err(|e| match e {
            Error::InsideTarget { norm, radius } => ConfigError::InsideTarget { norm, radius },
            other => FieldError::new("nonlinearity", other.to_string()).into(),
        })?;

        let solver = SolverOptions {
            reach: ReachOptions {
                max_iters: s.max_iters,
                max_backtracks: s.max_backtracks,
                stagnation_tol: s.stagnation_tol,
                feasibility_slack: s.feasibility_slack,
                multi_start: s.multi_start,
                ..ReachOptions::default()
            },
            tol_time: s.tol_time,
            tol_norm: s.tol_norm,
            max_doublings: s.max_doublings,
            execution: s.execution.into(),
        };
        let hash = self.hash(problem.y0());
        Ok(Instance {
            config: self,
            problem,
            solver,
            hash,
        })
    }

    fn initial_state(&self, g: &SpatialGrid, base: &Path) -> Result<Vec<f64>, FieldError> {
        match &self.y0 {
            InitialState::Modes(modes) => {
                let mut pairs = Vec::with_capacity(modes.len());
                for (key, &coef) in modes {
                    let mode = key
                        .parse::<usize>()
                        .ok()
                        .filter(|&m| 1 <= m && m <= g.n())
                        .ok_or_else(|| {
                            FieldError::new(
                                format!("y0.modes.{key}"),
                                format!("mode index must lie in 1..={}", g.n()),
                            )
                        })?;
                    if !coef.is_finite() {
                        return Err(FieldError::new(
                            format!("y0.modes.{key}"),
                            "coefficient must be finite",
                        ));
                    }
                    pairs.push((mode, coef));
                }
                if pairs.is_empty() {
                    return Err(FieldError::new("y0.modes", "needs at least one mode"));
                }
                eigenmode_combination(g, &pairs)
                    .map_err(|e| FieldError::new("y0.modes", e.to_string()))
            }
            InitialState::File(file) => {
                let path = base.join(file);
                let text = std::fs::read_to_string(&path).map_err(|e| {
                    FieldError::new("y0.file", format!("cannot read {}: {e}", path.display()))
                })?;
                let values = text
                    .split_whitespace()
                    .map(|t| t.parse::<f64>().ok().filter(|v| v.is_finite()))
                    .collect::<Option<Vec<f64>>>()
                    .ok_or_else(|| FieldError::new("y0.file", "entries must be finite numbers"))?;
                if values.len() != g.n() {
                    return Err(FieldError::new(
                        "y0.file",
                        format!("expected {} values, found {}", g.n(), values.len()),
                    ));
                }
                Ok(values)
            }
        }
    }

    /// SHA-256 of the canonical configuration (defaults filled in) followed
    /// by the resolved initial state.
    pub fn hash(&self, y0: &[f64]) -> String {
        let mut hasher = Sha256::new();
        hasher.update(
            serde_json::to_string(self)
                .expect("config serializes")
                .as_bytes(),
        );
        for v in y0 {
            hasher.update(b"\n");
            hasher.update(fmt17(*v).as_bytes());
        }
        hex::encode(hasher.finalize())
    }
}

fn increasing(grid: &[f64]) -> bool {
    grid.iter().all(|v| v.is_finite()) && grid.windows(2).all(|w| w[0] < w[1])
}
