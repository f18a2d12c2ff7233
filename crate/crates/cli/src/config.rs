//! Scenario files: one JSON document per run.
//!
//! ```json
//! {
//!   "problem": { "kind": "scalar-lq", "a": 0.0 },
//!   "grid": { "t0": 0.0, "t_end": 1.0, "steps": 200 },
//!   "task": { "kind": "riccati" },
//!   "seed": 0
//! }
//! ```
//!
//! Unknown keys are rejected everywhere. Defaults: `steps = 200`,
//! `ridge = 0`, `lambda = 1`, `seed = 0`, `t0 = 0`, `t_end = 1`.

use std::f64::consts::PI;
use std::sync::Arc;

use lqrk_core::linalg::{min_sym_eigenvalue, Mat, Vector};
use lqrk_core::{
    discretize_heat, OperatorPath, ProblemData, RandomProblem, SpectralHeatModel, TimeGrid,
};
use serde::Deserialize;

use crate::error::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub problem: ProblemSpec,
    #[serde(default)]
    pub grid: GridSpec,
    pub task: TaskSpec,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default)]
    pub tolerances: CheckTolerances,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default)]
    pub t0: f64,
    #[serde(default = "one")]
    pub t_end: f64,
    #[serde(default = "default_steps")]
    pub steps: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            t0: 0.0,
            t_end: 1.0,
            steps: default_steps(),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: Option<String>,
    pub trajectory: Option<String>,
    pub diagnostics: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProblemSpec {
    ScalarLq {
        #[serde(default)]
        a: f64,
        #[serde(default = "one")]
        b: f64,
        #[serde(default = "one")]
        m: f64,
        #[serde(default = "one")]
        n: f64,
        #[serde(default = "one")]
        j0: f64,
    },
    Random {
        dim: usize,
        controls: usize,
        #[serde(default = "yes")]
        time_varying: bool,
    },
    HeatSpectral {
        #[serde(default = "three")]
        modes: usize,
        #[serde(default = "two_pi")]
        domain_length: f64,
        #[serde(default = "one")]
        lambda: f64,
    },
    Explicit {
        a: PathSpec,
        b: PathSpec,
        m: PathSpec,
        n: PathSpec,
        j0: MatrixSpec,
    },
}

/// A matrix given as a number (1x1) or as a list of rows.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum MatrixSpec {
    Scalar(f64),
    Rows(Vec<Vec<f64>>),
}

/// A constant matrix, or one matrix per grid node.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum PathSpec {
    Constant(MatrixSpec),
    Sampled { nodes: Vec<MatrixSpec> },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TaskSpec {
    Riccati {},
    KernelGram {
        points: Vec<f64>,
        #[serde(default)]
        part: PartSpec,
    },
    LqrCompare {
        y0: Vec<f64>,
    },
    Mayer {
        terminal: TerminalSpec,
        #[serde(default)]
        method: MethodSpec,
        #[serde(default = "half")]
        damping: f64,
        #[serde(default = "default_iterations")]
        max_iterations: usize,
        #[serde(default = "default_mayer_tolerance")]
        tolerance: f64,
    },
    Interp {
        #[serde(default)]
        y0: Option<Vec<f64>>,
        points: Vec<f64>,
        targets: Vec<Vec<f64>>,
        #[serde(default)]
        ridge: f64,
    },
    HeatCheck {
        #[serde(default = "half")]
        s: f64,
        #[serde(default = "one")]
        t: f64,
    },
    Verify {},
}

impl TaskSpec {
    pub fn name(&self) -> &'static str {
        match self {
            TaskSpec::Riccati {} => "riccati",
            TaskSpec::KernelGram { .. } => "kernel-gram",
            TaskSpec::LqrCompare { .. } => "lqr-compare",
            TaskSpec::Mayer { .. } => "mayer",
            TaskSpec::Interp { .. } => "interp",
            TaskSpec::HeatCheck { .. } => "heat-check",
            TaskSpec::Verify {} => "verify",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PartSpec {
    #[default]
    Full,
    Initial,
    ZeroInitial,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodSpec {
    #[default]
    Auto,
    Picard,
    Newton,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TerminalSpec {
    /// `1/2 (h - target)^T weight (h - target)`; weight defaults to identity.
    Quadratic {
        target: Vec<f64>,
        #[serde(default)]
        weight: Option<MatrixSpec>,
    },
    /// `scale * sum ln cosh(h_i - target_i)`.
    LogCosh {
        target: Vec<f64>,
        #[serde(default = "one")]
        scale: f64,
        #[serde(default = "yes")]
        hessian: bool,
    },
}

/// Pass thresholds of the invariant checks.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CheckTolerances {
    pub eigenvalue: f64,
    pub symmetry: f64,
    pub riccati_symmetry: f64,
    pub decoupling: f64,
    pub semigroup: f64,
    pub kernel_symmetry: f64,
    pub gram: f64,
    pub reproducing: f64,
    pub lqr_gap: f64,
    pub orthogonality: f64,
    pub decomposition: f64,
    pub feasibility: f64,
    /// Relative to the squared norm of the interpolant.
    pub minimality: f64,
    pub stationarity: f64,
    pub heat_k1: f64,
    pub heat_k0: f64,
    pub heat_identity: f64,
}

impl Default for CheckTolerances {
    fn default() -> Self {
        Self {
            eigenvalue: 1e-10,
            symmetry: 1e-10,
            riccati_symmetry: 1e-10,
            decoupling: 1e-4,
            semigroup: 1e-10,
            kernel_symmetry: 1e-8,
            gram: 1e-8,
            reproducing: 1e-3,
            lqr_gap: 1e-3,
            orthogonality: 1e-4,
            decomposition: 1e-8,
            feasibility: 1e-8,
            minimality: 1e-4,
            stationarity: 1e-8,
            heat_k1: 1e-6,
            heat_k0: 1e-8,
            heat_identity: 1e-6,
        }
    }
}

fn one() -> f64 {
    1.0
}
fn half() -> f64 {
    0.5
}
fn two_pi() -> f64 {
    2.0 * PI
}
fn three() -> usize {
    3
}
fn yes() -> bool {
    true
}
fn default_steps() -> usize {
    200
}
fn default_iterations() -> usize {
    200
}
fn default_mayer_tolerance() -> f64 {
    1e-10
}

/// Strict parse; errors name the offending key path.
pub fn parse_config(text: &str) -> Result<Scenario, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let scenario: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if path == "." || path.is_empty() {
            CliError::Config(inner.to_string())
        } else {
            CliError::Config(format!("{path}: {inner}"))
        }
    })?;
    scenario.check()?;
    Ok(scenario)
}

impl Scenario {
    /// Checks that need more than the schema.
    pub fn check(&self) -> Result<(), CliError> {
        let g = &self.grid;
        if !(g.t0.is_finite() && g.t_end.is_finite() && g.t_end > g.t0) {
            return Err(CliError::Config(format!(
                "grid: need t0 < t_end, got {} and {}",
                g.t0, g.t_end
            )));
        }
        if g.steps < 2 {
            return Err(CliError::Config(format!("grid.steps: need at least 2, got {}", g.steps)));
        }
        if matches!(self.task, TaskSpec::HeatCheck { .. }) && !matches!(self.problem, ProblemSpec::HeatSpectral { .. })
        {
            return Err(CliError::Config("task: heat-check needs a heat-spectral problem".into()));
        }
        if let TaskSpec::Interp { points, targets, ridge, .. } = &self.task {
            if points.len() != targets.len() {
                return Err(CliError::Config(format!(
                    "task.targets: {} targets for {} points",
                    targets.len(),
                    points.len()
                )));
            }
            if points.is_empty() {
                return Err(CliError::Config("task.points: at least one point is required".into()));
            }
            if !(*ridge >= 0.0) {
                return Err(CliError::Config(format!("task.ridge: must be nonnegative, got {ridge}")));
            }
        }
        if let TaskSpec::Mayer { damping, .. } = &self.task {
            if !(*damping > 0.0 && *damping <= 1.0) {
                return Err(CliError::Config(format!("task.damping: must lie in (0, 1], got {damping}")));
            }
        }
        Ok(())
    }

    /// Problem data on a uniform grid with `steps` steps; the heat model is
    /// returned alongside for heat-spectral problems.
    pub fn build(&self, steps: usize, seed: u64) -> Result<(ProblemData, Option<SpectralHeatModel>), CliError> {
        let grid = Arc::new(
            TimeGrid::uniform(self.grid.t0, self.grid.t_end, steps)
                .map_err(|e| CliError::Config(format!("grid: {e}")))?,
        );
        build_problem(&self.problem, grid, seed)
    }
}

pub fn build_problem(
    spec: &ProblemSpec,
    grid: Arc<TimeGrid>,
    seed: u64,
) -> Result<(ProblemData, Option<SpectralHeatModel>), CliError> {
    let cfg = |e: lqrk_core::Error| CliError::Config(format!("problem: {e}"));
    match spec {
        ProblemSpec::ScalarLq { a, b, m, n, j0 } => {
            Ok((ProblemData::scalar(grid, *a, *b, *m, *n, *j0).map_err(cfg)?, None))
        }
        ProblemSpec::Random {
            dim,
            controls,
            time_varying,
        } => {
            if *dim == 0 || *controls == 0 {
                return Err(CliError::Config("problem: dim and controls must be positive".into()));
            }
            let gen = RandomProblem {
                state_dim: *dim,
                control_dim: *controls,
                time_varying: *time_varying,
            };
            Ok((gen.generate(grid, seed).map_err(cfg)?, None))
        }
        ProblemSpec::HeatSpectral {
            modes,
            domain_length,
            lambda,
        } => {
            let model = SpectralHeatModel::new(*modes, *domain_length, *lambda, grid).map_err(cfg)?;
            Ok((discretize_heat(&model).map_err(cfg)?, Some(model)))
        }
        ProblemSpec::Explicit { a, b, m, n, j0 } => {
            let a = path(a, &grid, "problem.a")?;
            let b = path(b, &grid, "problem.b")?;
            let m = path(m, &grid, "problem.m")?;
            let n = path(n, &grid, "problem.n")?;
            let j0 = matrix(j0, "problem.j0")?;
            let nu = n
                .values()
                .iter()
                .map(min_sym_eigenvalue)
                .fold(f64::INFINITY, f64::min);
            if !(nu > 0.0) {
                return Err(CliError::Config(format!(
                    "problem.n: must be positive definite at every node (min eigenvalue {nu:e})"
                )));
            }
            Ok((ProblemData::new(a, b, m, n, j0, nu).map_err(cfg)?, None))
        }
    }
}

fn matrix(spec: &MatrixSpec, key: &str) -> Result<Mat, CliError> {
    match spec {
        MatrixSpec::Scalar(x) => Ok(Mat::from_element(1, 1, *x)),
        MatrixSpec::Rows(rows) => {
            let r = rows.len();
            let c = rows.first().map_or(0, Vec::len);
            if r == 0 || c == 0 || rows.iter().any(|row| row.len() != c) {
                return Err(CliError::Config(format!("{key}: rows must be nonempty and of equal length")));
            }
            Ok(Mat::from_fn(r, c, |i, j| rows[i][j]))
        }
    }
}

fn path(spec: &PathSpec, grid: &Arc<TimeGrid>, key: &str) -> Result<OperatorPath, CliError> {
    match spec {
        PathSpec::Constant(m) => Ok(OperatorPath::constant(grid.clone(), matrix(m, key)?)),
        PathSpec::Sampled { nodes } => {
            if nodes.len() != grid.len() {
                return Err(CliError::Config(format!(
                    "{key}.nodes: {} matrices for {} grid nodes",
                    nodes.len(),
                    grid.len()
                )));
            }
            let values = nodes.iter().map(|m| matrix(m, key)).collect::<Result<Vec<_>, _>>()?;
            OperatorPath::new(grid.clone(), values).map_err(|e| CliError::Config(format!("{key}: {e}")))
        }
    }
}

/// Node index of a configured time.
pub fn node_index(grid: &TimeGrid, t: f64, key: &str) -> Result<usize, CliError> {
    grid.index_of(t)
        .ok_or_else(|| CliError::Config(format!("{key}: {t} is not a grid node")))
}

pub fn vector(values: &[f64], dim: usize, key: &str) -> Result<Vector, CliError> {
    if values.len() != dim {
        return Err(CliError::Config(format!(
            "{key}: expected {dim} entries, got {}",
            values.len()
        )));
    }
    Ok(Vector::from_column_slice(values))
}

pub fn weight_matrix(spec: &Option<MatrixSpec>, dim: usize, key: &str) -> Result<Mat, CliError> {
    let m = match spec {
        None => return Ok(Mat::identity(dim, dim)),
        Some(MatrixSpec::Scalar(x)) => Mat::identity(dim, dim) * *x,
        Some(rows) => matrix(rows, key)?,
    };
    if m.shape() != (dim, dim) {
        return Err(CliError::Config(format!("{key}: expected {dim}x{dim}, got {:?}", m.shape())));
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let s = parse_config(r#"{"problem": {"kind": "scalar-lq"}, "task": {"kind": "riccati"}}"#).unwrap();
        assert_eq!(s.grid.steps, 200);
        assert_eq!(s.seed, 0);
        assert!(matches!(s.problem, ProblemSpec::ScalarLq { a, b, .. } if a == 0.0 && b == 1.0));
    }

    #[test]
    fn unknown_keys_are_named() {
        let err = parse_config(r#"{"problem": {"kind": "scalar-lq"}, "task": {"kind": "riccati"}, "foo": 1}"#)
            .unwrap_err();
        assert!(err.to_string().contains("foo"), "{err}");
        let err = parse_config(r#"{"problem": {"kind": "scalar-lq"}, "grid": {"stepz": 3}, "task": {"kind": "riccati"}}"#)
            .unwrap_err();
        assert!(err.to_string().contains("stepz"), "{err}");
        let err = parse_config(r#"{"problem": {"kind": "scalar-lq", "foo": 2}, "task": {"kind": "riccati"}}"#)
            .unwrap_err();
        assert!(err.to_string().contains("foo"), "{err}");
        let err = parse_config(r#"{"problem": {"kind": "scalar-lq"}, "task": {"kind": "riccati", "foo": 2}}"#)
            .unwrap_err();
        assert!(err.to_string().contains("foo"), "{err}");
    }

    #[test]
    fn missing_targets_is_a_config_error() {
        let err = parse_config(r#"{"problem": {"kind": "scalar-lq"}, "task": {"kind": "interp", "points": [1.0]}}"#)
            .unwrap_err();
        assert!(matches!(err, CliError::Config(_)));
        assert!(err.to_string().contains("targets"), "{err}");
    }

    #[test]
    fn heat_check_needs_heat_problem() {
        let err = parse_config(r#"{"problem": {"kind": "scalar-lq"}, "task": {"kind": "heat-check"}}"#).unwrap_err();
        assert!(err.to_string().contains("heat-spectral"));
    }

    #[test]
    fn explicit_matrices() {
        let s = parse_config(
            r#"{"problem": {"kind": "explicit", "a": [[0, 1], [-1, 0]], "b": [[0], [1]],
                "m": [[1, 0], [0, 1]], "n": 2, "j0": [[1, 0], [0, 1]]},
                "grid": {"steps": 4}, "task": {"kind": "riccati"}}"#,
        )
        .unwrap();
        let (p, heat) = s.build(4, 0).unwrap();
        assert!(heat.is_none());
        assert_eq!(p.state_dim(), 2);
        assert_eq!(p.nu, 2.0);
        let bad = parse_config(
            r#"{"problem": {"kind": "explicit", "a": {"nodes": [0, 0]}, "b": 1, "m": 1, "n": 1, "j0": 1},
                "grid": {"steps": 4}, "task": {"kind": "riccati"}}"#,
        )
        .unwrap();
        assert!(bad.build(4, 0).unwrap_err().to_string().contains("problem.a.nodes"));
    }
}
