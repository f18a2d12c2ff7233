//! Scenario execution.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use lqrk_core::linalg::{min_sym_eigenvalue, Mat, Vector};
use lqrk_core::{
    check_k1_identity, compare_with_analytic, eval_objective, heat_semigroup_defect, solve_interpolation,
    solve_lqr_via_kernel, solve_mayer, solve_riccati, KernelPart, LogCoshCost, MayerMethod, MayerOptions,
    MayerProblem, ProblemData, QuadraticCost, SpectralHeatModel, TerminalCost,
};
use serde_json::{json, Value};

use crate::checks::{all_pass, check_problem, gram_with_defect, InvariantBlock, Pipeline};
use crate::config::{
    node_index, vector, weight_matrix, MethodSpec, PartSpec, ProblemSpec, Scenario, TaskSpec, TerminalSpec,
};
use crate::error::CliError;
use crate::output::{matrix_json, to_json, vector_json, write_matrix_path_csv, write_text, write_trajectory_csv};

/// Command-line overrides and the base name of the artifacts.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub name: String,
    pub out_dir: Option<PathBuf>,
    pub steps: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    /// 0 on success, 3 when an invariant exceeded its tolerance.
    pub exit_code: u8,
    pub diagnostics: Value,
    pub diagnostics_path: PathBuf,
    pub trajectory_path: Option<PathBuf>,
}

struct TaskOutput {
    results: Value,
    invariants: Vec<InvariantBlock>,
    csv: Option<Csv>,
}

enum Csv {
    Trajectory { states: Vec<Vector>, controls: Vec<Vector> },
    MatrixPath { name: &'static str, values: Vec<Mat> },
}

/// Runs one scenario and writes its artifacts. Numerical failures still
/// leave a diagnostics file with the error before being returned.
pub fn run_scenario(s: &Scenario, opts: &RunOptions) -> Result<RunReport, CliError> {
    let steps = opts.steps.unwrap_or(s.grid.steps);
    let seed = opts.seed.unwrap_or(s.seed);
    let dir = opts
        .out_dir
        .clone()
        .or_else(|| s.output.dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir).map_err(|source| CliError::Io {
        path: dir.clone(),
        source,
    })?;
    let diagnostics_path = dir.join(s.output.diagnostics.clone().unwrap_or(format!("{}.json", opts.name)));
    let csv_path = dir.join(s.output.trajectory.clone().unwrap_or(format!("{}.csv", opts.name)));

    let (problem, heat) = s.build(steps, seed)?;
    let mut header = json!({
        "scenario": opts.name,
        "task": s.task.name(),
        "problem": {
            "kind": problem_kind(&s.problem),
            "state_dim": problem.state_dim(),
            "control_dim": problem.control_dim(),
        },
        "grid": { "t0": s.grid.t0, "t_end": s.grid.t_end, "steps": steps },
        "seed": seed,
    });
    let outcome = execute(s, &problem, heat.as_ref(), seed, steps);
    let out = match outcome {
        Ok(out) => out,
        Err(err) => {
            header["status"] = json!("numerical-failure");
            header["error"] = json!(err.to_string());
            write_text(&diagnostics_path, &to_json(&header))?;
            return Err(err);
        }
    };
    let pass = all_pass(&out.invariants);
    header["status"] = json!(if pass { "ok" } else { "verification-failed" });
    header["results"] = out.results;
    header["invariants"] = serde_json::to_value(&out.invariants).expect("invariant blocks serialize");
    let trajectory_path = match out.csv {
        Some(Csv::Trajectory { states, controls }) => {
            write_trajectory_csv(&csv_path, problem.grid(), &states, &controls)?;
            Some(csv_path)
        }
        Some(Csv::MatrixPath { name, values }) => {
            write_matrix_path_csv(&csv_path, problem.grid(), name, &values)?;
            Some(csv_path)
        }
        None => None,
    };
    header["artifacts"] = json!({
        "diagnostics": file_name(&diagnostics_path),
        "trajectory": trajectory_path.as_deref().map(file_name),
    });
    write_text(&diagnostics_path, &to_json(&header))?;
    Ok(RunReport {
        exit_code: if pass { 0 } else { 3 },
        diagnostics: header,
        diagnostics_path,
        trajectory_path,
    })
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default()
}

fn problem_kind(spec: &ProblemSpec) -> &'static str {
    match spec {
        ProblemSpec::ScalarLq { .. } => "scalar-lq",
        ProblemSpec::Random { .. } => "random",
        ProblemSpec::HeatSpectral { .. } => "heat-spectral",
        ProblemSpec::Explicit { .. } => "explicit",
    }
}

fn execute(
    s: &Scenario,
    p: &ProblemData,
    heat: Option<&SpectralHeatModel>,
    seed: u64,
    steps: usize,
) -> Result<TaskOutput, CliError> {
    let tol = &s.tolerances;
    let n = p.state_dim();
    let grid = p.grid().clone();
    let last = grid.last();
    match &s.task {
        TaskSpec::Riccati {} => {
            let ric = solve_riccati(p)?;
            // observed order from P(t0) on steps/4, steps/2, steps
            let coarse: Vec<Mat> = [4, 2]
                .iter()
                .map(|&d| Ok(solve_riccati(&s.build((steps / d).max(2), seed)?.0)?.at(0).clone()))
                .collect::<Result<_, CliError>>()?;
            let e1 = (&coarse[0] - &coarse[1]).norm();
            let e2 = (&coarse[1] - ric.at(0)).norm();
            let order = (e1 / e2).log2();
            let scale = ric.p.iter().map(|m| m.norm()).fold(1.0, f64::max);
            let min_eig = ric.p.iter().map(min_sym_eigenvalue).fold(f64::INFINITY, f64::min);
            let results = json!({
                "P_t0": matrix_json(ric.at(0)),
                "P_t_end": matrix_json(ric.at(last)),
                "initial_condition_number": ric.initial_condition_number,
                "max_asymmetry": ric.max_asymmetry(),
                "min_eigenvalue": min_eig,
                "convergence_order": order,
            });
            let invariants = vec![
                InvariantBlock::at_most("riccati-symmetry", ric.max_asymmetry(), tol.riccati_symmetry * scale),
                InvariantBlock::at_most("riccati-psd", (-min_eig).max(0.0), tol.eigenvalue * scale),
            ];
            Ok(TaskOutput {
                results,
                invariants,
                csv: Some(Csv::MatrixPath {
                    name: "P",
                    values: ric.p.clone(),
                }),
            })
        }
        TaskSpec::KernelGram { points, part } => {
            let idx = points
                .iter()
                .map(|&t| node_index(&grid, t, "task.points"))
                .collect::<Result<Vec<_>, _>>()?;
            let pl = Pipeline::new(p.clone())?;
            let part = match part {
                PartSpec::Full => KernelPart::Full,
                PartSpec::Initial => KernelPart::InitialState,
                PartSpec::ZeroInitial => KernelPart::ZeroInitial,
            };
            let (gram, defect) = gram_with_defect(&pl.kernel, &idx, part)?;
            let min_eig = min_sym_eigenvalue(&gram);
            let results = json!({
                "points": points,
                "gram": matrix_json(&gram),
                "min_eigenvalue": min_eig,
                "asymmetry": defect,
                "exact_quadrature": pl.kernel.exact_quadrature(),
            });
            Ok(TaskOutput {
                results,
                invariants: vec![
                    InvariantBlock::at_most("gram-psd", (-min_eig).max(0.0), tol.gram),
                    InvariantBlock::at_most("adjoint-symmetry", defect, tol.kernel_symmetry),
                ],
                csv: None,
            })
        }
        TaskSpec::LqrCompare { y0 } => {
            let y0 = vector(y0, n, "task.y0")?;
            let pl = Pipeline::new(p.clone())?;
            let sol = solve_lqr_via_kernel(p, &pl.riccati, &pl.kernel, &pl.open_loop, &y0)?;
            let classical = lqrk_core::optimal_lqr_classical(p, &pl.riccati, &y0)?;
            let results = json!({
                "y0": vector_json(&y0),
                "gap": sol.residual,
                "relative_gap": sol.residual / y0.norm(),
                "cost_kernel": sol.objective,
                "cost_classical": classical.cost,
                "P_t0": matrix_json(pl.riccati.at(0)),
            });
            Ok(TaskOutput {
                results,
                invariants: vec![InvariantBlock::at_most("lqr-equivalence", sol.residual, tol.lqr_gap * y0.norm())],
                csv: Some(Csv::Trajectory {
                    states: sol.element.trajectory.states,
                    controls: sol.element.control.controls,
                }),
            })
        }
        TaskSpec::Mayer {
            terminal,
            method,
            damping,
            max_iterations,
            tolerance,
        } => {
            let cost: Arc<dyn TerminalCost> = match terminal {
                TerminalSpec::Quadratic { target, weight } => Arc::new(QuadraticCost::new(
                    weight_matrix(weight, n, "task.terminal.weight")?,
                    vector(target, n, "task.terminal.target")?,
                )?),
                TerminalSpec::LogCosh { target, scale, hessian } => Arc::new(LogCoshCost {
                    target: vector(target, n, "task.terminal.target")?,
                    scale: *scale,
                    with_hessian: *hessian,
                }),
            };
            let mp = MayerProblem::new(p.clone(), cost);
            let gradient_check = mp.gradient_check(10, seed);
            let pl = Pipeline::new(p.clone())?;
            let opts = MayerOptions {
                method: match method {
                    MethodSpec::Auto => MayerMethod::Auto,
                    MethodSpec::Picard => MayerMethod::Picard,
                    MethodSpec::Newton => MayerMethod::Newton,
                },
                damping: *damping,
                max_iterations: *max_iterations,
                tolerance: *tolerance,
            };
            let sol = solve_mayer(&mp, &pl.kernel, &opts)?;
            let objective = eval_objective(p, &sol.element, Some(mp.cost.as_ref()))?;
            let results = json!({
                "z": vector_json(&sol.coeffs[0]),
                "y_t_end": vector_json(sol.element.trajectory.at(last)),
                "y_t0": vector_json(sol.element.trajectory.at(0)),
                "residual": sol.residual,
                "iterations": sol.iterations,
                "objective": objective.value,
                "convention": format!("{:?}", objective.convention),
                "gradient_check": gradient_check,
            });
            Ok(TaskOutput {
                results,
                invariants: vec![
                    InvariantBlock::at_most("mayer-stationarity", sol.residual, tol.stationarity),
                    InvariantBlock::at_most("terminal-gradient", gradient_check, 1e-5),
                ],
                csv: Some(Csv::Trajectory {
                    states: sol.element.trajectory.states,
                    controls: sol.element.control.controls,
                }),
            })
        }
        TaskSpec::Interp {
            y0,
            points,
            targets,
            ridge,
        } => {
            let y0 = match y0 {
                Some(v) => vector(v, n, "task.y0")?,
                None => Vector::zeros(n),
            };
            let idx = points
                .iter()
                .map(|&t| node_index(&grid, t, "task.points"))
                .collect::<Result<Vec<_>, _>>()?;
            let targets = targets
                .iter()
                .map(|t| vector(t, n, "task.targets"))
                .collect::<Result<Vec<_>, _>>()?;
            let pl = Pipeline::new(p.clone())?;
            let sol = solve_interpolation(p, &pl.kernel, &pl.open_loop, &y0, &idx, &targets, *ridge)?;
            let results = json!({
                "points": points,
                "coeffs": sol.coeffs.iter().map(vector_json).collect::<Vec<_>>(),
                "objective": sol.objective,
                "max_violation": sol.residual,
                "ridge": ridge,
            });
            let invariants = if *ridge == 0.0 {
                vec![InvariantBlock::at_most("interpolation-feasibility", sol.residual, tol.feasibility)]
            } else {
                Vec::new()
            };
            Ok(TaskOutput {
                results,
                invariants,
                csv: Some(Csv::Trajectory {
                    states: sol.element.trajectory.states,
                    controls: sol.element.control.controls,
                }),
            })
        }
        TaskSpec::HeatCheck { s: at_s, t: at_t } => {
            let model = heat.expect("heat-check is only accepted with a heat-spectral problem");
            for (t, key) in [(*at_s, "task.s"), (*at_t, "task.t")] {
                node_index(&grid, t, key)?;
            }
            let pl = Pipeline::new(p.clone())?;
            let cmp = compare_with_analytic(model, &pl.kernel);
            let report = check_k1_identity(model, *at_s, *at_t)?;
            let semigroup = heat_semigroup_defect(0.3, 0.5, &[0.0, 0.5, -1.0, 2.0], 12.0, 4001)?;
            let modes: Vec<Value> = report
                .modes
                .iter()
                .map(|m| {
                    json!({
                        "frequency": m.frequency,
                        "rate": m.rate,
                        "integral_of_kernel": m.printed_left,
                        "kernel_at_squared_time": m.printed_right,
                        "printed_identity_holds": m.printed_holds,
                        "k1_closed_form": m.k1_closed_form,
                        "k1_change_of_variables": m.k1_change_of_variables,
                    })
                })
                .collect();
            let results = json!({
                "rates": p.a.at(0).diagonal().iter().copied().collect::<Vec<_>>(),
                "exact_quadrature": pl.kernel.exact_quadrature(),
                "k0_error": cmp.k0_error,
                "k1_error": cmp.k1_error,
                "mode_coupling": cmp.coupling,
                "identity": {
                    "s": at_s,
                    "t": at_t,
                    "modes": modes,
                    "printed_identity_failures": report.printed_failures,
                    "change_of_variables_error": report.max_change_of_variables_error,
                },
                "semigroup_defect": semigroup,
            });
            Ok(TaskOutput {
                results,
                invariants: vec![
                    InvariantBlock::at_most("heat-k1-closed-form", cmp.k1_error, tol.heat_k1),
                    InvariantBlock::at_most("heat-k0-closed-form", cmp.k0_error, tol.heat_k0),
                    InvariantBlock::at_most("heat-change-of-variables", report.max_change_of_variables_error, tol.heat_identity),
                    InvariantBlock::at_most("heat-semigroup", semigroup, 1e-4),
                ],
                csv: None,
            })
        }
        TaskSpec::Verify {} => {
            let pl = Pipeline::new(p.clone())?;
            // refinement replays the samples on twice the steps when cheap
            let refined = if n <= 4 && !matches!(s.problem, ProblemSpec::Explicit { .. }) {
                Some(Pipeline::new(s.build(2 * steps, seed)?.0)?)
            } else {
                None
            };
            let invariants = check_problem(&pl, refined.as_ref(), heat, seed, tol)?;
            Ok(TaskOutput {
                results: json!({ "checks": invariants.len() }),
                invariants,
                csv: None,
            })
        }
    }
}
