//! Built-in invariant suite run by `lqrk verify`.

use std::f64::consts::PI;
use std::sync::Arc;

use lqrk_core::TimeGrid;
use serde::Serialize;
use serde_json::{json, Value};

use crate::checks::{all_pass, check_problem, InvariantBlock, Pipeline};
use crate::config::{build_problem, CheckTolerances, ProblemSpec};
use crate::error::CliError;

#[derive(Debug, Clone, Serialize)]
pub struct CaseReport {
    pub name: String,
    pub state_dim: usize,
    pub steps: usize,
    pub invariants: Vec<InvariantBlock>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub seed: u64,
    pub cases: Vec<CaseReport>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.cases.iter().all(|c| all_pass(&c.invariants))
    }

    pub fn to_value(&self) -> Value {
        json!({
            "seed": self.seed,
            "status": if self.passed() { "ok" } else { "verification-failed" },
            "cases": serde_json::to_value(&self.cases).expect("reports serialize"),
        })
    }
}

struct Case {
    name: &'static str,
    spec: ProblemSpec,
    steps: usize,
    refine: bool,
}

fn cases() -> Vec<Case> {
    let random = |dim, controls| ProblemSpec::Random {
        dim,
        controls,
        time_varying: true,
    };
    vec![
        Case {
            name: "scalar-lq",
            spec: ProblemSpec::ScalarLq {
                a: 0.0,
                b: 1.0,
                m: 1.0,
                n: 1.0,
                j0: 1.0,
            },
            steps: 200,
            refine: true,
        },
        Case {
            name: "random-4x2",
            spec: random(4, 2),
            steps: 200,
            refine: true,
        },
        Case {
            name: "random-8x4",
            spec: random(8, 4),
            steps: 200,
            refine: false,
        },
        Case {
            name: "random-16x8",
            spec: random(16, 8),
            steps: 200,
            refine: false,
        },
        Case {
            name: "heat-spectral-5",
            spec: ProblemSpec::HeatSpectral {
                modes: 5,
                domain_length: 2.0 * PI,
                lambda: 1.0,
            },
            steps: 200,
            refine: false,
        },
    ]
}

/// Runs every built-in case on `[0, 1]`; random problems use `seed`.
pub fn run_verify_suite(seed: u64) -> Result<SuiteReport, CliError> {
    let tol = CheckTolerances::default();
    let mut reports = Vec::new();
    for case in cases() {
        let build = |steps| {
            let grid = Arc::new(TimeGrid::uniform(0.0, 1.0, steps)?);
            build_problem(&case.spec, grid, seed)
        };
        let (p, heat) = build(case.steps)?;
        let state_dim = p.state_dim();
        let pl = Pipeline::new(p)?;
        let refined = if case.refine {
            Some(Pipeline::new(build(2 * case.steps)?.0)?)
        } else {
            None
        };
        let invariants = check_problem(&pl, refined.as_ref(), heat.as_ref(), seed, &tol)?;
        reports.push(CaseReport {
            name: case.name.to_string(),
            state_dim,
            steps: case.steps,
            invariants,
        });
    }
    Ok(SuiteReport { seed, cases: reports })
}
