//! The four scenario commands. Each returns a JSON report and an exit code:
//! 0 success, 1 error or unconverged solve, 2 infeasibility diagnosed.

use anyhow::{anyhow, Result};
use conereach::{lti, oracle, synth, DualSolution, DualStatus, Extended, ReachabilityProblem, SynthesizedControl};
use serde_json::{json, Map, Value};

use crate::output::{control_csv, num, nums};
use crate::scenario::Scenario;

/// Grid cap for `oracle-compare`; both pipelines run on the same grid.
pub const ORACLE_GRID: usize = 256;
/// Relative agreement required between the primal oracle and `−J`.
pub const ORACLE_AGREEMENT: f64 = 1e-3;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Solve,
    Check,
    Cstar { with_solve: bool },
    OracleCompare,
}

impl Command {
    pub fn label(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Check => "check",
            Command::Cstar { .. } => "cstar",
            Command::OracleCompare => "oracle-compare",
        }
    }

    /// Report file name; `solve` keeps the plain `<name>.report.json`.
    pub fn report_file(self, name: &str) -> String {
        match self {
            Command::Solve => format!("{name}.report.json"),
            Command::Check => format!("{name}.check.report.json"),
            Command::Cstar { .. } => format!("{name}.cstar.report.json"),
            Command::OracleCompare => format!("{name}.oracle.report.json"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub exit_code: i32,
    pub report: Value,
    pub csv: Option<String>,
    /// One human-readable line for stdout.
    pub summary: String,
}

pub fn run(cmd: Command, sc: &Scenario) -> Result<Outcome> {
    match cmd {
        Command::Solve => solve(sc),
        Command::Check => check(sc),
        Command::Cstar { with_solve } => cstar(sc, with_solve),
        Command::OracleCompare => oracle_compare(sc),
    }
}

fn header(cmd: Command, sc: &Scenario, grid_n: usize) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("command".into(), json!(cmd.label()));
    m.insert("scenario".into(), json!(sc.name));
    m.insert("horizon".into(), num(sc.horizon));
    m.insert("eps".into(), num(sc.eps));
    m.insert("grid_n".into(), json!(grid_n));
    m.insert("seed".into(), json!(sc.solver.seed));
    m
}

fn dual_json(sol: &DualSolution) -> Value {
    let runs: Vec<Value> = sol
        .runs
        .iter()
        .map(|r| {
            json!({
                "start_norm": num(r.start_norm),
                "status": r.status,
                "j_value": num(r.j_value),
                "grad_norm": num(r.grad_norm),
                "iterations": r.iterations,
                "p_f": nums(&r.p_f),
            })
        })
        .collect();
    let trace = match &sol.status {
        DualStatus::Diverging { norm_trace } => nums(norm_trace),
        _ => Value::Null,
    };
    json!({
        "status": sol.status.label(),
        "j_value": num(sol.j_value),
        "j_unbounded": sol.j_value == f64::NEG_INFINITY,
        "grad_norm": num(sol.grad_norm),
        "iterations": sol.iterations,
        "f_star": num(sol.f_star_value),
        "p_f": nums(sol.p_f_star.iter()),
        "mixed_nodes": sol.selection.iter().filter(|m| m.vertices.len() > 1).count(),
        "norm_trace": trace,
        "runs": runs,
    })
}

fn verification_json(prob: &ReachabilityProblem, ctrl: &SynthesizedControl, sol: &DualSolution) -> Value {
    let rep = synth::verify(prob, ctrl, sol);
    let mut v = serde_json::to_value(&rep).expect("report serializes");
    let frac = ctrl.fractional_cells.iter().filter(|c| c.is_some()).count();
    let obj = v.as_object_mut().expect("report is an object");
    obj.insert("extremality".into(), num(synth::extremality_check(prob, ctrl)));
    obj.insert("fractional_cell_nodes".into(), json!(frac));
    v
}

fn solve(sc: &Scenario) -> Result<Outcome> {
    let prob = sc.problem()?;
    let sol = prob.minimize_j(&sc.solver).map_err(|e| anyhow!("solver: {e}"))?;
    let mut report = header(Command::Solve, sc, sc.grid_n);
    report.insert("dual".into(), dual_json(&sol));
    let (exit_code, csv, summary) = match sol.status {
        DualStatus::Converged => {
            let ctrl = synth::reconstruct_control(&prob, &sol)?;
            let rep = synth::verify(&prob, &ctrl, &sol);
            report.insert("verification".into(), verification_json(&prob, &ctrl, &sol));
            let code = if rep.eps_satisfied { EXIT_OK } else { EXIT_ERROR };
            let line = format!(
                "{}: converged, terminal_error {:.3e} (eps {:.3e} + allowance {:.3e}), gap {:.3e}, singular {:.4}",
                sc.name, rep.terminal_error, rep.eps, rep.allowance, rep.duality_gap_rel, rep.singular_occupancy
            );
            (code, Some(control_csv(&ctrl)), line)
        }
        DualStatus::Diverging { .. } => (
            EXIT_INFEASIBLE,
            None,
            format!(
                "{}: dual diverging (‖p_f‖ > {:.1e}), target not reachable",
                sc.name, sc.solver.divergence_norm
            ),
        ),
        DualStatus::MaxIter => (
            EXIT_ERROR,
            None,
            format!(
                "{}: iteration limit reached, subgradient norm {:.3e}",
                sc.name, sol.grad_norm
            ),
        ),
    };
    report.insert("exit_code".into(), json!(exit_code));
    Ok(Outcome {
        exit_code,
        report: Value::Object(report),
        csv,
        summary,
    })
}

fn check(sc: &Scenario) -> Result<Outcome> {
    let sys = sc.system()?;
    let n = sys.states();
    let rank = lti::kalman_rank(&sys);
    let strong = if sys.inputs() >= 2 {
        Some(lti::strong_kalman_check(&sys)?)
    } else {
        None
    };
    let mut subcones = Vec::new();
    let mut line = format!("{}: kalman_rank {rank}/{n}", sc.name);
    if let Some(s) = strong {
        line.push_str(&format!(", strong_kalman {s}"));
    }
    for (c, basis) in sc.subcones().iter().enumerate() {
        let pass = lti::rank_family_test(&sys, basis)?;
        line.push_str(&format!(", subcone[{c}] {}", if pass { "pass" } else { "fail" }));
        subcones.push(json!({
            "basis": basis.iter().map(|b| nums(b.iter())).collect::<Vec<_>>(),
            "rank_family": pass,
        }));
    }
    let mut report = header(Command::Check, sc, sc.grid_n);
    report.insert("states".into(), json!(n));
    report.insert("inputs".into(), json!(sys.inputs()));
    report.insert("kalman_rank".into(), json!(rank));
    report.insert("controllable".into(), json!(rank == n));
    report.insert("strong_kalman".into(), json!(strong));
    report.insert("subcones".into(), Value::Array(subcones));
    report.insert("exit_code".into(), json!(EXIT_OK));
    Ok(Outcome {
        exit_code: EXIT_OK,
        report: Value::Object(report),
        csv: None,
        summary: line,
    })
}

fn cstar(sc: &Scenario, with_solve: bool) -> Result<Outcome> {
    let prob = sc.problem_on(sc.grid_n, 0.0)?;
    let est = prob.estimate_c_star(&sc.solver).map_err(|e| anyhow!("c*: {e}"))?;
    let mut report = header(Command::Cstar { with_solve }, sc, sc.grid_n);
    let (value, infinite) = match est.value {
        Extended::Finite(v) => (num(v), false),
        Extended::Infinite => (Value::Null, true),
    };
    report.insert("c_star".into(), value);
    report.insert("c_star_infinite".into(), json!(infinite));
    report.insert("attained_heuristic".into(), json!(est.attained));
    report.insert("iterations".into(), json!(est.iterations));
    report.insert(
        "maximizer".into(),
        est.maximizer.as_ref().map_or(Value::Null, |q| nums(q.iter())),
    );
    let mut line = match est.value {
        Extended::Finite(v) => format!("{}: c* = {v:.10e} (attained: {}, heuristic)", sc.name, est.attained),
        Extended::Infinite => format!("{}: c* = +inf (numerically), exact reachability fails", sc.name),
    };
    if with_solve {
        let sol = prob.minimize_j(&sc.solver).map_err(|e| anyhow!("solver: {e}"))?;
        let predicted = est.value.finite().map(|c| -c * c / 4.0);
        let rel = predicted.map(|p| (sol.j_value - p).abs() / p.abs().max(f64::MIN_POSITIVE));
        report.insert(
            "identity".into(),
            json!({
                "status": sol.status.label(),
                "min_j0": num(sol.j_value),
                "minus_c_star_sq_over_4": predicted.map_or(Value::Null, num),
                "rel_diff": rel.map_or(Value::Null, num),
            }),
        );
        if let Some(r) = rel {
            line.push_str(&format!(", min J_0 = {:.10e}, rel diff {r:.3e}", sol.j_value));
        }
    }
    let exit_code = if infinite { EXIT_INFEASIBLE } else { EXIT_OK };
    report.insert("exit_code".into(), json!(exit_code));
    Ok(Outcome {
        exit_code,
        report: Value::Object(report),
        csv: None,
        summary: line,
    })
}

fn oracle_compare(sc: &Scenario) -> Result<Outcome> {
    let grid_n = sc.grid_n.min(ORACLE_GRID);
    let prob = sc.problem_on(grid_n, sc.eps)?;
    let primal = oracle::solve_primal_direct(&prob, &oracle::PrimalOptions::default())?;
    let sol = prob.minimize_j(&sc.solver).map_err(|e| anyhow!("solver: {e}"))?;
    let mut report = header(Command::OracleCompare, sc, grid_n);
    report.insert("dual".into(), dual_json(&sol));
    report.insert("oracle_objective".into(), num(primal.objective));
    report.insert("oracle_residual".into(), num(primal.feasibility_residual));
    report.insert("oracle_iterations".into(), json!(primal.iterations));
    let (exit_code, summary) = match sol.status {
        DualStatus::Diverging { .. } => {
            report.insert("diagnosis".into(), json!("primal infeasible / dual diverging"));
            (
                EXIT_INFEASIBLE,
                format!(
                    "{}: primal infeasible / dual diverging (oracle residual {:.3e})",
                    sc.name, primal.feasibility_residual
                ),
            )
        }
        DualStatus::MaxIter => (
            EXIT_ERROR,
            format!("{}: dual iteration limit reached, no comparison", sc.name),
        ),
        DualStatus::Converged => {
            let ctrl = synth::reconstruct_control(&prob, &sol)?;
            let mut v = verification_json(&prob, &ctrl, &sol);
            let dual_value = -sol.j_value;
            let gap = (primal.objective - dual_value).abs() / (1.0 + primal.objective.abs());
            let obj = v.as_object_mut().expect("report is an object");
            obj.insert("oracle_objective".into(), num(primal.objective));
            obj.insert("oracle_residual".into(), num(primal.feasibility_residual));
            obj.insert("oracle_gap_rel".into(), num(gap));
            report.insert("verification".into(), v);
            let code = if gap <= ORACLE_AGREEMENT { EXIT_OK } else { EXIT_ERROR };
            (
                code,
                format!(
                    "{}: duality gap oracle vs dual {gap:.3e} (oracle {:.10e}, dual {:.10e}, residual {:.3e})",
                    sc.name, primal.objective, dual_value, primal.feasibility_residual
                ),
            )
        }
    };
    report.insert("exit_code".into(), json!(exit_code));
    Ok(Outcome {
        exit_code,
        report: Value::Object(report),
        csv: None,
        summary,
    })
}
