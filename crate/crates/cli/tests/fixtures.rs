//! Every shipped scenario produces the exit code its `[expect]` table names,
//! and each written report parses back as JSON carrying that exit code.

use std::path::{Path, PathBuf};

use conereach_cli::commands::Command;
use conereach_cli::run_file;
use conereach_cli::scenario::{Overrides, Scenario};

fn scenarios() -> Vec<PathBuf> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "scn"))
        .collect();
    paths.sort();
    paths
}

fn expected(sc: &Scenario, cmd: Command) -> Option<i32> {
    match cmd {
        Command::Solve => sc.expect.solve,
        Command::Check => sc.expect.check,
        Command::Cstar { .. } => sc.expect.cstar,
        Command::OracleCompare => sc.expect.oracle_compare,
    }
}

fn run_contract(cmd: Command) {
    let out = tempfile::tempdir().unwrap();
    let mut checked = 0;
    for path in scenarios() {
        let sc = Scenario::load(&path).unwrap();
        let Some(want) = expected(&sc, cmd) else { continue };
        let got = match run_file(cmd, &path, Overrides::default(), out.path()) {
            Ok((outcome, written)) => {
                let report: serde_json::Value =
                    serde_json::from_str(&std::fs::read_to_string(&written[0]).unwrap()).unwrap();
                assert_eq!(report["exit_code"], outcome.exit_code, "{}", sc.name);
                assert_eq!(report["scenario"], sc.name.as_str());
                outcome.exit_code
            }
            Err(_) => 1,
        };
        assert_eq!(got, want, "{} {}", cmd.label(), sc.name);
        checked += 1;
    }
    assert!(checked > 0);
}

#[test]
fn solve_exit_codes() {
    run_contract(Command::Solve);
}

#[test]
fn check_exit_codes() {
    run_contract(Command::Check);
}

#[test]
fn cstar_exit_codes() {
    run_contract(Command::Cstar { with_solve: false });
}

#[test]
fn oracle_compare_exit_codes() {
    run_contract(Command::OracleCompare);
}

#[test]
fn every_fixture_declares_expectations() {
    for path in scenarios() {
        let sc = Scenario::load(&path).unwrap();
        let e = &sc.expect;
        assert!(
            e.solve.is_some() || e.check.is_some() || e.cstar.is_some() || e.oracle_compare.is_some(),
            "{}",
            sc.name
        );
    }
}
